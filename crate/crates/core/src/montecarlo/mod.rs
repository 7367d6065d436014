//! Orbit sampling, Birkhoff sums and their statistics.

pub mod gof;
pub mod hill;
pub mod local;
pub mod observable;
pub mod sampling;
pub mod stats;
pub mod variance;

pub use gof::{gof_law, gof_normal, gof_stable, kolmogorov_quantile, GofReport};
pub use hill::{hill_index, hill_index_lower, tail_fit, tail_regression, HillEstimate, TailFit};
pub use local::{local_characteristic, LocalCf};
pub use observable::{Centering, Observable, ObservableFamily, PowerTerm};
pub use sampling::{
    sample_birkhoff, sample_birkhoff_multi, Init, Normalization, SampleMeta, SampleSet,
};
pub use variance::{variance_growth, VarianceGrowth, VarianceRow};
