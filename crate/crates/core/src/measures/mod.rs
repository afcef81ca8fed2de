//! Densities, weighted sums and submeasures, all in exact arithmetic.

pub mod density;
pub mod series;
pub mod submeasure;
pub mod weight;

pub use density::{density_window, dyadic_checkpoints, relative_density, DensityEstimate};
pub use series::{abel_dini, eu_ratio, eu_ratio_bounds, sum_range, summable_partial, AbelDiniReport, SeriesBounds};
pub use submeasure::{exh_tail, farah_block_measure, finexh_invariance_check, SubmeasureExpr, TailEstimate};
pub use weight::{BlockValue, WeightFn};
