//! Statistical post-processing: strong-error tables, rate regression,
//! normality testing, density estimation and the cost model.

mod cost;
mod jb;
mod kde;
mod rate;
mod rmse;

pub use cost::{
    choose_params, cost_exact, cost_exponent_awea, cost_exponent_wea, ChosenParams, CostReport,
    Scheme,
};
pub use jb::{jarque_bera, sample_skewness_kurtosis, JarqueBera};
pub use kde::{kde_1d, kde_1d_auto, silverman_bandwidth, DensityCurve};
pub use rate::{fit_rate, RateFit};
pub use rmse::{rmse_paths, RmseRow, RmseTable};
