//! Approximately exact evaluation of Pr(S_t >= s): Monte Carlo simulation
//! with Jeffreys intervals, and Panjer recursion on integer losses.

mod jeffreys;
mod monte_carlo;
mod panjer;

pub use jeffreys::{
    beta_quantile, design_sample_size, estimate_exceedance, jeffreys_interval, recommend_sample_size, DesignSpec,
    EstimateWithCI,
};
pub use monte_carlo::{monte_carlo_curve, simulate_annual_losses, write_losses, McConfig, PoissonSampler};
pub use panjer::{
    expand_quantiles, panjer_distribution, panjer_exceedance, panjer_pmf, PanjerConfig, PanjerDistribution,
    MAX_PANJER_POINTS,
};
