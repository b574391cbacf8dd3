//! Continuous-time tools: normal distribution functions, exceedance
//! constants, Brownian paths, the diagonal Gaussian embedding and
//! Monte-Carlo exceedance experiments.

mod constants;
mod embed;
mod montecarlo;
mod normal;
mod path;

pub use constants::{
    corollary1_m, exceedance_constants, h_star, m0_fixed_direction, p0, solve_log_ineq, step_constraint_slack,
    ExceedanceConstants, STANDARD_STEP,
};
pub use embed::{embed_transform, ensemble_transform, Embedding, TransformSpec};
pub use montecarlo::{bm_exceedance_mc, independent_coeff_exceedance_mc};
pub use normal::{normal_cdf, normal_quantile, normal_sf};
pub use path::{
    bm_sup_tail_bound, bm_sup_tail_bound_raw, brownian_on_grid, geometric_grid, ou_transform, pinned_segment,
    uniform_grid, ClockMark, ClockPath,
};
