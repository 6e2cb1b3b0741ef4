mod influence;
mod rank;
mod serve;
mod simulate;

pub use influence::{embed, run as influence};
pub use rank::{eval_cmd as eval, rank_cmd as rank};
pub use serve::serve_cmd as serve;
pub use simulate::{
    budget_grid_cmd as budget_grid, fit_noise_cmd as fit_noise, noise_curve_cmd as noise_curve,
    simulate_cmd as simulate,
};
