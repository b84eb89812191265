//! Fixtures shared by the benchmarks.

use hadamard::analysis::schedule_grid;
use hadamard::{CurvatureProfile, ModelManifold, WarpSolution};

/// Model with `c(θ) = θ^k` in dimension `n`, with the warp solved to `r_max`.
pub fn power_manifold(k: f64, n: usize, r_max: f64) -> ModelManifold {
    let c = CurvatureProfile::power(k, 1.0).expect("valid power profile");
    ModelManifold::new(n, WarpSolution::solve_shared(&c, r_max).expect("warp solves")).expect("valid model")
}

/// Radial grid on `[0, r_max]` with `nodes` nodes that contains every integer radius.
pub fn integer_grid(r_max: f64, nodes: usize) -> Vec<f64> {
    let radii: Vec<f64> = (1..=r_max as usize).map(|r| r as f64).collect();
    schedule_grid(&radii, nodes).expect("valid schedule")
}
