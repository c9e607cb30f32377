//! Finite-difference gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::problem::CompositeProblem;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
pub const FD_TOLERANCE: f64 = 1e-5;
/// Coordinates outside the row support probed per trial.
const EXTRA_COORDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub trials: usize,
    /// Largest `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖, 1e-8)` over the probed
    /// coordinates.
    pub max_rel_error: f64,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= FD_TOLERANCE
    }
}

/// Compares `∇f_i(x)` with central differences of `f_i` at random
/// `(i, x)`, on the support of `a_i` plus a few random coordinates.
pub fn finite_difference_check(problem: &CompositeProblem<f64>, trials: usize, seed: u64) -> Result<GradientCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l, n) = (problem.num_components(), problem.dim());
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let i = rng.random_range(0..l);
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let g = problem.grad_component(i, &x)?.to_dense(n);
        let mut coords = problem.data().row(i).indices.clone();
        coords.extend((0..EXTRA_COORDS.min(n)).map(|_| rng.random_range(0..n)));
        coords.sort_unstable();
        coords.dedup();
        let (mut diff, mut na, mut nf) = (0.0f64, 0.0f64, 0.0f64);
        for &c in &coords {
            let orig = x[c];
            x[c] = orig + FD_STEP;
            let up = problem.component_value(i, &x)?;
            x[c] = orig - FD_STEP;
            let down = problem.component_value(i, &x)?;
            x[c] = orig;
            let fd = (up - down) / (2.0 * FD_STEP);
            diff += (g[c] - fd) * (g[c] - fd);
            na += g[c] * g[c];
            nf += fd * fd;
        }
        let rel = diff.sqrt() / na.sqrt().max(nf.sqrt()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(GradientCheck {
        trials,
        max_rel_error: worst,
    })
}
