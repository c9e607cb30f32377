use log::warn;

use crate::error::{Error, Result};
use crate::lipschitz::LipschitzEstimates;
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;
use crate::theory::{gamma_bound, TheoryParams};

/// Default `ρ` used by the automatic step-size policy.
pub const AUTO_RHO: f64 = 2.0;
/// Fraction of the theoretical bound used by the automatic policy.
pub const AUTO_SAFETY: f64 = 0.9;
/// Theory steps below this trigger a warning.
const TINY_GAMMA: f64 = 1e-8;

/// How the step parameter `γ` is chosen. The prox-gradient step actually
/// taken is `γ / L_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice<T> {
    Fixed(T),
    /// Theory bound times [`AUTO_SAFETY`], falling back to
    /// `min(0.1, 1/Λ_nor)` when the bound admits no positive step.
    Auto { rho: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayInjection {
    /// A worker holds its read buffer until up to this many writes by other
    /// workers have landed (uniform draw per iteration).
    pub max_extra_staleness: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub threads: usize,
    pub epochs: usize,
    /// Inner iterations per epoch: the total across workers unless
    /// `per_thread_m` is set.
    pub inner_iters: usize,
    pub per_thread_m: bool,
    pub minibatch: usize,
    pub gamma: GammaChoice<T>,
    pub seed: u64,
    pub delay: Option<DelayInjection>,
    /// Record a trace row every this many epochs (the last epoch is always
    /// recorded).
    pub trace_every: usize,
    /// Starting point; zeros when absent.
    pub x0: Option<Vec<T>>,
    /// Overrides the closed-form Lipschitz estimates.
    pub lipschitz: Option<LipschitzEstimates<T>>,
    /// Point used for the trace's distance column.
    pub reference_point: Option<Vec<T>>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            threads: 1,
            epochs: 20,
            inner_iters: 1000,
            per_thread_m: false,
            minibatch: 1,
            gamma: GammaChoice::Auto { rho: T::of(AUTO_RHO) },
            seed: 0,
            delay: None,
            trace_every: 1,
            x0: None,
            lipschitz: None,
            reference_point: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self, problem: &CompositeProblem<T>) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.inner_iters == 0 {
            return bad("inner iterations must be >= 1");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be >= 1");
        }
        if self.trace_every == 0 {
            return bad("trace_every must be >= 1");
        }
        match self.gamma {
            GammaChoice::Fixed(g) if !(g >= T::zero()) || !g.is_finite() => {
                return bad("gamma must be finite and >= 0");
            }
            GammaChoice::Auto { rho } if !(rho > T::one()) => {
                return Err(Error::RhoNotAboveOne(rho.to_f64_lossy()));
            }
            _ => {}
        }
        for v in [&self.x0, &self.reference_point].into_iter().flatten() {
            if v.len() != problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: problem.dim(),
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    /// Inner iterations run by worker `w`.
    pub fn iters_for_worker(&self, w: usize) -> usize {
        if self.per_thread_m {
            self.inner_iters
        } else {
            let p = self.threads;
            self.inner_iters / p + usize::from(w < self.inner_iters % p)
        }
    }

    pub fn total_inner_iters(&self) -> usize {
        (0..self.threads).map(|w| self.iters_for_worker(w)).sum()
    }

    /// Staleness bound assumed by the automatic step-size policy: the
    /// natural in-flight window `p − 1` plus any injected delay.
    pub fn assumed_tau(&self) -> usize {
        self.threads - 1 + self.delay.map_or(0, |d| d.max_extra_staleness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSource {
    Fixed,
    Theory,
    /// The bound was infeasible; the heuristic step carries no guarantee.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedGamma<T> {
    pub gamma: T,
    pub source: GammaSource,
}

/// Applies the step-size policy.
pub fn resolve_gamma<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &SolverConfig<T>,
    est: &LipschitzEstimates<T>,
) -> Result<ResolvedGamma<T>> {
    let rho = match config.gamma {
        GammaChoice::Fixed(g) => {
            return Ok(ResolvedGamma {
                gamma: g,
                source: GammaSource::Fixed,
            })
        }
        GammaChoice::Auto { rho } => rho,
    };
    let params = TheoryParams {
        rho,
        tau: config.assumed_tau(),
        m: config.total_inner_iters(),
        k: problem.num_blocks(),
        lambda_res: est.lambda_res,
        lambda_nor: est.lambda_nor,
        l_osc: T::zero(),
        l_max: est.l_max,
    };
    let bound = gamma_bound(&params)?;
    match bound.gamma() {
        Some(g) if g > T::zero() && g.is_finite() => {
            let gamma = g * T::of(AUTO_SAFETY);
            if gamma < T::of(TINY_GAMMA) {
                warn!(
                    "theoretical step gamma = {gamma:e} (m = {}, tau = {}) is too small to make progress; \
                     pass an explicit gamma or use fewer inner iterations",
                    params.m, params.tau
                );
            }
            Ok(ResolvedGamma {
                gamma,
                source: GammaSource::Theory,
            })
        }
        _ => {
            let gamma = T::of(0.1).min(est.lambda_nor.recip());
            warn!(
                "step-size bound infeasible for k = {}, rho = {rho}; falling back to gamma = {gamma} \
                 (convergence guarantees do not apply)",
                params.k
            );
            Ok(ResolvedGamma {
                gamma,
                source: GammaSource::Fallback,
            })
        }
    }
}
