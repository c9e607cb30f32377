//! Step-size bounds and convergence-rate predictors for the asynchronous
//! solver.
//!
//! The block count `k` is used wherever the rate expressions mention the
//! problem size.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inputs to the step-size and rate formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams<T> {
    pub rho: T,
    /// Staleness bound `τ`.
    pub tau: usize,
    /// Inner iterations per epoch.
    pub m: usize,
    /// Number of blocks.
    pub k: usize,
    pub lambda_res: T,
    pub lambda_nor: T,
    /// Optimal strong convexity parameter; zero for general convex `f`.
    pub l_osc: T,
    pub l_max: T,
}

impl<T: Scalar> TheoryParams<T> {
    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if self.m == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("m and k must be at least 1".into()));
        }
        if !(self.lambda_res >= T::one()) || !(self.lambda_nor >= self.lambda_res) {
            return Err(Error::InvalidConfig(format!(
                "need lambda_nor >= lambda_res >= 1, got {} and {}",
                self.lambda_nor, self.lambda_res
            )));
        }
        if !(self.l_osc >= T::zero()) || !(self.l_max > T::zero()) {
            return Err(Error::InvalidConfig("l_osc must be >= 0 and L_max > 0".into()));
        }
        Ok(())
    }
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if !(rho > T::one()) || !rho.is_finite() {
        return Err(Error::RhoNotAboveOne(rho.to_f64_lossy()));
    }
    Ok(())
}

/// `Σ_{t=1}^{count} r^t` by the closed form `(r − r^{count+1}) / (1 − r)`.
fn geometric<T: Scalar>(r: T, count: usize) -> T {
    if count == 0 {
        return T::zero();
    }
    let top = r.powi(count as i32 + 1);
    (r - top) / (T::one() - r)
}

/// `θ₁ = Σ_{t=1}^{τ} ρ^{t/2}`.
pub fn theta1<T: Scalar>(rho: T, tau: usize) -> Result<T> {
    check_rho(rho)?;
    Ok(geometric(rho.sqrt(), tau))
}

/// `θ₂ = Σ_{t=1}^{m−1} ρ^{t/2}`.
pub fn theta2<T: Scalar>(rho: T, m: usize) -> Result<T> {
    check_rho(rho)?;
    Ok(geometric(rho.sqrt(), m.saturating_sub(1)))
}

/// `θ′ = Σ_{t=1}^{τ} ρ^t`.
pub fn theta_prime<T: Scalar>(rho: T, tau: usize) -> Result<T> {
    check_rho(rho)?;
    Ok(geometric(rho, tau))
}

/// Result of evaluating the admissible step-size bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaBound<T> {
    Feasible(GammaDiagnostics<T>),
    /// `√k (1 − 1/ρ) ≤ 4`: no positive step is admitted.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDiagnostics<T> {
    pub gamma_max: T,
    pub term1: T,
    pub term2: T,
    pub theta1: T,
    pub theta2: T,
    pub theta_prime: T,
    /// `1 − Λ_nor γ − γτθ′/k − 2(Λ_res θ₁ + Λ_nor θ₂)γ/√k` at `gamma_max`.
    pub rate_condition_slack: T,
}

impl<T: Scalar> GammaDiagnostics<T> {
    /// Whether the additional condition used by the rate predictors holds
    /// at `gamma_max`.
    pub fn rate_condition_holds(&self) -> bool {
        self.rate_condition_slack >= T::zero()
    }
}

impl<T: Scalar> GammaBound<T> {
    pub fn gamma(&self) -> Option<T> {
        match self {
            GammaBound::Feasible(d) => Some(d.gamma_max),
            GammaBound::Infeasible => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, GammaBound::Feasible(_))
    }
}

/// Slack of the rate condition
/// `1 − Λ_nor γ − γτθ′/k − 2(Λ_res θ₁ + Λ_nor θ₂)γ/√k ≥ 0`.
pub fn rate_condition_slack<T: Scalar>(params: &TheoryParams<T>, gamma: T) -> Result<T> {
    params.validate()?;
    let t1 = theta1(params.rho, params.tau)?;
    let t2 = theta2(params.rho, params.m)?;
    let tp = theta_prime(params.rho, params.tau)?;
    Ok(slack(params, gamma, t1, t2, tp))
}

fn slack<T: Scalar>(p: &TheoryParams<T>, gamma: T, t1: T, t2: T, tp: T) -> T {
    let k = T::from_usize(p.k).expect("k fits scalar");
    let tau = T::from_usize(p.tau).expect("tau fits scalar");
    T::one()
        - p.lambda_nor * gamma
        - gamma * tau * tp / k
        - T::of(2.0) * (p.lambda_res * t1 + p.lambda_nor * t2) * gamma / k.sqrt()
}

/// Admissible step bound
/// `min{ (√k(1−ρ⁻¹) − 4) / (4(Λ_res(1+θ₁) + Λ_nor(1+θ₂))), √k / (½√k + 2Λ_nor θ₂ + Λ_res θ₁) }`.
pub fn gamma_bound<T: Scalar>(params: &TheoryParams<T>) -> Result<GammaBound<T>> {
    params.validate()?;
    let t1 = theta1(params.rho, params.tau)?;
    let t2 = theta2(params.rho, params.m)?;
    let tp = theta_prime(params.rho, params.tau)?;
    let sk = T::from_usize(params.k).expect("k fits scalar").sqrt();
    let numer = sk * (T::one() - params.rho.recip()) - T::of(4.0);
    if !(numer > T::zero()) {
        return Ok(GammaBound::Infeasible);
    }
    let (lr, ln) = (params.lambda_res, params.lambda_nor);
    let term1 = numer / (T::of(4.0) * (lr * (T::one() + t1) + ln * (T::one() + t2)));
    let term2 = sk / (T::of(0.5) * sk + T::of(2.0) * ln * t2 + lr * t1);
    let gamma_max = term1.min(term2);
    Ok(GammaBound::Feasible(GammaDiagnostics {
        gamma_max,
        term1,
        term2,
        theta1: t1,
        theta2: t2,
        theta_prime: tp,
        rate_condition_slack: slack(params, gamma_max, t1, t2, tp),
    }))
}

/// Per-epoch contraction `1 / (1 + 2mγl / (2k(lγ + L_max)))` of the
/// Lyapunov quantity under optimal strong convexity.
pub fn linear_rate<T: Scalar>(params: &TheoryParams<T>, gamma: T) -> Result<T> {
    if !(params.l_osc > T::zero()) {
        return Err(Error::NoStrongConvexity);
    }
    if !(gamma > T::zero()) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    let m = T::from_usize(params.m).expect("m fits scalar");
    let k = T::from_usize(params.k).expect("k fits scalar");
    let l = params.l_osc;
    let two = T::of(2.0);
    Ok(T::one() / (T::one() + two * m * gamma * l / (two * k * (l * gamma + params.l_max))))
}

/// Bound on `E F(x^s) − F*` for general convex `f`:
/// `(k L_max ‖x⁰ − P_S(x⁰)‖² + 2γk (F(x⁰) − F*)) / (2γk + 2mγs)`.
pub fn sublinear_bound<T: Scalar>(params: &TheoryParams<T>, gamma: T, s: usize, x0_dist_sq: T, f0_gap: T) -> T {
    let m = T::from_usize(params.m).expect("m fits scalar");
    let k = T::from_usize(params.k).expect("k fits scalar");
    let s = T::from_usize(s).expect("s fits scalar");
    let two = T::of(2.0);
    (k * params.l_max * x0_dist_sq + two * gamma * k * f0_gap) / (two * gamma * k + two * m * gamma * s)
}

/// Bundled predictions at the admissible step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction<T> {
    pub params: TheoryParams<T>,
    pub gamma: GammaBound<T>,
    /// Present when the step is feasible and `l_osc > 0`.
    pub linear_factor: Option<T>,
    pub x0_dist_sq: T,
    pub f0_gap: T,
}

impl<T: Scalar> RatePrediction<T> {
    pub fn new(params: TheoryParams<T>, x0_dist_sq: T, f0_gap: T) -> Result<Self> {
        let gamma = gamma_bound(&params)?;
        let linear_factor = match gamma.gamma() {
            Some(g) if params.l_osc > T::zero() => Some(linear_rate(&params, g)?),
            _ => None,
        };
        Ok(RatePrediction {
            params,
            gamma,
            linear_factor,
            x0_dist_sq,
            f0_gap,
        })
    }

    /// Sublinear bound at epoch `s`, or `None` when no step is admitted.
    pub fn sublinear_bound_at(&self, s: usize) -> Option<T> {
        self.gamma
            .gamma()
            .map(|g| sublinear_bound(&self.params, g, s, self.x0_dist_sq, self.f0_gap))
    }
}
