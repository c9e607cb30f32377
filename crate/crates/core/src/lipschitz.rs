//! Normal, block-restricted and block-coordinate Lipschitz constants.
//!
//! For a perturbation `Δ_j` supported on block `G_j`:
//!
//! * `L_nor` bounds `‖∇f_i(x) − ∇f_i(y)‖ / ‖x − y‖` for arbitrary `y`;
//! * `L_res` bounds the *full* gradient change `‖∇f_i(x+Δ_j) − ∇f_i(x)‖ / ‖Δ_j‖`;
//! * `L_max` bounds the *block-j component* of that change, which is what
//!   the coordinate descent inequality
//!   `f_i(x+Δ_j) ≤ f_i(x) + ⟨∇_{G_j} f_i(x), Δ_j⟩ + (L_max/2)‖Δ_j‖²` needs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::scalar::{dist, norm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimates<T> {
    pub l_nor: T,
    pub l_res: T,
    pub l_max: T,
    /// `L_res / L_max`
    pub lambda_res: T,
    /// `L_nor / L_max`
    pub lambda_nor: T,
}

impl<T: Scalar> LipschitzEstimates<T> {
    /// Builds estimates from the three constants; rejects orderings other
    /// than `0 < L_max ≤ L_res ≤ L_nor`.
    pub fn new(l_nor: T, l_res: T, l_max: T) -> Result<Self> {
        if !(l_max > T::zero()) || !(l_max <= l_res) || !(l_res <= l_nor) || !l_nor.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "Lipschitz constants must satisfy 0 < L_max <= L_res <= L_nor, got {l_max}, {l_res}, {l_nor}"
            )));
        }
        Ok(LipschitzEstimates {
            l_nor,
            l_res,
            l_max,
            lambda_res: l_res / l_max,
            lambda_nor: l_nor / l_max,
        })
    }

    /// Multiplies every constant by `factor`; ratios are unchanged.
    pub fn scaled(&self, factor: T) -> Self {
        LipschitzEstimates {
            l_nor: self.l_nor * factor,
            l_res: self.l_res * factor,
            l_max: self.l_max * factor,
            ..*self
        }
    }
}

/// Closed-form bounds for the built-in generalized linear losses.
///
/// With `∇²f_i = φ''·a_i a_iᵀ + μI` and `φ'' ≤ c`:
/// `L_nor = c·max‖a_i‖² + μ`, `L_res = c·max ‖a_i‖‖a_{i,G_j}‖ + μ`,
/// `L_max = c·max ‖a_{i,G_j}‖² + μ`.
pub fn estimate_closed_form<T: Scalar>(problem: &CompositeProblem<T>) -> Result<LipschitzEstimates<T>> {
    let data = problem.data();
    if data.num_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let part = problem.partition();
    let mut block_sq = vec![T::zero(); part.num_blocks()];
    let mut touched: Vec<usize> = Vec::new();
    let (mut nor, mut res, mut max) = (T::zero(), T::zero(), T::zero());
    for row in data.rows() {
        let mut full = T::zero();
        for (c, a) in row.iter() {
            let j = part.block_of(c);
            if block_sq[j] == T::zero() {
                touched.push(j);
            }
            block_sq[j] += a * a;
            full += a * a;
        }
        let mut top = T::zero();
        for &j in &touched {
            top = top.max(block_sq[j]);
            block_sq[j] = T::zero();
        }
        touched.clear();
        nor = nor.max(full);
        res = res.max(if top == full { full } else { full.sqrt() * top.sqrt() });
        max = max.max(top);
    }
    let c = T::of(problem.loss().curvature_bound());
    let mu = problem.ridge();
    let (l_nor, mut l_res, mut l_max) = (c * nor + mu, c * res + mu, c * max + mu);
    // rounding in sqrt·sqrt can nudge the ordering by an ulp
    l_res = l_res.min(l_nor);
    l_max = l_max.min(l_res);
    if !(l_max > T::zero()) {
        return Err(Error::InvalidData(
            "all rows are zero: block Lipschitz constant vanishes".into(),
        ));
    }
    LipschitzEstimates::new(l_nor, l_res, l_max)
}

/// Gradient-change ratios observed for one block perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRatios<T> {
    /// `‖∇f_i(x+Δ_j) − ∇f_i(x)‖ / ‖Δ_j‖`, compared with `L_res`
    pub full: T,
    /// `‖[∇f_i(x+Δ_j) − ∇f_i(x)]_{G_j}‖ / ‖Δ_j‖`, compared with `L_max`
    pub block: T,
}

/// Ratios for perturbing block `j` of `x` by `delta` (length `|G_j|`).
pub fn block_ratios<T: Scalar>(
    problem: &CompositeProblem<T>,
    i: usize,
    j: usize,
    x: &[T],
    delta: &[T],
) -> Result<BlockRatios<T>> {
    let part = problem.partition();
    problem.check_block(j)?;
    if delta.len() != part.block_len(j) {
        return Err(Error::DimensionMismatch {
            expected: part.block_len(j),
            got: delta.len(),
        });
    }
    let n = problem.dim();
    let mut y = x.to_vec();
    for (&c, &d) in part.block(j).iter().zip(delta) {
        y[c] += d;
    }
    let g0 = problem.grad_component(i, x)?.to_dense(n);
    let g1 = problem.grad_component(i, &y)?.to_dense(n);
    // use the realized perturbation, not the requested one
    let step: Vec<T> = part.block(j).iter().map(|&c| y[c] - x[c]).collect();
    let dn = norm(&step);
    let full = dist(&g1, &g0) / dn;
    let block = dist(&part.gather(j, &g1), &part.gather(j, &g0)) / dn;
    Ok(BlockRatios { full, block })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub trials: usize,
    pub max_ratio_nor: T,
    pub max_ratio_res: T,
    pub max_ratio_max: T,
    pub estimates: LipschitzEstimates<T>,
    pub passed: bool,
}

impl<T: Scalar> std::fmt::Display for ValidationReport<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let e = &self.estimates;
        writeln!(f, "lipschitz sampling ({} trials): {}", self.trials, if self.passed { "PASS" } else { "FAIL" })?;
        writeln!(f, "  L_nor = {:<14.6e} observed max {:.6e}", e.l_nor, self.max_ratio_nor)?;
        writeln!(f, "  L_res = {:<14.6e} observed max {:.6e}", e.l_res, self.max_ratio_res)?;
        write!(f, "  L_max = {:<14.6e} observed max {:.6e}", e.l_max, self.max_ratio_max)
    }
}

/// Perturbation magnitudes probed by the sampler.
pub const PERTURBATION_SCALES: [f64; 4] = [1e-4, 1e-2, 1.0, 1e2];

/// Empirically checks `estimates` against random perturbations.
///
/// Each trial draws `x`, a component `i`, a block `j`, and a Gaussian
/// direction scaled by one of [`PERTURBATION_SCALES`]. Passes iff every
/// observed ratio is at most its estimate times `1 + 1e-9`.
pub fn validate_by_sampling<T: Scalar>(
    problem: &CompositeProblem<T>,
    estimates: &LipschitzEstimates<T>,
    trials: usize,
    seed: u64,
) -> ValidationReport<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.dim();
    let l = problem.num_components();
    let k = problem.num_blocks();
    let part = problem.partition();
    let (mut r_nor, mut r_res, mut r_max) = (T::zero(), T::zero(), T::zero());
    let gauss = |rng: &mut ChaCha8Rng| T::of(rng.sample::<f64, _>(StandardNormal));

    for t in 0..trials.max(1) {
        let scale = T::of(PERTURBATION_SCALES[t % PERTURBATION_SCALES.len()]);
        let x: Vec<T> = (0..n).map(|_| gauss(&mut rng)).collect();
        let i = rng.random_range(0..l);
        let j = rng.random_range(0..k);
        let delta: Vec<T> = (0..part.block_len(j))
            .map(|_| gauss(&mut rng) * scale)
            .collect();
        if let Ok(r) = block_ratios(problem, i, j, &x, &delta) {
            if r.full.is_finite() {
                r_res = r_res.max(r.full);
            }
            if r.block.is_finite() {
                r_max = r_max.max(r.block);
            }
        }
        let y: Vec<T> = x.iter().map(|&v| v + gauss(&mut rng) * scale).collect();
        if let (Ok(g0), Ok(g1)) = (problem.grad_component(i, &x), problem.grad_component(i, &y)) {
            let dn = dist(&y, &x);
            let r = dist(&g1.to_dense(n), &g0.to_dense(n)) / dn;
            if r.is_finite() {
                r_nor = r_nor.max(r);
            }
        }
    }

    let tol = T::one() + T::of(1e-9);
    let passed = r_nor <= estimates.l_nor * tol
        && r_res <= estimates.l_res * tol
        && r_max <= estimates.l_max * tol;
    ValidationReport {
        trials: trials.max(1),
        max_ratio_nor: r_nor,
        max_ratio_res: r_res,
        max_ratio_max: r_max,
        estimates: *estimates,
        passed,
    }
}
