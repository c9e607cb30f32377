//! Sequential reference solver and high-accuracy optimum.

use rand_chacha::ChaCha8Rng;

use super::config::SolverConfig;
use super::engine::{run, RunResult, WorkerScratch};
use super::step::{compute_block_step, draw_sample, worker_rng, BlockStep, EpochContext};
use super::trace::Trace;
use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ReferenceResult<T> {
    pub solution: Vec<T>,
    /// Objective at every recorded epoch boundary.
    pub objectives: Vec<f64>,
    /// Smallest objective seen, including the starting point.
    pub f_star: f64,
    pub trace: Trace,
}

/// Runs the solver with a single worker and consistent reads.
///
/// This is the threaded engine with `threads = 1`: worker 0 runs inline,
/// so the result is bit-identical to `run` at `p = 1` with the same seed.
pub fn run_sequential<T: Scalar>(problem: &CompositeProblem<T>, config: &SolverConfig<T>) -> Result<ReferenceResult<T>> {
    let cfg = SolverConfig {
        threads: 1,
        delay: None,
        ..config.clone()
    };
    let RunResult { solution, trace, .. } = run(problem, &cfg)?;
    let objectives = trace.objectives();
    let f_star = objectives.iter().copied().fold(trace.initial_objective, f64::min);
    Ok(ReferenceResult {
        solution,
        objectives,
        f_star,
        trace,
    })
}

/// Steps the inner recursion one iteration at a time, exposing each
/// block step. Uses the same sampling streams as worker 0.
pub struct SequentialStepper<'p, T: Scalar> {
    problem: &'p CompositeProblem<T>,
    ctx: EpochContext<'p, T>,
    x: Vec<T>,
    rng: ChaCha8Rng,
    scratch: WorkerScratch<T>,
    seed: u64,
    epoch: usize,
}

impl<'p, T: Scalar> SequentialStepper<'p, T> {
    /// `step` is `γ / L_max`.
    pub fn new(problem: &'p CompositeProblem<T>, x0: Vec<T>, step: T, minibatch: usize, seed: u64) -> Result<Self> {
        if x0.len() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got: x0.len(),
            });
        }
        if minibatch == 0 {
            return Err(Error::InvalidConfig("minibatch must be >= 1".into()));
        }
        let ctx = EpochContext::new(problem, x0.clone(), step, minibatch, 1)?;
        Ok(SequentialStepper {
            problem,
            ctx,
            x: x0,
            rng: worker_rng(seed, 0, 0),
            scratch: WorkerScratch::new(problem),
            seed,
            epoch: 0,
        })
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn context(&self) -> &EpochContext<'p, T> {
        &self.ctx
    }

    /// Takes a new snapshot at the current iterate.
    pub fn next_epoch(&mut self) -> Result<()> {
        self.epoch += 1;
        self.ctx = EpochContext::new(self.problem, self.x.clone(), self.ctx.step, self.ctx.minibatch, 1)?;
        self.rng = worker_rng(self.seed, 0, self.epoch);
        Ok(())
    }

    /// One inner iteration; returns the step just applied.
    pub fn step(&mut self) -> Result<&BlockStep<T>> {
        let (l, k) = (self.problem.num_components(), self.problem.num_blocks());
        let ws = &mut self.scratch;
        draw_sample(&mut self.rng, l, k, self.ctx.minibatch, &mut ws.sample);
        ws.buf.plan(self.problem, &ws.sample);
        for &c in &ws.buf.cells {
            ws.buf.values[c] = self.x[c];
        }
        compute_block_step(&self.ctx, &ws.sample, &ws.buf, &mut ws.step)?;
        self.problem.partition().scatter(ws.step.block, &ws.step.updated, &mut self.x);
        Ok(&ws.step)
    }
}

#[derive(Debug, Clone)]
pub struct HighAccuracy<T> {
    pub f_star: T,
    pub solution: Vec<T>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the objective settled.
    pub converged: bool,
}

/// Iterations per convergence check.
const WINDOW: usize = 100;
const DEFAULT_CAP: usize = 200_000;
const REL_TOL: f64 = 1e-12;

/// Accelerated proximal gradient with adaptive restart and backtracking.
///
/// Stops once the best objective improves by less than `1e-12` (relative)
/// over a window of iterations, or after the iteration cap.
pub fn solve_high_accuracy<T: Scalar>(problem: &CompositeProblem<T>) -> Result<HighAccuracy<T>> {
    solve_high_accuracy_capped(problem, DEFAULT_CAP)
}

pub fn solve_high_accuracy_capped<T: Scalar>(problem: &CompositeProblem<T>, max_iters: usize) -> Result<HighAccuracy<T>> {
    let n = problem.dim();
    let mut lip = smooth_lipschitz(problem) * T::of(1.01);
    if !(lip > T::zero()) {
        lip = T::one();
    }
    let half = T::of(0.5);

    let mut x = vec![T::zero(); n];
    let mut y = x.clone();
    let mut t = T::one();
    let mut fx = problem.objective(&x)?;
    let mut best = (fx, x.clone());
    let mut window_start = fx;
    let mut x_new = vec![T::zero(); n];
    let mut converged = false;
    let mut it = 0;

    while it < max_iters {
        it += 1;
        let fy = problem.smooth_value(&y)?;
        let gy = problem.grad_full(&y)?;
        loop {
            let step = lip.recip();
            for c in 0..n {
                x_new[c] = y[c] - step * gy[c];
            }
            prox_all(problem, &mut x_new, step);
            let mut lin = T::zero();
            let mut sq = T::zero();
            for c in 0..n {
                let d = x_new[c] - y[c];
                lin += gy[c] * d;
                sq += d * d;
            }
            let f_new = problem.smooth_value(&x_new)?;
            let slack = T::of(1e-12) * (fy.abs() + T::one());
            if f_new <= fy + lin + half * lip * sq + slack || !sq.is_normal() {
                break;
            }
            lip = lip * T::of(2.0);
        }
        let f_new = problem.objective(&x_new)?;
        if !f_new.is_finite() {
            return Err(Error::InvalidData("non-finite objective in high-accuracy solve".into()));
        }
        if f_new > fx {
            // restart the momentum
            t = T::one();
            y.copy_from_slice(&x);
        } else {
            let t_next = (T::one() + (T::one() + T::of(4.0) * t * t).sqrt()) * half;
            let beta = (t - T::one()) / t_next;
            for c in 0..n {
                y[c] = x_new[c] + beta * (x_new[c] - x[c]);
            }
            t = t_next;
            std::mem::swap(&mut x, &mut x_new);
            fx = f_new;
            if fx < best.0 {
                best.0 = fx;
                best.1.copy_from_slice(&x);
            }
        }
        if it % WINDOW == 0 {
            if window_start - best.0 <= T::of(REL_TOL) * best.0.abs() {
                converged = true;
                break;
            }
            window_start = best.0;
        }
    }

    Ok(HighAccuracy {
        f_star: best.0,
        solution: best.1,
        iterations: it,
        converged,
    })
}

fn prox_all<T: Scalar>(problem: &CompositeProblem<T>, x: &mut [T], step: T) {
    let part = problem.partition();
    let mut buf = Vec::with_capacity(part.max_block_len());
    for j in 0..part.num_blocks() {
        buf.clear();
        buf.extend(part.block(j).iter().map(|&c| x[c]));
        problem.regularizer().prox_in_place(&mut buf, step);
        part.scatter(j, &buf, x);
    }
}

/// `c·λ_max(AᵀA / l) + μ` by power iteration.
fn smooth_lipschitz<T: Scalar>(problem: &CompositeProblem<T>) -> T {
    let data = problem.data();
    let (n, l) = (problem.dim(), problem.num_components());
    let mut v: Vec<T> = (0..n).map(|c| T::one() + T::of((c % 7) as f64 * 0.1)).collect();
    let mut lam = T::zero();
    for _ in 0..100 {
        let nv = crate::scalar::norm(&v);
        if !(nv > T::zero()) {
            break;
        }
        v.iter_mut().for_each(|e| *e /= nv);
        let mut w = vec![T::zero(); n];
        for row in data.rows() {
            let m = row.dot_dense(&v);
            for (c, a) in row.iter() {
                w[c] += m * a;
            }
        }
        let inv_l = T::one() / T::from_usize(l).expect("row count fits scalar");
        w.iter_mut().for_each(|e| *e *= inv_l);
        lam = crate::scalar::norm(&w);
        v = w;
    }
    T::of(problem.loss().curvature_bound()) * lam + problem.ridge()
}
