//! One inner iteration: sample, plan the read, compute the variance-reduced
//! block gradient and the prox step.
//!
//! Everything here is shared by the threaded engine, the sequential
//! reference and the simulated delay harness, so the engines differ only
//! in how cells are read and written.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::scalar::Scalar;

/// Frozen per-epoch state: snapshot `x̃`, `μ = ∇f(x̃)` and the cached
/// loss derivatives `φ'(a_iᵀx̃)`.
#[derive(Debug, Clone)]
pub struct EpochContext<'a, T> {
    pub problem: &'a CompositeProblem<T>,
    pub snapshot: Vec<T>,
    pub full_grad: Vec<T>,
    snapshot_deriv: Vec<T>,
    /// Prox-gradient step `γ / L_max`.
    pub step: T,
    pub minibatch: usize,
}

impl<'a, T: Scalar> EpochContext<'a, T> {
    /// Builds the context, computing the full gradient with `workers`
    /// threads.
    pub fn new(
        problem: &'a CompositeProblem<T>,
        snapshot: Vec<T>,
        step: T,
        minibatch: usize,
        workers: usize,
    ) -> Result<Self> {
        let fg = problem.full_gradient(&snapshot, workers)?;
        let snapshot_deriv = fg
            .margins
            .iter()
            .enumerate()
            .map(|(i, &m)| problem.loss_derivative(i, m))
            .collect();
        Ok(EpochContext {
            problem,
            snapshot,
            full_grad: fg.grad,
            snapshot_deriv,
            step,
            minibatch,
        })
    }
}

/// The random choices of one inner iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub batch: Vec<usize>,
    pub block: usize,
}

/// Draws `|B|` components uniformly with replacement, then a block
/// uniformly.
pub fn draw_sample(rng: &mut ChaCha8Rng, l: usize, k: usize, minibatch: usize, out: &mut Sample) {
    out.batch.clear();
    out.batch.extend((0..minibatch).map(|_| rng.random_range(0..l)));
    out.block = rng.random_range(0..k);
}

/// Sampling stream for worker `worker` in epoch `epoch`.
pub fn worker_rng(seed: u64, worker: usize, epoch: usize) -> ChaCha8Rng {
    stream_rng(seed, worker, epoch, 0)
}

/// Independent stream used only for injected delays, so enabling delays
/// does not perturb the sampling sequence.
pub fn delay_rng(seed: u64, worker: usize, epoch: usize) -> ChaCha8Rng {
    stream_rng(seed, worker, epoch, 1)
}

pub(crate) fn stream_rng(seed: u64, worker: usize, epoch: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 62) ^ ((epoch as u64) << 24) ^ worker as u64);
    rng
}

/// Worker-local copy of the cells one iteration needs.
///
/// `values` is indexed by coordinate but only the cells listed in `cells`
/// hold meaningful data for the current iteration. Each cell is read at
/// most once per iteration.
#[derive(Debug, Clone)]
pub struct ReadBuffer<T> {
    pub values: Vec<T>,
    pub cells: Vec<usize>,
    stamp: Vec<u32>,
    generation: u32,
}

impl<T: Scalar> ReadBuffer<T> {
    pub fn new(n: usize) -> Self {
        ReadBuffer {
            values: vec![T::zero(); n],
            cells: Vec::new(),
            stamp: vec![0; n],
            generation: 0,
        }
    }

    /// Lists the cells the iteration reads: block `G_j` first, then the
    /// support of every sampled row outside the block.
    pub fn plan(&mut self, problem: &CompositeProblem<T>, sample: &Sample) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let g = self.generation;
        self.cells.clear();
        for &c in problem.partition().block(sample.block) {
            self.stamp[c] = g;
            self.cells.push(c);
        }
        for &i in &sample.batch {
            for &c in &problem.data().row(i).indices {
                if self.stamp[c] != g {
                    self.stamp[c] = g;
                    self.cells.push(c);
                }
            }
        }
    }
}

/// Output of the compute step for block `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStep<T> {
    pub block: usize,
    /// `x̂_{G_j}`
    pub x_hat_block: Vec<T>,
    /// `v̂_{G_j}`
    pub v_hat: Vec<T>,
    /// Prox result written to `G_j`.
    pub updated: Vec<T>,
}

impl<T: Scalar> BlockStep<T> {
    fn with_capacity(len: usize) -> Self {
        BlockStep {
            block: 0,
            x_hat_block: Vec::with_capacity(len),
            v_hat: Vec::with_capacity(len),
            updated: Vec::with_capacity(len),
        }
    }

    pub fn scratch(ctx: &EpochContext<'_, T>) -> Self {
        Self::with_capacity(ctx.problem.partition().max_block_len())
    }
}

/// `v̂_{G_j} = (1/|B|) Σ_{i∈B} [∇_{G_j} f_i(x̂) − ∇_{G_j} f_i(x̃)] + ∇_{G_j} f(x̃)`,
/// reading `x̂` from `buf` (only the planned cells are touched).
pub(crate) fn vr_block_gradient_into<T: Scalar>(
    ctx: &EpochContext<'_, T>,
    sample: &Sample,
    buf: &ReadBuffer<T>,
    v: &mut Vec<T>,
) {
    let problem = ctx.problem;
    let part = problem.partition();
    let j = sample.block;
    let block = part.block(j);
    v.clear();
    v.resize(block.len(), T::zero());
    let x_hat = &buf.values;
    for &i in &sample.batch {
        let row = problem.data().row(i);
        let margin = row.dot_dense(x_hat);
        let coef = problem.loss_derivative(i, margin) - ctx.snapshot_deriv[i];
        if coef == T::zero() {
            continue;
        }
        for (c, a) in row.iter() {
            if part.block_of(c) == j {
                v[part.offset_in_block(c)] += coef * a;
            }
        }
    }
    let inv_b = T::one() / T::from_usize(sample.batch.len()).expect("batch size fits scalar");
    let mu = problem.ridge();
    for (o, &c) in block.iter().enumerate() {
        v[o] = v[o] * inv_b + mu * (x_hat[c] - ctx.snapshot[c]) + ctx.full_grad[c];
    }
}

/// Variance-reduced gradient, prox step. Fills `out`; fails on non-finite
/// results.
pub fn compute_block_step<T: Scalar>(
    ctx: &EpochContext<'_, T>,
    sample: &Sample,
    buf: &ReadBuffer<T>,
    out: &mut BlockStep<T>,
) -> Result<()> {
    let block = ctx.problem.partition().block(sample.block);
    out.block = sample.block;
    vr_block_gradient_into(ctx, sample, buf, &mut out.v_hat);
    out.x_hat_block.clear();
    out.x_hat_block.extend(block.iter().map(|&c| buf.values[c]));
    out.updated.clear();
    out.updated.extend(
        out.x_hat_block
            .iter()
            .zip(&out.v_hat)
            .map(|(&x, &v)| x - ctx.step * v),
    );
    if ctx.step > T::zero() {
        ctx.problem.regularizer().prox_in_place(&mut out.updated, ctx.step);
    }
    if out.updated.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            block: sample.block,
        });
    }
    Ok(())
}

/// Standalone variance-reduced block gradient over full vectors.
///
/// Returns the block-`j` slice of
/// `(1/|B|) Σ_{i∈B} ∇f_i(x̂) − (1/|B|) Σ_{i∈B} ∇f_i(x̃) + μ`; only block
/// components are materialized.
pub fn vr_block_gradient<T: Scalar>(
    problem: &CompositeProblem<T>,
    batch: &[usize],
    j: usize,
    x_hat: &[T],
    snapshot: &[T],
    full_grad: &[T],
) -> Result<Vec<T>> {
    let n = problem.dim();
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty minibatch".into()));
    }
    for &i in batch {
        if i >= problem.num_components() {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: i,
                limit: problem.num_components(),
            });
        }
    }
    problem.check_block(j)?;
    for v in [x_hat, snapshot, full_grad] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let snapshot_deriv = (0..problem.num_components())
        .map(|i| {
            if batch.contains(&i) {
                problem.loss_derivative(i, problem.data().row(i).dot_dense(snapshot))
            } else {
                T::zero()
            }
        })
        .collect();
    let ctx = EpochContext {
        problem,
        snapshot: snapshot.to_vec(),
        full_grad: full_grad.to_vec(),
        snapshot_deriv,
        step: T::zero(),
        minibatch: batch.len(),
    };
    let sample = Sample {
        batch: batch.to_vec(),
        block: j,
    };
    let buf = ReadBuffer {
        values: x_hat.to_vec(),
        cells: Vec::new(),
        stamp: Vec::new(),
        generation: 0,
    };
    let mut v = Vec::new();
    vr_block_gradient_into(&ctx, &sample, &buf, &mut v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetMatrix;
    use crate::partition::BlockPartition;
    use crate::problem::{Loss, Regularizer};

    fn quad() -> CompositeProblem<f64> {
        let rows = vec![
            vec![1.0, 0.5, 0.0, -1.0],
            vec![0.0, 2.0, 1.0, 0.0],
            vec![-0.5, 0.0, 0.0, 3.0],
        ];
        let data = DatasetMatrix::from_dense(&rows, vec![1.0, -1.0, 0.5]).unwrap();
        CompositeProblem::new(data, Loss::Squared, Regularizer::Zero, BlockPartition::contiguous(4, 2).unwrap())
            .unwrap()
    }

    #[test]
    fn snapshot_point_returns_full_gradient_block() {
        let p = quad();
        let xs = vec![0.3, -0.1, 0.7, 0.2];
        let mu = p.grad_full(&xs).unwrap();
        for j in 0..2 {
            for batch in [vec![0], vec![2, 2], vec![0, 1, 2]] {
                let v = vr_block_gradient(&p, &batch, j, &xs, &xs, &mu).unwrap();
                assert_eq!(v, p.partition().gather(j, &mu));
            }
        }
    }

    #[test]
    fn full_batch_cancels_correction() {
        let p = quad();
        let xs = vec![0.3, -0.1, 0.7, 0.2];
        let xh = vec![-1.0, 0.4, 0.0, 2.0];
        let mu = p.grad_full(&xs).unwrap();
        let g = p.grad_full(&xh).unwrap();
        for j in 0..2 {
            let v = vr_block_gradient(&p, &[0, 1, 2], j, &xh, &xs, &mu).unwrap();
            for (a, b) in v.iter().zip(p.partition().gather(j, &g)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn argument_errors() {
        let p = quad();
        let z = vec![0.0; 4];
        assert!(vr_block_gradient(&p, &[], 0, &z, &z, &z).is_err());
        assert!(vr_block_gradient(&p, &[3], 0, &z, &z, &z).is_err());
        assert!(vr_block_gradient(&p, &[0], 2, &z, &z, &z).is_err());
        assert!(vr_block_gradient(&p, &[0], 0, &z[..3], &z, &z).is_err());
    }

    #[test]
    fn read_plan_covers_block_and_rows_once() {
        let p = quad();
        let mut buf = ReadBuffer::new(4);
        let s = Sample { batch: vec![1, 1, 2], block: 0 };
        buf.plan(&p, &s);
        assert_eq!(buf.cells, vec![0, 1, 2, 3]);
        let s = Sample { batch: vec![1], block: 1 };
        buf.plan(&p, &s);
        assert_eq!(buf.cells, vec![2, 3, 1]);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: Vec<u32> = (0..4).map(|_| worker_rng(7, 0, 0).random()).collect();
        let b: u32 = worker_rng(7, 0, 0).random();
        assert_eq!(a[0], b);
        let c: u32 = worker_rng(7, 1, 0).random();
        let d: u32 = worker_rng(7, 0, 1).random();
        let e: u32 = delay_rng(7, 0, 0).random();
        assert!(b != c && b != d && b != e);
    }
}
