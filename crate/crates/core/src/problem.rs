//! Composite objectives `F(x) = (1/l) Σ_i f_i(x) + Σ_j g_j(x_{G_j})`.
//!
//! The smooth part is a generalized linear model: each component is
//! `f_i(x) = φ(a_iᵀx, b_i) + (μ/2)‖x‖²` for a built-in loss `φ` and an
//! optional ridge weight `μ ≥ 0`. The nonsmooth part applies the same
//! block-separable regularizer to every group of the partition.

use crate::data::{DatasetMatrix, SparseVec};
use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::scalar::{norm, Scalar};

/// Smooth loss `φ(margin, label)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `½(m − b)²`
    Squared,
    /// `log(1 + exp(−b·m))` with `b ∈ {−1, +1}`
    Logistic,
}

impl Loss {
    #[inline]
    pub fn value<T: Scalar>(self, margin: T, label: T) -> T {
        match self {
            Loss::Squared => {
                let r = margin - label;
                T::of(0.5) * r * r
            }
            Loss::Logistic => softplus(-(label * margin)),
        }
    }

    /// `∂φ/∂m`.
    #[inline]
    pub fn derivative<T: Scalar>(self, margin: T, label: T) -> T {
        match self {
            Loss::Squared => margin - label,
            Loss::Logistic => -label * sigmoid(-(label * margin)),
        }
    }

    /// Global upper bound on `∂²φ/∂m²`.
    pub fn curvature_bound(self) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::Logistic => 0.25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" | "square" | "ls" => Ok(Loss::Squared),
            "logistic" | "log" => Ok(Loss::Logistic),
            other => Err(Error::Unsupported(format!("loss `{other}`"))),
        }
    }
}

/// `1 / (1 + e^{−u})`, branch-stable for large `|u|`.
#[inline]
pub fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + e^u)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(u: T) -> T {
    if u > T::zero() {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Block-separable regularizer applied identically to every group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer<T> {
    Zero,
    /// `λ‖u‖₁`
    L1 { lambda: T },
    /// `λ‖u‖₂` per group
    GroupL2 { lambda: T },
    /// `λ₁‖u‖₁ + (λ₂/2)‖u‖²`
    ElasticNet { l1: T, l2: T },
}

impl<T: Scalar> Regularizer<T> {
    pub fn value(&self, u: &[T]) -> T {
        match *self {
            Regularizer::Zero => T::zero(),
            Regularizer::L1 { lambda } => lambda * u.iter().map(|v| v.abs()).sum::<T>(),
            Regularizer::GroupL2 { lambda } => lambda * norm(u),
            Regularizer::ElasticNet { l1, l2 } => {
                let a: T = u.iter().map(|v| v.abs()).sum();
                let q: T = u.iter().map(|&v| v * v).sum();
                l1 * a + T::of(0.5) * l2 * q
            }
        }
    }

    /// `argmin_u step·g(u) + ½‖u − v‖²`, written over `v`.
    pub fn prox_in_place(&self, v: &mut [T], step: T) {
        match *self {
            Regularizer::Zero => {}
            Regularizer::L1 { lambda } => {
                let t = step * lambda;
                for x in v.iter_mut() {
                    *x = soft_threshold(*x, t);
                }
            }
            Regularizer::GroupL2 { lambda } => {
                let nv = norm(v);
                let t = step * lambda;
                if nv <= t {
                    // covers ‖v‖ = 0 without dividing
                    v.iter_mut().for_each(|x| *x = T::zero());
                } else {
                    let shrink = T::one() - t / nv;
                    v.iter_mut().for_each(|x| *x *= shrink);
                }
            }
            Regularizer::ElasticNet { l1, l2 } => {
                let t = step * l1;
                let scale = T::one() / (T::one() + step * l2);
                for x in v.iter_mut() {
                    *x = soft_threshold(*x, t) * scale;
                }
            }
        }
    }

    pub fn prox(&self, v: &[T], step: T) -> Result<Vec<T>> {
        if !(step > T::zero()) {
            return Err(Error::NonPositiveStep(step.to_f64_lossy()));
        }
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, step);
        Ok(out)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: T| {
            if !(v >= T::zero()) || !v.is_finite() {
                Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")))
            } else {
                Ok(())
            }
        };
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { lambda } | Regularizer::GroupL2 { lambda } => bad("lambda", lambda),
            Regularizer::ElasticNet { l1, l2 } => bad("lambda", l1).and(bad("lambda2", l2)),
        }
    }
}

#[inline]
pub fn soft_threshold<T: Scalar>(x: T, t: T) -> T {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        T::zero()
    }
}

/// Snapshot quantities for one epoch: `∇f(x̃)` plus the per-component
/// margins `a_iᵀx̃`, cached so variance-reduced steps never recompute them.
#[derive(Debug, Clone, PartialEq)]
pub struct FullGradient<T> {
    pub grad: Vec<T>,
    pub margins: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct CompositeProblem<T> {
    data: DatasetMatrix<T>,
    loss: Loss,
    ridge: T,
    reg: Regularizer<T>,
    partition: BlockPartition,
}

impl<T: Scalar> CompositeProblem<T> {
    pub fn new(
        data: DatasetMatrix<T>,
        loss: Loss,
        reg: Regularizer<T>,
        partition: BlockPartition,
    ) -> Result<Self> {
        if data.num_rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if partition.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: partition.dim(),
            });
        }
        if loss == Loss::Logistic {
            if let Some(i) = data
                .labels()
                .iter()
                .position(|&b| b != T::one() && b != -T::one())
            {
                return Err(Error::InvalidData(format!(
                    "logistic loss needs labels in {{-1, +1}}; row {i} has {}",
                    data.label(i)
                )));
            }
        }
        reg.validate()?;
        Ok(CompositeProblem {
            data,
            loss,
            ridge: T::zero(),
            reg,
            partition,
        })
    }

    /// Adds `(μ/2)‖x‖²` to every component.
    pub fn with_ridge(mut self, mu: T) -> Result<Self> {
        if !(mu >= T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidConfig(format!("ridge must be >= 0, got {mu}")));
        }
        self.ridge = mu;
        Ok(self)
    }

    pub fn num_components(&self) -> usize {
        self.data.num_rows()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn data(&self) -> &DatasetMatrix<T> {
        &self.data
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn regularizer(&self) -> &Regularizer<T> {
        &self.reg
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn check_component(&self, i: usize) -> Result<()> {
        if i >= self.num_components() {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: i,
                limit: self.num_components(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_block(&self, j: usize) -> Result<()> {
        if j >= self.num_blocks() {
            return Err(Error::IndexOutOfRange {
                what: "block",
                index: j,
                limit: self.num_blocks(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `φ'(a_iᵀx)` given a precomputed margin.
    #[inline]
    pub fn loss_derivative(&self, i: usize, margin: T) -> T {
        self.loss.derivative(margin, self.data.label(i))
    }

    pub fn component_value(&self, i: usize, x: &[T]) -> Result<T> {
        self.check_component(i)?;
        self.check_dim(x)?;
        let m = self.data.row(i).dot_dense(x);
        let mut v = self.loss.value(m, self.data.label(i));
        if self.ridge > T::zero() {
            v += T::of(0.5) * self.ridge * x.iter().map(|&c| c * c).sum::<T>();
        }
        Ok(v)
    }

    /// `∇f_i(x)`. Without ridge the support equals the support of `a_i`;
    /// with ridge every nonzero coordinate of `x` is included.
    pub fn grad_component(&self, i: usize, x: &[T]) -> Result<SparseVec<T>> {
        self.check_component(i)?;
        self.check_dim(x)?;
        let row = self.data.row(i);
        let d = self.loss_derivative(i, row.dot_dense(x));
        if self.ridge == T::zero() {
            return Ok(SparseVec {
                indices: row.indices.clone(),
                values: row.values.iter().map(|&a| d * a).collect(),
            });
        }
        let mut dense: Vec<T> = x.iter().map(|&c| self.ridge * c).collect();
        for (c, a) in row.iter() {
            dense[c] += d * a;
        }
        let (indices, values) = dense
            .into_iter()
            .enumerate()
            .filter(|(c, v)| !v.is_zero() || row.indices.binary_search(c).is_ok())
            .unzip();
        Ok(SparseVec { indices, values })
    }

    /// Block slice `∇_{G_j} f_i(x)`.
    pub fn block_grad_component(&self, i: usize, j: usize, x: &[T]) -> Result<Vec<T>> {
        self.check_component(i)?;
        self.check_block(j)?;
        self.check_dim(x)?;
        let row = self.data.row(i);
        let d = self.loss_derivative(i, row.dot_dense(x));
        let mut out = self.partition.gather(j, x);
        out.iter_mut().for_each(|v| *v *= self.ridge);
        for (c, a) in row.iter() {
            if self.partition.block_of(c) == j {
                out[self.partition.offset_in_block(c)] += d * a;
            }
        }
        Ok(out)
    }

    /// `∇f(x) = (1/l) Σ_i ∇f_i(x)`, computed sequentially.
    pub fn grad_full(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.full_gradient(x, 1)?.grad)
    }

    /// `∇f(x)` and the margins `a_iᵀx`, split across `workers` threads.
    ///
    /// Components are cut into chunks whose boundaries depend only on `l`.
    /// Each chunk is summed in index order and chunk partials are combined
    /// by a fixed pairwise tree, so the result is bit-identical for every
    /// worker count.
    pub fn full_gradient(&self, x: &[T], workers: usize) -> Result<FullGradient<T>> {
        self.check_dim(x)?;
        let l = self.num_components();
        let n = self.dim();
        let chunk = l.div_ceil(MAX_CHUNKS).max(1);
        let num_chunks = l.div_ceil(chunk);
        let workers = workers.clamp(1, num_chunks);

        let chunk_partial = |c: usize| -> (Vec<T>, Vec<T>) {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(l);
            let mut acc = vec![T::zero(); n];
            let mut margins = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let row = self.data.row(i);
                let m = row.dot_dense(x);
                margins.push(m);
                let d = self.loss_derivative(i, m);
                for (c, a) in row.iter() {
                    acc[c] += d * a;
                }
            }
            (acc, margins)
        };

        let mut partials: Vec<(Vec<T>, Vec<T>)> = if workers == 1 {
            (0..num_chunks).map(chunk_partial).collect()
        } else {
            let mut slots: Vec<Option<(Vec<T>, Vec<T>)>> = vec![None; num_chunks];
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let chunk_partial = &chunk_partial;
                        s.spawn(move || {
                            (w..num_chunks)
                                .step_by(workers)
                                .map(|c| (c, chunk_partial(c)))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (c, p) in h.join().expect("gradient worker panicked") {
                        slots[c] = Some(p);
                    }
                }
            });
            slots.into_iter().map(|s| s.expect("chunk computed")).collect()
        };

        let margins: Vec<T> = partials
            .iter_mut()
            .flat_map(|(_, m)| std::mem::take(m))
            .collect();
        let mut sums: Vec<Vec<T>> = partials.into_iter().map(|(g, _)| g).collect();
        while sums.len() > 1 {
            let mut next = Vec::with_capacity(sums.len().div_ceil(2));
            let mut it = sums.into_iter();
            while let Some(mut a) = it.next() {
                if let Some(b) = it.next() {
                    a.iter_mut().zip(&b).for_each(|(u, &v)| *u += v);
                }
                next.push(a);
            }
            sums = next;
        }
        let mut grad = sums.pop().unwrap_or_else(|| vec![T::zero(); n]);
        let inv_l = T::one() / T::from_usize(l).expect("component count fits scalar");
        for (g, &xc) in grad.iter_mut().zip(x) {
            *g = *g * inv_l + self.ridge * xc;
        }
        Ok(FullGradient { grad, margins })
    }

    pub fn prox_block(&self, j: usize, v: &[T], step: T) -> Result<Vec<T>> {
        self.check_block(j)?;
        if v.len() != self.partition.block_len(j) {
            return Err(Error::DimensionMismatch {
                expected: self.partition.block_len(j),
                got: v.len(),
            });
        }
        self.reg.prox(v, step)
    }

    /// `f(x)`.
    pub fn smooth_value(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        let l = self.num_components();
        let s: T = (0..l)
            .map(|i| {
                self.loss
                    .value(self.data.row(i).dot_dense(x), self.data.label(i))
            })
            .sum();
        let mut v = s / T::from_usize(l).expect("component count fits scalar");
        if self.ridge > T::zero() {
            v += T::of(0.5) * self.ridge * x.iter().map(|&c| c * c).sum::<T>();
        }
        Ok(v)
    }

    /// `g(x) = Σ_j g(x_{G_j})`.
    pub fn reg_value(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        if self.reg.is_zero() {
            return Ok(T::zero());
        }
        Ok((0..self.num_blocks())
            .map(|j| self.reg.value(&self.partition.gather(j, x)))
            .sum())
    }

    /// `F(x) = f(x) + g(x)`.
    pub fn objective(&self, x: &[T]) -> Result<T> {
        Ok(self.smooth_value(x)? + self.reg_value(x)?)
    }
}

const MAX_CHUNKS: usize = 64;
