//! Seeded synthetic instances with a planted solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{DatasetMatrix, SparseVec};
use crate::error::{Error, Result};
use crate::problem::Loss;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// `b = Ax⋆ + noise`.
    Lasso,
    /// Like `Lasso` with `l ≥ n` and a ridge term in `f`.
    StronglyConvex,
    /// `b = sign(Ax⋆ + noise)`.
    Logistic,
}

impl SyntheticKind {
    pub fn loss(self) -> Loss {
        match self {
            SyntheticKind::Logistic => Loss::Logistic,
            _ => Loss::Squared,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::Lasso => "lasso",
            SyntheticKind::StronglyConvex => "strongly_convex",
            SyntheticKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(SyntheticKind::Lasso),
            "strongly_convex" | "strongly-convex" | "ridge" => Ok(SyntheticKind::StronglyConvex),
            "logistic" => Ok(SyntheticKind::Logistic),
            other => Err(Error::Unsupported(format!("synthetic kind `{other}`"))),
        }
    }
}

/// Default ridge weight for strongly convex instances.
pub const DEFAULT_RIDGE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub l: usize,
    /// Probability that an entry of the design is nonzero.
    pub density: f64,
    /// Standard deviation of the label noise.
    pub noise: f64,
    pub kind: SyntheticKind,
    pub seed: u64,
    /// Fraction of nonzero coordinates in the planted solution.
    pub sparsity: f64,
    /// Ridge weight for `StronglyConvex`; `None` uses `DEFAULT_RIDGE`.
    pub ridge: Option<f64>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 200,
            l: 500,
            density: 1.0,
            noise: 0.01,
            kind: SyntheticKind::Lasso,
            seed: 0,
            sparsity: 0.1,
            ridge: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic<T> {
    pub data: DatasetMatrix<T>,
    pub planted: Vec<T>,
    /// Ridge weight `μ` to add to `f` (zero unless strongly convex).
    pub ridge: T,
}

/// Draws a design with standard normal nonzeros, a sparse planted `x⋆`
/// and labels from the model of `spec.kind`.
pub fn gen_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Synthetic<T>> {
    let bad = |m: String| Err(Error::InvalidConfig(m));
    if spec.n == 0 || spec.l == 0 {
        return bad("synthetic n and l must be >= 1".into());
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return bad(format!("density must be in (0, 1], got {}", spec.density));
    }
    if !(spec.sparsity > 0.0 && spec.sparsity <= 1.0) {
        return bad(format!("sparsity must be in (0, 1], got {}", spec.sparsity));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return bad(format!("noise must be >= 0, got {}", spec.noise));
    }
    if spec.kind == SyntheticKind::StronglyConvex && spec.l < spec.n {
        return bad(format!("strongly convex instances need l >= n ({} < {})", spec.l, spec.n));
    }
    let ridge = match spec.kind {
        SyntheticKind::StronglyConvex => spec.ridge.unwrap_or(DEFAULT_RIDGE),
        _ => spec.ridge.unwrap_or(0.0),
    };
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return bad(format!("ridge must be >= 0, got {ridge}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    let support = ((spec.n as f64 * spec.sparsity).round() as usize).clamp(1, spec.n);
    let chosen = rand::seq::index::sample(&mut rng, spec.n, support);
    let mut planted = vec![0.0f64; spec.n];
    for c in chosen.iter() {
        planted[c] = gauss(&mut rng);
    }

    let mut rows = Vec::with_capacity(spec.l);
    let mut labels = Vec::with_capacity(spec.l);
    for _ in 0..spec.l {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for c in 0..spec.n {
            if spec.density >= 1.0 || rng.random::<f64>() < spec.density {
                indices.push(c);
                values.push(gauss(&mut rng));
            }
        }
        let margin: f64 = indices.iter().zip(&values).map(|(&c, &v)| v * planted[c]).sum();
        let y = margin + spec.noise * gauss(&mut rng);
        labels.push(match spec.kind {
            SyntheticKind::Logistic => {
                if y >= 0.0 {
                    T::one()
                } else {
                    -T::one()
                }
            }
            _ => T::of(y),
        });
        rows.push(SparseVec {
            indices,
            values: values.into_iter().map(T::of).collect(),
        });
    }

    Ok(Synthetic {
        data: DatasetMatrix::new(rows, labels, spec.n)?,
        planted: planted.into_iter().map(T::of).collect(),
        ridge: T::of(ridge),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec {
            n: 30,
            l: 40,
            density: 0.3,
            seed: 11,
            ..Default::default()
        };
        let a = gen_synthetic::<f64>(&spec).unwrap();
        let b = gen_synthetic::<f64>(&spec).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.planted, b.planted);
        let c = gen_synthetic::<f64>(&SyntheticSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn full_density_rows_are_dense() {
        let s = gen_synthetic::<f64>(&SyntheticSpec {
            n: 7,
            l: 9,
            density: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert!(s.data.rows().iter().all(|r| r.nnz() == 7));
    }

    #[test]
    fn noiseless_labels_follow_the_model() {
        let s = gen_synthetic::<f64>(&SyntheticSpec {
            n: 10,
            l: 15,
            noise: 0.0,
            ..Default::default()
        })
        .unwrap();
        for (row, &b) in s.data.rows().iter().zip(s.data.labels()) {
            assert!((row.dot_dense(&s.planted) - b).abs() < 1e-12);
        }
        assert!(s.planted.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn logistic_labels_are_signs() {
        let s = gen_synthetic::<f64>(&SyntheticSpec {
            kind: SyntheticKind::Logistic,
            ..Default::default()
        })
        .unwrap();
        assert!(s.data.labels().iter().all(|&b| b == 1.0 || b == -1.0));
        assert_eq!(s.ridge, 0.0);
    }

    #[test]
    fn strongly_convex_needs_tall_design_and_has_ridge() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::StronglyConvex,
            n: 20,
            l: 10,
            ..Default::default()
        };
        assert!(gen_synthetic::<f64>(&spec).is_err());
        let s = gen_synthetic::<f64>(&SyntheticSpec { l: 20, ..spec }).unwrap();
        assert_eq!(s.ridge, DEFAULT_RIDGE);
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SyntheticSpec { n: 0, ..Default::default() },
            SyntheticSpec { density: 0.0, ..Default::default() },
            SyntheticSpec { density: 1.5, ..Default::default() },
            SyntheticSpec { noise: -1.0, ..Default::default() },
        ] {
            assert!(gen_synthetic::<f64>(&spec).is_err());
        }
    }
}
