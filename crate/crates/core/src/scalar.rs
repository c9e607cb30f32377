//! Floating-point scalar abstraction.
//!
//! All numerical code in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Each scalar type carries a matching
//! atomic cell type used by the lock-free shared parameter vector.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// A machine-word sized cell that can be loaded and stored indivisibly.
///
/// Loads and stores are `Relaxed`: cells carry no ordering guarantees with
/// respect to each other. Epoch barriers (thread joins) provide the
/// synchronization the solver relies on.
pub trait AtomicCell<T>: Send + Sync {
    fn new(v: T) -> Self;
    fn load(&self) -> T;
    fn store(&self, v: T);
}

/// Real scalar usable by the solver.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + std::fmt::LowerExp
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    type Atomic: AtomicCell<Self>;

    /// Lossy conversion from `f64`, used for literals and data ingestion.
    fn of(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

#[derive(Debug)]
pub struct AtomicF64(AtomicU64);

impl AtomicCell<f64> for AtomicF64 {
    #[inline]
    fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    fn store(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }
}

#[derive(Debug)]
pub struct AtomicF32(AtomicU32);

impl AtomicCell<f32> for AtomicF32 {
    #[inline]
    fn new(v: f32) -> Self {
        AtomicF32(AtomicU32::new(v.to_bits()))
    }

    #[inline]
    fn load(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    fn store(&self, v: f32) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }
}

impl Scalar for f64 {
    type Atomic = AtomicF64;

    #[inline]
    fn of(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    type Atomic = AtomicF32;

    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

/// Euclidean norm of a slice.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `‖a − b‖`.
pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}
