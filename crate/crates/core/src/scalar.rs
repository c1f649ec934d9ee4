//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the library is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `-p log2 p` with the `0 log 0 = 0` convention.
pub fn neg_plog2p<F: Scalar>(p: F) -> F {
    if p <= F::zero() {
        F::zero()
    } else {
        -p * p.log2()
    }
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy_bits<F: Scalar>(p: &[F]) -> F {
    p.iter().map(|&v| neg_plog2p(v)).sum()
}

pub fn squared_euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub fn euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    squared_euclidean(a, b).sqrt()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<F: Scalar>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
