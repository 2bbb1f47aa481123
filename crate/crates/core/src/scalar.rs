//! Numeric abstractions.
//!
//! Valuation arithmetic (bundle values, inner products between implicit
//! valuation vectors, welfare sums) only needs a commutative ring with an
//! order, so it is written against [`Value`] and runs unchanged on exact
//! rationals. Everything that needs `exp`, `sqrt` or a tolerance is written
//! against [`Scalar`], which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Ordered ring element used for reported values.
pub trait Value: Copy + PartialOrd + Num + Debug {}

impl<T: Copy + PartialOrd + Num + Debug> Value for T {}

/// Floating point type the learning pipeline is generic over.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance for argmax ties and metric comparisons.
    const TOLERANCE: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn tol() -> Self {
        Self::lit(Self::TOLERANCE)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const TOLERANCE: f64 = 1e-9;
}

impl Scalar for f32 {
    const TOLERANCE: f64 = 1e-5;
}

/// `2^e` computed by repeated doubling, for any [`Value`].
pub fn pow2<V: Value>(e: u32) -> V {
    let two = V::one() + V::one();
    let mut acc = V::one();
    for _ in 0..e {
        acc = acc * two;
    }
    acc
}

/// Table of `2^0 ..= 2^max` so hot loops avoid recomputing powers.
#[derive(Clone, Debug)]
pub struct Pow2Table<V> {
    table: Vec<V>,
}

impl<V: Value> Pow2Table<V> {
    pub fn new(max: u32) -> Self {
        let two = V::one() + V::one();
        let mut table = Vec::with_capacity(max as usize + 1);
        let mut acc = V::one();
        for _ in 0..=max {
            table.push(acc);
            acc = acc * two;
        }
        Pow2Table { table }
    }

    #[inline]
    pub fn get(&self, e: u32) -> V {
        self.table[e as usize]
    }
}
