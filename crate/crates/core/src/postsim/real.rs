//! Scalar backends for the dot-product stack.

use crate::lhv::Big;
use dashu_int::IBig;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Working precision of the extended backend, in bits.
pub const EXT_PREC: usize = 512;

pub trait Real:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Largest precision parameter the backend supports.
    const MAX_ELL: u32;
    const NAME: &'static str;

    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn sqrt(&self) -> Self;
    /// 2^e exactly.
    fn pow2(e: i64) -> Self;
    /// Magnitudes below this are rounding residue of exact zeros.
    fn snap_threshold() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn is_zero(&self) -> bool {
        *self == Self::zero()
    }
}

impl Real for f64 {
    const MAX_ELL: u32 = 16;
    const NAME: &'static str = "float";

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn pow2(e: i64) -> Self {
        2f64.powi(e as i32)
    }

    fn snap_threshold() -> Self {
        1e-12
    }
}

/// Binary float at `EXT_PREC` bits.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct Ext(pub Big);

impl Ext {
    pub fn new(x: Big) -> Self {
        Ext(x.with_precision(EXT_PREC).value())
    }
}

impl Real for Ext {
    const MAX_ELL: u32 = 64;
    const NAME: &'static str = "extended";

    fn from_f64(x: f64) -> Self {
        Ext::new(Big::try_from(x).expect("finite input"))
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    fn sqrt(&self) -> Self {
        Ext(self.0.sqrt())
    }

    fn pow2(e: i64) -> Self {
        Ext::new(Big::from_parts(IBig::ONE, e as isize))
    }

    fn snap_threshold() -> Self {
        Self::pow2(-400)
    }
}

macro_rules! ext_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Ext {
            type Output = Ext;
            fn $f(self, rhs: Ext) -> Ext {
                Ext(self.0 $op rhs.0)
            }
        }
    };
}

ext_binop!(Add, add, +);
ext_binop!(Sub, sub, -);
ext_binop!(Mul, mul, *);
ext_binop!(Div, div, /);

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext(-self.0)
    }
}
