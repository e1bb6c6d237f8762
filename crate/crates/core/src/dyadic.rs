//! Exact dyadic rationals `m·2^e`, used to locate a point's b-adic digits
//! far below `f64` resolution. Every finite `f64` is dyadic, so affine maps
//! with `f64` coefficients act exactly.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dyadic {
    m: BigInt,
    e: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { m: BigInt::zero(), e: 0 }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite(), "dyadic conversion of a non-finite value");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        Dyadic { m: BigInt::from(sign) * BigInt::from(mant), e }
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        if self.m.is_zero() {
            return o.clone();
        }
        if o.m.is_zero() {
            return self.clone();
        }
        let e = self.e.min(o.e);
        let a = &self.m << (self.e - e) as usize;
        let b = &o.m << (o.e - e) as usize;
        Dyadic { m: a + b, e }
    }

    pub fn mul_f64(&self, x: f64) -> Dyadic {
        let d = Dyadic::from_f64(x);
        Dyadic { m: &self.m * d.m, e: self.e + d.e }
    }

    pub fn mul_int(&self, k: u64) -> Dyadic {
        Dyadic { m: &self.m * BigInt::from(k), e: self.e }
    }

    pub fn sub_int(&self, k: u64) -> Dyadic {
        self.add(&Dyadic { m: -BigInt::from(k), e: 0 })
    }

    /// Largest integer not above the value (values here are nonnegative).
    pub fn floor(&self) -> i128 {
        if self.e >= 0 {
            (&self.m << self.e as usize).to_i128().unwrap_or(i128::MAX)
        } else {
            let q: BigInt = &self.m >> (-self.e) as usize;
            q.to_i128().unwrap_or(if self.m.is_negative() { i128::MIN } else { i128::MAX })
        }
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.m.bits() as i64;
        // keep the top 64 bits so the conversion rounds once
        let drop = (bits - 64).max(0);
        let top: BigInt = &self.m >> drop as usize;
        let e = (self.e + drop) as i32;
        // split the power so neither factor underflows on its own
        top.to_f64().unwrap_or(f64::NAN) * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }
}
