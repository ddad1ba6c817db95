//! Extended-precision scalars.
//!
//! `Ext` is a thin wrapper over an arbitrary-precision binary float that
//! carries its working precision, so formulas can be written with ordinary
//! operators. Results of binary operations use the larger of the two
//! precisions.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

#[derive(Clone, Debug)]
pub struct Ext {
    v: BigFloat,
    bits: usize,
}

impl Ext {
    pub fn zero(bits: usize) -> Ext {
        Ext::from_f64(0.0, bits)
    }

    /// Exact conversion of a double.
    pub fn from_f64(x: f64, bits: usize) -> Ext {
        let bits = bits.max(64);
        Ext {
            v: BigFloat::from_f64(x, bits),
            bits,
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.v.is_negative() && !self.v.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.v.is_nan() || self.v.is_inf())
    }

    pub fn abs(&self) -> Ext {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn sqrt(&self) -> Ext {
        Ext {
            v: self.v.sqrt(self.bits, RM),
            bits: self.bits,
        }
    }

    pub fn exp(&self) -> Ext {
        let v = CONSTS.with(|c| self.v.exp(self.bits, RM, &mut c.borrow_mut()));
        Ext { v, bits: self.bits }
    }

    /// Splits the value as `m * 2^e` with `0.5 <= |m| < 1`; zero gives `(0, 0)`.
    pub fn frexp(&self) -> (f64, i64) {
        if self.v.is_zero() {
            return (0.0, 0);
        }
        match self.v.as_raw_parts() {
            Some((words, _, sign, e, _)) => {
                let top = *words.last().unwrap_or(&0);
                let m = top as f64 / 18_446_744_073_709_551_616.0;
                let m = if sign == Sign::Neg { -m } else { m };
                (m, e as i64)
            }
            None => (f64::NAN, 0),
        }
    }

    /// Nearest double, saturating to infinity or zero outside the range.
    pub fn to_f64(&self) -> f64 {
        let (m, e) = self.frexp();
        ldexp(m, e)
    }

    /// Base-10 logarithm of the absolute value; `-inf` for zero.
    pub fn log10_abs(&self) -> f64 {
        let (m, e) = self.frexp();
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        m.abs().log10() + e as f64 * std::f64::consts::LOG10_2
    }

    pub fn max_bits(&self, other: &Ext) -> usize {
        self.bits.max(other.bits)
    }
}

/// `m * 2^e` without intermediate overflow or underflow.
pub fn ldexp(m: f64, e: i64) -> f64 {
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    if e > 2100 {
        return m.signum() * f64::INFINITY;
    }
    if e < -2200 {
        return m.signum() * 0.0;
    }
    let mut x = m;
    let mut e = e;
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

macro_rules! binop {
    ($tr:ident, $m:ident) => {
        impl $tr<&Ext> for &Ext {
            type Output = Ext;
            fn $m(self, rhs: &Ext) -> Ext {
                let bits = self.max_bits(rhs);
                Ext {
                    v: self.v.$m(&rhs.v, bits, RM),
                    bits,
                }
            }
        }
        impl $tr<Ext> for Ext {
            type Output = Ext;
            fn $m(self, rhs: Ext) -> Ext {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Ext> for Ext {
            type Output = Ext;
            fn $m(self, rhs: &Ext) -> Ext {
                (&self).$m(rhs)
            }
        }
        impl $tr<Ext> for &Ext {
            type Output = Ext;
            fn $m(self, rhs: Ext) -> Ext {
                self.$m(&rhs)
            }
        }
        impl $tr<f64> for &Ext {
            type Output = Ext;
            fn $m(self, rhs: f64) -> Ext {
                self.$m(&Ext::from_f64(rhs, self.bits))
            }
        }
        impl $tr<f64> for Ext {
            type Output = Ext;
            fn $m(self, rhs: f64) -> Ext {
                (&self).$m(&Ext::from_f64(rhs, self.bits))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);
binop!(Div, div);

impl Neg for &Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext {
            v: BigFloat::neg(&self.v),
            bits: self.bits,
        }
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        -&self
    }
}
