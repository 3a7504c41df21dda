//! High-precision real arithmetic on top of astro-float.

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::BigUint;
use num_traits::Zero;

/// Working precision in bits (about 96 decimal digits).
pub const PREC: usize = 320;
const RM: RoundingMode = RoundingMode::ToEven;
// mantissa bits kept when converting a huge integer
const KEEP_BITS: u64 = 448;

pub struct Hp {
    cc: Consts,
}

impl Default for Hp {
    fn default() -> Self {
        Self::new()
    }
}

impl Hp {
    pub fn new() -> Self {
        Hp { cc: Consts::new().expect("astro-float constants cache") }
    }

    pub fn pi(&mut self) -> BigFloat {
        self.cc.pi(PREC, RM)
    }

    pub fn int(&self, n: u64) -> BigFloat {
        BigFloat::from_u64(n, PREC)
    }

    pub fn f64(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, PREC)
    }

    /// Nearest float to a big integer, keeping `KEEP_BITS` leading bits.
    pub fn biguint(&self, n: &BigUint) -> BigFloat {
        if n.is_zero() {
            return BigFloat::from_u64(0, PREC);
        }
        let shift = n.bits().saturating_sub(KEEP_BITS);
        let top = n >> shift;
        let words = top.to_u64_digits();
        let e = (64 * words.len() as u64 + shift) as i32;
        BigFloat::from_words(&words, Sign::Pos, e)
    }

    pub fn ratio(&self, num: &BigUint, den: &BigUint) -> BigFloat {
        self.div(&self.biguint(num), &self.biguint(den))
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, PREC, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, PREC, RM)
    }

    pub fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(PREC, RM)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, PREC, RM)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, PREC, RM)
    }

    pub fn sin(&mut self, a: &BigFloat) -> BigFloat {
        a.sin(PREC, RM, &mut self.cc)
    }

    pub fn ln(&mut self, a: &BigFloat) -> BigFloat {
        a.ln(PREC, RM, &mut self.cc)
    }

    pub fn powi(&self, a: &BigFloat, k: usize) -> BigFloat {
        a.powi(k, PREC, RM)
    }

    pub fn to_f64(&self, a: &BigFloat) -> f64 {
        a.to_string().parse().expect("decimal rendering of a finite float")
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal(&mut self, a: &BigFloat, digits: usize) -> String {
        let s = a.format(Radix::Dec, RM, &mut self.cc).expect("format");
        trim_digits(&s, digits)
    }
}

// "1.23456789e+0" style output cut to the requested number of digits
fn trim_digits(s: &str, digits: usize) -> String {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mut out = String::new();
    let mut n = 0;
    for ch in mant.chars() {
        if ch.is_ascii_digit() {
            if n == digits {
                break;
            }
            n += 1;
        }
        out.push(ch);
    }
    out + exp
}
