//! Exact extraction of fractional decimal digits of `(p * id)^e`.
//!
//! Exponents are restricted to positive tenths (`e = k/10`), so the value
//! whose digits we need is the 10th root of an integer:
//!
//! ```text
//! floor((p*id)^(k/10) * 10^j) = iroot10((p*id)^k * 10^(10*j))
//! ```
//!
//! The right-hand side is computed in exact integer arithmetic, so every
//! digit is certified; there is no precision at which the extraction can
//! silently return a wrong digit, and no guard-band failure mode.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExponentError {
    #[error("exponent must be positive, got {0}")]
    NotPositive(f64),
    #[error("exponent 1 is excluded (the predicate would be trivial)")]
    One,
    #[error("exponent {0} is not a multiple of one tenth")]
    NotTenths(f64),
    #[error("exponent {0} is too large")]
    TooLarge(f64),
}

/// A positive exponent in tenths, excluding exactly 1. `Exponent(7)` is 0.7.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Exponent(u8);

impl Exponent {
    pub fn from_tenths(tenths: u8) -> Result<Self, ExponentError> {
        match tenths {
            0 => Err(ExponentError::NotPositive(0.0)),
            10 => Err(ExponentError::One),
            t => Ok(Exponent(t)),
        }
    }

    /// Parse a float such as 0.7 or 1.5; it must sit on the tenths grid.
    pub fn from_f64(e: f64) -> Result<Self, ExponentError> {
        if !(e > 0.0) {
            return Err(ExponentError::NotPositive(e));
        }
        let scaled = e * 10.0;
        let tenths = scaled.round();
        if (scaled - tenths).abs() > 1e-9 {
            return Err(ExponentError::NotTenths(e));
        }
        if tenths > u8::MAX as f64 {
            return Err(ExponentError::TooLarge(e));
        }
        Self::from_tenths(tenths as u8)
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl std::fmt::Display for Exponent {
    /// Always one decimal place: `0.5`, `1.9`. This is also the SQL rendering.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

/// The fractional decimal digits 1..=j_max of base^e, most significant first.
///
/// `digits[j-1] = floor(base^e * 10^j) mod 10`.
pub fn fractional_digits(base: u64, e: Exponent, j_max: u32) -> Vec<u8> {
    assert!(base >= 1, "base must be positive");
    assert!(j_max >= 1, "need at least one digit");
    let scaled = BigUint::from(base).pow(u32::from(e.tenths()))
        * BigUint::from(10u8).pow(10 * j_max);
    let root = scaled.nth_root(10);
    let ten = BigUint::from(10u8);
    let mut digits = vec![0u8; j_max as usize];
    let mut rest = root;
    for j in (0..j_max as usize).rev() {
        let digit = &rest % &ten;
        digits[j] = digit.to_u32_digits().first().copied().unwrap_or(0) as u8;
        rest /= &ten;
    }
    digits
}

/// Single fractional digit: `floor(base^e * 10^j) mod 10`.
pub fn fractional_digit(base: u64, e: Exponent, j: u32) -> u8 {
    fractional_digits(base, e, j)[j as usize - 1]
}
