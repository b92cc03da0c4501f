//! 42-bit fixed point: one sign bit, one guard bit, 20 integer and 20 fraction bits.
//!
//! Values are held as `i64` scaled by 2^20. The guard bit is never part of a stored
//! value: results outside `[-2^20, 2^20)` saturate and set a sticky flag.

mod astro_fx;
mod pwl;

pub use astro_fx::{fixed_astro_step, simulate_fixed, FixedAstroState, FxAstroParams};
pub use pwl::{Placement, PwlApprox};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub struct FixedFormat;

impl FixedFormat {
    pub const SIGN_BITS: u32 = 2;
    pub const INT_BITS: u32 = 20;
    pub const FRAC_BITS: u32 = 20;
    pub const TOTAL_BITS: u32 = 42;
    pub const MAX_RAW: i64 = (1 << 40) - 1;
    pub const MIN_RAW: i64 = -(1 << 40);

    pub fn resolution() -> f64 {
        1.0 / (1u64 << Self::FRAC_BITS) as f64
    }
}

const SCALE: f64 = (1u64 << FixedFormat::FRAC_BITS) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Fixed {
    raw: i64,
    /// Set when this value, or any value it was computed from, saturated.
    saturated: bool,
}

impl Fixed {
    pub const ZERO: Fixed = Fixed { raw: 0, saturated: false };
    pub const ONE: Fixed = Fixed { raw: 1 << FixedFormat::FRAC_BITS, saturated: false };
    pub const MAX: Fixed = Fixed { raw: FixedFormat::MAX_RAW, saturated: false };
    pub const MIN: Fixed = Fixed { raw: FixedFormat::MIN_RAW, saturated: false };

    /// Wrap a raw value, saturating it into range.
    pub fn from_raw(raw: i64) -> Self {
        Self::clamp_wide(i128::from(raw), false)
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn saturated(self) -> bool {
        self.saturated
    }

    pub fn to_f64(self) -> f64 {
        decode(self)
    }

    fn clamp_wide(v: i128, sticky: bool) -> Self {
        if v > i128::from(FixedFormat::MAX_RAW) {
            Fixed { raw: FixedFormat::MAX_RAW, saturated: true }
        } else if v < i128::from(FixedFormat::MIN_RAW) {
            Fixed { raw: FixedFormat::MIN_RAW, saturated: true }
        } else {
            Fixed { raw: v as i64, saturated: sticky }
        }
    }

    pub fn min(self, other: Fixed) -> Fixed {
        if other.raw < self.raw { other.flagged(self.saturated) } else { self.flagged(other.saturated) }
    }

    pub fn max(self, other: Fixed) -> Fixed {
        if other.raw > self.raw { other.flagged(self.saturated) } else { self.flagged(other.saturated) }
    }

    fn flagged(mut self, s: bool) -> Fixed {
        self.saturated |= s;
        self
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", decode(*self))
    }
}

/// Round-to-nearest-even scaling by 2^20, saturating out-of-range values.
pub fn encode(x: f64) -> Result<Fixed> {
    if !x.is_finite() {
        return Err(Error::Numeric("fixed-point encode of non-finite value"));
    }
    let scaled = (x * SCALE).round_ties_even();
    Ok(if scaled > FixedFormat::MAX_RAW as f64 {
        Fixed { raw: FixedFormat::MAX_RAW, saturated: true }
    } else if scaled < FixedFormat::MIN_RAW as f64 {
        Fixed { raw: FixedFormat::MIN_RAW, saturated: true }
    } else {
        Fixed { raw: scaled as i64, saturated: false }
    })
}

pub fn decode(f: Fixed) -> f64 {
    f.raw as f64 / SCALE
}

pub fn fx_add(a: Fixed, b: Fixed) -> Fixed {
    Fixed::clamp_wide(i128::from(a.raw) + i128::from(b.raw), a.saturated | b.saturated)
}

pub fn fx_sub(a: Fixed, b: Fixed) -> Fixed {
    Fixed::clamp_wide(i128::from(a.raw) - i128::from(b.raw), a.saturated | b.saturated)
}

pub fn fx_mul(a: Fixed, b: Fixed) -> Fixed {
    mul_shr(a, b, FixedFormat::FRAC_BITS)
}

/// `(a.raw * b.raw) >> shift` with round-to-nearest-even, for coefficients carrying
/// extra fraction bits.
pub fn mul_shr(a: Fixed, b: Fixed, shift: u32) -> Fixed {
    let p = i128::from(a.raw) * i128::from(b.raw);
    Fixed::clamp_wide(rne_shr(p, shift), a.saturated | b.saturated)
}

fn rne_shr(v: i128, s: u32) -> i128 {
    if s == 0 {
        return v;
    }
    let q = v >> s;
    let rem = v - (q << s);
    let half = 1i128 << (s - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn format_widths_add_up() {
        assert_eq!(
            FixedFormat::SIGN_BITS + FixedFormat::INT_BITS + FixedFormat::FRAC_BITS,
            FixedFormat::TOTAL_BITS
        );
        assert_eq!(FixedFormat::resolution(), 2f64.powi(-20));
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(0.0).unwrap().raw(), 0);
        assert_eq!(encode(1.5).unwrap().raw(), 1_572_864);
        assert_eq!(encode(-1.5).unwrap().raw(), -1_572_864);
        // Ties go to even.
        assert_eq!(encode(0.5 / SCALE).unwrap().raw(), 0);
        assert_eq!(encode(1.5 / SCALE).unwrap().raw(), 2);
        assert!(encode(f64::NAN).is_err());
        let big = encode(3e6).unwrap();
        assert!(big.saturated() && big.raw() == FixedFormat::MAX_RAW);
    }

    #[test]
    fn round_trip_within_half_ulp() {
        let mut rng = crate::rng::seeded(1);
        let half = 2f64.powi(-21);
        for _ in 0..1_000_000 {
            let x: f64 = rng.random_range(-1_048_575.0..1_048_575.0);
            assert!((decode(encode(x).unwrap()) - x).abs() <= half);
        }
    }

    #[test]
    fn multiplication_identity_and_error_bound() {
        let mut rng = crate::rng::seeded(2);
        let one = encode(1.0).unwrap();
        for _ in 0..1_000_000 {
            let a = encode(rng.random_range(-1000.0..1000.0)).unwrap();
            let b = encode(rng.random_range(-1000.0..1000.0)).unwrap();
            assert_eq!(fx_mul(one, a), a);
            // Exact product of the decoded operands in i128.
            let exact = i128::from(a.raw()) * i128::from(b.raw());
            let got = i128::from(fx_mul(a, b).raw()) << 20;
            assert!((got - exact).abs() <= 1 << 19);
            let err = (decode(fx_mul(a, b)) - decode(a) * decode(b)).abs();
            assert!(err <= FixedFormat::resolution());
        }
    }

    #[test]
    fn addition_saturates_with_flag() {
        let ulp = Fixed::from_raw(1);
        let s = fx_add(Fixed::MAX, ulp);
        assert_eq!(s.raw(), FixedFormat::MAX_RAW);
        assert!(s.saturated());
        assert!(!fx_add(Fixed::ONE, ulp).saturated());
        // The flag is sticky through later arithmetic.
        assert!(fx_mul(s, Fixed::ZERO).saturated());
        let n = fx_sub(Fixed::MIN, ulp);
        assert!(n.saturated() && n.raw() == FixedFormat::MIN_RAW);
    }

    #[test]
    fn rne_shift_rounds_ties_to_even() {
        assert_eq!(rne_shr(5, 1), 2);
        assert_eq!(rne_shr(7, 1), 4);
        assert_eq!(rne_shr(-5, 1), -2);
        assert_eq!(rne_shr(-7, 1), -4);
        assert_eq!(rne_shr(6, 2), 2);
        assert_eq!(rne_shr(9, 3), 1);
    }
}
