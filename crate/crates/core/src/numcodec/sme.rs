use crate::error::{Error, Result};

/// Sign–mantissa–exponent form `s · m · 10^e` with a three-digit mantissa.
///
/// The reserved [`SmeTriple::ZERO`] (mantissa 0) stands for an exact zero,
/// which no mantissa in `100..=999` can represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SmeTriple {
    /// `+1` or `-1`.
    pub sign: i8,
    pub mantissa: u16,
    pub exponent: i32,
}

impl SmeTriple {
    pub const ZERO: SmeTriple = SmeTriple { sign: 1, mantissa: 0, exponent: 0 };

    pub fn new(sign: i8, mantissa: u16, exponent: i32) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidArgument(format!("sign must be ±1, got {sign}")));
        }
        if !(100..=999).contains(&mantissa) {
            return Err(Error::InvalidArgument(format!("mantissa {mantissa} outside 100..=999")));
        }
        Ok(Self { sign, mantissa, exponent })
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    /// The `f64` nearest to `s · m · 10^e`.
    ///
    /// Goes through decimal parsing, which is correctly rounded, so every
    /// scheme reconstructs bit-identical values from the same triple.
    pub fn value(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let signed = i32::from(self.sign) * i32::from(self.mantissa);
        format!("{signed}e{}", self.exponent).parse().expect("decimal literal parses")
    }
}

/// Rounds `x` to three significant digits, half away from zero.
///
/// The decision uses the exact decimal expansion of `x`, so ties such as
/// `1.125` round to `1.13` regardless of binary representation noise.
pub fn to_sme(x: f64) -> Result<SmeTriple> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if x == 0.0 {
        return Ok(SmeTriple::ZERO);
    }
    let sign = if x < 0.0 { -1 } else { 1 };
    let (digits, exp10) = leading_digits(x.abs(), 24);
    let mut round_up = digits[3] >= 5;
    // A displayed "…5000…" may be an exact tie or a run of nines rounded up
    // by the formatter; consult the exact expansion.
    if digits[3] == 5 && digits[4..].iter().all(|&d| d == 0) {
        let (exact, _) = leading_digits(x.abs(), 1100);
        round_up = exact[3] >= 5;
    }
    let mut mantissa = digits[0] as u16 * 100 + digits[1] as u16 * 10 + digits[2] as u16;
    let mut exponent = exp10 - 2;
    if round_up {
        mantissa += 1;
        if mantissa == 1000 {
            mantissa = 100;
            exponent += 1;
        }
    }
    Ok(SmeTriple { sign, mantissa, exponent })
}

/// Decimal digits of `x > 0` in scientific notation with `precision` digits
/// after the point, plus the decimal exponent.
fn leading_digits(x: f64, precision: usize) -> (Vec<u8>, i32) {
    let s = format!("{x:.precision$e}");
    let (mant, exp) = s.split_once('e').expect("scientific formatting");
    let digits = mant.bytes().filter(|b| b.is_ascii_digit()).map(|b| b - b'0').collect();
    (digits, exp.parse().expect("integer exponent"))
}
