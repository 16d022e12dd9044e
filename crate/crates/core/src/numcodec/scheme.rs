use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token identifier within a scheme's full vocabulary (specials first).
pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const ZERO: TokenId = 3;
/// `DIM_1` .. `DIM_10` occupy ids `4..=13`.
pub const DIM_BASE: TokenId = 4;
pub const MAX_DIM: usize = 10;
pub const NUM_SPECIAL: u32 = 4 + MAX_DIM as u32;

pub fn dim_token(n: usize) -> Result<TokenId> {
    if (1..=MAX_DIM).contains(&n) {
        Ok(DIM_BASE + n as u32 - 1)
    } else {
        Err(Error::InvalidArgument(format!("matrix dimension {n} outside 1..={MAX_DIM}")))
    }
}

/// The four floating-point tokenizations.
///
/// | scheme | tokens/coef | core vocab | layout                                    |
/// |--------|-------------|------------|-------------------------------------------|
/// | P10    | 5           | 210        | 2 signs + 10 digits + 198 exponents       |
/// | P1000  | 3           | 1100       | 2 signs + 900 mantissas + 198 exponents   |
/// | B1999  | 2           | 2000       | 1800 signed mantissas + 200 exponents     |
/// | FP15   | 1           | 30000      | 15 exponents × 2 signs × 1000 mantissa slots |
///
/// FP15 mantissa slots `000..=099` are reserved and never emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    P10,
    P1000,
    B1999,
    FP15,
}

/// What a core token stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum TokenClass {
    Sign(i8),
    Digit(u8),
    Mantissa(u16),
    SignedMantissa(i8, u16),
    Exponent(i32),
    Float { sign: i8, slot: u16, exponent: i32 },
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::P10, Scheme::P1000, Scheme::B1999, Scheme::FP15];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::P10 => "P10",
            Scheme::P1000 => "P1000",
            Scheme::B1999 => "B1999",
            Scheme::FP15 => "FP15",
        }
    }

    pub fn tokens_per_coeff(self) -> usize {
        match self {
            Scheme::P10 => 5,
            Scheme::P1000 => 3,
            Scheme::B1999 => 2,
            Scheme::FP15 => 1,
        }
    }

    /// Number of scheme tokens, excluding the shared special tokens.
    pub fn core_vocab_size(self) -> u32 {
        match self {
            Scheme::P10 => 210,
            Scheme::P1000 => 1100,
            Scheme::B1999 => 2000,
            Scheme::FP15 => 30000,
        }
    }

    /// Total id space: specials plus core tokens.
    pub fn vocab_size(self) -> usize {
        (NUM_SPECIAL + self.core_vocab_size()) as usize
    }

    /// Inclusive range of representable decimal exponents `e` in `m·10^e`.
    pub fn exponent_range(self) -> (i32, i32) {
        match self {
            // Magnitudes 1.00e-99 ..= 9.99e98.
            Scheme::P10 | Scheme::P1000 => (-101, 96),
            // Magnitudes 1.00e-100 ..= 9.99e99.
            Scheme::B1999 => (-102, 97),
            // Magnitudes 1.00e-7 ..= 9.99e7.
            Scheme::FP15 => (-9, 5),
        }
    }

    fn exponent_count(self) -> u32 {
        let (lo, hi) = self.exponent_range();
        (hi - lo + 1) as u32
    }

    /// One-line account of how the core vocabulary size decomposes.
    pub fn vocab_arithmetic(self) -> String {
        let e = self.exponent_count();
        match self {
            Scheme::P10 => format!("210 = 2 signs + 10 digits + {e} exponent tokens"),
            Scheme::P1000 => format!("1100 = 2 signs + 900 mantissas (100..=999) + {e} exponent tokens"),
            Scheme::B1999 => {
                format!("2000 = 1800 signed mantissas (±100..=±999) + {e} exponent tokens")
            }
            Scheme::FP15 => format!("30000 = {e} exponents × 2 signs × 1000 mantissa slots (slots 000..=099 reserved)"),
        }
    }

    pub(crate) fn exponent_id(self, e: i32) -> Result<TokenId> {
        let (lo, hi) = self.exponent_range();
        if !(lo..=hi).contains(&e) {
            return Err(Error::ExponentRange { scheme: self.name(), exponent: e, min: lo, max: hi });
        }
        let offset = match self {
            Scheme::P10 => 12,
            Scheme::P1000 => 902,
            Scheme::B1999 => 1800,
            Scheme::FP15 => unreachable!("FP15 packs exponents into float tokens"),
        };
        Ok(NUM_SPECIAL + offset + (e - lo) as u32)
    }

    pub(crate) fn sign_id(self, sign: i8) -> TokenId {
        debug_assert!(matches!(self, Scheme::P10 | Scheme::P1000));
        NUM_SPECIAL + u32::from(sign < 0)
    }

    pub(crate) fn digit_id(self, d: u8) -> TokenId {
        debug_assert_eq!(self, Scheme::P10);
        NUM_SPECIAL + 2 + u32::from(d)
    }

    pub(crate) fn mantissa_id(self, m: u16) -> TokenId {
        debug_assert_eq!(self, Scheme::P1000);
        NUM_SPECIAL + 2 + u32::from(m - 100)
    }

    pub(crate) fn signed_mantissa_id(self, sign: i8, m: u16) -> TokenId {
        debug_assert_eq!(self, Scheme::B1999);
        // −999..=−100 first, then 100..=999.
        let idx = if sign < 0 { 999 - u32::from(m) } else { 900 + u32::from(m) - 100 };
        NUM_SPECIAL + idx
    }

    pub(crate) fn float_id(self, sign: i8, m: u16, e: i32) -> Result<TokenId> {
        debug_assert_eq!(self, Scheme::FP15);
        let (lo, hi) = self.exponent_range();
        if !(lo..=hi).contains(&e) {
            return Err(Error::ExponentRange { scheme: self.name(), exponent: e, min: lo, max: hi });
        }
        let block = (e - lo) as u32 * 2 + u32::from(sign < 0);
        Ok(NUM_SPECIAL + block * 1000 + u32::from(m))
    }

    /// Classifies a core token id; `None` for specials and out-of-range ids.
    pub(crate) fn classify(self, id: TokenId) -> Option<TokenClass> {
        if id < NUM_SPECIAL || id >= NUM_SPECIAL + self.core_vocab_size() {
            return None;
        }
        let c = id - NUM_SPECIAL;
        let (lo, _) = self.exponent_range();
        Some(match self {
            Scheme::P10 => match c {
                0 => TokenClass::Sign(1),
                1 => TokenClass::Sign(-1),
                2..=11 => TokenClass::Digit((c - 2) as u8),
                _ => TokenClass::Exponent(lo + (c - 12) as i32),
            },
            Scheme::P1000 => match c {
                0 => TokenClass::Sign(1),
                1 => TokenClass::Sign(-1),
                2..=901 => TokenClass::Mantissa((c - 2 + 100) as u16),
                _ => TokenClass::Exponent(lo + (c - 902) as i32),
            },
            Scheme::B1999 => match c {
                0..=899 => TokenClass::SignedMantissa(-1, (999 - c) as u16),
                900..=1799 => TokenClass::SignedMantissa(1, (c - 900 + 100) as u16),
                _ => TokenClass::Exponent(lo + (c - 1800) as i32),
            },
            Scheme::FP15 => {
                let block = c / 1000;
                TokenClass::Float {
                    sign: if block.is_multiple_of(2) { 1 } else { -1 },
                    slot: (c % 1000) as u16,
                    exponent: lo + (block / 2) as i32,
                }
            }
        })
    }

    /// Printable name of any id in this scheme's vocabulary.
    pub fn token_name(self, id: TokenId) -> Option<String> {
        match id {
            PAD => return Some("<PAD>".into()),
            BOS => return Some("<BOS>".into()),
            EOS => return Some("<EOS>".into()),
            ZERO => return Some("<ZERO>".into()),
            d if (DIM_BASE..NUM_SPECIAL).contains(&d) => {
                return Some(format!("<DIM_{}>", d - DIM_BASE + 1));
            }
            _ => {}
        }
        Some(match self.classify(id)? {
            TokenClass::Sign(s) => if s > 0 { "+" } else { "-" }.to_string(),
            TokenClass::Digit(d) => d.to_string(),
            TokenClass::Mantissa(m) => m.to_string(),
            TokenClass::SignedMantissa(s, m) => (i32::from(s) * i32::from(m)).to_string(),
            TokenClass::Exponent(e) => format!("E{e}"),
            TokenClass::Float { sign, slot, exponent } => {
                format!("FP{}{slot:03}/{exponent}", if sign < 0 { "-" } else { "" })
            }
        })
    }

    /// The full token table, specials first; index is the token id.
    pub fn vocab(self) -> &'static [String] {
        static TABLES: [OnceLock<Vec<String>>; 4] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        TABLES[self as usize].get_or_init(|| {
            (0..self.vocab_size() as u32).map(|id| self.token_name(id).expect("every id in range has a name")).collect()
        })
    }

    /// Id of a printable token name.
    pub fn token_id(self, name: &str) -> Option<TokenId> {
        self.vocab().iter().position(|t| t == name).map(|p| p as TokenId)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P10" => Ok(Scheme::P10),
            "P1000" => Ok(Scheme::P1000),
            "B1999" => Ok(Scheme::B1999),
            "FP15" => Ok(Scheme::FP15),
            other => Err(Error::InvalidArgument(format!("unknown encoding scheme `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn core_sizes_match_table() {
        let sizes: Vec<u32> = Scheme::ALL.iter().map(|s| s.core_vocab_size()).collect();
        assert_eq!(sizes, vec![210, 1100, 2000, 30000]);
        for s in Scheme::ALL {
            let names = s.vocab();
            assert_eq!(names.len(), s.vocab_size());
            assert_eq!(names.iter().collect::<HashSet<_>>().len(), names.len(), "{s}: duplicate names");
        }
    }

    #[test]
    fn layout_is_exhaustive() {
        for s in Scheme::ALL {
            let last = NUM_SPECIAL + s.core_vocab_size() - 1;
            assert!(s.classify(last).is_some());
            assert!(s.classify(last + 1).is_none());
        }
        assert_eq!(Scheme::P10.token_name(Scheme::P10.exponent_id(96).unwrap()).unwrap(), "E96");
        assert_eq!(Scheme::B1999.token_name(Scheme::B1999.exponent_id(97).unwrap()).unwrap(), "E97");
    }

    #[test]
    fn names_round_trip() {
        assert_eq!(Scheme::FP15.token_id("FP314/-2"), Some(Scheme::FP15.float_id(1, 314, -2).unwrap()));
        assert_eq!(Scheme::B1999.token_id("-602"), Some(Scheme::B1999.signed_mantissa_id(-1, 602)));
        assert_eq!(Scheme::P10.token_id("<EOS>"), Some(EOS));
        assert_eq!(Scheme::P10.token_id("<DIM_10>"), Some(13));
    }
}
