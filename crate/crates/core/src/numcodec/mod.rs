//! Floating-point tokenizations for sequence models.
//!
//! Every nonzero value is first rounded to three significant digits,
//! `x ≈ s · m · 10^e` with `m ∈ 100..=999` (see [`to_sme`]), and then
//! spelled out under one of four [`Scheme`]s. `3.14` becomes
//!
//! * P10: `+ 3 1 4 E-2`
//! * P1000: `+ 314 E-2`
//! * B1999: `314 E-2`
//! * FP15: `FP314/-2`
//!
//! Zero is the special `<ZERO>` token in every scheme. Values too small for a
//! scheme's exponent range are flushed to `<ZERO>`; values too large are an
//! error.
//!
//! A matrix serializes as `<DIM_n>`, its entries in row-major order, `<EOS>`.

mod files;
mod scheme;
mod sme;

pub use files::{read_vocab_file, write_vocab_file, SequenceRecord};
pub use scheme::{dim_token, Scheme, TokenId, BOS, DIM_BASE, EOS, MAX_DIM, NUM_SPECIAL, PAD, ZERO};
pub use sme::{to_sme, SmeTriple};

use scheme::TokenClass;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// An encoded value or matrix together with its scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    pub scheme: Scheme,
    pub tokens: Vec<TokenId>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Human-readable token names.
    pub fn names(&self) -> Vec<String> {
        self.tokens.iter().map(|&t| self.scheme.token_name(t).unwrap_or_else(|| format!("<UNK:{t}>"))).collect()
    }
}

fn push_value(x: f64, scheme: Scheme, out: &mut Vec<TokenId>) -> Result<()> {
    let t = to_sme(x)?;
    let (lo, _) = scheme.exponent_range();
    if t.is_zero() || t.exponent < lo {
        out.push(ZERO);
        return Ok(());
    }
    match scheme {
        Scheme::P10 => {
            out.push(scheme.sign_id(t.sign));
            let m = t.mantissa;
            for d in [m / 100, (m / 10) % 10, m % 10] {
                out.push(scheme.digit_id(d as u8));
            }
            out.push(scheme.exponent_id(t.exponent)?);
        }
        Scheme::P1000 => {
            out.push(scheme.sign_id(t.sign));
            out.push(scheme.mantissa_id(t.mantissa));
            out.push(scheme.exponent_id(t.exponent)?);
        }
        Scheme::B1999 => {
            out.push(scheme.signed_mantissa_id(t.sign, t.mantissa));
            out.push(scheme.exponent_id(t.exponent)?);
        }
        Scheme::FP15 => out.push(scheme.float_id(t.sign, t.mantissa, t.exponent)?),
    }
    Ok(())
}

/// Encodes one value. Nonzero in-range values use exactly
/// `scheme.tokens_per_coeff()` tokens; zero is `<ZERO>`.
pub fn encode_value(x: f64, scheme: Scheme) -> Result<TokenSequence> {
    let mut tokens = Vec::with_capacity(scheme.tokens_per_coeff());
    push_value(x, scheme, &mut tokens)?;
    Ok(TokenSequence { scheme, tokens })
}

fn malformed(scheme: Scheme, at: usize, what: &str, got: Option<TokenId>) -> Error {
    let got = match got {
        Some(t) => scheme.token_name(t).unwrap_or_else(|| format!("<UNK:{t}>")),
        None => "end of sequence".into(),
    };
    Error::Malformed(format!("{scheme}: expected {what} at position {at}, found {got}"))
}

/// Parses one coefficient starting at `pos`; returns the value and the
/// number of tokens consumed.
fn parse_value(tokens: &[TokenId], pos: usize, scheme: Scheme) -> Result<(f64, usize)> {
    let at = |i: usize| tokens.get(pos + i).copied();
    let class = |i: usize| at(i).and_then(|t| scheme.classify(t));
    if at(0) == Some(ZERO) {
        return Ok((0.0, 1));
    }
    let exponent = |i: usize| match class(i) {
        Some(TokenClass::Exponent(e)) => Ok(e),
        _ => Err(malformed(scheme, pos + i, "exponent", at(i))),
    };
    let triple = match scheme {
        Scheme::P10 => {
            let Some(TokenClass::Sign(sign)) = class(0) else {
                return Err(malformed(scheme, pos, "sign", at(0)));
            };
            let mut m = 0u16;
            for i in 1..=3 {
                let Some(TokenClass::Digit(d)) = class(i) else {
                    return Err(malformed(scheme, pos + i, "digit", at(i)));
                };
                m = m * 10 + u16::from(d);
            }
            SmeTriple::new(sign, m, exponent(4)?).map_err(|_| malformed(scheme, pos + 1, "leading digit 1-9", at(1)))?
        }
        Scheme::P1000 => {
            let Some(TokenClass::Sign(sign)) = class(0) else {
                return Err(malformed(scheme, pos, "sign", at(0)));
            };
            let Some(TokenClass::Mantissa(m)) = class(1) else {
                return Err(malformed(scheme, pos + 1, "mantissa", at(1)));
            };
            SmeTriple::new(sign, m, exponent(2)?)?
        }
        Scheme::B1999 => {
            let Some(TokenClass::SignedMantissa(sign, m)) = class(0) else {
                return Err(malformed(scheme, pos, "signed mantissa", at(0)));
            };
            SmeTriple::new(sign, m, exponent(1)?)?
        }
        Scheme::FP15 => {
            let Some(TokenClass::Float { sign, slot, exponent }) = class(0) else {
                return Err(malformed(scheme, pos, "float token", at(0)));
            };
            SmeTriple::new(sign, slot, exponent)
                .map_err(|_| malformed(scheme, pos, "float token with mantissa 100-999", at(0)))?
        }
    };
    Ok((triple.value(), scheme.tokens_per_coeff()))
}

/// Decodes a single coefficient; the sequence must contain nothing else.
pub fn decode_value(seq: &TokenSequence) -> Result<f64> {
    let (v, used) = parse_value(&seq.tokens, 0, seq.scheme)?;
    if used != seq.tokens.len() {
        return Err(malformed(seq.scheme, used, "end of coefficient", seq.tokens.get(used).copied()));
    }
    Ok(v)
}

/// `<DIM_n>`, row-major entries, `<EOS>`. Without exact zeros the length is
/// `2 + n²·tokens_per_coeff`.
pub fn encode_matrix(a: &Matrix, scheme: Scheme) -> Result<TokenSequence> {
    let n = a.n();
    let mut tokens = Vec::with_capacity(2 + n * n * scheme.tokens_per_coeff());
    tokens.push(dim_token(n)?);
    for &x in a.as_slice() {
        push_value(x, scheme, &mut tokens)?;
    }
    tokens.push(EOS);
    Ok(TokenSequence { scheme, tokens })
}

/// Inverse of [`encode_matrix`] for an expected dimension `n`.
pub fn decode_matrix(seq: &TokenSequence, n: usize) -> Result<Matrix> {
    let scheme = seq.scheme;
    let tokens = &seq.tokens;
    let dim = dim_token(n)?;
    if tokens.first() != Some(&dim) {
        return Err(malformed(scheme, 0, &format!("<DIM_{n}>"), tokens.first().copied()));
    }
    let mut pos = 1;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let (v, used) = parse_value(tokens, pos, scheme)?;
        data.push(v);
        pos += used;
    }
    if tokens.get(pos) != Some(&EOS) {
        return Err(malformed(scheme, pos, "<EOS>", tokens.get(pos).copied()));
    }
    if pos + 1 != tokens.len() {
        return Err(malformed(scheme, pos + 1, "end of sequence", tokens.get(pos + 1).copied()));
    }
    Matrix::from_vec(n, data)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    fn names(x: f64, s: Scheme) -> Vec<String> {
        encode_value(x, s).unwrap().names()
    }

    #[test]
    fn table_rows() {
        assert_eq!(names(3.14, Scheme::P10), ["+", "3", "1", "4", "E-2"]);
        assert_eq!(names(-6.02e23, Scheme::P10), ["-", "6", "0", "2", "E21"]);
        assert_eq!(names(3.14, Scheme::P1000), ["+", "314", "E-2"]);
        assert_eq!(names(-6.02e23, Scheme::P1000), ["-", "602", "E21"]);
        assert_eq!(names(3.14, Scheme::B1999), ["314", "E-2"]);
        assert_eq!(names(-6.02e23, Scheme::B1999), ["-602", "E21"]);
        assert_eq!(names(3.14, Scheme::FP15), ["FP314/-2"]);
    }

    #[test]
    fn fp15_range_limits() {
        assert!(matches!(encode_value(-6.02e23, Scheme::FP15), Err(Error::ExponentRange { .. })));
        assert_eq!(encode_value(1e-12, Scheme::FP15).unwrap().tokens, vec![ZERO]);
        assert_eq!(names(9.99e7, Scheme::FP15), ["FP999/5"]);
    }

    #[test]
    fn decode_inverts_table_rows() {
        let seq = TokenSequence {
            scheme: Scheme::P10,
            tokens: ["+", "3", "1", "4", "E-2"].iter().map(|t| Scheme::P10.token_id(t).unwrap()).collect(),
        };
        assert_eq!(decode_value(&seq).unwrap(), 3.14);
        let zero = TokenSequence { scheme: Scheme::FP15, tokens: vec![ZERO] };
        assert_eq!(decode_value(&zero).unwrap(), 0.0);
    }

    #[test]
    fn malformed_sequences_rejected() {
        let s = Scheme::P1000;
        let bad_class = TokenSequence { scheme: s, tokens: vec![s.sign_id(1), s.sign_id(1), EOS] };
        assert!(matches!(decode_value(&bad_class), Err(Error::Malformed(_))));
        let truncated = TokenSequence { scheme: s, tokens: vec![s.sign_id(1), s.mantissa_id(314)] };
        assert!(matches!(decode_value(&truncated), Err(Error::Malformed(_))));
        let leading_zero = TokenSequence {
            scheme: Scheme::P10,
            tokens: vec![
                Scheme::P10.sign_id(1),
                Scheme::P10.digit_id(0),
                Scheme::P10.digit_id(1),
                Scheme::P10.digit_id(4),
                Scheme::P10.exponent_id(0).unwrap(),
            ],
        };
        assert!(decode_value(&leading_zero).is_err());
        let reserved = TokenSequence { scheme: Scheme::FP15, tokens: vec![NUM_SPECIAL + 42] };
        assert!(decode_value(&reserved).is_err());
        let unknown = TokenSequence { scheme: s, tokens: vec![99_999] };
        assert!(decode_value(&unknown).is_err());
    }

    #[test]
    fn one_by_one_matrix_layout() {
        let seq = encode_matrix(&Matrix::from_diag(&[3.14]), Scheme::P1000).unwrap();
        assert_eq!(seq.names(), ["<DIM_1>", "+", "314", "E-2", "<EOS>"]);
    }

    #[test]
    fn identity_round_trips_exactly() {
        for s in Scheme::ALL {
            let seq = encode_matrix(&Matrix::identity(2), s).unwrap();
            assert_eq!(decode_matrix(&seq, 2).unwrap(), Matrix::identity(2));
        }
    }

    #[test]
    fn fp15_length_formula() {
        let a = Matrix::from_vec(3, (1..=9).map(|i| i as f64 * 0.37 - 2.0).collect()).unwrap();
        assert_eq!(encode_matrix(&a, Scheme::FP15).unwrap().len(), 2 + 9);
        assert_eq!(encode_matrix(&a, Scheme::P10).unwrap().len(), 2 + 9 * 5);
    }

    #[test]
    fn matrix_decode_errors() {
        let seq = encode_matrix(&Matrix::identity(2), Scheme::B1999).unwrap();
        assert!(decode_matrix(&seq, 3).is_err());
        let mut missing_eos = seq.clone();
        missing_eos.tokens.pop();
        assert!(decode_matrix(&missing_eos, 2).is_err());
        let mut trailing = seq.clone();
        trailing.tokens.push(PAD);
        assert!(decode_matrix(&trailing, 2).is_err());
        assert!(encode_matrix(&Matrix::identity(11), Scheme::P10).is_err());
    }
}
