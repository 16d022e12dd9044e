use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::scheme::{Scheme, TokenId, NUM_SPECIAL};
use crate::error::{Error, Result};

/// Writes the vocabulary as text: `#` header lines, then one token per line.
/// A token's id is its zero-based index among the non-comment lines.
pub fn write_vocab_file<W: Write>(scheme: Scheme, mut w: W) -> Result<()> {
    let (lo, hi) = scheme.exponent_range();
    writeln!(w, "# scheme: {scheme}")?;
    writeln!(w, "# tokens_per_coeff: {}", scheme.tokens_per_coeff())?;
    writeln!(w, "# core_vocab_size: {}", scheme.core_vocab_size())?;
    writeln!(w, "# core_vocab: {}", scheme.vocab_arithmetic())?;
    writeln!(w, "# exponent_range: {lo}..={hi}")?;
    writeln!(w, "# special_tokens: {NUM_SPECIAL} (ids 0..{NUM_SPECIAL}: PAD BOS EOS ZERO DIM_1..DIM_10)")?;
    writeln!(w, "# total_ids: {}", scheme.vocab_size())?;
    for name in scheme.vocab() {
        writeln!(w, "{name}")?;
    }
    Ok(())
}

/// Reads a vocabulary file back into its token list (comments skipped).
pub fn read_vocab_file<R: BufRead>(r: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') {
            continue;
        }
        out.push(line);
    }
    Ok(out)
}

/// One line of a tokenized-sequence file (JSON lines).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub scheme: Scheme,
    pub n: usize,
    pub input_tokens: Vec<TokenId>,
    pub target_tokens: Vec<TokenId>,
}

impl SequenceRecord {
    pub fn validate(&self) -> Result<()> {
        let limit = self.scheme.vocab_size() as TokenId;
        if let Some(t) = self.input_tokens.iter().chain(&self.target_tokens).find(|&&t| t >= limit) {
            return Err(Error::Malformed(format!("token id {t} outside vocabulary of {}", self.scheme)));
        }
        Ok(())
    }
}
