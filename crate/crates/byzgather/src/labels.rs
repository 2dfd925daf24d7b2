//! Label transformation and its separation property.
//!
//! Every agent carries a positive integer label `l` with binary writing
//! `b1..bc` (c = bit length). The transformed label `l*` is the bit string
//! `10 b1b1..bcbc 01 10 b1b1..bcbc 01` of length `4c+8`: two copies of the
//! doubled binary writing, each framed by `10`/`01`. For any two distinct
//! labels a < b the transformed strings differ at some position in the first
//! `2c+4` bits *and* at some position in the last part, where c is the bit
//! length of `a` — the separation property exploited by the top-level
//! protocol's bit schedule.
//!
//! Bits are indexed 1-based throughout, matching the `(i div 3)+1` bit
//! selection in the gathering loop.

use thiserror::Error;

/// The transformed label `l*` of a positive integer label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedLabel {
    bits: Vec<u8>,
}

impl TransformedLabel {
    /// Number of bits, always `4c + 8` for a label of bit length `c`.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1-based bit access: `bit(1)` is the first bit. Panics out of range.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i >= 1 && i <= self.bits.len(), "bit index {i} out of 1..={}", self.bits.len());
        self.bits[i - 1]
    }

    /// The bit string as "0"/"1" characters.
    pub fn as_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
    }
}

/// Bit length of a positive integer (c in the construction).
pub fn bitlen(label: u64) -> usize {
    assert!(label >= 1, "labels are positive integers");
    64 - label.leading_zeros() as usize
}

/// Computes the transformed label `l* = 10 dup(l) 01 10 dup(l) 01` where
/// `dup` doubles every bit of the binary writing of `l`.
pub fn transform(label: u64) -> TransformedLabel {
    assert!(label >= 1, "labels are positive integers");
    let c = bitlen(label);
    let mut half = Vec::with_capacity(2 * c + 4);
    half.push(1);
    half.push(0);
    for i in (0..c).rev() {
        let b = ((label >> i) & 1) as u8;
        half.push(b);
        half.push(b);
    }
    half.push(0);
    half.push(1);
    let mut bits = half.clone();
    bits.extend_from_slice(&half);
    TransformedLabel { bits }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SeparationError {
    #[error("invalid parameter: requires a < b, got a={a}, b={b}")]
    InvalidParameter { a: u64, b: u64 },
}

/// For labels `a < b`, returns 1-based positions `(i, j)` with
/// `i <= 2c+4 < j <= 4c+8` (c = bitlen(a)) at which the transformed labels
/// differ. Existence is guaranteed by the separation property.
pub fn check_separation(a: u64, b: u64) -> Result<(usize, usize), SeparationError> {
    if a >= b {
        return Err(SeparationError::InvalidParameter { a, b });
    }
    let ta = transform(a);
    let tb = transform(b);
    let c = bitlen(a);
    let half = 2 * c + 4;
    let full = 4 * c + 8;
    let differs = |i: usize| {
        let xa = ta.bit(i);
        // Positions beyond tb's length cannot occur here because
        // len(tb) >= len(ta) when b > a, but guard anyway.
        if i > tb.len() {
            return true;
        }
        xa != tb.bit(i)
    };
    let i = (1..=half).find(|&i| differs(i));
    let j = ((half + 1)..=full).find(|&j| differs(j));
    match (i, j) {
        (Some(i), Some(j)) => Ok((i, j)),
        _ => unreachable!("separation property guarantees witnesses for a={a} < b={b}"),
    }
}
