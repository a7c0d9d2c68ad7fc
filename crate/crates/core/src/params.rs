//! Problem-instance description: database size, local scope and target.

use crate::error::{Error, Result};

/// Default cap on the database exponent. A 2^24 state vector of f64
/// amplitudes is 128 MiB, the largest size considered desk-scale here.
pub const DEFAULT_N_CAP: u32 = 24;

/// A single search instance: an `n`-qubit database, a local diffusion scope
/// of `m` qubits and one marked item.
///
/// Basis-state indices identify items; index bit `n-1` (the most significant
/// of the low `n` bits) is qubit 0, so the `n-m` bit prefix of an index is
/// the block label and the low `m` bits address items inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    n: u32,
    m: u32,
    target: u64,
}

impl SearchParams {
    /// Build an instance under [`DEFAULT_N_CAP`].
    pub fn new(n: u32, m: u32, target: u64) -> Result<Self> {
        Self::with_cap(n, m, target, DEFAULT_N_CAP)
    }

    /// Build an instance under an explicit cap on `n`.
    pub fn with_cap(n: u32, m: u32, target: u64, cap: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("database exponent n must be at least 1"));
        }
        if n > cap {
            return Err(Error::ResourceLimit(format!(
                "n = {n} exceeds the state-vector cap of {cap} qubits"
            )));
        }
        if m < 1 || m > n {
            return Err(Error::invalid(format!(
                "local scope m = {m} must satisfy 1 <= m <= n = {n}"
            )));
        }
        if target >> n != 0 {
            return Err(Error::invalid(format!(
                "target {target:#b} does not fit in {n} bits"
            )));
        }
        Ok(Self { n, m, target })
    }

    /// Parse the target from an `n`-bit string, qubit 0 first (most
    /// significant bit of the index).
    pub fn from_bits(n: u32, m: u32, bits: &str) -> Result<Self> {
        if bits.len() != n as usize {
            return Err(Error::invalid(format!(
                "target bit-string has {} bits, expected {n}",
                bits.len()
            )));
        }
        let mut target = 0u64;
        for (i, c) in bits.chars().enumerate() {
            target <<= 1;
            match c {
                '0' => {}
                '1' => target |= 1,
                _ => return Err(Error::parse(i, format!("expected '0' or '1', found {c:?}"))),
            }
        }
        Self::new(n, m, target)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    /// The target's block label t1 (high `n-m` bits).
    pub fn target_prefix(&self) -> u64 {
        self.target >> self.m
    }

    /// The target's in-block address t2 (low `m` bits).
    pub fn target_suffix(&self) -> u64 {
        self.target & ((1 << self.m) - 1)
    }

    /// The target as an `n`-character bit string, qubit 0 first.
    pub fn target_bits(&self) -> String {
        (0..self.n)
            .rev()
            .map(|b| if self.target >> b & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_instance() {
        let p = SearchParams::new(4, 2, 0b1011).unwrap();
        assert_eq!(p.target_prefix(), 0b10);
        assert_eq!(p.target_suffix(), 0b11);
        assert_eq!(p.target_bits(), "1011");
    }

    #[test]
    fn bit_string_round_trip() {
        let p = SearchParams::from_bits(6, 3, "010110").unwrap();
        assert_eq!(p.target(), 0b010110);
        assert_eq!(p.target_bits(), "010110");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(SearchParams::new(0, 1, 0).is_err());
        assert!(SearchParams::new(4, 0, 0).is_err());
        assert!(SearchParams::new(4, 5, 0).is_err());
        assert!(SearchParams::new(4, 2, 16).is_err());
        assert!(SearchParams::new(25, 2, 0).is_err());
        assert!(SearchParams::with_cap(25, 2, 0, 26).is_ok());
        assert!(SearchParams::from_bits(4, 2, "01x1").is_err());
        assert!(SearchParams::from_bits(4, 2, "011").is_err());
    }
}
