//! Bitstrings over the qubit register.
//!
//! Convention: qubit 0 is the least-significant bit of a basis index, and the
//! leftmost character when a bitstring is printed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-length bitstring, one bit per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn zeros(n: usize) -> Self {
        BitString(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    /// Basis index → bitstring (qubit k = bit k of `index`).
    pub fn from_index(index: usize, n: usize) -> Self {
        BitString((0..n).map(|k| (index >> k) & 1 == 1).collect())
    }

    /// Bitstring → basis index.
    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0usize, |acc, (k, &b)| acc | ((b as usize) << k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, q: usize) -> bool {
        self.0[q]
    }

    pub fn set(&mut self, q: usize, v: bool) {
        self.0[q] = v;
    }

    pub fn flip(&mut self, q: usize) {
        self.0[q] = !self.0[q];
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    /// Returns a copy with the given qubits flipped.
    pub fn with_flipped(&self, qubits: &[usize]) -> Self {
        let mut out = self.clone();
        for &q in qubits {
            out.flip(q);
        }
        out
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("invalid bit character '{other}'"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip_is_little_endian() {
        // "1010": qubit 0 (leftmost char) set, qubit 2 set -> index 1 + 4 = 5
        let b: BitString = "1010".parse().unwrap();
        assert_eq!(b.to_index(), 5);
        assert_eq!(BitString::from_index(5, 4), b);
        assert_eq!(b.to_string(), "1010");
    }

    #[test]
    fn rejects_non_binary() {
        assert!("10x1".parse::<BitString>().is_err());
    }

    #[test]
    fn flip_helpers() {
        let b = BitString::zeros(4).with_flipped(&[1, 3]);
        assert_eq!(b.to_string(), "0101");
        assert_eq!(b.count_ones(), 2);
    }
}
