//! Fixed-width big-endian index codec and an ordered, lossless channel that
//! only exposes how many bits went through it.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A sequence of bits, most significant first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitVec(Vec<bool>);

impl BitVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    /// Flips bit `i` in place.
    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }
}

impl From<Vec<bool>> for BitVec {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Protocol(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl Serialize for BitVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `⌈log₂ size⌉`: bits needed to name one of `size` cells.
pub fn width(size: u64) -> usize {
    if size <= 1 {
        0
    } else {
        (64 - (size - 1).leading_zeros()) as usize
    }
}

pub fn encode(index: u64, size: u64) -> Result<BitVec> {
    if index >= size {
        return Err(Error::Argument(format!("index {index} out of range for {size} cells")));
    }
    let w = width(size);
    Ok(BitVec((0..w).rev().map(|k| index >> k & 1 == 1).collect()))
}

pub fn decode(bits: &BitVec, size: u64) -> Result<u64> {
    if size == 0 {
        return Err(Error::Argument("cover size must be positive".into()));
    }
    let w = width(size);
    if bits.len() != w {
        return Err(Error::Protocol(format!("expected {w} bits for {size} cells, got {}", bits.len())));
    }
    let value = bits.0.iter().fold(0u64, |acc, b| acc << 1 | u64::from(*b));
    if value >= size {
        return Err(Error::Protocol(format!("decoded index {value} >= cover size {size}")));
    }
    Ok(value)
}

/// Single-producer single-consumer bit transport with a running count.
#[derive(Debug, Clone, Default)]
pub struct CountedChannel {
    queue: VecDeque<BitVec>,
    log: Vec<BitVec>,
    total_bits: u64,
}

impl CountedChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, bits: BitVec) {
        self.total_bits += bits.len() as u64;
        self.log.push(bits.clone());
        self.queue.push_back(bits);
    }

    pub fn recv(&mut self) -> Option<BitVec> {
        self.queue.pop_front()
    }

    /// Mutable access to the next undelivered message, for fault injection.
    pub fn peek_mut(&mut self) -> Option<&mut BitVec> {
        self.queue.front_mut()
    }

    pub fn total_bits(&self) -> u64 {
        self.total_bits
    }

    pub fn log(&self) -> &[BitVec] {
        &self.log
    }
}
