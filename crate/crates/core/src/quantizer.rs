//! Infinite tree-structured quantizer on `[-L, L]`.
//!
//! Each bit halves the current interval: `0` keeps the left half, `1` the
//! right half. Cells are half-open `[lo, hi)`, so a value sitting exactly on
//! a midpoint goes right. Paths are read most-significant bit first, which
//! makes a depth-`n'` path, read as a binary integer, the codebook row index.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A finite path in the quantizer tree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitPath {
    bits: Vec<bool>,
}

impl BitPath {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// The depth-`depth` path whose binary reading is `index`.
    pub fn from_index(index: u64, depth: u32) -> Self {
        assert!(depth <= 64, "index paths are limited to 64 bits");
        let bits = (0..depth).map(|i| (index >> (depth - 1 - i)) & 1 == 1).collect();
        Self { bits }
    }

    /// Parses a `0`/`1` string.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(domain(format!("invalid bit {other:?} in path {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }

    pub fn depth(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The path read as a binary integer; `None` beyond 64 bits.
    pub fn index(&self) -> Option<u64> {
        if self.bits.len() > 64 {
            return None;
        }
        Some(self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
    }

    pub fn to_biguint(&self) -> BigUint {
        bits_to_biguint(self.bits.iter().copied(), self.bits.len())
    }

    /// True when `self` is a prefix of `other`.
    pub fn is_prefix_of(&self, other: &BitPath) -> bool {
        other.bits.starts_with(&self.bits)
    }
}

impl fmt::Display for BitPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl PartialOrd for BitPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BitPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bits.cmp(&other.bits)
    }
}

fn check_bound(l: f64) -> Result<()> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain(format!("quantizer bound must be positive, got {l}")));
    }
    Ok(())
}

/// The depth-`depth` path of `x0`.
pub fn quantize(x0: f64, l: f64, depth: u32) -> Result<BitPath> {
    check_bound(l)?;
    if !(x0.abs() < l) {
        return Err(domain(format!("|x0| = {} is not below L = {l}", x0.abs())));
    }
    let (mut lo, mut hi) = (-l, l);
    let mut bits = Vec::with_capacity(depth as usize);
    for _ in 0..depth {
        let mid = 0.5 * (lo + hi);
        if x0 < mid {
            bits.push(false);
            hi = mid;
        } else {
            bits.push(true);
            lo = mid;
        }
    }
    Ok(BitPath { bits })
}

/// The half-open interval `[lo, hi)` identified by `path`.
pub fn cell(path: &BitPath, l: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (-l, l);
    for &b in &path.bits {
        let mid = 0.5 * (lo + hi);
        if b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Midpoint of the path's cell.
pub fn dequantize(path: &BitPath, l: f64) -> f64 {
    let (lo, hi) = cell(path, l);
    0.5 * (lo + hi)
}

/// First `k` bits of `path`.
pub fn path_prefix(path: &BitPath, k: u32) -> Result<BitPath> {
    if k > path.depth() {
        return Err(domain(format!("prefix length {k} exceeds path depth {}", path.depth())));
    }
    Ok(BitPath { bits: path.bits[..k as usize].to_vec() })
}

fn bits_to_biguint(bits: impl Iterator<Item = bool>, len: usize) -> BigUint {
    let mut bytes = vec![0u8; len.div_ceil(8)];
    let pad = bytes.len() * 8 - len;
    for (i, b) in bits.enumerate() {
        if b {
            let pos = pad + i;
            bytes[pos / 8] |= 0x80 >> (pos % 8);
        }
    }
    BigUint::from_bytes_be(&bytes)
}

/// A signed real stored as `sign * exp(ln_abs)`. Used for initial-state
/// offsets that are far smaller than `f64` can hold once amplified by
/// `a^m` for large `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offset {
    pub sign: f64,
    pub ln_abs: f64,
}

impl Offset {
    pub const ZERO: Offset = Offset { sign: 0.0, ln_abs: f64::NEG_INFINITY };

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::ZERO
        } else {
            Self { sign: v.signum(), ln_abs: v.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        self.scaled(0.0)
    }

    /// `self * exp(ln_factor)`, without intermediate under- or overflow.
    pub fn scaled(&self, ln_factor: f64) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * (self.ln_abs + ln_factor).exp()
        }
    }
}

/// An initial state drawn uniformly on `(-L, L)` and held as its first
/// `precision` quantizer bits (plus an implicit trailing `1`, i.e. the
/// midpoint of the finest cell).
///
/// Depth-`n'` paths are exact prefixes, and offsets to reconstruction points
/// are computed in integer arithmetic, so the estimate error `X(0) - X̂(0)`
/// keeps full relative precision at any depth up to `precision`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    l: f64,
    bits: Vec<bool>,
}

impl InitialCondition {
    pub fn sample<R: Rng + ?Sized>(l: f64, precision: u32, rng: &mut R) -> Result<Self> {
        check_bound(l)?;
        let mut bits = Vec::with_capacity(precision as usize);
        while bits.len() < precision as usize {
            let word: u64 = rng.random();
            let take = (precision as usize - bits.len()).min(64);
            bits.extend((0..take).map(|i| (word >> (63 - i)) & 1 == 1));
        }
        Ok(Self { l, bits })
    }

    /// Builds the condition whose quantizer path is `path`.
    pub fn from_path(l: f64, path: BitPath) -> Result<Self> {
        check_bound(l)?;
        Ok(Self { l, bits: path.bits })
    }

    pub fn bound(&self) -> f64 {
        self.l
    }

    pub fn precision(&self) -> u32 {
        self.bits.len() as u32
    }

    /// Nearest `f64` to the represented value.
    pub fn value(&self) -> f64 {
        let full = BitPath { bits: self.bits.clone() };
        let mut v = dequantize(&path_prefix(&full, self.precision().min(60)).unwrap(), self.l);
        if self.precision() > 60 {
            v += self.offset_from(&path_prefix(&full, 60).unwrap()).value();
        }
        v
    }

    /// Depth-`depth` path, clamped to the stored precision.
    pub fn path(&self, depth: u32) -> BitPath {
        let d = depth.min(self.precision()) as usize;
        BitPath { bits: self.bits[..d].to_vec() }
    }

    /// `X(0) - dequantize(path)` computed exactly and returned in log form.
    pub fn offset_from(&self, path: &BitPath) -> Offset {
        let n = self.bits.len();
        let d = path.bits.len();
        // both sides as integers over 2^(p+1), p = max(n, d)
        let p = n.max(d);
        let x = (bits_to_biguint(self.bits.iter().copied(), n) << (p - n + 1)) + (BigUint::from(1u8) << (p - n));
        let c = (path.to_biguint() << (p - d + 1)) + (BigUint::from(1u8) << (p - d));
        let (sign, mag) = match x.cmp(&c) {
            Ordering::Equal => return Offset::ZERO,
            Ordering::Greater => (1.0, x - c),
            Ordering::Less => (-1.0, c - x),
        };
        debug_assert!(!mag.is_zero());
        let bits = mag.bits();
        let shift = bits.saturating_sub(64);
        let top = (mag >> shift).to_f64().expect("64-bit mantissa fits in f64");
        let ln_abs = top.ln() + (shift as f64 - (p + 1) as f64) * std::f64::consts::LN_2 + (2.0 * self.l).ln();
        Offset { sign, ln_abs }
    }
}
