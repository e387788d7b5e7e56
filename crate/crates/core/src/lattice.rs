//! Blockade-constrained Hilbert space of an open 1-D Rydberg chain.
//!
//! A configuration is a bitstring over the sites (0 = ground, 1 = Rydberg).
//! The constrained space keeps exactly those bitstrings with no two adjacent
//! excitations. Bitstrings are stored packed in a `u64` with the leftmost
//! site as the most significant bit, so lexicographic order on bitstrings is
//! plain numeric order on the packed value.
//!
//! Sites are numbered 1..=N in documentation and 0..N in code. The chain is
//! split into a subsystem `A` made of the first `n_a` sites and a bath `B`
//! made of the remaining `n_b = n - n_a` sites.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Largest chain length accepted by the enumerators.
pub const MAX_SITES: usize = 32;

/// A bitstring over `len` sites; site 0 is the most significant bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteConfig {
    bits: u64,
    len: usize,
}

impl SiteConfig {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > 64 {
            return invalid(format!("bitstring length {len} exceeds 64"));
        }
        if len < 64 && bits >> len != 0 {
            return invalid(format!("bits {bits:#b} do not fit in {len} sites"));
        }
        Ok(Self { bits, len })
    }

    pub(crate) fn from_raw(bits: u64, len: usize) -> Self {
        debug_assert!(len == 64 || bits >> len == 0);
        Self { bits, len }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: 0, len }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut packed = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            if b > 1 {
                return invalid(format!("bit {i} has value {b}"));
            }
            packed = (packed << 1) | u64::from(b);
        }
        Self::new(packed, bits.len())
    }

    /// Packed value, leftmost site most significant.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Occupation of site `i` (0-based, from the left).
    pub fn site(&self, i: usize) -> u8 {
        assert!(i < self.len, "site {i} out of range for length {}", self.len);
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.site(i)).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// No two adjacent sites are both excited.
    pub fn is_blockade_free(&self) -> bool {
        self.bits & (self.bits >> 1) == 0
    }

    /// Configuration with site `i` flipped.
    pub fn flipped(&self, i: usize) -> Self {
        assert!(i < self.len);
        Self { bits: self.bits ^ (1 << (self.len - 1 - i)), len: self.len }
    }

    /// Concatenation `self ++ other`.
    pub fn join(&self, other: &SiteConfig) -> SiteConfig {
        assert!(self.len + other.len <= 64);
        let bits = if other.len == 64 { other.bits } else { (self.bits << other.len) | other.bits };
        Self { bits, len: self.len + other.len }
    }
}

impl fmt::Display for SiteConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.site(i) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for SiteConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Result<Vec<u8>> = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => invalid(format!("unexpected character {other:?} in bitstring")),
            })
            .collect();
        Self::from_bits(&bits?)
    }
}

/// All blockade-respecting configurations of `n` sites in lexicographic order.
pub fn enumerate_constrained_basis(n: usize) -> Result<Vec<SiteConfig>> {
    if n == 0 {
        return invalid("chain must have at least one site");
    }
    if n > MAX_SITES {
        return Err(Error::Unsupported(format!("{n} sites exceeds the enumeration limit {MAX_SITES}")));
    }
    let mut out = Vec::new();
    extend_from(0, 0, n, &mut out);
    Ok(out)
}

// Depth-first, 0 before 1, so the output is lexicographic.
fn extend_from(prefix: u64, depth: usize, n: usize, out: &mut Vec<SiteConfig>) {
    if depth == n {
        out.push(SiteConfig::from_raw(prefix, n));
        return;
    }
    extend_from(prefix << 1, depth + 1, n, out);
    if prefix & 1 == 0 {
        extend_from((prefix << 1) | 1, depth + 1, n, out);
    }
}

/// Split into the first `n_a` sites and the rest.
pub fn split_config(c: &SiteConfig, n_a: usize) -> Result<(SiteConfig, SiteConfig)> {
    if n_a >= c.len() {
        return invalid(format!("cannot split {} sites at n_a = {n_a}", c.len()));
    }
    let n_b = c.len() - n_a;
    let a = c.bits() >> n_b;
    let b = c.bits() & ((1u64 << n_b) - 1);
    Ok((SiteConfig::from_raw(a, n_a), SiteConfig::from_raw(b, n_b)))
}

/// False iff the last site of `a` and the first site of `b` are both excited.
pub fn boundary_compatible(a: &SiteConfig, b: &SiteConfig) -> bool {
    if a.is_empty() || b.is_empty() {
        return true;
    }
    !(a.site(a.len() - 1) == 1 && b.site(0) == 1)
}

/// Constrained configurations of the subsystem `A` and their embedding in the
/// unconstrained `2^n_a` product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemSpace {
    n_a: usize,
    basis: Vec<SiteConfig>,
}

impl SubsystemSpace {
    pub fn new(n_a: usize) -> Result<Self> {
        if n_a > 16 {
            return Err(Error::Unsupported(format!("subsystem of {n_a} sites")));
        }
        Ok(Self { n_a, basis: enumerate_constrained_basis(n_a)? })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    /// `D_A`, the number of blockade-respecting configurations.
    pub fn dim_constrained(&self) -> usize {
        self.basis.len()
    }

    /// `2^n_a`.
    pub fn dim_full(&self) -> usize {
        1 << self.n_a
    }

    pub fn basis(&self) -> &[SiteConfig] {
        &self.basis
    }

    /// Index in the full product basis of the `i`-th constrained configuration.
    pub fn full_index(&self, i: usize) -> usize {
        self.basis[i].bits() as usize
    }

    pub fn constrained_index(&self, full: usize) -> Option<usize> {
        self.basis.binary_search_by_key(&(full as u64), |c| c.bits()).ok()
    }

    /// Embed a constrained-space vector into the full product basis.
    pub fn embed<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dim_constrained());
        let mut out = vec![T::default(); self.dim_full()];
        for (i, &x) in v.iter().enumerate() {
            out[self.full_index(i)] = x;
        }
        out
    }

    /// Restrict a full product-basis vector to the constrained configurations.
    pub fn restrict<T: Copy>(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dim_full());
        (0..self.dim_constrained()).map(|i| v[self.full_index(i)]).collect()
    }
}

/// The blockade-constrained basis of an `n_sites` chain with an `A|B` cut
/// after the first `n_a` sites. Immutable once built.
#[derive(Clone, Debug)]
pub struct ConstrainedSpace {
    n_sites: usize,
    n_a: usize,
    basis: Vec<SiteConfig>,
    subsystem: SubsystemSpace,
}

impl ConstrainedSpace {
    pub fn new(n_sites: usize, n_a: usize) -> Result<Self> {
        if n_a == 0 || n_a >= n_sites {
            return invalid(format!("need 0 < n_a < n_sites, got n_a = {n_a}, n_sites = {n_sites}"));
        }
        if n_a >= n_sites - n_a {
            log::warn!("subsystem of {n_a} sites is not smaller than its bath of {} sites", n_sites - n_a);
        }
        Ok(Self {
            n_sites,
            n_a,
            basis: enumerate_constrained_basis(n_sites)?,
            subsystem: SubsystemSpace::new(n_a)?,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_sites - self.n_a
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[SiteConfig] {
        &self.basis
    }

    pub fn subsystem(&self) -> &SubsystemSpace {
        &self.subsystem
    }

    pub fn index_of(&self, c: &SiteConfig) -> Option<usize> {
        if c.len() != self.n_sites {
            return None;
        }
        self.basis.binary_search(c).ok()
    }

    /// Split a global basis configuration at the `A|B` cut.
    pub fn split(&self, c: &SiteConfig) -> (SiteConfig, SiteConfig) {
        split_config(c, self.n_a).expect("n_a < n_sites by construction")
    }
}
