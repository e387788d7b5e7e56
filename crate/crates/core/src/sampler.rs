//! Random-basis projective measurements of an evolved chain.
//!
//! Each shot picks an independent, uniformly random Pauli basis for every
//! subsystem qubit, measures the bath in `Z`, and samples the joint outcome
//! `(r_A, z_B)` from the Born rule. Outcome bit 0 is the +1 eigenstate of
//! the chosen Pauli.
//!
//! Datasets serialize to a line-oriented text format:
//!
//! ```text
//! # N=10 N_A=2 seed=42
//! 1 0 ZX 01 00100100
//! 1 1 YY 10 10000010
//! ```
//!
//! with fields `time_us shot_id a_bases a_bits b_bits`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::dynamics::StateVector;
use crate::error::{invalid, Error, Result};
use crate::lattice::{ConstrainedSpace, SiteConfig};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn as_char(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'X' => Ok(Basis::X),
            'Y' => Ok(Basis::Y),
            'Z' => Ok(Basis::Z),
            other => invalid(format!("unknown basis {other:?}")),
        }
    }
}

pub fn bases_to_string(bases: &[Basis]) -> String {
    bases.iter().map(|b| b.as_char()).collect()
}

pub fn parse_bases(s: &str) -> Result<Vec<Basis>> {
    s.chars().map(Basis::from_char).collect()
}

/// Eigenstates of the Pauli operator for `b`, indexed by outcome bit
/// (bit 0 ↔ eigenvalue +1). `|0⟩_Y = (|0⟩ + i|1⟩)/√2`.
pub fn single_qubit_basis_states(b: Basis) -> [[C64; 2]; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = |x: f64| C64::new(x, 0.0);
    match b {
        Basis::Z => [[re(1.0), re(0.0)], [re(0.0), re(1.0)]],
        Basis::X => [[re(s), re(s)], [re(s), re(-s)]],
        Basis::Y => [[re(s), C64::new(0.0, s)], [re(s), C64::new(0.0, -s)]],
    }
}

/// `|b_1, bit_1⟩ ⊗ … ⊗ |b_n, bit_n⟩` in the `2^n` product basis.
pub fn product_state(bases: &[Basis], bits: &SiteConfig) -> Vec<C64> {
    assert_eq!(bases.len(), bits.len());
    bases.iter().enumerate().fold(vec![C64::new(1.0, 0.0)], |acc, (q, &b)| {
        let v = single_qubit_basis_states(b)[bits.site(q) as usize];
        acc.iter().flat_map(|a| v.iter().map(move |x| a * x)).collect()
    })
}

/// What a shot reveals about the subsystem: per-qubit bases and outcome bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalOutcome {
    pub bases: Vec<Basis>,
    pub bits: SiteConfig,
}

impl LocalOutcome {
    pub fn is_all_z(&self) -> bool {
        self.bases.iter().all(|&b| b == Basis::Z)
    }

    /// `|r_A⟩` in the full `2^n_a` product basis.
    pub fn state(&self) -> Vec<C64> {
        product_state(&self.bases, &self.bits)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub time_us: f64,
    pub shot_id: u64,
    pub a_bases: Vec<Basis>,
    pub a_bits: SiteConfig,
    pub b_bits: SiteConfig,
}

impl MeasurementRecord {
    pub fn local(&self) -> LocalOutcome {
        LocalOutcome { bases: self.a_bases.clone(), bits: self.a_bits }
    }
}

impl fmt::Display for MeasurementRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {} {}", self.time_us, self.shot_id, bases_to_string(&self.a_bases), self.a_bits, self.b_bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    RandomBasis,
    /// Every subsystem qubit measured in `Z`.
    ZOnly,
}

/// Born-rule sampler for one global state. Outcome tables are built lazily
/// per basis string and shared across threads.
pub struct ShotSampler {
    n_a: usize,
    n_b: usize,
    /// Bath outcomes with their (unnormalized) `A` amplitudes in the full
    /// product basis.
    slices: Vec<(SiteConfig, Vec<C64>)>,
    tables: Vec<OnceLock<WeightedIndex<f64>>>,
}

impl ShotSampler {
    pub fn new(space: &ConstrainedSpace, psi: &StateVector) -> Result<Self> {
        if psi.dim() != space.dim() {
            return Err(Error::DimensionMismatch(psi.dim(), space.dim()));
        }
        let full = space.subsystem().dim_full();
        let mut groups: BTreeMap<SiteConfig, Vec<C64>> = BTreeMap::new();
        for (config, amp) in space.basis().iter().zip(&psi.amplitudes) {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let (a, b) = space.split(config);
            groups.entry(b).or_insert_with(|| vec![C64::new(0.0, 0.0); full])[a.bits() as usize] = *amp;
        }
        let n_a = space.n_a();
        Ok(Self {
            n_a,
            n_b: space.n_b(),
            slices: groups.into_iter().collect(),
            tables: (0..3usize.pow(n_a as u32)).map(|_| OnceLock::new()).collect(),
        })
    }

    fn basis_key(bases: &[Basis]) -> usize {
        bases.iter().fold(0, |acc, &b| acc * 3 + b as usize)
    }

    /// Joint probabilities of `(z_B index, r_A)` for a basis string, flattened
    /// as `z_index * 2^n_a + r_A`.
    pub fn joint_probabilities(&self, bases: &[Basis]) -> Vec<f64> {
        let full = 1usize << self.n_a;
        let rotated: Vec<Vec<C64>> =
            (0..full as u64).map(|r| product_state(bases, &SiteConfig::new(r, self.n_a).unwrap())).collect();
        self.slices
            .iter()
            .flat_map(|(_, amps)| {
                rotated.iter().map(move |r| r.iter().zip(amps).map(|(x, a)| x.conj() * a).sum::<C64>().norm_sqr())
            })
            .collect()
    }

    pub fn bath_outcomes(&self) -> impl Iterator<Item = &SiteConfig> {
        self.slices.iter().map(|(z, _)| z)
    }

    fn table(&self, bases: &[Basis]) -> &WeightedIndex<f64> {
        self.tables[Self::basis_key(bases)].get_or_init(|| {
            WeightedIndex::new(self.joint_probabilities(bases)).expect("a normalized state has positive total weight")
        })
    }

    pub fn draw_shot<R: Rng + ?Sized>(&self, mode: SamplingMode, rng: &mut R, time_us: f64, shot_id: u64) -> MeasurementRecord {
        let a_bases: Vec<Basis> = match mode {
            SamplingMode::ZOnly => vec![Basis::Z; self.n_a],
            SamplingMode::RandomBasis => (0..self.n_a).map(|_| Basis::ALL[rng.random_range(0..3)]).collect(),
        };
        let flat = self.table(&a_bases).sample(rng);
        let full = 1usize << self.n_a;
        let (z_index, r) = (flat / full, flat % full);
        MeasurementRecord {
            time_us,
            shot_id,
            a_bases,
            a_bits: SiteConfig::new(r as u64, self.n_a).unwrap(),
            b_bits: self.slices[z_index].0,
        }
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }
}

/// One random-basis shot of `psi`.
pub fn draw_shot<R: Rng + ?Sized>(space: &ConstrainedSpace, psi: &StateVector, rng: &mut R) -> Result<MeasurementRecord> {
    Ok(ShotSampler::new(space, psi)?.draw_shot(SamplingMode::RandomBasis, rng, 0.0, 0))
}

/// Measurement records taken at a single time point.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_sites: usize,
    pub n_a: usize,
    pub seed: u64,
    pub records: Vec<MeasurementRecord>,
}

pub fn draw_dataset<R: Rng + ?Sized>(
    space: &ConstrainedSpace,
    psi: &StateVector,
    size: usize,
    rng: &mut R,
    mode: SamplingMode,
    time_us: f64,
    seed: u64,
) -> Result<Dataset> {
    if size == 0 {
        return invalid("dataset size must be at least 1");
    }
    let sampler = ShotSampler::new(space, psi)?;
    let records = (0..size as u64).map(|id| sampler.draw_shot(mode, rng, time_us, id)).collect();
    Ok(Dataset { n_sites: space.n_sites(), n_a: space.n_a(), seed, records })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# N={} N_A={} seed={}", self.n_sites, self.n_a, self.seed)?;
        for r in &self.records {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dataset text is ASCII")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty dataset".into() })?;
        let header = header?;
        let mut fields: BTreeMap<&str, u64> = BTreeMap::new();
        let body = header.strip_prefix('#').ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        for kv in body.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or(Error::Parse { line: 1, msg: format!("bad header field {kv:?}") })?;
            let v = v.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad value in {kv:?}") })?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or(Error::Parse { line: 1, msg: format!("header lacks {k}") });
        let (n_sites, n_a, seed) = (get("N")? as usize, get("N_A")? as usize, get("seed")?);
        if n_a == 0 || n_a >= n_sites {
            return Err(Error::Parse { line: 1, msg: format!("need 0 < N_A < N, got N_A={n_a} N={n_sites}") });
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(perr(format!("expected 5 fields, found {}", parts.len())));
            }
            let time_us: f64 = parts[0].parse().map_err(|_| perr(format!("bad time {:?}", parts[0])))?;
            let shot_id: u64 = parts[1].parse().map_err(|_| perr(format!("bad shot id {:?}", parts[1])))?;
            let a_bases = parse_bases(parts[2]).map_err(|e| perr(e.to_string()))?;
            let a_bits: SiteConfig = parts[3].parse().map_err(|e: Error| perr(e.to_string()))?;
            let b_bits: SiteConfig = parts[4].parse().map_err(|e: Error| perr(e.to_string()))?;
            if a_bases.len() != n_a || a_bits.len() != n_a || b_bits.len() != n_sites - n_a {
                return Err(perr("record widths disagree with header".into()));
            }
            if !b_bits.is_blockade_free() {
                return Err(perr(format!("bath outcome {b_bits} violates the blockade")));
            }
            records.push(MeasurementRecord { time_us, shot_id, a_bases, a_bits, b_bits });
        }
        Ok(Self { n_sites, n_a, seed, records })
    }

    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }
}

/// Records partitioned by bath outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedDataset {
    pub n_a: usize,
    pub total: usize,
    pub groups: BTreeMap<SiteConfig, Vec<LocalOutcome>>,
}

impl GroupedDataset {
    /// Occurrence count of `z_b` divided by the dataset size.
    pub fn empirical_p(&self, z_b: &SiteConfig) -> f64 {
        self.groups.get(z_b).map_or(0.0, |g| g.len() as f64 / self.total as f64)
    }
}

pub fn group_by_outcome(d: &Dataset) -> GroupedDataset {
    let mut groups: BTreeMap<SiteConfig, Vec<LocalOutcome>> = BTreeMap::new();
    for r in &d.records {
        groups.entry(r.b_bits).or_default().push(r.local());
    }
    GroupedDataset { n_a: d.n_a, total: d.len(), groups }
}
