//! Reconstructing the projected ensemble from measurement records.
//!
//! Records are grouped by bath outcome `z_B`. For each group a pure
//! subsystem state `|α⟩` is fitted, either by maximizing the likelihood of
//! the observed random-basis outcomes (`maxLK`) or, for `Z`-only data, by
//! taking square roots of the empirical frequencies. Group weights are the
//! empirical frequencies of `z_B`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{Ensemble, EnsembleEntry};
use crate::error::{invalid, Error, Result};
use crate::lattice::{SiteConfig, SubsystemSpace};
use crate::rng::stream;
use crate::sampler::{GroupedDataset, LocalOutcome};
use crate::C64;

/// Per-record probability floor inside the log-likelihood.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Amplitudes `α(z_A)` over the full `2^n_a` product basis of the subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientAnsatz {
    pub coeffs: Vec<C64>,
}

impl CoefficientAnsatz {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn uniform(n_a: usize) -> Self {
        let d = 1usize << n_a;
        Self { coeffs: vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d] }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.coeffs.iter_mut().for_each(|c| *c /= n);
        }
        self
    }

    /// Remove the global phase: the first coefficient with modulus above
    /// `1e-9` becomes real and non-negative.
    pub fn gauge_fixed(mut self) -> Self {
        if let Some(c) = self.coeffs.iter().find(|c| c.norm() > 1e-9) {
            let phase = c.conj() / c.norm();
            self.coeffs.iter_mut().for_each(|x| *x *= phase);
        }
        self
    }

    /// Normalized restriction to the blockade-allowed subsystem basis, or
    /// `None` if the state has no weight there.
    pub fn constrained(&self, sub: &SubsystemSpace) -> Option<Vec<C64>> {
        let v = sub.restrict(&self.coeffs);
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        (n > 1e-12).then(|| v.into_iter().map(|c| c / n).collect())
    }
}

fn overlap(r: &[C64], alpha: &[C64]) -> C64 {
    r.iter().zip(alpha).map(|(a, b)| a.conj() * b).sum()
}

fn check_records(alpha: &[C64], records: &[LocalOutcome]) -> Result<()> {
    if records.is_empty() {
        return invalid("no records to fit");
    }
    for r in records {
        if 1usize << r.bases.len() != alpha.len() {
            return Err(Error::DimensionMismatch(1 << r.bases.len(), alpha.len()));
        }
    }
    Ok(())
}

/// `−(1/N) Σ_i ln max(|⟨r_i|α⟩|² / ‖α‖², 1e-12)`. Invariant under rescaling
/// and rephasing of `α`.
pub fn likelihood_cost(alpha: &[C64], records: &[LocalOutcome]) -> Result<f64> {
    check_records(alpha, records)?;
    let states: Vec<Vec<C64>> = records.iter().map(LocalOutcome::state).collect();
    Ok(cost_with_states(alpha, &states))
}

fn cost_with_states(alpha: &[C64], states: &[Vec<C64>]) -> f64 {
    let norm: f64 = alpha.iter().map(|c| c.norm_sqr()).sum();
    -states
        .iter()
        .map(|r| (overlap(r, alpha).norm_sqr() / norm).max(PROBABILITY_FLOOR).ln())
        .sum::<f64>()
        / states.len() as f64
}

/// Gradient of [`likelihood_cost`] with respect to the real parameters,
/// packed as `∂C/∂Re α_j + i ∂C/∂Im α_j`.
pub fn likelihood_gradient(alpha: &[C64], records: &[LocalOutcome]) -> Result<Vec<C64>> {
    check_records(alpha, records)?;
    let states: Vec<Vec<C64>> = records.iter().map(LocalOutcome::state).collect();
    Ok(gradient_with_states(alpha, &states))
}

fn gradient_with_states(alpha: &[C64], states: &[Vec<C64>]) -> Vec<C64> {
    let norm: f64 = alpha.iter().map(|c| c.norm_sqr()).sum();
    let n = states.len() as f64;
    // 2 (α/‖α‖² − (1/N) Σ r s / |s|²), records below the floor contribute only
    // through the normalization term
    let mut g: Vec<C64> = alpha.iter().map(|a| a * (2.0 / norm)).collect();
    for r in states {
        let s = overlap(r, alpha);
        let p = s.norm_sqr();
        if p / norm <= PROBABILITY_FLOOR {
            continue;
        }
        let w = s * (2.0 / (n * p));
        g.iter_mut().zip(r).for_each(|(gj, rj)| *gj -= rj * w);
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxLkOptions {
    /// Initial step on the real parameters; halved after a rejected step.
    pub learning_rate: f64,
    pub max_iter: usize,
    /// Stop once an accepted step lowers the cost by less than this.
    pub tol: f64,
    /// Scale of the random perturbation added to the uniform start.
    pub init_noise: f64,
}

impl Default for MaxLkOptions {
    fn default() -> Self {
        Self { learning_rate: 0.25, max_iter: 2000, tol: 1e-9, init_noise: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub ansatz: CoefficientAnsatz,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximum-likelihood pure state for one group of records, started from
/// `start` (normalized internally).
pub fn maxlk_from(start: CoefficientAnsatz, records: &[LocalOutcome], opts: &MaxLkOptions) -> Result<FitReport> {
    check_records(&start.coeffs, records)?;
    if !(opts.learning_rate > 0.0) || !(opts.tol >= 0.0) {
        return invalid("learning rate must be positive and tolerance non-negative");
    }
    let states: Vec<Vec<C64>> = records.iter().map(LocalOutcome::state).collect();
    let mut alpha = start.normalized().coeffs;
    if alpha.iter().all(|c| c.norm_sqr() == 0.0) {
        return invalid("starting state is zero");
    }
    let mut cost = cost_with_states(&alpha, &states);
    let mut eta = opts.learning_rate;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let g = gradient_with_states(&alpha, &states);
        let trial =
            CoefficientAnsatz::new(alpha.iter().zip(&g).map(|(a, gj)| a - gj * eta).collect()).normalized().coeffs;
        let trial_cost = cost_with_states(&trial, &states);
        if trial_cost <= cost {
            let gain = cost - trial_cost;
            alpha = trial;
            cost = trial_cost;
            if gain < opts.tol {
                converged = true;
                break;
            }
        } else {
            eta *= 0.5;
            if eta < 1e-14 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::debug!("maxLK stopped after {iterations} iterations at cost {cost}");
    }
    Ok(FitReport { ansatz: CoefficientAnsatz::new(alpha).gauge_fixed(), cost, iterations, converged })
}

/// [`maxlk_from`] starting at uniform amplitudes plus a small random
/// complex perturbation.
pub fn maxlk_estimate<R: Rng + ?Sized>(
    records: &[LocalOutcome],
    n_a: usize,
    opts: &MaxLkOptions,
    rng: &mut R,
) -> Result<FitReport> {
    let mut start = CoefficientAnsatz::uniform(n_a);
    for c in &mut start.coeffs {
        let (re, im): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        *c += C64::new(re, im) * opts.init_noise;
    }
    maxlk_from(start, records, opts)
}

/// `α(z_A) = √(n(z_A)/N)` from all-`Z` records.
pub fn frequentist_estimate(records: &[LocalOutcome], n_a: usize) -> Result<CoefficientAnsatz> {
    if records.is_empty() {
        return invalid("no records to fit");
    }
    let mut counts = vec![0usize; 1 << n_a];
    for r in records {
        if !r.is_all_z() {
            return invalid("frequentist estimate needs Z-basis records only");
        }
        if r.bits.len() != n_a {
            return Err(Error::DimensionMismatch(r.bits.len(), n_a));
        }
        counts[r.bits.bits() as usize] += 1;
    }
    let n = records.len() as f64;
    Ok(CoefficientAnsatz::new(counts.iter().map(|&c| C64::new((c as f64 / n).sqrt(), 0.0)).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimatorKind {
    Frequentist,
    MaxLk(MaxLkOptions),
}

/// Estimated ensemble from grouped records. Groups whose fitted state has
/// no weight on the allowed subsystem basis are dropped and the remaining
/// weights renormalized.
pub fn estimate_ensemble(grouped: &GroupedDataset, kind: EstimatorKind, seed: u64) -> Result<Ensemble> {
    let sub = SubsystemSpace::new(grouped.n_a)?;
    let fitted: Vec<Option<EnsembleEntry>> = grouped
        .groups
        .par_iter()
        .map(|(z_b, records)| {
            let ansatz = match kind {
                EstimatorKind::Frequentist => frequentist_estimate(records, grouped.n_a)?,
                EstimatorKind::MaxLk(opts) => {
                    let mut rng = stream(seed, &[z_b.bits(), z_b.len() as u64]);
                    maxlk_estimate(records, grouped.n_a, &opts, &mut rng)?.ansatz
                }
            };
            Ok(ansatz.constrained(&sub).map(|state| EnsembleEntry {
                label: *z_b,
                prob: grouped.empirical_p(z_b),
                state,
            }))
        })
        .collect::<Result<_>>()?;
    let dropped = fitted.iter().filter(|e| e.is_none()).count();
    if dropped > 0 {
        log::warn!("{dropped} groups fitted to blockaded subsystem states were dropped");
    }
    let mut entries: Vec<EnsembleEntry> = fitted.into_iter().flatten().collect();
    let total: f64 = entries.iter().map(|e| e.prob).sum();
    if entries.is_empty() || total <= 0.0 {
        return invalid("no group produced a usable state");
    }
    entries.iter_mut().for_each(|e| e.prob /= total);
    Ok(Ensemble::new(sub, entries))
}

/// Write an ensemble as text: a `# N_A=.. D_A=..` header, then one line per
/// entry with `z_B`, the probability and the real/imaginary parts of each
/// amplitude.
pub fn write_ensemble<W: Write>(e: &Ensemble, mut w: W) -> Result<()> {
    writeln!(w, "# N_A={} D_A={}", e.subsystem.n_a(), e.local_dim())?;
    for entry in &e.entries {
        write!(w, "{} {}", entry.label, entry.prob)?;
        for a in &entry.state {
            write!(w, " {} {}", a.re, a.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_ensemble<R: BufRead>(r: R) -> Result<Ensemble> {
    let mut lines = r.lines().enumerate();
    let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty ensemble".into() })?.1?;
    let mut fields = BTreeMap::new();
    for kv in header.strip_prefix('#').ok_or(Error::Parse { line: 1, msg: "missing header".into() })?.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or(Error::Parse { line: 1, msg: format!("bad header field {kv:?}") })?;
        let v: usize = v.parse().map_err(|_| Error::Parse { line: 1, msg: format!("bad value in {kv:?}") })?;
        fields.insert(k.to_string(), v);
    }
    let n_a = *fields.get("N_A").ok_or(Error::Parse { line: 1, msg: "header lacks N_A".into() })?;
    let sub = SubsystemSpace::new(n_a).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    let d = sub.dim_constrained();
    if fields.get("D_A").is_some_and(|&x| x != d) {
        return Err(Error::Parse { line: 1, msg: format!("D_A disagrees with N_A={n_a}") });
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: i + 1, msg };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 + 2 * d {
            return Err(perr(format!("expected {} fields, found {}", 2 + 2 * d, parts.len())));
        }
        let label: SiteConfig = parts[0].parse().map_err(|e: Error| perr(e.to_string()))?;
        let nums: Vec<f64> = parts[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| perr(format!("bad number {s:?}"))))
            .collect::<Result<_>>()?;
        let state = nums[1..].chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        entries.push(EnsembleEntry { label, prob: nums[0], state });
    }
    Ok(Ensemble::new(sub, entries))
}
