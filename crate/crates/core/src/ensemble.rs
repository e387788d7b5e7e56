//! Projected ensembles: the subsystem states left behind after measuring the
//! bath in the computational basis, weighted by the outcome probabilities,
//! and their `k`-th moments.
//!
//! For a global state `|Ψ⟩` and bath outcome `z_B`:
//!
//! ```text
//! p(z_B)       = Σ_{z_A} |Ψ(z_A, z_B)|²
//! |Ψ_A(z_B)⟩   = Σ_{z_A} Ψ(z_A, z_B) / √p(z_B) |z_A⟩
//! ρ^(k)        = Σ_{z_B} p(z_B) (|Ψ_A(z_B)⟩⟨Ψ_A(z_B)|)^{⊗k}
//! ```
//!
//! Subsystem states live on the `D_A` blockade-respecting configurations of
//! `A`, not on the full `2^n_a` product space. Tensor powers put the leftmost
//! factor in the most significant position of the composite index.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dynamics::{ChainEvolution, StateVector};
use crate::error::{invalid, Error, Result};
use crate::lattice::{ConstrainedSpace, SiteConfig, SubsystemSpace};
use crate::sampler::{product_state, Basis};
use crate::C64;

/// Outcomes with a smaller probability are dropped from the ensemble.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Memory for `k` above this grows as `D_A^{2k}`; allowed but logged.
pub const MAX_QUIET_MOMENT: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEntry {
    /// Bath outcome `z_B`.
    pub label: SiteConfig,
    pub prob: f64,
    /// Normalized amplitudes over the constrained `A` basis.
    pub state: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct Ensemble {
    pub subsystem: SubsystemSpace,
    pub entries: Vec<EnsembleEntry>,
}

impl Ensemble {
    pub fn new(subsystem: SubsystemSpace, entries: Vec<EnsembleEntry>) -> Self {
        Self { subsystem, entries }
    }

    /// `D_A`.
    pub fn local_dim(&self) -> usize {
        self.subsystem.dim_constrained()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.prob).sum()
    }

    /// Check normalization of the weights and of every state.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let total = self.total_probability();
        if (total - 1.0).abs() > tol {
            return invalid(format!("ensemble probabilities sum to {total}"));
        }
        for e in &self.entries {
            if e.state.len() != self.local_dim() {
                return Err(Error::DimensionMismatch(e.state.len(), self.local_dim()));
            }
            let n: f64 = e.state.iter().map(|a| a.norm_sqr()).sum();
            if (n - 1.0).abs() > tol {
                return invalid(format!("state for z_B = {} has norm² {n}", e.label));
            }
            if !(e.prob > 0.0) {
                return invalid(format!("entry {} has non-positive probability", e.label));
            }
        }
        Ok(())
    }
}

/// Hermitian, unit-trace operator on the `k`-fold tensor power of a
/// `local_dim`-dimensional space.
#[derive(Clone, Debug)]
pub struct MomentOperator {
    pub k: usize,
    pub local_dim: usize,
    pub matrix: DMatrix<C64>,
}

impl MomentOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// `v^{⊗k}` with the leftmost factor most significant.
pub fn tensor_power(v: &[C64], k: usize) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for _ in 0..k {
        out = out.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
    }
    out
}

/// Conditional state of `A` and the probability of bath outcome `z_b`.
pub fn conditional_state(
    space: &ConstrainedSpace,
    psi: &StateVector,
    z_b: &SiteConfig,
) -> Result<(StateVector, f64)> {
    if psi.dim() != space.dim() {
        return Err(Error::DimensionMismatch(psi.dim(), space.dim()));
    }
    if z_b.len() != space.n_b() || !z_b.is_blockade_free() {
        return invalid(format!("{z_b} is not a blockade-respecting bath configuration of {} sites", space.n_b()));
    }
    let amps: Vec<C64> = space
        .subsystem()
        .basis()
        .iter()
        .map(|a| match space.index_of(&a.join(z_b)) {
            Some(i) => psi.amplitudes[i],
            None => C64::new(0.0, 0.0),
        })
        .collect();
    let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if prob < ZERO_PROBABILITY {
        return Err(Error::ZeroProbability { label: z_b.to_string(), prob });
    }
    let scale = prob.sqrt().recip();
    Ok((StateVector::new(amps.into_iter().map(|a| a * scale).collect()), prob))
}

/// The full projected ensemble of `psi`, one entry per bath outcome with
/// non-negligible probability, ordered lexicographically by `z_B`.
pub fn exact_ensemble(space: &ConstrainedSpace, psi: &StateVector) -> Result<Ensemble> {
    if psi.dim() != space.dim() {
        return Err(Error::DimensionMismatch(psi.dim(), space.dim()));
    }
    let sub = space.subsystem();
    let mut groups: BTreeMap<SiteConfig, Vec<C64>> = BTreeMap::new();
    for (config, amp) in space.basis().iter().zip(&psi.amplitudes) {
        let (a, b) = space.split(config);
        let ia = sub.constrained_index(a.bits() as usize).expect("A-part of a constrained config is constrained");
        groups.entry(b).or_insert_with(|| vec![C64::new(0.0, 0.0); sub.dim_constrained()])[ia] = *amp;
    }
    let entries = groups
        .into_iter()
        .filter_map(|(label, amps)| {
            let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            (prob > ZERO_PROBABILITY).then(|| {
                let scale = prob.sqrt().recip();
                EnsembleEntry { label, prob, state: amps.into_iter().map(|a| a * scale).collect() }
            })
        })
        .collect();
    Ok(Ensemble::new(sub.clone(), entries))
}

/// `Σ_z p(z) (|ψ_z⟩⟨ψ_z|)^{⊗k}`.
pub fn ensemble_moment(e: &Ensemble, k: usize) -> Result<MomentOperator> {
    if k == 0 {
        return invalid("moment order must be at least 1");
    }
    if k > MAX_QUIET_MOMENT {
        log::warn!("moment order {k} needs a {0}x{0} matrix", e.local_dim().pow(k as u32));
    }
    let dim = e.local_dim().pow(k as u32);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for entry in &e.entries {
        let v = DVector::from_vec(tensor_power(&entry.state, k));
        m.gerc(C64::new(entry.prob, 0.0), &v, &v, C64::new(1.0, 0.0));
    }
    Ok(MomentOperator { k, local_dim: e.local_dim(), matrix: m })
}

/// `p(r_A) = Σ_z p(z) |⟨r_A|ψ_z⟩|²` for a product-basis outcome on `A`.
pub fn marginal_probability(e: &Ensemble, bases: &[Basis], bits: &SiteConfig) -> Result<f64> {
    let n_a = e.subsystem.n_a();
    if bases.len() != n_a || bits.len() != n_a {
        return invalid(format!("outcome must cover {n_a} qubits"));
    }
    let r = product_state(bases, bits);
    Ok(e.entries
        .iter()
        .map(|entry| {
            let full = e.subsystem.embed(&entry.state);
            let overlap: C64 = r.iter().zip(&full).map(|(a, b)| a.conj() * b).sum();
            entry.prob * overlap.norm_sqr()
        })
        .sum())
}

/// `Σ_z p(z) p(z_A | z)^k` for the constrained `A` configuration `za`.
pub fn conditional_moment(e: &Ensemble, za: usize, k: u32) -> f64 {
    e.entries.iter().map(|entry| entry.prob * entry.state[za].norm_sqr().powi(k as i32)).sum()
}

/// `D (D+1) ⋯ (D+k−1)`, the factor that rescales a Haar-random conditional
/// moment to `k!`.
pub fn rising_factorial(d: usize, k: usize) -> f64 {
    (0..k).map(|j| (d + j) as f64).product()
}

/// Haar value of the `k`-th conditional moment in dimension `d`.
pub fn haar_conditional_moment(d: usize, k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product::<f64>() / rising_factorial(d, k)
}

/// `Σ_{z_B} p(z_B) p(z_A = 0…0 | z_B)^k` along a time series.
pub fn conditional_moment_series(chain: &ChainEvolution, times: &[f64], k: u32) -> Result<Vec<f64>> {
    if k == 0 {
        return invalid("moment order must be at least 1");
    }
    times
        .iter()
        .map(|&t| Ok(conditional_moment(&exact_ensemble(&chain.space, &chain.state_at(t))?, 0, k)))
        .collect()
}
