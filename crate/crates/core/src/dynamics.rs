//! Rydberg-chain Hamiltonian on the constrained space and exact unitary
//! evolution through its spectral decomposition.
//!
//! Units: ħ = 1, time in μs, frequencies in rad/μs, lengths in μm.
//!
//! ```text
//! H = (Ω/2) Σ_i σx_i − Δ Σ_i n_i + Σ_{j>i} (C6/a⁶) n_i n_j / |i−j|⁶
//! ```
//!
//! Nearest-neighbour double excitations are removed from the basis, so a
//! `σx_i` flip that would create one is simply dropped. The longer-range
//! tail `|i−j| ≥ 2` is kept exactly.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::lattice::ConstrainedSpace;
use crate::C64;

/// How a C6 coefficient quoted in GHz·μm⁶ converts to rad/μs·μm⁶.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C6Convention {
    /// `C6 = h · (value) GHz μm⁶`; the interaction carries a factor 2π.
    PlanckH,
    /// `C6 = ħ · (value)·10⁹ rad/s μm⁶`; no 2π.
    ReducedHbar,
}

impl std::str::FromStr for C6Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" | "planck" => Ok(Self::PlanckH),
            "hbar" | "reduced" => Ok(Self::ReducedHbar),
            other => invalid(format!("unknown C6 convention {other:?} (expected h or hbar)")),
        }
    }
}

/// Physical parameters in angular units (rad/μs) and μm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RydbergParams {
    pub omega: f64,
    pub delta: f64,
    /// van der Waals coefficient in rad/μs · μm⁶.
    pub c6: f64,
    /// Lattice spacing `a` in μm.
    pub spacing: f64,
}

impl RydbergParams {
    /// From laboratory quantities: Ω/2π and Δ/2π in MHz, C6 in GHz·μm⁶.
    pub fn from_lab(
        omega_over_2pi_mhz: f64,
        delta_over_2pi_mhz: f64,
        c6_ghz_um6: f64,
        spacing_um: f64,
        convention: C6Convention,
    ) -> Result<Self> {
        let c6_mhz = c6_ghz_um6 * 1e3;
        let c6 = match convention {
            C6Convention::PlanckH => TAU * c6_mhz,
            C6Convention::ReducedHbar => c6_mhz,
        };
        let params = Self {
            omega: TAU * omega_over_2pi_mhz,
            delta: TAU * delta_over_2pi_mhz,
            c6,
            spacing: spacing_um,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) {
            return invalid(format!("lattice spacing must be positive, got {}", self.spacing));
        }
        if !(self.omega > 0.0) {
            return invalid(format!("Rabi frequency must be positive, got {}", self.omega));
        }
        if !self.delta.is_finite() || !self.c6.is_finite() {
            return invalid("detuning and C6 must be finite");
        }
        Ok(())
    }

    /// Interaction energy of two excitations `distance` sites apart.
    pub fn interaction(&self, distance: usize) -> f64 {
        self.c6 / self.spacing.powi(6) / (distance as f64).powi(6)
    }
}

impl Default for RydbergParams {
    /// a = 3.3 μm, C6 = 126 GHz μm⁶ (h convention), Δ/2π = 0.9 MHz,
    /// Ω/2π = 4.7 MHz.
    fn default() -> Self {
        Self::from_lab(4.7, 0.9, 126.0, 3.3, C6Convention::PlanckH).expect("defaults are valid")
    }
}

/// Normalized amplitude vector over some declared basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }
}

/// Real symmetric Hamiltonian matrix in the constrained basis.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub matrix: DMatrix<f64>,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(psi.len(), n);
        (0..n)
            .map(|i| (0..n).map(|j| psi[j] * self.matrix[(i, j)]).sum())
            .collect()
    }

    /// `⟨ψ|H|ψ⟩`, real for a Hermitian `H`.
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        let h_psi = self.apply(&psi.amplitudes);
        psi.amplitudes.iter().zip(&h_psi).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

pub fn build_hamiltonian(params: &RydbergParams, space: &ConstrainedSpace) -> Hamiltonian {
    let n = space.n_sites();
    let dim = space.dim();
    let couplings: Vec<f64> = (0..n).map(|d| if d == 0 { 0.0 } else { params.interaction(d) }).collect();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (col, config) in space.basis().iter().enumerate() {
        let occupied: Vec<usize> = (0..n).filter(|&i| config.site(i) == 1).collect();
        let mut diag = -params.delta * occupied.len() as f64;
        for (p, &i) in occupied.iter().enumerate() {
            for &j in &occupied[p + 1..] {
                diag += couplings[j - i];
            }
        }
        h[(col, col)] = diag;
        for site in 0..n {
            if let Some(row) = space.index_of(&config.flipped(site)) {
                h[(row, col)] += params.omega / 2.0;
            }
        }
    }
    Hamiltonian { matrix: h }
}

/// `H = V diag(E) Vᵀ` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

const HERMITIAN_TOL: f64 = 1e-12;

pub fn diagonalize(h: &Hamiltonian) -> Result<Propagator> {
    let asym = h.max_asymmetry();
    if asym > HERMITIAN_TOL {
        return invalid(format!("operator is not Hermitian (max asymmetry {asym:e})"));
    }
    let eig = SymmetricEigen::new(h.matrix.clone());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(h.dim(), h.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Propagator { eigenvalues, eigenvectors })
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(E) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let e = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        v * e * v.transpose()
    }

    /// Eigenbasis coefficients `Vᵀ ψ0`, reusable across time points.
    pub fn coefficients(&self, psi0: &StateVector) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(psi0.dim(), n);
        (0..n)
            .map(|k| (0..n).map(|i| psi0.amplitudes[i] * self.eigenvectors[(i, k)]).sum())
            .collect()
    }

    pub fn evolve_coefficients(&self, coeffs: &[C64], t: f64) -> StateVector {
        let n = self.dim();
        let phased: Vec<C64> = coeffs
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, &e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        let amplitudes = (0..n)
            .map(|i| {
                let row = self.eigenvectors.row(i);
                phased.iter().zip(row.iter()).map(|(c, &v)| c * v).sum()
            })
            .collect();
        StateVector { amplitudes }
    }

    /// `|Ψ(t)⟩ = V e^{−iEt} Vᵀ |ψ0⟩`.
    pub fn evolve(&self, psi0: &StateVector, t: f64) -> StateVector {
        self.evolve_coefficients(&self.coefficients(psi0), t)
    }
}

/// All sites in the ground state.
pub fn initial_ground_state(space: &ConstrainedSpace) -> StateVector {
    let mut amplitudes = vec![C64::new(0.0, 0.0); space.dim()];
    // Lexicographic order puts 0…0 first.
    amplitudes[0] = C64::new(1.0, 0.0);
    StateVector { amplitudes }
}

/// Hamiltonian, propagator and initial state for one chain, built together.
#[derive(Clone, Debug)]
pub struct ChainEvolution {
    pub space: ConstrainedSpace,
    pub hamiltonian: Hamiltonian,
    pub propagator: Propagator,
    coeffs: Vec<C64>,
}

impl ChainEvolution {
    pub fn new(params: &RydbergParams, n_sites: usize, n_a: usize) -> Result<Self> {
        params.validate()?;
        let space = ConstrainedSpace::new(n_sites, n_a)?;
        let hamiltonian = build_hamiltonian(params, &space);
        let propagator = diagonalize(&hamiltonian)?;
        let coeffs = propagator.coefficients(&initial_ground_state(&space));
        Ok(Self { space, hamiltonian, propagator, coeffs })
    }

    pub fn state_at(&self, t: f64) -> StateVector {
        self.propagator.evolve_coefficients(&self.coeffs, t)
    }
}

/// `n` uniformly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}
