//! Complex restricted Boltzmann machine wavefunctions.
//!
//! Two real RBMs over the same visible units share the work: the amplitude
//! network `θ` sets `|ψ(z)|² ∝ e^{−E_θ(z)}`, the phase network `μ` sets the
//! phase `−E_μ(z)/2`:
//!
//! ```text
//! ψ(z) = Z_θ^{−1/2} exp(−(E_θ(z) + i E_μ(z))/2)
//! E(z) = −b·z − Σ_j softplus(c_j + Σ_i W_ij z_i)
//! ```
//!
//! Training minimizes the negative log-likelihood of random-basis records.
//! The model normalization enters only through `θ`; its gradient is either
//! computed exactly or estimated with contrastive divergence.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::ensemble::{Ensemble, EnsembleEntry};
use crate::error::{invalid, Error, Result};
use crate::estimator::CoefficientAnsatz;
use crate::lattice::SubsystemSpace;
use crate::rng::stream;
use crate::sampler::{GroupedDataset, LocalOutcome};
use crate::C64;

/// Largest `visible + hidden` for which the partition function is summed.
pub const MAX_EXACT_UNITS: usize = 20;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Visible bits of basis index `z`; site 0 is the most significant bit.
fn visible(z: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((z >> (n - 1 - i)) & 1) as f64).collect()
}

/// Biases and couplings of one real RBM. `weights` is row-major
/// `visible × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams {
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self { visible_bias: vec![0.0; n_visible], hidden_bias: vec![0.0; n_hidden], weights: vec![0.0; n_visible * n_hidden] }
    }

    /// Zero biases and weights drawn from `N(0, std²)`.
    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, std: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut p = Self::zeros(n_visible, n_hidden);
        p.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        Ok(p)
    }

    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_hidden() + j]
    }

    /// `c_j + Σ_i W_ij z_i`.
    pub fn hidden_fields(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n_hidden())
            .map(|j| self.hidden_bias[j] + z.iter().enumerate().map(|(i, zi)| zi * self.w(i, j)).sum::<f64>())
            .collect()
    }

    fn visible_fields(&self, h: &[f64]) -> Vec<f64> {
        (0..self.n_visible())
            .map(|i| self.visible_bias[i] + h.iter().enumerate().map(|(j, hj)| hj * self.w(i, j)).sum::<f64>())
            .collect()
    }

    /// Joint energy `−b·z − c·h − zᵀ W h`.
    pub fn energy(&self, z: &[f64], h: &[f64]) -> f64 {
        let mut e = -z.iter().zip(&self.visible_bias).map(|(a, b)| a * b).sum::<f64>();
        e -= h.iter().zip(&self.hidden_bias).map(|(a, b)| a * b).sum::<f64>();
        for (i, zi) in z.iter().enumerate() {
            for (j, hj) in h.iter().enumerate() {
                e -= zi * self.w(i, j) * hj;
            }
        }
        e
    }

    /// Energy with the hidden layer summed out.
    pub fn effective_energy(&self, z: &[f64]) -> f64 {
        -z.iter().zip(&self.visible_bias).map(|(a, b)| a * b).sum::<f64>()
            - self.hidden_fields(z).into_iter().map(softplus).sum::<f64>()
    }

    /// `∂E/∂params` at `z`.
    pub fn energy_gradient(&self, z: &[f64]) -> RbmParams {
        let act: Vec<f64> = self.hidden_fields(z).into_iter().map(sigmoid).collect();
        let h = self.n_hidden();
        let mut weights = vec![0.0; self.weights.len()];
        for (i, zi) in z.iter().enumerate() {
            for (j, aj) in act.iter().enumerate() {
                weights[i * h + j] = -zi * aj;
            }
        }
        RbmParams { visible_bias: z.iter().map(|x| -x).collect(), hidden_bias: act.iter().map(|a| -a).collect(), weights }
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.visible_bias.iter_mut().chain(self.hidden_bias.iter_mut()).chain(self.weights.iter_mut())
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.visible_bias.iter().chain(self.hidden_bias.iter()).chain(self.weights.iter())
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &RbmParams) {
        self.values_mut().zip(other.values()).for_each(|(x, y)| *x += a * y);
    }

    pub fn scale(&mut self, a: f64) {
        self.values_mut().for_each(|x| *x *= a);
    }

    pub fn dot(&self, other: &RbmParams) -> f64 {
        self.values().zip(other.values()).map(|(a, b)| a * b).sum()
    }

    fn gibbs_sweep<R: Rng + ?Sized>(&self, z: &mut [f64], rng: &mut R) {
        let h: Vec<f64> = self
            .hidden_fields(z)
            .into_iter()
            .map(|x| (rng.random::<f64>() < sigmoid(x)) as u8 as f64)
            .collect();
        for (zi, f) in z.iter_mut().zip(self.visible_fields(&h)) {
            *zi = (rng.random::<f64>() < sigmoid(f)) as u8 as f64;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexRbm {
    pub amplitude: RbmParams,
    pub phase: RbmParams,
}

impl ComplexRbm {
    pub fn new(amplitude: RbmParams, phase: RbmParams) -> Result<Self> {
        if amplitude.n_visible() != phase.n_visible() || amplitude.n_hidden() != phase.n_hidden() {
            return invalid("amplitude and phase networks differ in shape");
        }
        Ok(Self { amplitude, phase })
    }

    pub fn random<R: Rng + ?Sized>(n_visible: usize, n_hidden: usize, std: f64, rng: &mut R) -> Result<Self> {
        let amplitude = RbmParams::random(n_visible, n_hidden, std, rng)?;
        let phase = RbmParams::random(n_visible, n_hidden, std, rng)?;
        Ok(Self { amplitude, phase })
    }

    pub fn n_visible(&self) -> usize {
        self.amplitude.n_visible()
    }

    fn configs(&self) -> Result<Vec<Vec<f64>>> {
        let (v, h) = (self.n_visible(), self.amplitude.n_hidden());
        if v + h > MAX_EXACT_UNITS {
            return Err(Error::Unsupported(format!("exact sums need visible + hidden ≤ {MAX_EXACT_UNITS}, got {}", v + h)));
        }
        Ok((0..1usize << v).map(|z| visible(z, v)).collect())
    }

    /// `ln Σ_z e^{−E_θ(z)}`.
    pub fn log_partition(&self) -> Result<f64> {
        let e: Vec<f64> = self.configs()?.iter().map(|z| -self.amplitude.effective_energy(z)).collect();
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(m + e.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
    }

    pub fn partition_function(&self) -> Result<f64> {
        Ok(self.log_partition()?.exp())
    }

    /// `p_θ(z)` over all visible configurations.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let lz = self.log_partition()?;
        Ok(self.configs()?.iter().map(|z| (-self.amplitude.effective_energy(z) - lz).exp()).collect())
    }

    /// Normalized wavefunction over all visible configurations.
    pub fn psi(&self) -> Result<Vec<C64>> {
        let lz = self.log_partition()?;
        Ok(self
            .configs()?
            .iter()
            .map(|z| {
                let (ea, ep) = (self.amplitude.effective_energy(z), self.phase.effective_energy(z));
                C64::from_polar((-(ea + lz) / 2.0).exp(), -ep / 2.0)
            })
            .collect())
    }

    /// `⟨∂E_θ⟩` under the model distribution.
    pub fn exact_negative_phase(&self) -> Result<RbmParams> {
        let probs = self.probabilities()?;
        let mut g = RbmParams::zeros(self.n_visible(), self.amplitude.n_hidden());
        for (z, p) in self.configs()?.iter().zip(probs) {
            g.axpy(p, &self.amplitude.energy_gradient(z));
        }
        Ok(g)
    }

    /// Contrastive-divergence estimate of `⟨∂E_θ⟩` from chains started at
    /// `starts` and advanced by `steps` block Gibbs sweeps.
    pub fn cd_negative_phase<R: Rng + ?Sized>(&self, starts: &[Vec<f64>], steps: usize, rng: &mut R) -> RbmParams {
        let mut g = RbmParams::zeros(self.n_visible(), self.amplitude.n_hidden());
        for s in starts {
            let mut z = s.clone();
            for _ in 0..steps {
                self.amplitude.gibbs_sweep(&mut z, rng);
            }
            g.axpy(1.0 / starts.len() as f64, &self.amplitude.energy_gradient(&z));
        }
        g
    }

    /// Unnormalized record weights `U(σ,z) ψ̃(z)` with the largest amplitude
    /// scaled to one.
    fn rotated_terms(&self, record: &LocalOutcome, configs: &[Vec<f64>]) -> Vec<C64> {
        let r = record.state();
        let ea: Vec<f64> = configs.iter().map(|z| self.amplitude.effective_energy(z)).collect();
        let shift = ea.iter().cloned().fold(f64::INFINITY, f64::min);
        configs
            .iter()
            .zip(&ea)
            .enumerate()
            .map(|(k, (z, e))| r[k].conj() * C64::from_polar((-(e - shift) / 2.0).exp(), -self.phase.effective_energy(z) / 2.0))
            .collect()
    }

    /// Mean negative log-likelihood `−(1/N) Σ ln |⟨r_i|ψ⟩|²`.
    pub fn nll(&self, records: &[LocalOutcome]) -> Result<f64> {
        let psi = self.psi()?;
        Ok(-records
            .iter()
            .map(|rec| {
                let r = rec.state();
                r.iter().zip(&psi).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr().max(1e-300).ln()
            })
            .sum::<f64>()
            / records.len() as f64)
    }

    /// Data term of the NLL gradient for `records`: `(Re Σ w ∂E_θ, −Im Σ w ∂E_μ)`
    /// averaged over records, with `w(z) = U(σ,z)ψ̃(z) / Σ_z U(σ,z)ψ̃(z)`.
    pub fn data_gradient(&self, records: &[LocalOutcome]) -> Result<(RbmParams, RbmParams)> {
        let configs = self.configs()?;
        let (v, h) = (self.n_visible(), self.amplitude.n_hidden());
        let (mut ga, mut gp) = (RbmParams::zeros(v, h), RbmParams::zeros(v, h));
        let grads_a: Vec<RbmParams> = configs.iter().map(|z| self.amplitude.energy_gradient(z)).collect();
        let grads_p: Vec<RbmParams> = configs.iter().map(|z| self.phase.energy_gradient(z)).collect();
        let n = records.len() as f64;
        for rec in records {
            if rec.bits.len() != v {
                return Err(Error::DimensionMismatch(rec.bits.len(), v));
            }
            let terms = self.rotated_terms(rec, &configs);
            let total: C64 = terms.iter().sum();
            if total.norm() < 1e-300 {
                continue;
            }
            for (k, t) in terms.iter().enumerate() {
                let w = t / total;
                if w.norm() == 0.0 {
                    continue;
                }
                ga.axpy(w.re / n, &grads_a[k]);
                gp.axpy(-w.im / n, &grads_p[k]);
            }
        }
        Ok((ga, gp))
    }

    /// Full NLL gradient with the exact negative phase.
    pub fn exact_gradient(&self, records: &[LocalOutcome]) -> Result<(RbmParams, RbmParams)> {
        let (mut ga, gp) = self.data_gradient(records)?;
        ga.axpy(-1.0, &self.exact_negative_phase()?);
        Ok((ga, gp))
    }
}

/// `Σ p ln(p/q)` over entries with `p > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b.max(1e-300)).ln()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub cd_steps: usize,
    pub hidden: usize,
    pub init_std: f64,
    /// Use the exact negative phase instead of contrastive divergence.
    pub exact_negative_phase: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            batch_size: 32,
            cd_steps: 10,
            hidden: 3,
            init_std: 0.1,
            exact_negative_phase: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_nll: f64,
}

/// Fit a complex RBM to the records of one group. At least one all-`Z`
/// record is required.
pub fn train<R: Rng + ?Sized>(
    records: &[LocalOutcome],
    n_a: usize,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(ComplexRbm, TrainReport)> {
    if records.is_empty() {
        return invalid("no records to train on");
    }
    if !records.iter().any(LocalOutcome::is_all_z) {
        return Err(Error::TrainingUnsupported("no Z-basis record to fix the amplitudes".into()));
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 || !(cfg.learning_rate > 0.0) {
        return invalid("batch size, hidden units and learning rate must be positive");
    }
    let mut model = ComplexRbm::random(n_a, cfg.hidden, cfg.init_std, rng)?;
    model.configs()?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| records[i].clone()));
            let (mut ga, gp) = model.data_gradient(&batch)?;
            let negative = if cfg.exact_negative_phase {
                model.exact_negative_phase()?
            } else {
                let starts: Vec<Vec<f64>> = batch.iter().map(|r| r.bits.to_vec().into_iter().map(f64::from).collect()).collect();
                model.cd_negative_phase(&starts, cfg.cd_steps, rng)
            };
            ga.axpy(-1.0, &negative);
            model.amplitude.axpy(-cfg.learning_rate, &ga);
            model.phase.axpy(-cfg.learning_rate, &gp);
        }
    }
    let final_nll = model.nll(records)?;
    Ok((model, TrainReport { epochs: cfg.epochs, final_nll }))
}

/// Ensemble estimate with one cRBM per bath outcome. Groups that cannot be
/// trained are skipped and the remaining weights renormalized.
pub fn crbm_estimate_ensemble(grouped: &GroupedDataset, cfg: &TrainConfig, seed: u64) -> Result<Ensemble> {
    let sub = SubsystemSpace::new(grouped.n_a)?;
    let fitted: Vec<Option<EnsembleEntry>> = grouped
        .groups
        .par_iter()
        .map(|(z_b, records)| {
            let mut rng = stream(seed, &[z_b.bits(), z_b.len() as u64, 1]);
            match train(records, grouped.n_a, cfg, &mut rng) {
                Ok((model, _)) => Ok(CoefficientAnsatz::new(model.psi()?).gauge_fixed().constrained(&sub).map(|state| {
                    EnsembleEntry { label: *z_b, prob: grouped.empirical_p(z_b), state }
                })),
                Err(Error::TrainingUnsupported(msg)) => {
                    log::debug!("skipping z_B = {z_b}: {msg}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let skipped = fitted.iter().filter(|e| e.is_none()).count();
    let mut entries: Vec<EnsembleEntry> = fitted.into_iter().flatten().collect();
    if entries.is_empty() {
        return Err(Error::TrainingUnsupported("no bath outcome has a Z-basis record".into()));
    }
    if skipped > 0 {
        log::warn!("cRBM skipped {skipped} of {} groups", skipped + entries.len());
    }
    let total: f64 = entries.iter().map(|e| e.prob).sum();
    entries.iter_mut().for_each(|e| e.prob /= total);
    Ok(Ensemble::new(sub, entries))
}

fn write_params<W: Write>(w: &mut W, tag: &str, p: &RbmParams) -> Result<()> {
    for (name, vals) in [("b", &p.visible_bias), ("c", &p.hidden_bias), ("W", &p.weights)] {
        write!(w, "{tag}.{name}")?;
        for v in vals.iter() {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

impl ComplexRbm {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# V={} H={}", self.n_visible(), self.amplitude.n_hidden())?;
        write_params(&mut w, "theta", &self.amplitude)?;
        write_params(&mut w, "mu", &self.phase)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
        let header = lines.first().ok_or(Error::Parse { line: 1, msg: "empty model".into() })?;
        let dims: Vec<usize> = header
            .trim_start_matches('#')
            .split_whitespace()
            .map(|kv| kv.split_once('=').and_then(|(_, v)| v.parse().ok()))
            .collect::<Option<_>>()
            .filter(|d: &Vec<usize>| d.len() == 2)
            .ok_or(Error::Parse { line: 1, msg: "expected '# V=.. H=..'".into() })?;
        let (v, h) = (dims[0], dims[1]);
        let mut amplitude = RbmParams::zeros(v, h);
        let mut phase = RbmParams::zeros(v, h);
        let mut seen = 0;
        for (i, line) in lines.iter().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let vals: Vec<f64> = parts
                .map(|s| s.parse().map_err(|_| perr(format!("bad number {s:?}"))))
                .collect::<Result<_>>()?;
            let (net, field) = key.split_once('.').ok_or_else(|| perr(format!("bad key {key:?}")))?;
            let target = match net {
                "theta" => &mut amplitude,
                "mu" => &mut phase,
                _ => return Err(perr(format!("unknown network {net:?}"))),
            };
            let slot = match field {
                "b" => &mut target.visible_bias,
                "c" => &mut target.hidden_bias,
                "W" => &mut target.weights,
                _ => return Err(perr(format!("unknown field {field:?}"))),
            };
            if slot.len() != vals.len() {
                return Err(perr(format!("{key} needs {} values, found {}", slot.len(), vals.len())));
            }
            *slot = vals;
            seen += 1;
        }
        if seen != 6 {
            return Err(Error::Parse { line: lines.len(), msg: format!("expected 6 parameter lines, found {seen}") });
        }
        Ok(Self { amplitude, phase })
    }
}
