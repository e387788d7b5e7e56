//! Reproducible pipelines that turn a configuration into result tables.
//!
//! Every sampled quantity draws from a random stream keyed by what it is
//! (time index, repetition, method, dataset size), so tables are identical
//! across reruns and thread counts.

pub mod config;
pub mod table;

use rand::Rng;
use rayon::prelude::*;

pub use config::{ExperimentConfig, TimeGrid};
pub use table::{cell, ResultTable};

use crate::crbm::crbm_estimate_ensemble;
use crate::dynamics::ChainEvolution;
use crate::ensemble::{conditional_moment, exact_ensemble, rising_factorial, Ensemble};
use crate::error::{invalid, Error, Result};
use crate::estimator::{estimate_ensemble, EstimatorKind};
use crate::metrics::{delta_k, fit_scaling, mean_relative_error, EnsembleSource};
use crate::rng::stream;
use crate::sampler::{draw_dataset, group_by_outcome, Dataset, GroupedDataset, SamplingMode};

fn method_id(m: EnsembleSource) -> u64 {
    match m {
        EnsembleSource::Exact => 0,
        EnsembleSource::Frequentist => 1,
        EnsembleSource::MaxLk => 2,
        EnsembleSource::Crbm => 3,
    }
}

/// `Z`-only shots for the frequentist estimator, random bases otherwise.
pub fn sampling_mode(m: EnsembleSource) -> SamplingMode {
    match m {
        EnsembleSource::Frequentist => SamplingMode::ZOnly,
        _ => SamplingMode::RandomBasis,
    }
}

fn base_table(cfg: &ExperimentConfig, command: &str, columns: Vec<String>) -> ResultTable {
    let mut t = ResultTable::with_columns(columns);
    t.meta("command", command);
    t.meta("config_hash", cfg.hash());
    t.meta("seed", cfg.seed);
    t
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    (mean, (finite.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn chain_for(cfg: &ExperimentConfig, n_sites: usize, n_a: usize) -> Result<ChainEvolution> {
    ChainEvolution::new(&cfg.params()?, n_sites, n_a)
}

/// Ensemble reconstructed from grouped records by `method`.
pub fn estimate_with(method: EnsembleSource, grouped: &GroupedDataset, cfg: &ExperimentConfig, seed: u64) -> Result<Ensemble> {
    match method {
        EnsembleSource::Frequentist => estimate_ensemble(grouped, EstimatorKind::Frequentist, seed),
        EnsembleSource::MaxLk => estimate_ensemble(grouped, EstimatorKind::MaxLk(cfg.maxlk), seed),
        EnsembleSource::Crbm => crbm_estimate_ensemble(grouped, &cfg.crbm, seed),
        EnsembleSource::Exact => invalid("the exact ensemble is not estimated from data"),
    }
}

/// Estimated `δ_k` for each `k` from one simulated dataset. A cRBM run with
/// no trainable group yields `NaN`.
pub fn estimated_deltas(
    chain: &ChainEvolution,
    t: f64,
    method: EnsembleSource,
    size: usize,
    ks: &[usize],
    cfg: &ExperimentConfig,
    tags: &[u64],
) -> Result<Vec<f64>> {
    let mut rng = stream(cfg.seed, tags);
    let psi = chain.state_at(t);
    let data = draw_dataset(&chain.space, &psi, size, &mut rng, sampling_mode(method), t, cfg.seed)?;
    let fit_seed: u64 = rng.random();
    match estimate_with(method, &group_by_outcome(&data), cfg, fit_seed) {
        Ok(e) => ks.iter().map(|&k| Ok(delta_k(&e, k, method)?.value)).collect(),
        Err(Error::TrainingUnsupported(msg)) => {
            log::warn!("{} at t={t}, size {size}: {msg}", method.name());
            Ok(vec![f64::NAN; ks.len()])
        }
        Err(e) => Err(e),
    }
}

pub fn exact_deltas(chain: &ChainEvolution, times: &[f64], ks: &[usize]) -> Result<Vec<Vec<f64>>> {
    times
        .par_iter()
        .map(|&t| {
            let e = exact_ensemble(&chain.space, &chain.state_at(t))?;
            ks.iter().map(|&k| Ok(delta_k(&e, k, EnsembleSource::Exact)?.value)).collect()
        })
        .collect()
}

/// Averages of the conditional marginal over the steady window.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadySummary {
    /// Time-averaged `p(z_A = 0…0)`.
    pub p_zero: f64,
    /// `(k, time-averaged D_A(D_A+1)⋯(D_A+k−1) Σ p(z_B) p(0…0|z_B)^k)`.
    pub rescaled: Vec<(usize, f64)>,
}

/// `p(0…0)` and the rescaled conditional moments at time `t`.
fn moment_row(chain: &ChainEvolution, t: f64, orders: &[usize]) -> Result<Vec<f64>> {
    let e = exact_ensemble(&chain.space, &chain.state_at(t))?;
    let d = e.local_dim();
    let mut row = vec![conditional_moment(&e, 0, 1)];
    row.extend(orders.iter().map(|&k| conditional_moment(&e, 0, k as u32) * rising_factorial(d, k)));
    Ok(row)
}

pub fn steady_state_summary(cfg: &ExperimentConfig) -> Result<SteadySummary> {
    let chain = chain_for(cfg, cfg.n_sites, cfg.n_a)?;
    let rows: Vec<Vec<f64>> =
        cfg.steady_times.times().par_iter().map(|&t| moment_row(&chain, t, &cfg.moment_orders)).collect::<Result<_>>()?;
    let avg = |i: usize| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64;
    Ok(SteadySummary {
        p_zero: avg(0),
        rescaled: cfg.moment_orders.iter().enumerate().map(|(j, &k)| (k, avg(j + 1))).collect(),
    })
}

/// Conditional marginal and rescaled moments along the dynamics grid.
pub fn run_dynamics(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let chain = chain_for(cfg, cfg.n_sites, cfg.n_a)?;
    let mut columns = vec!["t".to_string(), "p_zero".to_string()];
    columns.extend(cfg.moment_orders.iter().map(|k| format!("m{k}_rescaled")));
    let mut table = base_table(cfg, "dynamics", columns);
    let times = cfg.dynamics_times.times();
    let rows: Vec<Vec<f64>> =
        times.par_iter().map(|&t| moment_row(&chain, t, &cfg.moment_orders)).collect::<Result<_>>()?;
    for (t, r) in times.iter().zip(rows) {
        table.push(std::iter::once(*t).chain(r).map(cell).collect());
    }
    let summary = steady_state_summary(cfg)?;
    table.meta("steady_p_zero", summary.p_zero);
    for (k, v) in summary.rescaled {
        table.meta(&format!("steady_m{k}_rescaled"), v);
    }
    Ok(table)
}

/// Mean relative error of estimated `δ_k` against the exact value, per
/// dataset size and method, over the time grid and repetitions.
pub fn run_mre(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let chain = chain_for(cfg, cfg.n_sites, cfg.n_a)?;
    let times = cfg.times.times();
    let k = cfg.mre_k;
    let exact: Vec<f64> = exact_deltas(&chain, &times, &[k])?.into_iter().map(|v| v[0]).collect();
    let methods = cfg.active_methods();
    let n_times = times.len();
    let tasks: Vec<(usize, EnsembleSource, usize, usize)> = cfg
        .ladder
        .iter()
        .flat_map(|&size| {
            methods.iter().flat_map(move |&m| (0..n_times).flat_map(move |i| (0..cfg.repetitions).map(move |j| (size, m, i, j))))
        })
        .collect();
    let values: Vec<f64> = tasks
        .par_iter()
        .map(|&(size, m, i, j)| {
            Ok(estimated_deltas(&chain, times[i], m, size, &[k], cfg, &[i as u64, j as u64, method_id(m), size as u64])?[0])
        })
        .collect::<Result<_>>()?;
    let mut table = base_table(
        cfg,
        "mre",
        ["size", "method", "mre_mean", "mre_std", "points_used", "points_excluded"].map(String::from).to_vec(),
    );
    table.meta("k", k);
    let per_cell = times.len() * cfg.repetitions;
    for (chunk, task) in values.chunks(per_cell).zip(tasks.chunks(per_cell)) {
        let (size, m, _, _) = task[0];
        let reference: Vec<f64> = task.iter().map(|&(_, _, i, _)| exact[i]).collect();
        let (mean, std, used) = match mean_relative_error(chunk, &reference) {
            Ok(s) => (s.mean, s.std, s.used),
            Err(Error::InvalidArgument(_)) => (f64::NAN, f64::NAN, 0),
            Err(e) => return Err(e),
        };
        table.push(vec![size.to_string(), m.name().into(), cell(mean), cell(std), used.to_string(), (per_cell - used).to_string()]);
    }
    Ok(table)
}

/// Exact and estimated `δ_k` along the time grid.
pub fn run_trdist(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let chain = chain_for(cfg, cfg.n_sites, cfg.n_a)?;
    let times = cfg.times.times();
    let ks = &cfg.k_values;
    let exact = exact_deltas(&chain, &times, ks)?;
    let methods = cfg.active_methods();
    let mut columns = vec!["t".to_string()];
    columns.extend(ks.iter().map(|k| format!("exact_d{k}")));
    for m in &methods {
        for k in ks {
            columns.push(format!("{}_d{k}_mean", m.name()));
            columns.push(format!("{}_d{k}_std", m.name()));
        }
    }
    let mut table = base_table(cfg, "trdist", columns);
    for m in &methods {
        table.meta(&format!("size_{}", m.name()), cfg.size_for(*m));
    }
    let tasks: Vec<(usize, EnsembleSource, usize)> = (0..times.len())
        .flat_map(|i| methods.iter().flat_map(move |&m| (0..cfg.repetitions).map(move |j| (i, m, j))))
        .collect();
    let values: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(i, m, j)| {
            let size = cfg.size_for(m);
            estimated_deltas(&chain, times[i], m, size, ks, cfg, &[i as u64, j as u64, method_id(m), size as u64])
        })
        .collect::<Result<_>>()?;
    let per_time = methods.len() * cfg.repetitions;
    for (i, block) in values.chunks(per_time).enumerate() {
        let mut row = vec![cell(times[i])];
        row.extend(exact[i].iter().map(|&x| cell(x)));
        for reps in block.chunks(cfg.repetitions) {
            for kk in 0..ks.len() {
                let (mean, std) = mean_std(&reps.iter().map(|v| v[kk]).collect::<Vec<_>>());
                row.push(cell(mean));
                row.push(cell(std));
            }
        }
        table.push(row);
    }
    Ok(table)
}

/// Steady-window averaged exact `δ_k` versus bath size, with power-law fits.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let times = cfg.steady_times.times();
    let ks = &cfg.scaling_k;
    let points: Vec<(usize, usize)> = cfg
        .scaling_n_a
        .iter()
        .flat_map(|&a| (cfg.scaling_nb_min..=cfg.scaling_n_max - a).map(move |b| (a, b)))
        .collect();
    let stats: Vec<Vec<(f64, f64)>> = points
        .par_iter()
        .map(|&(a, b)| {
            let chain = chain_for(cfg, a + b, a)?;
            let d = exact_deltas(&chain, &times, ks)?;
            Ok((0..ks.len()).map(|kk| mean_std(&d.iter().map(|row| row[kk]).collect::<Vec<_>>())).collect())
        })
        .collect::<Result<_>>()?;
    let mut table = base_table(
        cfg,
        "scaling",
        ["n_a", "n_b", "k", "delta_mean", "delta_std", "gamma", "r_squared"].map(String::from).to_vec(),
    );
    for &a in &cfg.scaling_n_a {
        for (kk, &k) in ks.iter().enumerate() {
            let sel: Vec<(usize, (f64, f64))> =
                points.iter().zip(&stats).filter(|((pa, _), _)| *pa == a).map(|(&(_, b), s)| (b, s[kk])).collect();
            let n_b: Vec<usize> = sel.iter().map(|s| s.0).collect();
            let means: Vec<f64> = sel.iter().map(|s| s.1 .0).collect();
            let (gamma, r2) = if n_b.len() >= 3 {
                let fit = fit_scaling(&n_b, &means)?;
                (fit.gamma, fit.r_squared)
            } else {
                log::warn!("n_a={a}: {} bath sizes are too few for a fit", n_b.len());
                (f64::NAN, f64::NAN)
            };
            for (b, (mean, std)) in sel {
                table.push(vec![a.to_string(), b.to_string(), k.to_string(), cell(mean), cell(std), cell(gamma), cell(r2)]);
            }
        }
    }
    Ok(table)
}

/// Simulated dataset at `sample_time` with the size and bases used by `method`.
pub fn sample_dataset(cfg: &ExperimentConfig, method: EnsembleSource) -> Result<Dataset> {
    cfg.validate()?;
    let chain = chain_for(cfg, cfg.n_sites, cfg.n_a)?;
    let psi = chain.state_at(cfg.sample_time);
    let mut rng = stream(cfg.seed, &[u64::MAX, method_id(method)]);
    draw_dataset(&chain.space, &psi, cfg.size_for(method), &mut rng, sampling_mode(method), cfg.sample_time, cfg.seed)
}

/// Ensemble estimate from a dataset file's records.
pub fn estimate_dataset(data: &Dataset, method: EnsembleSource, cfg: &ExperimentConfig) -> Result<Ensemble> {
    if data.is_empty() {
        return invalid("dataset has no records");
    }
    estimate_with(method, &group_by_outcome(data), cfg, cfg.seed)
}
