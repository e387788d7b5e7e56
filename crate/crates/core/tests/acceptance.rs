//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! The cRBM criterion takes about half a minute; `KDESIGN_ACCEPTANCE_FAST=1` skips it.
//! `KDESIGN_ACCEPTANCE_ONLY=3,5` restricts the run to the listed criteria.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use kdesign::crbm::{train, ComplexRbm, TrainConfig};
use kdesign::estimator::{frequentist_estimate, maxlk_estimate, MaxLkOptions};
use kdesign::experiments::{self, estimated_deltas, exact_deltas, ExperimentConfig, TimeGrid};
use kdesign::haar::haar_moment;
use kdesign::lattice::SiteConfig;
use kdesign::metrics::EnsembleSource;
use kdesign::rng::stream;
use kdesign::sampler::{product_state, Basis, LocalOutcome};
use kdesign::C64;
use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn random_state<R: Rng>(d: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / n).collect()
}

fn steady_marginal() -> Check {
    let s = experiments::steady_state_summary(&ExperimentConfig::default()).unwrap();
    check((0.30..=0.36).contains(&s.p_zero), format!("time-averaged p(00) = {:.4}, required [0.30, 0.36]", s.p_zero))
}

fn moment_convergence() -> Check {
    let s = experiments::steady_state_summary(&ExperimentConfig::default()).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, v) in s.rescaled {
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        let rel = (v - fact) / fact;
        pass &= rel.abs() <= 0.15;
        parts.push(format!("k={k}: {v:.3} vs {fact} ({:+.1}%)", 100.0 * rel));
    }
    check(pass, parts.join(", "))
}

fn haar_oracle() -> Check {
    let (d, k, samples) = (3usize, 2usize, 100_000usize);
    let haar = haar_moment(d, k).unwrap();
    let mut rng = stream(0xacce, &[3]);
    let dim = d * d;
    let mut mc = DMatrix::<C64>::zeros(dim, dim);
    for _ in 0..samples {
        let v = random_state(d, &mut rng);
        let vv = DVector::from_iterator(dim, v.iter().flat_map(|a| v.iter().map(move |b| a * b)));
        mc.gerc(C64::new(1.0 / samples as f64, 0.0), &vv, &vv, C64::new(1.0, 0.0));
    }
    let max_diff = (&mc - &haar.matrix).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let trace_err = (haar.trace() - C64::new(1.0, 0.0)).norm();
    check(max_diff <= 2e-2 && trace_err <= 1e-12, format!("max elementwise deviation {max_diff:.2e}, |tr - 1| = {trace_err:.1e}"))
}

fn z_only_equivalence() -> Check {
    let mut rng = stream(0xacce, &[4]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // random state on the blockade-allowed pair space {00, 01, 10}
        let amps = random_state(3, &mut rng);
        let size = rng.random_range(10..=500);
        let dist = WeightedIndex::new(amps.iter().map(|a| a.norm_sqr())).unwrap();
        let records: Vec<LocalOutcome> = (0..size)
            .map(|_| LocalOutcome { bases: vec![Basis::Z; 2], bits: SiteConfig::new(dist.sample(&mut rng) as u64, 2).unwrap() })
            .collect();
        let freq = frequentist_estimate(&records, 2).unwrap();
        let fit = maxlk_estimate(&records, 2, &MaxLkOptions::default(), &mut rng).unwrap();
        for (a, b) in fit.ansatz.coeffs.iter().zip(&freq.coeffs) {
            worst = worst.max((a.norm_sqr() - b.norm_sqr()).abs());
        }
    }
    check(worst <= 1e-6, format!("largest |maxLK |a|^2 - frequency| = {worst:.2e} over 100 datasets"))
}

fn estimator_accuracy() -> Check {
    let cfg = ExperimentConfig::default();
    let chain = experiments::chain_for(&cfg, 10, 2).unwrap();
    let exact = exact_deltas(&chain, &[1.0], &[2]).unwrap()[0][0];
    let est = estimated_deltas(&chain, 1.0, EnsembleSource::MaxLk, 10_000, &[2], &cfg, &[0, 0, 5, 10_000]).unwrap()[0];
    let rel = (est - exact) / exact;
    check(rel.abs() <= 0.05, format!("maxLK delta_2 = {est:.4}, exact {exact:.4}, relative error {:+.2}%", 100.0 * rel))
}

fn frequentist_bias() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.times = TimeGrid::new(0.4, 1.4, 5);
    cfg.repetitions = 3;
    cfg.methods = vec![EnsembleSource::Frequentist];
    let table = experiments::run_mre(&cfg).unwrap();
    let means = table.numbers("mre_mean").unwrap();
    let sizes = table.numbers("size").unwrap();
    let failing: Vec<String> = sizes.iter().zip(&means).filter(|(_, m)| !(**m > 0.0)).map(|(s, m)| format!("{s}: {m:.3}")).collect();
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    check(failing.is_empty(), format!("smallest MRE over {} sizes = {lo:+.3}; non-positive at [{}]", sizes.len(), failing.join(", ")))
}

fn crbm_sanity() -> Check {
    let mut rng = stream(0xacce, &[7]);
    let target = vec![C64::new(0.55, 0.0), C64::from_polar(0.45, 0.9), C64::from_polar(0.5, -1.7), C64::from_polar(0.4, 2.6)];
    let norm = target.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let target: Vec<C64> = target.into_iter().map(|c| c / norm).collect();
    let records: Vec<LocalOutcome> = (0..10_000)
        .map(|_| {
            let bases: Vec<Basis> = (0..2).map(|_| Basis::ALL[rng.random_range(0..3)]).collect();
            let probs: Vec<f64> = (0..4u64)
                .map(|r| {
                    let v = product_state(&bases, &SiteConfig::new(r, 2).unwrap());
                    v.iter().zip(&target).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
                })
                .collect();
            let r = WeightedIndex::new(&probs).unwrap().sample(&mut rng);
            LocalOutcome { bases, bits: SiteConfig::new(r as u64, 2).unwrap() }
        })
        .collect();
    let (model, _) = train(&records, 2, &TrainConfig::default(), &mut rng).unwrap();
    let psi = model.psi().unwrap();
    let fidelity = psi.iter().zip(&target).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr();

    let starts: Vec<Vec<f64>> = records.iter().map(|r| r.bits.to_vec().into_iter().map(f64::from).collect()).collect();
    let mut cosines = 0.0;
    for _ in 0..100 {
        let m = ComplexRbm::random(2, 3, 0.5, &mut rng).unwrap();
        let (data, _) = m.data_gradient(&records).unwrap();
        let mut exact = data.clone();
        exact.axpy(-1.0, &m.exact_negative_phase().unwrap());
        let mut cd = data;
        cd.axpy(-1.0, &m.cd_negative_phase(&starts, 50, &mut rng));
        cosines += exact.dot(&cd) / (exact.dot(&exact).sqrt() * cd.dot(&cd).sqrt());
    }
    let cosine = cosines / 100.0;
    check(fidelity > 0.95 && cosine > 0.9, format!("fidelity {fidelity:.4}, mean CD-50 cosine {cosine:.4}"))
}

fn scaling_law() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.scaling_n_max = 12;
    cfg.scaling_n_a = vec![1, 2];
    cfg.scaling_k = vec![2];
    let table = experiments::run_scaling(&cfg).unwrap();
    let n_a = table.numbers("n_a").unwrap();
    let n_b = table.numbers("n_b").unwrap();
    let mean = table.numbers("delta_mean").unwrap();
    let r2 = table.numbers("r_squared").unwrap();
    let gamma = table.numbers("gamma").unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in [1.0, 2.0] {
        let idx: Vec<usize> = (0..n_a.len()).filter(|&i| n_a[i] == a).collect();
        let decreasing = idx.windows(2).all(|w| mean[w[1]] < mean[w[0]]);
        let fit_r2 = r2[idx[0]];
        pass &= decreasing && fit_r2 > 0.9;
        let series: Vec<String> = idx.iter().map(|&i| format!("{}:{:.4}", n_b[i], mean[i])).collect();
        parts.push(format!(
            "N_A={a}: [{}] decreasing={decreasing} gamma={:.3} r2={fit_r2:.3}",
            series.join(" "),
            gamma[idx[0]]
        ));
    }
    check(pass, parts.join("; "))
}

fn determinism() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.n_sites = 8;
    cfg.times = TimeGrid::new(0.4, 1.4, 3);
    cfg.dynamics_times = TimeGrid::new(0.0, 5.0, 11);
    cfg.steady_times = TimeGrid::new(1.5, 5.0, 8);
    cfg.repetitions = 2;
    cfg.ladder = vec![32, 256];
    cfg.crbm.epochs = 20;
    cfg.scaling_n_max = 10;
    cfg.scaling_n_a = vec![1, 2];
    type Pipeline = fn(&ExperimentConfig) -> kdesign::Result<experiments::ResultTable>;
    let pipelines: [(&str, Pipeline); 4] = [
        ("dynamics", experiments::run_dynamics),
        ("mre", experiments::run_mre),
        ("trdist", experiments::run_trdist),
        ("scaling", experiments::run_scaling),
    ];
    let mut differing = Vec::new();
    for (name, run) in pipelines {
        if run(&cfg).unwrap().to_csv_string() != run(&cfg).unwrap().to_csv_string() {
            differing.push(name);
        }
    }
    for m in [EnsembleSource::Frequentist, EnsembleSource::MaxLk] {
        if experiments::sample_dataset(&cfg, m).unwrap().to_text() != experiments::sample_dataset(&cfg, m).unwrap().to_text() {
            differing.push("sample");
        }
    }
    check(differing.is_empty(), format!("pipelines with differing reruns: {differing:?}"))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let fast = std::env::var("KDESIGN_ACCEPTANCE_FAST").is_ok_and(|v| v == "1");
    let only: Option<Vec<u32>> =
        std::env::var("KDESIGN_ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Check, Duration); 9] = [
        (1, "steady-state marginal", steady_marginal, Duration::from_secs(60)),
        (2, "rescaled moment convergence", moment_convergence, Duration::from_secs(120)),
        (3, "Haar moment vs sampling", haar_oracle, Duration::from_secs(30)),
        (4, "maxLK equals frequentist on Z data", z_only_equivalence, Duration::from_secs(60)),
        (5, "maxLK accuracy at 10^4 shots", estimator_accuracy, Duration::from_secs(180)),
        (6, "frequentist overestimation", frequentist_bias, Duration::from_secs(300)),
        (7, "cRBM reconstruction and CD gradient", crbm_sanity, Duration::from_secs(900)),
        (8, "scaling with bath size", scaling_law, Duration::from_secs(600)),
        (9, "byte-identical reruns", determinism, Duration::from_secs(600)),
    ];
    let mut failed = Vec::new();
    for (id, name, run, budget) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        if id == 7 && fast {
            println!("criterion {id} ({name}): SKIP, unset KDESIGN_ACCEPTANCE_FAST to run");
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(c) => (c.pass && elapsed <= budget, c.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} ({name}): {verdict} | {detail} | {:.1}s of {}s", elapsed.as_secs_f64(), budget.as_secs());
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
