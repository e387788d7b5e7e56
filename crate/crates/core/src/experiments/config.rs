//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Every key has a default, so an empty file is a valid
//! configuration.

use std::fmt::Display;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::crbm::TrainConfig;
use crate::dynamics::{linspace, C6Convention, RydbergParams};
use crate::error::{Error, Result};
use crate::estimator::MaxLkOptions;
use crate::metrics::EnsembleSource;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn times(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_sites: usize,
    pub n_a: usize,
    /// Ω/2π in MHz.
    pub omega_mhz: f64,
    /// Δ/2π in MHz.
    pub delta_mhz: f64,
    pub c6_ghz_um6: f64,
    pub spacing_um: f64,
    pub c6_convention: C6Convention,
    /// Times for the estimator pipelines.
    pub times: TimeGrid,
    /// Times for the dynamics table.
    pub dynamics_times: TimeGrid,
    /// Window averaged for steady-state and scaling summaries.
    pub steady_times: TimeGrid,
    /// Moment orders reported by the dynamics table.
    pub moment_orders: Vec<usize>,
    pub size_freq: usize,
    pub size_maxlk: usize,
    pub size_crbm: usize,
    pub ladder: Vec<usize>,
    pub repetitions: usize,
    /// Design orders for the trace-distance table.
    pub k_values: Vec<usize>,
    /// Design order for the relative-error table.
    pub mre_k: usize,
    pub methods: Vec<EnsembleSource>,
    pub skip_crbm: bool,
    pub maxlk: MaxLkOptions,
    pub crbm: TrainConfig,
    pub seed: u64,
    pub scaling_n_max: usize,
    pub scaling_n_a: Vec<usize>,
    pub scaling_nb_min: usize,
    pub scaling_k: Vec<usize>,
    pub sample_time: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_sites: 10,
            n_a: 2,
            omega_mhz: 4.7,
            delta_mhz: 0.9,
            c6_ghz_um6: 126.0,
            spacing_um: 3.3,
            c6_convention: C6Convention::PlanckH,
            times: TimeGrid::new(0.4, 1.4, 21),
            dynamics_times: TimeGrid::new(0.0, 5.0, 201),
            steady_times: TimeGrid::new(1.5, 5.0, 130),
            moment_orders: vec![2, 3, 4],
            size_freq: 57,
            size_maxlk: 45,
            size_crbm: 256,
            ladder: vec![8, 16, 32, 57, 64, 128, 256, 512, 1024, 4096, 10_000],
            repetitions: 10,
            k_values: vec![2, 3],
            mre_k: 2,
            methods: vec![EnsembleSource::Frequentist, EnsembleSource::MaxLk, EnsembleSource::Crbm],
            skip_crbm: false,
            maxlk: MaxLkOptions::default(),
            crbm: TrainConfig::default(),
            seed: 1234,
            scaling_n_max: 14,
            scaling_n_a: vec![1, 2, 3],
            scaling_nb_min: 6,
            scaling_k: vec![2, 3],
            sample_time: 1.0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn convention_name(c: C6Convention) -> &'static str {
    match c {
        C6Convention::PlanckH => "h",
        C6Convention::ReducedHbar => "hbar",
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "n_sites" => self.n_sites = parse(key, v)?,
            "n_a" => self.n_a = parse(key, v)?,
            "omega_mhz" => self.omega_mhz = parse(key, v)?,
            "delta_mhz" => self.delta_mhz = parse(key, v)?,
            "c6_ghz_um6" => self.c6_ghz_um6 = parse(key, v)?,
            "spacing_um" => self.spacing_um = parse(key, v)?,
            "c6_convention" => self.c6_convention = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "t_start" => self.times.start = parse(key, v)?,
            "t_stop" => self.times.stop = parse(key, v)?,
            "t_points" => self.times.points = parse(key, v)?,
            "dynamics_t_start" => self.dynamics_times.start = parse(key, v)?,
            "dynamics_t_stop" => self.dynamics_times.stop = parse(key, v)?,
            "dynamics_t_points" => self.dynamics_times.points = parse(key, v)?,
            "steady_t_start" => self.steady_times.start = parse(key, v)?,
            "steady_t_stop" => self.steady_times.stop = parse(key, v)?,
            "steady_t_points" => self.steady_times.points = parse(key, v)?,
            "moment_orders" => self.moment_orders = parse_list(key, v)?,
            "size_freq" => self.size_freq = parse(key, v)?,
            "size_maxlk" => self.size_maxlk = parse(key, v)?,
            "size_crbm" => self.size_crbm = parse(key, v)?,
            "ladder" => self.ladder = parse_list(key, v)?,
            "repetitions" => self.repetitions = parse(key, v)?,
            "k_values" => self.k_values = parse_list(key, v)?,
            "mre_k" => self.mre_k = parse(key, v)?,
            "methods" => self.methods = parse_list(key, v)?,
            "skip_crbm" => self.skip_crbm = parse(key, v)?,
            "maxlk_learning_rate" => self.maxlk.learning_rate = parse(key, v)?,
            "maxlk_max_iter" => self.maxlk.max_iter = parse(key, v)?,
            "maxlk_tol" => self.maxlk.tol = parse(key, v)?,
            "maxlk_init_noise" => self.maxlk.init_noise = parse(key, v)?,
            "crbm_learning_rate" => self.crbm.learning_rate = parse(key, v)?,
            "crbm_epochs" => self.crbm.epochs = parse(key, v)?,
            "crbm_batch_size" => self.crbm.batch_size = parse(key, v)?,
            "crbm_cd_steps" => self.crbm.cd_steps = parse(key, v)?,
            "crbm_hidden" => self.crbm.hidden = parse(key, v)?,
            "crbm_init_std" => self.crbm.init_std = parse(key, v)?,
            "crbm_exact_negative_phase" => self.crbm.exact_negative_phase = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "scaling_n_max" => self.scaling_n_max = parse(key, v)?,
            "scaling_n_a" => self.scaling_n_a = parse_list(key, v)?,
            "scaling_nb_min" => self.scaling_nb_min = parse(key, v)?,
            "scaling_k" => self.scaling_k = parse_list(key, v)?,
            "sample_time" => self.sample_time = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        vec![
            ("n_sites", self.n_sites.to_string()),
            ("n_a", self.n_a.to_string()),
            ("omega_mhz", self.omega_mhz.to_string()),
            ("delta_mhz", self.delta_mhz.to_string()),
            ("c6_ghz_um6", self.c6_ghz_um6.to_string()),
            ("spacing_um", self.spacing_um.to_string()),
            ("c6_convention", convention_name(self.c6_convention).to_string()),
            ("t_start", self.times.start.to_string()),
            ("t_stop", self.times.stop.to_string()),
            ("t_points", self.times.points.to_string()),
            ("dynamics_t_start", self.dynamics_times.start.to_string()),
            ("dynamics_t_stop", self.dynamics_times.stop.to_string()),
            ("dynamics_t_points", self.dynamics_times.points.to_string()),
            ("steady_t_start", self.steady_times.start.to_string()),
            ("steady_t_stop", self.steady_times.stop.to_string()),
            ("steady_t_points", self.steady_times.points.to_string()),
            ("moment_orders", join(&self.moment_orders)),
            ("size_freq", self.size_freq.to_string()),
            ("size_maxlk", self.size_maxlk.to_string()),
            ("size_crbm", self.size_crbm.to_string()),
            ("ladder", join(&self.ladder)),
            ("repetitions", self.repetitions.to_string()),
            ("k_values", join(&self.k_values)),
            ("mre_k", self.mre_k.to_string()),
            ("methods", methods.join(",")),
            ("skip_crbm", self.skip_crbm.to_string()),
            ("maxlk_learning_rate", self.maxlk.learning_rate.to_string()),
            ("maxlk_max_iter", self.maxlk.max_iter.to_string()),
            ("maxlk_tol", self.maxlk.tol.to_string()),
            ("maxlk_init_noise", self.maxlk.init_noise.to_string()),
            ("crbm_learning_rate", self.crbm.learning_rate.to_string()),
            ("crbm_epochs", self.crbm.epochs.to_string()),
            ("crbm_batch_size", self.crbm.batch_size.to_string()),
            ("crbm_cd_steps", self.crbm.cd_steps.to_string()),
            ("crbm_hidden", self.crbm.hidden.to_string()),
            ("crbm_init_std", self.crbm.init_std.to_string()),
            ("crbm_exact_negative_phase", self.crbm.exact_negative_phase.to_string()),
            ("seed", self.seed.to_string()),
            ("scaling_n_max", self.scaling_n_max.to_string()),
            ("scaling_n_a", join(&self.scaling_n_a)),
            ("scaling_nb_min", self.scaling_nb_min.to_string()),
            ("scaling_k", join(&self.scaling_k)),
            ("sample_time", self.sample_time.to_string()),
        ]
    }

    /// Defaults overridden by the entries of a config file.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn params(&self) -> Result<RydbergParams> {
        RydbergParams::from_lab(self.omega_mhz, self.delta_mhz, self.c6_ghz_um6, self.spacing_um, self.c6_convention)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Methods to run, honouring `skip_crbm`.
    pub fn active_methods(&self) -> Vec<EnsembleSource> {
        self.methods.iter().copied().filter(|&m| !(self.skip_crbm && m == EnsembleSource::Crbm)).collect()
    }

    pub fn size_for(&self, m: EnsembleSource) -> usize {
        match m {
            EnsembleSource::Frequentist => self.size_freq,
            EnsembleSource::Crbm => self.size_crbm,
            _ => self.size_maxlk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_a == 0 || self.n_a >= self.n_sites {
            return fail(format!("need 0 < n_a < n_sites, got n_a={} n_sites={}", self.n_a, self.n_sites));
        }
        self.params()?;
        for (name, g) in [("t", &self.times), ("dynamics_t", &self.dynamics_times), ("steady_t", &self.steady_times)] {
            if g.points == 0 || !g.start.is_finite() || !g.stop.is_finite() {
                return fail(format!("{name} grid needs finite bounds and at least one point"));
            }
        }
        let counts = [
            ("size_freq", self.size_freq),
            ("size_maxlk", self.size_maxlk),
            ("size_crbm", self.size_crbm),
            ("repetitions", self.repetitions),
            ("mre_k", self.mre_k),
            ("maxlk_max_iter", self.maxlk.max_iter),
            ("crbm_batch_size", self.crbm.batch_size),
            ("crbm_hidden", self.crbm.hidden),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return fail(format!("{name} must be positive"));
        }
        if self.ladder.is_empty() || self.ladder.contains(&0) {
            return fail("ladder needs positive sizes".into());
        }
        for (name, ks) in [("moment_orders", &self.moment_orders), ("k_values", &self.k_values), ("scaling_k", &self.scaling_k)] {
            if ks.is_empty() || ks.contains(&0) {
                return fail(format!("{name} needs positive orders"));
            }
        }
        if self.methods.is_empty() || self.methods.contains(&EnsembleSource::Exact) {
            return fail("methods must list estimators (freq, maxlk, crbm)".into());
        }
        if !(self.maxlk.learning_rate > 0.0) || !(self.crbm.learning_rate > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if self.scaling_n_a.is_empty() || self.scaling_n_a.iter().any(|&a| a == 0 || a + self.scaling_nb_min > self.scaling_n_max) {
            return fail("every scaling_n_a needs 0 < n_a and n_a + scaling_nb_min <= scaling_n_max".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse_str("").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("ladder", "8, 16,32").unwrap();
        cfg.set("methods", "maxlk").unwrap();
        cfg.set("c6_convention", "hbar").unwrap();
        cfg.set("t_stop", "1.25").unwrap();
        let back = ExperimentConfig::parse_str(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(back.hash(), ExperimentConfig::default().hash());
        assert_eq!(cfg.ladder, vec![8, 16, 32]);
    }

    #[test]
    fn comments_and_errors() {
        let cfg = ExperimentConfig::parse_str("# comment\n\nn_sites = 8\nseed=7\n").unwrap();
        assert_eq!((cfg.n_sites, cfg.seed), (8, 7));
        for bad in ["n_sites", "bogus = 1", "n_sites = ten", "methods = magic"] {
            assert!(matches!(ExperimentConfig::parse_str(bad), Err(Error::Config(_))), "{bad}");
        }
        for bad in ["n_a = 10", "repetitions = 0", "methods = exact", "ladder = 0,8", "omega_mhz = -1"] {
            let cfg = ExperimentConfig::parse_str(bad).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn skip_flag_filters_crbm() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.active_methods().len(), 3);
        cfg.skip_crbm = true;
        assert_eq!(cfg.active_methods(), vec![EnsembleSource::Frequentist, EnsembleSource::MaxLk]);
    }
}
