//! Distances between moment operators, error summaries and scaling fits.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::ensemble::{ensemble_moment, Ensemble, MomentOperator};
use crate::error::{invalid, Error, Result};
use crate::haar::haar_moment;
use crate::C64;

/// `½ Σ |λ_i(ρ − σ)|` for Hermitian operators of equal size.
pub fn trace_distance(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch(rho.nrows(), sigma.nrows()));
    }
    if rho.nrows() != rho.ncols() {
        return invalid("trace distance needs square operators");
    }
    let diff = rho - sigma;
    // symmetrize to wash out round-off in the anti-Hermitian part
    let herm = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

pub fn moment_trace_distance(a: &MomentOperator, b: &MomentOperator) -> Result<f64> {
    if a.k != b.k || a.local_dim != b.local_dim {
        return invalid(format!(
            "moment operators differ: k={} d={} vs k={} d={}",
            a.k, a.local_dim, b.k, b.local_dim
        ));
    }
    trace_distance(&a.matrix, &b.matrix)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleSource {
    Exact,
    Frequentist,
    MaxLk,
    Crbm,
}

impl EnsembleSource {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleSource::Exact => "exact",
            EnsembleSource::Frequentist => "freq",
            EnsembleSource::MaxLk => "maxlk",
            EnsembleSource::Crbm => "crbm",
        }
    }
}

impl std::str::FromStr for EnsembleSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EnsembleSource::Exact),
            "freq" | "frequentist" => Ok(EnsembleSource::Frequentist),
            "maxlk" | "maxLK" => Ok(EnsembleSource::MaxLk),
            "crbm" | "cRBM" => Ok(EnsembleSource::Crbm),
            other => invalid(format!("unknown method {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceDistanceResult {
    pub k: usize,
    pub value: f64,
    pub method: EnsembleSource,
}

/// Distance of the k-th ensemble moment from the Haar moment on the
/// ensemble's local dimension.
pub fn delta_k(ensemble: &Ensemble, k: usize, method: EnsembleSource) -> Result<TraceDistanceResult> {
    let moment = ensemble_moment(ensemble, k)?;
    let haar = haar_moment(ensemble.local_dim(), k)?;
    Ok(TraceDistanceResult { k, value: moment_trace_distance(&moment, &haar)?, method })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Mean and spread of `(estimate − exact)/exact`. Points whose exact value is
/// below `1e-12` in magnitude, or whose estimate is not finite, are skipped.
pub fn mean_relative_error(estimates: &[f64], exact: &[f64]) -> Result<ErrorSummary> {
    if estimates.len() != exact.len() {
        return Err(Error::DimensionMismatch(estimates.len(), exact.len()));
    }
    let rel: Vec<f64> = estimates
        .iter()
        .zip(exact)
        .filter(|(e, x)| x.abs() >= 1e-12 && e.is_finite())
        .map(|(e, x)| (e - x) / x)
        .collect();
    let excluded = estimates.len() - rel.len();
    if excluded > 0 {
        log::warn!("relative error skips {excluded} of {} points", estimates.len());
    }
    if rel.is_empty() {
        return invalid("no usable points for a relative error");
    }
    let n = rel.len() as f64;
    let mean = rel.iter().sum::<f64>() / n;
    let std = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ErrorSummary { mean, std, used: rel.len(), excluded })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    /// Decay exponent in `δ ∝ N_B^{-γ}`.
    pub gamma: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln N_B, ln δ)`.
pub fn fit_scaling(n_b: &[usize], delta: &[f64]) -> Result<ScalingFit> {
    if n_b.len() != delta.len() {
        return Err(Error::DimensionMismatch(n_b.len(), delta.len()));
    }
    if n_b.len() < 3 {
        return invalid("a scaling fit needs at least three points");
    }
    if n_b.iter().any(|&n| n == 0) || delta.iter().any(|&d| !(d > 0.0)) {
        return invalid("scaling fit needs positive sizes and distances");
    }
    if n_b.iter().all(|&n| n == n_b[0]) {
        return invalid("scaling fit needs at least two distinct sizes");
    }
    let xs: Vec<f64> = n_b.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = delta.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ScalingFit { gamma: -slope, intercept: my - slope * mx, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn real_diag(v: &[f64]) -> DMatrix<C64> {
        DMatrix::from_fn(v.len(), v.len(), |i, j| if i == j { C64::new(v[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    fn pure(v: &[C64]) -> DMatrix<C64> {
        DMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    #[test]
    fn orthogonal_pure_states_are_maximally_distant() {
        let d = trace_distance(&real_diag(&[1.0, 0.0]), &real_diag(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_distance(&real_diag(&[1.0, 0.0]), &real_diag(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn pure_states_follow_fidelity_formula() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let b = [C64::new(s, 0.0), C64::new(0.0, s)];
        // √(1 − |⟨a|b⟩|²) for pure states
        let d = trace_distance(&pure(&a), &pure(&b)).unwrap();
        assert_abs_diff_eq!(d, (1.0f64 - 0.5).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn pure_state_against_maximally_mixed() {
        let d = 3;
        let mixed = real_diag(&[1.0 / d as f64; 3]);
        let dist = trace_distance(&real_diag(&[1.0, 0.0, 0.0]), &mixed).unwrap();
        assert_abs_diff_eq!(dist, (d as f64 - 1.0) / d as f64, epsilon = 1e-14);
    }

    #[test]
    fn single_state_ensemble_first_moment() {
        use crate::ensemble::EnsembleEntry;
        use crate::lattice::{SiteConfig, SubsystemSpace};
        let s = (1.0f64 / 3.0).sqrt();
        let e = Ensemble::new(
            SubsystemSpace::new(2).unwrap(),
            vec![EnsembleEntry { label: SiteConfig::zeros(3), prob: 1.0, state: vec![C64::new(s, 0.0); 3] }],
        );
        let r = delta_k(&e, 1, EnsembleSource::Exact).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn haar_sampled_ensemble_is_close_to_two_design() {
        use crate::ensemble::EnsembleEntry;
        use crate::lattice::{SiteConfig, SubsystemSpace};
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::stream(3, &[]);
        let n = 10_000;
        let entries = (0..n)
            .map(|_| {
                let v: Vec<C64> = (0..3)
                    .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                    .collect();
                let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                EnsembleEntry { label: SiteConfig::zeros(3), prob: 1.0 / n as f64, state: v.iter().map(|c| c / norm).collect() }
            })
            .collect();
        let e = Ensemble::new(SubsystemSpace::new(2).unwrap(), entries);
        let r = delta_k(&e, 2, EnsembleSource::Exact).unwrap();
        assert!(r.value < 0.05, "delta_2 = {}", r.value);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        assert!(trace_distance(&real_diag(&[1.0]), &real_diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn relative_error_summary() {
        let s = mean_relative_error(&[1.1, 0.9, 2.0], &[1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.std, (0.02f64 / 3.0).sqrt(), epsilon = 1e-14);
        let s = mean_relative_error(&[1.0, 5.0, f64::NAN], &[2.0, 0.0, 1.0]).unwrap();
        assert_eq!((s.used, s.excluded), (1, 2));
        assert_abs_diff_eq!(s.mean, -0.5);
        assert!(mean_relative_error(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn scaling_fit_recovers_power_law() {
        let n_b = [6usize, 7, 8, 9, 10];
        let delta: Vec<f64> = n_b.iter().map(|&n| 3.0 * (n as f64).powf(-0.75)).collect();
        let fit = fit_scaling(&n_b, &delta).unwrap();
        assert_abs_diff_eq!(fit.gamma, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept, 3.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        let inverse = fit_scaling(&[2, 4, 8], &[0.5, 0.25, 0.125]).unwrap();
        assert_abs_diff_eq!(inverse.gamma, 1.0, epsilon = 1e-12);
        let square: Vec<f64> = n_b.iter().map(|&n| 0.3 / (n * n) as f64).collect();
        assert_abs_diff_eq!(fit_scaling(&n_b, &square).unwrap().gamma, 2.0, epsilon = 1e-12);
        assert!(fit_scaling(&[6, 7], &[0.1, 0.2]).is_err());
        assert!(fit_scaling(&[6, 6, 6], &[0.1, 0.2, 0.3]).is_err());
        assert!(fit_scaling(&[6, 7, 8], &[0.1, 0.0, 0.1]).is_err());
    }

    fn density(seed: &[f64], d: usize) -> DMatrix<C64> {
        let a = DMatrix::from_fn(d, d, |i, j| C64::new(seed[(i * d + j) % seed.len()], seed[(i + 2 * j + 1) % seed.len()]));
        let m = &a * a.adjoint();
        let tr = m.trace().re;
        m / C64::new(tr, 0.0)
    }

    proptest! {
        #[test]
        fn trace_distance_is_a_metric(
            a in prop::collection::vec(-1.0f64..1.0, 9),
            b in prop::collection::vec(-1.0f64..1.0, 9),
            c in prop::collection::vec(-1.0f64..1.0, 9),
        ) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3));
            prop_assume!(b.iter().any(|x| x.abs() > 1e-3));
            prop_assume!(c.iter().any(|x| x.abs() > 1e-3));
            let (r, s, t) = (density(&a, 3), density(&b, 3), density(&c, 3));
            let rs = trace_distance(&r, &s).unwrap();
            let sr = trace_distance(&s, &r).unwrap();
            let rt = trace_distance(&r, &t).unwrap();
            let ts = trace_distance(&t, &s).unwrap();
            prop_assert!((rs - sr).abs() < 1e-12);
            prop_assert!(rs <= rt + ts + 1e-12);
            prop_assert!(rs >= -1e-15 && rs <= 1.0 + 1e-12);
            prop_assert!(trace_distance(&r, &r).unwrap() < 1e-12);
        }
    }
}
