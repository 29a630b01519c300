//! Ensemble diagnostics: cumulants of the iteration count, compensated
//! variance, convergence-rate fits, duration statistics and a cost model.

use serde::{Deserialize, Serialize};

use crate::ams::AmsOutcome;
use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Relative fluctuations and skewness of the iteration count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KCumulants {
    pub mean: f64,
    /// `⟨K²⟩ - ⟨K⟩²`.
    pub var: f64,
    /// `sqrt(var) / mean`.
    pub sigma_over_m: f64,
    /// `var / mean`, equal to 1 for a Poisson law.
    pub var_over_m: f64,
    /// `sqrt(var) / sqrt(mean)`.
    pub sigma_over_sqrt_m: f64,
    /// Third standardized cumulant.
    pub skewness: f64,
}

/// Cumulants from raw moments `⟨K⟩, ⟨K²⟩, ⟨K³⟩`.
pub fn cumulants_of_k(ks: &[f64]) -> Result<KCumulants> {
    if ks.len() < 2 {
        return Err(Error::DegenerateSample("need at least two samples"));
    }
    let n = ks.len() as f64;
    // shift by the first value to keep the raw moments well conditioned
    let c = ks[0];
    let m1 = ks.iter().map(|k| k - c).sum::<f64>() / n;
    let m2 = ks.iter().map(|k| (k - c).powi(2)).sum::<f64>() / n;
    let m3 = ks.iter().map(|k| (k - c).powi(3)).sum::<f64>() / n;
    let var = m2 - m1 * m1;
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("zero variance"));
    }
    let skewness = (m3 - 3.0 * m1 * var - m1 * m1 * m1) / var.powf(1.5);
    let mean = m1 + c;
    Ok(KCumulants {
        mean,
        var,
        sigma_over_m: var.sqrt() / mean,
        var_over_m: var / mean,
        sigma_over_sqrt_m: var.sqrt() / mean.sqrt(),
        skewness,
    })
}

fn check_reference(alpha_ref: f64) -> Result<()> {
    if !(alpha_ref > 0.0 && alpha_ref < 1.0) {
        return Err(Error::InvalidReference(alpha_ref));
    }
    Ok(())
}

/// `N Var(α̂) / (α² |ln α|)`, equal to 1 in the ideal central-limit regime.
pub fn compensated_variance(alphas: &[f64], alpha_ref: f64, n_clones: usize) -> Result<f64> {
    check_reference(alpha_ref)?;
    if alphas.len() < 2 {
        return Err(Error::DegenerateSample("need at least two samples"));
    }
    Ok(n_clones as f64 * variance(alphas) / (alpha_ref * alpha_ref * alpha_ref.ln().abs()))
}

/// The same normalisation written with the variance of `K`:
/// `sqrt(N) Var(K) / (α sqrt|ln α|)`.
pub fn compensated_variance_of_k(ks: &[f64], alpha_ref: f64, n_clones: usize) -> Result<f64> {
    check_reference(alpha_ref)?;
    if ks.len() < 2 {
        return Err(Error::DegenerateSample("need at least two samples"));
    }
    Ok((n_clones as f64).sqrt() * variance(ks) / (alpha_ref * alpha_ref.ln().abs().sqrt()))
}

/// `⟨K⟩/N - |ln α|`.
pub fn kn_bias(ks: &[f64], n_clones: usize, ln_alpha_ref: f64) -> f64 {
    mean(ks) / n_clones as f64 - ln_alpha_ref.abs()
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    /// `slope ± z · se`.
    pub fn slope_interval(&self, z: f64) -> (f64, f64) {
        (self.slope - z * self.slope_se, self.slope + z * self.slope_se)
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientSweep { needed: 2, got: x.len().min(y.len()) });
    }
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateSample("abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_se = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, slope_se, r2, residuals })
}

/// Fit `log y = c + slope log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Convergence of `⟨α̂⟩` with the time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtRate {
    pub dts: Vec<f64>,
    /// `|1 - (⟨α̂_dt⟩ - b)/α|` per time step.
    pub errors: Vec<f64>,
    pub gamma: f64,
    pub gamma_se: f64,
    pub fit: LinearFit,
    /// Set when the errors do not decrease monotonically with `dt`.
    pub fit_unreliable: bool,
}

pub fn dt_convergence_rate(dts: &[f64], mean_alphas: &[f64], alpha_ref: f64, bias: f64) -> Result<DtRate> {
    if dts.len() < 2 {
        return Err(Error::InsufficientSweep { needed: 2, got: dts.len() });
    }
    let errors: Vec<f64> = mean_alphas.iter().map(|a| (1.0 - (a - bias) / alpha_ref).abs()).collect();
    let fit = loglog_fit(dts, &errors)?;
    let mut order: Vec<usize> = (0..dts.len()).collect();
    order.sort_by(|&a, &b| dts[a].total_cmp(&dts[b]));
    let fit_unreliable = order.windows(2).any(|w| errors[w[1]] < errors[w[0]]);
    Ok(DtRate { dts: dts.to_vec(), errors, gamma: fit.slope, gamma_se: fit.slope_se, fit, fit_unreliable })
}

/// Duration statistics over a sweep in `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    /// `(1/n_c) Σ_N σ̂_{τ,N} sqrt(N) / τ_ref`.
    pub gamma_tau: Option<f64>,
    /// `(N, ⟨τ̂_N⟩ - τ_ref)`.
    pub bias: Vec<(usize, f64)>,
    /// Fit of `log|bias|` against `log N`.
    pub bias_fit: Option<LinearFit>,
}

/// `per_n` holds, for each `N`, the per-realization mean reactive durations.
pub fn duration_statistics(per_n: &[(usize, Vec<f64>)], tau_ref: Option<f64>) -> Result<DurationStats> {
    let Some(tau) = tau_ref else {
        return Ok(DurationStats { gamma_tau: None, bias: vec![], bias_fit: None });
    };
    if per_n.is_empty() {
        return Err(Error::InsufficientSweep { needed: 1, got: 0 });
    }
    let gamma_tau =
        per_n.iter().map(|(n, taus)| variance(taus).sqrt() * (*n as f64).sqrt() / tau).sum::<f64>() / per_n.len() as f64;
    let bias: Vec<(usize, f64)> = per_n.iter().map(|(n, taus)| (*n, mean(taus) - tau)).collect();
    let bias_fit = if bias.len() >= 2 && bias.iter().all(|b| b.1 != 0.0) {
        let ns: Vec<f64> = bias.iter().map(|b| b.0 as f64).collect();
        let ab: Vec<f64> = bias.iter().map(|b| b.1.abs()).collect();
        Some(loglog_fit(&ns, &ab)?)
    } else {
        None
    };
    Ok(DurationStats { gamma_tau: Some(gamma_tau), bias, bias_fit })
}

/// Reference for the duration bias in [`n_convergence_rates`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauReference {
    /// An externally known value, such as the committor-coordinate estimate.
    Value(f64),
    /// The mean at the largest `N`, which is then left out of the fit.
    LargestN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NRates {
    pub f_alpha: LinearFit,
    pub f_tau: Option<LinearFit>,
}

/// Exponents of `⟨K/N⟩ - |ln α| ∝ N^f_α` and `⟨τ̂_N⟩ - ϖ ∝ N^f_τ`.
pub fn n_convergence_rates(
    ns: &[usize],
    mean_k_over_n: &[f64],
    ln_alpha_ref: f64,
    mean_tau: Option<&[f64]>,
    tau_ref: TauReference,
) -> Result<NRates> {
    if ns.len() < 4 {
        return Err(Error::InsufficientSweep { needed: 4, got: ns.len() });
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let dk: Vec<f64> = mean_k_over_n.iter().map(|k| (k - ln_alpha_ref.abs()).abs()).collect();
    let f_alpha = loglog_fit(&x, &dk)?;
    let f_tau = match mean_tau {
        None => None,
        Some(taus) => {
            let (keep, reference): (Vec<usize>, f64) = match tau_ref {
                TauReference::Value(v) => ((0..ns.len()).collect(), v),
                TauReference::LargestN => {
                    let last = (0..ns.len()).max_by_key(|&i| ns[i]).expect("non-empty");
                    ((0..ns.len()).filter(|&i| i != last).collect(), taus[last])
                }
            };
            let xs: Vec<f64> = keep.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = keep.iter().map(|&i| (taus[i] - reference).abs()).collect();
            Some(loglog_fit(&xs, &ys)?)
        }
    };
    Ok(NRates { f_alpha, f_tau })
}

/// Inputs of the cost model `C = N(D_init + a ln N) + K(n D_branch + b ln N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub n_clones: usize,
    pub n_killed: usize,
    pub alpha: f64,
    pub d_init: f64,
    pub d_branch: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub iterations: f64,
    pub cost: f64,
}

pub fn complexity_estimate(m: &CostModel) -> CostEstimate {
    let nn = m.n_clones as f64;
    let ln_n = nn.ln();
    let iterations = (m.alpha * nn / m.r).ln() / (1.0 - m.n_killed as f64 / nn).ln();
    let iterations = if iterations.abs() == 0.0 { 0.0 } else { iterations };
    let cost = nn * (m.d_init + m.a * ln_n) + iterations * (m.n_killed as f64 * m.d_branch + m.b * ln_n);
    CostEstimate { iterations, cost }
}

/// Summary of a set of AMS realizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub realizations: usize,
    pub extinct: usize,
    pub mean_alpha: f64,
    pub var_alpha: f64,
    pub std_err_alpha: f64,
    pub mean_k: f64,
    pub var_k: f64,
    pub k_cumulants: Option<KCumulants>,
    pub compensated_variance: Option<f64>,
    /// Mean over realizations of the per-realization mean reactive duration.
    pub mean_duration: Option<f64>,
    pub var_duration: Option<f64>,
    pub mean_steps: f64,
}

/// Extinct realizations are counted but left out of every moment.
pub fn summarize(records: &[AmsOutcome], alpha_ref: Option<f64>) -> Result<EnsembleSummary> {
    let live: Vec<&AmsOutcome> = records.iter().filter(|r| !r.extinction).collect();
    if live.len() < 2 {
        return Err(Error::DegenerateSample("need at least two non-extinct realizations"));
    }
    let n_clones = live[0].n_clones;
    let alphas: Vec<f64> = live.iter().map(|r| r.alpha_hat).collect();
    let ks: Vec<f64> = live.iter().map(|r| r.k as f64).collect();
    let taus: Vec<f64> = live.iter().filter_map(|r| r.mean_duration()).collect();
    let steps: Vec<f64> = live.iter().map(|r| (r.init_steps + r.branch_steps) as f64).collect();
    let var_alpha = variance(&alphas);
    Ok(EnsembleSummary {
        realizations: records.len(),
        extinct: records.len() - live.len(),
        mean_alpha: mean(&alphas),
        var_alpha,
        std_err_alpha: (var_alpha / alphas.len() as f64).sqrt(),
        mean_k: mean(&ks),
        var_k: variance(&ks),
        k_cumulants: cumulants_of_k(&ks).ok(),
        compensated_variance: alpha_ref.and_then(|a| compensated_variance(&alphas, a, n_clones).ok()),
        mean_duration: (!taus.is_empty()).then(|| mean(&taus)),
        var_duration: (taus.len() >= 2).then(|| variance(&taus)),
        mean_steps: mean(&steps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Poisson};

    #[test]
    fn poisson_cumulants() {
        let lambda = -100.0 * 0.01f64.ln();
        assert!((lambda - 460.517).abs() < 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Poisson::new(lambda).unwrap();
        let ks: Vec<f64> = (0..400_000).map(|_| d.sample(&mut rng)).collect();
        let c = cumulants_of_k(&ks).unwrap();
        assert!((c.var_over_m - 1.0).abs() < 0.01);
        assert!((c.sigma_over_sqrt_m - 1.0).abs() < 0.005);
        assert!((c.skewness - lambda.powf(-0.5)).abs() < 0.01, "{}", c.skewness);
        assert!((c.sigma_over_m - lambda.powf(-0.5)).abs() < 1e-3);
    }

    #[test]
    fn normal_sample_has_no_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = Normal::new(50.0, 3.0).unwrap();
        let ks: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        let c = cumulants_of_k(&ks).unwrap();
        assert!(c.skewness.abs() < 0.02);
        assert!((c.sigma_over_m - 3.0 / 50.0).abs() < 1e-3);
    }

    #[test]
    fn constant_sample_is_degenerate() {
        assert!(matches!(cumulants_of_k(&[4.0; 10]), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn compensated_variance_normalisation() {
        let (alpha, n) = (0.05f64, 200usize);
        let sd = (alpha * alpha * alpha.ln().abs() / n as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Normal::new(alpha, sd).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        assert!((compensated_variance(&xs, alpha, n).unwrap() - 1.0).abs() < 0.02);
        assert_eq!(compensated_variance(&[0.3; 5], 0.3, 10).unwrap(), 0.0);
        assert!(matches!(compensated_variance(&xs, 1.0, n), Err(Error::InvalidReference(_))));
        assert!(matches!(compensated_variance(&xs, 0.0, n), Err(Error::InvalidReference(_))));
    }

    #[test]
    fn ideal_k_has_no_bias() {
        let alpha = 0.02f64;
        let n = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Poisson::new(-(n as f64) * alpha.ln()).unwrap();
        let ks: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        assert!(kn_bias(&ks, n, alpha.ln()).abs() < 0.01);
    }

    #[test]
    fn sqrt_dt_errors_give_half() {
        let dts = [1e-1, 1e-2, 1e-3, 1e-4];
        let alpha = 0.4;
        let means: Vec<f64> = dts.iter().map(|d: &f64| alpha * (1.0 - 0.3 * d.sqrt())).collect();
        let r = dt_convergence_rate(&dts, &means, alpha, 0.0).unwrap();
        assert!((r.gamma - 0.5).abs() < 1e-12);
        assert!(r.fit.r2 > 1.0 - 1e-12);
        assert!(!r.fit_unreliable);
        let bumpy = [means[0], means[2], means[1], means[3]];
        assert!(dt_convergence_rate(&dts, &bumpy, alpha, 0.0).unwrap().fit_unreliable);
    }

    #[test]
    fn duration_scaling_identity() {
        let tau = 2.5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let per_n: Vec<(usize, Vec<f64>)> = [100usize, 400, 1600]
            .iter()
            .map(|&n| {
                let d = Normal::new(tau - 3.0 / (n as f64).powi(2), tau / (n as f64).sqrt()).unwrap();
                (n, (0..50_000).map(|_| d.sample(&mut rng)).collect())
            })
            .collect();
        let s = duration_statistics(&per_n, Some(tau)).unwrap();
        assert!((s.gamma_tau.unwrap() - 1.0).abs() < 0.02);
        assert!(duration_statistics(&per_n, None).unwrap().bias_fit.is_none());
    }

    #[test]
    fn inverse_n_decay() {
        let ns = [100usize, 200, 400, 800, 1600];
        let l = 3.0;
        let kn: Vec<f64> = ns.iter().map(|&n| l + 5.0 / n as f64).collect();
        let taus: Vec<f64> = ns.iter().map(|&n| 1.0 - 2.0 / n as f64).collect();
        let r = n_convergence_rates(&ns, &kn, -l, Some(&taus), TauReference::Value(1.0)).unwrap();
        assert!((r.f_alpha.slope + 1.0).abs() < 1e-12);
        assert!((r.f_tau.unwrap().slope + 1.0).abs() < 1e-12);
        assert!(matches!(
            n_convergence_rates(&ns[..3], &kn[..3], -l, None, TauReference::LargestN),
            Err(Error::InsufficientSweep { needed: 4, got: 3 })
        ));
        let r = n_convergence_rates(&ns, &kn, -l, Some(&taus), TauReference::LargestN).unwrap();
        assert!(r.f_tau.unwrap().slope < 0.0);
    }

    #[test]
    fn cost_model_limits() {
        let base = CostModel { n_clones: 1000, n_killed: 1, alpha: 1.0, d_init: 10.0, d_branch: 5.0, a: 1.0, b: 1.0, r: 1000.0 };
        let e = complexity_estimate(&base);
        assert_eq!(e.iterations, 0.0);
        assert!((e.cost - 1000.0 * (10.0 + 1000f64.ln())).abs() < 1e-9);
        let m = CostModel { alpha: 1e-4, n_killed: 5, r: 995.0, ..base };
        let e = complexity_estimate(&m);
        let approx = 1000.0 / 5.0 * (1e-4f64 * 1000.0 / 995.0).ln().abs();
        assert!((e.iterations / approx - 1.0).abs() < 0.01);
    }

    #[test]
    fn fit_reports_standard_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0 + rng.random_range(-0.5..0.5)).collect();
        let f = linear_fit(&x, &y).unwrap();
        let (lo, hi) = f.slope_interval(3.0);
        assert!(lo < 2.0 && 2.0 < hi);
        assert_eq!(f.residuals.len(), 50);
    }
}
