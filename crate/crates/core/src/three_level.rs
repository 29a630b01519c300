//! Three-state absorbing Markov chain for reactive-trajectory durations.
//!
//! State 1 is the start, state 2 the absorbing target and state 3 a
//! metastable intermediate. Rates: `1 → 2` is `A`, `1 → 3` is `B` and
//! `3 → 2` is `C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatePreset {
    /// `A = B = 1/β`.
    LinBeta,
    /// `A = B = 1/ln β`.
    LogBeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreeLevelModel {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::InvalidConfig(format!("rates must be positive, got A={a}, B={b}, C={c}")));
        }
        Ok(ThreeLevelModel { a, b, c })
    }

    /// Preset rates at inverse temperature `beta`, with `C = e^{-β}`.
    pub fn preset(beta: f64, preset: RatePreset) -> Result<Self> {
        let ab = match preset {
            RatePreset::LinBeta => 1.0 / beta,
            RatePreset::LogBeta => 1.0 / beta.ln(),
        };
        Self::new(ab, ab, (-beta).exp())
    }

    fn gap(&self) -> Result<f64> {
        let g = self.a + self.b - self.c;
        if g.abs() < 1e-12 {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(g)
    }

    /// Generator acting on column probability vectors.
    pub fn absorbing_matrix(&self) -> Mat3 {
        let (a, b, c) = (self.a, self.b, self.c);
        [[-(a + b), 0.0, 0.0], [a, 0.0, c], [b, 0.0, -c]]
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        [0.0, -(self.a + self.b), -self.c]
    }

    /// `g1 = B/(A+B-C)` and `g2 = (BC + A(C-(A+B))) / ((A+B)(A+B-C))`.
    pub fn g_coefficients(&self) -> Result<(f64, f64)> {
        let gap = self.gap()?;
        let (a, b, c) = (self.a, self.b, self.c);
        Ok((b / gap, (b * c + a * (c - (a + b))) / ((a + b) * gap)))
    }

    /// `T(t) = e^{Mt}`, so that `R(t) = T(t) R(0)`.
    pub fn transition_matrix(&self, t: f64) -> Result<Mat3> {
        let (g1, g2) = self.g_coefficients()?;
        let e1 = (-(self.a + self.b) * t).exp();
        let e3 = (-self.c * t).exp();
        Ok([[e1, 0.0, 0.0], [1.0 - g1 * e3 + g2 * e1, 1.0, 1.0 - e3], [g1 * (e3 - e1), 0.0, e3]])
    }

    /// Density of the duration of a transition from state 1 to state 2.
    pub fn duration_pdf(&self, t: f64) -> Result<f64> {
        let gap = self.gap()?;
        let (a, b, c) = (self.a, self.b, self.c);
        Ok(b * c / gap * (-c * t).exp() + (a + b) * (a - c) / gap * (-(a + b) * t).exp())
    }

    /// Mean transition duration `(1 + B/C) / (A + B)`.
    pub fn mean_duration(&self) -> f64 {
        (1.0 + self.b / self.c) / (self.a + self.b)
    }

    /// `∫_0^Λ t T'_12(t) dt`, exactly.
    pub fn truncated_mean_duration(&self, lambda: f64) -> Result<f64> {
        let gap = self.gap()?;
        let (a, b, c) = (self.a, self.b, self.c);
        let s = a + b;
        Ok(b * c / gap * truncated_first_moment(c, lambda) + s * (a - c) / gap * truncated_first_moment(s, lambda))
    }

    /// The same integral with the `e^{-(A+B)Λ}` term dropped.
    pub fn truncated_mean_duration_approx(&self, lambda: f64) -> Result<f64> {
        let gap = self.gap()?;
        let (a, b, c) = (self.a, self.b, self.c);
        let s = a + b;
        let x = c * lambda;
        Ok(((a - c) * c + b * s * (-(-x).exp_m1() - x * (-x).exp())) / (c * s * gap))
    }

    /// Leading terms for small `CΛ`:
    /// `(1/(A+B)) (A/(A+B) + CB (Λ²/2 - 1/(A+B)²))`.
    pub fn truncated_mean_duration_small_c(&self, lambda: f64) -> f64 {
        let s = self.a + self.b;
        (self.a / s + self.c * self.b * (0.5 * lambda * lambda - 1.0 / (s * s))) / s
    }
}

/// `∫_0^Λ t e^{-at} dt = (1 - (1 + aΛ) e^{-aΛ}) / a²`, evaluated without
/// cancellation for small `aΛ`.
pub fn truncated_first_moment(a: f64, lambda: f64) -> f64 {
    let x = a * lambda;
    if x < 1e-3 {
        // series of 1 - (1+x)e^{-x} = x²/2 - x³/3 + x⁴/8 - ...
        return lambda * lambda * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
    }
    (-(-x).exp_m1() - x * (-x).exp()) / (a * a)
}

/// Predicted inverse temperatures where the truncated mean duration turns
/// back to slow growth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inflexion {
    /// `2 ln Λ + ln 2`.
    pub lin: f64,
    /// Root of `β - ln β = 2 ln Λ + ln 2`, for the log preset.
    pub log_exact: Option<f64>,
    /// `β_lin + ln β_lin / (1 - 1/β_lin)`.
    pub log_first_order: Option<f64>,
}

pub fn inflexion_beta(lambda: f64, preset: RatePreset) -> Result<Inflexion> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidConfig(format!("cut-off must be positive, got {lambda}")));
    }
    let lin = 2.0 * lambda.ln() + 2f64.ln();
    if preset == RatePreset::LinBeta {
        return Ok(Inflexion { lin, log_exact: None, log_first_order: None });
    }
    if lin <= 1.0 {
        return Err(Error::SolverFailed);
    }
    let mut beta = lin + lin.ln();
    let mut converged = false;
    for _ in 0..100 {
        let f = beta - beta.ln() - lin;
        let step = f / (1.0 - 1.0 / beta);
        beta -= step;
        if !beta.is_finite() || beta <= 1.0 {
            return Err(Error::SolverFailed);
        }
        if step.abs() < 1e-12 && (beta - beta.ln() - lin).abs() < 1e-10 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverFailed);
    }
    Ok(Inflexion { lin, log_exact: Some(beta), log_first_order: Some(lin + lin.ln() / (1.0 - 1.0 / lin)) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub beta: f64,
    pub tau: f64,
    pub tau_truncated: f64,
    pub tau_truncated_approx: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPeak {
    pub lambda: f64,
    pub argmax_beta: f64,
    pub max_tau: f64,
    pub inflexion: Inflexion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub preset: RatePreset,
    pub rows: Vec<SweepRow>,
    pub peaks: Vec<SweepPeak>,
}

/// Tabulate `τ_Λ(β)` for each cut-off and locate its maximum over `betas`.
pub fn sweep_tau_vs_beta(preset: RatePreset, lambdas: &[f64], betas: &[f64]) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(lambdas.len() * betas.len());
    let mut peaks = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut best: Option<(f64, f64)> = None;
        for &beta in betas {
            let m = ThreeLevelModel::preset(beta, preset)?;
            let tau_truncated = m.truncated_mean_duration(lambda)?;
            rows.push(SweepRow {
                lambda,
                beta,
                tau: m.mean_duration(),
                tau_truncated,
                tau_truncated_approx: m.truncated_mean_duration_approx(lambda)?,
            });
            if best.is_none_or(|(_, v)| tau_truncated > v) {
                best = Some((beta, tau_truncated));
            }
        }
        if let Some((argmax_beta, max_tau)) = best {
            peaks.push(SweepPeak { lambda, argmax_beta, max_tau, inflexion: inflexion_beta(lambda, preset)? });
        }
    }
    Ok(SweepTable { preset, rows, peaks })
}
