//! Independent AMS realizations run on the rayon pool, and sweeps over them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ams::{ams_run, AmsConfig, AmsOutcome};
use crate::error::{Error, Result};
use crate::models::ProblemSpec;
use crate::sde::IntegratorScheme;
use crate::stats::{self, DtRate, EnsembleSummary};

/// Realizations `first..first + count`, in realization order whatever the
/// completion order. Each entry keeps its own error so one failure does not
/// discard the rest.
pub fn run_realizations(problem: &ProblemSpec, cfg: &AmsConfig, first: u64, count: u64) -> Vec<Result<AmsOutcome>> {
    (first..first + count).into_par_iter().map(|r| ams_run(problem, &cfg.with_realization(r))).collect()
}

/// Like [`run_realizations`] but fails on the first error, in order.
pub fn run_ensemble(problem: &ProblemSpec, cfg: &AmsConfig, count: u64) -> Result<Vec<AmsOutcome>> {
    run_realizations(problem, cfg, 0, count).into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_clones: usize,
    pub dt: f64,
    pub summary: EnsembleSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtSweep {
    pub points: Vec<SweepPoint>,
    pub rate: Option<DtRate>,
}

/// One ensemble per time step, with the same `N`, `n` and seed. The rate is
/// fitted when a reference value is given.
pub fn dt_sweep(
    problem: &ProblemSpec,
    base: &AmsConfig,
    dts: &[f64],
    count: u64,
    alpha_ref: Option<f64>,
) -> Result<DtSweep> {
    let mut points = Vec::with_capacity(dts.len());
    for &dt in dts {
        let cfg = AmsConfig { scheme: IntegratorScheme { kind: base.scheme.kind, dt }, ..*base };
        let records = run_ensemble(problem, &cfg, count)?;
        points.push(SweepPoint { n_clones: cfg.n_clones, dt, summary: stats::summarize(&records, alpha_ref)? });
    }
    let rate = match alpha_ref {
        Some(a) if dts.len() >= 2 => {
            let means: Vec<f64> = points.iter().map(|p| p.summary.mean_alpha).collect();
            Some(stats::dt_convergence_rate(dts, &means, a, 0.0)?)
        }
        _ => None,
    };
    Ok(DtSweep { points, rate })
}

/// One ensemble per clone count, keeping the records so duration statistics
/// can be built from them.
pub fn n_sweep(
    problem: &ProblemSpec,
    base: &AmsConfig,
    ns: &[usize],
    count: u64,
    alpha_ref: Option<f64>,
) -> Result<Vec<(SweepPoint, Vec<AmsOutcome>)>> {
    if ns.is_empty() {
        return Err(Error::InsufficientSweep { needed: 1, got: 0 });
    }
    ns.iter()
        .map(|&n| {
            let cfg = AmsConfig { n_clones: n, ..*base };
            let records = run_ensemble(problem, &cfg, count)?;
            let summary = stats::summarize(&records, alpha_ref)?;
            Ok((SweepPoint { n_clones: n, dt: cfg.scheme.dt, summary }, records))
        })
        .collect()
}

/// Per-realization mean reactive durations, skipping extinct runs.
pub fn mean_durations(records: &[AmsOutcome]) -> Vec<f64> {
    records.iter().filter(|r| !r.extinction).filter_map(|r| r.mean_duration()).collect()
}
