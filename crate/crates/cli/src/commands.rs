use anyhow::{bail, Result};
use ams_core::committor::{self, Domain};
use ams_core::dns::dns_run;
use ams_core::ensemble::{dt_sweep, mean_durations, n_sweep, run_realizations};
use ams_core::models::{Coordinate2d, ProblemSpec, State};
use ams_core::stats::{self, EnsembleSummary};
use ams_core::three_level::sweep_tau_vs_beta;
use serde::Serialize;
use std::sync::Arc;

use crate::config::{ExperimentConfig, ModelName};
use crate::output::{opt, Csv, OutputDir};

/// Counts of problems that did not abort the run but make it unusable.
#[derive(Debug, Default)]
pub struct Flags {
    pub failed: usize,
    pub message: Vec<String>,
}

impl Flags {
    fn flag(&mut self, count: usize, what: &str) {
        if count > 0 {
            self.failed += count;
            self.message.push(format!("{count} {what}"));
        }
    }
}

#[derive(Serialize)]
struct Failure {
    realization: u64,
    error: String,
}

fn alpha_ref(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    match cfg.sweep.alpha_ref {
        Some(a) => Ok(Some(a)),
        None => cfg.problem.reference_alpha(),
    }
}

const SUMMARY_HEADER: [&str; 13] = [
    "realizations",
    "extinct",
    "mean_alpha",
    "std_err_alpha",
    "var_alpha",
    "mean_k",
    "var_k",
    "var_over_mean_k",
    "skewness_k",
    "compensated_variance",
    "mean_duration",
    "var_duration",
    "mean_steps",
];

fn summary_cells(s: &EnsembleSummary) -> Vec<String> {
    vec![
        s.realizations.to_string(),
        s.extinct.to_string(),
        s.mean_alpha.to_string(),
        s.std_err_alpha.to_string(),
        s.var_alpha.to_string(),
        s.mean_k.to_string(),
        s.var_k.to_string(),
        opt(s.k_cumulants.map(|c| c.var_over_m)),
        opt(s.k_cumulants.map(|c| c.skewness)),
        opt(s.compensated_variance),
        opt(s.mean_duration),
        opt(s.var_duration),
        s.mean_steps.to_string(),
    ]
}

fn with_header(prefix: &[&'static str]) -> Vec<&'static str> {
    prefix.iter().chain(SUMMARY_HEADER.iter()).copied().collect()
}

fn push(csv: &mut Csv, cells: Vec<String>) {
    let refs: Vec<&dyn std::fmt::Display> = cells.iter().map(|c| c as &dyn std::fmt::Display).collect();
    csv.row(&refs);
}

pub fn run_ams(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Flags> {
    let problem = cfg.problem.build()?;
    let acfg = cfg.ams_config();
    acfg.validate(&problem)?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in run_realizations(&problem, &acfg, 0, cfg.ams.realizations).into_iter().enumerate() {
        match res {
            Ok(o) => records.push(o),
            Err(e) => failures.push(Failure { realization: r as u64, error: e.to_string() }),
        }
    }
    out.write_jsonl("ams_records.jsonl", &records)?;
    if !failures.is_empty() {
        out.write_jsonl("failures.jsonl", &failures)?;
    }

    let reference = alpha_ref(cfg)?;
    let mut csv = Csv::new(&with_header(&["failures", "alpha_ref"]));
    let mut flags = Flags::default();
    flags.flag(failures.len(), "realizations failed");
    match stats::summarize(&records, reference) {
        Ok(s) => {
            let mut cells = vec![failures.len().to_string(), opt(reference)];
            cells.extend(summary_cells(&s));
            push(&mut csv, cells);
        }
        // fewer than two live realizations: no spread, only the counts and the mean
        Err(_) => {
            let live: Vec<f64> = records.iter().filter(|r| !r.extinction).map(|r| r.alpha_hat).collect();
            let mut cells = vec![
                failures.len().to_string(),
                opt(reference),
                records.len().to_string(),
                (records.len() - live.len()).to_string(),
                opt((!live.is_empty()).then(|| stats::mean(&live))),
            ];
            cells.extend(std::iter::repeat_n(String::new(), SUMMARY_HEADER.len() - 3));
            push(&mut csv, cells);
        }
    }
    out.write_csv("summary.csv", &csv)?;
    Ok(flags)
}

pub fn run_dns(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Flags> {
    let problem = cfg.problem.build()?;
    let rec = dns_run(&problem, cfg.scheme.scheme(), cfg.dns.samples, cfg.seed, 0, cfg.scheme.sim())?;
    out.write_json("dns.json", &rec)?;
    let reference = alpha_ref(cfg)?;
    let mut csv =
        Csv::new(&["samples", "hits_a", "hits_b", "alpha", "std_err", "mean_duration", "zero_hit", "alpha_ref"]);
    csv.row(&[
        &rec.samples,
        &rec.hits_a,
        &rec.hits_b,
        &rec.alpha,
        &rec.std_err,
        &opt(rec.mean_duration()),
        &rec.zero_hit,
        &opt(reference),
    ]);
    out.write_csv("dns_summary.csv", &csv)?;
    let mut flags = Flags::default();
    flags.flag(rec.zero_hit as usize, "run with no trajectory reaching B");
    Ok(flags)
}

pub fn committor(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Flags> {
    let model = cfg.problem.model()?;
    if cfg.problem.is_2d() {
        let c = &cfg.committor;
        let grid = committor::solve_committor_2d(
            &model,
            Domain::default(),
            c.h,
            c.h,
            State::new(-1.0, 0.0),
            State::new(1.0, 0.0),
            c.tol,
        )?;
        let mut bytes = Vec::new();
        grid.write_to(&mut bytes)?;
        out.write("committor.grid", &bytes)?;
        let grid = Arc::new(grid);
        let problem = ProblemSpec::two_d(model, Coordinate2d::Committor(grid.clone()))?;
        let alpha = committor::alpha_from_grid(&grid, &problem.sampler);
        let mut csv = Csv::new(&["nx", "ny", "h", "residual", "alpha_at_c"]);
        csv.row(&[&grid.nx, &grid.ny, &c.h, &grid.residual, &alpha]);
        out.write_csv("committor_summary.csv", &csv)?;
    } else {
        let (x_a, x_b) = match cfg.problem.model {
            ModelName::Drift => (0.0, 2.0),
            _ => (-1.0, 1.0),
        };
        let points = cfg.committor.points.max(2);
        let mut csv = Csv::new(&["x", "q"]);
        for i in 0..points {
            let x = x_a + (x_b - x_a) * i as f64 / (points - 1) as f64;
            let q = committor::committor_1d_quadrature(x, &model, x_a, x_b)?;
            csv.row(&[&x, &q]);
        }
        out.write_csv("committor.csv", &csv)?;
    }
    Ok(Flags::default())
}

pub fn ensemble_sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Flags> {
    let sweep = &cfg.sweep;
    if sweep.dts.is_empty() && sweep.ns.is_empty() {
        bail!("ensemble-sweep needs sweep.dts or sweep.ns");
    }
    let problem = cfg.problem.build()?;
    let base = cfg.ams_config();
    let reference = alpha_ref(cfg)?;
    let count = cfg.ams.realizations;

    if !sweep.dts.is_empty() {
        let s = dt_sweep(&problem, &base, &sweep.dts, count, reference)?;
        let mut csv = Csv::new(&with_header(&["dt", "n_clones"]));
        for p in &s.points {
            let mut cells = vec![p.dt.to_string(), p.n_clones.to_string()];
            cells.extend(summary_cells(&p.summary));
            push(&mut csv, cells);
        }
        out.write_csv("dt_sweep.csv", &csv)?;
        if let Some(rate) = &s.rate {
            out.write_json("dt_rate.json", rate)?;
        }
    }
    if !sweep.ns.is_empty() {
        let runs = n_sweep(&problem, &base, &sweep.ns, count, reference)?;
        let mut csv = Csv::new(&with_header(&["n_clones", "dt", "k_over_n"]));
        let mut per_n = Vec::new();
        for (p, records) in &runs {
            let mut cells = vec![p.n_clones.to_string(), p.dt.to_string(), (p.summary.mean_k / p.n_clones as f64).to_string()];
            cells.extend(summary_cells(&p.summary));
            push(&mut csv, cells);
            per_n.push((p.n_clones, mean_durations(records)));
        }
        out.write_csv("n_sweep.csv", &csv)?;
        if sweep.tau_ref.is_some() {
            out.write_json("duration_stats.json", &stats::duration_statistics(&per_n, sweep.tau_ref)?)?;
        }
    }
    Ok(Flags::default())
}

pub fn three_level(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Flags> {
    let t = &cfg.three_level;
    let table = sweep_tau_vs_beta(t.preset, &t.lambdas, &t.betas()?)?;
    let mut rows = Csv::new(&["lambda", "beta", "tau", "tau_truncated", "tau_truncated_approx"]);
    for r in &table.rows {
        rows.row(&[&r.lambda, &r.beta, &r.tau, &r.tau_truncated, &r.tau_truncated_approx]);
    }
    out.write_csv("three_level_table.csv", &rows)?;
    let mut peaks =
        Csv::new(&["lambda", "argmax_beta", "max_tau", "inflexion_lin", "inflexion_log_exact", "inflexion_log_first_order"]);
    for p in &table.peaks {
        peaks.row(&[
            &p.lambda,
            &p.argmax_beta,
            &p.max_tau,
            &p.inflexion.lin,
            &opt(p.inflexion.log_exact),
            &opt(p.inflexion.log_first_order),
        ]);
    }
    out.write_csv("three_level_peaks.csv", &peaks)?;
    Ok(Flags::default())
}
