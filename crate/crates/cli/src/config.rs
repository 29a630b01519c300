//! Experiment configuration. Every section has defaults, so `{}` is a valid
//! config describing a small drift-model run.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ams_core::ams::AmsConfig;
use ams_core::committor::{self, CommittorGrid};
use ams_core::models::{Coordinate1d, Coordinate2d, ProblemSpec, SdeModel};
use ams_core::sde::{IntegratorScheme, SchemeKind, SimOptions};
use ams_core::three_level::RatePreset;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub scheme: SchemeConfig,
    pub ams: AmsSection,
    pub dns: DnsSection,
    pub committor: CommittorSection,
    pub sweep: SweepSection,
    pub three_level: ThreeLevelSection,
    pub seed: u64,
    /// Worker threads; never changes the numbers, so it is left out of manifests.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Drift,
    DoubleWell,
    TripleWell,
    TwoSaddles,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateName {
    Linear,
    Norm,
    Committor,
    SaddleApprox,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub model: ModelName,
    pub beta: f64,
    /// Drift speed, drift model only.
    pub mu: f64,
    pub coordinate: CoordinateName,
    /// Committor grid file, needed for the committor coordinate in 2-D.
    pub grid: Option<PathBuf>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig { model: ModelName::Drift, beta: 1.0, mu: 0.3, coordinate: CoordinateName::Committor, grid: None }
    }
}

impl ProblemConfig {
    pub fn model(&self) -> Result<SdeModel> {
        Ok(match self.model {
            ModelName::Drift => SdeModel::drift(self.mu, self.beta)?,
            ModelName::DoubleWell => SdeModel::double_well(self.beta)?,
            ModelName::TripleWell => SdeModel::triple_well(self.beta)?,
            ModelName::TwoSaddles => SdeModel::two_saddles(self.beta)?,
        })
    }

    pub fn is_2d(&self) -> bool {
        matches!(self.model, ModelName::TripleWell | ModelName::TwoSaddles)
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let coord1 = |c| -> Result<Coordinate1d> {
            Ok(match c {
                CoordinateName::Linear => Coordinate1d::Linear,
                CoordinateName::Committor => Coordinate1d::Committor,
                CoordinateName::SaddleApprox => Coordinate1d::SaddleApprox,
                CoordinateName::Norm => bail!("the norm coordinate needs a 2-D model"),
            })
        };
        Ok(match self.model {
            ModelName::Drift => ProblemSpec::drift(self.mu, self.beta, coord1(self.coordinate)?)?,
            ModelName::DoubleWell => ProblemSpec::double_well(self.beta, coord1(self.coordinate)?)?,
            ModelName::TripleWell | ModelName::TwoSaddles => {
                let coord = match self.coordinate {
                    CoordinateName::Linear => Coordinate2d::Linear,
                    CoordinateName::Norm => Coordinate2d::Norm,
                    CoordinateName::Committor => Coordinate2d::Committor(Arc::new(self.load_grid()?)),
                    CoordinateName::SaddleApprox => bail!("the saddle approximation needs a 1-D model"),
                };
                ProblemSpec::two_d(self.model()?, coord)?
            }
        })
    }

    fn load_grid(&self) -> Result<CommittorGrid> {
        let path = self.grid.as_ref().context("the committor coordinate on a 2-D model needs problem.grid")?;
        let file = std::fs::File::open(path).with_context(|| format!("committor grid {} not found", path.display()))?;
        let grid = CommittorGrid::read_from(file).with_context(|| format!("reading {}", path.display()))?;
        if grid.beta != self.beta {
            bail!("grid {} was solved at beta = {}, problem has beta = {}", path.display(), grid.beta, self.beta);
        }
        Ok(grid)
    }

    /// Exact crossing probability where one is available in closed form or by
    /// quadrature.
    pub fn reference_alpha(&self) -> Result<Option<f64>> {
        Ok(match self.model {
            ModelName::Drift => Some(committor::drift_committor(1.0, 0.0, 2.0, self.beta, self.mu)),
            ModelName::DoubleWell => Some(committor::committor_1d_quadrature(-0.9, &self.model()?, -1.0, 1.0)?),
            _ => None,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub dt: f64,
    pub checkpoint_interval: usize,
    pub max_steps: u64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        let sim = SimOptions::default();
        SchemeConfig {
            kind: SchemeKind::Euler,
            dt: 1e-3,
            checkpoint_interval: sim.checkpoint_interval,
            max_steps: sim.max_steps,
        }
    }
}

impl SchemeConfig {
    pub fn scheme(&self) -> IntegratorScheme {
        IntegratorScheme { kind: self.kind, dt: self.dt }
    }

    pub fn sim(&self) -> SimOptions {
        SimOptions { checkpoint_interval: self.checkpoint_interval, max_steps: self.max_steps }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmsSection {
    pub n_clones: usize,
    pub n_killed: usize,
    pub realizations: u64,
    pub max_iterations: Option<u64>,
    pub brownian_bridge: bool,
}

impl Default for AmsSection {
    fn default() -> Self {
        AmsSection { n_clones: 100, n_killed: 1, realizations: 10, max_iterations: None, brownian_bridge: false }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DnsSection {
    pub samples: u64,
}

impl Default for DnsSection {
    fn default() -> Self {
        DnsSection { samples: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommittorSection {
    /// Grid spacing in 2-D.
    pub h: f64,
    pub tol: f64,
    /// Table size in 1-D.
    pub points: usize,
}

impl Default for CommittorSection {
    fn default() -> Self {
        CommittorSection { h: 0.03, tol: 1e-8, points: 201 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub dts: Vec<f64>,
    pub ns: Vec<usize>,
    /// Overrides the built-in reference for the drift and double-well models.
    pub alpha_ref: Option<f64>,
    /// Reference mean duration for the N-sweep bias curve.
    pub tau_ref: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreeLevelSection {
    pub preset: RatePreset,
    pub lambdas: Vec<f64>,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
}

impl Default for ThreeLevelSection {
    fn default() -> Self {
        ThreeLevelSection { preset: RatePreset::LinBeta, lambdas: vec![100.0], beta_min: 1.0, beta_max: 30.0, beta_step: 0.01 }
    }
}

impl ThreeLevelSection {
    pub fn betas(&self) -> Result<Vec<f64>> {
        if !(self.beta_step > 0.0 && self.beta_min > 0.0 && self.beta_max >= self.beta_min) {
            bail!("three_level needs 0 < beta_min <= beta_max and beta_step > 0");
        }
        let n = ((self.beta_max - self.beta_min) / self.beta_step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.beta_min + i as f64 * self.beta_step).collect())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn ams_config(&self) -> AmsConfig {
        let mut cfg = AmsConfig::new(self.ams.n_clones, self.ams.n_killed, self.scheme.scheme(), self.seed);
        if let Some(m) = self.ams.max_iterations {
            cfg.max_iterations = m;
        }
        cfg.brownian_bridge = self.ams.brownian_bridge;
        cfg.sim = self.scheme.sim();
        cfg
    }

    /// Files whose content the run depends on besides the config itself.
    pub fn input_files(&self) -> Vec<PathBuf> {
        self.problem.grid.iter().cloned().collect()
    }
}
