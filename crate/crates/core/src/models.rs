//! Benchmark dynamics, reaction coordinates, the sets A and B, the starting
//! surface C and the sampler for the restricted equilibrium measure on C.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::committor::{self, CommittorGrid};
use crate::error::{Error, Result};

/// A point of the (at most two dimensional) state space. 1-D models use `x`
/// only and keep `y` at zero.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
}

impl State {
    pub const fn new(x: f64, y: f64) -> Self {
        State { x, y }
    }

    pub const fn scalar(x: f64) -> Self {
        State { x, y: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Anything that can drive an overdamped Langevin equation
/// `dX = F(X) dt + sqrt(2/beta) dW`.
///
/// The built-in [`SdeModel`] implements it; user code can plug in other
/// force fields through the integrators in [`crate::sde`].
pub trait Dynamics: Send + Sync {
    fn dimension(&self) -> usize;
    fn beta(&self) -> f64;
    fn force(&self, s: State) -> State;
    fn potential(&self, s: State) -> Option<f64>;
    /// `(F, F', F'')` at `x`, only for 1-D models with analytic derivatives.
    fn force_derivatives(&self, x: f64) -> Option<(f64, f64, f64)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelKind {
    /// Brownian motion with constant drift `-mu`.
    Drift { mu: f64 },
    /// `V(x) = x^4 - 2 x^2`.
    DoubleWell,
    /// Two global minima near `(±1, 0)` and a metastable minimum above.
    TripleWell,
    /// Two minima joined by two symmetric saddles at `(0, ±1)`.
    TwoSaddles,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeModel {
    pub kind: ModelKind,
    /// Inverse temperature.
    pub beta: f64,
}

impl SdeModel {
    pub fn new(kind: ModelKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        if let ModelKind::Drift { mu } = kind {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(Error::InvalidConfig(format!("mu must be >= 0, got {mu}")));
            }
        }
        Ok(SdeModel { kind, beta })
    }

    pub fn drift(mu: f64, beta: f64) -> Result<Self> {
        Self::new(ModelKind::Drift { mu }, beta)
    }

    pub fn double_well(beta: f64) -> Result<Self> {
        Self::new(ModelKind::DoubleWell, beta)
    }

    pub fn triple_well(beta: f64) -> Result<Self> {
        Self::new(ModelKind::TripleWell, beta)
    }

    pub fn two_saddles(beta: f64) -> Result<Self> {
        Self::new(ModelKind::TwoSaddles, beta)
    }
}

impl Dynamics for SdeModel {
    fn dimension(&self) -> usize {
        match self.kind {
            ModelKind::Drift { .. } | ModelKind::DoubleWell => 1,
            ModelKind::TripleWell | ModelKind::TwoSaddles => 2,
        }
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    fn force(&self, s: State) -> State {
        match self.kind {
            ModelKind::Drift { mu } => State::scalar(-mu),
            ModelKind::DoubleWell => State::scalar(-4.0 * s.x * s.x * s.x + 4.0 * s.x),
            ModelKind::TripleWell => {
                let g = grad_triple_well(s.x, s.y);
                State::new(-g.0, -g.1)
            }
            ModelKind::TwoSaddles => {
                let g = grad_two_saddles(s.x, s.y);
                State::new(-g.0, -g.1)
            }
        }
    }

    fn potential(&self, s: State) -> Option<f64> {
        Some(match self.kind {
            ModelKind::Drift { mu } => mu * s.x,
            ModelKind::DoubleWell => potential_double_well(s.x),
            ModelKind::TripleWell => potential_triple_well(s.x, s.y),
            ModelKind::TwoSaddles => potential_two_saddles(s.x, s.y),
        })
    }

    fn force_derivatives(&self, x: f64) -> Option<(f64, f64, f64)> {
        match self.kind {
            ModelKind::Drift { mu } => Some((-mu, 0.0, 0.0)),
            ModelKind::DoubleWell => {
                Some((-4.0 * x * x * x + 4.0 * x, -12.0 * x * x + 4.0, -24.0 * x))
            }
            _ => None,
        }
    }
}

pub fn potential_double_well(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 - 2.0 * x2
}

/// Triple-well potential. The `y` confinement is quartic, `0.2 (y - 1/3)^4`;
/// with this term the saddle heights come out at 2.61 (lower channel),
/// 2.35 (upper channel) and 0.53 (metastable well exit).
pub fn potential_triple_well(x: f64, y: f64) -> f64 {
    let x2 = x * x;
    let y1 = y - 1.0 / 3.0;
    let y2 = y - 5.0 / 3.0;
    let y1sq = y1 * y1;
    0.2 * x2 * x2 + 0.2 * y1sq * y1sq + 3.0 * (-x2 - y1sq).exp() - 3.0 * (-x2 - y2 * y2).exp()
        - 5.0 * (-(x - 1.0) * (x - 1.0) - y * y).exp()
        - 5.0 * (-(x + 1.0) * (x + 1.0) - y * y).exp()
}

#[inline]
fn grad_triple_well(x: f64, y: f64) -> (f64, f64) {
    let x2 = x * x;
    let y1 = y - 1.0 / 3.0;
    let y2 = y - 5.0 / 3.0;
    let yy = y * y;
    let e1 = (-x2 - y1 * y1).exp();
    let e2 = (-x2 - y2 * y2).exp();
    let e3 = (-(x - 1.0) * (x - 1.0) - yy).exp();
    let e4 = (-(x + 1.0) * (x + 1.0) - yy).exp();
    let dx = 0.8 * x2 * x - 6.0 * x * e1 + 6.0 * x * e2 + 10.0 * (x - 1.0) * e3 + 10.0 * (x + 1.0) * e4;
    let dy = 0.8 * y1 * y1 * y1 - 6.0 * y1 * e1 + 6.0 * y2 * e2 + 10.0 * y * (e3 + e4);
    (dx, dy)
}

/// Two-saddles potential `x^4/4 - x^2/2 + 0.3 (y^4/4 - y^2/2 + x^2 y^2)`:
/// minima at `(±1, 0)`, a maximum at the origin, saddles at `(0, ±1)`.
pub fn potential_two_saddles(x: f64, y: f64) -> f64 {
    let x2 = x * x;
    let y2 = y * y;
    x2 * x2 / 4.0 - x2 / 2.0 + 0.3 * (y2 * y2 / 4.0 - y2 / 2.0 + x2 * y2)
}

#[inline]
fn grad_two_saddles(x: f64, y: f64) -> (f64, f64) {
    let x2 = x * x;
    let y2 = y * y;
    (x2 * x - x + 0.6 * x * y2, 0.3 * (y2 * y - y + 2.0 * x2 * y))
}

/// Linear interpolation table of a nondecreasing 1-D function, extrapolated
/// linearly past both ends so that the extension stays strictly ordered.
#[derive(Clone, Debug)]
pub struct Tabulated1d {
    x0: f64,
    h: f64,
    values: Vec<f64>,
}

impl Tabulated1d {
    pub fn new(x0: f64, x1: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2 && x1 > x0);
        let h = (x1 - x0) / (values.len() - 1) as f64;
        Tabulated1d { x0, h, values }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = (x - self.x0) / self.h;
        let i = if t <= 0.0 { 0 } else { (t.floor() as usize).min(n - 2) };
        let w = t - i as f64;
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }
}

/// Map `Φ` used to rank trajectories.
#[derive(Clone, Debug)]
pub enum ReactionCoordinate {
    /// `(x - x_a) / (x_b - x_a)` on the first coordinate.
    Linear { x_a: f64, x_b: f64 },
    /// `½ sqrt((x + 1)^2 + ½ y^2)`.
    Norm,
    /// Bilinear interpolation of a solved 2-D committor grid.
    CommittorGrid(Arc<CommittorGrid>),
    /// Exact committor of the drift model.
    ClosedFormCommittor { x_a: f64, x_b: f64, beta: f64, mu: f64 },
    /// Saddle-point approximation of a 1-D committor.
    SaddleApproxCommittor { x_a: f64, x_b: f64, x_s: f64, omega: f64 },
    /// 1-D committor from quadrature, tabulated on a fine grid.
    QuadratureCommittor(Arc<Tabulated1d>),
}

impl ReactionCoordinate {
    /// `Φ(s)` clamped to `[0, 1]`. Points off a committor grid are an error.
    pub fn phi_eval(&self, s: State) -> Result<f64> {
        if let ReactionCoordinate::CommittorGrid(grid) = self {
            return grid.interpolate(s);
        }
        Ok(self.score(s).clamp(0.0, 1.0))
    }

    /// Ranking value used inside the algorithm. Analytic coordinates are left
    /// unclamped so that distinct states never collapse onto the same level;
    /// the order is the same as for [`phi_eval`](Self::phi_eval). Grid lookups
    /// outside the grid use the nearest point of the grid domain.
    #[inline]
    pub fn score(&self, s: State) -> f64 {
        match self {
            ReactionCoordinate::Linear { x_a, x_b } => (s.x - x_a) / (x_b - x_a),
            ReactionCoordinate::Norm => norm_coordinate(s),
            ReactionCoordinate::CommittorGrid(grid) => grid.interpolate_clamped(s),
            ReactionCoordinate::ClosedFormCommittor { x_a, x_b, beta, mu } => {
                committor::drift_committor(s.x, *x_a, *x_b, *beta, *mu)
            }
            ReactionCoordinate::SaddleApproxCommittor { x_a, x_b, x_s, omega } => {
                committor::saddle_formula(s.x, *x_a, *x_b, *x_s, *omega)
            }
            ReactionCoordinate::QuadratureCommittor(table) => table.eval(s.x),
        }
    }

    /// True when the coordinate depends on `x` only and is nondecreasing in
    /// it, so that `max Φ(x_i) = Φ(max x_i)`.
    pub fn monotone_in_x(&self) -> bool {
        !matches!(self, ReactionCoordinate::Norm | ReactionCoordinate::CommittorGrid(_))
    }
}

#[inline]
pub fn norm_coordinate(s: State) -> f64 {
    0.5 * ((s.x + 1.0) * (s.x + 1.0) + 0.5 * s.y * s.y).sqrt()
}

/// The absorbing sets A and B.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sets {
    /// `A = {x <= x_a}`, `B = {x >= x_b}`.
    Interval { x_a: f64, x_b: f64 },
    /// `A = {Φ_n <= a}`, `B = {Φ_n >= b}` for the norm coordinate.
    NormLevels { a: f64, b: f64 },
}

impl Sets {
    #[inline]
    pub fn in_a(&self, s: State) -> bool {
        match *self {
            Sets::Interval { x_a, .. } => s.x <= x_a,
            Sets::NormLevels { a, .. } => norm_coordinate(s) <= a,
        }
    }

    #[inline]
    pub fn in_b(&self, s: State) -> bool {
        match *self {
            Sets::Interval { x_b, .. } => s.x >= x_b,
            Sets::NormLevels { b, .. } => norm_coordinate(s) >= b,
        }
    }
}

/// The surface C from which trajectories start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceC {
    Point { x: f64, y: f64 },
    /// Vertical segment `x = const`, `y` in `[y_min, y_max]`.
    Line { x: f64, y_min: f64, y_max: f64 },
    /// `sqrt((x - cx)^2 + w (y - cy)^2) = radius`.
    Ellipse { cx: f64, cy: f64, radius: f64, w: f64 },
}

impl SurfaceC {
    fn point_at(&self, param: f64) -> State {
        match *self {
            SurfaceC::Point { x, y } => State::new(x, y),
            SurfaceC::Line { x, .. } => State::new(x, param),
            SurfaceC::Ellipse { cx, cy, radius, w } => {
                State::new(cx + radius * param.cos(), cy + radius / w.sqrt() * param.sin())
            }
        }
    }

    fn speed(&self, param: f64) -> f64 {
        match *self {
            SurfaceC::Point { .. } => 0.0,
            SurfaceC::Line { .. } => 1.0,
            SurfaceC::Ellipse { radius, w, .. } => {
                let b = radius / w.sqrt();
                ((radius * param.sin()).powi(2) + (b * param.cos()).powi(2)).sqrt()
            }
        }
    }
}

/// Number of nodes of the tabulated inverse CDF on C.
pub const RHO_C_NODES: usize = 2000;

/// Inverse-CDF sampler of `exp(-beta V)` restricted to C (times the arc-length
/// element for curved C).
#[derive(Clone, Debug)]
pub struct RhoCSampler {
    surface: SurfaceC,
    params: Vec<f64>,
    cdf: Vec<f64>,
}

impl RhoCSampler {
    pub fn new<D: Dynamics + ?Sized>(surface: SurfaceC, model: &D) -> Result<Self> {
        let (lo, hi) = match surface {
            SurfaceC::Point { .. } => {
                return Ok(RhoCSampler { surface, params: vec![], cdf: vec![] });
            }
            SurfaceC::Line { y_min, y_max, .. } => (y_min, y_max),
            SurfaceC::Ellipse { .. } => (0.0, 2.0 * PI),
        };
        let n = RHO_C_NODES;
        let params: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let beta = model.beta();
        let log_w: Vec<f64> = params
            .iter()
            .map(|&p| {
                let v = model.potential(surface.point_at(p)).ok_or(Error::DegenerateDensity)?;
                Ok(-beta * v + surface.speed(p).ln())
            })
            .collect::<Result<_>>()?;
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::DegenerateDensity);
        }
        let dens: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        for i in 1..n {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * (dens[i] + dens[i - 1]) * (params[i] - params[i - 1]));
        }
        let total = cdf[n - 1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateDensity);
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(RhoCSampler { surface, params, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        if let SurfaceC::Point { x, y } = self.surface {
            return State::new(x, y);
        }
        let u: f64 = rng.random();
        self.surface.point_at(self.quantile(u))
    }

    /// Surface parameter at cumulative probability `u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (p0, p1) = (self.params[i - 1], self.params[i]);
        if c1 > c0 {
            p0 + (u - c0) / (c1 - c0) * (p1 - p0)
        } else {
            p0
        }
    }

    pub fn surface(&self) -> SurfaceC {
        self.surface
    }

    /// `E[f(X)]` for `X ~ ρ_C`, by the trapezoid rule on the tabulation.
    pub fn expectation<F: Fn(State) -> f64>(&self, f: F) -> f64 {
        if let SurfaceC::Point { x, y } = self.surface {
            return f(State::new(x, y));
        }
        let vals: Vec<f64> = self.params.iter().map(|&p| f(self.surface.point_at(p))).collect();
        (1..vals.len()).map(|i| 0.5 * (vals[i] + vals[i - 1]) * (self.cdf[i] - self.cdf[i - 1])).sum()
    }

    /// Nodes and normalised CDF of the tabulation.
    pub fn table(&self) -> (&[f64], &[f64]) {
        (&self.params, &self.cdf)
    }
}

/// Choice of ranking coordinate for the 1-D models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate1d {
    Linear,
    Committor,
    SaddleApprox,
}

/// Choice of ranking coordinate for the 2-D models.
#[derive(Clone, Debug)]
pub enum Coordinate2d {
    Linear,
    Norm,
    Committor(Arc<CommittorGrid>),
}

/// Default levels of A and B for the 2-D models.
pub const LEVEL_A: f64 = 0.05;
pub const LEVEL_B: f64 = 0.95;

/// A complete rare-event problem: dynamics, ranking coordinate, sets and C.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub model: SdeModel,
    pub phi: ReactionCoordinate,
    pub sets: Sets,
    pub surface: SurfaceC,
    pub sampler: Arc<RhoCSampler>,
}

impl ProblemSpec {
    /// Drift model with `x_A = 0`, `x_0 = 1`, `x_B = 2`.
    pub fn drift(mu: f64, beta: f64, coordinate: Coordinate1d) -> Result<Self> {
        Self::drift_with(mu, beta, 0.0, 1.0, 2.0, coordinate)
    }

    pub fn drift_with(mu: f64, beta: f64, x_a: f64, x_0: f64, x_b: f64, coordinate: Coordinate1d) -> Result<Self> {
        let model = SdeModel::drift(mu, beta)?;
        let phi = match coordinate {
            Coordinate1d::Linear => ReactionCoordinate::Linear { x_a, x_b },
            Coordinate1d::Committor => ReactionCoordinate::ClosedFormCommittor { x_a, x_b, beta, mu },
            Coordinate1d::SaddleApprox => {
                return Err(Error::InvalidConfig("the drift model has no saddle".into()));
            }
        };
        Self::assemble(model, phi, Sets::Interval { x_a, x_b }, SurfaceC::Point { x: x_0, y: 0.0 })
    }

    /// Double well with `x_A = -1`, `x_B = 1`, `x_C = -0.9`.
    pub fn double_well(beta: f64, coordinate: Coordinate1d) -> Result<Self> {
        let model = SdeModel::double_well(beta)?;
        let (x_a, x_b) = (-1.0, 1.0);
        let phi = match coordinate {
            Coordinate1d::Linear => ReactionCoordinate::Linear { x_a, x_b },
            Coordinate1d::Committor => {
                ReactionCoordinate::QuadratureCommittor(Arc::new(committor::tabulate_1d(&model, x_a, x_b, 4001)?))
            }
            Coordinate1d::SaddleApprox => {
                let omega = committor::saddle_omega(&model, 0.0)?;
                ReactionCoordinate::SaddleApproxCommittor { x_a, x_b, x_s: 0.0, omega }
            }
        };
        Self::assemble(model, phi, Sets::Interval { x_a, x_b }, SurfaceC::Point { x: -0.9, y: 0.0 })
    }

    /// Triple-well or two-saddles problem. The linear coordinate starts on the
    /// line `x = -0.9`; the norm and committor coordinates share the norm
    /// sets and start on the ellipse `sqrt((x+1)^2 + 0.5 y^2) = 0.1`.
    pub fn two_d(model: SdeModel, coordinate: Coordinate2d) -> Result<Self> {
        if model.dimension() != 2 {
            return Err(Error::UnsupportedDimension(model.dimension()));
        }
        let (phi, sets, surface) = match coordinate {
            Coordinate2d::Linear => (
                ReactionCoordinate::Linear { x_a: -1.0, x_b: 1.0 },
                Sets::Interval { x_a: -1.0 + 2.0 * LEVEL_A, x_b: -1.0 + 2.0 * LEVEL_B },
                SurfaceC::Line { x: -1.0 + 2.0 * LEVEL_A, y_min: -1.0, y_max: 2.0 },
            ),
            Coordinate2d::Norm => (ReactionCoordinate::Norm, norm_sets(), norm_surface()),
            Coordinate2d::Committor(grid) => {
                (ReactionCoordinate::CommittorGrid(grid), norm_sets(), norm_surface())
            }
        };
        Self::assemble(model, phi, sets, surface)
    }

    pub fn assemble(model: SdeModel, phi: ReactionCoordinate, sets: Sets, surface: SurfaceC) -> Result<Self> {
        let sampler = Arc::new(RhoCSampler::new(surface, &model)?);
        Ok(ProblemSpec { model, phi, sets, surface, sampler })
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }
}

fn norm_sets() -> Sets {
    Sets::NormLevels { a: LEVEL_A, b: LEVEL_B }
}

fn norm_surface() -> SurfaceC {
    SurfaceC::Ellipse { cx: -1.0, cy: 0.0, radius: 2.0 * LEVEL_A, w: 0.5 }
}

/// Draw a starting point on C from the restricted equilibrium measure.
pub fn sample_rho_c<R: Rng + ?Sized>(problem: &ProblemSpec, rng: &mut R) -> State {
    problem.sampler.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn newton_critical_point(f: impl Fn(f64, f64) -> f64, mut p: (f64, f64)) -> (f64, f64) {
        let h = 1e-5;
        for _ in 0..60 {
            let gx = (f(p.0 + h, p.1) - f(p.0 - h, p.1)) / (2.0 * h);
            let gy = (f(p.0, p.1 + h) - f(p.0, p.1 - h)) / (2.0 * h);
            let hxx = (f(p.0 + h, p.1) - 2.0 * f(p.0, p.1) + f(p.0 - h, p.1)) / (h * h);
            let hyy = (f(p.0, p.1 + h) - 2.0 * f(p.0, p.1) + f(p.0, p.1 - h)) / (h * h);
            let hxy = (f(p.0 + h, p.1 + h) - f(p.0 + h, p.1 - h) - f(p.0 - h, p.1 + h) + f(p.0 - h, p.1 - h))
                / (4.0 * h * h);
            let det = hxx * hyy - hxy * hxy;
            p = (p.0 - (hyy * gx - hxy * gy) / det, p.1 - (hxx * gy - hxy * gx) / det);
        }
        p
    }

    #[test]
    fn triple_well_landmarks() {
        let v = potential_triple_well;
        let min_b = newton_critical_point(v, (1.0, 0.0));
        let lower = newton_critical_point(v, (0.0, -0.3));
        let upper = newton_critical_point(v, (-0.6, 1.1));
        let d = newton_critical_point(v, (0.0, 1.5));
        let v_min = v(min_b.0, min_b.1);
        assert!((lower.1 + 0.3).abs() < 0.05 && lower.0.abs() < 1e-6, "{lower:?}");
        assert!((v(lower.0, lower.1) - v_min - 2.6).abs() < 0.05);
        assert!((upper.0 + 0.6).abs() < 0.05 && (upper.1 - 1.1).abs() < 0.05, "{upper:?}");
        assert!((v(upper.0, upper.1) - v_min - 2.32).abs() < 0.05);
        assert!(d.0.abs() < 1e-6 && (d.1 - 1.5).abs() < 0.15, "{d:?}");
        assert!((v(upper.0, upper.1) - v(d.0, d.1) - 0.52).abs() < 0.02);
    }

    #[test]
    fn parity_of_2d_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x: f64 = rng.random_range(-2.0..2.0);
            let y: f64 = rng.random_range(-2.0..2.0);
            let a = potential_triple_well(x, y);
            let b = potential_triple_well(-x, y);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            let s = potential_two_saddles(x, y);
            assert!((s - potential_two_saddles(-x, y)).abs() <= 1e-12 * s.abs().max(1.0));
            assert!((s - potential_two_saddles(x, -y)).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn two_saddles_critical_points() {
        assert_eq!(potential_two_saddles(1.0, 0.0), -0.25);
        assert_eq!(potential_two_saddles(-1.0, 0.0), -0.25);
        for y in [1.0, -1.0] {
            let g = grad_two_saddles(0.0, y);
            assert_eq!(g, (0.0, 0.0));
            // Hessian diag(3x^2 - 1 + 0.6 y^2, 0.3 (3 y^2 - 1 + 2 x^2)), off-diagonal 1.2 x y = 0
            let hxx = -1.0 + 0.6 * y * y;
            let hyy = 0.3 * (3.0 * y * y - 1.0);
            assert!(hxx < 0.0 && hyy > 0.0);
        }
    }

    #[test]
    fn force_is_minus_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let models = [
            SdeModel::drift(0.7, 1.0).unwrap(),
            SdeModel::double_well(2.0).unwrap(),
            SdeModel::triple_well(3.0).unwrap(),
            SdeModel::two_saddles(3.0).unwrap(),
        ];
        for m in models {
            for _ in 0..100 {
                let s = State::new(rng.random_range(-1.5..1.5), if m.dimension() == 2 { rng.random_range(-1.0..2.0) } else { 0.0 });
                let h = 1e-6;
                let v = |p: State| m.potential(p).unwrap();
                let gx = (v(State::new(s.x + h, s.y)) - v(State::new(s.x - h, s.y))) / (2.0 * h);
                let f = m.force(s);
                let scale = f.x.abs().max(1.0);
                assert!((f.x + gx).abs() < 1e-6 * scale, "{:?} at {s:?}: {} vs {}", m.kind, f.x, -gx);
                if m.dimension() == 2 {
                    let gy = (v(State::new(s.x, s.y + h)) - v(State::new(s.x, s.y - h))) / (2.0 * h);
                    assert!((f.y + gy).abs() < 1e-6 * f.y.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn analytic_force_derivatives_match_finite_differences() {
        let m = SdeModel::double_well(1.0).unwrap();
        for x in [-1.3, -0.4, 0.0, 0.5, 1.1] {
            let (f, f1, f2) = m.force_derivatives(x).unwrap();
            let h = 1e-4;
            let fp = m.force(State::scalar(x + h)).x;
            let fm = m.force(State::scalar(x - h)).x;
            assert!((f - m.force(State::scalar(x)).x).abs() < 1e-14);
            assert!((f1 - (fp - fm) / (2.0 * h)).abs() < 1e-6);
            assert!((f2 - (fp - 2.0 * f + fm) / (h * h)).abs() < 1e-4);
        }
    }

    #[test]
    fn coordinate_endpoints() {
        let lin = ReactionCoordinate::Linear { x_a: -1.0, x_b: 1.0 };
        assert_eq!(lin.phi_eval(State::scalar(-1.0)).unwrap(), 0.0);
        assert_eq!(lin.phi_eval(State::scalar(1.0)).unwrap(), 1.0);
        assert_eq!(lin.phi_eval(State::scalar(3.0)).unwrap(), 1.0);
        let norm = ReactionCoordinate::Norm;
        assert_eq!(norm.phi_eval(State::new(-1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(norm.phi_eval(State::new(1.0, 0.0)).unwrap(), 1.0);
        assert!((norm.phi_eval(State::new(-1.0, 2.0)).unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sets_agree_with_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tw = ProblemSpec::two_d(SdeModel::triple_well(1.0).unwrap(), Coordinate2d::Linear).unwrap();
        let nm = ProblemSpec::two_d(SdeModel::triple_well(1.0).unwrap(), Coordinate2d::Norm).unwrap();
        let lin = ReactionCoordinate::Linear { x_a: -1.0, x_b: 1.0 };
        for _ in 0..2000 {
            let s = State::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..3.0));
            if tw.sets.in_a(s) {
                assert!(lin.phi_eval(s).unwrap() <= LEVEL_A + 1e-15);
            }
            if tw.sets.in_b(s) {
                assert!(lin.phi_eval(s).unwrap() >= LEVEL_B - 1e-15);
            }
            if nm.sets.in_a(s) {
                assert!(norm_coordinate(s) <= LEVEL_A);
            }
            if nm.sets.in_b(s) {
                assert!(norm_coordinate(s) >= LEVEL_B);
            }
            assert!(!(tw.sets.in_a(s) && tw.sets.in_b(s)));
        }
    }

    #[test]
    fn start_surfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dw = ProblemSpec::double_well(3.0, Coordinate1d::Linear).unwrap();
        for _ in 0..10 {
            assert_eq!(sample_rho_c(&dw, &mut rng), State::scalar(-0.9));
        }
        let nm = ProblemSpec::two_d(SdeModel::triple_well(2.0).unwrap(), Coordinate2d::Norm).unwrap();
        for _ in 0..100 {
            let s = sample_rho_c(&nm, &mut rng);
            assert!((norm_coordinate(s) - LEVEL_A).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_density_on_line_is_uniform() {
        let p = ProblemSpec::two_d(SdeModel::triple_well(1e-12).unwrap(), Coordinate2d::Linear).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut ys: Vec<f64> = (0..10_000).map(|_| sample_rho_c(&p, &mut rng).y).collect();
        ys.sort_by(f64::total_cmp);
        let n = ys.len() as f64;
        let d = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = (y + 1.0) / 3.0;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at p = 0.01
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn cold_line_concentrates_near_conditional_minimum() {
        let beta = 10.0;
        let p = ProblemSpec::two_d(SdeModel::triple_well(beta).unwrap(), Coordinate2d::Linear).unwrap();
        // golden-section oracle for argmin_y V(-0.9, y) on the lower basin
        let (mut a, mut b) = (-1.0f64, 1.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if potential_triple_well(-0.9, c) < potential_triple_well(-0.9, d) {
                b = d;
            } else {
                a = c;
            }
        }
        let y_min = 0.5 * (a + b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 20_000;
        let mean = (0..m).map(|_| sample_rho_c(&p, &mut rng).y).sum::<f64>() / m as f64;
        assert!((mean - y_min).abs() < 0.05, "mean {mean} vs minimiser {y_min}");
    }

    #[test]
    fn expectation_agrees_with_sampling() {
        let p = ProblemSpec::two_d(SdeModel::triple_well(3.0).unwrap(), Coordinate2d::Norm).unwrap();
        assert!((p.sampler.expectation(|_| 1.0) - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 200_000;
        let ys: Vec<f64> = (0..m).map(|_| sample_rho_c(&p, &mut rng).y).collect();
        let mc = ys.iter().sum::<f64>() / m as f64;
        let sd = (ys.iter().map(|y| (y - mc).powi(2)).sum::<f64>() / m as f64).sqrt();
        let exact = p.sampler.expectation(|s| s.y);
        assert!((mc - exact).abs() < 4.0 * sd / (m as f64).sqrt(), "{mc} vs {exact}");
        let point = ProblemSpec::double_well(2.0, Coordinate1d::Linear).unwrap();
        assert_eq!(point.sampler.expectation(|s| s.x), -0.9);
    }
}
