//! Time stepping of overdamped Langevin dynamics and trajectory storage.
//!
//! A trajectory is stored as a chain of shared segments. Each segment keeps a
//! checkpoint (state and random-stream position) every `interval` steps along
//! with the maximum ranking score of every block between checkpoints, so any
//! stretch of the path can be regenerated exactly by replaying the stream.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dynamics, ProblemSpec, ReactionCoordinate, Sets, State};
use crate::rng::{StreamFactory, StreamId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Euler,
    Order15,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorScheme {
    pub kind: SchemeKind,
    pub dt: f64,
}

impl IntegratorScheme {
    pub fn euler(dt: f64) -> Self {
        IntegratorScheme { kind: SchemeKind::Euler, dt }
    }

    pub fn order15(dt: f64) -> Self {
        IntegratorScheme { kind: SchemeKind::Order15, dt }
    }

    pub fn validate<D: Dynamics + ?Sized>(&self, model: &D) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {}", self.dt)));
        }
        if self.kind == SchemeKind::Order15 && (model.dimension() != 1 || model.force_derivatives(0.0).is_none()) {
            return Err(Error::UnsupportedDimension(model.dimension()));
        }
        Ok(())
    }
}

/// Increments `ΔW` and `ΔZ = ∫∫ dW ds` over one step, built from two
/// independent standard normals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseIncrements {
    pub dw: f64,
    pub dz: f64,
}

impl NoiseIncrements {
    pub fn from_normals(u1: f64, u2: f64, dt: f64, beta: f64) -> Self {
        let amp = (2.0 / beta).sqrt();
        NoiseIncrements {
            dw: amp * dt.sqrt() * u1,
            dz: amp * 0.5 * dt * dt.sqrt() * (u1 + u2 / 3f64.sqrt()),
        }
    }

    pub fn zero() -> Self {
        NoiseIncrements { dw: 0.0, dz: 0.0 }
    }
}

/// `x + F(x) dt + dW`, componentwise.
pub fn euler_step<D: Dynamics + ?Sized>(x: State, model: &D, dt: f64, dw: State) -> Result<State> {
    let f = model.force(x);
    let next = State::new(x.x + f.x * dt + dw.x, x.y + f.y * dt + dw.y);
    if !f.is_finite() || !next.is_finite() {
        return Err(Error::NumericalBlowup { time: f64::NAN });
    }
    Ok(next)
}

/// `x + F dt + ΔW + F'ΔZ + ½dt²(F F' + F''/β)` for 1-D models.
pub fn order15_step<D: Dynamics + ?Sized>(x: f64, model: &D, dt: f64, noise: NoiseIncrements) -> Result<f64> {
    if model.dimension() != 1 {
        return Err(Error::UnsupportedDimension(model.dimension()));
    }
    let (f, f1, f2) = model.force_derivatives(x).ok_or(Error::UnsupportedDimension(model.dimension()))?;
    let next = x + f * dt + noise.dw + f1 * noise.dz + 0.5 * dt * dt * (f * f1 + f2 / model.beta());
    if !next.is_finite() {
        return Err(Error::NumericalBlowup { time: f64::NAN });
    }
    Ok(next)
}

/// Draws the noise for one step and advances the state.
#[derive(Clone, Copy)]
struct Stepper<'a, D: ?Sized> {
    model: &'a D,
    kind: SchemeKind,
    dt: f64,
    beta: f64,
    amp: f64,
    two_d: bool,
}

impl<'a, D: Dynamics + ?Sized> Stepper<'a, D> {
    fn new(model: &'a D, scheme: IntegratorScheme) -> Self {
        let beta = model.beta();
        Stepper {
            model,
            kind: scheme.kind,
            dt: scheme.dt,
            beta,
            amp: (2.0 * scheme.dt / beta).sqrt(),
            two_d: model.dimension() == 2,
        }
    }

    #[inline(always)]
    fn step(&self, x: State, rng: &mut ChaCha8Rng) -> State {
        match self.kind {
            SchemeKind::Euler => {
                let f = self.model.force(x);
                let u1: f64 = rng.sample(StandardNormal);
                if self.two_d {
                    let u2: f64 = rng.sample(StandardNormal);
                    State::new(x.x + f.x * self.dt + self.amp * u1, x.y + f.y * self.dt + self.amp * u2)
                } else {
                    State::scalar(x.x + f.x * self.dt + self.amp * u1)
                }
            }
            SchemeKind::Order15 => {
                let u1: f64 = rng.sample(StandardNormal);
                let u2: f64 = rng.sample(StandardNormal);
                let noise = NoiseIncrements::from_normals(u1, u2, self.dt, self.beta);
                let (f, f1, f2) = self.model.force_derivatives(x.x).unwrap_or((f64::NAN, 0.0, 0.0));
                let dt = self.dt;
                State::scalar(x.x + f * dt + noise.dw + f1 * noise.dz + 0.5 * dt * dt * (f * f1 + f2 / self.beta))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    HitA,
    HitB,
    Running,
}

/// Storage and step-budget options for trajectory simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Steps between stored checkpoints; 1 stores every state.
    pub checkpoint_interval: usize,
    pub max_steps: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { checkpoint_interval: 32, max_steps: 1_000_000_000 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Checkpoint {
    state: State,
    word_pos: u128,
}

/// Where and how a segment starts.
#[derive(Clone, Copy, Debug)]
pub struct SegmentStart {
    pub state: State,
    /// Absolute path time of the first state.
    pub time: f64,
    /// Whether the first state counts towards the maximum and the branch
    /// search. It does not for a start on C, nor for a branch point that is
    /// already the last state of the inherited prefix.
    pub searchable: bool,
    /// Whether landing in A at the first state absorbs the path.
    pub absorb_a: bool,
}

/// One simulated piece of path, from its start until absorption.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: State,
    pub time_offset: f64,
    pub dt: f64,
    pub stream: StreamId,
    pub first_searchable: usize,
    pub interval: usize,
    /// Number of stored time points, including the start.
    pub len: usize,
    pub end: State,
    pub outcome: Outcome,
    /// Maximum ranking score over the searchable states.
    pub q_max: f64,
    checkpoints: Vec<Checkpoint>,
    block_max: Vec<f64>,
}

/// Ranking score of a state, with absorbing states in B lifted to at least 1
/// so they always outrank unabsorbed states.
#[inline]
fn ranked(phi: &ReactionCoordinate, sets: &Sets, s: State) -> f64 {
    let q = phi.score(s);
    if sets.in_b(s) {
        q.max(1.0)
    } else {
        q
    }
}

/// Everything needed to simulate and replay segments of one problem.
pub struct Simulator<'a, D: Dynamics + ?Sized> {
    stepper: Stepper<'a, D>,
    phi: &'a ReactionCoordinate,
    sets: &'a Sets,
    streams: &'a StreamFactory,
    opts: SimOptions,
    monotone: bool,
}

impl<'a, D: Dynamics + ?Sized> Simulator<'a, D> {
    pub fn new(
        model: &'a D,
        phi: &'a ReactionCoordinate,
        sets: &'a Sets,
        scheme: IntegratorScheme,
        streams: &'a StreamFactory,
        opts: SimOptions,
    ) -> Result<Self> {
        scheme.validate(model)?;
        if opts.checkpoint_interval == 0 {
            return Err(Error::InvalidConfig("checkpoint interval must be at least 1".into()));
        }
        Ok(Simulator { stepper: Stepper::new(model, scheme), phi, sets, streams, opts, monotone: phi.monotone_in_x() })
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt
    }

    pub fn phi(&self) -> &ReactionCoordinate {
        self.phi
    }

    pub fn sets(&self) -> &Sets {
        self.sets
    }

    #[inline]
    pub fn ranked(&self, s: State) -> f64 {
        ranked(self.phi, self.sets, s)
    }

    /// Simulate from `start` until the path enters A or B.
    pub fn run_segment(&self, start: SegmentStart, stream: StreamId) -> Result<Segment> {
        let interval = self.opts.checkpoint_interval;
        let first_searchable = if start.searchable { 0 } else { 1 };
        let mut rng = self.streams.stream(stream);
        let mut seg = Segment {
            start: start.state,
            time_offset: start.time,
            dt: self.stepper.dt,
            stream,
            first_searchable,
            interval,
            len: 1,
            end: start.state,
            outcome: Outcome::Running,
            q_max: f64::NEG_INFINITY,
            checkpoints: Vec::new(),
            block_max: Vec::new(),
        };
        let mut x = start.state;
        seg.checkpoints.push(Checkpoint { state: x, word_pos: rng.get_word_pos() });
        // running block maximum: of x for monotone coordinates, of the score otherwise
        let mut acc = f64::NEG_INFINITY;
        let mut acc_b = f64::NEG_INFINITY;
        if start.searchable {
            acc = self.block_key(x);
        }
        let at_start = if self.sets.in_b(x) {
            Some(Outcome::HitB)
        } else if start.absorb_a && self.sets.in_a(x) {
            Some(Outcome::HitA)
        } else {
            None
        };
        if let Some(o) = at_start {
            if o == Outcome::HitB {
                acc_b = self.ranked(x);
            }
            seg.outcome = o;
            self.close_block(&mut seg, acc, acc_b);
            return Ok(seg);
        }
        let max_steps = self.opts.max_steps;
        let mut steps: u64 = 0;
        loop {
            if steps > 0 && steps as usize % interval == 0 {
                self.close_block(&mut seg, acc, f64::NEG_INFINITY);
                acc = f64::NEG_INFINITY;
                seg.checkpoints.push(Checkpoint { state: x, word_pos: rng.get_word_pos() });
            }
            if steps >= max_steps {
                return Err(Error::StepBudgetExhausted { max_steps, last_state: [x.x, x.y], steps });
            }
            x = self.stepper.step(x, &mut rng);
            steps += 1;
            if !x.is_finite() {
                return Err(Error::NumericalBlowup { time: start.time + steps as f64 * self.stepper.dt });
            }
            if self.sets.in_b(x) {
                acc_b = self.ranked(x);
                seg.outcome = Outcome::HitB;
            } else if self.sets.in_a(x) {
                seg.outcome = Outcome::HitA;
            }
            acc = acc.max(self.block_key(x));
            if seg.outcome != Outcome::Running {
                break;
            }
        }
        seg.len = steps as usize + 1;
        seg.end = x;
        self.close_block(&mut seg, acc, acc_b);
        Ok(seg)
    }

    #[inline(always)]
    fn block_key(&self, x: State) -> f64 {
        if self.monotone {
            x.x
        } else {
            self.phi.score(x)
        }
    }

    fn close_block(&self, seg: &mut Segment, acc: f64, acc_b: f64) {
        let mut m = if acc == f64::NEG_INFINITY {
            acc
        } else if self.monotone {
            self.phi.score(State::scalar(acc))
        } else {
            acc
        };
        m = m.max(acc_b);
        seg.block_max.push(m);
        seg.q_max = seg.q_max.max(m);
    }

    /// Regenerate the states of block `b` of a segment.
    pub fn replay_block(&self, seg: &Segment, b: usize) -> Vec<State> {
        let cp = seg.checkpoints[b];
        let lo = b * seg.interval;
        let hi = ((b + 1) * seg.interval).min(seg.len - 1);
        let mut rng = self.streams.stream_at(seg.stream, cp.word_pos);
        let mut out = Vec::with_capacity(hi - lo + 1);
        let mut x = cp.state;
        out.push(x);
        for _ in lo..hi {
            x = self.stepper.step(x, &mut rng);
            out.push(x);
        }
        out
    }

    /// State at local index `k`.
    pub fn state_at(&self, seg: &Segment, k: usize) -> State {
        let b = k / seg.interval;
        self.replay_block(seg, b)[k - b * seg.interval]
    }

    /// All states of a segment, in order.
    pub fn segment_states(&self, seg: &Segment) -> Vec<State> {
        let mut out = Vec::with_capacity(seg.len);
        for b in 0..seg.checkpoints.len() {
            let block = self.replay_block(seg, b);
            let skip = if b == 0 { 0 } else { 1 };
            out.extend_from_slice(&block[skip..]);
        }
        out.truncate(seg.len);
        out
    }

    /// First local index in `[seg.first_searchable, upto]` whose ranking score
    /// is at least `level`, with that state.
    pub fn first_at_least(&self, seg: &Segment, upto: usize, level: f64) -> Option<(usize, State)> {
        let last_block = upto / seg.interval;
        for b in 0..=last_block.min(seg.block_max.len() - 1) {
            if seg.block_max[b] < level {
                continue;
            }
            let states = self.replay_block(seg, b);
            let lo = b * seg.interval;
            for (off, &s) in states.iter().enumerate() {
                let k = lo + off;
                if k < seg.first_searchable {
                    continue;
                }
                if k > upto {
                    break;
                }
                if self.ranked(s) >= level {
                    return Some((k, s));
                }
            }
        }
        None
    }
}

/// Ancestry-inclusive path: inherited pieces `(segment, last index kept)`
/// followed by the trajectory's own segment.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub id: u64,
    /// Parent id and branch time.
    pub parent: Option<(u64, f64)>,
    pub prefix: Vec<(Arc<Segment>, usize)>,
    pub own: Arc<Segment>,
    pub q_max: f64,
}

impl Trajectory {
    pub fn root(id: u64, seg: Segment) -> Self {
        let q_max = seg.q_max;
        Trajectory { id, parent: None, prefix: Vec::new(), own: Arc::new(seg), q_max }
    }

    pub fn outcome(&self) -> Outcome {
        self.own.outcome
    }

    pub fn start(&self) -> State {
        self.prefix.first().map(|p| p.0.start).unwrap_or(self.own.start)
    }

    pub fn own_duration(&self) -> f64 {
        (self.own.len - 1) as f64 * self.own.dt
    }

    pub fn total_duration(&self) -> f64 {
        self.own.time_offset + self.own_duration()
    }

    /// Number of steps simulated for the own segment.
    pub fn own_steps(&self) -> u64 {
        (self.own.len - 1) as u64
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&Arc<Segment>, usize)> {
        self.prefix.iter().map(|(s, u)| (s, *u)).chain(std::iter::once((&self.own, self.own.len - 1)))
    }

    /// Full path as `(time, state)` pairs, regenerated from the checkpoints.
    pub fn path<D: Dynamics + ?Sized>(&self, sim: &Simulator<'_, D>) -> Vec<(f64, State)> {
        let mut out: Vec<(f64, State)> = Vec::new();
        for (seg, upto) in self.pieces() {
            let states = sim.segment_states(seg);
            let skip = usize::from(!out.is_empty() && seg.first_searchable == 1);
            for (k, &s) in states.iter().enumerate().take(upto + 1).skip(skip) {
                out.push((seg.time_offset + k as f64 * seg.dt, s));
            }
        }
        out
    }
}

/// Simulate one trajectory from `start` (a point of C) to absorption.
pub fn simulate_to_absorption(
    start: State,
    problem: &ProblemSpec,
    scheme: IntegratorScheme,
    streams: &StreamFactory,
    stream: StreamId,
    opts: SimOptions,
) -> Result<Trajectory> {
    let sim = Simulator::new(&problem.model, &problem.phi, &problem.sets, scheme, streams, opts)?;
    let seg = sim.run_segment(SegmentStart { state: start, time: 0.0, searchable: false, absorb_a: false }, stream)?;
    Ok(Trajectory::root(stream.index(), seg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::committor;
    use crate::models::{Coordinate1d, SdeModel};
    use crate::rng::StreamKind;
    use rand::SeedableRng;

    #[test]
    fn euler_examples() {
        let free = SdeModel::drift(0.0, 1.0).unwrap();
        assert_eq!(euler_step(State::scalar(1.0), &free, 0.1, State::default()).unwrap().x, 1.0);
        let drift = SdeModel::drift(0.3, 1.0).unwrap();
        let x = euler_step(State::scalar(1.0), &drift, 0.01, State::default()).unwrap().x;
        assert!((x - 0.997).abs() < 1e-15);
        let dw = SdeModel::double_well(1.0).unwrap();
        assert_eq!(euler_step(State::scalar(0.0), &dw, 0.37, State::default()).unwrap().x, 0.0);
    }

    #[test]
    fn order15_examples() {
        let free = SdeModel::drift(0.0, 1.0).unwrap();
        assert_eq!(order15_step(1.0, &free, 0.1, NoiseIncrements::zero()).unwrap(), 1.0);
        let dw = SdeModel::double_well(1.0).unwrap();
        // F = 1.5, F' = 1, F'' = -24 x = -12
        let x = order15_step(0.5, &dw, 0.01, NoiseIncrements::zero()).unwrap();
        assert!((x - (0.5 + 0.015 + 0.00005 * (1.5 - 12.0))).abs() < 1e-15);
        assert!((x - 0.514475).abs() < 1e-12);
        let tw = SdeModel::triple_well(1.0).unwrap();
        assert!(matches!(order15_step(0.0, &tw, 0.01, NoiseIncrements::zero()), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn order15_reduces_to_euler_for_constant_force() {
        let drift = SdeModel::drift(0.7, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u1: f64 = rng.sample(StandardNormal);
            let u2: f64 = rng.sample(StandardNormal);
            let x: f64 = rng.random_range(-2.0..2.0);
            let n = NoiseIncrements::from_normals(u1, u2, 0.01, 2.0);
            let a = order15_step(x, &drift, 0.01, n).unwrap();
            let b = euler_step(State::scalar(x), &drift, 0.01, State::scalar(n.dw)).unwrap().x;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_noise_keeps_minima_fixed() {
        let dw = SdeModel::double_well(1.0).unwrap();
        for x0 in [-1.0, 1.0] {
            assert_eq!(euler_step(State::scalar(x0), &dw, 0.01, State::default()).unwrap().x, x0);
            // only the curvature correction moves a noiseless step off a minimum
            let moved = order15_step(x0, &dw, 0.01, NoiseIncrements::zero()).unwrap();
            assert!((moved - (x0 - 12.0 * x0 * 1e-4)).abs() < 1e-15);
        }
        assert_eq!(order15_step(0.0, &dw, 0.01, NoiseIncrements::zero()).unwrap(), 0.0);
        let ts = SdeModel::two_saddles(1.0).unwrap();
        let s = euler_step(State::new(1.0, 0.0), &ts, 0.01, State::default()).unwrap();
        assert_eq!(s, State::new(1.0, 0.0));
    }

    #[test]
    fn noise_moments() {
        let (dt, beta) = (0.01, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let m = 2_000_000;
        let (mut w, mut z, mut ww, mut zz, mut wz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..m {
            let n = NoiseIncrements::from_normals(rng.sample(StandardNormal), rng.sample(StandardNormal), dt, beta);
            w += n.dw;
            z += n.dz;
            ww += n.dw * n.dw;
            zz += n.dz * n.dz;
            wz += n.dw * n.dz;
        }
        let m = m as f64;
        let (vw, vz, cwz) = (2.0 * dt / beta, 2.0 * dt.powi(3) / (3.0 * beta), dt * dt / beta);
        assert!((w / m).abs() < 5.0 * (vw / m).sqrt());
        assert!((z / m).abs() < 5.0 * (vz / m).sqrt());
        assert!((ww / m / vw - 1.0).abs() < 0.01);
        assert!((zz / m / vz - 1.0).abs() < 0.01);
        assert!((wz / m / cwz - 1.0).abs() < 0.01);
    }

    fn dw_problem(beta: f64) -> ProblemSpec {
        ProblemSpec::double_well(beta, Coordinate1d::Linear).unwrap()
    }

    #[test]
    fn start_in_b_is_absorbed_immediately() {
        let p = dw_problem(1.0);
        let f = StreamFactory::new(1);
        let t = simulate_to_absorption(
            State::scalar(1.2),
            &p,
            IntegratorScheme::euler(1e-3),
            &f,
            StreamId::new(0, StreamKind::Path, 0),
            SimOptions::default(),
        )
        .unwrap();
        assert_eq!(t.outcome(), Outcome::HitB);
        assert_eq!(t.own_duration(), 0.0);
    }

    #[test]
    fn step_budget_is_reported() {
        let p = dw_problem(1.0);
        let f = StreamFactory::new(1);
        let opts = SimOptions { max_steps: 10, ..SimOptions::default() };
        let r = simulate_to_absorption(
            State::scalar(0.0),
            &p,
            IntegratorScheme::euler(1e-6),
            &f,
            StreamId::new(0, StreamKind::Path, 0),
            opts,
        );
        assert!(matches!(r, Err(Error::StepBudgetExhausted { steps: 10, .. })));
    }

    #[test]
    fn strong_drift_almost_always_returns_to_a() {
        let p = ProblemSpec::drift(40.0, 1.0, Coordinate1d::Linear).unwrap();
        let f = StreamFactory::new(5);
        for i in 0..200 {
            let t = simulate_to_absorption(
                State::scalar(1.0),
                &p,
                IntegratorScheme::euler(1e-3),
                &f,
                StreamId::new(0, StreamKind::Path, i),
                SimOptions::default(),
            )
            .unwrap();
            assert_eq!(t.outcome(), Outcome::HitA);
        }
    }

    #[test]
    fn double_well_hit_fraction_matches_quadrature() {
        let p = dw_problem(1.0);
        let f = StreamFactory::new(2024);
        let m = 10_000;
        let hits = (0..m)
            .filter(|&i| {
                simulate_to_absorption(
                    State::scalar(-0.9),
                    &p,
                    IntegratorScheme::euler(1e-4),
                    &f,
                    StreamId::new(0, StreamKind::Path, i),
                    SimOptions::default(),
                )
                .unwrap()
                .outcome()
                    == Outcome::HitB
            })
            .count();
        let q = committor::committor_1d_quadrature(-0.9, &p.model, -1.0, 1.0).unwrap();
        let frac = hits as f64 / m as f64;
        let se = (q * (1.0 - q) / m as f64).sqrt();
        assert!((frac - q).abs() < 3.0 * se + 0.1 * (1e-4f64).sqrt() * q, "{frac} vs {q}");
    }

    #[test]
    fn replay_and_full_storage_agree() {
        let p = ProblemSpec::two_d(SdeModel::triple_well(2.0).unwrap(), crate::models::Coordinate2d::Norm).unwrap();
        let f = StreamFactory::new(9);
        let id = StreamId::new(0, StreamKind::Path, 3);
        let start = State::new(-0.9, 0.0);
        let scheme = IntegratorScheme::euler(1e-3);
        let full = Simulator::new(&p.model, &p.phi, &p.sets, scheme, &f, SimOptions { checkpoint_interval: 1, max_steps: u64::MAX })
            .unwrap();
        let sparse = Simulator::new(&p.model, &p.phi, &p.sets, scheme, &f, SimOptions::default()).unwrap();
        let st = SegmentStart { state: start, time: 0.0, searchable: false, absorb_a: false };
        let a = full.run_segment(st, id).unwrap();
        let b = sparse.run_segment(st, id).unwrap();
        assert_eq!(a.len, b.len);
        assert_eq!(a.end, b.end);
        assert_eq!(a.q_max, b.q_max);
        let sa = full.segment_states(&a);
        let sb = sparse.segment_states(&b);
        assert_eq!(sa, sb);
        assert_eq!(sa.len(), a.len);
        assert_eq!(*sa.last().unwrap(), a.end);
        let brute = sa[1..].iter().map(|&s| sparse.ranked(s)).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(brute, a.q_max);
        for k in [0, 1, a.len / 2, a.len - 1] {
            assert_eq!(sparse.state_at(&b, k), sa[k]);
        }
    }
}
