//! Adaptive multilevel splitting with `N` clones, killing `n` per iteration.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dynamics, ProblemSpec, State};
use crate::rng::{StreamFactory, StreamId, StreamKind};
use crate::sde::{IntegratorScheme, Outcome, SchemeKind, SegmentStart, SimOptions, Simulator, Trajectory};

/// Sub-steps per time step used by the Brownian-bridge refinement.
pub const BRIDGE_SUBSTEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsConfig {
    /// Number of clones `N`.
    pub n_clones: usize,
    /// Number killed per iteration `n`.
    pub n_killed: usize,
    pub scheme: IntegratorScheme,
    pub master_seed: u64,
    /// Realization index; selects an independent family of streams.
    pub realization: u64,
    pub max_iterations: u64,
    /// Refine branch points with a Brownian bridge (1-D, Euler only).
    /// Scores are still maxima over grid points, so a child started on the
    /// level is often killed again with almost no progress; at coarse steps
    /// this biases the estimate low.
    pub brownian_bridge: bool,
    pub sim: SimOptions,
    /// Simulate the `n` children of an iteration on the rayon pool.
    pub parallel_branches: bool,
}

impl AmsConfig {
    pub fn new(n_clones: usize, n_killed: usize, scheme: IntegratorScheme, master_seed: u64) -> Self {
        AmsConfig {
            n_clones,
            n_killed,
            scheme,
            master_seed,
            realization: 0,
            max_iterations: 100_000_000,
            brownian_bridge: false,
            sim: SimOptions::default(),
            parallel_branches: false,
        }
    }

    pub fn with_realization(mut self, realization: u64) -> Self {
        self.realization = realization;
        self
    }

    pub fn validate(&self, problem: &ProblemSpec) -> Result<()> {
        if self.n_clones < 2 || self.n_killed < 1 || self.n_killed >= self.n_clones {
            return Err(Error::InvalidConfig(format!(
                "need N >= 2 and 1 <= n <= N - 1, got N = {}, n = {}",
                self.n_clones, self.n_killed
            )));
        }
        if self.brownian_bridge {
            if problem.dimension() != 1 {
                return Err(Error::UnsupportedDimension(problem.dimension()));
            }
            if self.scheme.kind != SchemeKind::Euler {
                return Err(Error::InvalidConfig("the Brownian bridge requires the Euler scheme".into()));
            }
        }
        self.scheme.validate(&problem.model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsOutcome {
    pub alpha_hat: f64,
    /// Completed iterations `K`.
    pub k: u64,
    /// Clones in B at the end.
    pub r: u64,
    pub n_clones: usize,
    pub n_killed: usize,
    pub levels: Vec<f64>,
    /// Durations, from the start on C, of the reactive clones.
    pub durations: Vec<f64>,
    pub extinction: bool,
    pub seed: u64,
    pub realization: u64,
    pub init_steps: u64,
    pub branch_steps: u64,
    #[serde(skip)]
    pub wall_clock: f64,
}

impl AmsOutcome {
    pub fn mean_duration(&self) -> Option<f64> {
        (!self.durations.is_empty()).then(|| self.durations.iter().sum::<f64>() / self.durations.len() as f64)
    }
}

/// `(r/N) (1 - n/N)^K`.
pub fn alpha_estimate(r: u64, n_clones: usize, n_killed: usize, k: u64) -> f64 {
    let nn = n_clones as f64;
    (r as f64 / nn) * (1.0 - n_killed as f64 / nn).powf(k as f64)
}

#[derive(Clone, Copy, Debug)]
struct Key {
    q: f64,
    id: u64,
    slot: usize,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.q.total_cmp(&other.q).then(self.id.cmp(&other.id)).then(self.slot.cmp(&other.slot))
    }
}

/// First point of an ancestry-inclusive path at or above a level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoint {
    /// Index into the path pieces (prefix pieces first, own segment last).
    pub piece: usize,
    /// Local index within that piece's segment.
    pub index: usize,
    pub time: f64,
    pub state: State,
    pub score: f64,
}

/// `t* = inf{t : Φ(X_t) >= level}` on the stored path of `survivor`.
pub fn branch_point<D: Dynamics + ?Sized>(sim: &Simulator<'_, D>, survivor: &Trajectory, level: f64) -> Result<BranchPoint> {
    for (p, (seg, upto)) in survivor.pieces().enumerate() {
        if let Some((index, state)) = sim.first_at_least(seg, upto, level) {
            return Ok(BranchPoint {
                piece: p,
                index,
                time: seg.time_offset + index as f64 * seg.dt,
                state,
                score: sim.ranked(state),
            });
        }
    }
    Err(Error::InternalInconsistency { level, q_max: survivor.q_max })
}

/// First crossing of `reached` along a Brownian bridge from `left` (time
/// `t_left`) to `right` (time `t_left + dt`) with diffusion `2/beta`, sampled
/// at `dt / substeps`. Returns `(time, position)`.
#[allow(clippy::too_many_arguments)]
pub fn bridge_crossing<R: Rng + ?Sized>(
    left: f64,
    right: f64,
    t_left: f64,
    dt: f64,
    beta: f64,
    substeps: usize,
    reached: impl Fn(f64) -> bool,
    rng: &mut R,
) -> (f64, f64) {
    if reached(left) {
        return (t_left, left);
    }
    let h = dt / substeps as f64;
    let sigma2 = 2.0 / beta;
    let mut x = left;
    for j in 1..substeps {
        let rem = (substeps - j + 1) as f64 * h;
        let mean = x + (right - x) * h / rem;
        let var = sigma2 * h * (rem - h) / rem;
        let xi: f64 = rng.sample(StandardNormal);
        x = mean + var.sqrt() * xi;
        if reached(x) {
            return (t_left + j as f64 * h, x);
        }
    }
    (t_left + dt, right)
}

/// Refine the branch point of `survivor` at `level` with a Brownian bridge
/// between the last state below the level and the first one at or above it.
/// Returns the refined `(t*, x*)` together with the unrefined branch point.
pub fn brownian_bridge_refine<D: Dynamics + ?Sized>(
    sim: &Simulator<'_, D>,
    survivor: &Trajectory,
    level: f64,
    beta: f64,
    dimension: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, State, BranchPoint)> {
    if dimension != 1 {
        return Err(Error::UnsupportedDimension(dimension));
    }
    let bp = branch_point(sim, survivor, level)?;
    if bp.index == 0 {
        return Ok((bp.time, bp.state, bp));
    }
    let (seg, _) = survivor.pieces().nth(bp.piece).expect("branch piece exists");
    let prev = sim.state_at(seg, bp.index - 1);
    let (t, x) = bridge_crossing(
        prev.x,
        bp.state.x,
        bp.time - seg.dt,
        seg.dt,
        beta,
        BRIDGE_SUBSTEPS,
        |x| sim.ranked(State::scalar(x)) >= level,
        rng,
    );
    Ok((t, State::scalar(x), bp))
}

struct Child {
    slot: usize,
    id: u64,
    parent: u64,
    level: f64,
    prefix: Vec<(Arc<crate::sde::Segment>, usize)>,
    start: SegmentStart,
    inherited: f64,
}

/// Run one AMS realization.
pub fn ams_run(problem: &ProblemSpec, cfg: &AmsConfig) -> Result<AmsOutcome> {
    cfg.validate(problem)?;
    let clock = Instant::now();
    let streams = StreamFactory::new(cfg.master_seed);
    let sim = Simulator::new(&problem.model, &problem.phi, &problem.sets, cfg.scheme, &streams, cfg.sim)?;
    let real = cfg.realization;
    let big_n = cfg.n_clones;
    let n = cfg.n_killed;

    let mut start_rng = streams.stream(StreamId::new(real, StreamKind::Start, 0));
    let starts: Vec<State> = (0..big_n).map(|_| problem.sampler.sample(&mut start_rng)).collect();
    let run_root = |i: usize| -> Result<Trajectory> {
        let st = SegmentStart { state: starts[i], time: 0.0, searchable: false, absorb_a: false };
        let seg = sim.run_segment(st, StreamId::new(real, StreamKind::Path, i as u64))?;
        Ok(Trajectory::root(i as u64, seg))
    };
    let mut pop: Vec<Trajectory> = if cfg.parallel_branches {
        (0..big_n).into_par_iter().map(run_root).collect::<Result<_>>()?
    } else {
        (0..big_n).map(run_root).collect::<Result<_>>()?
    };
    let init_steps: u64 = pop.iter().map(Trajectory::own_steps).sum();
    let mut branch_steps = 0u64;

    let mut keys: BTreeSet<Key> = pop.iter().enumerate().map(|(slot, t)| Key { q: t.q_max, id: t.id, slot }).collect();
    let mut in_b = pop.iter().filter(|t| t.outcome() == Outcome::HitB).count();
    let mut levels = Vec::new();
    let mut next_id = big_n as u64;
    let mut select_rng = streams.stream(StreamId::new(real, StreamKind::Selection, 0));
    let mut k: u64 = 0;
    let mut extinction = false;

    while big_n - in_b >= n {
        let lowest = *keys.first().expect("population is never empty");
        let highest = *keys.last().expect("population is never empty");
        if in_b == 0 && lowest.q == highest.q {
            extinction = true;
            break;
        }
        if k >= cfg.max_iterations {
            return Err(Error::IterationBudgetExhausted(cfg.max_iterations));
        }
        let killed: Vec<Key> = (0..n).map(|_| keys.pop_first().expect("n < N")).collect();
        levels.push(killed[n - 1].q);
        let mut killed_slots: Vec<usize> = killed.iter().map(|kk| kk.slot).collect();
        killed_slots.sort_unstable();
        // survivor picks, all drawn before any child is simulated
        let picks: Vec<usize> = (0..n)
            .map(|_| {
                let mut j = select_rng.random_range(0..big_n - n);
                for &s in &killed_slots {
                    if s <= j {
                        j += 1;
                    }
                }
                j
            })
            .collect();

        let mut children = Vec::with_capacity(n);
        for (victim, &pick) in killed.iter().zip(&picks) {
            let survivor = &pop[pick];
            let id = next_id;
            next_id += 1;
            let child = if cfg.brownian_bridge {
                let mut rng = streams.stream(StreamId::new(real, StreamKind::Bridge, id));
                let (t, x, bp) = brownian_bridge_refine(&sim, survivor, victim.q, problem.model.beta, 1, &mut rng)?;
                let mut prefix: Vec<_> = survivor.pieces().take(bp.piece).map(|(s, u)| (s.clone(), u)).collect();
                let (seg, _) = survivor.pieces().nth(bp.piece).expect("branch piece exists");
                if bp.index == 0 {
                    Child {
                        slot: victim.slot,
                        id,
                        parent: survivor.id,
                        level: victim.q,
                        prefix: {
                            prefix.push((seg.clone(), 0));
                            prefix
                        },
                        start: SegmentStart { state: x, time: t, searchable: false, absorb_a: true },
                        inherited: bp.score,
                    }
                } else {
                    prefix.push((seg.clone(), bp.index - 1));
                    Child {
                        slot: victim.slot,
                        id,
                        parent: survivor.id,
                        level: victim.q,
                        prefix,
                        start: SegmentStart { state: x, time: t, searchable: true, absorb_a: true },
                        inherited: f64::NEG_INFINITY,
                    }
                }
            } else {
                let bp = branch_point(&sim, survivor, victim.q)?;
                let mut prefix: Vec<_> = survivor.pieces().take(bp.piece).map(|(s, u)| (s.clone(), u)).collect();
                let (seg, _) = survivor.pieces().nth(bp.piece).expect("branch piece exists");
                prefix.push((seg.clone(), bp.index));
                Child {
                    slot: victim.slot,
                    id,
                    parent: survivor.id,
                    level: victim.q,
                    prefix,
                    start: SegmentStart { state: bp.state, time: bp.time, searchable: false, absorb_a: true },
                    inherited: bp.score,
                }
            };
            children.push(child);
        }

        let simulate = |c: Child| -> Result<(usize, Trajectory)> {
            let seg = sim.run_segment(c.start, StreamId::new(real, StreamKind::Path, c.id))?;
            let q_max = c.inherited.max(seg.q_max);
            if !(q_max >= c.level) {
                return Err(Error::InternalInconsistency { level: c.level, q_max });
            }
            let t = Trajectory { id: c.id, parent: Some((c.parent, c.start.time)), prefix: c.prefix, own: Arc::new(seg), q_max };
            Ok((c.slot, t))
        };
        let born: Vec<(usize, Trajectory)> = if cfg.parallel_branches && n > 1 {
            children.into_par_iter().map(simulate).collect::<Result<_>>()?
        } else {
            children.into_iter().map(simulate).collect::<Result<_>>()?
        };
        for (slot, t) in born {
            branch_steps += t.own_steps();
            if t.outcome() == Outcome::HitB {
                in_b += 1;
            }
            keys.insert(Key { q: t.q_max, id: t.id, slot });
            pop[slot] = t;
        }
        k += 1;
    }

    let r = if extinction { 0 } else { in_b as u64 };
    let alpha_hat = if extinction { 0.0 } else { alpha_estimate(r, big_n, n, k) };
    let durations = pop.iter().filter(|t| t.outcome() == Outcome::HitB).map(Trajectory::total_duration).collect();
    Ok(AmsOutcome {
        alpha_hat,
        k,
        r,
        n_clones: big_n,
        n_killed: n,
        levels,
        durations,
        extinction,
        seed: cfg.master_seed,
        realization: real,
        init_steps,
        branch_steps,
        wall_clock: clock.elapsed().as_secs_f64(),
    })
}
