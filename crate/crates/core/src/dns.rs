//! Direct Monte-Carlo estimate of the crossing probability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{ProblemSpec, State};
use crate::rng::{StreamFactory, StreamId, StreamKind};
use crate::sde::{IntegratorScheme, Outcome, SegmentStart, SimOptions, Simulator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnsRecord {
    pub alpha: f64,
    pub std_err: f64,
    pub samples: u64,
    pub hits_a: u64,
    pub hits_b: u64,
    /// Durations of the trajectories that reached B, in sample order.
    pub durations: Vec<f64>,
    /// Set when no sample reached B, so the estimate carries no information.
    pub zero_hit: bool,
    pub seed: u64,
    pub steps: u64,
}

impl DnsRecord {
    pub fn mean_duration(&self) -> Option<f64> {
        (!self.durations.is_empty()).then(|| self.durations.iter().sum::<f64>() / self.durations.len() as f64)
    }
}

/// Simulate `samples` independent trajectories from C to absorption.
/// Trajectory `i` draws its start from stream `(realization, Direct, i)` and
/// its noise from `(realization, Path, i)`, so the result does not depend on
/// how work is scheduled.
pub fn dns_run(
    problem: &ProblemSpec,
    scheme: IntegratorScheme,
    samples: u64,
    master_seed: u64,
    realization: u64,
    opts: SimOptions,
) -> Result<DnsRecord> {
    let streams = StreamFactory::new(master_seed);
    let sim = Simulator::new(&problem.model, &problem.phi, &problem.sets, scheme, &streams, opts)?;
    let one = |i: u64| -> Result<(Outcome, f64, u64)> {
        let id = StreamId::new(realization, StreamKind::Direct, i);
        let start: State = problem.sampler.sample(&mut streams.stream(id));
        let path = StreamId::new(realization, StreamKind::Path, i);
        let seg = sim.run_segment(SegmentStart { state: start, time: 0.0, searchable: false, absorb_a: false }, path)?;
        let steps = (seg.len - 1) as u64;
        Ok((seg.outcome, steps as f64 * seg.dt, steps))
    };
    let results: Vec<(Outcome, f64, u64)> = (0..samples).into_par_iter().map(one).collect::<Result<_>>()?;
    let hits_b = results.iter().filter(|r| r.0 == Outcome::HitB).count() as u64;
    let alpha = if samples == 0 { 0.0 } else { hits_b as f64 / samples as f64 };
    Ok(DnsRecord {
        alpha,
        std_err: if samples == 0 { 0.0 } else { (alpha * (1.0 - alpha) / samples as f64).sqrt() },
        samples,
        hits_a: samples - hits_b,
        hits_b,
        durations: results.iter().filter(|r| r.0 == Outcome::HitB).map(|r| r.1).collect(),
        zero_hit: hits_b == 0,
        seed: master_seed,
        steps: results.iter().map(|r| r.2).sum(),
    })
}
