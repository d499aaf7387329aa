//! Simulated distributed execution. Each rank is a scoped thread that owns a
//! contiguous block of time points and talks to the others only through
//! point-to-point channels.

mod comm;
mod groups;
mod layout;

use std::collections::BTreeMap;
use std::thread;
use std::time::{Duration, Instant};

use crate::app::Application;
use crate::error::{Error, Result};
use crate::grids::Hierarchy;
use crate::solver::transport::{Transport, WindowItem};
use crate::solver::{ConvergenceReport, Engine, LevelState, SolverConfig, SpaceTimeState};
use crate::state::Vector;

pub use comm::MessageFault;
pub use groups::CommGroups;
pub use layout::{build_layout, RankLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeOptions {
    pub workers: usize,
    /// How long a rank waits for any single message.
    pub timeout: Duration,
    pub fault: Option<MessageFault>,
}

impl RuntimeOptions {
    pub fn new(workers: usize) -> Self {
        RuntimeOptions {
            workers,
            timeout: Duration::from_secs(60),
            fault: None,
        }
    }
}

/// Picks the error that best explains a failed run: a problem error over a
/// communication error, and a timeout over its knock-on disconnects.
fn root_cause(errors: Vec<Error>) -> Error {
    let mut runtime = Vec::new();
    for e in errors {
        match e {
            Error::Runtime { .. } => runtime.push(e),
            other => return other,
        }
    }
    let timeout = runtime
        .iter()
        .position(|e| matches!(e, Error::Runtime { message, .. } if message.contains("timed out")));
    runtime.swap_remove(timeout.unwrap_or(0))
}

fn join_all<T>(results: Vec<thread::Result<Result<T>>>) -> Result<Vec<T>> {
    let mut ok = Vec::new();
    let mut errors = Vec::new();
    for (rank, r) in results.into_iter().enumerate() {
        match r {
            Ok(Ok(v)) => ok.push(v),
            Ok(Err(e)) => errors.push(e),
            Err(_) => errors.push(Error::Runtime {
                rank,
                peer: None,
                message: "worker panicked".into(),
            }),
        }
    }
    if errors.is_empty() {
        Ok(ok)
    } else {
        Err(root_cause(errors))
    }
}

struct RankResult<S> {
    levels: Vec<LevelState<S>>,
    outcome: Option<crate::solver::Outcome>,
    records: Vec<crate::solver::TimingRecord>,
    relax_steps: u64,
}

/// Runs the solver on `opts.workers` simulated ranks. The residual history is
/// bit-identical to the sequential driver for every worker count.
pub fn run_parallel<A: Application>(
    app: &A,
    h: &Hierarchy,
    cfg: &SolverConfig,
    opts: &RuntimeOptions,
) -> Result<(SpaceTimeState<A::State>, ConvergenceReport)> {
    cfg.check(app, h)?;
    let layout = build_layout(h, opts.workers)?;
    let groups = CommGroups::new(h.coarsest_points(), h.k());
    let start = Instant::now();
    let transports = comm::connect::<A::State>(&layout, &groups, opts.timeout, opts.fault);
    let results = thread::scope(|s| {
        let handles: Vec<_> = transports
            .into_iter()
            .map(|t| {
                let layout = &layout;
                s.spawn(move || {
                    let engine = Engine::new(app, h, cfg, layout, &t);
                    let (levels, outcome) = engine.run(None)?;
                    Ok(RankResult {
                        levels,
                        outcome: (t.rank() == 0).then_some(outcome),
                        records: engine.timing_records(),
                        relax_steps: engine.relax_steps(),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect::<Vec<_>>()
    });
    let mut ranks = join_all(results)?;
    let elapsed = start.elapsed().as_secs_f64();

    let outcome = ranks[0].outcome.take().expect("rank 0 reports its outcome");
    let mut levels: Vec<LevelState<A::State>> = (0..h.num_levels())
        .map(|_| LevelState {
            offset: 0,
            u: Vec::new(),
            g: Vec::new(),
            v: Vec::new(),
        })
        .collect();
    let mut records = Vec::new();
    let mut relax_steps = Vec::new();
    for rank in ranks {
        for (merged, part) in levels.iter_mut().zip(rank.levels) {
            merged.u.extend(part.u);
            merged.g.extend(part.g);
            merged.v.extend(part.v);
        }
        records.extend(rank.records);
        relax_steps.push(rank.relax_steps);
    }
    let report = ConvergenceReport::assemble(outcome, elapsed, records, relax_steps);
    Ok((SpaceTimeState { levels }, report))
}

/// Result of distributing one scalar per coarsest point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeOutcome {
    /// Values held by each rank afterwards, keyed by coarsest point.
    pub held: Vec<BTreeMap<usize, f64>>,
    /// Total messages sent in the first and second round.
    pub round_messages: [usize; 2],
}

/// Distributes `values[p]` (owned by the rank of point `p`) so that every
/// rank ends up with the values of its local grids, using the two-round
/// group scheme over real channels.
pub fn exchange_residuals(
    layout: &RankLayout,
    groups: &CommGroups,
    values: &[f64],
    opts: &RuntimeOptions,
) -> Result<ExchangeOutcome> {
    let n = layout.coarsest_owner().len();
    if values.len() != n {
        return Err(Error::InvalidDimension(format!(
            "{} values for {n} coarsest points",
            values.len()
        )));
    }
    let transports = comm::connect::<Vector>(layout, groups, opts.timeout, opts.fault);
    let results = thread::scope(|s| {
        let handles: Vec<_> = transports
            .into_iter()
            .map(|t| {
                s.spawn(move || {
                    let own = layout
                        .coarse_block(t.rank())
                        .map(|p| {
                            let v = Vector::from_vec(vec![values[p]]);
                            (p, WindowItem { seed: v.clone(), rhs: v })
                        })
                        .collect();
                    let held = t.gather_windows(own)?;
                    Ok((
                        held.into_iter().map(|(p, item)| (p, item.rhs[0])).collect(),
                        t.round_messages(),
                    ))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect::<Vec<_>>()
    });
    let ranks: Vec<(BTreeMap<usize, f64>, [usize; 2])> = join_all(results)?;
    let mut round_messages = [0; 2];
    for (_, counts) in &ranks {
        round_messages[0] += counts[0];
        round_messages[1] += counts[1];
    }
    Ok(ExchangeOutcome {
        held: ranks.into_iter().map(|(h, _)| h).collect(),
        round_messages,
    })
}
