//! Relaxation, residuals, local coarse-grid solves and the AT-MGRIT cycles.
//!
//! The two-level mode is a linear residual-correction scheme and needs a
//! problem with explicit forcing. The V-cycle modes use FAS and accept both
//! forcing conventions. With `k >= N_T + 1` every local grid is the full
//! coarsest grid and the iterations are those of Parareal/MGRIT.

mod engine;
pub(crate) mod transport;

use std::collections::BTreeMap;
use std::time::Instant;

use crate::app::{Application, ForcingConvention, Norm};
use crate::error::{Error, Result};
use crate::grids::{Hierarchy, LocalCoarseGrid};
use crate::runtime::{build_layout, RankLayout};

pub(crate) use engine::{Engine, Outcome};
pub use transport::WindowItem;
use transport::Serial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleMode {
    /// Two-level linear correction with local coarse grids.
    TwoLevel,
    /// Recursive FAS V-cycles.
    #[default]
    VCycle,
    /// Nested-iteration initial guess followed by FAS V-cycles.
    NestedVCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Relaxation {
    #[default]
    F,
    /// F-relaxation followed by `ν` CF-relaxations.
    Fcf(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialGuess {
    /// Per-point pseudorandom values; point `i` is seeded from `(seed, i)`.
    Random { seed: u64 },
    Constant(f64),
    /// Copy of the initial condition at every point.
    Replicate,
}

impl Default for InitialGuess {
    fn default() -> Self {
        InitialGuess::Constant(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: CycleMode,
    pub relaxation: Relaxation,
    pub max_iters: usize,
    /// Absolute tolerance on the selected norm.
    pub tol: f64,
    pub norm: Norm,
    pub initial_guess: InitialGuess,
    /// Number of smaller steps used for each coarsest-level step.
    pub coarse_substeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: CycleMode::default(),
            relaxation: Relaxation::default(),
            max_iters: 100,
            tol: 1e-7,
            norm: Norm::default(),
            initial_guess: InitialGuess::default(),
            coarse_substeps: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.relaxation == Relaxation::Fcf(0) {
            return Err(Error::Config("FCF relaxation needs nu >= 1".into()));
        }
        if self.coarse_substeps == 0 {
            return Err(Error::Config("coarse_substeps must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Checks the configuration against a problem and hierarchy.
    pub fn check<A: Application>(&self, app: &A, h: &Hierarchy) -> Result<()> {
        self.validate()?;
        if app.vector_size() == 0 {
            return Err(Error::InvalidDimension("vector_size must be >= 1".into()));
        }
        if self.mode == CycleMode::TwoLevel {
            if h.num_levels() != 2 {
                return Err(Error::Config(format!(
                    "two-level mode needs a two-level hierarchy, got {} levels",
                    h.num_levels()
                )));
            }
            if app.forcing_convention() != ForcingConvention::Explicit {
                return Err(Error::Config(
                    "two-level linear correction needs a problem with explicit forcing".into(),
                ));
            }
        }
        if self.norm == Norm::FunctionalChange && app.functional(&app.initial_condition()).is_none()
        {
            return Err(Error::Config(
                "functional-change norm needs a problem that defines a functional".into(),
            ));
        }
        Ok(())
    }
}

/// Values of one level on the block of points held by a rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelState<S> {
    /// Global index of `u[0]`.
    pub offset: usize,
    pub u: Vec<S>,
    /// Right-hand side; `None` is zero. On coarse levels this holds the FAS
    /// right-hand side `A(v) + R(g - A(u))`.
    pub g: Vec<Option<S>>,
    /// Restricted fine approximation (coarse levels only).
    pub v: Vec<S>,
}

impl<S> LevelState<S> {
    /// Whole-level state with zero right-hand side.
    pub fn new(u: Vec<S>) -> Self {
        let g = u.iter().map(|_| None).collect();
        LevelState {
            offset: 0,
            u,
            g,
            v: Vec::new(),
        }
    }

    pub fn with_rhs(u: Vec<S>, g: Vec<Option<S>>) -> Self {
        assert_eq!(u.len(), g.len(), "u and g must have equal length");
        LevelState {
            offset: 0,
            u,
            g,
            v: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeState<S> {
    pub levels: Vec<LevelState<S>>,
}

impl<S> SpaceTimeState<S> {
    /// Fine-grid approximation.
    pub fn fine(&self) -> &[S] {
        &self.levels[0].u
    }

    pub fn into_fine(mut self) -> Vec<S> {
        std::mem::take(&mut self.levels[0].u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
}

/// Wall time spent by `rank` in `phase` during iteration `iter` (0 is setup).
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub iter: usize,
    pub rank: usize,
    pub phase: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Norm after each iteration.
    pub residual_norms: Vec<f64>,
    /// Space-time residual norm of the initial guess.
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Wall time of each iteration, including the stopping test.
    pub iteration_seconds: Vec<f64>,
    pub total_seconds: f64,
    /// Seconds per phase summed over iterations on rank 0.
    pub timings: BTreeMap<String, f64>,
    pub records: Vec<TimingRecord>,
    /// Level-0 time steps spent in relaxation, per rank.
    pub relax_steps: Vec<u64>,
}

impl ConvergenceReport {
    pub(crate) fn assemble(
        outcome: Outcome,
        total_seconds: f64,
        records: Vec<TimingRecord>,
        relax_steps: Vec<u64>,
    ) -> Self {
        let mut timings = BTreeMap::new();
        for r in records.iter().filter(|r| r.rank == 0) {
            *timings.entry(r.phase.to_string()).or_insert(0.0) += r.seconds;
        }
        let iterations = outcome.norms.len();
        ConvergenceReport {
            residual_norms: outcome.norms,
            initial_residual: outcome.initial_residual,
            iterations,
            converged: outcome.converged,
            stop_reason: if outcome.converged {
                StopReason::Converged
            } else {
                StopReason::MaxIterations
            },
            iteration_seconds: outcome.iteration_seconds,
            total_seconds,
            timings,
            records,
            relax_steps,
        }
    }
}

/// Injection: every `m`-th entry starting with the first.
pub fn restrict_injection<T: Clone>(values: &[T], m: usize) -> Result<Vec<T>> {
    if m < 2 {
        return Err(Error::Config(format!(
            "coarsening factor must be > 1, got {m}"
        )));
    }
    Ok(values.iter().step_by(m).cloned().collect())
}

/// Sequential AT-MGRIT solver over a fixed problem and hierarchy.
pub struct Solver<'a, A: Application> {
    app: &'a A,
    h: &'a Hierarchy,
    cfg: &'a SolverConfig,
    layout: RankLayout,
}

impl<'a, A: Application> Solver<'a, A> {
    pub fn new(app: &'a A, h: &'a Hierarchy, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.check(app, h)?;
        Ok(Solver {
            app,
            h,
            cfg,
            layout: build_layout(h, 1)?,
        })
    }

    fn engine(&self) -> Engine<'_, A, Serial> {
        Engine::new(self.app, self.h, self.cfg, &self.layout, &Serial)
    }

    fn check_level(&self, level: usize, ls: &LevelState<A::State>) -> Result<()> {
        if level >= self.h.num_levels() {
            return Err(Error::Config(format!("level {level} is out of range")));
        }
        let n = self.h.level(level).n_points();
        if ls.offset != 0 || ls.u.len() != n || ls.g.len() != n {
            return Err(Error::InvalidDimension(format!(
                "level {level} has {n} points; state holds {} values from offset {}",
                ls.u.len(),
                ls.offset
            )));
        }
        Ok(())
    }

    fn check_relax_level(&self, level: usize, ls: &LevelState<A::State>) -> Result<()> {
        self.check_level(level, ls)?;
        if level + 1 >= self.h.num_levels() {
            return Err(Error::Config(format!(
                "level {level} has no CF-splitting"
            )));
        }
        Ok(())
    }

    /// `u_i = Φ_i(u_{i-1}) + g_i` at every F-point, interval by interval.
    pub fn f_relax(&self, level: usize, ls: &mut LevelState<A::State>) -> Result<()> {
        self.check_relax_level(level, ls)?;
        self.engine().f_relax(level, ls)
    }

    /// C-relaxation followed by F-relaxation.
    pub fn cf_relax(&self, level: usize, ls: &mut LevelState<A::State>) -> Result<()> {
        self.check_relax_level(level, ls)?;
        let e = self.engine();
        e.c_relax(level, ls)?;
        e.f_relax(level, ls)
    }

    /// `r_0 = g_0 - u_0`, `r_i = g_i - u_i + Φ_i(u_{i-1})`.
    pub fn residual(&self, level: usize, ls: &LevelState<A::State>) -> Result<Vec<A::State>> {
        self.check_level(level, ls)?;
        self.engine().residual(level, ls)
    }

    /// Forward solve on the local grid owned by coarsest point `p`: the first
    /// point takes `seed`, each following point `j` is `Ψ(u_{j-1}) + rhs`.
    /// `rhs` lists the right-hand sides of the points after the first.
    pub fn solve_local_grid(
        &self,
        p: usize,
        seed: &A::State,
        rhs: &[A::State],
    ) -> Result<A::State> {
        if p >= self.h.coarsest_points() {
            return Err(Error::Config(format!("coarse point {p} is out of range")));
        }
        let grid: LocalCoarseGrid = self.h.local_grid(p);
        if rhs.len() + 1 != grid.len() {
            return Err(Error::InvalidDimension(format!(
                "local grid {p} has {} points; got {} right-hand sides",
                grid.len(),
                rhs.len()
            )));
        }
        let mut items = BTreeMap::new();
        for (pos, j) in grid.indices().enumerate() {
            let value = if pos == 0 { seed } else { &rhs[pos - 1] };
            items.insert(
                j,
                WindowItem {
                    seed: value.clone(),
                    rhs: value.clone(),
                },
            );
        }
        let mut out = self.engine().window_solves(p..p + 1, &items)?;
        Ok(out.pop().expect("one owned point"))
    }

    /// Initial guess on the fine level; coarse levels are left empty.
    pub fn initial_state(&self) -> Result<SpaceTimeState<A::State>> {
        self.state_from(None)
    }

    /// Fine-level state built from a user-provided guess; the first value is
    /// replaced by the initial condition.
    pub fn initial_state_from(&self, guess: &[A::State]) -> Result<SpaceTimeState<A::State>> {
        self.check_guess(guess)?;
        self.state_from(Some(guess))
    }

    fn check_guess(&self, guess: &[A::State]) -> Result<()> {
        let n = self.h.level(0).n_points();
        if guess.len() != n {
            return Err(Error::InvalidDimension(format!(
                "initial guess has {} points, the fine grid {n}",
                guess.len()
            )));
        }
        Ok(())
    }

    fn state_from(&self, provided: Option<&[A::State]>) -> Result<SpaceTimeState<A::State>> {
        let e = self.engine();
        let mut levels = vec![e.build_level(0, provided)?];
        levels.extend((1..self.h.num_levels()).map(|l| e.empty_level(l)));
        Ok(SpaceTimeState { levels })
    }

    /// One iteration of the two-level linear-correction scheme.
    pub fn two_level_iterate(&self, state: &mut SpaceTimeState<A::State>) -> Result<()> {
        if self.h.num_levels() != 2
            || self.app.forcing_convention() != ForcingConvention::Explicit
        {
            return Err(Error::Config(
                "two-level iteration needs two levels and explicit forcing".into(),
            ));
        }
        self.check_level(0, &state.levels[0])?;
        self.engine().two_level(&mut state.levels)
    }

    /// One FAS V-cycle from the finest level.
    pub fn multilevel_iterate(&self, state: &mut SpaceTimeState<A::State>) -> Result<()> {
        self.check_level(0, &state.levels[0])?;
        self.engine().vcycle(&mut state.levels, 0)
    }

    /// Nested-iteration initial guess, using the configured guess on the
    /// coarsest level.
    pub fn nested_iteration_init(&self) -> Result<SpaceTimeState<A::State>> {
        let e = self.engine();
        let mut levels = (0..self.h.num_levels())
            .map(|l| e.build_level(l, None))
            .collect::<Result<Vec<_>>>()?;
        e.nested_init(&mut levels)?;
        Ok(SpaceTimeState { levels })
    }

    /// Discrete 2-norm of the fine space-time residual.
    pub fn space_time_residual_norm(&self, state: &SpaceTimeState<A::State>) -> Result<f64> {
        self.check_level(0, &state.levels[0])?;
        self.engine().space_time_norm(&state.levels[0])
    }

    pub fn solve(&self) -> Result<(SpaceTimeState<A::State>, ConvergenceReport)> {
        self.run(None)
    }

    /// Like [`Self::solve`] but starting from `guess` on the fine grid. With
    /// nested iteration the guess is injected onto the coarser levels.
    pub fn solve_from(
        &self,
        guess: &[A::State],
    ) -> Result<(SpaceTimeState<A::State>, ConvergenceReport)> {
        self.check_guess(guess)?;
        self.run(Some(guess))
    }

    fn run(
        &self,
        provided: Option<&[A::State]>,
    ) -> Result<(SpaceTimeState<A::State>, ConvergenceReport)> {
        let start = Instant::now();
        let e = self.engine();
        let (levels, outcome) = e.run(provided)?;
        let report = ConvergenceReport::assemble(
            outcome,
            start.elapsed().as_secs_f64(),
            e.timing_records(),
            vec![e.relax_steps()],
        );
        Ok((SpaceTimeState { levels }, report))
    }
}

/// Sequential solve; see [`Solver`].
pub fn solve<A: Application>(
    app: &A,
    h: &Hierarchy,
    cfg: &SolverConfig,
) -> Result<(SpaceTimeState<A::State>, ConvergenceReport)> {
    Solver::new(app, h, cfg)?.solve()
}
