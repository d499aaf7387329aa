//! Cycle implementation shared by the sequential driver and the simulated
//! ranks. Every method works on the block of points this rank owns.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Instant;

use crate::app::{Application, ForcingConvention, Norm, StepInfo};
use crate::error::{Error, Result};
use crate::grids::Hierarchy;
use crate::runtime::RankLayout;
use crate::state::{mix_seed, tree_sum, StateVector};

use super::transport::{Transport, WindowItem};
use super::{CycleMode, InitialGuess, LevelState, Relaxation, SolverConfig, TimingRecord};

pub(crate) struct Outcome {
    pub initial_residual: f64,
    pub norms: Vec<f64>,
    pub iteration_seconds: Vec<f64>,
    pub converged: bool,
}

pub(crate) struct Engine<'a, A: Application, T> {
    app: &'a A,
    h: &'a Hierarchy,
    cfg: &'a SolverConfig,
    layout: &'a RankLayout,
    comm: &'a T,
    relax_steps: Cell<u64>,
    iteration: Cell<usize>,
    times: RefCell<BTreeMap<(usize, &'static str), f64>>,
}

impl<'a, A, T> Engine<'a, A, T>
where
    A: Application,
    T: Transport<A::State>,
{
    pub fn new(
        app: &'a A,
        h: &'a Hierarchy,
        cfg: &'a SolverConfig,
        layout: &'a RankLayout,
        comm: &'a T,
    ) -> Self {
        Engine {
            app,
            h,
            cfg,
            layout,
            comm,
            relax_steps: Cell::new(0),
            iteration: Cell::new(0),
            times: RefCell::new(BTreeMap::new()),
        }
    }

    fn rank(&self) -> usize {
        self.comm.rank()
    }

    /// Level-0 time steps taken by F- and C-relaxation on this rank so far.
    pub fn relax_steps(&self) -> u64 {
        self.relax_steps.get()
    }

    pub fn timing_records(&self) -> Vec<TimingRecord> {
        self.times
            .borrow()
            .iter()
            .map(|(&(iter, phase), &seconds)| TimingRecord {
                iter,
                rank: self.rank(),
                phase,
                seconds,
            })
            .collect()
    }

    fn timed<R>(&self, phase: &'static str, f: impl FnOnce() -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let out = f();
        *self
            .times
            .borrow_mut()
            .entry((self.iteration.get(), phase))
            .or_default() += start.elapsed().as_secs_f64();
        out
    }

    /// `Φ_i` on `level`; on the coarsest level of a multilevel hierarchy this
    /// is `Ψ`, optionally evaluated with `coarse_substeps` smaller steps.
    pub fn phi(&self, level: usize, i: usize, u: &A::State) -> Result<A::State> {
        let grid = self.h.level(level);
        let substeps = if level > 0 && level == self.h.coarsest_level() {
            self.cfg.coarse_substeps
        } else {
            1
        };
        if substeps == 1 {
            let info = StepInfo {
                level,
                index: i,
                t: grid.point(i),
                dt: grid.dt(),
            };
            return self.app.step(&info, u);
        }
        let t0 = grid.point(i - 1);
        let dt = grid.dt() / substeps as f64;
        let mut x = u.clone();
        for s in 1..=substeps {
            let t = if s == substeps {
                grid.point(i)
            } else {
                t0 + s as f64 * dt
            };
            x = self.app.step(&StepInfo { level, index: i, t, dt }, &x)?;
        }
        Ok(x)
    }

    fn phi_forced(
        &self,
        level: usize,
        i: usize,
        u: &A::State,
        g: Option<&A::State>,
    ) -> Result<A::State> {
        let mut x = self.phi(level, i, u)?;
        if let Some(g) = g {
            x.add_assign(g);
        }
        Ok(x)
    }

    fn count_relax(&self, level: usize) {
        if level == 0 {
            self.relax_steps.set(self.relax_steps.get() + 1);
        }
    }

    fn halo(&self, values: &[A::State]) -> Result<Option<A::State>> {
        self.comm.shift_right(values.last())
    }

    pub fn f_relax(&self, level: usize, ls: &mut LevelState<A::State>) -> Result<()> {
        let m = self.h.factor(level);
        for li in 0..ls.u.len() {
            let i = ls.offset + li;
            if i % m == 0 {
                continue;
            }
            let next = self.phi_forced(level, i, &ls.u[li - 1], ls.g[li].as_ref())?;
            self.count_relax(level);
            ls.u[li] = next;
        }
        Ok(())
    }

    pub fn c_relax(&self, level: usize, ls: &mut LevelState<A::State>) -> Result<()> {
        let left = self.halo(&ls.u)?;
        let m = self.h.factor(level);
        for li in 0..ls.u.len() {
            let i = ls.offset + li;
            if i == 0 || i % m != 0 {
                continue;
            }
            let prev = if li == 0 {
                left.as_ref().expect("left neighbour sends its last point")
            } else {
                &ls.u[li - 1]
            };
            let next = self.phi_forced(level, i, prev, ls.g[li].as_ref())?;
            self.count_relax(level);
            ls.u[li] = next;
        }
        Ok(())
    }

    pub fn relax(&self, level: usize, ls: &mut LevelState<A::State>) -> Result<()> {
        self.timed("relax", || {
            self.f_relax(level, ls)?;
            if let Relaxation::Fcf(nu) = self.cfg.relaxation {
                for _ in 0..nu {
                    self.c_relax(level, ls)?;
                    self.f_relax(level, ls)?;
                }
            }
            Ok(())
        })
    }

    fn residual_at(
        &self,
        level: usize,
        ls: &LevelState<A::State>,
        left: Option<&A::State>,
        li: usize,
    ) -> Result<A::State> {
        let i = ls.offset + li;
        let mut r = if i == 0 {
            match &ls.g[li] {
                Some(g) => g.clone(),
                None => {
                    let mut z = ls.u[li].clone();
                    z.fill(0.0);
                    z
                }
            }
        } else {
            let prev = if li == 0 {
                left.expect("left neighbour sends its last point")
            } else {
                &ls.u[li - 1]
            };
            self.phi_forced(level, i, prev, ls.g[li].as_ref())?
        };
        r.sub_assign(&ls.u[li]);
        Ok(r)
    }

    /// `r = g - A(u)` at every owned point.
    pub fn residual(&self, level: usize, ls: &LevelState<A::State>) -> Result<Vec<A::State>> {
        let left = self.halo(&ls.u)?;
        (0..ls.u.len())
            .map(|li| self.residual_at(level, ls, left.as_ref(), li))
            .collect()
    }

    fn c_locals(&self, level: usize, ls: &LevelState<A::State>) -> Vec<usize> {
        let m = self.h.factor(level);
        (0..ls.u.len())
            .filter(|li| (ls.offset + li) % m == 0)
            .collect()
    }

    /// Residual at the owned C-points, in coarse-grid order.
    fn c_residual(&self, level: usize, ls: &LevelState<A::State>) -> Result<Vec<A::State>> {
        let left = self.halo(&ls.u)?;
        self.c_locals(level, ls)
            .into_iter()
            .map(|li| self.residual_at(level, ls, left.as_ref(), li))
            .collect()
    }

    fn inject(&self, level: usize, ls: &LevelState<A::State>) -> Vec<A::State> {
        self.c_locals(level, ls)
            .into_iter()
            .map(|li| ls.u[li].clone())
            .collect()
    }

    /// FAS right-hand side `A(v) + rr` on `level` for the owned block.
    fn fas_rhs(
        &self,
        level: usize,
        offset: usize,
        v: &[A::State],
        rr: &[A::State],
    ) -> Result<Vec<A::State>> {
        let left = self.halo(v)?;
        let mut out = Vec::with_capacity(v.len());
        for (j, (vj, rj)) in v.iter().zip(rr).enumerate() {
            let i = offset + j;
            let mut g = vj.clone();
            if i > 0 {
                let prev = if j == 0 {
                    left.as_ref().expect("left neighbour sends its last point")
                } else {
                    &v[j - 1]
                };
                g.sub_assign(&self.phi(level, i, prev)?);
            }
            g.add_assign(rj);
            out.push(g);
        }
        Ok(out)
    }

    /// Solves every owned local grid of the coarsest level and returns the
    /// value at each owner point.
    fn coarse_solve(
        &self,
        items: BTreeMap<usize, WindowItem<A::State>>,
    ) -> Result<Vec<A::State>> {
        let items = self.timed("exchange", || self.comm.gather_windows(items))?;
        let owned = self.layout.coarse_block(self.rank());
        self.timed("coarse", || self.window_solves(owned, &items))
    }

    pub fn window_solves(
        &self,
        owned: Range<usize>,
        items: &BTreeMap<usize, WindowItem<A::State>>,
    ) -> Result<Vec<A::State>> {
        let level = self.h.coarsest_level();
        let k = self.h.k();
        let item = |j: usize| {
            items.get(&j).ok_or_else(|| Error::Runtime {
                rank: self.rank(),
                peer: None,
                message: format!("window item for coarse point {j} was not delivered"),
            })
        };
        let mut out = Vec::with_capacity(owned.len());
        // Windows that start at the initial point share their prefix sweep.
        let mut prefix: Option<(usize, A::State)> = None;
        for p in owned {
            let start = (p + 1).saturating_sub(k);
            let (mut j, mut x) = match prefix.take() {
                Some(pv) if start == 0 => pv,
                _ => (start, item(start)?.seed.clone()),
            };
            while j < p {
                j += 1;
                x = self.phi(level, j, &x)?;
                x.add_assign(&item(j)?.rhs);
            }
            if start == 0 {
                prefix = Some((j, x.clone()));
            }
            out.push(x);
        }
        Ok(out)
    }

    /// One FAS V-cycle starting at `level`.
    pub fn vcycle(&self, levels: &mut [LevelState<A::State>], level: usize) -> Result<()> {
        let coarsest = self.h.coarsest_level();
        debug_assert!(level < coarsest);
        self.relax(level, &mut levels[level])?;
        let rr = self.timed("residual", || self.c_residual(level, &levels[level]))?;
        let v = self.inject(level, &levels[level]);
        let offset = self.layout.block(self.rank(), level + 1).start;
        if level + 1 == coarsest {
            let g = self.timed("residual", || self.fas_rhs(level + 1, offset, &v, &rr))?;
            let items = v
                .iter()
                .zip(rr)
                .zip(g)
                .enumerate()
                .map(|(j, ((vj, mut rj), gj))| {
                    rj.add_assign(vj);
                    (offset + j, WindowItem { seed: rj, rhs: gj })
                })
                .collect();
            let u = self.coarse_solve(items)?;
            let coarse = &mut levels[level + 1];
            coarse.offset = offset;
            coarse.u = u;
            coarse.g.clear();
        } else {
            let g = self.timed("residual", || self.fas_rhs(level + 1, offset, &v, &rr))?;
            let coarse = &mut levels[level + 1];
            coarse.offset = offset;
            coarse.u = v.clone();
            coarse.g = g.into_iter().map(Some).collect();
            self.vcycle(levels, level + 1)?;
        }
        levels[level + 1].v = v;
        self.correct(levels, level)
    }

    /// `u += P(u_c - v)`: inject the coarse change at C-points, then F-relax.
    fn correct(&self, levels: &mut [LevelState<A::State>], level: usize) -> Result<()> {
        let (fine, coarse) = levels.split_at_mut(level + 1);
        let fine = &mut fine[level];
        let coarse = &coarse[0];
        for (j, li) in self.c_locals(level, fine).into_iter().enumerate() {
            let mut e = coarse.u[j].clone();
            e.sub_assign(&coarse.v[j]);
            fine.u[li].add_assign(&e);
        }
        self.timed("interp", || self.f_relax(level, fine))
    }

    /// One iteration of the two-level linear-correction scheme.
    pub fn two_level(&self, levels: &mut [LevelState<A::State>]) -> Result<()> {
        self.relax(0, &mut levels[0])?;
        let rr = self.timed("residual", || self.c_residual(0, &levels[0]))?;
        let offset = self.layout.block(self.rank(), 1).start;
        let items = rr
            .into_iter()
            .enumerate()
            .map(|(j, r)| {
                (
                    offset + j,
                    WindowItem {
                        seed: r.clone(),
                        rhs: r,
                    },
                )
            })
            .collect();
        let c = self.coarse_solve(items)?;
        let fine = &mut levels[0];
        for (j, li) in self.c_locals(0, fine).into_iter().enumerate() {
            fine.u[li].add_assign(&c[j]);
        }
        self.timed("interp", || self.f_relax(0, fine))
    }

    fn guess_value(&self, fine_index: usize, provided: Option<&[A::State]>) -> A::State {
        if let Some(values) = provided {
            return values[fine_index].clone();
        }
        let mut z = self.app.zero();
        match self.cfg.initial_guess {
            InitialGuess::Random { seed } => z.fill_random(mix_seed(seed, fine_index as u64)),
            InitialGuess::Constant(c) => z.fill(c),
            InitialGuess::Replicate => z = self.app.initial_condition(),
        }
        z
    }

    /// Owned block of `level` holding the initial guess and the true
    /// right-hand side `g_0 = u(t_0)`, `g_i` from the application.
    pub fn build_level(
        &self,
        level: usize,
        provided: Option<&[A::State]>,
    ) -> Result<LevelState<A::State>> {
        let block = self.layout.block(self.rank(), level);
        let stride: usize = self.h.factors()[..level].iter().product();
        let grid = self.h.level(level);
        let ic = self.app.initial_condition();
        let explicit = self.app.forcing_convention() == ForcingConvention::Explicit;
        let mut u = Vec::with_capacity(block.len());
        let mut g = Vec::with_capacity(block.len());
        for i in block.clone() {
            if i == 0 {
                u.push(ic.clone());
                g.push(Some(ic.clone()));
                continue;
            }
            u.push(self.guess_value(i * stride, provided));
            g.push(if explicit {
                let info = StepInfo {
                    level,
                    index: i,
                    t: grid.point(i),
                    dt: grid.dt(),
                };
                self.app.forcing(&info)?
            } else {
                None
            });
        }
        Ok(LevelState {
            offset: block.start,
            u,
            g,
            v: Vec::new(),
        })
    }

    pub fn empty_level(&self, level: usize) -> LevelState<A::State> {
        LevelState {
            offset: self.layout.block(self.rank(), level).start,
            u: Vec::new(),
            g: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Levels prepared by [`Self::build_level`] are overwritten with the
    /// nested-iteration guess: local-grid solve on the coarsest level, then
    /// interpolation and one V-cycle per intermediate level.
    pub fn nested_init(&self, levels: &mut [LevelState<A::State>]) -> Result<()> {
        let coarsest = self.h.coarsest_level();
        let c = &levels[coarsest];
        let left = self.halo(&c.u)?;
        let mut items = BTreeMap::new();
        for j in 0..c.u.len() {
            let i = c.offset + j;
            let rhs = c.g[j].clone().unwrap_or_else(|| self.app.zero());
            let seed = if i == 0 {
                rhs.clone()
            } else {
                let prev = if j == 0 {
                    left.as_ref().expect("left neighbour sends its last point")
                } else {
                    &c.u[j - 1]
                };
                let mut s = self.phi(coarsest, i, prev)?;
                s.add_assign(&rhs);
                s
            };
            items.insert(i, WindowItem { seed, rhs });
        }
        levels[coarsest].u = self.coarse_solve(items)?;
        for level in (0..coarsest).rev() {
            let (fine, coarse) = levels.split_at_mut(level + 1);
            let fine = &mut fine[level];
            for (j, li) in self.c_locals(level, fine).into_iter().enumerate() {
                fine.u[li] = coarse[0].u[j].clone();
            }
            self.timed("interp", || self.f_relax(level, fine))?;
            if level > 0 {
                self.vcycle(levels, level)?;
            }
        }
        Ok(())
    }

    pub fn space_time_norm(&self, ls: &LevelState<A::State>) -> Result<f64> {
        self.timed("norm", || {
            let local: Vec<f64> = self
                .residual(0, ls)?
                .iter()
                .map(|r| r.norm_sq())
                .collect();
            let all = self.comm.all_gather(local)?;
            Ok(tree_sum(&all).sqrt())
        })
    }

    fn c_functionals(&self, ls: &LevelState<A::State>) -> Result<Vec<f64>> {
        self.c_locals(0, ls)
            .into_iter()
            .map(|li| {
                self.app.functional(&ls.u[li]).ok_or_else(|| {
                    Error::Config("the problem does not define a functional".into())
                })
            })
            .collect()
    }

    fn functional_change(&self, prev: &[f64], cur: &[f64]) -> Result<f64> {
        let local: Vec<f64> = prev
            .iter()
            .zip(cur)
            .map(|(&a, &b)| {
                let d = (b - a).abs();
                if b != 0.0 {
                    d / b.abs()
                } else {
                    d
                }
            })
            .collect();
        let all = self.comm.all_gather(local)?;
        Ok(all.into_iter().fold(0.0, f64::max))
    }

    /// Initial guess (or nested iteration) followed by cycles until the
    /// stopping test passes or `max_iters` is reached.
    pub fn run(
        &self,
        provided: Option<&[A::State]>,
    ) -> Result<(Vec<LevelState<A::State>>, Outcome)> {
        let num_levels = self.h.num_levels();
        self.iteration.set(0);
        let mut levels = if self.cfg.mode == CycleMode::NestedVCycle {
            let mut levels = (0..num_levels)
                .map(|l| self.build_level(l, provided))
                .collect::<Result<Vec<_>>>()?;
            self.nested_init(&mut levels)?;
            levels
        } else {
            let mut levels = vec![self.build_level(0, provided)?];
            levels.extend((1..num_levels).map(|l| self.empty_level(l)));
            levels
        };

        let initial_residual = self.space_time_norm(&levels[0])?;
        if !initial_residual.is_finite() {
            return Err(Error::Divergence { iteration: 0 });
        }
        let mut functionals = match self.cfg.norm {
            Norm::FunctionalChange => Some(self.c_functionals(&levels[0])?),
            Norm::SpaceTimeResidual => None,
        };

        let mut norms = Vec::new();
        let mut iteration_seconds = Vec::new();
        let mut converged = false;
        for it in 1..=self.cfg.max_iters {
            self.iteration.set(it);
            let start = Instant::now();
            match self.cfg.mode {
                CycleMode::TwoLevel => self.two_level(&mut levels)?,
                CycleMode::VCycle | CycleMode::NestedVCycle => self.vcycle(&mut levels, 0)?,
            }
            let norm = match functionals.as_mut() {
                None => self.space_time_norm(&levels[0])?,
                Some(prev) => {
                    let cur = self.timed("norm", || self.c_functionals(&levels[0]))?;
                    let change = self.functional_change(prev, &cur)?;
                    *prev = cur;
                    change
                }
            };
            iteration_seconds.push(start.elapsed().as_secs_f64());
            if !norm.is_finite() {
                return Err(Error::Divergence { iteration: it });
            }
            log::debug!("rank {} iteration {it}: norm {norm:.6e}", self.rank());
            norms.push(norm);
            if norm <= self.cfg.tol {
                converged = true;
                break;
            }
        }
        Ok((
            levels,
            Outcome {
                initial_residual,
                norms,
                iteration_seconds,
                converged,
            },
        ))
    }
}
