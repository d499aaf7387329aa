//! Temporal grid hierarchies, CF-splittings and truncated local coarse grids.

use std::ops::{Range, RangeInclusive};

use crate::error::{Error, Result};

/// Uniform temporal grid `t_i = t0 + i·dt`, `i = 0..n_points`.
///
/// Coarse grids keep a reference to the finest spacing so that their points
/// coincide exactly with the corresponding fine-grid times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    fine_dt: f64,
    stride: usize,
    n_points: usize,
}

impl TimeGrid {
    /// Grid on `[t0, tf]` with `n_points` points (`n_points - 1` intervals).
    pub fn new(t0: f64, tf: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Config(format!(
                "a time grid needs at least 2 points, got {n_points}"
            )));
        }
        let dt = (tf - t0) / (n_points - 1) as f64;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!(
                "time interval [{t0}, {tf}] must have tf > t0"
            )));
        }
        Ok(TimeGrid {
            t0,
            fine_dt: dt,
            stride: 1,
            n_points,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.point(self.n_points - 1)
    }

    pub fn dt(&self) -> f64 {
        self.stride as f64 * self.fine_dt
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of intervals `N_t`.
    pub fn intervals(&self) -> usize {
        self.n_points - 1
    }

    pub fn point(&self, i: usize) -> f64 {
        self.t0 + (i * self.stride) as f64 * self.fine_dt
    }

    /// Grid of every `m`-th point.
    fn coarsen(&self, m: usize) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            fine_dt: self.fine_dt,
            stride: self.stride * m,
            n_points: self.intervals() / m + 1,
        }
    }
}

/// C-points and F-intervals of one level under coarsening factor `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfSplitting {
    pub m: usize,
    pub c_points: Vec<usize>,
    /// Maximal runs of F-points, each directly following a C-point. Empty
    /// runs (a C-point at the last index) are omitted.
    pub f_intervals: Vec<Range<usize>>,
}

impl CfSplitting {
    pub fn new(n_points: usize, m: usize) -> Self {
        let c_points: Vec<usize> = (0..n_points).step_by(m).collect();
        let f_intervals = c_points
            .iter()
            .map(|&c| (c + 1)..(c + m).min(n_points))
            .filter(|r| !r.is_empty())
            .collect();
        CfSplitting {
            m,
            c_points,
            f_intervals,
        }
    }
}

/// Window `[max(0, p-k+1), p]` of the global coarsest grid owned by point `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalCoarseGrid {
    pub owner: usize,
    pub start: usize,
}

impl LocalCoarseGrid {
    pub fn new(p: usize, k: usize) -> Self {
        debug_assert!(k >= 1);
        LocalCoarseGrid {
            owner: p,
            start: (p + 1).saturating_sub(k),
        }
    }

    pub fn indices(&self) -> RangeInclusive<usize> {
        self.start..=self.owner
    }

    pub fn len(&self) -> usize {
        self.owner - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices().contains(&i)
    }
}

/// Multilevel temporal hierarchy. Level 0 is the finest; the last level is
/// the global coarse grid that AT-MGRIT replaces by local grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    levels: Vec<TimeGrid>,
    factors: Vec<usize>,
    k: usize,
}

/// Builds the hierarchy for coarsening factors `m` (one per coarsening) and
/// local-grid distance `k`.
pub fn build_hierarchy(grid: TimeGrid, m: &[usize], k: usize) -> Result<Hierarchy> {
    if m.is_empty() {
        return Err(Error::Config(
            "at least one coarsening factor is required".into(),
        ));
    }
    if let Some(bad) = m.iter().find(|&&f| f < 2) {
        return Err(Error::Config(format!(
            "coarsening factors must be > 1, got {bad}"
        )));
    }
    if k == 0 {
        return Err(Error::Config("local grid distance k must be >= 1".into()));
    }
    let mut levels = vec![grid];
    for (l, &f) in m.iter().enumerate() {
        let coarse = levels[l].coarsen(f);
        if coarse.n_points < 2 {
            return Err(Error::Config(format!(
                "coarsening by {f} leaves level {} with {} point(s)",
                l + 1,
                coarse.n_points
            )));
        }
        levels.push(coarse);
    }
    Ok(Hierarchy {
        levels,
        factors: m.to_vec(),
        k,
    })
}

impl Hierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &TimeGrid {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[TimeGrid] {
        &self.levels
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Coarsening factor between level `l` and `l + 1`.
    pub fn factor(&self, l: usize) -> usize {
        self.factors[l]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coarsest_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn coarsest(&self) -> &TimeGrid {
        self.levels.last().expect("hierarchy has levels")
    }

    /// `N_T + 1`, the number of points on the global coarsest grid.
    pub fn coarsest_points(&self) -> usize {
        self.coarsest().n_points()
    }

    /// True when every local grid reaches back to `T_0`, i.e. the method is
    /// Parareal/MGRIT.
    pub fn is_global_coarse(&self) -> bool {
        self.k >= self.coarsest_points()
    }

    /// Number of level-`l` points per coarsest point.
    pub fn stride_to_coarsest(&self, l: usize) -> usize {
        self.factors[l..].iter().product()
    }

    pub fn local_grid(&self, p: usize) -> LocalCoarseGrid {
        assert!(p < self.coarsest_points(), "coarse point {p} out of range");
        LocalCoarseGrid::new(p, self.k)
    }

    pub fn local_grids(&self) -> impl Iterator<Item = LocalCoarseGrid> + '_ {
        (0..self.coarsest_points()).map(move |p| LocalCoarseGrid::new(p, self.k))
    }

    pub fn cf_partition(&self, level: usize) -> Result<CfSplitting> {
        if level + 1 >= self.levels.len() {
            return Err(Error::Config(format!(
                "level {level} has no CF-splitting (hierarchy has {} levels)",
                self.levels.len()
            )));
        }
        Ok(CfSplitting::new(
            self.levels[level].n_points(),
            self.factors[level],
        ))
    }

    /// Same grids with a different local-grid distance.
    pub fn with_k(&self, k: usize) -> Result<Hierarchy> {
        if k == 0 {
            return Err(Error::Config("local grid distance k must be >= 1".into()));
        }
        Ok(Hierarchy { k, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(intervals: usize) -> TimeGrid {
        TimeGrid::new(0.0, intervals as f64, intervals + 1).unwrap()
    }

    #[test]
    fn two_level_local_grids_match_figure_example() {
        // N_t = 15, m = 2, k = 4
        let h = build_hierarchy(grid(15), &[2], 4).unwrap();
        assert_eq!(h.coarsest_points(), 8);
        let idx = |p| h.local_grid(p).indices().collect::<Vec<_>>();
        assert_eq!(idx(0), vec![0]);
        assert_eq!(idx(1), vec![0, 1]);
        assert_eq!(idx(5), vec![2, 3, 4, 5]);
        assert_eq!(idx(7), vec![4, 5, 6, 7]);
    }

    #[test]
    fn three_level_hierarchy_example() {
        // 21 points, m = 2 twice, k = 4
        let h = build_hierarchy(grid(20), &[2, 2], 4).unwrap();
        assert_eq!(h.num_levels(), 3);
        assert_eq!(h.level(1).n_points(), 11);
        assert_eq!(h.coarsest_points(), 6);
        assert_eq!(h.local_grid(5).indices().collect::<Vec<_>>(), vec![2, 3, 4, 5]);
        // level-2 points coincide with level-0 points 0, 4, ..., 20
        for i in 0..6 {
            assert_eq!(h.level(2).point(i), h.level(0).point(4 * i));
        }
    }

    #[test]
    fn k_one_gives_single_point_grids() {
        let h = build_hierarchy(grid(15), &[2], 1).unwrap();
        for lg in h.local_grids() {
            assert_eq!(lg.indices().collect::<Vec<_>>(), vec![lg.owner]);
        }
    }

    #[test]
    fn cf_partition_examples() {
        let s = CfSplitting::new(16, 2);
        assert_eq!(s.c_points, (0..16).step_by(2).collect::<Vec<_>>());
        assert_eq!(s.f_intervals.len(), 8);
        assert!(s.f_intervals.iter().all(|r| r.len() == 1));

        let s = CfSplitting::new(5, 4);
        assert_eq!(s.c_points, vec![0, 4]);
        assert_eq!(s.f_intervals, vec![1..4]);

        let s = CfSplitting::new(7, 4);
        assert_eq!(s.c_points, vec![0, 4]);
        assert_eq!(s.f_intervals, vec![1..4, 5..7]);
    }

    #[test]
    fn cf_partition_rejects_coarsest_level() {
        let h = build_hierarchy(grid(15), &[2], 4).unwrap();
        assert!(h.cf_partition(0).is_ok());
        assert!(h.cf_partition(1).is_err());
    }

    #[test]
    fn configuration_errors() {
        assert!(build_hierarchy(grid(15), &[1], 4).is_err());
        assert!(build_hierarchy(grid(15), &[2], 0).is_err());
        assert!(build_hierarchy(grid(3), &[4], 2).is_err());
        assert!(build_hierarchy(grid(15), &[], 2).is_err());
        assert!(TimeGrid::new(1.0, 0.0, 5).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn non_divisible_grid_keeps_trailing_f_points() {
        let h = build_hierarchy(grid(6), &[4], 2).unwrap();
        assert_eq!(h.coarsest_points(), 2);
        assert_eq!(h.coarsest().point(1), 4.0);
    }

    #[test]
    fn full_k_is_global_coarse() {
        let h = build_hierarchy(grid(15), &[2], 8).unwrap();
        assert!(h.is_global_coarse());
        assert_eq!(h.local_grid(7).indices().collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
        assert!(!h.with_k(7).unwrap().is_global_coarse());
    }

    proptest! {
        #[test]
        fn local_grid_sizes(p in 0usize..200, k in 1usize..40) {
            let lg = LocalCoarseGrid::new(p, k);
            prop_assert_eq!(lg.len(), (p + 1).min(k));
            prop_assert!(lg.len() <= k);
            if p + 1 >= k {
                prop_assert_eq!(lg.len(), k);
            }
            prop_assert_eq!(*lg.indices().end(), p);
            if p > 0 {
                let prev = LocalCoarseGrid::new(p - 1, k);
                let overlap = lg.indices().filter(|i| prev.contains(*i)).count();
                prop_assert_eq!(overlap, p.min(k - 1));
            }
        }

        #[test]
        fn hierarchy_point_counts(intervals in 4usize..400, m0 in 2usize..6, m1 in 2usize..6) {
            if let Ok(h) = build_hierarchy(grid(intervals), &[m0, m1], 3) {
                prop_assert_eq!(h.level(1).n_points(), intervals / m0 + 1);
                prop_assert_eq!(h.level(2).n_points(), (intervals / m0) / m1 + 1);
                let s = h.cf_partition(0).unwrap();
                prop_assert_eq!(s.c_points.len(), h.level(1).n_points());
                prop_assert_eq!(s.c_points[0], 0);
                let covered: usize = s.f_intervals.iter().map(|r| r.len()).sum::<usize>() + s.c_points.len();
                prop_assert_eq!(covered, intervals + 1);
                // Every coarsest point is the last index of exactly one local grid.
                let lasts: Vec<usize> = h.local_grids().map(|g| *g.indices().end()).collect();
                prop_assert_eq!(lasts, (0..h.coarsest_points()).collect::<Vec<_>>());
            }
        }
    }
}
