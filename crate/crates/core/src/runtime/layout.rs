use std::ops::Range;

use crate::error::{Error, Result};
use crate::grids::Hierarchy;

/// Assignment of time points to ranks.
///
/// Coarsest points are split into near-equal contiguous blocks (earlier ranks
/// take the remainder). On every level a rank owns the points from its first
/// coarsest point up to, but excluding, the next rank's first coarsest point,
/// so each block starts with a C-point and no F-interval crosses a rank
/// boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankLayout {
    coarse_starts: Vec<usize>,
    strides: Vec<usize>,
    level_points: Vec<usize>,
}

pub fn build_layout(h: &Hierarchy, workers: usize) -> Result<RankLayout> {
    let coarse_starts = split(h.coarsest_points(), workers)?;
    Ok(RankLayout {
        coarse_starts,
        strides: (0..h.num_levels()).map(|l| h.stride_to_coarsest(l)).collect(),
        level_points: h.levels().iter().map(|g| g.n_points()).collect(),
    })
}

fn split(n: usize, workers: usize) -> Result<Vec<usize>> {
    if workers == 0 {
        return Err(Error::Config("worker count must be >= 1".into()));
    }
    if workers > n {
        return Err(Error::Config(format!(
            "{workers} workers exceed the {n} points of the coarsest grid"
        )));
    }
    let base = n / workers;
    let extra = n % workers;
    let mut coarse_starts = Vec::with_capacity(workers + 1);
    let mut start = 0;
    for r in 0..workers {
        coarse_starts.push(start);
        start += base + usize::from(r < extra);
    }
    coarse_starts.push(n);
    Ok(coarse_starts)
}

impl RankLayout {
    /// Layout of a single grid of `n` coarsest points.
    pub fn coarse_only(n: usize, workers: usize) -> Result<RankLayout> {
        Ok(RankLayout {
            coarse_starts: split(n, workers)?,
            strides: vec![1],
            level_points: vec![n],
        })
    }

    pub fn workers(&self) -> usize {
        self.coarse_starts.len() - 1
    }

    /// Coarsest-grid points owned by `rank`.
    pub fn coarse_block(&self, rank: usize) -> Range<usize> {
        self.coarse_starts[rank]..self.coarse_starts[rank + 1]
    }

    /// Points of `level` owned by `rank`.
    pub fn block(&self, rank: usize, level: usize) -> Range<usize> {
        let stride = self.strides[level];
        let lo = self.coarse_starts[rank] * stride;
        let hi = if rank + 1 == self.workers() {
            self.level_points[level]
        } else {
            self.coarse_starts[rank + 1] * stride
        };
        lo..hi
    }

    /// Rank owning coarsest point `p`.
    pub fn owner(&self, p: usize) -> usize {
        self.coarse_starts[1..].partition_point(|&s| s <= p)
    }

    /// Owner rank of every coarsest point.
    pub fn coarsest_owner(&self) -> Vec<usize> {
        (0..*self.coarse_starts.last().unwrap())
            .map(|p| self.owner(p))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{build_hierarchy, TimeGrid};

    fn hierarchy(points: usize, m: &[usize], k: usize) -> Hierarchy {
        build_hierarchy(TimeGrid::new(0.0, 1.0, points).unwrap(), m, k).unwrap()
    }

    #[test]
    fn one_point_per_rank() {
        let h = hierarchy(16384, &[128], 12);
        let layout = build_layout(&h, 128).unwrap();
        for r in 0..128 {
            assert_eq!(layout.coarse_block(r).len(), 1);
            let b = layout.block(r, 0);
            assert_eq!(b.start, 128 * r);
            assert_eq!(b.len(), 128);
        }
        assert_eq!(layout.coarsest_owner(), (0..128).collect::<Vec<_>>());
    }

    #[test]
    fn single_rank_owns_everything() {
        let h = hierarchy(21, &[2, 2], 4);
        let layout = build_layout(&h, 1).unwrap();
        assert_eq!(layout.block(0, 0), 0..21);
        assert_eq!(layout.block(0, 1), 0..11);
        assert_eq!(layout.block(0, 2), 0..6);
    }

    #[test]
    fn blocks_cover_levels_and_start_at_c_points() {
        let h = hierarchy(101, &[3, 2], 3);
        for workers in 1..=h.coarsest_points() {
            let layout = build_layout(&h, workers).unwrap();
            for l in 0..h.num_levels() {
                let mut next = 0;
                for r in 0..workers {
                    let b = layout.block(r, l);
                    assert_eq!(b.start, next);
                    if l + 1 < h.num_levels() {
                        assert_eq!(b.start % h.factor(l), 0);
                    }
                    next = b.end;
                }
                assert_eq!(next, h.level(l).n_points());
            }
            let sizes: Vec<usize> = (0..workers).map(|r| layout.coarse_block(r).len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn too_many_workers() {
        let h = hierarchy(33, &[4], 3);
        assert!(build_layout(&h, 9).is_ok());
        assert!(matches!(build_layout(&h, 10), Err(Error::Config(_))));
        assert!(build_layout(&h, 0).is_err());
    }
}
