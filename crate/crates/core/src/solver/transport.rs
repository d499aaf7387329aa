//! What a cycle needs from its execution backend: neighbour halos, the
//! local-window gather on the coarsest level and deterministic reductions.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::state::StateVector;

/// Data the owner of a coarsest point contributes to every local grid that
/// contains it.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowItem<S> {
    /// Value the local solve starts from when this point opens a window.
    pub seed: S,
    /// Right-hand side used when this point is reached by forward substitution.
    pub rhs: S,
}

pub(crate) trait Transport<S: StateVector> {
    fn rank(&self) -> usize;

    /// Sends `last` (this rank's last point on some level) to the right
    /// neighbour and returns the left neighbour's last point, if any.
    fn shift_right(&self, last: Option<&S>) -> Result<Option<S>>;

    /// Redistributes per-point window items so that on return this rank holds
    /// the items of every point in the local grids it owns.
    fn gather_windows(
        &self,
        own: BTreeMap<usize, WindowItem<S>>,
    ) -> Result<BTreeMap<usize, WindowItem<S>>>;

    /// Concatenation, in rank order, of every rank's `local` values.
    fn all_gather(&self, local: Vec<f64>) -> Result<Vec<f64>>;
}

/// Single-rank backend; every point is local.
pub(crate) struct Serial;

impl<S: StateVector> Transport<S> for Serial {
    fn rank(&self) -> usize {
        0
    }

    fn shift_right(&self, _last: Option<&S>) -> Result<Option<S>> {
        Ok(None)
    }

    fn gather_windows(
        &self,
        own: BTreeMap<usize, WindowItem<S>>,
    ) -> Result<BTreeMap<usize, WindowItem<S>>> {
        Ok(own)
    }

    fn all_gather(&self, local: Vec<f64>) -> Result<Vec<f64>> {
        Ok(local)
    }
}
