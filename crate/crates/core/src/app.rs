//! The problem contract the solver integrates.

use crate::error::Result;
use crate::state::StateVector;

/// How a problem supplies its forcing terms `g_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingConvention {
    /// `step` is linear and homogeneous; `g_i` comes from [`Application::forcing`].
    /// Required by the two-level linear-correction mode, which applies the
    /// coarse integrator to corrections.
    Explicit,
    /// All forcing is evaluated inside `step`; `forcing` is never called.
    /// Usable with the FAS cycles only.
    Folded,
}

/// Where a single time step sits in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub level: usize,
    /// Index of the point being computed (the step goes from `index - 1` to `index`).
    pub index: usize,
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
}

/// Stopping measure evaluated after every cycle on the finest level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    /// Discrete 2-norm of the absolute space-time residual over all points.
    #[default]
    SpaceTimeResidual,
    /// Largest relative change, over fine C-points, of
    /// [`Application::functional`] between successive iterates.
    FunctionalChange,
}

/// A time-dependent problem `u_i = Φ_i(u_{i-1}) + g_i`.
///
/// `step` at level `ℓ` uses the step size of that level; coarse levels are
/// re-discretizations with `Δt·∏ m_j`. Implementations must be
/// deterministic and safe to call concurrently.
pub trait Application: Send + Sync {
    type State: StateVector;

    fn vector_size(&self) -> usize;

    fn initial_condition(&self) -> Self::State;

    fn forcing_convention(&self) -> ForcingConvention;

    /// Applies `Φ_i` at the level encoded in `info`.
    fn step(&self, info: &StepInfo, u_prev: &Self::State) -> Result<Self::State>;

    /// The forcing term `g_i`; `None` means zero. Only consulted under
    /// [`ForcingConvention::Explicit`].
    fn forcing(&self, _info: &StepInfo) -> Result<Option<Self::State>> {
        Ok(None)
    }

    fn zero(&self) -> Self::State {
        let mut z = self.initial_condition();
        z.fill(0.0);
        z
    }

    /// Scalar quantity of interest used by [`Norm::FunctionalChange`].
    fn functional(&self, _u: &Self::State) -> Option<f64> {
        None
    }
}
