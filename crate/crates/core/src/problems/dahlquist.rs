use crate::app::{Application, ForcingConvention, StepInfo};
use crate::error::{Error, Result};
use crate::state::Vector;

/// `u' = λu` with backward Euler, `u_i = u_{i-1} / (1 - λΔt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dahlquist {
    lambda: f64,
    u0: f64,
}

impl Dahlquist {
    pub fn new(lambda: f64, u0: f64) -> Result<Self> {
        if !(lambda < 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "Dahlquist needs a finite negative lambda, got {lambda}"
            )));
        }
        Ok(Dahlquist { lambda, u0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Step multiplier for step size `dt`.
    pub fn multiplier(&self, dt: f64) -> f64 {
        1.0 / (1.0 - self.lambda * dt)
    }
}

impl Application for Dahlquist {
    type State = Vector;

    fn vector_size(&self) -> usize {
        1
    }

    fn initial_condition(&self) -> Vector {
        Vector::from_vec(vec![self.u0])
    }

    fn forcing_convention(&self) -> ForcingConvention {
        ForcingConvention::Explicit
    }

    fn step(&self, info: &StepInfo, u_prev: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![u_prev[0] / (1.0 - self.lambda * info.dt)]))
    }

    fn functional(&self, u: &Vector) -> Option<f64> {
        Some(u[0])
    }
}
