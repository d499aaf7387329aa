use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use crate::app::{Application, ForcingConvention, StepInfo};
use crate::error::{Error, Result};
use crate::state::Vector;

/// `u_t - u_xx = b(x, t)` on `[x0, x1] × [t0, tf]` with homogeneous Dirichlet
/// boundaries, central differences and backward Euler.
#[derive(Debug, Clone, PartialEq)]
pub struct Heat1DSpec {
    /// Grid points including both boundaries.
    pub dof: usize,
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub tf: f64,
    /// Use `b(x, t) = -sin(πx)(sin t - π² cos t)`; otherwise `b = 0`.
    pub forcing: bool,
    /// Evaluate the forcing inside `step` instead of exposing it separately.
    pub folded: bool,
}

impl Default for Heat1DSpec {
    fn default() -> Self {
        Heat1DSpec {
            dof: 1025,
            x0: 0.0,
            x1: 1.0,
            t0: 0.0,
            tf: 3.0,
            forcing: true,
            folded: false,
        }
    }
}

/// Thomas elimination for the constant tridiagonal `I + dt L`.
#[derive(Debug)]
struct Factor {
    off: f64,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
    /// Eliminated superdiagonal.
    upper: Vec<f64>,
}

impl Factor {
    fn new(n: usize, dt: f64, dx: f64) -> Self {
        let r = dt / (dx * dx);
        let diag = 1.0 + 2.0 * r;
        let off = -r;
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut prev_upper = 0.0;
        for _ in 0..n {
            let pivot = diag - off * prev_upper;
            inv_pivot.push(1.0 / pivot);
            prev_upper = off / pivot;
            upper.push(prev_upper);
        }
        Factor {
            off,
            inv_pivot,
            upper,
        }
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        let mut prev = 0.0;
        for (xi, inv) in x.iter_mut().zip(&self.inv_pivot) {
            *xi = (*xi - self.off * prev) * inv;
            prev = *xi;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.upper[i] * x[i + 1];
        }
    }
}

/// State vectors hold the `dof - 2` interior values.
#[derive(Debug)]
pub struct Heat1D {
    spec: Heat1DSpec,
    dx: f64,
    x: Vec<f64>,
    factors: RwLock<HashMap<u64, Arc<Factor>>>,
}

impl Heat1D {
    pub fn new(spec: Heat1DSpec) -> Result<Self> {
        if spec.dof < 3 {
            return Err(Error::Config(format!(
                "heat problem needs at least 3 grid points, got {}",
                spec.dof
            )));
        }
        if !(spec.x1 > spec.x0) || !(spec.tf > spec.t0) {
            return Err(Error::Config("heat problem needs x1 > x0 and tf > t0".into()));
        }
        let dx = (spec.x1 - spec.x0) / (spec.dof - 1) as f64;
        let x = (1..spec.dof - 1).map(|i| spec.x0 + i as f64 * dx).collect();
        Ok(Heat1D {
            spec,
            dx,
            x,
            factors: RwLock::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &Heat1DSpec {
        &self.spec
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Interior grid coordinates.
    pub fn coordinates(&self) -> &[f64] {
        &self.x
    }

    pub fn exact(x: f64, t: f64) -> f64 {
        (PI * x).sin() * t.cos()
    }

    pub fn source(x: f64, t: f64) -> f64 {
        -(PI * x).sin() * (t.sin() - PI * PI * t.cos())
    }

    /// Eigenvalues of the discrete negative Laplacian.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let n = self.x.len();
        (1..=n)
            .map(|j| {
                let s = (j as f64 * PI / (2.0 * (n + 1) as f64)).sin();
                4.0 / (self.dx * self.dx) * s * s
            })
            .collect()
    }

    fn factor(&self, dt: f64) -> Arc<Factor> {
        let key = dt.to_bits();
        if let Some(f) = self.factors.read().expect("factor cache").get(&key) {
            return Arc::clone(f);
        }
        let f = Arc::new(Factor::new(self.x.len(), dt, self.dx));
        self.factors
            .write()
            .expect("factor cache")
            .entry(key)
            .or_insert(f)
            .clone()
    }

    fn source_vector(&self, t: f64, scale: f64) -> Vec<f64> {
        self.x.iter().map(|&x| scale * Self::source(x, t)).collect()
    }

    /// One backward-Euler step `(I + dt L) u = u_prev + dt b(t)`.
    pub fn heat_step(&self, dt: f64, t: f64, u_prev: &Vector) -> Vector {
        let mut rhs = u_prev.clone().into_vec();
        if self.spec.forcing {
            for (r, b) in rhs.iter_mut().zip(self.source_vector(t, dt)) {
                *r += b;
            }
        }
        self.factor(dt).solve_in_place(&mut rhs);
        Vector::from_vec(rhs)
    }
}

impl Application for Heat1D {
    type State = Vector;

    fn vector_size(&self) -> usize {
        self.x.len()
    }

    fn initial_condition(&self) -> Vector {
        Vector::from_vec(self.x.iter().map(|&x| Self::exact(x, self.spec.t0)).collect())
    }

    fn forcing_convention(&self) -> ForcingConvention {
        if self.spec.folded {
            ForcingConvention::Folded
        } else {
            ForcingConvention::Explicit
        }
    }

    fn step(&self, info: &StepInfo, u_prev: &Vector) -> Result<Vector> {
        if self.spec.folded {
            return Ok(self.heat_step(info.dt, info.t, u_prev));
        }
        let mut u = u_prev.clone().into_vec();
        self.factor(info.dt).solve_in_place(&mut u);
        Ok(Vector::from_vec(u))
    }

    fn forcing(&self, info: &StepInfo) -> Result<Option<Vector>> {
        if !self.spec.forcing {
            return Ok(None);
        }
        let mut g = self.source_vector(info.t, info.dt);
        self.factor(info.dt).solve_in_place(&mut g);
        Ok(Some(Vector::from_vec(g)))
    }

    /// `∫ u² dx` by the rectangle rule.
    fn functional(&self, u: &Vector) -> Option<f64> {
        Some(self.dx * u.iter().map(|v| v * v).sum::<f64>())
    }
}
