use std::f64::consts::PI;

use crate::app::{Application, ForcingConvention, StepInfo};
use crate::error::{Error, Result};
use crate::state::Vector;

use super::krylov::{gmres, GmresOptions};

/// Two-component reaction–diffusion on a periodic square:
///
/// ```text
/// u_t = Du Δu - u v² + F (1 - u)
/// v_t = Dv Δv + u v² - (K + F) v
/// ```
///
/// discretized with the 5-point Laplacian and backward Euler. States stack
/// all `u` values followed by all `v` values, row-major in `(y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayScottSpec {
    /// Grid points per direction.
    pub n: usize,
    pub length: f64,
    pub feed: f64,
    pub kill: f64,
    pub du: f64,
    pub dv: f64,
    /// Include the `u v²` coupling terms.
    pub reaction: bool,
    pub t0: f64,
    pub tf: f64,
    /// Absolute and relative Newton tolerance on the step residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Any state entry outside `[-bound, bound]` aborts the step.
    pub bound: f64,
}

impl Default for GrayScottSpec {
    fn default() -> Self {
        GrayScottSpec {
            n: 32,
            length: 2.5,
            feed: 0.024,
            kill: 0.06,
            du: 8e-5,
            dv: 4e-5,
            reaction: true,
            t0: 0.0,
            tf: 64.0,
            newton_tol: 1e-10,
            max_newton: 25,
            bound: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrayScott {
    spec: GrayScottSpec,
    h: f64,
}

impl GrayScott {
    pub fn new(spec: GrayScottSpec) -> Result<Self> {
        if spec.n < 3 {
            return Err(Error::Config(format!(
                "Gray-Scott needs at least 3 points per direction, got {}",
                spec.n
            )));
        }
        if !(spec.length > 0.0) || !(spec.tf > spec.t0) || !(spec.newton_tol > 0.0) {
            return Err(Error::Config(
                "Gray-Scott needs length > 0, tf > t0 and newton_tol > 0".into(),
            ));
        }
        let h = spec.length / spec.n as f64;
        Ok(GrayScott { spec, h })
    }

    pub fn spec(&self) -> &GrayScottSpec {
        &self.spec
    }

    /// Grid spacing.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    fn cells(&self) -> usize {
        self.spec.n * self.spec.n
    }

    /// Periodic 5-point Laplacian of one component.
    fn laplacian(&self, w: &[f64], out: &mut [f64]) {
        let n = self.spec.n;
        let inv = 1.0 / (self.h * self.h);
        for y in 0..n {
            let up = ((y + 1) % n) * n;
            let down = ((y + n - 1) % n) * n;
            let row = y * n;
            for x in 0..n {
                let right = (x + 1) % n;
                let left = (x + n - 1) % n;
                out[row + x] = inv
                    * (w[row + left] + w[row + right] + w[up + x] + w[down + x]
                        - 4.0 * w[row + x]);
            }
        }
    }

    /// Right-hand side `f(w)` of the semi-discrete system.
    pub fn rhs(&self, w: &[f64]) -> Vec<f64> {
        let c = self.cells();
        let s = &self.spec;
        let (u, v) = w.split_at(c);
        let mut out = vec![0.0; 2 * c];
        let (fu, fv) = out.split_at_mut(c);
        self.laplacian(u, fu);
        self.laplacian(v, fv);
        for i in 0..c {
            let uvv = if s.reaction { u[i] * v[i] * v[i] } else { 0.0 };
            fu[i] = s.du * fu[i] - uvv + s.feed * (1.0 - u[i]);
            fv[i] = s.dv * fv[i] + uvv - (s.kill + s.feed) * v[i];
        }
        out
    }

    /// `out = (I - dt J(w)) z`.
    fn apply_step_jacobian(&self, w: &[f64], dt: f64, z: &[f64], out: &mut [f64]) {
        let c = self.cells();
        let s = &self.spec;
        let (u, v) = w.split_at(c);
        let (zu, zv) = z.split_at(c);
        let (ou, ov) = out.split_at_mut(c);
        self.laplacian(zu, ou);
        self.laplacian(zv, ov);
        for i in 0..c {
            let (duu, duv, dvu, dvv) = self.reaction_jacobian(u[i], v[i]);
            let ju = s.du * ou[i] + duu * zu[i] + duv * zv[i];
            let jv = s.dv * ov[i] + dvu * zu[i] + dvv * zv[i];
            ou[i] = zu[i] - dt * ju;
            ov[i] = zv[i] - dt * jv;
        }
    }

    fn reaction_jacobian(&self, u: f64, v: f64) -> (f64, f64, f64, f64) {
        let s = &self.spec;
        let (vv, uv2) = if s.reaction { (v * v, 2.0 * u * v) } else { (0.0, 0.0) };
        (-vv - s.feed, -uv2, vv, uv2 - (s.kill + s.feed))
    }

    /// Inverse of the pointwise 2×2 blocks of `I - dt J(w)`.
    fn block_inverses(&self, w: &[f64], dt: f64) -> Vec<[f64; 4]> {
        let c = self.cells();
        let s = &self.spec;
        let diag = -4.0 / (self.h * self.h);
        (0..c)
            .map(|i| {
                let (duu, duv, dvu, dvv) = self.reaction_jacobian(w[i], w[c + i]);
                let a = 1.0 - dt * (s.du * diag + duu);
                let b = -dt * duv;
                let cc = -dt * dvu;
                let d = 1.0 - dt * (s.dv * diag + dvv);
                let det = a * d - b * cc;
                [d / det, -b / det, -cc / det, a / det]
            })
            .collect()
    }

    fn step_residual(&self, w: &[f64], w_prev: &[f64], dt: f64) -> Vec<f64> {
        let f = self.rhs(w);
        w.iter()
            .zip(w_prev)
            .zip(f)
            .map(|((w, p), f)| w - p - dt * f)
            .collect()
    }

    /// One backward-Euler step solved by Newton–GMRES.
    pub fn grayscott_step(&self, dt: f64, w_prev: &Vector) -> Result<Vector> {
        let c = self.cells();
        let tol = self.spec.newton_tol;
        let mut w = w_prev.clone().into_vec();
        let mut r = self.step_residual(&w, w_prev, dt);
        let r0 = norm(&r);
        let target = tol.max(tol * r0);
        let mut iters = 0;
        while norm(&r) > target {
            if iters == self.spec.max_newton {
                return Err(Error::Step {
                    level: 0,
                    index: 0,
                    message: format!(
                        "Newton did not converge in {iters} iterations (residual {:.3e})",
                        norm(&r)
                    ),
                });
            }
            iters += 1;
            let blocks = self.block_inverses(&w, dt);
            let precond = |x: &[f64], out: &mut [f64]| {
                for (i, b) in blocks.iter().enumerate() {
                    out[i] = b[0] * x[i] + b[1] * x[c + i];
                    out[c + i] = b[2] * x[i] + b[3] * x[c + i];
                }
            };
            let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
            let mut delta = vec![0.0; 2 * c];
            let wref = &w;
            gmres(
                |z, out| self.apply_step_jacobian(wref, dt, z, out),
                precond,
                &rhs,
                &mut delta,
                &GmresOptions::default(),
            );
            for (wi, d) in w.iter_mut().zip(&delta) {
                *wi += d;
            }
            r = self.step_residual(&w, w_prev, dt);
            if !norm(&r).is_finite() {
                break;
            }
        }
        let bound = self.spec.bound;
        if w.iter().any(|x| !x.is_finite() || x.abs() > bound) {
            return Err(Error::Step {
                level: 0,
                index: 0,
                message: format!("state left the box [-{bound}, {bound}]"),
            });
        }
        Ok(Vector::from_vec(w))
    }
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Application for GrayScott {
    type State = Vector;

    fn vector_size(&self) -> usize {
        2 * self.cells()
    }

    fn initial_condition(&self) -> Vector {
        let n = self.spec.n;
        let c = self.cells();
        let mut w = vec![0.0; 2 * c];
        for y in 0..n {
            for x in 0..n {
                let (px, py) = (x as f64 * self.h, y as f64 * self.h);
                let i = y * n + x;
                let inside = (1.0..=1.5).contains(&px) && (1.0..=1.5).contains(&py);
                let bump = if inside {
                    0.25 * (4.0 * PI * px).sin().powi(2) * (4.0 * PI * py).sin().powi(2)
                } else {
                    0.0
                };
                w[i] = 1.0 - 2.0 * bump;
                w[c + i] = bump;
            }
        }
        Vector::from_vec(w)
    }

    fn forcing_convention(&self) -> ForcingConvention {
        ForcingConvention::Folded
    }

    fn step(&self, info: &StepInfo, u_prev: &Vector) -> Result<Vector> {
        self.grayscott_step(info.dt, u_prev).map_err(|e| match e {
            Error::Step { message, .. } => Error::Step {
                level: info.level,
                index: info.index,
                message,
            },
            other => other,
        })
    }

    /// Total mass of the second component.
    fn functional(&self, w: &Vector) -> Option<f64> {
        let c = self.cells();
        Some(self.h * self.h * w[c..].iter().sum::<f64>())
    }
}
