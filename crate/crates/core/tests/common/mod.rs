//! Independent reference implementations used as oracles.
#![allow(dead_code)]

use atmgrit::{Application, ForcingConvention, Result, StepInfo, Vector};
use nalgebra::DMatrix;

/// Scalar linear problem with a prescribed multiplier per level and an
/// optional fine-level forcing `g_i`.
#[derive(Debug, Clone)]
pub struct ScalarLinear {
    pub phi: Vec<f64>,
    pub u0: f64,
    pub forcing: Vec<Vec<f64>>,
}

impl ScalarLinear {
    pub fn new(phi: Vec<f64>, u0: f64) -> Self {
        ScalarLinear {
            phi,
            u0,
            forcing: Vec::new(),
        }
    }
}

impl Application for ScalarLinear {
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

    fn step(&self, info: &StepInfo, u: &Vector) -> Result<Vector> {
        Ok(Vector::from_vec(vec![self.phi[info.level] * u[0]]))
    }

    fn forcing(&self, info: &StepInfo) -> Result<Option<Vector>> {
        Ok(self
            .forcing
            .get(info.level)
            .and_then(|g| g.get(info.index))
            .map(|&g| Vector::from_vec(vec![g])))
    }
}

/// Sequential fine solve of `u_0 = g_0, u_i = φ u_{i-1} + g_i`.
pub fn sequential_scalar(phi: f64, u0: f64, g: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![u0; n];
    for i in 1..n {
        u[i] = phi * u[i - 1] + g.get(i).copied().unwrap_or(0.0);
    }
    u
}

fn pow(a: &DMatrix<f64>, e: usize) -> DMatrix<f64> {
    (0..e).fold(DMatrix::identity(a.nrows(), a.nrows()), |acc, _| acc * a)
}

/// `(I - Σ_p P_S^(p) Ã_c^(p)⁻¹ R_I^(p) A) P R_I`, assembled from its factors.
pub fn brute_force_propagator(
    phi: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    m: usize,
    k: usize,
    n_t: usize,
) -> DMatrix<f64> {
    let b = phi.nrows();
    let n = n_t + 1;
    let nc = n_t / m + 1;
    let eye = DMatrix::<f64>::identity(b, b);
    let mut a = DMatrix::<f64>::zeros(n * b, n * b);
    for i in 0..n {
        a.view_mut((i * b, i * b), (b, b)).copy_from(&eye);
        if i > 0 {
            a.view_mut((i * b, (i - 1) * b), (b, b)).copy_from(&(-phi));
        }
    }
    // injection onto the global coarse grid and ideal interpolation back
    let mut r_i = DMatrix::<f64>::zeros(nc * b, n * b);
    for p in 0..nc {
        r_i.view_mut((p * b, p * m * b), (b, b)).copy_from(&eye);
    }
    let mut p_ideal = DMatrix::<f64>::zeros(n * b, nc * b);
    for row in 0..n {
        let (p, j) = (row / m, row % m);
        p_ideal
            .view_mut((row * b, p * b), (b, b))
            .copy_from(&pow(phi, j));
    }
    let mut correction = DMatrix::<f64>::zeros(n * b, n * b);
    for p in 0..nc {
        let s = (p + 1).saturating_sub(k);
        let w = p - s + 1;
        let mut r_p = DMatrix::<f64>::zeros(w * b, n * b);
        let mut a_c = DMatrix::<f64>::zeros(w * b, w * b);
        for q in 0..w {
            r_p.view_mut((q * b, (s + q) * m * b), (b, b)).copy_from(&eye);
            a_c.view_mut((q * b, q * b), (b, b)).copy_from(&eye);
            if q > 0 {
                a_c.view_mut((q * b, (q - 1) * b), (b, b)).copy_from(&(-psi));
            }
        }
        // P_S^(p): last local value to C-point p, then F-relaxation
        let mut p_s = DMatrix::<f64>::zeros(n * b, w * b);
        for j in 0..m {
            let row = p * m + j;
            if row < n {
                p_s.view_mut((row * b, (w - 1) * b), (b, b))
                    .copy_from(&pow(phi, j));
            }
        }
        let a_c_inv = a_c.try_inverse().expect("unit lower triangular");
        correction += p_s * a_c_inv * r_p * &a;
    }
    (DMatrix::identity(n * b, n * b) - correction) * p_ideal * r_i
}

/// Parareal with coarse propagator `coarse` and fine interval propagator
/// built from `fine_step`, returning the fine approximation after each
/// iteration.
pub struct Parareal<'a> {
    pub m: usize,
    pub n_points: usize,
    pub fine_step: &'a dyn Fn(usize, &[f64]) -> Vec<f64>,
    pub coarse_step: &'a dyn Fn(usize, &[f64]) -> Vec<f64>,
}

impl Parareal<'_> {
    /// Fine values from C-point values by sequential stepping.
    pub fn propagate(&self, c: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut u = Vec::with_capacity(self.n_points);
        for i in 0..self.n_points {
            if i % self.m == 0 {
                u.push(c[i / self.m].clone());
            } else {
                let next = (self.fine_step)(i, &u[i - 1]);
                u.push(next);
            }
        }
        u
    }

    /// One iteration `U_j <- G(U_j-1 new) + F(U_j-1 old) - G(U_j-1 old)`.
    pub fn iterate(&self, c: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let fine = self.propagate(c);
        let mut next = vec![c[0].clone()];
        for j in 1..c.len() {
            let f_old = (self.fine_step)(j * self.m, &fine[j * self.m - 1]);
            let g_old = (self.coarse_step)(j, &c[j - 1]);
            let g_new = (self.coarse_step)(j, &next[j - 1]);
            next.push(
                g_new
                    .iter()
                    .zip(&f_old)
                    .zip(&g_old)
                    .map(|((a, b), c)| a + b - c)
                    .collect(),
            );
        }
        next
    }

    /// The same iteration written as a correction, `U_j += G(δ_{j-1}) +
    /// F(U_{j-1}) - U_j`, with `coarse_step` linear.
    pub fn iterate_correction(&self, c: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let fine = self.propagate(c);
        let mut next = vec![c[0].clone()];
        let mut delta = vec![0.0; c[0].len()];
        for j in 1..c.len() {
            let f_old = (self.fine_step)(j * self.m, &fine[j * self.m - 1]);
            let g = (self.coarse_step)(j, &delta);
            delta = g
                .iter()
                .zip(f_old.iter().zip(&c[j]))
                .map(|(g, (f, u))| g + (f - u))
                .collect();
            next.push(c[j].iter().zip(&delta).map(|(u, d)| u + d).collect());
        }
        next
    }

    /// Residual 2-norm of a fine approximation.
    pub fn residual_norm(&self, u: &[Vec<f64>], u0: &[f64]) -> f64 {
        let mut sum: f64 = u[0].iter().zip(u0).map(|(a, b)| (a - b).powi(2)).sum();
        for i in 1..u.len() {
            let f = (self.fine_step)(i, &u[i - 1]);
            sum += f.iter().zip(&u[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        sum.sqrt()
    }
}

/// Linear MGRIT V-cycle with F-relaxation on a scalar problem with zero
/// forcing beyond the initial value: `phi[l]` is the level-`l` multiplier
/// and the coarsest level is solved sequentially.
pub fn mgrit_vcycle(phi: &[f64], m: &[usize], u: &mut [f64], g: &[f64]) {
    let level_phi = phi[0];
    let f_relax = |u: &mut [f64]| {
        for i in 1..u.len() {
            if i % m[0] != 0 {
                u[i] = level_phi * u[i - 1] + g[i];
            }
        }
    };
    f_relax(u);
    let nc = (u.len() - 1) / m[0] + 1;
    let rc: Vec<f64> = (0..nc)
        .map(|j| {
            let i = j * m[0];
            if i == 0 {
                g[0] - u[0]
            } else {
                g[i] - u[i] + level_phi * u[i - 1]
            }
        })
        .collect();
    let mut ec = vec![0.0; nc];
    if m.len() == 1 {
        ec[0] = rc[0];
        for j in 1..nc {
            ec[j] = phi[1] * ec[j - 1] + rc[j];
        }
    } else {
        mgrit_vcycle(&phi[1..], &m[1..], &mut ec, &rc);
    }
    for j in 0..nc {
        u[j * m[0]] += ec[j];
    }
    f_relax(u);
}
