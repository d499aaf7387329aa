//! Dense two-level error propagators and the convergence bound.
//!
//! Errors follow `e = u - u*`; one two-level iteration with F-relaxation maps
//! `e` to `E e`. Only C-point columns of `E` are nonzero. For the fine row
//! `r = p m + j` and the C-point column `q = p - d`, `1 <= d <= min(p, k)`:
//!
//! * `d < k`: `Φ^j Ψ^{d-1} (Φ^m - Ψ)`
//! * `d = k`: `Φ^j Ψ^{k-1} Φ^m`
//!
//! With `Ψ = Φ^m` only the `d = k` blocks survive; that is the propagator for
//! exact local solves.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagatorKind {
    Exact,
    Approximate,
}

/// Block matrix of size `(n_t + 1) n_block`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorMatrix {
    pub kind: PropagatorKind,
    pub m: usize,
    pub k: usize,
    pub n_block: usize,
    pub matrix: DMatrix<f64>,
}

impl PropagatorMatrix {
    pub fn n_points(&self) -> usize {
        self.matrix.nrows() / self.n_block
    }

    pub fn block(&self, row: usize, col: usize) -> DMatrix<f64> {
        let b = self.n_block;
        self.matrix.view((row * b, col * b), (b, b)).into_owned()
    }

    /// Principal submatrix on the C-point blocks.
    pub fn c_submatrix(&self) -> DMatrix<f64> {
        let b = self.n_block;
        let c: Vec<usize> = (0..self.n_points()).step_by(self.m).collect();
        DMatrix::from_fn(c.len() * b, c.len() * b, |r, s| {
            self.matrix[(c[r / b] * b + r % b, c[s / b] * b + s % b)]
        })
    }
}

/// Fine and coarse propagator eigenvalues sharing an eigenvector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub mu: Complex64,
}

impl EigenPair {
    pub fn real(lambda: f64, mu: f64) -> Self {
        EigenPair {
            lambda: Complex64::new(lambda, 0.0),
            mu: Complex64::new(mu, 0.0),
        }
    }
}

fn check_args(m: usize, k: usize, n_block: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Config(format!("m must be > 1, got {m}")));
    }
    if k < 2 {
        return Err(Error::Config(format!("propagators need k > 1, got {k}")));
    }
    if n_block == 0 {
        return Err(Error::InvalidDimension("empty propagator block".into()));
    }
    Ok(())
}

fn square(name: &str, a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidDimension(format!(
            "{name} must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

fn assemble(
    kind: PropagatorKind,
    phi: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    m: usize,
    k: usize,
    n_t: usize,
) -> Result<PropagatorMatrix> {
    let b = square("phi", phi)?;
    if square("psi", psi)? != b {
        return Err(Error::InvalidDimension("phi and psi differ in size".into()));
    }
    check_args(m, k, b)?;
    let n = n_t + 1;
    let phi_pows: Vec<DMatrix<f64>> = std::iter::successors(Some(DMatrix::identity(b, b)), |x| {
        Some(x * phi)
    })
    .take(m + 1)
    .collect();
    let psi_pows: Vec<DMatrix<f64>> = std::iter::successors(Some(DMatrix::identity(b, b)), |x| {
        Some(x * psi)
    })
    .take(k)
    .collect();
    let phi_m = &phi_pows[m];
    let gap = phi_m - psi;
    // coefficient of column C-point p - d in C-point row p
    let coarse: Vec<DMatrix<f64>> = (1..=k)
        .map(|d| {
            if d < k {
                &psi_pows[d - 1] * &gap
            } else {
                &psi_pows[k - 1] * phi_m
            }
        })
        .collect();
    let mut matrix = DMatrix::zeros(n * b, n * b);
    for r in 1..n {
        let (p, j) = (r / m, r % m);
        for d in 1..=p.min(k) {
            let block = &phi_pows[j] * &coarse[d - 1];
            matrix
                .view_mut((r * b, (p - d) * m * b), (b, b))
                .copy_from(&block);
        }
    }
    Ok(PropagatorMatrix {
        kind,
        m,
        k,
        n_block: b,
        matrix,
    })
}

/// Propagator with exact local coarse solves (`Ψ = Φ^m`).
pub fn assemble_e_exact(phi: &DMatrix<f64>, m: usize, k: usize, n_t: usize) -> Result<PropagatorMatrix> {
    square("phi", phi)?;
    let phi_m = (0..m).fold(DMatrix::identity(phi.nrows(), phi.nrows()), |acc, _| acc * phi);
    assemble(PropagatorKind::Exact, phi, &phi_m, m, k, n_t)
}

/// Propagator with the coarse integrator `Ψ` on the local grids.
pub fn assemble_e_approx(
    phi: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    m: usize,
    k: usize,
    n_t: usize,
) -> Result<PropagatorMatrix> {
    assemble(PropagatorKind::Approximate, phi, psi, m, k, n_t)
}

/// Scalar convenience wrappers.
pub fn assemble_e_exact_scalar(phi: f64, m: usize, k: usize, n_t: usize) -> Result<PropagatorMatrix> {
    assemble_e_exact(&DMatrix::from_element(1, 1, phi), m, k, n_t)
}

pub fn assemble_e_approx_scalar(
    phi: f64,
    psi: f64,
    m: usize,
    k: usize,
    n_t: usize,
) -> Result<PropagatorMatrix> {
    assemble_e_approx(
        &DMatrix::from_element(1, 1, phi),
        &DMatrix::from_element(1, 1, psi),
        m,
        k,
        n_t,
    )
}

/// Lower-triangular Toeplitz `Ẽ_cc` of order `p_count` for one eigenpair.
pub fn assemble_ecc(
    lambda: Complex64,
    mu: Complex64,
    m: usize,
    k: usize,
    p_count: usize,
) -> Result<DMatrix<Complex64>> {
    check_args(m, k, 1)?;
    let lm = lambda.powu(m as u32);
    let diag: Vec<Complex64> = (1..=k)
        .map(|d| {
            if d < k {
                mu.powu(d as u32 - 1) * (lm - mu)
            } else {
                mu.powu(k as u32 - 1) * lm
            }
        })
        .collect();
    Ok(DMatrix::from_fn(p_count, p_count, |r, c| {
        if r > c && r - c <= k {
            diag[r - c - 1]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// The two terms of the bound for one pair: the Parareal-like term and the
/// truncation term `|λ^m μ^{k-1}|`.
pub fn bound_terms(pair: &EigenPair, m: usize, k: usize) -> Result<(f64, f64)> {
    check_args(m, k, 1)?;
    let a = pair.mu.norm();
    if a >= 1.0 || !a.is_finite() {
        return Err(Error::Hypothesis(format!(
            "coarse eigenvalue modulus {a} is not below 1"
        )));
    }
    let lm = pair.lambda.powu(m as u32);
    let first = (lm - pair.mu).norm() * (1.0 - a.powi(k as i32 - 1)) / (1.0 - a);
    let second = (lm * pair.mu.powu(k as u32 - 1)).norm();
    Ok((first, second))
}

/// Upper bound on `‖Ẽ_cc‖₂`, maximized over `pairs`.
pub fn bound_ecc(pairs: &[EigenPair], m: usize, k: usize) -> Result<f64> {
    pairs.iter().try_fold(0.0_f64, |acc, pair| {
        let (a, b) = bound_terms(pair, m, k)?;
        Ok(acc.max(a + b))
    })
}

/// Whether every nonzero entry of `Ẽ_cc^ell` carries a factor `λ^m - μ`.
/// The only product free of that factor is the `ell`-th power of the `k`-th
/// subdiagonal, which vanishes once `ell k >= p_count`.
pub fn error_subdiagonal_depth(
    lambda: Complex64,
    mu: Complex64,
    m: usize,
    k: usize,
    p_count: usize,
    ell: usize,
) -> Result<bool> {
    check_args(m, k, 1)?;
    if ell == 0 {
        return Err(Error::Config("power must be >= 1".into()));
    }
    let w = mu.powu(k as u32 - 1) * lambda.powu(m as u32);
    Ok(ell.saturating_mul(k) >= p_count || w.norm() == 0.0)
}

/// Eigenpairs of backward Euler with step `dt` (fine) and `m dt` (coarse)
/// for a symmetric operator with eigenvalues `xi`.
pub fn backward_euler_pairs(xi: &[f64], dt: f64, m: usize) -> Vec<EigenPair> {
    xi.iter()
        .map(|&x| EigenPair::real(1.0 / (1.0 + dt * x), 1.0 / (1.0 + m as f64 * dt * x)))
        .collect()
}
