//! Restarted GMRES with right preconditioning.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Stop when `‖b - A x‖ <= rtol ‖b‖` (or `<= atol`).
    pub rtol: f64,
    pub atol: f64,
    pub restart: usize,
    pub max_iters: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            rtol: 1e-10,
            atol: 1e-14,
            restart: 40,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from `x`. `apply(v, out)` computes `out = A v`,
/// `precond(v, out)` computes `out = M⁻¹ v`.
pub fn gmres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opts: &GmresOptions,
) -> GmresOutcome {
    let n = b.len();
    let target = (opts.rtol * norm(b)).max(opts.atol);
    let restart = opts.restart.max(1);
    let mut iterations = 0;
    let mut work = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        apply(x, &mut work);
        let r: Vec<f64> = b.iter().zip(&work).map(|(b, ax)| b - ax).collect();
        let beta = norm(&r);
        if beta <= target || iterations >= opts.max_iters {
            return GmresOutcome {
                iterations,
                residual: beta,
                converged: beta <= target,
            };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after Givens rotations
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(restart);
        let mut g = vec![beta];
        for j in 0..restart {
            iterations += 1;
            precond(&basis[j], &mut z);
            apply(&z, &mut work);
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(&work, v);
                for (w, vi) in work.iter_mut().zip(v) {
                    *w -= hij * vi;
                }
                col.push(hij);
            }
            let hnext = norm(&work);
            col.push(hnext);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            let estimate = g[j + 1].abs();
            h.push(col);
            if hnext > 0.0 {
                basis.push(work.iter().map(|w| w / hnext).collect());
            }
            if estimate <= target || hnext == 0.0 || iterations >= opts.max_iters {
                break;
            }
        }
        // back substitution for the least-squares coefficients
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for (l, yl) in y.iter().enumerate().skip(i + 1) {
                acc -= h[l][i] * yl;
            }
            y[i] = acc / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vi) in update.iter_mut().zip(v) {
                *u += yi * vi;
            }
        }
        precond(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
}
