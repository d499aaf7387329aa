mod common;

use atmgrit::theory::{
    assemble_e_approx, assemble_e_approx_scalar, assemble_e_exact, assemble_e_exact_scalar,
    assemble_ecc, backward_euler_pairs, bound_ecc, bound_terms, error_subdiagonal_depth,
    spectral_norm, EigenPair,
};
use atmgrit::Error;
use common::brute_force_propagator;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn scalar(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).amax()
}

#[test]
fn scalar_propagators_match_brute_force() {
    let mut seed = 12345u64;
    let mut uniform = || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64 * 1.8 - 0.9
    };
    for m in 2..=4 {
        for k in 2..=4 {
            let n_t = 24 - 24 % m;
            for _ in 0..10 {
                let (phi, psi) = (uniform(), uniform());
                let e_a = assemble_e_approx_scalar(phi, psi, m, k, n_t).unwrap();
                let oracle = brute_force_propagator(&scalar(phi), &scalar(psi), m, k, n_t);
                assert!(max_diff(&e_a.matrix, &oracle) < 1e-12);
                let e_e = assemble_e_exact_scalar(phi, m, k, n_t).unwrap();
                let exact = assemble_e_approx_scalar(phi, phi.powi(m as i32), m, k, n_t).unwrap();
                assert!(max_diff(&e_e.matrix, &exact.matrix) < 1e-15);
            }
        }
    }
}

#[test]
fn block_propagators_match_brute_force() {
    let phi = DMatrix::from_row_slice(2, 2, &[0.6, 0.1, -0.2, 0.5]);
    let psi = DMatrix::from_row_slice(2, 2, &[0.3, 0.05, -0.1, 0.25]);
    for (m, k, n_t) in [(2, 2, 8), (3, 2, 12), (2, 3, 10), (4, 4, 16)] {
        let e_a = assemble_e_approx(&phi, &psi, m, k, n_t).unwrap();
        assert_eq!(e_a.n_block, 2);
        assert_eq!(e_a.n_points(), n_t + 1);
        let oracle = brute_force_propagator(&phi, &psi, m, k, n_t);
        assert!(max_diff(&e_a.matrix, &oracle) < 1e-12);
        let phi_m = (0..m).fold(DMatrix::identity(2, 2), |acc, _| acc * &phi);
        let e_e = assemble_e_exact(&phi, m, k, n_t).unwrap();
        let oracle = brute_force_propagator(&phi, &phi_m, m, k, n_t);
        assert!(max_diff(&e_e.matrix, &oracle) < 1e-12);
    }
}

#[test]
fn full_distance_exact_propagator_vanishes() {
    // Parareal with an exact coarse solve converges in one iteration
    let e = assemble_e_exact_scalar(0.7, 3, 5, 12).unwrap();
    assert!(e.matrix.amax() < 1e-15);
    // truncation leaves a nonzero error
    let e = assemble_e_exact_scalar(0.7, 3, 2, 12).unwrap();
    assert!(e.matrix.amax() > 1e-3);
}

#[test]
fn ecc_matches_the_c_rows_beyond_the_first_window() {
    let (phi, psi, m, k, n_t) = (0.8, 0.45, 3, 3, 30);
    let e_a = assemble_e_approx_scalar(phi, psi, m, k, n_t).unwrap();
    let c = e_a.c_submatrix();
    let p_count = n_t / m + 1;
    let ecc = assemble_ecc(Complex64::new(phi, 0.0), Complex64::new(psi, 0.0), m, k, p_count).unwrap();
    for r in k..p_count {
        for s in 0..p_count {
            assert!((c[(r, s)] - ecc[(r, s)].re).abs() < 1e-14, "({r}, {s})");
        }
    }
}

#[test]
fn bound_anchor() {
    // km = 500 with μ = λ^m: the truncation term is |λ|^{km}
    let lambda = 0.99f64;
    let (m, k) = (50, 10);
    let pair = EigenPair::real(lambda, lambda.powi(m as i32));
    let (first, truncation) = bound_terms(&pair, m, k).unwrap();
    assert!(first.abs() < 1e-15);
    assert!((truncation - lambda.powi(500)).abs() < 1e-15);
    // 0.0065… to the digits quoted for it
    assert_eq!((truncation * 1e4).floor(), 65.0, "{truncation}");
}

#[test]
fn bound_rejects_unstable_coarse_eigenvalues() {
    let err = bound_ecc(&[EigenPair::real(0.5, 1.0)], 2, 2).unwrap_err();
    assert!(matches!(err, Error::Hypothesis(_)));
    let ok = bound_ecc(&[EigenPair::real(0.5, 0.999)], 2, 2).unwrap();
    assert!(ok.is_finite());
}

#[test]
fn heat_spectrum_bound_decreases_with_k() {
    let xi: Vec<f64> = (1..=63)
        .map(|j| {
            let s = (j as f64 * std::f64::consts::PI / 128.0).sin();
            4.0 * 64.0 * 64.0 * s * s
        })
        .collect();
    let pairs = backward_euler_pairs(&xi, 3.0 / 1024.0, 32);
    let mut previous = f64::INFINITY;
    for k in [2, 4, 8, 16] {
        let b = bound_ecc(&pairs, 32, k).unwrap();
        assert!(b <= previous + 1e-15);
        previous = b;
    }
}

#[test]
fn nilpotency_structure() {
    for p_count in [8, 16] {
        for k in [2, 4] {
            let m = 4;
            let lambda = Complex64::new(0.93, 0.0);
            let mu = lambda.powu(m as u32);
            let ecc = assemble_ecc(lambda, mu, m, k, p_count).unwrap();
            let power = p_count.div_ceil(k);
            let mut acc = ecc.clone();
            for _ in 1..power {
                acc = &acc * &ecc;
            }
            assert!(acc.iter().all(|z| z.norm() < 1e-14));
            assert!(error_subdiagonal_depth(lambda, mu, m, k, p_count, power).unwrap());
            if power > 1 {
                let mut prev = ecc.clone();
                for _ in 2..power {
                    prev = &prev * &ecc;
                }
                assert!(prev.iter().any(|z| z.norm() > 1e-14));
                assert!(!error_subdiagonal_depth(lambda, mu, m, k, p_count, power - 1).unwrap());
            }
        }
    }
}

fn stable_pair() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.0..0.999f64, -PI..PI, 0.0..0.999f64, -PI..PI)
}

proptest! {
    #[test]
    fn ecc_norm_respects_the_bound(
        (lr, la, mr, ma) in stable_pair(),
        m in prop::sample::select(vec![2usize, 8, 32]),
        k in prop::sample::select(vec![2usize, 4, 8]),
    ) {
        let lambda = Complex64::from_polar(lr, la);
        let mu = Complex64::from_polar(mr, ma);
        let ecc = assemble_ecc(lambda, mu, m, k, 32).unwrap();
        let bound = bound_ecc(&[EigenPair { lambda, mu }], m, k).unwrap();
        prop_assert!(spectral_norm(&ecc) <= bound + 1e-12);
    }

    #[test]
    fn ecc_is_lower_toeplitz(
        (lr, la, mr, ma) in stable_pair(),
        k in 2usize..6,
        p_count in 1usize..12,
    ) {
        let lambda = Complex64::from_polar(lr, la);
        let mu = Complex64::from_polar(mr, ma);
        let ecc = assemble_ecc(lambda, mu, 3, k, p_count).unwrap();
        for r in 0..p_count {
            for c in 0..p_count {
                if c >= r || r - c > k {
                    prop_assert_eq!(ecc[(r, c)], Complex64::new(0.0, 0.0));
                }
                if r + 1 < p_count && c + 1 < p_count {
                    prop_assert_eq!(ecc[(r, c)], ecc[(r + 1, c + 1)]);
                }
            }
        }
    }
}
