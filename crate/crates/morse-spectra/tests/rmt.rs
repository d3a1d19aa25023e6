//! Random-matrix module tests: closed forms for n = 1, Weyl-integrand
//! normalisation, exact Gaussian piece integrals, ensemble sample statistics,
//! and the determinant identity cross-checked against direct Monte Carlo.

use morse_spectra::quadrature::{adaptive_simpson, adaptive_simpson_split, gauss_density};
use morse_spectra::rmt::{
    abs_poly_gauss_integral, expected_abs_det_goe_formula, expected_abs_det_mc,
    expected_abs_det_shifted, gauss_partial_moments, log_znorm, log_znorm_v, rho_mc, rho_quad,
    semicircle, theta, SymEnsemble,
};
use morse_spectra::rng::task_rng;

const SEED: u64 = 0x5eed_0001;

#[test]
fn rho_1_is_a_centred_gaussian() {
    // For a single eigenvalue the density is N(0, 2v) exactly.
    for &v in &[0.5, 1.0, 2.3] {
        for i in -6..=6 {
            let x = 0.7 * i as f64;
            let got = rho_quad(1, v, x).unwrap();
            let want = gauss_density(x, 2.0 * v);
            assert!(
                (got - want).abs() < 1e-12,
                "v = {v}, x = {x}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn rho_quad_normalizes_for_n_up_to_3() {
    for n in 1..=3 {
        for &v in &[0.7, 1.0] {
            let r = 2.0 * (n as f64 * v).sqrt() + 10.0 * (2.0 * v).sqrt();
            let f = |x: f64| rho_quad(n, v, x).unwrap();
            let total = adaptive_simpson(&f, -r, r, 1e-8);
            assert!(
                (total - 1.0).abs() < 1e-6,
                "n = {n}, v = {v}: ∫ρ = {total}"
            );
        }
    }
}

#[test]
fn rho_quad_4_normalizes() {
    let v: f64 = 1.0;
    let r = 2.0 * (4.0 * v).sqrt() + 8.0 * (2.0 * v).sqrt();
    // Composite Simpson on a fixed grid is enough to validate the n = 4
    // nested quadrature (each point evaluation is itself adaptive).
    let n_pts = 160; // even: Simpson needs an odd number of nodes
    let h = 2.0 * r / n_pts as f64;
    let mut total = 0.0;
    for i in 0..=n_pts {
        let x = -r + h * i as f64;
        let w = if i == 0 || i == n_pts {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * rho_quad(4, v, x).unwrap();
    }
    total *= h / 3.0;
    assert!((total - 1.0).abs() < 1e-4, "∫ρ_4 = {total}");
}

#[test]
fn rho_quad_matches_kde_at_n4() {
    let mut rng = task_rng(SEED, 41);
    for &x in &[0.0, 1.5, -3.0] {
        let quad = rho_quad(4, 1.0, x).unwrap();
        let mc = rho_mc(4, 1.0, x, 40_000, None, &mut rng).unwrap();
        // KDE carries O(bandwidth²) smoothing bias on top of sampling noise.
        let tol = 4.0 * mc.stderr + 0.5 * mc.bandwidth * mc.bandwidth;
        assert!(
            (quad - mc.value).abs() < tol,
            "x = {x}: quad {quad} vs mc {} ± {} (bw {})",
            mc.value,
            mc.stderr,
            mc.bandwidth
        );
    }
}

#[test]
fn theta_is_rho_times_gaussian_reweighting() {
    for &(n, v) in &[(2usize, 1.0f64), (3, 0.8)] {
        for i in -4..=4 {
            let x = 0.9 * i as f64;
            let rho = rho_quad(n, v, x).unwrap();
            let plus = theta(n, v, x, true).unwrap();
            let minus = theta(n, v, x, false).unwrap();
            let w = (x * x / (4.0 * v)).exp();
            assert!((plus - rho * w).abs() <= 1e-12 * plus.abs().max(1.0));
            assert!((minus - rho / w).abs() <= 1e-12 * minus.abs().max(1.0));
        }
    }
}

#[test]
fn partial_gaussian_moments_match_quadrature() {
    let sigma2 = 1.7;
    for &(a, b) in &[(-0.8, 2.1), (f64::NEG_INFINITY, 1.0), (-2.0, f64::INFINITY)] {
        let m = gauss_partial_moments(a, b, sigma2, 5);
        for (j, &mj) in m.iter().enumerate() {
            let lo = if a.is_finite() { a } else { -40.0 };
            let hi = if b.is_finite() { b } else { 40.0 };
            let f = |l: f64| l.powi(j as i32) * (-l * l / (2.0 * sigma2)).exp();
            let want = adaptive_simpson(&f, lo, hi, 1e-12);
            assert!(
                (mj - want).abs() < 1e-9,
                "j = {j}, [{a}, {b}]: {mj} vs {want}"
            );
        }
    }
}

#[test]
fn abs_poly_gauss_integral_matches_split_quadrature() {
    let knots = [-1.3, 0.2, 2.0];
    let v = 0.7;
    let got = abs_poly_gauss_integral(&knots, v);
    let f = |l: f64| {
        knots.iter().map(|k| (k - l).abs()).product::<f64>() * (-l * l / (4.0 * v)).exp()
    };
    let want = adaptive_simpson_split(&f, -30.0, 30.0, &knots, 1e-12);
    assert!((got - want).abs() < 1e-8, "{got} vs {want}");
}

#[test]
fn znorm_scaling_in_v_is_consistent() {
    for n in 1..=6 {
        // Z_n(1/2) = Z_n by definition of the v-scaled normalisation.
        assert!((log_znorm_v(n, 0.5) - log_znorm(n)).abs() < 1e-12);
        // Z_n(v) / Z_n(1) = (2v)^{n(n+1)/4}.
        let lhs = log_znorm_v(n, 1.7) - log_znorm_v(n, 1.0);
        let rhs = (n * (n + 1)) as f64 / 4.0 * (1.7f64.ln() - 0.0) + 0.0;
        let want = (n * (n + 1)) as f64 / 4.0 * (3.4f64.ln() - 2.0f64.ln());
        assert!((lhs - want).abs() < 1e-12, "n = {n}: {lhs} vs {want} ({rhs})");
    }
}

#[test]
fn ensemble_sample_statistics_match_covariance_pattern() {
    // Sym_3^{u,v}: E a_ij² = v (i < j), Var a_ii = 2v + u, Cov(a_ii, a_jj) = u,
    // and off-diagonal entries are uncorrelated with everything else.
    for &(u, v) in &[(0.4, 0.8), (-0.3, 0.8)] {
        let ens = SymEnsemble::new(3, u, v).unwrap();
        let mut rng = task_rng(SEED, 7);
        let n = 40_000;
        let (mut d11, mut d1122, mut off, mut cross) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let a = ens.sample(&mut rng);
            d11 += a[(0, 0)] * a[(0, 0)];
            d1122 += a[(0, 0)] * a[(1, 1)];
            off += a[(0, 1)] * a[(0, 1)];
            cross += a[(0, 1)] * a[(0, 2)];
        }
        let nn = n as f64;
        let se = 6.0 * (2.0 * v + u.abs() + 1.0) / nn.sqrt();
        assert!((d11 / nn - (2.0 * v + u)).abs() < se, "u = {u}: Var a_11");
        assert!((d1122 / nn - u).abs() < se, "u = {u}: Cov(a_11, a_22)");
        assert!((off / nn - v).abs() < se, "u = {u}: E a_12²");
        assert!((cross / nn).abs() < se, "u = {u}: E a_12 a_13");
    }
}

#[test]
fn ensemble_rejects_inadmissible_parameters() {
    assert!(SymEnsemble::new(3, 0.0, 0.0).is_err());
    assert!(SymEnsemble::new(3, -0.6, 0.8).is_err()); // 3u + 2v = -0.2 < 0
    assert!(SymEnsemble::new(2, -0.5, 0.6).is_ok()); // 2u + 2v = 0.2 > 0
}

#[test]
fn eigenvalues_are_sorted_and_sum_to_trace() {
    let ens = SymEnsemble::goe(5, 1.3).unwrap();
    let mut rng = task_rng(SEED, 8);
    for _ in 0..50 {
        let a = ens.sample(&mut rng);
        let tr: f64 = (0..5).map(|i| a[(i, i)]).sum();
        let ev = a.clone().symmetric_eigen().eigenvalues;
        let mut sorted: Vec<f64> = ev.iter().copied().collect();
        sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let sum: f64 = sorted.iter().sum();
        assert!((sum - tr).abs() < 1e-9 * tr.abs().max(1.0));
    }
    let ev = ens.sample_eigenvalues(&mut rng);
    assert!(ev.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn determinant_identity_matches_monte_carlo() {
    // E_{GOE_m^v} |det(A − c)| against direct averaging of sampled matrices.
    let mut rng = task_rng(SEED, 9);
    for &(m, v, c) in &[(2usize, 1.0f64, 0.7f64), (3, 0.8, -0.4), (3, 1.0, 0.0)] {
        let formula = expected_abs_det_goe_formula(m, v, c).unwrap();
        let ens = SymEnsemble::goe(m, v).unwrap();
        let (mc, se) = expected_abs_det_mc(&ens, c, 200_000, &mut rng);
        assert!(
            (formula - mc).abs() < 4.0 * se,
            "m = {m}, v = {v}, c = {c}: formula {formula} vs mc {mc} ± {se}"
        );
    }
}

#[test]
fn shifted_determinant_identity_matches_monte_carlo() {
    let mut rng = task_rng(SEED, 10);
    let (m, u, v, c) = (2usize, 0.8f64, 1.0f64, 0.5f64);
    let formula = expected_abs_det_shifted(m, u, v, c).unwrap();
    let ens = SymEnsemble::new(m, u, v).unwrap();
    let (mc, se) = expected_abs_det_mc(&ens, c, 200_000, &mut rng);
    assert!(
        (formula - mc).abs() < 4.0 * se,
        "formula {formula} vs mc {mc} ± {se}"
    );
}

#[test]
fn shifted_determinant_reduces_to_goe_as_u_vanishes() {
    let (m, v, c) = (3usize, 1.0f64, 0.6f64);
    let base = expected_abs_det_goe_formula(m, v, c).unwrap();
    let small = expected_abs_det_shifted(m, 1e-6, v, c).unwrap();
    assert!((small - base).abs() < 1e-4 * base, "{small} vs {base}");
}

#[test]
fn shifted_determinant_rejects_heavy_diagonal_shift() {
    // At u ≥ 2v the convolution integrand γ_u(c−y)·e^{y²/4v} stops decaying.
    assert!(expected_abs_det_shifted(2, 2.0, 1.0, 0.0).is_err());
    assert!(expected_abs_det_shifted(2, 2.5, 1.0, 0.0).is_err());
}

#[test]
fn semicircle_normalizes_and_matches_bulk_spectrum() {
    let v: f64 = 1.0;
    let f = |x: f64| semicircle(v, x).unwrap();
    let total = adaptive_simpson(&f, -2.0, 2.0, 1e-10);
    assert!((total - 1.0).abs() < 1e-6, "∫semicircle = {total}");

    // Pooled eigenvalues of GOE_n^v, scaled by 1/√n, should land near the
    // semicircle in the bulk already at n = 60.
    let n = 60;
    let ens = SymEnsemble::goe(n, v).unwrap();
    let mut rng = task_rng(SEED, 11);
    let scale = (n as f64).sqrt();
    let mut pooled: Vec<f64> = Vec::new();
    for _ in 0..60 {
        pooled.extend(ens.sample_eigenvalues(&mut rng).iter().map(|l| l / scale));
    }
    for &x in &[0.0, 0.8, -1.2] {
        let est = morse_spectra::rmt::kde_at(&pooled, x, None, 60);
        let want = semicircle(v, x).unwrap();
        let tol = 5.0 * est.stderr + est.bandwidth + 2.0 / n as f64;
        assert!(
            (est.value - want).abs() < tol,
            "x = {x}: kde {} ± {} vs semicircle {want}",
            est.value,
            est.stderr
        );
    }
}
