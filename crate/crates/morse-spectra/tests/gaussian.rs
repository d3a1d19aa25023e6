//! Gaussian-vector tests: closed-form bivariate conditioning, degenerate
//! observation detection, sampling statistics, and agreement between the
//! generic 2-jet conditioning path and the closed-form conditional Hessian
//! ensemble.

use nalgebra::{DMatrix, DVector};

use morse_spectra::gaussian::{
    conditional_hessian_law, flatten_sym, hessian_len, limit_jet_law, unflatten_sym,
    GaussianVector,
};
use morse_spectra::rng::task_rng;
use morse_spectra::weights::{shape_params, Weight};
use morse_spectra::Error;

const SEED: u64 = 0x5eed_0002;

#[test]
fn rejects_asymmetric_and_indefinite_covariances() {
    let mean = DVector::zeros(2);
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
    assert!(GaussianVector::new(mean.clone(), asym).is_err());

    let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // eig −1
    match GaussianVector::new(mean, indef) {
        Err(Error::NotPsd { min_eig }) => assert!(min_eig < -0.5),
        other => panic!("expected NotPsd, got {other:?}"),
    }
}

#[test]
fn clips_roundoff_negative_eigenvalues() {
    // Rank-one matrix perturbed at the roundoff scale: the tiny negative
    // eigenvalue must be clipped, not rejected, and sampling must work.
    let mut cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    cov[(0, 0)] -= 1e-14;
    let g = GaussianVector::new(DVector::zeros(2), cov).unwrap();
    let mut rng = task_rng(SEED, 0);
    let x = g.sample(&mut rng);
    assert!((x[0] - x[1]).abs() < 1e-6); // rank-one: coordinates agree
}

#[test]
fn pushforward_transforms_mean_and_covariance() {
    let mean = DVector::from_row_slice(&[1.0, -2.0]);
    let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let g = GaussianVector::new(mean, cov.clone()).unwrap();
    let l = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, -2.0]);
    let p = g.pushforward(&l).unwrap();
    let want_mean = &l * g.mean();
    let want_cov = &l * &cov * l.transpose();
    assert!((p.mean() - want_mean).norm() < 1e-12);
    assert!((p.cov() - want_cov).norm() < 1e-12);
}

#[test]
fn bivariate_conditioning_matches_closed_form() {
    let (a, b, c) = (2.0, 1.5, 0.8);
    let (m1, m2) = (0.4, -1.1);
    let g = GaussianVector::new(
        DVector::from_row_slice(&[m1, m2]),
        DMatrix::from_row_slice(2, 2, &[a, c, c, b]),
    )
    .unwrap();
    let t = 0.9;
    let cond = g.condition(&[1], &[t]).unwrap();
    assert_eq!(cond.dim(), 1);
    assert!((cond.mean()[0] - (m1 + c / b * (t - m2))).abs() < 1e-12);
    assert!((cond.cov()[(0, 0)] - (a - c * c / b)).abs() < 1e-12);
}

#[test]
fn conditioning_on_a_degenerate_observation_fails_loudly() {
    // Coordinates 0 and 1 are perfectly correlated; observing both presents
    // a deterministic linear combination.
    // cov = B·Bᵀ with identical first two rows of B, hence PSD with a
    // singular leading 2×2 block.
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.2, 1.0]);
    let cov = &b * b.transpose();
    let g = GaussianVector::new(DVector::zeros(3), cov).unwrap();
    match g.condition(&[0, 1], &[0.3, 0.3]) {
        Err(Error::DegenerateCondition { rel_eig, .. }) => assert!(rel_eig.abs() < 1e-10),
        other => panic!("expected DegenerateCondition, got {other:?}"),
    }
}

#[test]
fn sample_statistics_match_the_law() {
    let mean = DVector::from_row_slice(&[0.5, -1.0, 2.0]);
    let cov = DMatrix::from_row_slice(
        3,
        3,
        &[2.0, 0.6, -0.4, 0.6, 1.0, 0.2, -0.4, 0.2, 1.5],
    );
    let g = GaussianVector::new(mean.clone(), cov.clone()).unwrap();
    let mut rng = task_rng(SEED, 1);
    let n = 100_000;
    let mut sum = DVector::zeros(3);
    let mut sum2 = DMatrix::zeros(3, 3);
    for _ in 0..n {
        let x = g.sample(&mut rng);
        let d = &x - &mean;
        sum += &x;
        sum2 += &d * d.transpose();
    }
    let nn = n as f64;
    let emp_mean = sum / nn;
    let emp_cov = sum2 / nn;
    let tol = 6.0 * 2.0 / nn.sqrt(); // 6σ on entries with variance ≲ 4
    assert!((emp_mean - mean).amax() < tol);
    assert!((emp_cov - cov).amax() < 3.0 * tol);
}

#[test]
fn flatten_is_a_frobenius_isometry() {
    let h = DMatrix::from_row_slice(
        3,
        3,
        &[1.0, 0.3, -0.7, 0.3, 2.0, 0.1, -0.7, 0.1, -1.5],
    );
    let v = flatten_sym(&h);
    assert_eq!(v.len(), hessian_len(3));
    let frob: f64 = h.iter().map(|x| x * x).sum();
    assert!((v.norm_squared() - frob).abs() < 1e-12);
    assert!((unflatten_sym(&v, 3) - &h).amax() < 1e-14);
}

#[test]
fn generic_conditioning_recovers_the_closed_form_hessian_law() {
    // Condition the full 2-jet law on {value = x, gradient = 0} and compare
    // with the closed-form mean −(x d/š)·Id + Sym_m^{2κh, h} fluctuation.
    let cases: [(Weight, usize); 2] = [
        (Weight::BumpOffset { c: 2.0 }, 2),
        (Weight::Gaussian, 3),
    ];
    for (w, m) in cases {
        let p = shape_params(&w, m, 1e-10).unwrap();
        let jet = limit_jet_law(&p).unwrap();
        let x = 1.3;
        let mut obs = vec![0usize];
        obs.extend(1..=m);
        let mut vals = vec![x];
        vals.extend(std::iter::repeat(0.0).take(m));
        let cond = jet.condition(&obs, &vals).unwrap();

        let (mean, ens) = conditional_hessian_law(&p, x).unwrap();
        assert!((cond.mean() - &mean).amax() < 1e-9, "mean mismatch for m = {m}");

        // Expected flattened covariance of Sym_m^{u,v}: diagonal block
        // u·J + 2v·Id, off-diagonal coordinates 2v·Id, no cross terms.
        let (u, v) = (2.0 * p.kappa * p.constants.h, p.constants.h);
        let hl = hessian_len(m);
        let mut want = DMatrix::zeros(hl, hl);
        for i in 0..m {
            for j in 0..m {
                want[(i, j)] = u + if i == j { 2.0 * v } else { 0.0 };
            }
        }
        for k in m..hl {
            want[(k, k)] = 2.0 * v;
        }
        assert!(
            (cond.cov() - &want).amax() < 1e-9,
            "covariance mismatch for m = {m}"
        );

        // Cross-validate the ensemble sampler against the same pattern.
        let mut rng = task_rng(SEED, 2);
        let n = 40_000;
        let mut acc = DMatrix::zeros(hl, hl);
        for _ in 0..n {
            let a = ens.sample(&mut rng);
            let f = flatten_sym(&a);
            acc += &f * f.transpose();
        }
        acc /= n as f64;
        let scale = (u.abs() + 2.0 * v).max(1.0);
        assert!(
            (acc - &want).amax() < 8.0 * scale / (n as f64).sqrt() * 3.0,
            "sampled covariance mismatch for m = {m}"
        );
    }
}
