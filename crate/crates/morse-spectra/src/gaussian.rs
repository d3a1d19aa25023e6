//! Finite-dimensional Gaussian vectors: exact conditioning and sampling.
//!
//! Everything downstream of the field model reduces, via the Kac–Rice
//! machinery, to computations on joint Gaussian laws of a field value, its
//! gradient, and its Hessian at a point.  This module provides the small
//! amount of multivariate-Gaussian linear algebra those computations need:
//!
//! * [`GaussianVector`] — a mean vector and covariance matrix, validated to be
//!   (numerically) positive semi-definite at construction, with
//!   - linear pushforwards `x ↦ Lx` (law `N(Lμ, LΣLᵀ)`),
//!   - exact conditioning on a subset of coordinates via the Schur
//!     complement `Σ₁₁ − Σ₁₂ Σ₂₂⁻¹ Σ₂₁`,
//!   - sampling through a symmetric eigendecomposition square root (robust
//!     for the rank-deficient covariances produced by conditioning).
//! * [`limit_jet_law`] — the scaling limit of the joint law of
//!   `(ǔ, ∇ǔ, ∇²ǔ)` for an isotropic field with moment profile
//!   `(š, d, h)`: the 2-jet covariance pattern
//!
//!   ```text
//!   E[ǔ²] = š,   E[∂ᵢǔ ∂ⱼǔ] = d δᵢⱼ,   E[ǔ ∂ᵢ∂ⱼǔ] = −d δᵢⱼ,
//!   E[∂ᵢ∂ⱼǔ ∂ₖ∂ₗǔ] = h (δᵢₖδⱼₗ + δᵢₗδⱼₖ + δᵢⱼδₖₗ),
//!   ```
//!
//!   with all odd-order correlations vanishing by isotropy.  Conditioning
//!   this law on `{ǔ = x, ∇ǔ = 0}` recovers the description of the Hessian
//!   as `−(x d/š)·Id` plus an independent `Sym_m^{2κh, h}` fluctuation, which
//!   [`conditional_hessian_law`] also provides in closed form; the
//!   module tests check the two derivations against each other.
//!
//! Hessians are flattened in an orthonormal basis of the space of symmetric
//! matrices: diagonal entries first, then the strict upper triangle scaled by
//! `√2` (row-major `(0,1), (0,2), …`).  In these coordinates Euclidean inner
//! products of coefficient vectors agree with the Frobenius inner product of
//! the matrices, so covariance patterns keep their matrix meaning.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rmt::SymEnsemble;
use crate::weights::MomentProfile;

/// Relative eigenvalue threshold below which a covariance direction is
/// treated as deterministic (degenerate) during conditioning.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Relative magnitude of negative eigenvalues tolerated (and clipped to zero)
/// when validating a covariance matrix; anything more negative is rejected.
pub const PSD_CLIP: f64 = 1e-12;

/// A multivariate Gaussian `N(μ, Σ)`.
#[derive(Debug, Clone)]
pub struct GaussianVector {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// `Σ = R Rᵀ` (eigendecomposition square root; columns of rank-deficient
    /// directions are zero).
    root: DMatrix<f64>,
}

impl GaussianVector {
    /// Validate and construct.
    ///
    /// `cov` must be symmetric to `1e-10` relative and positive semi-definite
    /// up to the [`PSD_CLIP`] tolerance: eigenvalues in `(−clip·λ_max, 0)` are
    /// clipped to zero (they arise routinely from Schur complements), anything
    /// more negative is an error.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "covariance is {}×{} but the mean has dimension {n}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let scale = cov.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for i in 0..n {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale.max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        // Symmetrise exactly, then eigendecompose for the PSD check and the
        // sampling square root in one pass.
        let sym = 0.5 * (&cov + cov.transpose());
        let eig = sym.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l));
        let floor = -PSD_CLIP * lmax.max(1e-300);
        let mut clipped = eig.eigenvalues.clone();
        for l in clipped.iter_mut() {
            if *l < floor {
                return Err(Error::NotPsd { min_eig: *l });
            }
            if *l < 0.0 {
                *l = 0.0;
            }
        }
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&clipped.map(f64::sqrt));
        Ok(Self { mean, cov: sym, root })
    }

    /// A standard `N(0, Id)` in dimension `n`.
    pub fn standard(n: usize) -> Self {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity is PSD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// The law of `Lx`, `x ~ N(μ, Σ)`.
    pub fn pushforward(&self, l: &DMatrix<f64>) -> Result<Self> {
        if l.ncols() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "pushforward matrix has {} columns, vector has dimension {}",
                l.ncols(),
                self.dim()
            )));
        }
        Self::new(l * &self.mean, l * &self.cov * l.transpose())
    }

    /// Condition on `x[observed[k]] = values[k]` and return the law of the
    /// remaining coordinates (in their original relative order).
    ///
    /// Fails with [`Error::DegenerateCondition`] when the observed block has
    /// an eigenvalue below [`DEGENERACY_THRESHOLD`] times its largest one:
    /// the observation then contains a (numerically) deterministic linear
    /// combination and the Schur complement is meaningless.  The offending
    /// direction is reported to make the failure diagnosable.
    pub fn condition(&self, observed: &[usize], values: &[f64]) -> Result<Self> {
        let n = self.dim();
        if observed.len() != values.len() {
            return Err(Error::InvalidParameter(
                "observed index and value lists differ in length".into(),
            ));
        }
        let mut is_obs = vec![false; n];
        for &i in observed {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "observed index {i} out of range for dimension {n}"
                )));
            }
            if std::mem::replace(&mut is_obs[i], true) {
                return Err(Error::InvalidParameter(format!("index {i} observed twice")));
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !is_obs[i]).collect();
        let k = observed.len();
        let f = free.len();

        let s22 = DMatrix::from_fn(k, k, |a, b| self.cov[(observed[a], observed[b])]);
        let s12 = DMatrix::from_fn(f, k, |a, b| self.cov[(free[a], observed[b])]);
        let s11 = DMatrix::from_fn(f, f, |a, b| self.cov[(free[a], free[b])]);

        // Invert the observed block through its eigendecomposition so a
        // near-null direction can be detected and named.
        let eig = s22.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        let (mut lmin, mut imin) = (f64::INFINITY, 0);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l < lmin {
                lmin = l;
                imin = i;
            }
        }
        if lmin <= DEGENERACY_THRESHOLD * lmax.max(1e-300) {
            let dir: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            return Err(Error::DegenerateCondition {
                null_dir: dir,
                rel_eig: lmin / lmax.max(1e-300),
            });
        }
        let inv = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
            * eig.eigenvectors.transpose();

        let dv = DVector::from_fn(k, |a, _| values[a] - self.mean[observed[a]]);
        let gain = &s12 * inv;
        let mean = DVector::from_fn(f, |a, _| self.mean[free[a]]) + &gain * dv;
        let cov = s11 - gain * s12.transpose();
        Self::new(mean, cov)
    }

    /// One draw, through the eigendecomposition square root.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.root * z
    }
}

/// Number of Hessian coordinates in dimension `m`.
pub fn hessian_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Flatten a symmetric matrix into the orthonormal coordinates used by this
/// module: the diagonal, then the strict upper triangle times `√2`.
pub fn flatten_sym(h: &DMatrix<f64>) -> DVector<f64> {
    let m = h.nrows();
    let mut out = DVector::zeros(hessian_len(m));
    let mut idx = m;
    for i in 0..m {
        out[i] = h[(i, i)];
    }
    for i in 0..m {
        for j in i + 1..m {
            out[idx] = std::f64::consts::SQRT_2 * h[(i, j)];
            idx += 1;
        }
    }
    out
}

/// Inverse of [`flatten_sym`].
pub fn unflatten_sym(v: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        h[(i, i)] = v[i];
    }
    let mut idx = m;
    for i in 0..m {
        for j in i + 1..m {
            let x = v[idx] / std::f64::consts::SQRT_2;
            h[(i, j)] = x;
            h[(j, i)] = x;
            idx += 1;
        }
    }
    h
}

/// The limiting joint Gaussian law of `(ǔ, ∇ǔ, ∇²ǔ)` at a point, in
/// coordinates `(value; gradient; flattened Hessian)` of dimension
/// `1 + m + m(m+1)/2`.
///
/// The covariance is the isotropic 2-jet pattern determined by the moment
/// profile: `Var ǔ = š`, gradient `d·Id` independent of everything else,
/// `Cov(ǔ, ∂ᵢ²ǔ) = −d`, and the fourth-order Hessian pattern with scale `h`.
pub fn limit_jet_law(profile: &MomentProfile) -> Result<GaussianVector> {
    let m = profile.constants.m;
    let (s_check, d, h) = (profile.s_check, profile.constants.d, profile.constants.h);
    let hl = hessian_len(m);
    let n = 1 + m + hl;
    let mut cov = DMatrix::zeros(n, n);
    cov[(0, 0)] = s_check;
    for i in 0..m {
        cov[(1 + i, 1 + i)] = d;
    }
    let hoff = 1 + m;
    // value–Hessian coupling: only the diagonal entries correlate with ǔ.
    for i in 0..m {
        cov[(0, hoff + i)] = -d;
        cov[(hoff + i, 0)] = -d;
    }
    // Hessian block: diagonal entries have variance 3h and pairwise
    // covariance h; orthonormal off-diagonal coordinates have variance 2h and
    // no cross terms (E[(√2 ∂ᵢ∂ⱼǔ)²] = 2h for i < j).
    for i in 0..m {
        for j in 0..m {
            cov[(hoff + i, hoff + j)] = if i == j { 3.0 * h } else { h };
        }
    }
    for k in m..hl {
        cov[(hoff + k, hoff + k)] = 2.0 * h;
    }
    GaussianVector::new(DVector::zeros(n), cov)
}

/// The law of the Hessian conditioned on `{ǔ = x, ∇ǔ = 0}`, in closed form:
/// mean `−(x d/š)·Id` plus an independent `Sym_m^{2κh, h}` fluctuation.
///
/// Returns the deterministic part as a flattened vector together with the
/// fluctuation ensemble.  (The gradient is independent of the 2-jet's even
/// components, so only the value observation moves the mean.)
pub fn conditional_hessian_law(profile: &MomentProfile, x: f64) -> Result<(DVector<f64>, SymEnsemble)> {
    let m = profile.constants.m;
    let (s_check, d, h) = (profile.s_check, profile.constants.d, profile.constants.h);
    let mut mean = DVector::zeros(hessian_len(m));
    for i in 0..m {
        mean[i] = -x * d / s_check;
    }
    let ens = SymEnsemble::new(m, 2.0 * profile.kappa * h, h)?;
    Ok((mean, ens))
}
