//! Random spectral fields on flat tori and the round 2-sphere.
//!
//! The field is the Gaussian superposition
//!
//! ```text
//! u(p) = Σ_k X_k √w(ε √λ_k) Ψ_k(p),       X_k i.i.d. N(0,1),
//! ```
//!
//! over a real orthonormal Laplace eigenbasis `Ψ_k`. On `T^m = (ℝ/2πℤ)^m`
//! the eigenfunctions are `cos(k·θ)` and `sin(k·θ)` for lattice vectors
//! `k ∈ ℤ^m` (eigenvalue `|k|²`), so the covariance kernel is the lattice sum
//!
//! ```text
//! E u(x) u(y) = (2π)^{-m} Σ_{k∈ℤ^m} w(ε|k|) e^{i k·(x−y)},
//! ```
//!
//! and every mixed derivative of the kernel on the diagonal is an explicit
//! lattice sum `(2π)^{-m} Σ w(ε|k|) k^{α+β}` (up to a sign from the `i`
//! powers). On `S²` the eigenfunctions are spherical harmonics (eigenvalue
//! `ℓ(ℓ+1)`) and the kernel is the Legendre series
//! `F(p·q) = Σ_ℓ w(ε√(ℓ(ℓ+1))) (2ℓ+1)/(4π) P_ℓ(p·q)`.
//!
//! Everything downstream needs *exact* jets (value, gradient, Hessian), not
//! finite differences:
//!
//! * on the torus the jet at a point is a trigonometric sum, evaluated with
//!   per-axis complex power tables so a jet costs `O(K)` setup plus one
//!   complex multiply per retained mode;
//! * on the sphere each spherical harmonic extends to a harmonic homogeneous
//!   polynomial (a solid harmonic), whose ambient partial derivatives obey
//!   exact ladder identities lowering the degree by one; the covariant
//!   (sphere) Hessian is the tangential part of the ambient one corrected
//!   by the radial derivative times the metric.
//!
//! Critical points are located by seeding Newton's method from a fine grid
//! (sign-change cells of the gradient components plus local minima of
//! `|∇u|²`) and certified by the Poincaré–Hopf identity `Σ (−1)^index = χ`
//! together with count stability under grid refinement.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, ln_gamma};
use crate::rng::task_rng;
use crate::weights::{moment, MomentProfile, Weight};

/// Hard cap on retained torus modes (memory guard for small ε on `T³`).
pub const MAX_MODES: usize = 4_000_000;

/// Hard cap on evaluation-grid points (`n^m`).
pub const MAX_GRID_POINTS: usize = 1 << 24;

/// Spherical-harmonic degree cap.
pub const LMAX_CAP: usize = 120;

/// Relative band below which a Hessian eigenvalue is treated as degenerate.
///
/// The fields are almost surely Morse for small ε, so a flagged point
/// indicates numerical trouble, not geometry.
pub const DEGENERACY_BAND: f64 = 1e-8;

/// The model manifolds: flat tori `(ℝ/2πℤ)^m` for `m ≤ 3` and the unit `S²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Manifold {
    /// Flat torus of dimension `m ∈ {1, 2, 3}` with side `2π`.
    Torus {
        /// dimension
        m: usize,
    },
    /// The unit round 2-sphere.
    Sphere,
}

impl Manifold {
    /// Validate the dimension range.
    pub fn validate(&self) -> Result<()> {
        match self {
            Manifold::Torus { m } if (1..=3).contains(m) => Ok(()),
            Manifold::Torus { m } => Err(Error::InvalidParameter(format!(
                "torus dimension must be 1, 2, or 3, got {m}"
            ))),
            Manifold::Sphere => Ok(()),
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Torus { m } => *m,
            Manifold::Sphere => 2,
        }
    }

    /// Riemannian volume: `(2π)^m` for the torus, `4π` for the sphere.
    pub fn volume(&self) -> f64 {
        match self {
            Manifold::Torus { m } => (2.0 * std::f64::consts::PI).powi(*m as i32),
            Manifold::Sphere => 4.0 * std::f64::consts::PI,
        }
    }

    /// Euler characteristic (0 for tori, 2 for the sphere).
    pub fn euler_characteristic(&self) -> i64 {
        match self {
            Manifold::Torus { .. } => 0,
            Manifold::Sphere => 2,
        }
    }
}

/// One retained torus mode: a ±k lattice pair with its amplitude and the
/// two standard Gaussian draws multiplying the cosine/sine pair.
#[derive(Debug, Clone, Copy)]
pub struct TorusMode {
    /// lattice representative (first nonzero component positive)
    pub k: [i64; 3],
    /// `√(2 w(ε|k|) / (2π)^m)`
    pub amp: f64,
    /// coefficient of `cos(k·θ)`
    pub a: f64,
    /// coefficient of `sin(k·θ)`
    pub b: f64,
}

/// A sampled random field on `T^m`.
#[derive(Debug, Clone)]
pub struct TorusField {
    /// torus dimension
    pub m: usize,
    /// spectral scale
    pub eps: f64,
    /// lattice cutoff: modes with `|k| ≤ cutoff` are retained
    pub cutoff: i64,
    /// constant-mode contribution `X₀ √(w(0)/(2π)^m)`
    pub constant: f64,
    /// variance `w(0)/(2π)^m` of the constant mode
    pub constant_var: f64,
    /// retained ±k pairs
    pub modes: Vec<TorusMode>,
    /// upper bound on the discarded spectral mass `(2π)^{-m} Σ_{|k|>K} w(ε|k|)`
    pub truncation_bound: f64,
    /// master seed used for the coefficient draws
    pub seed: u64,
}

/// A sampled random field on `S²`.
#[derive(Debug, Clone)]
pub struct SphereField {
    /// retained spherical-harmonic degrees `ℓ ≤ lmax`
    pub lmax: usize,
    /// spectral scale
    pub eps: f64,
    /// complex coefficients `c_{ℓm}` for `0 ≤ m ≤ ℓ`, flattened by
    /// `ℓ(ℓ+1)/2 + m`; the field is `Σ Re(c_{ℓm} Y_ℓ^m)` with `c_{ℓ0}` real.
    pub coeffs: Vec<Complex64>,
    /// upper bound on the discarded spectral mass `Σ_{ℓ>L} w_ℓ (2ℓ+1)/(4π)`
    pub truncation_bound: f64,
    /// master seed used for the coefficient draws
    pub seed: u64,
}

/// Either concrete field, with a shared interface for jets and counting.
#[derive(Debug, Clone)]
pub enum Field {
    /// torus field
    Torus(TorusField),
    /// sphere field
    Sphere(SphereField),
}

/// Value, gradient, and (covariant) Hessian of the field at a point, in an
/// orthonormal frame: plain partials on the torus, the tangent frame returned
/// by [`sphere_frame`] on the sphere.
#[derive(Debug, Clone)]
pub struct Jet {
    /// `u(p)`
    pub value: f64,
    /// gradient components
    pub grad: DVector<f64>,
    /// symmetric Hessian
    pub hess: DMatrix<f64>,
}

/// A located critical point.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    /// torus coordinates in `[0, 2π)^m`, or the ambient unit vector on `S²`
    pub location: Vec<f64>,
    /// critical value `u(p)`
    pub value: f64,
    /// gradient norm at the accepted Newton iterate
    pub grad_residual: f64,
    /// Hessian eigenvalues (ascending)
    pub hessian_eigenvalues: Vec<f64>,
    /// Morse index: number of negative Hessian eigenvalues
    pub index: usize,
    /// eigenvalue inside the degeneracy band — numerical red flag
    pub degenerate: bool,
}

/// Outcome of a critical-point search with its completeness certificate.
#[derive(Debug, Clone)]
pub struct CriticalSet {
    /// deduplicated critical points
    pub points: Vec<CriticalPoint>,
    /// Poincaré–Hopf and refinement checks passed
    pub reliable: bool,
    /// Newton seeds dropped for non-convergence
    pub dropped_seeds: usize,
    /// human-readable reason when `reliable` is false
    pub note: Option<String>,
}

impl CriticalSet {
    /// `Σ (−1)^index` over all points.
    pub fn signed_count(&self) -> i64 {
        self.points
            .iter()
            .map(|p| if p.index % 2 == 0 { 1 } else { -1 })
            .sum()
    }
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

/// Smallest lattice cutoff `K ≥ 1` with `w(εK) ≤ tol · sup w`.
fn spectral_cutoff(w: &Weight, eps: f64, trunc_tol: f64) -> Result<i64> {
    if let Weight::BumpOffset { c } = w {
        // compact support: exact cutoff
        return Ok(((c + 1.0) / eps).ceil() as i64);
    }
    let bar = trunc_tol * w.sup();
    // all families decay monotonically past their peak, which sits below
    // t = 1 for the decay-law families and at the table end for custom tables
    let start = match w {
        Weight::CustomTable { ts, .. } => (ts[ts.len() - 1] / eps).ceil() as i64,
        _ => 1,
    };
    let mut k = start.max(1);
    loop {
        if w.eval(eps * k as f64) <= bar {
            return Ok(k);
        }
        k += 1;
        if k > 100_000_000 {
            return Err(Error::TailBound(format!(
                "no spectral cutoff below 1e8 for ε = {eps} at tolerance {trunc_tol}"
            )));
        }
    }
}

/// Upper bound on the discarded torus spectral mass
/// `(2π)^{-m} Σ_{|k| > K} w(ε|k|)`, via the radial integral comparison
/// `Σ_{|k|>K} w(ε|k|) ≤ (2π^{m/2}/Γ(m/2)) ∫_{K−√m}^∞ w(εr) r^{m−1} dr`
/// (each unit cell around a lattice point with `|k| > K` lies in
/// `{|x| > K − √m}` and `w` is decreasing there).
fn torus_truncation_bound(w: &Weight, eps: f64, m: usize, cutoff: i64) -> f64 {
    // every discarded mode has |k| ≥ cutoff + 1; past a compact support the
    // discarded mass is exactly zero
    if eps * (cutoff as f64 + 1.0) >= w.support_end() {
        return 0.0;
    }
    let lo = (cutoff as f64 - (m as f64).sqrt()).max(0.0);
    // march the upper limit outwards until the integrand is negligible
    // relative to its value at the lower limit
    let f = |r: f64| w.eval(eps * r) * r.powi(m as i32 - 1);
    let f_lo = f(lo).max(f64::MIN_POSITIVE);
    let mut hi = (lo + 8.0 / eps).min(w.support_end() / eps);
    while hi.is_finite() && f(hi) > 1e-14 * f_lo && hi < lo + 1e6 {
        hi += 8.0 / eps;
    }
    let surface = 2.0 * std::f64::consts::PI.powf(m as f64 / 2.0) / ln_gamma(m as f64 / 2.0).exp();
    let integral = adaptive_simpson(&f, lo, hi, 1e-8 * f_lo * (hi - lo));
    surface * integral / (2.0 * std::f64::consts::PI).powi(m as i32)
}

/// Build a random field: draw all spectral coefficients deterministically
/// from `seed` and record the truncation bookkeeping.
pub fn build_field(manifold: Manifold, w: &Weight, eps: f64, trunc_tol: f64, seed: u64) -> Result<Field> {
    manifold.validate()?;
    w.validate()?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("ε must be > 0, got {eps}")));
    }
    if !(trunc_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation tolerance must be > 0, got {trunc_tol}"
        )));
    }
    match manifold {
        Manifold::Torus { m } => Ok(Field::Torus(build_torus_field(m, w, eps, trunc_tol, seed)?)),
        Manifold::Sphere => Ok(Field::Sphere(build_sphere_field(w, eps, trunc_tol, seed)?)),
    }
}

fn build_torus_field(m: usize, w: &Weight, eps: f64, trunc_tol: f64, seed: u64) -> Result<TorusField> {
    let cutoff = spectral_cutoff(w, eps, trunc_tol)?;
    let pair_estimate = match m {
        1 => cutoff as usize,
        2 => (std::f64::consts::PI / 2.0 * (cutoff as f64 + 1.0).powi(2)) as usize,
        _ => (2.0 * std::f64::consts::PI / 3.0 * (cutoff as f64 + 1.0).powi(3)) as usize,
    };
    if pair_estimate > MAX_MODES {
        return Err(Error::InvalidParameter(format!(
            "ε = {eps} needs lattice cutoff K = {cutoff} (≈{pair_estimate} modes) beyond the \
             {MAX_MODES}-mode budget on T^{m}"
        )));
    }
    let norm = (2.0 * std::f64::consts::PI).powi(m as i32);
    let mut rng = task_rng(seed, 0x70f1_0000);
    let constant = (w.eval(0.0) / norm).sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let mut modes = Vec::new();
    // one representative per ±k pair: first nonzero component positive;
    // fixed lexicographic enumeration keeps the draw order deterministic
    let range = |first: bool| if first { 0..=cutoff } else { -cutoff..=cutoff };
    for k1 in range(true) {
        let r2 = |k2: i64| cutoff * cutoff - k1 * k1 - k2 * k2;
        for k2 in if m >= 2 { range(k1 == 0) } else { 0..=0 } {
            for k3 in if m == 3 { range(k1 == 0 && k2 == 0) } else { 0..=0 } {
                if k1 == 0 && k2 == 0 && k3 == 0 {
                    continue;
                }
                if r2(k2) - k3 * k3 < 0 {
                    continue;
                }
                let kn = ((k1 * k1 + k2 * k2 + k3 * k3) as f64).sqrt();
                let a: f64 = rng.sample(rand_distr::StandardNormal);
                let b: f64 = rng.sample(rand_distr::StandardNormal);
                let amp = (2.0 * w.eval(eps * kn) / norm).sqrt();
                if amp > 0.0 {
                    modes.push(TorusMode { k: [k1, k2, k3], amp, a, b });
                }
            }
        }
    }
    Ok(TorusField {
        m,
        eps,
        cutoff,
        constant,
        constant_var: w.eval(0.0) / norm,
        modes,
        truncation_bound: torus_truncation_bound(w, eps, m, cutoff),
        seed,
    })
}

fn build_sphere_field(w: &Weight, eps: f64, trunc_tol: f64, seed: u64) -> Result<SphereField> {
    let bar = trunc_tol * w.sup();
    let sq = |l: usize| ((l * (l + 1)) as f64).sqrt();
    let mut lmax = 1;
    while w.eval(eps * sq(lmax)) > bar {
        lmax += 1;
        if lmax > LMAX_CAP {
            return Err(Error::InvalidParameter(format!(
                "ε = {eps} needs spherical-harmonic degree beyond the cap {LMAX_CAP}; \
                 increase ε or the truncation tolerance"
            )));
        }
    }
    // discarded mass: Σ_{ℓ>L} w_ℓ (2ℓ+1)/(4π), summed until negligible
    let mut trunc = 0.0;
    let mut l = lmax + 1;
    loop {
        let term = w.eval(eps * sq(l)) * (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI);
        trunc += term;
        if term < 1e-16 * trunc.max(1e-300) || l > 10 * lmax + 1000 {
            break;
        }
        l += 1;
    }
    let mut rng = task_rng(seed, 0x70f2_0000);
    let mut coeffs = Vec::with_capacity((lmax + 1) * (lmax + 2) / 2);
    for l in 0..=lmax {
        let amp = w.eval(eps * sq(l)).sqrt();
        for m in 0..=l {
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            let b: f64 = rng.sample(rand_distr::StandardNormal);
            // u = Σ_ℓ amp [a₀ Y_ℓ⁰ + Σ_{m>0} √2 (a Re Y_ℓ^m + b Im Y_ℓ^m)]
            //   = Σ Re(c_{ℓm} Y_ℓ^m),  c_{ℓ0} = amp·a₀, c_{ℓm} = amp·√2(a − i b)
            let c = if m == 0 {
                Complex64::new(amp * a, 0.0)
            } else {
                Complex64::new(amp * a, -amp * b) * 2f64.sqrt()
            };
            coeffs.push(c);
        }
    }
    Ok(SphereField { lmax, eps, coeffs, truncation_bound: trunc, seed })
}

// ---------------------------------------------------------------------------
// torus jets and grids
// ---------------------------------------------------------------------------

impl TorusField {
    /// Exact jet at `θ` by the mode sum, using per-axis power tables
    /// `e^{i p θ_j}` so each mode costs one complex multiply.
    pub fn eval_jet(&self, theta: &[f64]) -> Jet {
        let m = self.m;
        assert_eq!(theta.len(), m, "point dimension mismatch");
        let kmax = self.cutoff as usize;
        // pows[j][p] = e^{i p θ_j}
        let mut pows: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        for t in theta.iter().take(m) {
            let z = Complex64::from_polar(1.0, *t);
            let mut axis = Vec::with_capacity(kmax + 1);
            let mut cur = Complex64::new(1.0, 0.0);
            for _ in 0..=kmax {
                axis.push(cur);
                cur *= z;
            }
            pows.push(axis);
        }
        let lookup = |axis: &Vec<Complex64>, p: i64| -> Complex64 {
            if p >= 0 {
                axis[p as usize]
            } else {
                axis[(-p) as usize].conj()
            }
        };
        let mut value = self.constant;
        let mut grad = DVector::zeros(m);
        let mut hess = DMatrix::zeros(m, m);
        for mode in &self.modes {
            let mut e = lookup(&pows[0], mode.k[0]);
            for j in 1..m {
                e *= lookup(&pows[j], mode.k[j]);
            }
            // u picks Re(c e^{ikθ}) with c = amp (a − i b)
            let z = Complex64::new(mode.a, -mode.b) * e * mode.amp;
            value += z.re;
            for i in 0..m {
                let ki = mode.k[i] as f64;
                grad[i] -= ki * z.im;
                for j in i..m {
                    hess[(i, j)] -= ki * mode.k[j] as f64 * z.re;
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                hess[(i, j)] = hess[(j, i)];
            }
        }
        Jet { value, grad, hess }
    }

    /// Values of the field (`axis = None`) or of `∂_axis u` on the uniform
    /// `n^m` grid `θ_idx = 2π idx / n`, via one inverse FFT per axis.
    pub fn grid_values(&self, n: usize, axis: Option<usize>) -> Result<Vec<f64>> {
        let m = self.m;
        let total = n.checked_pow(m as u32).filter(|t| *t <= MAX_GRID_POINTS).ok_or_else(|| {
            Error::InvalidParameter(format!("grid {n}^{m} exceeds the {MAX_GRID_POINTS}-point budget"))
        })?;
        if n as i64 <= 2 * self.cutoff {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {n} cannot hold spectral content up to |k| = {}",
                self.cutoff
            )));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        let wrap = |k: i64| -> usize { k.rem_euclid(n as i64) as usize };
        let idx_of = |k: &[i64; 3]| -> usize {
            let mut idx = 0;
            for j in 0..m {
                idx = idx * n + wrap(k[j]);
            }
            idx
        };
        if axis.is_none() {
            data[0] += Complex64::new(self.constant, 0.0);
        }
        for mode in &self.modes {
            let c = Complex64::new(mode.a, -mode.b) * (0.5 * mode.amp);
            // spectral mass at +k and −k; differentiation multiplies the +k
            // slot by i k_j and the −k slot by −i k_j, keeping the grid real
            let (cp, cm) = match axis {
                None => (c, c.conj()),
                Some(j) => {
                    let ik = Complex64::new(0.0, mode.k[j] as f64);
                    (ik * c, (ik * c).conj())
                }
            };
            data[idx_of(&mode.k)] += cp;
            let neg = [-mode.k[0], -mode.k[1], -mode.k[2]];
            data[idx_of(&neg)] += cm;
        }
        ifft_md(&mut data, n, m);
        Ok(data.into_iter().map(|z| z.re).collect())
    }

    /// Default per-side grid resolution: six samples per shortest
    /// oscillation wavelength, rounded up to an FFT-friendly size.
    pub fn default_grid_res(&self) -> usize {
        next_smooth((6 * self.cutoff.max(4) as usize) + 1)
    }
}

/// In-place unnormalized inverse DFT along every axis of an `n^m` array
/// (row-major). `Σ_k ĉ_k e^{+i k·θ}` at `θ = 2π idx/n` is exactly the
/// unnormalized inverse transform.
fn ifft_md(data: &mut [Complex64], n: usize, m: usize) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(n);
    let total = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..m {
        // stride of the axis in row-major layout
        let stride = n.pow((m - 1 - axis) as u32);
        let lines = total / n;
        for line in 0..lines {
            // starting offset of this 1-D line
            let block = line / stride;
            let offset = block * stride * n + (line % stride);
            if stride == 1 {
                fft.process(&mut data[offset..offset + n]);
            } else {
                for (i, s) in scratch.iter_mut().enumerate() {
                    *s = data[offset + i * stride];
                }
                fft.process(&mut scratch);
                for (i, s) in scratch.iter().enumerate() {
                    data[offset + i * stride] = *s;
                }
            }
        }
    }
}

/// Smallest integer `≥ n` whose prime factors are all in `{2, 3, 5}`.
fn next_smooth(n: usize) -> usize {
    let mut v = n.max(4);
    loop {
        let mut r = v;
        for p in [2usize, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return v;
        }
        v += 1;
    }
}

// ---------------------------------------------------------------------------
// sphere jets
// ---------------------------------------------------------------------------

/// Orthonormal tangent frame `(e₁, e₂)` at a unit vector `p`, deterministic
/// in `p` (used for gradient/Hessian components and Newton steps).
pub fn sphere_frame(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    // pick the ambient axis least aligned with p to seed the frame
    let seed = if p[0].abs() <= p[1].abs() && p[0].abs() <= p[2].abs() {
        [1.0, 0.0, 0.0]
    } else if p[1].abs() <= p[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut e1 = cross(p, &seed);
    let n1 = norm3(&e1);
    for v in &mut e1 {
        *v /= n1;
    }
    let e2 = cross(p, &e1);
    (e1, e2)
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Table of fully normalized complex solid harmonics
/// `Q_ℓ^m(x) = r^ℓ Y_ℓ^m(x/r)` for `0 ≤ m ≤ ℓ ≤ lmax` at one point, built by
/// the standard diagonal/vertical three-term recurrences (with the
/// Condon–Shortley sign).
struct SolidTable {
    lmax: usize,
    q: Vec<Complex64>,
}

impl SolidTable {
    fn build(lmax: usize, p: &[f64; 3]) -> Self {
        let (x, y, z) = (p[0], p[1], p[2]);
        let r2 = x * x + y * y + z * z;
        let xy = Complex64::new(x, y);
        let len = (lmax + 1) * (lmax + 2) / 2;
        let mut q = vec![Complex64::new(0.0, 0.0); len];
        let at = |l: usize, m: usize| l * (l + 1) / 2 + m;
        q[0] = Complex64::new((4.0 * std::f64::consts::PI).sqrt().recip(), 0.0);
        for l in 1..=lmax {
            let lf = l as f64;
            // diagonal: Q_ℓ^ℓ = −√((2ℓ+1)/(2ℓ)) (x+iy) Q_{ℓ−1}^{ℓ−1}
            q[at(l, l)] = -((2.0 * lf + 1.0) / (2.0 * lf)).sqrt() * xy * q[at(l - 1, l - 1)];
            // vertical: Q_ℓ^{ℓ−1} = √(2ℓ+1) z Q_{ℓ−1}^{ℓ−1}
            q[at(l, l - 1)] = (2.0 * lf + 1.0).sqrt() * z * q[at(l - 1, l - 1)];
            for m in 0..l.saturating_sub(1) {
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = ((((lf - 1.0) * (lf - 1.0)) - mf * mf)
                    / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                    .sqrt();
                q[at(l, m)] = a * (z * q[at(l - 1, m)] - b * r2 * q[at(l - 2, m)]);
            }
        }
        SolidTable { lmax, q }
    }

    /// `Q_ℓ^m` for any integer `m`, via `Q_ℓ^{−m} = (−1)^m conj(Q_ℓ^m)`;
    /// zero outside `|m| ≤ ℓ` or below `ℓ = 0`.
    fn get(&self, l: i64, m: i64) -> Complex64 {
        if l < 0 || m.abs() > l || l as usize > self.lmax {
            return Complex64::new(0.0, 0.0);
        }
        let idx = (l * (l + 1) / 2) as usize;
        if m >= 0 {
            self.q[idx + m as usize]
        } else {
            let v = self.q[idx + (-m) as usize].conj();
            if m % 2 == 0 {
                v
            } else {
                -v
            }
        }
    }
}

/// Ladder coefficients: `∂_z Q_ℓ^m = cz(ℓ,m) Q_{ℓ−1}^m`,
/// `(∂_x + i∂_y) Q_ℓ^m = cp(ℓ,m) Q_{ℓ−1}^{m+1}`,
/// `(∂_x − i∂_y) Q_ℓ^m = cm(ℓ,m) Q_{ℓ−1}^{m−1}` (exact polynomial
/// identities for solid harmonics, valid for all integer `m`).
fn cz(l: i64, m: i64) -> f64 {
    if l < 1 || m.abs() > l - 1 {
        return 0.0; // target Q_{ℓ−1}^m does not exist
    }
    (((l * l - m * m) * (2 * l + 1)) as f64 / (2 * l - 1) as f64).sqrt()
}
fn cp(l: i64, m: i64) -> f64 {
    if l < 1 || (m + 1).abs() > l - 1 {
        return 0.0; // target Q_{ℓ−1}^{m+1} does not exist
    }
    (((l - m) * (l - m - 1) * (2 * l + 1)) as f64 / (2 * l - 1) as f64).sqrt()
}
fn cm(l: i64, m: i64) -> f64 {
    if l < 1 || (m - 1).abs() > l - 1 {
        return 0.0; // target Q_{ℓ−1}^{m−1} does not exist
    }
    -(((l + m) * (l + m - 1) * (2 * l + 1)) as f64 / (2 * l - 1) as f64).sqrt()
}

/// Ambient 2-jet of the harmonic extension: value, ambient gradient, ambient
/// Hessian at `p` (any radius; the field restricts on `r = 1`).
#[derive(Debug, Clone)]
pub struct AmbientJet {
    /// extension value
    pub value: f64,
    /// ambient gradient `(∂x, ∂y, ∂z)`
    pub grad: [f64; 3],
    /// ambient Hessian (symmetric 3×3, row-major upper triangle mirrored)
    pub hess: [[f64; 3]; 3],
}

impl SphereField {
    /// Ambient jet of the solid-harmonic extension at `p`.
    pub fn ambient_jet(&self, p: &[f64; 3]) -> AmbientJet {
        let table = SolidTable::build(self.lmax, p);
        let mut value = 0.0;
        let mut grad = [0.0f64; 3];
        let mut hess = [[0.0f64; 3]; 3];
        let mut idx = 0;
        for l in 0..=self.lmax as i64 {
            for m in 0..=l {
                let c = self.coeffs[idx];
                idx += 1;
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                value += (c * table.get(l, m)).re;
                // first-order ladders
                let vz = cz(l, m) * table.get(l - 1, m);
                let vp = cp(l, m) * table.get(l - 1, m + 1);
                let vm = cm(l, m) * table.get(l - 1, m - 1);
                let dx = 0.5 * (vp + vm);
                let dy = Complex64::new(0.0, -0.5) * (vp - vm);
                grad[0] += (c * dx).re;
                grad[1] += (c * dy).re;
                grad[2] += (c * vz).re;
                // second-order ladders (level ℓ−2)
                let vzz = cz(l, m) * cz(l - 1, m) * table.get(l - 2, m);
                let vpz = cz(l, m) * cp(l - 1, m) * table.get(l - 2, m + 1);
                let vmz = cz(l, m) * cm(l - 1, m) * table.get(l - 2, m - 1);
                let vpp = cp(l, m) * cp(l - 1, m + 1) * table.get(l - 2, m + 2);
                let vmm = cm(l, m) * cm(l - 1, m - 1) * table.get(l - 2, m - 2);
                let vpm = cp(l, m) * cm(l - 1, m + 1) * table.get(l - 2, m);
                let dxx = 0.25 * (vpp + 2.0 * vpm + vmm);
                let dyy = -0.25 * (vpp - 2.0 * vpm + vmm);
                let dxy = Complex64::new(0.0, -0.25) * (vpp - vmm);
                let dxz = 0.5 * (vpz + vmz);
                let dyz = Complex64::new(0.0, -0.5) * (vpz - vmz);
                hess[0][0] += (c * dxx).re;
                hess[1][1] += (c * dyy).re;
                hess[0][1] += (c * dxy).re;
                hess[0][2] += (c * dxz).re;
                hess[1][2] += (c * dyz).re;
                hess[2][2] += (c * vzz).re;
            }
        }
        hess[1][0] = hess[0][1];
        hess[2][0] = hess[0][2];
        hess[2][1] = hess[1][2];
        AmbientJet { value, grad, hess }
    }

    /// Intrinsic jet at a unit vector `p`: value, gradient, and covariant
    /// Hessian in the orthonormal frame [`sphere_frame`].
    ///
    /// With outward normal `p`, the covariant Hessian of the restriction of
    /// an ambient extension `ũ` is
    /// `Hess(eᵢ, eⱼ) = eᵢᵀ(∇²ũ)eⱼ − (p·∇ũ) δᵢⱼ`.
    pub fn eval_jet(&self, p: &[f64; 3]) -> Jet {
        let a = self.ambient_jet(p);
        let (e1, e2) = sphere_frame(p);
        let dotg = |e: &[f64; 3]| e[0] * a.grad[0] + e[1] * a.grad[1] + e[2] * a.grad[2];
        let hquad = |u: &[f64; 3], v: &[f64; 3]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += u[i] * a.hess[i][j] * v[j];
                }
            }
            s
        };
        let radial = dotg(p);
        let mut hess = DMatrix::zeros(2, 2);
        hess[(0, 0)] = hquad(&e1, &e1) - radial;
        hess[(1, 1)] = hquad(&e2, &e2) - radial;
        hess[(0, 1)] = hquad(&e1, &e2);
        hess[(1, 0)] = hess[(0, 1)];
        Jet {
            value: a.value,
            grad: DVector::from_vec(vec![dotg(&e1), dotg(&e2)]),
            hess,
        }
    }
}

impl Field {
    /// Intrinsic dimension of the underlying manifold.
    pub fn dim(&self) -> usize {
        match self {
            Field::Torus(f) => f.m,
            Field::Sphere(_) => 2,
        }
    }

    /// The manifold this field lives on.
    pub fn manifold(&self) -> Manifold {
        match self {
            Field::Torus(f) => Manifold::Torus { m: f.m },
            Field::Sphere(_) => Manifold::Sphere,
        }
    }

    /// Spectral scale ε.
    pub fn eps(&self) -> f64 {
        match self {
            Field::Torus(f) => f.eps,
            Field::Sphere(f) => f.eps,
        }
    }

    /// Jet at a point; torus points are `m` angles, sphere points ambient
    /// unit vectors.
    pub fn eval_jet(&self, point: &[f64]) -> Jet {
        match self {
            Field::Torus(f) => f.eval_jet(point),
            Field::Sphere(f) => f.eval_jet(&[point[0], point[1], point[2]]),
        }
    }
}

// ---------------------------------------------------------------------------
// diagonal covariance derivatives
// ---------------------------------------------------------------------------

/// An exact diagonal kernel derivative next to its small-ε prediction.
#[derive(Debug, Clone, Copy)]
pub struct KernelDerivative {
    /// exact series value of `∂^α_x ∂^β_y 𝓔(x, y)|_{x=y}`
    pub exact: f64,
    /// leading small-ε term `± ε^{−m−2d} Z I_{m+2d−1} / (2π)^m`
    /// (0 when any component of `α+β` is odd)
    pub predicted: f64,
    /// the scaling exponent `m + 2 d(α, β)` of the leading term
    pub scaling_exponent: f64,
}

/// Sign of `i^{|α|} (−i)^{|β|}` for even `|α| + |β|`: `(−1)^{d + |β|}`.
fn derivative_sign(da: usize, db: usize) -> f64 {
    let d = (da + db) / 2;
    if (d + db) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Leading-term constant of the diagonal kernel derivatives: for a
/// multi-index γ with all components even,
/// `Z_γ = 2 ∏ᵢ Γ((γᵢ+1)/2) / Γ((m+|γ|)/2)` (the moment of `x^γ` over the
/// unit sphere times the sphere area), so the leading term is
/// `ε^{−m−|γ|} Z_γ I_{m+|γ|−1}(w) / (2π)^m`.
fn sphere_moment_constant(gamma: &[usize]) -> Option<f64> {
    if gamma.iter().any(|g| g % 2 == 1) {
        return None;
    }
    let m = gamma.len() as f64;
    let total: usize = gamma.iter().sum();
    let mut logz = 2f64.ln() - ln_gamma((m + total as f64) / 2.0);
    for g in gamma {
        logz += ln_gamma((*g as f64 + 1.0) / 2.0);
    }
    Some(logz.exp())
}

/// Exact diagonal kernel derivative `∂^α_x ∂^β_y 𝓔^ε(x,y)|_{x=y}` with its
/// predicted leading term. `α`, `β` are multi-indices of length `dim(M)`
/// with `|α| + |β| ≤ 4`.
///
/// Torus: the exact value is the lattice sum
/// `(−1)^{d+|β|} (2π)^{−m} Σ_k w(ε|k|) k^{α+β}`, summed over ±k pairs so odd
/// sums vanish exactly. Sphere: the kernel is `F(p·q)` with `F` a Legendre
/// series; the normal-coordinate derivatives follow from the distance-jet
/// expansion `η = |u|² − (K/12)(u₁v₂ − u₂v₁)² + O(6)` in `(u, v) =
/// (x − y, x + y)` through a small polynomial chain-rule engine.
pub fn covariance_derivative(
    manifold: Manifold,
    w: &Weight,
    eps: f64,
    alpha: &[usize],
    beta: &[usize],
    trunc_tol: f64,
) -> Result<KernelDerivative> {
    manifold.validate()?;
    w.validate()?;
    let m = manifold.dim();
    if alpha.len() != m || beta.len() != m {
        return Err(Error::InvalidParameter(format!(
            "multi-indices must have length {m}, got {} and {}",
            alpha.len(),
            beta.len()
        )));
    }
    let da: usize = alpha.iter().sum();
    let db: usize = beta.iter().sum();
    if da + db > 4 {
        return Err(Error::InvalidParameter(format!(
            "kernel derivatives are supported up to total order 4, got {}",
            da + db
        )));
    }
    let gamma: Vec<usize> = alpha.iter().zip(beta).map(|(a, b)| a + b).collect();
    let exact = match manifold {
        Manifold::Torus { .. } => torus_lattice_derivative(w, eps, &gamma, da, db, trunc_tol)?,
        Manifold::Sphere => sphere_kernel_derivative(w, eps, alpha, beta, trunc_tol),
    };
    let d = (da + db) / 2;
    let scaling_exponent = (m + 2 * d) as f64;
    let predicted = match sphere_moment_constant(&gamma) {
        None => 0.0,
        Some(z) => {
            let ik = moment(w, m + 2 * d - 1, 1e-12)?;
            derivative_sign(da, db) * eps.powf(-scaling_exponent) * z * ik.value
                / (2.0 * std::f64::consts::PI).powi(m as i32)
        }
    };
    Ok(KernelDerivative { exact, predicted, scaling_exponent })
}

fn torus_lattice_derivative(
    w: &Weight,
    eps: f64,
    gamma: &[usize],
    da: usize,
    db: usize,
    trunc_tol: f64,
) -> Result<f64> {
    let m = gamma.len();
    let total: usize = gamma.iter().sum();
    if total % 2 == 1 {
        // ±k pair contributions cancel identically
        return Ok(0.0);
    }
    let cutoff = spectral_cutoff(w, eps, trunc_tol)?;
    let norm = (2.0 * std::f64::consts::PI).powi(m as i32);
    let mut sum = if total == 0 { w.eval(0.0) } else { 0.0 };
    let range = |first: bool| if first { 0..=cutoff } else { -cutoff..=cutoff };
    let kpow = |k: i64, g: usize| (k as f64).powi(g as i32);
    for k1 in range(true) {
        for k2 in if m >= 2 { range(k1 == 0) } else { 0..=0 } {
            for k3 in if m == 3 { range(k1 == 0 && k2 == 0) } else { 0..=0 } {
                if k1 == 0 && k2 == 0 && k3 == 0 {
                    continue;
                }
                let n2 = k1 * k1 + k2 * k2 + k3 * k3;
                if n2 > cutoff * cutoff {
                    continue;
                }
                let mut term = 2.0 * w.eval(eps * (n2 as f64).sqrt());
                for (j, kj) in [k1, k2, k3].iter().take(m).enumerate() {
                    term *= kpow(*kj, gamma[j]);
                }
                sum += term;
            }
        }
    }
    Ok(derivative_sign(da, db) * sum / norm)
}

/// Legendre-series derivatives of the sphere kernel at coincidence:
/// `F^{(j)}(1) = Σ_ℓ w_ℓ (2ℓ+1)/(4π) P_ℓ^{(j)}(1)` with
/// `P_ℓ'(1) = ℓ(ℓ+1)/2` and `P_ℓ''(1) = (ℓ−1)ℓ(ℓ+1)(ℓ+2)/8`.
fn sphere_f_derivatives(w: &Weight, eps: f64, trunc_tol: f64) -> [f64; 3] {
    let mut out = [0.0f64; 3];
    let bar = trunc_tol * w.sup();
    let mut l: usize = 0;
    loop {
        let lf = l as f64;
        let wl = w.eval(eps * (lf * (lf + 1.0)).sqrt());
        let c = wl * (2.0 * lf + 1.0) / (4.0 * std::f64::consts::PI);
        out[0] += c;
        out[1] += c * lf * (lf + 1.0) / 2.0;
        out[2] += c * (lf - 1.0) * lf * (lf + 1.0) * (lf + 2.0) / 8.0;
        if l > 2 && wl <= bar * 1e-4 {
            break;
        }
        l += 1;
        if l > 20 * LMAX_CAP {
            break;
        }
    }
    out
}

/// Polynomial in `(u₁, u₂, v₁, v₂)` as a monomial map, enough to carry the
/// degree ≤ 4 Taylor core of the sphere kernel.
type Poly = HashMap<[u8; 4], f64>;

fn poly_add(p: &mut Poly, mono: [u8; 4], c: f64) {
    *p.entry(mono).or_insert(0.0) += c;
}

/// `∂/∂ var` of a monomial map (`var` indexes `u₁,u₂,v₁,v₂`).
fn poly_diff(p: &Poly, var: usize) -> Poly {
    let mut out = Poly::new();
    for (mono, c) in p {
        if mono[var] == 0 {
            continue;
        }
        let mut m2 = *mono;
        m2[var] -= 1;
        poly_add(&mut out, m2, c * mono[var] as f64);
    }
    out
}

fn sphere_kernel_derivative(w: &Weight, eps: f64, alpha: &[usize], beta: &[usize], trunc_tol: f64) -> f64 {
    let [f0, f1, f2] = sphere_f_derivatives(w, eps, trunc_tol);
    // E = G(η), G(η) = F(cos √η): G(0) = F(1), G'(0) = −F'(1)/2,
    // G''(0) = F''(1)/4 + F'(1)/12.
    let g0 = f0;
    let g1 = -f1 / 2.0;
    let g2 = f2 / 4.0 + f1 / 12.0;
    // Taylor core to total degree 4:
    //   P = G(0) + G'(0)(|u|² + η₄) + G''(0)/2 |u|⁴,
    // with η₄ = −(K/12)(u₁v₂ − u₂v₁)², K = 1.
    let mut p = Poly::new();
    poly_add(&mut p, [0, 0, 0, 0], g0);
    poly_add(&mut p, [2, 0, 0, 0], g1);
    poly_add(&mut p, [0, 2, 0, 0], g1);
    let k_over_12 = 1.0 / 12.0;
    poly_add(&mut p, [2, 0, 0, 2], -k_over_12 * g1); // u₁²v₂²
    poly_add(&mut p, [1, 1, 1, 1], 2.0 * k_over_12 * g1); // −2u₁u₂v₁v₂ × (−K/12)
    poly_add(&mut p, [0, 2, 2, 0], -k_over_12 * g1); // u₂²v₁²
    poly_add(&mut p, [4, 0, 0, 0], g2 / 2.0);
    poly_add(&mut p, [2, 2, 0, 0], g2);
    poly_add(&mut p, [0, 4, 0, 0], g2 / 2.0);
    // ∂x_i = ∂u_i + ∂v_i, ∂y_i = ∂v_i − ∂u_i
    let apply = |p: &Poly, i: usize, from_y: bool| -> Poly {
        let du = poly_diff(p, i);
        let dv = poly_diff(p, i + 2);
        let mut out = dv;
        for (mono, c) in du {
            poly_add(&mut out, mono, if from_y { -c } else { c });
        }
        out
    };
    for (i, &cnt) in alpha.iter().enumerate() {
        for _ in 0..cnt {
            p = apply(&p, i, false);
        }
    }
    for (i, &cnt) in beta.iter().enumerate() {
        for _ in 0..cnt {
            p = apply(&p, i, true);
        }
    }
    p.get(&[0, 0, 0, 0]).copied().unwrap_or(0.0)
}

impl TorusField {
    /// Exact covariance `E u(x)u(y)` of this field's law from its
    /// coefficient amplitudes: `w(0)/(2π)^m + Σ amp_k² cos(k·(x−y))`.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = self.constant_var;
        for mode in &self.modes {
            let mut phase = 0.0;
            for j in 0..self.m {
                phase += mode.k[j] as f64 * (x[j] - y[j]);
            }
            s += mode.amp * mode.amp * phase.cos();
        }
        s
    }
}

// ---------------------------------------------------------------------------
// critical point location
// ---------------------------------------------------------------------------

/// A converged Newton iterate before deduplication and classification.
struct RawPoint {
    location: Vec<f64>,
    jet: Jet,
    residual: f64,
}

/// Euclidean distance with per-axis wrapping by 2π (torus metric on the
/// fundamental domain).
fn torus_dist(a: &[f64], b: &[f64]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(tau);
            d.min(tau - d).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Spatial-hash deduplicator: keeps the lower-residual representative of any
/// pair closer than `radius`.
fn dedupe(mut raw: Vec<RawPoint>, radius: f64, wrapped: bool) -> Vec<RawPoint> {
    let dist: fn(&[f64], &[f64]) -> f64 = if wrapped { torus_dist } else { euclid_dist };
    // deterministic insertion order: best residuals first, so the survivor of
    // each cluster is the most converged iterate
    raw.sort_by(|p, q| {
        p.residual
            .partial_cmp(&q.residual)
            .unwrap()
            .then_with(|| p.location.partial_cmp(&q.location).unwrap())
    });
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut kept: Vec<RawPoint> = Vec::new();
    let cell = radius.max(1e-12);
    let key_of = |loc: &[f64]| {
        let mut key = [0i64; 3];
        for (j, x) in loc.iter().enumerate() {
            key[j] = (x / cell).floor() as i64;
        }
        key
    };
    let dims = raw.first().map_or(0, |p| p.location.len());
    let wrap_cells = (2.0 * std::f64::consts::PI / cell).ceil() as i64;
    'cand: for p in raw {
        let key = key_of(&p.location);
        let mut probe = [0i64; 3];
        // home cell first, so unused axes (take(1)) probe offset 0
        let offsets = [0i64, -1, 1];
        for &o1 in &offsets {
            for &o2 in offsets.iter().take(if dims >= 2 { 3 } else { 1 }) {
                for &o3 in offsets.iter().take(if dims >= 3 { 3 } else { 1 }) {
                    probe = [key[0] + o1, key[1] + o2, key[2] + o3];
                    if wrapped {
                        for v in probe.iter_mut().take(dims) {
                            *v = v.rem_euclid(wrap_cells.max(1));
                        }
                    }
                    if let Some(ids) = buckets.get(&probe) {
                        for &i in ids {
                            if dist(&p.location, &kept[i].location) < radius {
                                continue 'cand;
                            }
                        }
                    }
                }
            }
        }
        let mut key = key_of(&p.location);
        if wrapped {
            for v in key.iter_mut().take(dims) {
                *v = v.rem_euclid(wrap_cells.max(1));
            }
        }
        buckets.entry(key).or_default().push(kept.len());
        kept.push(p);
        let _ = probe;
    }
    kept
}

/// Damped Newton iteration on the torus from one seed. Returns `None` on
/// non-convergence (singular Hessian, stalled damping, or iteration cap).
fn newton_torus(field: &TorusField, seed: &[f64], tol_abs: f64, max_iter: usize, max_step: f64) -> Option<RawPoint> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut x: Vec<f64> = seed.to_vec();
    let mut jet = field.eval_jet(&x);
    for _ in 0..max_iter {
        let gn = jet.grad.norm();
        if gn <= tol_abs {
            return Some(RawPoint { location: x, jet, residual: gn });
        }
        let delta = jet.hess.clone().lu().solve(&(-&jet.grad))?;
        let dn = delta.norm();
        let scale = if dn > max_step { max_step / dn } else { 1.0 };
        let mut lambda = scale;
        loop {
            let xn: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(xi, di)| (xi + lambda * di).rem_euclid(tau))
                .collect();
            let jn = field.eval_jet(&xn);
            if jn.grad.norm() < (1.0 - 0.25 * (lambda / scale).min(1.0)) * gn {
                x = xn;
                jet = jn;
                break;
            }
            lambda /= 2.0;
            if lambda < scale / 1024.0 {
                return None;
            }
        }
    }
    let gn = jet.grad.norm();
    (gn <= tol_abs).then_some(RawPoint { location: x, jet, residual: gn })
}

/// Riemannian Newton on `S²`: solve in the tangent frame, retract by
/// normalized ambient displacement.
fn newton_sphere(field: &SphereField, seed: &[f64; 3], tol_abs: f64, max_iter: usize, max_step: f64) -> Option<RawPoint> {
    let mut p = *seed;
    let renorm = |p: &mut [f64; 3]| {
        let n = norm3(p);
        for v in p.iter_mut() {
            *v /= n;
        }
    };
    renorm(&mut p);
    let mut jet = field.eval_jet(&p);
    for _ in 0..max_iter {
        let gn = jet.grad.norm();
        if gn <= tol_abs {
            return Some(RawPoint { location: p.to_vec(), jet, residual: gn });
        }
        let delta = jet.hess.clone().lu().solve(&(-&jet.grad))?;
        let dn = delta.norm();
        let scale = if dn > max_step { max_step / dn } else { 1.0 };
        let (e1, e2) = sphere_frame(&p);
        let mut lambda = scale;
        loop {
            let mut pn = p;
            for j in 0..3 {
                pn[j] += lambda * (delta[0] * e1[j] + delta[1] * e2[j]);
            }
            renorm(&mut pn);
            let jn = field.eval_jet(&pn);
            if jn.grad.norm() < (1.0 - 0.25 * (lambda / scale).min(1.0)) * gn {
                p = pn;
                jet = jn;
                break;
            }
            lambda /= 2.0;
            if lambda < scale / 1024.0 {
                return None;
            }
        }
    }
    let gn = jet.grad.norm();
    (gn <= tol_abs).then_some(RawPoint { location: p.to_vec(), jet, residual: gn })
}

/// One full torus search pass at grid resolution `n`: seed from gradient
/// sign-change cells and local minima of `|∇u|²`, polish with Newton, dedupe.
fn search_torus(field: &TorusField, n: usize, newton_tol: f64, max_iter: usize) -> Result<(Vec<RawPoint>, usize)> {
    let m = field.m;
    let tau = 2.0 * std::f64::consts::PI;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        grads.push(field.grid_values(n, Some(j))?);
    }
    let total = n.pow(m as u32);
    let mut g2 = vec![0.0f64; total];
    for g in &grads {
        for (acc, v) in g2.iter_mut().zip(g) {
            *acc += v * v;
        }
    }
    let rms = (g2.iter().sum::<f64>() / total as f64).sqrt();
    let tol_abs = newton_tol * rms.max(f64::MIN_POSITIVE);
    let idx_of = |c: &[usize; 3]| -> usize {
        let mut idx = 0;
        for j in 0..m {
            idx = idx * n + c[j];
        }
        idx
    };
    let h = tau / n as f64;
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    let lim = |d: usize| if d < m { n } else { 1 };
    for i1 in 0..lim(0) {
        for i2 in 0..lim(1) {
            for i3 in 0..lim(2) {
                let base = [i1, i2, i3];
                // gradient sign change over the 2^m cell corners
                let mut all_change = true;
                for g in &grads {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for corner in 0..(1usize << m) {
                        let mut c = base;
                        for (j, cj) in c.iter_mut().enumerate().take(m) {
                            if corner >> j & 1 == 1 {
                                *cj = (*cj + 1) % n;
                            }
                        }
                        let v = g[idx_of(&c)];
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    if !(lo < 0.0 && hi > 0.0) {
                        all_change = false;
                        break;
                    }
                }
                if all_change {
                    seeds.push((0..m).map(|j| (base[j] as f64 + 0.5) * h).collect());
                }
                // local minimum of |∇u|² at the grid point
                let here = g2[idx_of(&base)];
                let mut is_min = true;
                'nb: for o1 in -1i64..=1 {
                    for o2 in -1i64..=(if m >= 2 { 1 } else { -1 }) {
                        for o3 in -1i64..=(if m >= 3 { 1 } else { -1 }) {
                            let offs = [o1, o2, o3];
                            if offs.iter().take(m).all(|o| *o == 0) {
                                continue;
                            }
                            let mut c = base;
                            for (j, cj) in c.iter_mut().enumerate().take(m) {
                                *cj = (*cj as i64 + offs[j]).rem_euclid(n as i64) as usize;
                            }
                            if g2[idx_of(&c)] < here {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if is_min {
                    seeds.push((0..m).map(|j| base[j] as f64 * h).collect());
                }
            }
        }
    }
    let max_step = 3.0 * h * (m as f64).sqrt();
    let mut raw = Vec::new();
    let mut dropped = 0usize;
    for s in &seeds {
        match newton_torus(field, s, tol_abs, max_iter, max_step) {
            Some(p) => raw.push(p),
            None => dropped += 1,
        }
    }
    let radius = 0.5 * h * (m as f64).sqrt();
    Ok((dedupe(raw, radius, true), dropped))
}

/// Fibonacci sphere lattice with `n` near-uniform points.
fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// One full sphere search pass with `n_seeds` Fibonacci seeds.
fn search_sphere(field: &SphereField, n_seeds: usize, newton_tol: f64, max_iter: usize) -> (Vec<RawPoint>, usize) {
    let seeds = fibonacci_sphere(n_seeds);
    // RMS gradient over the seed lattice sets the absolute tolerance
    let jets: Vec<Jet> = seeds.iter().map(|p| field.eval_jet(p)).collect();
    let rms = (jets.iter().map(|j| j.grad.norm_squared()).sum::<f64>() / n_seeds as f64).sqrt();
    let tol_abs = newton_tol * rms.max(f64::MIN_POSITIVE);
    let spacing = (4.0 * std::f64::consts::PI / n_seeds as f64).sqrt();
    let max_step = 3.0 * spacing;
    let mut raw = Vec::new();
    let mut dropped = 0usize;
    for p in &seeds {
        match newton_sphere(field, p, tol_abs, max_iter, max_step) {
            Some(pt) => raw.push(pt),
            None => dropped += 1,
        }
    }
    let radius = (0.5 / field.lmax.max(1) as f64).min(0.5 * spacing * 4.0);
    (dedupe(raw, radius, false), dropped)
}

/// Classify deduplicated iterates: Hessian spectra, Morse indices, and the
/// two-pass degeneracy flag relative to the largest eigenvalue seen.
fn classify(raw: Vec<RawPoint>) -> Vec<CriticalPoint> {
    let mut decorated: Vec<(Vec<f64>, f64, f64, Vec<f64>)> = raw
        .into_iter()
        .map(|p| {
            let mut eig: Vec<f64> = p.jet.hess.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (p.location, p.jet.value, p.residual, eig)
        })
        .collect();
    decorated.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let max_abs = decorated
        .iter()
        .flat_map(|d| d.3.iter())
        .fold(0.0f64, |acc, e| acc.max(e.abs()));
    let band = DEGENERACY_BAND * max_abs;
    decorated
        .into_iter()
        .map(|(location, value, grad_residual, eig)| {
            let index = eig.iter().filter(|e| **e < 0.0).count();
            let degenerate = eig.iter().any(|e| e.abs() <= band);
            CriticalPoint {
                location,
                value,
                grad_residual,
                hessian_eigenvalues: eig,
                index,
                degenerate,
            }
        })
        .collect()
}

/// Locate all critical points of a sampled field.
///
/// `grid_res` is the per-axis seeding resolution on the torus (it must
/// oversample the spectral content: `grid_res > 2 K`) and the Fibonacci seed
/// count on the sphere. Newton converges when `|∇u| ≤ newton_tol · RMS|∇u|`.
///
/// The returned set is certified by two independent checks: the
/// Poincaré–Hopf identity `Σ (−1)^index = χ(M)` and count stability under a
/// doubled seeding resolution. When either fails — or any Hessian eigenvalue
/// falls in the degeneracy band — the set is returned with
/// `reliable = false` and an explanatory note rather than an error, so
/// callers can decide whether to drop the sample.
pub fn find_critical_points(field: &Field, grid_res: usize, newton_tol: f64, max_iter: usize) -> Result<CriticalSet> {
    find_critical_points_with(field, grid_res, newton_tol, max_iter, true)
}

/// [`find_critical_points`] with the refinement certificate optional
/// (Poincaré–Hopf is always checked; the refinement pass doubles the work).
pub fn find_critical_points_with(
    field: &Field,
    grid_res: usize,
    newton_tol: f64,
    max_iter: usize,
    refine: bool,
) -> Result<CriticalSet> {
    if !(newton_tol > 0.0 && newton_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "newton_tol must lie in (0, 1), got {newton_tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be positive".into()));
    }
    let (points, dropped, refined_profile) = match field {
        Field::Torus(f) => {
            let (raw, dropped) = search_torus(f, grid_res, newton_tol, max_iter)?;
            let pts = classify(raw);
            let refined = if refine {
                let n2 = next_smooth(2 * grid_res);
                let (raw2, _) = search_torus(f, n2, newton_tol, max_iter)?;
                Some(index_profile(&classify(raw2)))
            } else {
                None
            };
            (pts, dropped, refined)
        }
        Field::Sphere(f) => {
            let (raw, dropped) = search_sphere(f, grid_res, newton_tol, max_iter);
            let pts = classify(raw);
            let refined = if refine {
                let (raw2, _) = search_sphere(f, 4 * grid_res, newton_tol, max_iter);
                Some(index_profile(&classify(raw2)))
            } else {
                None
            };
            (pts, dropped, refined)
        }
    };
    let mut notes: Vec<String> = Vec::new();
    if points.iter().any(|p| p.degenerate) {
        notes.push("near-degenerate Hessian eigenvalue".into());
    }
    let chi = field.manifold().euler_characteristic();
    let set = CriticalSet { points, reliable: true, dropped_seeds: dropped, note: None };
    if set.signed_count() != chi {
        notes.push(format!(
            "signed count {} differs from Euler characteristic {chi}",
            set.signed_count()
        ));
    }
    if let Some(fine) = refined_profile {
        let coarse = index_profile(&set.points);
        if coarse != fine {
            notes.push(format!(
                "index counts changed under refinement: {coarse:?} vs {fine:?}"
            ));
        }
    }
    let reliable = notes.is_empty();
    Ok(CriticalSet {
        reliable,
        note: (!reliable).then(|| notes.join("; ")),
        ..set
    })
}

/// Count of critical points per Morse index, indexed 0..=m.
fn index_profile(points: &[CriticalPoint]) -> Vec<usize> {
    let m = points.iter().map(|p| p.hessian_eigenvalues.len()).max().unwrap_or(0);
    let mut counts = vec![0usize; m + 1];
    for p in points {
        counts[p.index] += 1;
    }
    counts
}

impl Field {
    /// Default seeding resolution for [`find_critical_points`]: ~6 samples
    /// per shortest wavelength on the torus, `⌈36 L²/π⌉` Fibonacci seeds on
    /// the sphere.
    pub fn default_search_res(&self) -> usize {
        match self {
            Field::Torus(f) => f.default_grid_res(),
            Field::Sphere(f) => {
                let l = f.lmax.max(4) as f64;
                (36.0 * l * l / std::f64::consts::PI).ceil() as usize
            }
        }
    }
}

// ---------------------------------------------------------------------------
// critical value statistics
// ---------------------------------------------------------------------------

/// The (rescaled) empirical measure of critical values pooled across fields.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    /// pooled rescaled critical values, ascending
    pub values: Vec<f64>,
    /// fields whose critical set failed certification and were excluded
    pub skipped_fields: usize,
    /// total critical points pooled
    pub total_points: usize,
}

impl EmpiricalMeasure {
    /// Kolmogorov–Smirnov distance to a density grid.
    pub fn ks_distance(&self, grid: &crate::grid::DensityGrid) -> f64 {
        let mut samples: Vec<(f64, f64)> = self.values.iter().map(|v| (*v, 1.0)).collect();
        crate::grid::weighted_ks(&mut samples, grid)
    }
}

/// Pool the critical values of independent field samples into one empirical
/// measure on the scale of the limiting law.
///
/// Each critical value is shifted by a per-field draw `X ~ N(0, ω_m ε^{−m})`
/// when `with_perturbation` is set and the profile has `ω_m > 0` (the
/// variance completion that regularizes sub-critical weights), then rescaled
/// by `(š_m ε^{−m})^{−1/2}` so the pooled values are comparable with the
/// limiting critical-value density. Fields whose critical sets fail the
/// Poincaré–Hopf certificate are skipped and counted.
pub fn empirical_critical_measure(
    fields: &[Field],
    profile: &MomentProfile,
    with_perturbation: bool,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    if fields.is_empty() {
        return Err(Error::InvalidParameter("need at least one field".into()));
    }
    let mut values = Vec::new();
    let mut skipped = 0usize;
    for (i, field) in fields.iter().enumerate() {
        let m = field.dim();
        let eps = field.eps();
        let set = find_critical_points_with(field, field.default_search_res(), 1e-9, 60, false)?;
        if !set.reliable {
            skipped += 1;
            continue;
        }
        let mut rng = task_rng(seed, 0x3a11_0000 ^ i as u64);
        let shift = if with_perturbation && profile.omega > 0.0 {
            (profile.omega * eps.powi(-(m as i32))).sqrt()
                * rng.sample::<f64, _>(rand_distr::StandardNormal)
        } else {
            0.0
        };
        let scale = (profile.s_check * eps.powi(-(m as i32))).sqrt().recip();
        values.extend(set.points.iter().map(|p| (p.value + shift) * scale));
    }
    if values.is_empty() {
        return Err(Error::Unreliable(
            "every field sample failed critical-set certification".into(),
        ));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total_points = values.len();
    Ok(EmpiricalMeasure { values, skipped_fields: skipped, total_points })
}

/// Monte-Carlo estimate of the expected number of critical points per unit
/// volume.
#[derive(Debug, Clone, Copy)]
pub struct CountEstimate {
    /// mean critical points per unit volume across certified trials
    pub mean: f64,
    /// standard error of the mean
    pub stderr: f64,
    /// trials excluded for failed certification
    pub excluded: usize,
}

/// Sample `trials` independent fields and average the critical-point count
/// per unit volume. Trials failing certification are excluded (and counted);
/// errors out if every trial fails.
pub fn expected_count_mc(
    manifold: Manifold,
    w: &Weight,
    eps: f64,
    trials: usize,
    trunc_tol: f64,
    seed: u64,
) -> Result<CountEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let vol = manifold.volume();
    let mut counts: Vec<f64> = Vec::with_capacity(trials);
    let mut excluded = 0usize;
    for t in 0..trials {
        let field = build_field(manifold, w, eps, trunc_tol, seed.wrapping_add(t as u64))?;
        let set = find_critical_points_with(&field, field.default_search_res(), 1e-9, 60, false)?;
        if set.reliable {
            counts.push(set.points.len() as f64 / vol);
        } else {
            excluded += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Unreliable(
            "every Monte-Carlo trial failed critical-set certification".into(),
        ));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(CountEstimate { mean, stderr: (var / n).sqrt(), excluded })
}

/// Kac–Rice density of critical points with value in `(b.0, b.1)`, per unit
/// volume, evaluated by conditional Monte Carlo:
///
/// ```text
/// f = (2π)^{−m/2} det(S_∇)^{−1/2} · E[ |det Hu| 1_B(u) | ∇u = 0 ],
/// ```
///
/// where the joint Gaussian of `(u, ∇u, Hu)` at a point is assembled from
/// the exact diagonal kernel derivatives. Returns `(estimate, stderr)`.
pub fn kac_rice_density(
    manifold: Manifold,
    w: &Weight,
    eps: f64,
    b: (f64, f64),
    mc_samples: usize,
    trunc_tol: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(b.0 < b.1) {
        return Err(Error::InvalidParameter(format!("empty value window ({}, {})", b.0, b.1)));
    }
    if mc_samples < 2 {
        return Err(Error::InvalidParameter("need at least two Monte-Carlo samples".into()));
    }
    let m = manifold.dim();
    let hlen = crate::gaussian::hessian_len(m);
    let dim = 1 + m + hlen;
    // coordinate layout: [u, ∂₁u..∂_m u, flattened Hessian (diag, then strict
    // upper ×√2)]; each covariance entry is a diagonal kernel derivative.
    let multi = |slot: usize| -> (Vec<usize>, f64) {
        // multi-index and flattening weight of coordinate `slot`
        let mut a = vec![0usize; m];
        if slot == 0 {
            return (a, 1.0);
        }
        if slot <= m {
            a[slot - 1] = 1;
            return (a, 1.0);
        }
        let q = slot - 1 - m;
        if q < m {
            a[q] = 2;
            (a, 1.0)
        } else {
            // strict upper pairs in row-major order, coordinate is √2·H_ij
            let mut idx = m;
            for i in 0..m {
                for j in i + 1..m {
                    if idx == q + m {
                        a[i] = 1;
                        a[j] = 1;
                        return (a, std::f64::consts::SQRT_2);
                    }
                    idx += 1;
                }
            }
            unreachable!("flattened Hessian slot out of range")
        }
    };
    let mut cov = DMatrix::zeros(dim, dim);
    for p in 0..dim {
        for q in p..dim {
            let (alpha, wa) = multi(p);
            let (beta, wb) = multi(q);
            let e = covariance_derivative(manifold, w, eps, &alpha, &beta, trunc_tol)?.exact;
            cov[(p, q)] = wa * wb * e;
            cov[(q, p)] = cov[(p, q)];
        }
    }
    // det S_∇ before conditioning
    let grad_block = cov.view((1, 1), (m, m)).into_owned();
    let det_grad = grad_block.determinant();
    if det_grad <= 0.0 {
        return Err(Error::Degenerate(
            "gradient covariance is not positive definite".into(),
        ));
    }
    let law = crate::gaussian::GaussianVector::new(DVector::zeros(dim), cov)?;
    let observed: Vec<usize> = (1..=m).collect();
    let cond = law.condition(&observed, &vec![0.0; m])?;
    let prefactor = (2.0 * std::f64::consts::PI).powf(-(m as f64) / 2.0) / det_grad.sqrt();
    let mut rng = task_rng(seed, 0x4ac2_1ce0);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..mc_samples {
        let z = cond.sample(&mut rng);
        // conditional coordinates: [u, flattened Hessian]
        let u = z[0];
        let flat = DVector::from_iterator(hlen, (1..=hlen).map(|i| z[i]));
        let h = crate::gaussian::unflatten_sym(&flat, m);
        let val = if u > b.0 && u < b.1 { h.determinant().abs() } else { 0.0 };
        sum += val;
        sum2 += val * val;
    }
    let n = mc_samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) / (n - 1.0);
    Ok((prefactor * mean, prefactor * var.sqrt()))
}
