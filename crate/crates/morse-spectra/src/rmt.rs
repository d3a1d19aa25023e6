//! Symmetric Gaussian matrix ensembles and their eigenvalue statistics.
//!
//! The two-parameter ensemble `Sym_n^{u,v}` consists of real symmetric n×n
//! matrices with centred Gaussian entries and covariances
//!
//! ```text
//! E(a_ii²) = u + 2v,   E(a_ii a_jj) = u  (i ≠ j),   E(a_ij²) = v  (i < j),
//! ```
//!
//! admissible when `v > 0` and `n·u + 2v > 0`. For `u = 0` this is the GOE
//! normalised so that `ρ_{n, v/n}` approaches the semicircle of radius `2√v`.
//!
//! The eigenvalue density `ρ_{n,v}` (normalised to mass 1) is computed two
//! independent ways — an (n−1)-dimensional quadrature of the Weyl integrand
//! for n ≤ 4, or a Monte Carlo eigenvalue histogram with Gaussian kernel
//! smoothing for any n — and these cross-validate each other through the
//! rescaling identity `c·ρ_{n,c²v}(cy) = ρ_{n,v}(y)`.
//!
//! Expected |determinant| identities:
//!
//! ```text
//! E_{GOE_m^v}|det(A − c)|   = 2^{3/2}(2v)^{(m+1)/2} Γ((m+3)/2) e^{c²/4v} ρ_{m+1,v}(c)
//! E_{Sym_m^{u,v}}|det(A−c)| = 2^{3/2}(2v)^{(m+1)/2} Γ((m+3)/2) (γ_u ∗ θ⁺_{m+1,v})(c),  u > 0,
//! ```
//!
//! with `θ⁺_{N,v}(x) = ρ_{N,v}(x) e^{x²/4v}`. The convolution integrand decays
//! only when `u < 2v`; beyond that the quadrature path refuses and callers
//! fall back to Monte Carlo.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson_split, erf, gamma, gauss_density, ln_gamma};

/// A symmetric Gaussian ensemble `Sym_n^{u,v}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEnsemble {
    pub n: usize,
    pub u: f64,
    pub v: f64,
}

impl SymEnsemble {
    /// Construct after checking admissibility (`v > 0`, `n·u + 2v > 0`).
    pub fn new(n: usize, u: f64, v: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ensemble size n must be ≥ 1".into()));
        }
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("ensemble needs v > 0, got {v}")));
        }
        if !(n as f64 * u + 2.0 * v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ensemble needs n·u + 2v > 0, got n = {n}, u = {u}, v = {v}"
            )));
        }
        Ok(SymEnsemble { n, u, v })
    }

    /// The GOE with `E(a_ij²) = v`: `Sym_n^{0,v}`.
    pub fn goe(n: usize, v: f64) -> Result<Self> {
        Self::new(n, 0.0, v)
    }

    /// Draw one matrix.
    ///
    /// For `u ≥ 0` this is the decomposition `GOE_n^v + N(0,u)·Id` (a single
    /// shared scalar on the diagonal). For admissible `u < 0` the diagonal
    /// block covariance `2v·Id + u·J` is factored explicitly through its
    /// eigen-split along `(1,…,1)` (eigenvalue `2v + nu > 0`) and its
    /// orthogonal complement (eigenvalue `2v`).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let n = self.n;
        let mut a = DMatrix::zeros(n, n);
        let sqrt_v = self.v.sqrt();
        for i in 0..n {
            for j in (i + 1)..n {
                let g: f64 = StandardNormal.sample(rng);
                a[(i, j)] = sqrt_v * g;
                a[(j, i)] = sqrt_v * g;
            }
        }
        if self.u >= 0.0 {
            let shift: f64 = {
                let g: f64 = StandardNormal.sample(rng);
                self.u.sqrt() * g
            };
            let sq2v = (2.0 * self.v).sqrt();
            for i in 0..n {
                let g: f64 = StandardNormal.sample(rng);
                a[(i, i)] = sq2v * g + shift;
            }
        } else {
            // Covariance square root along the ones-direction split.
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let mean = g.iter().sum::<f64>() / n as f64;
            let par = (2.0 * self.v + n as f64 * self.u).sqrt();
            let perp = (2.0 * self.v).sqrt();
            for i in 0..n {
                a[(i, i)] = perp * (g[i] - mean) + par * mean;
            }
        }
        a
    }

    /// Eigenvalues of one draw (symmetric eigredecomposition, ascending order).
    pub fn sample_eigenvalues<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let a = self.sample(rng);
        let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }
}

/// `log Z_m` with `Z_m = 2^{m/2} · m! · ∏_{j=1}^m Γ(j/2)` (Selberg value of the
/// Weyl-integrand normalisation at `v = 1/2`).
pub fn log_znorm(m: usize) -> f64 {
    let mf = m as f64;
    let mut s = 0.5 * mf * (2.0_f64).ln() + ln_gamma(mf + 1.0);
    for j in 1..=m {
        s += ln_gamma(0.5 * j as f64);
    }
    s
}

/// `Z_m` in linear form; overflows to `+∞` for large m (use [`log_znorm`]).
pub fn znorm(m: usize) -> f64 {
    log_znorm(m).exp()
}

/// `log Z_n(v)` with `Z_n(v) = (2v)^{n(n+1)/4} Z_n`.
pub fn log_znorm_v(n: usize, v: f64) -> f64 {
    0.25 * (n * (n + 1)) as f64 * (2.0 * v).ln() + log_znorm(n)
}

/// Partial Gaussian moments `M_j = ∫_a^b λ^j e^{−λ²/(2σ²)} dλ`, exact in terms
/// of `erf` and the boundary Gaussian values, for j = 0..=jmax.
pub fn gauss_partial_moments(a: f64, b: f64, sigma2: f64, jmax: usize) -> Vec<f64> {
    let sigma = sigma2.sqrt();
    let ea = if a.is_finite() { (-a * a / (2.0 * sigma2)).exp() } else { 0.0 };
    let eb = if b.is_finite() { (-b * b / (2.0 * sigma2)).exp() } else { 0.0 };
    let erfa = if a.is_finite() { erf(a / (sigma * std::f64::consts::SQRT_2)) } else { -1.0 };
    let erfb = if b.is_finite() { erf(b / (sigma * std::f64::consts::SQRT_2)) } else { 1.0 };
    let mut m = Vec::with_capacity(jmax + 1);
    m.push(sigma * (0.5 * std::f64::consts::PI).sqrt() * (erfb - erfa));
    if jmax >= 1 {
        m.push(sigma2 * (ea - eb));
    }
    for j in 2..=jmax {
        let pa = if a.is_finite() { a.powi(j as i32 - 1) * ea } else { 0.0 };
        let pb = if b.is_finite() { b.powi(j as i32 - 1) * eb } else { 0.0 };
        let val = sigma2 * ((j as f64 - 1.0) * m[j - 2] + pa - pb);
        m.push(val);
    }
    m
}

/// `∫_{-∞}^{∞} ∏_i |k_i − λ| · e^{−λ²/4v} dλ`, exact: the product is expanded
/// to a polynomial with a fixed sign on each inter-knot interval, and each
/// piece integrates in closed form against the Gaussian.
pub fn abs_poly_gauss_integral(knots: &[f64], v: f64) -> f64 {
    let mut ks: Vec<f64> = knots.to_vec();
    ks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let deg = ks.len();
    // coefficients of p(λ) = ∏ (k_i − λ), ascending powers of λ
    let mut coef = vec![0.0; deg + 1];
    coef[0] = 1.0;
    let mut cur_deg = 0;
    for &k in &ks {
        // multiply by (k − λ)
        let mut next = vec![0.0; deg + 1];
        for j in 0..=cur_deg {
            next[j] += k * coef[j];
            next[j + 1] -= coef[j];
        }
        coef = next;
        cur_deg += 1;
    }
    let sigma2 = 2.0 * v;
    let mut total = 0.0;
    for seg in 0..=deg {
        let a = if seg == 0 { f64::NEG_INFINITY } else { ks[seg - 1] };
        let b = if seg == deg { f64::INFINITY } else { ks[seg] };
        if a >= b {
            continue;
        }
        // `seg` knots lie below λ on this interval, each flipping the sign
        let sign = if seg % 2 == 0 { 1.0 } else { -1.0 };
        let moments = gauss_partial_moments(a, b, sigma2, deg);
        let piece: f64 = coef.iter().zip(moments.iter()).map(|(c, m)| c * m).sum();
        total += sign * piece;
    }
    total
}

/// ρ_{n,v}(x) by direct quadrature of the Weyl integrand (n ≤ 4 only).
///
/// The innermost eigenvalue integral is exact (piecewise polynomial against
/// the Gaussian); the remaining 0–2 dimensions use adaptive Simpson with
/// splits at the |·|-kinks.
pub fn rho_quad(n: usize, v: f64, x: f64) -> Result<f64> {
    if n == 0 || n > 4 {
        return Err(Error::InvalidParameter(format!(
            "quadrature ρ is only supported for 1 ≤ n ≤ 4, got n = {n}"
        )));
    }
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("ρ needs v > 0, got {v}")));
    }
    let log_z = log_znorm_v(n, v);
    let gx = (-x * x / (4.0 * v)).exp();
    let val = match n {
        1 => gx,
        2 => gx * abs_poly_gauss_integral(&[x], v),
        3 => {
            let l = quad_range(n, v, x);
            // Tolerances are tied to the magnitude of the unnormalised Weyl
            // integral, Z_n(v)·ρ with ρ = O(0.1/√v) in the bulk, so the
            // requested accuracy is effectively relative.
            // gx is applied outside the integral, so the integral itself is of
            // order Z·ρ(x)/gx; without the 1/gx factor the tolerance would be
            // needlessly tight (and slow) far in the tails.
            let scale = log_z.exp() * 0.1 / v.sqrt() / gx.max(1e-280);
            let f = |l2: f64| {
                (x - l2).abs()
                    * (-l2 * l2 / (4.0 * v)).exp()
                    * abs_poly_gauss_integral(&[x, l2], v)
            };
            gx * adaptive_simpson_split(&f, -l, l, &[x], 1e-9 * scale)
        }
        4 => {
            let l = quad_range(n, v, x);
            let scale = log_z.exp() * 0.1 / v.sqrt() / gx.max(1e-280);
            // The two explicitly integrated eigenvalues enter symmetrically:
            // restrict to l3 < l2 and double.  This also removes the moving
            // |l2 − l3| kink from the interior of the inner integral.
            let inner_tol = 1e-8 * scale / (2.0 * l);
            let outer = |l2: f64| {
                let inner = |l3: f64| {
                    (x - l3).abs()
                        * (l2 - l3)
                        * (-l3 * l3 / (4.0 * v)).exp()
                        * abs_poly_gauss_integral(&[x, l2, l3], v)
                };
                let splits: Vec<f64> = if x > -l && x < l2 { vec![x] } else { vec![] };
                (x - l2).abs()
                    * (-l2 * l2 / (4.0 * v)).exp()
                    * adaptive_simpson_split(&inner, -l, l2, &splits, inner_tol)
            };
            2.0 * gx * adaptive_simpson_split(&outer, -l, l, &[x], 1e-8 * scale)
        }
        _ => unreachable!(),
    };
    Ok(val / log_z.exp())
}

/// Integration half-range comfortably covering the spectrum plus Gaussian tails.
fn quad_range(n: usize, v: f64, x: f64) -> f64 {
    x.abs() + 2.0 * ((n as f64) * v).sqrt() + 8.0 * (2.0 * v).sqrt()
}

/// A Monte Carlo density estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McDensity {
    pub value: f64,
    pub stderr: f64,
    /// bandwidth actually used
    pub bandwidth: f64,
}

/// ρ_{n,v}(x) by Monte Carlo: eigenvalues of `samples` draws, Gaussian-kernel
/// smoothed. `bandwidth = None` selects a Silverman-type rule
/// `0.9 · min(σ̂, IQR/1.34) · N^{−1/5}` (σ̂ automatically carries the √(nv)
/// scale of the spectrum).
pub fn rho_mc<R: Rng + ?Sized>(
    n: usize,
    v: f64,
    x: f64,
    samples: usize,
    bandwidth: Option<f64>,
    rng: &mut R,
) -> Result<McDensity> {
    let ens = SymEnsemble::goe(n, v)?;
    let mut all = Vec::with_capacity(n * samples);
    for _ in 0..samples {
        all.extend(ens.sample_eigenvalues(rng));
    }
    Ok(kde_at(&all, x, bandwidth, samples))
}

/// Gaussian KDE of pooled eigenvalues at one point. `groups` is the number of
/// independent matrix draws (eigenvalues within a draw are correlated, so the
/// standard error is computed over per-draw block means).
pub fn kde_at(eigenvalues: &[f64], x: f64, bandwidth: Option<f64>, groups: usize) -> McDensity {
    let n_all = eigenvalues.len();
    let per = n_all / groups.max(1);
    let bw = bandwidth.unwrap_or_else(|| {
        let mean = eigenvalues.iter().sum::<f64>() / n_all as f64;
        let var = eigenvalues.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n_all as f64;
        let mut sorted: Vec<f64> = eigenvalues.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| sorted[((n_all - 1) as f64 * p) as usize];
        let iqr = q(0.75) - q(0.25);
        let a = var.sqrt().min(iqr / 1.34).max(1e-12);
        0.9 * a * (n_all as f64).powf(-0.2)
    });
    // block means over draws for an honest standard error
    let mut block = Vec::with_capacity(groups);
    for g in 0..groups.max(1) {
        let lo = g * per;
        let hi = ((g + 1) * per).min(n_all);
        if lo >= hi {
            break;
        }
        let s: f64 = eigenvalues[lo..hi]
            .iter()
            .map(|e| gauss_density(x - e, bw * bw))
            .sum::<f64>()
            / per as f64;
        block.push(s);
    }
    let gcount = block.len() as f64;
    let mean = block.iter().sum::<f64>() / gcount;
    let var = block.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / gcount;
    McDensity { value: mean, stderr: (var / gcount).sqrt(), bandwidth: bw }
}

/// The semicircle density `ρ_{∞,v}(x) = (1/2πv)√(4v − x²)` on `|x| ≤ 2√v`.
pub fn semicircle(v: f64, x: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("semicircle needs v > 0, got {v}")));
    }
    let disc = 4.0 * v - x * x;
    Ok(if disc <= 0.0 { 0.0 } else { disc.sqrt() / (2.0 * std::f64::consts::PI * v) })
}

/// `θ^±_{N,v}(x) = ρ_{N,v}(x) e^{± x²/4v}` (quadrature ρ; N ≤ 4).
pub fn theta(n: usize, v: f64, x: f64, plus: bool) -> Result<f64> {
    let rho = rho_quad(n, v, x)?;
    let e = x * x / (4.0 * v);
    Ok(rho * if plus { e.exp() } else { (-e).exp() })
}

/// `E_{GOE_m^v} |det(A − c·Id)|` via the determinant identity (`formula`) or
/// direct Monte Carlo averaging (`mc`). The prefactor is evaluated in logs.
pub fn expected_abs_det_goe_formula(m: usize, v: f64, c: f64) -> Result<f64> {
    let pref = 1.5 * (2.0_f64).ln()
        + 0.5 * (m as f64 + 1.0) * (2.0 * v).ln()
        + ln_gamma(0.5 * (m as f64 + 3.0));
    let rho = rho_quad(m + 1, v, c)?;
    Ok((pref + c * c / (4.0 * v)).exp() * rho)
}

/// Monte Carlo mean and standard error of `|det(A − c·Id)|` for any ensemble.
pub fn expected_abs_det_mc<R: Rng + ?Sized>(
    ens: &SymEnsemble,
    c: f64,
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let n = ens.n;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..samples {
        let mut a = ens.sample(rng);
        for i in 0..n {
            a[(i, i)] -= c;
        }
        let d = a.determinant().abs();
        sum += d;
        sumsq += d * d;
    }
    let nn = samples as f64;
    let mean = sum / nn;
    let var = (sumsq / nn - mean * mean).max(0.0);
    (mean, (var / nn).sqrt())
}

/// `E_{Sym_m^{u,v}} |det(A − c·Id)|` for `u > 0` via the Gaussian-convolution
/// identity. Errors when `u ≥ 2v`, where the convolution integrand
/// `γ_u(c−y)·θ⁺_{m+1,v}(y)` no longer decays (callers should use MC there).
pub fn expected_abs_det_shifted(m: usize, u: f64, v: f64, c: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shifted determinant identity needs u > 0, got {u}"
        )));
    }
    if u >= 2.0 * v {
        return Err(Error::Divergent(format!(
            "convolution integrand γ_u·θ⁺ does not decay for u = {u} ≥ 2v = {}",
            2.0 * v
        )));
    }
    // Exponent of the integrand: −(c−y)²/2u + y²/4v = −a y² + b y + const,
    // a = 1/2u − 1/4v > 0. Integrate over the peak ± 10 widths.
    let a = 1.0 / (2.0 * u) - 1.0 / (4.0 * v);
    let b = c / u;
    let y_star = b / (2.0 * a);
    let width = (0.5 / a).sqrt();
    let spread = 2.0 * ((m as f64 + 1.0) * v).sqrt(); // spectral extent of ρ_{m+1,v}
    let lo = (y_star - 12.0 * width - spread).min(c - spread);
    let hi = (y_star + 12.0 * width + spread).max(c + spread);
    // For m + 1 = 4 a pointwise θ⁺ evaluation is itself a nested quadrature;
    // interpolate log θ⁺ (smooth, positive, large dynamic range) from a coarse
    // grid instead of paying that price at every integrand sample.
    let conv = if m + 1 >= 4 {
        let nc = 201;
        let ts: Vec<f64> = (0..nc)
            .map(|i| lo + (hi - lo) * i as f64 / (nc - 1) as f64)
            .collect();
        let ws: Vec<f64> = ts
            .iter()
            .map(|&y| theta(m + 1, v, y, true).unwrap_or(0.0).max(1e-290).ln())
            .collect();
        let f = |y: f64| gauss_density(c - y, u) * crate::weights::cubic_interp(&ts, &ws, y).exp();
        adaptive_simpson_split(&f, lo, hi, &[y_star, c], 1e-10 * (hi - lo))
    } else {
        let f = |y: f64| gauss_density(c - y, u) * theta(m + 1, v, y, true).unwrap_or(0.0);
        adaptive_simpson_split(&f, lo, hi, &[y_star, c], 1e-10 * (hi - lo))
    };
    let pref = 1.5 * (2.0_f64).ln()
        + 0.5 * (m as f64 + 1.0) * (2.0 * v).ln()
        + ln_gamma(0.5 * (m as f64 + 3.0));
    Ok(pref.exp() * conv)
}

/// Convenience: Γ in linear space (re-export used by downstream modules).
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}
