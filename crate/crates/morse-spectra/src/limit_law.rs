//! Universal critical-value limit laws.
//!
//! As the scale `ε` of a smooth isotropic random field tends to zero, the
//! empirical measure of its critical *values* (suitably normalised)
//! concentrates on a deterministic density.  That density depends on the
//! spectral weight only through the single shape ratio `r ≥ 1` of its moment
//! profile, and is built out of two ingredients: a Gaussian for the field
//! value at a critical point, and the mean eigenvalue density `ρ_{m+1,v}` of
//! a Gaussian symmetric ensemble one dimension up, which absorbs the
//! `|det ∇²u|` Jacobian from the Kac–Rice formula.
//!
//! Two equivalent closed forms are implemented (their agreement is a strong
//! internal consistency check, since they resolve the determinant identity
//! in different orders):
//!
//! * form A: `σ̌_m(y) ∝ (γ_{r−1} ∗ θ⁺_{m+1,r})(y) · γ₁(y)`,
//! * form B: `σ̌_m(y) ∝ (θ⁻_{m+1,1/r} ∗ γ_{(r−1)/r})(y)`,
//!
//! where `γ_v` is the centred Gaussian density of variance `v` and
//! `θ^±_{N,v}(y) = ρ_{N,v}(y)·e^{±y²/4v}`.  At the critical shape value
//! `r = 1` both collapse to `ρ_{m+1,1}(y)·e^{−y²/4}` (up to normalisation).
//!
//! The same unnormalised integral yields the *count* constant: the expected
//! number of critical points per unit volume grows like `C_m·ε^{−m}` with
//!
//! ```text
//! C_m = 2^{(m+4)/2} √r (h/2πd)^{m/2} Γ((m+3)/2) · ∫ (γ_{r−1} ∗ θ⁺_{m+1,r})(y) γ₁(y) dy,
//! ```
//!
//! computed in log space so that weights with non-representable moments
//! (`h, d = ∞` in linear form) still produce finite answers.
//!
//! Three further pieces live here:
//!
//! * a Monte Carlo surrogate ([`critical_value_weighted_samples`]) that draws
//!   `(y, |det(A − y/√r)|)` pairs, `A ~ Sym_m^{2κ,1}`, whose weighted
//!   empirical law must match `σ̌_m` — an end-to-end check of the analytic
//!   pipeline against raw sampling;
//! * the deconvolution step ([`sigma_density`]) removing the independent
//!   `N(0, ω)` component that weights with `q < 1` force into the field,
//!   recovering the critical-value law `σ_m` of the smooth part alone;
//! * the distance to the Gaussian CLT limit ([`clt_distance`]): as
//!   `m → ∞`, `σ_m → γ_{(r+1)/r}` and the Kolmogorov–Smirnov distance
//!   decreases monotonically in `m`.
//!
//! Densities are held on uniform grids (≤ 4096 points) with direct-sum
//! convolutions; the half-width `6(1+√r)` comfortably covers the support of
//! every factor that survives the final Gaussian damping.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::quadrature::{gauss_cdf, gauss_density, ln_gamma};
use crate::rmt::{rho_quad, SymEnsemble};
use crate::rng::task_rng;
use crate::weights::{cubic_interp, MomentProfile};

/// Where eigenvalue densities `ρ_{n,v}` come from.
#[derive(Debug, Clone)]
pub enum RhoProvider {
    /// Direct quadrature (exact inner integrals); available for `n ≤ 4`,
    /// i.e. field dimension `m ≤ 3`.  The `n = 4` density is sampled on
    /// `coarse_points` abscissae and cubic-spline interpolated to the target
    /// grid (ρ is analytic, so a few hundred points carry full accuracy).
    Quadrature { coarse_points: usize },
    /// Kernel-smoothed eigenvalue histogram over `samples` matrix draws with
    /// a deterministic stream derived from `seed` (any `n`).
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for RhoProvider {
    fn default() -> Self {
        RhoProvider::Quadrature { coarse_points: 241 }
    }
}

impl RhoProvider {
    /// Sample `ρ_{n,v}` on a symmetric grid.
    pub fn rho_grid(&self, n: usize, v: f64, half_width: f64, points: usize) -> Result<DensityGrid> {
        match self {
            RhoProvider::Quadrature { coarse_points } => {
                if n > 4 {
                    return Err(Error::InvalidParameter(format!(
                        "quadrature ρ supports n ≤ 4 (got n = {n}); use the Monte Carlo provider"
                    )));
                }
                if n < 4 {
                    // cheap enough to evaluate at every node
                    DensityGrid::sample(&|y| rho_quad(n, v, y).unwrap_or(0.0), half_width, points)
                } else {
                    let nc = (*coarse_points).clamp(33, points);
                    let ts: Vec<f64> = (0..nc)
                        .map(|i| DensityGrid::point_at(half_width, nc, i))
                        .collect();
                    let ws: Vec<f64> =
                        ts.iter().map(|&y| rho_quad(n, v, y).unwrap_or(0.0)).collect();
                    DensityGrid::sample(
                        &|y| cubic_interp(&ts, &ws, y).max(0.0),
                        half_width,
                        points,
                    )
                }
            }
            RhoProvider::MonteCarlo { samples, seed } => {
                mc_rho_grid(n, v, half_width, points, *samples, *seed)
            }
        }
    }
}

/// Binned kernel density of pooled eigenvalues: linear-binned histogram on
/// the target grid, then a direct-sum Gaussian convolution with a
/// Silverman-rule bandwidth.
fn mc_rho_grid(
    n: usize,
    v: f64,
    half_width: f64,
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<DensityGrid> {
    if samples == 0 {
        return Err(Error::InvalidParameter("Monte Carlo ρ needs samples > 0".into()));
    }
    let ens = SymEnsemble::goe(n, v)?;
    let mut rng = task_rng(seed, 0x7f0_0000 + n as u64);
    let mut hist = DensityGrid::sample(&|_| 0.0, half_width, points)?;
    let dy = hist.dy();
    let total = (samples * n) as f64;
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..samples {
        for l in ens.sample_eigenvalues(&mut rng) {
            sum += l;
            sumsq += l * l;
            // linear binning: mass dy⁻¹ split between the two bracketing nodes
            let pos = (l + half_width) / dy;
            if pos < 0.0 || pos > (points - 1) as f64 {
                continue;
            }
            let i = (pos.floor() as usize).min(points - 2);
            let frac = pos - i as f64;
            hist.values[i] += (1.0 - frac) / (total * dy);
            hist.values[i + 1] += frac / (total * dy);
        }
    }
    let sd = (sumsq / total - (sum / total).powi(2)).max(0.0).sqrt();
    let bw = (0.9 * sd * total.powf(-0.2)).max(2.0 * dy);
    let mut out = hist.convolve(&|d| gauss_density(d, bw * bw));
    out.normalize()?;
    Ok(out)
}

/// A critical-value limit density together with the raw (unnormalised)
/// Kac–Rice integral it came from.
#[derive(Debug, Clone)]
pub struct SigmaCheck {
    /// Normalised density of the (š-scaled) critical values.
    pub grid: DensityGrid,
    /// `log ∫ (γ_{r−1} ∗ θ⁺_{m+1,r})(y) γ₁(y) dy` — the determinant factor in
    /// the count constant.
    pub log_raw_integral: f64,
}

/// Grid half-width used for the limit laws of shape ratio `r`.
pub fn default_half_width(r: f64) -> f64 {
    6.0 * (1.0 + r.sqrt())
}

/// `σ̌_m` via form A: `(γ_{r−1} ∗ θ⁺_{m+1,r})(y) · γ₁(y)`.
pub fn sigma_check_density(
    profile: &MomentProfile,
    provider: &RhoProvider,
    points: usize,
) -> Result<SigmaCheck> {
    let m = profile.constants.m;
    let r = profile.r;
    let x = default_half_width(r);
    let rho = provider.rho_grid(m + 1, r, x, points)?;
    let theta_plus = DensityGrid {
        half_width: x,
        values: rho
            .points()
            .iter()
            .zip(rho.values.iter())
            .map(|(y, p)| p * (y * y / (4.0 * r)).exp())
            .collect(),
    };
    let smoothed = if r > 1.0 {
        theta_plus.convolve(&|d| gauss_density(d, r - 1.0))
    } else {
        theta_plus
    };
    let mut grid = DensityGrid {
        half_width: x,
        values: smoothed
            .points()
            .iter()
            .zip(smoothed.values.iter())
            .map(|(y, p)| p * gauss_density(*y, 1.0))
            .collect(),
    };
    let raw = grid.integral();
    if !(raw > 0.0) {
        return Err(Error::Unreliable("σ̌ integrand vanished on the whole grid".into()));
    }
    grid.normalize()?;
    Ok(SigmaCheck { grid, log_raw_integral: raw.ln() })
}

/// `σ̌_m` via form B: `(θ⁻_{m+1,1/r} ∗ γ_{(r−1)/r})(y)`, normalised.
pub fn sigma_check_density_alt(
    profile: &MomentProfile,
    provider: &RhoProvider,
    points: usize,
) -> Result<DensityGrid> {
    let m = profile.constants.m;
    let r = profile.r;
    let x = default_half_width(r);
    let v = 1.0 / r;
    let rho = provider.rho_grid(m + 1, v, x, points)?;
    let theta_minus = DensityGrid {
        half_width: x,
        values: rho
            .points()
            .iter()
            .zip(rho.values.iter())
            .map(|(y, p)| p * (-y * y / (4.0 * v)).exp())
            .collect(),
    };
    let mut out = if r > 1.0 {
        theta_minus.convolve(&|d| gauss_density(d, (r - 1.0) / r))
    } else {
        theta_minus
    };
    out.normalize()?;
    Ok(out)
}

/// Weighted Monte Carlo surrogate for `σ̌_m`: pairs `(y, |det(A − y/√r)|)`
/// with `y ~ N(0,1)` and `A ~ Sym_m^{2κ,1}` independent.  The weighted
/// empirical distribution of `y` converges to `σ̌_m`.
pub fn critical_value_weighted_samples<R: Rng + ?Sized>(
    profile: &MomentProfile,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let m = profile.constants.m;
    let r = profile.r;
    let ens = SymEnsemble::new(m, 2.0 * profile.kappa, 1.0)?;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y: f64 = rng.sample(StandardNormal);
        let mut a = ens.sample(rng);
        let shift = y / r.sqrt();
        for i in 0..m {
            a[(i, i)] -= shift;
        }
        out.push((y, a.determinant().abs()));
    }
    Ok(out)
}

/// The count constant in linear and log form.
#[derive(Debug, Clone, Copy)]
pub struct CountConstant {
    pub log_value: f64,
    /// may overflow to `+∞` for weights with non-representable moments
    pub value: f64,
}

/// `C_m`: expected number of critical points per unit volume, divided by
/// `ε^{−m}`, in the small-`ε` limit.
pub fn c_constant(
    profile: &MomentProfile,
    provider: &RhoProvider,
    points: usize,
) -> Result<CountConstant> {
    let m = profile.constants.m as f64;
    let check = sigma_check_density(profile, provider, points)?;
    let log_value = 0.5 * (m + 4.0) * std::f64::consts::LN_2
        + 0.5 * profile.r.ln()
        + 0.5 * m * (profile.constants.log_h - (2.0 * std::f64::consts::PI).ln() - profile.constants.log_d)
        + ln_gamma(0.5 * (m + 3.0))
        + check.log_raw_integral;
    Ok(CountConstant { log_value, value: log_value.exp() })
}

/// Large-`m` asymptote of the count constant (log form):
/// `C_m ≈ (8/√(πm)) Γ((m+3)/2) (h/πd)^{m/2}`.
pub fn c_constant_asymptotic_log(profile: &MomentProfile) -> f64 {
    let m = profile.constants.m as f64;
    (8.0 / (std::f64::consts::PI * m).sqrt()).ln()
        + ln_gamma(0.5 * (m + 3.0))
        + 0.5 * m * (profile.constants.log_h - std::f64::consts::PI.ln() - profile.constants.log_d)
}

/// Deconvolve the white-noise component out of `σ̌_m` and rescale, producing
/// the critical-value law `σ_m` of the smooth field alone.
///
/// `σ̌` describes critical values normalised by `√š = √(s + ω)`; the smooth
/// part contributes `N(0, s)` and the independent defect `N(0, ω)`.  In
/// characteristic-function form the defect divides out as
/// `φ_Z(t) = φ_σ̌(t)·e^{(ω/š)t²/2}`; frequencies where the damping factor
/// `e^{−(ω/š)t²/2}` has fallen below `1e−6` carry no usable signal and are
/// zeroed rather than amplified.  The result is rescaled from `√š` to `√s`
/// units.  For `ω = 0` this is the identity.
pub fn sigma_density(profile: &MomentProfile, sigma_check: &DensityGrid) -> Result<DensityGrid> {
    if profile.omega == 0.0 {
        return Ok(sigma_check.clone());
    }
    let ratio = profile.omega / profile.s_check; // ω/š < 1
    let x = sigma_check.half_width;
    let n = sigma_check.len();
    let dy = sigma_check.dy();
    let pts = sigma_check.points();

    // Frequency cutoff: damping e^{−ratio t²/2} ≥ 1e−6, and at most Nyquist.
    let t_signal = (2.0 * (1e6f64).ln() / ratio).sqrt();
    let t_max = t_signal.min(std::f64::consts::PI / dy);
    let dt = std::f64::consts::PI / (2.0 * x);
    let n_freq = (t_max / dt).floor() as usize;
    if n_freq < 8 {
        return Err(Error::Unreliable(format!(
            "deconvolution has only {n_freq} usable frequencies (ω/š = {ratio:.3})"
        )));
    }

    // Forward transform of σ̌ (trapezoid), amplified per frequency.
    let mut re = vec![0.0f64; n_freq + 1];
    let mut im = vec![0.0f64; n_freq + 1];
    for k in 0..=n_freq {
        let t = k as f64 * dt;
        let amp = (0.5 * ratio * t * t).exp();
        let (mut sr, mut si) = (0.0, 0.0);
        for (j, y) in pts.iter().enumerate() {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            let (s, c) = (t * y).sin_cos();
            sr += w * sigma_check.values[j] * c;
            si += w * sigma_check.values[j] * s;
        }
        re[k] = sr * dy * amp;
        im[k] = si * dy * amp;
    }

    // Inverse transform onto the rescaled abscissae: σ(y) = (1/c)·f_Z(y/c),
    // c = √(š/s) ≥ 1.
    let c = (profile.s_check / profile.constants.s).sqrt();
    let mut values = Vec::with_capacity(n);
    for y in &pts {
        let z = y / c;
        let mut acc = 0.0;
        for k in 0..=n_freq {
            let t = k as f64 * dt;
            let w = if k == 0 { 0.5 } else { 1.0 };
            let (s, cc) = (t * z).sin_cos();
            acc += w * (re[k] * cc + im[k] * s);
        }
        values.push((acc * dt / std::f64::consts::PI / c).max(0.0));
    }
    let mut out = DensityGrid { half_width: x, values };
    out.normalize()?;
    Ok(out)
}

/// Kolmogorov–Smirnov distance between `σ_m` and its `m → ∞` Gaussian limit
/// `γ_{(r+1)/r}`.
pub fn clt_distance(profile: &MomentProfile, sigma: &DensityGrid) -> f64 {
    let var = (profile.r + 1.0) / profile.r;
    sigma.ks_distance_to(&|y| gauss_cdf(y, var))
}
