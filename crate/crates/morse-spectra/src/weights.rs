//! Weight families and their radial moments.
//!
//! A *weight* is an even, rapidly decaying function `w : [0, ∞) → [0, ∞)`.
//! Everything downstream is driven by its radial moments
//!
//! ```text
//! I_k(w) = ∫₀^∞ w(r) r^k dr,
//! ```
//!
//! and by three dimensional constants obtained from them,
//!
//! ```text
//! (2π)^m s_m = (2π^{m/2}/Γ(m/2))          I_{m−1},
//! (2π)^m d_m = (2π^{m/2}/(m Γ(m/2)))      I_{m+1},
//! (2π)^m h_m = (2π^{m/2}/(m(m+2) Γ(m/2))) I_{m+3}.
//! ```
//!
//! `s_m`, `d_m`, `h_m` are the variances (per unit `ε^{-m}`-scale) of the
//! field, its gradient components, and its pure second derivatives. The shape
//! of the critical-value limit law depends on the weight only through the
//! ratio `q_m = s_m h_m / d_m²`, which obeys `q_m ≥ m/(m+2)` for every weight.
//!
//! Moments of the slowly decaying families grow like `exp(e^k)`, far beyond
//! `f64` range, so all moment arithmetic is done on logarithms: the moment
//! integral is computed after the substitution `λ = log r`,
//! `I_k = ∫ w(e^λ) e^{(k+1)λ} dλ`, whose integrand is a well-peaked
//! exponential handled by [`quadrature::log_integral_peaked`].

use crate::error::{Error, Result};
use crate::quadrature::{ln_gamma, log_integral_peaked, LogIntegral};

/// Supported weight families.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// `w(t) = e^{−t²}`. Moments are `Γ((k+1)/2)/2` in closed form.
    Gaussian,
    /// `w(t) = exp(−log t · log log t)` for `t > 1`, and `1` on `[0, 1]`
    /// (continuous at 1; decays slower than any power, `log I_k ~ e^k`).
    LogPower,
    /// `w(t) = exp(−C (log t)^α)` for `t ≥ 1`, `1` on `[0, 1]`; `C > 0`, `α > 1`.
    LogSquared { c: f64, alpha: f64 },
    /// `w(t) = exp(−1/(1 − (t−c)²))` on `|t − c| ≤ 1`, zero elsewhere; `c ≥ 0`.
    BumpOffset { c: f64 },
    /// Tabulated weight: natural cubic interpolation of `(t_i, w_i)` samples on
    /// `[0, t_max]` and a power-law-free certified zero tail: beyond `t_max`
    /// the weight is extended by `w(t_max) e^{−decay (t − t_max)}`; `decay > 0`
    /// so every moment's tail bound is certifiable.
    CustomTable {
        /// strictly increasing abscissae, starting at 0
        ts: Vec<f64>,
        /// non-negative samples
        ws: Vec<f64>,
        /// exponential decay rate past the last abscissa
        decay: f64,
    },
}

impl Weight {
    /// Validate parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            Weight::Gaussian | Weight::LogPower => Ok(()),
            Weight::LogSquared { c, alpha } => {
                if *c > 0.0 && *alpha > 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "log-squared weight needs C > 0 and α > 1, got C = {c}, α = {alpha}"
                    )))
                }
            }
            Weight::BumpOffset { c } => {
                if *c >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "bump-offset weight needs c ≥ 0, got {c}"
                    )))
                }
            }
            Weight::CustomTable { ts, ws, decay } => {
                if ts.len() < 4 || ts.len() != ws.len() {
                    return Err(Error::InvalidParameter(
                        "custom table needs ≥ 4 matching (t, w) samples".into(),
                    ));
                }
                if ts[0] != 0.0 || ts.windows(2).any(|p| p[1] <= p[0]) {
                    return Err(Error::InvalidParameter(
                        "custom table abscissae must start at 0 and increase".into(),
                    ));
                }
                if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidParameter("custom table values must be ≥ 0".into()));
                }
                if *decay <= 0.0 {
                    return Err(Error::TailBound(
                        "custom table decay rate must be > 0 so the moment tail is certifiable"
                            .into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `w(t)` for `t ≥ 0`.
    pub fn eval(&self, t: f64) -> f64 {
        self.log_eval(t).exp()
    }

    /// `log w(t)`; `−∞` outside the support.
    pub fn log_eval(&self, t: f64) -> f64 {
        match self {
            Weight::Gaussian => -t * t,
            Weight::LogPower => {
                if t <= 1.0 {
                    0.0
                } else {
                    let lt = t.ln();
                    -lt * lt.ln()
                }
            }
            Weight::LogSquared { c, alpha } => {
                if t <= 1.0 {
                    0.0
                } else {
                    -c * t.ln().powf(*alpha)
                }
            }
            Weight::BumpOffset { c } => {
                let x = t - c;
                if x.abs() < 1.0 {
                    -1.0 / (1.0 - x * x)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Weight::CustomTable { ts, ws, decay } => {
                let tmax = *ts.last().unwrap();
                if t > tmax {
                    let w_end = *ws.last().unwrap();
                    if w_end == 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    return w_end.ln() - decay * (t - tmax);
                }
                let v = cubic_interp(ts, ws, t).max(0.0);
                v.ln()
            }
        }
    }

    /// `log w(e^λ)`, stable for λ far beyond the overflow threshold of
    /// `e^λ` itself.  The slowly decaying families have moment integrands
    /// peaking at λ of order `e^k`, where `e^λ` is not representable; their
    /// logarithmic decay laws are polynomial in λ, so we evaluate those
    /// directly.
    pub fn log_eval_at_log(&self, l: f64) -> f64 {
        match self {
            Weight::LogPower => {
                if l <= 0.0 {
                    0.0
                } else {
                    -l * l.ln()
                }
            }
            Weight::LogSquared { c, alpha } => {
                if l <= 0.0 {
                    0.0
                } else {
                    -c * l.powf(*alpha)
                }
            }
            _ => {
                let r = l.exp();
                if r.is_infinite() {
                    f64::NEG_INFINITY
                } else {
                    self.log_eval(r)
                }
            }
        }
    }

    /// Supremum of `w` over `[0, ∞)`, used to normalize truncation
    /// tolerances (`w(εK) ≤ tol · sup w` defines the spectral cutoff).
    pub fn sup(&self) -> f64 {
        match self {
            // decay laws start from w = 1 (at 0 resp. on [0, 1])
            Weight::Gaussian | Weight::LogPower | Weight::LogSquared { .. } => 1.0,
            Weight::BumpOffset { .. } => (-1.0f64).exp(),
            Weight::CustomTable { ts, ws, .. } => {
                // the cubic interpolant can overshoot the samples slightly;
                // a midpoint scan bounds the overshoot well enough for a
                // cutoff normalization.
                let mut sup = 0.0f64;
                for i in 0..ts.len() - 1 {
                    let tm = 0.5 * (ts[i] + ts[i + 1]);
                    sup = sup.max(ws[i]).max(cubic_interp(ts, ws, tm));
                }
                sup.max(*ws.last().unwrap())
            }
        }
    }

    /// Upper end of the support (`+∞` for non-compact weights).
    pub fn support_end(&self) -> f64 {
        match self {
            Weight::BumpOffset { c } => c + 1.0,
            _ => f64::INFINITY,
        }
    }

    /// A λ-value (λ = log r) near which the moment integrand of order `k` peaks.
    fn peak_hint(&self, k: usize) -> f64 {
        let kk = (k + 1) as f64;
        match self {
            Weight::Gaussian => 0.5 * (0.5 * kk).max(1e-2).ln(),
            // exponent (k+1)λ − λ log λ peaks at λ = e^k
            Weight::LogPower => (k as f64).exp(),
            // exponent (k+1)λ − C λ^α peaks at λ = ((k+1)/(Cα))^{1/(α−1)}
            Weight::LogSquared { c, alpha } => (kk / (c * alpha)).powf(1.0 / (alpha - 1.0)),
            Weight::BumpOffset { c } => (c + 0.5).max(0.5).ln(),
            Weight::CustomTable { ts, .. } => (0.5 * ts.last().unwrap()).max(0.1).ln(),
        }
    }
}

/// Natural cubic spline interpolation (small tables; recomputed per call).
pub(crate) fn cubic_interp(ts: &[f64], ws: &[f64], t: f64) -> f64 {
    let n = ts.len();
    // second-derivative solve (Thomas algorithm on the natural spline system)
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    b[0] = 1.0;
    b[n - 1] = 1.0;
    for i in 1..n - 1 {
        let h0 = ts[i] - ts[i - 1];
        let h1 = ts[i + 1] - ts[i];
        a[i] = h0;
        b[i] = 2.0 * (h0 + h1);
        c[i] = h1;
        d[i] = 6.0 * ((ws[i + 1] - ws[i]) / h1 - (ws[i] - ws[i - 1]) / h0);
    }
    for i in 1..n {
        let m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    let mut m2 = vec![0.0; n];
    m2[n - 1] = d[n - 1] / b[n - 1];
    for i in (0..n - 1).rev() {
        m2[i] = (d[i] - c[i] * m2[i + 1]) / b[i];
    }
    let j = match ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(j) => j.min(n - 2),
        Err(j) => j.saturating_sub(1).min(n - 2),
    };
    let h = ts[j + 1] - ts[j];
    let x = (t - ts[j]) / h;
    let (y0, y1) = (ws[j], ws[j + 1]);
    (1.0 - x) * y0 + x * y1
        + h * h / 6.0 * ((1.0 - x) * ((1.0 - x) * (1.0 - x) - 1.0) * m2[j] + x * (x * x - 1.0) * m2[j + 1])
}

/// A moment `I_k(w)` in log form.
#[derive(Debug, Clone, Copy)]
pub struct Moment {
    /// `log I_k` — always finite.
    pub log_value: f64,
    /// `I_k` — may overflow to `+∞` for slowly decaying weights.
    pub value: f64,
}

/// `I_k(w) = ∫₀^∞ w(r) r^k dr`, computed in log space with a certified tail
/// cutoff (remainder below `tol/10` relative).
pub fn moment(w: &Weight, k: usize, tol: f64) -> Result<Moment> {
    w.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("moment tolerance must be > 0".into()));
    }
    let kk = (k + 1) as f64;
    let phi = |l: f64| w.log_eval_at_log(l) + kk * l;
    let hi = {
        let end = w.support_end();
        if end.is_finite() {
            end.ln()
        } else {
            f64::INFINITY
        }
    };
    let lo = match w {
        // bump-offset with c ≥ 1 vanishes below r = c−1 too
        Weight::BumpOffset { c } if *c > 1.0 => (c - 1.0).ln(),
        _ => f64::NEG_INFINITY,
    };
    let li: LogIntegral = log_integral_peaked(&phi, lo, hi, w.peak_hint(k), tol)?;
    Ok(Moment { log_value: li.log_value, value: li.value })
}

/// The dimensional constants `(s_m, d_m, h_m)` in both linear and log form.
#[derive(Debug, Clone, Copy)]
pub struct DimensionalConstants {
    pub m: usize,
    pub s: f64,
    pub d: f64,
    pub h: f64,
    pub log_s: f64,
    pub log_d: f64,
    pub log_h: f64,
}

/// Compute `(s_m, d_m, h_m)` from the `I_{m−1}, I_{m+1}, I_{m+3}` moments.
///
/// The prefactors are the closed Γ-forms of the sphere-average integrals;
/// they are analytic in `m` and are used verbatim at `m = 1` as well (where
/// the mixed `x₁²x₂²` integral behind `h_m` has no direct meaning).
pub fn dimensional_constants(w: &Weight, m: usize, tol: f64) -> Result<DimensionalConstants> {
    if m == 0 {
        return Err(Error::InvalidParameter("dimension m must be ≥ 1".into()));
    }
    let mf = m as f64;
    let two_pi_m = mf * (2.0 * std::f64::consts::PI).ln();
    let base = (2.0_f64).ln() + 0.5 * mf * std::f64::consts::PI.ln() - ln_gamma(0.5 * mf);
    let lg_s = base - two_pi_m;
    let lg_d = base - mf.ln() - two_pi_m;
    let lg_h = base - (mf * (mf + 2.0)).ln() - two_pi_m;
    let im1 = moment(w, m - 1, tol)?;
    let ip1 = moment(w, m + 1, tol)?;
    let ip3 = moment(w, m + 3, tol)?;
    let log_s = lg_s + im1.log_value;
    let log_d = lg_d + ip1.log_value;
    let log_h = lg_h + ip3.log_value;
    Ok(DimensionalConstants {
        m,
        s: log_s.exp(),
        d: log_d.exp(),
        h: log_h.exp(),
        log_s,
        log_d,
        log_h,
    })
}

/// Shape of the critical-value limit law for a weight at dimension `m`.
#[derive(Debug, Clone, Copy)]
pub struct MomentProfile {
    pub constants: DimensionalConstants,
    /// `q_m = s_m h_m / d_m² = (m/(m+2)) I_{m−1} I_{m+3} / I_{m+1}²`.
    pub q: f64,
    /// `r_m = max(1, q_m)` with a `|q_m − 1| ≤ 1e−12` tie band snapping to 1.
    pub r: f64,
    /// Variance completion `ω_m ≥ 0` solving `r_m = (s_m + ω_m) h_m / d_m²`.
    pub omega: f64,
    /// `š_m = s_m + ω_m`.
    pub s_check: f64,
    /// `κ_m = (r_m − 1) / (2 r_m)`.
    pub kappa: f64,
}

/// Tie band inside which `q_m` snaps to exactly 1.  `q_m` combines four
/// numerically integrated moments, so its attainable accuracy sits a couple
/// of digits above that of a single moment; the band is set well above that
/// noise level but far below any structurally meaningful deviation from the
/// critical value `q = 1` (where the extra white-noise variance `ω` turns on).
pub const R_TIE_BAND: f64 = 1e-8;

/// Compute the [`MomentProfile`] of `w` at dimension `m`.
///
/// All moment combinations are formed in log space, so this works even for
/// weights whose raw moments overflow `f64` (the log-power family).
pub fn shape_params(w: &Weight, m: usize, tol: f64) -> Result<MomentProfile> {
    let constants = dimensional_constants(w, m, tol)?;
    let mf = m as f64;
    let log_q = constants.log_s + constants.log_h - 2.0 * constants.log_d;
    let q = log_q.exp();
    let floor = mf / (mf + 2.0);
    if q < floor - 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "computed q_{m} = {q} violates the universal bound m/(m+2) = {floor}; \
             weight moments are inconsistent"
        )));
    }
    let r = if (q - 1.0).abs() <= R_TIE_BAND { 1.0 } else { q.max(1.0) };
    // r = (s + ω) h / d²  ⇔  ω = (d²/h)(r − q) + 0; for r = q this is exactly
    // 0, and inside the tie band (q ≅ 1) the residual (d²/h)(1 − q) is pure
    // integration noise and is snapped to 0 alongside r.
    let omega = if r == q || (q - 1.0).abs() <= R_TIE_BAND {
        0.0
    } else {
        // r = 1 > q: ω = d²/h − s = (d²/h)(1 − q), formed in log space.
        (2.0 * constants.log_d - constants.log_h + (1.0 - q).ln()).exp()
    };
    let s_check = if omega == 0.0 {
        constants.s
    } else {
        constants.s + omega
    };
    let kappa = (r - 1.0) / (2.0 * r);
    Ok(MomentProfile { constants, q, r, omega, s_check, kappa })
}

/// The predicted leading term of `log I_k(w)` for the slowly/compactly
/// decaying families (used only to cross-validate the quadrature).
///
/// * bump-offset: `k log(c+1)`
/// * log-power:   `e^k + ½ log(2π e^k)`
/// * log-squared: `Z(α, C) λ^{α/(α−1)}` at `λ = k+1`,
///   `Z(α, C) = (α^{1/(α−1)} − 1) / (C^{1/(α−1)} α^{α/(α−1)})`
///
/// Meaningful for `k ≥ 20` (documented accuracy degrades quickly below that).
pub fn tail_log_asymptote(w: &Weight, k: usize) -> Result<f64> {
    let kf = k as f64;
    match w {
        Weight::BumpOffset { c } => Ok(kf * (c + 1.0).ln()),
        Weight::LogPower => {
            let ek = kf.exp();
            Ok(ek + 0.5 * (2.0 * std::f64::consts::PI * ek).ln())
        }
        Weight::LogSquared { c, alpha } => {
            let lam = kf + 1.0;
            let inv = 1.0 / (alpha - 1.0);
            let z = (alpha.powf(inv) - 1.0) / (c.powf(inv) * alpha.powf(alpha * inv));
            Ok(z * lam.powf(alpha * inv))
        }
        _ => Err(Error::InvalidParameter(
            "tail asymptote only defined for bump-offset, log-power, log-squared".into(),
        )),
    }
}
