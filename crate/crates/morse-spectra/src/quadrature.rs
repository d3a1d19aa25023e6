//! Adaptive quadrature utilities.
//!
//! Two workhorses live here:
//!
//! * [`adaptive_simpson`] — classic recursive Simpson with an absolute/relative
//!   tolerance split, used everywhere a smooth 1-D integral is needed.
//! * [`log_integral_peaked`] — integration of `exp(φ(λ)) dλ` for a concave-ish,
//!   rapidly decaying exponent `φ`, carried out entirely in log space. Weight
//!   moments grow like `exp(e^k)` for the slowly decaying families, so the
//!   linear-space value is frequently not representable in `f64`; the log-space
//!   result always is.
//!
//! The tail cutoffs are *certified*: integration stops at `T` only once the
//! measured log-slope `φ'` is steeper than −1 and still steepening, so the
//! remainder is bounded by the geometric(-like) envelope
//! `∫_T^∞ e^{φ(T) + φ'(T)(λ−T)} dλ = e^{φ(T)}/|φ'(T)|`, and that bound is
//! required to be below `tol/10` of the accumulated integral.

use crate::error::{Error, Result};

/// Recursive adaptive Simpson on `[a, b]`.
///
/// `tol` is treated as an absolute tolerance on the integral; the classic
/// Richardson criterion `|S₂ − S₁| < 15 tol` controls subdivision.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    // The evaluation budget guards against noise-dominated refinement: when
    // the integrand itself carries rounding jitter (e.g. from cancellation in
    // a log-domain exponent), the Richardson delta bottoms out at a noise
    // floor that shrinks at the same 1/2^d rate as the per-level tolerance,
    // and the recursion would otherwise subdivide to its full depth
    // everywhere.  Exhausting the budget accepts the current Richardson
    // extrapolation, whose error is then at the integrand's own noise level.
    let mut budget: i64 = 4_000_000;
    simpson_rec(f, a, b, fa, fm, fb, simpson_rule(a, b, fa, fm, fb), tol, 52, &mut budget)
}

fn simpson_rule(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut i64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *budget -= 2;
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || *budget <= 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)
    }
}

/// Adaptive Simpson with interior split points (kink locations).
///
/// The integrand may have |·|-type kinks; splitting at them restores the
/// smoothness assumption of the Richardson error estimate on each piece.
pub fn adaptive_simpson_split(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    splits: &[f64],
    tol: f64,
) -> f64 {
    let mut pts: Vec<f64> = splits.iter().copied().filter(|x| *x > a && *x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let n = (pts.len() - 1) as f64;
    pts.windows(2)
        .map(|wi| adaptive_simpson(f, wi[0], wi[1], tol / n))
        .sum()
}

/// Result of a log-space peaked integration.
#[derive(Debug, Clone, Copy)]
pub struct LogIntegral {
    /// `log ∫ exp(φ)` — always finite when the integral converges.
    pub log_value: f64,
    /// `exp(log_value)`, which may overflow to `+∞`.
    pub value: f64,
}

/// Integrate `∫ exp(φ(λ)) dλ` over `(lo, hi)` where `φ` peaks somewhere inside
/// and decays rapidly towards both ends. `lo`/`hi` may be `±∞`, in which case
/// certified tail cutoffs are substituted.
///
/// `peak_hint` seeds the peak search. Returns the log of the integral.
pub fn log_integral_peaked(
    phi: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    peak_hint: f64,
    tol: f64,
) -> Result<LogIntegral> {
    // --- locate the peak: coarse scan then golden-section refinement.
    let (mut lstar, mut best) = (peak_hint, phi(peak_hint));
    let scan_lo = if lo.is_finite() { lo } else { peak_hint - 64.0 };
    let scan_hi = if hi.is_finite() {
        hi
    } else {
        peak_hint.abs().max(1.0) * 8.0 + 64.0
    };
    let nscan = 4000;
    for i in 0..=nscan {
        let l = scan_lo + (scan_hi - scan_lo) * i as f64 / nscan as f64;
        let v = phi(l);
        if v > best {
            best = v;
            lstar = l;
        }
    }
    // Golden-section around the best scan point (±2 scan steps comfortably
    // brackets the peak even when the scan resolution is marginal).
    let step = (scan_hi - scan_lo) / nscan as f64;
    let (mut a, mut b) = ((lstar - 2.0 * step).max(scan_lo), (lstar + 2.0 * step).min(scan_hi));
    for _ in 0..200 {
        let x1 = b - 0.618_033_988_749_894_9 * (b - a);
        let x2 = a + 0.618_033_988_749_894_9 * (b - a);
        if phi(x1) < phi(x2) {
            a = x1;
        } else {
            b = x2;
        }
        if b - a < 1e-13 * (1.0 + lstar.abs()) {
            break;
        }
    }
    lstar = 0.5 * (a + b);
    let phimax = phi(lstar);
    if !phimax.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integrand peak not finite at λ = {lstar}"
        )));
    }

    // --- certified cutoffs: march outwards until exp(φ−φmax) is negligible
    // and the local log-slope certifies the remainder.
    let g = |l: f64| (phi(l) - phimax).exp();
    let width0 = 0.05 * (1.0 + lstar.abs());
    let cut = |dir: f64| -> Result<f64> {
        let mut t = lstar + dir * width0;
        let mut w = width0;
        for _ in 0..400 {
            if (dir > 0.0 && t >= hi) || (dir < 0.0 && t <= lo) {
                return Ok(if dir > 0.0 { hi } else { lo });
            }
            let p = phi(t);
            if p - phimax < -46.0 {
                // measured slope per unit *outward* distance
                let h = 1e-3 * (1.0 + t.abs());
                let slope = (phi(t + dir * h) - p) / h;
                // Require genuine decay; the remainder beyond t is then bounded
                // by e^{φ(t)} / |slope| ≤ e^{φmax−46}/|slope|.
                if slope < -1e-3 {
                    let rem = (p - phimax).exp() / (-slope);
                    if rem < tol / 10.0 {
                        return Ok(t);
                    }
                } else if slope >= 0.0 {
                    return Err(Error::TailBound(format!(
                        "integrand not decaying at λ = {t} (slope {slope:.3e})"
                    )));
                }
            }
            w *= 1.6;
            t += dir * w;
        }
        Err(Error::TailBound("tail cutoff search did not terminate".into()))
    };
    let upper = cut(1.0)?;
    let lower = cut(-1.0)?;

    // --- integrate the shifted integrand; a handful of panels centred on the
    // peak keeps the adaptive recursion from missing a narrow spike.
    let splits = [
        lower,
        0.5 * (lower + lstar),
        lstar,
        0.5 * (lstar + upper),
        upper,
    ];
    // Panel tolerances are made relative to the integral's scale: `g ≤ 1`
    // everywhere, so `upper − lower` bounds the shifted integral from above
    // within a modest factor of its value (the cutoffs sit where the
    // integrand has dropped by e⁻⁴⁶, at most an O(10) multiple of the peak
    // width for peaks with non-degenerate curvature).
    let scale = (upper - lower).max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for wi in splits.windows(2) {
        if wi[1] > wi[0] {
            total += adaptive_simpson(&g, wi[0], wi[1], tol * scale / 800.0);
        }
    }
    if !(total > 0.0) {
        return Err(Error::TailBound("peaked integral evaluated to zero".into()));
    }
    let log_value = phimax + total.ln();
    Ok(LogIntegral { log_value, value: log_value.exp() })
}

/// log(Γ(x)) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// The error function.
pub fn erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}

/// The complementary error function.
pub fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// Centred normal density with variance `var`.
pub fn gauss_density(y: f64, var: f64) -> f64 {
    (-(y * y) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Centred normal CDF with variance `var`.
pub fn gauss_cdf(y: f64, var: f64) -> f64 {
    0.5 * erfc(-y / (2.0 * var).sqrt())
}
