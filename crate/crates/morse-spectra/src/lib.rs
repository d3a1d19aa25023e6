//! Random spectral-superposition fields on flat tori and the round sphere.
//!
//! The crate builds Gaussian random fields of the form
//!
//! ```text
//! u(p) = Σ_k X_k √w(ε √λ_k) Ψ_k(p),      X_k i.i.d. N(0,1),
//! ```
//!
//! where `λ_k`/`Ψ_k` are Laplace eigenpairs of the underlying manifold and
//! `w` is a rapidly decaying even weight. As ε → 0 the critical points of
//! `u` proliferate at rate ε^{-m}; their number, their values, and the local
//! Hessian statistics are governed by a small set of weight moments and by
//! Gaussian-orthogonal-ensemble determinant averages. The modules below
//! compute every side of those identities independently so each can serve as
//! an oracle for the others:
//!
//! * [`weights`] — weight families, their radial moments (in log space, so
//!   super-exponentially growing moments stay representable), and the derived
//!   dimensional constants `s_m`, `d_m`, `h_m`.
//! * [`rmt`] — symmetric Gaussian matrix ensembles, eigenvalue densities
//!   `ρ_{n,v}` by nested quadrature (n ≤ 4) or Monte Carlo histogram, the
//!   Wigner semicircle, and expected |determinant| identities.
//! * [`gaussian`] — dense Gaussian vectors: push-forward, conditioning by
//!   Schur complement, and sampling through an eigendecomposition root.
//! * [`limit_law`] — the universal limit density of rescaled critical values,
//!   its two equivalent convolution forms, the count constant `C_m(w)`, and
//!   the Gaussian-deconvolution path back to the unperturbed law.
//! * [`fields`] — concrete torus/sphere field samplers with exact trigonometric
//!   or solid-harmonic jets, critical-point search, and Kac–Rice estimators.
//! * [`geometry`] — metric/curvature recovery from kernel derivatives,
//!   distance jets on the sphere, and the Poincaré–Hopf signed count.
//! * [`cli`] — the `morse-spectra` experiment driver (deterministic artifacts).

pub mod cli;
pub mod error;
pub mod fields;
pub mod gaussian;
pub mod geometry;
pub mod grid;
pub mod limit_law;
pub mod quadrature;
pub mod rmt;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
