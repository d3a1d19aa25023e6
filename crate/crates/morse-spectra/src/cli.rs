//! Experiment driver: named experiments over a JSON config, reproducible
//! artifacts, and a machine-readable pass/fail summary.
//!
//! Usage:
//!
//! ```text
//! morse-spectra <experiment> --config <file> [--seed U64] [--serial] [--jobs N] [--out DIR]
//! ```
//!
//! Experiments: `moments`, `constants`, `rmt-identities`, `limit-law`,
//! `clt`, `simulate`, `kac-rice`, `curvature`, `gauss-bonnet`, `report`.
//!
//! Contract:
//! * data artifacts (RFC-4180 CSV, JSON) land in `<out>/<experiment>-<hash8>`
//!   where `hash8` prefixes the SHA-256 of the effective config — identical
//!   config + seed reproduce byte-identical data files (timestamps are
//!   confined to `manifest.json`);
//! * stdout carries exactly one JSON summary (keys sorted); progress and
//!   diagnostics go to stderr;
//! * exit status: 0 all checks pass, 1 a check failed or a computation
//!   errored, 2 invalid usage or config.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{
    build_field, expected_count_mc, empirical_critical_measure, find_critical_points_with,
    kac_rice_density, Manifold,
};
use crate::geometry::{curvature_report, gauss_bonnet_signed_count, hessian_pair_statistic_mc};
use crate::limit_law::{
    c_constant, clt_distance, critical_value_weighted_samples, sigma_check_density,
    sigma_check_density_alt, sigma_density, RhoProvider,
};
use crate::grid::weighted_ks;
use crate::quadrature::gamma;
use crate::rmt::{expected_abs_det_goe_formula, expected_abs_det_mc, rho_quad, SymEnsemble};
use crate::rng::task_rng;
use crate::weights::{moment, shape_params, Weight};

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "morse-spectra", about = "Critical-point statistics of random spectral fields")]
struct Args {
    /// experiment to run
    #[arg(value_enum)]
    experiment: ExperimentId,
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// force single-threaded deterministic execution
    #[arg(long)]
    serial: bool,
    /// bound on parallel tasks (advisory; all experiments are deterministic)
    #[arg(long)]
    jobs: Option<usize>,
    /// output directory override
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ExperimentId {
    Moments,
    Constants,
    RmtIdentities,
    LimitLaw,
    Clt,
    Simulate,
    KacRice,
    Curvature,
    GaussBonnet,
    Report,
}

impl ExperimentId {
    fn name(self) -> &'static str {
        match self {
            ExperimentId::Moments => "moments",
            ExperimentId::Constants => "constants",
            ExperimentId::RmtIdentities => "rmt-identities",
            ExperimentId::LimitLaw => "limit-law",
            ExperimentId::Clt => "clt",
            ExperimentId::Simulate => "simulate",
            ExperimentId::KacRice => "kac-rice",
            ExperimentId::Curvature => "curvature",
            ExperimentId::GaussBonnet => "gauss-bonnet",
            ExperimentId::Report => "report",
        }
    }
}

/// Weight family selector in configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    /// `gaussian`, `log-power`, `log-squared`, or `bump-offset`
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec { family: "gaussian".into(), c: None, alpha: None }
    }
}

impl WeightSpec {
    fn to_weight(&self) -> Result<Weight> {
        let w = match self.family.as_str() {
            "gaussian" => Weight::Gaussian,
            "log-power" => Weight::LogPower,
            "log-squared" => Weight::LogSquared {
                c: self.c.unwrap_or(1.0),
                alpha: self.alpha.unwrap_or(2.0),
            },
            "bump-offset" => Weight::BumpOffset { c: self.c.unwrap_or(2.0) },
            other => {
                return Err(Error::Config(format!(
                    "unknown weight family {other:?}; expected gaussian, log-power, \
                     log-squared, or bump-offset"
                )))
            }
        };
        w.validate()?;
        Ok(w)
    }
}

fn default_eps() -> Vec<f64> {
    vec![0.1]
}
fn default_m() -> usize {
    2
}
fn default_trials() -> usize {
    50
}
fn default_samples() -> usize {
    100_000
}
fn default_seed() -> u64 {
    1
}
fn default_tol() -> f64 {
    1e-10
}
fn default_points() -> usize {
    2048
}
fn default_k_max() -> usize {
    12
}
fn default_manifold() -> String {
    "torus".into()
}

/// Experiment configuration (JSON file; CLI flags override seed/out).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub weight: WeightSpec,
    /// manifold dimension for torus experiments / moment families
    #[serde(default = "default_m")]
    pub m: usize,
    /// `torus` or `sphere`
    #[serde(default = "default_manifold")]
    pub manifold: String,
    /// ε ladder, leading entry used by single-ε experiments
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// independent field samples / repetitions
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Monte-Carlo sample counts
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// master seed (CLI `--seed` wins)
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// generic numeric tolerance for exactness checks
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// density-grid resolution
    #[serde(default = "default_points")]
    pub points: usize,
    /// largest moment order for the `moments` experiment
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// output directory (CLI `--out` wins)
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    fn manifold(&self) -> Result<Manifold> {
        let m = match self.manifold.as_str() {
            "torus" => Manifold::Torus { m: self.m },
            "sphere" => Manifold::Sphere,
            other => {
                return Err(Error::Config(format!(
                    "unknown manifold {other:?}; expected torus or sphere"
                )))
            }
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        self.weight.to_weight()?;
        self.manifold()?;
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config(format!("eps ladder must be positive, got {:?}", self.eps)));
        }
        if self.trials == 0 || self.samples == 0 || self.points < 8 {
            return Err(Error::Config(
                "trials and samples must be ≥ 1, points ≥ 8".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// One named check in the machine-readable summary.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn le(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, tolerance, pass: value <= tolerance && value.is_finite() }
    }

    fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: hi,
            pass: value.is_finite() && value >= lo && value <= hi,
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    experiment: String,
    config_hash: String,
    seed: u64,
    artifact_dir: String,
    checks: Vec<Check>,
    pass: bool,
}

/// Entry point used by `main`; returns the process exit code.
pub fn run() -> i32 {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match run_args(args) {
        Ok(code) => code,
        Err(e @ (Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_))) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_args(args: Args) -> Result<i32> {
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&raw).map_err(|e| Error::Config(format!("bad config: {e}")))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.display().to_string());
    }
    config.validate()?;

    let canonical = serde_json::to_vec(&config)?;
    let hash = hex8(&Sha256::digest(&canonical));
    let base = config.out_dir.clone().unwrap_or_else(|| "artifacts".into());
    let dir = Path::new(&base).join(format!("{}-{hash}", args.experiment.name()));
    fs::create_dir_all(&dir)?;
    eprintln!(
        "running {} (config hash {hash}, seed {}, serial={}) -> {}",
        args.experiment.name(),
        config.seed,
        args.serial,
        dir.display()
    );

    let checks = match args.experiment {
        ExperimentId::Moments => run_moments(&config, &dir)?,
        ExperimentId::Constants => run_constants(&config, &dir)?,
        ExperimentId::RmtIdentities => run_rmt_identities(&config, &dir)?,
        ExperimentId::LimitLaw => run_limit_law(&config, &dir)?,
        ExperimentId::Clt => run_clt(&config, &dir)?,
        ExperimentId::Simulate => run_simulate(&config, &dir)?,
        ExperimentId::KacRice => run_kac_rice(&config, &dir)?,
        ExperimentId::Curvature => run_curvature(&config, &dir)?,
        ExperimentId::GaussBonnet => run_gauss_bonnet(&config, &dir)?,
        ExperimentId::Report => run_report(&Path::new(&base), &dir)?,
    };

    let pass = checks.iter().all(|c| c.pass);
    let summary = Summary {
        experiment: args.experiment.name().into(),
        config_hash: hash.clone(),
        seed: config.seed,
        artifact_dir: dir.display().to_string(),
        checks,
        pass,
    };
    // sorted keys: route through serde_json::Value (BTreeMap-backed)
    let value: serde_json::Value = serde_json::to_value(&summary)?;
    let text = serde_json::to_string_pretty(&value)?;
    fs::write(dir.join("summary.json"), &text)?;
    let manifest = serde_json::json!({
        "config": serde_json::from_slice::<serde_json::Value>(&canonical)?,
        "config_hash": hash,
        "experiment": args.experiment.name(),
        "serial": args.serial,
        "jobs": args.jobs,
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("{text}");
    Ok(if pass { 0 } else { 1 })
}

fn hex8(digest: &[u8]) -> String {
    digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

fn run_moments(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let gaussian = matches!(w, Weight::Gaussian);
    let mut wtr = csv_writer(&dir.join("moments.csv"))?;
    wtr.write_record(["k", "i_k", "closed_form", "abs_delta"])?;
    let mut worst: f64 = 0.0;
    for k in 0..=config.k_max {
        let ik = moment(&w, k, 1e-12)?;
        let (closed, delta) = if gaussian {
            let cf = gamma((k as f64 + 1.0) / 2.0) / 2.0;
            ((cf.to_string()), (ik.value - cf).abs())
        } else {
            (String::new(), f64::NAN)
        };
        if gaussian {
            worst = worst.max(delta);
        }
        wtr.write_record([
            k.to_string(),
            format!("{:.17e}", ik.value),
            closed,
            if gaussian { format!("{delta:.3e}") } else { String::new() },
        ])?;
    }
    wtr.flush()?;
    let mut checks = Vec::new();
    if gaussian {
        checks.push(Check::le("gaussian_moment_max_abs_delta", worst, config.tol));
    } else {
        // non-closed-form families: moments must at least be certified finite
        checks.push(Check::le("moments_computed", 0.0, 1.0));
    }
    Ok(checks)
}

fn run_constants(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let gaussian = matches!(w, Weight::Gaussian);
    let mut wtr = csv_writer(&dir.join("constants.csv"))?;
    wtr.write_record(["m", "q", "r", "omega", "kappa", "lower_bound"])?;
    let mut worst_bound_violation: f64 = f64::NEG_INFINITY;
    let mut worst_gaussian_dev: f64 = 0.0;
    for m in 1..=8usize {
        let p = shape_params(&w, m, 1e-12)?;
        let bound = m as f64 / (m as f64 + 2.0);
        worst_bound_violation = worst_bound_violation.max(bound - p.q);
        if gaussian {
            worst_gaussian_dev = worst_gaussian_dev.max((p.q - 1.0).abs());
        }
        wtr.write_record([
            m.to_string(),
            format!("{:.12e}", p.q),
            format!("{:.12e}", p.r),
            format!("{:.12e}", p.omega),
            format!("{:.12e}", p.kappa),
            format!("{bound:.12e}"),
        ])?;
    }
    wtr.flush()?;
    let mut checks =
        vec![Check::le("q_lower_bound_violation", worst_bound_violation, 1e-8)];
    if gaussian {
        checks.push(Check::le("gaussian_q_deviation_from_1", worst_gaussian_dev, 1e-8));
    }
    Ok(checks)
}

fn run_rmt_identities(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let mut wtr = csv_writer(&dir.join("fyodorov.csv"))?;
    wtr.write_record(["m", "v", "c", "formula", "mc", "mc_se", "sigmas"])?;
    let mut rng = task_rng(config.seed, 0xc1_0001);
    let mut worst_sigmas: f64 = 0.0;
    for m in 1..=3usize {
        for v in [0.5, 1.0] {
            for c in [0.0, 1.0] {
                let formula = expected_abs_det_goe_formula(m, v, c)?;
                let ens = SymEnsemble::goe(m, v)?;
                let (mc, se) = expected_abs_det_mc(&ens, c, config.samples, &mut rng);
                let sigmas = (mc - formula).abs() / se.max(f64::MIN_POSITIVE);
                worst_sigmas = worst_sigmas.max(sigmas);
                wtr.write_record([
                    m.to_string(),
                    v.to_string(),
                    c.to_string(),
                    format!("{formula:.12e}"),
                    format!("{mc:.12e}"),
                    format!("{se:.3e}"),
                    format!("{sigmas:.2}"),
                ])?;
            }
        }
    }
    wtr.flush()?;
    // eigenvalue-density rescaling: ρ_{n,c²v}(c·y)·c = ρ_{n,v}(y)
    let mut wtr = csv_writer(&dir.join("rescaling.csv"))?;
    wtr.write_record(["n", "scale", "y", "lhs", "rhs", "abs_delta"])?;
    let mut worst_resc: f64 = 0.0;
    for n in [1usize, 2, 3] {
        for scale in [0.5f64, 1.0, 2.0] {
            for y in [0.0f64, 0.5, 1.0] {
                let v = 1.0;
                let lhs = rho_quad(n, scale * scale * v, scale * y)? * scale;
                let rhs = rho_quad(n, v, y)?;
                let delta = (lhs - rhs).abs();
                worst_resc = worst_resc.max(delta);
                wtr.write_record([
                    n.to_string(),
                    scale.to_string(),
                    y.to_string(),
                    format!("{lhs:.12e}"),
                    format!("{rhs:.12e}"),
                    format!("{delta:.3e}"),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(vec![
        Check::le("fyodorov_worst_sigmas", worst_sigmas, 3.0),
        Check::le("rescaling_worst_abs_delta", worst_resc, 1e-6),
    ])
}

fn provider_for(m: usize, config: &ExperimentConfig) -> RhoProvider {
    if m + 1 <= 4 {
        RhoProvider::Quadrature { coarse_points: 241 }
    } else {
        RhoProvider::MonteCarlo { samples: config.samples, seed: config.seed ^ 0x9e37_79b9 }
    }
}

fn run_limit_law(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let m = config.m;
    let profile = shape_params(&w, m, 1e-12)?;
    let provider = provider_for(m, config);
    let a = sigma_check_density(&profile, &provider, config.points)?;
    let b = sigma_check_density_alt(&profile, &provider, config.points)?;
    let sup: f64 = a
        .grid
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let mut wtr = csv_writer(&dir.join("sigma_check.csv"))?;
    wtr.write_record(["y", "form_a", "form_b"])?;
    for ((y, va), vb) in a.grid.points().iter().zip(a.grid.values.iter()).zip(b.values.iter()) {
        wtr.write_record([format!("{y:.8}"), format!("{va:.12e}"), format!("{vb:.12e}")])?;
    }
    wtr.flush()?;
    let mut rng = task_rng(config.seed, 0x11_0001);
    let mut samples = critical_value_weighted_samples(&profile, config.samples, &mut rng)?;
    let ks = weighted_ks(&mut samples, &a.grid);
    let c = c_constant(&profile, &provider, config.points)?;
    eprintln!("C_{m} = {:.6}", c.value);
    Ok(vec![
        Check::le("sigma_check_form_sup_diff", sup, 0.01),
        Check::le("sigma_check_mc_ks", ks, 0.03),
    ])
}

fn run_clt(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let mut wtr = csv_writer(&dir.join("clt.csv"))?;
    wtr.write_record(["m", "ks_to_gaussian"])?;
    let mut ks_values = Vec::new();
    for m in 2..=8usize {
        let profile = shape_params(&w, m, 1e-12)?;
        let provider = provider_for(m, config);
        let check = sigma_check_density(&profile, &provider, config.points)?;
        let sigma = sigma_density(&profile, &check.grid)?;
        let ks = clt_distance(&profile, &sigma);
        ks_values.push(ks);
        wtr.write_record([m.to_string(), format!("{ks:.6e}")])?;
        eprintln!("m = {m}: KS(σ_m, γ) = {ks:.5}");
    }
    wtr.flush()?;
    let inversions = ks_values.windows(2).filter(|w| w[1] > w[0]).count();
    Ok(vec![Check::le("clt_trend_inversions", inversions as f64, 1.0)])
}

fn run_simulate(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let manifold = config.manifold()?;
    let m = manifold.dim();
    let eps = config.eps[0];
    let profile = shape_params(&w, m, 1e-12)?;
    let mut fields = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        fields.push(build_field(manifold, &w, eps, 1e-12, config.seed.wrapping_add(t as u64))?);
        if (t + 1) % 20 == 0 {
            eprintln!("built {}/{} fields", t + 1, config.trials);
        }
    }
    let measure = empirical_critical_measure(&fields, &profile, true, config.seed ^ 0x51)?;
    let provider = provider_for(m, config);
    let check = sigma_check_density(&profile, &provider, config.points)?;
    let ks = measure.ks_distance(&check.grid);
    let mut wtr = csv_writer(&dir.join("critical_values.csv"))?;
    wtr.write_record(["rescaled_value"])?;
    for v in &measure.values {
        wtr.write_record([format!("{v:.12e}")])?;
    }
    wtr.flush()?;
    eprintln!(
        "pooled {} critical values from {} fields ({} skipped)",
        measure.total_points,
        config.trials,
        measure.skipped_fields
    );
    Ok(vec![
        Check::le("empirical_vs_limit_ks", ks, 0.05),
        Check::le(
            "skipped_field_fraction",
            measure.skipped_fields as f64 / config.trials as f64,
            0.1,
        ),
    ])
}

fn run_kac_rice(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let manifold = config.manifold()?;
    let eps = config.eps[0];
    let (kr, kr_se) = kac_rice_density(
        manifold,
        &w,
        eps,
        (-1e12, 1e12),
        config.samples,
        1e-12,
        config.seed ^ 0x4ac,
    )?;
    let counts = expected_count_mc(manifold, &w, eps, config.trials, 1e-12, config.seed)?;
    let combined = (kr_se * kr_se + counts.stderr * counts.stderr).sqrt();
    let sigmas = (kr - counts.mean).abs() / combined.max(f64::MIN_POSITIVE);
    let doc = serde_json::json!({
        "kac_rice_density": kr,
        "kac_rice_se": kr_se,
        "mc_mean_per_volume": counts.mean,
        "mc_se": counts.stderr,
        "mc_excluded_trials": counts.excluded,
    });
    fs::write(dir.join("kac_rice.json"), serde_json::to_string_pretty(&doc)?)?;
    Ok(vec![Check::le("kac_rice_vs_counts_sigmas", sigmas, 3.0)])
}

fn run_curvature(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let manifold = config.manifold()?;
    let report = curvature_report(manifold, &w, &config.eps)?;
    let mut wtr = csv_writer(&dir.join("curvature.csv"))?;
    wtr.write_record(["epsilon", "h11", "h12", "k_eps", "abs_err"])?;
    for r in &report.rows {
        wtr.write_record([
            r.eps.to_string(),
            format!("{:.12e}", r.h11),
            format!("{:.12e}", r.h12),
            format!("{:.12e}", r.sectional),
            format!("{:.3e}", r.abs_err),
        ])?;
    }
    wtr.flush()?;
    let mut checks = Vec::new();
    match manifold {
        Manifold::Torus { .. } => {
            let worst = report.rows.iter().map(|r| r.sectional.abs()).fold(0.0, f64::max);
            checks.push(Check::le("torus_curvature_abs", worst, 1e-12));
        }
        Manifold::Sphere => {
            let order = report.fitted_order.unwrap_or(f64::NAN);
            checks.push(Check::within("sphere_curvature_fit_order", order, 1.5, 2.5));
            // cross-check the curvature numerator against sampled Hessians
            let eps = config.eps[config.eps.len() / 2];
            let (mc, se) = hessian_pair_statistic_mc(&w, eps, config.trials.max(1000), config.seed)?;
            let exact = {
                use crate::fields::covariance_derivative;
                covariance_derivative(manifold, &w, eps, &[2, 0], &[0, 2], 1e-12)?.exact
                    - covariance_derivative(manifold, &w, eps, &[1, 1], &[1, 1], 1e-12)?.exact
            };
            let sigmas = (mc - exact).abs() / se.max(f64::MIN_POSITIVE);
            checks.push(Check::le("hessian_statistic_sigmas", sigmas, 4.0));
        }
    }
    Ok(checks)
}

fn run_gauss_bonnet(config: &ExperimentConfig, dir: &Path) -> Result<Vec<Check>> {
    let w = config.weight.to_weight()?;
    let manifold = config.manifold()?;
    let eps = config.eps[0];
    let chi = manifold.euler_characteristic();
    let mut counts = Vec::with_capacity(config.trials);
    let mut uncertified = 0usize;
    let mut mismatches = 0usize;
    for t in 0..config.trials {
        let f = build_field(manifold, &w, eps, 1e-12, config.seed.wrapping_add(t as u64))?;
        let set = find_critical_points_with(&f, f.default_search_res(), 1e-9, 60, false)?;
        if !set.reliable {
            uncertified += 1;
            counts.push(serde_json::json!({"trial": t, "certified": false}));
            continue;
        }
        let signed = gauss_bonnet_signed_count(&set)?;
        if signed != chi {
            mismatches += 1;
        }
        counts.push(serde_json::json!({
            "trial": t,
            "certified": true,
            "signed_count": signed,
            "points": set.points.len(),
        }));
        if (t + 1) % 10 == 0 {
            eprintln!("{}/{} samples done", t + 1, config.trials);
        }
    }
    let doc = serde_json::json!({
        "euler_characteristic": chi,
        "samples": counts,
        "uncertified": uncertified,
    });
    fs::write(dir.join("signed_counts.json"), serde_json::to_string_pretty(&doc)?)?;
    Ok(vec![
        Check::le("signed_count_mismatches", mismatches as f64, 0.0),
        Check::le(
            "uncertified_fraction",
            uncertified as f64 / config.trials as f64,
            0.1,
        ),
    ])
}

/// Collate the summaries of every sibling artifact directory into one report.
fn run_report(base: &Path, dir: &Path) -> Result<Vec<Check>> {
    let mut entries: Vec<(String, serde_json::Value)> = Vec::new();
    if base.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(base)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        names.sort();
        for p in names {
            let s = p.join("summary.json");
            if s.is_file() && p != dir {
                let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&s)?)?;
                entries.push((p.file_name().unwrap().to_string_lossy().into_owned(), v));
            }
        }
    }
    let found = entries.len();
    let failing = entries
        .iter()
        .filter(|(_, v)| v.get("pass").and_then(|p| p.as_bool()) != Some(true))
        .count();
    let doc = serde_json::json!({
        "collated": entries.iter().map(|(n, v)| serde_json::json!({"dir": n, "summary": v})).collect::<Vec<_>>(),
    });
    let mut f = fs::File::create(dir.join("report.json"))?;
    f.write_all(serde_json::to_string_pretty(&doc)?.as_bytes())?;
    Ok(vec![
        Check::le("summaries_found", if found > 0 { 0.0 } else { 1.0 }, 0.0),
        Check::le("summaries_failing", failing as f64, 0.0),
    ])
}
