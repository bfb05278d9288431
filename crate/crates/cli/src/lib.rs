//! Command-line front end: closed-form curves, oracle sweeps, speckle runs,
//! Fock-space checks and crossover thresholds.
//!
//! Curves go out as CSV, scalars and reports as JSON. With `--out PATH` the
//! CSV is written to `PATH` and the JSON next to it with a `.json`
//! extension; without it the CSV goes to stdout and the JSON to stderr.
//! Commands that only produce a report write it to `--out` or stdout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use noonlike::analytic::{
    crossover_threshold, setup1_coeffs, setup1_visibility_exact, setup2_coeffs,
    setup2_visibility_exact, CosineModel,
};
use noonlike::fockstate::{
    default_cutoff, isomorphism_scan, noon_overlap, project_magic, thermal_two_mode,
    IsomorphismReport,
};
use noonlike::geometry::{magic_positions, uniform_grid, DetectorLayout, MovingKind, SourceArray};
use noonlike::pathsum::{correlation_pathsum, correlation_permanent};
use noonlike::speckle::{
    fit_cosine, simulate_curve, SpeckleConfig, DEFAULT_BATCHES, DEFAULT_GRID_POINTS,
};
use noonlike::{CorrelationCurve, Error};

/// Largest order swept by `oracle-check`.
pub const MAX_ORACLE_ORDER: usize = 8;
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "noonlike",
    version,
    about = "Higher-order correlations of thermal sources at magic positions"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate a closed-form correlation curve.
    Analytic(AnalyticArgs),
    /// Compare closed forms, path sums and permanents.
    OracleCheck(OracleArgs),
    /// Monte Carlo pseudothermal speckle with a cosine fit.
    Speckle(SpeckleArgs),
    /// Projected two-mode state and the factorization check.
    Fock(FockArgs),
    /// Smallest m1 at which setup 2 beats setup 1.
    Thresholds(ThresholdArgs),
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub setup: u8,
    /// Total order for setup 1.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub m1: Option<usize>,
    #[arg(long)]
    pub m2: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nbar: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 6)]
    pub max_order: usize,
    #[arg(long)]
    pub seed: u64,
    /// Random scan phases per closed-form configuration.
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Random configurations for the path-sum versus permanent comparison.
    #[arg(long, default_value_t = 100)]
    pub configs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutKind {
    CoLocated,
    Mmp,
}

#[derive(Debug, Args)]
pub struct SpeckleArgs {
    #[arg(long)]
    pub m1: Option<usize>,
    #[arg(long)]
    pub m2: Option<usize>,
    #[arg(long, value_enum, default_value_t = LayoutKind::CoLocated)]
    pub layout: LayoutKind,
    /// Number of equidistant sources.
    #[arg(long, default_value_t = 2)]
    pub sources: usize,
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nbar: f64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub slit_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_BATCHES)]
    pub batches: usize,
    /// Speckle configuration as JSON; `--frames`, `--seed` and `--workers`
    /// override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FockArgs {
    #[arg(long)]
    pub m1: usize,
    #[arg(long)]
    pub m2: usize,
    #[arg(long, default_value_t = 1.0)]
    pub nbar: f64,
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 5)]
    pub max_m2: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run one command. `Ok(false)` means the command ran but a check failed.
pub fn run(config: &RunConfig) -> Result<bool> {
    match &config.command {
        Command::Analytic(a) => run_analytic(a),
        Command::OracleCheck(a) => run_oracle_check(a),
        Command::Speckle(a) => run_speckle(a),
        Command::Fock(a) => run_fock(a),
        Command::Thresholds(a) => run_thresholds(a),
    }
}

fn emit_curve(out: Option<&Path>, csv: &str, json: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            let side = path.with_extension("json");
            fs::write(&side, json).with_context(|| format!("writing {}", side.display()))?;
        }
        None => {
            print!("{csv}");
            eprintln!("{}", json.trim_end());
        }
    }
    Ok(())
}

fn emit_report(out: Option<&Path>, json: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, json).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{json}"),
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        bail!("--grid needs at least 2 points, got {points}");
    }
    Ok(uniform_grid(points))
}

fn check_nbar(nbar: f64) -> Result<()> {
    if !(nbar > 0.0 && nbar.is_finite()) {
        bail!("--nbar must be positive and finite, got {nbar}");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct AnalyticSummary {
    pub setup: u8,
    pub order: usize,
    pub c1: f64,
    pub c2: f64,
    pub visibility: f64,
    pub visibility_exact: String,
    pub frequency: usize,
    pub parity_sign: i32,
    pub nbar: f64,
}

fn summarize<C: CosineModel>(setup: u8, order: usize, model: &C, nbar: f64) -> AnalyticSummary {
    let exact = model.visibility_exact();
    AnalyticSummary {
        setup,
        order,
        c1: model.c1().to_f64().unwrap_or(f64::INFINITY),
        c2: model.c2().to_f64().unwrap_or(f64::INFINITY),
        visibility: model.visibility(),
        visibility_exact: exact.to_string(),
        frequency: model.frequency(),
        parity_sign: model.parity_sign(),
        nbar,
    }
}

fn run_analytic(a: &AnalyticArgs) -> Result<bool> {
    check_nbar(a.nbar)?;
    let grid = grid(a.grid)?;
    let (summary, g): (AnalyticSummary, Box<dyn Fn(f64) -> f64>) = match a.setup {
        1 => {
            let order = a.order.context("setup 1 needs --order")?;
            let model = setup1_coeffs(order)?;
            let scale = a.nbar.powi(order as i32);
            let s = summarize(1, order, &model, a.nbar);
            (s, Box::new(move |d| scale * model.eval(d)))
        }
        _ => {
            let m1 = a.m1.context("setup 2 needs --m1")?;
            let m2 = a.m2.context("setup 2 needs --m2")?;
            let model = setup2_coeffs(m1, m2)?;
            let scale = a.nbar.powi((m1 + m2) as i32);
            let s = summarize(2, m1 + m2, &model, a.nbar);
            (s, Box::new(move |d| scale * model.eval(d)))
        }
    };
    let values: Vec<f64> = grid.iter().map(|&d| g(d)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut csv = String::from("delta1,G,g_norm\n");
    for (d, v) in grid.iter().zip(&values) {
        writeln!(csv, "{d},{v},{}", v / max)?;
    }
    emit_curve(a.out.as_deref(), &csv, &to_json(&summary)?)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
pub struct OracleEntry {
    pub route: String,
    pub label: String,
    pub points: usize,
    pub max_relative_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub max_order: usize,
    pub tolerance: f64,
    pub max_relative_gap: f64,
    pub passed: bool,
    pub entries: Vec<OracleEntry>,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn entry(route: &str, label: String, gaps: &[f64]) -> OracleEntry {
    let max_relative_gap = gaps.iter().copied().fold(0.0, f64::max);
    OracleEntry {
        route: route.into(),
        label,
        points: gaps.len(),
        max_relative_gap,
        passed: max_relative_gap < ORACLE_TOL,
    }
}

fn random_sources(rng: &mut ChaCha8Rng) -> Result<SourceArray> {
    let k = rng.random_range(1..=3usize);
    let mut prefactors = BTreeSet::from([0u32]);
    while prefactors.len() < k {
        prefactors.insert(rng.random_range(1..=4u32));
    }
    let nbar = (0..k)
        .map(|_| [0.5, 1.0, 2.0][rng.random_range(0..3usize)])
        .collect();
    Ok(SourceArray::new(prefactors.into_iter().collect(), nbar)?)
}

/// Sweep closed forms against the path sum and the path sum against the
/// permanent.
pub fn oracle_report(a: &OracleArgs) -> Result<OracleReport> {
    if a.max_order > MAX_ORACLE_ORDER {
        return Err(Error::CapacityExceeded(format!(
            "oracle-check sweeps path sums up to order {MAX_ORACLE_ORDER}, got {}; \
             use correlation_permanent for higher orders",
            a.max_order
        ))
        .into());
    }
    if a.max_order == 0 {
        bail!("--max-order must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let two = SourceArray::equidistant(2, 1.0)?;
    let mut entries = Vec::new();

    let phases: Vec<f64> = (0..a.points)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    if a.max_order >= 2 {
        let gaps = phases
            .iter()
            .map(|&d| {
                Ok(relative_gap(
                    correlation_pathsum(&two, &[d, 0.0])?,
                    2.0 * (3.0 + d.cos()),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push(entry("hbt", "M=2 two-detector 2(3+cos δ1)".into(), &gaps));
    }
    for m in (2..=a.max_order).step_by(2) {
        let model = setup1_coeffs(m)?;
        let layout = DetectorLayout::moving_magic(m / 2)?;
        let gaps = phases
            .iter()
            .map(|&d| {
                Ok(relative_gap(
                    correlation_pathsum(&two, &layout.deltas(d))?,
                    model.eval(d),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        entries.push(entry("setup1", format!("M={m}"), &gaps));
    }
    for m2 in 1..a.max_order {
        for m1 in 1..=(a.max_order - m2) {
            let model = setup2_coeffs(m1, m2)?;
            let layout = DetectorLayout::co_located(m1, m2)?;
            let gaps = phases
                .iter()
                .map(|&d| {
                    Ok(relative_gap(
                        correlation_pathsum(&two, &layout.deltas(d))?,
                        model.eval(d),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push(entry("setup2", format!("m1={m1} m2={m2}"), &gaps));
        }
    }
    let max_m = a.max_order.min(6);
    let mut gaps = Vec::with_capacity(a.configs);
    for _ in 0..a.configs {
        let sources = random_sources(&mut rng)?;
        let m = rng.random_range(1..=max_m);
        let deltas: Vec<f64> = (0..m)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        gaps.push(relative_gap(
            correlation_pathsum(&sources, &deltas)?,
            correlation_permanent(&sources, &deltas)?,
        ));
    }
    if a.configs > 0 {
        entries.push(entry(
            "cross-oracle",
            format!("{} random configurations, M<={max_m}", a.configs),
            &gaps,
        ));
    }

    let max_relative_gap = entries
        .iter()
        .map(|e| e.max_relative_gap)
        .fold(0.0, f64::max);
    Ok(OracleReport {
        seed: a.seed,
        max_order: a.max_order,
        tolerance: ORACLE_TOL,
        max_relative_gap,
        passed: entries.iter().all(|e| e.passed),
        entries,
    })
}

fn run_oracle_check(a: &OracleArgs) -> Result<bool> {
    let report = oracle_report(a)?;
    emit_report(a.out.as_deref(), &to_json(&report)?)?;
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
pub struct SpeckleSummary {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub visibility: f64,
    pub stderr_visibility: f64,
    /// Dominant harmonic of the curve; 0 when nothing stands out.
    pub frequency: usize,
    pub parity_ok: bool,
    pub seed: u64,
    pub frames: u64,
    pub model_frequency: usize,
    pub stderr_amplitude: f64,
    pub modulation_significant: bool,
}

/// Assemble the speckle configuration from a JSON file and/or flags.
pub fn speckle_config(a: &SpeckleArgs) -> Result<SpeckleConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<SpeckleConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            check_nbar(a.nbar)?;
            let m1 = a.m1.context("speckle needs --m1 (or --config)")?;
            let m2 = a.m2.context("speckle needs --m2 (or --config)")?;
            let frames = a.frames.context("speckle needs --frames (or --config)")?;
            let seed = a.seed.context("speckle needs an explicit --seed")?;
            let layout = match a.layout {
                LayoutKind::CoLocated => DetectorLayout::co_located(m1, m2)?,
                LayoutKind::Mmp => {
                    DetectorLayout::new(magic_positions(m2)?, m1, MovingKind::MmpSpread)?
                }
            };
            let mut cfg = SpeckleConfig::new(
                SourceArray::equidistant(a.sources, a.nbar)?,
                layout,
                frames,
                seed,
            );
            cfg.grid = grid(a.grid)?;
            cfg.slit_ratio = a.slit_ratio;
            cfg.batches = a.batches;
            cfg
        }
    };
    if let Some(f) = a.frames {
        cfg.frames = f;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn speckle_csv(curve: &CorrelationCurve) -> Result<String> {
    let mut csv = String::from("delta1,g_norm,stderr\n");
    let zeros = vec![0.0; curve.len()];
    let stderr = curve.stderr.as_deref().unwrap_or(&zeros);
    for ((d, v), s) in curve.grid.iter().zip(&curve.values).zip(stderr) {
        writeln!(csv, "{d},{v},{s}")?;
    }
    Ok(csv)
}

fn run_speckle(a: &SpeckleArgs) -> Result<bool> {
    let cfg = speckle_config(a)?;
    let curve = simulate_curve(&cfg)?.normalized()?;
    let fit = fit_cosine(&curve, cfg.layout.modulation_frequency())?;
    let summary = SpeckleSummary {
        a: fit.offset,
        b: fit.amplitude,
        visibility: fit.visibility,
        stderr_visibility: fit.stderr_visibility,
        frequency: fit.frequency,
        parity_ok: fit.parity_ok,
        seed: cfg.seed,
        frames: cfg.frames,
        model_frequency: fit.model_frequency,
        stderr_amplitude: fit.stderr_amplitude,
        modulation_significant: fit.modulation_significant(3.0),
    };
    emit_curve(a.out.as_deref(), &speckle_csv(&curve)?, &to_json(&summary)?)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
pub struct FockReport {
    pub nbar: f64,
    pub m1: usize,
    pub m2: usize,
    pub cutoff: usize,
    pub eps_trunc: f64,
    pub support_offsets: Vec<(i64, i64)>,
    pub support_ok: bool,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub noon_overlap: f64,
    pub noon_overlap_without_coherences: f64,
    pub isomorphism: Vec<IsomorphismReport>,
    pub max_relative_gap: f64,
    pub passed: bool,
}

pub fn fock_report(a: &FockArgs) -> Result<FockReport> {
    check_nbar(a.nbar)?;
    if a.m1 == 0 || a.m2 == 0 {
        bail!("fock needs --m1 and --m2 of at least 1");
    }
    let cutoff = a
        .cutoff
        .unwrap_or_else(|| default_cutoff(a.nbar, a.m1, a.m2));
    let rho = thermal_two_mode(a.nbar, cutoff)?;
    let projected = project_magic(&rho, a.m2)?;
    let support = projected.support_offsets(1e-12);
    let m2 = a.m2 as i64;
    let support_ok = support == BTreeSet::from([(0, 0), (m2, -m2), (-m2, m2)]);
    let hermiticity_error = projected.hermiticity_error();
    let min_eigenvalue = projected.min_eigenvalue();
    let scan = isomorphism_scan(a.nbar, a.m1, a.m2, &grid(a.grid)?, cutoff)?;
    let max_relative_gap = scan.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
    let passed = support_ok
        && hermiticity_error < 1e-12
        && min_eigenvalue > -1e-10
        && scan.iter().all(|r| r.passed);
    Ok(FockReport {
        nbar: a.nbar,
        m1: a.m1,
        m2: a.m2,
        cutoff,
        eps_trunc: rho.eps_trunc(),
        support_offsets: support.into_iter().collect(),
        support_ok,
        hermiticity_error,
        min_eigenvalue,
        noon_overlap: noon_overlap(&projected, a.m2),
        noon_overlap_without_coherences: noon_overlap(&projected.without_coherences(), a.m2),
        isomorphism: scan,
        max_relative_gap,
        passed,
    })
}

fn run_fock(a: &FockArgs) -> Result<bool> {
    let report = fock_report(a)?;
    emit_report(a.out.as_deref(), &to_json(&report)?)?;
    Ok(report.passed)
}

#[derive(Debug, Serialize)]
pub struct ThresholdRow {
    pub m2: usize,
    pub threshold: usize,
    pub setup1_visibility: String,
    pub setup2_visibility: String,
}

fn run_thresholds(a: &ThresholdArgs) -> Result<bool> {
    if a.max_m2 < 2 {
        bail!("--max-m2 must be at least 2");
    }
    let rows = (2..=a.max_m2)
        .map(|m2| {
            let threshold = crossover_threshold(m2)?;
            Ok(ThresholdRow {
                m2,
                threshold,
                setup1_visibility: setup1_visibility_exact(2 * m2)?.to_string(),
                setup2_visibility: setup2_visibility_exact(threshold, m2)?.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit_report(a.out.as_deref(), &to_json(&rows)?)?;
    Ok(true)
}
