//! Monte Carlo pseudothermal speckle.
//!
//! Every frame draws one independent circular complex Gaussian amplitude per
//! source, propagates it to the far field and multiplies the detector
//! intensities. Frames are i.i.d.; frame `f` always uses ChaCha stream `f` of
//! the master seed, so the estimate does not depend on how frames are split
//! between workers. Frames are grouped into contiguous batches whose sums are
//! merged in batch order.

mod fit;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{fit_cosine, fit_cosine_with, FitOptions, FitResult, FourierComponent};

use crate::curve::CorrelationCurve;
use crate::error::{invalid, Error, Result};
use crate::geometry::{uniform_grid, DetectorLayout, MovingKind, SourceArray};

pub const DEFAULT_GRID_POINTS: usize = 181;
pub const DEFAULT_BATCHES: usize = 20;

fn default_grid() -> Vec<f64> {
    uniform_grid(DEFAULT_GRID_POINTS)
}

fn default_workers() -> usize {
    1
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeckleConfig {
    pub sources: SourceArray,
    pub layout: DetectorLayout,
    pub frames: u64,
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Slit width over slit separation; 0 models point sources.
    #[serde(default)]
    pub slit_ratio: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

impl SpeckleConfig {
    pub fn new(sources: SourceArray, layout: DetectorLayout, frames: u64, seed: u64) -> Self {
        SpeckleConfig {
            sources,
            layout,
            frames,
            seed,
            grid: default_grid(),
            slit_ratio: 0.0,
            workers: 1,
            batches: DEFAULT_BATCHES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sources.validate()?;
        self.layout.validate()?;
        if self.frames == 0 {
            return invalid("frame count must be positive");
        }
        if self.workers == 0 {
            return invalid("worker count must be positive");
        }
        if self.batches == 0 {
            return invalid("batch count must be positive");
        }
        if !(0.0..1.0).contains(&self.slit_ratio) {
            return invalid(format!("slit ratio {} outside [0, 1)", self.slit_ratio));
        }
        if self.grid.iter().any(|d| !d.is_finite()) {
            return invalid("grid phases must be finite");
        }
        let period = TAU / self.layout.modulation_frequency() as f64;
        let lo = self.grid.iter().copied().fold(f64::INFINITY, f64::min);
        let within = self.grid.iter().filter(|&&d| d - lo < period).count();
        if self.grid.len() < 2 || within < 2 {
            return invalid("grid needs at least two points within one modulation period");
        }
        Ok(())
    }

    fn batch_count(&self) -> usize {
        (self.batches as u64).min(self.frames) as usize
    }
}

/// Amplitude envelope of a slit of relative width `ratio`: `sinc(δ·ratio/2)`.
fn envelope(delta: f64, ratio: f64) -> f64 {
    let x = 0.5 * delta * ratio;
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Per-detector source weights `env(δ)·e^{−iα_l δ}`.
fn weights(sources: &SourceArray, delta: f64, slit_ratio: f64) -> Vec<Complex64> {
    let env = envelope(delta, slit_ratio);
    sources
        .prefactors()
        .iter()
        .map(|&a| Complex64::from_polar(env, -(a as f64) * delta))
        .collect()
}

fn intensity(w: &[Complex64], amps: &[Complex64]) -> f64 {
    w.iter()
        .zip(amps)
        .map(|(w, a)| w * a)
        .sum::<Complex64>()
        .norm_sqr()
}

struct Kernel {
    k: usize,
    m1: usize,
    co_located: bool,
    /// Row per fixed detector.
    fixed: Vec<Vec<Complex64>>,
    /// Per grid point, one row per distinct moving detector.
    moving: Vec<Vec<Vec<Complex64>>>,
    scales: Vec<f64>,
}

impl Kernel {
    fn new(cfg: &SpeckleConfig) -> Self {
        let src = &cfg.sources;
        let layout = &cfg.layout;
        let co_located = layout.moving_kind() == MovingKind::CoLocated;
        let offsets = if co_located {
            vec![0.0]
        } else {
            layout.moving_offsets()
        };
        let moving = cfg
            .grid
            .iter()
            .map(|&d| {
                offsets
                    .iter()
                    .map(|o| weights(src, d + o, cfg.slit_ratio))
                    .collect()
            })
            .collect();
        let fixed = layout
            .fixed_phases()
            .iter()
            .map(|&p| weights(src, p, cfg.slit_ratio))
            .collect();
        Kernel {
            k: src.len(),
            m1: layout.m1(),
            co_located,
            fixed,
            moving,
            scales: src.nbar().iter().map(|n| (0.5 * n).sqrt()).collect(),
        }
    }

    /// Add one frame's intensity products to `acc`.
    fn accumulate(&self, rng: &mut ChaCha8Rng, amps: &mut [Complex64], acc: &mut [f64]) {
        for (a, s) in amps.iter_mut().zip(&self.scales) {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *a = Complex64::new(s * re, s * im);
        }
        let fixed: f64 = self.fixed.iter().map(|w| intensity(w, amps)).product();
        for (slot, rows) in acc.iter_mut().zip(&self.moving) {
            let moving = if self.co_located {
                intensity(&rows[0], amps).powi(self.m1 as i32)
            } else {
                rows.iter().map(|w| intensity(w, amps)).product()
            };
            *slot += fixed * moving;
        }
    }
}

/// Frame-averaged `G^(M)(δ₁)` over the configured grid, in units of the mean
/// photon numbers, with batch-means standard errors.
pub fn simulate_curve(cfg: &SpeckleConfig) -> Result<CorrelationCurve> {
    cfg.validate()?;
    let kernel = Kernel::new(cfg);
    let nb = cfg.batch_count();
    let frames = cfg.frames;
    let bounds: Vec<(u64, u64)> = (0..nb as u64)
        .map(|b| (b * frames / nb as u64, (b + 1) * frames / nb as u64))
        .collect();
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let npts = cfg.grid.len();

    let run_batch = |&(start, end): &(u64, u64)| -> Vec<f64> {
        let mut acc = vec![0.0; npts];
        let mut amps = vec![Complex64::new(0.0, 0.0); kernel.k];
        for frame in start..end {
            let mut rng = base.clone();
            rng.set_stream(frame);
            kernel.accumulate(&mut rng, &mut amps, &mut acc);
        }
        acc
    };

    let sums: Vec<Vec<f64>> = if cfg.workers == 1 {
        bounds.iter().map(run_batch).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| {
                Error::InvalidArgument(format!("cannot start {} workers: {e}", cfg.workers))
            })?;
        pool.install(|| bounds.par_iter().map(run_batch).collect())
    };

    let mut total = vec![0.0; npts];
    for s in &sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(Error::AccumulatorOverflow(format!(
            "order-{} intensity products overflowed f64",
            cfg.layout.order()
        )));
    }
    let values: Vec<f64> = total.iter().map(|t| t / frames as f64).collect();
    let batch_means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&bounds)
        .map(|(s, &(start, end))| s.iter().map(|v| v / (end - start) as f64).collect())
        .collect();
    let stderr: Vec<f64> = (0..npts)
        .map(|i| {
            if nb < 2 {
                return 0.0;
            }
            let mean = batch_means.iter().map(|b| b[i]).sum::<f64>() / nb as f64;
            let var = batch_means
                .iter()
                .map(|b| (b[i] - mean).powi(2))
                .sum::<f64>()
                / (nb - 1) as f64;
            (var / nb as f64).sqrt()
        })
        .collect();

    let mut curve = CorrelationCurve::new(
        cfg.grid.clone(),
        values,
        cfg.layout.order(),
        Some(cfg.layout.clone()),
    )?;
    curve.stderr = Some(stderr);
    curve.batch_means = Some(batch_means);
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub frames_small: u64,
    pub frames_large: u64,
    pub stderr_small: f64,
    pub stderr_large: f64,
    /// `stderr_small / stderr_large`.
    pub ratio: f64,
    /// `√(frames_large / frames_small)`.
    pub expected_ratio: f64,
    /// `ratio` within a factor 2 of `expected_ratio`.
    pub consistent: bool,
}

/// Compare the visibility standard error at two frame counts against the
/// `1/√F` law.
pub fn convergence_probe(
    cfg: &SpeckleConfig,
    frames_small: u64,
    frames_large: u64,
) -> Result<ConvergenceReport> {
    if frames_small == 0 || frames_large < 4 * frames_small {
        return invalid(format!(
            "need 0 < frames_small and frames_large >= 4*frames_small (got {frames_small}, {frames_large})"
        ));
    }
    let freq = cfg.layout.modulation_frequency();
    let stderr_at = |frames: u64| -> Result<f64> {
        let run = SpeckleConfig {
            frames,
            ..cfg.clone()
        };
        Ok(fit_cosine(&simulate_curve(&run)?, freq)?.stderr_visibility)
    };
    let stderr_small = stderr_at(frames_small)?;
    let stderr_large = stderr_at(frames_large)?;
    let ratio = stderr_small / stderr_large;
    let expected_ratio = (frames_large as f64 / frames_small as f64).sqrt();
    let consistent =
        ratio.is_finite() && ratio > expected_ratio / 2.0 && ratio < expected_ratio * 2.0;
    Ok(ConvergenceReport {
        frames_small,
        frames_large,
        stderr_small,
        stderr_large,
        ratio,
        expected_ratio,
        consistent,
    })
}
