//! Least-squares extraction of the modulation `A + B·cos(f·δ₁)` from a
//! sampled correlation curve, plus a small Fourier analysis used to identify
//! the dominant modulation frequency.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::CorrelationCurve;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Highest harmonic included in the Fourier analysis.
    pub max_harmonic: usize,
    /// With batch errors available, a harmonic only counts as dominant if it
    /// is significant at this many standard errors.
    pub dominant_sigmas: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bootstrap_resamples: 200,
            bootstrap_seed: 0x5eed_b007,
            max_harmonic: 12,
            dominant_sigmas: 5.0,
        }
    }
}

/// One harmonic `a·cos(kδ) + b·sin(kδ)` of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierComponent {
    pub frequency: usize,
    pub cos: f64,
    pub sin: f64,
    pub stderr_cos: f64,
    pub stderr_sin: f64,
}

impl FourierComponent {
    pub fn amplitude(&self) -> f64 {
        self.cos.hypot(self.sin)
    }

    /// Whether either quadrature exceeds `sigmas` standard errors.
    pub fn significant(&self, sigmas: f64) -> bool {
        self.cos.abs() > sigmas * self.stderr_cos || self.sin.abs() > sigmas * self.stderr_sin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Offset `A`.
    pub offset: f64,
    /// Signed amplitude `B`.
    pub amplitude: f64,
    /// Frequency the model was fitted at.
    pub model_frequency: usize,
    /// Dominant nonzero Fourier frequency of the curve; 0 for a flat curve.
    pub frequency: usize,
    /// `|B| / A`.
    pub visibility: f64,
    pub stderr_visibility: f64,
    pub stderr_amplitude: f64,
    pub stderr_offset: f64,
    /// `sign(B)` matches the sign expected for the detector layout.
    pub parity_ok: bool,
    pub spectrum: Vec<FourierComponent>,
}

impl FitResult {
    /// `B` differs from zero by more than `sigmas` standard errors.
    pub fn modulation_significant(&self, sigmas: f64) -> bool {
        self.amplitude.abs() > sigmas * self.stderr_amplitude
    }
}

pub fn fit_cosine(curve: &CorrelationCurve, frequency: usize) -> Result<FitResult> {
    fit_cosine_with(curve, frequency, &FitOptions::default())
}

/// Rows `(w_A, w_B)` such that `A = w_A·y`, `B = w_B·y` for the least-squares
/// fit of `A + B·cos(f·δ)` to samples `y` on `grid`.
fn cosine_projector(grid: &[f64], frequency: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len() as f64;
    let c: Vec<f64> = grid.iter().map(|&d| (frequency as f64 * d).cos()).collect();
    let sc: f64 = c.iter().sum();
    let scc: f64 = c.iter().map(|x| x * x).sum();
    let det = n * scc - sc * sc;
    if det.abs() <= 1e-12 * n * n {
        return invalid("grid does not resolve the cosine model");
    }
    let wa = c.iter().map(|ci| (scc - sc * ci) / det).collect();
    let wb = c.iter().map(|ci| (n * ci - sc) / det).collect();
    Ok((wa, wb))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn distinct_points(grid: &[f64]) -> usize {
    let mut reduced: Vec<f64> = grid
        .iter()
        .map(|&d| crate::geometry::reduce_phase(d))
        .collect();
    reduced.sort_by(f64::total_cmp);
    reduced.dedup_by(|a, b| crate::geometry::phase_distance(*a, *b) < 1e-9);
    reduced.len()
}

/// Least-squares Fourier coefficients for harmonics `1..=kmax`.
/// Returns the pseudo-inverse rows for `(cos_k, sin_k)` pairs.
fn fourier_projector(grid: &[f64], kmax: usize) -> Result<DMatrix<f64>> {
    let cols = 2 * kmax + 1;
    let x = DMatrix::from_fn(grid.len(), cols, |i, c| {
        if c == 0 {
            1.0
        } else {
            let k = c.div_ceil(2) as f64;
            if c % 2 == 1 {
                (k * grid[i]).cos()
            } else {
                (k * grid[i]).sin()
            }
        }
    });
    x.pseudo_inverse(1e-10)
        .map_err(|e| Error::NumericalFailure(format!("Fourier design matrix: {e}")))
}

pub fn fit_cosine_with(
    curve: &CorrelationCurve,
    frequency: usize,
    opts: &FitOptions,
) -> Result<FitResult> {
    curve.validate()?;
    if frequency == 0 {
        return invalid("fit frequency must be positive");
    }
    let (lo, hi) = curve
        .grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    let period = TAU / frequency as f64;
    if hi - lo < period * (1.0 - 1e-9) {
        return invalid(format!(
            "grid spans {:.6} rad, less than one period {:.6} of frequency {frequency}",
            hi - lo,
            period
        ));
    }

    let (wa, wb) = cosine_projector(&curve.grid, frequency)?;
    let offset = dot(&wa, &curve.values);
    let amplitude = dot(&wb, &curve.values);
    if !(offset > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "fitted offset {offset} is not positive"
        )));
    }
    let visibility = amplitude.abs() / offset;

    let batches = curve.batch_means.as_deref().unwrap_or(&[]);
    let (stderr_offset, stderr_amplitude, stderr_visibility) = if batches.len() >= 2 {
        let per_a: Vec<f64> = batches.iter().map(|b| dot(&wa, b)).collect();
        let per_b: Vec<f64> = batches.iter().map(|b| dot(&wb, b)).collect();
        let nb = batches.len();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.bootstrap_seed);
        let mut boot_a = Vec::with_capacity(opts.bootstrap_resamples);
        let mut boot_b = Vec::with_capacity(opts.bootstrap_resamples);
        let mut boot_v = Vec::with_capacity(opts.bootstrap_resamples);
        for _ in 0..opts.bootstrap_resamples {
            let (mut sa, mut sb) = (0.0, 0.0);
            for _ in 0..nb {
                let j = rng.random_range(0..nb);
                sa += per_a[j];
                sb += per_b[j];
            }
            let (a, b) = (sa / nb as f64, sb / nb as f64);
            boot_a.push(a);
            boot_b.push(b);
            boot_v.push(b.abs() / a);
        }
        (std_dev(&boot_a), std_dev(&boot_b), std_dev(&boot_v))
    } else {
        (0.0, 0.0, 0.0)
    };

    let kmax = opts
        .max_harmonic
        .min((distinct_points(&curve.grid).saturating_sub(1)) / 2);
    let mut spectrum = Vec::with_capacity(kmax);
    if kmax >= 1 {
        let proj = fourier_projector(&curve.grid, kmax)?;
        let coeffs = |y: &[f64]| -> Vec<f64> {
            (0..proj.nrows())
                .map(|r| (0..y.len()).map(|i| proj[(r, i)] * y[i]).sum())
                .collect()
        };
        let main = coeffs(&curve.values);
        let per_batch: Vec<Vec<f64>> = batches.iter().map(|b| coeffs(b)).collect();
        let nb = per_batch.len() as f64;
        for k in 1..=kmax {
            let (ci, si) = (2 * k - 1, 2 * k);
            let se = |idx: usize| -> f64 {
                if per_batch.len() < 2 {
                    0.0
                } else {
                    let xs: Vec<f64> = per_batch.iter().map(|c| c[idx]).collect();
                    std_dev(&xs) / nb.sqrt()
                }
            };
            spectrum.push(FourierComponent {
                frequency: k,
                cos: main[ci],
                sin: main[si],
                stderr_cos: se(ci),
                stderr_sin: se(si),
            });
        }
    }

    let mean_level = curve.values.iter().sum::<f64>() / curve.values.len() as f64;
    let noisy = batches.len() >= 2;
    let dominant = spectrum
        .iter()
        .filter(|c| !noisy || c.significant(opts.dominant_sigmas))
        .fold(None::<&FourierComponent>, |best, c| match best {
            Some(b) if b.amplitude() >= c.amplitude() => Some(b),
            _ => Some(c),
        })
        .filter(|c| c.amplitude() > 1e-12 * mean_level.abs().max(f64::MIN_POSITIVE))
        .map_or(0, |c| c.frequency);

    let expected_sign = match &curve.layout {
        Some(layout) => layout.parity_sign(),
        None if frequency % 2 == 1 => 1,
        None => -1,
    };
    let parity_ok = amplitude != 0.0 && (amplitude > 0.0) == (expected_sign > 0);

    Ok(FitResult {
        offset,
        amplitude,
        model_frequency: frequency,
        frequency: dominant,
        visibility,
        stderr_visibility,
        stderr_amplitude,
        stderr_offset,
        parity_ok,
        spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{setup1_g, setup2_g};
    use crate::geometry::{uniform_grid, DetectorLayout};

    #[test]
    fn exact_setup2_curve() {
        let grid = uniform_grid(721);
        let layout = DetectorLayout::co_located(3, 2).unwrap();
        let curve =
            CorrelationCurve::tabulate(&grid, 5, Some(layout), |d| setup2_g(3, 2, d)).unwrap();
        let fit = fit_cosine(&curve, 2).unwrap();
        assert!(
            (fit.visibility - 3.0 / 19.0).abs() < 1e-9,
            "{}",
            fit.visibility
        );
        assert_eq!(fit.frequency, 2);
        assert!(fit.parity_ok);
        assert!(fit.amplitude < 0.0);
    }

    #[test]
    fn constant_curve() {
        let grid = uniform_grid(181);
        let curve = CorrelationCurve::new(grid.clone(), vec![3.5; grid.len()], 3, None).unwrap();
        let fit = fit_cosine(&curve, 2).unwrap();
        assert!(fit.amplitude.abs() < 1e-12);
        assert!(fit.visibility < 1e-12);
        assert_eq!(fit.frequency, 0);
    }

    #[test]
    fn exact_setup1_curve() {
        let grid = uniform_grid(181);
        let layout = DetectorLayout::moving_magic(3).unwrap();
        let curve = CorrelationCurve::tabulate(&grid, 6, Some(layout), |d| setup1_g(6, d)).unwrap();
        let fit = fit_cosine(&curve, 3).unwrap();
        assert_eq!(fit.frequency, 3);
        assert!((fit.visibility - 1.0 / 21.0).abs() < 1e-9);
        assert!(fit.parity_ok);
    }

    #[test]
    fn works_on_partial_grid() {
        // one full period of cos(3δ) only
        let grid: Vec<f64> = (0..61).map(|i| TAU / 3.0 * i as f64 / 60.0).collect();
        let curve =
            CorrelationCurve::tabulate(&grid, 6, None, |d| Ok(10.0 + 2.0 * (3.0 * d).cos()))
                .unwrap();
        let fit = fit_cosine(&curve, 3).unwrap();
        assert!((fit.offset - 10.0).abs() < 1e-9 && (fit.amplitude - 2.0).abs() < 1e-9);
    }

    #[test]
    fn insufficient_coverage() {
        let grid: Vec<f64> = (0..50).map(|i| 0.02 * i as f64).collect();
        let curve = CorrelationCurve::new(grid.clone(), vec![1.0; 50], 2, None).unwrap();
        assert!(matches!(
            fit_cosine(&curve, 2),
            Err(Error::InvalidArgument(_))
        ));
        let full = CorrelationCurve::new(uniform_grid(20), vec![1.0; 20], 2, None).unwrap();
        assert!(matches!(
            fit_cosine(&full, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn spectrum_picks_strongest_harmonic() {
        let grid = uniform_grid(181);
        let curve = CorrelationCurve::tabulate(&grid, 4, None, |d| {
            Ok(5.0 + 0.3 * d.cos() + 1.1 * (4.0 * d).sin() + 0.2 * (2.0 * d).cos())
        })
        .unwrap();
        let fit = fit_cosine(&curve, 2).unwrap();
        assert_eq!(fit.frequency, 4);
        let c4 = fit.spectrum[3];
        assert!((c4.sin - 1.1).abs() < 1e-9 && c4.cos.abs() < 1e-9);
        assert!((fit.amplitude - 0.2).abs() < 1e-2);
    }

    #[test]
    fn bootstrap_errors_from_batches() {
        let grid = uniform_grid(91);
        let batches: Vec<Vec<f64>> = (0..20)
            .map(|b| {
                let amp = 1.0 + 0.1 * ((b % 5) as f64 - 2.0);
                grid.iter().map(|d| 10.0 + amp * (2.0 * d).cos()).collect()
            })
            .collect();
        let mean: Vec<f64> = (0..grid.len())
            .map(|i| batches.iter().map(|b| b[i]).sum::<f64>() / 20.0)
            .collect();
        let mut curve = CorrelationCurve::new(grid, mean, 4, None).unwrap();
        curve.batch_means = Some(batches);
        let fit = fit_cosine(&curve, 2).unwrap();
        // batch amplitudes have std 0.1414..., so the mean's error is about 0.0316
        assert!(
            fit.stderr_amplitude > 0.015 && fit.stderr_amplitude < 0.05,
            "{}",
            fit.stderr_amplitude
        );
        assert!(fit.stderr_visibility > 0.0);
        assert!(fit.modulation_significant(3.0));
        let again = fit_cosine(&curve, 2).unwrap();
        assert_eq!(fit, again);
    }
}
