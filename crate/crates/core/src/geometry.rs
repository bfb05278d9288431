//! Source arrays, detector phase conventions and the magic-position
//! generators.
//!
//! Everything downstream works in dimensionless detector phases
//! `δ = k·d·sin θ`. A source at relative position `α·d` contributes the phase
//! `α·δ` at a detector with phase `δ`, so a source array is fully described by
//! its integer prefactors `α_l`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Absolute tolerance for comparing phases.
pub const PHASE_TOL: f64 = 1e-12;

/// Reduce a phase to its canonical representative in `[0, 2π)`.
pub fn reduce_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Circular distance between two phases, in `[0, π]`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = reduce_phase(a - b);
    d.min(TAU - d)
}

pub fn phases_close(a: f64, b: f64) -> bool {
    phase_distance(a, b) <= PHASE_TOL
}

/// The `m` fixed magic positions `2π(j−2)/m`, `j = 2..=m+1`.
pub fn magic_positions(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return invalid("magic positions need at least one detector");
    }
    Ok((0..m)
        .map(|j| reduce_phase(TAU * j as f64 / m as f64))
        .collect())
}

/// The magic positions rigidly shifted by the scan phase `delta1`.
pub fn moving_magic_positions(delta1: f64, m: usize) -> Result<Vec<f64>> {
    Ok(magic_positions(m)?
        .into_iter()
        .map(|p| reduce_phase(p + delta1))
        .collect())
}

/// Far-field detector phase `k·d·sin θ`.
pub fn phase_from_angle(k: f64, d: f64, theta: f64) -> Result<f64> {
    if !(k > 0.0) || !(d > 0.0) {
        return invalid(format!(
            "wavenumber and spacing must be positive (k={k}, d={d})"
        ));
    }
    Ok(k * d * theta.sin())
}

/// A line of `K` mutually incoherent thermal emitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceArray {
    prefactors: Vec<u32>,
    nbar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing_d: Option<f64>,
}

impl SourceArray {
    pub fn new(prefactors: Vec<u32>, nbar: Vec<f64>) -> Result<Self> {
        let s = SourceArray {
            prefactors,
            nbar,
            spacing_d: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// `K` equidistant sources (`α_l = 0, 1, …, K−1`) of equal brightness.
    pub fn equidistant(k: usize, nbar: f64) -> Result<Self> {
        Self::new((0..k as u32).collect(), vec![nbar; k])
    }

    pub fn with_spacing(mut self, d: f64) -> Result<Self> {
        if !(d > 0.0) {
            return invalid("source spacing must be positive");
        }
        self.spacing_d = Some(d);
        Ok(self)
    }

    /// Re-check the invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.prefactors.is_empty() {
            return invalid("source array is empty");
        }
        if self.prefactors[0] != 0 {
            return invalid("first phase prefactor must be 0");
        }
        if self.prefactors.windows(2).any(|w| w[0] > w[1]) {
            return invalid("phase prefactors must be sorted ascending");
        }
        if self.nbar.len() != self.prefactors.len() {
            return invalid(format!(
                "{} mean photon numbers given for {} sources",
                self.nbar.len(),
                self.prefactors.len()
            ));
        }
        if self.nbar.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
            return invalid("mean photon numbers must be positive and finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.prefactors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefactors.is_empty()
    }

    pub fn prefactors(&self) -> &[u32] {
        &self.prefactors
    }

    pub fn nbar(&self) -> &[f64] {
        &self.nbar
    }

    pub fn spacing_d(&self) -> Option<f64> {
        self.spacing_d
    }
}

/// How the moving detectors are arranged around the scan phase `δ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MovingKind {
    /// All moving detectors sit at `δ₁`.
    CoLocated,
    /// Moving detectors at the magic positions shifted by `δ₁`.
    MmpSpread,
}

/// Fixed detectors at explicit phases plus `moving_count` detectors that
/// follow the scan phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorLayout {
    fixed_phases: Vec<f64>,
    moving_count: usize,
    moving_kind: MovingKind,
}

impl DetectorLayout {
    pub fn new(
        fixed_phases: Vec<f64>,
        moving_count: usize,
        moving_kind: MovingKind,
    ) -> Result<Self> {
        let layout = DetectorLayout {
            fixed_phases,
            moving_count,
            moving_kind,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// `m` detectors on the moving magic positions and `m` on the fixed ones.
    pub fn moving_magic(m: usize) -> Result<Self> {
        Self::new(magic_positions(m)?, m, MovingKind::MmpSpread)
    }

    /// `m1` co-located moving detectors and `m2` fixed magic positions.
    /// `m2 = 0` leaves only the moving detectors.
    pub fn co_located(m1: usize, m2: usize) -> Result<Self> {
        let fixed = if m2 == 0 {
            Vec::new()
        } else {
            magic_positions(m2)?
        };
        Self::new(fixed, m1, MovingKind::CoLocated)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order() == 0 {
            return invalid("detector layout has no detectors");
        }
        if self.moving_kind == MovingKind::MmpSpread && self.moving_count != self.fixed_phases.len()
        {
            return invalid(format!(
                "moving magic positions need equal halves (m1={}, m2={})",
                self.moving_count,
                self.fixed_phases.len()
            ));
        }
        if self
            .fixed_phases
            .iter()
            .any(|&p| !(p.is_finite() && (0.0..TAU).contains(&p)))
        {
            return invalid("fixed detector phases must lie in [0, 2π)");
        }
        Ok(())
    }

    pub fn m1(&self) -> usize {
        self.moving_count
    }

    pub fn m2(&self) -> usize {
        self.fixed_phases.len()
    }

    pub fn order(&self) -> usize {
        self.moving_count + self.fixed_phases.len()
    }

    pub fn moving_kind(&self) -> MovingKind {
        self.moving_kind
    }

    pub fn fixed_phases(&self) -> &[f64] {
        &self.fixed_phases
    }

    /// Offsets of the moving detectors relative to `δ₁` (not reduced).
    pub fn moving_offsets(&self) -> Vec<f64> {
        let m = self.moving_count;
        match self.moving_kind {
            MovingKind::CoLocated => vec![0.0; m],
            MovingKind::MmpSpread => (0..m).map(|j| TAU * j as f64 / m as f64).collect(),
        }
    }

    /// All `M` detector phases for scan phase `delta1`: moving first, then fixed.
    pub fn deltas(&self, delta1: f64) -> Vec<f64> {
        self.moving_offsets()
            .into_iter()
            .map(|o| reduce_phase(delta1 + o))
            .chain(self.fixed_phases.iter().copied())
            .collect()
    }

    /// Expected sign of the interference term: `(−1)^{m2−1}` for co-located
    /// moving detectors, `+1` for the moving magic positions.
    pub fn parity_sign(&self) -> i32 {
        match self.moving_kind {
            MovingKind::MmpSpread => 1,
            MovingKind::CoLocated if self.m2() == 0 => 1,
            MovingKind::CoLocated => {
                if self.m2() % 2 == 1 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    /// Frequency (cycles per 2π of `δ₁`) at which a modulation is expected.
    /// For co-located detectors with `m1 < m2` no modulation appears but the
    /// fit is still carried out at `m2`.
    pub fn modulation_frequency(&self) -> usize {
        match self.moving_kind {
            MovingKind::MmpSpread => self.moving_count,
            MovingKind::CoLocated => self.m2().max(1),
        }
    }

    pub fn expects_modulation(&self) -> bool {
        match self.moving_kind {
            MovingKind::MmpSpread => true,
            MovingKind::CoLocated => self.m2() >= 1 && self.moving_count >= self.m2(),
        }
    }
}

/// `points` equally spaced phases covering `[0, 2π]` inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| TAU * i as f64 / (n - 1) as f64).collect()
}
