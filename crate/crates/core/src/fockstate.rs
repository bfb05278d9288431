//! Two thermal modes in a truncated Fock basis.
//!
//! Detecting `m2` photons at the magic positions acts on the two-source state
//! with `a₁^{m2} + (−1)^{m2−1} a₂^{m2}`: every other annihilation pattern
//! cancels. The projected state keeps the thermal diagonal and gains exactly
//! two coherences, between `|n₁, n₂⟩` and `|n₁ ∓ m2, n₂ ± m2⟩`. This module
//! builds those states, evaluates normally ordered correlations on them by
//! direct operator algebra and checks the factorization
//! `G^(M)(MD; MP) = G^(m1)_{projected}(MD) · G^(m2)(MP)`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::magic_positions;

/// Largest tail mass tolerated when truncating a thermal state.
pub const MAX_TRUNCATION_MASS: f64 = 1e-6;

/// Cutoff policy: `max(30, 10·n̄ + m1 + m2 + 10)`.
pub fn default_cutoff(nbar: f64, m1: usize, m2: usize) -> usize {
    let scaled = (10.0 * nbar).ceil().max(0.0) as usize;
    30.max(scaled + m1 + m2 + 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    First,
    Second,
}

/// `a_mode^power`, bounded by the basis cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeOperatorPower {
    mode: Mode,
    power: usize,
}

impl ModeOperatorPower {
    pub fn new(mode: Mode, power: usize, cutoff: usize) -> Result<Self> {
        if power > cutoff {
            return Err(Error::TruncationError(format!(
                "operator power {power} exceeds the basis cutoff {cutoff}"
            )));
        }
        Ok(ModeOperatorPower { mode, power })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn power(&self) -> usize {
        self.power
    }

    fn exponents(&self) -> (usize, usize) {
        match self.mode {
            Mode::First => (self.power, 0),
            Mode::Second => (0, self.power),
        }
    }
}

/// `Σ c·a₁^p a₂^q` with the two modes commuting.
#[derive(Debug, Clone, PartialEq)]
struct FieldPolynomial {
    terms: Vec<(usize, usize, Complex64)>,
}

impl FieldPolynomial {
    fn one() -> Self {
        FieldPolynomial {
            terms: vec![(0, 0, Complex64::new(1.0, 0.0))],
        }
    }

    /// `E⁺(δ) = a₁ + e^{−iδ} a₂`.
    fn field(delta: f64) -> Self {
        FieldPolynomial {
            terms: vec![
                (1, 0, Complex64::new(1.0, 0.0)),
                (0, 1, Complex64::from_polar(1.0, -delta)),
            ],
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut terms: Vec<(usize, usize, Complex64)> = Vec::new();
        for &(p, q, c) in &self.terms {
            for &(r, s, d) in &other.terms {
                let key = (p + r, q + s);
                match terms.iter_mut().find(|t| (t.0, t.1) == key) {
                    Some(t) => t.2 += c * d,
                    None => terms.push((key.0, key.1, c * d)),
                }
            }
        }
        FieldPolynomial { terms }
    }

    /// `∏_j E⁺(δ_j)`.
    fn detection(deltas: &[f64]) -> Self {
        deltas
            .iter()
            .fold(Self::one(), |acc, &d| acc.mul(&Self::field(d)))
    }

    fn max_power(&self) -> usize {
        self.terms.iter().map(|t| t.0.max(t.1)).max().unwrap_or(0)
    }
}

/// `√(n!/(n−p)!)`, the matrix element of `a^p` from `|n⟩` to `|n−p⟩`.
fn lowering(n: usize, p: usize) -> f64 {
    ((n - p + 1)..=n).map(|k| k as f64).product::<f64>().sqrt()
}

/// Density matrix over `|n₁, n₂⟩`, `0 ≤ n₁, n₂ ≤ cutoff`, stored densely with
/// index `n₁·(cutoff+1) + n₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeDensityMatrix {
    cutoff: usize,
    entries: DMatrix<Complex64>,
    eps_trunc: f64,
}

impl TwoModeDensityMatrix {
    pub fn from_entries(cutoff: usize, entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = (cutoff + 1) * (cutoff + 1);
        if entries.nrows() != dim || entries.ncols() != dim {
            return invalid(format!(
                "cutoff {cutoff} needs a {dim}x{dim} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        Ok(TwoModeDensityMatrix {
            cutoff,
            entries,
            eps_trunc: 0.0,
        })
    }

    /// `|ψ⟩⟨ψ|` for `ψ = Σ c·|n₁, n₂⟩`, normalized.
    pub fn pure(cutoff: usize, amplitudes: &[((usize, usize), Complex64)]) -> Result<Self> {
        let dim = (cutoff + 1) * (cutoff + 1);
        let mut psi = vec![Complex64::new(0.0, 0.0); dim];
        for &((n1, n2), c) in amplitudes {
            if n1 > cutoff || n2 > cutoff {
                return Err(Error::TruncationError(format!(
                    "|{n1},{n2}⟩ lies outside cutoff {cutoff}"
                )));
            }
            psi[n1 * (cutoff + 1) + n2] += c;
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return invalid("state vector is zero");
        }
        let entries = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Self::from_entries(cutoff, entries)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        (self.cutoff + 1) * (self.cutoff + 1)
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Probability mass lost when the underlying state was truncated.
    pub fn eps_trunc(&self) -> f64 {
        self.eps_trunc
    }

    fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.cutoff + 1) + n2
    }

    fn occupation(&self, idx: usize) -> (usize, usize) {
        (idx / (self.cutoff + 1), idx % (self.cutoff + 1))
    }

    /// `⟨n₁, n₂|ρ|m₁, m₂⟩`; zero outside the basis.
    pub fn element(&self, bra: (usize, usize), ket: (usize, usize)) -> Complex64 {
        let c = self.cutoff;
        if bra.0 > c || bra.1 > c || ket.0 > c || ket.1 > c {
            return Complex64::new(0.0, 0.0);
        }
        self.entries[(self.index(bra.0, bra.1), self.index(ket.0, ket.1))]
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|c| c.re).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Offsets `(n₁ − m₁, n₂ − m₂)` of all entries `⟨n|ρ|m⟩` above `tol`.
    pub fn support_offsets(&self, tol: f64) -> BTreeSet<(i64, i64)> {
        let mut out = BTreeSet::new();
        for i in 0..self.dim() {
            let (a1, a2) = self.occupation(i);
            for j in 0..self.dim() {
                if self.entries[(i, j)].norm() > tol {
                    let (b1, b2) = self.occupation(j);
                    out.insert((a1 as i64 - b1 as i64, a2 as i64 - b2 as i64));
                }
            }
        }
        out
    }

    /// Smallest eigenvalue of the Hermitian part. Uses the block structure in
    /// total photon number when the state has no coherences between blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let herm = DMatrix::from_fn(n, n, |i, j| {
            0.5 * (self.entries[(i, j)] + self.entries[(j, i)].conj())
        });
        let scale = herm.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let total = |i: usize| {
            let (a, b) = self.occupation(i);
            a + b
        };
        let block_diagonal = (0..n).all(|i| {
            (0..n).all(|j| {
                total(i) == total(j) || herm[(i, j)].norm() <= 1e-15 * scale.max(f64::MIN_POSITIVE)
            })
        });
        if !block_diagonal {
            return SymmetricEigen::new(herm).eigenvalues.min();
        }
        let mut worst = f64::INFINITY;
        for photons in 0..=2 * self.cutoff {
            let members: Vec<usize> = (0..n).filter(|&i| total(i) == photons).collect();
            let block = DMatrix::from_fn(members.len(), members.len(), |a, b| {
                herm[(members[a], members[b])]
            });
            worst = worst.min(SymmetricEigen::new(block).eigenvalues.min());
        }
        worst
    }

    /// Copy with every off-diagonal element set to zero.
    pub fn without_coherences(&self) -> Self {
        let n = self.dim();
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            entries[(i, i)] = self.entries[(i, i)];
        }
        TwoModeDensityMatrix {
            cutoff: self.cutoff,
            entries,
            eps_trunc: self.eps_trunc,
        }
    }

    fn check_power(&self, poly: &FieldPolynomial) -> Result<()> {
        let p = poly.max_power();
        if p > self.cutoff {
            return Err(Error::TruncationError(format!(
                "operator power {p} exceeds the basis cutoff {}",
                self.cutoff
            )));
        }
        Ok(())
    }

    /// `P ρ P†` for a polynomial `P` in the annihilation operators.
    fn sandwich(&self, poly: &FieldPolynomial) -> DMatrix<Complex64> {
        let c = self.cutoff;
        let n = self.dim();
        // for each term: the target index and weight of every basis state it reaches
        let maps: Vec<Vec<Option<(usize, Complex64)>>> = poly
            .terms
            .iter()
            .map(|&(p, q, coef)| {
                (0..n)
                    .map(|i| {
                        let (n1, n2) = self.occupation(i);
                        if n1 + p > c || n2 + q > c {
                            return None;
                        }
                        let src = self.index(n1 + p, n2 + q);
                        Some((src, coef * lowering(n1 + p, p) * lowering(n2 + q, q)))
                    })
                    .collect()
            })
            .collect();
        let mut out = DMatrix::zeros(n, n);
        for left in &maps {
            for right in &maps {
                for i in 0..n {
                    let Some((si, wi)) = left[i] else { continue };
                    for j in 0..n {
                        if let Some((sj, wj)) = right[j] {
                            out[(i, j)] += wi * self.entries[(si, sj)] * wj.conj();
                        }
                    }
                }
            }
        }
        out
    }

    /// `Tr(P ρ P†)`.
    fn expectation(&self, poly: &FieldPolynomial) -> f64 {
        let c = self.cutoff;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(p, q, cp) in &poly.terms {
            for &(r, s, cr) in &poly.terms {
                // Σ_n ⟨n+(p,q)|ρ|n+(r,s)⟩ · weights
                let lim1 = c.saturating_sub(p.max(r));
                let lim2 = c.saturating_sub(q.max(s));
                if p.max(r) > c || q.max(s) > c {
                    continue;
                }
                for n1 in 0..=lim1 {
                    for n2 in 0..=lim2 {
                        let w = lowering(n1 + p, p)
                            * lowering(n2 + q, q)
                            * lowering(n1 + r, r)
                            * lowering(n2 + s, s);
                        acc += cp
                            * cr.conj()
                            * w
                            * self.entries
                                [(self.index(n1 + p, n2 + q), self.index(n1 + r, n2 + s))];
                    }
                }
            }
        }
        acc.re
    }

    /// Normally ordered `⟨∏ E⁻(δ_j) ∏ E⁺(δ_j)⟩` with `E⁺(δ) = a₁ + e^{−iδ}a₂`.
    pub fn correlation(&self, deltas: &[f64]) -> Result<f64> {
        let poly = FieldPolynomial::detection(deltas);
        self.check_power(&poly)?;
        Ok(self.expectation(&poly))
    }

    /// `⟨a†^p a^p⟩`-type moments for a single mode power.
    pub fn moment(&self, op: ModeOperatorPower) -> Result<f64> {
        let (p, q) = op.exponents();
        let poly = FieldPolynomial {
            terms: vec![(p, q, Complex64::new(1.0, 0.0))],
        };
        self.check_power(&poly)?;
        Ok(self.expectation(&poly))
    }
}

/// Two independent thermal modes with mean photon number `nbar` each.
pub fn thermal_two_mode(nbar: f64, cutoff: usize) -> Result<TwoModeDensityMatrix> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return invalid(format!(
            "mean photon number must be non-negative, got {nbar}"
        ));
    }
    if cutoff == 0 {
        return invalid("cutoff must be positive");
    }
    let ratio = nbar / (1.0 + nbar);
    let weights: Vec<f64> = (0..=cutoff)
        .map(|n| ratio.powi(n as i32) / (1.0 + nbar))
        .collect();
    let kept: f64 = weights.iter().sum();
    let eps_trunc = (1.0 - kept * kept).max(0.0);
    if eps_trunc > MAX_TRUNCATION_MASS {
        return Err(Error::TruncationError(format!(
            "cutoff {cutoff} drops {eps_trunc:.3e} of the thermal state with nbar={nbar}"
        )));
    }
    let dim = (cutoff + 1) * (cutoff + 1);
    let mut entries = DMatrix::zeros(dim, dim);
    for n1 in 0..=cutoff {
        for n2 in 0..=cutoff {
            let i = n1 * (cutoff + 1) + n2;
            entries[(i, i)] = Complex64::new(weights[n1] * weights[n2] / (kept * kept), 0.0);
        }
    }
    Ok(TwoModeDensityMatrix {
        cutoff,
        entries,
        eps_trunc,
    })
}

/// A projected state together with its detection weight `Tr(AρA†)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub state: TwoModeDensityMatrix,
    pub weight: f64,
}

fn magic_operator(m2: usize) -> FieldPolynomial {
    let sign = if m2 % 2 == 1 { 1.0 } else { -1.0 };
    FieldPolynomial {
        terms: vec![
            (m2, 0, Complex64::new(1.0, 0.0)),
            (0, m2, Complex64::new(sign, 0.0)),
        ],
    }
}

/// Project with `A = a₁^{m2} + (−1)^{m2−1} a₂^{m2}`, keeping the weight.
pub fn project_magic_weighted(rho: &TwoModeDensityMatrix, m2: usize) -> Result<Projection> {
    if m2 == 0 {
        return invalid("projection needs at least one magic-position detector");
    }
    let op = magic_operator(m2);
    rho.check_power(&op)?;
    let mut entries = rho.sandwich(&op);
    let weight: f64 = entries.diagonal().iter().map(|c| c.re).sum();
    if !(weight > 1e-300) {
        return Err(Error::ZeroProbabilityEvent(format!(
            "detecting {m2} photons at the magic positions has zero probability on this state"
        )));
    }
    entries /= Complex64::new(weight, 0.0);
    Ok(Projection {
        state: TwoModeDensityMatrix {
            cutoff: rho.cutoff,
            entries,
            eps_trunc: rho.eps_trunc,
        },
        weight,
    })
}

/// The state after `m2` photons were detected at the magic positions.
pub fn project_magic(rho: &TwoModeDensityMatrix, m2: usize) -> Result<TwoModeDensityMatrix> {
    Ok(project_magic_weighted(rho, m2)?.state)
}

/// `⟨[E⁻(δ₁)]^{m1} [E⁺(δ₁)]^{m1}⟩` for `m1` detectors at the same phase.
pub fn g_moving(rho: &TwoModeDensityMatrix, m1: usize, delta1: f64) -> Result<f64> {
    if m1 == 0 {
        return invalid("need at least one moving detector");
    }
    rho.correlation(&vec![delta1; m1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsomorphismReport {
    pub delta1: f64,
    /// Full `G^(m1+m2)` on the thermal state.
    pub lhs: f64,
    /// Moving-detector correlation on the projected state times `G^(m2)(MP)`.
    pub rhs: f64,
    pub relative_gap: f64,
    /// `G^(m2)` at the magic positions.
    pub g_fixed: f64,
    pub eps_trunc: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Evaluate both sides of the factorization on a set of scan phases.
pub fn isomorphism_scan(
    nbar: f64,
    m1: usize,
    m2: usize,
    deltas: &[f64],
    cutoff: usize,
) -> Result<Vec<IsomorphismReport>> {
    if m1 == 0 || m2 == 0 {
        return invalid("need m1, m2 >= 1");
    }
    if m1 + m2 > cutoff {
        return Err(Error::TruncationError(format!(
            "m1 + m2 = {} exceeds the cutoff {cutoff}",
            m1 + m2
        )));
    }
    let rho = thermal_two_mode(nbar, cutoff)?;
    let mp = magic_positions(m2)?;
    let g_fixed = rho.correlation(&mp)?;
    let projected = project_magic(&rho, m2)?;
    let tolerance = 1e-6_f64.max(10.0 * rho.eps_trunc());
    deltas
        .iter()
        .map(|&delta1| {
            let mut all = vec![delta1; m1];
            all.extend_from_slice(&mp);
            let lhs = rho.correlation(&all)?;
            let rhs = g_moving(&projected, m1, delta1)? * g_fixed;
            let relative_gap = (lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE);
            Ok(IsomorphismReport {
                delta1,
                lhs,
                rhs,
                relative_gap,
                g_fixed,
                eps_trunc: rho.eps_trunc(),
                tolerance,
                passed: relative_gap < tolerance,
            })
        })
        .collect()
}

pub fn verify_isomorphism(
    nbar: f64,
    m1: usize,
    m2: usize,
    delta1: f64,
    cutoff: usize,
) -> Result<IsomorphismReport> {
    Ok(isomorphism_scan(nbar, m1, m2, &[delta1], cutoff)?.remove(0))
}

/// `⟨Ψ|ρ|Ψ⟩` with `|Ψ⟩ = (|m2,0⟩ + (−1)^{m2−1}|0,m2⟩)/√2`.
pub fn noon_overlap(rho: &TwoModeDensityMatrix, m2: usize) -> f64 {
    if m2 == 0 || m2 > rho.cutoff {
        return 0.0;
    }
    let sign = if m2 % 2 == 1 { 1.0 } else { -1.0 };
    let a = (m2, 0);
    let b = (0, m2);
    let value =
        rho.element(a, a) + rho.element(b, b) + sign * (rho.element(a, b) + rho.element(b, a));
    (0.5 * value.re).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn thermal_states() {
        let vac = thermal_two_mode(0.0, 4).unwrap();
        assert_eq!(vac.element((0, 0), (0, 0)), c(1.0));
        assert!((vac.trace() - 1.0).abs() < 1e-15);
        assert_eq!(vac.support_offsets(1e-15), BTreeSet::from([(0, 0)]));

        let th = thermal_two_mode(0.5, 30).unwrap();
        assert!(th.eps_trunc() < 1e-6);
        // tail of one mode is (1/3)^31; two modes roughly double it
        assert!(th.eps_trunc() < 3.0 * (1.0f64 / 3.0).powi(31) + 1e-16);
        assert!((th.trace() - 1.0).abs() < 1e-12);
        // ⟨a†a⟩ = n̄ and ⟨a†²a²⟩ = 2n̄²
        let n1 = th
            .moment(ModeOperatorPower::new(Mode::First, 1, 30).unwrap())
            .unwrap();
        let n2 = th
            .moment(ModeOperatorPower::new(Mode::Second, 2, 30).unwrap())
            .unwrap();
        assert!((n1 - 0.5).abs() < 1e-9 && (n2 - 0.5).abs() < 1e-9);

        assert!(matches!(
            thermal_two_mode(3.0, 5),
            Err(Error::TruncationError(_))
        ));
        assert!(thermal_two_mode(-1.0, 5).is_err());
        assert!(ModeOperatorPower::new(Mode::First, 6, 5).is_err());
    }

    #[test]
    fn cutoff_policy() {
        assert_eq!(default_cutoff(0.5, 2, 2), 30);
        assert_eq!(default_cutoff(3.0, 4, 3), 47);
    }

    #[test]
    fn vacuum_projection_is_impossible() {
        let vac = thermal_two_mode(0.0, 6).unwrap();
        for m2 in 1..=3 {
            assert!(matches!(
                project_magic(&vac, m2),
                Err(Error::ZeroProbabilityEvent(_))
            ));
        }
    }

    #[test]
    fn projection_support() {
        let th = thermal_two_mode(0.2, 12).unwrap();
        for m2 in 1..=3i64 {
            let p = project_magic(&th, m2 as usize).unwrap();
            assert_eq!(
                p.support_offsets(1e-12),
                BTreeSet::from([(0, 0), (m2, -m2), (-m2, m2)])
            );
            assert!(p.hermiticity_error() < 1e-12);
            assert!(p.min_eigenvalue() > -1e-10);
            assert!((p.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moving_detectors_on_simple_states() {
        let one = TwoModeDensityMatrix::pure(3, &[((1, 0), c(1.0))]).unwrap();
        for d in [0.0, 1.0, 2.5] {
            assert!((g_moving(&one, 1, d).unwrap() - 1.0).abs() < 1e-12);
        }
        let noon = TwoModeDensityMatrix::pure(
            3,
            &[((2, 0), c(FRAC_1_SQRT_2)), ((0, 2), c(-FRAC_1_SQRT_2))],
        )
        .unwrap();
        for d in [0.0, 0.3, PI / 2.0, 2.0] {
            let g = g_moving(&noon, 2, d).unwrap();
            assert!(
                (g - (2.0 - 2.0 * (2.0 * d).cos())).abs() < 1e-12,
                "δ={d}: {g}"
            );
        }
        assert!(matches!(
            g_moving(&one, 4, 0.0),
            Err(Error::TruncationError(_))
        ));
        assert!(noon_overlap(&noon, 2) > 1.0 - 1e-12);
    }

    #[test]
    fn isomorphism_examples() {
        let r = verify_isomorphism(0.5, 2, 2, 1.0, 30).unwrap();
        assert!(r.relative_gap < 1e-6 && r.passed, "{r:?}");
        let r = verify_isomorphism(1.0, 1, 1, 0.0, 30).unwrap();
        assert!((r.lhs - 8.0).abs() < 1e-5, "{}", r.lhs);
        // G^(2) at {0, π} with n̄ = 1
        assert!((r.g_fixed - 2.0).abs() < 1e-5);
        let r = verify_isomorphism(1.0, 1, 2, 0.0, 30).unwrap();
        assert!((r.g_fixed - 4.0).abs() < 1e-5);
        assert!(matches!(
            verify_isomorphism(0.5, 3, 3, 0.0, 5),
            Err(Error::TruncationError(_))
        ));
    }

    #[test]
    fn projected_thermal_reproduces_setup2() {
        let nbar = 0.5;
        let th = thermal_two_mode(nbar, 30).unwrap();
        let proj = project_magic_weighted(&th, 2).unwrap();
        assert!((proj.weight - 4.0 * nbar * nbar).abs() < 1e-9);
        for d in [0.0, 0.4, 1.3, 2.9] {
            let g = g_moving(&proj.state, 2, d).unwrap() * proj.weight;
            let want = crate::analytic::setup2_g(2, 2, d).unwrap() * nbar.powi(4);
            assert!((g - want).abs() < 1e-8 * want);
        }
    }

    #[test]
    fn noon_overlap_of_projected_thermal() {
        // Σ_n p(n)|⟨Ψ|A|n⟩|² / Tr(AρA†) = 16 n̄⁴/(1+n̄)⁶ / 4n̄² for m2 = 2
        for nbar in [1e-3, 0.1, 0.5] {
            let proj = project_magic(&thermal_two_mode(nbar, 30).unwrap(), 2).unwrap();
            let want = 4.0 * nbar * nbar / (1.0 + nbar).powi(6);
            let got = noon_overlap(&proj, 2);
            assert!(
                (got - want).abs() < 1e-10 * want.max(1e-12),
                "n̄={nbar}: {got} vs {want}"
            );
            // coherences contribute 2/16 of the overlap
            let diag = noon_overlap(&proj.without_coherences(), 2);
            assert!(got > diag);
            assert!((diag - want * 14.0 / 16.0).abs() < 1e-10 * want);
        }
    }
}
