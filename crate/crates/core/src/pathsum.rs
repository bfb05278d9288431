//! Brute-force evaluators of the `M`th-order intensity correlation of `K`
//! independent thermal sources.
//!
//! [`correlation_pathsum`] sums over photon partitions `{n_l}` and, inside
//! each, coherently over the distinct orderings of the emitting sources
//! (the indistinguishable quantum paths). [`correlation_permanent`] gets the
//! same number from the Gaussian moment theorem as the permanent of the
//! detector coherence matrix. The two share no code beyond the input types.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::geometry::SourceArray;
use crate::permanent::{permanent, MAX_PERMANENT_DIM};

/// Largest order accepted by the path sum (the number of distinct
/// arrangements grows like `M!/∏ n_l!`).
pub const MAX_PATHSUM_ORDER: usize = 12;

/// Absolute tolerance below which a path amplitude counts as zero.
pub const AMPLITUDE_ZERO_TOL: f64 = 1e-9;

/// Final state: number of detected photons attributed to each source.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhotonPartition {
    pub counts: Vec<usize>,
}

impl PhotonPartition {
    pub fn order(&self) -> usize {
        self.counts.iter().sum()
    }

    /// The multiset of phase prefactors: `α_l` repeated `n_l` times.
    pub fn prefactor_multiset(&self, prefactors: &[u32]) -> Vec<u32> {
        self.counts
            .iter()
            .zip(prefactors)
            .flat_map(|(&n, &a)| std::iter::repeat_n(a, n))
            .collect()
    }
}

/// Coherent sum of the phase factors of all quantum paths into one final state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAmplitude(pub Complex64);

impl PathAmplitude {
    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.norm() < AMPLITUDE_ZERO_TOL
    }
}

/// All compositions of `m` into `k` non-negative parts, first part descending.
pub fn enumerate_partitions(k: usize, m: usize) -> Vec<PhotonPartition> {
    fn rec(k: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<PhotonPartition>) {
        if k == 1 {
            prefix.push(left);
            out.push(PhotonPartition {
                counts: prefix.clone(),
            });
            prefix.pop();
            return;
        }
        for n in (0..=left).rev() {
            prefix.push(n);
            rec(k - 1, left - n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    rec(k, m, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Step `items` to the next lexicographic permutation; `false` once the
/// sequence is the last (descending) arrangement.
fn next_permutation<T: Ord>(items: &mut [T]) -> bool {
    let n = items.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && items[i - 1] >= items[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while items[j] <= items[i - 1] {
        j -= 1;
    }
    items.swap(i - 1, j);
    items[i..].reverse();
    true
}

/// `Σ exp(i Σ_j α_{l_j} δ_j)` over the distinct arrangements of the multiset
/// `prefactors`. Repeated prefactors are not double-counted.
pub fn multiset_phase_sum(prefactors: &[u32], deltas: &[f64]) -> Result<PathAmplitude> {
    if prefactors.len() != deltas.len() {
        return invalid(format!(
            "{} prefactors for {} detector phases",
            prefactors.len(),
            deltas.len()
        ));
    }
    let mut arrangement = prefactors.to_vec();
    arrangement.sort_unstable();
    let mut sum = Complex64::new(0.0, 0.0);
    loop {
        let phase: f64 = arrangement
            .iter()
            .zip(deltas)
            .map(|(&a, &d)| a as f64 * d)
            .sum();
        sum += Complex64::from_polar(1.0, phase);
        if !next_permutation(&mut arrangement) {
            break;
        }
    }
    Ok(PathAmplitude(sum))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn check_order(deltas: &[f64]) -> Result<usize> {
    let m = deltas.len();
    if m == 0 {
        return invalid("correlation order must be at least 1");
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return invalid("detector phases must be finite");
    }
    Ok(m)
}

/// `G^(M)` as a sum over final states of the statistical weight
/// `∏ n_l!·n̄_l^{n_l}` times the squared path amplitude.
pub fn correlation_pathsum(sources: &SourceArray, deltas: &[f64]) -> Result<f64> {
    let m = check_order(deltas)?;
    if m > MAX_PATHSUM_ORDER {
        return Err(Error::CapacityExceeded(format!(
            "path sum limited to order {MAX_PATHSUM_ORDER} (got {m}); \
             use the permanent route (correlation_permanent, up to order {MAX_PERMANENT_DIM})"
        )));
    }
    let prefactors = sources.prefactors();
    let nbar = sources.nbar();
    let mut total = 0.0;
    for partition in enumerate_partitions(sources.len(), m) {
        let weight: f64 = partition
            .counts
            .iter()
            .zip(nbar)
            .map(|(&n, &nb)| factorial(n) * nb.powi(n as i32))
            .product();
        let amp = multiset_phase_sum(&partition.prefactor_multiset(prefactors), deltas)?;
        total += weight * amp.value().norm_sqr();
    }
    Ok(total)
}

/// Coherence matrix `J_{jk} = Σ_l n̄_l e^{iα_l(δ_j−δ_k)}` of the detector fields.
pub fn coherence_matrix(sources: &SourceArray, deltas: &[f64]) -> DMatrix<Complex64> {
    let m = deltas.len();
    DMatrix::from_fn(m, m, |j, k| {
        sources
            .prefactors()
            .iter()
            .zip(sources.nbar())
            .map(|(&a, &nb)| Complex64::from_polar(nb, a as f64 * (deltas[j] - deltas[k])))
            .sum()
    })
}

/// `G^(M)` as the permanent of the coherence matrix (Gaussian moment theorem).
pub fn correlation_permanent(sources: &SourceArray, deltas: &[f64]) -> Result<f64> {
    let m = check_order(deltas)?;
    if m > MAX_PERMANENT_DIM {
        return Err(Error::CapacityExceeded(format!(
            "permanent route limited to order {MAX_PERMANENT_DIM} (got {m})"
        )));
    }
    let value = permanent(&coherence_matrix(sources, deltas))?;
    if value.im.abs() > 1e-8 * value.re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NumericalFailure(format!(
            "permanent of a Hermitian coherence matrix came out complex: {value}"
        )));
    }
    Ok(value.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI, TAU};

    fn equal(k: usize) -> SourceArray {
        SourceArray::equidistant(k, 1.0).unwrap()
    }

    #[test]
    fn partitions_examples() {
        let p: Vec<_> = enumerate_partitions(2, 2)
            .into_iter()
            .map(|p| p.counts)
            .collect();
        assert_eq!(p, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_partitions(2, 4).len(), 5);
        assert_eq!(enumerate_partitions(3, 3).len(), 10);
        let zero: Vec<_> = enumerate_partitions(3, 0)
            .into_iter()
            .map(|p| p.counts)
            .collect();
        assert_eq!(zero, vec![vec![0, 0, 0]]);
    }

    #[test]
    fn partitions_are_distinct_and_complete() {
        for k in 1..=4 {
            for m in 0..=7 {
                let parts = enumerate_partitions(k, m);
                let set: std::collections::HashSet<_> = parts.iter().cloned().collect();
                assert_eq!(set.len(), parts.len());
                assert!(parts.iter().all(|p| p.order() == m && p.counts.len() == k));
                // C(m+k-1, k-1)
                let want = (1..k).fold(1usize, |acc, i| acc * (m + i) / i);
                assert_eq!(parts.len(), want, "k={k} m={m}");
            }
        }
    }

    #[test]
    fn phase_sum_examples() {
        let one = multiset_phase_sum(&[0, 0, 0], &[0.3, 1.7, -2.0]).unwrap();
        assert!((one.value() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let minus = multiset_phase_sum(&[1, 1], &[0.0, PI]).unwrap();
        assert!((minus.value() - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        let plus = multiset_phase_sum(&[1, 1, 1], &[0.0, TAU / 3.0, 2.0 * TAU / 3.0]).unwrap();
        assert!((plus.value() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let zero = multiset_phase_sum(&[0, 1], &[0.0, PI]).unwrap();
        assert!(zero.is_zero());
        assert!(matches!(
            multiset_phase_sum(&[0, 1], &[0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn distinct_arrangements_are_counted_once() {
        // {0,0,1,1}: 4!/(2!2!) = 6 arrangements, all phases zero
        let amp = multiset_phase_sum(&[1, 0, 1, 0], &[0.0; 4]).unwrap();
        assert!((amp.value().re - 6.0).abs() < 1e-12);
    }

    #[test]
    fn pathsum_examples() {
        let g = correlation_pathsum(&equal(2), &[0.0, 0.0]).unwrap();
        assert!((g - 8.0).abs() < 1e-12);
        let g = correlation_pathsum(&equal(1), &[0.4, 1.1, 2.0]).unwrap();
        assert!((g - 6.0).abs() < 1e-12);
        let g = correlation_pathsum(&equal(2), &[FRAC_PI_4, FRAC_PI_4 + PI, 0.0, PI]).unwrap();
        assert!((g - 56.0).abs() < 1e-9);
    }

    #[test]
    fn permanent_examples() {
        let g = correlation_permanent(&equal(2), &[0.0, 0.0]).unwrap();
        assert!((g - 8.0).abs() < 1e-12);
        for m in 1..=7 {
            let deltas: Vec<f64> = (0..m).map(|i| 0.9 * i as f64).collect();
            let g = correlation_permanent(&equal(1), &deltas).unwrap();
            assert!((g - factorial(m)).abs() < 1e-9 * factorial(m));
        }
        let d = [0.7, 2.1, 4.0];
        let a = correlation_pathsum(&equal(2), &d).unwrap();
        let b = correlation_permanent(&equal(2), &d).unwrap();
        assert!((a - b).abs() < 1e-9 * b);
    }

    #[test]
    fn order_errors() {
        assert!(matches!(
            correlation_pathsum(&equal(2), &[]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            correlation_permanent(&equal(2), &[]),
            Err(Error::InvalidArgument(_))
        ));
        let too_many = vec![0.0; 13];
        match correlation_pathsum(&equal(2), &too_many) {
            Err(Error::CapacityExceeded(msg)) => assert!(msg.contains("permanent")),
            other => panic!("{other:?}"),
        }
        assert!(correlation_permanent(&equal(2), &too_many).is_ok());
        assert!(matches!(
            correlation_permanent(&equal(2), &[0.0; 21]),
            Err(Error::CapacityExceeded(_))
        ));
    }

    #[test]
    fn equal_phases_closed_form() {
        // K=2, all deltas equal: Σ n1! n2! C(M; n1)^2
        for m in 1..=8usize {
            let got = correlation_pathsum(&equal(2), &vec![1.3; m]).unwrap();
            let want: f64 = (0..=m)
                .map(|n1| {
                    let c = factorial(m) / (factorial(n1) * factorial(m - n1));
                    factorial(n1) * factorial(m - n1) * c * c
                })
                .sum();
            assert!((got - want).abs() < 1e-9 * want);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sources() -> impl Strategy<Value = SourceArray> {
            (
                1usize..=3,
                prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0]), 3),
            )
                .prop_map(|(k, nb)| {
                    SourceArray::new((0..k as u32).collect(), nb[..k].to_vec()).unwrap()
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn oracles_agree(src in sources(), deltas in prop::collection::vec(0.0f64..TAU, 1..=6)) {
                let a = correlation_pathsum(&src, &deltas).unwrap();
                let b = correlation_permanent(&src, &deltas).unwrap();
                prop_assert!(a >= 0.0 && b >= 0.0);
                prop_assert!((a - b).abs() < 1e-9 * b);
            }

            #[test]
            fn permutation_invariant(src in sources(), mut deltas in prop::collection::vec(0.0f64..TAU, 2..=6), seed in any::<u64>()) {
                let a = correlation_pathsum(&src, &deltas).unwrap();
                let n = deltas.len();
                deltas.swap(0, (seed as usize) % n);
                deltas.reverse();
                let b = correlation_pathsum(&src, &deltas).unwrap();
                prop_assert!((a - b).abs() < 1e-9 * a);
            }

            #[test]
            fn two_pi_periodic(src in sources(), deltas in prop::collection::vec(0.0f64..TAU, 1..=5), idx in 0usize..5, turns in -3i32..=3) {
                let mut shifted = deltas.clone();
                let i = idx % deltas.len();
                shifted[i] += TAU * turns as f64;
                let a = correlation_pathsum(&src, &deltas).unwrap();
                let b = correlation_pathsum(&src, &shifted).unwrap();
                prop_assert!((a - b).abs() < 1e-9 * a);
            }
        }
    }
}
