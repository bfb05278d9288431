//! Closed-form correlation functions for two equal thermal sources.
//!
//! Setup 1 places `M/2` detectors on the magic positions and `M/2` on the
//! magic positions shifted by the scan phase `δ₁`. Setup 2 keeps `m2`
//! detectors on the magic positions and stacks `m1` detectors at `δ₁`. In both
//! cases the curve has the form `c1 + s·c2·cos(f·δ₁)`; the integer
//! coefficients are kept exact and only converted to `f64` on evaluation.
//! Values are in units of `n̄^M`.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{invalid, Error, Result};

pub fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    // exact at every step: the running value is C(n-k+i, i)
    (1..=k as u64).fold(BigUint::one(), |acc, i| acc * (n as u64 - k as u64 + i) / i)
}

fn to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// A curve `c1 + parity·c2·cos(frequency·δ₁)` with exact integer coefficients.
pub trait CosineModel {
    fn c1(&self) -> &BigUint;
    fn c2(&self) -> &BigUint;
    fn frequency(&self) -> usize;
    fn parity_sign(&self) -> i32;

    fn eval(&self, delta1: f64) -> f64 {
        to_f64(self.c1())
            + self.parity_sign() as f64
                * to_f64(self.c2())
                * (self.frequency() as f64 * delta1).cos()
    }

    /// `c2 / c1` as an exact reduced fraction.
    fn visibility_exact(&self) -> BigRational {
        BigRational::new(self.c2().clone().into(), self.c1().clone().into())
    }

    fn visibility(&self) -> f64 {
        ratio_to_f64(&self.visibility_exact())
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Coefficients of the setup-1 curve of order `M`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setup1Coefficients {
    pub order: usize,
    pub c1: BigUint,
    pub c2: BigUint,
}

impl CosineModel for Setup1Coefficients {
    fn c1(&self) -> &BigUint {
        &self.c1
    }
    fn c2(&self) -> &BigUint {
        &self.c2
    }
    fn frequency(&self) -> usize {
        self.order / 2
    }
    fn parity_sign(&self) -> i32 {
        1
    }
}

/// Coefficients of the setup-2 curve for `m1` co-located moving detectors and
/// `m2` magic positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setup2Coefficients {
    pub c1: BigUint,
    pub c2: BigUint,
    pub m1: usize,
    pub m2: usize,
    pub parity_sign: i32,
}

impl CosineModel for Setup2Coefficients {
    fn c1(&self) -> &BigUint {
        &self.c1
    }
    fn c2(&self) -> &BigUint {
        &self.c2
    }
    fn frequency(&self) -> usize {
        self.m2
    }
    fn parity_sign(&self) -> i32 {
        self.parity_sign
    }
}

fn check_setup1_order(m: usize) -> Result<()> {
    if m == 0 || m % 2 == 1 {
        return invalid(format!("setup 1 needs an even positive order, got {m}"));
    }
    Ok(())
}

pub fn setup1_coeffs(m: usize) -> Result<Setup1Coefficients> {
    check_setup1_order(m)?;
    let half = factorial(m / 2);
    let sq = &half * &half;
    let c2 = &sq * 2u32;
    let c1 = &c2 * (binomial(m, m / 2) + 1u32);
    Ok(Setup1Coefficients { order: m, c1, c2 })
}

/// `2[(M/2)!]²{C(M, M/2) + 1 + cos((M/2)δ₁)}`.
pub fn setup1_g(m: usize, delta1: f64) -> Result<f64> {
    Ok(setup1_coeffs(m)?.eval(delta1))
}

/// `[(M/2)!]² / ([(M/2)!]² + M!)`, exactly.
pub fn setup1_visibility_exact(m: usize) -> Result<BigRational> {
    check_setup1_order(m)?;
    let half = factorial(m / 2);
    let sq = &half * &half;
    let den = &sq + factorial(m);
    Ok(BigRational::new(sq.into(), den.into()))
}

pub fn setup1_visibility(m: usize) -> Result<f64> {
    Ok(ratio_to_f64(&setup1_visibility_exact(m)?))
}

pub fn setup2_coeffs(m1: usize, m2: usize) -> Result<Setup2Coefficients> {
    if m1 == 0 || m2 == 0 {
        return invalid(format!("setup 2 needs m1, m2 >= 1 (got m1={m1}, m2={m2})"));
    }
    let sum = (0..=m1).fold(BigUint::zero(), |acc, k| {
        acc + binomial(m1, k) * binomial(m2 + k, k)
    });
    let c1 = factorial(m1) * factorial(m2) * sum * 2u32;
    let c2 = if m1 >= m2 {
        let f = factorial(m1);
        (BigUint::one() << (m1 - m2 + 1)) * &f * &f / factorial(m1 - m2)
    } else {
        BigUint::zero()
    };
    let parity_sign = if m2 % 2 == 1 { 1 } else { -1 };
    Ok(Setup2Coefficients {
        c1,
        c2,
        m1,
        m2,
        parity_sign,
    })
}

/// `c1 + (−1)^{m2−1}·c2·cos(m2·δ₁)`. Constant when `m1 < m2`.
pub fn setup2_g(m1: usize, m2: usize, delta1: f64) -> Result<f64> {
    Ok(setup2_coeffs(m1, m2)?.eval(delta1))
}

pub fn setup2_visibility_exact(m1: usize, m2: usize) -> Result<BigRational> {
    Ok(setup2_coeffs(m1, m2)?.visibility_exact())
}

pub fn setup2_visibility(m1: usize, m2: usize) -> Result<f64> {
    Ok(setup2_coeffs(m1, m2)?.visibility())
}

/// Search bound for [`crossover_threshold`].
pub const MAX_THRESHOLD_SEARCH: usize = 256;

/// Smallest `m1` for which setup 2 with `m2` fixed detectors beats the
/// visibility of setup 1 at the same modulation frequency (order `2·m2`).
pub fn crossover_threshold(m2: usize) -> Result<usize> {
    if m2 < 2 {
        return invalid(format!("crossover threshold needs m2 >= 2, got {m2}"));
    }
    let target = setup1_visibility_exact(2 * m2)?;
    for m1 in 1..=MAX_THRESHOLD_SEARCH {
        if setup2_visibility_exact(m1, m2)? > target {
            return Ok(m1);
        }
    }
    Err(Error::CapacityExceeded(format!(
        "no crossover for m2={m2} within m1 <= {MAX_THRESHOLD_SEARCH}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn frac(a: u64, b: u64) -> BigRational {
        BigRational::new(BigUint::from(a).into(), BigUint::from(b).into())
    }

    #[test]
    fn combinatorics() {
        assert_eq!(factorial(0), BigUint::one());
        assert_eq!(factorial(20), BigUint::from(2_432_902_008_176_640_000u64));
        assert_eq!(binomial(10, 5), BigUint::from(252u32));
        assert_eq!(binomial(3, 5), BigUint::zero());
        assert_eq!(binomial(40, 20), BigUint::from(137_846_528_820u64));
    }

    #[test]
    fn setup1_examples() {
        assert_eq!(setup1_g(2, 0.0).unwrap(), 8.0);
        assert_eq!(setup1_g(4, PI / 2.0).unwrap(), 48.0);
        assert_eq!(setup1_g(4, 0.0).unwrap(), 64.0);
        assert!(setup1_g(3, 0.0).is_err());
        assert!(setup1_g(0, 0.0).is_err());
    }

    #[test]
    fn setup1_visibilities() {
        assert_eq!(setup1_visibility_exact(2).unwrap(), frac(1, 3));
        assert_eq!(setup1_visibility_exact(4).unwrap(), frac(1, 7));
        assert_eq!(setup1_visibility_exact(6).unwrap(), frac(1, 21));
        assert_eq!(setup1_visibility_exact(8).unwrap(), frac(576, 40896));
        assert_eq!(setup1_visibility_exact(10).unwrap(), frac(14400, 3_643_200));
        assert!(setup1_visibility(5).is_err());
        // amplitude over offset matches the closed-form ratio
        for m in (2..=12).step_by(2) {
            assert_eq!(
                setup1_coeffs(m).unwrap().visibility_exact(),
                setup1_visibility_exact(m).unwrap()
            );
        }
    }

    #[test]
    fn setup2_examples() {
        let c = setup2_coeffs(2, 2).unwrap();
        assert_eq!(c.c1, BigUint::from(104u32));
        assert_eq!(c.c2, BigUint::from(8u32));
        assert_eq!(c.parity_sign, -1);
        let c = setup2_coeffs(1, 2).unwrap();
        assert!(c.c2.is_zero());
        let c = setup2_coeffs(4, 3).unwrap();
        assert_eq!(c.c1, BigUint::from(55296u32));
        assert_eq!(c.c2, BigUint::from(2304u32));
        assert_eq!(c.visibility_exact(), frac(1, 24));
        assert!(setup2_coeffs(0, 2).is_err());
        assert!(setup2_coeffs(2, 0).is_err());

        assert_eq!(setup2_g(2, 2, 0.0).unwrap(), 96.0);
        assert!((setup2_g(2, 2, PI / 2.0).unwrap() - 112.0).abs() < 1e-12);
        let c = setup2_coeffs(3, 3).unwrap();
        let want = (&c.c1 + &c.c2).to_f64().unwrap();
        assert_eq!(setup2_g(3, 3, 0.0).unwrap(), want);
    }

    #[test]
    fn setup2_m2_equals_two_closed_form() {
        // 2^{m1-1} m1! [m1^2 + 7 m1 + 8 - m1(m1-1) cos 2δ]
        for m1 in 1..=10usize {
            let c = setup2_coeffs(m1, 2).unwrap();
            let pre = (BigUint::one() << (m1 - 1)) * factorial(m1);
            assert_eq!(c.c1, &pre * (m1 * m1 + 7 * m1 + 8));
            assert_eq!(c.c2, &pre * (m1 * (m1 - 1)));
            assert_eq!(
                c.visibility_exact(),
                frac((m1 * (m1 - 1)) as u64, (m1 * m1 + 7 * m1 + 8) as u64)
            );
        }
    }

    #[test]
    fn setup2_visibility_examples() {
        assert_eq!(setup2_visibility_exact(2, 2).unwrap(), frac(1, 13));
        assert_eq!(setup2_visibility_exact(3, 2).unwrap(), frac(3, 19));
        assert!(setup2_visibility(3, 2).unwrap() > 1.0 / 7.0);
        let v = setup2_visibility(5, 3).unwrap();
        assert!((v - 0.0725).abs() < 5e-5, "{v}");
        assert!(v > 1.0 / 21.0);
    }

    #[test]
    fn thresholds() {
        assert_eq!(crossover_threshold(2).unwrap(), 3);
        assert_eq!(crossover_threshold(3).unwrap(), 5);
        assert_eq!(crossover_threshold(4).unwrap(), 6);
        assert_eq!(crossover_threshold(5).unwrap(), 7);
        assert!(setup2_visibility_exact(2, 2).unwrap() < setup1_visibility_exact(4).unwrap());
        assert!(crossover_threshold(1).is_err());
    }

    #[test]
    fn monotonicity() {
        for m2 in 2..=10 {
            for m1 in m2..10 {
                assert!(
                    setup2_visibility_exact(m1 + 1, m2).unwrap()
                        > setup2_visibility_exact(m1, m2).unwrap(),
                    "m1={m1} m2={m2}"
                );
            }
        }
        for m in (2..12).step_by(2) {
            assert!(setup1_visibility_exact(m + 2).unwrap() < setup1_visibility_exact(m).unwrap());
        }
    }

    #[test]
    fn c1_exceeds_c2() {
        for m2 in 1..=8 {
            for m1 in 1..=12 {
                let c = setup2_coeffs(m1, m2).unwrap();
                assert!(c.c1 > c.c2);
                assert!(c.visibility() < 1.0 && c.visibility() >= 0.0);
            }
        }
    }

    #[test]
    fn curves_are_even_and_periodic() {
        for &(m1, m2) in &[(2, 2), (4, 3), (5, 2), (1, 3)] {
            let p = 2.0 * PI / m2 as f64;
            for &d in &[0.1, 0.77, 2.3] {
                let g = setup2_g(m1, m2, d).unwrap();
                assert!((g - setup2_g(m1, m2, -d).unwrap()).abs() < 1e-9 * g);
                assert!((g - setup2_g(m1, m2, d + p).unwrap()).abs() < 1e-9 * g);
            }
        }
        for m in [2, 4, 6] {
            let p = 2.0 * PI / (m / 2) as f64;
            let g = setup1_g(m, 0.4).unwrap();
            assert!((g - setup1_g(m, 0.4 + p).unwrap()).abs() < 1e-9 * g);
            assert!((g - setup1_g(m, -0.4).unwrap()).abs() < 1e-9 * g);
        }
        let flat = setup2_g(1, 2, 0.0).unwrap();
        assert_eq!(flat, setup2_g(1, 2, 1.234).unwrap());
    }
}
