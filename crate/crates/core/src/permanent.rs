//! Matrix permanent by Ryser's inclusion–exclusion formula, visiting the
//! column subsets in Gray-code order so each step updates the row sums with a
//! single column instead of recomputing them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest dimension accepted; the cost is `O(2^n · n)`.
pub const MAX_PERMANENT_DIM: usize = 20;

pub fn permanent(matrix: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "permanent needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if n > MAX_PERMANENT_DIM {
        return Err(Error::CapacityExceeded(format!(
            "permanent of a {n}x{n} matrix exceeds the limit of {MAX_PERMANENT_DIM}"
        )));
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }

    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u32 = 0;
    for k in 1u32..(1u32 << n) {
        let col = k.trailing_zeros() as usize;
        gray ^= 1 << col;
        if gray & (1 << col) != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += matrix[(i, col)];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= matrix[(i, col)];
            }
        }
        let prod = row_sums
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}
