use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DiffError, Matrix};
use crate::Scalar;

/// Xavier (Glorot) normal initialization: i.i.d. `N(0, 2/(rows+cols))`.
pub fn xavier_init<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Result<Matrix<T>, DiffError> {
    xavier_normal(&mut ChaCha8Rng::seed_from_u64(seed), rows, cols)
}

/// Same as [`xavier_init`], drawing from a caller-owned generator.
pub fn xavier_normal<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
) -> Result<Matrix<T>, DiffError> {
    if rows == 0 || cols == 0 {
        return Err(DiffError::ZeroDimension { rows, cols });
    }
    let std = (2.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(z * std)
        })
        .collect();
    Matrix::from_vec(rows, cols, data)
}
