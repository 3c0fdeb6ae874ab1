//! Inverted dropout with counter-based masks.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::unit_at;
use crate::scalar::Real;

use super::Mode;

/// Train mode zeroes each element with probability `p` and scales survivors
/// by 1/(1-p); eval mode is the identity. The mask is a pure function of
/// `mask_key`, so a forward pass can be replayed exactly.
///
/// Returns the output and, in train mode, the scaled mask used (survivors
/// hold 1/(1-p), dropped elements hold 0) for the backward pass.
pub fn dropout_forward<T: Real>(
    input: &Matrix<T>,
    p: f64,
    mode: Mode,
    mask_key: u64,
) -> Result<(Matrix<T>, Option<Matrix<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((input.clone(), None));
    }
    let scale = T::of(1.0 / (1.0 - p));
    let mut mask = Matrix::zeros(input.rows(), input.cols());
    for (i, m) in mask.data_mut().iter_mut().enumerate() {
        if unit_at(mask_key, i as u64) >= p {
            *m = scale;
        }
    }
    Ok((input.hadamard(&mask), Some(mask)))
}
