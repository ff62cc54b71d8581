use ndarray::Array2;
use rand::Rng as _;

use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Inverted-dropout mask: each entry is kept with probability `1 - p_drop`
/// and kept entries are scaled by `1 / (1 - p_drop)`, so every entry has
/// expectation 1.
pub fn dropout_mask(shape: (usize, usize), p_drop: f64, seed: u64) -> Result<Array2<f64>> {
    dropout_mask_with(&mut rng::seeded(seed, rng::stream::DROPOUT), shape, p_drop)
}

pub fn dropout_mask_with(rng: &mut Rng, shape: (usize, usize), p_drop: f64) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(Error::param(format!("dropout probability {p_drop} outside [0, 1)")));
    }
    if p_drop == 0.0 {
        return Ok(Array2::ones(shape));
    }
    let keep = 1.0 / (1.0 - p_drop);
    Ok(Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < p_drop {
            0.0
        } else {
            keep
        }
    }))
}
