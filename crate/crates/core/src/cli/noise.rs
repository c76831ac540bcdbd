use crate::fracops::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adds i.i.d. uniform noise on [−A, A], A = level·max|values|. The
/// realization depends only on `seed` and the length of the input.
pub fn perturb(values: &[f64], level: f64, seed: u64) -> Vec<f64> {
    if level == 0.0 {
        return values.to_vec();
    }
    let amp = level * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values.iter().map(|v| v + amp * rng.gen_range(-1.0..=1.0)).collect()
}

pub fn add_noise(series: &TimeSeries, level: f64, seed: u64) -> TimeSeries {
    TimeSeries::new(*series.grid(), perturb(series.values(), level, seed)).expect("length preserved")
}
