//! Synthetic dataset generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Offset applied along the class-specific axis when sampling the
/// two-dimensional synthetic classes.
pub const SYNTHETIC2D_SHIFT: f64 = 3.0;

/// Samples the two-dimensional benchmark: a standard normal shifted along
/// the first dimension for class 1 and along the second for class 2.
/// Classes are exactly balanced (first `n/2 + n%2` rows are class 1 before
/// the deterministic shuffle).
pub fn synthetic2d(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = n / 2 + n % 2;
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut ys: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let z = [standard_normal(&mut rng), standard_normal(&mut rng)];
        if i < n1 {
            xs.push(vec![z[0] + SYNTHETIC2D_SHIFT, z[1]]);
            ys.push(1.0);
        } else {
            xs.push(vec![z[0], z[1] + SYNTHETIC2D_SHIFT]);
            ys.push(2.0);
        }
    }
    // Fisher-Yates with the same generator keeps the file deterministic.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        xs.swap(i, j);
        ys.swap(i, j);
    }
    (xs, ys)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
}
