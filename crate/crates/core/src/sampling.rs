//! Seeded sampling helpers shared by the builders, checks and sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::objective::Point;

/// Independent generator for `stream` under a base `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform sample from the open ball `B(center, radius)`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, center: &Point, radius: f64) -> Point {
    let k = center.len();
    loop {
        let dir = Point::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let scale = radius * u.powf(1.0 / k as f64) / norm;
        return center + dir * scale;
    }
}

/// Uniform sample from the box `[lower, upper]`; degenerate axes return the bound.
pub fn uniform_in_box<R: Rng + ?Sized>(rng: &mut R, lower: &[f64], upper: &[f64]) -> Point {
    Point::from_iterator(
        lower.len(),
        lower.iter().zip(upper).map(|(&lo, &hi)| {
            let u: f64 = rng.random();
            lo + (hi - lo) * u
        }),
    )
}
