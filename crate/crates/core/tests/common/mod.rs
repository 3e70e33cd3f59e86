#![allow(dead_code)]

use medmesh::FeatureMap;
use rand::{Rng, SeedableRng};

pub mod gradcheck;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_features(rng: &mut impl Rng, channels: usize, edges: usize) -> FeatureMap {
    let data = (0..channels * edges)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    FeatureMap::from_vec(channels, edges, data).unwrap()
}

/// `Σ r ⊙ y`, a scalar probe whose gradient with respect to `y` is `r`.
pub fn probe(y: &FeatureMap, r: &FeatureMap) -> f64 {
    (y.array() * r.array()).sum()
}

/// `|a - n| / max(|a| + |n|, floor)`
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(floor)
}

/// Worst relative error between `analytic[i]` and the central difference of
/// `f` around `x` along coordinate `i`, for every `i` in `coords`.
pub fn worst_fd_error(
    x: &[f64],
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    floor: f64,
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for &i in coords {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(analytic[i], numeric, floor));
    }
    worst
}

/// Up to `k` distinct coordinates out of `n`, always including the first and last.
pub fn pick_coords(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut v: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
    v.push(0);
    v.push(n - 1);
    v.sort_unstable();
    v.dedup();
    v
}
