#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sle0::Configuration;

/// Configuration with `2n` points and gaps drawn uniformly from `[0.5, 2]`,
/// shifted so that the points are roughly centred.
pub fn random_configuration(rng: &mut ChaCha8Rng, n: usize) -> Configuration {
    let mut x = Vec::with_capacity(2 * n);
    let mut v = rng.gen_range(-1.0..1.0);
    for _ in 0..2 * n {
        x.push(v);
        v += rng.gen_range(0.5..2.0);
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    Configuration::new(x.into_iter().map(|t| t - mean + 0.1).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_configurations(seed: u64, n: usize, count: usize) -> Vec<Configuration> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| random_configuration(&mut r, n))
        .collect()
}
