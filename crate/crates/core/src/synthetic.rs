//! Seeded synthetic datasets with known structure, used by the test
//! harnesses and handy for trying the CLI without real traffic data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;

/// `informative` uniform features whose centered sum decides the label,
/// plus `noise` independent uniform features. Samples whose centered sum
/// lies within `margin` of zero are redrawn, so the classes are linearly
/// separable with a gap. Planted features are named `planted{k}`, noise
/// features `noise{k}`; the two groups are interleaved in column order.
pub fn planted(n: usize, informative: usize, noise: usize, margin: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = informative + noise;
    let mut columns = vec![Vec::with_capacity(n); width];
    let mut labels = Vec::with_capacity(n);
    while labels.len() < n {
        let planted: Vec<f64> = (0..informative).map(|_| rng.random()).collect();
        let sum: f64 = planted.iter().map(|v| v - 0.5).sum();
        if sum.abs() < margin {
            continue;
        }
        for (k, v) in planted.into_iter().enumerate() {
            columns[k].push(v);
        }
        for col in columns.iter_mut().skip(informative) {
            col.push(rng.random());
        }
        labels.push(u8::from(sum > 0.0));
    }
    let (names, columns) = interleave(informative, noise, columns);
    Dataset::new(names, columns, labels).expect("well-formed synthetic data")
}

fn interleave(informative: usize, noise: usize, columns: Vec<Vec<f64>>) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut named: Vec<(usize, String, Vec<f64>)> = columns
        .into_iter()
        .enumerate()
        .map(|(k, col)| {
            if k < informative {
                // spread planted columns evenly through the noise
                let slot = k * (informative + noise) / informative.max(1);
                (slot * 2 + 1, format!("planted{k}"), col)
            } else {
                let j = k - informative;
                (j * (informative + noise) / noise.max(1) * 2, format!("noise{j}"), col)
            }
        })
        .collect();
    named.sort_by_key(|(pos, name, _)| (*pos, name.clone()));
    named.into_iter().map(|(_, name, col)| (name, col)).unzip()
}

/// `dim` features in (0, 1) driven by a `rank`-dimensional latent factor
/// through a random linear map and a sigmoid, plus a little noise. The label
/// is the sign of the first latent coordinate.
pub fn latent(n: usize, dim: usize, rank: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mixing: Vec<f64> = (0..dim * rank).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut columns = vec![Vec::with_capacity(n); dim];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (d, col) in columns.iter_mut().enumerate() {
            let a: f64 = (0..rank).map(|r| mixing[d * rank + r] * z[r]).sum();
            let jitter = noise * rng.random_range(-1.0..1.0);
            col.push(1.0 / (1.0 + (-(a + jitter)).exp()));
        }
        labels.push(u8::from(z[0] > 0.0));
    }
    let names = (0..dim).map(|d| format!("x{d}")).collect();
    Dataset::new(names, columns, labels).expect("well-formed synthetic data")
}
