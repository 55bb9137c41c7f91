//! Feature-space training suites with a known answer.
//!
//! Each item carries random sparse noise in the hashed block and a random
//! topology one-hot. The regression target is a fixed sigmoid of one
//! structural coordinate; pair preference is decided by another.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureConfig, FeatureVector};
use super::loss::{PairItem, RegressionItem};
use super::model::sigmoid;
use super::train::TrainingSet;

/// Coordinates carrying the planted signals.
#[derive(Clone, Copy, Debug)]
pub struct SignalCoordinates {
    pub regression: usize,
    pub ranking: usize,
}

pub fn signal_coordinates(cfg: &FeatureConfig) -> SignalCoordinates {
    SignalCoordinates {
        regression: cfg.structural_offset(),
        ranking: cfg.structural_offset() + 1,
    }
}

/// `sigmoid(4 s - 2)` for the regression signal `s` in `[0, 1]`.
pub fn planted_target(signal: f64) -> f64 {
    sigmoid(4.0 * signal - 2.0)
}

fn noise_vector(cfg: &FeatureConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = vec![0.0; cfg.dim()];
    let active = 12.min(cfg.hash_dim);
    for _ in 0..active {
        let i = rng.gen_range(0..cfg.hash_dim);
        v[i] += if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    }
    let norm = v[..cfg.hash_dim].iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v[..cfg.hash_dim].iter_mut().for_each(|x| *x /= norm);
    }
    v[cfg.one_hot_offset() + rng.gen_range(0..3)] = 1.0;
    for k in 0..4 {
        v[cfg.structural_offset() + k] = rng.gen_range(0.0..1.0);
    }
    v
}

/// `n_regression` items and `n_pairs` pairs. In every pair the preferred
/// vector's ranking coordinate exceeds the dispreferred one's by at least 0.1.
pub fn separable_suite(
    cfg: &FeatureConfig,
    n_regression: usize,
    n_pairs: usize,
    seed: u64,
) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sig = signal_coordinates(cfg);
    let regression = (0..n_regression)
        .map(|_| {
            let v = noise_vector(cfg, &mut rng);
            let target = planted_target(v[sig.regression]);
            RegressionItem {
                features: FeatureVector::new(v).expect("finite"),
                target,
            }
        })
        .collect();
    let pairs = (0..n_pairs)
        .map(|_| {
            let mut a = noise_vector(cfg, &mut rng);
            let mut b = noise_vector(cfg, &mut rng);
            let lo = rng.gen_range(0.0..0.9);
            let hi = rng.gen_range(lo + 0.1..1.0);
            a[sig.ranking] = hi;
            b[sig.ranking] = lo;
            PairItem {
                preferred: FeatureVector::new(a).expect("finite"),
                dispreferred: FeatureVector::new(b).expect("finite"),
            }
        })
        .collect();
    TrainingSet { regression, pairs }
}
