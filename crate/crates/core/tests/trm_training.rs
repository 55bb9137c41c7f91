use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use toposcale::trm::synthetic::separable_suite;
use toposcale::trm::{
    combined_loss, evaluate_set, grad, train, Batch, FeatureConfig, FeatureVector, LossWeights,
    PairItem, RegressionItem, TrainingConfig, TrmModel,
};

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> FeatureVector {
    FeatureVector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_items(
    dim: usize,
    n_reg: usize,
    n_pairs: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<RegressionItem>, Vec<PairItem>) {
    let reg = (0..n_reg)
        .map(|_| RegressionItem {
            features: random_vector(dim, rng),
            target: rng.gen_range(0.0..1.0),
        })
        .collect();
    let pairs = (0..n_pairs)
        .map(|_| PairItem {
            preferred: random_vector(dim, rng),
            dispreferred: random_vector(dim, rng),
        })
        .collect();
    (reg, pairs)
}

/// Central differences with step `eps` on every parameter.
fn numeric_gradient(model: &TrmModel, batch: &Batch<'_>, w: &LossWeights, eps: f64) -> Vec<f64> {
    let mut m = model.clone();
    (0..model.params.len())
        .map(|i| {
            let orig = m.params.get(i);
            *m.params.get_mut(i) = orig + eps;
            let up = combined_loss(&m, batch, w).unwrap();
            *m.params.get_mut(i) = orig - eps;
            let down = combined_loss(&m, batch, w).unwrap();
            *m.params.get_mut(i) = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for draw in 0..20 {
        let cfg = FeatureConfig { hash_dim: 9 };
        let hidden = rng.gen_range(2..=6);
        let mut model = TrmModel::seeded(cfg, hidden, draw);
        // larger weights push tanh and sigmoid away from their linear regime
        for i in 0..model.params.len() {
            *model.params.get_mut(i) = rng.gen_range(-0.8..0.8);
        }
        let (reg, pairs) = random_items(cfg.dim(), rng.gen_range(1..5), rng.gen_range(1..5), &mut rng);
        let batch = Batch::new(&reg, &pairs);
        let w = LossWeights {
            beta: rng.gen_range(0.5..2.0),
            lambda_mse: rng.gen_range(0.1..2.0),
            lambda_rank: rng.gen_range(0.1..2.0),
        };
        let (loss, g) = grad(&model, &batch, &w).unwrap();
        assert!((loss - combined_loss(&model, &batch, &w).unwrap()).abs() < 1e-12);
        let numeric = numeric_gradient(&model, &batch, &w, 1e-5);
        for (i, n) in numeric.iter().enumerate() {
            let a = g.get(i);
            let scale = a.abs().max(n.abs());
            if scale < 1e-10 {
                continue;
            }
            let rel = (a - n).abs() / scale;
            assert!(rel < 1e-5, "draw {draw} param {i}: analytic {a} numeric {n} rel {rel}");
        }
    }
}

fn suite_config() -> TrainingConfig {
    TrainingConfig {
        hash_dim: 64,
        hidden: 16,
        epochs: 60,
        learning_rate: 0.5,
        ..Default::default()
    }
}

#[test]
fn separable_suite_is_learned_and_generalizes() {
    let cfg = suite_config();
    let fc = cfg.feature_config();
    let train_set = separable_suite(&fc, 600, 600, 1);
    let held_out = separable_suite(&fc, 300, 300, 2);
    let out = train(&train_set, &cfg).unwrap();
    let first = out.loss_trace[0];
    let last = *out.loss_trace.last().unwrap();
    assert!(last < first, "loss did not decrease: {first} -> {last}");
    let eval = evaluate_set(&out.model, &held_out).unwrap();
    assert!(eval.pairwise_accuracy.unwrap() >= 0.95, "{eval:?}");
    assert!(eval.spearman_rho.unwrap() >= 0.9, "{eval:?}");
}

#[test]
fn zero_model_scores_every_pair_as_a_tie() {
    let fc = FeatureConfig { hash_dim: 32 };
    let set = separable_suite(&fc, 10, 50, 3);
    let eval = evaluate_set(&TrmModel::zeros(fc, 4), &set).unwrap();
    assert_eq!(eval.pairwise_accuracy, Some(0.5));
    // constant regression output has no rank variance
    assert_eq!(eval.spearman_rho, None);
}

#[test]
fn training_is_bitwise_reproducible() {
    let cfg = TrainingConfig {
        epochs: 5,
        ..suite_config()
    };
    let set = separable_suite(&cfg.feature_config(), 100, 100, 4);
    let a = train(&set, &cfg).unwrap();
    let b = train(&set, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.loss_trace, b.loss_trace);
    let other = train(&set, &TrainingConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.model, other.model);
}

#[test]
fn diverging_learning_rate_is_reported() {
    let cfg = TrainingConfig {
        learning_rate: f64::MAX,
        epochs: 10,
        ..suite_config()
    };
    let set = separable_suite(&cfg.feature_config(), 50, 50, 5);
    let r = train(&set, &cfg);
    assert!(
        matches!(r, Err(toposcale::Error::NonFiniteLoss { .. })),
        "{:?}",
        r.map(|o| o.loss_trace)
    );
}
