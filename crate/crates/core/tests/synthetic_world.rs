//! Recovery of planted structure from mock-generated data.

use toposcale::competition::{
    evaluate_strategy, Aggregate, PlantedScorer, StrategyRegistry, StrategyReport,
};
use toposcale::dataset::Dataset;
use toposcale::generation::{plant_world, simulate_dataset, synthetic_problems, SyntheticWorld};
use toposcale::tag::{compute_win_rates, segment_difficulty, tier_counts, SegmentationConfig};
use toposcale::trm::{FeatureConfig, TrmModel};
use toposcale::{DifficultyTier, GenerationParams, PerTopology, Topology};

fn params(n: u32) -> GenerationParams {
    GenerationParams {
        samples_per_topology: n,
        ..Default::default()
    }
}

fn world(profile: &str, problems: usize, n: u32, seed: u64) -> (SyntheticWorld, Dataset) {
    let qs = synthetic_problems(problems, seed);
    let w = plant_world(&qs, profile, seed).unwrap();
    let d = simulate_dataset(&w, &qs, &params(n), seed).unwrap();
    (w, d)
}

#[test]
fn topo_labels_converge_to_planted_probabilities() {
    let (w, d) = world("uniform", 60, 500, 2024);
    let mut total = 0.0;
    for a in &d.annotations {
        for t in Topology::ALL {
            assert_eq!(a.n_total(t), 500);
            total += (a.topo_labels[t] - w.entries[&a.problem_id].p[t]).abs();
        }
    }
    let mad = total / (3.0 * d.annotations.len() as f64);
    assert!(mad <= 0.03, "mean absolute deviation {mad}");
}

#[test]
fn win_rates_recover_planted_preference_shares() {
    let (w, d) = world("topology-skewed", 60, 200, 2024);
    let mut planted = PerTopology::from_fn(|_| 0.0);
    for e in w.entries.values() {
        planted[e.preferred.unwrap()] += 1.0 / 60.0;
    }
    let observed = compute_win_rates(&d.annotations).unwrap();
    for t in Topology::ALL {
        assert!(
            (observed[t] - planted[t]).abs() <= 0.08,
            "{t}: observed {} planted {}",
            observed[t],
            planted[t]
        );
    }
}

fn strategy_table(d: &Dataset, w: &SyntheticWorld) -> Vec<StrategyReport> {
    let scorer = PlantedScorer { world: w };
    let reg = StrategyRegistry::default();
    ["fixed-cot", "fixed-tot", "fixed-got", "rewarding", "oracle"]
        .iter()
        .map(|name| {
            let s = reg.build(name, Some(&scorer), Aggregate::Mean).unwrap();
            evaluate_strategy(d, s.as_ref()).unwrap()
        })
        .collect()
}

#[test]
fn planted_rewarding_beats_fixed_and_tracks_oracle() {
    let (w, d) = world("topology-skewed", 60, 500, 2024);
    let table = strategy_table(&d, &w);
    let acc: Vec<f64> = table.iter().map(|r| r.report.overall_accuracy).collect();
    let (fixed, rewarding, oracle) = (&acc[..3], acc[3], acc[4]);
    for &f in fixed {
        assert!(rewarding >= f + 0.03, "rewarding {rewarding} vs fixed {f}");
        assert!(oracle >= f);
    }
    assert!((oracle - rewarding).abs() <= 0.02, "oracle {oracle} rewarding {rewarding}");
    // picking the reference answer among correct candidates never misses
    assert!(table[3].report.answer_accuracy.unwrap() > 0.99);
}

#[test]
fn fixed_accuracy_is_mean_planted_probability() {
    let (w, d) = world("uniform", 60, 500, 7);
    let table = strategy_table(&d, &w);
    for (i, t) in Topology::ALL.iter().enumerate() {
        let planted = w.entries.values().map(|e| e.p[*t]).sum::<f64>() / 60.0;
        let got = table[i].report.overall_accuracy;
        // 60 x 500 Bernoulli draws: sd of the mean is below 0.003
        assert!((got - planted).abs() < 0.015, "{t}: {got} vs {planted}");
    }
}

#[test]
fn random_weights_rewarding_stays_within_fixed_band() {
    let (_, d) = world("topology-skewed", 60, 200, 11);
    let model = TrmModel::seeded(FeatureConfig::default(), 16, 99);
    let reg = StrategyRegistry::default();
    let fixed: Vec<f64> = ["fixed-cot", "fixed-tot", "fixed-got"]
        .iter()
        .map(|n| {
            let s = reg.build(n, None, Aggregate::Mean).unwrap();
            evaluate_strategy(&d, s.as_ref()).unwrap().report.overall_accuracy
        })
        .collect();
    let s = reg.build("rewarding", Some(&model), Aggregate::Mean).unwrap();
    let r = evaluate_strategy(&d, s.as_ref()).unwrap().report.overall_accuracy;
    let lo = fixed.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fixed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(r >= lo - 0.05 && r <= hi + 0.05, "{r} outside [{lo}, {hi}]");
}

#[test]
fn tuned_world_lifts_rewarding_accuracy() {
    let qs = synthetic_problems(60, 5);
    let base = plant_world(&qs, "topology-skewed", 5).unwrap();
    let tuned = base.tuned(0.2).unwrap();
    let run = |w: &SyntheticWorld| {
        let d = simulate_dataset(w, &qs, &params(200), 5).unwrap();
        let scorer = PlantedScorer { world: w };
        let s = StrategyRegistry::default()
            .build("rewarding", Some(&scorer), Aggregate::Mean)
            .unwrap();
        evaluate_strategy(&d, s.as_ref()).unwrap().report.overall_accuracy
    };
    assert!(run(&tuned) > run(&base) + 0.05);
}

fn recall(d: &Dataset, w: &SyntheticWorld, cfg: &SegmentationConfig, tier: DifficultyTier) -> f64 {
    let seg = segment_difficulty(&d.annotations, cfg).unwrap();
    let planted: Vec<&str> = w
        .entries
        .iter()
        .filter(|(_, e)| e.band == Some(tier))
        .map(|(id, _)| id.as_str())
        .collect();
    let hit = seg
        .iter()
        .filter(|a| a.difficulty == Some(tier) && planted.contains(&a.problem_id.as_str()))
        .count();
    hit as f64 / planted.len() as f64
}

#[test]
fn graded_world_segmentation_is_precise_but_quantile_bounded() {
    let (w, d) = world("difficulty-graded", 60, 200, 2024);
    let cfg = SegmentationConfig::default();
    let seg = segment_difficulty(&d.annotations, &cfg).unwrap();
    for a in &seg {
        let band = w.entries[&a.problem_id].band.unwrap();
        match a.difficulty.unwrap() {
            DifficultyTier::Hard => assert_eq!(band, DifficultyTier::Hard),
            DifficultyTier::Easy => assert_eq!(band, DifficultyTier::Easy),
            DifficultyTier::Medium => {}
        }
    }
    // Strictly below the 0.25-quantile of 60 values leaves at most 15
    // problems per topology, so a 20-problem band can be recalled at 0.75.
    let counts = tier_counts(&seg);
    assert!(counts[&DifficultyTier::Hard] <= 15);
    assert!(counts[&DifficultyTier::Easy] <= 15);
    for tier in [DifficultyTier::Hard, DifficultyTier::Easy] {
        assert!(recall(&d, &w, &cfg, tier) <= 0.75);
    }
}

#[test]
fn wider_quantiles_never_shrink_extreme_tiers() {
    let (_, d) = world("difficulty-graded", 60, 200, 3);
    let extreme = |cfg: SegmentationConfig| {
        let c = tier_counts(&segment_difficulty(&d.annotations, &cfg).unwrap());
        c[&DifficultyTier::Hard] + c[&DifficultyTier::Easy]
    };
    let default = extreme(SegmentationConfig::default());
    let wide = extreme(SegmentationConfig::new(0.4, 0.6).unwrap());
    assert!(wide >= default, "{wide} < {default}");
}

#[test]
fn mock_pipeline_is_reproducible() {
    let (_, a) = world("uniform", 12, 20, 4);
    let (_, b) = world("uniform", 12, 20, 4);
    assert_eq!(a.responses, b.responses);
    assert_eq!(a.annotations, b.annotations);
}
