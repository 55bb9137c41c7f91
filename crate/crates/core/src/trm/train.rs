use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::features::{featurize, FeatureConfig};
use super::loss::{params_grad, params_loss, Batch, LossWeights, PairItem, RegressionItem};
use super::model::{Params, TrmModel, MODEL_VERSION};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{pairwise_accuracy, spearman_rho, TrmEval};
use crate::types::{Problem, ResponseRecord, TopoAnnotation, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub beta: f64,
    pub lambda_mse: f64,
    pub lambda_rank: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hash_dim: usize,
    pub hidden: usize,
    /// Cap on preference pairs sampled per problem.
    pub pairs_per_problem: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            beta: 1.0,
            lambda_mse: 1.0,
            lambda_rank: 1.0,
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 64,
            seed: 0,
            hash_dim: 256,
            hidden: 32,
            pairs_per_problem: 16,
        }
    }
}

impl TrainingConfig {
    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            beta: self.beta,
            lambda_mse: self.lambda_mse,
            lambda_rank: self.lambda_rank,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            hash_dim: self.hash_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_weights().validate()?;
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("trm.learning_rate must be > 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "trm.epochs, trm.batch_size and trm.hidden must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A correct and an incorrect response to the same problem.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferencePair<'a> {
    pub problem_id: &'a str,
    pub preferred: &'a ResponseRecord,
    pub dispreferred: &'a ResponseRecord,
}

fn sub_seed(seed: u64, key: &str) -> u64 {
    xxh3_64(format!("{seed}:{key}").as_bytes())
}

/// Samples up to `per_problem` pairs per problem uniformly without
/// replacement from `{label 1} x {label 0}`. Problems are visited in id
/// order and each draws from its own seeded stream.
pub fn build_pairs<'a>(
    grouped: &BTreeMap<&'a str, Vec<&'a ResponseRecord>>,
    per_problem: usize,
    seed: u64,
) -> Vec<PreferencePair<'a>> {
    let mut out = Vec::new();
    for (&pid, responses) in grouped {
        let mut pos: Vec<&ResponseRecord> = responses
            .iter()
            .copied()
            .filter(|r| r.hard_label == Some(1))
            .collect();
        let mut neg: Vec<&ResponseRecord> = responses
            .iter()
            .copied()
            .filter(|r| r.hard_label == Some(0))
            .collect();
        if pos.is_empty() || neg.is_empty() || per_problem == 0 {
            continue;
        }
        pos.sort_by(|a, b| a.id.cmp(&b.id));
        neg.sort_by(|a, b| a.id.cmp(&b.id));
        let total = pos.len() * neg.len();
        let take = per_problem.min(total);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, pid));
        let mut picks = sample(&mut rng, total, take).into_vec();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|k| PreferencePair {
            problem_id: pid,
            preferred: pos[k / neg.len()],
            dispreferred: neg[k % neg.len()],
        }));
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub regression: Vec<RegressionItem>,
    pub pairs: Vec<PairItem>,
}

impl TrainingSet {
    pub fn batch(&self) -> Batch<'_> {
        Batch::new(&self.regression, &self.pairs)
    }
}

/// Featurizes a labeled dataset restricted to `problem_ids` (all problems
/// when `None`). Each response becomes a regression item targeting its own
/// topology's topo label; sampled pairs feed the ranking head.
pub fn build_training_set(
    dataset: &Dataset,
    problem_ids: Option<&[&str]>,
    config: &TrainingConfig,
) -> Result<TrainingSet> {
    let feature = config.feature_config();
    let problems = dataset.problems_by_id();
    let annotations = dataset.annotations_by_problem();
    let keep = |pid: &str| problem_ids.is_none_or(|ids| ids.contains(&pid));
    let mut grouped = dataset.responses_by_problem();
    grouped.retain(|pid, _| keep(pid));

    let mut set = TrainingSet::default();
    for (pid, responses) in &grouped {
        let problem = problems[pid];
        let ann = annotations.get(pid).ok_or_else(|| {
            Error::invalid(format!("problem {pid} has responses but no annotation"))
        })?;
        for r in responses {
            set.regression.push(RegressionItem {
                features: featurize(problem, r, &feature),
                target: ann.topo_labels[r.topology],
            });
        }
    }
    for pair in build_pairs(&grouped, config.pairs_per_problem, config.seed) {
        let problem = problems[pair.problem_id];
        set.pairs.push(PairItem {
            preferred: featurize(problem, pair.preferred, &feature),
            dispreferred: featurize(problem, pair.dispreferred, &feature),
        });
    }
    Ok(set)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: TrmModel,
    /// Full-training-set loss after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Seeded mini-batch gradient descent on the combined loss.
///
/// Each epoch shuffles both item lists and cuts them into the same number of
/// batches so every batch mixes regression items and pairs in proportion.
pub fn train(set: &TrainingSet, config: &TrainingConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let weights = config.loss_weights();
    let mut reg_idx: Vec<usize> = if weights.lambda_mse > 0.0 {
        (0..set.regression.len()).collect()
    } else {
        Vec::new()
    };
    let mut pair_idx: Vec<usize> = if weights.lambda_rank > 0.0 {
        (0..set.pairs.len()).collect()
    } else {
        Vec::new()
    };
    if weights.lambda_mse > 0.0 && reg_idx.is_empty() {
        return Err(Error::invalid("no regression items to train on"));
    }
    if weights.lambda_rank > 0.0 && pair_idx.is_empty() {
        return Err(Error::invalid("no preference pairs to train on"));
    }
    let dim = set
        .regression
        .first()
        .map(|r| r.features.len())
        .or_else(|| set.pairs.first().map(|p| p.preferred.len()))
        .ok_or_else(|| Error::invalid("empty training set"))?;
    let feature = config.feature_config();
    if dim != feature.dim() {
        return Err(Error::Dimension {
            expected: feature.dim(),
            got: dim,
        });
    }

    let mut params = Params::uniform(dim, config.hidden, 0.05, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let full = Batch {
        regression: reg_idx.iter().map(|&i| &set.regression[i]).collect(),
        pairs: pair_idx.iter().map(|&i| &set.pairs[i]).collect(),
    };
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        reg_idx.shuffle(&mut rng);
        pair_idx.shuffle(&mut rng);
        let longest = reg_idx.len().max(pair_idx.len());
        let n_batches = longest.div_ceil(config.batch_size);
        let reg_chunk = reg_idx.len().div_ceil(n_batches).max(1);
        let pair_chunk = pair_idx.len().div_ceil(n_batches).max(1);
        for b in 0..n_batches {
            let slice = |idx: &[usize], chunk: usize| -> Vec<usize> {
                let start = (b * chunk).min(idx.len());
                let end = ((b + 1) * chunk).min(idx.len());
                idx[start..end].to_vec()
            };
            let batch = Batch {
                regression: slice(&reg_idx, reg_chunk)
                    .into_iter()
                    .map(|i| &set.regression[i])
                    .collect(),
                pairs: slice(&pair_idx, pair_chunk)
                    .into_iter()
                    .map(|i| &set.pairs[i])
                    .collect(),
            };
            if batch.is_empty() {
                continue;
            }
            let (_, g) = params_grad(&params, &batch, &weights)?;
            params.add_scaled(&g, -config.learning_rate);
        }
        let loss = params_loss(&params, &full, &weights)?;
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.push(loss);
    }

    Ok(TrainOutcome {
        model: TrmModel {
            version: MODEL_VERSION.to_string(),
            feature,
            params,
        },
        loss_trace: trace,
    })
}

/// Deterministic 80/20 split on a hash of the problem id.
pub fn is_holdout(problem_id: &str) -> bool {
    xxh3_64(problem_id.as_bytes()).is_multiple_of(5)
}

pub fn split_problem_ids(problems: &[Problem]) -> (Vec<&str>, Vec<&str>) {
    problems
        .iter()
        .map(|p| p.id.as_str())
        .partition(|id| !is_holdout(id))
}

/// Spearman rho between each (problem, topology) topo label and the mean
/// regression output over its responses, plus pairwise accuracy of the
/// ranking head on sampled pairs. Both use only `problem_ids`.
pub fn evaluate(
    model: &TrmModel,
    dataset: &Dataset,
    problem_ids: &[&str],
    pairs_per_problem: usize,
    seed: u64,
) -> Result<TrmEval> {
    let problems = dataset.problems_by_id();
    let annotations: BTreeMap<&str, &TopoAnnotation> = dataset.annotations_by_problem();
    let mut grouped = dataset.responses_by_problem();
    grouped.retain(|pid, _| problem_ids.contains(pid));
    if grouped.is_empty() {
        return Err(Error::invalid("evaluation split has no responses"));
    }

    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (pid, responses) in &grouped {
        let problem = problems[pid];
        let ann = annotations
            .get(pid)
            .ok_or_else(|| Error::invalid(format!("problem {pid} has no annotation")))?;
        for t in Topology::ALL {
            let of_t: Vec<&&ResponseRecord> = responses.iter().filter(|r| r.topology == t).collect();
            if of_t.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for r in &of_t {
                sum += model.forward(&featurize(problem, r, &model.feature))?.topo;
            }
            truth.push(ann.topo_labels[t]);
            predicted.push(sum / of_t.len() as f64);
        }
    }
    let spearman = spearman_rho(&truth, &predicted).ok();

    let mut scored = Vec::new();
    for pair in build_pairs(&grouped, pairs_per_problem, seed) {
        let problem = problems[pair.problem_id];
        let pos = model.forward(&featurize(problem, pair.preferred, &model.feature))?;
        let neg = model.forward(&featurize(problem, pair.dispreferred, &model.feature))?;
        scored.push((pos.rank, neg.rank));
    }
    let pairwise = if scored.is_empty() {
        None
    } else {
        Some(pairwise_accuracy(&scored)?)
    };
    Ok(TrmEval {
        spearman_rho: spearman,
        pairwise_accuracy: pairwise,
    })
}

/// Spearman rho between regression targets and predictions, and pairwise
/// accuracy of the ranking head, on pre-featurized items.
pub fn evaluate_set(model: &TrmModel, set: &TrainingSet) -> Result<TrmEval> {
    let mut truth = Vec::with_capacity(set.regression.len());
    let mut predicted = Vec::with_capacity(set.regression.len());
    for item in &set.regression {
        truth.push(item.target);
        predicted.push(model.forward(&item.features)?.topo);
    }
    let spearman = spearman_rho(&truth, &predicted).ok();
    let mut scored = Vec::with_capacity(set.pairs.len());
    for pair in &set.pairs {
        scored.push((
            model.forward(&pair.preferred)?.rank,
            model.forward(&pair.dispreferred)?.rank,
        ));
    }
    let pairwise = if scored.is_empty() {
        None
    } else {
        Some(pairwise_accuracy(&scored)?)
    };
    Ok(TrmEval {
        spearman_rho: spearman,
        pairwise_accuracy: pairwise,
    })
}
