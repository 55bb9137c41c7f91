//! The topology competition game, rejection sampling and SFT curation.

mod scorer;
mod strategy;

pub use scorer::{PlantedScorer, Scorer};
pub use strategy::{
    evaluate_strategy, majority_vote, Choice, FixedTopology, OracleTopology, SelectionStrategy,
    StrategyRegistry, StrategyReport, TopologicalRewarding,
};

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{DifficultyTier, PerTopology, Problem, ResponseRecord, Topology};

/// How per-response regression outputs combine into a topology score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Max,
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "max" => Ok(Aggregate::Max),
            other => Err(Error::Config(format!(
                "compete.aggregate must be mean or max, got '{other}'"
            ))),
        }
    }
}

/// Outcome of the competition on one problem; one line of selections.jsonl.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub problem_id: String,
    pub winning_topology: Topology,
    pub chosen_response_id: String,
    pub chosen_answer: String,
    /// Aggregate regression score; `None` for topologies without candidates.
    pub scores: PerTopology<Option<f64>>,
}

/// Scores every candidate once, picks the topology with the highest
/// aggregate regression score (first in canonical order on ties), then the
/// candidate of that topology with the highest ranking score (smallest id on
/// ties). Candidates are visited in id order, so the result does not depend
/// on the input order.
pub fn compete(
    problem: &Problem,
    responses: &[&ResponseRecord],
    scorer: &dyn Scorer,
    aggregate: Aggregate,
) -> Result<SelectionResult> {
    if responses.is_empty() {
        return Err(Error::invalid(format!("problem {} has no candidate responses", problem.id)));
    }
    let mut sorted: Vec<&ResponseRecord> = responses.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let scored: Vec<(&ResponseRecord, f64, f64)> = sorted
        .into_iter()
        .map(|r| scorer.score(problem, r).map(|s| (r, s.topo, s.rank)))
        .collect::<Result<_>>()?;

    let scores = PerTopology::from_fn(|t| {
        let vals: Vec<f64> = scored.iter().filter(|(r, ..)| r.topology == t).map(|s| s.1).collect();
        if vals.is_empty() {
            return None;
        }
        Some(match aggregate {
            Aggregate::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
            Aggregate::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    });
    let mut winner: Option<(Topology, f64)> = None;
    for (t, s) in scores.iter() {
        if let Some(s) = *s {
            if winner.is_none_or(|(_, best)| s > best) {
                winner = Some((t, s));
            }
        }
    }
    let (winning_topology, _) = winner.expect("at least one topology has candidates");

    let mut chosen: Option<(&ResponseRecord, f64)> = None;
    for &(r, _, rank) in scored.iter().filter(|(r, ..)| r.topology == winning_topology) {
        if chosen.is_none_or(|(_, best)| rank > best) {
            chosen = Some((r, rank));
        }
    }
    let (chosen, _) = chosen.expect("winning topology has candidates");
    Ok(SelectionResult {
        problem_id: problem.id.clone(),
        winning_topology,
        chosen_response_id: chosen.id.clone(),
        chosen_answer: chosen.final_answer.clone(),
        scores,
    })
}

/// Keeps, per topology, the `k` correct responses with the highest ranking
/// score (ties by smallest id). Output is grouped by topology in canonical
/// order, best first.
pub fn rejection_sample<'a>(
    problem: &Problem,
    responses: &[&'a ResponseRecord],
    scorer: &dyn Scorer,
    k: usize,
) -> Result<Vec<&'a ResponseRecord>> {
    let mut kept = Vec::new();
    for t in Topology::ALL {
        let mut correct: Vec<(&ResponseRecord, f64)> = responses
            .iter()
            .copied()
            .filter(|r| r.topology == t && r.hard_label == Some(1))
            .map(|r| scorer.score(problem, r).map(|s| (r, s.rank)))
            .collect::<Result<_>>()?;
        correct.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
        kept.extend(correct.into_iter().take(k).map(|(r, _)| r));
    }
    Ok(kept)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    /// Share of each difficulty tier to sample, in (0, 1].
    pub fraction: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            fraction: 1.0,
            top_k: 1,
            seed: 0,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!(
                "curate.fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        if self.top_k == 0 {
            return Err(Error::Config("curate.top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// One supervised fine-tuning example; one line of sft.jsonl.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub prompt: String,
    pub completion: String,
    pub topology: Topology,
    pub difficulty: DifficultyTier,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Curation {
    pub records: Vec<SftRecord>,
    /// Sampled problem ids per tier, ascending.
    pub sampled: BTreeMap<DifficultyTier, Vec<String>>,
    pub warnings: Vec<String>,
}

/// `floor(fraction * size)`, robust to products like `0.1 * 30` that land a
/// hair below an integer.
pub fn tier_sample_size(fraction: f64, size: usize) -> usize {
    ((fraction * size as f64) + 1e-9).floor() as usize
}

/// Stratified sampling per tier, then correct-only filtering, then
/// rejection sampling. Records come out by tier (hard, medium, easy), then
/// problem id, then topology.
pub fn curate_sft(dataset: &Dataset, scorer: &dyn Scorer, config: &CurationConfig) -> Result<Curation> {
    config.validate()?;
    let mut tiers: BTreeMap<DifficultyTier, Vec<&str>> = BTreeMap::new();
    for a in &dataset.annotations {
        let tier = a.difficulty.ok_or_else(|| {
            Error::invalid(format!("problem {} has not been segmented", a.problem_id))
        })?;
        tiers.entry(tier).or_default().push(&a.problem_id);
    }
    let problems = dataset.problems_by_id();
    let grouped = dataset.responses_by_problem();
    let mut out = Curation::default();

    for tier in DifficultyTier::ALL {
        let mut ids = tiers.remove(&tier).unwrap_or_default();
        if ids.is_empty() {
            out.warnings.push(format!("tier {tier} has no problems; skipped"));
            continue;
        }
        ids.sort_unstable();
        let take = tier_sample_size(config.fraction, ids.len());
        let key = format!("{}:{}", config.seed, tier.as_str());
        let mut rng = ChaCha8Rng::seed_from_u64(xxh3_64(key.as_bytes()));
        let mut picks = sample(&mut rng, ids.len(), take).into_vec();
        picks.sort_unstable();
        let chosen: Vec<&str> = picks.into_iter().map(|i| ids[i]).collect();

        for &pid in &chosen {
            let problem = problems
                .get(pid)
                .ok_or_else(|| Error::invalid(format!("annotation for unknown problem {pid}")))?;
            let responses = grouped.get(pid).map(Vec::as_slice).unwrap_or(&[]);
            for r in rejection_sample(problem, responses, scorer, config.top_k)? {
                out.records.push(SftRecord {
                    prompt: problem.question.clone(),
                    completion: r.text.clone(),
                    topology: r.topology,
                    difficulty: tier,
                });
            }
        }
        out.sampled.insert(tier, chosen.into_iter().map(str::to_owned).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RewardScores;

    /// Regression score and rank read from the response text: "topo rank".
    struct TextScorer;

    impl Scorer for TextScorer {
        fn score(&self, _: &Problem, r: &ResponseRecord) -> Result<RewardScores> {
            let mut it = r.text.split_whitespace().map(|w| w.parse::<f64>().unwrap());
            Ok(RewardScores {
                topo: it.next().unwrap(),
                rank: it.next().unwrap(),
            })
        }
    }

    fn resp(id: &str, t: Topology, topo: f64, rank: f64, label: u8) -> ResponseRecord {
        let mut r = ResponseRecord::from_text(id, "p", t, format!("{topo} {rank}"), "t", 0);
        r.final_answer = format!("ans-{id}");
        r.hard_label = Some(label);
        r
    }

    fn problem() -> Problem {
        Problem::new("p", "question?", "1")
    }

    #[test]
    fn single_response_wins() {
        let r = resp("a", Topology::ToT, 0.3, -2.0, 0);
        let s = compete(&problem(), &[&r], &TextScorer, Aggregate::Mean).unwrap();
        assert_eq!(s.winning_topology, Topology::ToT);
        assert_eq!(s.chosen_response_id, "a");
        assert_eq!(s.scores.cot, None);
    }

    #[test]
    fn canonical_tie_break() {
        let rs = [
            resp("g", Topology::GoT, 0.5, 0.0, 1),
            resp("t", Topology::ToT, 0.5, 0.0, 1),
        ];
        let refs: Vec<&ResponseRecord> = rs.iter().collect();
        let s = compete(&problem(), &refs, &TextScorer, Aggregate::Mean).unwrap();
        assert_eq!(s.winning_topology, Topology::ToT);
    }

    #[test]
    fn mean_versus_max() {
        let rs = [
            resp("c1", Topology::CoT, 0.6, 0.0, 1),
            resp("c2", Topology::CoT, 0.6, 0.0, 1),
            resp("g1", Topology::GoT, 0.9, 0.0, 1),
            resp("g2", Topology::GoT, 0.1, 0.0, 1),
        ];
        let refs: Vec<&ResponseRecord> = rs.iter().collect();
        let mean = compete(&problem(), &refs, &TextScorer, Aggregate::Mean).unwrap();
        assert_eq!(mean.winning_topology, Topology::CoT);
        let max = compete(&problem(), &refs, &TextScorer, Aggregate::Max).unwrap();
        assert_eq!(max.winning_topology, Topology::GoT);
    }

    #[test]
    fn answer_by_rank_then_smallest_id() {
        let rs = [
            resp("b", Topology::CoT, 0.5, 2.0, 1),
            resp("a", Topology::CoT, 0.5, 2.0, 1),
            resp("c", Topology::CoT, 0.5, 1.0, 1),
        ];
        let refs: Vec<&ResponseRecord> = rs.iter().collect();
        let s = compete(&problem(), &refs, &TextScorer, Aggregate::Mean).unwrap();
        assert_eq!(s.chosen_response_id, "a");
        assert_eq!(s.chosen_answer, "ans-a");
    }

    #[test]
    fn empty_candidates() {
        assert!(compete(&problem(), &[], &TextScorer, Aggregate::Mean).is_err());
    }

    #[test]
    fn rejection_examples() {
        let rs = [
            resp("a", Topology::CoT, 0.0, 0.2, 1),
            resp("b", Topology::CoT, 0.0, 0.9, 1),
            resp("c", Topology::CoT, 0.0, 0.5, 1),
            resp("d", Topology::CoT, 0.0, 5.0, 0),
            resp("e", Topology::GoT, 0.0, 0.1, 1),
        ];
        let refs: Vec<&ResponseRecord> = rs.iter().collect();
        let ids = |k| {
            rejection_sample(&problem(), &refs, &TextScorer, k)
                .unwrap()
                .iter()
                .map(|r| r.id.as_str())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(1), ["b", "e"]);
        assert_eq!(ids(10), ["b", "c", "a", "e"]);
        let wrong = [resp("x", Topology::ToT, 0.0, 1.0, 0)];
        let refs: Vec<&ResponseRecord> = wrong.iter().collect();
        assert!(rejection_sample(&problem(), &refs, &TextScorer, 3).unwrap().is_empty());
    }

    #[test]
    fn sample_size_floor() {
        assert_eq!(tier_sample_size(0.5, 10), 5);
        assert_eq!(tier_sample_size(0.1, 30), 3);
        assert_eq!(tier_sample_size(0.7, 10), 7);
        assert_eq!(tier_sample_size(0.33, 10), 3);
        assert_eq!(tier_sample_size(1.0, 7), 7);
    }

    #[test]
    fn curation_config_bounds() {
        for f in [0.0, -0.1, 1.01, f64::NAN] {
            let c = CurationConfig { fraction: f, ..Default::default() };
            assert!(c.validate().is_err());
        }
        let c = CurationConfig { top_k: 0, ..Default::default() };
        assert!(c.validate().is_err());
        assert_eq!("max".parse::<Aggregate>().unwrap(), Aggregate::Max);
        assert!("median".parse::<Aggregate>().is_err());
    }
}
