use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::competition::{compete, Aggregate, Scorer};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::tag::compute_win_rates;
use crate::types::{PerTopology, Problem, ResponseRecord, TopoAnnotation, Topology};

/// A topology and an answer picked for one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub topology: Topology,
    pub answer: String,
}

/// Picks a topology and answer per problem from its candidates.
pub trait SelectionStrategy {
    fn name(&self) -> String;

    /// `None` when the strategy has nothing to choose from on this problem.
    fn select(
        &self,
        problem: &Problem,
        responses: &[&ResponseRecord],
        annotation: &TopoAnnotation,
    ) -> Result<Option<Choice>>;
}

/// Most frequent non-empty final answer; ties go to the smallest string.
/// Empty when every answer is empty or there are no responses.
pub fn majority_vote<'a>(responses: impl IntoIterator<Item = &'a ResponseRecord>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in responses {
        if !r.final_answer.is_empty() {
            *counts.entry(&r.final_answer).or_default() += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (a, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((a, c));
        }
    }
    best.map(|(a, _)| a.to_string()).unwrap_or_default()
}

fn vote_within(topology: Topology, responses: &[&ResponseRecord]) -> Option<Choice> {
    let of_t: Vec<&ResponseRecord> = responses.iter().copied().filter(|r| r.topology == topology).collect();
    if of_t.is_empty() {
        return None;
    }
    Some(Choice {
        topology,
        answer: majority_vote(of_t),
    })
}

/// Always one topology, answer by majority vote.
pub struct FixedTopology(pub Topology);

impl SelectionStrategy for FixedTopology {
    fn name(&self) -> String {
        format!("fixed-{}", self.0)
    }

    fn select(&self, _: &Problem, responses: &[&ResponseRecord], _: &TopoAnnotation) -> Result<Option<Choice>> {
        Ok(vote_within(self.0, responses))
    }
}

/// The topology with the highest empirical topo label (canonical order on
/// ties), answer by majority vote. An upper-bound reference.
pub struct OracleTopology;

impl SelectionStrategy for OracleTopology {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn select(
        &self,
        _: &Problem,
        responses: &[&ResponseRecord],
        annotation: &TopoAnnotation,
    ) -> Result<Option<Choice>> {
        Ok(annotation
            .argmax_topologies()
            .first()
            .and_then(|&t| vote_within(t, responses)))
    }
}

/// The competition game driven by a reward scorer.
pub struct TopologicalRewarding<'s> {
    pub scorer: &'s dyn Scorer,
    pub aggregate: Aggregate,
}

impl SelectionStrategy for TopologicalRewarding<'_> {
    fn name(&self) -> String {
        "rewarding".into()
    }

    fn select(&self, problem: &Problem, responses: &[&ResponseRecord], _: &TopoAnnotation) -> Result<Option<Choice>> {
        if responses.is_empty() {
            return Ok(None);
        }
        let s = compete(problem, responses, self.scorer, self.aggregate)?;
        Ok(Some(Choice {
            topology: s.winning_topology,
            answer: s.chosen_answer,
        }))
    }
}

type Factory = for<'s> fn(Option<&'s dyn Scorer>, Aggregate) -> Result<Box<dyn SelectionStrategy + 's>>;

/// Name-keyed strategy constructors.
pub struct StrategyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut r = StrategyRegistry {
            factories: BTreeMap::new(),
        };
        r.register("fixed-cot", |_, _| Ok(Box::new(FixedTopology(Topology::CoT))));
        r.register("fixed-tot", |_, _| Ok(Box::new(FixedTopology(Topology::ToT))));
        r.register("fixed-got", |_, _| Ok(Box::new(FixedTopology(Topology::GoT))));
        r.register("oracle", |_, _| Ok(Box::new(OracleTopology)));
        r.register("rewarding", |scorer, aggregate| {
            let scorer = scorer
                .ok_or_else(|| Error::Config("the rewarding strategy needs a reward model".into()))?;
            Ok(Box::new(TopologicalRewarding { scorer, aggregate }))
        });
        r
    }
}

impl StrategyRegistry {
    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build<'s>(
        &self,
        name: &str,
        scorer: Option<&'s dyn Scorer>,
        aggregate: Aggregate,
    ) -> Result<Box<dyn SelectionStrategy + 's>> {
        let f = self.factories.get(name).ok_or_else(|| {
            Error::Config(format!("unknown strategy '{name}' (known: {})", self.names().join(", ")))
        })?;
        f(scorer, aggregate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub problems: usize,
    /// Share of problems on which each topology was chosen.
    pub selection_share: PerTopology<f64>,
    pub report: MetricReport,
}

/// Scores a strategy on an annotated dataset.
///
/// `overall_accuracy` is the mean, over problems the strategy answered, of
/// the empirical topo label of the chosen topology. `accuracy[t]` restricts
/// that mean to problems where `t` was chosen. `answer_accuracy` is the share
/// of chosen answers equal to the reference. `mean_response_length` is over
/// the responses of each chosen topology.
pub fn evaluate_strategy(dataset: &Dataset, strategy: &dyn SelectionStrategy) -> Result<StrategyReport> {
    let problems = dataset.problems_by_id();
    let annotations = dataset.annotations_by_problem();
    let grouped = dataset.responses_by_problem();

    let mut label_sum = PerTopology::from_fn(|_| 0.0);
    let mut chosen_count = PerTopology::from_fn(|_| 0usize);
    let mut answered = 0usize;
    let mut correct_answers = 0usize;
    let mut length_sum = 0.0;
    for (pid, responses) in &grouped {
        let ann = annotations
            .get(pid)
            .ok_or_else(|| Error::invalid(format!("problem {pid} has no annotation")))?;
        let problem = problems[pid];
        let Some(choice) = strategy.select(problem, responses, ann)? else {
            continue;
        };
        answered += 1;
        label_sum[choice.topology] += ann.topo_labels[choice.topology];
        chosen_count[choice.topology] += 1;
        if choice.answer == problem.reference_answer {
            correct_answers += 1;
        }
        let of_t: Vec<usize> = responses
            .iter()
            .filter(|r| r.topology == choice.topology)
            .map(|r| r.length_words())
            .collect();
        length_sum += of_t.iter().sum::<usize>() as f64 / of_t.len() as f64;
    }
    if answered == 0 {
        return Err(Error::invalid(format!(
            "strategy {} found no problem to answer",
            strategy.name()
        )));
    }
    let n = answered as f64;
    let overall = Topology::ALL.iter().map(|&t| label_sum[t]).sum::<f64>() / n;
    let report = MetricReport {
        overall_accuracy: overall,
        accuracy: PerTopology::from_fn(|t| {
            (chosen_count[t] > 0).then(|| label_sum[t] / chosen_count[t] as f64)
        }),
        win_rate: compute_win_rates(&dataset.annotations)?,
        answer_accuracy: Some(correct_answers as f64 / n),
        spearman_rho: None,
        pairwise_accuracy: None,
        mean_response_length: length_sum / n,
    };
    Ok(StrategyReport {
        strategy: strategy.name(),
        problems: answered,
        selection_share: chosen_count.map(|_, &c| c as f64 / n),
        report,
    })
}
