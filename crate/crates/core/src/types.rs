//! Domain records shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::answer::{canonicalize_answer, extract_final_answer};
use crate::error::{Error, Result};

/// Reasoning topology a response was generated under.
///
/// The derived ordering (`CoT < ToT < GoT`) is the canonical order used for
/// every deterministic tie-break in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    CoT,
    ToT,
    GoT,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::CoT, Topology::ToT, Topology::GoT];

    pub fn as_str(self) -> &'static str {
        match self {
            Topology::CoT => "cot",
            Topology::ToT => "tot",
            Topology::GoT => "got",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cot" => Ok(Topology::CoT),
            "tot" => Ok(Topology::ToT),
            "got" => Ok(Topology::GoT),
            other => Err(Error::invalid(format!("unknown topology '{other}'"))),
        }
    }
}

/// One value per topology, serialized as `{"cot": .., "tot": .., "got": ..}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerTopology<T> {
    pub cot: T,
    pub tot: T,
    pub got: T,
}

impl<T> PerTopology<T> {
    pub fn from_fn(mut f: impl FnMut(Topology) -> T) -> Self {
        PerTopology {
            cot: f(Topology::CoT),
            tot: f(Topology::ToT),
            got: f(Topology::GoT),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Topology, &T)> {
        Topology::ALL.into_iter().map(move |t| (t, &self[t]))
    }

    pub fn map<U>(&self, mut f: impl FnMut(Topology, &T) -> U) -> PerTopology<U> {
        PerTopology::from_fn(|t| f(t, &self[t]))
    }
}

impl<T> Index<Topology> for PerTopology<T> {
    type Output = T;

    fn index(&self, t: Topology) -> &T {
        match t {
            Topology::CoT => &self.cot,
            Topology::ToT => &self.tot,
            Topology::GoT => &self.got,
        }
    }
}

impl<T> IndexMut<Topology> for PerTopology<T> {
    fn index_mut(&mut self, t: Topology) -> &mut T {
        match t {
            Topology::CoT => &mut self.cot,
            Topology::ToT => &mut self.tot,
            Topology::GoT => &mut self.got,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyTier {
    Hard,
    Medium,
    Easy,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 3] = [
        DifficultyTier::Hard,
        DifficultyTier::Medium,
        DifficultyTier::Easy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyTier::Hard => "hard",
            DifficultyTier::Medium => "medium",
            DifficultyTier::Easy => "easy",
        }
    }
}

impl fmt::Display for DifficultyTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A question with its canonical reference answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub question: String,
    pub reference_answer: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Problem {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        reference_answer: &str,
    ) -> Self {
        Problem {
            id: id.into(),
            question: question.into(),
            reference_answer: canonicalize_answer(reference_answer),
            source: String::new(),
            metadata: BTreeMap::new(),
        }
    }
}

/// Knobs controlling how responses are generated for each topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_depth: u32,
    pub num_children: u32,
    pub num_neighbors: u32,
    pub samples_per_topology: u32,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_depth: 3,
            num_children: 3,
            num_neighbors: 2,
            samples_per_topology: 8,
            temperature: 0.7,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_depth", self.max_depth),
            ("num_children", self.num_children),
            ("num_neighbors", self.num_neighbors),
            ("samples_per_topology", self.samples_per_topology),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config("temperature must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Reward model outputs attached to a response.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardScores {
    /// Regression head, predicted topology success rate in (0, 1).
    pub topo: f64,
    /// Ranking head, unbounded preference score.
    pub rank: f64,
}

/// One generated solution under one topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub problem_id: String,
    pub topology: Topology,
    pub text: String,
    pub final_answer: String,
    pub hard_label: Option<u8>,
    pub reward_scores: Option<RewardScores>,
    pub generator: String,
    pub seed: u64,
}

impl ResponseRecord {
    /// Builds a record whose `final_answer` is extracted from `text`.
    pub fn from_text(
        id: impl Into<String>,
        problem_id: impl Into<String>,
        topology: Topology,
        text: impl Into<String>,
        generator: impl Into<String>,
        seed: u64,
    ) -> Self {
        let text = text.into();
        let final_answer = extract_final_answer(&text);
        ResponseRecord {
            id: id.into(),
            problem_id: problem_id.into(),
            topology,
            text,
            final_answer,
            hard_label: None,
            reward_scores: None,
            generator: generator.into(),
            seed,
        }
    }

    pub fn is_correct(&self) -> Option<bool> {
        self.hard_label.map(|l| l == 1)
    }

    /// Whitespace-delimited word count, used as a tokenizer-free length proxy.
    pub fn length_words(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Per-problem, per-topology success counts and rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoAnnotation {
    pub problem_id: String,
    /// `[n_correct, n_total]` per topology.
    pub counts: PerTopology<[u32; 2]>,
    pub topo_labels: PerTopology<f64>,
    pub max_topo_label: f64,
    pub difficulty: Option<DifficultyTier>,
}

impl TopoAnnotation {
    pub fn n_correct(&self, t: Topology) -> u32 {
        self.counts[t][0]
    }

    pub fn n_total(&self, t: Topology) -> u32 {
        self.counts[t][1]
    }

    /// Topologies that have at least one response.
    pub fn observed(&self) -> impl Iterator<Item = Topology> + '_ {
        Topology::ALL.into_iter().filter(|&t| self.n_total(t) > 0)
    }

    /// Topologies attaining the maximal label among observed ones, compared
    /// exactly on the underlying count ratios. Canonical order.
    pub fn argmax_topologies(&self) -> Vec<Topology> {
        let mut best: Vec<Topology> = Vec::new();
        for t in self.observed() {
            match best.first() {
                None => best.push(t),
                Some(&b) => match self.compare_rates(t, b) {
                    std::cmp::Ordering::Greater => {
                        best.clear();
                        best.push(t);
                    }
                    std::cmp::Ordering::Equal => best.push(t),
                    std::cmp::Ordering::Less => {}
                },
            }
        }
        best
    }

    /// Exact comparison of `n_correct/n_total` between two observed topologies.
    fn compare_rates(&self, a: Topology, b: Topology) -> std::cmp::Ordering {
        let lhs = u64::from(self.n_correct(a)) * u64::from(self.n_total(b));
        let rhs = u64::from(self.n_correct(b)) * u64::from(self.n_total(a));
        lhs.cmp(&rhs)
    }
}

/// Records stored in JSONL files: keyed and self-validating.
pub trait Record {
    fn key(&self) -> &str;
    fn check(&self) -> Result<()>;
}

impl Record for Problem {
    fn key(&self) -> &str {
        &self.id
    }

    fn check(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invariant("<empty>", "problem id must be nonempty"));
        }
        if canonicalize_answer(&self.reference_answer) != self.reference_answer {
            return Err(Error::invariant(
                &self.id,
                "reference_answer is not canonical",
            ));
        }
        Ok(())
    }
}

impl Record for ResponseRecord {
    fn key(&self) -> &str {
        &self.id
    }

    fn check(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invariant("<empty>", "response id must be nonempty"));
        }
        if self.problem_id.is_empty() {
            return Err(Error::invariant(&self.id, "problem_id must be nonempty"));
        }
        if let Some(l) = self.hard_label {
            if l > 1 {
                return Err(Error::invariant(
                    &self.id,
                    format!("hard_label must be 0 or 1, got {l}"),
                ));
            }
        }
        if let Some(s) = self.reward_scores {
            if !s.topo.is_finite() || !s.rank.is_finite() {
                return Err(Error::invariant(&self.id, "reward scores must be finite"));
            }
        }
        if extract_final_answer(&self.text) != self.final_answer {
            return Err(Error::invariant(
                &self.id,
                "final_answer does not match the answer extracted from text",
            ));
        }
        Ok(())
    }
}

impl Record for TopoAnnotation {
    fn key(&self) -> &str {
        &self.problem_id
    }

    fn check(&self) -> Result<()> {
        let id = &self.problem_id;
        if id.is_empty() {
            return Err(Error::invariant("<empty>", "problem_id must be nonempty"));
        }
        let mut max = None::<f64>;
        for t in Topology::ALL {
            let [c, n] = self.counts[t];
            if c > n {
                return Err(Error::invariant(
                    id,
                    format!("{t}: n_correct {c} exceeds n_total {n}"),
                ));
            }
            let label = self.topo_labels[t];
            let expected = if n > 0 { f64::from(c) / f64::from(n) } else { 0.0 };
            if (label - expected).abs() > 1e-12 {
                return Err(Error::invariant(
                    id,
                    format!("{t}: topo_label {label} != {c}/{n}"),
                ));
            }
            if n > 0 {
                max = Some(max.map_or(label, |m: f64| m.max(label)));
            }
        }
        let max = max.unwrap_or(0.0);
        if (self.max_topo_label - max).abs() > 1e-12 {
            return Err(Error::invariant(
                id,
                format!("max_topo_label {} != {max}", self.max_topo_label),
            ));
        }
        Ok(())
    }
}
