//! Seeded synthetic worlds with planted per-topology success probabilities.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer::canonicalize_answer;
use crate::error::{Error, Result};
use crate::types::{DifficultyTier, PerTopology, Problem, Topology};

/// Planted truth for one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldEntry {
    pub p: PerTopology<f64>,
    pub reference_answer: String,
    pub wrong_answers: Vec<String>,
    /// Set by the topology-skewed profile.
    pub preferred: Option<Topology>,
    /// Set by the difficulty-graded profile.
    pub band: Option<DifficultyTier>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub profile: String,
    pub seed: u64,
    pub entries: BTreeMap<String, WorldEntry>,
}

/// Probabilities a profile assigns to one problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Planted {
    pub p: PerTopology<f64>,
    pub preferred: Option<Topology>,
    pub band: Option<DifficultyTier>,
}

pub trait WorldProfile: Send + Sync {
    fn name(&self) -> &'static str;

    /// One entry per problem, in input order.
    fn plant(&self, problems: &[Problem], rng: &mut ChaCha8Rng) -> Vec<Planted>;
}

/// Every `p(q, T)` drawn independently from `U[0.2, 0.9]`.
pub struct Uniform;

impl WorldProfile for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn plant(&self, problems: &[Problem], rng: &mut ChaCha8Rng) -> Vec<Planted> {
        problems
            .iter()
            .map(|_| Planted {
                p: PerTopology::from_fn(|_| rng.gen_range(0.2..=0.9)),
                preferred: None,
                band: None,
            })
            .collect()
    }
}

/// A shared base level `U[0.25, 0.6]` with per-topology jitter of at most
/// 0.05; one uniformly chosen topology gets +0.2 (clamped to 1). The jitter
/// range is narrower than the boost, so the preferred topology is the strict
/// argmax.
pub struct TopologySkewed;

impl WorldProfile for TopologySkewed {
    fn name(&self) -> &'static str {
        "topology-skewed"
    }

    fn plant(&self, problems: &[Problem], rng: &mut ChaCha8Rng) -> Vec<Planted> {
        problems
            .iter()
            .map(|_| {
                let base = rng.gen_range(0.25..=0.6);
                let preferred = Topology::ALL[rng.gen_range(0..3)];
                let p = PerTopology::from_fn(|t| {
                    let jittered = base + rng.gen_range(-0.05..=0.05);
                    let boosted: f64 = if t == preferred { jittered + 0.2 } else { jittered };
                    boosted.clamp(0.0, 1.0)
                });
                Planted {
                    p,
                    preferred: Some(preferred),
                    band: None,
                }
            })
            .collect()
    }
}

/// Problems shuffled into thirds centred at 0.2 / 0.5 / 0.8 for all
/// topologies, with a shared per-problem offset and a small per-topology one.
pub struct DifficultyGraded;

impl WorldProfile for DifficultyGraded {
    fn name(&self) -> &'static str {
        "difficulty-graded"
    }

    fn plant(&self, problems: &[Problem], rng: &mut ChaCha8Rng) -> Vec<Planted> {
        let n = problems.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut bands = vec![DifficultyTier::Medium; n];
        for (rank, &i) in order.iter().enumerate() {
            bands[i] = match rank * 3 / n.max(1) {
                0 => DifficultyTier::Hard,
                1 => DifficultyTier::Medium,
                _ => DifficultyTier::Easy,
            };
        }
        bands
            .into_iter()
            .map(|band| {
                let center: f64 = match band {
                    DifficultyTier::Hard => 0.2,
                    DifficultyTier::Medium => 0.5,
                    DifficultyTier::Easy => 0.8,
                };
                let shared = rng.gen_range(-0.08..=0.08);
                let p = PerTopology::from_fn(|_| {
                    (center + shared + rng.gen_range(-0.02..=0.02_f64)).clamp(0.0, 1.0)
                });
                Planted {
                    p,
                    preferred: None,
                    band: Some(band),
                }
            })
            .collect()
    }
}

/// Name-keyed set of world profiles.
pub struct ProfileRegistry {
    profiles: BTreeMap<&'static str, Box<dyn WorldProfile>>,
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        let mut r = ProfileRegistry {
            profiles: BTreeMap::new(),
        };
        r.register(Box::new(Uniform));
        r.register(Box::new(TopologySkewed));
        r.register(Box::new(DifficultyGraded));
        r
    }
}

impl ProfileRegistry {
    pub fn register(&mut self, profile: Box<dyn WorldProfile>) {
        self.profiles.insert(profile.name(), profile);
    }

    pub fn get(&self, name: &str) -> Result<&dyn WorldProfile> {
        self.profiles.get(name).map(|p| p.as_ref()).ok_or_else(|| {
            Error::Config(format!(
                "unknown world profile '{name}' (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.profiles.keys().copied().collect()
    }
}

/// A small pool of plausible wrong answers, never containing the reference.
pub fn wrong_answer_pool(reference: &str) -> Vec<String> {
    let mut pool: Vec<String> = if let Ok(v) = reference.parse::<i64>() {
        [v + 1, v - 1, v + 10, v * 2, v - 3]
            .iter()
            .map(|x| x.to_string())
            .collect()
    } else if let Ok(v) = reference.parse::<f64>() {
        [v + 1.0, v - 1.0, v * 2.0, v + 0.5]
            .iter()
            .map(|x| canonicalize_answer(&x.to_string()))
            .collect()
    } else {
        (1..=4)
            .map(|k| canonicalize_answer(&format!("{reference} (variant {k})")))
            .collect()
    };
    pool.retain(|a| a != reference && !a.is_empty());
    pool.dedup();
    pool
}

/// Plants a world over `problems` using a registered profile.
pub fn plant_world(problems: &[Problem], profile: &str, seed: u64) -> Result<SyntheticWorld> {
    plant_world_with(&ProfileRegistry::default(), problems, profile, seed)
}

pub fn plant_world_with(
    registry: &ProfileRegistry,
    problems: &[Problem],
    profile: &str,
    seed: u64,
) -> Result<SyntheticWorld> {
    let prof = registry.get(profile)?;
    if problems.is_empty() {
        return Err(Error::invalid("cannot plant a world over zero problems"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = prof.plant(problems, &mut rng);
    let entries = problems
        .iter()
        .zip(planted)
        .map(|(problem, pl)| {
            let entry = WorldEntry {
                p: pl.p,
                reference_answer: problem.reference_answer.clone(),
                wrong_answers: wrong_answer_pool(&problem.reference_answer),
                preferred: pl.preferred,
                band: pl.band,
            };
            (problem.id.clone(), entry)
        })
        .collect();
    Ok(SyntheticWorld {
        profile: prof.name().to_string(),
        seed,
        entries,
    })
}

impl SyntheticWorld {
    pub fn entry(&self, problem_id: &str) -> Result<&WorldEntry> {
        self.entries
            .get(problem_id)
            .ok_or_else(|| Error::invalid(format!("problem {problem_id} is not in the world")))
    }

    pub fn probability(&self, problem_id: &str, t: Topology) -> Result<f64> {
        Ok(self.entry(problem_id)?.p[t])
    }

    /// The world a tuned generator would face: every probability moves a
    /// fraction `gain` of the way to 1.
    pub fn tuned(&self, gain: f64) -> Result<SyntheticWorld> {
        if !(0.0..=1.0).contains(&gain) {
            return Err(Error::Config(format!("tuning gain {gain} outside [0, 1]")));
        }
        let mut out = self.clone();
        out.profile = format!("{}+tuned", self.profile);
        for e in out.entries.values_mut() {
            e.p = e.p.map(|_, &p| p + gain * (1.0 - p));
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Arithmetic word problems with integer answers.
pub fn synthetic_problems(n: usize, seed: u64) -> Vec<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let a: i64 = rng.gen_range(2..90);
            let b: i64 = rng.gen_range(2..40);
            let c: i64 = rng.gen_range(2..9);
            let (question, answer) = match rng.gen_range(0..4) {
                0 => (
                    format!("A crate holds {a} apples. Then {b} more apples are added. How many apples are in the crate?"),
                    a + b,
                ),
                1 => (
                    format!("A library has {} books and lends out {b}. How many books remain?", a + b),
                    a,
                ),
                2 => (
                    format!("Each of {c} boxes contains {a} marbles, and {b} marbles are lost. How many marbles are left?"),
                    c * a - b,
                ),
                _ => (
                    format!("A runner covers {a} km on each of {c} days and then {b} km more. What is the total distance in km?"),
                    a * c + b,
                ),
            };
            let mut p = Problem::new(format!("q{i:04}"), question, &answer.to_string());
            p.source = "synthetic".to_string();
            p
        })
        .collect()
}
