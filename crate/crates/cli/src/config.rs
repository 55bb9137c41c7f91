use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use toposcale::competition::{Aggregate, CurationConfig};
use toposcale::generation::EndpointConfig;
use toposcale::tag::SegmentationConfig;
use toposcale::trm::TrainingConfig;
use toposcale::GenerationParams;

/// File locations, relative to the working directory unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub problems: PathBuf,
    pub responses: PathBuf,
    pub annotations: PathBuf,
    pub model: PathBuf,
    pub reports: PathBuf,
    pub world: PathBuf,
    pub selections: PathBuf,
    pub sft: PathBuf,
    pub errors: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            problems: "data/problems.jsonl".into(),
            responses: "data/responses.jsonl".into(),
            annotations: "data/annotations.jsonl".into(),
            model: "data/trm.json".into(),
            reports: "reports".into(),
            world: "data/world.json".into(),
            selections: "data/selections.jsonl".into(),
            sft: "data/sft.jsonl".into(),
            errors: "data/errors.jsonl".into(),
        }
    }
}

impl Paths {
    pub fn resolve(&self, base: &Path) -> Paths {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Paths {
            problems: r(&self.problems),
            responses: r(&self.responses),
            annotations: r(&self.annotations),
            model: r(&self.model),
            reports: r(&self.reports),
            world: r(&self.world),
            selections: r(&self.selections),
            sft: r(&self.sft),
            errors: r(&self.errors),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompeteConfig {
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    /// World profile for mock generation.
    pub profile: String,
    /// Samples per (problem, topology).
    pub n: u32,
    pub seed: u64,
    /// Problems written by `make-problems`.
    pub problems: usize,
    pub max_depth: u32,
    pub num_children: u32,
    pub num_neighbors: u32,
    pub temperature: f64,
    /// Gain of the tuned world used for the hybrid report row; 0 disables it.
    pub tuning_gain: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let p = GenerationParams::default();
        GenerationConfig {
            profile: "topology-skewed".into(),
            n: 200,
            seed: 0,
            problems: 60,
            max_depth: p.max_depth,
            num_children: p.num_children,
            num_neighbors: p.num_neighbors,
            temperature: p.temperature,
            tuning_gain: 0.2,
        }
    }
}

impl GenerationConfig {
    pub fn params(&self) -> GenerationParams {
        GenerationParams {
            max_depth: self.max_depth,
            num_children: self.num_children,
            num_neighbors: self.num_neighbors,
            samples_per_topology: self.n,
            temperature: self.temperature,
        }
    }
}

/// The whole pipeline configuration, one JSON document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub segment: SegmentationConfig,
    pub trm: TrainingConfig,
    pub compete: CompeteConfig,
    pub curate: CurationConfig,
    pub generation: GenerationConfig,
    /// When present, `generate` calls this endpoint instead of the mock world.
    pub endpoint: Option<EndpointConfig>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Seeds every seeded stage from one value.
    pub fn set_seed(&mut self, seed: u64) {
        self.generation.seed = seed;
        self.trm.seed = seed;
        self.curate.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.segment.validate()?;
        self.trm.validate()?;
        self.curate.validate()?;
        self.generation.params().validate()?;
        if !(0.0..=1.0).contains(&self.generation.tuning_gain) {
            bail!("generation.tuning_gain must lie in [0, 1]");
        }
        if let Some(e) = &self.endpoint {
            e.validate()?;
        }
        Ok(())
    }
}
