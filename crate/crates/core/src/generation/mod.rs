//! Response acquisition: prompt templates, the seeded mock world and an HTTP
//! client, all behind [`ResponseGenerator`].

pub mod http;
pub mod mock;
pub mod prompt;
pub mod world;

pub use http::{http_generate, http_generate_batch, EndpointConfig, RequestFailure, GenerationRequest};
pub use mock::{mock_generate, MOCK_GENERATOR};
pub use prompt::{render_prompt, ANSWER_INSTRUCTION};
pub use world::{
    plant_world, plant_world_with, synthetic_problems, wrong_answer_pool, ProfileRegistry,
    SyntheticWorld, WorldEntry, WorldProfile,
};

use crate::error::Result;
use crate::types::{GenerationParams, Problem, ResponseRecord, Topology};

/// Records produced by a generation run, plus requests that failed for good.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationRun {
    pub records: Vec<ResponseRecord>,
    pub failures: Vec<RequestFailure>,
}

/// Produces `params.samples_per_topology` responses for every
/// (problem, topology) pair, ordered by problem, then topology, then sample.
pub trait ResponseGenerator {
    fn name(&self) -> &str;
    fn generate(&self, problems: &[Problem], params: &GenerationParams, seed: u64) -> Result<GenerationRun>;
}

pub struct MockGenerator<'w> {
    pub world: &'w SyntheticWorld,
}

impl ResponseGenerator for MockGenerator<'_> {
    fn name(&self) -> &str {
        MOCK_GENERATOR
    }

    fn generate(&self, problems: &[Problem], params: &GenerationParams, seed: u64) -> Result<GenerationRun> {
        params.validate()?;
        let n = params.samples_per_topology as usize;
        let mut records = Vec::with_capacity(problems.len() * 3 * n);
        for problem in problems {
            for t in Topology::ALL {
                records.extend(mock_generate(self.world, problem, t, n, seed)?);
            }
        }
        Ok(GenerationRun {
            records,
            failures: Vec::new(),
        })
    }
}

pub struct HttpGenerator {
    pub endpoint: EndpointConfig,
}

impl ResponseGenerator for HttpGenerator {
    fn name(&self) -> &str {
        &self.endpoint.model_name
    }

    fn generate(&self, problems: &[Problem], params: &GenerationParams, seed: u64) -> Result<GenerationRun> {
        let n = params.samples_per_topology as usize;
        let mut requests = Vec::with_capacity(problems.len() * 3 * n);
        for problem in problems {
            for topology in Topology::ALL {
                for sample_index in 0..n {
                    requests.push(GenerationRequest {
                        problem,
                        topology,
                        sample_index,
                    });
                }
            }
        }
        let (records, failures) = http_generate_batch(&self.endpoint, &requests, params, seed)?;
        Ok(GenerationRun { records, failures })
    }
}

/// Mock-generates `samples_per_topology` responses per cell and runs the
/// full annotation pass.
pub fn simulate_dataset(
    world: &SyntheticWorld,
    problems: &[Problem],
    params: &GenerationParams,
    seed: u64,
) -> Result<crate::dataset::Dataset> {
    let run = MockGenerator { world }.generate(problems, params, seed)?;
    let mut dataset = crate::dataset::Dataset::new(problems.to_vec(), run.records);
    crate::tag::annotate_dataset(&mut dataset)?;
    Ok(dataset)
}
