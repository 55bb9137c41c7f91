use crate::error::Result;
use crate::generation::world::SyntheticWorld;
use crate::trm::{featurize, TrmModel};
use crate::types::{Problem, ResponseRecord, RewardScores};

/// Anything that can produce both reward heads for a response in one call.
pub trait Scorer: Sync {
    fn score(&self, problem: &Problem, response: &ResponseRecord) -> Result<RewardScores>;
}

impl Scorer for TrmModel {
    fn score(&self, problem: &Problem, response: &ResponseRecord) -> Result<RewardScores> {
        self.forward(&featurize(problem, response, &self.feature))
    }
}

/// Oracle-faithful scorer for a synthetic world: the regression head returns
/// the planted probability of the response's topology and the ranking head
/// is 1 for the reference answer, 0 otherwise.
pub struct PlantedScorer<'w> {
    pub world: &'w SyntheticWorld,
}

impl Scorer for PlantedScorer<'_> {
    fn score(&self, problem: &Problem, response: &ResponseRecord) -> Result<RewardScores> {
        let entry = self.world.entry(&problem.id)?;
        let rank = if response.final_answer == entry.reference_answer { 1.0 } else { 0.0 };
        Ok(RewardScores {
            topo: entry.p[response.topology],
            rank,
        })
    }
}
