use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};
use crate::generation::world::SyntheticWorld;
use crate::types::{Problem, ResponseRecord, Topology};

pub const MOCK_GENERATOR: &str = "mock";

pub const CORRECT_CLOSER: &str = "Check: substituting back confirms the result.";
pub const INCORRECT_CLOSER: &str = "Check: this is my best estimate.";

/// Per-(seed, problem, topology) stream so that each cell is reproducible on
/// its own, independent of generation order.
fn cell_rng(seed: u64, problem_id: &str, topology: Topology) -> ChaCha8Rng {
    let key = format!("{seed}:{problem_id}:{}", topology.as_str());
    ChaCha8Rng::seed_from_u64(xxh3_64(key.as_bytes()))
}

fn reasoning_stub(topology: Topology, rng: &mut ChaCha8Rng) -> String {
    match topology {
        Topology::CoT => {
            let steps = rng.gen_range(2..=4);
            (1..=steps)
                .map(|i| format!("Step {i}: work out the next quantity from the previous step."))
                .collect::<Vec<_>>()
                .join("\n")
        }
        Topology::ToT => {
            let branches = rng.gen_range(2..=3);
            let depth = rng.gen_range(2..=3);
            let mut lines = Vec::new();
            for b in 1..=branches {
                lines.push(format!("Branch {b}: consider an alternative decomposition of the problem."));
                for d in 1..=depth {
                    lines.push(format!(
                        "  Level {d}: expand branch {b}, compute the partial result and evaluate it."
                    ));
                }
            }
            lines.push("Select the most promising branch and commit to its result.".into());
            lines.join("\n")
        }
        Topology::GoT => {
            let nodes = rng.gen_range(3..=5);
            let mut lines = Vec::new();
            for n in 1..=nodes {
                lines.push(format!("Node {n}: derive an intermediate quantity from the problem statement."));
                if n > 1 {
                    lines.push(format!(
                        "  Edge {}->{n}: combine node {} with node {n} and reconcile the values.",
                        n - 1,
                        n - 1
                    ));
                }
            }
            lines.push("Aggregate the connected nodes into a single consistent conclusion.".into());
            lines.join("\n")
        }
    }
}

/// Draws `n` responses for `(problem, topology)`; each is correct
/// independently with the planted probability.
pub fn mock_generate(
    world: &SyntheticWorld,
    problem: &Problem,
    topology: Topology,
    n: usize,
    seed: u64,
) -> Result<Vec<ResponseRecord>> {
    if n == 0 {
        return Err(Error::invalid("mock_generate needs n >= 1"));
    }
    let entry = world.entry(&problem.id)?;
    let p = entry.p[topology];
    let mut rng = cell_rng(seed, &problem.id, topology);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let correct = rng.gen_bool(p.clamp(0.0, 1.0));
        let answer = if correct || entry.wrong_answers.is_empty() {
            entry.reference_answer.as_str()
        } else {
            entry.wrong_answers[rng.gen_range(0..entry.wrong_answers.len())].as_str()
        };
        let closer = if correct { CORRECT_CLOSER } else { INCORRECT_CLOSER };
        let stub = reasoning_stub(topology, &mut rng);
        let text = format!("{stub}\n{closer}\nFinal Answer: {answer}");
        let id = format!("{}-{}-{i:04}", problem.id, topology.as_str());
        out.push(ResponseRecord::from_text(id, &problem.id, topology, text, MOCK_GENERATOR, seed));
    }
    Ok(out)
}
