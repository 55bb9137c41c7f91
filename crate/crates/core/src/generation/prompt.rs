use crate::types::{GenerationParams, Topology};

pub const ANSWER_INSTRUCTION: &str =
    "End your response with a single line of the form \"Final Answer: <answer>\".";

/// Renders the generation prompt for one question under one topology.
pub fn render_prompt(question: &str, topology: Topology, params: &GenerationParams) -> String {
    let method = match topology {
        Topology::CoT => format!(
            "Solve the problem by reasoning step by step in a single linear chain of at most {} steps. \
             Each step should follow directly from the previous one.",
            params.max_depth
        ),
        Topology::ToT => format!(
            "Solve the problem with a tree of thoughts. At each level propose up to {} alternative \
             branches, evaluate each branch briefly, and expand only the most promising ones. \
             Explore to a depth of at most {}. Then commit to the best branch and state its result.",
            params.num_children, params.max_depth
        ),
        Topology::GoT => format!(
            "Solve the problem with a graph of thoughts. Write intermediate thoughts as labelled nodes; \
             each node may connect to up to {} other nodes whose results it uses or refines. \
             Merge and reconcile connected thoughts over at most {} rounds before concluding.",
            params.num_neighbors, params.max_depth
        ),
    };
    format!("{method}\n\nProblem:\n{question}\n\n{ANSWER_INSTRUCTION}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let p = GenerationParams::default();
        assert_eq!(
            render_prompt("What is 2+2?", Topology::GoT, &p),
            render_prompt("What is 2+2?", Topology::GoT, &p)
        );
    }

    #[test]
    fn tot_mentions_branching_values() {
        let p = GenerationParams {
            max_depth: 7,
            num_children: 5,
            ..Default::default()
        };
        let text = render_prompt("q", Topology::ToT, &p);
        assert!(text.contains("up to 5 alternative"));
        assert!(text.contains("depth of at most 7"));
    }

    #[test]
    fn got_mentions_neighbors() {
        let p = GenerationParams {
            num_neighbors: 4,
            ..Default::default()
        };
        assert!(render_prompt("q", Topology::GoT, &p).contains("up to 4 other nodes"));
    }

    #[test]
    fn every_prompt_demands_final_answer() {
        let p = GenerationParams::default();
        for t in Topology::ALL {
            let text = render_prompt("Compute 3*7.", t, &p);
            assert!(text.contains("Final Answer:"), "{t}");
            assert!(text.contains("Compute 3*7."));
        }
    }
}
