use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::jsonl::read_jsonl;
use crate::types::{Problem, ResponseRecord, TopoAnnotation};

/// Problems, their responses and (once annotated) their topology labels.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub problems: Vec<Problem>,
    pub responses: Vec<ResponseRecord>,
    pub annotations: Vec<TopoAnnotation>,
}

impl Dataset {
    pub fn new(problems: Vec<Problem>, responses: Vec<ResponseRecord>) -> Self {
        Dataset {
            problems,
            responses,
            annotations: Vec::new(),
        }
    }

    pub fn load(
        problems: impl AsRef<Path>,
        responses: impl AsRef<Path>,
        annotations: Option<&Path>,
    ) -> Result<Self> {
        let mut ds = Dataset::new(read_jsonl(problems)?, read_jsonl(responses)?);
        if let Some(a) = annotations {
            ds.annotations = read_jsonl(a)?;
        }
        ds.check_references()?;
        Ok(ds)
    }

    /// Fails with every response id whose `problem_id` is unknown.
    pub fn check_references(&self) -> Result<()> {
        let known: std::collections::HashSet<&str> =
            self.problems.iter().map(|p| p.id.as_str()).collect();
        let dangling: Vec<String> = self
            .responses
            .iter()
            .filter(|r| !known.contains(r.problem_id.as_str()))
            .map(|r| format!("{} -> {}", r.id, r.problem_id))
            .collect();
        if !dangling.is_empty() {
            return Err(Error::invalid(format!(
                "responses reference unknown problems: {}",
                dangling.join(", ")
            )));
        }
        for a in &self.annotations {
            if !known.contains(a.problem_id.as_str()) {
                return Err(Error::invalid(format!(
                    "annotation references unknown problem {}",
                    a.problem_id
                )));
            }
        }
        Ok(())
    }

    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.id == id)
    }

    pub fn problems_by_id(&self) -> BTreeMap<&str, &Problem> {
        self.problems.iter().map(|p| (p.id.as_str(), p)).collect()
    }

    /// Responses grouped by problem id, in id order, input order within a group.
    pub fn responses_by_problem(&self) -> BTreeMap<&str, Vec<&ResponseRecord>> {
        let mut out: BTreeMap<&str, Vec<&ResponseRecord>> = BTreeMap::new();
        for r in &self.responses {
            out.entry(r.problem_id.as_str()).or_default().push(r);
        }
        out
    }

    pub fn annotations_by_problem(&self) -> BTreeMap<&str, &TopoAnnotation> {
        self.annotations
            .iter()
            .map(|a| (a.problem_id.as_str(), a))
            .collect()
    }
}
