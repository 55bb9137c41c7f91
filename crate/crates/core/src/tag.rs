//! Automatic annotation: hard labels, per-topology topo labels, win rates and
//! quantile-based difficulty segmentation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::answer::canonicalize_answer;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::types::{DifficultyTier, PerTopology, Problem, ResponseRecord, TopoAnnotation, Topology};

/// Fractional win credit of one problem. Credits sum to one and are split
/// equally among the topologies tied at the maximal topo label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinCredit {
    pub problem_id: String,
    pub credit: PerTopology<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub q_low: f64,
    pub q_high: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            q_low: 0.25,
            q_high: 0.75,
        }
    }
}

impl SegmentationConfig {
    pub fn new(q_low: f64, q_high: f64) -> Result<Self> {
        let cfg = SegmentationConfig { q_low, q_high };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |q: f64| q > 0.0 && q < 1.0;
        if !open_unit(self.q_low) || !open_unit(self.q_high) {
            return Err(Error::Config(format!(
                "segment quantiles must lie in (0, 1), got {} and {}",
                self.q_low, self.q_high
            )));
        }
        if self.q_low >= self.q_high {
            return Err(Error::Config(format!(
                "segment.q_low ({}) must be below segment.q_high ({})",
                self.q_low, self.q_high
            )));
        }
        Ok(())
    }
}

/// Labels a response 1 if its final answer matches the reference, else 0.
/// The label is also stored on the record.
pub fn assign_hard_label(response: &mut ResponseRecord, problem: &Problem) -> Result<u8> {
    if response.problem_id != problem.id {
        return Err(Error::invalid(format!(
            "response {} belongs to problem {}, not {}",
            response.id, response.problem_id, problem.id
        )));
    }
    let answer = canonicalize_answer(&response.final_answer);
    let correct = !answer.is_empty() && answer == canonicalize_answer(&problem.reference_answer);
    let label = u8::from(correct);
    response.hard_label = Some(label);
    Ok(label)
}

pub fn compute_topo_annotation(
    problem_id: &str,
    responses: &[&ResponseRecord],
) -> Result<TopoAnnotation> {
    if responses.is_empty() {
        return Err(Error::invalid(format!(
            "problem {problem_id}: no responses to annotate"
        )));
    }
    let mut counts = PerTopology::<[u32; 2]>::default();
    for r in responses {
        if r.problem_id != problem_id {
            return Err(Error::invalid(format!(
                "response {} belongs to {}, not {problem_id}",
                r.id, r.problem_id
            )));
        }
        let label = r.hard_label.ok_or_else(|| {
            Error::invalid(format!("response {} has no hard label", r.id))
        })?;
        let c = &mut counts[r.topology];
        c[0] += u32::from(label == 1);
        c[1] += 1;
    }
    let topo_labels = counts.map(|_, &[c, n]| {
        if n > 0 {
            f64::from(c) / f64::from(n)
        } else {
            0.0
        }
    });
    let max_topo_label = Topology::ALL
        .into_iter()
        .filter(|&t| counts[t][1] > 0)
        .map(|t| topo_labels[t])
        .fold(0.0, f64::max);
    Ok(TopoAnnotation {
        problem_id: problem_id.to_string(),
        counts,
        topo_labels,
        max_topo_label,
        difficulty: None,
    })
}

pub fn compute_win_credit(annotation: &TopoAnnotation) -> Result<WinCredit> {
    let winners = annotation.argmax_topologies();
    if winners.is_empty() {
        return Err(Error::invalid(format!(
            "problem {}: no topology has responses",
            annotation.problem_id
        )));
    }
    let share = 1.0 / winners.len() as f64;
    let credit = PerTopology::from_fn(|t| if winners.contains(&t) { share } else { 0.0 });
    Ok(WinCredit {
        problem_id: annotation.problem_id.clone(),
        credit,
    })
}

/// Fraction of problems won by each topology, ties sharing credit equally.
///
/// Credits are accumulated as exact integer sixths so the result does not
/// depend on the order of `annotations`.
pub fn compute_win_rates(annotations: &[TopoAnnotation]) -> Result<PerTopology<f64>> {
    if annotations.is_empty() {
        return Err(Error::invalid("win rates need at least one annotation"));
    }
    let mut sixths = PerTopology::<u64>::default();
    for a in annotations {
        let winners = a.argmax_topologies();
        let per_winner = match winners.len() {
            1 => 6,
            2 => 3,
            3 => 2,
            _ => {
                return Err(Error::invalid(format!(
                    "problem {}: no topology has responses",
                    a.problem_id
                )))
            }
        };
        for t in winners {
            sixths[t] += per_winner;
        }
    }
    let denom = 6.0 * annotations.len() as f64;
    Ok(sixths.map(|_, &s| s as f64 / denom))
}

/// Linearly interpolated quantile of `values` at `p`.
pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty list"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("quantile level {p} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let base = sorted[lo];
    if frac == 0.0 {
        return Ok(base);
    }
    Ok(base + frac * (sorted[lo + 1] - base))
}

/// Per-topology thresholds used by [`segment_difficulty`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub low: PerTopology<f64>,
    pub high: PerTopology<f64>,
}

pub fn difficulty_thresholds(
    annotations: &[TopoAnnotation],
    config: &SegmentationConfig,
) -> Result<Thresholds> {
    config.validate()?;
    if annotations.len() < 2 {
        return Err(Error::invalid(format!(
            "difficulty segmentation needs at least 2 problems, got {}",
            annotations.len()
        )));
    }
    let mut low = PerTopology::default();
    let mut high = PerTopology::default();
    for t in Topology::ALL {
        let labels: Vec<f64> = annotations.iter().map(|a| a.topo_labels[t]).collect();
        low[t] = quantile(&labels, config.q_low)?;
        high[t] = quantile(&labels, config.q_high)?;
    }
    Ok(Thresholds { low, high })
}

pub fn classify(annotation: &TopoAnnotation, th: &Thresholds) -> DifficultyTier {
    let labels = &annotation.topo_labels;
    if Topology::ALL.iter().all(|&t| labels[t] < th.low[t]) {
        DifficultyTier::Hard
    } else if Topology::ALL.iter().all(|&t| labels[t] > th.high[t]) {
        DifficultyTier::Easy
    } else {
        DifficultyTier::Medium
    }
}

/// Assigns every annotation a tier: Hard when all three labels fall strictly
/// below their topology's low quantile, Easy when all three strictly exceed
/// the high quantile, Medium otherwise.
pub fn segment_difficulty(
    annotations: &[TopoAnnotation],
    config: &SegmentationConfig,
) -> Result<Vec<TopoAnnotation>> {
    let th = difficulty_thresholds(annotations, config)?;
    Ok(annotations
        .iter()
        .map(|a| TopoAnnotation {
            difficulty: Some(classify(a, &th)),
            ..a.clone()
        })
        .collect())
}

pub fn tier_counts(annotations: &[TopoAnnotation]) -> BTreeMap<DifficultyTier, usize> {
    let mut out: BTreeMap<DifficultyTier, usize> =
        DifficultyTier::ALL.iter().map(|&t| (t, 0)).collect();
    for a in annotations {
        if let Some(d) = a.difficulty {
            *out.entry(d).or_default() += 1;
        }
    }
    out
}

/// Hard-labels every response and annotates every problem that has responses.
/// Annotations come out in problem id order.
pub fn annotate_dataset(dataset: &mut Dataset) -> Result<()> {
    dataset.check_references()?;
    let problems: BTreeMap<String, Problem> = dataset
        .problems
        .iter()
        .map(|p| (p.id.clone(), p.clone()))
        .collect();
    for r in &mut dataset.responses {
        let problem = &problems[&r.problem_id];
        assign_hard_label(r, problem)?;
    }
    let annotations = dataset
        .responses_by_problem()
        .into_iter()
        .map(|(pid, rs)| compute_topo_annotation(pid, &rs))
        .collect::<Result<Vec<_>>>()?;
    dataset.annotations = annotations;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(pid: &str, t: Topology, idx: usize, correct: bool) -> ResponseRecord {
        let mut r = ResponseRecord::from_text(
            format!("{pid}-{t}-{idx}"),
            pid,
            t,
            format!("#### {}", if correct { 72 } else { 71 }),
            "test",
            0,
        );
        r.hard_label = Some(u8::from(correct));
        r
    }

    fn responses(pid: &str, cells: &[(Topology, u32, u32)]) -> Vec<ResponseRecord> {
        let mut out = Vec::new();
        for &(t, c, n) in cells {
            for i in 0..n {
                out.push(labeled(pid, t, i as usize, i < c));
            }
        }
        out
    }

    fn annotate(pid: &str, cells: &[(Topology, u32, u32)]) -> TopoAnnotation {
        let rs = responses(pid, cells);
        let refs: Vec<&ResponseRecord> = rs.iter().collect();
        compute_topo_annotation(pid, &refs).unwrap()
    }

    fn with_labels(pid: &str, labels: [(u32, u32); 3]) -> TopoAnnotation {
        annotate(
            pid,
            &[
                (Topology::CoT, labels[0].0, labels[0].1),
                (Topology::ToT, labels[1].0, labels[1].1),
                (Topology::GoT, labels[2].0, labels[2].1),
            ],
        )
    }

    #[test]
    fn hard_label_examples() {
        let p = Problem::new("p", "q", "72");
        let mut r = ResponseRecord::from_text("r", "p", Topology::CoT, "#### 72", "t", 0);
        assert_eq!(assign_hard_label(&mut r, &p).unwrap(), 1);
        assert_eq!(r.hard_label, Some(1));
        let mut r = ResponseRecord::from_text("r", "p", Topology::CoT, "#### 71", "t", 0);
        assert_eq!(assign_hard_label(&mut r, &p).unwrap(), 0);
        let mut r = ResponseRecord::from_text("r", "p", Topology::CoT, "nothing here", "t", 0);
        assert_eq!(r.final_answer, "");
        assert_eq!(assign_hard_label(&mut r, &p).unwrap(), 0);
    }

    #[test]
    fn hard_label_rejects_wrong_problem() {
        let p = Problem::new("p", "q", "72");
        let mut r = ResponseRecord::from_text("r", "other", Topology::CoT, "#### 72", "t", 0);
        assert!(assign_hard_label(&mut r, &p).is_err());
    }

    #[test]
    fn topo_annotation_examples() {
        let a = with_labels("p", [(3, 5), (1, 5), (2, 5)]);
        assert_eq!(a.topo_labels.cot, 0.6);
        assert_eq!(a.topo_labels.tot, 0.2);
        assert_eq!(a.topo_labels.got, 0.4);
        assert_eq!(a.max_topo_label, 0.6);

        let a = with_labels("p", [(0, 5), (0, 5), (0, 5)]);
        assert_eq!(a.topo_labels, PerTopology { cot: 0.0, tot: 0.0, got: 0.0 });
        assert_eq!(a.max_topo_label, 0.0);

        let a = annotate("p", &[(Topology::CoT, 5, 5), (Topology::GoT, 0, 5)]);
        assert_eq!(a.topo_labels, PerTopology { cot: 1.0, tot: 0.0, got: 0.0 });
        assert_eq!(a.max_topo_label, 1.0);
        assert_eq!(a.counts.tot, [0, 0]);
    }

    #[test]
    fn topo_annotation_errors() {
        assert!(compute_topo_annotation("p", &[]).is_err());
        let mut r = labeled("p", Topology::CoT, 0, true);
        r.hard_label = None;
        assert!(compute_topo_annotation("p", &[&r]).is_err());
        let r = labeled("other", Topology::CoT, 0, true);
        assert!(compute_topo_annotation("p", &[&r]).is_err());
    }

    #[test]
    fn win_credit_examples() {
        let c = compute_win_credit(&with_labels("p", [(3, 5), (1, 5), (2, 5)])).unwrap();
        assert_eq!(c.credit, PerTopology { cot: 1.0, tot: 0.0, got: 0.0 });
        let c = compute_win_credit(&with_labels("p", [(1, 2), (2, 4), (1, 5)])).unwrap();
        assert_eq!(c.credit, PerTopology { cot: 0.5, tot: 0.5, got: 0.0 });
        let c = compute_win_credit(&with_labels("p", [(2, 5), (2, 5), (2, 5)])).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(c.credit, PerTopology { cot: third, tot: third, got: third });
    }

    #[test]
    fn missing_topology_never_wins() {
        // all observed labels are zero; the unobserved one must not share credit
        let a = annotate("p", &[(Topology::CoT, 0, 3), (Topology::GoT, 0, 3)]);
        let c = compute_win_credit(&a).unwrap();
        assert_eq!(c.credit, PerTopology { cot: 0.5, tot: 0.0, got: 0.5 });
    }

    #[test]
    fn win_credit_requires_data() {
        let a = TopoAnnotation {
            problem_id: "p".into(),
            counts: PerTopology::default(),
            topo_labels: PerTopology::default(),
            max_topo_label: 0.0,
            difficulty: None,
        };
        assert!(compute_win_credit(&a).is_err());
        assert!(compute_win_rates(&[a]).is_err());
        assert!(compute_win_rates(&[]).is_err());
    }

    /// Win rates by brute force: count problems per argmax topology, with ties
    /// enumerated by hand as fractional shares.
    fn brute_force_win_rates(winner_sets: &[&[Topology]]) -> PerTopology<f64> {
        let mut acc = PerTopology::<f64>::default();
        for set in winner_sets {
            for &t in *set {
                acc[t] += 1.0 / set.len() as f64;
            }
        }
        acc.map(|_, v| v / winner_sets.len() as f64)
    }

    #[test]
    fn win_rate_examples() {
        let anns = vec![
            with_labels("a", [(4, 5), (1, 5), (1, 5)]),
            with_labels("b", [(5, 5), (4, 5), (0, 5)]),
            with_labels("c", [(1, 5), (3, 5), (2, 5)]),
            with_labels("d", [(0, 5), (1, 5), (2, 5)]),
        ];
        let expected = brute_force_win_rates(&[
            &[Topology::CoT],
            &[Topology::CoT],
            &[Topology::ToT],
            &[Topology::GoT],
        ]);
        assert_eq!(expected, PerTopology { cot: 0.5, tot: 0.25, got: 0.25 });
        assert_eq!(compute_win_rates(&anns).unwrap(), expected);

        let all_cot = vec![
            with_labels("a", [(2, 2), (1, 2), (0, 2)]),
            with_labels("b", [(1, 2), (0, 2), (0, 2)]),
        ];
        assert_eq!(
            compute_win_rates(&all_cot).unwrap(),
            PerTopology { cot: 1.0, tot: 0.0, got: 0.0 }
        );

        let tie = vec![
            with_labels("a", [(1, 2), (1, 2), (0, 2)]),
            with_labels("b", [(0, 2), (0, 2), (1, 2)]),
        ];
        let expected = brute_force_win_rates(&[&[Topology::CoT, Topology::ToT], &[Topology::GoT]]);
        assert_eq!(expected, PerTopology { cot: 0.25, tot: 0.25, got: 0.5 });
        assert_eq!(compute_win_rates(&tie).unwrap(), expected);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[0.0, 1.0], 0.5).unwrap(), 0.5);
        // h = 0.25 * 3 = 0.75 -> 1 + 0.75 * (2 - 1)
        assert_eq!(quantile(&[4.0, 2.0, 1.0, 3.0], 0.25).unwrap(), 1.75);
        assert_eq!(quantile(&[5.0, -2.0, 9.0], 0.0).unwrap(), -2.0);
        assert_eq!(quantile(&[5.0, -2.0, 9.0], 1.0).unwrap(), 9.0);
        assert!(quantile(&[], 0.5).is_err());
        assert!(quantile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn segmentation_examples() {
        let anns = vec![
            with_labels("hard", [(0, 10), (0, 10), (1, 10)]),
            with_labels("m1", [(5, 10), (4, 10), (5, 10)]),
            with_labels("m2", [(6, 10), (5, 10), (4, 10)]),
            with_labels("m3", [(4, 10), (6, 10), (5, 10)]),
            with_labels("mixed", [(10, 10), (5, 10), (9, 10)]),
            with_labels("easy", [(10, 10), (10, 10), (10, 10)]),
        ];
        let th = difficulty_thresholds(&anns, &SegmentationConfig::default()).unwrap();
        let seg = segment_difficulty(&anns, &SegmentationConfig::default()).unwrap();
        let tier = |id: &str| seg.iter().find(|a| a.problem_id == id).unwrap().difficulty;
        assert!(Topology::ALL.iter().all(|&t| anns[0].topo_labels[t] < th.low[t]));
        assert_eq!(tier("hard"), Some(DifficultyTier::Hard));
        assert!(anns[4].topo_labels.cot > th.high.cot);
        assert_eq!(tier("mixed"), Some(DifficultyTier::Medium));
        assert_eq!(tier("easy"), Some(DifficultyTier::Easy));
    }

    #[test]
    fn identical_labels_are_all_medium() {
        let anns: Vec<_> = (0..6)
            .map(|i| with_labels(&format!("p{i}"), [(3, 6), (2, 6), (5, 6)]))
            .collect();
        let seg = segment_difficulty(&anns, &SegmentationConfig::default()).unwrap();
        assert!(seg.iter().all(|a| a.difficulty == Some(DifficultyTier::Medium)));
    }

    #[test]
    fn segmentation_config_errors() {
        assert!(SegmentationConfig::new(0.6, 0.4).is_err());
        assert!(SegmentationConfig::new(0.5, 0.5).is_err());
        assert!(SegmentationConfig::new(0.0, 0.5).is_err());
        let anns = vec![with_labels("a", [(1, 2), (1, 2), (1, 2)])];
        assert!(segment_difficulty(&anns, &SegmentationConfig::default()).is_err());
    }
}
