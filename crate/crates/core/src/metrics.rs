//! Accuracy, rank correlation and report assembly.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tag::compute_win_rates;
use crate::types::{PerTopology, ResponseRecord, Topology};

/// Reward model evaluation figures attached to a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrmEval {
    pub spearman_rho: Option<f64>,
    pub pairwise_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub overall_accuracy: f64,
    /// `None` for a topology with no responses in scope.
    pub accuracy: PerTopology<Option<f64>>,
    pub win_rate: PerTopology<f64>,
    /// Correctness of the single chosen answer per problem, for strategy reports.
    pub answer_accuracy: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub pairwise_accuracy: Option<f64>,
    /// Mean whitespace-split word count.
    pub mean_response_length: f64,
}

impl MetricReport {
    /// `(metric, scope, value)` rows; absent values are skipped.
    pub fn rows(&self) -> Vec<(String, String, f64)> {
        let mut rows = vec![(
            "accuracy".to_string(),
            "overall".to_string(),
            self.overall_accuracy,
        )];
        for (t, acc) in self.accuracy.iter() {
            if let Some(a) = acc {
                rows.push(("accuracy".into(), t.to_string(), *a));
            }
        }
        for (t, w) in self.win_rate.iter() {
            rows.push(("win_rate".into(), t.to_string(), *w));
        }
        let optional = [
            ("answer_accuracy", self.answer_accuracy),
            ("spearman_rho", self.spearman_rho),
            ("pairwise_accuracy", self.pairwise_accuracy),
        ];
        for (name, v) in optional {
            if let Some(v) = v {
                rows.push((name.into(), "overall".into(), v));
            }
        }
        rows.push((
            "mean_response_length".into(),
            "overall".into(),
            self.mean_response_length,
        ));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,scope,value\n");
        for (m, s, v) in self.rows() {
            out.push_str(&format!("{m},{s},{v}\n"));
        }
        out
    }
}

/// Mean hard label over `responses`, optionally restricted to one topology.
pub fn accuracy(responses: &[ResponseRecord], filter: Option<Topology>) -> Result<f64> {
    let mut n = 0usize;
    let mut correct = 0usize;
    for r in responses.iter().filter(|r| filter.is_none_or(|t| r.topology == t)) {
        let label = r
            .hard_label
            .ok_or_else(|| Error::invalid(format!("response {} has no hard label", r.id)))?;
        n += 1;
        correct += usize::from(label == 1);
    }
    if n == 0 {
        return Err(Error::invalid(match filter {
            Some(t) => format!("no {t} responses to score"),
            None => "no responses to score".to_string(),
        }));
    }
    Ok(correct as f64 / n as f64)
}

/// Ranks 1..=n by ascending value; ties share the mean of the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot rank an empty list"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("cannot rank NaN"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    Ok(ranks)
}

/// Spearman's rho as the Pearson correlation of fractional ranks.
pub fn spearman_rho(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} truth vs {} predicted",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.len() < 2 {
        return Err(Error::invalid("spearman needs at least two observations"));
    }
    let rx = fractional_ranks(truth)?;
    let ry = fractional_ranks(predicted)?;
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid(
            "spearman undefined: one side has zero rank variance",
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Fraction of `(preferred, dispreferred)` pairs ordered correctly; exact
/// ties count one half.
pub fn pairwise_accuracy(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("pairwise accuracy of no pairs"));
    }
    let score: f64 = pairs
        .iter()
        .map(|&(pos, neg)| {
            if pos > neg {
                1.0
            } else if pos == neg {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(score / pairs.len() as f64)
}

pub fn mean_response_length(responses: &[ResponseRecord]) -> f64 {
    if responses.is_empty() {
        return 0.0;
    }
    let total: usize = responses.iter().map(ResponseRecord::length_words).sum();
    total as f64 / responses.len() as f64
}

/// Dataset-level report: response accuracy per topology, win rates from the
/// annotations, and optional reward model figures.
pub fn build_report(dataset: &Dataset, trm_eval: Option<&TrmEval>) -> Result<MetricReport> {
    let overall_accuracy = accuracy(&dataset.responses, None)?;
    let mut per = PerTopology::default();
    for t in Topology::ALL {
        if dataset.responses.iter().any(|r| r.topology == t) {
            per[t] = Some(accuracy(&dataset.responses, Some(t))?);
        }
    }
    let win_rate = compute_win_rates(&dataset.annotations)?;
    Ok(MetricReport {
        overall_accuracy,
        accuracy: per,
        win_rate,
        answer_accuracy: None,
        spearman_rho: trm_eval.and_then(|e| e.spearman_rho),
        pairwise_accuracy: trm_eval.and_then(|e| e.pairwise_accuracy),
        mean_response_length: mean_response_length(&dataset.responses),
    })
}
