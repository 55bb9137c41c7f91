//! Multi-task objective: mean squared error on the regression head plus a
//! logistic pairwise ranking loss on the ranking head, with backpropagation.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::model::{activations, Params, TrmModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub beta: f64,
    pub lambda_mse: f64,
    pub lambda_rank: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta: 1.0,
            lambda_mse: 1.0,
            lambda_rank: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.lambda_mse >= 0.0) || !(self.lambda_rank >= 0.0) {
            return Err(Error::Config("loss weights must be >= 0".into()));
        }
        if self.lambda_mse + self.lambda_rank <= 0.0 {
            return Err(Error::Config(
                "lambda_mse + lambda_rank must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Features paired with the topo label of the response's own topology.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionItem {
    pub features: FeatureVector,
    pub target: f64,
}

/// Features of a correct (preferred) and an incorrect response to one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct PairItem {
    pub preferred: FeatureVector,
    pub dispreferred: FeatureVector,
}

#[derive(Clone, Debug, Default)]
pub struct Batch<'a> {
    pub regression: Vec<&'a RegressionItem>,
    pub pairs: Vec<&'a PairItem>,
}

impl<'a> Batch<'a> {
    pub fn new(regression: &'a [RegressionItem], pairs: &'a [PairItem]) -> Self {
        Batch {
            regression: regression.iter().collect(),
            pairs: pairs.iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.regression.is_empty() && self.pairs.is_empty()
    }
}

pub fn mse_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} targets",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("mse of an empty list"));
    }
    let sum: f64 = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `log(1 + exp(-beta * (pos - neg)))` for one pair.
pub fn pairwise_rank_loss(pos: f64, neg: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be > 0, got {beta}")));
    }
    Ok(softplus(-beta * (pos - neg)))
}

/// Mean pairwise ranking loss over `(preferred, dispreferred)` scores.
pub fn mean_rank_loss(pairs: &[(f64, f64)], beta: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("ranking loss of no pairs"));
    }
    let mut sum = 0.0;
    for &(p, n) in pairs {
        sum += pairwise_rank_loss(p, n, beta)?;
    }
    Ok(sum / pairs.len() as f64)
}

fn check_batch(batch: &Batch<'_>, weights: &LossWeights) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("batch has neither regression items nor pairs"));
    }
    if !(weights.beta > 0.0) {
        return Err(Error::invalid(format!("beta must be > 0, got {}", weights.beta)));
    }
    Ok(())
}

/// `lambda_mse * L_mse + lambda_rank * L_rank`; an empty sub-batch adds zero.
pub fn combined_loss(model: &TrmModel, batch: &Batch<'_>, weights: &LossWeights) -> Result<f64> {
    params_loss(&model.params, batch, weights)
}

pub(crate) fn params_loss(p: &Params, batch: &Batch<'_>, weights: &LossWeights) -> Result<f64> {
    check_batch(batch, weights)?;
    let mut total = 0.0;
    if !batch.regression.is_empty() {
        let mut pred = Vec::with_capacity(batch.regression.len());
        let mut target = Vec::with_capacity(batch.regression.len());
        for item in &batch.regression {
            pred.push(activations(p, &item.features)?.topo);
            target.push(item.target);
        }
        total += weights.lambda_mse * mse_loss(&pred, &target)?;
    }
    if !batch.pairs.is_empty() {
        let mut scores = Vec::with_capacity(batch.pairs.len());
        for pair in &batch.pairs {
            let pos = activations(p, &pair.preferred)?.rank;
            let neg = activations(p, &pair.dispreferred)?.rank;
            scores.push((pos, neg));
        }
        total += weights.lambda_rank * mean_rank_loss(&scores, weights.beta)?;
    }
    Ok(total)
}

/// Accumulates the gradient of one hidden-layer output sensitivity `dh`
/// back through tanh into the trunk.
fn backprop_trunk(g: &mut Params, x: &FeatureVector, hidden: &[f64], dh: &[f64]) {
    let h = g.hidden;
    let da: Vec<f64> = dh
        .iter()
        .zip(hidden)
        .map(|(d, hv)| d * (1.0 - hv * hv))
        .collect();
    g.trunk_bias.iter_mut().zip(&da).for_each(|(b, d)| *b += d);
    for (i, &xi) in x.values().iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut g.trunk[i * h..(i + 1) * h];
        row.iter_mut().zip(&da).for_each(|(w, d)| *w += d * xi);
    }
}

/// Analytic gradient of [`combined_loss`], returned with the loss value.
pub fn grad(model: &TrmModel, batch: &Batch<'_>, weights: &LossWeights) -> Result<(f64, Params)> {
    params_grad(&model.params, batch, weights)
}

pub(crate) fn params_grad(
    p: &Params,
    batch: &Batch<'_>,
    weights: &LossWeights,
) -> Result<(f64, Params)> {
    check_batch(batch, weights)?;
    let mut g = Params::zeros(p.input_dim, p.hidden);
    let mut loss = 0.0;

    let n_reg = batch.regression.len();
    if n_reg > 0 {
        let scale = weights.lambda_mse / n_reg as f64;
        let mut sq = 0.0;
        for item in &batch.regression {
            let a = activations(p, &item.features)?;
            let err = a.topo - item.target;
            sq += err * err;
            // d/dz of scale * (sigmoid(z) - t)^2
            let dz = scale * 2.0 * err * a.topo * (1.0 - a.topo);
            g.reg_bias += dz;
            g.reg_weights
                .iter_mut()
                .zip(&a.hidden)
                .for_each(|(w, hv)| *w += dz * hv);
            let dh: Vec<f64> = p.reg_weights.iter().map(|u| dz * u).collect();
            backprop_trunk(&mut g, &item.features, &a.hidden, &dh);
        }
        loss += weights.lambda_mse * sq / n_reg as f64;
    }

    let n_pairs = batch.pairs.len();
    if n_pairs > 0 {
        let scale = weights.lambda_rank / n_pairs as f64;
        let beta = weights.beta;
        let mut sum = 0.0;
        for pair in &batch.pairs {
            let pos = activations(p, &pair.preferred)?;
            let neg = activations(p, &pair.dispreferred)?;
            let margin = pos.rank - neg.rank;
            sum += softplus(-beta * margin);
            // d/dmargin softplus(-beta m) = -beta * sigmoid(-beta m)
            let dm = -scale * beta * super::model::sigmoid(-beta * margin);
            for (side, sign) in [(&pos, 1.0), (&neg, -1.0)] {
                let ds = sign * dm;
                g.rank_bias += ds;
                g.rank_weights
                    .iter_mut()
                    .zip(&side.hidden)
                    .for_each(|(w, hv)| *w += ds * hv);
            }
            let dh_pos: Vec<f64> = p.rank_weights.iter().map(|v| dm * v).collect();
            let dh_neg: Vec<f64> = p.rank_weights.iter().map(|v| -dm * v).collect();
            backprop_trunk(&mut g, &pair.preferred, &pos.hidden, &dh_pos);
            backprop_trunk(&mut g, &pair.dispreferred, &neg.hidden, &dh_neg);
        }
        loss += weights.lambda_rank * sum / n_pairs as f64;
    }

    Ok((loss, g))
}
