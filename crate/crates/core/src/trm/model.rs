use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::types::RewardScores;

pub const MODEL_VERSION: &str = "trm-v1";

/// Trainable parameters. `trunk` is stored input-major: the weight from input
/// `i` to hidden unit `j` lives at `trunk[i * hidden + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub input_dim: usize,
    pub hidden: usize,
    pub trunk: Vec<f64>,
    pub trunk_bias: Vec<f64>,
    pub reg_weights: Vec<f64>,
    pub reg_bias: f64,
    pub rank_weights: Vec<f64>,
    pub rank_bias: f64,
}

impl Params {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Params {
            input_dim,
            hidden,
            trunk: vec![0.0; input_dim * hidden],
            trunk_bias: vec![0.0; hidden],
            reg_weights: vec![0.0; hidden],
            reg_bias: 0.0,
            rank_weights: vec![0.0; hidden],
            rank_bias: 0.0,
        }
    }

    pub fn uniform(input_dim: usize, hidden: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(input_dim, hidden);
        for i in 0..p.len() {
            *p.get_mut(i) = rng.gen_range(-scale..scale);
        }
        p
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.trunk.len() + 3 * self.hidden + 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat mutable access in the order trunk, trunk bias, regression head,
    /// regression bias, ranking head, ranking bias.
    pub fn get_mut(&mut self, mut idx: usize) -> &mut f64 {
        let h = self.hidden;
        if idx < self.trunk.len() {
            return &mut self.trunk[idx];
        }
        idx -= self.trunk.len();
        if idx < h {
            return &mut self.trunk_bias[idx];
        }
        idx -= h;
        if idx < h {
            return &mut self.reg_weights[idx];
        }
        idx -= h;
        if idx == 0 {
            return &mut self.reg_bias;
        }
        idx -= 1;
        if idx < h {
            return &mut self.rank_weights[idx];
        }
        idx -= h;
        assert_eq!(idx, 0, "parameter index out of range");
        &mut self.rank_bias
    }

    pub fn get(&self, idx: usize) -> f64 {
        let h = self.hidden;
        let t = self.trunk.len();
        match idx {
            i if i < t => self.trunk[i],
            i if i < t + h => self.trunk_bias[i - t],
            i if i < t + 2 * h => self.reg_weights[i - t - h],
            i if i == t + 2 * h => self.reg_bias,
            i if i < t + 3 * h + 1 => self.rank_weights[i - t - 2 * h - 1],
            i if i == t + 3 * h + 1 => self.rank_bias,
            _ => panic!("parameter index out of range"),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &Params, alpha: f64) {
        let axpy = |dst: &mut [f64], src: &[f64]| {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += alpha * s);
        };
        axpy(&mut self.trunk, &other.trunk);
        axpy(&mut self.trunk_bias, &other.trunk_bias);
        axpy(&mut self.reg_weights, &other.reg_weights);
        axpy(&mut self.rank_weights, &other.rank_weights);
        self.reg_bias += alpha * other.reg_bias;
        self.rank_bias += alpha * other.rank_bias;
    }

    pub fn is_finite(&self) -> bool {
        (0..self.len()).all(|i| self.get(i).is_finite())
    }
}

/// Hidden activations and both head outputs for one input.
#[derive(Clone, Debug)]
pub struct Activations {
    pub hidden: Vec<f64>,
    pub topo: f64,
    pub rank: f64,
}

/// Two-head scorer: `h = tanh(W x + b)`, `topo = sigmoid(u.h + c)`,
/// `rank = v.h + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrmModel {
    pub version: String,
    pub feature: FeatureConfig,
    pub params: Params,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl TrmModel {
    pub fn zeros(feature: FeatureConfig, hidden: usize) -> Self {
        TrmModel {
            version: MODEL_VERSION.to_string(),
            feature,
            params: Params::zeros(feature.dim(), hidden),
        }
    }

    pub fn seeded(feature: FeatureConfig, hidden: usize, seed: u64) -> Self {
        TrmModel {
            version: MODEL_VERSION.to_string(),
            feature,
            params: Params::uniform(feature.dim(), hidden, 0.05, seed),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.params.hidden
    }

    pub fn activations(&self, features: &FeatureVector) -> Result<Activations> {
        activations(&self.params, features)
    }

    pub fn forward(&self, features: &FeatureVector) -> Result<RewardScores> {
        let a = self.activations(features)?;
        Ok(RewardScores {
            topo: a.topo,
            rank: a.rank,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ModelFile::from(self);
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Model(e.to_string()))?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        file.try_into()
    }
}

pub(crate) fn activations(p: &Params, features: &FeatureVector) -> Result<Activations> {
    let x = features.values();
    if x.len() != p.input_dim {
        return Err(Error::Dimension {
            expected: p.input_dim,
            got: x.len(),
        });
    }
    let h = p.hidden;
    let mut pre = p.trunk_bias.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &p.trunk[i * h..(i + 1) * h];
        pre.iter_mut().zip(row).for_each(|(a, w)| *a += w * xi);
    }
    let hidden: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
    let dot = |w: &[f64]| w.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
    let topo = sigmoid(dot(&p.reg_weights) + p.reg_bias);
    let rank = dot(&p.rank_weights) + p.rank_bias;
    Ok(Activations { hidden, topo, rank })
}

#[derive(Serialize, Deserialize)]
struct Head {
    weights: Vec<f64>,
    bias: f64,
}

/// On-disk layout. `trunk` is `input_dim` rows of `hidden` columns.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    feature: FeatureConfig,
    hidden: usize,
    trunk: Vec<Vec<f64>>,
    trunk_bias: Vec<f64>,
    regression_head: Head,
    ranking_head: Head,
}

impl From<&TrmModel> for ModelFile {
    fn from(m: &TrmModel) -> Self {
        let p = &m.params;
        ModelFile {
            version: m.version.clone(),
            feature: m.feature,
            hidden: p.hidden,
            trunk: p.trunk.chunks(p.hidden.max(1)).map(<[f64]>::to_vec).collect(),
            trunk_bias: p.trunk_bias.clone(),
            regression_head: Head {
                weights: p.reg_weights.clone(),
                bias: p.reg_bias,
            },
            ranking_head: Head {
                weights: p.rank_weights.clone(),
                bias: p.rank_bias,
            },
        }
    }
}

impl TryFrom<ModelFile> for TrmModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported version '{}', expected '{MODEL_VERSION}'",
                f.version
            )));
        }
        let d = f.feature.dim();
        let h = f.hidden;
        if h == 0 {
            return Err(Error::Model("hidden width must be positive".into()));
        }
        if f.trunk.len() != d {
            return Err(Error::Model(format!(
                "trunk has {} rows but feature dimension is {d}",
                f.trunk.len()
            )));
        }
        if let Some(bad) = f.trunk.iter().position(|row| row.len() != h) {
            return Err(Error::Model(format!(
                "trunk row {bad} has {} columns, expected {h}",
                f.trunk[bad].len()
            )));
        }
        for (name, v) in [
            ("trunk_bias", &f.trunk_bias),
            ("regression_head", &f.regression_head.weights),
            ("ranking_head", &f.ranking_head.weights),
        ] {
            if v.len() != h {
                return Err(Error::Model(format!(
                    "{name} has length {}, expected {h}",
                    v.len()
                )));
            }
        }
        let params = Params {
            input_dim: d,
            hidden: h,
            trunk: f.trunk.into_iter().flatten().collect(),
            trunk_bias: f.trunk_bias,
            reg_weights: f.regression_head.weights,
            reg_bias: f.regression_head.bias,
            rank_weights: f.ranking_head.weights,
            rank_bias: f.ranking_head.bias,
        };
        if !params.is_finite() {
            return Err(Error::Model("non-finite weight".into()));
        }
        Ok(TrmModel {
            version: f.version,
            feature: f.feature,
            params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(dim: usize, seed: u64) -> FeatureVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureVector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_model_outputs() {
        let m = TrmModel::zeros(FeatureConfig { hash_dim: 16 }, 4);
        for s in 0..5 {
            let out = m.forward(&random_input(23, s)).unwrap();
            assert_eq!(out.topo, 0.5);
            assert_eq!(out.rank, 0.0);
        }
    }

    #[test]
    fn ranking_head_is_linear() {
        let m = TrmModel::seeded(FeatureConfig { hash_dim: 16 }, 6, 3);
        let x = random_input(23, 11);
        let base = m.forward(&x).unwrap();
        let mut scaled = m.clone();
        let alpha = 2.5;
        scaled.params.rank_weights.iter_mut().for_each(|w| *w *= alpha);
        let out = scaled.forward(&x).unwrap();
        let d = m.params.rank_bias;
        assert!(((out.rank - d) - alpha * (base.rank - d)).abs() < 1e-12);
        assert_eq!(out.topo, base.topo);
    }

    #[test]
    fn seeded_forward_is_reproducible() {
        let a = TrmModel::seeded(FeatureConfig::default(), 32, 42);
        let b = TrmModel::seeded(FeatureConfig::default(), 32, 42);
        let x = random_input(263, 5);
        let (sa, sb) = (a.forward(&x).unwrap(), b.forward(&x).unwrap());
        assert_eq!(sa.topo.to_bits(), sb.topo.to_bits());
        assert_eq!(sa.rank.to_bits(), sb.rank.to_bits());
        assert!(sa.topo > 0.0 && sa.topo < 1.0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = TrmModel::zeros(FeatureConfig { hash_dim: 16 }, 4);
        assert!(matches!(
            m.forward(&random_input(10, 0)),
            Err(Error::Dimension { expected: 23, got: 10 })
        ));
    }

    #[test]
    fn flat_indexing_covers_all_fields() {
        let mut p = Params::zeros(5, 3);
        for i in 0..p.len() {
            *p.get_mut(i) = i as f64 + 1.0;
        }
        for i in 0..p.len() {
            assert_eq!(p.get(i), i as f64 + 1.0);
        }
        assert_eq!(p.rank_bias, p.len() as f64);
        assert_eq!(p.reg_bias, (15 + 3 + 3 + 1) as f64);
    }

    #[test]
    fn save_load_round_trip() {
        let m = TrmModel::seeded(FeatureConfig { hash_dim: 32 }, 8, 9);
        let dir = std::env::temp_dir().join(format!("toposcale-model-{}", std::process::id()));
        let path = dir.join("m.json");
        m.save(&path).unwrap();
        let back = TrmModel::load(&path).unwrap();
        for s in 0..20 {
            let x = random_input(39, s);
            let (a, b) = (m.forward(&x).unwrap(), back.forward(&x).unwrap());
            assert!((a.topo - b.topo).abs() < 1e-12);
            assert!((a.rank - b.rank).abs() < 1e-12);
        }
        assert_eq!(back, m);
    }

    #[test]
    fn load_rejects_bad_files() {
        let m = TrmModel::seeded(FeatureConfig { hash_dim: 259 }, 4, 1);
        let mut v: serde_json::Value =
            serde_json::to_value(ModelFile::from(&m)).unwrap();

        let mut short = v.clone();
        short["trunk"] = serde_json::json!(vec![vec![0.0; 4]; 10]);
        let err = TrmModel::from_json(&short.to_string()).unwrap_err();
        assert!(err.to_string().contains("feature dimension is 266"), "{err}");

        let mut wrong = v.clone();
        wrong["version"] = "trm-v0".into();
        assert!(TrmModel::from_json(&wrong.to_string()).is_err());

        v.as_object_mut().unwrap().remove("version");
        assert!(matches!(
            TrmModel::from_json(&v.to_string()),
            Err(Error::Model(_))
        ));
    }
}
