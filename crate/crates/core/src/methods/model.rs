//! Method-agnostic model handle and its on-disk form.
//!
//! A saved model is a directory holding `header.json` plus one native array
//! file per parameter.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::dap::{dap_predict, DapModel};
use super::decoder::{prepare_augmented, DecoderModel};
use super::dem::{dem_predict, DemModel};
use super::eszsl::{eszsl_predict, EszslModel};
use super::mlp::TwoLayerNet;
use super::sae::{sae_predict, Direction, SaeModel};
use super::softmax_clf::LinearSoftmaxModel;
use super::{check_dim, classify_rows, Candidates, Prepared};
use crate::data::format::{read_array, read_labels, write_array, write_labels};
use crate::error::{Result, ZslError};
use crate::matrix::Matrix;
use crate::numerics::Metric;

pub const HEADER_FILE: &str = "header.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dap")]
    Dap,
    #[serde(rename = "eszsl")]
    Eszsl,
    #[serde(rename = "sae")]
    Sae,
    #[serde(rename = "dem")]
    Dem,
    #[serde(rename = "gen-softmax")]
    GenSoftmax,
    #[serde(rename = "gen-decoder")]
    GenDecoder,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Dap,
        Method::Eszsl,
        Method::Sae,
        Method::Dem,
        Method::GenSoftmax,
        Method::GenDecoder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dap => "dap",
            Method::Eszsl => "eszsl",
            Method::Sae => "sae",
            Method::Dem => "dem",
            Method::GenSoftmax => "gen-softmax",
            Method::GenDecoder => "gen-decoder",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method `{s}` (one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZslModel {
    Dap(DapModel),
    Eszsl(EszslModel),
    Sae(SaeModel),
    Dem(DemModel),
    GenSoftmax(LinearSoftmaxModel),
    GenDecoder {
        classifier: LinearSoftmaxModel,
        decoder: DecoderModel,
    },
}

impl ZslModel {
    pub fn method(&self) -> Method {
        match self {
            ZslModel::Dap(_) => Method::Dap,
            ZslModel::Eszsl(_) => Method::Eszsl,
            ZslModel::Sae(_) => Method::Sae,
            ZslModel::Dem(_) => Method::Dem,
            ZslModel::GenSoftmax(_) => Method::GenSoftmax,
            ZslModel::GenDecoder { .. } => Method::GenDecoder,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            ZslModel::Dap(m) => m.feature_dim(),
            ZslModel::Eszsl(m) => m.feature_dim(),
            ZslModel::Sae(m) => m.feature_dim(),
            ZslModel::Dem(m) => m.feature_dim(),
            ZslModel::GenSoftmax(m) => m.input_dim(),
            ZslModel::GenDecoder { decoder, .. } => decoder.feature_dim(),
        }
    }

    /// Attribute dimension, where the method consumes attributes at test time.
    pub fn attribute_dim(&self) -> Option<usize> {
        match self {
            ZslModel::Dap(m) => Some(m.attribute_dim()),
            ZslModel::Eszsl(m) => Some(m.attribute_dim()),
            ZslModel::Sae(m) => Some(m.attribute_dim()),
            ZslModel::Dem(m) => Some(m.attribute_dim()),
            ZslModel::GenSoftmax(_) => None,
            ZslModel::GenDecoder { decoder, .. } => Some(decoder.attribute_dim()),
        }
    }

    /// Binds the model to a candidate set; all candidate-dependent work
    /// happens here.
    pub fn prepare(&self, cand: &Candidates) -> Result<Box<dyn Prepared>> {
        Ok(match self {
            ZslModel::Dap(m) => Box::new(m.prepare(&m.binarize(&cand.attributes)?)?),
            ZslModel::Eszsl(m) => Box::new(m.prepare(&cand.attributes)?),
            ZslModel::Sae(m) => Box::new(m.prepare(&cand.attributes, m.direction, m.metric)?),
            ZslModel::Dem(m) => Box::new(m.prepare(&cand.attributes)?),
            ZslModel::GenSoftmax(m) => Box::new(m.prepare(&cand.class_ids)?),
            ZslModel::GenDecoder {
                classifier,
                decoder,
            } => Box::new(prepare_augmented(classifier, decoder, &cand.class_ids)?),
        })
    }

    /// Candidate index for every row of `x`.
    pub fn predict(&self, x: &Matrix, cand: &Candidates) -> Result<Vec<usize>> {
        check_dim("feature dimension", self.feature_dim(), x.cols())?;
        match self {
            ZslModel::Dap(m) => dap_predict(m, x, &m.binarize(&cand.attributes)?),
            ZslModel::Eszsl(m) => eszsl_predict(m, x, &cand.attributes),
            ZslModel::Sae(m) => sae_predict(m, x, &cand.attributes, m.direction, m.metric),
            ZslModel::Dem(m) => dem_predict(m, x, &cand.attributes),
            _ => classify_rows(self.prepare(cand)?.as_mut(), x),
        }
    }

    /// Candidate index for one feature row.
    pub fn predict_single(&self, x: &[f64], cand: &Candidates) -> Result<usize> {
        check_dim("feature dimension", self.feature_dim(), x.len())?;
        Ok(self.prepare(cand)?.classify(x))
    }

    /// Predicted class ids for every row of `x`.
    pub fn predict_classes(&self, x: &Matrix, cand: &Candidates) -> Result<Vec<u32>> {
        Ok(cand.to_class_ids(&self.predict(x, cand)?))
    }
}

/// JSON header stored next to the parameter arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub method: Method,
    pub dims: BTreeMap<String, usize>,
    pub hyperparameters: BTreeMap<String, Value>,
    pub seed: u64,
    pub train_manifest_hash: String,
    #[serde(default)]
    pub extras: BTreeMap<String, Value>,
}

impl ModelHeader {
    pub fn new(model: &ZslModel, seed: u64, train_manifest_hash: impl Into<String>) -> Self {
        let mut dims = BTreeMap::new();
        dims.insert("feature_dim".to_string(), model.feature_dim());
        if let Some(a) = model.attribute_dim() {
            dims.insert("attribute_dim".to_string(), a);
        }
        match model {
            ZslModel::Dem(m) => {
                dims.insert("hidden_dim".into(), m.hidden_dim());
            }
            ZslModel::GenSoftmax(c) => {
                dims.insert("classes".into(), c.class_ids.len());
            }
            ZslModel::GenDecoder {
                classifier,
                decoder,
            } => {
                dims.insert("classes".into(), classifier.class_ids.len());
                dims.insert("decoder_hidden_dim".into(), decoder.hidden_dim());
                dims.insert("classifier_input_dim".into(), classifier.input_dim());
            }
            _ => {}
        }
        ModelHeader {
            method: model.method(),
            dims,
            hyperparameters: BTreeMap::new(),
            seed,
            train_manifest_hash: train_manifest_hash.into(),
            extras: BTreeMap::new(),
        }
    }
}

fn row_vector(v: &[f64]) -> Matrix {
    Matrix::from_vec(1, v.len(), v.to_vec()).expect("length matches")
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_array(path)?;
    if m.rows() > 1 && m.cols() > 1 {
        return Err(ZslError::Shape(format!(
            "{}: expected a vector, found {}x{}",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.into_vec())
}

fn write_net(dir: &Path, prefix: &str, net: &TwoLayerNet) -> Result<()> {
    write_array(&net.w1, dir.join(format!("{prefix}w1.zspl")))?;
    write_array(&row_vector(&net.b1), dir.join(format!("{prefix}b1.zspl")))?;
    write_array(&net.w2, dir.join(format!("{prefix}w2.zspl")))?;
    write_array(&row_vector(&net.b2), dir.join(format!("{prefix}b2.zspl")))
}

fn read_net(dir: &Path, prefix: &str) -> Result<TwoLayerNet> {
    let net = TwoLayerNet {
        w1: read_array(dir.join(format!("{prefix}w1.zspl")))?,
        b1: read_vector(&dir.join(format!("{prefix}b1.zspl")))?,
        w2: read_array(dir.join(format!("{prefix}w2.zspl")))?,
        b2: read_vector(&dir.join(format!("{prefix}b2.zspl")))?,
    };
    net.check_shapes()?;
    Ok(net)
}

fn write_classifier(dir: &Path, clf: &LinearSoftmaxModel) -> Result<()> {
    write_array(&clf.w, dir.join("clf_w.zspl"))?;
    write_array(&row_vector(&clf.b), dir.join("clf_b.zspl"))?;
    write_labels(&clf.class_ids, dir.join("class_ids.zspl"))
}

fn read_classifier(dir: &Path) -> Result<LinearSoftmaxModel> {
    let clf = LinearSoftmaxModel {
        w: read_array(dir.join("clf_w.zspl"))?,
        b: read_vector(&dir.join("clf_b.zspl"))?,
        class_ids: read_labels(dir.join("class_ids.zspl"))?,
    };
    if clf.b.len() != clf.w.rows() || clf.class_ids.len() != clf.w.rows() {
        return Err(ZslError::Shape(format!(
            "{}: classifier has {} rows, {} biases, {} class ids",
            dir.display(),
            clf.w.rows(),
            clf.b.len(),
            clf.class_ids.len()
        )));
    }
    Ok(clf)
}

fn extra_str<'a>(h: &'a ModelHeader, key: &str) -> Result<&'a str> {
    h.extras
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| ZslError::Shape(format!("model header lacks `{key}`")))
}

fn extra_f64(h: &ModelHeader, key: &str) -> Result<f64> {
    h.extras
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| ZslError::Shape(format!("model header lacks `{key}`")))
}

/// Writes the model directory. Method-intrinsic scalars (SAE settings, DEM
/// loss history) are added to the header's extras.
pub fn save_model(dir: impl AsRef<Path>, model: &ZslModel, header: &ModelHeader) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ZslError::io(dir, e))?;
    let mut header = header.clone();
    header.method = model.method();
    match model {
        ZslModel::Dap(m) => {
            write_array(&m.weights, dir.join("weights.zspl"))?;
            write_array(&row_vector(&m.priors), dir.join("priors.zspl"))?;
            write_array(&row_vector(&m.thresholds), dir.join("thresholds.zspl"))?;
            let excluded: Vec<u32> = m.excluded.iter().map(|&e| e as u32).collect();
            write_labels(&excluded, dir.join("excluded.zspl"))?;
        }
        ZslModel::Eszsl(m) => write_array(&m.v, dir.join("v.zspl"))?,
        ZslModel::Sae(m) => {
            write_array(&m.w, dir.join("w.zspl"))?;
            header.extras.insert("sae_lambda".into(), m.lambda.into());
            header.extras.insert("sae_residual".into(), m.residual.into());
            header.extras.insert("sae_direction".into(), m.direction.to_string().into());
            header
                .extras
                .insert("sae_metric".into(), serde_json::to_value(m.metric).expect("enum"));
        }
        ZslModel::Dem(m) => {
            write_net(dir, "", &m.net)?;
            header
                .extras
                .insert("loss_history".into(), serde_json::to_value(&m.loss_history).expect("floats"));
        }
        ZslModel::GenSoftmax(c) => write_classifier(dir, c)?,
        ZslModel::GenDecoder {
            classifier,
            decoder,
        } => {
            write_classifier(dir, classifier)?;
            write_net(dir, "dec_", &decoder.net)?;
        }
    }
    let path = dir.join(HEADER_FILE);
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&path, json + "\n").map_err(|e| ZslError::io(&path, e))
}

pub fn read_header(dir: impl AsRef<Path>) -> Result<ModelHeader> {
    let path = dir.as_ref().join(HEADER_FILE);
    let bytes = fs::read(&path).map_err(|e| ZslError::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| ZslError::Json { path, source })
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(ZslModel, ModelHeader)> {
    let dir = dir.as_ref();
    let header = read_header(dir)?;
    let model = match header.method {
        Method::Dap => {
            let weights = read_array(dir.join("weights.zspl"))?;
            let priors = read_vector(&dir.join("priors.zspl"))?;
            let thresholds = read_vector(&dir.join("thresholds.zspl"))?;
            let excluded = read_labels(dir.join("excluded.zspl"))?
                .into_iter()
                .map(|e| e as usize)
                .collect();
            if weights.cols() == 0 || priors.len() != weights.rows() || thresholds.len() != weights.rows() {
                return Err(ZslError::Shape(format!("{}: inconsistent DAP parameters", dir.display())));
            }
            ZslModel::Dap(DapModel {
                weights,
                priors,
                thresholds,
                excluded,
            })
        }
        Method::Eszsl => ZslModel::Eszsl(EszslModel::new(read_array(dir.join("v.zspl"))?)?),
        Method::Sae => {
            let mut m = SaeModel::new(read_array(dir.join("w.zspl"))?, extra_f64(&header, "sae_lambda")?);
            m.residual = extra_f64(&header, "sae_residual")?;
            m.direction = extra_str(&header, "sae_direction")?
                .parse::<Direction>()
                .map_err(ZslError::Shape)?;
            m.metric = extra_str(&header, "sae_metric")?
                .parse::<Metric>()
                .map_err(ZslError::Shape)?;
            ZslModel::Sae(m)
        }
        Method::Dem => {
            let mut m = DemModel::new(read_net(dir, "")?)?;
            if let Some(h) = header.extras.get("loss_history") {
                m.loss_history = serde_json::from_value(h.clone()).unwrap_or_default();
            }
            ZslModel::Dem(m)
        }
        Method::GenSoftmax => ZslModel::GenSoftmax(read_classifier(dir)?),
        Method::GenDecoder => {
            let classifier = read_classifier(dir)?;
            let decoder = DecoderModel {
                net: read_net(dir, "dec_")?,
            };
            check_dim("classifier input dimension", decoder.augmented_dim(), classifier.input_dim())?;
            ZslModel::GenDecoder {
                classifier,
                decoder,
            }
        }
    };
    Ok((model, header))
}
