//! Feature-generating pipelines: synthesize unseen-class features with the
//! Gaussian generator, then train a supervised classifier over all classes.

use super::decoder::{decoder_fit, DecoderModel, DecoderParams};
use super::generator::{GaussianGenerator, DEFAULT_RIDGE, DEFAULT_SAMPLES_PER_CLASS};
use super::softmax_clf::{softmax_clf_fit, LinearSoftmaxModel, SoftmaxParams};
use super::TrainingSet;
use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerativeParams {
    pub ridge: f64,
    pub n_per_class: usize,
    pub seed: u64,
    pub softmax: SoftmaxParams,
    pub decoder: DecoderParams,
}

impl Default for GenerativeParams {
    fn default() -> Self {
        GenerativeParams {
            ridge: DEFAULT_RIDGE,
            n_per_class: DEFAULT_SAMPLES_PER_CLASS,
            seed: 42,
            softmax: SoftmaxParams::default(),
            decoder: DecoderParams::default(),
        }
    }
}

/// Real training features stacked on top of generated unseen-class features.
fn training_pool(bundle: &DatasetBundle, params: &GenerativeParams) -> Result<(TrainingSet, Matrix, Vec<u32>)> {
    let unseen = &bundle.split.unseen_classes;
    if unseen.is_empty() {
        return Err(ZslError::InvalidArgument("no unseen classes to generate".into()));
    }
    let t = TrainingSet::train_split(bundle)?;
    let g = GaussianGenerator::fit(&t, params.ridge)?;
    let (synth, synth_labels) =
        g.sample(unseen, &bundle.class_attributes(unseen), params.n_per_class, params.seed)?;
    let d = t.feature_dim();
    let mut data = Vec::with_capacity((t.len() + synth.rows()) * d);
    data.extend_from_slice(t.features.as_slice());
    data.extend_from_slice(synth.as_slice());
    let x = Matrix::from_vec(t.len() + synth.rows(), d, data)?;
    let mut y = t.labels.clone();
    y.extend_from_slice(&synth_labels);
    Ok((t, x, y))
}

pub fn gen_softmax_fit(bundle: &DatasetBundle, params: &GenerativeParams) -> Result<LinearSoftmaxModel> {
    let (_, x, y) = training_pool(bundle, params)?;
    softmax_clf_fit(&x, &y, &bundle.split.all_classes(), &params.softmax)
}

/// The decoder is trained on real seen-class data only.
pub fn gen_decoder_fit(
    bundle: &DatasetBundle,
    params: &GenerativeParams,
) -> Result<(LinearSoftmaxModel, DecoderModel)> {
    let (t, x, y) = training_pool(bundle, params)?;
    let decoder = decoder_fit(&t, &params.decoder)?;
    let augmented = decoder.augment_rows(&x);
    let clf = softmax_clf_fit(&augmented, &y, &bundle.split.all_classes(), &params.softmax)?;
    Ok((clf, decoder))
}
