#![allow(dead_code)]

use zspeedl::data::synth::{synthetic_bundle, SyntheticSpec};
use zspeedl::data::DatasetBundle;
use zspeedl::methods::*;
use zspeedl::numerics::Metric;

pub fn fixture() -> DatasetBundle {
    synthetic_bundle(&SyntheticSpec::default())
}

/// A fixture with more attributes, so binarized class signatures are distinct.
pub fn wide_fixture() -> DatasetBundle {
    synthetic_bundle(&SyntheticSpec {
        attribute_dim: 12,
        feature_dim: 10,
        n_classes: 7,
        n_unseen: 2,
        seed: 11,
        ..SyntheticSpec::default()
    })
}

pub fn small_dem() -> DemParams {
    DemParams {
        hidden: 16,
        lr: 1e-2,
        l2: 1e-4,
        epochs: 40,
        batch: 8,
        seed: 5,
    }
}

pub fn small_generative(seed: u64) -> GenerativeParams {
    GenerativeParams {
        ridge: 0.1,
        n_per_class: 40,
        seed,
        softmax: SoftmaxParams {
            lr: 5e-2,
            l2: 1e-4,
            epochs: 60,
            batch: 16,
            seed,
        },
        decoder: DecoderParams {
            hidden: 16,
            lr: 1e-2,
            l2: 1e-4,
            epochs: 40,
            batch: 8,
            seed,
        },
    }
}

/// One trained model of every method.
pub fn all_models(b: &DatasetBundle) -> Vec<ZslModel> {
    let mut sae = sae_fit(b, 0.5).unwrap();
    sae.metric = Metric::Cosine;
    let (classifier, decoder) = gen_decoder_fit(b, &small_generative(3)).unwrap();
    vec![
        ZslModel::Dap(dap_fit(b, &DapParams::default()).unwrap()),
        ZslModel::Eszsl(eszsl_fit(b, 0.1, 0.1).unwrap()),
        ZslModel::Sae(sae),
        ZslModel::Dem(dem_fit(b, &small_dem()).unwrap()),
        ZslModel::GenSoftmax(gen_softmax_fit(b, &small_generative(3)).unwrap()),
        ZslModel::GenDecoder {
            classifier,
            decoder,
        },
    ]
}
