//! `--hp key=value` parsing and method dispatch for training.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use zspeedl::data::DatasetBundle;
use zspeedl::methods::select::{select_eszsl, select_sae, GridPoint};
use zspeedl::methods::*;
use zspeedl::numerics::Metric;

use crate::CliError;

const GENERATIVE_KEYS: [&str; 6] = ["ridge", "n_per_class", "lr", "l2", "epochs", "batch"];

pub fn allowed_keys(method: Method) -> Vec<&'static str> {
    match method {
        Method::Dap => vec!["l2", "epochs", "lr"],
        Method::Eszsl => vec!["gamma", "lambda"],
        Method::Sae => vec!["lambda", "direction", "metric"],
        Method::Dem => vec!["hidden", "lr", "l2", "epochs", "batch"],
        Method::GenSoftmax => GENERATIVE_KEYS.to_vec(),
        Method::GenDecoder => {
            let mut keys = GENERATIVE_KEYS.to_vec();
            keys.extend(["dec_hidden", "dec_lr", "dec_l2", "dec_epochs", "dec_batch"]);
            keys
        }
    }
}

/// Raw `key=value` pairs, checked against the method's keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Hyperparameters {
    values: BTreeMap<String, String>,
}

impl Hyperparameters {
    /// Accepts repeated `key=value` arguments and comma-separated lists.
    pub fn parse(method: Method, args: &[String]) -> Result<Self, CliError> {
        let allowed = allowed_keys(method);
        let mut values = BTreeMap::new();
        for pair in args.iter().flat_map(|a| a.split(',')).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("hyper-parameter `{pair}` is not key=value")))?;
            let k = k.trim();
            if !allowed.contains(&k) {
                return Err(CliError::Usage(format!(
                    "unknown hyper-parameter `{k}` for {method} (allowed: {})",
                    allowed.join(", ")
                )));
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Usage(format!("hyper-parameter `{k}` given twice")));
            }
        }
        let hp = Hyperparameters { values };
        hp.check_types(method)?;
        Ok(hp)
    }

    fn check_types(&self, method: Method) -> Result<(), CliError> {
        for key in self.values.keys() {
            match key.as_str() {
                "direction" => {
                    self.parsed::<Direction>(key)?;
                }
                "metric" => {
                    self.parsed::<Metric>(key)?;
                }
                "hidden" | "epochs" | "batch" | "n_per_class" | "dec_hidden" | "dec_epochs" | "dec_batch" => {
                    self.parsed::<usize>(key)?;
                }
                _ => {
                    let v = self.parsed::<f64>(key)?.unwrap_or_default();
                    if !v.is_finite() || v < 0.0 {
                        return Err(CliError::Usage(format!("{method}: `{key}` must be a nonnegative number")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("bad value `{v}` for `{key}`: {e}")))
            })
            .transpose()
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

/// A fitted model with the hyper-parameters actually used.
pub struct Trained {
    pub model: ZslModel,
    pub hyperparameters: BTreeMap<String, Value>,
    /// Grid-search record when the regularizers were selected on validation.
    pub validation: Option<Value>,
}

fn grid_json(best_mca: f64, grid: &[GridPoint]) -> Value {
    let points: Vec<Value> = grid
        .iter()
        .map(|p| {
            let mut o: serde_json::Map<String, Value> =
                p.params.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
            o.insert("val_mca".into(), json!(p.val_mca));
            Value::Object(o)
        })
        .collect();
    json!({ "val_mca": best_mca, "grid": points })
}

fn record(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn generative_params(hp: &Hyperparameters, seed: u64) -> Result<GenerativeParams, CliError> {
    let d = GenerativeParams::default();
    Ok(GenerativeParams {
        ridge: hp.get("ridge", d.ridge)?,
        n_per_class: hp.get("n_per_class", d.n_per_class)?,
        seed,
        softmax: SoftmaxParams {
            lr: hp.get("lr", d.softmax.lr)?,
            l2: hp.get("l2", d.softmax.l2)?,
            epochs: hp.get("epochs", d.softmax.epochs)?,
            batch: hp.get("batch", d.softmax.batch)?,
            seed,
        },
        decoder: DecoderParams {
            hidden: hp.get("dec_hidden", d.decoder.hidden)?,
            lr: hp.get("dec_lr", d.decoder.lr)?,
            l2: hp.get("dec_l2", d.decoder.l2)?,
            epochs: hp.get("dec_epochs", d.decoder.epochs)?,
            batch: hp.get("dec_batch", d.decoder.batch)?,
            seed,
        },
    })
}

fn generative_record(p: &GenerativeParams, with_decoder: bool) -> BTreeMap<String, Value> {
    let mut r = record(&[
        ("ridge", json!(p.ridge)),
        ("n_per_class", json!(p.n_per_class)),
        ("lr", json!(p.softmax.lr)),
        ("l2", json!(p.softmax.l2)),
        ("epochs", json!(p.softmax.epochs)),
        ("batch", json!(p.softmax.batch)),
    ]);
    if with_decoder {
        r.extend(record(&[
            ("dec_hidden", json!(p.decoder.hidden)),
            ("dec_lr", json!(p.decoder.lr)),
            ("dec_l2", json!(p.decoder.l2)),
            ("dec_epochs", json!(p.decoder.epochs)),
            ("dec_batch", json!(p.decoder.batch)),
        ]));
    }
    r
}

/// Fits `method`; closed-form regularizers that are not given are chosen on
/// the validation split.
pub fn fit_method(
    method: Method,
    hp: &Hyperparameters,
    bundle: &DatasetBundle,
    seed: u64,
) -> Result<Trained, CliError> {
    Ok(match method {
        Method::Eszsl => match (hp.parsed::<f64>("gamma")?, hp.parsed::<f64>("lambda")?) {
            (Some(gamma), Some(lambda)) => Trained {
                model: ZslModel::Eszsl(eszsl_fit(bundle, gamma, lambda)?),
                hyperparameters: record(&[("gamma", json!(gamma)), ("lambda", json!(lambda))]),
                validation: None,
            },
            (None, None) => {
                let s = select_eszsl(bundle, seed)?;
                Trained {
                    model: ZslModel::Eszsl(s.model),
                    hyperparameters: s.best.iter().map(|(k, v)| (k.to_string(), json!(v))).collect(),
                    validation: Some(grid_json(s.val_mca, &s.grid)),
                }
            }
            _ => return Err(CliError::Usage("eszsl needs both gamma and lambda, or neither".into())),
        },
        Method::Sae => {
            let direction = hp.get("direction", Direction::FeatureToSemantic)?;
            let metric = hp.get("metric", Metric::Cosine)?;
            let (mut model, validation) = match hp.parsed::<f64>("lambda")? {
                Some(lambda) => (sae_fit(bundle, lambda)?, None),
                None => {
                    let s = select_sae(bundle, seed, direction, metric)?;
                    let v = grid_json(s.val_mca, &s.grid);
                    (s.model, Some(v))
                }
            };
            model.direction = direction;
            model.metric = metric;
            Trained {
                hyperparameters: record(&[
                    ("lambda", json!(model.lambda)),
                    ("direction", json!(direction.to_string())),
                    ("metric", json!(metric)),
                ]),
                model: ZslModel::Sae(model),
                validation,
            }
        }
        Method::Dap => {
            let d = DapParams::default();
            let p = DapParams {
                l2: hp.get("l2", d.l2)?,
                epochs: hp.get("epochs", d.epochs)?,
                lr: hp.get("lr", d.lr)?,
                seed,
            };
            Trained {
                model: ZslModel::Dap(dap_fit(bundle, &p)?),
                hyperparameters: record(&[("l2", json!(p.l2)), ("epochs", json!(p.epochs)), ("lr", json!(p.lr))]),
                validation: None,
            }
        }
        Method::Dem => {
            let d = DemParams::default();
            let p = DemParams {
                hidden: hp.get("hidden", d.hidden)?,
                lr: hp.get("lr", d.lr)?,
                l2: hp.get("l2", d.l2)?,
                epochs: hp.get("epochs", d.epochs)?,
                batch: hp.get("batch", d.batch)?,
                seed,
            };
            Trained {
                model: ZslModel::Dem(dem_fit(bundle, &p)?),
                hyperparameters: record(&[
                    ("hidden", json!(p.hidden)),
                    ("lr", json!(p.lr)),
                    ("l2", json!(p.l2)),
                    ("epochs", json!(p.epochs)),
                    ("batch", json!(p.batch)),
                ]),
                validation: None,
            }
        }
        Method::GenSoftmax => {
            let p = generative_params(hp, seed)?;
            Trained {
                model: ZslModel::GenSoftmax(gen_softmax_fit(bundle, &p)?),
                hyperparameters: generative_record(&p, false),
                validation: None,
            }
        }
        Method::GenDecoder => {
            let p = generative_params(hp, seed)?;
            let (classifier, decoder) = gen_decoder_fit(bundle, &p)?;
            Trained {
                model: ZslModel::GenDecoder {
                    classifier,
                    decoder,
                },
                hyperparameters: generative_record(&p, true),
                validation: None,
            }
        }
    })
}
