//! Validation grid search for the closed-form methods.

use super::eszsl::{EszslModel, EszslSystem};
use super::model::ZslModel;
use super::sae::{Direction, SaeModel, SaeSystem};
use super::{Candidates, TrainingSet};
use crate::data::DatasetBundle;
use crate::error::{Result, ZslError};
use crate::eval::mca;
use crate::matrix::Matrix;
use crate::numerics::Metric;

/// Log grid used for both ESZSL regularizers.
pub const ESZSL_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
pub const SAE_GRID: [f64; 5] = [0.05, 0.5, 5.0, 50.0, 500.0];

/// One evaluated grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub params: Vec<(&'static str, f64)>,
    /// `None` when the fit failed at this point.
    pub val_mca: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection<M> {
    /// Refit on the full training split with the best parameters.
    pub model: M,
    pub best: Vec<(&'static str, f64)>,
    pub val_mca: f64,
    pub grid: Vec<GridPoint>,
}

struct ValidationData {
    fit: TrainingSet,
    x: Matrix,
    labels: Vec<u32>,
    candidates: Candidates,
}

fn validation_data(bundle: &DatasetBundle, seed: u64) -> Result<ValidationData> {
    let (fit_idx, val_idx) = bundle.split.validation_partition(&bundle.labels, seed);
    if val_idx.is_empty() {
        return Err(ZslError::InvalidArgument(
            "no validation instances available for hyper-parameter selection".into(),
        ));
    }
    let fit = TrainingSet::from_bundle(bundle, &fit_idx)?;
    let (x, labels) = bundle.view_indices(&val_idx);
    let mut classes = labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let candidates = Candidates::from_bundle(bundle, &classes)?;
    Ok(ValidationData {
        fit,
        x,
        labels,
        candidates,
    })
}

fn score(model: &ZslModel, v: &ValidationData) -> Result<f64> {
    let pred = model.predict_classes(&v.x, &v.candidates)?;
    mca(&pred, &v.labels, &v.candidates.class_ids)
}

fn pick_best(grid: &[GridPoint]) -> Result<(Vec<(&'static str, f64)>, f64)> {
    let mut best: Option<&GridPoint> = None;
    for p in grid {
        if let Some(s) = p.val_mca {
            if best.is_none_or(|b| s > b.val_mca.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(p);
            }
        }
    }
    best.map(|p| (p.params.clone(), p.val_mca.unwrap()))
        .ok_or_else(|| ZslError::InvalidArgument("every grid point failed to fit".into()))
}

/// Grid over `(gamma, lambda)`; ties keep the earlier grid point.
pub fn select_eszsl(bundle: &DatasetBundle, seed: u64) -> Result<Selection<EszslModel>> {
    let v = validation_data(bundle, seed)?;
    let system = EszslSystem::new(&v.fit);
    let mut grid = Vec::new();
    for &gamma in &ESZSL_GRID {
        let left = system.left_solve(gamma);
        for &lambda in &ESZSL_GRID {
            let val_mca = match &left {
                Ok(k) => system
                    .right_solve(k, lambda)
                    .and_then(EszslModel::new)
                    .and_then(|m| score(&ZslModel::Eszsl(m), &v))
                    .map_err(|e| log::warn!("ESZSL gamma={gamma} lambda={lambda}: {e}"))
                    .ok(),
                Err(e) => {
                    log::warn!("ESZSL gamma={gamma}: {e}");
                    None
                }
            };
            grid.push(GridPoint {
                params: vec![("gamma", gamma), ("lambda", lambda)],
                val_mca,
            });
        }
    }
    let (best, val_mca) = pick_best(&grid)?;
    let model = EszslSystem::new(&TrainingSet::train_split(bundle)?).solve(best[0].1, best[1].1)?;
    Ok(Selection {
        model,
        best,
        val_mca,
        grid,
    })
}

pub fn select_sae(
    bundle: &DatasetBundle,
    seed: u64,
    direction: Direction,
    metric: Metric,
) -> Result<Selection<SaeModel>> {
    let v = validation_data(bundle, seed)?;
    let system = SaeSystem::new(&v.fit)?;
    let mut grid = Vec::new();
    for &lambda in &SAE_GRID {
        let val_mca = system
            .solve(lambda)
            .and_then(|mut m| {
                m.direction = direction;
                m.metric = metric;
                score(&ZslModel::Sae(m), &v)
            })
            .map_err(|e| log::warn!("SAE lambda={lambda}: {e}"))
            .ok();
        grid.push(GridPoint {
            params: vec![("lambda", lambda)],
            val_mca,
        });
    }
    let (best, val_mca) = pick_best(&grid)?;
    let mut model = SaeSystem::new(&TrainingSet::train_split(bundle)?)?.solve(best[0].1)?;
    model.direction = direction;
    model.metric = metric;
    Ok(Selection {
        model,
        best,
        val_mca,
        grid,
    })
}
