//! Dataset model, on-disk formats and split handling.

pub mod format;
pub mod split;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ZslError};
use crate::matrix::Matrix;

pub use format::{read_array, read_labels, write_array, write_labels};
pub use split::{SplitPart, SplitSpec};

/// JSON manifest pointing at the array files of one dataset.
///
/// Relative paths are resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub attributes: PathBuf,
    pub split: PathBuf,
    pub class_names: Vec<String>,
    pub backbone_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_dim: Option<usize>,
}

/// Features, labels, class attributes and split of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    /// `N x d`, one instance per row.
    pub features: Matrix,
    pub labels: Vec<u32>,
    /// `C_total x a`, one class per row.
    pub attributes: Matrix,
    pub split: SplitSpec,
    pub class_names: Vec<String>,
    pub backbone_tag: String,
    /// Hex SHA-256 of the manifest bytes; empty for in-memory bundles.
    pub manifest_hash: String,
}

impl DatasetBundle {
    pub fn n_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.attributes.rows()
    }

    /// Checks every bundle and split invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.features.rows() != n {
            return Err(ZslError::Shape(format!(
                "features have {} rows but there are {n} labels",
                self.features.rows()
            )));
        }
        if self.class_names.len() != self.attributes.rows() {
            return Err(ZslError::Shape(format!(
                "{} class names for {} attribute rows",
                self.class_names.len(),
                self.attributes.rows()
            )));
        }
        let c_total = self.attributes.rows();
        if let Some((i, l)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= c_total)
        {
            return Err(ZslError::Shape(format!(
                "label {l} of instance {i} is outside [0, {c_total})"
            )));
        }
        if !self.features.is_finite() || !self.attributes.is_finite() {
            return Err(ZslError::Shape("non-finite feature or attribute value".into()));
        }
        self.split.validate(&self.labels, c_total)
    }

    /// Attribute rows of the given classes, in order.
    pub fn class_attributes(&self, classes: &[u32]) -> Matrix {
        let idx: Vec<usize> = classes.iter().map(|&c| c as usize).collect();
        self.attributes.select_rows(&idx)
    }

    /// Rows of an arbitrary index list.
    pub fn view_indices(&self, idx: &[usize]) -> (Matrix, Vec<u32>) {
        (
            self.features.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// Row subset of features and labels for one split part, order preserved.
pub fn view_split(bundle: &DatasetBundle, part: SplitPart) -> Result<(Matrix, Vec<u32>)> {
    let idx = bundle.split.indices(part);
    if idx.is_empty() {
        return Err(ZslError::EmptySplit(part.name()));
    }
    Ok(bundle.view_indices(idx))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Loads and fully validates a dataset manifest.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ZslError::io(path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| ZslError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let features_path = resolve(base, &manifest.features);
    let attributes_path = resolve(base, &manifest.attributes);
    let features = read_array(&features_path)?;
    let attributes = read_array(&attributes_path)?;
    let labels = read_labels(resolve(base, &manifest.labels))?;
    let split_path = resolve(base, &manifest.split);
    let split_bytes = fs::read(&split_path).map_err(|e| ZslError::io(&split_path, e))?;
    let split: SplitSpec = serde_json::from_slice(&split_bytes).map_err(|e| ZslError::Json {
        path: split_path.clone(),
        source: e,
    })?;

    if let Some(d) = manifest.feature_dim {
        if d != features.cols() {
            return Err(ZslError::Shape(format!(
                "{}: declared feature_dim {d} but array has {} columns",
                features_path.display(),
                features.cols()
            )));
        }
    }
    if let Some(a) = manifest.attribute_dim {
        if a != attributes.cols() {
            return Err(ZslError::Shape(format!(
                "{}: declared attribute_dim {a} but array has {} columns",
                attributes_path.display(),
                attributes.cols()
            )));
        }
    }

    let bundle = DatasetBundle {
        name: manifest.name,
        features,
        labels,
        attributes,
        split,
        class_names: manifest.class_names,
        backbone_tag: manifest.backbone_tag,
        manifest_hash: sha256_hex(&bytes),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Writes a bundle as array files plus `split.json` and `manifest.json` in
/// `dir`, returning the manifest path.
pub fn write_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| ZslError::io(dir, e))?;
    write_array(&bundle.features, dir.join("features.zspl"))?;
    write_array(&bundle.attributes, dir.join("attributes.zspl"))?;
    write_labels(&bundle.labels, dir.join("labels.zspl"))?;
    let split_path = dir.join("split.json");
    let split_json = serde_json::to_vec_pretty(&bundle.split).expect("split serializes");
    fs::write(&split_path, split_json).map_err(|e| ZslError::io(&split_path, e))?;
    let manifest = Manifest {
        name: bundle.name.clone(),
        features: "features.zspl".into(),
        labels: "labels.zspl".into(),
        attributes: "attributes.zspl".into(),
        split: "split.json".into(),
        class_names: bundle.class_names.clone(),
        backbone_tag: bundle.backbone_tag.clone(),
        feature_dim: Some(bundle.feature_dim()),
        attribute_dim: Some(bundle.attribute_dim()),
    };
    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, json).map_err(|e| ZslError::io(&manifest_path, e))?;
    Ok(manifest_path)
}
