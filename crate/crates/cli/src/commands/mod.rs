pub mod cluster;
pub mod ecm;
pub mod gen;
pub mod mmgp;
pub mod plot;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use morphrom::dataset::{read_dataset, Dataset};
use morphrom::datagen::{split_indices, SplitMode};
use morphrom::field::SnapshotMatrix;
use morphrom::mesh::Mesh;
use morphrom::Error;
use serde::{Deserialize, Serialize};

use crate::{Part, SubsetArgs};

/// Which samples of a dataset a command works on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsetConfig {
    pub part: Part,
    pub train_frac: f64,
    pub split_seed: u64,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        SubsetConfig {
            part: Part::All,
            train_frac: 0.8,
            split_seed: 0,
        }
    }
}

impl SubsetConfig {
    pub fn apply_flags(&mut self, a: &SubsetArgs) {
        if let Some(p) = a.part {
            self.part = p;
        }
        if let Some(f) = a.train_frac {
            self.train_frac = f;
        }
        if let Some(s) = a.split_seed {
            self.split_seed = s;
        }
    }

    /// Selected samples and their indices in the full dataset.
    pub fn select(&self, dataset: Dataset) -> Result<(Dataset, Vec<usize>)> {
        if self.part == Part::All {
            let idx = (0..dataset.len()).collect();
            return Ok((dataset, idx));
        }
        let (train, test) = split_indices(&dataset, self.train_frac, self.split_seed, &SplitMode::Iid)?;
        let idx = if self.part == Part::Train { train } else { test };
        Ok((dataset.subset(&idx), idx))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let d = read_dataset(path).with_context(|| format!("loading dataset {}", path.display()))?;
    if d.is_empty() {
        return Err(Error::InvalidArgument(format!("dataset {} has no samples", path.display())).into());
    }
    Ok(d)
}

pub fn need_path(p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    crate::run::require(p, what)
}

/// Snapshot rows of one field for datasets whose samples all share a mesh.
/// Output fields take precedence over input fields of the same name.
pub fn shared_mesh_snapshots(dataset: &Dataset, field: &str) -> Result<(Mesh, SnapshotMatrix, usize)> {
    let first = &dataset.samples()[0];
    let mesh = first.mesh.clone();
    let mut rows = Vec::with_capacity(dataset.len());
    let mut components = 0;
    for (k, s) in dataset.samples().iter().enumerate() {
        if s.mesh.id() != mesh.id() {
            return Err(Error::InvalidArgument(format!(
                "sample {k} is on a different mesh; this command needs every sample on one mesh"
            ))
            .into());
        }
        let f = s
            .output_fields
            .get(field)
            .or_else(|| s.input_fields.get(field))
            .ok_or_else(|| Error::Schema(format!("no field `{field}` in sample {k}")))?;
        components = f.components();
        rows.push(f.values().to_vec());
    }
    let s = SnapshotMatrix::from_rows(&rows)?.with_mesh_id(mesh.id());
    Ok((mesh, s, components))
}

/// Default field for shared-mesh commands: the first output field.
pub fn default_field(dataset: &Dataset) -> Result<String> {
    dataset
        .schema()
        .output_fields
        .first()
        .or_else(|| dataset.schema().input_fields.first())
        .map(|f| f.name.clone())
        .ok_or_else(|| Error::Schema("dataset has no fields".into()).into())
}
