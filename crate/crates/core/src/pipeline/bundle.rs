//! Model bundle directory.
//!
//! ```text
//! <dir>/manifest.json          schema, config, field list
//! <dir>/common/mesh.*          common mesh
//! <dir>/shape.bin|.meta.json   coordinate-field basis
//! <dir>/field_<name>.*         output-field bases (absent for zero fields)
//! <dir>/gps.json               GP states, field coordinates then scalar outputs
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::gp::{GpModel, GpState};
use crate::io::{read_json, read_mesh, write_json, write_mesh, MeshFormat};
use crate::morphing::CommonShape;
use crate::pod::ReducedBasis;

use super::{FieldModel, MmgpConfig, SurrogateModel};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FieldEntry {
    name: String,
    components: usize,
    basis: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    schema: Schema,
    config: MmgpConfig,
    n_train: usize,
    common_source: Option<usize>,
    shape_modes: usize,
    fields: Vec<FieldEntry>,
}

#[derive(Serialize, Deserialize)]
struct GpStates {
    fields: Vec<Vec<GpState>>,
    scalars: Vec<GpState>,
}

pub fn write_model(model: &SurrogateModel, dir: &Path) -> Result<()> {
    let common_dir = dir.join("common");
    fs::create_dir_all(&common_dir).map_err(|e| Error::io(&common_dir, e))?;
    write_mesh(&common_dir, &model.common.mesh, MeshFormat::Binary)?;
    model.shape_basis.write(dir, "shape")?;
    let mut fields = Vec::with_capacity(model.fields.len());
    for f in &model.fields {
        let stem = f.basis.as_ref().map(|_| format!("field_{}", f.name));
        if let (Some(b), Some(stem)) = (&f.basis, &stem) {
            b.write(dir, stem)?;
        }
        fields.push(FieldEntry {
            name: f.name.clone(),
            components: f.components,
            basis: stem,
        });
    }
    write_json(
        &dir.join("gps.json"),
        &GpStates {
            fields: model
                .fields
                .iter()
                .map(|f| f.gps.iter().map(|g| g.state().clone()).collect())
                .collect(),
            scalars: model.scalar_gps.iter().map(|g| g.state().clone()).collect(),
        },
    )?;
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            version: BUNDLE_VERSION,
            schema: model.schema.clone(),
            config: model.config.clone(),
            n_train: model.n_train,
            common_source: model.common.source_sample,
            shape_modes: model.shape_basis.n_modes(),
            fields,
        },
    )
}

pub fn read_model(dir: &Path) -> Result<SurrogateModel> {
    let manifest_path = dir.join("manifest.json");
    let m: Manifest = read_json(&manifest_path)?;
    if m.version != BUNDLE_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("bundle version {} (expected {BUNDLE_VERSION})", m.version),
        ));
    }
    let common = CommonShape::from_mesh(read_mesh(&dir.join("common"))?, m.common_source)?;
    let shape_basis = ReducedBasis::read(dir, "shape")?;
    if shape_basis.n_modes() != m.shape_modes || shape_basis.n_dofs() != 2 * common.mesh.n_nodes() {
        return Err(Error::format(&manifest_path, "shape basis does not match the common mesh"));
    }
    let gps_path = dir.join("gps.json");
    let states: GpStates = read_json(&gps_path)?;
    if states.fields.len() != m.fields.len() || states.scalars.len() != m.schema.scalar_outputs.len() {
        return Err(Error::format(&gps_path, "GP count does not match the manifest"));
    }
    let mut fields = Vec::with_capacity(m.fields.len());
    for (entry, gps) in m.fields.into_iter().zip(states.fields) {
        let basis = entry.basis.as_deref().map(|stem| ReducedBasis::read(dir, stem)).transpose()?;
        if let Some(b) = &basis {
            if b.n_dofs() != entry.components * common.mesh.n_nodes() {
                return Err(Error::format(&manifest_path, format!("basis of `{}` has wrong size", entry.name)));
            }
        }
        fields.push(FieldModel {
            name: entry.name,
            components: entry.components,
            basis,
            gps: gps.into_iter().map(GpModel::from_state).collect::<Result<_>>()?,
        });
    }
    let scalar_gps = states.scalars.into_iter().map(GpModel::from_state).collect::<Result<_>>()?;
    SurrogateModel::assemble(m.schema, m.config, common, shape_basis, fields, scalar_gps, m.n_train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::linear_dataset;
    use crate::gp::GpConfig;
    use crate::pipeline::{mmgp_predict, mmgp_train};

    #[test]
    fn round_trip_predicts_identically() {
        let d = linear_dataset(&[0.2, 0.6, 1.0, 1.4]).unwrap();
        let cfg = MmgpConfig {
            gp: GpConfig {
                n_restarts: 1,
                ..GpConfig::default()
            },
            ..MmgpConfig::default()
        };
        let model = mmgp_train(&d, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_model(&model, dir.path()).unwrap();
        let back = read_model(dir.path()).unwrap();
        assert_eq!(back.n_gps(), model.n_gps());
        let q = linear_dataset(&[0.9]).unwrap();
        let s = &q.samples()[0];
        let a = mmgp_predict(&model, &s.mesh, &s.scalar_inputs).unwrap();
        let b = mmgp_predict(&back, &s.mesh, &s.scalar_inputs).unwrap();
        assert_eq!(a.fields["u"].values(), b.fields["u"].values());
        assert_eq!(a.std["u"].values(), b.std["u"].values());
        assert_eq!(a.scalars, b.scalars);
    }

    #[test]
    fn version_mismatch_rejected() {
        let d = linear_dataset(&[0.2, 0.6, 1.0]).unwrap();
        let model = mmgp_train(&d, &MmgpConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_model(&model, dir.path()).unwrap();
        let p = dir.path().join("manifest.json");
        let text = fs::read_to_string(&p).unwrap().replacen("\"version\": 1", "\"version\": 99", 1);
        fs::write(&p, text).unwrap();
        assert!(matches!(read_model(dir.path()), Err(Error::Format { .. })));
    }
}
