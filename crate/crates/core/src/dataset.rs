//! Samples, datasets and the native versioned dataset directory.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/sample_<k>/mesh.bin + mesh.meta.json   (or mesh.json)
//! <dir>/sample_<k>/field_<name>.bin + field_<name>.meta.json
//! <dir>/sample_<k>/scalars.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::io::{read_f64_bin, read_json, read_mesh, write_f64_bin, write_json, write_mesh, MeshFormat};
use crate::mesh::Mesh;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub components: usize,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, components: usize) -> Self {
        FieldSpec {
            name: name.into(),
            components,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub scalar_inputs: Vec<String>,
    pub scalar_outputs: Vec<String>,
    pub input_fields: Vec<FieldSpec>,
    pub output_fields: Vec<FieldSpec>,
}

impl Schema {
    fn check_names(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        let scalars = self.scalar_inputs.iter().chain(&self.scalar_outputs);
        for name in scalars {
            if !seen.insert(format!("s:{name}")) {
                return Err(Error::Schema(format!("scalar `{name}` declared twice")));
            }
        }
        for f in self.input_fields.iter().chain(&self.output_fields) {
            if f.components == 0 {
                return Err(Error::Schema(format!("field `{}` has zero components", f.name)));
            }
            if f.name.is_empty() || f.name.contains(['/', '\\']) {
                return Err(Error::Schema(format!("bad field name `{}`", f.name)));
            }
            if !seen.insert(format!("f:{}", f.name)) {
                return Err(Error::Schema(format!("field `{}` declared twice", f.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub mesh: Mesh,
    pub scalar_inputs: BTreeMap<String, f64>,
    pub input_fields: BTreeMap<String, NodalField>,
    pub output_fields: BTreeMap<String, NodalField>,
    pub scalar_outputs: BTreeMap<String, f64>,
}

impl Sample {
    pub fn new(mesh: Mesh) -> Self {
        Sample {
            mesh,
            scalar_inputs: BTreeMap::new(),
            input_fields: BTreeMap::new(),
            output_fields: BTreeMap::new(),
            scalar_outputs: BTreeMap::new(),
        }
    }

    fn conform(&self, schema: &Schema, k: usize) -> Result<()> {
        let err = |what: String| Err(Error::Schema(format!("sample {k}: {what}")));
        let check_scalars = |declared: &[String], got: &BTreeMap<String, f64>, kind: &str| {
            for name in declared {
                match got.get(name) {
                    None => return err(format!("missing {kind} scalar `{name}`")),
                    Some(v) if !v.is_finite() => {
                        return Err(Error::NonFinite(format!("sample {k} scalar `{name}`")))
                    }
                    _ => {}
                }
            }
            if got.len() != declared.len() {
                return err(format!("undeclared {kind} scalar present"));
            }
            Ok(())
        };
        check_scalars(&schema.scalar_inputs, &self.scalar_inputs, "input")?;
        check_scalars(&schema.scalar_outputs, &self.scalar_outputs, "output")?;
        let check_fields = |declared: &[FieldSpec], got: &BTreeMap<String, NodalField>, kind: &str| {
            for spec in declared {
                let Some(f) = got.get(&spec.name) else {
                    return err(format!("missing {kind} field `{}`", spec.name));
                };
                if f.components() != spec.components {
                    return err(format!(
                        "field `{}` has {} components, schema says {}",
                        spec.name,
                        f.components(),
                        spec.components
                    ));
                }
                if f.n_nodes() != self.mesh.n_nodes() || f.mesh_id() != self.mesh.id() {
                    return err(format!("field `{}` does not live on the sample mesh", spec.name));
                }
            }
            if got.len() != declared.len() {
                return err(format!("undeclared {kind} field present"));
            }
            Ok(())
        };
        check_fields(&schema.input_fields, &self.input_fields, "input")?;
        check_fields(&schema.output_fields, &self.output_fields, "output")?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(schema: Schema, samples: Vec<Sample>) -> Result<Self> {
        schema.check_names()?;
        for (k, s) in samples.iter().enumerate() {
            s.conform(&schema, k)?;
        }
        Ok(Dataset { schema, samples })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sub-dataset with the given sample indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    n_samples: usize,
    #[serde(flatten)]
    schema: Schema,
}

#[derive(Debug, Serialize, Deserialize)]
struct FieldMeta {
    n_nodes: usize,
    components: usize,
}

fn sample_dir(root: &Path, k: usize) -> std::path::PathBuf {
    root.join(format!("sample_{k}"))
}

pub fn write_dataset(dataset: &Dataset, path: &Path, mesh_format: MeshFormat) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    let manifest = Manifest {
        version: DATASET_VERSION,
        n_samples: dataset.len(),
        schema: dataset.schema.clone(),
    };
    write_json(&path.join("manifest.json"), &manifest)?;
    for (k, s) in dataset.samples.iter().enumerate() {
        let dir = sample_dir(path, k);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_mesh(&dir, &s.mesh, mesh_format)?;
        for (name, f) in s.input_fields.iter().chain(&s.output_fields) {
            write_f64_bin(&dir.join(format!("field_{name}.bin")), f.values())?;
            write_json(
                &dir.join(format!("field_{name}.meta.json")),
                &FieldMeta {
                    n_nodes: f.n_nodes(),
                    components: f.components(),
                },
            )?;
        }
        let scalars: BTreeMap<&String, f64> = s
            .scalar_inputs
            .iter()
            .chain(&s.scalar_outputs)
            .map(|(k, v)| (k, *v))
            .collect();
        write_json(&dir.join("scalars.json"), &scalars)?;
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = path.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::format(path, "missing manifest.json"));
    }
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.version != DATASET_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported version {}", manifest.version),
        ));
    }
    let schema = manifest.schema;
    schema.check_names()?;
    let mut samples = Vec::with_capacity(manifest.n_samples);
    for k in 0..manifest.n_samples {
        let dir = sample_dir(path, k);
        if !dir.is_dir() {
            return Err(Error::Schema(format!("sample {k}: directory missing")));
        }
        let mesh = read_mesh(&dir)?;
        let mut sample = Sample::new(mesh);
        let scalars_path = dir.join("scalars.json");
        let scalars: BTreeMap<String, f64> = if scalars_path.exists() {
            read_json(&scalars_path)?
        } else {
            BTreeMap::new()
        };
        for name in &schema.scalar_inputs {
            let v = scalars
                .get(name)
                .ok_or_else(|| Error::Schema(format!("sample {k}: missing input scalar `{name}`")))?;
            sample.scalar_inputs.insert(name.clone(), *v);
        }
        for name in &schema.scalar_outputs {
            let v = scalars
                .get(name)
                .ok_or_else(|| Error::Schema(format!("sample {k}: missing output scalar `{name}`")))?;
            sample.scalar_outputs.insert(name.clone(), *v);
        }
        for (specs, is_input) in [(&schema.input_fields, true), (&schema.output_fields, false)] {
            for spec in specs {
                let bin = dir.join(format!("field_{}.bin", spec.name));
                if !bin.exists() {
                    return Err(Error::Schema(format!(
                        "sample {k}: field `{}` declared in manifest but absent",
                        spec.name
                    )));
                }
                let meta_path = dir.join(format!("field_{}.meta.json", spec.name));
                let meta: FieldMeta = read_json(&meta_path)?;
                if meta.components != spec.components || meta.n_nodes != sample.mesh.n_nodes() {
                    return Err(Error::Schema(format!(
                        "sample {k}: field `{}` metadata ({} nodes x {}) disagrees with schema/mesh",
                        spec.name, meta.n_nodes, meta.components
                    )));
                }
                let values = read_f64_bin(&bin, Some(meta.n_nodes * meta.components))?;
                let field = NodalField::on_mesh(&sample.mesh, spec.components, values)?;
                let target = if is_input {
                    &mut sample.input_fields
                } else {
                    &mut sample.output_fields
                };
                target.insert(spec.name.clone(), field);
            }
        }
        samples.push(sample);
    }
    Dataset::new(schema, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::rectangle_mesh;

    fn tiny_dataset() -> Dataset {
        let schema = Schema {
            scalar_inputs: vec!["s".into()],
            scalar_outputs: vec!["q".into()],
            input_fields: vec![],
            output_fields: vec![FieldSpec::new("p", 1), FieldSpec::new("v", 2)],
        };
        let samples = (0..3)
            .map(|k| {
                let m = rectangle_mesh(0.0, 1.0 + k as f64, 0.0, 1.0, 2 + k, 2);
                let n = m.n_nodes();
                let mut s = Sample::new(m.clone());
                s.scalar_inputs.insert("s".into(), 0.1 * k as f64 + 1e-17);
                s.scalar_outputs.insert("q".into(), std::f64::consts::PI * k as f64);
                let p = (0..n).map(|i| (i as f64).sin() / 3.0).collect();
                s.output_fields
                    .insert("p".into(), NodalField::on_mesh(&m, 1, p).unwrap());
                s.output_fields
                    .insert("v".into(), NodalField::coordinates(&m));
                s
            })
            .collect();
        Dataset::new(schema, samples).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset();
        for fmt in [MeshFormat::Binary, MeshFormat::Json] {
            let p = dir.path().join(format!("{fmt:?}"));
            write_dataset(&ds, &p, fmt).unwrap();
            assert_eq!(read_dataset(&p).unwrap(), ds);
        }
    }

    #[test]
    fn missing_field_names_sample() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset();
        write_dataset(&ds, dir.path(), MeshFormat::Binary).unwrap();
        fs::remove_file(dir.path().join("sample_2/field_p.bin")).unwrap();
        let err = read_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("sample 2"), "{err}");
        assert!(err.contains("`p`"), "{err}");
    }

    #[test]
    fn missing_manifest_and_nan_field() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_dataset(dir.path()).is_err());
        let ds = tiny_dataset();
        write_dataset(&ds, dir.path(), MeshFormat::Binary).unwrap();
        let f = dir.path().join("sample_1/field_p.bin");
        let mut bytes = fs::read(&f).unwrap();
        bytes[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        fs::write(&f, bytes).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::NonFiniteInFile { path, offset }) => {
                assert_eq!(path, f);
                assert_eq!(offset, 24);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch_rejected() {
        let ds = tiny_dataset();
        let mut samples = ds.samples().to_vec();
        samples[1].output_fields.remove("v");
        let err = Dataset::new(ds.schema().clone(), samples).unwrap_err();
        assert!(err.to_string().contains("sample 1"));
    }
}
