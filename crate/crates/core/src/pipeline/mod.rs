//! MMGP orchestration: morph every sample onto a common shape, transfer its
//! fields to the common mesh, compress geometry and outputs by POD, and
//! regress the generalized coordinates with Gaussian processes.
//!
//! Also hosts evaluation metrics and the local-ROM dictionary.

mod bundle;
mod metrics;
mod rom;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::field::{InnerProduct, NodalField, SnapshotMatrix};
use crate::gp::{gp_fit, GpConfig, GpModel};
use crate::interp::{transfer_to_mesh, CellLocator, TransferOperator};
use crate::mesh::Mesh;
use crate::morphing::{
    morph_to_common, CommonMorphOptions, CommonShape, ControlOptions, MorphOptions, RbfKernel, CURVE_GROUPS,
};
use crate::pod::{snapshot_pod, ReducedBasis};

pub use bundle::{read_model, write_model, BUNDLE_VERSION};
pub use metrics::{average_ranks, evaluate, relative_l2, spearman, EvalReport, FieldErrors, ScalarErrors};
pub use rom::{build_rom_dictionary, recommend, RomConfig, RomDictionary};

/// Morphing settings in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorphConfig {
    pub kernel: RbfKernel,
    pub obstacle_stride: usize,
    pub outer_stride: usize,
    pub wake_stride: usize,
    pub curve_rtol: f64,
    pub allow_inversion: bool,
}

impl Default for MorphConfig {
    fn default() -> Self {
        MorphConfig {
            kernel: RbfKernel::ThinPlateSpline,
            obstacle_stride: 1,
            outer_stride: 1,
            wake_stride: 1,
            curve_rtol: 1e-3,
            allow_inversion: false,
        }
    }
}

impl MorphConfig {
    pub fn options(&self) -> CommonMorphOptions {
        let strides = [
            ("obstacle", self.obstacle_stride),
            ("outer", self.outer_stride),
            ("wake", self.wake_stride),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        CommonMorphOptions {
            control: ControlOptions {
                strides,
                kernel: self.kernel,
            },
            morph: MorphOptions {
                allow_inversion: self.allow_inversion,
            },
            curve_rtol: self.curve_rtol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmgpConfig {
    /// POD tolerance of the coordinate-field (shape) basis.
    pub shape_eps: f64,
    /// POD tolerance of every output-field basis.
    pub output_eps: f64,
    /// Training sample whose mesh becomes the common shape.
    pub common_sample: usize,
    pub morph: MorphConfig,
    /// Template for every GP; each one gets its own seed derived from `gp.seed`.
    pub gp: GpConfig,
}

impl Default for MmgpConfig {
    fn default() -> Self {
        MmgpConfig {
            shape_eps: 1e-4,
            output_eps: 1e-4,
            common_sample: 0,
            morph: MorphConfig::default(),
            gp: GpConfig {
                isotropic: false,
                ..GpConfig::default()
            },
        }
    }
}

/// Wall-clock time spent per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub morph: f64,
    pub interpolate: f64,
    pub regress: f64,
}

impl PhaseTimings {
    fn add(&mut self, other: PhaseTimings) {
        self.morph += other.morph;
        self.interpolate += other.interpolate;
        self.regress += other.regress;
    }
}

/// Basis and per-coordinate GPs of one output field. `basis: None` means
/// every training field was identically zero and predictions are zero.
#[derive(Debug, Clone)]
pub struct FieldModel {
    pub name: String,
    pub components: usize,
    pub basis: Option<ReducedBasis>,
    pub gps: Vec<GpModel>,
}

/// A trained MMGP surrogate.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub schema: Schema,
    pub config: MmgpConfig,
    pub common: CommonShape,
    pub shape_basis: ReducedBasis,
    pub fields: Vec<FieldModel>,
    pub scalar_gps: Vec<GpModel>,
    pub n_train: usize,
    common_locator: CellLocator,
}

impl SurrogateModel {
    fn assemble(
        schema: Schema,
        config: MmgpConfig,
        common: CommonShape,
        shape_basis: ReducedBasis,
        fields: Vec<FieldModel>,
        scalar_gps: Vec<GpModel>,
        n_train: usize,
    ) -> Result<Self> {
        let expected = fields.iter().map(|f| f.basis.as_ref().map_or(0, |b| b.n_modes())).sum::<usize>()
            + schema.scalar_outputs.len();
        let got = fields.iter().map(|f| f.gps.len()).sum::<usize>() + scalar_gps.len();
        if got != expected {
            return Err(Error::DimensionMismatch {
                context: "surrogate GP count",
                expected,
                got,
            });
        }
        let common_locator = CellLocator::build(&common.mesh, None);
        Ok(SurrogateModel {
            schema,
            config,
            common,
            shape_basis,
            fields,
            scalar_gps,
            n_train,
            common_locator,
        })
    }

    /// Length of the GP input vector: shape coordinates then scalar inputs.
    pub fn input_dim(&self) -> usize {
        self.shape_basis.n_modes() + self.schema.scalar_inputs.len()
    }

    pub fn n_gps(&self) -> usize {
        self.fields.iter().map(|f| f.gps.len()).sum::<usize>() + self.scalar_gps.len()
    }
}

/// Predicted fields on the query mesh with their standard deviations.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub fields: BTreeMap<String, NodalField>,
    /// √(Σᵢ varᵢ φᵢ²) per DOF, treating generalized coordinates as independent.
    pub std: BTreeMap<String, NodalField>,
    /// (mean, std) per scalar output.
    pub scalars: BTreeMap<String, (f64, f64)>,
    pub shape_coordinates: Vec<f64>,
    pub timings: PhaseTimings,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// splitmix64 finalizer, for per-GP seeds.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn flatten_points(points: &[[f64; 2]]) -> Vec<f64> {
    points.iter().flat_map(|p| [p[0], p[1]]).collect()
}

/// Morphed mesh of `mesh` and the transfer operator from it onto the common mesh.
fn to_common(
    mesh: &Mesh,
    common: &CommonShape,
    options: &CommonMorphOptions,
) -> Result<(Mesh, TransferOperator, PhaseTimings)> {
    let t0 = Instant::now();
    let morphed = morph_to_common(mesh, common, options)?.mesh;
    let t1 = Instant::now();
    let locator = CellLocator::build(&morphed, None);
    let op = transfer_to_mesh(&morphed, &common.mesh, &locator, &CURVE_GROUPS)?;
    let timings = PhaseTimings {
        morph: secs(t1 - t0),
        interpolate: secs(t1.elapsed()),
        regress: 0.0,
    };
    Ok((morphed, op, timings))
}

fn scalar_vector(names: &[String], values: &BTreeMap<String, f64>, what: &str) -> Result<Vec<f64>> {
    if values.len() != names.len() {
        return Err(Error::Schema(format!(
            "expected {} {what} scalars, got {}",
            names.len(),
            values.len()
        )));
    }
    names
        .iter()
        .map(|n| {
            values
                .get(n)
                .copied()
                .ok_or_else(|| Error::Schema(format!("missing {what} scalar `{n}`")))
        })
        .collect()
}

fn fit_gp(x: &[Vec<f64>], y: &[f64], template: &GpConfig, index: u64) -> Result<GpModel> {
    let config = GpConfig {
        seed: derive_seed(template.seed, index),
        ..template.clone()
    };
    gp_fit(x, y, &config)
}

/// Trains an MMGP surrogate on `dataset`.
pub fn mmgp_train(dataset: &Dataset, config: &MmgpConfig) -> Result<SurrogateModel> {
    let schema = dataset.schema().clone();
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("MMGP needs at least 2 samples, got {n}")));
    }
    if schema.output_fields.is_empty() && schema.scalar_outputs.is_empty() {
        return Err(Error::Schema("no outputs to learn".into()));
    }
    if config.common_sample >= n {
        return Err(Error::InvalidArgument(format!(
            "common sample {} out of range for {n} samples",
            config.common_sample
        )));
    }
    let options = config.morph.options();
    let samples = dataset.samples();
    let common = CommonShape::from_mesh(samples[config.common_sample].mesh.clone(), Some(config.common_sample))?;
    let n_common = common.mesh.n_nodes();

    let ops: Vec<(Mesh, TransferOperator, PhaseTimings)> = samples
        .par_iter()
        .map(|s| to_common(&s.mesh, &common, &options))
        .collect::<Result<_>>()?;
    for (k, (_, op, _)) in ops.iter().enumerate() {
        if op.n_out_of_domain() > 0 {
            log::warn!(
                "sample {k}: {} common-mesh node(s) outside the morphed mesh, values clamped",
                op.n_out_of_domain()
            );
        }
    }

    // shape embedding: original coordinates carried to the common mesh
    let shape_rows: Vec<Vec<f64>> = samples
        .iter()
        .zip(&ops)
        .map(|(s, (_, op, _))| op.apply_values(&flatten_points(s.mesh.nodes()), 2))
        .collect::<Result<_>>()?;
    let shape_ip = InnerProduct::lumped_mass(&common.mesh, 2);
    let shape_s = SnapshotMatrix::from_rows(&shape_rows)?.with_mesh_id(common.mesh.id());
    let shape_basis = snapshot_pod(&shape_s, &shape_ip, config.shape_eps)?;

    let mut inputs = Vec::with_capacity(n);
    for (s, row) in samples.iter().zip(&shape_rows) {
        let mut x = shape_basis.project(row)?;
        x.extend(scalar_vector(&schema.scalar_inputs, &s.scalar_inputs, "input")?);
        inputs.push(x);
    }

    // bases first, then every GP as one flat parallel job list
    let mut bases = Vec::with_capacity(schema.output_fields.len());
    let mut targets: Vec<Vec<f64>> = Vec::new();
    for spec in &schema.output_fields {
        let rows: Vec<Vec<f64>> = samples
            .iter()
            .zip(&ops)
            .map(|(s, (_, op, _))| op.apply_values(s.output_fields[&spec.name].values(), spec.components))
            .collect::<Result<_>>()?;
        if rows.iter().all(|r| r.iter().all(|&v| v == 0.0)) {
            bases.push(None);
            continue;
        }
        let ip = InnerProduct::lumped_mass(&common.mesh, spec.components);
        let s = SnapshotMatrix::from_rows(&rows)?.with_mesh_id(common.mesh.id());
        let basis = snapshot_pod(&s, &ip, config.output_eps)?;
        let coords: Vec<Vec<f64>> = rows.iter().map(|r| basis.project(r)).collect::<Result<_>>()?;
        for k in 0..basis.n_modes() {
            targets.push(coords.iter().map(|c| c[k]).collect());
        }
        bases.push(Some(basis));
    }
    for name in &schema.scalar_outputs {
        targets.push(samples.iter().map(|s| s.scalar_outputs[name]).collect());
    }
    let mut gps: Vec<GpModel> = targets
        .par_iter()
        .enumerate()
        .map(|(j, y)| fit_gp(&inputs, y, &config.gp, j as u64))
        .collect::<Result<_>>()?;

    let scalar_gps = gps.split_off(gps.len() - schema.scalar_outputs.len());
    let mut gps = gps.into_iter();
    let fields = schema
        .output_fields
        .iter()
        .zip(bases)
        .map(|(spec, basis)| {
            let r = basis.as_ref().map_or(0, |b| b.n_modes());
            FieldModel {
                name: spec.name.clone(),
                components: spec.components,
                basis,
                gps: gps.by_ref().take(r).collect(),
            }
        })
        .collect();
    debug_assert_eq!(n_common, shape_basis.n_dofs() / 2);
    SurrogateModel::assemble(schema, config.clone(), common, shape_basis, fields, scalar_gps, n)
}

/// Predicts every output of the surrogate on `mesh` for the given scalar inputs.
pub fn mmgp_predict(model: &SurrogateModel, mesh: &Mesh, scalar_inputs: &BTreeMap<String, f64>) -> Result<Prediction> {
    let scalars = scalar_vector(&model.schema.scalar_inputs, scalar_inputs, "input")?;
    let (morphed, op, mut timings) = to_common(mesh, &model.common, &model.config.morph.options())?;

    let t0 = Instant::now();
    let shape_row = op.apply_values(&flatten_points(mesh.nodes()), 2)?;
    let back = transfer_to_mesh(&model.common.mesh, &morphed, &model.common_locator, &CURVE_GROUPS)?;
    timings.interpolate += secs(t0.elapsed());

    let t0 = Instant::now();
    let mut x = model.shape_basis.project(&shape_row)?;
    let shape_coordinates = x.clone();
    x.extend(scalars);
    let mut out_scalars = BTreeMap::new();
    for (name, gp) in model.schema.scalar_outputs.iter().zip(&model.scalar_gps) {
        let (m, v) = gp.predict_one(&x)?;
        out_scalars.insert(name.clone(), (m, v.sqrt()));
    }
    let mut common_fields = Vec::with_capacity(model.fields.len());
    for f in &model.fields {
        let n_dofs = model.common.mesh.n_nodes() * f.components;
        let Some(basis) = &f.basis else {
            common_fields.push((vec![0.0; n_dofs], vec![0.0; n_dofs]));
            continue;
        };
        let mut means = Vec::with_capacity(f.gps.len());
        let mut var = vec![0.0; n_dofs];
        for (k, gp) in f.gps.iter().enumerate() {
            let (m, v) = gp.predict_one(&x)?;
            means.push(m);
            for (acc, phi) in var.iter_mut().zip(basis.mode(k)) {
                *acc += v * phi * phi;
            }
        }
        let mean = basis.reconstruct(&means)?;
        common_fields.push((mean, var.into_iter().map(f64::sqrt).collect()));
    }
    timings.regress += secs(t0.elapsed());

    let t0 = Instant::now();
    let mut fields = BTreeMap::new();
    let mut std = BTreeMap::new();
    for (f, (mean, sd)) in model.fields.iter().zip(common_fields) {
        let m = back.apply_values(&mean, f.components)?;
        let s = back.apply_values(&sd, f.components)?;
        fields.insert(f.name.clone(), NodalField::on_mesh(mesh, f.components, m)?);
        std.insert(f.name.clone(), NodalField::on_mesh(mesh, f.components, s)?);
    }
    timings.interpolate += secs(t0.elapsed());

    Ok(Prediction {
        fields,
        std,
        scalars: out_scalars,
        shape_coordinates,
        timings,
    })
}

/// Predictions for every sample of `dataset`, in order, with summed timings.
pub fn mmgp_predict_dataset(model: &SurrogateModel, dataset: &Dataset) -> Result<(Vec<Prediction>, PhaseTimings)> {
    if dataset.schema() != &model.schema {
        return Err(Error::Schema("dataset schema differs from the model schema".into()));
    }
    let preds: Vec<Prediction> = dataset
        .samples()
        .par_iter()
        .map(|s| mmgp_predict(model, &s.mesh, &s.scalar_inputs))
        .collect::<Result<_>>()?;
    let mut total = PhaseTimings::default();
    for p in &preds {
        total.add(p.timings);
    }
    Ok((preds, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;

    fn linear(values: &[f64]) -> Dataset {
        crate::datagen::linear_dataset(values).unwrap()
    }

    fn quick_config() -> MmgpConfig {
        MmgpConfig {
            gp: GpConfig {
                n_restarts: 2,
                ..GpConfig::default()
            },
            ..MmgpConfig::default()
        }
    }

    #[test]
    fn linear_problem_one_mode_and_accurate() {
        let train = linear(&[0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3]);
        let model = mmgp_train(&train, &quick_config()).unwrap();
        assert_eq!(model.fields[0].basis.as_ref().unwrap().n_modes(), 1);
        assert_eq!(model.n_gps(), 2);
        let test = linear(&[0.4, 0.8]);
        for s in test.samples() {
            let p = mmgp_predict(&model, &s.mesh, &s.scalar_inputs).unwrap();
            let r = s.output_fields["u"].values();
            let e = relative_l2(p.fields["u"].values(), r, &s.mesh.lumped_mass(), 1).unwrap();
            assert!(e < 1e-3, "relative error {e}");
        }
    }

    #[test]
    fn zero_outputs_predict_zero() {
        let mut d = linear(&[0.1, 0.5, 0.9]);
        let schema = d.schema().clone();
        let samples: Vec<Sample> = d
            .samples()
            .iter()
            .map(|s| {
                let mut s = s.clone();
                let z = vec![0.0; s.mesh.n_nodes()];
                s.output_fields.insert("u".into(), NodalField::on_mesh(&s.mesh, 1, z).unwrap());
                s
            })
            .collect();
        d = Dataset::new(schema, samples).unwrap();
        let model = mmgp_train(&d, &quick_config()).unwrap();
        assert!(model.fields[0].basis.is_none());
        let s = &d.samples()[1];
        let p = mmgp_predict(&model, &s.mesh, &s.scalar_inputs).unwrap();
        assert!(p.fields["u"].values().iter().all(|&v| v == 0.0));
        assert!(p.std["u"].values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_scalars_and_tiny_datasets() {
        let d = linear(&[0.1, 0.5, 0.9]);
        assert!(mmgp_train(&d.subset(&[0]), &quick_config()).is_err());
        let model = mmgp_train(&d, &quick_config()).unwrap();
        let s = &d.samples()[0];
        let mut bad = s.scalar_inputs.clone();
        bad.insert("extra".into(), 1.0);
        assert!(matches!(mmgp_predict(&model, &s.mesh, &bad), Err(Error::Schema(_))));
        assert!(matches!(mmgp_predict(&model, &s.mesh, &BTreeMap::new()), Err(Error::Schema(_))));
    }

    #[test]
    fn seeds_differ_per_gp() {
        let a: Vec<u64> = (0..4).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
