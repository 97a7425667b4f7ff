//! A constructed problem with a known one-dimensional output manifold.

use crate::dataset::{Dataset, FieldSpec, Sample, Schema};
use crate::error::Result;
use crate::field::NodalField;

use super::flow::{flow_sample, FlowParams};

/// Fixed O-mesh geometry for every sample; output field `u = 2 s ψ` where ψ
/// is the unit free-stream stream function (zero on `obstacle`), scalar
/// output `q = 3 s + 1`, one scalar input `s` per entry of `values`.
pub fn linear_dataset(values: &[f64]) -> Result<Dataset> {
    let params = FlowParams {
        a: 0.5,
        b: 0.3,
        rotation: 0.0,
        u_inf: 1.0,
    };
    let base = flow_sample(&params, 2.0, 32, 12, 1.6)?;
    let psi = base.output_fields["stream"].values().to_vec();
    let mesh = base.mesh;
    let schema = Schema {
        scalar_inputs: vec!["s".into()],
        scalar_outputs: vec!["q".into()],
        input_fields: vec![],
        output_fields: vec![FieldSpec::new("u", 1)],
    };
    let mut samples = Vec::with_capacity(values.len());
    for &s in values {
        let mut smp = Sample::new(mesh.clone());
        smp.scalar_inputs.insert("s".into(), s);
        smp.scalar_outputs.insert("q".into(), 3.0 * s + 1.0);
        let u = psi.iter().map(|p| 2.0 * s * p).collect();
        smp.output_fields.insert("u".into(), NodalField::on_mesh(&mesh, 1, u)?);
        samples.push(smp);
    }
    Dataset::new(schema, samples)
}
