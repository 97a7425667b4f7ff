//! Gaussians of two amplitudes advected left to right on the unit square.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FieldSpec, Sample, Schema};
use crate::error::{Error, Result};
use crate::field::{NodalField, SnapshotMatrix};
use crate::mesh::{rectangle_mesh, Mesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvectionConfig {
    pub amplitudes: Vec<f64>,
    pub positions: Vec<f64>,
    pub speed: f64,
    pub width: f64,
    pub start: f64,
    pub n_times: usize,
    /// Cells per side of the structured grid.
    pub resolution: usize,
    /// Width of the input "loading" field relative to `width`.
    pub loading_spread: f64,
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        AdvectionConfig {
            amplitudes: vec![0.1, 1.0],
            positions: vec![0.4, 0.5, 0.6],
            speed: 0.4,
            width: 0.05,
            start: 0.2,
            n_times: 10,
            resolution: 64,
            loading_spread: 2.0,
        }
    }
}

/// Parameters of one advection snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvectionProvenance {
    pub amplitude: f64,
    pub position: f64,
    pub time: f64,
}

impl AdvectionConfig {
    pub fn times(&self) -> Vec<f64> {
        if self.n_times == 1 {
            return vec![0.0];
        }
        (0..self.n_times).map(|k| k as f64 / (self.n_times - 1) as f64).collect()
    }

    /// Every Gaussian must stay at least four widths away from the boundary.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.amplitudes.is_empty() || self.amplitudes.iter().any(|a| !(*a > 0.0)) {
            return bad("advection amplitudes must be positive".into());
        }
        if !(self.width > 0.0) || self.n_times == 0 || self.resolution < 2 || self.positions.is_empty() {
            return bad("advection width, time count and resolution must be positive".into());
        }
        let m = 4.0 * self.width;
        let end = self.start + self.speed * self.times().last().copied().unwrap_or(0.0);
        let (lo, hi) = (self.start.min(end), self.start.max(end));
        if lo - m < 0.0 || hi + m > 1.0 {
            return bad(format!(
                "Gaussian centre travels over [{lo}, {hi}], closer than 4 widths ({m}) to the boundary"
            ));
        }
        for &p in &self.positions {
            if p - m < 0.0 || p + m > 1.0 {
                return bad(format!("position {p} closer than 4 widths ({m}) to the boundary"));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Mesh {
        rectangle_mesh(0.0, 1.0, 0.0, 1.0, self.resolution, self.resolution)
    }

    /// `u(x) = A exp(-|x - c|² / (2 s²))` with centre `(x1⁰ + c t, ξ2⁰)`.
    pub fn gaussian(&self, p: AdvectionProvenance, width: f64, x: [f64; 2]) -> f64 {
        let cx = self.start + self.speed * p.time;
        let r2 = (x[0] - cx).powi(2) + (x[1] - p.position).powi(2);
        p.amplitude * (-r2 / (2.0 * width * width)).exp()
    }

    /// Snapshot order: amplitude, then position, then time (time fastest).
    pub fn provenance(&self) -> Vec<AdvectionProvenance> {
        let times = self.times();
        let mut out = Vec::new();
        for &amplitude in &self.amplitudes {
            for &position in &self.positions {
                for &time in &times {
                    out.push(AdvectionProvenance { amplitude, position, time });
                }
            }
        }
        out
    }
}

/// Snapshot matrix on the structured grid plus per-row provenance.
pub fn gen_advection(config: &AdvectionConfig) -> Result<(Mesh, SnapshotMatrix, Vec<AdvectionProvenance>)> {
    config.validate()?;
    let mesh = config.mesh();
    let prov = config.provenance();
    let rows: Vec<Vec<f64>> = prov
        .iter()
        .map(|&p| mesh.nodes().iter().map(|&x| config.gaussian(p, config.width, x)).collect())
        .collect();
    let s = SnapshotMatrix::from_rows(&rows)?.with_mesh_id(mesh.id());
    Ok((mesh, s, prov))
}

/// The advection snapshots as a dataset: output field `u`, input field
/// `loading` (a wider Gaussian at the same centre), scalar inputs
/// `amplitude`, `position`, `time`.
pub fn advection_dataset(config: &AdvectionConfig) -> Result<Dataset> {
    let (mesh, s, prov) = gen_advection(config)?;
    let schema = Schema {
        scalar_inputs: vec!["amplitude".into(), "position".into(), "time".into()],
        scalar_outputs: vec![],
        input_fields: vec![FieldSpec::new("loading", 1)],
        output_fields: vec![FieldSpec::new("u", 1)],
    };
    let wide = config.width * config.loading_spread;
    let mut samples = Vec::with_capacity(prov.len());
    for (i, p) in prov.iter().enumerate() {
        let mut sample = Sample::new(mesh.clone());
        sample.scalar_inputs = BTreeMap::from([
            ("amplitude".to_string(), p.amplitude),
            ("position".to_string(), p.position),
            ("time".to_string(), p.time),
        ]);
        let loading: Vec<f64> = mesh.nodes().iter().map(|&x| config.gaussian(*p, wide, x)).collect();
        sample.input_fields.insert("loading".into(), NodalField::on_mesh(&mesh, 1, loading)?);
        sample.output_fields.insert("u".into(), NodalField::on_mesh(&mesh, 1, s.row(i).to_vec())?);
        samples.push(sample);
    }
    Dataset::new(schema, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_sixty_snapshots() {
        let (_, s, prov) = gen_advection(&AdvectionConfig::default()).unwrap();
        assert_eq!(s.n_snapshots(), 60);
        assert_eq!(prov.len(), 60);
    }

    #[test]
    fn peak_equals_amplitude() {
        let c = AdvectionConfig::default();
        let p = AdvectionProvenance {
            amplitude: 0.1,
            position: 0.5,
            time: 0.4,
        };
        assert_eq!(c.gaussian(p, c.width, [c.start + c.speed * 0.4, 0.5]), 0.1);
    }

    #[test]
    fn margin_violation_rejected() {
        let c = AdvectionConfig {
            start: 0.15,
            ..AdvectionConfig::default()
        };
        assert!(c.validate().is_err());
        let c = AdvectionConfig {
            positions: vec![0.9],
            ..AdvectionConfig::default()
        };
        assert!(gen_advection(&c).is_err());
    }

    #[test]
    fn amplitude_pairs_are_proportional() {
        let (_, s, prov) = gen_advection(&AdvectionConfig::default()).unwrap();
        let half = prov.len() / 2;
        for i in 0..half {
            for (a, b) in s.row(i).iter().zip(s.row(i + half)) {
                assert!((a * 10.0 - b).abs() <= 1e-15 * b.abs().max(1e-300));
            }
        }
    }
}
