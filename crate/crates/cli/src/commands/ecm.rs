use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::PathBuf;

use anyhow::Result;
use morphrom::ecm::{ecm_localized, ecm_nnomp, union_quadrature, EcmOptions, IntegrandSnapshots, ReducedQuadrature};
use morphrom::mesh::Mesh;
use morphrom::Error;
use serde::{Deserialize, Serialize};

use super::{default_field, load_dataset, need_path, shared_mesh_snapshots};
use crate::run::{load_config, write_run_record, write_text, Staging, Timer};
use crate::EcmArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EcmDemoConfig {
    pub dataset: Option<PathBuf>,
    /// Defaults to the first output field.
    pub field: Option<String>,
    pub ecm: EcmOptions,
    /// Split the domain into this many vertical strips, one quadrature each.
    pub subdomains: Option<usize>,
}

#[derive(Serialize)]
struct QuadratureFile {
    field: String,
    n_points: usize,
    n_integrands: usize,
    /// Full-order integral of every integrand row.
    targets: Vec<f64>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    /// Worst relative residual over the parts.
    residual: f64,
    converged: bool,
    /// Per strip when `subdomains` is set, else a single entry keyed 0.
    parts: BTreeMap<usize, ReducedQuadrature>,
    /// Strip number of each part key.
    strips: BTreeMap<usize, usize>,
}

/// Compact strip labels of every node; empty strips are skipped.
fn strip_labels(mesh: &Mesh, n: usize) -> (Vec<usize>, BTreeMap<usize, usize>) {
    let (lo, hi) = mesh.bounding_box();
    let width = (hi[0] - lo[0]) / n as f64;
    let raw: Vec<usize> = mesh
        .nodes()
        .iter()
        .map(|p| {
            if width > 0.0 {
                (((p[0] - lo[0]) / width).floor() as usize).min(n - 1)
            } else {
                0
            }
        })
        .collect();
    let mut used: Vec<usize> = raw.clone();
    used.sort_unstable();
    used.dedup();
    let compact: BTreeMap<usize, usize> = used.iter().enumerate().map(|(c, &s)| (s, c)).collect();
    let labels = raw.iter().map(|s| compact[s]).collect();
    let strips = compact.iter().map(|(&s, &c)| (c, s)).collect();
    (labels, strips)
}

/// One integrand row per snapshot and component, sampled at the nodes.
fn integrand_rows(values: &[f64], components: usize) -> Vec<Vec<f64>> {
    (0..components)
        .map(|c| values.iter().skip(c).step_by(components).copied().collect())
        .collect()
}

pub fn run(a: EcmArgs, threads: usize) -> Result<()> {
    let mut cfg: EcmDemoConfig = load_config(&a.common)?;
    if a.dataset.is_some() {
        cfg.dataset = a.dataset.clone();
    }
    if a.field.is_some() {
        cfg.field = a.field.clone();
    }
    if let Some(t) = a.tol {
        cfg.ecm.tol = t;
    }
    if a.max_points.is_some() {
        cfg.ecm.max_points = a.max_points;
    }
    if a.subdomains.is_some() {
        cfg.subdomains = a.subdomains;
    }
    if cfg.subdomains == Some(0) {
        return Err(Error::InvalidArgument("--subdomains must be at least 1".into()).into());
    }
    let path = need_path(&cfg.dataset, "--dataset")?;
    let staging = Staging::new(&a.common)?;
    let mut timer = Timer::default();
    let dataset = timer.time("load", || load_dataset(&path))?;
    if cfg.field.is_none() {
        cfg.field = Some(default_field(&dataset)?);
    }
    let field = cfg.field.clone().unwrap_or_default();
    let (mesh, snaps, components) = shared_mesh_snapshots(&dataset, &field)?;
    let rows: Vec<Vec<f64>> = snaps.rows().flat_map(|r| integrand_rows(r, components)).collect();
    let snap = IntegrandSnapshots::from_rows(&rows, mesh.lumped_mass())?;
    let targets = snap.targets();

    let (parts, strips) = match cfg.subdomains {
        None => {
            let rq = timer.time("ecm", || ecm_nnomp(&snap, &cfg.ecm))?;
            (BTreeMap::from([(0, rq)]), BTreeMap::from([(0, 0)]))
        }
        Some(n) => {
            let (labels, strips) = strip_labels(&mesh, n);
            let snap = snap.clone().with_labels(labels)?;
            (timer.time("ecm", || ecm_localized(&snap, &cfg.ecm))?, strips)
        }
    };
    let (indices, weights) = union_quadrature(&parts);
    let residual = parts.values().map(|p| p.residual).fold(0.0, f64::max);
    let converged = parts.values().all(|p| p.converged);
    if !converged {
        log::warn!("reduced quadrature did not reach tol {:e} (residual {residual:e})", cfg.ecm.tol);
    }
    log::info!("{} of {} points selected, residual {residual:e}", indices.len(), snap.n_points());

    let mut trace = String::from("part,iteration,residual\n");
    for (p, rq) in &parts {
        for (it, r) in rq.residual_trace.iter().enumerate() {
            let _ = writeln!(trace, "{p},{},{r:e}", it + 1);
        }
    }
    let out = QuadratureFile {
        field,
        n_points: snap.n_points(),
        n_integrands: snap.n_rows(),
        targets,
        indices,
        weights,
        residual,
        converged,
        parts,
        strips,
    };
    let dir = staging.path();
    morphrom::io::write_json(&dir.join("quadrature.json"), &out)?;
    write_text(&dir.join("residual_trace.csv"), &trace)?;
    write_run_record(dir, "ecm-demo", &cfg, threads, &timer)?;
    staging.commit()
}
