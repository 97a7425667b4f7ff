use std::path::PathBuf;

use anyhow::Result;
use morphrom::cluster::{
    classical_mds, dimension_csv, dimension_study, dissimilarity_matrix, labels_csv, mds_csv, DimensionRow, Metric,
};
use morphrom::field::InnerProduct;
use morphrom::Error;
use serde::{Deserialize, Serialize};

use super::{default_field, load_dataset, need_path, shared_mesh_snapshots};
use crate::run::{load_config, write_run_record, write_text, Staging, Timer};
use crate::svg;
use crate::ClusterArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub dataset: Option<PathBuf>,
    /// Defaults to the first output field.
    pub field: Option<String>,
    pub metric: Metric,
    /// The study covers k = 1..=k; labels and the MDS colouring use k.
    pub k: usize,
    pub tolerances: Vec<f64>,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            dataset: None,
            field: None,
            metric: Metric::Sine,
            k: 5,
            tolerances: vec![1e-4],
            seed: 0,
        }
    }
}

/// Largest cluster dimension per (k, tolerance), in study order.
fn max_local(rows: &[DimensionRow]) -> Vec<(usize, f64, usize, usize)> {
    let mut out: Vec<(usize, f64, usize, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|o| o.0 == r.k && o.1 == r.tolerance) {
            Some(o) => o.2 = o.2.max(r.dimension),
            None => out.push((r.k, r.tolerance, r.dimension, r.global)),
        }
    }
    out
}

pub fn run(a: ClusterArgs, threads: usize) -> Result<()> {
    let mut cfg: ClusterConfig = load_config(&a.common)?;
    if a.dataset.is_some() {
        cfg.dataset = a.dataset.clone();
    }
    if a.field.is_some() {
        cfg.field = a.field.clone();
    }
    if let Some(m) = a.metric {
        cfg.metric = m;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(e) = &a.eps {
        cfg.tolerances = e.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()).into());
    }
    if cfg.tolerances.is_empty() {
        return Err(Error::InvalidArgument("no POD tolerances given".into()).into());
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
    if cfg.k > snaps.n_snapshots() {
        return Err(Error::InvalidArgument(format!("k = {} exceeds {} snapshots", cfg.k, snaps.n_snapshots())).into());
    }
    let ip = InnerProduct::lumped_mass(&mesh, components);

    let d = timer.time("dissimilarity", || dissimilarity_matrix(&snaps, cfg.metric, &ip))?;
    let ks: Vec<usize> = (1..=cfg.k).collect();
    let (clusterings, rows) =
        timer.time("study", || dimension_study(&snaps, &d, &ks, &cfg.tolerances, &ip, cfg.seed))?;
    let last = clusterings.last().expect("k >= 1");
    let mds = timer.time("mds", || classical_mds(&d, 2))?;
    if mds.degenerate {
        log::warn!("MDS embedding is degenerate (non-positive eigenvalue on a requested axis)");
    }

    let dir = staging.path();
    write_text(&dir.join("labels.csv"), &labels_csv(last))?;
    write_text(&dir.join("mds.csv"), &mds_csv(&mds, &last.labels))?;
    write_text(&dir.join("dimensions.csv"), &dimension_csv(&rows))?;
    let points: Vec<(f64, f64, usize)> = mds
        .coords
        .iter()
        .zip(&last.labels)
        .map(|(c, &l)| (c[0], c[1], l))
        .collect();
    let title = format!("MDS of {field} ({} metric, k = {})", cfg.metric.name(), cfg.k);
    write_text(&dir.join("mds.svg"), &svg::scatter(&points, &title, "axis 1", "axis 2"))?;
    for (k, tol, max, global) in max_local(&rows) {
        log::info!("k = {k}, eps = {tol:e}: max local dimension {max} (global {global})");
    }
    write_run_record(dir, "cluster", &cfg, threads, &timer)?;
    staging.commit()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_local_takes_cluster_maximum() {
        let row = |k, cluster, dimension| DimensionRow {
            k,
            tolerance: 1e-4,
            cluster,
            dimension,
            global: 9,
        };
        let rows = [row(1, 0, 9), row(2, 0, 4), row(2, 1, 6)];
        assert_eq!(max_local(&rows), vec![(1, 1e-4, 9, 9), (2, 1e-4, 6, 9)]);
    }
}
