use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use morphrom::Error;
use serde::{Deserialize, Serialize};

use super::load_dataset;
use crate::run::{load_config, require, write_run_record, write_text, Staging, Timer};
use crate::svg::{self, Frame};
use crate::{PlotArgs, PlotKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct PlotConfig {
    pub kind: Option<PlotKind>,
    pub input: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub sample: usize,
    /// Defaults to the first output field.
    pub field: Option<String>,
    pub component: usize,
}


/// Header-indexed numeric CSV.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("{} is empty", path.display())))?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidArgument(format!("{} line {}: {e}", path.display(), n + 2)))?;
            if row.len() != columns.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} line {}: {} values for {} columns",
                    path.display(),
                    n + 2,
                    row.len(),
                    columns.len()
                ))
                .into());
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("CSV has no `{name}` column")).into())
    }
}

fn plot_mds(t: &Table) -> Result<String> {
    let (l, x) = (t.col("label")?, t.col("x1")?);
    let y = t.col("x2").ok();
    let pts: Vec<(f64, f64, usize)> = t
        .rows
        .iter()
        .map(|r| (r[x], y.map_or(0.0, |y| r[y]), r[l] as usize))
        .collect();
    Ok(svg::scatter(&pts, "MDS embedding", "axis 1", "axis 2"))
}

fn plot_dimensions(t: &Table) -> Result<String> {
    let (k, tol, dim, global) = (t.col("k")?, t.col("tolerance")?, t.col("dimension")?, t.col("global")?);
    // tolerance bits -> k -> (max local, global)
    let mut by_tol: BTreeMap<u64, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for r in &t.rows {
        let e = by_tol.entry(r[tol].to_bits()).or_default().entry(r[k] as u64).or_insert((0.0, r[global]));
        e.0 = e.0.max(r[dim]);
    }
    let mut series = Vec::new();
    for (bits, ks) in &by_tol {
        let eps = f64::from_bits(*bits);
        series.push((format!("max local, eps {eps:e}"), ks.iter().map(|(&k, v)| (k as f64, v.0)).collect(), false));
        series.push((format!("global, eps {eps:e}"), ks.iter().map(|(&k, v)| (k as f64, v.1)).collect(), true));
    }
    Ok(svg::lines(&series, false, "Local POD dimension", "number of clusters k", "POD modes"))
}

fn plot_residual(t: &Table) -> Result<String> {
    let (p, it, r) = (t.col("part")?, t.col("iteration")?, t.col("residual")?);
    let mut parts: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &t.rows {
        parts.entry(row[p] as u64).or_default().push((row[it], row[r]));
    }
    let series: Vec<_> = parts.into_iter().map(|(p, pts)| (format!("part {p}"), pts, false)).collect();
    Ok(svg::lines(&series, true, "Reduced quadrature residual", "iteration", "relative residual"))
}

fn plot_field(cfg: &PlotConfig) -> Result<String> {
    let path = require(&cfg.dataset, "--dataset")?;
    let dataset = load_dataset(&path)?;
    let sample = dataset.samples().get(cfg.sample).ok_or_else(|| {
        Error::InvalidArgument(format!("sample {} out of range ({} samples)", cfg.sample, dataset.len()))
    })?;
    let name = match &cfg.field {
        Some(f) => f.clone(),
        None => super::default_field(&dataset)?,
    };
    let f = sample
        .output_fields
        .get(&name)
        .or_else(|| sample.input_fields.get(&name))
        .ok_or_else(|| Error::Schema(format!("no field `{name}`")))?;
    if cfg.component >= f.components() {
        return Err(Error::InvalidArgument(format!("field `{name}` has {} components", f.components())).into());
    }
    let v: Vec<f64> = (0..f.n_nodes()).map(|i| f.node(i)[cfg.component]).collect();
    let (lo, hi) = v
        .iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let scale = if hi > lo { hi - lo } else { 1.0 };
    let mesh = &sample.mesh;
    let xs: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = mesh.nodes().iter().map(|p| p[1]).collect();
    let mut frame = Frame::equal(&xs, &ys);
    for t in mesh.triangles() {
        let mean = (v[t[0]] + v[t[1]] + v[t[2]]) / 3.0;
        let p = t.map(|i| mesh.nodes()[i]);
        frame.triangle(p, &svg::ramp((mean - lo) / scale));
    }
    frame.legend(0, &format!("max {hi:.4e}"), &svg::ramp(1.0));
    frame.legend(1, &format!("min {lo:.4e}"), &svg::ramp(0.0));
    let title = format!("{name}[{}], sample {}", cfg.component, cfg.sample);
    Ok(frame.finish(&title, "x", "y"))
}

pub fn run(a: PlotArgs, threads: usize) -> Result<()> {
    let mut cfg: PlotConfig = load_config(&a.common)?;
    cfg.kind = Some(a.kind);
    if a.input.is_some() {
        cfg.input = a.input.clone();
    }
    if a.dataset.is_some() {
        cfg.dataset = a.dataset.clone();
    }
    if let Some(s) = a.sample {
        cfg.sample = s;
    }
    if a.field.is_some() {
        cfg.field = a.field.clone();
    }
    if let Some(c) = a.component {
        cfg.component = c;
    }
    let staging = Staging::new(&a.common)?;
    let mut timer = Timer::default();
    let (svg_text, file) = timer.time("render", || -> Result<(String, &str)> {
        Ok(match a.kind {
            PlotKind::Mds => (plot_mds(&Table::read(&require(&cfg.input, "--input")?)?)?, "mds.svg"),
            PlotKind::Dimensions => (
                plot_dimensions(&Table::read(&require(&cfg.input, "--input")?)?)?,
                "dimensions.svg",
            ),
            PlotKind::Residual => (plot_residual(&Table::read(&require(&cfg.input, "--input")?)?)?, "residual.svg"),
            PlotKind::Field => (plot_field(&cfg)?, "field.svg"),
        })
    })?;
    write_text(&staging.path().join(file), &svg_text)?;
    write_run_record(staging.path(), "plot", &cfg, threads, &timer)?;
    staging.commit()
}
