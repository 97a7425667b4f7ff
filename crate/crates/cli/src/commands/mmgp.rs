use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use morphrom::dataset::{write_dataset, Dataset, Sample};
use morphrom::io::MeshFormat;
use morphrom::pipeline::{evaluate as eval_model, mmgp_predict_dataset, mmgp_train, read_model, write_model, MmgpConfig, PhaseTimings};

use serde::{Deserialize, Serialize};

use super::{load_dataset, need_path, SubsetConfig};
use crate::run::{load_config, write_run_record, write_text, Staging, Timer};
use crate::{EvaluateArgs, PredictArgs, TrainArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct TrainConfig {
    pub dataset: Option<PathBuf>,
    pub subset: SubsetConfig,
    pub mmgp: MmgpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ApplyConfig {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub subset: SubsetConfig,
}

fn add_phases(timer: &mut Timer, t: &PhaseTimings) {
    timer.add("morph", t.morph);
    timer.add("interpolate", t.interpolate);
    timer.add("regress", t.regress);
}

pub fn train(a: TrainArgs, threads: usize) -> Result<()> {
    let mut cfg: TrainConfig = load_config(&a.common)?;
    if a.dataset.is_some() {
        cfg.dataset = a.dataset.clone();
    }
    cfg.subset.apply_flags(&a.subset);
    if let Some(s) = a.seed {
        cfg.mmgp.gp.seed = s;
    }
    if let Some(r) = a.restarts {
        cfg.mmgp.gp.n_restarts = r;
    }
    if let Some(e) = a.shape_eps {
        cfg.mmgp.shape_eps = e;
    }
    if let Some(e) = a.output_eps {
        cfg.mmgp.output_eps = e;
    }
    if a.isotropic {
        cfg.mmgp.gp.isotropic = true;
    }
    let path = need_path(&cfg.dataset, "--dataset")?;
    let staging = Staging::new(&a.common)?;
    let mut timer = Timer::default();
    let dataset = timer.time("load", || load_dataset(&path))?;
    let (train, _) = cfg.subset.select(dataset)?;
    log::info!("training on {} samples", train.len());
    let model = timer.time("train", || mmgp_train(&train, &cfg.mmgp))?;
    log::info!("{} GPs, {} shape modes", model.n_gps(), model.shape_basis.n_modes());
    timer.time("write", || write_model(&model, staging.path()))?;
    write_run_record(staging.path(), "train", &cfg, threads, &timer)?;
    staging.commit()
}

fn apply_config(common: &crate::Common, model: &Option<PathBuf>, dataset: &Option<PathBuf>, subset: &crate::SubsetArgs) -> Result<ApplyConfig> {
    let mut cfg: ApplyConfig = load_config(common)?;
    if model.is_some() {
        cfg.model = model.clone();
    }
    if dataset.is_some() {
        cfg.dataset = dataset.clone();
    }
    cfg.subset.apply_flags(subset);
    Ok(cfg)
}

pub fn predict(a: PredictArgs, threads: usize) -> Result<()> {
    let cfg = apply_config(&a.common, &a.model, &a.dataset, &a.subset)?;
    let model_path = need_path(&cfg.model, "--model")?;
    let data_path = need_path(&cfg.dataset, "--dataset")?;
    let staging = Staging::new(&a.common)?;
    let mut timer = Timer::default();
    let model = timer.time("load_model", || read_model(&model_path))?;
    let dataset = timer.time("load", || load_dataset(&data_path))?;
    let (data, indices) = cfg.subset.select(dataset)?;
    let (preds, phases) = mmgp_predict_dataset(&model, &data)?;
    add_phases(&mut timer, &phases);

    let mut mean = Vec::with_capacity(preds.len());
    let mut std = Vec::with_capacity(preds.len());
    for (s, p) in data.samples().iter().zip(preds) {
        let base = |fields, scalars| Sample {
            mesh: s.mesh.clone(),
            scalar_inputs: s.scalar_inputs.clone(),
            input_fields: s.input_fields.clone(),
            output_fields: fields,
            scalar_outputs: scalars,
        };
        let m: BTreeMap<String, f64> = p.scalars.iter().map(|(k, v)| (k.clone(), v.0)).collect();
        let sd: BTreeMap<String, f64> = p.scalars.iter().map(|(k, v)| (k.clone(), v.1)).collect();
        mean.push(base(p.fields, m));
        std.push(base(p.std, sd));
    }
    let mean = Dataset::new(data.schema().clone(), mean)?;
    let std = Dataset::new(data.schema().clone(), std)?;
    let dir = staging.path();
    timer.time("write", || -> Result<()> {
        write_dataset(&mean, &dir.join("predicted"), MeshFormat::Binary)?;
        write_dataset(&std, &dir.join("std"), MeshFormat::Binary)?;
        Ok(())
    })?;
    let index_csv: String = std::iter::once("sample,source_index\n".to_string())
        .chain(indices.iter().enumerate().map(|(k, i)| format!("{k},{i}\n")))
        .collect();
    write_text(&dir.join("indices.csv"), &index_csv)?;
    write_run_record(dir, "predict", &cfg, threads, &timer)?;
    staging.commit()
}

pub fn evaluate(a: EvaluateArgs, threads: usize) -> Result<()> {
    let cfg = apply_config(&a.common, &a.model, &a.dataset, &a.subset)?;
    let model_path = need_path(&cfg.model, "--model")?;
    let data_path = need_path(&cfg.dataset, "--dataset")?;
    let staging = Staging::new(&a.common)?;
    let mut timer = Timer::default();
    let model = timer.time("load_model", || read_model(&model_path))?;
    let dataset = timer.time("load", || load_dataset(&data_path))?;
    let (data, _) = cfg.subset.select(dataset)?;
    let report = eval_model(&model, &data)?;
    add_phases(&mut timer, &report.timings);
    log::info!("aggregate field error {:e}", report.aggregate_field_error);
    for s in &report.scalars {
        log::info!("{}: relative error {:e}, spearman {:.4}", s.name, s.aggregate, s.spearman);
    }
    let dir = staging.path();
    morphrom::io::write_json(&dir.join("report.json"), &report)?;
    write_text(&dir.join("report.csv"), &report.to_csv())?;
    write_run_record(dir, "evaluate", &cfg, threads, &timer)?;
    staging.commit()
}
