use anyhow::Result;
use morphrom::dataset::{write_dataset, Dataset};
use morphrom::datagen::{advection_dataset, gen_flow_family, linear_dataset, AdvectionConfig, FlowFamilyConfig};
use morphrom::io::MeshFormat;
use serde::{Deserialize, Serialize};

use crate::run::{load_config, write_run_record, Staging, Timer};
use crate::{Family, GenArgs, MeshFormatArg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub advection: AdvectionConfig,
    pub flow: FlowFamilyConfig,
    /// Scalar input values of the linear dataset.
    pub linear_values: Vec<f64>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            advection: AdvectionConfig::default(),
            flow: FlowFamilyConfig::default(),
            linear_values: (0..12).map(|i| 0.25 + 0.25 * i as f64).collect(),
        }
    }
}


pub fn run(a: GenArgs, threads: usize) -> Result<()> {
    let mut cfg: GenConfig = load_config(&a.common)?;
    if let Some(n) = a.n_samples {
        cfg.flow.n_samples = n;
    }
    if let Some(s) = a.seed {
        cfg.flow.seed = s;
    }
    if let Some(r) = a.resolution {
        cfg.advection.resolution = r;
    }
    if let Some(v) = &a.values {
        cfg.linear_values = v.clone();
    }
    let format = match a.mesh_format {
        MeshFormatArg::Json => MeshFormat::Json,
        MeshFormatArg::Binary => MeshFormat::Binary,
    };
    let staging = Staging::new(&a.common)?;
    let mut timer = Timer::default();
    let dataset: Dataset = timer.time("generate", || match a.family {
        Family::Advection => advection_dataset(&cfg.advection),
        Family::Flow => gen_flow_family(&cfg.flow),
        Family::Linear => linear_dataset(&cfg.linear_values),
    })?;
    log::info!("generated {} samples", dataset.len());
    timer.time("write", || write_dataset(&dataset, staging.path(), format))?;
    let (family, config) = match a.family {
        Family::Advection => ("advection", serde_json::to_value(&cfg.advection)?),
        Family::Flow => ("flow", serde_json::to_value(&cfg.flow)?),
        Family::Linear => ("linear", serde_json::to_value(&cfg.linear_values)?),
    };
    let mesh_format = if format == MeshFormat::Json { "json" } else { "binary" };
    let effective = serde_json::json!({ "family": family, "mesh_format": mesh_format, "config": config });
    write_run_record(staging.path(), "gen", &effective, threads, &timer)?;
    staging.commit()
}
