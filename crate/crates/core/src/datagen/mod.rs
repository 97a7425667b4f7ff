//! Synthetic benchmark generators and train/test splitting.

mod advection;
mod flow;
mod linear;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use linear::linear_dataset;
pub use advection::{advection_dataset, gen_advection, AdvectionConfig, AdvectionProvenance};
pub use flow::{
    flow_sample, flow_schema, gen_flow_family, o_mesh, sample_params, EllipseFlow, FlowFamilyConfig, FlowParams,
};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SplitMode {
    Iid,
    /// Test set = samples with the largest values of this scalar input.
    Extrapolate { scalar: String },
}

/// Train/test index lists. Both are sorted ascending.
pub fn split_indices(dataset: &Dataset, train_frac: f64, seed: u64, mode: &SplitMode) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let n = dataset.len();
    let n_train = ((train_frac * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    match mode {
        SplitMode::Iid => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
        }
        SplitMode::Extrapolate { scalar } => {
            let mut vals = Vec::with_capacity(n);
            for s in dataset.samples() {
                let v = s
                    .scalar_inputs
                    .get(scalar)
                    .ok_or_else(|| Error::InvalidArgument(format!("no scalar input `{scalar}` to split on")))?;
                vals.push(*v);
            }
            order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
        }
    }
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &Dataset, train_frac: f64, seed: u64, mode: &SplitMode) -> Result<(Dataset, Dataset)> {
    let (tr, te) = split_indices(dataset, train_frac, seed, mode)?;
    Ok((dataset.subset(&tr), dataset.subset(&te)))
}
