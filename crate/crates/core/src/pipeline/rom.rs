//! Dictionary of local reduced bases with a classifier that picks one from an input field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fit_logistic, select_features, FeatureSelector, LogisticConfig, LogisticModel};
use crate::cluster::{dissimilarity_matrix, pam_kmedoids, Clustering, Metric};
use crate::error::{Error, Result};
use crate::field::{InnerProduct, SnapshotMatrix};
use crate::pod::{snapshot_pod, ReducedBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RomConfig {
    pub k: usize,
    pub eps: f64,
    pub metric: Metric,
    pub seed: u64,
    pub restarts: usize,
    pub n_features: usize,
    pub max_correlation: f64,
    pub logistic: LogisticConfig,
}

impl Default for RomConfig {
    fn default() -> Self {
        RomConfig {
            k: 2,
            eps: 1e-4,
            metric: Metric::Sine,
            seed: 0,
            restarts: 0,
            n_features: 20,
            max_correlation: 0.95,
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RomDictionary {
    pub clustering: Clustering,
    pub medoids: Vec<Vec<f64>>,
    pub bases: Vec<ReducedBasis>,
    /// `None` when k = 1: there is nothing to choose.
    pub classifier: Option<(FeatureSelector, LogisticModel)>,
    pub n_input_dofs: usize,
    pub training_accuracy: Option<f64>,
}

impl RomDictionary {
    pub fn k(&self) -> usize {
        self.bases.len()
    }

    pub fn metric(&self) -> Metric {
        self.clustering.metric
    }
}

/// Clusters `outputs`, builds one local basis per cluster and trains the
/// recommender on `inputs` (row `i` is the input field paired with output snapshot `i`).
pub fn build_rom_dictionary(
    outputs: &SnapshotMatrix,
    inputs: &SnapshotMatrix,
    ip: &InnerProduct,
    config: &RomConfig,
) -> Result<RomDictionary> {
    let n = outputs.n_snapshots();
    if inputs.n_snapshots() != n {
        return Err(Error::DimensionMismatch {
            context: "input/output snapshot pairing",
            expected: n,
            got: inputs.n_snapshots(),
        });
    }
    if config.k == 0 || config.k > n {
        return Err(Error::InvalidArgument(format!("cannot form {} clusters from {n} snapshots", config.k)));
    }
    let d = dissimilarity_matrix(outputs, config.metric, ip)?;
    let clustering = pam_kmedoids(&d, config.k, config.seed, config.restarts)?;
    let members: Vec<Vec<usize>> = (0..config.k).map(|c| clustering.members(c)).collect();
    if let Some(c) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::Numerical(format!("cluster {c} is empty")));
    }
    let bases = members
        .par_iter()
        .map(|m| snapshot_pod(&outputs.select(m), ip, config.eps))
        .collect::<Result<Vec<_>>>()?;
    let medoids = clustering.medoids.iter().map(|&i| outputs.row(i).to_vec()).collect();

    let (classifier, training_accuracy) = if config.k == 1 {
        log::info!("single cluster: recommender skipped");
        (None, None)
    } else {
        let x: Vec<Vec<f64>> = inputs.rows().map(|r| r.to_vec()).collect();
        let n_keep = config.n_features.min(inputs.n_dofs());
        let selector = select_features(&x, &clustering.labels, n_keep, config.max_correlation)?;
        if selector.indices.is_empty() {
            return Err(Error::Numerical("no input feature separates the clusters".into()));
        }
        let z: Vec<Vec<f64>> = x.iter().map(|r| selector.transform(r)).collect();
        let model = fit_logistic(&z, &clustering.labels, &config.logistic)?;
        let acc = model.accuracy(&z, &clustering.labels)?;
        (Some((selector, model)), Some(acc))
    };
    Ok(RomDictionary {
        clustering,
        medoids,
        bases,
        classifier,
        n_input_dofs: inputs.n_dofs(),
        training_accuracy,
    })
}

/// Cluster whose local basis should be used for the given input field.
pub fn recommend(dictionary: &RomDictionary, input: &[f64]) -> Result<usize> {
    if input.len() != dictionary.n_input_dofs {
        return Err(Error::DimensionMismatch {
            context: "recommender input",
            expected: dictionary.n_input_dofs,
            got: input.len(),
        });
    }
    match &dictionary.classifier {
        None => Ok(0),
        Some((selector, model)) => Ok(model.predict(&selector.transform(input))?.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::assign_by_medoid;
    use crate::datagen::{advection_dataset, AdvectionConfig};

    fn advection() -> (SnapshotMatrix, SnapshotMatrix, InnerProduct) {
        let d = advection_dataset(&AdvectionConfig::default()).unwrap();
        let rows = |name: &str, input: bool| -> Vec<Vec<f64>> {
            d.samples()
                .iter()
                .map(|s| {
                    let f = if input { &s.input_fields[name] } else { &s.output_fields[name] };
                    f.values().to_vec()
                })
                .collect()
        };
        let ip = InnerProduct::lumped_mass(&d.samples()[0].mesh, 1);
        (
            SnapshotMatrix::from_rows(&rows("u", false)).unwrap(),
            SnapshotMatrix::from_rows(&rows("loading", true)).unwrap(),
            ip,
        )
    }

    #[test]
    fn single_cluster_is_global_basis() {
        let (s, x, ip) = advection();
        let cfg = RomConfig {
            k: 1,
            ..RomConfig::default()
        };
        let dict = build_rom_dictionary(&s, &x, &ip, &cfg).unwrap();
        assert!(dict.classifier.is_none());
        let global = snapshot_pod(&s, &ip, cfg.eps).unwrap();
        assert_eq!(dict.bases[0].n_modes(), global.n_modes());
        assert_eq!(recommend(&dict, x.row(3)).unwrap(), 0);
    }

    #[test]
    fn two_clusters_consistent_and_learnable() {
        let (s, x, ip) = advection();
        let dict = build_rom_dictionary(&s, &x, &ip, &RomConfig::default()).unwrap();
        assert_eq!(dict.k(), 2);
        let medoids: Vec<&[f64]> = dict.medoids.iter().map(|m| m.as_slice()).collect();
        for i in 0..s.n_snapshots() {
            let c = assign_by_medoid(s.row(i), &medoids, dict.metric(), &ip).unwrap();
            assert_eq!(c, dict.clustering.labels[i], "snapshot {i}");
        }
        assert!(dict.training_accuracy.unwrap() >= 0.9);
        for (c, &m) in dict.clustering.medoids.iter().enumerate() {
            assert_eq!(recommend(&dict, x.row(m)).unwrap(), c);
        }
        assert!(recommend(&dict, &[1.0]).is_err());
    }

    #[test]
    fn too_many_clusters_rejected() {
        let (s, x, ip) = advection();
        let cfg = RomConfig {
            k: 61,
            ..RomConfig::default()
        };
        assert!(build_rom_dictionary(&s, &x, &ip, &cfg).is_err());
    }
}
