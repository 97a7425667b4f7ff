//! Snapshot POD: eigendecomposition of the snapshot Gram matrix.
//!
//! Modes are linear combinations of the snapshots, so every linear relation
//! shared by all snapshots (such as vanishing on a boundary group) holds for
//! every mode and every reconstruction.

mod gappy;
mod indicator;

use std::path::Path;

use rayon::prelude::*;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use gappy::{enrich_sample, gappy_reconstruct, GappyModel};
pub use indicator::{fit_error_indicator, ErrorIndicator};

use crate::error::{ensure_finite, Error, Result};
use crate::field::{InnerProduct, SnapshotMatrix};
use crate::io::{read_f64_bin, read_json, write_f64_bin, write_json};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    n_dofs: usize,
    /// r rows of length n_dofs, row-major
    modes: Vec<f64>,
    eigenvalues: Vec<f64>,
    inner_product: InnerProduct,
    tolerance: f64,
}

/// Smallest r whose discarded eigenvalue mass is at most `eps² · total`.
pub fn truncation_rank(eigenvalues: &[f64], eps: f64) -> usize {
    let n = eigenvalues.len();
    // suffix sums from the small end, so tails are not built by cancellation
    let mut tails = vec![0.0; n + 1];
    for i in (0..n).rev() {
        tails[i] = tails[i + 1] + eigenvalues[i];
    }
    let budget = eps * eps * tails[0];
    (0..=n).find(|&r| tails[r] <= budget).unwrap_or(n)
}

/// POD of the rows of `snapshots` under `inner_product`, truncated at `eps`.
pub fn snapshot_pod(snapshots: &SnapshotMatrix, inner_product: &InnerProduct, eps: f64) -> Result<ReducedBasis> {
    let n = snapshots.n_snapshots();
    let n_dofs = snapshots.n_dofs();
    if n == 0 {
        return Err(Error::InvalidArgument("POD needs at least one snapshot".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("POD tolerance {eps} outside [0, 1)")));
    }
    ensure_finite(snapshots.as_flat(), "POD snapshots")?;
    inner_product.check_len(n_dofs)?;

    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = inner_product.dot(snapshots.row(i), snapshots.row(j));
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    if !(lmax > 0.0) {
        return Err(Error::InvalidArgument("all snapshots are zero: no POD modes".into()));
    }
    // Gram eigenvalues carry an absolute error of order ε·n_dofs·λmax, so
    // every one is recomputed as ‖Σᵢ vᵢ uᵢ‖², accurate relative to itself.
    // Combinations shorter than the round-off of the sum are zero directions.
    let zero_floor = (16.0 * n.max(8) as f64 * f64::EPSILON).powi(2) * lmax;
    let mut pairs: Vec<(f64, Vec<f64>)> = order
        .par_iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            // deterministic sign: largest-magnitude coefficient positive
            let pivot = (0..n)
                .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap().then(b.cmp(&a)))
                .unwrap();
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            let mut w = vec![0.0; n_dofs];
            for i in 0..n {
                let c = sign * v[i];
                if c == 0.0 {
                    continue;
                }
                for (d, s) in w.iter_mut().zip(snapshots.row(i)) {
                    *d += c * s;
                }
            }
            let l = inner_product.dot(&w, &w);
            let l = if l <= zero_floor { 0.0 } else { l };
            (l, w)
        })
        .collect();
    // stable: near-equal refined values keep the Gram order
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let numerical_rank = eigenvalues.iter().filter(|&&l| l > 0.0).count();
    let r = truncation_rank(&eigenvalues, eps).min(numerical_rank).max(1);

    let mut modes = Vec::with_capacity(r * n_dofs);
    for (l, w) in pairs.into_iter().take(r) {
        let scale = 1.0 / l.sqrt();
        modes.extend(w.into_iter().map(|x| x * scale));
    }
    reorthonormalize(&mut modes, n_dofs, inner_product);
    Ok(ReducedBasis {
        n_dofs,
        modes,
        eigenvalues,
        inner_product: inner_product.clone(),
        tolerance: eps,
    })
}

/// Two passes of modified Gram-Schmidt; keeps modes in the snapshot span.
fn reorthonormalize(modes: &mut [f64], n_dofs: usize, ip: &InnerProduct) {
    let r = modes.len() / n_dofs;
    for _ in 0..2 {
        for k in 0..r {
            for j in 0..k {
                let (head, tail) = modes.split_at_mut(k * n_dofs);
                let pj = &head[j * n_dofs..(j + 1) * n_dofs];
                let pk = &mut tail[..n_dofs];
                let c = ip.dot(pj, pk);
                for (a, b) in pk.iter_mut().zip(pj) {
                    *a -= c * b;
                }
            }
            let pk = &mut modes[k * n_dofs..(k + 1) * n_dofs];
            let nrm = ip.norm(pk);
            if nrm > 0.0 {
                for a in pk.iter_mut() {
                    *a /= nrm;
                }
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BasisMeta {
    n_modes: usize,
    n_dofs: usize,
    eigenvalues: Vec<f64>,
    tolerance: f64,
    inner_product: String,
}

impl ReducedBasis {
    /// Assembles a basis from given modes (assumed orthonormal under `inner_product`).
    pub fn from_modes(
        n_dofs: usize,
        modes: Vec<f64>,
        eigenvalues: Vec<f64>,
        inner_product: InnerProduct,
        tolerance: f64,
    ) -> Result<Self> {
        if n_dofs == 0 || !modes.len().is_multiple_of(n_dofs) {
            return Err(Error::DimensionMismatch {
                context: "basis modes",
                expected: n_dofs,
                got: modes.len(),
            });
        }
        inner_product.check_len(n_dofs)?;
        ensure_finite(&modes, "basis modes")?;
        Ok(ReducedBasis {
            n_dofs,
            modes,
            eigenvalues,
            inner_product,
            tolerance,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len() / self.n_dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k * self.n_dofs..(k + 1) * self.n_dofs]
    }

    /// All eigenvalues of the Gram matrix, descending, including discarded ones.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn inner_product(&self) -> &InnerProduct {
        &self.inner_product
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Sum of the eigenvalues not represented by the kept modes.
    pub fn discarded_energy(&self) -> f64 {
        self.eigenvalues[self.n_modes().min(self.eigenvalues.len())..].iter().sum()
    }

    /// The first `r` modes only.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.n_modes());
        ReducedBasis {
            n_dofs: self.n_dofs,
            modes: self.modes[..r * self.n_dofs].to_vec(),
            eigenvalues: self.eigenvalues.clone(),
            inner_product: self.inner_product.clone(),
            tolerance: self.tolerance,
        }
    }

    pub fn project(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                context: "projection",
                expected: self.n_dofs,
                got: field.len(),
            });
        }
        Ok((0..self.n_modes())
            .map(|k| self.inner_product.dot(self.mode(k), field))
            .collect())
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                context: "reconstruction",
                expected: self.n_modes(),
                got: coeffs.len(),
            });
        }
        let mut out = vec![0.0; self.n_dofs];
        for (k, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.mode(k)) {
                *o += c * m;
            }
        }
        Ok(out)
    }

    /// Writes `<stem>.bin` (modes, then weights for a diagonal product) and `<stem>.meta.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut payload = self.modes.clone();
        if let InnerProduct::Diagonal { weights } = &self.inner_product {
            payload.extend_from_slice(weights);
        }
        write_f64_bin(&dir.join(format!("{stem}.bin")), &payload)?;
        write_json(
            &dir.join(format!("{stem}.meta.json")),
            &BasisMeta {
                n_modes: self.n_modes(),
                n_dofs: self.n_dofs,
                eigenvalues: self.eigenvalues.clone(),
                tolerance: self.tolerance,
                inner_product: self.inner_product.tag().to_string(),
            },
        )
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let meta_path = dir.join(format!("{stem}.meta.json"));
        let meta: BasisMeta = read_json(&meta_path)?;
        let diagonal = match meta.inner_product.as_str() {
            "euclidean" => false,
            "diagonal" => true,
            other => {
                return Err(Error::format(&meta_path, format!("unknown inner product `{other}`")))
            }
        };
        let expected = meta.n_modes * meta.n_dofs + if diagonal { meta.n_dofs } else { 0 };
        let mut payload = read_f64_bin(&dir.join(format!("{stem}.bin")), Some(expected))?;
        let inner_product = if diagonal {
            let weights = payload.split_off(meta.n_modes * meta.n_dofs);
            InnerProduct::Diagonal { weights }
        } else {
            InnerProduct::Euclidean
        };
        Self::from_modes(meta.n_dofs, payload, meta.eigenvalues, inner_product, meta.tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_snapshot() {
        let u = vec![3.0, 0.0, 4.0];
        let s = SnapshotMatrix::from_rows(std::slice::from_ref(&u)).unwrap();
        let b = snapshot_pod(&s, &InnerProduct::Euclidean, 0.0).unwrap();
        assert_eq!(b.n_modes(), 1);
        assert!((b.eigenvalues()[0] - 25.0).abs() < 1e-12);
        for (m, x) in b.mode(0).iter().zip(&u) {
            assert!((m - x / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_snapshots_rejected() {
        let s = SnapshotMatrix::from_rows(&[vec![0.0; 4], vec![0.0; 4]]).unwrap();
        assert!(snapshot_pod(&s, &InnerProduct::Euclidean, 0.1).is_err());
        let s = SnapshotMatrix::from_rows(&[vec![1.0; 4]]).unwrap();
        assert!(snapshot_pod(&s, &InnerProduct::Euclidean, 1.0).is_err());
    }

    #[test]
    fn truncation_rule() {
        let l = [4.0, 3.0, 2.0, 1.0];
        assert_eq!(truncation_rank(&l, 0.0), 4);
        // eps² · 10 = 1.0 allows dropping the last eigenvalue only
        assert_eq!(truncation_rank(&l, 0.1f64.sqrt()), 3);
        assert_eq!(truncation_rank(&l, 0.999), 1);
        assert_eq!(truncation_rank(&[1.0, 0.0, 0.0], 0.0), 1);
    }

    #[test]
    fn project_reconstruct_on_modes() {
        let rows = vec![
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 2.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0, 1.0],
        ];
        let s = SnapshotMatrix::from_rows(&rows).unwrap();
        let b = snapshot_pod(&s, &InnerProduct::Euclidean, 0.0).unwrap();
        assert_eq!(b.n_modes(), 3);
        let c = b.project(b.mode(1)).unwrap();
        assert!((c[1] - 1.0).abs() < 1e-14 && c[0].abs() < 1e-14 && c[2].abs() < 1e-14);
        let back = b.reconstruct(&c).unwrap();
        for (x, y) in back.iter().zip(b.mode(1)) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(b.project(&[0.0; 4]).unwrap(), vec![0.0; 3]);
        assert!(b.project(&[0.0; 3]).is_err());
    }

    #[test]
    fn basis_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = SnapshotMatrix::from_rows(&[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, 1.0]]).unwrap();
        let ip = InnerProduct::Diagonal { weights: vec![0.5, 1.0, 2.0] };
        let b = snapshot_pod(&s, &ip, 0.0).unwrap();
        b.write(dir.path(), "basis").unwrap();
        assert_eq!(ReducedBasis::read(dir.path(), "basis").unwrap(), b);
    }
}
