//! Snapshot clustering: sine / L2 dissimilarities, PAM k-medoids, classical
//! MDS and local POD dimension studies.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{InnerProduct, SnapshotMatrix};
use crate::pod::snapshot_pod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Sine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::Sine => "sine",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Metric::L2),
            "sine" => Ok(Metric::Sine),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}` (expected l2 or sine)"))),
        }
    }
}

/// Sine of the angle between `u` and `v` under `ip`, i.e.
/// `sqrt(max(0, 1 - <u,v>^2 / (<u,u><v,v>)))`.
///
/// Evaluated as `|û - v̂| |û + v̂| / 2` on the normalized vectors, which stays
/// accurate for nearly collinear inputs where `1 - cos²` cancels.
pub fn sine_dissimilarity(u: &[f64], v: &[f64], ip: &InnerProduct) -> Result<f64> {
    let uu = ip.dot(u, u);
    let vv = ip.dot(v, v);
    if !(uu > 0.0) || !(vv > 0.0) {
        return Err(Error::InvalidArgument("sine dissimilarity of a zero vector".into()));
    }
    Ok(sine_with_norms(u, v, uu.sqrt(), vv.sqrt(), ip))
}

fn sine_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64, ip: &InnerProduct) -> f64 {
    let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a / nu - b / nv).collect();
    let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a / nu + b / nv).collect();
    let s = 0.5 * ip.norm(&minus) * ip.norm(&plus);
    s.min(1.0)
}

fn l2_distance(u: &[f64], v: &[f64], ip: &InnerProduct) -> f64 {
    let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    ip.dot(&diff, &diff).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    data: Vec<f64>,
    metric: Metric,
}

impl DissimilarityMatrix {
    /// Builds from a full row-major matrix, checking symmetry and the diagonal.
    pub fn from_full(n: usize, data: Vec<f64>, metric: Metric) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                context: "dissimilarity matrix",
                expected: n * n,
                got: data.len(),
            });
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("nonzero diagonal entry {i}")));
            }
            for j in 0..i {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !(a >= 0.0) || (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::InvalidArgument(format!("entry ({i},{j}) negative or asymmetric")));
                }
            }
        }
        Ok(DissimilarityMatrix { n, data, metric })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Submatrix over `idx` (in that order).
    pub fn select(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let data = (0..m * m).map(|k| self.get(idx[k / m], idx[k % m])).collect();
        DissimilarityMatrix { n: m, data, metric: self.metric }
    }
}

/// Pairwise dissimilarities of the snapshot rows.
pub fn dissimilarity_matrix(s: &SnapshotMatrix, metric: Metric, ip: &InnerProduct) -> Result<DissimilarityMatrix> {
    let n = s.n_snapshots();
    ip.check_len(s.n_dofs())?;
    let norms: Vec<f64> = (0..n).map(|i| ip.norm(s.row(i))).collect();
    if metric == Metric::Sine {
        if let Some(i) = norms.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "snapshot {i} is zero: sine dissimilarity undefined"
            )));
        }
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| match metric {
                    Metric::Sine => sine_with_norms(s.row(i), s.row(j), norms[i], norms[j], ip),
                    Metric::L2 => l2_distance(s.row(i), s.row(j), ip),
                })
                .collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(DissimilarityMatrix { n, data, metric })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<usize>,
    /// Medoid point indices, ascending; cluster `c` has medoid `medoids[c]`.
    pub medoids: Vec<usize>,
    pub cost: f64,
    pub metric: Metric,
    pub seed: u64,
    /// Cost after BUILD and after each accepted swap.
    pub cost_trace: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.medoids.len()
    }

    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == c).collect()
    }
}

fn total_cost(d: &DissimilarityMatrix, medoids: &[usize]) -> f64 {
    (0..d.n())
        .map(|i| medoids.iter().map(|&m| d.get(i, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

fn build(d: &DissimilarityMatrix, k: usize) -> Vec<usize> {
    let n = d.n();
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let cost: f64 = (0..n).map(|i| nearest[i].min(d.get(i, c))).sum();
            if best.is_none_or(|(_, b)| cost < b) {
                best = Some((c, cost));
            }
        }
        let (c, _) = best.expect("k <= n");
        medoids.push(c);
        for i in 0..n {
            nearest[i] = nearest[i].min(d.get(i, c));
        }
    }
    medoids
}

/// Best-improvement swaps until none lowers the cost. Appends to `trace`.
fn swap(d: &DissimilarityMatrix, medoids: &mut [usize], trace: &mut Vec<f64>) -> f64 {
    let n = d.n();
    let mut cost = total_cost(d, medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        let candidates: Vec<usize> = (0..n).filter(|h| !medoids.contains(h)).collect();
        for a in 0..medoids.len() {
            for &h in &candidates {
                let old = medoids[a];
                medoids[a] = h;
                let c = total_cost(d, medoids);
                medoids[a] = old;
                if best.is_none_or(|(_, _, b)| c < b) {
                    best = Some((a, h, c));
                }
            }
        }
        match best {
            Some((a, h, c)) if c < cost - 1e-14 * cost.abs() => {
                medoids[a] = h;
                cost = c;
                trace.push(cost);
            }
            _ => return cost,
        }
    }
}

fn finish(d: &DissimilarityMatrix, mut medoids: Vec<usize>) -> (Vec<usize>, Vec<usize>, f64) {
    medoids.sort_unstable();
    let labels: Vec<usize> = (0..d.n())
        .map(|i| {
            if let Some(c) = medoids.iter().position(|&m| m == i) {
                return c;
            }
            let mut best = 0;
            for c in 1..medoids.len() {
                if d.get(i, medoids[c]) < d.get(i, medoids[best]) {
                    best = c;
                }
            }
            best
        })
        .collect();
    let cost = (0..d.n()).map(|i| d.get(i, medoids[labels[i]])).sum();
    (medoids, labels, cost)
}

/// PAM (BUILD + best-improvement SWAP). `restarts` extra runs start SWAP from
/// seeded random medoid sets; a restart replaces the result only if strictly cheaper.
pub fn pam_kmedoids(d: &DissimilarityMatrix, k: usize, seed: u64, restarts: usize) -> Result<Clustering> {
    let n = d.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must be in 1..={n}")));
    }
    let mut medoids = build(d, k);
    let mut trace = vec![total_cost(d, &medoids)];
    let mut cost = swap(d, &mut medoids, &mut trace);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let mut m: Vec<usize> = sample(&mut rng, n, k).into_vec();
        let mut t = vec![total_cost(d, &m)];
        let c = swap(d, &mut m, &mut t);
        if c < cost {
            cost = c;
            medoids = m;
            trace = t;
        }
    }
    let (medoids, labels, cost) = finish(d, medoids);
    Ok(Clustering {
        labels,
        medoids,
        cost,
        metric: d.metric(),
        seed,
        cost_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding {
    /// n rows of `dim` coordinates.
    pub coords: Vec<Vec<f64>>,
    /// Leading eigenvalues of the double-centred matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Set when a requested axis had a non-positive eigenvalue (coordinate zeroed).
    pub degenerate: bool,
}

/// Classical (Torgerson) MDS.
pub fn classical_mds(d: &DissimilarityMatrix, dim: usize) -> Result<MdsEmbedding> {
    let n = d.n();
    if dim == 0 || n < dim {
        return Err(Error::InvalidArgument(format!("MDS dimension {dim} needs at least {dim} points, got {n}")));
    }
    let sq = DMatrix::from_fn(n, n, |i, j| d.get(i, j).powi(2));
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let all_mean = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + all_mean));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
    let lmax = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
    let mut coords = vec![vec![0.0; dim]; n];
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut degenerate = false;
    for (axis, &k) in order.iter().take(dim).enumerate() {
        let l = eig.eigenvalues[k];
        eigenvalues.push(l);
        if l <= 1e-12 * lmax {
            degenerate = true;
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let pivot = (0..n)
            .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap().then(b.cmp(&a)))
            .unwrap();
        let s = if v[pivot] < 0.0 { -l.sqrt() } else { l.sqrt() };
        for i in 0..n {
            coords[i][axis] = v[i] * s;
        }
    }
    Ok(MdsEmbedding {
        coords,
        eigenvalues,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionTable {
    pub tolerances: Vec<f64>,
    /// Global POD dimension per tolerance.
    pub global: Vec<usize>,
    /// `clusters[c][e]`: POD dimension of cluster `c` at tolerance `e`.
    pub clusters: Vec<Vec<usize>>,
}

impl DimensionTable {
    pub fn max_local(&self, e: usize) -> usize {
        self.clusters.iter().map(|r| r[e]).max().unwrap_or(0)
    }
}

fn pod_dimensions(s: &SnapshotMatrix, ip: &InnerProduct, tolerances: &[f64]) -> Result<Vec<usize>> {
    tolerances
        .iter()
        .map(|&eps| snapshot_pod(s, ip, eps).map(|b| b.n_modes()))
        .collect()
}

/// POD dimension of each cluster (and of the whole set) for every tolerance.
pub fn local_pod_dimensions(
    s: &SnapshotMatrix,
    labels: &[usize],
    tolerances: &[f64],
    ip: &InnerProduct,
) -> Result<DimensionTable> {
    if labels.len() != s.n_snapshots() {
        return Err(Error::DimensionMismatch {
            context: "cluster labels",
            expected: s.n_snapshots(),
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |&l| l + 1);
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if let Some(c) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::InvalidArgument(format!("cluster {c} is empty")));
    }
    let global = pod_dimensions(s, ip, tolerances)?;
    let clusters = members
        .par_iter()
        .map(|m| pod_dimensions(&s.select(m), ip, tolerances))
        .collect::<Result<Vec<_>>>()?;
    Ok(DimensionTable {
        tolerances: tolerances.to_vec(),
        global,
        clusters,
    })
}

/// Index of the closest medoid; lowest index on ties.
pub fn assign_by_medoid(field: &[f64], medoids: &[&[f64]], metric: Metric, ip: &InnerProduct) -> Result<usize> {
    if medoids.is_empty() {
        return Err(Error::InvalidArgument("no medoids to assign to".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (c, m) in medoids.iter().enumerate() {
        if m.len() != field.len() {
            return Err(Error::DimensionMismatch {
                context: "medoid",
                expected: field.len(),
                got: m.len(),
            });
        }
        let dist = match metric {
            Metric::Sine => sine_dissimilarity(field, m, ip)?,
            Metric::L2 => l2_distance(field, m, ip),
        };
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((c, dist));
        }
    }
    Ok(best.unwrap().0)
}

/// One row per (k, tolerance, cluster) of a sweep over cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub k: usize,
    pub tolerance: f64,
    pub cluster: usize,
    pub dimension: usize,
    pub global: usize,
}

/// Clusters for every k in `ks` and tabulates local POD dimensions.
pub fn dimension_study(
    s: &SnapshotMatrix,
    d: &DissimilarityMatrix,
    ks: &[usize],
    tolerances: &[f64],
    ip: &InnerProduct,
    seed: u64,
) -> Result<(Vec<Clustering>, Vec<DimensionRow>)> {
    let mut clusterings = Vec::with_capacity(ks.len());
    let mut rows = Vec::new();
    for &k in ks {
        let cl = pam_kmedoids(d, k, seed, 0)?;
        let table = local_pod_dimensions(s, &cl.labels, tolerances, ip)?;
        for (e, &tol) in tolerances.iter().enumerate() {
            for (c, dims) in table.clusters.iter().enumerate() {
                rows.push(DimensionRow {
                    k,
                    tolerance: tol,
                    cluster: c,
                    dimension: dims[e],
                    global: table.global[e],
                });
            }
        }
        clusterings.push(cl);
    }
    Ok((clusterings, rows))
}

pub fn dimension_csv(rows: &[DimensionRow]) -> String {
    let mut out = String::from("k,tolerance,cluster,dimension,global\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{},{},{}", r.k, r.tolerance, r.cluster, r.dimension, r.global);
    }
    out
}

pub fn labels_csv(cl: &Clustering) -> String {
    let mut out = String::from("index,label,is_medoid\n");
    for (i, &l) in cl.labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{l},{}", u8::from(cl.medoids.contains(&i)));
    }
    out
}

pub fn mds_csv(mds: &MdsEmbedding, labels: &[usize]) -> String {
    let dim = mds.coords.first().map_or(0, |c| c.len());
    let mut out = String::from("index,label");
    for a in 0..dim {
        let _ = write!(out, ",x{}", a + 1);
    }
    out.push('\n');
    for (i, c) in mds.coords.iter().enumerate() {
        let _ = write!(out, "{i},{}", labels.get(i).copied().unwrap_or(0));
        for v in c {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d_from(n: usize, f: impl Fn(usize, usize) -> f64) -> DissimilarityMatrix {
        let data = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { f(k / n, k % n) }).collect();
        DissimilarityMatrix::from_full(n, data, Metric::L2).unwrap()
    }

    #[test]
    fn sine_closed_forms() {
        let ip = InnerProduct::Euclidean;
        let u = [1.0, 2.0, -0.5];
        assert_eq!(sine_dissimilarity(&u, &u, &ip).unwrap(), 0.0);
        let v: Vec<f64> = u.iter().map(|x| 0.1 * x).collect();
        assert!(sine_dissimilarity(&u, &v, &ip).unwrap() < 1e-12);
        let d = sine_dissimilarity(&[1.0, 0.0], &[1.0, 1.0], &ip).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(sine_dissimilarity(&[0.0, 0.0], &[1.0, 1.0], &ip).is_err());
    }

    #[test]
    fn matrix_entries_for_orthogonal_pair() {
        let s = SnapshotMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let ip = InnerProduct::Euclidean;
        let l2 = dissimilarity_matrix(&s, Metric::L2, &ip).unwrap();
        assert!((l2.get(0, 1) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let sine = dissimilarity_matrix(&s, Metric::Sine, &ip).unwrap();
        assert_eq!(sine.get(1, 0), 1.0);
        let one = SnapshotMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(dissimilarity_matrix(&one, Metric::Sine, &ip).unwrap().as_flat(), &[0.0]);
        let z = SnapshotMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let err = dissimilarity_matrix(&z, Metric::Sine, &ip).unwrap_err();
        assert!(err.to_string().contains("snapshot 1"));
    }

    #[test]
    fn pam_tight_pairs() {
        let group = [0, 0, 1, 1];
        let d = d_from(4, |i, j| if group[i] == group[j] { 0.01 } else { 1.0 });
        let cl = pam_kmedoids(&d, 2, 0, 0).unwrap();
        assert!((cl.cost - 0.02).abs() < 1e-15);
        assert_eq!(cl.labels[0], cl.labels[1]);
        assert_eq!(cl.labels[2], cl.labels[3]);
        assert_ne!(cl.labels[0], cl.labels[2]);
        for w in cl.cost_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn pam_k_equals_n() {
        let d = d_from(5, |i, j| (i as f64 - j as f64).abs());
        let cl = pam_kmedoids(&d, 5, 0, 0).unwrap();
        assert_eq!(cl.cost, 0.0);
        assert_eq!(cl.medoids, vec![0, 1, 2, 3, 4]);
        assert!(pam_kmedoids(&d, 6, 0, 0).is_err());
    }

    #[test]
    fn medoids_keep_their_own_label_with_duplicates() {
        // points 0 and 1 coincide; k=2 may pick both
        let d = d_from(3, |i, j| if i + j == 1 { 0.0 } else { 1.0 });
        let cl = pam_kmedoids(&d, 3, 0, 0).unwrap();
        for (c, &m) in cl.medoids.iter().enumerate() {
            assert_eq!(cl.labels[m], c);
        }
    }

    #[test]
    fn mds_two_points() {
        let d = d_from(2, |_, _| 2.0);
        let e = classical_mds(&d, 1).unwrap();
        let mut x: Vec<f64> = e.coords.iter().map(|c| c[0]).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((x[0] + 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(classical_mds(&d, 2).unwrap().degenerate);
    }

    #[test]
    fn duplicate_cluster_has_dimension_one() {
        let u = vec![1.0, 2.0, 3.0];
        let s = SnapshotMatrix::from_rows(&[u.clone(), u.clone(), vec![0.0, 1.0, 0.0]]).unwrap();
        let t = local_pod_dimensions(&s, &[0, 0, 1], &[0.0, 0.5], &InnerProduct::Euclidean).unwrap();
        assert_eq!(t.clusters[0], vec![1, 1]);
        assert_eq!(t.global[0], 2);
        assert!(local_pod_dimensions(&s, &[0, 0, 2], &[0.0], &InnerProduct::Euclidean).is_err());
    }

    #[test]
    fn assignment_is_scale_invariant_under_sine() {
        let ip = InnerProduct::Euclidean;
        let m0 = [1.0, 0.0, 1.0];
        let m1 = [0.0, 1.0, 0.0];
        let meds: Vec<&[f64]> = vec![&m0, &m1];
        assert_eq!(assign_by_medoid(&m1, &meds, Metric::Sine, &ip).unwrap(), 1);
        assert_eq!(assign_by_medoid(&[5.0, 0.0, 5.0], &meds, Metric::Sine, &ip).unwrap(), 0);
        assert_eq!(assign_by_medoid(&[-5.0, 0.0, -5.0], &meds, Metric::Sine, &ip).unwrap(), 0);
        assert!(assign_by_medoid(&[0.0; 3], &meds, Metric::Sine, &ip).is_err());
    }
}
