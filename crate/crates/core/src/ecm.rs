//! Empirical cubature: sparse non-negative quadrature by non-negative
//! orthogonal matching pursuit (NNOMP).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Integrand values `g` (m rows × q points, row-major) with full weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandSnapshots {
    m: usize,
    q: usize,
    g: Vec<f64>,
    weights: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl IntegrandSnapshots {
    pub fn new(m: usize, q: usize, g: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if m == 0 || q == 0 {
            return Err(Error::InvalidArgument("integrand snapshots need m, q >= 1".into()));
        }
        if g.len() != m * q {
            return Err(Error::DimensionMismatch {
                context: "integrand values",
                expected: m * q,
                got: g.len(),
            });
        }
        if weights.len() != q {
            return Err(Error::DimensionMismatch {
                context: "full quadrature weights",
                expected: q,
                got: weights.len(),
            });
        }
        ensure_finite(&g, "integrand values")?;
        ensure_finite(&weights, "quadrature weights")?;
        if let Some(j) = weights.iter().position(|&w| w <= 0.0) {
            return Err(Error::InvalidArgument(format!("quadrature weight {j} is not positive")));
        }
        Ok(IntegrandSnapshots { m, q, g, weights, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let q = weights.len();
        if let Some(r) = rows.iter().find(|r| r.len() != q) {
            return Err(Error::DimensionMismatch {
                context: "integrand row",
                expected: q,
                got: r.len(),
            });
        }
        Self::new(rows.len(), q, rows.concat(), weights)
    }

    /// Attaches subdomain labels, which must cover `0..L` without gaps.
    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.q {
            return Err(Error::DimensionMismatch {
                context: "subdomain labels",
                expected: self.q,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_points(&self) -> usize {
        self.q
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.g[k * self.q..(k + 1) * self.q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Exact integrals `b_k = Σ_j w_j g_kj`.
    pub fn targets(&self) -> Vec<f64> {
        (0..self.m)
            .map(|k| self.row(k).iter().zip(&self.weights).map(|(g, w)| g * w).sum())
            .collect()
    }

    fn columns(&self, points: &[usize]) -> Self {
        let g = (0..self.m)
            .flat_map(|k| points.iter().map(move |&j| self.g[k * self.q + j]))
            .collect();
        IntegrandSnapshots {
            m: self.m,
            q: points.len(),
            g,
            weights: points.iter().map(|&j| self.weights[j]).collect(),
            labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmOptions {
    /// Relative residual target.
    pub tol: f64,
    /// Defaults to twice the number of integrand rows (constant row included).
    pub max_points: Option<usize>,
    pub forced: Vec<usize>,
    /// Prepend the constant integrand so the total measure is matched.
    pub include_constant: bool,
}

impl Default for EcmOptions {
    fn default() -> Self {
        EcmOptions {
            tol: 1e-8,
            max_points: None,
            forced: Vec::new(),
            include_constant: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedQuadrature {
    /// Sorted point indices.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    /// Achieved `‖G ŵ − b‖ / ‖b‖`.
    pub residual: f64,
    pub forced: Vec<usize>,
    pub converged: bool,
    /// Points in the order the greedy loop picked them.
    pub selection_order: Vec<usize>,
    /// Relative residual after each iteration.
    pub residual_trace: Vec<f64>,
}

impl ReducedQuadrature {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Lawson–Hanson active-set NNLS: `min ‖A x − b‖, x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.amax() * b.amax().max(a.amax());
    let dual_tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut passive = vec![false; n];
    let mut w = a.transpose() * (b - a * &x);
    for _outer in 0..3 * n + 10 {
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > dual_tol)
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap().then(j.cmp(&i)));
        let Some(j) = cand else { break };
        passive[j] = true;
        for _inner in 0..3 * n + 10 {
            let p: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let s_p = lstsq(&a.select_columns(&p), b);
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &i) in p.iter().enumerate() {
                    x[i] = s_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &i) in p.iter().enumerate() {
                if s_p[k] <= 0.0 {
                    let d = x[i] - s_p[k];
                    if d > 0.0 {
                        alpha = alpha.min(x[i] / d);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            for (k, &i) in p.iter().enumerate() {
                x[i] += alpha * (s_p[k] - x[i]);
            }
            for &i in &p {
                if x[i] <= 1e-15 * x.amax().max(f64::MIN_POSITIVE) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&v| v) {
                break;
            }
        }
        w = a.transpose() * (b - a * &x);
    }
    x
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    svd.solve(b, 1e-13 * smax).expect("U and V requested")
}

fn rel_residual(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>, bnorm: f64) -> f64 {
    (a * x - b).norm() / bnorm
}

/// Greedy NNOMP. Points are added by the largest positive correlation of the
/// normalized column with the residual (lowest index on ties), weights come
/// from NNLS on the active set, and zero-weight points are dropped unless forced.
pub fn ecm_nnomp(snap: &IntegrandSnapshots, opts: &EcmOptions) -> Result<ReducedQuadrature> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("ECM tolerance {} must be positive", opts.tol)));
    }
    let q = snap.q;
    let offset = usize::from(opts.include_constant);
    let m = snap.m + offset;
    let g = DMatrix::from_fn(m, q, |k, j| {
        if k < offset {
            1.0
        } else {
            snap.g[(k - offset) * q + j]
        }
    });
    let b = &g * DVector::from_column_slice(&snap.weights);
    let bnorm = b.norm();
    if !(bnorm > 0.0) {
        return Err(Error::InvalidArgument("ECM targets are all zero".into()));
    }
    let max_points = opts.max_points.unwrap_or(2 * m).max(1);
    let mut forced: Vec<usize> = Vec::new();
    for &f in &opts.forced {
        if f >= q {
            return Err(Error::InvalidArgument(format!("forced point {f} out of range ({q} points)")));
        }
        if !forced.contains(&f) {
            forced.push(f);
        }
    }
    let col_norms: Vec<f64> = (0..q).map(|j| g.column(j).norm()).collect();

    let mut active: Vec<usize> = forced.clone();
    let mut order = forced.clone();
    let mut x = DVector::zeros(active.len());
    let mut residual = bnorm;
    let mut res_vec = b.clone();
    if !active.is_empty() {
        let a = g.select_columns(&active);
        x = nnls(&a, &b);
        res_vec = &b - &a * &x;
        residual = res_vec.norm();
    }
    let mut trace = vec![residual / bnorm];
    let mut in_active = vec![false; q];
    for &j in &active {
        in_active[j] = true;
    }

    let mut converged = residual / bnorm <= opts.tol;
    let mut iterations = 0;
    while !converged && active.len() < max_points && iterations < 10 * max_points {
        iterations += 1;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..q {
            if in_active[j] || col_norms[j] == 0.0 {
                continue;
            }
            let c = g.column(j).dot(&res_vec) / col_norms[j];
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((j, c));
            }
        }
        let Some((j, c)) = best else { break };
        if !(c > 1e-14 * residual) {
            break;
        }
        active.push(j);
        order.push(j);
        in_active[j] = true;
        let a = g.select_columns(&active);
        let xa = nnls(&a, &b);
        let new_res = rel_residual(&a, &xa, &b, bnorm) * bnorm;
        if new_res >= residual {
            // no progress: the pick did not help, stop here
            active.pop();
            in_active[j] = false;
            order.pop();
            break;
        }
        // drop zero-weight non-forced points
        let mut keep_idx = Vec::with_capacity(active.len());
        let mut keep_x = Vec::with_capacity(active.len());
        for (k, &p) in active.iter().enumerate() {
            if xa[k] > 0.0 || forced.contains(&p) {
                keep_idx.push(p);
                keep_x.push(xa[k]);
            } else {
                in_active[p] = false;
            }
        }
        active = keep_idx;
        x = DVector::from_vec(keep_x);
        res_vec = &b - g.select_columns(&active) * &x;
        residual = res_vec.norm();
        trace.push(residual / bnorm);
        converged = residual / bnorm <= opts.tol;
    }
    let rel = residual / bnorm;
    if !converged {
        log::warn!("ECM stopped at relative residual {rel:.3e} with {} points (tol {:.1e})", active.len(), opts.tol);
    }
    let mut pairs: Vec<(usize, f64)> = active.iter().copied().zip(x.iter().copied()).collect();
    pairs.sort_by_key(|p| p.0);
    forced.sort_unstable();
    Ok(ReducedQuadrature {
        indices: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
        residual: rel,
        forced,
        converged,
        selection_order: order,
        residual_trace: trace,
    })
}

/// Independent ECM per subdomain label, keyed by label.
pub fn ecm_localized(snap: &IntegrandSnapshots, opts: &EcmOptions) -> Result<BTreeMap<usize, ReducedQuadrature>> {
    let labels = snap
        .labels()
        .ok_or_else(|| Error::InvalidArgument("localized ECM needs subdomain labels".into()))?;
    let n_labels = labels.iter().max().map_or(0, |&l| l + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (j, &l) in labels.iter().enumerate() {
        groups[l].push(j);
    }
    if let Some(l) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidArgument(format!("subdomain {l} has no points")));
    }
    groups
        .par_iter()
        .enumerate()
        .map(|(l, pts)| {
            let sub = snap.columns(pts);
            let local_of = |j: usize| pts.binary_search(&j).ok();
            let sub_opts = EcmOptions {
                forced: opts.forced.iter().filter_map(|&f| local_of(f)).collect(),
                ..opts.clone()
            };
            let mut rq = ecm_nnomp(&sub, &sub_opts)?;
            for v in rq.indices.iter_mut().chain(rq.forced.iter_mut()).chain(rq.selection_order.iter_mut()) {
                *v = pts[*v];
            }
            Ok((l, rq))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

/// Merges per-subdomain quadratures into one rule over the full point set.
pub fn union_quadrature(parts: &BTreeMap<usize, ReducedQuadrature>) -> (Vec<usize>, Vec<f64>) {
    let mut pairs: Vec<(usize, f64)> = parts
        .values()
        .flat_map(|rq| rq.indices.iter().copied().zip(rq.weights.iter().copied()))
        .collect();
    pairs.sort_by_key(|p| p.0);
    pairs.into_iter().unzip()
}

/// `Σ ŵ_i v_i` for integrand values at the selected points.
pub fn reduced_integrate(rq: &ReducedQuadrature, values: &[f64]) -> Result<f64> {
    if values.len() != rq.indices.len() {
        return Err(Error::DimensionMismatch {
            context: "reduced quadrature values",
            expected: rq.indices.len(),
            got: values.len(),
        });
    }
    Ok(rq.weights.iter().zip(values).map(|(w, v)| w * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand_single_point() {
        let s = IntegrandSnapshots::from_rows(&[vec![1.0, 1.0, 1.0]], vec![1.0; 3]).unwrap();
        let rq = ecm_nnomp(&s, &EcmOptions::default()).unwrap();
        assert_eq!(rq.indices, vec![0]);
        assert!((rq.weights[0] - 3.0).abs() < 1e-14);
        assert!(rq.residual < 1e-15 && rq.converged);
    }

    #[test]
    fn decoupled_supports() {
        let s = IntegrandSnapshots::from_rows(
            &[vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]],
            vec![1.0; 4],
        )
        .unwrap();
        let opts = EcmOptions {
            include_constant: false,
            ..EcmOptions::default()
        };
        let rq = ecm_nnomp(&s, &opts).unwrap();
        assert_eq!(rq.indices, vec![0, 1]);
        assert!((rq.weights[0] - 2.0).abs() < 1e-14 && (rq.weights[1] - 2.0).abs() < 1e-14);
        assert_eq!(reduced_integrate(&rq, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(reduced_integrate(&rq, &[0.0]).is_err());
    }

    #[test]
    fn forced_points_are_kept() {
        let s = IntegrandSnapshots::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]], vec![1.0; 4]).unwrap();
        let opts = EcmOptions {
            forced: vec![3],
            ..EcmOptions::default()
        };
        let rq = ecm_nnomp(&s, &opts).unwrap();
        assert!(rq.indices.contains(&3));
        assert_eq!(rq.selection_order[0], 3);
        assert!(rq.converged);
    }

    #[test]
    fn zero_target_rejected() {
        let s = IntegrandSnapshots::from_rows(&[vec![1.0, -1.0]], vec![1.0; 2]).unwrap();
        let opts = EcmOptions {
            include_constant: false,
            ..EcmOptions::default()
        };
        assert!(ecm_nnomp(&s, &opts).is_err());
        assert!(IntegrandSnapshots::from_rows(&[vec![1.0]], vec![0.0]).is_err());
    }

    #[test]
    fn nnls_matches_known_solution() {
        // unconstrained solution (1, -1) is infeasible; optimum puts weight on column 0 only
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let x = nnls(&a, &DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(x.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn localized_requires_contiguous_labels() {
        let s = IntegrandSnapshots::from_rows(&[vec![1.0, 2.0, 3.0]], vec![1.0; 3])
            .unwrap()
            .with_labels(vec![0, 2, 2])
            .unwrap();
        assert!(ecm_localized(&s, &EcmOptions::default()).is_err());
    }
}
