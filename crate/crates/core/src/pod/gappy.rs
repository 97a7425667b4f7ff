//! Gappy-POD: reconstruct a full field from a few sampled DOFs.

use nalgebra::{DMatrix, DVector};

use super::ReducedBasis;
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone)]
pub struct GappyModel {
    basis: ReducedBasis,
    sample_dofs: Vec<usize>,
    restricted: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    condition: f64,
}

fn basis_row(basis: &ReducedBasis, dof: usize) -> DVector<f64> {
    DVector::from_iterator(basis.n_modes(), (0..basis.n_modes()).map(|k| basis.mode(k)[dof]))
}

fn restricted_matrix(basis: &ReducedBasis, dofs: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(dofs.len(), basis.n_modes(), |i, k| basis.mode(k)[dofs[i]])
}

/// Ratio of extreme singular values; infinite when rank deficient.
fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if a.nrows() < a.ncols() || min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Component of `v` orthogonal to the orthonormal set `q`.
fn residual(q: &[DVector<f64>], v: &DVector<f64>) -> DVector<f64> {
    let mut r = v.clone();
    for _ in 0..2 {
        for e in q {
            let c = e.dot(&r);
            r.axpy(-c, e, 1.0);
        }
    }
    r
}

/// Selects sample DOFs so that the restricted basis has full column rank and
/// condition number at most `cond_cap`. `initial` DOFs are always kept.
///
/// Rank is built by pivoted Gram-Schmidt on the basis rows (largest residual
/// row first). If the condition is still above the cap, rows best aligned with
/// the weakest right singular vector are appended.
pub fn enrich_sample(basis: &ReducedBasis, initial: &[usize], cond_cap: f64) -> Result<GappyModel> {
    let r = basis.n_modes();
    let n = basis.n_dofs();
    if r == 0 {
        return Err(Error::InvalidArgument("Gappy-POD needs at least one mode".into()));
    }
    if r > n {
        return Err(Error::InvalidArgument(format!("{r} modes cannot reach full rank on {n} DOFs")));
    }
    if !(cond_cap >= 1.0) {
        return Err(Error::InvalidArgument(format!("condition cap {cond_cap} below 1")));
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut taken = vec![false; n];
    for &d in initial {
        if d >= n {
            return Err(Error::InvalidArgument(format!("sample DOF {d} out of range ({n} DOFs)")));
        }
        if !taken[d] {
            taken[d] = true;
            selected.push(d);
        }
    }

    let rows: Vec<DVector<f64>> = (0..n).map(|j| basis_row(basis, j)).collect();
    let scale = rows.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale;
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(r);
    for &d in &selected {
        if q.len() == r {
            break;
        }
        let res = residual(&q, &rows[d]);
        let nrm = res.norm();
        if nrm > tol {
            q.push(res / nrm);
        }
    }
    while q.len() < r {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n).filter(|&j| !taken[j]) {
            let nrm = residual(&q, &rows[j]).norm();
            if best.is_none_or(|(_, b)| nrm > b) {
                best = Some((j, nrm));
            }
        }
        match best {
            Some((j, nrm)) if nrm > tol => {
                let res = residual(&q, &rows[j]);
                q.push(res / nrm);
                taken[j] = true;
                selected.push(j);
            }
            _ => {
                return Err(Error::Numerical(format!(
                    "basis rows span only {} of {r} directions",
                    q.len()
                )))
            }
        }
    }

    let mut restricted = restricted_matrix(basis, &selected);
    let mut condition = condition_number(&restricted);
    while condition > cond_cap {
        let svd = restricted.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let kmin = (0..r)
            .min_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap())
            .unwrap();
        let weak = v_t.row(kmin).transpose();
        let pick = (0..n)
            .filter(|&j| !taken[j])
            .max_by(|&a, &b| {
                rows[a]
                    .dot(&weak)
                    .abs()
                    .partial_cmp(&rows[b].dot(&weak).abs())
                    .unwrap()
                    .then(b.cmp(&a))
            });
        let Some(j) = pick else {
            return Err(Error::Numerical(format!(
                "condition {condition:.3e} above cap {cond_cap:.3e} with every DOF sampled"
            )));
        };
        taken[j] = true;
        selected.push(j);
        restricted = restricted_matrix(basis, &selected);
        condition = condition_number(&restricted);
    }
    let qr = restricted.clone().qr();
    Ok(GappyModel {
        basis: basis.clone(),
        sample_dofs: selected,
        q: qr.q(),
        r: qr.r(),
        restricted,
        condition,
    })
}

impl GappyModel {
    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }

    /// Sampled DOFs, initial ones first, then additions in selection order.
    pub fn sample_dofs(&self) -> &[usize] {
        &self.sample_dofs
    }

    pub fn restricted(&self) -> &DMatrix<f64> {
        &self.restricted
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Least-squares coefficients on the sampled rows.
    pub fn coefficients(&self, sampled: &[f64]) -> Result<Vec<f64>> {
        if sampled.len() != self.sample_dofs.len() {
            return Err(Error::DimensionMismatch {
                context: "gappy samples",
                expected: self.sample_dofs.len(),
                got: sampled.len(),
            });
        }
        ensure_finite(sampled, "gappy samples")?;
        let rhs = self.q.transpose() * DVector::from_column_slice(sampled);
        let c = self
            .r
            .solve_upper_triangular(&rhs)
            .ok_or_else(|| Error::Singular("restricted basis is rank deficient".into()))?;
        Ok(c.iter().copied().collect())
    }

    /// Residual of the restricted least-squares system for given coefficients.
    pub fn residual(&self, coeffs: &[f64], sampled: &[f64]) -> f64 {
        let fit = &self.restricted * DVector::from_column_slice(coeffs);
        (fit - DVector::from_column_slice(sampled)).norm()
    }
}

/// Full-field reconstruction from sampled values and the Gappy residual.
pub fn gappy_reconstruct(model: &GappyModel, sampled: &[f64]) -> Result<(Vec<f64>, f64)> {
    let c = model.coefficients(sampled)?;
    let field = model.basis.reconstruct(&c)?;
    Ok((field, model.residual(&c, sampled)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::InnerProduct;

    fn canonical_basis(n: usize, dofs: &[usize]) -> ReducedBasis {
        let mut modes = vec![0.0; dofs.len() * n];
        for (k, &d) in dofs.iter().enumerate() {
            modes[k * n + d] = 1.0;
        }
        ReducedBasis::from_modes(n, modes, vec![1.0; dofs.len()], InnerProduct::Euclidean, 0.0).unwrap()
    }

    #[test]
    fn canonical_modes_select_their_support() {
        let b = canonical_basis(8, &[5, 1, 6]);
        let g = enrich_sample(&b, &[], 10.0).unwrap();
        let mut s = g.sample_dofs().to_vec();
        s.sort();
        assert_eq!(s, vec![1, 5, 6]);
        assert!((g.condition() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_set_kept_without_additions() {
        let b = canonical_basis(8, &[5, 1]);
        let g = enrich_sample(&b, &[1, 5, 3], 10.0).unwrap();
        assert_eq!(g.sample_dofs(), &[1, 5, 3]);
    }

    #[test]
    fn invalid_requests_fail() {
        assert!(enrich_sample(&canonical_basis(2, &[0, 1]), &[], 10.0).is_ok());
        assert!(enrich_sample(&canonical_basis(2, &[0, 1, 0]), &[], 10.0).is_err());
        assert!(enrich_sample(&canonical_basis(3, &[0, 2]), &[], 0.5).is_err());
        assert!(enrich_sample(&canonical_basis(3, &[0, 2]), &[7], 10.0).is_err());
    }

    #[test]
    fn in_span_samples_are_exact() {
        let b = canonical_basis(6, &[0, 3]);
        let g = enrich_sample(&b, &[0, 3, 4], 10.0).unwrap();
        let (field, res) = gappy_reconstruct(&g, &[2.0, -1.0, 0.0]).unwrap();
        assert_eq!(field, vec![2.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
        assert!(res < 1e-14);
        let (_, res) = gappy_reconstruct(&g, &[2.0, -1.0, 0.5]).unwrap();
        assert!((res - 0.5).abs() < 1e-14);
        assert!(gappy_reconstruct(&g, &[1.0]).is_err());
    }
}
