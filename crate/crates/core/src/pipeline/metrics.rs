//! Field and scalar error metrics, Spearman rank correlation and the evaluation report.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{ensure_finite, Error, Result};

use super::{mmgp_predict_dataset, PhaseTimings, SurrogateModel};

/// ‖pred − ref‖_M / ‖ref‖_M with a lumped-mass norm; the absolute error
/// ‖pred − ref‖_M when the reference is identically zero.
pub fn relative_l2(pred: &[f64], reference: &[f64], mass: &[f64], components: usize) -> Result<f64> {
    if pred.len() != reference.len() || reference.len() != mass.len() * components {
        return Err(Error::DimensionMismatch {
            context: "relative L2 error",
            expected: mass.len() * components,
            got: pred.len().max(reference.len()),
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, w) in mass.iter().enumerate() {
        for c in 0..components {
            let k = i * components + c;
            num += w * (pred[k] - reference[k]).powi(2);
            den += w * reference[k].powi(2);
        }
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

/// 1-based ranks, tied values sharing the average of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of average ranks. A constant input
/// carries no ranking and gives 0.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "Spearman correlation",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("Spearman correlation needs at least 2 points".into()));
    }
    ensure_finite(a, "Spearman input")?;
    ensure_finite(b, "Spearman input")?;
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let m = (a.len() as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - m) * (y - m);
        saa += (x - m) * (x - m);
        sbb += (y - m) * (y - m);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldErrors {
    pub name: String,
    pub per_sample: Vec<f64>,
    /// Mean of `per_sample`.
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarErrors {
    pub name: String,
    pub reference: Vec<f64>,
    pub predicted: Vec<f64>,
    pub std: Vec<f64>,
    /// |pred − ref| / |ref| (absolute when ref = 0).
    pub relative: Vec<f64>,
    pub aggregate: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub fields: Vec<FieldErrors>,
    /// Mean over fields of their aggregate errors.
    pub aggregate_field_error: f64,
    pub scalars: Vec<ScalarErrors>,
    /// How predictive std fields were obtained.
    pub std_model: String,
    /// Summed over samples, in seconds. Not part of the CSV output.
    pub timings: PhaseTimings,
}

impl EvalReport {
    /// `kind,name,sample,value` rows; `sample` is `all` for aggregates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,name,sample,value\n");
        for f in &self.fields {
            for (k, e) in f.per_sample.iter().enumerate() {
                out.push_str(&format!("field_error,{},{k},{e:e}\n", f.name));
            }
            out.push_str(&format!("field_error,{},all,{:e}\n", f.name, f.aggregate));
        }
        for s in &self.scalars {
            for (k, e) in s.relative.iter().enumerate() {
                out.push_str(&format!("scalar_error,{},{k},{e:e}\n", s.name));
            }
            out.push_str(&format!("scalar_error,{},all,{:e}\n", s.name, s.aggregate));
            out.push_str(&format!("spearman,{},all,{:e}\n", s.name, s.spearman));
        }
        out.push_str(&format!("field_error,aggregate,all,{:e}\n", self.aggregate_field_error));
        out
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Predicts every sample of `test` and scores fields and scalars against the references.
pub fn evaluate(model: &SurrogateModel, test: &Dataset) -> Result<EvalReport> {
    let (preds, timings) = mmgp_predict_dataset(model, test)?;
    let samples = test.samples();
    let masses: Vec<Vec<f64>> = samples.iter().map(|s| s.mesh.lumped_mass()).collect();
    let mut fields = Vec::new();
    for spec in &model.schema.output_fields {
        let per_sample = samples
            .iter()
            .zip(&preds)
            .zip(&masses)
            .map(|((s, p), m)| {
                relative_l2(
                    p.fields[&spec.name].values(),
                    s.output_fields[&spec.name].values(),
                    m,
                    spec.components,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        fields.push(FieldErrors {
            name: spec.name.clone(),
            aggregate: mean(&per_sample),
            per_sample,
        });
    }
    let mut scalars = Vec::new();
    for name in &model.schema.scalar_outputs {
        let reference: Vec<f64> = samples.iter().map(|s| s.scalar_outputs[name]).collect();
        let predicted: Vec<f64> = preds.iter().map(|p| p.scalars[name].0).collect();
        let std = preds.iter().map(|p| p.scalars[name].1).collect();
        let relative: Vec<f64> = reference
            .iter()
            .zip(&predicted)
            .map(|(r, p)| if *r != 0.0 { (p - r).abs() / r.abs() } else { (p - r).abs() })
            .collect();
        let rho = if reference.len() >= 2 {
            spearman(&predicted, &reference)?
        } else {
            f64::NAN
        };
        scalars.push(ScalarErrors {
            name: name.clone(),
            aggregate: mean(&relative),
            spearman: rho,
            reference,
            predicted,
            std,
            relative,
        });
    }
    let aggregate_field_error = mean(&fields.iter().map(|f| f.aggregate).collect::<Vec<_>>());
    Ok(EvalReport {
        n_samples: samples.len(),
        fields,
        aggregate_field_error,
        scalars,
        std_model: "independent generalized coordinates".into(),
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 5.0, 2.0, 8.0];
        assert_eq!(spearman(&a, &a).unwrap(), 1.0);
        let rev: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_eq!(spearman(&a, &rev).unwrap(), -1.0);
        assert_eq!(spearman(&a, &[1.0; 4]).unwrap(), 0.0);
        assert!(spearman(&a[..1], &a[..1]).is_err());
    }

    #[test]
    fn spearman_matches_classic_formula_without_ties() {
        // 1 - 6 Σd² / (n (n² - 1))
        let a = [0.3, 0.1, 0.9, 0.5, 0.7];
        let b = [1.0, 3.0, 2.0, 5.0, 4.0];
        let (ra, rb) = (average_ranks(&a), average_ranks(&b));
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        let n = 5.0;
        let want = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!((spearman(&a, &b).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn relative_l2_zero_reference_falls_back() {
        let m = [0.5, 0.5];
        assert_eq!(relative_l2(&[1.0, 1.0], &[1.0, 1.0], &m, 1).unwrap(), 0.0);
        assert_eq!(relative_l2(&[2.0, 0.0], &[0.0, 0.0], &m, 1).unwrap(), 2.0f64.sqrt());
        assert!((relative_l2(&[2.0, 2.0], &[1.0, 1.0], &m, 1).unwrap() - 1.0).abs() < 1e-15);
    }
}
