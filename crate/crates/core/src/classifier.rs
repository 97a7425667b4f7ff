//! Local-ROM recommendation: ANOVA-F feature selection and multinomial
//! logistic regression with an elastic-net penalty.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelector {
    /// Selected feature indices, best score first.
    pub indices: Vec<usize>,
    /// Scores of the selected features, same order.
    pub scores: Vec<f64>,
    pub max_correlation: f64,
}

impl FeatureSelector {
    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&j| x[j]).collect()
    }
}

fn check_rows(x: &[Vec<f64>], labels: &[usize]) -> Result<usize> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "classifier samples",
            expected: x.len(),
            got: labels.len(),
        });
    }
    let p = x[0].len();
    for r in x {
        if r.len() != p {
            return Err(Error::DimensionMismatch {
                context: "classifier features",
                expected: p,
                got: r.len(),
            });
        }
        ensure_finite(r, "classifier features")?;
    }
    Ok(p)
}

/// One-way ANOVA F statistic per feature; within-class variance floored at 1e-12.
pub fn anova_f_scores(x: &[Vec<f64>], labels: &[usize]) -> Result<Vec<f64>> {
    let p = check_rows(x, labels)?;
    let k = labels.iter().max().map_or(0, |&l| l + 1);
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidArgument("feature selection needs at least 2 classes".into()));
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!("class {c} has no samples")));
    }
    let n = x.len() as f64;
    let kf = k as f64;
    Ok((0..p)
        .into_par_iter()
        .map(|j| {
            let mut sums = vec![0.0; k];
            for (r, &l) in x.iter().zip(labels) {
                sums[l] += r[j];
            }
            let mean = sums.iter().sum::<f64>() / n;
            let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
            let between: f64 = means
                .iter()
                .zip(&counts)
                .map(|(m, &c)| c as f64 * (m - mean).powi(2))
                .sum::<f64>()
                / (kf - 1.0);
            let within_ss: f64 = x.iter().zip(labels).map(|(r, &l)| (r[j] - means[l]).powi(2)).sum();
            let dof = (n - kf).max(1.0);
            let within = (within_ss / dof).max(1e-12);
            // exact zero for constant features, regardless of round-off in `between`
            if between <= 1e-300 {
                0.0
            } else {
                between / within
            }
        })
        .collect())
}

fn correlation(x: &[Vec<f64>], a: usize, b: usize) -> f64 {
    let n = x.len() as f64;
    let ma = x.iter().map(|r| r[a]).sum::<f64>() / n;
    let mb = x.iter().map(|r| r[b]).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for r in x {
        let (da, db) = (r[a] - ma, r[b] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// ANOVA-F ranking then a greedy pass that skips features correlated
/// (|ρ| ≥ `max_correlation`) with one already kept. Zero-score features are never kept.
pub fn select_features(x: &[Vec<f64>], labels: &[usize], n_keep: usize, max_correlation: f64) -> Result<FeatureSelector> {
    let scores = anova_f_scores(x, labels)?;
    let p = scores.len();
    if n_keep == 0 || n_keep > p {
        return Err(Error::InvalidArgument(format!("cannot keep {n_keep} of {p} features")));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut indices: Vec<usize> = Vec::with_capacity(n_keep);
    for j in order {
        if indices.len() == n_keep || scores[j] <= 0.0 {
            break;
        }
        if indices.iter().all(|&k| correlation(x, j, k).abs() < max_correlation) {
            indices.push(j);
        }
    }
    let sel_scores = indices.iter().map(|&j| scores[j]).collect();
    Ok(FeatureSelector {
        indices,
        scores: sel_scores,
        max_correlation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub l1_ratio: f64,
    pub strength: f64,
    pub max_iter: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l1_ratio: 0.5,
            strength: 1e-3,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub n_classes: usize,
    /// K rows × p, acting on standardized features.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub l1_ratio: f64,
    pub strength: f64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Mean multinomial cross-entropy and its gradient (weights, biases) on standardized data.
pub fn cross_entropy(z: &[Vec<f64>], labels: &[usize], w: &[Vec<f64>], b: &[f64]) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let k = b.len();
    let p = w.first().map_or(0, |r| r.len());
    let n = z.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![vec![0.0; p]; k];
    let mut gb = vec![0.0; k];
    for (x, &y) in z.iter().zip(labels) {
        let logits: Vec<f64> = (0..k).map(|c| b[c] + w[c].iter().zip(x).map(|(a, v)| a * v).sum::<f64>()).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        loss += lse - logits[y];
        for c in 0..k {
            let pc = (logits[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
            gb[c] += pc / n;
            for (g, v) in gw[c].iter_mut().zip(x) {
                *g += pc * v / n;
            }
        }
    }
    (loss / n, gw, gb)
}

fn penalty(w: &[Vec<f64>], lam: f64, l1: f64) -> f64 {
    let (mut a, mut s) = (0.0, 0.0);
    for r in w {
        for v in r {
            a += v.abs();
            s += v * v;
        }
    }
    lam * (l1 * a + 0.5 * (1.0 - l1) * s)
}

/// Proximal gradient with backtracking. The ℓ1 part is handled by soft
/// thresholding, the ℓ2 part by the closed-form scaling in the same prox.
pub fn fit_logistic(x: &[Vec<f64>], labels: &[usize], config: &LogisticConfig) -> Result<LogisticModel> {
    let p = check_rows(x, labels)?;
    if !(config.strength >= 0.0) || !config.strength.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty strength {} must be >= 0", config.strength)));
    }
    if !(0.0..=1.0).contains(&config.l1_ratio) {
        return Err(Error::InvalidArgument(format!("l1_ratio {} outside [0, 1]", config.l1_ratio)));
    }
    let k = labels.iter().max().map_or(0, |&l| l + 1).max(2);
    let n = x.len() as f64;
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    for j in 0..p {
        mean[j] = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
        std[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..p).map(|j| (r[j] - mean[j]) / std[j]).collect())
        .collect();

    let (lam, l1) = (config.strength, config.l1_ratio);
    let mut w = vec![vec![0.0; p]; k];
    let mut b = vec![0.0; k];
    let (mut f, mut gw, mut gb) = cross_entropy(&z, labels, &w, &b);
    let mut obj = f + penalty(&w, lam, l1);
    let mut trace = vec![obj];
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..config.max_iter {
        let mut accepted = None;
        for _ in 0..60 {
            let t = step;
            let shrink = 1.0 / (1.0 + t * lam * (1.0 - l1));
            let wn: Vec<Vec<f64>> = w
                .iter()
                .zip(&gw)
                .map(|(wr, gr)| {
                    wr.iter()
                        .zip(gr)
                        .map(|(a, g)| {
                            let v = a - t * g;
                            let thr = t * lam * l1;
                            v.signum() * (v.abs() - thr).max(0.0) * shrink
                        })
                        .collect()
                })
                .collect();
            let bn: Vec<f64> = b.iter().zip(&gb).map(|(a, g)| a - t * g).collect();
            let (fn_, gwn, gbn) = cross_entropy(&z, labels, &wn, &bn);
            // sufficient decrease of the smooth part (Beck–Teboulle)
            let mut lin = 0.0;
            let mut sq = 0.0;
            for c in 0..k {
                for j in 0..p {
                    let d = wn[c][j] - w[c][j];
                    lin += gw[c][j] * d;
                    sq += d * d;
                }
                let d = bn[c] - b[c];
                lin += gb[c] * d;
                sq += d * d;
            }
            if fn_ <= f + lin + sq / (2.0 * t) + 1e-15 * f.abs() {
                let on = fn_ + penalty(&wn, lam, l1);
                if on <= obj {
                    accepted = Some((wn, bn, fn_, gwn, gbn, on));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((wn, bn, fn_, gwn, gbn, on)) = accepted else {
            converged = true;
            break;
        };
        let rel = (obj - on).abs() / obj.abs().max(1e-300);
        w = wn;
        b = bn;
        f = fn_;
        gw = gwn;
        gb = gbn;
        obj = on;
        trace.push(obj);
        step *= 1.5;
        if rel < 1e-8 {
            converged = true;
            break;
        }
    }
    Ok(LogisticModel {
        n_classes: k,
        weights: w,
        biases: b,
        feature_mean: mean,
        feature_std: std,
        l1_ratio: l1,
        strength: lam,
        converged,
        objective_trace: trace,
    })
}

impl LogisticModel {
    pub fn n_features(&self) -> usize {
        self.feature_mean.len()
    }

    /// Class probabilities (softmax of logits).
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                context: "classifier input",
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let z: Vec<f64> = (0..x.len()).map(|j| (x[j] - self.feature_mean[j]) / self.feature_std[j]).collect();
        let logits: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| b + w.iter().zip(&z).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        Ok(e.into_iter().map(|v| v / s).collect())
    }

    /// Most probable class (lowest index on ties) and the probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let p = self.probabilities(x)?;
        let mut best = 0;
        for c in 1..p.len() {
            if p[c] > p[best] {
                best = c;
            }
        }
        Ok((best, p))
    }

    pub fn accuracy(&self, x: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let mut hit = 0;
        for (r, &l) in x.iter().zip(labels) {
            if self.predict(r)?.0 == l {
                hit += 1;
            }
        }
        Ok(hit as f64 / x.len().max(1) as f64)
    }
}
