use morphrom::classifier::{anova_f_scores, cross_entropy, fit_logistic, select_features, LogisticConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(seed: u64, n: usize, p: usize, k: usize, sep: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| sep * rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let x = labels
        .iter()
        .map(|&l| centers[l].iter().map(|c| c + rng.random_range(-1.0..1.0)).collect())
        .collect();
    (x, labels)
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let (x, labels) = blobs(31, 30, 4, 3, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let w: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, gw, gb) = cross_entropy(&x, &labels, &w, &b);
    let h = 1e-6;
    for c in 0..3 {
        for j in 0..4 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[c][j] += h;
            wm[c][j] -= h;
            let fd = (cross_entropy(&x, &labels, &wp, &b).0 - cross_entropy(&x, &labels, &wm, &b).0) / (2.0 * h);
            assert!((fd - gw[c][j]).abs() <= 1e-6 * (1.0 + fd.abs()), "w[{c}][{j}]: {fd} vs {}", gw[c][j]);
        }
        let (mut bp, mut bm) = (b.clone(), b.clone());
        bp[c] += h;
        bm[c] -= h;
        let fd = (cross_entropy(&x, &labels, &w, &bp).0 - cross_entropy(&x, &labels, &w, &bm).0) / (2.0 * h);
        assert!((fd - gb[c]).abs() <= 1e-6 * (1.0 + fd.abs()));
    }
}

#[test]
fn fitted_model_satisfies_elastic_net_optimality() {
    let (x, labels) = blobs(33, 60, 5, 3, 0.8);
    let cfg = LogisticConfig {
        l1_ratio: 0.5,
        strength: 0.05,
        max_iter: 20000,
    };
    let m = fit_logistic(&x, &labels, &cfg).unwrap();
    assert!(m.converged);
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (v - m.feature_mean[j]) / m.feature_std[j]).collect())
        .collect();
    let (_, gw, gb) = cross_entropy(&z, &labels, &m.weights, &m.biases);
    let (l1, l2) = (cfg.strength * cfg.l1_ratio, cfg.strength * (1.0 - cfg.l1_ratio));
    for g in &gb {
        assert!(g.abs() <= 1e-4);
    }
    for (wr, gr) in m.weights.iter().zip(&gw) {
        for (&w, &g) in wr.iter().zip(gr) {
            if w == 0.0 {
                assert!(g.abs() <= l1 + 1e-4, "zero weight with |grad| {}", g.abs());
            } else {
                assert!((g + l1 * w.signum() + l2 * w).abs() <= 1e-4);
            }
        }
    }
    for t in m.objective_trace.windows(2) {
        assert!(t[1] <= t[0] + 1e-12);
    }
}

#[test]
fn anova_matches_two_group_formula() {
    // for two classes F equals the squared pooled-variance t statistic
    let (x, labels) = blobs(34, 40, 3, 2, 1.0);
    let f = anova_f_scores(&x, &labels).unwrap();
    for j in 0..3 {
        let g: Vec<Vec<f64>> = (0..2)
            .map(|c| x.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(r, _)| r[j]).collect())
            .collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ss = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
        };
        let (n0, n1) = (g[0].len() as f64, g[1].len() as f64);
        let sp2 = (ss(&g[0]) + ss(&g[1])) / (n0 + n1 - 2.0);
        let t = (mean(&g[0]) - mean(&g[1])) / (sp2 * (1.0 / n0 + 1.0 / n1)).sqrt();
        assert!((f[j] - t * t).abs() <= 1e-10 * t * t);
    }
}

#[test]
fn selected_features_respect_correlation_cap() {
    let (mut x, labels) = blobs(35, 50, 4, 2, 2.0);
    for r in x.iter_mut() {
        let dup = 2.0 * r[0] + 1e-3 * r[1];
        r.push(dup);
    }
    let sel = select_features(&x, &labels, 5, 0.95).unwrap();
    assert!(!(sel.indices.contains(&0) && sel.indices.contains(&4)));
    for w in sel.scores.windows(2) {
        assert!(w[0] >= w[1]);
    }
}

#[test]
fn separated_blobs_are_classified() {
    let (x, labels) = blobs(36, 90, 6, 3, 4.0);
    let m = fit_logistic(&x, &labels, &LogisticConfig::default()).unwrap();
    assert!(m.accuracy(&x, &labels).unwrap() >= 0.95);
    let p = m.probabilities(&x[0]).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}
