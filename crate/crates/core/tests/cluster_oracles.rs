use morphrom::cluster::{
    assign_by_medoid, classical_mds, dissimilarity_matrix, pam_kmedoids, sine_dissimilarity, DissimilarityMatrix, Metric,
};
use morphrom::datagen::{gen_advection, AdvectionConfig};
use morphrom::field::{InnerProduct, SnapshotMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn euclidean(points: &[Vec<f64>]) -> DissimilarityMatrix {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        }
    }
    DissimilarityMatrix::from_full(n, d, Metric::L2).unwrap()
}

fn cost_of(d: &DissimilarityMatrix, medoids: &[usize]) -> f64 {
    (0..d.n())
        .map(|i| medoids.iter().map(|&m| d.get(i, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    (k - 1..n)
        .flat_map(|last| {
            combinations(last, k - 1).into_iter().map(move |mut c| {
                c.push(last);
                c
            })
        })
        .collect()
}

#[test]
fn pam_is_swap_stable_and_bounded_by_exhaustive_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut optimal_hits = 0;
    let trials = 40;
    for _ in 0..trials {
        let n = rng.random_range(5..=10);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let d = euclidean(&pts);
        for k in 1..=3 {
            let cl = pam_kmedoids(&d, k, 0, 0).unwrap();
            let best = combinations(n, k).iter().map(|c| cost_of(&d, c)).fold(f64::INFINITY, f64::min);
            assert!(cl.cost >= best - 1e-12);
            assert!((cl.cost - cost_of(&d, &cl.medoids)).abs() <= 1e-12);
            // no single swap lowers the cost
            for a in 0..k {
                for h in (0..n).filter(|h| !cl.medoids.contains(h)) {
                    let mut m = cl.medoids.clone();
                    m[a] = h;
                    assert!(cost_of(&d, &m) >= cl.cost - 1e-12);
                }
            }
            // every point sits with its nearest medoid
            for i in 0..n {
                let own = d.get(i, cl.medoids[cl.labels[i]]);
                assert!(cl.medoids.iter().all(|&m| own <= d.get(i, m)));
            }
            if (cl.cost - best).abs() <= 1e-12 {
                optimal_hits += 1;
            }
        }
    }
    // PAM is a local search; on tiny problems it almost always finds the optimum
    assert!(optimal_hits as f64 >= 0.9 * (3 * trials) as f64, "{optimal_hits}");
}

#[test]
fn pam_recovers_planted_clusters_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let pts: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let c = centers[i % 3];
            vec![c[0] + rng.random_range(-1.0..1.0), c[1] + rng.random_range(-1.0..1.0)]
        })
        .collect();
    let d = euclidean(&pts);
    let cl = pam_kmedoids(&d, 3, 0, 0).unwrap();
    for i in 0..30 {
        for j in 0..30 {
            assert_eq!(cl.labels[i] == cl.labels[j], i % 3 == j % 3);
        }
    }
    for w in cl.cost_trace.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn restarts_never_increase_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let d = euclidean(&pts);
    let base = pam_kmedoids(&d, 4, 7, 0).unwrap();
    let more = pam_kmedoids(&d, 4, 7, 8).unwrap();
    assert!(more.cost <= base.cost);
    assert_eq!(pam_kmedoids(&d, 4, 7, 8).unwrap(), more);
}

#[test]
fn mds_recovers_planar_configuration() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let pts: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)]).collect();
    let d = euclidean(&pts);
    let emb = classical_mds(&d, 2).unwrap();
    assert!(!emb.degenerate);
    assert!(emb.eigenvalues[0] >= emb.eigenvalues[1]);
    let back = euclidean(&emb.coords);
    for i in 0..25 {
        for j in 0..25 {
            assert!((back.get(i, j) - d.get(i, j)).abs() <= 1e-10);
        }
    }
    // collinear points have a degenerate second axis
    let line: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
    let emb = classical_mds(&euclidean(&line), 2).unwrap();
    assert!(emb.degenerate);
    assert!(emb.coords.iter().all(|c| c[1] == 0.0));
}

#[test]
fn sine_is_invariant_under_scaling_of_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let weights: Vec<f64> = (0..64).map(|_| rng.random_range(0.1..2.0)).collect();
    let ip = InnerProduct::Diagonal { weights };
    for _ in 0..1000 {
        let u: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mag = 10f64.powf(rng.random_range(-6.0..6.0));
        let alpha = if rng.random_bool(0.5) { mag } else { -mag };
        let v: Vec<f64> = u.iter().map(|x| alpha * x).collect();
        assert!(sine_dissimilarity(&u, &v, &ip).unwrap() <= 1e-12);
    }
}

#[test]
fn advection_assignment_is_scale_invariant() {
    let (mesh, s, _) = gen_advection(&AdvectionConfig::default()).unwrap();
    let ip = InnerProduct::lumped_mass(&mesh, 1);
    let d = dissimilarity_matrix(&s, Metric::Sine, &ip).unwrap();
    let cl = pam_kmedoids(&d, 3, 0, 0).unwrap();
    let medoids: Vec<&[f64]> = cl.medoids.iter().map(|&m| s.row(m)).collect();
    for (i, row) in s.rows().enumerate() {
        let label = assign_by_medoid(row, &medoids, Metric::Sine, &ip).unwrap();
        assert_eq!(label, cl.labels[i]);
        for alpha in [1e-3, 0.5, 7.0, -2.0, 1e4] {
            let scaled: Vec<f64> = row.iter().map(|x| alpha * x).collect();
            assert_eq!(assign_by_medoid(&scaled, &medoids, Metric::Sine, &ip).unwrap(), label);
        }
    }
}

#[test]
fn sine_clusters_ignore_amplitude_on_advection() {
    // under sine, each snapshot's twin with the other amplitude is at distance zero
    let (mesh, s, prov) = gen_advection(&AdvectionConfig::default()).unwrap();
    let ip = InnerProduct::lumped_mass(&mesh, 1);
    let d = dissimilarity_matrix(&s, Metric::Sine, &ip).unwrap();
    for i in 0..s.n_snapshots() {
        for j in 0..s.n_snapshots() {
            if prov[i].position == prov[j].position && prov[i].time == prov[j].time {
                assert!(d.get(i, j) <= 1e-12);
            }
        }
    }
    let sine = pam_kmedoids(&d, 4, 0, 0).unwrap();
    for i in 0..s.n_snapshots() {
        for j in 0..s.n_snapshots() {
            if prov[i].position == prov[j].position && prov[i].time == prov[j].time {
                assert_eq!(sine.labels[i], sine.labels[j]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sine_is_symmetric_and_bounded(
        u in prop::collection::vec(-1.0f64..1.0, 8),
        v in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let ip = InnerProduct::Euclidean;
        let a = sine_dissimilarity(&u, &v, &ip).unwrap();
        let b = sine_dissimilarity(&v, &u, &ip).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-14);
        let (uu, vv, uv) = (ip.dot(&u, &u), ip.dot(&v, &v), ip.dot(&u, &v));
        let naive = (1.0 - uv * uv / (uu * vv)).max(0.0).sqrt();
        prop_assert!((a - naive).abs() <= 1e-6);
    }

    #[test]
    fn dissimilarity_matrix_is_symmetric_with_zero_diagonal(seed in 0u64..500, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let s = SnapshotMatrix::from_rows(&rows).unwrap();
        for metric in [Metric::L2, Metric::Sine] {
            let d = dissimilarity_matrix(&s, metric, &InnerProduct::Euclidean).unwrap();
            for i in 0..n {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                }
            }
        }
    }
}
