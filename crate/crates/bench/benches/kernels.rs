use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use morphrom::ecm::{ecm_nnomp, EcmOptions, IntegrandSnapshots};
use morphrom::gp::{gp_fit, GpConfig};
use morphrom::interp::{transfer_operator, CellLocator};
use morphrom::mesh::rectangle_mesh;
use morphrom::pod::snapshot_pod;
use morphrom_bench::{advection, regression, unit_square_points};

fn pod(c: &mut Criterion) {
    let mut g = c.benchmark_group("snapshot_pod");
    for res in [32, 64] {
        let (_, s, ip) = advection(res);
        g.bench_with_input(BenchmarkId::from_parameter(res), &res, |b, _| {
            b.iter(|| snapshot_pod(black_box(&s), &ip, 1e-4).unwrap())
        });
    }
    g.finish();
}

fn ecm(c: &mut Criterion) {
    let (mesh, s, _) = advection(32);
    let rows: Vec<Vec<f64>> = s.rows().map(|r| r.to_vec()).collect();
    let snap = IntegrandSnapshots::from_rows(&rows, mesh.lumped_mass()).unwrap();
    c.bench_function("ecm_nnomp/advection32", |b| {
        b.iter(|| ecm_nnomp(black_box(&snap), &EcmOptions::default()).unwrap())
    });
}

fn transfer(c: &mut Criterion) {
    let mut g = c.benchmark_group("transfer_operator");
    let pts = unit_square_points(10_000, 1);
    for n in [32, 128] {
        let src = rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, n);
        g.bench_with_input(BenchmarkId::new("locate+weights", n), &n, |b, _| {
            b.iter(|| {
                let loc = CellLocator::build(&src, None);
                transfer_operator(&src, black_box(&pts), &loc).unwrap()
            })
        });
    }
    g.finish();
}

fn gp(c: &mut Criterion) {
    let mut g = c.benchmark_group("gp_fit");
    g.sample_size(10);
    for (n, isotropic) in [(40, true), (40, false), (120, false)] {
        let (x, y) = regression(n, 4, 2);
        let cfg = GpConfig {
            isotropic,
            n_restarts: 2,
            ..GpConfig::default()
        };
        let name = if isotropic { "iso" } else { "ard" };
        g.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| b.iter(|| gp_fit(black_box(&x), &y, &cfg).unwrap()));
    }
    g.finish();
    let (x, y) = regression(120, 4, 3);
    let model = gp_fit(&x, &y, &GpConfig::default()).unwrap();
    let (q, _) = regression(1000, 4, 4);
    c.bench_function("gp_predict/1000", |b| b.iter(|| model.predict(black_box(&q)).unwrap()));
}

criterion_group!(benches, pod, ecm, transfer, gp);
criterion_main!(benches);
