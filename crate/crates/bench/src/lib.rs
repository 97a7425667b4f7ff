//! Shared fixtures for the criterion benches.

use morphrom::datagen::{gen_advection, AdvectionConfig};
use morphrom::field::{InnerProduct, SnapshotMatrix};
use morphrom::mesh::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Advection snapshots on a `resolution`² grid with their mass inner product.
pub fn advection(resolution: usize) -> (Mesh, SnapshotMatrix, InnerProduct) {
    let cfg = AdvectionConfig {
        resolution,
        ..AdvectionConfig::default()
    };
    let (mesh, s, _) = gen_advection(&cfg).expect("advection fixture");
    let ip = InnerProduct::lumped_mass(&mesh, 1);
    (mesh, s, ip)
}

/// `n` points in the unit square.
pub fn unit_square_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect()
}

/// Smooth 1-output regression problem in `dim` inputs.
pub fn regression(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y = x
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, a)| (a * (i + 1) as f64).sin()).sum())
        .collect();
    (x, y)
}
