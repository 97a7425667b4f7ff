//! Potential flow past rotated ellipses in a square box, on per-sample O-meshes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FieldSpec, Sample, Schema};
use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::mesh::Mesh;

type C64 = Complex<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowFamilyConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub semi_major: (f64, f64),
    pub semi_minor: (f64, f64),
    /// Degrees.
    pub rotation: (f64, f64),
    pub u_inf: (f64, f64),
    pub half_width: f64,
    /// Angular node count is `4 m` with `m` drawn from this range.
    pub angular_quarter: (usize, usize),
    pub radial: (usize, usize),
    /// Exponent of the radial node distribution (1 = uniform).
    pub grading: f64,
}

impl Default for FlowFamilyConfig {
    fn default() -> Self {
        FlowFamilyConfig {
            n_samples: 50,
            seed: 0,
            semi_major: (0.3, 0.6),
            semi_minor: (0.15, 0.4),
            rotation: (-20.0, 20.0),
            u_inf: (0.8, 1.2),
            half_width: 2.0,
            angular_quarter: (28, 34),
            radial: (26, 32),
            grading: 1.6,
        }
    }
}

/// Geometry and inflow of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub a: f64,
    pub b: f64,
    /// Radians, counter-clockwise.
    pub rotation: f64,
    pub u_inf: f64,
}

impl FlowFamilyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ordered(self.semi_major) || !ordered(self.semi_minor) || !ordered(self.rotation) || !ordered(self.u_inf) {
            return bad("flow family ranges must be finite and ordered");
        }
        if !(self.semi_minor.0 > 0.0) || !(self.u_inf.0 > 0.0) {
            return bad("semi-axes and free-stream speed must be positive");
        }
        if self.semi_major.1.max(self.semi_minor.1) >= 0.5 * self.half_width {
            return bad("obstacle must stay well inside the box");
        }
        if self.angular_quarter.0 < 8 || self.radial.0 < 16 || self.angular_quarter.0 > self.angular_quarter.1 || self.radial.0 > self.radial.1 {
            return bad("mesh resolution below 16 radial x 32 angular, or unordered");
        }
        if !(self.grading > 0.0) {
            return bad("grading exponent must be positive");
        }
        Ok(())
    }
}

/// Conformal description: circle of radius `R` in ζ, `z' = ζ + m²/ζ`,
/// world `z = e^{iβ} z'`, free stream `U` along world x.
#[derive(Debug, Clone, Copy)]
pub struct EllipseFlow {
    params: FlowParams,
    radius: f64,
    m2: f64,
}

impl EllipseFlow {
    pub fn new(params: FlowParams) -> Self {
        EllipseFlow {
            params,
            radius: 0.5 * (params.a + params.b),
            m2: 0.25 * (params.a * params.a - params.b * params.b),
        }
    }

    fn rot(&self) -> C64 {
        C64::from_polar(1.0, self.params.rotation)
    }

    /// Exterior preimage of a body-frame point.
    fn zeta(&self, zb: C64) -> C64 {
        let disc = (zb * zb - 4.0 * self.m2).sqrt();
        let a = (zb + disc) * 0.5;
        let b = (zb - disc) * 0.5;
        if a.norm() >= b.norm() {
            a
        } else {
            b
        }
    }

    /// Flow angle in the body frame.
    fn alpha(&self) -> f64 {
        -self.params.rotation
    }

    /// Complex potential `W = U (ζ e^{-iα} + R² e^{iα} / ζ)`.
    pub fn potential(&self, x: [f64; 2]) -> C64 {
        let zb = C64::new(x[0], x[1]) / self.rot();
        let z = self.zeta(zb);
        let ea = C64::from_polar(1.0, self.alpha());
        (z / ea + ea * self.radius * self.radius / z) * self.params.u_inf
    }

    fn velocity_at_zeta(&self, z: C64) -> [f64; 2] {
        let ea = C64::from_polar(1.0, self.alpha());
        let dw = (C64::new(1.0, 0.0) / ea - ea * self.radius * self.radius / (z * z)) * self.params.u_inf;
        let dz = C64::new(1.0, 0.0) - self.m2 / (z * z);
        // u - i v in the world frame
        let w = dw / dz / self.rot();
        [w.re, -w.im]
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let zb = C64::new(x[0], x[1]) / self.rot();
        self.velocity_at_zeta(self.zeta(zb))
    }

    /// World-frame point on the body at circle angle φ.
    pub fn surface_point(&self, phi: f64) -> [f64; 2] {
        let z = C64::from_polar(self.radius, phi);
        let w = (z + self.m2 / z) * self.rot();
        [w.re, w.im]
    }

    /// Outward unit normal of the ellipse at world point `x` on the body.
    pub fn normal(&self, x: [f64; 2]) -> [f64; 2] {
        let zb = C64::new(x[0], x[1]) / self.rot();
        let (a, b) = (self.params.a, self.params.b);
        let nb = C64::new(zb.re / (a * a), zb.im / (b * b));
        let n = nb * self.rot();
        let l = n.norm();
        [n.re / l, n.im / l]
    }

    pub fn pressure(&self, v: [f64; 2]) -> f64 {
        0.5 * (self.params.u_inf.powi(2) - v[0] * v[0] - v[1] * v[1])
    }

    /// Max surface speed and ∫ p ds over the upper surface (outward normal
    /// with positive world y), by dense sampling of the circle angle.
    pub fn surface_scalars(&self) -> (f64, f64) {
        let n = 20_000;
        let mut vmax: f64 = 0.0;
        let mut integral = 0.0;
        let pts: Vec<[f64; 2]> = (0..=n).map(|k| self.surface_point(2.0 * PI * k as f64 / n as f64)).collect();
        for k in 0..n {
            let phi = 2.0 * PI * (k as f64 + 0.5) / n as f64;
            let z = C64::from_polar(self.radius, phi);
            let v = self.velocity_at_zeta(z);
            vmax = vmax.max((v[0] * v[0] + v[1] * v[1]).sqrt());
            let mid = self.surface_point(phi);
            if self.normal(mid)[1] > 0.0 {
                let ds = ((pts[k + 1][0] - pts[k][0]).powi(2) + (pts[k + 1][1] - pts[k][1]).powi(2)).sqrt();
                integral += self.pressure(v) * ds;
            }
        }
        (vmax, integral)
    }
}

fn draw(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.1 > r.0 {
        rng.random_range(r.0..r.1)
    } else {
        r.0
    }
}

fn draw_usize(rng: &mut ChaCha8Rng, r: (usize, usize)) -> usize {
    rng.random_range(r.0..=r.1)
}

/// Point on the square boundary at arclength `s` from the corner
/// `(-h, -h)`, counter-clockwise.
fn box_point(h: f64, s: f64) -> [f64; 2] {
    let side = 2.0 * h;
    let s = s.rem_euclid(4.0 * side);
    match (s / side) as usize {
        0 => [-h + s, -h],
        1 => [h, -h + (s - side)],
        2 => [h - (s - 2.0 * side), h],
        _ => [-h, h - (s - 3.0 * side)],
    }
}

/// Structured O-mesh between the ellipse and the box. Rays from the origin
/// through equally spaced box points carry the nodes, so rings never cross.
pub fn o_mesh(params: &FlowParams, half_width: f64, n_theta: usize, n_radial: usize, grading: f64) -> Result<Mesh> {
    if !n_theta.is_multiple_of(4) || n_theta < 8 || n_radial < 1 {
        return Err(Error::InvalidArgument("O-mesh needs n_theta divisible by 4 and n_radial >= 1".into()));
    }
    let perim = 8.0 * half_width;
    let rot = params.rotation;
    let (cr, sr) = (rot.cos(), rot.sin());
    let mut inner = Vec::with_capacity(n_theta);
    let mut outer = Vec::with_capacity(n_theta);
    for j in 0..n_theta {
        let bp = box_point(half_width, perim * j as f64 / n_theta as f64);
        let th = bp[1].atan2(bp[0]);
        // polar radius of the rotated ellipse along direction th
        let phi = th - rot;
        let r = params.a * params.b / ((params.b * phi.cos()).powi(2) + (params.a * phi.sin()).powi(2)).sqrt();
        let (c, s) = (phi.cos(), phi.sin());
        let body = [r * c, r * s];
        inner.push([cr * body[0] - sr * body[1], sr * body[0] + cr * body[1]]);
        outer.push(bp);
    }
    let mut nodes = Vec::with_capacity(n_theta * (n_radial + 1));
    for i in 0..=n_radial {
        let t = (i as f64 / n_radial as f64).powf(grading);
        for j in 0..n_theta {
            let p = if i == n_radial {
                outer[j]
            } else if i == 0 {
                inner[j]
            } else {
                [
                    (1.0 - t) * inner[j][0] + t * outer[j][0],
                    (1.0 - t) * inner[j][1] + t * outer[j][1],
                ]
            };
            nodes.push(p);
        }
    }
    let id = |i: usize, j: usize| i * n_theta + (j % n_theta);
    let mut triangles = Vec::with_capacity(2 * n_theta * n_radial);
    for i in 0..n_radial {
        for j in 0..n_theta {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([p00, p10, p11]);
            triangles.push([p00, p11, p01]);
        }
    }
    let mut groups = BTreeMap::new();
    groups.insert("obstacle".to_string(), (0..n_theta).collect());
    groups.insert("outer".to_string(), (n_radial * n_theta..(n_radial + 1) * n_theta).collect());
    Mesh::new(nodes, triangles, groups)
}

pub fn flow_schema() -> Schema {
    Schema {
        scalar_inputs: vec!["rotation".into(), "u_inf".into()],
        scalar_outputs: vec!["max_surface_speed".into(), "upper_pressure_integral".into()],
        input_fields: vec![],
        output_fields: vec![
            FieldSpec::new("pressure", 1),
            FieldSpec::new("stream", 1),
            FieldSpec::new("velocity", 2),
        ],
    }
}

/// One sample: mesh, velocity/pressure/stream-function fields and scalars.
/// The stream function is set to exactly zero on the obstacle (the body is a streamline).
pub fn flow_sample(params: &FlowParams, half_width: f64, n_theta: usize, n_radial: usize, grading: f64) -> Result<Sample> {
    let mesh = o_mesh(params, half_width, n_theta, n_radial, grading)?;
    let flow = EllipseFlow::new(*params);
    let obstacle: Vec<bool> = {
        let mut v = vec![false; mesh.n_nodes()];
        for &i in mesh.group("obstacle")? {
            v[i] = true;
        }
        v
    };
    let n = mesh.n_nodes();
    let mut vel = Vec::with_capacity(2 * n);
    let mut pres = Vec::with_capacity(n);
    let mut stream = Vec::with_capacity(n);
    for (k, &x) in mesh.nodes().iter().enumerate() {
        let v = flow.velocity(x);
        vel.extend_from_slice(&v);
        pres.push(flow.pressure(v));
        stream.push(if obstacle[k] { 0.0 } else { flow.potential(x).im });
    }
    let (vmax, upper) = flow.surface_scalars();
    let mut s = Sample::new(mesh.clone());
    s.scalar_inputs.insert("u_inf".into(), params.u_inf);
    s.scalar_inputs.insert("rotation".into(), params.rotation.to_degrees());
    s.scalar_outputs.insert("max_surface_speed".into(), vmax);
    s.scalar_outputs.insert("upper_pressure_integral".into(), upper);
    s.output_fields.insert("velocity".into(), NodalField::on_mesh(&mesh, 2, vel)?);
    s.output_fields.insert("pressure".into(), NodalField::on_mesh(&mesh, 1, pres)?);
    s.output_fields.insert("stream".into(), NodalField::on_mesh(&mesh, 1, stream)?);
    Ok(s)
}

/// Per-sample parameters and mesh resolution, drawn from stream `k` of the seed.
pub fn sample_params(config: &FlowFamilyConfig, k: usize) -> (FlowParams, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(k as u64);
    let a = draw(&mut rng, config.semi_major);
    let b = draw(&mut rng, config.semi_minor).min(a);
    let rotation = draw(&mut rng, config.rotation).to_radians();
    let u_inf = draw(&mut rng, config.u_inf);
    let nt = 4 * draw_usize(&mut rng, config.angular_quarter);
    let nr = draw_usize(&mut rng, config.radial);
    (FlowParams { a, b, rotation, u_inf }, nt, nr)
}

pub fn gen_flow_family(config: &FlowFamilyConfig) -> Result<Dataset> {
    config.validate()?;
    let samples = (0..config.n_samples)
        .into_par_iter()
        .map(|k| {
            let (p, nt, nr) = sample_params(config, k);
            flow_sample(&p, config.half_width, nt, nr, config.grading)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(flow_schema(), samples)
}
