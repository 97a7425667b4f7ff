//! P1 finite-element transfer between meshes.
//!
//! A [`CellLocator`] buckets triangles on a uniform grid; a
//! [`TransferOperator`] stores, for every target point, at most three
//! `(source node, weight)` pairs so that transferring a field is a sparse
//! mat-vec.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::mesh::{tri_area, Mesh, MeshId};

/// Points this close to a triangle (relative to the mesh diameter) count as inside it.
pub const SNAP_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CellLocator {
    mesh_id: MeshId,
    origin: [f64; 2],
    cell: [f64; 2],
    nx: usize,
    ny: usize,
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl CellLocator {
    /// Grid with `resolution` cells per axis (default ≈ √n_triangles).
    pub fn build(mesh: &Mesh, resolution: Option<usize>) -> Self {
        let res = resolution
            .unwrap_or_else(|| (mesh.n_triangles() as f64).sqrt().ceil() as usize)
            .max(1);
        let (lo, hi) = mesh.bounding_box();
        let w = (hi[0] - lo[0]).max(f64::MIN_POSITIVE);
        let h = (hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let (nx, ny) = (res, res);
        let cell = [w / nx as f64, h / ny as f64];
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
        let nodes = mesh.nodes();
        for (ti, t) in mesh.triangles().iter().enumerate() {
            let xs = t.map(|i| nodes[i][0]);
            let ys = t.map(|i| nodes[i][1]);
            let fmin = |a: [f64; 3]| a.iter().copied().fold(f64::INFINITY, f64::min);
            let fmax = |a: [f64; 3]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let i0 = Self::clamp_cell((fmin(xs) - lo[0]) / cell[0], nx);
            let i1 = Self::clamp_cell((fmax(xs) - lo[0]) / cell[0], nx);
            let j0 = Self::clamp_cell((fmin(ys) - lo[1]) / cell[1], ny);
            let j1 = Self::clamp_cell((fmax(ys) - lo[1]) / cell[1], ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(ti);
                }
            }
        }
        let mut offsets = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for b in buckets {
            items.extend(b);
            offsets.push(items.len());
        }
        CellLocator {
            mesh_id: mesh.id(),
            origin: lo,
            cell,
            nx,
            ny,
            offsets,
            items,
        }
    }

    fn clamp_cell(x: f64, n: usize) -> usize {
        if x <= 0.0 {
            0
        } else {
            (x.floor() as usize).min(n - 1)
        }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    /// Candidate triangles (ascending index) whose bounding box overlaps the
    /// grid cell of `p`; `None` outside the mesh bounding box.
    pub fn candidates(&self, p: [f64; 2]) -> Option<&[usize]> {
        let fx = (p[0] - self.origin[0]) / self.cell[0];
        let fy = (p[1] - self.origin[1]) / self.cell[1];
        let eps = 1e-9;
        if !(fx >= -eps && fy >= -eps && fx <= self.nx as f64 + eps && fy <= self.ny as f64 + eps) {
            return None;
        }
        let i = Self::clamp_cell(fx, self.nx);
        let j = Self::clamp_cell(fy, self.ny);
        let c = j * self.nx + i;
        Some(&self.items[self.offsets[c]..self.offsets[c + 1]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct TransferOperator {
    source_id: MeshId,
    source_nodes: usize,
    target_id: MeshId,
    rows: Vec<TransferRow>,
    out_of_domain: Vec<bool>,
}

impl TransferOperator {
    pub fn source_id(&self) -> MeshId {
        self.source_id
    }

    pub fn target_id(&self) -> MeshId {
        self.target_id
    }

    pub fn rows(&self) -> &[TransferRow] {
        &self.rows
    }

    pub fn out_of_domain(&self) -> &[bool] {
        &self.out_of_domain
    }

    pub fn n_out_of_domain(&self) -> usize {
        self.out_of_domain.iter().filter(|&&b| b).count()
    }

    pub fn n_targets(&self) -> usize {
        self.rows.len()
    }

    /// Sparse mat-vec on a node-major vector with `components` per node.
    pub fn apply_values(&self, values: &[f64], components: usize) -> Result<Vec<f64>> {
        if values.len() != self.source_nodes * components {
            return Err(Error::DimensionMismatch {
                context: "transfer input",
                expected: self.source_nodes * components,
                got: values.len(),
            });
        }
        let mut out = vec![0.0; self.rows.len() * components];
        for (r, row) in self.rows.iter().enumerate() {
            let dst = &mut out[r * components..(r + 1) * components];
            for &(col, w) in &row.entries {
                let src = &values[col * components..(col + 1) * components];
                for c in 0..components {
                    dst[c] += w * src[c];
                }
            }
        }
        Ok(out)
    }
}

/// Applies `op` to a field living on the operator's source mesh.
pub fn apply(op: &TransferOperator, field: &NodalField) -> Result<NodalField> {
    if field.mesh_id() != op.source_id {
        return Err(Error::MeshMismatch {
            expected: op.source_id.0,
            got: field.mesh_id().0,
        });
    }
    let values = op.apply_values(field.values(), field.components())?;
    NodalField::new(op.target_id, field.components(), values)
}

fn barycentric(nodes: &[[f64; 2]], t: [usize; 3], p: [f64; 2]) -> ([f64; 3], f64) {
    let area = tri_area(nodes, t);
    let [a, b, c] = t.map(|i| nodes[i]);
    let tri = |x: [f64; 2], y: [f64; 2], z: [f64; 2]| {
        0.5 * ((y[0] - x[0]) * (z[1] - x[1]) - (z[0] - x[0]) * (y[1] - x[1]))
    };
    let l = [tri(p, b, c) / area, tri(a, p, c) / area, tri(a, b, p) / area];
    (l, area)
}

/// Distance by which `p` lies outside the triangle (0 when inside).
fn outside_distance(nodes: &[[f64; 2]], t: [usize; 3], lambda: [f64; 3], area: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        if lambda[i] < 0.0 {
            let (p, q) = (nodes[t[(i + 1) % 3]], nodes[t[(i + 2) % 3]]);
            let edge = (q[0] - p[0]).hypot(q[1] - p[1]);
            worst = worst.max(-lambda[i] * 2.0 * area / edge);
        }
    }
    worst
}

fn point_triangle_distance(nodes: &[[f64; 2]], t: [usize; 3], p: [f64; 2]) -> f64 {
    let (l, _) = barycentric(nodes, t, p);
    if l.iter().all(|&x| x >= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|i| segment_projection(p, nodes[t[i]], nodes[t[(i + 1) % 3]]).1)
        .fold(f64::INFINITY, f64::min)
}

/// Parameter in [0, 1] of the closest point on segment ab, and the distance.
fn segment_projection(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (t, (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy))
}

fn clamped_row(t: [usize; 3], lambda: [f64; 3]) -> TransferRow {
    let clamped = lambda.map(|l| l.clamp(0.0, 1.0));
    let s: f64 = clamped.iter().sum();
    let entries = t
        .iter()
        .zip(clamped)
        .filter(|(_, w)| *w != 0.0)
        .map(|(&i, w)| (i, w / s))
        .collect();
    TransferRow { entries }
}

fn locate(source: &Mesh, locator: &CellLocator, p: [f64; 2], snap: f64) -> (TransferRow, bool) {
    let nodes = source.nodes();
    let tris = source.triangles();
    if let Some(cands) = locator.candidates(p) {
        for &ti in cands {
            let (l, area) = barycentric(nodes, tris[ti], p);
            if l.iter().all(|&x| x >= 0.0) {
                let entries = tris[ti]
                    .iter()
                    .zip(l)
                    .filter(|(_, w)| *w != 0.0)
                    .map(|(&i, w)| (i, w))
                    .collect();
                return (TransferRow { entries }, false);
            }
            if outside_distance(nodes, tris[ti], l, area) <= snap {
                return (clamped_row(tris[ti], l), false);
            }
        }
    }
    // nearest triangle, lowest index on ties
    let mut best = (f64::INFINITY, 0usize);
    for (ti, &t) in tris.iter().enumerate() {
        let d = point_triangle_distance(nodes, t, p);
        if d < best.0 {
            best = (d, ti);
        }
    }
    let (l, _) = barycentric(nodes, tris[best.1], p);
    (clamped_row(tris[best.1], l), true)
}

/// Transfer operator from `source` to arbitrary target points.
pub fn transfer_operator(source: &Mesh, targets: &[[f64; 2]], locator: &CellLocator) -> Result<TransferOperator> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("empty target set".into()));
    }
    if locator.mesh_id() != source.id() {
        return Err(Error::MeshMismatch {
            expected: source.id().0,
            got: locator.mesh_id().0,
        });
    }
    let snap = SNAP_RTOL * source.diameter();
    let located: Vec<(TransferRow, bool)> = targets
        .par_iter()
        .map(|&p| locate(source, locator, p, snap))
        .collect();
    let (rows, out_of_domain) = located.into_iter().unzip();
    Ok(TransferOperator {
        source_id: source.id(),
        source_nodes: source.n_nodes(),
        target_id: MeshId::of_points(targets),
        rows,
        out_of_domain,
    })
}

/// Transfer onto the nodes of `target`, with boundary-curve handling.
///
/// Target nodes of every listed group that also exists on `source` are
/// projected onto the source curve of that group and receive 1D linear
/// weights along it, so boundary values (e.g. homogeneous Dirichlet data)
/// move from curve to curve unchanged. All other nodes use
/// [`transfer_operator`].
pub fn transfer_to_mesh(
    source: &Mesh,
    target: &Mesh,
    locator: &CellLocator,
    curve_groups: &[(&str, bool)],
) -> Result<TransferOperator> {
    let mut op = transfer_operator(source, target.nodes(), locator)?;
    op.target_id = target.id();
    let src_nodes = source.nodes();
    for &(group, closed) in curve_groups {
        let (Ok(tgt_members), true) = (target.group(group), source.groups().contains_key(group)) else {
            continue;
        };
        let curve = source.ordered_group(group, closed)?;
        let n = curve.len();
        let segs = if closed { n } else { n - 1 };
        for &node in tgt_members {
            let p = target.nodes()[node];
            let mut best = (f64::INFINITY, 0usize, 0.0);
            for s in 0..segs {
                let (a, b) = (curve[s], curve[(s + 1) % n]);
                let (t, d) = segment_projection(p, src_nodes[a], src_nodes[b]);
                if d < best.0 {
                    best = (d, s, t);
                }
            }
            let (_, s, t) = best;
            let (a, b) = (curve[s], curve[(s + 1) % n]);
            let entries = [(a, 1.0 - t), (b, t)]
                .into_iter()
                .filter(|&(_, w)| w != 0.0)
                .collect();
            op.rows[node] = TransferRow { entries };
            op.out_of_domain[node] = false;
        }
    }
    Ok(op)
}
