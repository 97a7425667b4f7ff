//! Two-dimensional triangular meshes.
//!
//! A [`Mesh`] owns node coordinates, counter-clockwise triangles and named
//! node groups (`"obstacle"`, `"outer"`, optionally `"wake"`). Meshes are
//! immutable once built; [`Mesh::new`] normalizes orientation and rejects
//! anything [`validate_mesh`] would complain about.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative area below which a triangle counts as degenerate.
pub const DEGENERATE_AREA_RTOL: f64 = 1e-14;

/// Opaque content fingerprint of a mesh (or of a bare point cloud).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshId(pub u64);

impl MeshId {
    pub fn of_points(points: &[[f64; 2]]) -> Self {
        let mut h = DefaultHasher::new();
        points.len().hash(&mut h);
        for p in points {
            p[0].to_bits().hash(&mut h);
            p[1].to_bits().hash(&mut h);
        }
        MeshId(h.finish())
    }
}

impl fmt::Display for MeshId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    groups: BTreeMap<String, Vec<usize>>,
    id: MeshId,
}

fn compute_id(nodes: &[[f64; 2]], triangles: &[[usize; 3]]) -> MeshId {
    let mut h = DefaultHasher::new();
    MeshId::of_points(nodes).0.hash(&mut h);
    triangles.hash(&mut h);
    MeshId(h.finish())
}

impl Mesh {
    /// Builds a mesh, flipping clockwise triangles and sorting group lists.
    ///
    /// Fails if any remaining invariant is violated (index range,
    /// degeneracy, group references).
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        groups: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut flipped = 0usize;
        for t in triangles.iter_mut() {
            if t.iter().all(|&i| i < n) && tri_area(&nodes, *t) < 0.0 {
                t.swap(1, 2);
                flipped += 1;
            }
        }
        if flipped > 0 {
            log::warn!("flipped {flipped} clockwise triangle(s) to counter-clockwise");
        }
        let groups = groups
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_unstable();
                v.dedup();
                (k, v)
            })
            .collect();
        let mesh = Self::from_parts_unchecked(nodes, triangles, groups);
        let report = validate_mesh(&mesh);
        if !report.is_valid() {
            return Err(Error::InvalidMesh(report.to_string()));
        }
        Ok(mesh)
    }

    /// Assembles a mesh without any check or normalization.
    pub fn from_parts_unchecked(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        groups: BTreeMap<String, Vec<usize>>,
    ) -> Self {
        let id = compute_id(&nodes, &triangles);
        Mesh {
            nodes,
            triangles,
            groups,
            id,
        }
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Result<&[usize]> {
        self.groups
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingGroup(name.to_string()))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    /// Same connectivity and groups, new node positions.
    pub fn with_nodes(&self, nodes: Vec<[f64; 2]>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch {
                context: "node relocation",
                expected: self.nodes.len(),
                got: nodes.len(),
            });
        }
        Ok(Self::from_parts_unchecked(
            nodes,
            self.triangles.clone(),
            self.groups.clone(),
        ))
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        bounding_box(&self.nodes)
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    pub fn signed_area(&self, tri: usize) -> Result<f64> {
        let t = self
            .triangles
            .get(tri)
            .ok_or_else(|| Error::InvalidArgument(format!("triangle index {tri} out of range")))?;
        Ok(tri_area(&self.nodes, *t))
    }

    pub fn total_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| tri_area(&self.nodes, *t))
            .sum()
    }

    /// Lumped (row-sum) P1 mass: a third of every incident triangle area.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.nodes.len()];
        for t in &self.triangles {
            let third = tri_area(&self.nodes, *t) / 3.0;
            for &i in t {
                mass[i] += third;
            }
        }
        mass
    }

    /// Orders the nodes of a group along the curve they form.
    ///
    /// Closed curves are traced over boundary edges, oriented with positive
    /// shoelace area and rotated to start at the minimum-x1 node (ties: min
    /// x2, then lowest index). Open curves follow mesh edges from the end
    /// with the smaller x1.
    pub fn ordered_group(&self, name: &str, closed: bool) -> Result<Vec<usize>> {
        let members = self.group(name)?;
        if members.len() < 2 {
            return Err(Error::OpenCurve(name.to_string()));
        }
        let in_group: HashMap<usize, ()> = members.iter().map(|&i| (i, ())).collect();
        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let edges: Vec<(usize, usize)> = edge_count
            .iter()
            .filter(|(&(a, b), &c)| {
                in_group.contains_key(&a) && in_group.contains_key(&b) && (!closed || c == 1)
            })
            .map(|(&e, _)| e)
            .collect();
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in &edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        let bad_degree = adj.values().any(|v| v.len() > 2);
        let key = |i: usize| (self.nodes[i][0], self.nodes[i][1], i);
        let less = |a: usize, b: usize| {
            let (ka, kb) = (key(a), key(b));
            ka.partial_cmp(&kb) == Some(std::cmp::Ordering::Less)
        };

        if closed {
            if bad_degree
                || adj.len() != members.len()
                || adj.values().any(|v| v.len() != 2)
            {
                return Err(Error::OpenCurve(name.to_string()));
            }
            let start = members[0];
            let mut order = vec![start];
            let mut prev = start;
            let mut cur = adj[&start][0];
            while cur != start {
                order.push(cur);
                let nb = &adj[&cur];
                let next = if nb[0] == prev { nb[1] } else { nb[0] };
                prev = cur;
                cur = next;
                if order.len() > members.len() {
                    return Err(Error::OpenCurve(name.to_string()));
                }
            }
            if order.len() != members.len() {
                return Err(Error::OpenCurve(name.to_string()));
            }
            let pts: Vec<[f64; 2]> = order.iter().map(|&i| self.nodes[i]).collect();
            if polygon_area(&pts) < 0.0 {
                order.reverse();
            }
            let anchor_pos = (0..order.len())
                .reduce(|best, k| if less(order[k], order[best]) { k } else { best })
                .unwrap_or(0);
            order.rotate_left(anchor_pos);
            Ok(order)
        } else {
            let ends: Vec<usize> = adj
                .iter()
                .filter(|(_, v)| v.len() == 1)
                .map(|(&k, _)| k)
                .collect();
            if bad_degree || ends.len() != 2 || adj.len() != members.len() {
                return Err(Error::InvalidArgument(format!(
                    "group `{name}` does not form a simple open path"
                )));
            }
            let start = if less(ends[1], ends[0]) { ends[1] } else { ends[0] };
            let mut order = vec![start];
            let mut prev = usize::MAX;
            let mut cur = start;
            loop {
                let next = adj[&cur].iter().copied().find(|&x| x != prev);
                match next {
                    Some(nx) if order.len() < members.len() => {
                        order.push(nx);
                        prev = cur;
                        cur = nx;
                    }
                    _ => break,
                }
            }
            if order.len() != members.len() {
                return Err(Error::InvalidArgument(format!(
                    "group `{name}` is not connected"
                )));
            }
            Ok(order)
        }
    }
}

pub(crate) fn tri_area(nodes: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Shoelace area of a closed polygon (positive when counter-clockwise).
pub fn polygon_area(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

pub fn bounding_box(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// One broken mesh invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    IndexOutOfRange { triangle: usize, index: usize },
    Degenerate { triangle: usize, area: f64 },
    Orientation { triangle: usize },
    GroupIndexOutOfRange { group: String, index: usize },
    GroupNotIncreasing { group: String, position: usize },
    NonFiniteNode { node: usize },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::IndexOutOfRange { .. } => "index out of range",
            Violation::Degenerate { .. } => "degenerate",
            Violation::Orientation { .. } => "orientation",
            Violation::GroupIndexOutOfRange { .. } => "group index out of range",
            Violation::GroupNotIncreasing { .. } => "group not increasing",
            Violation::NonFiniteNode { .. } => "non-finite node",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { triangle, index } => {
                write!(f, "index out of range: triangle {triangle} references node {index}")
            }
            Violation::Degenerate { triangle, area } => {
                write!(f, "degenerate: triangle {triangle} has area {area:e}")
            }
            Violation::Orientation { triangle } => {
                write!(f, "orientation: triangle {triangle} is clockwise")
            }
            Violation::GroupIndexOutOfRange { group, index } => {
                write!(f, "group index out of range: `{group}` references node {index}")
            }
            Violation::GroupNotIncreasing { group, position } => {
                write!(f, "group not increasing: `{group}` at position {position}")
            }
            Violation::NonFiniteNode { node } => write!(f, "non-finite node: {node}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: &str) -> bool {
        self.violations.iter().any(|v| v.kind() == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let shown: Vec<String> = self.violations.iter().take(8).map(|v| v.to_string()).collect();
        write!(f, "{}", shown.join("; "))?;
        if self.violations.len() > 8 {
            write!(f, "; ... ({} total)", self.violations.len())?;
        }
        Ok(())
    }
}

/// Lists every broken invariant of `mesh`; an empty report means valid.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let nodes = mesh.nodes();
    let n = nodes.len();
    let mut violations = Vec::new();
    for (i, p) in nodes.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            violations.push(Violation::NonFiniteNode { node: i });
        }
    }
    let (lo, hi) = bounding_box(nodes);
    let box_area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).abs();
    let min_area = DEGENERATE_AREA_RTOL * box_area;
    for (ti, t) in mesh.triangles().iter().enumerate() {
        let bad: Vec<usize> = t.iter().copied().filter(|&i| i >= n).collect();
        if !bad.is_empty() {
            for index in bad {
                violations.push(Violation::IndexOutOfRange { triangle: ti, index });
            }
            continue;
        }
        let area = tri_area(nodes, *t);
        if area.abs() <= min_area || !area.is_finite() {
            violations.push(Violation::Degenerate { triangle: ti, area });
        } else if area < 0.0 {
            violations.push(Violation::Orientation { triangle: ti });
        }
    }
    for (name, members) in mesh.groups() {
        for (pos, &i) in members.iter().enumerate() {
            if i >= n {
                violations.push(Violation::GroupIndexOutOfRange {
                    group: name.clone(),
                    index: i,
                });
            }
            if pos > 0 && members[pos - 1] >= i {
                violations.push(Violation::GroupNotIncreasing {
                    group: name.clone(),
                    position: pos,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Structured triangulation of `[x0, x1] x [y0, y1]` with `nx` by `ny` cells.
///
/// Groups: `"outer"` holds the boundary nodes.
pub fn rectangle_mesh(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Mesh {
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            let y = y0 + (y1 - y0) * j as f64 / ny as f64;
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let outer: Vec<usize> = (0..=ny)
        .flat_map(|j| (0..=nx).map(move |i| (i, j)))
        .filter(|&(i, j)| i == 0 || j == 0 || i == nx || j == ny)
        .map(|(i, j)| id(i, j))
        .collect();
    let mut groups = BTreeMap::new();
    groups.insert("outer".to_string(), outer);
    Mesh::from_parts_unchecked(nodes, triangles, groups)
}
