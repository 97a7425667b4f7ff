//! Deterministic RBF morphing onto a common reference shape.
//!
//! Control nodes on the boundary curves of a sample are sent to
//! arclength-corresponding points on the reference curves; a radial basis
//! interpolant with an affine term carries the displacement to every other
//! node.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{polygon_area, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RbfKernel {
    /// φ(r) = r² log r
    #[default]
    ThinPlateSpline,
    /// φ(r) = exp(-(r/ℓ)²); `length: None` picks the mean nearest-neighbour
    /// spacing of the control points.
    Gaussian { length: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphSpec {
    pub control_nodes: Vec<usize>,
    pub targets: Vec<[f64; 2]>,
    pub kernel: RbfKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MorphOptions {
    /// Accept inverted triangles instead of failing.
    pub allow_inversion: bool,
}

#[derive(Debug, Clone)]
pub struct MorphResult {
    pub mesh: Mesh,
    pub displacement: Vec<[f64; 2]>,
    /// Minimum over triangles of area after / area before.
    pub quality: f64,
    pub inverted: Vec<usize>,
}

/// Fitted displacement interpolant: Σ wᵢ φ(|x − cᵢ|) + a₀ + a₁x₁ + a₂x₂ per axis,
/// evaluated in normalized coordinates.
#[derive(Debug, Clone)]
pub struct RbfInterpolant {
    centers: Vec<[f64; 2]>,
    weights: Vec<[f64; 2]>,
    affine: [[f64; 2]; 3],
    origin: [f64; 2],
    scale: f64,
    kernel: ResolvedKernel,
}

#[derive(Debug, Clone, Copy)]
enum ResolvedKernel {
    Tps,
    Gaussian(f64),
}

impl ResolvedKernel {
    #[inline]
    fn eval_r2(self, r2: f64) -> f64 {
        match self {
            ResolvedKernel::Tps => {
                if r2 <= 0.0 {
                    0.0
                } else {
                    0.5 * r2 * r2.ln()
                }
            }
            ResolvedKernel::Gaussian(l) => (-r2 / (l * l)).exp(),
        }
    }
}

impl RbfInterpolant {
    pub fn fit(points: &[[f64; 2]], displacements: &[[f64; 2]], kernel: RbfKernel) -> Result<Self> {
        let n = points.len();
        if n != displacements.len() {
            return Err(Error::DimensionMismatch {
                context: "morph targets",
                expected: n,
                got: displacements.len(),
            });
        }
        if n < 3 {
            return Err(Error::InvalidArgument(format!(
                "need at least 3 control points, got {n}"
            )));
        }
        let (lo, hi) = crate::mesh::bounding_box(points);
        let origin = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let scale = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Singular("control points coincide".into()));
        }
        let centers: Vec<[f64; 2]> = points
            .iter()
            .map(|p| [(p[0] - origin[0]) / scale, (p[1] - origin[1]) / scale])
            .collect();

        let mut sorted: Vec<[u64; 2]> = centers.iter().map(|c| [c[0].to_bits(), c[1].to_bits()]).collect();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Singular("duplicate control point positions".into()));
        }
        check_not_collinear(&centers)?;

        let kernel = match kernel {
            RbfKernel::ThinPlateSpline => ResolvedKernel::Tps,
            RbfKernel::Gaussian { length: Some(l) } => {
                if !(l > 0.0) {
                    return Err(Error::InvalidArgument("gaussian length must be positive".into()));
                }
                ResolvedKernel::Gaussian(l / scale)
            }
            RbfKernel::Gaussian { length: None } => {
                ResolvedKernel::Gaussian(mean_nearest_spacing(&centers))
            }
        };

        let size = n + 3;
        let mut a = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                let dx = centers[i][0] - centers[j][0];
                let dy = centers[i][1] - centers[j][1];
                a[(i, j)] = kernel.eval_r2(dx * dx + dy * dy);
            }
            let poly = [1.0, centers[i][0], centers[i][1]];
            for (k, &v) in poly.iter().enumerate() {
                a[(i, n + k)] = v;
                a[(n + k, i)] = v;
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(size, 2);
        for i in 0..n {
            rhs[(i, 0)] = displacements[i][0];
            rhs[(i, 1)] = displacements[i][1];
        }
        let lu = a.clone().lu();
        let mut sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("RBF interpolation matrix".into()))?;
        // one step of iterative refinement
        let resid = &rhs - &a * &sol;
        if let Some(corr) = lu.solve(&resid) {
            sol += corr;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("RBF interpolation matrix".into()));
        }
        let rel = (&rhs - &a * &sol).amax() / rhs.amax().max(1.0);
        if rel > 1e-8 {
            return Err(Error::Singular(format!(
                "RBF system residual {rel:e} after solve"
            )));
        }
        let weights = (0..n).map(|i| [sol[(i, 0)], sol[(i, 1)]]).collect();
        let affine = [
            [sol[(n, 0)], sol[(n, 1)]],
            [sol[(n + 1, 0)], sol[(n + 1, 1)]],
            [sol[(n + 2, 0)], sol[(n + 2, 1)]],
        ];
        Ok(RbfInterpolant {
            centers,
            weights,
            affine,
            origin,
            scale,
            kernel,
        })
    }

    pub fn displacement(&self, x: [f64; 2]) -> [f64; 2] {
        let p = [(x[0] - self.origin[0]) / self.scale, (x[1] - self.origin[1]) / self.scale];
        let mut d = [
            self.affine[0][0] + self.affine[1][0] * p[0] + self.affine[2][0] * p[1],
            self.affine[0][1] + self.affine[1][1] * p[0] + self.affine[2][1] * p[1],
        ];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            if w[0] == 0.0 && w[1] == 0.0 {
                continue;
            }
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let phi = self.kernel.eval_r2(dx * dx + dy * dy);
            d[0] += w[0] * phi;
            d[1] += w[1] * phi;
        }
        d
    }
}

fn check_not_collinear(pts: &[[f64; 2]]) -> Result<()> {
    let n = pts.len() as f64;
    let mean = pts.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    // smallest/largest eigenvalue of the scatter matrix
    let disc = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let lmax = 0.5 * tr + disc;
    let lmin = if lmax > 0.0 { det / lmax } else { 0.0 };
    if lmax <= 0.0 || lmin <= 1e-14 * lmax {
        return Err(Error::Singular("control points are collinear".into()));
    }
    Ok(())
}

fn mean_nearest_spacing(pts: &[[f64; 2]]) -> f64 {
    let total: f64 = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            pts.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / pts.len() as f64
}

/// Morphs `mesh` so that every control node lands on its target.
pub fn build_morph(mesh: &Mesh, spec: &MorphSpec, options: MorphOptions) -> Result<MorphResult> {
    if spec.control_nodes.len() != spec.targets.len() {
        return Err(Error::DimensionMismatch {
            context: "morph spec targets",
            expected: spec.control_nodes.len(),
            got: spec.targets.len(),
        });
    }
    let mut seen = spec.control_nodes.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("control nodes must be unique".into()));
    }
    if let Some(&bad) = seen.last().filter(|&&i| i >= mesh.n_nodes()) {
        return Err(Error::InvalidArgument(format!("control node {bad} out of range")));
    }
    let nodes = mesh.nodes();
    let points: Vec<[f64; 2]> = spec.control_nodes.iter().map(|&i| nodes[i]).collect();
    let disp: Vec<[f64; 2]> = points
        .iter()
        .zip(&spec.targets)
        .map(|(p, t)| [t[0] - p[0], t[1] - p[1]])
        .collect();

    let (displacement, moved) = if disp.iter().all(|d| d[0] == 0.0 && d[1] == 0.0) {
        (vec![[0.0, 0.0]; nodes.len()], nodes.to_vec())
    } else {
        let rbf = RbfInterpolant::fit(&points, &disp, spec.kernel)?;
        let displacement: Vec<[f64; 2]> = nodes.iter().map(|&x| rbf.displacement(x)).collect();
        let moved = nodes
            .iter()
            .zip(&displacement)
            .map(|(x, d)| [x[0] + d[0], x[1] + d[1]])
            .collect();
        (displacement, moved)
    };

    let morphed = mesh.with_nodes(moved)?;
    let mut quality = f64::INFINITY;
    let mut inverted = Vec::new();
    for t in 0..mesh.n_triangles() {
        let before = mesh.signed_area(t)?;
        let after = morphed.signed_area(t)?;
        let ratio = after / before;
        quality = quality.min(ratio);
        if !(after > 0.0) {
            inverted.push(t);
        }
    }
    if mesh.n_triangles() == 0 {
        quality = 1.0;
    }
    if !inverted.is_empty() {
        if options.allow_inversion {
            log::warn!("morph inverted {} triangle(s); accepted by option", inverted.len());
        } else {
            return Err(Error::InvertedTriangles {
                count: inverted.len(),
                first: inverted[0],
            });
        }
    }
    Ok(MorphResult {
        mesh: morphed,
        displacement,
        quality,
        inverted,
    })
}

/// Polyline of a reference boundary curve, ordered like [`Mesh::ordered_group`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    pub group: String,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl ReferenceCurve {
    fn cumulative(&self) -> (Vec<f64>, f64) {
        cumulative_lengths(&self.points, self.closed)
    }

    /// Point at normalized arclength `s` (in [0, 1]).
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let (cum, total) = self.cumulative();
        point_at_fraction(&self.points, self.closed, &cum, total, s)
    }
}

fn cumulative_lengths(points: &[[f64; 2]], closed: bool) -> (Vec<f64>, f64) {
    let n = points.len();
    let segs = if closed { n } else { n - 1 };
    let mut cum = Vec::with_capacity(segs + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for i in 0..segs {
        let (p, q) = (points[i], points[(i + 1) % n]);
        acc += (q[0] - p[0]).hypot(q[1] - p[1]);
        cum.push(acc);
    }
    (cum, acc)
}

fn point_at_fraction(points: &[[f64; 2]], closed: bool, cum: &[f64], total: f64, s: f64) -> [f64; 2] {
    let n = points.len();
    let target = s.clamp(0.0, 1.0) * total;
    let segs = cum.len() - 1;
    // last segment whose start is <= target
    let mut i = cum.partition_point(|&c| c <= target).saturating_sub(1);
    if i >= segs {
        i = segs - 1;
    }
    let len = cum[i + 1] - cum[i];
    let t = if len > 0.0 { (target - cum[i]) / len } else { 0.0 };
    let p = points[i];
    let q = points[if closed { (i + 1) % n } else { i + 1 }];
    if t == 0.0 {
        return p;
    }
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// The geometry every sample is morphed onto: a reference mesh and its curves.
#[derive(Debug, Clone)]
pub struct CommonShape {
    pub mesh: Mesh,
    pub curves: Vec<ReferenceCurve>,
    pub source_sample: Option<usize>,
}

/// Groups treated as boundary curves, with whether they are closed.
pub const CURVE_GROUPS: [(&str, bool); 3] = [("obstacle", true), ("outer", true), ("wake", false)];

impl CommonShape {
    /// Reference curves from the `obstacle` and `outer` groups (required) and
    /// `wake` (optional).
    pub fn from_mesh(mesh: Mesh, source_sample: Option<usize>) -> Result<Self> {
        let mut curves = Vec::new();
        for (name, closed) in CURVE_GROUPS {
            if name == "wake" && !mesh.groups().contains_key(name) {
                continue;
            }
            let order = mesh.ordered_group(name, closed)?;
            let points = order.iter().map(|&i| mesh.nodes()[i]).collect::<Vec<_>>();
            if closed && polygon_area(&points) <= 0.0 {
                return Err(Error::OpenCurve(name.to_string()));
            }
            curves.push(ReferenceCurve {
                group: name.to_string(),
                points,
                closed,
            });
        }
        Ok(CommonShape {
            mesh,
            curves,
            source_sample,
        })
    }

    pub fn curve(&self, group: &str) -> Option<&ReferenceCurve> {
        self.curves.iter().find(|c| c.group == group)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOptions {
    /// Keep every k-th curve node as a control point, per group.
    pub strides: BTreeMap<String, usize>,
    pub kernel: RbfKernel,
}

impl Default for ControlOptions {
    fn default() -> Self {
        let strides = [("obstacle", 1), ("outer", 4), ("wake", 1)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        ControlOptions {
            strides,
            kernel: RbfKernel::ThinPlateSpline,
        }
    }
}

/// Control nodes and arclength-corresponding targets for every reference curve.
pub fn default_control_spec(mesh: &Mesh, common: &CommonShape, options: &ControlOptions) -> Result<MorphSpec> {
    let mut control_nodes = Vec::new();
    let mut targets = Vec::new();
    for curve in &common.curves {
        let order = mesh.ordered_group(&curve.group, curve.closed)?;
        let pts: Vec<[f64; 2]> = order.iter().map(|&i| mesh.nodes()[i]).collect();
        let (cum, total) = cumulative_lengths(&pts, curve.closed);
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(format!("curve `{}` has zero length", curve.group)));
        }
        let (rcum, rtotal) = curve.cumulative();
        let stride = options.strides.get(&curve.group).copied().unwrap_or(1).max(1);
        let mut picks: Vec<usize> = (0..order.len()).step_by(stride).collect();
        if !curve.closed && picks.last() != Some(&(order.len() - 1)) {
            picks.push(order.len() - 1);
        }
        for k in picks {
            let s = cum[k] / total;
            control_nodes.push(order[k]);
            targets.push(point_at_fraction(&curve.points, curve.closed, &rcum, rtotal, s));
        }
    }
    Ok(MorphSpec {
        control_nodes,
        targets,
        kernel: options.kernel,
    })
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn distance_to_polyline(p: [f64; 2], pts: &[[f64; 2]], closed: bool) -> f64 {
    let n = pts.len();
    let segs = if closed { n } else { n - 1 };
    (0..segs)
        .map(|i| point_segment_distance(p, pts[i], pts[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two polylines, sampled at vertices
/// and four interior points per segment.
pub fn polyline_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]], closed: bool) -> f64 {
    let one_way = |from: &[[f64; 2]], to: &[[f64; 2]]| {
        let n = from.len();
        let segs = if closed { n } else { n - 1 };
        let mut worst = 0.0f64;
        for i in 0..segs.max(1) {
            let (p, q) = (from[i], from[(i + 1) % n]);
            for k in 0..5 {
                let t = k as f64 / 5.0;
                let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
                worst = worst.max(distance_to_polyline(x, to, closed));
            }
        }
        if !closed {
            worst = worst.max(distance_to_polyline(from[n - 1], to, closed));
        }
        worst
    };
    one_way(a, b).max(one_way(b, a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonMorphOptions {
    pub control: ControlOptions,
    pub morph: MorphOptions,
    /// Allowed distance of morphed curve nodes from the reference curve,
    /// relative to the common-mesh diameter. Node-to-curve rather than a
    /// polyline Hausdorff distance: two discretizations of the same curve
    /// differ by their chord sagitta even when every node lies on it.
    pub curve_rtol: f64,
}

impl Default for CommonMorphOptions {
    fn default() -> Self {
        CommonMorphOptions {
            control: ControlOptions::default(),
            morph: MorphOptions::default(),
            curve_rtol: 1e-3,
        }
    }
}

/// Control spec, morph and boundary-fidelity check in one call.
pub fn morph_to_common(mesh: &Mesh, common: &CommonShape, options: &CommonMorphOptions) -> Result<MorphResult> {
    let spec = default_control_spec(mesh, common, &options.control)?;
    let result = build_morph(mesh, &spec, options.morph)?;
    let tol = options.curve_rtol * common.mesh.diameter();
    for curve in &common.curves {
        let order = result.mesh.ordered_group(&curve.group, curve.closed)?;
        let pts: Vec<[f64; 2]> = order.iter().map(|&i| result.mesh.nodes()[i]).collect();
        let h = pts
            .iter()
            .map(|&p| distance_to_polyline(p, &curve.points, curve.closed))
            .fold(0.0, f64::max);
        if h > tol {
            return Err(Error::Numerical(format!(
                "morphed `{}` curve is {h:e} away from the reference (tolerance {tol:e})",
                curve.group
            )));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::rectangle_mesh;

    fn square() -> Mesh {
        rectangle_mesh(0.0, 1.0, 0.0, 1.0, 4, 4)
    }

    fn corners(m: &Mesh) -> Vec<usize> {
        let want = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        want.iter()
            .map(|w| m.nodes().iter().position(|p| p == w).unwrap())
            .collect()
    }

    #[test]
    fn identity_targets_give_zero_displacement() {
        let m = square();
        let ctrl = corners(&m);
        let spec = MorphSpec {
            targets: ctrl.iter().map(|&i| m.nodes()[i]).collect(),
            control_nodes: ctrl,
            kernel: RbfKernel::ThinPlateSpline,
        };
        let r = build_morph(&m, &spec, MorphOptions::default()).unwrap();
        assert_eq!(r.quality, 1.0);
        assert!(r.displacement.iter().all(|d| *d == [0.0, 0.0]));
        assert_eq!(r.mesh.nodes(), m.nodes());
    }

    #[test]
    fn translation_is_reproduced() {
        let m = square();
        let ctrl: Vec<usize> = m.group("outer").unwrap().to_vec();
        let spec = MorphSpec {
            targets: ctrl.iter().map(|&i| [m.nodes()[i][0] + 0.3, m.nodes()[i][1] - 0.1]).collect(),
            control_nodes: ctrl,
            kernel: RbfKernel::ThinPlateSpline,
        };
        let r = build_morph(&m, &spec, MorphOptions::default()).unwrap();
        for d in &r.displacement {
            assert!((d[0] - 0.3).abs() < 1e-12 && (d[1] + 0.1).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn square_to_rectangle_maps_center() {
        let m = square();
        let ctrl = corners(&m);
        let spec = MorphSpec {
            targets: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]],
            control_nodes: ctrl,
            kernel: RbfKernel::ThinPlateSpline,
        };
        let r = build_morph(&m, &spec, MorphOptions::default()).unwrap();
        let c = m.nodes().iter().position(|p| *p == [0.5, 0.5]).unwrap();
        let x = r.mesh.nodes()[c];
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 0.5).abs() < 1e-10);
        assert!((r.quality - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_control_sets_are_rejected() {
        let m = square();
        let bottom: Vec<usize> = (0..5).collect();
        let spec = MorphSpec {
            targets: bottom.iter().map(|&i| m.nodes()[i]).map(|p| [p[0], p[1] + 0.1]).collect(),
            control_nodes: bottom,
            kernel: RbfKernel::ThinPlateSpline,
        };
        assert!(matches!(build_morph(&m, &spec, MorphOptions::default()), Err(Error::Singular(_))));

        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let d = [[0.1, 0.0]; 4];
        assert!(matches!(
            RbfInterpolant::fit(&pts, &d, RbfKernel::ThinPlateSpline),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn inversion_is_flagged() {
        let m = square();
        let ctrl = corners(&m);
        let spec = MorphSpec {
            // swap left and right: mirror image
            targets: vec![[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            control_nodes: ctrl,
            kernel: RbfKernel::ThinPlateSpline,
        };
        assert!(matches!(
            build_morph(&m, &spec, MorphOptions::default()),
            Err(Error::InvertedTriangles { .. })
        ));
        let r = build_morph(&m, &spec, MorphOptions { allow_inversion: true }).unwrap();
        assert_eq!(r.inverted.len(), m.n_triangles());
        assert!(r.quality < 0.0);
    }

    #[test]
    fn gaussian_kernel_is_exact_at_controls() {
        let m = square();
        let ctrl: Vec<usize> = m.group("outer").unwrap().to_vec();
        let targets: Vec<[f64; 2]> = ctrl
            .iter()
            .map(|&i| {
                let p = m.nodes()[i];
                [p[0] + 0.05 * (3.0 * p[1]).sin(), p[1] + 0.02 * p[0] * p[0]]
            })
            .collect();
        let spec = MorphSpec {
            control_nodes: ctrl.clone(),
            targets: targets.clone(),
            kernel: RbfKernel::Gaussian { length: None },
        };
        let r = build_morph(&m, &spec, MorphOptions::default()).unwrap();
        for (&i, t) in ctrl.iter().zip(&targets) {
            let x = r.mesh.nodes()[i];
            assert!((x[0] - t[0]).abs() < 1e-10 && (x[1] - t[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn point_at_fraction_hits_vertices_exactly() {
        let c = ReferenceCurve {
            group: "g".into(),
            points: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            closed: true,
        };
        assert_eq!(c.point_at(0.0), [0.0, 0.0]);
        assert_eq!(c.point_at(0.25), [1.0, 0.0]);
        assert_eq!(c.point_at(0.375), [1.0, 0.5]);
        assert_eq!(c.point_at(0.875), [0.0, 0.5]);
    }
}
