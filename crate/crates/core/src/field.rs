//! Nodal fields, snapshot stacks and the inner products used to compare them.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::mesh::{Mesh, MeshId};

/// Per-node values stored node-major: all components of node 0, then node 1, ...
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    mesh_id: MeshId,
    components: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(mesh_id: MeshId, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidArgument("field needs at least one component".into()));
        }
        if !values.len().is_multiple_of(components) {
            return Err(Error::DimensionMismatch {
                context: "nodal field length",
                expected: (values.len() / components + 1) * components,
                got: values.len(),
            });
        }
        ensure_finite(&values, "nodal field")?;
        Ok(NodalField {
            mesh_id,
            components,
            values,
        })
    }

    /// Field on `mesh`, checking the node count.
    pub fn on_mesh(mesh: &Mesh, components: usize, values: Vec<f64>) -> Result<Self> {
        let expected = mesh.n_nodes() * components;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "nodal field on mesh",
                expected,
                got: values.len(),
            });
        }
        Self::new(mesh.id(), components, values)
    }

    /// The coordinate field (x1, x2) of a mesh.
    pub fn coordinates(mesh: &Mesh) -> Self {
        let values = mesh.nodes().iter().flat_map(|p| [p[0], p[1]]).collect();
        NodalField {
            mesh_id: mesh.id(),
            components: 2,
            values,
        }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }
}

/// A stack of snapshots of equal length, one per row (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    n_snapshots: usize,
    n_dofs: usize,
    data: Vec<f64>,
    mesh_id: Option<MeshId>,
}

impl SnapshotMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_dofs = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_dofs);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_dofs {
                return Err(Error::DimensionMismatch {
                    context: if i == 0 { "snapshot row" } else { "snapshot rows must share length" },
                    expected: n_dofs,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(rows.len(), n_dofs, data)
    }

    pub fn from_flat(n_snapshots: usize, n_dofs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_snapshots * n_dofs {
            return Err(Error::DimensionMismatch {
                context: "snapshot matrix storage",
                expected: n_snapshots * n_dofs,
                got: data.len(),
            });
        }
        ensure_finite(&data, "snapshot matrix")?;
        Ok(SnapshotMatrix {
            n_snapshots,
            n_dofs,
            data,
            mesh_id: None,
        })
    }

    pub fn with_mesh_id(mut self, id: MeshId) -> Self {
        self.mesh_id = Some(id);
        self
    }

    pub fn mesh_id(&self) -> Option<MeshId> {
        self.mesh_id
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snapshots
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_dofs..(i + 1) * self.n_dofs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_snapshots).map(move |i| self.row(i))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows picked by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_dofs);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SnapshotMatrix {
            n_snapshots: indices.len(),
            n_dofs: self.n_dofs,
            data,
            mesh_id: self.mesh_id,
        }
    }
}

/// Inner product on DOF vectors: plain dot product or a positive diagonal weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerProduct {
    Euclidean,
    Diagonal { weights: Vec<f64> },
}

impl InnerProduct {
    /// Lumped-mass L2 product for a `components`-component node-major field.
    pub fn lumped_mass(mesh: &Mesh, components: usize) -> Self {
        let mass = mesh.lumped_mass();
        let weights = mass
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m, components))
            .collect();
        InnerProduct::Diagonal { weights }
    }

    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            InnerProduct::Euclidean => u.iter().zip(v).map(|(a, b)| a * b).sum(),
            InnerProduct::Diagonal { weights } => u
                .iter()
                .zip(v)
                .zip(weights)
                .map(|((a, b), w)| a * b * w)
                .sum(),
        }
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.dot(u, u).max(0.0).sqrt()
    }

    pub fn check_len(&self, n_dofs: usize) -> Result<()> {
        match self {
            InnerProduct::Diagonal { weights } if weights.len() != n_dofs => {
                Err(Error::DimensionMismatch {
                    context: "inner-product weights",
                    expected: n_dofs,
                    got: weights.len(),
                })
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            InnerProduct::Euclidean => "euclidean",
            InnerProduct::Diagonal { .. } => "diagonal",
        }
    }
}
