//! Continuous Lagrange spaces of vector fields on a triangulation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, EdgeKey, Mesh, Point, Topology};

/// Polynomial degree of a Lagrange space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Degree {
    Linear,
    Quadratic,
}

impl Degree {
    pub fn local_nodes(self) -> usize {
        match self {
            Degree::Linear => 3,
            Degree::Quadratic => 6,
        }
    }

    /// Quadrature degree that integrates products of basis gradients exactly.
    pub fn stiffness_quadrature(self) -> u32 {
        match self {
            Degree::Linear => 2,
            Degree::Quadratic => 4,
        }
    }
}

/// Vector-valued Lagrange space.
///
/// Nodes are the mesh vertices, followed for quadratic spaces by one node per
/// edge (its midpoint). Local nodes 3, 4, 5 sit on the edges `(v0, v1)`,
/// `(v1, v2)`, `(v2, v0)`. Degree of freedom `2 * node + component`.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: Degree,
    topology: Topology,
    cell_nodes: Vec<[usize; 6]>,
    n_nodes: usize,
}

/// Affine geometry of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates.
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, k: usize) -> Result<Self> {
        let points = mesh.triangle_points(k);
        let area = mesh.signed_area(k);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index: k, area });
        }
        let mut grads = [[0.0; 2]; 3];
        for (i, g) in grads.iter_mut().enumerate() {
            let pj = points[(i + 1) % 3];
            let pk = points[(i + 2) % 3];
            *g = [(pj[1] - pk[1]) / (2.0 * area), (pk[0] - pj[0]) / (2.0 * area)];
        }
        Ok(ElementGeometry {
            points,
            area,
            grads,
        })
    }

    pub fn point(&self, l: &[f64; 3]) -> Point {
        let p = &self.points;
        [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]
    }

    /// Outward unit normal and length of local edge `e` (opposite vertex `e`).
    pub fn edge_normal(&self, e: usize) -> ([f64; 2], f64) {
        let a = self.points[(e + 1) % 3];
        let b = self.points[(e + 2) % 3];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        ([dy / len, -dx / len], len)
    }
}

/// Edge endpoints of local edge `e` and the barycentric coordinates at
/// parameter `t` along it.
pub fn edge_barycentric(e: usize, t: f64) -> [f64; 3] {
    let mut l = [0.0; 3];
    l[(e + 1) % 3] = 1.0 - t;
    l[(e + 2) % 3] = t;
    l
}

/// Scalar shape functions at barycentric point `l`.
pub fn basis_values(degree: Degree, l: &[f64; 3]) -> [f64; 6] {
    match degree {
        Degree::Linear => [l[0], l[1], l[2], 0.0, 0.0, 0.0],
        Degree::Quadratic => [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
    }
}

/// Physical gradients of the shape functions at barycentric point `l`.
pub fn basis_gradients(degree: Degree, l: &[f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut out = [[0.0; 2]; 6];
    match degree {
        Degree::Linear => {
            out[..3].copy_from_slice(g);
        }
        Degree::Quadratic => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * g[i][0], s * g[i][1]];
            }
            for (slot, (i, j)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
                out[slot] = [
                    4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                    4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
                ];
            }
        }
    }
    out
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: Degree) -> FeSpace {
        let topology = mesh.topology();
        let nv = mesh.n_vertices();
        let cell_nodes = mesh
            .triangles()
            .iter()
            .zip(&topology.triangle_edges)
            .map(|(t, e)| match degree {
                Degree::Linear => [t[0], t[1], t[2], 0, 0, 0],
                Degree::Quadratic => [t[0], t[1], t[2], nv + e[2], nv + e[0], nv + e[1]],
            })
            .collect();
        let n_nodes = match degree {
            Degree::Linear => nv,
            Degree::Quadratic => nv + topology.n_edges(),
        };
        FeSpace {
            mesh,
            degree,
            topology,
            cell_nodes,
            n_nodes,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes
    }

    /// Global node indices of triangle `k` in local order.
    pub fn cell_nodes(&self, k: usize) -> &[usize] {
        &self.cell_nodes[k][..self.degree.local_nodes()]
    }

    pub fn node_point(&self, node: usize) -> Point {
        let nv = self.mesh.n_vertices();
        if node < nv {
            self.mesh.vertex(node)
        } else {
            let (a, b) = self.topology.edges[node - nv];
            let (p, q) = (self.mesh.vertex(a), self.mesh.vertex(b));
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
        }
    }

    /// Nodes lying on edge `e` of the topology.
    pub fn edge_nodes(&self, e: usize) -> Vec<usize> {
        let (a, b) = self.topology.edges[e];
        match self.degree {
            Degree::Linear => vec![a, b],
            Degree::Quadratic => vec![a, b, self.mesh.n_vertices() + e],
        }
    }

    /// Boundary edges (topology index, vertex key, tag).
    pub fn boundary_edges(&self) -> Vec<(usize, EdgeKey, BoundaryTag)> {
        self.topology
            .edges
            .iter()
            .enumerate()
            .filter(|(e, _)| self.topology.edge_triangles[*e].1.is_none())
            .map(|(e, &key)| {
                let tag = self
                    .mesh
                    .boundary_tag(key.0, key.1)
                    .unwrap_or(BoundaryTag::Free);
                (e, key, tag)
            })
            .collect()
    }

    pub fn geometry(&self, k: usize) -> Result<ElementGeometry> {
        ElementGeometry::new(&self.mesh, k)
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }
}
