//! Finite element fields and their pointwise derivatives.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::assembly::MaterialField;
use super::space::{basis_gradients, basis_values, Degree, FeSpace};
use crate::error::{Error, Result};
use crate::mesh::Point;

/// Coefficient vector of a vector field in a Lagrange space.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    space: Arc<FeSpace>,
    values: Vec<f64>,
    constrained: Vec<bool>,
}

/// Gradient, symmetric gradient and stress of a field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementFields {
    /// `grad[(i, j)] = ∂u_i / ∂x_j`.
    pub grad: Matrix2<f64>,
    pub strain: Matrix2<f64>,
    pub stress: Matrix2<f64>,
}

impl DiscreteField {
    pub fn new(space: Arc<FeSpace>, values: Vec<f64>, constrained: Vec<bool>) -> Result<Self> {
        for len in [values.len(), constrained.len()] {
            if len != space.n_dofs() {
                return Err(Error::Dimension {
                    expected: space.n_dofs(),
                    found: len,
                });
            }
        }
        Ok(DiscreteField {
            space,
            values,
            constrained,
        })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.n_dofs();
        DiscreteField {
            space,
            values: vec![0.0; n],
            constrained: vec![false; n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(space: Arc<FeSpace>, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let values = (0..space.n_nodes())
            .flat_map(|i| f(space.node_point(i)))
            .collect();
        let n = space.n_dofs();
        DiscreteField {
            space,
            values,
            constrained: vec![false; n],
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn degree(&self) -> Degree {
        self.space.degree()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node_value(&self, node: usize) -> [f64; 2] {
        [self.values[2 * node], self.values[2 * node + 1]]
    }

    /// Value on triangle `k` at barycentric point `l`.
    pub fn value(&self, k: usize, l: &[f64; 3]) -> Vector2<f64> {
        let n = basis_values(self.degree(), l);
        let mut v = Vector2::zeros();
        for (a, &node) in self.space.cell_nodes(k).iter().enumerate() {
            v[0] += n[a] * self.values[2 * node];
            v[1] += n[a] * self.values[2 * node + 1];
        }
        v
    }

    /// Gradient on triangle `k` at barycentric point `l`.
    pub fn gradient(&self, k: usize, l: &[f64; 3]) -> Result<Matrix2<f64>> {
        let geo = self.space.geometry(k)?;
        let g = basis_gradients(self.degree(), l, &geo.grads);
        let mut m = Matrix2::zeros();
        for (a, &node) in self.space.cell_nodes(k).iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] += self.values[2 * node + i] * g[a][j];
                }
            }
        }
        Ok(m)
    }

    /// Gradient, strain and stress on triangle `k` at barycentric point `l`.
    pub fn element_fields(
        &self,
        material: &MaterialField,
        k: usize,
        l: &[f64; 3],
    ) -> Result<ElementFields> {
        let grad = self.gradient(k, l)?;
        let strain = (grad + grad.transpose()) * 0.5;
        let stress = material.stress(k, &strain);
        Ok(ElementFields {
            grad,
            strain,
            stress,
        })
    }

    /// Vertex interpolation into a linear space on the same mesh.
    pub fn interpolate(&self, target: &Arc<FeSpace>) -> Result<DiscreteField> {
        if !self.space.same_mesh(target) {
            return Err(Error::MeshMismatch);
        }
        if target.degree() != Degree::Linear {
            return Err(Error::Parameter("interpolation target must be linear".into()));
        }
        // Vertex nodes come first in every space.
        let n = target.n_dofs();
        Ok(DiscreteField {
            space: target.clone(),
            values: self.values[..n].to_vec(),
            constrained: self.constrained[..n].to_vec(),
        })
    }

    /// Linear field embedded in a quadratic space on the same mesh.
    pub fn prolongate(&self, target: &Arc<FeSpace>) -> Result<DiscreteField> {
        if !self.space.same_mesh(target) {
            return Err(Error::MeshMismatch);
        }
        if self.degree() != Degree::Linear || target.degree() != Degree::Quadratic {
            return Err(Error::Parameter("prolongation maps linear to quadratic".into()));
        }
        let nv = self.space.n_nodes();
        let mut values = vec![0.0; target.n_dofs()];
        values[..2 * nv].copy_from_slice(&self.values);
        for (e, &(a, b)) in target.topology().edges.iter().enumerate() {
            for c in 0..2 {
                values[2 * (nv + e) + c] = 0.5 * (self.values[2 * a + c] + self.values[2 * b + c]);
            }
        }
        Ok(DiscreteField {
            space: target.clone(),
            values,
            constrained: vec![false; target.n_dofs()],
        })
    }

    /// Pointwise difference `self - other` on the same space.
    pub fn difference(&self, other: &DiscreteField) -> Result<DiscreteField> {
        if !Arc::ptr_eq(&self.space, &other.space) {
            return Err(Error::MeshMismatch);
        }
        Ok(DiscreteField {
            space: self.space.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            constrained: self.constrained.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn spaces() -> (Arc<FeSpace>, Arc<FeSpace>) {
        let mesh = Arc::new(Mesh::crossed_untagged(2, 2, 1.0, 1.0).unwrap());
        (
            Arc::new(FeSpace::new(mesh.clone(), Degree::Linear)),
            Arc::new(FeSpace::new(mesh, Degree::Quadratic)),
        )
    }

    #[test]
    fn linear_field_reproduced() {
        let (p1, p2) = spaces();
        let f = |p: Point| [1.0 + 2.0 * p[0] - p[1], 0.5 * p[1]];
        let q = DiscreteField::from_fn(p2.clone(), f);
        let i = q.interpolate(&p1).unwrap();
        let back = i.prolongate(&p2).unwrap();
        for (a, b) in back.values().iter().zip(q.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_midpoint_deviation() {
        let (p1, p2) = spaces();
        let q = DiscreteField::from_fn(p2.clone(), |p| [p[0] * p[0], 0.0]);
        let lin = q.interpolate(&p1).unwrap().prolongate(&p2).unwrap();
        let d = q.difference(&lin).unwrap();
        let nv = p1.n_nodes();
        // Chord minus parabola at a midpoint is dx^2 / 4.
        for (e, &(a, b)) in p2.topology().edges.iter().enumerate() {
            let dx = p2.node_point(a)[0] - p2.node_point(b)[0];
            assert!((d.values()[2 * (nv + e)] + dx * dx / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_mesh_rejected() {
        let (_, p2) = spaces();
        let other = Arc::new(FeSpace::new(
            Arc::new(Mesh::crossed_untagged(3, 2, 1.0, 1.0).unwrap()),
            Degree::Linear,
        ));
        assert!(matches!(
            DiscreteField::zeros(p2).interpolate(&other),
            Err(Error::MeshMismatch)
        ));
    }

    #[test]
    fn uniaxial_and_rotation_fields() {
        let (p1, _) = spaces();
        let mat = MaterialField::homogeneous(p1.mesh().n_triangles(), 1.0, 0.3).unwrap();
        let (mu, lam) = (mat.mu(0), mat.lambda(0));
        let u = DiscreteField::from_fn(p1.clone(), |p| [p[0], 0.0]);
        let ef = u.element_fields(&mat, 3, &[1.0 / 3.0; 3]).unwrap();
        let expected = Matrix2::new(2.0 * mu + lam, 0.0, 0.0, lam);
        assert!((ef.stress - expected).abs().max() < 1e-14);
        let r = DiscreteField::from_fn(p1, |p| [-p[1], p[0]]);
        let ef = r.element_fields(&mat, 5, &[0.2, 0.3, 0.5]).unwrap();
        assert!(ef.strain.abs().max() < 1e-14 && ef.stress.abs().max() < 1e-14);
    }
}
