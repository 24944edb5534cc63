//! Global matrices, load vectors and constraint handling.

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::Matrix2;

use super::quadrature::{edge_rule, triangle_rule};
use super::space::{basis_gradients, basis_values, edge_barycentric, FeSpace};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point};

/// Lamé parameters `(mu, lambda)` from Young's modulus and Poisson ratio.
pub fn lame(young: f64, poisson: f64) -> (f64, f64) {
    let mu = young / (2.0 * (1.0 + poisson));
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    (mu, lambda)
}

/// Piecewise-constant Lamé parameters, one pair per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    mu: Vec<f64>,
    lambda: Vec<f64>,
}

impl MaterialField {
    pub fn new(mu: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if mu.len() != lambda.len() {
            return Err(Error::Dimension {
                expected: mu.len(),
                found: lambda.len(),
            });
        }
        for (k, (&m, &l)) in mu.iter().zip(&lambda).enumerate() {
            if !(m > 0.0 && m + l > 0.0 && m.is_finite() && l.is_finite()) {
                return Err(Error::Parameter(format!(
                    "triangle {k}: Lamé pair ({m}, {l}) is not elliptic"
                )));
            }
        }
        Ok(MaterialField { mu, lambda })
    }

    pub fn homogeneous(n_triangles: usize, young: f64, poisson: f64) -> Result<Self> {
        let (mu, lambda) = lame(young, poisson);
        MaterialField::new(vec![mu; n_triangles], vec![lambda; n_triangles])
    }

    /// Ersatz material: weak triangles get both parameters scaled by `epsilon`.
    pub fn ersatz(strong: &[bool], young: f64, poisson: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Parameter(format!(
                "ersatz factor must lie in (0, 1), got {epsilon}"
            )));
        }
        let (mu, lambda) = lame(young, poisson);
        let scale = |s: &bool| if *s { 1.0 } else { epsilon };
        MaterialField::new(
            strong.iter().map(|s| mu * scale(s)).collect(),
            strong.iter().map(|s| lambda * scale(s)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.lambda[k]
    }

    /// Hooke's law on triangle `k`.
    pub fn stress(&self, k: usize, strain: &Matrix2<f64>) -> Matrix2<f64> {
        strain * (2.0 * self.mu[k]) + Matrix2::identity() * (self.lambda[k] * strain.trace())
    }
}

/// Sparse square matrix in compressed-column storage.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    /// Builds an `n x n` matrix; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let inner = SparseColMat::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Numeric(format!("sparse construction failed: {e:?}")))?;
        Ok(SparseMatrix { inner })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    pub(crate) fn as_faer(&self) -> &SparseColMat<usize, f64> {
        &self.inner
    }

    /// Stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let sym = self.inner.symbolic();
        let (ptr, rows, vals) = (sym.col_ptr(), sym.row_idx(), self.inner.val());
        (0..self.dim()).flat_map(move |j| (ptr[j]..ptr[j + 1]).map(move |p| (rows[p], j, vals[p])))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (i, j, v) in self.entries() {
            y[i] += v * x[j];
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.entries().map(|(i, j, v)| x[i] * v * y[j]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for (i, j, v) in self.entries() {
            if i == j {
                d[i] += v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.val().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut map = std::collections::HashMap::with_capacity(self.nnz());
        for (i, j, v) in self.entries() {
            map.insert((i, j), v);
        }
        map.iter()
            .map(|(&(i, j), &v)| (v - map.get(&(j, i)).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric elimination: constrained rows and columns are dropped and a
    /// unit diagonal is inserted.
    pub fn constrain(&self, constrained: &[bool]) -> Result<Self> {
        check_len(self.dim(), constrained.len())?;
        let mut t: Vec<(usize, usize, f64)> = self
            .entries()
            .filter(|&(i, j, _)| !constrained[i] && !constrained[j])
            .collect();
        t.extend(
            constrained
                .iter()
                .enumerate()
                .filter(|(_, &c)| c)
                .map(|(i, _)| (i, i, 1.0)),
        );
        SparseMatrix::from_triplets(self.dim(), &t)
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// Matrix, right-hand side and the record of eliminated degrees of freedom.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub constrained: Vec<bool>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        check_len(matrix.dim(), rhs.len())?;
        let n = rhs.len();
        Ok(LinearSystem {
            matrix,
            rhs,
            constrained: vec![false; n],
        })
    }

    /// Eliminates the degrees of freedom flagged in `mask` (homogeneous values).
    pub fn apply_dirichlet(&self, mask: &[bool]) -> Result<LinearSystem> {
        let constrained: Vec<bool> = self
            .constrained
            .iter()
            .zip(mask)
            .map(|(a, b)| *a || *b)
            .collect();
        check_len(self.rhs.len(), mask.len())?;
        Ok(LinearSystem {
            matrix: self.matrix.constrain(&constrained)?,
            rhs: constrain_rhs(&self.rhs, &constrained),
            constrained,
        })
    }
}

/// Zeroes the constrained entries of a right-hand side.
pub fn constrain_rhs(rhs: &[f64], constrained: &[bool]) -> Vec<f64> {
    rhs.iter()
        .zip(constrained)
        .map(|(&v, &c)| if c { 0.0 } else { v })
        .collect()
}

fn element_loop(
    space: &FeSpace,
    degree: u32,
    mut local: impl FnMut(usize, &[[f64; 2]; 6], &[f64; 6], f64, &mut [[f64; 12]; 12]),
) -> Result<SparseMatrix> {
    let deg = space.degree();
    let nl = deg.local_nodes();
    let rule = triangle_rule(degree);
    let mut triplets = Vec::with_capacity(space.mesh().n_triangles() * 4 * nl * nl);
    for k in 0..space.mesh().n_triangles() {
        let geo = space.geometry(k)?;
        let mut ke = [[0.0; 12]; 12];
        for (l, w) in rule {
            let g = basis_gradients(deg, l, &geo.grads);
            let n = basis_values(deg, l);
            local(k, &g, &n, w * geo.area, &mut ke);
        }
        let nodes = space.cell_nodes(k);
        for a in 0..nl {
            for c in 0..2 {
                for b in 0..nl {
                    for d in 0..2 {
                        let v = ke[2 * a + c][2 * b + d];
                        if v != 0.0 {
                            triplets.push((2 * nodes[a] + c, 2 * nodes[b] + d, v));
                        }
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(space.n_dofs(), &triplets)
}

/// Stiffness matrix of `a(u, v) = ∫ 2μ ε(u):ε(v) + λ div u div v`.
pub fn assemble_elasticity(space: &FeSpace, material: &MaterialField) -> Result<SparseMatrix> {
    check_len(space.mesh().n_triangles(), material.len())?;
    let nl = space.degree().local_nodes();
    element_loop(space, space.degree().stiffness_quadrature(), |k, g, _, w, ke| {
        let (mu, lam) = (material.mu(k), material.lambda(k));
        for a in 0..nl {
            for b in 0..nl {
                let dot = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                for c in 0..2 {
                    for d in 0..2 {
                        let delta = if c == d { dot } else { 0.0 };
                        ke[2 * a + c][2 * b + d] +=
                            w * (mu * (delta + g[a][d] * g[b][c]) + lam * g[a][c] * g[b][d]);
                    }
                }
            }
        }
    })
}

/// Matrix of `b(θ, φ) = ∫ τ1 ∇θ:∇φ + τ2 θ·φ`.
pub fn assemble_deformation(space: &FeSpace, tau1: f64, tau2: f64) -> Result<SparseMatrix> {
    if !(tau1 > 0.0 && tau2 > 0.0) {
        return Err(Error::Parameter(format!(
            "deformation weights must be positive, got ({tau1}, {tau2})"
        )));
    }
    let nl = space.degree().local_nodes();
    element_loop(space, space.degree().stiffness_quadrature(), |_, g, n, w, ke| {
        for a in 0..nl {
            for b in 0..nl {
                let v = w * (tau1 * (g[a][0] * g[b][0] + g[a][1] * g[b][1]) + tau2 * n[a] * n[b]);
                ke[2 * a][2 * b] += v;
                ke[2 * a + 1][2 * b + 1] += v;
            }
        }
    })
}

/// `∫ f·v` for every basis function.
pub fn assemble_body_load(space: &FeSpace, f: &dyn Fn(Point) -> [f64; 2]) -> Result<Vec<f64>> {
    let deg = space.degree();
    let mut out = vec![0.0; space.n_dofs()];
    for k in 0..space.mesh().n_triangles() {
        let geo = space.geometry(k)?;
        let nodes = space.cell_nodes(k);
        for (l, w) in triangle_rule(5) {
            let fx = f(geo.point(l));
            let n = basis_values(deg, l);
            for (a, &node) in nodes.iter().enumerate() {
                out[2 * node] += w * geo.area * fx[0] * n[a];
                out[2 * node + 1] += w * geo.area * fx[1] * n[a];
            }
        }
    }
    Ok(out)
}

/// `∫_{Γ} g·v` over the boundary edges carrying `tag`.
pub fn assemble_traction(
    space: &FeSpace,
    g: &dyn Fn(Point) -> [f64; 2],
    tag: BoundaryTag,
) -> Result<Vec<f64>> {
    if !space.mesh().has_tag(tag) {
        return Err(Error::Config(format!("no boundary edge is tagged {tag:?}")));
    }
    let deg = space.degree();
    let topo = space.topology();
    let mut out = vec![0.0; space.n_dofs()];
    for (e, _, t) in space.boundary_edges() {
        if t != tag {
            continue;
        }
        let k = topo.edge_triangles[e].0;
        let le = topo.triangle_edges[k].iter().position(|&x| x == e).unwrap();
        let geo = space.geometry(k)?;
        let (_, len) = geo.edge_normal(le);
        let nodes = space.cell_nodes(k);
        for (t, w) in edge_rule() {
            let l = edge_barycentric(le, t);
            let gx = g(geo.point(&l));
            let n = basis_values(deg, &l);
            for (a, &node) in nodes.iter().enumerate() {
                out[2 * node] += w * len * gx[0] * n[a];
                out[2 * node + 1] += w * len * gx[1] * n[a];
            }
        }
    }
    Ok(out)
}

/// Load functional from an optional body force and an optional traction on
/// the edges tagged `neumann_tag`.
pub fn assemble_load(
    space: &FeSpace,
    body_force: Option<&dyn Fn(Point) -> [f64; 2]>,
    traction: Option<&dyn Fn(Point) -> [f64; 2]>,
    neumann_tag: BoundaryTag,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; space.n_dofs()];
    if let Some(f) = body_force {
        for (o, v) in out.iter_mut().zip(assemble_body_load(space, f)?) {
            *o += v;
        }
    }
    if let Some(g) = traction {
        for (o, v) in out.iter_mut().zip(assemble_traction(space, g, neumann_tag)?) {
            *o += v;
        }
    }
    Ok(out)
}

/// Nodal force `g` at the mesh vertex located at `point`.
pub fn point_load(space: &FeSpace, point: Point, g: [f64; 2]) -> Result<Vec<f64>> {
    let (node, dist) = space.mesh().nearest_vertex(point);
    let hmin = space.mesh().min_element_size();
    if dist > 1e-9 * hmin {
        return Err(Error::Config(format!(
            "load point ({}, {}) is {dist:e} from the nearest vertex; point loads must sit on a vertex",
            point[0], point[1]
        )));
    }
    let mut out = vec![0.0; space.n_dofs()];
    out[2 * node] = g[0];
    out[2 * node + 1] = g[1];
    Ok(out)
}

/// Both components of every node on an edge tagged `tag`.
pub fn dirichlet_mask(space: &FeSpace, tag: BoundaryTag) -> Vec<bool> {
    let mut mask = vec![false; space.n_dofs()];
    for (e, _, t) in space.boundary_edges() {
        if t == tag {
            for node in space.edge_nodes(e) {
                mask[2 * node] = true;
                mask[2 * node + 1] = true;
            }
        }
    }
    mask
}

/// Normal component `θ·n = 0` on the rectangle boundary: x-components on
/// vertical sides, y-components on horizontal sides, both at corners.
pub fn normal_mask(space: &FeSpace) -> Vec<bool> {
    let [lx, ly] = space.mesh().extents();
    let tol = 1e-12 * lx.max(ly);
    let mut mask = vec![false; space.n_dofs()];
    for node in 0..space.n_nodes() {
        let p = space.node_point(node);
        if p[0].abs() <= tol || (p[0] - lx).abs() <= tol {
            mask[2 * node] = true;
        }
        if p[1].abs() <= tol || (p[1] - ly).abs() <= tol {
            mask[2 * node + 1] = true;
        }
    }
    mask
}
