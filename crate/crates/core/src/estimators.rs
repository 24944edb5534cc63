//! Dual-weighted residual indicators for the compliance and deformation goals.
//!
//! Both indicators are products `ρ_K ω_K` of a residual (cell term plus
//! scaled edge jumps) and a weight built from the quadratic dual solution
//! minus its vertex interpolant.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::fem::quadrature::{edge_rule, triangle_rule};
use crate::fem::space::{edge_barycentric, Degree, ElementGeometry, FeSpace};
use crate::fem::{DiscreteField, MaterialField};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::objective::{shape_tensors, BodyForce};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    Compliance,
    Deformation,
}

/// Nonnegative per-triangle indicator values.
#[derive(Clone, Debug)]
pub struct IndicatorField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    goal: Goal,
}

impl IndicatorField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>, goal: Goal) -> Result<Self> {
        if values.len() != mesh.n_triangles() {
            return Err(Error::Dimension {
                expected: mesh.n_triangles(),
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Numeric(format!("indicator value {v} is not a nonnegative number")));
        }
        Ok(IndicatorField { mesh, values, goal })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn goal(&self) -> Goal {
        self.goal
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Scaled sum of the two relative estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CombinedEstimate {
    pub relative_compliance: f64,
    pub relative_deformation: f64,
    pub q: f64,
    /// True when a goal value vanished and its absolute total was used instead.
    pub degenerate: bool,
}

/// `Q = η^c/|Q^c| + η^d/|Q^d|`.
pub fn combine(eta_c: f64, qc: f64, eta_d: f64, qd: f64) -> CombinedEstimate {
    let mut degenerate = false;
    let mut rel = |eta: f64, q: f64| {
        if q == 0.0 {
            if eta != 0.0 {
                degenerate = true;
                log::warn!("goal value vanished; using the absolute estimate {eta:e}");
            }
            eta
        } else {
            eta / q.abs()
        }
    };
    let rc = rel(eta_c, qc);
    let rd = rel(eta_d, qd);
    CombinedEstimate {
        relative_compliance: rc,
        relative_deformation: rd,
        q: rc + rd,
        degenerate,
    }
}

/// Element-wise mean over samples.
pub fn per_sample_indicator_mean(fields: &[IndicatorField]) -> Result<IndicatorField> {
    let first = fields.first().ok_or(Error::EmptySample)?;
    let mut acc = vec![0.0; first.values.len()];
    for f in fields {
        if !(Arc::ptr_eq(&f.mesh, &first.mesh) || *f.mesh == *first.mesh) {
            return Err(Error::MeshMismatch);
        }
        for (a, v) in acc.iter_mut().zip(&f.values) {
            *a += v;
        }
    }
    let n = fields.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    IndicatorField::new(first.mesh.clone(), acc, first.goal)
}

/// Weights `‖e‖_K + h_K^{1/2} ‖e‖_{∂K}` of `e = z - I_h z`.
fn weights(z: &DiscreteField) -> Result<Vec<f64>> {
    if z.degree() != Degree::Quadratic {
        return Err(Error::Parameter("dual weight needs a quadratic field".into()));
    }
    let space = z.space();
    let mesh = space.mesh();
    let p1 = Arc::new(FeSpace::new(mesh.clone(), Degree::Linear));
    let e = z.difference(&z.interpolate(&p1)?.prolongate(space)?)?;
    let mut out = Vec::with_capacity(mesh.n_triangles());
    for k in 0..mesh.n_triangles() {
        let geo = space.geometry(k)?;
        let cell: f64 = triangle_rule(4)
            .iter()
            .map(|(l, w)| w * e.value(k, l).norm_squared())
            .sum::<f64>()
            * geo.area;
        let mut edges = 0.0;
        for le in 0..3 {
            let (_, len) = geo.edge_normal(le);
            for (t, w) in edge_rule() {
                edges += w * len * e.value(k, &edge_barycentric(le, t)).norm_squared();
            }
        }
        let h = mesh.element_size(k);
        out.push(cell.sqrt() + h.sqrt() * edges.sqrt());
    }
    Ok(out)
}

fn barycentric_of(geo: &ElementGeometry, p: Point) -> [f64; 3] {
    let mut l = [0.0; 3];
    for (i, li) in l.iter_mut().enumerate() {
        // λ_i vanishes at vertex i + 1.
        let q = geo.points[(i + 1) % 3];
        *li = geo.grads[i][0] * (p[0] - q[0]) + geo.grads[i][1] * (p[1] - q[1]);
    }
    l
}

/// How a boundary edge enters the jump term.
enum EdgeKind {
    Interior(usize),
    Boundary(BoundaryTag),
}

/// Residual `h_K^{-1/2} ‖jump‖_{∂K}` with a caller-supplied jump at each
/// edge quadrature point: `jump(edge kind, x, l_here, l_there, n)`.
fn edge_residual(
    space: &FeSpace,
    k: usize,
    geo: &ElementGeometry,
    mut jump: impl FnMut(&EdgeKind, Point, &[f64; 3], Option<&[f64; 3]>, Vector2<f64>) -> Result<Vector2<f64>>,
) -> Result<f64> {
    let topo = space.topology();
    let mesh = space.mesh();
    let mut sum = 0.0;
    for le in 0..3 {
        let kind = match topo.neighbor(k, le) {
            Some(nb) => EdgeKind::Interior(nb),
            None => {
                let (a, b) = topo.edges[topo.triangle_edges[k][le]];
                EdgeKind::Boundary(mesh.boundary_tag(a, b).unwrap_or(BoundaryTag::Free))
            }
        };
        let nb_geo = match kind {
            EdgeKind::Interior(nb) => Some(space.geometry(nb)?),
            EdgeKind::Boundary(_) => None,
        };
        let (n, len) = geo.edge_normal(le);
        let n = Vector2::from(n);
        for (t, w) in edge_rule() {
            let l = edge_barycentric(le, t);
            let x = geo.point(&l);
            let lo = nb_geo.as_ref().map(|g| barycentric_of(g, x));
            let j = jump(&kind, x, &l, lo.as_ref(), n)?;
            sum += w * len * j.norm_squared();
        }
    }
    Ok(sum.sqrt() / mesh.element_size(k).sqrt())
}

/// Boundary loads seen by the compliance residual.
pub struct ResidualLoads<'a> {
    pub body_force: Option<&'a dyn Fn(Point) -> [f64; 2]>,
    /// Traction density on edges tagged Neumann. A nodal point load has none
    /// and its Neumann edges are then treated as traction free.
    pub traction: Option<&'a dyn Fn(Point) -> [f64; 2]>,
}

/// `η^c_K = ρ^u_K ω^z_K`.
pub fn eta_compliance(
    u: &DiscreteField,
    z: &DiscreteField,
    material: &MaterialField,
    loads: &ResidualLoads,
) -> Result<IndicatorField> {
    if u.degree() != Degree::Linear {
        return Err(Error::Parameter("primal field must be linear".into()));
    }
    if !u.space().same_mesh(z.space()) {
        return Err(Error::MeshMismatch);
    }
    let space = u.space().clone();
    let mesh = space.mesh().clone();
    let omega = weights(z)?;
    let centroid = [1.0 / 3.0; 3];
    let stresses: Vec<Matrix2<f64>> = (0..mesh.n_triangles())
        .map(|k| u.element_fields(material, k, &centroid).map(|e| e.stress))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(mesh.n_triangles());
    for k in 0..mesh.n_triangles() {
        let geo = space.geometry(k)?;
        // Linear displacements have piecewise-constant stress: div σ = 0.
        let cell = match loads.body_force {
            Some(f) => (triangle_rule(5)
                .iter()
                .map(|(l, w)| w * Vector2::from(f(geo.point(l))).norm_squared())
                .sum::<f64>()
                * geo.area)
                .sqrt(),
            None => 0.0,
        };
        let sk = stresses[k];
        let edges = edge_residual(&space, k, &geo, |kind, x, _, _, n| {
            Ok(match kind {
                EdgeKind::Interior(nb) => (sk - stresses[*nb]) * n * 0.5,
                EdgeKind::Boundary(BoundaryTag::Dirichlet) => Vector2::zeros(),
                EdgeKind::Boundary(BoundaryTag::Neumann) => match loads.traction {
                    Some(g) => Vector2::from(g(x)) - sk * n,
                    None => -(sk * n),
                },
                EdgeKind::Boundary(BoundaryTag::Free) => -(sk * n),
            })
        })?;
        values.push((cell + edges) * omega[k]);
    }
    IndicatorField::new(mesh, values, Goal::Compliance)
}

/// Inputs of the deformation residual besides the fields.
pub struct DeformationData<'a> {
    pub displacement: &'a DiscreteField,
    pub material: &'a MaterialField,
    pub body_force: Option<&'a BodyForce>,
    pub lambda_tilde: f64,
    pub strong: &'a [bool],
    pub tau1: f64,
    pub tau2: f64,
}

/// `η^d_K = ρ^θ_K ω^ζ_K` with flux `τ1∇θ + S - Λ̃χ_W I`.
pub fn eta_deformation(
    theta: &DiscreteField,
    zeta: &DiscreteField,
    data: &DeformationData,
) -> Result<IndicatorField> {
    if theta.degree() != Degree::Linear || data.displacement.degree() != Degree::Linear {
        return Err(Error::Parameter("deformation and displacement must be linear".into()));
    }
    if !theta.space().same_mesh(zeta.space()) || !theta.space().same_mesh(data.displacement.space()) {
        return Err(Error::MeshMismatch);
    }
    let space = theta.space().clone();
    let mesh = space.mesh().clone();
    if data.strong.len() != mesh.n_triangles() {
        return Err(Error::Dimension {
            expected: mesh.n_triangles(),
            found: data.strong.len(),
        });
    }
    let omega = weights(zeta)?;
    let flux = |k: usize, l: &[f64; 3]| -> Result<Matrix2<f64>> {
        let (s, _) = shape_tensors(data.displacement, data.material, data.body_force, k, l)?;
        let chi = if data.strong[k] { data.lambda_tilde } else { 0.0 };
        Ok(theta.gradient(k, l)? * data.tau1 + s - Matrix2::identity() * chi)
    };
    let mut values = Vec::with_capacity(mesh.n_triangles());
    for k in 0..mesh.n_triangles() {
        let geo = space.geometry(k)?;
        // For linear u, div S equals T and ∇θ is constant, leaving -τ2 θ.
        let cell = (triangle_rule(2)
            .iter()
            .map(|(l, w)| w * (theta.value(k, l) * data.tau2).norm_squared())
            .sum::<f64>()
            * geo.area)
            .sqrt();
        let edges = edge_residual(&space, k, &geo, |kind, _, l, lo, n| {
            let fk = flux(k, l)? * n;
            Ok(match kind {
                EdgeKind::Interior(nb) => (fk - flux(*nb, lo.unwrap())? * n) * 0.5,
                // θ·n = 0 is imposed; only the tangential traction is natural.
                EdgeKind::Boundary(_) => {
                    let t = Vector2::new(-n[1], n[0]);
                    -t * fk.dot(&t)
                }
            })
        })?;
        values.push((cell + edges) * omega[k]);
    }
    IndicatorField::new(mesh, values, Goal::Deformation)
}

/// Per-triangle `η^c_K/|Q^c| + η^d_K/|Q^d|` used for marking.
pub fn combined_indicator(
    eta_c: &IndicatorField,
    qc: f64,
    eta_d: &IndicatorField,
    qd: f64,
) -> Vec<f64> {
    let sc = if qc == 0.0 { 1.0 } else { 1.0 / qc.abs() };
    let sd = if qd == 0.0 { 1.0 } else { 1.0 / qd.abs() };
    eta_c
        .values
        .iter()
        .zip(&eta_d.values)
        .map(|(c, d)| sc * c + sd * d)
        .collect()
}
