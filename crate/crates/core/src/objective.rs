//! Compliance, volume penalty, distributed shape derivative and descent
//! directions.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::fem::quadrature::triangle_rule;
use crate::fem::space::{basis_gradients, basis_values, FeSpace};
use crate::fem::{constrain_rhs, DiscreteField, Factorization, MaterialField};
use crate::mesh::Point;

/// Compliance and its penalized counterpart for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown {
    pub compliance: f64,
    pub volume_fraction: f64,
    pub penalty: f64,
    pub penalized: f64,
}

/// `J = lᵀu`.
pub fn compliance(u: &[f64], load: &[f64]) -> f64 {
    u.iter().zip(load).map(|(a, b)| a * b).sum()
}

/// `J + (Λ/2)(ς - V)²`.
pub fn penalized_cost(
    compliance: f64,
    volume_fraction: f64,
    lambda: f64,
    target: f64,
) -> Result<CostBreakdown> {
    if !(lambda > 0.0) || !(target > 0.0 && target < 1.0) {
        return Err(Error::Parameter(format!(
            "penalty weight {lambda} must be positive and target {target} in (0, 1)"
        )));
    }
    let penalty = 0.5 * lambda * (target - volume_fraction).powi(2);
    Ok(CostBreakdown {
        compliance,
        volume_fraction,
        penalty,
        penalized: compliance + penalty,
    })
}

/// Volume multiplier `(Λ/|D|)(ς - |W|/|D|)`.
pub fn lambda_tilde(lambda: f64, target: f64, volume_fraction: f64, domain_area: f64) -> f64 {
    lambda / domain_area * (target - volume_fraction)
}

pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;

/// Body force with its analytic gradient `gradient[i][c] = ∂f_i/∂x_c`.
#[derive(Clone)]
pub struct BodyForce {
    pub value: VectorFn,
    pub gradient: TensorFn,
}

impl std::fmt::Debug for BodyForce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BodyForce")
    }
}

impl BodyForce {
    pub fn new(
        value: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        gradient: impl Fn(Point) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        BodyForce {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }
}

/// Tensors `S = 2∇uᵀσ + (2f·u - σ:ε) I` and `T = 2∇(f·u)` at one point.
pub fn shape_tensors(
    u: &DiscreteField,
    material: &MaterialField,
    body: Option<&BodyForce>,
    k: usize,
    l: &[f64; 3],
) -> Result<(Matrix2<f64>, Vector2<f64>)> {
    let ef = u.element_fields(material, k, l)?;
    let energy = ef.stress.component_mul(&ef.strain).sum();
    let mut s = ef.grad.transpose() * ef.stress * 2.0;
    let mut t = Vector2::zeros();
    let mut fu = 0.0;
    if let Some(b) = body {
        let geo = u.space().geometry(k)?;
        let x = geo.point(l);
        let f = Vector2::from((b.value)(x));
        let gf = (b.gradient)(x);
        let uv = u.value(k, l);
        fu = f.dot(&uv);
        for c in 0..2 {
            t[c] = 2.0
                * (0..2)
                    .map(|i| gf[i][c] * uv[i] + f[i] * ef.grad[(i, c)])
                    .sum::<f64>();
        }
    }
    s += Matrix2::identity() * (2.0 * fu - energy);
    Ok((s, t))
}

/// Shape derivative functional assembled over the basis of `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeGradient {
    pub values: Vec<f64>,
    /// Entries of the initial-mesh vertices (comparable across refinements).
    pub restricted: Vec<f64>,
}

/// `G_j = ∫ S:∇φ_j + T·φ_j - Λ̃ ∫_W div φ_j` for every basis function of `target`.
///
/// `u` must be a linear field on the same mesh; the volume term runs over the
/// triangles flagged in `strong`.
pub fn shape_gradient(
    u: &DiscreteField,
    material: &MaterialField,
    body: Option<&BodyForce>,
    lambda_tilde: f64,
    strong: &[bool],
    target: &Arc<FeSpace>,
) -> Result<ShapeGradient> {
    if !u.space().same_mesh(target) {
        return Err(Error::MeshMismatch);
    }
    let mesh = target.mesh();
    if strong.len() != mesh.n_triangles() {
        return Err(Error::Dimension {
            expected: mesh.n_triangles(),
            found: strong.len(),
        });
    }
    let deg = target.degree();
    let rule = triangle_rule(if body.is_some() { 5 } else { 2 });
    let mut g = vec![0.0; target.n_dofs()];
    for k in 0..mesh.n_triangles() {
        let geo = target.geometry(k)?;
        let nodes = target.cell_nodes(k);
        for (l, w) in rule {
            let (s, t) = shape_tensors(u, material, body, k, l)?;
            let grads = basis_gradients(deg, l, &geo.grads);
            let vals = basis_values(deg, l);
            let wa = w * geo.area;
            for (a, &node) in nodes.iter().enumerate() {
                for c in 0..2 {
                    let mut v = s[(c, 0)] * grads[a][0] + s[(c, 1)] * grads[a][1] + t[c] * vals[a];
                    if strong[k] {
                        v -= lambda_tilde * grads[a][c];
                    }
                    g[2 * node + c] += wa * v;
                }
            }
        }
    }
    let n0 = 2 * mesh.initial_vertex_count();
    Ok(ShapeGradient {
        restricted: g[..n0].to_vec(),
        values: g,
    })
}

/// `∫_W ∂_c φ_a` over strong triangles, for every basis function.
pub fn divergence_functional(space: &FeSpace, strong: &[bool]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; space.n_dofs()];
    for k in (0..space.mesh().n_triangles()).filter(|&k| strong[k]) {
        let geo = space.geometry(k)?;
        for (l, w) in triangle_rule(2) {
            let grads = basis_gradients(space.degree(), l, &geo.grads);
            for (a, &node) in space.cell_nodes(k).iter().enumerate() {
                out[2 * node] += w * geo.area * grads[a][0];
                out[2 * node + 1] += w * geo.area * grads[a][1];
            }
        }
    }
    Ok(out)
}

/// Descent direction `θ = B⁻¹(-G)` and the directional derivative `Gᵀθ`.
///
/// `factorization` holds the constrained deformation matrix; `G` is zeroed on
/// the `constrained` entries before the solve.
pub fn descent_direction(
    gradient: &[f64],
    factorization: &Factorization,
    constrained: &[bool],
) -> Result<(Vec<f64>, f64)> {
    let rhs: Vec<f64> = constrain_rhs(gradient, constrained)
        .into_iter()
        .map(|v| -v)
        .collect();
    let theta = factorization.solve(&rhs)?;
    let dj = gradient.iter().zip(&theta).map(|(g, t)| g * t).sum();
    Ok((theta, dj))
}

/// Sample means and the mean per-component gradient variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub mean_cost: f64,
    pub mean_gradient: Vec<f64>,
    pub gradient_variance: f64,
}

/// Monte Carlo aggregation in the given (fixed) sample order.
pub fn mc_aggregate(costs: &[f64], gradients: &[Vec<f64>]) -> Result<Aggregate> {
    if costs.is_empty() || gradients.is_empty() {
        return Err(Error::EmptySample);
    }
    if costs.len() != gradients.len() {
        return Err(Error::Dimension {
            expected: costs.len(),
            found: gradients.len(),
        });
    }
    let n = costs.len() as f64;
    let dim = gradients[0].len();
    if let Some(g) = gradients.iter().find(|g| g.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: g.len(),
        });
    }
    let mean_cost = costs.iter().sum::<f64>() / n;
    let mut mean = vec![0.0; dim];
    for g in gradients {
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let variance = if gradients.len() < 2 || dim == 0 {
        0.0
    } else {
        let ss: f64 = gradients
            .iter()
            .flat_map(|g| g.iter().zip(&mean).map(|(v, m)| (v - m).powi(2)))
            .sum();
        ss / (n - 1.0) / dim as f64
    };
    Ok(Aggregate {
        mean_cost,
        mean_gradient: mean,
        gradient_variance: variance,
    })
}
