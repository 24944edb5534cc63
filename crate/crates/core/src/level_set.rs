//! Level-set shape representation on a fixed structured grid.
//!
//! Negative values are material, positive values void. Nodes are numbered
//! `j * (nx + 1) + i`, the same as the corner vertices of the crossed mesh.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet {
    nx: usize,
    ny: usize,
    extents: [f64; 2],
    values: Vec<f64>,
}

/// Nodal velocity on a level-set grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    nx: usize,
    ny: usize,
    values: Vec<[f64; 2]>,
}

impl VelocityGrid {
    pub fn new(nx: usize, ny: usize, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != (nx + 1) * (ny + 1) {
            return Err(Error::Dimension {
                expected: (nx + 1) * (ny + 1),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Numeric("velocity has non-finite entries".into()));
        }
        Ok(VelocityGrid { nx, ny, values })
    }

    pub fn uniform(nx: usize, ny: usize, v: [f64; 2]) -> Self {
        VelocityGrid {
            nx,
            ny,
            values: vec![v; (nx + 1) * (ny + 1)],
        }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// Largest Euclidean norm over the nodes.
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
    }
}

/// Outcome of [`LevelSet::advance`].
#[derive(Clone, Debug)]
pub struct Advance {
    pub level_set: LevelSet,
    pub dt: f64,
    /// Accumulated fictitious time `steps * dt`.
    pub time: f64,
}

/// The benchmark initial design `-cos(8πx) cos(4πy) - 0.5`.
pub fn benchmark_initial(p: Point) -> f64 {
    use std::f64::consts::PI;
    -(8.0 * PI * p[0]).cos() * (4.0 * PI * p[1]).cos() - 0.5
}

impl LevelSet {
    pub fn init(nx: usize, ny: usize, extents: [f64; 2], psi0: impl Fn(Point) -> f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(extents[0] > 0.0 && extents[1] > 0.0) {
            return Err(Error::Parameter(format!(
                "invalid level-set grid {nx} x {ny} on {extents:?}"
            )));
        }
        let mut ls = LevelSet {
            nx,
            ny,
            extents,
            values: Vec::with_capacity((nx + 1) * (ny + 1)),
        };
        for j in 0..=ny {
            for i in 0..=nx {
                ls.values.push(psi0(ls.point(i, j)));
            }
        }
        if ls.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("initial level set has non-finite values".into()));
        }
        Ok(ls)
    }

    pub fn from_values(nx: usize, ny: usize, extents: [f64; 2], values: Vec<f64>) -> Result<Self> {
        if values.len() != (nx + 1) * (ny + 1) {
            return Err(Error::Dimension {
                expected: (nx + 1) * (ny + 1),
                found: values.len(),
            });
        }
        Ok(LevelSet {
            nx,
            ny,
            extents,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    pub fn dx(&self) -> f64 {
        self.extents[0] / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.extents[1] / self.ny as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.index(i, j)]
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        [
            if i == self.nx { self.extents[0] } else { i as f64 * self.dx() },
            if j == self.ny { self.extents[1] } else { j as f64 * self.dy() },
        ]
    }

    /// Bilinear interpolation; points outside the grid are clamped onto it.
    pub fn bilinear(&self, p: Point) -> f64 {
        let fx = (p[0] / self.dx()).clamp(0.0, self.nx as f64);
        let fy = (p[1] / self.dy()).clamp(0.0, self.ny as f64);
        let i = (fx.floor() as usize).min(self.nx - 1);
        let j = (fy.floor() as usize).min(self.ny - 1);
        let (s, t) = (fx - i as f64, fy - j as f64);
        (1.0 - s) * (1.0 - t) * self.value(i, j)
            + s * (1.0 - t) * self.value(i + 1, j)
            + (1.0 - s) * t * self.value(i, j + 1)
            + s * t * self.value(i + 1, j + 1)
    }

    fn check_velocity(&self, theta: &VelocityGrid) -> Result<()> {
        if (theta.nx, theta.ny) != (self.nx, self.ny) {
            return Err(Error::Dimension {
                expected: self.values.len(),
                found: theta.values.len(),
            });
        }
        Ok(())
    }

    /// One forward-Euler step of `ψ_t + θ·∇ψ = 0` with the Lax–Friedrichs
    /// Hamiltonian. The missing one-sided difference at a grid boundary is
    /// replaced by the available one.
    pub fn hj_step(&self, theta: &VelocityGrid, dt: f64) -> Result<LevelSet> {
        self.check_velocity(theta)?;
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("time step must be nonnegative, got {dt}")));
        }
        let (dx, dy) = (self.dx(), self.dy());
        let mut out = self.values.clone();
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let c = self.value(i, j);
                let pm = (i > 0).then(|| (c - self.value(i - 1, j)) / dx);
                let pp = (i < self.nx).then(|| (self.value(i + 1, j) - c) / dx);
                let qm = (j > 0).then(|| (c - self.value(i, j - 1)) / dy);
                let qp = (j < self.ny).then(|| (self.value(i, j + 1) - c) / dy);
                let (pm, pp) = (pm.or(pp).unwrap(), pp.or(pm).unwrap());
                let (qm, qp) = (qm.or(qp).unwrap(), qp.or(qm).unwrap());
                let [tx, ty] = theta.values[self.index(i, j)];
                let h = 0.5 * tx * (pp + pm) + 0.5 * ty * (qp + qm)
                    - 0.5 * tx.abs() * (pp - pm)
                    - 0.5 * ty.abs() * (qp - qm);
                out[self.index(i, j)] = c - dt * h;
            }
        }
        Ok(LevelSet {
            values: out,
            ..self.clone()
        })
    }

    /// CFL time step `α min(Δx, Δy) / θ_max`; `None` when the velocity vanishes.
    pub fn cfl_dt(&self, alpha: f64, theta: &VelocityGrid) -> Option<f64> {
        let tmax = theta.max_norm();
        (tmax > 0.0).then(|| alpha * self.dx().min(self.dy()) / tmax)
    }

    /// `n_steps` CFL-limited steps. A vanishing velocity leaves ψ unchanged.
    pub fn advance(&self, theta: &VelocityGrid, alpha: f64, n_steps: usize) -> Result<Advance> {
        if n_steps == 0 {
            return Err(Error::Parameter("at least one step is required".into()));
        }
        self.check_velocity(theta)?;
        let Some(dt) = self.cfl_dt(alpha, theta) else {
            return Ok(Advance {
                level_set: self.clone(),
                dt: 0.0,
                time: 0.0,
            });
        };
        let mut ls = self.clone();
        for _ in 0..n_steps {
            ls = ls.hj_step(theta, dt)?;
        }
        Ok(Advance {
            level_set: ls,
            dt,
            time: dt * n_steps as f64,
        })
    }

    fn central_gradient_norm(&self, i: usize, j: usize) -> f64 {
        let d = |a: usize, b: usize, h: f64, x: bool| {
            let (lo, hi) = (a.saturating_sub(1), (a + 1).min(b));
            let (vlo, vhi) = if x {
                (self.value(lo, j), self.value(hi, j))
            } else {
                (self.value(i, lo), self.value(i, hi))
            };
            (vhi - vlo) / ((hi - lo) as f64 * h)
        };
        d(i, self.nx, self.dx(), true).hypot(d(j, self.ny, self.dy(), false))
    }

    /// Fast-sweeping redistancing that keeps the sign of every node.
    ///
    /// Returns the new level set and whether an interface was found; without
    /// one the input is returned unchanged.
    pub fn reinitialize(&self) -> (LevelSet, bool) {
        let n = self.values.len();
        let has_neg = self.values.iter().any(|&v| v < 0.0);
        let has_pos = self.values.iter().any(|&v| v > 0.0);
        if !(has_neg && has_pos) {
            return (self.clone(), false);
        }
        let (dx, dy) = (self.dx(), self.dy());
        let mut d = vec![f64::INFINITY; n];
        let mut fixed = vec![false; n];
        // Nodes of cells cut by the interface keep ψ up to one global scale,
        // which leaves the bilinear zero contour unchanged.
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = [self.value(i, j), self.value(i + 1, j), self.value(i, j + 1), self.value(i + 1, j + 1)];
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if lo <= 0.0 && hi >= 0.0 {
                    for k in [self.index(i, j), self.index(i + 1, j), self.index(i, j + 1), self.index(i + 1, j + 1)] {
                        fixed[k] = true;
                    }
                }
            }
        }
        let mut slopes: Vec<f64> = (0..n)
            .filter(|&k| fixed[k])
            .map(|k| self.central_gradient_norm(k % (self.nx + 1), k / (self.nx + 1)))
            .filter(|g| *g > 0.0)
            .collect();
        slopes.sort_by(f64::total_cmp);
        let scale = if slopes.is_empty() { 1.0 } else { slopes[slopes.len() / 2] };
        for k in 0..n {
            if fixed[k] {
                d[k] = self.values[k].abs() / scale;
            }
        }
        let solve = |a: f64, b: f64| -> f64 {
            let first = (a + dx).min(b + dy);
            if first <= a.max(b) || !a.is_finite() || !b.is_finite() {
                return first;
            }
            // ((d - a)/dx)^2 + ((d - b)/dy)^2 = 1
            let (wa, wb) = (1.0 / (dx * dx), 1.0 / (dy * dy));
            let qa = wa + wb;
            let qb = -2.0 * (a * wa + b * wb);
            let qc = a * a * wa + b * b * wb - 1.0;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            (-qb + disc.sqrt()) / (2.0 * qa)
        };
        for _round in 0..4 {
            let mut changed = false;
            for dir in 0..4 {
                let rev_i = dir & 1 == 1;
                let rev_j = dir & 2 == 2;
                for jj in 0..=self.ny {
                    let j = if rev_j { self.ny - jj } else { jj };
                    for ii in 0..=self.nx {
                        let i = if rev_i { self.nx - ii } else { ii };
                        let k = self.index(i, j);
                        if fixed[k] {
                            continue;
                        }
                        let a = f64::min(
                            if i > 0 { d[k - 1] } else { f64::INFINITY },
                            if i < self.nx { d[k + 1] } else { f64::INFINITY },
                        );
                        let b = f64::min(
                            if j > 0 { d[k - self.nx - 1] } else { f64::INFINITY },
                            if j < self.ny { d[k + self.nx + 1] } else { f64::INFINITY },
                        );
                        let cand = solve(a, b);
                        if cand < d[k] {
                            if d[k] - cand > 1e-14 * cand.max(1.0) {
                                changed = true;
                            }
                            d[k] = cand;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // Nodes whose distance estimate underflows keep their sign.
        let values = self
            .values
            .iter()
            .zip(&d)
            .map(|(&v, &dist)| {
                let dist = dist.max(f64::MIN_POSITIVE);
                if v < 0.0 {
                    -dist
                } else if v > 0.0 {
                    dist
                } else {
                    0.0
                }
            })
            .collect();
        (
            LevelSet {
                values,
                ..self.clone()
            },
            true,
        )
    }

    /// Strong-material flag per triangle: `ψ(centroid) < 0`.
    pub fn material_indicator(&self, mesh: &Mesh) -> Vec<bool> {
        (0..mesh.n_triangles())
            .map(|k| self.bilinear(mesh.centroid(k)) < 0.0)
            .collect()
    }

    /// Flags inherited from the initial-mesh ancestor of each triangle, so
    /// refinement leaves the geometry unchanged.
    pub fn material_indicator_inherited(&self, initial: &Mesh, mesh: &Mesh) -> Vec<bool> {
        let roots = self.material_indicator(initial);
        (0..mesh.n_triangles()).map(|k| roots[mesh.root(k)]).collect()
    }

    /// Fraction of the domain with `ψ < 0`, from 4 x 4 samples of the
    /// bilinear interpolant in every cell.
    pub fn volume_fraction(&self) -> f64 {
        const SUB: usize = 4;
        let mut inside = 0usize;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = [
                    self.value(i, j),
                    self.value(i + 1, j),
                    self.value(i, j + 1),
                    self.value(i + 1, j + 1),
                ];
                for b in 0..SUB {
                    let t = (b as f64 + 0.5) / SUB as f64;
                    for a in 0..SUB {
                        let s = (a as f64 + 0.5) / SUB as f64;
                        let psi = (1.0 - s) * (1.0 - t) * v[0]
                            + s * (1.0 - t) * v[1]
                            + (1.0 - s) * t * v[2]
                            + s * t * v[3];
                        if psi < 0.0 {
                            inside += 1;
                        }
                    }
                }
            }
        }
        inside as f64 / (self.nx * self.ny * SUB * SUB) as f64
    }
}
