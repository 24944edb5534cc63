use std::sync::Arc;
use std::time::Instant;

use crate::control::{
    estimate_lipschitz, sampling_test, step_length, stopping_check, StepCounter, StopReason,
};
use crate::error::{Error, Result};
use crate::estimators::{
    combine, eta_compliance, eta_deformation, CombinedEstimate, DeformationData, ResidualLoads,
};
use crate::fem::{
    assemble_deformation, assemble_elasticity, dirichlet_mask, normal_mask, point_load,
    DiscreteField, Degree, Factorization, FeSpace, MaterialField, DEFAULT_REL_TOL,
};
use crate::level_set::{benchmark_initial, LevelSet, VelocityGrid};
use crate::mesh::{mark_dorfler, BoundaryTag, Mesh};
use crate::objective::{
    compliance, descent_direction, lambda_tilde, mc_aggregate, penalized_cost, shape_gradient,
    CostBreakdown,
};
use crate::random_field::{sample_vector, KlField};

use super::config::Config;
use super::export::Exporter;
use super::history::{History, IterationRecord, SolveEvent};

/// Benchmark data fixed for the whole run: geometry, tagging and the random
/// loading angle.
pub struct Benchmark {
    config: Config,
    initial: Arc<Mesh>,
    angle: KlField,
}

impl Benchmark {
    pub fn new(config: &Config) -> Result<Benchmark> {
        config.validate()?;
        let [lx, ly] = config.extents;
        let tol = 1e-12 * lx.max(ly);
        let y_min = config.dirichlet_y_min;
        let mesh = Mesh::crossed(config.nx, config.ny, lx, ly, |a, b| {
            if a[0].abs() <= tol && b[0].abs() <= tol && a[1].min(b[1]) >= y_min - tol {
                BoundaryTag::Dirichlet
            } else {
                BoundaryTag::Free
            }
        })?;
        if !mesh.has_tag(BoundaryTag::Dirichlet) {
            return Err(Error::Config(format!(
                "no boundary edge lies on the clamped segment x = 0, y >= {y_min}"
            )));
        }
        let angle = KlField::constant_mean(
            config.mean_angle_deg,
            config.kappa_deg,
            config.correlation_length,
            config.extents,
            config.energy_target,
            config.m_max,
        )?;
        Ok(Benchmark {
            config: config.clone(),
            initial: Arc::new(mesh),
            angle,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn initial_mesh(&self) -> &Arc<Mesh> {
        &self.initial
    }

    pub fn angle_field(&self) -> &KlField {
        &self.angle
    }

    /// Loading angle of sample `index`, in degrees.
    pub fn angle_deg(&self, index: usize) -> Result<f64> {
        let xi = sample_vector(self.config.seed, index, self.angle.n_modes(), 0).xi;
        Ok(self.angle.realize(&xi, &[self.config.load_point])?[0])
    }

    /// Point force `g = |g| (cos φ, sin φ)` of sample `index`.
    pub fn load(&self, index: usize) -> Result<[f64; 2]> {
        let phi = self.angle_deg(index)?.to_radians();
        let m = self.config.load_magnitude;
        Ok([m * phi.cos(), m * phi.sin()])
    }

    /// Initial level set sampled on the grid of the initial mesh.
    pub fn initial_level_set(&self) -> Result<LevelSet> {
        LevelSet::init(self.config.nx, self.config.ny, self.config.extents, benchmark_initial)
    }
}

/// Shape-independent spaces and factorizations of one mesh.
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub linear: Arc<FeSpace>,
    pub quadratic: Arc<FeSpace>,
    clamp: [Vec<bool>; 2],
    normal: [Vec<bool>; 2],
    deformation: [Factorization; 2],
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, tau1: f64, tau2: f64) -> Result<Discretization> {
        let linear = Arc::new(FeSpace::new(mesh.clone(), Degree::Linear));
        let quadratic = Arc::new(FeSpace::new(mesh.clone(), Degree::Quadratic));
        let normal = [normal_mask(&linear), normal_mask(&quadratic)];
        let b1 = assemble_deformation(&linear, tau1, tau2)?.constrain(&normal[0])?;
        let b2 = assemble_deformation(&quadratic, tau1, tau2)?.constrain(&normal[1])?;
        Ok(Discretization {
            clamp: [
                dirichlet_mask(&linear, BoundaryTag::Dirichlet),
                dirichlet_mask(&quadratic, BoundaryTag::Dirichlet),
            ],
            normal,
            deformation: [
                Factorization::new(&b1, DEFAULT_REL_TOL),
                Factorization::new(&b2, DEFAULT_REL_TOL),
            ],
            mesh,
            linear,
            quadratic,
        })
    }

    /// Vector DoF of the linear space.
    pub fn dofs(&self) -> usize {
        self.linear.n_dofs()
    }
}

/// Everything computed for one sample on one mesh.
#[derive(Clone, Debug)]
pub struct SampleResult {
    pub index: usize,
    pub cost: CostBreakdown,
    /// Shape derivative functional over the linear basis.
    pub gradient: Vec<f64>,
    /// Its entries on the initial-mesh vertices.
    pub restricted: Vec<f64>,
    pub theta: Vec<f64>,
    /// `dJ(θ_h) = Gᵀθ_h`.
    pub descent: f64,
    /// `b(θ_h, θ_h)` from the assembled matrix.
    pub b_theta: f64,
    pub eta_c: Vec<f64>,
    pub eta_d: Vec<f64>,
}

/// Sample set evaluated on one mesh and shape.
#[derive(Clone, Debug)]
pub struct Pass {
    pub samples: Vec<SampleResult>,
    pub volume_fraction: f64,
    pub strong: Vec<bool>,
    pub mean_compliance: f64,
    pub mean_penalized: f64,
    pub mean_descent: f64,
    pub eta_c: Vec<f64>,
    pub eta_d: Vec<f64>,
    pub estimate: CombinedEstimate,
    pub mean_theta: Vec<f64>,
}

impl Pass {
    pub fn eta_c_total(&self) -> f64 {
        self.eta_c.iter().sum()
    }

    pub fn eta_d_total(&self) -> f64 {
        self.eta_d.iter().sum()
    }

    /// Per-triangle `η^c_K/|Q^c| + η^d_K/|Q^d|` for marking.
    pub fn marking_indicator(&self) -> Vec<f64> {
        let scale = |q: f64| if q == 0.0 { 1.0 } else { 1.0 / q.abs() };
        let (sc, sd) = (scale(self.mean_compliance), scale(self.mean_descent));
        self.eta_c
            .iter()
            .zip(&self.eta_d)
            .map(|(c, d)| sc * c + sd * d)
            .collect()
    }

    /// Mean penalized cost over the first `n` samples.
    pub fn penalized_over(&self, n: usize) -> f64 {
        let n = n.min(self.samples.len());
        self.samples[..n].iter().map(|s| s.cost.penalized).sum::<f64>() / n as f64
    }
}

/// Solves and estimates `count` samples of the shape `psi` on `disc`,
/// appending the four solve batches to `events`.
pub fn evaluate_pass(
    bench: &Benchmark,
    disc: &Discretization,
    psi: &LevelSet,
    count: usize,
    events: &mut Vec<SolveEvent>,
) -> Result<Pass> {
    let cfg = &bench.config;
    let volume_fraction = psi.volume_fraction();
    let strong = psi.material_indicator(&disc.mesh);
    let material = MaterialField::ersatz(&strong, cfg.young, cfg.poisson, cfg.epsilon)?;
    let a1 = assemble_elasticity(&disc.linear, &material)?.constrain(&disc.clamp[0])?;
    let a2 = assemble_elasticity(&disc.quadratic, &material)?.constrain(&disc.clamp[1])?;
    let a = [
        Factorization::new(&a1, DEFAULT_REL_TOL),
        Factorization::new(&a2, DEFAULT_REL_TOL),
    ];
    let lt = lambda_tilde(cfg.penalty, cfg.volume_target, volume_fraction, disc.mesh.total_area());
    let mut samples = Vec::with_capacity(count);
    for index in 0..count {
        samples.push(evaluate_sample(bench, disc, &a, &material, &strong, lt, volume_fraction, index)?);
    }
    let (d1, d2) = (disc.linear.n_dofs(), disc.quadratic.n_dofs());
    for dofs in [d1, d2, d1, d2] {
        events.push(SolveEvent { samples: count, dofs });
    }
    let n = count as f64;
    let mean = |f: &dyn Fn(&SampleResult) -> f64| samples.iter().map(f).sum::<f64>() / n;
    let mean_vec = |f: &dyn Fn(&SampleResult) -> &Vec<f64>| {
        let mut acc = vec![0.0; f(&samples[0]).len()];
        for s in &samples {
            acc.iter_mut().zip(f(s)).for_each(|(a, v)| *a += v);
        }
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    };
    let mean_compliance = mean(&|s| s.cost.compliance);
    let mean_penalized = mean(&|s| s.cost.penalized);
    let mean_descent = mean(&|s| s.descent);
    let eta_c = mean_vec(&|s| &s.eta_c);
    let eta_d = mean_vec(&|s| &s.eta_d);
    let mean_theta = mean_vec(&|s| &s.theta);
    let estimate = combine(
        eta_c.iter().sum(),
        mean_compliance,
        eta_d.iter().sum(),
        mean_descent,
    );
    Ok(Pass {
        samples,
        volume_fraction,
        strong,
        mean_compliance,
        mean_penalized,
        mean_descent,
        eta_c,
        eta_d,
        estimate,
        mean_theta,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_sample(
    bench: &Benchmark,
    disc: &Discretization,
    a: &[Factorization; 2],
    material: &MaterialField,
    strong: &[bool],
    lt: f64,
    volume_fraction: f64,
    index: usize,
) -> Result<SampleResult> {
    let cfg = &bench.config;
    let g = bench.load(index)?;
    let field = |space: &Arc<FeSpace>, values: Vec<f64>, mask: &[bool]| {
        DiscreteField::new(space.clone(), values, mask.to_vec())
    };

    let l1 = crate::fem::constrain_rhs(&point_load(&disc.linear, cfg.load_point, g)?, &disc.clamp[0]);
    let u = field(&disc.linear, a[0].solve(&l1)?, &disc.clamp[0])?;
    let l2 = crate::fem::constrain_rhs(&point_load(&disc.quadratic, cfg.load_point, g)?, &disc.clamp[1]);
    let z = field(&disc.quadratic, a[1].solve(&l2)?, &disc.clamp[1])?;
    let cost = penalized_cost(
        compliance(u.values(), &l1),
        volume_fraction,
        cfg.penalty,
        cfg.volume_target,
    )?;

    let grad = shape_gradient(&u, material, None, lt, strong, &disc.linear)?;
    let (theta, descent) = descent_direction(&grad.values, &disc.deformation[0], &disc.normal[0])?;
    let b_theta = disc.deformation[0].matrix().bilinear(&theta, &theta);
    let grad2 = shape_gradient(&u, material, None, lt, strong, &disc.quadratic)?;
    let (zeta, _) = descent_direction(&grad2.values, &disc.deformation[1], &disc.normal[1])?;
    let theta_field = field(&disc.linear, theta, &disc.normal[0])?;
    let zeta = field(&disc.quadratic, zeta, &disc.normal[1])?;

    let loads = ResidualLoads {
        body_force: None,
        traction: None,
    };
    let eta_c = eta_compliance(&u, &z, material, &loads)?;
    let data = DeformationData {
        displacement: &u,
        material,
        body_force: None,
        lambda_tilde: lt,
        strong,
        tau1: cfg.tau1,
        tau2: cfg.tau2,
    };
    let eta_d = eta_deformation(&theta_field, &zeta, &data)?;
    Ok(SampleResult {
        index,
        cost,
        gradient: grad.values,
        restricted: grad.restricted,
        theta: theta_field.into_values(),
        descent,
        b_theta,
        eta_c: eta_c.values().to_vec(),
        eta_d: eta_d.values().to_vec(),
    })
}

/// Nodal velocity on the level-set grid, read from the initial-mesh vertices
/// of a linear vector field (grid node `(i, j)` is vertex `j (n_x + 1) + i`).
pub fn velocity_grid(nx: usize, ny: usize, theta: &[f64]) -> Result<VelocityGrid> {
    let n = (nx + 1) * (ny + 1);
    if theta.len() < 2 * n {
        return Err(Error::Dimension {
            expected: 2 * n,
            found: theta.len(),
        });
    }
    VelocityGrid::new(nx, ny, (0..n).map(|v| [theta[2 * v], theta[2 * v + 1]]).collect())
}

/// State carried from one iteration to the next.
struct Previous {
    iteration: usize,
    level_set: LevelSet,
    velocity: VelocityGrid,
    alpha: f64,
    time: f64,
    samples: usize,
    cost: f64,
    restricted: Vec<Vec<f64>>,
    lipschitz: Option<f64>,
}

/// Final state of a run.
pub struct Outcome {
    pub history: History,
    pub level_set: LevelSet,
    /// Mesh and material flags of the last evaluation.
    pub mesh: Arc<Mesh>,
    pub strong: Vec<bool>,
}

/// Runs the optimization and returns the history.
pub fn run(config: &Config) -> Result<History> {
    run_detailed(config).map(|o| o.history)
}

/// Runs the optimization and keeps the final design. When `config.output` is
/// set, the history is flushed every iteration and also after a failure.
pub fn run_detailed(config: &Config) -> Result<Outcome> {
    let exporter = match &config.output {
        Some(dir) => Some(Exporter::create(dir)?),
        None => None,
    };
    if let Some(e) = &exporter {
        e.write_config(config)?;
    }
    let mut history = History::default();
    let result = optimize(config, &mut history, exporter.as_ref());
    match result {
        Ok((level_set, mesh, strong)) => {
            if let Some(e) = &exporter {
                e.write_history(&history)?;
                e.write_final(&level_set, &mesh, &strong)?;
            }
            Ok(Outcome {
                history,
                level_set,
                mesh,
                strong,
            })
        }
        Err(err) => {
            if let Some(e) = &exporter {
                if let Err(flush) = e.write_history(&history) {
                    log::error!("could not flush the partial history: {flush}");
                }
            }
            Err(err)
        }
    }
}

fn update_shape(
    cfg: &Config,
    psi: &LevelSet,
    velocity: &VelocityGrid,
    alpha: f64,
    steps: usize,
    iteration: usize,
) -> Result<(LevelSet, f64)> {
    let adv = psi.advance(velocity, alpha, steps)?;
    let mut next = adv.level_set;
    if cfg.reinit_every > 0 && (iteration + 1) % cfg.reinit_every == 0 {
        next = next.reinitialize().0;
    }
    Ok((next, adv.time))
}

fn optimize(
    cfg: &Config,
    history: &mut History,
    exporter: Option<&Exporter>,
) -> Result<(LevelSet, Arc<Mesh>, Vec<bool>)> {
    let bench = Benchmark::new(cfg)?;
    log::info!(
        "{} modes in the angle expansion ({:.1}% energy)",
        bench.angle.n_modes(),
        100.0 * bench.angle.truncation().energy_ratio
    );
    let base = Discretization::new(bench.initial.clone(), cfg.tau1, cfg.tau2)?;
    let mut psi = bench.initial_level_set()?;
    let mut counter = StepCounter::new(
        cfg.hj_steps.initial,
        cfg.hj_steps.min,
        cfg.hj_steps.max,
        cfg.hj_steps.grow_after,
    );
    let mut size = cfg.first_sample_size();
    let mut prev: Option<Previous> = None;
    let mut costs = Vec::new();

    for k in 0..cfg.max_iters {
        let clock = Instant::now();
        let first_event = history.events.len();
        let mut rejections = 0;
        let mut pass = evaluate_pass(&bench, &base, &psi, size, &mut history.events)?;

        if let Some(p) = prev.as_mut() {
            if pass.penalized_over(p.samples) > p.cost {
                counter.reject();
                rejections += 1;
                log::debug!("iteration {k}: cost increased, retrying with {} steps", counter.steps);
                let (retry, time) = update_shape(cfg, &p.level_set, &p.velocity, p.alpha, counter.steps, p.iteration)?;
                psi = retry;
                p.time = time;
                pass = evaluate_pass(&bench, &base, &psi, size, &mut history.events)?;
                if pass.penalized_over(p.samples) < p.cost {
                    counter.accept();
                } else {
                    counter.neutral();
                }
            } else if pass.penalized_over(p.samples) < p.cost {
                counter.accept();
            } else {
                counter.neutral();
            }
        }
        let first_pass_cost = pass.mean_penalized;

        let mut disc_owned: Option<Discretization> = None;
        let mut refinements = 0;
        while cfg.mode.adaptive_mesh() && refinements < cfg.max_refinements {
            let disc = disc_owned.as_ref().unwrap_or(&base);
            if pass.estimate.q <= cfg.tol_eta || disc.mesh.min_element_size() <= cfg.h_star {
                break;
            }
            let marked = mark_dorfler(&pass.marking_indicator(), cfg.theta_mark)?;
            if marked.is_empty() {
                break;
            }
            let refined = Arc::new(disc.mesh.refine(&marked)?);
            if cfg.max_dofs > 0 && refined.vector_dofs() > cfg.max_dofs {
                break;
            }
            let next = Discretization::new(refined, cfg.tau1, cfg.tau2)?;
            pass = evaluate_pass(&bench, &next, &psi, size, &mut history.events)?;
            disc_owned = Some(next);
            refinements += 1;
        }
        let disc = disc_owned.as_ref().unwrap_or(&base);

        let restricted: Vec<Vec<f64>> = pass.samples.iter().map(|s| s.restricted.clone()).collect();
        let decision = sampling_test(&restricted, cfg.nu_it, cfg.nu_ot, cfg.n_max)?;
        let next_size = if cfg.mode.adaptive_sampling() {
            decision.next_size.max(size)
        } else {
            size
        };

        let volume = pass.volume_fraction * disc.mesh.total_area();
        let (lipschitz, alpha) = match &prev {
            Some(p) => {
                let common = p.samples.min(size);
                let l = estimate_lipschitz(
                    &restricted[..common],
                    &p.restricted[..common],
                    p.velocity.max_norm(),
                    p.time,
                    volume,
                    p.lipschitz,
                )?;
                let alpha = match l {
                    Some(l) => step_length(l, cfg.nu_it, cfg.nu_ot, cfg.alpha_min, cfg.alpha0)?,
                    None => cfg.alpha0,
                };
                (l, alpha)
            }
            None => (None, cfg.alpha0),
        };

        let gradients: Vec<Vec<f64>> = pass.samples.iter().map(|s| s.gradient.clone()).collect();
        let costs_now: Vec<f64> = pass.samples.iter().map(|s| s.cost.penalized).collect();
        let agg = mc_aggregate(&costs_now, &gradients)?;
        costs.push(pass.mean_penalized);
        let stop = stopping_check(
            &costs,
            pass.volume_fraction,
            cfg.volume_target,
            k + 1,
            cfg.max_iters,
            &cfg.stopping,
        );
        let descent_error = pass
            .samples
            .iter()
            .map(|s| {
                let scale = if s.b_theta > 0.0 { s.b_theta } else { 1.0 };
                (s.descent + s.b_theta).abs() / scale
            })
            .fold(0.0, f64::max);
        let record = IterationRecord {
            iteration: k + 1,
            samples: size,
            dofs: disc.dofs(),
            refinements,
            rejections,
            compliance: pass.mean_compliance,
            penalized: pass.mean_penalized,
            volume_fraction: pass.volume_fraction,
            eta_c: pass.eta_c_total(),
            eta_d: pass.eta_d_total(),
            q: pass.estimate.q,
            rho_it: decision.rho_it,
            rho_ot: decision.rho_ot,
            next_samples: next_size,
            lipschitz,
            alpha,
            hj_steps: counter.steps,
            grad_norm: agg.mean_gradient.iter().map(|g| g * g).sum::<f64>().sqrt(),
            grad_variance: agg.gradient_variance,
            max_descent: pass.samples.iter().map(|s| s.descent).fold(f64::NEG_INFINITY, f64::max),
            descent_error,
            ci_increment: super::history::compute_ci(&history.events[first_event..]),
            stop_reason: stop,
            wall_time: clock.elapsed().as_secs_f64(),
        };
        log::info!(
            "iter {:3}  |S| {:2}  dof {:6}  J {:.4e}  JP {:.4e}  V {:.4}  Q {:.3e}  alpha {:.2e}  steps {}",
            record.iteration,
            record.samples,
            record.dofs,
            record.compliance,
            record.penalized,
            record.volume_fraction,
            record.q,
            record.alpha,
            record.hj_steps
        );
        history.rows.push(record);
        if let Some(e) = exporter {
            e.write_history(history)?;
            if cfg.snapshot_every > 0 && (k + 1) % cfg.snapshot_every == 0 {
                e.write_snapshot(k + 1, &psi, &pass, disc)?;
            }
        }
        if let Some(reason) = stop {
            history.stop_reason = Some(reason);
            return Ok((psi, disc.mesh.clone(), pass.strong));
        }

        let velocity = velocity_grid(cfg.nx, cfg.ny, &pass.mean_theta)?;
        let (next, time) = update_shape(cfg, &psi, &velocity, alpha, counter.steps, k)?;
        prev = Some(Previous {
            iteration: k,
            level_set: std::mem::replace(&mut psi, next),
            velocity,
            alpha,
            time,
            samples: size,
            cost: first_pass_cost,
            restricted,
            lipschitz,
        });
        size = next_size;
    }
    // max_iters >= 1 guarantees the loop returned.
    history.stop_reason = Some(StopReason::MaxIterations);
    Err(Error::Numeric("iteration loop ended without a decision".into()))
}
