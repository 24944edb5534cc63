//! Sample-size test, Lipschitz-based step length and stopping rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of the augmented inner-product test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingDecision {
    pub rho_it: f64,
    pub rho_ot: f64,
    pub rho: f64,
    pub pass: bool,
    /// Sample size for the next iteration.
    pub next_size: usize,
    /// The mean gradient vanished; no growth is requested.
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner-product (`ρ^IT`) and orthogonality (`ρ^OT`) statistics of the sampled
/// gradients; the test passes when both are at most one.
pub fn sampling_test(
    gradients: &[Vec<f64>],
    nu_it: f64,
    nu_ot: f64,
    n_max: usize,
) -> Result<SamplingDecision> {
    let s = gradients.len();
    if s < 2 {
        return Err(Error::Parameter(format!(
            "the sampling test needs at least two samples, got {s}"
        )));
    }
    if !(nu_it > 0.0 && nu_ot > 0.0) {
        return Err(Error::Parameter("test constants must be positive".into()));
    }
    let dim = gradients[0].len();
    if let Some(g) = gradients.iter().find(|g| g.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: g.len(),
        });
    }
    let mut mean = vec![0.0; dim];
    for g in gradients {
        mean.iter_mut().zip(g).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= s as f64);
    let mean_sq = dot(&mean, &mean);
    if mean_sq == 0.0 {
        return Ok(SamplingDecision {
            rho_it: 0.0,
            rho_ot: 0.0,
            rho: 0.0,
            pass: true,
            next_size: s,
            degenerate: true,
        });
    }
    let sf = s as f64;
    let mut it = 0.0;
    let mut ot = 0.0;
    for g in gradients {
        let gm = dot(g, &mean);
        it += (gm - mean_sq).powi(2);
        ot += dot(g, g) - gm * gm / mean_sq;
    }
    let rho_it = it / ((sf - 1.0) * sf * nu_it * nu_it * mean_sq * mean_sq);
    // Round-off can leave the orthogonal sum slightly negative.
    let rho_ot = (ot / ((sf - 1.0) * sf * nu_ot * nu_ot * mean_sq)).max(0.0);
    let rho = rho_it.max(rho_ot);
    let pass = rho_it <= 1.0 && rho_ot <= 1.0;
    let next_size = if pass {
        s
    } else {
        ((rho * sf).ceil() as usize).clamp(s, n_max.max(s))
    };
    Ok(SamplingDecision {
        rho_it,
        rho_ot,
        rho,
        pass,
        next_size,
        degenerate: false,
    })
}

/// Lipschitz estimate
/// `Σ_i ‖g_i^k - g_i^{k-1}‖ / (t ‖θ_{k-1}‖_∞ |W_k| |S_k|)`.
///
/// Sums run over the samples present in both iterations (the first
/// `min(now, prev)` indices); the count in the denominator is `now.len()`.
/// A vanishing denominator carries `previous` forward.
pub fn estimate_lipschitz(
    now: &[Vec<f64>],
    prev: &[Vec<f64>],
    theta_prev_max: f64,
    t_elapsed: f64,
    volume_now: f64,
    previous: Option<f64>,
) -> Result<Option<f64>> {
    if now.is_empty() {
        return Err(Error::EmptySample);
    }
    let denom = t_elapsed * theta_prev_max * volume_now * now.len() as f64;
    if !(denom > 1e-14) {
        return Ok(previous);
    }
    let mut num = 0.0;
    for (a, b) in now.iter().zip(prev) {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                expected: a.len(),
                found: b.len(),
            });
        }
        num += a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    Ok(Some(num / denom))
}

/// Step-length divisor `1 + ν_IT² + ν_OT²`.
pub fn step_divisor(nu_it: f64, nu_ot: f64) -> f64 {
    1.0 + nu_it * nu_it + nu_ot * nu_ot
}

/// Unclamped step `1 / ((1 + ν_IT² + ν_OT²) L)`; infinite for `L = 0`.
pub fn raw_step_length(lipschitz: f64, nu_it: f64, nu_ot: f64) -> f64 {
    1.0 / (step_divisor(nu_it, nu_ot) * lipschitz)
}

/// Step length clamped to `[alpha_min, alpha_max]`.
pub fn step_length(lipschitz: f64, nu_it: f64, nu_ot: f64, alpha_min: f64, alpha_max: f64) -> Result<f64> {
    if !(lipschitz >= 0.0) {
        return Err(Error::Parameter(format!(
            "Lipschitz estimate must be nonnegative, got {lipschitz}"
        )));
    }
    if !(0.0 < alpha_min && alpha_min <= alpha_max) {
        return Err(Error::Parameter(format!(
            "invalid step bounds [{alpha_min}, {alpha_max}]"
        )));
    }
    Ok(raw_step_length(lipschitz, nu_it, nu_ot).clamp(alpha_min, alpha_max))
}

/// How the stagnation and volume tests are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StopCombinator {
    #[default]
    And,
    Or,
}

/// Stopping rule parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingRule {
    pub window: usize,
    pub rel_tol: f64,
    pub volume_tol: f64,
    pub combinator: StopCombinator,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            window: 5,
            rel_tol: 0.01,
            volume_tol: 0.005,
            combinator: StopCombinator::And,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    Stagnated,
    VolumeReached,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Stagnated => "stagnated",
            StopReason::VolumeReached => "volume",
            StopReason::MaxIterations => "max-iterations",
        }
    }
}

/// Whether the last `window` cost differences are all within `rel_tol`.
pub fn stagnated(costs: &[f64], window: usize, rel_tol: f64) -> bool {
    let n = costs.len();
    if n < window + 1 {
        return false;
    }
    let last = costs[n - 1];
    (1..=window).all(|i| (last - costs[n - 1 - i]).abs() <= rel_tol * last.abs())
}

/// Stopping decision after `iteration` completed iterations.
pub fn stopping_check(
    costs: &[f64],
    volume_fraction: f64,
    target: f64,
    iteration: usize,
    max_iters: usize,
    rule: &StoppingRule,
) -> Option<StopReason> {
    let stag = stagnated(costs, rule.window, rule.rel_tol);
    let vol = (volume_fraction - target).abs() <= rule.volume_tol;
    match rule.combinator {
        StopCombinator::And if stag && vol => return Some(StopReason::Converged),
        StopCombinator::Or if stag => return Some(StopReason::Stagnated),
        StopCombinator::Or if vol => return Some(StopReason::VolumeReached),
        _ => {}
    }
    (iteration >= max_iters).then_some(StopReason::MaxIterations)
}

/// Adaptive count of fictitious HJ steps per iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepCounter {
    pub steps: usize,
    pub min: usize,
    pub max: usize,
    streak: usize,
    pub grow_after: usize,
}

impl StepCounter {
    pub fn new(initial: usize, min: usize, max: usize, grow_after: usize) -> Self {
        StepCounter {
            steps: initial.clamp(min, max),
            min,
            max,
            streak: 0,
            grow_after,
        }
    }

    /// Halves the count after a rejected update.
    pub fn reject(&mut self) {
        self.steps = (self.steps / 2).max(self.min);
        self.streak = 0;
    }

    /// Records an accepted decrease; enough of them in a row add one step.
    pub fn accept(&mut self) {
        self.streak += 1;
        if self.streak >= self.grow_after {
            self.steps = (self.steps + 1).min(self.max);
            self.streak = 0;
        }
    }

    /// An accepted update that did not decrease the cost.
    pub fn neutral(&mut self) {
        self.streak = 0;
    }
}
