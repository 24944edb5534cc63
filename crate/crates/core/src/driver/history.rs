use std::fmt::Write as _;
use std::path::Path;

use crate::control::StopReason;
use crate::error::{Error, Result};

/// One batch of linear solves: `samples` systems of `dofs` unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveEvent {
    pub samples: usize,
    pub dofs: usize,
}

/// Computational index `Σ N d^{3/2}`.
pub fn compute_ci(events: &[SolveEvent]) -> f64 {
    events
        .iter()
        .map(|e| e.samples as f64 * (e.dofs as f64).powf(1.5))
        .sum()
}

/// Per-iteration record.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub samples: usize,
    /// Vector DoF of the linear space on the final mesh of the iteration.
    pub dofs: usize,
    pub refinements: usize,
    /// Shape updates reverted because the cost increased.
    pub rejections: usize,
    pub compliance: f64,
    pub penalized: f64,
    pub volume_fraction: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    pub q: f64,
    pub rho_it: f64,
    pub rho_ot: f64,
    pub next_samples: usize,
    pub lipschitz: Option<f64>,
    pub alpha: f64,
    pub hj_steps: usize,
    pub grad_norm: f64,
    pub grad_variance: f64,
    /// Largest `dJ(θ_h)` over samples; nonpositive for descent directions.
    pub max_descent: f64,
    /// Largest `|dJ(θ_h) + b(θ_h, θ_h)| / b(θ_h, θ_h)` over samples.
    pub descent_error: f64,
    pub ci_increment: f64,
    pub stop_reason: Option<StopReason>,
    /// Seconds spent in the iteration; kept out of the CSV so reruns match.
    pub wall_time: f64,
}

pub const CSV_HEADER: &str = "iteration,samples,dofs,refinements,rejections,compliance,penalized,\
volume_fraction,eta_c,eta_d,q,rho_it,rho_ot,next_samples,lipschitz,alpha,hj_steps,grad_norm,\
grad_variance,max_descent,descent_error,ci_increment,stop_reason";

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},",
            self.iteration,
            self.samples,
            self.dofs,
            self.refinements,
            self.rejections,
            self.compliance,
            self.penalized,
            self.volume_fraction,
            self.eta_c,
            self.eta_d,
            self.q,
            self.rho_it,
            self.rho_ot,
            self.next_samples,
        )
        .unwrap();
        if let Some(l) = self.lipschitz {
            write!(s, "{l:e}").unwrap();
        }
        write!(
            s,
            ",{:e},{},{:e},{:e},{:e},{:e},{:e},{}",
            self.alpha,
            self.hj_steps,
            self.grad_norm,
            self.grad_variance,
            self.max_descent,
            self.descent_error,
            self.ci_increment,
            self.stop_reason.map_or("", StopReason::as_str),
        )
        .unwrap();
        s
    }
}

/// Append-only run log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub rows: Vec<IterationRecord>,
    pub events: Vec<SolveEvent>,
    pub stop_reason: Option<StopReason>,
}

impl History {
    pub fn ci(&self) -> f64 {
        compute_ci(&self.events)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.rows.last()
    }

    /// Header plus one LF-terminated row per iteration.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(256 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(iteration: usize) -> IterationRecord {
        IterationRecord {
            iteration,
            samples: 2,
            dofs: 7442,
            refinements: 0,
            rejections: 0,
            compliance: 1.5,
            penalized: 2.5,
            volume_fraction: 0.3,
            eta_c: 0.1,
            eta_d: 0.2,
            q: 0.3,
            rho_it: 0.0,
            rho_ot: 0.5,
            next_samples: 2,
            lipschitz: None,
            alpha: 0.01,
            hj_steps: 3,
            grad_norm: 1.0,
            grad_variance: 0.0,
            max_descent: -1.0,
            descent_error: 0.0,
            ci_increment: 1.0,
            stop_reason: None,
            wall_time: 0.25,
        }
    }

    #[test]
    fn ci_examples() {
        let one = [SolveEvent { samples: 10, dofs: 29162 }];
        let expected = 10.0 * 29162f64.powf(1.5);
        assert!((compute_ci(&one) - expected).abs() <= 1e-12 * expected);
        assert!((expected - 49_799_611.925_724_89).abs() <= 1e-6 * expected);
        assert!((expected - 4.981e7).abs() <= 1e-3 * 4.981e7);
        assert_eq!(compute_ci(&[]), 0.0);
        let two = [SolveEvent { samples: 20, dofs: 29162 }];
        assert_eq!(compute_ci(&two), 2.0 * compute_ci(&one));
    }

    #[test]
    fn csv_schema() {
        assert_eq!(History::default().to_csv(), format!("{CSV_HEADER}\n"));
        let mut h = History::default();
        for i in 1..=3 {
            h.rows.push(record(i));
        }
        h.rows[2].stop_reason = Some(StopReason::MaxIterations);
        h.rows[2].lipschitz = Some(4.0);
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let columns = CSV_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == columns));
        assert!(lines[3].ends_with(",max-iterations"));
        assert!(!csv.contains('\r'));
        assert!(!csv.contains("0.25"));
    }
}
