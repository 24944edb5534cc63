use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::StoppingRule;
use crate::error::{Error, Result};

/// Which parts of the algorithm adapt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Fixed mesh, `full_samples` samples every iteration.
    FixedMeshFull,
    /// Fixed mesh, sample set grown by the inner-product test.
    FixedMeshAdaptiveSampling,
    /// Estimator-driven refinement, `full_samples` samples.
    AdaptiveMeshFull,
    /// Refinement and adaptive sampling.
    FullyAdaptive,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::FixedMeshFull,
        Mode::FixedMeshAdaptiveSampling,
        Mode::AdaptiveMeshFull,
        Mode::FullyAdaptive,
    ];

    pub fn adaptive_mesh(self) -> bool {
        matches!(self, Mode::AdaptiveMeshFull | Mode::FullyAdaptive)
    }

    pub fn adaptive_sampling(self) -> bool {
        matches!(self, Mode::FixedMeshAdaptiveSampling | Mode::FullyAdaptive)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FixedMeshFull => "fixed-mesh-full",
            Mode::FixedMeshAdaptiveSampling => "fixed-mesh-adaptive-sampling",
            Mode::AdaptiveMeshFull => "adaptive-mesh-full",
            Mode::FullyAdaptive => "fully-adaptive",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown mode '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Controller for the number of fictitious HJ steps per iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HjSteps {
    pub initial: usize,
    pub min: usize,
    pub max: usize,
    /// Accepted decreases in a row before one more step is allowed.
    pub grow_after: usize,
}

impl Default for HjSteps {
    fn default() -> Self {
        HjSteps {
            initial: 3,
            min: 1,
            max: 10,
            grow_after: 3,
        }
    }
}

/// Full run configuration. Missing JSON keys take the defaults below, which
/// reproduce the full-scale benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub extents: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Lower end of the clamped segment on `x = 0`.
    pub dirichlet_y_min: f64,
    pub load_point: [f64; 2],
    pub load_magnitude: f64,
    pub mean_angle_deg: f64,
    pub kappa_deg: f64,
    pub correlation_length: [f64; 2],
    pub energy_target: f64,
    pub m_max: usize,
    pub young: f64,
    pub poisson: f64,
    pub epsilon: f64,
    pub penalty: f64,
    pub volume_target: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub nu_it: f64,
    pub nu_ot: f64,
    pub initial_samples: usize,
    /// Sample count of the full-sampling modes.
    pub full_samples: usize,
    pub n_max: usize,
    pub max_iters: usize,
    pub tol_eta: f64,
    pub h_star: f64,
    pub theta_mark: f64,
    /// Refinement passes allowed within one iteration.
    pub max_refinements: usize,
    /// Vector DoF ceiling for refinement; 0 disables the cap.
    pub max_dofs: usize,
    pub mode: Mode,
    pub stopping: StoppingRule,
    pub hj_steps: HjSteps,
    /// Reinitialize ψ every this many iterations; 0 disables it.
    pub reinit_every: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Mesh snapshot cadence in iterations; 0 writes none.
    pub snapshot_every: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            extents: [1.0, 2.0],
            nx: 60,
            ny: 120,
            dirichlet_y_min: 1.5,
            load_point: [1.0, 0.0],
            load_magnitude: 10.0,
            mean_angle_deg: 90.0,
            kappa_deg: 10.0,
            correlation_length: [1.0, 1.0],
            energy_target: 0.9,
            m_max: 100,
            young: 1.0,
            poisson: 0.3,
            epsilon: 1e-3,
            penalty: 500.0,
            volume_target: 0.3,
            tau1: 1e3,
            tau2: 1.0,
            alpha0: 0.01,
            alpha_min: 1e-4,
            nu_it: 0.6,
            nu_ot: 5.8,
            initial_samples: 2,
            full_samples: 10,
            n_max: 64,
            max_iters: 100,
            tol_eta: 0.1,
            h_star: 1.0 / 180.0,
            theta_mark: 0.3,
            max_refinements: 10,
            max_dofs: 0,
            mode: Mode::FullyAdaptive,
            stopping: StoppingRule::default(),
            hj_steps: HjSteps::default(),
            reinit_every: 5,
            seed: 20240917,
            output: None,
            snapshot_every: 0,
        }
    }
}

impl Config {
    /// Reduced problem that finishes in minutes on one core.
    pub fn desk() -> Config {
        Config {
            nx: 30,
            ny: 60,
            m_max: 25,
            n_max: 16,
            max_iters: 60,
            h_star: 1.0 / 90.0,
            max_refinements: 3,
            max_dofs: 4 * 2 * (31 * 61 + 30 * 60),
            ..Config::default()
        }
    }

    /// Named starting point: `paper` or `desk`.
    pub fn preset(name: &str) -> Result<Config> {
        match name {
            "paper" => Ok(Config::default()),
            "desk" => Ok(Config::desk()),
            _ => Err(Error::Config(format!("unknown preset '{name}', expected paper or desk"))),
        }
    }

    /// Parses JSON; a top-level `"preset"` key selects the base the other
    /// keys override.
    pub fn from_json(text: &str) -> Result<Config> {
        let mut value: Value = serde_json::from_str(text)?;
        let base = match value.as_object_mut().and_then(|o| o.remove("preset")) {
            Some(Value::String(name)) => Config::preset(&name)?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
            None => Config::default(),
        };
        let mut merged = serde_json::to_value(base)?;
        merge(&mut merged, value);
        let cfg: Config = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_json(&text)
    }

    /// Applies `RSO_<KEY>` overrides for top-level keys. Values are parsed as
    /// JSON and fall back to plain strings.
    pub fn with_env_overrides<I>(self, vars: I) -> Result<Config>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut value = serde_json::to_value(&self)?;
        let obj = value.as_object_mut().expect("config serializes to an object");
        for (key, raw) in vars {
            let Some(name) = key.strip_prefix("RSO_") else {
                continue;
            };
            let name = name.to_ascii_lowercase();
            if !obj.contains_key(&name) {
                log::debug!("ignoring unknown override {key}");
                continue;
            }
            let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
            obj.insert(name, parsed);
        }
        let cfg: Config = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("environment override rejected: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.nx == 0 || self.ny == 0 {
            return fail(format!("grid must have cells, got {} x {}", self.nx, self.ny));
        }
        if !(self.extents[0] > 0.0 && self.extents[1] > 0.0) {
            return fail("extents must be positive".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.volume_target > 0.0 && self.volume_target < 1.0) {
            return fail(format!("volume target must lie in (0, 1), got {}", self.volume_target));
        }
        if !(self.penalty > 0.0 && self.tau1 > 0.0 && self.tau2 > 0.0) {
            return fail("penalty and deformation constants must be positive".into());
        }
        if !(0.0 < self.alpha_min && self.alpha_min <= self.alpha0) {
            return fail(format!("need 0 < alpha_min <= alpha0, got {} and {}", self.alpha_min, self.alpha0));
        }
        if !(self.nu_it > 0.0 && self.nu_ot > 0.0) {
            return fail("test constants must be positive".into());
        }
        if self.initial_samples < 2 || self.full_samples < 2 {
            return fail("sample sets need at least two members".into());
        }
        if self.n_max < self.initial_samples {
            return fail(format!("n_max {} below the initial sample size", self.n_max));
        }
        if !(self.theta_mark > 0.0 && self.theta_mark <= 1.0) {
            return fail(format!("theta_mark must lie in (0, 1], got {}", self.theta_mark));
        }
        if !(self.energy_target >= 0.0 && self.energy_target < 1.0) || self.m_max == 0 {
            return fail("energy target must lie in [0, 1) with m_max >= 1".into());
        }
        if self.kappa_deg < 0.0 {
            return fail("kappa_deg must be nonnegative".into());
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive".into());
        }
        let h = self.hj_steps;
        if !(1 <= h.min && h.min <= h.initial && h.initial <= h.max) {
            return fail("fictitious steps need 1 <= min <= initial <= max".into());
        }
        Ok(())
    }

    /// Sample count at the first iteration.
    pub fn first_sample_size(&self) -> usize {
        if self.mode.adaptive_sampling() {
            self.initial_samples
        } else {
            self.full_samples
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_benchmark() {
        let c = Config::default();
        assert_eq!((c.nx, c.ny, c.initial_samples), (60, 120, 2));
        assert_eq!((c.epsilon, c.volume_target, c.penalty), (1e-3, 0.3, 500.0));
        assert_eq!((c.nu_it, c.nu_ot, c.tau1, c.tau2), (0.6, 5.8, 1e3, 1.0));
        assert_eq!((c.alpha0, c.tol_eta, c.h_star), (0.01, 0.1, 1.0 / 180.0));
        c.validate().unwrap();
        let d = Config::desk();
        assert_eq!((d.nx, d.ny, d.m_max, d.n_max, d.max_iters), (30, 60, 25, 16, 60));
    }

    #[test]
    fn json_round_trip_and_partial() {
        let c = Config::desk();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
        let p = Config::from_json(r#"{"preset": "desk", "kappa_deg": 0, "mode": "fixed-mesh-full", "stopping": {"window": 3}}"#).unwrap();
        assert_eq!((p.nx, p.kappa_deg, p.mode, p.stopping.window), (30, 0.0, Mode::FixedMeshFull, 3));
        assert_eq!(p.stopping.rel_tol, 0.01);
        assert!(Config::from_json(r#"{"nx": 0}"#).is_err());
        assert!(Config::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn env_overrides() {
        let vars = vec![
            ("RSO_SEED".to_string(), "7".to_string()),
            ("RSO_MODE".to_string(), "adaptive-mesh-full".to_string()),
            ("RSO_UNKNOWN".to_string(), "1".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        let c = Config::desk().with_env_overrides(vars).unwrap();
        assert_eq!((c.seed, c.mode), (7, Mode::AdaptiveMeshFull));
        let bad = vec![("RSO_NX".to_string(), "many".to_string())];
        assert!(Config::desk().with_env_overrides(bad).is_err());
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), Value::String(m.as_str().into()));
        }
        assert!("bogus".parse::<Mode>().is_err());
    }
}
