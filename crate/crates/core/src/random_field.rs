//! Truncated Karhunen–Loève expansions of fields with separable exponential
//! covariance `exp(-|x1 - y1| / l1 - |x2 - y2| / l2)` on a rectangle.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Eigenpair of the exponential kernel on `[origin, origin + 2 * half_length]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenpair1d {
    pub value: f64,
    pub frequency: f64,
    pub parity: Parity,
    pub origin: f64,
    pub half_length: f64,
    norm: f64,
}

impl Eigenpair1d {
    fn new(ell: f64, origin: f64, half_length: f64, w: f64, parity: Parity) -> Self {
        let s = (2.0 * w * half_length).sin() / (2.0 * w);
        let norm_sq = match parity {
            Parity::Even => half_length + s,
            Parity::Odd => half_length - s,
        };
        Eigenpair1d {
            value: 2.0 * ell / (1.0 + ell * ell * w * w),
            frequency: w,
            parity,
            origin,
            half_length,
            norm: norm_sq.sqrt(),
        }
    }

    /// L²-normalized eigenfunction.
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.frequency * (x - self.origin - self.half_length);
        match self.parity {
            Parity::Even => t.cos() / self.norm,
            Parity::Odd => t.sin() / self.norm,
        }
    }

    pub fn interval_length(&self) -> f64 {
        2.0 * self.half_length
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numeric(format!(
            "root not bracketed in [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid.abs().max(1.0) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First `count` eigenpairs of `exp(-|x - y| / ell)` on an interval of length
/// `a` starting at the origin, ordered by decreasing eigenvalue.
pub fn eigen_1d_exponential(ell: f64, a: f64, count: usize) -> Result<Vec<Eigenpair1d>> {
    eigen_1d_on(ell, 0.0, a, count)
}

/// As [`eigen_1d_exponential`] on `[origin, origin + a]`.
pub fn eigen_1d_on(ell: f64, origin: f64, a: f64, count: usize) -> Result<Vec<Eigenpair1d>> {
    if !(ell > 0.0 && a > 0.0 && ell.is_finite() && a.is_finite()) {
        return Err(Error::Parameter(format!(
            "correlation length and interval length must be positive, got {ell}, {a}"
        )));
    }
    let half = 0.5 * a;
    let c = 1.0 / ell;
    let pi = std::f64::consts::PI;
    let mut out = Vec::with_capacity(count);
    // In t = w * half, roots alternate: even in (iπ, iπ + π/2), odd in (iπ - π/2, iπ).
    for n in 0..count {
        let i = (n / 2 + n % 2) as f64;
        let (parity, lo, hi) = if n % 2 == 0 {
            (Parity::Even, i * pi, i * pi + 0.5 * pi)
        } else {
            (Parity::Odd, i * pi - 0.5 * pi, i * pi)
        };
        let t = match parity {
            Parity::Even => bisect(|t| c * t.cos() - (t / half) * t.sin(), lo, hi)?,
            Parity::Odd => bisect(|t| (t / half) * t.cos() + c * t.sin(), lo, hi)?,
        };
        out.push(Eigenpair1d::new(ell, origin, half, t / half, parity));
    }
    Ok(out)
}

/// Tensor-product mode `b(x, y) = e_x[ix](x) * e_y[iy](y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode2d {
    pub value: f64,
    pub ix: usize,
    pub iy: usize,
}

/// Result of [`tensorize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Tensorized {
    pub modes: Vec<Mode2d>,
    /// False when `m_max` modes did not reach the energy target.
    pub target_reached: bool,
    /// Captured fraction of the exact trace.
    pub energy_ratio: f64,
}

/// Product modes sorted by decreasing eigenvalue and truncated at the first
/// count capturing `energy_target` of the exact trace, at most `m_max`.
pub fn tensorize(
    eig_x: &[Eigenpair1d],
    eig_y: &[Eigenpair1d],
    energy_target: f64,
    m_max: usize,
) -> Result<Tensorized> {
    if eig_x.is_empty() || eig_y.is_empty() || m_max == 0 {
        return Err(Error::Parameter("tensorize needs at least one mode".into()));
    }
    if !(0.0..=1.0).contains(&energy_target) {
        return Err(Error::Parameter(format!(
            "energy target must lie in [0, 1], got {energy_target}"
        )));
    }
    let total = eig_x[0].interval_length() * eig_y[0].interval_length();
    let mut all: Vec<Mode2d> = eig_x
        .iter()
        .enumerate()
        .flat_map(|(ix, ex)| {
            eig_y.iter().enumerate().map(move |(iy, ey)| Mode2d {
                value: ex.value * ey.value,
                ix,
                iy,
            })
        })
        .collect();
    all.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap()
            .then(a.ix.cmp(&b.ix))
            .then(a.iy.cmp(&b.iy))
    });
    let mut acc = 0.0;
    let mut modes = Vec::new();
    let mut reached = false;
    for m in all.into_iter().take(m_max) {
        acc += m.value;
        modes.push(m);
        if acc >= energy_target * total {
            reached = true;
            break;
        }
    }
    if !reached {
        log::warn!(
            "energy target {energy_target} not reached with {} modes ({:.4})",
            modes.len(),
            acc / total
        );
    }
    Ok(Tensorized {
        modes,
        target_reached: reached,
        energy_ratio: acc / total,
    })
}

pub type MeanFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Truncated expansion `mean(x) + κ Σ √λ_k b_k(x) ξ_k`.
#[derive(Clone)]
pub struct KlField {
    mean: MeanFn,
    kappa: f64,
    ell: [f64; 2],
    eig_x: Vec<Eigenpair1d>,
    eig_y: Vec<Eigenpair1d>,
    truncation: Tensorized,
}

impl fmt::Debug for KlField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KlField")
            .field("kappa", &self.kappa)
            .field("ell", &self.ell)
            .field("modes", &self.truncation.modes.len())
            .field("energy_ratio", &self.truncation.energy_ratio)
            .finish()
    }
}

impl KlField {
    /// Expansion on `[0, lx] x [0, ly]` keeping at most `m_max` modes.
    pub fn new(
        mean: MeanFn,
        kappa: f64,
        ell: [f64; 2],
        extents: [f64; 2],
        energy_target: f64,
        m_max: usize,
    ) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Parameter(format!(
                "standard deviation must be nonnegative, got {kappa}"
            )));
        }
        let eig_x = eigen_1d_exponential(ell[0], extents[0], m_max)?;
        let eig_y = eigen_1d_exponential(ell[1], extents[1], m_max)?;
        let truncation = tensorize(&eig_x, &eig_y, energy_target, m_max)?;
        Ok(KlField {
            mean,
            kappa,
            ell,
            eig_x,
            eig_y,
            truncation,
        })
    }

    /// Field with constant mean.
    pub fn constant_mean(
        mean: f64,
        kappa: f64,
        ell: [f64; 2],
        extents: [f64; 2],
        energy_target: f64,
        m_max: usize,
    ) -> Result<Self> {
        KlField::new(Arc::new(move |_| mean), kappa, ell, extents, energy_target, m_max)
    }

    pub fn n_modes(&self) -> usize {
        self.truncation.modes.len()
    }

    pub fn modes(&self) -> &[Mode2d] {
        &self.truncation.modes
    }

    pub fn truncation(&self) -> &Tensorized {
        &self.truncation
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mean(&self, p: Point) -> f64 {
        (self.mean)(p)
    }

    /// Product eigenfunction of mode `k`.
    pub fn mode_function(&self, k: usize, p: Point) -> f64 {
        let m = self.truncation.modes[k];
        self.eig_x[m.ix].eval(p[0]) * self.eig_y[m.iy].eval(p[1])
    }

    /// Pointwise variance `κ² Σ λ_k b_k(x)²` of the truncated field.
    pub fn variance(&self, p: Point) -> f64 {
        self.kappa.powi(2)
            * (0..self.n_modes())
                .map(|k| self.truncation.modes[k].value * self.mode_function(k, p).powi(2))
                .sum::<f64>()
    }

    /// Realization at each point.
    pub fn realize(&self, xi: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        if xi.len() != self.n_modes() {
            return Err(Error::Dimension {
                expected: self.n_modes(),
                found: xi.len(),
            });
        }
        Ok(points
            .iter()
            .map(|&p| {
                let s: f64 = self
                    .truncation
                    .modes
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m.value.sqrt() * self.mode_function(k, p) * xi[k])
                    .sum();
                self.mean(p) + self.kappa * s
            })
            .collect())
    }

    /// Audit table with header `k,lambda,ix,iy` (1-based mode indices).
    pub fn eigen_table_csv(&self) -> String {
        let mut s = String::from("k,lambda,ix,iy\n");
        for (k, m) in self.truncation.modes.iter().enumerate() {
            s.push_str(&format!("{},{:.17e},{},{}\n", k + 1, m.value, m.ix + 1, m.iy + 1));
        }
        s
    }
}

/// Standard-normal vector of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleVector {
    pub seed: u64,
    pub index: usize,
    pub xi: Vec<f64>,
}

/// Draw `ξ_mode` of sample `index`; a pure function of its three arguments.
pub fn normal_draw(seed: u64, index: usize, mode: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    // 64 words per mode leave ample room for ziggurat rejections.
    rng.set_word_pos(mode as u128 * 64);
    rng.sample(StandardNormal)
}

/// Sample `index` with `m` modes starting at mode offset `first_mode`.
pub fn sample_vector(seed: u64, index: usize, m: usize, first_mode: usize) -> SampleVector {
    SampleVector {
        seed,
        index,
        xi: (0..m).map(|k| normal_draw(seed, index, first_mode + k)).collect(),
    }
}

/// Samples `0..count`; growing `count` preserves earlier samples.
pub fn sample(seed: u64, m: usize, count: usize) -> Result<Vec<SampleVector>> {
    if m == 0 {
        return Err(Error::Parameter("sample dimension must be at least 1".into()));
    }
    Ok((0..count).map(|i| sample_vector(seed, i, m, 0)).collect())
}
