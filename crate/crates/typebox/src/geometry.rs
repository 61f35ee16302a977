//! Box geometry: construction from parameters, hard and Gumbel-soft
//! intersections, volumes and conditional probabilities.
//!
//! Volume arithmetic at realistic dimensionality (d > 8) runs in log space;
//! the linear-space entry points exist for low-dimensional testing where the
//! product does not underflow.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant γ.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Probabilities emitted by [`conditional_prob`] are clamped into
/// [`PROB_EPS`, 1 − `PROB_EPS`] so that BCE losses stay finite.
pub const PROB_EPS: f64 = 1e-7;

/// An axis-aligned hyperrectangle, one (min, max) pair per dimension.
///
/// Boxes produced by [`box_from_params`] satisfy `0 < min < max < 1`
/// componentwise. Raw intersection results may have `min >= max` in some
/// coordinate; such a box has hard volume zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxEmbedding {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoxEmbedding {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch { left: min.len(), right: max.len() });
        }
        if min.is_empty() {
            return Err(Error::InvalidParameter("zero-dimension box".into()));
        }
        if min.iter().chain(max.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite box corner".into()));
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Edge length in dimension `i`, never negative.
    pub fn edge(&self, i: usize) -> f64 {
        (self.max[i] - self.min[i]).max(0.0)
    }
}

/// Trainable center/offset parameterization of a box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxParams {
    pub center: Vec<f64>,
    pub offset: Vec<f64>,
}

/// Gumbel-box temperatures. `beta` is the Gumbel temperature β of the
/// intersection relaxation; `softplus_inv_temp` is the inverse temperature t
/// of the softplus in the volume approximation. The Euler–Mascheroni constant
/// is fixed and never trainable.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GumbelConfig {
    pub beta: f64,
    pub softplus_inv_temp: f64,
    #[serde(default = "default_gamma")]
    pub euler_gamma: f64,
}

fn default_gamma() -> f64 {
    EULER_GAMMA
}

impl GumbelConfig {
    pub fn new(beta: f64, softplus_inv_temp: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        if !(softplus_inv_temp > 0.0) || !softplus_inv_temp.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "softplus inverse temperature must be positive, got {softplus_inv_temp}"
            )));
        }
        Ok(Self { beta, softplus_inv_temp, euler_gamma: EULER_GAMMA })
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))`, stable over the whole real line.
pub fn softplus1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus1`], i.e. the logistic function.
pub fn softplus1_deriv(x: f64) -> f64 {
    sigmoid(x)
}

/// Tempered softplus `ln(1 + exp(x t)) / t`.
pub fn softplus_t(x: f64, t: f64) -> f64 {
    softplus1(x * t) / t
}

/// `ln(softplus_t(x, t))`, stable for large negative arguments where the
/// softplus itself underflows: for `x t < -40`, `ln ln1p(e^u) ≈ u`.
pub fn log_softplus_t(x: f64, t: f64) -> f64 {
    let u = x * t;
    if u < -40.0 {
        u - t.ln()
    } else {
        softplus1(u).ln() - t.ln()
    }
}

/// Fused two-argument logsumexp with max subtraction.
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

// Corners are kept strictly inside the open unit interval and strictly
// ordered even when the softplus half-width rounds to zero in f64.
const CORNER_EPS: f64 = 1e-12;

/// Build a valid box from center/offset parameters: `min = σ(c − softplus(o))`,
/// `max = σ(c + softplus(o))` with unit softplus temperature.
pub fn box_from_params(params: &BoxParams) -> Result<BoxEmbedding> {
    if params.center.len() != params.offset.len() {
        return Err(Error::DimensionMismatch {
            left: params.center.len(),
            right: params.offset.len(),
        });
    }
    if params.center.is_empty() {
        return Err(Error::InvalidParameter("zero-dimension box parameters".into()));
    }
    if params.center.iter().chain(params.offset.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite box parameters".into()));
    }
    let d = params.center.len();
    let mut min = Vec::with_capacity(d);
    let mut max = Vec::with_capacity(d);
    for i in 0..d {
        let half = softplus1(params.offset[i]);
        let mut lo = sigmoid(params.center[i] - half).clamp(CORNER_EPS, 1.0 - CORNER_EPS);
        let mut hi = sigmoid(params.center[i] + half).clamp(CORNER_EPS, 1.0 - CORNER_EPS);
        if lo >= hi {
            let mid = 0.5 * (lo + hi);
            lo = mid - 1e-15;
            hi = mid + 1e-15;
        }
        min.push(lo);
        max.push(hi);
    }
    BoxEmbedding::new(min, max)
}

/// Product of clamped edge lengths.
pub fn hard_volume(b: &BoxEmbedding) -> f64 {
    (0..b.dim()).map(|i| b.edge(i)).product()
}

/// Sum of log edge lengths; `-inf` for zero-volume boxes.
pub fn log_hard_volume(b: &BoxEmbedding) -> f64 {
    (0..b.dim()).map(|i| b.edge(i).ln()).sum()
}

/// Coordinate-wise hard intersection. The result may be degenerate
/// (`min >= max`) in some coordinate when the boxes are disjoint there.
pub fn hard_intersection(x: &BoxEmbedding, y: &BoxEmbedding) -> Result<BoxEmbedding> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { left: x.dim(), right: y.dim() });
    }
    let min: Vec<f64> = x.min.iter().zip(&y.min).map(|(a, b)| a.max(*b)).collect();
    let max: Vec<f64> = x.max.iter().zip(&y.max).map(|(a, b)| a.min(*b)).collect();
    Ok(BoxEmbedding { min, max })
}

/// Gumbel-soft intersection:
/// `z_m = β ln(e^{x_m/β} + e^{y_m/β})`, `z_M = −β ln(e^{−x_M/β} + e^{−y_M/β})`.
pub fn gumbel_intersection(
    x: &BoxEmbedding,
    y: &BoxEmbedding,
    cfg: &GumbelConfig,
) -> Result<BoxEmbedding> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { left: x.dim(), right: y.dim() });
    }
    let b = cfg.beta;
    let min: Vec<f64> = x
        .min
        .iter()
        .zip(&y.min)
        .map(|(a, c)| b * logsumexp2(a / b, c / b))
        .collect();
    let max: Vec<f64> = x
        .max
        .iter()
        .zip(&y.max)
        .map(|(a, c)| -b * logsumexp2(-a / b, -c / b))
        .collect();
    Ok(BoxEmbedding { min, max })
}

/// Log of the expected Gumbel-box volume:
/// `Σ_i ln( β · softplus_t((max_i − min_i)/β − 2γ) )`.
///
/// The per-dimension β factor makes the expected edge length converge to the
/// hard edge length as β → 0; it cancels in conditional probabilities.
pub fn log_soft_volume(b: &BoxEmbedding, cfg: &GumbelConfig) -> f64 {
    let t = cfg.softplus_inv_temp;
    let ln_beta = cfg.beta.ln();
    (0..b.dim())
        .map(|i| {
            let arg = (b.max[i] - b.min[i]) / cfg.beta - 2.0 * cfg.euler_gamma;
            ln_beta + log_softplus_t(arg, t)
        })
        .sum()
}

/// Linear-space expected volume; intended for d ≤ 8 where the product does
/// not underflow.
pub fn soft_volume(b: &BoxEmbedding, cfg: &GumbelConfig) -> f64 {
    let t = cfg.softplus_inv_temp;
    (0..b.dim())
        .map(|i| {
            let arg = (b.max[i] - b.min[i]) / cfg.beta - 2.0 * cfg.euler_gamma;
            cfg.beta * softplus_t(arg, t)
        })
        .product()
}

/// `P(y | x) = Vol(x ∩ y) / Vol(x)` under the Gumbel relaxation, clamped into
/// [`PROB_EPS`, 1 − `PROB_EPS`]. The soft ratio can exceed one, hence the
/// clamp.
pub fn conditional_prob(x: &BoxEmbedding, y: &BoxEmbedding, cfg: &GumbelConfig) -> Result<f64> {
    let inter = gumbel_intersection(x, y, cfg)?;
    let log_ratio = log_soft_volume(&inter, cfg) - log_soft_volume(x, cfg);
    Ok(log_ratio.exp().clamp(PROB_EPS, 1.0 - PROB_EPS))
}
