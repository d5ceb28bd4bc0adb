//! Reprojection laws, threshold relations between the consistency and
//! non-triviality parameters, and the long-time DHP distribution.

pub mod empirical;
mod percentiles;

pub use percentiles::{
    estimate_percentiles, sample_extension_statistics, ExtensionStatistics, PercentileConfig, PercentileTable,
};

use std::fmt;

use num_bigint::{BigInt, Sign};
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {x}")))
    }
}

fn check_rank(r: usize) -> Result<()> {
    if r >= 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rank must be at least 2, got {r}")))
    }
}

/// CDF of a `Beta(1, r-1)` variable: `1 - (1 - lambda)^(r-1)`.
///
/// This is the law of the squared reprojection statistic
/// `|Z_1|^2 / sum_k |Z_k|^2` over `r` independent complex normals.
pub fn reprojection_beta_cdf(lambda: f64, r: usize) -> Result<f64> {
    check_unit_interval("lambda", lambda)?;
    check_rank(r)?;
    Ok(-((r - 1) as f64 * (-lambda).ln_1p()).exp_m1())
}

/// The epsilon at which a reprojection onto a rank-`r` complement happens
/// with probability `q`.
pub fn epsilon_for_reprojection_prob(q: f64, r: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("q must lie in [0, 1), got {q}")));
    }
    check_rank(r)?;
    Ok((-((-q).ln_1p() / (r - 1) as f64).exp_m1()).sqrt())
}

/// Smallest absolute delta that suppresses trivial projections onto a rank-`r`
/// null space of the initial state, `eps^2 (r + 1) |P_n psi|^2`.
pub fn initial_reprojection_floor(epsilon: f64, r: usize, support_norm_sq: f64) -> f64 {
    epsilon * epsilon * (r + 1) as f64 * support_norm_sq
}

/// Relative-delta form of [`initial_reprojection_floor`].
pub fn initial_reprojection_floor_relative(epsilon: f64, r: usize) -> f64 {
    epsilon * epsilon * (r + 1) as f64
}

/// Which ratio of the absolute-criterion parameters is being fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbsoluteRegime {
    /// Both children of order-one norm: fixes `eps / sqrt(delta)`.
    OrderOneNorms,
    /// Both children of probability `delta`: fixes `eps / delta`.
    DeltaNorms,
}

impl AbsoluteRegime {
    pub fn ratio_label(self) -> &'static str {
        match self {
            AbsoluteRegime::OrderOneNorms => "epsilon/sqrt(delta)",
            AbsoluteRegime::DeltaNorms => "epsilon/delta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsoluteThreshold {
    pub regime: AbsoluteRegime,
    pub ratio: f64,
}

impl fmt::Display for AbsoluteThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.regime.ratio_label(), self.ratio)
    }
}

/// `d^{-1/2} sqrt(-log(1 - q))`, the parameter ratio for which reprojections
/// under the absolute criterion happen with probability about `q`.
pub fn absolute_threshold_ratio(q: f64, d: usize, regime: AbsoluteRegime) -> Result<AbsoluteThreshold> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("q must lie in [0, 1), got {q}")));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {d}")));
    }
    Ok(AbsoluteThreshold {
        regime,
        ratio: (-(-q).ln_1p() / d as f64).sqrt(),
    })
}

/// `P(max_i |<b_i|u>|^2 < lambda)` for `k` orthonormal `b_i` and a uniform
/// unit vector `u` in `C^d`:
/// `sum_m (-1)^m C(k, m) (1 - m lambda)^(d-1) [m lambda < 1]`.
///
/// The alternating sum cancels catastrophically in floating point, so it is
/// evaluated exactly on the dyadic rational `lambda`.
pub fn consistent_set_cdf(lambda: f64, d: usize, k: usize) -> Result<f64> {
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    if d < 2 || k < 1 {
        return Err(Error::InvalidArgument(format!("need d >= 2 and k >= 1, got d = {d}, k = {k}")));
    }
    if lambda >= 1.0 {
        return Ok(1.0);
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    // lambda = a / 2^e exactly.
    let (mantissa, exponent, _) = lambda.integer_decode();
    let shift = mantissa.trailing_zeros();
    let a = BigInt::from(mantissa >> shift);
    let e = (-(exponent as i64) - shift as i64) as usize;
    let n = (d - 1) as u32;
    let one = BigInt::one() << e;

    let mut sum = BigInt::zero();
    let mut binom = BigInt::one();
    for m in 0..=k {
        if m > 0 {
            binom = binom * (k - m + 1) / m;
        }
        let base = &one - &a * m;
        if !base.is_positive() {
            break;
        }
        let term = &binom * base.pow(n);
        if m % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(dyadic_to_f64(&sum, e * n as usize).clamp(0.0, 1.0))
}

/// `x / 2^scale` rounded to f64.
fn dyadic_to_f64(x: &BigInt, scale: usize) -> f64 {
    if x.sign() == Sign::NoSign {
        return 0.0;
    }
    let bits = x.bits() as i64;
    let drop = (bits - 62).max(0);
    let top = (x >> drop as usize).to_f64().expect("62-bit integer fits in f64");
    let mut exp = drop - scale as i64;
    let mut v = top;
    // Scale in two halves so neither power under- or overflows on its own.
    let half = exp / 2;
    v *= 2f64.powi(half as i32);
    exp -= half;
    v * 2f64.powi(exp as i32)
}

/// Closed-form epsilon estimates for the long-time projection probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticEpsilon {
    /// `sqrt(-1/d log{1 - [1 - (1-p)^(1/n_p)]^(1/k)})`
    pub exact: f64,
    /// `sqrt(log(k) / d)`
    pub large_k: f64,
}

pub fn asymptotic_epsilon(d: usize, k: usize, p: f64, n_p: usize) -> Result<AsymptoticEpsilon> {
    if d < 1 || k < 1 || n_p < 1 {
        return Err(Error::InvalidArgument("d, k and n_p must be at least 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
    }
    let d = d as f64;
    let inner = -((-p).ln_1p() / n_p as f64).exp_m1();
    let inner_k = (inner.ln() / k as f64).exp();
    let exact = (-(-inner_k).ln_1p() / d).sqrt();
    Ok(AsymptoticEpsilon {
        exact,
        large_k: ((k as f64).ln() / d).sqrt(),
    })
}

/// Inputs to [`ThresholdReport::evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdInputs {
    /// Target reprojection probability.
    pub q: f64,
    /// Rank of the complementary projector.
    pub r: usize,
    /// Hilbert space dimension.
    pub d: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// `|P_n psi|^2` for the initial-state bound.
    pub support_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub inputs: ThresholdInputs,
    /// Probability that a reprojection passes the criterion at this epsilon.
    pub reprojection_probability: f64,
    /// Epsilon giving reprojection probability `q`.
    pub epsilon_for_q: f64,
    pub initial_floor_absolute: f64,
    pub initial_floor_relative: f64,
    /// Whether `delta` clears the absolute initial floor.
    pub delta_suppresses_initial: bool,
    pub absolute_order_one: AbsoluteThreshold,
    pub absolute_delta_norms: AbsoluteThreshold,
}

impl ThresholdReport {
    pub fn evaluate(inputs: ThresholdInputs) -> Result<Self> {
        if inputs.epsilon < 0.0 || inputs.delta < 0.0 || !(inputs.support_norm_sq > 0.0 && inputs.support_norm_sq <= 1.0) {
            return Err(Error::InvalidArgument(
                "epsilon and delta must be non-negative and the support norm in (0, 1]".into(),
            ));
        }
        let floor = initial_reprojection_floor(inputs.epsilon, inputs.r, inputs.support_norm_sq);
        Ok(Self {
            reprojection_probability: reprojection_beta_cdf((inputs.epsilon * inputs.epsilon).min(1.0), inputs.r)?,
            epsilon_for_q: epsilon_for_reprojection_prob(inputs.q, inputs.r)?,
            initial_floor_absolute: floor,
            initial_floor_relative: initial_reprojection_floor_relative(inputs.epsilon, inputs.r),
            delta_suppresses_initial: inputs.delta > floor,
            absolute_order_one: absolute_threshold_ratio(inputs.q, inputs.d, AbsoluteRegime::OrderOneNorms)?,
            absolute_delta_norms: absolute_threshold_ratio(inputs.q, inputs.d, AbsoluteRegime::DeltaNorms)?,
            inputs,
        })
    }
}

impl fmt::Display for ThresholdReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = &self.inputs;
        writeln!(f, "q = {}, r = {}, d = {}, epsilon = {}, delta = {}", i.q, i.r, i.d, i.epsilon, i.delta)?;
        writeln!(f, "reprojection probability at epsilon: {:.6}", self.reprojection_probability)?;
        writeln!(f, "epsilon for reprojection probability q: {:.6}", self.epsilon_for_q)?;
        writeln!(f, "initial delta floor (absolute): {:.6e}", self.initial_floor_absolute)?;
        writeln!(f, "initial delta floor (relative): {:.6e}", self.initial_floor_relative)?;
        writeln!(f, "delta clears initial floor: {}", self.delta_suppresses_initial)?;
        writeln!(f, "absolute, order-one norms: {}", self.absolute_order_one)?;
        write!(f, "absolute, delta norms: {}", self.absolute_delta_norms)
    }
}
