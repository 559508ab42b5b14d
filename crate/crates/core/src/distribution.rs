//! Probability laws on `[0, ∞)` used for inter-arrival times, service
//! requirements, patience (initial lead time) and the initial lead-time profile.

use alloc::format;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::math::{self, exp, exp_neg_diff, pow, unit_f64};

/// Absolute tolerance for tail integrals without a closed form.
pub const TAIL_INTEGRAL_TOL: f64 = 1e-10;

/// A parametric law on `[0, ∞)`. Construct through the checked constructors
/// or call [`DistributionSpec::validate`] after building a variant by hand.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    Weibull { shape: f64, scale: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    Deterministic { value: f64 },
    /// Piecewise-linear CDF through `(points[i], cdf[i])`; zero to the left
    /// of the first knot and one to the right of the last.
    EmpiricalGrid { points: Vec<f64>, cdf: Vec<f64> },
}

/// Result of [`DistributionSpec::y_star`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YStar {
    Finite(f64),
    /// Used when the arrival rate does not exceed the service rate.
    Infinite,
}

impl YStar {
    pub fn value(self) -> f64 {
        match self {
            YStar::Finite(y) => y,
            YStar::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, YStar::Finite(_))
    }
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `∫_a^b exp(-(u/scale)^shape) du`. The integrand is cut off where it
/// drops below `e^{-60}` and split on geometric pieces so that Simpson copes
/// with the singular derivative at 0 when `shape < 1`.
fn weibull_tail_integral(shape: f64, scale: f64, a: f64, b: f64) -> Result<f64> {
    let cutoff = scale * math::pow(60.0, 1.0 / shape);
    let b = b.min(cutoff);
    if b <= a {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(24);
    cuts.push(a);
    let mut c = scale * 1e-12;
    while c < b {
        if c > a {
            cuts.push(c);
        }
        c *= 10.0;
    }
    cuts.push(b);
    let tol = TAIL_INTEGRAL_TOL / cuts.len() as f64;
    let tail = |u: f64| exp(-math::pow(u / scale, shape));
    cuts.windows(2)
        .map(|w| math::adaptive_simpson(tail, w[0], w[1], tol))
        .sum()
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = DistributionSpec::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = DistributionSpec::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        let d = DistributionSpec::Weibull { shape, scale };
        d.validate()?;
        Ok(d)
    }

    /// Weights are normalized to sum to one.
    pub fn hyper_exponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        let d = DistributionSpec::HyperExponential {
            weights: weights.iter().map(|w| w / total).collect(),
            rates,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let d = DistributionSpec::Deterministic { value };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical_grid(points: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        let d = DistributionSpec::EmpiricalGrid { points, cdf };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Exponential { rate } => positive_finite("exponential rate", *rate),
            DistributionSpec::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) {
                    return Err(Error::invalid(format!("uniform needs 0 <= lo < hi, got [{lo}, {hi}]")));
                }
                Ok(())
            }
            DistributionSpec::Weibull { shape, scale } => {
                positive_finite("weibull shape", *shape)?;
                positive_finite("weibull scale", *scale)
            }
            DistributionSpec::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::invalid("hyperexponential needs equally many weights and rates"));
                }
                for &w in weights {
                    positive_finite("hyperexponential weight", w)?;
                }
                for &r in rates {
                    positive_finite("hyperexponential rate", r)?;
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("hyperexponential weights sum to {total}")));
                }
                Ok(())
            }
            DistributionSpec::Deterministic { value } => {
                if value.is_finite() && *value >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("deterministic value must be >= 0, got {value}")))
                }
            }
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                if points.len() < 2 || points.len() != cdf.len() {
                    return Err(Error::invalid("empirical grid needs >= 2 knots and matching cdf values"));
                }
                if !points.iter().all(|p| p.is_finite()) || points[0] < 0.0 {
                    return Err(Error::invalid("empirical grid knots must be finite and >= 0"));
                }
                if points.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("empirical grid knots must be strictly increasing"));
                }
                if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::invalid("empirical cdf values must be nondecreasing in [0, 1]"));
                }
                if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
                    return Err(Error::invalid("empirical cdf must start at 0 and end at 1"));
                }
                Ok(())
            }
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => -libm::expm1(-rate * x),
            DistributionSpec::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            DistributionSpec::Weibull { shape, scale } => -libm::expm1(-pow(x / scale, *shape)),
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| -w * libm::expm1(-r * x))
                .sum::<f64>()
                .min(1.0),
            DistributionSpec::Deterministic { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                let n = points.len();
                if x <= points[0] {
                    return cdf[0];
                }
                if x >= points[n - 1] {
                    return 1.0;
                }
                let i = points.partition_point(|p| *p <= x);
                let (x0, x1) = (points[i - 1], points[i]);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                c0 + (c1 - c0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// `P(X > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            DistributionSpec::Exponential { rate } => exp(-rate * x),
            DistributionSpec::Weibull { shape, scale } => exp(-pow(x / scale, *shape)),
            DistributionSpec::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * exp(-r * x)).sum()
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistributionSpec::Weibull { shape, scale } => scale * math::gamma(1.0 + 1.0 / shape),
            DistributionSpec::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                // E[X] = ∫ tail; tail is 1 up to the first knot, then linear.
                let mut m = points[0];
                for i in 1..points.len() {
                    let t0 = 1.0 - cdf[i - 1];
                    let t1 = 1.0 - cdf[i];
                    m += 0.5 * (t0 + t1) * (points[i] - points[i - 1]);
                }
                m
            }
        }
    }

    /// `inf{x : G(x) = 1}`, infinite for unbounded laws.
    pub fn y_max(&self) -> f64 {
        match self {
            DistributionSpec::Uniform { hi, .. } => *hi,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                let i = cdf.iter().position(|c| *c >= 1.0).unwrap_or(points.len() - 1);
                points[i]
            }
            _ => f64::INFINITY,
        }
    }

    /// `inf{x : G(x) > 0}`.
    pub fn support_min(&self) -> f64 {
        match self {
            DistributionSpec::Uniform { lo, .. } => *lo,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                let i = cdf.iter().rposition(|c| *c <= 0.0).unwrap_or(0);
                points[i]
            }
            _ => 0.0,
        }
    }

    /// False only where the CDF has an atom.
    pub fn is_continuous_at(&self, x: f64) -> bool {
        match self {
            DistributionSpec::Deterministic { value } => x != *value,
            _ => true,
        }
    }

    /// Whether the CDF is strictly increasing on `(support_min, y_max)`.
    pub fn is_strictly_increasing_on_support(&self) -> bool {
        match self {
            DistributionSpec::Deterministic { .. } => false,
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                let lo = cdf.iter().rposition(|c| *c <= 0.0).unwrap_or(0);
                let hi = cdf.iter().position(|c| *c >= 1.0).unwrap_or(points.len() - 1);
                cdf[lo..=hi].windows(2).all(|w| w[1] > w[0])
            }
            _ => true,
        }
    }

    /// `∫_a^b P(X > u) du`. Closed form where one exists, adaptive Simpson
    /// to [`TAIL_INTEGRAL_TOL`] otherwise.
    pub fn tail_integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= a) {
            return Err(Error::invalid(format!("tail_integral needs 0 <= a <= b, got [{a}, {b}]")));
        }
        if a == b {
            return Ok(0.0);
        }
        let v = match self {
            DistributionSpec::Exponential { rate } => exp_neg_diff(rate * a, rate * b) / rate,
            DistributionSpec::Uniform { lo, hi } => {
                let prim = |x: f64| {
                    if x <= *lo {
                        x
                    } else if x >= *hi {
                        lo + 0.5 * (hi - lo)
                    } else {
                        let w = hi - lo;
                        lo + (w * w - (hi - x) * (hi - x)) / (2.0 * w)
                    }
                };
                prim(b) - prim(a)
            }
            DistributionSpec::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * exp_neg_diff(r * a, r * b) / r)
                .sum(),
            DistributionSpec::Deterministic { value } => (b.min(*value) - a.min(*value)).max(0.0),
            DistributionSpec::EmpiricalGrid { points, .. } => {
                // Tail is piecewise linear: integrate exactly on each piece.
                let mut cuts: Vec<f64> = Vec::with_capacity(points.len() + 2);
                cuts.push(a);
                cuts.extend(points.iter().copied().filter(|p| *p > a && *p < b));
                cuts.push(b);
                cuts.windows(2)
                    .map(|w| 0.5 * (self.tail(w[0]) + self.tail(w[1])) * (w[1] - w[0]))
                    .sum()
            }
            DistributionSpec::Weibull { shape, scale } => weibull_tail_integral(*shape, *scale, a, b)?,
        };
        Ok(v.max(0.0))
    }

    /// One draw by inversion.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = unit_f64(rng);
        match self {
            DistributionSpec::Exponential { rate } => -libm::log1p(-u) / rate,
            DistributionSpec::Uniform { lo, hi } => lo + (hi - lo) * u,
            DistributionSpec::Weibull { shape, scale } => scale * pow(-libm::log1p(-u), 1.0 / shape),
            DistributionSpec::HyperExponential { weights, rates } => {
                let mut acc = 0.0;
                let mut k = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                let v = unit_f64(rng);
                -libm::log1p(-v) / rates[k]
            }
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::EmpiricalGrid { points, cdf } => {
                // first knot whose cdf exceeds u; cdf[0] = 0 <= u so i >= 1
                let i = cdf.partition_point(|c| *c <= u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                let (x0, x1) = (points[i - 1], points[i]);
                if c1 > c0 {
                    x0 + (x1 - x0) * (u - c0) / (c1 - c0)
                } else {
                    x1
                }
            }
        }
    }

    /// Frontier ceiling in the overloaded regime: `sup{y < y_max : λ G(y) < μ}`.
    /// [`YStar::Infinite`] when `λ <= μ`.
    pub fn y_star(&self, lambda: f64, mu: f64) -> Result<YStar> {
        positive_finite("mu", mu)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if lambda <= mu {
            return Ok(YStar::Infinite);
        }
        let below = |y: f64| lambda * self.cdf(y) < mu;
        let y_max = self.y_max();
        let mut hi = if y_max.is_finite() { y_max } else { 1.0 };
        while below(hi) {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::RootNotFound(format!("y_star: lambda G(y) < mu up to {hi}")));
            }
        }
        let y = math::bisect_predicate(below, 0.0, hi, 1e-15 * hi.max(1.0));
        Ok(YStar::Finite(y.min(y_max)))
    }

    /// Regularity needed by the fluid engine for a patience law: `G(0) = 0`,
    /// continuous at zero and strictly increasing on `(0, y_max)`.
    pub fn check_patience_regularity(&self) -> Result<()> {
        const NAME: &str = "patience-law regularity";
        if !self.is_continuous_at(0.0) || self.cdf(0.0) != 0.0 {
            return Err(Error::assumption(NAME, "patience CDF must be continuous at 0 with G(0) = 0"));
        }
        if let DistributionSpec::Deterministic { value } = self {
            return Err(Error::assumption(
                NAME,
                format!("deterministic patience ({value}) is not strictly increasing"),
            ));
        }
        if self.support_min() > 0.0 || !self.is_strictly_increasing_on_support() {
            return Err(Error::assumption(NAME, "patience CDF must be strictly increasing on (0, y_max)"));
        }
        Ok(())
    }
}

/// Sampling rescaled to mean `1 / rate`: draws `X / (rate · E[X])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLaw {
    law: DistributionSpec,
    factor: f64,
}

impl ScaledLaw {
    pub fn with_rate(law: DistributionSpec, rate: f64) -> Result<Self> {
        law.validate()?;
        positive_finite("rate", rate)?;
        let mean = law.mean();
        positive_finite("law mean", mean)?;
        Ok(ScaledLaw { law, factor: 1.0 / (rate * mean) })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.law.sample(rng) * self.factor
    }

    pub fn mean(&self) -> f64 {
        self.law.mean() * self.factor
    }
}
