//! System parameters and the initial condition shared by the simulator and the
//! fluid engine.

use alloc::format;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::measure::FiniteMeasure;

/// Load regime, by comparing the fluid arrival and service rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn of(lambda: f64, mu: f64) -> Self {
        if lambda > mu {
            Regime::Supercritical
        } else if lambda < mu {
            Regime::Subcritical
        } else {
            Regime::Critical
        }
    }

    /// Critical or supercritical.
    pub fn is_loaded(self) -> bool {
        !matches!(self, Regime::Subcritical)
    }
}

/// Fluid rates, scale factor, horizon and seed of one run. The `N`-th system
/// uses arrival rate `N λ` and service rate `N μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub lambda: f64,
    pub mu: f64,
    pub n: u64,
    pub horizon: f64,
    pub seed: u64,
}

impl SystemParams {
    pub fn new(lambda: f64, mu: f64, n: u64, horizon: f64, seed: u64) -> Result<Self> {
        let p = SystemParams { lambda, mu, n, horizon, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.n == 0 {
            return Err(Error::invalid("N must be >= 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.lambda, self.mu)
    }

    pub fn scaled_arrival_rate(&self) -> f64 {
        self.n as f64 * self.lambda
    }

    pub fn scaled_service_rate(&self) -> f64 {
        self.n as f64 * self.mu
    }
}

/// Fluid initial queue: a lead-time measure `mass · law` and the initial
/// frontier. The law must have a continuous CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub mass: f64,
    pub law: DistributionSpec,
    pub frontier0: f64,
}

impl InitialCondition {
    pub fn new(mass: f64, law: DistributionSpec, frontier0: f64) -> Result<Self> {
        let ic = InitialCondition { mass, law, frontier0 };
        ic.validate()?;
        Ok(ic)
    }

    /// No initial customers.
    pub fn empty() -> Self {
        InitialCondition {
            mass: 0.0,
            law: DistributionSpec::Exponential { rate: 1.0 },
            frontier0: 0.0,
        }
    }

    /// Structural checks: finite nonnegative mass, continuous CDF, no mass on
    /// `[0, frontier0]`.
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return Err(Error::invalid(format!("initial mass must be >= 0, got {}", self.mass)));
        }
        if !(self.frontier0.is_finite() && self.frontier0 >= 0.0) {
            return Err(Error::invalid(format!("frontier0 must be >= 0, got {}", self.frontier0)));
        }
        if self.mass > 0.0 {
            if matches!(self.law, DistributionSpec::Deterministic { .. }) {
                return Err(Error::invalid("initial lead-time law must have a continuous CDF"));
            }
            if self.law.cdf(self.frontier0) > 0.0 {
                return Err(Error::invalid(format!(
                    "initial measure charges [0, frontier0 = {}]",
                    self.frontier0
                )));
            }
        }
        Ok(())
    }

    /// Extra requirements of the fluid engine: the support starts right at
    /// the frontier and, when overloaded, the frontier does not exceed `y*`.
    pub fn check_fluid_assumptions(&self, lambda: f64, mu: f64, patience: &DistributionSpec) -> Result<()> {
        const NAME: &str = "initial-measure support";
        self.validate()?;
        if self.mass > 0.0 && self.law.support_min() > self.frontier0 + 1e-12 {
            return Err(Error::assumption(
                NAME,
                format!(
                    "initial measure must charge every (frontier0, x]; support starts at {}",
                    self.law.support_min()
                ),
            ));
        }
        if lambda > mu {
            let y_star = patience.y_star(lambda, mu)?.value();
            if self.frontier0 > y_star {
                return Err(Error::assumption(
                    NAME,
                    format!("frontier0 = {} exceeds y* = {y_star}", self.frontier0),
                ));
            }
        }
        Ok(())
    }

    /// `Q(0)`.
    pub fn total_mass(&self) -> f64 {
        self.mass
    }

    /// `Q_0(x, ∞)`.
    pub fn tail(&self, x: f64) -> f64 {
        if self.mass == 0.0 {
            0.0
        } else {
            self.mass * self.law.tail(x)
        }
    }

    pub fn measure(&self) -> FiniteMeasure {
        let mass = self.mass;
        let law = self.law.clone();
        FiniteMeasure::analytic(mass, move |a| if mass == 0.0 { 0.0 } else { mass * law.tail(a) })
    }
}
