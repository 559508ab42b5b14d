//! Closed forms for the exponential worked example: `λ = 1`, `Q(0) = 1`,
//! initial lead times `Exp(1)` and patience `Exp(θ)`, with `μ <= 1`.
//!
//! Here `ψ(t) - H(0, t) = A(t)` with
//! `A(s) = (1 - μ) s + 1 - e^{-s} - (1 - e^{-θ s}) / θ` and
//! `A' = f(s) = 1 - μ + e^{-s} - e^{-θ s}`, so `η` is the running maximum
//! of `A`. When `f` changes sign, `η` is flat between the first zero `a₁` of
//! `f` and the point `a₂ > a₁` where `A` climbs back to `A(a₁)`.

use alloc::format;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::fluid::FluidProblem;
use crate::math::{self, exp, ln};
use crate::model::InitialCondition;

const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleParams {
    pub mu: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleCase {
    /// `θ >= 1`: `A` is nondecreasing, the barrier is always active.
    Case1,
    /// `μ = 1`, `θ < 1`: `A <= 0`, nothing reneges in the fluid.
    Case2,
    /// `μ < 1`, `θ < 1`, `f >= 0`: same formulas as `Case1`.
    Case3a,
    /// `μ < 1`, `θ < 1`, `f` dips below zero: `η` has a flat stretch.
    Case3b,
}

impl ExampleCase {
    pub fn as_str(self) -> &'static str {
        match self {
            ExampleCase::Case1 => "Case1",
            ExampleCase::Case2 => "Case2",
            ExampleCase::Case3a => "Case3a",
            ExampleCase::Case3b => "Case3b",
        }
    }
}

impl ExampleParams {
    pub fn new(mu: f64, theta: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 1], got {mu}")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!("theta must be > 0, got {theta}")));
        }
        Ok(ExampleParams { mu, theta })
    }

    pub fn case(&self) -> ExampleCase {
        if self.theta >= 1.0 {
            ExampleCase::Case1
        } else if self.mu == 1.0 {
            ExampleCase::Case2
        } else if ln(1.0 - self.mu) >= self.log_threshold() {
            ExampleCase::Case3a
        } else {
            ExampleCase::Case3b
        }
    }

    /// `ln((1 - θ) θ^{θ/(1-θ)})` for `θ < 1`: the negated minimum of
    /// `e^{-s} - e^{-θ s}` is this threshold.
    fn log_threshold(&self) -> f64 {
        let t = self.theta;
        libm::log1p(-t) + t / (1.0 - t) * ln(t)
    }

    /// `f(s) = 1 - μ + e^{-s} - e^{-θ s}`.
    pub fn f(&self, s: f64) -> f64 {
        1.0 - self.mu + exp(-s) - exp(-self.theta * s)
    }

    /// `A(s) = ∫_0^s f`.
    pub fn a(&self, s: f64) -> f64 {
        (1.0 - self.mu) * s + (-libm::expm1(-s)) - (-libm::expm1(-self.theta * s)) / self.theta
    }

    pub fn psi(&self, t: f64) -> f64 {
        1.0 + (1.0 - self.mu) * t
    }

    /// Location `ln θ / (θ - 1)` of the minimum of `f` when `θ < 1`.
    pub fn f_argmin(&self) -> f64 {
        ln(self.theta) / (self.theta - 1.0)
    }

    /// `(a₁, a₂)`, only defined in `Case3b`.
    pub fn find_a1_a2(&self) -> Result<(f64, f64)> {
        if self.case() != ExampleCase::Case3b {
            return Err(Error::RegimeError(format!(
                "a1, a2 only exist in Case3b, got {}",
                self.case().as_str()
            )));
        }
        let t_star = self.f_argmin();
        // f decreases on (0, t*) from 1 - μ > 0 to a negative minimum
        let a1 = math::bisect(|s| self.f(s), 0.0, t_star, ROOT_TOL)?;
        // and increases on (t*, ∞) back towards 1 - μ
        let mut hi = 2.0 * t_star;
        while self.f(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::RootNotFound("second zero of f".into()));
            }
        }
        let b = math::bisect(|s| self.f(s), t_star, hi, ROOT_TOL)?;
        // A decreases on (a₁, b) and increases for good after b, so the
        // largest root of A(s) = A(a₁) is the only one beyond b.
        let target = self.a(a1);
        let mut hi = 2.0 * b;
        while self.a(hi) <= target {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::RootNotFound("a2 bracket".into()));
            }
        }
        let a2 = math::bisect(|s| self.a(s) - target, b, hi, ROOT_TOL)?;
        Ok((a1, a2))
    }

    /// Closed-form `(φ(t), η(t))`.
    pub fn phi_eta(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("t must be >= 0, got {t}")));
        }
        let eta = match self.case() {
            ExampleCase::Case1 | ExampleCase::Case3a => self.a(t),
            ExampleCase::Case2 => 0.0,
            ExampleCase::Case3b => {
                let (a1, a2) = self.find_a1_a2()?;
                self.eta_case3b(t, a1, a2)
            }
        };
        Ok((self.psi(t) - eta, eta))
    }

    fn eta_case3b(&self, t: f64, a1: f64, a2: f64) -> f64 {
        if t <= a1 || t >= a2 {
            self.a(t)
        } else {
            self.a(a1)
        }
    }

    /// `(φ, η)` on `t_k = k T / steps`, reusing `a₁, a₂`.
    pub fn curves(&self, horizon: f64, steps: usize) -> Result<alloc::vec::Vec<(f64, f64, f64)>> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::invalid("curves need horizon > 0 and steps >= 1"));
        }
        let roots = match self.case() {
            ExampleCase::Case3b => Some(self.find_a1_a2()?),
            _ => None,
        };
        let dt = horizon / steps as f64;
        Ok((0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let eta = match (self.case(), roots) {
                    (ExampleCase::Case2, _) => 0.0,
                    (ExampleCase::Case3b, Some((a1, a2))) => self.eta_case3b(t, a1, a2),
                    _ => self.a(t),
                };
                (t, self.psi(t) - eta, eta)
            })
            .collect())
    }

    /// The same system as a general fluid problem.
    pub fn fluid_problem(&self, horizon: f64, steps: usize) -> Result<FluidProblem> {
        FluidProblem::new(
            1.0,
            self.mu,
            DistributionSpec::exponential(self.theta)?,
            InitialCondition::new(1.0, DistributionSpec::exponential(1.0)?, 0.0)?,
            horizon,
            steps,
        )
    }
}
