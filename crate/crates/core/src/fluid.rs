//! Fluid limit of the EDF-b queue.
//!
//! The fluid potential queue tail is
//! `H(x, t) = Q_0(x + t, ∞) + λ ∫_x^{x+t} Ḡ(u) du`, i.e. the initial profile
//! transported to the left at unit speed plus arrivals whose patience has not
//! run out yet. The fluid queue length `φ` and reneging `η` solve a
//! one-dimensional Skorohod problem for `ψ(t) = Q(0) + (λ - μ) t` on the
//! time-varying domain `(-∞, H(0, t)]`:
//!
//! `η(t) = sup_{s <= t} (ψ(s) - H(0, s))⁺`, `φ = ψ - η`.
//!
//! The fluid frontier is `F(t) = χ(φ(t), t)` with
//! `χ(x, t) = inf{y >= 0 : H(y, t) <= x}`, and the fluid queue measure has
//! tail `a ↦ H(F(t) ∨ a, t)`.

use alloc::format;
use alloc::vec::Vec;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::math;
use crate::measure::FiniteMeasure;
use crate::model::{InitialCondition, Regime};

/// Default number of fluid grid steps on `[0, T]`.
pub const DEFAULT_STEPS: usize = 4096;
/// Absolute tolerance of `χ` in `y`.
pub const CHI_TOL: f64 = 1e-12;
/// Cutoff used when the stronger frontier hypotheses fail, as a fraction of `T`.
pub const DEFAULT_KAPPA_FRACTION: f64 = 0.05;

/// Values on an increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::invalid("grid path needs one value per time"));
        }
        Ok(GridPath { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation, clamped at the ends.
    pub fn at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.values, t)
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|s| *s <= t);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] * (1.0 - w) + values[i] * w
}

/// Discrete Skorohod map for the upper barrier `h`:
/// `η_k = max_{j <= k} (ψ_j - h_j)⁺` and `φ = ψ - η`.
///
/// Returns `(φ, η)` on the common grid.
pub fn solve_sp(psi: &GridPath, h: &GridPath) -> Result<(GridPath, GridPath)> {
    if psi.times != h.times {
        return Err(Error::GridMismatch(format!(
            "psi has {} samples, h has {} samples or different times",
            psi.len(),
            h.len()
        )));
    }
    let excess: Vec<f64> = psi.values.iter().zip(&h.values).map(|(p, b)| p - b).collect();
    let eta = running_positive_max(&excess);
    let phi = psi.values.iter().zip(&eta).map(|(p, e)| p - e).collect();
    Ok((
        GridPath { times: psi.times.clone(), values: phi },
        GridPath { times: psi.times.clone(), values: eta },
    ))
}

fn running_positive_max(excess: &[f64]) -> Vec<f64> {
    let mut acc: f64 = 0.0;
    excess
        .iter()
        .map(|d| {
            acc = acc.max(*d);
            acc
        })
        .collect()
}

/// Inputs of the fluid model.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidProblem {
    pub lambda: f64,
    pub mu: f64,
    pub patience: DistributionSpec,
    pub initial: InitialCondition,
    pub horizon: f64,
    pub steps: usize,
}

/// `T̄`: first time the fluid queue hits zero, in the underloaded regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmptyingTime {
    At(f64),
    /// `φ` stays positive on `[0, T]`.
    BeyondHorizon,
}

impl EmptyingTime {
    pub fn value(self) -> Option<f64> {
        match self {
            EmptyingTime::At(t) => Some(t),
            EmptyingTime::BeyondHorizon => None,
        }
    }
}

impl FluidProblem {
    pub fn new(
        lambda: f64,
        mu: f64,
        patience: DistributionSpec,
        initial: InitialCondition,
        horizon: f64,
        steps: usize,
    ) -> Result<Self> {
        let p = FluidProblem { lambda, mu, patience, initial, horizon, steps };
        p.validate_parameters()?;
        Ok(p)
    }

    fn validate_parameters(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if self.steps < 2 {
            return Err(Error::invalid("fluid grid needs at least 2 steps"));
        }
        self.patience.validate()?;
        self.initial.validate()
    }

    /// Strict checks of the modelling assumptions behind the fluid limit.
    pub fn validate_assumptions(&self) -> Result<()> {
        self.validate_parameters()?;
        if self.lambda > self.mu {
            if let Ok(y) = self.patience.y_star(self.lambda, self.mu) {
                if !self.patience.is_continuous_at(y.value()) {
                    return Err(Error::assumption(
                        "patience continuity at y*",
                        format!("patience CDF jumps at y* = {}", y.value()),
                    ));
                }
            }
        }
        self.patience.check_patience_regularity()?;
        self.initial
            .check_fluid_assumptions(self.lambda, self.mu, &self.patience)
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.lambda, self.mu)
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k = k Δ`, `k = 0..=steps`.
    pub fn grid(&self) -> Vec<f64> {
        let dt = self.step();
        (0..=self.steps).map(|k| k as f64 * dt).collect()
    }

    /// `ψ(t) = Q(0) + (λ - μ) t`.
    pub fn psi(&self, t: f64) -> f64 {
        self.initial.mass + (self.lambda - self.mu) * t
    }

    /// Fluid potential queue tail `H(x, t)`.
    pub fn h(&self, x: f64, t: f64) -> Result<f64> {
        if !(x >= 0.0 && t >= 0.0) {
            return Err(Error::invalid(format!("H needs x, t >= 0, got ({x}, {t})")));
        }
        let arrivals = if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * self.patience.tail_integral(x, x + t)?
        };
        Ok(self.initial.tail(x + t) + arrivals)
    }

    /// `χ(x, t) = inf{y >= 0 : H(y, t) <= x}` for `x > 0`.
    pub fn chi(&self, x: f64, t: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("chi needs x > 0, got {x}")));
        }
        if self.h(0.0, t)? <= x {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        while self.h(hi, t)? > x {
            hi *= 2.0;
            if hi > (1u64 << 60) as f64 {
                return Err(Error::BracketNotFound { x, t });
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        // H(lo, t) > x >= H(hi, t)
        for _ in 0..200 {
            if hi - lo <= CHI_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.h(mid, t)? > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Forward-difference residual of `∂_t H = ∂_x H + λ Ḡ(x)` at `(x, t)`.
    pub fn transport_residual(&self, x: f64, t: f64, delta: f64) -> Result<f64> {
        let base = self.h(x, t)?;
        let dt = (self.h(x, t + delta)? - base) / delta;
        let dx = (self.h(x + delta, t)? - base) / delta;
        Ok((dt - dx - self.lambda * self.patience.tail(x)).abs())
    }

    /// Whether the frontier converges up to time 0: the initial profile
    /// starts at 0, is strictly decreasing on its support and reaches at
    /// least as far as the patience law.
    pub fn frontier_hypotheses_hold(&self) -> bool {
        let law = &self.initial.law;
        self.initial.mass > 0.0
            && law.support_min() == 0.0
            && law.is_strictly_increasing_on_support()
            && law.y_max() >= self.patience.y_max()
    }

    /// `κ` used when none is given: 0 if the frontier hypotheses hold,
    /// `0.05 T` otherwise.
    pub fn default_kappa(&self) -> f64 {
        if self.frontier_hypotheses_hold() {
            0.0
        } else {
            DEFAULT_KAPPA_FRACTION * self.horizon
        }
    }

    fn excess(&self, t: f64) -> f64 {
        self.psi(t) - self.h(0.0, t).unwrap_or(f64::NAN)
    }
}

/// Frontier samples on the fluid grid, starting at `start` (first grid index
/// with `t >= κ`).
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPath {
    pub kappa: f64,
    pub start: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FluidSolution {
    pub problem: FluidProblem,
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    pub h: Vec<f64>,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    pub frontier: Option<FrontierPath>,
    /// Set in the underloaded regime.
    pub emptying_time: Option<EmptyingTime>,
}

impl FluidSolution {
    pub fn regime(&self) -> Regime {
        self.problem.regime()
    }

    pub fn phi_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.phi, t)
    }

    pub fn eta_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.eta, t)
    }

    /// `φ` truncated to zero after `T̄`.
    pub fn phi_bar_at(&self, t: f64) -> f64 {
        match self.emptying_time {
            Some(EmptyingTime::At(tb)) if t > tb => 0.0,
            _ => self.phi_at(t).max(0.0),
        }
    }

    /// Fluid queue length: `φ̄` when underloaded, `φ` otherwise.
    pub fn queue_at(&self, t: f64) -> f64 {
        if self.emptying_time.is_some() {
            self.phi_bar_at(t)
        } else {
            self.phi_at(t)
        }
    }

    pub fn phi_bar(&self) -> Vec<f64> {
        self.times.iter().map(|&t| self.phi_bar_at(t)).collect()
    }

    /// `F(t)`, `None` before `κ` or without a frontier.
    pub fn frontier_at(&self, t: f64) -> Option<f64> {
        let f = self.frontier.as_ref()?;
        if t < f.kappa {
            return None;
        }
        let times = &self.times[f.start..];
        Some(interpolate(times, &f.values, t))
    }

    /// Tail of the fluid queue measure, `H(F(t) ∨ a, t)`.
    pub fn limit_tail(&self, t: f64, a: f64) -> Result<f64> {
        let f = self
            .frontier_at(t)
            .ok_or_else(|| Error::RegimeError(format!("no fluid frontier at t = {t}")))?;
        self.problem.h(f.max(a), t)
    }

    /// The fluid queue measure at `t` as an analytic tail.
    pub fn limit_measure(&self, t: f64) -> Result<FiniteMeasure> {
        let f = self
            .frontier_at(t)
            .ok_or_else(|| Error::RegimeError(format!("no fluid frontier at t = {t}")))?;
        let problem = self.problem.clone();
        let total = problem.h(f, t)?;
        Ok(FiniteMeasure::analytic(total, move |a| {
            problem.h(f.max(a), t).unwrap_or(f64::NAN)
        }))
    }
}

/// `(φ, η)` for `λ >= μ`, with the barrier `H(0, ·)` sampled on the grid and
/// the sup in `η` refined between grid points around local maxima of
/// `ψ - H(0, ·)`.
pub fn fluid_qr(prob: &FluidProblem) -> Result<FluidSolution> {
    if !prob.regime().is_loaded() {
        return Err(Error::RegimeError(format!(
            "fluid_qr needs lambda >= mu, got lambda = {}, mu = {}",
            prob.lambda, prob.mu
        )));
    }
    prob.validate_assumptions()?;
    reflect(prob)
}

fn reflect(prob: &FluidProblem) -> Result<FluidSolution> {
    let times = prob.grid();
    let psi: Vec<f64> = times.iter().map(|&t| prob.psi(t)).collect();
    let h = times.iter().map(|&t| prob.h(0.0, t)).collect::<Result<Vec<f64>>>()?;
    let mut excess: Vec<f64> = psi.iter().zip(&h).map(|(p, b)| p - b).collect();

    let n = times.len();
    let tol = 1e-13 * prob.horizon.max(1.0);
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    for k in 0..n {
        let left_ok = k == 0 || excess[k] >= excess[k - 1];
        let right_ok = k + 1 < n && excess[k] >= excess[k + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = if k == 0 { times[0] } else { times[k - 1] };
        let hi = times[k + 1];
        let (s, v) = math::golden_max(|t| prob.excess(t), lo, hi, tol);
        if v > excess[k] && v.is_finite() {
            let j = if s <= times[k] { k } else { k + 1 };
            peaks.push((j, v));
        }
    }
    for (j, v) in peaks {
        excess[j] = excess[j].max(v);
    }
    let eta = running_positive_max(&excess);
    let phi: Vec<f64> = psi.iter().zip(&eta).map(|(p, e)| p - e).collect();
    Ok(FluidSolution {
        problem: prob.clone(),
        times,
        psi,
        h,
        eta,
        phi,
        frontier: None,
        emptying_time: None,
    })
}

/// `F(t_k) = χ(φ(t_k), t_k)` for grid times `t_k >= κ`.
pub fn fluid_frontier(sol: &FluidSolution, kappa: f64) -> Result<FrontierPath> {
    if !sol.regime().is_loaded() {
        return Err(Error::RegimeError("the fluid frontier is only defined for lambda >= mu".into()));
    }
    if !(kappa >= 0.0) {
        return Err(Error::invalid(format!("kappa must be >= 0, got {kappa}")));
    }
    let start = sol.times.partition_point(|t| *t < kappa);
    let values = (start..sol.times.len())
        .map(|k| sol.problem.chi(sol.phi[k], sol.times[k]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(FrontierPath { kappa, start, values })
}

/// `φ̄` for `λ < μ`: `φ` up to its first zero `T̄`, zero afterwards.
/// `T̄` is located on the grid and then refined by bisection on the
/// continuous-time `φ`.
pub fn fluid_subcritical(prob: &FluidProblem) -> Result<FluidSolution> {
    if prob.regime().is_loaded() {
        return Err(Error::assumption(
            "underloaded regime",
            format!("needs lambda < mu, got lambda = {}, mu = {}", prob.lambda, prob.mu),
        ));
    }
    prob.validate_assumptions()?;
    let mut sol = reflect(prob)?;
    let t_bar = match sol.phi.iter().position(|p| *p <= 0.0) {
        None => EmptyingTime::BeyondHorizon,
        Some(0) => EmptyingTime::At(0.0),
        Some(k) => {
            let eta_prev = sol.eta[k - 1];
            let phi_cont = |t: f64| {
                let eta = eta_prev.max(prob.excess(t));
                prob.psi(t) - eta
            };
            let (a, b) = (sol.times[k - 1], sol.times[k]);
            let tb = math::bisect(phi_cont, a, b, 1e-14 * prob.horizon.max(1.0)).unwrap_or(b);
            EmptyingTime::At(tb)
        }
    };
    sol.emptying_time = Some(t_bar);
    Ok(sol)
}

/// Fluid solution for any regime. In the loaded regimes the frontier is
/// computed from `κ` (or [`FluidProblem::default_kappa`]).
pub fn solve(prob: &FluidProblem, kappa: Option<f64>) -> Result<FluidSolution> {
    if prob.regime().is_loaded() {
        let mut sol = fluid_qr(prob)?;
        let kappa = kappa.unwrap_or_else(|| prob.default_kappa());
        sol.frontier = Some(fluid_frontier(&sol, kappa)?);
        Ok(sol)
    } else {
        fluid_subcritical(prob)
    }
}

/// Sup-norm changes of `(φ, η, F)` when the grid is refined by a factor 2;
/// compared at the coarse grid times.
pub fn refinement_gap(prob: &FluidProblem, kappa: Option<f64>) -> Result<(f64, f64, f64)> {
    let coarse = solve(prob, kappa)?;
    let mut fine_prob = prob.clone();
    fine_prob.steps = prob.steps * 2;
    let fine = solve(&fine_prob, kappa)?;
    let mut gaps = (0.0f64, 0.0f64, 0.0f64);
    for (k, &t) in coarse.times.iter().enumerate() {
        let j = 2 * k;
        gaps.0 = gaps.0.max((coarse.phi[k] - fine.phi[j]).abs());
        gaps.1 = gaps.1.max((coarse.eta[k] - fine.eta[j]).abs());
        if let (Some(a), Some(b)) = (coarse.frontier_at(t), fine.frontier_at(t)) {
            gaps.2 = gaps.2.max((a - b).abs());
        }
    }
    Ok(gaps)
}
