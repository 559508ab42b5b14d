//! Distances between one simulated trace and the fluid solution, and the
//! trend rule used to judge a sequence of means over increasing `N`.

use alloc::format;
use alloc::string::String;

use crate::distribution::YStar;
use crate::error::Result;
use crate::fluid::FluidSolution;
use crate::measure::kolmogorov_distance;
use crate::sim::SimTrace;

/// Error figures of one replication. Fields that only make sense when
/// `λ >= μ` are `None` in the underloaded regime.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationMetrics {
    /// `sup_t |Q^N(t)/N - φ(t)|`, against `φ̄` when underloaded.
    pub err_q: f64,
    /// `sup_t |R^N(t)/N - η(t)|`.
    pub err_r: Option<f64>,
    /// `sup_{t in [κ, T]} |F^N(t) - F(t)|`.
    pub err_f: Option<f64>,
    /// Largest Kolmogorov distance between the scaled queue measure and the
    /// fluid queue measure over the snapshot times in `[κ, T]`.
    pub err_m: Option<f64>,
    /// `sup_{t <= T} F^N(t)`.
    pub frontier_sup: f64,
    /// `sup F^N <= y* + ε`; `None` when `y*` is infinite.
    pub frontier_within_bound: Option<bool>,
    /// Largest scaled queue mass with lead time in `[C(t), F(t)]` over the
    /// snapshot times.
    pub cf_mass: f64,
    pub first_queue_empty: Option<f64>,
    /// Queue hit zero at a positive time before the horizon.
    pub emptied_before_horizon: bool,
}

pub fn replication_metrics(
    trace: &SimTrace,
    sol: &FluidSolution,
    frontier_eps: f64,
) -> Result<ReplicationMetrics> {
    let paths = &trace.paths;
    let loaded = sol.regime().is_loaded();

    let err_q = paths
        .t
        .iter()
        .zip(&paths.q)
        .map(|(&t, &q)| (q - sol.queue_at(t)).abs())
        .fold(0.0, f64::max);

    let err_r = loaded.then(|| {
        paths
            .t
            .iter()
            .zip(&paths.r)
            .map(|(&t, &r)| (r - sol.eta_at(t)).abs())
            .fold(0.0, f64::max)
    });

    let mut err_f = None;
    let mut err_m = None;
    if let Some(front) = sol.frontier.as_ref() {
        let mut sup: f64 = 0.0;
        for (&t, &f) in paths.t.iter().zip(&paths.frontier) {
            if let Some(fluid) = sol.frontier_at(t) {
                sup = sup.max((f - fluid).abs());
            }
        }
        err_f = Some(sup);
        let mut sup_m: f64 = 0.0;
        for snap in trace.snapshots.iter().filter(|s| s.t >= front.kappa) {
            let fluid = sol.limit_measure(snap.t)?;
            sup_m = sup_m.max(kolmogorov_distance(&snap.queue, &fluid));
        }
        err_m = Some(sup_m);
    }

    // F^N only decreases between jumps, so its sup sits at a jump time.
    let frontier_sup = trace
        .frontier_jumps
        .iter()
        .filter(|(t, _)| *t <= trace.horizon)
        .map(|(t, sup)| sup - t)
        .fold(f64::NEG_INFINITY, f64::max);

    let problem = &sol.problem;
    let frontier_within_bound = match problem.patience.y_star(problem.lambda, problem.mu) {
        Ok(YStar::Finite(y)) if problem.lambda > problem.mu => Some(frontier_sup <= y + frontier_eps),
        _ => None,
    };

    let cf_mass = trace.snapshots.iter().map(|s| s.cf_mass).fold(0.0, f64::max);
    let emptied_before_horizon = matches!(trace.first_queue_empty, Some(t) if t > 0.0 && t <= trace.horizon);

    Ok(ReplicationMetrics {
        err_q,
        err_r,
        err_f,
        err_m,
        frontier_sup,
        frontier_within_bound,
        cf_mass,
        first_queue_empty: trace.first_queue_empty,
        emptied_before_horizon,
    })
}

/// Mean, extremes and quantiles of one metric across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

/// `None` for an empty sample.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let quantile = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos as usize;
        let hi = (lo + 1).min(n - 1);
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    Some(Summary {
        count: n,
        mean: values.iter().sum::<f64>() / n as f64,
        min: sorted[0],
        q10: quantile(0.1),
        median: quantile(0.5),
        q90: quantile(0.9),
        max: sorted[n - 1],
    })
}

/// When a sequence of means over increasing `N` counts as decreasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendRule {
    /// Last mean must be at most this fraction of the first.
    pub max_final_ratio: f64,
    /// Number of increases between consecutive means allowed.
    pub max_inversions: usize,
    /// Each increase must be smaller than this fraction of the larger value.
    pub max_inversion_fraction: f64,
}

impl Default for TrendRule {
    fn default() -> Self {
        TrendRule { max_final_ratio: 0.5, max_inversions: 1, max_inversion_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendVerdict {
    pub pass: bool,
    pub inversions: usize,
    /// Last mean over first mean.
    pub final_ratio: f64,
    pub detail: String,
}

pub fn trend_verdict(means: &[f64], rule: &TrendRule) -> TrendVerdict {
    if means.len() < 3 {
        return TrendVerdict {
            pass: false,
            inversions: 0,
            final_ratio: f64::NAN,
            detail: format!("needs at least 3 means, got {}", means.len()),
        };
    }
    let mut inversions = 0;
    let mut large_inversion = None;
    for w in means.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            if w[1] - w[0] >= rule.max_inversion_fraction * w[1] {
                large_inversion = Some((w[0], w[1]));
            }
        }
    }
    let (first, last) = (means[0], means[means.len() - 1]);
    let final_ratio = if first > 0.0 { last / first } else if last > 0.0 { f64::INFINITY } else { 0.0 };
    let final_ok = last <= rule.max_final_ratio * first;
    let detail = if let Some((a, b)) = large_inversion {
        format!("increase from {a} to {b} exceeds {} of the larger value", rule.max_inversion_fraction)
    } else if inversions > rule.max_inversions {
        format!("{inversions} increases, at most {} allowed", rule.max_inversions)
    } else if !final_ok {
        format!("final/first = {final_ratio}, needs <= {}", rule.max_final_ratio)
    } else {
        format!("final/first = {final_ratio}, {inversions} small increase(s)")
    };
    TrendVerdict {
        pass: large_inversion.is_none() && inversions <= rule.max_inversions && final_ok,
        inversions,
        final_ratio,
        detail,
    }
}

/// Sequence is nonincreasing up to `tol` per step.
pub fn is_nonincreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + tol)
}
