//! Finite measures on `[0, ∞)`, represented through their right tail
//! `a ↦ m(a, ∞)`, and distances between them.
//!
//! The tail is open at `a`: a point mass at `a` is not counted in `tail(a)`.
//! The closed tail `m[a, ∞)` is the left limit of the tail at `a`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

type TailFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Repr {
    /// Sorted by location, strictly increasing, positive weights.
    PointMasses(Vec<(f64, f64)>),
    /// Tail values on an increasing grid starting at 0, linear in between,
    /// zero past the last knot.
    TailGrid { grid: Vec<f64>, tails: Vec<f64> },
    /// Continuous tail given by an evaluator.
    Analytic(Arc<TailFn>),
}

#[derive(Clone)]
pub struct FiniteMeasure {
    repr: Repr,
    total_mass: f64,
}

impl fmt::Debug for FiniteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::PointMasses(p) => f
                .debug_struct("PointMasses")
                .field("atoms", &p.len())
                .field("total_mass", &self.total_mass)
                .finish(),
            Repr::TailGrid { grid, .. } => f
                .debug_struct("TailGrid")
                .field("knots", &grid.len())
                .field("total_mass", &self.total_mass)
                .finish(),
            Repr::Analytic(_) => f
                .debug_struct("Analytic")
                .field("total_mass", &self.total_mass)
                .finish(),
        }
    }
}

const NEGLIGIBLE_TAIL: f64 = 1e-12;
const REFINEMENT_POINTS: usize = 1024;

impl FiniteMeasure {
    pub fn zero() -> Self {
        FiniteMeasure {
            repr: Repr::PointMasses(Vec::new()),
            total_mass: 0.0,
        }
    }

    /// Atoms in any order; atoms at the same location are merged.
    pub fn point_masses(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, w) in &atoms {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::invalid(format!("atom location must be finite and >= 0, got {x}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!("atom weight must be positive, got {w}")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total_mass = merged.iter().map(|a| a.1).sum();
        Ok(FiniteMeasure {
            repr: Repr::PointMasses(merged),
            total_mass,
        })
    }

    /// Equal weight `weight` at each location.
    pub fn from_locations(locations: impl IntoIterator<Item = f64>, weight: f64) -> Result<Self> {
        Self::point_masses(locations.into_iter().map(|x| (x, weight)).collect())
    }

    pub fn tail_grid(grid: Vec<f64>, tails: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != tails.len() {
            return Err(Error::invalid("tail grid needs matching, nonempty grid and tail vectors"));
        }
        if grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("tail grid must start at 0 and be strictly increasing"));
        }
        if tails.windows(2).any(|w| w[1] > w[0]) || tails.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("tail values must be finite, nonnegative and nonincreasing"));
        }
        let total_mass = tails[0];
        Ok(FiniteMeasure {
            repr: Repr::TailGrid { grid, tails },
            total_mass,
        })
    }

    /// Continuous tail with `tail(0) <= total_mass`.
    pub fn analytic<F>(total_mass: f64, tail: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        FiniteMeasure {
            repr: Repr::Analytic(Arc::new(tail)),
            total_mass,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_point_masses(&self) -> bool {
        matches!(self.repr, Repr::PointMasses(_))
    }

    /// Atoms of a point-mass measure, empty otherwise.
    pub fn atoms(&self) -> &[(f64, f64)] {
        match &self.repr {
            Repr::PointMasses(p) => p,
            _ => &[],
        }
    }

    /// `m(a, ∞)`.
    pub fn tail(&self, a: f64) -> f64 {
        match &self.repr {
            Repr::PointMasses(p) => {
                let i = p.partition_point(|(x, _)| *x <= a);
                p[i..].iter().map(|(_, w)| w).sum()
            }
            Repr::TailGrid { grid, tails } => {
                if a <= 0.0 {
                    return tails[0];
                }
                let n = grid.len();
                if a >= grid[n - 1] {
                    return if a == grid[n - 1] { tails[n - 1] } else { 0.0 };
                }
                let i = grid.partition_point(|g| *g <= a);
                let (x0, x1) = (grid[i - 1], grid[i]);
                tails[i - 1] + (tails[i] - tails[i - 1]) * (a - x0) / (x1 - x0)
            }
            Repr::Analytic(f) => f(a.max(0.0)).max(0.0),
        }
    }

    /// `m[a, ∞)`.
    pub fn tail_closed(&self, a: f64) -> f64 {
        match &self.repr {
            Repr::PointMasses(p) => {
                let i = p.partition_point(|(x, _)| *x < a);
                p[i..].iter().map(|(_, w)| w).sum()
            }
            _ => self.tail(a),
        }
    }

    /// `m[lo, hi]`.
    pub fn mass_closed(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        (self.tail_closed(lo) - self.tail(hi)).max(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let repr = match &self.repr {
            Repr::PointMasses(p) => Repr::PointMasses(p.iter().map(|&(x, w)| (x, w * factor)).collect()),
            Repr::TailGrid { grid, tails } => Repr::TailGrid {
                grid: grid.clone(),
                tails: tails.iter().map(|t| t * factor).collect(),
            },
            Repr::Analytic(f) => {
                let f = f.clone();
                Repr::Analytic(Arc::new(move |a| factor * f(a)))
            }
        };
        FiniteMeasure {
            repr,
            total_mass: self.total_mass * factor,
        }
    }

    /// A point past which the tail is negligible (exactly zero for point
    /// masses and grids).
    pub fn extent(&self) -> f64 {
        match &self.repr {
            Repr::PointMasses(p) => p.last().map_or(0.0, |a| a.0),
            Repr::TailGrid { grid, .. } => grid[grid.len() - 1],
            Repr::Analytic(_) => {
                let cut = NEGLIGIBLE_TAIL * (1.0 + self.total_mass);
                let mut a = 1.0;
                while self.tail(a) > cut && a < 1e12 {
                    a *= 2.0;
                }
                a
            }
        }
    }

    /// `(a, tail(a))` pairs: the jump points for atoms, the knots for a grid,
    /// `samples` uniform points up to [`extent`](Self::extent) otherwise.
    pub fn tail_samples(&self, samples: usize) -> Vec<(f64, f64)> {
        match &self.repr {
            Repr::PointMasses(p) => {
                let mut out = Vec::with_capacity(p.len() + 1);
                out.push((0.0, self.tail(0.0)));
                let mut rest = self.total_mass;
                for &(x, w) in p {
                    rest -= w;
                    if x > 0.0 {
                        out.push((x, rest.max(0.0)));
                    }
                }
                out
            }
            Repr::TailGrid { grid, tails } => grid.iter().copied().zip(tails.iter().copied()).collect(),
            Repr::Analytic(_) => {
                let ext = self.extent();
                let n = samples.max(2);
                (0..n)
                    .map(|k| {
                        let a = ext * k as f64 / (n - 1) as f64;
                        (a, self.tail(a))
                    })
                    .collect()
            }
        }
    }

    /// Quantile range of the normalized measure on the probability cell
    /// `(u_lo, u_hi)`: every `Q(u)` with `u` in the cell lies in the range.
    fn quantile_range(&self, u_lo: f64, u_hi: f64) -> (f64, f64) {
        match &self.repr {
            Repr::PointMasses(p) => {
                let target = 0.5 * (u_lo + u_hi) * self.total_mass;
                let mut acc = 0.0;
                for &(x, w) in p {
                    acc += w;
                    if acc >= target {
                        return (x, x);
                    }
                }
                let x = p.last().map_or(0.0, |a| a.0);
                (x, x)
            }
            _ => (self.continuous_quantile(u_lo, false), self.continuous_quantile(u_hi, true)),
        }
    }

    fn continuous_quantile(&self, u: f64, upper: bool) -> f64 {
        const TOL: f64 = 1e-12;
        if u <= 0.0 {
            return 0.0;
        }
        let m = self.total_mass;
        let cdf = |x: f64| 1.0 - self.tail(x) / m;
        if u >= 1.0 {
            let ext = self.extent();
            return if self.tail(ext) == 0.0 { ext } else { f64::INFINITY };
        }
        let mut hi = 1.0;
        while cdf(hi) < u {
            hi *= 2.0;
            if hi > 1e15 {
                return f64::INFINITY;
            }
        }
        let q = math::bisect_predicate(|x| cdf(x) < u, 0.0, hi, TOL * hi.max(1.0));
        if upper {
            q + 2.0 * TOL * hi.max(1.0)
        } else {
            (q - 2.0 * TOL * hi.max(1.0)).max(0.0)
        }
    }
}

/// `sup_{a >= 0} |m1(a, ∞) - m2(a, ∞)|`.
///
/// Exact when at least one side is a point-mass measure and the other is
/// continuous or atomic; two continuous measures are compared on a uniform
/// refinement grid.
pub fn kolmogorov_distance(m1: &FiniteMeasure, m2: &FiniteMeasure) -> f64 {
    let mut candidates: Vec<f64> = Vec::new();
    candidates.push(0.0);
    candidates.extend(m1.atoms().iter().map(|a| a.0));
    candidates.extend(m2.atoms().iter().map(|a| a.0));
    let ext = m1.extent().max(m2.extent());
    if ext > 0.0 {
        candidates.extend((0..=REFINEMENT_POINTS).map(|k| ext * k as f64 / REFINEMENT_POINTS as f64));
    }
    let mut d: f64 = 0.0;
    for a in candidates {
        d = d
            .max((m1.tail(a) - m2.tail(a)).abs())
            .max((m1.tail_closed(a) - m2.tail_closed(a)).abs());
    }
    d
}

/// Upper bound on the Prohorov distance from a quantile coupling of the
/// normalized measures, rounded up to a multiple of `grid_step`.
///
/// With masses `c1`, `c2`, `c = min(c1, c2)` and `X`, `Y` coupled through
/// their quantile functions, the returned `ε` satisfies
/// `c · P(|X - Y| >= ε) + |c1 - c2| <= ε`, which implies the Prohorov
/// inequalities for every closed set.
pub fn prohorov_upper_bound(m1: &FiniteMeasure, m2: &FiniteMeasure, grid_step: f64) -> Result<f64> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::invalid(format!("grid_step must be positive, got {grid_step}")));
    }
    let (c1, c2) = (m1.total_mass(), m2.total_mass());
    let dm = (c1 - c2).abs();
    let round_up = |x: f64| (math::ceil(x / grid_step).max(1.0)) * grid_step;
    if c1 == 0.0 || c2 == 0.0 {
        return Ok(round_up(dm));
    }
    let c = c1.min(c2);

    let mut breaks: Vec<f64> = Vec::new();
    breaks.push(0.0);
    breaks.push(1.0);
    for m in [m1, m2] {
        let mut acc = 0.0;
        for &(_, w) in m.atoms() {
            acc += w;
            breaks.push((acc / m.total_mass()).min(1.0));
        }
    }
    const CELLS: usize = 256;
    const MAX_CELLS: usize = 1 << 20;
    let refine = !m1.is_point_masses() || !m2.is_point_masses();
    if refine {
        breaks.extend((1..CELLS).map(|k| k as f64 / CELLS as f64));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // Cells are halved while a quantile range is wider than half a step, so
    // only the far tails of continuous measures keep wide cells.
    let min_prob = grid_step * 1e-7;
    let mut stack: Vec<(f64, f64)> = breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect();
    // (distance bound on the cell, cell probability)
    let mut cells: Vec<(f64, f64)> = Vec::with_capacity(stack.len());
    while let Some((u0, u1)) = stack.pop() {
        let (lo1, hi1) = m1.quantile_range(u0, u1);
        let (lo2, hi2) = m2.quantile_range(u0, u1);
        let spread = (hi1 - lo1).max(hi2 - lo2);
        if refine && spread > 0.5 * grid_step && u1 - u0 > min_prob && cells.len() + stack.len() < MAX_CELLS {
            let um = 0.5 * (u0 + u1);
            stack.push((u0, um));
            stack.push((um, u1));
            continue;
        }
        cells.push(((hi1 - lo2).max(hi2 - lo1).max(0.0), u1 - u0));
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    let holds = |eps: f64| {
        let p: f64 = cells.iter().take_while(|cell| cell.0 >= eps).map(|cell| cell.1).sum();
        c * p.min(1.0) + dm <= eps
    };
    let k_max = math::ceil((c + dm) / grid_step).max(1.0) as u64;
    let (mut lo, mut hi) = (1u64, k_max);
    if holds(grid_step) {
        return Ok(grid_step);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid as f64 * grid_step) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi as f64 * grid_step)
}

/// Lower bound on the Prohorov distance from the closed half-line test sets
/// `[a, ∞)` and `[0, a]`: the largest multiple of `grid_step` at which one of
/// the Prohorov inequalities fails for such a set (0 if none fails).
pub fn half_line_lower_bound(m1: &FiniteMeasure, m2: &FiniteMeasure, grid_step: f64) -> Result<f64> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::invalid(format!("grid_step must be positive, got {grid_step}")));
    }
    let ext = m1.extent().max(m2.extent());
    let mut base: Vec<f64> = Vec::new();
    base.push(0.0);
    base.extend(m1.atoms().iter().map(|a| a.0));
    base.extend(m2.atoms().iter().map(|a| a.0));
    base.extend((0..=256).map(|k| ext * k as f64 / 256.0));

    let fails = |eps: f64| -> bool {
        let check = |p: &FiniteMeasure, q: &FiniteMeasure| {
            base.iter().any(|&a| {
                // A = [a, ∞): A^ε ∩ [0, ∞) = (a - ε, ∞) or all of [0, ∞)
                let upper_q = if a - eps < 0.0 { q.total_mass() } else { q.tail(a - eps) };
                let up = p.tail_closed(a) > upper_q + eps + 1e-12;
                // A = [0, a]: A^ε = [0, a + ε)
                let lower_q = q.total_mass() - q.tail_closed(a + eps);
                let low = p.total_mass() - p.tail(a) > lower_q + eps + 1e-12;
                up || low
            })
        };
        check(m1, m2) || check(m2, m1)
    };
    let k_max = math::ceil(m1.total_mass().max(m2.total_mass()) / grid_step) as u64 + 1;
    let mut best = 0.0;
    for k in 1..=k_max {
        let eps = k as f64 * grid_step;
        if fails(eps) {
            best = eps;
        } else {
            break;
        }
    }
    Ok(best)
}

/// Measures sampled at increasing times.
#[derive(Debug, Clone)]
pub struct MeasurePath {
    times: Vec<f64>,
    measures: Vec<FiniteMeasure>,
}

impl MeasurePath {
    pub fn new(times: Vec<f64>, measures: Vec<FiniteMeasure>) -> Result<Self> {
        if times.len() != measures.len() {
            return Err(Error::invalid("measure path needs one measure per time"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("measure path needs at least 2 samples"));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("measure path times must be >= 0 and strictly increasing"));
        }
        Ok(MeasurePath { times, measures })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[FiniteMeasure] {
        &self.measures
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &FiniteMeasure)> {
        self.times.iter().copied().zip(self.measures.iter())
    }
}
