//! Constraint-preserving local search for efficient weights.
//!
//! Every search direction lies in the null space of the budget and
//! target-mean constraints, so any accepted move keeps `Σα = 1` and
//! `α'μ = μ*`. The best improving direction is taken at each round; when no
//! direction improves, the step shrinks until it falls below the minimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{gmd_sorted, mean, quantile_rank, PrudenceLevel};
use crate::panel::ReturnPanel;

/// Risk objective of a portfolio return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "prudence", rename_all = "kebab-case")]
pub enum Objective {
    /// Sample variance (divides by `n - 1`).
    Variance,
    /// Gini mean difference.
    Gmd,
    /// Tail Gini at the given level.
    TailGini(PrudenceLevel),
    /// Tail standard deviation at the given level.
    TailSd(PrudenceLevel),
}

impl Objective {
    pub fn label(&self) -> &'static str {
        match self {
            Objective::Variance => "variance",
            Objective::Gmd => "gmd",
            Objective::TailGini(_) => "tail-gini",
            Objective::TailSd(_) => "tail-sd",
        }
    }

    pub fn prudence(&self) -> Option<PrudenceLevel> {
        match self {
            Objective::TailGini(p) | Objective::TailSd(p) => Some(*p),
            _ => None,
        }
    }

    /// Evaluates the objective on a return series. `scratch` is reused
    /// between calls to avoid allocation.
    pub fn evaluate(&self, series: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        let n = series.len();
        match self {
            Objective::Variance => {
                let m = mean(series);
                let ss: f64 = series.iter().map(|x| (x - m) * (x - m)).sum();
                Ok(ss / (n as f64 - 1.0))
            }
            Objective::Gmd => {
                scratch.clear();
                scratch.extend_from_slice(series);
                scratch.sort_unstable_by(f64::total_cmp);
                Ok(gmd_sorted(scratch))
            }
            Objective::TailGini(p) | Objective::TailSd(p) => {
                scratch.clear();
                scratch.extend_from_slice(series);
                let k = quantile_rank(n, *p);
                let (below, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
                let cutoff = *kth;
                let mut tail: Vec<f64> = below.iter().copied().filter(|&x| x < cutoff).collect();
                if tail.len() < 2 {
                    return Err(Error::DegenerateTail { count: tail.len() });
                }
                if matches!(self, Objective::TailGini(_)) {
                    tail.sort_unstable_by(f64::total_cmp);
                    Ok(gmd_sorted(&tail))
                } else {
                    let m = mean(&tail);
                    let v = tail.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / tail.len() as f64;
                    Ok(v.sqrt())
                }
            }
        }
    }

    /// Converts an objective value to a risk in return units.
    pub fn risk(&self, value: f64) -> f64 {
        match self {
            Objective::Variance => value.max(0.0).sqrt(),
            _ => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Initial step size `δ`.
    pub step: f64,
    /// Convergence tolerance on the objective change.
    pub threshold: f64,
    pub max_iters: usize,
    /// Step decay applied when no direction improves.
    pub shrink: f64,
    pub min_step: f64,
    pub long_only: bool,
    pub objective: Objective,
    /// Fixed step; stop as soon as the improvement drops below `threshold`
    /// or no direction improves.
    pub paper_faithful: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            step: 0.001,
            threshold: 0.00001,
            max_iters: 100_000,
            shrink: 0.5,
            min_step: 1e-7,
            long_only: false,
            objective: Objective::Variance,
            paper_faithful: false,
        }
    }
}

impl SearchOptions {
    pub fn with_objective(objective: Objective) -> Self {
        Self {
            objective,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.min_step > 0.0
            && self.step > self.min_step
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid search options {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub target: f64,
    pub weights: Vec<f64>,
    /// Objective value at `weights`, recomputed from the portfolio series.
    pub objective_value: f64,
    /// The objective expressed in return units (standard deviation for the
    /// variance objective).
    pub risk: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_step: f64,
}

/// One accepted move of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub weights: Vec<f64>,
    pub objective_value: f64,
    pub step: f64,
}

fn mean_spread(means: &[f64]) -> (f64, f64) {
    let m = mean(means);
    (m, means.iter().map(|x| (x - m) * (x - m)).sum())
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// A starting point satisfying both linear constraints.
///
/// Unconstrained: the minimum-norm solution of `{1'α = 1, μ'α = μ*}`.
/// Long-only: the convex combination of the two assets whose means bracket
/// the target, or the single asset whose mean equals it.
pub fn feasible_start(means: &[f64], target: f64, long_only: bool) -> Result<Vec<f64>> {
    let d = means.len();
    if d == 0 {
        return Err(Error::InvalidInput("no assets".into()));
    }
    if !target.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite target {target}")));
    }
    let (avg, spread) = mean_spread(means);
    if spread <= 1e-24 * avg.abs().max(1.0).powi(2) {
        return if approx_eq(target, avg) {
            if d == 1 {
                Ok(vec![1.0])
            } else {
                Err(Error::DegenerateMeans)
            }
        } else {
            Err(Error::Infeasible {
                target,
                reason: format!("every asset has mean {avg}"),
            })
        };
    }
    if long_only {
        let lo_mean = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi_mean = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if target < lo_mean && !approx_eq(target, lo_mean)
            || target > hi_mean && !approx_eq(target, hi_mean)
        {
            return Err(Error::Infeasible {
                target,
                reason: format!("long-only targets must lie in [{lo_mean}, {hi_mean}]"),
            });
        }
        let target = target.clamp(lo_mean, hi_mean);
        // Largest mean <= target and smallest mean >= target, lowest index on ties.
        let mut lo = None::<usize>;
        let mut hi = None::<usize>;
        for (i, &m) in means.iter().enumerate() {
            if m <= target && lo.is_none_or(|j| m > means[j]) {
                lo = Some(i);
            }
            if m >= target && hi.is_none_or(|j| m < means[j]) {
                hi = Some(i);
            }
        }
        let (lo, hi) = (lo.expect("bracketed"), hi.expect("bracketed"));
        let mut w = vec![0.0; d];
        if means[lo] == means[hi] {
            w[lo] = 1.0;
        } else {
            let t = (target - means[lo]) / (means[hi] - means[lo]);
            w[lo] = 1.0 - t;
            w[hi] = t;
        }
        return Ok(w);
    }
    let k = (target - avg) / spread;
    Ok(means.iter().map(|m| 1.0 / d as f64 + k * (m - avg)).collect())
}

/// Search directions in the null space of `{1', μ'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    /// Each direction is followed by its negation.
    pub directions: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// For each asset `i`, a move of `+step` on `i`, a compensating move on the
/// partner `i+1` (cyclically), and the remainder spread equally over the
/// other `d - 2` assets, chosen so that the budget and the mean are
/// unchanged. When the partner's mean equals the average of the remaining
/// assets, the next index is tried as partner.
pub fn direction_set(means: &[f64], step: f64) -> DirectionSet {
    let d = means.len();
    let mut out = DirectionSet {
        directions: Vec::new(),
        warnings: Vec::new(),
    };
    if d < 3 {
        return out;
    }
    let scale = means.iter().fold(1.0f64, |a, m| a.max(m.abs()));
    for i in 0..d {
        let mut built = None;
        for offset in 1..d {
            let partner = (i + offset) % d;
            let rest = (d - 2) as f64;
            let avg = means
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i && k != partner)
                .map(|(_, m)| m)
                .sum::<f64>()
                / rest;
            let denom = means[partner] - avg;
            if denom.abs() < 1e-12 {
                continue;
            }
            let mut dw = vec![0.0; d];
            dw[i] = step;
            dw[partner] = step * (avg - means[i]) / denom;
            let fill = -(step + dw[partner]) / rest;
            for (k, v) in dw.iter_mut().enumerate() {
                if k != i && k != partner {
                    *v = fill;
                }
            }
            let size: f64 = dw.iter().map(|v| v.abs()).sum();
            let budget: f64 = dw.iter().sum();
            let drift: f64 = dw.iter().zip(means).map(|(a, m)| a * m).sum();
            if budget.abs() <= 1e-12 * size && drift.abs() <= 1e-12 * size * scale {
                built = Some(dw);
                break;
            }
        }
        match built {
            Some(dw) => {
                let neg = dw.iter().map(|v| -v).collect();
                out.directions.push(dw);
                out.directions.push(neg);
            }
            None => out
                .warnings
                .push(format!("no admissible partner for asset {i}; direction omitted")),
        }
    }
    out
}

fn check_panel(panel: &ReturnPanel, objective: &Objective) -> Result<()> {
    if panel.n_obs() < 2 {
        return Err(Error::InvalidInput("at least two observations required".into()));
    }
    if let Some(p) = objective.prudence() {
        PrudenceLevel::new(p.value())?;
    }
    Ok(())
}

/// Minimizes the objective at one target from the feasible start.
pub fn minimize(panel: &ReturnPanel, target: f64, opts: &SearchOptions) -> Result<FrontierPoint> {
    let start = feasible_start(&panel.means(), target, opts.long_only)?;
    run(panel, target, start, opts, None)
}

/// Like [`minimize`], also returning every accepted iterate.
pub fn minimize_traced(
    panel: &ReturnPanel,
    target: f64,
    opts: &SearchOptions,
) -> Result<(FrontierPoint, Vec<Iterate>)> {
    let start = feasible_start(&panel.means(), target, opts.long_only)?;
    let mut trace = Vec::new();
    let pt = run(panel, target, start, opts, Some(&mut trace))?;
    Ok((pt, trace))
}

/// Minimizes from a caller-supplied start, which must satisfy both
/// constraints (and be nonnegative in long-only mode).
pub fn minimize_from(
    panel: &ReturnPanel,
    target: f64,
    start: Vec<f64>,
    opts: &SearchOptions,
) -> Result<FrontierPoint> {
    let means = panel.means();
    if start.len() != means.len() {
        return Err(Error::InvalidInput("start has the wrong length".into()));
    }
    let budget: f64 = start.iter().sum();
    let achieved: f64 = start.iter().zip(&means).map(|(w, m)| w * m).sum();
    if (budget - 1.0).abs() > 1e-8 || (achieved - target).abs() > 1e-8 {
        return Err(Error::InvalidInput("start violates the constraints".into()));
    }
    if opts.long_only && start.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidInput("start has a negative weight".into()));
    }
    run(panel, target, start, opts, None)
}

fn add_scaled(out: &mut [f64], base: &[f64], s: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + s * d;
    }
}

fn run(
    panel: &ReturnPanel,
    target: f64,
    start: Vec<f64>,
    opts: &SearchOptions,
    mut trace: Option<&mut Vec<Iterate>>,
) -> Result<FrontierPoint> {
    opts.validate()?;
    check_panel(panel, &opts.objective)?;
    let means = panel.means();
    let dirs = direction_set(&means, 1.0).directions;
    // Portfolio-return image of every unit direction, so a candidate series
    // costs O(n) instead of O(n d).
    let images: Vec<Vec<f64>> = dirs.iter().map(|d| panel.portfolio(d)).collect();

    let mut scratch = Vec::with_capacity(panel.n_obs());
    let mut weights = start;
    let mut series = panel.portfolio(&weights);
    let mut value = opts.objective.evaluate(&series, &mut scratch)?;
    let mut step = opts.step;
    let mut iterations = 0;
    let mut converged = dirs.is_empty();
    // Objective value when the current step schedule began. A schedule that
    // ends at the minimum step after a real improvement is restarted from
    // the initial step, which lets the search leave kinks of nonsmooth
    // objectives.
    let mut schedule_start = value;

    let mut cand_w = vec![0.0; weights.len()];
    let mut cand_s = vec![0.0; series.len()];
    let mut best_w = cand_w.clone();
    let mut best_s = cand_s.clone();

    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let mut best: Option<f64> = None;
        for (dir, image) in dirs.iter().zip(&images) {
            add_scaled(&mut cand_w, &weights, step, dir);
            if opts.long_only && cand_w.iter().any(|&w| w < 0.0) {
                continue;
            }
            add_scaled(&mut cand_s, &series, step, image);
            let Ok(v) = opts.objective.evaluate(&cand_s, &mut scratch) else {
                continue;
            };
            // Strict comparison keeps the lowest-index direction on ties.
            if best.is_none_or(|b| v < b) {
                best = Some(v);
                best_w.copy_from_slice(&cand_w);
                best_s.copy_from_slice(&cand_s);
            }
        }
        match best {
            Some(v) if v < value => {
                let change = value - v;
                std::mem::swap(&mut weights, &mut best_w);
                std::mem::swap(&mut series, &mut best_s);
                value = v;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(Iterate {
                        weights: weights.clone(),
                        objective_value: v,
                        step,
                    });
                }
                if opts.paper_faithful && change < opts.threshold {
                    converged = true;
                }
            }
            _ => {
                if opts.paper_faithful {
                    converged = true;
                } else if step * opts.shrink < opts.min_step {
                    if schedule_start - value > opts.threshold {
                        schedule_start = value;
                        step = opts.step;
                    } else {
                        converged = true;
                    }
                } else {
                    step *= opts.shrink;
                }
            }
        }
    }

    let fresh = panel.portfolio(&weights);
    let objective_value = opts.objective.evaluate(&fresh, &mut scratch)?;
    Ok(FrontierPoint {
        target,
        risk: opts.objective.risk(objective_value),
        objective_value,
        weights,
        iterations,
        converged,
        final_step: step,
    })
}

/// Minimum-norm shift `c` with `1'c = 0` and `μ'c = delta`.
fn mean_shift(means: &[f64], delta: f64) -> Option<Vec<f64>> {
    let (avg, spread) = mean_spread(means);
    (spread > 0.0).then(|| means.iter().map(|m| delta * (m - avg) / spread).collect())
}

/// Solves every target in order, warm-starting each from the previous
/// solution shifted onto the new target. Errors are reported per point.
pub fn numeric_frontier(
    panel: &ReturnPanel,
    targets: &[f64],
    opts: &SearchOptions,
) -> Vec<Result<FrontierPoint>> {
    let means = panel.means();
    let mut previous: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        let warm = previous.as_ref().and_then(|w| {
            let achieved: f64 = w.iter().zip(&means).map(|(a, m)| a * m).sum();
            let shift = mean_shift(&means, target - achieved)?;
            let start: Vec<f64> = w.iter().zip(shift).map(|(a, c)| a + c).collect();
            (!opts.long_only || start.iter().all(|&x| x >= 0.0)).then_some(start)
        });
        let result = match warm {
            Some(start) => minimize_from(panel, target, start, opts)
                .or_else(|_| minimize(panel, target, opts)),
            None => minimize(panel, target, opts),
        };
        if let Ok(pt) = &result {
            previous = Some(pt.weights.clone());
        }
        out.push(result);
    }
    out
}

/// Frontier points at one target with and without short selling.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortSellingPair {
    pub target: f64,
    pub unconstrained: Result<FrontierPoint>,
    pub long_only: Result<FrontierPoint>,
}

/// Solves both frontiers over the same targets. Any long-only solution is
/// feasible without the sign constraint, so the unconstrained search is also
/// run from it and the lower-risk result is kept.
pub fn short_selling_comparison(
    panel: &ReturnPanel,
    targets: &[f64],
    opts: &SearchOptions,
) -> Vec<ShortSellingPair> {
    let free_opts = SearchOptions {
        long_only: false,
        ..*opts
    };
    let long_opts = SearchOptions {
        long_only: true,
        ..*opts
    };
    let free = numeric_frontier(panel, targets, &free_opts);
    let long = numeric_frontier(panel, targets, &long_opts);
    targets
        .iter()
        .zip(free.into_iter().zip(long))
        .map(|(&target, (free, long))| {
            let seeded = long
                .as_ref()
                .ok()
                .map(|l| minimize_from(panel, target, l.weights.clone(), &free_opts));
            let unconstrained = match (free, seeded) {
                (Ok(a), Some(Ok(b))) if b.objective_value < a.objective_value => Ok(b),
                (Err(_), Some(Ok(b))) => Ok(b),
                (free, _) => free,
            };
            ShortSellingPair {
                target,
                unconstrained,
                long_only: long,
            }
        })
        .collect()
}

/// Per-asset percent change `100 (alt - ref) / |ref|`; `None` where the
/// reference weight is zero.
pub fn distortion_rate(reference: &[f64], alternative: &[f64]) -> Result<Vec<Option<f64>>> {
    if reference.len() != alternative.len() {
        return Err(Error::InvalidInput("weight vectors differ in length".into()));
    }
    Ok(reference
        .iter()
        .zip(alternative)
        .map(|(r, a)| (r.abs() >= 1e-12).then(|| 100.0 * (a - r) / r.abs()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_unconstrained_min_norm() {
        let w = feasible_start(&[0.0, 1.0], 0.5, false).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        let means = [0.2, -0.1, 0.7, 0.05];
        let w = feasible_start(&means, 0.3, false).unwrap();
        let s: f64 = w.iter().sum();
        let m: f64 = w.iter().zip(&means).map(|(a, b)| a * b).sum();
        assert!((s - 1.0).abs() < 1e-14 && (m - 0.3).abs() < 1e-14);
    }

    #[test]
    fn start_long_only() {
        assert_eq!(feasible_start(&[1.0, 2.0, 3.0], 3.0, true).unwrap(), vec![0.0, 0.0, 1.0]);
        let w = feasible_start(&[1.0, 3.0, 2.0], 2.5, true).unwrap();
        assert_eq!(w, vec![0.0, 0.5, 0.5]);
        assert!(matches!(
            feasible_start(&[1.0, 2.0, 3.0], 3.5, true),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn start_degenerate_means() {
        assert!(matches!(
            feasible_start(&[1.0, 1.0], 2.0, false),
            Err(Error::Infeasible { .. })
        ));
        assert_eq!(feasible_start(&[1.0, 1.0], 1.0, false), Err(Error::DegenerateMeans));
        assert_eq!(feasible_start(&[0.4], 0.4, false).unwrap(), vec![1.0]);
    }

    #[test]
    fn direction_hand_case() {
        let set = direction_set(&[1.0, 2.0, 4.0], 0.001);
        assert_eq!(set.directions.len(), 6);
        let dw = &set.directions[0];
        assert!((dw[0] - 0.001).abs() < 1e-15);
        assert!((dw[1] + 0.0015).abs() < 1e-15);
        assert!((dw[2] - 0.0005).abs() < 1e-15);
        assert_eq!(set.directions[1], dw.iter().map(|v| -v).collect::<Vec<_>>());
    }

    #[test]
    fn directions_preserve_constraints() {
        let means = [0.05, 0.038, 0.013, 0.0067, 0.2, 0.097];
        for dw in direction_set(&means, 0.001).directions {
            let s: f64 = dw.iter().sum();
            let m: f64 = dw.iter().zip(&means).map(|(a, b)| a * b).sum();
            assert!(s.abs() < 1e-15 && m.abs() < 1e-15);
        }
    }

    #[test]
    fn direction_partner_fallback() {
        // For i = 0 the partner 1 has mean equal to the average of {2, 3}.
        let set = direction_set(&[0.0, 2.0, 1.0, 3.0], 1.0);
        assert_eq!(set.directions.len(), 8);
        assert!(set.warnings.is_empty());
        let dw = &set.directions[0];
        assert_eq!(dw[1], dw[3]);
    }

    #[test]
    fn two_assets_have_no_directions() {
        assert!(direction_set(&[0.0, 1.0], 0.001).directions.is_empty());
    }

    #[test]
    fn distortion_cases() {
        let r = distortion_rate(&[0.5, -1.83, 0.0], &[0.5, -20.98, 0.1]).unwrap();
        assert_eq!(r[0], Some(0.0));
        assert_eq!((r[1].unwrap() * 100.0).round() / 100.0, -1046.45);
        assert_eq!(r[2], None);
        assert!(distortion_rate(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn objective_tail_matches_estimators() {
        let s = [0.3, -1.2, 4.0, 2.2, -0.7, 1.1, 0.05, -2.5, 3.1, -0.4];
        let p = PrudenceLevel::new(0.5).unwrap();
        let mut scratch = Vec::new();
        let tg = Objective::TailGini(p).evaluate(&s, &mut scratch).unwrap();
        assert!((tg - crate::estimators::tail_gini(&s, p).unwrap()).abs() < 1e-15);
        let sd = Objective::TailSd(p).evaluate(&s, &mut scratch).unwrap();
        assert!((sd - crate::estimators::tail_sd(&s, p).unwrap()).abs() < 1e-15);
        let g = Objective::Gmd.evaluate(&s, &mut scratch).unwrap();
        assert!((g - crate::estimators::gmd(&s)).abs() < 1e-15);
        let v = Objective::Variance.evaluate(&s, &mut scratch).unwrap();
        assert!((v.sqrt() - crate::estimators::std_dev(&s)).abs() < 1e-14);
    }
}
