//! Univariate risk estimators: moments, empirical VaR, tail conditional
//! expectation, tail variance, semi-variance, Gini mean difference and the
//! tail Gini.
//!
//! Conventions shared by every estimator in the crate:
//!
//! * `VaR_p` is the `ceil(n p)`-th ascending order statistic (1-based), the
//!   generalized inverse of the empirical CDF.
//! * The tail is `{x : x < VaR_p}`, with a strict inequality, and must hold
//!   at least two observations.
//! * The empirical CDF uses the maximum rank among ties,
//!   `F(x) = #{x_j <= x} / n`.
//! * Conditional moments are population-normalized (divide by the tail
//!   count `m`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A prudence level `p` in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrudenceLevel(f64);

impl PrudenceLevel {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::InvalidPrudence(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PrudenceLevel {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<PrudenceLevel> for f64 {
    fn from(p: PrudenceLevel) -> f64 {
        p.0
    }
}

impl std::fmt::Display for PrudenceLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divides by `n - 1`).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Population covariance of two equally long slices.
pub fn cov_pop(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

pub(crate) fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// 1-based rank `ceil(n p)` clamped to `[1, n]`.
///
/// The product is nudged down by a relative `1e-12` so that exact products
/// like `5 * 0.6` are not pushed to the next integer by rounding.
pub fn quantile_rank(n: usize, p: PrudenceLevel) -> usize {
    let x = n as f64 * p.value();
    let k = (x - x * 1e-12).ceil() as usize;
    k.clamp(1, n)
}

/// Empirical `VaR_p`: the `ceil(n p)`-th smallest observation.
///
/// # Panics
///
/// Panics on an empty series.
pub fn empirical_var(series: &[f64], p: PrudenceLevel) -> f64 {
    assert!(!series.is_empty(), "empirical_var on an empty series");
    let k = quantile_rank(series.len(), p);
    let mut v = series.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth
}

/// Observations strictly below the empirical `VaR_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tail {
    pub cutoff: f64,
    /// Positions in the original series, ascending.
    pub indices: Vec<usize>,
    /// Values at `indices`, in the same order.
    pub values: Vec<f64>,
}

impl Tail {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Selects the tail `{k : x_k < VaR_p}`; fails when it holds fewer than two
/// observations.
pub fn tail_subset(series: &[f64], p: PrudenceLevel) -> Result<Tail> {
    if series.len() < 2 {
        return Err(Error::DegenerateTail {
            count: 0,
        });
    }
    let cutoff = empirical_var(series, p);
    let indices: Vec<usize> = (0..series.len()).filter(|&k| series[k] < cutoff).collect();
    if indices.len() < 2 {
        return Err(Error::DegenerateTail {
            count: indices.len(),
        });
    }
    let values = indices.iter().map(|&k| series[k]).collect();
    Ok(Tail {
        cutoff,
        indices,
        values,
    })
}

/// Tail conditional expectation `E[X | X < VaR_p]`.
pub fn tce(series: &[f64], p: PrudenceLevel) -> Result<f64> {
    Ok(mean(&tail_subset(series, p)?.values))
}

/// Tail variance: population second central moment of the tail values.
pub fn tail_variance(series: &[f64], p: PrudenceLevel) -> Result<f64> {
    let tail = tail_subset(series, p)?;
    Ok(population_variance(&tail.values))
}

pub fn tail_sd(series: &[f64], p: PrudenceLevel) -> Result<f64> {
    tail_variance(series, p).map(f64::sqrt)
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Semi-variance below a benchmark: `mean((x - b)^2 * 1{x < b})`.
pub fn semi_variance(series: &[f64], benchmark: f64) -> f64 {
    let s: f64 = series
        .iter()
        .filter(|&&x| x < benchmark)
        .map(|x| (x - benchmark) * (x - benchmark))
        .sum();
    s / series.len() as f64
}

/// Gini mean difference from the order statistics,
/// `2 / (n (n - 1)) * sum_{i=1}^{n} x_(i) (2i - n - 1)`.
///
/// Equal to the mean absolute difference over all ordered pairs of distinct
/// observations. Returns 0 for fewer than two observations.
pub fn gmd(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.0;
    }
    let xs = sorted(series);
    gmd_sorted(&xs)
}

pub(crate) fn gmd_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    let nf = n as f64;
    let s: f64 = xs
        .iter()
        .enumerate()
        .map(|(i, x)| x * (2.0 * (i + 1) as f64 - (nf + 1.0)))
        .sum();
    // Rounding can leave a tiny negative value for constant input.
    (2.0 * s / (nf * (nf - 1.0))).max(0.0)
}

/// Tail Gini: the Gini mean difference of the observations strictly below
/// `VaR_p`.
pub fn tail_gini(series: &[f64], p: PrudenceLevel) -> Result<f64> {
    Ok(gmd(&tail_subset(series, p)?.values))
}

/// Empirical CDF at every observation, max-rank ties: `#{x_j <= x_k} / n`.
pub fn ecdf(series: &[f64]) -> Vec<f64> {
    let n = series.len() as f64;
    let xs = sorted(series);
    series
        .iter()
        .map(|x| xs.partition_point(|y| y <= x) as f64 / n)
        .collect()
}

/// Covariance form of the tail Gini, `4/p * Cov[X, F(X) | X < VaR_p]`, with
/// the nominal level `p` and the global empirical CDF.
///
/// Without ties this equals `tail_gini * (m - 1) / (n p)`; it is the scaling
/// under which the portfolio decomposition identities hold exactly.
pub fn tail_gini_cov_form(series: &[f64], p: PrudenceLevel) -> Result<f64> {
    let tail = tail_subset(series, p)?;
    let f = ecdf(series);
    let ft: Vec<f64> = tail.indices.iter().map(|&k| f[k]).collect();
    Ok(4.0 / p.value() * cov_pop(&tail.values, &ft))
}

/// Per-asset risk summary at one prudence level, in percent units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub asset: String,
    pub prudence: f64,
    pub mean: f64,
    pub std: f64,
    pub var_p: f64,
    pub tce_p: f64,
    /// Tail variance, percent squared.
    pub tv_p: f64,
    pub sd_p: f64,
    pub gmd: f64,
    pub tgini_p: f64,
    pub tail_count: usize,
}

pub fn tail_stats(asset: &str, series: &[f64], p: PrudenceLevel) -> Result<TailStats> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("at least two observations required".into()));
    }
    let tail = tail_subset(series, p)?;
    let tv = population_variance(&tail.values);
    Ok(TailStats {
        asset: asset.to_string(),
        prudence: p.value(),
        mean: mean(series),
        std: std_dev(series),
        var_p: tail.cutoff,
        tce_p: mean(&tail.values),
        tv_p: tv,
        sd_p: tv.sqrt(),
        gmd: gmd(series),
        tgini_p: gmd(&tail.values),
        tail_count: tail.len(),
    })
}
