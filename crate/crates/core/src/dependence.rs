//! Pearson, Gini and tail-Gini correlations, the tail-exchangeability
//! diagnostic, and the portfolio tail-Gini decomposition.
//!
//! `Γ_{ij,p} = Cov[L_i, F_j(L_j) | L_j < VaR_p(L_j)] / Cov[L_i, F_i(L_i) | L_i < VaR_p(L_i)]`.
//! Numerator and denominator condition on different index sets (the tail of
//! the second argument and the tail of the first argument respectively), and
//! both use the global empirical CDFs. Values outside `[-1, 1]` are legal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{cov_pop, ecdf, mean, tail_subset, PrudenceLevel};
use crate::panel::ReturnPanel;

/// Empirical CDF and conditioning index set of one series.
#[derive(Debug, Clone)]
struct Marginal {
    cdf: Vec<f64>,
    /// Conditioning set: the strict tail, or every index when unconditional.
    indices: Vec<usize>,
}

impl Marginal {
    fn tail(series: &[f64], p: PrudenceLevel) -> Result<Self> {
        let tail = tail_subset(series, p)?;
        Ok(Self {
            cdf: ecdf(series),
            indices: tail.indices,
        })
    }

    fn full(series: &[f64]) -> Self {
        Self {
            cdf: ecdf(series),
            indices: (0..series.len()).collect(),
        }
    }

    fn build(series: &[f64], p: Option<PrudenceLevel>) -> Result<Self> {
        match p {
            Some(p) => Self::tail(series, p),
            None => Ok(Self::full(series)),
        }
    }

    /// `Cov[x, F(self) | self's conditioning set]`, population-normalized.
    fn cov_with(&self, x: &[f64]) -> f64 {
        conditional_cov(x, &self.cdf, &self.indices)
    }
}

fn conditional_cov(x: &[f64], f: &[f64], idx: &[usize]) -> f64 {
    let m = idx.len() as f64;
    let mx = idx.iter().map(|&k| x[k]).sum::<f64>() / m;
    let mf = idx.iter().map(|&k| f[k]).sum::<f64>() / m;
    idx.iter().map(|&k| (x[k] - mx) * (f[k] - mf)).sum::<f64>() / m
}

/// Ratio of rank covariances; zero (up to rounding) denominators are
/// rejected.
fn rank_ratio(num: f64, den: f64, x: &[f64]) -> Result<f64> {
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if den.abs() <= 1e-14 * scale || den == 0.0 {
        return Err(Error::DegenerateMarginal);
    }
    Ok(num / den)
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("at least two observations required".into()));
    }
    Ok(())
}

/// Pearson correlation.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateMarginal);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Gini correlation `Γ_xy = Cov[x, F_y(y)] / Cov[x, F_x(x)]`.
pub fn gini_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let num = cov_pop(x, &ecdf(y));
    let den = cov_pop(x, &ecdf(x));
    rank_ratio(num, den, x)
}

/// Tail Gini correlation `Γ_{xy,p}`.
pub fn tail_gini_corr(x: &[f64], y: &[f64], p: PrudenceLevel) -> Result<f64> {
    check_lengths(x, y)?;
    let mx = Marginal::tail(x, p)?;
    let my = Marginal::tail(y, p)?;
    rank_ratio(my.cov_with(x), mx.cov_with(x), x)
}

/// Pearson, Gini and tail-Gini correlation matrices of a panel.
///
/// Row `i`, column `j` of the Gini and tail-Gini matrices hold `Γ_{ij}` and
/// `Γ_{ij,p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceMatrices {
    pub assets: Vec<String>,
    pub prudence: f64,
    pub pearson: Vec<Vec<f64>>,
    pub gini: Vec<Vec<f64>>,
    pub tail_gini: Vec<Vec<f64>>,
    /// `max_{i,j} |H[i][j] - H[j][i]|` of the tail-Gini matrix.
    pub asymmetry: f64,
    pub normalization: String,
}

pub fn dependence_matrices(panel: &ReturnPanel, p: PrudenceLevel) -> Result<DependenceMatrices> {
    let d = panel.n_assets();
    let names = panel.assets();
    let cols = panel.columns();
    let tails: Vec<Marginal> = cols
        .iter()
        .zip(names)
        .map(|(c, name)| Marginal::tail(c, p).map_err(|e| Error::pair(name, name, e)))
        .collect::<Result<_>>()?;
    let fulls: Vec<Marginal> = cols.iter().map(|c| Marginal::full(c)).collect();

    let mut pearson = vec![vec![1.0; d]; d];
    let mut gini = vec![vec![1.0; d]; d];
    let mut tail = vec![vec![1.0; d]; d];
    let self_tail: Vec<f64> = (0..d).map(|i| tails[i].cov_with(&cols[i])).collect();
    let self_full: Vec<f64> = (0..d).map(|i| fulls[i].cov_with(&cols[i])).collect();
    for i in 0..d {
        for j in 0..d {
            let wrap = |e| Error::pair(&names[i], &names[j], e);
            if i == j {
                rank_ratio(self_tail[i], self_tail[i], &cols[i]).map_err(wrap)?;
                continue;
            }
            if j > i {
                let r = pearson_corr(&cols[i], &cols[j]).map_err(wrap)?;
                pearson[i][j] = r;
                pearson[j][i] = r;
            }
            gini[i][j] =
                rank_ratio(fulls[j].cov_with(&cols[i]), self_full[i], &cols[i]).map_err(wrap)?;
            tail[i][j] =
                rank_ratio(tails[j].cov_with(&cols[i]), self_tail[i], &cols[i]).map_err(wrap)?;
        }
    }
    Ok(DependenceMatrices {
        assets: names.to_vec(),
        prudence: p.value(),
        pearson,
        gini,
        asymmetry: max_asymmetry(&tail),
        tail_gini: tail,
        normalization: "population".into(),
    })
}

/// `max_{i,j} |m[i][j] - m[j][i]|`.
pub fn max_asymmetry(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    let mut gap = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            gap = gap.max((m[i][j] - m[j][i]).abs());
        }
    }
    gap
}

/// Tail-exchangeability profile of one asset pair over a grid of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeabilityReport {
    pub pair: (usize, usize),
    pub assets: (String, String),
    pub levels: Vec<f64>,
    pub gamma_ij: Vec<f64>,
    pub gamma_ji: Vec<f64>,
    pub gaps: Vec<f64>,
    pub exchangeable_at_tol: Vec<bool>,
    /// Largest grid level `p*` such that every gap at levels `<= p*` is
    /// within tolerance.
    pub exchangeable_up_to: Option<f64>,
}

pub fn check_exchangeability(
    panel: &ReturnPanel,
    levels: &[PrudenceLevel],
    tol: f64,
) -> Result<Vec<ExchangeabilityReport>> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("no prudence levels given".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let mut grid = levels.to_vec();
    grid.sort_by(|a, b| a.value().total_cmp(&b.value()));
    grid.dedup();

    let d = panel.n_assets();
    let names = panel.assets();
    let mut reports = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let (x, y) = (panel.column(i), panel.column(j));
            let wrap = |e| Error::pair(&names[i], &names[j], e);
            let mut gamma_ij = Vec::with_capacity(grid.len());
            let mut gamma_ji = Vec::with_capacity(grid.len());
            for &p in &grid {
                gamma_ij.push(tail_gini_corr(x, y, p).map_err(wrap)?);
                gamma_ji.push(tail_gini_corr(y, x, p).map_err(wrap)?);
            }
            let gaps: Vec<f64> = gamma_ij.iter().zip(&gamma_ji).map(|(a, b)| (a - b).abs()).collect();
            let ok: Vec<bool> = gaps.iter().map(|&g| g <= tol).collect();
            let up_to = ok
                .iter()
                .take_while(|&&b| b)
                .count()
                .checked_sub(1)
                .map(|k| grid[k].value());
            reports.push(ExchangeabilityReport {
                pair: (i, j),
                assets: (names[i].clone(), names[j].clone()),
                levels: grid.iter().map(|p| p.value()).collect(),
                gamma_ij,
                gamma_ji,
                gaps,
                exchangeable_at_tol: ok,
                exchangeable_up_to: up_to,
            });
        }
    }
    Ok(reports)
}

/// Portfolio tail Gini split into per-asset conditional covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailGiniDecomposition {
    /// `4/p * Cov[L, F(L) | L < VaR_p(L)]` computed directly on the
    /// portfolio series.
    pub tgini_cov_form: f64,
    /// Gini mean difference of the portfolio tail (the canonical estimator).
    pub tgini: f64,
    /// `Cov[L_i, F(L) | L < VaR_p(L)]`.
    pub covariances: Vec<f64>,
    /// `T_i = 4/p * Cov[L_i, F(L) | L < VaR_p(L)] = TGini_p(L_i) Γ_{iL,p}`;
    /// `α'T` equals `tgini_cov_form`.
    pub t: Vec<f64>,
}

pub fn portfolio_tail_gini_decomposition(
    panel: &ReturnPanel,
    weights: &[f64],
    p: PrudenceLevel,
) -> Result<TailGiniDecomposition> {
    check_weights(panel, weights)?;
    let port = panel.portfolio(weights);
    let m = Marginal::tail(&port, p)?;
    let scale = 4.0 / p.value();
    let covariances: Vec<f64> = panel.columns().iter().map(|c| m.cov_with(c)).collect();
    let tail_values: Vec<f64> = m.indices.iter().map(|&k| port[k]).collect();
    Ok(TailGiniDecomposition {
        tgini_cov_form: scale * m.cov_with(&port),
        tgini: crate::estimators::gmd(&tail_values),
        t: covariances.iter().map(|c| scale * c).collect(),
        covariances,
    })
}

fn check_weights(panel: &ReturnPanel, weights: &[f64]) -> Result<()> {
    if weights.len() != panel.n_assets() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} assets",
            weights.len(),
            panel.n_assets()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("non-finite weight".into()));
    }
    Ok(())
}

/// Both sides of the portfolio tail-Gini identity
/// `TG_L^2 - TG_L Σ α_i D_iL TG_i = ½ ΣΣ α_i α_j TG_i TG_j (Γ_ij + Γ_ji)`.
///
/// With a prudence level every tail Gini is in covariance form,
/// `4/p * Cov[X, F(X) | tail]`; with `None` the unconditional Gini mean
/// difference `4 Cov[X, F(X)]` and full Gini correlations are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|)`, zero when both sides vanish.
    pub relative_residual: f64,
    pub portfolio_risk: f64,
    pub asset_risks: Vec<f64>,
    /// `Γ_{iL}` per asset.
    pub gamma_asset_portfolio: Vec<f64>,
    /// `Γ_{Li}` per asset.
    pub gamma_portfolio_asset: Vec<f64>,
    /// Asset-by-asset correlation matrix `Γ_ij`.
    pub gamma: Vec<Vec<f64>>,
}

pub fn tail_gini_identity_check(
    panel: &ReturnPanel,
    weights: &[f64],
    p: Option<PrudenceLevel>,
) -> Result<IdentityCheck> {
    check_weights(panel, weights)?;
    let cols = panel.columns();
    let d = cols.len();
    let scale = p.map_or(4.0, |p| 4.0 / p.value());
    let port = panel.portfolio(weights);
    let pm = Marginal::build(&port, p)?;
    let ms: Vec<Marginal> = cols.iter().map(|c| Marginal::build(c, p)).collect::<Result<_>>()?;

    let port_self = pm.cov_with(&port);
    let asset_self: Vec<f64> = (0..d).map(|i| ms[i].cov_with(&cols[i])).collect();
    let tg_l = scale * port_self;
    let tg: Vec<f64> = asset_self.iter().map(|c| scale * c).collect();

    let mut gamma = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            gamma[i][j] = rank_ratio(ms[j].cov_with(&cols[i]), asset_self[i], &cols[i])?;
        }
    }
    let mut g_il = Vec::with_capacity(d);
    let mut g_li = Vec::with_capacity(d);
    for i in 0..d {
        g_il.push(rank_ratio(pm.cov_with(&cols[i]), asset_self[i], &cols[i])?);
        g_li.push(rank_ratio(ms[i].cov_with(&port), port_self, &port)?);
    }

    let asym: f64 = (0..d)
        .map(|i| weights[i] * (g_il[i] - g_li[i]) * tg[i])
        .sum();
    let lhs = tg_l * tg_l - tg_l * asym;
    let mut rhs = 0.0;
    for i in 0..d {
        for j in 0..d {
            rhs += 0.5 * weights[i] * weights[j] * tg[i] * tg[j] * (gamma[i][j] + gamma[j][i]);
        }
    }
    let residual = lhs - rhs;
    let denom = lhs.abs().max(rhs.abs());
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual,
        relative_residual: if denom > 0.0 { residual.abs() / denom } else { 0.0 },
        portfolio_risk: tg_l,
        asset_risks: tg,
        gamma_asset_portfolio: g_il,
        gamma_portfolio_asset: g_li,
        gamma,
    })
}
