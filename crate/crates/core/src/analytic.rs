//! Closed-form efficient frontier for a quadratic risk model `α'Vα` under
//! the budget and target-mean constraints.
//!
//! With `A = 1'V⁻¹μ`, `B = μ'V⁻¹μ`, `C = 1'V⁻¹1` and `D = BC - A²`, the
//! optimal weights are `α = x + μ* y` where
//! `x = (B V⁻¹1 - A V⁻¹μ) / D` and `y = (C V⁻¹μ - A V⁻¹1) / D`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dependence::{max_asymmetry, tail_gini_corr};
use crate::error::{Error, Result};
use crate::estimators::{mean, tail_gini, tail_subset, PrudenceLevel};
use crate::panel::ReturnPanel;

/// Gap above which a symmetrized model emits a warning.
pub const SYMMETRIZATION_WARNING: f64 = 0.1;
/// Largest accepted condition number of `V`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskKind {
    /// `V = C H_sym C` with `C = diag(TGini_p)`.
    TailGini,
    /// Sample covariance matrix.
    Variance,
    /// `V = D R_sym D` with `D = diag(SD_p)` and tail-conditional Pearson
    /// correlations.
    TailVariance,
}

impl RiskKind {
    pub fn label(self) -> &'static str {
        match self {
            RiskKind::TailGini => "tail-gini",
            RiskKind::Variance => "variance",
            RiskKind::TailVariance => "tail-variance",
        }
    }

    fn needs_level(self) -> bool {
        !matches!(self, RiskKind::Variance)
    }
}

/// Expected returns and a symmetric positive-definite risk matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    pub assets: Vec<String>,
    pub mu: DVector<f64>,
    pub v: DMatrix<f64>,
    pub kind: RiskKind,
    pub prudence: Option<f64>,
    /// `max |H - H'|` of the correlation matrix before symmetrization.
    pub symmetrization_gap: f64,
    /// Ridge added to the diagonal, if any.
    pub ridge: f64,
    pub min_eigenvalue: f64,
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ModelOptions {
    /// Add `1e-8 * trace / d` to the diagonal when `V` is not positive
    /// definite.
    pub ridge_repair: bool,
}

impl RiskModel {
    /// Wraps a user-supplied `(μ, V)` after the symmetry and
    /// positive-definiteness checks.
    pub fn from_parts(
        assets: Vec<String>,
        mu: Vec<f64>,
        v: DMatrix<f64>,
        kind: RiskKind,
        prudence: Option<f64>,
    ) -> Result<Self> {
        Self::finish(assets, mu, v, kind, prudence, 0.0, ModelOptions::default())
    }

    fn finish(
        assets: Vec<String>,
        mu: Vec<f64>,
        v: DMatrix<f64>,
        kind: RiskKind,
        prudence: Option<f64>,
        gap: f64,
        opts: ModelOptions,
    ) -> Result<Self> {
        let d = mu.len();
        if d == 0 || v.nrows() != d || v.ncols() != d {
            return Err(Error::InvalidInput(format!(
                "mean vector of length {d} with a {}x{} risk matrix",
                v.nrows(),
                v.ncols()
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite model entry".into()));
        }
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
        if (&v - v.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("risk matrix is not symmetric".into()));
        }
        let mut v = (&v + v.transpose()) * 0.5;
        let mut warnings = Vec::new();
        if gap > SYMMETRIZATION_WARNING {
            warnings.push(format!(
                "correlation matrix asymmetry {gap:.4} exceeds {SYMMETRIZATION_WARNING}; \
                 the closed form assumes tail exchangeability"
            ));
        }
        let (mut lmin, mut lmax) = extreme_eigenvalues(&v);
        let mut ridge = 0.0;
        if !is_positive_definite(lmin, lmax) && opts.ridge_repair {
            ridge = 1e-8 * v.trace() / d as f64;
            for i in 0..d {
                v[(i, i)] += ridge;
            }
            (lmin, lmax) = extreme_eigenvalues(&v);
            warnings.push(format!("ridge {ridge:e} added to the risk matrix diagonal"));
        }
        if !is_positive_definite(lmin, lmax) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: lmin,
            });
        }
        Ok(Self {
            assets,
            mu: DVector::from_vec(mu),
            v,
            kind,
            prudence,
            symmetrization_gap: gap,
            ridge,
            min_eigenvalue: lmin,
            condition_number: lmax / lmin,
            warnings,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `sqrt(α'Vα)`.
    pub fn risk(&self, weights: &[f64]) -> f64 {
        let a = DVector::from_column_slice(weights);
        (a.dot(&(&self.v * &a))).max(0.0).sqrt()
    }
}

fn extreme_eigenvalues(v: &DMatrix<f64>) -> (f64, f64) {
    let eig = v.clone().symmetric_eigenvalues();
    let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lmin, lmax)
}

/// A numerically zero smallest eigenvalue (relative to the largest) counts
/// as singular.
fn is_positive_definite(lmin: f64, lmax: f64) -> bool {
    lmin > 0.0 && lmin > 1e-14 * lmax
}

/// Sample covariance matrix (divides by `n - 1`).
pub fn sample_covariance(panel: &ReturnPanel) -> DMatrix<f64> {
    let d = panel.n_assets();
    let n = panel.n_obs() as f64;
    let means = panel.means();
    let mut v = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let (ci, cj) = (panel.column(i), panel.column(j));
            let s: f64 = ci
                .iter()
                .zip(cj)
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum();
            v[(i, j)] = s / (n - 1.0);
            v[(j, i)] = v[(i, j)];
        }
    }
    v
}

/// Pearson correlation of `x` and `y` over the tail of `x`.
fn tail_pearson(x: &[f64], y: &[f64], p: PrudenceLevel) -> Result<f64> {
    let tail = tail_subset(x, p)?;
    let xs: Vec<f64> = tail.indices.iter().map(|&k| x[k]).collect();
    let ys: Vec<f64> = tail.indices.iter().map(|&k| y[k]).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateMarginal);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

fn symmetrize(h: &[Vec<f64>]) -> DMatrix<f64> {
    let d = h.len();
    DMatrix::from_fn(d, d, |i, j| 0.5 * (h[i][j] + h[j][i]))
}

/// Builds the risk model of a panel.
///
/// `p` is required for the tail kinds and ignored for `Variance`.
pub fn build_risk_model(
    panel: &ReturnPanel,
    kind: RiskKind,
    p: Option<PrudenceLevel>,
    opts: ModelOptions,
) -> Result<RiskModel> {
    let d = panel.n_assets();
    let names = panel.assets();
    let mu = panel.means();
    let level = match (kind.needs_level(), p) {
        (true, Some(p)) => Some(p),
        (true, None) => {
            return Err(Error::InvalidInput(format!(
                "{} model requires a prudence level",
                kind.label()
            )))
        }
        (false, _) => None,
    };
    let cols = panel.columns();
    let (v, gap) = match kind {
        RiskKind::Variance => (sample_covariance(panel), 0.0),
        RiskKind::TailGini => {
            let p = level.expect("checked above");
            let c: Vec<f64> = cols
                .iter()
                .zip(names)
                .map(|(x, name)| tail_gini(x, p).map_err(|e| Error::pair(name, name, e)))
                .collect::<Result<_>>()?;
            let mut h = vec![vec![1.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        h[i][j] = tail_gini_corr(&cols[i], &cols[j], p)
                            .map_err(|e| Error::pair(&names[i], &names[j], e))?;
                    }
                }
            }
            let hs = symmetrize(&h);
            (
                DMatrix::from_fn(d, d, |i, j| c[i] * hs[(i, j)] * c[j]),
                max_asymmetry(&h),
            )
        }
        RiskKind::TailVariance => {
            let p = level.expect("checked above");
            let sd: Vec<f64> = cols
                .iter()
                .zip(names)
                .map(|(x, name)| {
                    crate::estimators::tail_sd(x, p).map_err(|e| Error::pair(name, name, e))
                })
                .collect::<Result<_>>()?;
            let mut r = vec![vec![1.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        r[i][j] = tail_pearson(&cols[i], &cols[j], p)
                            .map_err(|e| Error::pair(&names[i], &names[j], e))?;
                    }
                }
            }
            let rs = symmetrize(&r);
            (
                DMatrix::from_fn(d, d, |i, j| sd[i] * rs[(i, j)] * sd[j]),
                max_asymmetry(&r),
            )
        }
    };
    RiskModel::finish(
        names.to_vec(),
        mu,
        v,
        kind,
        level.map(PrudenceLevel::value),
        gap,
        opts,
    )
}

/// The frontier constants `A, B, C, D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierScalars {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl FrontierScalars {
    /// Squared risk on the frontier, `(C μ*² - 2 A μ* + B) / D`.
    pub fn risk_squared(&self, target: f64) -> f64 {
        (self.c * target * target - 2.0 * self.a * target + self.b) / self.d
    }

    /// Target of the global minimum-risk portfolio, `A / C`.
    pub fn min_risk_target(&self) -> f64 {
        self.a / self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFrontierPoint {
    pub target: f64,
    pub weights: Vec<f64>,
    pub risk: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub scalars: FrontierScalars,
}

/// Pre-solved systems `V⁻¹1` and `V⁻¹μ` shared by every target.
#[derive(Debug, Clone)]
pub struct FrontierSolver {
    inv_ones: DVector<f64>,
    inv_mu: DVector<f64>,
    scalars: FrontierScalars,
    v: DMatrix<f64>,
    mu: DVector<f64>,
}

impl FrontierSolver {
    pub fn new(model: &RiskModel) -> Result<Self> {
        if model.condition_number > MAX_CONDITION {
            return Err(Error::IllConditioned(model.condition_number));
        }
        let d = model.dim();
        let chol = model.v.clone().cholesky().ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: model.min_eigenvalue,
        })?;
        let ones = DVector::from_element(d, 1.0);
        let inv_ones = chol.solve(&ones);
        let inv_mu = chol.solve(&model.mu);
        let a = ones.dot(&inv_mu);
        let b = model.mu.dot(&inv_mu);
        let c = ones.dot(&inv_ones);
        let dd = b * c - a * a;
        // D >= 0 by Cauchy-Schwarz; treat a relative zero as collinearity.
        if !(dd > 1e-12 * (b * c).abs()) {
            return Err(Error::DegenerateFrontier);
        }
        Ok(Self {
            inv_ones,
            inv_mu,
            scalars: FrontierScalars { a, b, c, d: dd },
            v: model.v.clone(),
            mu: model.mu.clone(),
        })
    }

    pub fn scalars(&self) -> FrontierScalars {
        self.scalars
    }

    /// Weights of the two-fund decomposition `α = x + μ* y`.
    pub fn fund_vectors(&self) -> (Vec<f64>, Vec<f64>) {
        let FrontierScalars { a, b, c, d } = self.scalars;
        let x = (&self.inv_ones * b - &self.inv_mu * a) / d;
        let y = (&self.inv_mu * c - &self.inv_ones * a) / d;
        (x.as_slice().to_vec(), y.as_slice().to_vec())
    }

    pub fn solve(&self, target: f64) -> AnalyticFrontierPoint {
        let FrontierScalars { a, b, c, d } = self.scalars;
        let lambda = (c * target - a) / d;
        let gamma = (b - a * target) / d;
        let alpha = &self.inv_mu * lambda + &self.inv_ones * gamma;
        let risk = alpha.dot(&(&self.v * &alpha)).max(0.0).sqrt();
        debug_assert!((alpha.dot(&self.mu) - target).abs() < 1e-6 * (1.0 + target.abs()));
        AnalyticFrontierPoint {
            target,
            weights: alpha.as_slice().to_vec(),
            risk,
            lambda,
            gamma,
            scalars: self.scalars,
        }
    }
}

/// Optimal weights for one target mean.
pub fn solve_analytic(model: &RiskModel, target: f64) -> Result<AnalyticFrontierPoint> {
    Ok(FrontierSolver::new(model)?.solve(target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticFrontier {
    pub points: Vec<AnalyticFrontierPoint>,
    pub min_risk_target: f64,
    pub min_risk: f64,
    pub scalars: FrontierScalars,
}

pub fn analytic_frontier(model: &RiskModel, targets: &[f64]) -> Result<AnalyticFrontier> {
    let solver = FrontierSolver::new(model)?;
    let s = solver.scalars();
    Ok(AnalyticFrontier {
        points: targets.iter().map(|&t| solver.solve(t)).collect(),
        min_risk_target: s.min_risk_target(),
        min_risk: (1.0 / s.c).sqrt(),
        scalars: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(mu: Vec<f64>, v: DMatrix<f64>) -> RiskModel {
        let names = (0..mu.len()).map(|i| format!("a{i}")).collect();
        RiskModel::from_parts(names, mu, v, RiskKind::Variance, None).unwrap()
    }

    #[test]
    fn identity_two_asset_cases() {
        let m = model(vec![0.0, 1.0], DMatrix::identity(2, 2));
        let half = solve_analytic(&m, 0.5).unwrap();
        assert!((half.weights[0] - 0.5).abs() < 1e-10);
        assert!((half.weights[1] - 0.5).abs() < 1e-10);
        let zero = solve_analytic(&m, 0.0).unwrap();
        assert!((zero.weights[0] - 1.0).abs() < 1e-10);
        assert!(zero.weights[1].abs() < 1e-10);
        let (x, y) = FrontierSolver::new(&m).unwrap().fund_vectors();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!((y[0] + 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_means_are_degenerate() {
        let m = model(vec![0.3, 0.3, 0.3], DMatrix::identity(3, 3));
        assert_eq!(solve_analytic(&m, 0.3), Err(Error::DegenerateFrontier));
    }

    #[test]
    fn min_risk_portfolio() {
        let v = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5]);
        let m = model(vec![0.1, 0.4, -0.2], v);
        let f = analytic_frontier(&m, &[]).unwrap();
        let pt = solve_analytic(&m, f.min_risk_target).unwrap();
        assert!((pt.risk * pt.risk - 1.0 / f.scalars.c).abs() < 1e-12);
    }

    #[test]
    fn symmetric_model_is_balanced_at_zero() {
        let v = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 1.3]);
        let m = model(vec![-0.7, 0.7], v);
        let pt = solve_analytic(&m, 0.0).unwrap();
        assert!((pt.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular_and_asymmetric() {
        let names = vec!["a".to_string(), "b".to_string()];
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            RiskModel::from_parts(names.clone(), vec![0.0, 1.0], ones.clone(), RiskKind::Variance, None),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.1, 1.0]);
        assert!(RiskModel::from_parts(names.clone(), vec![0.0, 1.0], asym, RiskKind::Variance, None)
            .is_err());
        let repaired = RiskModel::finish(
            names,
            vec![0.0, 1.0],
            ones,
            RiskKind::Variance,
            None,
            0.0,
            ModelOptions { ridge_repair: true },
        )
        .unwrap();
        assert!(repaired.ridge > 0.0);
        assert!(!repaired.warnings.is_empty());
    }

    #[test]
    fn ill_conditioned_is_rejected() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-13]);
        let m = model(vec![0.0, 1.0], v);
        assert!(matches!(solve_analytic(&m, 0.5), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn single_asset_tail_gini_model() {
        let x = vec![0.3, -1.2, 4.0, 2.2, -0.7, 1.1, 0.05, -2.5, 3.1, -0.4];
        let panel = ReturnPanel::from_columns(vec!["a".into()], vec![x.clone()]).unwrap();
        let p = PrudenceLevel::new(0.5).unwrap();
        let m = build_risk_model(&panel, RiskKind::TailGini, Some(p), ModelOptions::default())
            .unwrap();
        let tg = tail_gini(&x, p).unwrap();
        assert!((m.v[(0, 0)] - tg * tg).abs() < 1e-12);
        assert!(build_risk_model(&panel, RiskKind::TailGini, None, ModelOptions::default()).is_err());
    }
}
