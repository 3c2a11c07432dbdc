//! Mean–tail-Gini portfolio analytics.
//!
//! Returns are percent per period. Empirical quantiles take the `⌈np⌉`-th
//! order statistic, tails are the observations strictly below it, and
//! empirical distribution functions use the maximum rank for ties.

pub mod analytic;
pub mod dependence;
pub mod error;
pub mod estimators;
pub mod gpd;
pub mod panel;
pub mod search;
pub mod synth;

pub use analytic::{
    analytic_frontier, build_risk_model, solve_analytic, AnalyticFrontier, AnalyticFrontierPoint,
    FrontierSolver, ModelOptions, RiskKind, RiskModel,
};
pub use dependence::{
    check_exchangeability, dependence_matrices, gini_corr, pearson_corr, tail_gini_corr,
    tail_gini_identity_check, DependenceMatrices, ExchangeabilityReport,
};
pub use error::{Error, Result};
pub use estimators::{gmd, tail_gini, tail_stats, PrudenceLevel, TailStats};
pub use gpd::{fit_left_tail, gpd_fit_mle, GpdFit};
pub use panel::{align, load_returns, read_returns, InputKind, LoadOptions, LoadedPanel, ReturnPanel};
pub use search::{
    distortion_rate, minimize, numeric_frontier, FrontierPoint, Objective, SearchOptions,
};
