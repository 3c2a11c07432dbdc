//! Seeded synthetic panels.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)`, so a given
//! seed and parameter set always yields the same sample.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn asset_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("a{i}")).collect()
}

/// `n` draws of `N(μ, Σ)` via the Cholesky factor of `Σ`.
pub fn mvnormal_panel(mu: &[f64], sigma: &[Vec<f64>], n: usize, seed: u64) -> Result<ReturnPanel> {
    let d = mu.len();
    if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("covariance shape does not match the mean".into()));
    }
    let s = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
    if (0..d).any(|i| (0..i).any(|j| s[(i, j)] != s[(j, i)])) {
        return Err(Error::InvalidInput("covariance is not symmetric".into()));
    }
    let chol = s.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        min_eigenvalue: s.symmetric_eigenvalues().min(),
    })?;
    let l = chol.l();
    let mut r = rng(seed);
    let mut columns = vec![Vec::with_capacity(n); d];
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = r.sample(StandardNormal);
        }
        let x = &l * &z;
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(mu[j] + x[j]);
        }
    }
    ReturnPanel::from_columns(asset_names(d), columns)
}

/// Stratified antithetic uniforms: `u_k = (k + v_k) / n` for the lower
/// half of the strata, `v_k` in `(0, 1)`, together with their reflections
/// `1 - u_k` (and `1/2` when `n` is odd), in shuffled order. The values are
/// distinct and the set is symmetric about `1/2`.
fn stratified_uniforms(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u = Vec::with_capacity(n);
    for k in 0..n / 2 {
        let v: f64 = r.random();
        let v = if v == 0.0 { 0.5 } else { v };
        let x = (k as f64 + v) / n as f64;
        u.push(x);
        u.push(1.0 - x);
    }
    if n % 2 == 1 {
        u.push(0.5);
    }
    u.shuffle(r);
    u
}

/// Two columns driven by a common uniform (or by `u` and `1 - u` when
/// `anti` is set) pushed through the given quantile functions.
///
/// With `anti`, the tail Gini correlations equal -1 only when both
/// quantile functions are point-symmetric about `1/2`; the uniform set is
/// symmetric so that this holds exactly in sample.
pub fn monotone_pair<F, G>(q1: F, q2: G, n: usize, seed: u64, anti: bool) -> Result<ReturnPanel>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut r = rng(seed);
    let u = stratified_uniforms(n, &mut r);
    let a = u.iter().map(|&u| q1(u)).collect();
    let b = u.iter().map(|&u| q2(if anti { 1.0 - u } else { u })).collect();
    ReturnPanel::from_columns(asset_names(2), vec![a, b])
}

/// GPD quantile function.
pub fn gpd_quantile(xi: f64, beta: f64, u: f64) -> f64 {
    if xi == 0.0 {
        -beta * (-u).ln_1p()
    } else {
        beta / xi * ((1.0 - u).powf(-xi) - 1.0)
    }
}

/// `n` GPD(ξ, β) draws by inverse transform.
pub fn gpd_sample(xi: f64, beta: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !xi.is_finite() {
        return Err(Error::InvalidInput(format!("invalid GPD parameters ({xi}, {beta})")));
    }
    let mut r = rng(seed);
    Ok((0..n)
        .map(|_| {
            let u: f64 = r.random();
            gpd_quantile(xi, beta, u)
        })
        .collect())
}

/// The five-point two-asset worked example.
pub fn five_point_panel() -> ReturnPanel {
    ReturnPanel::from_columns(
        asset_names(2),
        vec![vec![-2.0, -1.0, 0.0, 1.0, 2.0], vec![-1.0, 1.0, 7.0, 3.0, 5.0]],
    )
    .expect("fixed panel is valid")
}

/// Six assets mixing Gaussian returns and GPD left-tail shocks.
///
/// Assets share a common factor. Assets 4 to 6 take a crash of
/// `-GPD(ξ, β)` with probability 0.05 per period, with ξ of 0.2, 0.45 and
/// 0.7; their means are raised so the crash risk is compensated.
pub fn heavy_tailed_market(n: usize, seed: u64) -> Result<ReturnPanel> {
    const DRIFT: [f64; 6] = [0.02, 0.04, 0.06, 0.09, 0.12, 0.16];
    const VOL: [f64; 6] = [0.6, 0.9, 1.2, 1.0, 1.4, 1.8];
    const BETA: [f64; 6] = [0.3, 0.5, 0.7, 0.6, 0.8, 0.9];
    const SHOCK: [Option<(f64, f64)>; 6] =
        [None, None, None, Some((0.2, 1.0)), Some((0.45, 1.5)), Some((0.7, 2.0))];
    if n < 2 {
        return Err(Error::InvalidInput("at least two observations required".into()));
    }
    let mut r = rng(seed);
    let mut columns = vec![Vec::with_capacity(n); 6];
    for _ in 0..n {
        let factor: f64 = r.sample(StandardNormal);
        for j in 0..6 {
            let eps: f64 = r.sample(StandardNormal);
            let idio = VOL[j] * (1.0 - BETA[j] * BETA[j]).sqrt();
            let mut x = DRIFT[j] + VOL[j] * BETA[j] * factor + idio * eps;
            let u: f64 = r.random();
            if let Some((xi, beta)) = SHOCK[j] {
                if u < 0.05 {
                    let v: f64 = r.random();
                    x -= gpd_quantile(xi, beta, v);
                }
                // Offsets the expected crash loss 0.05 β / (1 - ξ).
                x += 0.05 * beta / (1.0 - xi);
            }
            columns[j].push(x);
        }
    }
    ReturnPanel::from_columns(asset_names(6), columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{mean, std_dev};

    #[test]
    fn example_means() {
        let p = five_point_panel();
        assert_eq!(p.means(), vec![0.0, 3.0]);
    }

    #[test]
    fn gpd_inverse_transform_hand_case() {
        assert!((gpd_quantile(0.5, 1.0, 0.75) - 2.0).abs() < 1e-15);
        assert_eq!(gpd_quantile(0.3, 2.0, 0.0), 0.0);
        assert_eq!(gpd_quantile(0.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn exponential_sample_mean() {
        let y = gpd_sample(0.0, 1.0, 10_000, 7).unwrap();
        assert!((mean(&y) - 1.0).abs() < 0.03);
    }

    #[test]
    fn mvnormal_identity_covariance() {
        let sigma = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let p = mvnormal_panel(&[0.0; 3], &sigma, 100_000, 11).unwrap();
        let c = crate::analytic::sample_covariance(&p);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - target).abs() < 0.03);
            }
        }
    }

    #[test]
    fn mvnormal_univariate_std() {
        let p = mvnormal_panel(&[1.0], &[vec![4.0]], 100_000, 3).unwrap();
        assert!((std_dev(p.column(0)) / 2.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn mvnormal_rejects_singular() {
        let sigma = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            mvnormal_panel(&[0.0, 0.0], &sigma, 10, 1),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn comonotone_identical_quantiles() {
        let p = monotone_pair(|u| u.ln(), |u| u.ln(), 100, 5, false).unwrap();
        assert_eq!(p.column(0), p.column(1));
    }

    #[test]
    fn reproducible() {
        let a = heavy_tailed_market(500, 9).unwrap();
        let b = heavy_tailed_market(500, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, heavy_tailed_market(500, 10).unwrap());
    }
}
