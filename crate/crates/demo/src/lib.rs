//! Browser bindings for the tailgini library.
//!
//! Every export takes CSV text (a `date` column followed by one column of
//! percent returns per asset) and returns a JSON string. The plain-Rust
//! functions in [`ops`] do the work so they can be tested natively.

use wasm_bindgen::prelude::*;

pub mod ops {
    use serde_json::{json, Value};
    use tailgini::dependence::tail_gini_corr;
    use tailgini::estimators::PrudenceLevel;
    use tailgini::gpd::fit_left_tail;
    use tailgini::panel::{read_returns, LoadOptions, ReturnPanel};
    use tailgini::search::{numeric_frontier, Objective, SearchOptions};
    use tailgini::synth;

    pub type Result<T> = std::result::Result<T, String>;

    fn text<E: std::fmt::Display>(e: E) -> String {
        e.to_string()
    }

    pub fn parse_panel(csv: &str) -> Result<ReturnPanel> {
        read_returns(csv.as_bytes(), &LoadOptions::default())
            .map(|l| l.panel)
            .map_err(text)
    }

    fn level(p: f64) -> Result<PrudenceLevel> {
        PrudenceLevel::new(p).map_err(text)
    }

    pub fn objective(kind: &str, p: f64) -> Result<Objective> {
        Ok(match kind {
            "variance" => Objective::Variance,
            "gmd" => Objective::Gmd,
            "tail-gini" => Objective::TailGini(level(p)?),
            "tail-sd" => Objective::TailSd(level(p)?),
            other => return Err(format!("unknown objective {other:?}")),
        })
    }

    /// Numeric frontier over `points` evenly spaced targets between the
    /// smallest and largest asset mean.
    pub fn frontier(csv: &str, kind: &str, p: f64, long_only: bool, points: usize) -> Result<Value> {
        let panel = parse_panel(csv)?;
        if !(2..=60).contains(&points) {
            return Err("points must be between 2 and 60".into());
        }
        let means = panel.means();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let targets: Vec<f64> = (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect();
        let opts = SearchOptions {
            long_only,
            ..SearchOptions::with_objective(objective(kind, p)?)
        };
        let curve: Vec<Value> = numeric_frontier(&panel, &targets, &opts)
            .into_iter()
            .zip(&targets)
            .map(|(r, t)| match r {
                Ok(pt) => json!({"target": t, "risk": pt.risk, "weights": pt.weights}),
                Err(e) => json!({"target": t, "error": e.to_string()}),
            })
            .collect();
        Ok(json!({"assets": panel.assets(), "means": means, "objective": kind, "points": curve}))
    }

    /// `Γ_ij` and `Γ_ji` over a grid of prudence levels.
    pub fn corr_profile(csv: &str, i: usize, j: usize, levels: &[f64]) -> Result<Value> {
        let panel = parse_panel(csv)?;
        let d = panel.n_assets();
        if i >= d || j >= d {
            return Err(format!("asset index out of range (panel has {d} assets)"));
        }
        let (x, y) = (panel.column(i), panel.column(j));
        let rows: Vec<Value> = levels
            .iter()
            .map(|&p| {
                let pair = level(p).and_then(|l| {
                    Ok((
                        tail_gini_corr(x, y, l).map_err(text)?,
                        tail_gini_corr(y, x, l).map_err(text)?,
                    ))
                });
                match pair {
                    Ok((a, b)) => json!({"prudence": p, "gamma_ij": a, "gamma_ji": b, "gap": (a - b).abs()}),
                    Err(e) => json!({"prudence": p, "error": e}),
                }
            })
            .collect();
        Ok(json!({"pair": [panel.assets()[i], panel.assets()[j]], "profile": rows}))
    }

    /// GPD fit of every asset's left tail.
    pub fn gpd(csv: &str, p: f64) -> Result<Value> {
        let panel = parse_panel(csv)?;
        let l = level(p)?;
        let fits: Vec<Value> = panel
            .assets()
            .iter()
            .zip(panel.columns())
            .map(|(name, col)| match fit_left_tail(col, l) {
                Ok(f) => json!({
                    "asset": name,
                    "shape": f.shape,
                    "scale": f.scale,
                    "exceedances": f.exceedance_count,
                    "variance_finite": f.variance_finite,
                }),
                Err(e) => json!({"asset": name, "error": e.to_string()}),
            })
            .collect();
        Ok(json!({"prudence": p, "fits": fits}))
    }

    /// CSV text of a built-in synthetic panel.
    pub fn sample(kind: &str, n: usize, seed: u64) -> Result<String> {
        let panel = match kind {
            "heavy-tailed" => synth::heavy_tailed_market(n, seed),
            "example" => Ok(synth::five_point_panel()),
            other => return Err(format!("unknown sample {other:?}")),
        }
        .map_err(text)?;
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).map_err(text)?;
        String::from_utf8(buf).map_err(text)
    }
}

fn js(r: ops::Result<serde_json::Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn frontier(csv: &str, objective: &str, prudence: f64, long_only: bool, points: usize) -> Result<String, JsValue> {
    js(ops::frontier(csv, objective, prudence, long_only, points))
}

#[wasm_bindgen]
pub fn corr_profile(csv: &str, i: usize, j: usize, levels: Vec<f64>) -> Result<String, JsValue> {
    js(ops::corr_profile(csv, i, j, &levels))
}

#[wasm_bindgen]
pub fn gpd_fit(csv: &str, prudence: f64) -> Result<String, JsValue> {
    js(ops::gpd(csv, prudence))
}

#[wasm_bindgen]
pub fn sample_panel(kind: &str, n: usize, seed: u32) -> Result<String, JsValue> {
    ops::sample(kind, n, seed.into()).map_err(|e| JsValue::from_str(&e))
}
