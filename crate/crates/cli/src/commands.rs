use anyhow::Result;
use serde_json::{json, Value};
use tailgini::analytic::{build_risk_model, FrontierSolver, ModelOptions, RiskKind};
use tailgini::dependence::{check_exchangeability, gini_corr, pearson_corr, tail_gini_corr};
use tailgini::estimators::{tail_stats, PrudenceLevel};
use tailgini::gpd::fit_left_tail;
use tailgini::panel::{align, load_returns, InputKind, LoadOptions, ReturnPanel};
use tailgini::search::{distortion_rate, numeric_frontier, Objective, SearchOptions};
use tailgini::synth;

use crate::args::{
    Cli, Command, CorrArgs, ExchangeabilityArgs, Format, FrontierArgs, GpdArgs, InputArgs, Method,
    ObjectiveKind, PriceMode, StatsArgs, SynthArgs, SynthKind,
};
use crate::output::{emit, num, opt, Metadata, Report};
use crate::usage;

/// Counts of successful and failed result rows plus non-fatal warnings.
#[derive(Debug, Default)]
pub struct Summary {
    pub ok: usize,
    pub failed: usize,
    pub warnings: Vec<String>,
}

impl Summary {
    fn tally<T, E>(&mut self, r: &std::result::Result<T, E>) {
        if r.is_ok() {
            self.ok += 1;
        } else {
            self.failed += 1;
        }
    }
}

pub fn run(cli: Cli) -> Result<Summary> {
    match cli.command {
        Command::Stats(a) => stats(a),
        Command::Corr(a) => corr(a),
        Command::Frontier(a) => frontier(a),
        Command::Gpd(a) => gpd(a),
        Command::CheckExchangeability(a) => exchangeability(a),
        Command::Synth(a) => synth_panel(a),
    }
}

fn load(input: &InputArgs, meta: &mut Metadata, summary: &mut Summary) -> Result<ReturnPanel> {
    let kind = match input.price_mode {
        PriceMode::Returns => InputKind::Returns,
        PriceMode::Simple => InputKind::SimplePrices,
        PriceMode::Log => InputKind::LogPrices,
    };
    let options = LoadOptions { kind };
    let mut panels = Vec::new();
    let mut dropped = 0;
    for path in &input.input {
        let loaded = load_returns(path, &options)
            .map_err(|e| usage(format!("cannot load {}: {e}", path.display())))?;
        if loaded.dropped_rows > 0 {
            summary.warnings.push(format!(
                "{}: dropped {} rows with missing cells",
                path.display(),
                loaded.dropped_rows
            ));
        }
        dropped += loaded.dropped_rows;
        panels.push(loaded.panel);
    }
    let panel = if panels.len() == 1 {
        panels.pop().expect("one panel")
    } else {
        align(&panels).map_err(|e| usage(format!("cannot align inputs: {e}")))?
    };
    meta.input_kind = Some(kind.label());
    meta.dropped_rows = Some(dropped);
    Ok(panel)
}

fn levels(ps: &[f64]) -> Result<Vec<PrudenceLevel>> {
    if ps.is_empty() {
        return Err(usage("at least one prudence level is required"));
    }
    ps.iter()
        .map(|&p| PrudenceLevel::new(p).map_err(|e| usage(e.to_string())))
        .collect()
}

/// Parses `a,b,c` or the inclusive range `start:end:step`, sorted ascending.
pub fn parse_targets(text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| usage(format!("invalid --targets `{text}`: {what}"));
    let parse = |s: &str| -> Result<f64> {
        let v: f64 = s.trim().parse().map_err(|_| bad(&format!("`{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("non-finite value"))
        }
    };
    let mut targets = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(bad("a range needs start:end:step"));
        };
        let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
        if !(step > 0.0) || b < a {
            return Err(bad("a range needs start <= end and a positive step"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(bad("too many targets"));
        }
        (0..count).map(|k| ((a + step * k as f64) * 1e12).round() / 1e12).collect()
    } else {
        text.split(',').filter(|s| !s.trim().is_empty()).map(parse).collect::<Result<Vec<_>>>()?
    };
    if targets.is_empty() {
        return Err(bad("no targets"));
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();
    Ok(targets)
}

fn err_text(e: &tailgini::Error) -> String {
    e.to_string()
}

fn stats(a: StatsArgs) -> Result<Summary> {
    let mut summary = Summary::default();
    let mut meta = Metadata::new("stats");
    let levels = levels(&a.prudence)?;
    let panel = load(&a.input, &mut meta, &mut summary)?;
    let header = [
        "prudence", "asset", "mean", "std", "var_p", "tce_p", "tv_p", "sd_p", "gmd", "tgini_p",
        "tail_count", "error",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for &p in &levels {
        for (name, col) in panel.assets().iter().zip(panel.columns()) {
            let r = tail_stats(name, col, p);
            summary.tally(&r);
            match r {
                Ok(s) => {
                    rows.push(vec![
                        num(p.value()),
                        name.clone(),
                        num(s.mean),
                        num(s.std),
                        num(s.var_p),
                        num(s.tce_p),
                        num(s.tv_p),
                        num(s.sd_p),
                        num(s.gmd),
                        num(s.tgini_p),
                        s.tail_count.to_string(),
                        String::new(),
                    ]);
                    json_rows.push(serde_json::to_value(&s)?);
                }
                Err(e) => {
                    let mut row = vec![num(p.value()), name.clone()];
                    row.extend(std::iter::repeat_n(String::new(), 9));
                    row.push(err_text(&e));
                    rows.push(row);
                    json_rows.push(json!({"asset": name, "prudence": p.value(), "error": err_text(&e)}));
                }
            }
        }
    }
    emit(
        Report {
            metadata: meta,
            header,
            rows,
            json: Value::Array(json_rows),
        },
        &a.output,
        Format::Csv,
    )?;
    Ok(summary)
}

type Cell = std::result::Result<f64, String>;

fn matrix<F>(panel: &ReturnPanel, f: F) -> Vec<Vec<Cell>>
where
    F: Fn(&[f64], &[f64]) -> tailgini::Result<f64>,
{
    let d = panel.n_assets();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let r = f(panel.column(i), panel.column(j)).map_err(|e| err_text(&e));
                    // Self-correlation is exactly one whenever it is defined.
                    if i == j {
                        r.map(|_| 1.0)
                    } else {
                        r
                    }
                })
                .collect()
        })
        .collect()
}

fn asymmetry(m: &[Vec<Cell>]) -> f64 {
    let mut gap = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if let (Ok(a), Ok(b)) = (c, &m[j][i]) {
                gap = gap.max((a - b).abs());
            }
        }
    }
    gap
}

fn corr(a: CorrArgs) -> Result<Summary> {
    let mut summary = Summary::default();
    let mut meta = Metadata::new("corr");
    let levels = levels(&a.prudence)?;
    let panel = load(&a.input, &mut meta, &mut summary)?;
    let assets = panel.assets().to_vec();

    let mut blocks: Vec<(&str, Option<f64>, Vec<Vec<Cell>>)> = vec![
        ("pearson", None, matrix(&panel, pearson_corr)),
        ("gini", None, matrix(&panel, gini_corr)),
    ];
    for &p in &levels {
        blocks.push(("tail-gini", Some(p.value()), matrix(&panel, |x, y| tail_gini_corr(x, y, p))));
    }

    let mut header = vec!["matrix".to_string(), "prudence".into(), "asset".into()];
    header.extend(assets.iter().cloned());
    header.extend(["asymmetry".to_string(), "error".into()]);
    let mut rows = Vec::new();
    let mut json_blocks = Vec::new();
    for (name, p, m) in &blocks {
        let gap = asymmetry(m);
        for (i, row) in m.iter().enumerate() {
            let errors: Vec<String> = row
                .iter()
                .zip(&assets)
                .filter_map(|(c, other)| c.as_ref().err().map(|e| format!("{other}: {e}")))
                .collect();
            if errors.is_empty() {
                summary.ok += 1;
            } else {
                summary.failed += 1;
            }
            let mut r = vec![name.to_string(), opt(*p), assets[i].clone()];
            r.extend(row.iter().map(|c| opt(c.as_ref().ok().copied())));
            r.push(num(gap));
            r.push(errors.join("; "));
            rows.push(r);
        }
        let values: Vec<Vec<Option<f64>>> =
            m.iter().map(|r| r.iter().map(|c| c.as_ref().ok().copied()).collect()).collect();
        let errors: Vec<Value> = m
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter().enumerate().filter_map(move |(j, c)| {
                    c.as_ref().err().map(|e| json!({"row": i, "column": j, "error": e}))
                })
            })
            .collect();
        json_blocks.push(json!({
            "matrix": name,
            "prudence": p,
            "values": values,
            "asymmetry": gap,
            "errors": errors,
        }));
    }
    emit(
        Report {
            metadata: meta,
            header,
            rows,
            json: json!({"assets": assets, "matrices": json_blocks}),
        },
        &a.output,
        Format::Csv,
    )?;
    Ok(summary)
}

struct Run {
    method: &'static str,
    objective: ObjectiveKind,
    prudence: Option<PrudenceLevel>,
}

fn objective_label(o: ObjectiveKind) -> &'static str {
    match o {
        ObjectiveKind::Variance => "variance",
        ObjectiveKind::Gmd => "gmd",
        ObjectiveKind::TailGini => "tail-gini",
        ObjectiveKind::TailSd => "tail-sd",
    }
}

/// One solved (or failed) frontier point in a uniform shape.
struct Point {
    risk: f64,
    weights: Vec<f64>,
    lambda: Option<f64>,
    gamma: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    final_step: Option<f64>,
}

fn analytic_points(
    panel: &ReturnPanel,
    run: &Run,
    targets: &[f64],
    a: &FrontierArgs,
    summary: &mut Summary,
) -> Vec<std::result::Result<Point, String>> {
    let fail = |msg: String| targets.iter().map(|_| Err(msg.clone())).collect();
    if a.long_only {
        return fail("the analytic method has no long-only mode".into());
    }
    let kind = match run.objective {
        ObjectiveKind::Variance => RiskKind::Variance,
        ObjectiveKind::TailGini => RiskKind::TailGini,
        ObjectiveKind::TailSd => RiskKind::TailVariance,
        ObjectiveKind::Gmd => return fail("no closed form for the gmd objective".into()),
    };
    let opts = ModelOptions { ridge_repair: a.ridge };
    let solver = build_risk_model(panel, kind, run.prudence, opts).and_then(|m| {
        for w in &m.warnings {
            summary.warnings.push(format!("{} model: {w}", objective_label(run.objective)));
        }
        FrontierSolver::new(&m)
    });
    match solver {
        Err(e) => fail(err_text(&e)),
        Ok(s) => targets
            .iter()
            .map(|&t| {
                let pt = s.solve(t);
                Ok(Point {
                    risk: pt.risk,
                    weights: pt.weights,
                    lambda: Some(pt.lambda),
                    gamma: Some(pt.gamma),
                    iterations: None,
                    converged: None,
                    final_step: None,
                })
            })
            .collect(),
    }
}

fn numeric_points(
    panel: &ReturnPanel,
    run: &Run,
    targets: &[f64],
    a: &FrontierArgs,
) -> Vec<std::result::Result<Point, String>> {
    let objective = match (run.objective, run.prudence) {
        (ObjectiveKind::Variance, _) => Objective::Variance,
        (ObjectiveKind::Gmd, _) => Objective::Gmd,
        (ObjectiveKind::TailGini, Some(p)) => Objective::TailGini(p),
        (ObjectiveKind::TailSd, Some(p)) => Objective::TailSd(p),
        _ => unreachable!("tail objectives always carry a level"),
    };
    let opts = SearchOptions {
        step: a.step,
        threshold: a.threshold,
        max_iters: a.max_iters,
        long_only: a.long_only,
        objective,
        paper_faithful: a.paper_faithful,
        ..SearchOptions::default()
    };
    numeric_frontier(panel, targets, &opts)
        .into_iter()
        .map(|r| {
            r.map(|pt| Point {
                risk: pt.risk,
                weights: pt.weights,
                lambda: None,
                gamma: None,
                iterations: Some(pt.iterations),
                converged: Some(pt.converged),
                final_step: Some(pt.final_step),
            })
            .map_err(|e| err_text(&e))
        })
        .collect()
}

fn frontier(a: FrontierArgs) -> Result<Summary> {
    let mut summary = Summary::default();
    let mut meta = Metadata::new("frontier");
    let targets = parse_targets(&a.targets)?;
    let levels = levels(&a.prudence)?;
    if a.objective.is_empty() {
        return Err(usage("at least one objective is required"));
    }
    if !(a.step > 0.0 && a.threshold > 0.0) {
        return Err(usage("--step and --threshold must be positive"));
    }
    let panel = load(&a.input, &mut meta, &mut summary)?;
    let assets = panel.assets().to_vec();

    let methods: &[&'static str] = match a.method {
        Method::Analytic => &["analytic"],
        Method::Numeric => &["numeric"],
        Method::Both => &["analytic", "numeric"],
    };
    let mut runs = Vec::new();
    for &method in methods {
        for &objective in &a.objective {
            match objective {
                ObjectiveKind::TailGini | ObjectiveKind::TailSd => {
                    for &p in &levels {
                        runs.push(Run {
                            method,
                            objective,
                            prudence: Some(p),
                        });
                    }
                }
                _ => runs.push(Run {
                    method,
                    objective,
                    prudence: None,
                }),
            }
        }
    }

    let mut header = vec!["target".to_string(), "risk".into()];
    header.extend(assets.iter().map(|n| format!("w_{n}")));
    header.extend(
        ["lambda", "gamma", "iterations", "converged", "final_step", "method", "objective", "prudence"]
            .map(String::from),
    );
    header.extend(assets.iter().map(|n| format!("dist_{n}")));
    header.push("error".into());

    let d = assets.len();
    let mut rows = Vec::new();
    let mut json_runs = Vec::new();
    // First run of each method is the distortion reference.
    let mut reference: Vec<(&str, Vec<Option<Vec<f64>>>)> = Vec::new();
    for run in &runs {
        let points = if run.method == "analytic" {
            analytic_points(&panel, run, &targets, &a, &mut summary)
        } else {
            numeric_points(&panel, run, &targets, &a)
        };
        let weights: Vec<Option<Vec<f64>>> =
            points.iter().map(|p| p.as_ref().ok().map(|p| p.weights.clone())).collect();
        let base = reference.iter().find(|(m, _)| *m == run.method).map(|(_, w)| w.clone());
        let mut json_points = Vec::new();
        for (k, (&t, point)) in targets.iter().zip(&points).enumerate() {
            summary.tally(point);
            let dist: Option<Vec<Option<f64>>> = match (&base, point) {
                (Some(b), Ok(p)) => b[k].as_ref().and_then(|r| distortion_rate(r, &p.weights).ok()),
                _ => None,
            };
            let mut row = vec![num(t)];
            match point {
                Ok(p) => {
                    row.push(num(p.risk));
                    row.extend(p.weights.iter().map(|&w| num(w)));
                    row.push(opt(p.lambda));
                    row.push(opt(p.gamma));
                    row.push(p.iterations.map(|i| i.to_string()).unwrap_or_default());
                    row.push(p.converged.map(|c| c.to_string()).unwrap_or_default());
                    row.push(opt(p.final_step));
                }
                Err(_) => row.extend(std::iter::repeat_n(String::new(), d + 6)),
            }
            row.push(run.method.into());
            row.push(objective_label(run.objective).into());
            row.push(opt(run.prudence.map(|p| p.value())));
            match &dist {
                Some(v) => row.extend(v.iter().map(|&x| opt(x))),
                None => row.extend(std::iter::repeat_n(String::new(), d)),
            }
            row.push(point.as_ref().err().cloned().unwrap_or_default());
            rows.push(row);
            json_points.push(match point {
                Ok(p) => json!({
                    "target": t,
                    "risk": p.risk,
                    "weights": p.weights,
                    "lambda": p.lambda,
                    "gamma": p.gamma,
                    "iterations": p.iterations,
                    "converged": p.converged,
                    "final_step": p.final_step,
                    "distortion": dist,
                }),
                Err(e) => json!({"target": t, "error": e}),
            });
        }
        if base.is_none() {
            reference.push((run.method, weights));
        }
        json_runs.push(json!({
            "method": run.method,
            "objective": objective_label(run.objective),
            "prudence": run.prudence.map(|p| p.value()),
            "long_only": a.long_only,
            "paper_faithful": a.paper_faithful,
            "points": json_points,
        }));
    }
    emit(
        Report {
            metadata: meta,
            header,
            rows,
            json: json!({"assets": assets, "runs": json_runs}),
        },
        &a.output,
        Format::Csv,
    )?;
    Ok(summary)
}

fn gpd(a: GpdArgs) -> Result<Summary> {
    let mut summary = Summary::default();
    let mut meta = Metadata::new("gpd");
    let levels = levels(&a.prudence)?;
    let panel = load(&a.input, &mut meta, &mut summary)?;
    let header = [
        "prudence",
        "asset",
        "threshold",
        "exceedance_count",
        "shape",
        "scale",
        "loglik",
        "variance_finite",
        "mean_finite",
        "orientation",
        "quantile_convention",
        "error",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &p in &levels {
        for (name, col) in panel.assets().iter().zip(panel.columns()) {
            let r = fit_left_tail(col, p);
            summary.tally(&r);
            match r {
                Ok(f) => {
                    rows.push(vec![
                        num(p.value()),
                        name.clone(),
                        opt(f.threshold),
                        f.exceedance_count.to_string(),
                        num(f.shape),
                        num(f.scale),
                        num(f.loglik),
                        f.variance_finite.to_string(),
                        f.mean_finite.to_string(),
                        f.orientation.clone(),
                        f.quantile_convention.clone(),
                        String::new(),
                    ]);
                    let mut v = serde_json::to_value(&f)?;
                    v["asset"] = json!(name);
                    reports.push(v);
                }
                Err(e) => {
                    let mut row = vec![num(p.value()), name.clone()];
                    row.extend(std::iter::repeat_n(String::new(), 9));
                    row.push(err_text(&e));
                    rows.push(row);
                    reports.push(json!({"asset": name, "prudence": p.value(), "error": err_text(&e)}));
                }
            }
        }
    }
    emit(
        Report {
            metadata: meta,
            header,
            rows,
            json: Value::Array(reports),
        },
        &a.output,
        Format::Json,
    )?;
    Ok(summary)
}

fn exchangeability(a: ExchangeabilityArgs) -> Result<Summary> {
    let mut summary = Summary::default();
    let mut meta = Metadata::new("check-exchangeability");
    let levels = levels(&a.prudence)?;
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let panel = load(&a.input, &mut meta, &mut summary)?;
    let header = [
        "asset_i",
        "asset_j",
        "prudence",
        "gamma_ij",
        "gamma_ji",
        "gap",
        "within_tol",
        "exchangeable_up_to",
        "error",
    ]
    .map(String::from)
    .to_vec();
    let names = panel.assets();
    let d = names.len();
    if d < 2 {
        summary.warnings.push("fewer than two assets; no pairs to check".into());
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let pair = ReturnPanel::new(
                panel.dates().to_vec(),
                vec![names[i].clone(), names[j].clone()],
                vec![panel.column(i).to_vec(), panel.column(j).to_vec()],
            )?;
            let r = check_exchangeability(&pair, &levels, a.tol);
            summary.tally(&r);
            match r {
                Ok(mut reps) => {
                    let mut rep = reps.remove(0);
                    rep.pair = (i, j);
                    for k in 0..rep.levels.len() {
                        rows.push(vec![
                            names[i].clone(),
                            names[j].clone(),
                            num(rep.levels[k]),
                            num(rep.gamma_ij[k]),
                            num(rep.gamma_ji[k]),
                            num(rep.gaps[k]),
                            rep.exchangeable_at_tol[k].to_string(),
                            opt(rep.exchangeable_up_to),
                            String::new(),
                        ]);
                    }
                    reports.push(serde_json::to_value(&rep)?);
                }
                Err(e) => {
                    let mut row = vec![names[i].clone(), names[j].clone()];
                    row.extend(std::iter::repeat_n(String::new(), 6));
                    row.push(err_text(&e));
                    rows.push(row);
                    reports.push(json!({
                        "assets": [names[i], names[j]],
                        "error": err_text(&e),
                    }));
                }
            }
        }
    }
    emit(
        Report {
            metadata: meta,
            header,
            rows,
            json: json!({"tolerance": a.tol, "pairs": reports}),
        },
        &a.output,
        Format::Csv,
    )?;
    Ok(summary)
}

fn synth_panel(a: SynthArgs) -> Result<Summary> {
    let bad = |e: tailgini::Error| usage(e.to_string());
    if a.n < 2 && a.kind != SynthKind::Example {
        return Err(usage("--n must be at least 2"));
    }
    let panel = match a.kind {
        SynthKind::Gaussian => {
            if a.assets == 0 {
                return Err(usage("--assets must be positive"));
            }
            let d = a.assets;
            let mu: Vec<f64> = (0..d).map(|i| 0.02 + 0.03 * i as f64).collect();
            let sigma: Vec<Vec<f64>> = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let (si, sj) = (1.0 + 0.25 * i as f64, 1.0 + 0.25 * j as f64);
                            si * sj * if i == j { 1.0 } else { a.rho }
                        })
                        .collect()
                })
                .collect();
            synth::mvnormal_panel(&mu, &sigma, a.n, a.seed).map_err(bad)?
        }
        SynthKind::HeavyTailed => synth::heavy_tailed_market(a.n, a.seed).map_err(bad)?,
        SynthKind::Comonotone | SynthKind::Antimonotone => {
            let logistic = |u: f64| (u / (1.0 - u)).ln();
            let cubic = |u: f64| 2.0 * (2.0 * u - 1.0).powi(3);
            let anti = a.kind == SynthKind::Antimonotone;
            synth::monotone_pair(logistic, cubic, a.n, a.seed, anti).map_err(bad)?
        }
        SynthKind::Gpd => {
            let y = synth::gpd_sample(a.shape, a.scale, a.n, a.seed).map_err(bad)?;
            ReturnPanel::from_columns(vec!["gpd".into()], vec![y.iter().map(|v| -v).collect()])?
        }
        SynthKind::Example => synth::five_point_panel(),
    };
    let mut meta = Metadata::new("synth");
    meta.input_kind = Some("returns");
    let mut header = vec!["date".to_string()];
    header.extend(panel.assets().iter().cloned());
    let rows = (0..panel.n_obs())
        .map(|t| {
            let mut r = vec![panel.dates()[t].clone()];
            r.extend(panel.columns().iter().map(|c| num(c[t])));
            r
        })
        .collect();
    let json = json!({
        "seed": a.seed,
        "dates": panel.dates(),
        "assets": panel.assets(),
        "columns": panel.columns(),
    });
    emit(
        Report {
            metadata: meta,
            header,
            rows,
            json,
        },
        &a.output,
        Format::Csv,
    )?;
    Ok(Summary {
        ok: 1,
        ..Summary::default()
    })
}
