//! Subcommand execution and artifact emission.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use frontier_core::field::{CnMode, PairingOperator, SpectralGrid};
use frontier_core::levy::{classify_levy, levy_scan, LevyAreaConfig};
use frontier_core::quadrature::{growth_fit, McEstimate, QuadratureResult};
use frontier_core::spectral::HurstVector;
use frontier_core::wave::{
    cherry_moment_ia, cherry_moment_ib, classify_regime, divergence_sweep, kh_double_integral, recov_decay_probe,
    recov_integral, recov_predicted_exponent, threshold_scan, McBudget, WeightSpec,
};
use frontier_core::FrontierError;

use crate::config::{ExperimentKind, ValidatedConfig, WaveQuantity};
use crate::output::{
    emit_plot_data, ensure_dir, fmt_f64, fmt_opt, log2_cell, CliError, Method, RecordProvenance, RunManifest, Table,
    PLOT_COLUMNS, SCHEMA_VERSION, THRESHOLD_PLOT_COLUMNS, TOOL_NAME, TOOL_VERSION,
};

/// Computed artifacts of one experiment, before anything is written.
#[derive(Debug)]
pub struct Outcome {
    pub results: Table,
    pub plot: Option<Table>,
    pub provenance: Vec<RecordProvenance>,
    /// Line printed to stdout on success.
    pub summary: String,
    /// First hard failure; partial results above it are still written.
    pub failure: Option<FrontierError>,
}

struct Builder {
    run_id: String,
    experiment: &'static str,
    results: Table,
    plot: Table,
    provenance: Vec<RecordProvenance>,
    failure: Option<FrontierError>,
}

impl Builder {
    fn new(cfg: &ValidatedConfig, columns: &[&str]) -> Self {
        let mut cols = vec!["run_id"];
        cols.extend_from_slice(columns);
        Self {
            run_id: cfg.hash(),
            experiment: cfg.experiment.as_str(),
            results: Table::new(&cols),
            plot: Table::new(&PLOT_COLUMNS),
            provenance: Vec::new(),
            failure: None,
        }
    }

    fn row(&mut self, cells: Vec<String>, method: Method, error_estimate: Option<f64>, failed: bool) {
        let mut r = vec![self.run_id.clone()];
        r.extend(cells);
        self.provenance.push(RecordProvenance {
            row: self.results.rows.len(),
            method,
            error_estimate,
            failed,
        });
        self.results.push(r);
    }

    fn point(&mut self, series: &str, x_name: &str, x: f64, y: f64, err: Option<f64>, method: Method) {
        let m = serde_json::to_value(method).expect("method serializes");
        self.plot.push(vec![
            self.run_id.clone(),
            self.experiment.into(),
            series.into(),
            x_name.into(),
            fmt_f64(x),
            fmt_f64(y),
            log2_cell(y),
            fmt_opt(err),
            m.as_str().unwrap_or_default().into(),
        ]);
    }

    fn fail(&mut self, e: FrontierError) {
        if self.failure.is_none() {
            self.failure = Some(e);
        }
    }

    fn finish(self, summary: String, plot: bool) -> Outcome {
        Outcome {
            results: self.results,
            plot: plot.then_some(self.plot),
            provenance: self.provenance,
            summary,
            failure: self.failure,
        }
    }
}

fn join(h: &[f64]) -> String {
    h.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";")
}

fn budget(cfg: &ValidatedConfig) -> McBudget {
    McBudget::new(cfg.samples, cfg.seed).common(cfg.n_range.1)
}

fn ns(cfg: &ValidatedConfig) -> impl Iterator<Item = u32> {
    cfg.n_range.0..=cfg.n_range.1
}

fn classify(cfg: &ValidatedConfig) -> Result<Outcome, CliError> {
    let h = cfg.hurst_vector()?;
    let label = classify_regime(cfg.d, &h)?;
    let mut b = Builder::new(cfg, &["d", "hurst", "sum", "regime"]);
    b.row(
        vec![
            cfg.d.to_string(),
            join(&cfg.hurst),
            fmt_f64(h.sum()),
            format!("{label:?}"),
        ],
        Method::Exact,
        None,
        false,
    );
    Ok(b.finish(format!("{label:?}"), false))
}

fn quad_cells(q: &QuadratureResult) -> [String; 2] {
    [fmt_f64(q.value), fmt_f64(q.abs_error_estimate)]
}

fn levy(cfg: &ValidatedConfig) -> Result<Outcome, CliError> {
    let h = cfg.hurst[0];
    let mut lc = LevyAreaConfig::new(h, cfg.n_range)?;
    lc.phi = cfg.time_test_function()?;
    lc.mollifier = cfg.mollifier_spec()?;
    lc.tol = cfg.tol;
    let regime = classify_levy(h)?;
    let mut b = Builder::new(
        cfg,
        &[
            "row",
            "n",
            "A_n",
            "A_n_error",
            "J_M",
            "J_M_error",
            "J_MR",
            "J_MR_error",
            "slope",
            "residual",
            "message",
        ],
    );
    let mut pts = Vec::new();
    for (n, rec) in ns(cfg).zip(levy_scan(&lc)) {
        match rec {
            Ok(r) => {
                let [a, ae] = quad_cells(&r.a_n);
                let [m, me] = quad_cells(&r.j_m);
                let [x, xe] = quad_cells(&r.j_mr);
                let err = r.a_n.abs_error_estimate;
                b.row(
                    vec![
                        "data".into(),
                        n.to_string(),
                        a,
                        ae,
                        m,
                        me,
                        x,
                        xe,
                        String::new(),
                        String::new(),
                        String::new(),
                    ],
                    Method::Deterministic,
                    Some(err),
                    false,
                );
                b.point("A_n", "n", n as f64, r.a_n.value, Some(err), Method::Deterministic);
                b.point(
                    "J_M",
                    "n",
                    n as f64,
                    r.j_m.value,
                    Some(r.j_m.abs_error_estimate),
                    Method::Deterministic,
                );
                b.point(
                    "J_MR",
                    "n",
                    n as f64,
                    r.j_mr.value,
                    Some(r.j_mr.abs_error_estimate),
                    Method::Deterministic,
                );
                pts.push((n as f64, r.a_n.value));
            }
            Err(e) => {
                let mut cells = vec![String::new(); 11];
                cells[0] = "error".into();
                cells[1] = n.to_string();
                cells[10] = e.to_string();
                b.row(cells, Method::Deterministic, None, true);
                b.fail(e);
            }
        }
    }
    let summary = match growth_fit(&pts) {
        Ok(f) => {
            let mut cells = vec![String::new(); 11];
            cells[0] = "fit".into();
            cells[8] = fmt_f64(f.slope);
            cells[9] = fmt_f64(f.residual);
            cells[10] = format!("log2 A_n slope; regime {regime:?}");
            b.row(cells, Method::Fit, Some(f.residual), false);
            format!("slope {} residual {} ({regime:?})", f.slope, f.residual)
        }
        Err(e) => {
            let mut cells = vec![String::new(); 11];
            cells[0] = "fit".into();
            cells[10] = e.to_string();
            b.row(cells, Method::Fit, None, true);
            format!("no fit: {e}")
        }
    };
    Ok(b.finish(summary, true))
}

const WAVE_COLUMNS: [&str; 9] = [
    "quantity",
    "regime",
    "n",
    "x",
    "component",
    "value",
    "error",
    "method",
    "message",
];

struct WaveRow<'a> {
    n: Option<u32>,
    x: Option<f64>,
    component: &'a str,
    value: Option<f64>,
    error: Option<f64>,
    method: Method,
    message: String,
}

fn wave_row(b: &mut Builder, quantity: &str, regime: &str, r: WaveRow<'_>) {
    let m = serde_json::to_value(r.method).expect("method serializes");
    let failed = r.value.is_none();
    b.row(
        vec![
            quantity.into(),
            regime.into(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(r.x),
            r.component.into(),
            fmt_opt(r.value),
            fmt_opt(r.error),
            m.as_str().unwrap_or_default().into(),
            r.message,
        ],
        r.method,
        r.error,
        failed,
    );
}

fn wave(cfg: &ValidatedConfig) -> Result<Outcome, CliError> {
    let h = cfg.hurst_vector()?;
    let regime = classify_regime(cfg.d, &h)?;
    let reg = regime.as_str();
    let w = &cfg.wave;
    let mollifier = cfg.mollifier_spec()?;
    let weight = WeightSpec::scaled(w.weight_scale)?;
    let mut b = Builder::new(cfg, &WAVE_COLUMNS);
    let err_row = |b: &mut Builder, q: &str, n: Option<u32>, x: Option<f64>, e: FrontierError| {
        wave_row(
            b,
            q,
            reg,
            WaveRow {
                n,
                x,
                component: "error",
                value: None,
                error: None,
                method: Method::Deterministic,
                message: e.to_string(),
            },
        );
        b.fail(e);
    };
    let summary;
    match w.quantity {
        WaveQuantity::Ia => {
            let bud = budget(cfg);
            for n in ns(cfg) {
                match cherry_moment_ia(cfg.d, &h, w.t, w.gamma, n, &weight, &mollifier, &bud) {
                    Ok(c) => {
                        for (comp, v, e) in [
                            ("I", c.i, None),
                            ("II", c.ii, None),
                            ("total", c.total, Some(c.std_error)),
                        ] {
                            let rw = WaveRow {
                                n: Some(n),
                                x: None,
                                component: comp,
                                value: Some(v),
                                error: e,
                                method: Method::MonteCarlo,
                                message: String::new(),
                            };
                            wave_row(&mut b, "ia", reg, rw);
                            b.point(comp, "n", n as f64, v, e, Method::MonteCarlo);
                        }
                    }
                    Err(e) => err_row(&mut b, "ia", Some(n), None, e),
                }
            }
            summary = format!("ia over n = {}..{}", cfg.n_range.0, cfg.n_range.1);
        }
        WaveQuantity::Ib => {
            let bud = budget(cfg);
            for n in ns(cfg) {
                match cherry_moment_ib(cfg.d, &h, w.t, w.alpha, n, &weight, &mollifier, &bud) {
                    Ok(e) => {
                        let rw = WaveRow {
                            n: Some(n),
                            x: None,
                            component: "moment",
                            value: Some(e.value),
                            error: Some(e.std_error),
                            method: Method::MonteCarlo,
                            message: String::new(),
                        };
                        wave_row(&mut b, "ib", reg, rw);
                        b.point("moment", "n", n as f64, e.value, Some(e.std_error), Method::MonteCarlo);
                    }
                    Err(e) => err_row(&mut b, "ib", Some(n), None, e),
                }
            }
            summary = format!("ib over n = {}..{}", cfg.n_range.0, cfg.n_range.1);
        }
        WaveQuantity::Kh => {
            let method = if cfg.d == 1 {
                Method::Deterministic
            } else {
                Method::MonteCarlo
            };
            let mut prev: Option<f64> = None;
            let mut last_change = None;
            for k in 0..=w.doublings {
                let r = w.radius * f64::from(k).exp2();
                match kh_double_integral(cfg.d, &h, w.alpha, w.kappa, w.eps, r) {
                    Ok(q) => {
                        let change = prev.map(|p| (q.value - p).abs() / p.abs());
                        let rw = WaveRow {
                            n: None,
                            x: Some(r),
                            component: "K_H",
                            value: Some(q.value),
                            error: Some(q.abs_error_estimate),
                            method,
                            message: change.map(|c| format!("relative change {c}")).unwrap_or_default(),
                        };
                        wave_row(&mut b, "kh", reg, rw);
                        b.point("K_H", "R", r, q.value, Some(q.abs_error_estimate), method);
                        if let Some(c) = change {
                            b.point("relative_change", "R", r, c, None, method);
                            last_change = Some(c);
                        }
                        prev = Some(q.value);
                    }
                    Err(e) => err_row(&mut b, "kh", None, Some(r), e),
                }
            }
            summary = format!("K_H last relative change {}", fmt_opt(last_change));
        }
        WaveQuantity::Probe => {
            let n = cfg.n_range.1;
            let h0 = h.h0();
            for &a in &w.eta_magnitudes {
                match recov_integral(n, h0, w.s, a) {
                    Ok(q) => {
                        let rw = WaveRow {
                            n: Some(n),
                            x: Some(a),
                            component: "L",
                            value: Some(q.value),
                            error: Some(q.abs_error_estimate),
                            method: Method::Deterministic,
                            message: String::new(),
                        };
                        wave_row(&mut b, "probe", reg, rw);
                        b.point(
                            "L",
                            "eta",
                            a,
                            q.value,
                            Some(q.abs_error_estimate),
                            Method::Deterministic,
                        );
                    }
                    Err(e) => err_row(&mut b, "probe", Some(n), Some(a), e),
                }
            }
            let bound = recov_predicted_exponent(h0, w.kappa, w.eps);
            match recov_decay_probe(n, h0, w.s, &w.eta_magnitudes, w.kappa, w.eps) {
                Ok(f) => {
                    let rw = WaveRow {
                        n: Some(n),
                        x: None,
                        component: "decay_exponent",
                        value: Some(f.slope),
                        error: Some(f.residual),
                        method: Method::Fit,
                        message: format!("lower bound {bound}"),
                    };
                    wave_row(&mut b, "probe", reg, rw);
                    summary = format!("decay exponent {} (lower bound {bound})", f.slope);
                }
                Err(e) => {
                    summary = format!("probe failed: {e}");
                    err_row(&mut b, "probe", Some(n), None, e);
                }
            }
        }
    }
    Ok(b.finish(summary, true))
}

fn diverge(cfg: &ValidatedConfig) -> Result<Outcome, CliError> {
    let h = cfg.hurst_vector()?;
    let regime = classify_regime(cfg.d, &h)?;
    let phi = cfg.class_e()?;
    let mollifier = cfg.mollifier_spec()?;
    let mut b = Builder::new(
        cfg,
        &[
            "row",
            "regime",
            "n",
            "value",
            "std_error",
            "log2_value",
            "slope",
            "residual",
            "verdict",
            "message",
        ],
    );
    let reg = regime.as_str().to_string();
    let sweep = divergence_sweep(cfg.d, &h, &phi, cfg.n_range, &mollifier, &budget(cfg));
    let summary = match sweep {
        Ok(values) => {
            let pts: Vec<(f64, f64)> = values.iter().map(|(n, e)| (*n as f64, e.value)).collect();
            for (n, e) in &values {
                b.row(
                    vec![
                        "data".into(),
                        reg.clone(),
                        n.to_string(),
                        fmt_f64(e.value),
                        fmt_f64(e.std_error),
                        log2_cell(e.value),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ],
                    Method::MonteCarlo,
                    Some(e.std_error),
                    false,
                );
                b.point("I_n", "n", *n as f64, e.value, Some(e.std_error), Method::MonteCarlo);
            }
            let fit = growth_fit(&pts).and_then(|f| Ok((f, frontier_core::quadrature::divergence_verdict(&pts)?)));
            match fit {
                Ok((f, v)) => {
                    b.row(
                        vec![
                            "fit".into(),
                            reg.clone(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            fmt_f64(f.slope),
                            fmt_f64(f.residual),
                            format!("{v:?}"),
                            String::new(),
                        ],
                        Method::Fit,
                        Some(f.residual),
                        false,
                    );
                    format!("slope {} residual {} verdict {v:?} ({reg})", f.slope, f.residual)
                }
                Err(e) => {
                    let mut cells = vec![String::new(); 10];
                    cells[0] = "fit".into();
                    cells[1] = reg.clone();
                    cells[9] = e.to_string();
                    b.row(cells, Method::Fit, None, true);
                    format!("no fit: {e}")
                }
            }
        }
        Err(e) => {
            let mut cells = vec![String::new(); 10];
            cells[0] = "error".into();
            cells[1] = reg.clone();
            cells[9] = e.to_string();
            b.row(cells, Method::MonteCarlo, None, true);
            let s = format!("sweep failed: {e}");
            b.fail(e);
            s
        }
    };
    Ok(b.finish(summary, true))
}

/// Threshold scans keep going past failed points, so their errors are rows only.
fn threshold(cfg: &ValidatedConfig) -> Result<(Outcome, Table), CliError> {
    let grid: Vec<HurstVector> = cfg
        .scan_points
        .iter()
        .map(|p| HurstVector::new(p.clone()))
        .collect::<Result<_, _>>()?;
    let phi = cfg.class_e()?;
    let mollifier = cfg.mollifier_spec()?;
    let points = threshold_scan(cfg.d, &grid, &phi, cfg.n_range, &mollifier, &budget(cfg));
    let mut b = Builder::new(
        cfg,
        &[
            "hurst",
            "H0",
            "H_plus",
            "regime",
            "n",
            "value",
            "std_error",
            "slope",
            "residual",
            "verdict",
            "agrees",
            "error",
        ],
    );
    let mut plot = Table::new(&THRESHOLD_PLOT_COLUMNS);
    let mut agree = 0;
    let mut judged = 0;
    for (p, hv) in points.iter().zip(&grid) {
        let head = [
            join(&p.h),
            fmt_f64(hv.h0()),
            fmt_f64(hv.h_plus()),
            p.label.as_str().to_string(),
        ];
        let tail = [
            fmt_opt(p.slope),
            fmt_opt(p.residual),
            p.verdict.map(|v| format!("{v:?}")).unwrap_or_default(),
            p.agrees.map(|a| a.to_string()).unwrap_or_default(),
        ];
        plot.push(vec![
            head[1].clone(),
            head[2].clone(),
            head[3].clone(),
            tail[0].clone(),
            tail[1].clone(),
        ]);
        if let Some(a) = p.agrees {
            judged += 1;
            agree += usize::from(a);
        }
        if let Some(e) = &p.error {
            let mut cells: Vec<String> = head.to_vec();
            cells.extend([String::new(), String::new(), String::new()]);
            cells.extend(tail.iter().cloned());
            cells.push(e.clone());
            b.row(cells, Method::MonteCarlo, None, true);
            continue;
        }
        for &(n, v, se) in &p.values {
            let mut cells: Vec<String> = head.to_vec();
            cells.extend([n.to_string(), fmt_f64(v), fmt_f64(se)]);
            cells.extend(tail.iter().cloned());
            cells.push(String::new());
            b.row(cells, Method::MonteCarlo, Some(se), false);
        }
    }
    let summary = format!("{agree} of {judged} judged points agree with their regime label");
    Ok((b.finish(summary, false), plot))
}

fn simulate(cfg: &ValidatedConfig) -> Result<Outcome, CliError> {
    let h = cfg.hurst_vector()?;
    let phi = cfg.class_e()?;
    let mollifier = cfg.mollifier_spec()?;
    let spec = cfg.grid_spec();
    let grid_hash = hex::encode(Sha256::digest(serde_json::to_vec(&spec).expect("grid specs serialize")));
    let mode = match cfg.simulate.mode.as_str() {
        "none" => CnMode::None,
        _ => CnMode::StandardWick,
    };
    let mut b = Builder::new(
        cfg,
        &[
            "n",
            "replicas",
            "mean",
            "std_error",
            "seed",
            "grid_hash",
            "cells",
            "exact_wick_moment",
            "mode",
            "message",
        ],
    );
    let mut last = String::new();
    for n in ns(cfg) {
        let res = (|| -> frontier_core::Result<(McEstimate, f64, usize)> {
            let grid = SpectralGrid::new(&h, n, &mollifier, &spec)?;
            let op = PairingOperator::new(&grid, n, &phi)?;
            let shift = op.counterterm(&mode);
            let values = frontier_core::field::replica_values(cfg.replicas, |r| {
                let draw = frontier_core::field::NoiseDraw::new(&grid, cfg.seed, r);
                let p = op.quadratic(&draw)? - shift;
                Ok(p * p)
            })?;
            let m = frontier_core::field::EmpiricalMoment::from_samples(&values, cfg.seed)?;
            let est = McEstimate {
                value: m.mean,
                std_error: m.std_error,
                count: m.replicas,
            };
            Ok((est, op.exact_wick_moment(), grid.len()))
        })();
        match res {
            Ok((est, exact, cells)) => {
                b.row(
                    vec![
                        n.to_string(),
                        cfg.replicas.to_string(),
                        fmt_f64(est.value),
                        fmt_f64(est.std_error),
                        cfg.seed.to_string(),
                        grid_hash.clone(),
                        cells.to_string(),
                        fmt_f64(exact),
                        cfg.simulate.mode.clone(),
                        String::new(),
                    ],
                    Method::MonteCarlo,
                    Some(est.std_error),
                    false,
                );
                b.point(
                    "mean",
                    "n",
                    n as f64,
                    est.value,
                    Some(est.std_error),
                    Method::MonteCarlo,
                );
                b.point("exact_wick_moment", "n", n as f64, exact, None, Method::Exact);
                last = format!(
                    "n = {n}: mean {} +- {} (exact Wick moment {exact})",
                    est.value, est.std_error
                );
            }
            Err(e) => {
                let mut cells = vec![String::new(); 10];
                cells[0] = n.to_string();
                cells[1] = cfg.replicas.to_string();
                cells[4] = cfg.seed.to_string();
                cells[5] = grid_hash.clone();
                cells[8] = cfg.simulate.mode.clone();
                cells[9] = e.to_string();
                b.row(cells, Method::MonteCarlo, None, true);
                b.fail(e);
            }
        }
    }
    Ok(b.finish(last, true))
}

/// Computes an experiment without touching the file system.
pub fn execute(cfg: &ValidatedConfig) -> Result<Outcome, CliError> {
    match cfg.experiment {
        ExperimentKind::Classify => classify(cfg),
        ExperimentKind::LevyScan => levy(cfg),
        ExperimentKind::WaveMoment => wave(cfg),
        ExperimentKind::Diverge => diverge(cfg),
        ExperimentKind::Simulate => simulate(cfg),
        ExperimentKind::ThresholdScan => threshold(cfg).map(|(mut o, plot)| {
            o.plot = Some(plot);
            o
        }),
    }
}

/// Paths and status of a finished run.
#[derive(Debug)]
pub struct RunReport {
    pub results: PathBuf,
    pub manifest: PathBuf,
    pub plot: Option<PathBuf>,
    pub summary: String,
    pub failure: Option<FrontierError>,
}

/// Runs an experiment on a pool of `threads` workers and writes its artifacts to `out`.
pub fn run(cfg: &ValidatedConfig, out: &Path, threads: usize) -> Result<RunReport, CliError> {
    let started = chrono::Utc::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Table(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| execute(cfg))?;
    ensure_dir(out)?;
    let name = cfg.experiment.as_str();
    let results = out.join(format!("{name}.csv"));
    outcome.results.write(&results)?;
    let mut outputs = vec![results.file_name().unwrap().to_string_lossy().into_owned()];
    let plot = match &outcome.plot {
        Some(t) if !t.is_empty() => {
            let p = emit_plot_data(out, name, t)?;
            outputs.push(p.file_name().unwrap().to_string_lossy().into_owned());
            Some(p)
        }
        _ => None,
    };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        experiment: name.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        threads,
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        config: serde_json::to_value(cfg).expect("validated configs serialize"),
        outputs,
        records: outcome.provenance,
    };
    let manifest_path = out.join(format!("{name}.manifest.json"));
    manifest.write(&manifest_path)?;
    Ok(RunReport {
        results,
        manifest: manifest_path,
        plot,
        summary: outcome.summary,
        failure: outcome.failure,
    })
}
