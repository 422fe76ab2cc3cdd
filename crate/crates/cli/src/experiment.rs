//! End-to-end experiment: evolve, locate the singularities, compare with the
//! similarity prediction and write every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use shockform_core::model::HyperbolicSystem;
use shockform_core::similarity::{
    fit_power_law, predict_first_derivative, rescale_and_collapse, usable_components,
    SimilarityPrediction, SECOND_DERIVATIVE_COEFF,
};
use shockform_core::singularity::{
    estimate_singularities, resolved_until, ResolvedRange, SingularityEstimate,
};
use shockform_core::solver::{evolve, GridSnapshot, RunResult, StopReason};
use thiserror::Error;

use crate::config::{ConfigError, CutoffConfig, ExperimentConfig, SnapshotOutput};
use crate::csv::{Cell, CsvTable};
use crate::report::{
    CollapseComponentSummary, CollapseSnapshotSummary, CollapseSummary, ComponentSlopes, FileEntry,
    FirstDerivativeSummary, Metric, Outcome, Report, RunSummary, ShockReport, StageError,
};
use crate::svg::{Plot, Series, Style};

/// Failures that prevent writing a report at all.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Largest number of markers drawn per series.
const PLOT_POINTS: usize = 400;

struct Writer {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        content: &str,
        description: &str,
    ) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| ExperimentError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, content).map_err(|source| ExperimentError::Io { path, source })?;
        self.files.push(FileEntry {
            path: name.to_string(),
            description: description.to_string(),
        });
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        table: &CsvTable,
        description: &str,
    ) -> Result<(), ExperimentError> {
        self.write(name, &table.render(), description)
    }
}

fn summarize(run: &RunResult) -> RunSummary {
    RunSummary {
        stop_reason: run.stop_reason,
        final_time: run.final_time(),
        steps: run.monitor_series.len().saturating_sub(1),
        rejected_steps: run.rejected_steps,
        initial_points: run.grid.num_points,
        final_points: run.final_grid.num_points,
        initial_max_slope: run.initial_max_slope,
        blowup_threshold: run
            .blowup_threshold
            .is_finite()
            .then_some(run.blowup_threshold),
        message: run.message.clone(),
    }
}

struct Metrics(BTreeMap<String, Metric>);

impl Metrics {
    /// Non-finite values are left out, so a check on them reports a missing
    /// metric.
    fn put(&mut self, key: impl Into<String>, value: f64, source: &str) {
        if !value.is_finite() {
            return;
        }
        self.0.insert(
            key.into(),
            Metric {
                value,
                source: source.to_string(),
            },
        );
    }
}

fn thin<T: Clone>(v: &[T], max: usize) -> Vec<T> {
    if v.len() <= max {
        return v.to_vec();
    }
    let stride = v.len().div_ceil(max);
    v.iter().step_by(stride).cloned().collect()
}

/// Runs the configured experiment and writes its artifacts to `out_dir`.
///
/// Numerical failures are recorded in the report; only configuration and
/// I/O problems are returned as errors.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Report, ExperimentError> {
    config.validate()?;
    let system = config.model.build()?;
    let grid = config.grid.build()?;
    let fields = config.initial.sample(grid, system.dimension())?;
    let controls = config.solver_controls();
    let mut writer = Writer::new(out_dir)?;
    let mut report = Report {
        tool: "shockform".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        outcome: Outcome::Failed,
        run: None,
        companion: None,
        resolved: None,
        shocks: Vec::new(),
        metrics: BTreeMap::new(),
        checks: Vec::new(),
        warnings: Vec::new(),
        stage_errors: Vec::new(),
        files: Vec::new(),
    };
    let mut metrics = Metrics(BTreeMap::new());

    let use_companion = config.analysis.cutoff == CutoffConfig::Companion;
    let companion_controls = {
        let mut c = config.companion().solver_controls();
        // only the monitor series of the companion is used
        c.snapshot_ratio = f64::MAX;
        c
    };
    let (primary, companion) = std::thread::scope(|scope| {
        let handle = use_companion.then(|| {
            let fields = fields.clone();
            let system = &system;
            let c = &companion_controls;
            scope.spawn(move || evolve(system, fields, grid, c))
        });
        let primary = evolve(&system, fields.clone(), grid, &controls);
        let companion = handle.map(|h| h.join().expect("companion run panicked"));
        (primary, companion)
    });

    let run = match primary {
        Ok(run) => run,
        Err(e) => {
            report.stage_errors.push(StageError {
                stage: "evolve".into(),
                message: e.to_string(),
            });
            return finish(report, metrics, writer);
        }
    };
    let companion = match companion {
        Some(Ok(c)) => Some(c),
        Some(Err(e)) => {
            report.warnings.push(format!(
                "companion run failed ({e}); convergence judged from the spectral tail"
            ));
            None
        }
        None => None,
    };
    report.run = Some(summarize(&run));
    report.companion = companion.as_ref().map(summarize);
    metrics.put("run.final_time", run.final_time(), "monitors.csv");
    metrics.put("run.blowup_threshold", run.blowup_threshold, "monitors.csv");
    write_monitors(&mut writer, &system, &run)?;

    match run.stop_reason {
        StopReason::DerivativeThreshold | StopReason::ResolutionLimit => {}
        StopReason::MaxTime => {
            report.outcome = Outcome::NoShockDetected;
            report.warnings.push(format!(
                "no shock detected: the slope stayed below the stopping threshold up to t = {}",
                run.final_time()
            ));
            metrics.put("shock_count", 0.0, "monitors.csv");
            write_snapshots(&mut writer, &system, &run, &[], config.output.snapshots)?;
            return finish(report, metrics, writer);
        }
        reason @ (StopReason::DtFloor | StopReason::AdmissibilityViolation) => {
            report.stage_errors.push(StageError {
                stage: "evolve".into(),
                message: format!(
                    "run stopped early ({reason:?}) at t = {}{}",
                    run.final_time(),
                    run.message
                        .as_deref()
                        .map(|m| format!(": {m}"))
                        .unwrap_or_default()
                ),
            });
            write_snapshots(&mut writer, &system, &run, &[], config.output.snapshots)?;
            return finish(report, metrics, writer);
        }
    }

    let resolved = resolved_until(
        &run,
        companion.as_ref(),
        config.analysis.companion_tolerance,
        config.analysis.tail_tolerance,
    );
    report.resolved = Some(resolved);
    metrics.put("resolved.t_end", resolved.t_end, "monitors.csv");

    let estimates =
        match estimate_singularities(&run, &system, resolved, &config.estimate_options()) {
            Ok(v) => v,
            Err(e) => {
                report.stage_errors.push(StageError {
                    stage: "singularity".into(),
                    message: e.to_string(),
                });
                write_snapshots(&mut writer, &system, &run, &[], config.output.snapshots)?;
                return finish(report, metrics, writer);
            }
        };
    metrics.put("shock_count", estimates.len() as f64, "monitors.csv");
    report.outcome = if estimates.is_empty() {
        report
            .warnings
            .push("no shock detected: no front was steepening".into());
        Outcome::NoShockDetected
    } else {
        Outcome::ShockDetected
    };

    let mut collapse_times = Vec::new();
    for (index, estimate) in estimates.into_iter().enumerate() {
        let shock = analyse_shock(
            index,
            estimate,
            &system,
            &run,
            resolved,
            config,
            &mut writer,
            &mut metrics,
            &mut report,
            &mut collapse_times,
        )?;
        report.shocks.push(shock);
    }
    write_snapshots(
        &mut writer,
        &system,
        &run,
        &collapse_times,
        config.output.snapshots,
    )?;
    finish(report, metrics, writer)
}

fn finish(
    mut report: Report,
    metrics: Metrics,
    mut writer: Writer,
) -> Result<Report, ExperimentError> {
    let mut table = CsvTable::new(["metric", "value", "source"]);
    for (k, m) in &metrics.0 {
        table.push(vec![
            k.as_str().into(),
            m.value.into(),
            m.source.as_str().into(),
        ]);
    }
    writer.csv(
        "metrics.csv",
        &table,
        "every scalar metric with the file it derives from",
    )?;
    report.metrics = metrics.0;
    if !report.stage_errors.is_empty() {
        report.outcome = Outcome::Failed;
    }
    report.files = writer.files.clone();
    report.files.push(FileEntry {
        path: "report.json".into(),
        description: "this report".into(),
    });
    writer.write("report.json", &report.to_json(), "report")?;
    Ok(report)
}

fn write_monitors(
    writer: &mut Writer,
    system: &HyperbolicSystem,
    run: &RunResult,
) -> Result<(), ExperimentError> {
    let names = system.field_names();
    let mut header = vec!["t".to_string(), "dt".into(), "num_points".into()];
    for n in names {
        for q in [
            "max_d1",
            "max_d2",
            "argmax_x",
            "f_at_argmax",
            "spectral_tail",
        ] {
            header.push(format!("{q}_{n}"));
        }
    }
    let mut table = CsvTable::new(header);
    for r in &run.monitor_series {
        let mut row: Vec<Cell> = vec![r.t.into(), r.dt.into(), r.num_points.into()];
        for c in &r.monitors.components {
            row.extend([
                c.max_d1.into(),
                c.max_d2.into(),
                c.argmax_x.into(),
                c.f_at_argmax.into(),
                c.spectral_tail.into(),
            ]);
        }
        table.push(row);
    }
    writer.csv(
        "monitors.csv",
        &table,
        "global slope and curvature monitors at every step",
    )
}

fn write_snapshots(
    writer: &mut Writer,
    system: &HyperbolicSystem,
    run: &RunResult,
    selected: &[f64],
    mode: SnapshotOutput,
) -> Result<(), ExperimentError> {
    let keep: Vec<&GridSnapshot> = match mode {
        SnapshotOutput::None => Vec::new(),
        SnapshotOutput::All => run.snapshots.iter().collect(),
        SnapshotOutput::Selected => {
            let n = run.snapshots.len();
            run.snapshots
                .iter()
                .enumerate()
                .filter(|(k, s)| *k == 0 || *k + 1 == n || selected.contains(&s.time))
                .map(|(_, s)| s)
                .collect()
        }
    };
    let names = system.field_names();
    for (k, snap) in keep.into_iter().enumerate() {
        let mut header = vec!["x".to_string()];
        for n in names {
            header.extend([n.clone(), format!("d{n}_dx"), format!("d2{n}_dx2")]);
        }
        let mut table = CsvTable::new(header);
        for m in 0..snap.grid.num_points {
            let mut row: Vec<Cell> = vec![snap.grid.x(m).into()];
            for i in 0..names.len() {
                row.extend([
                    snap.fields[i][m].into(),
                    snap.first_derivs[i][m].into(),
                    snap.second_derivs[i][m].into(),
                ]);
            }
            table.push(row);
        }
        writer.csv(
            &format!("snapshots/snapshot_{k:03}.csv"),
            &table,
            &format!("fields and derivatives at t = {}", snap.time),
        )?;
    }
    Ok(())
}

/// Snapshots before `t_end` whose `t* − t` is closest to `count` targets
/// spread log-uniformly over `decades` above `tau_end`.
fn collapse_snapshots(
    run: &RunResult,
    t_star: f64,
    t_end: f64,
    count: usize,
    decades: f64,
) -> Vec<&GridSnapshot> {
    let candidates: Vec<&GridSnapshot> = run
        .snapshots
        .iter()
        .filter(|s| s.time <= t_end && s.time < t_star)
        .collect();
    let tau_end = t_star - t_end;
    let mut chosen: Vec<&GridSnapshot> = Vec::new();
    for j in 0..count {
        let exponent = if count == 1 {
            0.0
        } else {
            decades * (count - 1 - j) as f64 / (count - 1) as f64
        };
        let target = (tau_end * 10f64.powf(exponent)).ln();
        if let Some(best) = candidates.iter().min_by(|a, b| {
            ((t_star - a.time).ln() - target)
                .abs()
                .total_cmp(&((t_star - b.time).ln() - target).abs())
        }) {
            if !chosen.iter().any(|s| s.time == best.time) {
                chosen.push(best);
            }
        }
    }
    chosen
}

#[allow(clippy::too_many_arguments)]
fn analyse_shock(
    index: usize,
    estimate: SingularityEstimate,
    system: &HyperbolicSystem,
    run: &RunResult,
    resolved: ResolvedRange,
    config: &ExperimentConfig,
    writer: &mut Writer,
    metrics: &mut Metrics,
    report: &mut Report,
    collapse_times: &mut Vec<f64>,
) -> Result<ShockReport, ExperimentError> {
    let names = system.field_names();
    let prefix = format!("shock{index}");
    let track_file = format!("{prefix}_track.csv");
    let first_file = format!("{prefix}_first_derivative.csv");
    let second_file = format!("{prefix}_second_derivative.csv");
    let collapse_file = format!("{prefix}_collapse.csv");
    let track = &estimate.track;
    let window = estimate.diagnostics.window;
    let t_star = estimate.t_star;

    let mut table = CsvTable::new(
        ["t", "tau", "x", "in_window"]
            .into_iter()
            .map(String::from)
            .chain(names.iter().flat_map(|n| {
                [
                    n.to_string(),
                    format!("increment_{n}"),
                    format!("max_d1_{n}"),
                    format!("max_d2_{n}"),
                ]
            })),
    );
    for k in 0..track.len() {
        let mut row: Vec<Cell> = vec![
            track.t[k].into(),
            (t_star - track.t[k]).into(),
            track.x[k].into(),
            usize::from(window.contains(track.t[k])).into(),
        ];
        for i in 0..names.len() {
            row.extend([
                track.state[i][k].into(),
                track.increment[i][k].into(),
                track.max_d1[i][k].into(),
                track.max_d2[i][k].into(),
            ]);
        }
        table.push(row);
    }
    writer.csv(
        &track_file,
        &table,
        "front position, state and local derivative maxima",
    )?;

    metrics.put(format!("{prefix}.t_star"), t_star, &track_file);
    metrics.put(
        format!("{prefix}.t_star_uncertainty"),
        estimate.t_star_uncertainty,
        &track_file,
    );
    metrics.put(format!("{prefix}.x_star"), estimate.x_star, &track_file);
    metrics.put(format!("{prefix}.lambda"), estimate.lambda, &track_file);
    metrics.put(
        format!("{prefix}.family"),
        estimate.family as f64,
        &track_file,
    );
    metrics.put(
        format!("{prefix}.alignment"),
        estimate.diagnostics.alignment,
        &track_file,
    );
    metrics.put(
        format!("{prefix}.lambda_mismatch"),
        estimate.diagnostics.speed_mismatch,
        &track_file,
    );
    for (i, n) in names.iter().enumerate() {
        metrics.put(
            format!("{prefix}.f_star.{n}"),
            estimate.f_star.0[i],
            &track_file,
        );
        if let Some(c) = estimate.diagnostics.t_fit.component(i) {
            metrics.put(format!("{prefix}.t_star.{n}"), c.t_star, &track_file);
        }
    }
    if estimate.diagnostics.alignment < shockform_core::singularity::ALIGNMENT_THRESHOLD {
        report.warnings.push(format!(
            "{prefix}: increment alignment with e is {:.4}, below {}",
            estimate.diagnostics.alignment,
            shockform_core::singularity::ALIGNMENT_THRESHOLD
        ));
    }
    if estimate.diagnostics.speed_mismatch > estimate.diagnostics.speed_tolerance {
        report.warnings.push(format!(
            "{prefix}: fitted speed differs from the eigenvalue by {:.3e} (tolerance {:.3e})",
            estimate.diagnostics.speed_mismatch, estimate.diagnostics.speed_tolerance
        ));
    }

    let mut shock = ShockReport {
        index,
        estimate: estimate.clone(),
        prediction: None,
        slopes: Vec::new(),
        first_derivative: Vec::new(),
        collapse: None,
    };
    let stage_error = |report: &mut Report, stage: &str, e: &dyn std::fmt::Display| {
        report.stage_errors.push(StageError {
            stage: format!("{prefix}.{stage}"),
            message: e.to_string(),
        });
    };

    let tensor = match system.eval_tensor(&estimate.f_star.0) {
        Ok(t) => t,
        Err(e) => {
            stage_error(report, "similarity", &e);
            return Ok(shock);
        }
    };
    let prediction =
        match SimilarityPrediction::from_estimate(&estimate, &tensor, &track.t, &track.max_d2) {
            Ok(p) => p,
            Err(e) => {
                stage_error(report, "similarity", &e);
                return Ok(shock);
            }
        };
    if let Some(w) = &prediction.k_fit.warning {
        report.warnings.push(format!("{prefix}: {w}"));
    }
    metrics.put(format!("{prefix}.c"), prediction.c, &track_file);
    metrics.put(format!("{prefix}.k"), prediction.k, &second_file);
    metrics.put(format!("{prefix}.gauge"), prediction.gauge, &track_file);
    for c in &prediction.k_fit.components {
        metrics.put(
            format!("{prefix}.k.{}", names[c.component]),
            c.k,
            &second_file,
        );
    }

    let usable = usable_components(&prediction.e);
    for &i in &usable {
        let first = fit_power_law(&track.t, &track.max_d1[i], t_star, window);
        let second = fit_power_law(&track.t, &track.max_d2[i], t_star, window);
        match (first, second) {
            (Ok(first), Ok(second)) => {
                metrics.put(
                    format!("{prefix}.slope1.{}", names[i]),
                    first.exponent,
                    &first_file,
                );
                metrics.put(
                    format!("{prefix}.slope2.{}", names[i]),
                    second.exponent,
                    &second_file,
                );
                shock.slopes.push(ComponentSlopes {
                    component: i,
                    name: names[i].clone(),
                    first,
                    second,
                });
            }
            (Err(e), _) | (_, Err(e)) => stage_error(report, "slopes", &e),
        }
    }

    let comparisons = predict_first_derivative(
        &track.t,
        &track.max_d1,
        t_star,
        window,
        &prediction.e,
        prediction.c,
    );
    for cmp in &comparisons {
        metrics.put(
            format!("{prefix}.ratio1.{}", names[cmp.component]),
            cmp.median_ratio,
            &first_file,
        );
        shock.first_derivative.push(FirstDerivativeSummary {
            component: cmp.component,
            name: names[cmp.component].clone(),
            prefactor: cmp.prefactor,
            median_ratio: cmp.median_ratio,
            min_ratio: cmp.min_ratio,
            max_ratio: cmp.max_ratio,
        });
    }

    let mut first = CsvTable::new([
        "t",
        "tau",
        "in_window",
        "component",
        "observed",
        "predicted",
        "ratio",
    ]);
    let mut second = CsvTable::new([
        "t",
        "tau",
        "in_window",
        "component",
        "observed",
        "predicted",
        "ratio",
    ]);
    for k in 0..track.len() {
        let tau = t_star - track.t[k];
        let in_window = usize::from(window.contains(track.t[k]));
        for &i in &usable {
            let p1 = prediction.first_prefactors[i] / tau;
            let p2 = prediction.second_prefactors[i] / tau.powf(2.5);
            for (table, observed, predicted) in [
                (&mut first, track.max_d1[i][k], p1),
                (&mut second, track.max_d2[i][k], p2),
            ] {
                table.push(vec![
                    track.t[k].into(),
                    tau.into(),
                    in_window.into(),
                    names[i].as_str().into(),
                    observed.into(),
                    predicted.into(),
                    (observed / predicted).into(),
                ]);
            }
        }
    }
    writer.csv(
        &first_file,
        &first,
        "max slope against the parameter-free prediction",
    )?;
    writer.csv(
        &second_file,
        &second,
        "max curvature against the prediction with fitted K",
    )?;

    let snaps = collapse_snapshots(
        run,
        t_star,
        resolved.t_end.min(window.end),
        config.analysis.collapse_snapshots,
        config.analysis.collapse_decades,
    );
    let solution = prediction.solution(&estimate, run.grid.domain_length);
    match rescale_and_collapse(&snaps, &solution, config.analysis.xi_max) {
        Ok(col) => {
            let mut table = CsvTable::new(["t", "tau", "component", "xi", "rescaled", "predicted"]);
            for s in &col.snapshots {
                for sample in &s.samples {
                    table.push(vec![
                        s.t.into(),
                        s.tau.into(),
                        names[sample.component].as_str().into(),
                        sample.xi.into(),
                        sample.rescaled.into(),
                        sample.predicted.into(),
                    ]);
                }
            }
            writer.csv(
                &collapse_file,
                &table,
                "snapshot data in similarity variables",
            )?;
            let latest = col
                .snapshots
                .iter()
                .min_by(|a, b| a.tau.total_cmp(&b.tau))
                .map_or(f64::NAN, |s| s.error);
            let decreasing = col.is_decreasing();
            metrics.put(
                format!("{prefix}.collapse_error"),
                col.collapse_error,
                &collapse_file,
            );
            metrics.put(
                format!("{prefix}.collapse_error_latest"),
                latest,
                &collapse_file,
            );
            metrics.put(
                format!("{prefix}.collapse_decreasing"),
                f64::from(u8::from(decreasing)),
                &collapse_file,
            );
            if !decreasing {
                report.warnings.push(format!(
                    "{prefix}: collapse error does not decrease towards t*"
                ));
            }
            collapse_times.extend(col.snapshots.iter().map(|s| s.t));
            if config.output.plots {
                plot_collapse(writer, &prefix, &col, names, &solution)?;
            }
            shock.collapse = Some(CollapseSummary {
                xi_max: col.xi_max,
                profile_scale: col.profile_scale,
                collapse_error: col.collapse_error,
                latest_error: latest,
                decreasing,
                snapshots: col
                    .snapshots
                    .iter()
                    .map(|s| CollapseSnapshotSummary {
                        t: s.t,
                        tau: s.tau,
                        num_points: s.num_points,
                        error: s.error,
                        components: s
                            .components
                            .iter()
                            .map(|c| CollapseComponentSummary {
                                component: c.component,
                                relative_rms: c.relative_rms,
                                offset: c.offset,
                                offset_std_error: c.offset_std_error,
                                samples: c.samples,
                            })
                            .collect(),
                    })
                    .collect(),
                notes: col.notes.clone(),
            });
        }
        Err(e) => stage_error(report, "collapse", &e),
    }

    if config.output.plots {
        plot_laws(writer, &prefix, &estimate, &prediction, names, &usable)?;
    }
    shock.prediction = Some(prediction);
    Ok(shock)
}

fn plot_laws(
    writer: &mut Writer,
    prefix: &str,
    estimate: &SingularityEstimate,
    prediction: &SimilarityPrediction,
    names: &[String],
    usable: &[usize],
) -> Result<(), ExperimentError> {
    let track = &estimate.track;
    let t_star = estimate.t_star;
    let taus: Vec<(usize, f64)> = (0..track.len())
        .map(|k| (k, t_star - track.t[k]))
        .filter(|(_, tau)| *tau > 0.0)
        .collect();
    let (tau_lo, tau_hi) = taus
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), (_, t)| {
            (lo.min(*t), hi.max(*t))
        });
    for (order, file, label, exponent) in [
        (1, "first_derivative", "max |df/dx|", 1.0),
        (2, "second_derivative", "max |d2f/dx2|", 2.5),
    ] {
        let mut series = Vec::new();
        for (slot, &i) in usable.iter().enumerate() {
            let data = if order == 1 {
                &track.max_d1[i]
            } else {
                &track.max_d2[i]
            };
            let points: Vec<(f64, f64)> = taus.iter().map(|&(k, tau)| (tau, data[k])).collect();
            series.push(Series {
                label: format!("{} measured", names[i]),
                points: thin(&points, PLOT_POINTS),
                style: Style::Markers,
                color: slot,
            });
            let a = if order == 1 {
                prediction.first_prefactors[i]
            } else {
                prediction.second_prefactors[i]
            };
            series.push(Series {
                label: format!("{} predicted", names[i]),
                points: [tau_lo, tau_hi]
                    .iter()
                    .map(|&t| (t, a / t.powf(exponent)))
                    .collect(),
                style: Style::Dashed,
                color: slot,
            });
        }
        let plot = Plot {
            title: if order == 1 {
                format!("{prefix}: slope blowup, c = {:.4}", prediction.c)
            } else {
                format!(
                    "{prefix}: curvature blowup, K = {:.4} (coefficient {:.5})",
                    prediction.k, SECOND_DERIVATIVE_COEFF
                )
            },
            x_label: "t* - t".into(),
            y_label: label.into(),
            log_x: true,
            log_y: true,
            series,
        };
        writer.write(
            &format!("{prefix}_{file}.svg"),
            &plot.render(),
            "log-log plot of measured maxima against the prediction",
        )?;
    }
    Ok(())
}

fn plot_collapse(
    writer: &mut Writer,
    prefix: &str,
    col: &shockform_core::similarity::ProfileCollapse,
    names: &[String],
    solution: &shockform_core::similarity::SimilaritySolution,
) -> Result<(), ExperimentError> {
    let mut series = Vec::new();
    for (k, s) in col.snapshots.iter().enumerate() {
        let mut by_component: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for sample in &s.samples {
            by_component
                .entry(sample.component)
                .or_default()
                .push((sample.xi, sample.rescaled));
        }
        for (i, points) in by_component {
            series.push(Series {
                label: format!("{} at t*-t = {:.2e}", names[i], s.tau),
                points: thin(&points, PLOT_POINTS),
                style: Style::Markers,
                color: k,
            });
        }
    }
    let curve: Vec<(f64, f64)> = (0..=400)
        .map(|j| {
            let xi = -col.xi_max + 2.0 * col.xi_max * j as f64 / 400.0;
            (
                xi,
                shockform_core::similarity::solve_f(xi, solution.k).unwrap_or(f64::NAN),
            )
        })
        .collect();
    series.push(Series {
        label: format!("-xi = F + {:.4} F^3", solution.k),
        points: curve,
        style: Style::Line,
        color: 5,
    });
    let plot = Plot {
        title: format!("{prefix}: profile collapse"),
        x_label: "xi".into(),
        y_label: "(f - f*) / (e sqrt(t* - t))".into(),
        log_x: false,
        log_y: false,
        series,
    };
    writer.write(
        &format!("{prefix}_collapse.svg"),
        &plot.render(),
        "rescaled snapshots against the similarity profile",
    )
}
