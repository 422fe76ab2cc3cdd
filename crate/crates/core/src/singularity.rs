//! Extrapolation of the singular point `(x*, t*, f*)` and the wave family
//! from the monitor series of a run.
//!
//! Near blowup `1/max|∂f_i/∂x| ≈ |c/e_i|·(t* − t)`, the front moves as
//! `x* + λ(t* − t)` and the state at the front tends to `f*` like
//! `(t* − t)^{1/2}`. Each steep front is tracked separately.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensystem::{eigen_decompose, EigenError, EigenSystem};
use crate::linalg::dot;
use crate::model::{HyperbolicSystem, ModelError, StateVector};
use crate::solver::{MonitorRecord, RunResult};
use crate::stats::{fit_line, least_squares, weighted_mean, LineFit};

/// Smallest number of samples any fit accepts.
pub const MIN_FIT_POINTS: usize = 8;

/// Required `|cos|` between the front increment and `e`.
pub const ALIGNMENT_THRESHOLD: f64 = 0.99;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularityError {
    #[error("insufficient data: {got} samples in the fit window, need {needed}")]
    InsufficientData { needed: usize, got: usize },
    #[error("max slope of component {component} is not increasing at sample {index}")]
    NonMonotone { component: usize, index: usize },
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error(
        "ambiguous family: the increment direction picks {by_direction}, \
         the wave speed picks {by_speed}"
    )]
    AmbiguousFamily {
        by_direction: usize,
        by_speed: usize,
    },
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }
}

/// Model for `y = 1/max|∂f_i/∂x|` as a function of `τ = t* − t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TStarModel {
    /// `y = A·τ`.
    Line,
    /// `y = A·τ + B·τ^{3/2}`, fitted by Gauss-Newton on relative residuals.
    /// The correction absorbs the leading deviation from the similarity law.
    #[default]
    Corrected,
}

/// Blowup time fitted from a single component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentTStar {
    pub component: usize,
    pub t_star: f64,
    pub variance: f64,
    /// `|dy/dt|` at the end of the window, the local estimate of `|c/e_i|`.
    pub slope: f64,
    /// `A`, the `τ → 0` limit of the slope.
    pub leading: f64,
    /// `B` (zero for the line model).
    pub correction: f64,
    /// RMS of the relative residuals.
    pub relative_rms: f64,
    /// Plain least-squares line through the same samples.
    pub line_t_star: f64,
    pub line_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TStarFit {
    pub t_star: f64,
    /// Statistical standard error of the combined estimate.
    pub std_error: f64,
    pub window: TimeWindow,
    pub points: usize,
    pub model: TStarModel,
    pub components: Vec<ComponentTStar>,
    /// Components left out because their series was not increasing.
    pub excluded: Vec<usize>,
}

impl TStarFit {
    pub fn component(&self, i: usize) -> Option<&ComponentTStar> {
        self.components.iter().find(|c| c.component == i)
    }
}

fn window_indices(t: &[f64], window: TimeWindow) -> Vec<usize> {
    (0..t.len()).filter(|&k| window.contains(t[k])).collect()
}

fn require_points(got: usize) -> Result<(), SingularityError> {
    if got < MIN_FIT_POINTS {
        return Err(SingularityError::InsufficientData {
            needed: MIN_FIT_POINTS,
            got,
        });
    }
    Ok(())
}

fn line_t_star(fit: &LineFit) -> (f64, f64) {
    let (a, b) = (fit.intercept, fit.slope);
    let ts = -a / b;
    let var = fit.var_intercept / (b * b) + a * a * fit.var_slope / b.powi(4)
        - 2.0 * a * fit.cov / b.powi(3);
    (ts, var.max(0.0))
}

/// Levenberg-Marquardt fit of `y = A·τ + B·τ^{3/2}`, `τ = t* − t`, with
/// residuals relative to `y`. Returns `(t*, A, B, var(t*), relative rms)`.
fn corrected_fit(
    t: &[f64],
    y: &[f64],
    start: (f64, f64),
) -> Result<(f64, f64, f64, f64, f64), SingularityError> {
    let n = t.len();
    let t_last = t[n - 1];
    let span = t_last - t[0];
    let residuals = |p: [f64; 3]| -> Option<Vec<f64>> {
        if p[0] <= t_last {
            return None;
        }
        Some(
            (0..n)
                .map(|k| {
                    let tau = p[0] - t[k];
                    (p[1] * tau + p[2] * tau * tau.sqrt()) / y[k] - 1.0
                })
                .collect(),
        )
    };
    let jacobian = |p: [f64; 3]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| {
                let tau = p[0] - t[k];
                let s = tau.sqrt();
                vec![(p[1] + 1.5 * p[2] * s) / y[k], tau / y[k], tau * s / y[k]]
            })
            .collect()
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut p = [start.0.max(t_last + 0.05 * span), start.1, 0.0];
    let mut r = residuals(p).ok_or_else(|| SingularityError::FitFailed("bad start".into()))?;
    let mut c = cost(&r);
    let mut mu = 1e-3;
    for _ in 0..200 {
        let j = jacobian(p);
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for k in 0..n {
            for a in 0..3 {
                jtr[a] += j[k][a] * r[k];
                for b in 0..3 {
                    jtj[a][b] += j[k][a] * j[k][b];
                }
            }
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += mu * jtj[a][a].max(1e-300);
            }
            let rows: Vec<Vec<f64>> = m.iter().map(|row| row.to_vec()).collect();
            let Some(step) = crate::linalg::SquareMatrix::from_rows(&rows)
                .inverse()
                .map(|inv| inv.mul_vec(&jtr))
            else {
                mu *= 10.0;
                continue;
            };
            let trial = [p[0] - step[0], p[1] - step[1], p[2] - step[2]];
            if let Some(rt) = residuals(trial) {
                let ct = cost(&rt);
                if ct <= c {
                    let done =
                        (c - ct) <= 1e-15 * c.max(1e-300) || (step[0].abs() <= 1e-15 * p[0].abs());
                    p = trial;
                    r = rt;
                    c = ct;
                    mu = (mu / 10.0).max(1e-12);
                    improved = !done;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(p.iter().all(|v| v.is_finite()) && p[1] > 0.0) {
        return Err(SingularityError::FitFailed(format!(
            "non-physical parameters t* = {}, A = {}",
            p[0], p[1]
        )));
    }
    let j = jacobian(p);
    let rows: Vec<Vec<f64>> = j;
    let lin = least_squares(&rows, &vec![0.0; n])
        .ok_or_else(|| SingularityError::FitFailed("singular Jacobian".into()))?;
    let sigma2 = if n > 3 { c / (n - 3) as f64 } else { 0.0 };
    let var = lin.unscaled_covariance[0][0] * sigma2;
    Ok((p[0], p[1], p[2], var, (c / n as f64).sqrt()))
}

/// Fits the blowup time from `max|∂f_i/∂x|` over a window.
///
/// `max_d1[i][k]` is the slope maximum of component `i` at time `t[k]`.
/// Components whose series is not increasing on the window are excluded;
/// the fit fails only if none remains.
pub fn fit_t_star(
    t: &[f64],
    max_d1: &[Vec<f64>],
    window: TimeWindow,
    model: TStarModel,
) -> Result<TStarFit, SingularityError> {
    if max_d1.iter().any(|s| s.len() != t.len()) {
        return Err(SingularityError::InvalidInput(
            "series lengths differ from the time axis".into(),
        ));
    }
    let idx = window_indices(t, window);
    require_points(idx.len())?;
    let tw: Vec<f64> = idx.iter().map(|&k| t[k]).collect();
    let mut components = Vec::new();
    let mut excluded = Vec::new();
    let mut first_failure = None;
    for (i, series) in max_d1.iter().enumerate() {
        let s: Vec<f64> = idx.iter().map(|&k| series[k]).collect();
        if let Some(bad) = (1..s.len()).find(|&k| !(s[k] > s[k - 1] && s[k - 1] > 0.0)) {
            excluded.push(i);
            first_failure.get_or_insert(SingularityError::NonMonotone {
                component: i,
                index: idx[bad],
            });
            continue;
        }
        let y: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
        let line = fit_line(&tw, &y)
            .ok_or_else(|| SingularityError::FitFailed("degenerate time axis".into()))?;
        if line.slope >= 0.0 {
            excluded.push(i);
            continue;
        }
        let (lts, lvar) = line_t_star(&line);
        let entry = match model {
            TStarModel::Line => ComponentTStar {
                component: i,
                t_star: lts,
                variance: lvar,
                slope: -line.slope,
                leading: -line.slope,
                correction: 0.0,
                relative_rms: line.rms() / (y.iter().sum::<f64>() / y.len() as f64),
                line_t_star: lts,
                line_slope: -line.slope,
            },
            TStarModel::Corrected => {
                let (ts, a, b, var, rms) = corrected_fit(&tw, &y, (lts, -line.slope))?;
                let tau_end = ts - tw[tw.len() - 1];
                ComponentTStar {
                    component: i,
                    t_star: ts,
                    variance: var,
                    slope: a + 1.5 * b * tau_end.sqrt(),
                    leading: a,
                    correction: b,
                    relative_rms: rms,
                    line_t_star: lts,
                    line_slope: -line.slope,
                }
            }
        };
        components.push(entry);
    }
    if components.is_empty() {
        return Err(first_failure.unwrap_or_else(|| {
            SingularityError::FitFailed("no component has a growing slope".into())
        }));
    }
    let values: Vec<f64> = components.iter().map(|c| c.t_star).collect();
    let vars: Vec<f64> = components.iter().map(|c| c.variance).collect();
    let (t_star, std_error) = weighted_mean(&values, &vars).expect("non-empty");
    Ok(TStarFit {
        t_star,
        std_error,
        window,
        points: idx.len(),
        model,
        components,
        excluded,
    })
}

/// Front position fitted as `x = x* + λ·(t* − t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XStarFit {
    /// Unwrapped; reduce modulo the domain length for reporting.
    pub x_star: f64,
    pub lambda: f64,
    pub x_std_error: f64,
    pub lambda_std_error: f64,
    pub rms: f64,
    pub points: usize,
}

pub fn fit_x_star(
    t: &[f64],
    x: &[f64],
    t_star: f64,
    window: TimeWindow,
) -> Result<XStarFit, SingularityError> {
    if x.len() != t.len() {
        return Err(SingularityError::InvalidInput(
            "position series length differs from the time axis".into(),
        ));
    }
    let idx = window_indices(t, window);
    require_points(idx.len())?;
    let tau: Vec<f64> = idx.iter().map(|&k| t_star - t[k]).collect();
    let xs: Vec<f64> = idx.iter().map(|&k| x[k]).collect();
    let fit = fit_line(&tau, &xs)
        .ok_or_else(|| SingularityError::FitFailed("degenerate time axis".into()))?;
    Ok(XStarFit {
        x_star: fit.intercept,
        lambda: fit.slope,
        x_std_error: fit.var_intercept.sqrt(),
        lambda_std_error: fit.var_slope.sqrt(),
        rms: fit.rms(),
        points: idx.len(),
    })
}

/// State at the front fitted as `f_i = f*_i + a_i·s + b_i·s²`,
/// `s = (t* − t)^{1/2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FStarFit {
    pub f_star: Vec<f64>,
    pub std_error: Vec<f64>,
    /// `a_i`.
    pub sqrt_coeff: Vec<f64>,
    /// `b_i`; the state at the slope maximum carries an `O(t* − t)` drift.
    pub linear_coeff: Vec<f64>,
    pub rms: Vec<f64>,
    pub points: usize,
}

/// `f[i][k]` is component `i` at the front at time `t[k]`.
pub fn extrapolate_f_star(
    t: &[f64],
    f: &[Vec<f64>],
    t_star: f64,
    window: TimeWindow,
) -> Result<FStarFit, SingularityError> {
    if f.iter().any(|s| s.len() != t.len()) {
        return Err(SingularityError::InvalidInput(
            "state series length differs from the time axis".into(),
        ));
    }
    let idx = window_indices(t, window);
    require_points(idx.len())?;
    if idx.iter().any(|&k| t[k] >= t_star) {
        return Err(SingularityError::InvalidInput(
            "window reaches past t*".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&k| {
            let s = (t_star - t[k]).sqrt();
            vec![1.0, s, s * s]
        })
        .collect();
    let mut out = FStarFit {
        f_star: Vec::new(),
        std_error: Vec::new(),
        sqrt_coeff: Vec::new(),
        linear_coeff: Vec::new(),
        rms: Vec::new(),
        points: idx.len(),
    };
    for series in f {
        let y: Vec<f64> = idx.iter().map(|&k| series[k]).collect();
        let fit = least_squares(&rows, &y)
            .ok_or_else(|| SingularityError::FitFailed("rank-deficient state fit".into()))?;
        out.f_star.push(fit.coeffs[0]);
        out.sqrt_coeff.push(fit.coeffs[1]);
        out.linear_coeff.push(fit.coeffs[2]);
        out.std_error
            .push((fit.unscaled_covariance[0][0] * fit.residual_variance).sqrt());
        out.rms.push((fit.rss / idx.len() as f64).sqrt());
    }
    Ok(out)
}

/// Outcome of matching a front to an eigenvector family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMatch {
    pub family: usize,
    /// `|cos|` between the increment and `e` of the chosen family.
    pub alignment: f64,
    /// `|λ_fit − λ_family|`.
    pub speed_mismatch: f64,
}

/// Picks the family whose right eigenvector is best aligned with the
/// increment of `f` across the front; the fitted speed must pick the same
/// family.
pub fn identify_family(
    lambda: f64,
    eig: &EigenSystem,
    increment: &[f64],
) -> Result<FamilyMatch, SingularityError> {
    let n = eig.dim();
    if increment.len() != n {
        return Err(SingularityError::InvalidInput(format!(
            "increment has {} components, expected {n}",
            increment.len()
        )));
    }
    let inc_norm = dot(increment, increment).sqrt();
    if !(inc_norm > 0.0) {
        return Err(SingularityError::InvalidInput(
            "front increment vanishes".into(),
        ));
    }
    let cosines: Vec<f64> = eig
        .right_vectors
        .iter()
        .map(|e| (dot(e, increment) / (dot(e, e).sqrt() * inc_norm)).abs())
        .collect();
    let argmax = |v: &[f64], better: fn(f64, f64) -> bool| {
        (1..v.len()).fold(0, |best, a| if better(v[a], v[best]) { a } else { best })
    };
    let by_direction = argmax(&cosines, |a, b| a > b);
    let mismatch: Vec<f64> = eig.eigenvalues.iter().map(|l| (l - lambda).abs()).collect();
    let by_speed = argmax(&mismatch, |a, b| a < b);
    if by_direction != by_speed {
        return Err(SingularityError::AmbiguousFamily {
            by_direction,
            by_speed,
        });
    }
    Ok(FamilyMatch {
        family: by_direction,
        alignment: cosines[by_direction],
        speed_mismatch: mismatch[by_direction],
    })
}

/// One steep front followed through the monitor series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakTrack {
    pub t: Vec<f64>,
    /// Position, continued across the periodic seam.
    pub x: Vec<f64>,
    /// `state[i][k]`: component `i` at the front at `t[k]`.
    pub state: Vec<Vec<f64>>,
    pub increment: Vec<Vec<f64>>,
    /// `max_d1[i][k]`, local slope maximum of component `i`.
    pub max_d1: Vec<Vec<f64>>,
    pub max_d2: Vec<Vec<f64>>,
    wrapped_x: f64,
    last_record: usize,
}

impl PeakTrack {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Largest component slope at sample `k`.
    pub fn slope_at(&self, k: usize) -> f64 {
        self.max_d1.iter().fold(0.0_f64, |m, s| m.max(s[k]))
    }

    fn push(&mut self, t: f64, x_unwrapped: f64, wrapped: f64, peak: &crate::solver::PeakMonitor) {
        let n = peak.state.len();
        if self.state.is_empty() {
            self.state = vec![Vec::new(); n];
            self.increment = vec![Vec::new(); n];
            self.max_d1 = vec![Vec::new(); n];
            self.max_d2 = vec![Vec::new(); n];
        }
        self.t.push(t);
        self.x.push(x_unwrapped);
        self.wrapped_x = wrapped;
        for i in 0..n {
            self.state[i].push(peak.state[i]);
            self.increment[i].push(peak.increment[i]);
            self.max_d1[i].push(peak.components[i].max_d1);
            self.max_d2[i].push(peak.components[i].max_d2);
        }
    }
}

fn periodic_offset(from: f64, to: f64, length: f64) -> f64 {
    let d = (to - from).rem_euclid(length);
    if d > 0.5 * length {
        d - length
    } else {
        d
    }
}

/// Links the peaks of consecutive records into tracks by greedy
/// nearest-neighbour matching; a peak farther than `max_jump` from every
/// live track starts a new one.
pub fn track_peaks(series: &[MonitorRecord], domain_length: f64, max_jump: f64) -> Vec<PeakTrack> {
    let mut tracks: Vec<PeakTrack> = Vec::new();
    let mut live: Vec<usize> = Vec::new();
    for (r, record) in series.iter().enumerate() {
        let peaks = &record.monitors.peaks;
        let mut pairs = Vec::new();
        for (a, &ti) in live.iter().enumerate() {
            for (b, p) in peaks.iter().enumerate() {
                let d = periodic_offset(tracks[ti].wrapped_x, p.x, domain_length);
                if d.abs() <= max_jump {
                    pairs.push((d.abs(), a, b, d));
                }
            }
        }
        pairs.sort_by(|u, v| u.0.total_cmp(&v.0));
        let mut used_track = vec![false; live.len()];
        let mut used_peak = vec![false; peaks.len()];
        let mut next_live = Vec::new();
        for (_, a, b, d) in pairs {
            if used_track[a] || used_peak[b] {
                continue;
            }
            used_track[a] = true;
            used_peak[b] = true;
            let ti = live[a];
            let x = tracks[ti].x.last().copied().unwrap_or(peaks[b].x) + d;
            tracks[ti].push(record.t, x, peaks[b].x, &peaks[b]);
            tracks[ti].last_record = r;
            next_live.push(ti);
        }
        for (b, p) in peaks.iter().enumerate() {
            if !used_peak[b] {
                let mut track = PeakTrack::default();
                track.push(record.t, p.x, p.x, p);
                track.last_record = r;
                tracks.push(track);
                next_live.push(tracks.len() - 1);
            }
        }
        live = next_live;
    }
    tracks
}

/// How the end of the converged part of a run was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMethod {
    /// Agreement with a run on a finer grid.
    Companion,
    /// Spectral tail of the run itself.
    SpectralTail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRange {
    /// Last monitored time that is still resolved.
    pub t_end: f64,
    pub method: CutoffMethod,
    pub tolerance: f64,
}

fn interpolate(ts: &[f64], ys: &[f64], t: f64) -> Option<f64> {
    let j = ts.partition_point(|&s| s < t);
    if j == 0 {
        return (ts.first() == Some(&t)).then(|| ys[0]);
    }
    if j == ts.len() {
        return None;
    }
    let w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
    Some(ys[j - 1] + w * (ys[j] - ys[j - 1]))
}

/// End of the converged regime.
///
/// With a `companion` run (same data on a finer grid), the global first and
/// second derivative maxima of every component are compared; the range ends
/// before the first time their relative difference exceeds `tolerance`.
/// Without one, it ends before the spectral tail exceeds `tail_tolerance`.
pub fn resolved_until(
    run: &RunResult,
    companion: Option<&RunResult>,
    tolerance: f64,
    tail_tolerance: f64,
) -> ResolvedRange {
    let series = &run.monitor_series;
    let mut t_end = run.final_time();
    if let Some(fine) = companion {
        let ts: Vec<f64> = fine.monitor_series.iter().map(|r| r.t).collect();
        let n = series.first().map_or(0, |r| r.monitors.components.len());
        let mut fine_series = Vec::new();
        for i in 0..n {
            let d1: Vec<f64> = fine
                .monitor_series
                .iter()
                .map(|r| r.monitors.components[i].max_d1)
                .collect();
            let d2: Vec<f64> = fine
                .monitor_series
                .iter()
                .map(|r| r.monitors.components[i].max_d2)
                .collect();
            fine_series.push((d1, d2));
        }
        let mut previous = series.first().map_or(0.0, |r| r.t);
        t_end = previous;
        for record in series {
            let mut worst = 0.0_f64;
            let mut covered = true;
            for (i, (d1, d2)) in fine_series.iter().enumerate() {
                let c = &record.monitors.components[i];
                for (value, fine_ys) in [(c.max_d1, d1), (c.max_d2, d2)] {
                    match interpolate(&ts, fine_ys, record.t) {
                        Some(reference) => {
                            let scale = reference.abs().max(1e-12);
                            worst = worst.max((value - reference).abs() / scale);
                        }
                        None => covered = false,
                    }
                }
            }
            if !covered || worst > tolerance {
                break;
            }
            previous = record.t;
            t_end = previous;
        }
        return ResolvedRange {
            t_end,
            method: CutoffMethod::Companion,
            tolerance,
        };
    }
    if let Some(k) = series
        .iter()
        .position(|r| r.monitors.max_tail() > tail_tolerance)
    {
        t_end = if k == 0 { series[0].t } else { series[k - 1].t };
    }
    ResolvedRange {
        t_end,
        method: CutoffMethod::SpectralTail,
        tolerance: tail_tolerance,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Width of the fit window in decades of `t* − t`.
    pub decades: f64,
    pub model: TStarModel,
    /// Largest front displacement between records, as a fraction of `L`.
    pub max_jump_fraction: f64,
    /// Fronts weaker than this fraction of the steepest one at the end of
    /// the resolved range are ignored.
    pub min_relative_slope: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            decades: 1.0,
            model: TStarModel::Corrected,
            max_jump_fraction: 0.02,
            min_relative_slope: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub window: TimeWindow,
    /// Windows tried, the last one is `window`.
    pub window_history: Vec<TimeWindow>,
    pub resolved: ResolvedRange,
    pub t_fit: TStarFit,
    pub x_fit: XStarFit,
    pub f_fit: FStarFit,
    /// Half the spread of `t*` between the early and late halves of the
    /// window or between components, whichever is larger.
    pub t_star_systematic: f64,
    pub alignment: f64,
    pub speed_mismatch: f64,
    /// Bound on `speed_mismatch`: 1% of the largest wave speed plus three
    /// standard errors of the fitted speed.
    pub speed_tolerance: f64,
    /// Eigenvalues of `M(f*)`.
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityEstimate {
    pub t_star: f64,
    /// Combined statistical and systematic uncertainty.
    pub t_star_uncertainty: f64,
    /// In `[0, L)`.
    pub x_star: f64,
    pub f_star: StateVector,
    pub lambda: f64,
    pub family: usize,
    pub e: Vec<f64>,
    pub e_left: Vec<f64>,
    pub diagnostics: EstimateDiagnostics,
    /// Samples of the front up to the end of the resolved range.
    #[serde(skip)]
    pub track: PeakTrack,
}

impl SingularityEstimate {
    /// Whether the invariants on alignment and wave speed hold.
    pub fn is_consistent(&self) -> bool {
        self.diagnostics.alignment >= ALIGNMENT_THRESHOLD
            && self.diagnostics.speed_mismatch <= self.diagnostics.speed_tolerance
    }
}

fn subset(track: &PeakTrack, end: usize) -> PeakTrack {
    let cut = |v: &Vec<Vec<f64>>| v.iter().map(|s| s[..end].to_vec()).collect();
    PeakTrack {
        t: track.t[..end].to_vec(),
        x: track.x[..end].to_vec(),
        state: cut(&track.state),
        increment: cut(&track.increment),
        max_d1: cut(&track.max_d1),
        max_d2: cut(&track.max_d2),
        wrapped_x: track.wrapped_x,
        last_record: track.last_record,
    }
}

/// Fits `t*` on the last `decades` of `t* − t` before `t_end`, refitting once
/// after trimming the window to the estimate.
fn windowed_t_star(
    track: &PeakTrack,
    options: &EstimateOptions,
) -> Result<(TStarFit, Vec<TimeWindow>), SingularityError> {
    let n = track.len();
    let t_end = track.t[n - 1];
    let factor = 10f64.powf(options.decades);
    let target = track.slope_at(n - 1) / factor;
    let first = (0..n).find(|&k| track.slope_at(k) >= target).unwrap_or(0);
    let mut window = TimeWindow {
        start: track.t[first],
        end: t_end,
    };
    let mut history = vec![window];
    let mut fit = fit_t_star(&track.t, &track.max_d1, window, options.model)?;
    for _ in 0..2 {
        let tau_end = fit.t_star - t_end;
        window = TimeWindow {
            start: fit.t_star - factor * tau_end,
            end: t_end,
        };
        history.push(window);
        fit = fit_t_star(&track.t, &track.max_d1, window, options.model)?;
    }
    Ok((fit, history))
}

fn half_window_spread(track: &PeakTrack, window: TimeWindow, model: TStarModel) -> f64 {
    let idx = window_indices(&track.t, window);
    if idx.len() < 2 * MIN_FIT_POINTS {
        return 0.0;
    }
    let mid = track.t[idx[idx.len() / 2]];
    let early = TimeWindow {
        start: window.start,
        end: mid,
    };
    let late = TimeWindow {
        start: mid,
        end: window.end,
    };
    match (
        fit_t_star(&track.t, &track.max_d1, early, model),
        fit_t_star(&track.t, &track.max_d1, late, model),
    ) {
        (Ok(a), Ok(b)) => 0.5 * (a.t_star - b.t_star).abs(),
        _ => 0.0,
    }
}

/// Estimates the singular point of one tracked front.
pub fn estimate_track(
    track: &PeakTrack,
    system: &HyperbolicSystem,
    resolved: ResolvedRange,
    domain_length: f64,
    options: &EstimateOptions,
) -> Result<SingularityEstimate, SingularityError> {
    let end = track.t.partition_point(|&t| t <= resolved.t_end);
    require_points(end)?;
    let track = subset(track, end);
    let (t_fit, history) = windowed_t_star(&track, options)?;
    let window = t_fit.window;
    let t_star = t_fit.t_star;
    let component_spread = t_fit
        .components
        .iter()
        .map(|c| c.t_star)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let systematic = half_window_spread(&track, window, options.model)
        .max(0.5 * (component_spread.1 - component_spread.0));
    let x_fit = fit_x_star(&track.t, &track.x, t_star, window)?;
    let f_fit = extrapolate_f_star(&track.t, &track.state, t_star, window)?;

    let f_star = StateVector::new(f_fit.f_star.clone());
    let m = system.eval_matrix(&f_star.0)?;
    let eig = eigen_decompose(&m)?;
    let last = track.len() - 1;
    let increment: Vec<f64> = track.increment.iter().map(|s| s[last]).collect();
    let choice = identify_family(x_fit.lambda, &eig, &increment)?;
    let max_speed = eig.eigenvalues.iter().fold(0.0_f64, |a, l| a.max(l.abs()));
    let speed_tolerance = 0.01 * max_speed.max(1e-6) + 3.0 * x_fit.lambda_std_error;

    Ok(SingularityEstimate {
        t_star,
        t_star_uncertainty: t_fit.std_error.hypot(systematic),
        x_star: x_fit.x_star.rem_euclid(domain_length),
        f_star,
        lambda: x_fit.lambda,
        family: choice.family,
        e: eig.right_vectors[choice.family].clone(),
        e_left: eig.left_vectors[choice.family].clone(),
        diagnostics: EstimateDiagnostics {
            window,
            window_history: history,
            resolved,
            t_fit,
            x_fit,
            f_fit,
            t_star_systematic: systematic,
            alignment: choice.alignment,
            speed_mismatch: choice.speed_mismatch,
            speed_tolerance,
            eigenvalues: eig.eigenvalues.clone(),
        },
        track,
    })
}

/// Tracks the fronts of a run and estimates a singular point for each one
/// that is still steepening at the end of the resolved range. Estimates are
/// ordered by `x*`.
pub fn estimate_singularities(
    run: &RunResult,
    system: &HyperbolicSystem,
    resolved: ResolvedRange,
    options: &EstimateOptions,
) -> Result<Vec<SingularityEstimate>, SingularityError> {
    let length = run.grid.domain_length;
    let series: Vec<MonitorRecord> = run
        .monitor_series
        .iter()
        .filter(|r| r.t <= resolved.t_end)
        .cloned()
        .collect();
    let Some(last) = series.last() else {
        return Ok(Vec::new());
    };
    let steepest = last.monitors.max_slope();
    let last_index = series.len() - 1;
    let tracks = track_peaks(&series, length, options.max_jump_fraction * length);
    let mut out = Vec::new();
    for track in tracks
        .iter()
        .filter(|tr| tr.last_record == last_index && !tr.is_empty())
        .filter(|tr| tr.slope_at(tr.len() - 1) >= options.min_relative_slope * steepest)
    {
        out.push(estimate_track(track, system, resolved, length, options)?);
    }
    out.sort_by(|a, b| a.x_star.total_cmp(&b.x_star));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{LocalMonitor, Monitors, PeakMonitor};

    fn times(n: usize, t0: f64, t1: f64) -> Vec<f64> {
        (0..n)
            .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn exact_line_recovers_t_star_and_slope() {
        let t = times(20, 0.1, 0.19);
        let d1: Vec<f64> = t.iter().map(|&s| 1.0 / (1.5 * (0.2 - s))).collect();
        let w = TimeWindow {
            start: 0.0,
            end: 1.0,
        };
        for model in [TStarModel::Line, TStarModel::Corrected] {
            let fit = fit_t_star(&t, std::slice::from_ref(&d1), w, model).unwrap();
            assert!((fit.t_star - 0.2).abs() < 1e-12, "{model:?} {}", fit.t_star);
            assert!((fit.components[0].slope - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn corrected_model_removes_the_half_order_bias() {
        let t = times(40, 0.180, 0.1985);
        let y = |s: f64| {
            let tau = 0.2 - s;
            1.0 / (1.5 * tau + 0.8 * tau * tau.sqrt())
        };
        let d1: Vec<f64> = t.iter().map(|&s| y(s)).collect();
        let w = TimeWindow {
            start: 0.0,
            end: 1.0,
        };
        let line = fit_t_star(&t, std::slice::from_ref(&d1), w, TStarModel::Line).unwrap();
        let fit = fit_t_star(&t, &[d1], w, TStarModel::Corrected).unwrap();
        assert!((line.t_star - 0.2).abs() > 1e-5);
        assert!((fit.t_star - 0.2).abs() < 1e-10);
        assert!((fit.components[0].leading - 1.5).abs() < 1e-7);
        assert!((fit.components[0].correction - 0.8).abs() < 1e-5);
    }

    #[test]
    fn components_combine_by_inverse_variance() {
        let t = times(30, 0.1, 0.19);
        let a: Vec<f64> = t.iter().map(|&s| 1.0 / (1.5 * (0.2 - s))).collect();
        let b: Vec<f64> = t
            .iter()
            .enumerate()
            .map(|(k, &s)| 1.0 / ((0.2 - s) * (1.0 + 1e-4 * (k as f64).sin())))
            .collect();
        let fit = fit_t_star(
            &t,
            &[a, b],
            TimeWindow {
                start: 0.0,
                end: 1.0,
            },
            TStarModel::Line,
        )
        .unwrap();
        assert_eq!(fit.components.len(), 2);
        assert!((fit.t_star - 0.2).abs() < 1e-12);
    }

    #[test]
    fn short_or_non_monotone_series_are_rejected() {
        let t = times(5, 0.1, 0.15);
        let d1: Vec<f64> = t.iter().map(|&s| 1.0 / (0.2 - s)).collect();
        let w = TimeWindow {
            start: 0.0,
            end: 1.0,
        };
        assert!(matches!(
            fit_t_star(&t, &[d1], w, TStarModel::Line),
            Err(SingularityError::InsufficientData { got: 5, .. })
        ));
        let t = times(10, 0.1, 0.15);
        let mut d1: Vec<f64> = t.iter().map(|&s| 1.0 / (0.2 - s)).collect();
        d1[6] = d1[4];
        assert!(matches!(
            fit_t_star(&t, &[d1], w, TStarModel::Line),
            Err(SingularityError::NonMonotone { component: 0, .. })
        ));
    }

    #[test]
    fn linear_track_is_recovered_exactly() {
        let t = times(12, 0.1, 0.19);
        let x: Vec<f64> = t.iter().map(|&s| 0.6 - 0.9 * (0.2 - s)).collect();
        let fit = fit_x_star(
            &t,
            &x,
            0.2,
            TimeWindow {
                start: 0.0,
                end: 1.0,
            },
        )
        .unwrap();
        assert!((fit.x_star - 0.6).abs() < 1e-13);
        assert!((fit.lambda + 0.9).abs() < 1e-12);
    }

    #[test]
    fn square_root_state_is_recovered_exactly() {
        let t = times(12, 0.1, 0.19);
        let f: Vec<f64> = t.iter().map(|&s| 1.0 + 2.0 * (0.2 - s).sqrt()).collect();
        let fit = extrapolate_f_star(
            &t,
            &[f],
            0.2,
            TimeWindow {
                start: 0.0,
                end: 1.0,
            },
        )
        .unwrap();
        assert!((fit.f_star[0] - 1.0).abs() < 1e-12);
        assert!((fit.sqrt_coeff[0] - 2.0).abs() < 1e-10);
        assert!(fit.linear_coeff[0].abs() < 1e-9);
    }

    fn shallow_water_eig(u: f64, eta: f64) -> EigenSystem {
        let m = HyperbolicSystem::shallow_water()
            .eval_matrix(&[u, eta])
            .unwrap();
        eigen_decompose(&m).unwrap()
    }

    #[test]
    fn family_follows_direction_and_speed() {
        let (u, eta) = (-0.12, 1.21);
        let eig = shallow_water_eig(u, eta);
        let c = eta.sqrt();
        let minus = identify_family(-u - c, &eig, &[-1.0, -c]).unwrap();
        assert_eq!(minus.family, 0);
        assert!(minus.alignment > 1.0 - 1e-12);
        let plus = identify_family(-u + c, &eig, &[-1.0, c]).unwrap();
        assert_eq!(plus.family, 1);
        assert_eq!(
            identify_family(-u + c, &eig, &[-1.0, -c]),
            Err(SingularityError::AmbiguousFamily {
                by_direction: 0,
                by_speed: 1
            })
        );
        let scalar =
            eigen_decompose(&HyperbolicSystem::burgers().eval_matrix(&[0.0]).unwrap()).unwrap();
        assert_eq!(identify_family(0.0, &scalar, &[-0.3]).unwrap().family, 0);
    }

    fn record(t: f64, xs: &[f64]) -> MonitorRecord {
        MonitorRecord {
            t,
            dt: 1e-3,
            num_points: 64,
            monitors: Monitors {
                components: Vec::new(),
                peaks: xs
                    .iter()
                    .map(|&x| PeakMonitor {
                        x,
                        state: vec![x],
                        increment: vec![-1.0],
                        components: vec![LocalMonitor {
                            max_d1: 1.0 / (0.2 - t),
                            argmax_x: x,
                            max_d2: 1.0,
                        }],
                    })
                    .collect(),
            },
        }
    }

    #[test]
    fn tracks_follow_fronts_across_the_seam() {
        let series: Vec<MonitorRecord> = (0..10)
            .map(|k| {
                let t = 0.01 * k as f64;
                let a = (0.99 + 0.004 * k as f64).rem_euclid(1.0);
                let b = 0.4 - 0.003 * k as f64;
                if k % 2 == 0 {
                    record(t, &[a, b])
                } else {
                    record(t, &[b, a])
                }
            })
            .collect();
        let tracks = track_peaks(&series, 1.0, 0.02);
        assert_eq!(tracks.len(), 2);
        let seam = tracks.iter().find(|tr| tr.x[0] > 0.9).unwrap();
        assert_eq!(seam.len(), 10);
        assert!((seam.x[9] - (0.99 + 0.036)).abs() < 1e-12);
        let other = tracks.iter().find(|tr| tr.x[0] < 0.5).unwrap();
        assert!((other.x[9] - 0.373).abs() < 1e-12);
    }

    #[test]
    fn a_far_peak_starts_a_new_track() {
        let series = vec![record(0.0, &[0.5]), record(0.01, &[0.55])];
        assert_eq!(track_peaks(&series, 1.0, 0.02).len(), 2);
    }

    #[test]
    fn interpolation_stays_inside_the_data() {
        let ts = [0.0, 1.0, 2.0];
        let ys = [0.0, 2.0, 3.0];
        assert_eq!(interpolate(&ts, &ys, 0.5), Some(1.0));
        assert_eq!(interpolate(&ts, &ys, 0.0), Some(0.0));
        assert_eq!(interpolate(&ts, &ys, 2.5), None);
    }
}
