//! Method-of-lines evolution of `∂f/∂t = M(f)·∂f/∂x` on a periodic grid.
//!
//! Space is discretised by Fourier collocation, time by classical RK4 with a
//! CFL-limited step that is halved whenever the maximal slope would grow by
//! more than a fixed fraction in one step. The run stops before the shock
//! forms; post-shock evolution is not attempted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{HyperbolicSystem, ModelError};
use crate::spectral::{DerivativeSet, SpectralError, SpectralOperator};

/// Smallest default threshold, as a multiple of the initial max slope.
const MIN_THRESHOLD_GROWTH: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid controls: {0}")]
    Controls(String),
    #[error("initial data: {0}")]
    InitialData(String),
    #[error("at x = {x} (index {index}): {source}")]
    Domain {
        index: usize,
        x: f64,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Uniform periodic grid `x_m = m·Δx`, `m = 0..num_points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub num_points: usize,
    pub domain_length: f64,
}

impl Grid {
    pub fn new(num_points: usize, domain_length: f64) -> Result<Self, SolverError> {
        if num_points < 8 || !num_points.is_power_of_two() {
            return Err(SolverError::Grid(format!(
                "num_points must be a power of two >= 8, got {num_points}"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(SolverError::Grid(format!(
                "domain_length must be positive, got {domain_length}"
            )));
        }
        Ok(Self {
            num_points,
            domain_length,
        })
    }

    pub fn unit(num_points: usize) -> Result<Self, SolverError> {
        Self::new(num_points, 1.0)
    }

    pub fn dx(&self) -> f64 {
        self.domain_length / self.num_points as f64
    }

    pub fn x(&self, m: usize) -> f64 {
        m as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.num_points).map(|m| self.x(m)).collect()
    }

    /// Maps `x` into `[0, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(self.domain_length)
    }
}

/// Global slope and curvature monitor of one component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentMonitor {
    /// `max |∂f_i/∂x|` (sub-grid refined).
    pub max_d1: f64,
    /// Grid index of the largest `|∂f_i/∂x|`.
    pub argmax_index: usize,
    /// Interpolated location of the maximum.
    pub argmax_x: f64,
    /// `f_i` at `argmax_x`.
    pub f_at_argmax: f64,
    /// `max |∂²f_i/∂x²|` (sub-grid refined).
    pub max_d2: f64,
    /// Fraction of spectral amplitude in the top third of the modes.
    pub spectral_tail: f64,
}

/// Per-component data near one steep front.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMonitor {
    pub max_d1: f64,
    pub argmax_x: f64,
    pub max_d2: f64,
}

/// A local maximum of the slope magnitude `sqrt(Σ_i (∂f_i/∂x)²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakMonitor {
    /// Argmax of the steepest component near this front.
    pub x: f64,
    /// State `f` at `x`.
    pub state: Vec<f64>,
    /// `f(x + Δx) − f(x − Δx)`, the local direction of the jump.
    pub increment: Vec<f64>,
    pub components: Vec<LocalMonitor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    pub components: Vec<ComponentMonitor>,
    pub peaks: Vec<PeakMonitor>,
}

impl Monitors {
    /// Max over components of `max |∂f_i/∂x|`.
    pub fn max_slope(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0_f64, |acc, c| acc.max(c.max_d1))
    }

    pub fn max_tail(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0_f64, |acc, c| acc.max(c.spectral_tail))
    }
}

/// All fields at one time with their spectral derivatives.
#[derive(Clone, Debug)]
pub struct GridSnapshot {
    pub time: f64,
    pub grid: Grid,
    pub fields: Vec<Vec<f64>>,
    pub first_derivs: Vec<Vec<f64>>,
    pub second_derivs: Vec<Vec<f64>>,
    pub monitors: Monitors,
}

/// One accepted step of the monitor time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub dt: f64,
    /// Grid size in use when the step was taken.
    pub num_points: usize,
    pub monitors: Monitors,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    DerivativeThreshold,
    DtFloor,
    MaxTime,
    AdmissibilityViolation,
    /// The finest allowed grid no longer resolves the solution.
    ResolutionLimit,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Initial grid.
    pub grid: Grid,
    /// Grid at the end of the run; finer than `grid` after refinement.
    pub final_grid: Grid,
    /// Thinned, time-ordered full snapshots.
    pub snapshots: Vec<GridSnapshot>,
    /// Every accepted step, strictly increasing in `t`.
    pub monitor_series: Vec<MonitorRecord>,
    pub stop_reason: StopReason,
    /// Why an admissibility stop happened.
    pub message: Option<String>,
    pub initial_max_slope: f64,
    pub blowup_threshold: f64,
    pub rejected_steps: usize,
}

impl RunResult {
    pub fn final_time(&self) -> f64 {
        self.monitor_series.last().map_or(0.0, |r| r.t)
    }

    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_near(&self, t: f64) -> Option<&GridSnapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
    }
}

/// Time-stepping and stopping controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    /// `dt = cfl_number · Δx / (max wave speed + ε)`.
    pub cfl_number: f64,
    /// Absolute stop threshold on `max |∂f/∂x|`. `None` means the smaller
    /// of `threshold_factor × initial max slope` and
    /// `resolution_factor × initial range / Δx_min`, the largest slope the
    /// finest grid can carry before the front collapses onto a few cells.
    /// The second bound is never below ten times the initial slope.
    pub blowup_threshold: Option<f64>,
    pub threshold_factor: f64,
    pub resolution_factor: f64,
    /// Finest grid allowed. The grid is doubled by spectral interpolation
    /// whenever the spectral tail of some component exceeds `refine_tail`.
    /// `None` keeps the initial grid.
    pub max_points: Option<usize>,
    pub refine_tail: f64,
    /// On the finest grid, a spectral tail above this stops the run.
    pub tail_limit: f64,
    pub dt_floor: f64,
    pub max_time: f64,
    /// Largest accepted relative growth of `max |∂f/∂x|` in one step.
    pub growth_limit: f64,
    /// A snapshot is kept each time the max slope grows by this factor.
    pub snapshot_ratio: f64,
    /// Additional times at which a snapshot is kept (steps land on them).
    pub snapshot_times: Vec<f64>,
    /// Local maxima of the slope magnitude below this fraction of the global
    /// maximum are not tracked as fronts.
    pub peak_fraction: f64,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            cfl_number: 0.5,
            blowup_threshold: None,
            threshold_factor: 1e4,
            resolution_factor: 0.03,
            max_points: None,
            refine_tail: 1e-9,
            tail_limit: 1e-2,
            dt_floor: 1e-11,
            max_time: 10.0,
            growth_limit: 0.02,
            snapshot_ratio: 10f64.powf(0.05),
            snapshot_times: Vec::new(),
            peak_fraction: 0.5,
            max_steps: 2_000_000,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("cfl_number", self.cfl_number),
            ("threshold_factor", self.threshold_factor),
            ("resolution_factor", self.resolution_factor),
            ("refine_tail", self.refine_tail),
            ("tail_limit", self.tail_limit),
            ("dt_floor", self.dt_floor),
            ("max_time", self.max_time),
            ("growth_limit", self.growth_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::Controls(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if let Some(th) = self.blowup_threshold {
            if !(th > 0.0) {
                return Err(SolverError::Controls(format!(
                    "blowup_threshold must be positive, got {th}"
                )));
            }
        }
        if let Some(n) = self.max_points {
            if !n.is_power_of_two() {
                return Err(SolverError::Controls(format!(
                    "max_points must be a power of two, got {n}"
                )));
            }
        }
        if !(self.snapshot_ratio > 1.0) {
            return Err(SolverError::Controls("snapshot_ratio must exceed 1".into()));
        }
        if !(0.0..1.0).contains(&self.peak_fraction) || self.peak_fraction == 0.0 {
            return Err(SolverError::Controls(
                "peak_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// A system bound to a grid and its spectral operator.
#[derive(Clone, Debug)]
pub struct Solver<'a> {
    system: &'a HyperbolicSystem,
    grid: Grid,
    op: SpectralOperator,
}

impl<'a> Solver<'a> {
    pub fn new(system: &'a HyperbolicSystem, grid: Grid) -> Result<Self, SolverError> {
        let op = SpectralOperator::new(grid.num_points, grid.domain_length)?;
        Ok(Self { system, grid, op })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn system(&self) -> &HyperbolicSystem {
        self.system
    }

    fn check_fields(&self, fields: &[Vec<f64>]) -> Result<(), SolverError> {
        let dim = self.system.dimension();
        if fields.len() != dim {
            return Err(SolverError::InitialData(format!(
                "{} fields given, model has {dim}",
                fields.len()
            )));
        }
        for f in fields {
            if f.len() != self.grid.num_points {
                return Err(SpectralError::LengthMismatch {
                    expected: self.grid.num_points,
                    got: f.len(),
                }
                .into());
            }
        }
        Ok(())
    }

    fn point_state(fields: &[Vec<f64>], m: usize, buf: &mut [f64]) {
        for (b, f) in buf.iter_mut().zip(fields) {
            *b = f[m];
        }
    }

    /// `M(f(x))·∂f/∂x` at every grid point.
    pub fn rhs(&self, fields: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SolverError> {
        self.check_fields(fields)?;
        let n = self.grid.num_points;
        let dim = fields.len();
        let mut derivs = vec![vec![0.0; n]; dim];
        for (f, d) in fields.iter().zip(derivs.iter_mut()) {
            if let Some(i) = f.iter().position(|v| !v.is_finite()) {
                return Err(SpectralError::NonFinite(i).into());
            }
            self.op.first_derivative_into(f, d);
        }
        let mut out = vec![vec![0.0; n]; dim];
        let mut state = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        let mut prod = vec![0.0; dim];
        for m in 0..n {
            Self::point_state(fields, m, &mut state);
            self.system
                .check_state(&state)
                .map_err(|source| SolverError::Domain {
                    index: m,
                    x: self.grid.x(m),
                    source,
                })?;
            Self::point_state(&derivs, m, &mut grad);
            self.system.apply_unchecked(&state, &grad, &mut prod);
            for (o, p) in out.iter_mut().zip(&prod) {
                o[m] = *p;
            }
        }
        Ok(out)
    }

    /// Fields plus derivatives and monitors at time `t`.
    pub fn snapshot(
        &self,
        time: f64,
        fields: Vec<Vec<f64>>,
        peak_fraction: f64,
    ) -> Result<GridSnapshot, SolverError> {
        self.check_fields(&fields)?;
        let sets = fields
            .iter()
            .map(|f| self.op.derivative_set(f))
            .collect::<Result<Vec<_>, _>>()?;
        let monitors = compute_monitors(self.grid, &fields, &sets, peak_fraction);
        let (first_derivs, second_derivs) = sets.into_iter().map(|s| (s.d1, s.d2)).unzip();
        Ok(GridSnapshot {
            time,
            grid: self.grid,
            fields,
            first_derivs,
            second_derivs,
            monitors,
        })
    }

    fn rk4_fields(&self, fields: &[Vec<f64>], dt: f64) -> Result<Vec<Vec<f64>>, SolverError> {
        let axpy = |base: &[Vec<f64>], k: &[Vec<f64>], h: f64| -> Vec<Vec<f64>> {
            base.iter()
                .zip(k)
                .map(|(b, kk)| b.iter().zip(kk).map(|(x, y)| x + h * y).collect())
                .collect()
        };
        let k1 = self.rhs(fields)?;
        let k2 = self.rhs(&axpy(fields, &k1, 0.5 * dt))?;
        let k3 = self.rhs(&axpy(fields, &k2, 0.5 * dt))?;
        let k4 = self.rhs(&axpy(fields, &k3, dt))?;
        let w = dt / 6.0;
        Ok(fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                (0..f.len())
                    .map(|m| f[m] + w * (k1[c][m] + 2.0 * k2[c][m] + 2.0 * k3[c][m] + k4[c][m]))
                    .collect()
            })
            .collect())
    }

    /// One classical RK4 step; derivatives and monitors are recomputed.
    pub fn step_rk4(
        &self,
        snapshot: &GridSnapshot,
        dt: f64,
        peak_fraction: f64,
    ) -> Result<GridSnapshot, SolverError> {
        if !(dt > 0.0) {
            return Err(SolverError::Controls(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let fields = self.rk4_fields(&snapshot.fields, dt)?;
        self.snapshot(snapshot.time + dt, fields, peak_fraction)
    }

    /// The same state on a grid with twice as many points.
    pub fn refined(&self, fields: &[Vec<f64>]) -> Result<(Solver<'a>, Vec<Vec<f64>>), SolverError> {
        self.check_fields(fields)?;
        let grid = Grid::new(2 * self.grid.num_points, self.grid.domain_length)?;
        let fine = fields
            .iter()
            .map(|f| self.op.refine(f))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Solver::new(self.system, grid)?, fine))
    }

    /// Max characteristic speed over the grid, checking admissibility and
    /// strict hyperbolicity point by point.
    pub fn max_wave_speed(&self, fields: &[Vec<f64>]) -> Result<f64, SolverError> {
        let dim = fields.len();
        let mut state = vec![0.0; dim];
        let mut speed = 0.0_f64;
        for m in 0..self.grid.num_points {
            Self::point_state(fields, m, &mut state);
            let domain = |source| SolverError::Domain {
                index: m,
                x: self.grid.x(m),
                source,
            };
            self.system.check_state(&state).map_err(domain)?;
            let s = self.system.max_wave_speed(&state).map_err(domain)?;
            speed = speed.max(s);
        }
        Ok(speed)
    }
}

/// Integrates from `initial_fields` until the slope threshold, the dt floor,
/// the resolution limit, or `max_time` is reached.
pub fn evolve(
    system: &HyperbolicSystem,
    initial_fields: Vec<Vec<f64>>,
    grid: Grid,
    controls: &Controls,
) -> Result<RunResult, SolverError> {
    controls.validate()?;
    let max_points = controls.max_points.unwrap_or(grid.num_points);
    if max_points < grid.num_points {
        return Err(SolverError::Controls(format!(
            "max_points {max_points} is below the initial grid size {}",
            grid.num_points
        )));
    }
    let mut solver = Solver::new(system, grid)?;
    solver.check_fields(&initial_fields)?;
    for (c, f) in initial_fields.iter().enumerate() {
        if let Some(m) = f.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::InitialData(format!(
                "field {c} is not finite at index {m}"
            )));
        }
    }
    solver.max_wave_speed(&initial_fields)?;
    let mut current = solver.snapshot(0.0, initial_fields, controls.peak_fraction)?;
    let initial_max_slope = current.monitors.max_slope();
    let threshold = match controls.blowup_threshold {
        Some(th) => th,
        None if initial_max_slope > 0.0 => {
            let range = current
                .fields
                .iter()
                .map(|f| {
                    let (lo, hi) = f
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                            (lo.min(v), hi.max(v))
                        });
                    hi - lo
                })
                .fold(0.0_f64, f64::max);
            let dx_min = grid.domain_length / max_points as f64;
            let resolvable = (controls.resolution_factor * range / dx_min)
                .max(MIN_THRESHOLD_GROWTH * initial_max_slope);
            (controls.threshold_factor * initial_max_slope).min(resolvable)
        }
        None => f64::INFINITY,
    };

    let mut pending_times: Vec<f64> = controls
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= controls.max_time)
        .collect();
    pending_times.sort_by(f64::total_cmp);
    pending_times.dedup();
    pending_times.reverse();

    let mut series = vec![MonitorRecord {
        t: 0.0,
        dt: 0.0,
        num_points: grid.num_points,
        monitors: current.monitors.clone(),
    }];
    let mut snapshots = vec![current.clone()];
    let mut last_snapshot_slope = initial_max_slope;
    let mut dt_hint = f64::INFINITY;
    let mut rejected = 0;
    let mut message = None;
    let time_eps = 1e-14 * controls.max_time.max(1.0);

    let stop_reason = loop {
        let slope = current.monitors.max_slope();
        if slope >= threshold {
            break StopReason::DerivativeThreshold;
        }
        if current.time >= controls.max_time - time_eps {
            break StopReason::MaxTime;
        }
        if series.len() >= controls.max_steps {
            break StopReason::DtFloor;
        }
        let tail = current.monitors.max_tail();
        if tail > controls.refine_tail && solver.grid.num_points < max_points {
            let (finer, fields) = solver.refined(&current.fields)?;
            solver = finer;
            current = solver.snapshot(current.time, fields, controls.peak_fraction)?;
            continue;
        }
        if tail > controls.tail_limit {
            break StopReason::ResolutionLimit;
        }
        let speed = match solver.max_wave_speed(&current.fields) {
            Ok(s) => s,
            Err(e) => {
                message = Some(e.to_string());
                break StopReason::AdmissibilityViolation;
            }
        };
        let mut dt = controls.cfl_number * solver.grid.dx() / (speed + 1e-12);
        dt = dt.min(dt_hint);
        // land exactly on targets instead of leaving a sliver below dt_floor
        let margin = controls.dt_floor.max(time_eps);
        let remaining = controls.max_time - current.time;
        if dt >= remaining - margin {
            dt = remaining;
        }
        let mut hit_snapshot_time = false;
        if let Some(&next) = pending_times.last() {
            if current.time + dt >= next - margin {
                dt = next - current.time;
                hit_snapshot_time = true;
            }
        }
        if dt < controls.dt_floor {
            break StopReason::DtFloor;
        }
        let next = match solver.step_rk4(&current, dt, controls.peak_fraction) {
            Ok(s) => s,
            Err(SolverError::Domain { .. }) | Err(SolverError::Spectral(_))
                if dt > controls.dt_floor * 2.0 =>
            {
                rejected += 1;
                dt_hint = 0.5 * dt;
                continue;
            }
            Err(e) => {
                message = Some(e.to_string());
                break StopReason::AdmissibilityViolation;
            }
        };
        let new_slope = next.monitors.max_slope();
        if slope > 0.0 && new_slope > slope * (1.0 + controls.growth_limit) {
            rejected += 1;
            dt_hint = 0.5 * dt;
            continue;
        }
        dt_hint = if slope > 0.0 && new_slope > slope * (1.0 + 0.5 * controls.growth_limit) {
            dt
        } else {
            1.5 * dt
        };
        if hit_snapshot_time {
            pending_times.pop();
        }
        current = next;
        series.push(MonitorRecord {
            t: current.time,
            dt,
            num_points: solver.grid.num_points,
            monitors: current.monitors.clone(),
        });
        if hit_snapshot_time || new_slope >= last_snapshot_slope * controls.snapshot_ratio {
            last_snapshot_slope = last_snapshot_slope.max(new_slope);
            snapshots.push(current.clone());
        }
    };
    if snapshots.last().map(|s| s.time) != Some(current.time) {
        snapshots.push(current);
    }
    Ok(RunResult {
        grid,
        final_grid: solver.grid,
        snapshots,
        monitor_series: series,
        stop_reason,
        message,
        initial_max_slope,
        blowup_threshold: threshold,
        rejected_steps: rejected,
    })
}

fn argmax_abs(values: &[f64], range: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for m in range {
        match best {
            Some(b) if values[b].abs() >= values[m].abs() => {}
            _ => best = Some(m),
        }
    }
    best
}

/// Quintic Hermite interpolant on one cell of width `h`, matching value,
/// slope and curvature at both ends; `t ∈ [0, 1]` is the local coordinate.
struct Quintic {
    h: f64,
    a: [f64; 6],
}

impl Quintic {
    fn on_cell(h: f64, left: [f64; 3], right: [f64; 3]) -> Self {
        let a0 = left[0];
        let a1 = h * left[1];
        let a2 = 0.5 * h * h * left[2];
        let y = right[0] - a0 - a1 - a2;
        let d = h * right[1] - a1 - 2.0 * a2;
        let s = h * h * right[2] - 2.0 * a2;
        Self {
            h,
            a: [
                a0,
                a1,
                a2,
                10.0 * y - 4.0 * d + 0.5 * s,
                -15.0 * y + 7.0 * d - s,
                6.0 * y - 3.0 * d + 0.5 * s,
            ],
        }
    }

    /// `order`-th derivative in `x` at local coordinate `t`.
    fn eval(&self, t: f64, order: usize) -> f64 {
        let mut acc = 0.0;
        for p in (order..6).rev() {
            let falling: f64 = (0..order).map(|q| (p - q) as f64).product();
            acc = acc * t + falling * self.a[p];
        }
        acc / self.h.powi(order as i32)
    }
}

fn cell(arrays: [&[f64]; 3], m: usize, h: f64) -> Quintic {
    let n = arrays[0].len();
    let r = (m + 1) % n;
    Quintic::on_cell(
        h,
        [arrays[0][m], arrays[1][m], arrays[2][m]],
        [arrays[0][r], arrays[1][r], arrays[2][r]],
    )
}

/// Value at an arbitrary `x` from grid samples of `g`, `g'` and `g''`.
fn hermite_value(grid: Grid, arrays: [&[f64]; 3], x: f64) -> f64 {
    let dx = grid.dx();
    let y = grid.wrap(x) / dx;
    let m = (y.floor() as usize).min(grid.num_points - 1);
    cell(arrays, m, dx).eval(y - m as f64, 0)
}

/// Sub-grid location and value of the extremum of `|g|` next to grid index
/// `m`, from a quintic Hermite fit of `g` on the cell where `g'` changes
/// sign. Falls back to the grid point when no such cell is adjacent.
fn refine_extremum(grid: Grid, arrays: [&[f64]; 3], m: usize) -> (f64, f64) {
    let n = grid.num_points;
    let dx = grid.dx();
    let (g, gp) = (arrays[0], arrays[1]);
    let on_grid = (grid.x(m), g[m].abs());
    let sign = if g[m] < 0.0 { -1.0 } else { 1.0 };
    let rising = sign * gp[m];
    let left = if rising > 0.0 {
        if sign * gp[(m + 1) % n] > 0.0 {
            return on_grid;
        }
        m
    } else if rising < 0.0 {
        let l = (m + n - 1) % n;
        if sign * gp[l] < 0.0 {
            return on_grid;
        }
        l
    } else {
        return on_grid;
    };
    let q = cell(arrays, left, dx);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sign * q.eval(mid, 1) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let value = q.eval(t, 0).abs();
    if value >= on_grid.1 {
        (grid.wrap(grid.x(left) + t * dx), value)
    } else {
        on_grid
    }
}

fn compute_monitors(
    grid: Grid,
    fields: &[Vec<f64>],
    sets: &[DerivativeSet],
    peak_fraction: f64,
) -> Monitors {
    let n = grid.num_points;
    let components = fields
        .iter()
        .zip(sets)
        .map(|(f, s)| {
            let m1 = argmax_abs(&s.d1, 0..n).unwrap_or(0);
            let (argmax_x, max_d1) = refine_extremum(grid, [&s.d1, &s.d2, &s.d3], m1);
            let m2 = argmax_abs(&s.d2, 0..n).unwrap_or(0);
            let (_, max_d2) = refine_extremum(grid, [&s.d2, &s.d3, &s.d4], m2);
            ComponentMonitor {
                max_d1,
                argmax_index: m1,
                argmax_x,
                f_at_argmax: hermite_value(grid, [f, &s.d1, &s.d2], argmax_x),
                max_d2,
                spectral_tail: s.tail,
            }
        })
        .collect();
    Monitors {
        components,
        peaks: find_peaks(grid, fields, sets, peak_fraction),
    }
}

const MAX_PEAKS: usize = 8;
const PEAK_HALF_WIDTH: usize = 64;

fn find_peaks(
    grid: Grid,
    fields: &[Vec<f64>],
    sets: &[DerivativeSet],
    peak_fraction: f64,
) -> Vec<PeakMonitor> {
    let n = grid.num_points;
    let magnitude: Vec<f64> = (0..n)
        .map(|m| sets.iter().map(|s| s.d1[m] * s.d1[m]).sum::<f64>().sqrt())
        .collect();
    let gmax = magnitude.iter().fold(0.0_f64, |a, &b| a.max(b));
    if gmax == 0.0 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&m| {
            let g = magnitude[m];
            g >= peak_fraction * gmax
                && g >= magnitude[(m + n - 1) % n]
                && g > magnitude[(m + 1) % n]
        })
        .collect();
    candidates.sort_by(|&a, &b| magnitude[b].total_cmp(&magnitude[a]).then(a.cmp(&b)));
    // ripples next to a front are not separate fronts
    let mut kept: Vec<usize> = Vec::new();
    for m in candidates {
        let close = kept.iter().any(|&k| {
            let d = m.abs_diff(k);
            d.min(n - d) <= PEAK_HALF_WIDTH / 4
        });
        if !close {
            kept.push(m);
        }
        if kept.len() == MAX_PEAKS {
            break;
        }
    }
    kept.sort_unstable();

    let dx = grid.dx();
    kept.into_iter()
        .map(|m| {
            let floor = 0.2 * magnitude[m];
            let mut left = 0;
            while left < PEAK_HALF_WIDTH && magnitude[(m + n - left - 1) % n] >= floor {
                left += 1;
            }
            let mut right = 0;
            while right < PEAK_HALF_WIDTH && magnitude[(m + right + 1) % n] >= floor {
                right += 1;
            }
            let window = || (0..=left + right).map(move |o| (m + n - left + o) % n);
            let components: Vec<LocalMonitor> = sets
                .iter()
                .map(|s| {
                    let i1 = argmax_abs(&s.d1, window()).unwrap_or(m);
                    let (argmax_x, max_d1) = refine_extremum(grid, [&s.d1, &s.d2, &s.d3], i1);
                    let i2 = argmax_abs(&s.d2, window()).unwrap_or(m);
                    let (_, max_d2) = refine_extremum(grid, [&s.d2, &s.d3, &s.d4], i2);
                    LocalMonitor {
                        max_d1,
                        argmax_x,
                        max_d2,
                    }
                })
                .collect();
            let reference = components
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.max_d1.total_cmp(&b.1.max_d1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let x = components[reference].argmax_x;
            let value =
                |c: usize, at: f64| hermite_value(grid, [&fields[c], &sets[c].d1, &sets[c].d2], at);
            let state = (0..fields.len()).map(|c| value(c, x)).collect();
            let increment = (0..fields.len())
                .map(|c| value(c, x + dx) - value(c, x - dx))
                .collect();
            PeakMonitor {
                x,
                state,
                increment,
                components,
            }
        })
        .collect()
}
