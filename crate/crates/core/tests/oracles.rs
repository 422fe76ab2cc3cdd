use std::f64::consts::{PI, TAU};

use shockform_core::model::HyperbolicSystem;
use shockform_core::singularity::{estimate_singularities, resolved_until, EstimateOptions};
use shockform_core::solver::{evolve, Controls, Grid, RunResult, Solver, StopReason};

fn sine_fields(grid: Grid, background: &[f64]) -> Vec<Vec<f64>> {
    let mut fields: Vec<Vec<f64>> = background
        .iter()
        .map(|&b| vec![b; grid.num_points])
        .collect();
    for (m, v) in fields[0].iter_mut().enumerate() {
        *v += (TAU * grid.x(m)).sin();
    }
    fields
}

fn run_to(system: &HyperbolicSystem, grid: Grid, background: &[f64], t: f64) -> RunResult {
    let controls = Controls {
        snapshot_times: vec![t],
        max_time: t,
        ..Controls::default()
    };
    let run = evolve(system, sine_fields(grid, background), grid, &controls).unwrap();
    assert_eq!(run.stop_reason, StopReason::MaxTime);
    run
}

/// `u(x, t)` of `u_t + u u_x = 0` with `u(x, 0) = sin 2πx`, before the
/// characteristics cross: solve `x = x0 + t·sin(2πx0)` for `x0`.
fn burgers_characteristics(x: f64, t: f64) -> f64 {
    let g = |x0: f64| x0 + t * (TAU * x0).sin() - x;
    // g is increasing for t < 1/(2π); bracket one period around x
    let (mut lo, mut hi) = (x - 1.0, x + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (TAU * 0.5 * (lo + hi)).sin()
}

#[test]
fn rk4_time_error_is_fourth_order() {
    let adv = HyperbolicSystem::linear_advection(1.0);
    let grid = Grid::new(32, 1.0).unwrap();
    let solver = Solver::new(&adv, grid).unwrap();
    let horizon = 0.5;
    let error = |steps: usize| {
        let dt = horizon / steps as f64;
        let mut snap = solver
            .snapshot(0.0, sine_fields(grid, &[0.0]), 0.5)
            .unwrap();
        for _ in 0..steps {
            snap = solver.step_rk4(&snap, dt, 0.5).unwrap();
        }
        (0..grid.num_points)
            .map(|m| (snap.fields[0][m] - (TAU * (grid.x(m) - horizon)).sin()).abs())
            .fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (error(20), error(40), error(80));
    let order1 = (e1 / e2).log2();
    let order2 = (e2 / e3).log2();
    assert!((order1 - 4.0).abs() < 0.2, "observed order {order1}");
    assert!((order2 - 4.0).abs() < 0.2, "observed order {order2}");
}

#[test]
fn linear_advection_translates_the_profile() {
    let adv = HyperbolicSystem::linear_advection(1.0);
    let grid = Grid::new(64, 1.0).unwrap();
    let run = run_to(&adv, grid, &[0.0], 0.25);
    let snap = run.snapshot_near(0.25).unwrap();
    assert!((snap.time - 0.25).abs() < 1e-14);
    // RK4 phase error: 32 steps of (ω dt)^5/120 with ω dt ≈ 0.05
    for m in 0..grid.num_points {
        let exact = (TAU * (grid.x(m) - 0.25)).sin();
        assert!((snap.fields[0][m] - exact).abs() < 1e-6);
    }
}

#[test]
fn burgers_matches_characteristics_before_breaking() {
    let grid = Grid::new(512, 1.0).unwrap();
    let run = run_to(&HyperbolicSystem::burgers(), grid, &[0.0], 0.1);
    let snap = run.snapshot_near(0.1).unwrap();
    let worst = (0..grid.num_points)
        .map(|m| (snap.fields[0][m] - burgers_characteristics(grid.x(m), 0.1)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "max deviation {worst}");
}

#[test]
fn shallow_water_keeps_mirror_symmetry_and_mean_height() {
    let sw = HyperbolicSystem::shallow_water();
    let grid = Grid::new(256, 1.0).unwrap();
    let run = run_to(&sw, grid, &[0.0, 1.0], 0.1);
    let snap = run.snapshot_near(0.1).unwrap();
    let n = grid.num_points;
    let mut worst = 0.0_f64;
    for m in 0..n {
        let mirror = (n - m) % n;
        worst = worst.max((snap.fields[0][m] + snap.fields[0][mirror]).abs());
        worst = worst.max((snap.fields[1][m] - snap.fields[1][mirror]).abs());
    }
    assert!(worst <= 1e-9, "mirror asymmetry {worst}");
    let mean = snap.fields[1].iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 1e-12, "mean height {mean}");
}

#[test]
fn burgers_singularity_matches_the_characteristics_oracle() {
    // brute force over the characteristics: they first cross where the
    // initial slope is most negative, at t* = -1/min u0'
    let (mut best_slope, mut best_x0) = (f64::INFINITY, 0.0);
    for j in 0..=100_000 {
        let x0 = j as f64 / 100_000.0;
        let slope = TAU * (TAU * x0).cos();
        if slope < best_slope {
            (best_slope, best_x0) = (slope, x0);
        }
    }
    let t_oracle = -1.0 / best_slope;
    let x_oracle = best_x0 + t_oracle * (TAU * best_x0).sin();
    assert!((t_oracle - 1.0 / (2.0 * PI)).abs() < 1e-9);

    let burgers = HyperbolicSystem::burgers();
    let grid = Grid::new(1024, 1.0).unwrap();
    let controls = Controls {
        max_points: Some(8192),
        ..Controls::default()
    };
    let run = evolve(&burgers, sine_fields(grid, &[0.0]), grid, &controls).unwrap();
    let resolved = resolved_until(&run, None, 0.01, 1e-5);
    let shocks =
        estimate_singularities(&run, &burgers, resolved, &EstimateOptions::default()).unwrap();
    assert_eq!(shocks.len(), 1);
    let s = &shocks[0];
    assert!(
        (s.t_star / t_oracle - 1.0).abs() < 5e-3,
        "t* = {}",
        s.t_star
    );
    assert!((s.x_star - x_oracle).abs() < 2e-3, "x* = {}", s.x_star);
    assert_eq!(s.family, 0);
}
