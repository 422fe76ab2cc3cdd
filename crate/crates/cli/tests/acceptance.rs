//! One PASS/FAIL line per acceptance criterion. Runs the full experiments,
//! so it takes a few minutes.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use shockform_cli::config::ExperimentConfig;
use shockform_cli::report::Report;
use shockform_cli::run_experiment;
use shockform_cli::synth::SynthSpec;
use shockform_core::eigensystem::eigen_decompose;
use shockform_core::linalg::SquareMatrix;
use shockform_core::model::HyperbolicSystem;
use shockform_core::similarity::{
    compute_c, profile_slope, reporting_gauge, solve_f, SimilaritySolution, SECOND_DERIVATIVE_COEFF,
};
use shockform_core::solver::{evolve, Controls, Grid};

struct Outcome {
    passed: bool,
    detail: String,
}

fn line(number: usize, title: &str, outcome: &Outcome) {
    let tag = if outcome.passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {number}. {title}: {}", outcome.detail);
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(name: &str) -> (Report, f64) {
    let cfg = ExperimentConfig::load(&configs().join(name)).expect("shipped config loads");
    let dir = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let report = run_experiment(&cfg, dir.path()).expect("experiment writes its report");
    (report, start.elapsed().as_secs_f64())
}

fn metric(report: &Report, key: &str) -> f64 {
    report.metric(key).unwrap_or(f64::NAN)
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn c_is_three_halves() -> Outcome {
    let sw = HyperbolicSystem::shallow_water();
    let mut rng = StdRng::seed_from_u64(20);
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let state = [rng.gen_range(-2.0..2.0), rng.gen_range(0.1..4.0)];
        let eig = eigen_decompose(&sw.eval_matrix(&state).unwrap()).unwrap();
        let tensor = sw.eval_tensor(&state).unwrap();
        for a in 0..2 {
            let (e, el, _) = reporting_gauge(&eig.right_vectors[a], &eig.left_vectors[a]).unwrap();
            let c = compute_c(&tensor, &e, &el).unwrap();
            worst = worst.max((c - 1.5).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: worst <= 1e-12 && secs < 1.0,
        detail: format!("max |c - 3/2| = {worst:.1e} over 20 states x 2 families (tol 1e-12), {secs:.3} s (limit 1 s)"),
    }
}

fn shock_pair(report: &Report, secs: f64) -> Outcome {
    let count = metric(report, "shock_count");
    let t0 = metric(report, "shock0.t_star");
    let t1 = metric(report, "shock1.t_star");
    let (x0, x1) = (
        metric(report, "shock0.x_star"),
        metric(report, "shock1.x_star"),
    );
    let t_ok = [t0, t1].iter().all(|t| (0.194..=0.198).contains(t));
    let passed = count == 2.0 && t_ok && within(x1, 0.663, 0.003) && within(x0, 0.337, 0.003);
    Outcome {
        passed,
        detail: format!(
            "{count} shocks, t* = {t1:.5} / {t0:.5} (in [0.194, 0.198]), x* = {x1:.5} (0.663 ± 0.003) and {x0:.5} (0.337 ± 0.003), {secs:.1} s"
        ),
    }
}

fn first_derivative(report: &Report) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in ["u", "eta"] {
        let slope = metric(report, &format!("shock1.slope1.{name}"));
        let ratio = metric(report, &format!("shock1.ratio1.{name}"));
        passed &= within(slope, -1.0, 0.03) && (0.95..=1.05).contains(&ratio);
        parts.push(format!("{name}: slope {slope:.4}, median ratio {ratio:.4}"));
    }
    Outcome {
        passed,
        detail: format!(
            "{} (slope -1 ± 0.03, ratio in [0.95, 1.05])",
            parts.join("; ")
        ),
    }
}

fn second_derivative(report: &Report) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in ["u", "eta"] {
        let slope = metric(report, &format!("shock1.slope2.{name}"));
        passed &= within(slope, -2.5, 0.1);
        parts.push(format!("{name} slope {slope:.4}"));
    }
    let k = metric(report, "shock1.k");
    passed &= within(k, 0.14, 0.03);
    Outcome {
        passed,
        detail: format!(
            "{}, K = {k:.4} (slope -2.5 ± 0.1, K 0.14 ± 0.03)",
            parts.join(", ")
        ),
    }
}

fn collapse(report: &Report) -> Outcome {
    let Some(col) = report.shocks.get(1).and_then(|s| s.collapse.as_ref()) else {
        return Outcome {
            passed: false,
            detail: "no collapse for the shock near x = 0.663".into(),
        };
    };
    let mut snaps: Vec<(f64, f64)> = col.snapshots.iter().map(|s| (s.tau, s.error)).collect();
    snaps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let span = snaps
        .first()
        .zip(snaps.last())
        .map_or(0.0, |(a, b)| (a.0 / b.0).log10());
    let listing: Vec<String> = snaps
        .iter()
        .map(|(tau, err)| format!("{:.2}% at t*-t = {tau:.2e}", 100.0 * err))
        .collect();
    Outcome {
        passed: snaps.len() == 3 && col.latest_error < 0.05 && col.decreasing,
        detail: format!(
            "{} (span {span:.2} decades); latest {:.2}% of profile scale (< 5%), decreasing: {}",
            listing.join(", "),
            100.0 * col.latest_error,
            col.decreasing
        ),
    }
}

fn burgers(report: &Report) -> Outcome {
    let exact = 1.0 / TAU;
    let t = metric(report, "shock0.t_star");
    let x = metric(report, "shock0.x_star");
    let c = metric(report, "shock0.c");
    let ratio = metric(report, "shock0.ratio1.u");
    let passed = metric(report, "shock_count") == 1.0
        && (t / exact - 1.0).abs() <= 5e-3
        && within(x, 0.5, 0.002)
        && within(c, 1.0, 1e-12)
        && within(ratio, 1.0, 0.02);
    Outcome {
        passed,
        detail: format!(
            "t* = {t:.7} vs 1/(2π) = {exact:.7} ({:+.2e} relative, tol 0.5%), x* = {x:.6} (0.5 ± 0.002), c = {c}, max|u_x|(t*-t) median {ratio:.4} (1 ± 0.02)",
            t / exact - 1.0
        ),
    }
}

fn properties() -> Outcome {
    let mut checks: Vec<(String, bool)> = Vec::new();

    let mut residual = 0.0_f64;
    let mut odd = true;
    let mut monotone = true;
    for k in [0.01, 0.14, 1.0, 7.5] {
        let mut previous = f64::INFINITY;
        for j in 0..1000 {
            let xi = -200.0 + 400.0 * j as f64 / 999.0;
            let f = solve_f(xi, k).unwrap();
            residual = residual.max((f + k * f * f * f + xi).abs() / (1.0 + xi.abs()));
            odd &= solve_f(-xi, k).unwrap() == -f;
            monotone &= f < previous;
            previous = f;
        }
    }
    checks.push((
        format!("cubic residual {residual:.1e} (<= 1e-13 relative to 1+|xi|)"),
        residual <= 1e-13,
    ));
    checks.push((
        format!("F odd {odd}, strictly decreasing {monotone}"),
        odd && monotone,
    ));

    let mut rng = StdRng::seed_from_u64(7);
    let sw = HyperbolicSystem::shallow_water();
    let mut bio = 0.0_f64;
    let mut fd = 0.0_f64;
    for _ in 0..50 {
        let state = [rng.gen_range(-2.0..2.0), rng.gen_range(0.1..4.0)];
        fd = fd.max(sw.numeric_tensor_check(&state, 1e-5).unwrap());
        let mut rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.gen_range(-0.4..0.4)).collect())
            .collect();
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] += 2.0;
        }
        let p = SquareMatrix::from_rows(&rows);
        let lambdas = [
            -1.0 + rng.gen_range(0.0..0.5),
            rng.gen_range(0.0..0.5),
            1.0 + rng.gen_range(0.0..0.5),
        ];
        let m = p
            .matmul(&SquareMatrix::diagonal(&lambdas))
            .matmul(&p.inverse().unwrap());
        for matrix in [m, sw.eval_matrix(&state).unwrap()] {
            let eig = eigen_decompose(&matrix).unwrap();
            let n = eig.dim();
            for a in 0..n {
                for b in 0..n {
                    let d: f64 = (0..n)
                        .map(|i| eig.left_vectors[a][i] * eig.right_vectors[b][i])
                        .sum();
                    bio = bio.max((d - if a == b { 1.0 } else { 0.0 }).abs());
                }
            }
        }
    }
    checks.push((
        format!("biorthogonality {bio:.1e} (<= 1e-10)"),
        bio <= 1e-10,
    ));
    checks.push((
        format!("tensor vs finite differences {fd:.1e} (<= 1e-6)"),
        fd <= 1e-6,
    ));

    let mut slope_err = 0.0_f64;
    for j in 0..200 {
        let xi = -20.0 + 40.0 * j as f64 / 199.0;
        let h = 1e-5;
        let numeric = (solve_f(xi + h, 0.14).unwrap() - solve_f(xi - h, 0.14).unwrap()) / (2.0 * h);
        slope_err =
            slope_err.max((numeric - profile_slope(solve_f(xi, 0.14).unwrap(), 0.14)).abs());
    }
    checks.push((
        format!("dF/dxi vs finite differences {slope_err:.1e} (<= 1e-6)"),
        slope_err <= 1e-6,
    ));

    let sol = SimilaritySolution {
        t_star: 0.196,
        x_star: 0.663,
        lambda: -0.975,
        f_star: vec![-0.124, 1.212],
        e: vec![1.0, 1.1],
        c: 1.5,
        k: 0.14,
        domain_length: 1.0,
    };
    let mut gauge = 0.0_f64;
    for mu in [-2.0, 0.5, 3.0] {
        let other = sol.regauged(mu);
        for j in 0..400 {
            let (x, t) = (
                0.6 + 0.15 * j as f64 / 399.0,
                0.19 + 0.005 * (j % 7) as f64 / 7.0,
            );
            let (a, b) = (
                sol.reconstruct(x, t).unwrap(),
                other.reconstruct(x, t).unwrap(),
            );
            gauge = gauge.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
    }
    checks.push((
        format!("gauge invariance {gauge:.1e} (<= 1e-12)"),
        gauge <= 1e-12,
    ));

    let grid = Grid::new(256, 1.0).unwrap();
    let mut fields = vec![vec![0.0; 256], vec![1.0; 256]];
    for m in 0..256 {
        fields[0][m] = (TAU * grid.x(m)).sin();
    }
    let controls = Controls {
        max_time: 0.1,
        snapshot_times: vec![0.1],
        ..Controls::default()
    };
    let snap = evolve(&sw, fields, grid, &controls).unwrap();
    let snap = snap.snapshot_near(0.1).unwrap();
    let mut mirror = 0.0_f64;
    for m in 0..256 {
        let r = (256 - m) % 256;
        mirror = mirror
            .max((snap.fields[0][m] + snap.fields[0][r]).abs())
            .max((snap.fields[1][m] - snap.fields[1][r]).abs());
    }
    checks.push((
        format!("mirror symmetry {mirror:.1e} (<= 1e-9)"),
        mirror <= 1e-9,
    ));

    let mut round_trip = 0.0_f64;
    for (t_star, k) in [(0.2, 0.14), (0.15915, 0.0265), (1.3, 0.8)] {
        let spec = SynthSpec {
            t_star,
            k,
            ..SynthSpec::default()
        };
        let (_, r) = spec.round_trip().unwrap();
        round_trip = round_trip
            .max((r.t_star_error / t_star).abs())
            .max((r.k_error / k).abs());
    }
    checks.push((
        format!("synthetic (t*, K) round trip {round_trip:.1e} (<= 1e-6)"),
        round_trip <= 1e-6,
    ));

    Outcome {
        passed: checks.iter().all(|c| c.1),
        detail: checks
            .iter()
            .map(|(s, ok)| {
                if *ok {
                    s.clone()
                } else {
                    format!("FAILED {s}")
                }
            })
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn coefficient_identity() -> Outcome {
    let general = 25.0 * 15f64.sqrt() / 108.0;
    let specialised = 25.0 * 15f64.sqrt() / 243.0;
    let a = (SECOND_DERIVATIVE_COEFF - general).abs();
    let b = (SECOND_DERIVATIVE_COEFF / (1.5 * 1.5) - specialised).abs();
    // 108 · 9/4 = 243 in exact integer arithmetic
    let exact = 108 * 9 == 243 * 4;
    Outcome {
        passed: a <= 1e-15 && b <= 1e-15 && exact,
        detail: format!(
            "(25√15/108)/(3/2)² - 25√15/243 = {b:.1e}, coefficient vs 25√15/108 = {a:.1e}, 108·9 = 243·4: {exact}"
        ),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, title: &str, o: Outcome| {
        line(n, title, &o);
        all &= o.passed;
    };
    report(1, "c = 3/2 for shallow water", c_is_three_halves());
    let (plain, secs) = run("shallow_water_4096.toml");
    report(
        2,
        "shock pair on the 4096-point grid",
        shock_pair(&plain, secs),
    );
    let (refined, secs) = run("shallow_water.toml");
    println!("      refined shallow-water run took {secs:.0} s");
    report(3, "first-derivative blowup", first_derivative(&refined));
    report(
        4,
        "second-derivative blowup and K",
        second_derivative(&refined),
    );
    report(5, "profile collapse", collapse(&refined));
    let (b, _) = run("burgers.toml");
    report(6, "Burgers against characteristics", burgers(&b));
    report(7, "property suites", properties());
    report(
        8,
        "second-derivative coefficient identity",
        coefficient_identity(),
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
