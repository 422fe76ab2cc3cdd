//! The universal shock profile and the scaling laws it implies.
//!
//! Close to the singular point the solution is
//! `f = f* + τ^{1/2}·F(ξ)·e` with `τ = t* − t`,
//! `ξ = (x − x* − λτ)/(c·τ^{3/2})` and `−ξ = F + K·F³`. This module computes
//! `c`, solves for `F`, fits `K` from the curvature maxima and scores runs
//! against the prediction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm, DerivativeTensor};
use crate::singularity::{SingularityEstimate, TimeWindow};
use crate::solver::GridSnapshot;
use crate::stats::{fit_line, median, weighted_mean};

/// `max |d²F/dξ²|` at `K = 1`, equal to `25√15/108`.
pub const SECOND_DERIVATIVE_COEFF: f64 = 0.896_523_922_733_198_4;

/// Components with `|e_i| < GAUGE_THRESHOLD·‖e‖` are not used.
pub const GAUGE_THRESHOLD: f64 = 1e-6;

pub const DEFAULT_XI_MAX: f64 = 10.0;

/// Largest tolerated deviation of the free curvature exponent from `−5/2`.
pub const SLOPE_WARNING: f64 = 0.15;

const MIN_SAMPLES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("degenerate case: c = {c:e} vanishes relative to scale {scale:e}, the cubic profile does not apply")]
    Degenerate { c: f64, scale: f64 },
    #[error("K must be positive, got {0}")]
    InvalidK(f64),
    #[error("insufficient data: {got} samples, need {needed}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no component of e is above the gauge threshold")]
    NoUsableComponent,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// `c = −Σ M_ij,k e^L_i e_j e_k / Σ e^L_i e_i` at the singular state.
pub fn compute_c(
    tensor: &DerivativeTensor,
    e: &[f64],
    e_left: &[f64],
) -> Result<f64, SimilarityError> {
    let n = tensor.dim();
    if e.len() != n || e_left.len() != n {
        return Err(SimilarityError::InvalidInput(format!(
            "vectors must have {n} components"
        )));
    }
    let denom = dot(e_left, e);
    if !(denom.abs() > 1e-14 * norm(e_left) * norm(e)) {
        return Err(SimilarityError::InvalidInput(
            "left and right eigenvectors are orthogonal".into(),
        ));
    }
    let c = -tensor.contract(e_left, e, e) / denom;
    let scale = norm(tensor.as_slice()) * norm(e);
    if !(c.abs() > 1e-10 * scale) {
        return Err(SimilarityError::Degenerate { c, scale });
    }
    Ok(c)
}

fn check_k(k: f64) -> Result<(), SimilarityError> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(SimilarityError::InvalidK(k))
    }
}

/// The real root `F` of `K·F³ + F + ξ = 0`.
pub fn solve_f(xi: f64, k: f64) -> Result<f64, SimilarityError> {
    check_k(k)?;
    if !xi.is_finite() {
        return Err(SimilarityError::InvalidInput(format!("ξ = {xi}")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    // Solve for the positive root of K F³ + F = a and restore the sign, so
    // the result is exactly odd in ξ.
    let a = xi.abs();
    let g = |f: f64| (k * f * f + 1.0) * f - a;
    let (mut lo, mut hi) = (0.0, a.min((a / k).cbrt()));
    // g is convex on F > 0 and g(hi) ≥ 0, so Newton from hi decreases
    // monotonically onto the root; bisection guards rounding.
    let mut f = hi;
    for _ in 0..100 {
        let value = g(f);
        if value == 0.0 {
            break;
        }
        if value > 0.0 {
            hi = f;
        } else {
            lo = f;
        }
        let mut next = f - value / (3.0 * k * f * f + 1.0);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - f).abs() <= 1e-16 * f.abs() || next == f {
            f = next;
            break;
        }
        f = next;
    }
    Ok(-xi.signum() * f)
}

/// `dF/dξ = −1/(1 + 3KF²)`.
pub fn profile_slope(f: f64, k: f64) -> f64 {
    -1.0 / (1.0 + 3.0 * k * f * f)
}

/// `d²F/dξ² = −6KF/(1 + 3KF²)³`.
pub fn profile_curvature(f: f64, k: f64) -> f64 {
    let q = 1.0 + 3.0 * k * f * f;
    -6.0 * k * f / (q * q * q)
}

/// `(max|dF/dξ|, max|d²F/dξ²|) = (1, (25√15/108)·K^{1/2})`.
pub fn profile_derivative_extrema(k: f64) -> Result<(f64, f64), SimilarityError> {
    check_k(k)?;
    Ok((1.0, SECOND_DERIVATIVE_COEFF * k.sqrt()))
}

/// Components of `e` above the gauge threshold.
pub fn usable_components(e: &[f64]) -> Vec<usize> {
    let scale = norm(e);
    (0..e.len())
        .filter(|&i| e[i].abs() >= GAUGE_THRESHOLD * scale && e[i] != 0.0)
        .collect()
}

/// Rescales `(e, e^L)` to `(μe, e^L/μ)` so that the first usable component
/// of `e` is `+1`. Returns the new pair and `μ`.
pub fn reporting_gauge(
    e: &[f64],
    e_left: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64), SimilarityError> {
    let first = *usable_components(e)
        .first()
        .ok_or(SimilarityError::NoUsableComponent)?;
    let mu = 1.0 / e[first];
    Ok((
        e.iter().map(|v| v * mu).collect(),
        e_left.iter().map(|v| v / mu).collect(),
        mu,
    ))
}

/// Least-squares power law `y = A·τ^p` in log-log coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_std_error: f64,
    pub prefactor: f64,
    pub points: usize,
}

fn window_tau(
    t: &[f64],
    y: &[f64],
    t_star: f64,
    window: TimeWindow,
) -> Result<(Vec<f64>, Vec<f64>), SimilarityError> {
    if y.len() != t.len() {
        return Err(SimilarityError::InvalidInput(
            "series length differs from the time axis".into(),
        ));
    }
    let (tau, ys): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(&s, &v)| window.contains(s) && s < t_star && v > 0.0)
        .map(|(&s, &v)| (t_star - s, v))
        .unzip();
    if tau.len() < MIN_SAMPLES {
        return Err(SimilarityError::InsufficientData {
            needed: MIN_SAMPLES,
            got: tau.len(),
        });
    }
    Ok((tau, ys))
}

/// Fits `y = A·(t* − t)^p` over the samples of `window`.
pub fn fit_power_law(
    t: &[f64],
    y: &[f64],
    t_star: f64,
    window: TimeWindow,
) -> Result<PowerLawFit, SimilarityError> {
    let (tau, ys) = window_tau(t, y, t_star, window)?;
    let lx: Vec<f64> = tau.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&lx, &ly)
        .ok_or_else(|| SimilarityError::InvalidInput("degenerate time axis".into()))?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        exponent_std_error: fit.var_slope.sqrt(),
        prefactor: fit.intercept.exp(),
        points: tau.len(),
    })
}

/// Observed against predicted `max|∂f_i/∂x| = |e_i/c|/τ` for one component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstDerivativeComparison {
    pub component: usize,
    pub prefactor: f64,
    pub median_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `(t, observed/predicted)` for every sample in the window.
    pub ratios: Vec<(f64, f64)>,
}

/// Compares slope maxima with the parameter-free first-derivative law.
pub fn predict_first_derivative(
    t: &[f64],
    max_d1: &[Vec<f64>],
    t_star: f64,
    window: TimeWindow,
    e: &[f64],
    c: f64,
) -> Vec<FirstDerivativeComparison> {
    usable_components(e)
        .into_iter()
        .filter(|&i| i < max_d1.len())
        .filter_map(|i| {
            let prefactor = (e[i] / c).abs();
            let ratios: Vec<(f64, f64)> = t
                .iter()
                .zip(&max_d1[i])
                .filter(|(&s, _)| window.contains(s) && s < t_star)
                .map(|(&s, &d)| (s, d * (t_star - s) / prefactor))
                .collect();
            let values: Vec<f64> = ratios.iter().map(|r| r.1).collect();
            let median_ratio = median(&values)?;
            Some(FirstDerivativeComparison {
                component: i,
                prefactor,
                median_ratio,
                min_ratio: values.iter().copied().fold(f64::INFINITY, f64::min),
                max_ratio: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ratios,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentK {
    pub component: usize,
    pub k: f64,
    pub k_std_error: f64,
    /// Exponent of a free power-law fit, expected near `−5/2`.
    pub free_exponent: f64,
    pub free_exponent_std_error: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFit {
    pub k: f64,
    pub k_std_error: f64,
    pub components: Vec<ComponentK>,
    /// Set when a free exponent deviates from `−5/2` by more than
    /// [`SLOPE_WARNING`].
    pub warning: Option<String>,
}

/// Fits `K` from `max|∂²f_i/∂x²| = |e_i/c²|·(25√15/108)·K^{1/2}·τ^{−5/2}`
/// with the exponent held at `−5/2`, combining components by inverse
/// variance.
pub fn fit_k(
    t: &[f64],
    max_d2: &[Vec<f64>],
    t_star: f64,
    window: TimeWindow,
    e: &[f64],
    c: f64,
) -> Result<KFit, SimilarityError> {
    let usable = usable_components(e);
    if usable.is_empty() {
        return Err(SimilarityError::NoUsableComponent);
    }
    let mut components = Vec::new();
    for &i in usable.iter().filter(|&&i| i < max_d2.len()) {
        let (tau, ys) = window_tau(t, &max_d2[i], t_star, window)?;
        let n = tau.len() as f64;
        let z: Vec<f64> = tau
            .iter()
            .zip(&ys)
            .map(|(s, y)| y.ln() + 2.5 * s.ln())
            .collect();
        let mean = z.iter().sum::<f64>() / n;
        let var_z = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let prefactor = (e[i] / (c * c)).abs() * SECOND_DERIVATIVE_COEFF;
        let k = (mean.exp() / prefactor).powi(2);
        let free = fit_power_law(t, &max_d2[i], t_star, window)?;
        components.push(ComponentK {
            component: i,
            k,
            k_std_error: 2.0 * k * (var_z / n).sqrt(),
            free_exponent: free.exponent,
            free_exponent_std_error: free.exponent_std_error,
            points: tau.len(),
        });
    }
    let values: Vec<f64> = components.iter().map(|c| c.k).collect();
    let vars: Vec<f64> = components.iter().map(|c| c.k_std_error.powi(2)).collect();
    let (k, k_std_error) =
        weighted_mean(&values, &vars).ok_or(SimilarityError::NoUsableComponent)?;
    let bad: Vec<String> = components
        .iter()
        .filter(|c| (c.free_exponent + 2.5).abs() > SLOPE_WARNING)
        .map(|c| format!("component {} exponent {:.3}", c.component, c.free_exponent))
        .collect();
    let warning = (!bad.is_empty()).then(|| {
        format!(
            "poor fit: free curvature exponent deviates from -5/2 by more than {SLOPE_WARNING} ({})",
            bad.join(", ")
        )
    });
    Ok(KFit {
        k,
        k_std_error,
        components,
        warning,
    })
}

/// Everything needed to evaluate the similarity solution of one shock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySolution {
    pub t_star: f64,
    pub x_star: f64,
    pub lambda: f64,
    pub f_star: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
    pub k: f64,
    pub domain_length: f64,
}

impl SimilaritySolution {
    /// `x` shifted by a multiple of `L` to lie closest to the front.
    fn nearest_image(&self, x: f64, tau: f64) -> f64 {
        let centre = self.x_star + self.lambda * tau;
        x + self.domain_length * ((centre - x) / self.domain_length).round()
    }

    pub fn xi(&self, x: f64, t: f64) -> f64 {
        let tau = self.t_star - t;
        let x = self.nearest_image(x, tau);
        (x - self.x_star - self.lambda * tau) / (self.c * tau * tau.sqrt())
    }

    /// `f*_i + τ^{1/2}·F(ξ)·e_i` at `(x, t)`, for `t < t*`.
    pub fn reconstruct(&self, x: f64, t: f64) -> Result<Vec<f64>, SimilarityError> {
        let tau = self.t_star - t;
        if !(tau > 0.0) {
            return Err(SimilarityError::InvalidInput(format!(
                "t = {t} is not before t* = {}",
                self.t_star
            )));
        }
        let f = solve_f(self.xi(x, t), self.k)?;
        Ok(self
            .f_star
            .iter()
            .zip(&self.e)
            .map(|(fs, ei)| fs + tau.sqrt() * f * ei)
            .collect())
    }

    /// Same solution in the gauge `e → μe`, `c → μc`, `K → μ²K`.
    pub fn regauged(&self, mu: f64) -> Self {
        Self {
            e: self.e.iter().map(|v| v * mu).collect(),
            c: self.c * mu,
            k: self.k * mu * mu,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseSample {
    pub xi: f64,
    pub component: usize,
    /// `(f_i − f*_i)/(e_i·τ^{1/2})`.
    pub rescaled: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentCollapse {
    pub component: usize,
    /// RMS of `rescaled − predicted`.
    pub rms: f64,
    /// `rms / max|F|` on the window.
    pub relative_rms: f64,
    /// Best constant offset added to the profile, with its standard error.
    pub offset: f64,
    pub offset_std_error: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseSnapshot {
    pub t: f64,
    pub tau: f64,
    pub num_points: usize,
    pub components: Vec<ComponentCollapse>,
    /// Largest `relative_rms` over components.
    pub error: f64,
    pub samples: Vec<CollapseSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileCollapse {
    pub xi_max: f64,
    /// `max|F|` on `|ξ| ≤ ξ_max`, the scale errors are measured against.
    pub profile_scale: f64,
    pub snapshots: Vec<CollapseSnapshot>,
    /// Largest error over snapshots.
    pub collapse_error: f64,
    pub excluded_components: Vec<usize>,
    pub notes: Vec<String>,
}

impl ProfileCollapse {
    /// Whether the error shrinks as `t → t*`.
    pub fn is_decreasing(&self) -> bool {
        let mut by_tau: Vec<&CollapseSnapshot> = self.snapshots.iter().collect();
        by_tau.sort_by(|a, b| b.tau.total_cmp(&a.tau));
        by_tau.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// Maps snapshot data into similarity variables and measures the distance to
/// the profile `−ξ = F + KF³` on `|ξ| ≤ xi_max`.
pub fn rescale_and_collapse(
    snapshots: &[&GridSnapshot],
    solution: &SimilaritySolution,
    xi_max: f64,
) -> Result<ProfileCollapse, SimilarityError> {
    check_k(solution.k)?;
    let usable = usable_components(&solution.e);
    if usable.is_empty() {
        return Err(SimilarityError::NoUsableComponent);
    }
    let excluded: Vec<usize> = (0..solution.e.len())
        .filter(|i| !usable.contains(i))
        .collect();
    let notes = excluded
        .iter()
        .map(|i| format!("component {i} excluded: e_{i} is below the gauge threshold"))
        .collect();
    let profile_scale = solve_f(-xi_max, solution.k)?;
    let mut out = Vec::new();
    for snap in snapshots {
        let tau = solution.t_star - snap.time;
        if !(tau > 0.0) {
            return Err(SimilarityError::InvalidInput(format!(
                "snapshot at t = {} is not before t*",
                snap.time
            )));
        }
        let sqrt_tau = tau.sqrt();
        let positions = snap.grid.positions();
        let mut samples = Vec::new();
        let mut components = Vec::new();
        for &i in &usable {
            let mut residuals = Vec::new();
            for (m, &x) in positions.iter().enumerate() {
                let xi = solution.xi(x, snap.time);
                if xi.abs() > xi_max {
                    continue;
                }
                let rescaled =
                    (snap.fields[i][m] - solution.f_star[i]) / (solution.e[i] * sqrt_tau);
                let predicted = solve_f(xi, solution.k)?;
                residuals.push(rescaled - predicted);
                samples.push(CollapseSample {
                    xi,
                    component: i,
                    rescaled,
                    predicted,
                });
            }
            if residuals.len() < MIN_SAMPLES {
                return Err(SimilarityError::InsufficientData {
                    needed: MIN_SAMPLES,
                    got: residuals.len(),
                });
            }
            let n = residuals.len() as f64;
            let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
            let offset = residuals.iter().sum::<f64>() / n;
            let spread = residuals.iter().map(|r| (r - offset).powi(2)).sum::<f64>() / (n - 1.0);
            components.push(ComponentCollapse {
                component: i,
                rms,
                relative_rms: rms / profile_scale,
                offset,
                offset_std_error: (spread / n).sqrt(),
                samples: residuals.len(),
            });
        }
        let error = components
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.relative_rms));
        out.push(CollapseSnapshot {
            t: snap.time,
            tau,
            num_points: snap.grid.num_points,
            components,
            error,
            samples,
        });
    }
    let collapse_error = out.iter().fold(0.0_f64, |m, s| m.max(s.error));
    Ok(ProfileCollapse {
        xi_max,
        profile_scale,
        snapshots: out,
        collapse_error,
        excluded_components: excluded,
        notes,
    })
}

/// Quantitative prediction for one shock, in the reporting gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPrediction {
    pub c: f64,
    pub k: f64,
    pub k_std_error: f64,
    pub family: usize,
    pub lambda: f64,
    pub e: Vec<f64>,
    pub e_left: Vec<f64>,
    /// `μ` with `e = μ·e_raw`.
    pub gauge: f64,
    /// `|e_i/c|` for each component.
    pub first_prefactors: Vec<f64>,
    /// `|e_i/c²|·(25√15/108)·K^{1/2}` for each component.
    pub second_prefactors: Vec<f64>,
    pub k_fit: KFit,
}

impl SimilarityPrediction {
    /// Computes `c` at `f*`, then fits `K` on the estimate's window.
    pub fn from_estimate(
        estimate: &SingularityEstimate,
        tensor: &DerivativeTensor,
        t: &[f64],
        max_d2: &[Vec<f64>],
    ) -> Result<Self, SimilarityError> {
        let (e, e_left, gauge) = reporting_gauge(&estimate.e, &estimate.e_left)?;
        let c = compute_c(tensor, &e, &e_left)?;
        let k_fit = fit_k(
            t,
            max_d2,
            estimate.t_star,
            estimate.diagnostics.window,
            &e,
            c,
        )?;
        let k = k_fit.k;
        Ok(Self {
            c,
            k,
            k_std_error: k_fit.k_std_error,
            family: estimate.family,
            lambda: estimate.lambda,
            first_prefactors: e.iter().map(|v| (v / c).abs()).collect(),
            second_prefactors: e
                .iter()
                .map(|v| (v / (c * c)).abs() * SECOND_DERIVATIVE_COEFF * k.sqrt())
                .collect(),
            e,
            e_left,
            gauge,
            k_fit,
        })
    }

    pub fn solution(
        &self,
        estimate: &SingularityEstimate,
        domain_length: f64,
    ) -> SimilaritySolution {
        SimilaritySolution {
            t_star: estimate.t_star,
            x_star: estimate.x_star,
            lambda: estimate.lambda,
            f_star: estimate.f_star.0.clone(),
            e: self.e.clone(),
            c: self.c,
            k: self.k,
            domain_length,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HyperbolicSystem;

    #[test]
    fn coefficient_matches_its_closed_form() {
        let exact = 25.0 * 15f64.sqrt() / 108.0;
        assert!((SECOND_DERIVATIVE_COEFF - exact).abs() < 1e-16);
        assert_eq!(
            profile_derivative_extrema(1.0).unwrap(),
            (1.0, SECOND_DERIVATIVE_COEFF)
        );
        let (_, d2) = profile_derivative_extrema(0.14).unwrap();
        assert!((d2 - 0.33545).abs() < 1e-4);
        assert!(profile_derivative_extrema(0.0).is_err());
    }

    #[test]
    fn shallow_water_prefactor_is_consistent() {
        let exact = 25.0 * 15f64.sqrt() / 243.0;
        assert!((SECOND_DERIVATIVE_COEFF / 2.25 - exact).abs() < 1e-15);
    }

    #[test]
    fn cubic_examples() {
        assert_eq!(solve_f(0.0, 0.3).unwrap(), 0.0);
        assert!((solve_f(-2.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let f = solve_f(-10.0, 0.14).unwrap();
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.14 * mid * mid * mid + mid - 10.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((f - lo).abs() < 1e-14);
        // the large-|ξ| form (−ξ/K)^{1/3} is 13.7% high at ξ = −10 and
        // improves as |ξ| grows
        let gap = |xi: f64| {
            let a = (-xi / 0.14).cbrt();
            (a - solve_f(xi, 0.14).unwrap()) / a
        };
        assert!((gap(-10.0) - 0.1373).abs() < 1e-3);
        assert!(gap(-100.0) < gap(-10.0) && gap(-1e4) < 0.02);
        assert!(matches!(
            solve_f(1.0, -0.1),
            Err(SimilarityError::InvalidK(_))
        ));
    }

    #[test]
    fn curvature_maximum_matches_the_extremum_formula() {
        // brute-force scan of the analytic curvature along the profile
        for k in [0.05, 0.14, 1.0, 7.0] {
            let best = (0..200_000)
                .map(|j| {
                    let xi = -5.0 + 10.0 * j as f64 / 200_000.0;
                    profile_curvature(solve_f(xi, k).unwrap(), k).abs()
                })
                .fold(0.0_f64, f64::max);
            let (_, d2) = profile_derivative_extrema(k).unwrap();
            assert!((best - d2).abs() < 1e-6 * d2, "K={k}: {best} vs {d2}");
        }
    }

    #[test]
    fn c_for_builtin_models() {
        let sw = HyperbolicSystem::shallow_water();
        let (u, eta) = (0.3, 2.0);
        let t = sw.eval_tensor(&[u, eta]).unwrap();
        let c = compute_c(&t, &[1.0, eta.sqrt()], &[eta.sqrt(), 1.0]).unwrap();
        assert!((c - 1.5).abs() < 1e-14);
        let b = HyperbolicSystem::burgers();
        let c = compute_c(&b.eval_tensor(&[0.2]).unwrap(), &[1.0], &[1.0]).unwrap();
        assert_eq!(c, 1.0);
        let adv = HyperbolicSystem::linear_advection(1.0);
        assert!(matches!(
            compute_c(&adv.eval_tensor(&[0.0]).unwrap(), &[1.0], &[1.0]),
            Err(SimilarityError::Degenerate { .. })
        ));
    }

    #[test]
    fn reporting_gauge_sets_the_first_component_to_one() {
        let (e, el, mu) = reporting_gauge(&[0.5, 0.6], &[1.2, 2.0]).unwrap();
        assert_eq!(e, vec![1.0, 1.2]);
        assert_eq!(el, vec![0.6, 1.0]);
        assert_eq!(mu, 2.0);
        let (e, _, _) = reporting_gauge(&[0.0, -3.0], &[0.0, 1.0]).unwrap();
        assert_eq!(e, vec![0.0, 1.0]);
        assert!(reporting_gauge(&[0.0], &[1.0]).is_err());
    }

    fn times() -> Vec<f64> {
        (0..40)
            .map(|k| 0.2 - 1e-2 * 10f64.powf(-k as f64 / 39.0))
            .collect()
    }

    #[test]
    fn synthetic_curvature_series_round_trip_k() {
        let t = times();
        let e = [1.0, 1.1];
        let c = 1.5;
        let series: Vec<Vec<f64>> = e
            .iter()
            .map(|ei| {
                t.iter()
                    .map(|s| {
                        (ei / (c * c)) * SECOND_DERIVATIVE_COEFF * 0.25f64.sqrt()
                            / (0.2 - s).powf(2.5)
                    })
                    .collect()
            })
            .collect();
        let w = TimeWindow {
            start: 0.0,
            end: 1.0,
        };
        let fit = fit_k(&t, &series, 0.2, w, &e, c).unwrap();
        assert!((fit.k - 0.25).abs() < 1e-12);
        assert!(fit.warning.is_none());
        assert!((fit.components[1].free_exponent + 2.5).abs() < 1e-10);
    }

    #[test]
    fn steep_exponent_triggers_a_warning() {
        let t = times();
        let series = vec![t.iter().map(|s| (0.2 - s).powf(-2.8)).collect::<Vec<_>>()];
        let fit = fit_k(
            &t,
            &series,
            0.2,
            TimeWindow {
                start: 0.0,
                end: 1.0,
            },
            &[1.0],
            1.0,
        )
        .unwrap();
        assert!(fit.warning.is_some());
    }

    #[test]
    fn exact_first_derivative_series_has_unit_ratio() {
        let t = times();
        let series = vec![t
            .iter()
            .map(|s| (2.0 / 3.0) / (0.2 - s))
            .collect::<Vec<_>>()];
        let cmp = predict_first_derivative(
            &t,
            &series,
            0.2,
            TimeWindow {
                start: 0.0,
                end: 1.0,
            },
            &[1.0],
            1.5,
        );
        assert_eq!(cmp.len(), 1);
        assert!((cmp[0].median_ratio - 1.0).abs() < 1e-12);
        assert!((cmp[0].max_ratio - cmp[0].min_ratio).abs() < 1e-12);
        let p = fit_power_law(
            &t,
            &series[0],
            0.2,
            TimeWindow {
                start: 0.0,
                end: 1.0,
            },
        )
        .unwrap();
        assert!((p.exponent + 1.0).abs() < 1e-12);
    }

    #[test]
    fn the_solution_is_periodic_in_x() {
        let sol = SimilaritySolution {
            t_star: 0.2,
            x_star: 0.99,
            lambda: -1.0,
            f_star: vec![0.0],
            e: vec![1.0],
            c: 1.0,
            k: 0.3,
            domain_length: 1.0,
        };
        let a = sol.reconstruct(0.995, 0.199).unwrap();
        let b = sol.reconstruct(-0.005, 0.199).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15);
        assert!(sol.reconstruct(0.5, 0.2).is_err());
    }
}
