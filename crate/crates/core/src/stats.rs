//! Least-squares helpers shared by the fitters.

use serde::{Deserialize, Serialize};

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Residual variance `RSS / (n − 2)` (zero for `n = 2`).
    pub residual_variance: f64,
    pub var_intercept: f64,
    pub var_slope: f64,
    pub cov: f64,
    pub n: usize,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Root-mean-square residual.
    pub fn rms(&self) -> f64 {
        let dof = self.n.saturating_sub(2).max(1) as f64;
        (self.residual_variance * dof / self.n as f64).sqrt()
    }
}

/// Fits a line through `(x, y)`; `None` for fewer than two points or a
/// degenerate abscissa.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    if sxx == 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - intercept - slope * x[i];
            r * r
        })
        .sum();
    let residual_variance = if n > 2 { rss / (nf - 2.0) } else { 0.0 };
    let var_slope = residual_variance / sxx;
    let var_intercept = residual_variance * (1.0 / nf + mx * mx / sxx);
    let cov = -mx * residual_variance / sxx;
    Some(LineFit {
        intercept,
        slope,
        residual_variance,
        var_intercept,
        var_slope,
        cov,
        n,
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Inverse-variance weighted mean and its standard error. Estimates with
/// zero variance dominate: if any exist, their plain mean is returned with
/// zero uncertainty.
pub fn weighted_mean(values: &[f64], variances: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let exact: Vec<f64> = values
        .iter()
        .zip(variances)
        .filter(|(_, &v)| v <= 0.0)
        .map(|(&x, _)| x)
        .collect();
    if !exact.is_empty() {
        return Some((exact.iter().sum::<f64>() / exact.len() as f64, 0.0));
    }
    let (mut sw, mut swx) = (0.0, 0.0);
    for (&x, &v) in values.iter().zip(variances) {
        sw += 1.0 / v;
        swx += x / v;
    }
    Some((swx / sw, (1.0 / sw).sqrt()))
}

/// Linear least-squares solution of `A c ≈ y`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstsqFit {
    pub coeffs: Vec<f64>,
    /// `(AᵀA)⁻¹`; multiply by `residual_variance` for the covariance.
    pub unscaled_covariance: Vec<Vec<f64>>,
    pub rss: f64,
    /// `RSS / (n − p)`, zero when `n = p`.
    pub residual_variance: f64,
}

/// Solves the least-squares problem with Householder QR. `rows[k]` is row
/// `k` of `A`. Returns `None` for fewer rows than columns or a rank-deficient
/// `A`.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<LstsqFit> {
    let n = rows.len();
    let p = rows.first()?.len();
    if n < p || y.len() != n || p == 0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut b = y.to_vec();
    let mut diag = vec![0.0; p];
    for j in 0..p {
        let alpha: f64 = (j..n).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        let col_scale = (0..n).map(|i| rows[i][j].abs()).fold(0.0_f64, f64::max);
        if alpha <= 1e-13 * col_scale || alpha == 0.0 {
            return None;
        }
        let d = if a[j][j] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = (j..n).map(|i| a[i][j]).collect();
        v[0] -= d;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for col in j..p {
            let s: f64 = (j..n).map(|i| v[i - j] * a[i][col]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..n {
                a[i][col] -= s * v[i - j];
            }
        }
        let s: f64 = (j..n).map(|i| v[i - j] * b[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in j..n {
            b[i] -= s * v[i - j];
        }
        diag[j] = d;
    }
    // R is upper triangular in a[0..p][0..p], with diagonal d
    let mut coeffs = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = (j + 1..p).map(|k| a[j][k] * coeffs[k]).sum();
        coeffs[j] = (b[j] - s) / diag[j];
    }
    // R⁻¹ by back substitution, then (AᵀA)⁻¹ = R⁻¹ R⁻ᵀ
    let mut rinv = vec![vec![0.0; p]; p];
    for col in 0..p {
        for j in (0..=col).rev() {
            let rhs = if j == col { 1.0 } else { 0.0 };
            let s: f64 = (j + 1..=col).map(|k| a[j][k] * rinv[k][col]).sum();
            rinv[j][col] = (rhs - s) / diag[j];
        }
    }
    let unscaled_covariance = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| (0..p).map(|k| rinv[i][k] * rinv[j][k]).sum())
                .collect()
        })
        .collect();
    let rss: f64 = rows
        .iter()
        .zip(y)
        .map(|(r, &yi)| {
            let fit: f64 = r.iter().zip(&coeffs).map(|(a, c)| a * c).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let residual_variance = if n > p { rss / (n - p) as f64 } else { 0.0 };
    Some(LstsqFit {
        coeffs,
        unscaled_covariance,
        rss,
        residual_variance,
    })
}
