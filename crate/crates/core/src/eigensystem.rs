//! Real eigenvalues with right and left eigenvectors of small dense matrices.
//!
//! `N = 1, 2` are handled in closed form. For `3 <= N <= 8` the matrix is
//! reduced to Hessenberg form and the eigenvalues are found with the
//! Francis double-shift QR iteration; eigenvectors then come from inverse
//! iteration. Left eigenvectors are the rows of `P⁻¹` where the columns of
//! `P` are the right eigenvectors, so `w⁽ⁱ⁾·e⁽ʲ⁾ = δ_ij` holds by
//! construction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, SquareMatrix};

/// Largest dimension accepted by [`eigen_decompose`].
pub const MAX_DIMENSION: usize = 8;
/// Relative eigenvalue gap below which a matrix is not strictly hyperbolic.
pub const DISTINCT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("dimension {0} exceeds the supported maximum of {MAX_DIMENSION}")]
    TooLarge(usize),
    #[error("matrix is not hyperbolic: complex eigenvalues with |Im| = {max_imag:e}")]
    NotHyperbolic { max_imag: f64 },
    #[error("matrix is not strictly hyperbolic: eigenvalue gap {gap:e} <= {threshold:e}")]
    NotStrictlyHyperbolic { gap: f64, threshold: f64 },
    #[error("QR iteration did not converge")]
    NoConvergence,
    #[error("eigenvector matrix is singular")]
    SingularBasis,
    #[error("family index {family} out of range for dimension {dim}")]
    FamilyOutOfRange { family: usize, dim: usize },
}

/// Eigen-decomposition `M = P Λ P⁻¹` of a strictly hyperbolic matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// `right_vectors[a]` is the column `e⁽ᵃ⁾` of `P`, with its
    /// largest-magnitude component equal to `+1`.
    pub right_vectors: Vec<Vec<f64>>,
    /// `left_vectors[a]` is the row `w⁽ᵃ⁾` of `P⁻¹`.
    pub left_vectors: Vec<Vec<f64>>,
    /// Smallest pairwise eigenvalue distance (`+∞` for `N = 1`).
    pub gap: f64,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check_family(&self, family: usize) -> Result<(), EigenError> {
        if family >= self.dim() {
            return Err(EigenError::FamilyOutOfRange {
                family,
                dim: self.dim(),
            });
        }
        Ok(())
    }

    /// Left eigenvector of `family`, normalised so that `w·e = 1`.
    pub fn left_vector_for(&self, family: usize) -> Result<&[f64], EigenError> {
        self.check_family(family)?;
        Ok(&self.left_vectors[family])
    }

    pub fn right_vector_for(&self, family: usize) -> Result<&[f64], EigenError> {
        self.check_family(family)?;
        Ok(&self.right_vectors[family])
    }

    /// Rescales `e⁽ᵃ⁾ → μ e⁽ᵃ⁾` and `w⁽ᵃ⁾ → w⁽ᵃ⁾/μ`, keeping the pair
    /// biorthogonal.
    pub fn rescale_family(&mut self, family: usize, mu: f64) -> Result<(), EigenError> {
        self.check_family(family)?;
        assert!(
            mu != 0.0 && mu.is_finite(),
            "gauge factor must be finite and non-zero"
        );
        self.right_vectors[family].iter_mut().for_each(|v| *v *= mu);
        self.left_vectors[family].iter_mut().for_each(|v| *v /= mu);
        Ok(())
    }

    /// Matrix `P` with the right eigenvectors as columns.
    pub fn right_matrix(&self) -> SquareMatrix {
        let n = self.dim();
        let mut p = SquareMatrix::zeros(n);
        for (a, e) in self.right_vectors.iter().enumerate() {
            for i in 0..n {
                p[(i, a)] = e[i];
            }
        }
        p
    }

    /// `P⁻¹`, the left eigenvectors as rows.
    pub fn left_matrix(&self) -> SquareMatrix {
        SquareMatrix::from_rows(&self.left_vectors)
    }

    /// `P Λ P⁻¹`.
    pub fn reconstruct(&self) -> SquareMatrix {
        let p = self.right_matrix();
        let lam = SquareMatrix::diagonal(&self.eigenvalues);
        p.matmul(&lam).matmul(&self.left_matrix())
    }
}

/// Eigenvalues as `(re, im)` pairs, complex pairs included, in no particular
/// order.
pub fn eigenvalues(m: &SquareMatrix) -> Result<Vec<(f64, f64)>, EigenError> {
    if !m.is_finite() {
        return Err(EigenError::NonFinite);
    }
    let n = m.dim();
    if n > MAX_DIMENSION {
        return Err(EigenError::TooLarge(n));
    }
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![(m[(0, 0)], 0.0)]),
        2 => {
            let (mean, half_disc) = quadratic_parts(m);
            if half_disc >= 0.0 {
                let s = half_disc.sqrt();
                Ok(vec![(mean - s, 0.0), (mean + s, 0.0)])
            } else {
                let s = (-half_disc).sqrt();
                Ok(vec![(mean, -s), (mean, s)])
            }
        }
        _ => {
            let mut h = to_rows(m);
            hessenberg(&mut h);
            hqr(&mut h)
        }
    }
}

/// Real eigenvalues sorted ascending; complex spectra are an error.
pub fn real_eigenvalues(m: &SquareMatrix) -> Result<Vec<f64>, EigenError> {
    let values = eigenvalues(m)?;
    let scale = 1.0 + m.norm();
    let max_imag = values.iter().fold(0.0_f64, |acc, v| acc.max(v.1.abs()));
    if max_imag > 1e-12 * scale {
        return Err(EigenError::NotHyperbolic { max_imag });
    }
    let mut re: Vec<f64> = values.into_iter().map(|v| v.0).collect();
    re.sort_by(f64::total_cmp);
    Ok(re)
}

/// Minimum pairwise eigenvalue gap over `1 + ‖M‖`; a complex pair gives
/// `-max|Im λ| / (1 + ‖M‖)`. Non-positive values mean failure.
pub fn strict_hyperbolicity_margin(m: &SquareMatrix) -> f64 {
    let scale = 1.0 + m.norm();
    let values = match eigenvalues(m) {
        Ok(v) => v,
        Err(_) => return f64::NEG_INFINITY,
    };
    let max_imag = values.iter().fold(0.0_f64, |acc, v| acc.max(v.1.abs()));
    if max_imag > 0.0 {
        return -max_imag / scale;
    }
    let mut re: Vec<f64> = values.into_iter().map(|v| v.0).collect();
    re.sort_by(f64::total_cmp);
    min_gap(&re) / scale
}

fn min_gap(sorted: &[f64]) -> f64 {
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Full decomposition of a strictly hyperbolic matrix.
pub fn eigen_decompose(m: &SquareMatrix) -> Result<EigenSystem, EigenError> {
    let n = m.dim();
    let values = real_eigenvalues(m)?;
    let gap = min_gap(&values);
    let threshold = DISTINCT_TOLERANCE * m.norm();
    if n > 1 && gap <= threshold {
        return Err(EigenError::NotStrictlyHyperbolic { gap, threshold });
    }
    let mut right_vectors = Vec::with_capacity(n);
    for &lambda in &values {
        let v = match n {
            1 => vec![1.0],
            2 => right_vector_2x2(m, lambda),
            _ => inverse_iteration(m, lambda),
        };
        right_vectors.push(canonical_gauge(v));
    }
    let mut p = SquareMatrix::zeros(n);
    for (a, e) in right_vectors.iter().enumerate() {
        for i in 0..n {
            p[(i, a)] = e[i];
        }
    }
    let p_inv = p.inverse().ok_or(EigenError::SingularBasis)?;
    let left_vectors = (0..n).map(|a| p_inv.row(a).to_vec()).collect();
    Ok(EigenSystem {
        eigenvalues: values,
        right_vectors,
        left_vectors,
        gap,
    })
}

/// Largest-magnitude component set to `+1` (first one on ties).
fn canonical_gauge(mut v: Vec<f64>) -> Vec<f64> {
    let mut idx = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[idx].abs() {
            idx = i;
        }
    }
    let pivot = v[idx];
    v.iter_mut().for_each(|x| *x /= pivot);
    v[idx] = 1.0;
    v
}

/// `((a + d)/2, ((a - d)/2)² + bc)` for a 2×2 matrix.
fn quadratic_parts(m: &SquareMatrix) -> (f64, f64) {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let p = 0.5 * (a - d);
    (0.5 * (a + d), p * p + b * c)
}

fn right_vector_2x2(m: &SquareMatrix, lambda: f64) -> Vec<f64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let (mean, _) = quadratic_parts(m);
    // λ - a and λ - d without cancelling the common mean
    let offset = lambda - mean;
    let p = 0.5 * (a - d);
    let l_minus_a = offset - p;
    let l_minus_d = offset + p;
    let v1 = [b, l_minus_a];
    let v2 = [l_minus_d, c];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    if n1 == 0.0 && n2 == 0.0 {
        // scalar multiple of the identity never reaches here (gap check)
        return vec![1.0, 0.0];
    }
    if n1 >= n2 {
        v1.to_vec()
    } else {
        v2.to_vec()
    }
}

fn inverse_iteration(m: &SquareMatrix, lambda: f64) -> Vec<f64> {
    let n = m.dim();
    let scale = 1.0 + m.norm();
    let mut a = to_rows(m);
    let shift = lambda + 1e-13 * scale;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= shift;
    }
    let lu = Lu::factor(a, f64::EPSILON * scale);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    for _ in 0..4 {
        let mut w = lu.solve(&v);
        let nrm = dot(&w, &w).sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            break;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        v = w;
    }
    v
}

struct Lu {
    a: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    /// Partial pivoting; zero pivots are replaced by `tiny`.
    fn factor(mut a: Vec<Vec<f64>>, tiny: f64) -> Self {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&r, &s| a[r][k].abs().total_cmp(&a[s][k].abs()))
                .unwrap();
            a.swap(k, p);
            perm.swap(k, p);
            if a[k][k].abs() < tiny {
                a[k][k] = if a[k][k] < 0.0 { -tiny } else { tiny };
            }
            for r in k + 1..n {
                let f = a[r][k] / a[k][k];
                a[r][k] = f;
                for j in k + 1..n {
                    a[r][j] -= f * a[k][j];
                }
            }
        }
        Self { a, perm }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.a.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.a[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.a[i][j] * x[j];
            }
            x[i] /= self.a[i][i];
        }
        x
    }
}

fn to_rows(m: &SquareMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

/// Householder reduction to upper Hessenberg form (similarity transform).
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        let alpha = -x[0].signum() * dot(&x, &x).sqrt();
        let mut v = x.clone();
        v[0] -= alpha;
        let vn = dot(&v, &v).sqrt();
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vn);
        // rows: A ← (I - 2vvᵀ) A
        for j in 0..n {
            let s: f64 = (0..v.len()).map(|r| v[r] * a[k + 1 + r][j]).sum();
            for r in 0..v.len() {
                a[k + 1 + r][j] -= 2.0 * v[r] * s;
            }
        }
        // columns: A ← A (I - 2vvᵀ)
        for row in a.iter_mut() {
            let s: f64 = (0..v.len()).map(|c| row[k + 1 + c] * v[c]).sum();
            for c in 0..v.len() {
                row[k + 1 + c] -= 2.0 * s * v[c];
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift
/// QR algorithm with deflation. The matrix is destroyed.
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<(f64, f64)>, EigenError> {
    let n = a.len() as isize;
    let mut wr = vec![0.0; n as usize];
    let mut wi = vec![0.0; n as usize];
    let mut anorm = 0.0;
    for i in 0..n as usize {
        for j in i.saturating_sub(1)..n as usize {
            anorm += a[i][j].abs();
        }
    }
    let at = |a: &[Vec<f64>], i: isize, j: isize| a[i as usize][j as usize];
    let mut nn = n - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
    while nn >= 0 {
        let mut its = 0;
        loop {
            // small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let mut s = at(a, l - 1, l - 1).abs() + at(a, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at(a, l, l - 1).abs() + s == s {
                    a[l as usize][(l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at(a, nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = at(a, nn - 1, nn - 1);
            let mut w = at(a, nn, nn - 1) * at(a, nn - 1, nn);
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                let (i0, i1) = ((nn - 1) as usize, nn as usize);
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[i0] = x + z;
                    wr[i1] = x + z;
                    if z != 0.0 {
                        wr[i1] = x - w / z;
                    }
                    wi[i0] = 0.0;
                    wi[i1] = 0.0;
                } else {
                    wr[i0] = x + p;
                    wr[i1] = x + p;
                    wi[i0] = -z;
                    wi[i1] = z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(EigenError::NoConvergence);
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    a[i][i] -= x;
                }
                let s = at(a, nn, nn - 1).abs() + at(a, nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            let mut z;
            while m >= l {
                z = at(a, m, m);
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / at(a, m + 1, m) + at(a, m, m + 1);
                q = at(a, m + 1, m + 1) - z - r - s0;
                r = at(a, m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at(a, m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at(a, m - 1, m - 1).abs() + z.abs() + at(a, m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i as usize][(i - 2) as usize] = 0.0;
                if i != m + 2 {
                    a[i as usize][(i - 3) as usize] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = at(a, k, k - 1);
                    q = at(a, k + 1, k - 1);
                    r = 0.0;
                    if k != nn - 1 {
                        r = at(a, k + 2, k - 1);
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    let (ku, k1) = (k as usize, (k + 1) as usize);
                    if k == m {
                        if l != m {
                            a[ku][ku - 1] = -a[ku][ku - 1];
                        }
                    } else {
                        a[ku][ku - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in ku..=nn as usize {
                        p = a[ku][j] + q * a[k1][j];
                        if k != nn - 1 {
                            p += r * a[ku + 2][j];
                            a[ku + 2][j] -= p * z;
                        }
                        a[k1][j] -= p * y;
                        a[ku][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l as usize..=mmin as usize {
                        p = x * a[i][ku] + y * a[i][k1];
                        if k != nn - 1 {
                            p += z * a[i][ku + 2];
                            a[i][ku + 2] -= p * r;
                        }
                        a[i][k1] -= p * q;
                        a[i][ku] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}
