//! Fourier collocation on a uniform periodic grid.
//!
//! Derivatives are taken from the trigonometric interpolant of the grid
//! values. For odd derivative orders the Nyquist mode is zeroed, which makes
//! the first-derivative operator exactly skew-symmetric.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("unsupported derivative order {0} (expected 1 or 2)")]
    Order(u32),
    #[error("grid size must be an even number >= 4, got {0}")]
    GridSize(usize),
}

/// Precomputed real transforms and wavenumbers for one grid.
#[derive(Clone)]
pub struct SpectralOperator {
    n: usize,
    length: f64,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    /// `k_m = 2π m / L` for `m = 0..=N/2`.
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for SpectralOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOperator")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl SpectralOperator {
    pub fn new(n: usize, length: f64) -> Result<Self, SpectralError> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(SpectralError::GridSize(n));
        }
        let mut planner = RealFftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * PI / length;
        let wavenumbers = (0..=n / 2).map(|m| m as f64 * base).collect();
        Ok(Self {
            n,
            length,
            forward,
            inverse,
            wavenumbers,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn domain_length(&self) -> f64 {
        self.length
    }

    fn check(&self, values: &[f64]) -> Result<(), SpectralError> {
        if values.len() != self.n {
            return Err(SpectralError::LengthMismatch {
                expected: self.n,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(())
    }

    fn forward_unchecked(&self, values: &[f64]) -> Vec<Complex64> {
        let mut input = values.to_vec();
        let mut out = self.forward.make_output_vec();
        self.forward
            .process(&mut input, &mut out)
            .expect("buffer sizes match the plan");
        let scale = 1.0 / self.n as f64;
        out.iter_mut().for_each(|c| *c *= scale);
        out
    }

    /// Normalised half spectrum `ĉ_m = (1/N) Σ_j f_j e^{-i k_m x_j}` for
    /// `m = 0..=N/2`.
    pub fn coefficients(&self, values: &[f64]) -> Result<Vec<Complex64>, SpectralError> {
        self.check(values)?;
        Ok(self.forward_unchecked(values))
    }

    fn synthesize(&self, coeffs: &[Complex64], order: u32, out: &mut [f64]) {
        let nyq = self.n / 2;
        let mut buf: Vec<Complex64> = coeffs
            .iter()
            .zip(&self.wavenumbers)
            .map(|(c, &k)| c * Complex64::new(0.0, k).powu(order))
            .collect();
        if order % 2 == 1 {
            buf[nyq] = Complex64::new(0.0, 0.0);
        }
        buf[0].im = 0.0;
        buf[nyq].im = 0.0;
        self.inverse
            .process(&mut buf, out)
            .expect("buffer sizes match the plan");
    }

    /// Derivative of order 1 or 2 of the trigonometric interpolant.
    pub fn derivative(&self, values: &[f64], order: u32) -> Result<Vec<f64>, SpectralError> {
        if !(1..=2).contains(&order) {
            return Err(SpectralError::Order(order));
        }
        let coeffs = self.coefficients(values)?;
        let mut out = vec![0.0; self.n];
        self.synthesize(&coeffs, order, &mut out);
        Ok(out)
    }

    /// First derivative written into `out`; skips validation (hot path).
    pub(crate) fn first_derivative_into(&self, values: &[f64], out: &mut [f64]) {
        let coeffs = self.forward_unchecked(values);
        self.synthesize(&coeffs, 1, out);
    }

    /// Derivatives of orders 1 to 4 and the spectral tail fraction from a
    /// single forward transform.
    pub fn derivative_set(&self, values: &[f64]) -> Result<DerivativeSet, SpectralError> {
        let coeffs = self.coefficients(values)?;
        let mut orders: [Vec<f64>; 4] = Default::default();
        for (p, out) in orders.iter_mut().enumerate() {
            *out = vec![0.0; self.n];
            self.synthesize(&coeffs, p as u32 + 1, out);
        }
        let [d1, d2, d3, d4] = orders;
        Ok(DerivativeSet {
            d1,
            d2,
            d3,
            d4,
            tail: tail_fraction(&coeffs),
        })
    }

    /// Samples of the trigonometric interpolant on the grid with twice as
    /// many points. The interpolant itself is unchanged.
    pub fn refine(&self, values: &[f64]) -> Result<Vec<f64>, SpectralError> {
        let coeffs = self.coefficients(values)?;
        let nyq = self.n / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n + 1];
        buf[..nyq].copy_from_slice(&coeffs[..nyq]);
        // the Nyquist cosine splits evenly between ±N/2 on the finer grid
        buf[nyq] = Complex64::new(0.5 * coeffs[nyq].re, 0.0);
        buf[0].im = 0.0;
        let mut out = vec![0.0; 2 * self.n];
        RealFftPlanner::new()
            .plan_fft_inverse(2 * self.n)
            .process(&mut buf, &mut out)
            .expect("buffer sizes match the plan");
        Ok(out)
    }

    pub fn interpolant(&self, values: &[f64]) -> Result<TrigInterpolant, SpectralError> {
        let coeffs = self.coefficients(values)?;
        Ok(TrigInterpolant::from_coefficients(&coeffs, self.length))
    }
}

/// Convenience wrapper: `order`-th derivative of periodic samples on
/// `[0, length)`.
pub fn spectral_derivative(
    values: &[f64],
    length: f64,
    order: u32,
) -> Result<Vec<f64>, SpectralError> {
    SpectralOperator::new(values.len(), length)?.derivative(values, order)
}

/// Grid derivatives of one field.
#[derive(Clone, Debug)]
pub struct DerivativeSet {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub d4: Vec<f64>,
    /// See [`TrigInterpolant::tail_fraction`].
    pub tail: f64,
}

/// Share of `Σ|ĉ_m|` over `0 < m <= N/2` carried by the top third of the
/// wavenumbers, from a half spectrum.
fn tail_fraction(half: &[Complex64]) -> f64 {
    let nyq = half.len() - 1;
    let cut = 2 * nyq / 3;
    let (mut total, mut tail) = (0.0, 0.0);
    for (m, c) in half.iter().enumerate().skip(1) {
        let a = c.norm();
        total += a;
        if m >= cut {
            tail += a;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Real trigonometric interpolant
/// `f(x) = a_0 + Σ_{m=1}^{N/2-1} 2 Re(ĉ_m e^{i k_m x}) + a_{N/2} cos(k_{N/2} x)`.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    base: f64,
    mean: f64,
    modes: Vec<Complex64>,
    nyquist: f64,
}

impl TrigInterpolant {
    fn from_coefficients(half: &[Complex64], length: f64) -> Self {
        let nyq = half.len() - 1;
        Self {
            base: 2.0 * PI / length,
            mean: half[0].re,
            modes: half[1..nyq].to_vec(),
            nyquist: half[nyq].re,
        }
    }

    /// Value and derivatives of orders `0..=max_order` at `x`. Odd orders
    /// ignore the Nyquist mode, matching the grid operator.
    pub fn eval(&self, x: f64, max_order: usize) -> Vec<f64> {
        let mut out = vec![0.0; max_order + 1];
        out[0] = self.mean;
        let theta = self.base * x;
        let step = Complex64::new(theta.cos(), theta.sin());
        let mut phase = step;
        for (idx, c) in self.modes.iter().enumerate() {
            let m = idx + 1;
            if m % 256 == 0 {
                let th = theta * m as f64;
                phase = Complex64::new(th.cos(), th.sin());
            }
            let k = self.base * m as f64;
            let mut term = c * phase * 2.0;
            out[0] += term.re;
            for o in out.iter_mut().skip(1) {
                term *= Complex64::new(0.0, k);
                *o += term.re;
            }
            phase *= step;
        }
        if self.nyquist != 0.0 {
            let m = (self.modes.len() + 1) as f64;
            let k = self.base * m;
            let c = (k * x).cos();
            // even derivatives of cos(kx) alternate in sign
            for (p, o) in out.iter_mut().enumerate() {
                if p % 2 == 1 {
                    continue;
                }
                let sign = if p % 4 == 0 { 1.0 } else { -1.0 };
                *o += self.nyquist * sign * k.powi(p as i32) * c;
            }
        }
        out
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)[0]
    }

    /// Fraction of spectral amplitude carried by the top third of the
    /// resolved wavenumbers; a cheap under-resolution indicator.
    pub fn tail_fraction(&self) -> f64 {
        let mut half = Vec::with_capacity(self.modes.len() + 2);
        half.push(Complex64::new(self.mean, 0.0));
        half.extend_from_slice(&self.modes);
        half.push(Complex64::new(self.nyquist, 0.0));
        tail_fraction(&half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / n as f64).collect()
    }

    #[test]
    fn sine_first_derivative() {
        let x = grid(256);
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * x).sin()).collect();
        let d = spectral_derivative(&f, 1.0, 1).unwrap();
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - 2.0 * PI * (2.0 * PI * xi).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let f = vec![3.5; 64];
        for order in 1..=2 {
            let d = spectral_derivative(&f, 1.0, order).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn exp_sine_first_derivative() {
        let x = grid(512);
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * x).sin().exp()).collect();
        let d = spectral_derivative(&f, 1.0, 1).unwrap();
        for (xi, di) in x.iter().zip(&d) {
            let s = 2.0 * PI * xi;
            let exact = 2.0 * PI * s.cos() * s.sin().exp();
            assert!((di - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn second_derivative_on_scaled_domain() {
        let n = 128;
        let length = 3.0;
        let k = 2.0 * PI * 2.0 / length;
        let f: Vec<f64> = (0..n)
            .map(|j| (k * j as f64 * length / n as f64).cos())
            .collect();
        let d2 = spectral_derivative(&f, length, 2).unwrap();
        for (fi, di) in f.iter().zip(&d2) {
            assert!((di + k * k * fi).abs() < 1e-9);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            spectral_derivative(&[0.0; 8], 1.0, 3),
            Err(SpectralError::Order(3))
        ));
        let mut f = vec![0.0; 8];
        f[3] = f64::NAN;
        assert_eq!(
            spectral_derivative(&f, 1.0, 1),
            Err(SpectralError::NonFinite(3))
        );
        assert!(SpectralOperator::new(7, 1.0).is_err());
        let op = SpectralOperator::new(8, 1.0).unwrap();
        assert!(op.derivative(&[0.0; 4], 1).is_err());
    }

    #[test]
    fn interpolant_matches_grid_and_off_grid_values() {
        let n = 64;
        let op = SpectralOperator::new(n, 1.0).unwrap();
        let f: Vec<f64> = grid(n)
            .iter()
            .map(|x| (2.0 * PI * x).sin().exp() + 0.3 * (6.0 * PI * x).cos())
            .collect();
        let interp = op.interpolant(&f).unwrap();
        let set = op.derivative_set(&f).unwrap();
        for j in [0, 5, 17, 63] {
            let x = j as f64 / n as f64;
            let v = interp.eval(x, 4);
            assert!((v[0] - f[j]).abs() < 1e-12);
            assert!((v[1] - set.d1[j]).abs() < 1e-10);
            assert!((v[2] - set.d2[j]).abs() < 1e-8);
            assert!((v[3] - set.d3[j]).abs() < 1e-6 * (1.0 + v[3].abs()));
            assert!((v[4] - set.d4[j]).abs() < 1e-6 * (1.0 + v[4].abs()));
        }
        let x = 0.3141;
        let s = 2.0 * PI * x;
        let exact = s.sin().exp() + 0.3 * (3.0 * s).cos();
        assert!((interp.value(x) - exact).abs() < 1e-12);
    }

    #[test]
    fn refinement_preserves_the_interpolant() {
        let n = 32;
        let op = SpectralOperator::new(n, 2.0).unwrap();
        let f: Vec<f64> = (0..n)
            .map(|j| {
                let x = 2.0 * j as f64 / n as f64;
                (PI * x).cos().exp() + 0.1 * (PI * n as f64 / 2.0 * x).cos()
            })
            .collect();
        let fine = op.refine(&f).unwrap();
        assert_eq!(fine.len(), 2 * n);
        let coarse = op.interpolant(&f).unwrap();
        let fine_interp = SpectralOperator::new(2 * n, 2.0)
            .unwrap()
            .interpolant(&fine)
            .unwrap();
        for j in 0..n {
            assert!((fine[2 * j] - f[j]).abs() < 1e-13);
        }
        for x in [0.013, 0.77, 1.5] {
            assert!((coarse.value(x) - fine_interp.value(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn tail_fraction_flags_unresolved_data() {
        let n = 64;
        let op = SpectralOperator::new(n, 1.0).unwrap();
        let smooth: Vec<f64> = grid(n).iter().map(|x| (2.0 * PI * x).sin()).collect();
        let rough: Vec<f64> = (0..n).map(|j| if j < n / 2 { 1.0 } else { -1.0 }).collect();
        let t_smooth = op.derivative_set(&smooth).unwrap().tail;
        assert!(t_smooth < 1e-14);
        assert!(op.derivative_set(&rough).unwrap().tail > 0.05);
        assert_eq!(op.interpolant(&smooth).unwrap().tail_fraction(), t_smooth);
    }

    #[test]
    fn first_derivative_operator_is_skew() {
        let n = 16;
        let op = SpectralOperator::new(n, 1.0).unwrap();
        let mut cols = Vec::new();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cols.push(op.derivative(&e, 1).unwrap());
        }
        for i in 0..n {
            for j in 0..n {
                assert!((cols[j][i] + cols[i][j]).abs() < 1e-12);
            }
        }
    }
}
