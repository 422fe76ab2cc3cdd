//! Quasilinear systems `∂f/∂t = M(f)·∂f/∂x`.
//!
//! Every model is stored in exactly this sign convention: the right-hand side
//! carries `+M(f)`, so Burgers' equation `u_t + u u_x = 0` has `M(u) = (-u)`.
//! Models are immutable after construction and can be shared across threads.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensystem;
use crate::linalg::{DerivativeTensor, SquareMatrix};

/// Minimum admissible water height for the shallow water model.
pub const SHALLOW_WATER_MIN_HEIGHT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state has {got} components, model `{model}` expects {expected}")]
    DimensionMismatch {
        model: String,
        expected: usize,
        got: usize,
    },
    #[error("component `{field}` is not finite ({value})")]
    NonFinite { field: String, value: f64 },
    #[error("inadmissible state: {field} = {value} violates {constraint}")]
    Inadmissible {
        field: String,
        value: f64,
        constraint: String,
    },
    #[error("invalid model definition: {0}")]
    InvalidDefinition(String),
    #[error("model is not strictly hyperbolic at this state: {0}")]
    NotHyperbolic(String),
}

/// Values of the `N` dependent variables at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Simple box constraint on one component of the state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub const NONE: Bound = Bound {
        lower: None,
        upper: None,
    };

    pub fn at_least(lower: f64) -> Self {
        Self {
            lower: Some(lower),
            upper: None,
        }
    }

    fn violation(&self, value: f64) -> Option<String> {
        if let Some(lo) = self.lower {
            if value < lo {
                return Some(format!(">= {lo:e}"));
            }
        }
        if let Some(hi) = self.upper {
            if value > hi {
                return Some(format!("<= {hi:e}"));
            }
        }
        None
    }
}

/// One monomial term `coeff · Π f_k^{powers[k]}` of the matrix entry
/// `M[row][col]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialTerm {
    pub row: usize,
    pub col: usize,
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
struct Monomial {
    coeff: f64,
    powers: Vec<u32>,
}

impl Monomial {
    fn eval(&self, f: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(f)
            .fold(self.coeff, |acc, (&p, &x)| acc * x.powi(p as i32))
    }

    /// `∂/∂f_k` evaluated at `f`.
    fn eval_partial(&self, f: &[f64], k: usize) -> f64 {
        let p = self.powers[k];
        if p == 0 {
            return 0.0;
        }
        let mut acc = self.coeff * p as f64;
        for (idx, (&q, &x)) in self.powers.iter().zip(f).enumerate() {
            let e = if idx == k { q - 1 } else { q };
            acc *= x.powi(e as i32);
        }
        acc
    }
}

/// Matrix whose entries are polynomials in the state components.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialMatrix {
    n: usize,
    entries: Vec<Vec<Monomial>>,
}

impl PolynomialMatrix {
    pub fn from_terms(n: usize, terms: &[PolynomialTerm]) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::InvalidDefinition(
                "dimension must be >= 1".into(),
            ));
        }
        let mut entries = vec![Vec::new(); n * n];
        for term in terms {
            if term.row >= n || term.col >= n {
                return Err(ModelError::InvalidDefinition(format!(
                    "term at ({}, {}) is outside a {n}x{n} matrix",
                    term.row, term.col
                )));
            }
            if term.powers.len() != n {
                return Err(ModelError::InvalidDefinition(format!(
                    "term at ({}, {}) has {} powers, expected {n}",
                    term.row,
                    term.col,
                    term.powers.len()
                )));
            }
            if !term.coeff.is_finite() {
                return Err(ModelError::InvalidDefinition(format!(
                    "term at ({}, {}) has a non-finite coefficient",
                    term.row, term.col
                )));
            }
            entries[term.row * n + term.col].push(Monomial {
                coeff: term.coeff,
                powers: term.powers.clone(),
            });
        }
        Ok(Self { n, entries })
    }

    /// Constant matrix as a polynomial of degree zero.
    pub fn constant(m: &SquareMatrix) -> Self {
        let n = m.dim();
        let mut entries = vec![Vec::new(); n * n];
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    entries[i * n + j].push(Monomial {
                        coeff: m[(i, j)],
                        powers: vec![0; n],
                    });
                }
            }
        }
        Self { n, entries }
    }

    pub fn terms(&self) -> Vec<PolynomialTerm> {
        let n = self.n;
        let mut out = Vec::new();
        for (idx, monos) in self.entries.iter().enumerate() {
            for m in monos {
                out.push(PolynomialTerm {
                    row: idx / n,
                    col: idx % n,
                    coeff: m.coeff,
                    powers: m.powers.clone(),
                });
            }
        }
        out
    }

    fn eval(&self, f: &[f64]) -> SquareMatrix {
        let n = self.n;
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entries[i * n + j].iter().map(|t| t.eval(f)).sum();
            }
        }
        m
    }

    fn eval_tensor(&self, f: &[f64]) -> DerivativeTensor {
        let n = self.n;
        let mut t = DerivativeTensor::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[(i, j, k)] = self.entries[i * n + j]
                        .iter()
                        .map(|m| m.eval_partial(f, k))
                        .sum();
                }
            }
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
enum SystemKind {
    Burgers,
    ShallowWater,
    Polynomial(PolynomialMatrix),
}

/// A quasilinear hyperbolic system with its admissible region.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicSystem {
    name: String,
    field_names: Vec<String>,
    bounds: Vec<Bound>,
    kind: SystemKind,
}

/// Names and one-line descriptions of the built-in models.
pub const BUILTIN_MODELS: &[(&str, &str)] = &[
    ("burgers", "inviscid Burgers, u_t = -u u_x (N = 1)"),
    (
        "shallow_water",
        "nondimensional shallow water, f = (u, eta), eta >= 1e-8 (N = 2)",
    ),
    (
        "linear_advection",
        "constant-speed advection u_t = -u_x (N = 1, never shocks)",
    ),
];

impl HyperbolicSystem {
    pub fn burgers() -> Self {
        Self {
            name: "burgers".into(),
            field_names: vec!["u".into()],
            bounds: vec![Bound::NONE],
            kind: SystemKind::Burgers,
        }
    }

    pub fn shallow_water() -> Self {
        Self {
            name: "shallow_water".into(),
            field_names: vec!["u".into(), "eta".into()],
            bounds: vec![Bound::NONE, Bound::at_least(SHALLOW_WATER_MIN_HEIGHT)],
            kind: SystemKind::ShallowWater,
        }
    }

    /// `u_t = -speed · u_x`: profiles translate to the right at `speed`.
    pub fn linear_advection(speed: f64) -> Self {
        let m = SquareMatrix::from_rows(&[vec![-speed]]);
        Self::constant("linear_advection", vec!["u".into()], &m)
    }

    pub fn constant(name: &str, field_names: Vec<String>, m: &SquareMatrix) -> Self {
        let n = m.dim();
        Self {
            name: name.into(),
            field_names,
            bounds: vec![Bound::NONE; n],
            kind: SystemKind::Polynomial(PolynomialMatrix::constant(m)),
        }
    }

    pub fn polynomial(
        name: &str,
        field_names: Vec<String>,
        terms: &[PolynomialTerm],
        bounds: Vec<Bound>,
    ) -> Result<Self, ModelError> {
        let n = field_names.len();
        let poly = PolynomialMatrix::from_terms(n, terms)?;
        let bounds = if bounds.is_empty() {
            vec![Bound::NONE; n]
        } else {
            bounds
        };
        if bounds.len() != n {
            return Err(ModelError::InvalidDefinition(format!(
                "{} bounds given for {n} fields",
                bounds.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            field_names,
            bounds,
            kind: SystemKind::Polynomial(poly),
        })
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "burgers" => Some(Self::burgers()),
            "shallow_water" => Some(Self::shallow_water()),
            "linear_advection" => Some(Self::linear_advection(1.0)),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.field_names.len()
    }

    pub fn field_names(&self) -> &[String] {
        &self.field_names
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    /// Checks length, finiteness and the admissible bounds of `f`.
    pub fn check_state(&self, f: &[f64]) -> Result<(), ModelError> {
        if f.len() != self.dimension() {
            return Err(ModelError::DimensionMismatch {
                model: self.name.clone(),
                expected: self.dimension(),
                got: f.len(),
            });
        }
        for ((value, name), bound) in f.iter().zip(&self.field_names).zip(&self.bounds) {
            if !value.is_finite() {
                return Err(ModelError::NonFinite {
                    field: name.clone(),
                    value: *value,
                });
            }
            if let Some(constraint) = bound.violation(*value) {
                return Err(ModelError::Inadmissible {
                    field: name.clone(),
                    value: *value,
                    constraint,
                });
            }
        }
        Ok(())
    }

    pub fn eval_matrix(&self, f: &[f64]) -> Result<SquareMatrix, ModelError> {
        self.check_state(f)?;
        Ok(self.matrix_unchecked(f))
    }

    pub fn eval_tensor(&self, f: &[f64]) -> Result<DerivativeTensor, ModelError> {
        self.check_state(f)?;
        Ok(match &self.kind {
            SystemKind::Burgers => {
                let mut t = DerivativeTensor::zeros(1);
                t[(0, 0, 0)] = -1.0;
                t
            }
            SystemKind::ShallowWater => {
                let mut t = DerivativeTensor::zeros(2);
                t[(0, 0, 0)] = -1.0;
                t[(1, 1, 0)] = -1.0;
                t[(1, 0, 1)] = -1.0;
                t
            }
            SystemKind::Polynomial(p) => p.eval_tensor(f),
        })
    }

    /// `M(f)` without the admissibility check; callers must have checked `f`.
    pub(crate) fn matrix_unchecked(&self, f: &[f64]) -> SquareMatrix {
        match &self.kind {
            SystemKind::Burgers => SquareMatrix::from_rows(&[vec![-f[0]]]),
            SystemKind::ShallowWater => {
                let (u, eta) = (f[0], f[1]);
                SquareMatrix::from_rows(&[vec![-u, -1.0], vec![-eta, -u]])
            }
            SystemKind::Polynomial(p) => p.eval(f),
        }
    }

    /// `M(f)·v` without allocating for the built-in models.
    pub(crate) fn apply_unchecked(&self, f: &[f64], v: &[f64], out: &mut [f64]) {
        match &self.kind {
            SystemKind::Burgers => out[0] = -f[0] * v[0],
            SystemKind::ShallowWater => {
                out[0] = -f[0] * v[0] - v[1];
                out[1] = -f[1] * v[0] - f[0] * v[1];
            }
            SystemKind::Polynomial(p) => {
                let m = p.eval(f);
                out.copy_from_slice(&m.mul_vec(v));
            }
        }
    }

    /// Largest characteristic speed `max |λ|` at `f`, after checking that the
    /// eigenvalues are real and distinct.
    pub fn max_wave_speed(&self, f: &[f64]) -> Result<f64, ModelError> {
        match &self.kind {
            SystemKind::Burgers => Ok(f[0].abs()),
            SystemKind::ShallowWater => Ok(f[0].abs() + f[1].max(0.0).sqrt()),
            SystemKind::Polynomial(p) => {
                let m = p.eval(f);
                if m.dim() == 1 {
                    return Ok(m[(0, 0)].abs());
                }
                let margin = eigensystem::strict_hyperbolicity_margin(&m);
                if margin <= 0.0 {
                    return Err(ModelError::NotHyperbolic(format!(
                        "margin {margin:e} at f = {f:?}"
                    )));
                }
                let values = eigensystem::real_eigenvalues(&m)
                    .map_err(|e| ModelError::NotHyperbolic(e.to_string()))?;
                Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
            }
        }
    }

    /// Max over `(i, j, k)` of `|analytic − central difference| / (1 + |analytic|)`.
    pub fn numeric_tensor_check(&self, f: &[f64], h: f64) -> Result<f64, ModelError> {
        if !(h > 0.0) {
            return Err(ModelError::InvalidDefinition(format!(
                "finite-difference step must be positive, got {h}"
            )));
        }
        let analytic = self.eval_tensor(f)?;
        let n = self.dimension();
        let mut worst = 0.0_f64;
        for k in 0..n {
            let mut plus = f.to_vec();
            let mut minus = f.to_vec();
            plus[k] += h;
            minus[k] -= h;
            let mp = self.eval_matrix(&plus)?;
            let mm = self.eval_matrix(&minus)?;
            for i in 0..n {
                for j in 0..n {
                    let fd = (mp[(i, j)] - mm[(i, j)]) / (2.0 * h);
                    let a = analytic[(i, j, k)];
                    worst = worst.max((a - fd).abs() / (1.0 + a.abs()));
                }
            }
        }
        Ok(worst)
    }

    /// Polynomial terms, if this is a polynomial model.
    pub fn polynomial_terms(&self) -> Option<Vec<PolynomialTerm>> {
        match &self.kind {
            SystemKind::Polynomial(p) => Some(p.terms()),
            _ => None,
        }
    }
}

impl fmt::Display for HyperbolicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name, self.field_names.join(", "))
    }
}
