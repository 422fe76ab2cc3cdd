//! Synthetic derivative-maximum series that follow the blowup laws exactly,
//! optionally with multiplicative noise, for checking the fitters.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use shockform_core::similarity::{fit_k, SimilarityError, SECOND_DERIVATIVE_COEFF};
use shockform_core::singularity::{fit_t_star, SingularityError, TStarModel, TimeWindow};
use thiserror::Error;

use crate::csv::CsvTable;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Singularity(#[from] SingularityError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub t_star: f64,
    pub c: f64,
    pub k: f64,
    pub e: Vec<f64>,
    pub samples: usize,
    /// Sampled `t* − t` runs log-uniformly from `tau_max` down to `tau_min`.
    pub tau_max: f64,
    pub tau_min: f64,
    /// Relative standard deviation of the multiplicative noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            t_star: 0.2,
            c: 1.5,
            k: 0.14,
            e: vec![1.0, 1.1],
            samples: 200,
            tau_max: 0.05,
            tau_min: 5e-4,
            noise: 0.0,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSeries {
    pub t: Vec<f64>,
    pub max_d1: Vec<Vec<f64>>,
    pub max_d2: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SynthRecovery {
    pub t_star: f64,
    pub t_star_error: f64,
    pub k: f64,
    pub k_error: f64,
}

impl SynthSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.into()));
        if !(self.tau_min > 0.0 && self.tau_max > self.tau_min) {
            return bad("need 0 < tau_min < tau_max");
        }
        if self.samples < 8 {
            return bad("need at least 8 samples");
        }
        if !(self.c.is_finite() && self.c != 0.0) || !(self.k > 0.0) {
            return bad("need c ≠ 0 and K > 0");
        }
        if self.e.is_empty() || self.e.iter().all(|v| *v == 0.0) {
            return bad("e must have a nonzero component");
        }
        if !(self.noise >= 0.0) || !self.t_star.is_finite() {
            return bad("noise must be non-negative and t* finite");
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthSeries, SynthError> {
        self.validate()?;
        let mut rng = StdRng::seed_from_u64(self.seed);
        let n = self.samples;
        let ratio = (self.tau_min / self.tau_max).ln();
        let taus: Vec<f64> = (0..n)
            .map(|j| self.tau_max * (ratio * j as f64 / (n - 1) as f64).exp())
            .collect();
        let t: Vec<f64> = taus.iter().map(|tau| self.t_star - tau).collect();
        let mut noisy = |v: f64| {
            if self.noise == 0.0 {
                v
            } else {
                // Box-Muller keeps the dependency list to `rand`.
                let (a, b): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
                let z = (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos();
                v * (1.0 + self.noise * z)
            }
        };
        let mut max_d1 = Vec::new();
        let mut max_d2 = Vec::new();
        for &ei in &self.e {
            let a1 = (ei / self.c).abs();
            let a2 = (ei / (self.c * self.c)).abs() * SECOND_DERIVATIVE_COEFF * self.k.sqrt();
            max_d1.push(taus.iter().map(|tau| noisy(a1 / tau)).collect());
            max_d2.push(taus.iter().map(|tau| noisy(a2 / tau.powf(2.5))).collect());
        }
        Ok(SynthSeries { t, max_d1, max_d2 })
    }

    /// Generates the series and fits `t*` and `K` back from it.
    pub fn round_trip(&self) -> Result<(SynthSeries, SynthRecovery), SynthError> {
        let series = self.generate()?;
        let recovery = self.recover(&series)?;
        Ok((series, recovery))
    }

    /// Fits `t*` and `K` to `series` and compares them with the true values.
    pub fn recover(&self, series: &SynthSeries) -> Result<SynthRecovery, SynthError> {
        let window = TimeWindow {
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
        };
        let t_fit = fit_t_star(&series.t, &series.max_d1, window, TStarModel::Line)?;
        let k_fit = fit_k(
            &series.t,
            &series.max_d2,
            t_fit.t_star,
            window,
            &self.e,
            self.c,
        )?;
        Ok(SynthRecovery {
            t_star: t_fit.t_star,
            t_star_error: t_fit.t_star - self.t_star,
            k: k_fit.k,
            k_error: k_fit.k - self.k,
        })
    }
}

impl SynthSeries {
    pub fn to_csv(&self) -> CsvTable {
        let n = self.max_d1.len();
        let header = std::iter::once("t".to_string())
            .chain((0..n).map(|i| format!("max_d1_{i}")))
            .chain((0..n).map(|i| format!("max_d2_{i}")));
        let mut table = CsvTable::new(header);
        for k in 0..self.t.len() {
            let row = std::iter::once(self.t[k])
                .chain(self.max_d1.iter().map(|s| s[k]))
                .chain(self.max_d2.iter().map(|s| s[k]))
                .map(Into::into)
                .collect();
            table.push(row);
        }
        table
    }
}
