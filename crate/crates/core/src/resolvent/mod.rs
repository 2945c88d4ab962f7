//! Smallest singular values of the damped operators and their power-law
//! growth along parameter sweeps.

mod model;
mod reduced;
mod stationary;

pub use model::{model_branches, BranchReport, ModelGridPolicy};
pub use reduced::{reduced_sweep, CircleGridPolicy, OmegaProbes};
pub use stationary::{
    gcc_resolvent_check, stationary_sigma_min, stationary_sweep, GccResolventReport,
    StationaryGridPolicy, StationarySigma,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sigma_min as factored_sigma_min, SigmaMin, SigmaMinOptions};
use crate::operators::{DampedOperator, OperatorSpec};
use crate::spectral::Grid;

/// `sigma_min` of the operator discretized on `grid`.
pub fn sigma_min(spec: &OperatorSpec, grid: &Grid, options: &SigmaMinOptions) -> Result<SigmaMin> {
    if !(options.tolerance > 0.0 && options.tolerance <= 1e-2) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must lie in (0, 1e-2], got {}",
            options.tolerance
        )));
    }
    let op = DampedOperator::new(spec, grid)?;
    factored_sigma_min(&op.factor()?, options)
}

/// Chooses a grid for each sweep parameter and a refinement used to test
/// whether the value is resolved.
pub trait GridPolicy: Sync {
    fn grid(&self, parameter: f64) -> Result<Grid>;
    fn refine(&self, grid: &Grid) -> Result<Grid>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub sigma: SigmaMinOptions,
    /// Largest relative change under refinement for a resolved sample.
    pub stability: f64,
    pub check_resolution: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            sigma: SigmaMinOptions::default(),
            stability: 0.01,
            check_resolution: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub parameter: f64,
    pub sigma_min: f64,
    pub iterations: usize,
    pub resolved: bool,
    /// Value on the refined grid (equal to `sigma_min` when unchecked).
    pub refined_sigma: f64,
    /// Secondary parameter attaining the value, e.g. the worst `omega`.
    pub argmin: Option<f64>,
}

impl SweepSample {
    pub fn relative_change(&self) -> f64 {
        (self.sigma_min - self.refined_sigma).abs() / self.refined_sigma.abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter_name: String,
    /// Sorted by parameter.
    pub samples: Vec<SweepSample>,
    pub fit: Option<ExponentFit>,
}

impl SweepResult {
    pub fn new(parameter_name: &str, mut samples: Vec<SweepSample>) -> Self {
        samples.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
        Self { parameter_name: parameter_name.to_string(), samples, fit: None }
    }

    /// Fits the resolved samples in `window` and records the fit.
    pub fn with_fit(mut self, window: Option<(f64, f64)>) -> Result<Self> {
        self.fit = Some(self.fit(window)?);
        Ok(self)
    }

    pub fn all_resolved(&self) -> bool {
        self.samples.iter().all(|s| s.resolved)
    }

    pub fn unresolved(&self) -> Vec<f64> {
        self.samples.iter().filter(|s| !s.resolved).map(|s| s.parameter).collect()
    }

    /// Power-law fit over resolved samples only.
    pub fn fit(&self, window: Option<(f64, f64)>) -> Result<ExponentFit> {
        let (p, v): (Vec<f64>, Vec<f64>) = self
            .samples
            .iter()
            .filter(|s| s.resolved)
            .map(|s| (s.parameter, s.sigma_min))
            .unzip();
        fit_exponent(&p, &v, window)
    }
}

/// Sweeps `sigma_min` of `spec_for(parameter)` over `parameters`.
pub fn resolvent_sweep(
    parameter_name: &str,
    spec_for: impl Fn(f64) -> OperatorSpec + Sync,
    parameters: &[f64],
    policy: &dyn GridPolicy,
    options: &SweepOptions,
) -> Result<SweepResult> {
    let samples = parameters
        .par_iter()
        .map(|&parameter| {
            let spec = spec_for(parameter);
            let grid = policy.grid(parameter)?;
            let base = sigma_min(&spec, &grid, &options.sigma)?;
            let refined = if options.check_resolution {
                sigma_min(&spec, &policy.refine(&grid)?, &options.sigma)?.sigma
            } else {
                base.sigma
            };
            let mut sample = SweepSample {
                parameter,
                sigma_min: base.sigma,
                iterations: base.iterations,
                resolved: true,
                refined_sigma: refined,
                argmin: None,
            };
            sample.resolved = sample.relative_change() < options.stability;
            Ok(sample)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new(parameter_name, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual of the log-log regression.
    pub residual: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

pub const MIN_FIT_SAMPLES: usize = 5;

/// Least-squares slope of `log values` against `log parameters`. Without an
/// explicit window the smallest decade of parameters is left out.
pub fn fit_exponent(
    parameters: &[f64],
    values: &[f64],
    window: Option<(f64, f64)>,
) -> Result<ExponentFit> {
    if parameters.len() != values.len() {
        return Err(Error::LengthMismatch { expected: parameters.len(), got: values.len() });
    }
    let window = match window {
        Some(w) => w,
        None => {
            let lo = parameters.iter().copied().filter(|p| *p > 0.0).fold(f64::INFINITY, f64::min);
            let hi = parameters.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo * 10.0, hi)
        }
    };
    let tol = 1e-12 * window.1.abs().max(1.0);
    let points: Vec<(f64, f64)> = parameters
        .iter()
        .zip(values)
        .filter(|(p, v)| **p > 0.0 && **v > 0.0 && **p >= window.0 - tol && **p <= window.1 + tol)
        .map(|(p, v)| (p.ln(), v.ln()))
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples { got: points.len(), needed: MIN_FIT_SAMPLES });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("fit window holds a single parameter value".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentFit { slope, intercept, residual, samples: points.len(), window })
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Smallest even integer at least `max(x, 2)`.
pub fn even_at_least(x: f64) -> usize {
    let n = x.ceil().max(2.0) as usize;
    n + n % 2
}
