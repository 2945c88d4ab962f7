use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{even_at_least, sigma_min, ExponentFit, GridPolicy, SweepOptions, SweepResult, SweepSample};
use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::geometry::GccVerdict;
use crate::linalg::SigmaMinOptions;
use crate::operators::OperatorSpec;
use crate::spectral::{make_grid, AxisKind, Grid};

/// Largest full-space discretization solved with a dense factorization.
pub const DENSE_LIMIT: usize = 4096;

/// Grids on the flat torus `T^{n'} x T^{n''}` for `P_lambda`: interior axes
/// resolve frequencies well past `lambda`, torus axes hold every mode with
/// `|k| <= lambda` plus a margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryGridPolicy {
    pub interior_dims: usize,
    pub torus_dims: usize,
    pub modes_per_lambda: f64,
    pub extra_modes: usize,
    pub torus_margin: usize,
}

impl StationaryGridPolicy {
    pub fn new(interior_dims: usize, torus_dims: usize) -> Self {
        Self { interior_dims, torus_dims, modes_per_lambda: 4.0, extra_modes: 32, torus_margin: 8 }
    }
}

impl GridPolicy for StationaryGridPolicy {
    fn grid(&self, lambda: f64) -> Result<Grid> {
        let inner = even_at_least(self.modes_per_lambda * lambda + self.extra_modes as f64);
        let outer = even_at_least(2.0 * (lambda.ceil() + self.torus_margin as f64) + 2.0);
        let dims = self.interior_dims + self.torus_dims;
        let mut modes = vec![inner; self.interior_dims];
        modes.extend(vec![outer; self.torus_dims]);
        make_grid(
            (self.interior_dims, self.torus_dims),
            &modes,
            &vec![2.0 * PI; dims],
            &vec![AxisKind::Periodic; dims],
        )
    }

    fn refine(&self, grid: &Grid) -> Result<Grid> {
        grid.refined(2, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySigma {
    pub sigma: f64,
    pub iterations: usize,
    /// Torus mode whose slice attains the minimum, when the reduction applies.
    pub torus_mode: Option<Vec<i64>>,
    /// Number of slices actually solved.
    pub slices_solved: usize,
}

/// `sigma_min(P_lambda)` on `grid`. Damping independent of the torus
/// variables makes the discretization block diagonal in the torus modes,
/// with blocks `P_{lambda, lambda^2 - |k|^2}`; slices with `omega < 0` are
/// skipped once the running minimum is below `|omega|`, since
/// `Re <P u, u> >= |omega| ||u||^2` there.
pub fn stationary_sigma_min(
    damping: &DampingProfile,
    lambda: f64,
    grid: &Grid,
    options: &SigmaMinOptions,
) -> Result<StationarySigma> {
    let reducible = grid.torus_dims() > 0
        && grid.interior_dims() > 0
        && damping.is_torus_independent(grid.interior_dims());
    if !reducible {
        if grid.len() > DENSE_LIMIT {
            return Err(Error::InvalidGrid(format!(
                "{} unknowns exceed the dense limit {DENSE_LIMIT} for torus-dependent damping",
                grid.len()
            )));
        }
        let s = sigma_min(&OperatorSpec::stationary(damping.clone(), lambda), grid, options)?;
        return Ok(StationarySigma { sigma: s.sigma, iterations: s.iterations, torus_mode: None, slices_solved: 1 });
    }
    let interior = grid.interior_grid();
    let torus = grid.torus_grid().expect("torus axes present");
    // One representative torus mode per distinct |k|^2.
    let mut shells: Vec<(i64, Vec<i64>)> = Vec::new();
    let mut idx = vec![0; torus.dim()];
    for flat in 0..torus.len() {
        torus.unravel(flat, &mut idx);
        let mode: Vec<i64> = idx.iter().zip(torus.axes()).map(|(&j, a)| a.mode_number(j)).collect();
        let k2: i64 = mode.iter().map(|m| m * m).sum();
        if !shells.iter().any(|(s, _)| *s == k2) {
            shells.push((k2, mode));
        }
    }
    let omega_of = |k2: i64| lambda * lambda - k2 as f64;
    shells.sort_by(|a, b| omega_of(a.0).abs().total_cmp(&omega_of(b.0).abs()));
    let mut best: Option<StationarySigma> = None;
    let mut solved = 0;
    for (k2, mode) in shells {
        let omega = omega_of(k2);
        if let Some(b) = &best {
            if omega < 0.0 && -omega >= b.sigma {
                continue;
            }
        }
        let spec = OperatorSpec::reduced(damping.clone(), lambda, omega);
        let s = sigma_min(&spec, &interior, options)?;
        solved += 1;
        if best.as_ref().is_none_or(|b| s.sigma < b.sigma) {
            best = Some(StationarySigma {
                sigma: s.sigma,
                iterations: s.iterations,
                torus_mode: Some(mode),
                slices_solved: 0,
            });
        }
    }
    let mut best = best.ok_or_else(|| Error::InvalidGrid("no torus modes".into()))?;
    best.slices_solved = solved;
    Ok(best)
}

/// `sigma_min(P_lambda)` along `lambda_grid`, without any geometric check.
pub fn stationary_sweep(
    damping: &DampingProfile,
    lambda_grid: &[f64],
    policy: &dyn GridPolicy,
    options: &SweepOptions,
) -> Result<SweepResult> {
    let samples = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let grid = policy.grid(lambda)?;
            let base = stationary_sigma_min(damping, lambda, &grid, &options.sigma)?;
            let refined = if options.check_resolution {
                stationary_sigma_min(damping, lambda, &policy.refine(&grid)?, &options.sigma)?.sigma
            } else {
                base.sigma
            };
            let mut sample = SweepSample {
                parameter: lambda,
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
    Ok(SweepResult::new("lambda", samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GccResolventReport {
    pub sweep: SweepResult,
    pub fit: ExponentFit,
    pub max_hit_time: f64,
}

/// Resolvent growth for a profile whose geometric control has been
/// certified: `sigma_min(P_lambda)` should grow linearly in `lambda`.
pub fn gcc_resolvent_check(
    damping: &DampingProfile,
    certificate: &GccVerdict,
    lambda_grid: &[f64],
    window: Option<(f64, f64)>,
    policy: &dyn GridPolicy,
    options: &SweepOptions,
) -> Result<GccResolventReport> {
    let max_hit_time = match certificate {
        GccVerdict::Satisfied { max_hit_time } => *max_hit_time,
        GccVerdict::Violated { witnesses } => {
            return Err(Error::NotCertified(format!(
                "{} sampled rays never meet the damped region",
                witnesses.len()
            )))
        }
    };
    let sweep = stationary_sweep(damping, lambda_grid, policy, options)?.with_fit(window)?;
    let fit = sweep.fit.expect("fit recorded");
    Ok(GccResolventReport { sweep, fit, max_hit_time })
}
