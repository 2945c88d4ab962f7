use rayon::prelude::*;

use super::{even_at_least, log_space, sigma_min, GridPolicy, SweepOptions, SweepResult, SweepSample};
use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::operators::OperatorSpec;
use crate::spectral::{make_grid, AxisKind, Grid};

/// Circle grids for `P_{lambda, omega}`: the cutoff sits well above the
/// characteristic frequency `sqrt(omega) <= lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleGridPolicy {
    pub modes_per_lambda: f64,
    pub extra_modes: usize,
}

impl Default for CircleGridPolicy {
    fn default() -> Self {
        Self { modes_per_lambda: 4.0, extra_modes: 64 }
    }
}

impl GridPolicy for CircleGridPolicy {
    fn grid(&self, lambda: f64) -> Result<Grid> {
        let modes = even_at_least(self.modes_per_lambda * lambda + self.extra_modes as f64);
        make_grid((1, 0), &[modes], &[2.0 * std::f64::consts::PI], &[AxisKind::Periodic])
    }

    fn refine(&self, grid: &Grid) -> Result<Grid> {
        grid.refined(2, 1.0)
    }
}

/// Deterministic `omega` probes for one value of `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaProbes {
    /// The anchors `0, delta lambda^2 / 2, delta lambda^2, (1 - delta/2)
    /// lambda^2, lambda^2` with `delta = c0^{-(2 gamma + 1)}`, plus 8
    /// log-spaced points between `lambda^{1/(gamma+1)}` and `delta lambda^2`.
    Standard { c0: f64 },
    /// Fixed multiples of `lambda^2`.
    Fractions(Vec<f64>),
}

impl OmegaProbes {
    pub fn delta(c0: f64, gamma: f64) -> f64 {
        c0.powf(-(2.0 * gamma + 1.0))
    }

    pub fn sample(&self, lambda: f64, gamma: f64) -> Vec<f64> {
        let l2 = lambda * lambda;
        let mut out = match self {
            Self::Standard { c0 } => {
                let delta = Self::delta(*c0, gamma);
                let mut v = vec![0.0, 0.5 * delta * l2, delta * l2, (1.0 - 0.5 * delta) * l2, l2];
                let lo = lambda.powf(1.0 / (gamma + 1.0));
                let hi = delta * l2;
                if hi > lo {
                    let interior = log_space(lo, hi, 10);
                    v.extend_from_slice(&interior[1..9]);
                }
                v
            }
            Self::Fractions(f) => f.iter().map(|f| f * l2).collect(),
        };
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Worst case over `omega` of `sigma_min(P_{lambda, omega})` on the circle
/// with damping `b`, for each `lambda`: the probes locate a bracket, which a
/// golden-section search then narrows. Only the minimizer is re-solved on
/// the refined grid.
pub fn reduced_sweep(
    damping: &DampingProfile,
    lambda_grid: &[f64],
    probes: &OmegaProbes,
    policy: &dyn GridPolicy,
    options: &SweepOptions,
) -> Result<SweepResult> {
    if !damping.is_torus_independent(1) {
        return Err(Error::UnsupportedDamping(
            "the reduced sweep needs damping on the interior factor".into(),
        ));
    }
    let gamma = damping.gamma;
    let samples = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let grid = policy.grid(lambda)?;
            let solve = |omega: f64| {
                let spec = OperatorSpec::reduced(damping.clone(), lambda, omega);
                sigma_min(&spec, &grid, &options.sigma).map(|s| (s.sigma, omega, s.iterations))
            };
            let omegas = probes.sample(lambda, gamma);
            let values = omegas.iter().map(|&w| solve(w)).collect::<Result<Vec<_>>>()?;
            let at = (0..values.len())
                .min_by(|&a, &b| values[a].0.total_cmp(&values[b].0))
                .ok_or_else(|| Error::InvalidParameter("no omega probes for this lambda".into()))?;
            let mut best = values[at];
            if omegas.len() > 1 {
                let lo = omegas[at.saturating_sub(1)];
                let hi = omegas[(at + 1).min(omegas.len() - 1)];
                let polished = golden_section(solve, lo, hi, 1e-4 * lambda)?;
                if polished.0 < best.0 {
                    best = polished;
                }
            }
            let (sigma, omega, iterations) = best;
            let refined = if options.check_resolution {
                let spec = OperatorSpec::reduced(damping.clone(), lambda, omega);
                sigma_min(&spec, &policy.refine(&grid)?, &options.sigma)?.sigma
            } else {
                sigma
            };
            let mut sample = SweepSample {
                parameter: lambda,
                sigma_min: sigma,
                iterations,
                resolved: true,
                refined_sigma: refined,
                argmin: Some(omega),
            };
            sample.resolved = sample.relative_change() < options.stability;
            Ok(sample)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new("lambda", samples))
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping when
/// the bracket is shorter than `width`.
fn golden_section(
    f: impl Fn(f64) -> Result<(f64, f64, usize)>,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> Result<(f64, f64, usize)> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = f(hi - ratio * (hi - lo))?;
    let mut b = f(lo + ratio * (hi - lo))?;
    while hi - lo > width {
        if a.0 < b.0 {
            hi = b.1;
            b = a;
            a = f(hi - ratio * (hi - lo))?;
        } else {
            lo = a.1;
            a = b;
            b = f(lo + ratio * (hi - lo))?;
        }
    }
    Ok(if a.0 < b.0 { a } else { b })
}
