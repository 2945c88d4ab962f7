use serde::{Deserialize, Serialize};

use super::{even_at_least, fit_exponent, resolvent_sweep, ExponentFit, GridPolicy, SweepOptions, SweepResult};
use crate::damping::DampingProfile;
use crate::error::Result;
use crate::operators::OperatorSpec;
use crate::spectral::{make_grid, AxisKind, Grid};

/// Box grids for the model operator `Q0 - mu`. Quasimodes at energy `mu`
/// oscillate at frequency `sqrt(mu)` and live on scale `mu^{1/(4 gamma + 2)}`,
/// so the box grows like `sqrt(mu)^{1/(2 gamma + 1)}` and the mode cutoff
/// like `sqrt(mu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelGridPolicy {
    pub gamma: f64,
    pub dims: usize,
    pub min_box: f64,
    pub box_factor: f64,
    pub wave_factor: f64,
    pub wave_margin: f64,
}

impl ModelGridPolicy {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, dims: 1, min_box: 20.0, box_factor: 8.0, wave_factor: 1.5, wave_margin: 20.0 }
    }
}

impl GridPolicy for ModelGridPolicy {
    fn grid(&self, mu: f64) -> Result<Grid> {
        let nu = mu.abs().max(1.0).sqrt();
        let length = (self.box_factor * nu.powf(1.0 / (2.0 * self.gamma + 1.0))).max(self.min_box);
        let k_max = self.wave_factor * nu + self.wave_margin;
        let modes = even_at_least(k_max * length / std::f64::consts::PI);
        make_grid(
            (self.dims, 0),
            &vec![modes; self.dims],
            &vec![length; self.dims],
            &vec![AxisKind::TruncatedBox; self.dims],
        )
    }

    /// Twice the box and twice the resolution.
    fn refine(&self, grid: &Grid) -> Result<Grid> {
        grid.refined(4, 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub gamma: f64,
    pub sweep: SweepResult,
    /// `min sigma / |mu|` over `mu <= -1`; at least one by accretivity.
    pub negative_ratio: Option<f64>,
    /// `min sigma` over `|mu| < 1`.
    pub middle_min: Option<f64>,
    pub positive_fit: Option<ExponentFit>,
    pub target_exponent: f64,
}

/// Sweeps `sigma_min(Q0 - mu)` and splits the result into the three
/// branches `mu <= -1`, `|mu| < 1`, `mu >= 1`.
pub fn model_branches(
    gamma: f64,
    mu_grid: &[f64],
    fit_window: (f64, f64),
    policy: &ModelGridPolicy,
    options: &SweepOptions,
) -> Result<BranchReport> {
    let damping = DampingProfile::radial_power(gamma, vec![0.0; policy.dims])?;
    let sweep = resolvent_sweep("mu", |mu| OperatorSpec::model(damping.clone(), mu), mu_grid, policy, options)?;
    let resolved = || sweep.samples.iter().filter(|s| s.resolved);
    let negative_ratio = resolved()
        .filter(|s| s.parameter <= -1.0)
        .map(|s| s.sigma_min / s.parameter.abs())
        .reduce(f64::min);
    let middle_min = resolved()
        .filter(|s| s.parameter.abs() < 1.0)
        .map(|s| s.sigma_min)
        .reduce(f64::min);
    let (p, v): (Vec<f64>, Vec<f64>) = resolved()
        .filter(|s| s.parameter >= 1.0)
        .map(|s| (s.parameter, s.sigma_min))
        .unzip();
    let positive_fit = fit_exponent(&p, &v, Some(fit_window)).ok();
    let mut sweep = sweep;
    sweep.fit = positive_fit;
    Ok(BranchReport {
        gamma,
        sweep,
        negative_ratio,
        middle_min,
        positive_fit,
        target_exponent: gamma / (2.0 * gamma + 1.0),
    })
}
