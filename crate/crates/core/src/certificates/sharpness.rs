//! Test functions showing that `mu^{gamma/(2 gamma + 1)}` cannot be improved
//! in the lower bound for `Q0 - mu`: a fixed bump, modulated to frequency
//! `sqrt(mu)` and dilated by `mu^{1/(4 gamma + 2)}`.

use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::operators::{DampedOperator, OperatorSpec};
use crate::spectral::{make_grid, spectral_tail, AxisKind, Grid, SpectralField};
use crate::Complex64;

/// Largest relative spectral tail accepted for the witness.
pub const TAIL_TOLERANCE: f64 = 1e-7;

/// `exp(1 - 1/(1 - |y|^2))` on the unit ball, zero outside.
pub fn unit_bump(y: &[f64]) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// Dilation exponent `1 / (4 gamma + 2)`.
pub fn dilation_exponent(gamma: f64) -> f64 {
    1.0 / (4.0 * gamma + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSample {
    pub mu: f64,
    pub ratio: f64,
}

/// `||(Q0 - mu) u|| / (mu^{gamma/(2 gamma + 1)} ||u||)` for
/// `u(x) = e^{i sqrt(mu) x_1} w0(x / mu^kappa)`, `w0` the unit bump and
/// `Q0` built with `W = |x|^{2 gamma}`.
pub fn sharpness_witness(mu: f64, gamma: f64, grid: &Grid) -> Result<f64> {
    if !(mu > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter("need mu > 0 and gamma > 0".into()));
    }
    if !grid.all_box() {
        return Err(Error::InvalidGrid("the witness lives on a truncated box".into()));
    }
    let dims = grid.dim();
    let s = mu.powf(dilation_exponent(gamma));
    if let Some(a) = grid.axes().iter().find(|a| s >= 0.5 * a.length) {
        return Err(Error::InvalidGrid(format!(
            "witness support radius {s} escapes a box of length {}",
            a.length
        )));
    }
    let nu = mu.sqrt();
    let mut u = SpectralField::from_fn(grid, |x| {
        let y: Vec<f64> = x.iter().map(|x| x / s).collect();
        Complex64::from_polar(unit_bump(&y), nu * x[0])
    });
    let tail = spectral_tail(&u);
    if tail > TAIL_TOLERANCE {
        return Err(Error::Unresolved(format!("witness at mu = {mu} leaves a spectral tail {tail:e}")));
    }
    let norm = u.norm();
    u.scale(Complex64::new(1.0 / norm, 0.0));
    let damping = DampingProfile::radial_power(gamma, vec![0.0; dims])?;
    let residual = DampedOperator::new(&OperatorSpec::model(damping, mu), grid)?.apply(&u)?.norm();
    Ok(residual / mu.powf(gamma / (2.0 * gamma + 1.0)))
}

/// Box grid holding the witness for `mu`: three support radii wide, with a
/// cutoff past `sqrt(mu)` by a margin scaled to the bump width.
pub fn sharpness_grid(mu: f64, gamma: f64, dims: usize) -> Result<Grid> {
    let s = mu.max(1.0).powf(dilation_exponent(gamma));
    let length = 3.0 * s;
    let k_max = mu.max(0.0).sqrt() + 400.0 / s;
    let modes = crate::resolvent::even_at_least(k_max * length / std::f64::consts::PI);
    make_grid(
        (dims, 0),
        &vec![modes; dims],
        &vec![length; dims],
        &vec![AxisKind::TruncatedBox; dims],
    )
}

/// Witness ratios along `mu_grid` on [`sharpness_grid`] grids.
pub fn sharpness_sweep(mu_grid: &[f64], gamma: f64) -> Result<Vec<SharpnessSample>> {
    use rayon::prelude::*;
    mu_grid
        .par_iter()
        .map(|&mu| {
            let grid = sharpness_grid(mu, gamma, 1)?;
            Ok(SharpnessSample { mu, ratio: sharpness_witness(mu, gamma, &grid)? })
        })
        .collect()
}
