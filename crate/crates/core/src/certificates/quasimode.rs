//! Concentrating quasimodes `u_k = c k^{alpha n'/2} chi(k^alpha x') e^{i k x''_1}`
//! along the undamped torus directions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::operators::{DampedOperator, OperatorSpec};
use crate::spectral::{fourier_multiplier, make_grid, spectral_tail, AxisKind, DealiasedProduct, Grid, SpectralField};
use crate::Complex64;

/// Radius of the plateau `{chi = 1}` relative to the support radius.
pub const PLATEAU_FRACTION: f64 = 0.3;

/// Largest relative spectral tail accepted for the interior profile.
pub const TAIL_TOLERANCE: f64 = 1e-7;

fn smooth_zero(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// The mollified plateau: 1 for `r <= 0.3 radius`, 0 for `r >= radius`,
/// smooth in between.
pub fn plateau_cutoff(r: f64, radius: f64) -> f64 {
    let t = (r - PLATEAU_FRACTION * radius) / ((1.0 - PLATEAU_FRACTION) * radius);
    let (a, b) = (smooth_zero(1.0 - t), smooth_zero(t));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Concentration exponent `1 / (2 (1 + gamma))`.
pub fn concentration_exponent(gamma: f64) -> f64 {
    1.0 / (2.0 * (1.0 + gamma))
}

#[derive(Debug, Clone)]
pub struct Quasimode {
    pub k: u32,
    pub gamma: f64,
    pub alpha: f64,
    /// Support radius of the unscaled cutoff.
    pub cutoff_radius: f64,
    pub field: SpectralField,
}

impl Quasimode {
    /// Radius of the support in `x'`: `cutoff_radius k^{-alpha}`.
    pub fn support_radius(&self) -> f64 {
        self.cutoff_radius * (self.k as f64).powf(-self.alpha)
    }
}

fn offset(grid: &Grid, axis: usize, x: f64, center: f64) -> f64 {
    let a = &grid.axes()[axis];
    match a.kind {
        AxisKind::Periodic => {
            let d = (x - center).rem_euclid(a.length);
            if d > 0.5 * a.length {
                d - a.length
            } else {
                d
            }
        }
        AxisKind::TruncatedBox => x - center,
    }
}

struct Profile {
    alpha: f64,
    scale: f64,
    /// `chi(k^alpha x')` on the interior grid, unit `L^2` norm.
    slice: SpectralField,
}

fn transverse_profile(k: u32, gamma: f64, damping: &DampingProfile, grid: &Grid) -> Result<Profile> {
    if k == 0 || !(gamma > 0.0) {
        return Err(Error::InvalidParameter("need k >= 1 and gamma > 0".into()));
    }
    let n1 = grid.interior_dims();
    if grid.torus_dims() == 0 || n1 == 0 || damping.center.len() != n1 {
        return Err(Error::InvalidGrid(
            "quasimodes need interior axes matching the damping centre and a torus factor".into(),
        ));
    }
    let torus_axis = &grid.axes()[n1];
    if (k as usize) >= torus_axis.modes / 2 {
        return Err(Error::Unresolved(format!(
            "torus axis with {} modes cannot hold mode {k}",
            torus_axis.modes
        )));
    }
    let alpha = concentration_exponent(gamma);
    let scale = (k as f64).powf(alpha);
    let radius = damping.radius;
    let support = radius / scale;
    for a in &grid.axes()[..n1] {
        if support >= 0.5 * a.length {
            return Err(Error::Unresolved(format!(
                "support radius {support} does not fit an axis of length {}",
                a.length
            )));
        }
    }
    let interior = grid.interior_grid();
    let mut slice = SpectralField::from_fn(&interior, |x| {
        let r2: f64 = (0..n1)
            .map(|a| offset(&interior, a, x[a], damping.center[a]).powi(2))
            .sum();
        Complex64::new(plateau_cutoff(r2.sqrt() * scale, radius), 0.0)
    });
    let tail = spectral_tail(&slice);
    if tail > TAIL_TOLERANCE {
        return Err(Error::Unresolved(format!(
            "cutoff at k = {k} leaves a spectral tail {tail:e} on {} interior modes",
            interior.axes()[0].modes
        )));
    }
    let norm = slice.norm();
    slice.scale(Complex64::new(1.0 / norm, 0.0));
    Ok(Profile { alpha, scale, slice })
}

/// Builds `u_k` around the damping centre, with cutoff radius
/// `damping.radius`, normalized on the grid.
pub fn build_quasimode(k: u32, gamma: f64, damping: &DampingProfile, grid: &Grid) -> Result<Quasimode> {
    let profile = transverse_profile(k, gamma, damping, grid)?;
    let n1 = grid.interior_dims();
    let (kf, scale, radius) = (k as f64, profile.scale, damping.radius);
    let mut field = SpectralField::from_fn(grid, |x| {
        let r2: f64 = (0..n1).map(|a| offset(grid, a, x[a], damping.center[a]).powi(2)).sum();
        Complex64::from_polar(plateau_cutoff(r2.sqrt() * scale, radius), kf * x[n1])
    });
    let norm = field.norm();
    field.scale(Complex64::new(1.0 / norm, 0.0));
    Ok(Quasimode { k, gamma, alpha: profile.alpha, cutoff_radius: radius, field })
}

/// `||P_k u_k||` split into its two orthogonal parts, each divided by
/// `k^{1/(gamma+1)}`: the transverse Laplacian `||Delta' u_k||` and the
/// damping `||k b u_k||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeTerms {
    pub k: u32,
    pub ratio: f64,
    pub laplacian: f64,
    pub damping: f64,
}

impl QuasimodeTerms {
    /// `sqrt(laplacian^2 + (factor damping)^2)`, the ratio expected once
    /// the damping is multiplied by `factor`.
    pub fn envelope(&self, factor: f64) -> f64 {
        self.laplacian.hypot(factor * self.damping)
    }
}

/// Since `u_k` is a single torus mode with `|k|^2 = k^2`, `P_k u_k` reduces to
/// `P_{k, 0}` acting on the transverse profile, computed on the interior grid.
pub fn quasimode_terms(k: u32, gamma: f64, damping: &DampingProfile, grid: &Grid) -> Result<QuasimodeTerms> {
    if !damping.is_torus_independent(grid.interior_dims()) {
        return Err(Error::UnsupportedDamping("quasimode terms need damping independent of the torus".into()));
    }
    let profile = transverse_profile(k, gamma, damping, grid)?;
    let u = &profile.slice;
    let interior = u.grid();
    let kf = k as f64;
    let norm = kf.powf(1.0 / (gamma + 1.0));
    let op = DampedOperator::new(&OperatorSpec::reduced(damping.clone(), kf, 0.0), interior)?;
    let ratio = op.apply(u)?.norm() / norm;
    let laplacian = fourier_multiplier(u, |w| Complex64::new(w.iter().map(|v| v * v).sum(), 0.0)).norm() / norm;
    let product = DealiasedProduct::new(interior, |x| damping.eval(x));
    let damping_term = kf * product.apply(u)?.norm() / norm;
    Ok(QuasimodeTerms { k, ratio, laplacian, damping: damping_term })
}

/// `||P_k u_k|| / k^{1/(gamma+1)}`.
pub fn quasimode_ratio(k: u32, gamma: f64, damping: &DampingProfile, grid: &Grid) -> Result<f64> {
    Ok(quasimode_terms(k, gamma, damping, grid)?.ratio)
}

/// Grid on `T^{n'} x T^{n''}` resolving the quasimode of index `k`: the
/// interior resolution follows the concentration scale `k^{-alpha}`, the
/// first torus axis just holds mode `k`.
pub fn quasimode_grid(k: u32, gamma: f64, interior_dims: usize, torus_dims: usize) -> Result<Grid> {
    let scale = (k as f64).powf(concentration_exponent(gamma));
    let inner = crate::resolvent::even_at_least(512.0 * scale);
    let mut modes = vec![inner; interior_dims];
    modes.push(2 * k as usize + 4);
    modes.extend(vec![2; torus_dims.saturating_sub(1)]);
    let dims = interior_dims + torus_dims;
    make_grid((interior_dims, torus_dims), &modes, &vec![2.0 * PI; dims], &vec![AxisKind::Periodic; dims])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(gamma: f64) -> DampingProfile {
        DampingProfile::periodic_power(gamma, vec![0.0]).unwrap()
    }

    #[test]
    fn cutoff_has_plateau_and_support() {
        assert_eq!(plateau_cutoff(0.0, 1.0), 1.0);
        assert_eq!(plateau_cutoff(0.3, 1.0), 1.0);
        assert_eq!(plateau_cutoff(1.0, 1.0), 0.0);
        let mid = plateau_cutoff(0.65, 1.0);
        assert!((mid - 0.5).abs() < 1e-12);
        assert!(plateau_cutoff(0.5, 1.0) > plateau_cutoff(0.8, 1.0));
    }

    #[test]
    fn quasimode_is_normalized() {
        let grid = quasimode_grid(64, 1.0, 1, 1).unwrap();
        let q = build_quasimode(64, 1.0, &profile(1.0), &grid).unwrap();
        assert!((q.field.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn support_matches_concentration_scale() {
        let grid = quasimode_grid(64, 1.0, 1, 1).unwrap();
        let q = build_quasimode(64, 1.0, &profile(1.0), &grid).unwrap();
        assert!((q.support_radius() - 64f64.powf(-0.25)).abs() < 1e-15);
        assert!((q.support_radius() - 0.354).abs() < 1e-3);
        // measured: largest |x'| where the profile exceeds 1e-12 of its peak
        let interior = grid.interior_grid();
        let axis = &interior.axes()[0];
        let nodal = q.field.to_nodal();
        let torus_len = grid.axes()[1].modes;
        let measured = (0..axis.modes)
            .filter(|&j| nodal[j * torus_len].norm() > 1e-12 * nodal[0].norm())
            .map(|j| {
                let x = axis.node(j);
                x.min(2.0 * PI - x)
            })
            .fold(0.0, f64::max);
        assert!(measured <= q.support_radius() && measured > 0.95 * q.support_radius(), "{measured}");
    }

    #[test]
    fn doubling_k_shrinks_support() {
        let g = |k| quasimode_grid(k, 1.0, 1, 1).unwrap();
        let a = build_quasimode(64, 1.0, &profile(1.0), &g(64)).unwrap();
        let b = build_quasimode(128, 1.0, &profile(1.0), &g(128)).unwrap();
        assert!((b.support_radius() / a.support_radius() - 2f64.powf(-0.25)).abs() < 1e-14);
    }

    #[test]
    fn reduced_terms_match_full_operator() {
        let b = profile(1.0);
        let grid = quasimode_grid(64, 1.0, 1, 1).unwrap();
        let q = build_quasimode(64, 1.0, &b, &grid).unwrap();
        let full = DampedOperator::new(&OperatorSpec::stationary(b.clone(), 64.0), &grid)
            .unwrap()
            .apply(&q.field)
            .unwrap()
            .norm()
            / 8.0;
        let t = quasimode_terms(64, 1.0, &b, &grid).unwrap();
        assert!((full - t.ratio).abs() < 1e-9 * t.ratio);
    }

    #[test]
    fn terms_are_orthogonal() {
        let grid = quasimode_grid(64, 1.0, 1, 1).unwrap();
        let t = quasimode_terms(64, 1.0, &profile(1.0), &grid).unwrap();
        assert!((t.ratio - t.envelope(1.0)).abs() < 1e-8 * t.ratio);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = make_grid((1, 1), &[32, 140], &[2.0 * PI; 2], &[AxisKind::Periodic; 2]).unwrap();
        assert!(matches!(build_quasimode(64, 1.0, &profile(1.0), &grid), Err(Error::Unresolved(_))));
        let grid = make_grid((1, 1), &[512, 64], &[2.0 * PI; 2], &[AxisKind::Periodic; 2]).unwrap();
        assert!(matches!(build_quasimode(64, 1.0, &profile(1.0), &grid), Err(Error::Unresolved(_))));
    }
}
