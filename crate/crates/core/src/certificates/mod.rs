//! Explicit constructions and scalar identities: quasimodes, sharpness
//! witnesses, the weight `f(lambda, omega)`, the torus-mode reduction and
//! the phase-space diagnostics.

mod phase_space;
mod quasimode;
mod sharpness;

pub use phase_space::{
    big_lambda, classify_region, metric_g, mu_weight, region_memberships, sample_characteristic,
    slow_variation_probe, CharacteristicPoint, MetricAxes, RegionTag, RegionThresholds, SlowVariation, Tangent,
};
pub use quasimode::{
    build_quasimode, concentration_exponent, plateau_cutoff, quasimode_grid, quasimode_ratio,
    quasimode_terms, Quasimode, QuasimodeTerms, PLATEAU_FRACTION,
};
pub use sharpness::{
    dilation_exponent, sharpness_grid, sharpness_sweep, sharpness_witness, unit_bump, SharpnessSample,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::operators::{DampedOperator, OperatorSpec};
use crate::spectral::{partial_modes, torus_volume, SpectralField};

/// `f(lambda, omega) = 1 + (omega / lambda^{1/(gamma+1)})^{2 gamma/(2 gamma+1)}
/// - c0 omega lambda^{-2/(gamma+1)}`.
///
/// Both terms equal `peak = c0^{-2 gamma} lambda^{2 gamma/(gamma+1)}` at the
/// window end, so `f` is evaluated as `1 + peak (t^p - t)` with
/// `t = omega / f_window`; the direct difference loses about
/// `peak * 1e-16` to cancellation, which reaches 1e-11 at large lambda.
pub fn f_eval(lambda: f64, omega: f64, c0: f64, gamma: f64) -> f64 {
    let p = 2.0 * gamma / (2.0 * gamma + 1.0);
    let t = omega / f_window(lambda, c0, gamma);
    let peak = c0.powf(-2.0 * gamma) * lambda.powf(2.0 * gamma / (gamma + 1.0));
    1.0 + peak * (t.powf(p) - t)
}

/// Upper end `c0^{-(2 gamma + 1)} lambda^2` of the range where `f >= 1`.
pub fn f_window(lambda: f64, c0: f64, gamma: f64) -> f64 {
    c0.powf(-(2.0 * gamma + 1.0)) * lambda * lambda
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FPoint {
    pub lambda: f64,
    pub omega: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FScan {
    pub c0: f64,
    pub gamma: f64,
    pub points: Vec<FPoint>,
    pub min_f: f64,
    pub passed: bool,
}

/// Slack allowed below 1, for rounding at the window end where `f = 1`.
pub const F_SLACK: f64 = 1e-12;

/// Evaluates `f` on `omega_points` equally spaced values of
/// `[0, c0^{-(2 gamma+1)} lambda^2]` for each `lambda`.
pub fn f_scan(lambda_grid: &[f64], c0: f64, gamma: f64, omega_points: usize) -> Result<FScan> {
    if !(c0 > 0.0 && gamma > 0.0) || omega_points < 2 || lambda_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidParameter(
            "f scan needs c0, gamma, lambda positive and at least two omega points".into(),
        ));
    }
    let points: Vec<FPoint> = lambda_grid
        .iter()
        .flat_map(|&lambda| {
            let top = f_window(lambda, c0, gamma);
            (0..omega_points).map(move |j| {
                let omega = top * j as f64 / (omega_points - 1) as f64;
                FPoint { lambda, omega, f: f_eval(lambda, omega, c0, gamma) }
            })
        })
        .collect();
    let min_f = points.iter().map(|p| p.f).fold(f64::INFINITY, f64::min);
    Ok(FScan { c0, gamma, points, min_f, passed: min_f >= 1.0 - F_SLACK })
}

/// Relative defect of `||P_lambda u||^2 = |T| sum_k ||P_{lambda, lambda^2 -
/// |k|^2} u_k||^2`, the right side computed slice by slice on the interior
/// grid.
pub fn reduction_identity_residual(u: &SpectralField, lambda: f64, damping: &DampingProfile) -> Result<f64> {
    let grid = u.grid();
    if grid.torus_dims() == 0 || grid.interior_dims() == 0 {
        return Err(Error::InvalidGrid("the reduction needs interior and torus axes".into()));
    }
    if !damping.is_torus_independent(grid.interior_dims()) {
        return Err(Error::UnsupportedDamping("damping depends on the torus variables".into()));
    }
    let lhs = DampedOperator::new(&OperatorSpec::stationary(damping.clone(), lambda), grid)?
        .apply(u)?
        .norm_sqr();
    let interior = grid.interior_grid();
    let slices = partial_modes(u)?;
    let rhs: f64 = slices
        .par_iter()
        .map(|m| {
            let k2: f64 = m.wavevector.iter().map(|k| k * k).sum();
            let spec = OperatorSpec::reduced(damping.clone(), lambda, lambda * lambda - k2);
            Ok(DampedOperator::new(&spec, &interior)?.apply(&m.slice)?.norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        * torus_volume(grid);
    if lhs == 0.0 {
        return Ok(rhs.abs());
    }
    Ok((lhs - rhs).abs() / lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, AxisKind};
    use crate::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn f_examples() {
        assert_eq!(f_eval(7.0, 0.0, 2.0, 1.5), 1.0);
        assert!((f_eval(1.0, 1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        let want = 1.0 + 4f64.powf(2.0 / 3.0) - 4.0;
        assert!((f_eval(1.0, 4.0, 1.0, 1.0) - want).abs() < 1e-15);
        assert!((f_eval(1.0, 4.0, 1.0, 1.0) + 0.480).abs() < 1e-3);
    }

    fn f_direct(lambda: f64, omega: f64, c0: f64, gamma: f64) -> (f64, f64) {
        let scale = lambda.powf(1.0 / (gamma + 1.0));
        let gain = (omega / scale).powf(2.0 * gamma / (2.0 * gamma + 1.0));
        let loss = c0 * omega / (scale * scale);
        (1.0 + gain - loss, 1.0 + gain + loss)
    }

    #[test]
    fn f_is_exactly_one_at_the_window_end() {
        for c0 in [0.5, 1.0, 2.0] {
            for gamma in [0.5, 1.0, 2.0] {
                for lambda in [1.0, 37.0, 1e3] {
                    assert_eq!(f_eval(lambda, f_window(lambda, c0, gamma), c0, gamma), 1.0);
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn f_matches_the_direct_formula(
            lambda in 1.0f64..1e3,
            frac in 0.0f64..3.0,
            c0 in 0.25f64..4.0,
            gamma in 0.25f64..3.0,
        ) {
            let omega = frac * f_window(lambda, c0, gamma);
            let (want, size) = f_direct(lambda, omega, c0, gamma);
            let got = f_eval(lambda, omega, c0, gamma);
            proptest::prop_assert!((got - want).abs() <= 1e-13 * size, "{got} vs {want}");
        }
    }

    #[test]
    fn f_scan_passes_inside_window() {
        let s = f_scan(&[1.0, 10.0, 1000.0], 2.0, 0.5, 50).unwrap();
        assert!(s.passed && s.points.len() == 150);
        assert!(s.min_f >= 1.0 - F_SLACK);
    }

    fn torus2(n: usize) -> crate::spectral::Grid {
        make_grid((1, 1), &[n, n], &[2.0 * PI; 2], &[AxisKind::Periodic; 2]).unwrap()
    }

    #[test]
    fn reduction_holds_for_random_fields() {
        let grid = torus2(32);
        let b = DampingProfile::periodic_power(1.0, vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let modal = (0..grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let u = SpectralField::from_modal(&grid, modal).unwrap();
            let lambda = rng.gen_range(1.0..20.0);
            assert!(reduction_identity_residual(&u, lambda, &b).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn single_mode_reduction_is_exact() {
        let grid = torus2(16);
        let b = DampingProfile::periodic_power(2.0, vec![0.0]).unwrap();
        let u = SpectralField::from_fn(&grid, |x| Complex64::from_polar((x[0].cos() + 2.0).ln(), 3.0 * x[1]));
        assert!(reduction_identity_residual(&u, 5.0, &b).unwrap() <= 1e-13);
    }

    #[test]
    fn torus_dependent_damping_is_rejected() {
        let grid = torus2(16);
        let b = DampingProfile::periodic_power(1.0, vec![0.0, 0.0]).unwrap();
        let u = SpectralField::from_fn(&grid, |x| Complex64::new(x[0].sin(), 0.0));
        assert!(matches!(reduction_identity_residual(&u, 2.0, &b), Err(Error::UnsupportedDamping(_))));
    }
}
