//! Second-microlocal bookkeeping near the singular set: the region taxonomy
//! along the characteristic set and the weights of the refined metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn norm_sqr(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    #[serde(rename = "GCC_REGION")]
    GccRegion,
    #[serde(rename = "CORE_2_1")]
    Core21,
    #[serde(rename = "ELLIPTIC_DAMPED_2_2")]
    EllipticDamped22,
    #[serde(rename = "PROPAGATIVE_2_3")]
    Propagative23,
}

impl RegionTag {
    pub const ALL: [RegionTag; 4] =
        [Self::GccRegion, Self::EllipticDamped22, Self::Core21, Self::Propagative23];

    pub fn label(self) -> &'static str {
        match self {
            Self::GccRegion => "GCC_REGION",
            Self::Core21 => "CORE_2_1",
            Self::EllipticDamped22 => "ELLIPTIC_DAMPED_2_2",
            Self::Propagative23 => "PROPAGATIVE_2_3",
        }
    }
}

/// `a << b` means `a < much_less * b`; `a >~ b` means `a >= b / comparable`.
/// `characteristic` bounds `||xi|^2 - lambda^2| / lambda^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionThresholds {
    pub much_less: f64,
    pub comparable: f64,
    pub characteristic: f64,
}

impl Default for RegionThresholds {
    fn default() -> Self {
        Self { much_less: 0.125, comparable: 8.0, characteristic: 0.125 }
    }
}

/// Which of the four defining conditions hold, in the order of
/// [`RegionTag::ALL`]. With reciprocal thresholds exactly one holds.
pub fn region_memberships(
    x_prime: &[f64],
    xi_prime: &[f64],
    xi_second: &[f64],
    lambda: f64,
    gamma: f64,
    t: &RegionThresholds,
) -> [bool; 4] {
    let x2 = norm_sqr(x_prime);
    let p2 = norm_sqr(xi_prime);
    let q2 = norm_sqr(xi_second);
    let scale = lambda.powf(1.0 / (gamma + 1.0));
    let much_less = |a: f64, b: f64| a < t.much_less * b;
    let at_least = |a: f64, b: f64| a >= b / t.comparable;
    let gcc = at_least(p2, q2) || at_least(x2.sqrt(), 1.0);
    let transverse = much_less(p2, q2) && much_less(x2.sqrt(), 1.0);
    let elliptic = transverse && at_least(x2, 1.0 / scale);
    let core = transverse && much_less(p2, scale) && much_less(x2, 1.0 / scale);
    let propagative = transverse && at_least(p2, scale) && much_less(x2, 1.0 / scale);
    [gcc, elliptic, core, propagative]
}

/// Region of `(x', xi', xi'')` on the characteristic set of `P_lambda`,
/// resolved by the priority GCC > elliptic > core > propagative.
pub fn classify_region(
    x_prime: &[f64],
    xi_prime: &[f64],
    xi_second: &[f64],
    lambda: f64,
    gamma: f64,
    thresholds: &RegionThresholds,
) -> Result<RegionTag> {
    if !(lambda > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter("need lambda > 0 and gamma > 0".into()));
    }
    let defect = ((norm_sqr(xi_prime) + norm_sqr(xi_second)) / (lambda * lambda) - 1.0).abs();
    if defect > thresholds.characteristic {
        return Err(Error::OffCharacteristic { defect });
    }
    let m = region_memberships(x_prime, xi_prime, xi_second, lambda, gamma, thresholds);
    Ok(if m[0] {
        RegionTag::GccRegion
    } else if m[1] {
        RegionTag::EllipticDamped22
    } else if m[2] {
        RegionTag::Core21
    } else {
        RegionTag::Propagative23
    })
}

/// `Lambda(xi) = (1 + |xi|^2)^{1/2}`.
pub fn big_lambda(xi_prime: &[f64], xi_second: &[f64]) -> f64 {
    (1.0 + norm_sqr(xi_prime) + norm_sqr(xi_second)).sqrt()
}

/// `mu(xi) = 1 + (|xi'|^2 Lambda^{-1/(gamma+1)})^{(gamma+1)/(2 gamma+1)}`.
pub fn mu_weight(xi_prime: &[f64], xi_second: &[f64], gamma: f64) -> f64 {
    let lam = big_lambda(xi_prime, xi_second);
    let base = norm_sqr(xi_prime) * lam.powf(-1.0 / (gamma + 1.0));
    1.0 + base.powf((gamma + 1.0) / (2.0 * gamma + 1.0))
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let (u, v): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect()
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, n);
        let norm = norm_sqr(&v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicPoint {
    pub x_prime: Vec<f64>,
    pub xi_prime: Vec<f64>,
    pub xi_second: Vec<f64>,
}

/// Random points with `|xi| = lambda` exactly: `|x'|` log-uniform on
/// `[1/lambda, pi]`, `|xi'| / lambda` log-uniform on `[lambda^{-2}, 1]`,
/// directions uniform.
pub fn sample_characteristic(
    count: usize,
    lambda: f64,
    dims: (usize, usize),
    seed: u64,
) -> Result<Vec<CharacteristicPoint>> {
    let (n1, n2) = dims;
    if !(lambda > 1.0 && lambda.is_finite()) || n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("need lambda > 1 and both factors".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x_lo, x_hi) = ((1.0 / lambda).ln(), std::f64::consts::PI.ln());
    let s_lo = -2.0 * lambda.ln();
    Ok((0..count)
        .map(|_| {
            let r = rng.gen_range(x_lo..x_hi).exp();
            let s = rng.gen_range(s_lo..0.0).exp();
            let t = lambda * (1.0 - s * s).max(0.0).sqrt();
            CharacteristicPoint {
                x_prime: random_direction(&mut rng, n1).into_iter().map(|v| r * v).collect(),
                xi_prime: random_direction(&mut rng, n1).into_iter().map(|v| s * lambda * v).collect(),
                xi_second: random_direction(&mut rng, n2).into_iter().map(|v| t * v).collect(),
            }
        })
        .collect())
}

/// Squared axis lengths of the metric in the four blocks `dx'`, `dxi'`,
/// `dx''`, `dxi''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAxes {
    pub x_prime: f64,
    pub xi_prime: f64,
    pub x_second: f64,
    pub xi_second: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl MetricAxes {
    pub fn at(xi_prime: &[f64], xi_second: &[f64], gamma: f64) -> Self {
        let lambda = big_lambda(xi_prime, xi_second);
        let mu = mu_weight(xi_prime, xi_second, gamma);
        let p = 1.0 / (gamma + 1.0);
        Self {
            x_prime: lambda.powf(-p) * mu.powf(p),
            xi_prime: lambda.powf(p) * mu.powf((2.0 * gamma + 1.0) * p),
            x_second: 1.0,
            xi_second: lambda * lambda,
            mu,
            lambda,
        }
    }

    /// Products of conjugate axes: `(mu^2, Lambda^2)` up to rounding.
    pub fn conjugate_products(&self) -> (f64, f64) {
        (self.x_prime * self.xi_prime, self.x_second * self.xi_second)
    }

    fn blocks(&self) -> [f64; 4] {
        [self.x_prime, self.xi_prime, self.x_second, self.xi_second]
    }
}

/// A tangent vector `(z', z'', zeta', zeta'')` of phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub z_prime: Vec<f64>,
    pub z_second: Vec<f64>,
    pub zeta_prime: Vec<f64>,
    pub zeta_second: Vec<f64>,
}

/// `g_{x, xi}(T)`; the metric does not depend on `x`.
pub fn metric_g(xi_prime: &[f64], xi_second: &[f64], tangent: &Tangent, gamma: f64) -> f64 {
    let a = MetricAxes::at(xi_prime, xi_second, gamma);
    norm_sqr(&tangent.z_prime) / a.x_prime
        + norm_sqr(&tangent.zeta_prime) / a.xi_prime
        + norm_sqr(&tangent.z_second) / a.x_second
        + norm_sqr(&tangent.zeta_second) / a.xi_second
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowVariation {
    /// Largest `g_X(T) / g_Y(T)` or its reciprocal over sampled pairs.
    pub constant: f64,
    pub samples: usize,
    pub radius: f64,
}

/// Samples pairs `X, Y` with `g_Y(Y - X) = r^2` and reports the largest
/// distortion between `g_X` and `g_Y`. Both forms are diagonal in the same
/// blocks, so the supremum over tangent vectors is the largest ratio of
/// block weights and is computed exactly rather than by sampling `T`.
pub fn slow_variation_probe(
    gamma: f64,
    sample_count: usize,
    r: f64,
    dims: (usize, usize),
    seed: u64,
) -> Result<SlowVariation> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!("radius must lie in (0, 1], got {r}")));
    }
    let (n1, n2) = dims;
    if n1 == 0 || n2 == 0 || sample_count == 0 {
        return Err(Error::InvalidParameter("need both factors and at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 1.0;
    for _ in 0..sample_count {
        // Y: frequencies over six decades, transverse part anywhere from
        // negligible to comparable.
        let size = 10f64.powf(rng.gen_range(-1.0..5.0));
        let tilt = 10f64.powf(rng.gen_range(-4.0..0.0));
        let mut eta1 = gaussian(&mut rng, n1);
        let mut eta2 = gaussian(&mut rng, n2);
        let s1 = size * tilt / norm_sqr(&eta1).sqrt();
        let s2 = size / norm_sqr(&eta2).sqrt();
        eta1.iter_mut().for_each(|v| *v *= s1);
        eta2.iter_mut().for_each(|v| *v *= s2);
        let ay = MetricAxes::at(&eta1, &eta2, gamma);
        // Only the xi part of Y - X moves the weights.
        let d1 = gaussian(&mut rng, n1);
        let d2 = gaussian(&mut rng, n2);
        let g = norm_sqr(&d1) / ay.xi_prime + norm_sqr(&d2) / ay.xi_second;
        let scale = r / g.sqrt();
        let xi1: Vec<f64> = eta1.iter().zip(&d1).map(|(e, d)| e + scale * d).collect();
        let xi2: Vec<f64> = eta2.iter().zip(&d2).map(|(e, d)| e + scale * d).collect();
        let ax = MetricAxes::at(&xi1, &xi2, gamma);
        for (a, b) in ax.blocks().iter().zip(ay.blocks()) {
            let q = a / b;
            worst = worst.max(q).max(1.0 / q);
        }
    }
    Ok(SlowVariation { constant: worst, samples: sample_count, radius: r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn characteristic_samples_lie_on_the_sphere() {
        let pts = sample_characteristic(500, 50.0, (1, 2), 9).unwrap();
        for p in &pts {
            let n = (norm_sqr(&p.xi_prime) + norm_sqr(&p.xi_second)).sqrt();
            assert!((n / 50.0 - 1.0).abs() < 1e-12);
            assert!(norm_sqr(&p.x_prime).sqrt() <= std::f64::consts::PI * (1.0 + 1e-12));
        }
        assert_eq!(pts, sample_characteristic(500, 50.0, (1, 2), 9).unwrap());
    }

    #[test]
    fn origin_weights() {
        assert_eq!(mu_weight(&[0.0], &[0.0], 1.0), 1.0);
        assert_eq!(big_lambda(&[0.0], &[0.0]), 1.0);
    }

    #[test]
    fn taxonomy_examples() {
        let t = RegionThresholds::default();
        let l: f64 = 100.0;
        assert_eq!(classify_region(&[0.0], &[0.0], &[l], l, 1.0, &t).unwrap(), RegionTag::Core21);
        let s = l / 2f64.sqrt();
        assert_eq!(classify_region(&[0.0], &[s], &[s], l, 1.0, &t).unwrap(), RegionTag::GccRegion);
        let l: f64 = 1e6;
        let x = (4.0 * l.powf(-0.5)).sqrt();
        assert_eq!(
            classify_region(&[x], &[1.0], &[l], l, 1.0, &t).unwrap(),
            RegionTag::EllipticDamped22
        );
        let xi = (2.0 * l.powf(0.5)).sqrt();
        assert_eq!(classify_region(&[0.0], &[xi], &[l], l, 1.0, &t).unwrap(), RegionTag::Propagative23);
        assert!(matches!(
            classify_region(&[0.0], &[0.0], &[0.5 * l], l, 1.0, &t),
            Err(Error::OffCharacteristic { .. })
        ));
    }

    #[test]
    fn identical_points_do_not_distort() {
        let a = MetricAxes::at(&[3.0], &[40.0], 1.0);
        let b = MetricAxes::at(&[3.0], &[40.0], 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn probe_is_finite_and_at_least_one() {
        let p = slow_variation_probe(1.0, 2000, 0.1, (1, 1), 7).unwrap();
        assert!(p.constant.is_finite() && p.constant >= 1.0);
        assert!(slow_variation_probe(1.0, 10, 0.0, (1, 1), 7).is_err());
        assert!(slow_variation_probe(1.0, 10, 1.5, (1, 1), 7).is_err());
    }

    proptest! {
        #[test]
        fn mu_bounds(p in -1e4f64..1e4, q in -1e4f64..1e4, gamma in 0.25f64..4.0) {
            let mu = mu_weight(&[p], &[q], gamma);
            let lam = big_lambda(&[p], &[q]);
            prop_assert!(mu >= 1.0 && mu <= 1.0 + lam * (1.0 + 1e-12) && mu <= 2.0 * lam);
        }

        #[test]
        fn conjugate_products(p in -1e4f64..1e4, q in -1e4f64..1e4, gamma in 0.25f64..4.0) {
            let a = MetricAxes::at(&[p], &[q], gamma);
            let (m, l) = a.conjugate_products();
            prop_assert!((m / (a.mu * a.mu) - 1.0).abs() < 1e-12);
            prop_assert!((l / (a.lambda * a.lambda) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn distortion_is_reciprocal(p in -1e3f64..1e3, q in 1.0f64..1e3, dp in -1.0f64..1.0, dq in -1.0f64..1.0) {
            let a = MetricAxes::at(&[p], &[q], 1.0);
            let b = MetricAxes::at(&[p + dp], &[q + dq], 1.0);
            let t = Tangent { z_prime: vec![0.3], z_second: vec![-0.2], zeta_prime: vec![1.5], zeta_second: vec![0.7] };
            let ab = metric_g(&[p], &[q], &t, 1.0) / metric_g(&[p + dp], &[q + dq], &t, 1.0);
            let ba = metric_g(&[p + dp], &[q + dq], &t, 1.0) / metric_g(&[p], &[q], &t, 1.0);
            prop_assert!(ab * ba >= 1.0 - 1e-12);
            prop_assert!(a.mu >= 1.0 && b.mu >= 1.0);
        }

        #[test]
        fn classification_is_exclusive(x in -0.5f64..0.5, p in -1.0f64..1.0, l in 2.0f64..1e4, gamma in 0.5f64..3.0) {
            let xi1 = p * l * 0.9;
            let xi2 = (l * l - xi1 * xi1).sqrt();
            let t = RegionThresholds::default();
            let m = region_memberships(&[x], &[xi1], &[xi2], l, gamma, &t);
            prop_assert_eq!(m.iter().filter(|b| **b).count(), 1);
            let tag = classify_region(&[x], &[xi1], &[xi2], l, gamma, &t).unwrap();
            let at = RegionTag::ALL.iter().position(|r| *r == tag).unwrap();
            prop_assert!(m[at]);
        }
    }
}
