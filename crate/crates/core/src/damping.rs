//! Damping coefficients `b >= 0`, their local homogeneity constants and the
//! globally homogeneous extension used by the model operator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bands of constant damping on 2pi-periodic axes: `level` on the union of
/// `|x_a - center| < half_width` over the listed axes, `floor` elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripBands {
    pub axes: Vec<usize>,
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
}

type DampingFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// User supplied coefficient. `torus_independent` declares that the
/// coefficient ignores every coordinate past `interior_dims`.
#[derive(Clone)]
pub struct CustomDamping {
    pub function: Arc<DampingFn>,
    pub interior_dims: usize,
    pub torus_independent: bool,
    pub feature_size: f64,
}

impl fmt::Debug for CustomDamping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDamping")
            .field("interior_dims", &self.interior_dims)
            .field("torus_independent", &self.torus_independent)
            .field("feature_size", &self.feature_size)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum DampingKind {
    /// `(sum_i (2 sin((x_i - y_i)/2))^2)^gamma`: smooth on the torus and
    /// comparable to `|x - y|^{2 gamma}` near the centre.
    PeriodicPower,
    /// `|x - y|^{2 gamma}` on the interior coordinates.
    RadialPower,
    /// Product of periodic powers vanishing at several centres.
    MultiCenter(Vec<(Vec<f64>, f64)>),
    Strip(StripBands),
    /// `b` equal to the floor everywhere.
    Constant,
    Custom(CustomDamping),
}

#[derive(Debug, Clone)]
pub struct DampingProfile {
    pub kind: DampingKind,
    pub gamma: f64,
    pub center: Vec<f64>,
    /// Radius of the ball where the local power bounds are asserted.
    pub radius: f64,
    /// Constant added everywhere.
    pub floor: f64,
}

fn periodic_chord_sqr(x: &[f64], center: &[f64]) -> f64 {
    center
        .iter()
        .zip(x)
        .map(|(c, x)| {
            let s = 2.0 * (0.5 * (x - c)).sin();
            s * s
        })
        .sum()
}

fn wrapped_distance(x: f64, c: f64) -> f64 {
    let d = (x - c).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

impl DampingProfile {
    pub fn periodic_power(gamma: f64, center: Vec<f64>) -> Result<Self> {
        Self::power(DampingKind::PeriodicPower, gamma, center)
    }

    pub fn radial_power(gamma: f64, center: Vec<f64>) -> Result<Self> {
        Self::power(DampingKind::RadialPower, gamma, center)
    }

    fn power(kind: DampingKind, gamma: f64, center: Vec<f64>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power gamma must be positive, got {gamma}"
            )));
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter(
                "power damping needs at least one interior coordinate".into(),
            ));
        }
        Ok(Self {
            kind,
            gamma,
            center,
            radius: 1.0,
            floor: 0.0,
        })
    }

    pub fn multi_center(centers: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let Some((first, _)) = centers.first() else {
            return Err(Error::InvalidParameter("no centres given".into()));
        };
        let dims = first.len();
        if centers
            .iter()
            .any(|(c, g)| c.len() != dims || !(g.is_finite() && *g > 0.0))
        {
            return Err(Error::InvalidParameter(
                "centres must share a dimension and have positive powers".into(),
            ));
        }
        let gamma = centers.iter().map(|(_, g)| *g).fold(0.0, f64::max);
        let center = first.clone();
        Ok(Self {
            kind: DampingKind::MultiCenter(centers),
            gamma,
            center,
            radius: 1.0,
            floor: 0.0,
        })
    }

    pub fn strip(bands: StripBands, floor: f64) -> Result<Self> {
        if !(bands.half_width > 0.0 && bands.level >= 0.0 && floor >= 0.0) || bands.axes.is_empty()
        {
            return Err(Error::InvalidParameter(
                "strip needs axes, positive width and nonnegative levels".into(),
            ));
        }
        Ok(Self {
            kind: DampingKind::Strip(bands),
            gamma: 1.0,
            center: Vec::new(),
            radius: 1.0,
            floor,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constant damping must be nonnegative, got {value}"
            )));
        }
        Ok(Self {
            kind: DampingKind::Constant,
            gamma: 1.0,
            center: Vec::new(),
            radius: 1.0,
            floor: value,
        })
    }

    pub fn custom(custom: CustomDamping, gamma: f64, center: Vec<f64>) -> Self {
        Self {
            kind: DampingKind::Custom(custom),
            gamma,
            center,
            radius: 1.0,
            floor: 0.0,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    /// `b(x)` on full coordinates `(x', x'')`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let core = match &self.kind {
            DampingKind::PeriodicPower => periodic_chord_sqr(x, &self.center).powf(self.gamma),
            DampingKind::RadialPower => self
                .center
                .iter()
                .zip(x)
                .map(|(c, x)| (x - c) * (x - c))
                .sum::<f64>()
                .powf(self.gamma),
            DampingKind::MultiCenter(centers) => centers
                .iter()
                .map(|(c, g)| periodic_chord_sqr(x, c).powf(*g))
                .product(),
            DampingKind::Strip(s) => {
                if s.axes
                    .iter()
                    .any(|&a| wrapped_distance(x[a], s.center) < s.half_width)
                {
                    s.level
                } else {
                    0.0
                }
            }
            DampingKind::Constant => 0.0,
            DampingKind::Custom(c) => (c.function)(x),
        };
        core + self.floor
    }

    /// Number of leading coordinates the coefficient can depend on, or
    /// `None` when it may depend on any of them.
    pub fn dependent_dims(&self) -> Option<usize> {
        match &self.kind {
            DampingKind::PeriodicPower | DampingKind::RadialPower => Some(self.center.len()),
            DampingKind::MultiCenter(c) => Some(c[0].0.len()),
            DampingKind::Strip(s) => s.axes.iter().max().map(|a| a + 1),
            DampingKind::Constant => Some(0),
            DampingKind::Custom(c) => c.torus_independent.then_some(c.interior_dims),
        }
    }

    /// True when `b` does not depend on the coordinates past `interior_dims`.
    pub fn is_torus_independent(&self, interior_dims: usize) -> bool {
        self.dependent_dims().is_some_and(|d| d <= interior_dims)
    }

    /// Smallest length scale of the coefficient, used to pick ray scan steps.
    pub fn feature_size(&self) -> f64 {
        match &self.kind {
            DampingKind::Strip(s) => 2.0 * s.half_width,
            DampingKind::Custom(c) => c.feature_size,
            _ => self.radius,
        }
    }

    pub fn is_power_type(&self) -> bool {
        matches!(
            self.kind,
            DampingKind::PeriodicPower | DampingKind::RadialPower
        )
    }
}

/// Sampled local comparison `lower^{-1} |x - y|^{2 gamma} <= b(x) <= upper
/// |x - y|^{2 gamma}` on the punctured ball of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneityBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Deterministic directions on the unit sphere of `R^d` (Fibonacci-type
/// lattice in 3-D, equally spaced in 2-D, both signs in 1-D).
pub(crate) fn sphere_directions(dims: usize, count: usize) -> Vec<Vec<f64>> {
    match dims {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * j as f64;
                    let mut v = vec![0.0; dims];
                    v[0] = r * t.cos();
                    v[1] = r * t.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Samples `b(y + x) / |x|^{2 gamma}` over the punctured ball and returns
/// `(1 / min ratio, max ratio)`, so `lower * upper >= 1` always holds.
pub fn homogeneity_bounds(profile: &DampingProfile, samples: usize) -> Result<HomogeneityBounds> {
    if profile.center.is_empty() {
        return Err(Error::UnsupportedDamping(
            "homogeneity needs a centre point".into(),
        ));
    }
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "at least 100 samples required, got {samples}"
        )));
    }
    let dims = profile.center.len();
    let dirs = sphere_directions(dims, (samples / 25).max(8));
    let radii = samples.div_ceil(dirs.len()).max(4);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut point = profile.center.clone();
    for dir in &dirs {
        for j in 1..=radii {
            // Geometric radii down to 1e-6 of the ball so the origin is probed.
            let r = profile.radius * 1e-6f64.powf((radii - j) as f64 / radii as f64);
            for ((p, c), d) in point.iter_mut().zip(&profile.center).zip(dir) {
                *p = c + r * d;
            }
            let ratio = profile.eval(&point) / r.powf(2.0 * profile.gamma);
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
        }
    }
    if !(min_ratio > 1e-12) {
        return Err(Error::HypothesisViolated(format!(
            "b / |x - y|^(2 gamma) drops to {min_ratio:e} near the centre"
        )));
    }
    if !max_ratio.is_finite() {
        return Err(Error::HypothesisViolated(
            "b / |x - y|^(2 gamma) is unbounded near the centre".into(),
        ));
    }
    Ok(HomogeneityBounds {
        lower: 1.0 / min_ratio,
        upper: max_ratio,
    })
}

/// The coefficient of the model operator: equal to `b(y + x)` inside the
/// ball, extended outside by homogeneity of degree `2 gamma`.
#[derive(Debug, Clone)]
pub struct HomogeneousExtension {
    profile: DampingProfile,
}

pub fn extend_homogeneous(profile: &DampingProfile) -> Result<HomogeneousExtension> {
    if !profile.is_power_type() {
        return Err(Error::UnsupportedDamping(
            "homogeneous extension needs a power-type profile".into(),
        ));
    }
    if profile.floor != 0.0 {
        return Err(Error::UnsupportedDamping(
            "homogeneous extension needs a zero floor".into(),
        ));
    }
    Ok(HomogeneousExtension {
        profile: profile.clone(),
    })
}

impl HomogeneousExtension {
    pub fn gamma(&self) -> f64 {
        self.profile.gamma
    }

    pub fn dims(&self) -> usize {
        self.profile.center.len()
    }

    /// Whether the extension is exactly `|x|^{2 gamma}` everywhere.
    pub fn is_exact_power(&self) -> bool {
        matches!(self.profile.kind, DampingKind::RadialPower)
    }

    /// `W(x)` for `x` in `R^{n'}` (coordinates relative to the centre).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let p = &self.profile;
        let dims = p.center.len();
        let r = x[..dims].iter().map(|v| v * v).sum::<f64>().sqrt();
        if self.is_exact_power() {
            return (r * r).powf(p.gamma);
        }
        let mut y = p.center.clone();
        if r <= p.radius {
            y.iter_mut().zip(x).for_each(|(y, x)| *y += x);
            p.eval(&y)
        } else {
            let s = p.radius / r;
            y.iter_mut().zip(x).for_each(|(y, x)| *y += s * x);
            (r / p.radius).powf(2.0 * p.gamma) * p.eval(&y)
        }
    }
}

/// `{x : b(x) >= threshold}`, the region where damping is effective.
#[derive(Debug, Clone)]
pub struct EffectiveRegion {
    profile: DampingProfile,
    threshold: f64,
}

pub fn effective_region(profile: &DampingProfile, threshold: f64) -> Result<EffectiveRegion> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    Ok(EffectiveRegion {
        profile: profile.clone(),
        threshold,
    })
}

impl EffectiveRegion {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.profile.eval(x) >= self.threshold
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn profile(&self) -> &DampingProfile {
        &self.profile
    }
}
