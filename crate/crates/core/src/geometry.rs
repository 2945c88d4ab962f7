//! Straight-line geodesic flow on flat tori, ray scans against the damped
//! region, and geometric control certification.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// A point of the unit cosphere bundle of the flat torus `(R / 2 pi Z)^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    /// Wraps `x` into `[0, 2 pi)` and checks `|xi| = 1`.
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() || x.is_empty() {
            return Err(Error::InvalidParameter("position and direction dimensions differ".into()));
        }
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("direction has norm {norm}, expected 1")));
        }
        Ok(Self { x: x.into_iter().map(wrap).collect(), xi })
    }

    pub fn dims(&self) -> usize {
        self.x.len()
    }
}

fn wrap(v: f64) -> f64 {
    let w = v.rem_euclid(TWO_PI);
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

fn position_at(p: &PhasePoint, t: f64, out: &mut [f64]) {
    for ((o, x), xi) in out.iter_mut().zip(&p.x).zip(&p.xi) {
        *o = wrap(x + 2.0 * t * xi);
    }
}

/// The flow of the symbol `|xi|^2`: `x -> x + 2 t xi`, `xi` fixed.
pub fn flow(p: &PhasePoint, t: f64) -> PhasePoint {
    let mut x = vec![0.0; p.dims()];
    position_at(p, t, &mut x);
    PhasePoint { x, xi: p.xi.clone() }
}

/// First time in `[0, t_max]` at which the ray enters `region`, located by
/// a scan with step `dt_scan` and bisection down to `1e-9`.
pub fn first_hit_time(
    p: &PhasePoint,
    region: impl Fn(&[f64]) -> bool,
    t_max: f64,
    dt_scan: f64,
) -> Option<f64> {
    scan(p, &region, t_max, dt_scan, 1.0)
}

fn scan(p: &PhasePoint, region: &dyn Fn(&[f64]) -> bool, t_max: f64, dt: f64, sign: f64) -> Option<f64> {
    let mut x = vec![0.0; p.dims()];
    let inside = |t: f64, x: &mut [f64]| {
        position_at(p, sign * t, x);
        region(x)
    };
    if inside(0.0, &mut x) {
        return Some(0.0);
    }
    let steps = (t_max / dt).ceil() as usize;
    let mut previous = 0.0;
    for j in 1..=steps {
        let t = (j as f64 * dt).min(t_max);
        if inside(t, &mut x) {
            let (mut lo, mut hi) = (previous, t);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if inside(mid, &mut x) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        previous = t;
    }
    None
}

/// Deterministic directions on the unit sphere: both signs in 1-D, equally
/// spaced angles in 2-D, a latitude-longitude grid (poles along the last
/// axis, equator included) in 3-D. Components below `1e-14` are set to zero
/// so that axis-aligned directions are represented exactly.
pub fn cosphere_lattice(dims: usize, count: usize) -> Vec<Vec<f64>> {
    let snap = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v };
    let mut out: Vec<Vec<f64>> = match dims {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let a = TWO_PI * j as f64 / count as f64;
                vec![snap(a.cos()), snap(a.sin())]
            })
            .collect(),
        3 => {
            let mut azimuths = 4;
            while azimuths * (azimuths / 2 - 1) + 2 < count {
                azimuths += 4;
            }
            let rings = azimuths / 2;
            let mut v = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]];
            for i in 1..rings {
                let theta = PI * i as f64 / rings as f64;
                for j in 0..azimuths {
                    let phi = TWO_PI * j as f64 / azimuths as f64;
                    v.push(vec![
                        snap(theta.sin() * phi.cos()),
                        snap(theta.sin() * phi.sin()),
                        snap(theta.cos()),
                    ]);
                }
            }
            v
        }
        _ => Vec::new(),
    };
    for d in &mut out {
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        d.iter_mut().for_each(|v| *v /= n);
    }
    out
}

/// `m^n` lattice points `2 pi j / m` with `m = ceil(count^{1/n})`.
pub fn base_lattice(dims: usize, count: usize) -> Vec<Vec<f64>> {
    let mut per_axis = (count as f64).powf(1.0 / dims as f64).round() as usize;
    while per_axis.pow(dims as u32) < count {
        per_axis += 1;
    }
    let total = per_axis.pow(dims as u32);
    (0..total)
        .map(|mut flat| {
            let mut x = vec![0.0; dims];
            for a in (0..dims).rev() {
                x[a] = TWO_PI * (flat % per_axis) as f64 / per_axis as f64;
                flat /= per_axis;
            }
            x
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GccOptions {
    pub dims: usize,
    /// The damped region is `{b >= threshold}`.
    pub threshold: f64,
    pub direction_count: usize,
    pub base_count: usize,
    /// Scan horizon; defaults to ten torus diameters.
    pub t_max: Option<f64>,
}

impl GccOptions {
    pub fn new(dims: usize) -> Self {
        Self { dims, threshold: 1e-9, direction_count: 64, base_count: 64, t_max: None }
    }

    pub fn horizon(&self) -> f64 {
        self.t_max.unwrap_or(10.0 * PI * (self.dims as f64).sqrt())
    }
}

/// A sampled ray that stayed out of the damped region over the whole scan,
/// both forward and backward in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: PhasePoint,
    /// `threshold - max b` along the scanned ray.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GccVerdict {
    Satisfied { max_hit_time: f64 },
    Violated { witnesses: Vec<Witness> },
}

impl GccVerdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Self::Satisfied { .. })
    }
}

/// Outcome for one sampled ray: hit time (smaller of forward and backward)
/// or the witness margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayOutcome {
    pub point: PhasePoint,
    pub hit_time: Option<f64>,
    pub margin: f64,
}

/// Scans every ray of the deterministic lattice on `S^* T^n`.
pub fn scan_rays(profile: &DampingProfile, options: &GccOptions) -> Result<Vec<RayOutcome>> {
    if options.direction_count < 64 || options.base_count < 64 {
        return Err(Error::InvalidParameter("sampling counts must be at least 64".into()));
    }
    if !(options.threshold > 0.0) || !(options.horizon() > 0.0) {
        return Err(Error::InvalidParameter("threshold and horizon must be positive".into()));
    }
    let dims = options.dims;
    let directions = cosphere_lattice(dims, options.direction_count);
    if directions.is_empty() {
        return Err(Error::InvalidParameter(format!("unsupported torus dimension {dims}")));
    }
    let bases = base_lattice(dims, options.base_count);
    let t_max = options.horizon();
    let dt = profile.feature_size() / 8.0;
    let rays: Vec<PhasePoint> = bases
        .iter()
        .flat_map(|x| directions.iter().map(move |xi| PhasePoint { x: x.clone(), xi: xi.clone() }))
        .collect();
    let threshold = options.threshold;
    let region = |x: &[f64]| profile.eval(x) >= threshold;
    Ok(rays
        .into_par_iter()
        .map(|p| {
            let forward = scan(&p, &region, t_max, dt, 1.0);
            let backward = scan(&p, &region, t_max, dt, -1.0);
            let hit_time = match (forward, backward) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            let margin = if hit_time.is_some() {
                0.0
            } else {
                let steps = (t_max / dt).ceil() as usize;
                let mut x = vec![0.0; dims];
                let mut peak: f64 = 0.0;
                for j in 0..=steps {
                    for sign in [1.0, -1.0] {
                        position_at(&p, sign * (j as f64 * dt).min(t_max), &mut x);
                        peak = peak.max(profile.eval(&x));
                    }
                }
                threshold - peak
            };
            RayOutcome { point: p, hit_time, margin }
        })
        .collect())
}

pub fn gcc_certify(profile: &DampingProfile, options: &GccOptions) -> Result<GccVerdict> {
    let outcomes = scan_rays(profile, options)?;
    let witnesses: Vec<Witness> = outcomes
        .iter()
        .filter(|o| o.hit_time.is_none())
        .map(|o| Witness { point: o.point.clone(), margin: o.margin })
        .collect();
    if witnesses.is_empty() {
        let max_hit_time = outcomes.iter().filter_map(|o| o.hit_time).fold(0.0, f64::max);
        Ok(GccVerdict::Satisfied { max_hit_time })
    } else {
        Ok(GccVerdict::Violated { witnesses })
    }
}

/// Sampled rays that never meet the damped region within the horizon.
pub fn undamped_set_sample(profile: &DampingProfile, options: &GccOptions) -> Result<Vec<PhasePoint>> {
    Ok(match gcc_certify(profile, options)? {
        GccVerdict::Satisfied { .. } => Vec::new(),
        GccVerdict::Violated { witnesses } => witnesses.into_iter().map(|w| w.point).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damping::StripBands;
    use proptest::prelude::*;

    fn point(x: &[f64], xi: &[f64]) -> PhasePoint {
        PhasePoint::new(x.to_vec(), xi.to_vec()).unwrap()
    }

    #[test]
    fn flow_has_speed_two() {
        let q = flow(&point(&[0.0, 0.0], &[0.0, 1.0]), PI / 2.0);
        assert!(q.x[0].abs() < 1e-15 && (q.x[1] - PI).abs() < 1e-12);
        assert_eq!(flow(&point(&[1.0, 2.0], &[0.6, 0.8]), 0.0).x, vec![1.0, 2.0]);
    }

    #[test]
    fn hit_time_matches_closed_form() {
        let p = point(&[0.0, 0.0], &[1.0, 0.0]);
        let t = first_hit_time(&p, |x| (x[0] - PI).abs() < 1.0, 10.0, 1.0 / 8.0).unwrap();
        assert!((t - (PI - 1.0) / 2.0).abs() < 1e-9);
        let inside = point(&[PI, 0.0], &[1.0, 0.0]);
        assert_eq!(first_hit_time(&inside, |x| (x[0] - PI).abs() < 1.0, 10.0, 0.1), Some(0.0));
    }

    #[test]
    fn vertical_ray_misses_a_vertical_strip() {
        let p = point(&[0.0, 0.3], &[0.0, 1.0]);
        assert_eq!(first_hit_time(&p, |x| (x[0] - PI).abs() < 1.0, 50.0, 0.1), None);
    }

    #[test]
    fn positive_damping_is_certified_at_time_zero() {
        let b = DampingProfile::periodic_power(1.0, vec![0.0]).unwrap().with_floor(0.5);
        let v = gcc_certify(&b, &GccOptions::new(2)).unwrap();
        assert_eq!(v, GccVerdict::Satisfied { max_hit_time: 0.0 });
    }

    #[test]
    fn cross_strip_is_certified_with_positive_hit_time() {
        let bands = StripBands { axes: vec![0, 1], center: PI, half_width: 0.5, level: 1.0 };
        let b = DampingProfile::strip(bands, 0.0).unwrap();
        match gcc_certify(&b, &GccOptions::new(2)).unwrap() {
            GccVerdict::Satisfied { max_hit_time } => assert!(max_hit_time > 0.0 && max_hit_time < 10.0),
            other => panic!("expected certification, got {other:?}"),
        }
    }

    #[test]
    fn lattices_are_unit_and_symmetric() {
        for dims in [2, 3] {
            let dirs = cosphere_lattice(dims, 64);
            assert!(dirs.len() >= 64);
            for d in &dirs {
                let n: f64 = d.iter().map(|v| v * v).sum();
                assert!((n - 1.0).abs() < 1e-14);
                let neg: Vec<f64> = d.iter().map(|v| -v).collect();
                assert!(dirs.iter().any(|e| e.iter().zip(&neg).all(|(a, b)| (a - b).abs() < 1e-12)));
            }
        }
        assert_eq!(base_lattice(2, 64).len(), 64);
        assert_eq!(base_lattice(3, 64).len(), 64);
    }

    proptest! {
        #[test]
        fn flow_group_law(x0 in 0.0f64..6.0, x1 in 0.0f64..6.0, a in 0.0f64..6.3, s in -20.0f64..20.0, t in -20.0f64..20.0) {
            let p = point(&[x0, x1], &[a.cos(), a.sin()]);
            let two = flow(&flow(&p, s), t);
            let one = flow(&p, s + t);
            for (u, v) in two.x.iter().zip(&one.x) {
                let d = (u - v).abs();
                prop_assert!(d.min(TWO_PI - d) < 1e-12);
            }
            prop_assert_eq!(two.xi, p.xi);
        }

        #[test]
        fn bigger_region_is_hit_no_later(x0 in 0.0f64..6.2, a in 0.0f64..6.3, w in 0.1f64..1.0, extra in 0.0f64..1.0) {
            let p = point(&[x0, 1.0], &[a.cos(), a.sin()]);
            let small = first_hit_time(&p, |x| (x[0] - PI).abs() < w, 40.0, w / 8.0);
            let big = first_hit_time(&p, |x| (x[0] - PI).abs() < w + extra, 40.0, w / 8.0);
            if let Some(ts) = small {
                let tb = big.expect("a larger region is hit too");
                prop_assert!(tb <= ts + 1e-9);
            }
        }
    }
}
