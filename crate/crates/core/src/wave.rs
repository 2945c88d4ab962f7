//! Damped wave evolution `u_tt - Delta u + b u_t = 0` by Strang splitting:
//! exact rotation of each Fourier mode, exact pointwise decay of `u_t`.

use serde::{Deserialize, Serialize};

use crate::damping::DampingProfile;
use crate::error::{Error, Result};
use crate::resolvent::{fit_exponent, ExponentFit};
use crate::spectral::{AxisKind, Grid, SpectralField};
use crate::Complex64;

/// Allowed energy growth per unit time, relative to the current energy.
pub const ENERGY_GROWTH_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: SpectralField,
    /// `u_t`.
    pub v: SpectralField,
    pub t: f64,
}

impl WaveState {
    pub fn new(u: SpectralField, v: SpectralField) -> Result<Self> {
        u.same_grid(&v)?;
        Ok(Self { u, v, t: 0.0 })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// Distance in the energy norm `(||grad u||^2 + ||v||^2)^{1/2}`.
    pub fn energy_distance(&self, other: &WaveState) -> Result<f64> {
        self.u.same_grid(&other.u)?;
        let k2 = self.grid().squared_wavenumbers();
        let w = self.grid().plancherel_weight();
        let du: f64 = self
            .u
            .modal()
            .iter()
            .zip(other.u.modal())
            .zip(&k2)
            .map(|((a, b), k2)| k2 * (a - b).norm_sqr())
            .sum();
        Ok((du * w + self.v.distance(&other.v)?.powi(2)).sqrt())
    }
}

/// `|k|^2 |u_k|^2 + |v_k|^2` per mode, without the Plancherel weight.
pub fn modal_energies(state: &WaveState) -> Vec<f64> {
    state
        .grid()
        .squared_wavenumbers()
        .iter()
        .zip(state.u.modal().iter().zip(state.v.modal()))
        .map(|(k2, (u, v))| k2 * u.norm_sqr() + v.norm_sqr())
        .collect()
}

/// `1/2 (||grad u||^2 + ||u_t||^2)`.
pub fn energy(state: &WaveState) -> f64 {
    0.5 * modal_energies(state).iter().sum::<f64>() * state.grid().plancherel_weight()
}

/// Precomputed sub-flows for one time step.
#[derive(Debug, Clone)]
pub struct WaveIntegrator {
    grid: Grid,
    dt: f64,
    /// `b` at the nodes.
    damping: Vec<f64>,
    /// `e^{-b dt}` at the nodes.
    decay: Vec<f64>,
    /// Half-step rotation `[[c, s/k], [-k s, c]]` per mode.
    rotation: Vec<[f64; 3]>,
}

impl WaveIntegrator {
    pub fn new(grid: &Grid, damping: &DampingProfile, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if grid.axes().iter().any(|a| a.kind != AxisKind::Periodic) {
            return Err(Error::InvalidGrid("wave evolution runs on periodic grids".into()));
        }
        let mut x = vec![0.0; grid.dim()];
        let samples: Vec<f64> = (0..grid.len())
            .map(|flat| {
                grid.node_into(flat, &mut x);
                damping.eval(&x)
            })
            .collect();
        let decay = samples.iter().map(|b| (-b * dt).exp()).collect();
        let half = 0.5 * dt;
        let rotation = grid
            .squared_wavenumbers()
            .into_iter()
            .map(|k2| {
                let k = k2.sqrt();
                if k == 0.0 {
                    [1.0, half, 0.0]
                } else {
                    let (s, c) = (k * half).sin_cos();
                    [c, s / k, k * s]
                }
            })
            .collect();
        Ok(Self { grid: grid.clone(), dt, damping: samples, decay, rotation })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rotate(&self, state: &mut WaveState) {
        let u = state.u.modal_mut();
        let v = state.v.modal_mut();
        for (r, (uj, vj)) in self.rotation.iter().zip(u.iter_mut().zip(v.iter_mut())) {
            let (a, b) = (*uj, *vj);
            *uj = a * r[0] + b * r[1];
            *vj = b * r[0] - a * r[2];
        }
    }

    /// One Strang step: half rotation, damping, half rotation.
    pub fn step(&self, state: &mut WaveState) -> Result<()> {
        if state.grid() != &self.grid {
            return Err(Error::GridMismatch("state and integrator grids differ".into()));
        }
        self.rotate(state);
        let mut nodal = state.v.to_nodal();
        nodal.iter_mut().zip(&self.decay).for_each(|(v, d)| *v *= d);
        state.v = SpectralField::from_nodal(&self.grid, nodal)?;
        self.rotate(state);
        state.t += self.dt;
        Ok(())
    }

    /// `integral b |u_t|^2`, the instantaneous energy loss rate.
    pub fn dissipation_rate(&self, state: &WaveState) -> f64 {
        let nodal = state.v.to_nodal();
        nodal.iter().zip(&self.damping).map(|(v, b)| b * v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }
}

pub fn step(state: &WaveState, dt: f64, damping: &DampingProfile) -> Result<WaveState> {
    let mut next = state.clone();
    WaveIntegrator::new(state.grid(), damping, dt)?.step(&mut next)?;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
}

/// Advances `steps` steps, recording every `stride`-th state (and the
/// first). Aborts when the energy grows beyond the tolerance.
pub fn evolve(
    state: &mut WaveState,
    integrator: &WaveIntegrator,
    steps: usize,
    stride: usize,
) -> Result<Vec<TrajectoryPoint>> {
    let stride = stride.max(1);
    let record = |s: &WaveState| TrajectoryPoint { t: s.t, energy: energy(s), dissipation: integrator.dissipation_rate(s) };
    let mut out = vec![record(state)];
    let mut previous = out[0];
    for n in 1..=steps {
        integrator.step(state)?;
        if n % stride == 0 || n == steps {
            let p = record(state);
            let allowed = previous.energy * (1.0 + ENERGY_GROWTH_TOLERANCE * (p.t - previous.t)) + f64::MIN_POSITIVE;
            if p.energy > allowed {
                return Err(Error::EnergyIncrease { before: previous.energy, after: p.energy, time: p.t });
            }
            previous = p;
            out.push(p);
        }
    }
    Ok(out)
}

/// `|E(t1) - E(t0) + integral_{t0}^{t1} <b u_t, u_t> dt| / E(t0)` with the
/// trapezoid rule over the recorded points inside `window`.
pub fn dissipation_residual(trajectory: &[TrajectoryPoint], window: (f64, f64)) -> Result<f64> {
    let tol = 1e-9 * window.1.abs().max(1.0);
    let points: Vec<&TrajectoryPoint> =
        trajectory.iter().filter(|p| p.t >= window.0 - tol && p.t <= window.1 + tol).collect();
    if points.len() < 2 {
        return Err(Error::InvalidParameter("dissipation window holds fewer than two samples".into()));
    }
    let (first, last) = (points[0], points[points.len() - 1]);
    if first.energy == 0.0 {
        return Ok(0.0);
    }
    let integral: f64 = points
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].dissipation + w[1].dissipation))
        .sum();
    Ok((last.energy - first.energy + integral).abs() / first.energy)
}

/// Default smooth data: a periodic Gaussian `exp(sum_a (cos(x'_a - c_a) - 1) / width^2)`
/// in `x'` (comparable to `exp(-|x' - c|^2 / (2 width^2))` near the centre),
/// times `cos x''_1`; zero velocity. Without torus axes the bump alone.
pub fn gaussian_data(grid: &Grid, center: &[f64], width: f64) -> Result<WaveState> {
    let n1 = grid.interior_dims();
    if center.len() != n1 || !(width > 0.0) {
        return Err(Error::InvalidParameter("data centre must match the interior dimension".into()));
    }
    let u = SpectralField::from_fn(grid, |x| {
        let phase: f64 = (0..n1).map(|a| (x[a] - center[a]).cos() - 1.0).sum();
        let harmonic = if grid.torus_dims() > 0 { x[n1].cos() } else { 1.0 };
        Complex64::new((phase / (width * width)).exp() * harmonic, 0.0)
    });
    WaveState::new(u, SpectralField::zeros(grid))
}

/// `(||u||_{H^2}^2 + ||u_t||_{H^1}^2)^{1/2}` with `(1 + |k|^2)` weights.
pub fn data_norm(state: &WaveState) -> f64 {
    let k2 = state.grid().squared_wavenumbers();
    let acc: f64 = k2
        .iter()
        .zip(state.u.modal().iter().zip(state.v.modal()))
        .map(|(k2, (u, v))| (1.0 + k2).powi(2) * u.norm_sqr() + (1.0 + k2) * v.norm_sqr())
        .sum();
    (acc * state.grid().plancherel_weight()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    pub energy: f64,
    pub data_norm: f64,
}

impl DecaySample {
    pub fn sqrt_energy(&self) -> f64 {
        self.energy.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub samples: Vec<DecaySample>,
    /// Log-log fit of `E^{1/2}` over the second half of the horizon.
    pub fit: Option<ExponentFit>,
}

/// Evolves `state` to `horizon` with step `dt`, sampling every `stride`
/// steps, and fits the decay of `E^{1/2}` over `[horizon/2, horizon]`.
pub fn measure_decay(
    mut state: WaveState,
    damping: &DampingProfile,
    dt: f64,
    horizon: f64,
    stride: usize,
) -> Result<DecayReport> {
    let integrator = WaveIntegrator::new(state.grid(), damping, dt)?;
    let norm = data_norm(&state);
    let steps = (horizon / dt).round() as usize;
    let trajectory = evolve(&mut state, &integrator, steps, stride)?;
    let samples: Vec<DecaySample> =
        trajectory.iter().map(|p| DecaySample { t: p.t, energy: p.energy, data_norm: norm }).collect();
    let fit = if norm == 0.0 {
        None
    } else {
        let (t, e): (Vec<f64>, Vec<f64>) =
            samples.iter().filter(|s| s.t > 0.0).map(|s| (s.t, s.sqrt_energy())).unzip();
        fit_exponent(&t, &e, Some((0.5 * horizon, horizon))).ok()
    };
    Ok(DecayReport { samples, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Grid {
        make_grid((1, 1), &[n, n], &[2.0 * PI; 2], &[AxisKind::Periodic; 2]).unwrap()
    }

    fn zero_damping() -> DampingProfile {
        DampingProfile::constant(0.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = torus(16);
        let c = WaveState::new(
            SpectralField::from_fn(&g, |_| Complex64::new(3.0, 0.0)),
            SpectralField::zeros(&g),
        )
        .unwrap();
        assert!(energy(&c).abs() < 1e-24);
        let v = SpectralField::from_fn(&g, |x| Complex64::from_polar(1.0 / (2.0 * PI), x[0]));
        let s = WaveState::new(SpectralField::zeros(&g), v.clone()).unwrap();
        assert!((energy(&s) - 0.5 * v.norm_sqr()).abs() < 1e-15);
        assert!((energy(&s) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn standing_wave_matches_closed_form() {
        let g = torus(16);
        let b = zero_damping();
        let dt = 0.01;
        let integ = WaveIntegrator::new(&g, &b, dt).unwrap();
        let at = |t: f64| {
            WaveState::new(
                SpectralField::from_fn(&g, |x| Complex64::new(t.cos() * x[0].sin(), 0.0)),
                SpectralField::from_fn(&g, |x| Complex64::new(-t.sin() * x[0].sin(), 0.0)),
            )
            .unwrap()
        };
        let mut s = at(0.0);
        let e0 = energy(&s);
        for _ in 0..250 {
            integ.step(&mut s).unwrap();
        }
        assert!((energy(&s) - e0).abs() < 1e-12 * e0);
        assert!(s.energy_distance(&at(2.5)).unwrap() < 1e-12);
    }

    #[test]
    fn full_period_returns_to_start() {
        let g = torus(8);
        let b = zero_damping();
        let n = 1000;
        let integ = WaveIntegrator::new(&g, &b, 2.0 * PI / n as f64).unwrap();
        let s0 = WaveState::new(
            SpectralField::from_fn(&g, |x| Complex64::new(x[0].cos(), 0.0)),
            SpectralField::from_fn(&g, |x| Complex64::new(0.5 * x[0].sin(), 0.0)),
        )
        .unwrap();
        let mut s = s0.clone();
        for _ in 0..n {
            integ.step(&mut s).unwrap();
        }
        assert!(s.energy_distance(&s0).unwrap() < 1e-10);
    }

    #[test]
    fn undamped_modal_energies_are_conserved() {
        let g = torus(16);
        let mut s = gaussian_data(&g, &[0.0], 0.5).unwrap();
        let before = modal_energies(&s);
        let integ = WaveIntegrator::new(&g, &zero_damping(), 0.05).unwrap();
        for _ in 0..40 {
            integ.step(&mut s).unwrap();
        }
        for (a, b) in before.iter().zip(modal_energies(&s)) {
            assert!((a - b).abs() <= 1e-12 * before.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn constant_damping_decays_velocity() {
        let g = torus(8);
        let c = 0.7;
        let b = DampingProfile::constant(c).unwrap();
        let dt = 0.1;
        // a spatially constant state does not rotate, so only the damping acts on v
        let mut s = WaveState::new(
            SpectralField::zeros(&g),
            SpectralField::from_fn(&g, |_| Complex64::new(1.0, 0.0)),
        )
        .unwrap();
        WaveIntegrator::new(&g, &b, dt).unwrap().step(&mut s).unwrap();
        let v = s.v.to_nodal()[0].re;
        assert!((v - (-c * dt).exp()).abs() < 1e-14);
    }

    #[test]
    fn constant_damping_matches_scalar_oscillator() {
        // u = a(t) cos x with a'' + a' + a = 0, a(0) = 1, a'(0) = 0
        let g = torus(8);
        let b = DampingProfile::constant(1.0).unwrap();
        let exact = |t: f64| {
            let w = 0.75f64.sqrt();
            (-0.5 * t).exp() * ((w * t).cos() + 0.5 / w * (w * t).sin())
        };
        let run = |dt: f64| {
            let mut s = WaveState::new(
                SpectralField::from_fn(&g, |x| Complex64::new(x[0].cos(), 0.0)),
                SpectralField::zeros(&g),
            )
            .unwrap();
            let integ = WaveIntegrator::new(&g, &b, dt).unwrap();
            for _ in 0..(1.0 / dt).round() as usize {
                integ.step(&mut s).unwrap();
            }
            (s.u.to_nodal()[0].re - exact(1.0)).abs()
        };
        let (e1, e2) = (run(0.01), run(0.005));
        assert!(e1 < 1e-4);
        assert!((e1 / e2 - 4.0).abs() < 0.4, "{}", e1 / e2);
    }

    #[test]
    fn dissipation_residual_vanishes_without_damping() {
        let g = torus(16);
        let mut s = gaussian_data(&g, &[0.0], 0.5).unwrap();
        let integ = WaveIntegrator::new(&g, &zero_damping(), 0.01).unwrap();
        let tr = evolve(&mut s, &integ, 100, 1).unwrap();
        assert!(dissipation_residual(&tr, (0.0, 1.0)).unwrap() <= 1e-10);
        assert!(dissipation_residual(&tr, (5.0, 6.0)).is_err());
    }

    #[test]
    fn zero_data_skips_fit() {
        let g = torus(8);
        let s = WaveState::new(SpectralField::zeros(&g), SpectralField::zeros(&g)).unwrap();
        let b = DampingProfile::periodic_power(1.0, vec![0.0]).unwrap();
        let r = measure_decay(s, &b, 0.1, 2.0, 1).unwrap();
        assert!(r.fit.is_none() && r.samples.iter().all(|s| s.energy == 0.0));
    }
}
