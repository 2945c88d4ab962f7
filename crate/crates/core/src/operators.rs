//! The damped stationary operators, their discretizations on spectral
//! grids and the scaling that maps the rescaled operator to the model one.

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::damping::{extend_homogeneous, DampingProfile};
use crate::error::{Error, Result};
use crate::linalg::{BandedMatrix, FactoredMatrix};
use crate::spectral::{DealiasedProduct, Grid, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorFamily {
    /// `-Lap - lambda^2 + i lambda b` on `M' x T^{n''}`.
    Stationary,
    /// `-Lap' - omega + i lambda b` on the interior factor alone.
    Reduced,
    /// `-Lap + i W - mu` with `W` the homogeneous extension of `b`.
    Model,
    /// `-Lap - omega + i lambda W`.
    Rescaled,
}

#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub family: OperatorFamily,
    pub lambda: f64,
    pub omega: f64,
    pub mu: f64,
    pub damping: DampingProfile,
}

impl OperatorSpec {
    pub fn stationary(damping: DampingProfile, lambda: f64) -> Self {
        Self { family: OperatorFamily::Stationary, lambda, omega: 0.0, mu: 0.0, damping }
    }

    pub fn reduced(damping: DampingProfile, lambda: f64, omega: f64) -> Self {
        Self { family: OperatorFamily::Reduced, lambda, omega, mu: 0.0, damping }
    }

    pub fn model(damping: DampingProfile, mu: f64) -> Self {
        Self { family: OperatorFamily::Model, lambda: 1.0, omega: 0.0, mu, damping }
    }

    pub fn rescaled(damping: DampingProfile, lambda: f64, omega: f64) -> Self {
        Self { family: OperatorFamily::Rescaled, lambda, omega, mu: 0.0, damping }
    }

    /// Constant real shift and the factor multiplying `i * coefficient`.
    fn shift_and_coupling(&self) -> (f64, f64) {
        match self.family {
            OperatorFamily::Stationary => (-self.lambda * self.lambda, self.lambda),
            OperatorFamily::Reduced => (-self.omega, self.lambda),
            OperatorFamily::Model => (-self.mu, 1.0),
            OperatorFamily::Rescaled => (-self.omega, self.lambda),
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !self.omega.is_finite() || !self.mu.is_finite() {
            return Err(Error::InvalidParameter("spectral parameter is not finite".into()));
        }
        match self.family {
            OperatorFamily::Model | OperatorFamily::Rescaled => {
                if !grid.all_box() {
                    return Err(Error::InvalidGrid(
                        "the model operators act on truncated-box axes only".into(),
                    ));
                }
                if self.damping.center.len() != grid.dim() {
                    return Err(Error::InvalidGrid(format!(
                        "damping has {} interior coordinates, grid has {} axes",
                        self.damping.center.len(),
                        grid.dim()
                    )));
                }
            }
            OperatorFamily::Reduced => {
                if grid.torus_dims() != 0 {
                    return Err(Error::InvalidGrid(
                        "the reduced operator lives on the interior factor only".into(),
                    ));
                }
                if !self.damping.is_torus_independent(grid.dim()) {
                    return Err(Error::UnsupportedDamping(
                        "reduced operator needs damping independent of the torus variables".into(),
                    ));
                }
            }
            OperatorFamily::Stationary => {
                if let Some(d) = self.damping.dependent_dims() {
                    if d > grid.dim() {
                        return Err(Error::InvalidGrid(format!(
                            "damping reads {d} coordinates, grid has {}",
                            grid.dim()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// An operator `-Lap + shift + i coupling w(x)` discretized on a grid.
#[derive(Debug, Clone)]
pub struct DampedOperator {
    spec: OperatorSpec,
    grid: Grid,
    diagonal: Vec<f64>,
    coupling: f64,
    product: DealiasedProduct,
}

impl DampedOperator {
    pub fn new(spec: &OperatorSpec, grid: &Grid) -> Result<Self> {
        spec.validate(grid)?;
        let (shift, coupling) = spec.shift_and_coupling();
        let product = match spec.family {
            OperatorFamily::Model | OperatorFamily::Rescaled => {
                let w = extend_homogeneous(&spec.damping)?;
                DealiasedProduct::new(grid, |x| w.eval(x))
            }
            _ => DealiasedProduct::new(grid, |x| spec.damping.eval(x)),
        };
        let diagonal = grid.squared_wavenumbers().into_iter().map(|k2| k2 + shift).collect();
        Ok(Self { spec: spec.clone(), grid: grid.clone(), diagonal, coupling, product })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply_signed(&self, u: &SpectralField, sign: f64) -> Result<SpectralField> {
        let mut out = self.product.apply(u)?;
        let c = Complex64::new(0.0, sign * self.coupling);
        out.modal_mut()
            .iter_mut()
            .zip(u.modal().iter().zip(&self.diagonal))
            .for_each(|(o, (v, d))| *o = *o * c + v * d);
        Ok(out)
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        self.apply_signed(u, 1.0)
    }

    /// The formal adjoint: the damping term changes sign.
    pub fn apply_adjoint(&self, u: &SpectralField) -> Result<SpectralField> {
        self.apply_signed(u, -1.0)
    }

    /// Dense matrix on modal coefficients in FFT order.
    pub fn dense_matrix(&self) -> Mat<Complex64> {
        let kernel = self.product.difference_kernel();
        let fine = self.product.fine_shape();
        let axes = self.grid.axes();
        let n = self.grid.len();
        let dims = axes.len();
        let modes: Vec<Vec<i64>> = (0..n)
            .map(|flat| {
                let mut idx = vec![0; dims];
                self.grid.unravel(flat, &mut idx);
                idx.iter().zip(axes).map(|(&j, a)| a.mode_number(j)).collect()
            })
            .collect();
        let c = Complex64::new(0.0, self.coupling);
        Mat::from_fn(n, n, |p, q| {
            let slot = modes[p]
                .iter()
                .zip(&modes[q])
                .zip(fine)
                .fold(0usize, |acc, ((a, b), &m)| acc * m + (a - b).rem_euclid(m as i64) as usize);
            let mut v = c * kernel[slot];
            if p == q {
                v += self.diagonal[p];
            }
            v
        })
    }

    /// Half-bandwidth of the coefficient in mode space, when it is a
    /// trigonometric polynomial of low degree on a one-axis grid.
    pub fn coefficient_bandwidth(&self) -> Option<usize> {
        if self.grid.dim() != 1 {
            return None;
        }
        let kernel = self.product.difference_kernel();
        let m = kernel.len();
        let peak = kernel.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let n = self.grid.len();
        let cutoff = 1e-14 * peak.max(f64::MIN_POSITIVE);
        let mut width = 0;
        for d in 1..m / 2 {
            if kernel[d].norm() > cutoff || kernel[m - d].norm() > cutoff {
                width = d;
            }
        }
        (width < n / 8).then_some(width)
    }

    /// Banded matrix in increasing mode order, available when
    /// [`Self::coefficient_bandwidth`] is.
    pub fn banded_matrix(&self) -> Option<BandedMatrix> {
        let width = self.coefficient_bandwidth()?;
        let kernel = self.product.difference_kernel();
        let m = kernel.len() as i64;
        let axis = &self.grid.axes()[0];
        let n = axis.modes;
        let half = (n / 2) as i64;
        let c = Complex64::new(0.0, self.coupling);
        let mut band = BandedMatrix::zeros(n, width, width);
        for row in 0..n {
            let mode_p = row as i64 - half;
            let slot_p = axis.slot_of(mode_p).expect("mode in range");
            for col in band.column_range(row) {
                let mode_q = col as i64 - half;
                let mut v = c * kernel[(mode_p - mode_q).rem_euclid(m) as usize];
                if row == col {
                    v += self.diagonal[slot_p];
                }
                band.set(row, col, v);
            }
        }
        Some(band)
    }

    /// LU factors of the discretization, banded when possible.
    pub fn factor(&self) -> Result<FactoredMatrix> {
        match self.banded_matrix() {
            Some(b) => FactoredMatrix::banded(b),
            None => FactoredMatrix::dense(self.dense_matrix()),
        }
    }
}

pub fn apply_operator(spec: &OperatorSpec, u: &SpectralField) -> Result<SpectralField> {
    DampedOperator::new(spec, u.grid())?.apply(u)
}

/// The box grid with every length divided by `alpha`, on which
/// `T_alpha u(x) = alpha^{d/2} u(alpha x)` lives.
pub fn scaled_grid(grid: &Grid, alpha: f64) -> Result<Grid> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {alpha}")));
    }
    if !grid.all_box() {
        return Err(Error::InvalidGrid("dilations act on truncated-box grids only".into()));
    }
    grid.stretched(1.0 / alpha)
}

/// The unitary dilation `u(x) -> alpha^{d/2} u(alpha x)`. On a box grid this
/// is exact: node values are kept and the box is rescaled by `1/alpha`.
pub fn dilate(u: &SpectralField, alpha: f64) -> Result<SpectralField> {
    let target = scaled_grid(u.grid(), alpha)?;
    dilate_onto(u, alpha, &target)
}

fn dilate_onto(u: &SpectralField, alpha: f64, target: &Grid) -> Result<SpectralField> {
    let factor = alpha.powf(0.5 * u.grid().dim() as f64);
    let modal = u.modal().iter().map(|c| c * factor).collect();
    SpectralField::from_modal(target, modal)
}

/// Relative defect of `T_a P_rescaled T_a^{-1} = lambda^{1/(gamma+1)} (Q0 - mu)`
/// with `a = lambda^{-1/(2 gamma + 2)}` and `mu = omega lambda^{-1/(gamma+1)}`,
/// tested on `u` (a field on the model-side grid).
pub fn conjugation_residual(
    damping: &DampingProfile,
    lambda: f64,
    omega: f64,
    u: &SpectralField,
) -> Result<f64> {
    let w = extend_homogeneous(damping)?;
    if !w.is_exact_power() {
        return Err(Error::UnsupportedDamping(
            "the scaling identity needs an exactly homogeneous coefficient".into(),
        ));
    }
    let gamma = damping.gamma;
    let alpha = lambda.powf(-1.0 / (2.0 * gamma + 2.0));
    let model_grid = u.grid().clone();
    let rescaled_grid = model_grid.stretched(alpha)?;
    let v = dilate_onto(u, 1.0 / alpha, &rescaled_grid)?;
    let pv = DampedOperator::new(&OperatorSpec::rescaled(damping.clone(), lambda, omega), &rescaled_grid)?
        .apply(&v)?;
    let lhs = dilate_onto(&pv, alpha, &model_grid)?;
    let scale = lambda.powf(1.0 / (gamma + 1.0));
    let mu = omega / scale;
    let mut rhs = DampedOperator::new(&OperatorSpec::model(damping.clone(), mu), &model_grid)?.apply(u)?;
    rhs.scale(Complex64::new(scale, 0.0));
    let denom = rhs.norm();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("test field is annihilated".into()));
    }
    Ok(lhs.distance(&rhs)? / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, AxisKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn circle(n: usize) -> Grid {
        make_grid((1, 0), &[n], &[2.0 * PI], &[AxisKind::Periodic]).unwrap()
    }

    fn boxed(n: usize, l: f64) -> Grid {
        make_grid((1, 0), &[n], &[l], &[AxisKind::TruncatedBox]).unwrap()
    }

    fn smooth_field(grid: &Grid) -> SpectralField {
        SpectralField::from_fn(grid, |x| {
            Complex64::new((-x[0] * x[0]).exp(), 0.3 * x[0] * (-x[0] * x[0]).exp())
        })
    }

    #[test]
    fn reduced_operator_on_plane_wave() {
        // b = 2 - 2cos x, so b e^{ix} = 2e^{ix} - e^{2ix} - 1.
        let g = circle(16);
        let b = DampingProfile::periodic_power(1.0, vec![0.0]).unwrap();
        let op = DampedOperator::new(&OperatorSpec::reduced(b, 3.0, 2.0), &g).unwrap();
        let u = SpectralField::from_fn(&g, |x| Complex64::from_polar(1.0, x[0]));
        let got = op.apply(&u).unwrap();
        let want = SpectralField::from_fn(&g, |x| {
            let e1 = Complex64::from_polar(1.0, x[0]);
            let e2 = Complex64::from_polar(1.0, 2.0 * x[0]);
            (1.0 - 2.0) * e1 + Complex64::new(0.0, 3.0) * (2.0 * e1 - e2 - 1.0)
        });
        assert!(got.distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn dense_and_banded_match_apply() {
        let g = circle(32);
        let b = DampingProfile::periodic_power(2.0, vec![0.0]).unwrap();
        let op = DampedOperator::new(&OperatorSpec::reduced(b, 5.0, 7.0), &g).unwrap();
        assert_eq!(op.coefficient_bandwidth(), Some(2));
        let u = SpectralField::from_fn(&g, |x| Complex64::new(x[0].sin().powi(3), x[0].cos()));
        let au = op.apply(&u).unwrap();
        let d = op.dense_matrix();
        for p in 0..32 {
            let v: Complex64 = (0..32).map(|q| d[(p, q)] * u.modal()[q]).sum();
            assert!((v - au.modal()[p]).norm() < 1e-10);
        }
        let band = op.banded_matrix().unwrap();
        let axis = &g.axes()[0];
        for row in 0..32 {
            for col in 0..32 {
                let sp = axis.slot_of(row as i64 - 16).unwrap();
                let sq = axis.slot_of(col as i64 - 16).unwrap();
                assert!((band.get(row, col) - d[(sp, sq)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn model_operator_rejects_periodic_grids() {
        let b = DampingProfile::radial_power(1.0, vec![0.0]).unwrap();
        assert!(DampedOperator::new(&OperatorSpec::model(b.clone(), 5.0), &circle(16)).is_err());
        assert!(DampedOperator::new(&OperatorSpec::model(b, 5.0), &boxed(16, 10.0)).is_ok());
    }

    #[test]
    fn reduced_operator_rejects_torus_dependent_damping() {
        use crate::damping::StripBands;
        let strip = DampingProfile::strip(
            StripBands { axes: vec![1], center: PI, half_width: 0.3, level: 1.0 },
            0.0,
        )
        .unwrap();
        assert!(DampedOperator::new(&OperatorSpec::reduced(strip, 2.0, 1.0), &circle(16)).is_err());
    }

    #[test]
    fn dilation_is_an_isometry() {
        let g = boxed(64, 12.0);
        let u = smooth_field(&g);
        for alpha in [0.3, 1.0, 2.5] {
            let v = dilate(&u, alpha).unwrap();
            assert!((v.norm() - u.norm()).abs() < 1e-12 * u.norm());
            let x = 0.7;
            let want = alpha.sqrt() * u.evaluate(&[alpha * x]);
            assert!((v.evaluate(&[x]) - want).norm() < 1e-10);
        }
    }

    #[test]
    fn conjugation_holds_at_two_resolutions() {
        let b = DampingProfile::radial_power(1.0, vec![0.0]).unwrap();
        for n in [128, 256] {
            let g = boxed(n, 16.0);
            let r = conjugation_residual(&b, 50.0, 30.0, &smooth_field(&g)).unwrap();
            assert!(r < 1e-10, "residual {r} at N = {n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn operator_is_linear(a in -2.0f64..2.0, c in -2.0f64..2.0, lambda in 0.5f64..20.0) {
            let g = boxed(32, 8.0);
            let b = DampingProfile::radial_power(1.5, vec![0.0]).unwrap();
            let op = DampedOperator::new(&OperatorSpec::rescaled(b, lambda, 3.0), &g).unwrap();
            let u = smooth_field(&g);
            let v = SpectralField::from_fn(&g, |x| Complex64::new(0.0, (-(x[0] - 1.0).powi(2)).exp()));
            let mut combo = u.scaled(Complex64::new(a, 0.0));
            combo.axpy(Complex64::new(0.0, c), &v).unwrap();
            let lhs = op.apply(&combo).unwrap();
            let mut rhs = op.apply(&u).unwrap().scaled(Complex64::new(a, 0.0));
            rhs.axpy(Complex64::new(0.0, c), &op.apply(&v).unwrap()).unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-10 * (1.0 + rhs.norm()));
        }

        #[test]
        fn damping_term_is_accretive(lambda in 0.5f64..30.0, omega in -50.0f64..50.0, seed in 0u64..100) {
            let g = circle(32);
            let b = DampingProfile::periodic_power(1.0, vec![0.0]).unwrap();
            let op = DampedOperator::new(&OperatorSpec::reduced(b, lambda, omega), &g).unwrap();
            let s = seed as f64;
            let u = SpectralField::from_fn(&g, |x| Complex64::new((x[0] + s).sin(), (2.0 * x[0] - s).cos()));
            let q = op.apply(&u).unwrap().inner(&u).unwrap();
            // Im <P u, u> = lambda <b u, u> >= 0.
            prop_assert!(q.im >= -1e-10);
            let adj = op.apply_adjoint(&u).unwrap().inner(&u).unwrap();
            prop_assert!((adj - q.conj()).norm() <= 1e-9 * (1.0 + q.norm()));
        }

        #[test]
        fn dilation_composes(a in 0.3f64..3.0, c in 0.3f64..3.0) {
            let g = boxed(32, 10.0);
            let u = smooth_field(&g);
            let two = dilate(&dilate(&u, a).unwrap(), c).unwrap();
            let one = dilate(&u, a * c).unwrap();
            let diff: f64 = two.modal().iter().zip(one.modal()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-10 * (1.0 + u.norm()));
        }
    }
}
