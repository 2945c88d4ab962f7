//! Tensor Fourier grids, spectral fields and the partial Fourier
//! decomposition along the torus factor.

mod fft;
mod field;
mod grid;

pub use field::SpectralField;
pub use grid::{make_grid, Axis, AxisKind, Grid};

pub(crate) use fft::{transform, Direction};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn to_modal(grid: &Grid, nodal: Vec<Complex64>) -> Result<SpectralField> {
    SpectralField::from_nodal(grid, nodal)
}

pub fn to_nodal(field: &SpectralField) -> Vec<Complex64> {
    field.to_nodal()
}

/// Multiplies every modal coefficient by `symbol(k)`.
pub fn fourier_multiplier(
    field: &SpectralField,
    symbol: impl Fn(&[f64]) -> Complex64,
) -> SpectralField {
    let grid = field.grid();
    let mut k = vec![0.0; grid.dim()];
    let modal = field
        .modal()
        .iter()
        .enumerate()
        .map(|(flat, c)| {
            grid.wavevector_into(flat, &mut k);
            c * symbol(&k)
        })
        .collect();
    SpectralField::from_modal(grid, modal).expect("same grid")
}

/// `(sum (|k|^2 + lambda^2)^s |u_k|^2)^{1/2}`, the `lambda`-weighted `H^s` norm.
pub fn sobolev_norm(field: &SpectralField, s: f64, lambda: f64) -> Result<f64> {
    if s < 0.0 && lambda <= 0.0 {
        return Err(Error::InvalidParameter(
            "negative order needs a positive weight parameter".into(),
        ));
    }
    let grid = field.grid();
    let k2 = grid.squared_wavenumbers();
    let acc: f64 = field
        .modal()
        .iter()
        .zip(&k2)
        .map(|(c, k2)| {
            let w = k2 + lambda * lambda;
            let weight = if w == 0.0 { 0.0 } else { w.powf(s) };
            weight * c.norm_sqr()
        })
        .sum();
    Ok((acc * grid.plancherel_weight()).sqrt())
}

/// Largest modal magnitude among wavevectors with some component above
/// 80% of that axis' cutoff, relative to the largest magnitude overall. A
/// small value means the field is resolved on its grid.
pub fn spectral_tail(field: &SpectralField) -> f64 {
    let grid = field.grid();
    let cutoffs: Vec<f64> = grid.axes().iter().map(|a| 0.8 * a.max_wavenumber()).collect();
    let mut k = vec![0.0; grid.dim()];
    let (mut tail, mut peak) = (0.0f64, 0.0f64);
    for (flat, c) in field.modal().iter().enumerate() {
        let m = c.norm();
        peak = peak.max(m);
        grid.wavevector_into(flat, &mut k);
        if k.iter().zip(&cutoffs).any(|(k, cut)| k.abs() > *cut) {
            tail = tail.max(m);
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        tail / peak
    }
}

/// One Fourier mode of a field in the torus variables: `slice(x') =
/// (1/|T|) integral u(x', x'') e^{-i k.x''} dx''`.
#[derive(Debug, Clone)]
pub struct PartialMode {
    pub torus_mode: Vec<i64>,
    pub wavevector: Vec<f64>,
    pub slice: SpectralField,
}

/// Total torus volume, the Parseval constant of the partial decomposition.
pub fn torus_volume(grid: &Grid) -> f64 {
    grid.axes()[grid.interior_dims()..]
        .iter()
        .map(|a| a.length)
        .product()
}

/// Decomposes `u` into its partial Fourier modes in `x''`, so that
/// `||u||^2 = |T| sum_k ||slice_k||^2`.
pub fn partial_modes(field: &SpectralField) -> Result<Vec<PartialMode>> {
    let grid = field.grid();
    let Some(torus) = grid.torus_grid() else {
        return Err(Error::InvalidGrid(
            "partial modes need at least one torus axis".into(),
        ));
    };
    let interior = if grid.interior_dims() == 0 {
        Grid::point()
    } else {
        grid.interior_grid()
    };
    let t_len = torus.len();
    let i_len = interior.len();
    let scale = 1.0 / t_len as f64;
    let mut idx = vec![0; torus.dim()];
    let mut k = vec![0.0; torus.dim()];
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        torus.unravel(t, &mut idx);
        torus.wavevector_into(t, &mut k);
        let modal: Vec<Complex64> = (0..i_len)
            .map(|p| field.modal()[p * t_len + t] * scale)
            .collect();
        out.push(PartialMode {
            torus_mode: idx
                .iter()
                .zip(torus.axes())
                .map(|(&j, a)| a.mode_number(j))
                .collect(),
            wavevector: k.clone(),
            slice: SpectralField::from_modal(&interior, modal)?,
        });
    }
    Ok(out)
}

fn padded_modes(n: usize) -> usize {
    let m = (3 * n).div_ceil(2);
    m + m % 2
}

/// Pointwise multiplication by a fixed real coefficient, carried out on a
/// 3/2-padded grid and truncated back. As a matrix on modal coefficients it
/// is `B[p][m] = w_hat[(p - m) mod M] / M`, Hermitian and positive
/// semidefinite whenever the coefficient is nonnegative.
#[derive(Debug, Clone)]
pub struct DealiasedProduct {
    grid: Grid,
    fine_shape: Vec<usize>,
    slots: Vec<usize>,
    samples: Vec<f64>,
}

impl DealiasedProduct {
    pub fn new(grid: &Grid, coefficient: impl Fn(&[f64]) -> f64) -> Self {
        let fine_shape: Vec<usize> = grid.axes().iter().map(|a| padded_modes(a.modes)).collect();
        let fine_axes: Vec<Axis> = grid
            .axes()
            .iter()
            .zip(&fine_shape)
            .map(|(a, &m)| Axis {
                kind: a.kind,
                modes: m,
                length: a.length,
            })
            .collect();
        let fine = Grid::new(grid.interior_dims(), grid.torus_dims(), fine_axes)
            .expect("padded axes stay valid");
        let mut x = vec![0.0; grid.dim()];
        let samples = (0..fine.len())
            .map(|flat| {
                fine.node_into(flat, &mut x);
                coefficient(&x)
            })
            .collect();
        let mut idx = vec![0; grid.dim()];
        let slots = (0..grid.len())
            .map(|flat| {
                grid.unravel(flat, &mut idx);
                let fine_idx: Vec<usize> = idx
                    .iter()
                    .zip(grid.axes().iter().zip(fine.axes()))
                    .map(|(&j, (a, f))| f.slot_of(a.mode_number(j)).expect("padded grid is finer"))
                    .collect();
                fine.ravel(&fine_idx)
            })
            .collect();
        Self {
            grid: grid.clone(),
            fine_shape,
            slots,
            samples,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fine_shape(&self) -> &[usize] {
        &self.fine_shape
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn apply(&self, field: &SpectralField) -> Result<SpectralField> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch(
                "field grid differs from the product grid".into(),
            ));
        }
        let n = self.grid.len() as f64;
        let m = self.samples.len() as f64;
        let mut fine = vec![Complex64::new(0.0, 0.0); self.samples.len()];
        for (c, &slot) in field.modal().iter().zip(&self.slots) {
            fine[slot] = c * (m / n);
        }
        transform(&mut fine, &self.fine_shape, Direction::Inverse);
        fine.iter_mut()
            .zip(&self.samples)
            .for_each(|(v, w)| *v *= w);
        transform(&mut fine, &self.fine_shape, Direction::Forward);
        let modal = self.slots.iter().map(|&s| fine[s] * (n / m)).collect();
        SpectralField::from_modal(&self.grid, modal)
    }

    /// Forward transform of the fine-grid samples divided by the fine size:
    /// the entries of the product matrix indexed by mode difference.
    pub fn difference_kernel(&self) -> Vec<Complex64> {
        let m = self.samples.len() as f64;
        let mut fine: Vec<Complex64> = self
            .samples
            .iter()
            .map(|&w| Complex64::new(w, 0.0))
            .collect();
        transform(&mut fine, &self.fine_shape, Direction::Forward);
        fine.iter_mut().for_each(|v| *v /= m);
        fine
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn torus2(n0: usize, n1: usize) -> Grid {
        make_grid((1, 1), &[n0, n1], &[2.0 * PI, 2.0 * PI], &[AxisKind::Periodic; 2]).unwrap()
    }

    #[test]
    fn plane_wave_has_unit_norm_after_scaling() {
        let g = torus2(16, 8);
        let u = SpectralField::from_fn(&g, |x| Complex64::from_polar(1.0, 3.0 * x[0] - 2.0 * x[1]));
        assert!((u.norm_sqr() - 4.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn derivative_multiplier_is_exact_on_trig_polynomials() {
        let g = make_grid((1, 0), &[32], &[2.0 * PI], &[AxisKind::Periodic]).unwrap();
        let u = SpectralField::from_fn(&g, |x| Complex64::new((3.0 * x[0]).sin(), 0.0));
        let du = fourier_multiplier(&u, |k| Complex64::new(0.0, k[0]));
        let nodal = du.to_nodal();
        for (j, v) in nodal.iter().enumerate() {
            let x = g.axes()[0].node(j);
            assert!((v.re - 3.0 * (3.0 * x).cos()).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn box_axis_multiplier_ignores_origin_shift() {
        let g = make_grid((1, 0), &[64], &[10.0], &[AxisKind::TruncatedBox]).unwrap();
        let k0 = 2.0 * PI * 3.0 / 10.0;
        let u = SpectralField::from_fn(&g, |x| Complex64::from_polar(1.0, k0 * x[0]));
        let lap = fourier_multiplier(&u, |k| Complex64::new(k[0] * k[0], 0.0));
        let expect = u.scaled(Complex64::new(k0 * k0, 0.0));
        assert!(lap.distance(&expect).unwrap() < 1e-10);
        let v = u.evaluate(&[1.234]);
        assert!((v - Complex64::from_polar(1.0, k0 * 1.234)).norm() < 1e-10);
    }

    #[test]
    fn sobolev_norm_of_single_mode() {
        let g = make_grid((1, 0), &[16], &[2.0 * PI], &[AxisKind::Periodic]).unwrap();
        let u = SpectralField::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * x[0]));
        let n = sobolev_norm(&u, 1.0, 1.0).unwrap();
        assert!((n * n - 5.0 * 2.0 * PI).abs() < 1e-10);
        assert!(sobolev_norm(&u, -1.0, 0.0).is_err());
    }

    #[test]
    fn dealiased_product_is_exact_for_low_degree_products() {
        let g = make_grid((1, 0), &[16], &[2.0 * PI], &[AxisKind::Periodic]).unwrap();
        let prod = DealiasedProduct::new(&g, |x| 2.0 - 2.0 * x[0].cos());
        let u = SpectralField::from_fn(&g, |x| Complex64::new((2.0 * x[0]).sin(), 0.0));
        let got = prod.apply(&u).unwrap();
        let want = SpectralField::from_fn(&g, |x| {
            Complex64::new((2.0 - 2.0 * x[0].cos()) * (2.0 * x[0]).sin(), 0.0)
        });
        assert!(got.distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn difference_kernel_reproduces_apply() {
        let g = make_grid((1, 0), &[12], &[3.0], &[AxisKind::TruncatedBox]).unwrap();
        let prod = DealiasedProduct::new(&g, |x| x[0] * x[0]);
        let kernel = prod.difference_kernel();
        let m = prod.fine_shape()[0] as i64;
        let u = SpectralField::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), x[0]));
        let got = prod.apply(&u).unwrap();
        let axis = &g.axes()[0];
        for p in 0..12 {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..12 {
                let d = (axis.mode_number(p) - axis.mode_number(q)).rem_euclid(m) as usize;
                acc += kernel[d] * u.modal()[q];
            }
            assert!((acc - got.modal()[p]).norm() < 1e-12 * (1.0 + acc.norm()));
        }
    }

    #[test]
    fn partial_modes_without_interior_axes() {
        let g = make_grid((0, 1), &[8], &[2.0 * PI], &[AxisKind::Periodic]).unwrap();
        let u = SpectralField::from_fn(&g, |x| Complex64::from_polar(2.0, 3.0 * x[0]));
        let modes = partial_modes(&u).unwrap();
        let hit = modes.iter().find(|m| m.torus_mode == vec![3]).unwrap();
        assert!((hit.slice.modal()[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    fn arb_field() -> impl Strategy<Value = SpectralField> {
        (
            prop::sample::select(vec![4usize, 8, 12]),
            prop::sample::select(vec![2usize, 6, 8]),
            prop::collection::vec(-1.0f64..1.0, 2 * 12 * 8),
        )
            .prop_map(|(n0, n1, vals)| {
                let g = make_grid(
                    (1, 1),
                    &[n0, n1],
                    &[3.0, 2.0 * PI],
                    &[AxisKind::TruncatedBox, AxisKind::Periodic],
                )
                .unwrap();
                let nodal = (0..g.len())
                    .map(|i| Complex64::new(vals[2 * i], vals[2 * i + 1]))
                    .collect();
                to_modal(&g, nodal).unwrap()
            })
    }

    proptest! {
        #[test]
        fn modal_round_trip_is_identity(u in arb_field()) {
            let back = to_modal(u.grid(), to_nodal(&u)).unwrap();
            let err = back.distance(&u).unwrap();
            prop_assert!(err <= 1e-12 * (1.0 + u.norm()));
        }

        #[test]
        fn parseval_holds(u in arb_field()) {
            let nodal = to_nodal(&u);
            let direct: f64 = nodal.iter().map(|v| v.norm_sqr()).sum::<f64>() * u.grid().cell_volume();
            prop_assert!((direct - u.norm_sqr()).abs() <= 1e-12 * (1.0 + direct));
        }

        #[test]
        fn partial_modes_satisfy_parseval(u in arb_field()) {
            let modes = partial_modes(&u).unwrap();
            let sum: f64 = modes.iter().map(|m| m.slice.norm_sqr()).sum();
            let lhs = u.norm_sqr();
            prop_assert!((lhs - torus_volume(u.grid()) * sum).abs() <= 1e-12 * (1.0 + lhs));
        }

        #[test]
        fn product_matrix_is_positive(u in arb_field()) {
            let prod = DealiasedProduct::new(u.grid(), |x| x[0] * x[0] + (x[1]).sin().powi(2));
            let bu = prod.apply(&u).unwrap();
            let q = bu.inner(&u).unwrap();
            prop_assert!(q.re >= -1e-12 * (1.0 + u.norm_sqr()));
            prop_assert!(q.im.abs() <= 1e-10 * (1.0 + u.norm_sqr()));
        }
    }
}
