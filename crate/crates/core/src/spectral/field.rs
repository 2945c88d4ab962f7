use num_complex::Complex64;

use super::fft::{transform, Direction};
use super::grid::Grid;
use crate::error::{Error, Result};

/// A grid function stored by its modal (FFT) coefficients, taken relative
/// to the first node of each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    modal: Vec<Complex64>,
}

fn check_len(grid: &Grid, got: usize) -> Result<()> {
    if got != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got,
        });
    }
    Ok(())
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            modal: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_modal(grid: &Grid, modal: Vec<Complex64>) -> Result<Self> {
        check_len(grid, modal.len())?;
        Ok(Self {
            grid: grid.clone(),
            modal,
        })
    }

    pub fn from_nodal(grid: &Grid, mut nodal: Vec<Complex64>) -> Result<Self> {
        check_len(grid, nodal.len())?;
        transform(&mut nodal, &grid.shape(), Direction::Forward);
        Ok(Self {
            grid: grid.clone(),
            modal: nodal,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let nodal = (0..grid.len())
            .map(|flat| {
                grid.node_into(flat, &mut x);
                f(&x)
            })
            .collect();
        Self::from_nodal(grid, nodal).expect("length matches by construction")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn modal(&self) -> &[Complex64] {
        &self.modal
    }

    pub fn modal_mut(&mut self) -> &mut [Complex64] {
        &mut self.modal
    }

    pub fn into_modal(self) -> Vec<Complex64> {
        self.modal
    }

    pub fn to_nodal(&self) -> Vec<Complex64> {
        let mut nodal = self.modal.clone();
        transform(&mut nodal, &self.grid.shape(), Direction::Inverse);
        nodal
    }

    /// Band-limited interpolant evaluated at an arbitrary point.
    pub fn evaluate(&self, x: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut k = vec![0.0; self.grid.dim()];
        let origin: Vec<f64> = self.grid.axes().iter().map(|a| a.origin()).collect();
        for (flat, c) in self.modal.iter().enumerate() {
            self.grid.wavevector_into(flat, &mut k);
            let phase: f64 = k
                .iter()
                .zip(x.iter().zip(&origin))
                .map(|(k, (x, o))| k * (x - o))
                .sum();
            acc += c * Complex64::from_polar(1.0, phase);
        }
        acc / self.grid.len() as f64
    }

    pub fn norm_sqr(&self) -> f64 {
        self.modal.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.plancherel_weight()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self, other> = integral of self * conj(other)`.
    pub fn inner(&self, other: &SpectralField) -> Result<Complex64> {
        self.same_grid(other)?;
        let s: Complex64 = self
            .modal
            .iter()
            .zip(&other.modal)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.grid.plancherel_weight())
    }

    pub fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "fields live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.modal.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: Complex64, x: &SpectralField) -> Result<()> {
        self.same_grid(x)?;
        self.modal
            .iter_mut()
            .zip(&x.modal)
            .for_each(|(s, v)| *s += a * v);
        Ok(())
    }

    pub fn distance(&self, other: &SpectralField) -> Result<f64> {
        self.same_grid(other)?;
        let s: f64 = self
            .modal
            .iter()
            .zip(&other.modal)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.plancherel_weight()).sqrt())
    }
}
