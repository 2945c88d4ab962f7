use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary treatment of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    /// Nodes `j L / N` on a circle of circumference `L`.
    Periodic,
    /// Nodes `-L/2 + j L / N`; the box is treated as periodic, so fields must
    /// vanish near its walls for results to mean anything on the full line.
    TruncatedBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    pub modes: usize,
    pub length: f64,
}

impl Axis {
    pub fn new(kind: AxisKind, modes: usize, length: f64) -> Result<Self> {
        if modes < 2 || !modes.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "mode count must be even and at least 2, got {modes}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "axis length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { kind, modes, length })
    }

    pub fn origin(&self) -> f64 {
        match self.kind {
            AxisKind::Periodic => 0.0,
            AxisKind::TruncatedBox => -0.5 * self.length,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.modes as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.origin() + j as f64 * self.spacing()
    }

    /// Signed mode number stored at FFT slot `j`, in `[-N/2, N/2 - 1]`.
    pub fn mode_number(&self, j: usize) -> i64 {
        let n = self.modes as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// FFT slot holding signed mode `m`, if the axis resolves it.
    pub fn slot_of(&self, m: i64) -> Option<usize> {
        let n = self.modes as i64;
        if m < -n / 2 || m >= n / 2 {
            None
        } else if m >= 0 {
            Some(m as usize)
        } else {
            Some((n + m) as usize)
        }
    }

    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * self.mode_number(j) as f64 / self.length
    }

    pub fn max_wavenumber(&self) -> f64 {
        PI * self.modes as f64 / self.length
    }
}

/// Tensor grid on `M' x T^{n''}`: the first `interior_dims` axes carry the
/// `x'` variables, the remaining `torus_dims` axes are periodic `x''` axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    interior_dims: usize,
    torus_dims: usize,
    axes: Vec<Axis>,
}

pub fn make_grid(
    dims: (usize, usize),
    modes: &[usize],
    lengths: &[f64],
    kinds: &[AxisKind],
) -> Result<Grid> {
    let total = dims.0 + dims.1;
    if modes.len() != total || lengths.len() != total || kinds.len() != total {
        return Err(Error::InvalidGrid(format!(
            "expected {total} axes, got {} mode counts, {} lengths, {} kinds",
            modes.len(),
            lengths.len(),
            kinds.len()
        )));
    }
    let axes = (0..total)
        .map(|a| Axis::new(kinds[a], modes[a], lengths[a]))
        .collect::<Result<Vec<_>>>()?;
    Grid::new(dims.0, dims.1, axes)
}

impl Grid {
    pub fn new(interior_dims: usize, torus_dims: usize, axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("a grid needs at least one axis".into()));
        }
        if axes.len() != interior_dims + torus_dims {
            return Err(Error::InvalidGrid(format!(
                "{} axes do not match the split ({interior_dims}, {torus_dims})",
                axes.len()
            )));
        }
        if axes[interior_dims..]
            .iter()
            .any(|a| a.kind != AxisKind::Periodic)
        {
            return Err(Error::InvalidGrid("torus axes must be periodic".into()));
        }
        Ok(Self {
            interior_dims,
            torus_dims,
            axes,
        })
    }

    /// Zero-dimensional grid: a single node, used for the `x'` factor when
    /// `n' = 0`.
    pub(crate) fn point() -> Self {
        Self {
            interior_dims: 0,
            torus_dims: 0,
            axes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn interior_dims(&self) -> usize {
        self.interior_dims
    }

    pub fn torus_dims(&self) -> usize {
        self.torus_dims
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.modes).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.modes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Factor turning `sum |c|^2` over modal coefficients into the squared
    /// L2 norm: `V / N^2`.
    pub fn plancherel_weight(&self) -> f64 {
        let n = self.len() as f64;
        self.volume() / (n * n)
    }

    /// Row-major multi-index (last axis fastest) of a flat index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (a, axis) in self.axes.iter().enumerate().rev() {
            out[a] = flat % axis.modes;
            flat /= axis.modes;
        }
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.modes + i)
    }

    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let mut flat = flat;
        for (a, axis) in self.axes.iter().enumerate().rev() {
            out[a] = axis.node(flat % axis.modes);
            flat /= axis.modes;
        }
    }

    pub fn wavevector_into(&self, flat: usize, out: &mut [f64]) {
        let mut flat = flat;
        for (a, axis) in self.axes.iter().enumerate().rev() {
            out[a] = axis.wavenumber(flat % axis.modes);
            flat /= axis.modes;
        }
    }

    /// `|k|^2` for every modal slot.
    pub fn squared_wavenumbers(&self) -> Vec<f64> {
        let mut k = vec![0.0; self.dim()];
        (0..self.len())
            .map(|flat| {
                self.wavevector_into(flat, &mut k);
                k.iter().map(|v| v * v).sum()
            })
            .collect()
    }

    /// The grid on the `x'` factor alone.
    pub fn interior_grid(&self) -> Grid {
        Grid {
            interior_dims: self.interior_dims,
            torus_dims: 0,
            axes: self.axes[..self.interior_dims].to_vec(),
        }
    }

    /// The grid on the torus factor alone (as a purely periodic grid).
    pub fn torus_grid(&self) -> Option<Grid> {
        if self.torus_dims == 0 {
            return None;
        }
        Some(Grid {
            interior_dims: 0,
            torus_dims: self.torus_dims,
            axes: self.axes[self.interior_dims..].to_vec(),
        })
    }

    /// Same axes with mode counts multiplied by `mode_factor` and box lengths
    /// (periodic axes are left alone) multiplied by `box_factor`.
    pub fn refined(&self, mode_factor: usize, box_factor: f64) -> Result<Grid> {
        let axes = self
            .axes
            .iter()
            .map(|a| {
                let length = match a.kind {
                    AxisKind::Periodic => a.length,
                    AxisKind::TruncatedBox => a.length * box_factor,
                };
                Axis::new(a.kind, a.modes * mode_factor, length)
            })
            .collect::<Result<Vec<_>>>()?;
        Grid::new(self.interior_dims, self.torus_dims, axes)
    }

    /// Same geometry with every axis length multiplied by `factor`.
    pub fn stretched(&self, factor: f64) -> Result<Grid> {
        let axes = self
            .axes
            .iter()
            .map(|a| Axis::new(a.kind, a.modes, a.length * factor))
            .collect::<Result<Vec<_>>>()?;
        Grid::new(self.interior_dims, self.torus_dims, axes)
    }

    pub fn all_box(&self) -> bool {
        self.axes.iter().all(|a| a.kind == AxisKind::TruncatedBox)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_grid_counts_modes() {
        let g = make_grid(
            (1, 1),
            &[64, 64],
            &[2.0 * PI, 2.0 * PI],
            &[AxisKind::Periodic; 2],
        )
        .unwrap();
        assert_eq!(g.len(), 4096);
        assert!((g.volume() - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn box_nodes_are_centred() {
        let g = make_grid((1, 0), &[128], &[40.0], &[AxisKind::TruncatedBox]).unwrap();
        let a = &g.axes()[0];
        assert_eq!(a.node(0), -20.0);
        assert_eq!(a.node(64), 0.0);
        assert!((a.spacing() - 40.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn mode_numbers_are_symmetric() {
        let a = Axis::new(AxisKind::Periodic, 8, 2.0 * PI).unwrap();
        let m: Vec<i64> = (0..8).map(|j| a.mode_number(j)).collect();
        assert_eq!(m, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for j in 0..8 {
            assert_eq!(a.slot_of(a.mode_number(j)), Some(j));
        }
        assert_eq!(a.slot_of(4), None);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(make_grid((1, 0), &[7], &[1.0], &[AxisKind::Periodic]).is_err());
        assert!(make_grid((1, 0), &[8], &[-1.0], &[AxisKind::Periodic]).is_err());
        assert!(make_grid((0, 1), &[8], &[1.0], &[AxisKind::TruncatedBox]).is_err());
        assert!(make_grid((1, 1), &[8], &[1.0], &[AxisKind::Periodic]).is_err());
    }

    #[test]
    fn ravel_round_trips() {
        let g = make_grid(
            (2, 1),
            &[4, 6, 8],
            &[1.0, 1.0, 1.0],
            &[AxisKind::Periodic; 3],
        )
        .unwrap();
        let mut idx = [0; 3];
        for flat in 0..g.len() {
            g.unravel(flat, &mut idx);
            assert_eq!(g.ravel(&idx), flat);
        }
    }
}
