//! Complex banded and dense factorizations and the smallest singular value
//! solver built on them.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square band matrix: entries `(i, j)` with `-lower <= j - i <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![ZERO; n * (lower + upper + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize;
        if off < -(self.lower as isize) || off > self.upper as isize || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (self.lower + self.upper + 1) + (off + self.lower as isize) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.slot(i, j).map_or(ZERO, |s| self.data[s])
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside the band"));
        self.data[s] = v;
    }

    pub fn column_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.column_range(i).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    pub fn adjoint_matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (i, xi) in x.iter().enumerate() {
            for j in self.column_range(i) {
                y[j] += self.get(i, j).conj() * xi;
            }
        }
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn factor(&self) -> Result<BandedLu> {
        BandedLu::new(self)
    }
}

/// LU factorization with partial pivoting of a band matrix; the upper
/// factor gains `lower` extra superdiagonals of fill.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn new(a: &BandedMatrix) -> Result<Self> {
        let (n, kl) = (a.n, a.lower);
        let ku = a.upper + kl;
        let width = 2 * kl + a.upper + 1;
        let mut lu = Self {
            n,
            lower: kl,
            upper: ku,
            width,
            data: vec![ZERO; n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for j in a.column_range(i) {
                *lu.at(i, j) = a.get(i, j);
            }
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (mut p, mut best) = (k, -1.0);
            for i in k..=last {
                let v = lu.val(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            lu.pivots[k] = p;
            let end = (k + ku).min(n - 1);
            if p != k {
                for j in k..=end {
                    let a = lu.val(k, j);
                    let b = lu.val(p, j);
                    *lu.at(k, j) = b;
                    *lu.at(p, j) = a;
                }
            }
            let pivot = lu.val(k, k);
            for i in k + 1..=last {
                let l = lu.val(i, k) / pivot;
                *lu.at(i, k) = l;
                if l != ZERO {
                    for j in k + 1..=end {
                        let u = lu.val(k, j);
                        *lu.at(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.lower - i)
    }

    #[inline]
    fn val(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.index(i, j)]
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut Complex64 {
        let s = self.index(i, j);
        &mut self.data[s]
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &mut [Complex64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for i in k + 1..=(k + self.lower).min(n - 1) {
                b[i] -= self.val(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + self.upper).min(n - 1) {
                acc -= self.val(k, j) * b[j];
            }
            b[k] = acc / self.val(k, k);
        }
    }

    /// Solves `A^* x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_adjoint(&self, b: &mut [Complex64]) {
        let n = self.n;
        for k in 0..n {
            let mut acc = b[k];
            for j in k.saturating_sub(self.upper)..k {
                acc -= self.val(j, k).conj() * b[j];
            }
            b[k] = acc / self.val(k, k).conj();
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for i in k + 1..=(k + self.lower).min(n - 1) {
                acc -= self.val(i, k).conj() * b[i];
            }
            b[k] = acc;
            b.swap(k, self.pivots[k]);
        }
    }
}

/// A square matrix together with its LU factors.
pub enum FactoredMatrix {
    Dense {
        matrix: Mat<Complex64>,
        lu: PartialPivLu<Complex64>,
    },
    Banded {
        matrix: BandedMatrix,
        lu: BandedLu,
    },
}

fn block_to_mat(cols: &[Vec<Complex64>]) -> Mat<Complex64> {
    Mat::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
}

fn mat_to_block(m: &Mat<Complex64>, cols: &mut [Vec<Complex64>]) {
    for (j, col) in cols.iter_mut().enumerate() {
        for (i, v) in col.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
}

impl FactoredMatrix {
    pub fn dense(matrix: Mat<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix must be square and nonempty".into()));
        }
        let lu = matrix.partial_piv_lu();
        // faer does not report singularity; check the diagonal of U.
        let u = lu.U();
        for k in 0..u.nrows() {
            let d = u[(k, k)];
            if !(d.norm() > 0.0) || !d.norm().is_finite() {
                return Err(Error::Singular(k));
            }
        }
        Ok(Self::Dense { matrix, lu })
    }

    pub fn banded(matrix: BandedMatrix) -> Result<Self> {
        let lu = matrix.factor()?;
        Ok(Self::Banded { matrix, lu })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense { matrix, .. } => matrix.nrows(),
            Self::Banded { matrix, .. } => matrix.dim(),
        }
    }

    fn apply_block(&self, cols: &[Vec<Complex64>], adjoint: bool) -> Vec<Vec<Complex64>> {
        match self {
            Self::Dense { matrix, .. } => {
                let x = block_to_mat(cols);
                let y = if adjoint {
                    matrix.adjoint() * &x
                } else {
                    matrix * &x
                };
                let mut out = vec![vec![ZERO; matrix.nrows()]; cols.len()];
                mat_to_block(&y, &mut out);
                out
            }
            Self::Banded { matrix, .. } => cols
                .iter()
                .map(|c| {
                    let mut y = vec![ZERO; c.len()];
                    if adjoint {
                        matrix.adjoint_matvec(c, &mut y);
                    } else {
                        matrix.matvec(c, &mut y);
                    }
                    y
                })
                .collect(),
        }
    }

    /// Replaces every column `v` by `(A^* A)^{-1} v`.
    fn solve_normal_block(&self, cols: &mut [Vec<Complex64>]) {
        match self {
            Self::Dense { lu, .. } => {
                let mut x = block_to_mat(cols);
                lu.solve_adjoint_in_place(x.as_mut());
                lu.solve_in_place(x.as_mut());
                mat_to_block(&x, cols);
            }
            Self::Banded { lu, .. } => {
                for c in cols.iter_mut() {
                    lu.solve_adjoint(c);
                    lu.solve(c);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaMinOptions {
    /// Relative accuracy certified by the singular-pair residual.
    pub tolerance: f64,
    /// Number of restarts allowed.
    pub max_iterations: usize,
    pub block_size: usize,
    /// Krylov blocks generated per restart.
    pub krylov_depth: usize,
    pub seed: u64,
}

impl Default for SigmaMinOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 200,
            block_size: 4,
            krylov_depth: 6,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SigmaMin {
    pub sigma: f64,
    /// Restarts used.
    pub iterations: usize,
    /// `||M v - theta v|| / theta` with `M = (A^* A)^{-1}` and `theta` the
    /// Rayleigh quotient of the returned right singular vector `v`.
    pub residual: f64,
    /// Estimated bound on the relative error of `sigma`, from the residual
    /// and the Ritz gap.
    pub error_bound: f64,
    /// Right singular vector.
    pub vector: Vec<Complex64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn random_column(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Orthonormalizes `cols[start..]` against everything before it, with two
/// Gram-Schmidt passes. Collapsed columns are replaced by random vectors.
fn orthonormalize_from(cols: &mut [Vec<Complex64>], start: usize, rng: &mut ChaCha8Rng) {
    for j in start..cols.len() {
        for attempt in 0..4 {
            let before = norm(&cols[j]);
            for _ in 0..2 {
                let (head, tail) = cols.split_at_mut(j);
                for q in head.iter() {
                    let c = dot(q, &tail[0]);
                    tail[0].iter_mut().zip(q).for_each(|(v, q)| *v -= c * q);
                }
            }
            let after = norm(&cols[j]);
            if after > 1e-10 * before && after > 0.0 {
                cols[j].iter_mut().for_each(|v| *v /= after);
                break;
            }
            assert!(attempt < 3, "cannot complete an orthonormal block");
            cols[j] = random_column(rng, cols[j].len());
        }
    }
}

/// Smallest singular value of a factored matrix. Each restart builds a block
/// Krylov space of `(A^* A)^{-1}` from the current block, then keeps the
/// Ritz vectors of the smallest singular values of `A` on that space. The
/// iteration stops once the singular-pair residual certifies the requested
/// relative accuracy and the estimate has settled.
pub fn sigma_min(matrix: &FactoredMatrix, options: &SigmaMinOptions) -> Result<SigmaMin> {
    let n = matrix.dim();
    let p = options.block_size.clamp(1, (n / 2).max(1));
    let depth = options.krylov_depth.min((n - p) / p);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut block: Vec<Vec<Complex64>> = (0..p)
        .map(|j| {
            if j == 0 {
                vec![Complex64::new(1.0, 0.0); n]
            } else {
                random_column(&mut rng, n)
            }
        })
        .collect();
    orthonormalize_from(&mut block, 0, &mut rng);
    let mut previous = f64::INFINITY;
    let mut last = (f64::NAN, f64::INFINITY);
    for iteration in 1..=options.max_iterations {
        let mut basis = block.clone();
        for _ in 0..depth {
            let mut next = basis[basis.len() - p..].to_vec();
            matrix.solve_normal_block(&mut next);
            if next.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Singular(0));
            }
            let start = basis.len();
            basis.extend(next);
            orthonormalize_from(&mut basis, start, &mut rng);
        }
        let m = basis.len();
        let image = matrix.apply_block(&basis, false);
        let svd = block_to_mat(&image)
            .thin_svd()
            .map_err(|_| Error::NonConvergence {
                iterations: iteration,
                estimate: f64::NAN,
                residual: f64::NAN,
            })?;
        let (s, w) = (svd.S().column_vector(), svd.V());
        let combine = |cols: &[Vec<Complex64>], c: usize| -> Vec<Complex64> {
            (0..n)
                .map(|i| (0..m).map(|k| cols[k][i] * w[(k, c)]).sum())
                .collect()
        };
        // Keep the Ritz vectors of the p smallest values, smallest last.
        block = (m - p..m).map(|c| combine(&basis, c)).collect();
        let sigma = s[m - 1].re;
        // Certify through the eigenproblem of M = (A^* A)^{-1}, whose
        // residual is computed with forward error ~ eps cond(A) instead of
        // the eps cond(A)^2 a residual through A^* A would carry.
        let v = block[p - 1].clone();
        let mut mv = vec![v.clone()];
        matrix.solve_normal_block(&mut mv);
        let theta = dot(&v, &mv[0]).re;
        let rho = mv[0]
            .iter()
            .zip(&v)
            .map(|(y, v)| (y - theta * v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let residual = rho / theta;
        // Hermitian bounds: |theta - theta_max| <= rho, and <= rho^2 / gap
        // when the rest of the spectrum of M lies below theta - gap.
        let gap = if m > 1 { theta - 1.0 / s[m - 2].re.powi(2) } else { f64::INFINITY };
        let quadratic = if gap > 0.0 { rho * rho / (theta * gap) } else { f64::INFINITY };
        let error_bound = 0.5 * residual.min(quadratic);
        orthonormalize_from(&mut block, 0, &mut rng);
        last = (sigma, error_bound);
        let settled = (previous - sigma).abs() <= options.tolerance * sigma;
        if error_bound <= options.tolerance && settled {
            return Ok(SigmaMin { sigma, iterations: iteration, residual, error_bound, vector: v });
        }
        previous = sigma;
    }
    Err(Error::NonConvergence {
        iterations: options.max_iterations,
        estimate: last.0,
        residual: last.1,
    })
}
