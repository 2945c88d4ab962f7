use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// Unnormalised `sum_j u_j e^{-2 pi i jm/N}`.
    Forward,
    /// Inverse including the `1/N` factor.
    Inverse,
}

/// In-place N-d transform of a row-major array, one axis at a time.
pub(crate) fn transform(data: &mut [Complex64], shape: &[usize], direction: Direction) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total, "array does not match shape");
    if total == 0 {
        return;
    }
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let mut lines = Vec::new();
        for (axis, &n) in shape.iter().enumerate() {
            if n == 1 {
                continue;
            }
            let fft = match direction {
                Direction::Forward => planner.plan_fft_forward(n),
                Direction::Inverse => planner.plan_fft_inverse(n),
            };
            let stride: usize = shape[axis + 1..].iter().product();
            if stride == 1 {
                fft.process(data);
                continue;
            }
            // Gather the `stride` lines of each outer block, transform them
            // as one contiguous batch, scatter back.
            lines.resize(n * stride, Complex64::new(0.0, 0.0));
            for block in data.chunks_exact_mut(n * stride) {
                for j in 0..n {
                    for i in 0..stride {
                        lines[i * n + j] = block[j * stride + i];
                    }
                }
                fft.process(&mut lines);
                for j in 0..n {
                    for i in 0..stride {
                        block[j * stride + i] = lines[i * n + j];
                    }
                }
            }
        }
    });
    if direction == Direction::Inverse {
        let scale = 1.0 / total as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft_2d(data: &[Complex64], n0: usize, n1: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n0 * n1];
        for m0 in 0..n0 {
            for m1 in 0..n1 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j0 in 0..n0 {
                    for j1 in 0..n1 {
                        let phase = -2.0
                            * PI
                            * ((m0 * j0) as f64 / n0 as f64 + (m1 * j1) as f64 / n1 as f64);
                        acc += data[j0 * n1 + j1] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[m0 * n1 + m1] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        let (n0, n1) = (6, 4);
        let data: Vec<Complex64> = (0..n0 * n1)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut work = data.clone();
        transform(&mut work, &[n0, n1], Direction::Forward);
        let reference = naive_dft_2d(&data, n0, n1);
        for (a, b) in work.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-12);
        }
        transform(&mut work, &[n0, n1], Direction::Inverse);
        for (a, b) in work.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
