//! Orthonormal cosine and sine bases of cell-centred grid lines. Cosine modes
//! diagonalise the zero-flux second difference, sine modes the one with a
//! zero ghost value; both give cheap exact inverses of separable
//! constant-coefficient operators.

use crate::grid::Grid2D;
use std::f64::consts::PI;

/// One-dimensional orthonormal basis on `n` cell-centred points.
#[derive(Debug, Clone)]
pub struct Basis1D {
    n: usize,
    /// Row-major `n x n`: `modes[k * n + i]` is mode `k` at point `i`.
    modes: Vec<f64>,
    /// Eigenvalues of the unit-spacing second difference `-(u[i-1] - 2u[i] + u[i+1])`.
    eigenvalues: Vec<f64>,
}

impl Basis1D {
    /// DCT-II: zero-flux closure at both ends.
    pub fn cosine(n: usize) -> Self {
        let mut modes = vec![0.0; n * n];
        let mut eigenvalues = vec![0.0; n];
        for k in 0..n {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                modes[k * n + i] = scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
            }
            eigenvalues[k] = 2.0 - 2.0 * (PI * k as f64 / n as f64).cos();
        }
        Basis1D { n, modes, eigenvalues }
    }

    /// DST-II: ghost value `-u[0]` (zero at the boundary face) at both ends.
    pub fn sine(n: usize) -> Self {
        let mut modes = vec![0.0; n * n];
        let mut eigenvalues = vec![0.0; n];
        for k in 0..n {
            let kk = (k + 1) as f64;
            let scale = if k + 1 == n { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                modes[k * n + i] = scale * (PI * kk * (i as f64 + 0.5) / n as f64).sin();
            }
            eigenvalues[k] = 2.0 - 2.0 * (PI * kk / n as f64).cos();
        }
        Basis1D { n, modes, eigenvalues }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Transforms every row of a row-major `mx x my` array (`my` rows of `mx`)
    /// along x; `self.len()` must equal `mx`.
    pub fn along_x(&self, data: &mut [f64], mx: usize, my: usize, inverse: bool) {
        debug_assert_eq!(self.n, mx);
        let mut buf = vec![0.0; mx];
        for j in 0..my {
            let row = &mut data[j * mx..(j + 1) * mx];
            for (k, b) in buf.iter_mut().enumerate() {
                let mut s = 0.0;
                for (i, &v) in row.iter().enumerate() {
                    s += v * if inverse { self.modes[i * mx + k] } else { self.modes[k * mx + i] };
                }
                *b = s;
            }
            row.copy_from_slice(&buf);
        }
    }

    /// Transforms every column of a row-major `mx x my` array along y.
    pub fn along_y(&self, data: &mut [f64], mx: usize, my: usize, inverse: bool) {
        debug_assert_eq!(self.n, my);
        let mut out = vec![0.0; mx * my];
        for k in 0..my {
            let dst = &mut out[k * mx..(k + 1) * mx];
            for j in 0..my {
                let c = if inverse { self.modes[j * my + k] } else { self.modes[k * my + j] };
                let src = &data[j * mx..(j + 1) * mx];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        data.copy_from_slice(&out);
    }
}

/// Two-dimensional cosine basis of cell fields; its modes diagonalise
/// `laplacian_neumann`.
#[derive(Debug, Clone)]
pub struct CosineBasis {
    nx: usize,
    ny: usize,
    bx: Basis1D,
    by: Basis1D,
    /// Eigenvalues of `-laplacian_neumann`, indexed like cells.
    eigenvalues: Vec<f64>,
}

impl CosineBasis {
    pub fn new(g: &Grid2D) -> Self {
        let (bx, by) = (Basis1D::cosine(g.nx), Basis1D::cosine(g.ny));
        let mut eigenvalues = vec![0.0; g.n_cells()];
        for q in 0..g.ny {
            for p in 0..g.nx {
                eigenvalues[q * g.nx + p] =
                    bx.eigenvalues[p] / (g.dx * g.dx) + by.eigenvalues[q] / (g.dy * g.dy);
            }
        }
        CosineBasis {
            nx: g.nx,
            ny: g.ny,
            bx,
            by,
            eigenvalues,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn forward(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(input);
        self.bx.along_x(out, self.nx, self.ny, false);
        self.by.along_y(out, self.nx, self.ny, false);
    }

    pub fn inverse(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(input);
        self.by.along_y(out, self.nx, self.ny, true);
        self.bx.along_x(out, self.nx, self.ny, true);
    }
}

/// Solves a symmetric tridiagonal system in place (Thomas algorithm).
/// `diag` and `off` (length `n - 1`) describe the matrix; `rhs` becomes the
/// solution. The matrix must be diagonally dominant or positive definite.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &mut [f64], work: &mut Vec<f64>) {
    let n = diag.len();
    work.clear();
    work.resize(n, 0.0);
    let mut d = diag[0];
    rhs[0] /= d;
    for i in 1..n {
        work[i] = off[i - 1] / d;
        d = diag[i] - off[i - 1] * work[i];
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= work[i + 1] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian_neumann, CellField};

    #[test]
    fn cosine_round_trip_and_diagonalisation() {
        let g = Grid2D::new(6, 5, 1.2, 0.7).unwrap();
        let f = CellField::from_fn(&g, |x, y| (3.0 * x).sin() + x * y * y);
        let basis = CosineBasis::new(&g);
        let mut hat = vec![0.0; g.n_cells()];
        let mut back = vec![0.0; g.n_cells()];
        basis.forward(f.as_slice(), &mut hat);
        basis.inverse(&hat, &mut back);
        for (a, b) in f.as_slice().iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
        let lap = laplacian_neumann(&g, &f);
        let mut lap_hat = vec![0.0; g.n_cells()];
        basis.forward(lap.as_slice(), &mut lap_hat);
        for k in 0..g.n_cells() {
            assert!((lap_hat[k] + basis.eigenvalues()[k] * hat[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_modes_diagonalise_dirichlet_difference() {
        let n = 7;
        let b = Basis1D::sine(n);
        for k in 0..n {
            let v = &b.modes[k * n..(k + 1) * n];
            for i in 0..n {
                let left = if i == 0 { -v[0] } else { v[i - 1] };
                let right = if i == n - 1 { -v[n - 1] } else { v[i + 1] };
                let lv = -(left - 2.0 * v[i] + right);
                assert!((lv - b.eigenvalues()[k] * v[i]).abs() < 1e-12);
            }
        }
        // orthonormal
        let mut data: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        let orig = data.clone();
        b.along_x(&mut data, n, 1, false);
        b.along_x(&mut data, n, 1, true);
        for (a, c) in data.iter().zip(&orig) {
            assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn tridiagonal_matches_direct_product() {
        let diag = [4.0, 5.0, 3.0, 6.0];
        let off = [-1.0, 2.0, -0.5];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off[i - 1] * x[i - 1];
                }
                if i < 3 {
                    s += off[i] * x[i + 1];
                }
                s
            })
            .collect();
        let mut work = Vec::new();
        solve_tridiagonal(&diag, &off, &mut rhs, &mut work);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
