//! Uniform rectangular MAC grid: cell-centred scalars, face-staggered vectors
//! and the discrete operators shared by every solver.
//!
//! Index conventions (all row-major, x fastest):
//! * cell `(i, j)` -> `j * nx + i`
//! * x-face `(i, j)` at `(i dx, (j + 1/2) dy)` -> `j * (nx + 1) + i`
//! * y-face `(i, j)` at `((i + 1/2) dx, j dy)` -> `j * nx + i`

use std::ops::{Index, IndexMut};

use crate::error::GridError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub dy: f64,
}

/// One side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    /// Outward unit normal.
    pub fn normal(self) -> (f64, f64) {
        match self {
            Side::Bottom => (0.0, -1.0),
            Side::Right => (1.0, 0.0),
            Side::Top => (0.0, 1.0),
            Side::Left => (-1.0, 0.0),
        }
    }
}

/// A boundary face together with its adjacent interior cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub side: Side,
    /// Position in a [`BoundaryField`].
    pub index: usize,
    /// Adjacent cell `(i, j)`.
    pub cell: (usize, usize),
    /// Face midpoint.
    pub center: (f64, f64),
    pub length: f64,
    /// Distance between the cell centre and the face midpoint.
    pub half_width: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < 3 || ny < 3 {
            return Err(GridError::TooFewCells { nx, ny });
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GridError::BadLength { lx, ly });
        }
        Ok(Grid2D {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / ny as f64,
        })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self, GridError> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_boundary_faces(&self) -> usize {
        2 * (self.nx + self.ny)
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn xface_center(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx, (j as f64 + 0.5) * self.dy)
    }

    pub fn yface_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx, j as f64 * self.dy)
    }

    /// Boundary faces in `BoundaryField` order: bottom, right, top, left,
    /// each in increasing coordinate.
    pub fn boundary_faces(&self) -> impl Iterator<Item = BoundaryFace> + '_ {
        let (nx, ny) = (self.nx, self.ny);
        let bottom = (0..nx).map(move |i| (Side::Bottom, i, (i, 0)));
        let right = (0..ny).map(move |j| (Side::Right, nx + j, (nx - 1, j)));
        let top = (0..nx).map(move |i| (Side::Top, nx + ny + i, (i, ny - 1)));
        let left = (0..ny).map(move |j| (Side::Left, 2 * nx + ny + j, (0, j)));
        bottom
            .chain(right)
            .chain(top)
            .chain(left)
            .map(move |(side, index, (i, j))| {
                let (cx, cy) = self.cell_center(i, j);
                let (center, length, half_width) = match side {
                    Side::Bottom => ((cx, 0.0), self.dx, 0.5 * self.dy),
                    Side::Top => ((cx, self.ly), self.dx, 0.5 * self.dy),
                    Side::Left => ((0.0, cy), self.dy, 0.5 * self.dx),
                    Side::Right => ((self.lx, cy), self.dy, 0.5 * self.dx),
                };
                BoundaryFace {
                    side,
                    index,
                    cell: (i, j),
                    center,
                    length,
                    half_width,
                }
            })
    }

    /// Face-field slot and outward sign of the velocity component normal to a
    /// boundary face.
    pub fn boundary_face_slot(&self, face: &BoundaryFace) -> (Component, usize, f64) {
        let (i, j) = face.cell;
        match face.side {
            Side::Bottom => (Component::Y, self.yface(i, 0), -1.0),
            Side::Top => (Component::Y, self.yface(i, self.ny), 1.0),
            Side::Left => (Component::X, self.xface(0, j), -1.0),
            Side::Right => (Component::X, self.xface(self.nx, j), 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    X,
    Y,
}

/// Scalar values at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn zeros(g: &Grid2D) -> Self {
        Self::constant(g, 0.0)
    }

    pub fn constant(g: &Grid2D, c: f64) -> Self {
        CellField {
            nx: g.nx,
            ny: g.ny,
            values: vec![c; g.n_cells()],
        }
    }

    /// Samples `f(x, y)` at cell centres in storage order.
    pub fn from_fn(g: &Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(g.n_cells());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = g.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        CellField {
            nx: g.nx,
            ny: g.ny,
            values,
        }
    }

    pub fn from_vec(g: &Grid2D, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != g.n_cells() {
            return Err(GridError::LengthMismatch {
                expected: g.n_cells(),
                got: values.len(),
            });
        }
        Ok(CellField {
            nx: g.nx,
            ny: g.ny,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn fits(&self, g: &Grid2D) -> bool {
        self.nx == g.nx && self.ny == g.ny
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        CellField {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        CellField {
            nx: self.nx,
            ny: self.ny,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the raw values (no mesh weighting).
    pub fn norm2(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for CellField {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for CellField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// Normal velocity components on vertical (`x`) and horizontal (`y`) faces.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    nx: usize,
    ny: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(g: &Grid2D) -> Self {
        FaceField {
            nx: g.nx,
            ny: g.ny,
            x: vec![0.0; g.n_xfaces()],
            y: vec![0.0; g.n_yfaces()],
        }
    }

    /// Samples the vector field `(fx, fy)` at the face midpoints, keeping only
    /// the component normal to each face.
    pub fn from_fn(
        g: &Grid2D,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut out = Self::zeros(g);
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let (x, y) = g.xface_center(i, j);
                out.x[g.xface(i, j)] = fx(x, y);
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let (x, y) = g.yface_center(i, j);
                out.y[g.yface(i, j)] = fy(x, y);
            }
        }
        out
    }

    pub fn from_parts(g: &Grid2D, x: Vec<f64>, y: Vec<f64>) -> Result<Self, GridError> {
        if x.len() != g.n_xfaces() {
            return Err(GridError::LengthMismatch {
                expected: g.n_xfaces(),
                got: x.len(),
            });
        }
        if y.len() != g.n_yfaces() {
            return Err(GridError::LengthMismatch {
                expected: g.n_yfaces(),
                got: y.len(),
            });
        }
        Ok(FaceField {
            nx: g.nx,
            ny: g.ny,
            x,
            y,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn fits(&self, g: &Grid2D) -> bool {
        self.nx == g.nx && self.ny == g.ny
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn norm2(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn zip_map(&self, other: &FaceField, f: impl Fn(f64, f64) -> f64) -> Self {
        FaceField {
            nx: self.nx,
            ny: self.ny,
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| f(a, b)).collect(),
            y: self.y.iter().zip(&other.y).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Both components averaged to cell centres.
    pub fn cell_averaged(&self, g: &Grid2D) -> (CellField, CellField) {
        let mut vx = CellField::zeros(g);
        let mut vy = CellField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = g.cell(i, j);
                vx[c] = 0.5 * (self.x[g.xface(i, j)] + self.x[g.xface(i + 1, j)]);
                vy[c] = 0.5 * (self.y[g.yface(i, j)] + self.y[g.yface(i, j + 1)]);
            }
        }
        (vx, vy)
    }
}

/// One value per boundary face, ordered bottom, right, top, left.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub values: Vec<f64>,
}

impl BoundaryField {
    pub fn constant(g: &Grid2D, c: f64) -> Self {
        BoundaryField {
            values: vec![c; g.n_boundary_faces()],
        }
    }

    /// Samples `f(x, y)` at boundary face midpoints.
    pub fn from_fn(g: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        BoundaryField {
            values: g
                .boundary_faces()
                .map(|bf| f(bf.center.0, bf.center.1))
                .collect(),
        }
    }

    pub fn from_vec(g: &Grid2D, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != g.n_boundary_faces() {
            return Err(GridError::LengthMismatch {
                expected: g.n_boundary_faces(),
                got: values.len(),
            });
        }
        Ok(BoundaryField { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete `L2(boundary)` norm: `(sum v^2 * face length)^(1/2)`.
    pub fn l2_norm(&self, g: &Grid2D) -> f64 {
        g.boundary_faces()
            .map(|bf| self.values[bf.index].powi(2) * bf.length)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Two-point differences on interior faces; boundary faces get zero
/// (homogeneous Neumann).
pub fn gradient_to_faces(g: &Grid2D, f: &CellField) -> FaceField {
    let mut out = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.x[g.xface(i, j)] = (f.at(i, j) - f.at(i - 1, j)) / g.dx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.y[g.yface(i, j)] = (f.at(i, j) - f.at(i, j - 1)) / g.dy;
        }
    }
    out
}

/// Like [`gradient_to_faces`], but boundary faces use the ghost value
/// `2 b - f_cell`, i.e. the one-sided difference to prescribed face data `b`.
pub fn gradient_to_faces_dirichlet(g: &Grid2D, f: &CellField, b: &BoundaryField) -> FaceField {
    let mut out = gradient_to_faces(g, f);
    for bf in g.boundary_faces() {
        let (comp, slot, sign) = g.boundary_face_slot(&bf);
        let (i, j) = bf.cell;
        // outward derivative, converted to the +x / +y component
        let dn = (b.values[bf.index] - f.at(i, j)) / bf.half_width;
        match comp {
            Component::X => out.x[slot] = sign * dn,
            Component::Y => out.y[slot] = sign * dn,
        }
    }
    out
}

pub fn divergence_of_faces(g: &Grid2D, w: &FaceField) -> CellField {
    let mut out = CellField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[g.cell(i, j)] = (w.x[g.xface(i + 1, j)] - w.x[g.xface(i, j)]) / g.dx
                + (w.y[g.yface(i, j + 1)] - w.y[g.yface(i, j)]) / g.dy;
        }
    }
    out
}

/// 5-point Laplacian with zero-flux closure: `div(grad f)`.
pub fn laplacian_neumann(g: &Grid2D, f: &CellField) -> CellField {
    divergence_of_faces(g, &gradient_to_faces(g, f))
}

/// Midpoint rule.
pub fn integrate_cells(g: &Grid2D, f: &CellField) -> f64 {
    f.as_slice().iter().sum::<f64>() * g.cell_area()
}

/// Upwind face fluxes `phi_up * v`; boundary faces take the adjacent cell.
pub fn upwind_fluxes(g: &Grid2D, phi: &CellField, vel: &FaceField) -> FaceField {
    let mut flux = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let k = g.xface(i, j);
            let v = vel.x[k];
            let up = if i == 0 {
                phi.at(0, j)
            } else if i == g.nx {
                phi.at(g.nx - 1, j)
            } else if v >= 0.0 {
                phi.at(i - 1, j)
            } else {
                phi.at(i, j)
            };
            flux.x[k] = up * v;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let k = g.yface(i, j);
            let v = vel.y[k];
            let up = if j == 0 {
                phi.at(i, 0)
            } else if j == g.ny {
                phi.at(i, g.ny - 1)
            } else if v >= 0.0 {
                phi.at(i, j - 1)
            } else {
                phi.at(i, j)
            };
            flux.y[k] = up * v;
        }
    }
    flux
}

/// First-order upwind `div(phi v)` in conservative flux-difference form.
pub fn advect_upwind(g: &Grid2D, phi: &CellField, vel: &FaceField) -> CellField {
    divergence_of_faces(g, &upwind_fluxes(g, phi, vel))
}

/// `sum over boundary faces of phi_cell (v . n) |face|`.
pub fn boundary_flux_integral(g: &Grid2D, phi: &CellField, vel: &FaceField) -> f64 {
    g.boundary_faces()
        .map(|bf| {
            let (comp, slot, sign) = g.boundary_face_slot(&bf);
            let vn = sign
                * match comp {
                    Component::X => vel.x[slot],
                    Component::Y => vel.y[slot],
                };
            phi.at(bf.cell.0, bf.cell.1) * vn * bf.length
        })
        .sum()
}

/// Arithmetic two-cell average of a cell field onto faces; boundary faces take
/// the adjacent cell value.
pub fn average_to_faces(g: &Grid2D, f: &CellField) -> FaceField {
    let mut out = FaceField::zeros(g);
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let l = f.at(i.saturating_sub(1), j);
            let r = f.at(i.min(g.nx - 1), j);
            out.x[g.xface(i, j)] = 0.5 * (l + r);
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let b = f.at(i, j.saturating_sub(1));
            let t = f.at(i, j.min(g.ny - 1));
            out.y[g.yface(i, j)] = 0.5 * (b + t);
        }
    }
    out
}

/// Discrete inner product `sum a b dx dy` over cells.
pub fn cell_inner(g: &Grid2D, a: &CellField, b: &CellField) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        * g.cell_area()
}

/// Discrete inner product over faces, weighting interior faces by `dx dy`
/// and boundary faces by `dx dy / 2`.
pub fn face_inner(g: &Grid2D, a: &FaceField, b: &FaceField) -> f64 {
    let area = g.cell_area();
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let k = g.xface(i, j);
            let w = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
            s += w * a.x[k] * b.x[k];
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let k = g.yface(i, j);
            let w = if j == 0 || j == g.ny { 0.5 } else { 1.0 };
            s += w * a.y[k] * b.y[k];
        }
    }
    s * area
}

/// Discrete H1 norm `(||f||_2^2 + ||grad f||_2^2)^(1/2)` with mesh weights.
pub fn h1_norm(g: &Grid2D, f: &CellField) -> f64 {
    let grad = gradient_to_faces(g, f);
    (cell_inner(g, f, f) + face_inner(g, &grad, &grad)).sqrt()
}

/// Mesh-weighted `L2` norm over cells.
pub fn l2_norm(g: &Grid2D, f: &CellField) -> f64 {
    cell_inner(g, f, f).sqrt()
}
