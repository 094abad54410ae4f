//! Discrete fields on staggered grids: velocities on faces, scalars and
//! symmetric tensors at cell centers.

use crate::error::Error;
use crate::grid::{BoundaryKind, Grid};

/// How tangential velocity values are continued past a wall when a stencil
/// reaches outside the domain.
///
/// `NoSlip` reflects oddly about the wall (the view of a field extended by
/// zero on the boundary); `Extrapolate` continues linearly, which measures the
/// field exactly as given with one-sided differences at walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallTreatment {
    NoSlip,
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: Grid,
    comp: Vec<Vec<f64>>,
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        let comp = (0..grid.dim()).map(|c| vec![0.0; grid.comp_len(c)]).collect();
        VelocityField {
            grid: grid.clone(),
            comp,
        }
    }

    /// Build from a function of (component, face-center coordinates).
    /// Wall-normal boundary faces are forced to zero afterwards.
    pub fn from_fn(grid: &Grid, f: impl FnMut(usize, [f64; 3]) -> f64) -> Self {
        let mut v = Self::sample(grid, f);
        v.zero_wall_normal_faces();
        v
    }

    /// Like `from_fn` but keeps boundary-plane samples (used for forces and
    /// controls, which are not constrained on walls).
    pub fn sample(grid: &Grid, mut f: impl FnMut(usize, [f64; 3]) -> f64) -> Self {
        let mut v = Self::zeros(grid);
        for c in 0..grid.dim() {
            let shape = grid.comp_shape(c);
            for k in 0..shape[2] {
                for j in 0..shape[1] {
                    for i in 0..shape[0] {
                        let idx = [i, j, k];
                        let mut x = [0.0; 3];
                        for a in 0..3 {
                            x[a] = if a == c {
                                grid.face_coord(a, idx[a])
                            } else {
                                grid.center(a, idx[a])
                            };
                        }
                        let lin = v.lin(c, idx);
                        v.comp[c][lin] = f(c, x);
                    }
                }
            }
        }
        v
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn same_grid(&self, other: &VelocityField) -> Result<(), Error> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    #[inline]
    pub fn lin(&self, c: usize, idx: [usize; 3]) -> usize {
        let s = self.grid.comp_shape(c);
        (idx[2] * s[1] + idx[1]) * s[0] + idx[0]
    }

    #[inline]
    pub fn get(&self, c: usize, idx: [usize; 3]) -> f64 {
        self.comp[c][self.lin(c, idx)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, idx: [usize; 3], val: f64) {
        let l = self.lin(c, idx);
        self.comp[c][l] = val;
    }

    #[inline]
    pub fn add(&mut self, c: usize, idx: [usize; 3], val: f64) {
        let l = self.lin(c, idx);
        self.comp[c][l] += val;
    }

    pub fn comp_data(&self, c: usize) -> &[f64] {
        &self.comp[c]
    }

    pub fn comp_data_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comp[c]
    }

    /// Value of component `c` at face index `idx` (signed), continuing past
    /// boundaries: periodic axes wrap, wall axes reflect per `wt`.
    pub fn value(&self, c: usize, idx: [isize; 3], wt: WallTreatment) -> f64 {
        let g = &self.grid;
        // Resolve axes one at a time; at most one level of ghost per axis.
        let mut sign = 1.0;
        let mut extra = 0.0;
        let mut resolved = [0usize; 3];
        let mut pending: Option<(usize, isize)> = None;
        for a in 0..3 {
            let i = idx[a];
            if a == c {
                // Normal direction: face-plane index.
                match g.bc(a) {
                    BoundaryKind::Periodic => {
                        resolved[a] = i.rem_euclid(g.cells(a) as isize) as usize;
                    }
                    BoundaryKind::Wall => {
                        let n = g.cells(a) as isize;
                        if i < 0 {
                            sign = -sign;
                            resolved[a] = (-i) as usize;
                        } else if i > n {
                            sign = -sign;
                            resolved[a] = (2 * n - i) as usize;
                        } else {
                            resolved[a] = i as usize;
                        }
                    }
                }
            } else {
                // Tangential direction: cell index.
                match g.wrap_cell(a, i) {
                    Some(ci) => resolved[a] = ci,
                    None => {
                        debug_assert!(pending.is_none(), "double ghost not supported");
                        pending = Some((a, i));
                        resolved[a] = 0; // placeholder
                    }
                }
            }
        }
        if let Some((a, i)) = pending {
            let n = g.cells(a) as isize;
            let (near, next) = if i < 0 { (0, 1) } else { (n - 1, n - 2) };
            debug_assert!(i == -1 || i == n, "only one ghost layer supported");
            let mut near_idx = resolved;
            near_idx[a] = near as usize;
            let vn = self.comp[c][self.lin(c, near_idx)];
            match wt {
                WallTreatment::NoSlip => extra = -vn,
                WallTreatment::Extrapolate => {
                    let mut next_idx = resolved;
                    next_idx[a] = next as usize;
                    let vnx = self.comp[c][self.lin(c, next_idx)];
                    extra = 2.0 * vn - vnx;
                }
            }
            return sign * extra;
        }
        let _ = extra;
        sign * self.comp[c][self.lin(c, resolved)]
    }

    /// Stencil of (linear face index, coefficient) pairs representing
    /// `value(c, idx, NoSlip)` as a linear map of the stored data.
    /// Empty when the value is structurally zero (pinned wall face).
    pub fn value_coeffs(&self, c: usize, idx: [isize; 3]) -> Vec<(usize, f64)> {
        let g = &self.grid;
        let mut sign = 1.0;
        let mut resolved = [0usize; 3];
        let mut pending: Option<(usize, isize)> = None;
        for a in 0..3 {
            let i = idx[a];
            if a == c {
                match g.bc(a) {
                    BoundaryKind::Periodic => {
                        resolved[a] = i.rem_euclid(g.cells(a) as isize) as usize;
                    }
                    BoundaryKind::Wall => {
                        let n = g.cells(a) as isize;
                        if i < 0 {
                            sign = -sign;
                            resolved[a] = (-i) as usize;
                        } else if i > n {
                            sign = -sign;
                            resolved[a] = (2 * n - i) as usize;
                        } else {
                            resolved[a] = i as usize;
                        }
                    }
                }
            } else {
                match g.wrap_cell(a, i) {
                    Some(ci) => resolved[a] = ci,
                    None => {
                        pending = Some((a, i));
                        resolved[a] = 0;
                    }
                }
            }
        }
        if g.is_wall_plane(c, resolved[c]) {
            return Vec::new();
        }
        if let Some((a, i)) = pending {
            let n = g.cells(a) as isize;
            let near = if i < 0 { 0 } else { (n - 1) as usize };
            let mut near_idx = resolved;
            near_idx[a] = near;
            return vec![(self.lin(c, near_idx), -sign)];
        }
        vec![(self.lin(c, resolved), sign)]
    }

    /// Quadrature weight for a stored face (half on wall boundary planes).
    pub fn face_weight(&self, c: usize, idx: [usize; 3]) -> f64 {
        if self.grid.is_wall_plane(c, idx[c]) {
            0.5
        } else {
            1.0
        }
    }

    /// Iterate over all stored faces of component `c`.
    pub fn for_each_face(&self, c: usize, mut f: impl FnMut([usize; 3])) {
        let s = self.grid.comp_shape(c);
        for k in 0..s[2] {
            for j in 0..s[1] {
                for i in 0..s[0] {
                    f([i, j, k]);
                }
            }
        }
    }

    /// Force wall-normal boundary faces to zero (the no-slip constraint on
    /// the normal component has its degree of freedom on the wall plane).
    pub fn zero_wall_normal_faces(&mut self) {
        for c in 0..self.grid.dim() {
            if self.grid.bc(c) != BoundaryKind::Wall {
                continue;
            }
            let s = self.grid.comp_shape(c);
            for k in 0..s[2] {
                for j in 0..s[1] {
                    for i in 0..s[0] {
                        let idx = [i, j, k];
                        if self.grid.is_wall_plane(c, idx[c]) {
                            let l = self.lin(c, idx);
                            self.comp[c][l] = 0.0;
                        }
                    }
                }
            }
        }
    }

    /// Mass (L2) inner product over faces with boundary half-weights.
    pub fn l2_inner(&self, other: &VelocityField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let vol = self.grid.cell_volume();
        let mut acc = 0.0;
        for c in 0..self.grid.dim() {
            self.for_each_face(c, |idx| {
                let w = self.face_weight(c, idx);
                acc += w * self.get(c, idx) * other.get(c, idx);
            });
        }
        acc * vol
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.comp
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for d in &mut self.comp {
            for x in d.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn axpy(&mut self, a: f64, x: &VelocityField) {
        debug_assert_eq!(self.grid, x.grid);
        for (d, xd) in self.comp.iter_mut().zip(&x.comp) {
            for (y, &xv) in d.iter_mut().zip(xd.iter()) {
                *y += a * xv;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comp.iter().all(|d| d.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: grid.clone(),
            data: vec![0.0; grid.num_cells()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut s = Self::zeros(grid);
        for idx in 0..grid.num_cells() {
            let [i, j, k] = grid.cell_coords(idx);
            let x = [grid.center(0, i), grid.center(1, j), grid.center(2, k)];
            s.data[idx] = f(x);
        }
        s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        for x in &mut self.data {
            *x -= m;
        }
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

/// Pressure is a cell-centered scalar fixed to zero mean (it is recovered as a
/// Lagrange multiplier, defined up to a constant).
pub type PressureField = ScalarField;

/// Cell-centered symmetric tensor; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    dim: usize,
    /// Layout per cell: diagonal entries first, then pairs (0,1), (0,2), (1,2).
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: &Grid) -> Self {
        let dim = grid.dim();
        let ncomp = dim * (dim + 1) / 2;
        TensorField {
            grid: grid.clone(),
            dim,
            data: vec![0.0; grid.num_cells() * ncomp],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= j && j < self.dim);
        if i == j {
            i
        } else {
            // pairs ordered (0,1), (0,2), (1,2)
            match (i, j) {
                (0, 1) => self.dim,
                (0, 2) => self.dim + 1,
                (1, 2) => self.dim + 2,
                _ => unreachable!(),
            }
        }
    }

    pub fn get(&self, cell: usize, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[cell * self.ncomp() + self.slot(i, j)]
    }

    pub fn set(&mut self, cell: usize, i: usize, j: usize, val: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let s = self.slot(i, j);
        let n = self.ncomp();
        self.data[cell * n + s] = val;
    }

    /// Frobenius magnitude `|E| = sqrt(sum_ij E_ij^2)` at one cell; the full
    /// double sum counts off-diagonal entries twice.
    pub fn magnitude(&self, cell: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let d = self.get(cell, i, i);
            s += d * d;
            for j in (i + 1)..self.dim {
                let o = self.get(cell, i, j);
                s += 2.0 * o * o;
            }
        }
        s.sqrt()
    }
}
