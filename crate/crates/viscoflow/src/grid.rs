//! Axis-aligned uniform staggered (MAC) grids in 2D/3D.
//!
//! Velocity components live on face centers (component `c` on faces normal to
//! axis `c`), pressure and scalar diagnostics at cell centers. Each axis is
//! either a pair of no-slip walls or periodic.

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundaryKind {
    Wall,
    Periodic,
}

/// Uniform box grid. For 2D problems the third axis is a trivial single
/// periodic cell, which makes all z-derivatives vanish identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    extent: [f64; 3],
    bc: [BoundaryKind; 3],
    h: [f64; 3],
}

impl Grid {
    pub fn new(
        dim: usize,
        cells: &[usize],
        extents: &[f64],
        bc: &[BoundaryKind],
    ) -> Result<Self, Error> {
        if dim != 2 && dim != 3 {
            return Err(Error::Grid(format!("dim must be 2 or 3, got {dim}")));
        }
        if cells.len() != dim || extents.len() != dim || bc.len() != dim {
            return Err(Error::Grid(format!(
                "expected {dim} entries for cells/extents/boundaries"
            )));
        }
        let mut n = [1usize; 3];
        let mut extent = [1.0f64; 3];
        let mut kinds = [BoundaryKind::Periodic; 3];
        for a in 0..dim {
            n[a] = cells[a];
            extent[a] = extents[a];
            kinds[a] = bc[a];
            if extent[a] <= 0.0 {
                return Err(Error::Grid(format!("extent on axis {a} must be positive")));
            }
            if n[a] == 0 {
                return Err(Error::Grid(format!("axis {a} needs at least one cell")));
            }
            if kinds[a] == BoundaryKind::Wall && n[a] < 4 {
                return Err(Error::Grid(format!(
                    "wall axis {a} needs at least 4 cells, got {}",
                    n[a]
                )));
            }
        }
        if !kinds[..dim].contains(&BoundaryKind::Wall) {
            return Err(Error::Grid(
                "at least one axis must be a no-slip wall (bounded domain)".into(),
            ));
        }
        let mut h = [1.0f64; 3];
        for a in 0..3 {
            h[a] = extent[a] / n[a] as f64;
        }
        Ok(Grid {
            dim,
            n,
            extent,
            bc: kinds,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn bc(&self, axis: usize) -> BoundaryKind {
        self.bc[axis]
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    /// Cell volume (area in 2D; the trivial axis has unit length).
    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    pub fn num_cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Number of stored face planes along `axis` for the component normal to it.
    /// Wall axes carry both boundary planes; periodic axes identify plane n with 0.
    pub fn face_planes(&self, axis: usize) -> usize {
        match self.bc[axis] {
            BoundaryKind::Wall => self.n[axis] + 1,
            BoundaryKind::Periodic => self.n[axis],
        }
    }

    /// Storage shape for velocity component `c`.
    pub fn comp_shape(&self, c: usize) -> [usize; 3] {
        let mut s = self.n;
        s[c] = self.face_planes(c);
        s
    }

    pub fn comp_len(&self, c: usize) -> usize {
        let s = self.comp_shape(c);
        s[0] * s[1] * s[2]
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    pub fn cell_coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let j = (idx / self.n[0]) % self.n[1];
        let k = idx / (self.n[0] * self.n[1]);
        [i, j, k]
    }

    /// Cell-center coordinate along `axis` for cell index `i`.
    pub fn center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h[axis]
    }

    /// Face-plane coordinate along `axis`.
    pub fn face_coord(&self, axis: usize, i: usize) -> f64 {
        i as f64 * self.h[axis]
    }

    /// Wrap a cell index along a periodic axis; `None` if out of range on a wall axis.
    pub fn wrap_cell(&self, axis: usize, i: isize) -> Option<usize> {
        let n = self.n[axis] as isize;
        match self.bc[axis] {
            BoundaryKind::Periodic => Some(i.rem_euclid(n) as usize),
            BoundaryKind::Wall => {
                if i >= 0 && i < n {
                    Some(i as usize)
                } else {
                    None
                }
            }
        }
    }

    /// True when the face plane `i` of a wall axis lies on the boundary.
    pub fn is_wall_plane(&self, axis: usize, i: usize) -> bool {
        self.bc[axis] == BoundaryKind::Wall && (i == 0 || i == self.n[axis])
    }
}
