//! Box geometry and the MAC layout.
//!
//! Along every axis `a` there are `cells[a]` cells. Wall axes carry
//! `cells[a] + 1` node planes (the two outermost are walls), periodic axes
//! carry `cells[a]` node planes with index `cells[a]` identified with 0.
//!
//! | quantity            | location                                          |
//! |---------------------|---------------------------------------------------|
//! | pressure, potentials| cell centres                                      |
//! | velocity `u_d`      | faces normal to axis `d` (node along `d`)         |
//! | vorticity `ω_d`     | edges parallel to axis `d` (centre along `d`)     |
//! | node scalars        | cell corners                                      |
//!
//! Arrays are stored with `x` fastest: `i + nx·(j + ny·k)`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum cell count along a wall axis (one-sided boundary stencils reach
/// three cells into the domain).
pub const MIN_WALL_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Wall,
    Periodic,
}

/// One of the six planar walls `±x, ±y, ±z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Wall {
    pub axis: usize,
    pub upper: bool,
}

impl Wall {
    /// Outward unit normal.
    pub fn normal(&self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }

    pub fn sign(&self) -> f64 {
        if self.upper {
            1.0
        } else {
            -1.0
        }
    }

    pub fn label(&self) -> String {
        format!("{}{}", if self.upper { '+' } else { '-' }, ['x', 'y', 'z'][self.axis])
    }

    /// The two tangential axes in increasing order.
    pub fn tangential_axes(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

/// A cell face lying on a wall.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub wall: Wall,
    /// Cell-centre indices along `wall.tangential_axes()`.
    pub tangential_index: [usize; 2],
    pub normal: [f64; 3],
    /// Surface measure of the face.
    pub weight: f64,
    pub center: [f64; 3],
}

impl BoundaryFace {
    /// Index of the adjacent cell along the wall normal.
    pub fn cell(&self, grid: &BoxGrid) -> [usize; 3] {
        let mut c = [0; 3];
        let [t1, t2] = self.wall.tangential_axes();
        c[t1] = self.tangential_index[0];
        c[t2] = self.tangential_index[1];
        c[self.wall.axis] = if self.wall.upper {
            grid.cells[self.wall.axis] - 1
        } else {
            0
        };
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrid {
    lengths: [f64; 3],
    cells: [usize; 3],
    spacing: [f64; 3],
    kinds: [AxisKind; 3],
    boundary: Vec<BoundaryFace>,
}

impl BoxGrid {
    pub fn new(lengths: [f64; 3], cells: [usize; 3], kinds: [AxisKind; 3]) -> Result<Self> {
        for a in 0..3 {
            if !(lengths[a].is_finite() && lengths[a] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "length along axis {a} must be positive, got {}",
                    lengths[a]
                )));
            }
            let min = match kinds[a] {
                AxisKind::Wall => MIN_WALL_CELLS,
                AxisKind::Periodic => 1,
            };
            if cells[a] < min {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} ({:?}) needs at least {min} cells, got {}",
                    kinds[a], cells[a]
                )));
            }
        }
        let spacing = [0, 1, 2].map(|a| lengths[a] / cells[a] as f64);
        let mut grid = Self {
            lengths,
            cells,
            spacing,
            kinds,
            boundary: Vec::new(),
        };
        grid.boundary = grid.enumerate_boundary();
        Ok(grid)
    }

    /// Cube of side `length` with `n` cells per axis.
    pub fn cube(length: f64, n: usize, kind: AxisKind) -> Result<Self> {
        Self::new([length; 3], [n; 3], [kind; 3])
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn kinds(&self) -> [AxisKind; 3] {
        self.kinds
    }

    pub fn is_wall(&self, axis: usize) -> bool {
        self.kinds[axis] == AxisKind::Wall
    }

    pub fn has_wall(&self) -> bool {
        (0..3).any(|a| self.is_wall(a))
    }

    /// Number of node planes along `axis`.
    pub fn nodes(&self, axis: usize) -> usize {
        match self.kinds[axis] {
            AxisKind::Wall => self.cells[axis] + 1,
            AxisKind::Periodic => self.cells[axis],
        }
    }

    /// Quadrature weight of every staggered unknown (the cell volume).
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        self.cells
    }

    pub fn node_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.nodes(a))
    }

    /// Shape of the array holding velocity component `d`.
    pub fn face_dims(&self, d: usize) -> [usize; 3] {
        [0, 1, 2].map(|a| if a == d { self.nodes(a) } else { self.cells[a] })
    }

    /// Shape of the array holding vorticity component `d`.
    pub fn edge_dims(&self, d: usize) -> [usize; 3] {
        [0, 1, 2].map(|a| if a == d { self.cells[a] } else { self.nodes(a) })
    }

    pub fn node_coord(&self, axis: usize, m: usize) -> f64 {
        m as f64 * self.spacing[axis]
    }

    pub fn center_coord(&self, axis: usize, m: usize) -> f64 {
        (m as f64 + 0.5) * self.spacing[axis]
    }

    /// Physical position of velocity unknown `idx` of component `d`.
    pub fn face_position(&self, d: usize, idx: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| {
            if a == d {
                self.node_coord(a, idx[a])
            } else {
                self.center_coord(a, idx[a])
            }
        })
    }

    /// Physical position of vorticity unknown `idx` of component `d`.
    pub fn edge_position(&self, d: usize, idx: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| {
            if a == d {
                self.center_coord(a, idx[a])
            } else {
                self.node_coord(a, idx[a])
            }
        })
    }

    pub fn cell_position(&self, idx: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.center_coord(a, idx[a]))
    }

    /// True when node index `m` along `axis` lies on a wall.
    pub fn node_on_wall(&self, axis: usize, m: usize) -> bool {
        self.is_wall(axis) && (m == 0 || m == self.cells[axis])
    }

    /// Present walls in the order `-x, +x, -y, +y, -z, +z`.
    pub fn walls(&self) -> Vec<Wall> {
        (0..3)
            .filter(|&a| self.is_wall(a))
            .flat_map(|axis| [false, true].map(|upper| Wall { axis, upper }))
            .collect()
    }

    /// Boundary faces, wall by wall (see [`BoxGrid::walls`]); within a wall
    /// the first tangential index runs fastest.
    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    /// Total measure of ∂Ω.
    pub fn boundary_measure(&self) -> f64 {
        let [lx, ly, lz] = self.lengths;
        let areas = [ly * lz, lx * lz, lx * ly];
        (0..3)
            .filter(|&a| self.is_wall(a))
            .map(|a| 2.0 * areas[a])
            .sum()
    }

    fn enumerate_boundary(&self) -> Vec<BoundaryFace> {
        let mut faces = Vec::new();
        for wall in self.walls() {
            let [t1, t2] = wall.tangential_axes();
            let weight = self.spacing[t1] * self.spacing[t2];
            for b in 0..self.cells[t2] {
                for a in 0..self.cells[t1] {
                    let mut center = [0.0; 3];
                    center[t1] = self.center_coord(t1, a);
                    center[t2] = self.center_coord(t2, b);
                    center[wall.axis] = if wall.upper {
                        self.lengths[wall.axis]
                    } else {
                        0.0
                    };
                    faces.push(BoundaryFace {
                        wall,
                        tangential_index: [a, b],
                        normal: wall.normal(),
                        weight,
                        center,
                    });
                }
            }
        }
        faces
    }
}

/// Shape operator of the boundary. Every wall of a box is flat, so this is
/// identically zero.
pub fn weingarten(_face: &BoundaryFace) -> Matrix3<f64> {
    Matrix3::zeros()
}

/// Robin matrix `β = 2W + B` induced by a slip-with-friction matrix `B`.
pub fn beta_from_friction(face: &BoundaryFace, friction: &Matrix3<f64>) -> Matrix3<f64> {
    weingarten(face) * 2.0 + friction
}
