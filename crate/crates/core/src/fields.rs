//! Staggered storage for velocity, vorticity and scalar fields.
//!
//! All unknowns share the same quadrature weight (the cell volume), so the
//! discrete inner product of any two fields is `h_x h_y h_z Σ aᵢbᵢ`.

use crate::error::{Error, Result};
use crate::grid::BoxGrid;

#[inline]
pub fn linear_index(dims: [usize; 3], p: [usize; 3]) -> usize {
    p[0] + dims[0] * (p[1] + dims[1] * p[2])
}

/// Visit every multi-index of `dims` in storage order.
#[inline]
pub fn for_each_index(dims: [usize; 3], mut f: impl FnMut([usize; 3], usize)) {
    let mut n = 0;
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                f([i, j, k], n);
                n += 1;
            }
        }
    }
}

/// Vector-space operations used by the Krylov solvers.
pub trait GridVector: Clone {
    fn dot(&self, other: &Self) -> f64;
    /// `self += a·x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);

    fn norm(&self) -> f64 {
        self.dot(self).max(0.0).sqrt()
    }

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }
}

macro_rules! vector_field {
    ($(#[$meta:meta])* $name:ident, $dims:ident, $pos:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            dims: [[usize; 3]; 3],
            weight: f64,
            data: [Vec<f64>; 3],
        }

        impl $name {
            pub fn zeros(grid: &BoxGrid) -> Self {
                let dims = [0, 1, 2].map(|d| grid.$dims(d));
                Self {
                    dims,
                    weight: grid.cell_volume(),
                    data: dims.map(|s| vec![0.0; s.iter().product()]),
                }
            }

            /// Sample `f(component, position)` at every staggered location.
            pub fn from_fn(grid: &BoxGrid, mut f: impl FnMut(usize, [f64; 3]) -> f64) -> Self {
                let mut out = Self::zeros(grid);
                for d in 0..3 {
                    let dims = out.dims[d];
                    let data = &mut out.data[d];
                    for_each_index(dims, |p, n| data[n] = f(d, grid.$pos(d, p)));
                }
                out
            }

            /// Sample component `d` of a vector function at its own location.
            pub fn from_vector_fn(grid: &BoxGrid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
                Self::from_fn(grid, |d, x| f(x)[d])
            }

            pub fn dims(&self, d: usize) -> [usize; 3] {
                self.dims[d]
            }

            pub fn weight(&self) -> f64 {
                self.weight
            }

            pub fn comp(&self, d: usize) -> &[f64] {
                &self.data[d]
            }

            pub fn comp_mut(&mut self, d: usize) -> &mut [f64] {
                &mut self.data[d]
            }

            #[inline]
            pub fn get(&self, d: usize, p: [usize; 3]) -> f64 {
                self.data[d][linear_index(self.dims[d], p)]
            }

            #[inline]
            pub fn set(&mut self, d: usize, p: [usize; 3], v: f64) {
                let n = linear_index(self.dims[d], p);
                self.data[d][n] = v;
            }

            pub fn len(&self) -> usize {
                self.data.iter().map(Vec::len).sum()
            }

            pub fn is_empty(&self) -> bool {
                self.len() == 0
            }

            pub fn matches(&self, grid: &BoxGrid) -> bool {
                (0..3).all(|d| self.dims[d] == grid.$dims(d))
            }

            pub fn check(&self, grid: &BoxGrid) -> Result<()> {
                if self.matches(grid) {
                    Ok(())
                } else {
                    Err(Error::ShapeMismatch(stringify!($name)))
                }
            }

            pub fn max_abs(&self) -> f64 {
                self.data
                    .iter()
                    .flat_map(|c| c.iter())
                    .fold(0.0_f64, |m, v| m.max(v.abs()))
            }

            pub fn sub(&self, other: &Self) -> Self {
                let mut out = self.clone();
                out.axpy(-1.0, other);
                out
            }

            pub fn add(&self, other: &Self) -> Self {
                let mut out = self.clone();
                out.axpy(1.0, other);
                out
            }

            pub fn scaled(&self, a: f64) -> Self {
                let mut out = self.clone();
                out.scale(a);
                out
            }

            /// Raw values, component by component.
            pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
                self.data.iter().flat_map(|c| c.iter().copied())
            }

            /// Rebuild from the concatenation produced by [`Self::values`].
            pub fn from_values(grid: &BoxGrid, values: &[f64]) -> Result<Self> {
                let mut out = Self::zeros(grid);
                if values.len() != out.len() {
                    return Err(Error::ShapeMismatch(stringify!($name)));
                }
                let mut off = 0;
                for d in 0..3 {
                    let n = out.data[d].len();
                    out.data[d].copy_from_slice(&values[off..off + n]);
                    off += n;
                }
                Ok(out)
            }
        }

        impl GridVector for $name {
            fn dot(&self, other: &Self) -> f64 {
                let s: f64 = (0..3)
                    .map(|d| {
                        self.data[d]
                            .iter()
                            .zip(&other.data[d])
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    })
                    .sum();
                s * self.weight
            }

            fn axpy(&mut self, a: f64, x: &Self) {
                for d in 0..3 {
                    for (y, v) in self.data[d].iter_mut().zip(&x.data[d]) {
                        *y += a * v;
                    }
                }
            }

            fn scale(&mut self, a: f64) {
                for c in &mut self.data {
                    c.iter_mut().for_each(|v| *v *= a);
                }
            }
        }
    };
}

vector_field!(
    /// Velocity-like field: component `d` on faces normal to axis `d`.
    FaceField,
    face_dims,
    face_position
);

vector_field!(
    /// Vorticity-like field: component `d` on edges parallel to axis `d`.
    EdgeField,
    edge_dims,
    edge_position
);

macro_rules! scalar_field {
    ($(#[$meta:meta])* $name:ident, $dims:ident, $pos:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            dims: [usize; 3],
            weight: f64,
            data: Vec<f64>,
        }

        impl $name {
            pub fn zeros(grid: &BoxGrid) -> Self {
                let dims = grid.$dims();
                Self {
                    dims,
                    weight: grid.cell_volume(),
                    data: vec![0.0; dims.iter().product()],
                }
            }

            pub fn from_fn(grid: &BoxGrid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
                let mut out = Self::zeros(grid);
                let dims = out.dims;
                let data = &mut out.data;
                for_each_index(dims, |p, n| data[n] = f(grid.$pos(p)));
                out
            }

            pub fn dims(&self) -> [usize; 3] {
                self.dims
            }

            pub fn weight(&self) -> f64 {
                self.weight
            }

            pub fn data(&self) -> &[f64] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [f64] {
                &mut self.data
            }

            #[inline]
            pub fn get(&self, p: [usize; 3]) -> f64 {
                self.data[linear_index(self.dims, p)]
            }

            #[inline]
            pub fn set(&mut self, p: [usize; 3], v: f64) {
                let n = linear_index(self.dims, p);
                self.data[n] = v;
            }

            pub fn matches(&self, grid: &BoxGrid) -> bool {
                self.dims == grid.$dims()
            }

            pub fn check(&self, grid: &BoxGrid) -> Result<()> {
                if self.matches(grid) {
                    Ok(())
                } else {
                    Err(Error::ShapeMismatch(stringify!($name)))
                }
            }

            pub fn max_abs(&self) -> f64 {
                self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }

            pub fn mean(&self) -> f64 {
                self.data.iter().sum::<f64>() / self.data.len() as f64
            }

            /// Subtract the mean; returns the shift that was removed.
            pub fn remove_mean(&mut self) -> f64 {
                let m = self.mean();
                self.data.iter_mut().for_each(|v| *v -= m);
                m
            }

            pub fn sub(&self, other: &Self) -> Self {
                let mut out = self.clone();
                out.axpy(-1.0, other);
                out
            }

            pub fn add(&self, other: &Self) -> Self {
                let mut out = self.clone();
                out.axpy(1.0, other);
                out
            }

            pub fn scaled(&self, a: f64) -> Self {
                let mut out = self.clone();
                out.scale(a);
                out
            }

            pub fn from_values(grid: &BoxGrid, values: &[f64]) -> Result<Self> {
                let mut out = Self::zeros(grid);
                if values.len() != out.data.len() {
                    return Err(Error::ShapeMismatch(stringify!($name)));
                }
                out.data.copy_from_slice(values);
                Ok(out)
            }
        }

        impl GridVector for $name {
            fn dot(&self, other: &Self) -> f64 {
                self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.weight
            }

            fn axpy(&mut self, a: f64, x: &Self) {
                for (y, v) in self.data.iter_mut().zip(&x.data) {
                    *y += a * v;
                }
            }

            fn scale(&mut self, a: f64) {
                self.data.iter_mut().for_each(|v| *v *= a);
            }
        }
    };
}

scalar_field!(
    /// Cell-centred scalar (pressure, potentials, divergence).
    CellField,
    cell_dims,
    cell_position
);

scalar_field!(
    /// Node-centred scalar; only used by the edge Hodge Laplacian.
    NodeField,
    node_dims,
    node_position
);

impl BoxGrid {
    pub fn node_position(&self, idx: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.node_coord(a, idx[a]))
    }
}

impl FaceField {
    /// Largest |ν·u| over wall faces.
    pub fn wall_normal_max(&self, grid: &BoxGrid) -> f64 {
        let mut m = 0.0_f64;
        for d in (0..3).filter(|&d| grid.is_wall(d)) {
            let dims = self.dims[d];
            let last = grid.cells()[d];
            for_each_index(dims, |p, n| {
                if p[d] == 0 || p[d] == last {
                    m = m.max(self.data[d][n].abs());
                }
            });
        }
        m
    }

    /// Zero the wall-normal unknowns (ν·u = 0).
    pub fn enforce_tangent(&mut self, grid: &BoxGrid) {
        for d in (0..3).filter(|&d| grid.is_wall(d)) {
            let dims = self.dims[d];
            let last = grid.cells()[d];
            let data = &mut self.data[d];
            for_each_index(dims, |p, n| {
                if p[d] == 0 || p[d] == last {
                    data[n] = 0.0;
                }
            });
        }
    }
}

impl EdgeField {
    /// Largest value on edges lying in a wall (the tangential trace).
    pub fn wall_tangential_max(&self, grid: &BoxGrid) -> f64 {
        let mut m = 0.0_f64;
        for d in 0..3 {
            for_each_index(self.dims[d], |p, n| {
                if edge_on_wall(grid, d, p) {
                    m = m.max(self.data[d][n].abs());
                }
            });
        }
        m
    }

    /// Zero every edge lying in a wall (ν×ω = 0).
    pub fn mask_walls(&mut self, grid: &BoxGrid) {
        for d in 0..3 {
            let data = &mut self.data[d];
            for_each_index(self.dims[d], |p, n| {
                if edge_on_wall(grid, d, p) {
                    data[n] = 0.0;
                }
            });
        }
    }
}

/// Whether edge `p` of component `d` lies in a wall plane.
#[inline]
pub fn edge_on_wall(grid: &BoxGrid, d: usize, p: [usize; 3]) -> bool {
    (0..3).any(|a| a != d && grid.node_on_wall(a, p[a]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisKind;

    #[test]
    fn inner_product_is_volume_weighted() {
        let g = BoxGrid::cube(2.0, 4, AxisKind::Periodic).unwrap();
        let u = FaceField::from_vector_fn(&g, |_| [1.0, 0.0, 0.0]);
        assert!((u.dot(&u) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn values_round_trip() {
        let g = BoxGrid::new([1.0; 3], [4, 5, 6], [AxisKind::Wall; 3]).unwrap();
        let u = FaceField::from_fn(&g, |d, x| d as f64 + x[0] * x[1] - x[2]);
        let v: Vec<f64> = u.values().collect();
        assert_eq!(FaceField::from_values(&g, &v).unwrap(), u);
        assert!(FaceField::from_values(&g, &v[1..]).is_err());
    }

    #[test]
    fn tangent_enforcement() {
        let g = BoxGrid::cube(1.0, 4, AxisKind::Wall).unwrap();
        let mut u = FaceField::from_fn(&g, |_, _| 1.0);
        assert_eq!(u.wall_normal_max(&g), 1.0);
        u.enforce_tangent(&g);
        assert_eq!(u.wall_normal_max(&g), 0.0);
        assert_eq!(u.get(0, [1, 0, 0]), 1.0);
    }
}
