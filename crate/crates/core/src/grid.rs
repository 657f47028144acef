//! Periodic lattice on the d-torus (d in {1, 2}) and grid-function arithmetic.

use crate::error::{Error, Result};

/// Uniform periodic lattice on `[0,1)^dim` with `n_per_axis` points per axis.
///
/// Point indexing is row-major over axes: in 2-D, index = i0 * n + i1.
/// Immutable after construction; safe to share across threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    n_per_axis: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dim must be 1 or 2, got {dim}")));
        }
        if n_per_axis < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_per_axis must be >= 2, got {n_per_axis}"
            )));
        }
        Ok(TorusGrid { dim, n_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    /// Mesh width in torus units.
    pub fn h(&self) -> f64 {
        1.0 / self.n_per_axis as f64
    }

    /// Total point count N = n_per_axis^dim.
    pub fn num_points(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    /// Lattice coordinates of a point index; entries past `dim` are zero.
    pub fn coords(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n_per_axis, idx % self.n_per_axis]
        }
    }

    /// Point index of lattice coordinates (row-major over axes).
    pub fn index(&self, coords: &[usize]) -> usize {
        if self.dim == 1 {
            coords[0]
        } else {
            coords[0] * self.n_per_axis + coords[1]
        }
    }

    /// Torus coordinates in `[0,1)^dim`; entries past `dim` are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let c = self.coords(idx);
        let h = self.h();
        [c[0] as f64 * h, c[1] as f64 * h]
    }

    /// Periodic neighbor of `idx` along `axis` in direction `dir` (+1 or -1).
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i32) -> Result<usize> {
        if idx >= self.num_points() {
            return Err(Error::InvalidArgument(format!(
                "point index {idx} out of range (N = {})",
                self.num_points()
            )));
        }
        if axis >= self.dim {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range (dim = {})",
                self.dim
            )));
        }
        if dir != 1 && dir != -1 {
            return Err(Error::InvalidArgument(format!("dir must be +1 or -1, got {dir}")));
        }
        Ok(self.neighbor_unchecked(idx, axis, dir))
    }

    pub(crate) fn neighbor_unchecked(&self, idx: usize, axis: usize, dir: i32) -> usize {
        let n = self.n_per_axis;
        let mut c = self.coords(idx);
        c[axis] = if dir > 0 {
            (c[axis] + 1) % n
        } else {
            (c[axis] + n - 1) % n
        };
        self.index(&c[..self.dim])
    }
}

/// Real-valued function on a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_points() {
            return Err(Error::ShapeMismatch(format!(
                "grid function has {} values, grid has {} points",
                values.len(),
                grid.num_points()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        GridFunction { grid, values: vec![value; grid.num_points()] }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample a function of the torus coordinates at every lattice point.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_points())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..grid.dim()])
            })
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// max over points of |f|; 0 iff f == 0.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// max f - min f; 0 iff f constant.
    pub fn oscillation(&self) -> f64 {
        let max = self.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let min = self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        max - min
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// sup-norm distance between two grid functions on the same grid.
pub fn sup_distance(f: &GridFunction, g: &GridFunction) -> f64 {
    assert_eq!(f.grid(), g.grid(), "grid functions live on different grids");
    f.values()
        .iter()
        .zip(g.values())
        .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn neighbor_wraps_1d() {
        let g = TorusGrid::new(1, 4).unwrap();
        assert_eq!(g.neighbor(3, 0, 1).unwrap(), 0);
        assert_eq!(g.neighbor(0, 0, -1).unwrap(), 3);
        assert_eq!(g.neighbor(1, 0, 1).unwrap(), 2);
    }

    #[test]
    fn neighbor_wraps_2d_axis0_only() {
        let g = TorusGrid::new(2, 3).unwrap();
        let idx = g.index(&[2, 1]);
        let nb = g.neighbor(idx, 0, 1).unwrap();
        assert_eq!(g.coords(nb), [0, 1]);
    }

    #[test]
    fn neighbor_rejects_bad_args() {
        let g = TorusGrid::new(1, 4).unwrap();
        assert!(g.neighbor(4, 0, 1).is_err());
        assert!(g.neighbor(0, 1, 1).is_err());
        assert!(g.neighbor(0, 0, 2).is_err());
    }

    #[test]
    fn neighbor_round_trip_and_cycle() {
        for (dim, n) in [(1usize, 2usize), (1, 5), (2, 3), (2, 4)] {
            let g = TorusGrid::new(dim, n).unwrap();
            for idx in 0..g.num_points() {
                for axis in 0..dim {
                    for dir in [1, -1] {
                        let nb = g.neighbor(idx, axis, dir).unwrap();
                        assert_eq!(g.neighbor(nb, axis, -dir).unwrap(), idx);
                    }
                    // composing around an axis n times is the identity
                    let mut cur = idx;
                    for _ in 0..n {
                        cur = g.neighbor(cur, axis, 1).unwrap();
                    }
                    assert_eq!(cur, idx);
                }
            }
        }
    }

    #[test]
    fn neighbor_is_bijection() {
        let g = TorusGrid::new(2, 4).unwrap();
        for axis in 0..2 {
            for dir in [1, -1] {
                let mut seen = vec![false; g.num_points()];
                for idx in 0..g.num_points() {
                    let nb = g.neighbor(idx, axis, dir).unwrap();
                    assert!(!seen[nb]);
                    seen[nb] = true;
                }
            }
        }
    }

    #[test]
    fn sup_norm_examples() {
        let g = TorusGrid::new(1, 3).unwrap();
        assert_eq!(GridFunction::zeros(g).sup_norm(), 0.0);
        assert_eq!(GridFunction::new(g, vec![1.0, -3.0, 2.0]).unwrap().sup_norm(), 3.0);
        assert_eq!(GridFunction::new(g, vec![0.0, 1.0, 0.0]).unwrap().sup_norm(), 1.0);
    }

    #[test]
    fn oscillation_examples() {
        let g4 = TorusGrid::new(1, 4).unwrap();
        let g2 = TorusGrid::new(1, 2).unwrap();
        assert_eq!(GridFunction::constant(g4, 7.5).oscillation(), 0.0);
        assert_eq!(
            GridFunction::new(g4, vec![0.0, 1.0, 0.0, 1.0]).unwrap().oscillation(),
            1.0
        );
        assert_eq!(GridFunction::new(g2, vec![-2.0, 3.0]).unwrap().oscillation(), 5.0);
    }

    #[test]
    fn grid_function_length_checked() {
        let g = TorusGrid::new(2, 3).unwrap();
        assert!(GridFunction::new(g, vec![0.0; 8]).is_err());
        assert!(GridFunction::new(g, vec![0.0; 9]).is_ok());
    }

    proptest! {
        #[test]
        fn oscillation_shift_invariant(vals in proptest::collection::vec(-1e6f64..1e6, 8), c in -1e6f64..1e6) {
            let g = TorusGrid::new(1, 8).unwrap();
            let f = GridFunction::new(g, vals.clone()).unwrap();
            let shifted = GridFunction::new(g, vals.iter().map(|v| v + c).collect()).unwrap();
            prop_assert!((f.oscillation() - shifted.oscillation()).abs() <= 1e-9 * (1.0 + c.abs()));
        }
    }
}
