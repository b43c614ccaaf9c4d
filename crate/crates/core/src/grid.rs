//! Periodic uniform grids on `[-1, 1)^d`, grid functions, and the
//! fine/coarse transfer operators.
//!
//! Storage is row-major with `x` the fastest index: the sample at
//! `(x_i, y_j)` lives at `j * n + i`, with `x_i = -1 + i h`.

use crate::error::{Error, Result};

/// Uniform periodic grid with `n` points per dimension on `[-1, 1)^dims`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    n: usize,
    dims: usize,
}

impl GridSpec {
    pub fn new(n: usize, dims: usize) -> Result<Self> {
        if !(1..=2).contains(&dims) {
            return Err(Error::InvalidGrid(format!("dims must be 1 or 2, got {dims}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("points per dimension must be a power of two >= 2, got {n}")));
        }
        Ok(Self { n, dims })
    }

    /// Square 2D grid.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, 2)
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(n, 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Grid spacing; `h * n == 2` exactly for power-of-two `n`.
    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.h()
    }

    /// Grid with half as many points per dimension.
    pub fn coarsened(&self) -> Result<Self> {
        if self.n < 4 {
            return Err(Error::InvalidGrid(format!("cannot coarsen a grid with n = {} (< 4)", self.n)));
        }
        Self::new(self.n / 2, self.dims)
    }

    pub fn refined(&self) -> Result<Self> {
        Self::new(self.n * 2, self.dims)
    }
}

/// Real samples of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_vec(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("expected {} samples, got {}", grid.len(), values.len())));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample at index {bad}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every node; for 1D grids `y` is always 0.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let values = match grid.dims() {
            1 => (0..n).map(|i| f(grid.coord(i), 0.0)).collect(),
            _ => (0..n * n).map(|idx| f(grid.coord(idx % n), grid.coord(idx / n))).collect(),
        };
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sample at `(i, j)` with periodic wrap of both indices.
    pub fn at(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n() as isize;
        let i = i.rem_euclid(n) as usize;
        if self.grid.dims() == 1 {
            return self.values[i];
        }
        let j = j.rem_euclid(n) as usize;
        self.values[j * n as usize + i]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Periodic translation by whole grid cells: `out(i, j) = self(i - di, j - dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        let n = self.grid.n();
        let values = match self.grid.dims() {
            1 => (0..n).map(|i| self.at(i as isize - di, 0)).collect(),
            _ => (0..n * n).map(|idx| self.at((idx % n) as isize - di, (idx / n) as isize - dj)).collect(),
        };
        Self { grid: self.grid, values }
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape(format!("grid mismatch: {:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }
}

/// Wave state `(u, v)` where `v` approximates `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub u: ScalarField,
    pub v: ScalarField,
}

impl WaveField {
    pub fn new(u: ScalarField, v: ScalarField) -> Result<Self> {
        u.check_same_grid(&v)?;
        Ok(Self { u, v })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { u: ScalarField::zeros(grid), v: ScalarField::zeros(grid) }
    }

    pub fn grid(&self) -> GridSpec {
        self.u.grid()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { u: self.u.scaled(alpha), v: self.v.scaled(alpha) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self { u: self.u.add(&other.u)?, v: self.v.add(&other.v)? })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self { u: self.u.sub(&other.u)?, v: self.v.sub(&other.v)? })
    }

    /// Time-reversed state `(u, -v)`.
    pub fn reversed(&self) -> Self {
        Self { u: self.u.clone(), v: self.v.scaled(-1.0) }
    }

    pub fn is_finite(&self) -> bool {
        self.u.values().iter().chain(self.v.values()).all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.u.max_abs_diff(&other.u).max(self.v.max_abs_diff(&other.v))
    }

    pub fn restricted(&self) -> Result<Self> {
        Ok(Self { u: restrict(&self.u)?, v: restrict(&self.v)? })
    }

    pub fn prolonged(&self) -> Result<Self> {
        Ok(Self { u: prolong(&self.u)?, v: prolong(&self.v)? })
    }
}

const FULL_WEIGHTING: [f64; 3] = [0.25, 0.5, 0.25];
const CUBIC_MIDPOINT: [f64; 4] = [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0];

/// Full-weighting restriction onto the grid with half the points.
///
/// Coarse node `I` sits on fine node `2I`. In 2D the stencil is the tensor
/// product of `(1/4, 1/2, 1/4)`: 1/4 center, 1/8 edges, 1/16 corners.
pub fn restrict(f: &ScalarField) -> Result<ScalarField> {
    let fine = f.grid();
    let coarse = fine.coarsened()?;
    let nc = coarse.n() as isize;
    let values = match fine.dims() {
        1 => (0..nc).map(|i| (-1..=1).map(|d| FULL_WEIGHTING[(d + 1) as usize] * f.at(2 * i + d, 0)).sum()).collect(),
        _ => {
            let mut out = Vec::with_capacity(coarse.len());
            for j in 0..nc {
                for i in 0..nc {
                    let mut acc = 0.0;
                    for dj in -1..=1isize {
                        let wy = FULL_WEIGHTING[(dj + 1) as usize];
                        for di in -1..=1isize {
                            let wx = FULL_WEIGHTING[(di + 1) as usize];
                            acc += wx * wy * f.at(2 * i + di, 2 * j + dj);
                        }
                    }
                    out.push(acc);
                }
            }
            out
        }
    };
    Ok(ScalarField::from_raw(coarse, values))
}

/// Doubles a periodic line of samples by fourth-order midpoint interpolation.
fn prolong_line(src: &[f64], dst: &mut [f64]) {
    let n = src.len();
    for i in 0..n {
        dst[2 * i] = src[i];
        let mut acc = 0.0;
        for (t, w) in CUBIC_MIDPOINT.iter().enumerate() {
            acc += w * src[(i + n + t - 1) % n];
        }
        dst[2 * i + 1] = acc;
    }
}

/// Fourth-order periodic prolongation onto the grid with twice the points.
///
/// Coarse-aligned fine nodes copy the coarse value; new nodes use the cubic
/// midpoint weights `(-1, 9, 9, -1)/16`, applied as a tensor product in 2D.
pub fn prolong(f: &ScalarField) -> Result<ScalarField> {
    let coarse = f.grid();
    if coarse.n() < 4 {
        return Err(Error::InvalidGrid(format!(
            "prolongation needs at least 4 points per dimension, got {}",
            coarse.n()
        )));
    }
    let fine = coarse.refined()?;
    let (nc, nf) = (coarse.n(), fine.n());
    let src = f.values();
    if coarse.dims() == 1 {
        let mut out = vec![0.0; nf];
        prolong_line(src, &mut out);
        return Ok(ScalarField::from_raw(fine, out));
    }
    // along x: nc rows of length nc -> nc rows of length nf
    let mut rows = vec![0.0; nc * nf];
    for j in 0..nc {
        prolong_line(&src[j * nc..(j + 1) * nc], &mut rows[j * nf..(j + 1) * nf]);
    }
    // along y, column by column
    let mut out = vec![0.0; nf * nf];
    let mut col = vec![0.0; nc];
    let mut col_out = vec![0.0; nf];
    for i in 0..nf {
        for j in 0..nc {
            col[j] = rows[j * nf + i];
        }
        prolong_line(&col, &mut col_out);
        for j in 0..nf {
            out[j * nf + i] = col_out[j];
        }
    }
    Ok(ScalarField::from_raw(fine, out))
}
