//! Grids and real-valued fields on the periodic box [0, L)^2.
//!
//! Samples live on the uniform collocation grid x_{ij} = (i*h, j*h),
//! h = L/n, stored row-major: index = i*n + j with i the x1 index.

use crate::error::{Error, Result};

/// Uniform periodic grid with n x n points on [0, L)^2, n a power of two >= 8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n: usize,
    length: f64,
}

impl Grid2D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::BadGridLength(length));
        }
        Ok(Grid2D { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Grid spacing h = L/n.
    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Number of samples n^2.
    pub fn count(&self) -> usize {
        self.n * self.n
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Physical coordinates of sample (i, j).
    pub fn xy(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.h();
        (i as f64 * h, j as f64 * h)
    }

    /// Signed integer wavenumber for storage index m: k in [-n/2, n/2).
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Physical frequency xi = 2*pi*k/L for storage index m.
    pub fn xi(&self, m: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.wavenumber(m) as f64 / self.length
    }
}

/// Real scalar samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.count()],
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.count());
        for i in 0..n {
            for j in 0..n {
                let (x, y) = grid.xy(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField { grid, data }
    }

    pub fn from_data(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.count() {
            return Err(Error::InvalidParameter(format!(
                "sample count {} does not match grid {}^2",
                data.len(),
                grid.n()
            )));
        }
        Ok(ScalarField { grid, data })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.grid.idx(i, j);
        self.data[idx] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Index of the first non-finite sample, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        let n = self.grid.n();
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / n, p % n))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub(crate) fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Two-component velocity field (u1, u2).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    comps: [ScalarField; 2],
}

impl VectorField2 {
    pub fn zeros(grid: Grid2D) -> Self {
        VectorField2 {
            comps: [ScalarField::zeros(grid), ScalarField::zeros(grid)],
        }
    }

    pub fn new(c1: ScalarField, c2: ScalarField) -> Result<Self> {
        if c1.grid() != c2.grid() {
            return Err(Error::GridMismatch("vector components"));
        }
        Ok(VectorField2 { comps: [c1, c2] })
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> Self {
        let mut c1 = ScalarField::zeros(grid);
        let mut c2 = ScalarField::zeros(grid);
        let n = grid.n();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = grid.xy(i, j);
                let (a, b) = f(x, y);
                c1.set(i, j, a);
                c2.set(i, j, b);
            }
        }
        VectorField2 { comps: [c1, c2] }
    }

    pub fn grid(&self) -> Grid2D {
        self.comps[0].grid()
    }

    pub fn comp(&self, c: usize) -> &ScalarField {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut ScalarField {
        &mut self.comps[c]
    }

    /// Pointwise maximum of the Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        let a = self.comps[0].data();
        let b = self.comps[1].data();
        let mut m = 0.0f64;
        for (x, y) in a.iter().zip(b) {
            m = m.max((x * x + y * y).sqrt());
        }
        m
    }

    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.comps
            .iter()
            .find_map(|c| c.first_non_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.comps[0].scale(s);
        self.comps[1].scale(s);
    }

    pub(crate) fn into_comps(self) -> [ScalarField; 2] {
        self.comps
    }
}

/// Three-component field on the grid. Dynamics and the scenario constructors
/// keep it unit-norm pointwise (a director into S^2); generic three-vector
/// results such as the tension field reuse the same container and are not
/// unit-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField {
    comps: [ScalarField; 3],
}

impl DirectorField {
    /// Constant north-pole state d = e3.
    pub fn constant_e3(grid: Grid2D) -> Self {
        let mut d3 = ScalarField::zeros(grid);
        d3.data_mut().fill(1.0);
        DirectorField {
            comps: [ScalarField::zeros(grid), ScalarField::zeros(grid), d3],
        }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        DirectorField {
            comps: [
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
            ],
        }
    }

    pub fn new(c1: ScalarField, c2: ScalarField, c3: ScalarField) -> Result<Self> {
        if c1.grid() != c2.grid() || c1.grid() != c3.grid() {
            return Err(Error::GridMismatch("director components"));
        }
        Ok(DirectorField {
            comps: [c1, c2, c3],
        })
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> (f64, f64, f64)) -> Self {
        let mut d = DirectorField::zeros(grid);
        let n = grid.n();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = grid.xy(i, j);
                let (a, b, c) = f(x, y);
                d.comps[0].set(i, j, a);
                d.comps[1].set(i, j, b);
                d.comps[2].set(i, j, c);
            }
        }
        d
    }

    pub fn grid(&self) -> Grid2D {
        self.comps[0].grid()
    }

    pub fn comp(&self, c: usize) -> &ScalarField {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut ScalarField {
        &mut self.comps[c]
    }

    /// Largest deviation of the pointwise norm from 1.
    pub fn unit_error(&self) -> f64 {
        let (a, b, c) = (
            self.comps[0].data(),
            self.comps[1].data(),
            self.comps[2].data(),
        );
        let mut m = 0.0f64;
        for ((x, y), z) in a.iter().zip(b).zip(c) {
            let norm = (x * x + y * y + z * z).sqrt();
            m = m.max((norm - 1.0).abs());
        }
        m
    }

    /// Rescale every sample to unit norm. Fails with `DegenerateDirector`
    /// if any sample norm falls below `floor` (the norm floor guards the
    /// division; a collapsed norm is treated by callers as a blowup signal).
    pub fn normalize(&mut self, floor: f64) -> Result<()> {
        let n = self.grid().n();
        let [c1, c2, c3] = &mut self.comps;
        let (a, b, c) = (c1.data_mut(), c2.data_mut(), c3.data_mut());
        for (k, ((x, y), z)) in a.iter_mut().zip(b.iter_mut()).zip(c.iter_mut()).enumerate() {
            let norm = (*x * *x + *y * *y + *z * *z).sqrt();
            if !(norm >= floor) {
                return Err(Error::DegenerateDirector {
                    i: k / n,
                    j: k % n,
                    norm,
                    floor,
                });
            }
            let inv = 1.0 / norm;
            *x *= inv;
            *y *= inv;
            *z *= inv;
        }
        Ok(())
    }

    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.comps.iter().find_map(|c| c.first_non_finite())
    }

    /// Minimum of the third component over the grid.
    pub fn min_d3(&self) -> f64 {
        self.comps[2].min()
    }

    pub(crate) fn into_comps(self) -> [ScalarField; 3] {
        self.comps
    }

    pub(crate) fn comps_mut(&mut self) -> [&mut ScalarField; 3] {
        let [a, b, c] = &mut self.comps;
        [a, b, c]
    }
}

/// Tolerance used when constructors assert unit norm of freshly built data.
pub const TOL_UNIT: f64 = 1e-9;
/// Unit-norm drift accepted during time evolution between renormalizations.
pub const TOL_EVOLVE: f64 = 1e-6;
/// Pointwise norm floor below which renormalization refuses to divide.
pub const NORM_FLOOR: f64 = 1e-8;
