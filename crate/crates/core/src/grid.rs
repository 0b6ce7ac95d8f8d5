//! Uniform cell-centered grids and fields of cell averages.

use crate::error::{Error, Result};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 8;

/// Uniform cell-centered mesh on `[x_left, x_right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !x_left.is_finite() || !x_right.is_finite() {
            return Err(Error::InvalidGrid("window endpoints must be finite".into()));
        }
        if x_right <= x_left {
            return Err(Error::InvalidGrid(format!(
                "empty window [{x_left}, {x_right}]"
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "n_cells = {n_cells} is below the minimum of {MIN_CELLS}"
            )));
        }
        Ok(Self {
            x_left,
            x_right,
            n_cells,
            dx: (x_right - x_left) / n_cells as f64,
        })
    }

    /// Grid whose cell size is as close as possible to `dx`.
    pub fn with_spacing(x_left: f64, x_right: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx = {dx} must be positive")));
        }
        let n = ((x_right - x_left) / dx).round();
        if !(n >= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dx = {dx} does not fit the window [{x_left}, {x_right}]"
            )));
        }
        Self::new(x_left, x_right, n as usize)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Center of cell `i`. Negative indices and indices past the end address ghost cells.
    pub fn center(&self, i: isize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx
    }

    /// Coordinate of interface `j`, `j = 0` being the left window edge.
    pub fn face(&self, j: usize) -> f64 {
        self.x_left + j as f64 * self.dx
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |i| self.center(i as isize))
    }

    /// Index of the cell containing `x`, clamped to the window.
    pub fn locate(&self, x: f64) -> usize {
        let raw = ((x - self.x_left) / self.dx).floor();
        raw.clamp(0.0, (self.n_cells - 1) as f64) as usize
    }

    /// Same grid refined by an integer factor.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.x_left, self.x_right, self.n_cells * factor)
    }
}

/// How a closed-form function is projected onto cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleMode {
    #[default]
    Midpoint,
    /// Simpson rule on the cell: `(f(left) + 4 f(center) + f(right)) / 6`.
    Average3,
}

/// Cell averages on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid1D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn from_values(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                x: grid.center(i as isize),
                value: values[i],
            });
        }
        Ok(Self { grid, values })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_finite(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Callers must keep the values finite.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ values · dx`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete total variation over interior neighbours only.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.dx())
    }

    pub fn linf_distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Applies `f` cell-wise to `self` and `other`.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid, values)
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Projects `f` onto the cells of `grid`.
pub fn sample_function(grid: &Grid1D, f: impl Fn(f64) -> f64, mode: SampleMode) -> Result<ScalarField> {
    let half = 0.5 * grid.dx();
    let mut values = Vec::with_capacity(grid.n_cells());
    for xc in grid.centers() {
        let value = match mode {
            SampleMode::Midpoint => checked(xc, f(xc))?,
            SampleMode::Average3 => {
                let l = checked(xc - half, f(xc - half))?;
                let c = checked(xc, f(xc))?;
                let r = checked(xc + half, f(xc + half))?;
                (l + 4.0 * c + r) / 6.0
            }
        };
        values.push(value);
    }
    Ok(ScalarField::from_finite(*grid, values))
}

fn checked(x: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteSample { x, value })
    }
}
