//! Real-valued samples on a [`GridSpec`].

use std::ops::{Add, Mul, Sub};

use crate::error::{NsError, Result};
use crate::grid::{GridSpec, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NsError::GridMismatch(format!(
                "{} samples for a {}x{} grid",
                values.len(),
                grid.n1,
                grid.n2
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(NsError::NonFinite { what: "scalar field", index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node_of(i))).collect();
        Self { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[self.grid.index(i1, i2)]
    }

    /// Grid maximum of `|f|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Midpoint-rule integral over the periodic cell.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// `(int |f|^p)^(1/p)` by the midpoint rule.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_area()).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_area()).sqrt()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(NsError::NonFinite { what: "scalar field", index }),
            None => Ok(()),
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|a| a * rhs)
    }
}

/// Velocity-like field. `u1`, `u2` hold the full samples; `u_inf` is the
/// constant background (the `k = 0` mode), carried explicitly so that
/// integrators can conserve it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub u_inf: [f64; 2],
}

impl VectorField {
    /// Builds a field from samples; `u_inf` is taken as the component means.
    pub fn new(u1: ScalarField, u2: ScalarField) -> Result<Self> {
        if u1.grid != u2.grid {
            return Err(NsError::GridMismatch("vector components live on different grids".into()));
        }
        u1.check_finite()?;
        u2.check_finite()?;
        let u_inf = [u1.mean(), u2.mean()];
        Ok(Self { grid: u1.grid, u1, u2, u_inf })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, u1: ScalarField::zeros(grid), u2: ScalarField::zeros(grid), u_inf: [0.0; 2] }
    }

    pub fn constant(grid: GridSpec, c: [f64; 2]) -> Self {
        Self {
            grid,
            u1: ScalarField::constant(grid, c[0]),
            u2: ScalarField::constant(grid, c[1]),
            u_inf: c,
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut a = Vec::with_capacity(grid.len());
        let mut b = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let v = f(grid.node_of(i));
            a.push(v[0]);
            b.push(v[1]);
        }
        let u1 = ScalarField { grid, values: a };
        let u2 = ScalarField { grid, values: b };
        let u_inf = [u1.mean(), u2.mean()];
        Self { grid, u1, u2, u_inf }
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        self.u1.zip_map(&self.u2, |a, b| a.hypot(b))
    }

    /// `max |u(x)|` over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.u1.values.iter().zip(&self.u2.values).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Energy density `|u|^2 / 2`.
    pub fn energy_density(&self) -> ScalarField {
        self.u1.zip_map(&self.u2, |a, b| 0.5 * (a * a + b * b))
    }

    /// `E = 1/2 int |u|^2`.
    pub fn energy(&self) -> f64 {
        self.energy_density().integral()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            u1: &self.u1 * s,
            u2: &self.u2 * s,
            u_inf: [self.u_inf[0] * s, self.u_inf[1] * s],
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            u1: &self.u1 - &other.u1,
            u2: &self.u2 - &other.u2,
            u_inf: [self.u_inf[0] - other.u_inf[0], self.u_inf[1] - other.u_inf[1]],
        }
    }

    /// Value at a grid node.
    #[inline]
    pub fn at(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.u1.at(i1, i2), self.u2.at(i1, i2)]
    }
}
