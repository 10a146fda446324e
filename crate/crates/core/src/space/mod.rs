//! Finite-dimensional Hilbert triple on uniform grids.
//!
//! Grid functions live in a weighted L2 space (quadrature weights from the
//! grid). An [`EllipticOperator`] `A` induces the energy form
//! `a(u, v) = <A u, v>` and the dual product `a(A^{-1} u, A^{-1} v)`.

mod grid;
mod operator;

pub use grid::{Grid, GridKind};
pub use operator::{BoundaryCondition, Coefficient, EllipticOperator};

use crate::error::{Error, Result};

/// A grid function: one real value per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Dimension(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.node_count()],
            grid,
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            values: vec![c; grid.node_count()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64; 2]) -> f64) -> Self {
        Self {
            values: grid.sample(f),
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("fields live on different grids: {a:?} vs {b:?}")));
    }
    Ok(())
}

pub(crate) fn weighted_dot(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
}

/// Quadrature-weighted L2 product.
pub fn inner_l2(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    same_grid(&f.grid, &g.grid)?;
    Ok(weighted_dot(&f.grid.weights(), &f.values, &g.values))
}

/// Average of `u` over the domain.
pub fn mean(u: &ScalarField) -> f64 {
    weighted_dot(&u.grid.weights(), &u.values, &vec![1.0; u.values.len()]) / u.grid.volume()
}

/// Discrete `-div(A grad u) + shift u`.
pub fn apply(a: &EllipticOperator, u: &ScalarField) -> Result<ScalarField> {
    same_grid(a.grid(), &u.grid)?;
    Ok(ScalarField {
        grid: u.grid,
        values: a.apply_slice(&u.values),
    })
}

/// Solves `A u = f` to relative residual `tol`. For singular Neumann
/// operators the right-hand side must have zero mean (within `tol`) and the
/// mean-zero solution is returned.
pub fn solve(a: &EllipticOperator, f: &ScalarField, tol: f64) -> Result<ScalarField> {
    same_grid(a.grid(), &f.grid)?;
    Ok(ScalarField {
        grid: f.grid,
        values: a.solve_slice(&f.values, tol)?,
    })
}

/// Dual product `a(A^{-1} u, A^{-1} v) = <A^{-1} u, v>`.
pub fn inner_dual(u: &ScalarField, v: &ScalarField, a: &EllipticOperator) -> Result<f64> {
    same_grid(&u.grid, &v.grid)?;
    same_grid(a.grid(), &u.grid)?;
    dual_product(a, &u.values, &v.values)
}

pub(crate) fn dual_product(a: &EllipticOperator, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.iter().all(|x| *x == 0.0) || v.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    let z = a.solve_slice(u, 1e-12)?;
    Ok(weighted_dot(a.weights(), &z, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_exactly() {
        for n in [3, 10, 77] {
            let g = Grid::cell_1d(n, 1.0).unwrap();
            let one = ScalarField::constant(g, 1.0);
            assert!((inner_l2(&one, &one).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = ScalarField::zeros(Grid::cell_1d(8, 1.0).unwrap());
        let b = ScalarField::zeros(Grid::cell_1d(9, 1.0).unwrap());
        assert!(matches!(inner_l2(&a, &b), Err(Error::Dimension(_))));
        let op = EllipticOperator::laplacian(*b.grid(), BoundaryCondition::Neumann).unwrap();
        assert!(apply(&op, &a).is_err());
    }

    #[test]
    fn field_rejects_nan_and_wrong_length() {
        let g = Grid::cell_1d(4, 1.0).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn mean_of_linear_function_is_midpoint() {
        let g = Grid::cell_1d(100, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0]);
        assert!((mean(&u) - 0.5).abs() < 1e-12);
        let c = ScalarField::constant(g, -2.5);
        assert!((mean(&c) + 2.5).abs() < 1e-14);
    }

    #[test]
    fn neumann_kernel_and_shift() {
        let g = Grid::cell_1d(16, 1.0).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
        let c = ScalarField::constant(g, 3.0);
        assert!(apply(&a, &c).unwrap().max_abs() < 1e-14);
        let shifted = a.with_shift(2.0).unwrap();
        let y = apply(&shifted, &c).unwrap();
        assert!(y.values().iter().all(|v| (v - 6.0).abs() < 1e-12));
    }

    #[test]
    fn incompatible_rhs_is_rejected() {
        let g = Grid::cell_1d(16, 1.0).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
        let f = ScalarField::from_fn(g, |x| 0.1 + (2.0 * std::f64::consts::PI * x[0]).cos());
        assert!(matches!(solve(&a, &f, 1e-10), Err(Error::Compatibility { .. })));
        let z = solve(&a, &ScalarField::zeros(g), 1e-10).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }
}
