use super::grid::{Grid, GridKind};
use crate::error::{Error, Result};
use crate::linalg::{pcg, CgSettings, SparseSym};

/// Boundary treatment of an elliptic operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Robin { omega: f64 },
}

/// Diffusion tensor field. Only axis-aligned (diagonal) tensors are
/// supported; each node carries `[a_xx, a_yy]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Uniform(f64),
    Diagonal(Vec<[f64; 2]>),
}

impl Coefficient {
    fn at(&self, node: usize, axis: usize) -> f64 {
        match self {
            Coefficient::Uniform(a) => *a,
            Coefficient::Diagonal(v) => v[node][axis],
        }
    }
}

/// Discrete `-div(A grad u) + shift u` with a declared boundary treatment.
///
/// The operator is stored through its stiffness form `S = W A`, where `W`
/// holds the quadrature weights; `S` is symmetric, so `A` is self-adjoint
/// for the weighted L2 product. Interior fluxes are assembled edge by edge,
/// which makes the Neumann row sums vanish exactly. On vertex grids a
/// Dirichlet condition pins the boundary nodes: their rows decouple and
/// carry the interior diagonal scale.
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    grid: Grid,
    coeff: Coefficient,
    bc: BoundaryCondition,
    shift: f64,
    weights: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    boundary_diag: Vec<f64>,
    pinned: Vec<bool>,
    pinned_diag: Vec<f64>,
    ellipticity: f64,
}

impl EllipticOperator {
    pub fn new(grid: Grid, coeff: Coefficient, bc: BoundaryCondition) -> Result<Self> {
        let nodes = grid.node_count();
        if let Coefficient::Diagonal(v) = &coeff {
            if v.len() != nodes {
                return Err(Error::Dimension(format!(
                    "coefficient table has {} rows, grid has {nodes} nodes",
                    v.len()
                )));
            }
        }
        let mut ellipticity = f64::INFINITY;
        for k in 0..nodes {
            for axis in 0..grid.dim() {
                let a = coeff.at(k, axis);
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "diffusion coefficient must be positive, got {a} at node {k}"
                    )));
                }
                ellipticity = ellipticity.min(a);
            }
        }
        if let BoundaryCondition::Robin { omega } = bc {
            if !(omega > 0.0 && omega.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Robin coefficient must be positive, got {omega}"
                )));
            }
        }

        let h = grid.h();
        let weights = grid.weights();
        let pinned: Vec<bool> = (0..nodes)
            .map(|k| {
                bc == BoundaryCondition::Dirichlet
                    && grid.kind() == GridKind::Vertex
                    && grid.is_boundary(k)
            })
            .collect();
        let mut boundary_diag = vec![0.0; nodes];
        let mut edges = Vec::new();
        for e in grid.edges() {
            let (ka, kb) = (coeff.at(e.a, e.axis), coeff.at(e.b, e.axis));
            let kappa = 2.0 * ka * kb / (ka + kb);
            let c = kappa * e.cross / h;
            match (pinned[e.a], pinned[e.b]) {
                (false, false) => edges.push((e.a, e.b, c)),
                (false, true) => boundary_diag[e.a] += c,
                (true, false) => boundary_diag[e.b] += c,
                (true, true) => {}
            }
        }
        for (node, axis, area) in grid.boundary_faces() {
            let kappa = coeff.at(node, axis);
            match (bc, grid.kind()) {
                (BoundaryCondition::Neumann, _) => {}
                (BoundaryCondition::Dirichlet, GridKind::Vertex) => {}
                (BoundaryCondition::Dirichlet, GridKind::CellCentered) => {
                    boundary_diag[node] += kappa * area / (0.5 * h);
                }
                (BoundaryCondition::Robin { omega }, GridKind::Vertex) => {
                    boundary_diag[node] += omega * area;
                }
                (BoundaryCondition::Robin { omega }, GridKind::CellCentered) => {
                    boundary_diag[node] += area / (0.5 * h / kappa + 1.0 / omega);
                }
            }
        }
        let pinned_diag = (0..nodes)
            .map(|k| {
                if pinned[k] {
                    (0..grid.dim()).map(|ax| 2.0 * coeff.at(k, ax)).sum::<f64>() / (h * h)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            grid,
            coeff,
            bc,
            shift: 0.0,
            weights,
            edges,
            boundary_diag,
            pinned,
            pinned_diag,
            ellipticity,
        })
    }

    /// Laplacian with unit coefficient.
    pub fn laplacian(grid: Grid, bc: BoundaryCondition) -> Result<Self> {
        Self::new(grid, Coefficient::Uniform(1.0), bc)
    }

    /// Same operator plus `shift * identity` (replacing any previous shift).
    pub fn with_shift(&self, shift: f64) -> Result<Self> {
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass shift must be non-negative, got {shift}"
            )));
        }
        let mut out = self.clone();
        out.shift = shift;
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficient(&self) -> &Coefficient {
        &self.coeff
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Uniform ellipticity constant of the coefficient field.
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes whose values are held at zero by a Dirichlet condition.
    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    /// Singular exactly when the kernel contains the constants.
    pub fn is_singular(&self) -> bool {
        self.bc == BoundaryCondition::Neumann && self.shift == 0.0
    }

    /// `y = (mass W + S) x`, fluxes accumulated pairwise.
    pub(crate) fn stiffness_apply_with_mass(&self, mass: f64, x: &[f64], y: &mut [f64]) {
        for k in 0..x.len() {
            y[k] = if self.pinned[k] {
                self.weights[k] * (self.pinned_diag[k] + self.shift + mass) * x[k]
            } else {
                (self.boundary_diag[k] + (self.shift + mass) * self.weights[k]) * x[k]
            };
        }
        for &(a, b, c) in &self.edges {
            let flux = c * (x[a] - x[b]);
            y[a] += flux;
            y[b] -= flux;
        }
    }

    /// `y = S x` with `S = W A` the symmetric stiffness matrix.
    pub(crate) fn stiffness_apply(&self, x: &[f64], y: &mut [f64]) {
        self.stiffness_apply_with_mass(0.0, x, y);
    }

    /// Stiffness matrix `S` in sparse form.
    pub(crate) fn stiffness(&self) -> SparseSym {
        let n = self.weights.len();
        let mut s = SparseSym::zeros(n);
        for k in 0..n {
            s.diag[k] = if self.pinned[k] {
                self.weights[k] * (self.pinned_diag[k] + self.shift)
            } else {
                self.boundary_diag[k] + self.shift * self.weights[k]
            };
        }
        for &(a, b, c) in &self.edges {
            s.diag[a] += c;
            s.diag[b] += c;
            s.off.push((a, b, -c));
        }
        s
    }

    fn stiffness_diag_with_mass(&self, mass: f64) -> Vec<f64> {
        let mut d = self.stiffness().diag;
        for (dk, w) in d.iter_mut().zip(&self.weights) {
            *dk += mass * w;
        }
        d
    }

    /// Discrete operator applied to a grid vector: `A u = W^{-1} S u`.
    pub(crate) fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        self.stiffness_apply(u, &mut y);
        y.iter_mut().zip(&self.weights).for_each(|(v, w)| *v /= w);
        y
    }

    /// `a(u, v) = <A u, v>_{L2}`.
    pub(crate) fn energy_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut y = vec![0.0; u.len()];
        self.stiffness_apply(u, &mut y);
        y.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Solves `(mass W + S) x = b` in stiffness coordinates, warm-started
    /// from `x`. Singular Neumann systems (mass = 0, no shift) are solved in
    /// the mean-zero subspace after projecting `b`.
    pub(crate) fn solve_system(&self, mass: f64, b: &[f64], x: &mut [f64], tol: f64) -> Result<()> {
        let n = b.len();
        let singular = mass == 0.0 && self.is_singular();
        let inv_w: Vec<f64> = self.weights.iter().map(|w| 1.0 / w).collect();
        let settings = CgSettings {
            rel_tol: tol,
            max_iter: 10 * n,
        };
        let diag = self.stiffness_diag_with_mass(mass);
        let apply = |p: &[f64], q: &mut [f64]| self.stiffness_apply_with_mass(mass, p, q);
        if singular {
            let total_w: f64 = self.weights.iter().sum();
            let m = b.iter().sum::<f64>() / total_w;
            let rhs: Vec<f64> = b.iter().zip(&self.weights).map(|(bi, w)| bi - m * w).collect();
            pcg(apply, &diag, &rhs, x, settings, Some(&inv_w), true)?;
            let xm = x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() / total_w;
            x.iter_mut().for_each(|v| *v -= xm);
        } else {
            pcg(apply, &diag, b, x, settings, Some(&inv_w), false)?;
        }
        Ok(())
    }

    /// Solves `A u = f` for a grid vector, with the compatibility check in
    /// the singular case.
    pub(crate) fn solve_slice(&self, f: &[f64], tol: f64) -> Result<Vec<f64>> {
        if self.is_singular() {
            let total_w: f64 = self.weights.iter().sum();
            let mean = f.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() / total_w;
            let rms = (f.iter().zip(&self.weights).map(|(a, w)| a * a * w).sum::<f64>() / total_w)
                .sqrt();
            let allowed = tol.max(1e-12) * rms + 1e-300;
            if mean.abs() > allowed {
                return Err(Error::Compatibility {
                    mean,
                    tol: allowed,
                });
            }
        }
        let b: Vec<f64> = f.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
        let mut x = vec![0.0; f.len()];
        self.solve_system(0.0, &b, &mut x, tol)?;
        Ok(x)
    }

    /// Smallest eigenvalue of `A` by inverse iteration (non-singular
    /// operators only).
    pub fn smallest_eigenvalue(&self) -> Result<f64> {
        if self.is_singular() {
            return Ok(0.0);
        }
        let n = self.weights.len();
        let grid = self.grid;
        // A smooth positive start has a component along the ground state.
        let mut v: Vec<f64> = (0..n)
            .map(|k| {
                let c = grid.coordinates(k);
                let s = |x: f64| (std::f64::consts::PI * (x + 0.5 * grid.h()) / (grid.length() + grid.h())).sin();
                if grid.dim() == 1 {
                    s(c[0])
                } else {
                    s(c[0]) * s(c[1])
                }
            })
            .collect();
        let mut rayleigh = f64::INFINITY;
        for _ in 0..200 {
            let w_v: Vec<f64> = v.iter().zip(&self.weights).map(|(a, w)| a * w).collect();
            let mut next = vec![0.0; n];
            self.solve_system(0.0, &w_v, &mut next, 1e-13)?;
            let num = self.energy_form(&next, &next);
            let den: f64 = next.iter().zip(&self.weights).map(|(a, w)| a * a * w).sum();
            let r = num / den;
            let norm = den.sqrt();
            v = next.into_iter().map(|a| a / norm).collect();
            if (r - rayleigh).abs() <= 1e-13 * r {
                return Ok(r);
            }
            rayleigh = r;
        }
        Ok(rayleigh)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_neumann_matches_ghost_reflection() {
        let g = Grid::vertex_1d(5, 1.0).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
        let u = [1.0, 3.0, 2.0, 0.0, 4.0];
        let y = a.apply_slice(&u);
        let h2 = g.h() * g.h();
        assert!((y[0] - (2.0 * u[0] - 2.0 * u[1]) / h2).abs() < 1e-10);
        assert!((y[2] - (2.0 * u[2] - u[1] - u[3]) / h2).abs() < 1e-10);
        assert!((y[4] - (2.0 * u[4] - 2.0 * u[3]) / h2).abs() < 1e-10);
    }

    #[test]
    fn cell_dirichlet_uses_face_ghost() {
        let g = Grid::cell_1d(4, 1.0).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Dirichlet).unwrap();
        let y = a.apply_slice(&[1.0, 0.0, 0.0, 0.0]);
        assert!((y[0] - 3.0 / (g.h() * g.h())).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_pins_vertex_boundary() {
        let g = Grid::new(2, 5, 1.0, GridKind::Vertex).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Dirichlet).unwrap();
        let pinned = a.pinned().iter().filter(|p| **p).count();
        assert_eq!(pinned, 16);
        let s = a.stiffness();
        for &(i, j, _) in &s.off {
            assert!(!a.pinned()[i] && !a.pinned()[j]);
        }
    }

    #[test]
    fn robin_is_positive_definite() {
        let g = Grid::vertex_1d(9, 1.0).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Robin { omega: 2.0 }).unwrap();
        assert!(!a.is_singular());
        let ones = vec![1.0; 9];
        assert!((a.energy_form(&ones, &ones) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_first_eigenvalue_matches_discrete_formula() {
        let g = Grid::vertex_1d(33, 1.0).unwrap();
        let a = EllipticOperator::laplacian(g, BoundaryCondition::Dirichlet).unwrap();
        let h = g.h();
        let exact = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((a.smallest_eigenvalue().unwrap() - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        let g = Grid::vertex_1d(5, 1.0).unwrap();
        assert!(EllipticOperator::new(g, Coefficient::Uniform(0.0), BoundaryCondition::Neumann).is_err());
        assert!(EllipticOperator::new(g, Coefficient::Diagonal(vec![[1.0, 1.0]; 3]), BoundaryCondition::Neumann).is_err());
    }
}
