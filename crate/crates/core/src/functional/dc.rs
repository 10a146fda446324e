//! Differences of convex functionals on Dirichlet grids.

use super::minimize::{projected_newton, Bounds, GridObjective, PowerEdges};
use super::table::MonotoneTable;
use crate::error::{Error, Result};
use crate::space::{BoundaryCondition, EllipticOperator, Grid, GridKind};

/// `1/p sum_i |d_i v|^p - 1/(alpha + 2) |v|^(alpha + 2)` on `W^{1,p}_0`.
///
/// `linf_bound` is the sup-norm radius on which the semiconvexity constant
/// (and hence the admissible time step) is computed.
#[derive(Clone, Debug, PartialEq)]
pub struct DcExample1 {
    pub p: f64,
    pub alpha: f64,
    pub linf_bound: f64,
}

/// `1/2 |grad v|^2 - F(v) - lambda_h (v - 1)^+` on `H^1_0`, `F' = f`.
#[derive(Clone, Debug, PartialEq)]
pub struct DcExample2 {
    pub lambda_h: f64,
    pub f: MonotoneTable,
}

/// `1/2 |grad v|^2 + F1(v) - F2(v)` on `K = {v in H^1_0 : v >= 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DcExample3 {
    pub f1: MonotoneTable,
    pub f2: MonotoneTable,
}

/// Shared grid data of the three examples.
#[derive(Clone, Debug)]
pub(crate) struct DirichletSetup {
    pub op: EllipticOperator,
    pub weights: Vec<f64>,
    /// Smallest eigenvalue of the discrete Dirichlet Laplacian.
    pub lambda1: f64,
}

impl DirichletSetup {
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.kind() != GridKind::Vertex {
            return Err(Error::InvalidParameter(
                "Dirichlet examples need a vertex grid (boundary nodes are pinned)".into(),
            ));
        }
        let op = EllipticOperator::laplacian(grid, BoundaryCondition::Dirichlet)?;
        let lambda1 = op.smallest_eigenvalue()?;
        Ok(Self {
            weights: grid.weights(),
            op,
            lambda1,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn boundary_violated(&self, v: &[f64]) -> bool {
        self.op.pinned().iter().zip(v).any(|(p, x)| *p && *x != 0.0)
    }

    fn bounds(&self, lower: f64) -> Bounds {
        let mut b = Bounds::free(self.weights.len());
        b.lower.iter_mut().for_each(|l| *l = lower);
        b.pin(self.op.pinned());
        b
    }

    fn integral(&self, v: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        v.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn power_edges(&self, p: f64) -> PowerEdges {
        let grid = self.grid();
        let h = grid.h();
        let edges = grid
            .edges()
            .into_iter()
            .map(|e| (e.a, e.b, e.cross * h))
            .collect();
        PowerEdges { edges, p, h }
    }
}

/// Inner solver tolerance on the projected gradient residual.
pub(crate) fn newton_tol(inner_tol: f64, tau: f64, u: &[f64]) -> f64 {
    let scale = u.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    inner_tol / tau * scale
}

const NEWTON_ITERS: usize = 500;

impl DcExample1 {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.p > 2.0 && self.alpha > 0.0 && 2.0 + self.alpha < self.p) {
            return Err(Error::InvalidParameter(format!(
                "need p > 2, alpha > 0 and 2 + alpha < p (p = {}, alpha = {})",
                self.p, self.alpha
            )));
        }
        if !(self.linf_bound > 0.0 && self.linf_bound.is_finite()) {
            return Err(Error::InvalidParameter("linf_bound must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn kappa(&self) -> f64 {
        0.5 * (self.alpha + 1.0) * self.linf_bound.powf(self.alpha)
    }

    pub(crate) fn psi2(&self, s: &DirichletSetup, v: &[f64]) -> f64 {
        let q = self.alpha + 2.0;
        s.integral(v, |x| x.abs().powf(q) / q)
    }

    pub(crate) fn psi1(&self, s: &DirichletSetup, edges: &PowerEdges, v: &[f64]) -> f64 {
        if s.boundary_violated(v) {
            return f64::INFINITY;
        }
        edges.value(v)
    }

    /// `(0, K2)` from the discrete sup bound `|v|_inf^p <= L^(p-1) p psi1 / h^(d-1)`.
    pub(crate) fn lower_bound(&self, s: &DirichletSetup) -> (f64, f64) {
        let g = s.grid();
        let d = g.dim() as i32;
        let r = (self.alpha + 2.0) / self.p;
        let c = g.volume() / (self.alpha + 2.0)
            * (g.length().powf(self.p - 1.0) * self.p / g.h().powi(d - 1)).powf(r);
        let s_star = (c * r).powf(1.0 / (1.0 - r));
        (0.0, s_star * (1.0 - r) / r)
    }

    pub(crate) fn prox(
        &self,
        s: &DirichletSetup,
        edges: &PowerEdges,
        u: &[f64],
        tau: f64,
        inner_tol: f64,
    ) -> Result<Vec<f64>> {
        let alpha = self.alpha;
        let local = move |_k: usize, v: f64| {
            let a = v.abs();
            (
                -a.powf(alpha + 2.0) / (alpha + 2.0),
                -a.powf(alpha) * v,
                -(alpha + 1.0) * a.powf(alpha),
            )
        };
        let obj = GridObjective {
            weights: &s.weights,
            stiffness: None,
            power: Some(edges),
            local: &local,
            anchor: Some((u, 1.0 / tau)),
            curvature_floor: 0.5 / tau,
        };
        let bounds = s.bounds(f64::NEG_INFINITY);
        let m = projected_newton(&obj, u, &bounds, &s.weights, newton_tol(inner_tol, tau, u), NEWTON_ITERS)?;
        Ok(m.x)
    }
}

impl DcExample2 {
    pub(crate) fn validate(&self, s: &DirichletSetup) -> Result<()> {
        if !(self.lambda_h >= 0.0 && self.lambda_h.is_finite()) {
            return Err(Error::InvalidParameter("lambda_h must be non-negative".into()));
        }
        let (_, k2) = self.f.growth_constants();
        if k2 >= s.lambda1 {
            return Err(Error::InvalidParameter(format!(
                "growth constant k2 = {k2} must stay below the first Dirichlet eigenvalue {}",
                s.lambda1
            )));
        }
        Ok(())
    }

    pub(crate) fn kappa(&self) -> f64 {
        0.5 * self.f.max_slope()
    }

    pub(crate) fn psi1(&self, s: &DirichletSetup, v: &[f64]) -> f64 {
        if s.boundary_violated(v) {
            return f64::INFINITY;
        }
        0.5 * s.op.energy_form(v, v)
    }

    pub(crate) fn psi2(&self, s: &DirichletSetup, v: &[f64]) -> f64 {
        s.integral(v, |x| self.f.primitive(x) + self.lambda_h * (x - 1.0).max(0.0))
    }

    pub(crate) fn lower_bound(&self, s: &DirichletSetup) -> (f64, f64) {
        let (k1, k2) = self.f.growth_constants();
        let c = k1 + self.lambda_h;
        (0.0, c * c * s.grid().volume() / (2.0 * (s.lambda1 - k2)))
    }

    /// The concave Heaviside term `-lambda_h (v - 1)^+` is the minimum over
    /// `s in {0, 1}` of `-lambda_h s (v - 1)`; alternating between the node
    /// branches and the smooth subproblem decreases the step objective.
    pub(crate) fn prox(
        &self,
        setup: &DirichletSetup,
        u: &[f64],
        tau: f64,
        inner_tol: f64,
    ) -> Result<Vec<f64>> {
        let mut v = u.to_vec();
        let mut branch: Vec<bool> = u.iter().map(|x| *x > 1.0).collect();
        let stiffness = setup.op.stiffness();
        let bounds = setup.bounds(f64::NEG_INFINITY);
        let tol = newton_tol(inner_tol, tau, u);
        for _ in 0..4 * u.len() + 4 {
            let lh = self.lambda_h;
            let f = &self.f;
            let br = &branch;
            let local = move |k: usize, x: f64| {
                let on = if br[k] { lh } else { 0.0 };
                (-f.primitive(x) - on * (x - 1.0), -f.value(x) - on, -f.slope(x))
            };
            let obj = GridObjective {
                weights: &setup.weights,
                stiffness: Some((&setup.op, stiffness.clone())),
                power: None,
                local: &local,
                anchor: Some((u, 1.0 / tau)),
                curvature_floor: 0.5 / tau,
            };
            v = projected_newton(&obj, &v, &bounds, &setup.weights, tol, NEWTON_ITERS)?.x;
            let next: Vec<bool> = v
                .iter()
                .zip(&branch)
                .map(|(x, b)| if *x == 1.0 { *b } else { *x > 1.0 })
                .collect();
            if next == branch {
                return Ok(v);
            }
            branch = next;
        }
        Err(Error::NonConvergence {
            what: "Heaviside branch selection",
            iterations: 4 * u.len() + 4,
            residual: f64::NAN,
        })
    }
}

impl DcExample3 {
    pub(crate) fn validate(&self, s: &DirichletSetup) -> Result<()> {
        let (_, k3) = self.f2.growth_constants();
        if k3 >= s.lambda1 {
            return Err(Error::InvalidParameter(format!(
                "growth constant k3 = {k3} must stay below the first Dirichlet eigenvalue {}",
                s.lambda1
            )));
        }
        Ok(())
    }

    pub(crate) fn kappa(&self) -> f64 {
        0.5 * self.f2.max_slope()
    }

    pub(crate) fn feasible(&self, s: &DirichletSetup, v: &[f64]) -> bool {
        !s.boundary_violated(v) && v.iter().all(|x| *x >= 0.0)
    }

    pub(crate) fn psi1(&self, s: &DirichletSetup, v: &[f64]) -> f64 {
        if !self.feasible(s, v) {
            return f64::INFINITY;
        }
        0.5 * s.op.energy_form(v, v) + s.integral(v, |x| self.f1.primitive(x))
    }

    pub(crate) fn psi2(&self, s: &DirichletSetup, v: &[f64]) -> f64 {
        s.integral(v, |x| self.f2.primitive(x))
    }

    pub(crate) fn lower_bound(&self, s: &DirichletSetup) -> (f64, f64) {
        let (k2, k3) = self.f2.growth_constants();
        let c = k2 + self.f1.value(0.0).abs();
        (0.0, c * c * s.grid().volume() / (2.0 * (s.lambda1 - k3)))
    }

    pub(crate) fn prox(
        &self,
        setup: &DirichletSetup,
        u: &[f64],
        tau: f64,
        inner_tol: f64,
    ) -> Result<Vec<f64>> {
        let (f1, f2) = (&self.f1, &self.f2);
        let local = move |_k: usize, x: f64| {
            (
                f1.primitive(x) - f2.primitive(x),
                f1.value(x) - f2.value(x),
                f1.slope(x) - f2.slope(x),
            )
        };
        let obj = GridObjective {
            weights: &setup.weights,
            stiffness: Some((&setup.op, setup.op.stiffness())),
            power: None,
            local: &local,
            anchor: Some((u, 1.0 / tau)),
            curvature_floor: 0.5 / tau,
        };
        let bounds = setup.bounds(0.0);
        let m = projected_newton(&obj, u, &bounds, &setup.weights, newton_tol(inner_tol, tau, u), NEWTON_ITERS)?;
        Ok(m.x)
    }
}
