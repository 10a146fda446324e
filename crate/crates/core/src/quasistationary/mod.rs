//! Quasi-stationary phase field model.
//!
//! With `u = theta + chi`, the order parameter `chi` minimizes
//! `F(u, chi) = 1/2 |u - chi|^2 + 1/2 <A2 chi, chi> + int W(chi)` for the
//! current `u`, and `u` follows the gradient flow of
//! `phi(u) = inf_chi F(u, chi)` in the dual norm of the diffusion operator
//! `A1` (shifted by `lambda` for the weakly coercive approximation):
//! `u' + A1 (u - chi) = 0`.

mod lambda;

pub use lambda::{lambda_study, LambdaRow, LambdaStudy, LambdaStudyParams};

use crate::error::{Error, Result};
use crate::functional::minimize::{projected_newton, Bounds, GridObjective};
use crate::space::{weighted_dot, BoundaryCondition, EllipticOperator, Grid, ScalarField};

/// Order-parameter potential `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Well {
    /// `(chi^2 - 1)^2 / 4`.
    DoubleWell,
    /// `I_[-1,1](chi) + (1 - chi)^2`.
    ObstacleQuadratic,
    /// `c1 ((1+chi) ln(1+chi) + (1-chi) ln(1-chi)) - c2 chi^2 + c3 chi + c4`.
    Logarithmic { c1: f64, c2: f64, c3: f64, c4: f64 },
}

/// Interior margin of the logarithmic potential.
pub const LOG_CLAMP: f64 = 1e-12;

impl Well {
    fn validate(&self) -> Result<()> {
        if let Well::Logarithmic { c1, c2, c3, c4 } = *self {
            if !(c1 > 0.0 && c2 > 0.0 && c3.is_finite() && c4.is_finite() && c1.is_finite() && c2.is_finite()) {
                return Err(Error::InvalidParameter(
                    "logarithmic potential needs c1, c2 > 0 and finite c3, c4".into(),
                ));
            }
        }
        Ok(())
    }

    /// `(W, W', W'')` at `chi`; `W = +inf` outside the domain.
    pub fn eval(&self, chi: f64) -> (f64, f64, f64) {
        match *self {
            Well::DoubleWell => {
                let s = chi * chi - 1.0;
                (0.25 * s * s, chi * s, 3.0 * chi * chi - 1.0)
            }
            Well::ObstacleQuadratic => {
                if chi.abs() > 1.0 {
                    (f64::INFINITY, 0.0, 0.0)
                } else {
                    let d = 1.0 - chi;
                    (d * d, -2.0 * d, 2.0)
                }
            }
            Well::Logarithmic { c1, c2, c3, c4 } => {
                if chi.abs() > 1.0 {
                    return (f64::INFINITY, 0.0, 0.0);
                }
                let x = chi.clamp(-1.0 + LOG_CLAMP, 1.0 - LOG_CLAMP);
                let (p, m) = (1.0 + x, 1.0 - x);
                (
                    c1 * (p * p.ln() + m * m.ln()) - c2 * x * x + c3 * x + c4,
                    c1 * (p.ln() - m.ln()) - 2.0 * c2 * x + c3,
                    c1 * (1.0 / p + 1.0 / m) - 2.0 * c2,
                )
            }
        }
    }

    /// Admissible interval for `chi`.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Well::DoubleWell => (f64::NEG_INFINITY, f64::INFINITY),
            Well::ObstacleQuadratic => (-1.0, 1.0),
            Well::Logarithmic { .. } => (-1.0 + LOG_CLAMP, 1.0 - LOG_CLAMP),
        }
    }

    /// True when `chi -> 1/2 (u - chi)^2 + W(chi)` is convex.
    fn inner_convex(&self) -> bool {
        match *self {
            Well::DoubleWell | Well::ObstacleQuadratic => true,
            Well::Logarithmic { c1, c2, .. } => c2 <= c1 + 0.5,
        }
    }

    /// Infimum of `W` over its domain (a lower bound for it).
    fn infimum(&self) -> f64 {
        match *self {
            Well::DoubleWell | Well::ObstacleQuadratic => 0.0,
            Well::Logarithmic { c2, c3, c4, .. } => c4 - c2 - c3.abs(),
        }
    }
}

/// Inner minimizer together with its objective value.
#[derive(Clone, Debug)]
pub struct ChiMinimum {
    pub chi: Vec<f64>,
    pub value: f64,
    /// Set when distinct starts settled on values more than `1e-6` apart.
    pub multimodal: bool,
}

/// Problem data of the quasi-stationary model.
#[derive(Clone, Debug)]
pub struct PhaseFieldProblem {
    grid: Grid,
    a1: EllipticOperator,
    a1_shifted: EllipticOperator,
    a2: Option<EllipticOperator>,
    well: Well,
    lambda: f64,
    mass_bound: Option<f64>,
    inner_tol: f64,
    step_tol: f64,
    max_alternations: usize,
}

/// A point of the coupled evolution. `theta = u - chi` is derived.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub u: ScalarField,
    pub chi: ScalarField,
    pub energy: f64,
}

impl CoupledState {
    pub fn theta(&self) -> ScalarField {
        recover_theta(self)
    }
}

/// `theta = u - chi`.
pub fn recover_theta(state: &CoupledState) -> ScalarField {
    let values = state
        .u
        .values()
        .iter()
        .zip(state.chi.values())
        .map(|(u, c)| u - c)
        .collect();
    ScalarField::new(*state.u.grid(), values).expect("difference of finite fields")
}

impl PhaseFieldProblem {
    /// `a2` must carry a Neumann condition and live on the grid of `a1`.
    pub fn new(a1: EllipticOperator, a2: EllipticOperator, well: Well) -> Result<Self> {
        if a2.boundary() != BoundaryCondition::Neumann {
            return Err(Error::InvalidParameter(
                "the order-parameter operator carries a Neumann condition".into(),
            ));
        }
        if a1.grid() != a2.grid() {
            return Err(Error::Dimension("A1 and A2 live on different grids".into()));
        }
        Self::build(a1, Some(a2), well)
    }

    /// Variant without gradient energy on `chi`, so that the inner problem
    /// decouples node by node. Intended for tests against scalar oracles.
    pub fn without_stiffness(a1: EllipticOperator, well: Well) -> Result<Self> {
        Self::build(a1, None, well)
    }

    fn build(a1: EllipticOperator, a2: Option<EllipticOperator>, well: Well) -> Result<Self> {
        well.validate()?;
        if a1.shift() != 0.0 {
            return Err(Error::InvalidParameter(
                "pass the unshifted diffusion operator; set the shift with with_lambda".into(),
            ));
        }
        Ok(Self {
            grid: *a1.grid(),
            a1_shifted: a1.clone(),
            a1,
            a2,
            well,
            lambda: 0.0,
            mass_bound: None,
            inner_tol: 1e-10,
            step_tol: 1e-9,
            max_alternations: 200,
        })
    }

    /// Weakly coercive approximation `A1 + lambda I`.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.a1_shifted = self.a1.with_shift(lambda)?;
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_mass_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass bound must be positive, got {bound}")));
        }
        self.mass_bound = Some(bound);
        Ok(self)
    }

    pub fn with_tolerances(mut self, inner_tol: f64, step_tol: f64) -> Result<Self> {
        if !(inner_tol > 0.0 && step_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        self.inner_tol = inner_tol;
        self.step_tol = step_tol;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Diffusion operator including the `lambda` shift.
    pub fn diffusion(&self) -> &EllipticOperator {
        &self.a1_shifted
    }

    /// Diffusion operator without shift.
    pub fn base_diffusion(&self) -> &EllipticOperator {
        &self.a1
    }

    pub fn stiffness(&self) -> Option<&EllipticOperator> {
        self.a2.as_ref()
    }

    pub fn well(&self) -> Well {
        self.well
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mass_bound(&self) -> Option<f64> {
        self.mass_bound
    }

    pub fn inner_tol(&self) -> f64 {
        self.inner_tol
    }

    pub fn step_tol(&self) -> f64 {
        self.step_tol
    }

    /// True when mass is conserved exactly by the flow.
    pub fn conserves_mass(&self) -> bool {
        self.a1_shifted.is_singular()
    }

    /// `(K1, K2)` with `phi(u) >= -K1 |u| - K2`.
    pub fn lower_bound(&self) -> (f64, f64) {
        (0.0, (-self.well.infimum()).max(0.0) * self.grid.volume())
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.node_count() {
            return Err(Error::Dimension(format!(
                "field has {} entries, grid has {} nodes",
                v.len(),
                self.grid.node_count()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("field has non-finite entries".into()));
        }
        Ok(())
    }

    /// `F(u, chi)`; `+inf` when `chi` leaves the domain of the well.
    pub fn energy(&self, u: &[f64], chi: &[f64]) -> Result<f64> {
        self.check(u)?;
        self.check(chi)?;
        Ok(self.energy_unchecked(u, chi))
    }

    fn energy_unchecked(&self, u: &[f64], chi: &[f64]) -> f64 {
        let w = self.a1.weights();
        let mut total = 0.0;
        for k in 0..u.len() {
            let (wk, _, _) = self.well.eval(chi[k]);
            if !wk.is_finite() {
                return f64::INFINITY;
            }
            let d = u[k] - chi[k];
            total += w[k] * (0.5 * d * d + wk);
        }
        if let Some(a2) = &self.a2 {
            total += 0.5 * a2.energy_form(chi, chi);
        }
        total
    }

    fn local_minimize(&self, u: &[f64], start: &[f64]) -> Result<(Vec<f64>, f64)> {
        let w = self.a1.weights();
        let well = self.well;
        let local = move |_k: usize, x: f64| well.eval(x);
        let stiffness = self.a2.as_ref().map(|a| (a, a.stiffness()));
        let obj = GridObjective {
            weights: w,
            stiffness,
            power: None,
            local: &local,
            anchor: Some((u, 1.0)),
            curvature_floor: 1e-8,
        };
        let (lo, hi) = self.well.domain();
        let bounds = Bounds {
            lower: vec![lo; u.len()],
            upper: vec![hi; u.len()],
        };
        let scale = u.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        let m = projected_newton(&obj, start, &bounds, w, self.inner_tol * scale, 500)?;
        Ok((m.x, m.value))
    }

    /// Minimizer of `chi -> F(u, chi)`. A single start (the hint, or `u`
    /// clipped to the well's domain) suffices when the inner problem is
    /// convex; otherwise the starts `{hint, clip(u), +1, -1}` are compared
    /// and the lowest value wins, ties going to the lexicographically
    /// smallest field.
    pub fn minimize_chi(&self, u: &[f64], hint: Option<&[f64]>) -> Result<ChiMinimum> {
        self.check(u)?;
        let (lo, hi) = self.well.domain();
        let clip: Vec<f64> = u.iter().map(|x| x.clamp(lo, hi)).collect();
        if self.well.inner_convex() {
            let start = hint.unwrap_or(&clip);
            let (chi, value) = self.local_minimize(u, start)?;
            return Ok(ChiMinimum {
                chi,
                value,
                multimodal: false,
            });
        }
        let edge = 1.0 - 1e-3;
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(h) = hint {
            starts.push(h.to_vec());
        }
        starts.push(clip);
        starts.push(vec![edge; u.len()]);
        starts.push(vec![-edge; u.len()]);
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut values = Vec::new();
        for s in &starts {
            let (chi, value) = self.local_minimize(u, s)?;
            values.push(value);
            best = match best {
                None => Some((chi, value)),
                Some((bc, bv)) => {
                    let better = value < bv - 1e-12
                        || ((value - bv).abs() <= 1e-12 && chi.iter().partial_cmp(bc.iter()) == Some(std::cmp::Ordering::Less));
                    if better {
                        Some((chi, value))
                    } else {
                        Some((bc, bv))
                    }
                }
            };
        }
        let (chi, value) = best.expect("at least one start");
        let spread = values.iter().fold(0.0_f64, |m, v| m.max(v - value));
        Ok(ChiMinimum {
            chi,
            value,
            multimodal: spread > 1e-6,
        })
    }

    /// Reduced energy `phi(u) = F(u, minimize_chi(u))`.
    pub fn phi(&self, u: &[f64]) -> Result<f64> {
        let m = self.minimize_chi(u, None)?;
        Ok(self.energy_unchecked(u, &m.chi))
    }

    /// One implicit step `(v - u)/tau + A (v - chi) = 0`, `chi in M(v)`,
    /// by alternating a linear solve in `v` with the inner minimization.
    /// Depends only on `(u, tau)`.
    pub fn implicit_step(&self, u: &[f64], tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(u)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        let a = &self.a1_shifted;
        let w = a.weights();
        let n = u.len();
        let mass = 1.0 / tau;
        let conserve = a.is_singular();
        let volume: f64 = w.iter().sum();
        let mean_u = weighted_dot(w, u, &vec![1.0; n]) / volume;

        let mut chi = self.minimize_chi(u, None)?.chi;
        let mut v = u.to_vec();
        let mut s_chi = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut last = f64::INFINITY;
        for _ in 0..self.max_alternations {
            a.stiffness_apply(&chi, &mut s_chi);
            for k in 0..n {
                b[k] = w[k] * u[k] * mass + s_chi[k];
            }
            let v_prev = v.clone();
            a.solve_system(mass, &b, &mut v, 1e-14)?;
            if conserve {
                let drift = weighted_dot(w, &v, &vec![1.0; n]) / volume - mean_u;
                v.iter_mut().for_each(|x| *x -= drift);
            }
            let next = self.minimize_chi(&v, Some(&chi))?.chi;
            let dv = v.iter().zip(&v_prev).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            let dc = next.iter().zip(&chi).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            chi = next;
            last = dv.max(dc);
            if last <= self.step_tol {
                return Ok((v, chi));
            }
        }
        Err(Error::NonConvergence {
            what: "coupled step alternation",
            iterations: self.max_alternations,
            residual: last,
        })
    }

    fn to_field(&self, v: Vec<f64>) -> Result<ScalarField> {
        ScalarField::new(self.grid, v)
    }

    /// Coupled state at `u` with `chi = minimize_chi(u)`.
    pub fn coupled_state(&self, u: &ScalarField) -> Result<CoupledState> {
        let m = self.minimize_chi(u.values(), None)?;
        let energy = self.energy_unchecked(u.values(), &m.chi);
        Ok(CoupledState {
            u: u.clone(),
            chi: self.to_field(m.chi)?,
            energy,
        })
    }

    /// One coupled step from `state`.
    pub fn step_coupled(&self, state: &CoupledState, tau: f64) -> Result<CoupledState> {
        let (v, chi) = self.implicit_step(state.u.values(), tau)?;
        let energy = self.energy_unchecked(&v, &chi);
        Ok(CoupledState {
            u: self.to_field(v)?,
            chi: self.to_field(chi)?,
            energy,
        })
    }

    /// Stationarity defect of `(u, chi)`: the larger of the L2 norm of
    /// `A (u - chi)` and the projected residual of the inner problem.
    pub fn stationary_residual(&self, u: &[f64], chi: &[f64]) -> Result<f64> {
        self.check(u)?;
        self.check(chi)?;
        let theta: Vec<f64> = u.iter().zip(chi).map(|(a, b)| a - b).collect();
        let a_theta = self.a1_shifted.apply_slice(&theta);
        let w = self.a1.weights();
        let flux = weighted_dot(w, &a_theta, &a_theta).sqrt();
        Ok(flux.max(self.inner_residual(u, chi)))
    }

    /// Projected gradient residual of `chi -> F(u, chi)` in the max norm.
    pub fn inner_residual(&self, u: &[f64], chi: &[f64]) -> f64 {
        let w = self.a1.weights();
        let n = u.len();
        let mut g = vec![0.0; n];
        if let Some(a2) = &self.a2 {
            a2.stiffness_apply(chi, &mut g);
        }
        let (lo, hi) = self.well.domain();
        let mut r = 0.0_f64;
        for k in 0..n {
            let (_, d1, _) = self.well.eval(chi[k]);
            let grad = g[k] / w[k] + d1 + chi[k] - u[k];
            let projected = (chi[k] - grad).clamp(lo, hi);
            r = r.max((chi[k] - projected).abs());
        }
        r
    }
}

/// Coupled trajectory with its energy ledger.
#[derive(Clone, Debug)]
pub struct CoupledTrajectory {
    pub tau: f64,
    pub states: Vec<CoupledState>,
    /// `F(u_n, chi_n)` per step.
    pub energies: Vec<f64>,
    /// Per-step dissipation `tau a(theta_{n+1}, theta_{n+1})`.
    pub dissipation: Vec<f64>,
}

/// Iterates [`PhaseFieldProblem::step_coupled`] for `ceil(T / tau)` steps,
/// keeping every state.
pub fn evolve_coupled(
    problem: &PhaseFieldProblem,
    u0: &ScalarField,
    tau: f64,
    horizon: f64,
) -> Result<CoupledTrajectory> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter("horizon must be non-negative".into()));
    }
    let steps = crate::flow::step_count(tau, horizon)?;
    let first = problem.coupled_state(u0)?;
    let mut energies = vec![first.energy];
    let mut dissipation = vec![0.0];
    let mut states = vec![first];
    for _ in 0..steps {
        let next = problem.step_coupled(states.last().unwrap(), tau)?;
        let theta: Vec<f64> = next.u.values().iter().zip(next.chi.values()).map(|(a, b)| a - b).collect();
        dissipation.push(tau * problem.diffusion().energy_form(&theta, &theta));
        energies.push(next.energy);
        states.push(next);
    }
    Ok(CoupledTrajectory {
        tau,
        states,
        energies,
        dissipation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(well: Well) -> PhaseFieldProblem {
        let g = Grid::cell_1d(8, 1.0).unwrap();
        let a1 = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
        PhaseFieldProblem::without_stiffness(a1, well).unwrap()
    }

    #[test]
    fn zero_stiffness_double_well_cube_root() {
        let p = toy(Well::DoubleWell);
        let m = p.minimize_chi(&[8.0; 8], None).unwrap();
        assert!(m.chi.iter().all(|c| (c - 2.0).abs() < 1e-10));
        let z = p.minimize_chi(&[0.0; 8], None).unwrap();
        assert!(z.chi.iter().all(|c| *c == 0.0));
        assert!((z.value - 0.25).abs() < 1e-14);
    }

    #[test]
    fn obstacle_well_is_constrained() {
        let p = toy(Well::ObstacleQuadratic);
        let m = p.minimize_chi(&[3.0; 8], None).unwrap();
        assert!(m.chi.iter().all(|c| *c == 1.0));
        assert!(p.inner_residual(&[3.0; 8], &m.chi) == 0.0);
        assert_eq!(p.energy(&[0.0; 8], &[1.5; 8]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn nonconvex_logarithmic_well_uses_multistart() {
        let p = toy(Well::Logarithmic {
            c1: 0.1,
            c2: 1.0,
            c3: 0.0,
            c4: 0.0,
        });
        let m = p.minimize_chi(&[0.0; 8], None).unwrap();
        assert!(m.chi.iter().all(|c| c.abs() < 1.0));
        // Symmetric wells: the two symmetric minima tie, the smaller wins.
        assert!(m.chi[0] < 0.0);
    }

    #[test]
    fn theta_is_the_difference() {
        let g = Grid::cell_1d(4, 1.0).unwrap();
        let s = CoupledState {
            u: ScalarField::constant(g, 8.0),
            chi: ScalarField::constant(g, 2.0),
            energy: 0.0,
        };
        assert!(recover_theta(&s).values().iter().all(|t| *t == 6.0));
    }
}
