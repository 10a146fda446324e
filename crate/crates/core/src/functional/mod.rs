//! Energies with evaluation, proximal maps and subgradient estimates.
//!
//! A [`FunctionalSpec`] pairs an energy with the Hilbert space the gradient
//! flow runs in. States are plain vectors: one entry per coordinate for
//! Euclidean ambients, one per grid node otherwise.

mod dc;
pub(crate) mod minimize;
mod scalar;
mod table;

pub use dc::{DcExample1, DcExample2, DcExample3};
pub use scalar::{ConvexPart, ScalarToy, SmoothPart};
pub use table::MonotoneTable;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quasistationary::PhaseFieldProblem;
use crate::space::{dual_product, weighted_dot, EllipticOperator, Grid};
use dc::DirichletSetup;
use minimize::PowerEdges;

/// Hilbert space in which the flow is taken.
#[derive(Clone, Debug)]
pub enum Ambient {
    Euclidean { dim: usize },
    /// Quadrature-weighted L2 on a grid.
    L2(Grid),
    /// Dual norm `a(A^{-1} u, A^{-1} u)` of an elliptic operator.
    Dual(EllipticOperator),
}

impl Ambient {
    pub fn state_len(&self) -> usize {
        match self {
            Ambient::Euclidean { dim } => *dim,
            Ambient::L2(g) => g.node_count(),
            Ambient::Dual(a) => a.grid().node_count(),
        }
    }

    pub fn grid(&self) -> Option<&Grid> {
        match self {
            Ambient::Euclidean { .. } => None,
            Ambient::L2(g) => Some(g),
            Ambient::Dual(a) => Some(a.grid()),
        }
    }

    /// Squared ambient norm of `d`. For a singular dual ambient `d` is a
    /// difference of states of equal mass; its mean, which is rounding
    /// noise, is removed before the solve.
    pub fn norm_sq(&self, d: &[f64]) -> Result<f64> {
        match self {
            Ambient::Euclidean { .. } => Ok(d.iter().map(|x| x * x).sum()),
            Ambient::L2(g) => Ok(weighted_dot(&g.weights(), d, d)),
            Ambient::Dual(a) if a.is_singular() => {
                let w = a.weights();
                let m = weighted_dot(w, d, &vec![1.0; d.len()]) / w.iter().sum::<f64>();
                let centered: Vec<f64> = d.iter().map(|x| x - m).collect();
                dual_product(a, &centered, &centered)
            }
            Ambient::Dual(a) => dual_product(a, d, d),
        }
    }
}

/// The catalogue of energies.
#[derive(Clone, Debug)]
pub enum Variant {
    ScalarToy(ScalarToy),
    /// Separable `sum_i convex(x_i) + smooth(x_i)` on `R^dim`.
    ConvexPlusC1 { convex: ConvexPart, smooth: SmoothPart },
    DcExample1(DcExample1),
    DcExample2(DcExample2),
    DcExample3(DcExample3),
    QuasiStationary(Arc<PhaseFieldProblem>),
}

#[derive(Clone, Debug)]
enum Cache {
    None,
    Dirichlet(Arc<DirichletSetup>),
    PLaplace(Arc<DirichletSetup>, Arc<PowerEdges>),
}

/// An energy together with its ambient space and solver settings.
#[derive(Clone, Debug)]
pub struct FunctionalSpec {
    variant: Variant,
    ambient: Ambient,
    kappa: f64,
    lower: (f64, f64),
    inner_tol: f64,
    cache: Cache,
}

/// Result of one proximal step.
#[derive(Clone, Debug)]
pub struct ProxStep {
    pub state: Vec<f64>,
    /// Auxiliary field attached to the step (the order parameter for the
    /// quasi-stationary energy).
    pub aux: Option<Vec<f64>>,
}

/// A subgradient selection at a point.
#[derive(Clone, Debug)]
pub struct Subgradient {
    pub point: Vec<f64>,
    pub value: f64,
    pub selection: Vec<f64>,
    pub residual_norm: f64,
}

/// Probe step of the proximal-gradient residual map.
pub const PROBE_STEP: f64 = 1e-4;

/// Default relative accuracy of inner solvers.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;

impl FunctionalSpec {
    pub fn scalar_toy(kind: ScalarToy) -> Self {
        Self {
            kappa: kind.semiconvexity(),
            variant: Variant::ScalarToy(kind),
            ambient: Ambient::Euclidean { dim: 1 },
            lower: (0.0, 0.0),
            inner_tol: DEFAULT_INNER_TOL,
            cache: Cache::None,
        }
    }

    pub fn min_quadratics() -> Self {
        Self::scalar_toy(ScalarToy::MinQuadratics)
    }

    pub fn double_well() -> Self {
        Self::scalar_toy(ScalarToy::DoubleWell)
    }

    pub fn convex_plus_c1(dim: usize, convex: ConvexPart, smooth: SmoothPart) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        convex.validate()?;
        smooth.validate()?;
        let lower = match smooth {
            SmoothPart::Zero => (0.0, 0.0),
            SmoothPart::Linear { slope } => (slope.abs() * (dim as f64).sqrt(), 0.0),
            SmoothPart::Cosine { amplitude, .. } => (0.0, amplitude.abs() * dim as f64),
        };
        Ok(Self {
            kappa: scalar::convex_plus_smooth_kappa(&convex, &smooth),
            variant: Variant::ConvexPlusC1 { convex, smooth },
            ambient: Ambient::Euclidean { dim },
            lower,
            inner_tol: DEFAULT_INNER_TOL,
            cache: Cache::None,
        })
    }

    /// `x -> coeff * |x|^2` on `R^dim`.
    pub fn quadratic(dim: usize, coeff: f64) -> Result<Self> {
        Self::convex_plus_c1(dim, ConvexPart::Quadratic { coeff }, SmoothPart::Zero)
    }

    pub fn dc_example1(grid: Grid, params: DcExample1) -> Result<Self> {
        params.validate()?;
        let setup = Arc::new(DirichletSetup::new(grid)?);
        let edges = Arc::new(setup.power_edges(params.p));
        Ok(Self {
            kappa: params.kappa(),
            lower: params.lower_bound(&setup),
            variant: Variant::DcExample1(params),
            ambient: Ambient::L2(grid),
            inner_tol: DEFAULT_INNER_TOL,
            cache: Cache::PLaplace(setup, edges),
        })
    }

    pub fn dc_example2(grid: Grid, params: DcExample2) -> Result<Self> {
        let setup = Arc::new(DirichletSetup::new(grid)?);
        params.validate(&setup)?;
        Ok(Self {
            kappa: params.kappa(),
            lower: params.lower_bound(&setup),
            variant: Variant::DcExample2(params),
            ambient: Ambient::L2(grid),
            inner_tol: DEFAULT_INNER_TOL,
            cache: Cache::Dirichlet(setup),
        })
    }

    pub fn dc_example3(grid: Grid, params: DcExample3) -> Result<Self> {
        let setup = Arc::new(DirichletSetup::new(grid)?);
        params.validate(&setup)?;
        Ok(Self {
            kappa: params.kappa(),
            lower: params.lower_bound(&setup),
            variant: Variant::DcExample3(params),
            ambient: Ambient::L2(grid),
            inner_tol: DEFAULT_INNER_TOL,
            cache: Cache::Dirichlet(setup),
        })
    }

    /// The reduced quasi-stationary energy, flowing in the dual norm of the
    /// (possibly shifted) diffusion operator.
    pub fn quasi_stationary(problem: Arc<PhaseFieldProblem>) -> Self {
        Self {
            kappa: 0.0,
            lower: problem.lower_bound(),
            ambient: Ambient::Dual(problem.diffusion().clone()),
            variant: Variant::QuasiStationary(problem),
            inner_tol: DEFAULT_INNER_TOL,
            cache: Cache::None,
        }
    }

    /// Relative accuracy of the inner minimization in `prox`.
    pub fn with_inner_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("inner_tol must be positive, got {tol}")));
        }
        self.inner_tol = tol;
        Ok(self)
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn inner_tol(&self) -> f64 {
        self.inner_tol
    }

    pub fn state_len(&self) -> usize {
        self.ambient.state_len()
    }

    /// Semiconvexity constant `kappa`: `phi + kappa |.|^2` is convex on the
    /// relevant sublevels. Infinite for the non-semiconvex toy.
    pub fn semiconvexity(&self) -> f64 {
        self.kappa
    }

    /// Largest admissible time step `1 / (4 kappa)`. Unbounded when the
    /// proximal subproblem is solved exactly by enumeration or when the
    /// energy is convex.
    pub fn tau_max(&self) -> f64 {
        match &self.variant {
            Variant::ScalarToy(ScalarToy::MinQuadratics) | Variant::QuasiStationary(_) => f64::INFINITY,
            _ if self.kappa == 0.0 => f64::INFINITY,
            _ => 1.0 / (4.0 * self.kappa),
        }
    }

    /// Constants `(K1, K2)` with `phi(u) >= -K1 |u| - K2`.
    pub fn lower_bound_constants(&self) -> (f64, f64) {
        self.lower
    }

    /// Smallest eigenvalue of the discrete Dirichlet Laplacian for the grid
    /// examples.
    pub fn dirichlet_eigenvalue(&self) -> Option<f64> {
        match &self.cache {
            Cache::Dirichlet(s) | Cache::PLaplace(s, _) => Some(s.lambda1),
            Cache::None => None,
        }
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.state_len() {
            return Err(Error::Dimension(format!(
                "state has {} entries, ambient space has dimension {}",
                u.len(),
                self.state_len()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("state has non-finite entries".into()));
        }
        Ok(())
    }

    fn setup(&self) -> &DirichletSetup {
        match &self.cache {
            Cache::Dirichlet(s) | Cache::PLaplace(s, _) => s,
            Cache::None => unreachable!("grid example without setup"),
        }
    }

    /// Energy at `u`; `+inf` outside the domain.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        match &self.variant {
            Variant::ScalarToy(kind) => Ok(kind.value(u[0])),
            Variant::ConvexPlusC1 { convex, smooth } => {
                let mut total = 0.0;
                for &x in u {
                    total += convex.value(x) + smooth.value(x);
                }
                Ok(total)
            }
            Variant::QuasiStationary(problem) => problem.phi(u),
            _ => {
                let (psi1, psi2) = self.dc_split(u)?;
                Ok(if psi1.is_infinite() { f64::INFINITY } else { psi1 - psi2 })
            }
        }
    }

    /// `(psi1(u), psi2(u))` of the convex splitting `phi = psi1 - psi2`.
    pub fn dc_split(&self, u: &[f64]) -> Result<(f64, f64)> {
        self.check_len(u)?;
        match (&self.variant, &self.cache) {
            (Variant::DcExample1(ex), Cache::PLaplace(s, edges)) => Ok((ex.psi1(s, edges, u), ex.psi2(s, u))),
            (Variant::DcExample2(ex), Cache::Dirichlet(s)) => Ok((ex.psi1(s, u), ex.psi2(s, u))),
            (Variant::DcExample3(ex), Cache::Dirichlet(s)) => Ok((ex.psi1(s, u), ex.psi2(s, u))),
            _ => Err(Error::UnsupportedVariant(
                "convex splitting is defined for the difference-of-convex examples".into(),
            )),
        }
    }

    /// Minimizing-movement step `argmin_v phi(v) + |v - u|^2 / (2 tau)`.
    ///
    /// The result depends only on `(u, tau)`; `hint` is accepted for
    /// interface symmetry and does not influence the selected minimizer.
    pub fn prox(&self, u: &[f64], tau: f64, hint: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(self.prox_step(u, tau, hint)?.state)
    }

    pub fn prox_step(&self, u: &[f64], tau: f64, _hint: Option<&[f64]>) -> Result<ProxStep> {
        self.check_len(u)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
        }
        let tau_max = self.tau_max();
        if tau > tau_max {
            return Err(Error::StepTooLarge { tau, tau_max });
        }
        let state = match &self.variant {
            Variant::ScalarToy(kind) => vec![kind.prox(u[0], tau)],
            Variant::ConvexPlusC1 { convex, smooth } => u
                .iter()
                .map(|&x| scalar::convex_plus_smooth_prox(convex, smooth, x, tau))
                .collect(),
            Variant::DcExample1(ex) => match &self.cache {
                Cache::PLaplace(s, edges) => ex.prox(s, edges, u, tau, self.inner_tol)?,
                _ => unreachable!(),
            },
            Variant::DcExample2(ex) => ex.prox(self.setup(), u, tau, self.inner_tol)?,
            Variant::DcExample3(ex) => ex.prox(self.setup(), u, tau, self.inner_tol)?,
            Variant::QuasiStationary(problem) => {
                let (v, chi) = problem.implicit_step(u, tau)?;
                return Ok(ProxStep {
                    state: v,
                    aux: Some(chi),
                });
            }
        };
        Ok(ProxStep { state, aux: None })
    }

    /// Every minimizer of the proximal subproblem that ties with the
    /// selected one. Only the non-semiconvex toy can return more than one.
    pub fn prox_branches(&self, u: &[f64], tau: f64) -> Result<Vec<Vec<f64>>> {
        match self.variant {
            Variant::ScalarToy(kind) => {
                self.check_len(u)?;
                if tau > self.tau_max() || !(tau > 0.0) {
                    return Err(Error::StepTooLarge {
                        tau,
                        tau_max: self.tau_max(),
                    });
                }
                Ok(kind.prox_branches(u[0], tau).into_iter().map(|v| vec![v]).collect())
            }
            _ => Ok(vec![self.prox(u, tau, None)?]),
        }
    }

    /// Minimal-norm subgradient estimate `(u - prox(u, t)) / t` with the
    /// probe step `t = min(PROBE_STEP, tau_max)`.
    pub fn subgradient_min_norm(&self, u: &[f64]) -> Result<Subgradient> {
        let value = self.eval(u)?;
        if !value.is_finite() {
            return Err(Error::Domain("subgradient requested outside the domain".into()));
        }
        let t = PROBE_STEP.min(self.tau_max());
        let v = self.prox(u, t, None)?;
        let selection: Vec<f64> = u.iter().zip(&v).map(|(a, b)| (a - b) / t).collect();
        let residual_norm = self.ambient.norm_sq(&selection)?.max(0.0).sqrt();
        Ok(Subgradient {
            point: u.to_vec(),
            value,
            selection,
            residual_norm,
        })
    }

    fn toy(&self, what: &str) -> Result<ScalarToy> {
        match self.variant {
            Variant::ScalarToy(kind) => Ok(kind),
            _ => Err(Error::UnsupportedVariant(format!("{what} is only available for scalar toys"))),
        }
    }

    /// Samples the strong limiting subdifferential at `x`: Fréchet gradients
    /// along sequences `x +- radius 2^-j` (`j < samples`) with converging
    /// energies, extrapolated to the limit and clustered.
    pub fn limiting_subdiff_sample(&self, x: f64, radius: f64, samples: usize) -> Result<Vec<f64>> {
        let kind = self.toy("limiting_subdiff_sample")?;
        if !(radius > 0.0) || samples < 2 {
            return Err(Error::InvalidParameter("need radius > 0 and at least two samples".into()));
        }
        let fx = kind.value(x);
        let mut limits = Vec::new();
        if let Some(g) = kind.derivative(x) {
            limits.push(g);
        }
        for side in [-1.0, 1.0] {
            let mut seq = Vec::new();
            let mut energies = Vec::new();
            for j in 0..samples {
                let d = radius * 0.5f64.powi(j as i32);
                let y = x + side * d;
                if let Some(g) = kind.derivative(y) {
                    seq.push(g);
                    energies.push((kind.value(y) - fx).abs());
                }
            }
            if seq.len() < 2 {
                continue;
            }
            let n = seq.len();
            if energies[n - 1] > energies[0].max(1e-300) {
                continue;
            }
            // Gradients are smooth in the offset along each side: one
            // Richardson step removes the linear term.
            limits.push(2.0 * seq[n - 1] - seq[n - 2]);
        }
        Ok(cluster_scalars(limits, 1e-6))
    }

    /// Fréchet subdifferential of a scalar toy as the interval between the
    /// left and right derivatives; `None` when it is empty.
    pub fn frechet_subdiff(&self, x: f64, radius: f64, samples: usize) -> Result<Option<(f64, f64)>> {
        let kind = self.toy("frechet_subdiff")?;
        if !(radius > 0.0) || samples < 2 {
            return Err(Error::InvalidParameter("need radius > 0 and at least two samples".into()));
        }
        let fx = kind.value(x);
        let quotient = |side: f64| {
            let q = |d: f64| (kind.value(x + side * d) - fx) / (side * d);
            let d_last = radius * 0.5f64.powi(samples as i32 - 1);
            2.0 * q(d_last) - q(2.0 * d_last)
        };
        let left = quotient(-1.0);
        let right = quotient(1.0);
        let slack = 1e-6;
        Ok(if left <= right + slack {
            Some((left.min(right), right.max(left)))
        } else {
            None
        })
    }
}

/// Sorted representatives of values merged within `tol`.
fn cluster_scalars(mut values: Vec<f64>, tol: f64) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        match out.last() {
            Some(&last) if (v - last).abs() <= tol => {}
            _ => out.push(v),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_values() {
        assert_eq!(FunctionalSpec::double_well().eval(&[1.0]).unwrap(), 0.0);
        assert_eq!(FunctionalSpec::min_quadratics().eval(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_prox_closed_form() {
        let q = FunctionalSpec::quadratic(1, 1.0).unwrap();
        assert_eq!(q.prox(&[1.0], 0.5, None).unwrap(), vec![0.5]);
        assert_eq!(q.tau_max(), f64::INFINITY);
    }

    #[test]
    fn step_bound_is_enforced() {
        let dw = FunctionalSpec::double_well();
        assert_eq!(dw.tau_max(), 0.5);
        assert!(matches!(dw.prox(&[0.3], 0.6, None), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn limiting_samples_at_kink() {
        let mq = FunctionalSpec::min_quadratics();
        let s = mq.limiting_subdiff_sample(0.0, 0.1, 20).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0] + 2.0).abs() < 1e-6 && (s[1] - 2.0).abs() < 1e-6);
        assert!(mq.frechet_subdiff(0.0, 0.1, 20).unwrap().is_none());
        assert!(FunctionalSpec::double_well()
            .limiting_subdiff_sample(0.0, 0.1, 3)
            .is_ok());
        assert!(FunctionalSpec::quadratic(1, 1.0)
            .unwrap()
            .limiting_subdiff_sample(0.0, 0.1, 3)
            .is_err());
    }

    #[test]
    fn clustering_merges_close_values() {
        assert_eq!(cluster_scalars(vec![1.0, -1.0, 1.0 + 1e-9], 1e-6), vec![-1.0, 1.0]);
    }
}
