//! Ensembles of trajectories: the operator `T(t)`, excess, omega-limits,
//! rest points and attractor estimates in the phase metric
//! `d(u, v) = |u - v| + |phi(u) - phi(v)|`.

pub mod seeding;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{evolve, step_count, Trajectory};
use crate::functional::{Ambient, FunctionalSpec, ScalarToy, Variant};
use crate::space::{weighted_dot, EllipticOperator};

/// Shift used for the dual norm when the flow's own operator is singular.
pub const DEFAULT_METRIC_SHIFT: f64 = 1.0;

/// A finite set of states.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub points: Vec<Vec<f64>>,
    /// Evolution time the points have been advanced by.
    pub time: f64,
}

impl Ensemble {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        Self { points, time: 0.0 }
    }

    pub fn scalars(values: &[f64]) -> Self {
        Self::new(values.iter().map(|v| vec![*v]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug)]
enum Norm {
    Euclidean,
    Weighted(Vec<f64>),
    Dual(EllipticOperator),
}

/// A state prepared for repeated distance evaluations.
#[derive(Clone, Debug)]
pub struct Embedded {
    state: Vec<f64>,
    /// `A^{-1} state` for dual norms, the state itself otherwise.
    coords: Vec<f64>,
    energy: f64,
}

impl Embedded {
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

/// Phase metric `|u - v|_H + |phi(u) - phi(v)|` of a functional. For dual
/// ambients with a singular operator the norm of a shifted operator is used.
#[derive(Clone, Debug)]
pub struct PhaseMetric {
    phi: FunctionalSpec,
    norm: Norm,
}

impl PhaseMetric {
    pub fn new(phi: &FunctionalSpec) -> Result<Self> {
        let norm = match phi.ambient() {
            Ambient::Euclidean { .. } => Norm::Euclidean,
            Ambient::L2(g) => Norm::Weighted(g.weights()),
            Ambient::Dual(a) if a.is_singular() => Norm::Dual(a.with_shift(DEFAULT_METRIC_SHIFT)?),
            Ambient::Dual(a) => Norm::Dual(a.clone()),
        };
        Ok(Self { phi: phi.clone(), norm })
    }

    /// Metric whose norm part is the dual norm of `op`.
    pub fn with_dual_operator(phi: &FunctionalSpec, op: EllipticOperator) -> Result<Self> {
        if op.is_singular() {
            return Err(Error::InvalidParameter(
                "the dual norm of a singular operator is not a norm on all states".into(),
            ));
        }
        if op.grid().node_count() != phi.state_len() {
            return Err(Error::Dimension("metric operator does not match the state space".into()));
        }
        Ok(Self {
            phi: phi.clone(),
            norm: Norm::Dual(op),
        })
    }

    pub fn functional(&self) -> &FunctionalSpec {
        &self.phi
    }

    pub fn embed(&self, u: &[f64]) -> Result<Embedded> {
        let energy = self.phi.eval(u)?;
        if !energy.is_finite() {
            return Err(Error::Domain("phase distance needs finite energy".into()));
        }
        let coords = match &self.norm {
            Norm::Dual(a) => a.solve_slice(u, 1e-13)?,
            _ => u.to_vec(),
        };
        Ok(Embedded {
            state: u.to_vec(),
            coords,
            energy,
        })
    }

    pub fn embed_all(&self, points: &[Vec<f64>]) -> Result<Vec<Embedded>> {
        points.par_iter().map(|p| self.embed(p)).collect()
    }

    /// Ambient norm of `a - b`.
    pub fn norm_distance(&self, a: &Embedded, b: &Embedded) -> f64 {
        let sq = match &self.norm {
            Norm::Euclidean => a.state.iter().zip(&b.state).map(|(x, y)| (x - y) * (x - y)).sum(),
            Norm::Weighted(w) => {
                let d: Vec<f64> = a.state.iter().zip(&b.state).map(|(x, y)| x - y).collect();
                weighted_dot(w, &d, &d)
            }
            Norm::Dual(op) => {
                let w = op.weights();
                let mut acc = 0.0;
                for k in 0..w.len() {
                    acc += w[k] * (a.coords[k] - b.coords[k]) * (a.state[k] - b.state[k]);
                }
                acc
            }
        };
        sq.max(0.0).sqrt()
    }

    pub fn distance(&self, a: &Embedded, b: &Embedded) -> f64 {
        self.norm_distance(a, b) + (a.energy - b.energy).abs()
    }

    pub fn phase_distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        Ok(self.distance(&self.embed(u)?, &self.embed(v)?))
    }
}

/// `d_X(u, v)` under the default metric of `phi`.
pub fn phase_distance(u: &[f64], v: &[f64], phi: &FunctionalSpec) -> Result<f64> {
    PhaseMetric::new(phi)?.phase_distance(u, v)
}

/// Excess `sup_{a in A} inf_{b in B} d(a, b)` of embedded sets.
pub fn excess_embedded(metric: &PhaseMetric, a: &[Embedded], b: &[Embedded]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("excess of an empty set".into()));
    }
    Ok(a.par_iter()
        .map(|x| b.iter().map(|y| metric.distance(x, y)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max))
}

/// Hausdorff excess `e(A, B)` under the phase metric.
pub fn excess(metric: &PhaseMetric, a: &Ensemble, b: &Ensemble) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("excess of an empty set".into()));
    }
    let ea = metric.embed_all(&a.points)?;
    let eb = metric.embed_all(&b.points)?;
    excess_embedded(metric, &ea, &eb)
}

/// Endpoints of the flow for `steps` steps from `u`, following every tied
/// branch of the first proximal step.
fn flow_endpoints(phi: &FunctionalSpec, u: &[f64], tau: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps == 0 {
        return Ok(vec![u.to_vec()]);
    }
    let branching = matches!(phi.variant(), Variant::ScalarToy(ScalarToy::MinQuadratics));
    let mut heads = if branching {
        phi.prox_branches(u, tau)?
    } else {
        vec![phi.prox(u, tau, Some(u))?]
    };
    for h in heads.iter_mut() {
        for _ in 1..steps {
            let next = phi.prox(h, tau, Some(h))?;
            *h = next;
        }
    }
    Ok(heads)
}

/// `T(t) E`: every point advanced by the deterministic scheme. Points at
/// which the proximal step ties contribute one endpoint per branch.
pub fn advance(phi: &FunctionalSpec, e: &Ensemble, t: f64, tau: f64) -> Result<Ensemble> {
    let steps = step_count(tau, t)?;
    if tau > phi.tau_max() {
        return Err(Error::StepTooLarge {
            tau,
            tau_max: phi.tau_max(),
        });
    }
    let per_point: Vec<Vec<Vec<f64>>> = e
        .points
        .par_iter()
        .map(|p| flow_endpoints(phi, p, tau, steps))
        .collect::<Result<_>>()?;
    Ok(Ensemble {
        points: per_point.into_iter().flatten().collect(),
        time: e.time + steps as f64 * tau,
    })
}

/// Greedy clustering: points are visited in the given order and kept when
/// farther than `radius` from every kept point.
pub fn cluster(metric: &PhaseMetric, points: &[Embedded], radius: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if kept.iter().all(|&j| metric.distance(p, &points[j]) > radius) {
            kept.push(i);
        }
    }
    kept
}

/// Default clustering radius `10 sqrt(dim) settle_tol`.
pub fn default_cluster_radius(phi: &FunctionalSpec, settle_tol: f64) -> f64 {
    10.0 * (phi.state_len() as f64).sqrt() * settle_tol
}

/// Representatives of the tail of a trajectory (the last `tail_fraction`
/// of its time span), clustered with `radius`, latest states first.
pub fn omega_limit(traj: &Trajectory, tail_fraction: f64, radius: f64) -> Result<Ensemble> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter("tail fraction must lie in (0, 1]".into()));
    }
    let t_end = *traj.times.last().unwrap();
    let start = t_end * (1.0 - tail_fraction);
    let mut tail: Vec<Vec<f64>> = traj
        .checkpoint_states()
        .filter(|(n, _)| traj.times[*n] >= start - 1e-12 * t_end.max(1.0))
        .map(|(_, s)| s.to_vec())
        .collect();
    tail.reverse();
    if tail.len() < 10 {
        return Err(Error::Domain(format!(
            "tail window holds {} stored states, at least 10 are needed",
            tail.len()
        )));
    }
    let metric = PhaseMetric::new(&traj.phi)?;
    let emb = metric.embed_all(&tail)?;
    let keep = cluster(&metric, &emb, radius);
    Ok(Ensemble {
        points: keep.into_iter().map(|i| tail[i].clone()).collect(),
        time: t_end,
    })
}

/// Settings of [`find_rest_points`].
#[derive(Clone, Copy, Debug)]
pub struct RestPointParams {
    pub tau: f64,
    pub horizon: f64,
    pub rest_tol: f64,
    /// Points closer than this in the phase metric are merged.
    pub merge_radius: f64,
}

/// A stationary state with its residual.
#[derive(Clone, Debug)]
pub struct RestPoint {
    pub state: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
}

/// Newton refinement of a scalar toy's critical point.
fn polish(phi: &FunctionalSpec, u: &[f64]) -> Vec<f64> {
    match phi.variant() {
        Variant::ScalarToy(ScalarToy::DoubleWell) => {
            let mut x = u[0];
            for _ in 0..50 {
                let d2 = 3.0 * x * x - 1.0;
                if d2.abs() < 1e-8 {
                    break;
                }
                let next = x - (x * x * x - x) / d2;
                if next == x {
                    break;
                }
                x = next;
            }
            vec![x]
        }
        Variant::ScalarToy(ScalarToy::MinQuadratics) if u[0] != 0.0 => vec![u[0].signum()],
        _ => u.to_vec(),
    }
}

/// Evolves every seed for `horizon`, refines scalar critical points by
/// Newton's method, keeps states with residual at most `rest_tol` and
/// merges duplicates.
pub fn find_rest_points(phi: &FunctionalSpec, seeds: &Ensemble, params: &RestPointParams) -> Result<Vec<RestPoint>> {
    let candidates: Vec<Option<RestPoint>> = seeds
        .points
        .par_iter()
        .map(|s| -> Result<Option<RestPoint>> {
            let traj = evolve(phi, s, params.tau, params.horizon)?;
            let refined = polish(phi, traj.final_state());
            let mut best = refined;
            let mut sub = phi.subgradient_min_norm(&best)?;
            if sub.residual_norm > params.rest_tol {
                // Refinement moved off the basin; fall back to the endpoint.
                let raw = traj.final_state().to_vec();
                let raw_sub = phi.subgradient_min_norm(&raw)?;
                if raw_sub.residual_norm < sub.residual_norm {
                    best = raw;
                    sub = raw_sub;
                }
            }
            Ok((sub.residual_norm <= params.rest_tol).then(|| RestPoint {
                state: best,
                energy: sub.value,
                residual: sub.residual_norm,
            }))
        })
        .collect::<Result<_>>()?;
    let found: Vec<RestPoint> = candidates.into_iter().flatten().collect();
    let metric = PhaseMetric::new(phi)?;
    let emb = metric.embed_all(&found.iter().map(|r| r.state.clone()).collect::<Vec<_>>())?;
    let keep = cluster(&metric, &emb, params.merge_radius);
    let mut out: Vec<RestPoint> = keep.into_iter().map(|i| found[i].clone()).collect();
    out.sort_by(|a, b| a.state.iter().partial_cmp(b.state.iter()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Invariant region used to filter seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constraint {
    /// `|mean(u)| <= bound`.
    MassBound(f64),
    /// `phi(u) <= level`.
    EnergySublevel(f64),
}

/// Ball in the state space with an optional constraint.
#[derive(Clone, Debug)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub constraint: Option<Constraint>,
}

/// Settings of [`approximate_attractor`].
#[derive(Clone, Debug)]
pub struct AttractorParams {
    pub seeds: usize,
    /// Number of orthonormal modes used to seed grid functions.
    pub modes: usize,
    pub tau: f64,
    pub horizon: f64,
    pub settle_tol: f64,
    /// Consecutive small snapshot excesses required to settle.
    pub settle_count: usize,
    /// Snapshot spacing; `None` selects `max(1, horizon / 50)`.
    pub snapshot_interval: Option<f64>,
    /// Cluster radius; `None` selects [`default_cluster_radius`].
    pub cluster_radius: Option<f64>,
    /// When set, the cloud is the union of all snapshots from this time on.
    pub burn_in: Option<f64>,
}

impl AttractorParams {
    pub fn new(seeds: usize, tau: f64, horizon: f64, settle_tol: f64) -> Self {
        Self {
            seeds,
            modes: 4,
            tau,
            horizon,
            settle_tol,
            settle_count: 3,
            snapshot_interval: None,
            cluster_radius: None,
            burn_in: None,
        }
    }
}

/// Point-cloud approximation of the attractor.
#[derive(Clone, Debug)]
pub struct AttractorEstimate {
    pub points: Vec<Vec<f64>>,
    pub horizon: f64,
    /// `(t_j, e(T(t_j) B, T(t_{j-1}) B))` per snapshot.
    pub excess_history: Vec<(f64, f64)>,
    pub settled: bool,
    /// Time at which the settling rule was first met.
    pub settle_time: Option<f64>,
    /// Largest snapshot excess within the final settling window.
    pub tolerance_achieved: f64,
    pub seed_count: usize,
}

/// Seeds of a ball after the constraint and finite-energy filters.
pub fn seed_ball(phi: &FunctionalSpec, ball: &BallSpec, count: usize, modes: usize) -> Result<Ensemble> {
    if ball.center.len() != phi.state_len() {
        return Err(Error::Dimension("ball center does not match the state space".into()));
    }
    let raw = seeding::ball_points(phi, &ball.center, ball.radius, count, modes);
    let grid = phi.ambient().grid().copied();
    let mut points = Vec::new();
    for p in raw {
        let e = phi.eval(&p)?;
        if !e.is_finite() {
            continue;
        }
        let ok = match ball.constraint {
            None => true,
            Some(Constraint::EnergySublevel(level)) => e <= level,
            Some(Constraint::MassBound(bound)) => {
                let m = match &grid {
                    Some(g) => weighted_dot(&g.weights(), &p, &vec![1.0; p.len()]) / g.volume(),
                    None => p.iter().sum::<f64>() / p.len() as f64,
                };
                m.abs() <= bound
            }
        };
        if ok {
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(Error::Domain("no seed of the ball satisfies the constraint".into()));
    }
    Ok(Ensemble::new(points))
}

/// Advances a seeded ensemble snapshot by snapshot, monitoring the excess
/// between consecutive snapshots, and stops after `settle_count`
/// consecutive excesses at most `settle_tol` (or at the horizon, flagged
/// as not settled).
pub fn approximate_attractor(phi: &FunctionalSpec, ball: &BallSpec, params: &AttractorParams) -> Result<AttractorEstimate> {
    let seeds = seed_ball(phi, ball, params.seeds, params.modes)?;
    let metric = PhaseMetric::new(phi)?;
    attractor_from_seeds(phi, &metric, seeds, params)
}

/// [`approximate_attractor`] with explicit seeds and metric.
pub fn attractor_from_seeds(
    phi: &FunctionalSpec,
    metric: &PhaseMetric,
    seeds: Ensemble,
    params: &AttractorParams,
) -> Result<AttractorEstimate> {
    let interval = params.snapshot_interval.unwrap_or((params.horizon / 50.0).max(1.0));
    let per_snapshot = step_count(params.tau, interval)?.max(1);
    let total = step_count(params.tau, params.horizon)?;
    let snapshots = total.div_ceil(per_snapshot).max(1);
    let radius = params
        .cluster_radius
        .unwrap_or_else(|| default_cluster_radius(phi, params.settle_tol));
    let seed_count = seeds.len();

    let mut current = seeds;
    let mut prev_emb = metric.embed_all(&current.points)?;
    let mut history = Vec::new();
    let mut streak = 0;
    let mut settle_time = None;
    let mut pool: Vec<Embedded> = Vec::new();
    let mut window_max = 0.0_f64;
    for j in 1..=snapshots {
        current = advance(phi, &current, per_snapshot as f64 * params.tau, params.tau)?;
        let emb = metric.embed_all(&current.points)?;
        let e = excess_embedded(metric, &emb, &prev_emb)?;
        let t = j as f64 * per_snapshot as f64 * params.tau;
        history.push((t, e));
        if let Some(b) = params.burn_in {
            if t >= b - 1e-12 {
                pool.extend(emb.iter().cloned());
                let keep = cluster(metric, &pool, radius);
                pool = keep.into_iter().map(|i| pool[i].clone()).collect();
            }
        }
        prev_emb = emb;
        if e <= params.settle_tol {
            streak += 1;
            if streak >= params.settle_count {
                settle_time = Some(t);
                let k = params.settle_count;
                window_max = history[history.len() - k..].iter().fold(0.0, |m, h| m.max(h.1));
                if params.burn_in.is_none() || params.burn_in.is_some_and(|b| t >= b) {
                    break;
                }
            }
        } else {
            streak = 0;
            settle_time = None;
        }
    }
    let settled = settle_time.is_some();
    if !settled {
        window_max = history.iter().rev().take(params.settle_count).fold(0.0, |m, h| m.max(h.1));
    }
    let cloud: Vec<Embedded> = if params.burn_in.is_some() && !pool.is_empty() {
        pool
    } else {
        let keep = cluster(metric, &prev_emb, radius);
        keep.into_iter().map(|i| prev_emb[i].clone()).collect()
    };
    Ok(AttractorEstimate {
        points: cloud.into_iter().map(|e| e.state).collect(),
        horizon: history.last().map_or(0.0, |h| h.0),
        excess_history: history,
        settled,
        settle_time,
        tolerance_achieved: window_max,
        seed_count,
    })
}

/// Lyapunov diagnostics of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovReport {
    pub monotone: bool,
    /// Largest energy increase between consecutive steps.
    pub max_increase: f64,
    /// First step whose energy does not strictly decrease, if any.
    pub first_stall: Option<usize>,
    /// Constant-energy segments `(start, end)` longer than the window in
    /// which the state still moves more than the tolerance.
    pub suspicious_segments: Vec<(usize, usize)>,
    /// True when no step moves the state.
    pub at_rest: bool,
}

/// Checks monotonicity of the energy ledger and flags constant-energy
/// segments of more than `window` steps along which the state travels
/// farther than `tol`.
///
/// Energies are compared to a relative `1e-12`, so a flat segment of `k`
/// steps may legitimately travel about `k sqrt(2 tau 1e-12)`; `tol` should
/// exceed that.
pub fn lyapunov_report(traj: &Trajectory, window: usize, tol: f64) -> LyapunovReport {
    let e = &traj.energies;
    let mut max_increase = f64::NEG_INFINITY;
    let mut first_stall = None;
    for n in 0..traj.steps() {
        let d = e[n + 1] - e[n];
        max_increase = max_increase.max(d);
        if d >= 0.0 && first_stall.is_none() {
            first_stall = Some(n);
        }
    }
    let energy_tol = 1e-12;
    let mut suspicious = Vec::new();
    let mut start = 0;
    let mut travelled = 0.0;
    for n in 0..traj.steps() {
        let step_len = (traj.dissipation_increments[n + 1] * traj.tau).sqrt();
        if (e[n + 1] - e[n]).abs() <= energy_tol * (1.0 + e[n].abs()) {
            travelled += step_len;
        } else {
            if n - start > window && travelled > tol {
                suspicious.push((start, n));
            }
            start = n + 1;
            travelled = 0.0;
        }
    }
    if traj.steps() - start > window && travelled > tol {
        suspicious.push((start, traj.steps()));
    }
    LyapunovReport {
        monotone: traj.steps() == 0 || max_increase <= 1e-9,
        max_increase: if traj.steps() == 0 { 0.0 } else { max_increase },
        first_stall,
        suspicious_segments: suspicious,
        at_rest: traj.dissipation_increments.iter().all(|d| *d == 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_distances() {
        let dw = FunctionalSpec::double_well();
        assert_eq!(phase_distance(&[1.0], &[-1.0], &dw).unwrap(), 2.0);
        assert_eq!(phase_distance(&[0.0], &[1.0], &dw).unwrap(), 1.25);
        assert_eq!(phase_distance(&[0.3], &[0.3], &dw).unwrap(), 0.0);
    }

    #[test]
    fn excess_is_one_sided() {
        let dw = FunctionalSpec::double_well();
        let m = PhaseMetric::new(&dw).unwrap();
        let a = Ensemble::scalars(&[-1.0, 0.0, 1.0]);
        let b = Ensemble::scalars(&[-1.0, 1.0]);
        assert_eq!(excess(&m, &a, &b).unwrap(), 1.25);
        assert_eq!(excess(&m, &b, &a).unwrap(), 0.0);
        assert!(excess(&m, &Ensemble::new(vec![]), &b).is_err());
    }

    #[test]
    fn kink_branches_are_both_followed() {
        let mq = FunctionalSpec::min_quadratics();
        let e = advance(&mq, &Ensemble::scalars(&[0.0]), 1.0, 0.1).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.points[0][0] < 0.0 && e.points[1][0] > 0.0);
    }

    #[test]
    fn zero_time_advance_is_identity() {
        let dw = FunctionalSpec::double_well();
        let e = Ensemble::scalars(&[0.2, -0.7]);
        assert_eq!(advance(&dw, &e, 0.0, 0.01).unwrap().points, e.points);
    }
}
