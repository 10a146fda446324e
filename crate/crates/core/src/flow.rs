//! Minimizing-movement integrator with an energy ledger.

use crate::error::{Error, Result};
use crate::functional::{Ambient, FunctionalSpec};

/// Discrete solution `u_{n+1} = prox(u_n, tau)`.
///
/// Energies, times and dissipation are recorded at every step. States are
/// stored at the checkpoint steps listed in `checkpoints`: every step for
/// Euclidean ambients, every `ceil(1 / (10 tau))` steps on grids, and always
/// the first and last step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub phi: FunctionalSpec,
    pub tau: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// `|u_{n+1} - u_n|^2 / tau`, zero for the initial entry.
    pub dissipation_increments: Vec<f64>,
    /// Step indices of the stored states.
    pub checkpoints: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    /// Auxiliary field per stored state (order parameter), when present.
    pub aux: Vec<Option<Vec<f64>>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.energies.len() - 1
    }

    /// Cumulative dissipation up to each step.
    pub fn dissipation(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.dissipation_increments
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectories are never empty")
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.states[0]
    }

    /// Stored states paired with their step index.
    pub fn checkpoint_states(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.checkpoints.iter().copied().zip(self.states.iter().map(|s| s.as_slice()))
    }
}

/// Number of steps `ceil(T / tau)`, guarded against rounding of `T / tau`
/// just above an integer.
pub(crate) fn step_count(tau: f64, horizon: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {tau}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be non-negative, got {horizon}")));
    }
    let ratio = horizon / tau;
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    Ok(steps as usize)
}

/// Checkpoint stride for a functional and step size.
pub fn checkpoint_stride(phi: &FunctionalSpec, tau: f64) -> usize {
    match phi.ambient() {
        Ambient::Euclidean { .. } => 1,
        _ => ((1.0 / (10.0 * tau)).ceil() as usize).max(1),
    }
}

/// Integrates the gradient flow of `phi` from `u0` up to time `T` with the
/// fixed step `tau` (`ceil(T / tau)` steps).
pub fn evolve(phi: &FunctionalSpec, u0: &[f64], tau: f64, horizon: f64) -> Result<Trajectory> {
    let steps = step_count(tau, horizon)?;
    evolve_steps(phi, u0, tau, steps)
}

/// Same as [`evolve`] with an explicit number of steps.
pub fn evolve_steps(phi: &FunctionalSpec, u0: &[f64], tau: f64, steps: usize) -> Result<Trajectory> {
    if tau > phi.tau_max() {
        return Err(Error::StepTooLarge {
            tau,
            tau_max: phi.tau_max(),
        });
    }
    let e0 = phi.eval(u0)?;
    if !e0.is_finite() {
        return Err(Error::Domain("initial state has infinite energy".into()));
    }
    let stride = checkpoint_stride(phi, tau);
    let mut traj = Trajectory {
        phi: phi.clone(),
        tau,
        times: vec![0.0],
        energies: vec![e0],
        dissipation_increments: vec![0.0],
        checkpoints: vec![0],
        states: vec![u0.to_vec()],
        aux: vec![None],
    };
    let mut u = u0.to_vec();
    let mut diff = vec![0.0; u.len()];
    for n in 1..=steps {
        let step = phi.prox_step(&u, tau, Some(&u))?;
        for (d, (a, b)) in diff.iter_mut().zip(step.state.iter().zip(&u)) {
            *d = a - b;
        }
        let moved = diff.iter().any(|d| *d != 0.0);
        let increment = if moved { phi.ambient().norm_sq(&diff)?.max(0.0) / tau } else { 0.0 };
        let energy = if moved { phi.eval(&step.state)? } else { *traj.energies.last().unwrap() };
        traj.times.push(n as f64 * tau);
        traj.energies.push(energy);
        traj.dissipation_increments.push(increment);
        u = step.state;
        if n % stride == 0 || n == steps {
            traj.checkpoints.push(n);
            traj.states.push(u.clone());
            traj.aux.push(step.aux);
        }
    }
    Ok(traj)
}

/// `max_{s <= t} |phi(u_t) + D(s, t) - phi(u_s)|` over all steps, where
/// `D` is the discrete dissipation.
pub fn energy_identity_residual(traj: &Trajectory) -> f64 {
    let d = traj.dissipation();
    let g: Vec<f64> = traj.energies.iter().zip(&d).map(|(e, d)| e + d).collect();
    let mut worst = 0.0_f64;
    let mut max_before = f64::NEG_INFINITY;
    let mut min_before = f64::INFINITY;
    for &x in &g {
        max_before = max_before.max(x);
        min_before = min_before.min(x);
        worst = worst.max((x - max_before).abs()).max((x - min_before).abs());
    }
    worst
}

/// Per-step comparison of the energy rate with the scheme's subgradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRuleReport {
    /// `|(phi_{n+1} - phi_n)/tau + |u_{n+1} - u_n|^2 / tau^2|` per step.
    pub defects: Vec<f64>,
    pub max_defect: f64,
    /// Largest `|phi_{n+1} - phi_n| / tau`.
    pub max_rate: f64,
}

/// Chain-rule defect: the selection `xi_{n+1} = (u_n - u_{n+1}) / tau`
/// predicts the energy rate `-|u_{n+1} - u_n|^2 / tau^2`.
pub fn chain_rule_check(traj: &Trajectory) -> ChainRuleReport {
    let tau = traj.tau;
    let mut defects = Vec::with_capacity(traj.steps());
    let mut max_rate = 0.0_f64;
    for n in 0..traj.steps() {
        let rate = (traj.energies[n + 1] - traj.energies[n]) / tau;
        let predicted = -traj.dissipation_increments[n + 1] / tau;
        defects.push((rate - predicted).abs());
        max_rate = max_rate.max(rate.abs());
    }
    let max_defect = defects.iter().fold(0.0_f64, |m, d| m.max(*d));
    ChainRuleReport {
        defects,
        max_defect,
        max_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_rounds_up() {
        assert_eq!(step_count(0.01, 1.0).unwrap(), 100);
        assert_eq!(step_count(0.3, 1.0).unwrap(), 4);
        assert_eq!(step_count(0.1, 0.0).unwrap(), 0);
        assert!(step_count(0.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_flow_matches_closed_form() {
        let q = FunctionalSpec::quadratic(1, 1.0).unwrap();
        let t = evolve(&q, &[1.0], 0.01, 1.0).unwrap();
        let exact = 1.02f64.powi(-100);
        assert!((t.final_state()[0] - exact).abs() < 1e-14);
        assert_eq!(t.states.len(), 101);
    }

    #[test]
    fn rest_point_is_constant() {
        let dw = FunctionalSpec::double_well();
        let t = evolve(&dw, &[0.0], 0.1, 2.0).unwrap();
        assert!(t.states.iter().all(|s| s[0] == 0.0));
        assert_eq!(energy_identity_residual(&t), 0.0);
        assert_eq!(chain_rule_check(&t).max_defect, 0.0);
    }

    #[test]
    fn infinite_initial_energy_is_rejected() {
        let b = FunctionalSpec::convex_plus_c1(
            1,
            crate::functional::ConvexPart::Box {
                lower: 0.0,
                upper: 1.0,
            },
            crate::functional::SmoothPart::Zero,
        )
        .unwrap();
        assert!(matches!(evolve(&b, &[2.0], 0.1, 1.0), Err(Error::Domain(_))));
    }
}
