//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p minmove --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::*;
use minmove::flow::{energy_identity_residual, evolve_steps};
use minmove::quasistationary::{evolve_coupled, lambda_study, LambdaStudyParams, PhaseFieldProblem, Well};
use minmove::semiflow::{approximate_attractor, find_rest_points, omega_limit, AttractorParams, BallSpec, Ensemble, RestPointParams};
use minmove::space::{inner_dual, inner_l2, mean};
use minmove::{evolve, BoundaryCondition, EllipticOperator, FunctionalSpec, Grid, GridKind, ScalarField};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    if let Some(l) = limit {
        if elapsed > l {
            pass = false;
            detail.push_str(&format!("; runtime limit {l:?} exceeded"));
        }
    }
    println!(
        "{} [{id:>2}] {title}: {detail} ({:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn crit1_energy_inequality() -> Outcome {
    let fixtures = variant_set(16);
    let runs = 200;
    let steps = 10;
    let worst: Vec<(&str, f64)> = fixtures
        .par_iter()
        .enumerate()
        .map(|(i, fx)| {
            let mut r = rng(1000 + i as u64);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..runs {
                let u0 = fx.sample(&mut r);
                let tau = fx.random_tau(&mut r);
                let traj = evolve_steps(&fx.phi, &u0, tau, steps).unwrap();
                for n in 0..steps {
                    let lhs = traj.energies[n + 1] + 0.5 * traj.dissipation_increments[n + 1];
                    worst = worst.max(lhs - traj.energies[n]);
                }
            }
            (fx.name, worst)
        })
        .collect();
    let (name, w) = worst.iter().fold(("", f64::NEG_INFINITY), |a, b| if b.1 > a.1 { *b } else { a });
    Outcome {
        pass: w <= 1e-9,
        detail: format!(
            "{} variants x {runs} runs x {steps} steps, worst excess {w:.2e} ({name}), limit 1e-9",
            fixtures.len()
        ),
    }
}

fn crit2_residual_decay() -> Outcome {
    let taus = [0.04, 0.02, 0.01];
    let dc = dc2(32, 0.5);
    let g = *dc.ambient().grid().unwrap();
    let dc_u0 = g.sample(|x| {
        if x[0] == 0.0 || x[0] == 1.0 {
            0.0
        } else {
            1.5 * (PI * x[0]).sin()
        }
    });
    let cases: Vec<(&str, FunctionalSpec, Vec<f64>, f64)> = vec![
        ("quadratic", FunctionalSpec::quadratic(1, 1.0).unwrap(), vec![1.0], 2.0),
        ("doubleWell", FunctionalSpec::double_well(), vec![0.2], 10.0),
        ("DCExample2", dc, dc_u0, 2.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, phi, u0, horizon) in &cases {
        let res: Vec<f64> = taus
            .iter()
            .map(|&tau| energy_identity_residual(&evolve(phi, u0, tau, *horizon).unwrap()))
            .collect();
        let ratios: Vec<f64> = res.windows(2).map(|w| w[1] / w[0]).collect();
        pass &= ratios.iter().all(|r| *r <= 0.6);
        parts.push(format!(
            "{name} ratios {}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join("/")
        ));
    }
    Outcome {
        pass,
        detail: format!("{} (limit 0.6)", parts.join(", ")),
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn crit3_semiflow_axioms() -> Outcome {
    let fixtures = variant_set(16);
    let mut r = rng(3);
    let mut failures = Vec::new();
    for case in 0..20 {
        let fx = &fixtures[case % fixtures.len()];
        let u0 = fx.sample(&mut r);
        let tau = fx.random_tau(&mut r);
        let stride = minmove::flow::checkpoint_stride(&fx.phi, tau);
        let n1 = stride * r.gen_range(1..4usize) + r.gen_range(0..3usize);
        let n2 = stride * r.gen_range(1..4usize) + r.gen_range(0..3usize);
        let full = evolve_steps(&fx.phi, &u0, tau, n1 + n2).unwrap();

        // Concatenation.
        let first = evolve_steps(&fx.phi, &u0, tau, n1).unwrap();
        let second = evolve_steps(&fx.phi, first.final_state(), tau, n2).unwrap();
        let mut joined = bits(&first.energies);
        joined.extend(bits(&second.energies[1..]));
        if joined != bits(&full.energies) || bits(second.final_state()) != bits(full.final_state()) {
            failures.push(format!("H3 {}", fx.name));
        }

        // Translation: restart from a stored interior state.
        let (k, uk) = full
            .checkpoint_states()
            .find(|(n, _)| *n > 0 && *n < n1 + n2)
            .map(|(n, s)| (n, s.to_vec()))
            .unwrap();
        let tail = evolve_steps(&fx.phi, &uk, tau, n1 + n2 - k).unwrap();
        let stored_match = tail.checkpoint_states().all(|(n, s)| {
            full.checkpoint_states()
                .find(|(m, _)| *m == n + k)
                .is_none_or(|(_, t)| bits(s) == bits(t))
        });
        if bits(&tail.energies) != bits(&full.energies[k..]) || !stored_match {
            failures.push(format!("H2 {}", fx.name));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "20 fixtures, tail restart and concatenation bit-identical".into()
        } else {
            format!("mismatches: {}", failures.join(", "))
        },
    }
}

fn crit4_rest_points_and_omega_limits() -> Outcome {
    let dw = FunctionalSpec::double_well();
    let params = RestPointParams {
        tau: 0.01,
        horizon: 40.0,
        rest_tol: 1e-8,
        merge_radius: 1e-4,
    };
    let rest = find_rest_points(&dw, &Ensemble::scalars(&[-2.0, -0.1, 0.0, 0.1, 2.0]), &params).unwrap();
    let found: Vec<f64> = rest.iter().map(|p| p.state[0]).collect();
    let rest_ok = found.len() == 3 && found.iter().zip([-1.0, 0.0, 1.0]).all(|(a, b)| (a - b).abs() <= 1e-8);

    let fixtures = variant_set(16);
    let worst: Vec<(&str, f64)> = fixtures
        .par_iter()
        .enumerate()
        .map(|(i, fx)| {
            let mut r = rng(400 + i as u64);
            let u0 = fx.sample(&mut r);
            let tau = fx.tau_cap.min(fx.phi.tau_max()).min(0.05);
            let traj = evolve(&fx.phi, &u0, tau, 40.0).unwrap();
            let omega = omega_limit(&traj, 0.1, 1e-3).unwrap();
            let w = omega
                .points
                .iter()
                .map(|p| fx.phi.subgradient_min_norm(p).unwrap().residual_norm)
                .fold(0.0, f64::max);
            (fx.name, w)
        })
        .collect();
    let (name, w) = worst.iter().fold(("", 0.0), |a, b| if b.1 > a.1 { *b } else { a });
    Outcome {
        pass: rest_ok && w <= 1e-4,
        detail: format!(
            "doubleWell rest set {found:?} (tol 1e-8); worst omega-limit residual {w:.2e} ({name}) over {} variants, limit 1e-4",
            fixtures.len()
        ),
    }
}

fn crit5_scalar_attractor() -> Outcome {
    let dw = FunctionalSpec::double_well();
    let ball = BallSpec {
        center: vec![0.0],
        radius: 2.0,
        constraint: None,
    };
    let mut params = AttractorParams::new(81, 0.01, 40.0, 1e-6);
    params.cluster_radius = Some(0.05);
    let est = approximate_attractor(&dw, &ball, &params).unwrap();
    let pts: Vec<f64> = est.points.iter().map(|p| p[0]).collect();
    let inside = pts.iter().all(|x| x.abs() <= 1.02);
    let covers = [-1.0, 0.0, 1.0].iter().all(|e| pts.iter().any(|x| (x - e).abs() <= 0.05));
    Outcome {
        pass: inside && covers && est.settled,
        detail: format!(
            "{} seeds -> cloud {:?}, settled {} at t = {:?}",
            est.seed_count,
            pts.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>(),
            est.settled,
            est.settle_time
        ),
    }
}

fn crit6_limiting_subdifferential() -> Outcome {
    let mq = FunctionalSpec::min_quadratics();
    let sample = mq.limiting_subdiff_sample(0.0, 0.1, 30).unwrap();
    let frechet = mq.frechet_subdiff(0.0, 0.1, 30).unwrap();
    let ok = sample.len() == 2 && (sample[0] + 2.0).abs() <= 1e-6 && (sample[1] - 2.0).abs() <= 1e-6;
    Outcome {
        pass: ok && frechet.is_none(),
        detail: format!("limiting sample {sample:?}, Frechet set {frechet:?}"),
    }
}

fn crit7_quasi_stationary() -> Outcome {
    let p = dirichlet_neumann(32, Well::DoubleWell);
    let g = *p.grid();
    let u0 = ScalarField::from_fn(g, |x| 0.2 + 0.1 * (PI * x[0]).sin());
    let traj = evolve_coupled(&p, &u0, 1e-2, 20.0).unwrap();
    let end = traj.states.last().unwrap();
    let residual = p.stationary_residual(end.u.values(), end.chi.values()).unwrap();
    let theta = end.theta();
    let theta_l2 = inner_l2(&theta, &theta).unwrap().sqrt();
    Outcome {
        pass: residual <= 1e-4 && theta_l2 <= 1e-4,
        detail: format!(
            "{} steps, stationary residual {residual:.2e}, |theta|_L2 {theta_l2:.2e} (limits 1e-4)",
            traj.states.len() - 1
        ),
    }
}

fn crit8_mass_conservation() -> Outcome {
    let p = neumann_neumann(32, Well::DoubleWell);
    let g = *p.grid();
    let u0 = ScalarField::from_fn(g, |x| 0.1 + 0.6 * (PI * x[0]).cos() + 0.3 * (3.0 * PI * x[0]).cos());
    let traj = evolve_coupled(&p, &u0, 1e-2, 100.0).unwrap();
    let m0 = mean(&traj.states[0].u);
    let drift = traj.states.iter().map(|s| (mean(&s.u) - m0).abs()).fold(0.0, f64::max);
    Outcome {
        pass: drift <= 1e-12 && traj.states.len() > 10_000,
        detail: format!("{} steps, max |mean(u_n) - mean(u_0)| = {drift:.2e} (limit 1e-12)", traj.states.len() - 1),
    }
}

fn crit9_lambda_trend() -> Outcome {
    let problem = neumann_neumann(32, Well::DoubleWell).with_mass_bound(1.5).unwrap();
    let params = LambdaStudyParams {
        attractor: AttractorParams::new(16, 0.05, 150.0, 1e-4),
        seed_radius: 1.5,
        consistency_time: 5.0,
        noise_band: 0.2,
    };
    let study = lambda_study(&problem, &[1.0, 0.5, 0.25, 0.125], &params).unwrap();
    let rows: Vec<String> = study
        .rows
        .iter()
        .map(|r| format!("{}:{:.4e}{}", r.lambda, r.excess, if r.estimate.settled { "" } else { "*" }))
        .collect();
    Outcome {
        pass: study.trend_non_increasing,
        detail: format!(
            "excess by lambda [{}] (* = not settled), endpoint gaps shrinking: {}",
            rows.join(", "),
            study.reference_consistent
        ),
    }
}

/// Dense matrix of `apply` on the unit vectors.
fn dense(op: &EllipticOperator) -> DMatrix<f64> {
    let g = *op.grid();
    let n = g.node_count();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = minmove::space::apply(op, &ScalarField::new(g, e).unwrap()).unwrap();
        for i in 0..n {
            m[(i, j)] = col.values()[i];
        }
    }
    m
}

fn grid_search_prox(phi: &FunctionalSpec, u: f64, tau: f64) -> f64 {
    let step = 1e-5;
    let mut best = (f64::INFINITY, 0.0);
    let mut k = 0;
    loop {
        let v = -3.0 + k as f64 * step;
        if v > 3.0 {
            break;
        }
        let obj = phi.eval(&[v]).unwrap() + (v - u) * (v - u) / (2.0 * tau);
        if obj < best.0 {
            best = (obj, v);
        }
        k += 1;
    }
    best.1
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn crit10_oracles() -> Outcome {
    // Scalar proximal maps against a grid search.
    let mut r = rng(10);
    let cases: Vec<(FunctionalSpec, f64, f64)> = (0..200)
        .map(|i| {
            let phi = if i % 2 == 0 {
                FunctionalSpec::min_quadratics()
            } else {
                FunctionalSpec::double_well()
            };
            let tau = r.gen_range(0.01..0.25);
            (phi, r.gen_range(-2.0..2.0), tau)
        })
        .collect();
    let prox_err = cases
        .par_iter()
        .map(|(phi, u, tau)| (phi.prox(&[*u], *tau, None).unwrap()[0] - grid_search_prox(phi, *u, *tau)).abs())
        .reduce(|| 0.0, f64::max);

    // Dual products against dense inverses.
    let mut dual_err = 0.0_f64;
    for (dim, n, kind, bc) in [
        (1, 16, GridKind::Vertex, BoundaryCondition::Dirichlet),
        (1, 16, GridKind::CellCentered, BoundaryCondition::Robin { omega: 1.5 }),
        (2, 4, GridKind::Vertex, BoundaryCondition::Dirichlet),
        (2, 4, GridKind::CellCentered, BoundaryCondition::Robin { omega: 0.5 }),
    ] {
        let g = Grid::new(dim, n, 1.0, kind).unwrap();
        let op = EllipticOperator::laplacian(g, bc).unwrap();
        let inv = dense(&op).try_inverse().unwrap();
        let w = DVector::from_vec(g.weights());
        for _ in 0..10 {
            let u: Vec<f64> = (0..g.node_count()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..g.node_count()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let z = &inv * DVector::from_vec(u.clone());
            let expected = z.component_mul(&w).dot(&DVector::from_vec(v.clone()));
            let got = inner_dual(&ScalarField::new(g, u).unwrap(), &ScalarField::new(g, v).unwrap(), &op).unwrap();
            dual_err = dual_err.max((got - expected).abs() / expected.abs().max(1e-300));
        }
    }

    // Inner minimization without stiffness against per-node bisection.
    let g = Grid::cell_1d(16, 1.0).unwrap();
    let a1 = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
    let p = PhaseFieldProblem::without_stiffness(a1, Well::DoubleWell).unwrap();
    let mut chi_err = 0.0_f64;
    for _ in 0..100 {
        let u: Vec<f64> = (0..16).map(|_| r.gen_range(-8.0..8.0)).collect();
        let chi = p.minimize_chi(&u, None).unwrap().chi;
        for (uk, ck) in u.iter().zip(&chi) {
            let root = bisect(|c| c * c * c - uk, -3.0, 3.0);
            chi_err = chi_err.max((ck - root).abs());
        }
    }
    Outcome {
        pass: prox_err <= 2e-5 && dual_err <= 1e-8 && chi_err <= 1e-8,
        detail: format!(
            "prox vs grid search {prox_err:.2e} (limit 2e-5), dual vs dense {dual_err:.2e} (limit 1e-8), chi vs bisection {chi_err:.2e} (limit 1e-8)"
        ),
    }
}

fn main() {
    let started = Instant::now();
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let results = [
        run(1, "discrete energy inequality", min(2), crit1_energy_inequality),
        run(2, "energy-identity residual decay", min(5), crit2_residual_decay),
        run(3, "semiflow axioms H2/H3", None, crit3_semiflow_axioms),
        run(4, "rest points and omega-limits", None, crit4_rest_points_and_omega_limits),
        run(5, "scalar attractor", min(1), crit5_scalar_attractor),
        run(6, "limiting subdifferential toy", None, crit6_limiting_subdifferential),
        run(7, "quasi-stationary coupling", min(3), crit7_quasi_stationary),
        run(8, "mass conservation", None, crit8_mass_conservation),
        run(9, "lambda-attractor trend", min(15), crit9_lambda_trend),
        run(10, "oracle equivalence", None, crit10_oracles),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!(
        "{passed}/{} criteria passed in {:.1}s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if passed != results.len() {
        std::process::exit(1);
    }
}
