//! One function per subcommand. Each validates its configuration, writes
//! the resolved config next to its artifacts and then runs the solver.

use std::path::{Path, PathBuf};

use minmove::flow::energy_identity_residual;
use minmove::quasistationary::{evolve_coupled, lambda_study, LambdaStudyParams};
use minmove::semiflow::{approximate_attractor, excess, find_rest_points, AttractorParams, Ensemble, PhaseMetric};
use minmove::{evolve, FunctionalSpec, ScalarField};
use serde::Serialize;

use crate::config::{RunConfig, Setup};
use crate::error::CliError;
use crate::output::{num, read_dump, read_states_csv, OutDir};

pub const CONFIG_ECHO: &str = "config.resolved.toml";

pub struct Options {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Options {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

struct Run {
    config: RunConfig,
    setup: Setup,
    out: OutDir,
}

fn load(opts: &Options) -> Result<(RunConfig, Setup), CliError> {
    let path = opts
        .config
        .as_deref()
        .ok_or_else(|| CliError::field("--config", "a configuration file is required"))?;
    let config = RunConfig::load(path)?;
    let setup = config.validate()?;
    Ok((config, setup))
}

fn prepare(opts: &Options) -> Result<Run, CliError> {
    let (config, setup) = load(opts)?;
    let dir = opts
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(|o| o.dir.clone()))
        .ok_or_else(|| CliError::field("output.dir", "set it in the config or pass --out"))?;
    let out = OutDir::create(&dir)?;
    let config = config.resolved(&dir);
    out.text(CONFIG_ECHO, &config.to_toml())?;
    Ok(Run { config, setup, out })
}

/// Euclidean norm for vectors, quadrature-weighted L2 norm on grids.
fn state_norm(phi: &FunctionalSpec, u: &[f64]) -> f64 {
    match phi.ambient().grid() {
        Some(g) => g.weights().iter().zip(u).map(|(w, x)| w * x * x).sum::<f64>().sqrt(),
        None => u.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

const TRAJECTORY_HEADER: [&str; 5] = ["step", "t", "energy", "dissipation_increment", "state_norm"];
const LEDGER_HEADER: [&str; 5] = ["step", "t", "energy", "cumulative_dissipation", "energy_plus_dissipation"];

fn ledger_rows(times: &[f64], energies: &[f64], increments: &[f64]) -> Vec<Vec<String>> {
    let mut acc = 0.0;
    (0..energies.len())
        .map(|n| {
            acc += increments[n];
            vec![n.to_string(), num(times[n]), num(energies[n]), num(acc), num(energies[n] + acc)]
        })
        .collect()
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    functional: &'a str,
    tau: f64,
    horizon: f64,
    steps: usize,
    initial_energy: f64,
    final_energy: f64,
    total_dissipation: f64,
    energy_identity_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary_residual: Option<f64>,
}

pub fn simulate(opts: &Options) -> Result<(), CliError> {
    let run = prepare(opts)?;
    let phi = &run.setup.phi;
    let u0 = run.config.initial_state(phi)?;
    if u0.len() != phi.state_len() {
        return Err(CliError::field(
            "initial",
            format!("has {} entries, the state has {}", u0.len(), phi.state_len()),
        ));
    }
    if !phi.eval(&u0)?.is_finite() {
        return Err(CliError::field("initial", "the initial state lies outside the domain of the energy"));
    }
    let (tau, horizon) = (run.config.time.tau, run.config.time.horizon);
    opts.note(&format!("simulating {} with tau = {tau} up to T = {horizon}", run.config.functional.name()));

    match &run.setup.problem {
        Some(problem) => {
            let g = *problem.grid();
            let start = ScalarField::new(g, u0).map_err(CliError::Solver)?;
            let traj = evolve_coupled(problem, &start, tau, horizon)?;
            let times: Vec<f64> = (0..traj.states.len()).map(|n| n as f64 * tau).collect();
            let increments = &traj.dissipation;
            run.out.csv(
                "trajectory.csv",
                &TRAJECTORY_HEADER,
                traj.states.iter().enumerate().map(|(n, s)| {
                    vec![
                        n.to_string(),
                        num(times[n]),
                        num(traj.energies[n]),
                        num(increments[n]),
                        num(state_norm(phi, s.u.values())),
                    ]
                }),
            )?;
            run.out.csv("ledger.csv", &LEDGER_HEADER, ledger_rows(&times, &traj.energies, increments))?;

            let last = traj.states.last().expect("trajectories are never empty");
            let theta = last.theta();
            run.out.csv(
                "fields.csv",
                &["node", "x", "y", "u", "chi", "theta"],
                (0..g.node_count()).map(|k| {
                    let x = g.coordinates(k);
                    vec![
                        k.to_string(),
                        num(x[0]),
                        num(x[1]),
                        num(last.u.values()[k]),
                        num(last.chi.values()[k]),
                        num(theta.values()[k]),
                    ]
                }),
            )?;
            run.out.dump("final_state.bin", &[last.u.values().to_vec()])?;
            run.out.dump(
                "final_fields.bin",
                &[last.u.values().to_vec(), last.chi.values().to_vec(), theta.values().to_vec()],
            )?;
            let total: f64 = traj.dissipation.iter().sum();
            let e0 = traj.energies[0];
            let e1 = *traj.energies.last().unwrap();
            run.out.json(
                "summary.json",
                &SimulationSummary {
                    functional: run.config.functional.name(),
                    tau,
                    horizon,
                    steps: traj.states.len() - 1,
                    initial_energy: e0,
                    final_energy: e1,
                    total_dissipation: total,
                    energy_identity_residual: (e1 + total - e0).abs(),
                    stationary_residual: Some(problem.stationary_residual(last.u.values(), last.chi.values())?),
                },
            )?;
        }
        None => {
            let traj = evolve(phi, &u0, tau, horizon)?;
            let mut stored = traj.checkpoint_states().peekable();
            let mut rows = Vec::with_capacity(traj.energies.len());
            for n in 0..traj.energies.len() {
                let norm = match stored.peek() {
                    Some((k, s)) if *k == n => {
                        let v = num(state_norm(phi, s));
                        stored.next();
                        v
                    }
                    _ => String::new(),
                };
                rows.push(vec![
                    n.to_string(),
                    num(traj.times[n]),
                    num(traj.energies[n]),
                    num(traj.dissipation_increments[n]),
                    norm,
                ]);
            }
            run.out.csv("trajectory.csv", &TRAJECTORY_HEADER, rows)?;
            run.out.csv(
                "ledger.csv",
                &LEDGER_HEADER,
                ledger_rows(&traj.times, &traj.energies, &traj.dissipation_increments),
            )?;
            run.out.dump("final_state.bin", &[traj.final_state().to_vec()])?;
            let total = *traj.dissipation().last().unwrap();
            run.out.json(
                "summary.json",
                &SimulationSummary {
                    functional: run.config.functional.name(),
                    tau,
                    horizon,
                    steps: traj.steps(),
                    initial_energy: traj.energies[0],
                    final_energy: *traj.energies.last().unwrap(),
                    total_dissipation: total,
                    energy_identity_residual: energy_identity_residual(&traj),
                    stationary_residual: None,
                },
            )?;
        }
    }
    opts.note(&format!("wrote {}", run.out.root().display()));
    Ok(())
}

fn state_columns(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|k| format!("{prefix}_{k}")).collect()
}

pub fn restpoints(opts: &Options) -> Result<(), CliError> {
    let run = prepare(opts)?;
    let phi = &run.setup.phi;
    let section = run.config.restpoints.as_ref().ok_or_else(|| CliError::field("restpoints", "required by restpoints"))?;
    let seeds = match (&section.seeds, &section.seeds_file) {
        (Some(s), _) => s.clone(),
        (None, Some(file)) => read_states_csv(file, "restpoints.seeds_file")?,
        (None, None) => unreachable!("checked during validation"),
    };
    let len = phi.state_len();
    if let Some((i, s)) = seeds.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(CliError::field(
            "restpoints.seeds_file",
            format!("seed {i} has {} entries, the state has {len}", s.len()),
        ));
    }
    if seeds.is_empty() {
        return Err(CliError::field("restpoints", "no seeds given"));
    }
    opts.note(&format!("searching rest points from {} seeds", seeds.len()));
    let found = find_rest_points(phi, &Ensemble::new(seeds), &run.config.rest_params()?)?;

    let mut header = vec!["index".to_string(), "energy".into(), "residual".into()];
    header.extend(state_columns("u", len));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.out.csv(
        "restpoints.csv",
        &header,
        found.iter().enumerate().map(|(i, r)| {
            let mut row = vec![i.to_string(), num(r.energy), num(r.residual)];
            row.extend(r.state.iter().map(|x| num(*x)));
            row
        }),
    )?;
    let states: Vec<Vec<f64>> = found.iter().map(|r| r.state.clone()).collect();
    run.out.dump("restpoints.bin", &states)?;
    opts.note(&format!("found {} rest points", found.len()));
    Ok(())
}

#[derive(Serialize)]
struct AttractorManifest<'a> {
    functional: &'a str,
    settled: bool,
    non_settled: bool,
    settle_time: Option<f64>,
    settle_tol: f64,
    tolerance_achieved: f64,
    horizon: f64,
    seed_count: usize,
    point_count: usize,
    points: &'a str,
    excess_history: &'a str,
}

pub fn attractor(opts: &Options) -> Result<(), CliError> {
    let run = prepare(opts)?;
    let phi = &run.setup.phi;
    let (ball, params) = run.config.attractor_params(phi)?;
    opts.note(&format!("evolving {} seeds up to T = {}", params.seeds, params.horizon));
    let est = approximate_attractor(phi, &ball, &params)?;

    run.out.dump("attractor.bin", &est.points)?;
    run.out.csv(
        "excess_history.csv",
        &["t", "excess"],
        est.excess_history.iter().map(|(t, e)| vec![num(*t), num(*e)]),
    )?;
    let mut header = vec!["index".to_string(), "energy".into()];
    header.extend(state_columns("u", phi.state_len()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(est.points.len());
    for (i, p) in est.points.iter().enumerate() {
        let mut row = vec![i.to_string(), num(phi.eval(p)?)];
        row.extend(p.iter().map(|x| num(*x)));
        rows.push(row);
    }
    run.out.csv("attractor_points.csv", &header, rows)?;
    run.out.json(
        "attractor.json",
        &AttractorManifest {
            functional: run.config.functional.name(),
            settled: est.settled,
            non_settled: !est.settled,
            settle_time: est.settle_time,
            settle_tol: params.settle_tol,
            tolerance_achieved: est.tolerance_achieved,
            horizon: est.horizon,
            seed_count: est.seed_count,
            point_count: est.points.len(),
            points: "attractor.bin",
            excess_history: "excess_history.csv",
        },
    )?;
    if !est.settled {
        opts.note("warning: the attractor estimate did not settle; see attractor.json");
    }
    Ok(())
}

#[derive(Serialize)]
struct LambdaManifest {
    rows: usize,
    trend_non_increasing: bool,
    reference_consistent: bool,
    reference_settled: bool,
    seed_mean_range: (f64, f64),
    all_settled: bool,
}

pub fn lambda(opts: &Options) -> Result<(), CliError> {
    let run = prepare(opts)?;
    let problem = run
        .setup
        .problem
        .as_ref()
        .ok_or_else(|| CliError::field("functional.kind", "lambda_study needs quasi_stationary"))?;
    let l = run
        .config
        .lambda_study
        .as_ref()
        .ok_or_else(|| CliError::field("lambda_study", "required by lambda-study"))?;
    let mut attractor = AttractorParams::new(l.seeds, run.config.time.tau, run.config.time.horizon, run.config.tolerances.settle_tol);
    attractor.modes = l.modes;
    attractor.settle_count = l.settle_count;
    attractor.snapshot_interval = l.snapshot_interval;
    attractor.cluster_radius = l.cluster_radius;
    attractor.burn_in = l.burn_in;
    let params = LambdaStudyParams {
        attractor,
        seed_radius: l.seed_radius,
        consistency_time: l.consistency_time,
        noise_band: l.noise_band,
    };
    opts.note(&format!("running the lambda study over {} values", l.lambdas.len()));
    let study = lambda_study(problem, &l.lambdas, &params)?;

    run.out.csv(
        "lambda_table.csv",
        &["lambda", "excess", "endpoint_gap", "mean_min", "mean_max", "settled", "points"],
        study.rows.iter().map(|r| {
            vec![
                num(r.lambda),
                num(r.excess),
                num(r.endpoint_gap),
                num(r.mean_range.0),
                num(r.mean_range.1),
                r.estimate.settled.to_string(),
                r.estimate.points.len().to_string(),
            ]
        }),
    )?;
    for (i, r) in study.rows.iter().enumerate() {
        run.out.dump(&format!("attractor_lambda_{i}.bin"), &r.estimate.points)?;
    }
    run.out.dump("reference.bin", &study.reference.points)?;
    run.out.json(
        "lambda_study.json",
        &LambdaManifest {
            rows: study.rows.len(),
            trend_non_increasing: study.trend_non_increasing,
            reference_consistent: study.reference_consistent,
            reference_settled: study.reference.settled,
            seed_mean_range: study.seed_mean_range,
            all_settled: study.rows.iter().all(|r| r.estimate.settled),
        },
    )?;
    if !opts.quiet {
        println!("trend_non_increasing = {}", study.trend_non_increasing);
    }
    Ok(())
}

/// Excess of the ensemble in `a` over the one in `b`: the phase distance of
/// the configured functional, or the Euclidean distance without a config.
pub fn excess_between(opts: &Options, a: &Path, b: &Path) -> Result<f64, CliError> {
    let setup = match opts.config {
        Some(_) => Some(load(opts)?.1),
        None => None,
    };
    let a = read_dump(a)?;
    let b = read_dump(b)?;
    let dims = |e: &[Vec<f64>]| e.first().map(Vec::len);
    if let (Some(da), Some(db)) = (dims(&a), dims(&b)) {
        if da != db {
            return Err(CliError::field("excess", format!("dumps have dimensions {da} and {db}")));
        }
    }
    if b.is_empty() {
        return Err(CliError::field("excess", "the second ensemble is empty"));
    }
    match setup {
        Some(setup) => {
            let metric = PhaseMetric::new(&setup.phi)?;
            Ok(excess(&metric, &Ensemble::new(a), &Ensemble::new(b))?)
        }
        None => Ok(a
            .iter()
            .map(|x| {
                b.iter()
                    .map(|y| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)),
    }
}

pub fn validate(opts: &Options) -> Result<(), CliError> {
    let (config, setup) = load(opts)?;
    if let Some(dir) = &opts.out {
        let out = OutDir::create(dir)?;
        out.text(CONFIG_ECHO, &config.resolved(dir).to_toml())?;
    }
    if !opts.quiet {
        println!(
            "ok: {} with {} state entries, tau = {} (tau_max = {})",
            config.functional.name(),
            setup.phi.state_len(),
            config.time.tau,
            setup.phi.tau_max()
        );
    }
    Ok(())
}
