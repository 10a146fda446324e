#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use minmove::functional::{ConvexPart, DcExample1, DcExample2, DcExample3, MonotoneTable, SmoothPart};
use minmove::quasistationary::{PhaseFieldProblem, Well};
use minmove::{BoundaryCondition, EllipticOperator, FunctionalSpec, Grid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// How random states of a fixture are drawn.
#[derive(Clone, Copy, Debug)]
pub enum Sampler {
    Box(f64),
    /// Sine series with zero boundary values, optionally clipped at zero.
    Sine { amplitude: f64, nonnegative: bool },
    /// Cosine series plus a constant.
    Cosine { amplitude: f64 },
}

pub struct Fixture {
    pub name: &'static str,
    pub phi: FunctionalSpec,
    pub sampler: Sampler,
    /// Largest step drawn for this fixture.
    pub tau_cap: f64,
}

impl Fixture {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let len = self.phi.state_len();
        match self.sampler {
            Sampler::Box(r) => (0..len).map(|_| rng.gen_range(-r..=r)).collect(),
            Sampler::Sine { amplitude, nonnegative } => {
                let g = *self.phi.ambient().grid().unwrap();
                let c: Vec<f64> = (0..4).map(|j| amplitude * rng.gen_range(-1.0..=1.0) / (j + 1) as f64).collect();
                let mut v = g.sample(|x| {
                    c.iter()
                        .enumerate()
                        .map(|(j, cj)| cj * ((j + 1) as f64 * PI * x[0] / g.length()).sin())
                        .sum()
                });
                for k in 0..len {
                    if g.is_boundary(k) {
                        v[k] = 0.0;
                    } else if nonnegative {
                        v[k] = v[k].abs();
                    }
                }
                v
            }
            Sampler::Cosine { amplitude } => {
                let g = *self.phi.ambient().grid().unwrap();
                let c: Vec<f64> = (0..4).map(|_| amplitude * rng.gen_range(-1.0..=1.0)).collect();
                g.sample(|x| {
                    c.iter()
                        .enumerate()
                        .map(|(j, cj)| cj * (j as f64 * PI * x[0] / g.length()).cos())
                        .sum()
                })
            }
        }
    }

    pub fn random_tau(&self, rng: &mut ChaCha8Rng) -> f64 {
        let cap = self.tau_cap.min(self.phi.tau_max());
        rng.gen_range(0.05 * cap..=cap)
    }
}

pub fn dc_grid(n: usize) -> Grid {
    Grid::vertex_1d(n, 1.0).unwrap()
}

pub fn dc1(n: usize) -> FunctionalSpec {
    FunctionalSpec::dc_example1(
        dc_grid(n),
        DcExample1 {
            p: 3.0,
            alpha: 0.5,
            linf_bound: 2.0,
        },
    )
    .unwrap()
}

pub fn dc2(n: usize, lambda_h: f64) -> FunctionalSpec {
    FunctionalSpec::dc_example2(
        dc_grid(n),
        DcExample2 {
            lambda_h,
            f: MonotoneTable::new(vec![(-1.0, -2.0), (0.0, 0.0), (1.0, 3.0)]).unwrap(),
        },
    )
    .unwrap()
}

/// `f1(0) - f2(0) = 0.5 > 0`, so the zero state is stationary.
pub fn dc3(n: usize) -> FunctionalSpec {
    FunctionalSpec::dc_example3(
        dc_grid(n),
        DcExample3 {
            f1: MonotoneTable::new(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap(),
            f2: MonotoneTable::new(vec![(0.0, 0.5), (1.0, 3.5)]).unwrap(),
        },
    )
    .unwrap()
}

pub fn dirichlet_neumann(n: usize, well: Well) -> PhaseFieldProblem {
    let g = Grid::vertex_1d(n, 1.0).unwrap();
    let a1 = EllipticOperator::laplacian(g, BoundaryCondition::Dirichlet).unwrap();
    let a2 = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
    PhaseFieldProblem::new(a1, a2, well).unwrap()
}

pub fn neumann_neumann(n: usize, well: Well) -> PhaseFieldProblem {
    let g = Grid::cell_1d(n, 1.0).unwrap();
    let a1 = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
    let a2 = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
    PhaseFieldProblem::new(a1, a2, well).unwrap()
}

pub fn robin_neumann(n: usize, well: Well) -> PhaseFieldProblem {
    let g = Grid::cell_1d(n, 1.0).unwrap();
    let a1 = EllipticOperator::laplacian(g, BoundaryCondition::Robin { omega: 2.0 }).unwrap();
    let a2 = EllipticOperator::laplacian(g, BoundaryCondition::Neumann).unwrap();
    PhaseFieldProblem::new(a1, a2, well).unwrap()
}

pub const LOG_WELL: Well = Well::Logarithmic {
    c1: 0.3,
    c2: 1.0,
    c3: 0.1,
    c4: 0.5,
};

pub fn qs(problem: PhaseFieldProblem) -> FunctionalSpec {
    FunctionalSpec::quasi_stationary(Arc::new(problem))
}

/// One fixture per energy of the catalogue (grids of `n` nodes).
pub fn variant_set(n: usize) -> Vec<Fixture> {
    vec![
        Fixture {
            name: "minQuadratics",
            phi: FunctionalSpec::min_quadratics(),
            sampler: Sampler::Box(3.0),
            tau_cap: 0.5,
        },
        Fixture {
            name: "doubleWell",
            phi: FunctionalSpec::double_well(),
            sampler: Sampler::Box(2.0),
            tau_cap: 0.25,
        },
        Fixture {
            name: "quadratic",
            phi: FunctionalSpec::quadratic(3, 1.0).unwrap(),
            sampler: Sampler::Box(2.0),
            tau_cap: 0.5,
        },
        Fixture {
            name: "abs+cosine",
            phi: FunctionalSpec::convex_plus_c1(
                3,
                ConvexPart::AbsValue { weight: 0.5 },
                SmoothPart::Cosine {
                    amplitude: 0.5,
                    frequency: 2.0,
                },
            )
            .unwrap(),
            sampler: Sampler::Box(3.0),
            tau_cap: 0.25,
        },
        Fixture {
            name: "box+linear",
            phi: FunctionalSpec::convex_plus_c1(
                2,
                ConvexPart::Box {
                    lower: -1.0,
                    upper: 2.0,
                },
                SmoothPart::Linear { slope: 1.0 },
            )
            .unwrap(),
            sampler: Sampler::Box(1.0),
            tau_cap: 0.5,
        },
        Fixture {
            name: "DCExample1",
            phi: dc1(n),
            sampler: Sampler::Sine {
                amplitude: 1.0,
                nonnegative: false,
            },
            tau_cap: 0.05,
        },
        Fixture {
            name: "DCExample2",
            phi: dc2(n, 0.5),
            sampler: Sampler::Sine {
                amplitude: 2.0,
                nonnegative: false,
            },
            tau_cap: 0.05,
        },
        Fixture {
            name: "DCExample3",
            phi: dc3(n),
            sampler: Sampler::Sine {
                amplitude: 1.0,
                nonnegative: true,
            },
            tau_cap: 0.05,
        },
        Fixture {
            name: "QS Dirichlet-Neumann doubleWell",
            phi: qs(dirichlet_neumann(n, Well::DoubleWell)),
            sampler: Sampler::Cosine { amplitude: 1.0 },
            tau_cap: 0.05,
        },
        Fixture {
            name: "QS Neumann-Neumann obstacle",
            phi: qs(neumann_neumann(n, Well::ObstacleQuadratic)),
            sampler: Sampler::Cosine { amplitude: 1.0 },
            tau_cap: 0.05,
        },
        Fixture {
            name: "QS Robin-Neumann logarithmic",
            phi: qs(robin_neumann(n, LOG_WELL)),
            sampler: Sampler::Cosine { amplitude: 1.0 },
            tau_cap: 0.05,
        },
    ]
}
