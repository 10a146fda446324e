//! Run configuration: TOML schema, validation and construction of the
//! numerical objects it describes.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use minmove::functional::{ConvexPart, DcExample1, DcExample2, DcExample3, MonotoneTable, SmoothPart};
use minmove::quasistationary::{PhaseFieldProblem, Well};
use minmove::semiflow::{AttractorParams, BallSpec, Constraint, RestPointParams};
use minmove::{BoundaryCondition, Coefficient, EllipticOperator, FunctionalSpec, Grid, GridKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Recorded for randomized fixtures; no solver draws from it.
    #[serde(default)]
    pub seed: u64,
    pub functional: FunctionalConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restpoints: Option<RestPointsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attractor: Option<AttractorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_study: Option<LambdaStudyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalConfig {
    DoubleWell {},
    MinQuadratics {},
    Quadratic {
        dim: usize,
        coeff: f64,
    },
    ConvexPlusC1 {
        dim: usize,
        convex: ConvexConfig,
        #[serde(default)]
        smooth: SmoothConfig,
    },
    DcExample1 {
        grid: GridConfig,
        p: f64,
        alpha: f64,
        linf_bound: f64,
    },
    DcExample2 {
        grid: GridConfig,
        lambda_h: f64,
        /// Knots `[s, f(s)]` of the monotone nonlinearity.
        f: Vec<[f64; 2]>,
    },
    DcExample3 {
        grid: GridConfig,
        f1: Vec<[f64; 2]>,
        f2: Vec<[f64; 2]>,
    },
    QuasiStationary {
        grid: GridConfig,
        diffusion: OperatorConfig,
        /// Operator of the gradient energy on `chi`; always Neumann.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stiffness: Option<OperatorConfig>,
        well: WellConfig,
        #[serde(default)]
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass_bound: Option<f64>,
    },
}

impl FunctionalConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionalConfig::DoubleWell {} => "double_well",
            FunctionalConfig::MinQuadratics {} => "min_quadratics",
            FunctionalConfig::Quadratic { .. } => "quadratic",
            FunctionalConfig::ConvexPlusC1 { .. } => "convex_plus_c1",
            FunctionalConfig::DcExample1 { .. } => "dc_example1",
            FunctionalConfig::DcExample2 { .. } => "dc_example2",
            FunctionalConfig::DcExample3 { .. } => "dc_example3",
            FunctionalConfig::QuasiStationary { .. } => "quasi_stationary",
        }
    }

    fn grid(&self) -> Option<&GridConfig> {
        match self {
            FunctionalConfig::DcExample1 { grid, .. }
            | FunctionalConfig::DcExample2 { grid, .. }
            | FunctionalConfig::DcExample3 { grid, .. }
            | FunctionalConfig::QuasiStationary { grid, .. } => Some(grid),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexConfig {
    Quadratic { coeff: f64 },
    AbsValue { weight: f64 },
    Box { lower: f64, upper: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothConfig {
    Zero {},
    Linear {
        slope: f64,
    },
    Cosine {
        amplitude: f64,
        frequency: f64,
    },
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig::Zero {}
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKindConfig {
    Vertex,
    CellCentered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
    #[serde(default = "unit")]
    pub length: f64,
    pub kind: GridKindConfig,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    Dirichlet {},
    Neumann {},
    Robin { omega: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub boundary: BoundaryConfig,
    /// Uniform diffusivity; ignored when `table` is given.
    #[serde(default = "unit")]
    pub coefficient: f64,
    /// Per-node diagonal tensor `[a_xx, a_yy]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
    /// CSV with one `a_xx,a_yy` row per node, relative to the config file.
    /// Loading inlines it into `table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WellConfig {
    DoubleWell {},
    ObstacleQuadratic {},
    Logarithmic { c1: f64, c2: f64, c3: f64, c4: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "Tolerances::default_inner")]
    pub inner_tol: f64,
    #[serde(default = "Tolerances::default_step")]
    pub step_tol: f64,
    #[serde(default = "Tolerances::default_rest")]
    pub rest_tol: f64,
    #[serde(default = "Tolerances::default_settle")]
    pub settle_tol: f64,
}

impl Tolerances {
    fn default_inner() -> f64 {
        1e-10
    }
    fn default_step() -> f64 {
        1e-9
    }
    fn default_rest() -> f64 {
        1e-6
    }
    fn default_settle() -> f64 {
        1e-4
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            inner_tol: Self::default_inner(),
            step_tol: Self::default_step(),
            rest_tol: Self::default_rest(),
            settle_tol: Self::default_settle(),
        }
    }
}

/// Initial state of `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Values { values: Vec<f64> },
    Constant { value: f64 },
    /// `sum_j c_j sin((j + 1) pi x / L)` along the first axis.
    Sine { coefficients: Vec<f64> },
    /// `offset + sum_j c_j cos(j pi x / L)` along the first axis.
    Cosine {
        #[serde(default)]
        offset: f64,
        coefficients: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestPointsConfig {
    /// CSV file with one seed state per row, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<Vec<f64>>>,
    #[serde(default = "RestPointsConfig::default_merge")]
    pub merge_radius: f64,
}

impl RestPointsConfig {
    fn default_merge() -> f64 {
        1e-4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintConfig {
    MassBound { bound: f64 },
    EnergySublevel { level: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorConfig {
    /// Ball center; the origin when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub seeds: usize,
    #[serde(default = "AttractorConfig::default_modes")]
    pub modes: usize,
    #[serde(default = "AttractorConfig::default_settle_count")]
    pub settle_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ConstraintConfig>,
}

impl AttractorConfig {
    fn default_modes() -> usize {
        4
    }
    fn default_settle_count() -> usize {
        3
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaStudyConfig {
    /// Strictly decreasing.
    pub lambdas: Vec<f64>,
    pub seeds: usize,
    pub seed_radius: f64,
    pub consistency_time: f64,
    pub noise_band: f64,
    #[serde(default = "AttractorConfig::default_modes")]
    pub modes: usize,
    #[serde(default = "AttractorConfig::default_settle_count")]
    pub settle_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// A validation failure located by its dotted field path.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.fail(path, format!("must be positive and finite, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.fail(path, format!("must be non-negative and finite, got {v}"));
        }
    }

    fn finite(&mut self, path: &str, v: f64) {
        if !v.is_finite() {
            self.fail(path, format!("must be finite, got {v}"));
        }
    }

    fn count(&mut self, path: &str, v: usize) {
        if v == 0 {
            self.fail(path, "must be at least 1");
        }
    }

    fn knots(&mut self, path: &str, knots: &[[f64; 2]]) {
        if knots.is_empty() {
            self.fail(path, "needs at least one knot");
        }
        if let Err(e) = MonotoneTable::new(knots.iter().map(|k| (k[0], k[1])).collect()) {
            self.fail(path, e.to_string());
        }
    }
}

/// Everything a command needs, built once from a validated config.
pub struct Setup {
    pub phi: FunctionalSpec,
    pub problem: Option<Arc<PhaseFieldProblem>>,
}

impl RunConfig {
    /// Parses the file and resolves the paths it references against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::parse(&text)?;
        let base = std::path::absolute(path).map_err(|e| CliError::io(path, e))?;
        let base = base.parent().unwrap_or(Path::new("/"));
        if let Some(file) = config.restpoints.as_mut().and_then(|r| r.seeds_file.as_mut()) {
            *file = base.join(&*file);
        }
        if let FunctionalConfig::QuasiStationary { diffusion, stiffness, .. } = &mut config.functional {
            inline_table(diffusion, base, "functional.diffusion")?;
            if let Some(s) = stiffness {
                inline_table(s, base, "functional.stiffness")?;
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Validation(vec![parse_error(e)]))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every field and builds the functional; all failures are
    /// reported together.
    pub fn validate(&self) -> Result<Setup, CliError> {
        let mut c = Checker::default();
        if self.schema_version != SCHEMA_VERSION {
            c.fail(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        self.check_functional(&mut c);
        c.positive("time.tau", self.time.tau);
        c.non_negative("time.horizon", self.time.horizon);
        let t = &self.tolerances;
        c.positive("tolerances.inner_tol", t.inner_tol);
        c.positive("tolerances.step_tol", t.step_tol);
        c.positive("tolerances.rest_tol", t.rest_tol);
        c.positive("tolerances.settle_tol", t.settle_tol);
        self.check_sections(&mut c);
        if !c.errors.is_empty() {
            return Err(CliError::Validation(c.errors));
        }

        let setup = self.build().map_err(|e| CliError::Validation(vec![e]))?;
        let tau_max = setup.phi.tau_max();
        if self.time.tau > tau_max {
            c.fail(
                "time.tau",
                format!(
                    "{} exceeds the step bound tau_max = {tau_max} of functional {}",
                    self.time.tau,
                    self.functional.name()
                ),
            );
        }
        let len = setup.phi.state_len();
        if let Some(init) = &self.initial {
            self.check_initial(&mut c, init, len);
        }
        if let Some(a) = &self.attractor {
            if let Some(center) = &a.center {
                if center.len() != len {
                    c.fail("attractor.center", format!("has {} entries, the state has {len}", center.len()));
                }
            }
        }
        if let Some(r) = &self.restpoints {
            if let Some(seeds) = &r.seeds {
                for (i, s) in seeds.iter().enumerate() {
                    if s.len() != len {
                        c.fail(&format!("restpoints.seeds[{i}]"), format!("has {} entries, the state has {len}", s.len()));
                    }
                }
            }
        }
        if c.errors.is_empty() {
            Ok(setup)
        } else {
            Err(CliError::Validation(c.errors))
        }
    }

    fn check_functional(&self, c: &mut Checker) {
        if let Some(g) = self.functional.grid() {
            if !(1..=2).contains(&g.dim) {
                c.fail("functional.grid.dim", format!("must be 1 or 2, got {}", g.dim));
            }
            if g.n < 2 {
                c.fail("functional.grid.n", format!("must be at least 2, got {}", g.n));
            }
            c.positive("functional.grid.length", g.length);
        }
        match &self.functional {
            FunctionalConfig::DoubleWell {} | FunctionalConfig::MinQuadratics {} => {}
            FunctionalConfig::Quadratic { dim, coeff } => {
                c.count("functional.dim", *dim);
                c.non_negative("functional.coeff", *coeff);
            }
            FunctionalConfig::ConvexPlusC1 { dim, convex, smooth } => {
                c.count("functional.dim", *dim);
                match *convex {
                    ConvexConfig::Quadratic { coeff } => c.non_negative("functional.convex.coeff", coeff),
                    ConvexConfig::AbsValue { weight } => c.non_negative("functional.convex.weight", weight),
                    ConvexConfig::Box { lower, upper } => {
                        c.finite("functional.convex.lower", lower);
                        c.finite("functional.convex.upper", upper);
                        if !(lower <= upper) {
                            c.fail("functional.convex", format!("lower {lower} exceeds upper {upper}"));
                        }
                    }
                }
                match *smooth {
                    SmoothConfig::Zero {} => {}
                    SmoothConfig::Linear { slope } => c.finite("functional.smooth.slope", slope),
                    SmoothConfig::Cosine { amplitude, frequency } => {
                        c.finite("functional.smooth.amplitude", amplitude);
                        c.finite("functional.smooth.frequency", frequency);
                    }
                }
            }
            FunctionalConfig::DcExample1 { p, alpha, linf_bound, .. } => {
                if !(*p >= 2.0 && p.is_finite()) {
                    c.fail("functional.p", format!("must be at least 2, got {p}"));
                }
                c.positive("functional.alpha", *alpha);
                c.positive("functional.linf_bound", *linf_bound);
            }
            FunctionalConfig::DcExample2 { lambda_h, f, .. } => {
                c.non_negative("functional.lambda_h", *lambda_h);
                c.knots("functional.f", f);
            }
            FunctionalConfig::DcExample3 { f1, f2, .. } => {
                c.knots("functional.f1", f1);
                c.knots("functional.f2", f2);
            }
            FunctionalConfig::QuasiStationary {
                grid,
                diffusion,
                stiffness,
                well,
                lambda,
                mass_bound,
            } => {
                check_operator(c, "functional.diffusion", diffusion, grid);
                if let Some(s) = stiffness {
                    check_operator(c, "functional.stiffness", s, grid);
                    if !matches!(s.boundary, BoundaryConfig::Neumann {}) {
                        c.fail("functional.stiffness.boundary", "must be neumann");
                    }
                }
                if let WellConfig::Logarithmic { c1, c2, c3, c4 } = *well {
                    c.positive("functional.well.c1", c1);
                    c.positive("functional.well.c2", c2);
                    c.finite("functional.well.c3", c3);
                    c.finite("functional.well.c4", c4);
                }
                c.non_negative("functional.lambda", *lambda);
                if let Some(m) = mass_bound {
                    c.positive("functional.mass_bound", *m);
                }
            }
        }
    }

    fn check_sections(&self, c: &mut Checker) {
        if let Some(r) = &self.restpoints {
            c.positive("restpoints.merge_radius", r.merge_radius);
            if r.seeds.is_some() == r.seeds_file.is_some() {
                c.fail("restpoints", "set exactly one of seeds and seeds_file");
            }
        }
        if let Some(a) = &self.attractor {
            c.positive("attractor.radius", a.radius);
            c.count("attractor.seeds", a.seeds);
            c.count("attractor.modes", a.modes);
            c.count("attractor.settle_count", a.settle_count);
            if let Some(v) = a.snapshot_interval {
                c.positive("attractor.snapshot_interval", v);
            }
            if let Some(v) = a.cluster_radius {
                c.positive("attractor.cluster_radius", v);
            }
            if let Some(v) = a.burn_in {
                c.non_negative("attractor.burn_in", v);
            }
            match a.constraint {
                Some(ConstraintConfig::MassBound { bound }) => c.positive("attractor.constraint.bound", bound),
                Some(ConstraintConfig::EnergySublevel { level }) => c.finite("attractor.constraint.level", level),
                None => {}
            }
        }
        if let Some(l) = &self.lambda_study {
            if l.lambdas.is_empty() {
                c.fail("lambda_study.lambdas", "must not be empty");
            }
            for (i, v) in l.lambdas.iter().enumerate() {
                c.positive(&format!("lambda_study.lambdas[{i}]"), *v);
            }
            if l.lambdas.windows(2).any(|w| !(w[1] < w[0])) {
                c.fail("lambda_study.lambdas", "must be strictly decreasing");
            }
            c.count("lambda_study.seeds", l.seeds);
            c.count("lambda_study.modes", l.modes);
            c.count("lambda_study.settle_count", l.settle_count);
            c.positive("lambda_study.seed_radius", l.seed_radius);
            c.positive("lambda_study.consistency_time", l.consistency_time);
            c.positive("lambda_study.noise_band", l.noise_band);
            if let Some(v) = l.snapshot_interval {
                c.positive("lambda_study.snapshot_interval", v);
            }
            if let Some(v) = l.cluster_radius {
                c.positive("lambda_study.cluster_radius", v);
            }
            if let Some(v) = l.burn_in {
                c.non_negative("lambda_study.burn_in", v);
            }
            match &self.functional {
                FunctionalConfig::QuasiStationary { mass_bound, .. } => {
                    if mass_bound.is_none() {
                        c.fail("functional.mass_bound", "required by lambda_study");
                    }
                }
                _ => c.fail("functional.kind", "lambda_study needs quasi_stationary"),
            }
        }
    }

    fn check_initial(&self, c: &mut Checker, init: &InitialConfig, len: usize) {
        match init {
            InitialConfig::Values { values } => {
                if values.len() != len {
                    c.fail("initial.values", format!("has {} entries, the state has {len}", values.len()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    c.fail("initial.values", "entries must be finite");
                }
            }
            InitialConfig::Constant { value } => c.finite("initial.value", *value),
            InitialConfig::Sine { coefficients } | InitialConfig::Cosine { coefficients, .. } => {
                if self.functional.grid().is_none() {
                    c.fail("initial.type", "series initial data need a grid functional");
                }
                if coefficients.iter().any(|v| !v.is_finite()) {
                    c.fail("initial.coefficients", "entries must be finite");
                }
            }
        }
    }

    fn build(&self) -> Result<Setup, FieldError> {
        let core = |path: &str| {
            let path = path.to_string();
            move |e: minmove::Error| FieldError {
                path: path.clone(),
                message: e.to_string(),
            }
        };
        let table = |knots: &[[f64; 2]]| MonotoneTable::new(knots.iter().map(|k| (k[0], k[1])).collect());
        let mut problem = None;
        let phi = match &self.functional {
            FunctionalConfig::DoubleWell {} => FunctionalSpec::double_well(),
            FunctionalConfig::MinQuadratics {} => FunctionalSpec::min_quadratics(),
            FunctionalConfig::Quadratic { dim, coeff } => FunctionalSpec::quadratic(*dim, *coeff).map_err(core("functional"))?,
            FunctionalConfig::ConvexPlusC1 { dim, convex, smooth } => {
                let convex = match *convex {
                    ConvexConfig::Quadratic { coeff } => ConvexPart::Quadratic { coeff },
                    ConvexConfig::AbsValue { weight } => ConvexPart::AbsValue { weight },
                    ConvexConfig::Box { lower, upper } => ConvexPart::Box { lower, upper },
                };
                let smooth = match *smooth {
                    SmoothConfig::Zero {} => SmoothPart::Zero,
                    SmoothConfig::Linear { slope } => SmoothPart::Linear { slope },
                    SmoothConfig::Cosine { amplitude, frequency } => SmoothPart::Cosine { amplitude, frequency },
                };
                FunctionalSpec::convex_plus_c1(*dim, convex, smooth).map_err(core("functional"))?
            }
            FunctionalConfig::DcExample1 {
                grid,
                p,
                alpha,
                linf_bound,
            } => FunctionalSpec::dc_example1(
                build_grid(grid)?,
                DcExample1 {
                    p: *p,
                    alpha: *alpha,
                    linf_bound: *linf_bound,
                },
            )
            .map_err(core("functional"))?,
            FunctionalConfig::DcExample2 { grid, lambda_h, f } => FunctionalSpec::dc_example2(
                build_grid(grid)?,
                DcExample2 {
                    lambda_h: *lambda_h,
                    f: table(f).map_err(core("functional.f"))?,
                },
            )
            .map_err(core("functional"))?,
            FunctionalConfig::DcExample3 { grid, f1, f2 } => FunctionalSpec::dc_example3(
                build_grid(grid)?,
                DcExample3 {
                    f1: table(f1).map_err(core("functional.f1"))?,
                    f2: table(f2).map_err(core("functional.f2"))?,
                },
            )
            .map_err(core("functional"))?,
            FunctionalConfig::QuasiStationary {
                grid,
                diffusion,
                stiffness,
                well,
                lambda,
                mass_bound,
            } => {
                let g = build_grid(grid)?;
                let a1 = build_operator(g, diffusion).map_err(core("functional.diffusion"))?;
                let well = match *well {
                    WellConfig::DoubleWell {} => Well::DoubleWell,
                    WellConfig::ObstacleQuadratic {} => Well::ObstacleQuadratic,
                    WellConfig::Logarithmic { c1, c2, c3, c4 } => Well::Logarithmic { c1, c2, c3, c4 },
                };
                let a2 = match stiffness {
                    Some(s) => build_operator(g, s).map_err(core("functional.stiffness"))?,
                    None => EllipticOperator::laplacian(g, BoundaryCondition::Neumann).map_err(core("functional.grid"))?,
                };
                let mut p = PhaseFieldProblem::new(a1, a2, well)
                    .and_then(|p| p.with_lambda(*lambda))
                    .and_then(|p| p.with_tolerances(self.tolerances.inner_tol, self.tolerances.step_tol))
                    .map_err(core("functional"))?;
                if let Some(m) = mass_bound {
                    p = p.with_mass_bound(*m).map_err(core("functional.mass_bound"))?;
                }
                let p = Arc::new(p);
                problem = Some(p.clone());
                FunctionalSpec::quasi_stationary(p)
            }
        };
        let phi = phi.with_inner_tol(self.tolerances.inner_tol).map_err(core("tolerances.inner_tol"))?;
        Ok(Setup { phi, problem })
    }

    /// Initial state of `simulate`, sampled on the functional's grid.
    pub fn initial_state(&self, phi: &FunctionalSpec) -> Result<Vec<f64>, CliError> {
        let init = self
            .initial
            .as_ref()
            .ok_or_else(|| CliError::field("initial", "required by simulate"))?;
        let len = phi.state_len();
        Ok(match init {
            InitialConfig::Values { values } => values.clone(),
            InitialConfig::Constant { value } => vec![*value; len],
            InitialConfig::Sine { coefficients } => {
                let g = *phi.ambient().grid().expect("checked during validation");
                let mut v = g.sample(|x| {
                    coefficients
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * ((j + 1) as f64 * PI * x[0] / g.length()).sin())
                        .sum()
                });
                // Pinned boundary nodes carry exact zeros.
                for (k, x) in v.iter_mut().enumerate() {
                    if g.kind() == GridKind::Vertex && g.is_boundary(k) {
                        *x = 0.0;
                    }
                }
                v
            }
            InitialConfig::Cosine { offset, coefficients } => {
                let g = *phi.ambient().grid().expect("checked during validation");
                g.sample(|x| {
                    offset
                        + coefficients
                            .iter()
                            .enumerate()
                            .map(|(j, c)| c * (j as f64 * PI * x[0] / g.length()).cos())
                            .sum::<f64>()
                })
            }
        })
    }

    pub fn rest_params(&self) -> Result<RestPointParams, CliError> {
        let r = self
            .restpoints
            .as_ref()
            .ok_or_else(|| CliError::field("restpoints", "required by restpoints"))?;
        Ok(RestPointParams {
            tau: self.time.tau,
            horizon: self.time.horizon,
            rest_tol: self.tolerances.rest_tol,
            merge_radius: r.merge_radius,
        })
    }

    pub fn attractor_params(&self, phi: &FunctionalSpec) -> Result<(BallSpec, AttractorParams), CliError> {
        let a = self
            .attractor
            .as_ref()
            .ok_or_else(|| CliError::field("attractor", "required by attractor"))?;
        let ball = BallSpec {
            center: a.center.clone().unwrap_or_else(|| vec![0.0; phi.state_len()]),
            radius: a.radius,
            constraint: a.constraint.map(|c| match c {
                ConstraintConfig::MassBound { bound } => Constraint::MassBound(bound),
                ConstraintConfig::EnergySublevel { level } => Constraint::EnergySublevel(level),
            }),
        };
        let mut params = AttractorParams::new(a.seeds, self.time.tau, self.time.horizon, self.tolerances.settle_tol);
        params.modes = a.modes;
        params.settle_count = a.settle_count;
        params.snapshot_interval = a.snapshot_interval;
        params.cluster_radius = a.cluster_radius;
        params.burn_in = a.burn_in;
        Ok((ball, params))
    }

    /// Fills every default so the echo is the complete run description.
    pub fn resolved(&self, out: &Path) -> RunConfig {
        let mut r = self.clone();
        r.output = Some(OutputConfig { dir: out.to_path_buf() });
        r
    }
}

fn check_operator(c: &mut Checker, path: &str, op: &OperatorConfig, grid: &GridConfig) {
    c.positive(&format!("{path}.coefficient"), op.coefficient);
    if let BoundaryConfig::Robin { omega } = op.boundary {
        c.positive(&format!("{path}.boundary.omega"), omega);
    }
    if let Some(table) = &op.table {
        let nodes = grid.n.pow(grid.dim.min(2) as u32);
        if table.len() != nodes {
            c.fail(&format!("{path}.table"), format!("has {} rows, the grid has {nodes} nodes", table.len()));
        }
        if table.iter().flatten().any(|a| !(*a > 0.0 && a.is_finite())) {
            c.fail(&format!("{path}.table"), "entries must be positive and finite");
        }
    }
}

fn inline_table(op: &mut OperatorConfig, base: &Path, path: &str) -> Result<(), CliError> {
    let Some(file) = op.table_file.take() else {
        return Ok(());
    };
    if op.table.is_some() {
        return Err(CliError::field(path, "set at most one of table and table_file"));
    }
    let rows = crate::output::read_states_csv(&base.join(file), &format!("{path}.table_file"))?;
    let mut table = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        match r.as_slice() {
            [a] => table.push([*a, *a]),
            [a, b] => table.push([*a, *b]),
            _ => {
                return Err(CliError::field(
                    &format!("{path}.table_file"),
                    format!("row {i} has {} columns, expected 1 or 2", r.len()),
                ))
            }
        }
    }
    op.table = Some(table);
    Ok(())
}

fn build_grid(g: &GridConfig) -> Result<Grid, FieldError> {
    let kind = match g.kind {
        GridKindConfig::Vertex => GridKind::Vertex,
        GridKindConfig::CellCentered => GridKind::CellCentered,
    };
    Grid::new(g.dim, g.n, g.length, kind).map_err(|e| FieldError {
        path: "functional.grid".into(),
        message: e.to_string(),
    })
}

fn build_operator(grid: Grid, op: &OperatorConfig) -> minmove::Result<EllipticOperator> {
    let bc = match op.boundary {
        BoundaryConfig::Dirichlet {} => BoundaryCondition::Dirichlet,
        BoundaryConfig::Neumann {} => BoundaryCondition::Neumann,
        BoundaryConfig::Robin { omega } => BoundaryCondition::Robin { omega },
    };
    let coeff = match &op.table {
        Some(t) => Coefficient::Diagonal(t.clone()),
        None => Coefficient::Uniform(op.coefficient),
    };
    EllipticOperator::new(grid, coeff, bc)
}

fn parse_error(e: serde_path_to_error::Error<toml::de::Error>) -> FieldError {
    let path = e.path().to_string();
    let inner = e.into_inner();
    FieldError {
        path: if path == "." { "<document>".into() } else { path },
        message: inner.message().to_string(),
    }
}
