//! Experiment configuration: a TOML file with one top-level table per
//! concern. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::flux::{Coefficient, FluxModel, Preset, StateBox};
use crate::path::{PathKind, RoughPath};
use crate::solver::{Boundary, Grid1D, NumericalFlux, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Characteristics,
    Contraction,
    Entropy,
    Linfty,
    MassBound,
    Qlemma,
    Solve,
    Stability,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Characteristics,
        Experiment::Contraction,
        Experiment::Entropy,
        Experiment::Linfty,
        Experiment::MassBound,
        Experiment::Qlemma,
        Experiment::Solve,
        Experiment::Stability,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Characteristics => "characteristics",
            Experiment::Contraction => "contraction",
            Experiment::Entropy => "entropy",
            Experiment::Linfty => "linfty",
            Experiment::MassBound => "mass_bound",
            Experiment::Qlemma => "qlemma",
            Experiment::Solve => "solve",
            Experiment::Stability => "stability",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::Characteristics => "sign of the velocity, unit Jacobian and cancellation scaling of random characteristic flows",
            Experiment::Contraction => "L1 contraction and order preservation for pairs of initial data on one path",
            Experiment::Entropy => "discrete Kruzkov entropy residuals of a solution",
            Experiment::Linfty => "domination by the characteristic supersolution, optionally the steady-state invariant region",
            Experiment::MassBound => "windowed L2 bound on the kinetic defect mass, optionally across path refinement",
            Experiment::Qlemma => "convergence of the mollified kinetic family to its sign limit",
            Experiment::Solve => "solve and write the trajectory",
            Experiment::Stability => "Cauchy ladder of solutions under dyadic path refinement",
        }
    }

    /// Top-level tables that must be present.
    pub fn required(self) -> &'static [&'static str] {
        match self {
            Experiment::Characteristics => &["flux"],
            Experiment::Qlemma => &["flux", "path"],
            Experiment::Contraction => &["flux", "path", "grid"],
            _ => &["flux", "path", "grid", "initial"],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub flux: Option<FluxSpec>,
    pub path: Option<PathSpec>,
    pub grid: Option<GridSpec>,
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub contraction: ContractionSpec,
    #[serde(default)]
    pub linfty: LinftySpec,
    #[serde(default)]
    pub mass_bound: MassBoundSpec,
    #[serde(default)]
    pub entropy: EntropySpec,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub qlemma: QlemmaSpec,
    #[serde(default)]
    pub characteristics: CharacteristicsSpec,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Burgers,
    InhomBurgers,
    TwoPhase,
    LinearAdvection,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: f64 },
    Sine { mean: f64, amp: f64, freq: f64 },
    Affine { slope: f64, intercept: f64 },
}

impl From<CoefficientSpec> for Coefficient {
    fn from(c: CoefficientSpec) -> Self {
        match c {
            CoefficientSpec::Constant { value } => Coefficient::Constant(value),
            CoefficientSpec::Sine { mean, amp, freq } => Coefficient::Sine { mean, amp, freq },
            CoefficientSpec::Affine { slope, intercept } => Coefficient::Affine { slope, intercept },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    pub preset: PresetName,
    /// Defaults to `1 + ½ sin x` for `inhom_burgers` and `1` otherwise.
    pub coefficient: Option<CoefficientSpec>,
    /// State range on which the flux is declared valid.
    #[serde(default = "default_u_range")]
    pub u_range: [f64; 2],
    /// Spatial range; defaults to the grid, or `[-8, 8]` without one.
    pub x_range: Option<[f64; 2]>,
}

fn default_u_range() -> [f64; 2] {
    [-2.0, 2.0]
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKindName {
    Brownian,
    Linear,
    Excursion,
    Csv,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub kind: PathKindName,
    /// Final time `T`; for `excursion` the turn is at `T/2`.
    #[serde(default = "one")]
    pub horizon: f64,
    /// Brownian knots including `t = 0`; alternative to `h`.
    pub knots: Option<usize>,
    /// Brownian mesh; `T/h` must be an integer.
    pub h: Option<f64>,
    /// Slope of `linear`, peak of `excursion`.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// `t,w` CSV for `csv`, relative to the config file.
    pub file: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    Periodic,
    Outflow,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub cells: usize,
    pub boundary: BoundaryName,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `left` for `x < at`, `right` otherwise.
    Riemann {
        left: f64,
        right: f64,
        #[serde(default)]
        at: f64,
    },
    /// `amplitude (1 − ((x − center)/width)²)²` on `|x − center| < width`.
    Bump {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// `amplitude exp(−((x − center)/width)²)`
    Gaussian {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// `mean + amplitude sin(wavenumber x)`
    Sine {
        #[serde(default)]
        mean: f64,
        amplitude: f64,
        wavenumber: f64,
    },
    /// Steady state `λ c(x)^{−1/2}` of `inhom_burgers`.
    Steady { lambda: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    SplitEo,
    InterfaceEo,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    /// Snapshot times; defaults to `snapshot_count` uniform times.
    pub snapshots: Option<Vec<f64>>,
    #[serde(default = "default_snapshot_count")]
    pub snapshot_count: usize,
}

fn default_cfl() -> f64 {
    SolverConfig::default().cfl
}

fn default_scheme() -> SchemeName {
    SchemeName::SplitEo
}

fn default_snapshot_count() -> usize {
    10
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            cfl: default_cfl(),
            scheme: default_scheme(),
            snapshots: None,
            snapshot_count: default_snapshot_count(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Characteristic integration.
    pub ode: f64,
    /// Kruzkov residuals.
    pub entropy: f64,
    /// Steady-state invariant region.
    pub invariant_region: f64,
    /// `|det J − 1|`.
    pub jacobian: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: 1e-9,
            entropy: 1e-10,
            invariant_region: 1e-10,
            jacobian: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionSpec {
    /// Random pairs; half of them ordered.
    pub pairs: usize,
    pub amplitude: f64,
    pub modes: usize,
    /// Use `[initial]` for both members of a single pair.
    pub identical: bool,
}

impl Default for ContractionSpec {
    fn default() -> Self {
        Self {
            pairs: 20,
            amplitude: 1.0,
            modes: 4,
            identical: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinftySpec {
    /// `M`; defaults to `‖u⁰‖∞`.
    pub bound: Option<f64>,
    pub s_max: f64,
    pub tau_samples: usize,
    pub feet: usize,
    pub slack_cells: f64,
    pub max_growth: f64,
    /// Also check `k₋ ≤ u ≤ k₊` for the steady states of this level.
    pub invariant_lambda: Option<f64>,
}

impl Default for LinftySpec {
    fn default() -> Self {
        let d = crate::verify::LinftyOptions::default();
        Self {
            bound: None,
            s_max: d.s_max,
            tau_samples: d.tau_samples,
            feet: d.n_y,
            slack_cells: d.slack_cells,
            max_growth: d.max_growth,
            invariant_lambda: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassBoundSpec {
    pub dxi: f64,
    pub margin: f64,
    pub steps_per_slab: usize,
    pub window: f64,
    pub tol_const: f64,
    /// Path meshes for the refinement study, coarsest first; empty skips it.
    pub refinement: Vec<f64>,
    pub growth: f64,
}

impl Default for MassBoundSpec {
    fn default() -> Self {
        let d = crate::kinetic::DefectOptions::default();
        let w = crate::verify::MassBoundOptions::default();
        Self {
            dxi: d.dxi,
            margin: d.margin,
            steps_per_slab: d.steps_per_slab,
            window: w.window,
            tol_const: w.tol_const,
            refinement: Vec::new(),
            growth: 1.1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropySpec {
    pub levels: Vec<f64>,
}

impl Default for EntropySpec {
    fn default() -> Self {
        Self {
            levels: vec![-0.5, 0.0, 0.5],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySpec {
    pub h0: f64,
    pub levels: usize,
    pub ratio_spread: f64,
    pub refine_grid: bool,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            h0: 1.0 / 16.0,
            levels: 5,
            ratio_spread: 10.0,
            refine_grid: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QlemmaSpec {
    pub x: f64,
    pub xi: f64,
    pub t: f64,
    pub t0: f64,
    pub eps: Vec<f64>,
    pub tol: f64,
}

impl Default for QlemmaSpec {
    fn default() -> Self {
        Self {
            x: 0.5,
            xi: 0.03,
            t: 0.3,
            t0: 0.0,
            eps: vec![0.2, 0.1, 0.05],
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacteristicsSpec {
    pub flows: usize,
    pub x_range: [f64; 2],
    pub eta_range: [f64; 2],
    pub s_max: f64,
    /// Point and widths of the cancellation study; empty widths skip it.
    pub x: f64,
    pub xi: f64,
    pub eps: Vec<f64>,
    pub pairs: usize,
    pub max_spread: f64,
}

impl Default for CharacteristicsSpec {
    fn default() -> Self {
        Self {
            flows: 1000,
            x_range: [-3.0, 3.0],
            eta_range: [-1.5, 1.5],
            s_max: 1.0,
            x: 0.3,
            xi: 0.7,
            eps: vec![1e-1, 1e-2, 1e-3],
            pairs: 16,
            max_spread: 2.0,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text. Errors carry the line, column and offending key.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn missing(&self, key: &str) -> Error {
        Error::Config(format!(
            "missing key `{key}` (required by experiment {})",
            self.experiment.tag()
        ))
    }

    pub fn check_required(&self) -> Result<()> {
        for &key in self.experiment.required() {
            let present = match key {
                "flux" => self.flux.is_some(),
                "path" => self.path.is_some(),
                "grid" => self.grid.is_some(),
                "initial" => self.initial.is_some(),
                _ => true,
            };
            if !present {
                return Err(self.missing(key));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid1D> {
        let g = self.grid.as_ref().ok_or_else(|| self.missing("grid"))?;
        let boundary = match g.boundary {
            BoundaryName::Periodic => Boundary::Periodic,
            BoundaryName::Outflow => Boundary::Outflow,
        };
        Grid1D::new(g.x_lo, g.x_hi, g.cells, boundary).map_err(|e| config_error("grid", e))
    }

    pub fn build_flux(&self) -> Result<FluxModel> {
        let f = self.flux.as_ref().ok_or_else(|| self.missing("flux"))?;
        let x = match (f.x_range, &self.grid) {
            (Some(r), _) => (r[0], r[1]),
            (None, Some(g)) => (g.x_lo, g.x_hi),
            (None, None) => (-8.0, 8.0),
        };
        let domain = StateBox::new(x, (f.u_range[0], f.u_range[1])).map_err(|e| config_error("flux", e))?;
        let c: Option<Coefficient> = f.coefficient.map(Into::into);
        let preset = match f.preset {
            PresetName::Burgers => {
                if c.is_some() {
                    return Err(Error::Config("flux.coefficient: burgers takes no coefficient".into()));
                }
                Preset::Burgers
            }
            PresetName::InhomBurgers => Preset::InhomBurgers(c.unwrap_or(Coefficient::HALF_SINE)),
            PresetName::TwoPhase => Preset::TwoPhase(c.unwrap_or(Coefficient::Constant(1.0))),
            PresetName::LinearAdvection => Preset::LinearAdvection(c.unwrap_or(Coefficient::Constant(1.0))),
        };
        FluxModel::new(preset, domain).map_err(|e| config_error("flux", e))
    }

    /// The driving path; `seed` overrides the configured seed.
    pub fn build_path(&self, base: &Path) -> Result<RoughPath> {
        let p = self.path.as_ref().ok_or_else(|| self.missing("path"))?;
        let built = match p.kind {
            PathKindName::Brownian => {
                let knots = match (p.knots, p.h) {
                    (Some(n), None) => n,
                    (None, Some(h)) => {
                        let steps = p.horizon / h;
                        if !(h > 0.0) || (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                            return Err(Error::Config(format!(
                                "path.h: horizon {} is not a whole number of steps of {h}",
                                p.horizon
                            )));
                        }
                        steps.round() as usize + 1
                    }
                    (None, None) => return Err(Error::Config("path: brownian needs `knots` or `h`".into())),
                    (Some(_), Some(_)) => return Err(Error::Config("path: give only one of `knots` and `h`".into())),
                };
                RoughPath::sample_brownian(p.horizon, knots, self.seed)
            }
            PathKindName::Linear => RoughPath::linear(p.amplitude, p.horizon),
            PathKindName::Excursion => RoughPath::new(
                vec![0.0, 0.5 * p.horizon, p.horizon],
                vec![0.0, p.amplitude, 0.0],
                PathKind::User,
            ),
            PathKindName::Csv => {
                let file = p.file.as_ref().ok_or_else(|| Error::Config("path: csv needs `file`".into()))?;
                let full = base.join(file);
                let f = std::fs::File::open(&full).map_err(|e| Error::Config(format!("path.file {}: {e}", full.display())))?;
                RoughPath::read_csv(f)
            }
        };
        built.map_err(|e| config_error("path", e))
    }

    pub fn initial_fn(&self) -> Result<Box<dyn Fn(f64) -> f64 + Sync + Send>> {
        let init = self.initial.clone().ok_or_else(|| self.missing("initial"))?;
        Ok(match init {
            InitialSpec::Riemann { left, right, at } => Box::new(move |x| if x < at { left } else { right }),
            InitialSpec::Bump { amplitude, center, width } => {
                if !(width > 0.0) {
                    return Err(Error::Config("initial.width must be positive".into()));
                }
                Box::new(move |x| {
                    let r = (x - center) / width;
                    if r.abs() < 1.0 {
                        amplitude * (1.0 - r * r).powi(2)
                    } else {
                        0.0
                    }
                })
            }
            InitialSpec::Gaussian { amplitude, center, width } => {
                if !(width > 0.0) {
                    return Err(Error::Config("initial.width must be positive".into()));
                }
                Box::new(move |x| amplitude * (-((x - center) / width).powi(2)).exp())
            }
            InitialSpec::Sine { mean, amplitude, wavenumber } => Box::new(move |x| mean + amplitude * (wavenumber * x).sin()),
            InitialSpec::Steady { lambda } => {
                let flux = self.build_flux()?;
                if !matches!(flux.preset(), Preset::InhomBurgers(_)) {
                    return Err(Error::Config("initial: steady data needs the inhom_burgers preset".into()));
                }
                Box::new(move |x| flux.steady_states(x, lambda.abs()).map_or(f64::NAN, |k| if lambda >= 0.0 { k.1 } else { k.0 }))
            }
            InitialSpec::Constant { value } => Box::new(move |_| value),
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(Error::Config(format!("solver.cfl must lie in (0, 1], got {}", s.cfl)));
        }
        Ok(SolverConfig {
            cfl: s.cfl,
            scheme: match s.scheme {
                SchemeName::SplitEo => NumericalFlux::SplitEngquistOsher,
                SchemeName::InterfaceEo => NumericalFlux::InterfaceEngquistOsher,
            },
        })
    }

    pub fn snapshot_times(&self, horizon: f64) -> Result<Vec<f64>> {
        match &self.solver.snapshots {
            Some(ts) => {
                if ts.iter().any(|&t| !(t >= 0.0 && t <= horizon)) {
                    return Err(Error::Config(format!("solver.snapshots must lie in [0, {horizon}]")));
                }
                Ok(ts.clone())
            }
            None => {
                let n = self.solver.snapshot_count.max(1);
                Ok((1..=n).map(|k| horizon * k as f64 / n as f64).collect())
            }
        }
    }
}

fn config_error(section: &str, e: Error) -> Error {
    Error::Config(format!("{section}: {e}"))
}
