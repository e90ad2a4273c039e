//! Command-line front end: `sclrough run <config> [--out DIR] [--seed N]`
//! and `sclrough list`.
//!
//! Exit status is 0 when every check of every report passes, 1 when a check
//! fails or the experiment errors, and 2 for configuration problems.

pub mod config;
pub mod svg;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{Experiment, ExperimentConfig};

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::kinetic::{defect_measure, DefectOptions, XiGrid};
use crate::path::RoughPath;
use crate::solver::{solve, Grid1D, Snapshots, SolverConfig};
use crate::verify::{self, Relation, Report, Table};
use svg::{line_plot, Series};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "SCLROUGH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sclrough", version, about = "Scalar conservation laws driven by rough signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding the configured one.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List experiments with their required tables.
    List,
}

/// The text printed by `sclrough list`, sorted by tag.
pub fn list_experiments() -> String {
    let mut tags: Vec<Experiment> = Experiment::ALL.to_vec();
    tags.sort_by_key(|e| e.tag());
    let mut s = String::new();
    for e in tags {
        s.push_str(&format!("{:<16} {}\n{:<16} requires: {}\n", e.tag(), e.description(), "", e.required().join(", ")));
    }
    s
}

/// Everything one run produced.
#[derive(Debug)]
pub struct Outcome {
    pub reports: Vec<Report>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(Report::pass)
    }
}

/// Parses arguments, runs, prints, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_experiments());
            EXIT_PASS
        }
        Command::Run { config, out, seed } => {
            if let Err(e) = configure_threads() {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
            match run_file(&config, out.as_deref(), seed) {
                Ok(o) => {
                    for r in &o.reports {
                        print!("{r}");
                    }
                    if o.pass() {
                        EXIT_PASS
                    } else {
                        EXIT_FAIL
                    }
                }
                Err(e @ Error::Config(_)) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_FAIL
                }
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Loads a config file and runs it; relative path files resolve against the
/// config's directory.
pub fn run_file(path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Outcome> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output.dir = o.to_path_buf();
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run(&cfg, &base)
}

/// Inputs shared by the solver-based experiments, validated up front.
struct Setup {
    flux: FluxModel,
    path: RoughPath,
    grid: Grid1D,
    u0: Vec<f64>,
    solver: SolverConfig,
}

fn setup(cfg: &ExperimentConfig, base: &Path) -> Result<Setup> {
    let flux = cfg.build_flux()?;
    let path = cfg.build_path(base)?;
    let grid = cfg.build_grid()?;
    let u0 = grid.project(&*cfg.initial_fn()?);
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial: data is not finite on the grid".into()));
    }
    let solver = cfg.solver_config()?;
    Ok(Setup { flux, path, grid, u0, solver })
}

pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<Outcome> {
    cfg.check_required()?;
    let out = cfg.output.dir.clone();
    let mut files = Vec::new();
    let reports = match cfg.experiment {
        Experiment::Solve => {
            let s = setup(cfg, base)?;
            let times = cfg.snapshot_times(s.path.horizon())?;
            let traj = solve(&s.flux, &s.path, &s.u0, &s.grid, s.solver, &Snapshots::Times(times))?;
            files.push(write_with(&out, "solve_trajectory.csv", |w| traj.write_csv(w))?);
            files.push(write_with(&out, "solve_path.csv", |w| s.path.write_csv(w))?);
            if cfg.output.svg {
                let xs = s.grid.centers();
                let pick = |u: &[f64]| xs.iter().copied().zip(u.iter().copied()).collect();
                let svg = line_plot(
                    "solution",
                    "x",
                    &[
                        Series { label: "initial", points: pick(&traj.initial().u) },
                        Series { label: "final", points: pick(&traj.last().u) },
                    ],
                );
                files.push(write_text(&out, "solve_solution.svg", &svg)?);
            }
            let mut r = Report::new("solve");
            describe(&mut r, &s);
            r.input("snapshots", traj.snapshots.len()).input("substeps", traj.total_substeps());
            let finite = traj.snapshots.iter().flat_map(|s| &s.u).all(|v| v.is_finite());
            r.check("non_finite_values", if finite { 0.0 } else { 1.0 }, Relation::Le, 0.0);
            vec![r]
        }
        Experiment::Contraction => {
            let flux = cfg.build_flux()?;
            let path = cfg.build_path(base)?;
            let grid = cfg.build_grid()?;
            let solver = cfg.solver_config()?;
            let c = &cfg.contraction;
            let pairs = if c.identical {
                let u = grid.project(&*cfg.initial_fn()?);
                vec![(u.clone(), u)]
            } else {
                if c.pairs == 0 || c.modes == 0 {
                    return Err(Error::Config("contraction: pairs and modes must be positive".into()));
                }
                random_pairs(&grid, c.pairs, c.modes, c.amplitude, cfg.seed)
            };
            let times = cfg.snapshot_times(path.horizon())?;
            let mut main = verify::check_contraction(&flux, &path, &pairs, &grid, solver, &times)?;
            main.input("seed", cfg.seed);
            let identity = f_identity(&pairs, &grid)?;
            vec![main, identity]
        }
        Experiment::Linfty => {
            let s = setup(cfg, base)?;
            let l = &cfg.linfty;
            let times = cfg.snapshot_times(s.path.horizon())?;
            let traj = solve(&s.flux, &s.path, &s.u0, &s.grid, s.solver, &Snapshots::Times(times))?;
            let bound = l.bound.unwrap_or_else(|| s.u0.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
            let opts = verify::LinftyOptions {
                s_max: l.s_max,
                tau_samples: l.tau_samples,
                n_y: l.feet,
                tol: cfg.tolerances.ode,
                slack_cells: l.slack_cells,
                max_growth: l.max_growth,
            };
            let mut reports = vec![verify::linfty_supersolution(&s.flux, bound, &s.path, &traj, opts)?];
            if let Some(lambda) = l.invariant_lambda {
                let xs = s.grid.centers();
                let states: Vec<(f64, f64)> = xs
                    .iter()
                    .map(|&x| s.flux.steady_states(x, lambda))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::Config("linfty.invariant_lambda: preset has no steady states".into()))?;
                let (lo, hi): (Vec<f64>, Vec<f64>) = states.into_iter().unzip();
                let mut r = verify::invariant_region(&traj, &lo, &hi, cfg.tolerances.invariant_region)?;
                r.input("lambda", lambda);
                reports.push(r);
            }
            reports
        }
        Experiment::MassBound => {
            let s = setup(cfg, base)?;
            let m = &cfg.mass_bound;
            let traj = solve(&s.flux, &s.path, &s.u0, &s.grid, s.solver, &Snapshots::EveryStep { horizon: s.path.horizon() })?;
            let dopts = DefectOptions { dxi: m.dxi, margin: m.margin, steps_per_slab: m.steps_per_slab };
            let defect = defect_measure(&traj, &s.flux, dopts)?;
            files.push(write_with(&out, "mass_bound_defect.csv", |w| defect.write_csv(w))?);
            let mopts = verify::MassBoundOptions { window: m.window, tol_const: m.tol_const, tol: cfg.tolerances.ode };
            let mut r = verify::mass_bound(&traj, &defect, &s.flux, &s.path, mopts)?;
            r.input("negative_mass", defect.negative_mass()).input("min_defect", defect.min_value());
            let mut reports = vec![r];
            if !m.refinement.is_empty() {
                reports.push(verify::mass_refinement(&s.flux, &s.path, &m.refinement, &s.u0, &s.grid, s.solver, dopts, m.growth)?);
            }
            reports
        }
        Experiment::Entropy => {
            let s = setup(cfg, base)?;
            let traj = solve(&s.flux, &s.path, &s.u0, &s.grid, s.solver, &Snapshots::EveryStep { horizon: s.path.horizon() })?;
            if cfg.entropy.levels.is_empty() {
                return Err(Error::Config("entropy.levels must not be empty".into()));
            }
            cfg.entropy
                .levels
                .iter()
                .enumerate()
                .map(|(j, &k)| {
                    let mut r = verify::entropy_residual(&traj, &s.flux, k, cfg.tolerances.entropy)?;
                    r.name = format!("entropy_level{j}");
                    Ok(r)
                })
                .collect::<Result<_>>()?
        }
        Experiment::Stability => {
            let flux = cfg.build_flux()?;
            let path = cfg.build_path(base)?;
            let grid = cfg.build_grid()?;
            let solver = cfg.solver_config()?;
            let u0 = cfg.initial_fn()?;
            let st = &cfg.stability;
            let opts = verify::StabilityOptions {
                h0: st.h0,
                levels: st.levels,
                ratio_spread: st.ratio_spread,
                refine_grid: st.refine_grid,
            };
            let mut r = verify::stability_cauchy(&flux, &path, opts, &*u0, &grid, solver)?;
            r.input("seed", cfg.seed);
            vec![r]
        }
        Experiment::Qlemma => {
            let flux = cfg.build_flux()?;
            let path = cfg.build_path(base)?;
            let q = &cfg.qlemma;
            vec![verify::q_lemma(&flux, &path, q.x, q.xi, q.t, q.t0, &q.eps, q.tol)?]
        }
        Experiment::Characteristics => {
            let flux = cfg.build_flux()?;
            let c = &cfg.characteristics;
            let mut reports = vec![verify::characteristic_invariants(
                &flux,
                c.flows,
                cfg.seed,
                (c.x_range[0], c.x_range[1]),
                (c.eta_range[0], c.eta_range[1]),
                c.s_max,
                cfg.tolerances.ode,
                cfg.tolerances.jacobian,
            )?];
            if !c.eps.is_empty() {
                reports.push(verify::cancellation_scaling(
                    &flux,
                    c.x,
                    c.xi,
                    &c.eps,
                    c.s_max,
                    c.pairs,
                    cfg.tolerances.ode,
                    c.max_spread,
                )?);
            }
            reports
        }
    };
    for r in &reports {
        files.extend(r.write(&out)?);
        if cfg.output.svg {
            for t in &r.tables {
                if let Some(svg) = table_plot(&r.name, t) {
                    files.push(write_text(&out, &format!("{}_{}.svg", r.name, t.name), &svg)?);
                }
            }
        }
    }
    Ok(Outcome { reports, files })
}

fn describe(r: &mut Report, s: &Setup) {
    r.input("flux", s.flux.preset().name())
        .input("path_kind", s.path.kind().as_str())
        .input("path_seed", s.path.seed().map_or("none".to_string(), |v| v.to_string()))
        .input("horizon", s.path.horizon())
        .input("cells", s.grid.n_cells())
        .input("cfl", s.solver.cfl)
        .input("scheme", s.solver.scheme.as_str());
}

/// Pairs of random trigonometric data; every second pair is ordered.
fn random_pairs(grid: &Grid1D, pairs: usize, modes: usize, amplitude: f64, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.length();
    let x0 = grid.x_lo();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64, f64)> {
        (1..=modes)
            .map(|m| (m as f64, rng.random_range(-1.0..1.0) / m as f64, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect()
    };
    let eval = |terms: &[(f64, f64, f64)], x: f64| -> f64 {
        let scale: f64 = terms.iter().map(|t| t.1.abs()).sum::<f64>().max(1e-12);
        amplitude / scale * terms.iter().map(|&(m, a, ph)| a * (std::f64::consts::TAU * m * (x - x0) / len + ph).sin()).sum::<f64>()
    };
    (0..pairs)
        .map(|k| {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let u1 = grid.project(|x| eval(&a, x));
            let u2 = if k % 2 == 1 {
                grid.project(|x| eval(&a, x) + 0.25 * amplitude * (1.0 + eval(&b, x) / amplitude))
            } else {
                grid.project(|x| eval(&b, x))
            };
            (u1, u2)
        })
        .collect()
}

/// Kinetic and direct L¹ distances of the initial pairs at `Δξ = 0.01`.
fn f_identity(pairs: &[(Vec<f64>, Vec<f64>)], grid: &Grid1D) -> Result<Report> {
    let dxi = 0.01;
    let bound = pairs.iter().flat_map(|(a, b)| a.iter().chain(b)).fold(0.0f64, |m, v| m.max(v.abs()));
    let xi = XiGrid::covering(bound, 0.1, dxi)?;
    let mut table = Table::new("pairs", &["pair", "kinetic", "direct"]);
    let mut worst = 0.0f64;
    for (k, (a, b)) in pairs.iter().enumerate() {
        let f = verify::contraction_functional(a, b, grid.dx(), xi)?;
        worst = worst.max((f.kinetic - f.direct).abs());
        table.push(vec![k as f64, f.kinetic, f.direct]);
    }
    let mut r = Report::new("f_identity");
    r.input("dxi", dxi).input("pairs", pairs.len());
    r.check("max_gap", worst, Relation::Le, 2.0 * dxi * grid.length());
    r.tables.push(table);
    Ok(r)
}

/// First column against the others, when the first column is sorted.
fn table_plot(report: &str, t: &Table) -> Option<String> {
    if t.header.len() < 2 || t.rows.len() < 2 {
        return None;
    }
    if t.rows.windows(2).any(|w| w[1][0] < w[0][0]) {
        return None;
    }
    let series: Vec<Series> = (1..t.header.len())
        .map(|c| Series { label: &t.header[c], points: t.rows.iter().map(|r| (r[0], r[c])).collect() })
        .collect();
    Some(line_plot(&format!("{report}: {}", t.name), &t.header[0], &series))
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(name);
    let file = File::create(&p).map_err(|e| Error::io(&p, e))?;
    f(BufWriter::new(file))?;
    Ok(p)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}
