//! Command line front end. Every subcommand reads one experiment file,
//! applies `--set` overrides, runs one analysis and writes its CSV or report
//! into the output directory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::attractor::{scan_sections, AttractorSample, ScanConfig, ScanSummary};
use crate::bifurcation::{sweep, Sweep};
use crate::chaos::{fiber_chaos_scan, ChaosScan};
use crate::cocycle::{Boundedness, LinearCocycle};
use crate::coefficients::calibrate_zero_exponent;
use crate::config::Model;
use crate::error::{Error, Result};
use crate::output::{self, TrajectoryCsv};
use crate::solver::{step_count, GridField, Stepper};

#[derive(Debug, Parser)]
#[command(name = "skewlab", version, about = "Pullback attractors of quasi-periodically forced reaction-diffusion equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment file (TOML).
    pub config: PathBuf,
    /// Override a config key, e.g. `--set cocycle.dt=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads for sample sweeps.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(j) = self.jobs {
            o.push(format!("jobs={j}"));
        }
        if let Some(d) = &self.output_dir {
            o.push(format!("output_dir={}", toml::Value::String(d.display().to_string())));
        }
        o
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// First eigenvalue and eigenfunction of the boundary value problem.
    Eigen(Common),
    /// Upper Lyapunov exponent of `gamma + h` at the reference point.
    Lyapunov(Common),
    /// Log-cocycle time series at the reference point.
    Trace(Common),
    /// Bounded or unbounded backward cocycle at the reference point.
    Classify(Common),
    /// Pullback boundary and fiber class over sampled base points.
    Pullback(Common),
    /// Li-Yorke pair scan over the Fine fibers.
    Chaos(Common),
    /// Boundary norm across the `gamma` grid.
    Bifurcate(Common),
    /// Shift `h` to zero exponent and print the shifted config.
    Calibrate(Common),
    /// Forward trajectory from a constant field.
    Evolve(Common),
    /// Check the config and print warnings.
    Validate(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Eigen(c)
            | Command::Lyapunov(c)
            | Command::Trace(c)
            | Command::Classify(c)
            | Command::Pullback(c)
            | Command::Chaos(c)
            | Command::Bifurcate(c)
            | Command::Calibrate(c)
            | Command::Evolve(c)
            | Command::Validate(c) => c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen(_) => "eigen",
            Command::Lyapunov(_) => "lyapunov",
            Command::Trace(_) => "trace",
            Command::Classify(_) => "classify",
            Command::Pullback(_) => "pullback",
            Command::Chaos(_) => "chaos",
            Command::Bifurcate(_) => "bifurcate",
            Command::Calibrate(_) => "calibrate",
            Command::Evolve(_) => "evolve",
            Command::Validate(_) => "validate",
        }
    }
}

/// A file produced by a subcommand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn file(&mut self, name: &str, contents: String) {
        self.artifacts.push(Artifact { name: name.into(), contents });
    }

    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

fn scan_config(m: &Model) -> ScanConfig {
    let c = &m.config;
    ScanConfig {
        pullback: c.pullback.clone(),
        cocycle: c.cocycle.clone(),
        thresholds: c.thresholds,
        certify_at: Some((c.base_point(), c.horizon)),
        jobs: c.jobs,
    }
}

fn require_nonlinear(m: &Model, what: &str) -> Result<()> {
    if m.problem.g.is_none() {
        return Err(Error::Config(format!("{what} needs a nonlinearity: section g is missing")));
    }
    Ok(())
}

/// Attractor scan over the configured samples.
pub fn run_scan(m: &Model) -> Result<(Vec<AttractorSample>, ScanSummary)> {
    require_nonlinear(m, "pullback")?;
    scan_sections(&m.disc, &m.config.sample_points(), &m.problem, &scan_config(m))
}

pub fn run_chaos(m: &Model, samples: &[AttractorSample]) -> Result<ChaosScan> {
    fiber_chaos_scan(&m.disc, samples, &m.problem, &m.config.chaos, &m.config.thresholds, m.config.jobs)
}

pub fn run_sweep(m: &Model) -> Result<Sweep> {
    require_nonlinear(m, "bifurcate")?;
    let c = &m.config;
    sweep(&m.disc, &c.gammas, &m.problem, &c.base_point(), &c.pullback, c.sweep_tol, c.jobs)
}

fn linear_part(m: &Model) -> crate::coefficients::LinearCoefficientSpec {
    if m.problem.gamma == 0.0 {
        m.problem.h.clone()
    } else {
        m.problem.h.shifted(m.problem.gamma)
    }
}

/// Run one subcommand without touching the file system.
pub fn execute(cmd: &Command, m: &Model) -> Result<Outcome> {
    let c = &m.config;
    let header = c.header();
    let mut out = Outcome::default();
    match cmd {
        Command::Eigen(_) => {
            let e = &m.disc.ground;
            out.stdout = format!("gamma0={}\niterations={}\n", e.gamma0, e.iterations);
            out.file("eigen.csv", output::field_csv(&header, &m.disc.grid.nodes(), "e0", &e.e0));
        }
        Command::Lyapunov(_) => {
            let coc = LinearCocycle::new(&m.disc, &linear_part(m), c.cocycle.clone())?;
            let est = coc.lyapunov_exponent(&c.base_point(), c.horizon)?;
            out.stdout = format!("{est}\ngamma0={}\n", m.disc.gamma0());
            out.file("lyapunov.txt", output::report(&header, &out.stdout));
        }
        Command::Trace(_) => {
            let coc = LinearCocycle::new(&m.disc, &linear_part(m), c.cocycle.clone())?;
            let tr = coc.trace(&c.base_point(), c.horizon)?;
            out.stdout = format!("records={}\nlast={}\n", tr.log_c.len(), tr.last());
            out.file("trace.csv", output::trace_csv(&header, &tr));
        }
        Command::Classify(_) => {
            let coc = LinearCocycle::new(&m.disc, &m.problem.h, c.cocycle.clone())?;
            let p = c.base_point();
            let token = coc.certify_zero_exponent(&p, c.horizon)?;
            let (sup, _, reached) = coc.backward_sup_escalating(&token, &p, c.cocycle.t_max, c.cocycle.m_bound)?;
            let class = coc.classify_boundedness(&token, &p, c.cocycle.t_max, c.cocycle.m_bound)?;
            let name = match class {
                Boundedness::Bounded => "bounded",
                Boundedness::Unbounded => "unbounded",
                Boundedness::Inconclusive => "inconclusive",
            };
            out.stdout = format!(
                "exponent={}\nexponent_gap={}\nbackward_sup={sup}\nbackward_horizon={reached}\nm_bound={}\nclass={name}\n",
                token.estimate.value, token.estimate.convergence_gap, c.cocycle.m_bound
            );
            out.file("classify.txt", output::report(&header, &out.stdout));
        }
        Command::Pullback(_) => {
            let (records, summary) = run_scan(m)?;
            out.stdout = format!("{summary}\n");
            out.file("scan.csv", output::scan_csv(&header, &records));
            out.file("scan_summary.txt", output::report(&header, &out.stdout));
        }
        Command::Chaos(_) => {
            let (records, _) = run_scan(m)?;
            let ch = run_chaos(m, &records)?;
            let flagged = ch.records.iter().filter(|r| r.flagged).count();
            out.stdout = format!(
                "fine={}\nflagged={flagged}\nfraction={}\nthreshold_lo={}\nthreshold_hi={}\n",
                ch.fine_count,
                ch.fraction.map_or("none".to_string(), |f| f.to_string()),
                c.chaos.threshold_lo,
                ch.threshold_hi
            );
            out.file("chaos.csv", output::chaos_csv(&header, &ch.records));
            out.file("chaos_summary.txt", output::report(&header, &out.stdout));
        }
        Command::Bifurcate(_) => {
            let sw = run_sweep(m)?;
            let mut s = String::new();
            for r in &sw.records {
                let _ = writeln!(s, "gamma={} b_norm={} converged={}", output::Num(r.gamma), output::Num(r.b_norm), r.converged);
            }
            if let Some(rl) = sw.right_limit {
                let _ = writeln!(s, "right_limit_extrapolated={}", rl.extrapolated);
                let _ = writeln!(s, "smallest_positive={}", rl.smallest_positive);
                if let Some(z) = rl.at_zero {
                    let _ = writeln!(s, "at_zero={z}");
                }
            }
            out.stdout = s;
            out.file("bifurcation.csv", output::bifurcation_csv(&header, &sw.records));
        }
        Command::Calibrate(_) => {
            let cal = calibrate_zero_exponent(&m.problem.h, &m.disc, &c.cocycle, &c.base_point(), c.horizon)?;
            let mut doc = c.document.clone();
            let h = doc.entry("h").or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let Some(t) = h.as_table_mut() {
                t.insert("shift".into(), toml::Value::Float(c.h.shift - cal.shift));
            }
            let body = toml::to_string(&doc).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
            out.stdout = format!(
                "# measured exponent {} (gap {}), after shift {}\n{body}",
                cal.measured.value, cal.measured.convergence_gap, cal.remeasured.value
            );
            out.file("calibrated.toml", output::report(&header, &out.stdout));
        }
        Command::Evolve(_) => {
            let e = &c.evolve;
            let stepper = Stepper::new(&m.disc, &m.problem, e.dt)?;
            let every = (e.record_every / e.dt).round().max(1.0) as usize;
            let mut csv = TrajectoryCsv::new(&header, m.disc.n_nodes(), e.dt, &m.disc.bc);
            let z0 = GridField::constant(&m.disc.grid, e.initial);
            csv.push(0.0, &z0.values);
            let mut states = [z0.values];
            let mut last = 0.0;
            stepper.run(&c.base_point(), 0.0, step_count(e.horizon, e.dt), &mut states, every, |_, t, st| {
                csv.push(t, &st[0]);
                last = t;
                Ok(true)
            })?;
            out.stdout = format!("t_final={last}\nsup_norm={}\n", crate::solver::GridField::new(states[0].clone()).sup_norm());
            out.file("trajectory.csv", csv.finish());
        }
        Command::Validate(_) => {
            out.stdout = format!("config_hash={}\nwarnings={}\nok\n", c.hash, c.warnings.len());
        }
    }
    Ok(out)
}

/// Parse arguments, run, write outputs. Returns the process exit code: 0 on
/// success, 1 for usage and validation errors, 2 for numerical failures.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match run_command(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let common = cmd.common();
    let model = Model::load(&common.config, &common.overrides())?;
    for w in &model.config.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let outcome = execute(cmd, &model)?;
    for a in &outcome.artifacts {
        let path = output::write_file(&model.config.output_dir, &a.name, &a.contents)?;
        let _ = writeln!(stderr, "wrote {}", path.display());
    }
    let _ = write!(stdout, "{}", outcome.stdout);
    Ok(())
}
