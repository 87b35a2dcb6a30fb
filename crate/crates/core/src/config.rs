//! Experiment files: TOML with one table per module, `key=value` overrides,
//! validation that reports field paths and source lines, and the config hash
//! stamped on every output.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::attractor::{PullbackConfig, Thresholds};
use crate::base_flow::{sample_base, BasePoint, FrequencyPreset};
use crate::bifurcation::DEFAULT_GAMMAS;
use crate::chaos::ChaosConfig;
use crate::cocycle::CocycleConfig;
use crate::coefficients::{
    build_coboundary_h, build_unbounded_surrogate_h, LinearCoefficientSpec, NonlinearitySpec, SpacePart, StiffnessSpec,
    TorusMode, TorusPolynomial,
};
use crate::error::{Error, Result};
use crate::output::Header;
use crate::solver::{dt_max, BoundaryCondition, Discretization, Grid, ProblemSpec};

/// A validation finding tied to a key path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub line: Option<usize>,
    pub from_override: bool,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.from_override {
            write!(f, "--set {}: {}", self.path, self.message)
        } else if let Some(l) = self.line {
            write!(f, "line {l}: {}: {}", self.path, self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientSource {
    /// `constant + sum of torus modes + sum of space parts`
    General { constant: f64, modes: Vec<TorusMode>, space: Vec<SpacePart> },
    /// `gamma0 + omega . grad K`
    Coboundary { potential: Vec<TorusMode> },
    /// Small-divisor sum over the first `level` golden convergents.
    Surrogate { level: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HConfig {
    pub source: CoefficientSource,
    /// Constant added after construction.
    pub shift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GConfig {
    pub r0: f64,
    pub k: f64,
    pub k_modes: Vec<TorusMode>,
    pub k_space: Vec<SpacePart>,
}

/// Forward run for the `evolve` subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveConfig {
    pub horizon: f64,
    pub record_every: f64,
    /// Constant initial field.
    pub initial: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: FrequencyPreset,
    /// Reference base point for single-point analyses.
    pub point: [f64; 2],
    pub grid: Grid,
    pub bc: BoundaryCondition,
    pub h: HConfig,
    pub g: Option<GConfig>,
    pub gamma: f64,
    pub cocycle: CocycleConfig,
    /// Horizon of `lyapunov`, `trace` and `calibrate`.
    pub horizon: f64,
    pub pullback: PullbackConfig,
    pub thresholds: Thresholds,
    pub chaos: ChaosConfig,
    pub gammas: Vec<f64>,
    pub sweep_tol: f64,
    pub evolve: EvolveConfig,
    pub seed: u64,
    pub samples: usize,
    pub output_dir: PathBuf,
    pub jobs: usize,
    /// First 16 hex digits of the SHA-256 of the canonical document.
    pub hash: String,
    /// Merged document after overrides.
    pub document: Table,
    pub warnings: Vec<Issue>,
}

/// Keys that do not change results and stay out of the hash.
const UNHASHED: [&str; 2] = ["jobs", "output_dir"];

/// SHA-256 over the canonical serialization of `doc`, without the keys that
/// only affect where and how fast results are produced.
pub fn config_hash(doc: &Table) -> String {
    let mut d = doc.clone();
    for k in UNHASHED {
        d.remove(k);
    }
    let canonical = toml::to_string(&d).unwrap_or_default();
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Parse `KEY=VALUE`. The value is read as a TOML value, falling back to a
/// bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let Some((key, raw)) = s.split_once('=') else {
        return Err(Error::Config(format!("override \"{s}\" is not of the form key=value")));
    };
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override \"{s}\" has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(doc: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut t = doc;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        t = entry.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override {key}: {} is not a table", parts[..=i].join(".")))
        })?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Line of `path` in `source`: the `key =` line inside its table, or the
/// table header when the key is absent.
fn locate(source: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.split_once('.') {
        Some((s, k)) => (s, k.split(['.', '[']).next().unwrap_or(k)),
        None => ("", path.split('[').next().unwrap_or(path)),
    };
    let mut current = "";
    let mut header = None;
    for (i, line) in source.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.split(']').next()) {
            current = name.trim_start_matches('[').trim();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

struct Section<'t> {
    name: &'static str,
    table: Option<&'t Table>,
}

struct Reader<'a> {
    source: &'a str,
    overridden: BTreeSet<String>,
    errors: Vec<Issue>,
    warnings: Vec<Issue>,
}

impl<'a> Reader<'a> {
    fn issue(&self, path: &str, message: String) -> Issue {
        let from_override = self.overridden.iter().any(|o| o == path || path.starts_with(&format!("{o}.")));
        Issue { path: path.to_string(), line: locate(self.source, path), from_override, message }
    }

    fn error(&mut self, path: &str, message: impl Into<String>) {
        let i = self.issue(path, message.into());
        self.errors.push(i);
    }

    fn warn(&mut self, path: &str, message: impl Into<String>) {
        let i = self.issue(path, message.into());
        self.warnings.push(i);
    }

    fn path(s: &Section<'_>, key: &str) -> String {
        if s.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", s.name)
        }
    }

    fn section<'t>(&mut self, root: &'t Table, name: &'static str) -> Section<'t> {
        match root.get(name) {
            None => Section { name, table: None },
            Some(Value::Table(t)) => Section { name, table: Some(t) },
            Some(v) => {
                self.error(name, format!("expected a table, got {}", v.type_str()));
                Section { name, table: None }
            }
        }
    }

    fn known(&mut self, s: &Section<'_>, keys: &[&str]) {
        let Some(t) = s.table else { return };
        for k in t.keys() {
            if !keys.contains(&k.as_str()) && !(s.name.is_empty() && t[k].is_table()) {
                let p = Self::path(s, k);
                self.error(&p, format!("unknown key (expected one of: {})", keys.join(", ")));
            }
        }
    }

    fn get<'t>(&self, s: &Section<'t>, key: &str) -> Option<&'t Value> {
        s.table.and_then(|t| t.get(key))
    }

    fn opt_f64(&mut self, s: &Section<'_>, key: &str) -> Option<f64> {
        let v = self.get(s, key)?;
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                let p = Self::path(s, key);
                self.error(&p, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn f64(&mut self, s: &Section<'_>, key: &str, default: f64) -> f64 {
        self.opt_f64(s, key).unwrap_or(default)
    }

    fn positive(&mut self, s: &Section<'_>, key: &str, default: f64) -> f64 {
        let v = self.f64(s, key, default);
        if !(v > 0.0 && v.is_finite()) {
            let p = Self::path(s, key);
            self.error(&p, format!("must be positive and finite, got {v}"));
        }
        v
    }

    fn opt_int(&mut self, s: &Section<'_>, key: &str) -> Option<i64> {
        let v = self.get(s, key)?;
        match v {
            Value::Integer(i) => Some(*i),
            other => {
                let p = Self::path(s, key);
                self.error(&p, format!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn count(&mut self, s: &Section<'_>, key: &str, default: usize) -> usize {
        match self.opt_int(s, key) {
            None => default,
            Some(i) if i >= 0 => i as usize,
            Some(i) => {
                let p = Self::path(s, key);
                self.error(&p, format!("must be nonnegative, got {i}"));
                default
            }
        }
    }

    fn string(&mut self, s: &Section<'_>, key: &str) -> Option<String> {
        let v = self.get(s, key)?;
        match v {
            Value::String(x) => Some(x.clone()),
            other => {
                let p = Self::path(s, key);
                self.error(&p, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn typed<T: DeserializeOwned>(&mut self, s: &Section<'_>, key: &str, what: &str) -> Option<T> {
        let v = self.get(s, key)?;
        match v.clone().try_into::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                let p = Self::path(s, key);
                self.error(&p, format!("expected {what}: {}", e.to_string().trim()));
                None
            }
        }
    }

    fn list<T: DeserializeOwned>(&mut self, s: &Section<'_>, key: &str, what: &str) -> Vec<T> {
        let Some(Value::Array(items)) = self.get(s, key) else {
            if let Some(v) = self.get(s, key) {
                let p = Self::path(s, key);
                self.error(&p, format!("expected an array of {what}, got {}", v.type_str()));
            }
            return Vec::new();
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item.clone().try_into::<T>() {
                Ok(x) => out.push(x),
                Err(e) => {
                    let p = format!("{}[{i}]", Self::path(s, key));
                    self.error(&p, format!("expected {what}: {}", e.to_string().trim()));
                }
            }
        }
        out
    }
}

impl ExperimentConfig {
    /// Read and validate a config file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&source, overrides)
    }

    /// Parse, apply overrides and validate, including the cross-field checks
    /// that need the discretized problem.
    pub fn from_toml(source: &str, overrides: &[String]) -> Result<Self> {
        let cfg = Self::parse(source, overrides).map_err(join)?;
        Ok(Model::with_source(cfg, Some(source))?.config)
    }

    fn parse(source: &str, overrides: &[String]) -> std::result::Result<Self, Vec<Issue>> {
        let mut doc: Table = toml::from_str(source).map_err(|e| {
            vec![Issue {
                path: "<document>".into(),
                line: e.span().map(|s| source[..s.start].lines().count().max(1)),
                from_override: false,
                message: e.message().to_string(),
            }]
        })?;
        let mut overridden = BTreeSet::new();
        let mut errors = Vec::new();
        for o in overrides {
            match parse_override(o).and_then(|(k, v)| {
                apply_override(&mut doc, &k, v)?;
                Ok(k)
            }) {
                Ok(k) => {
                    overridden.insert(k);
                }
                Err(e) => errors.push(Issue { path: o.clone(), line: None, from_override: true, message: e.to_string() }),
            }
        }
        let mut r = Reader { source, overridden, errors, warnings: Vec::new() };
        let root = Section { name: "", table: Some(&doc) };
        r.known(&root, &["seed", "samples", "output_dir", "jobs"]);
        for k in doc.keys() {
            if doc[k].is_table()
                && !["base", "grid", "bc", "h", "g", "problem", "cocycle", "pullback", "thresholds", "chaos", "bifurcation", "evolve"]
                    .contains(&k.as_str())
            {
                r.error(k, "unknown section");
            }
        }
        let seed = r.opt_int(&root, "seed").unwrap_or(0) as u64;
        let samples = r.count(&root, "samples", 100);
        let jobs = r.count(&root, "jobs", 1).max(1);
        let output_dir = PathBuf::from(r.string(&root, "output_dir").unwrap_or_else(|| "out".into()));

        let base = r.section(&doc, "base");
        r.known(&base, &["preset", "omega", "point"]);
        let preset_name = r.string(&base, "preset").unwrap_or_else(|| "golden".into());
        let omega = r.typed::<[f64; 2]>(&base, "omega", "two numbers");
        let preset = match FrequencyPreset::from_name(&preset_name, omega) {
            Ok(p) => p,
            Err(e) => {
                r.error("base.preset", strip(e));
                FrequencyPreset::Golden
            }
        };
        let point = r.typed::<[f64; 2]>(&base, "point", "two numbers").unwrap_or([0.0, 0.0]);

        let grid_s = r.section(&doc, "grid");
        r.known(&grid_s, &["n_cells"]);
        let n_cells = r.count(&grid_s, "n_cells", 64);
        let grid = Grid::new(n_cells).unwrap_or_else(|e| {
            r.error("grid.n_cells", strip(e));
            Grid { n_cells: Grid::MIN_CELLS }
        });

        let bc_s = r.section(&doc, "bc");
        r.known(&bc_s, &["kind", "alpha", "alpha_left", "alpha_right"]);
        let bc = match r.string(&bc_s, "kind").as_deref() {
            None => {
                r.error("bc.kind", "bc.kind required (\"neumann\" or \"robin\")");
                BoundaryCondition::neumann()
            }
            Some("neumann") => {
                for k in ["alpha", "alpha_left", "alpha_right"] {
                    if r.get(&bc_s, k).is_some() {
                        r.error(&format!("bc.{k}"), "not allowed with kind = \"neumann\"");
                    }
                }
                BoundaryCondition::neumann()
            }
            Some("robin") => {
                let a = r.opt_f64(&bc_s, "alpha");
                let l = r.opt_f64(&bc_s, "alpha_left");
                let rr = r.opt_f64(&bc_s, "alpha_right");
                let bc = match (a, l, rr) {
                    (Some(a), None, None) => BoundaryCondition::robin(a),
                    (None, Some(l), Some(rr)) => BoundaryCondition::robin_lr(l, rr),
                    (None, None, None) => {
                        r.error("bc.alpha", "required for kind = \"robin\"");
                        BoundaryCondition::robin(1.0)
                    }
                    _ => {
                        r.error("bc.alpha", "give either alpha or both alpha_left and alpha_right");
                        BoundaryCondition::robin(1.0)
                    }
                };
                if let Err(e) = bc.validate() {
                    r.error("bc.alpha", strip(e));
                } else if bc.alpha_left == 0.0 && bc.alpha_right == 0.0 {
                    r.warn("bc.alpha", "alpha = 0 is the Neumann condition");
                }
                bc
            }
            Some(other) => {
                r.error("bc.kind", format!("unknown boundary condition \"{other}\" (expected \"neumann\" or \"robin\")"));
                BoundaryCondition::neumann()
            }
        };

        let h_s = r.section(&doc, "h");
        r.known(&h_s, &["kind", "constant", "modes", "space", "potential", "level", "shift"]);
        let kind = r.string(&h_s, "kind").unwrap_or_else(|| "general".into());
        let allowed: &[&str] = match kind.as_str() {
            "general" => &["kind", "constant", "modes", "space", "shift"],
            "coboundary" => &["kind", "potential", "shift"],
            "surrogate" => &["kind", "level", "shift"],
            _ => &[],
        };
        if let Some(t) = h_s.table {
            if !allowed.is_empty() {
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) && ["constant", "modes", "space", "potential", "level"].contains(&k.as_str()) {
                        r.error(&format!("h.{k}"), format!("not used by kind = \"{kind}\""));
                    }
                }
            }
        }
        let source_h = match kind.as_str() {
            "general" => CoefficientSource::General {
                constant: r.f64(&h_s, "constant", 0.0),
                modes: r.list(&h_s, "modes", "torus modes {m = [m1, m2], cos, sin}"),
                space: r.list(&h_s, "space", "space parts {m, phase, profile, amplitude}"),
            },
            "coboundary" => {
                let potential: Vec<TorusMode> = r.list(&h_s, "potential", "torus modes {m = [m1, m2], cos, sin}");
                if potential.is_empty() && r.get(&h_s, "potential").is_none() {
                    r.error("h.potential", "required for kind = \"coboundary\"");
                }
                CoefficientSource::Coboundary { potential }
            }
            "surrogate" => {
                let level = r.count(&h_s, "level", 6);
                if level == 0 {
                    r.error("h.level", "must be at least 1");
                }
                CoefficientSource::Surrogate { level }
            }
            other => {
                r.error("h.kind", format!("unknown coefficient kind \"{other}\" (expected general, coboundary or surrogate)"));
                CoefficientSource::General { constant: 0.0, modes: Vec::new(), space: Vec::new() }
            }
        };
        let h = HConfig { source: source_h, shift: r.f64(&h_s, "shift", 0.0) };

        let g_s = r.section(&doc, "g");
        r.known(&g_s, &["r0", "k", "k_modes", "k_space"]);
        let g = g_s.table.map(|_| GConfig {
            r0: r.positive(&g_s, "r0", 1.0),
            k: {
                if r.get(&g_s, "k").is_none() {
                    r.error("g.k", "required when section g is present");
                }
                r.positive(&g_s, "k", 1.0)
            },
            k_modes: r.list(&g_s, "k_modes", "torus modes"),
            k_space: r.list(&g_s, "k_space", "space parts"),
        });

        let pr = r.section(&doc, "problem");
        r.known(&pr, &["gamma", "dt"]);
        let gamma = r.f64(&pr, "gamma", 0.0);
        if !gamma.is_finite() {
            r.error("problem.gamma", "must be finite");
        }
        let dt_default = match r.opt_f64(&pr, "dt") {
            Some(d) if !(d > 0.0) => {
                r.error("problem.dt", format!("must be positive, got {d}"));
                1e-3
            }
            Some(d) => d,
            None => 1e-3,
        };

        let c = r.section(&doc, "cocycle");
        r.known(&c, &["dt", "dt_rec", "t_spin", "exponent_tol", "t_max", "m_bound", "drift_fraction", "horizon"]);
        let cd = CocycleConfig::default();
        let cocycle = CocycleConfig {
            dt: r.positive(&c, "dt", dt_default),
            dt_rec: r.positive(&c, "dt_rec", cd.dt_rec),
            t_spin: r.positive(&c, "t_spin", cd.t_spin),
            exponent_tol: r.positive(&c, "exponent_tol", cd.exponent_tol),
            t_max: r.positive(&c, "t_max", cd.t_max),
            m_bound: r.positive(&c, "m_bound", cd.m_bound),
            drift_fraction: r.positive(&c, "drift_fraction", cd.drift_fraction),
        };
        let horizon = r.positive(&c, "horizon", 1000.0);
        if cocycle.record_steps().is_err() {
            r.error("cocycle.dt_rec", format!("must be a whole multiple of cocycle.dt = {}", cocycle.dt));
        }

        let p = r.section(&doc, "pullback");
        r.known(&p, &["dt", "r_start", "t_initial", "t_cap", "cauchy_tol", "monotone_tol"]);
        let pd = PullbackConfig::default();
        let pullback = PullbackConfig {
            dt: r.positive(&p, "dt", dt_default),
            r_start: r.opt_f64(&p, "r_start"),
            t_initial: r.positive(&p, "t_initial", pd.t_initial),
            t_cap: r.positive(&p, "t_cap", pd.t_cap),
            cauchy_tol: r.positive(&p, "cauchy_tol", pd.cauchy_tol),
            monotone_tol: r.f64(&p, "monotone_tol", pd.monotone_tol),
        };
        if let Err(e) = pullback.validate() {
            let key = if pullback.r_start.is_some_and(|x| !(x > 0.0)) { "pullback.r_start" } else { "pullback.t_cap" };
            r.error(key, strip(e));
        }

        let t = r.section(&doc, "thresholds");
        r.known(&t, &["zero_tol", "positive_tol"]);
        let td = Thresholds::default();
        let thresholds =
            Thresholds { zero_tol: r.positive(&t, "zero_tol", td.zero_tol), positive_tol: r.positive(&t, "positive_tol", td.positive_tol) };

        let ch = r.section(&doc, "chaos");
        r.known(&ch, &["dt", "horizon", "window", "sample_every", "threshold_lo", "threshold_hi"]);
        let chd = ChaosConfig::default();
        let chaos = ChaosConfig {
            dt: r.positive(&ch, "dt", dt_default),
            horizon: r.positive(&ch, "horizon", chd.horizon),
            window: r.positive(&ch, "window", chd.window),
            sample_every: r.positive(&ch, "sample_every", chd.sample_every),
            threshold_lo: r.positive(&ch, "threshold_lo", chd.threshold_lo),
            threshold_hi: r.opt_f64(&ch, "threshold_hi"),
        };
        if let Err(e) = chaos.validate() {
            r.error("chaos.horizon", strip(e));
        }

        let b = r.section(&doc, "bifurcation");
        r.known(&b, &["gammas", "tol"]);
        let gammas = if r.get(&b, "gammas").is_some() { r.list::<f64>(&b, "gammas", "numbers") } else { DEFAULT_GAMMAS.to_vec() };
        if gammas.is_empty() || gammas.iter().any(|g| !g.is_finite()) {
            r.error("bifurcation.gammas", "needs at least one finite value");
        };
        let sweep_tol = r.f64(&b, "tol", 1e-6);

        let e = r.section(&doc, "evolve");
        r.known(&e, &["horizon", "record_every", "initial", "dt"]);
        let evolve = EvolveConfig {
            horizon: r.positive(&e, "horizon", 10.0),
            record_every: r.positive(&e, "record_every", 0.1),
            initial: r.f64(&e, "initial", 1.0),
            dt: r.positive(&e, "dt", dt_default),
        };

        if samples == 0 {
            r.warn("samples", "no samples: scans produce empty output");
        }
        if !r.errors.is_empty() {
            return Err(r.errors);
        }
        let hash = config_hash(&doc);
        Ok(Self {
            preset,
            point,
            grid,
            bc,
            h,
            g,
            gamma,
            cocycle,
            horizon,
            pullback,
            thresholds,
            chaos,
            gammas,
            sweep_tol,
            evolve,
            seed,
            samples,
            output_dir,
            jobs,
            hash,
            document: doc,
            warnings: r.warnings,
        })
    }

    pub fn omega(&self) -> [f64; 2] {
        self.preset.omega()
    }

    pub fn header(&self) -> Header {
        Header { config_hash: self.hash.clone(), seed: self.seed }
    }

    pub fn base_point(&self) -> BasePoint {
        BasePoint::new(self.point, self.omega())
    }

    /// The `samples` base points drawn with `seed`.
    pub fn sample_points(&self) -> Vec<BasePoint> {
        sample_base(self.samples, self.seed, self.omega())
    }

    fn issue(&self, source: Option<&str>, path: &str, message: String) -> Issue {
        Issue { path: path.into(), line: source.and_then(|s| locate(s, path)), from_override: false, message }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::Unsupported(m) | Error::Precondition(m) => m,
        other => other.to_string(),
    }
}

fn join(issues: Vec<Issue>) -> Error {
    Error::Config(issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
}

/// A validated config together with its discretization and problem.
pub struct Model {
    pub config: ExperimentConfig,
    pub disc: Discretization,
    pub problem: ProblemSpec,
}

impl Model {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        Self::with_source(config, None)
    }

    /// Build and run the cross-field checks; `source` only improves the
    /// line numbers of the messages.
    pub fn with_source(mut config: ExperimentConfig, source: Option<&str>) -> Result<Self> {
        let disc = Discretization::new(config.grid, &config.bc)?;
        let omega = config.omega();
        let h = match &config.h.source {
            CoefficientSource::General { constant, modes, space } => LinearCoefficientSpec {
                base_part: TorusPolynomial::new(modes.clone()),
                space_part: space.clone(),
                constant_shift: *constant,
                ..Default::default()
            },
            CoefficientSource::Coboundary { potential } => {
                build_coboundary_h(TorusPolynomial::new(potential.clone()), omega, &disc.bc, &disc.ground)?
            }
            CoefficientSource::Surrogate { level } => build_unbounded_surrogate_h(omega, *level, &disc.bc, &disc.ground)?,
        };
        let h = if config.h.shift != 0.0 { h.shifted(config.h.shift) } else { h };
        let g = config.g.as_ref().map(|g| NonlinearitySpec {
            dead_zone: g.r0,
            stiffness: StiffnessSpec {
                constant: g.k,
                base_part: TorusPolynomial::new(g.k_modes.clone()),
                space_part: g.k_space.clone(),
            },
        });
        let problem = ProblemSpec { h, g, gamma: config.gamma, bc: disc.bc };
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        if let Err(e) = problem.validate() {
            errors.push(config.issue(source, "g.k", strip(e)));
        }

        let lin = dt_max(&ProblemSpec::linear(problem.h.clone(), disc.bc));
        if config.cocycle.dt > lin {
            errors.push(config.issue(
                source,
                "cocycle.dt",
                format!("dt = {} exceeds dt_max = {lin} of the linear cocycle", config.cocycle.dt),
            ));
        }
        if problem.g.is_some() && errors.is_empty() {
            let g_hi = config.gammas.iter().copied().fold(config.gamma, f64::max);
            let worst = problem.with_gamma(g_hi);
            let dm = dt_max(&worst);
            for (path, dt) in [("pullback.dt", config.pullback.dt), ("chaos.dt", config.chaos.dt), ("evolve.dt", config.evolve.dt)] {
                if dt > dm {
                    errors.push(config.issue(source, path, format!("dt = {dt} exceeds dt_max = {dm} (gamma up to {g_hi})")));
                }
            }
            let box_ = worst.invariant_box().unwrap_or(0.0);
            if let Some(r) = config.pullback.r_start {
                if r < box_ {
                    errors.push(config.issue(
                        source,
                        "pullback.r_start",
                        format!("r_start = {r} is below the dissipativity bound {box_}; the pullback would not start above the attractor"),
                    ));
                } else if r < 4.0 * box_ {
                    warnings.push(config.issue(source, "pullback.r_start", format!("r_start = {r} is close to the dissipativity bound {box_}")));
                }
            }
        } else if problem.g.is_none() {
            let dm = dt_max(&problem);
            if config.evolve.dt > dm {
                errors.push(config.issue(
                    source,
                    "evolve.dt",
                    format!("dt = {} exceeds dt_max = {dm}", config.evolve.dt),
                ));
            }
        }
        if config.pullback.t_cap < 4.0 * config.pullback.t_initial {
            warnings.push(config.issue(source, "pullback.t_cap", "fewer than three pullback horizons".into()));
        }
        if !errors.is_empty() {
            return Err(join(errors));
        }
        config.warnings.extend(warnings);
        Ok(Self { config, disc, problem })
    }

    /// Load, validate and build in one go.
    pub fn from_toml(source: &str, overrides: &[String]) -> Result<Self> {
        let cfg = ExperimentConfig::parse(source, overrides).map_err(join)?;
        Self::with_source(cfg, Some(source))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&source, overrides)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN_OK: &str = r#"
seed = 7
samples = 4

[base]
preset = "golden"

[grid]
n_cells = 16

[bc]
kind = "neumann"

[h]
kind = "coboundary"
potential = [{ m = [0, 1], sin = 1.0 }]

[g]
r0 = 1.0
k = 10.0
"#;

    #[test]
    fn valid_golden_config() {
        let m = Model::from_toml(GOLDEN_OK, &[]).unwrap();
        assert_eq!(m.config.seed, 7);
        assert_eq!(m.config.hash.len(), 16);
        assert!(m.problem.h.is_coboundary());
        assert!(m.config.warnings.is_empty(), "{:?}", m.config.warnings);
    }

    #[test]
    fn missing_bc_kind() {
        let src = GOLDEN_OK.replace("kind = \"neumann\"", "");
        let err = Model::from_toml(&src, &[]).err().unwrap().to_string();
        assert!(err.contains("bc.kind required"), "{err}");
        assert!(err.contains("line 11: bc.kind"), "{err}");
    }

    #[test]
    fn stiff_dt_names_dt_max() {
        let src = GOLDEN_OK.replace("k = 10.0", "k = 1e6");
        let err = Model::from_toml(&src, &["pullback.dt=1.0".into()]).err().unwrap().to_string();
        assert!(err.contains("pullback.dt") && err.contains("dt_max"), "{err}");
    }

    #[test]
    fn overrides_take_precedence_and_change_hash() {
        let a = Model::from_toml(GOLDEN_OK, &[]).unwrap();
        let b = Model::from_toml(GOLDEN_OK, &["seed=8".into(), "grid.n_cells=32".into()]).unwrap();
        assert_eq!(b.config.seed, 8);
        assert_eq!(b.config.grid.n_cells, 32);
        assert_ne!(a.config.hash, b.config.hash);
        let c = Model::from_toml(GOLDEN_OK, &["jobs=4".into(), "output_dir=elsewhere".into()]).unwrap();
        assert_eq!(a.config.hash, c.config.hash);
    }

    #[test]
    fn hash_ignores_formatting() {
        let reformatted = GOLDEN_OK.replace("n_cells = 16", "n_cells=16   # comment");
        let a = ExperimentConfig::from_toml(GOLDEN_OK, &[]).unwrap();
        let b = ExperimentConfig::from_toml(&reformatted, &[]).unwrap();
        assert_eq!(a.hash, b.hash);
    }

    #[test]
    fn errors_are_collected_with_paths() {
        let src = format!("{GOLDEN_OK}\n[cocycle]\ndt = -1\nbogus = 3\n");
        let err = Model::from_toml(&src, &[]).err().unwrap().to_string();
        assert!(err.contains("cocycle.dt: must be positive"), "{err}");
        assert!(err.contains("cocycle.bogus: unknown key"), "{err}");
    }

    #[test]
    fn override_errors_are_labelled() {
        let err = Model::from_toml(GOLDEN_OK, &["grid.n_cells=2".into()]).err().unwrap().to_string();
        assert!(err.contains("--set grid.n_cells"), "{err}");
        assert!(parse_override("novalue").is_err());
        assert_eq!(parse_override("a.b = x").unwrap(), ("a.b".into(), Value::String("x".into())));
    }

    #[test]
    fn r_start_below_box_rejected() {
        let err = Model::from_toml(GOLDEN_OK, &["pullback.r_start=0.5".into()]).err().unwrap().to_string();
        assert!(err.contains("pullback.r_start"), "{err}");
    }

    #[test]
    fn surrogate_needs_golden() {
        let src = GOLDEN_OK
            .replace("preset = \"golden\"", "preset = \"sqrt2\"")
            .replace("kind = \"coboundary\"\npotential = [{ m = [0, 1], sin = 1.0 }]", "kind = \"surrogate\"\nlevel = 3");
        let err = Model::from_toml(&src, &[]).err().unwrap();
        assert!(matches!(err, Error::Unsupported(_)), "{err}");
    }

    #[test]
    fn toml_syntax_error_has_line() {
        let err = ExperimentConfig::from_toml("seed = 1\n[grid\nn_cells = 3\n", &[]).err().unwrap().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
