//! CSV and report writers. Every file starts with a comment line naming the
//! tool version, the config hash and the seed.

use std::fmt::Write as _;
use std::path::Path;

use crate::attractor::AttractorSample;
use crate::bifurcation::SweepRecord;
use crate::chaos::ChaosRecord;
use crate::cocycle::CocycleTrace;
use crate::error::Result;
use crate::solver::{BoundaryCondition, GridField};

/// Provenance of an output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn line(&self) -> String {
        format!("# skewlab {} config_hash={} seed={}\n", crate::VERSION, self.config_hash, self.seed)
    }
}

fn table(header: &Header, columns: &[&str]) -> String {
    let mut s = header.line();
    s.push_str(&columns.join(","));
    s.push('\n');
    s
}

fn bool01(b: bool) -> u8 {
    u8::from(b)
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

pub fn scan_csv(header: &Header, records: &[AttractorSample]) -> String {
    let mut s = table(
        header,
        &["theta1", "theta2", "b_norm", "min_b", "fiber_class", "backward_sup", "cauchy_gap", "converged"],
    );
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            Num(r.base.theta[0]),
            Num(r.base.theta[1]),
            Num(r.b_norm),
            Num(r.min_b),
            r.fiber_class.name(),
            Num(r.backward_sup),
            Num(r.cauchy_gap),
            bool01(r.converged)
        );
    }
    s
}

pub fn chaos_csv(header: &Header, records: &[ChaosRecord]) -> String {
    let mut s = table(header, &["theta1", "theta2", "liminf_est", "limsup_est", "flagged"]);
    for r in records {
        let (lo, hi) = r.stats.map_or((f64::NAN, f64::NAN), |st| (st.liminf_est, st.limsup_est));
        let _ = writeln!(s, "{},{},{},{},{}", Num(r.base.theta[0]), Num(r.base.theta[1]), Num(lo), Num(hi), bool01(r.flagged));
    }
    s
}

pub fn bifurcation_csv(header: &Header, records: &[SweepRecord]) -> String {
    let mut s = table(header, &["gamma", "b_norm", "min_b", "converged"]);
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", Num(r.gamma), Num(r.b_norm), Num(r.min_b), bool01(r.converged));
    }
    s
}

pub fn trace_csv(header: &Header, trace: &CocycleTrace) -> String {
    let mut s = table(header, &["t", "log_c"]);
    for (t, l) in trace.times.iter().zip(&trace.log_c) {
        let _ = writeln!(s, "{},{}", Num(*t), Num(*l));
    }
    s
}

pub fn field_csv(header: &Header, nodes: &[f64], name: &str, field: &GridField) -> String {
    let mut s = table(header, &["node", "x", name]);
    for (i, (x, v)) in nodes.iter().zip(&field.values).enumerate() {
        let _ = writeln!(s, "{i},{},{}", Num(*x), Num(*v));
    }
    s
}

/// Trajectory rows `(t, node values)` with a second header line describing
/// the discretization.
pub struct TrajectoryCsv {
    buf: String,
}

impl TrajectoryCsv {
    pub fn new(header: &Header, n_nodes: usize, dt: f64, bc: &BoundaryCondition) -> Self {
        let mut buf = header.line();
        let _ = writeln!(buf, "# n_cells={} dt={} bc={} spec_hash={}", n_nodes - 1, dt, bc, header.config_hash);
        buf.push('t');
        for i in 0..n_nodes {
            let _ = write!(buf, ",node_{i}");
        }
        buf.push('\n');
        Self { buf }
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        let _ = write!(self.buf, "{}", Num(t));
        for v in values {
            let _ = write!(self.buf, ",{}", Num(*v));
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// `key=value` report lines under the header line.
pub fn report(header: &Header, body: &str) -> String {
    let mut s = header.line();
    s.push_str(body);
    if !body.ends_with('\n') {
        s.push('\n');
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_columns() {
        let h = Header { config_hash: "abcd".into(), seed: 7 };
        let csv = bifurcation_csv(&h, &[SweepRecord { gamma: -0.5, b_norm: 0.0, min_b: 0.0, converged: true }]);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# skewlab "));
        assert!(lines[0].ends_with("config_hash=abcd seed=7"));
        assert_eq!(lines[1], "gamma,b_norm,min_b,converged");
        assert_eq!(lines[2], "-0.5,0,0,1");
    }

    #[test]
    fn trajectory_layout() {
        let h = Header { config_hash: "ff".into(), seed: 1 };
        let mut t = TrajectoryCsv::new(&h, 3, 0.01, &BoundaryCondition::robin(1.0));
        t.push(0.0, &[1.0, 2.0, 3.0]);
        let s = t.finish();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "# n_cells=2 dt=0.01 bc=robin(alpha=1) spec_hash=ff");
        assert_eq!(lines[2], "t,node_0,node_1,node_2");
        assert_eq!(lines[3], "0,1,2,3");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.5, -2.25e-7, 4.18e-44, 3e20, 0.1 + 0.2, f64::NAN] {
            let s = Num(x).to_string();
            let back: f64 = s.parse().unwrap();
            assert!(back == x || (x.is_nan() && back.is_nan()), "{s}");
        }
        assert_eq!(Num(4.18e-44).to_string(), "4.18e-44");
        assert_eq!(Num(0.25).to_string(), "0.25");
    }
}
