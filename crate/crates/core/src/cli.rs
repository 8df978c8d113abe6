//! Command-line driver: JSON problem configs, checks, solves, certification
//! and the artifacts written for each run.
//!
//! A config looks like
//!
//! ```json
//! {
//!   "sets": [[[-1, 1]], [["-inf", -2], [2, "inf"]]],
//!   "C": [[2, -1], [-1, 2]],
//!   "fields": [{"coeffs": [0, 0, 1]}, {"coeffs": [0, 0, 1], "log": 0.5}],
//!   "K": {"fixed": [1, 1]},
//!   "nodes": [400, 400]
//! }
//! ```
//!
//! `C` may be replaced by `"graph": {"vertices": n, "edges": [[tail, head], ...]}`
//! (1-indexed) or `{"chain": d}` / `{"star": d}`. `K` is `"simplex"`,
//! `{"simplex": total}`, `{"fixed": [...]}`, `{"A": [[...]], "a": [...]}` or,
//! with a graph, `{"incidence": [...]}`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::assumptions::AssumptionReport;
use crate::discretize::{assemble, AssembleOptions, Grid, MeasureTuple};
use crate::equilibrium::{self, audit_points, certify, partial_potential, EquilibriumReport, VerifyOptions};
use crate::error::{DiscretizeError, EquilibriumError, ModelError, OracleError};
use crate::graphs::DirectedMultigraph;
use crate::model::{ExternalField, InteractionMatrix, IntervalUnion, MassPolyhedron, ProblemInstance};
use crate::oracles;
use crate::solver::{solve, SolveOptions, SolveResult, StartRule, Variant};

/// Fewest cells allowed per interval of a component.
pub const MIN_NODES_PER_INTERVAL: usize = 8;

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 2;
pub const EXIT_NO_GUARANTEE: i32 = 3;
pub const EXIT_INPUT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("config line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error("config field `{path}`: {msg}")]
    Field { path: String, msg: String },
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Discretize(#[from] DiscretizeError),
    #[error("{0}")]
    Equilibrium(#[from] EquilibriumError),
    #[error("{0}")]
    Oracle(#[from] OracleError),
    #[error("output directory {0} is not empty (use --overwrite)")]
    OutputExists(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error("solution file line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

fn field_err(path: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Field {
        path: path.into(),
        msg: msg.into(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// A validated problem config.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemInstance,
    pub graph: Option<DirectedMultigraph>,
    pub nodes: Vec<usize>,
    pub truncation: Vec<Option<f64>>,
    pub solver: SolveOptions,
    pub verify: VerifyOptions,
}

impl RunConfig {
    pub fn assemble_options(&self) -> AssembleOptions {
        let mut o = AssembleOptions::with_nodes(self.nodes.clone());
        o.truncation = self.truncation.clone();
        o
    }
}

fn number(v: &Value, path: &str) -> Result<f64, CliError> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| field_err(path, "not a finite number")),
        Value::String(s) => match s.trim() {
            "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            other => other
                .parse::<f64>()
                .map_err(|_| field_err(path, format!("expected a number or \"inf\"/\"-inf\", got \"{other}\""))),
        },
        _ => Err(field_err(path, "expected a number")),
    }
}

fn finite(v: &Value, path: &str) -> Result<f64, CliError> {
    let x = number(v, path)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(field_err(path, "must be finite"))
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| field_err(path, "expected an array"))
}

fn vector(v: &Value, path: &str) -> Result<Vec<f64>, CliError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| finite(x, &format!("{path}[{i}]")))
        .collect()
}

fn matrix(v: &Value, path: &str) -> Result<Vec<Vec<f64>>, CliError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| vector(row, &format!("{path}[{i}]")))
        .collect()
}

fn count(v: &Value, path: &str) -> Result<usize, CliError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| field_err(path, "expected a nonnegative integer"))
}

fn parse_set(v: &Value, path: &str) -> Result<IntervalUnion, CliError> {
    let pieces = array(v, path)?;
    let mut raw = Vec::with_capacity(pieces.len());
    for (j, piece) in pieces.iter().enumerate() {
        let p = format!("{path}[{j}]");
        let ends = array(piece, &p)?;
        if ends.len() != 2 {
            return Err(field_err(p, "an interval is a pair [lo, hi]"));
        }
        let lo = number(&ends[0], &format!("{p}[0]"))?;
        let hi = number(&ends[1], &format!("{p}[1]"))?;
        if !(lo <= hi) || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(field_err(p, format!("malformed interval [{lo}, {hi}]")));
        }
        raw.push((lo, hi));
    }
    IntervalUnion::new(raw).map_err(|e| field_err(path, e.to_string()))
}

fn parse_field(v: &Value, path: &str) -> Result<ExternalField, CliError> {
    let obj = v.as_object().ok_or_else(|| field_err(path, "expected an object"))?;
    let coeffs = match obj.get("coeffs") {
        Some(c) => vector(c, &format!("{path}.coeffs"))?,
        None => Vec::new(),
    };
    let log = match obj.get("log") {
        Some(l) => finite(l, &format!("{path}.log"))?,
        None => 0.0,
    };
    ExternalField::new(coeffs, log).map_err(|e| field_err(path, e.to_string()))
}

fn parse_graph(v: &Value) -> Result<DirectedMultigraph, CliError> {
    let obj = v.as_object().ok_or_else(|| field_err("graph", "expected an object"))?;
    if let Some(d) = obj.get("chain") {
        return Ok(DirectedMultigraph::chain(count(d, "graph.chain")?));
    }
    if let Some(d) = obj.get("star") {
        return Ok(DirectedMultigraph::star(count(d, "graph.star")?));
    }
    let n = count(obj.get("vertices").unwrap_or(&Value::Null), "graph.vertices")?;
    let edges = array(obj.get("edges").unwrap_or(&Value::Null), "graph.edges")?;
    let mut list = Vec::with_capacity(edges.len());
    for (k, e) in edges.iter().enumerate() {
        let p = format!("graph.edges[{k}]");
        let pair = array(e, &p)?;
        if pair.len() != 2 {
            return Err(field_err(p, "an edge is a pair [tail, head]"));
        }
        let (u, v) = (count(&pair[0], &p)?, count(&pair[1], &p)?);
        if u == 0 || v == 0 || u > n || v > n {
            return Err(field_err(p, format!("vertices are numbered 1..={n}")));
        }
        list.push((u, v));
    }
    DirectedMultigraph::from_one_indexed(n, &list).map_err(|e| field_err("graph", e.to_string()))
}

fn parse_k(v: &Value, d: usize, graph: Option<&DirectedMultigraph>) -> Result<MassPolyhedron, CliError> {
    let k = |r: Result<MassPolyhedron, ModelError>| r.map_err(|e| field_err("K", e.to_string()));
    match v {
        Value::String(s) if s == "simplex" => k(MassPolyhedron::simplex(d, 1.0)),
        Value::Object(obj) => {
            if let Some(t) = obj.get("simplex") {
                return k(MassPolyhedron::simplex(d, finite(t, "K.simplex")?));
            }
            if let Some(m) = obj.get("fixed") {
                let m = vector(m, "K.fixed")?;
                if m.len() != d {
                    return Err(field_err("K.fixed", format!("expected {d} masses, got {}", m.len())));
                }
                return k(MassPolyhedron::fixed(&m));
            }
            if let Some(rhs) = obj.get("incidence") {
                let g = graph.ok_or_else(|| field_err("K.incidence", "needs a graph section"))?;
                return k(MassPolyhedron::new(g.incidence_rows(), vector(rhs, "K.incidence")?, d));
            }
            match (obj.get("A"), obj.get("a")) {
                (Some(a), Some(rhs)) => k(MassPolyhedron::new(matrix(a, "K.A")?, vector(rhs, "K.a")?, d)),
                _ => Err(field_err("K", "expected \"simplex\", {\"simplex\"}, {\"fixed\"}, {\"incidence\"} or {\"A\", \"a\"}")),
            }
        }
        _ => Err(field_err("K", "expected a string or an object")),
    }
}

fn parse_solver(v: Option<&Value>) -> Result<SolveOptions, CliError> {
    let mut o = SolveOptions::default();
    let Some(v) = v else { return Ok(o) };
    let obj = v.as_object().ok_or_else(|| field_err("solver", "expected an object"))?;
    for (key, val) in obj {
        let p = format!("solver.{key}");
        match key.as_str() {
            "max_iters" => o.max_iters = count(val, &p)?,
            "gap_tol" => o.gap_tol = finite(val, &p)?,
            "seed" => o.seed = Some(val.as_u64().ok_or_else(|| field_err(&p, "expected an integer"))?),
            "history_stride" => o.history_stride = count(val, &p)?,
            "variant" => {
                o.variant = match val.as_str() {
                    Some("vanilla") => Variant::Vanilla,
                    Some("away") => Variant::Away,
                    Some("pairwise") => Variant::Pairwise,
                    _ => return Err(field_err(p, "expected \"vanilla\", \"away\" or \"pairwise\"")),
                }
            }
            "start" => {
                o.start = match val.as_str() {
                    Some("phase1") => StartRule::Phase1,
                    Some("barycenter") => StartRule::VertexBarycenter,
                    _ => return Err(field_err(p, "expected \"phase1\" or \"barycenter\"")),
                }
            }
            _ => return Err(field_err(p, "unknown option")),
        }
    }
    if !(o.gap_tol > 0.0) {
        return Err(field_err("solver.gap_tol", "must be positive"));
    }
    if o.max_iters == 0 {
        return Err(field_err("solver.max_iters", "must be at least 1"));
    }
    Ok(o)
}

fn parse_verify(v: Option<&Value>) -> Result<VerifyOptions, CliError> {
    let mut o = VerifyOptions::default();
    let Some(v) = v else { return Ok(o) };
    let obj = v.as_object().ok_or_else(|| field_err("verify", "expected an object"))?;
    for (key, val) in obj {
        let p = format!("verify.{key}");
        match key.as_str() {
            "eq_tol" => o.eq_tol = finite(val, &p)?,
            "boundary_tol" => o.boundary_tol = finite(val, &p)?,
            "mass_floor" => o.mass_floor = finite(val, &p)?,
            "density" => o.density = count(val, &p)?,
            _ => return Err(field_err(p, "unknown option")),
        }
    }
    Ok(o)
}

fn check_nodes(nodes: &[usize], sets: &[IntervalUnion]) -> Result<(), CliError> {
    for (i, (&n, s)) in nodes.iter().zip(sets).enumerate() {
        let pieces = s.intervals().iter().filter(|iv| iv.is_fat()).count();
        let min = MIN_NODES_PER_INTERVAL * pieces;
        if n < min {
            return Err(field_err(format!("nodes[{i}]"), format!("need at least {min} nodes, got {n}")));
        }
    }
    Ok(())
}

/// Parses and validates a config document.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Json {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let obj = doc.as_object().ok_or_else(|| field_err("<root>", "expected an object"))?;
    const KNOWN: [&str; 10] = ["name", "sets", "C", "graph", "fields", "K", "nodes", "truncation", "solver", "verify"];
    if let Some(k) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(field_err(k.as_str(), "unknown field"));
    }
    let name = obj.get("name").and_then(Value::as_str).unwrap_or("problem").to_string();
    let sets_v = array(obj.get("sets").ok_or_else(|| field_err("sets", "missing"))?, "sets")?;
    let sets = sets_v
        .iter()
        .enumerate()
        .map(|(i, s)| parse_set(s, &format!("sets[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let d = sets.len();
    if d == 0 {
        return Err(field_err("sets", "need at least one component"));
    }

    let (interaction, graph) = match (obj.get("C"), obj.get("graph")) {
        (Some(_), Some(_)) => return Err(field_err("C", "give either \"C\" or \"graph\", not both")),
        (None, None) => return Err(field_err("C", "missing (or give a \"graph\" section)")),
        (Some(c), None) => {
            let rows = matrix(c, "C")?;
            (InteractionMatrix::from_rows(&rows).map_err(|e| field_err("C", e.to_string()))?, None)
        }
        (None, Some(g)) => {
            let g = parse_graph(g)?;
            (g.interaction().map_err(|e| field_err("graph", e.to_string()))?, Some(g))
        }
    };
    if interaction.dim() != d {
        return Err(field_err("C", format!("{} components in C, {d} sets", interaction.dim())));
    }

    let fields = match obj.get("fields") {
        None => vec![ExternalField::zero(); d],
        Some(f) => {
            let list = array(f, "fields")?;
            if list.len() != d {
                return Err(field_err("fields", format!("expected {d} entries, got {}", list.len())));
            }
            list.iter()
                .enumerate()
                .map(|(i, q)| parse_field(q, &format!("fields[{i}]")))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let masses = parse_k(obj.get("K").ok_or_else(|| field_err("K", "missing"))?, d, graph.as_ref())?;

    let nodes = match obj.get("nodes") {
        None => vec![400; d],
        Some(Value::Number(_)) => vec![count(&obj["nodes"], "nodes")?; d],
        Some(v) => {
            let list = array(v, "nodes")?;
            if list.len() != d {
                return Err(field_err("nodes", format!("expected {d} entries, got {}", list.len())));
            }
            list.iter()
                .enumerate()
                .map(|(i, n)| count(n, &format!("nodes[{i}]")))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    check_nodes(&nodes, &sets)?;
    let truncation = match obj.get("truncation") {
        None => vec![None; d],
        Some(v) => {
            let list = array(v, "truncation")?;
            if list.len() != d {
                return Err(field_err("truncation", format!("expected {d} entries, got {}", list.len())));
            }
            list.iter()
                .enumerate()
                .map(|(i, r)| match r {
                    Value::Null => Ok(None),
                    r => {
                        let x = finite(r, &format!("truncation[{i}]"))?;
                        if x > 0.0 {
                            Ok(Some(x))
                        } else {
                            Err(field_err(format!("truncation[{i}]"), "must be positive"))
                        }
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let problem = ProblemInstance::new(sets, interaction, fields, masses)?;
    Ok(RunConfig {
        name,
        problem,
        graph,
        nodes,
        truncation,
        solver: parse_solver(obj.get("solver"))?,
        verify: parse_verify(obj.get("verify"))?,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config_str(&text)
}

#[derive(Debug, Parser)]
#[command(name = "vequil", version, about = "Weighted vector equilibrium problems: check, solve, certify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the hypotheses of the existence and uniqueness theorems.
    Check(RunArgs),
    /// Check, discretize, solve and certify.
    Solve(RunArgs),
    /// Print a closed-form reference value.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cells per component, one value or a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub eq_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solve even when the assumptions give no guarantee.
    #[arg(long)]
    pub force: bool,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum OracleCommand {
    /// Minimal energy of the symmetric condenser with gap parameter n.
    Condenser {
        #[arg(long, default_value_t = 4.0)]
        n: f64,
    },
    /// Energy of the equilibrium measure of [a, b].
    Interval {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
    },
    /// Complete elliptic integrals K(k) and K'(k).
    Elliptic {
        #[arg(long)]
        k: f64,
    },
    /// Potential of the equilibrium measure of the circle of radius exp(-level).
    Circle {
        #[arg(long)]
        level: f64,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
}

/// Applies command-line overrides to a parsed config.
pub fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) -> Result<(), CliError> {
    if let Some(n) = &args.nodes {
        let d = cfg.problem.dim();
        cfg.nodes = match n.len() {
            1 => vec![n[0]; d],
            len if len == d => n.clone(),
            len => return Err(CliError::Usage(format!("--nodes has {len} values for {d} components"))),
        };
        check_nodes(&cfg.nodes, cfg.problem.sets())?;
    }
    if let Some(t) = args.gap_tol {
        if !(t > 0.0) {
            return Err(CliError::Usage("--gap-tol must be positive".into()));
        }
        cfg.solver.gap_tol = t;
    }
    if let Some(t) = args.eq_tol {
        if !(t > 0.0) {
            return Err(CliError::Usage("--eq-tol must be positive".into()));
        }
        cfg.verify.eq_tol = t;
    }
    if args.seed.is_some() {
        cfg.solver.seed = args.seed;
    }
    Ok(())
}

fn prepare_out(dir: &Path, overwrite: bool) -> Result<(), CliError> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir).map_err(|e| io_err(dir, e))?.next().is_some();
        if nonempty && !overwrite {
            return Err(CliError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

/// Lossless rendering of a double.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn solution_csv(m: &MeasureTuple) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["component", "node", "cell_width", "weight"]).expect("in-memory write");
    for (i, g) in m.grids().iter().enumerate() {
        for (k, &wk) in m.block(i).iter().enumerate() {
            w.write_record([(i + 1).to_string(), fmt17(g.nodes[k]), fmt17(g.widths[k]), fmt17(wk)])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii output")
}

/// Reads `solution.csv` back. Cells that touch their predecessor are taken to
/// belong to the same interval; truncation flags follow the unbounded ends of
/// the problem's sets.
pub fn read_solution(text: &str, p: &ProblemInstance) -> Result<MeasureTuple, CliError> {
    let d = p.dim();
    let mut cols: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = vec![Default::default(); d];
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| CliError::Csv { line, msg: e.to_string() })?;
        let bad = |msg: &str| CliError::Csv { line, msg: msg.into() };
        if rec.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let comp: usize = rec[0].parse().map_err(|_| bad("bad component"))?;
        if comp == 0 || comp > d {
            return Err(bad("component out of range"));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let c = &mut cols[comp - 1];
        c.0.push(parse(&rec[1])?);
        c.1.push(parse(&rec[2])?);
        c.2.push(parse(&rec[3])?);
    }
    let mut grids = Vec::with_capacity(d);
    let mut blocks = Vec::with_capacity(d);
    for (i, (nodes, widths, weights)) in cols.into_iter().enumerate() {
        if nodes.is_empty() {
            return Err(CliError::Csv {
                line: 0,
                msg: format!("component {} has no rows", i + 1),
            });
        }
        let mut parent = vec![0usize; nodes.len()];
        for k in 1..nodes.len() {
            let touch = (nodes[k - 1] + 0.5 * widths[k - 1]) - (nodes[k] - 0.5 * widths[k]);
            let same = touch.abs() <= 1e-9 * (widths[k] + widths[k - 1]);
            parent[k] = parent[k - 1] + usize::from(!same);
        }
        let s = p.set(i);
        grids.push(Grid {
            nodes,
            widths,
            parent,
            truncated_low: s.unbounded_below(),
            truncated_high: s.unbounded_above(),
        });
        blocks.push(weights);
    }
    Ok(MeasureTuple::from_blocks(grids, blocks)?)
}

fn potentials_csv(m: &MeasureTuple, p: &ProblemInstance, rep: &EquilibriumReport, density: usize) -> String {
    let c = p.interaction().entries();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["component", "x", "U_i", "Q_i", "U_i+Q_i", "AtF_i"]).expect("in-memory write");
    for (i, g) in m.grids().iter().enumerate() {
        for x in audit_points(g, density) {
            let u = partial_potential(m, c, i, x);
            let q = p.field(i).eval(x);
            w.write_record([
                (i + 1).to_string(),
                fmt17(x),
                fmt17(u),
                fmt17(q),
                fmt17(u + q),
                fmt17(rep.at_f[i]),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii output")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub objective: f64,
    pub energy_recomputed: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub masses: Vec<f64>,
    pub nodes: Vec<usize>,
    pub truncation: Vec<Option<f64>>,
    pub forced: bool,
    pub guarantees: bool,
    pub verdict: String,
    pub equilibrium: serde_json::Value,
}

/// Everything produced by a `solve` run.
#[derive(Debug)]
pub struct SolveOutcome {
    pub assumptions: AssumptionReport,
    pub result: Option<SolveResult>,
    pub report: Option<EquilibriumReport>,
    pub exit: i32,
}

struct Log {
    text: String,
    start: Instant,
}

impl Log {
    fn new() -> Self {
        Self {
            text: String::new(),
            start: Instant::now(),
        }
    }

    fn line(&mut self, msg: impl AsRef<str>) {
        let _ = writeln!(self.text, "[{:9.3}s] {}", self.start.elapsed().as_secs_f64(), msg.as_ref());
    }
}

/// `check`: writes `assumptions.json` (when an output directory is given)
/// and returns the assumption report.
pub fn run_check(cfg: &RunConfig, out: Option<&Path>, overwrite: bool) -> Result<(AssumptionReport, i32), CliError> {
    let mut log = Log::new();
    log.line(format!("checking {}", cfg.name));
    let rep = AssumptionReport::check(&cfg.problem, cfg.graph.as_ref());
    log.line(format!("existence {}, uniqueness {}", rep.existence, rep.uniqueness));
    if let Some(dir) = out {
        prepare_out(dir, overwrite)?;
        write_file(dir, "assumptions.json", &rep.to_json())?;
        write_file(dir, "run.log", &log.text)?;
    }
    let code = if rep.guarantees() { EXIT_CERTIFIED } else { EXIT_NO_GUARANTEE };
    Ok((rep, code))
}

/// `solve`: checks, discretizes, solves and certifies, writing all artifacts.
pub fn run_solve(cfg: &RunConfig, out: &Path, force: bool, overwrite: bool) -> Result<SolveOutcome, CliError> {
    prepare_out(out, overwrite)?;
    let mut log = Log::new();
    log.line(format!("problem {} with {} components", cfg.name, cfg.problem.dim()));
    let assumptions = AssumptionReport::check(&cfg.problem, cfg.graph.as_ref());
    write_file(out, "assumptions.json", &assumptions.to_json())?;
    log.line(format!(
        "assumptions: existence {}, uniqueness {}",
        assumptions.existence, assumptions.uniqueness
    ));
    let guarantees = assumptions.guarantees();
    if !guarantees && !force {
        log.line("assumptions give no guarantee; not solving (use --force)");
        write_file(out, "run.log", &log.text)?;
        return Ok(SolveOutcome {
            assumptions,
            result: None,
            report: None,
            exit: EXIT_NO_GUARANTEE,
        });
    }
    if !guarantees {
        log.line("assumptions give no guarantee; solving anyway (--force)");
    }
    let dp = match assemble(&cfg.problem, &cfg.assemble_options()) {
        Ok(dp) => dp,
        Err(e) => {
            log.line(format!("discretization failed: {e}"));
            write_file(out, "run.log", &log.text)?;
            return Err(e.into());
        }
    };
    log.line(format!(
        "grid sizes {:?}, truncation {:?}",
        dp.grids().iter().map(Grid::len).collect::<Vec<_>>(),
        dp.truncation()
    ));
    let result = solve(&dp, &cfg.solver)?;
    log.line(format!(
        "solver: objective {:.12}, gap {:.3e}, {} iterations, converged {}",
        result.objective, result.gap, result.iterations, result.converged
    ));
    let report = certify(&result.weights, &cfg.problem, &cfg.verify)?;
    log.line(format!(
        "certificate: lower {:.3e}, upper {:.3e}, {}",
        report.lower_violation,
        report.upper_violation,
        if report.pass { "pass" } else { "fail" }
    ));
    for a in &report.advice {
        log.line(a);
    }
    let energy_recomputed = equilibrium::energy(&result.weights, cfg.problem.interaction().entries(), cfg.problem.fields());
    let run = RunReport {
        name: cfg.name.clone(),
        objective: result.objective,
        energy_recomputed,
        gap: result.gap,
        iterations: result.iterations,
        converged: result.converged,
        masses: result.masses(),
        nodes: cfg.nodes.clone(),
        truncation: dp.truncation().to_vec(),
        forced: !guarantees,
        guarantees,
        verdict: if report.pass { "certified" } else { "not certified" }.into(),
        equilibrium: serde_json::to_value(&report).expect("report serializes"),
    };
    write_file(out, "solution.csv", &solution_csv(&result.weights))?;
    write_file(
        out,
        "potentials.csv",
        &potentials_csv(&result.weights, &cfg.problem, &report, cfg.verify.density),
    )?;
    write_file(out, "report.json", &serde_json::to_string_pretty(&run).expect("report serializes"))?;
    write_file(out, "run.log", &log.text)?;
    let exit = if !guarantees {
        EXIT_NO_GUARANTEE
    } else if report.pass {
        EXIT_CERTIFIED
    } else {
        EXIT_NOT_CERTIFIED
    };
    Ok(SolveOutcome {
        assumptions,
        result: Some(result),
        report: Some(report),
        exit,
    })
}

pub fn run_oracle(which: &OracleCommand) -> Result<String, CliError> {
    Ok(match *which {
        OracleCommand::Condenser { n } => format!("{}", oracles::condenser_energy(n)?),
        OracleCommand::Interval { a, b } => format!("{}", oracles::interval_energy(a, b)?),
        OracleCommand::Elliptic { k } => {
            format!("K = {}\nK' = {}", oracles::elliptic_k(k)?, oracles::elliptic_k_prime(k)?)
        }
        OracleCommand::Circle { level, x } => format!("{}", oracles::circle_potential(level, x)?),
    })
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = match &cli.command {
        Command::Oracle { which } => run_oracle(which).map(|s| {
            let _ = writeln!(stdout, "{s}");
            EXIT_CERTIFIED
        }),
        Command::Check(args) => load(args).and_then(|cfg| {
            let (rep, code) = run_check(&cfg, args.out.as_deref(), args.overwrite)?;
            let _ = write!(stdout, "{rep}");
            Ok(code)
        }),
        Command::Solve(args) => load(args).and_then(|cfg| {
            let out = args
                .out
                .as_deref()
                .ok_or_else(|| CliError::Usage("solve needs --out DIR".into()))?;
            let o = run_solve(&cfg, out, args.force, args.overwrite)?;
            let _ = write!(stdout, "{}", o.assumptions);
            if let (Some(r), Some(rep)) = (&o.result, &o.report) {
                let _ = writeln!(
                    stdout,
                    "objective {:.12}  gap {:.3e}  iterations {}  converged {}",
                    r.objective, r.gap, r.iterations, r.converged
                );
                let _ = write!(stdout, "{rep}");
            } else {
                let _ = writeln!(stdout, "not solved: assumptions give no guarantee (use --force)");
            }
            Ok(o.exit)
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(&args.config)?;
    apply_overrides(&mut cfg, args)?;
    Ok(cfg)
}
