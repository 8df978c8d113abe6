//! Browser bindings: each entry point takes plain numbers or JSON and returns
//! a JSON string for the page to plot.

use serde::Serialize;
use serde_json::Value;
use wasm_bindgen::prelude::*;

use vector_equilibrium::discretize::{assemble, AssembleOptions};
use vector_equilibrium::equilibrium::{certify, VerifyOptions};
use vector_equilibrium::oracles::{condenser2_measures, ClosedFormMeasure};
use vector_equilibrium::solver::{solve, SolveOptions};
use vector_equilibrium::{
    AssumptionReport, DirectedMultigraph, DiscreteProblem, ExternalField, Grid, InteractionMatrix, IntervalUnion, MassPolyhedron,
    ProblemInstance,
};

#[derive(Debug, Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl Curve {
    fn from_weights(grid: &Grid, weights: &[f64]) -> Self {
        Self {
            x: grid.nodes.clone(),
            density: weights.iter().zip(&grid.widths).map(|(w, h)| w / h).collect(),
        }
    }

    fn from_measure(grid: &Grid, mu: &ClosedFormMeasure) -> Self {
        Self::from_weights(grid, &mu.cell_masses(grid))
    }
}

#[derive(Debug, Serialize)]
pub struct Solution {
    pub computed: Vec<Curve>,
    /// Closed-form densities on the same cells, when known.
    pub exact: Vec<Curve>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub certified: bool,
    pub lower_violation: f64,
    pub upper_violation: f64,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn solve_and_certify(p: &ProblemInstance, nodes: Vec<usize>) -> Result<(DiscreteProblem, Solution), String> {
    let dp = assemble(p, &AssembleOptions::with_nodes(nodes)).map_err(err)?;
    let r = solve(&dp, &SolveOptions::default()).map_err(err)?;
    let rep = certify(&r.weights, p, &VerifyOptions::default()).map_err(err)?;
    let computed = (0..p.dim())
        .map(|i| Curve::from_weights(dp.grid(i), r.weights.block(i)))
        .collect();
    Ok((
        dp,
        Solution {
            computed,
            exact: Vec::new(),
            objective: r.objective,
            gap: r.gap,
            iterations: r.iterations,
            certified: rep.pass,
            lower_violation: rep.lower_violation,
            upper_violation: rep.upper_violation,
        },
    ))
}

/// Unit-mass equilibrium of `[a, b]` in the field `q1 x + q2 x^2`.
pub fn interval_equilibrium(a: f64, b: f64, q1: f64, q2: f64, nodes: usize) -> Result<Solution, String> {
    let p = ProblemInstance::new(
        vec![IntervalUnion::interval(a, b).map_err(err)?],
        InteractionMatrix::from_rows(&[vec![1.0]]).map_err(err)?,
        vec![ExternalField::polynomial(vec![0.0, q1, q2]).map_err(err)?],
        MassPolyhedron::fixed(&[1.0]).map_err(err)?,
    )
    .map_err(err)?;
    let (dp, mut sol) = solve_and_certify(&p, vec![nodes])?;
    if q1 == 0.0 && q2 == 0.0 {
        let law = ClosedFormMeasure::arcsine(a, b, 1.0).map_err(err)?;
        sol.exact.push(Curve::from_measure(dp.grid(0), &law));
    }
    Ok(sol)
}

/// Two-component Nikishin problem on `[-1, 1]` and `[-r, r]` with masses
/// `(a1, a2)`, compared with its closed-form minimizer.
pub fn nikishin_pair(a1: f64, a2: f64, r: f64, nodes: usize) -> Result<Solution, String> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(format!("inner radius {r} must lie in (0, 1]"));
    }
    let p = ProblemInstance::without_fields(
        vec![
            IntervalUnion::interval(-1.0, 1.0).map_err(err)?,
            IntervalUnion::interval(-r, r).map_err(err)?,
        ],
        InteractionMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).map_err(err)?,
        MassPolyhedron::fixed(&[a1, a2]).map_err(err)?,
    )
    .map_err(err)?;
    let inner = ((nodes as f64 * r).round() as usize).max(8);
    let (dp, mut sol) = solve_and_certify(&p, vec![nodes, inner])?;
    if let Ok(mus) = condenser2_measures(a1, a2, (-1.0, 1.0), (-r, r)) {
        sol.exact = mus.iter().enumerate().map(|(i, mu)| Curve::from_measure(dp.grid(i), mu)).collect();
    }
    Ok(sol)
}

/// Hypothesis report for a graph-generated problem. `graph` is `"chain"`,
/// `"star"` or a JSON list of 1-indexed `[tail, head]` pairs; `sets` is a
/// JSON list of `[lo, hi]`, one per edge. Every component carries unit mass.
pub fn graph_assumptions(graph: &str, sets: &str) -> Result<Value, String> {
    let sets: Vec<[f64; 2]> = serde_json::from_str(sets).map_err(err)?;
    let d = sets.len();
    if d == 0 {
        return Err("at least one set is needed".into());
    }
    let g = match graph.trim() {
        "chain" => DirectedMultigraph::chain(d),
        "star" => DirectedMultigraph::star(d),
        text => {
            let edges: Vec<(usize, usize)> = serde_json::from_str(text).map_err(err)?;
            let n = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0);
            DirectedMultigraph::from_one_indexed(n, &edges).map_err(err)?
        }
    };
    if g.edge_count() != d {
        return Err(format!("{} edges but {d} sets", g.edge_count()));
    }
    let sets = sets
        .iter()
        .map(|&[lo, hi]| IntervalUnion::interval(lo, hi))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let p = ProblemInstance::without_fields(
        sets,
        g.interaction().map_err(err)?,
        MassPolyhedron::fixed(&vec![1.0; d]).map_err(err)?,
    )
    .map_err(err)?;
    let rep = AssumptionReport::check(&p, Some(&g));
    serde_json::from_str(&rep.to_json()).map_err(err)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(err))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = intervalEquilibrium)]
pub fn interval_equilibrium_js(a: f64, b: f64, q1: f64, q2: f64, nodes: usize) -> Result<String, JsError> {
    to_js(interval_equilibrium(a, b, q1, q2, nodes))
}

#[wasm_bindgen(js_name = nikishinPair)]
pub fn nikishin_pair_js(a1: f64, a2: f64, r: f64, nodes: usize) -> Result<String, JsError> {
    to_js(nikishin_pair(a1, a2, r, nodes))
}

#[wasm_bindgen(js_name = graphAssumptions)]
pub fn graph_assumptions_js(graph: &str, sets: &str) -> Result<String, JsError> {
    to_js(graph_assumptions(graph, sets))
}
