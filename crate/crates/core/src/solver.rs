//! Frank–Wolfe minimization of the discrete weighted energy over
//! `{w >= 0 : A S w = a}`.
//!
//! The linear minimization oracle splits in two stages: the best node of each
//! component (argmin of the gradient block), then a `d`-dimensional LP over
//! `K` for the masses placed on those nodes. Steps use the exact line search
//! of the quadratic objective.
//!
//! Away and pairwise steps need no explicit active set. With the current
//! masses `t` fixed, each block is a scaled simplex, so the away vertex puts
//! `t_i` on the support node of block `i` with the largest gradient.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::{sorted_sum, DiscreteProblem, MeasureTuple};
use crate::error::DiscretizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Classic Frank–Wolfe steps only.
    Vanilla,
    /// Frank–Wolfe or away steps, whichever has the larger gap.
    Away,
    /// Move weight directly from the worst active vertex to the oracle vertex.
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartRule {
    /// Masses from the phase-1 simplex point of `K`.
    Phase1,
    /// Masses at the barycenter of the vertices of `K` (permutation equivariant).
    VertexBarycenter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Relative gap tolerance: stop when `gap <= gap_tol (1 + |Ĵ_Q|)`.
    pub gap_tol: f64,
    pub variant: Variant,
    pub start: StartRule,
    /// Seeded random tie-breaking; `None` breaks ties by lowest index.
    pub seed: Option<u64>,
    /// Keep every `history_stride`-th objective value.
    pub history_stride: usize,
    /// Recompute `P w` from scratch this often.
    pub refresh_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            gap_tol: 1e-6,
            variant: Variant::Away,
            start: StartRule::VertexBarycenter,
            seed: None,
            history_stride: 1,
            refresh_every: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub weights: MeasureTuple,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective values, decimated by `history_stride`; starts at the initial point.
    pub history: Vec<f64>,
    /// Largest `|A S w - a|` seen over all iterates.
    pub max_feasibility_residual: f64,
    /// Smallest Frank–Wolfe gap seen over all iterates.
    pub min_gap: f64,
}

impl SolveResult {
    pub fn masses(&self) -> Vec<f64> {
        self.weights.masses()
    }
}

/// Initial measure: uniform weights inside each block with masses from `K`.
pub fn feasible_start(dp: &DiscreteProblem, rule: StartRule) -> Result<MeasureTuple, DiscretizeError> {
    let phase1 = || dp.masses().feasible_point().map(<[f64]>::to_vec);
    let masses = match rule {
        StartRule::Phase1 => phase1(),
        StartRule::VertexBarycenter => match dp.k_vertices() {
            Some(vs) if !vs.is_empty() => {
                let t = (0..dp.dim())
                    .map(|i| sorted_sum(vs.iter().map(|v| v[i]).collect()) / vs.len() as f64)
                    .collect();
                Some(t)
            }
            _ => phase1(),
        },
    }
    .ok_or(DiscretizeError::InfeasibleK)?;
    let mut w = vec![0.0; dp.total_nodes()];
    for (i, &t) in masses.iter().enumerate() {
        let r = dp.block(i);
        let each = t / r.len() as f64;
        w[r].iter_mut().for_each(|x| *x = each);
    }
    MeasureTuple::new(dp.grids().to_vec(), w)
}

/// `Σ_k term(k)` summed block by block, the block sums added in sorted order,
/// so that relabeling components does not change the rounding.
fn block_sum(dp: &DiscreteProblem, term: impl Fn(usize) -> f64) -> f64 {
    sorted_sum((0..dp.dim()).map(|i| dp.block(i).map(&term).sum()).collect())
}

fn objective(dp: &DiscreteProblem, pw: &[f64], w: &[f64]) -> f64 {
    let q = dp.field();
    block_sum(dp, |k| w[k] * (pw[k] + 2.0 * q[k]))
}

/// A vertex of the feasible set: mass `masses[i]` on global node `nodes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleVertex {
    pub nodes: Vec<usize>,
    pub masses: Vec<f64>,
}

impl OracleVertex {
    fn entries(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .zip(&self.masses)
            .filter(|(_, &m)| m != 0.0)
            .map(|(&k, &m)| (k, m))
            .collect()
    }

    pub fn dot(&self, g: &[f64]) -> f64 {
        sorted_sum(self.nodes.iter().zip(&self.masses).map(|(&k, &m)| g[k] * m).collect())
    }
}

fn block_argmin(g: &[f64], range: std::ops::Range<usize>, rng: Option<&mut ChaCha8Rng>) -> usize {
    let mut best = range.start;
    for k in range.clone() {
        if g[k] < g[best] {
            best = k;
        }
    }
    match rng {
        Some(rng) => {
            let ties: Vec<usize> = range.filter(|&k| g[k] == g[best]).collect();
            *ties.choose(rng).expect("nonempty block")
        }
        None => best,
    }
}

/// Minimizes `gᵗ v` over the feasible set.
pub fn linear_subproblem(dp: &DiscreteProblem, g: &[f64]) -> Result<OracleVertex, DiscretizeError> {
    oracle(dp, g, None)
}

fn oracle(dp: &DiscreteProblem, g: &[f64], mut rng: Option<&mut ChaCha8Rng>) -> Result<OracleVertex, DiscretizeError> {
    let nodes: Vec<usize> = (0..dp.dim())
        .map(|i| block_argmin(g, dp.block(i), rng.as_deref_mut()))
        .collect();
    let cost: Vec<f64> = nodes.iter().map(|&k| g[k]).collect();
    let masses = dp.minimize_over_k(&cost)?;
    Ok(OracleVertex { nodes, masses })
}

fn mass_residual(dp: &DiscreteProblem, w: &[f64]) -> f64 {
    dp.masses().residual(&dp.block_masses(w))
}

/// Away vertex: the worst support node of each block, carrying the masses of
/// the worst vertex of `K` on the face of the current masses (the current
/// masses themselves when the vertices of `K` are not enumerated).
fn away_vertex(dp: &DiscreteProblem, g: &[f64], w: &[f64]) -> Vec<(usize, f64)> {
    let d = dp.dim();
    let t = dp.block_masses(w);
    let mut worst = vec![None; d];
    for (i, slot) in worst.iter_mut().enumerate() {
        for k in dp.block(i) {
            if w[k] > 0.0 && slot.is_none_or(|b: usize| g[k] > g[b]) {
                *slot = Some(k);
            }
        }
    }
    let cost = |s: &[f64]| -> f64 {
        let terms = s
            .iter()
            .zip(&worst)
            .map(|(si, k)| k.map_or(0.0, |k| si * g[k]))
            .collect::<Vec<_>>();
        sorted_sum(terms)
    };
    let mut masses = t.clone();
    if let Some(vs) = dp.k_vertices() {
        let mut best = cost(&t);
        for v in vs {
            let on_face = v.iter().zip(&worst).all(|(vi, k)| *vi == 0.0 || k.is_some());
            if on_face {
                let c = cost(v);
                if c > best {
                    best = c;
                    masses = v.clone();
                }
            }
        }
    }
    worst
        .iter()
        .zip(&masses)
        .filter_map(|(k, &m)| k.filter(|_| m > 0.0).map(|k| (k, m)))
        .collect()
}

/// Runs Frank–Wolfe from [`feasible_start`].
pub fn solve(dp: &DiscreteProblem, opts: &SolveOptions) -> Result<SolveResult, DiscretizeError> {
    let start = feasible_start(dp, opts.start)?;
    solve_from(dp, start, opts)
}

/// Runs Frank–Wolfe from a given feasible measure tuple.
pub fn solve_from(dp: &DiscreteProblem, start: MeasureTuple, opts: &SolveOptions) -> Result<SolveResult, DiscretizeError> {
    let n = dp.total_nodes();
    let q = dp.field();
    let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);
    let mut w = start.weights().to_vec();
    let mut pw = dp.apply(&w);
    let stride = opts.history_stride.max(1);
    let mut f = objective(dp, &pw, &w);
    let mut history = vec![f];
    let mut g = vec![0.0; n];
    let mut pd = vec![0.0; n];
    let mut max_resid = mass_residual(dp, &w);
    let mut min_gap = f64::INFINITY;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        for ((gk, pk), qk) in g.iter_mut().zip(&pw).zip(q) {
            *gk = 2.0 * (pk + qk);
        }
        let v = oracle(dp, &g, rng.as_mut())?;
        let gw = block_sum(dp, |k| g[k] * w[k]);
        gap = gw - v.dot(&g);
        min_gap = min_gap.min(gap);
        if gap <= opts.gap_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        iterations = it + 1;

        let away = match opts.variant {
            Variant::Vanilla => Vec::new(),
            _ => away_vertex(dp, &g, &w),
        };
        let away_gap: f64 = away.iter().map(|&(k, t)| g[k] * t).sum::<f64>() - gw;
        let step = match opts.variant {
            Variant::Away if away_gap > gap => Step::Away,
            Variant::Pairwise if !away.is_empty() => Step::Pair,
            _ => Step::Toward,
        };

        // sparse part of the direction: +v for toward/pairwise, -a for away/pairwise;
        // toward and away also carry a dense ∓w part
        let mut sparse: Vec<(usize, f64)> = Vec::with_capacity(2 * dp.dim());
        if step != Step::Away {
            sparse.extend(v.entries());
        }
        if step != Step::Toward {
            sparse.extend(away.iter().map(|&(k, t)| (k, -t)));
        }
        let dense = match step {
            Step::Toward => -1.0,
            Step::Away => 1.0,
            Step::Pair => 0.0,
        };
        for (o, p) in pd.iter_mut().zip(&pw) {
            *o = dense * p;
        }
        for &(k, m) in &sparse {
            dp.add_column(k, m, &mut pd);
        }
        let dir_at = |k: usize| -> f64 {
            dense * w[k] + sparse.iter().filter(|e| e.0 == k).map(|e| e.1).sum::<f64>()
        };
        let gd = dense * gw + sorted_sum(sparse.iter().map(|&(k, m)| g[k] * m).collect());
        if gd >= 0.0 {
            // no descent available at working precision
            break;
        }
        let curv = dense * block_sum(dp, |k| pd[k] * w[k]) + sorted_sum(sparse.iter().map(|&(k, m)| pd[k] * m).collect());

        // largest step keeping w >= 0 and the nodes that then reach zero
        let mut gamma_max = if step == Step::Toward { 1.0 } else { f64::INFINITY };
        let mut blocking = Vec::new();
        if step != Step::Toward {
            for &(k, _) in &away {
                let dk = dir_at(k);
                if dk < 0.0 {
                    let ratio = w[k] / -dk;
                    if ratio < gamma_max {
                        gamma_max = ratio;
                        blocking.clear();
                    }
                    if ratio == gamma_max {
                        blocking.push(k);
                    }
                }
            }
        }
        let gamma = if curv > 0.0 {
            (-gd / (2.0 * curv)).min(gamma_max)
        } else {
            gamma_max
        };
        if !gamma.is_finite() {
            break;
        }

        let scale = 1.0 + gamma * dense;
        if dense != 0.0 {
            for (wk, pk) in w.iter_mut().zip(pw.iter_mut()) {
                *wk *= scale;
                *pk *= scale;
            }
        }
        for &(k, m) in &sparse {
            w[k] += gamma * m;
            dp.add_column(k, gamma * m, &mut pw);
        }
        if gamma == gamma_max {
            for &k in &blocking {
                w[k] = 0.0;
            }
        }
        for x in w.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        if opts.refresh_every > 0 && (it + 1) % opts.refresh_every == 0 {
            pw = dp.apply(&w);
        }
        f = objective(dp, &pw, &w);
        if (it + 1) % stride == 0 {
            history.push(f);
        }
        max_resid = max_resid.max(mass_residual(dp, &w));
    }

    // exact objective of the returned weights
    let objective = objective(dp, &dp.apply(&w), &w);
    if history.last() != Some(&f) {
        history.push(f);
    }
    Ok(SolveResult {
        weights: MeasureTuple::new(dp.grids().to_vec(), w)?,
        objective,
        gap,
        iterations,
        converged,
        history,
        max_feasibility_residual: max_resid,
        min_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Toward,
    Away,
    Pair,
}
