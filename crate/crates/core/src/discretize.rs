//! Finite-dimensional version of the weighted energy: cell grids on each
//! support, a log-kernel matrix with exact self-cell correction, and the
//! external field sampled at the nodes.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::assumptions::unbounded_negative_pairs;
use crate::error::DiscretizeError;
use crate::lp::{LinearProgram, LpOutcome};
use crate::model::{IntervalUnion, MassPolyhedron, ProblemInstance, VERTEX_ENUMERATION_MAX_DIM};

/// Safety margin (natural-log units) of the truncation radius.
pub const DEFAULT_TRUNCATION_MARGIN: f64 = 10.0;

/// Nodes closer than this are treated as coincident.
const COINCIDENT: f64 = 1e-14;

/// Uniform cells on each interval of a (truncated) interval union.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub widths: Vec<f64>,
    /// Index of the interval each cell belongs to.
    pub parent: Vec<usize>,
    /// The grid was clipped at `-R` (resp. `+R`).
    pub truncated_low: bool,
    pub truncated_high: bool,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cell(&self, k: usize) -> (f64, f64) {
        let h = self.widths[k];
        (self.nodes[k] - 0.5 * h, self.nodes[k] + 0.5 * h)
    }

    pub fn lower(&self) -> f64 {
        self.cell(0).0
    }

    pub fn upper(&self) -> f64 {
        self.cell(self.len() - 1).1
    }

    pub fn translated(&self, t: f64) -> Self {
        let mut g = self.clone();
        for x in &mut g.nodes {
            *x += t;
        }
        g
    }
}

/// Splits `n` cells over the fat intervals of `s` (clipped to `[-R, R]`),
/// proportionally to length and uniform within each interval.
pub fn build_grid(s: &IntervalUnion, n: usize, radius: Option<f64>) -> Result<Grid, DiscretizeError> {
    let mut pieces = Vec::new();
    let (mut trunc_lo, mut trunc_hi) = (false, false);
    for (idx, iv) in s.intervals().iter().enumerate() {
        let (mut lo, mut hi) = (iv.lo, iv.hi);
        if !lo.is_finite() || !hi.is_finite() {
            let r = radius.ok_or(DiscretizeError::MissingTruncation(0))?;
            if !lo.is_finite() {
                lo = -r;
                trunc_lo = true;
            }
            if !hi.is_finite() {
                hi = r;
                trunc_hi = true;
            }
        }
        if hi > lo {
            pieces.push((idx, lo, hi));
        }
    }
    if pieces.is_empty() {
        return Err(DiscretizeError::DegenerateGrid(0));
    }
    if n < pieces.len() {
        return Err(DiscretizeError::TooFewNodes {
            min: pieces.len(),
            got: n,
        });
    }
    let total: f64 = pieces.iter().map(|(_, lo, hi)| hi - lo).sum();
    // largest-remainder apportionment with at least one cell per piece
    let spare = n - pieces.len();
    let quotas: Vec<f64> = pieces
        .iter()
        .map(|(_, lo, hi)| spare as f64 * (hi - lo) / total)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| 1 + q.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    let mut grid = Grid {
        nodes: Vec::with_capacity(n),
        widths: Vec::with_capacity(n),
        parent: Vec::with_capacity(n),
        truncated_low: trunc_lo,
        truncated_high: trunc_hi,
    };
    for ((idx, lo, hi), &cnt) in pieces.iter().zip(&counts) {
        let h = (hi - lo) / cnt as f64;
        for k in 0..cnt {
            grid.nodes.push(lo + (k as f64 + 0.5) * h);
            grid.widths.push(h);
            grid.parent.push(*idx);
        }
    }
    Ok(grid)
}

/// `∫_a^b ∫_c^d log|x - y| dy dx` via the second antiderivative of `log|t|`.
fn double_log_integral(a: f64, b: f64, c: f64, d: f64) -> f64 {
    fn g(t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            0.5 * t * t * t.abs().ln() - 0.75 * t * t
        }
    }
    g(b - c) - g(a - c) - g(b - d) + g(a - d)
}

/// Average of `-log|x - y|` over the product of two cells.
pub fn cell_average_kernel(c1: (f64, f64), c2: (f64, f64)) -> f64 {
    let area = (c1.1 - c1.0) * (c2.1 - c2.0);
    -double_log_integral(c1.0, c1.1, c2.0, c2.1) / area
}

/// Self-cell entry `3/2 - log h`: the exact double average of the kernel.
pub fn self_cell_entry(h: f64) -> f64 {
    1.5 - h.ln()
}

fn kernel_entry(g1: &Grid, k: usize, g2: &Grid, l: usize, same: bool) -> f64 {
    if same && k == l {
        return self_cell_entry(g1.widths[k]);
    }
    let dist = (g1.nodes[k] - g2.nodes[l]).abs();
    if dist < COINCIDENT {
        cell_average_kernel(g1.cell(k), g2.cell(l))
    } else {
        -dist.ln()
    }
}

/// Mutual-energy block between two grids (midpoint kernel, corrected diagonal
/// when both arguments are the same grid).
pub fn energy_block(g1: &Grid, g2: &Grid) -> DMatrix<f64> {
    let same = std::ptr::eq(g1, g2) || g1 == g2;
    DMatrix::from_fn(g1.len(), g2.len(), |k, l| kernel_entry(g1, k, g2, l, same))
}

/// Truncation radius for an unbounded component.
///
/// Smallest `R >= 1 + max|finite endpoint|` such that for `|x| >= R` on the
/// unbounded ends `Q_i(x) >= 2 Σ_j |c_ij| M_j log(1 + |x|) + margin`, where
/// `M_j` is the largest mass of component `j` over `K`. Returns `None` for a
/// bounded set.
pub fn choose_truncation(p: &ProblemInstance, i: usize, margin: f64) -> Result<Option<f64>, DiscretizeError> {
    let set = p.set(i);
    if set.is_bounded() {
        return Ok(None);
    }
    let q = p.field(i);
    let ends: Vec<f64> = [(set.unbounded_above(), 1.0), (set.unbounded_below(), -1.0)]
        .iter()
        .filter(|(u, _)| *u)
        .map(|&(_, s)| s)
        .collect();
    if ends.iter().any(|&s| !q.grows_toward(s > 0.0)) {
        return Err(DiscretizeError::Inadmissible(i));
    }
    let max_mass = p
        .masses()
        .max_masses()
        .map_err(|_| DiscretizeError::InfeasibleK)?;
    if max_mass.iter().any(|m| !m.is_finite()) {
        return Err(DiscretizeError::UnboundedK);
    }
    let c = p.interaction();
    let coef: f64 = 2.0 * (0..p.dim()).map(|j| c.get(i, j).abs() * max_mass[j]).sum::<f64>();
    let r_min = 1.0 + set.max_finite_endpoint();
    let mut radius = r_min;
    for sign in ends {
        let h = |t: f64| q.eval(sign * t) - coef * t.ln_1p() - margin;
        radius = radius.max(last_crossing(h, r_min).ok_or(DiscretizeError::Inadmissible(i))?);
    }
    Ok(Some(radius))
}

/// Smallest `t >= t0` past which `h` stays nonnegative (sampled, then bisected).
fn last_crossing(h: impl Fn(f64) -> f64, t0: f64) -> Option<f64> {
    let mut top = t0;
    while !(h(top) >= 0.0 && h(2.0 * top) >= 0.0 && h(4.0 * top) >= 0.0) {
        top *= 2.0;
        if top > 1e12 {
            return None;
        }
    }
    let top = 4.0 * top;
    const SAMPLES: usize = 8192;
    let step = (top - t0) / SAMPLES as f64;
    let last_neg = (0..=SAMPLES).rev().find(|&k| h(t0 + k as f64 * step) < 0.0);
    let Some(k) = last_neg else {
        return Some(t0);
    };
    let (mut lo, mut hi) = (t0 + k as f64 * step, t0 + (k + 1) as f64 * step);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Grid sizes and optional per-component truncation radii.
#[derive(Debug, Clone)]
pub struct AssembleOptions {
    pub nodes: Vec<usize>,
    pub truncation: Vec<Option<f64>>,
    pub margin: f64,
}

impl AssembleOptions {
    pub fn uniform(d: usize, n: usize) -> Self {
        Self {
            nodes: vec![n; d],
            truncation: vec![None; d],
            margin: DEFAULT_TRUNCATION_MARGIN,
        }
    }

    pub fn with_nodes(nodes: Vec<usize>) -> Self {
        let d = nodes.len();
        Self {
            nodes,
            truncation: vec![None; d],
            margin: DEFAULT_TRUNCATION_MARGIN,
        }
    }
}

/// Discrete quadratic program
/// `min wᵗ P w + 2 qᵗ w  over  {w >= 0 : A S w = a}`, where `P` has blocks
/// `c_ij E^(i,j)` and `S` sums the weights of each component.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    grids: Vec<Grid>,
    offsets: Vec<usize>,
    component: Vec<usize>,
    kernel: DMatrix<f64>,
    interaction: DMatrix<f64>,
    field: Vec<f64>,
    masses: MassPolyhedron,
    truncation: Vec<Option<f64>>,
    vertices: Option<Vec<Vec<f64>>>,
    support_compact: bool,
}

/// Builds the discrete problem. `K` must be nonempty and bounded.
pub fn assemble(p: &ProblemInstance, opts: &AssembleOptions) -> Result<DiscreteProblem, DiscretizeError> {
    let d = p.dim();
    if opts.nodes.len() != d || opts.truncation.len() != d {
        return Err(DiscretizeError::Dimension(format!(
            "{} node counts / {} truncation entries for {d} components",
            opts.nodes.len(),
            opts.truncation.len()
        )));
    }
    if !p.masses().is_feasible() {
        return Err(DiscretizeError::InfeasibleK);
    }
    if !p.masses().is_compact() {
        return Err(DiscretizeError::UnboundedK);
    }
    let mut grids = Vec::with_capacity(d);
    let mut truncation = Vec::with_capacity(d);
    for i in 0..d {
        let r = match opts.truncation[i] {
            Some(r) => Some(r),
            None => choose_truncation(p, i, opts.margin)?,
        };
        let g = build_grid(p.set(i), opts.nodes[i], r).map_err(|e| match e {
            DiscretizeError::DegenerateGrid(_) => DiscretizeError::DegenerateGrid(i),
            DiscretizeError::MissingTruncation(_) => DiscretizeError::MissingTruncation(i),
            other => other,
        })?;
        truncation.push(r.filter(|_| !p.set(i).is_bounded()));
        grids.push(g);
    }
    let mut offsets = vec![0];
    for g in &grids {
        offsets.push(offsets.last().unwrap() + g.len());
    }
    let n = offsets[d];
    let mut component = Vec::with_capacity(n);
    for (i, g) in grids.iter().enumerate() {
        component.extend(std::iter::repeat_n(i, g.len()));
    }
    let mut kernel = DMatrix::zeros(n, n);
    for i in 0..d {
        for j in i..d {
            let block = energy_block(&grids[i], &grids[j]);
            kernel
                .view_mut((offsets[i], offsets[j]), (grids[i].len(), grids[j].len()))
                .copy_from(&block);
            if i != j {
                kernel
                    .view_mut((offsets[j], offsets[i]), (grids[j].len(), grids[i].len()))
                    .copy_from(&block.transpose());
            }
        }
    }
    let mut field = Vec::with_capacity(n);
    for (i, g) in grids.iter().enumerate() {
        field.extend(g.nodes.iter().map(|&x| p.field(i).eval(x)));
    }
    if let Some(k) = field.iter().position(|v| !v.is_finite()) {
        return Err(DiscretizeError::Inadmissible(component[k]));
    }
    let vertices = (d <= VERTEX_ENUMERATION_MAX_DIM).then(|| p.masses().vertices());
    Ok(DiscreteProblem {
        grids,
        offsets,
        component,
        kernel,
        interaction: p.interaction().entries().clone(),
        field,
        masses: p.masses().clone(),
        truncation,
        vertices,
        support_compact: unbounded_negative_pairs(p).is_empty(),
    })
}

impl DiscreteProblem {
    pub fn dim(&self) -> usize {
        self.grids.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.offsets[self.dim()]
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn grid(&self, i: usize) -> &Grid {
        &self.grids[i]
    }

    pub fn block(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn component_of(&self, k: usize) -> usize {
        self.component[k]
    }

    pub fn masses(&self) -> &MassPolyhedron {
        &self.masses
    }

    pub fn interaction(&self) -> &DMatrix<f64> {
        &self.interaction
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn truncation(&self) -> &[Option<f64>] {
        &self.truncation
    }

    /// All pairs of unbounded sets have `c_ij >= 0`, so supports are compact.
    pub fn support_compact(&self) -> bool {
        self.support_compact
    }

    /// The unweighted kernel matrix on all nodes (all blocks `E^(i,j)`).
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn energy_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (ri, rj) = (self.block(i), self.block(j));
        self.kernel
            .view((ri.start, rj.start), (ri.len(), rj.len()))
            .into_owned()
    }

    /// Block masses `S w`.
    pub fn block_masses(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| w[self.block(i)].iter().sum()).collect()
    }

    /// `P w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.total_nodes()];
        for i in 0..d {
            let ri = self.block(i);
            for j in 0..d {
                let c = self.interaction[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let rj = self.block(j);
                let view = self.kernel.view((ri.start, rj.start), (ri.len(), rj.len()));
                for (col, &wk) in rj.clone().zip(&w[rj.clone()]) {
                    if wk == 0.0 {
                        continue;
                    }
                    let s = c * wk;
                    let colv = view.column(col - rj.start);
                    for (o, &e) in out[ri.clone()].iter_mut().zip(colv.iter()) {
                        *o += s * e;
                    }
                }
            }
        }
        out
    }

    /// Adds `scale * P e_k` to `out`.
    pub fn add_column(&self, k: usize, scale: f64, out: &mut [f64]) {
        let j = self.component[k];
        let col = self.kernel.column(k);
        for i in 0..self.dim() {
            let c = self.interaction[(i, j)];
            if c == 0.0 {
                continue;
            }
            let s = c * scale;
            for r in self.block(i) {
                out[r] += s * col[r];
            }
        }
    }

    /// `Ĵ_Q(w) = wᵗ P w + 2 qᵗ w`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let pw = self.apply(w);
        objective_from(&pw, w, &self.field)
    }

    /// `2 (P w + q)`: doubled discrete partial potential plus field.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.apply(w)
            .iter()
            .zip(&self.field)
            .map(|(a, q)| 2.0 * (a + q))
            .collect()
    }

    /// Minimizes `costᵗ t` over `K`.
    pub fn minimize_over_k(&self, cost: &[f64]) -> Result<Vec<f64>, DiscretizeError> {
        if let Some(vs) = &self.vertices {
            let mut best: Option<(f64, &Vec<f64>)> = None;
            for v in vs {
                let val = sorted_sum(v.iter().zip(cost).map(|(a, b)| a * b).collect());
                if best.is_none_or(|(b, _)| val < b) {
                    best = Some((val, v));
                }
            }
            return best.map(|(_, v)| v.clone()).ok_or(DiscretizeError::InfeasibleK);
        }
        let mut lp = LinearProgram::new(cost.to_vec());
        for (row, &b) in self.masses.a_rows().iter().zip(self.masses.rhs()) {
            lp = lp.eq(row.clone(), b);
        }
        match lp.solve()? {
            LpOutcome::Optimal { x, .. } => Ok(x),
            LpOutcome::Infeasible => Err(DiscretizeError::InfeasibleK),
            LpOutcome::Unbounded => Err(DiscretizeError::UnboundedK),
        }
    }

    /// Cached vertices of `K` when enumerated.
    pub fn k_vertices(&self) -> Option<&[Vec<f64>]> {
        self.vertices.as_deref()
    }
}

/// Sum that does not depend on the order of the terms.
pub(crate) fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

pub(crate) fn objective_from(pw: &[f64], w: &[f64], q: &[f64]) -> f64 {
    w.iter()
        .zip(pw)
        .zip(q)
        .map(|((wk, pk), qk)| wk * (pk + 2.0 * qk))
        .sum()
}

/// Nonnegative weights on the concatenated grids of a measure tuple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureTuple {
    grids: Vec<Grid>,
    weights: Vec<f64>,
}

impl MeasureTuple {
    pub fn new(grids: Vec<Grid>, weights: Vec<f64>) -> Result<Self, DiscretizeError> {
        let n: usize = grids.iter().map(Grid::len).sum();
        if weights.len() != n {
            return Err(DiscretizeError::Dimension(format!(
                "{} weights for {n} nodes",
                weights.len()
            )));
        }
        Ok(Self { grids, weights })
    }

    pub fn zeros(grids: Vec<Grid>) -> Self {
        let n = grids.iter().map(Grid::len).sum();
        Self {
            grids,
            weights: vec![0.0; n],
        }
    }

    pub fn from_blocks(grids: Vec<Grid>, blocks: Vec<Vec<f64>>) -> Result<Self, DiscretizeError> {
        Self::new(grids, blocks.concat())
    }

    pub fn dim(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.grids[..i].iter().map(Grid::len).sum();
        start..start + self.grids[i].len()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.weights[self.block_range(i)]
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.block(i).iter().sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExternalField, InteractionMatrix};

    #[test]
    fn uniform_grid() {
        let g = build_grid(&IntervalUnion::interval(-1.0, 1.0).unwrap(), 4, None).unwrap();
        assert_eq!(g.nodes, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.widths, vec![0.5; 4]);
    }

    #[test]
    fn clipped_line() {
        let g = build_grid(&IntervalUnion::real_line(), 100, Some(10.0)).unwrap();
        assert_eq!(g.len(), 100);
        assert!((g.lower() + 10.0).abs() < 1e-12 && (g.upper() - 10.0).abs() < 1e-12);
        assert!(g.truncated_low && g.truncated_high);
        assert_eq!(
            build_grid(&IntervalUnion::real_line(), 100, None),
            Err(DiscretizeError::MissingTruncation(0))
        );
    }

    #[test]
    fn proportional_split() {
        let s = IntervalUnion::new([(0.0, 1.0), (3.0, 5.0)]).unwrap();
        let g = build_grid(&s, 30, None).unwrap();
        assert_eq!(g.parent.iter().filter(|&&p| p == 0).count(), 10);
        assert_eq!(g.parent.iter().filter(|&&p| p == 1).count(), 20);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn kernel_values() {
        assert!((self_cell_entry(1.0) - 1.5).abs() < 1e-15);
        let g1 = Grid {
            nodes: vec![0.0],
            widths: vec![0.1],
            parent: vec![0],
            truncated_low: false,
            truncated_high: false,
        };
        let mut g2 = g1.clone();
        g2.nodes = vec![1.0];
        assert_eq!(energy_block(&g1, &g2)[(0, 0)], 0.0);
        g2.nodes = vec![std::f64::consts::E];
        assert!((energy_block(&g1, &g2)[(0, 0)] + 1.0).abs() < 1e-15);
        // coincident nodes on distinct grids use the cell average
        let mut g3 = g1.clone();
        g3.widths = vec![0.2];
        let e = energy_block(&g1, &g3)[(0, 0)];
        assert!((e - cell_average_kernel((-0.05, 0.05), (-0.1, 0.1))).abs() < 1e-14);
        assert!(e.is_finite());
    }

    #[test]
    fn cell_average_matches_self_entry() {
        for h in [1.0, 0.1, 0.01] {
            assert!((cell_average_kernel((0.0, h), (0.0, h)) - self_cell_entry(h)).abs() < 1e-12);
        }
    }

    fn scalar(a: f64, b: f64) -> ProblemInstance {
        ProblemInstance::without_fields(
            vec![IntervalUnion::interval(a, b).unwrap()],
            InteractionMatrix::from_rows(&[vec![1.0]]).unwrap(),
            MassPolyhedron::fixed(&[1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn objective_of_zero_and_gradient() {
        let p = ProblemInstance::new(
            vec![IntervalUnion::interval(-1.0, 1.0).unwrap()],
            InteractionMatrix::from_rows(&[vec![1.0]]).unwrap(),
            vec![ExternalField::polynomial(vec![0.5, 0.0, 1.0]).unwrap()],
            MassPolyhedron::fixed(&[1.0]).unwrap(),
        )
        .unwrap();
        let dp = assemble(&p, &AssembleOptions::uniform(1, 16)).unwrap();
        let w = vec![0.0; 16];
        assert_eq!(dp.objective(&w), 0.0);
        let g = dp.gradient(&w);
        for (gk, qk) in g.iter().zip(dp.field()) {
            assert_eq!(*gk, 2.0 * qk);
        }
    }

    #[test]
    fn gradient_symmetry() {
        let dp = assemble(&scalar(-1.0, 1.0), &AssembleOptions::uniform(1, 20)).unwrap();
        let w: Vec<f64> = (0..20).map(|k| 1.0 + (k as f64 - 9.5).powi(2)).collect();
        let g = dp.gradient(&w);
        for k in 0..20 {
            assert!((g[k] - g[19 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_matches_dense_product() {
        let p = ProblemInstance::without_fields(
            vec![
                IntervalUnion::interval(-1.0, 1.0).unwrap(),
                IntervalUnion::interval(-0.5, 0.5).unwrap(),
            ],
            InteractionMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let dp = assemble(&p, &AssembleOptions::with_nodes(vec![7, 5])).unwrap();
        let w: Vec<f64> = (0..12).map(|k| (k as f64 * 0.37).sin().abs()).collect();
        let pw = dp.apply(&w);
        let mut by_cols = vec![0.0; 12];
        for (k, &wk) in w.iter().enumerate() {
            dp.add_column(k, wk, &mut by_cols);
        }
        for r in 0..12 {
            let ci = dp.component_of(r);
            let dense: f64 = (0..12)
                .map(|k| dp.interaction()[(ci, dp.component_of(k))] * dp.kernel()[(r, k)] * w[k])
                .sum();
            assert!((pw[r] - dense).abs() < 1e-12);
            assert!((by_cols[r] - dense).abs() < 1e-12);
        }
        // block symmetry E^(1,2) = (E^(2,1))^t
        assert_eq!(dp.energy_block(0, 1), dp.energy_block(1, 0).transpose());
    }

    #[test]
    fn truncation_radius_for_quadratic_field() {
        // Q = x^2 on the line, d = 2 with row sum |c| = 3 and masses <= 1
        let line = IntervalUnion::real_line();
        let p = ProblemInstance::new(
            vec![line.clone(), line],
            InteractionMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            vec![ExternalField::polynomial(vec![0.0, 0.0, 1.0]).unwrap(); 2],
            MassPolyhedron::simplex(2, 1.0).unwrap(),
        )
        .unwrap();
        let r = choose_truncation(&p, 0, 10.0).unwrap().unwrap();
        // oracle: plain bisection of x^2 - 6 log(1 + x) - 10 on [1, 10]
        let f = |x: f64| x * x - 6.0 * x.ln_1p() - 10.0;
        let (mut lo, mut hi) = (1.0_f64, 10.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((r - hi).abs() < 1e-9, "{r} vs {hi}");
        assert!((r - 4.4966).abs() < 1e-3);
        let dp = assemble(&p, &AssembleOptions::uniform(2, 40)).unwrap();
        assert!(dp.support_compact());
        assert_eq!(choose_truncation(&scalar(-1.0, 1.0), 0, 10.0).unwrap(), None);
    }

    #[test]
    fn support_compact_flag_negative_pair() {
        let line = IntervalUnion::real_line();
        let p = ProblemInstance::new(
            vec![line.clone(), line],
            InteractionMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap(),
            vec![ExternalField::polynomial(vec![0.0, 0.0, 1.0]).unwrap(); 2],
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let dp = assemble(&p, &AssembleOptions::uniform(2, 40)).unwrap();
        assert!(!dp.support_compact());
    }
}
