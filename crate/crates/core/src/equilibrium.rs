//! Certification of a discrete solution against the equilibrium inequalities
//! `U_i + Q_i >= (AᵗF)_i` on `Δ_i` and `U_i + Q_i <= (AᵗF)_i` on `supp μ_i`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::discretize::{cell_average_kernel, self_cell_entry, Grid, MeasureTuple};
use crate::error::EquilibriumError;
use crate::model::{ExternalField, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub eq_tol: f64,
    pub boundary_tol: f64,
    /// Relative to the total mass of the tuple.
    pub mass_floor: f64,
    /// Audit points per cell.
    pub density: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            eq_tol: 5e-2,
            boundary_tol: 1e-3,
            mass_floor: 1e-9,
            density: 4,
        }
    }
}

/// `H(s) = s log|s| - s`, an antiderivative of `log|s|`.
fn log_antiderivative(s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * s.abs().ln() - s
    }
}

/// Average of `-log|x - t|` over `t` in the cell `[lo, hi]`.
pub fn single_cell_average(x: f64, lo: f64, hi: f64) -> f64 {
    -(log_antiderivative(x - lo) - log_antiderivative(x - hi)) / (hi - lo)
}

fn grid_potential(grid: &Grid, weights: &[f64], x: f64) -> f64 {
    let mut u = 0.0;
    for (k, &wk) in weights.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let dist = (x - grid.nodes[k]).abs();
        let kern = if dist < 0.5 * grid.widths[k] {
            let (lo, hi) = grid.cell(k);
            single_cell_average(x, lo, hi)
        } else {
            -dist.ln()
        };
        u += wk * kern;
    }
    u
}

/// Logarithmic potential of component `i` at `x`, each node's mass spread
/// over its cell when `x` lies inside that cell.
pub fn potential(m: &MeasureTuple, i: usize, x: f64) -> f64 {
    grid_potential(&m.grids()[i], m.block(i), x)
}

/// `U_i(x) = Σ_j c_ij U^{μ_j}(x)`.
pub fn partial_potential(m: &MeasureTuple, c: &DMatrix<f64>, i: usize, x: f64) -> f64 {
    (0..m.dim())
        .filter(|&j| c[(i, j)] != 0.0)
        .map(|j| c[(i, j)] * potential(m, j, x))
        .sum()
}

fn check_shape(m: &MeasureTuple, p: &ProblemInstance) -> Result<(), EquilibriumError> {
    if m.dim() != p.dim() {
        return Err(EquilibriumError::Dimension {
            expected: p.dim(),
            got: m.dim(),
        });
    }
    Ok(())
}

/// Constants `w_i` on the supports and the multipliers `F`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Multipliers {
    /// `None` for components carrying no mass.
    pub w: Vec<Option<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    /// `AᵗF` per component.
    pub at_f: Vec<f64>,
    /// `|AᵗF - w|` over active components.
    pub residual: f64,
}

/// Recovers `w_i` as mass-weighted averages of `U_i + Q_i` and `F` by least
/// squares on the active rows of `AᵗF = w`.
pub fn recover_multipliers(
    m: &MeasureTuple,
    p: &ProblemInstance,
    opts: &VerifyOptions,
) -> Result<Multipliers, EquilibriumError> {
    check_shape(m, p)?;
    let d = p.dim();
    let c = p.interaction().entries();
    let floor = opts.mass_floor * m.total_mass();
    let masses = m.masses();
    let mut w = vec![None; d];
    for i in 0..d {
        if masses[i] <= floor {
            continue;
        }
        let grid = &m.grids()[i];
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &wk) in m.block(i).iter().enumerate() {
            if wk > floor {
                let x = grid.nodes[k];
                num += wk * (partial_potential(m, c, i, x) + p.field(i).eval(x));
                den += wk;
            }
        }
        w[i] = Some(num / den);
    }
    let active: Vec<usize> = (0..d).filter(|&i| w[i].is_some()).collect();
    if active.is_empty() {
        return Err(EquilibriumError::AllInactive);
    }
    let rows = p.masses().a_rows();
    let mm = rows.len();
    let (f, at_f) = if mm == 0 {
        (Vec::new(), vec![0.0; d])
    } else {
        let lhs = DMatrix::from_fn(active.len(), mm, |r, l| rows[l][active[r]]);
        let rhs = DVector::from_iterator(active.len(), active.iter().map(|&i| w[i].unwrap()));
        let svd = lhs.svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(1.0);
        let f = svd.solve(&rhs, eps).expect("both factors computed");
        let f: Vec<f64> = f.iter().copied().collect();
        let at_f = (0..d)
            .map(|i| rows.iter().zip(&f).map(|(row, fl)| row[i] * fl).sum())
            .collect();
        (f, at_f)
    };
    let residual = active
        .iter()
        .map(|&i| (at_f[i] - w[i].unwrap()).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(Multipliers { w, f, at_f, residual })
}

/// Audit points of a grid: `density` subcell midpoints per cell plus the
/// piece endpoints pulled inward by a tenth of a cell.
pub fn audit_points(grid: &Grid, density: usize) -> Vec<f64> {
    let density = density.max(1);
    let n = grid.len();
    let mut pts = Vec::with_capacity(n * density + 2);
    for k in 0..n {
        let (lo, hi) = grid.cell(k);
        let h = hi - lo;
        if k == 0 || grid.parent[k] != grid.parent[k - 1] {
            pts.push(lo + 0.1 * h);
        }
        for j in 0..density {
            pts.push(lo + (j as f64 + 0.5) * h / density as f64);
        }
        if k + 1 == n || grid.parent[k] != grid.parent[k + 1] {
            pts.push(hi - 0.1 * h);
        }
    }
    pts
}

/// Fraction of the component mass in the outermost two cells of each
/// truncated end; `None` if the grid was not truncated.
pub fn boundary_mass(grid: &Grid, weights: &[f64]) -> Option<f64> {
    if !grid.truncated_low && !grid.truncated_high {
        return None;
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Some(0.0);
    }
    let n = weights.len();
    let mut edge = vec![false; n];
    if grid.truncated_low {
        edge.iter_mut().take(2).for_each(|e| *e = true);
    }
    if grid.truncated_high {
        edge.iter_mut().rev().take(2).for_each(|e| *e = true);
    }
    let out: f64 = weights.iter().zip(&edge).filter(|(_, &e)| e).map(|(w, _)| w).sum();
    Some(out / total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub w: Vec<Option<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    #[serde(rename = "AtF")]
    pub at_f: Vec<f64>,
    pub residual: f64,
    /// Largest `(AᵗF)_i - U_i - Q_i` over the audit grids, clipped at zero.
    pub lower_violation: f64,
    /// Largest `U_i + Q_i - (AᵗF)_i` over weight-carrying nodes, clipped at zero.
    pub upper_violation: f64,
    pub lower_by_component: Vec<f64>,
    pub upper_by_component: Vec<f64>,
    pub boundary_mass: Vec<Option<f64>>,
    pub eq_tol: f64,
    pub boundary_tol: f64,
    pub pass: bool,
    pub advice: Vec<String>,
}

impl EquilibriumReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for EquilibriumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict          {}", if self.pass { "pass" } else { "fail" })?;
        writeln!(f, "lower violation  {:.3e} (tol {:.1e})", self.lower_violation, self.eq_tol)?;
        writeln!(f, "upper violation  {:.3e} (tol {:.1e})", self.upper_violation, self.eq_tol)?;
        writeln!(f, "multiplier res.  {:.3e}", self.residual)?;
        for (i, w) in self.w.iter().enumerate() {
            let w = w.map_or("inactive".to_string(), |v| format!("{v:.6}"));
            let b = self.boundary_mass[i].map_or("-".to_string(), |v| format!("{v:.2e}"));
            writeln!(f, "  component {}: w = {w}, AtF = {:.6}, boundary mass {b}", i + 1, self.at_f[i])?;
        }
        for a in &self.advice {
            writeln!(f, "note: {a}")?;
        }
        Ok(())
    }
}

/// Checks both equilibrium inequalities with given multipliers.
pub fn verify(
    m: &MeasureTuple,
    p: &ProblemInstance,
    mult: &Multipliers,
    opts: &VerifyOptions,
) -> Result<EquilibriumReport, EquilibriumError> {
    check_shape(m, p)?;
    let d = p.dim();
    let c = p.interaction().entries();
    let floor = opts.mass_floor * m.total_mass();
    let mut lower = vec![0.0f64; d];
    let mut upper = vec![0.0f64; d];
    let mut boundary = vec![None; d];
    let mut advice = Vec::new();
    for i in 0..d {
        let grid = &m.grids()[i];
        let level = mult.at_f[i];
        let excess = |x: f64| partial_potential(m, c, i, x) + p.field(i).eval(x) - level;
        for x in audit_points(grid, opts.density) {
            lower[i] = lower[i].max(-excess(x));
        }
        for (k, &wk) in m.block(i).iter().enumerate() {
            if wk > floor {
                upper[i] = upper[i].max(excess(grid.nodes[k]));
            }
        }
        boundary[i] = boundary_mass(grid, m.block(i));
        if boundary[i].is_some_and(|b| b > opts.boundary_tol) {
            advice.push(format!(
                "component {} puts too much mass near its truncation boundary; rerun with a larger truncation radius",
                i + 1
            ));
        }
    }
    let lower_violation = lower.iter().copied().fold(0.0, f64::max);
    let upper_violation = upper.iter().copied().fold(0.0, f64::max);
    let pass = lower_violation <= opts.eq_tol
        && upper_violation <= opts.eq_tol
        && boundary.iter().flatten().all(|&b| b <= opts.boundary_tol);
    Ok(EquilibriumReport {
        w: mult.w.clone(),
        f: mult.f.clone(),
        at_f: mult.at_f.clone(),
        residual: mult.residual,
        lower_violation,
        upper_violation,
        lower_by_component: lower,
        upper_by_component: upper,
        boundary_mass: boundary,
        eq_tol: opts.eq_tol,
        boundary_tol: opts.boundary_tol,
        pass,
        advice,
    })
}

/// Recovers the multipliers and verifies in one go.
pub fn certify(m: &MeasureTuple, p: &ProblemInstance, opts: &VerifyOptions) -> Result<EquilibriumReport, EquilibriumError> {
    let mult = recover_multipliers(m, p, opts)?;
    verify(m, p, &mult, opts)
}

/// Discrete weighted energy of a tuple, computed directly from the grids.
pub fn energy(m: &MeasureTuple, c: &DMatrix<f64>, fields: &[ExternalField]) -> f64 {
    let grids = m.grids();
    let d = m.dim();
    let mut total = 0.0;
    for i in 0..d {
        let (gi, wi) = (&grids[i], m.block(i));
        total += 2.0
            * gi.nodes
                .iter()
                .zip(wi)
                .map(|(&x, &w)| w * fields[i].eval(x))
                .sum::<f64>();
        for j in 0..d {
            if c[(i, j)] == 0.0 {
                continue;
            }
            let (gj, wj) = (&grids[j], m.block(j));
            let same = gi == gj;
            let mut e = 0.0;
            for (k, &a) in wi.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (l, &b) in wj.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    let kern = if same && k == l {
                        self_cell_entry(gi.widths[k])
                    } else {
                        let dist = (gi.nodes[k] - gj.nodes[l]).abs();
                        if dist < 1e-14 {
                            cell_average_kernel(gi.cell(k), gj.cell(l))
                        } else {
                            -dist.ln()
                        }
                    };
                    e += a * b * kern;
                }
            }
            total += c[(i, j)] * e;
        }
    }
    total
}
