//! Small dense linear programming.
//!
//! A two-phase tableau simplex with Bland's rule, plus exhaustive vertex
//! enumeration for polyhedra `{x >= 0 : Ax = a}` in low dimension. Problem
//! sizes here are tiny (a few dozen variables), so everything is dense and
//! deterministic.

use crate::error::LpError;

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

/// `minimize c.x  subject to  a_eq x = b_eq,  a_ub x <= b_ub,  x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, *value)),
            _ => None,
        }
    }
}

struct Tableau {
    // rows[0..m] constraints, last column rhs
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                }
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations over columns `allowed` (Bland's rule).
    /// Returns `Ok(true)` when optimal and `Ok(false)` when unbounded.
    fn run(&mut self, allowed: &[bool], max_iters: usize) -> Result<bool, LpError> {
        let rhs = self.ncols;
        for _ in 0..max_iters {
            let entering = (0..self.ncols).find(|&j| allowed[j] && self.obj[j] < -PIVOT_TOL);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[rhs] / row[c];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(LpError::IterationLimit(max_iters))
    }
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        Self {
            cost,
            ..Default::default()
        }
    }

    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn ge(self, row: Vec<f64>, rhs: f64) -> Self {
        let neg = row.iter().map(|v| -v).collect();
        self.le(neg, -rhs)
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        let n = self.cost.len();
        let m_eq = self.a_eq.len();
        let m_ub = self.a_ub.len();
        let m = m_eq + m_ub;
        for row in self.a_eq.iter().chain(&self.a_ub) {
            if row.len() != n {
                return Err(LpError::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        // columns: n structural, m_ub slacks, m artificials
        let n_slack = m_ub;
        let ncols = n + n_slack + m;
        let mut rows = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = vec![0.0; ncols + 1];
            let (coefs, mut rhs) = if i < m_eq {
                (&self.a_eq[i], self.b_eq[i])
            } else {
                (&self.a_ub[i - m_eq], self.b_ub[i - m_eq])
            };
            row[..n].copy_from_slice(coefs);
            if i >= m_eq {
                row[n + (i - m_eq)] = 1.0;
            }
            if rhs < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
                rhs = -rhs;
            }
            row[n + n_slack + i] = 1.0;
            row[ncols] = rhs;
            rows.push(row);
        }
        let basis: Vec<usize> = (0..m).map(|i| n + n_slack + i).collect();

        // phase 1: minimize the sum of artificials, expressed in reduced form
        let mut obj = vec![0.0; ncols + 1];
        for row in &rows {
            for j in 0..n + n_slack {
                obj[j] -= row[j];
            }
            obj[ncols] -= row[ncols];
        }
        let mut tab = Tableau {
            rows,
            obj,
            basis,
            ncols,
        };
        let max_iters = 50 * (ncols + m + 10);
        let allowed1: Vec<bool> = (0..ncols).map(|j| j < n + n_slack).collect();
        tab.run(&allowed1, max_iters)?;
        let phase1 = -tab.obj[ncols];
        let scale = 1.0
            + tab
                .rows
                .iter()
                .map(|r| r[ncols].abs())
                .fold(0.0_f64, f64::max);
        if phase1 > FEAS_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }

        // drive artificials out of the basis, dropping redundant rows
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= n + n_slack {
                let col = (0..n + n_slack).find(|&j| tab.rows[r][j].abs() > 1e-9);
                match col {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        tab.rows.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }

        // phase 2
        let mut obj = vec![0.0; ncols + 1];
        obj[..n].copy_from_slice(&self.cost);
        for (i, &b) in tab.basis.iter().enumerate() {
            let cb = obj[b];
            if cb != 0.0 {
                let row = tab.rows[i].clone();
                for (v, rv) in obj.iter_mut().zip(&row) {
                    *v -= cb * rv;
                }
            }
        }
        tab.obj = obj;
        if !tab.run(&allowed1, max_iters)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut x = vec![0.0; n];
        for (i, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rows[i][ncols].max(0.0);
            }
        }
        let value = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

/// Row-reduces `[A | a]` and keeps a maximal independent set of rows.
/// Returns `None` when the system `Ax = a` is inconsistent.
pub(crate) fn independent_rows(a: &[Vec<f64>], rhs: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let d = a.first().map_or(0, |r| r.len());
    let mut rows: Vec<Vec<f64>> = a
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let mut v = r.clone();
            v.push(b);
            v
        })
        .collect();
    let scale = rows
        .iter()
        .flat_map(|r| r[..d].iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut rank = 0;
    for col in 0..d {
        let Some(p) = (rank..rows.len()).max_by(|&i, &j| rows[i][col].abs().total_cmp(&rows[j][col].abs()))
        else {
            break;
        };
        if rows[p][col].abs() <= 1e-10 * scale {
            continue;
        }
        rows.swap(rank, p);
        let piv = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank {
                let f = row[col] / piv[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&piv) {
                        *v -= f * pv;
                    }
                }
            }
        }
        rank += 1;
    }
    let rhs_scale = 1.0 + rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if rows[rank..].iter().any(|r| r[d].abs() > 1e-9 * rhs_scale) {
        return None;
    }
    rows.truncate(rank);
    let b = rows.iter_mut().map(|r| r.pop().unwrap_or(0.0)).collect();
    Some((rows, b))
}

/// Solves the square system by Gaussian elimination with partial pivoting.
pub(crate) fn solve_square(m: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut aug: Vec<Vec<f64>> = m
        .iter()
        .zip(b)
        .map(|(r, &v)| {
            let mut row = r.clone();
            row.push(v);
            row
        })
        .collect();
    let scale = aug
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0_f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[p][col].abs() <= 1e-11 * scale {
            return None;
        }
        aug.swap(col, p);
        for i in col + 1..n {
            let f = aug[i][col] / aug[col][col];
            if f != 0.0 {
                for k in col..=n {
                    aug[i][k] -= f * aug[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| aug[i][k] * x[k]).sum();
        x[i] = (aug[i][n] - s) / aug[i][i];
    }
    Some(x)
}

/// Enumerates the vertices of `{x >= 0 : Ax = a}` by trying every basis.
///
/// Returns vertices in lexicographic order of their basis column sets, with
/// duplicates (degenerate bases) removed.
pub fn enumerate_vertices(a: &[Vec<f64>], rhs: &[f64], d: usize) -> Vec<Vec<f64>> {
    let Some((rows, b)) = (if a.is_empty() {
        Some((Vec::new(), Vec::new()))
    } else {
        independent_rows(a, rhs)
    }) else {
        return Vec::new();
    };
    let r = rows.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut subset: Vec<usize> = (0..r).collect();
    if r > d {
        return out;
    }
    loop {
        let sub: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| subset.iter().map(|&j| row[j]).collect())
            .collect();
        let sol = if r == 0 { Some(Vec::new()) } else { solve_square(&sub, &b) };
        if let Some(xs) = sol {
            let tol = 1e-10 * (1.0 + xs.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
            if xs.iter().all(|&v| v >= -tol) {
                let mut x = vec![0.0; d];
                for (&j, &v) in subset.iter().zip(&xs) {
                    x[j] = if v.abs() <= tol { 0.0 } else { v };
                }
                let dup = out
                    .iter()
                    .any(|y| y.iter().zip(&x).all(|(p, q)| (p - q).abs() <= 1e-9 * (1.0 + p.abs())));
                if !dup {
                    out.push(x);
                }
            }
        }
        // next combination
        let mut i = r;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if subset[i] < d - r + i {
                subset[i] += 1;
                for k in i + 1..r {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}
