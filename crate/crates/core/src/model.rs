//! Problem data: supports, interaction matrix, external fields and the
//! polyhedron of admissible masses.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::ModelError;
use crate::lp::{self, LinearProgram, LpOutcome};

pub const DEFAULT_TOL_PSD: f64 = 1e-10;
pub const DEFAULT_TOL_FAC: f64 = 1e-12;

/// A closed interval `[lo, hi]`; the outer endpoints of a union may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_fat(&self) -> bool {
        self.hi > self.lo
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    fn distance(&self, other: &Interval) -> f64 {
        if self.hi < other.lo {
            other.lo - self.hi
        } else if other.hi < self.lo {
            self.lo - other.hi
        } else {
            0.0
        }
    }
}

/// Finite union of disjoint closed real intervals, sorted by left endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    /// Sorts and merges overlapping or touching intervals.
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(raw: I) -> Result<Self, ModelError> {
        let mut ivs: Vec<Interval> = Vec::new();
        for (lo, hi) in raw {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(ModelError::BadInterval(lo, hi));
            }
            ivs.push(Interval { lo, hi });
        }
        if ivs.is_empty() {
            return Err(ModelError::EmptyIntervals);
        }
        ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self, ModelError> {
        Self::new([(lo, hi)])
    }

    pub fn real_line() -> Self {
        Self {
            intervals: vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn unbounded_below(&self) -> bool {
        self.intervals[0].lo == f64::NEG_INFINITY
    }

    pub fn unbounded_above(&self) -> bool {
        self.intervals[self.intervals.len() - 1].hi == f64::INFINITY
    }

    pub fn is_bounded(&self) -> bool {
        !self.unbounded_below() && !self.unbounded_above()
    }

    /// Positive capacity for interval unions means positive length somewhere.
    pub fn has_positive_capacity(&self) -> bool {
        self.intervals.iter().any(Interval::is_fat)
    }

    /// Largest finite endpoint magnitude.
    pub fn max_finite_endpoint(&self) -> f64 {
        self.intervals
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .filter(|v| v.is_finite())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.lo <= x && x <= iv.hi)
    }

    pub fn translate(&self, t: f64) -> Self {
        Self {
            intervals: self
                .intervals
                .iter()
                .map(|iv| Interval::new(iv.lo + t, iv.hi + t))
                .collect(),
        }
    }
}

/// Exact Euclidean distance between two interval unions.
pub fn set_distance(s1: &IntervalUnion, s2: &IntervalUnion) -> f64 {
    s1.intervals
        .iter()
        .flat_map(|a| s2.intervals.iter().map(move |b| a.distance(b)))
        .fold(f64::INFINITY, f64::min)
}

/// Common intersection of the given unions, as a (possibly empty) list of intervals.
pub fn intersection(sets: &[&IntervalUnion]) -> Vec<Interval> {
    let Some((first, rest)) = sets.split_first() else {
        return Vec::new();
    };
    let mut acc = first.intervals.clone();
    for s in rest {
        let mut next = Vec::new();
        for a in &acc {
            for b in &s.intervals {
                if let Some(c) = a.intersect(b) {
                    next.push(c);
                }
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Whether the common intersection contains an interval of positive length.
pub fn intersection_capacity_positive(sets: &[&IntervalUnion]) -> bool {
    !sets.is_empty() && intersection(sets).iter().any(Interval::is_fat)
}

/// Symmetric positive semidefinite interaction matrix `C` with a full-rank
/// factor `B` (`r x d`, `C = B^t B`).
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    entries: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
    factor: DMatrix<f64>,
}

impl InteractionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        Self::factorize(&rows_to_matrix(rows)?, DEFAULT_TOL_PSD)
    }

    /// Eigen-decomposes `c`, checks symmetry and semidefiniteness, and builds
    /// `B = diag(sqrt(lambda)) V^t` over the retained eigenvalues.
    pub fn factorize(c: &DMatrix<f64>, tol_psd: f64) -> Result<Self, ModelError> {
        let (rows, cols) = c.shape();
        if rows != cols {
            return Err(ModelError::NotSquare { rows, cols });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Dimension("matrix has non-finite entries".into()));
        }
        for i in 0..rows {
            for j in i + 1..rows {
                if c[(i, j)] != c[(j, i)] {
                    return Err(ModelError::NotSymmetric(i, j));
                }
            }
        }
        let d = rows;
        let eig = SymmetricEigen::new(c.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
        let top = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(&low) = eigenvalues.last() {
            if low < -tol_psd * top || (top == 0.0 && low < 0.0) {
                return Err(ModelError::NotPsd(low));
            }
        }
        let rank = eigenvalues.iter().filter(|&&l| l > tol_psd * top).count();
        let factor = DMatrix::from_fn(rank, d, |r, j| eigenvalues[r].sqrt() * eigenvectors[(j, r)]);
        let recon = factor.transpose() * &factor;
        let err = (&recon - c).amax();
        let scale = 1.0 + c.amax();
        // dropped eigenvalues are below tol_psd; allow their contribution
        let allowed = DEFAULT_TOL_FAC * scale * (d as f64).max(1.0) + tol_psd * top;
        if err > allowed {
            return Err(ModelError::FactorMismatch(err));
        }
        Ok(Self {
            entries: c.clone(),
            eigenvalues,
            eigenvectors,
            rank,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Eigenvalues in decreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn is_positive_definite(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| self.entries[(perm[i], perm[j])]);
        Self::factorize(&m, DEFAULT_TOL_PSD)
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ModelError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(ModelError::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// `Q(x) = sum_k c_k x^k + alpha log(1 + (x - s)^2)` with `alpha >= 0`.
///
/// The log center `s` is zero unless the field was translated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalField {
    coeffs: Vec<f64>,
    log_weight: f64,
    log_center: f64,
}

impl ExternalField {
    pub fn new(coeffs: Vec<f64>, log_weight: f64) -> Result<Self, ModelError> {
        if coeffs.iter().any(|c| !c.is_finite()) || !log_weight.is_finite() || log_weight < 0.0 {
            return Err(ModelError::BadField);
        }
        Ok(Self {
            coeffs,
            log_weight,
            log_center: 0.0,
        })
    }

    pub fn zero() -> Self {
        Self {
            coeffs: Vec::new(),
            log_weight: 0.0,
            log_center: 0.0,
        }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(coeffs, 0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn eval(&self, x: f64) -> f64 {
        let poly = self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        if self.log_weight > 0.0 {
            let y = x - self.log_center;
            poly + self.log_weight * (y * y).ln_1p()
        } else {
            poly
        }
    }

    /// Degree and leading coefficient of the polynomial part.
    pub fn leading(&self) -> Option<(usize, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &c)| c != 0.0)
            .map(|(k, &c)| (k, c))
    }

    /// Whether the polynomial part tends to `+inf` as `x -> +inf` (`upward`)
    /// or `x -> -inf`.
    pub fn grows_toward(&self, upward: bool) -> bool {
        match self.leading() {
            Some((deg, c)) if deg >= 1 => {
                let sign = if upward || deg % 2 == 0 { c } else { -c };
                sign > 0.0
            }
            _ => false,
        }
    }

    /// Field seen after translating the support by `t`: `x -> Q(x - t)`.
    pub fn translated(&self, t: f64) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        // binomial expansion of (x - t)^k
        for (k, &c) in self.coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for j in 0..=k {
                out[j] += c * binom * (-t).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Self {
            coeffs: out,
            log_weight: self.log_weight,
            log_center: self.log_center + t,
        }
    }
}

/// `K = {x in R^d : x >= 0, A x = a}`.
#[derive(Debug, Clone)]
pub struct MassPolyhedron {
    a_mat: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    dim: usize,
    feasible_point: Option<Vec<f64>>,
    recession: Option<Vec<f64>>,
}

/// Exhaustive vertex enumeration is used up to this dimension.
pub const VERTEX_ENUMERATION_MAX_DIM: usize = 12;

impl MassPolyhedron {
    pub fn new(a_mat: Vec<Vec<f64>>, rhs: Vec<f64>, dim: usize) -> Result<Self, ModelError> {
        if a_mat.len() != rhs.len() {
            return Err(ModelError::Dimension(format!(
                "A has {} rows but a has {} entries",
                a_mat.len(),
                rhs.len()
            )));
        }
        if let Some(row) = a_mat.iter().find(|r| r.len() != dim) {
            return Err(ModelError::Dimension(format!(
                "A row has {} entries, expected {dim}",
                row.len()
            )));
        }
        if a_mat.iter().flatten().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(ModelError::Dimension("non-finite entry in A or a".into()));
        }
        let mut lp = LinearProgram::new(vec![0.0; dim]);
        for (row, &b) in a_mat.iter().zip(&rhs) {
            lp = lp.eq(row.clone(), b);
        }
        let feasible_point = match lp.solve()? {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        };
        // max sum x over {A x = 0, 0 <= x <= 1}; optimum 0 iff compact
        let mut lp = LinearProgram::new(vec![-1.0; dim]);
        for row in &a_mat {
            lp = lp.eq(row.clone(), 0.0);
        }
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            lp = lp.le(e, 1.0);
        }
        let recession = match lp.solve()? {
            LpOutcome::Optimal { x, value } if value < -1e-9 => Some(x),
            _ => None,
        };
        Ok(Self {
            a_mat,
            rhs,
            dim,
            feasible_point,
            recession,
        })
    }

    /// `{x >= 0 : x_1 + ... + x_d = total}`.
    pub fn simplex(dim: usize, total: f64) -> Result<Self, ModelError> {
        Self::new(vec![vec![1.0; dim]], vec![total], dim)
    }

    /// Singleton `{masses}` with `A = I`.
    pub fn fixed(masses: &[f64]) -> Result<Self, ModelError> {
        let d = masses.len();
        let a = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(a, masses.to_vec(), d)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraint_count(&self) -> usize {
        self.a_mat.len()
    }

    pub fn a_rows(&self) -> &[Vec<f64>] {
        &self.a_mat
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.a_mat.len(), self.dim, |i, j| self.a_mat[i][j])
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible_point.is_some()
    }

    pub fn feasible_point(&self) -> Option<&[f64]> {
        self.feasible_point.as_deref()
    }

    pub fn is_compact(&self) -> bool {
        self.recession.is_none()
    }

    /// A nonzero direction `x >= 0` with `A x = 0`, when `K` is unbounded.
    pub fn recession_direction(&self) -> Option<&[f64]> {
        self.recession.as_deref()
    }

    /// `max |A x - a|` over the constraints.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a_mat
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim && x.iter().all(|&v| v >= -tol) && self.residual(x) <= tol
    }

    /// Vertices of `K` by basis enumeration.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        lp::enumerate_vertices(&self.a_mat, &self.rhs, self.dim)
    }

    /// Upper bound of each mass coordinate over `K` (infinite if unbounded).
    pub fn max_masses(&self) -> Result<Vec<f64>, ModelError> {
        (0..self.dim)
            .map(|j| {
                let mut cost = vec![0.0; self.dim];
                cost[j] = -1.0;
                let mut lp = LinearProgram::new(cost);
                for (row, &b) in self.a_mat.iter().zip(&self.rhs) {
                    lp = lp.eq(row.clone(), b);
                }
                Ok(match lp.solve()? {
                    LpOutcome::Optimal { value, .. } => -value,
                    LpOutcome::Unbounded => f64::INFINITY,
                    LpOutcome::Infeasible => 0.0,
                })
            })
            .collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let a = self
            .a_mat
            .iter()
            .map(|row| perm.iter().map(|&p| row[p]).collect())
            .collect();
        Self::new(a, self.rhs.clone(), self.dim)
    }
}

/// The data `(sets, C, Q, K)` of a weighted vector equilibrium problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    sets: Vec<IntervalUnion>,
    interaction: InteractionMatrix,
    fields: Vec<ExternalField>,
    masses: MassPolyhedron,
}

impl ProblemInstance {
    pub fn new(
        sets: Vec<IntervalUnion>,
        interaction: InteractionMatrix,
        fields: Vec<ExternalField>,
        masses: MassPolyhedron,
    ) -> Result<Self, ModelError> {
        let d = sets.len();
        if d == 0 {
            return Err(ModelError::Dimension("no components".into()));
        }
        if interaction.dim() != d || fields.len() != d || masses.dim() != d {
            return Err(ModelError::Dimension(format!(
                "{} sets, {}x{} interaction, {} fields, K in R^{}",
                d,
                interaction.dim(),
                interaction.dim(),
                fields.len(),
                masses.dim()
            )));
        }
        if let Some(i) = sets.iter().position(|s| !s.has_positive_capacity()) {
            return Err(ModelError::PolarSet(i));
        }
        Ok(Self {
            sets,
            interaction,
            fields,
            masses,
        })
    }

    /// Instance with zero external fields.
    pub fn without_fields(
        sets: Vec<IntervalUnion>,
        interaction: InteractionMatrix,
        masses: MassPolyhedron,
    ) -> Result<Self, ModelError> {
        let d = sets.len();
        Self::new(sets, interaction, vec![ExternalField::zero(); d], masses)
    }

    pub fn dim(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[IntervalUnion] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &IntervalUnion {
        &self.sets[i]
    }

    pub fn interaction(&self) -> &InteractionMatrix {
        &self.interaction
    }

    pub fn fields(&self) -> &[ExternalField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &ExternalField {
        &self.fields[i]
    }

    pub fn masses(&self) -> &MassPolyhedron {
        &self.masses
    }

    /// Relabels components: component `k` of the result is component `perm[k]` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        Self::new(
            perm.iter().map(|&p| self.sets[p].clone()).collect(),
            self.interaction.permuted(perm)?,
            perm.iter().map(|&p| self.fields[p].clone()).collect(),
            self.masses.permuted(perm)?,
        )
    }

    /// Shifts every set by `t` and every field accordingly.
    pub fn translated(&self, t: f64) -> Result<Self, ModelError> {
        Self::new(
            self.sets.iter().map(|s| s.translate(t)).collect(),
            self.interaction.clone(),
            self.fields.iter().map(|f| f.translated(t)).collect(),
            self.masses.clone(),
        )
    }
}
