//! Mechanical checks of the hypotheses needed for existence, uniqueness and
//! the equilibrium characterization of the minimizer.

use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::graphs::{component_labels, intersection_graph, DirectedMultigraph, DEFAULT_CYCLE_LIMIT};
use crate::lp::{LinearProgram, LpOutcome};
use crate::model::{intersection_capacity_positive, IntervalUnion, ProblemInstance};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Sign patterns are enumerated only up to this many intersection components.
const MAX_SIGN_COMPONENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Indeterminate,
}

impl Status {
    pub fn passed(self) -> bool {
        self == Status::Pass
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub status: Status,
    /// 0-indexed component pairs violating the condition.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Check {
    pub status: Status,
    /// `y in Im(C)` with `y_i y_j > 0` on touching pairs.
    pub witness: Option<Vec<f64>>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum H1Method {
    Cycles,
    Columns,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Check {
    pub status: Status,
    /// Index set with dependent columns and a fat common intersection.
    pub violating: Option<Vec<usize>>,
    pub method: H1Method,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageCheck {
    pub status: Status,
    pub kernel_vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    #[serde(rename = "compatNS")]
    pub compat_ns: PairCheck,
    #[serde(rename = "H2")]
    pub h2: H2Check,
    #[serde(rename = "H1")]
    pub h1: H1Check,
    #[serde(rename = "imageAC")]
    pub image_ac: ImageCheck,
    pub cij0: PairCheck,
    pub admissible: Vec<bool>,
    #[serde(rename = "K_compact")]
    pub k_compact: bool,
    #[serde(rename = "K_feasible")]
    pub k_feasible: bool,
    #[serde(rename = "K_point")]
    pub k_point: Option<Vec<f64>>,
    #[serde(rename = "K_recession")]
    pub k_recession: Option<Vec<f64>>,
    pub existence: bool,
    pub uniqueness: bool,
}

impl AssumptionReport {
    pub fn check(p: &ProblemInstance, graph: Option<&DirectedMultigraph>) -> Self {
        let compat_ns = check_compat_ns(p);
        let h2 = check_h2(p);
        let h1 = check_h1(p, graph);
        let image_ac = check_image_ac(p);
        let cij0 = check_cij0(p);
        let admissible = check_admissibility(p);
        let k = check_k(p);
        let existence = h2.status.passed() && k.compact && k.feasible && admissible.iter().all(|&a| a);
        let uniqueness = existence && h1.status.passed() && image_ac.status.passed();
        Self {
            compat_ns,
            h2,
            h1,
            image_ac,
            cij0,
            admissible,
            k_compact: k.compact,
            k_feasible: k.feasible,
            k_point: k.point,
            k_recession: k.recession,
            existence,
            uniqueness,
        }
    }

    /// Both existence and uniqueness are guaranteed by the checked hypotheses.
    pub fn guarantees(&self) -> bool {
        self.existence && self.uniqueness
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn one_based(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(i, j)| format!("  ({},{})", i + 1, j + 1)).collect()
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "compatNS    {}{}", self.compat_ns.status, one_based(&self.compat_ns.pairs))?;
        write!(f, "H2          {}", self.h2.status)?;
        if let Some(y) = &self.h2.witness {
            write!(f, "  witness y = {y:?}")?;
        }
        if let Some(n) = &self.h2.note {
            write!(f, "  ({n})")?;
        }
        writeln!(f)?;
        write!(f, "H1          {}", self.h1.status)?;
        if let Some(i) = &self.h1.violating {
            let one: Vec<usize> = i.iter().map(|k| k + 1).collect();
            write!(f, "  I = {one:?}")?;
        }
        writeln!(f)?;
        write!(f, "imageAC     {}", self.image_ac.status)?;
        if let Some(v) = &self.image_ac.kernel_vector {
            write!(f, "  Ker A vector {v:?}")?;
        }
        writeln!(f)?;
        writeln!(f, "cij0        {}{}", self.cij0.status, one_based(&self.cij0.pairs))?;
        writeln!(f, "admissible  {:?}", self.admissible)?;
        writeln!(f, "K feasible  {}", self.k_feasible)?;
        write!(f, "K compact   {}", self.k_compact)?;
        if let Some(r) = &self.k_recession {
            write!(f, "  recession {r:?}")?;
        }
        writeln!(f)?;
        writeln!(f, "existence   {}", self.existence)?;
        writeln!(f, "uniqueness  {}", self.uniqueness)
    }
}

fn touching_pairs(sets: &[IntervalUnion]) -> Vec<(usize, usize)> {
    intersection_graph(sets)
}

/// Fails on touching pairs with a negative interaction entry.
pub fn check_compat_ns(p: &ProblemInstance) -> PairCheck {
    let c = p.interaction();
    let pairs: Vec<_> = touching_pairs(p.sets())
        .into_iter()
        .filter(|&(i, j)| c.get(i, j) < 0.0)
        .collect();
    PairCheck {
        status: Status::from_bool(pairs.is_empty()),
        pairs,
    }
}

/// Fails on touching pairs `i != j` with a nonzero interaction entry.
pub fn check_cij0(p: &ProblemInstance) -> PairCheck {
    let c = p.interaction();
    let pairs: Vec<_> = touching_pairs(p.sets())
        .into_iter()
        .filter(|&(i, j)| c.get(i, j) != 0.0)
        .collect();
    PairCheck {
        status: Status::from_bool(pairs.is_empty()),
        pairs,
    }
}

/// Searches `y = C z` with a common strict sign on each connected component
/// of the intersection graph, via one LP per sign pattern.
pub fn check_h2(p: &ProblemInstance) -> H2Check {
    let d = p.dim();
    let c = p.interaction().entries();
    let labels = component_labels(d, &intersection_graph(p.sets()));
    let ncomp = labels.iter().max().map_or(0, |m| m + 1);
    if ncomp > MAX_SIGN_COMPONENTS {
        return H2Check {
            status: Status::Indeterminate,
            witness: None,
            note: Some(format!("{ncomp} intersection components, sign enumeration skipped")),
        };
    }
    // y -> -y is a symmetry, so the first component is taken positive
    let patterns = 1usize << ncomp.saturating_sub(1);
    let mut lp_failed = false;
    for mask in 0..patterns {
        let sign = |comp: usize| if comp > 0 && mask >> (comp - 1) & 1 == 1 { -1.0 } else { 1.0 };
        // variables z+ (d), z- (d)
        let mut lp = LinearProgram::new(vec![0.0; 2 * d]);
        for i in 0..d {
            let s = sign(labels[i]);
            let mut row = vec![0.0; 2 * d];
            for j in 0..d {
                row[j] = s * c[(i, j)];
                row[d + j] = -s * c[(i, j)];
            }
            lp = lp.ge(row, 1.0);
        }
        match lp.solve() {
            Ok(LpOutcome::Optimal { x, .. }) => {
                let y: Vec<f64> = (0..d)
                    .map(|i| (0..d).map(|j| c[(i, j)] * (x[j] - x[d + j])).sum())
                    .collect();
                return H2Check {
                    status: Status::Pass,
                    witness: Some(y),
                    note: None,
                };
            }
            Ok(_) => {}
            Err(_) => lp_failed = true,
        }
    }
    H2Check {
        status: if lp_failed { Status::Indeterminate } else { Status::Fail },
        witness: None,
        note: lp_failed.then(|| "LP solver failure on some sign pattern".to_string()),
    }
}

fn column_rank(c: &DMatrix<f64>, cols: &[usize]) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let sub = DMatrix::from_fn(c.nrows(), cols.len(), |i, k| c[(i, cols[k])]);
    let sv = sub.singular_values();
    let top = sv.iter().fold(0.0_f64, |m, &s| m.max(s));
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * top).count()
}

fn dependent(c: &DMatrix<f64>, cols: &[usize]) -> bool {
    column_rank(c, cols) < cols.len()
}

/// Maximal index families whose common intersection has positive length.
///
/// Every fat intersection contains an elementary segment between consecutive
/// breakpoints, so the maximal families are the maximal segment families.
pub fn maximal_fat_families(sets: &[IntervalUnion]) -> Vec<Vec<usize>> {
    let mut pts: Vec<f64> = sets
        .iter()
        .flat_map(|s| s.intervals().iter().flat_map(|iv| [iv.lo, iv.hi]))
        .filter(|v| v.is_finite())
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut probes = Vec::new();
    match (pts.first(), pts.last()) {
        (Some(&lo), Some(&hi)) => {
            probes.push(lo - 1.0);
            probes.extend(pts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            probes.push(hi + 1.0);
        }
        _ => probes.push(0.0),
    }
    let mut families: Vec<Vec<usize>> = Vec::new();
    for x in probes {
        let fam: Vec<usize> = (0..sets.len()).filter(|&i| sets[i].contains(x)).collect();
        if !fam.is_empty() && !families.contains(&fam) {
            families.push(fam);
        }
    }
    let maximal: Vec<Vec<usize>> = families
        .iter()
        .filter(|f| {
            !families
                .iter()
                .any(|g| g.len() > f.len() && f.iter().all(|i| g.contains(i)))
        })
        .cloned()
        .collect();
    maximal
}

/// Uniqueness hypothesis on dependent columns of `C` over fat intersections.
pub fn check_h1(p: &ProblemInstance, graph: Option<&DirectedMultigraph>) -> H1Check {
    if let Some(g) = graph.filter(|g| g.edge_count() == p.dim()) {
        let cycles = g.undirected_cycles(DEFAULT_CYCLE_LIMIT);
        if !cycles.overflow {
            let violating = cycles.cycles.into_iter().find(|cyc| {
                let sets: Vec<&IntervalUnion> = cyc.iter().map(|&i| p.set(i)).collect();
                intersection_capacity_positive(&sets)
            });
            return H1Check {
                status: Status::from_bool(violating.is_none()),
                violating,
                method: H1Method::Cycles,
            };
        }
    }
    check_h1_columns(p)
}

/// Column-rank route: a dependent family with fat intersection exists iff
/// some maximal fat family has dependent columns.
pub fn check_h1_columns(p: &ProblemInstance) -> H1Check {
    let c = p.interaction().entries();
    for fam in maximal_fat_families(p.sets()) {
        if fam.len() >= 2 && dependent(c, &fam) {
            // shrink to a minimal dependent subset
            let mut set = fam.clone();
            let mut k = 0;
            while k < set.len() {
                let mut trial = set.clone();
                trial.remove(k);
                if trial.len() >= 2 && dependent(c, &trial) {
                    set = trial;
                } else {
                    k += 1;
                }
            }
            if set.len() == 1 {
                // a zero column: any fat pair containing it is dependent
                if let Some(&other) = fam.iter().find(|&&i| i != set[0]) {
                    set.push(other);
                    set.sort_unstable();
                }
            }
            return H1Check {
                status: Status::Fail,
                violating: Some(set),
                method: H1Method::Columns,
            };
        }
    }
    H1Check {
        status: Status::Pass,
        violating: None,
        method: H1Method::Columns,
    }
}

/// Orthonormal basis of `Ker(A)` (columns).
pub fn kernel_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, d) = a.shape();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad to at least d rows so the SVD returns a full right basis
    let rows = m.max(d);
    let padded = DMatrix::from_fn(rows, d, |i, j| if i < m { a[(i, j)] } else { 0.0 });
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^t");
    let top = svd.singular_values.iter().fold(0.0_f64, |s, &v| s.max(v));
    let null: Vec<usize> = (0..d)
        .filter(|&k| top == 0.0 || svd.singular_values[k] <= RANK_TOL * top)
        .collect();
    DMatrix::from_fn(d, null.len(), |i, k| v_t[(null[k], i)])
}

/// `Ker(A) ⊂ Ker(C)`.
pub fn check_image_ac(p: &ProblemInstance) -> ImageCheck {
    let a = p.masses().a_matrix();
    let c = p.interaction().entries();
    let basis = kernel_basis(&a);
    let scale = c.norm().max(f64::MIN_POSITIVE);
    for k in 0..basis.ncols() {
        let v = basis.column(k);
        if (c * v).norm() > 1e-9 * scale {
            return ImageCheck {
                status: Status::Fail,
                kernel_vector: Some(v.iter().copied().collect()),
            };
        }
    }
    ImageCheck {
        status: Status::Pass,
        kernel_vector: None,
    }
}

/// Growth at every infinite end of each set.
pub fn check_admissibility(p: &ProblemInstance) -> Vec<bool> {
    p.sets()
        .iter()
        .zip(p.fields())
        .map(|(s, q)| (!s.unbounded_above() || q.grows_toward(true)) && (!s.unbounded_below() || q.grows_toward(false)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KCheck {
    pub feasible: bool,
    pub compact: bool,
    pub point: Option<Vec<f64>>,
    pub recession: Option<Vec<f64>>,
}

pub fn check_k(p: &ProblemInstance) -> KCheck {
    let k = p.masses();
    KCheck {
        feasible: k.is_feasible(),
        compact: k.is_compact(),
        point: k.feasible_point().map(<[f64]>::to_vec),
        recession: k.recession_direction().map(<[f64]>::to_vec),
    }
}

/// Pairs of unbounded sets with a negative interaction entry; when empty the
/// supports of the minimizer are compact.
pub fn unbounded_negative_pairs(p: &ProblemInstance) -> Vec<(usize, usize)> {
    let d = p.dim();
    let mut out = Vec::new();
    for i in 0..d {
        for j in i..d {
            let unb = |k: usize| !p.set(k).is_bounded();
            if unb(i) && unb(j) && p.interaction().get(i, j) < 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExternalField, InteractionMatrix, MassPolyhedron};

    fn iu(a: f64, b: f64) -> IntervalUnion {
        IntervalUnion::interval(a, b).unwrap()
    }

    fn inst(sets: Vec<IntervalUnion>, c: &[Vec<f64>], k: MassPolyhedron) -> ProblemInstance {
        ProblemInstance::without_fields(sets, InteractionMatrix::from_rows(c).unwrap(), k).unwrap()
    }

    fn condenser() -> ProblemInstance {
        inst(
            vec![iu(-0.5, 0.0), iu(0.0, 0.5)],
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        )
    }

    fn condenser2() -> ProblemInstance {
        inst(
            vec![iu(-1.0, 1.0), iu(-0.5, 0.5)],
            &[vec![2.0, -1.0], vec![-1.0, 2.0]],
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        )
    }

    fn angelesco() -> ProblemInstance {
        inst(
            vec![iu(-1.0, 0.0), iu(0.0, 1.0)],
            &[vec![2.0, 1.0], vec![1.0, 2.0]],
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        )
    }

    #[test]
    fn compat_ns_cases() {
        assert_eq!(check_compat_ns(&condenser()).pairs, vec![(0, 1)]);
        assert_eq!(check_compat_ns(&angelesco()).status, Status::Pass);
        assert_eq!(check_compat_ns(&condenser2()).pairs, vec![(0, 1)]);
    }

    #[test]
    fn cij0_cases() {
        assert_eq!(check_cij0(&angelesco()).status, Status::Fail);
        assert_eq!(check_cij0(&condenser2()).status, Status::Fail);
        let nik = inst(
            vec![iu(-1.0, 0.0), iu(1.0, 2.0)],
            &[vec![2.0, -1.0], vec![-1.0, 2.0]],
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        );
        assert_eq!(check_cij0(&nik).status, Status::Pass);
    }

    #[test]
    fn h2_cases() {
        assert_eq!(check_h2(&condenser()).status, Status::Fail);
        let r = check_h2(&condenser2());
        assert_eq!(r.status, Status::Pass);
        let y = r.witness.unwrap();
        assert!(y[0] * y[1] > 0.0);
        // separated condenser plates: opposite signs allowed
        let sep = inst(
            vec![iu(-0.5, -0.25), iu(0.25, 0.5)],
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
        );
        assert_eq!(check_h2(&sep).status, Status::Pass);
    }

    #[test]
    fn h1_cases() {
        let ex0 = inst(
            vec![iu(-1.0, 1.0), iu(-1.0, 1.0)],
            &[vec![1.0, 1.0], vec![1.0, 1.0]],
            MassPolyhedron::simplex(2, 1.0).unwrap(),
        );
        let r = check_h1(&ex0, None);
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.violating, Some(vec![0, 1]));
        let ex1 = inst(
            vec![iu(-1.0, 1.0), iu(-1.0, 1.0)],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            MassPolyhedron::simplex(2, 1.0).unwrap(),
        );
        assert_eq!(check_h1(&ex1, None).status, Status::Pass);
    }

    #[test]
    fn h1_graph_route_av() {
        let g = DirectedMultigraph::from_one_indexed(3, &[(1, 3), (1, 2), (3, 2)]).unwrap();
        let c = g.interaction().unwrap();
        let a = g.incidence_rows();
        let rhs = vec![-2.0, 1.0, 1.0];
        let k = MassPolyhedron::new(a, rhs, 3).unwrap();
        // sets 1 and 2 only touch at a point
        let sets = vec![iu(-1.0, 0.0), iu(0.0, 1.0), iu(-1.0, 1.0)];
        let p = ProblemInstance::without_fields(sets, c, k).unwrap();
        let by_cycles = check_h1(&p, Some(&g));
        assert_eq!(by_cycles.method, H1Method::Cycles);
        assert_eq!(by_cycles.status, Status::Pass);
        assert_eq!(check_h1_columns(&p).status, Status::Pass);
        assert_eq!(check_h2(&p).status, Status::Pass);
    }

    #[test]
    fn image_ac_cases() {
        let ex2 = inst(
            vec![iu(-4.0, 4.0), iu(-4.0, 4.0)],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            MassPolyhedron::simplex(2, 1.0).unwrap(),
        );
        let r = check_image_ac(&ex2);
        assert_eq!(r.status, Status::Fail);
        let v = r.kernel_vector.unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[0].abs() - s).abs() < 1e-12 && (v[0] + v[1]).abs() < 1e-12);
        assert_eq!(check_image_ac(&condenser2()).status, Status::Pass);
    }

    #[test]
    fn admissibility_cases() {
        let c = InteractionMatrix::from_rows(&[vec![1.0]]).unwrap();
        let k = MassPolyhedron::fixed(&[1.0]).unwrap();
        let line = IntervalUnion::real_line();
        let mk = |s: IntervalUnion, q: ExternalField| {
            ProblemInstance::new(vec![s], c.clone(), vec![q], k.clone()).unwrap()
        };
        let quad = ExternalField::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(check_admissibility(&mk(line.clone(), quad)), vec![true]);
        assert_eq!(check_admissibility(&mk(iu(-1.0, 1.0), ExternalField::zero())), vec![true]);
        let log = ExternalField::new(vec![], 1.0).unwrap();
        assert_eq!(check_admissibility(&mk(line, log)), vec![false]);
    }

    #[test]
    fn positive_definite_with_singleton_k() {
        let r = AssumptionReport::check(&condenser2(), None);
        assert!(r.existence && r.uniqueness);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "compatNS", "H2", "H1", "imageAC", "cij0", "admissible", "K_compact", "K_feasible", "existence",
            "uniqueness",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn fat_families() {
        let fams = maximal_fat_families(&[iu(0.0, 2.0), iu(1.0, 3.0), iu(2.0, 4.0), iu(10.0, 11.0)]);
        assert!(fams.contains(&vec![0, 1]));
        assert!(fams.contains(&vec![1, 2]));
        assert!(fams.contains(&vec![3]));
        assert!(!fams.iter().any(|f| f == &vec![0, 1, 2]));
    }
}
