#![allow(dead_code)]

use vector_equilibrium::discretize::{assemble, AssembleOptions};
use vector_equilibrium::solver::{solve, SolveOptions, SolveResult};
use vector_equilibrium::{DiscreteProblem, InteractionMatrix, IntervalUnion, MassPolyhedron, ProblemInstance};

pub fn iu(a: f64, b: f64) -> IntervalUnion {
    IntervalUnion::interval(a, b).unwrap()
}

pub fn instance(sets: Vec<IntervalUnion>, c: &[Vec<f64>], k: MassPolyhedron) -> ProblemInstance {
    ProblemInstance::without_fields(sets, InteractionMatrix::from_rows(c).unwrap(), k).unwrap()
}

pub fn scalar(a: f64, b: f64) -> ProblemInstance {
    instance(vec![iu(a, b)], &[vec![1.0]], MassPolyhedron::fixed(&[1.0]).unwrap())
}

/// Plates `[-1/2, -1/n]` and `[1/n, 1/2]` with opposite unit charges.
pub fn condenser(n: f64) -> ProblemInstance {
    instance(
        vec![iu(-0.5, -1.0 / n), iu(1.0 / n, 0.5)],
        &[vec![1.0, -1.0], vec![-1.0, 1.0]],
        MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
    )
}

/// Touching plates: the condenser energy is not attained.
pub fn touching_condenser() -> ProblemInstance {
    instance(
        vec![iu(-0.5, 0.0), iu(0.0, 0.5)],
        &[vec![1.0, -1.0], vec![-1.0, 1.0]],
        MassPolyhedron::fixed(&[1.0, 1.0]).unwrap(),
    )
}

pub fn nested_nikishin(a1: f64, a2: f64) -> ProblemInstance {
    instance(
        vec![iu(-1.0, 1.0), iu(-0.5, 0.5)],
        &[vec![2.0, -1.0], vec![-1.0, 2.0]],
        MassPolyhedron::fixed(&[a1, a2]).unwrap(),
    )
}

pub fn rank_one_pair() -> ProblemInstance {
    instance(
        vec![iu(-1.0, 1.0), iu(-1.0, 1.0)],
        &[vec![1.0, 1.0], vec![1.0, 1.0]],
        MassPolyhedron::simplex(2, 2.0).unwrap(),
    )
}

pub fn decoupled_simplex() -> ProblemInstance {
    instance(
        vec![iu(-4.0, 4.0), iu(-4.0, 4.0)],
        &[vec![1.0, 0.0], vec![0.0, 1.0]],
        MassPolyhedron::simplex(2, 1.0).unwrap(),
    )
}

pub fn run(p: &ProblemInstance, nodes: Vec<usize>, opts: &SolveOptions) -> (DiscreteProblem, SolveResult) {
    let dp = assemble(p, &AssembleOptions::with_nodes(nodes)).unwrap();
    let r = solve(&dp, opts).unwrap();
    (dp, r)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn compositions(m: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in compositions(m - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Minimum of the discrete objective over `{w >= 0 : block sums = masses}` by
/// exhaustive search on a lattice, refined by exhaustive searches on ever
/// finer local lattices around the incumbent. Meant for at most 6 nodes.
pub fn lattice_minimum(dp: &DiscreteProblem, masses: &[f64]) -> (f64, Vec<f64>) {
    let sizes: Vec<usize> = (0..dp.dim()).map(|i| dp.block(i).len()).collect();
    let free: usize = sizes.iter().map(|n| n - 1).sum();
    assert!(free <= 5, "lattice search is exhaustive; keep it small");
    let assemble_w = |blocks: &[Vec<f64>]| -> Vec<f64> { blocks.concat() };

    // coarse level: every lattice point of the product of simplices
    let m = [0, 400, 60, 24, 12, 8][free.max(1)];
    let per_block: Vec<Vec<Vec<f64>>> = sizes
        .iter()
        .zip(masses)
        .map(|(&n, &t)| {
            compositions(m, n)
                .into_iter()
                .map(|c| c.iter().map(|&x| t * x as f64 / m as f64).collect())
                .collect()
        })
        .collect();
    let mut best = (f64::INFINITY, Vec::new());
    let mut idx = vec![0usize; sizes.len()];
    loop {
        let blocks: Vec<Vec<f64>> = idx.iter().enumerate().map(|(i, &k)| per_block[i][k].clone()).collect();
        let w = assemble_w(&blocks);
        let f = dp.objective(&w);
        if f < best.0 {
            best = (f, w);
        }
        let mut b = 0;
        while b < idx.len() {
            idx[b] += 1;
            if idx[b] < per_block[b].len() {
                break;
            }
            idx[b] = 0;
            b += 1;
        }
        if b == idx.len() {
            break;
        }
    }

    // local refinement on finer lattices
    let free_pos: Vec<usize> = {
        let mut v = Vec::new();
        let mut off = 0;
        for &n in &sizes {
            v.extend(off..off + n - 1);
            off += n;
        }
        v
    };
    let tmax = masses.iter().copied().fold(0.0, f64::max);
    let mut h = tmax / m as f64;
    const R: i64 = 4;
    while h > 1e-9 * tmax.max(1.0) {
        h /= R as f64;
        let center = best.1.clone();
        let mut off = vec![-R; free];
        loop {
            let mut w = center.clone();
            for (p, &o) in free_pos.iter().zip(&off) {
                w[*p] += o as f64 * h;
            }
            // last node of each block absorbs the rest of the block mass
            let mut start = 0;
            let mut ok = true;
            for (&n, &t) in sizes.iter().zip(masses) {
                let s: f64 = w[start..start + n - 1].iter().sum();
                w[start + n - 1] = t - s;
                ok &= w[start..start + n].iter().all(|&x| x >= 0.0);
                start += n;
            }
            if ok {
                let f = dp.objective(&w);
                if f < best.0 {
                    best = (f, w);
                }
            }
            let mut b = 0;
            while b < free {
                off[b] += 1;
                if off[b] <= R {
                    break;
                }
                off[b] = -R;
                b += 1;
            }
            if b == free {
                break;
            }
        }
    }
    best
}
