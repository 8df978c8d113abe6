mod common;

use common::*;
use vector_equilibrium::discretize::{assemble, AssembleOptions};
use vector_equilibrium::solver::{feasible_start, linear_subproblem, solve, SolveOptions, StartRule, Variant};
use vector_equilibrium::{ExternalField, InteractionMatrix, MassPolyhedron, ProblemInstance};

fn ln2() -> f64 {
    2f64.ln()
}

#[test]
fn interval_energies() {
    let o = SolveOptions::default();
    let (_, r) = run(&scalar(-1.0, 1.0), vec![400], &o);
    assert!(r.converged);
    assert!((r.objective - ln2()).abs() < 1e-2);
    let (_, r) = run(&scalar(-4.0, 4.0), vec![400], &o);
    assert!((r.objective + ln2()).abs() < 1e-2);
}

#[test]
fn decoupled_simplex_lands_on_a_vertex() {
    let (_, r) = run(&decoupled_simplex(), vec![400, 400], &SolveOptions::default());
    assert!((r.objective + ln2()).abs() < 1e-2);
    let m = r.masses();
    assert!(m.iter().all(|&t| t.abs() < 1e-9 || (t - 1.0).abs() < 1e-9), "{m:?}");
}

#[test]
fn gradient_cases() {
    let p = ProblemInstance::new(
        vec![iu(-1.0, 1.0)],
        InteractionMatrix::from_rows(&[vec![1.0]]).unwrap(),
        vec![ExternalField::polynomial(vec![0.5, 0.0, 1.0]).unwrap()],
        MassPolyhedron::fixed(&[1.0]).unwrap(),
    )
    .unwrap();
    let dp = assemble(&p, &AssembleOptions::uniform(1, 10)).unwrap();
    let g = dp.gradient(&[0.0; 10]);
    for (gk, qk) in g.iter().zip(dp.field()) {
        assert_eq!(*gk, 2.0 * qk);
    }

    let one = assemble(&scalar(0.0, 0.5), &AssembleOptions::uniform(1, 1)).unwrap();
    let e11 = 1.5 - 0.5f64.ln();
    assert!((one.gradient(&[0.7])[0] - 2.0 * e11 * 0.7).abs() < 1e-15);

    let dp = assemble(&scalar(-1.0, 1.0), &AssembleOptions::uniform(1, 9)).unwrap();
    let w = [0.05, 0.1, 0.2, 0.05, 0.2, 0.05, 0.2, 0.1, 0.05];
    let g = dp.gradient(&w);
    for k in 0..9 {
        assert!((g[k] - g[8 - k]).abs() < 1e-12);
    }
}

#[test]
fn singleton_k_oracle_uses_block_minima() {
    let dp = assemble(&nested_nikishin(1.0, 0.5), &AssembleOptions::uniform(2, 5)).unwrap();
    let g = [3.0, 2.0, 1.0, 2.0, 3.0, -1.0, 0.0, 1.0, 2.0, -4.0];
    let v = linear_subproblem(&dp, &g).unwrap();
    assert_eq!(v.nodes, vec![2, 9]);
    assert_eq!(v.masses, vec![1.0, 0.5]);
}

#[test]
fn contracts_hold_on_coupled_instances() {
    for variant in [Variant::Vanilla, Variant::Away, Variant::Pairwise] {
        let opts = SolveOptions {
            variant,
            max_iters: 3000,
            ..Default::default()
        };
        for (p, n) in [(nested_nikishin(1.0, 0.7), vec![60, 40]), (condenser(3.0), vec![50, 50])] {
            let r = run(&p, n, &opts).1;
            assert!(r.history.windows(2).all(|h| h[1] <= h[0] + 1e-12));
            assert!(r.max_feasibility_residual <= 1e-10);
            assert!(r.min_gap >= -1e-10);
            if r.converged {
                assert!(r.gap <= opts.gap_tol * (1.0 + r.objective.abs()));
            }
        }
    }
}

#[test]
fn start_rules_reach_the_same_minimum() {
    let p = instance(
        vec![iu(-1.0, 0.0), iu(0.5, 2.0), iu(-3.0, -2.0)],
        &[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 0.5], vec![0.0, 0.5, 1.0]],
        MassPolyhedron::new(vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]], vec![1.0, 1.5], 3).unwrap(),
    );
    let dp = assemble(&p, &AssembleOptions::uniform(3, 40)).unwrap();
    let mut values = Vec::new();
    for start in [StartRule::Phase1, StartRule::VertexBarycenter] {
        let opts = SolveOptions {
            start,
            gap_tol: 1e-9,
            max_iters: 200_000,
            ..Default::default()
        };
        let t0 = feasible_start(&dp, start).unwrap();
        assert!(p.masses().contains(&t0.masses(), 1e-12));
        values.push(solve(&dp, &opts).unwrap().objective);
    }
    assert!((values[0] - values[1]).abs() < 1e-7, "{values:?}");
}

#[test]
fn lattice_oracle_on_tiny_instances() {
    let cases = [
        (scalar(0.0, 3.0), vec![4]),
        (condenser(4.0), vec![2, 3]),
        (
            instance(
                vec![iu(-1.0, 1.0), iu(-1.0, 1.0)],
                &[vec![1.0, 0.5], vec![0.5, 1.0]],
                MassPolyhedron::fixed(&[0.3, 1.2]).unwrap(),
            ),
            vec![3, 3],
        ),
    ];
    for (p, n) in cases {
        let dp = assemble(&p, &AssembleOptions::with_nodes(n)).unwrap();
        let r = solve(
            &dp,
            &SolveOptions {
                gap_tol: 1e-12,
                max_iters: 200_000,
                ..Default::default()
            },
        )
        .unwrap();
        let (brute, _) = lattice_minimum(&dp, p.masses().rhs());
        assert!((r.objective - brute).abs() < 1e-4, "{} vs {brute}", r.objective);
        assert!(r.objective <= brute + 1e-9);
    }
}

#[test]
fn relabeling_coupled_components() {
    let p = instance(
        vec![iu(0.0, 1.0), iu(2.0, 3.0), iu(4.0, 5.0)],
        &[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]],
        MassPolyhedron::simplex(3, 2.0).unwrap(),
    );
    let nodes = vec![50, 40, 30];
    let perm = [2, 0, 1];
    let q = p.permuted(&perm).unwrap();
    let opts = SolveOptions {
        gap_tol: 1e-10,
        max_iters: 100_000,
        ..Default::default()
    };
    let (_, a) = run(&p, nodes.clone(), &opts);
    let (_, b) = run(&q, perm.iter().map(|&i| nodes[i]).collect(), &opts);
    assert!((a.objective - b.objective).abs() < 1e-12);
    for (k, &i) in perm.iter().enumerate() {
        assert!(l1(b.weights.block(k), a.weights.block(i)) < 1e-6);
    }
}

#[test]
fn seeded_runs_are_deterministic() {
    let opts = SolveOptions {
        seed: Some(11),
        ..Default::default()
    };
    let (_, a) = run(&decoupled_simplex(), vec![64, 64], &opts);
    let (_, b) = run(&decoupled_simplex(), vec![64, 64], &opts);
    assert_eq!(a.weights.weights(), b.weights.weights());
    assert_eq!(a.history, b.history);
}
