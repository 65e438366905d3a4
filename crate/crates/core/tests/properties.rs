mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symred::blockdiag::{block_diagonalize, check_block_diagonalization, TAU_BLK};
use symred::builders::{build_qap_relaxation, qap_lifted_point, QapInstance};
use symred::io::{parse_partition, write_partition};
use symred::reduce::{reduce, refines_further, ReduceOptions, CERT_TOL, DEFAULT_DIGITS};
use symred::reduced::lift;
use symred::{assemble_reduced, solve, BlockDiagonalization, ConicProblem, Partition, SolveOptions, Status, SymMatrix};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn reduce_seeded(prob: &ConicProblem, seed: u64) -> symred::reduce::Reduction {
    reduce(
        prob,
        &ReduceOptions {
            seed,
            ..ReduceOptions::default()
        },
    )
    .unwrap()
}

/// Optimal value through the reduction, or `None` when the solve does not
/// reach optimality.
fn reduced_objective(prob: &ConicProblem, p: &Partition, bd: &BlockDiagonalization) -> Option<(f64, Vec<f64>)> {
    let sol = solve(&assemble_reduced(prob, p, bd).unwrap(), &SolveOptions::default()).unwrap();
    (sol.status == Status::Optimal).then_some((sol.objective, sol.x))
}

fn permute(m: &SymMatrix, perm: &[usize]) -> SymMatrix {
    let trip: Vec<(usize, usize, f64)> = m.iter().map(|(i, j, v)| (perm[i], perm[j], v)).collect();
    SymMatrix::from_triplets(m.n(), &trip).unwrap()
}

fn permute_problem(prob: &ConicProblem, perm: &[usize]) -> ConicProblem {
    ConicProblem::new(
        prob.n(),
        prob.sense(),
        permute(prob.c(), perm),
        prob.rows().iter().map(|a| permute(a, perm)).collect(),
        prob.b().to_vec(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn reduction_output_is_certified_partition(problem_seed in 0u64..200, seed in 0u64..1000) {
        let prob = common::random_dnn_problem(problem_seed);
        let n = prob.n();
        let red = reduce_seeded(&prob, seed);
        let p = &red.partition;
        prop_assert!(red.certificate.admissible());
        prop_assert!(red.certificate.max_violation < CERT_TOL);
        prop_assert!(p.dim() <= n * (n + 1) / 2);
        // the labeling covers every cell once and is symmetric
        prop_assert_eq!(p.part_sizes().iter().sum::<usize>(), n * n);
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(p.label(i, j), p.label(j, i));
            }
        }
        prop_assert!(common::jordan_closed_exact(p));
        prop_assert!(!refines_further(&prob, p, DEFAULT_DIGITS, &mut rng(seed ^ 0xabc), 3).unwrap());
        prop_assert_eq!(parse_partition(&write_partition(p)).unwrap(), p.clone());
    }

    #[test]
    fn reduction_is_seed_independent(problem_seed in 0u64..200, s1 in 0u64..1000, s2 in 0u64..1000) {
        let prob = common::random_dnn_problem(problem_seed);
        let a = reduce_seeded(&prob, s1).partition;
        let b = reduce_seeded(&prob, s2).partition;
        prop_assert_eq!(a.null_part().is_some(), b.null_part().is_some());
        prop_assert!(common::same_up_to_renaming(prob.n(), |i, j| a.label(i, j), |i, j| b.label(i, j)));
    }

    #[test]
    fn qap_permutation_point_is_exactly_feasible(n in 3usize..=8, shift in 0usize..8) {
        let inst = QapInstance::new(SymMatrix::ones(n), SymMatrix::identity(n)).unwrap();
        let prob = build_qap_relaxation(&inst).unwrap();
        prop_assert_eq!(prob.m(), 2 * n + 2);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let y = qap_lifted_point(n, &perm);
        prop_assert_eq!(prob.residual(&y), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn reduced_and_unreduced_optima_agree(problem_seed in 0u64..1000) {
        let prob = common::random_dnn_problem(problem_seed);
        let red = reduce_seeded(&prob, 0);
        let d = Partition::discrete(prob.n());
        let full = reduced_objective(&prob, &d, &BlockDiagonalization::trivial(&d));
        prop_assume!(full.is_some());
        let (want, _) = full.unwrap();
        let bd = block_diagonalize(&red.partition, TAU_BLK, &mut rng(problem_seed), true).unwrap();
        let rep = check_block_diagonalization(&red.partition, &bd, 20, TAU_BLK, &mut rng(problem_seed + 1));
        prop_assert!(rep.passed, "{:?}", rep);
        let (got, x) = reduced_objective(&prob, &red.partition, &bd).expect("reduced solve is optimal");
        prop_assert!((got - want).abs() <= 1e-5 * want.abs().max(1.0), "{} vs {}", got, want);
        let lifted = lift(&red.partition, &x).unwrap();
        prop_assert!(lifted.iter().all(|&v| v >= -1e-6));
        prop_assert!(lifted.symmetric_eigenvalues().min() >= -1e-6);
    }

    #[test]
    fn optimum_is_invariant_under_vertex_renaming(problem_seed in 0u64..1000, rot in 1usize..6) {
        let prob = common::random_dnn_problem(problem_seed);
        let n = prob.n();
        let perm: Vec<usize> = (0..n).map(|i| (i * (2 * rot + 1) + rot) % n).collect();
        prop_assume!({
            let mut s = perm.clone();
            s.sort_unstable();
            s == (0..n).collect::<Vec<_>>()
        });
        let solve_reduced = |prob: &ConicProblem| {
            let red = reduce_seeded(prob, 7);
            let bd = block_diagonalize(&red.partition, TAU_BLK, &mut rng(3), true).unwrap();
            reduced_objective(prob, &red.partition, &bd).map(|(v, _)| v)
        };
        let a = solve_reduced(&prob);
        prop_assume!(a.is_some());
        let b = solve_reduced(&permute_problem(&prob, &perm)).expect("permuted solve is optimal");
        prop_assert!((a.unwrap() - b).abs() <= 1e-5 * b.abs().max(1.0));
    }
}
