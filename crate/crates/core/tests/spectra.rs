use std::sync::Arc;

use axicav::analytic::lowest_modes;
use axicav::assembly::{assemble, CsrMatrix};
use axicav::eigen::{residual, solve, solve_pencil, Method, SolveOptions, RESIDUAL_LIMIT};
use axicav::fespace::FeSpacePair;
use axicav::formulation::{ModeProblem, Transformation};
use axicav::mesh::CrossSectionMesh;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pencil(n_sub: usize, n: i32, t: Transformation, q: u32, p: u32) -> axicav::assembly::AssembledPencil {
    let mesh = Arc::new(CrossSectionMesh::build_structured(1.0, 1.0, n_sub).unwrap());
    let problem = ModeProblem::new(mesh.clone(), n, t, q, p).unwrap();
    let pair = FeSpacePair::new(mesh, q, p).unwrap();
    assemble(&problem, &pair).unwrap()
}

#[test]
fn kernel_matches_free_scalar_dofs() {
    for (n, t) in [
        (1, Transformation::TB),
        (1, Transformation::tc(1.0, 1.0)),
        (2, Transformation::TB),
        (-2, Transformation::TB),
        (3, Transformation::tc(1.0, 2.0)),
    ] {
        for (q, p) in [(2, 1), (3, 2)] {
            let pc = pencil(2, n, t, q, p);
            let s = solve(&pc, &SolveOptions::all()).unwrap();
            assert_eq!(s.kernel_count, pc.n_free_h1(), "{t} n={n} q={q} p={p}");
            assert_eq!(s.kernel_count + s.len(), pc.dim());
            assert!(s.residuals.iter().all(|&r| r <= RESIDUAL_LIMIT));
        }
    }
}

#[test]
fn azimuthal_block_has_no_kernel() {
    let mesh = Arc::new(CrossSectionMesh::build_structured(1.0, 1.0, 3).unwrap());
    let problem = ModeProblem::new(mesh.clone(), 0, Transformation::TB, 3, 1).unwrap().azimuthal_only().unwrap();
    let pair = FeSpacePair::new(mesh, 3, 1).unwrap();
    let pc = assemble(&problem, &pair).unwrap();
    assert_eq!(pc.dim(), pc.n_free_h1());
    let s = solve(&pc, &SolveOptions::all()).unwrap();
    assert_eq!(s.kernel_count, 0);
    let te011 = lowest_modes(1.0, 1.0, 0, 20).unwrap().into_iter().find(|m| m.id() == "TE011").unwrap();
    assert!((s.eigenvalues[0] / te011.lambda() - 1.0).abs() < 1e-2);
}

fn permuted(a: &CsrMatrix, perm: &[usize]) -> CsrMatrix {
    let mut trip = Vec::new();
    for i in 0..a.dim() {
        for (j, v) in a.row(i) {
            trip.push((perm[i], perm[j], v));
        }
    }
    CsrMatrix::from_triplets(a.dim(), trip).unwrap()
}

#[test]
fn spectrum_is_invariant_under_dof_permutation() {
    let pc = pencil(2, 1, Transformation::TB, 3, 2);
    let base = solve(&pc, &SolveOptions::all()).unwrap();
    let mut perm: Vec<usize> = (0..pc.dim()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let s = solve_pencil(&permuted(&pc.k, &perm), &permuted(&pc.m, &perm), &SolveOptions::all()).unwrap();
    assert_eq!(s.kernel_count, base.kernel_count);
    for (a, b) in s.eigenvalues.iter().zip(&base.eigenvalues) {
        assert!((a - b).abs() <= 1e-10 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn iterative_and_dense_paths_agree() {
    let pc = pencil(4, 1, Transformation::tc(1.0, 1.0), 3, 2);
    let dense = solve(&pc, &SolveOptions::all()).unwrap();
    let hint = lowest_modes(1.0, 1.0, 1, 1).unwrap()[0].lambda();
    let opts = SolveOptions { dense_threshold: 0, ..SolveOptions::lowest(10).with_hint(hint) };
    let it = solve(&pc, &opts).unwrap();
    assert!(matches!(it.method, Method::ShiftInvert { .. }));
    assert!(it.len() >= 10);
    for (a, b) in it.eigenvalues.iter().take(10).zip(&dense.eigenvalues) {
        assert!((a - b).abs() <= 1e-9 * b, "{a} vs {b}");
    }
    for (l, x) in it.eigenvalues.iter().zip(&it.eigenvectors) {
        assert!(residual(&pc.k, &pc.m, *l, x) <= RESIDUAL_LIMIT);
        let mx = pc.m.quadratic(x, x);
        assert!((mx - 1.0).abs() < 1e-8);
    }
}
