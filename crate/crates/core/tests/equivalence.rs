use std::sync::Arc;

use axicav::assembly::assemble_full;
use axicav::fespace::FeSpacePair;
use axicav::formulation::{mass_integrand, stiffness_integrand, Material, ModeProblem, Transformation};
use axicav::mesh::CrossSectionMesh;
use axicav::quadrature::QuadratureRule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::Field;

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn transformed_forms_reproduce_physical_energies() {
    let mesh = CrossSectionMesh::build_structured(1.0, 1.0, 4).unwrap();
    let rule = QuadratureRule::for_degree(10);
    let triangles: Vec<usize> =
        (0..mesh.triangles().len()).filter(|&t| mesh.vertices(t).iter().all(|v| v[0] >= 0.5)).collect();
    assert!(!triangles.is_empty());
    let mat = Material::VACUUM;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases: Vec<(i32, Vec<Transformation>)> = vec![
        (1, vec![Transformation::TA, Transformation::TB, Transformation::tc(1.0, 1.0), Transformation::tc(0.5, 1.0)]),
        (
            2,
            vec![
                Transformation::TA,
                Transformation::TB,
                Transformation::TD,
                Transformation::tc(1.0, 1.0),
                Transformation::tc(2.0, 2.0),
            ],
        ),
        (-2, vec![Transformation::TB, Transformation::TD, Transformation::tc(1.0, 2.0)]),
    ];
    for _ in 0..100 {
        let a = Field::random(&mut rng);
        let b = Field::random(&mut rng);
        for (n, ts) in &cases {
            let mut k_ref = 0.0;
            let mut m_ref = 0.0;
            for &t in &triangles {
                for ([r, z], w) in rule.mapped(&mesh.vertices(t)) {
                    k_ref += w * r * dot(&a.curl(*n, r, z), &b.curl(*n, r, z));
                    let (ja, jb) = (a.jets(r, z), b.jets(r, z));
                    m_ref += w * r * (ja[0].v * jb[0].v + ja[1].v * jb[1].v + ja[2].v * jb[2].v);
                }
            }
            for tr in ts {
                let mut k = 0.0;
                let mut m = 0.0;
                for &t in &triangles {
                    for ([r, z], w) in rule.mapped(&mesh.vertices(t)) {
                        let fa = a.forward(tr, *n, r, z);
                        let fb = b.forward(tr, *n, r, z);
                        k += w * stiffness_integrand(tr, *n, &mat, r, fa, fb).unwrap();
                        m += w * mass_integrand(tr, *n, &mat, r, fa, fb).unwrap();
                    }
                }
                assert!(close(k, k_ref, 1e-10), "{tr} n={n}: stiffness {k} vs {k_ref}");
                assert!(close(m, m_ref, 1e-10), "{tr} n={n}: mass {m} vs {m_ref}");
            }
        }
    }
}

#[test]
fn assembled_forms_match_direct_quadrature() {
    let mesh = Arc::new(CrossSectionMesh::build_structured(1.0, 1.2, 2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (n, tr) in
        [(1, Transformation::TB), (1, Transformation::tc(1.0, 1.0)), (2, Transformation::TD), (0, Transformation::TA)]
    {
        let problem = ModeProblem::new(mesh.clone(), n, tr, 3, 2).unwrap().with_quad_degree(12);
        let pair = FeSpacePair::new(mesh.clone(), 3, 2).unwrap();
        let (k, m) = assemble_full(&problem, &pair).unwrap();
        let x: Vec<f64> = (0..pair.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..pair.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rule = QuadratureRule::for_degree(12);
        let mut kd = 0.0;
        let mut md = 0.0;
        for t in 0..mesh.triangles().len() {
            for ([r, z], w) in rule.mapped(&mesh.vertices(t)) {
                let fx = pair.evaluate(&x, r, z).unwrap();
                let fy = pair.evaluate(&y, r, z).unwrap();
                kd += w * stiffness_integrand(&tr, n, &Material::VACUUM, r, fx, fy).unwrap();
                md += w * mass_integrand(&tr, n, &Material::VACUUM, r, fx, fy).unwrap();
            }
        }
        let (ka, ma) = (k.quadratic(&x, &y), m.quadratic(&x, &y));
        assert!(close(ka, kd, 1e-12), "{tr} n={n}: {ka} vs {kd}");
        assert!(close(ma, md, 1e-12), "{tr} n={n}: {ma} vs {md}");
        assert!(k.symmetry_defect() < 1e-13 && m.symmetry_defect() < 1e-13);
    }
}
