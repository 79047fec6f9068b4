use std::sync::Arc;

use axicav::fespace::{bary_to_point, interior_lattice, ElementGeometry, FeSpacePair};
use axicav::mesh::CrossSectionMesh;
use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(n: usize, q: u32, p: u32) -> FeSpacePair {
    let mesh = Arc::new(CrossSectionMesh::build_structured(1.0, 1.5, n).unwrap());
    FeSpacePair::new(mesh, q, p).unwrap()
}

#[test]
fn traces_agree_across_interior_edges() {
    for (q, p) in [(2, 1), (3, 2), (4, 3)] {
        let sp = pair(3, q, p);
        let mesh = sp.mesh().clone();
        for e in 0..mesh.edges().len() {
            let tris = mesh.edge_triangles(e);
            if tris.len() != 2 {
                continue;
            }
            let [a, b] = mesh.edges()[e];
            let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
            let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
            for s in [0.13, 0.5, 0.77] {
                let x = [pa[0] + s * tangent[0], pa[1] + s * tangent[1]];
                let mut h1_vals = Vec::new();
                let mut hc_vals = Vec::new();
                for &t in tris {
                    let geo = ElementGeometry::new(mesh.vertices(t)).unwrap();
                    let phi = sp.h1.eval(t, &geo, x[0], x[1]);
                    let psi = sp.hcurl.eval(t, &geo, x[0], x[1]);
                    h1_vals.push(sp.h1.element_dofs(t).into_iter().zip(phi.iter().map(|f| f.v)).collect::<Vec<_>>());
                    hc_vals.push(
                        sp.hcurl
                            .element_dofs(t)
                            .into_iter()
                            .zip(psi.iter().map(|w| w.r.v * tangent[0] + w.z.v * tangent[1]))
                            .collect::<Vec<_>>(),
                    );
                }
                for vals in [&h1_vals, &hc_vals] {
                    for &(d, v) in &vals[0] {
                        let other = vals[1].iter().find(|x| x.0 == d).map(|x| x.1).unwrap_or(0.0);
                        assert!((v - other).abs() < 1e-12, "q={q} p={p} edge {e} dof {d}: {v} vs {other}");
                    }
                    for &(d, v) in &vals[1] {
                        if !vals[0].iter().any(|x| x.0 == d) {
                            assert!(v.abs() < 1e-12, "dof {d} one-sided trace {v}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn local_spaces_reproduce_complete_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (q, p) in [(1, 1), (2, 1), (3, 2), (4, 3), (5, 4)] {
        let sp = pair(2, q, p);
        let mesh = sp.mesh().clone();
        let t = 3;
        let geo = ElementGeometry::new(mesh.vertices(t)).unwrap();
        let pts = interior_lattice(q.max(p) as usize + 3);
        let cq: Vec<f64> = (0..(q + 1) * (q + 2) / 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cp: Vec<f64> = (0..(p + 1) * (p + 2)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let poly = |c: &[f64], deg: u32, x: [f64; 2]| {
            let mut k = 0;
            let mut s = 0.0;
            for i in 0..=deg {
                for j in 0..=(deg - i) {
                    s += c[k] * x[0].powi(i as i32) * x[1].powi(j as i32);
                    k += 1;
                }
            }
            s
        };
        let nh = sp.h1.local_dim();
        let nc = sp.hcurl.local_dim();
        let mut a1 = Mat::<f64>::zeros(pts.len(), nh);
        let mut b1 = Mat::<f64>::zeros(pts.len(), 1);
        let mut a2 = Mat::<f64>::zeros(2 * pts.len(), nc);
        let mut b2 = Mat::<f64>::zeros(2 * pts.len(), 1);
        let half = cp.len() / 2;
        for (s, l) in pts.iter().enumerate() {
            let x = bary_to_point(&geo.vertices, l);
            for (j, f) in sp.h1.eval(t, &geo, x[0], x[1]).iter().enumerate() {
                a1[(s, j)] = f.v;
            }
            b1[(s, 0)] = poly(&cq, q, x);
            for (j, w) in sp.hcurl.eval(t, &geo, x[0], x[1]).iter().enumerate() {
                a2[(2 * s, j)] = w.r.v;
                a2[(2 * s + 1, j)] = w.z.v;
            }
            b2[(2 * s, 0)] = poly(&cp[..half], p, x);
            b2[(2 * s + 1, 0)] = poly(&cp[half..], p, x);
        }
        for (a, b) in [(&a1, &b1), (&a2, &b2)] {
            let c = a.qr().solve_lstsq(b);
            let r = a * &c - b;
            let worst = (0..r.nrows()).map(|i| r[(i, 0)].abs()).fold(0.0, f64::max);
            assert!(worst < 1e-10, "q={q} p={p} residual {worst}");
            let sv = a.singular_values().unwrap();
            let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(smin > 1e-8, "q={q} p={p}: local basis is rank deficient");
        }
    }
}

#[test]
fn gradient_inclusion_for_matched_orders() {
    for (q, p) in [(2, 1), (3, 2), (4, 3)] {
        let r = pair(2, q, p).gradient_inclusion_check().unwrap();
        assert!(r < 1e-10, "q={q} p={p}: {r}");
    }
    assert!(pair(2, 3, 1).gradient_inclusion_check().unwrap() > 1e-3);
}

#[test]
fn global_dof_counts() {
    let sp = pair(2, 3, 2);
    let m = sp.mesh();
    let (v, e, t) = (m.nodes().len(), m.edges().len(), m.triangles().len());
    assert_eq!(sp.h1.n_dofs(), v + 2 * e + t);
    assert_eq!(sp.hcurl.n_dofs(), 3 * e + 3 * t);
    assert_eq!(sp.n_dofs(), sp.h1.n_dofs() + sp.hcurl.n_dofs());
    for t in 0..m.triangles().len() {
        let d = sp.element_dofs(t);
        assert_eq!(d.len(), sp.h1.local_dim() + sp.hcurl.local_dim());
        assert!(d.iter().all(|&i| i < sp.n_dofs()));
    }
}
