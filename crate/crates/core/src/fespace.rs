//! Hierarchical H1 and full-order H(curl) spaces on triangles.
//!
//! Both spaces are written in barycentric coordinates. Edge functions use the
//! global edge orientation (lower node index first), which makes traces on a
//! shared edge identical from both sides.
//!
//! H1 of order `q`, per element:
//! - vertex functions `l_i`;
//! - edge functions `l_a l_b P_j(l_b - l_a)`, `j = 0..q-2`;
//! - bubbles `l_0 l_1 l_2 l_1^i l_2^k`, `i + k <= q - 3`.
//!
//! H(curl) of order `p` spans all vector polynomials of degree `<= p`:
//! - per edge the Whitney function `l_a grad l_b - l_b grad l_a` and the
//!   gradients of the H1 edge functions up to degree `p + 1` (`p + 1` dofs);
//! - interior functions `l_a l_b P_j(l_b - l_a) grad l_c` (`j <= p - 2`) and
//!   `b_T l_1^i l_2^k grad l_{1,2}` (`i + k <= p - 3`), all with zero
//!   tangential trace.

use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;

use crate::error::{Error, Result};
use crate::jet::{Jet2, VecJet};
use crate::mesh::CrossSectionMesh;

/// Affine barycentric coordinates of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub vertices: [[f64; 2]; 3],
    /// `l_i(r, z) = c_i + g_i . (r, z)`.
    constant: [f64; 3],
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Result<Self> {
        let [a, b, c] = vertices;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Domain("degenerate triangle".into()));
        }
        let mut grads = [[0.0; 2]; 3];
        let mut constant = [0.0; 3];
        for i in 0..3 {
            let p = vertices[(i + 1) % 3];
            let q = vertices[(i + 2) % 3];
            // l_i vanishes on the opposite edge p-q and equals 1 at vertex i.
            grads[i] = [(p[1] - q[1]) / det, (q[0] - p[0]) / det];
            constant[i] = (p[0] * q[1] - q[0] * p[1]) / det;
        }
        Ok(ElementGeometry { vertices, constant, grads })
    }

    pub fn barycentric(&self, r: f64, z: f64) -> [f64; 3] {
        std::array::from_fn(|i| self.constant[i] + self.grads[i][0] * r + self.grads[i][1] * z)
    }

    pub fn lambda_jets(&self, r: f64, z: f64) -> [Jet2; 3] {
        let l = self.barycentric(r, z);
        std::array::from_fn(|i| Jet2::affine(l[i], self.grads[i][0], self.grads[i][1]))
    }
}

/// Legendre polynomials `P_0..=P_k` of a jet argument.
fn legendre_jets(s: Jet2, k: usize) -> Vec<Jet2> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(Jet2::constant(1.0));
    if k >= 1 {
        out.push(s);
    }
    for m in 1..k {
        let next =
            (s * out[m]).scale((2 * m + 1) as f64 / (m + 1) as f64) - out[m - 1].scale(m as f64 / (m + 1) as f64);
        out.push(next);
    }
    out
}

/// Local endpoints `(a, b)` of edge `k`, ordered by global node index.
fn oriented_edge(tri: &[usize; 3], k: usize) -> (usize, usize) {
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    if tri[i] < tri[j] {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Clone, Debug)]
pub struct H1Space {
    mesh: Arc<CrossSectionMesh>,
    order: u32,
    n_dofs: usize,
}

impl H1Space {
    pub fn build(mesh: Arc<CrossSectionMesh>, order: u32) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidOrder { space: "H1", order });
        }
        let q = order as usize;
        let n_dofs = mesh.nodes().len() + mesh.edges().len() * (q - 1) + mesh.triangles().len() * Self::cell_count(q);
        Ok(H1Space { mesh, order, n_dofs })
    }

    fn cell_count(q: usize) -> usize {
        if q >= 3 {
            (q - 2) * (q - 1) / 2
        } else {
            0
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn mesh(&self) -> &Arc<CrossSectionMesh> {
        &self.mesh
    }

    pub fn local_dim(&self) -> usize {
        let q = self.order as usize;
        (q + 1) * (q + 2) / 2
    }

    fn edge_dof(&self, e: usize, j: usize) -> usize {
        self.mesh.nodes().len() + e * (self.order as usize - 1) + j
    }

    /// Global dofs of triangle `t` in local basis order.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        let q = self.order as usize;
        let tri = self.mesh.triangles()[t];
        let te = self.mesh.triangle_edges(t);
        let mut dofs = Vec::with_capacity(self.local_dim());
        dofs.extend_from_slice(&tri);
        for &e in &te {
            dofs.extend((0..q - 1).map(|j| self.edge_dof(e, j)));
        }
        let nc = Self::cell_count(q);
        let base = self.mesh.nodes().len() + self.mesh.edges().len() * (q - 1) + t * nc;
        dofs.extend(base..base + nc);
        dofs
    }

    /// Dofs whose functions have a nonzero trace on edge `e`.
    pub fn trace_dofs(&self, e: usize) -> Vec<usize> {
        let [a, b] = self.mesh.edges()[e];
        let mut d = vec![a, b];
        d.extend((0..self.order as usize - 1).map(|j| self.edge_dof(e, j)));
        d
    }

    /// Local basis jets of triangle `t` at `(r, z)`.
    pub fn eval(&self, t: usize, geo: &ElementGeometry, r: f64, z: f64) -> Vec<Jet2> {
        let tri = self.mesh.triangles()[t];
        h1_local_basis(self.order as usize, &tri, &geo.lambda_jets(r, z))
    }
}

pub(crate) fn h1_local_basis(q: usize, tri: &[usize; 3], l: &[Jet2; 3]) -> Vec<Jet2> {
    let mut out = Vec::with_capacity((q + 1) * (q + 2) / 2);
    out.extend_from_slice(l);
    if q >= 2 {
        for k in 0..3 {
            let (a, b) = oriented_edge(tri, k);
            let base = l[a] * l[b];
            for p in legendre_jets(l[b] - l[a], q - 2) {
                out.push(base * p);
            }
        }
    }
    if q >= 3 {
        let bubble = l[0] * l[1] * l[2];
        for total in 0..=(q - 3) {
            for i in 0..=total {
                out.push(bubble * pow_jet(l[1], total - i) * pow_jet(l[2], i));
            }
        }
    }
    out
}

fn pow_jet(x: Jet2, k: usize) -> Jet2 {
    (0..k).fold(Jet2::constant(1.0), |acc, _| acc * x)
}

#[derive(Clone, Debug)]
pub struct HCurlSpace {
    mesh: Arc<CrossSectionMesh>,
    order: u32,
    n_dofs: usize,
}

impl HCurlSpace {
    pub fn build(mesh: Arc<CrossSectionMesh>, order: u32) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidOrder { space: "H(curl)", order });
        }
        let p = order as usize;
        let n_dofs = mesh.edges().len() * (p + 1) + mesh.triangles().len() * Self::interior_count(p);
        Ok(HCurlSpace { mesh, order, n_dofs })
    }

    fn interior_count(p: usize) -> usize {
        (p + 1) * (p - 1)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn mesh(&self) -> &Arc<CrossSectionMesh> {
        &self.mesh
    }

    /// `(p + 1)(p + 2)`, the dimension of full degree-`p` vector polynomials.
    pub fn local_dim(&self) -> usize {
        let p = self.order as usize;
        (p + 1) * (p + 2)
    }

    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        let p = self.order as usize;
        let te = self.mesh.triangle_edges(t);
        let mut dofs = Vec::with_capacity(self.local_dim());
        for &e in &te {
            dofs.extend((0..=p).map(|m| e * (p + 1) + m));
        }
        let ni = Self::interior_count(p);
        let base = self.mesh.edges().len() * (p + 1) + t * ni;
        dofs.extend(base..base + ni);
        dofs
    }

    /// Dofs carrying the tangential trace on edge `e`.
    pub fn trace_dofs(&self, e: usize) -> Vec<usize> {
        let p = self.order as usize;
        (0..=p).map(|m| e * (p + 1) + m).collect()
    }

    pub fn eval(&self, t: usize, geo: &ElementGeometry, r: f64, z: f64) -> Vec<VecJet> {
        let tri = self.mesh.triangles()[t];
        hcurl_local_basis(self.order as usize, &tri, &geo.lambda_jets(r, z), &geo.grads)
    }
}

pub(crate) fn hcurl_local_basis(p: usize, tri: &[usize; 3], l: &[Jet2; 3], g: &[[f64; 2]; 3]) -> Vec<VecJet> {
    let mut out = Vec::with_capacity((p + 1) * (p + 2));
    for k in 0..3 {
        let (a, b) = oriented_edge(tri, k);
        out.push(l[a].times_vector(g[b]) - l[b].times_vector(g[a]));
        let base = l[a] * l[b];
        for poly in legendre_jets(l[b] - l[a], p - 1) {
            out.push((base * poly).grad());
        }
    }
    if p >= 2 {
        for (k, &gk) in g.iter().enumerate() {
            let (a, b) = oriented_edge(tri, k);
            let base = l[a] * l[b];
            for poly in legendre_jets(l[b] - l[a], p - 2) {
                out.push((base * poly).times_vector(gk));
            }
        }
    }
    if p >= 3 {
        let bubble = l[0] * l[1] * l[2];
        for total in 0..=(p - 3) {
            for i in 0..=total {
                let f = bubble * pow_jet(l[1], total - i) * pow_jet(l[2], i);
                out.push(f.times_vector(g[1]));
                out.push(f.times_vector(g[2]));
            }
        }
    }
    out
}

/// H1 block followed by the H(curl) block on one mesh.
#[derive(Clone, Debug)]
pub struct FeSpacePair {
    pub h1: H1Space,
    pub hcurl: HCurlSpace,
}

impl FeSpacePair {
    pub fn new(mesh: Arc<CrossSectionMesh>, q: u32, p: u32) -> Result<Self> {
        Ok(FeSpacePair { h1: H1Space::build(mesh.clone(), q)?, hcurl: HCurlSpace::build(mesh, p)? })
    }

    pub fn mesh(&self) -> &Arc<CrossSectionMesh> {
        self.h1.mesh()
    }

    pub fn n_dofs(&self) -> usize {
        self.h1.n_dofs() + self.hcurl.n_dofs()
    }

    pub fn h1_offset(&self) -> usize {
        0
    }

    pub fn hcurl_offset(&self) -> usize {
        self.h1.n_dofs()
    }

    /// Combined-numbering dofs of triangle `t`: H1 locals then H(curl) locals.
    pub fn element_dofs(&self, t: usize) -> Vec<usize> {
        let off = self.hcurl_offset();
        let mut d = self.h1.element_dofs(t);
        d.extend(self.hcurl.element_dofs(t).into_iter().map(|i| i + off));
        d
    }

    /// Evaluates a combined coefficient vector: azimuthal jet and in-plane jet.
    pub fn evaluate(&self, coeffs: &[f64], r: f64, z: f64) -> Result<(Jet2, VecJet)> {
        if coeffs.len() != self.n_dofs() {
            return Err(Error::InvalidParameter(format!(
                "coefficient vector has length {}, expected {}",
                coeffs.len(),
                self.n_dofs()
            )));
        }
        let mesh = self.mesh();
        let t = mesh.locate(r, z).ok_or_else(|| Error::Domain(format!("point ({r}, {z}) outside the mesh")))?;
        let geo = ElementGeometry::new(mesh.vertices(t))?;
        let mut u = Jet2::ZERO;
        for (phi, d) in self.h1.eval(t, &geo, r, z).iter().zip(self.h1.element_dofs(t)) {
            u = u + phi.scale(coeffs[d]);
        }
        let off = self.hcurl_offset();
        let mut w = VecJet::ZERO;
        for (psi, d) in self.hcurl.eval(t, &geo, r, z).iter().zip(self.hcurl.element_dofs(t)) {
            w = w + psi.scale(coeffs[off + d]);
        }
        Ok((u, w))
    }

    /// Largest residual of projecting each H1 basis gradient onto the local
    /// H(curl) space, sampled on a lattice of interior points per element.
    pub fn gradient_inclusion_check(&self) -> Result<f64> {
        let mesh = self.mesh();
        let q = self.h1.order() as usize;
        let p = self.hcurl.order() as usize;
        let samples = interior_lattice(q.max(p) + 3);
        let mut worst: f64 = 0.0;
        for t in 0..mesh.triangles().len() {
            let geo = ElementGeometry::new(mesh.vertices(t))?;
            let tri = mesh.triangles()[t];
            let nh = self.hcurl.local_dim();
            let nq = self.h1.local_dim();
            let mut a = Mat::<f64>::zeros(2 * samples.len(), nh);
            let mut b = Mat::<f64>::zeros(2 * samples.len(), nq);
            for (s, bary) in samples.iter().enumerate() {
                let x = bary_to_point(&geo.vertices, bary);
                let l = geo.lambda_jets(x[0], x[1]);
                let psi = hcurl_local_basis(p, &tri, &l, &geo.grads);
                let phi = h1_local_basis(q, &tri, &l);
                for (j, v) in psi.iter().enumerate() {
                    a[(2 * s, j)] = v.r.v;
                    a[(2 * s + 1, j)] = v.z.v;
                }
                for (j, f) in phi.iter().enumerate() {
                    b[(2 * s, j)] = f.dr;
                    b[(2 * s + 1, j)] = f.dz;
                }
            }
            let coef = a.qr().solve_lstsq(&b);
            let resid = &a * &coef - &b;
            for j in 0..nq {
                for i in 0..resid.nrows() {
                    worst = worst.max(resid[(i, j)].abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Barycentric lattice points with all coordinates strictly positive.
pub fn interior_lattice(k: usize) -> Vec<[f64; 3]> {
    let m = k + 3;
    let mut pts = Vec::new();
    for i in 1..m {
        for j in 1..(m - i) {
            let l1 = i as f64 / m as f64;
            let l2 = j as f64 / m as f64;
            pts.push([1.0 - l1 - l2, l1, l2]);
        }
    }
    pts
}

pub fn bary_to_point(v: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0], l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1]]
}
