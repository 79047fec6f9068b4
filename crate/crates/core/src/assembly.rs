//! Global stiffness and mass matrices for one azimuthal mode.
//!
//! Element matrices are computed in parallel and merged in element order, so
//! the assembled pencil is bit-identical from run to run. Essential
//! conditions are imposed by removing the constrained rows and columns.

use std::collections::BTreeSet;
use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fespace::{ElementGeometry, FeSpacePair};
use crate::formulation::{axis_conditions, inverse_substitute, weighted_dot, ModeProblem};
use crate::jet::{Jet2, VecJet};
use crate::mesh::BoundaryTag;
use crate::quadrature::QuadratureRule;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Square `n x n` matrix; duplicate entries are summed in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::InvalidParameter(format!("entry ({i}, {j}) outside {n} x {n}")));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix { n, row_ptr, cols, vals })
    }

    pub fn zeros(n: usize) -> Self {
        CsrMatrix { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    /// Largest `|A_ij - A_ji|` relative to the largest `|A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Keeps rows and columns listed in `keep` (old indices, ascending).
    pub fn submatrix(&self, keep: &[usize], full_to_sub: &[Option<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &i in keep {
            for (j, v) in self.row(i) {
                if let Some(jj) = full_to_sub[j] {
                    cols.push(jj);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n: keep.len(), row_ptr, cols, vals }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `self + s * other` in faer's column-major sparse format.
    pub fn to_faer_combined(&self, s: f64, other: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| Triplet::new(i, j, v)));
            if s != 0.0 {
                trip.extend(other.row(i).map(|(j, v)| Triplet::new(i, j, s * v)));
            }
        }
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| Error::InternalConsistency(format!("sparse conversion failed: {e:?}")))
    }

    /// One `i j value` line per stored entry, zero-based.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(out, "{i} {j} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Local matrices of one triangle in the combined dof numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementMatrices {
    pub dofs: Vec<usize>,
    /// Row-major, `dofs.len()` squared.
    pub k: Vec<f64>,
    pub m: Vec<f64>,
}

/// Stiffness and mass matrices of triangle `t`.
pub fn element_matrices(
    problem: &ModeProblem,
    pair: &FeSpacePair,
    rule: &QuadratureRule,
    t: usize,
) -> Result<ElementMatrices> {
    let mesh = pair.mesh();
    let geo = ElementGeometry::new(mesh.vertices(t))?;
    let dofs = pair.element_dofs(t);
    let nh1 = pair.h1.local_dim();
    let nd = dofs.len();
    let material = problem.materials.at(t);
    let n = problem.n;
    let tr = &problem.transformation;
    let mut k = vec![0.0; nd * nd];
    let mut m = vec![0.0; nd * nd];
    let mut curls = vec![[0.0; 3]; nd];
    let mut vals = vec![[0.0; 3]; nd];
    for ([r, z], w) in rule.mapped(&geo.vertices) {
        let phi = pair.h1.eval(t, &geo, r, z);
        let psi = pair.hcurl.eval(t, &geo, r, z);
        for a in 0..nd {
            let (u, v) = if a < nh1 { (phi[a], VecJet::ZERO) } else { (Jet2::ZERO, psi[a - nh1]) };
            let f = inverse_substitute(tr, n, r, u, v)?;
            curls[a] = f.curl_n(n, r)?;
            vals[a] = f.values();
        }
        let wr = w * r;
        for a in 0..nd {
            for b in a..nd {
                k[a * nd + b] += wr * weighted_dot(&material.mu_r_inv, &curls[a], &curls[b]);
                m[a * nd + b] += wr * weighted_dot(&material.eps_r, &vals[a], &vals[b]);
            }
        }
    }
    for a in 0..nd {
        for b in 0..a {
            k[a * nd + b] = k[b * nd + a];
            m[a * nd + b] = m[b * nd + a];
        }
    }
    Ok(ElementMatrices { dofs, k, m })
}

/// Unconstrained global matrices over all dofs of `pair`.
pub fn assemble_full(problem: &ModeProblem, pair: &FeSpacePair) -> Result<(CsrMatrix, CsrMatrix)> {
    problem.validate()?;
    if pair.h1.order() != problem.q || pair.hcurl.order() != problem.p {
        return Err(Error::InvalidParameter("space orders differ from the problem".into()));
    }
    let rule = QuadratureRule::for_degree(problem.quad_degree);
    let n_el = pair.mesh().triangles().len();
    let locals: Vec<ElementMatrices> =
        (0..n_el).into_par_iter().map(|t| element_matrices(problem, pair, &rule, t)).collect::<Result<_>>()?;
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for e in &locals {
        let nd = e.dofs.len();
        for a in 0..nd {
            for b in 0..nd {
                let (kv, mv) = (e.k[a * nd + b], e.m[a * nd + b]);
                if kv != 0.0 {
                    kt.push((e.dofs[a], e.dofs[b], kv));
                }
                if mv != 0.0 {
                    mt.push((e.dofs[a], e.dofs[b], mv));
                }
            }
        }
    }
    let n = pair.n_dofs();
    Ok((CsrMatrix::from_triplets(n, kt)?, CsrMatrix::from_triplets(n, mt)?))
}

/// Dofs fixed to zero by the wall, the axis conditions and (if requested)
/// the removal of the in-plane block.
pub fn essential_dofs(problem: &ModeProblem, pair: &FeSpacePair) -> Result<Vec<usize>> {
    let axis = axis_conditions(&problem.transformation, problem.n)?;
    let off = pair.hcurl_offset();
    let mut set = BTreeSet::new();
    for (&e, &tag) in pair.mesh().boundary_tags() {
        let (h1, hc) = match tag {
            BoundaryTag::PecWall => (true, true),
            BoundaryTag::Axis => (axis.h1_zero, axis.hcurl_tangential_zero),
        };
        if h1 {
            set.extend(pair.h1.trace_dofs(e));
        }
        if hc {
            set.extend(pair.hcurl.trace_dofs(e).into_iter().map(|d| d + off));
        }
    }
    if problem.azimuthal_only {
        set.extend(off..pair.n_dofs());
    }
    Ok(set.into_iter().collect())
}

/// Generalized pencil `(K, M)` over the free dofs.
#[derive(Clone, Debug)]
pub struct AssembledPencil {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub free_to_full: Vec<usize>,
    pub full_to_free: Vec<Option<usize>>,
    pub constrained: Vec<usize>,
    /// Number of H1 dofs before elimination; full indices below it are H1.
    pub n_h1_full: usize,
}

impl AssembledPencil {
    pub fn dim(&self) -> usize {
        self.free_to_full.len()
    }

    pub fn n_full(&self) -> usize {
        self.full_to_free.len()
    }

    /// Free H1 dofs; the rest of the free dofs are H(curl).
    pub fn n_free_h1(&self) -> usize {
        self.free_to_full.iter().filter(|&&d| d < self.n_h1_full).count()
    }

    /// Full-length vector with zeros at constrained dofs.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_full()];
        for (i, &d) in self.free_to_full.iter().enumerate() {
            full[d] = free[i];
        }
        full
    }

    /// Largest entry of the block coupling free H1 and H(curl) dofs in `K` and `M`.
    pub fn coupling_block_max(&self) -> f64 {
        let split = self.n_free_h1();
        let mut worst = 0.0f64;
        for mat in [&self.k, &self.m] {
            for i in 0..split {
                for (j, v) in mat.row(i) {
                    if j >= split {
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Removes the rows and columns of `constraints` from `(k, m)`.
pub fn apply_constraints(
    k: &CsrMatrix,
    m: &CsrMatrix,
    constraints: &[usize],
    n_h1_full: usize,
) -> Result<AssembledPencil> {
    let n = k.dim();
    if m.dim() != n {
        return Err(Error::InvalidParameter("stiffness and mass sizes differ".into()));
    }
    let mut fixed = vec![false; n];
    for &c in constraints {
        if c >= n {
            return Err(Error::Constraint(format!("dof {c} out of range (n = {n})")));
        }
        if fixed[c] {
            return Err(Error::Constraint(format!("dof {c} constrained twice")));
        }
        fixed[c] = true;
    }
    let free_to_full: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let mut full_to_free = vec![None; n];
    for (i, &d) in free_to_full.iter().enumerate() {
        full_to_free[d] = Some(i);
    }
    let mut constrained = constraints.to_vec();
    constrained.sort_unstable();
    Ok(AssembledPencil {
        k: k.submatrix(&free_to_full, &full_to_free),
        m: m.submatrix(&free_to_full, &full_to_free),
        free_to_full,
        full_to_free,
        constrained,
        n_h1_full,
    })
}

/// Assembles and constrains the pencil of `problem` on `pair`.
pub fn assemble(problem: &ModeProblem, pair: &FeSpacePair) -> Result<AssembledPencil> {
    let (k, m) = assemble_full(problem, pair)?;
    let fixed = essential_dofs(problem, pair)?;
    apply_constraints(&k, &m, &fixed, pair.h1.n_dofs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{Material, MaterialMap, Transformation};
    use crate::mesh::CrossSectionMesh;
    use std::sync::Arc;

    fn setup(n: i32, t: Transformation, q: u32, p: u32) -> (ModeProblem, FeSpacePair) {
        let mesh = Arc::new(CrossSectionMesh::build_structured(1.0, 1.0, 2).unwrap());
        let prob = ModeProblem::new(mesh.clone(), n, t, q, p).unwrap();
        let pair = FeSpacePair::new(mesh, q, p).unwrap();
        (prob, pair)
    }

    #[test]
    fn csr_sums_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 2.0), (0, 1, 0.5)]).unwrap();
        assert_eq!(a.get(0, 1), 1.5);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
        assert!(CsrMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn zero_inverse_permeability_gives_zero_stiffness() {
        let (prob, pair) = setup(1, Transformation::TB, 2, 1);
        let mat = Material { eps_r: [1.0; 3], mu_r_inv: [0.0; 3] };
        let prob = prob.with_materials(MaterialMap::uniform(mat)).unwrap();
        let (k, m) = assemble_full(&prob, &pair).unwrap();
        assert_eq!(k.nnz(), 0);
        assert!(m.nnz() > 0);
    }

    #[test]
    fn n0_blocks_decouple() {
        let (prob, pair) = setup(0, Transformation::TB, 2, 1);
        let pencil = assemble(&prob, &pair).unwrap();
        assert_eq!(pencil.coupling_block_max(), 0.0);
    }

    #[test]
    fn symmetric_and_mass_positive() {
        let (prob, pair) = setup(1, Transformation::tc(1.0, 1.0), 3, 2);
        let pencil = assemble(&prob, &pair).unwrap();
        assert!(pencil.k.symmetry_defect() < 1e-14);
        assert!(pencil.m.symmetry_defect() < 1e-14);
        let mut seed = 12345u64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..pencil.dim())
                .map(|_| {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            assert!(pencil.m.quadratic(&x, &x) > 0.0);
        }
    }

    #[test]
    fn constraint_bookkeeping() {
        let a = CsrMatrix::from_triplets(4, (0..4).map(|i| (i, i, 1.0 + i as f64)).collect()).unwrap();
        let p = apply_constraints(&a, &a, &[], 0).unwrap();
        assert_eq!(p.dim(), 4);
        assert_eq!(p.k, a);
        let p = apply_constraints(&a, &a, &[1, 3], 0).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.k.get(1, 1), 3.0);
        let full = p.expand(&[7.0, 8.0]);
        assert_eq!(full, vec![7.0, 0.0, 8.0, 0.0]);
        assert!(apply_constraints(&a, &a, &[1, 1], 0).is_err());
        assert!(apply_constraints(&a, &a, &[4], 0).is_err());
    }

    #[test]
    fn assembly_is_reproducible() {
        let (prob, pair) = setup(2, Transformation::TB, 3, 2);
        let a = assemble(&prob, &pair).unwrap();
        let b = assemble(&prob, &pair).unwrap();
        assert_eq!(a.k, b.k);
        assert_eq!(a.m, b.m);
    }

    #[test]
    fn coordinate_dump() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, -2.0)]).unwrap();
        let mut buf = Vec::new();
        a.write_coordinate(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.starts_with("0 0 1.0"));
    }
}
