//! Structured triangulations of the rectangular cross section `[0, R] x [0, L]`.
//!
//! Node `(i, j)` sits at `r = R * i / n_r`, `z = L * j / n_z` and has index
//! `j * (n_r + 1) + i`. Every cell is split along its lower-left to
//! upper-right diagonal. Local edge `k` of a triangle joins local vertices
//! `k + 1` and `k + 2` (mod 3), i.e. it is the edge opposite vertex `k`.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Symmetry axis `r = 0`.
    Axis,
    /// Perfect electric conductor.
    PecWall,
}

#[derive(Clone, Debug)]
pub struct CrossSectionMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_triangles: Vec<Vec<usize>>,
    boundary_tags: BTreeMap<usize, BoundaryTag>,
    radius: f64,
    length: f64,
    subdivisions: usize,
    n_r: usize,
    n_z: usize,
}

impl CrossSectionMesh {
    /// Uniform mesh with `n` cells along the shorter side of the rectangle.
    pub fn build_structured(radius: f64, length: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!("length must be positive, got {length}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("subdivision count must be at least 1".into()));
        }
        let (n_r, n_z) = if radius <= length {
            (n, ((n as f64) * length / radius).round().max(1.0) as usize)
        } else {
            (((n as f64) * radius / length).round().max(1.0) as usize, n)
        };

        let mut nodes = Vec::with_capacity((n_r + 1) * (n_z + 1));
        for j in 0..=n_z {
            let z = if j == n_z { length } else { (j as f64 / n_z as f64) * length };
            for i in 0..=n_r {
                // i = 0 yields a literal 0.0, which keeps the axis tag exact.
                let r = if i == n_r { radius } else { (i as f64 / n_r as f64) * radius };
                nodes.push([r, z]);
            }
        }

        let id = |i: usize, j: usize| j * (n_r + 1) + i;
        let mut triangles = Vec::with_capacity(2 * n_r * n_z);
        for j in 0..n_z {
            for i in 0..n_r {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        let mut edge_index: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for t in &triangles {
            for k in 0..3 {
                let (p, q) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let key = [p.min(q), p.max(q)];
                let next = edge_index.len();
                edge_index.entry(key).or_insert(next);
            }
        }
        // Renumber edges in sorted (lo, hi) order for a run-independent layout.
        let mut edges: Vec<[usize; 2]> = edge_index.keys().copied().collect();
        edges.sort_unstable();
        let lookup: BTreeMap<[usize; 2], usize> = edges.iter().enumerate().map(|(e, &k)| (k, e)).collect();

        let mut triangle_edges = Vec::with_capacity(triangles.len());
        let mut edge_triangles = vec![Vec::new(); edges.len()];
        for (ti, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (p, q) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let e = lookup[&[p.min(q), p.max(q)]];
                te[k] = e;
                edge_triangles[e].push(ti);
            }
            triangle_edges.push(te);
        }

        let mut mesh = CrossSectionMesh {
            nodes,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary_tags: BTreeMap::new(),
            radius,
            length,
            subdivisions: n,
            n_r,
            n_z,
        };
        mesh.boundary_tags = mesh.classify_boundary()?;
        Ok(mesh)
    }

    /// Same rectangle with twice the subdivisions.
    pub fn refine(&self) -> Result<Self> {
        Self::build_structured(self.radius, self.length, 2 * self.subdivisions)
    }

    /// Tags every boundary edge as `Axis` (both endpoints at `r == 0.0`) or
    /// `PecWall`.
    pub fn classify_boundary(&self) -> Result<BTreeMap<usize, BoundaryTag>> {
        let axis_eps = 1e-12 * self.radius;
        let mut tags = BTreeMap::new();
        for (e, adj) in self.edge_triangles.iter().enumerate() {
            match adj.len() {
                1 => {}
                2 => continue,
                k => return Err(Error::InternalConsistency(format!("edge {e} is shared by {k} triangles"))),
            }
            let [a, b] = self.edges[e];
            let (ra, rb) = (self.nodes[a][0], self.nodes[b][0]);
            let tag = if ra == 0.0 && rb == 0.0 {
                BoundaryTag::Axis
            } else if (ra == 0.0 && rb.abs() < axis_eps) || (rb == 0.0 && ra.abs() < axis_eps) {
                return Err(Error::InternalConsistency(format!(
                    "boundary edge {e} lies on the axis but has a node off r = 0"
                )));
            } else {
                BoundaryTag::PecWall
            };
            tags.insert(e, tag);
        }
        Ok(tags)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of a triangle; entry `k` is the edge opposite local vertex `k`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn edge_triangles(&self, e: usize) -> &[usize] {
        &self.edge_triangles[e]
    }

    pub fn boundary_tags(&self) -> &BTreeMap<usize, BoundaryTag> {
        &self.boundary_tags
    }

    pub fn tag(&self, e: usize) -> Option<BoundaryTag> {
        self.boundary_tags.get(&e).copied()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    /// Cell counts along r and z.
    pub fn cells(&self) -> (usize, usize) {
        (self.n_r, self.n_z)
    }

    /// Radial cell width.
    pub fn h_r(&self) -> f64 {
        self.radius / self.n_r as f64
    }

    pub fn h_z(&self) -> f64 {
        self.length / self.n_z as f64
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area; positive for every triangle of a valid mesh.
    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Triangle containing `(r, z)`, found directly from the structured layout.
    pub fn locate(&self, r: f64, z: f64) -> Option<usize> {
        if !(0.0..=self.radius).contains(&r) || !(0.0..=self.length).contains(&z) {
            return None;
        }
        let i = ((r / self.h_r()) as usize).min(self.n_r - 1);
        let j = ((z / self.h_z()) as usize).min(self.n_z - 1);
        let cell = j * self.n_r + i;
        // Lower triangle holds points below the diagonal.
        let x = r / self.h_r() - i as f64;
        let y = z / self.h_z() - j as f64;
        Some(if y <= x { 2 * cell } else { 2 * cell + 1 })
    }

    /// Plain-text export: `nodes <n> triangles <t>`, then `r z` lines, then `i j k` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "nodes {} triangles {}", self.nodes.len(), self.triangles.len())?;
        for [r, z] in &self.nodes {
            writeln!(out, "{r:?} {z:?}")?;
        }
        for [a, b, c] in &self.triangles {
            writeln!(out, "{a} {b} {c}")?;
        }
        Ok(())
    }
}
