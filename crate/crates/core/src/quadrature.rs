//! Quadrature on triangles with every point strictly inside the element.
//!
//! Low degrees use symmetric tabulated rules; anything above degree 5 uses a
//! collapsed (Duffy) tensor product of Gauss-Legendre rules, which has
//! `g * g` points and is exact for total degree `2g - 2`. No rule places a
//! point on an edge, so integrands carrying `1/r` are never evaluated on the
//! symmetry axis.

use std::f64::consts::PI;

/// Barycentric points and weights on the reference triangle (area 1/2).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    exactness_degree: u32,
}

impl QuadratureRule {
    /// Rule exact for all bivariate polynomials of total degree `<= degree`.
    pub fn for_degree(degree: u32) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2 => Self::three_point(),
            3..=5 => Self::seven_point(),
            _ => Self::collapsed(degree.div_ceil(2) as usize + 1),
        }
    }

    fn centroid() -> Self {
        QuadratureRule { points: vec![[1.0 / 3.0; 3]], weights: vec![0.5], exactness_degree: 1 }
    }

    fn three_point() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        QuadratureRule {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 6.0; 3],
            exactness_degree: 2,
        }
    }

    // Radon's degree-5 rule in closed form.
    fn seven_point() -> Self {
        let s = 15f64.sqrt();
        let a1 = (6.0 - s) / 21.0;
        let a2 = (6.0 + s) / 21.0;
        let w1 = (155.0 - s) / 2400.0;
        let w2 = (155.0 + s) / 2400.0;
        let b1 = 1.0 - 2.0 * a1;
        let b2 = 1.0 - 2.0 * a2;
        QuadratureRule {
            points: vec![
                [1.0 / 3.0; 3],
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ],
            weights: vec![9.0 / 80.0, w1, w1, w1, w2, w2, w2],
            exactness_degree: 5,
        }
    }

    /// `x = u`, `y = v (1 - u)` with Gauss-Legendre in `u` and `v`.
    fn collapsed(g: usize) -> Self {
        let (nodes, weights) = gauss_legendre_unit(g);
        let mut points = Vec::with_capacity(g * g);
        let mut w = Vec::with_capacity(g * g);
        for (&u, &wu) in nodes.iter().zip(&weights) {
            for (&v, &wv) in nodes.iter().zip(&weights) {
                let x = u;
                let y = v * (1.0 - u);
                points.push([(1.0 - u) * (1.0 - v), x, y]);
                w.push(wu * wv * (1.0 - u));
            }
        }
        QuadratureRule { points, weights: w, exactness_degree: (2 * g - 2) as u32 }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness_degree(&self) -> u32 {
        self.exactness_degree
    }

    /// Total number of points, `G`.
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Physical points and scaled weights on the triangle `v`.
    pub fn mapped(&self, v: &[[f64; 2]; 3]) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        let jac = jacobian_det(v).abs();
        let v = *v;
        self.points.iter().zip(&self.weights).map(move |(l, &w)| {
            let r = l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0];
            let z = l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1];
            ([r, z], w * jac)
        })
    }

    /// `sum_i w_i |J| f(x_i)` over the physical triangle.
    pub fn integrate<F, E>(&self, v: &[[f64; 2]; 3], mut f: F) -> Result<f64, E>
    where
        F: FnMut([f64; 2]) -> Result<f64, E>,
    {
        let mut acc = 0.0;
        for (x, w) in self.mapped(v) {
            acc += w * f(x)?;
        }
        Ok(acc)
    }
}

/// Twice the signed area of the triangle.
pub fn jacobian_det(v: &[[f64; 2]; 3]) -> f64 {
    (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(g: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(g);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(g: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; g];
    let mut weights = vec![0.0; g];
    for i in 0..g.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (g as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(g, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(g, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[g - 1 - i] = x;
        weights[i] = w;
        weights[g - 1 - i] = w;
    }
    if g % 2 == 1 {
        nodes[g / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
