//! Lowest eigenpairs of the symmetric definite pencil `K x = lambda M x`.
//!
//! Small pencils are reduced with a Cholesky factor of `M` and solved densely.
//! Large ones use Lanczos on `(K - sigma M)^-1 M` in the `M` inner product
//! with full reorthogonalization. Eigenvalues below a relative threshold are
//! the discrete gradient kernel and are reported separately.

use std::fmt;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{AssembledPencil, CsrMatrix};
use crate::error::{Error, Result};

/// Relative factor of the kernel threshold `tau = KERNEL_RELATIVE * max(1, lambda_max)`.
pub const KERNEL_RELATIVE: f64 = 1e-8;
/// Largest accepted normalized residual for a returned pair.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Number of non-kernel pairs wanted; `None` asks for all (dense path only).
    pub count: Option<usize>,
    /// Pencils with fewer free dofs are solved densely.
    pub dense_threshold: usize,
    /// Shift for the iterative path.
    pub shift: Option<f64>,
    /// Ritz convergence tolerance relative to the transformed eigenvalue.
    pub tol: f64,
    pub max_krylov: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { count: Some(10), dense_threshold: 3000, shift: None, tol: 1e-11, max_krylov: 400, seed: 7 }
    }
}

impl SolveOptions {
    pub fn lowest(count: usize) -> Self {
        SolveOptions { count: Some(count), ..Default::default() }
    }

    pub fn all() -> Self {
        SolveOptions { count: None, dense_threshold: usize::MAX, ..Default::default() }
    }

    /// Shift from the first analytic eigenvalue of the target spectrum.
    pub fn with_hint(mut self, first_lambda: f64) -> Self {
        self.shift = Some(0.5 * first_lambda);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Dense,
    ShiftInvert { shift: f64, krylov_dim: usize },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Dense => f.write_str("dense"),
            Method::ShiftInvert { shift, krylov_dim } => write!(f, "shift-invert(sigma={shift:e}, m={krylov_dim})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Non-kernel eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// `M`-normalized eigenvectors over the free dofs.
    pub eigenvectors: Vec<Vec<f64>>,
    pub kernel_count: usize,
    pub kernel_threshold: f64,
    pub residuals: Vec<f64>,
    pub method: Method,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `omega / c0` for each eigenvalue.
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect()
    }
}

/// Kernel/physical split of a sorted raw spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSplit {
    pub kernel: Vec<f64>,
    pub physical: Vec<f64>,
    pub threshold: f64,
}

/// `lambda < tau` is kernel with `tau = 1e-8 * max(1, lambda_max)`.
pub fn filter_kernel(raw: &[f64]) -> KernelSplit {
    let lmax = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = KERNEL_RELATIVE * lmax.max(1.0);
    let (kernel, physical) = raw.iter().partition(|&&l| l < threshold);
    KernelSplit { kernel, physical, threshold }
}

/// Normalized residual `|Kx - lambda Mx| / (|Kx| + |lambda| |Mx|)`.
pub fn residual(k: &CsrMatrix, m: &CsrMatrix, lambda: f64, x: &[f64]) -> f64 {
    let kx = k.matvec(x);
    let mx = m.matvec(x);
    let num = kx.iter().zip(&mx).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
    let den = norm(&kx) + lambda.abs() * norm(&mx);
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve(pencil: &AssembledPencil, opts: &SolveOptions) -> Result<Spectrum> {
    solve_pencil(&pencil.k, &pencil.m, opts)
}

pub fn solve_pencil(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<Spectrum> {
    if k.dim() != m.dim() {
        return Err(Error::InvalidParameter("pencil matrices differ in size".into()));
    }
    if k.dim() == 0 {
        return Err(Error::InvalidParameter("empty pencil".into()));
    }
    if k.dim() < opts.dense_threshold || opts.count.is_none() {
        solve_dense(k, m, opts.count)
    } else {
        solve_shift_invert(k, m, opts)
    }
}

/// All eigenpairs of a dense symmetric definite pencil, ascending.
pub fn dense_eigenpairs(k: &Mat<f64>, m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let llt =
        m.llt(Side::Lower).map_err(|e| Error::IllConditionedMass(format!("Cholesky factorization failed: {e:?}")))?;
    let l = llt.L();
    let mut x = k.clone();
    l.solve_lower_triangular_in_place(&mut x);
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(&mut c);
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Iteration(format!("dense symmetric eigensolver failed: {e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|i| eig.S()[i]).collect();
    let mut vecs = eig.U().to_owned();
    l.transpose().solve_upper_triangular_in_place(&mut vecs);
    Ok((vals, vecs))
}

fn solve_dense(k: &CsrMatrix, m: &CsrMatrix, count: Option<usize>) -> Result<Spectrum> {
    let (vals, vecs) = dense_eigenpairs(&k.to_dense(), &m.to_dense())?;
    let split = filter_kernel(&vals);
    let first = split.kernel.len();
    let take = count.unwrap_or(usize::MAX).min(split.physical.len());
    let mut spec = Spectrum {
        eigenvalues: Vec::with_capacity(take),
        eigenvectors: Vec::with_capacity(take),
        kernel_count: split.kernel.len(),
        kernel_threshold: split.threshold,
        residuals: Vec::with_capacity(take),
        method: Method::Dense,
    };
    for i in first..first + take {
        let x: Vec<f64> = (0..vecs.nrows()).map(|r| vecs[(r, i)]).collect();
        spec.eigenvalues.push(vals[i]);
        spec.eigenvectors.push(x);
    }
    finish(k, m, spec)
}

fn finish(k: &CsrMatrix, m: &CsrMatrix, mut spec: Spectrum) -> Result<Spectrum> {
    spec.residuals = spec.eigenvalues.par_iter().zip(&spec.eigenvectors).map(|(&l, x)| residual(k, m, l, x)).collect();
    if let Some((i, r)) = spec.residuals.iter().enumerate().find(|(_, r)| !(**r <= RESIDUAL_LIMIT)) {
        return Err(Error::Iteration(format!(
            "eigenpair {i} (lambda = {:e}) has residual {r:e} > {RESIDUAL_LIMIT:e} ({})",
            spec.eigenvalues[i], spec.method
        )));
    }
    Ok(spec)
}

/// Shift used when no analytic hint is available.
pub fn fallback_shift(k: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let ratio = k
        .diagonal()
        .iter()
        .zip(m.diagonal())
        .filter(|(kd, md)| **kd > 0.0 && *md > 0.0)
        .map(|(kd, md)| kd / md)
        .fold(f64::INFINITY, f64::min);
    if ratio.is_finite() {
        1e-2 * ratio
    } else {
        1.0
    }
}

fn solve_shift_invert(k: &CsrMatrix, m: &CsrMatrix, opts: &SolveOptions) -> Result<Spectrum> {
    let n = k.dim();
    let count = opts.count.unwrap_or(n);
    let sigma = opts.shift.unwrap_or_else(|| fallback_shift(k, m));
    let shifted = k.to_faer_combined(-sigma, m)?;
    let lu =
        shifted.sp_lu().map_err(|e| Error::Iteration(format!("factorization of K - {sigma:e} M failed: {e:?}")))?;
    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let mx = m.matvec(x);
        let mut rhs = Mat::from_fn(n, 1, |i, _| mx[i]);
        lu.solve_in_place(rhs.as_mut());
        let out: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Iteration(format!("shift {sigma:e} is too close to an eigenvalue")));
        }
        Ok(out)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_dim = opts.max_krylov.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut next = random_unit(&mut rng, m, &basis, n)?;
    let min_dim = (2 * count + 20).min(max_dim);
    loop {
        let q = next;
        let mut w = apply(&q)?;
        let a = dot(&m.matvec(&q), &w);
        for (v, c) in w.iter_mut().zip(&q) {
            *v -= a * c;
        }
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            for (v, c) in w.iter_mut().zip(prev) {
                *v -= b * c;
            }
        }
        basis.push(q);
        alpha.push(a);
        reorthogonalize(&mut w, &basis, m);
        reorthogonalize(&mut w, &basis, m);
        let b = dot(&w, &m.matvec(&w)).max(0.0).sqrt();
        let j = basis.len();
        let check = j >= min_dim && (j.is_multiple_of(10) || j == max_dim);
        if check {
            if let Some(spec) = ritz(k, m, &basis, &alpha, &beta, b, sigma, count, opts.tol, j == n)? {
                return finish(k, m, spec);
            }
        }
        if j == max_dim {
            return Err(Error::Iteration(format!(
                "Lanczos did not converge {count} eigenpairs within {max_dim} vectors (shift {sigma:e})"
            )));
        }
        if b <= 1e-10 * a.abs().max(f64::MIN_POSITIVE) {
            beta.push(0.0);
            next = random_unit(&mut rng, m, &basis, n)?;
        } else {
            beta.push(b);
            next = w.iter().map(|v| v / b).collect();
        }
    }
}

fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>], m: &CsrMatrix) {
    let mw = m.matvec(w);
    let coef: Vec<f64> = basis.par_iter().map(|v| dot(v, &mw)).collect();
    w.par_iter_mut().enumerate().for_each(|(i, wi)| {
        let mut s = 0.0;
        for (v, c) in basis.iter().zip(&coef) {
            s += c * v[i];
        }
        *wi -= s;
    });
}

fn random_unit(rng: &mut ChaCha8Rng, m: &CsrMatrix, basis: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    for _ in 0..5 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        reorthogonalize(&mut v, basis, m);
        reorthogonalize(&mut v, basis, m);
        let nm = dot(&v, &m.matvec(&v)).max(0.0).sqrt();
        if nm > 1e-8 {
            return Ok(v.iter().map(|x| x / nm).collect());
        }
    }
    Err(Error::Iteration("could not extend the Krylov basis".into()))
}

#[allow(clippy::too_many_arguments)]
fn ritz(
    k: &CsrMatrix,
    m: &CsrMatrix,
    basis: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    b_last: f64,
    sigma: f64,
    count: usize,
    tol: f64,
    exhausted: bool,
) -> Result<Option<Spectrum>> {
    let j = basis.len();
    let t = Mat::from_fn(j, j, |r, c| {
        if r == c {
            alpha[r]
        } else if r == c + 1 {
            beta[c]
        } else if c == r + 1 {
            beta[r]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Iteration(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let mut pairs: Vec<(f64, usize, bool)> = Vec::with_capacity(j);
    for i in 0..j {
        let theta = eig.S()[i];
        if theta == 0.0 {
            continue;
        }
        let bound = (b_last * eig.U()[(j - 1, i)]).abs();
        let converged = exhausted || bound <= tol * theta.abs();
        pairs.push((sigma + 1.0 / theta, i, converged));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lmax = pairs.iter().filter(|p| p.2).map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let tau = KERNEL_RELATIVE * lmax.max(1.0);
    let kernel_count = pairs.iter().filter(|p| p.2 && p.0 < tau).count();
    let wanted: Vec<&(f64, usize, bool)> = pairs.iter().filter(|p| p.0 >= tau).take(count).collect();
    if !exhausted && (wanted.len() < count || wanted.iter().any(|p| !p.2)) {
        return Ok(None);
    }
    let n = k.dim();
    let mut spec = Spectrum {
        eigenvalues: Vec::new(),
        eigenvectors: Vec::new(),
        kernel_count,
        kernel_threshold: tau,
        residuals: Vec::new(),
        method: Method::ShiftInvert { shift: sigma, krylov_dim: j },
    };
    for &&(lambda, i, _) in &wanted {
        let mut x = vec![0.0; n];
        for (c, v) in basis.iter().enumerate() {
            let s = eig.U()[(c, i)];
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += s * vi;
            }
        }
        let nm = dot(&x, &m.matvec(&x)).sqrt();
        x.iter_mut().for_each(|v| *v /= nm);
        spec.eigenvalues.push(lambda);
        spec.eigenvectors.push(x);
    }
    Ok(Some(spec))
}
