//! The four axis transformations and the mode-`n` variational form.
//!
//! Every transformation is expressed as an inverse substitution from the
//! transformed pair `(u, U)` (H1 and H(curl) unknowns) to the physical
//! Fourier coefficients `(e_r, e_phi, e_z)`. Stiffness and mass integrands are
//! then built from `curl_n` of the physical field, so no transformation has
//! its own hand-expanded bilinear form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet1, Jet2, VecJet};
use crate::mesh::CrossSectionMesh;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcParams {
    pub alpha: f64,
    pub beta: f64,
}

impl TcParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        TcParams { alpha, beta }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transformation {
    /// `e*_phi = r e_phi` and `e_rz` taken as unknowns directly.
    TA,
    TB,
    TC(TcParams),
    TD,
}

impl Transformation {
    pub fn tc(alpha: f64, beta: f64) -> Self {
        Transformation::TC(TcParams::new(alpha, beta))
    }

    pub fn params(&self) -> Option<TcParams> {
        match self {
            Transformation::TC(p) => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transformation::TA => f.write_str("TA"),
            Transformation::TB => f.write_str("TB"),
            Transformation::TD => f.write_str("TD"),
            Transformation::TC(p) => write!(f, "TC({},{})", p.alpha, p.beta),
        }
    }
}

impl FromStr for Transformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_uppercase().as_str() {
            "TA" => return Ok(Transformation::TA),
            "TB" => return Ok(Transformation::TB),
            "TD" => return Ok(Transformation::TD),
            _ => {}
        }
        let inner = s
            .strip_prefix("TC(")
            .or_else(|| s.strip_prefix("tc("))
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown transformation '{s}'")))?;
        let mut parts = inner.split(',').map(|x| x.trim().parse::<f64>());
        match (parts.next(), parts.next(), parts.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok(Transformation::tc(a, b)),
            _ => Err(Error::Config(format!("malformed TC parameters in '{s}'"))),
        }
    }
}

/// Verdict of the admissibility check on `(alpha, beta)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TcVerdict {
    Ok,
    Violation(String),
}

impl TcVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, TcVerdict::Ok)
    }
}

/// Admissible `(alpha, beta)` for mode `n`.
pub fn validate_tc(n: i32, alpha: f64, beta: f64) -> TcVerdict {
    if !alpha.is_finite() || !beta.is_finite() {
        return TcVerdict::Violation("parameters must be finite".into());
    }
    match n.unsigned_abs() {
        0 if beta >= 0.5 => TcVerdict::Ok,
        0 => TcVerdict::Violation("n = 0 requires beta >= 0.5".into()),
        1 if alpha >= 0.5 && beta == 1.0 => TcVerdict::Ok,
        1 => TcVerdict::Violation("n = +-1 requires alpha >= 0.5 and beta = 1".into()),
        _ if alpha >= 0.5 && beta > 0.0 => TcVerdict::Ok,
        _ => TcVerdict::Violation("|n| > 1 requires alpha >= 0.5 and beta > 0".into()),
    }
}

/// Fails for TC parameters that are not admissible at mode `n`.
pub fn check_transformation(t: &Transformation, n: i32) -> Result<()> {
    if let Transformation::TC(p) = t {
        if let TcVerdict::Violation(reason) = validate_tc(n, p.alpha, p.beta) {
            return Err(Error::TcViolation { n, alpha: p.alpha, beta: p.beta, reason });
        }
    }
    Ok(())
}

/// Arguments of `curl_n` at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct CurlInputs {
    pub r: f64,
    pub e_r: f64,
    pub e_phi: f64,
    pub e_z: f64,
    pub dz_e_r: f64,
    pub dr_e_z: f64,
    /// `d/dr (r e_phi)`
    pub dr_r_e_phi: f64,
    /// `d/dz (r e_phi)`
    pub dz_r_e_phi: f64,
}

/// Mode-`n` curl in `(r, phi, z)` components.
pub fn curl_n(n: i32, c: &CurlInputs) -> Result<[f64; 3]> {
    if !(c.r > 0.0) {
        return Err(Error::Domain(format!("curl_n evaluated at r = {}", c.r)));
    }
    let n = n as f64;
    Ok([-(n * c.e_z + c.dz_r_e_phi) / c.r, c.dz_e_r - c.dr_e_z, (n * c.e_r + c.dr_r_e_phi) / c.r])
}

/// Physical Fourier coefficients with the derivatives `curl_n` needs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhysicalField {
    pub e_r: Jet1,
    pub e_phi: f64,
    pub e_z: Jet1,
    pub r_e_phi: Jet1,
}

impl PhysicalField {
    pub fn values(&self) -> [f64; 3] {
        [self.e_r.v, self.e_phi, self.e_z.v]
    }

    pub fn e_rz(&self) -> [f64; 2] {
        [self.e_r.v, self.e_z.v]
    }

    pub fn curl_n(&self, n: i32, r: f64) -> Result<[f64; 3]> {
        curl_n(
            n,
            &CurlInputs {
                r,
                e_r: self.e_r.v,
                e_phi: self.e_phi,
                e_z: self.e_z.v,
                dz_e_r: self.e_r.dz,
                dr_e_z: self.e_z.dr,
                dr_r_e_phi: self.r_e_phi.dr,
                dz_r_e_phi: self.r_e_phi.dz,
            },
        )
    }
}

/// Recovers `(e_r, e_phi, e_z)` from the transformed unknowns at radius `r`.
///
/// `u` is the azimuthal unknown (`e*_phi` for TA) and `w` the in-plane one.
pub fn inverse_substitute(t: &Transformation, n: i32, r: f64, u: Jet2, w: VecJet) -> Result<PhysicalField> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("inverse substitution at r = {r}")));
    }
    let nf = n as f64;
    let r_jet = Jet2::affine(r, 1.0, 0.0);
    let field = match t {
        Transformation::TA => PhysicalField { e_r: w.r, e_phi: u.v / r, e_z: w.z, r_e_phi: u.first() },
        Transformation::TB | Transformation::TD if n == 0 => {
            PhysicalField { e_r: w.r, e_phi: u.v, e_z: w.z, r_e_phi: (r_jet * u).first() }
        }
        Transformation::TD if n.abs() > 1 => {
            let rf = r_jet.first();
            PhysicalField {
                e_r: (w.r * rf).scale(1.0 / nf),
                e_phi: u.v,
                e_z: (w.z * rf).scale(1.0 / nf),
                r_e_phi: (r_jet * u).first(),
            }
        }
        Transformation::TB | Transformation::TD => {
            let rf = r_jet.first();
            PhysicalField {
                e_r: (w.r * rf - u.first()).scale(1.0 / nf),
                e_phi: u.v,
                e_z: (w.z * rf).scale(1.0 / nf),
                r_e_phi: (r_jet * u).first(),
            }
        }
        Transformation::TC(p) => {
            let rb_u = Jet2::r_pow(r, p.beta) * u;
            let e_phi = rb_u.v / r;
            if n == 0 {
                PhysicalField { e_r: w.r, e_phi, e_z: w.z, r_e_phi: rb_u.first() }
            } else {
                let ra = Jet2::r_pow(r, p.alpha).first();
                PhysicalField {
                    e_r: (w.r * ra - rb_u.d_r()).scale(1.0 / nf),
                    e_phi,
                    e_z: (w.z * ra - rb_u.d_z()).scale(1.0 / nf),
                    r_e_phi: rb_u.first(),
                }
            }
        }
    };
    Ok(field)
}

/// Diagonal relative permittivity and inverse permeability in `(r, phi, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub eps_r: [f64; 3],
    pub mu_r_inv: [f64; 3],
}

impl Material {
    pub const VACUUM: Material = Material { eps_r: [1.0; 3], mu_r_inv: [1.0; 3] };

    pub fn isotropic(eps_r: f64, mu_r: f64) -> Self {
        Material { eps_r: [eps_r; 3], mu_r_inv: [1.0 / mu_r; 3] }
    }
}

impl Default for Material {
    fn default() -> Self {
        Material::VACUUM
    }
}

/// Material per triangle with a default for unlisted ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaterialMap {
    pub default: Material,
    pub overrides: BTreeMap<usize, Material>,
}

impl MaterialMap {
    pub fn uniform(m: Material) -> Self {
        MaterialMap { default: m, overrides: BTreeMap::new() }
    }

    pub fn at(&self, triangle: usize) -> &Material {
        self.overrides.get(&triangle).unwrap_or(&self.default)
    }

    fn validate(&self) -> Result<()> {
        for m in std::iter::once(&self.default).chain(self.overrides.values()) {
            if m.eps_r.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::InvalidParameter("permittivity must be positive".into()));
            }
            if m.mu_r_inv.iter().any(|&e| !(e >= 0.0) || !e.is_finite()) {
                return Err(Error::InvalidParameter("inverse permeability must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Weighted `mu^-1 curl_n a . curl_n b * r` of two transformed fields.
#[allow(clippy::too_many_arguments)]
pub fn stiffness_integrand(
    t: &Transformation,
    n: i32,
    material: &Material,
    r: f64,
    trial: (Jet2, VecJet),
    test: (Jet2, VecJet),
) -> Result<f64> {
    let a = inverse_substitute(t, n, r, trial.0, trial.1)?.curl_n(n, r)?;
    let b = inverse_substitute(t, n, r, test.0, test.1)?.curl_n(n, r)?;
    Ok(r * weighted_dot(&material.mu_r_inv, &a, &b))
}

/// Weighted `eps e_a . e_b * r` of two transformed fields.
pub fn mass_integrand(
    t: &Transformation,
    n: i32,
    material: &Material,
    r: f64,
    trial: (Jet2, VecJet),
    test: (Jet2, VecJet),
) -> Result<f64> {
    let a = inverse_substitute(t, n, r, trial.0, trial.1)?.values();
    let b = inverse_substitute(t, n, r, test.0, test.1)?.values();
    Ok(r * weighted_dot(&material.eps_r, &a, &b))
}

#[inline]
pub(crate) fn weighted_dot(w: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    w[0] * a[0] * b[0] + w[1] * a[1] * b[1] + w[2] * a[2] * b[2]
}

/// Essential conditions imposed on the symmetry axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisConditions {
    /// Azimuthal unknown vanishes on the axis.
    pub h1_zero: bool,
    /// Tangential in-plane trace (`e_z`) vanishes on the axis.
    pub hcurl_tangential_zero: bool,
}

pub fn axis_conditions(t: &Transformation, n: i32) -> Result<AxisConditions> {
    check_transformation(t, n)?;
    let m = n.unsigned_abs();
    let h1_zero = match t {
        Transformation::TA => true,
        Transformation::TB | Transformation::TD => m != 1,
        Transformation::TC(p) => match m {
            0 => (0.5..1.5).contains(&p.beta),
            1 => false,
            _ => p.beta > 0.0 && p.beta <= 1.0,
        },
    };
    let hcurl_tangential_zero = matches!(t, Transformation::TA) && m >= 1;
    Ok(AxisConditions { h1_zero, hcurl_tangential_zero })
}

fn is_half_integer_multiple(x: f64) -> bool {
    (2.0 * x).fract() == 0.0
}

/// Whether the integrands are polynomial in `(r, z)` on every element.
pub fn polynomial_integrand_predicate(t: &Transformation, n: i32) -> bool {
    match t {
        Transformation::TA => false,
        Transformation::TB => n != 0,
        Transformation::TD => n.abs() == 1,
        Transformation::TC(p) => {
            let (a, b) = (p.alpha, p.beta);
            let range = if n == 0 { b >= 1.5 } else { a >= 0.5 && b >= 0.5 };
            is_half_integer_multiple(a) && is_half_integer_multiple(b) && (a + b).fract() == 0.0 && range
        }
    }
}

/// Total degree of the stiffness and mass integrands, when they are polynomial.
pub fn threshold_degree(t: &Transformation, n: i32, q: u32, p: u32) -> Option<u32> {
    if !polynomial_integrand_predicate(t, n) {
        return None;
    }
    let (q, p) = (q as f64, p as f64);
    let deg = match t {
        Transformation::TB | Transformation::TD => {
            let stiff = 2.0 * p.max(q - 1.0) + 1.0;
            let mass = 2.0 * (p + 1.0).max(q) + 1.0;
            stiff.max(mass)
        }
        Transformation::TC(tc) => {
            let (a, b) = (tc.alpha, tc.beta);
            if n == 0 {
                let stiff = (2.0 * p - 1.0).max(2.0 * b + 2.0 * q - 3.0);
                let mass = (2.0 * b - 1.0 + 2.0 * q).max(2.0 * p + 1.0);
                stiff.max(mass)
            } else {
                let stiff = 2.0 * a + 2.0 * p - 1.0;
                let mass = (2.0 * b - 1.0 + 2.0 * q).max(2.0 * (a + p).max(b + q - 1.0) + 1.0);
                stiff.max(mass)
            }
        }
        Transformation::TA => unreachable!(),
    };
    Some(deg.ceil() as u32)
}

/// `(alpha, beta)` pairs that keep the full convergence rate. For `n = 0`
/// alpha does not enter the formulation and is reported as 1.
pub fn convergent_tc_params(n: i32) -> Vec<TcParams> {
    match n.unsigned_abs() {
        0 => vec![TcParams::new(1.0, 1.0), TcParams::new(1.0, 2.0)],
        1 => vec![TcParams::new(1.0, 1.0)],
        _ => vec![TcParams::new(1.0, 1.0), TcParams::new(1.0, 2.0), TcParams::new(2.0, 1.0), TcParams::new(2.0, 2.0)],
    }
}

/// Smallest pair with full rate and polynomial integrands.
pub fn recommended_tc_params(n: i32) -> TcParams {
    if n == 0 {
        TcParams::new(1.0, 2.0)
    } else {
        TcParams::new(1.0, 1.0)
    }
}

/// One azimuthal mode of the cavity eigenproblem.
#[derive(Clone, Debug)]
pub struct ModeProblem {
    pub mesh: Arc<CrossSectionMesh>,
    pub n: i32,
    pub transformation: Transformation,
    pub q: u32,
    pub p: u32,
    /// Quadrature exactness degree `D`.
    pub quad_degree: u32,
    pub materials: MaterialMap,
    /// Speed of light; eigenvalues are `omega^2 / c0^2`.
    pub c0: f64,
    /// For `n = 0`: eliminate the in-plane block and solve the azimuthal one alone.
    pub azimuthal_only: bool,
}

impl ModeProblem {
    /// Vacuum problem with `c0 = 1`; the quadrature degree defaults to the
    /// polynomial threshold, or 20 for singular integrands.
    pub fn new(mesh: Arc<CrossSectionMesh>, n: i32, transformation: Transformation, q: u32, p: u32) -> Result<Self> {
        let quad_degree = threshold_degree(&transformation, n, q, p).unwrap_or(20);
        let problem = ModeProblem {
            mesh,
            n,
            transformation,
            q,
            p,
            quad_degree,
            materials: MaterialMap::default(),
            c0: 1.0,
            azimuthal_only: false,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_quad_degree(mut self, d: u32) -> Self {
        self.quad_degree = d;
        self
    }

    pub fn with_materials(mut self, m: MaterialMap) -> Result<Self> {
        m.validate()?;
        self.materials = m;
        Ok(self)
    }

    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0) {
            return Err(Error::InvalidParameter("c0 must be positive".into()));
        }
        self.c0 = c0;
        Ok(self)
    }

    pub fn azimuthal_only(mut self) -> Result<Self> {
        if self.n != 0 {
            return Err(Error::InvalidParameter("azimuthal-only solve requires n = 0".into()));
        }
        self.azimuthal_only = true;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidOrder { space: "H(curl)", order: self.p });
        }
        if self.q < 1 {
            return Err(Error::InvalidOrder { space: "H1", order: self.q });
        }
        if self.q < self.p {
            return Err(Error::InvalidParameter(format!(
                "solver policy requires q >= p (got q = {}, p = {})",
                self.q, self.p
            )));
        }
        check_transformation(&self.transformation, self.n)?;
        self.materials.validate()?;
        Ok(())
    }

    /// `omega` for an eigenvalue `lambda = omega^2 / c0^2`.
    pub fn omega(&self, lambda: f64) -> f64 {
        self.c0 * lambda.sqrt()
    }
}
