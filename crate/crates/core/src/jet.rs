//! Truncated Taylor jets in the (r, z) half-plane.
//!
//! Basis functions are products of barycentric coordinates, so carrying
//! values together with their first and second partials through ordinary
//! arithmetic gives exact derivatives without hand-written formulas. The
//! transformations need second partials of the azimuthal unknown because the
//! in-plane field contains `grad(r^beta u)`, whose curl is taken afterwards.

use std::ops::{Add, Mul, Neg, Sub};

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub dr: f64,
    pub dz: f64,
    pub drr: f64,
    pub drz: f64,
    pub dzz: f64,
}

/// Value and gradient of a scalar field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub dr: f64,
    pub dz: f64,
}

/// In-plane vector field `(U_r, U_z)` with its full Jacobian.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VecJet {
    pub r: Jet1,
    pub z: Jet1,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 { v: 0.0, dr: 0.0, dz: 0.0, drr: 0.0, drz: 0.0, dzz: 0.0 };

    pub fn constant(v: f64) -> Self {
        Jet2 { v, ..Self::ZERO }
    }

    /// Affine function with the given value and constant gradient.
    pub fn affine(v: f64, dr: f64, dz: f64) -> Self {
        Jet2 { v, dr, dz, ..Self::ZERO }
    }

    /// `r^gamma` at radius `r > 0`.
    pub fn r_pow(r: f64, gamma: f64) -> Self {
        if gamma == 0.0 {
            return Self::constant(1.0);
        }
        if gamma == 1.0 {
            return Self::affine(r, 1.0, 0.0);
        }
        let v = r.powf(gamma);
        Jet2 { v, dr: gamma * v / r, drr: gamma * (gamma - 1.0) * v / (r * r), ..Self::ZERO }
    }

    pub fn scale(self, s: f64) -> Self {
        Jet2 {
            v: self.v * s,
            dr: self.dr * s,
            dz: self.dz * s,
            drr: self.drr * s,
            drz: self.drz * s,
            dzz: self.dzz * s,
        }
    }

    /// Drops the second-order part.
    pub fn first(self) -> Jet1 {
        Jet1 { v: self.v, dr: self.dr, dz: self.dz }
    }

    /// `d/dr` as a first-order jet.
    pub fn d_r(self) -> Jet1 {
        Jet1 { v: self.dr, dr: self.drr, dz: self.drz }
    }

    /// `d/dz` as a first-order jet.
    pub fn d_z(self) -> Jet1 {
        Jet1 { v: self.dz, dr: self.drz, dz: self.dzz }
    }

    /// Gradient field as an in-plane vector jet.
    pub fn grad(self) -> VecJet {
        VecJet { r: self.d_r(), z: self.d_z() }
    }

    /// Scalar times a constant vector, e.g. `f * grad(lambda)`.
    pub fn times_vector(self, g: [f64; 2]) -> VecJet {
        let f = self.first();
        VecJet { r: f.scale(g[0]), z: f.scale(g[1]) }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dr: self.dr + o.dr,
            dz: self.dz + o.dz,
            drr: self.drr + o.drr,
            drz: self.drz + o.drz,
            dzz: self.dzz + o.dzz,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dr: self.dr * o.v + self.v * o.dr,
            dz: self.dz * o.v + self.v * o.dz,
            drr: self.drr * o.v + 2.0 * self.dr * o.dr + self.v * o.drr,
            drz: self.drz * o.v + self.dr * o.dz + self.dz * o.dr + self.v * o.drz,
            dzz: self.dzz * o.v + 2.0 * self.dz * o.dz + self.v * o.dzz,
        }
    }
}

impl Jet1 {
    pub const ZERO: Jet1 = Jet1 { v: 0.0, dr: 0.0, dz: 0.0 };

    pub fn scale(self, s: f64) -> Self {
        Jet1 { v: self.v * s, dr: self.dr * s, dz: self.dz * s }
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v + o.v, dr: self.dr + o.dr, dz: self.dz + o.dz }
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v - o.v, dr: self.dr - o.dr, dz: self.dz - o.dz }
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v * o.v, dr: self.dr * o.v + self.v * o.dr, dz: self.dz * o.v + self.v * o.dz }
    }
}

impl VecJet {
    pub const ZERO: VecJet = VecJet { r: Jet1::ZERO, z: Jet1::ZERO };

    pub fn value(&self) -> [f64; 2] {
        [self.r.v, self.z.v]
    }

    /// Scalar 2D curl `dU_r/dz - dU_z/dr`.
    pub fn curl(&self) -> f64 {
        self.r.dz - self.z.dr
    }

    pub fn scale(self, s: f64) -> Self {
        VecJet { r: self.r.scale(s), z: self.z.scale(s) }
    }

    /// Multiplies both components by a scalar jet.
    pub fn times(self, f: Jet1) -> Self {
        VecJet { r: self.r * f, z: self.z * f }
    }
}

impl Add for VecJet {
    type Output = VecJet;
    fn add(self, o: VecJet) -> VecJet {
        VecJet { r: self.r + o.r, z: self.z + o.z }
    }
}

impl Sub for VecJet {
    type Output = VecJet;
    fn sub(self, o: VecJet) -> VecJet {
        VecJet { r: self.r - o.r, z: self.z - o.z }
    }
}
