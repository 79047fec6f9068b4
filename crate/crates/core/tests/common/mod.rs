use axicav::formulation::{curl_n, CurlInputs, Transformation};
use axicav::jet::{Jet2, VecJet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random quadratic in `(r, z)` evaluated as a jet.
fn quadratic(c: &[f64; 6], r: f64, z: f64) -> Jet2 {
    let rj = Jet2::affine(r, 1.0, 0.0);
    let zj = Jet2::affine(z, 0.0, 1.0);
    Jet2::constant(c[0])
        + rj.scale(c[1])
        + zj.scale(c[2])
        + (rj * rj).scale(c[3])
        + (rj * zj).scale(c[4])
        + (zj * zj).scale(c[5])
}

pub struct Field {
    pub e_r: [f64; 6],
    pub e_phi: [f64; 6],
    pub e_z: [f64; 6],
}

impl Field {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut draw = || std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        Field { e_r: draw(), e_phi: draw(), e_z: draw() }
    }

    pub fn jets(&self, r: f64, z: f64) -> [Jet2; 3] {
        [quadratic(&self.e_r, r, z), quadratic(&self.e_phi, r, z), quadratic(&self.e_z, r, z)]
    }

    pub fn curl(&self, n: i32, r: f64, z: f64) -> [f64; 3] {
        let [er, ep, ez] = self.jets(r, z);
        let rep = Jet2::affine(r, 1.0, 0.0) * ep;
        curl_n(
            n,
            &CurlInputs {
                r,
                e_r: er.v,
                e_phi: ep.v,
                e_z: ez.v,
                dz_e_r: er.dz,
                dr_e_z: ez.dr,
                dr_r_e_phi: rep.dr,
                dz_r_e_phi: rep.dz,
            },
        )
        .unwrap()
    }

    /// Transformed unknowns of this field under `t`.
    pub fn forward(&self, t: &Transformation, n: i32, r: f64, z: f64) -> (Jet2, VecJet) {
        let [er, ep, ez] = self.jets(r, z);
        let nf = n as f64;
        let rj = Jet2::affine(r, 1.0, 0.0);
        let inv_r = Jet2::r_pow(r, -1.0);
        let vj = |a: Jet2, b: Jet2| VecJet { r: a.first(), z: b.first() };
        match t {
            Transformation::TA => (rj * ep, vj(er, ez)),
            Transformation::TB | Transformation::TD if n == 0 => (ep, vj(er, ez)),
            Transformation::TD => (ep, vj((inv_r * er).scale(nf), (inv_r * ez).scale(nf))),
            Transformation::TB => (ep, vj(inv_r * (er.scale(nf) + ep), (inv_r * ez).scale(nf))),
            Transformation::TC(p) => {
                let u = Jet2::r_pow(r, 1.0 - p.beta) * ep;
                if n == 0 {
                    return (u, vj(er, ez));
                }
                let ra = Jet2::r_pow(r, -p.alpha).first();
                let rep = rj * ep;
                let w =
                    VecJet { r: ra * (er.first().scale(nf) + rep.d_r()), z: ra * (ez.first().scale(nf) + rep.d_z()) };
                (u, w)
            }
        }
    }
}
