//! Closed-form spectrum of the pillbox cavity.
//!
//! For radius `R` and length `L`, the TM and TE modes of azimuthal order `m`
//! have `(omega/c0)^2 = (x/R)^2 + (k pi / L)^2` where `x` is the `nu`-th zero
//! of `J_m` (TM, `k >= 0`) or of `J_m'` (TE, `k >= 1`).

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// Largest Bessel order supported by [`bessel_j`].
pub const MAX_ORDER: u32 = 11;
/// Largest zero index supported by [`bessel_zero`] and [`bessel_prime_zero`].
pub const MAX_ZERO_INDEX: u32 = 20;

/// `J_m(x)` by Miller's backward recurrence normalized with
/// `J_0 + 2 (J_2 + J_4 + ...) = 1`.
pub fn bessel_j(m: u32, x: f64) -> Result<f64> {
    if m > MAX_ORDER || !(0.0..=100.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("bessel_j({m}, {x}) outside supported range")));
    }
    if x == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    let top = (m as f64).max(x);
    let start = 2 * (((top + 20.0 + (40.0 * top).sqrt()) as usize) / 2 + 1);
    let mut above = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k, arbitrary scale
    let mut sum = 2.0 * cur;
    let mut result = if start == m as usize { cur } else { 0.0 };
    for k in (1..=start).rev() {
        let below = (2.0 * k as f64 / x) * cur - above;
        above = cur;
        cur = below;
        let idx = k - 1;
        if idx == m as usize {
            result = cur;
        }
        if idx > 0 && idx % 2 == 0 {
            sum += 2.0 * cur;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            above *= 1e-200;
            sum *= 1e-200;
            result *= 1e-200;
        }
    }
    sum += cur;
    Ok(result / sum)
}

/// `J_m'(x)`.
pub fn bessel_j_prime(m: u32, x: f64) -> Result<f64> {
    if m == 0 {
        return Ok(-bessel_j(1, x)?);
    }
    Ok(0.5 * (bessel_j(m - 1, x)? - bessel_j(m + 1, x)?))
}

fn nth_root<F: Fn(f64) -> Result<f64>>(f: F, nu: u32) -> Result<f64> {
    if nu == 0 || nu > MAX_ZERO_INDEX {
        return Err(Error::InvalidParameter(format!("zero index {nu} outside 1..={MAX_ZERO_INDEX}")));
    }
    let step = 0.05;
    let mut a = step;
    let mut fa = f(a)?;
    let mut found = 0;
    while a < 95.0 {
        let b = a + step;
        let fb = f(b)?;
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == nu {
                return bisect(&f, a, b);
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::InvalidParameter(format!("zero {nu} not bracketed below x = 95")))
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    if fa == 0.0 {
        return Ok(a);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `nu`-th positive zero of `J_m`.
pub fn bessel_zero(m: u32, nu: u32) -> Result<f64> {
    if m > MAX_ORDER - 1 {
        return Err(Error::InvalidParameter(format!("order {m} too large")));
    }
    nth_root(|x| bessel_j(m, x), nu)
}

/// `nu`-th positive zero of `J_m'` (the zero at the origin is excluded).
pub fn bessel_prime_zero(m: u32, nu: u32) -> Result<f64> {
    if m > MAX_ORDER - 1 {
        return Err(Error::InvalidParameter(format!("order {m} too large")));
    }
    nth_root(|x| bessel_j_prime(m, x), nu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    TM,
    TE,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::TM => "TM",
            Family::TE => "TE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticMode {
    pub family: Family,
    pub m: u32,
    pub nu: u32,
    pub p_idx: u32,
    pub omega_over_c0: f64,
    /// Number of modes in the table sharing this eigenvalue.
    pub multiplicity: usize,
}

impl AnalyticMode {
    pub fn new(family: Family, m: u32, nu: u32, p_idx: u32, radius: f64, length: f64) -> Result<Self> {
        if family == Family::TE && p_idx == 0 {
            return Err(Error::InvalidParameter("TE modes need an axial index >= 1".into()));
        }
        let x = match family {
            Family::TM => bessel_zero(m, nu)?,
            Family::TE => bessel_prime_zero(m, nu)?,
        };
        let kz = p_idx as f64 * PI / length;
        let omega_over_c0 = ((x / radius).powi(2) + kz * kz).sqrt();
        Ok(AnalyticMode { family, m, nu, p_idx, omega_over_c0, multiplicity: 1 })
    }

    /// `omega^2 / c0^2`.
    pub fn lambda(&self) -> f64 {
        self.omega_over_c0 * self.omega_over_c0
    }

    /// Label such as `TE111`.
    pub fn id(&self) -> String {
        if self.m < 10 && self.nu < 10 && self.p_idx < 10 {
            format!("{}{}{}{}", self.family, self.m, self.nu, self.p_idx)
        } else {
            format!("{}_{}_{}_{}", self.family, self.m, self.nu, self.p_idx)
        }
    }
}

/// Parses labels like `TE111` or `TM_1_12_0`.
pub fn parse_mode_id(s: &str) -> Result<(Family, u32, u32, u32)> {
    let s = s.trim();
    let bad = || Error::Config(format!("malformed mode label '{s}'"));
    let family = match s.get(..2).map(|p| p.to_ascii_uppercase()) {
        Some(p) if p == "TM" => Family::TM,
        Some(p) if p == "TE" => Family::TE,
        _ => return Err(bad()),
    };
    let rest = &s[2..];
    let idx: Vec<u32> = if rest.contains('_') {
        rest.split('_').filter(|x| !x.is_empty()).map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?
    } else {
        rest.chars().map(|c| c.to_digit(10).ok_or_else(bad)).collect::<Result<_>>()?
    };
    match idx.as_slice() {
        [m, nu, p] if *nu >= 1 => Ok((family, *m, *nu, *p)),
        _ => Err(bad()),
    }
}

/// All modes with azimuthal order `|n|` and `omega^2/c0^2 <= lambda_max`,
/// sorted by eigenvalue, with degeneracies counted in `multiplicity`.
pub fn pillbox_spectrum(radius: f64, length: f64, n: i32, lambda_max: f64) -> Result<Vec<AnalyticMode>> {
    if !(radius > 0.0 && length > 0.0) {
        return Err(Error::InvalidParameter("cavity dimensions must be positive".into()));
    }
    let m = n.unsigned_abs();
    let mut modes = Vec::new();
    for family in [Family::TM, Family::TE] {
        for nu in 1.. {
            let radial = match family {
                Family::TM => bessel_zero(m, nu)?,
                Family::TE => bessel_prime_zero(m, nu)?,
            } / radius;
            if radial * radial > lambda_max {
                break;
            }
            if nu == MAX_ZERO_INDEX {
                return Err(Error::InvalidParameter(format!(
                    "lambda_max = {lambda_max} needs more than {MAX_ZERO_INDEX} radial zeros"
                )));
            }
            let first_p = if family == Family::TE { 1 } else { 0 };
            for p_idx in first_p.. {
                let mode = AnalyticMode::new(family, m, nu, p_idx, radius, length)?;
                if mode.lambda() > lambda_max {
                    break;
                }
                modes.push(mode);
            }
        }
    }
    modes.sort_by(|a, b| {
        a.omega_over_c0
            .total_cmp(&b.omega_over_c0)
            .then(a.family.cmp(&b.family))
            .then(a.nu.cmp(&b.nu))
            .then(a.p_idx.cmp(&b.p_idx))
    });
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len() && (modes[end].lambda() - modes[start].lambda()).abs() <= 1e-12 * modes[start].lambda()
        {
            end += 1;
        }
        for mode in &mut modes[start..end] {
            mode.multiplicity = end - start;
        }
        start = end;
    }
    Ok(modes)
}

/// Lowest `count` modes of azimuthal order `|n|`.
pub fn lowest_modes(radius: f64, length: f64, n: i32, count: usize) -> Result<Vec<AnalyticMode>> {
    let mut lmax = 4.0 * (PI / radius.min(length)).powi(2);
    loop {
        let modes = pillbox_spectrum(radius, length, n, lmax)?;
        if modes.len() > count {
            return Ok(modes.into_iter().take(count).collect());
        }
        lmax *= 1.5;
    }
}

/// Writes `family,m,nu,p_idx,omega_over_c0,multiplicity`.
pub fn write_table<W: Write>(modes: &[AnalyticMode], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "m", "nu", "p_idx", "omega_over_c0", "multiplicity"])?;
    for m in modes {
        w.write_record([
            m.family.to_string(),
            m.m.to_string(),
            m.nu.to_string(),
            m.p_idx.to_string(),
            format!("{:.16e}", m.omega_over_c0),
            m.multiplicity.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of pairing computed eigenvalues with analytic ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchReport {
    /// `(computed index, analytic index)`.
    pub matches: Vec<(usize, usize)>,
    pub spurious: Vec<usize>,
    pub missed: Vec<usize>,
}

impl MatchReport {
    pub fn spurious_count(&self) -> usize {
        self.spurious.len()
    }

    pub fn computed_for(&self, analytic: usize) -> Option<usize> {
        self.matches.iter().find(|m| m.1 == analytic).map(|m| m.0)
    }
}

/// Greedy in-order matching on `sqrt(lambda)` with relative tolerance.
///
/// Both lists are eigenvalues sorted ascending; degenerate analytic values
/// appear once per multiplicity.
pub fn match_spectra(computed: &[f64], analytic: &[f64], rel_tol: f64) -> MatchReport {
    let mut report = MatchReport::default();
    let (mut i, mut j) = (0, 0);
    while i < computed.len() && j < analytic.len() {
        let wc = computed[i].max(0.0).sqrt();
        let wa = analytic[j].max(0.0).sqrt();
        if (wc - wa).abs() <= rel_tol * wa {
            report.matches.push((i, j));
            i += 1;
            j += 1;
        } else if wc < wa {
            report.spurious.push(i);
            i += 1;
        } else {
            report.missed.push(j);
            j += 1;
        }
    }
    report.spurious.extend(i..computed.len());
    report.missed.extend(j..analytic.len());
    report
}
