//! Optimal one-dimensional transition layers ζ' = 1 − ‖aν + ζ iν‖² between
//! two boundary states, and their energy.

use crate::boundary::BoundaryParam;
use crate::costs::JumpPair;
use crate::error::{invalid, Result};
use crate::numerics::fit::line_fit;
use crate::numerics::ode::{integrate, OdeOptions};
use crate::numerics::quad;
use serde::Serialize;
use std::io::Write;

/// Largest |x| the solver may reach, in units of the linearized decay length.
const T_CAP_DECAY_LENGTHS: f64 = 1e4;

/// Fitted approach of ζ to one of its limits over the tail samples.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailFit {
    /// Rate r of gap ≈ C e^{−r|x|}.
    pub exp_rate: f64,
    pub exp_rms: f64,
    /// Exponent q of gap ≈ C |x|^{−q}.
    pub power_exponent: f64,
    pub power_rms: f64,
    /// |F'(limit)|, the decay rate predicted by linearization.
    pub linear_rate: f64,
    /// True if the exponential model fits better.
    pub exponential: bool,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Profile {
    pub jump: JumpPair,
    /// Limit of ζ at −∞ (the smaller of z±·iν) and at +∞.
    pub lower: f64,
    pub upper: f64,
    pub zeta0: f64,
    /// Samples in increasing x.
    pub x: Vec<f64>,
    pub zeta: Vec<f64>,
    /// ∫ (ζ'² + F(ζ)²) dx over [x₀, x] accumulated along the trajectory,
    /// shifted so that it starts at 0 at the left end.
    pub energy_cumulative: Vec<f64>,
    /// Remaining energy beyond each end, 2∫F dζ over the unresolved gap.
    pub tail_left: f64,
    pub tail_right: f64,
    /// |ζ(−T) − lower|, |ζ(T) − upper|.
    pub end_errors: [f64; 2],
    pub tol: f64,
    pub converged: bool,
    pub tails: [TailFit; 2],
}

/// F(ζ) = 1 − ‖aν + ζ iν‖².
pub fn rhs(bp: &BoundaryParam, jp: &JumpPair, zeta: f64) -> f64 {
    let r = bp.norm_value(jp.nu * jp.a + jp.nu.rot() * zeta);
    1.0 - r * r
}

fn limits(jp: &JumpPair) -> (f64, f64) {
    let inu = jp.nu.rot();
    let (p, m) = (jp.z_plus.dot(inu), jp.z_minus.dot(inu));
    (p.min(m), p.max(m))
}

pub fn solve_profile(bp: &BoundaryParam, jp: &JumpPair, tol: f64) -> Result<Profile> {
    let (lo, hi) = limits(jp);
    solve_profile_from(bp, jp, tol, 0.5 * (lo + hi))
}

/// Solves from ζ(0) = `zeta0`, which must lie strictly between the limits.
pub fn solve_profile_from(bp: &BoundaryParam, jp: &JumpPair, tol: f64, zeta0: f64) -> Result<Profile> {
    if !(1e-10..=1e-3).contains(&tol) {
        return invalid(format!("profile tolerance must lie in [1e-10, 1e-3], got {tol}"));
    }
    let (lower, upper) = limits(jp);
    if !(zeta0 > lower && zeta0 < upper) {
        return invalid("initial value must lie strictly between the limits");
    }
    let f = |z: f64| rhs(bp, jp, z);
    let slope = |z: f64| {
        let d = 1e-6 * (upper - lower);
        ((f(z + d) - f(z - d)) / (2.0 * d)).abs()
    };
    let rates = [slope(lower), slope(upper)];
    let decay = 1.0 / rates[0].min(rates[1]).max(1e-12);
    let opts = OdeOptions {
        h0: 1e-3 * decay,
        h_max: 0.05 * decay,
        max_steps: 2_000_000,
        ..OdeOptions::default()
    };
    let sys = |_: f64, y: &[f64; 2]| {
        let v = f(y[0]);
        [v, 2.0 * v * v]
    };
    let cap = T_CAP_DECAY_LENGTHS * decay;
    let fwd = integrate(sys, 0.0, [zeta0, 0.0], 1.0, cap, &opts, |_, y| upper - y[0] < tol)?;
    let bwd = integrate(sys, 0.0, [zeta0, 0.0], -1.0, cap, &opts, |_, y| y[0] - lower < tol)?;

    let mut x = Vec::with_capacity(fwd.len() + bwd.len());
    let mut zeta = Vec::with_capacity(x.capacity());
    let mut e = Vec::with_capacity(x.capacity());
    let e_left = -bwd.last().unwrap().1[1];
    for (t, y) in bwd.iter().rev() {
        x.push(*t);
        zeta.push(y[0]);
        e.push(e_left + y[1]);
    }
    for (t, y) in fwd.iter().skip(1) {
        x.push(*t);
        zeta.push(y[0]);
        e.push(e_left + y[1]);
    }
    let z_left = zeta[0];
    let z_right = *zeta.last().unwrap();
    let gap_energy = |a: f64, b: f64| -> Result<f64> {
        if b > a {
            Ok(2.0 * quad::integrate(|z| f(z).max(0.0), a, b, 1e-16, 1e-10)?)
        } else {
            Ok(0.0)
        }
    };
    let end_errors = [z_left - lower, upper - z_right];
    let tails = [
        tail_fit(&x, &zeta, lower, zeta0, tol, rates[0], true),
        tail_fit(&x, &zeta, upper, zeta0, tol, rates[1], false),
    ];
    Ok(Profile {
        jump: jp.clone(),
        lower,
        upper,
        zeta0,
        tail_left: gap_energy(lower, z_left)?,
        tail_right: gap_energy(z_right, upper)?,
        converged: end_errors[0] < tol && end_errors[1] < tol,
        end_errors,
        tol,
        tails,
        x,
        zeta,
        energy_cumulative: e,
    })
}

fn tail_fit(x: &[f64], zeta: &[f64], limit: f64, zeta0: f64, tol: f64, linear_rate: f64, left: bool) -> TailFit {
    let g0 = (limit - zeta0).abs();
    let (mut ax, mut lx, mut lg) = (Vec::new(), Vec::new(), Vec::new());
    for (xi, zi) in x.iter().zip(zeta) {
        if (*xi < 0.0) != left || *xi == 0.0 {
            continue;
        }
        let g = (limit - zi).abs();
        if g < 1e-2 * g0 && g > 10.0 * tol.max(1e-14) {
            ax.push(xi.abs());
            lx.push(xi.abs().ln());
            lg.push(g.ln());
        }
    }
    if ax.len() < 3 {
        return TailFit {
            exp_rate: f64::NAN,
            exp_rms: f64::NAN,
            power_exponent: f64::NAN,
            power_rms: f64::NAN,
            linear_rate,
            exponential: true,
            samples: ax.len(),
        };
    }
    let ef = line_fit(&ax, &lg);
    let pf = line_fit(&lx, &lg);
    TailFit {
        exp_rate: -ef.slope,
        exp_rms: ef.rms,
        power_exponent: -pf.slope,
        power_rms: pf.rms,
        linear_rate,
        exponential: ef.rms <= pf.rms,
        samples: ax.len(),
    }
}

/// ∫ (ζ'² + (1 − ‖aν + ζiν‖²)²) dx over the resolved interval plus the
/// unresolved tail energies.
pub fn profile_energy(p: &Profile) -> f64 {
    p.energy_cumulative.last().copied().unwrap_or(0.0) + p.tail_left + p.tail_right
}

impl Profile {
    /// Truncation length max(|x|).
    pub fn half_length(&self) -> f64 {
        self.x[0].abs().max(self.x.last().unwrap().abs())
    }

    /// ζ at x by cubic Hermite interpolation with slopes F(ζ).
    pub fn zeta_at(&self, bp: &BoundaryParam, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.zeta[0];
        }
        if x >= self.x[n - 1] {
            return self.zeta[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= x) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (x - self.x[k]) / h;
        let (z0, z1) = (self.zeta[k], self.zeta[k + 1]);
        let (m0, m1) = (rhs(bp, &self.jump, z0), rhs(bp, &self.jump, z1));
        let s2 = s * s;
        let s3 = s2 * s;
        z0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * h * (s3 - 2.0 * s2 + s) + z1 * (3.0 * s2 - 2.0 * s3) + m1 * h * (s3 - s2)
    }

    /// max over sample intervals of |ζ'² − F(ζ)²| at the interval midpoints,
    /// with ζ' from the derivative of the quintic through ζ, ζ' = F(ζ) and
    /// ζ'' = F'(ζ)F(ζ) at both ends.
    pub fn equipartition_defect(&self, bp: &BoundaryParam) -> f64 {
        let f = |z: f64| rhs(bp, &self.jump, z);
        let d = 1e-7 * (self.upper - self.lower);
        let fp = |z: f64| (f(z + d) - f(z - d)) / (2.0 * d);
        let mut worst: f64 = 0.0;
        for k in 0..self.x.len() - 1 {
            let h = self.x[k + 1] - self.x[k];
            let (z0, z1) = (self.zeta[k], self.zeta[k + 1]);
            let (v0, v1) = (f(z0), f(z1));
            let (a0, a1) = (fp(z0) * v0, fp(z1) * v1);
            // quintic Hermite derivative at s = ½
            let slope = 15.0 / 8.0 * (z1 - z0) / h - 7.0 / 16.0 * (v0 + v1) - h / 32.0 * (a0 - a1);
            let zm = quintic_mid(z0, z1, v0, v1, a0, a1, h);
            worst = worst.max((slope * slope - f(zm).powi(2)).abs());
        }
        worst
    }

    /// CSV with columns x, zeta, integrand (ζ'² + F² = 2F² on the profile).
    pub fn write_csv<W: Write>(&self, bp: &BoundaryParam, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,zeta,integrand")?;
        for (x, z) in self.x.iter().zip(&self.zeta) {
            let v = rhs(bp, &self.jump, *z);
            writeln!(w, "{x},{z},{}", 2.0 * v * v)?;
        }
        Ok(())
    }
}

fn quintic_mid(z0: f64, z1: f64, v0: f64, v1: f64, a0: f64, a1: f64, h: f64) -> f64 {
    0.5 * (z0 + z1) + 5.0 / 32.0 * h * (v0 - v1) + h * h / 64.0 * (a0 + a1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_midpoint_formulas_are_exact_for_quintics() {
        // p(t) = t⁵ − 2t³ + t on [0, h]
        let h = 0.7;
        let p = |t: f64| t.powi(5) - 2.0 * t.powi(3) + t;
        let dp = |t: f64| 5.0 * t.powi(4) - 6.0 * t * t + 1.0;
        let ddp = |t: f64| 20.0 * t.powi(3) - 12.0 * t;
        let m = quintic_mid(p(0.0), p(h), dp(0.0), dp(h), ddp(0.0), ddp(h), h);
        assert!((m - p(0.5 * h)).abs() < 1e-13);
        let s = 15.0 / 8.0 * (p(h) - p(0.0)) / h - 7.0 / 16.0 * (dp(0.0) + dp(h)) - h / 32.0 * (ddp(0.0) - ddp(h));
        assert!((s - dp(0.5 * h)).abs() < 1e-13);
    }
}
