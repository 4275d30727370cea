//! Entropies Φ on the boundary with dΦ(γ(θ))/dθ = λ(θ)γ'(θ), their radial
//! extension Φ̂ to the plane, heaviside approximants and the Φ_ψ family.

use crate::boundary::BoundaryParam;
use crate::error::{invalid, Error, Result};
use crate::vec2::Vec2;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::sync::Arc;

/// Tolerance on |∮λγ'| below which an entropy counts as admissible.
pub const ADMISSIBLE_TOL: f64 = 1e-10;

/// An entropy sampled on the uniform θ grid of a boundary parametrization.
/// Anchored so that Φ(γ(0)) = 0.
#[derive(Clone, Debug)]
pub struct EntropyFn {
    h: f64,
    lambda: Vec<f64>,
    phi: Vec<Vec2>,
    /// λ_k γ'_k, the slopes of the Hermite interpolant of Φ.
    slope: Vec<Vec2>,
    /// Φ(γ(2π)) − Φ(γ(0)) as accumulated.
    closure: Vec2,
    admissible: bool,
    lip_bound: f64,
}

impl EntropyFn {
    /// Builds the entropy for λ without modifying it. The result is
    /// admissible only if the trapezoidal ∮λγ' vanishes.
    pub fn from_lambda(bp: &BoundaryParam, lambda: Vec<f64>) -> Result<Self> {
        let n = bp.resolution();
        if lambda.len() != n {
            return invalid(format!("lambda has {} samples, boundary has {n}", lambda.len()));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return invalid("lambda has non-finite samples");
        }
        let h = bp.spacing();
        let gp = bp.gamma_prime_samples();
        let slope: Vec<Vec2> = (0..n).map(|k| gp[k] * lambda[k]).collect();
        // trapezoid with the Euler–Maclaurin end correction; the correction
        // telescopes over a period, so closure equals h·Σλγ' exactly
        let deriv = |k: usize| {
            let kp = (k + 1) % n;
            let km = (k + n - 1) % n;
            (slope[kp] - slope[km]) / (2.0 * h)
        };
        let mut phi = vec![Vec2::ZERO; n];
        let mut acc = Vec2::ZERO;
        for k in 0..n {
            let k1 = (k + 1) % n;
            let inc = (slope[k] + slope[k1]) * (0.5 * h) - (deriv(k1) - deriv(k)) * (h * h / 12.0);
            if k + 1 < n {
                acc += inc;
                phi[k + 1] = acc;
            } else {
                acc += inc;
            }
        }
        let total: Vec2 = slope.iter().fold(Vec2::ZERO, |s, v| s + *v) * h;
        let lip_bound = (0..n)
            .map(|k| (lambda[(k + 1) % n] - lambda[k]).abs() / h)
            .fold(0.0, f64::max);
        Ok(EntropyFn {
            h,
            admissible: total.norm() <= ADMISSIBLE_TOL * (1.0 + lambda.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
            closure: acc,
            lambda,
            phi,
            slope,
            lip_bound,
        })
    }

    /// Removes the component of λ along span(γ'₁, γ'₂) (discrete Gram
    /// projection) so that ∮λγ' = 0, and builds the entropy.
    pub fn project_to_admissible(bp: &BoundaryParam, lambda: Vec<f64>) -> Result<Self> {
        let (lambda, _) = project(bp, lambda)?;
        let e = Self::from_lambda(bp, lambda)?;
        if !e.admissible {
            return Err(Error::Internal(format!(
                "projection left a closure defect {:.3e}",
                e.closure.norm()
            )));
        }
        Ok(e)
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn phi_samples(&self) -> &[Vec2] {
        &self.phi
    }
    pub fn is_admissible(&self) -> bool {
        self.admissible
    }
    /// max |λ_{k+1} − λ_k| / h.
    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }
    /// Accumulated Φ(γ(2π)) − Φ(γ(0)).
    pub fn closure_defect(&self) -> Vec2 {
        self.closure
    }

    /// Same entropy with λ scaled by `s`.
    pub fn scaled(&self, s: f64) -> EntropyFn {
        EntropyFn {
            h: self.h,
            lambda: self.lambda.iter().map(|v| v * s).collect(),
            phi: self.phi.iter().map(|v| *v * s).collect(),
            slope: self.slope.iter().map(|v| *v * s).collect(),
            closure: self.closure * s,
            admissible: self.admissible,
            lip_bound: self.lip_bound * s.abs(),
        }
    }

    fn locate(&self, theta: f64) -> (usize, f64) {
        let n = self.lambda.len();
        let r = theta.rem_euclid(TAU);
        let k = ((r / self.h).floor() as usize).min(n - 1);
        (k, ((r - k as f64 * self.h) / self.h).clamp(0.0, 1.0))
    }

    /// Φ(γ(θ)) by cubic Hermite interpolation with slopes λγ'. Skips the
    /// admissibility check; see [`EntropyFn::phi_eval`].
    pub fn phi_at(&self, theta: f64) -> Vec2 {
        let n = self.lambda.len();
        let (k, s) = self.locate(theta);
        let k1 = (k + 1) % n;
        let p1 = if k + 1 == n { self.phi[0] + self.closure } else { self.phi[k1] };
        let s2 = s * s;
        let s3 = s2 * s;
        self.phi[k] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + self.slope[k] * ((s3 - 2.0 * s2 + s) * self.h)
            + p1 * (-2.0 * s3 + 3.0 * s2)
            + self.slope[k1] * ((s3 - s2) * self.h)
    }

    /// Φ(γ(θ)); 2π-periodic. Errors for non-admissible entropies.
    pub fn phi_eval(&self, theta: f64) -> Result<Vec2> {
        if !self.admissible {
            return invalid(format!(
                "entropy is not admissible (closure defect {:.3e}); project it first",
                self.closure.norm()
            ));
        }
        Ok(self.phi_at(theta))
    }

    /// λ(θ) by periodic Catmull–Rom interpolation (C¹).
    pub fn lambda_at(&self, theta: f64) -> f64 {
        let n = self.lambda.len();
        let (k, s) = self.locate(theta);
        let l = |i: isize| self.lambda[i.rem_euclid(n as isize) as usize];
        let k = k as isize;
        let (p0, p1, p2, p3) = (l(k - 1), l(k), l(k + 1), l(k + 2));
        let s2 = s * s;
        let s3 = s2 * s;
        0.5 * (2.0 * p1 + (p2 - p0) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2 + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s3)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "theta,lambda,phix,phiy")?;
        for (k, (l, p)) in self.lambda.iter().zip(&self.phi).enumerate() {
            writeln!(w, "{},{},{},{}", k as f64 * self.h, l, p.x, p.y)?;
        }
        Ok(())
    }
}

/// Discrete Gram projection of λ. Returns the projected samples and the
/// removed coefficients (c₁, c₂) of c₁γ'₁ + c₂γ'₂.
pub fn project(bp: &BoundaryParam, mut lambda: Vec<f64>) -> Result<(Vec<f64>, [f64; 2])> {
    let n = bp.resolution();
    if lambda.len() != n {
        return invalid(format!("lambda has {} samples, boundary has {n}", lambda.len()));
    }
    let gp = bp.gamma_prime_samples();
    let (mut g11, mut g12, mut g22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let g = gp[k];
        g11 += g.x * g.x;
        g12 += g.x * g.y;
        g22 += g.y * g.y;
        r1 += lambda[k] * g.x;
        r2 += lambda[k] * g.y;
    }
    let det = g11 * g22 - g12 * g12;
    if !(det.abs() > 1e-12 * (g11 * g22)) {
        return Err(Error::Internal("singular Gram system for the admissibility projection".into()));
    }
    let c1 = (g22 * r1 - g12 * r2) / det;
    let c2 = (g11 * r2 - g12 * r1) / det;
    for k in 0..n {
        lambda[k] -= c1 * gp[k].x + c2 * gp[k].y;
    }
    Ok((lambda, [c1, c2]))
}

/// Smooth bump supported in (0, 1) (unnormalized).
pub fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

/// Approximant Φ^ξ_δ of the indicator entropy z ↦ 1_{z·iξ>0} γ'(θ₀).
#[derive(Clone, Debug)]
pub struct HeavisideEntropy {
    pub entropy: EntropyFn,
    pub theta0: f64,
    pub delta: f64,
    /// ‖μ_δ‖_{L¹}: size of the admissibility correction.
    pub mu_l1: f64,
}

impl HeavisideEntropy {
    /// The limiting indicator value at γ(θ), with Φ^ξ = 0 on the off branch.
    pub fn indicator(&self, bp: &BoundaryParam, theta: f64) -> Vec2 {
        let d = (theta - self.theta0).rem_euclid(TAU);
        if d > 0.0 && d < PI {
            bp.gamma_prime(self.theta0)
        } else {
            Vec2::ZERO
        }
    }
}

/// λ̂_δ(θ) = ρ_δ(θ−θ₀) + ρ_δ(π+θ₀−θ), projected to admissibility.
pub fn heaviside_entropy(bp: &BoundaryParam, xi: Vec2, delta: f64) -> Result<HeavisideEntropy> {
    if !(delta > 0.0 && delta < PI / 4.0) {
        return invalid(format!("delta must lie in (0, pi/4), got {delta}"));
    }
    let theta0 = bp.theta_of_point(xi)?;
    let n = bp.resolution();
    let h = bp.spacing();
    let rho_samples = |center: f64, sign: f64| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n)
            .map(|k| {
                let d = (sign * (bp.theta(k) - center)).rem_euclid(TAU);
                bump(d / delta)
            })
            .collect();
        let mass: f64 = v.iter().sum::<f64>() * h;
        if mass > 0.0 {
            v.iter_mut().for_each(|x| *x /= mass);
        }
        v
    };
    let a = rho_samples(theta0, 1.0);
    let b = rho_samples(theta0 + PI, -1.0);
    if a.iter().all(|v| *v == 0.0) {
        return invalid("delta is below the boundary resolution");
    }
    let lam_hat: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let (lambda, c) = project(bp, lam_hat)?;
    let gp = bp.gamma_prime_samples();
    let mu_l1 = gp.iter().map(|g| (c[0] * g.x + c[1] * g.y).abs()).sum::<f64>() * h;
    Ok(HeavisideEntropy {
        entropy: EntropyFn::from_lambda(bp, lambda)?,
        theta0,
        delta,
        mu_l1,
    })
}

/// λ(θ) = ψ(θ+π/2) + ψ(θ−π/2) sampled on the boundary grid.
pub fn lambda_of_psi(bp: &BoundaryParam, psi: &dyn Fn(f64) -> f64) -> Vec<f64> {
    (0..bp.resolution())
        .map(|k| {
            let t = bp.theta(k);
            psi(t + PI / 2.0) + psi(t - PI / 2.0)
        })
        .collect()
}

/// Φ_ψ(γ(θ)) = ∫_{θ−π/2}^{θ+π/2} ψ(s) γ'(s−π/2) ds, by Gauss–Legendre
/// quadrature over the boundary grid cells.
pub fn phi_psi(bp: &BoundaryParam, psi: &dyn Fn(f64) -> f64, theta: f64) -> Vec2 {
    // integrate in u = s − π/2 so the pieces align with the grid
    let mut acc = Vec2::ZERO;
    for (u, w) in bp.cell_quadrature(theta - PI, theta, 6) {
        acc += bp.gamma_prime(u) * (psi(u + PI / 2.0) * w);
    }
    acc
}

/// Radial cutoff η: C¹ piecewise cubic, 0 outside (½, 2), η(1) = 1.
pub fn eta(r: f64) -> f64 {
    if r <= 0.5 || r >= 2.0 {
        0.0
    } else if r <= 1.0 {
        let s = 2.0 * (r - 0.5);
        s * s * (3.0 - 2.0 * s)
    } else {
        let s = r - 1.0;
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

pub fn eta_prime(r: f64) -> f64 {
    if r <= 0.5 || r >= 2.0 {
        0.0
    } else if r <= 1.0 {
        let s = 2.0 * (r - 0.5);
        2.0 * 6.0 * s * (1.0 - s)
    } else {
        let s = r - 1.0;
        -6.0 * s * (1.0 - s)
    }
}

/// Φ̂(rγ(θ)) = η(r)Φ(γ(θ)) on the whole plane, with the production
/// coefficient Ψ.
#[derive(Clone, Debug)]
pub struct ExtendedEntropy {
    pub entropy: EntropyFn,
    bp: Arc<BoundaryParam>,
}

impl ExtendedEntropy {
    pub fn new(bp: Arc<BoundaryParam>, entropy: EntropyFn) -> Result<Self> {
        if !entropy.is_admissible() {
            return invalid("extended entropy needs an admissible entropy");
        }
        if entropy.lambda().len() != bp.resolution() {
            return invalid("entropy and boundary resolutions differ");
        }
        Ok(ExtendedEntropy { entropy, bp })
    }

    pub fn boundary(&self) -> &BoundaryParam {
        &self.bp
    }

    /// (Φ̂(z), Ψ(z)).
    pub fn eval(&self, z: Vec2) -> (Vec2, Vec2) {
        let r = self.bp.norm_value(z);
        if r <= 0.5 || r >= 2.0 || !r.is_finite() {
            return (Vec2::ZERO, Vec2::ZERO);
        }
        let theta = self
            .bp
            .theta_of_point(z / r)
            .expect("radial projection lies on the boundary");
        let phi = self.entropy.phi_at(theta);
        let g = self.bp.gamma(theta);
        let lam = self.entropy.lambda_at(theta);
        let e = eta(r);
        (phi * e, g * (e * lam / (r * r)) - phi * (eta_prime(r) / r))
    }
}

/// Convenience: c_λ = (Φ(z⁺) − Φ(z⁻))·ν for boundary parameters θ±.
pub fn jump_functional(e: &EntropyFn, theta_plus: f64, theta_minus: f64, nu: Vec2) -> f64 {
    (e.phi_at(theta_plus) - e.phi_at(theta_minus)).dot(nu)
}
