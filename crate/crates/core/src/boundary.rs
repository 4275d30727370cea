//! Arc-length parametrization of the unit circle of a norm, rescaled to
//! perimeter 2π, with the tangent angle α and its density α'.

use crate::error::{invalid, Error, Result};
use crate::norm::NormSpec;
use crate::numerics::fit::line_fit;
use crate::numerics::quad::integrate;
use crate::numerics::roots::{bisect, newton_bracketed};
use crate::vec2::Vec2;
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Increments of α below this over one sample interval count as flat.
pub const FLAT_TOL: f64 = 1e-10;

/// Sampled boundary of the rescaled unit ball. Immutable once built.
#[derive(Clone, Debug)]
pub struct BoundaryParam {
    norm: NormSpec,
    n: usize,
    h: f64,
    kappa: f64,
    perimeter: f64,
    gamma: Vec<Vec2>,
    gamma_prime: Vec<Vec2>,
    alpha: Vec<f64>,
    alpha_prime: Vec<f64>,
    polar: Vec<f64>,
    flat_intervals: usize,
    inradius: f64,
}

/// Interpolated boundary data at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub gamma: Vec2,
    pub gamma_prime: Vec2,
    pub alpha: f64,
    pub alpha_prime: f64,
}

/// Worst-case deviations of the sampled invariants.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    /// max | |γ'| − 1 | over samples.
    pub unit_tangent: f64,
    /// min over samples of α(θ_{k+1}) − α(θ_k); must be ≥ 0.
    pub min_alpha_increment: f64,
    /// max |α(θ+π) − α(θ) − π| over samples.
    pub half_turn: f64,
    /// max |γ(θ+π) + γ(θ)| at cell midpoints.
    pub antipodal: f64,
    /// |∮ γ' dθ|.
    pub closure: f64,
    /// |∫ α' dθ − 2π|.
    pub turning: f64,
    /// min iγ·γ'.
    pub inradius: f64,
    /// max | |dγ/dθ| − 1 | of the interpolant at cell midpoints (interpolation quality).
    pub arc_speed: f64,
}

impl InvariantReport {
    pub fn passes(&self) -> bool {
        self.unit_tangent < 1e-8
            && self.min_alpha_increment >= -1e-12
            && self.half_turn < 1e-10
            && self.antipodal < 1e-8
            && self.closure < 1e-8
            && self.turning < 1e-6
            && self.inradius > 0.0
    }
}

/// Result of [`BoundaryParam::power_type_estimate`].
#[derive(Clone, Debug, Serialize)]
pub struct PowerType {
    pub exponent: f64,
    pub constant: f64,
    /// (‖x−y‖, 1 − ‖(x+y)/2‖) pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

fn polar_speed(norm: &NormSpec, phi: f64) -> f64 {
    let e = Vec2::polar(phi);
    let rho = 1.0 / norm.value(e);
    let drho = -rho * rho * norm.gradient(e).dot(e.rot());
    rho.hypot(drho)
}

impl BoundaryParam {
    /// Traces the unit circle of `norm` and resamples it uniformly in arc
    /// length after rescaling by κ = perimeter / 2π. `resolution` must be even
    /// and at least 64.
    pub fn trace(norm: &NormSpec, resolution: usize) -> Result<Self> {
        norm.validate()?;
        if resolution < 64 || resolution % 2 != 0 {
            return invalid(format!("resolution must be even and >= 64, got {resolution}"));
        }
        let n = resolution;
        let half = n / 2;
        let panels = (2 * n).max(256);
        let dphi = PI / panels as f64;
        let speed = |phi: f64| polar_speed(norm, phi);
        let mut cum = Vec::with_capacity(panels + 1);
        cum.push(0.0);
        for j in 0..panels {
            let v = integrate(speed, j as f64 * dphi, (j + 1) as f64 * dphi, 1e-15, 1e-14)?;
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonConvergence {
                    what: "boundary tracing",
                    iterations: j,
                    detail: format!("bad arc-length increment {v} near polar angle {}", j as f64 * dphi),
                });
            }
            cum.push(cum[j] + v);
        }
        let half_len = cum[panels];
        let kappa = half_len / PI;
        let h = TAU / n as f64;
        let mut polar = vec![0.0; n];
        for k in 1..half {
            let target = k as f64 * h * kappa;
            let j = cum.partition_point(|&c| c <= target) - 1;
            let a = j as f64 * dphi;
            let b = (a + dphi).min(PI);
            let base = cum[j];
            let phi = newton_bracketed(
                |phi| {
                    let s = integrate(speed, a, phi, 1e-16, 1e-15).unwrap_or(f64::NAN);
                    (base + s - target, speed(phi))
                },
                a,
                b,
                1e-15,
            )
            .ok_or_else(|| Error::NonConvergence {
                what: "boundary tracing",
                iterations: k,
                detail: "arc-length inversion lost its bracket".into(),
            })?;
            polar[k] = phi;
        }
        let mut gamma = vec![Vec2::ZERO; n];
        let mut gamma_prime = vec![Vec2::ZERO; n];
        let mut alpha = vec![0.0; n];
        for k in 0..half {
            let e = Vec2::polar(polar[k]);
            gamma[k] = e / (norm.value(e) * kappa);
            gamma_prime[k] = norm.gradient(e).rot().normalized();
            let a = gamma_prime[k].arg();
            alpha[k] = if k == 0 {
                a.rem_euclid(TAU)
            } else {
                let prev = alpha[k - 1];
                prev + (a - prev + PI).rem_euclid(TAU) - PI
            };
            if !(gamma[k].is_finite() && alpha[k].is_finite()) {
                return Err(Error::NonConvergence {
                    what: "boundary tracing",
                    iterations: k,
                    detail: "non-finite boundary sample".into(),
                });
            }
        }
        for k in 0..half {
            polar[k + half] = polar[k] + PI;
            gamma[k + half] = -gamma[k];
            gamma_prime[k + half] = -gamma_prime[k];
            alpha[k + half] = alpha[k] + PI;
        }
        let mut flat_intervals = 0;
        for k in 0..n {
            let next = if k + 1 < n { alpha[k + 1] } else { alpha[0] + TAU };
            let d = next - alpha[k];
            if d < -1e-9 {
                return Err(Error::NonConvergence {
                    what: "boundary tracing",
                    iterations: k,
                    detail: format!("tangent angle decreases by {:.3e}; the norm is not convex", -d),
                });
            }
            if d < FLAT_TOL {
                flat_intervals += 1;
            }
        }
        let alpha_prime: Vec<f64> = (0..n)
            .map(|k| {
                let next = if k + 1 < n { alpha[k + 1] } else { alpha[0] + TAU };
                let prev = if k > 0 { alpha[k - 1] } else { alpha[n - 1] - TAU };
                ((next - prev) / (2.0 * h)).max(0.0)
            })
            .collect();
        let inradius = (0..n).map(|k| gamma[k].cross(gamma_prime[k])).fold(f64::INFINITY, f64::min);
        Ok(BoundaryParam {
            norm: norm.clone(),
            n,
            h,
            kappa,
            perimeter: 2.0 * half_len,
            gamma,
            gamma_prime,
            alpha,
            alpha_prime,
            polar,
            flat_intervals,
            inradius,
        })
    }

    pub fn norm(&self) -> &NormSpec {
        &self.norm
    }
    pub fn resolution(&self) -> usize {
        self.n
    }
    /// Grid spacing 2π/N.
    pub fn spacing(&self) -> f64 {
        self.h
    }
    /// κ: the multiplier applied to the input norm (κ = perimeter / 2π).
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    /// Perimeter of the unit circle of the input norm.
    pub fn input_perimeter(&self) -> f64 {
        self.perimeter
    }
    /// Linear factor 1/κ by which the input unit circle is shrunk.
    pub fn boundary_scale(&self) -> f64 {
        1.0 / self.kappa
    }
    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.h
    }
    pub fn gamma_samples(&self) -> &[Vec2] {
        &self.gamma
    }
    pub fn gamma_prime_samples(&self) -> &[Vec2] {
        &self.gamma_prime
    }
    pub fn alpha_samples(&self) -> &[f64] {
        &self.alpha
    }
    pub fn alpha_prime_samples(&self) -> &[f64] {
        &self.alpha_prime
    }
    /// Number of sample intervals over which α is flat to within [`FLAT_TOL`].
    pub fn flat_intervals(&self) -> usize {
        self.flat_intervals
    }
    pub fn flat_warning(&self) -> bool {
        self.flat_intervals > 0
    }
    /// min over samples of iγ·γ' (the inradius of the rescaled ball).
    pub fn inradius(&self) -> f64 {
        self.inradius
    }

    /// Rescaled norm κ‖z‖.
    pub fn norm_value(&self, z: Vec2) -> f64 {
        self.kappa * self.norm.value(z)
    }

    pub fn norm_gradient(&self, z: Vec2) -> Vec2 {
        self.norm.gradient(z) * self.kappa
    }

    /// α at sample k extended additively to any integer index.
    pub fn alpha_at(&self, k: i64) -> f64 {
        let n = self.n as i64;
        let q = k.div_euclid(n);
        self.alpha[k.rem_euclid(n) as usize] + TAU * q as f64
    }

    fn locate(&self, theta: f64) -> (usize, f64, f64) {
        let q = (theta / TAU).floor();
        let r = theta - q * TAU;
        let mut k = (r / self.h).floor() as isize;
        k = k.clamp(0, self.n as isize - 1);
        let s = ((r - k as f64 * self.h) / self.h).clamp(0.0, 1.0);
        (k as usize, s, q)
    }

    fn next(&self, k: usize) -> usize {
        if k + 1 == self.n {
            0
        } else {
            k + 1
        }
    }

    /// Cubic Hermite interpolant of γ.
    pub fn gamma(&self, theta: f64) -> Vec2 {
        let (k, s, _) = self.locate(theta);
        let k1 = self.next(k);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.gamma[k] * h00 + self.gamma_prime[k] * (h10 * self.h) + self.gamma[k1] * h01 + self.gamma_prime[k1] * (h11 * self.h)
    }

    /// Derivative of the Hermite interpolant of γ.
    pub fn curve_tangent(&self, theta: f64) -> Vec2 {
        let (k, s, _) = self.locate(theta);
        let k1 = self.next(k);
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (self.gamma[k] * d00 + self.gamma[k1] * d01) / self.h + self.gamma_prime[k] * d10 + self.gamma_prime[k1] * d11
    }

    /// Unwrapped α, piecewise linear between samples.
    pub fn alpha(&self, theta: f64) -> f64 {
        let (k, s, q) = self.locate(theta);
        let a0 = self.alpha[k];
        let a1 = if k + 1 == self.n { self.alpha[0] + TAU } else { self.alpha[k + 1] };
        a0 + s * (a1 - a0) + TAU * q
    }

    /// γ'(θ) = e^{iα(θ)}.
    pub fn gamma_prime(&self, theta: f64) -> Vec2 {
        Vec2::polar(self.alpha(theta))
    }

    pub fn alpha_prime(&self, theta: f64) -> f64 {
        let (k, s, _) = self.locate(theta);
        let k1 = self.next(k);
        self.alpha_prime[k] * (1.0 - s) + self.alpha_prime[k1] * s
    }

    /// Gauss–Legendre nodes and weights on [lo, hi], with `points` nodes in
    /// each piece between consecutive grid nodes (where α is linear).
    pub fn cell_quadrature(&self, lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
        let (x, w) = crate::numerics::quad::gauss_legendre(points);
        let mut out = Vec::new();
        if !(hi > lo) {
            return out;
        }
        let k0 = (lo / self.h).floor() as i64;
        let k1 = (hi / self.h).ceil() as i64;
        for k in k0..k1 {
            let a = (k as f64 * self.h).max(lo);
            let b = ((k + 1) as f64 * self.h).min(hi);
            if b > a {
                let c = 0.5 * (a + b);
                let r = 0.5 * (b - a);
                out.extend(x.iter().zip(&w).map(|(xi, wi)| (c + r * xi, r * wi)));
            }
        }
        out
    }

    pub fn query(&self, theta: f64) -> BoundaryPoint {
        BoundaryPoint {
            gamma: self.gamma(theta),
            gamma_prime: self.gamma_prime(theta),
            alpha: self.alpha(theta),
            alpha_prime: self.alpha_prime(theta),
        }
    }

    /// Inverse of γ: the parameter in [0, 2π) of a point on the rescaled unit circle.
    pub fn theta_of_point(&self, z: Vec2) -> Result<f64> {
        let residual = (self.norm_value(z) - 1.0).abs();
        if !(residual <= 1e-6) {
            return Err(Error::NotOnBoundary { residual });
        }
        let phi = z.arg().rem_euclid(TAU);
        let k = (self.polar.partition_point(|&p| p <= phi)).max(1) - 1;
        let dir = z.normalized();
        let a = self.theta(k);
        let b = a + self.h;
        let f = |t: f64| self.gamma(t).cross(dir);
        if f(a) <= 0.0 {
            return Ok(a);
        }
        let t = newton_bracketed(|t| (f(t), self.curve_tangent(t).cross(dir)), a, b, 1e-15)
            .ok_or_else(|| Error::Internal("theta_of_point lost its bracket".into()))?;
        Ok(t.rem_euclid(TAU))
    }

    /// Parameter of the maximizer of w·γ(θ) (w ≠ 0).
    pub fn support_theta(&self, w: Vec2) -> f64 {
        let target = w.arg() + PI / 2.0;
        let a0 = self.alpha[0];
        let t = a0 + (target - a0).rem_euclid(TAU);
        let k = self.alpha.partition_point(|&a| a <= t).max(1) - 1;
        let a = self.theta(k);
        let b = a + self.h;
        let d = |th: f64| w.dot(self.curve_tangent(th));
        if d(a) == 0.0 {
            return a;
        }
        bisect(d, a, b, 1e-16)
            .or_else(|| bisect(d, a - self.h, b + self.h, 1e-16))
            .unwrap_or(a)
            .rem_euclid(TAU)
    }

    /// Dual norm max_θ w·γ(θ) of the rescaled norm.
    pub fn dual_norm(&self, w: Vec2) -> f64 {
        if w == Vec2::ZERO {
            return 0.0;
        }
        w.dot(self.gamma(self.support_theta(w)))
    }

    /// V_B(x): the boundary point maximizing x·γ (the gradient of the dual norm).
    pub fn vortex(&self, x: Vec2) -> Result<Vec2> {
        if x == Vec2::ZERO || !x.is_finite() {
            return invalid("vortex direction must be a nonzero finite vector");
        }
        Ok(self.gamma(self.support_theta(x)))
    }

    /// X(re^{iθ}) = rγ(θ).
    pub fn polar_map(&self, z: Vec2) -> Vec2 {
        let r = z.norm();
        if r == 0.0 {
            return Vec2::ZERO;
        }
        self.gamma(z.arg().rem_euclid(TAU)) * r
    }

    /// X⁻¹(w) = ‖w‖ e^{iθ} with γ(θ) = w/‖w‖.
    pub fn polar_map_inverse(&self, w: Vec2) -> Result<Vec2> {
        let r = self.norm_value(w);
        if r == 0.0 {
            return Ok(Vec2::ZERO);
        }
        Ok(Vec2::polar(self.theta_of_point(w / r)?) * r)
    }

    /// Estimates the power type p in 1 − ‖(x+y)/2‖ ≥ K‖x−y‖^p from the
    /// worst-case defect at dyadic sample separations.
    pub fn power_type_estimate(&self, sample_count: usize) -> Result<PowerType> {
        if sample_count < 100 {
            return invalid("power_type_estimate needs sample_count >= 100");
        }
        let stride = (self.n / sample_count).max(1);
        let mut points = Vec::new();
        let mut s = 2 * stride;
        while s <= self.n / 16 {
            let mut best = (f64::INFINITY, 0.0);
            let mut k = 0;
            while k < self.n {
                let x = self.gamma[k];
                let y = self.gamma[(k + s) % self.n];
                let defect = 1.0 - self.norm_value((x + y) * 0.5);
                if defect < best.0 {
                    best = (defect, self.norm_value(x - y));
                }
                k += stride;
            }
            if best.0 > 0.0 {
                points.push((best.1, best.0));
            }
            s *= 2;
        }
        if points.len() < 2 {
            return invalid("resolution too coarse for a power-type fit");
        }
        let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let f = line_fit(&lx, &ly);
        Ok(PowerType {
            exponent: f.slope,
            constant: f.intercept.exp(),
            points,
        })
    }

    /// Evaluates the structural invariants of the sampled parametrization.
    pub fn check_invariants(&self) -> InvariantReport {
        let n = self.n;
        let half = n / 2;
        let mut r = InvariantReport {
            unit_tangent: 0.0,
            min_alpha_increment: f64::INFINITY,
            half_turn: 0.0,
            antipodal: 0.0,
            closure: 0.0,
            turning: 0.0,
            inradius: self.inradius,
            arc_speed: 0.0,
        };
        let mut closure = Vec2::ZERO;
        for k in 0..n {
            r.unit_tangent = r.unit_tangent.max((self.gamma_prime[k].norm() - 1.0).abs());
            r.min_alpha_increment = r.min_alpha_increment.min(self.alpha_at(k as i64 + 1) - self.alpha[k]);
            r.half_turn = r.half_turn.max((self.alpha_at((k + half) as i64) - self.alpha[k] - PI).abs());
            let t = (k as f64 + 0.5) * self.h;
            r.antipodal = r.antipodal.max((self.gamma(t + PI) + self.gamma(t)).norm());
            r.arc_speed = r.arc_speed.max((self.curve_tangent(t).norm() - 1.0).abs());
            closure += self.gamma_prime[k] * self.h;
        }
        r.closure = closure.norm();
        r.turning = (self.alpha_prime.iter().sum::<f64>() * self.h - TAU).abs();
        r
    }

    /// Writes the sample table (theta, gx, gy, gpx, gpy, alpha, alpha_prime).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "theta,gx,gy,gpx,gpy,alpha,alpha_prime")?;
        for k in 0..self.n {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.theta(k),
                self.gamma[k].x,
                self.gamma[k].y,
                self.gamma_prime[k].x,
                self.gamma_prime[k].y,
                self.alpha[k],
                self.alpha_prime[k]
            )?;
        }
        Ok(())
    }
}
