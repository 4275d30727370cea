//! Jump costs c^1D, c^ENT and Π between two states of ∂B, the regularity
//! functionals Δ_φ and ω, and grid scans comparing the costs.

use crate::boundary::BoundaryParam;
use crate::error::{invalid, Error, Result};
use crate::numerics::lp::{maximize, BoundedLp};
use crate::numerics::quad::{gauss_legendre, integrate, GaussRule};
use crate::numerics::roots::bisect;
use crate::vec2::Vec2;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

/// Widths within this distance of π count as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-9;
/// Allowed excess of c^ENT over Π before a pair counts as a violation.
pub const CENT_PI_SLACK: f64 = 1e-6;

/// Two distinct states z± of ∂B with the derived jump geometry.
#[derive(Clone, Debug, Serialize)]
pub struct JumpPair {
    pub z_plus: Vec2,
    pub z_minus: Vec2,
    pub theta_plus: f64,
    /// Representative of the parameter of z⁻ within π of `theta_plus`.
    pub theta_minus: f64,
    /// i(z⁺−z⁻)/|z⁺−z⁻|.
    pub nu: Vec2,
    /// z⁺·ν = z⁻·ν.
    pub a: f64,
    /// Root of γ'(θ)·ν between θ⁻ and θ⁺; absent for antipodal pairs.
    pub theta_tilde: Option<f64>,
    pub antipodal: bool,
}

impl JumpPair {
    pub fn new(bp: &BoundaryParam, z_plus: Vec2, z_minus: Vec2) -> Result<Self> {
        let tp = bp.theta_of_point(z_plus)?;
        let tm = bp.theta_of_point(z_minus)?;
        Self::build(bp, z_plus, z_minus, tp, tm)
    }

    pub fn from_thetas(bp: &BoundaryParam, theta_plus: f64, theta_minus: f64) -> Result<Self> {
        if !(theta_plus.is_finite() && theta_minus.is_finite()) {
            return invalid("jump parameters must be finite");
        }
        Self::build(bp, bp.gamma(theta_plus), bp.gamma(theta_minus), theta_plus, theta_minus)
    }

    fn build(bp: &BoundaryParam, zp: Vec2, zm: Vec2, tp: f64, tm: f64) -> Result<Self> {
        let d = zp - zm;
        let tm = tm + TAU * ((tp - tm) / TAU).round();
        if d.norm() < 1e-13 || (tp - tm).abs() < 1e-13 {
            return invalid("z+ and z- coincide");
        }
        let nu = d.rot() / d.norm();
        let a = 0.5 * (zp.dot(nu) + zm.dot(nu));
        let antipodal = PI - (tp - tm).abs() < ANTIPODAL_TOL;
        let theta_tilde = if antipodal {
            None
        } else {
            let (lo, hi) = (tp.min(tm), tp.max(tm));
            let f = |t: f64| bp.gamma_prime(t).dot(nu);
            // at widths near the grid spacing the interpolants may miss the sign change
            Some(bisect(f, lo, hi, 1e-15).unwrap_or(if f(lo).abs() < f(hi).abs() { lo } else { hi }))
        };
        Ok(JumpPair {
            z_plus: zp,
            z_minus: zm,
            theta_plus: tp,
            theta_minus: tm,
            nu,
            a,
            theta_tilde,
            antipodal,
        })
    }

    /// Geodesic parameter distance |θ⁺ − θ⁻| ∈ (0, π].
    pub fn width(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }
    pub fn lo(&self) -> f64 {
        self.theta_plus.min(self.theta_minus)
    }
    pub fn hi(&self) -> f64 {
        self.theta_plus.max(self.theta_minus)
    }
    /// +1 if θ⁻ < θ⁺, else −1. (θ−θ̃)(γ'(θ)·ν)·orientation ≥ 0 on the jump arc.
    pub fn orientation(&self) -> f64 {
        (self.theta_plus - self.theta_minus).signum()
    }
    pub fn swapped(&self) -> JumpPair {
        JumpPair {
            z_plus: self.z_minus,
            z_minus: self.z_plus,
            theta_plus: self.theta_minus,
            theta_minus: self.theta_plus,
            nu: -self.nu,
            a: -self.a,
            theta_tilde: self.theta_tilde,
            antipodal: self.antipodal,
        }
    }
}

/// c^1D = 2|∫ (1 − ‖aν + s iν‖²) ds| over s between z⁻·iν and z⁺·iν.
pub fn c1d(bp: &BoundaryParam, jp: &JumpPair) -> Result<f64> {
    let inu = jp.nu.rot();
    let (s0, s1) = (jp.z_minus.dot(inu), jp.z_plus.dot(inu));
    let (lo, hi) = (s0.min(s1), s0.max(s1));
    let v = integrate(
        |s| {
            let r = bp.norm_value(jp.nu * jp.a + inu * s);
            1.0 - r * r
        },
        lo,
        hi,
        1e-14,
        1e-12,
    )?;
    Ok(2.0 * v.abs())
}

/// |∫ (θ−θ̃)(γ'(θ)·ν) dθ| over the jump arc; the value of c^ENT for jumps
/// narrower than π/2.
pub fn cent_explicit(bp: &BoundaryParam, jp: &JumpPair) -> Result<f64> {
    let w = jp.width();
    if w >= FRAC_PI_2 {
        return Err(Error::JumpTooWide { width: w });
    }
    let tt = jp.theta_tilde.ok_or(Error::JumpTooWide { width: w })?;
    let v: f64 = bp
        .cell_quadrature(jp.lo(), jp.hi(), 8)
        .into_iter()
        .map(|(t, wt)| wt * (t - tt) * bp.gamma_prime(t).dot(jp.nu))
        .sum();
    Ok(v.abs())
}

/// The same quantity after integrating by parts: |∫ (a − γ(θ)·ν) dθ|.
pub fn cent_by_parts(bp: &BoundaryParam, jp: &JumpPair) -> f64 {
    bp.cell_quadrature(jp.lo(), jp.hi(), 8)
        .into_iter()
        .map(|(t, wt)| wt * (jp.a - bp.gamma(t).dot(jp.nu)))
        .sum::<f64>()
        .abs()
}

/// Result of the discretized c^ENT linear program.
#[derive(Clone, Debug, Serialize)]
pub struct CentLp {
    pub value: f64,
    /// Optimal λ on the grid θ_k = 2πk/n, normalized to zero mean.
    pub lambda: Vec<f64>,
    pub iterations: usize,
}

/// ∫ φ_k(θ) γ'(θ) dθ over [lo, hi] for the periodic hat functions φ_k of
/// the n-point grid, splitting at both grids so α is linear on each piece.
fn hat_integrals(bp: &BoundaryParam, n: usize, lo: f64, hi: f64) -> Vec<Vec2> {
    let hl = TAU / n as f64;
    let hb = bp.spacing();
    let mut cuts = vec![lo, hi];
    for step in [hl, hb] {
        let mut k = (lo / step).floor() as i64 + 1;
        while (k as f64) * step < hi {
            cuts.push(k as f64 * step);
            k += 1;
        }
    }
    cuts.sort_by(f64::total_cmp);
    let (x, w) = gauss_legendre(8);
    let mut out = vec![Vec2::ZERO; n];
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a <= 1e-15 {
            continue;
        }
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            let t = c + r * xi;
            let g = bp.gamma_prime(t) * (r * wi);
            let u = t / hl;
            let j = u.floor();
            let s = u - j;
            let j = (j as i64).rem_euclid(n as i64) as usize;
            out[j] += g * (1.0 - s);
            out[(j + 1) % n] += g * s;
        }
    }
    out
}

/// sup ∫ λγ'·ν over the jump arc, over λ with ‖λ'‖∞ ≤ 1 and ∮λγ' = 0,
/// discretized with piecewise-linear λ on an n-point grid.
pub fn cent_lp(bp: &BoundaryParam, jp: &JumpPair, n: usize) -> Result<CentLp> {
    if n < 128 {
        return invalid(format!("LP resolution must be at least 128, got {n}"));
    }
    let hl = TAU / n as f64;
    let g = hat_integrals(bp, n, 0.0, TAU);
    let arc = hat_integrals(bp, n, jp.lo(), jp.hi());
    // ν from the chord of the interpolated tangent field, so that ∫γ'·ν
    // vanishes over the arc and constant shifts of λ earn nothing
    let chord = arc.iter().fold(Vec2::ZERO, |s, v| s + *v);
    let mut nu = chord.rot() / chord.norm();
    if nu.dot(jp.nu) < 0.0 {
        nu = -nu;
    }
    let obj: Vec<f64> = arc.iter().map(|v| v.dot(nu)).collect();
    let gsum = g.iter().fold(Vec2::ZERO, |s, v| s + *v);
    let osum: f64 = obj.iter().sum();
    // λ_k = Σ_j d_j (1[j<k] − (n−1−j)/n) in terms of the increments d_j
    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; n];
    let mut c = vec![0.0; n];
    let (mut sg, mut so) = (Vec2::ZERO, 0.0);
    for j in (0..n).rev() {
        let frac = (n - 1 - j) as f64 / n as f64;
        rx[j] = sg.x - gsum.x * frac;
        ry[j] = sg.y - gsum.y * frac;
        c[j] = so - osum * frac;
        sg += g[j];
        so += obj[j];
    }
    let lp = BoundedLp {
        a: vec![vec![1.0; n], rx, ry],
        b: vec![0.0; 3],
        c,
        lower: vec![-hl; n],
        upper: vec![hl; n],
    };
    let sol = maximize(&lp, 100 * n)?;
    let d = &sol.x;
    let mut lambda = vec![0.0; n];
    lambda[0] = -(0..n).map(|j| d[j] * (n - 1 - j) as f64 / n as f64).sum::<f64>();
    for k in 1..n {
        lambda[k] = lambda[k - 1] + d[k - 1];
    }
    Ok(CentLp {
        value: sol.objective.max(0.0),
        lambda,
        iterations: sol.iterations,
    })
}

/// Π between two boundary parameters.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PiCost {
    pub value: f64,
    /// 2∫(τ−θ₁)(θ₂−τ)α'(τ)dτ with the sampled curvature density.
    pub remlam: f64,
    pub width: f64,
    /// The two forms disagree by more than 1%.
    pub flagged: bool,
}

const PI_POINTS: usize = 2048;

fn pi_midpoint(bp: &BoundaryParam, lo: f64, w: f64, m: usize) -> f64 {
    let dt = w / m as f64;
    // α is nondecreasing, so the samples are sorted
    let s: f64 = (0..m)
        .map(|k| bp.alpha(lo + (k as f64 + 0.5) * dt) * (2.0 * k as f64 - m as f64 + 1.0))
        .sum();
    2.0 * s * dt * dt
}

/// Π(θ₁, θ₂) = ∬ |α(t) − α(s)| dt ds over the shorter arc between the two
/// parameters, by midpoint sums at two resolutions with Richardson
/// extrapolation.
pub fn pi_cost(bp: &BoundaryParam, theta1: f64, theta2: f64) -> PiCost {
    let mut w = theta2 - theta1;
    w -= TAU * (w / TAU).round();
    let lo = theta1.min(theta1 + w);
    let w = w.abs();
    if w == 0.0 {
        return PiCost { value: 0.0, remlam: 0.0, width: 0.0, flagged: false };
    }
    let i1 = pi_midpoint(bp, lo, w, PI_POINTS);
    let i2 = pi_midpoint(bp, lo, w, 2 * PI_POINTS);
    let value = ((4.0 * i2 - i1) / 3.0).max(0.0);
    let hi = lo + w;
    let remlam = 2.0
        * bp.cell_quadrature(lo, hi, 6)
            .into_iter()
            .map(|(t, wt)| wt * (t - lo) * (hi - t) * bp.alpha_prime(t))
            .sum::<f64>();
    let flagged = (value - remlam).abs() > 0.01 * value.max(remlam) && value.max(remlam) > 1e-300;
    PiCost { value, remlam, width: w, flagged }
}

/// Δ_φ(m₁, m₂) for the step kernel φ = sign on (−δ, δ), m₁, m₂ on the
/// euclidean unit circle:
/// ∬_{dist(t,s)<δ} φ(t−s) sin(α(t−π/2) − α(s−π/2)) Ξ(t)Ξ(s) dt ds
/// with Ξ(t) = 1_{e^{it}·m₂>0} − 1_{e^{it}·m₁>0}.
pub fn delta_phi(bp: &BoundaryParam, m1: Vec2, m2: Vec2, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < FRAC_PI_2) {
        return invalid(format!("delta must lie in (0, pi/2), got {delta}"));
    }
    if (m1.norm() - 1.0).abs() > 1e-9 || (m2.norm() - 1.0).abs() > 1e-9 {
        return invalid("m1 and m2 must be euclidean unit vectors");
    }
    let t1 = m1.arg();
    let mut w = m2.arg() - t1;
    w -= TAU * (w / TAU).round();
    // Δ_φ is symmetric in (m₁, m₂); orient so that w ≥ 0
    let t1 = if w < 0.0 { t1 + w } else { t1 };
    let w = w.abs();
    if w == 0.0 {
        return Ok(0.0);
    }
    // Ξ = +1 on (θ₁+π/2, θ₂+π/2) and −1 on (θ₁−π/2, θ₂−π/2)
    let arcs = [(t1 + FRAC_PI_2, 1.0), (t1 - FRAC_PI_2, -1.0)];
    let rule = GaussRule::new(6);
    let panels = 8;
    let alpha_m = |t: f64| bp.alpha(t - FRAC_PI_2);
    let inner = |s: f64, lo: f64, hi: f64| -> f64 {
        let a_s = alpha_m(s);
        let f = |t: f64| (t - s).signum() * (alpha_m(t) - a_s).sin();
        let mut v = 0.0;
        if lo < s && s < hi {
            v += rule.composite(f, lo, s, panels) + rule.composite(f, s, hi, panels);
        } else if hi > lo {
            v += rule.composite(f, lo, hi, panels);
        }
        v
    };
    let mut total = 0.0;
    for &(a0, sa) in &arcs {
        for &(b0, sb) in &arcs {
            for k in [-1.0, 0.0, 1.0] {
                let (al, ah) = (a0 - TAU * k, a0 - TAU * k + w);
                let (bl, bh) = (b0, b0 + w);
                if al >= bh + delta || ah <= bl - delta {
                    continue;
                }
                let mut cuts = vec![bl, bh];
                for c in [al - delta, al + delta, ah - delta, ah + delta] {
                    if c > bl && c < bh {
                        cuts.push(c);
                    }
                }
                cuts.sort_by(f64::total_cmp);
                let mut acc = 0.0;
                for seg in cuts.windows(2) {
                    acc += rule.composite(
                        |s| {
                            let lo = al.max(s - delta);
                            let hi = ah.min(s + delta);
                            if hi > lo {
                                inner(s, lo, hi)
                            } else {
                                0.0
                            }
                        },
                        seg[0],
                        seg[1],
                        panels,
                    );
                }
                total += sa * sb * acc;
            }
        }
    }
    Ok(total)
}

/// Evaluates the extremal inverses of the nondecreasing α.
struct AlphaInverse<'a> {
    bp: &'a BoundaryParam,
    ext: Vec<f64>,
}

impl<'a> AlphaInverse<'a> {
    fn new(bp: &'a BoundaryParam) -> Self {
        let n = bp.resolution() as i64;
        AlphaInverse {
            bp,
            ext: (0..=n).map(|k| bp.alpha_at(k)).collect(),
        }
    }

    fn reduce(&self, y: f64) -> (f64, f64) {
        let q = ((y - self.ext[0]) / TAU).floor();
        (y - TAU * q, TAU * q)
    }

    /// sup{θ : α(θ) ≤ y}.
    fn upper(&self, y: f64) -> f64 {
        let (y, shift) = self.reduce(y);
        let h = self.bp.spacing();
        let k = self.ext.partition_point(|&a| a <= y).max(1) - 1;
        let k = k.min(self.ext.len() - 2);
        let (a0, a1) = (self.ext[k], self.ext[k + 1]);
        let s = if a1 > a0 { ((y - a0) / (a1 - a0)).clamp(0.0, 1.0) } else { 1.0 };
        (k as f64 + s) * h + shift
    }

    /// inf{θ : α(θ) ≥ y}.
    fn lower(&self, y: f64) -> f64 {
        let (y, shift) = self.reduce(y);
        let h = self.bp.spacing();
        let k = self.ext.partition_point(|&a| a < y).clamp(1, self.ext.len() - 1);
        let (a0, a1) = (self.ext[k - 1], self.ext[k]);
        let s = if a1 > a0 { ((y - a0) / (a1 - a0)).clamp(0.0, 1.0) } else { 0.0 };
        ((k - 1) as f64 + s) * h + shift
    }
}

/// ω(δ) = sup{|α⁻¹(t) − α⁻¹(s)| : |t − s| < δ}, the minimal modulus of
/// continuity of α⁻¹.
pub fn omega_modulus(bp: &BoundaryParam, delta: f64) -> f64 {
    if !(delta > 0.0) {
        return 0.0;
    }
    if delta >= TAU {
        return TAU * (delta / TAU).ceil();
    }
    let inv = AlphaInverse::new(bp);
    let n = bp.resolution();
    // the window length is piecewise linear in its start, extremal at breaks
    (0..n)
        .flat_map(|k| [inv.ext[k], inv.ext[k] - delta])
        .map(|a| inv.upper(a + delta) - inv.lower(a))
        .fold(0.0, f64::max)
}

/// ω⁻¹(y) = inf{δ : ω(δ) ≥ y}.
pub fn omega_inverse(bp: &BoundaryParam, y: f64) -> f64 {
    if !(y > 0.0) {
        return 0.0;
    }
    let (mut a, mut b) = (0.0, TAU);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if omega_modulus(bp, m) >= y {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Λ(m₁,m₂) / (δ² ω⁻¹(δ/2)) with m_j = e^{iθ_j} and δ = |m₁ − m₂|.
pub fn eqbes21_ratio(bp: &BoundaryParam, theta1: f64, theta2: f64) -> f64 {
    let d = (Vec2::polar(theta1) - Vec2::polar(theta2)).norm();
    pi_cost(bp, theta1, theta2).value / (d * d * omega_inverse(bp, 0.5 * d))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Eqbes21Report {
    pub pairs: usize,
    /// Largest c with Λ ≥ c δ² ω⁻¹(δ/2) on every pair.
    pub c: f64,
    pub max_ratio: f64,
    pub passes: bool,
}

pub fn check_eqbes21(bp: &BoundaryParam, pairs: &[(f64, f64)]) -> Eqbes21Report {
    let r: Vec<f64> = pairs.par_iter().map(|&(a, b)| eqbes21_ratio(bp, a, b)).collect();
    let c = r.iter().copied().fold(f64::INFINITY, f64::min);
    Eqbes21Report {
        pairs: pairs.len(),
        c,
        max_ratio: r.iter().copied().fold(0.0, f64::max),
        passes: c.is_finite() && c > 0.0,
    }
}

/// All costs of one jump.
#[derive(Clone, Debug, Serialize)]
pub struct CostReport {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub width: f64,
    pub c1d: f64,
    pub cent_explicit: Option<f64>,
    pub cent_lp: Option<f64>,
    pub pi: f64,
    pub pi_remlam: f64,
    pub pi_flagged: bool,
    /// c1d / cent, with cent the explicit value when present.
    pub ratio_c1d_cent: f64,
    pub ratio_cent_pi: f64,
}

impl CostReport {
    pub fn cent(&self) -> f64 {
        self.cent_explicit.or(self.cent_lp).unwrap_or(f64::NAN)
    }
}

/// Computes c^1D, c^ENT and Π. The LP runs when `lp_resolution` is given or
/// the jump is too wide for the explicit formula.
pub fn cost_report(bp: &BoundaryParam, jp: &JumpPair, lp_resolution: Option<usize>) -> Result<CostReport> {
    let c1 = c1d(bp, jp)?;
    let ce = match cent_explicit(bp, jp) {
        Ok(v) => Some(v),
        Err(Error::JumpTooWide { .. }) => None,
        Err(e) => return Err(e),
    };
    let n = lp_resolution.or(if ce.is_none() { Some(512) } else { None });
    let cl = match n {
        Some(n) => Some(cent_lp(bp, jp, n)?.value),
        None => None,
    };
    let pc = pi_cost(bp, jp.theta_minus, jp.theta_plus);
    let cent = ce.or(cl).unwrap_or(f64::NAN);
    Ok(CostReport {
        theta_minus: jp.theta_minus,
        theta_plus: jp.theta_plus,
        width: jp.width(),
        c1d: c1,
        cent_explicit: ce,
        cent_lp: cl,
        pi: pc.value,
        pi_remlam: pc.remlam,
        pi_flagged: pc.flagged,
        ratio_c1d_cent: c1 / cent,
        ratio_cent_pi: cent / pc.value,
    })
}

/// How each cost transforms when computed for the input norm rather than its
/// rescaled version κ‖·‖ (κ = input perimeter / 2π, λ unit-Lipschitz in the
/// input arc length): cost_input = κ^exponent · cost.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScalingLedger {
    pub c1d: i32,
    pub cent: i32,
    pub pi: i32,
}

pub const SCALING: ScalingLedger = ScalingLedger { c1d: 1, cent: 2, pi: 2 };

impl CostReport {
    /// The report expressed in the units of the unrescaled input norm.
    pub fn to_input_units(&self, kappa: f64) -> CostReport {
        let s = |e: i32| kappa.powi(e);
        let mut r = self.clone();
        r.c1d *= s(SCALING.c1d);
        r.cent_explicit = r.cent_explicit.map(|v| v * s(SCALING.cent));
        r.cent_lp = r.cent_lp.map(|v| v * s(SCALING.cent));
        r.pi *= s(SCALING.pi);
        r.pi_remlam *= s(SCALING.pi);
        r.ratio_c1d_cent = r.c1d / r.cent();
        r.ratio_cent_pi = r.cent() / r.pi;
        r
    }
}

#[derive(Clone, Debug)]
pub struct BoundsOptions {
    /// Base angles and widths per axis of the pair grid.
    pub grid: usize,
    pub min_width: f64,
    pub lp_resolution: usize,
    /// Boundary points for the small-jump limit.
    pub limit_points: usize,
    /// Shrinking widths used to extrapolate the small-jump ratio.
    pub limit_widths: [f64; 3],
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            grid: 64,
            min_width: 1e-3,
            lp_resolution: 512,
            limit_points: 8,
            limit_widths: [0.04, 0.02, 0.01],
        }
    }
}

/// One row of a cost scan.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanRow {
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub c1d: f64,
    pub cent: f64,
    pub pi: f64,
    pub ratio: f64,
    pub lp: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmallJumpLimit {
    pub theta: f64,
    /// Extrapolated lim c^1D/c^ENT.
    pub limit: f64,
    /// 4/|iγ'(θ)·γ(θ)|.
    pub candidate_4: f64,
    /// 2/|iγ'(θ)·γ(θ)|.
    pub candidate_2: f64,
    pub rel_err_4: f64,
    pub rel_err_2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub norm: String,
    pub kappa: f64,
    pub pairs: usize,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    pub sup_at: [f64; 2],
    pub inf_at: [f64; 2],
    /// Pairs with c^ENT > Π + slack.
    pub violations: usize,
    pub max_cent_minus_pi: f64,
    pub small_jump: Vec<SmallJumpLimit>,
    /// Which candidate constant the small-jump limits match ("4", "2" or "neither").
    pub small_jump_match: String,
    pub max_rel_err_4: f64,
    pub max_rel_err_2: f64,
    /// The smallest width spans fewer than two boundary samples, so ratios
    /// at the narrowest pairs reflect interpolation rather than the norm.
    pub under_resolved: bool,
}

/// Pair grid: `grid` base parameters times `grid` widths geometrically
/// spaced from `min_width` to π.
pub fn pair_grid(grid: usize, min_width: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        let t = TAU * i as f64 / grid as f64;
        for j in 0..grid {
            let w = if grid == 1 { PI } else { min_width * (PI / min_width).powf(j as f64 / (grid - 1) as f64) };
            out.push((t, t + w));
        }
    }
    out
}

pub fn scan_pairs(bp: &BoundaryParam, pairs: &[(f64, f64)], lp_resolution: usize) -> Result<Vec<ScanRow>> {
    pairs
        .par_iter()
        .map(|&(tm, tp)| {
            let jp = JumpPair::from_thetas(bp, tp, tm)?;
            let c1 = c1d(bp, &jp)?;
            let (cent, lp) = match cent_explicit(bp, &jp) {
                Ok(v) => (v, false),
                Err(Error::JumpTooWide { .. }) => (cent_lp(bp, &jp, lp_resolution)?.value, true),
                Err(e) => return Err(e),
            };
            let pi = pi_cost(bp, tm, tp).value;
            Ok(ScanRow { theta_minus: tm, theta_plus: tp, c1d: c1, cent, pi, ratio: c1 / cent, lp })
        })
        .collect()
}

pub fn write_scan_csv<W: Write>(mut w: W, rows: &[ScanRow]) -> std::io::Result<()> {
    writeln!(w, "theta_minus,theta_plus,c1d,cent,pi,ratio")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.theta_minus, r.theta_plus, r.c1d, r.cent, r.pi, r.ratio)?;
    }
    Ok(())
}

/// c^1D/c^ENT along pairs of width w centred at θ, extrapolated to w → 0 by
/// the quadratic through the three widths.
pub fn small_jump_limit(bp: &BoundaryParam, theta: f64, widths: [f64; 3]) -> Result<SmallJumpLimit> {
    let mut r = [0.0; 3];
    for (i, w) in widths.iter().enumerate() {
        let jp = JumpPair::from_thetas(bp, theta + 0.5 * w, theta - 0.5 * w)?;
        r[i] = c1d(bp, &jp)? / cent_explicit(bp, &jp)?;
    }
    let [w0, w1, w2] = widths;
    let limit = r[0] * w1 * w2 / ((w0 - w1) * (w0 - w2))
        + r[1] * w0 * w2 / ((w1 - w0) * (w1 - w2))
        + r[2] * w0 * w1 / ((w2 - w0) * (w2 - w1));
    let q = bp.gamma_prime(theta).rot().dot(bp.gamma(theta)).abs();
    let (c4, c2) = (4.0 / q, 2.0 / q);
    Ok(SmallJumpLimit {
        theta,
        limit,
        candidate_4: c4,
        candidate_2: c2,
        rel_err_4: (limit - c4).abs() / c4,
        rel_err_2: (limit - c2).abs() / c2,
    })
}

pub fn verify_bounds(bp: &BoundaryParam, opts: &BoundsOptions) -> Result<(BoundsReport, Vec<ScanRow>)> {
    if opts.grid < 2 || !(opts.min_width > 0.0 && opts.min_width < PI) {
        return invalid("grid must be at least 2 and min_width in (0, pi)");
    }
    let rows = scan_pairs(bp, &pair_grid(opts.grid, opts.min_width), opts.lp_resolution)?;
    let mut sup = (f64::NEG_INFINITY, [0.0; 2]);
    let mut inf = (f64::INFINITY, [0.0; 2]);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for r in &rows {
        if r.ratio > sup.0 {
            sup = (r.ratio, [r.theta_minus, r.theta_plus]);
        }
        if r.ratio < inf.0 {
            inf = (r.ratio, [r.theta_minus, r.theta_plus]);
        }
        if r.cent > r.pi + CENT_PI_SLACK {
            violations += 1;
        }
        worst = worst.max(r.cent - r.pi);
    }
    let small_jump = (0..opts.limit_points)
        .into_par_iter()
        .map(|i| small_jump_limit(bp, TAU * (i as f64 + 0.5) / opts.limit_points as f64, opts.limit_widths))
        .collect::<Result<Vec<_>>>()?;
    let e4 = small_jump.iter().map(|s| s.rel_err_4).fold(0.0, f64::max);
    let e2 = small_jump.iter().map(|s| s.rel_err_2).fold(0.0, f64::max);
    let small_jump_match = if e4 < 0.02 {
        "4"
    } else if e2 < 0.02 {
        "2"
    } else {
        "neither"
    };
    Ok((
        BoundsReport {
            norm: bp.norm().label(),
            kappa: bp.kappa(),
            pairs: rows.len(),
            sup_ratio: sup.0,
            inf_ratio: inf.0,
            sup_at: sup.1,
            inf_at: inf.1,
            violations,
            max_cent_minus_pi: worst,
            small_jump,
            small_jump_match: small_jump_match.into(),
            max_rel_err_4: e4,
            max_rel_err_2: e2,
            under_resolved: opts.min_width < 2.0 * bp.spacing(),
        },
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::NormSpec;

    #[test]
    fn coincident_states_rejected() {
        let bp = BoundaryParam::trace(&NormSpec::Euclidean, 256).unwrap();
        assert!(JumpPair::from_thetas(&bp, 0.4, 0.4).is_err());
        assert!(JumpPair::from_thetas(&bp, 0.4, 0.4 + TAU).is_err());
    }

    #[test]
    fn pair_grid_covers_widths() {
        let g = pair_grid(4, 1e-3);
        assert_eq!(g.len(), 16);
        assert!((g[0].1 - g[0].0 - 1e-3).abs() < 1e-15);
        assert!((g[3].1 - g[3].0 - PI).abs() < 1e-12);
    }
}
