use super::{GridField, GridSpec};
use crate::boundary::BoundaryParam;
use crate::costs::JumpPair;
use crate::error::{invalid, Error, Result};
use crate::numerics::quad::GaussRule;
use crate::numerics::roots::bisect;
use crate::profile::{solve_profile, Profile};
use crate::vec2::Vec2;
use std::f64::consts::TAU;
use std::sync::Arc;

pub type PotentialFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Straight jump from z⁺ to z⁻ across the line through `point`. The field
/// equals z⁺ on the side (x − p)·ν < 0 and z⁻ on the other, with
/// ν = i(z⁺−z⁻)/|z⁺−z⁻|.
#[derive(Clone, Debug)]
pub struct JumpSpec {
    pub z_plus: Vec2,
    pub z_minus: Vec2,
    pub point: Vec2,
    /// Optional line normal; must be parallel to i(z⁺−z⁻).
    pub normal: Option<Vec2>,
    /// Paste the optimal one-dimensional profile at scale ε instead of a
    /// sharp interface.
    pub profile: bool,
}

#[derive(Clone)]
pub enum FieldSpec {
    Constant(Vec2),
    Jump(JumpSpec),
    /// u = β q(‖i(x−x₀)‖_*) with q(r) = r for r ≥ core and
    /// (r²/core + core)/2 below; core = 0 gives the exact vortex.
    Vortex { center: Vec2, sign: f64, core: f64 },
    Potential(PotentialFn),
}

impl std::fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldSpec::Constant(z) => write!(f, "Constant({z:?})"),
            FieldSpec::Jump(j) => write!(f, "Jump({j:?})"),
            FieldSpec::Vortex { center, sign, core } => write!(f, "Vortex({center:?}, {sign}, {core})"),
            FieldSpec::Potential(_) => write!(f, "Potential(..)"),
        }
    }
}

/// Antiderivative of a profile, Z(y) = ∫₀^y ζ, extended linearly by the
/// limits outside the sampled range.
struct ProfilePotential {
    p: Profile,
    cum: Vec<f64>,
}

impl ProfilePotential {
    fn new(bp: &BoundaryParam, p: Profile) -> Self {
        let mut cum = vec![0.0; p.x.len()];
        for k in 1..p.x.len() {
            let (a, b) = (p.x[k - 1], p.x[k]);
            let h = b - a;
            let f0 = crate::profile::rhs(bp, &p.jump, p.zeta[k - 1]);
            let f1 = crate::profile::rhs(bp, &p.jump, p.zeta[k]);
            // exact integral of the cubic Hermite interpolant
            cum[k] = cum[k - 1] + 0.5 * h * (p.zeta[k - 1] + p.zeta[k]) + h * h / 12.0 * (f0 - f1);
        }
        let k0 = p.x.partition_point(|&v| v < 0.0);
        let shift = if k0 < p.x.len() && p.x[k0] == 0.0 { cum[k0] } else { 0.0 };
        cum.iter_mut().for_each(|c| *c -= shift);
        ProfilePotential { p, cum }
    }

    fn eval(&self, bp: &BoundaryParam, rule: &GaussRule, y: f64) -> f64 {
        let x = &self.p.x;
        let n = x.len();
        if y <= x[0] {
            return self.cum[0] + self.p.lower * (y - x[0]);
        }
        if y >= x[n - 1] {
            return self.cum[n - 1] + self.p.upper * (y - x[n - 1]);
        }
        let k = x.partition_point(|&v| v <= y) - 1;
        self.cum[k] + rule.integrate(|t| self.p.zeta_at(bp, t), x[k], y)
    }
}

fn jump_potential(bp: &Arc<BoundaryParam>, grid: GridSpec, js: &JumpSpec) -> Result<Box<dyn Fn(Vec2) -> f64 + Send + Sync>> {
    let jp = JumpPair::new(bp, js.z_plus, js.z_minus)?;
    if let Some(n) = js.normal {
        let d = js.z_plus - js.z_minus;
        if !(n.norm() > 0.0) || (d.dot(n) / n.norm()).abs() > 1e-9 * d.norm() {
            return invalid(format!(
                "jump normal violates the divergence constraint: (z⁺−z⁻)·ν = {:.3e} must vanish",
                d.dot(n) / n.norm()
            ));
        }
    }
    let (nu, a, p) = (jp.nu, jp.a, js.point);
    let inu = nu.rot();
    let lin = move |x: Vec2| -a * inu.dot(x - p);
    if js.profile {
        let prof = solve_profile(bp, &jp, 1e-10)?;
        let bp2 = Arc::clone(bp);
        let pot = ProfilePotential::new(bp, prof);
        let rule = GaussRule::new(4);
        let eps = grid.eps;
        Ok(Box::new(move |x: Vec2| {
            let s = nu.dot(x - p);
            lin(x) + eps * pot.eval(&bp2, &rule, s / eps)
        }))
    } else {
        let (lo, hi) = (js.z_plus.dot(inu), js.z_minus.dot(inu));
        Ok(Box::new(move |x: Vec2| {
            let s = nu.dot(x - p);
            lin(x) + if s < 0.0 { lo * s } else { hi * s }
        }))
    }
}

/// Samples the potential of `spec` on the grid.
pub fn build_field(bp: Arc<BoundaryParam>, grid: GridSpec, spec: &FieldSpec) -> Result<GridField> {
    grid.validate()?;
    match spec {
        FieldSpec::Constant(z) => {
            let z = *z;
            GridField::from_fn(bp, grid, move |x| z.y * x.x - z.x * x.y)
        }
        FieldSpec::Jump(js) => {
            let f = jump_potential(&bp, grid, js)?;
            GridField::from_fn(bp, grid, f)
        }
        FieldSpec::Vortex { center, sign, core } => {
            let (w, h) = (grid.width(), grid.height());
            if !(center.x >= 0.0 && center.x <= w && center.y >= 0.0 && center.y <= h) {
                return invalid(format!("vortex center {center:?} lies outside the domain [0,{w}]×[0,{h}]"));
            }
            if !(sign.abs() == 1.0) {
                return invalid("vortex sign must be +1 or −1");
            }
            if !(core.is_finite() && *core >= 0.0) {
                return invalid("vortex core radius must be nonnegative");
            }
            let (c, s, rc) = (*center, *sign, *core);
            let b2 = bp.clone();
            GridField::from_fn(bp, grid, move |x| {
                let r = b2.dual_norm((x - c).rot());
                s * if r >= rc { r } else { 0.5 * (r * r / rc + rc) }
            })
        }
        FieldSpec::Potential(f) => {
            let f = f.clone();
            let field = GridField::from_fn(bp, grid, move |x| f(x))?;
            if let Some(k) = field.u().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "potential",
                    i: k % grid.nx,
                    j: k / grid.nx,
                });
            }
            Ok(field)
        }
    }
}

/// The two points of ∂B on the line {z·ν = a}, ordered so that
/// i(z⁺ − z⁻) points along +ν.
pub fn chord_states(bp: &BoundaryParam, nu: Vec2, a: f64) -> Result<(Vec2, Vec2)> {
    let nu = nu.normalized();
    let top = bp.dual_norm(nu);
    if !(a.abs() < top) {
        return invalid(format!("line z·ν = {a} misses the interior of ∂B (support {top})"));
    }
    let f = |t: f64| bp.gamma(t).dot(nu) - a;
    let n = 256;
    let mut roots = Vec::new();
    for k in 0..n {
        let (t0, t1) = (TAU * k as f64 / n as f64, TAU * (k + 1) as f64 / n as f64);
        if f(t0) == 0.0 {
            roots.push(t0);
        } else if f(t0) * f(t1) < 0.0 {
            roots.push(bisect(f, t0, t1, 1e-15).unwrap_or(t0));
        }
    }
    if roots.len() != 2 {
        return Err(Error::Internal(format!("expected two chord endpoints, found {}", roots.len())));
    }
    let (p, q) = (bp.gamma(roots[0]), bp.gamma(roots[1]));
    let inu = nu.rot();
    Ok(if p.dot(inu) < q.dot(inu) { (p, q) } else { (q, p) })
}

/// Length of the part of the line through `p` with normal ν inside the
/// grid rectangle.
pub fn line_length_in(grid: GridSpec, p: Vec2, nu: Vec2) -> f64 {
    let t = nu.normalized().rot();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (pc, tc, max) in [(p.x, t.x, grid.width()), (p.y, t.y, grid.height())] {
        if tc.abs() < 1e-300 {
            if pc < 0.0 || pc > max {
                return 0.0;
            }
            continue;
        }
        let (a, b) = ((0.0 - pc) / tc, (max - pc) / tc);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (hi - lo).max(0.0)
}
