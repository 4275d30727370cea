use super::{build_field, line_length_in, node_div, node_grad, FieldSpec, GridField, GridSpec, JumpSpec};
use super::{minimize, MinimizeOptions, MinimizeReport};
use crate::boundary::BoundaryParam;
use crate::costs::{c1d, cent_lp, pi_cost, JumpPair};
use crate::entropy::{EntropyFn, ExtendedEntropy};
use crate::error::{invalid, Error, Result};
use crate::numerics::fit::scale_fit;
use crate::vec2::Vec2;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Copy)]
pub enum EntropyRef<'a> {
    /// Φ on ∂B only; every cell value must lie on ∂B.
    Plain(&'a EntropyFn),
    Extended(&'a ExtendedEntropy),
}

/// Discrete ∇·Φ(m) at the grid nodes.
#[derive(Clone, Debug, Serialize)]
pub struct ProductionMeasure {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Density at each node (zero on the boundary), row-major.
    pub values: Vec<f64>,
    /// Σ|value|·h².
    pub total_variation: f64,
    /// Σ value·h².
    pub signed_total: f64,
    /// Nodes with |value| above 1e-12 of the maximum.
    pub support: Vec<bool>,
}

const ON_CIRCLE_TOL: f64 = 1e-6;

fn cell_flux(f: &GridField, e: EntropyRef) -> Result<Vec<Vec2>> {
    let bp = f.boundary();
    let (cx, _) = f.cells();
    match e {
        EntropyRef::Plain(ent) => {
            if ent.lambda().len() != bp.resolution() {
                return invalid("entropy and field use different boundary resolutions");
            }
            f.m()
                .par_iter()
                .enumerate()
                .map(|(k, &m)| {
                    let r = bp.norm_value(m);
                    if (r - 1.0).abs() > ON_CIRCLE_TOL {
                        return invalid(format!(
                            "cell ({}, {}) has ‖m‖ = {r:.6} off ∂B; use the extended entropy for such fields",
                            k % cx,
                            k / cx
                        ));
                    }
                    let theta = bp.theta_of_point(m / r)?;
                    ent.phi_eval(theta)
                })
                .collect()
        }
        EntropyRef::Extended(ext) => Ok(f.m().par_iter().map(|&m| ext.eval(m).0).collect()),
    }
}

pub fn entropy_production(f: &GridField, e: EntropyRef) -> Result<ProductionMeasure> {
    let flux = cell_flux(f, e)?;
    let g = f.grid();
    let values = super::node_divergence(&flux, g);
    let a = g.h * g.h;
    let tv = values.iter().map(|v| v.abs()).sum::<f64>() * a;
    let signed = values.iter().sum::<f64>() * a;
    let vmax = values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let support = values.iter().map(|v| vmax > 0.0 && v.abs() > 1e-12 * vmax).collect();
    Ok(ProductionMeasure {
        nx: g.nx,
        ny: g.ny,
        h: g.h,
        values,
        total_variation: tv,
        signed_total: signed,
        support,
    })
}

/// ∇·Φ̂(m) − ½Ψ(m)·∇(1 − ‖m‖²) at interior nodes (row-major, zero on the
/// boundary), with Ψ averaged over the four neighbouring cells.
pub fn production_identity_residual(f: &GridField, e: &ExtendedEntropy) -> Vec<f64> {
    let g = f.grid();
    let bp = f.boundary();
    let (flux, psi): (Vec<Vec2>, Vec<Vec2>) = f.m().par_iter().map(|&m| e.eval(m)).unzip();
    let defect: Vec<f64> = f.m().par_iter().map(|&m| 1.0 - bp.norm_value(m).powi(2)).collect();
    let cx = g.nx - 1;
    let mut out = vec![0.0; g.nx * g.ny];
    out.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        if j == 0 || j == g.ny - 1 {
            return;
        }
        for (i, v) in row.iter_mut().enumerate().take(g.nx - 1).skip(1) {
            let p = (psi[(j - 1) * cx + i - 1] + psi[(j - 1) * cx + i] + psi[j * cx + i - 1] + psi[j * cx + i]) * 0.25;
            *v = node_div(&flux, g, i, j) - 0.5 * p.dot(node_grad(&defect, g, i, j));
        }
    });
    out
}

/// Cell window [i0, i1) × [j0, j1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CellWindow {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl CellWindow {
    pub fn full(f: &GridField) -> Self {
        let (cx, cy) = f.cells();
        CellWindow { i0: 0, i1: cx, j0: 0, j1: cy }
    }

    /// The window shrunk by `margin` cells on every side.
    pub fn inset(f: &GridField, margin: usize) -> Self {
        let (cx, cy) = f.cells();
        CellWindow {
            i0: margin.min(cx),
            i1: cx.saturating_sub(margin),
            j0: margin.min(cy),
            j1: cy.saturating_sub(margin),
        }
    }
}

/// Radial projection of every cell value to a parameter on ∂B (None for
/// m = 0).
fn cell_thetas(f: &GridField) -> Result<Vec<Option<f64>>> {
    let bp = f.boundary();
    f.m()
        .par_iter()
        .map(|&m| {
            let r = bp.norm_value(m);
            if r == 0.0 {
                Ok(None)
            } else {
                bp.theta_of_point(m / r).map(Some)
            }
        })
        .collect()
}

/// (1/|s|) Σ Π(m(x+s), m(x)) h² over the cells x of `window`, for the
/// offset s = (di, dj)·h. Cell values are projected radially onto ∂B.
pub fn besov_functional(f: &GridField, offset: (i64, i64), window: CellWindow) -> Result<f64> {
    let thetas = cell_thetas(f)?;
    besov_with(f, &thetas, offset, window, &mut HashMap::new())
}

fn besov_with(
    f: &GridField,
    thetas: &[Option<f64>],
    offset: (i64, i64),
    w: CellWindow,
    cache: &mut HashMap<(u64, u64), f64>,
) -> Result<f64> {
    let (cx, cy) = f.cells();
    let (di, dj) = offset;
    if di == 0 && dj == 0 {
        return invalid("offset must be nonzero");
    }
    if w.i0 >= w.i1 || w.j0 >= w.j1 || w.i1 > cx || w.j1 > cy {
        return invalid("empty or out-of-range cell window");
    }
    let fits = |lo: usize, hi: usize, d: i64, n: usize| lo as i64 + d >= 0 && hi as i64 - 1 + d < n as i64;
    if !fits(w.i0, w.i1, di, cx) || !fits(w.j0, w.j1, dj, cy) {
        return invalid(format!("offset ({di}, {dj}) leaves the grid from the requested window"));
    }
    let bp = f.boundary();
    let mut pairs = Vec::new();
    for j in w.j0..w.j1 {
        for i in w.i0..w.i1 {
            let a = thetas[j * cx + i];
            let b = thetas[(j as i64 + dj) as usize * cx + (i as i64 + di) as usize];
            match (a, b) {
                (Some(a), Some(b)) if a != b => pairs.push((b, a)),
                (Some(_), Some(_)) => {}
                _ => return invalid(format!("cell ({i}, {j}) or its shift has m = 0")),
            }
        }
    }
    let mut todo: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(a, b)| !cache.contains_key(&(a.to_bits(), b.to_bits())))
        .copied()
        .collect();
    todo.sort_by(|x, y| x.partial_cmp(y).unwrap());
    todo.dedup();
    let vals: Vec<f64> = todo.par_iter().map(|&(a, b)| pi_cost(bp, a, b).value).collect();
    for (k, v) in todo.iter().zip(vals) {
        cache.insert((k.0.to_bits(), k.1.to_bits()), v);
    }
    let h = f.h();
    let sum: f64 = pairs.iter().map(|(a, b)| cache[&(a.to_bits(), b.to_bits())]).sum();
    let len = ((di * di + dj * dj) as f64).sqrt() * h;
    Ok(sum * h * h / len)
}

#[derive(Clone, Debug, Serialize)]
pub struct BesovSup {
    pub value: f64,
    pub offset: (i64, i64),
    /// (offset, value) for every tested offset.
    pub samples: Vec<((i64, i64), f64)>,
}

/// Maximum of the Besov quotient over integer offsets of length ≈ `radius`
/// cells in `directions` directions on the half circle.
pub fn besov_sup(f: &GridField, radius: usize, directions: usize, window: CellWindow) -> Result<BesovSup> {
    if radius == 0 || directions == 0 {
        return invalid("radius and direction count must be positive");
    }
    let thetas = cell_thetas(f)?;
    let mut offs: Vec<(i64, i64)> = (0..directions)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / directions as f64;
            ((radius as f64 * phi.cos()).round() as i64, (radius as f64 * phi.sin()).round() as i64)
        })
        .filter(|o| *o != (0, 0))
        .collect();
    offs.dedup();
    let mut cache = HashMap::new();
    let mut samples = Vec::with_capacity(offs.len());
    for o in offs {
        samples.push((o, besov_with(f, &thetas, o, window, &mut cache)?));
    }
    let best = samples.iter().copied().fold(((0, 0), f64::NEG_INFINITY), |b, s| if s.1 > b.1 { s } else { b });
    Ok(BesovSup {
        value: best.1,
        offset: best.0,
        samples,
    })
}

/// Smooth bump ζ(x) = exp(1 − 1/(1 − ρ²)), ρ = |x − c|/R, supported in the
/// disc of radius R.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BumpTest {
    pub center: Vec2,
    pub radius: f64,
}

impl BumpTest {
    pub fn value(&self, x: Vec2) -> f64 {
        let r2 = (x - self.center).norm2() / (self.radius * self.radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        let d = x - self.center;
        let r2 = d.norm2() / (self.radius * self.radius);
        if r2 >= 1.0 {
            return Vec2::ZERO;
        }
        let q = 1.0 - r2;
        d * (-2.0 * self.value(x) / (q * q * self.radius * self.radius))
    }
}

/// Σ 1{m·iγ(t) > 0} γ'(t)·∇ζ h² over the cells.
pub fn kinetic_residual(f: &GridField, t: f64, grad_zeta: &(dyn Fn(Vec2) -> Vec2 + Sync)) -> f64 {
    let bp = f.boundary();
    let ig = bp.gamma(t).rot();
    let tg = bp.gamma_prime(t);
    let (cx, cy) = f.cells();
    let m = f.m();
    let rows: Vec<f64> = (0..cy)
        .into_par_iter()
        .map(|j| {
            let mut s = 0.0;
            for i in 0..cx {
                if m[j * cx + i].dot(ig) > 0.0 {
                    s += tg.dot(grad_zeta(f.cell_center(i, j)));
                }
            }
            s
        })
        .collect();
    rows.iter().sum::<f64>() * f.h() * f.h()
}

#[derive(Clone, Debug, Serialize)]
pub struct VortexStudyRow {
    pub eps: f64,
    pub h: f64,
    pub cells: usize,
    pub energy: f64,
    pub gradient_part: f64,
    pub potential_part: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VortexStudy {
    pub rows: Vec<VortexStudyRow>,
    /// Least-squares C in I_ε ≈ C ε log(1/ε) and its relative rms residual.
    pub fit_c: f64,
    pub fit_residual: f64,
    /// I_{ε_{k+1}}/I_{ε_k}.
    pub ratios: Vec<f64>,
    pub strictly_decreasing: bool,
}

/// Energy of the vortex centered in the unit square with core radius ε,
/// on a grid with h = ε/`h_ratio` (rounded so the square has an integer
/// number of cells).
pub fn vortex_decay_study(bp: Arc<BoundaryParam>, eps_list: &[f64], h_ratio: f64) -> Result<VortexStudy> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e < 1.0)) {
        return invalid("epsilon values must lie in (0, 1)");
    }
    if !(h_ratio >= 1.0) {
        return invalid("h ratio ε/h must be at least 1");
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let cells = (h_ratio / eps).round().max(2.0) as usize;
        let grid = GridSpec::square(1.0, cells, eps);
        let spec = FieldSpec::Vortex {
            center: Vec2::new(0.5, 0.5),
            sign: 1.0,
            core: eps,
        };
        let f = build_field(bp.clone(), grid, &spec)?;
        let parts = f.energy_parts()?;
        rows.push(VortexStudyRow {
            eps,
            h: grid.h,
            cells,
            energy: parts.total(),
            gradient_part: parts.gradient,
            potential_part: parts.potential,
        });
    }
    let g: Vec<f64> = rows.iter().map(|r| r.eps * (1.0 / r.eps).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let (fit_c, fit_residual) = scale_fit(&g, &y);
    let ratios: Vec<f64> = y.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(VortexStudy {
        strictly_decreasing: ratios.iter().all(|r| *r < 1.0),
        rows,
        fit_c,
        fit_residual,
        ratios,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichOptions {
    /// Cells per side of the unit square.
    pub cells: usize,
    /// ε/h.
    pub eps_over_h: f64,
    pub lp_resolution: usize,
    pub minimize: MinimizeOptions,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions {
            cells: 256,
            eps_over_h: 8.0,
            lp_resolution: 1024,
            minimize: MinimizeOptions {
                max_iter: 400,
                rel_tol: 1e-10,
                memory: 10,
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub z_plus: Vec2,
    pub z_minus: Vec2,
    pub length: f64,
    pub eps: f64,
    pub h: f64,
    pub c1d_l: f64,
    pub cent_l: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Total variation of ∇·Φ̂(m) of the minimizer for the optimal λ.
    pub production_tv: f64,
    /// production_tv / final_energy.
    pub empirical_c: f64,
    pub minimize: MinimizeReport,
}

/// Minimizes I_ε on the unit square with Dirichlet data from the pasted
/// optimal profile of the jump z⁺ → z⁻ across the line through the center.
pub fn sandwich(bp: Arc<BoundaryParam>, z_plus: Vec2, z_minus: Vec2, opts: &SandwichOptions) -> Result<SandwichReport> {
    let jp = JumpPair::new(&bp, z_plus, z_minus)?;
    let h = 1.0 / opts.cells as f64;
    let eps = opts.eps_over_h * h;
    let grid = GridSpec::square(1.0, opts.cells, eps);
    let center = Vec2::new(0.5, 0.5);
    let spec = FieldSpec::Jump(JumpSpec {
        z_plus,
        z_minus,
        point: center,
        normal: None,
        profile: true,
    });
    let start = build_field(bp.clone(), grid, &spec)?;
    let (fmin, rep) = minimize(&start, &opts.minimize)?;
    let length = line_length_in(grid, center, jp.nu);
    let lp = cent_lp(&bp, &jp, opts.lp_resolution)?;
    let lambda = if opts.lp_resolution == bp.resolution() {
        lp.lambda.clone()
    } else {
        resample_periodic(&lp.lambda, bp.resolution())
    };
    let ent = EntropyFn::project_to_admissible(&bp, lambda)?;
    let ext = ExtendedEntropy::new(bp.clone(), ent)?;
    let prod = entropy_production(&fmin, EntropyRef::Extended(&ext))?;
    if !rep.final_energy.is_finite() {
        return Err(Error::NonFinite { what: "minimized energy", i: 0, j: 0 });
    }
    Ok(SandwichReport {
        z_plus,
        z_minus,
        length,
        eps,
        h,
        c1d_l: c1d(&bp, &jp)? * length,
        cent_l: lp.value * length,
        initial_energy: rep.initial_energy,
        final_energy: rep.final_energy,
        production_tv: prod.total_variation,
        empirical_c: prod.total_variation / rep.final_energy,
        minimize: rep,
    })
}

/// Linear resampling of a periodic sequence on the uniform grid of size n.
pub fn resample_periodic(v: &[f64], n: usize) -> Vec<f64> {
    let m = v.len();
    (0..n)
        .map(|k| {
            let s = k as f64 * m as f64 / n as f64;
            let i = s.floor() as usize % m;
            let t = s - s.floor();
            (1.0 - t) * v[i] + t * v[(i + 1) % m]
        })
        .collect()
}
