//! Staggered-grid divergence-free fields m = ∇⊥u and the energy
//! I_ε(m) = ∫ ε|∇m|² + (1/ε)(1 − ‖m‖²)².
//!
//! The potential u lives on the (nx × ny) nodes of a uniform grid with
//! spacing h whose lower-left node is the origin; m lives at cell centers.

mod analysis;
mod build;

pub use analysis::*;
pub use build::*;

use crate::boundary::BoundaryParam;
use crate::error::{invalid, Error, Result};
use crate::numerics::lbfgs::{self, LbfgsOptions, StopReason};
use crate::vec2::Vec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

/// Grid shape and scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Node counts.
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub eps: f64,
}

impl GridSpec {
    /// Square [0, side]² with `cells` cells per side.
    pub fn square(side: f64, cells: usize, eps: f64) -> Self {
        GridSpec {
            nx: cells + 1,
            ny: cells + 1,
            h: side / cells as f64,
            eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return invalid(format!("grid needs at least 3×3 nodes, got {}×{}", self.nx, self.ny));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return invalid(format!("grid spacing must be positive, got {}", self.h));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", self.eps));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.h
    }

    pub fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.h
    }
}

#[derive(Clone, Debug)]
pub struct GridField {
    bp: Arc<BoundaryParam>,
    grid: GridSpec,
    u: Vec<f64>,
    m: OnceLock<Vec<Vec2>>,
}

impl GridField {
    pub fn new(bp: Arc<BoundaryParam>, grid: GridSpec, u: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if u.len() != grid.nx * grid.ny {
            return invalid(format!("potential has {} values, grid has {} nodes", u.len(), grid.nx * grid.ny));
        }
        Ok(GridField {
            bp,
            grid,
            u,
            m: OnceLock::new(),
        })
    }

    pub fn from_fn(bp: Arc<BoundaryParam>, grid: GridSpec, f: impl Fn(Vec2) -> f64 + Sync) -> Result<Self> {
        grid.validate()?;
        let u = (0..grid.ny)
            .into_par_iter()
            .flat_map_iter(|j| {
                let f = &f;
                (0..grid.nx).map(move |i| f(Vec2::new(i as f64 * grid.h, j as f64 * grid.h)))
            })
            .collect();
        GridField::new(bp, grid, u)
    }

    pub fn boundary(&self) -> &BoundaryParam {
        &self.bp
    }

    pub fn boundary_arc(&self) -> &Arc<BoundaryParam> {
        &self.bp
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn eps(&self) -> f64 {
        self.grid.eps
    }

    pub fn set_eps(&mut self, eps: f64) -> Result<()> {
        if !(eps.is_finite() && eps > 0.0) {
            return invalid(format!("epsilon must be positive, got {eps}"));
        }
        self.grid.eps = eps;
        Ok(())
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(i as f64 * self.grid.h, j as f64 * self.grid.h)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new((i as f64 + 0.5) * self.grid.h, (j as f64 + 0.5) * self.grid.h)
    }

    /// Cell counts (nx − 1, ny − 1).
    pub fn cells(&self) -> (usize, usize) {
        (self.grid.nx - 1, self.grid.ny - 1)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn u_at(&self, i: usize, j: usize) -> f64 {
        self.u[j * self.grid.nx + i]
    }

    /// Mutable access to the potential; drops the cached m.
    pub fn u_mut(&mut self) -> &mut [f64] {
        self.m = OnceLock::new();
        &mut self.u
    }

    pub fn set_u(&mut self, u: Vec<f64>) -> Result<()> {
        if u.len() != self.u.len() {
            return invalid("potential length does not match the grid");
        }
        self.m = OnceLock::new();
        self.u = u;
        Ok(())
    }

    /// m = (−∂₂u, ∂₁u) at cell centers, row-major over cells.
    pub fn m(&self) -> &[Vec2] {
        self.m.get_or_init(|| cell_m(&self.u, self.grid))
    }

    pub fn m_at(&self, i: usize, j: usize) -> Vec2 {
        self.m()[j * (self.grid.nx - 1) + i]
    }

    /// Compatible-stencil divergence of m at interior nodes (row-major over
    /// all nodes, zero on the boundary).
    pub fn divergence(&self) -> Vec<f64> {
        node_divergence(self.m(), self.grid)
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(energy_parts(&self.bp, self.m(), self.grid)?.total())
    }

    pub fn energy_parts(&self) -> Result<EnergyParts> {
        energy_parts(&self.bp, self.m(), self.grid)
    }

    /// Energy and its gradient with respect to every node value of u.
    pub fn energy_gradient(&self, grad: &mut [f64]) -> Result<f64> {
        energy_gradient(&self.bp, &self.u, self.grid, grad)
    }

    /// Binary form: nx, ny as u64, h, ε as f64, then u row-major as f64,
    /// all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.grid.nx as u64).to_le_bytes())?;
        w.write_all(&(self.grid.ny as u64).to_le_bytes())?;
        w.write_all(&self.grid.h.to_le_bytes())?;
        w.write_all(&self.grid.eps.to_le_bytes())?;
        for v in &self.u {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(bp: Arc<BoundaryParam>, mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let nx = u64::from_le_bytes(next(&mut r)?) as usize;
        let ny = u64::from_le_bytes(next(&mut r)?) as usize;
        let h = f64::from_le_bytes(next(&mut r)?);
        let eps = f64::from_le_bytes(next(&mut r)?);
        let grid = GridSpec { nx, ny, h, eps };
        grid.validate()?;
        if nx.checked_mul(ny).is_none_or(|n| n > 1 << 28) {
            return invalid("grid header is implausibly large");
        }
        let mut u = Vec::with_capacity(nx * ny);
        for _ in 0..nx * ny {
            u.push(f64::from_le_bytes(next(&mut r)?));
        }
        GridField::new(bp, grid, u)
    }

    /// CSV over cell centers: x, y, m1, m2, norm.
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,m1,m2,norm")?;
        let (cx, cy) = self.cells();
        let m = self.m();
        for j in 0..cy {
            for i in 0..cx {
                let c = self.cell_center(i, j);
                let v = m[j * cx + i];
                writeln!(w, "{},{},{},{},{}", c.x, c.y, v.x, v.y, self.bp.norm_value(v))?;
            }
        }
        Ok(())
    }
}

pub(crate) fn cell_m(u: &[f64], g: GridSpec) -> Vec<Vec2> {
    let (cx, cy) = (g.nx - 1, g.ny - 1);
    let s = 0.5 / g.h;
    (0..cy)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..cx).map(move |i| {
                let a = u[j * g.nx + i];
                let b = u[j * g.nx + i + 1];
                let c = u[(j + 1) * g.nx + i];
                let d = u[(j + 1) * g.nx + i + 1];
                let d1 = (b + d - a - c) * s;
                let d2 = (c + d - a - b) * s;
                Vec2::new(-d2, d1)
            })
        })
        .collect()
}

/// Divergence at interior node (i, j) of a cell-centered vector field,
/// using the four surrounding cells.
pub(crate) fn node_div(f: &[Vec2], g: GridSpec, i: usize, j: usize) -> f64 {
    let cx = g.nx - 1;
    let ll = f[(j - 1) * cx + i - 1];
    let lr = f[(j - 1) * cx + i];
    let ul = f[j * cx + i - 1];
    let ur = f[j * cx + i];
    ((lr.x + ur.x - ll.x - ul.x) + (ul.y + ur.y - ll.y - lr.y)) * 0.5 / g.h
}

/// Gradient at interior node (i, j) of a cell-centered scalar.
pub(crate) fn node_grad(f: &[f64], g: GridSpec, i: usize, j: usize) -> Vec2 {
    let cx = g.nx - 1;
    let ll = f[(j - 1) * cx + i - 1];
    let lr = f[(j - 1) * cx + i];
    let ul = f[j * cx + i - 1];
    let ur = f[j * cx + i];
    Vec2::new(lr + ur - ll - ul, ul + ur - ll - lr) * (0.5 / g.h)
}

pub(crate) fn node_divergence(f: &[Vec2], g: GridSpec) -> Vec<f64> {
    let mut out = vec![0.0; g.nx * g.ny];
    out.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        if j == 0 || j == g.ny - 1 {
            return;
        }
        for (i, v) in row.iter_mut().enumerate().take(g.nx - 1).skip(1) {
            *v = node_div(f, g, i, j);
        }
    });
    out
}

/// Quadrature weight (in units of h) of the k-th of `edges` interior
/// differences along one axis; the outer two also cover the half cells
/// next to the boundary.
fn edge_weight(k: usize, edges: usize) -> f64 {
    if edges == 1 {
        2.0
    } else if k == 0 || k + 1 == edges {
        1.5
    } else {
        1.0
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct EnergyParts {
    /// ε∫|∇m|².
    pub gradient: f64,
    /// (1/ε)∫(1 − ‖m‖²)².
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.gradient + self.potential
    }
}

fn well(bp: &BoundaryParam, m: Vec2) -> f64 {
    let r = bp.norm_value(m);
    (1.0 - r * r).powi(2)
}

pub(crate) fn energy_parts(bp: &BoundaryParam, m: &[Vec2], g: GridSpec) -> Result<EnergyParts> {
    let (cx, cy) = (g.nx - 1, g.ny - 1);
    let rows: Vec<Result<(f64, f64)>> = (0..cy)
        .into_par_iter()
        .map(|j| {
            let (mut grad, mut pot) = (0.0, 0.0);
            for i in 0..cx {
                let c = m[j * cx + i];
                let w = well(bp, c);
                if !w.is_finite() {
                    return Err(Error::NonFinite { what: "energy density", i, j });
                }
                pot += w;
                if i + 1 < cx {
                    grad += edge_weight(i, cx - 1) * (m[j * cx + i + 1] - c).norm2();
                }
                if j + 1 < cy {
                    grad += edge_weight(j, cy - 1) * (m[(j + 1) * cx + i] - c).norm2();
                }
            }
            Ok((grad, pot))
        })
        .collect();
    let (mut grad, mut pot) = (0.0, 0.0);
    for r in rows {
        let (a, b) = r?;
        grad += a;
        pot += b;
    }
    Ok(EnergyParts {
        gradient: g.eps * grad,
        potential: g.h * g.h / g.eps * pot,
    })
}

/// Energy at potential `u` and its gradient in u (written to `grad`, one
/// entry per node).
pub(crate) fn energy_gradient(bp: &BoundaryParam, u: &[f64], g: GridSpec, grad: &mut [f64]) -> Result<f64> {
    let m = cell_m(u, g);
    let e = energy_parts(bp, &m, g)?.total();
    let (cx, cy) = (g.nx - 1, g.ny - 1);
    let pw = 4.0 * g.h * g.h / g.eps;
    // dE/dm per cell
    let gm: Vec<Vec2> = (0..cy)
        .into_par_iter()
        .flat_map_iter(|j| {
            let m = &m;
            (0..cx).map(move |i| {
                let c = m[j * cx + i];
                let mut acc = Vec2::ZERO;
                if i > 0 {
                    acc = acc + (c - m[j * cx + i - 1]) * edge_weight(i - 1, cx - 1);
                }
                if i + 1 < cx {
                    acc = acc + (c - m[j * cx + i + 1]) * edge_weight(i, cx - 1);
                }
                if j > 0 {
                    acc = acc + (c - m[(j - 1) * cx + i]) * edge_weight(j - 1, cy - 1);
                }
                if j + 1 < cy {
                    acc = acc + (c - m[(j + 1) * cx + i]) * edge_weight(j, cy - 1);
                }
                acc = acc * (2.0 * g.eps);
                let r = bp.norm_value(c);
                if r > 0.0 {
                    acc = acc - bp.norm_gradient(c) * (pw * (1.0 - r * r) * r);
                }
                acc
            })
        })
        .collect();
    grad.iter_mut().for_each(|v| *v = 0.0);
    let s = 0.5 / g.h;
    for j in 0..cy {
        for i in 0..cx {
            let d = gm[j * cx + i];
            // m1 = −D₂u, m2 = D₁u
            let q1 = d.y * s;
            let q2 = -d.x * s;
            grad[j * g.nx + i] += -q1 - q2;
            grad[j * g.nx + i + 1] += q1 - q2;
            grad[(j + 1) * g.nx + i] += -q1 + q2;
            grad[(j + 1) * g.nx + i + 1] += q1 + q2;
        }
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Relative energy decrease per iteration below which to stop.
    pub rel_tol: f64,
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iter: 2000,
            rel_tol: 1e-9,
            memory: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimizeReport {
    pub iterations: usize,
    /// Energy after each accepted step, starting with the initial energy.
    pub history: Vec<f64>,
    pub reason: String,
    pub initial_energy: f64,
    pub final_energy: f64,
}

/// Minimizes I_ε over potentials with the boundary node values of `f` fixed.
pub fn minimize(f: &GridField, opts: &MinimizeOptions) -> Result<(GridField, MinimizeReport)> {
    let g = f.grid;
    if !(opts.rel_tol.is_finite() && opts.rel_tol >= 0.0) {
        return invalid(format!("relative tolerance must be finite and nonnegative, got {}", opts.rel_tol));
    }
    let interior: Vec<usize> = (1..g.ny - 1)
        .flat_map(|j| (1..g.nx - 1).map(move |i| j * g.nx + i))
        .collect();
    let mut x: Vec<f64> = interior.iter().map(|&k| f.u[k]).collect();
    let mut full = f.u.clone();
    let mut gfull = vec![0.0; full.len()];
    let bp = f.bp.clone();
    let lopts = LbfgsOptions {
        memory: opts.memory.max(1),
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
        grad_tol: 1e-13,
    };
    let report = lbfgs::minimize(
        &mut x,
        |xs, gx| {
            for (k, &idx) in interior.iter().enumerate() {
                full[idx] = xs[k];
            }
            let e = energy_gradient(&bp, &full, g, &mut gfull)?;
            for (k, &idx) in interior.iter().enumerate() {
                gx[k] = gfull[idx];
            }
            Ok(e)
        },
        &lopts,
    )?;
    let mut u = f.u.clone();
    for (k, &idx) in interior.iter().enumerate() {
        u[idx] = x[k];
    }
    let out = GridField::new(f.bp.clone(), g, u)?;
    let reason = match report.reason {
        StopReason::Gradient => "gradient",
        StopReason::RelativeDecrease => "relative-decrease",
        StopReason::IterationCap => "iteration-cap",
        StopReason::LineSearch => "line-search",
    };
    let rep = MinimizeReport {
        iterations: report.iterations,
        initial_energy: report.history[0],
        final_energy: *report.history.last().unwrap(),
        history: report.history,
        reason: reason.into(),
    };
    Ok((out, rep))
}
