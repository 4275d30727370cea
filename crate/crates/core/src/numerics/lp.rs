//! Dense bounded-variable primal simplex for problems with few equality rows
//! and many box-constrained columns:
//!
//! maximize c·x  subject to  A x = b,  l ≤ x ≤ u.
//!
//! Phase 1 drives artificial variables out with the same machinery; the basis
//! inverse is rebuilt from scratch on every pivot (the row count is tiny).

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BoundedLp {
    /// Constraint rows, each of length n.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau<'a> {
    a: &'a [Vec<f64>],
    m: usize,
    n: usize,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    b: &'a [f64],
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.a[i][j];
            }
        } else {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[j - self.n] = self.art_sign[j - self.n];
        }
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            (0..self.m).map(|i| y[i] * self.a[i][j]).sum()
        } else {
            y[j - self.n] * self.art_sign[j - self.n]
        }
    }

    fn rebuild(&mut self) -> Result<()> {
        let m = self.m;
        let mut bm = vec![vec![0.0; m]; m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for i in 0..m {
                bm[i][k] = col[i];
            }
        }
        self.binv = invert(bm).ok_or_else(|| Error::Internal("singular simplex basis".into()))?;
        // recompute basic values from the nonbasic ones
        let mut rhs = self.b.to_vec();
        for j in 0..self.n + m {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                self.column(j, &mut col);
                for i in 0..m {
                    rhs[i] -= col[i] * self.x[j];
                }
            }
        }
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = (0..m).map(|i| self.binv[k][i] * rhs[i]).sum();
        }
        Ok(())
    }

    /// Runs simplex iterations on cost vector `c` (length n + m).
    fn optimize(&mut self, c: &[f64], max_iter: usize, iter: &mut usize) -> Result<()> {
        let m = self.m;
        let total = self.n + m;
        let cscale = c.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
        let dtol = 1e-12 * cscale;
        let ptol = 1e-11;
        let mut degenerate_run = 0usize;
        let mut col = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        loop {
            if *iter >= max_iter {
                return Err(Error::NonConvergence {
                    what: "simplex",
                    iterations: *iter,
                    detail: format!("iteration cap {max_iter} reached"),
                });
            }
            let y: Vec<f64> = (0..m)
                .map(|i| (0..m).map(|k| c[self.basis[k]] * self.binv[k][i]).sum())
                .collect();
            let bland = degenerate_run > 50;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..total {
                let st = self.status[j];
                if st == Status::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = c[j] - self.dot_col(&y, j);
                let ok = (st == Status::AtLower && d > dtol) || (st == Status::AtUpper && d < -dtol);
                if ok {
                    if bland {
                        enter = Some((j, d));
                        break;
                    }
                    if enter.map_or(true, |(_, best)| d.abs() > best.abs()) {
                        enter = Some((j, d));
                    }
                }
            }
            let Some((j, _)) = enter else {
                return Ok(());
            };
            *iter += 1;
            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };
            self.column(j, &mut col);
            for k in 0..m {
                alpha[k] = -dir * (0..m).map(|i| self.binv[k][i] * col[i]).sum::<f64>();
            }
            let mut t = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, Status)> = None;
            for k in 0..m {
                let v = self.basis[k];
                let (bound, st) = if alpha[k] < -ptol {
                    ((self.x[v] - self.lower[v]) / -alpha[k], Status::AtLower)
                } else if alpha[k] > ptol && self.upper[v].is_finite() {
                    ((self.upper[v] - self.x[v]) / alpha[k], Status::AtUpper)
                } else {
                    continue;
                };
                let bound = bound.max(0.0);
                let better = match leave {
                    None => bound < t,
                    Some((kk, _)) => {
                        bound < t - 1e-15
                            || (bound <= t + 1e-15
                                && if bland {
                                    v < self.basis[kk]
                                } else {
                                    alpha[k].abs() > alpha[kk].abs()
                                })
                    }
                };
                if better {
                    t = bound;
                    leave = Some((k, st));
                }
            }
            if !t.is_finite() {
                return Err(Error::Internal("unbounded linear program".into()));
            }
            degenerate_run = if t <= 1e-14 { degenerate_run + 1 } else { 0 };
            for k in 0..m {
                let v = self.basis[k];
                self.x[v] += alpha[k] * t;
            }
            self.x[j] += dir * t;
            match leave {
                None => {
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((k, st)) => {
                    let v = self.basis[k];
                    self.status[v] = st;
                    self.x[v] = if st == Status::AtLower { self.lower[v] } else { self.upper[v] };
                    self.basis[k] = j;
                    self.status[j] = Status::Basic;
                    self.rebuild()?;
                }
            }
        }
    }
}

fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut inv: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..m {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..m {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r][k] -= f * a[c][k];
                        inv[r][k] -= f * inv[c][k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Solves the bounded LP. All bounds must be finite.
pub fn maximize(lp: &BoundedLp, max_iter: usize) -> Result<LpSolution> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m || lp.lower.len() != n || lp.upper.len() != n || lp.a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("linear program dimensions do not match".into()));
    }
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
        return Err(Error::InvalidInput("linear program bounds must be finite with l <= u".into()));
    }
    let mut x: Vec<f64> = lp.lower.clone();
    let mut resid = lp.b.clone();
    for i in 0..m {
        resid[i] -= (0..n).map(|j| lp.a[i][j] * x[j]).sum::<f64>();
    }
    let art_sign: Vec<f64> = resid.iter().map(|r| if *r < 0.0 { -1.0 } else { 1.0 }).collect();
    x.extend(resid.iter().map(|r| r.abs()));
    let mut lower = lp.lower.clone();
    lower.extend(std::iter::repeat(0.0).take(m));
    let mut upper = lp.upper.clone();
    upper.extend(std::iter::repeat(f64::INFINITY).take(m));
    let mut status = vec![Status::AtLower; n];
    status.extend(std::iter::repeat(Status::Basic).take(m));
    let mut t = Tableau {
        a: &lp.a,
        m,
        n,
        art_sign,
        lower,
        upper,
        x,
        status,
        basis: (n..n + m).collect(),
        binv: Vec::new(),
        b: &lp.b,
    };
    t.rebuild()?;
    let mut iter = 0;
    let mut c1 = vec![0.0; n];
    c1.extend(std::iter::repeat(-1.0).take(m));
    t.optimize(&c1, max_iter, &mut iter)?;
    let infeas: f64 = t.x[n..].iter().sum();
    let bscale = lp.b.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    if infeas > 1e-9 * bscale {
        return Err(Error::Internal(format!("linear program infeasible (phase 1 residual {infeas:.3e})")));
    }
    for k in n..n + m {
        t.upper[k] = 0.0;
        if t.status[k] != Status::Basic {
            t.x[k] = 0.0;
        }
    }
    t.rebuild()?;
    let mut c2 = lp.c.clone();
    c2.extend(std::iter::repeat(0.0).take(m));
    t.optimize(&c2, max_iter, &mut iter)?;
    let mut xs = t.x[..n].to_vec();
    for (v, (l, u)) in xs.iter_mut().zip(lp.lower.iter().zip(&lp.upper)) {
        *v = v.clamp(*l, *u);
    }
    let objective = xs.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        x: xs,
        objective,
        iterations: iter,
    })
}
