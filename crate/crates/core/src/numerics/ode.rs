//! Adaptive Dormand–Prince 5(4) integration for small autonomous systems.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            h0: 1e-3,
            h_max: 0.5,
            max_steps: 200_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates y' = f(t, y) from (t0, y0) in direction `dir` (±1) until `stop`
/// returns true on an accepted state, or `t_limit` (in |t − t0|) is reached.
/// Returns all accepted states, starting with the initial one.
pub fn integrate<const D: usize, F, S>(
    f: F,
    t0: f64,
    y0: [f64; D],
    dir: f64,
    t_limit: f64,
    opts: &OdeOptions,
    mut stop: S,
) -> Result<Vec<(f64, [f64; D])>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    S: FnMut(f64, &[f64; D]) -> bool,
{
    let mut out = vec![(t0, y0)];
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h0.min(opts.h_max);
    let mut k1 = f(t, &y);
    let mut steps = 0;
    while (t - t0).abs() < t_limit {
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence {
                what: "ode integration",
                iterations: steps,
                detail: format!("reached t = {t:.6e}"),
            });
        }
        steps += 1;
        h = h.min(t_limit - (t - t0).abs()).max(1e-14);
        let s = dir * h;
        let k2 = f(t + C2 * s, &axpy(&y, s, &[(A21, &k1)]));
        let k3 = f(t + C3 * s, &axpy(&y, s, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * s, &axpy(&y, s, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * s, &axpy(&y, s, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(
            t + s,
            &axpy(&y, s, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y5 = axpy(&y, s, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + s, &y5);
        let mut err = 0.0f64;
        for i in 0..D {
            let e = s * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            t += s;
            y = y5;
            k1 = k7;
            out.push((t, y));
            if stop(t, &y) {
                break;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
    }
    Ok(out)
}
