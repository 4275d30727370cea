//! Strictly convex C¹ planar norms.

use crate::error::{invalid, Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub type ValueFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

/// A planar norm given by value and gradient.
#[derive(Clone)]
pub enum NormSpec {
    Euclidean,
    /// (|x|^p + |y|^p)^(1/p), p > 1.
    Lp { p: f64 },
    /// |A z| for an invertible 2×2 matrix A (row-major).
    LinearImage { a: [[f64; 2]; 2] },
    /// User-defined value with optional analytic gradient. Without a gradient,
    /// central differences with step 1e-6·|z| are used.
    Custom {
        name: String,
        value: ValueFn,
        grad: Option<GradFn>,
    },
}

impl fmt::Debug for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NormSpec({})", self.label())
    }
}

impl NormSpec {
    pub fn lp(p: f64) -> Self {
        NormSpec::Lp { p }
    }

    /// Ellipse with semi-axes 1 and 1/ratio: ‖(x, y)‖ = |(x, ratio·y)|.
    pub fn ellipse(ratio: f64) -> Self {
        NormSpec::LinearImage {
            a: [[1.0, 0.0], [0.0, ratio]],
        }
    }

    pub fn custom(name: impl Into<String>, value: ValueFn, grad: Option<GradFn>) -> Self {
        NormSpec::Custom {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn label(&self) -> String {
        match self {
            NormSpec::Euclidean => "euclidean".into(),
            NormSpec::Lp { p } => format!("lp:{p}"),
            NormSpec::LinearImage { a } => format!("linear_image:[[{},{}],[{},{}]]", a[0][0], a[0][1], a[1][0], a[1][1]),
            NormSpec::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    /// Checks the parameters that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        match self {
            NormSpec::Lp { p } if !(p.is_finite() && *p > 1.0) => invalid(format!("lp exponent must be > 1, got {p}")),
            NormSpec::LinearImage { a } => {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                if !det.is_finite() || det.abs() < 1e-12 {
                    invalid("linear_image matrix must be invertible")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, z: Vec2) -> f64 {
        match self {
            NormSpec::Euclidean => z.norm(),
            NormSpec::Lp { p } => {
                let m = z.x.abs().max(z.y.abs());
                if m == 0.0 {
                    return 0.0;
                }
                let (x, y) = (z.x.abs() / m, z.y.abs() / m);
                m * (x.powf(*p) + y.powf(*p)).powf(1.0 / p)
            }
            NormSpec::LinearImage { a } => apply(a, z).norm(),
            NormSpec::Custom { value, .. } => value(z),
        }
    }

    /// Gradient of the norm at z ≠ 0 (the outward normal direction of the
    /// level set through z).
    pub fn gradient(&self, z: Vec2) -> Vec2 {
        match self {
            NormSpec::Euclidean => z / z.norm(),
            NormSpec::Lp { p } => {
                let m = z.x.abs().max(z.y.abs());
                let (x, y) = (z.x / m, z.y / m);
                let f = (x.abs().powf(*p) + y.abs().powf(*p)).powf(1.0 / p);
                let c = f.powf(1.0 - p);
                Vec2::new(x.signum() * x.abs().powf(p - 1.0) * c, y.signum() * y.abs().powf(p - 1.0) * c)
            }
            NormSpec::LinearImage { a } => {
                let w = apply(a, z);
                let n = w.norm();
                Vec2::new(a[0][0] * w.x + a[1][0] * w.y, a[0][1] * w.x + a[1][1] * w.y) / n
            }
            NormSpec::Custom { value, grad, .. } => match grad {
                Some(g) => g(z),
                None => {
                    let h = 1e-6 * z.norm();
                    let ex = Vec2::new(h, 0.0);
                    let ey = Vec2::new(0.0, h);
                    Vec2::new(
                        (value(z + ex) - value(z - ex)) / (2.0 * h),
                        (value(z + ey) - value(z - ey)) / (2.0 * h),
                    )
                }
            },
        }
    }

    /// Sampled check of the norm axioms this library relies on: positive
    /// homogeneity, symmetry, strict convexity of the unit circle, and
    /// agreement of the gradient with finite differences.
    pub fn check(&self, samples: usize) -> NormCheck {
        let mut rep = NormCheck::default();
        let n = samples.max(8);
        let dir = |k: usize| Vec2::polar(2.0 * std::f64::consts::PI * (k as f64 + 0.37) / n as f64);
        let unit = |v: Vec2| v / self.value(v);
        for k in 0..n {
            let e = dir(k);
            let v = self.value(e);
            for t in [0.01, 0.5, 3.0, 1e3] {
                rep.homogeneity = rep.homogeneity.max(((self.value(e * t) - t * v) / (t * v)).abs());
            }
            rep.symmetry = rep.symmetry.max(((self.value(-e) - v) / v).abs());
            let h = 1e-4;
            let g = self.gradient(e);
            let fd = Vec2::new(
                (self.value(e + Vec2::new(h, 0.0)) - self.value(e - Vec2::new(h, 0.0))) / (2.0 * h),
                (self.value(e + Vec2::new(0.0, h)) - self.value(e - Vec2::new(0.0, h))) / (2.0 * h),
            );
            rep.gradient = rep.gradient.max((g - fd).norm());
            for s in [1usize, 3, n / 4, n / 2 - 1] {
                let x = unit(e);
                let y = unit(dir((k + s) % n));
                rep.max_midpoint = rep.max_midpoint.max(self.value((x + y) * 0.5));
            }
        }
        rep
    }
}

fn apply(a: &[[f64; 2]; 2], z: Vec2) -> Vec2 {
    Vec2::new(a[0][0] * z.x + a[0][1] * z.y, a[1][0] * z.x + a[1][1] * z.y)
}

/// Worst deviations found by [`NormSpec::check`].
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct NormCheck {
    pub homogeneity: f64,
    pub symmetry: f64,
    /// Largest ‖(x+y)/2‖ over sampled unit pairs x ≠ ±y; < 1 witnesses strict convexity.
    pub max_midpoint: f64,
    pub gradient: f64,
}

impl NormCheck {
    pub fn passes(&self) -> bool {
        self.homogeneity < 1e-10 && self.symmetry < 1e-10 && self.max_midpoint < 1.0 && self.gradient < 1e-5
    }
}

/// JSON form of the builtin norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormConfig {
    Euclidean,
    Lp {
        p: f64,
    },
    LinearImage {
        #[serde(rename = "A")]
        a: [[f64; 2]; 2],
    },
}

impl TryFrom<NormConfig> for NormSpec {
    type Error = Error;
    fn try_from(c: NormConfig) -> Result<Self> {
        let n = match c {
            NormConfig::Euclidean => NormSpec::Euclidean,
            NormConfig::Lp { p } => NormSpec::Lp { p },
            NormConfig::LinearImage { a } => NormSpec::LinearImage { a },
        };
        n.validate()?;
        Ok(n)
    }
}

impl NormSpec {
    pub fn to_config(&self) -> Option<NormConfig> {
        match self {
            NormSpec::Euclidean => Some(NormConfig::Euclidean),
            NormSpec::Lp { p } => Some(NormConfig::Lp { p: *p }),
            NormSpec::LinearImage { a } => Some(NormConfig::LinearImage { a: *a }),
            NormSpec::Custom { .. } => None,
        }
    }
}

/// Accepts `euclidean`, `lp:P`, `ellipse:R`, or a JSON object.
impl FromStr for NormSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            let c: NormConfig = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("norm json: {e}")))?;
            return NormSpec::try_from(c);
        }
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::InvalidInput(format!("norm '{kind}' needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad norm parameter in '{s}': {e}")))
        };
        let n = match kind {
            "euclidean" | "l2" => NormSpec::Euclidean,
            "lp" => NormSpec::Lp { p: num(arg)? },
            "ellipse" => NormSpec::ellipse(num(arg)?),
            other => return invalid(format!("unknown norm kind '{other}'")),
        };
        n.validate()?;
        Ok(n)
    }
}
