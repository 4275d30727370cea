//! Least-squares fits used for rate and exponent estimates.

/// Ordinary least squares line y ≈ slope·x + intercept.
#[derive(Clone, Copy, Debug)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    LineFit { slope, intercept, rms }
}

/// One-parameter fit y ≈ c·g. Returns (c, relative rms residual).
pub fn scale_fit(g: &[f64], y: &[f64]) -> (f64, f64) {
    let c = g.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / g.iter().map(|a| a * a).sum::<f64>();
    let rel = (g
        .iter()
        .zip(y)
        .map(|(a, b)| ((b - c * a) / b).powi(2))
        .sum::<f64>()
        / g.len() as f64)
        .sqrt();
    (c, rel)
}
