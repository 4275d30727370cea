use anisoag::entropy::{self, heaviside_entropy, lambda_of_psi, phi_psi, EntropyFn, ExtendedEntropy};
use anisoag::{BoundaryParam, NormSpec, Vec2};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::{Arc, OnceLock};

fn euclid(n: usize) -> BoundaryParam {
    BoundaryParam::trace(&NormSpec::Euclidean, n).unwrap()
}

fn l3() -> &'static BoundaryParam {
    static BP: OnceLock<BoundaryParam> = OnceLock::new();
    BP.get_or_init(|| BoundaryParam::trace(&NormSpec::lp(3.0), 2048).unwrap())
}

#[test]
fn constant_lambda_is_untouched_and_gives_identity() {
    // the trapezoid rule loses one order at the flat points of ℓ³
    for (bp, tol) in [(euclid(4096), 1e-10), (BoundaryParam::trace(&NormSpec::lp(3.0), 4096).unwrap(), 1e-9)] {
        let e = EntropyFn::project_to_admissible(&bp, vec![1.0; bp.resolution()]).unwrap();
        assert!(e.lambda().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let g0 = bp.gamma(0.0);
        for t in [0.3, 1.7, 2.9, 4.4, 6.0] {
            let d = e.phi_eval(t).unwrap() - (bp.gamma(t) - g0);
            assert!(d.norm() < tol, "theta {t}: {d:?}");
        }
    }
    let bp = euclid(4096);
    let e = EntropyFn::project_to_admissible(&bp, vec![2.5; 4096]).unwrap();
    let d = e.phi_eval(1.1).unwrap() - (bp.gamma(1.1) - bp.gamma(0.0)) * 2.5;
    assert!(d.norm() < 1e-9);
}

#[test]
fn euclidean_half_turn_value() {
    let bp = euclid(4096);
    let e = EntropyFn::project_to_admissible(&bp, vec![1.0; 4096]).unwrap();
    let v = e.phi_eval(PI).unwrap();
    assert!((v - Vec2::new(-2.0, 0.0)).norm() < 1e-10, "{v:?}");
    let z = EntropyFn::project_to_admissible(&bp, vec![0.0; 4096]).unwrap();
    assert_eq!(z.phi_eval(2.0).unwrap(), Vec2::ZERO);
}

#[test]
fn projection_removes_its_own_basis() {
    let bp = l3();
    let lam: Vec<f64> = bp.gamma_prime_samples().iter().map(|g| g.x).collect();
    let e = EntropyFn::project_to_admissible(bp, lam).unwrap();
    assert!(e.lambda().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn third_harmonic_is_orthogonal() {
    let bp = euclid(1024);
    let lam: Vec<f64> = (0..1024).map(|k| (3.0 * bp.theta(k)).sin()).collect();
    let e = EntropyFn::project_to_admissible(&bp, lam.clone()).unwrap();
    let dev = e.lambda().iter().zip(&lam).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-10, "{dev}");
}

#[test]
fn admissible_entropies_close_and_are_periodic() {
    let bp = l3();
    let lam: Vec<f64> = (0..bp.resolution())
        .map(|k| {
            let t = bp.theta(k);
            (2.0 * t).cos() + 0.4 * (5.0 * t + 0.3).sin() + 0.7 * t.sin()
        })
        .collect();
    let e = EntropyFn::project_to_admissible(bp, lam).unwrap();
    assert!(e.closure_defect().norm() < 1e-8);
    for t in [0.0, 0.5, 2.2, 5.1] {
        let d = e.phi_eval(t + TAU).unwrap() - e.phi_eval(t).unwrap();
        assert!(d.norm() < 1e-8);
    }
}

#[test]
fn derivative_is_parallel_to_tangent_at_midpoints() {
    for norm in [NormSpec::Euclidean, NormSpec::ellipse(2.0), NormSpec::lp(4.0)] {
        let bp = BoundaryParam::trace(&norm, 4096).unwrap();
        let lam: Vec<f64> = (0..4096).map(|k| 1.0 + 0.5 * (3.0 * bp.theta(k)).sin()).collect();
        let e = EntropyFn::project_to_admissible(&bp, lam).unwrap();
        let h = bp.spacing();
        let mut worst: f64 = 0.0;
        for k in (0..4096).step_by(37) {
            let t = (k as f64 + 0.5) * h;
            let d = (e.phi_at(t + 1e-4 * h) - e.phi_at(t - 1e-4 * h)) / (2e-4 * h);
            worst = worst.max(d.cross(bp.curve_tangent(t).normalized()).abs());
        }
        assert!(worst < 1e-8, "{}: {worst:e}", norm.label());
    }
}

#[test]
fn lip_bound_stable_under_doubling() {
    let lip = |n: usize| {
        let bp = BoundaryParam::trace(&NormSpec::lp(3.0), n).unwrap();
        let lam: Vec<f64> = (0..n).map(|k| (2.0 * bp.theta(k)).sin() * 0.8).collect();
        EntropyFn::project_to_admissible(&bp, lam).unwrap().lip_bound()
    };
    let (a, b) = (lip(512), lip(1024));
    assert!(((a - b) / b).abs() < 0.05, "{a} {b}");
}

#[test]
fn heaviside_limit_on_and_off_branch() {
    // reference point θ₀ + 3π/2 lies on the off branch where Φ^ξ = 0
    for norm in [NormSpec::Euclidean, NormSpec::lp(3.0), NormSpec::ellipse(2.0)] {
        let bp = BoundaryParam::trace(&norm, 8192).unwrap();
        let xi = bp.gamma(0.4);
        let mut on_err = Vec::new();
        let mut off_err = Vec::new();
        let mut mu = Vec::new();
        for delta in [0.2, 0.1, 0.05] {
            let he = heaviside_entropy(&bp, xi, delta).unwrap();
            let t0 = he.theta0;
            let r = he.entropy.phi_eval(t0 + 1.5 * PI).unwrap();
            let on = t0 + FRAC_PI_2;
            let off = t0 + 1.25 * PI;
            on_err.push((he.entropy.phi_eval(on).unwrap() - r - he.indicator(&bp, on)).norm());
            off_err.push((he.entropy.phi_eval(off).unwrap() - r - he.indicator(&bp, off)).norm());
            mu.push(he.mu_l1);
            let sup = (0..bp.resolution()).map(|k| he.entropy.phi_samples()[k].norm()).fold(0.0, f64::max);
            assert!(sup <= 2.0 + he.mu_l1 + 1e-9, "sup {sup}");
        }
        assert!(on_err.windows(2).all(|w| w[1] < w[0]), "{} {on_err:?}", norm.label());
        assert!(off_err.windows(2).all(|w| w[1] < w[0]), "{} {off_err:?}", norm.label());
        assert!(mu.windows(2).all(|w| w[1] < w[0]), "{mu:?}");
        assert!(on_err[2] < 0.05 && off_err[2] < 0.05, "{on_err:?} {off_err:?}");
    }
    let bp = euclid(8192);
    let he = heaviside_entropy(&bp, Vec2::new(1.0, 0.0), 0.02).unwrap();
    let d = he.entropy.phi_eval(FRAC_PI_2).unwrap() - he.entropy.phi_eval(1.5 * PI).unwrap();
    assert!((d - Vec2::new(0.0, 1.0)).norm() < 0.02, "{d:?}");
}

#[test]
fn heaviside_rejects_bad_delta() {
    let bp = euclid(256);
    assert!(heaviside_entropy(&bp, Vec2::new(1.0, 0.0), 0.0).is_err());
    assert!(heaviside_entropy(&bp, Vec2::new(1.0, 0.0), 1.0).is_err());
    assert!(heaviside_entropy(&bp, Vec2::new(3.0, 0.0), 0.1).is_err());
}

#[test]
fn psi_constant_gives_twice_constant() {
    let bp = l3();
    let lam = lambda_of_psi(bp, &|_| 0.7);
    assert!(lam.iter().all(|v| (v - 1.4).abs() < 1e-15));
}

#[test]
fn psi_cosine_closed_form() {
    // ∫ cos s (cos s, sin s) ds over a half period centred at θ
    let bp = euclid(1024);
    for t in [0.0, 0.9, 2.5, 4.0] {
        let v = phi_psi(&bp, &|s: f64| s.cos(), t);
        assert!((v - Vec2::new(FRAC_PI_2, 0.0)).norm() < 1e-6, "{t}: {v:?}");
    }
}

#[test]
fn psi_family_matches_accumulated_entropy() {
    let psi = |s: f64| (2.0 * s).cos() + 0.3 * (3.0 * s + 0.2).sin() + 0.5 * s.sin();
    let err = |n: usize| {
        let bp = BoundaryParam::trace(&NormSpec::ellipse(2.0), n).unwrap();
        let e = EntropyFn::project_to_admissible(&bp, lambda_of_psi(&bp, &psi)).unwrap();
        let base = phi_psi(&bp, &psi, 0.0);
        [0.4, 1.3, 2.8, 4.9]
            .iter()
            .map(|&t| ((phi_psi(&bp, &psi, t) - base) - e.phi_eval(t).unwrap()).norm())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(1024), err(2048));
    assert!(b < 1e-5, "{a:e} {b:e}");
    assert!(a / b > 3.0, "rate {a:e} {b:e}");
}

#[test]
fn psi_family_derivative_is_tangent() {
    use rand::{Rng, SeedableRng};
    let bp = l3();
    let psi = |s: f64| (2.0 * s).sin() - 0.4 * (s + 1.0).cos();
    let lam = lambda_of_psi(bp, &psi);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let t: f64 = rng.gen_range(0.0..TAU);
        let h = 1e-5;
        let d = (phi_psi(bp, &psi, t + h) - phi_psi(bp, &psi, t - h)) / (2.0 * h);
        let g = bp.gamma_prime(t);
        assert!(d.cross(g).abs() < 1e-5 * (1.0 + d.norm()), "{t}");
        let l = psi(t + FRAC_PI_2) + psi(t - FRAC_PI_2);
        assert!((d.dot(g) - l).abs() < 1e-5, "{t}");
    }
    assert_eq!(lam.len(), bp.resolution());
}

fn extended_l3() -> ExtendedEntropy {
    let bp = Arc::new(l3().clone());
    let lam: Vec<f64> = (0..bp.resolution()).map(|k| (2.0 * bp.theta(k)).sin() + 0.3).collect();
    let e = EntropyFn::project_to_admissible(&bp, lam).unwrap();
    ExtendedEntropy::new(bp, e).unwrap()
}

#[test]
fn extension_cutoff_and_unit_level() {
    let ext = extended_l3();
    let bp = ext.boundary();
    for t in [0.2, 1.9, 3.3] {
        let z = bp.gamma(t);
        let (p, _) = ext.eval(z);
        assert!((p - ext.entropy.phi_at(t)).norm() < 1e-9);
        assert_eq!(ext.eval(z * 0.3), (Vec2::ZERO, Vec2::ZERO));
        assert_eq!(ext.eval(z * 2.4), (Vec2::ZERO, Vec2::ZERO));
    }
    assert!(ExtendedEntropy::new(
        Arc::new(bp.clone()),
        EntropyFn::from_lambda(bp, bp.gamma_prime_samples().iter().map(|g| g.y).collect()).unwrap()
    )
    .is_err());
}

#[test]
fn production_identity_pointwise() {
    // m = ∇⊥u for smooth u; ∇·Φ̂(m) by central differences vs ½Ψ(m)·∇(1−‖m‖²)
    let ext = extended_l3();
    let bp = ext.boundary();
    let m = |x: f64, y: f64| {
        // u = sin(1.3x)cos(0.7y) + 0.2x + 0.9y
        let ux = 1.3 * (1.3 * x).cos() * (0.7 * y).cos() + 0.2;
        let uy = -0.7 * (1.3 * x).sin() * (0.7 * y).sin() + 0.9;
        Vec2::new(-uy, ux)
    };
    let mut checked = 0;
    let h = 1e-5;
    for i in 0..12 {
        for j in 0..12 {
            let (x, y) = (i as f64 * 0.37, j as f64 * 0.41);
            let r = bp.norm_value(m(x, y));
            if !((0.6..0.9).contains(&r) || (1.1..1.9).contains(&r)) {
                continue;
            }
            let div = (ext.eval(m(x + h, y)).0.x - ext.eval(m(x - h, y)).0.x) / (2.0 * h)
                + (ext.eval(m(x, y + h)).0.y - ext.eval(m(x, y - h)).0.y) / (2.0 * h);
            let w = |x: f64, y: f64| 1.0 - bp.norm_value(m(x, y)).powi(2);
            let grad = Vec2::new((w(x + h, y) - w(x - h, y)) / (2.0 * h), (w(x, y + h) - w(x, y - h)) / (2.0 * h));
            let rhs = 0.5 * ext.eval(m(x, y)).1.dot(grad);
            assert!((div - rhs).abs() < 1e-5 * (1.0 + rhs.abs()), "({x},{y}) {div} {rhs}");
            checked += 1;
        }
    }
    assert!(checked > 20, "{checked}");
}

#[test]
fn csv_header() {
    let bp = euclid(128);
    let e = EntropyFn::project_to_admissible(&bp, vec![1.0; 128]).unwrap();
    let mut out = Vec::new();
    e.write_csv(&mut out).unwrap();
    let s = String::from_utf8(out).unwrap();
    assert!(s.starts_with("theta,lambda,phix,phiy\n"));
    assert_eq!(s.lines().count(), 129);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn projection_is_idempotent(c in prop::collection::vec(-1.0f64..1.0, 6)) {
        let bp = l3();
        let lam: Vec<f64> = (0..bp.resolution()).map(|k| {
            let t = bp.theta(k);
            c[0] + c[1] * t.cos() + c[2] * t.sin() + c[3] * (2.0 * t).cos() + c[4] * (3.0 * t).sin() + c[5] * (4.0 * t).cos()
        }).collect();
        let e = EntropyFn::project_to_admissible(bp, lam).unwrap();
        let (again, coef) = entropy::project(bp, e.lambda().to_vec()).unwrap();
        prop_assert!(coef[0].abs() < 1e-12 && coef[1].abs() < 1e-12);
        prop_assert!(again.iter().zip(e.lambda()).all(|(a, b)| (a - b).abs() < 1e-12));
        prop_assert!(e.closure_defect().norm() < 1e-8);
    }

    #[test]
    fn entropy_is_linear_in_lambda(s in -3.0f64..3.0, t in 0.0f64..6.28) {
        let bp = l3();
        let lam: Vec<f64> = (0..bp.resolution()).map(|k| (bp.theta(k) * 2.0).sin()).collect();
        let e = EntropyFn::project_to_admissible(bp, lam.clone()).unwrap();
        let es = EntropyFn::project_to_admissible(bp, lam.iter().map(|v| v * s).collect()).unwrap();
        prop_assert!((es.phi_eval(t).unwrap() - e.phi_eval(t).unwrap() * s).norm() < 1e-10);
        prop_assert!((e.scaled(s).phi_at(t) - es.phi_at(t)).norm() < 1e-10);
    }
}
