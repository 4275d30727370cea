use anisoag::costs::{cent_lp, pi_cost, JumpPair};
use anisoag::entropy::{jump_functional, EntropyFn, ExtendedEntropy};
use anisoag::field::*;
use anisoag::numerics::quad::{integrate, GaussRule};
use anisoag::{BoundaryParam, NormSpec, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

fn euclid() -> Arc<BoundaryParam> {
    static BP: OnceLock<Arc<BoundaryParam>> = OnceLock::new();
    BP.get_or_init(|| Arc::new(BoundaryParam::trace(&NormSpec::Euclidean, 1024).unwrap())).clone()
}

fn l3() -> Arc<BoundaryParam> {
    static BP: OnceLock<Arc<BoundaryParam>> = OnceLock::new();
    BP.get_or_init(|| Arc::new(BoundaryParam::trace(&NormSpec::lp(3.0), 1024).unwrap())).clone()
}

fn ellipse() -> Arc<BoundaryParam> {
    static BP: OnceLock<Arc<BoundaryParam>> = OnceLock::new();
    BP.get_or_init(|| Arc::new(BoundaryParam::trace(&NormSpec::ellipse(2.0), 4096).unwrap())).clone()
}

fn random_u(seed: u64, g: GridSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..g.nx * g.ny).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn divergence_vanishes_for_any_potential() {
    let g = GridSpec { nx: 17, ny: 11, h: 0.1, eps: 0.3 };
    let f = GridField::new(euclid(), g, random_u(1, g)).unwrap();
    let scale = f.m().iter().fold(0.0f64, |s, m| s.max(m.norm())) / g.h;
    let worst = f.divergence().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    assert!(worst <= 1e-14 * scale, "{worst:e}");
}

#[test]
fn cached_m_follows_updates() {
    let g = GridSpec { nx: 5, ny: 4, h: 0.5, eps: 1.0 };
    let mut f = GridField::new(euclid(), g, vec![0.0; 20]).unwrap();
    assert_eq!(f.m_at(0, 0), Vec2::ZERO);
    f.u_mut()[1] = 1.0;
    assert!((f.m_at(0, 0) - Vec2::new(1.0, 1.0)).norm() < 1e-15);
    let u: Vec<f64> = (0..20).map(|k| (k % 5) as f64).collect();
    f.set_u(u).unwrap();
    assert!((f.m_at(2, 1) - Vec2::new(0.0, 2.0)).norm() < 1e-15);
    assert!(f.set_u(vec![0.0; 3]).is_err());
}

#[test]
fn grid_validation() {
    let bp = euclid();
    assert!(GridField::new(bp.clone(), GridSpec { nx: 2, ny: 5, h: 0.1, eps: 0.1 }, vec![0.0; 10]).is_err());
    assert!(GridField::new(bp.clone(), GridSpec { nx: 3, ny: 3, h: 0.0, eps: 0.1 }, vec![0.0; 9]).is_err());
    assert!(GridField::new(bp.clone(), GridSpec { nx: 3, ny: 3, h: 0.1, eps: -1.0 }, vec![0.0; 9]).is_err());
    assert!(GridField::new(bp, GridSpec { nx: 3, ny: 3, h: 0.1, eps: 0.1 }, vec![0.0; 8]).is_err());
}

#[test]
fn constant_fields() {
    let bp = euclid();
    let g = GridSpec::square(1.0, 10, 0.2);
    let f = build_field(bp.clone(), g, &FieldSpec::Constant(Vec2::new(0.0, 1.0))).unwrap();
    for j in 0..g.ny {
        for i in 0..g.nx {
            assert!((f.u_at(i, j) - i as f64 * g.h).abs() < 1e-15);
        }
    }
    assert!(f.m().iter().all(|m| (*m - Vec2::new(0.0, 1.0)).norm() < 1e-13));
    assert!(f.energy().unwrap() < 1e-24);
    let z = Vec2::new(0.3, -0.4);
    let f = build_field(bp, g, &FieldSpec::Constant(z)).unwrap();
    let exact = (1.0 - 0.25f64).powi(2) / 0.2;
    assert!((f.energy().unwrap() - exact).abs() < 1e-12 * exact);
}

#[test]
fn manufactured_energy_converges_at_second_order() {
    // m = ∇⊥(sin πx sin πy / π), euclidean norm, ε = 0.25
    let eps = 0.25;
    let m = |x: f64, y: f64| Vec2::new(-(PI * x).sin() * (PI * y).cos(), (PI * x).cos() * (PI * y).sin());
    let rule = GaussRule::new(20);
    let pot = rule.composite(
        |x| rule.composite(|y| (1.0 - m(x, y).norm2()).powi(2), 0.0, 1.0, 8),
        0.0,
        1.0,
        8,
    );
    let exact = eps * PI * PI + pot / eps;
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let f = GridField::from_fn(euclid(), GridSpec::square(1.0, n, eps), |p| {
                (PI * p.x).sin() * (PI * p.y).sin() / PI
            })
            .unwrap();
            (f.energy().unwrap() - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{errs:?}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for (bp, seed) in [(l3(), 3u64), (euclid(), 4), (ellipse(), 5)] {
        let g = GridSpec { nx: 6, ny: 5, h: 0.2, eps: 0.15 };
        let f = GridField::new(bp, g, random_u(seed, g)).unwrap();
        let mut grad = vec![0.0; 30];
        f.energy_gradient(&mut grad).unwrap();
        let gmax = grad.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for k in 0..30 {
            let step = 1e-6;
            let mut a = f.clone();
            a.u_mut()[k] += step;
            let mut b = f.clone();
            b.u_mut()[k] -= step;
            let fd = (a.energy().unwrap() - b.energy().unwrap()) / (2.0 * step);
            assert!((fd - grad[k]).abs() < 1e-6 * gmax, "node {k}: {fd} vs {}", grad[k]);
        }
    }
}

#[test]
fn minimize_at_constant_minimizer_is_immediate() {
    let bp = l3();
    let z = bp.gamma(0.4);
    let g = GridSpec::square(1.0, 16, 0.2);
    let f = build_field(bp, g, &FieldSpec::Constant(z)).unwrap();
    let e0 = f.energy().unwrap();
    let (out, rep) = minimize(&f, &MinimizeOptions::default()).unwrap();
    assert!(rep.iterations <= 1, "{rep:?}");
    assert!((out.energy().unwrap() - e0).abs() <= 1e-14);
}

#[test]
fn minimize_decreases_monotonically_and_keeps_boundary() {
    let bp = l3();
    let g = GridSpec::square(1.0, 20, 0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let z = bp.gamma(1.1);
    let mut f = build_field(bp, g, &FieldSpec::Constant(z)).unwrap();
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            f.u_mut()[j * g.nx + i] += rng.gen_range(-0.02..0.02);
        }
    }
    let (out, rep) = minimize(&f, &MinimizeOptions { max_iter: 200, rel_tol: 1e-12, memory: 8 }).unwrap();
    assert!(rep.history.windows(2).all(|w| w[1] <= w[0]));
    assert!(rep.final_energy < 1e-3 * rep.initial_energy);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1 {
                assert_eq!(out.u_at(i, j), f.u_at(i, j));
            }
        }
    }
}

#[test]
fn euclidean_vortex_is_rotated_radial_field() {
    let n = 64;
    let g = GridSpec::square(1.0, n, 0.05);
    let c = Vec2::new(0.5, 0.5);
    let f = build_field(euclid(), g, &FieldSpec::Vortex { center: c, sign: 1.0, core: 0.0 }).unwrap();
    let (cx, cy) = f.cells();
    let mut worst: f64 = 0.0;
    for j in 0..cy {
        for i in 0..cx {
            let x = f.cell_center(i, j) - c;
            if x.norm() > 0.1 {
                worst = worst.max((f.m_at(i, j) - x.rot() / x.norm()).norm());
            }
        }
    }
    assert!(worst < 2.0 * g.h, "{worst}");
}

#[test]
fn vortex_gradient_oracle_and_discrete_unit_norm() {
    let bp = l3();
    // exact: ∇_x ‖i x‖_* = −i V_B(i x) so ∇⊥ gives V_B(i x), on ∂B
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x = Vec2::polar(rng.gen_range(0.0..6.283)) * rng.gen_range(0.1..2.0);
        let d = 1e-6;
        let q = |p: Vec2| bp.dual_norm(p.rot());
        let grad = Vec2::new(
            (q(x + Vec2::new(d, 0.0)) - q(x - Vec2::new(d, 0.0))) / (2.0 * d),
            (q(x + Vec2::new(0.0, d)) - q(x - Vec2::new(0.0, d))) / (2.0 * d),
        );
        let v = bp.vortex(x.rot()).unwrap();
        assert!((grad.rot() - v).norm() < 1e-6);
        assert!((bp.norm_value(v) - 1.0).abs() < 1e-8);
    }
    // discrete: ‖m‖ → 1 away from the core; the dual of ℓ³ is only C^{1,1/2}
    // across the axes, so the rate there is h^{3/2} rather than h²
    let c = Vec2::new(0.5, 0.5);
    let mut devs = Vec::new();
    for n in [32, 64, 128] {
        let g = GridSpec::square(1.0, n, 0.05);
        let f = build_field(bp.clone(), g, &FieldSpec::Vortex { center: c, sign: -1.0, core: 0.0 }).unwrap();
        let (cx, cy) = f.cells();
        let mut d: f64 = 0.0;
        for j in 0..cy {
            for i in 0..cx {
                if (f.cell_center(i, j) - c).norm() > 0.2 {
                    d = d.max((bp.norm_value(f.m_at(i, j)) - 1.0).abs());
                }
            }
        }
        devs.push(d);
    }
    for w in devs.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.4, "{devs:?}");
    }
    assert!(devs[2] < 1e-3, "{devs:?}");
}

#[test]
fn field_construction_errors() {
    let bp = euclid();
    let g = GridSpec::square(1.0, 8, 0.1);
    let bad = FieldSpec::Jump(JumpSpec {
        z_plus: Vec2::polar(0.3),
        z_minus: Vec2::polar(-0.3),
        point: Vec2::new(0.5, 0.5),
        normal: Some(Vec2::new(0.0, 1.0)),
        profile: false,
    });
    match build_field(bp.clone(), g, &bad) {
        Err(e) => assert!(e.to_string().contains("divergence")),
        Ok(_) => panic!("incompatible normal accepted"),
    }
    let ok = FieldSpec::Jump(JumpSpec {
        z_plus: Vec2::polar(0.3),
        z_minus: Vec2::polar(-0.3),
        point: Vec2::new(0.5, 0.5),
        normal: Some(Vec2::new(-2.0, 0.0)),
        profile: false,
    });
    assert!(build_field(bp.clone(), g, &ok).is_ok());
    let outside = FieldSpec::Vortex { center: Vec2::new(1.5, 0.5), sign: 1.0, core: 0.0 };
    assert!(build_field(bp.clone(), g, &outside).is_err());
    let nan = FieldSpec::Potential(Arc::new(|x: Vec2| if x.x > 0.5 { f64::NAN } else { 0.0 }));
    assert!(build_field(bp, g, &nan).is_err());
}

#[test]
fn sharp_and_profile_jump_fields() {
    let bp = l3();
    let (zp, zm) = chord_states(&bp, Vec2::new(1.0, 0.0), 0.4).unwrap();
    let jp = JumpPair::new(&bp, zp, zm).unwrap();
    assert!((jp.nu - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    let g = GridSpec::square(1.0, 64, 1.0 / 32.0);
    let spec = |profile| {
        FieldSpec::Jump(JumpSpec {
            z_plus: zp,
            z_minus: zm,
            point: Vec2::new(0.5, 0.5),
            normal: None,
            profile,
        })
    };
    let sharp = build_field(bp.clone(), g, &spec(false)).unwrap();
    assert!((sharp.m_at(3, 10) - zp).norm() < 1e-12);
    assert!((sharp.m_at(60, 10) - zm).norm() < 1e-12);
    let smooth = build_field(bp.clone(), g, &spec(true)).unwrap();
    assert!((smooth.m_at(0, 10) - zp).norm() < 1e-6);
    assert!((smooth.m_at(63, 10) - zm).norm() < 1e-6);
    let m = smooth.m_at(32, 10);
    assert!(bp.norm_value(m) < 1.0 && (m.dot(jp.nu) - jp.a).abs() < 1e-9);
}

#[test]
fn pasted_profile_energy_approaches_c1d_times_length() {
    let bp = l3();
    let (zp, zm) = chord_states(&bp, Vec2::new(1.0, 0.0), 0.4).unwrap();
    let jp = JumpPair::new(&bp, zp, zm).unwrap();
    let c = anisoag::costs::c1d(&bp, &jp).unwrap();
    let eps = 1.0 / 16.0;
    let mut errs = Vec::new();
    for ratio in [4.0, 8.0, 16.0] {
        let n = (ratio / eps) as usize;
        let g = GridSpec::square(1.0, n, eps);
        let f = build_field(
            bp.clone(),
            g,
            &FieldSpec::Jump(JumpSpec { z_plus: zp, z_minus: zm, point: Vec2::new(0.5, 0.5), normal: None, profile: true }),
        )
        .unwrap();
        errs.push((f.energy().unwrap() - c).abs() / c);
    }
    assert!(errs[2] < 0.01 && errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
}

fn random_entropy(bp: &BoundaryParam, seed: u64) -> EntropyFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<(f64, f64)> = (0..5).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let lam: Vec<f64> = (0..bp.resolution())
        .map(|k| {
            let t = bp.theta(k);
            coef.iter()
                .enumerate()
                .map(|(j, (a, b))| (a * ((j + 1) as f64 * t).cos() + b * ((j + 1) as f64 * t).sin()) / (j + 1) as f64)
                .sum()
        })
        .collect();
    EntropyFn::project_to_admissible(bp, lam).unwrap()
}

#[test]
fn production_of_constant_field_vanishes() {
    let bp = l3();
    let e = random_entropy(&bp, 1);
    let f = build_field(bp.clone(), GridSpec::square(1.0, 16, 0.1), &FieldSpec::Constant(bp.gamma(2.0))).unwrap();
    let p = entropy_production(&f, EntropyRef::Plain(&e)).unwrap();
    assert!(p.total_variation < 1e-12);
    let off = build_field(bp.clone(), GridSpec::square(1.0, 16, 0.1), &FieldSpec::Constant(bp.gamma(2.0) * 0.9)).unwrap();
    match entropy_production(&off, EntropyRef::Plain(&e)) {
        Err(err) => assert!(err.to_string().contains("extended")),
        Ok(_) => panic!("off-circle field accepted"),
    }
    let ext = ExtendedEntropy::new(bp.clone(), e).unwrap();
    let p = entropy_production(&off, EntropyRef::Extended(&ext)).unwrap();
    assert!(p.total_variation < 1e-12 && p.total_variation >= p.signed_total.abs());
}

#[test]
fn aligned_jump_production_matches_jump_functional() {
    let bp = l3();
    let (zp, zm) = chord_states(&bp, Vec2::new(1.0, 0.0), 0.3).unwrap();
    let jp = JumpPair::new(&bp, zp, zm).unwrap();
    let g = GridSpec::square(1.0, 128, 0.05);
    let f = build_field(
        bp.clone(),
        g,
        &FieldSpec::Jump(JumpSpec { z_plus: zp, z_minus: zm, point: Vec2::new(0.5, 0.5), normal: None, profile: false }),
    )
    .unwrap();
    for seed in 0..3 {
        let e = random_entropy(&bp, seed);
        let c = jump_functional(&e, jp.theta_plus, jp.theta_minus, jp.nu).abs();
        let p = entropy_production(&f, EntropyRef::Plain(&e)).unwrap();
        let expected = c * (g.ny - 2) as f64 * g.h;
        assert!((p.total_variation - expected).abs() < 1e-9 * c.max(1e-3), "{} vs {expected}", p.total_variation);
    }
    let lp = cent_lp(&bp, &jp, 1024).unwrap();
    let e = EntropyFn::project_to_admissible(&bp, lp.lambda).unwrap();
    let p = entropy_production(&f, EntropyRef::Plain(&e)).unwrap();
    assert!((p.total_variation - lp.value).abs() < 0.02 * lp.value);
}

fn smooth_entropy(bp: &Arc<BoundaryParam>) -> ExtendedEntropy {
    let lam: Vec<f64> = (0..bp.resolution())
        .map(|k| {
            let t = bp.theta(k);
            t.cos() + 0.5 * (2.0 * t).sin()
        })
        .collect();
    ExtendedEntropy::new(bp.clone(), EntropyFn::project_to_admissible(bp, lam).unwrap()).unwrap()
}

pub fn manufactured_potential(p: Vec2) -> f64 {
    0.95 * p.x + 0.08 * (2.0 * p.x + 1.0).sin() * (3.0 * p.y).cos()
}

#[test]
fn production_identity_residual_is_second_order() {
    let bp = ellipse();
    let e = smooth_entropy(&bp);
    let mut res = Vec::new();
    for n in [16, 32, 64] {
        let f = GridField::from_fn(bp.clone(), GridSpec::square(1.0, n, 0.1), manufactured_potential).unwrap();
        let (lo, hi) = f.m().iter().fold((f64::MAX, 0.0f64), |(a, b), m| {
            let r = bp.norm_value(*m);
            (a.min(r), b.max(r))
        });
        assert!(lo > 1.1 && hi < 1.9, "{lo} {hi}");
        let r = production_identity_residual(&f, &e);
        res.push(r.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    }
    for w in res.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{res:?}");
    }
}

#[test]
fn besov_on_constant_and_aligned_jump() {
    let bp = l3();
    let g = GridSpec::square(1.0, 64, 0.05);
    let f = build_field(bp.clone(), g, &FieldSpec::Constant(bp.gamma(0.3))).unwrap();
    let w = CellWindow::inset(&f, 3);
    assert!(besov_functional(&f, (2, 1), w).unwrap() < 1e-12);
    assert!(besov_functional(&f, (4, 0), w).is_err());
    assert!(besov_functional(&f, (0, 0), w).is_err());

    let (zp, zm) = chord_states(&bp, Vec2::new(1.0, 0.0), 0.3).unwrap();
    let jp = JumpPair::new(&bp, zp, zm).unwrap();
    let f = build_field(
        bp.clone(),
        g,
        &FieldSpec::Jump(JumpSpec { z_plus: zp, z_minus: zm, point: Vec2::new(0.5, 0.5), normal: None, profile: false }),
    )
    .unwrap();
    let w = CellWindow::inset(&f, 3);
    let sup = besov_sup(&f, 3, 12, w).unwrap();
    let pi = pi_cost(&bp, jp.theta_plus, jp.theta_minus).value;
    let len = (w.j1 - w.j0) as f64 * g.h;
    assert_eq!(sup.offset, (3, 0));
    assert!((sup.value - pi * len).abs() < 1e-9, "{} vs {}", sup.value, pi * len);
}

#[test]
fn kinetic_residual_constant_and_jump() {
    let bp = l3();
    let g = GridSpec::square(1.0, 64, 0.05);
    let f = build_field(bp.clone(), g, &FieldSpec::Constant(bp.gamma(0.8))).unwrap();
    let z = BumpTest { center: Vec2::new(0.45, 0.55), radius: 0.3 };
    for t in [0.1, 1.0, 2.5, 4.0] {
        assert!(kinetic_residual(&f, t, &|x| z.gradient(x)).abs() < 1e-3);
    }
    // jump with a separating direction: limit is γ'(t)·e₁ ∫ζ(½, y) dy (up to the side sign)
    let (zp, zm) = chord_states(&bp, Vec2::new(1.0, 0.0), 0.3).unwrap();
    let t = (0..720)
        .map(|k| k as f64 * PI / 360.0)
        .filter(|&t| zp.dot(bp.gamma(t).rot()) * zm.dot(bp.gamma(t).rot()) < 0.0)
        .fold(0.0, |b: f64, t| if bp.gamma_prime(t).x.abs() > bp.gamma_prime(b).x.abs() { t } else { b });
    let ig = bp.gamma(t).rot();
    assert!(zp.dot(ig) * zm.dot(ig) < 0.0);
    let side = if zp.dot(ig) > 0.0 { 1.0 } else { -1.0 };
    let z = BumpTest { center: Vec2::new(0.5, 0.47), radius: 0.3 };
    let oracle = side * bp.gamma_prime(t).x * integrate(|y| z.value(Vec2::new(0.5, y)), 0.17, 0.77, 1e-14, 1e-12).unwrap();
    assert!(oracle.abs() > 0.05);
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let f = build_field(
            bp.clone(),
            GridSpec::square(1.0, n, 0.05),
            &FieldSpec::Jump(JumpSpec { z_plus: zp, z_minus: zm, point: Vec2::new(0.5, 0.5), normal: None, profile: false }),
        )
        .unwrap();
        errs.push((kinetic_residual(&f, t, &|x| z.gradient(x)) - oracle).abs());
    }
    assert!(errs[2] < errs[1] && errs[1] < errs[0] && errs[2] < 1e-3 * oracle.abs(), "{errs:?}");
}

#[test]
fn bump_gradient_matches_differences() {
    let z = BumpTest { center: Vec2::new(0.2, -0.1), radius: 0.7 };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..40 {
        let x = z.center + Vec2::polar(rng.gen_range(0.0..6.3)) * rng.gen_range(0.0..0.69);
        let d = 1e-6;
        let fd = Vec2::new(
            (z.value(x + Vec2::new(d, 0.0)) - z.value(x - Vec2::new(d, 0.0))) / (2.0 * d),
            (z.value(x + Vec2::new(0.0, d)) - z.value(x - Vec2::new(0.0, d))) / (2.0 * d),
        );
        assert!((fd - z.gradient(x)).norm() < 1e-6);
    }
}

#[test]
fn vortex_energy_decays_with_eps() {
    let st = vortex_decay_study(euclid(), &[0.1, 0.05, 0.025], 8.0).unwrap();
    assert!(st.strictly_decreasing, "{st:?}");
    assert!(st.ratios.iter().all(|r| *r < 1.0));
    assert!(st.fit_c > 0.0 && st.fit_residual < 0.5);
    assert!(vortex_decay_study(euclid(), &[0.1, 2.0], 8.0).is_err());
}

#[test]
fn binary_and_csv_round_trip() {
    let bp = l3();
    let g = GridSpec { nx: 7, ny: 5, h: 0.125, eps: 0.3 };
    let f = GridField::new(bp.clone(), g, random_u(6, g)).unwrap();
    let mut buf = Vec::new();
    f.write_binary(&mut buf).unwrap();
    assert_eq!(buf.len(), 32 + 8 * 35);
    assert_eq!(u64::from_le_bytes(buf[0..8].try_into().unwrap()), 7);
    assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 0.3);
    let back = GridField::read_binary(bp.clone(), &buf[..]).unwrap();
    assert_eq!(back.u(), f.u());
    assert_eq!(back.grid(), g);
    assert!(GridField::read_binary(bp, &buf[..40]).is_err());
    let mut csv = Vec::new();
    f.write_cells_csv(&mut csv).unwrap();
    let s = String::from_utf8(csv).unwrap();
    assert!(s.starts_with("x,y,m1,m2,norm\n"));
    assert_eq!(s.lines().count(), 1 + 6 * 4);
}

#[test]
fn line_length_clipping() {
    let g = GridSpec::square(1.0, 10, 0.1);
    assert!((line_length_in(g, Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0)) - 1.0).abs() < 1e-12);
    assert!((line_length_in(g, Vec2::new(0.5, 0.5), Vec2::new(1.0, 1.0)) - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(line_length_in(g, Vec2::new(2.0, 0.5), Vec2::new(1.0, 0.0)), 0.0);
}

#[test]
fn small_sandwich_run() {
    let bp = l3();
    let (zp, zm) = chord_states(&bp, Vec2::new(1.0, 0.0), 0.4).unwrap();
    let opts = SandwichOptions {
        cells: 64,
        eps_over_h: 4.0,
        lp_resolution: 512,
        minimize: MinimizeOptions { max_iter: 100, rel_tol: 1e-9, memory: 8 },
    };
    let r = sandwich(bp, zp, zm, &opts).unwrap();
    assert!(r.final_energy <= r.initial_energy);
    assert!(r.minimize.history.windows(2).all(|w| w[1] <= w[0]));
    assert!((r.length - 1.0).abs() < 1e-12);
    assert!(r.final_energy <= 1.05 * r.c1d_l && r.final_energy > 0.0, "{r:?}");
    assert!(r.empirical_c.is_finite() && r.empirical_c > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn divergence_free_and_tv_bound(seed in 0u64..1000, nx in 3usize..12, ny in 3usize..12) {
        let bp = euclid();
        let g = GridSpec { nx, ny, h: 0.1, eps: 0.2 };
        let f = GridField::new(bp.clone(), g, random_u(seed, g)).unwrap();
        let s = f.m().iter().fold(1.0f64, |s, m| s.max(m.norm())) / g.h;
        prop_assert!(f.divergence().iter().all(|v| v.abs() <= 1e-13 * s));
        let e = smooth_entropy(&bp);
        let p = entropy_production(&f, EntropyRef::Extended(&e)).unwrap();
        prop_assert!(p.total_variation + 1e-15 >= p.signed_total.abs());
    }
}
