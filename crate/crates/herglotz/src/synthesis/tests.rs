use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fd;
use crate::kernel3d::{build_cache, eval_cartesian};
use crate::specfun::{sph_bessel_j, sph_harmonic};

fn params() -> ElasticParams {
    ElasticParams::from_wavenumbers(1.0, 2.0).unwrap()
}

fn mode(l: u32, m: i32) -> ModeIndex {
    ModeIndex::new(l, m).unwrap()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn len(x: &[f64; 3]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn random_point(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    loop {
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-radius..radius));
        if len(&x) <= radius && len(&x) > 0.05 {
            return x;
        }
    }
}

fn random_pattern(rng: &mut ChaCha8Rng, l_top: u32, p: bool, s: bool) -> HarmonicPattern {
    let mut h = HarmonicPattern::default();
    for md in ModeIndex::all_up_to(l_top) {
        let mut z = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if p {
            h.gp.insert(md, z());
        }
        if s && md.l() > 0 {
            h.g2b.insert(md, z());
            h.g2c.insert(md, z());
        }
    }
    h
}

fn single_gp(l: u32, m: i32) -> FarFieldPattern {
    let mut h = HarmonicPattern::default();
    h.gp.insert(mode(l, m), c(1.0, 0.0));
    FarFieldPattern::Harmonic(h)
}

#[test]
fn zero_pattern_gives_zero_field() {
    let u = herglotz_synthesize(&FarFieldPattern::zero(), params(), [0.3, -1.0, 2.0]).unwrap();
    assert!(u.iter().all(|z| *z == ZERO));
}

#[test]
fn monopole_matches_plane_wave_average() {
    // ∫ e^{ik x·ξ} ξ dσ(ξ) Y_0^0 = 4π i Y_0^0 j_1(k|x|) x̂.
    let g = single_gp(0, 0);
    let y00 = sph_harmonic(0, 0, 1.0, 0.0).unwrap().re;
    for x in [[0.2, 0.1, -0.3], [1.0, 2.0, 0.5], [-2.5, 0.3, 1.1]] {
        let r = len(&x);
        let u = herglotz_synthesize(&g, params(), x).unwrap();
        let amp = 4.0 * PI * y00 * sph_bessel_j(1, params().kp() * r).unwrap();
        for i in 0..3 {
            let want = c(0.0, amp * x[i] / r);
            assert!((u[i] - want).norm() < 1e-13, "{x:?} {i}: {} vs {}", u[i], want);
        }
    }
}

#[test]
fn compressional_pattern_is_curl_free() {
    let s = Synthesizer::new(&single_gp(0, 0), params(), 3.5).unwrap();
    let f = |x: [f64; 3]| s.eval_unchecked(x);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let x = random_point(&mut rng, 3.0);
        let curl = fd::curl(&f, x, 1e-3);
        let scale = fd::jacobian_norm(&f, x, 1e-3);
        assert!(cvec_norm(&curl) <= 1e-6 * scale, "{x:?}");
    }
}

#[test]
fn synthesized_fields_solve_navier() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = FarFieldPattern::Harmonic(random_pattern(&mut rng, 3, true, true));
    let s = Synthesizer::new(&g, params(), 3.5).unwrap();
    let f = |x: [f64; 3]| s.eval_unchecked(x);
    for _ in 0..10 {
        let x = random_point(&mut rng, 3.0);
        let res = fd::navier_residual(&f, x, &params(), 1e-3);
        assert!(res.relative() <= 1e-5, "{x:?}: {}", res.relative());
    }
}

#[test]
fn harmonic_and_grid_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_pattern(&mut rng, 2, true, true);
    let grid = FarFieldPattern::Grid(h.to_grid(30, 61).unwrap());
    let harm = FarFieldPattern::Harmonic(h);
    let x = [0.4, -1.2, 0.9];
    let a = herglotz_synthesize(&harm, params(), x).unwrap();
    let b = herglotz_synthesize(&grid, params(), x).unwrap();
    assert!(cvec_norm(&std::array::from_fn(|i| a[i] - b[i])) < 1e-12 * cvec_norm(&a));
}

#[test]
fn coarse_grid_is_refused() {
    let g = FarFieldPattern::Grid(HarmonicPattern::default().to_grid(12, 25).unwrap());
    assert!(herglotz_synthesize(&g, params(), [0.5, 0.0, 0.0]).is_ok());
    match herglotz_synthesize(&g, params(), [5.0, 0.0, 0.0]) {
        Err(Error::Resolution { required, available }) => assert_eq!((required, available), (20, 12)),
        other => panic!("{other:?}"),
    }
    let s = Synthesizer::new(&single_gp(1, 0), params(), 1.0).unwrap();
    assert!(matches!(s.eval([0.0, 0.0, 2.0]), Err(Error::Resolution { .. })));
}

#[test]
fn grid_direction_invariants() {
    let mut grid = HarmonicPattern::default().to_grid(6, 13).unwrap();
    // Put a tangential vector into g1 at one node.
    let n = grid.quadrature().unwrap().nodes()[4];
    grid.g1[4] = Frame::new(n.theta, n.phi).theta_hat.map(|v| c(v, 0.0));
    let err = FarFieldPattern::Grid(grid.clone()).validate().unwrap_err();
    assert!(err.to_string().contains("1.000e0"), "{err}");
    grid.g1[4] = Frame::new(n.theta, n.phi).r_hat.map(|v| c(v, 0.0));
    FarFieldPattern::Grid(grid.clone()).validate().unwrap();
    grid.g2[0] = [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
    assert!(FarFieldPattern::Grid(grid).validate().is_err());
}

#[test]
fn pattern_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_pattern(&mut rng, 2, true, true);
    for g in [FarFieldPattern::Harmonic(h.clone()), FarFieldPattern::Grid(h.to_grid(5, 11).unwrap())] {
        let back = FarFieldPattern::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
    }
    let text = r#"{"representation":"harmonic","gp":[{"l":1,"m":0,"re":1.0,"im":0.0}]}"#;
    assert_eq!(FarFieldPattern::from_json(text).unwrap(), single_gp(1, 0));
    let bad = r#"{"representation":"harmonic","g2B":[{"l":0,"m":0,"re":1.0,"im":0.0}]}"#;
    assert!(FarFieldPattern::from_json(bad).is_err());
    let dup = r#"{"representation":"harmonic","gp":[{"l":1,"m":0,"re":1,"im":0},{"l":1,"m":0,"re":2,"im":0}]}"#;
    assert!(FarFieldPattern::from_json(dup).is_err());
}

#[test]
fn synthesis_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (h1, h2) = (random_pattern(&mut rng, 2, true, true), random_pattern(&mut rng, 2, true, true));
    let w = c(0.3, -1.7);
    let mut sum = HarmonicPattern::default();
    for (dst, a, b) in [(&mut sum.gp, &h1.gp, &h2.gp), (&mut sum.g2b, &h1.g2b, &h2.g2b), (&mut sum.g2c, &h1.g2c, &h2.g2c)] {
        for (k, v) in a {
            dst.insert(*k, *v + w * b[k]);
        }
    }
    let x = [1.1, 0.2, -0.7];
    let u1 = herglotz_synthesize(&FarFieldPattern::Harmonic(h1), params(), x).unwrap();
    let u2 = herglotz_synthesize(&FarFieldPattern::Harmonic(h2), params(), x).unwrap();
    let us = herglotz_synthesize(&FarFieldPattern::Harmonic(sum), params(), x).unwrap();
    let diff: CVec3 = std::array::from_fn(|i| us[i] - u1[i] - w * u2[i]);
    assert!(cvec_norm(&diff) < 1e-13 * cvec_norm(&us));
}

#[test]
fn split_of_pure_shear_and_identity() {
    let p = params();
    let m_only = CoeffField::from_modes(p, [(mode(2, 1), [ZERO, c(1.0, 0.5), ZERO])]).unwrap();
    let (up, us) = split_ps(&m_only);
    assert!(up.modes().all(|(_, v)| v.iter().all(|z| *z == ZERO)));
    assert_eq!(us, m_only);

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut u = CoeffField::new(p);
    for md in ModeIndex::all_up_to(3) {
        let mut abc: [C64; 3] = std::array::from_fn(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        if md.l() == 0 {
            abc[1] = ZERO;
            abc[2] = ZERO;
        }
        u.set(md, abc).unwrap();
    }
    let (up, us) = split_ps(&u);
    for (md, v) in u.modes() {
        let (a, b) = (up.get(*md), us.get(*md));
        for k in 0..3 {
            assert_eq!((a[k] + b[k]).re.to_bits(), v[k].re.to_bits());
            assert_eq!((a[k] + b[k]).im.to_bits(), v[k].im.to_bits());
        }
    }
}

#[test]
fn split_parts_are_curl_and_divergence_free() {
    let cache = build_cache(params(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut u = CoeffField::new(params());
    for md in ModeIndex::all_up_to(3) {
        let abc: [C64; 3] = std::array::from_fn(|k| {
            if md.l() == 0 && k > 0 {
                ZERO
            } else {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }
        });
        u.set(md, abc).unwrap();
    }
    let (up, us) = split_ps(&u);
    let fp = |x: [f64; 3]| eval_cartesian(&cache, &up, x).unwrap();
    let fs = |x: [f64; 3]| eval_cartesian(&cache, &us, x).unwrap();
    for _ in 0..10 {
        let x = random_point(&mut rng, 3.0);
        let curl = fd::curl(&fp, x, 1e-3);
        assert!(cvec_norm(&curl) <= 1e-5 * fd::jacobian_norm(&fp, x, 1e-3));
        let div = fd::divergence(&fs, x, 1e-3);
        assert!(div.norm() <= 1e-5 * fd::jacobian_norm(&fs, x, 1e-3));
    }
}

fn ball_rule() -> BallRule {
    BallRule::new(SphereQuadrature::for_degree(2), params().k_max())
}

#[test]
fn herglotz_functional_trivial_cases() {
    let zero = herglotz_condition_estimate(|_| Ok([ZERO; 3]), &[1.0, 5.0], &ball_rule()).unwrap();
    assert!(zero.iter().all(|s| s.value == 0.0));

    let cache = build_cache(params(), 1).unwrap();
    let u = CoeffField::from_modes(params(), [(mode(1, 0), [c(1.0, 0.0), c(0.5, 0.0), ZERO])]).unwrap();
    let u2 = CoeffField::from_modes(params(), [(mode(1, 0), [c(2.0, 0.0), c(1.0, 0.0), ZERO])]).unwrap();
    let radii = [2.0, 4.0, 8.0];
    let a = herglotz_condition_estimate(|x| eval_cartesian(&cache, &u, x), &radii, &ball_rule()).unwrap();
    let b = herglotz_condition_estimate(|x| eval_cartesian(&cache, &u2, x), &radii, &ball_rule()).unwrap();
    for (s, t) in a.iter().zip(&b) {
        assert_eq!(s.radius, t.radius);
        assert!((t.value - 4.0 * s.value).abs() <= 1e-12 * t.value);
    }
}

#[test]
fn herglotz_functional_bounded_for_l10() {
    let cache = build_cache(params(), 1).unwrap();
    let u = CoeffField::from_modes(params(), [(mode(1, 0), [c(1.0, 0.0), ZERO, ZERO])]).unwrap();
    let radii = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0];
    let vals = herglotz_condition_estimate(|x| eval_cartesian(&cache, &u, x), &radii, &ball_rule()).unwrap();
    let max = vals.iter().map(|s| s.value).fold(0.0, f64::max);
    let min = vals.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    assert!(min > 0.0 && max / min <= 3.0, "{vals:?}");
}

#[test]
fn radii_are_validated_and_sorted() {
    assert!(herglotz_condition_estimate(|_| Ok([ZERO; 3]), &[1.0, -2.0], &ball_rule()).is_err());
    let out = herglotz_condition_estimate(|_| Ok([c(1.0, 0.0), ZERO, ZERO]), &[2.0, 1.0], &ball_rule()).unwrap();
    // |u| = 1: (1/R)·(4/3)πR³.
    assert_eq!(out[0].radius, 1.0);
    for s in out {
        let want = 4.0 / 3.0 * PI * s.radius * s.radius;
        assert!((s.value - want).abs() < 1e-12 * want);
    }
}

fn rel_channels(u: &CoeffField) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (_, v) in u.modes() {
        for k in 0..3 {
            out[k] += v[k].norm_sqr();
        }
    }
    out.map(f64::sqrt)
}

#[test]
fn project_zero_pattern() {
    let cache = build_cache(params(), 4).unwrap();
    let u = synthesize_then_project(&FarFieldPattern::zero(), &cache, 4).unwrap();
    assert!(u.modes().all(|(_, v)| v.iter().all(|z| z.norm() == 0.0)));
}

#[test]
fn project_single_compressional_harmonic() {
    let cache = build_cache(params(), 4).unwrap();
    let u = synthesize_then_project(&single_gp(1, 0), &cache, 4).unwrap();
    let target = u.get(mode(1, 0))[0];
    // gp Y ξ synthesizes (4π i^{l-1}/kp) ∇(j_l(kp r) Y), and that gradient is L.
    let want = 4.0 * PI / params().kp() * cache.degree(1).unwrap().norm_l;
    assert!((target - c(want, 0.0)).norm() < 1e-8 * want, "{target}");
    for (md, v) in u.modes() {
        for (k, z) in v.iter().enumerate() {
            if (*md, k) != (mode(1, 0), 0) {
                assert!(z.norm() <= 1e-6 * target.norm(), "{md:?} {k}: {z}");
            }
        }
    }
}

#[test]
fn project_needs_band_margin_and_harmonic_form() {
    let cache = build_cache(params(), 4).unwrap();
    assert!(matches!(
        synthesize_then_project(&single_gp(3, 0), &cache, 4),
        Err(Error::Resolution { .. })
    ));
    let grid = FarFieldPattern::Grid(HarmonicPattern::default().to_grid(5, 11).unwrap());
    assert!(synthesize_then_project(&grid, &cache, 4).is_err());
}

#[test]
fn project_round_trip_and_purity() {
    let cache = build_cache(params(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (p, s) in [(true, true), (true, false), (false, true)] {
        let h = random_pattern(&mut rng, 3, p, s);
        let g = FarFieldPattern::Harmonic(h);
        let u = synthesize_then_project(&g, &cache, 5).unwrap();
        let ch = rel_channels(&u);
        let total = (ch[0] * ch[0] + ch[1] * ch[1] + ch[2] * ch[2]).sqrt();
        if !s {
            assert!(ch[1].max(ch[2]) <= 1e-6 * total, "{ch:?}");
        }
        if !p {
            assert!(ch[0] <= 1e-6 * total, "{ch:?}");
        }
        let synth = Synthesizer::new(&g, params(), 3.0).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut rng, 3.0);
            let a = synth.eval(x).unwrap();
            let b = eval_cartesian(&cache, &u, x).unwrap();
            let d: CVec3 = std::array::from_fn(|i| a[i] - b[i]);
            assert!(cvec_norm(&d) <= 1e-5 * cvec_norm(&a), "{x:?}: {} vs {}", cvec_norm(&d), cvec_norm(&a));
        }
    }
}

#[test]
fn projected_energy_is_comparable_to_far_field_energy() {
    let cache = build_cache(params(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut ratios = Vec::new();
    for _ in 0..20 {
        let h = random_pattern(&mut rng, 3, true, true);
        let g = FarFieldPattern::Harmonic(h);
        let u = synthesize_then_project(&g, &cache, 5).unwrap();
        let ch = rel_channels(&u);
        let (n1, n2) = g.l2_norms().unwrap();
        ratios.push((ch[0] * ch[0] + ch[1] * ch[1] + ch[2] * ch[2]).sqrt() / (n1 + n2));
    }
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 10.0, "{min} .. {max}");
}
