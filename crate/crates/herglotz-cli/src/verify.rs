//! Sphere-quadrature checks of the closed Gram forms, the Hansen gradient
//! Gram and the special-function conventions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use herglotz::hansen::{EigKind, HansenKind};
use herglotz::inner::{
    gauss_legendre, gram_closed, hansen_gram_closed, EigenField, GramKind, GramPair, HansenField, SphereQuadrature,
    VectorField,
};
use herglotz::specfun::{assoc_legendre, bessel_j, sph_bessel_j, sph_harmonic};
use herglotz::{ElasticParams, ModeIndex, SphPoint, SphTensor, SphVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliResult;

pub const DEFAULT_RADII: [f64; 5] = [0.3, 0.7, 1.0, 2.0, 5.0];
pub const GRAM_TOL: f64 = 1e-8;
/// Entries that vanish in closed form are held to this, relative to the
/// geometric mean of the two diagonal entries.
pub const ZERO_TOL: f64 = 1e-10;
pub const CONVENTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Default)]
struct Tally(BTreeMap<(usize, String), (f64, usize, f64)>);

impl Tally {
    fn add(&mut self, order: usize, name: String, err: f64, tol: f64) {
        let e = self.0.entry((order, name)).or_insert((0.0, 0, tol));
        // NaN errors must fail, so they are kept.
        if err.is_nan() || err > e.0 {
            e.0 = err;
        }
        e.1 += 1;
    }

    fn finish(self) -> Vec<IdentityCheck> {
        self.0
            .into_iter()
            .map(|((_, identity), (max_error, samples, tolerance))| IdentityCheck {
                identity,
                max_error,
                tolerance,
                samples,
                pass: max_error <= tolerance,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub kp: f64,
    pub ks: f64,
    pub l_max: u32,
    pub radii: Vec<f64>,
    pub perturbed: bool,
    pub checks: Vec<IdentityCheck>,
    pub first_failure: Option<String>,
    pub pass: bool,
}

fn kind_name(k: EigKind) -> &'static str {
    match k {
        EigKind::L => "L",
        EigKind::M => "M",
        EigKind::N => "N",
    }
}

fn gram_kind_name(k: GramKind) -> &'static str {
    match k {
        GramKind::Value => "value",
        GramKind::Gradient => "gradient",
    }
}

/// Sphere Gram matrices (values and ∇_S) of every listed field at radius r.
fn sphere_grams<F: VectorField>(fields: &[F], r: f64, q: &SphereQuadrature) -> CliResult<[Vec<C64>; 2]> {
    let n = fields.len();
    let partials = q
        .nodes()
        .par_chunks(8)
        .map(|chunk| -> CliResult<[Vec<C64>; 2]> {
            let mut val = vec![C64::new(0.0, 0.0); n * n];
            let mut grad = vec![C64::new(0.0, 0.0); n * n];
            for node in chunk {
                let p = SphPoint::new(r, node.theta, node.phi);
                let vg: Vec<(SphVec, SphTensor)> = fields
                    .iter()
                    .map(|f| f.value_and_gradient(&p))
                    .collect::<Result<_, _>>()?;
                for (i, (vi, gi)) in vg.iter().enumerate() {
                    for (j, (vj, gj)) in vg.iter().enumerate() {
                        val[i * n + j] += vi.dot_conj(vj) * node.weight;
                        grad[i * n + j] += gi.double_dot(gj, herglotz::domain::Pairing::Hermitian) * node.weight;
                    }
                }
            }
            Ok([val, grad])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut total = [vec![C64::new(0.0, 0.0); n * n], vec![C64::new(0.0, 0.0); n * n]];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            for (a, b) in t.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    Ok(total)
}

/// Closed Gram forms of L, M, N against sphere quadrature, every kind pair,
/// every mode pair up to `l_max`, at each radius. `perturb` flips the sign of
/// N on the quadrature side, a convention error the checks must catch.
pub fn gram_checks(
    params: &ElasticParams,
    l_max: u32,
    radii: &[f64],
    tol: f64,
    perturb: bool,
) -> CliResult<Vec<IdentityCheck>> {
    let q = SphereQuadrature::for_degree(l_max + 2);
    let fields: Vec<EigenField> = ModeIndex::all_up_to(l_max)
        .flat_map(|mode| {
            EigKind::ALL
                .into_iter()
                .filter(move |k| mode.l() > 0 || *k == EigKind::L)
                .map(move |k| EigenField::new(k, mode, *params))
        })
        .collect();
    let sign = |k: EigKind| if perturb && k == EigKind::N { -1.0 } else { 1.0 };
    let n = fields.len();
    let mut tally = Tally::default();
    for &r in radii {
        let grams = sphere_grams(&fields, r, &q)?;
        for (gi, gk) in [GramKind::Value, GramKind::Gradient].into_iter().enumerate() {
            let g = &grams[gi];
            let diag = |i: usize| -> CliResult<f64> {
                let f = &fields[i];
                let pair = GramPair {
                    left: f.kind,
                    right: f.kind,
                    kind: gk,
                };
                Ok(gram_closed(pair, (f.mode, f.mode), r, params)?.value.re)
            };
            let diags: Vec<f64> = (0..n).map(diag).collect::<CliResult<_>>()?;
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = (&fields[i], &fields[j]);
                    let pair = GramPair {
                        left: a.kind,
                        right: b.kind,
                        kind: gk,
                    };
                    let closed = gram_closed(pair, (a.mode, b.mode), r, params)?.value.re;
                    let quad = g[i * n + j] * (sign(a.kind) * sign(b.kind));
                    let base = format!("{} {}·{}", gram_kind_name(gk), kind_name(a.kind), kind_name(b.kind));
                    let order = gi * 9 + a.kind.index() * 3 + b.kind.index();
                    if closed != 0.0 {
                        let err = (quad - C64::new(closed, 0.0)).norm() / closed.abs();
                        tally.add(2 * order, base, err, tol);
                    } else {
                        let scale = (diags[i].abs() * diags[j].abs()).sqrt();
                        let err = quad.norm() / scale;
                        tally.add(2 * order + 1, format!("{base} (vanishing)"), err, ZERO_TOL);
                    }
                }
            }
        }
    }
    Ok(tally.finish())
}

fn hansen_name(h: HansenKind) -> &'static str {
    match h {
        HansenKind::P => "P",
        HansenKind::B => "B",
        HansenKind::C => "C",
    }
}

/// ⟨∇_S X, ∇_S Y⟩ for X, Y ∈ {P, B, C} against the closed values, per mode,
/// error relative to max(1, |closed|).
pub fn hansen_checks(l_max: u32, tol: f64) -> CliResult<Vec<IdentityCheck>> {
    let q = SphereQuadrature::for_degree(l_max + 2);
    let fields: Vec<HansenField> = ModeIndex::all_up_to(l_max)
        .flat_map(|mode| {
            HansenKind::ALL
                .into_iter()
                .filter(move |k| mode.l() > 0 || *k == HansenKind::P)
                .map(move |kind| HansenField { kind, mode })
        })
        .collect();
    let n = fields.len();
    let [_, grad] = sphere_grams(&fields, 1.0, &q)?;
    let mut tally = Tally::default();
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate() {
            if a.mode != b.mode {
                continue;
            }
            let closed = hansen_gram_closed(a.kind, b.kind, GramKind::Gradient, (a.mode, b.mode));
            let err = (grad[i * n + j] - C64::new(closed, 0.0)).norm() / closed.abs().max(1.0);
            let name = format!("hansen ∇{}·∇{}", hansen_name(a.kind), hansen_name(b.kind));
            tally.add(100 + a.kind.index() * 3 + b.kind.index(), name, err, tol);
        }
    }
    Ok(tally.finish())
}

/// The half-integer Bessel identity, the addition theorem and associated
/// Legendre orthogonality under Gauss–Legendre quadrature.
pub fn convention_checks(seed: u64, tol: f64) -> CliResult<Vec<IdentityCheck>> {
    let mut tally = Tally::default();
    for l in 0..=20u32 {
        for x in [0.5, 5.0, 50.0] {
            let big = bessel_j(f64::from(l) + 0.5, x)?;
            let small = sph_bessel_j(l, x)?;
            let lhs = (PI / (2.0 * x)).sqrt() * big;
            let err = (lhs - small).abs() / small.abs().max(1e-300);
            tally.add(200, "J_{l+1/2} = sqrt(2x/π) j_l".into(), err, tol);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let theta = rng.gen_range(0.01..PI - 0.01);
        let phi = rng.gen_range(0.0..2.0 * PI);
        for l in 0..=15u32 {
            let mut s = 0.0;
            for m in -(l as i32)..=l as i32 {
                s += sph_harmonic(l, m, theta, phi)?.norm_sqr();
            }
            let want = f64::from(2 * l + 1) / (4.0 * PI);
            tally.add(201, "addition theorem Σ_m |Y_l^m|² = (2l+1)/4π".into(), (s - want).abs() / want, tol);
        }
    }
    let (x, w) = gauss_legendre(12);
    let norm = |l: u32, m: u32| {
        let ratio: f64 = ((l - m + 1)..=(l + m)).map(f64::from).product();
        2.0 / f64::from(2 * l + 1) * ratio
    };
    for m in 0..=3u32 {
        for l in m..=8 {
            for lp in m..=8 {
                let mut s = 0.0;
                for (xi, wi) in x.iter().zip(&w) {
                    s += wi * assoc_legendre(l, m, *xi)?.0 * assoc_legendre(lp, m, *xi)?.0;
                }
                let scale = (norm(l, m) * norm(lp, m)).sqrt();
                let want = if l == lp { norm(l, m) } else { 0.0 };
                tally.add(202, "Legendre orthogonality".into(), (s - want).abs() / scale, tol);
            }
        }
    }
    Ok(tally.finish())
}

pub fn verify_gram(
    params: &ElasticParams,
    l_max: u32,
    radii: &[f64],
    tol: f64,
    seed: u64,
    perturb: bool,
) -> CliResult<VerifyReport> {
    let mut checks = gram_checks(params, l_max, radii, tol, perturb)?;
    checks.extend(hansen_checks(l_max, tol)?);
    checks.extend(convention_checks(seed, CONVENTION_TOL)?);
    let first_failure = checks.iter().find(|c| !c.pass).map(|c| c.identity.clone());
    Ok(VerifyReport {
        kp: params.kp(),
        ks: params.ks(),
        l_max,
        radii: radii.to_vec(),
        perturbed: perturb,
        pass: first_failure.is_none(),
        checks,
        first_failure,
    })
}
