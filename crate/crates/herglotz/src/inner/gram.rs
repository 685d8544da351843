//! Closed-form sphere Gram values of L, M, N and of the Hansen harmonics, and
//! the Hilbert norms and L–N overlaps assembled from them.

use std::collections::HashMap;
use std::sync::{LazyLock, RwLock};

use rayon::prelude::*;
use serde::Serialize;

use super::quadrature::{RadialQuadrature, RadialWeight};
use crate::domain::{ElasticParams, ModeIndex, C64};
use crate::error::{Error, Result};
use crate::hansen::{eig_radial_from_parts, EigKind, HansenKind};
use crate::specfun::{sph_bessel_parts_row, sph_bessel_row};

/// Whether a Gram value pairs the fields or their spherical gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GramKind {
    Value,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GramPair {
    pub left: EigKind,
    pub right: EigKind,
    pub kind: GramKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramValue {
    pub pair: GramPair,
    pub modes: (ModeIndex, ModeIndex),
    pub r: f64,
    pub value: C64,
}

/// The m-free sphere Gram matrices over (L, M, N) on the sphere of radius r,
/// indexed by `EigKind::index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramRows {
    pub value: [[f64; 3]; 3],
    pub gradient: [[f64; 3]; 3],
}

impl GramRows {
    pub fn get(&self, pair: GramPair) -> f64 {
        let m = match pair.kind {
            GramKind::Value => &self.value,
            GramKind::Gradient => &self.gradient,
        };
        m[pair.left.index()][pair.right.index()]
    }
}

pub fn gram_rows(l: u32, r: f64, params: &ElasticParams) -> Result<GramRows> {
    let (kp, ks) = (params.kp(), params.ks());
    let jp = sph_bessel_row(l + 1, kp * r)?;
    let js = sph_bessel_row(l + 1, ks * r)?;
    let li = l as usize;
    // j_{l-1} only ever appears multiplied by l.
    let below = |row: &[f64]| if l == 0 { 0.0 } else { row[li - 1] };
    let (pu, pv) = (below(&jp), jp[li + 1]);
    let (su, sl, sv) = (below(&js), js[li], js[li + 1]);
    let lf = l as f64;
    let n = lf * (lf + 1.0);
    let d = 2.0 * lf + 1.0;

    let ll = kp * kp / d * (lf * pu * pu + (lf + 1.0) * pv * pv);
    let mm = n * sl * sl;
    let nn = ks * ks * n / d * ((lf + 1.0) * su * su + lf * sv * sv);
    let ln = kp * ks * n / d * (pu * su - pv * sv);

    let gll = kp * kp / d * (lf * lf * (lf - 1.0) * pu * pu + (lf + 1.0).powi(2) * (lf + 2.0) * pv * pv);
    let gmm = n * n * sl * sl;
    let gnn = ks * ks * n * n / d * ((lf - 1.0) * su * su + (lf + 2.0) * sv * sv);
    let gln = kp * ks * n / d * (lf * (lf - 1.0) * pu * su - (lf + 1.0) * (lf + 2.0) * pv * sv);

    Ok(GramRows {
        value: [[ll, 0.0, ln], [0.0, mm, 0.0], [ln, 0.0, nn]],
        gradient: [[gll, 0.0, gln], [0.0, gmm, 0.0], [gln, 0.0, gnn]],
    })
}

/// Closed-form sphere Gram value; exactly zero for distinct modes.
pub fn gram_closed(
    pair: GramPair,
    modes: (ModeIndex, ModeIndex),
    r: f64,
    params: &ElasticParams,
) -> Result<GramValue> {
    let value = if modes.0 != modes.1 {
        0.0
    } else {
        gram_rows(modes.0.l(), r, params)?.get(pair)
    };
    Ok(GramValue {
        pair,
        modes,
        r,
        value: C64::new(value, 0.0),
    })
}

/// Gram matrix of (∇_S P, ∇_S B, ∇_S C) for degree l, before the δ factor.
pub fn hansen_gradient_gram(l: u32) -> [[f64; 3]; 3] {
    let n = l as f64 * (l as f64 + 1.0);
    let x = -2.0 * n.sqrt();
    [[n + 2.0, x, 0.0], [x, n, 0.0], [0.0, 0.0, n]]
}

/// Closed-form ⟨X, Y⟩ or ⟨∇_S X, ∇_S Y⟩ over S² for Hansen harmonics X, Y.
pub fn hansen_gram_closed(
    left: HansenKind,
    right: HansenKind,
    kind: GramKind,
    modes: (ModeIndex, ModeIndex),
) -> f64 {
    let l = modes.0.l();
    if modes.0 != modes.1 || (l == 0 && (left != HansenKind::P || right != HansenKind::P)) {
        return 0.0;
    }
    match kind {
        GramKind::Value => f64::from(u8::from(left == right)),
        GramKind::Gradient => hansen_gradient_gram(l)[left.index()][right.index()],
    }
}

/// H-inner products between the eigenvectors of one degree (any m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HGramRow {
    pub l: u32,
    pub ll: f64,
    pub mm: f64,
    pub nn: f64,
    pub ln: f64,
}

impl HGramRow {
    pub fn norm(&self, kind: EigKind) -> f64 {
        match kind {
            EigKind::L => self.ll.sqrt(),
            EigKind::M => self.mm.sqrt(),
            EigKind::N => self.nn.sqrt(),
        }
    }

    /// ⟨𝒩, 𝓛⟩_H for the unit vectors; zero when l = 0.
    pub fn unit_overlap(&self) -> f64 {
        if self.l == 0 {
            0.0
        } else {
            self.ln / (self.ll * self.nn).sqrt()
        }
    }
}

const CHUNK: usize = 512;

/// ⟨L,L⟩_H, ⟨M,M⟩_H, ⟨N,N⟩_H and ⟨L,N⟩_H for every l ≤ l_max, from the
/// radial factors against the Hansen Gram matrices (identity plus gradient
/// part). One Bessel row per node serves all degrees.
pub fn h_gram_rows(l_max: u32, params: &ElasticParams, q: &RadialQuadrature) -> Result<Vec<HGramRow>> {
    if q.weight() != RadialWeight::Volume {
        return Err(Error::Invalid("3D Gram rows need the volume weight".into()));
    }
    let (kp, ks) = (params.kp(), params.ks());
    let width = l_max as usize + 1;
    let metric: Vec<[[f64; 3]; 3]> = (0..=l_max)
        .map(|l| {
            let mut g = hansen_gradient_gram(l);
            for (i, row) in g.iter_mut().enumerate() {
                row[i] += 1.0;
            }
            g
        })
        .collect();
    let form = |g: &[[f64; 3]; 3], x: &[f64; 3], y: &[f64; 3]| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += x[i] * g[i][j] * y[j];
            }
        }
        s
    };

    let partials: Vec<Vec<[f64; 4]>> = q
        .nodes()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![[0.0; 4]; width];
            for node in chunk {
                let pp = sph_bessel_parts_row(l_max, kp * node.r)?;
                let sp = sph_bessel_parts_row(l_max, ks * node.r)?;
                for l in 0..=l_max {
                    let li = l as usize;
                    let lv = eig_radial_from_parts(EigKind::L, l, kp, &pp[li]);
                    let mv = eig_radial_from_parts(EigKind::M, l, ks, &sp[li]);
                    let nv = eig_radial_from_parts(EigKind::N, l, ks, &sp[li]);
                    let g = &metric[li];
                    let vals = [form(g, &lv, &lv), form(g, &mv, &mv), form(g, &nv, &nv), form(g, &lv, &nv)];
                    if vals.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { node: node.r });
                    }
                    for (a, v) in acc[li].iter_mut().zip(vals) {
                        *a += node.weight * v;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![[0.0; 4]; width];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            for k in 0..4 {
                t[k] += p[k];
            }
        }
    }
    Ok(total
        .into_iter()
        .enumerate()
        .map(|(l, [ll, mm, nn, ln])| HGramRow {
            l: l as u32,
            ll,
            mm,
            nn,
            ln,
        })
        .collect())
}

type NormKey = (u32, u64, u64);

static NORM_CACHE: LazyLock<RwLock<HashMap<NormKey, HGramRow>>> = LazyLock::new(|| RwLock::new(HashMap::new()));

/// ‖X_l^m‖_H, cached per (l, kp, ks). The norms do not depend on m. Each
/// degree uses the default radial rule for that degree alone, so the cached
/// value never depends on call order.
pub fn h_norm_eig(kind: EigKind, mode: ModeIndex, params: &ElasticParams) -> Result<f64> {
    let l = mode.l();
    if l == 0 && kind != EigKind::L {
        return Err(Error::Mode {
            l,
            m: mode.m(),
            reason: "M and N vanish for l = 0",
        });
    }
    let key = (l, params.kp().to_bits(), params.ks().to_bits());
    if let Some(row) = NORM_CACHE.read().expect("norm cache poisoned").get(&key) {
        return Ok(row.norm(kind));
    }
    let q = RadialQuadrature::for_wavenumbers(l, params.k_min(), params.k_max(), RadialWeight::Volume)?;
    let row = h_gram_rows(l, params, &q)?[l as usize];
    NORM_CACHE.write().expect("norm cache poisoned").insert(key, row);
    Ok(row.norm(kind))
}
