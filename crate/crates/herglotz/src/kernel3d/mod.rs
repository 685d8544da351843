//! Unit eigenvectors 𝓛, 𝓜, 𝒩, the Gram–Schmidt replacement Ñ = 𝒩 − c_ℓ 𝓛,
//! projection onto the truncated basis, and the reproducing kernel Γ(x, y)
//! as a tensor series in Cartesian components.

mod coeffs;
mod project;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub use coeffs::{eval_cartesian, eval_field, eval_parts, CoeffField, ExpansionField, FieldParts};
pub use project::{
    basis_inner, kernel_section, project, project_expansion, reproduce_check, reproduce_check_with, BasisInner,
    ExpansionGram, ReproduceReport,
};

use crate::domain::{
    matrix_to_json, CVec3, ElasticParams, ModeIndex, SphPoint, SphTensor, SphVec, C64, POLE_EPS, ZERO,
};
use crate::error::{Error, Result};
use crate::hansen::{eig_radial_from_parts, EigKind, HansenKind, HansenSet};
use crate::inner::{h_gram_rows, RadialQuadrature, RadialWeight, SphereQuadrature};
use crate::specfun::sph_bessel_parts_row;

/// Norms and the L–N overlap for one degree; the same for every m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeConstants {
    pub l: u32,
    pub norm_l: f64,
    /// Zero for l = 0, where M vanishes.
    pub norm_m: f64,
    /// Zero for l = 0, where N vanishes.
    pub norm_n: f64,
    /// c_ℓ = ⟨𝒩, 𝓛⟩_H.
    pub overlap: f64,
    /// ‖Ñ‖²_H = 1 − c_ℓ².
    pub n_tilde_sq: f64,
}

impl DegreeConstants {
    pub fn norm(&self, kind: EigKind) -> f64 {
        match kind {
            EigKind::L => self.norm_l,
            EigKind::M => self.norm_m,
            EigKind::N => self.norm_n,
        }
    }

    /// Coefficients K with Γ_ℓ^m(x, y) = Σ K_ij φ_i(y) ⊗ conj φ_j(x) over
    /// φ = (𝓛, 𝓜, 𝒩).
    pub fn kernel_weights(&self) -> [[f64; 3]; 3] {
        if self.l == 0 {
            return [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
        }
        let inv = 1.0 / self.n_tilde_sq;
        let c = self.overlap;
        [[inv, 0.0, -c * inv], [0.0, 1.0, 0.0], [-c * inv, 0.0, inv]]
    }
}

/// Orthonormalization data for every degree up to `l_max`. All norms come
/// from one radial rule, so the basis is orthonormal in one and the same
/// discrete inner product.
#[derive(Debug)]
pub struct OrthonormalCache {
    params: ElasticParams,
    l_max: u32,
    radial: RadialQuadrature,
    degrees: Vec<DegreeConstants>,
    gram: OnceLock<ExpansionGram>,
}

pub fn build_cache(params: ElasticParams, l_max: u32) -> Result<OrthonormalCache> {
    params.ensure_distinct()?;
    let radial = RadialQuadrature::for_wavenumbers(l_max, params.k_min(), params.k_max(), RadialWeight::Volume)?;
    let rows = h_gram_rows(l_max, &params, &radial)?;
    let degrees = rows
        .iter()
        .map(|row| {
            let overlap = row.unit_overlap();
            let n_tilde_sq = 1.0 - overlap * overlap;
            if !(n_tilde_sq > 0.0 && n_tilde_sq <= 1.0) {
                return Err(Error::Invalid(format!("‖Ñ‖² = {n_tilde_sq} at l = {}", row.l)));
            }
            let (norm_m, norm_n) = if row.l == 0 { (0.0, 0.0) } else { (row.norm(EigKind::M), row.norm(EigKind::N)) };
            Ok(DegreeConstants {
                l: row.l,
                norm_l: row.norm(EigKind::L),
                norm_m,
                norm_n,
                overlap,
                n_tilde_sq,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrthonormalCache {
        params,
        l_max,
        radial,
        degrees,
        gram: OnceLock::new(),
    })
}

impl OrthonormalCache {
    pub fn params(&self) -> &ElasticParams {
        &self.params
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// The radial rule the norms were computed with.
    pub fn radial(&self) -> &RadialQuadrature {
        &self.radial
    }

    pub fn degrees(&self) -> &[DegreeConstants] {
        &self.degrees
    }

    pub fn degree(&self, l: u32) -> Result<&DegreeConstants> {
        self.degrees.get(l as usize).ok_or(Error::Resolution {
            required: l as usize,
            available: self.l_max as usize,
        })
    }

    fn check_degree(&self, l: u32) -> Result<()> {
        self.degree(l).map(|_| ())
    }

    /// Sphere-quadrature Gram of the unit basis with the cache's own radial
    /// rule, built on first use.
    pub fn expansion_gram(&self) -> Result<&ExpansionGram> {
        if let Some(g) = self.gram.get() {
            return Ok(g);
        }
        let sphere = SphereQuadrature::for_degree(self.l_max);
        let g = ExpansionGram::build(self, self.l_max, &self.radial, &sphere)?;
        Ok(self.gram.get_or_init(|| g))
    }

    /// Radial factors of (𝓛, 𝓜, 𝒩) on (P, B, C) for every degree up to
    /// `l_max` at radius r.
    pub(crate) fn unit_radial_row(&self, l_max: u32, r: f64) -> Result<Vec<[[f64; 3]; 3]>> {
        self.check_degree(l_max)?;
        let (kp, ks) = (self.params.kp(), self.params.ks());
        let pp = sph_bessel_parts_row(l_max, kp * r)?;
        let sp = sph_bessel_parts_row(l_max, ks * r)?;
        Ok(self.degrees[..=l_max as usize]
            .iter()
            .map(|dc| {
                let li = dc.l as usize;
                let mut out = [[0.0; 3]; 3];
                for kind in EigKind::ALL {
                    let norm = dc.norm(kind);
                    if norm == 0.0 {
                        continue;
                    }
                    let (k, parts) = if kind == EigKind::L { (kp, &pp[li]) } else { (ks, &sp[li]) };
                    let f = eig_radial_from_parts(kind, dc.l, k, parts);
                    out[kind.index()] = f.map(|v| v / norm);
                }
                out
            })
            .collect())
    }
}

/// Frame values of the unit fields of one mode, indexed by `EigKind::index`.
pub(crate) fn unit_values(set: &HansenSet, radial: &[[f64; 3]; 3]) -> [SphVec; 3] {
    let mut out = [SphVec::ZERO; 3];
    for (o, f) in out.iter_mut().zip(radial) {
        for h in HansenKind::ALL {
            if f[h.index()] != 0.0 {
                *o += set.value(h) * f[h.index()];
            }
        }
    }
    out
}

pub(crate) fn unit_gradients(set: &HansenSet, radial: &[[f64; 3]; 3]) -> [SphTensor; 3] {
    let mut out = [SphTensor::ZERO; 3];
    for (o, f) in out.iter_mut().zip(radial) {
        for h in HansenKind::ALL {
            if f[h.index()] != 0.0 {
                *o += set.gradient(h) * f[h.index()];
            }
        }
    }
    out
}

/// Points closer than this (in sin θ) to the z-axis are treated as on it.
const AXIS_EPS: f64 = 1e-7;
/// Polar offset of the two mirrored samples used on the axis.
const AXIS_NUDGE: f64 = 1e-5;

/// (𝓛, 𝓜, 𝒩) of each listed mode at a Cartesian point, in Cartesian
/// components.
///
/// At the origin the radial factors are their limits and the angular part
/// only matters through ∇(r Y_1^m), which is constant, so any direction
/// gives the limit. On the z-axis the fields are averaged over two mirrored
/// points at polar angle `AXIS_NUDGE`; the fields are smooth, so the error is
/// of second order in the offset.
pub fn unit_basis_cartesian(cache: &OrthonormalCache, modes: &[ModeIndex], x: [f64; 3]) -> Result<Vec<[CVec3; 3]>> {
    let p = SphPoint::from_cartesian(x);
    if p.r > 0.0 && p.theta.sin() < AXIS_EPS {
        let theta = if x[2] > 0.0 { AXIS_NUDGE } else { std::f64::consts::PI - AXIS_NUDGE };
        let a = basis_at(cache, modes, &SphPoint::new(p.r, theta, 0.0))?;
        let b = basis_at(cache, modes, &SphPoint::new(p.r, theta, std::f64::consts::PI))?;
        return Ok(a
            .iter()
            .zip(&b)
            .map(|(u, v)| std::array::from_fn(|k| std::array::from_fn(|i| (u[k][i] + v[k][i]) * 0.5)))
            .collect());
    }
    basis_at(cache, modes, &p)
}

fn basis_at(cache: &OrthonormalCache, modes: &[ModeIndex], p: &SphPoint) -> Result<Vec<[CVec3; 3]>> {
    let l_top = modes.iter().map(|m| m.l()).max().unwrap_or(0);
    let radial = cache.unit_radial_row(l_top, p.r)?;
    let frame = p.frame();
    modes
        .iter()
        .map(|mode| {
            let set = HansenSet::new(*mode, p.theta, p.phi)?;
            let vals = unit_values(&set, &radial[mode.l() as usize]);
            Ok(vals.map(|v| v.to_cartesian_unchecked(&frame)))
        })
        .collect()
}

/// Ñ = 𝒩 − c_ℓ 𝓛 at p, in the local frame.
pub fn n_tilde_eval(cache: &OrthonormalCache, mode: ModeIndex, p: &SphPoint) -> Result<SphVec> {
    if mode.l() == 0 {
        return Err(Error::Mode {
            l: 0,
            m: mode.m(),
            reason: "Ñ needs l ≥ 1",
        });
    }
    let dc = cache.degree(mode.l())?;
    let radial = cache.unit_radial_row(mode.l(), p.r)?;
    let set = HansenSet::new(mode, p.theta, p.phi)?;
    let [l, _, n] = unit_values(&set, &radial[mode.l() as usize]);
    Ok(n - l * dc.overlap)
}

/// A 3×3 kernel value in Cartesian components with a heuristic bound on the
/// omitted degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub tensor: SphTensor,
    pub tail_estimate: f64,
}

impl Serialize for KernelValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            tensor: Vec<Vec<crate::domain::ReIm>>,
            tail_estimate: f64,
        }
        Repr {
            tensor: matrix_to_json(&self.tensor.0),
            tail_estimate: self.tail_estimate,
        }
        .serialize(s)
    }
}

fn assemble(weights: &[[f64; 3]; 3], at_x: &[CVec3; 3], at_y: &[CVec3; 3]) -> SphTensor {
    let mut t = SphTensor::ZERO;
    for (i, row) in weights.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            if *w != 0.0 {
                t += SphTensor::outer_conj(&at_y[i], &at_x[j]) * *w;
            }
        }
    }
    t
}

/// Γ_ℓ^m(x, y), the contribution of one mode.
pub fn kernel_mode(cache: &OrthonormalCache, mode: ModeIndex, x: &SphPoint, y: &SphPoint) -> Result<KernelValue> {
    cache.params.ensure_distinct()?;
    let dc = cache.degree(mode.l())?;
    let bx = unit_basis_cartesian(cache, &[mode], x.to_cartesian())?;
    let by = unit_basis_cartesian(cache, &[mode], y.to_cartesian())?;
    Ok(KernelValue {
        tensor: assemble(&dc.kernel_weights(), &bx[0], &by[0]),
        tail_estimate: 0.0,
    })
}

/// Γ(x, y) summed over l ≤ `l_max`. Modes are assembled in parallel and
/// summed in a fixed order.
pub fn kernel_eval(cache: &OrthonormalCache, x: &SphPoint, y: &SphPoint, l_max: u32) -> Result<KernelValue> {
    cache.params.ensure_distinct()?;
    cache.check_degree(l_max)?;
    let modes: Vec<ModeIndex> = ModeIndex::all_up_to(l_max).collect();
    let bx = unit_basis_cartesian(cache, &modes, x.to_cartesian())?;
    let by = unit_basis_cartesian(cache, &modes, y.to_cartesian())?;
    let terms: Vec<SphTensor> = modes
        .par_iter()
        .zip(bx.par_iter().zip(by.par_iter()))
        .map(|(mode, (ux, uy))| assemble(&cache.degrees[mode.l() as usize].kernel_weights(), ux, uy))
        .collect();
    let tensor = terms.iter().fold(SphTensor::ZERO, |acc, t| acc + *t);
    Ok(KernelValue {
        tensor,
        tail_estimate: truncation_tail(&cache.params, l_max, x.r, y.r),
    })
}

/// ln of x^n / (2n+1)!!, the leading behaviour of j_n(x) for x ≪ n.
fn ln_bessel_envelope(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let double_fact: f64 = (1..=n).map(|k| (2.0 * k as f64 + 1.0).ln()).sum();
    (n as f64 * x.ln() - double_fact).min(0.0)
}

/// Heuristic size of the degrees above `l_max` in Γ(x, y).
///
/// Per degree the unit fields are bounded by a few times k·j_{ℓ−1}(kr); the
/// m-sum of squared Hansen harmonics is (2ℓ+1)/4π, and 1/(1 − c²) ≤ 4/3.
/// Summed over the next 60 degrees with the envelope x^n/(2n+1)!! for j_n.
pub fn truncation_tail(params: &ElasticParams, l_max: u32, rx: f64, ry: f64) -> f64 {
    let k = params.k_max();
    let amp = |l: u32, r: f64| 2.0 * (1.0 + k) * ln_bessel_envelope(l - 1, k * r).exp();
    (l_max + 1..=l_max + 60)
        .map(|l| 4.0 * (2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * amp(l, rx) * amp(l, ry))
        .sum()
}

/// z̄ · A z as used in the positivity check z·Γ(x,x)·conj(z).
pub fn quadratic_form(a: &SphTensor, z: &CVec3) -> C64 {
    let mut acc = ZERO;
    for i in 0..3 {
        for j in 0..3 {
            acc += z[i].conj() * a.0[i][j] * z[j];
        }
    }
    acc
}

/// Flags a point too close to the axis for frame-based evaluation.
pub(crate) fn on_axis(p: &SphPoint) -> bool {
    p.theta.sin() < POLE_EPS
}
