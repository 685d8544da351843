use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{truncation_tail, unit_basis_cartesian, CoeffField, OrthonormalCache, eval_cartesian};
use crate::domain::{CVec3, ModeIndex, Pairing, SphPoint, SphTensor, SphVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::hansen::{EigKind, HansenKind, HansenSet};
use crate::inner::{RadialQuadrature, SphereQuadrature, VectorField};

const CHUNK: usize = 256;

/// Hansen values and gradients of every mode up to `l_max` at every sphere
/// node, indexed [node][3 · mode + hansen].
fn hansen_table(l_max: u32, sphere: &SphereQuadrature) -> Result<Vec<Vec<(SphVec, SphTensor)>>> {
    let modes: Vec<ModeIndex> = ModeIndex::all_up_to(l_max).collect();
    sphere
        .nodes()
        .par_iter()
        .map(|n| {
            let mut row = Vec::with_capacity(3 * modes.len());
            for mode in &modes {
                let set = HansenSet::new(*mode, n.theta, n.phi)?;
                for h in HansenKind::ALL {
                    row.push((set.value(h), set.gradient(h)));
                }
            }
            Ok(row)
        })
        .collect()
}

fn basis_of(l_max: u32) -> Vec<(ModeIndex, EigKind)> {
    ModeIndex::all_up_to(l_max)
        .flat_map(|mode| {
            let kinds: &[EigKind] = if mode.l() == 0 { &[EigKind::L] } else { &EigKind::ALL };
            kinds.iter().map(move |k| (mode, *k))
        })
        .collect()
}

fn mode_position(mode: ModeIndex) -> usize {
    let l = mode.l() as usize;
    l * l + (mode.m() + mode.l() as i32) as usize
}

/// ⟨φ_p, φ_q⟩_H over the unit basis (𝓛, 𝓜, 𝒩) of every mode up to `l_max`,
/// assembled from sphere-quadrature Gram matrices of the Hansen harmonics
/// and radial-quadrature products of the radial factors. Nothing here uses
/// the closed forms, so it checks them.
#[derive(Debug, Clone)]
pub struct ExpansionGram {
    l_max: u32,
    basis: Vec<(ModeIndex, EigKind)>,
    matrix: Vec<C64>,
}

impl ExpansionGram {
    pub fn build(
        cache: &OrthonormalCache,
        l_max: u32,
        radial: &RadialQuadrature,
        sphere: &SphereQuadrature,
    ) -> Result<Self> {
        cache.check_degree(l_max)?;
        sphere.check_resolution(l_max)?;
        let table = hansen_table(l_max, sphere)?;
        let nh = table.first().map_or(0, Vec::len);
        let weights: Vec<f64> = sphere.nodes().iter().map(|n| n.weight).collect();

        // Sphere part, S[a][b] = Σ w (H_a·H̄_b + ∇H_a : conj ∇H_b).
        let s: Vec<Vec<C64>> = (0..nh)
            .into_par_iter()
            .map(|a| {
                (0..nh)
                    .map(|b| {
                        table.iter().zip(&weights).fold(ZERO, |acc, (row, w)| {
                            let (va, ga) = &row[a];
                            let (vb, gb) = &row[b];
                            acc + (va.dot_conj(vb) + ga.double_dot(gb, Pairing::Hermitian)) * *w
                        })
                    })
                    .collect()
            })
            .collect();

        // Radial part over the functions f_{l,X,h}, indexed 9 l + 3 X + h.
        let nf = 9 * (l_max as usize + 1);
        let partials: Vec<Vec<f64>> = radial
            .nodes()
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; nf * nf];
                for node in chunk {
                    let row = cache.unit_radial_row(l_max, node.r)?;
                    let f: Vec<f64> = row.iter().flat_map(|per_l| per_l.iter().flatten().copied()).collect();
                    if f.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite { node: node.r });
                    }
                    for (i, fi) in f.iter().enumerate() {
                        if *fi == 0.0 {
                            continue;
                        }
                        let wi = node.weight * fi;
                        for (j, fj) in f.iter().enumerate() {
                            acc[i * nf + j] += wi * fj;
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut rad = vec![0.0; nf * nf];
        for part in &partials {
            for (r, p) in rad.iter_mut().zip(part) {
                *r += p;
            }
        }

        let basis = basis_of(l_max);
        let nb = basis.len();
        let matrix: Vec<C64> = basis
            .par_iter()
            .flat_map_iter(|(mp, xp)| {
                let (rad, s) = (&rad, &s);
                basis.iter().map(move |(mq, xq)| {
                    let (pi, qi) = (mode_position(*mp), mode_position(*mq));
                    let mut acc = ZERO;
                    for hp in 0..3 {
                        for hq in 0..3 {
                            let fi = 9 * mp.l() as usize + 3 * xp.index() + hp;
                            let fj = 9 * mq.l() as usize + 3 * xq.index() + hq;
                            let r = rad[fi * nf + fj];
                            if r != 0.0 {
                                acc += s[3 * pi + hp][3 * qi + hq] * r;
                            }
                        }
                    }
                    acc
                })
            })
            .collect();
        debug_assert_eq!(matrix.len(), nb * nb);
        Ok(Self { l_max, basis, matrix })
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn basis(&self) -> &[(ModeIndex, EigKind)] {
        &self.basis
    }

    /// ⟨φ_p, φ_q⟩_H.
    pub fn get(&self, p: usize, q: usize) -> C64 {
        self.matrix[p * self.basis.len() + q]
    }

    fn position(&self, mode: ModeIndex, kind: EigKind) -> usize {
        let before = if mode.l() == 0 { 0 } else { 1 + 3 * (mode_position(mode) - 1) };
        before + if mode.l() == 0 { 0 } else { kind.index() }
    }

    fn vector(&self, u: &CoeffField) -> Result<Vec<C64>> {
        let mut v = vec![ZERO; self.basis.len()];
        for (mode, abc) in u.modes() {
            if mode.l() > self.l_max {
                return Err(Error::Resolution {
                    required: mode.l() as usize,
                    available: self.l_max as usize,
                });
            }
            for kind in EigKind::ALL {
                if abc[kind.index()] != ZERO {
                    v[self.position(*mode, kind)] = abc[kind.index()];
                }
            }
        }
        Ok(v)
    }

    /// ⟨u, v⟩_H for two coefficient fields.
    pub fn inner(&self, u: &CoeffField, v: &CoeffField) -> Result<C64> {
        let (a, b) = (self.vector(u)?, self.vector(v)?);
        let n = self.basis.len();
        let mut acc = ZERO;
        for (p, ap) in a.iter().enumerate() {
            if *ap == ZERO {
                continue;
            }
            for (q, bq) in b.iter().enumerate() {
                if *bq != ZERO {
                    acc += *ap * bq.conj() * self.matrix[p * n + q];
                }
            }
        }
        Ok(acc)
    }

    /// Largest entrywise deviation from the identity of the Gram matrix of
    /// {𝓛, 𝓜, Ñ/‖Ñ‖}.
    pub fn orthonormal_deviation(&self, cache: &OrthonormalCache) -> Result<f64> {
        let n = self.basis.len();
        // Row p of T expresses orthonormal element p over the unit basis.
        let mut t: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for (p, (mode, kind)) in self.basis.iter().enumerate() {
            let dc = cache.degree(mode.l())?;
            t.push(match kind {
                EigKind::N => {
                    let s = dc.n_tilde_sq.sqrt();
                    vec![(self.position(*mode, EigKind::L), -dc.overlap / s), (p, 1.0 / s)]
                }
                _ => vec![(p, 1.0)],
            });
        }
        let mut worst: f64 = 0.0;
        for (p, tp) in t.iter().enumerate() {
            for (q, tq) in t.iter().enumerate() {
                let mut g = ZERO;
                for (i, wi) in tp {
                    for (j, wj) in tq {
                        g += self.matrix[i * n + j] * (wi * wj);
                    }
                }
                let target = if p == q { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        Ok(worst)
    }
}

/// ⟨u, 𝓛⟩_H, ⟨u, 𝓜⟩_H, ⟨u, 𝒩⟩_H per mode, from which projection coordinates
/// follow.
pub type BasisInner = BTreeMap<ModeIndex, [C64; 3]>;

/// Coordinates over (𝓛, 𝓜, 𝒩) of the projection with the given inner
/// products, through the orthonormal set {𝓛, 𝓜, Ñ/‖Ñ‖}.
fn coordinates(cache: &OrthonormalCache, inner: &BasisInner) -> Result<CoeffField> {
    let mut out = CoeffField::new(*cache.params());
    for (mode, [ul, um, un]) in inner {
        if mode.l() == 0 {
            out.set(*mode, [*ul, ZERO, ZERO])?;
            continue;
        }
        let dc = cache.degree(mode.l())?;
        let c = dc.overlap;
        let tilde = (*un - *ul * c) / dc.n_tilde_sq;
        out.set(*mode, [*ul - tilde * c, *um, tilde])?;
    }
    Ok(out)
}

/// ⟨u, φ⟩_H against every unit basis field of degree ≤ `cache.l_max()`, by
/// full quadrature: sphere projections at every radial node, then the
/// radial rule of the cache.
pub fn basis_inner<U: VectorField>(cache: &OrthonormalCache, u: &U) -> Result<BasisInner> {
    let l_max = cache.l_max();
    let sphere = SphereQuadrature::for_degree(l_max.max(u.degree()));
    let table = hansen_table(l_max, &sphere)?;
    let modes: Vec<ModeIndex> = ModeIndex::all_up_to(l_max).collect();
    let samples: Vec<Vec<[C64; 3]>> = cache
        .radial()
        .nodes()
        .par_iter()
        .map(|node| {
            let mut s = vec![ZERO; 3 * modes.len()];
            for (sn, row) in sphere.nodes().iter().zip(&table) {
                let (uv, ug) = u.value_and_gradient(&SphPoint::new(node.r, sn.theta, sn.phi))?;
                for (acc, (hv, hg)) in s.iter_mut().zip(row) {
                    *acc += (uv.dot_conj(hv) + ug.double_dot(hg, Pairing::Hermitian)) * sn.weight;
                }
            }
            let radial = cache.unit_radial_row(l_max, node.r)?;
            Ok(modes
                .iter()
                .enumerate()
                .map(|(i, mode)| {
                    let f = &radial[mode.l() as usize];
                    std::array::from_fn(|k| (0..3).fold(ZERO, |acc, h| acc + s[3 * i + h] * f[k][h]))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut out = BasisInner::new();
    for (i, mode) in modes.iter().enumerate() {
        let mut vals = [ZERO; 3];
        for (k, v) in vals.iter_mut().enumerate() {
            if mode.l() == 0 && k > 0 {
                continue;
            }
            let column: Vec<C64> = samples.iter().map(|row| row[i][k]).collect();
            *v = cache.radial().integrate_samples(&column)?.value;
        }
        out.insert(*mode, vals);
    }
    Ok(out)
}

/// Orthogonal projection of a field onto the span of the modes up to
/// `cache.l_max()`, returned in (𝓛, 𝓜, 𝒩) coordinates.
pub fn project<U: VectorField>(cache: &OrthonormalCache, u: &U) -> Result<CoeffField> {
    coordinates(cache, &basis_inner(cache, u)?)
}

/// The same projection for a field already in coefficient form, through the
/// cache's numeric Gram matrix.
pub fn project_expansion(cache: &OrthonormalCache, u: &CoeffField) -> Result<CoeffField> {
    let gram = cache.expansion_gram()?;
    let a = gram.vector(u)?;
    let n = gram.basis.len();
    let mut inner = BasisInner::new();
    for (q, (mode, kind)) in gram.basis.iter().enumerate() {
        let v = a.iter().enumerate().fold(ZERO, |acc, (p, ap)| acc + *ap * gram.matrix[p * n + q]);
        inner.entry(*mode).or_insert([ZERO; 3])[kind.index()] = v;
    }
    coordinates(cache, &inner)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReproduceReport {
    /// |u(x)·z̄ − ⟨u, Γ(x,·)z⟩_H|
    pub residual: f64,
    pub u_norm: f64,
    pub truncation: u32,
    /// Set when the support of u reaches past `truncation − 2`; holds the
    /// heuristic kernel tail at (x, x) times |z| ‖u‖_H.
    pub truncation_bound: Option<f64>,
}

/// Coefficients of the kernel section y ↦ Γ(x, y) z over the unit basis.
pub fn kernel_section(cache: &OrthonormalCache, x: [f64; 3], z: &CVec3, l_max: u32) -> Result<CoeffField> {
    cache.check_degree(l_max)?;
    let modes: Vec<ModeIndex> = ModeIndex::all_up_to(l_max).collect();
    let basis = unit_basis_cartesian(cache, &modes, x)?;
    let mut out = CoeffField::new(*cache.params());
    for (mode, phi) in modes.iter().zip(&basis) {
        let w: [C64; 3] = std::array::from_fn(|j| (0..3).fold(ZERO, |acc, k| acc + phi[j][k].conj() * z[k]));
        let k = cache.degree(mode.l())?.kernel_weights();
        let d: [C64; 3] = std::array::from_fn(|i| (0..3).fold(ZERO, |acc, j| acc + w[j] * k[i][j]));
        out.set(*mode, d)?;
    }
    Ok(out)
}

pub fn reproduce_check_with(
    cache: &OrthonormalCache,
    gram: &ExpansionGram,
    u: &CoeffField,
    x: [f64; 3],
    z: &CVec3,
    l_max: u32,
) -> Result<ReproduceReport> {
    if l_max > gram.l_max() {
        return Err(Error::Resolution {
            required: l_max as usize,
            available: gram.l_max() as usize,
        });
    }
    let u_norm = gram.inner(u, u)?.re.max(0.0).sqrt();
    let support = u.max_degree().unwrap_or(0);
    let truncation_bound = if !u.is_empty() && support + 2 > l_max {
        let r = SphPoint::from_cartesian(x).r;
        let zn = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let bound = truncation_tail(cache.params(), l_max, r, r) * zn * u_norm;
        log::warn!("field degree {support} is within 2 of the truncation {l_max}; kernel tail bound {bound:.3e}");
        Some(bound)
    } else {
        None
    };
    let section = kernel_section(cache, x, z, l_max)?;
    let projected = gram.inner(u, &section)?;
    let ux = eval_cartesian(cache, u, x)?;
    let pointwise = (0..3).fold(ZERO, |acc, k| acc + ux[k] * z[k].conj());
    Ok(ReproduceReport {
        residual: (pointwise - projected).norm(),
        u_norm,
        truncation: l_max,
        truncation_bound,
    })
}

/// The reproducing identity u(x)·z̄ = ⟨u, Γ(x,·)z⟩_H at one point, with the
/// inner product from the cache's numeric Gram.
pub fn reproduce_check(
    cache: &OrthonormalCache,
    u: &CoeffField,
    x: [f64; 3],
    z: &CVec3,
    l_max: u32,
) -> Result<ReproduceReport> {
    reproduce_check_with(cache, cache.expansion_gram()?, u, x, z, l_max)
}
