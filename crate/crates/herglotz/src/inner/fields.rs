//! Vector fields with spherical gradients, and the sphere and Hilbert inner
//! products between them.

use rayon::prelude::*;

use super::quadrature::{RadialIntegral, RadialQuadrature, SphereQuadrature};
use crate::domain::{ElasticParams, ModeIndex, Pairing, SphPoint, SphTensor, SphVec, C64, ZERO};
use crate::error::Result;
use crate::hansen::{eig_radial, EigKind, HansenKind, HansenSet};

/// A field on R³ \ {poles} whose ∇_S is available. `degree` bounds the
/// angular degree, which the sphere rule must resolve.
pub trait VectorField: Sync {
    fn degree(&self) -> u32;

    fn value(&self, p: &SphPoint) -> Result<SphVec>;

    fn gradient(&self, p: &SphPoint) -> Result<SphTensor>;

    fn value_and_gradient(&self, p: &SphPoint) -> Result<(SphVec, SphTensor)> {
        Ok((self.value(p)?, self.gradient(p)?))
    }
}

/// A Navier eigenvector L, M or N, unnormalized.
#[derive(Debug, Clone, Copy)]
pub struct EigenField {
    pub kind: EigKind,
    pub mode: ModeIndex,
    pub params: ElasticParams,
}

impl EigenField {
    pub fn new(kind: EigKind, mode: ModeIndex, params: ElasticParams) -> Self {
        Self { kind, mode, params }
    }
}

impl VectorField for EigenField {
    fn degree(&self) -> u32 {
        self.mode.l()
    }

    fn value(&self, p: &SphPoint) -> Result<SphVec> {
        Ok(self.value_and_gradient(p)?.0)
    }

    fn gradient(&self, p: &SphPoint) -> Result<SphTensor> {
        Ok(self.value_and_gradient(p)?.1)
    }

    fn value_and_gradient(&self, p: &SphPoint) -> Result<(SphVec, SphTensor)> {
        let set = HansenSet::new(self.mode, p.theta, p.phi)?;
        let radial = eig_radial(self.kind, self.mode.l(), p.r, &self.params)?;
        let mut v = SphVec::ZERO;
        let mut g = SphTensor::ZERO;
        for h in HansenKind::ALL {
            let c = radial[h.index()];
            if c != 0.0 {
                v += set.value(h) * c;
                g += set.gradient(h) * c;
            }
        }
        Ok((v, g))
    }
}

/// A Hansen harmonic extended to be constant along rays.
#[derive(Debug, Clone, Copy)]
pub struct HansenField {
    pub kind: HansenKind,
    pub mode: ModeIndex,
}

impl VectorField for HansenField {
    fn degree(&self) -> u32 {
        self.mode.l()
    }

    fn value(&self, p: &SphPoint) -> Result<SphVec> {
        Ok(HansenSet::new(self.mode, p.theta, p.phi)?.value(self.kind))
    }

    fn gradient(&self, p: &SphPoint) -> Result<SphTensor> {
        Ok(HansenSet::new(self.mode, p.theta, p.phi)?.gradient(self.kind))
    }

    fn value_and_gradient(&self, p: &SphPoint) -> Result<(SphVec, SphTensor)> {
        let set = HansenSet::new(self.mode, p.theta, p.phi)?;
        Ok((set.value(self.kind), set.gradient(self.kind)))
    }
}

/// A field from a pair of closures.
pub struct FnField<F, G> {
    pub degree: u32,
    pub value: F,
    pub gradient: G,
}

impl<F, G> VectorField for FnField<F, G>
where
    F: Fn(&SphPoint) -> Result<SphVec> + Sync,
    G: Fn(&SphPoint) -> Result<SphTensor> + Sync,
{
    fn degree(&self) -> u32 {
        self.degree
    }

    fn value(&self, p: &SphPoint) -> Result<SphVec> {
        (self.value)(p)
    }

    fn gradient(&self, p: &SphPoint) -> Result<SphTensor> {
        (self.gradient)(p)
    }
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn degree(&self) -> u32 {
        (**self).degree()
    }

    fn value(&self, p: &SphPoint) -> Result<SphVec> {
        (**self).value(p)
    }

    fn gradient(&self, p: &SphPoint) -> Result<SphTensor> {
        (**self).gradient(p)
    }

    fn value_and_gradient(&self, p: &SphPoint) -> Result<(SphVec, SphTensor)> {
        (**self).value_and_gradient(p)
    }
}

/// Sphere integrals of u·v̄ and ∇_S u : conj(∇_S v) at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePair {
    pub values: C64,
    pub gradients: C64,
}

pub fn sphere_pair<U: VectorField, V: VectorField>(
    u: &U,
    v: &V,
    r: f64,
    q: &SphereQuadrature,
) -> Result<SpherePair> {
    q.check_resolution(u.degree().max(v.degree()))?;
    let mut values = ZERO;
    let mut gradients = ZERO;
    for n in q.nodes() {
        let p = SphPoint::new(r, n.theta, n.phi);
        let (uv, ug) = u.value_and_gradient(&p)?;
        let (vv, vg) = v.value_and_gradient(&p)?;
        values += uv.dot_conj(&vv) * n.weight;
        gradients += ug.double_dot(&vg, Pairing::Hermitian) * n.weight;
    }
    Ok(SpherePair { values, gradients })
}

/// ⟨u, v⟩ in L²(S²) on the sphere of radius r.
pub fn sphere_inner<U: VectorField, V: VectorField>(u: &U, v: &V, r: f64, q: &SphereQuadrature) -> Result<C64> {
    q.check_resolution(u.degree().max(v.degree()))?;
    let mut acc = ZERO;
    for n in q.nodes() {
        let p = SphPoint::new(r, n.theta, n.phi);
        acc += u.value(&p)?.dot_conj(&v.value(&p)?) * n.weight;
    }
    Ok(acc)
}

/// ⟨∇_S u, ∇_S v⟩ in L²(S²) on the sphere of radius r.
pub fn sphere_gradient_inner<U: VectorField, V: VectorField>(
    u: &U,
    v: &V,
    r: f64,
    q: &SphereQuadrature,
) -> Result<C64> {
    Ok(sphere_pair(u, v, r, q)?.gradients)
}

/// The Hilbert inner product with its error estimates.
pub fn h_inner_detailed<U: VectorField, V: VectorField>(
    u: &U,
    v: &V,
    q_r: &RadialQuadrature,
    q_s: &SphereQuadrature,
) -> Result<RadialIntegral> {
    q_s.check_resolution(u.degree().max(v.degree()))?;
    let samples: Vec<C64> = q_r
        .nodes()
        .par_iter()
        .map(|n| sphere_pair(u, v, n.r, q_s).map(|s| s.values + s.gradients))
        .collect::<Result<_>>()?;
    q_r.integrate_samples(&samples)
}

/// ⟨u, v⟩_H = ∫_0^∞ [⟨u,v⟩_{S²} + ⟨∇_S u, ∇_S v⟩_{S²}] w(r) dr.
pub fn h_inner<U: VectorField, V: VectorField>(
    u: &U,
    v: &V,
    q_r: &RadialQuadrature,
    q_s: &SphereQuadrature,
) -> Result<C64> {
    Ok(h_inner_detailed(u, v, q_r, q_s)?.value)
}
