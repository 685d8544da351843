//! Hansen harmonics P, B, C; Navier eigenvectors L, M, N in their radial /
//! angular split; and the spherical gradient ∇_S, both in closed form for
//! these fields and as a finite-difference assembly for arbitrary ones.

use serde::{Deserialize, Serialize};

use crate::domain::{ElasticParams, ModeIndex, SphPoint, SphTensor, SphVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::specfun::{assoc_legendre, assoc_legendre_d2, omega_norm, sph_bessel_parts, SphBesselParts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HansenKind {
    P,
    B,
    C,
}

impl HansenKind {
    pub const ALL: [HansenKind; 3] = [HansenKind::P, HansenKind::B, HansenKind::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EigKind {
    L,
    M,
    N,
}

impl EigKind {
    pub const ALL: [EigKind; 3] = [EigKind::L, EigKind::M, EigKind::N];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Values of P, B, C (indexed by `HansenKind::index`) for one mode at one
/// direction, with θ-derivatives of their frame components. B and C are zero
/// for l = 0.
#[derive(Debug, Clone, Copy)]
pub struct HansenSet {
    pub mode: ModeIndex,
    pub theta: f64,
    pub values: [SphVec; 3],
    pub dtheta: [SphVec; 3],
}

impl HansenSet {
    pub fn new(mode: ModeIndex, theta: f64, phi: f64) -> Result<Self> {
        SphPoint::new(1.0, theta, phi).check_interior()?;
        let l = mode.l();
        let m = mode.m();
        let am = m.unsigned_abs();
        let (s, c) = theta.sin_cos();
        let (p, dp) = assoc_legendre(l, am, c)?;
        let ddp = assoc_legendre_d2(l, am, c, p, dp);
        let amp = C64::from_polar(omega_norm(l, m)?.powf(-0.5), m as f64 * phi);
        let im = C64::new(0.0, m as f64);
        let re = |v: f64| C64::new(v, 0.0);

        let pv = SphVec::new(re(p), ZERO, ZERO) * amp;
        let pd = SphVec::new(re(-s * dp), ZERO, ZERO) * amp;
        let (bv, bd, cv, cd) = if l == 0 {
            (SphVec::ZERO, SphVec::ZERO, SphVec::ZERO, SphVec::ZERO)
        } else {
            let scale = amp / ((l * (l + 1)) as f64).sqrt();
            let tang = im * (p / s);
            let cross = -im * (dp + c * p / (s * s));
            let curv = s * s * ddp - c * dp;
            (
                SphVec::new(ZERO, re(-s * dp), tang) * scale,
                SphVec::new(ZERO, re(curv), cross) * scale,
                SphVec::new(ZERO, tang, re(s * dp)) * scale,
                SphVec::new(ZERO, cross, re(-curv)) * scale,
            )
        };
        Ok(Self {
            mode,
            theta,
            values: [pv, bv, cv],
            dtheta: [pd, bd, cd],
        })
    }

    pub fn value(&self, kind: HansenKind) -> SphVec {
        self.values[kind.index()]
    }

    pub fn gradient(&self, kind: HansenKind) -> SphTensor {
        let i = kind.index();
        six_term_gradient(&self.values[i], &self.dtheta[i], self.mode.m(), self.theta)
    }
}

/// The six-term spherical gradient of a field whose φ-dependence is e^{imφ},
/// from its frame components and their θ-derivatives.
pub fn six_term_gradient(u: &SphVec, du_dtheta: &SphVec, m: i32, theta: f64) -> SphTensor {
    let im = C64::new(0.0, m as f64);
    let dphi = SphVec::new(im * u.r, im * u.theta, im * u.phi);
    assemble_gradient(u, du_dtheta, &dphi, theta)
}

/// Rows θ̂ and φ̂ of ∇_S u from the components and their angular derivatives;
/// the r̂ row is zero.
fn assemble_gradient(u: &SphVec, du_dtheta: &SphVec, du_dphi: &SphVec, theta: f64) -> SphTensor {
    let (s, c) = theta.sin_cos();
    let cot = c / s;
    let mut t = SphTensor::ZERO;
    t.0[1][0] = du_dtheta.r - u.theta;
    t.0[1][1] = du_dtheta.theta + u.r;
    t.0[1][2] = du_dtheta.phi;
    t.0[2][0] = du_dphi.r / s - u.phi;
    t.0[2][1] = du_dphi.theta / s - u.phi * cot;
    t.0[2][2] = du_dphi.phi / s + u.r + u.theta * cot;
    t
}

fn require_tangential_degree(kind: HansenKind, mode: ModeIndex) -> Result<()> {
    if kind != HansenKind::P && mode.l() == 0 {
        return Err(Error::Mode {
            l: 0,
            m: mode.m(),
            reason: "B and C harmonics need l >= 1",
        });
    }
    Ok(())
}

/// Hansen harmonic of the given kind at direction (θ, φ).
pub fn hansen(kind: HansenKind, mode: ModeIndex, theta: f64, phi: f64) -> Result<SphVec> {
    require_tangential_degree(kind, mode)?;
    Ok(HansenSet::new(mode, theta, phi)?.value(kind))
}

/// Closed-form ∇_S of a Hansen harmonic.
pub fn hansen_gradient(kind: HansenKind, mode: ModeIndex, theta: f64, phi: f64) -> Result<SphTensor> {
    require_tangential_degree(kind, mode)?;
    Ok(HansenSet::new(mode, theta, phi)?.gradient(kind))
}

/// Radial coefficients multiplying P, B, C in an eigenvector (indexed by
/// `HansenKind::index`).
pub fn eig_radial_from_parts(kind: EigKind, l: u32, k: f64, parts: &SphBesselParts) -> [f64; 3] {
    let ll = (l * (l + 1)) as f64;
    let root = ll.sqrt();
    match kind {
        EigKind::L => [k * parts.dj, root * k * parts.j_over_x, 0.0],
        EigKind::M => [0.0, 0.0, root * parts.j],
        EigKind::N => [ll * k * parts.j_over_x, root * k * (parts.dj + parts.j_over_x), 0.0],
    }
}

pub fn eig_wavenumber(kind: EigKind, params: &ElasticParams) -> f64 {
    match kind {
        EigKind::L => params.kp(),
        EigKind::M | EigKind::N => params.ks(),
    }
}

/// Radial coefficients of the eigenvector of the given kind at radius r.
pub fn eig_radial(kind: EigKind, l: u32, r: f64, params: &ElasticParams) -> Result<[f64; 3]> {
    let k = eig_wavenumber(kind, params);
    let parts = sph_bessel_parts(l, k * r)?;
    Ok(eig_radial_from_parts(kind, l, k, &parts))
}

/// Navier eigenvector L, M or N at a point. M and N vanish identically for l = 0.
pub fn navier_eig(kind: EigKind, mode: ModeIndex, p: &SphPoint, params: &ElasticParams) -> Result<SphVec> {
    let set = HansenSet::new(mode, p.theta, p.phi)?;
    let radial = eig_radial(kind, mode.l(), p.r, params)?;
    Ok(HansenKind::ALL
        .iter()
        .fold(SphVec::ZERO, |acc, h| acc + set.value(*h) * radial[h.index()]))
}

/// ∇_S of a Navier eigenvector: radial factors times Hansen gradients.
pub fn eig_gradient(kind: EigKind, mode: ModeIndex, p: &SphPoint, params: &ElasticParams) -> Result<SphTensor> {
    let set = HansenSet::new(mode, p.theta, p.phi)?;
    let radial = eig_radial(kind, mode.l(), p.r, params)?;
    Ok(HansenKind::ALL
        .iter()
        .fold(SphTensor::ZERO, |acc, h| acc + set.gradient(*h) * radial[h.index()]))
}

/// ∇_S u assembled from centered (fourth-order) angular differences of the
/// frame components of `field`.
pub fn spherical_gradient<F>(field: F, p: &SphPoint, step: f64) -> Result<SphTensor>
where
    F: Fn(&SphPoint) -> Result<SphVec>,
{
    p.check_interior()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    let sin = p.theta.sin();
    if step > 0.1 * sin || step < 1e-8 {
        log::warn!("angular step {step} is poorly conditioned at theta = {}", p.theta);
    }
    if 2.0 * step >= p.theta.min(std::f64::consts::PI - p.theta) {
        return Err(Error::Domain("angular stencil crosses a pole".into()));
    }
    let at = |dt: f64, dp: f64| field(&SphPoint::new(p.r, p.theta + dt, p.phi + dp));
    let stencil = |f2: SphVec, f1: SphVec, b1: SphVec, b2: SphVec| (f1 - b1) * (8.0 / (12.0 * step)) - (f2 - b2) * (1.0 / (12.0 * step));
    let dth = stencil(at(2.0 * step, 0.0)?, at(step, 0.0)?, at(-step, 0.0)?, at(-2.0 * step, 0.0)?);
    let dph = stencil(at(0.0, 2.0 * step)?, at(0.0, step)?, at(0.0, -step)?, at(0.0, -2.0 * step)?);
    let u = field(p)?;
    Ok(assemble_gradient(&u, &dth, &dph, p.theta))
}
