//! Shared value types: elastic parameters, points in spherical coordinates,
//! complex vectors and second-order tensors in the local frame (r̂, θ̂, φ̂).

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Complex vector in Cartesian components.
pub type CVec3 = [C64; 3];

/// Below this value of sin θ the local frame is treated as degenerate.
pub const POLE_EPS: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);

/// Lamé constants, density and frequency of an isotropic medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    lambda: f64,
    mu: f64,
    rho: f64,
    omega: f64,
    kp: f64,
    ks: f64,
    equal_speeds: bool,
}

impl ElasticParams {
    pub fn new(lambda: f64, mu: f64, rho: f64, omega: f64) -> Result<Self> {
        let finite = [lambda, mu, rho, omega].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Param("finiteness of lambda, mu, rho, omega"));
        }
        if mu <= 0.0 {
            return Err(Error::Param("mu > 0"));
        }
        if 2.0 * mu + lambda <= 0.0 {
            return Err(Error::Param("2 mu + lambda > 0"));
        }
        if rho <= 0.0 {
            return Err(Error::Param("rho > 0"));
        }
        if omega <= 0.0 {
            return Err(Error::Param("omega > 0"));
        }
        let kp = (rho * omega * omega / (2.0 * mu + lambda)).sqrt();
        let ks = (rho * omega * omega / mu).sqrt();
        Ok(Self {
            lambda,
            mu,
            rho,
            omega,
            kp,
            ks,
            equal_speeds: lambda + mu == 0.0,
        })
    }

    /// Medium with the given wavenumbers, normalized to mu = rho = 1 and omega = ks.
    pub fn from_wavenumbers(kp: f64, ks: f64) -> Result<Self> {
        if !(kp.is_finite() && kp > 0.0) {
            return Err(Error::Param("kp > 0"));
        }
        if !(ks.is_finite() && ks > 0.0) {
            return Err(Error::Param("ks > 0"));
        }
        let omega = ks;
        let lambda = omega * omega / (kp * kp) - 2.0;
        let mut p = Self::new(lambda, 1.0, 1.0, omega)?;
        // Keep the requested wavenumbers exactly rather than their round-trip.
        p.kp = kp;
        p.ks = ks;
        p.equal_speeds = kp == ks;
        Ok(p)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn kp(&self) -> f64 {
        self.kp
    }
    pub fn ks(&self) -> f64 {
        self.ks
    }
    pub fn equal_speeds(&self) -> bool {
        self.equal_speeds
    }

    pub fn k_min(&self) -> f64 {
        self.kp.min(self.ks)
    }
    pub fn k_max(&self) -> f64 {
        self.kp.max(self.ks)
    }

    pub fn ensure_distinct(&self) -> Result<()> {
        if self.equal_speeds {
            Err(Error::EqualSpeeds)
        } else {
            Ok(())
        }
    }
}

/// Orthonormal frame (r̂, θ̂, φ̂) at a point, as Cartesian vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub r_hat: [f64; 3],
    pub theta_hat: [f64; 3],
    pub phi_hat: [f64; 3],
}

impl Frame {
    pub fn new(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            r_hat: [st * cp, st * sp, ct],
            theta_hat: [ct * cp, ct * sp, -st],
            phi_hat: [-sp, cp, 0.0],
        }
    }

    pub fn axes(&self) -> [[f64; 3]; 3] {
        [self.r_hat, self.theta_hat, self.phi_hat]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphPoint {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Self {
        Self { r, theta, phi }
    }

    /// The origin gets θ = π/2, φ = 0 so that frame-based formulas stay usable.
    pub fn from_cartesian(x: [f64; 3]) -> Self {
        let rho = x[0].hypot(x[1]);
        let r = rho.hypot(x[2]);
        if r == 0.0 {
            return Self::new(0.0, PI / 2.0, 0.0);
        }
        let theta = rho.atan2(x[2]);
        let mut phi = x[1].atan2(x[0]);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        Self::new(r, theta, phi)
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.r * st * cp, self.r * st * sp, self.r * ct]
    }

    pub fn frame(&self) -> Frame {
        Frame::new(self.theta, self.phi)
    }

    pub fn check_interior(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < PI) || self.theta.sin() < POLE_EPS {
            Err(Error::FrameDegenerate { theta: self.theta })
        } else {
            Ok(())
        }
    }
}

/// Complex vector in the local frame (r̂, θ̂, φ̂).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphVec {
    pub r: C64,
    pub theta: C64,
    pub phi: C64,
}

impl SphVec {
    pub const ZERO: SphVec = SphVec {
        r: ZERO,
        theta: ZERO,
        phi: ZERO,
    };

    pub fn new(r: C64, theta: C64, phi: C64) -> Self {
        Self { r, theta, phi }
    }

    pub fn components(&self) -> [C64; 3] {
        [self.r, self.theta, self.phi]
    }

    pub fn from_components(c: [C64; 3]) -> Self {
        Self::new(c[0], c[1], c[2])
    }

    /// u · v̄
    pub fn dot_conj(&self, other: &SphVec) -> C64 {
        self.r * other.r.conj() + self.theta * other.theta.conj() + self.phi * other.phi.conj()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.r.norm_sqr() + self.theta.norm_sqr() + self.phi.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn to_cartesian_unchecked(&self, frame: &Frame) -> CVec3 {
        let mut out = [ZERO; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r * frame.r_hat[i] + self.theta * frame.theta_hat[i] + self.phi * frame.phi_hat[i];
        }
        out
    }

    pub fn from_cartesian(v: &CVec3, frame: &Frame) -> Self {
        let proj = |e: &[f64; 3]| v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
        Self::new(proj(&frame.r_hat), proj(&frame.theta_hat), proj(&frame.phi_hat))
    }
}

/// Express a frame vector in Cartesian components.
pub fn frame_to_cartesian(v: &SphVec, p: &SphPoint) -> Result<CVec3> {
    p.check_interior()?;
    Ok(v.to_cartesian_unchecked(&p.frame()))
}

impl Add for SphVec {
    type Output = SphVec;
    fn add(self, o: SphVec) -> SphVec {
        SphVec::new(self.r + o.r, self.theta + o.theta, self.phi + o.phi)
    }
}

impl AddAssign for SphVec {
    fn add_assign(&mut self, o: SphVec) {
        *self = *self + o;
    }
}

impl Sub for SphVec {
    type Output = SphVec;
    fn sub(self, o: SphVec) -> SphVec {
        SphVec::new(self.r - o.r, self.theta - o.theta, self.phi - o.phi)
    }
}

impl Neg for SphVec {
    type Output = SphVec;
    fn neg(self) -> SphVec {
        SphVec::new(-self.r, -self.theta, -self.phi)
    }
}

impl Mul<C64> for SphVec {
    type Output = SphVec;
    fn mul(self, s: C64) -> SphVec {
        SphVec::new(self.r * s, self.theta * s, self.phi * s)
    }
}

impl Mul<f64> for SphVec {
    type Output = SphVec;
    fn mul(self, s: f64) -> SphVec {
        SphVec::new(self.r * s, self.theta * s, self.phi * s)
    }
}

/// How two tensors are paired in the double inner product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Σ A_ij B_ij
    Bilinear,
    /// Σ A_ij conj(B_ij)
    Hermitian,
}

/// Second-order complex tensor; index 0, 1, 2 stands for r̂, θ̂, φ̂ (or any
/// other orthonormal basis the caller fixes, e.g. Cartesian axes).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SphTensor(pub [[C64; 3]; 3]);

impl SphTensor {
    pub const ZERO: SphTensor = SphTensor([[ZERO; 3]; 3]);

    pub fn identity() -> Self {
        let mut t = Self::ZERO;
        for i in 0..3 {
            t.0[i][i] = C64::new(1.0, 0.0);
        }
        t
    }

    /// a ⊗ b̄ for Cartesian vectors.
    pub fn outer_conj(a: &CVec3, b: &CVec3) -> Self {
        let mut t = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = a[i] * b[j].conj();
            }
        }
        t
    }

    pub fn double_dot(&self, other: &SphTensor, pairing: Pairing) -> C64 {
        let mut acc = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let b = match pairing {
                    Pairing::Bilinear => other.0[i][j],
                    Pairing::Hermitian => other.0[i][j].conj(),
                };
                acc += self.0[i][j] * b;
            }
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.double_dot(self, Pairing::Hermitian).re.max(0.0).sqrt()
    }

    pub fn conj_transpose(&self) -> Self {
        let mut t = Self::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i].conj();
            }
        }
        t
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// A z
    pub fn apply(&self, z: &CVec3) -> CVec3 {
        let mut out = [ZERO; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.0[i][0] * z[0] + self.0[i][1] * z[1] + self.0[i][2] * z[2];
        }
        out
    }

    /// Re-express a frame tensor in Cartesian components: F A Fᵀ.
    pub fn frame_to_cartesian(&self, frame: &Frame) -> Self {
        let axes = frame.axes();
        let mut t = Self::ZERO;
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = ZERO;
                for i in 0..3 {
                    for j in 0..3 {
                        acc += self.0[i][j] * (axes[i][a] * axes[j][b]);
                    }
                }
                t.0[a][b] = acc;
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Σ A_ij conj(B_ij) (`Pairing::Hermitian`) or Σ A_ij B_ij (`Pairing::Bilinear`).
pub fn tensor_double_dot(a: &SphTensor, b: &SphTensor, pairing: Pairing) -> C64 {
    a.double_dot(b, pairing)
}

impl Index<(usize, usize)> for SphTensor {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for SphTensor {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for SphTensor {
    type Output = SphTensor;
    fn add(mut self, o: SphTensor) -> SphTensor {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += o.0[i][j];
            }
        }
        self
    }
}

impl AddAssign for SphTensor {
    fn add_assign(&mut self, o: SphTensor) {
        *self = *self + o;
    }
}

impl Sub for SphTensor {
    type Output = SphTensor;
    fn sub(mut self, o: SphTensor) -> SphTensor {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= o.0[i][j];
            }
        }
        self
    }
}

impl Mul<C64> for SphTensor {
    type Output = SphTensor;
    fn mul(mut self, s: C64) -> SphTensor {
        self.0.iter_mut().flatten().for_each(|z| *z *= s);
        self
    }
}

impl Mul<f64> for SphTensor {
    type Output = SphTensor;
    fn mul(mut self, s: f64) -> SphTensor {
        self.0.iter_mut().flatten().for_each(|z| *z *= s);
        self
    }
}

/// Degree and order of a harmonic, |m| ≤ l.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawMode")]
pub struct ModeIndex {
    l: u32,
    m: i32,
}

impl ModeIndex {
    pub fn new(l: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > l {
            return Err(Error::Mode {
                l,
                m,
                reason: "|m| must not exceed l",
            });
        }
        Ok(Self { l, m })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    /// All modes with l ≤ l_max, ordered by (l, m).
    pub fn all_up_to(l_max: u32) -> impl Iterator<Item = ModeIndex> {
        (0..=l_max).flat_map(|l| (-(l as i32)..=l as i32).map(move |m| ModeIndex { l, m }))
    }
}

#[derive(Deserialize)]
struct RawMode {
    l: u32,
    m: i32,
}

impl TryFrom<RawMode> for ModeIndex {
    type Error = Error;
    fn try_from(raw: RawMode) -> Result<Self> {
        ModeIndex::new(raw.l, raw.m)
    }
}

/// A complex number as the JSON pair `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReIm(pub f64, pub f64);

impl From<C64> for ReIm {
    fn from(z: C64) -> Self {
        ReIm(z.re, z.im)
    }
}

impl From<ReIm> for C64 {
    fn from(p: ReIm) -> Self {
        C64::new(p.0, p.1)
    }
}

/// Matrix of complex entries as nested `[re, im]` pairs.
pub fn matrix_to_json<const N: usize>(m: &[[C64; N]; N]) -> Vec<Vec<ReIm>> {
    m.iter().map(|row| row.iter().map(|z| ReIm::from(*z)).collect()).collect()
}

pub fn cvec_dot_conj(a: &CVec3, b: &CVec3) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}

pub fn cvec_norm(a: &CVec3) -> f64 {
    (a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()).sqrt()
}
