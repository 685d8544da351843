//! The plane: F_{n,k} = J_n(kr) e^{inφ}, the fields e_n ∝ ∇F_{n,kp} and
//! f_n ∝ ∇⊥F_{n,ks}, the angular tensor ∇_φ, the weighted inner product with
//! r dr/⟨r⟩³, and the reproducing kernel built from e_n and f̃_n.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::domain::{matrix_to_json, ElasticParams, ReIm, C64, ZERO};
use crate::error::{Error, Result};
use crate::inner::{RadialIntegral, RadialQuadrature, RadialWeight};
use crate::specfun::bessel_j_int_row;

/// Components along (r̂, φ̂), or Cartesian (x, y), depending on context.
pub type CVec2 = [C64; 2];
/// Index 0 is r̂ (or x), index 1 is φ̂ (or y).
pub type Tensor2 = [[C64; 2]; 2];

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub varphi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, varphi: f64) -> Self {
        Self { r, varphi }
    }

    pub fn from_cartesian(x: [f64; 2]) -> Self {
        let r = x[0].hypot(x[1]);
        let mut varphi = x[1].atan2(x[0]);
        if varphi < 0.0 {
            varphi += 2.0 * PI;
        }
        Self { r, varphi }
    }

    pub fn to_cartesian(&self) -> [f64; 2] {
        let (s, c) = self.varphi.sin_cos();
        [self.r * c, self.r * s]
    }

    /// (r̂, φ̂) as Cartesian vectors.
    pub fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.varphi.sin_cos();
        [[c, s], [-s, c]]
    }
}

pub fn polar_to_cartesian(v: &CVec2, p: &PolarPoint) -> CVec2 {
    let [rh, ph] = p.axes();
    [v[0] * rh[0] + v[1] * ph[0], v[0] * rh[1] + v[1] * ph[1]]
}

pub fn cartesian_to_polar(v: &CVec2, p: &PolarPoint) -> CVec2 {
    let [rh, ph] = p.axes();
    [v[0] * rh[0] + v[1] * rh[1], v[0] * ph[0] + v[1] * ph[1]]
}

pub fn tensor_polar_to_cartesian(t: &Tensor2, p: &PolarPoint) -> Tensor2 {
    let axes = p.axes();
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let mut acc = ZERO;
            for i in 0..2 {
                for j in 0..2 {
                    acc += t[i][j] * (axes[i][a] * axes[j][b]);
                }
            }
            acc
        })
    })
}

/// Σ A_ij conj(B_ij).
pub fn tensor2_double_dot(a: &Tensor2, b: &Tensor2) -> C64 {
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += a[i][j] * b[i][j].conj();
        }
    }
    acc
}

pub fn tensor2_max_abs(t: &Tensor2) -> f64 {
    t.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

fn cvec2_dot_conj(a: &CVec2, b: &CVec2) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj()
}

/// J_n(x), J_n'(x) and J_n(x)/x for every |n| ≤ n_max, from one row.
#[derive(Debug, Clone)]
struct BesselParts2 {
    row: Vec<f64>,
    x: f64,
}

impl BesselParts2 {
    fn new(n_max: u32, x: f64) -> Result<Self> {
        Ok(Self {
            row: bessel_j_int_row(n_max + 1, x)?,
            x,
        })
    }

    fn sign(n: i32) -> f64 {
        if n < 0 && n % 2 != 0 {
            -1.0
        } else {
            1.0
        }
    }

    /// (J_n, J_n', J_n/x) with J_{−n} = (−1)^n J_n.
    fn get(&self, n: i32) -> (f64, f64, f64) {
        let a = n.unsigned_abs() as usize;
        let s = Self::sign(n);
        let j = self.row[a];
        let (dj, over) = if a == 0 {
            (-self.row[1], 0.0)
        } else {
            let below = self.row[a - 1];
            let above = self.row[a + 1];
            let over = if self.x == 0.0 { if a == 1 { 0.5 } else { 0.0 } } else { (below + above) / (2.0 * a as f64) };
            ((below - above) / 2.0, over)
        };
        (s * j, s * dj, s * over)
    }
}

/// F_{n,k}(p) = J_n(kr) e^{inφ}.
pub fn f_scalar(n: i32, k: f64, p: &PolarPoint) -> Result<C64> {
    let (j, _, _) = BesselParts2::new(n.unsigned_abs(), k * p.r)?.get(n);
    Ok(C64::from_polar(j, n as f64 * p.varphi))
}

/// Polar profile (g_r, g_φ) of ∇F_{n,k} = (g_r r̂ + g_φ φ̂) e^{inφ}:
/// g_r = k J_n'(kr), g_φ = i n J_n(kr)/r.
fn grad_profile(n: i32, k: f64, parts: &BesselParts2) -> CVec2 {
    let (_, dj, over) = parts.get(n);
    [C64::new(k * dj, 0.0), I * (n as f64 * k * over)]
}

/// The π/2 rotation r̂ → φ̂, φ̂ → −r̂.
fn rotate(v: CVec2) -> CVec2 {
    [-v[1], v[0]]
}

/// ∇F_{n,k} in polar components (unnormalized).
pub fn grad_f_polar(n: i32, k: f64, p: &PolarPoint) -> Result<CVec2> {
    let parts = BesselParts2::new(n.unsigned_abs(), k * p.r)?;
    let e = C64::from_polar(1.0, n as f64 * p.varphi);
    Ok(grad_profile(n, k, &parts).map(|g| g * e))
}

/// ∇⊥F_{n,k} in polar components (unnormalized).
pub fn grad_perp_f_polar(n: i32, k: f64, p: &PolarPoint) -> Result<CVec2> {
    Ok(rotate(grad_f_polar(n, k, p)?))
}

/// ∇_φ u = (∂_φ u^r − u^φ) φ̂⊗r̂ + (∂_φ u^φ + u^r) φ̂⊗φ̂ from the polar
/// components and their φ-derivatives.
pub fn angular_gradient_2d(u: &CVec2, du_dphi: &CVec2) -> Tensor2 {
    [[ZERO, ZERO], [du_dphi[0] - u[1], du_dphi[1] + u[0]]]
}

/// ∇_φ u with ∂_φ from fourth-order centered differences of the polar
/// components.
pub fn angular_gradient_fd<F>(field: F, p: &PolarPoint, h: f64) -> Result<Tensor2>
where
    F: Fn(&PolarPoint) -> Result<CVec2>,
{
    let at = |d: f64| field(&PolarPoint::new(p.r, p.varphi + d));
    let (m2, m1, p1, p2) = (at(-2.0 * h)?, at(-h)?, at(h)?, at(2.0 * h)?);
    let d: CVec2 = std::array::from_fn(|i| (m2[i] - m1[i] * 8.0 + p1[i] * 8.0 - p2[i]) / (12.0 * h));
    Ok(angular_gradient_2d(&field(p)?, &d))
}

/// ∇_φ of (g_r r̂ + g_φ φ̂) e^{inφ}, dropping the common phase.
fn profile_angular_gradient(n: i32, g: &CVec2) -> Tensor2 {
    let inn = I * n as f64;
    angular_gradient_2d(g, &[inn * g[0], inn * g[1]])
}

/// Integrand of the H-inner product of two profiles over one circle,
/// without the common 2π.
fn profile_pair(n: i32, g: &CVec2, m: i32, h: &CVec2) -> C64 {
    cvec2_dot_conj(g, h) + tensor2_double_dot(&profile_angular_gradient(n, g), &profile_angular_gradient(m, h))
}

/// A plane field whose polar components and ∇_φ are available. `order`
/// bounds |n| in its angular content.
pub trait PlaneField: Sync {
    fn order(&self) -> u32;

    /// Polar components and ∇_φ at p.
    fn value_and_gradient(&self, p: &PolarPoint) -> Result<(CVec2, Tensor2)>;
}

/// Uniform angular nodes, exact for e^{idφ} with |d| < n_phi.
pub fn angular_nodes(n_phi: usize) -> Vec<f64> {
    (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect()
}

/// ⟨u, v⟩_H on the plane: uniform angular sums at every radial node of a
/// plane-weighted radial rule.
pub fn h_inner_2d<U: PlaneField, V: PlaneField>(
    u: &U,
    v: &V,
    radial: &RadialQuadrature,
    n_phi: usize,
) -> Result<RadialIntegral> {
    if radial.weight() != RadialWeight::Plane {
        return Err(Error::Invalid("plane inner products need the plane weight".into()));
    }
    let need = (u.order() + v.order()) as usize + 1;
    if n_phi < need {
        return Err(Error::Resolution {
            required: need,
            available: n_phi,
        });
    }
    let phis = angular_nodes(n_phi);
    let w = 2.0 * PI / n_phi as f64;
    let samples: Vec<C64> = radial
        .nodes()
        .par_iter()
        .map(|node| {
            let mut acc = ZERO;
            for phi in &phis {
                let p = PolarPoint::new(node.r, *phi);
                let (uv, ug) = u.value_and_gradient(&p)?;
                let (vv, vg) = v.value_and_gradient(&p)?;
                acc += cvec2_dot_conj(&uv, &vv) + tensor2_double_dot(&ug, &vg);
            }
            Ok(acc * w)
        })
        .collect::<Result<_>>()?;
    radial.integrate_samples(&samples)
}

/// Norms and the f–e overlap for one order n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order2D {
    pub n: i32,
    /// ‖∇F_{n,kp}‖_H
    pub norm_e: f64,
    /// ‖∇⊥F_{n,ks}‖_H
    pub norm_f: f64,
    /// ⟨f_n, e_n⟩_H
    pub overlap: C64,
    /// ‖f̃_n‖²_H = 1 − |⟨f_n, e_n⟩|²
    pub f_tilde_sq: f64,
}

impl Order2D {
    /// K with Γ_n(x, y) = Σ K_ij φ_i(y) ⊗ conj φ_j(x) over φ = (e_n, f_n).
    pub fn kernel_weights(&self) -> [[C64; 2]; 2] {
        let inv = 1.0 / self.f_tilde_sq;
        let c = self.overlap;
        [[C64::new(inv, 0.0), -c * inv], [-c.conj() * inv, C64::new(inv, 0.0)]]
    }
}

/// Orthonormalization data for |n| ≤ n_max on one plane-weighted radial rule.
#[derive(Debug, Clone)]
pub struct Cache2D {
    params: ElasticParams,
    n_max: u32,
    radial: RadialQuadrature,
    orders: Vec<Order2D>,
}

const CHUNK: usize = 512;

pub fn build_cache_2d(params: ElasticParams, n_max: u32) -> Result<Cache2D> {
    params.ensure_distinct()?;
    let radial = RadialQuadrature::for_wavenumbers(n_max, params.k_min(), params.k_max(), RadialWeight::Plane)?;
    let (kp, ks) = (params.kp(), params.ks());
    let orders: Vec<i32> = (-(n_max as i32)..=n_max as i32).collect();
    // Per order: ⟨∇F_p, ∇F_p⟩, ⟨∇⊥F_s, ∇⊥F_s⟩, ⟨∇⊥F_s, ∇F_p⟩ over one circle.
    let partials: Vec<Vec<[C64; 3]>> = radial
        .nodes()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![[ZERO; 3]; orders.len()];
            for node in chunk {
                let bp = BesselParts2::new(n_max, kp * node.r)?;
                let bs = BesselParts2::new(n_max, ks * node.r)?;
                for (a, n) in acc.iter_mut().zip(&orders) {
                    let e = grad_profile(*n, kp, &bp);
                    let f = rotate(grad_profile(*n, ks, &bs));
                    let vals = [profile_pair(*n, &e, *n, &e), profile_pair(*n, &f, *n, &f), profile_pair(*n, &f, *n, &e)];
                    if vals.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                        return Err(Error::NonFinite { node: node.r });
                    }
                    for (t, v) in a.iter_mut().zip(vals) {
                        *t += v * node.weight;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![[ZERO; 3]; orders.len()];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            for k in 0..3 {
                t[k] += p[k];
            }
        }
    }
    let orders = orders
        .iter()
        .zip(total)
        .map(|(n, [ee, ff, fe])| {
            let norm_e = (2.0 * PI * ee.re).sqrt();
            let norm_f = (2.0 * PI * ff.re).sqrt();
            let overlap = fe * (2.0 * PI) / (norm_e * norm_f);
            let f_tilde_sq = 1.0 - overlap.norm_sqr();
            if !(f_tilde_sq > 0.0 && f_tilde_sq <= 1.0) {
                return Err(Error::Invalid(format!("‖f̃‖² = {f_tilde_sq} at n = {n}")));
            }
            Ok(Order2D {
                n: *n,
                norm_e,
                norm_f,
                overlap,
                f_tilde_sq,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Cache2D {
        params,
        n_max,
        radial,
        orders,
    })
}

impl Cache2D {
    pub fn params(&self) -> &ElasticParams {
        &self.params
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn radial(&self) -> &RadialQuadrature {
        &self.radial
    }

    pub fn orders(&self) -> &[Order2D] {
        &self.orders
    }

    pub fn order(&self, n: i32) -> Result<&Order2D> {
        if n.unsigned_abs() > self.n_max {
            return Err(Error::Resolution {
                required: n.unsigned_abs() as usize,
                available: self.n_max as usize,
            });
        }
        Ok(&self.orders[(n + self.n_max as i32) as usize])
    }

    /// Polar profiles of (e_n, f_n) for |n| ≤ top at radius r.
    fn unit_profiles(&self, top: u32, r: f64) -> Result<Vec<(i32, [CVec2; 2])>> {
        self.order(top as i32)?;
        let bp = BesselParts2::new(top, self.params.kp() * r)?;
        let bs = BesselParts2::new(top, self.params.ks() * r)?;
        (-(top as i32)..=top as i32)
            .map(|n| {
                let o = self.order(n)?;
                let e = grad_profile(n, self.params.kp(), &bp).map(|g| g / o.norm_e);
                let f = rotate(grad_profile(n, self.params.ks(), &bs)).map(|g| g / o.norm_f);
                Ok((n, [e, f]))
            })
            .collect()
    }
}

/// (e_n, f_n) at p in Cartesian components. At the origin only |n| = 1
/// survives, and ∇(x ± iy) is constant, so the φ = 0 frame gives the limit.
pub fn basis_2d(cache: &Cache2D, n: i32, p: &PolarPoint) -> Result<(CVec2, CVec2)> {
    let profiles = cache.unit_profiles(n.unsigned_abs(), p.r)?;
    let [e, f] = profiles[(n + n.unsigned_abs() as i32) as usize].1;
    let phase = C64::from_polar(1.0, n as f64 * p.varphi);
    Ok((
        polar_to_cartesian(&e.map(|g| g * phase), p),
        polar_to_cartesian(&f.map(|g| g * phase), p),
    ))
}

/// Σ a_n e_n + b_n f_n over finitely many orders.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField2D {
    params: ElasticParams,
    modes: BTreeMap<i32, [C64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct OrderEntry {
    n: i32,
    a: ReIm,
    #[serde(default = "zero_pair")]
    b: ReIm,
}

fn zero_pair() -> ReIm {
    ReIm(0.0, 0.0)
}

#[derive(Serialize, Deserialize)]
struct CoeffFile2D {
    modes: Vec<OrderEntry>,
}

impl CoeffField2D {
    pub fn new(params: ElasticParams) -> Self {
        Self {
            params,
            modes: BTreeMap::new(),
        }
    }

    pub fn from_modes(params: ElasticParams, modes: impl IntoIterator<Item = (i32, [C64; 2])>) -> Result<Self> {
        let mut f = Self::new(params);
        for (n, ab) in modes {
            f.set(n, ab)?;
        }
        Ok(f)
    }

    pub fn set(&mut self, n: i32, ab: [C64; 2]) -> Result<()> {
        if ab.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Invalid(format!("non-finite coefficient at n = {n}")));
        }
        self.modes.insert(n, ab);
        Ok(())
    }

    pub fn get(&self, n: i32) -> [C64; 2] {
        self.modes.get(&n).copied().unwrap_or([ZERO; 2])
    }

    pub fn params(&self) -> &ElasticParams {
        &self.params
    }

    pub fn modes(&self) -> impl Iterator<Item = (&i32, &[C64; 2])> {
        self.modes.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn max_order(&self) -> u32 {
        self.modes.keys().map(|n| n.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn max_abs_diff(&self, other: &CoeffField2D) -> f64 {
        self.modes
            .keys()
            .chain(other.modes.keys())
            .flat_map(|n| {
                let (x, y) = (self.get(*n), other.get(*n));
                (0..2).map(move |k| (x[k] - y[k]).norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CoeffFile2D {
            modes: self
                .modes
                .iter()
                .map(|(n, [a, b])| OrderEntry {
                    n: *n,
                    a: (*a).into(),
                    b: (*b).into(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Reads `{"modes": [{"n", "a": [re, im], "b": [re, im]}]}`.
    pub fn from_json(params: ElasticParams, text: &str) -> Result<Self> {
        let file: CoeffFile2D = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        Self::from_modes(params, file.modes.into_iter().map(|e| (e.n, [e.a.into(), e.b.into()])))
    }
}

/// A coefficient field with its ∇_φ, for quadrature.
pub struct ExpansionField2D<'a> {
    cache: &'a Cache2D,
    coeffs: &'a CoeffField2D,
}

impl<'a> ExpansionField2D<'a> {
    pub fn new(cache: &'a Cache2D, coeffs: &'a CoeffField2D) -> Result<Self> {
        cache.order(coeffs.max_order() as i32)?;
        Ok(Self { cache, coeffs })
    }
}

impl PlaneField for ExpansionField2D<'_> {
    fn order(&self) -> u32 {
        self.coeffs.max_order()
    }

    fn value_and_gradient(&self, p: &PolarPoint) -> Result<(CVec2, Tensor2)> {
        let top = self.coeffs.max_order();
        let profiles = self.cache.unit_profiles(top, p.r)?;
        let mut v = [ZERO; 2];
        let mut g = [[ZERO; 2]; 2];
        for (n, ab) in self.coeffs.modes() {
            let [e, f] = profiles[(n + top as i32) as usize].1;
            let phase = C64::from_polar(1.0, *n as f64 * p.varphi);
            let prof: CVec2 = std::array::from_fn(|i| (e[i] * ab[0] + f[i] * ab[1]) * phase);
            let grad = profile_angular_gradient(*n, &prof);
            for i in 0..2 {
                v[i] += prof[i];
                for j in 0..2 {
                    g[i][j] += grad[i][j];
                }
            }
        }
        Ok((v, g))
    }
}

/// u(x) in Cartesian components.
pub fn eval_2d(cache: &Cache2D, u: &CoeffField2D, x: [f64; 2]) -> Result<CVec2> {
    let p = PolarPoint::from_cartesian(x);
    let (v, _) = ExpansionField2D::new(cache, u)?.value_and_gradient(&p)?;
    Ok(polar_to_cartesian(&v, &p))
}

/// 2×2 kernel value in Cartesian components with a heuristic tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel2D {
    pub tensor: Tensor2,
    pub tail_estimate: f64,
}

impl Serialize for Kernel2D {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            tensor: Vec<Vec<ReIm>>,
            tail_estimate: f64,
        }
        Repr {
            tensor: matrix_to_json(&self.tensor),
            tail_estimate: self.tail_estimate,
        }
        .serialize(s)
    }
}

/// Cartesian (e_n, f_n) for every |n| ≤ top at p.
fn basis_row(cache: &Cache2D, top: u32, p: &PolarPoint) -> Result<Vec<(i32, [CVec2; 2])>> {
    Ok(cache
        .unit_profiles(top, p.r)?
        .into_iter()
        .map(|(n, [e, f])| {
            let phase = C64::from_polar(1.0, n as f64 * p.varphi);
            (
                n,
                [
                    polar_to_cartesian(&e.map(|g| g * phase), p),
                    polar_to_cartesian(&f.map(|g| g * phase), p),
                ],
            )
        })
        .collect())
}

/// Γ(x, y) summed over |n| ≤ n_max.
pub fn kernel_2d(cache: &Cache2D, x: &PolarPoint, y: &PolarPoint, n_max: u32) -> Result<Kernel2D> {
    cache.params.ensure_distinct()?;
    let bx = basis_row(cache, n_max, x)?;
    let by = basis_row(cache, n_max, y)?;
    let terms: Vec<Tensor2> = bx
        .par_iter()
        .zip(by.par_iter())
        .map(|((n, ux), (_, uy))| {
            let k = cache.orders[(n + cache.n_max as i32) as usize].kernel_weights();
            let mut t = [[ZERO; 2]; 2];
            for (i, row) in k.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    for a in 0..2 {
                        for b in 0..2 {
                            t[a][b] += *w * uy[i][a] * ux[j][b].conj();
                        }
                    }
                }
            }
            t
        })
        .collect();
    let mut tensor = [[ZERO; 2]; 2];
    for t in &terms {
        for a in 0..2 {
            for b in 0..2 {
                tensor[a][b] += t[a][b];
            }
        }
    }
    Ok(Kernel2D {
        tensor,
        tail_estimate: truncation_tail_2d(&cache.params, n_max, x.r, y.r),
    })
}

/// Heuristic size of the orders beyond n_max, from J_n(x) ≤ (x/2)^n / n!
/// with the same bookkeeping as in three dimensions.
pub fn truncation_tail_2d(params: &ElasticParams, n_max: u32, rx: f64, ry: f64) -> f64 {
    let k = params.k_max();
    let ln_env = |n: u32, x: f64| -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let fact: f64 = (1..=n).map(|j| (j as f64).ln()).sum();
        (n as f64 * (x / 2.0).ln() - fact).min(0.0)
    };
    let amp = |n: u32, r: f64| 2.0 * (1.0 + k) * ln_env(n - 1, k * r).exp();
    // Both signs of n.
    (n_max + 1..=n_max + 60).map(|n| 2.0 * 4.0 * amp(n, rx) * amp(n, ry)).sum()
}

/// Coefficients of y ↦ Γ(x, y) z over (e_n, f_n).
pub fn kernel_section_2d(cache: &Cache2D, x: &PolarPoint, z: &CVec2, n_max: u32) -> Result<CoeffField2D> {
    let bx = basis_row(cache, n_max, x)?;
    let mut out = CoeffField2D::new(cache.params);
    for (n, phi) in &bx {
        let w: [C64; 2] = std::array::from_fn(|j| phi[j][0].conj() * z[0] + phi[j][1].conj() * z[1]);
        let k = cache.order(*n)?.kernel_weights();
        out.set(*n, std::array::from_fn(|i| k[i][0] * w[0] + k[i][1] * w[1]))?;
    }
    Ok(out)
}

/// ⟨u, v⟩_H for each v, on the same uniform angular grid as `h_inner_2d`
/// but with the angular sums factored out: the profiles depend on r only,
/// so each radial node needs one Bessel evaluation instead of one per angle.
pub fn expansion_inner_2d<const K: usize>(
    cache: &Cache2D,
    u: &CoeffField2D,
    vs: &[&CoeffField2D; K],
    n_phi: usize,
) -> Result<[C64; K]> {
    let top = vs.iter().map(|v| v.max_order()).fold(u.max_order(), u32::max);
    cache.order(top as i32)?;
    let need = 2 * top as usize + 1;
    if n_phi < need {
        return Err(Error::Resolution {
            required: need,
            available: n_phi,
        });
    }
    let spread = 2 * top as i32;
    let w_phi = 2.0 * PI / n_phi as f64;
    let angular: Vec<C64> = (-spread..=spread)
        .map(|d| angular_nodes(n_phi).iter().fold(ZERO, |acc, p| acc + C64::from_polar(w_phi, d as f64 * p)))
        .collect();
    let combine = |prof: &[(i32, [CVec2; 2])], c: &CoeffField2D| -> Vec<(i32, CVec2)> {
        c.modes()
            .map(|(n, ab)| {
                let [e, f] = prof[(n + top as i32) as usize].1;
                (*n, std::array::from_fn(|i| e[i] * ab[0] + f[i] * ab[1]))
            })
            .collect()
    };
    let partials: Vec<[C64; K]> = cache
        .radial
        .nodes()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = [ZERO; K];
            for node in chunk {
                let prof = cache.unit_profiles(top, node.r)?;
                let pu = combine(&prof, u);
                for (a, v) in acc.iter_mut().zip(vs) {
                    for (m, gv) in combine(&prof, v) {
                        for (n, gu) in &pu {
                            *a += profile_pair(*n, gu, m, &gv) * angular[(n - m + spread) as usize] * node.weight;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [ZERO; K];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reproduce2D {
    pub residual: f64,
    pub u_norm: f64,
}

/// |u(x)·z̄ − ⟨u, Γ(x,·)z⟩_H| with the inner product by plane quadrature.
pub fn reproduce_check_2d(
    cache: &Cache2D,
    u: &CoeffField2D,
    x: &PolarPoint,
    z: &CVec2,
    n_max: u32,
) -> Result<Reproduce2D> {
    let section = kernel_section_2d(cache, x, z, n_max)?;
    let n_phi = 2 * n_max.max(u.max_order()) as usize + 5;
    let [projected, uu] = expansion_inner_2d(cache, u, &[&section, u], n_phi)?;
    let u_norm = uu.re.max(0.0).sqrt();
    let ux = eval_2d(cache, u, x.to_cartesian())?;
    let pointwise = ux[0] * z[0].conj() + ux[1] * z[1].conj();
    Ok(Reproduce2D {
        residual: (pointwise - projected).norm(),
        u_norm,
    })
}

/// Largest deviation from the identity of the Gram matrix of
/// {e_n, f̃_n/‖f̃_n‖} over |n| ≤ top, with every entry by quadrature.
pub fn orthonormal_deviation_2d(cache: &Cache2D, top: u32) -> Result<f64> {
    cache.order(top as i32)?;
    let n_phi = 2 * top as usize + 5;
    let phis = angular_nodes(n_phi);
    let w_phi = 2.0 * PI / n_phi as f64;
    let orders: Vec<i32> = (-(top as i32)..=top as i32).collect();
    let count = 2 * orders.len();
    // Angular sums Σ w e^{i d φ} for every order difference.
    let spread = 2 * top as i32;
    let angular: Vec<C64> = (-spread..=spread)
        .map(|d| phis.iter().fold(ZERO, |acc, p| acc + C64::from_polar(w_phi, d as f64 * p)))
        .collect();
    let partials: Vec<Vec<C64>> = cache
        .radial
        .nodes()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![ZERO; count * count];
            for node in chunk {
                let prof = cache.unit_profiles(top, node.r)?;
                for (a, (n, pa)) in prof.iter().enumerate() {
                    for (b, (m, pb)) in prof.iter().enumerate() {
                        let ang = angular[(n - m + spread) as usize];
                        for x in 0..2 {
                            for y in 0..2 {
                                let v = profile_pair(*n, &pa[x], *m, &pb[y]) * ang * node.weight;
                                acc[(2 * a + x) * count + 2 * b + y] += v;
                            }
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut g = vec![ZERO; count * count];
    for part in &partials {
        for (t, p) in g.iter_mut().zip(part) {
            *t += p;
        }
    }
    // Rows of T: e_n, then f̃_n/‖f̃_n‖ = (f_n − c e_n)/s.
    let t: Vec<Vec<(usize, C64)>> = orders
        .iter()
        .enumerate()
        .flat_map(|(a, n)| {
            let o = cache.orders[(n + cache.n_max as i32) as usize];
            let s = o.f_tilde_sq.sqrt();
            [vec![(2 * a, C64::new(1.0, 0.0))], vec![(2 * a + 1, C64::new(1.0 / s, 0.0)), (2 * a, -o.overlap / s)]]
        })
        .collect();
    let mut worst: f64 = 0.0;
    for (p, tp) in t.iter().enumerate() {
        for (q, tq) in t.iter().enumerate() {
            let mut v = ZERO;
            for (i, wi) in tp {
                for (j, wj) in tq {
                    v += g[i * count + j] * *wi * wj.conj();
                }
            }
            let target = if p == q { 1.0 } else { 0.0 };
            worst = worst.max((v - target).norm());
        }
    }
    Ok(worst)
}
