//! Herglotz synthesis from far-field patterns, the compressional/shear split
//! of coefficient fields, and the finite-radius Herglotz functional.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{cvec_dot_conj, cvec_norm, CVec3, ElasticParams, Frame, ModeIndex, ReIm, SphVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::hansen::{HansenKind, HansenSet};
use crate::inner::{gauss_legendre, SphereQuadrature};
use crate::kernel3d::{CoeffField, OrthonormalCache};

/// Allowed size of the wrong-direction part of a grid pattern, relative to
/// the sample at the same node.
pub const DIRECTION_TOL: f64 = 1e-10;

/// Radii of the spheres on which a synthesized field is fitted.
pub const FIT_RADII: [f64; 4] = [0.75, 1.5, 2.25, 3.0];

/// g₁ = Σ gp Y ξ (that is, Σ gp P), g₂ = Σ (g2B B + g2C C).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HarmonicPattern {
    pub gp: BTreeMap<ModeIndex, C64>,
    pub g2b: BTreeMap<ModeIndex, C64>,
    pub g2c: BTreeMap<ModeIndex, C64>,
}

impl HarmonicPattern {
    pub fn max_degree(&self) -> Option<u32> {
        self.gp.keys().chain(self.g2b.keys()).chain(self.g2c.keys()).map(|m| m.l()).max()
    }

    fn check(&self) -> Result<()> {
        for (mode, z) in self.gp.iter().chain(&self.g2b).chain(&self.g2c) {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Invalid(format!("non-finite far-field coefficient at ({}, {})", mode.l(), mode.m())));
            }
        }
        if let Some(mode) = self.g2b.keys().chain(self.g2c.keys()).find(|m| m.l() == 0) {
            return Err(Error::Mode {
                l: 0,
                m: mode.m(),
                reason: "tangential harmonics start at degree 1",
            });
        }
        Ok(())
    }

    /// Cartesian (g₁, g₂) at direction (θ, φ).
    pub fn sample(&self, theta: f64, phi: f64) -> Result<(CVec3, CVec3)> {
        let frame = Frame::new(theta, phi);
        let mut g1 = SphVec::ZERO;
        let mut g2 = SphVec::ZERO;
        let mut modes: Vec<ModeIndex> = self.gp.keys().chain(self.g2b.keys()).chain(self.g2c.keys()).copied().collect();
        modes.sort();
        modes.dedup();
        for mode in modes {
            let set = HansenSet::new(mode, theta, phi)?;
            let get = |m: &BTreeMap<ModeIndex, C64>| m.get(&mode).copied().unwrap_or(ZERO);
            g1 += set.value(HansenKind::P) * get(&self.gp);
            g2 += set.value(HansenKind::B) * get(&self.g2b) + set.value(HansenKind::C) * get(&self.g2c);
        }
        Ok((g1.to_cartesian_unchecked(&frame), g2.to_cartesian_unchecked(&frame)))
    }

    /// Samples on the nodes of `SphereQuadrature::new(n_theta, n_phi)`.
    pub fn to_grid(&self, n_theta: usize, n_phi: usize) -> Result<GridPattern> {
        let q = SphereQuadrature::new(n_theta, n_phi)?;
        let (g1, g2) = q
            .nodes()
            .par_iter()
            .map(|n| self.sample(n.theta, n.phi))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(GridPattern { n_theta, n_phi, g1, g2 })
    }
}

/// Cartesian samples of g₁ and g₂ on a Gauss–Legendre × trapezoid grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPattern {
    pub n_theta: usize,
    pub n_phi: usize,
    pub g1: Vec<CVec3>,
    pub g2: Vec<CVec3>,
}

impl GridPattern {
    pub fn quadrature(&self) -> Result<SphereQuadrature> {
        SphereQuadrature::new(self.n_theta, self.n_phi)
    }

    /// Largest relative wrong-direction part: tangential for g₁, radial for g₂.
    pub fn direction_violation(&self) -> Result<f64> {
        let q = self.quadrature()?;
        if self.g1.len() != q.nodes().len() || self.g2.len() != q.nodes().len() {
            return Err(Error::Invalid(format!(
                "grid pattern has {} / {} samples for {} nodes",
                self.g1.len(),
                self.g2.len(),
                q.nodes().len()
            )));
        }
        let mut worst: f64 = 0.0;
        for ((n, g1), g2) in q.nodes().iter().zip(&self.g1).zip(&self.g2) {
            let xi = Frame::new(n.theta, n.phi).r_hat;
            let xi_c = xi.map(|v| C64::new(v, 0.0));
            let radial1 = cvec_dot_conj(g1, &xi_c);
            let tangential1 = cvec_norm(&std::array::from_fn(|i| g1[i] - radial1 * xi[i]));
            let radial2 = cvec_dot_conj(g2, &xi_c).norm();
            for (bad, size) in [(tangential1, cvec_norm(g1)), (radial2, cvec_norm(g2))] {
                if bad > 0.0 {
                    worst = worst.max(bad / size);
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FarFieldPattern {
    Harmonic(HarmonicPattern),
    Grid(GridPattern),
}

#[derive(Serialize, Deserialize)]
struct HarmonicEntry {
    l: u32,
    m: i32,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "lowercase")]
enum PatternFile {
    Harmonic {
        #[serde(default)]
        gp: Vec<HarmonicEntry>,
        #[serde(default, rename = "g2B")]
        g2b: Vec<HarmonicEntry>,
        #[serde(default, rename = "g2C")]
        g2c: Vec<HarmonicEntry>,
    },
    Grid {
        n_theta: usize,
        n_phi: usize,
        g1: Vec<[ReIm; 3]>,
        g2: Vec<[ReIm; 3]>,
    },
}

fn entries(map: &BTreeMap<ModeIndex, C64>) -> Vec<HarmonicEntry> {
    map.iter()
        .map(|(k, z)| HarmonicEntry {
            l: k.l(),
            m: k.m(),
            re: z.re,
            im: z.im,
        })
        .collect()
}

fn from_entries(list: Vec<HarmonicEntry>) -> Result<BTreeMap<ModeIndex, C64>> {
    let mut out = BTreeMap::new();
    for e in list {
        let mode = ModeIndex::new(e.l, e.m)?;
        if out.insert(mode, C64::new(e.re, e.im)).is_some() {
            return Err(Error::Invalid(format!("duplicate far-field entry ({}, {})", e.l, e.m)));
        }
    }
    Ok(out)
}

impl FarFieldPattern {
    pub fn zero() -> Self {
        Self::Harmonic(HarmonicPattern::default())
    }

    /// Checks the direction invariants (and finiteness).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Harmonic(h) => h.check(),
            Self::Grid(g) => {
                let worst = g.direction_violation()?;
                if !(worst <= DIRECTION_TOL) {
                    return Err(Error::Invalid(format!(
                        "grid pattern violates g1 ∥ ξ / g2 ⊥ ξ: worst relative violation {worst:.3e}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// (‖g₁‖, ‖g₂‖) in L²(S²).
    pub fn l2_norms(&self) -> Result<(f64, f64)> {
        match self {
            Self::Harmonic(h) => {
                let ss = |it: &mut dyn Iterator<Item = &C64>| it.map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                Ok((ss(&mut h.gp.values()), ss(&mut h.g2b.values().chain(h.g2c.values()))))
            }
            Self::Grid(g) => {
                let q = g.quadrature()?;
                let (mut a, mut b) = (0.0, 0.0);
                for ((n, g1), g2) in q.nodes().iter().zip(&g.g1).zip(&g.g2) {
                    a += n.weight * cvec_norm(g1).powi(2);
                    b += n.weight * cvec_norm(g2).powi(2);
                }
                Ok((a.sqrt(), b.sqrt()))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            Self::Harmonic(h) => PatternFile::Harmonic {
                gp: entries(&h.gp),
                g2b: entries(&h.g2b),
                g2c: entries(&h.g2c),
            },
            Self::Grid(g) => PatternFile::Grid {
                n_theta: g.n_theta,
                n_phi: g.n_phi,
                g1: g.g1.iter().map(|v| v.map(ReIm::from)).collect(),
                g2: g.g2.iter().map(|v| v.map(ReIm::from)).collect(),
            },
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Parses and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PatternFile = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        let g = match file {
            PatternFile::Harmonic { gp, g2b, g2c } => Self::Harmonic(HarmonicPattern {
                gp: from_entries(gp)?,
                g2b: from_entries(g2b)?,
                g2c: from_entries(g2c)?,
            }),
            PatternFile::Grid { n_theta, n_phi, g1, g2 } => Self::Grid(GridPattern {
                n_theta,
                n_phi,
                g1: g1.into_iter().map(|v| v.map(C64::from)).collect(),
                g2: g2.into_iter().map(|v| v.map(C64::from)).collect(),
            }),
        };
        g.validate()?;
        Ok(g)
    }
}

/// Polar node count the plane-wave integral needs at distance `r`.
pub fn required_polar_nodes(params: &ElasticParams, r: f64) -> usize {
    (params.k_max() * r).ceil() as usize + 10
}

#[derive(Debug, Clone, Copy)]
struct WeightedSample {
    xi: [f64; 3],
    g1: CVec3,
    g2: CVec3,
}

/// A far-field pattern prepared for evaluation at points with |x| ≤ `radius`.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    params: ElasticParams,
    radius: f64,
    samples: Vec<WeightedSample>,
}

impl Synthesizer {
    pub fn new(g: &FarFieldPattern, params: ElasticParams, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("synthesis radius {radius}")));
        }
        g.validate()?;
        let need = required_polar_nodes(&params, radius);
        let grid = match g {
            FarFieldPattern::Harmonic(h) => {
                let n_theta = need + h.max_degree().unwrap_or(0) as usize;
                h.to_grid(n_theta, 2 * n_theta + 1)?
            }
            FarFieldPattern::Grid(grid) => {
                if grid.n_theta < need {
                    return Err(Error::Resolution {
                        required: need,
                        available: grid.n_theta,
                    });
                }
                if grid.n_phi < 2 * need {
                    return Err(Error::Resolution {
                        required: 2 * need,
                        available: grid.n_phi,
                    });
                }
                grid.clone()
            }
        };
        let q = grid.quadrature()?;
        let samples = q
            .nodes()
            .iter()
            .zip(grid.g1.iter().zip(&grid.g2))
            .map(|(n, (g1, g2))| WeightedSample {
                xi: Frame::new(n.theta, n.phi).r_hat,
                g1: g1.map(|z| z * n.weight),
                g2: g2.map(|z| z * n.weight),
            })
            .collect();
        Ok(Self { params, radius, samples })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, x: [f64; 3]) -> Result<CVec3> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > self.radius * (1.0 + 1e-12) {
            return Err(Error::Resolution {
                required: required_polar_nodes(&self.params, r),
                available: required_polar_nodes(&self.params, self.radius),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the radius guard; finite-difference stencils step
    /// slightly past the prepared radius.
    pub(crate) fn eval_unchecked(&self, x: [f64; 3]) -> CVec3 {
        let (kp, ks) = (self.params.kp(), self.params.ks());
        let mut u = [ZERO; 3];
        for s in &self.samples {
            let t = x[0] * s.xi[0] + x[1] * s.xi[1] + x[2] * s.xi[2];
            let (ep, es) = (C64::from_polar(1.0, kp * t), C64::from_polar(1.0, ks * t));
            for i in 0..3 {
                u[i] += ep * s.g1[i] + es * s.g2[i];
            }
        }
        u
    }

    pub fn eval_many(&self, points: &[[f64; 3]]) -> Result<GridField> {
        let values = points.par_iter().map(|x| self.eval(*x)).collect::<Result<Vec<_>>>()?;
        GridField::new(points.to_vec(), values)
    }
}

/// u(x) by sphere quadrature of the plane-wave superposition.
pub fn herglotz_synthesize(g: &FarFieldPattern, params: ElasticParams, x: [f64; 3]) -> Result<CVec3> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Synthesizer::new(g, params, r)?.eval(x)
}

/// Field values at a list of Cartesian points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    points: Vec<[f64; 3]>,
    values: Vec<CVec3>,
}

impl GridField {
    pub fn new(points: Vec<[f64; 3]>, values: Vec<CVec3>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Invalid(format!("{} points but {} values", points.len(), values.len())));
        }
        Ok(Self { points, values })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn values(&self) -> &[CVec3] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// (u_p, u_s): the a-terms and the (b, c)-terms.
pub fn split_ps(u: &CoeffField) -> (CoeffField, CoeffField) {
    (u.compressional(), u.shear())
}

/// Quadrature on balls: Gauss–Legendre panels in r times a sphere rule.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub sphere: SphereQuadrature,
    pub panel_width: f64,
    pub panel_order: usize,
}

impl BallRule {
    /// Panels short enough for oscillation at wavenumber `k_max`.
    pub fn new(sphere: SphereQuadrature, k_max: f64) -> Self {
        Self {
            sphere,
            panel_width: (PI / (2.0 * k_max)).min(1.0),
            panel_order: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HerglotzSample {
    pub radius: f64,
    pub value: f64,
}

/// (R, (1/R)∫_{|x|<R} |u|² dx) for each R in `radii`.
pub fn herglotz_condition_estimate<F>(u: F, radii: &[f64], rule: &BallRule) -> Result<Vec<HerglotzSample>>
where
    F: Fn([f64; 3]) -> Result<CVec3> + Sync,
{
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Domain(format!("ball radius {r}")));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (gx, gw) = gauss_legendre(rule.panel_order);
    let shell = |a: f64, b: f64| -> Result<f64> {
        let panels = ((b - a) / rule.panel_width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let nodes: Vec<(f64, f64)> = (0..panels)
            .flat_map(|p| {
                let lo = a + p as f64 * h;
                gx.iter().zip(&gw).map(move |(x, w)| (lo + 0.5 * h * (x + 1.0), 0.5 * h * w))
            })
            .collect();
        let parts = nodes
            .par_iter()
            .map(|&(r, w)| {
                let mut s = 0.0;
                for n in rule.sphere.nodes() {
                    let xi = Frame::new(n.theta, n.phi).r_hat;
                    let v = u(xi.map(|c| c * r))?;
                    s += n.weight * cvec_norm(&v).powi(2);
                }
                Ok(w * r * r * s)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum())
    };
    let mut acc = 0.0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(sorted.len());
    for r in sorted {
        if r > prev {
            acc += shell(prev, r)?;
            prev = r;
        }
        out.push(HerglotzSample { radius: r, value: acc / r });
    }
    Ok(out)
}

/// Hansen moments ∫ u·conj(H) dσ of every mode up to `l_max` on the sphere of
/// radius r, indexed [mode][HansenKind::index].
fn sphere_moments(field: &Synthesizer, r: f64, l_max: u32, q: &SphereQuadrature) -> Result<Vec<[C64; 3]>> {
    let modes: Vec<ModeIndex> = ModeIndex::all_up_to(l_max).collect();
    let per_node = q
        .nodes()
        .par_iter()
        .map(|n| {
            let frame = Frame::new(n.theta, n.phi);
            let x = frame.r_hat.map(|c| c * r);
            let u = SphVec::from_cartesian(&field.eval(x)?, &frame);
            modes
                .iter()
                .map(|mode| {
                    let set = HansenSet::new(*mode, n.theta, n.phi)?;
                    Ok(HansenKind::ALL.map(|h| u.dot_conj(&set.value(h)) * n.weight))
                })
                .collect::<Result<Vec<[C64; 3]>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![[ZERO; 3]; modes.len()];
    for node in per_node {
        for (t, v) in total.iter_mut().zip(node) {
            for h in 0..3 {
                t[h] += v[h];
            }
        }
    }
    Ok(total)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_c(a: &[f64], d: &[C64]) -> C64 {
    a.iter().zip(d).map(|(x, y)| y * *x).sum()
}

/// Least squares for d ≈ α·u + β·v with real columns (Gram–Schmidt).
fn fit_two(u: &[f64], v: &[f64], d: &[C64]) -> (C64, C64) {
    let nu = dot(u, u).sqrt();
    if nu == 0.0 {
        return (ZERO, ZERO);
    }
    let q1: Vec<f64> = u.iter().map(|x| x / nu).collect();
    let proj = dot(&q1, v);
    let w: Vec<f64> = v.iter().zip(&q1).map(|(x, q)| x - proj * q).collect();
    let nw = dot(&w, &w).sqrt();
    let beta = if nw > 1e-14 * dot(v, v).sqrt() && nw > 0.0 {
        dot_c(&w, d) / (nw * nw)
    } else {
        ZERO
    };
    let alpha = (dot_c(&q1, d) - beta * proj) / nu;
    (alpha, beta)
}

/// Coefficients of the synthesized field in the orthonormal basis, degrees up
/// to `l_max`. The field is fitted, mode by mode, to its Hansen moments on the
/// spheres `FIT_RADII`; a band-limited pattern synthesizes a field in the span
/// of the basis, so the fit reproduces the projection.
pub fn synthesize_then_project(g: &FarFieldPattern, cache: &OrthonormalCache, l_max: u32) -> Result<CoeffField> {
    let FarFieldPattern::Harmonic(h) = g else {
        return Err(Error::Invalid("projection needs a harmonic far-field pattern".into()));
    };
    if let Some(d) = h.max_degree() {
        if d + 2 > l_max {
            return Err(Error::Resolution {
                required: d as usize + 2,
                available: l_max as usize,
            });
        }
    }
    cache.degree(l_max)?;
    let r_top = FIT_RADII[FIT_RADII.len() - 1];
    let field = Synthesizer::new(g, *cache.params(), r_top)?;
    let q = SphereQuadrature::for_degree(l_max + h.max_degree().unwrap_or(0));
    let mut moments = Vec::with_capacity(FIT_RADII.len());
    let mut rows = Vec::with_capacity(FIT_RADII.len());
    for r in FIT_RADII {
        moments.push(sphere_moments(&field, r, l_max, &q)?);
        rows.push(cache.unit_radial_row(l_max, r)?);
    }
    let (p, b, c) = (HansenKind::P.index(), HansenKind::B.index(), HansenKind::C.index());
    let mut out = CoeffField::new(*cache.params());
    for (idx, mode) in ModeIndex::all_up_to(l_max).enumerate() {
        let l = mode.l() as usize;
        // P and B moments see L and N; C moments see M alone.
        let mut col_l = Vec::new();
        let mut col_n = Vec::new();
        let mut d_pb = Vec::new();
        let mut col_m = Vec::new();
        let mut d_c = Vec::new();
        for (mom, row) in moments.iter().zip(&rows) {
            let [rl, rm, rn] = row[l];
            for hk in [p, b] {
                col_l.push(rl[hk]);
                col_n.push(rn[hk]);
                d_pb.push(mom[idx][hk]);
            }
            col_m.push(rm[c]);
            d_c.push(mom[idx][c]);
        }
        let (a, cn) = fit_two(&col_l, &col_n, &d_pb);
        let mm = dot(&col_m, &col_m);
        let bm = if mm > 0.0 { dot_c(&col_m, &d_c) / mm } else { ZERO };
        if l == 0 {
            out.set(mode, [a, ZERO, ZERO])?;
        } else {
            out.set(mode, [a, bm, cn])?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
