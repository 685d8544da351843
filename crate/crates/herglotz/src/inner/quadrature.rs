//! Quadrature rules: Gauss–Legendre × trapezoid on the sphere, and panelled
//! Gauss–Kronrod on the half line with a modelled algebraic tail.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::domain::{C64, ZERO};
use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1], nodes
/// ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

// G7/K15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 Kronrod nodes on [a, b] as (x, kronrod weight, embedded gauss weight).
pub fn gk15_panel(a: f64, b: f64) -> [(f64, f64, f64); 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = [(0.0, 0.0, 0.0); 15];
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        out[2 * i] = (c - h * XGK[i], h * WGK[i], h * wg);
        out[2 * i + 1] = (c + h * XGK[i], h * WGK[i], h * wg);
    }
    out[14] = (c, h * WGK[7], h * WG[3]);
    out
}

/// Integral of a smooth function over [a, b] with `panels` equal GK15 panels.
pub fn gk15_integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, panels: usize) -> C64 {
    let h = (b - a) / panels as f64;
    let mut acc = ZERO;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w, _) in gk15_panel(lo, lo + h) {
            acc += f(x) * w;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub theta: f64,
    pub phi: f64,
    pub weight: f64,
}

/// Gauss–Legendre in cos θ times the trapezoid rule in φ. With `n_theta`
/// nodes in θ and `n_phi` in φ, products of harmonics are integrated exactly
/// up to polar degree 2·n_theta − 1 and azimuthal order n_phi − 1.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    n_theta: usize,
    n_phi: usize,
    nodes: Vec<SphereNode>,
}

/// Nodes closer than this to a pole are refused; the spherical frame is
/// singular there.
const POLE_GUARD: f64 = 1e-3;

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::Resolution { required: 1, available: 0 });
        }
        let (x, w) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let theta = xi.acos();
            if !(POLE_GUARD..=PI - POLE_GUARD).contains(&theta) {
                return Err(Error::Domain(format!(
                    "{n_theta} polar nodes put a node within {POLE_GUARD} of a pole"
                )));
            }
            for j in 0..n_phi {
                nodes.push(SphereNode {
                    theta,
                    phi: j as f64 * dphi,
                    weight: wi * dphi,
                });
            }
        }
        Ok(Self { n_theta, n_phi, nodes })
    }

    /// The default rule for fields of degree at most `l_max`.
    pub fn for_degree(l_max: u32) -> Self {
        let l = l_max as usize;
        Self::new(l + 4, 2 * l + 5).expect("default sphere rule is valid")
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn nodes(&self) -> &[SphereNode] {
        &self.nodes
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    /// Refuses pairs of fields whose degrees the rule cannot resolve. Vector
    /// components and their gradients carry one extra sin/cos factor beyond
    /// the harmonic degree, hence the margin.
    pub fn check_resolution(&self, max_degree: u32) -> Result<()> {
        let d = max_degree as usize;
        if self.n_theta < d + 2 {
            return Err(Error::Resolution {
                required: d + 2,
                available: self.n_theta,
            });
        }
        if self.n_phi < 2 * d + 2 {
            return Err(Error::Resolution {
                required: 2 * d + 2,
                available: self.n_phi,
            });
        }
        Ok(())
    }
}

/// Radial weight of the Hilbert inner product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RadialWeight {
    /// r²/⟨r⟩³, the 3D volume element against ⟨x⟩⁻³.
    Volume,
    /// r/⟨r⟩³ for the plane.
    Plane,
}

impl RadialWeight {
    pub fn eval(self, r: f64) -> f64 {
        let bracket = (1.0 + r * r).powf(1.5);
        match self {
            RadialWeight::Volume => r * r / bracket,
            RadialWeight::Plane => r / bracket,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialNode {
    pub r: f64,
    /// Kronrod weight, including the radial weight function and the tail
    /// extrapolation factor.
    pub weight: f64,
    /// Embedded Gauss weight on the same footing, zero at Kronrod-only nodes.
    pub gauss_weight: f64,
}

/// GK15 panels on [0, 3 r_max]. Past r_max the integrand is taken to be an
/// oscillating part plus a smooth part expanding in r⁻³, r⁻⁵, … (every
/// Bessel product against either weight has this form). Nodes in
/// [r_max, 3 r_max] carry a taper W that is 1 at r_max, 0 at 3 r_max and flat
/// to all orders at both ends, plus two bumps fitted so that the rule
/// reproduces ∫_{r_max}^∞ r^{-p} dr for p = 3, 5. The smooth taper makes the
/// oscillating remainder vanish faster than any power of r_max.
#[derive(Debug, Clone)]
pub struct RadialQuadrature {
    r_max: f64,
    panel_width: f64,
    weight: RadialWeight,
    nodes: Vec<RadialNode>,
    tail_start: usize,
}

fn flat(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth step from 1 at t = 0 to 0 at t = 1.
fn taper(t: f64) -> f64 {
    let (a, b) = (flat(t), flat(1.0 - t));
    b / (a + b)
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (t * (1.0 - t))).exp()
    }
}

const TAIL_MOMENTS: [i32; 2] = [3, 5];
const TAIL_SPAN: usize = 2;

impl RadialQuadrature {
    pub fn new(r_max: f64, panel_width: f64, weight: RadialWeight) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0 && panel_width > 0.0 && panel_width <= r_max) {
            return Err(Error::Domain(format!(
                "radial rule needs 0 < panel width <= r_max, got {panel_width} and {r_max}"
            )));
        }
        let panels = (r_max / panel_width).ceil() as usize;
        let h = r_max / panels as f64;
        let span = TAIL_SPAN as f64 * r_max;
        let panel_nodes = |range: std::ops::Range<usize>| {
            range.flat_map(move |p| {
                let lo = p as f64 * h;
                gk15_panel(lo, lo + h)
            })
        };
        let tail_basis = |r: f64| {
            let t = (r - r_max) / span;
            TAIL_MOMENTS.map(|p| bump(t) * (r / r_max).powi(-p))
        };

        // Bump amplitudes are fitted on the discrete nodes themselves.
        let mut mat = [[0.0; 2]; 2];
        let mut rhs = TAIL_MOMENTS.map(|p| r_max.powi(1 - p) / f64::from(p - 1));
        for (r, wk, _) in panel_nodes(panels..(1 + TAIL_SPAN) * panels) {
            let basis = tail_basis(r);
            for (i, &p) in TAIL_MOMENTS.iter().enumerate() {
                let m = wk * r.powi(-p);
                rhs[i] -= m * taper((r - r_max) / span);
                for j in 0..2 {
                    mat[i][j] += m * basis[j];
                }
            }
        }
        let det = mat[0][0] * mat[1][1] - mat[0][1] * mat[1][0];
        let amp = [
            (rhs[0] * mat[1][1] - rhs[1] * mat[0][1]) / det,
            (mat[0][0] * rhs[1] - mat[1][0] * rhs[0]) / det,
        ];

        let nodes = panel_nodes(0..(1 + TAIL_SPAN) * panels)
            .map(|(r, wk, wg)| {
                let w = weight.eval(r)
                    * if r < r_max {
                        1.0
                    } else {
                        let b = tail_basis(r);
                        taper((r - r_max) / span) + amp[0] * b[0] + amp[1] * b[1]
                    };
                RadialNode {
                    r,
                    weight: wk * w,
                    gauss_weight: wg * w,
                }
            })
            .collect();
        Ok(Self {
            r_max,
            panel_width: h,
            weight,
            nodes,
            tail_start: 15 * panels,
        })
    }

    /// The default rule for Bessel factors of order up to `l_max` with
    /// wavenumbers in [k_min, k_max]: cutoff past every turning point by a
    /// wide margin, panels a quarter wavelength of the fastest product.
    pub fn for_wavenumbers(l_max: u32, k_min: f64, k_max: f64, weight: RadialWeight) -> Result<Self> {
        if !(k_min > 0.0 && k_max >= k_min) {
            return Err(Error::Domain(format!("bad wavenumber range [{k_min}, {k_max}]")));
        }
        let r_max = f64::max(200.0, 40.0 * l_max as f64 / k_min);
        Self::new(r_max, f64::min(1.0, PI / (2.0 * k_max)), weight)
    }

    /// Same cutoff, half the panel width.
    pub fn refined(&self) -> Self {
        Self::new(self.r_max, 0.5 * self.panel_width, self.weight).expect("refining a valid rule")
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn panel_width(&self) -> f64 {
        self.panel_width
    }

    pub fn weight(&self) -> RadialWeight {
        self.weight
    }

    pub fn nodes(&self) -> &[RadialNode] {
        &self.nodes
    }

    /// Index of the first node past r_max.
    pub fn tail_start(&self) -> usize {
        self.tail_start
    }

    /// Applies the rule to samples taken at `nodes()`, in order.
    pub fn integrate_samples(&self, samples: &[C64]) -> Result<RadialIntegral> {
        assert_eq!(samples.len(), self.nodes.len(), "one sample per radial node");
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::NonFinite { node: self.nodes[i].r });
        }
        self.check_decay(samples)?;
        let mut value = ZERO;
        let mut gauss = ZERO;
        let mut tail = ZERO;
        for (i, (n, s)) in self.nodes.iter().zip(samples).enumerate() {
            value += s * n.weight;
            gauss += s * n.gauss_weight;
            if i >= self.tail_start {
                tail += s * n.weight;
            }
        }
        Ok(RadialIntegral {
            value,
            error_estimate: (value - gauss).norm(),
            // everything past r_max is modelled rather than integrated
            tail_estimate: tail.norm(),
        })
    }

    /// The weighted integrand must fall off like r⁻³: r³·w(r)·|f ḡ| may not
    /// grow from the first to the last quarter of [r_max, 3 r_max].
    fn check_decay(&self, samples: &[C64]) -> Result<()> {
        let quarter = 0.5 * self.r_max;
        let (lo_cut, hi_cut) = (self.r_max + quarter, 3.0 * self.r_max - quarter);
        let (mut lo, mut hi) = ((0.0, 0usize), (0.0, 0usize));
        for (n, s) in self.nodes[self.tail_start..].iter().zip(&samples[self.tail_start..]) {
            let v = n.r.powi(3) * self.weight.eval(n.r) * s.norm();
            if n.r < lo_cut {
                lo.0 += v;
                lo.1 += 1;
            } else if n.r > hi_cut {
                hi.0 += v;
                hi.1 += 1;
            }
        }
        let lo_mean = lo.0 / lo.1.max(1) as f64;
        let hi_mean = hi.0 / hi.1.max(1) as f64;
        if hi_mean > 1.3 * lo_mean && hi_mean > 0.0 {
            return Err(Error::Divergent);
        }
        Ok(())
    }
}

/// A radial integral with its Kronrod-minus-Gauss error estimate and the size
/// of the extrapolated tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialIntegral {
    pub value: C64,
    pub error_estimate: f64,
    pub tail_estimate: f64,
}

impl RadialIntegral {
    pub fn error_budget(&self) -> f64 {
        self.error_estimate + self.tail_estimate
    }
}

/// ∫_0^∞ f(r) conj(g(r)) w(r) dr.
pub fn radial_integral<F, G>(f: F, g: G, q: &RadialQuadrature) -> Result<RadialIntegral>
where
    F: Fn(f64) -> C64 + Sync,
    G: Fn(f64) -> C64 + Sync,
{
    let samples: Vec<C64> = q.nodes().par_iter().map(|n| f(n.r) * g(n.r).conj()).collect();
    q.integrate_samples(&samples)
}
