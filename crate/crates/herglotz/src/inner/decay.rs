//! Weighted integrals of products of spherical Bessel functions,
//! I_l(a, b) = ∫_0^∞ j_l(ar) j_l(br) r²/⟨r⟩³ dr, and their decay in l.
//!
//! The cross integrals fall off like δ^l with δ = min(a/b, b/a), so at l = 40
//! they sit near 1e-15 and any truncated real-axis rule drowns them. The real
//! axis is used on [0, R0] only. Beyond R0 each j_l is split into the two
//! spherical Hankel functions, which are finite sums in 1/z, and every product
//! term is carried along the ray in the complex plane on which its exponential
//! decays. For a = b the non-oscillating term stays on the real axis and is
//! mapped to a finite interval.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use super::gram::h_gram_rows;
use super::quadrature::{gk15_integrate, gk15_panel, RadialQuadrature};
use crate::domain::{ElasticParams, C64, ZERO};
use crate::error::{Error, Result};
use crate::specfun::sph_bessel_row;

/// Stability limit on the degree for the decay reports.
pub const MAX_DECAY_DEGREE: u32 = 60;

/// Resolution of the Bessel-pair integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRule {
    /// GK15 panel width on the real segment.
    pub panel_width: f64,
    /// GK15 panels along each complex ray.
    pub ray_panels: usize,
}

impl PairRule {
    pub fn for_wavenumbers(a: f64, b: f64) -> Self {
        Self {
            panel_width: f64::min(1.0, PI / (2.0 * a.max(b))),
            ray_panels: 40,
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            panel_width: 0.5 * self.panel_width,
            ray_panels: 2 * self.ray_panels,
        }
    }
}

/// h_l^{(1)}(z) (sign = +1) or h_l^{(2)}(z) (sign = −1) with the factor
/// e^{± i z} removed.
fn hankel_reduced(l: u32, z: C64, sign: f64) -> C64 {
    let u = C64::new(0.0, sign);
    let mut term = C64::new(1.0, 0.0);
    let mut sum = term;
    let lf = l as f64;
    for k in 0..l {
        let kf = k as f64;
        term = term * u * ((lf + kf + 1.0) * (lf - kf) / (kf + 1.0)) / (2.0 * z);
        sum += term;
    }
    (-u).powu(l + 1) * sum / z
}

fn volume_weight(z: C64) -> C64 {
    let z2 = z * z;
    z2 * (C64::new(1.0, 0.0) + z2).powf(-1.5)
}

/// ∫_{R0}^∞ j_l(ar) j_l(br) w(r) dr by contour deformation.
fn pair_tail(l: u32, a: f64, b: f64, r0: f64, rule: &PairRule) -> f64 {
    let mut total = ZERO;
    for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let omega = sa * a + sb * b;
        let f = |z: C64| {
            hankel_reduced(l, a * z, sa) * hankel_reduced(l, b * z, sb) * (C64::new(0.0, omega) * z).exp() * volume_weight(z)
        };
        if omega.abs() <= 1e-14 * (a + b) {
            // r = R0/s maps [R0, ∞) onto (0, 1]; the integrand vanishes like s.
            total += gk15_integrate(
                |s| {
                    let r = r0 / s;
                    f(C64::new(r, 0.0)) * (r0 / (s * s))
                },
                0.0,
                1.0,
                16,
            );
        } else {
            let dir = C64::new(0.0, omega.signum());
            let t_max = 50.0 / omega.abs();
            total += gk15_integrate(|t| f(C64::new(r0, 0.0) + dir * t) * dir, 0.0, t_max, rule.ray_panels);
        }
    }
    0.25 * total.re
}

/// I_l(a, b) for every l in `ls`.
pub fn bessel_pair_integrals(ls: RangeInclusive<u32>, a: f64, b: f64, rule: &PairRule) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("wavenumbers must be positive, got a = {a}, b = {b}")));
    }
    // the integrand is symmetric in (a, b); a fixed order makes the result so
    let (a, b) = (a.min(b), a.max(b));
    let (lo, hi) = (*ls.start(), *ls.end());
    if hi > MAX_DECAY_DEGREE || lo > hi {
        return Err(Error::Domain(format!(
            "degree range {lo}..={hi} outside 0..={MAX_DECAY_DEGREE}"
        )));
    }
    let r0 = f64::max(50.0, 40.0 * f64::from(hi.max(1)) / a.min(b));
    let panels = (r0 / rule.panel_width).ceil() as usize;
    let h = r0 / panels as f64;
    let width = (hi - lo + 1) as usize;

    let partials: Vec<Vec<f64>> = (0..panels)
        .into_par_iter()
        .chunks(32)
        .map(|chunk| {
            let mut acc = vec![0.0; width];
            for p in chunk {
                let start = p as f64 * h;
                for (r, w, _) in gk15_panel(start, start + h) {
                    let ja = sph_bessel_row(hi, a * r)?;
                    let jb = sph_bessel_row(hi, b * r)?;
                    let wr = w * r * r / (1.0 + r * r).powf(1.5);
                    for (i, slot) in acc.iter_mut().enumerate() {
                        let l = lo as usize + i;
                        *slot += wr * ja[l] * jb[l];
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; width];
    for part in &partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    let tails: Vec<f64> = (lo..=hi).into_par_iter().map(|l| pair_tail(l, a, b, r0, rule)).collect();
    for (v, t) in values.iter_mut().zip(tails) {
        *v += t;
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node: f64::from(lo) + i as f64 });
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares; `None` with fewer than three points or no spread.
pub fn fit_line(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 || !sxy.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub l: u32,
    pub value: f64,
    pub fit_residual: f64,
}

/// A sequence indexed by degree with a straight-line fit over a window.
/// `fit` is `None` when the window holds too little usable data; the rows are
/// still reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    pub window: (u32, u32),
    pub fit: Option<LinearFit>,
}

/// How a report turns (l, value) into fit coordinates.
#[derive(Debug, Clone, Copy)]
enum Axes {
    /// (log l, log|v|)
    LogLog,
    /// (l, log|v| + p·log l): exponential rate after removing l^{-p}.
    Exponential { algebraic: f64 },
}

impl Axes {
    fn map(self, l: u32, v: f64) -> Option<(f64, f64)> {
        let a = v.abs();
        if l == 0 || !(a > 1e-300 && a.is_finite()) {
            return None;
        }
        let ll = f64::from(l).ln();
        Some(match self {
            Axes::LogLog => (ll, a.ln()),
            Axes::Exponential { algebraic } => (f64::from(l), a.ln() + algebraic * ll),
        })
    }
}

fn build_report(ls: RangeInclusive<u32>, values: &[f64], window: (u32, u32), axes: Axes) -> DecayReport {
    let pts: Vec<(f64, f64)> = ls
        .clone()
        .zip(values)
        .filter(|(l, _)| (window.0..=window.1).contains(l))
        .filter_map(|(l, v)| axes.map(l, *v))
        .collect();
    let fit = fit_line(&pts);
    let rows = ls
        .zip(values)
        .map(|(l, &value)| {
            let fit_residual = match (fit, axes.map(l, value)) {
                (Some(f), Some((x, y))) => y - f.at(x),
                _ => f64::NAN,
            };
            DecayRow { l, value, fit_residual }
        })
        .collect();
    DecayReport { rows, window, fit }
}

pub const DIAG_WINDOW: (u32, u32) = (10, 40);
pub const CROSS_WINDOW: (u32, u32) = (20, 40);

/// I_l(k, k) with a log-log fit over l ∈ [10, 40]; the slope should be near −2.
pub fn diag_decay_report(ls: RangeInclusive<u32>, k: f64, rule: &PairRule) -> Result<DecayReport> {
    let values = bessel_pair_integrals(ls.clone(), k, k, rule)?;
    Ok(build_report(ls, &values, DIAG_WINDOW, Axes::LogLog))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossDecayReport {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    /// Fit of log|I_l| + (3/2)·log l against l over l ∈ [20, 40]; the slope is
    /// the exponential rate, to be compared with log δ.
    pub report: DecayReport,
    /// Slope of log|I_l| alone against l over the same window.
    pub raw_rate: Option<f64>,
    /// Smallest C with |I_l| ≤ C δ^l l^{-3/2} on the window.
    pub envelope_constant: f64,
}

impl CrossDecayReport {
    pub fn rate(&self) -> Option<f64> {
        self.report.fit.map(|f| f.slope)
    }

    /// |rate − log δ| / |log δ|.
    pub fn rate_error(&self) -> Option<f64> {
        let target = self.delta.ln();
        self.rate().map(|r| ((r - target) / target).abs())
    }
}

pub fn cross_decay_report(ls: RangeInclusive<u32>, a: f64, b: f64, rule: &PairRule) -> Result<CrossDecayReport> {
    if a == b {
        return Err(Error::Domain(
            "cross decay needs a != b; for a = b the integrals decay only algebraically".into(),
        ));
    }
    let values = bessel_pair_integrals(ls.clone(), a, b, rule)?;
    let delta = (a / b).min(b / a);
    let report = build_report(ls.clone(), &values, CROSS_WINDOW, Axes::Exponential { algebraic: 1.5 });
    let raw = build_report(ls.clone(), &values, CROSS_WINDOW, Axes::Exponential { algebraic: 0.0 });
    let envelope_constant = ls
        .zip(&values)
        .filter(|(l, v)| (CROSS_WINDOW.0..=CROSS_WINDOW.1).contains(l) && v.abs() > 1e-300)
        .map(|(l, v)| v.abs() / (delta.powi(l as i32) * f64::from(l).powf(-1.5)))
        .fold(0.0, f64::max);
    Ok(CrossDecayReport {
        a,
        b,
        delta,
        report,
        raw_rate: raw.fit.map(|f| f.slope),
        envelope_constant,
    })
}

/// |⟨𝒩_l, 𝓛_l⟩_H| for the unit vectors, with a log-log fit over l ∈ [10, 40].
pub fn orthogonality_report(l_max: u32, params: &ElasticParams, q: &RadialQuadrature) -> Result<DecayReport> {
    params.ensure_distinct()?;
    let rows = h_gram_rows(l_max, params, q)?;
    let values: Vec<f64> = rows.iter().map(|r| r.unit_overlap().abs()).collect();
    Ok(build_report(0..=l_max, &values, DIAG_WINDOW, Axes::LogLog))
}
