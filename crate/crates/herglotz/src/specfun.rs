//! Scalar special functions: spherical and ordinary Bessel functions of the
//! first kind, associated Legendre functions, spherical harmonics and their
//! normalizing constants.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::domain::{ModeIndex, SphPoint, C64};
use crate::error::{Error, Result};

/// How a spherical Bessel value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselMethod {
    Series,
    Upward,
    DownwardMiller,
}

/// Switch thresholds between the evaluation methods for j_l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvalPolicy {
    /// Power series below this argument.
    pub series_below: f64,
}

impl Default for BesselEvalPolicy {
    fn default() -> Self {
        Self { series_below: 0.5 }
    }
}

impl BesselEvalPolicy {
    /// Upward recurrence is only stable while l ≤ x.
    pub fn choose(&self, l_max: u32, x: f64) -> BesselMethod {
        if x < self.series_below {
            BesselMethod::Series
        } else if x >= l_max as f64 {
            BesselMethod::Upward
        } else {
            BesselMethod::DownwardMiller
        }
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain(format!("Bessel argument must be non-negative, got {x}")))
    } else {
        Ok(())
    }
}

fn sph_bessel_series(l: u32, x: f64) -> f64 {
    // x^l / (2l+1)!! · Σ_k (-x²/2)^k / (k! (2l+3)(2l+5)…(2l+2k+1))
    let mut lead = 1.0;
    for i in 1..=l {
        lead *= x / (2 * i + 1) as f64;
    }
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= -x2 / (2.0 * k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// j_0..=j_{l_max} at x.
pub fn sph_bessel_row(l_max: u32, x: f64) -> Result<Vec<f64>> {
    check_arg(x)?;
    let n = l_max as usize + 1;
    if x == 0.0 {
        let mut row = vec![0.0; n];
        row[0] = 1.0;
        return Ok(row);
    }
    let policy = BesselEvalPolicy::default();
    let row = match policy.choose(l_max, x) {
        BesselMethod::Series => (0..=l_max).map(|l| sph_bessel_series(l, x)).collect(),
        BesselMethod::Upward => {
            let (s, c) = x.sin_cos();
            let mut row = Vec::with_capacity(n);
            row.push(s / x);
            if n > 1 {
                row.push(s / (x * x) - c / x);
            }
            for l in 1..l_max as usize {
                let next = (2 * l + 1) as f64 / x * row[l] - row[l - 1];
                row.push(next);
            }
            row
        }
        BesselMethod::DownwardMiller => miller_sph(l_max, x),
    };
    Ok(row)
}

fn miller_sph(l_max: u32, x: f64) -> Vec<f64> {
    let n = l_max as usize;
    let start = n + 20 + x as usize + ((40.0 * (n as f64 + x)).sqrt() as usize);
    let mut row = vec![0.0; n + 1];
    let mut above = 0.0;
    let mut cur = 1e-30;
    for k in (1..=start).rev() {
        let below = (2 * k + 1) as f64 / x * cur - above;
        above = cur;
        cur = below;
        let idx = k - 1;
        if idx <= n {
            row[idx] = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            for v in row.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() || n == 0 {
        j0 / row[0]
    } else {
        j1 / row[1]
    };
    row.iter_mut().for_each(|v| *v *= scale);
    row
}

/// Spherical Bessel function j_l(x).
pub fn sph_bessel_j(l: u32, x: f64) -> Result<f64> {
    Ok(sph_bessel_row(l, x)?[l as usize])
}

/// j'_l(x), with the analytic limits at x = 0.
pub fn sph_bessel_j_prime(l: u32, x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == 0.0 {
        return Ok(if l == 1 { 1.0 / 3.0 } else { 0.0 });
    }
    let row = sph_bessel_row(l + 1, x)?;
    Ok(deriv_from_row(&row, l as usize))
}

fn deriv_from_row(row: &[f64], l: usize) -> f64 {
    if l == 0 {
        -row[1]
    } else {
        (l as f64 * row[l - 1] - (l + 1) as f64 * row[l + 1]) / (2 * l + 1) as f64
    }
}

fn over_x_from_row(row: &[f64], l: usize) -> f64 {
    (row[l - 1] + row[l + 1]) / (2 * l + 1) as f64
}

/// j_l(x)/x for l ≥ 1, finite at the origin.
pub fn sph_bessel_over_r(l: u32, x: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::Domain("j_0(x)/x is singular at the origin; need l >= 1".into()));
    }
    check_arg(x)?;
    if x == 0.0 {
        return Ok(if l == 1 { 1.0 / 3.0 } else { 0.0 });
    }
    let row = sph_bessel_row(l + 1, x)?;
    Ok(over_x_from_row(&row, l as usize))
}

/// j_l, j'_l and j_l(x)/x at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphBesselParts {
    pub j: f64,
    pub dj: f64,
    /// Zero for l = 0, where it only ever appears multiplied by sqrt(l(l+1)).
    pub j_over_x: f64,
}

/// Parts for every l in 0..=l_max from one recurrence.
pub fn sph_bessel_parts_row(l_max: u32, x: f64) -> Result<Vec<SphBesselParts>> {
    check_arg(x)?;
    if x == 0.0 {
        return Ok((0..=l_max)
            .map(|l| SphBesselParts {
                j: if l == 0 { 1.0 } else { 0.0 },
                dj: if l == 1 { 1.0 / 3.0 } else { 0.0 },
                j_over_x: if l == 1 { 1.0 / 3.0 } else { 0.0 },
            })
            .collect());
    }
    let row = sph_bessel_row(l_max + 1, x)?;
    Ok((0..=l_max as usize)
        .map(|l| SphBesselParts {
            j: row[l],
            dj: deriv_from_row(&row, l),
            j_over_x: if l == 0 { 0.0 } else { over_x_from_row(&row, l) },
        })
        .collect())
}

pub fn sph_bessel_parts(l: u32, x: f64) -> Result<SphBesselParts> {
    Ok(sph_bessel_parts_row(l, x)?[l as usize])
}

/// Order of an ordinary Bessel function: an integer or a half-integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselOrder {
    Integer(u32),
    /// n + 1/2
    HalfInteger(u32),
}

impl BesselOrder {
    pub fn from_f64(nu: f64) -> Result<Self> {
        let twice = 2.0 * nu;
        if !(nu >= 0.0) || twice.fract() != 0.0 || twice > 1e6 {
            return Err(Error::Domain(format!(
                "Bessel order {nu} is neither a non-negative integer nor a half-integer"
            )));
        }
        let t = twice as u32;
        Ok(if t % 2 == 0 {
            BesselOrder::Integer(t / 2)
        } else {
            BesselOrder::HalfInteger(t / 2)
        })
    }

    pub fn value(&self) -> f64 {
        match *self {
            BesselOrder::Integer(n) => n as f64,
            BesselOrder::HalfInteger(n) => n as f64 + 0.5,
        }
    }
}

/// Ordinary Bessel function J_nu(x) for integer and half-integer nu.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    check_arg(x)?;
    let order = BesselOrder::from_f64(nu)?;
    if x == 0.0 {
        return Ok(if order == BesselOrder::Integer(0) { 1.0 } else { 0.0 });
    }
    Ok(match order {
        BesselOrder::Integer(n) => bessel_j_int_row(n, x)?[n as usize],
        BesselOrder::HalfInteger(n) => bessel_j_half(n, x),
    })
}

/// J_0..=J_{n_max} at x by downward recurrence normalized with
/// J_0 + 2 Σ J_{2k} = 1.
pub fn bessel_j_int_row(n_max: u32, x: f64) -> Result<Vec<f64>> {
    check_arg(x)?;
    let n = n_max as usize;
    if x == 0.0 {
        let mut row = vec![0.0; n + 1];
        row[0] = 1.0;
        return Ok(row);
    }
    let top = (n as f64).max(x);
    let mut start = (top + 20.0 + (60.0 * top).sqrt()) as usize;
    start += start % 2;
    let mut row = vec![0.0; n + 1];
    let mut above = 0.0;
    let mut cur = 1e-30;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        // cur = J_k (unnormalized), compute J_{k-1}
        if k <= n {
            row[k] = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let below = 2.0 * k as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            row.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    row[0] = cur;
    norm += cur;
    row.iter_mut().for_each(|v| *v /= norm);
    Ok(row)
}

/// J_{n+1/2}(x): continued fraction for J_nu/J_{nu-1} at the top order,
/// downward recurrence to nu = -1/2, normalized by the elementary forms of
/// J_{±1/2}.
fn bessel_j_half(n: u32, x: f64) -> f64 {
    let nu_top = n as f64 + 0.5;
    let ratio = cf_ratio(nu_top, x);
    // Orders -1/2, 1/2, ..., n+1/2 stored at indices 0..=n+1.
    let len = n as usize + 2;
    let mut vals = vec![0.0; len];
    vals[len - 1] = 1e-30;
    vals[len - 2] = vals[len - 1] / ratio;
    for idx in (1..len - 1).rev() {
        // order of vals[idx] is idx - 1/2; J_{nu-1} = (2 nu / x) J_nu - J_{nu+1}
        let nu = idx as f64 - 0.5;
        vals[idx - 1] = 2.0 * nu / x * vals[idx] - vals[idx + 1];
        if vals[idx - 1].abs() > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    let scale = if s.abs() >= c.abs() {
        amp * s / vals[1]
    } else {
        amp * c / vals[0]
    };
    vals[len - 1] * scale
}

/// J_nu(x) / J_{nu-1}(x) by modified Lentz evaluation of
/// 1 / (2nu/x - 1 / (2(nu+1)/x - …)).
fn cf_ratio(nu: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for k in 0..200_000 {
        let b = 2.0 * (nu + k as f64) / x;
        let a = if k == 0 { 1.0 } else { -1.0 };
        d = b + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// Associated Legendre values P_l^m(x) for m = 0..=l (Condon–Shortley phase
/// included) and their x-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreRow {
    pub l: u32,
    pub values: Vec<f64>,
    /// NaN at |x| = 1 for m ≥ 1, where the derivative is not finite in general.
    pub derivs: Vec<f64>,
}

/// P_l^m(x) and d/dx P_l^m(x) for 0 ≤ m ≤ l.
pub fn assoc_legendre(l: u32, m: u32, x: f64) -> Result<(f64, f64)> {
    if m > l {
        return Err(Error::Mode {
            l,
            m: m as i32,
            reason: "Legendre order exceeds degree",
        });
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("Legendre argument must lie in [-1, 1], got {x}")));
    }
    let one_minus = (1.0 - x) * (1.0 + x);
    let s = one_minus.sqrt();
    let mut pmm = 1.0;
    for i in 1..=m {
        pmm *= -((2 * i - 1) as f64) * s;
    }
    let (p_prev, p) = if l == m {
        (0.0, pmm)
    } else {
        let mut a = pmm;
        let mut b = x * (2 * m + 1) as f64 * pmm;
        for ll in (m + 2)..=l {
            let c = ((2 * ll - 1) as f64 * x * b - (ll + m - 1) as f64 * a) / (ll - m) as f64;
            a = b;
            b = c;
        }
        (a, b)
    };
    let dp = if one_minus > 0.0 {
        ((l + m) as f64 * p_prev - l as f64 * x * p) / one_minus
    } else if m == 0 {
        let sign = if x > 0.0 || l % 2 == 1 { 1.0 } else { -1.0 };
        sign * (l * (l + 1)) as f64 / 2.0
    } else {
        f64::NAN
    };
    Ok((p, dp))
}

pub fn assoc_legendre_row(l: u32, x: f64) -> Result<LegendreRow> {
    let mut values = Vec::with_capacity(l as usize + 1);
    let mut derivs = Vec::with_capacity(l as usize + 1);
    for m in 0..=l {
        let (p, dp) = assoc_legendre(l, m, x)?;
        values.push(p);
        derivs.push(dp);
    }
    Ok(LegendreRow { l, values, derivs })
}

/// Second derivative from the associated Legendre equation
/// (1 - x²) P'' - 2x P' + [l(l+1) - m²/(1 - x²)] P = 0, for |x| < 1.
pub fn assoc_legendre_d2(l: u32, m: u32, x: f64, p: f64, dp: f64) -> f64 {
    let one_minus = (1.0 - x) * (1.0 + x);
    let ll = (l * (l + 1)) as f64;
    (2.0 * x * dp - (ll - (m * m) as f64 / one_minus) * p) / one_minus
}

/// Ω_lm = 4π/(2l+1) · (l+|m|)!/(l-|m|)!
pub fn omega_norm(l: u32, m: i32) -> Result<f64> {
    let am = m.unsigned_abs();
    if am > l {
        return Err(Error::Mode {
            l,
            m,
            reason: "|m| must not exceed l",
        });
    }
    let base = 4.0 * PI / (2 * l + 1) as f64;
    let ratio = if l > 30 {
        (ln_gamma((l + am + 1) as f64) - ln_gamma((l - am + 1) as f64)).exp()
    } else {
        ((l - am + 1)..=(l + am)).map(|k| k as f64).product()
    };
    Ok(base * ratio)
}

/// Y_l^m(θ, φ) = Ω_lm^{-1/2} P_l^{|m|}(cos θ) e^{imφ}, without conjugation for m < 0.
pub fn sph_harmonic(l: u32, m: i32, theta: f64, phi: f64) -> Result<C64> {
    ModeIndex::new(l, m)?;
    SphPoint::new(1.0, theta, phi).check_interior()?;
    let (p, _) = assoc_legendre(l, m.unsigned_abs(), theta.cos())?;
    let norm = omega_norm(l, m)?.sqrt();
    Ok(C64::from_polar(p / norm, m as f64 * phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn double_factorial(n: i64) -> f64 {
        let mut acc = 1.0;
        let mut k = n;
        while k > 1 {
            acc *= k as f64;
            k -= 2;
        }
        acc
    }

    /// Σ_k (-1)^k x^{2k+l} / (2^k k! (2l+2k+1)!!) summed until terms vanish.
    fn series_oracle(l: u32, x: f64) -> f64 {
        let l = l as i64;
        let mut sum = 0.0;
        let mut k_fact = 1.0;
        for k in 0..80i64 {
            if k > 0 {
                k_fact *= k as f64;
            }
            let term = (-1f64).powi(k as i32) * x.powi((2 * k + l) as i32)
                / (2f64.powi(k as i32) * k_fact * double_factorial(2 * l + 2 * k + 1));
            sum += term;
            if term.abs() < 1e-18 * sum.abs() && k > 5 {
                break;
            }
        }
        sum
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn j_elementary_values() {
        assert!(sph_bessel_j(0, PI).unwrap().abs() < 1e-16);
        assert_eq!(sph_bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(sph_bessel_j(0, 0.0).unwrap(), 1.0);
        assert!(sph_bessel_j(0, -1.0).is_err());
    }

    #[test]
    fn j_matches_series_oracle() {
        let v = sph_bessel_j(5, 10.0).unwrap();
        assert!(rel(v, series_oracle(5, 10.0)) < 1e-11, "{v}");
        for &(l, x) in &[(0u32, 0.3), (3, 0.2), (10, 2.0), (20, 7.5), (8, 9.0), (30, 12.0), (2, 4.0)] {
            let v = sph_bessel_j(l, x).unwrap();
            assert!(rel(v, series_oracle(l, x)) < 1e-11, "l={l} x={x}");
        }
    }

    #[test]
    fn j_row_methods_agree_across_switch() {
        // Around x = l the policy changes method; both sides must agree.
        for l in [5u32, 17, 40, 60] {
            let x = l as f64;
            let below = sph_bessel_row(l + 3, x).unwrap()[l as usize];
            let above = sph_bessel_row(l, x).unwrap()[l as usize];
            assert!(rel(below, above) < 1e-12, "l={l}");
        }
    }

    #[test]
    fn j_prime_examples() {
        for x in [0.5, 1.0, 2.0] {
            let d = sph_bessel_j_prime(0, x).unwrap();
            assert!((d + sph_bessel_j(1, x).unwrap()).abs() < 1e-15);
        }
        let h = 1e-6;
        let fd = (sph_bessel_j(3, 2.0 + h).unwrap() - sph_bessel_j(3, 2.0 - h).unwrap()) / (2.0 * h);
        assert!((sph_bessel_j_prime(3, 2.0).unwrap() - fd).abs() < 1e-8);
        assert_eq!(sph_bessel_j_prime(1, 0.0).unwrap(), 1.0 / 3.0);
        assert_eq!(sph_bessel_j_prime(2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn j_over_r_examples() {
        assert_eq!(sph_bessel_over_r(1, 0.0).unwrap(), 1.0 / 3.0);
        assert_eq!(sph_bessel_over_r(2, 0.0).unwrap(), 0.0);
        assert!(sph_bessel_over_r(0, 1.0).is_err());
        let q = sph_bessel_j(4, 3.0).unwrap() / 3.0;
        assert!(rel(sph_bessel_over_r(4, 3.0).unwrap(), q) < 1e-13);
    }

    #[test]
    fn recurrences_agree_with_finite_differences_on_lattice() {
        let h = 1e-5;
        for l in 0..=12u32 {
            for &x in &[0.7, 1.9, 4.4, 11.0, 25.0] {
                let fd = (sph_bessel_j(l, x + h).unwrap() - sph_bessel_j(l, x - h).unwrap()) / (2.0 * h);
                assert!((sph_bessel_j_prime(l, x).unwrap() - fd).abs() < 1e-8, "l={l} x={x}");
                if l > 0 {
                    let q = sph_bessel_j(l, x).unwrap() / x;
                    assert!((sph_bessel_over_r(l, x).unwrap() - q).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn half_order_closed_form() {
        for x in [1.0, 2.0] {
            let expect = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!(rel(bessel_j(0.5, x).unwrap(), expect) < 1e-14);
        }
        assert!(bessel_j(0.3, 1.0).is_err());
        assert!(bessel_j(-1.0, 1.0).is_err());
    }

    fn j0_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..80 {
            term *= -(x * x / 4.0) / (k * k) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn j0_first_root_from_series_bisection() {
        let (mut a, mut b) = (2.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if j0_series(a) * j0_series(mid) <= 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        let root = 0.5 * (a + b);
        assert!(bessel_j(0.0, root).unwrap().abs() < 1e-10);
    }

    #[test]
    fn integer_orders_match_series() {
        // J_n(x) = Σ (-1)^k (x/2)^{2k+n} / (k! (k+n)!)
        let series = |n: u32, x: f64| {
            let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
            let mut sum = term;
            for k in 1..100 {
                term *= -(x * x / 4.0) / (k as f64 * (k + n) as f64);
                sum += term;
            }
            sum
        };
        for &(n, x) in &[(0u32, 1.3), (1, 4.0), (3, 2.5), (7, 6.0), (12, 3.0)] {
            assert!(rel(bessel_j(n as f64, x).unwrap(), series(n, x)) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn half_integer_identity_on_lattice() {
        for l in 0..=20u32 {
            for &x in &[0.5, 5.0, 50.0] {
                let big = bessel_j(l as f64 + 0.5, x).unwrap();
                let small = sph_bessel_j(l, x).unwrap();
                let lhs = (PI / (2.0 * x)).sqrt() * big;
                assert!(rel(lhs, small) < 1e-12, "l={l} x={x}: {lhs} vs {small}");
            }
        }
    }

    #[test]
    fn half_integer_envelope_bounded() {
        for &x in &[1.0, 5.0] {
            let excess: Vec<f64> = (20..=60u32)
                .map(|l| {
                    let mu = l as f64 + 0.5;
                    let env = mu * (std::f64::consts::E * x / (2 * l + 1) as f64).ln() - 0.5 * mu.ln();
                    bessel_j(mu, x).unwrap().abs().ln() - env
                })
                .collect();
            let max = excess.iter().cloned().fold(f64::MIN, f64::max);
            assert!(max < 0.0, "x={x}: {max}");
        }
    }

    /// Coefficients of P_l as a polynomial, lowest degree first.
    fn legendre_poly(l: usize) -> Vec<f64> {
        let mut p0 = vec![1.0];
        if l == 0 {
            return p0;
        }
        let mut p1 = vec![0.0, 1.0];
        for n in 1..l {
            let mut next = vec![0.0; n + 2];
            for (i, c) in p1.iter().enumerate() {
                next[i + 1] += (2 * n + 1) as f64 * c / (n + 1) as f64;
            }
            for (i, c) in p0.iter().enumerate() {
                next[i] -= n as f64 * c / (n + 1) as f64;
            }
            p0 = p1;
            p1 = next;
        }
        p1
    }

    fn poly_deriv(c: &[f64]) -> Vec<f64> {
        c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect()
    }

    fn poly_eval(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, v| acc * x + v)
    }

    /// P, P', P'' from (-1)^m (1-x²)^{m/2} Q(x) with Q = d^m P_l / dx^m.
    fn legendre_oracle(l: usize, m: usize, x: f64) -> (f64, f64, f64) {
        let mut q = legendre_poly(l);
        for _ in 0..m {
            q = poly_deriv(&q);
        }
        let dq = poly_deriv(&q);
        let ddq = poly_deriv(&dq);
        let (q0, q1, q2) = (poly_eval(&q, x), poly_eval(&dq, x), poly_eval(&ddq, x));
        let a = 1.0 - x * x;
        let h = m as f64 / 2.0;
        let w0 = a.powf(h);
        let w1 = -2.0 * x * h * a.powf(h - 1.0);
        let w2 = -2.0 * h * a.powf(h - 1.0) + 4.0 * x * x * h * (h - 1.0) * a.powf(h - 2.0);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        (
            sign * w0 * q0,
            sign * (w1 * q0 + w0 * q1),
            sign * (w2 * q0 + 2.0 * w1 * q1 + w0 * q2),
        )
    }

    #[test]
    fn legendre_small_cases() {
        let r = assoc_legendre_row(0, 0.4).unwrap();
        assert_eq!(r.values, vec![1.0]);
        for &x in &[-0.9, 0.0, 0.35] {
            let r = assoc_legendre_row(1, x).unwrap();
            assert!((r.values[1] + (1.0 - x * x).sqrt()).abs() < 1e-15);
        }
        for m in 1..=5 {
            assert_eq!(assoc_legendre(5, m, 1.0).unwrap().0, 0.0);
            assert_eq!(assoc_legendre(5, m, -1.0).unwrap().0, 0.0);
        }
    }

    #[test]
    fn legendre_ode_residual_l7() {
        let x = 0.3;
        let row = assoc_legendre_row(7, x).unwrap();
        for m in 0..=7usize {
            let (_, _, d2) = legendre_oracle(7, m, x);
            let (p, dp) = (row.values[m], row.derivs[m]);
            let res = (1.0 - x * x) * d2 - 2.0 * x * dp + (56.0 - (m * m) as f64 / (1.0 - x * x)) * p;
            let scale = p.abs() + dp.abs() + d2.abs();
            assert!(res.abs() <= 1e-9 * scale, "m={m}: {res}");
        }
    }

    #[test]
    fn legendre_matches_polynomial_oracle_and_ode_second_derivative() {
        for l in 0..=20usize {
            for &x in &[-0.99, -0.6, -0.1, 0.25, 0.8, 0.99] {
                for m in 0..=l {
                    let (po, dpo, ddpo) = legendre_oracle(l, m, x);
                    let (p, dp) = assoc_legendre(l as u32, m as u32, x).unwrap();
                    let d2 = assoc_legendre_d2(l as u32, m as u32, x, p, dp);
                    let scale = po.abs() + dpo.abs() + ddpo.abs();
                    assert!((p - po).abs() <= 1e-9 * scale, "P l={l} m={m} x={x}");
                    assert!((dp - dpo).abs() <= 1e-9 * scale, "P' l={l} m={m} x={x}");
                    assert!((d2 - ddpo).abs() <= 1e-9 * scale, "P'' l={l} m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn omega_examples() {
        assert!((omega_norm(0, 0).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((omega_norm(1, 1).unwrap() - 8.0 * PI / 3.0).abs() < 1e-14);
        assert!(omega_norm(2, 3).is_err());
        for l in 0..=20u32 {
            for m in 0..=l as i32 {
                assert_eq!(omega_norm(l, m).unwrap(), omega_norm(l, -m).unwrap());
            }
        }
        // log-space branch continues the direct product
        let a = omega_norm(31, 1).unwrap();
        let b = 4.0 * PI / 63.0 * 31.0 * 32.0;
        assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn y00_and_pole() {
        let y = sph_harmonic(0, 0, 1.1, 0.4).unwrap();
        assert!((y.re - 0.5 / PI.sqrt()).abs() < 1e-15 && y.im.abs() < 1e-16);
        assert!(matches!(sph_harmonic(1, 0, 0.0, 0.0), Err(Error::FrameDegenerate { .. })));
    }

    #[test]
    fn addition_theorem() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let theta = rng.gen_range(0.01..PI - 0.01);
            let phi = rng.gen_range(0.0..2.0 * PI);
            for l in 0..=15u32 {
                let s: f64 = (-(l as i32)..=l as i32)
                    .map(|m| sph_harmonic(l, m, theta, phi).unwrap().norm_sqr())
                    .sum();
                assert!((s - (2 * l + 1) as f64 / (4.0 * PI)).abs() < 1e-12, "l={l}");
            }
        }
    }

    #[test]
    fn policy_regions() {
        let p = BesselEvalPolicy::default();
        assert_eq!(p.choose(3, 0.1), BesselMethod::Series);
        assert_eq!(p.choose(3, 3.0), BesselMethod::Upward);
        assert_eq!(p.choose(10, 3.0), BesselMethod::DownwardMiller);
    }

    proptest! {
        #[test]
        fn j_bounded_by_one(l in 0u32..60, x in 0.0..200.0f64) {
            let v = sph_bessel_j(l, x).unwrap();
            prop_assert!(v.is_finite() && v.abs() <= 1.0 + 1e-14);
        }

        #[test]
        fn three_term_recurrence_holds(l in 1u32..50, x in 0.5..150.0f64) {
            let row = sph_bessel_row(l + 1, x).unwrap();
            let lhs = row[l as usize - 1] + row[l as usize + 1];
            let rhs = (2 * l + 1) as f64 / x * row[l as usize];
            let scale = row[l as usize - 1].abs() + row[l as usize + 1].abs() + 1e-300;
            prop_assert!((lhs - rhs).abs() <= 1e-11 * scale);
        }

        #[test]
        fn neumann_sum_of_integer_orders(x in 0.1..80.0f64) {
            // J_0² + 2 Σ J_n² = 1
            let row = bessel_j_int_row((x as u32) + 40, x).unwrap();
            let s: f64 = row[0] * row[0] + 2.0 * row[1..].iter().map(|v| v * v).sum::<f64>();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
