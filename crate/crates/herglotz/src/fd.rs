//! Fourth-order centered finite differences in Cartesian coordinates. These
//! serve as independent oracles for the closed forms elsewhere in the crate.

use crate::domain::{ElasticParams, C64, ZERO};

fn shifted<const D: usize>(x: [f64; D], axis: usize, delta: f64) -> [f64; D] {
    let mut y = x;
    y[axis] += delta;
    y
}

/// Linear combinations of field values.
trait Combine: Sized {
    fn lin(terms: &[(f64, &Self)]) -> Self;
}

impl Combine for C64 {
    fn lin(terms: &[(f64, &Self)]) -> Self {
        terms.iter().fold(ZERO, |acc, (w, v)| acc + **v * *w)
    }
}

impl<const D: usize> Combine for [C64; D] {
    fn lin(terms: &[(f64, &Self)]) -> Self {
        let mut out = [ZERO; D];
        for (w, v) in terms {
            for i in 0..D {
                out[i] += v[i] * *w;
            }
        }
        out
    }
}

fn d1<const D: usize, T: Combine, F: Fn([f64; D]) -> T>(f: &F, x: [f64; D], axis: usize, h: f64) -> T {
    let a = f(shifted(x, axis, 2.0 * h));
    let b = f(shifted(x, axis, h));
    let c = f(shifted(x, axis, -h));
    let d = f(shifted(x, axis, -2.0 * h));
    let s = 1.0 / (12.0 * h);
    T::lin(&[(-s, &a), (8.0 * s, &b), (-8.0 * s, &c), (s, &d)])
}

fn d2<const D: usize, T: Combine, F: Fn([f64; D]) -> T>(f: &F, x: [f64; D], axis: usize, h: f64) -> T {
    let a = f(shifted(x, axis, 2.0 * h));
    let b = f(shifted(x, axis, h));
    let o = f(x);
    let c = f(shifted(x, axis, -h));
    let d = f(shifted(x, axis, -2.0 * h));
    let s = 1.0 / (12.0 * h * h);
    T::lin(&[(-s, &a), (16.0 * s, &b), (-30.0 * s, &o), (16.0 * s, &c), (-s, &d)])
}

/// ∇F for a complex scalar field.
pub fn gradient_scalar<const D: usize, F: Fn([f64; D]) -> C64>(f: &F, x: [f64; D], h: f64) -> [C64; D] {
    let mut g = [ZERO; D];
    for (axis, gi) in g.iter_mut().enumerate() {
        *gi = d1(f, x, axis, h);
    }
    g
}

/// J[i][j] = ∂_j u_i.
pub fn jacobian<const D: usize, F: Fn([f64; D]) -> [C64; D]>(f: &F, x: [f64; D], h: f64) -> [[C64; D]; D] {
    let mut jac = [[ZERO; D]; D];
    for j in 0..D {
        let col = d1(f, x, j, h);
        for i in 0..D {
            jac[i][j] = col[i];
        }
    }
    jac
}

pub fn divergence<const D: usize, F: Fn([f64; D]) -> [C64; D]>(f: &F, x: [f64; D], h: f64) -> C64 {
    let jac = jacobian(f, x, h);
    (0..D).fold(ZERO, |acc, i| acc + jac[i][i])
}

pub fn curl<F: Fn([f64; 3]) -> [C64; 3]>(f: &F, x: [f64; 3], h: f64) -> [C64; 3] {
    let j = jacobian(f, x, h);
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

/// Scalar curl ∂_1 u_2 − ∂_2 u_1 of a planar field.
pub fn curl_2d<F: Fn([f64; 2]) -> [C64; 2]>(f: &F, x: [f64; 2], h: f64) -> C64 {
    let j = jacobian(f, x, h);
    j[1][0] - j[0][1]
}

pub fn laplacian<const D: usize, F: Fn([f64; D]) -> [C64; D]>(f: &F, x: [f64; D], h: f64) -> [C64; D] {
    let mut out = [ZERO; D];
    for axis in 0..D {
        let s = d2(f, x, axis, h);
        for i in 0..D {
            out[i] += s[i];
        }
    }
    out
}

/// ∇(∇·u) with mixed partials from nested first-difference stencils.
pub fn grad_div<const D: usize, F: Fn([f64; D]) -> [C64; D]>(f: &F, x: [f64; D], h: f64) -> [C64; D] {
    let mut out = [ZERO; D];
    for (i, oi) in out.iter_mut().enumerate() {
        for j in 0..D {
            let comp = |y: [f64; D]| f(y)[j];
            *oi += if i == j {
                d2(&comp, x, i, h)
            } else {
                d1(&|y: [f64; D]| d1(&comp, y, j, h), x, i, h)
            };
        }
    }
    out
}

/// Norm of the Navier residual μΔu + (λ+μ)∇(∇·u) + ρω²u against the sum of
/// the norms of its three terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavierResidual {
    pub residual: f64,
    pub scale: f64,
}

impl NavierResidual {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else {
            self.residual / self.scale
        }
    }
}

fn norm<const D: usize>(v: &[C64; D]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn navier_residual<const D: usize, F: Fn([f64; D]) -> [C64; D]>(
    f: &F,
    x: [f64; D],
    params: &ElasticParams,
    h: f64,
) -> NavierResidual {
    let lap = laplacian(f, x, h);
    let gd = grad_div(f, x, h);
    let u = f(x);
    let (a, b, c) = (params.mu(), params.lambda() + params.mu(), params.rho() * params.omega().powi(2));
    let mut res = [ZERO; D];
    for i in 0..D {
        res[i] = lap[i] * a + gd[i] * b + u[i] * c;
    }
    let t1: [C64; D] = lap.map(|z| z * a);
    let t2: [C64; D] = gd.map(|z| z * b);
    let t3: [C64; D] = u.map(|z| z * c);
    NavierResidual {
        residual: norm(&res),
        scale: norm(&t1) + norm(&t2) + norm(&t3),
    }
}

/// Frobenius norm of the Jacobian, the natural scale for curl and divergence.
pub fn jacobian_norm<const D: usize, F: Fn([f64; D]) -> [C64; D]>(f: &F, x: [f64; D], h: f64) -> f64 {
    jacobian(f, x, h)
        .iter()
        .flatten()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_fields_are_exact() {
        // u = (x y, y z², x³) : div = y + z², curl = (-2 y z, -3x², -x)
        let f = |x: [f64; 3]| {
            [
                C64::new(x[0] * x[1], 0.0),
                C64::new(x[1] * x[2] * x[2], 0.0),
                C64::new(x[0].powi(3), 0.0),
            ]
        };
        let p = [0.3, -1.1, 0.7];
        let div = divergence(&f, p, 1e-2);
        assert!((div.re - (p[1] + p[2] * p[2])).abs() < 1e-10);
        let c = curl(&f, p, 1e-2);
        let expect = [-2.0 * p[1] * p[2], -3.0 * p[0] * p[0], -p[0]];
        for i in 0..3 {
            assert!((c[i].re - expect[i]).abs() < 1e-10);
        }
        let lap = laplacian(&f, p, 1e-2);
        let expect = [0.0, 2.0 * p[1], 6.0 * p[0]];
        for i in 0..3 {
            assert!((lap[i].re - expect[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn plane_pressure_wave_solves_navier() {
        let params = ElasticParams::new(0.7, 1.3, 1.1, 2.0).unwrap();
        let k = params.kp();
        let dir = [0.6, 0.0, 0.8];
        let f = move |x: [f64; 3]| {
            let ph = C64::new(0.0, k * (dir[0] * x[0] + dir[1] * x[1] + dir[2] * x[2])).exp();
            [ph * dir[0], ph * dir[1], ph * dir[2]]
        };
        let r = navier_residual(&f, [0.2, 0.5, -0.4], &params, 1e-2);
        assert!(r.relative() < 1e-7, "{r:?}");
    }
}
