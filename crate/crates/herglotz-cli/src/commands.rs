//! The CLI verbs. Each `*_report` computes; each `cmd_*` also writes the
//! artifacts and decides the exit status.

use std::fs;
use std::path::{Path, PathBuf};

use herglotz::domain::{matrix_to_json, CVec3, ReIm};
use herglotz::fd;
use herglotz::inner::{
    cross_decay_report, diag_decay_report, fit_line, h_gram_rows, orthogonality_report, CrossDecayReport, DecayReport,
    PairRule, RadialQuadrature, RadialWeight,
};
use herglotz::kernel3d::{build_cache, kernel_eval, reproduce_check, CoeffField};
use herglotz::plane2d::{build_cache_2d, kernel_2d, reproduce_check_2d, CoeffField2D, PolarPoint};
use herglotz::synthesis::{FarFieldPattern, Synthesizer};
use herglotz::{ElasticParams, SphPoint, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{hermitian_check, HermitianCheck};
use crate::config::{Dim, RunConfig};
use crate::error::{CliError, CliResult, Status};
use crate::io::{read_grid_csv, read_text, write_csv, write_field_csv, write_json};
use crate::verify::{verify_gram, VerifyReport, DEFAULT_RADII, GRAM_TOL};

pub const DIAG_SLOPE_BAND: (f64, f64) = (-2.3, -1.7);
pub const CROSS_RATE_TOL: f64 = 0.05;
pub const OVERLAP_SLOPE_MAX: f64 = -1.5;
pub const L_NORM_RATIO_MAX: f64 = 2.0;
pub const SCALED_NORM_BAND: f64 = 0.15;
pub const KERNEL_TOL: f64 = 1e-10;
pub const REPRODUCE_TOL: f64 = 1e-6;
pub const REPRODUCE_RADIUS: f64 = 3.0;
pub const SYNTH_TOL: f64 = 1e-5;
/// Step of the finite-difference Navier residual.
pub const FD_STEP: f64 = 1e-3;

fn status_line(verb: &str, status: Status, detail: &str) {
    let word = match status {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Unjudged => "not judged",
    };
    eprintln!("{verb}: {word} ({detail})");
}

pub fn cmd_verify_gram(cfg: &RunConfig, radii: Option<&[f64]>, perturb: bool) -> CliResult<Status> {
    if cfg.dim != Dim::Three {
        return Err(CliError::Usage("verify-gram checks the 3D Gram forms; drop --dim 2".into()));
    }
    let radii = radii.unwrap_or(&DEFAULT_RADII);
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(CliError::Usage(format!("radius {r} must be positive")));
    }
    let report: VerifyReport = verify_gram(&cfg.params, cfg.l_max_or(8), radii, cfg.tol_or(GRAM_TOL)?, cfg.seed, perturb)?;
    write_json(cfg.out.as_deref(), &report)?;
    let status = Status::from_pass(report.pass);
    let detail = match &report.first_failure {
        Some(name) => format!("first violated identity: {name}"),
        None => format!("{} identities", report.checks.len()),
    };
    status_line("verify-gram", status, &detail);
    Ok(status)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsSummary {
    pub kp: f64,
    pub ks: f64,
    pub l_max: u32,
    pub diag_k: f64,
    pub diag_slope: Option<f64>,
    pub diag_band: (f64, f64),
    pub diag_pass: bool,
    pub cross_delta: f64,
    pub cross_log_delta: f64,
    pub cross_rate: Option<f64>,
    pub cross_rate_error: Option<f64>,
    pub cross_raw_rate: Option<f64>,
    pub cross_tolerance: f64,
    pub cross_pass: bool,
    pub overlap_slope: Option<f64>,
    pub overlap_slope_max: f64,
    pub overlap_pass: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Asymptotics {
    pub diag: DecayReport,
    pub cross: CrossDecayReport,
    pub overlap: DecayReport,
    pub summary: AsymptoticsSummary,
}

/// Diagonal I_l(kp, kp), cross I_l(kp, ks) and the unit L–N overlaps.
pub fn asymptotics_report(params: &ElasticParams, l_max: u32, tol: f64) -> CliResult<Asymptotics> {
    params.ensure_distinct()?;
    let (kp, ks) = (params.kp(), params.ks());
    let diag = diag_decay_report(1..=l_max, kp, &PairRule::for_wavenumbers(kp, kp))?;
    let cross = cross_decay_report(1..=l_max, kp, ks, &PairRule::for_wavenumbers(kp, ks))?;
    let q = RadialQuadrature::for_wavenumbers(l_max, params.k_min(), params.k_max(), RadialWeight::Volume)?;
    let overlap = orthogonality_report(l_max, params, &q)?;
    let diag_slope = diag.fit.map(|f| f.slope);
    let diag_pass = diag_slope.is_some_and(|s| (DIAG_SLOPE_BAND.0..=DIAG_SLOPE_BAND.1).contains(&s));
    let cross_pass = cross.rate_error().is_some_and(|e| e <= tol);
    let overlap_slope = overlap.fit.map(|f| f.slope);
    let overlap_pass = overlap_slope.is_some_and(|s| s <= OVERLAP_SLOPE_MAX);
    let summary = AsymptoticsSummary {
        kp,
        ks,
        l_max,
        diag_k: kp,
        diag_slope,
        diag_band: DIAG_SLOPE_BAND,
        diag_pass,
        cross_delta: cross.delta,
        cross_log_delta: cross.delta.ln(),
        cross_rate: cross.rate(),
        cross_rate_error: cross.rate_error(),
        cross_raw_rate: cross.raw_rate,
        cross_tolerance: tol,
        cross_pass,
        overlap_slope,
        overlap_slope_max: OVERLAP_SLOPE_MAX,
        overlap_pass,
        pass: diag_pass && cross_pass && overlap_pass,
    };
    Ok(Asymptotics {
        diag,
        cross,
        overlap,
        summary,
    })
}

fn out_dir(cfg: &RunConfig, verb: &str) -> CliResult<PathBuf> {
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{verb} writes several files; give --out DIR")))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

pub fn cmd_asymptotics(cfg: &RunConfig) -> CliResult<Status> {
    if cfg.dim != Dim::Three {
        return Err(CliError::Usage("asymptotics covers the 3D radial integrals; drop --dim 2".into()));
    }
    let dir = out_dir(cfg, "asymptotics")?;
    let a = asymptotics_report(&cfg.params, cfg.l_max_or(40), cfg.tol_or(CROSS_RATE_TOL)?)?;
    write_csv(Some(&dir.join("diag.csv")), &a.diag.rows)?;
    write_csv(Some(&dir.join("cross.csv")), &a.cross.report.rows)?;
    write_csv(Some(&dir.join("overlap.csv")), &a.overlap.rows)?;
    write_json(Some(&dir.join("summary.json")), &a.summary)?;
    let s = &a.summary;
    let status = Status::from_pass(s.pass);
    let f = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    status_line(
        "asymptotics",
        status,
        &format!(
            "diag slope {}, cross rate {} vs log δ {:.4}, overlap slope {}",
            f(s.diag_slope),
            f(s.cross_rate),
            s.cross_log_delta,
            f(s.overlap_slope)
        ),
    );
    Ok(status)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRow {
    pub l: u32,
    pub norm_l: f64,
    pub norm_m: f64,
    pub norm_n: f64,
    pub norm_m_over_l: f64,
    pub norm_n_over_l: f64,
    pub overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRow2D {
    pub n: u32,
    pub norm_e: f64,
    pub norm_f: f64,
    pub overlap_abs: f64,
}

/// Spread statistics of the 3D norm scalings over the standard windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBands {
    /// max/min of ‖L_l‖_H over l ∈ [10, 40].
    pub l_ratio: Option<f64>,
    /// (max − min)/(max + min) of ‖M_l‖_H/l and ‖N_l‖_H/l over l ∈ [20, 40].
    pub m_half_width: Option<f64>,
    pub n_half_width: Option<f64>,
    pub pass: bool,
}

pub fn norm_rows(params: &ElasticParams, l_max: u32) -> CliResult<Vec<NormRow>> {
    let q = RadialQuadrature::for_wavenumbers(l_max, params.k_min(), params.k_max(), RadialWeight::Volume)?;
    Ok(h_gram_rows(l_max, params, &q)?
        .into_iter()
        .map(|r| {
            let lf = f64::from(r.l.max(1));
            NormRow {
                l: r.l,
                norm_l: r.ll.sqrt(),
                norm_m: r.mm.sqrt(),
                norm_n: r.nn.sqrt(),
                norm_m_over_l: r.mm.sqrt() / lf,
                norm_n_over_l: r.nn.sqrt() / lf,
                overlap: r.unit_overlap(),
            }
        })
        .collect())
}

fn window(rows: &[NormRow], lo: u32, hi: u32, f: impl Fn(&NormRow) -> f64) -> Option<(f64, f64)> {
    let vals: Vec<f64> = rows.iter().filter(|r| (lo..=hi).contains(&r.l)).map(f).collect();
    if vals.len() < (hi - lo + 1) as usize {
        return None;
    }
    Some((vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(0.0, f64::max)))
}

pub fn norm_bands(rows: &[NormRow]) -> NormBands {
    let l_ratio = window(rows, 10, 40, |r| r.norm_l).map(|(lo, hi)| hi / lo);
    let half = |(lo, hi): (f64, f64)| (hi - lo) / (hi + lo);
    let m_half_width = window(rows, 20, 40, |r| r.norm_m_over_l).map(half);
    let n_half_width = window(rows, 20, 40, |r| r.norm_n_over_l).map(half);
    let pass = l_ratio.is_some_and(|v| v <= L_NORM_RATIO_MAX)
        && m_half_width.is_some_and(|v| v <= SCALED_NORM_BAND)
        && n_half_width.is_some_and(|v| v <= SCALED_NORM_BAND);
    NormBands {
        l_ratio,
        m_half_width,
        n_half_width,
        pass,
    }
}

pub fn cmd_norms(cfg: &RunConfig) -> CliResult<Status> {
    let out = cfg.out.as_deref();
    match cfg.dim {
        Dim::Three => {
            let l_max = cfg.l_max_or(40);
            let rows = norm_rows(&cfg.params, l_max)?;
            write_csv(out, &rows)?;
            if l_max < 40 {
                status_line("norms", Status::Pass, "bands need --lmax 40; table only");
                return Ok(Status::Pass);
            }
            let b = norm_bands(&rows);
            let status = Status::from_pass(b.pass);
            status_line(
                "norms",
                status,
                &format!(
                    "‖L‖ max/min {:.4}, ‖M‖/l half-width {:.4}, ‖N‖/l half-width {:.4}",
                    b.l_ratio.unwrap_or(f64::NAN),
                    b.m_half_width.unwrap_or(f64::NAN),
                    b.n_half_width.unwrap_or(f64::NAN)
                ),
            );
            Ok(status)
        }
        Dim::Two => {
            let cache = build_cache_2d(cfg.params, cfg.l_max_or(40))?;
            let rows: Vec<NormRow2D> = cache
                .orders()
                .iter()
                .filter(|o| o.n >= 0)
                .map(|o| NormRow2D {
                    n: o.n as u32,
                    norm_e: o.norm_e,
                    norm_f: o.norm_f,
                    overlap_abs: o.overlap.norm(),
                })
                .collect();
            write_csv(out, &rows)?;
            let pass = rows.iter().all(|r| r.norm_e > 0.0 && r.norm_f > 0.0 && r.overlap_abs < 1.0);
            let status = Status::from_pass(pass);
            status_line("norms", status, &format!("{} orders", rows.len()));
            Ok(status)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelOutput {
    pub dim: u8,
    pub l_max: u32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub tensor: Vec<Vec<ReIm>>,
    pub tail_estimate: f64,
    /// Present when x = y.
    pub hermitian: Option<HermitianCheck>,
    pub pass: bool,
}

fn point<const N: usize>(v: &[f64], name: &str) -> CliResult<[f64; N]> {
    <[f64; N]>::try_from(v)
        .ok()
        .filter(|p| p.iter().all(|c| c.is_finite()))
        .ok_or_else(|| CliError::Usage(format!("--{name} needs {N} finite comma-separated coordinates")))
}

pub fn kernel_report(cfg: &RunConfig, x: &[f64], y: &[f64]) -> CliResult<KernelOutput> {
    let tol = cfg.tol_or(KERNEL_TOL)?;
    let l_max = cfg.l_max_or(8);
    let (dim, tensor, tail, check, max_abs) = match cfg.dim {
        Dim::Three => {
            let (px, py) = (point::<3>(x, "x")?, point::<3>(y, "y")?);
            let cache = build_cache(cfg.params, l_max)?;
            let k = kernel_eval(&cache, &SphPoint::from_cartesian(px), &SphPoint::from_cartesian(py), l_max)?;
            let check = (px == py).then(|| hermitian_check(&k.tensor.0));
            (3, matrix_to_json(&k.tensor.0), k.tail_estimate, check, k.tensor.max_abs())
        }
        Dim::Two => {
            let (px, py) = (point::<2>(x, "x")?, point::<2>(y, "y")?);
            let cache = build_cache_2d(cfg.params, l_max)?;
            let k = kernel_2d(&cache, &PolarPoint::from_cartesian(px), &PolarPoint::from_cartesian(py), l_max)?;
            let check = (px == py).then(|| hermitian_check(&k.tensor));
            let m = k.tensor.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
            (2, matrix_to_json(&k.tensor), k.tail_estimate, check, m)
        }
    };
    let pass = check.is_none_or(|c| c.passes(tol, max_abs));
    Ok(KernelOutput {
        dim,
        l_max,
        x: x.to_vec(),
        y: y.to_vec(),
        tensor,
        tail_estimate: tail,
        hermitian: check,
        pass,
    })
}

pub fn cmd_kernel(cfg: &RunConfig, x: &[f64], y: &[f64]) -> CliResult<Status> {
    let k = kernel_report(cfg, x, y)?;
    write_json(cfg.out.as_deref(), &k)?;
    let status = Status::from_pass(k.pass);
    let detail = match &k.hermitian {
        Some(h) => format!("x = y: asymmetry {:.2e}, min eigenvalue {:.3e}", h.asymmetry, h.min_eigenvalue),
        None => format!("tail estimate {:.3e}", k.tail_estimate),
    };
    status_line("kernel", status, &detail);
    Ok(status)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReproduceRow {
    pub x1: f64,
    pub x2: f64,
    pub x3: Option<f64>,
    pub residual: f64,
    pub u_norm: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOutcome {
    pub rows: Vec<ReproduceRow>,
    pub support: u32,
    pub l_max: u32,
    pub truncated: bool,
    pub status: Status,
}

fn sample_ball<const N: usize>(rng: &mut ChaCha8Rng, radius: f64) -> [f64; N] {
    loop {
        let x: [f64; N] = std::array::from_fn(|_| rng.gen_range(-radius..radius));
        if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return x;
        }
    }
}

/// A random unit direction in C^N.
fn sample_z<const N: usize>(rng: &mut ChaCha8Rng) -> [C64; N] {
    let z: [C64; N] = std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    z.map(|c| c / n)
}

/// Parsed coefficient field for either dimension.
pub enum FieldInput {
    Three(CoeffField),
    Two(CoeffField2D),
}

impl FieldInput {
    pub fn parse(cfg: &RunConfig, path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let err = |e: herglotz::Error| CliError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        Ok(match cfg.dim {
            Dim::Three => FieldInput::Three(CoeffField::from_json(cfg.params, &text).map_err(err)?),
            Dim::Two => FieldInput::Two(CoeffField2D::from_json(cfg.params, &text).map_err(err)?),
        })
    }

    fn support(&self) -> u32 {
        match self {
            FieldInput::Three(u) => u.max_degree().unwrap_or(0),
            FieldInput::Two(u) => u.max_order(),
        }
    }
}

/// Reproducing residuals at `samples` seeded points with |x| ≤ 3 and unit z.
pub fn reproduce_report(cfg: &RunConfig, field: &FieldInput, samples: usize) -> CliResult<ReproduceOutcome> {
    let tol = cfg.tol_or(REPRODUCE_TOL)?;
    let l_max = cfg.l_max_or(6);
    let support = field.support();
    let truncated = support > l_max;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows: Vec<ReproduceRow> = match field {
        FieldInput::Three(u) => {
            // The cache must hold the field even when the kernel is cut below it.
            let cache = build_cache(cfg.params, l_max.max(support))?;
            let draws: Vec<([f64; 3], CVec3)> = (0..samples)
                .map(|_| (sample_ball::<3>(&mut rng, REPRODUCE_RADIUS), sample_z::<3>(&mut rng)))
                .collect();
            draws
                .iter()
                .map(|(x, z)| {
                    let r = reproduce_check(&cache, u, *x, z, l_max)?;
                    Ok(ReproduceRow {
                        x1: x[0],
                        x2: x[1],
                        x3: Some(x[2]),
                        residual: r.residual,
                        u_norm: r.u_norm,
                        relative: relative(r.residual, r.u_norm),
                    })
                })
                .collect::<CliResult<_>>()?
        }
        FieldInput::Two(u) => {
            let cache = build_cache_2d(cfg.params, l_max.max(support))?;
            let draws: Vec<([f64; 2], [C64; 2])> = (0..samples)
                .map(|_| (sample_ball::<2>(&mut rng, REPRODUCE_RADIUS), sample_z::<2>(&mut rng)))
                .collect();
            draws
                .par_iter()
                .map(|(x, z)| {
                    let r = reproduce_check_2d(&cache, u, &PolarPoint::from_cartesian(*x), z, l_max)?;
                    Ok(ReproduceRow {
                        x1: x[0],
                        x2: x[1],
                        x3: None,
                        residual: r.residual,
                        u_norm: r.u_norm,
                        relative: relative(r.residual, r.u_norm),
                    })
                })
                .collect::<CliResult<_>>()?
        }
    };
    let status = if truncated {
        Status::Unjudged
    } else {
        Status::from_pass(rows.iter().all(|r| r.residual <= tol * r.u_norm))
    };
    Ok(ReproduceOutcome {
        rows,
        support,
        l_max,
        truncated,
        status,
    })
}

fn relative(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

pub fn cmd_reproduce(cfg: &RunConfig, field_path: &Path, samples: usize) -> CliResult<Status> {
    let field = FieldInput::parse(cfg, field_path)?;
    let out = reproduce_report(cfg, &field, samples)?;
    if out.truncated {
        eprintln!(
            "warning: field support {} is beyond the kernel truncation {}; residuals include truncation error and are not judged",
            out.support, out.l_max
        );
    }
    write_csv(cfg.out.as_deref(), &out.rows)?;
    let worst = out.rows.iter().map(|r| r.relative).fold(0.0, f64::max);
    status_line("reproduce", out.status, &format!("{} points, worst relative residual {worst:.3e}", out.rows.len()));
    Ok(out.status)
}

/// Finite-difference Navier residuals of a synthesized field at each point.
pub fn synth_residuals(synth: &Synthesizer, params: &ElasticParams, points: &[[f64; 3]]) -> Vec<f64> {
    points
        .par_iter()
        .map(|x| {
            let f = |y: [f64; 3]| synth.eval(y).expect("stencil stays inside the prepared radius");
            fd::navier_residual(&f, *x, params, FD_STEP).relative()
        })
        .collect()
}

pub fn cmd_synth(cfg: &RunConfig, farfield: &Path, grid: &Path, residual: bool) -> CliResult<Status> {
    if cfg.dim != Dim::Three {
        return Err(CliError::Usage("synth is three-dimensional; drop --dim 2".into()));
    }
    let g = FarFieldPattern::from_json(&read_text(farfield)?).map_err(|e| CliError::Input {
        path: farfield.to_path_buf(),
        message: e.to_string(),
    })?;
    let points = read_grid_csv(grid)?;
    let reach = points.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    // Room for the residual stencil.
    let synth = Synthesizer::new(&g, cfg.params, reach + 4.0 * FD_STEP)?;
    let field = synth.eval_many(&points)?;
    let res = residual.then(|| synth_residuals(&synth, &cfg.params, &points));
    write_field_csv(cfg.out.as_deref(), &field, res.as_deref())?;
    let tol = cfg.tol_or(SYNTH_TOL)?;
    let status = match &res {
        Some(r) => Status::from_pass(r.iter().all(|v| *v <= tol)),
        None => Status::Pass,
    };
    let detail = match &res {
        Some(r) => format!("{} points, worst residual {:.3e}", points.len(), r.iter().copied().fold(0.0, f64::max)),
        None => format!("{} points", points.len()),
    };
    status_line("synth", status, &detail);
    Ok(status)
}

/// Slope of log|value| against log l for rows with l in [lo, hi].
pub fn loglog_slope(points: &[(u32, f64)], lo: u32, hi: u32) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(l, v)| (lo..=hi).contains(l) && v.abs() > 0.0)
        .map(|(l, v)| (f64::from(*l).ln(), v.abs().ln()))
        .collect();
    fit_line(&pts).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ParamFlags;

    fn cfg(dim: Dim) -> RunConfig {
        RunConfig::new(dim, &ParamFlags::default()).unwrap()
    }

    #[test]
    fn kernel_at_equal_points_is_checked() {
        let mut c = cfg(Dim::Three);
        c.l_max = Some(4);
        let k = kernel_report(&c, &[0.3, -0.2, 0.5], &[0.3, -0.2, 0.5]).unwrap();
        assert!(k.pass && k.hermitian.is_some());
        let k = kernel_report(&c, &[0.3, -0.2, 0.5], &[1.0, 0.0, 0.0]).unwrap();
        assert!(k.hermitian.is_none());
        assert!(kernel_report(&c, &[0.3, 0.5], &[0.3, 0.5]).is_err());
    }

    #[test]
    fn kernel_refuses_equal_speeds() {
        let mut c = cfg(Dim::Two);
        c.params = ElasticParams::from_wavenumbers(1.0, 1.0).unwrap();
        let e = kernel_report(&c, &[0.3, 0.5], &[0.3, 0.5]).unwrap_err();
        assert_eq!(e.code(), 2);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let pts: Vec<(u32, f64)> = (1..=50).map(|l| (l, 3.0 * f64::from(l).powf(-2.0))).collect();
        assert!((loglog_slope(&pts, 10, 40).unwrap() + 2.0).abs() < 1e-12);
    }
}
