use std::path::PathBuf;

use herglotz::ElasticParams;

use crate::error::{CliError, CliResult};

/// Wavenumbers used when neither parameter set is given.
pub const DEFAULT_KP: f64 = 1.0;
pub const DEFAULT_KS: f64 = 2.0;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn from_flag(d: u8) -> CliResult<Self> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(CliError::Usage(format!("--dim must be 2 or 3, got {d}"))),
        }
    }
}

/// Raw parameter flags as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct ParamFlags {
    pub kp: Option<f64>,
    pub ks: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub omega: Option<f64>,
}

impl ParamFlags {
    pub fn wavenumbers(kp: f64, ks: f64) -> Self {
        Self {
            kp: Some(kp),
            ks: Some(ks),
            ..Self::default()
        }
    }

    /// Exactly one complete set, or none (the default wavenumbers).
    pub fn resolve(&self) -> CliResult<ElasticParams> {
        let waves = [self.kp, self.ks];
        let lame = [self.lambda, self.mu, self.rho, self.omega];
        let any_w = waves.iter().any(Option::is_some);
        let any_l = lame.iter().any(Option::is_some);
        let params = match (any_w, any_l) {
            (true, true) => {
                return Err(CliError::Usage(
                    "give either --kp/--ks or --lambda/--mu/--rho/--omega, not both".into(),
                ))
            }
            (false, false) => ElasticParams::from_wavenumbers(DEFAULT_KP, DEFAULT_KS)?,
            (true, false) => match waves {
                [Some(kp), Some(ks)] => ElasticParams::from_wavenumbers(kp, ks)?,
                _ => return Err(CliError::Usage("--kp and --ks must be given together".into())),
            },
            (false, true) => match lame {
                [Some(l), Some(m), Some(r), Some(w)] => ElasticParams::new(l, m, r, w)?,
                _ => {
                    return Err(CliError::Usage(
                        "--lambda, --mu, --rho and --omega must be given together".into(),
                    ))
                }
            },
        };
        Ok(params)
    }
}

/// Everything a verb needs besides its own inputs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dim: Dim,
    pub params: ElasticParams,
    pub l_max: Option<u32>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(dim: Dim, flags: &ParamFlags) -> CliResult<Self> {
        Ok(Self {
            dim,
            params: flags.resolve()?,
            l_max: None,
            tol: None,
            seed: DEFAULT_SEED,
            out: None,
        })
    }

    pub fn l_max_or(&self, default: u32) -> u32 {
        self.l_max.unwrap_or(default)
    }

    pub fn tol_or(&self, default: f64) -> CliResult<f64> {
        match self.tol {
            None => Ok(default),
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(CliError::Usage(format!("--tol must be positive, got {t}"))),
        }
    }
}
