use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{on_axis, unit_basis_cartesian, unit_gradients, unit_values, OrthonormalCache};
use crate::domain::{CVec3, ElasticParams, ModeIndex, ReIm, SphPoint, SphTensor, SphVec, C64, ZERO};
use crate::error::{Error, Result};
use crate::hansen::HansenSet;
use crate::inner::VectorField;

/// Σ a 𝓛 + b 𝓜 + c 𝒩 over finitely many modes, with (a, b, c) stored per
/// mode. Degree-0 modes carry only a.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField {
    params: ElasticParams,
    modes: BTreeMap<ModeIndex, [C64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct ModeEntry {
    l: u32,
    m: i32,
    a: ReIm,
    #[serde(default = "zero_pair")]
    b: ReIm,
    #[serde(default = "zero_pair")]
    c: ReIm,
}

fn zero_pair() -> ReIm {
    ReIm(0.0, 0.0)
}

#[derive(Serialize, Deserialize)]
struct CoeffFile {
    modes: Vec<ModeEntry>,
}

impl CoeffField {
    pub fn new(params: ElasticParams) -> Self {
        Self {
            params,
            modes: BTreeMap::new(),
        }
    }

    pub fn from_modes(params: ElasticParams, modes: impl IntoIterator<Item = (ModeIndex, [C64; 3])>) -> Result<Self> {
        let mut f = Self::new(params);
        for (mode, abc) in modes {
            f.set(mode, abc)?;
        }
        Ok(f)
    }

    pub fn set(&mut self, mode: ModeIndex, abc: [C64; 3]) -> Result<()> {
        if mode.l() == 0 && (abc[1] != ZERO || abc[2] != ZERO) {
            return Err(Error::Mode {
                l: 0,
                m: mode.m(),
                reason: "degree 0 has no M or N component",
            });
        }
        if abc.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Invalid(format!("non-finite coefficient at ({}, {})", mode.l(), mode.m())));
        }
        self.modes.insert(mode, abc);
        Ok(())
    }

    pub fn get(&self, mode: ModeIndex) -> [C64; 3] {
        self.modes.get(&mode).copied().unwrap_or([ZERO; 3])
    }

    pub fn params(&self) -> &ElasticParams {
        &self.params
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeIndex, &[C64; 3])> {
        self.modes.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn max_degree(&self) -> Option<u32> {
        self.modes.keys().map(|m| m.l()).max()
    }

    /// The a-terms only.
    pub fn compressional(&self) -> Self {
        self.filtered(|[a, _, _]| [a, ZERO, ZERO])
    }

    /// The b- and c-terms only.
    pub fn shear(&self) -> Self {
        self.filtered(|[_, b, c]| [ZERO, b, c])
    }

    fn filtered(&self, f: impl Fn([C64; 3]) -> [C64; 3]) -> Self {
        Self {
            params: self.params,
            modes: self.modes.iter().map(|(k, v)| (*k, f(*v))).collect(),
        }
    }

    /// Largest coefficient difference over the union of supports.
    pub fn max_abs_diff(&self, other: &CoeffField) -> f64 {
        self.modes
            .keys()
            .chain(other.modes.keys())
            .flat_map(|m| {
                let (x, y) = (self.get(*m), other.get(*m));
                (0..3).map(move |k| (x[k] - y[k]).norm())
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CoeffFile {
            modes: self
                .modes
                .iter()
                .map(|(mode, [a, b, c])| ModeEntry {
                    l: mode.l(),
                    m: mode.m(),
                    a: (*a).into(),
                    b: (*b).into(),
                    c: (*c).into(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Reads `{"modes": [{"l", "m", "a": [re, im], "b": .., "c": ..}]}`;
    /// omitted b and c are zero.
    pub fn from_json(params: ElasticParams, text: &str) -> Result<Self> {
        let file: CoeffFile = serde_json::from_str(text).map_err(|e| Error::Invalid(e.to_string()))?;
        Self::from_modes(
            params,
            file.modes
                .into_iter()
                .map(|e| Ok((ModeIndex::new(e.l, e.m)?, [e.a.into(), e.b.into(), e.c.into()])))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// Compressional (a-terms) and shear (b, c-terms) parts at one point, in
/// Cartesian components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParts {
    pub compressional: CVec3,
    pub shear: CVec3,
}

impl FieldParts {
    pub fn total(&self) -> CVec3 {
        std::array::from_fn(|i| self.compressional[i] + self.shear[i])
    }
}

pub fn eval_parts(cache: &OrthonormalCache, u: &CoeffField, x: [f64; 3]) -> Result<FieldParts> {
    let mut parts = FieldParts {
        compressional: [ZERO; 3],
        shear: [ZERO; 3],
    };
    if u.is_empty() {
        return Ok(parts);
    }
    let modes: Vec<ModeIndex> = u.modes.keys().copied().collect();
    let basis = unit_basis_cartesian(cache, &modes, x)?;
    for (b, abc) in basis.iter().zip(u.modes.values()) {
        for i in 0..3 {
            parts.compressional[i] += abc[0] * b[0][i];
            parts.shear[i] += abc[1] * b[1][i] + abc[2] * b[2][i];
        }
    }
    Ok(parts)
}

pub fn eval_cartesian(cache: &OrthonormalCache, u: &CoeffField, x: [f64; 3]) -> Result<CVec3> {
    Ok(eval_parts(cache, u, x)?.total())
}

/// The field in the local frame at p (any p off the z-axis, including the
/// origin, whose frame is the one `SphPoint::from_cartesian` assigns).
pub fn eval_field(cache: &OrthonormalCache, u: &CoeffField, p: &SphPoint) -> Result<SphVec> {
    let v = eval_cartesian(cache, u, p.to_cartesian())?;
    Ok(SphVec::from_cartesian(&v, &p.frame()))
}

/// A coefficient field with its spherical gradient, for the quadrature
/// inner products.
pub struct ExpansionField<'a> {
    cache: &'a OrthonormalCache,
    coeffs: &'a CoeffField,
    degree: u32,
}

impl<'a> ExpansionField<'a> {
    pub fn new(cache: &'a OrthonormalCache, coeffs: &'a CoeffField) -> Result<Self> {
        let degree = coeffs.max_degree().unwrap_or(0);
        cache.check_degree(degree)?;
        Ok(Self { cache, coeffs, degree })
    }
}

impl VectorField for ExpansionField<'_> {
    fn degree(&self) -> u32 {
        self.degree
    }

    fn value(&self, p: &SphPoint) -> Result<SphVec> {
        Ok(self.value_and_gradient(p)?.0)
    }

    fn gradient(&self, p: &SphPoint) -> Result<SphTensor> {
        Ok(self.value_and_gradient(p)?.1)
    }

    fn value_and_gradient(&self, p: &SphPoint) -> Result<(SphVec, SphTensor)> {
        if on_axis(p) {
            return Err(Error::FrameDegenerate { theta: p.theta });
        }
        let radial = self.cache.unit_radial_row(self.degree, p.r)?;
        let mut v = SphVec::ZERO;
        let mut g = SphTensor::ZERO;
        for (mode, abc) in self.coeffs.modes() {
            let set = HansenSet::new(*mode, p.theta, p.phi)?;
            let f = &radial[mode.l() as usize];
            let vals = unit_values(&set, f);
            let grads = unit_gradients(&set, f);
            for k in 0..3 {
                if abc[k] != ZERO {
                    v += vals[k] * abc[k];
                    g += grads[k] * abc[k];
                }
            }
        }
        Ok((v, g))
    }
}
