//! Mode unitaries for beam splitters, wave plates and polarizers.
//!
//! Matrices act on column vectors of single-photon mode amplitudes:
//! `U[(out, in)]` is the amplitude for a photon entering mode `in` to leave
//! in mode `out`. Elements act as the identity on every mode they do not
//! name.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quantum::{ModeSet, ModeUnitary, Polarization};

/// Wave-plate axis angle, stored in radians normalised to `[0, π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct WaveplateSetting(f64);

impl WaveplateSetting {
    pub fn from_radians(angle: f64) -> Self {
        let mut a = angle.rem_euclid(PI);
        // rem_euclid can round up to exactly π
        if a >= PI {
            a = 0.0;
        }
        WaveplateSetting(a)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::from_radians(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Sign convention for the half-wave plate.
///
/// `Paper` is the rotation-like form `H → cos2α H + sin2α V`,
/// `V → −sin2α H + cos2α V` (det = +1). `Physical` is the reflection-like
/// Jones matrix of a real retarder (det = −1). Detection probabilities of
/// every state used here agree between the two.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HwpConvention {
    #[default]
    Paper,
    Physical,
}

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn distinct_paths(modes: &ModeSet, labels: &[&str]) -> Result<Vec<usize>> {
    let idx = labels
        .iter()
        .map(|l| modes.path_index(l))
        .collect::<Result<Vec<_>>>()?;
    for (i, p) in idx.iter().enumerate() {
        if idx[..i].contains(p) {
            return Err(Error::config(format!(
                "element ports must be distinct paths, got {labels:?}"
            )));
        }
    }
    Ok(idx)
}

fn mode_index(path: usize, pol: Polarization) -> usize {
    2 * path + if pol == Polarization::H { 0 } else { 1 }
}

/// 50/50 non-polarizing beam splitter fed on `input`:
/// `|H⟩c → (|H⟩a + i|H⟩b)/√2`, `|V⟩c → (|V⟩a − i|V⟩b)/√2`.
///
/// The transmitted path doubles as the splitter's second (vacuum) input and
/// the reflected path is routed back into `input`, which completes the
/// matrix to a unitary without touching any occupied mode.
pub fn npbs_unitary(modes: &ModeSet, input: &str, outputs: (&str, &str)) -> Result<ModeUnitary> {
    let p = distinct_paths(modes, &[input, outputs.0, outputs.1])?;
    let (c, a, b) = (p[0], p[1], p[2]);
    let mut m = CMatrix::identity(modes.dim());
    let r = FRAC_1_SQRT_2;
    for (pol, sign) in [(Polarization::H, 1.0), (Polarization::V, -1.0)] {
        let (ci, ai, bi) = (mode_index(c, pol), mode_index(a, pol), mode_index(b, pol));
        for i in [ci, ai, bi] {
            for j in [ci, ai, bi] {
                m[(i, j)] = cx(0.0, 0.0);
            }
        }
        m[(ai, ci)] = cx(r, 0.0);
        m[(bi, ci)] = cx(0.0, sign * r);
        m[(ai, ai)] = cx(0.0, sign * r);
        m[(bi, ai)] = cx(r, 0.0);
        m[(ci, bi)] = cx(1.0, 0.0);
    }
    ModeUnitary::new(m)
}

fn polarization_block(modes: &ModeSet, path: &str, block: [[Complex64; 2]; 2]) -> Result<ModeUnitary> {
    let p = modes.path_index(path)?;
    let mut m = CMatrix::identity(modes.dim());
    let (h, v) = (2 * p, 2 * p + 1);
    m[(h, h)] = block[0][0];
    m[(h, v)] = block[0][1];
    m[(v, h)] = block[1][0];
    m[(v, v)] = block[1][1];
    ModeUnitary::new(m)
}

/// Polarization matrix of a half-wave plate at `setting` (rows/cols H, V).
pub fn hwp_matrix(setting: WaveplateSetting, convention: HwpConvention) -> [[Complex64; 2]; 2] {
    let (s, c) = (2.0 * setting.radians()).sin_cos();
    match convention {
        HwpConvention::Paper => [[cx(c, 0.0), cx(-s, 0.0)], [cx(s, 0.0), cx(c, 0.0)]],
        HwpConvention::Physical => [[cx(c, 0.0), cx(s, 0.0)], [cx(s, 0.0), cx(-c, 0.0)]],
    }
}

pub fn hwp_unitary(
    modes: &ModeSet,
    path: &str,
    setting: WaveplateSetting,
    convention: HwpConvention,
) -> Result<ModeUnitary> {
    polarization_block(modes, path, hwp_matrix(setting, convention))
}

/// Polarization matrix `R(θ)·diag(1, i)·R(−θ)` of a quarter-wave plate.
pub fn qwp_matrix(setting: WaveplateSetting) -> [[Complex64; 2]; 2] {
    let (s, c) = setting.radians().sin_cos();
    let i = cx(0.0, 1.0);
    let one = cx(1.0, 0.0);
    // R(θ) diag(1,i) R(-θ) expanded
    [
        [one * c * c + i * s * s, (one - i) * c * s],
        [(one - i) * c * s, one * s * s + i * c * c],
    ]
}

pub fn qwp_unitary(modes: &ModeSet, path: &str, setting: WaveplateSetting) -> Result<ModeUnitary> {
    polarization_block(modes, path, qwp_matrix(setting))
}

/// Polarizing beam splitter: H on `input` goes to the transmitted path, V to
/// the reflected path. Implemented as two mode transpositions.
pub fn pbs_routing(modes: &ModeSet, input: &str, outputs: (&str, &str)) -> Result<ModeUnitary> {
    let p = distinct_paths(modes, &[input, outputs.0, outputs.1])?;
    let (c, t, r) = (p[0], p[1], p[2]);
    let mut m = CMatrix::identity(modes.dim());
    let zero = cx(0.0, 0.0);
    let one = cx(1.0, 0.0);
    for (from, to) in [
        (mode_index(c, Polarization::H), mode_index(t, Polarization::H)),
        (mode_index(c, Polarization::V), mode_index(r, Polarization::V)),
    ] {
        m[(from, from)] = zero;
        m[(to, to)] = zero;
        m[(to, from)] = one;
        m[(from, to)] = one;
    }
    ModeUnitary::new(m)
}

/// Product of `elements` in application order (first element acts first).
pub fn compose(elements: &[ModeUnitary]) -> Result<ModeUnitary> {
    let (first, rest) = elements
        .split_first()
        .ok_or_else(|| Error::config("cannot compose an empty element list"))?;
    rest.iter().try_fold(first.clone(), |acc, u| acc.then(u))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Npbs,
    Hwp,
    Qwp,
    Pbs,
}

/// Declarative description of one optical element in a circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSpec {
    pub kind: ElementKind,
    pub input: String,
    /// (transmitted, reflected) for splitters; absent for wave plates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<(String, String)>,
    /// Wave-plate axis angle in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
}

impl ElementSpec {
    pub fn npbs(input: &str, transmitted: &str, reflected: &str) -> Self {
        ElementSpec {
            kind: ElementKind::Npbs,
            input: input.into(),
            outputs: Some((transmitted.into(), reflected.into())),
            angle_deg: None,
        }
    }

    pub fn pbs(input: &str, transmitted: &str, reflected: &str) -> Self {
        ElementSpec {
            kind: ElementKind::Pbs,
            input: input.into(),
            outputs: Some((transmitted.into(), reflected.into())),
            angle_deg: None,
        }
    }

    pub fn hwp(path: &str, angle_deg: f64) -> Self {
        ElementSpec {
            kind: ElementKind::Hwp,
            input: path.into(),
            outputs: None,
            angle_deg: Some(angle_deg),
        }
    }

    pub fn qwp(path: &str, angle_deg: f64) -> Self {
        ElementSpec {
            kind: ElementKind::Qwp,
            input: path.into(),
            outputs: None,
            angle_deg: Some(angle_deg),
        }
    }

    pub fn to_unitary(&self, modes: &ModeSet, convention: HwpConvention) -> Result<ModeUnitary> {
        let outputs = || {
            self.outputs
                .as_ref()
                .map(|(t, r)| (t.as_str(), r.as_str()))
                .ok_or_else(|| Error::config(format!("{:?} element on {:?} needs outputs", self.kind, self.input)))
        };
        let setting = || {
            self.angle_deg
                .map(WaveplateSetting::from_degrees)
                .ok_or_else(|| Error::config(format!("{:?} element on {:?} needs an angle", self.kind, self.input)))
        };
        match self.kind {
            ElementKind::Npbs => npbs_unitary(modes, &self.input, outputs()?),
            ElementKind::Pbs => pbs_routing(modes, &self.input, outputs()?),
            ElementKind::Hwp => hwp_unitary(modes, &self.input, setting()?, convention),
            ElementKind::Qwp => qwp_unitary(modes, &self.input, setting()?),
        }
    }
}

/// Builds the circuit unitary for an ordered list of element specs.
pub fn build_circuit(
    modes: &ModeSet,
    specs: &[ElementSpec],
    convention: HwpConvention,
) -> Result<ModeUnitary> {
    let elements = specs
        .iter()
        .map(|s| s.to_unitary(modes, convention))
        .collect::<Result<Vec<_>>>()?;
    compose(&elements)
}
