//! Quantum-controlled measurement operators and single-measurement figures of merit.
//!
//! The control qubit starts in `(|0> + |1>)/sqrt(2)`. The interaction
//! `E(a) = I/sqrt(d) (x) |0><0| + |a><a| (x) |1><1|` is followed by post-selection of the
//! control in `|theta, phi> = cos(theta)|0> + exp(-i phi) sin(theta)|1>`. The orthogonal
//! outcome `sin(theta)|0> - exp(-i phi) cos(theta)|1>` defines the failure branch.
//!
//! Composite operators on system (x) control are `2d x 2d` with the control index slowest:
//! row `c * d + s` holds system state `s` with control state `c`.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{check_dim, ComplexMatrix, DensityMatrix, Observable};

/// Measurement strength `theta` in `[0, pi/2]` and control phase `phi` in `[0, 2pi)`.
///
/// `phi` is reduced modulo `2pi` on construction, so `-pi/4` is stored as `7pi/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSetting")]
pub struct ControlSetting {
    d: usize,
    theta: f64,
    phi: f64,
}

// Constructor only admits finite angles.
impl Eq for ControlSetting {}

#[derive(Deserialize)]
struct RawSetting {
    d: usize,
    theta: f64,
    phi: f64,
}

impl TryFrom<RawSetting> for ControlSetting {
    type Error = Error;

    fn try_from(raw: RawSetting) -> Result<Self> {
        Self::new(raw.d, raw.theta, raw.phi)
    }
}

impl ControlSetting {
    pub fn new(d: usize, theta: f64, phi: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::ThetaOutOfRange(theta));
        }
        if !phi.is_finite() {
            return Err(Error::PhiNotFinite(phi));
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(Self { d, theta, phi })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub(crate) fn sqrt_d(&self) -> f64 {
        (self.d as f64).sqrt()
    }
}

/// Post-selected (success) and orthogonal (failure) Kraus operators for every outcome `a`.
#[derive(Debug, Clone)]
pub struct KrausSet {
    setting: ControlSetting,
    basis_a: Observable,
    success_ops: Vec<ComplexMatrix>,
    failure_ops: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn setting(&self) -> &ControlSetting {
        &self.setting
    }

    pub fn basis_a(&self) -> &Observable {
        &self.basis_a
    }

    /// `S(a, 1)`.
    pub fn success(&self, a: usize) -> &ComplexMatrix {
        &self.success_ops[a]
    }

    /// `S(a, 0)`.
    pub fn failure(&self, a: usize) -> &ComplexMatrix {
        &self.failure_ops[a]
    }

    pub fn success_ops(&self) -> &[ComplexMatrix] {
        &self.success_ops
    }

    pub fn failure_ops(&self) -> &[ComplexMatrix] {
        &self.failure_ops
    }
}

/// `E(a)` on system (x) control, control index slowest.
pub fn build_interaction_operator(basis_a: &Observable, a: usize) -> Result<ComplexMatrix> {
    let d = basis_a.dim();
    if a >= d {
        return Err(Error::IndexOutOfRange { index: a, dim: d });
    }
    let mut e = ComplexMatrix::zeros(2 * d, 2 * d);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    for s in 0..d {
        e[(s, s)] = Complex64::new(inv_sqrt_d, 0.0);
    }
    let proj = basis_a.projector(a);
    e.view_mut((d, d), (d, d)).copy_from(&proj);
    Ok(e)
}

pub fn build_kraus_set(basis_a: &Observable, setting: &ControlSetting) -> Result<KrausSet> {
    let d = setting.d();
    check_dim(d, basis_a.dim())?;
    let (sin, cos) = setting.theta().sin_cos();
    let phase = Complex64::from_polar(1.0, setting.phi());
    let norm = std::f64::consts::FRAC_1_SQRT_2;
    let identity = ComplexMatrix::identity(d, d);
    let mut success_ops = Vec::with_capacity(d);
    let mut failure_ops = Vec::with_capacity(d);
    for a in 0..d {
        let proj = basis_a.projector(a);
        let s1 = identity.scale(cos / setting.sqrt_d()) + &proj * (phase * sin);
        let s0 = identity.scale(sin / setting.sqrt_d()) - &proj * (phase * cos);
        success_ops.push(s1.scale(norm));
        failure_ops.push(s0.scale(norm));
    }
    Ok(KrausSet {
        setting: *setting,
        basis_a: basis_a.clone(),
        success_ops,
        failure_ops,
    })
}

/// Post-selection probability `P(1)`; independent of the system state.
pub fn success_probability(setting: &ControlSetting) -> f64 {
    let (sin, cos) = setting.theta().sin_cos();
    0.5 * (1.0 + (2.0 / setting.sqrt_d()) * sin * cos * setting.phi().cos())
}

/// Probability of reporting the correct outcome for an eigenstate input.
pub fn measurement_fidelity(setting: &ControlSetting) -> f64 {
    let d = setting.d() as f64;
    let cos = setting.theta().cos();
    1.0 - (d - 1.0) / (2.0 * d * success_probability(setting)) * cos * cos
}

/// Factor `eta` multiplying every coherence `<a|rho|a'>`, `a != a'`, after a post-selected
/// measurement.
pub fn dephasing_factor(setting: &ControlSetting) -> f64 {
    let sin = setting.theta().sin();
    1.0 - sin * sin / (2.0 * success_probability(setting))
}

/// Output state averaged over outcomes `a`, conditioned on successful post-selection.
pub fn apply_nonselective(state: &DensityMatrix, kraus: &KrausSet) -> Result<DensityMatrix> {
    check_dim(kraus.setting().d(), state.dim())?;
    let rho = state.matrix();
    let d = state.dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for s in kraus.success_ops() {
        out += s * rho * s.adjoint();
    }
    let out = out.unscale(success_probability(kraus.setting()));
    // roundoff only; the map is Hermiticity preserving
    crate::state::validate_state(crate::state::hermitian_part(&out))
}
