//! Recovery of the complex joint distribution and the state from sequential statistics.
//!
//! The pipeline for one phase is: recover the marginals of A and B from the observed table,
//! subtract the identity and projective backgrounds, and divide by the coherence weight. The
//! result is the phase component `Re rho(a,b) - tan(phi) Im rho(a,b)`. Two phases with
//! different `tan(phi)` determine `rho(a, b)`. Alternatively a uniform scan of `phi` gives
//! `rho(a, b)` as the first Fourier coefficient of `p(a, b | phi) P(phi)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{success_probability, ControlSetting};
use crate::sampler::{empirical_joint, run_experiment, ExperimentPlan};
use crate::state::{
    check_dim, project_to_state, trace_distance, validate_state, ComplexMatrix, DensityMatrix, ObservablePair,
};
use crate::statistics::{
    complex_joint_probability, decompose, exact_joint_probability, ComplexJointDistribution,
    JointOutcomeTable, QuasiProbTriple,
};

/// Smallest coherence weight accepted for background subtraction.
pub const MIN_COHERENCE_WEIGHT: f64 = 1e-6;
/// Default phases for two-phase reconstruction (`tan(phi) = +1, -1`).
pub const DEFAULT_PHASES: (f64, f64) = (std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4);

const DEGENERATE_TOL: f64 = 1e-12;

/// Background-subtracted table `Re(exp(i phi) rho(a, b)) / cos(phi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicDistribution {
    pub phi: f64,
    /// `values[a][b]`.
    pub values: Vec<Vec<f64>>,
}

impl IntrinsicDistribution {
    pub fn d(&self) -> usize {
        self.values.len()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.values.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let d = self.d();
        (0..d)
            .map(|b| self.values.iter().map(|row| row[b]).sum())
            .collect()
    }
}

/// Removes the identity and projective backgrounds from `p(a, b | 1)`.
///
/// `overlaps[b][a] = |<b|a>|^2`.
pub fn subtract_background(
    table: &JointOutcomeTable,
    triple: &QuasiProbTriple,
    marg_a: &[f64],
    marg_b: &[f64],
    overlaps: &[Vec<f64>],
) -> Result<IntrinsicDistribution> {
    let d = table.d();
    check_dim(d, marg_a.len())?;
    check_dim(d, marg_b.len())?;
    check_dim(d, overlaps.len())?;
    if triple.p_coherence.abs() <= MIN_COHERENCE_WEIGHT {
        return Err(Error::CoherenceWeightTooSmall(triple.p_coherence.abs()));
    }
    let inv_d = 1.0 / d as f64;
    let values = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    (table.get(a, b)
                        - triple.p_identity * inv_d * marg_b[b]
                        - triple.p_measurement * overlaps[b][a] * marg_a[a])
                        / triple.p_coherence
                })
                .collect()
        })
        .collect();
    Ok(IntrinsicDistribution {
        phi: table.setting().phi(),
        values,
    })
}

/// Marginals `<a|rho|a>` and `<b|rho|b>` recovered from the observed table alone.
pub fn recover_marginals(
    table: &JointOutcomeTable,
    triple: &QuasiProbTriple,
    overlaps: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = table.d();
    check_dim(d, overlaps.len())?;
    if 1.0 - triple.p_identity <= DEGENERATE_TOL {
        return Err(Error::DegenerateDecomposition(
            "P_I = 1, the A outcomes are random",
        ));
    }
    if 1.0 - triple.p_measurement <= DEGENERATE_TOL {
        return Err(Error::DegenerateDecomposition(
            "P_M = 1, B statistics are fully disturbed",
        ));
    }
    let inv_d = 1.0 / d as f64;
    let marg_a: Vec<f64> = (0..d)
        .map(|a| {
            let row: f64 = table.probs()[a].iter().sum();
            (row - triple.p_identity * inv_d) / (1.0 - triple.p_identity)
        })
        .collect();
    let marg_b = (0..d)
        .map(|b| {
            let col: f64 = (0..d)
                .map(|a| table.get(a, b) - triple.p_measurement * overlaps[b][a] * marg_a[a])
                .sum();
            col / (1.0 - triple.p_measurement)
        })
        .collect();
    Ok((marg_a, marg_b))
}

/// Full single-phase pipeline: marginal recovery followed by background subtraction.
pub fn intrinsic_from_table(
    table: &JointOutcomeTable,
    pair: &ObservablePair,
) -> Result<IntrinsicDistribution> {
    check_dim(pair.dim(), table.d())?;
    let triple = decompose(table.setting());
    let overlaps = pair.overlap_probabilities();
    let (marg_a, marg_b) = recover_marginals(table, &triple, &overlaps)?;
    subtract_background(table, &triple, &marg_a, &marg_b, &overlaps)
}

/// Solves `values(phi) = Re rho - tan(phi) Im rho` at two phases for `rho(a, b)`.
pub fn combine_two_phases(
    first: &IntrinsicDistribution,
    second: &IntrinsicDistribution,
    pair: &ObservablePair,
) -> Result<ComplexJointDistribution> {
    let d = pair.dim();
    check_dim(d, first.d())?;
    check_dim(d, second.d())?;
    let (t1, t2) = (first.phi.tan(), second.phi.tan());
    let det = t2 - t1;
    if !det.is_finite() || det.abs() < 1e-9 {
        return Err(Error::PhasesNotIndependent(t1, t2));
    }
    let values = ComplexMatrix::from_fn(d, d, |a, b| {
        let (v1, v2) = (first.values[a][b], second.values[a][b]);
        let im = (v1 - v2) / det;
        Complex64::new(v1 + t1 * im, im)
    });
    ComplexJointDistribution::new(values, pair.clone())
}

/// `rho(a, b)` from a uniform scan of the control phase at fixed `theta`.
///
/// Each table contributes `p(a, b | phi_k) P(phi_k) exp(-i phi_k)`. The average over the
/// scan equals `sin(theta) cos(theta) / (2 sqrt(d)) * rho(a, b)`.
pub fn fourier_extract(
    scan: &[JointOutcomeTable],
    pair: &ObservablePair,
) -> Result<ComplexJointDistribution> {
    let d = pair.dim();
    let first = scan
        .first()
        .ok_or_else(|| Error::NonUniformPhaseGrid("empty scan".into()))?;
    let theta = first.setting().theta();
    for t in scan {
        check_dim(d, t.d())?;
        if t.setting().theta() != theta {
            return Err(Error::NonUniformPhaseGrid(
                "tables mix different theta values".into(),
            ));
        }
    }
    let k = scan.len();
    if k < 4 {
        return Err(Error::NonUniformPhaseGrid(format!(
            "need at least 4 phases, got {k}"
        )));
    }
    check_uniform_grid(scan.iter().map(|t| t.setting().phi()).collect())?;
    let constant = fourier_constant(theta, d);
    if constant.abs() < 1e-12 {
        return Err(Error::DegenerateStrength(theta));
    }
    let coefficients = raw_fourier_coefficients(scan);
    ComplexJointDistribution::new(coefficients.unscale(constant), pair.clone())
}

/// `(1/K) sum_k p(a, b | phi_k) P(phi_k) exp(-i phi_k)` without the strength normalization.
pub fn raw_fourier_coefficients(scan: &[JointOutcomeTable]) -> ComplexMatrix {
    let d = scan[0].d();
    let mut acc = ComplexMatrix::zeros(d, d);
    for t in scan {
        let w = Complex64::from_polar(t.success_prob(), -t.setting().phi());
        for a in 0..d {
            for b in 0..d {
                acc[(a, b)] += w * t.get(a, b);
            }
        }
    }
    acc.unscale(scan.len() as f64)
}

/// `sin(theta) cos(theta) / (2 sqrt(d))`.
pub fn fourier_constant(theta: f64, d: usize) -> f64 {
    let (sin, cos) = theta.sin_cos();
    sin * cos / (2.0 * (d as f64).sqrt())
}

fn check_uniform_grid(mut phis: Vec<f64>) -> Result<()> {
    phis.sort_by(f64::total_cmp);
    let k = phis.len();
    let step = std::f64::consts::TAU / k as f64;
    for (i, phi) in phis.iter().enumerate() {
        let expected = phis[0] + step * i as f64;
        if (phi - expected).abs() > 1e-9 {
            return Err(Error::NonUniformPhaseGrid(format!(
                "phase {i} is {phi}, expected {expected}"
            )));
        }
    }
    Ok(())
}

/// Exact uniform grid `phi_k = 2 pi k / K` at strength `theta`.
pub fn uniform_phase_grid(d: usize, theta: f64, k: usize) -> Result<Vec<ControlSetting>> {
    (0..k)
        .map(|i| ControlSetting::new(d, theta, std::f64::consts::TAU * i as f64 / k as f64))
        .collect()
}

/// `sum_{a,b} |a> rho(a,b) / <b|a> <b|`, before any symmetrization.
pub fn raw_state_matrix(dist: &ComplexJointDistribution) -> Result<ComplexMatrix> {
    let pair = dist.pair();
    let d = pair.dim();
    if !pair.fully_overlapping() {
        for a in 0..d {
            for b in 0..d {
                let o = pair.overlap(a, b).norm();
                if o <= crate::state::OVERLAP_TOL {
                    return Err(Error::VanishingOverlap { a, b, value: o });
                }
            }
        }
    }
    let elements = ComplexMatrix::from_fn(d, d, |a, b| dist.get(a, b) / pair.overlap(a, b));
    Ok(pair.obs_a().basis() * elements * pair.obs_b().basis().adjoint())
}

/// State with the given complex joint distribution.
///
/// The raw matrix is symmetrized and validated. If it is not a physical state, the error
/// carries the nearest physical state and its distance.
pub fn tomography(dist: &ComplexJointDistribution) -> Result<DensityMatrix> {
    let raw = raw_state_matrix(dist)?;
    let herm = crate::state::hermitian_part(&raw);
    match validate_state(herm.clone()) {
        Ok(rho) => Ok(rho),
        Err(e) => {
            let (projected, distance) = project_to_state(&herm)?;
            Err(Error::StateValidationFailed {
                reason: e.to_string(),
                projected: Box::new(projected),
                distance,
            })
        }
    }
}

/// Like [`tomography`], but always returns the nearest physical state with its projection
/// distance (zero when the raw matrix is already valid).
pub fn tomography_projected(dist: &ComplexJointDistribution) -> Result<(DensityMatrix, f64)> {
    match tomography(dist) {
        Ok(rho) => Ok((rho, 0.0)),
        Err(Error::StateValidationFailed {
            projected, distance, ..
        }) => Ok((*projected, distance)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionMethod {
    TwoPhase,
    FourierScan,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Trace distance between the symmetrized raw matrix and the reported state.
    pub projection_distance: f64,
    /// Largest `|rho(a,b) - rho_reconstructed(a,b)|` over the table.
    pub max_joint_residual: f64,
    /// Entrywise `|rho(a,b) - rho_reconstructed(a,b)|`, row-major in `a`.
    pub joint_residual_table: Vec<f64>,
    pub trace_distance_to_truth: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub complex_joint: ComplexJointDistribution,
    pub reconstructed_state: DensityMatrix,
    pub residuals: Residuals,
    pub method: ReconstructionMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTableJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexTableJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let (rows, cols) = m.shape();
        let cells = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j)));
        let (re, im) = cells.map(|(i, j)| (m[(i, j)].re, m[(i, j)].im)).unzip();
        Self { rows, cols, re, im }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n || self.im.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.re.len().min(self.im.len()),
            });
        }
        Ok(ComplexMatrix::from_fn(self.rows, self.cols, |i, j| {
            let k = i * self.cols + j;
            Complex64::new(self.re[k], self.im[k])
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub method: ReconstructionMethod,
    pub d: usize,
    pub complex_joint: ComplexTableJson,
    pub reconstructed_state: ComplexTableJson,
    pub residuals: Residuals,
}

impl ReconstructionReport {
    pub fn new(
        complex_joint: ComplexJointDistribution,
        method: ReconstructionMethod,
        truth: Option<&DensityMatrix>,
    ) -> Result<Self> {
        let (state, projection_distance) = tomography_projected(&complex_joint)?;
        let implied = complex_joint_probability(&state, complex_joint.pair())?;
        let diff = complex_joint.values() - implied.values();
        let joint_residual_table: Vec<f64> = ComplexTableJson::from_matrix(&diff)
            .re
            .iter()
            .zip(ComplexTableJson::from_matrix(&diff).im.iter())
            .map(|(re, im)| re.hypot(*im))
            .collect();
        let max_joint_residual = joint_residual_table.iter().copied().fold(0.0, f64::max);
        let trace_distance_to_truth = truth.map(|t| trace_distance(&state, t)).transpose()?;
        Ok(Self {
            complex_joint,
            reconstructed_state: state,
            residuals: Residuals {
                projection_distance,
                max_joint_residual,
                joint_residual_table,
                trace_distance_to_truth,
            },
            method,
        })
    }

    pub fn to_json_value(&self) -> ReportJson {
        ReportJson {
            method: self.method,
            d: self.complex_joint.d(),
            complex_joint: ComplexTableJson::from_matrix(self.complex_joint.values()),
            reconstructed_state: ComplexTableJson::from_matrix(self.reconstructed_state.matrix()),
            residuals: self.residuals.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("report serializes")
    }
}

pub fn reconstruct_two_phase(
    first: &JointOutcomeTable,
    second: &JointOutcomeTable,
    pair: &ObservablePair,
    truth: Option<&DensityMatrix>,
) -> Result<ReconstructionReport> {
    let i1 = intrinsic_from_table(first, pair)?;
    let i2 = intrinsic_from_table(second, pair)?;
    let joint = combine_two_phases(&i1, &i2, pair)?;
    ReconstructionReport::new(joint, ReconstructionMethod::TwoPhase, truth)
}

pub fn reconstruct_fourier(
    scan: &[JointOutcomeTable],
    pair: &ObservablePair,
    truth: Option<&DensityMatrix>,
) -> Result<ReconstructionReport> {
    let joint = fourier_extract(scan, pair)?;
    ReconstructionReport::new(joint, ReconstructionMethod::FourierScan, truth)
}

/// Direct evaluation of `rho(a, b)` from a known state, followed by tomography.
pub fn reconstruct_exact(state: &DensityMatrix, pair: &ObservablePair) -> Result<ReconstructionReport> {
    let joint = complex_joint_probability(state, pair)?;
    ReconstructionReport::new(joint, ReconstructionMethod::Exact, Some(state))
}

/// Inputs for comparing reconstruction noise across measurement strengths.
#[derive(Debug, Clone)]
pub struct SnrPlan {
    pub state: DensityMatrix,
    pub pair: ObservablePair,
    pub thetas: Vec<f64>,
    pub phases: (f64, f64),
    /// Expected post-selected events per phase; `None` evaluates the exact statistics.
    pub post_selected_events: Option<u64>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub theta: f64,
    /// Mean over seeds of the entrywise RMS error of `Re rho(a, b)`.
    pub rms_error: f64,
    /// Standard error of that mean.
    pub stderr: f64,
}

pub const SNR_CSV_HEADER: &str = "theta,rms_error,stderr";

pub fn snr_to_csv(rows: &[SnrRow]) -> String {
    let mut out = format!("{SNR_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.theta, r.rms_error, r.stderr));
    }
    out
}

fn rms_real_error(estimate: &ComplexJointDistribution, exact: &ComplexJointDistribution) -> f64 {
    let diff = estimate.values() - exact.values();
    let n = diff.len() as f64;
    (diff.iter().map(|z| z.re * z.re).sum::<f64>() / n).sqrt()
}

fn snr_trial(plan: &SnrPlan, exact: &ComplexJointDistribution, theta: f64, seed: u64) -> Result<f64> {
    let d = plan.pair.dim();
    let mut intrinsic = Vec::with_capacity(2);
    for (j, phi) in [plan.phases.0, plan.phases.1].into_iter().enumerate() {
        let setting = ControlSetting::new(d, theta, phi)?;
        let table = match plan.post_selected_events {
            None => exact_joint_probability(&plan.state, &plan.pair, &setting)?,
            Some(events) => {
                let shots = (events as f64 / success_probability(&setting)).round().max(1.0) as u64;
                let sub = crate::rng::sub_seed(seed, j as u64);
                let exp =
                    ExperimentPlan::new(plan.state.clone(), plan.pair.clone(), vec![setting], shots, sub)?;
                empirical_joint(&run_experiment(&exp)?[0])?
            }
        };
        intrinsic.push(intrinsic_from_table(&table, &plan.pair)?);
    }
    let joint = combine_two_phases(&intrinsic[0], &intrinsic[1], &plan.pair)?;
    Ok(rms_real_error(&joint, exact))
}

/// RMS error of the two-phase estimate of `Re rho(a, b)` per strength, sorted by `theta`.
pub fn snr_summary(plan: &SnrPlan) -> Result<Vec<SnrRow>> {
    if plan.thetas.len() < 2 {
        return Err(Error::InvalidPlan(
            "need at least two theta values to compare".into(),
        ));
    }
    if plan.post_selected_events.is_some() && plan.seeds.len() < 10 {
        return Err(Error::InvalidPlan(format!(
            "need at least 10 seeds, got {}",
            plan.seeds.len()
        )));
    }
    if plan.seeds.is_empty() {
        return Err(Error::InvalidPlan("no seeds".into()));
    }
    let exact = complex_joint_probability(&plan.state, &plan.pair)?;
    let mut thetas = plan.thetas.clone();
    thetas.sort_by(f64::total_cmp);

    let jobs: Vec<(usize, u64)> = (0..thetas.len())
        .flat_map(|t| plan.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let run = |&(t, s): &(usize, u64)| snr_trial(plan, &exact, thetas[t], s);
    #[cfg(feature = "parallel")]
    let errors: Vec<f64> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let errors: Vec<f64> = jobs.iter().map(run).collect::<Result<_>>()?;

    let n = plan.seeds.len();
    Ok(thetas
        .iter()
        .zip(errors.chunks(n))
        .map(|(&theta, errs)| {
            let mean = errs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SnrRow {
                theta,
                rms_error: mean,
                stderr: (var / n as f64).sqrt(),
            }
        })
        .collect())
}
