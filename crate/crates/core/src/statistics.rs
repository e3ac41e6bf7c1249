//! Exact statistics of a controlled measurement of A followed by a projective measurement of B.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{success_probability, ControlSetting};
use crate::state::{check_dim, ComplexMatrix, DensityMatrix, ObservablePair};

/// Entries in `[-NEGATIVE_CLIP, 0)` are treated as roundoff and clipped to zero.
pub const NEGATIVE_CLIP: f64 = 1e-14;
/// Smallest `|cos phi|` for which the normalized coherence term is evaluated.
pub const MIN_COS_PHI: f64 = 1e-3;

/// Post-selected joint distribution `p(a, b | 1)` with the success probability that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointOutcomeTable {
    d: usize,
    /// `probs[a][b]`.
    probs: Vec<Vec<f64>>,
    success_prob: f64,
    setting: ControlSetting,
}

impl JointOutcomeTable {
    /// Builds a table, clipping roundoff negatives. Normalization is the caller's
    /// responsibility.
    pub fn new(probs: Vec<Vec<f64>>, success_prob: f64, setting: ControlSetting) -> Result<Self> {
        let d = setting.d();
        check_dim(d, probs.len())?;
        let mut probs = probs;
        for (a, row) in probs.iter_mut().enumerate() {
            check_dim(d, row.len())?;
            for (b, p) in row.iter_mut().enumerate() {
                if *p < -NEGATIVE_CLIP {
                    return Err(Error::NegativeProbability { a, b, value: *p });
                }
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
        }
        Ok(Self {
            d,
            probs,
            success_prob,
            setting,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.probs[a][b]
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    pub fn setting(&self) -> &ControlSetting {
        &self.setting
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }
}

/// Weights of the identity, projective and coherent contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiProbTriple {
    pub p_identity: f64,
    pub p_measurement: f64,
    pub p_coherence: f64,
}

/// Kirkwood-Dirac distribution `rho(a, b) = <b|a><a|rho|b>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexJointDistribution {
    /// `values[(a, b)]`.
    values: ComplexMatrix,
    pair: ObservablePair,
}

impl ComplexJointDistribution {
    pub fn new(values: ComplexMatrix, pair: ObservablePair) -> Result<Self> {
        let d = pair.dim();
        check_dim(d, values.nrows())?;
        check_dim(d, values.ncols())?;
        Ok(Self { values, pair })
    }

    pub fn d(&self) -> usize {
        self.pair.dim()
    }

    pub fn values(&self) -> &ComplexMatrix {
        &self.values
    }

    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.values[(a, b)]
    }

    pub fn pair(&self) -> &ObservablePair {
        &self.pair
    }

    pub fn total(&self) -> Complex64 {
        self.values.sum()
    }

    /// `sum_b rho(a, b)`.
    pub fn marginal_a(&self) -> Vec<Complex64> {
        (0..self.d()).map(|a| self.values.row(a).sum()).collect()
    }

    /// `sum_a rho(a, b)`.
    pub fn marginal_b(&self) -> Vec<Complex64> {
        (0..self.d()).map(|b| self.values.column(b).sum()).collect()
    }

    /// `Re(exp(i phi) rho(a, b)) / cos(phi) = Re rho - tan(phi) Im rho`.
    pub fn phase_component(&self, phi: f64) -> Result<Vec<Vec<f64>>> {
        let cos = phi.cos();
        if cos.abs() <= MIN_COS_PHI {
            return Err(Error::PhaseSingularity(cos.abs()));
        }
        let tan = phi.tan();
        let d = self.d();
        Ok((0..d)
            .map(|a| {
                (0..d)
                    .map(|b| self.values[(a, b)].re - tan * self.values[(a, b)].im)
                    .collect()
            })
            .collect())
    }
}

fn check_inputs(state: &DensityMatrix, pair: &ObservablePair, setting: &ControlSetting) -> Result<()> {
    check_dim(pair.dim(), state.dim())?;
    check_dim(pair.dim(), setting.d())
}

/// `<a|rho|b>` indexed `(a, b)`.
pub(crate) fn cross_elements(state: &DensityMatrix, pair: &ObservablePair) -> ComplexMatrix {
    pair.obs_a().basis().adjoint() * state.matrix() * pair.obs_b().basis()
}

/// Closed-form `p(a, b | 1)`.
pub fn exact_joint_probability(
    state: &DensityMatrix,
    pair: &ObservablePair,
    setting: &ControlSetting,
) -> Result<JointOutcomeTable> {
    check_inputs(state, pair, setting)?;
    let d = setting.d();
    let df = d as f64;
    let p1 = success_probability(setting);
    let (sin, cos) = setting.theta().sin_cos();
    let phase = Complex64::from_polar(1.0, setting.phi());
    let prob_a = pair.obs_a().probabilities(state)?;
    let prob_b = pair.obs_b().probabilities(state)?;
    let cross = cross_elements(state, pair);
    let norm = 1.0 / (2.0 * df * p1);
    let probs = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let overlap = pair.overlap(a, b);
                    let coherent = (phase * overlap * cross[(a, b)]).re;
                    norm * (cos * cos * prob_b[b]
                        + df * sin * sin * overlap.norm_sqr() * prob_a[a]
                        + 2.0 * df.sqrt() * sin * cos * coherent)
                })
                .collect()
        })
        .collect();
    JointOutcomeTable::new(probs, p1, *setting)
}

pub fn complex_joint_probability(
    state: &DensityMatrix,
    pair: &ObservablePair,
) -> Result<ComplexJointDistribution> {
    check_dim(pair.dim(), state.dim())?;
    let cross = cross_elements(state, pair);
    let d = pair.dim();
    let values = ComplexMatrix::from_fn(d, d, |a, b| pair.overlap(a, b) * cross[(a, b)]);
    ComplexJointDistribution::new(values, pair.clone())
}

pub fn decompose(setting: &ControlSetting) -> QuasiProbTriple {
    let (sin, cos) = setting.theta().sin_cos();
    let w = 1.0 / (2.0 * success_probability(setting));
    QuasiProbTriple {
        p_identity: w * cos * cos,
        p_measurement: w * sin * sin,
        p_coherence: w * (2.0 * setting.phi().cos() / setting.sqrt_d()) * sin * cos,
    }
}

/// The three normalized distributions whose `QuasiProbTriple`-weighted sum is `p(a, b | 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedTable {
    pub triple: QuasiProbTriple,
    /// `(1/d) <b|rho|b>`.
    pub identity_term: Vec<Vec<f64>>,
    /// `|<b|a>|^2 <a|rho|a>`.
    pub measurement_term: Vec<Vec<f64>>,
    /// `Re(exp(i phi) rho(a, b)) / cos(phi)`.
    pub coherence_term: Vec<Vec<f64>>,
}

impl DecomposedTable {
    pub fn recombine(&self) -> Vec<Vec<f64>> {
        let t = &self.triple;
        let d = self.identity_term.len();
        (0..d)
            .map(|a| {
                (0..d)
                    .map(|b| {
                        t.p_identity * self.identity_term[a][b]
                            + t.p_measurement * self.measurement_term[a][b]
                            + t.p_coherence * self.coherence_term[a][b]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Splits the exact statistics into identity, projective and coherent contributions.
///
/// Fails with [`Error::PhaseSingularity`] when `|cos phi| <= 1e-3`, where the normalized
/// coherence term is undefined.
pub fn decompose_statistics(
    state: &DensityMatrix,
    pair: &ObservablePair,
    setting: &ControlSetting,
) -> Result<DecomposedTable> {
    check_inputs(state, pair, setting)?;
    let d = setting.d();
    let prob_a = pair.obs_a().probabilities(state)?;
    let prob_b = pair.obs_b().probabilities(state)?;
    let overlaps = pair.overlap_probabilities();
    let coherence_term = complex_joint_probability(state, pair)?.phase_component(setting.phi())?;
    let identity_term = (0..d)
        .map(|_| prob_b.iter().map(|p| p / d as f64).collect())
        .collect();
    let measurement_term = (0..d)
        .map(|a| (0..d).map(|b| overlaps[b][a] * prob_a[a]).collect())
        .collect();
    Ok(DecomposedTable {
        triple: decompose(setting),
        identity_term,
        measurement_term,
        coherence_term,
    })
}

pub fn fidelity_from_decomposition(triple: &QuasiProbTriple, d: usize) -> f64 {
    let d = d as f64;
    1.0 - (d - 1.0) / d * triple.p_identity
}

pub fn dephasing_from_decomposition(triple: &QuasiProbTriple) -> f64 {
    1.0 - triple.p_measurement
}

/// `sum_{a,b} A_a B_b rho(a, b)`, which equals `Tr(B A rho)`.
pub fn complex_correlation(dist: &ComplexJointDistribution) -> Complex64 {
    let ea = dist.pair().obs_a().eigenvalues();
    let eb = dist.pair().obs_b().eigenvalues();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, &va) in ea.iter().enumerate() {
        for (b, &vb) in eb.iter().enumerate() {
            acc += dist.get(a, b) * (va * vb);
        }
    }
    acc
}

/// `sum_{a,b} A_a B_b Im rho(a, b)`, which equals `(i/2) Tr([A, B] rho)`.
pub fn commutator_expectation(dist: &ComplexJointDistribution) -> f64 {
    complex_correlation(dist).im
}

#[cfg(test)]
#[allow(clippy::approx_constant, clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::state::Observable;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn zx_pair() -> ObservablePair {
        ObservablePair::new(
            Observable::computational(2)
                .unwrap()
                .with_eigenvalues(vec![1.0, -1.0])
                .unwrap(),
            Observable::fourier(2)
                .unwrap()
                .with_eigenvalues(vec![1.0, -1.0])
                .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_branch_only() {
        let pair = ObservablePair::new(
            Observable::random(3, 1).unwrap(),
            Observable::random(3, 2).unwrap(),
        )
        .unwrap();
        let rho = crate::state::random_pure_state(3, 5).unwrap();
        let t = exact_joint_probability(&rho, &pair, &ControlSetting::new(3, 0.0, 0.9).unwrap()).unwrap();
        let pb = pair.obs_b().probabilities(&rho).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_abs_diff_eq!(t.get(a, b), pb[b] / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projective_branch_only() {
        let pair = ObservablePair::new(
            Observable::random(3, 1).unwrap(),
            Observable::random(3, 2).unwrap(),
        )
        .unwrap();
        let rho = crate::state::random_pure_state(3, 5).unwrap();
        let t =
            exact_joint_probability(&rho, &pair, &ControlSetting::new(3, FRAC_PI_2, 0.9).unwrap()).unwrap();
        let pa = pair.obs_a().probabilities(&rho).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_abs_diff_eq!(
                    t.get(a, b),
                    pa[a] * pair.overlap(a, b).norm_sqr(),
                    epsilon = 1e-12
                );
            }
        }
        assert_abs_diff_eq!(t.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kirkwood_dirac_examples() {
        let pair = zx_pair();
        let dist = complex_joint_probability(&DensityMatrix::computational(2, 0).unwrap(), &pair).unwrap();
        for b in 0..2 {
            assert_abs_diff_eq!(dist.get(0, b).re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(dist.get(1, b).norm(), 0.0, epsilon = 1e-12);
        }
        let dist = complex_joint_probability(&DensityMatrix::y_plus(2).unwrap(), &pair).unwrap();
        let expected = [[(0.25, -0.25), (0.25, 0.25)], [(0.25, 0.25), (0.25, -0.25)]];
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(dist.get(a, b).re, expected[a][b].0, epsilon = 1e-12);
                assert_abs_diff_eq!(dist.get(a, b).im, expected[a][b].1, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(dist.total().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.total().im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decomposition_examples() {
        let t = decompose(&ControlSetting::new(2, 0.0, 0.3).unwrap());
        assert_eq!((t.p_identity, t.p_measurement, t.p_coherence), (1.0, 0.0, 0.0));
        let t = decompose(&ControlSetting::new(2, FRAC_PI_2, 0.3).unwrap());
        assert_abs_diff_eq!(t.p_identity, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.p_measurement, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.p_coherence, 0.0, epsilon = 1e-15);

        let s = ControlSetting::new(2, FRAC_PI_4, 0.0).unwrap();
        let t = decompose(&s);
        assert_abs_diff_eq!(t.p_identity, 0.2928932188, epsilon = 1e-10);
        assert_abs_diff_eq!(t.p_measurement, 0.2928932188, epsilon = 1e-10);
        assert_abs_diff_eq!(t.p_coherence, 0.4142135624, epsilon = 1e-10);
        assert_abs_diff_eq!(fidelity_from_decomposition(&t, 2), 0.8535533906, epsilon = 1e-10);
        assert_abs_diff_eq!(dephasing_from_decomposition(&t), 0.7071067812, epsilon = 1e-10);

        let unit = QuasiProbTriple {
            p_identity: 1.0,
            p_measurement: 0.0,
            p_coherence: 0.0,
        };
        assert_eq!(fidelity_from_decomposition(&unit, 2), 0.5);
        assert_eq!(dephasing_from_decomposition(&unit), 1.0);
        let proj = QuasiProbTriple {
            p_identity: 0.0,
            p_measurement: 1.0,
            p_coherence: 0.0,
        };
        assert_eq!(fidelity_from_decomposition(&proj, 5), 1.0);
        assert_eq!(dephasing_from_decomposition(&proj), 0.0);
    }

    #[test]
    fn coherence_sign_follows_cos_phi() {
        for &phi in &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0] {
            let t = decompose(&ControlSetting::new(3, 0.6, phi).unwrap());
            assert!(t.p_identity >= 0.0 && t.p_measurement >= 0.0);
            // destructive interference (cos phi < 0) pushes P_I + P_M above one
            if phi.cos() >= 0.0 {
                assert!(t.p_identity <= 1.0 && t.p_measurement <= 1.0);
            }
            assert_eq!(t.p_coherence < 0.0, phi.cos() < 0.0);
            assert_abs_diff_eq!(
                t.p_identity + t.p_measurement + t.p_coherence,
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn phase_singularity_rejected() {
        let pair = zx_pair();
        let rho = DensityMatrix::y_plus(2).unwrap();
        let s = ControlSetting::new(2, FRAC_PI_4, FRAC_PI_2).unwrap();
        assert!(matches!(
            decompose_statistics(&rho, &pair, &s),
            Err(Error::PhaseSingularity(_))
        ));
        // the raw table is still defined
        assert!(exact_joint_probability(&rho, &pair, &s).is_ok());
    }

    #[test]
    fn correlation_examples() {
        let pair = zx_pair();
        let y = DensityMatrix::y_plus(2).unwrap();
        let dist = complex_joint_probability(&y, &pair).unwrap();
        assert_abs_diff_eq!(complex_correlation(&dist).im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(commutator_expectation(&dist), -1.0, epsilon = 1e-12);

        let mixed = complex_joint_probability(&DensityMatrix::maximally_mixed(2).unwrap(), &pair).unwrap();
        assert_abs_diff_eq!(commutator_expectation(&mixed), 0.0, epsilon = 1e-12);
        // Tr(sigma_x sigma_z) / 2 = 0
        assert_abs_diff_eq!(complex_correlation(&mixed).norm(), 0.0, epsilon = 1e-12);

        let a = Observable::random(3, 4).unwrap();
        let same = ObservablePair::new(a.clone(), a.clone()).unwrap();
        let rho = crate::state::random_pure_state(3, 9).unwrap();
        let dist = complex_joint_probability(&rho, &same).unwrap();
        let op = a.operator();
        let expected = (&op * &op * rho.matrix()).trace();
        let c = complex_correlation(&dist);
        assert_abs_diff_eq!(c.re, expected.re, epsilon = 1e-12);
        assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(commutator_expectation(&dist), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_entries() {
        let s = ControlSetting::new(2, 0.1, 0.0).unwrap();
        let t = JointOutcomeTable::new(vec![vec![0.5, -1e-15], vec![0.25, 0.25]], 0.5, s).unwrap();
        assert_eq!(t.get(0, 1), 0.0);
        assert!(matches!(
            JointOutcomeTable::new(vec![vec![0.5, -1e-6], vec![0.25, 0.25]], 0.5, s),
            Err(Error::NegativeProbability { a: 0, b: 1, .. })
        ));
    }
}
