//! Seeded Monte Carlo simulation of finite-statistics experiments.
//!
//! Each shot draws a triple `(a, c, b)`: the controlled-measurement outcome `a`, the control
//! qubit outcome `c` (0 = failure, 1 = success) and the final outcome `b`. Categories are
//! flattened `a`-major, then `c`, then `b`, i.e. index `a * 2d + c * d + b`, and sampled by
//! inverse CDF with uniforms from [`SplitMix64`]. Setting `i` of a plan uses the sub-stream
//! [`sub_seed`]`(seed, i)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{build_kraus_set, ControlSetting};
use crate::rng::{sub_seed, SplitMix64};
use crate::state::{check_dim, DensityMatrix, ObservablePair};
use crate::statistics::JointOutcomeTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    Failure = 0,
    Success = 1,
}

impl Control {
    pub const ALL: [Control; 2] = [Control::Failure, Control::Success];
}

/// `Pr(a, c, b)` over all `2 d^2` outcome triples.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    d: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn index(d: usize, a: usize, c: Control, b: usize) -> usize {
        a * 2 * d + (c as usize) * d + b
    }

    pub fn get(&self, a: usize, c: Control, b: usize) -> f64 {
        self.probs[Self::index(self.d, a, c, b)]
    }

    /// Flattened probabilities in sampling order.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn control_marginal(&self, c: Control) -> f64 {
        let d = self.d;
        (0..d)
            .flat_map(|a| (0..d).map(move |b| (a, b)))
            .map(|(a, b)| self.get(a, c, b))
            .sum()
    }

    /// `Pr(a, b | c = 1)` computed through the Kraus operators.
    pub fn conditional_success(&self) -> Vec<Vec<f64>> {
        let p1 = self.control_marginal(Control::Success);
        (0..self.d)
            .map(|a| {
                (0..self.d)
                    .map(|b| self.get(a, Control::Success, b) / p1)
                    .collect()
            })
            .collect()
    }
}

/// `Pr(a, c, b) = <b| S(a, c) rho S(a, c)^dagger |b>`.
pub fn outcome_distribution(
    state: &DensityMatrix,
    pair: &ObservablePair,
    setting: &ControlSetting,
) -> Result<OutcomeDistribution> {
    let d = setting.d();
    check_dim(d, pair.dim())?;
    check_dim(d, state.dim())?;
    let kraus = build_kraus_set(pair.obs_a(), setting)?;
    let ub = pair.obs_b().basis();
    let mut probs = vec![0.0; 2 * d * d];
    for a in 0..d {
        for c in Control::ALL {
            let op = match c {
                Control::Success => kraus.success(a),
                Control::Failure => kraus.failure(a),
            };
            let out = ub.adjoint() * op * state.matrix() * op.adjoint() * ub;
            for b in 0..d {
                probs[OutcomeDistribution::index(d, a, c, b)] = out[(b, b)].re.max(0.0);
            }
        }
    }
    Ok(OutcomeDistribution { d, probs })
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    state: DensityMatrix,
    pair: ObservablePair,
    settings: Vec<ControlSetting>,
    shots_per_setting: u64,
    seed: u64,
}

impl ExperimentPlan {
    pub fn new(
        state: DensityMatrix,
        pair: ObservablePair,
        settings: Vec<ControlSetting>,
        shots_per_setting: u64,
        seed: u64,
    ) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::InvalidPlan("no control settings".into()));
        }
        if shots_per_setting == 0 {
            return Err(Error::InvalidPlan("shots_per_setting must be at least 1".into()));
        }
        check_dim(pair.dim(), state.dim())?;
        for s in &settings {
            check_dim(pair.dim(), s.d())?;
        }
        Ok(Self {
            state,
            pair,
            settings,
            shots_per_setting,
            seed,
        })
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn pair(&self) -> &ObservablePair {
        &self.pair
    }

    pub fn settings(&self) -> &[ControlSetting] {
        &self.settings
    }

    pub fn shots_per_setting(&self) -> u64 {
        self.shots_per_setting
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Counts over `(a, b)` for both control outcomes at one setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountHistogram {
    pub setting: ControlSetting,
    /// `success_counts[a][b]`.
    pub success_counts: Vec<Vec<u64>>,
    pub failure_counts: Vec<Vec<u64>>,
    pub total_shots: u64,
}

impl CountHistogram {
    pub fn empty(setting: ControlSetting) -> Self {
        let d = setting.d();
        Self {
            setting,
            success_counts: vec![vec![0; d]; d],
            failure_counts: vec![vec![0; d]; d],
            total_shots: 0,
        }
    }

    pub fn record(&mut self, a: usize, c: Control, b: usize) {
        match c {
            Control::Success => self.success_counts[a][b] += 1,
            Control::Failure => self.failure_counts[a][b] += 1,
        }
        self.total_shots += 1;
    }

    pub fn successes(&self) -> u64 {
        self.success_counts.iter().flatten().sum()
    }

    pub fn failures(&self) -> u64 {
        self.failure_counts.iter().flatten().sum()
    }

    pub fn success_fraction(&self) -> f64 {
        self.successes() as f64 / self.total_shots as f64
    }

    /// Adds the counts of `other`, which must come from the same setting.
    pub fn merge(&mut self, other: &CountHistogram) -> Result<()> {
        if self.setting != other.setting {
            return Err(Error::InvalidPlan(
                "cannot merge histograms of different settings".into(),
            ));
        }
        let cells = self
            .success_counts
            .iter_mut()
            .zip(&other.success_counts)
            .chain(self.failure_counts.iter_mut().zip(&other.failure_counts));
        for (mine, theirs) in cells {
            for (x, y) in mine.iter_mut().zip(theirs) {
                *x += y;
            }
        }
        self.total_shots += other.total_shots;
        Ok(())
    }

    fn check_consistent(&self) -> Result<()> {
        let d = self.setting.d();
        let shapes_ok = [&self.success_counts, &self.failure_counts]
            .iter()
            .all(|t| t.len() == d && t.iter().all(|row| row.len() == d));
        if !shapes_ok {
            return Err(Error::InvalidPlan(format!("histogram tables are not {d}x{d}")));
        }
        if self.successes() + self.failures() != self.total_shots {
            return Err(Error::InvalidPlan(
                "histogram counts do not sum to total_shots".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `shots` samples from `dist` with the given generator.
pub fn sample_histogram(
    dist: &OutcomeDistribution,
    setting: ControlSetting,
    shots: u64,
    rng: &mut SplitMix64,
) -> CountHistogram {
    let d = dist.d();
    let mut cdf = Vec::with_capacity(dist.as_slice().len());
    let mut acc = 0.0;
    for p in dist.as_slice() {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = dist
        .as_slice()
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(cdf.len() - 1);
    let mut counts = vec![0u64; cdf.len()];
    for _ in 0..shots {
        let u = rng.next_f64() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(last_positive);
        counts[k] += 1;
    }
    let mut hist = CountHistogram::empty(setting);
    for a in 0..d {
        for c in Control::ALL {
            for b in 0..d {
                let n = counts[OutcomeDistribution::index(d, a, c, b)];
                match c {
                    Control::Success => hist.success_counts[a][b] = n,
                    Control::Failure => hist.failure_counts[a][b] = n,
                }
            }
        }
    }
    hist.total_shots = shots;
    hist
}

fn run_setting(plan: &ExperimentPlan, index: usize) -> Result<CountHistogram> {
    let setting = plan.settings[index];
    let dist = outcome_distribution(&plan.state, &plan.pair, &setting)?;
    let mut rng = SplitMix64::new(sub_seed(plan.seed, index as u64));
    Ok(sample_histogram(&dist, setting, plan.shots_per_setting, &mut rng))
}

/// One histogram per setting, in plan order. Output depends only on the plan.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<CountHistogram>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..plan.settings.len())
            .into_par_iter()
            .map(|i| run_setting(plan, i))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..plan.settings.len()).map(|i| run_setting(plan, i)).collect()
    }
}

/// Normalized success counts, with the empirical success fraction as `P(1)`.
pub fn empirical_joint(hist: &CountHistogram) -> Result<JointOutcomeTable> {
    hist.check_consistent()?;
    let successes = hist.successes();
    if successes == 0 {
        return Err(Error::NoSuccessfulPostSelections);
    }
    let n = successes as f64;
    let probs = hist
        .success_counts
        .iter()
        .map(|row| row.iter().map(|&k| k as f64 / n).collect())
        .collect();
    JointOutcomeTable::new(probs, hist.success_fraction(), hist.setting)
}

pub const HISTOGRAM_CSV_HEADER: &str = "setting_index,theta,phi,a,b,control,count";

/// One row per `(setting, a, b, control)`; control is `1` for success and `0` for failure.
pub fn histograms_to_csv(hists: &[CountHistogram]) -> String {
    let mut out = String::from(HISTOGRAM_CSV_HEADER);
    out.push('\n');
    for (i, h) in hists.iter().enumerate() {
        let d = h.setting.d();
        for a in 0..d {
            for b in 0..d {
                for c in [Control::Success, Control::Failure] {
                    let count = match c {
                        Control::Success => h.success_counts[a][b],
                        Control::Failure => h.failure_counts[a][b],
                    };
                    let _ = writeln!(
                        out,
                        "{i},{},{},{a},{b},{},{count}",
                        h.setting.theta(),
                        h.setting.phi(),
                        c as u8
                    );
                }
            }
        }
    }
    out
}

pub fn histograms_to_json(hists: &[CountHistogram]) -> String {
    serde_json::to_string_pretty(hists).expect("histograms serialize")
}

pub fn histograms_from_json(text: &str) -> Result<Vec<CountHistogram>> {
    let hists: Vec<CountHistogram> =
        serde_json::from_str(text).map_err(|e| Error::InvalidPlan(format!("histogram JSON: {e}")))?;
    for h in &hists {
        h.check_consistent()?;
    }
    Ok(hists)
}

#[cfg(test)]
#[allow(clippy::approx_constant, clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::measurement::success_probability;
    use crate::state::{random_pure_state, Observable};
    use crate::statistics::exact_joint_probability;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pair(d: usize) -> ObservablePair {
        ObservablePair::new(
            Observable::computational(d).unwrap(),
            Observable::fourier(d).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn outcome_distribution_properties() {
        let d = 3;
        let p = ObservablePair::new(
            Observable::random(d, 1).unwrap(),
            Observable::random(d, 2).unwrap(),
        )
        .unwrap();
        let rho = random_pure_state(d, 3).unwrap();
        let s = ControlSetting::new(d, 0.7, 2.2).unwrap();
        let dist = outcome_distribution(&rho, &p, &s).unwrap();
        assert!(dist.as_slice().iter().all(|&x| x >= 0.0));
        assert_abs_diff_eq!(dist.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            dist.control_marginal(Control::Success),
            success_probability(&s),
            epsilon = 1e-12
        );
        let exact = exact_joint_probability(&rho, &p, &s).unwrap();
        let cond = dist.conditional_success();
        for a in 0..d {
            for b in 0..d {
                assert_abs_diff_eq!(cond[a][b], exact.get(a, b), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projective_control_marginals_are_half() {
        let rho = random_pure_state(2, 4).unwrap();
        let s = ControlSetting::new(2, FRAC_PI_2, 0.0).unwrap();
        let dist = outcome_distribution(&rho, &pair(2), &s).unwrap();
        assert_abs_diff_eq!(dist.control_marginal(Control::Success), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.control_marginal(Control::Failure), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_strength_marginal_of_a() {
        let d = 4;
        let p = pair(d);
        let rho = random_pure_state(d, 4).unwrap();
        let dist = outcome_distribution(&rho, &p, &ControlSetting::new(d, 0.0, 1.0).unwrap()).unwrap();
        let pa = p.obs_a().probabilities(&rho).unwrap();
        for a in 0..d {
            let success: f64 = (0..d).map(|b| dist.get(a, Control::Success, b)).sum();
            let failure: f64 = (0..d).map(|b| dist.get(a, Control::Failure, b)).sum();
            // post-selected outcomes are random; the orthogonal branch is the projective one
            assert_abs_diff_eq!(success / 0.5, 1.0 / d as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(failure, 0.5 * pa[a], epsilon = 1e-12);
        }
    }

    fn plan(shots: u64, seed: u64) -> ExperimentPlan {
        let settings = vec![
            ControlSetting::new(2, FRAC_PI_4, FRAC_PI_4).unwrap(),
            ControlSetting::new(2, FRAC_PI_4, -FRAC_PI_4).unwrap(),
        ];
        ExperimentPlan::new(DensityMatrix::y_plus(2).unwrap(), pair(2), settings, shots, seed).unwrap()
    }

    #[test]
    fn deterministic_and_complete() {
        let a = run_experiment(&plan(1000, 5)).unwrap();
        let b = run_experiment(&plan(1000, 5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(histograms_to_csv(&a), histograms_to_csv(&b));
        for h in &a {
            assert_eq!(h.successes() + h.failures(), 1000);
        }
        assert_ne!(a, run_experiment(&plan(1000, 6)).unwrap());
    }

    #[test]
    fn plan_validation() {
        let s = vec![ControlSetting::new(2, 0.3, 0.0).unwrap()];
        let rho = DensityMatrix::y_plus(2).unwrap();
        assert!(ExperimentPlan::new(rho.clone(), pair(2), vec![], 10, 0).is_err());
        assert!(ExperimentPlan::new(rho.clone(), pair(2), s.clone(), 0, 0).is_err());
        assert!(ExperimentPlan::new(rho, pair(3), s, 10, 0).is_err());
    }

    #[test]
    fn empirical_joint_cases() {
        let s = ControlSetting::new(2, 0.3, 0.0).unwrap();
        let mut h = CountHistogram::empty(s);
        for _ in 0..7 {
            h.record(1, Control::Success, 0);
        }
        h.record(0, Control::Failure, 1);
        let t = empirical_joint(&h).unwrap();
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.total(), 1.0);
        assert_abs_diff_eq!(t.success_prob(), 7.0 / 8.0, epsilon = 1e-15);

        let mut none = CountHistogram::empty(s);
        none.record(0, Control::Failure, 0);
        assert!(matches!(
            empirical_joint(&none),
            Err(Error::NoSuccessfulPostSelections)
        ));
    }

    #[test]
    fn merge_is_order_independent() {
        let hs = run_experiment(&plan(500, 1)).unwrap();
        let more = run_experiment(&plan(300, 2)).unwrap();
        let mut x = hs[0].clone();
        x.merge(&more[0]).unwrap();
        let mut y = more[0].clone();
        y.merge(&hs[0]).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.total_shots, 800);
        assert!(x.clone().merge(&hs[1]).is_err());
    }

    #[test]
    fn csv_layout() {
        let hs = run_experiment(&plan(10, 3)).unwrap();
        let csv = histograms_to_csv(&hs);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(HISTOGRAM_CSV_HEADER));
        let rows: Vec<_> = lines.collect();
        assert_eq!(rows.len(), 2 * 2 * 2 * 2);
        let total: u64 = rows
            .iter()
            .map(|r| r.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, 20);
        assert!(rows[0].starts_with("0,0.7853981633974483,0.7853981633974483,0,0,1,"));
    }

    #[test]
    fn json_round_trip() {
        let hs = run_experiment(&plan(50, 3)).unwrap();
        let back = histograms_from_json(&histograms_to_json(&hs)).unwrap();
        assert_eq!(hs, back);
        let bad = histograms_to_json(&hs).replace("\"total_shots\": 50", "\"total_shots\": 51");
        assert!(histograms_from_json(&bad).is_err());
    }
}
