//! Subcommand implementations. Each returns the text to write; the binary decides where.

use qcm_core::measurement::{dephasing_factor, measurement_fidelity, success_probability};
use qcm_core::reconstruction::{
    reconstruct_fourier, reconstruct_two_phase, snr_summary, snr_to_csv, ReconstructionReport, SnrPlan,
};
use qcm_core::rng::sub_seed;
use qcm_core::sampler::{empirical_joint, histograms_from_json, histograms_to_csv, run_experiment};
use qcm_core::state::ComplexMatrix;
use qcm_core::statistics::{complex_joint_probability, decompose, exact_joint_probability};
use qcm_core::{ControlSetting, CountHistogram, ExperimentPlan, JointOutcomeTable};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, Format, Method};
use crate::error::{invalid, CliError};

pub const MIN_SNR_SEEDS: usize = 10;

/// Text produced by a command. `extra` holds companion files as `(suffix, contents)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub main: String,
    pub extra: Vec<(&'static str, String)>,
}

impl Output {
    fn single(main: String) -> Self {
        Self {
            main,
            extra: Vec::new(),
        }
    }
}

fn settings(exp: &Experiment, d: usize) -> Result<Vec<ControlSetting>, CliError> {
    let mut out = Vec::new();
    for &theta in &exp.thetas {
        for &phi in &exp.phis {
            out.push(ControlSetting::new(d, theta, phi).map_err(|e| invalid(format!("theta/phi: {e}")))?);
        }
    }
    Ok(out)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn complex_json(m: &ComplexMatrix) -> Value {
    let (rows, cols) = m.shape();
    let re: Vec<Vec<f64>> = (0..rows)
        .map(|i| (0..cols).map(|j| m[(i, j)].re).collect())
        .collect();
    let im: Vec<Vec<f64>> = (0..rows)
        .map(|i| (0..cols).map(|j| m[(i, j)].im).collect())
        .collect();
    json!({ "re": re, "im": im })
}

/// P(1), F, eta, the decomposition weights, `p(a,b|1)` per setting and the exact `rho(a,b)`.
pub fn exact(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let exp = cfg.resolve()?;
    let d = cfg.dimension;
    let kd = complex_joint_probability(&exp.state, &exp.pair)?;
    let mut rows = Vec::new();
    for s in settings(&exp, d)? {
        let table = exact_joint_probability(&exp.state, &exp.pair, &s)?;
        rows.push((s, table));
    }
    let text = match cfg.format {
        Format::Json => {
            let per_setting: Vec<Value> = rows
                .iter()
                .map(|(s, t)| {
                    let triple = decompose(s);
                    json!({
                        "theta": s.theta(),
                        "phi": s.phi(),
                        "success_probability": success_probability(s),
                        "fidelity": measurement_fidelity(s),
                        "dephasing": dephasing_factor(s),
                        "p_identity": triple.p_identity,
                        "p_measurement": triple.p_measurement,
                        "p_coherence": triple.p_coherence,
                        "joint": t.probs(),
                    })
                })
                .collect();
            pretty(&json!({ "d": d, "settings": per_setting, "complex_joint": complex_json(kd.values()) }))
        }
        Format::Csv => {
            let mut out = String::from("theta,phi,quantity,a,b,value\n");
            for (s, t) in &rows {
                let (th, ph) = (s.theta(), s.phi());
                let triple = decompose(s);
                let scalars = [
                    ("success_probability", success_probability(s)),
                    ("fidelity", measurement_fidelity(s)),
                    ("dephasing", dephasing_factor(s)),
                    ("p_identity", triple.p_identity),
                    ("p_measurement", triple.p_measurement),
                    ("p_coherence", triple.p_coherence),
                ];
                for (name, v) in scalars {
                    out.push_str(&format!("{th},{ph},{name},,,{v}\n"));
                }
                for a in 0..d {
                    for b in 0..d {
                        out.push_str(&format!("{th},{ph},p,{a},{b},{}\n", t.get(a, b)));
                    }
                }
            }
            for a in 0..d {
                for b in 0..d {
                    let z = kd.get(a, b);
                    out.push_str(&format!(",,rho_re,{a},{b},{}\n", z.re));
                    out.push_str(&format!(",,rho_im,{a},{b},{}\n", z.im));
                }
            }
            out
        }
    };
    Ok(Output::single(text))
}

fn require_shots(cfg: &ExperimentConfig, what: &str) -> Result<u64, CliError> {
    match cfg.shots {
        Some(0) => Err(invalid("shots: must be positive")),
        Some(n) => Ok(n),
        None => Err(invalid(format!("shots: not set; {what}"))),
    }
}

fn sampled(cfg: &ExperimentConfig, exp: &Experiment, shots: u64) -> Result<Vec<CountHistogram>, CliError> {
    let plan = ExperimentPlan::new(
        exp.state.clone(),
        exp.pair.clone(),
        settings(exp, cfg.dimension)?,
        shots,
        cfg.seed,
    )?;
    Ok(run_experiment(&plan)?)
}

/// Count histograms per setting and the empirical `p(a,b|1)` tables.
pub fn sample(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let shots = require_shots(cfg, "use `qcm exact` for exact statistics")?;
    let exp = cfg.resolve()?;
    let hists = sampled(cfg, &exp, shots)?;
    let tables = hists.iter().map(empirical_joint).collect::<Result<Vec<_>, _>>()?;
    Ok(match cfg.format {
        Format::Json => {
            let empirical: Vec<Value> = hists
                .iter()
                .zip(&tables)
                .map(|(h, t)| {
                    json!({
                        "theta": h.setting.theta(),
                        "phi": h.setting.phi(),
                        "successes": h.successes(),
                        "total_shots": h.total_shots,
                        "joint": t.probs(),
                    })
                })
                .collect();
            Output::single(pretty(&json!({ "histograms": hists, "empirical": empirical })))
        }
        Format::Csv => {
            let mut emp = String::from("setting_index,theta,phi,a,b,probability\n");
            for (i, t) in tables.iter().enumerate() {
                let s = t.setting();
                for a in 0..cfg.dimension {
                    for b in 0..cfg.dimension {
                        emp.push_str(&format!(
                            "{i},{},{},{a},{b},{}\n",
                            s.theta(),
                            s.phi(),
                            t.get(a, b)
                        ));
                    }
                }
            }
            Output {
                main: histograms_to_csv(&hists),
                extra: vec![("empirical", emp)],
            }
        }
    })
}

/// Reads histograms written by `qcm sample --format json`, or a bare histogram array.
pub fn parse_histograms(text: &str) -> Result<Vec<CountHistogram>, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| invalid(format!("histogram file: {e}")))?;
    let hists = match value {
        Value::Object(mut map) => map
            .remove("histograms")
            .ok_or_else(|| invalid("histogram file: no `histograms` key"))?,
        other => other,
    };
    Ok(histograms_from_json(&hists.to_string())?)
}

fn single_theta(exp: &Experiment) -> Result<f64, CliError> {
    match exp.thetas.as_slice() {
        [t] => Ok(*t),
        ts => Err(invalid(format!(
            "theta: reconstruction takes one strength, got {}",
            ts.len()
        ))),
    }
}

/// Two-phase or Fourier reconstruction followed by tomography.
///
/// Tables come from `histograms` when given, otherwise from sampling (`shots` set) or the
/// exact statistics.
pub fn reconstruct(cfg: &ExperimentConfig, histograms: Option<&str>) -> Result<Output, CliError> {
    let exp = cfg.resolve()?;
    let d = cfg.dimension;
    let theta = single_theta(&exp)?;
    let tables: Vec<JointOutcomeTable> = match histograms {
        Some(text) => {
            let hists = parse_histograms(text)?;
            if hists.is_empty() {
                return Err(invalid("histogram file: no histograms"));
            }
            for h in &hists {
                if h.setting.d() != d {
                    return Err(invalid(format!(
                        "histogram file: dimension {} but config has {d}",
                        h.setting.d()
                    )));
                }
                if (h.setting.theta() - theta).abs() > 1e-12 {
                    return Err(invalid(format!(
                        "histogram file: theta {} does not match config theta {theta}",
                        h.setting.theta()
                    )));
                }
            }
            hists.iter().map(empirical_joint).collect::<Result<_, _>>()?
        }
        None => match cfg.shots {
            Some(shots) => sampled(cfg, &exp, shots)?
                .iter()
                .map(empirical_joint)
                .collect::<Result<_, _>>()?,
            None => settings(&exp, d)?
                .iter()
                .map(|s| exact_joint_probability(&exp.state, &exp.pair, s))
                .collect::<Result<_, _>>()?,
        },
    };
    let truth = Some(&exp.state);
    let report = match cfg.method.unwrap_or_default() {
        Method::TwoPhase => match tables.as_slice() {
            [only] => {
                let t = only.setting().phi().tan();
                return Err(qcm_core::Error::PhasesNotIndependent(t, t).into());
            }
            [first, second, ..] => reconstruct_two_phase(first, second, &exp.pair, truth)?,
            [] => unreachable!("settings are never empty"),
        },
        Method::Fourier => reconstruct_fourier(&tables, &exp.pair, truth)?,
    };
    Ok(Output::single(match cfg.format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        Format::Csv => report_csv(&report),
    }))
}

fn report_csv(report: &ReconstructionReport) -> String {
    let mut out = String::from("table,row,col,re,im\n");
    for (name, m) in [
        ("complex_joint", report.complex_joint.values()),
        ("reconstructed_state", report.reconstructed_state.matrix()),
    ] {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push_str(&format!("{name},{i},{j},{},{}\n", m[(i, j)].re, m[(i, j)].im));
            }
        }
    }
    let r = &report.residuals;
    out.push_str(&format!("projection_distance,,,{},\n", r.projection_distance));
    out.push_str(&format!("max_joint_residual,,,{},\n", r.max_joint_residual));
    if let Some(t) = r.trace_distance_to_truth {
        out.push_str(&format!("trace_distance_to_truth,,,{t},\n"));
    }
    out
}

/// RMS error of the two-phase estimate per strength, averaged over seeds.
pub fn snr(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let events = require_shots(cfg, "SNR requires finite shots")?;
    let exp = cfg.resolve()?;
    if exp.thetas.len() < 2 {
        return Err(invalid("theta: snr needs at least two strengths to compare"));
    }
    let phases = match exp.phis.as_slice() {
        [p1, p2, ..] => (*p1, *p2),
        _ => return Err(invalid("phi: snr needs two phases")),
    };
    let n = cfg.seeds.unwrap_or(MIN_SNR_SEEDS);
    if n < MIN_SNR_SEEDS {
        return Err(invalid(format!("seeds: need at least {MIN_SNR_SEEDS}, got {n}")));
    }
    let plan = SnrPlan {
        state: exp.state.clone(),
        pair: exp.pair.clone(),
        thetas: exp.thetas.clone(),
        phases,
        post_selected_events: Some(events),
        seeds: (0..n as u64).map(|i| sub_seed(cfg.seed, i)).collect(),
    };
    let rows = snr_summary(&plan)?;
    Ok(Output::single(match cfg.format {
        Format::Csv => snr_to_csv(&rows),
        Format::Json => pretty(&json!(rows)),
    }))
}
