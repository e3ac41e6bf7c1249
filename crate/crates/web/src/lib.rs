//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string, or an error message.

use qcm_core::measurement::{dephasing_factor, measurement_fidelity, success_probability};
use qcm_core::reconstruction::{reconstruct_two_phase, DEFAULT_PHASES};
use qcm_core::sampler::{empirical_joint, run_experiment};
use qcm_core::state::ComplexMatrix;
use qcm_core::statistics::{complex_joint_probability, decompose, exact_joint_probability};
use qcm_core::{ControlSetting, DensityMatrix, ExperimentPlan, Observable, ObservablePair};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const SWEEP_POINTS: usize = 91;
const MAX_DIM: usize = 8;
const MAX_SHOTS: u64 = 5_000_000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn setting(d: usize, theta: f64, phi: f64) -> Result<ControlSetting, String> {
    if d > MAX_DIM {
        return Err(format!("dimension {d} exceeds the demo limit of {MAX_DIM}"));
    }
    ControlSetting::new(d, theta, phi).map_err(err)
}

fn preset_state(name: &str, d: usize) -> Result<DensityMatrix, String> {
    match name {
        "plus" => DensityMatrix::plus(d),
        "y-plus" => DensityMatrix::y_plus(d),
        "maximally-mixed" => DensityMatrix::maximally_mixed(d),
        "computational-0" => DensityMatrix::computational(d, 0),
        other => return Err(format!("unknown state `{other}`")),
    }
    .map_err(err)
}

fn demo_pair(d: usize) -> Result<ObservablePair, String> {
    ObservablePair::new(
        Observable::computational(d).map_err(err)?,
        Observable::fourier(d).map_err(err)?,
    )
    .map_err(err)
}

fn complex_json(m: &ComplexMatrix) -> Value {
    let rows = |f: fn(&qcm_core::Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
            .collect()
    };
    json!({ "re": rows(|z| z.re), "im": rows(|z| z.im) })
}

fn merit(s: &ControlSetting) -> Value {
    let t = decompose(s);
    json!({
        "theta": s.theta(),
        "success_probability": success_probability(s),
        "fidelity": measurement_fidelity(s),
        "dephasing": dephasing_factor(s),
        "p_identity": t.p_identity,
        "p_measurement": t.p_measurement,
        "p_coherence": t.p_coherence,
    })
}

/// Figures of merit at `theta`, plus a sweep over `theta` in `[0, pi/2]` at the same `phi`.
#[wasm_bindgen]
pub fn figures_of_merit(d: usize, theta: f64, phi: f64) -> Result<String, String> {
    let at = merit(&setting(d, theta, phi)?);
    let sweep = (0..SWEEP_POINTS)
        .map(|i| {
            let t = std::f64::consts::FRAC_PI_2 * i as f64 / (SWEEP_POINTS - 1) as f64;
            setting(d, t, phi).map(|s| merit(&s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({ "d": d, "phi": phi, "at": at, "sweep": sweep }).to_string())
}

/// `p(a,b|1)` and `rho(a,b)` for a preset state, with A computational and B Fourier.
#[wasm_bindgen]
pub fn joint_tables(state: &str, d: usize, theta: f64, phi: f64) -> Result<String, String> {
    let s = setting(d, theta, phi)?;
    let rho = preset_state(state, d)?;
    let pair = demo_pair(d)?;
    let table = exact_joint_probability(&rho, &pair, &s).map_err(err)?;
    let kd = complex_joint_probability(&rho, &pair).map_err(err)?;
    Ok(json!({
        "d": d,
        "success_probability": table.success_prob(),
        "joint": table.probs(),
        "complex_joint": complex_json(kd.values()),
    })
    .to_string())
}

/// Simulated two-phase tomography at `phi = +-pi/4` with `shots` runs per phase.
#[wasm_bindgen]
pub fn sampled_tomography(
    state: &str,
    d: usize,
    theta: f64,
    shots: u64,
    seed: u64,
) -> Result<String, String> {
    if shots == 0 || shots > MAX_SHOTS {
        return Err(format!("shots must be between 1 and {MAX_SHOTS}"));
    }
    let rho = preset_state(state, d)?;
    let pair = demo_pair(d)?;
    let settings = vec![
        setting(d, theta, DEFAULT_PHASES.0)?,
        setting(d, theta, DEFAULT_PHASES.1)?,
    ];
    let plan = ExperimentPlan::new(rho.clone(), pair.clone(), settings, shots, seed).map_err(err)?;
    let hists = run_experiment(&plan).map_err(err)?;
    let t1 = empirical_joint(&hists[0]).map_err(err)?;
    let t2 = empirical_joint(&hists[1]).map_err(err)?;
    let report = reconstruct_two_phase(&t1, &t2, &pair, Some(&rho)).map_err(err)?;
    Ok(json!({
        "d": d,
        "truth": complex_json(rho.matrix()),
        "reconstructed": complex_json(report.reconstructed_state.matrix()),
        "trace_distance": report.residuals.trace_distance_to_truth,
        "projection_distance": report.residuals.projection_distance,
        "successes": [hists[0].successes(), hists[1].successes()],
    })
    .to_string())
}
