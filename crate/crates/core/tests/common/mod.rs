//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use qcm_core::state::{random_pure_state, ComplexMatrix};
use qcm_core::{Complex64, ControlSetting, DensityMatrix, Observable, ObservablePair};

/// `p(a, b | 1) = <b|S(a,1) rho S(a,1)^dagger|b> / P(1)`, with `S(a,1)` written out by hand and
/// `P(1)` taken from the Kraus sum rather than the closed form.
pub fn operational_joint(rho: &DensityMatrix, pair: &ObservablePair, s: &ControlSetting) -> Vec<Vec<f64>> {
    let d = s.d();
    let (sin, cos) = s.theta().sin_cos();
    let phase = Complex64::from_polar(1.0, s.phi());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let ops: Vec<ComplexMatrix> = (0..d)
        .map(|a| {
            let ket = pair.obs_a().basis().column(a).into_owned();
            let proj = &ket * ket.adjoint();
            let mut op = ComplexMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let id = if i == j { cos / (d as f64).sqrt() } else { 0.0 };
                    op[(i, j)] = (Complex64::new(id, 0.0) + phase * sin * proj[(i, j)]) * h;
                }
            }
            op
        })
        .collect();
    let p1: f64 = ops
        .iter()
        .map(|op| (op * rho.matrix() * op.adjoint()).trace().re)
        .sum();
    (0..d)
        .map(|a| {
            let out = &ops[a] * rho.matrix() * ops[a].adjoint();
            (0..d)
                .map(|b| {
                    let ket = pair.obs_b().basis().column(b).into_owned();
                    (ket.adjoint() * &out * &ket)[(0, 0)].re / p1
                })
                .collect()
        })
        .collect()
}

/// `Tr(B A rho)` by direct operator products.
pub fn ordered_trace(rho: &DensityMatrix, pair: &ObservablePair) -> Complex64 {
    (pair.obs_b().operator() * pair.obs_a().operator() * rho.matrix()).trace()
}

/// `(i/2) Tr([A, B] rho)`.
pub fn commutator_trace(rho: &DensityMatrix, pair: &ObservablePair) -> f64 {
    let a = pair.obs_a().operator();
    let b = pair.obs_b().operator();
    let comm = &a * &b - &b * &a;
    let v = (comm * rho.matrix()).trace() * Complex64::new(0.0, 0.5);
    assert!(v.im.abs() < 1e-12, "commutator expectation must be real");
    v.re
}

/// Random mixed state of rank up to `d` from a convex mixture of random pure states.
pub fn random_mixed_state(d: usize, seed: u64) -> DensityMatrix {
    let k = 1 + (seed as usize % d);
    let mut m = ComplexMatrix::zeros(d, d);
    let mut total = 0.0;
    for j in 0..k {
        let w = 1.0 + ((seed.wrapping_mul(31).wrapping_add(j as u64)) % 7) as f64;
        m += random_pure_state(d, seed.wrapping_mul(1000).wrapping_add(j as u64))
            .unwrap()
            .matrix()
            .scale(w);
        total += w;
    }
    qcm_core::state::validate_state(m.unscale(total)).unwrap()
}

/// Random instance with nontrivial eigenvalues on both observables.
pub struct Instance {
    pub rho: DensityMatrix,
    pub pair: ObservablePair,
    pub setting: ControlSetting,
}

pub fn random_instance(seed: u64, d_min: usize, d_max: usize) -> Instance {
    let d = d_min + (seed as usize % (d_max - d_min + 1));
    let eig = |off: u64| {
        (0..d)
            .map(|k| (k as f64 + 1.0) * (1.0 + 0.1 * off as f64) - 0.5 * d as f64)
            .collect::<Vec<_>>()
    };
    let a = Observable::random(d, seed.wrapping_add(10_000))
        .unwrap()
        .with_eigenvalues(eig(seed % 3))
        .unwrap();
    let b = Observable::random(d, seed.wrapping_add(20_000))
        .unwrap()
        .with_eigenvalues(eig(seed % 5))
        .unwrap();
    let pair = ObservablePair::new(a, b).unwrap();
    let rho = if seed.is_multiple_of(2) {
        random_pure_state(d, seed.wrapping_add(30_000)).unwrap()
    } else {
        random_mixed_state(d, seed.wrapping_add(30_000))
    };
    let frac = |x: u64| (qcm_core::rng::mix64(x) >> 11) as f64 / (1u64 << 53) as f64;
    let theta = std::f64::consts::FRAC_PI_2 * frac(seed.wrapping_mul(2).wrapping_add(1));
    let phi = std::f64::consts::TAU * frac(seed.wrapping_mul(2).wrapping_add(2));
    Instance {
        rho,
        pair,
        setting: ControlSetting::new(d, theta, phi).unwrap(),
    }
}

pub fn max_abs_diff(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    x.iter()
        .flatten()
        .zip(y.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
