//! States, observables and basis pairs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Tolerance for algebraic identities (Hermiticity, trace, orthonormality).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive.
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Overlaps at or below this magnitude count as vanishing.
pub const OVERLAP_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, in ascending order.
pub(crate) fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut evals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    evals.sort_by(f64::total_cmp);
    evals
}

pub(crate) fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A validated `d x d` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Pure state `|psi><psi|` from an unnormalized vector.
    pub fn from_pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if psi.len() < 2 {
            return Err(Error::DimensionTooSmall(psi.len()));
        }
        let psi = psi.unscale(norm);
        validate_state(&psi * psi.adjoint())
    }

    /// `|k><k|` in the computational basis.
    pub fn computational(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::IndexOutOfRange { index: k, dim: d });
        }
        let mut psi = ComplexVector::zeros(d);
        psi[k] = ONE;
        Self::from_pure(&psi)
    }

    /// Uniform superposition of all computational states.
    pub fn plus(d: usize) -> Result<Self> {
        Self::from_pure(&ComplexVector::from_element(d, ONE))
    }

    /// `(|0> + i|1>)/sqrt(2)`, the `sigma_y = +1` state embedded in dimension `d`.
    pub fn y_plus(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        let mut psi = ComplexVector::zeros(d);
        psi[0] = ONE;
        psi[1] = Complex64::i();
        Self::from_pure(&psi)
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        validate_state(ComplexMatrix::identity(d, d).unscale(d as f64))
    }
}

/// Checks Hermiticity, unit trace and positivity, in that order.
pub fn validate_state(candidate: ComplexMatrix) -> Result<DensityMatrix> {
    let (rows, cols) = candidate.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows < 2 {
        return Err(Error::DimensionTooSmall(rows));
    }
    let asym = max_abs(&(&candidate - candidate.adjoint()));
    if asym > ALGEBRA_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let trace_err = (candidate.trace() - ONE).norm();
    if trace_err > ALGEBRA_TOL {
        return Err(Error::TraceNotOne(trace_err));
    }
    let min_eval = hermitian_eigenvalues(&candidate)[0];
    if min_eval < -POSITIVITY_TOL {
        return Err(Error::NotPositive(min_eval));
    }
    Ok(DensityMatrix { matrix: candidate })
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SplitMix64) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Haar-random pure state from a normalized complex Gaussian vector.
pub fn random_pure_state(d: usize, seed: u64) -> Result<DensityMatrix> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    let mut rng = SplitMix64::new(seed);
    let psi = gaussian_matrix(d, 1, &mut rng).column(0).into_owned();
    DensityMatrix::from_pure(&psi)
}

/// Haar-random unitary: QR of a complex Gaussian matrix, with the phases of `R`'s diagonal
/// moved onto `Q` so the distribution is unbiased.
pub fn haar_unitary(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = SplitMix64::new(seed);
    let (q, r) = gaussian_matrix(d, d, &mut rng).qr().unpack();
    let mut q = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Observable given by its orthonormal eigenbasis (columns) and real eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    basis: ComplexMatrix,
    eigenvalues: Vec<f64>,
}

impl Observable {
    /// Eigenvalues default to `1, 2, ..., d` when `eigenvalues` is `None`.
    pub fn new(basis: ComplexMatrix, eigenvalues: Option<Vec<f64>>) -> Result<Self> {
        let (rows, cols) = basis.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let d = rows;
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        let gram = basis.adjoint() * &basis;
        let dev = max_abs(&(gram - ComplexMatrix::identity(d, d)));
        if dev > ALGEBRA_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        let eigenvalues = eigenvalues.unwrap_or_else(|| (1..=d).map(|k| k as f64).collect());
        if eigenvalues.len() != d {
            return Err(Error::EigenvalueCount {
                expected: d,
                got: eigenvalues.len(),
            });
        }
        Ok(Self { basis, eigenvalues })
    }

    pub fn computational(d: usize) -> Result<Self> {
        Self::new(ComplexMatrix::identity(d, d), None)
    }

    /// `<j|F|k> = exp(2 pi i j k / d) / sqrt(d)`; mutually unbiased with the computational basis.
    pub fn fourier(d: usize) -> Result<Self> {
        let norm = 1.0 / (d as f64).sqrt();
        let basis = ComplexMatrix::from_fn(d, d, |j, k| {
            let angle = 2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64;
            Complex64::from_polar(norm, angle)
        });
        Self::new(basis, None)
    }

    pub fn random(d: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        Self::new(haar_unitary(d, seed), None)
    }

    pub fn with_eigenvalues(self, eigenvalues: Vec<f64>) -> Result<Self> {
        Self::new(self.basis, Some(eigenvalues))
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Unitary whose columns are the eigenvectors.
    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ket(&self, a: usize) -> ComplexVector {
        self.basis.column(a).into_owned()
    }

    pub fn projector(&self, a: usize) -> ComplexMatrix {
        let ket = self.basis.column(a);
        ket * ket.adjoint()
    }

    /// `sum_a A_a |a><a|`.
    pub fn operator(&self) -> ComplexMatrix {
        let diag = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        &self.basis * diag * self.basis.adjoint()
    }

    /// `<a|rho|a>` for every `a`.
    pub fn probabilities(&self, state: &DensityMatrix) -> Result<Vec<f64>> {
        check_dim(self.dim(), state.dim())?;
        let rotated = self.basis.adjoint() * state.matrix() * &self.basis;
        Ok((0..self.dim()).map(|a| rotated[(a, a)].re).collect())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Observable `A` measured first (controlled) and `B` measured second (projective).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservablePair {
    obs_a: Observable,
    obs_b: Observable,
    /// `overlaps[(b, a)] = <b|a>`.
    overlaps: ComplexMatrix,
    fully_overlapping: bool,
}

impl ObservablePair {
    pub fn new(obs_a: Observable, obs_b: Observable) -> Result<Self> {
        check_dim(obs_a.dim(), obs_b.dim())?;
        let overlaps = obs_b.basis().adjoint() * obs_a.basis();
        let fully_overlapping = overlaps.iter().all(|z| z.norm() > OVERLAP_TOL);
        Ok(Self {
            obs_a,
            obs_b,
            overlaps,
            fully_overlapping,
        })
    }

    pub fn dim(&self) -> usize {
        self.obs_a.dim()
    }

    pub fn obs_a(&self) -> &Observable {
        &self.obs_a
    }

    pub fn obs_b(&self) -> &Observable {
        &self.obs_b
    }

    /// `<b|a>`.
    pub fn overlap(&self, a: usize, b: usize) -> Complex64 {
        self.overlaps[(b, a)]
    }

    pub fn overlaps(&self) -> &ComplexMatrix {
        &self.overlaps
    }

    /// `|<b|a>|^2` indexed `[b][a]`.
    pub fn overlap_probabilities(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d)
            .map(|b| (0..d).map(|a| self.overlaps[(b, a)].norm_sqr()).collect())
            .collect()
    }

    pub fn fully_overlapping(&self) -> bool {
        self.fully_overlapping
    }

    pub fn min_overlap(&self) -> f64 {
        self.overlaps
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// `(1/2) || x - y ||_1`.
pub fn trace_distance(x: &DensityMatrix, y: &DensityMatrix) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    let diff = hermitian_part(&(x.matrix() - y.matrix()));
    Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|e| e.abs()).sum::<f64>())
}

/// Nearest unit-trace PSD matrix by eigenvalue clipping and renormalization.
///
/// Returns the projected state and its trace distance to the Hermitian part of the input.
pub fn project_to_state(m: &ComplexMatrix) -> Result<(DensityMatrix, f64)> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let herm = hermitian_part(m);
    let eig = herm.clone().symmetric_eigen();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        clipped.iter().map(|e| e / total).collect()
    } else {
        vec![1.0 / rows as f64; rows]
    };
    let mut projected = ComplexMatrix::from_element(rows, cols, ZERO);
    for (k, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            let v = eig.eigenvectors.column(k);
            projected += (v * v.adjoint()).scale(*w);
        }
    }
    let projected = hermitian_part(&projected);
    let distance = 0.5
        * hermitian_eigenvalues(&(&projected - &herm))
            .iter()
            .map(|e| e.abs())
            .sum::<f64>();
    Ok((validate_state(projected)?, distance))
}
