//! Tight-binding models on the square lattice: wrapped-patch Hamiltonians,
//! band functions, two-band Bloch analysis, and the equivalence of
//! position-space and momentum-space evolution.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use thiserror::Error;

use crate::fourier::fft_all_axes;

/// |varpi| below this is treated as a band touching.
pub const DEGENERACY_TOL: f64 = 1e-14;
/// Smallest allowed side length of the wrapped patch.
pub const MIN_TRUNCATION: usize = 4;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(
        "band touching: |varpi| = {varpi_abs:.3e} leaves the band projections undefined"
    )]
    DegeneratePoint { varpi_abs: f64 },
    #[error("state support escapes the declared patch: {0}")]
    Truncation(String),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    SquareSingleBand,
    HoneycombTwoBand,
}

/// A hopping model on a wrapped truncation x truncation patch of the
/// lattice. States live on the patch in row-major order (axis 0 slowest);
/// the two-band model stacks the A sublattice block before the B block.
#[derive(Debug, Clone)]
pub struct TightBindingModel {
    pub kind: LatticeKind,
    pub q1: Complex64,
    pub q2: Complex64,
    pub truncation: usize,
}

impl TightBindingModel {
    pub fn new(
        kind: LatticeKind,
        q1: Complex64,
        q2: Complex64,
        truncation: usize,
    ) -> Result<Self> {
        if truncation < MIN_TRUNCATION {
            return Err(LatticeError::InvalidInput(format!(
                "patch side must be at least {MIN_TRUNCATION}, got {truncation}"
            )));
        }
        for q in [q1, q2] {
            if !(q.re.is_finite() && q.im.is_finite()) {
                return Err(LatticeError::InvalidInput(
                    "hopping amplitudes must be finite".into(),
                ));
            }
        }
        Ok(TightBindingModel {
            kind,
            q1,
            q2,
            truncation,
        })
    }

    pub fn square(q1: Complex64, q2: Complex64, truncation: usize) -> Result<Self> {
        Self::new(LatticeKind::SquareSingleBand, q1, q2, truncation)
    }

    pub fn honeycomb(q1: Complex64, q2: Complex64, truncation: usize) -> Result<Self> {
        Self::new(LatticeKind::HoneycombTwoBand, q1, q2, truncation)
    }

    /// Number of state components on the patch.
    pub fn state_len(&self) -> usize {
        let sites = self.truncation * self.truncation;
        match self.kind {
            LatticeKind::SquareSingleBand => sites,
            LatticeKind::HoneycombTwoBand => 2 * sites,
        }
    }
}

/// The single-band dispersion E(k) = 1 + 2 q1 cos k1 + 2 q2 cos k2.
pub fn band_function_square(q1: f64, q2: f64, k: [f64; 2]) -> f64 {
    1.0 + 2.0 * q1 * k[0].cos() + 2.0 * q2 * k[1].cos()
}

/// Dispersion of the single-band patch symbol for general complex hopping:
/// 1 + 2 Re(q1 e^{i k1}) + 2 Re(q2 e^{i k2}). Coincides with
/// `band_function_square` for real amplitudes.
fn square_symbol(q1: Complex64, q2: Complex64, k: [f64; 2]) -> f64 {
    1.0 + 2.0 * (q1 * Complex64::new(0.0, k[0]).exp()).re
        + 2.0 * (q2 * Complex64::new(0.0, k[1]).exp()).re
}

/// The forward lattice shift (s_j psi)(gamma) = psi(gamma + e_j) on the
/// wrapped patch; a permutation, hence exactly unitary.
pub fn shift_forward(m: usize, axis: usize, psi: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(psi.len(), m * m, "state does not fit the patch");
    assert!(axis < 2);
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    for r in 0..m {
        for c in 0..m {
            let (sr, sc) = if axis == 0 { ((r + 1) % m, c) } else { (r, (c + 1) % m) };
            out[r * m + c] = psi[sr * m + sc];
        }
    }
    out
}

/// The wrapped patch Hamiltonian as a dense Hermitian matrix: the one-band
/// model is 1 + q1 s1 + q2 s2 + h.c.; the two-band model couples the B
/// sublattice into A through 1 + q1 s1^{-1} + q2 s2^{-1} and back by the
/// adjoint.
pub fn patch_hamiltonian(model: &TightBindingModel) -> DMatrix<Complex64> {
    let m = model.truncation;
    let sites = m * m;
    let flat = |r: usize, c: usize| r * m + c;
    let zero = Complex64::new(0.0, 0.0);
    match model.kind {
        LatticeKind::SquareSingleBand => {
            let mut h = DMatrix::from_element(sites, sites, zero);
            for r in 0..m {
                for c in 0..m {
                    let row = flat(r, c);
                    h[(row, row)] += Complex64::new(1.0, 0.0);
                    // (s1 psi)(gamma) = psi(gamma + e1) and its adjoint.
                    let up = flat((r + 1) % m, c);
                    h[(row, up)] += model.q1;
                    h[(up, row)] += model.q1.conj();
                    let right = flat(r, (c + 1) % m);
                    h[(row, right)] += model.q2;
                    h[(right, row)] += model.q2.conj();
                }
            }
            h
        }
        LatticeKind::HoneycombTwoBand => {
            let mut h = DMatrix::from_element(2 * sites, 2 * sites, zero);
            for r in 0..m {
                for c in 0..m {
                    let b_row = sites + flat(r, c);
                    // (H psi)_B = psi_A + q1 psi_A(. - e1) + q2 psi_A(. - e2).
                    let entries = [
                        (flat(r, c), Complex64::new(1.0, 0.0)),
                        (flat((r + m - 1) % m, c), model.q1),
                        (flat(r, (c + m - 1) % m), model.q2),
                    ];
                    for (col, q) in entries {
                        h[(b_row, col)] += q;
                        h[(col, b_row)] += q.conj();
                    }
                }
            }
            h
        }
    }
}

/// Momentum-space data of the two-band model at one quasimomentum.
#[derive(Debug, Clone)]
pub struct BlochPoint {
    pub k: [f64; 2],
    pub varpi: Complex64,
    pub e_plus: f64,
    pub e_minus: f64,
    projections: Option<(Matrix2<Complex64>, Matrix2<Complex64>)>,
}

impl BlochPoint {
    /// Projection onto the upper band; refused at a band touching.
    pub fn p_plus(&self) -> Result<&Matrix2<Complex64>> {
        self.projections
            .as_ref()
            .map(|(p, _)| p)
            .ok_or(LatticeError::DegeneratePoint {
                varpi_abs: self.varpi.norm(),
            })
    }

    /// Projection onto the lower band; refused at a band touching.
    pub fn p_minus(&self) -> Result<&Matrix2<Complex64>> {
        self.projections
            .as_ref()
            .map(|(_, p)| p)
            .ok_or(LatticeError::DegeneratePoint {
                varpi_abs: self.varpi.norm(),
            })
    }

    pub fn is_degenerate(&self) -> bool {
        self.projections.is_none()
    }
}

/// The 2x2 Bloch Hamiltonian T(k) = Re(varpi) sigma_1 + Im(varpi) sigma_2.
pub fn bloch_hamiltonian(varpi: Complex64) -> Matrix2<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    Matrix2::new(zero, varpi.conj(), varpi, zero)
}

/// Evaluates varpi(k) = 1 + q1 e^{-i k1} + q2 e^{-i k2} and the derived
/// band energies and projections P_+- = (1 +- T(k)/|varpi|)/2. At a band
/// touching (|varpi| < DEGENERACY_TOL) the energies are still returned but
/// the projections are marked degenerate.
pub fn honeycomb_bloch(q1: Complex64, q2: Complex64, k: [f64; 2]) -> BlochPoint {
    let varpi = Complex64::new(1.0, 0.0)
        + q1 * Complex64::new(0.0, -k[0]).exp()
        + q2 * Complex64::new(0.0, -k[1]).exp();
    let modulus = varpi.norm();
    let projections = if modulus >= DEGENERACY_TOL {
        let t = bloch_hamiltonian(varpi);
        let half = Complex64::new(0.5, 0.0);
        let identity = Matrix2::identity();
        let normalized = t.map(|v| v / Complex64::new(modulus, 0.0));
        Some((
            (identity + normalized).map(|v| v * half),
            (identity - normalized).map(|v| v * half),
        ))
    } else {
        None
    };
    BlochPoint {
        k,
        varpi,
        e_plus: modulus,
        e_minus: -modulus,
        projections,
    }
}

/// Evolves psi0 for time t along two independent routes: dense Hermitian
/// eigendecomposition of the wrapped patch Hamiltonian in position space,
/// and multiplication by the evolved symbol in momentum space (e^{-i t E(k)}
/// for one band; e^{-i t |varpi|} P_+ + e^{+i t |varpi|} P_- for two).
/// Returns both evolved states and their max-norm gap.
pub fn tb_evolve(
    model: &TightBindingModel,
    psi0: &[Complex64],
    t: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>, f64)> {
    if psi0.len() != model.state_len() {
        return Err(LatticeError::Truncation(format!(
            "state has {} components but the wrapped patch carries {}",
            psi0.len(),
            model.state_len()
        )));
    }
    if !t.is_finite() {
        return Err(LatticeError::InvalidInput("time must be finite".into()));
    }
    if !psi0
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    {
        return Err(LatticeError::InvalidInput("state must be finite".into()));
    }
    if t == 0.0 {
        return Ok((psi0.to_vec(), psi0.to_vec(), 0.0));
    }

    let position = {
        let h = patch_hamiltonian(model);
        let eigen = h.symmetric_eigen();
        let psi = DVector::from_column_slice(psi0);
        let in_eigenbasis = eigen.eigenvectors.adjoint() * psi;
        let phased = DVector::from_iterator(
            in_eigenbasis.len(),
            in_eigenbasis
                .iter()
                .zip(eigen.eigenvalues.iter())
                .map(|(v, lambda)| v * Complex64::new(0.0, -lambda * t).exp()),
        );
        let out = eigen.eigenvectors * phased;
        out.iter().cloned().collect::<Vec<Complex64>>()
    };

    let m = model.truncation;
    let sites = m * m;
    let bloch = match model.kind {
        LatticeKind::SquareSingleBand => {
            let mut data = psi0.to_vec();
            fft_all_axes(&mut data, 2, m, true);
            for (flat, value) in data.iter_mut().enumerate() {
                let k = [
                    TAU * (flat / m) as f64 / m as f64,
                    TAU * (flat % m) as f64 / m as f64,
                ];
                let energy = square_symbol(model.q1, model.q2, k);
                *value *= Complex64::new(0.0, -energy * t).exp();
            }
            fft_all_axes(&mut data, 2, m, false);
            let scale = 1.0 / sites as f64;
            data.iter().map(|v| v * scale).collect::<Vec<_>>()
        }
        LatticeKind::HoneycombTwoBand => {
            let mut a = psi0[..sites].to_vec();
            let mut b = psi0[sites..].to_vec();
            fft_all_axes(&mut a, 2, m, true);
            fft_all_axes(&mut b, 2, m, true);
            for flat in 0..sites {
                let k = [
                    TAU * (flat / m) as f64 / m as f64,
                    TAU * (flat % m) as f64 / m as f64,
                ];
                let point = honeycomb_bloch(model.q1, model.q2, k);
                let (new_a, new_b) = match &point.projections {
                    Some((p_plus, p_minus)) => {
                        let phase_upper = Complex64::new(0.0, -point.e_plus * t).exp();
                        let phase_lower = Complex64::new(0.0, -point.e_minus * t).exp();
                        let propagator = p_plus.map(|v| v * phase_upper)
                            + p_minus.map(|v| v * phase_lower);
                        let va = propagator[(0, 0)] * a[flat] + propagator[(0, 1)] * b[flat];
                        let vb = propagator[(1, 0)] * a[flat] + propagator[(1, 1)] * b[flat];
                        (va, vb)
                    }
                    // Both phases coincide at a touching, so the propagator
                    // degenerates to the identity.
                    None => (a[flat], b[flat]),
                };
                a[flat] = new_a;
                b[flat] = new_b;
            }
            fft_all_axes(&mut a, 2, m, false);
            fft_all_axes(&mut b, 2, m, false);
            let scale = 1.0 / sites as f64;
            a.iter()
                .chain(b.iter())
                .map(|v| v * scale)
                .collect::<Vec<_>>()
        }
    };

    let gap = position
        .iter()
        .zip(&bloch)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max);
    Ok((position, bloch, gap))
}
