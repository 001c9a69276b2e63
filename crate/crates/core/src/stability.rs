//! Fixed-point location and classification of ODE flows by linearization
//! eigenvalues, including the Lorenz system at the origin, Hamiltonian
//! linearizations, and the magnetic-field matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::linear_flow::VectorField;

/// Default classification tolerance on Re(lambda); boundary cases are
/// labeled marginal so labels stay deterministic under rounding.
pub const DEFAULT_CLASSIFICATION_TOL: f64 = 1e-8;
/// Gradient tolerance when checking that a phase point is critical.
const GRADIENT_TOL: f64 = 1e-6;
/// Second differences use at least this step (scaled by 1 + |x|) so the
/// rounding error of the double cancellation stays near 1e-8.
const HESSIAN_MIN_STEP: f64 = 1e-4;

/// Default finite-difference step used by the analyses in this module.
pub fn default_fd_step(x0: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + x0.norm())
}

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("|F(x0)| = {residual:.3e} exceeds tolerance {tol:.3e}; not a fixed point")]
    NotAFixedPoint { residual: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, StabilityError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Elliptic,
    Hyperbolic,
    Neither,
}

/// Linearization data at a fixed point together with its classification.
#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub location: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub stability: Stability,
    pub geometry: Geometry,
}

fn classify(eigenvalues: &[Complex64], tol: f64) -> (Stability, Geometry) {
    let stability = if eigenvalues.iter().all(|l| l.re < -tol) {
        Stability::Stable
    } else if eigenvalues.iter().all(|l| l.re <= tol) {
        Stability::Marginal
    } else {
        Stability::Unstable
    };
    let geometry = if eigenvalues.iter().all(|l| l.re.abs() <= tol) {
        Geometry::Elliptic
    } else if eigenvalues.iter().all(|l| l.im.abs() <= tol)
        && eigenvalues.iter().any(|l| l.re > tol)
    {
        Geometry::Hyperbolic
    } else {
        Geometry::Neither
    };
    (stability, geometry)
}

/// Jacobian of `F` at `x0` by central finite differences with step `fd_step`.
pub fn fd_jacobian(field: &VectorField, x0: &DVector<f64>, fd_step: f64) -> DMatrix<f64> {
    crate::numdiff::central_jacobian(&|x: &DVector<f64>| field.eval(x), x0, fd_step)
}

/// Classify the fixed point of `F` at `x0`: finite-difference Jacobian,
/// dense eigenvalues, then the stability/geometry labels at tolerance `tol`.
pub fn analyze_fixed_point(
    field: &VectorField,
    x0: &DVector<f64>,
    fd_step: f64,
    tol: f64,
) -> Result<FixedPointReport> {
    if !(fd_step > 0.0) || !(tol > 0.0) {
        return Err(StabilityError::InvalidInput(
            "fd_step and tol must be positive".into(),
        ));
    }
    let residual = field.eval(x0).norm();
    if residual > tol {
        return Err(StabilityError::NotAFixedPoint { residual, tol });
    }
    let jacobian = fd_jacobian(field, x0, fd_step);
    let eigenvalues: Vec<Complex64> = jacobian.complex_eigenvalues().iter().cloned().collect();
    let (stability, geometry) = classify(&eigenvalues, tol);
    Ok(FixedPointReport {
        location: x0.clone(),
        jacobian,
        eigenvalues,
        stability,
        geometry,
    })
}

/// Parameters of the Lorenz system.
#[derive(Debug, Clone, Copy)]
pub struct LorenzParams {
    pub sigma: f64,
    pub b: f64,
    pub r: f64,
}

/// The Lorenz vector field
/// (sigma (x2 - x1), -x1 x3 + r x1 - x2, x1 x2 - b x3)
/// together with the fixed-point analysis at the origin. One eigenvalue is
/// -b; the other two are the roots of lambda^2 + (sigma+1) lambda +
/// (1-r) sigma, solved numerically through the dense eigensolver.
pub fn lorenz_model(p: LorenzParams) -> Result<(VectorField, FixedPointReport)> {
    if !(p.sigma > 0.0 && p.b > 0.0 && p.r >= 0.0)
        || !(p.sigma.is_finite() && p.b.is_finite() && p.r.is_finite())
    {
        return Err(StabilityError::InvalidInput(
            "require sigma, b > 0 and r >= 0, all finite".into(),
        ));
    }
    let LorenzParams { sigma, b, r } = p;
    let field = VectorField::new(3, move |x: &DVector<f64>| {
        DVector::from_vec(vec![
            sigma * (x[1] - x[0]),
            -x[0] * x[2] + r * x[0] - x[1],
            x[0] * x[1] - b * x[2],
        ])
    });
    let origin = DVector::zeros(3);
    let report = analyze_fixed_point(
        &field,
        &origin,
        default_fd_step(&origin),
        DEFAULT_CLASSIFICATION_TOL,
    )?;
    Ok((field, report))
}

/// Linearize the Hamiltonian field (grad_p H, -grad_q H) at a critical point
/// of H on R^{2n} (coordinates ordered (q, p)) and classify it. The
/// linearization is J * Hess(H) with J the symplectic matrix; since the
/// finite-difference Hessian is exactly symmetric, the trace vanishes in
/// floating point as well, and |trace| <= 1e-6 is asserted.
pub fn hamiltonian_linearization<H>(
    hamiltonian: H,
    q0p0: &DVector<f64>,
    fd_step: f64,
) -> Result<FixedPointReport>
where
    H: Fn(&DVector<f64>) -> f64,
{
    if !q0p0.len().is_multiple_of(2) || q0p0.is_empty() {
        return Err(StabilityError::InvalidInput(
            "phase point must have even positive dimension".into(),
        ));
    }
    if !(fd_step > 0.0) {
        return Err(StabilityError::InvalidInput(
            "fd_step must be positive".into(),
        ));
    }
    let grad = crate::numdiff::central_gradient(&hamiltonian, q0p0, fd_step);
    if grad.norm() > GRADIENT_TOL {
        return Err(StabilityError::NotAFixedPoint {
            residual: grad.norm(),
            tol: GRADIENT_TOL,
        });
    }
    let n = q0p0.len() / 2;
    let hess_step = fd_step.max(HESSIAN_MIN_STEP * (1.0 + q0p0.norm()));
    let hess = crate::numdiff::central_hessian(&hamiltonian, q0p0, hess_step);
    // DX = J * S with J = [[0, I], [-I, 0]] in (q, p) blocks.
    let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..2 * n {
            jac[(i, j)] = hess[(n + i, j)];
            jac[(n + i, j)] = -hess[(i, j)];
        }
    }
    assert!(
        jac.trace().abs() <= 1e-6,
        "Hamiltonian linearization must be traceless"
    );
    let eigenvalues: Vec<Complex64> = jac.complex_eigenvalues().iter().cloned().collect();
    let (stability, geometry) = classify(&eigenvalues, DEFAULT_CLASSIFICATION_TOL);
    Ok(FixedPointReport {
        location: q0p0.clone(),
        jacobian: jac,
        eigenvalues,
        stability,
        geometry,
    })
}

/// The antisymmetric matrix of a constant magnetic field together with its
/// eigenvalues and the caveat that magnetic fixed points are never isolated.
#[derive(Debug, Clone)]
pub struct MagneticMatrix {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// The continuum caveat: equilibria of the magnetic system fill whole
    /// lines in phase space, so pointwise classification is partial.
    pub warning: &'static str,
}

/// Matrix B with B p = p x Bvec; antisymmetric with eigenvalues
/// {0, +i |Bvec|, -i |Bvec|}.
pub fn magnetic_field_matrix(bvec: &[f64; 3]) -> Result<MagneticMatrix> {
    if !bvec.iter().all(|v| v.is_finite()) {
        return Err(StabilityError::InvalidInput(
            "magnetic field must be finite".into(),
        ));
    }
    let [b1, b2, b3] = *bvec;
    let matrix = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0, b3, -b2, //
            -b3, 0.0, b1, //
            b2, -b1, 0.0,
        ],
    );
    let eigenvalues: Vec<Complex64> = matrix.complex_eigenvalues().iter().cloned().collect();
    Ok(MagneticMatrix {
        matrix,
        eigenvalues,
        warning: "magnetic equilibria form a continuum; no fixed point is isolated",
    })
}
