//! Canonical and magnetic Hamilton equations: phase-space vector fields by
//! central differences, Poisson brackets, energy-tracking flows, phase-volume
//! determinants along trajectories, and gauge transformations of vector
//! potentials.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linear_flow::{rk4_raw, LinearFlowError, Trajectory};
use crate::numdiff;

/// Default finite-difference step for the gradients in this module
/// (scaled by 1 + |z| at the evaluation point).
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Step for second differences when the variational equation takes its
/// Jacobian from the Hessian of H; 1e-3 keeps the double-cancellation
/// rounding near 1e-10 while the truncation stays near 1e-7.
const HESSIAN_STEP: f64 = 1e-3;
/// Step for differencing the field itself (magnetic systems only, where the
/// Hessian shortcut does not apply); balances the inner-gradient noise of
/// one difference quotient against truncation.
const FIELD_JACOBIAN_STEP: f64 = 2.5e-4;
/// Allowed violation of B = -B^T for a user-supplied magnetic matrix.
const ANTISYMMETRY_TOL: f64 = 1e-10;
/// Gauge comparisons sample this many points per axis on [-1, 1]^3.
const GAUGE_LATTICE_POINTS: usize = 17;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("state became non-finite; last valid time {last_valid_time}")]
    BlowUp { last_valid_time: f64 },
}

pub type Result<T> = std::result::Result<T, HamiltonianError>;

impl From<LinearFlowError> for HamiltonianError {
    fn from(e: LinearFlowError) -> Self {
        match e {
            LinearFlowError::InvalidInput(s) => HamiltonianError::InvalidInput(s),
            LinearFlowError::BlowUp { last_valid_time } => {
                HamiltonianError::BlowUp { last_valid_time }
            }
            LinearFlowError::DomainEscape { time, .. } => {
                HamiltonianError::BlowUp { last_valid_time: time }
            }
        }
    }
}

/// A point (q, p) in phase space R^n x R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have equal dimension");
        assert!(!q.is_empty(), "phase space must have positive dimension");
        PhasePoint { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// The coordinates packed as (q, p) in one vector of length 2n.
    pub fn packed(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.q.len(),
            self.q.iter().chain(self.p.iter()).cloned(),
        )
    }

    pub fn from_packed(z: &DVector<f64>) -> Self {
        assert!(z.len().is_multiple_of(2) && !z.is_empty());
        let n = z.len() / 2;
        PhasePoint {
            q: z.rows(0, n).clone_owned(),
            p: z.rows(n, n).clone_owned(),
        }
    }
}

/// Hamiltonian mechanics data: the configuration dimension n, the scalar H
/// on R^{2n} (coordinates packed (q, p)), and optionally an antisymmetric
/// matrix field q -> B(q) that adds the magnetic force term B q' to p'.
pub struct HamiltonianSystem {
    pub n: usize,
    h: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    magnetic: Option<Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>>,
}

impl HamiltonianSystem {
    pub fn new<H>(n: usize, h: H) -> Self
    where
        H: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        assert!(n >= 1, "configuration dimension must be positive");
        HamiltonianSystem {
            n,
            h: Box::new(h),
            magnetic: None,
        }
    }

    pub fn with_magnetic<B>(mut self, b: B) -> Self
    where
        B: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.magnetic = Some(Box::new(b));
        self
    }

    pub fn is_magnetic(&self) -> bool {
        self.magnetic.is_some()
    }

    /// H evaluated at a packed (q, p) vector.
    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        (self.h)(z)
    }

    /// Evaluates and validates the magnetic matrix at q.
    fn magnetic_matrix(&self, q: &DVector<f64>) -> Result<Option<DMatrix<f64>>> {
        let Some(b) = &self.magnetic else {
            return Ok(None);
        };
        let m = b(q);
        if m.nrows() != self.n || m.ncols() != self.n {
            return Err(HamiltonianError::InvalidInput(format!(
                "magnetic matrix must be {n} x {n}, got {r} x {c}",
                n = self.n,
                r = m.nrows(),
                c = m.ncols()
            )));
        }
        let scale = 1.0 + m.abs().max();
        if (m.transpose() + &m).abs().max() > ANTISYMMETRY_TOL * scale {
            return Err(HamiltonianError::InvalidInput(
                "magnetic matrix must be antisymmetric".into(),
            ));
        }
        Ok(Some(m))
    }
}

/// The phase-space velocity (q', p') at `x`, packed as one vector. Without a
/// magnetic term this is (grad_p H, -grad_q H) by central differences. With
/// one, the equations q' = grad_p H and p' = -grad_q H + B(q) q' are posed as
/// one block linear system
///   [[I, 0], [-B, I]] (q', p') = (grad_p H, -grad_q H)
/// and solved; the matrix is unit triangular, so the solve cannot fail.
pub fn hamiltonian_vector_field(
    sys: &HamiltonianSystem,
    x: &PhasePoint,
    fd_step: f64,
) -> Result<DVector<f64>> {
    if x.dim() != sys.n {
        return Err(HamiltonianError::InvalidInput(format!(
            "phase point has dimension {}, system expects {}",
            x.dim(),
            sys.n
        )));
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(HamiltonianError::InvalidInput(
            "fd_step must be positive and finite".into(),
        ));
    }
    field_at_packed(sys, &x.packed(), fd_step)
}

fn field_at_packed(
    sys: &HamiltonianSystem,
    z: &DVector<f64>,
    fd_step: f64,
) -> Result<DVector<f64>> {
    let n = sys.n;
    let grad = numdiff::central_gradient(&*sys.h, z, fd_step);
    let grad_q = grad.rows(0, n).clone_owned();
    let grad_p = grad.rows(n, n).clone_owned();
    let q = z.rows(0, n).clone_owned();
    match sys.magnetic_matrix(&q)? {
        None => {
            let mut v = DVector::zeros(2 * n);
            v.rows_mut(0, n).copy_from(&grad_p);
            v.rows_mut(n, n).copy_from(&(-&grad_q));
            Ok(v)
        }
        Some(b) => {
            let mut lhs = DMatrix::<f64>::identity(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    lhs[(n + i, j)] = -b[(i, j)];
                }
            }
            let mut rhs = DVector::zeros(2 * n);
            rhs.rows_mut(0, n).copy_from(&grad_p);
            rhs.rows_mut(n, n).copy_from(&(-&grad_q));
            lhs.lu().solve(&rhs).ok_or_else(|| {
                HamiltonianError::InvalidInput("magnetic system is singular".into())
            })
        }
    }
}

/// The canonical bracket
///   {f, g} = sum_j (d_{p_j} f d_{q_j} g - d_{q_j} f d_{p_j} g)
/// at `x`, with both gradients taken by central differences. With this sign,
/// {H, q_j} = d_{p_j} H.
pub fn poisson_bracket<F, G>(f: &F, g: &G, x: &PhasePoint, fd_step: f64) -> f64
where
    F: Fn(&DVector<f64>) -> f64 + ?Sized,
    G: Fn(&DVector<f64>) -> f64 + ?Sized,
{
    let n = x.dim();
    let z = x.packed();
    let gf = numdiff::central_gradient(f, &z, fd_step);
    let gg = numdiff::central_gradient(g, &z, fd_step);
    (0..n)
        .map(|j| gf[n + j] * gg[j] - gf[j] * gg[n + j])
        .sum()
}

/// Step count and exact step size so `step` need not divide `t` evenly; the
/// step is shrunk to the nearest divisor of t.
fn fitted_step(t: f64, step: f64) -> Result<(usize, f64)> {
    if !(step > 0.0 && step.is_finite() && t.is_finite()) {
        return Err(HamiltonianError::InvalidInput(
            "step must be positive and t finite".into(),
        ));
    }
    if t == 0.0 {
        return Ok((0, step));
    }
    let n = (t.abs() / step).ceil().max(1.0) as usize;
    Ok((n, t.abs() / n as f64))
}

/// Integrates Hamilton's equations from `x0` over [0, t] (t may be negative)
/// with RK4 at the given nominal step, the field's gradients taken with
/// `DEFAULT_FD_STEP` scaled by the state norm. Returns the trajectory of
/// packed (q, p) states and the energy drift max_s |H(x(s)) - H(x0)|.
pub fn evolve_hamiltonian(
    sys: &HamiltonianSystem,
    x0: &PhasePoint,
    t: f64,
    step: f64,
) -> Result<(Trajectory, f64)> {
    if x0.dim() != sys.n {
        return Err(HamiltonianError::InvalidInput(
            "phase point dimension mismatch".into(),
        ));
    }
    let (_, dt) = fitted_step(t, step)?;
    let z0 = x0.packed();
    // Surface a bad magnetic matrix as invalid input up front; later
    // evaluation failures poison the state and become blow-up errors.
    field_at_packed(sys, &z0, DEFAULT_FD_STEP * (1.0 + z0.norm()))?;
    let field = |z: &DVector<f64>| {
        let h = DEFAULT_FD_STEP * (1.0 + z.norm());
        field_at_packed(sys, z, h)
            .unwrap_or_else(|_| DVector::from_element(z.len(), f64::NAN))
    };
    let trajectory = rk4_raw(field, &z0, t, dt)?;
    let e0 = sys.energy(&z0);
    let drift = trajectory
        .states
        .iter()
        .map(|z| (sys.energy(z) - e0).abs())
        .fold(0.0, f64::max);
    Ok((trajectory, drift))
}

/// Jacobian of the Hamiltonian field at a packed point. For canonical
/// systems this is J Hess(H) with J the symplectic matrix, built from exact
/// second differences of H so the result is traceless in floating point.
/// Magnetic systems fall back to differencing the field itself.
fn field_jacobian(sys: &HamiltonianSystem, z: &DVector<f64>) -> DMatrix<f64> {
    let n = sys.n;
    if sys.is_magnetic() {
        let h = FIELD_JACOBIAN_STEP * (1.0 + z.norm());
        let f = |w: &DVector<f64>| {
            field_at_packed(sys, w, DEFAULT_FD_STEP * (1.0 + w.norm()))
                .unwrap_or_else(|_| DVector::from_element(w.len(), f64::NAN))
        };
        return numdiff::central_jacobian(&f, z, h);
    }
    let hess = numdiff::central_hessian(&*sys.h, z, HESSIAN_STEP * (1.0 + z.norm()));
    let mut jac = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..2 * n {
            jac[(i, j)] = hess[(n + i, j)];
            jac[(n + i, j)] = -hess[(i, j)];
        }
    }
    jac
}

/// Determinant of the flow derivative D Phi_t(x0), computed by integrating
/// the variational equation M' = DF(z) M, M(0) = I, alongside z' = F(z) and
/// taking the determinant of the final M. For Hamiltonian flows the exact
/// value is 1.
pub fn liouville_determinant(
    sys: &HamiltonianSystem,
    x0: &PhasePoint,
    t: f64,
    step: f64,
) -> Result<f64> {
    if x0.dim() != sys.n {
        return Err(HamiltonianError::InvalidInput(
            "phase point dimension mismatch".into(),
        ));
    }
    let (_, dt) = fitted_step(t, step)?;
    let dim = 2 * sys.n;
    let z0 = x0.packed();
    field_at_packed(sys, &z0, DEFAULT_FD_STEP * (1.0 + z0.norm()))?;

    // Augmented state (z, M) with M stored column-major after z.
    let mut y0 = DVector::<f64>::zeros(dim + dim * dim);
    y0.rows_mut(0, dim).copy_from(&z0);
    y0.rows_mut(dim, dim * dim)
        .copy_from_slice(DMatrix::<f64>::identity(dim, dim).as_slice());

    let aug_field = |y: &DVector<f64>| {
        let z = y.rows(0, dim).clone_owned();
        let m = DMatrix::<f64>::from_column_slice(dim, dim, &y.as_slice()[dim..]);
        let fz = field_at_packed(sys, &z, DEFAULT_FD_STEP * (1.0 + z.norm()))
            .unwrap_or_else(|_| DVector::from_element(dim, f64::NAN));
        let mdot = field_jacobian(sys, &z) * m;
        let mut out = DVector::<f64>::zeros(dim + dim * dim);
        out.rows_mut(0, dim).copy_from(&fz);
        out.rows_mut(dim, dim * dim).copy_from_slice(mdot.as_slice());
        out
    };
    let trajectory = rk4_raw(aug_field, &y0, t, dt)?;
    let y_end = trajectory.state_at(t).expect("endpoint exists");
    let m_end = DMatrix::<f64>::from_column_slice(dim, dim, &y_end.as_slice()[dim..]);
    Ok(m_end.determinant())
}

/// A vector potential A on R^3.
pub type VectorPotential = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// A scalar gauge function chi on R^3.
pub type GaugeFunction = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Curl of a vector field on R^3 by central differences.
fn curl_fd(a: &dyn Fn(&DVector<f64>) -> DVector<f64>, q: &DVector<f64>, h: f64) -> DVector<f64> {
    let j = numdiff::central_jacobian(a, q, h);
    DVector::from_vec(vec![
        j[(2, 1)] - j[(1, 2)],
        j[(0, 2)] - j[(2, 0)],
        j[(1, 0)] - j[(0, 1)],
    ])
}

/// The gauge-shifted potential A' = A + grad chi (gradient by central
/// differences with `fd_step`), together with the largest pointwise
/// difference |curl A' - curl A| over a 17^3 lattice on [-1, 1]^3. The gap
/// would be zero in exact arithmetic since curl grad chi = 0.
pub fn gauge_transform(
    a: &VectorPotential,
    chi: &GaugeFunction,
    fd_step: f64,
) -> Result<(VectorPotential, f64)> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(HamiltonianError::InvalidInput(
            "fd_step must be positive and finite".into(),
        ));
    }
    let probe = DVector::<f64>::zeros(3);
    if a(&probe).len() != 3 {
        return Err(HamiltonianError::InvalidInput(
            "vector potential must map R^3 to R^3".into(),
        ));
    }
    let shifted: VectorPotential = {
        let a = Arc::clone(a);
        let chi = Arc::clone(chi);
        Arc::new(move |q: &DVector<f64>| {
            a(q) + numdiff::central_gradient(chi.as_ref(), q, fd_step)
        })
    };

    let m = GAUGE_LATTICE_POINTS;
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / (m - 1) as f64;
    let mut gap: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let q = DVector::from_vec(vec![coord(i), coord(j), coord(k)]);
                let c0 = curl_fd(a.as_ref(), &q, fd_step);
                let c1 = curl_fd(shifted.as_ref(), &q, fd_step);
                gap = gap.max((c1 - c0).norm());
            }
        }
    }
    Ok((shifted, gap))
}

/// The Hamiltonian H(q, p) = |p - A(q)|^2 / 2 of a unit-mass, unit-charge
/// particle coupled to the vector potential A.
pub fn minimal_substitution(a: &VectorPotential) -> HamiltonianSystem {
    let a = Arc::clone(a);
    HamiltonianSystem::new(3, move |z: &DVector<f64>| {
        let q = z.rows(0, 3).clone_owned();
        let p = z.rows(3, 3).clone_owned();
        (p - a(&q)).norm_squared() * 0.5
    })
}
