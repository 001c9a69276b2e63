//! Spectral estimation and quantum inequalities: Rayleigh quotients,
//! Galerkin eigenvalue bounds, Temple's lower bound, the 1D resolvent
//! kernel, Birman-Schwinger bound states, multiplication-operator spectra
//! probed by Weyl bumps, and uncertainty, diamagnetic, and Duhamel checks.
//!
//! Units: hbar = 1 and 2m = 1, so the line Hamiltonian reads -d^2/dx^2 + V.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::fourier::TorusGrid;
use crate::report::BoundReport;

/// Allowed deviation of an operator from its conjugate transpose.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Samples with |psi| at or below this are skipped by the pointwise
/// diamagnetic comparison.
pub const DIAMAGNETIC_SUPPORT_TOL: f64 = 1e-8;
/// Default half-width of the Birman-Schwinger grid.
pub const BS_WINDOW: f64 = 40.0;
/// Default Birman-Schwinger grid spacing.
pub const BS_SPACING: f64 = 1.0 / 200.0;
/// Default geometric bracket-expansion rounds for the bound-state bisection.
pub const BS_MAX_EXPANSIONS: usize = 6;

#[derive(Debug, Error)]
pub enum QuantumSpectraError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("bisection bracket failed: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, QuantumSpectraError>;

/// A dense Hermitian matrix, validated at construction.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(QuantumSpectraError::InvalidInput(
                "operator must be square and nonempty".into(),
            ));
        }
        for i in 0..entries.nrows() {
            for j in 0..=i {
                let gap = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if !(gap <= HERMITIAN_TOL) {
                    return Err(QuantumSpectraError::InvalidInput(format!(
                        "entry ({i}, {j}) deviates from the conjugate transpose by {gap:.3e}"
                    )));
                }
            }
        }
        Ok(HermitianOperator { entries })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianOperator {
            entries: DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn apply(&self, psi: &DVector<Complex64>) -> DVector<Complex64> {
        &self.entries * psi
    }

    /// Real expectation value of a Hermitian operator in state psi
    /// (psi need not be normalized; no normalization is applied).
    pub fn quadratic_form(&self, psi: &DVector<Complex64>) -> f64 {
        psi.dotc(&self.apply(psi)).re
    }

    /// The spectrum in ascending order, by dense Hermitian diagonalization.
    pub fn eigenvalues_sorted(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Operator 2-norm (largest singular value; for Hermitian input the
    /// largest eigenvalue magnitude).
    pub fn two_norm(&self) -> f64 {
        self.eigenvalues_sorted()
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }
}

/// The unitary e^{-i t H} through the Hermitian eigendecomposition.
pub fn evolution_operator(h: &HermitianOperator, t: f64) -> DMatrix<Complex64> {
    let eigen = h.entries.clone().symmetric_eigen();
    let n = h.dim();
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(0.0, -eigen.eigenvalues[i] * t).exp()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    &eigen.eigenvectors * phases * eigen.eigenvectors.adjoint()
}

/// <psi, H psi> / ||psi||^2; never below the bottom of the spectrum.
pub fn rayleigh_quotient(h: &HermitianOperator, psi: &DVector<Complex64>) -> Result<f64> {
    if psi.len() != h.dim() {
        return Err(QuantumSpectraError::InvalidInput(
            "state dimension does not match the operator".into(),
        ));
    }
    let norm_sq = psi.norm_squared();
    if norm_sq == 0.0 {
        return Err(QuantumSpectraError::InvalidInput(
            "Rayleigh quotient of the zero vector is undefined".into(),
        ));
    }
    Ok(h.quadratic_form(psi) / norm_sq)
}

/// Compresses H to the span of an orthonormal family and returns the sorted
/// eigenvalues of the compression; the j-th one bounds the j-th exact
/// eigenvalue from above.
pub fn galerkin_minmax(
    h: &HermitianOperator,
    phis: &[DVector<Complex64>],
) -> Result<Vec<f64>> {
    if phis.is_empty() {
        return Err(QuantumSpectraError::InvalidInput(
            "need at least one trial vector".into(),
        ));
    }
    for phi in phis {
        if phi.len() != h.dim() {
            return Err(QuantumSpectraError::InvalidInput(
                "trial vector dimension does not match the operator".into(),
            ));
        }
    }
    for i in 0..phis.len() {
        for j in 0..=i {
            let overlap = phis[i].dotc(&phis[j]);
            let expected = if i == j { 1.0 } else { 0.0 };
            if (overlap - Complex64::new(expected, 0.0)).norm() > 1e-10 {
                return Err(QuantumSpectraError::InvalidInput(format!(
                    "trial family is not orthonormal: <phi_{i}, phi_{j}> = {overlap}"
                )));
            }
        }
    }
    let images: Vec<DVector<Complex64>> = phis.iter().map(|phi| h.apply(phi)).collect();
    let compressed = DMatrix::from_fn(phis.len(), phis.len(), |i, j| phis[i].dotc(&images[j]));
    // Symmetrize away the rounding skew before diagonalizing.
    let hermitized = (&compressed + compressed.adjoint()) * Complex64::new(0.5, 0.0);
    let mut values: Vec<f64> = hermitized
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Temple's lower bound
///   E_0 >= <psi, H psi> - var_psi(H) / (mu - <psi, H psi>)
/// for any mu between <psi, H psi> and the second spectral point. Both
/// hypotheses are verified against the dense spectrum; psi is normalized
/// internally.
pub fn temple_bound(h: &HermitianOperator, psi: &DVector<Complex64>, mu: f64) -> Result<f64> {
    if h.dim() < 2 {
        return Err(QuantumSpectraError::InvalidInput(
            "Temple's bound needs at least two spectral points".into(),
        ));
    }
    if psi.len() != h.dim() || psi.norm_squared() == 0.0 {
        return Err(QuantumSpectraError::InvalidInput(
            "trial state must be a nonzero vector of matching dimension".into(),
        ));
    }
    let psi = psi / Complex64::new(psi.norm(), 0.0);
    let h_psi = h.apply(&psi);
    let mean = psi.dotc(&h_psi).re;
    let second_moment = h_psi.norm_squared();
    let spectrum = h.eigenvalues_sorted();
    let e1 = spectrum[1];
    if !(mean < mu) {
        return Err(QuantumSpectraError::Precondition(format!(
            "<psi, H psi> = {mean} is not below mu = {mu}"
        )));
    }
    if !(mu < e1) {
        return Err(QuantumSpectraError::Precondition(format!(
            "mu = {mu} is not below the second spectral point E_1 = {e1}"
        )));
    }
    let variance = (second_moment - mean * mean).max(0.0);
    Ok(mean - variance / (mu - mean))
}

/// The free resolvent kernel of -d^2/dx^2 at energy -E on the line:
/// e^{-sqrt(E) |x - y|} / (2 sqrt(E)).
pub fn resolvent_kernel_1d(e: f64, x: f64, y: f64) -> Result<f64> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "resolvent kernel needs E > 0".into(),
        ));
    }
    let root = e.sqrt();
    Ok((-root * (x - y).abs()).exp() / (2.0 * root))
}

/// A nonpositive potential sampled on a uniform grid over [-window, window].
#[derive(Debug, Clone)]
pub struct Potential1D {
    window: f64,
    values: Vec<f64>,
}

impl Potential1D {
    pub fn new(window: f64, values: Vec<f64>) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) || values.len() < 2 {
            return Err(QuantumSpectraError::InvalidInput(
                "need a positive window and at least two samples".into(),
            ));
        }
        if !values.iter().all(|v| v.is_finite() && *v <= 0.0) {
            return Err(QuantumSpectraError::InvalidInput(
                "potential samples must be finite and nonpositive".into(),
            ));
        }
        Ok(Potential1D { window, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(window: f64, points: usize, f: F) -> Result<Self> {
        if points < 2 {
            return Err(QuantumSpectraError::InvalidInput(
                "need at least two samples".into(),
            ));
        }
        let spacing = 2.0 * window / (points - 1) as f64;
        let values = (0..points).map(|i| f(-window + i as f64 * spacing)).collect();
        Potential1D::new(window, values)
    }

    /// The default well used by the bound-state routines: sampled on
    /// [-BS_WINDOW, BS_WINDOW] with spacing BS_SPACING.
    pub fn on_default_grid<F: Fn(f64) -> f64>(f: F) -> Result<Self> {
        let points = (2.0 * BS_WINDOW / BS_SPACING).round() as usize + 1;
        Potential1D::from_fn(BS_WINDOW, points, f)
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.window / (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.window + i as f64 * self.spacing()
    }

    /// Trapezoid quadrature of |V|.
    pub fn abs_integral(&self) -> f64 {
        let h = self.spacing();
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let weight = if i == 0 || i == self.values.len() - 1 {
                0.5
            } else {
                1.0
            };
            acc += weight * v.abs();
        }
        acc * h
    }
}

/// Bound-state data for -d^2/dx^2 + lambda V.
#[derive(Debug, Clone)]
pub struct BSResult {
    /// Decay rate of the bound state; the self-consistent bisection root.
    pub mu_star: f64,
    /// -mu_star^2.
    pub energy: f64,
    /// The small-coupling asymptotic -(lambda^2 / 4) (integral |V|)^2.
    pub weak_coupling_prediction: f64,
    /// Lowest eigenvalue of the finite-difference Hamiltonian on the same
    /// grid; an independent route to the same energy.
    pub grid_diag_energy: f64,
}

/// The symmetric kernel matrix
///   K(mu)_ij = h (1 / 2 mu) sqrt|V(x_i)| e^{-mu |x_i - x_j|} sqrt|V(x_j)|
/// restricted to the support of V (zero rows change nothing), and its top
/// eigenvalue by power iteration (the kernel is entrywise positive, so the
/// leading eigenvector is positive and the iteration converges from a
/// positive start).
pub fn bs_kernel_top_eigenvalue(v: &Potential1D, mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "kernel parameter mu must be positive".into(),
        ));
    }
    let h = v.spacing();
    let support: Vec<(f64, f64)> = v
        .values()
        .iter()
        .enumerate()
        .filter(|(_, value)| **value < 0.0)
        .map(|(i, value)| (v.node(i), value.abs().sqrt()))
        .collect();
    if support.is_empty() {
        return Err(QuantumSpectraError::InvalidInput(
            "potential vanishes identically".into(),
        ));
    }
    let n = support.len();
    let mut kernel = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let value = h / (2.0 * mu)
                * support[i].1
                * support[j].1
                * (-mu * (support[i].0 - support[j].0).abs()).exp();
            kernel[(i, j)] = value;
            kernel[(j, i)] = value;
        }
    }
    let mut vector = DVector::<f64>::from_fn(n, |i, _| support[i].1.max(1e-8));
    vector /= vector.norm();
    let mut eigenvalue = 0.0f64;
    for _ in 0..500 {
        let image = &kernel * &vector;
        let next = image.norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        let refreshed = image / next;
        let change = (next - eigenvalue).abs();
        eigenvalue = next;
        vector = refreshed;
        if change <= 1e-15 * eigenvalue.max(1.0) {
            break;
        }
    }
    Ok(eigenvalue)
}

/// Number of eigenvalues of the symmetric tridiagonal matrix
/// (off, diag_i, off) strictly below x, by the Sturm pivot count.
fn tridiagonal_count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let off_sq = off * off;
    let mut count = 0usize;
    let mut pivot = f64::INFINITY;
    for &a in diag {
        let mut d = a - x;
        if pivot.is_finite() {
            d -= off_sq / pivot;
        }
        if d == 0.0 {
            d = -f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
        pivot = d;
    }
    count
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix by bisection on
/// the Sturm count.
fn tridiagonal_lowest_eigenvalue(diag: &[f64], off: f64) -> f64 {
    let spread = 2.0 * off.abs();
    let mut lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - spread;
    let mut hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + spread;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tridiagonal_count_below(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest eigenvalue of the finite-difference -d^2/dx^2 + lambda V with
/// Dirichlet walls just outside the sampled window.
pub fn fd_ground_energy(v: &Potential1D, lambda: f64) -> f64 {
    let h = v.spacing();
    let inv_h_sq = 1.0 / (h * h);
    let diag: Vec<f64> = v
        .values()
        .iter()
        .map(|value| 2.0 * inv_h_sq + lambda * value)
        .collect();
    tridiagonal_lowest_eigenvalue(&diag, -inv_h_sq)
}

/// Solves the self-consistent bound-state condition
/// lambda * top_eigenvalue(K(mu)) = 1 by bisection inside `bracket`,
/// expanding the bracket geometrically up to `max_expansions` times. The
/// left-hand side is strictly decreasing in mu because every kernel entry
/// is.
pub fn birman_schwinger_bracketed(
    v: &Potential1D,
    lambda: f64,
    bracket: (f64, f64),
    max_expansions: usize,
) -> Result<BSResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "coupling must be positive".into(),
        ));
    }
    if v.values().iter().all(|value| *value == 0.0) {
        return Err(QuantumSpectraError::InvalidInput(
            "potential vanishes identically".into(),
        ));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(QuantumSpectraError::InvalidInput(
            "bracket must satisfy 0 < lo < hi".into(),
        ));
    }
    let objective = |mu: f64| -> Result<f64> {
        Ok(lambda * bs_kernel_top_eigenvalue(v, mu)? - 1.0)
    };
    let mut expansions = 0usize;
    loop {
        let at_lo = objective(lo)?;
        let at_hi = objective(hi)?;
        if at_lo > 0.0 && at_hi < 0.0 {
            break;
        }
        if expansions >= max_expansions {
            return Err(QuantumSpectraError::Bracket(format!(
                "no sign change on [{lo:.3e}, {hi:.3e}] after {expansions} expansions \
                 (objective {at_lo:.3e} at the left end, {at_hi:.3e} at the right)"
            )));
        }
        if at_lo <= 0.0 {
            lo /= 4.0;
        }
        if at_hi >= 0.0 {
            hi *= 4.0;
        }
        expansions += 1;
    }
    let (bracket_lo, bracket_hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if objective(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let mu_star = 0.5 * (lo + hi);
    debug_assert!(mu_star >= bracket_lo && mu_star <= bracket_hi);
    let strength = v.abs_integral();
    Ok(BSResult {
        mu_star,
        energy: -mu_star * mu_star,
        weak_coupling_prediction: -(lambda * lambda / 4.0) * strength * strength,
        grid_diag_energy: fd_ground_energy(v, lambda),
    })
}

/// `birman_schwinger_bracketed` with the default bracket
/// [lambda L / 40, 10 lambda L] around the small-coupling asymptote
/// mu ~ lambda L / 2, where L = integral of |V|.
pub fn birman_schwinger(v: &Potential1D, lambda: f64) -> Result<BSResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "coupling must be positive".into(),
        ));
    }
    let strength = v.abs_integral();
    if strength == 0.0 {
        return Err(QuantumSpectraError::InvalidInput(
            "potential vanishes identically".into(),
        ));
    }
    birman_schwinger_bracketed(
        v,
        lambda,
        (lambda * strength / 40.0, 10.0 * lambda * strength),
        BS_MAX_EXPANSIONS,
    )
}

/// One spectral probe of a multiplication operator: Gaussian bumps of
/// shrinking width centered where the symbol is closest to `lambda`, with
/// the normalized residuals ||(f - lambda) psi|| / ||psi||.
#[derive(Debug, Clone)]
pub struct WeylProbe {
    pub lambda: f64,
    pub widths: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Interval hull of the sampled range together with Weyl probes at five
/// interior values.
#[derive(Debug, Clone)]
pub struct MultiplicationSpectrum {
    pub min: f64,
    pub max: f64,
    pub probes: Vec<WeylProbe>,
}

/// Residuals ||(f - lambda) psi_w|| / ||psi_w|| for Gaussian bumps of the
/// given widths centered at the sample where f is closest to lambda.
pub fn weyl_residuals_at(
    xs: &[f64],
    values: &[f64],
    lambda: f64,
    widths: &[f64],
) -> Result<Vec<f64>> {
    if xs.len() != values.len() || xs.len() < 2 {
        return Err(QuantumSpectraError::InvalidInput(
            "need matching sample and value lists with at least two entries".into(),
        ));
    }
    if !xs.iter().chain(values.iter()).all(|v| v.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "samples must be finite".into(),
        ));
    }
    let center = xs
        .iter()
        .zip(values.iter())
        .min_by(|a, b| (a.1 - lambda).abs().total_cmp(&(b.1 - lambda).abs()))
        .map(|(x, _)| *x)
        .unwrap();
    let mut residuals = Vec::with_capacity(widths.len());
    for &w in widths {
        if !(w > 0.0) {
            return Err(QuantumSpectraError::InvalidInput(
                "bump widths must be positive".into(),
            ));
        }
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (&x, &f) in xs.iter().zip(values.iter()) {
            let bump = (-(x - center).powi(2) / (2.0 * w * w)).exp();
            num += (f - lambda).powi(2) * bump * bump;
            den += bump * bump;
        }
        residuals.push((num / den).sqrt());
    }
    Ok(residuals)
}

/// Closure of the sampled range of a real multiplication symbol, probed by
/// Weyl bump sequences at five interior values; each probe's residuals
/// shrink with the bump width, witnessing that the value lies in the
/// spectrum.
pub fn multiplication_spectrum(xs: &[f64], values: &[f64]) -> Result<MultiplicationSpectrum> {
    if xs.len() != values.len() || xs.len() < 2 {
        return Err(QuantumSpectraError::InvalidInput(
            "need matching sample and value lists with at least two entries".into(),
        ));
    }
    if !xs.iter().chain(values.iter()).all(|v| v.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "samples must be finite".into(),
        ));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let domain = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let widths: Vec<f64> = [20.0, 40.0, 80.0].iter().map(|d| domain / d).collect();
    let mut probes = Vec::with_capacity(5);
    for p in 0..5 {
        let lambda = if max > min {
            min + (p as f64 + 0.5) * (max - min) / 5.0
        } else {
            min
        };
        let residuals = weyl_residuals_at(xs, values, lambda, &widths)?;
        probes.push(WeylProbe {
            lambda,
            widths: widths.clone(),
            residuals,
        });
        if max == min {
            break;
        }
    }
    Ok(MultiplicationSpectrum { min, max, probes })
}

/// Checks Heisenberg's inequality
///   (1/2) |<psi, i[A, B] psi>| <= sigma_psi(A) sigma_psi(B)
/// for a normalized state.
pub fn uncertainty_check(
    a: &HermitianOperator,
    b: &HermitianOperator,
    psi: &DVector<Complex64>,
) -> Result<BoundReport> {
    if a.dim() != b.dim() || psi.len() != a.dim() {
        return Err(QuantumSpectraError::InvalidInput(
            "operators and state must share one dimension".into(),
        ));
    }
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(QuantumSpectraError::InvalidInput(format!(
            "state must be normalized: ||psi|| = {}",
            psi.norm()
        )));
    }
    let a_psi = a.apply(psi);
    let b_psi = b.apply(psi);
    // <psi, i[A, B] psi> = i(<A psi, B psi> - <B psi, A psi>) = -2 Im <A psi, B psi>.
    let cross = a_psi.dotc(&b_psi);
    let lhs = cross.im.abs();
    let sigma = |op_psi: &DVector<Complex64>, psi: &DVector<Complex64>| -> f64 {
        let mean = psi.dotc(op_psi).re;
        (op_psi.norm_squared() - mean * mean).max(0.0).sqrt()
    };
    let rhs = sigma(&a_psi, psi) * sigma(&b_psi, psi);
    Ok(BoundReport::check("uncertainty", lhs, rhs, 1e-10))
}

/// Pointwise sides of the diamagnetic comparison at samples where
/// |psi| > DIAMAGNETIC_SUPPORT_TOL:
/// left_i = |grad |psi||(x_i), right_i = |(-i grad - A) psi|(x_i), both by
/// central differences on the grid.
pub fn diamagnetic_sides(
    psi: &TorusGrid,
    a: &[TorusGrid],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = psi.n;
    let m = psi.points_per_axis;
    if a.len() != n {
        return Err(QuantumSpectraError::InvalidInput(
            "vector potential must have one component per axis".into(),
        ));
    }
    for comp in a {
        if comp.n != n || comp.points_per_axis != m {
            return Err(QuantumSpectraError::InvalidInput(
                "vector potential components must share the state's grid".into(),
            ));
        }
    }
    let h = std::f64::consts::TAU / m as f64;
    let total = psi.len();
    let abs_values: Vec<f64> = psi.samples.iter().map(|z| z.norm()).collect();
    let stride = |axis: usize| m.pow((n - 1 - axis) as u32);
    // Wrapped neighbor along one axis of a row-major index.
    let neighbor = |flat: usize, axis: usize, delta: i64| -> usize {
        let s = stride(axis);
        let line = (flat / s) % m;
        let shifted = (line as i64 + delta).rem_euclid(m as i64) as usize;
        (flat as i64 + (shifted as i64 - line as i64) * s as i64) as usize
    };
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for flat in 0..total {
        if abs_values[flat] <= DIAMAGNETIC_SUPPORT_TOL {
            continue;
        }
        let mut grad_abs_sq = 0.0f64;
        let mut covariant_sq = 0.0f64;
        for axis in 0..n {
            let fwd = neighbor(flat, axis, 1);
            let bwd = neighbor(flat, axis, -1);
            let d_abs = (abs_values[fwd] - abs_values[bwd]) / (2.0 * h);
            grad_abs_sq += d_abs * d_abs;
            let d_psi = (psi.samples[fwd] - psi.samples[bwd]) / (2.0 * h);
            let covariant = Complex64::new(0.0, -1.0) * d_psi
                - a[axis].samples[flat].re * psi.samples[flat];
            covariant_sq += covariant.norm_sqr();
        }
        lhs.push(grad_abs_sq.sqrt());
        rhs.push(covariant_sq.sqrt());
    }
    Ok((lhs, rhs))
}

/// Third-difference estimate of the largest third derivative of a grid
/// function, used to calibrate the discretization slack.
fn third_derivative_bound(values: &[f64], n: usize, m: usize) -> f64 {
    let h = std::f64::consts::TAU / m as f64;
    let stride = |axis: usize| m.pow((n - 1 - axis) as u32);
    let neighbor = |flat: usize, axis: usize, delta: i64| -> usize {
        let s = stride(axis);
        let line = (flat / s) % m;
        let shifted = (line as i64 + delta).rem_euclid(m as i64) as usize;
        (flat as i64 + (shifted as i64 - line as i64) * s as i64) as usize
    };
    let mut worst = 0.0f64;
    for flat in 0..values.len() {
        for axis in 0..n {
            let estimate = (values[neighbor(flat, axis, 2)]
                - 2.0 * values[neighbor(flat, axis, 1)]
                + 2.0 * values[neighbor(flat, axis, -1)]
                - values[neighbor(flat, axis, -2)])
                / (2.0 * h * h * h);
            worst = worst.max(estimate.abs());
        }
    }
    worst
}

/// Pointwise diamagnetic inequality |grad |psi|| <= |(-i grad - A) psi| on
/// the grid, with slack C fd_step^2 calibrated from third-difference
/// bounds of |psi| and psi (the central-difference truncation error of both
/// sides).
pub fn diamagnetic_check(psi: &TorusGrid, a: &[TorusGrid], fd_step: f64) -> Result<BoundReport> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(QuantumSpectraError::InvalidInput(
            "finite-difference step must be positive".into(),
        ));
    }
    let (lhs, rhs) = diamagnetic_sides(psi, a)?;
    let worst_gap = lhs
        .iter()
        .zip(rhs.iter())
        .map(|(l, r)| l - r)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let abs_values: Vec<f64> = psi.samples.iter().map(|z| z.norm()).collect();
    let re_values: Vec<f64> = psi.samples.iter().map(|z| z.re).collect();
    let im_values: Vec<f64> = psi.samples.iter().map(|z| z.im).collect();
    let m = psi.points_per_axis;
    let bound_abs = third_derivative_bound(&abs_values, psi.n, m);
    let bound_psi = third_derivative_bound(&re_values, psi.n, m)
        .hypot(third_derivative_bound(&im_values, psi.n, m));
    // Each side's central difference is off by at most h^2 max|f'''| / 6;
    // the factor 1/2 leaves a 50% safety margin over the sum of both.
    let slack_scale = (bound_abs + bound_psi) / 2.0;
    Ok(BoundReport::check(
        "diamagnetic",
        worst_gap,
        0.0,
        slack_scale * fd_step * fd_step,
    ))
}

/// Compares the evolution perturbed by eps W against the unperturbed one:
/// lhs = ||e^{-i t H} - e^{-i t (H + eps W)}||_2, rhs = |t| eps ||W||_2.
pub fn duhamel_gap(
    h1: &HermitianOperator,
    w: &HermitianOperator,
    eps: f64,
    t: f64,
) -> Result<BoundReport> {
    if h1.dim() != w.dim() {
        return Err(QuantumSpectraError::InvalidInput(
            "operators must share one dimension".into(),
        ));
    }
    if !(eps >= 0.0 && eps.is_finite()) || !t.is_finite() {
        return Err(QuantumSpectraError::InvalidInput(
            "need finite t and eps >= 0".into(),
        ));
    }
    let perturbed_entries = &h1.entries + w.entries.map(|v| v * eps);
    let perturbed = HermitianOperator::new(perturbed_entries)?;
    let difference = evolution_operator(h1, t) - evolution_operator(&perturbed, t);
    let lhs = difference
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let rhs = t.abs() * eps * w.two_norm();
    Ok(BoundReport::check("duhamel", lhs, rhs, 1e-10))
}
