//! Directional calculus for energies on real coordinate vectors, action
//! residuals for sampled trajectories, the periodic Helmholtz splitting,
//! a Ginzburg-Landau energy with its L2 gradient and a fixed-step descent,
//! convexity probes, and singular-value scans for branch points of
//! parameter-dependent maps.
//!
//! Complex fields enter through their real and imaginary parts as
//! independent real coordinates, so every derivative below is a real
//! directional derivative. Grid derivatives are spectral on the periodic
//! grid (the Nyquist mode is dropped, which keeps differentiation
//! skew-adjoint and real fields real).

use crate::fourier::{fft_all_axes, TorusGrid};
use crate::linear_flow::Trajectory;
use crate::report::BoundReport;
use crate::spectral_pde::signed_mode;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
    #[error(
        "descent did not converge: gradient max-norm {} after {} accepted steps",
        .0.grad_max_norm,
        .0.energy_path.len().saturating_sub(1)
    )]
    NonConvergence(Box<NonConvergenceReport>),
}

pub type Result<T> = std::result::Result<T, VariationalError>;

fn invalid(msg: impl Into<String>) -> VariationalError {
    VariationalError::InvalidInput(msg.into())
}

/// A real-valued energy on flattened real coordinates, optionally carrying
/// a closed-form gradient. When the gradient is present, every directional
/// derivative taken through [`gateaux_derivative`] is cross-checked against
/// it.
pub struct Functional {
    dim: usize,
    eval: Box<dyn Fn(&[f64]) -> f64>,
    analytic_gradient: Option<Box<dyn Fn(&[f64]) -> Vec<f64>>>,
}

impl Functional {
    pub fn new<F>(dim: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + 'static,
    {
        if dim == 0 {
            return Err(invalid("state space must have positive dimension"));
        }
        Ok(Functional {
            dim,
            eval: Box::new(eval),
            analytic_gradient: None,
        })
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + 'static,
    {
        self.analytic_gradient = Some(Box::new(gradient));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates the energy, rejecting dimension mismatches and non-finite
    /// values.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "state has {} coordinates, expected {}",
                x.len(),
                self.dim
            )));
        }
        let value = (self.eval)(x);
        if !value.is_finite() {
            return Err(invalid(format!("energy is not finite: {value}")));
        }
        Ok(value)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.analytic_gradient.as_ref().map(|g| g(x))
    }
}

fn add_scaled(x: &[f64], d: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(d.iter()).map(|(a, b)| a + s * b).collect()
}

/// Central difference quotient (E(psi + h phi) - E(psi - h phi)) / (2h).
///
/// When the functional carries an analytic gradient, the quotient must
/// agree with <grad, phi> within 10 h^2 times a curvature scale plus the
/// rounding floor of the quotient itself; a mismatch reports the supplied
/// gradient as inconsistent input.
pub fn gateaux_derivative(e: &Functional, psi: &[f64], phi: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("direction step must be positive, got {h}")));
    }
    if psi.len() != e.dim() || phi.len() != e.dim() {
        return Err(invalid("state and direction must match the functional dimension"));
    }
    let plus = e.eval(&add_scaled(psi, phi, h))?;
    let minus = e.eval(&add_scaled(psi, phi, -h))?;
    let quotient = (plus - minus) / (2.0 * h);
    if !quotient.is_finite() {
        return Err(invalid("difference quotient is not finite"));
    }
    if let Some(g) = e.gradient(psi) {
        if g.len() != e.dim() {
            return Err(invalid("analytic gradient has the wrong dimension"));
        }
        let dot: f64 = g.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
        let center = e.eval(psi)?;
        let curvature = ((plus - 2.0 * center + minus) / (h * h)).abs();
        let scale = curvature
            .max(quotient.abs())
            .max(plus.abs() + center.abs() + minus.abs())
            .max(1.0);
        let rounding = f64::EPSILON * (plus.abs() + minus.abs()) / (2.0 * h);
        let tol = 10.0 * h * h * scale + 100.0 * rounding + 1e-12;
        if (quotient - dot).abs() > tol {
            return Err(invalid(format!(
                "analytic gradient disagrees with the central difference quotient: \
                 {dot} vs {quotient} (tolerance {tol:.3e})"
            )));
        }
    }
    Ok(quotient)
}

/// Max action residual |grad_x L - d/dt grad_v L| over the interior samples
/// of a uniformly sampled configuration trajectory, all derivatives by
/// central differences (velocities from neighboring samples, momenta by
/// quotients in v with step `fd_step`).
pub fn euler_lagrange_residual<L>(lagrangian: L, q: &Trajectory, fd_step: f64) -> Result<f64>
where
    L: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(invalid(format!("fd_step must be positive, got {fd_step}")));
    }
    let len = q.len();
    if len < 5 {
        return Err(invalid(format!(
            "trajectory too short: {len} samples, need at least 5"
        )));
    }
    let dt = q.times[1] - q.times[0];
    if q
        .times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0))
    {
        return Err(invalid("trajectory must be uniformly sampled"));
    }
    if dt > fd_step * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "sampling step {dt} exceeds the difference step {fd_step}"
        )));
    }
    let d = q.states[0].len();
    if d == 0 || q.states.iter().any(|s| s.len() != d) {
        return Err(invalid("trajectory states must share a positive dimension"));
    }

    let velocity = |k: usize| (&q.states[k + 1] - &q.states[k - 1]) / (2.0 * dt);
    let grad_v = |x: &DVector<f64>, v: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(d, |i, _| {
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[i] += fd_step;
            vm[i] -= fd_step;
            (lagrangian(x, &vp) - lagrangian(x, &vm)) / (2.0 * fd_step)
        })
    };
    let grad_x = |x: &DVector<f64>, v: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(d, |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += fd_step;
            xm[i] -= fd_step;
            (lagrangian(&xp, v) - lagrangian(&xm, v)) / (2.0 * fd_step)
        })
    };

    let momenta: Vec<DVector<f64>> = (1..len - 1)
        .map(|k| grad_v(&q.states[k], &velocity(k)))
        .collect();
    let mut worst = 0.0f64;
    for k in 2..len - 2 {
        let dpdt = (&momenta[k] - &momenta[k - 2]) / (2.0 * dt);
        let g = grad_x(&q.states[k], &velocity(k));
        worst = worst.max((g - dpdt).norm());
    }
    if !worst.is_finite() {
        return Err(invalid("residual is not finite"));
    }
    Ok(worst)
}

fn axis_stride(n: usize, m: usize, axis: usize) -> usize {
    m.pow((n - 1 - axis) as u32)
}

/// Spectral derivative along one axis of a periodic row-major sample array;
/// the Nyquist column is dropped.
fn spectral_derivative(samples: &[Complex64], n: usize, m: usize, axis: usize) -> Vec<Complex64> {
    let mut hats = samples.to_vec();
    fft_all_axes(&mut hats, n, m, true);
    let stride = axis_stride(n, m, axis);
    for (flat, hat) in hats.iter_mut().enumerate() {
        let idx = (flat / stride) % m;
        if 2 * idx == m {
            *hat = Complex64::new(0.0, 0.0);
        } else {
            *hat *= Complex64::new(0.0, signed_mode(idx, m) as f64);
        }
    }
    fft_all_axes(&mut hats, n, m, false);
    let scale = 1.0 / m.pow(n as u32) as f64;
    for hat in hats.iter_mut() {
        *hat *= scale;
    }
    hats
}

/// Periodic splitting of a three-component field on the 3-torus.
#[derive(Debug, Clone)]
pub struct HelmholtzParts {
    /// Gradient part: per mode k != 0 the projection (k.u) k / |k|^2.
    pub longitudinal: Vec<TorusGrid>,
    /// Divergence-free remainder on the nonzero modes.
    pub transverse: Vec<TorusGrid>,
    /// The k = 0 mode, harmonic on the torus and part of neither subspace.
    pub mean: [Complex64; 3],
}

/// Splits a periodic vector field into gradient and divergence-free parts
/// plus its constant mode. Mode-wise: u_par(k) = (k.u(k)) k / |k|^2 and
/// u_perp(k) = u(k) - u_par(k); the constant mode is returned separately
/// because on the torus it is harmonic and belongs to neither subspace.
pub fn helmholtz_decompose(u: &[TorusGrid]) -> Result<HelmholtzParts> {
    if u.len() != 3 {
        return Err(invalid(format!(
            "need three field components, got {}",
            u.len()
        )));
    }
    let m = u[0].points_per_axis;
    if u.iter().any(|c| c.n != 3 || c.points_per_axis != m) {
        return Err(invalid("components must share one 3-torus grid"));
    }
    let total = u[0].len();
    let mut hats: Vec<Vec<Complex64>> = u.iter().map(|c| c.samples.clone()).collect();
    for hat in hats.iter_mut() {
        fft_all_axes(hat, 3, m, true);
    }
    let mut mean = [Complex64::new(0.0, 0.0); 3];
    let mut par: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); total]; 3];
    let mut perp = par.clone();
    for flat in 0..total {
        let k = [
            signed_mode(flat / (m * m), m) as f64,
            signed_mode((flat / m) % m, m) as f64,
            signed_mode(flat % m, m) as f64,
        ];
        let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if ksq == 0.0 {
            for c in 0..3 {
                mean[c] = hats[c][flat] / total as f64;
            }
            continue;
        }
        let dot = k[0] * hats[0][flat] + k[1] * hats[1][flat] + k[2] * hats[2][flat];
        for c in 0..3 {
            let parallel = dot * k[c] / ksq;
            par[c][flat] = parallel;
            perp[c][flat] = hats[c][flat] - parallel;
        }
    }
    let back = |mut hat: Vec<Complex64>| -> Result<TorusGrid> {
        fft_all_axes(&mut hat, 3, m, false);
        let scale = 1.0 / total as f64;
        for v in hat.iter_mut() {
            *v *= scale;
        }
        TorusGrid::new(3, m, hat).map_err(|e| invalid(e.to_string()))
    };
    let longitudinal = par.into_iter().map(back).collect::<Result<Vec<_>>>()?;
    let transverse = perp.into_iter().map(back).collect::<Result<Vec<_>>>()?;
    Ok(HelmholtzParts {
        longitudinal,
        transverse,
        mean,
    })
}

/// Order parameter, gauge field, and coupling on a periodic grid with at
/// most three axes. The gauge field carries one real component per axis.
#[derive(Debug, Clone)]
pub struct GLState {
    pub psi: TorusGrid,
    pub a: Vec<TorusGrid>,
    pub kappa: f64,
}

impl GLState {
    pub fn new(psi: TorusGrid, a: Vec<TorusGrid>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be positive, got {kappa}")));
        }
        if psi.n > 3 {
            return Err(invalid("at most three axes are supported"));
        }
        if a.len() != psi.n {
            return Err(invalid(format!(
                "need one gauge component per axis: got {} for {} axes",
                a.len(),
                psi.n
            )));
        }
        for c in &a {
            if c.n != psi.n || c.points_per_axis != psi.points_per_axis {
                return Err(invalid("gauge components must share the order-parameter grid"));
            }
            if c.samples.iter().any(|z| z.im.abs() > 1e-12) {
                return Err(invalid("gauge field must be real"));
            }
        }
        Ok(GLState { psi, a, kappa })
    }

    fn shape(&self) -> (usize, usize) {
        (self.psi.n, self.psi.points_per_axis)
    }
}

/// (-i d_axis - A_axis) applied to a sample array.
fn covariant(
    field: &[Complex64],
    a_axis: &[Complex64],
    n: usize,
    m: usize,
    axis: usize,
) -> Vec<Complex64> {
    let mut out = spectral_derivative(field, n, m, axis);
    for (i, v) in out.iter_mut().enumerate() {
        *v = Complex64::new(0.0, -1.0) * *v - a_axis[i].re * field[i];
    }
    out
}

/// Curl of a gauge field: empty in one dimension, the single scalar
/// d0 a1 - d1 a0 in two, the usual three components in three.
fn curl_raw(a: &[Vec<Complex64>], n: usize, m: usize) -> Vec<Vec<Complex64>> {
    let d = |axis_field: &[Complex64], axis: usize| spectral_derivative(axis_field, n, m, axis);
    let sub = |p: Vec<Complex64>, q: Vec<Complex64>| -> Vec<Complex64> {
        p.into_iter().zip(q).map(|(x, y)| x - y).collect()
    };
    match n {
        1 => Vec::new(),
        2 => vec![sub(d(&a[1], 0), d(&a[0], 1))],
        3 => vec![
            sub(d(&a[2], 1), d(&a[1], 2)),
            sub(d(&a[0], 2), d(&a[2], 0)),
            sub(d(&a[1], 0), d(&a[0], 1)),
        ],
        _ => unreachable!("state validation caps the dimension at three"),
    }
}

fn cell_weight(n: usize, m: usize) -> f64 {
    (TAU / m as f64).powi(n as i32)
}

/// Discrete energy: cell-weighted sum of |(-i grad - A) psi|^2
/// + (kappa^2/2)(|psi|^2 - 1)^2 + |curl A|^2 with spectral derivatives.
pub fn gl_energy(s: &GLState) -> f64 {
    let (n, m) = s.shape();
    let mut density = 0.0;
    for axis in 0..n {
        let p = covariant(&s.psi.samples, &s.a[axis].samples, n, m, axis);
        density += p.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let k2 = s.kappa * s.kappa;
    density += s
        .psi
        .samples
        .iter()
        .map(|z| {
            let gap = z.norm_sqr() - 1.0;
            0.5 * k2 * gap * gap
        })
        .sum::<f64>();
    let a_raw: Vec<Vec<Complex64>> = s.a.iter().map(|c| c.samples.clone()).collect();
    for c in curl_raw(&a_raw, n, m) {
        density += c.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    cell_weight(n, m) * density
}

/// L2 gradient pair of the discrete energy (no cross-check), with the
/// rounding dust on the imaginary part of the gauge gradient dropped.
fn gl_gradient_parts(s: &GLState) -> (Vec<Complex64>, Vec<Vec<f64>>) {
    let (n, m) = s.shape();
    let total = s.psi.len();
    let mut grad_psi = vec![Complex64::new(0.0, 0.0); total];
    let mut grad_a = vec![vec![0.0f64; total]; n];
    for axis in 0..n {
        let p = covariant(&s.psi.samples, &s.a[axis].samples, n, m, axis);
        let pp = covariant(&p, &s.a[axis].samples, n, m, axis);
        for i in 0..total {
            grad_psi[i] += pp[i];
            grad_a[axis][i] -= (s.psi.samples[i].conj() * p[i]).re;
        }
    }
    let k2 = s.kappa * s.kappa;
    for (g, z) in grad_psi.iter_mut().zip(s.psi.samples.iter()) {
        *g -= k2 * (1.0 - z.norm_sqr()) * z;
    }
    let a_raw: Vec<Vec<Complex64>> = s.a.iter().map(|c| c.samples.clone()).collect();
    match n {
        1 => {}
        2 => {
            let c = curl_raw(&a_raw, n, m).pop().expect("2d curl is one scalar");
            let d1c = spectral_derivative(&c, n, m, 1);
            let d0c = spectral_derivative(&c, n, m, 0);
            for i in 0..total {
                grad_a[0][i] += d1c[i].re;
                grad_a[1][i] -= d0c[i].re;
            }
        }
        3 => {
            let c = curl_raw(&a_raw, n, m);
            let cc = curl_raw(&c, n, m);
            for axis in 0..3 {
                for i in 0..total {
                    grad_a[axis][i] += cc[axis][i].re;
                }
            }
        }
        _ => unreachable!("state validation caps the dimension at three"),
    }
    (grad_psi, grad_a)
}

fn deterministic_probe(len: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-0.5..0.5)).collect()
}

/// L2 gradient pair of the energy: grad_psi is (-i grad - A)^2 psi
/// minus kappa^2 (1 - |psi|^2) psi, and grad_A is curl curl A minus
/// Re(conj(psi) (-i grad - A) psi), with spectral derivatives, so the
/// directional derivative of [`gl_energy`] along (phi, a) equals
/// 2 Re<grad_psi, phi> + 2 <grad_A, a> in the cell-weighted inner product.
///
/// `fd_spacing` sets the step of a built-in cross-check: the gradient is
/// compared against one central difference quotient of the energy along a
/// deterministic probe direction and a mismatch is reported as an error.
pub fn gl_gradient(s: &GLState, fd_spacing: f64) -> Result<(TorusGrid, Vec<TorusGrid>)> {
    if !(fd_spacing > 0.0 && fd_spacing.is_finite()) {
        return Err(invalid(format!(
            "difference spacing must be positive, got {fd_spacing}"
        )));
    }
    let (n, m) = s.shape();
    let total = s.psi.len();
    let (grad_psi, grad_a) = gl_gradient_parts(s);

    let probe = deterministic_probe((2 + n) * total, 11);
    let shifted = |sign: f64| -> GLState {
        let mut out = s.clone();
        for i in 0..total {
            out.psi.samples[i] += sign
                * fd_spacing
                * Complex64::new(probe[i], probe[total + i]);
        }
        for axis in 0..n {
            for i in 0..total {
                out.a[axis].samples[i] +=
                    Complex64::new(sign * fd_spacing * probe[(2 + axis) * total + i], 0.0);
            }
        }
        out
    };
    let plus = gl_energy(&shifted(1.0));
    let minus = gl_energy(&shifted(-1.0));
    let center = gl_energy(s);
    let quotient = (plus - minus) / (2.0 * fd_spacing);
    let mut dot = 0.0;
    for i in 0..total {
        dot += grad_psi[i].re * probe[i] + grad_psi[i].im * probe[total + i];
    }
    for axis in 0..n {
        for i in 0..total {
            dot += grad_a[axis][i] * probe[(2 + axis) * total + i];
        }
    }
    dot *= 2.0 * cell_weight(n, m);
    let curvature = ((plus - 2.0 * center + minus) / (fd_spacing * fd_spacing)).abs();
    let scale = curvature
        .max(quotient.abs())
        .max(plus.abs() + center.abs() + minus.abs())
        .max(1.0);
    let tol = 100.0 * fd_spacing * fd_spacing * scale
        + 1e4 * f64::EPSILON * (plus.abs() + minus.abs()) / (2.0 * fd_spacing)
        + 1e-10;
    if (quotient - dot).abs() > tol {
        return Err(VariationalError::Inconsistent(format!(
            "gradient {dot} vs difference quotient {quotient} (tolerance {tol:.3e})"
        )));
    }

    let psi_grid = TorusGrid::new(n, m, grad_psi).map_err(|e| invalid(e.to_string()))?;
    let a_grids = grad_a
        .into_iter()
        .map(|g| {
            TorusGrid::new(n, m, g.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
                .map_err(|e| invalid(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((psi_grid, a_grids))
}

/// Coordinates [Re psi, Im psi, a_0, a_1, ...] of a state.
pub fn flatten_gl_state(s: &GLState) -> Vec<f64> {
    let total = s.psi.len();
    let mut flat = Vec::with_capacity((2 + s.a.len()) * total);
    flat.extend(s.psi.samples.iter().map(|z| z.re));
    flat.extend(s.psi.samples.iter().map(|z| z.im));
    for c in &s.a {
        flat.extend(c.samples.iter().map(|z| z.re));
    }
    flat
}

/// Rebuilds a state from [`flatten_gl_state`] coordinates.
pub fn gl_state_from_flat(n: usize, m: usize, kappa: f64, flat: &[f64]) -> Result<GLState> {
    let total = m.pow(n as u32);
    if flat.len() != (2 + n) * total {
        return Err(invalid(format!(
            "expected {} coordinates, got {}",
            (2 + n) * total,
            flat.len()
        )));
    }
    let psi = TorusGrid::new(
        n,
        m,
        (0..total)
            .map(|i| Complex64::new(flat[i], flat[total + i]))
            .collect(),
    )
    .map_err(|e| invalid(e.to_string()))?;
    let a = (0..n)
        .map(|axis| {
            TorusGrid::new(
                n,
                m,
                flat[(2 + axis) * total..(3 + axis) * total]
                    .iter()
                    .map(|&v| Complex64::new(v, 0.0))
                    .collect(),
            )
            .map_err(|e| invalid(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    GLState::new(psi, a, kappa)
}

/// The discrete energy as a functional on flattened coordinates, carrying
/// its analytic coordinate gradient (2 x cell weight x the L2 gradient
/// pair).
pub fn gl_energy_functional(n: usize, m: usize, kappa: f64) -> Result<Functional> {
    let probe = gl_state_from_flat(n, m, kappa, &vec![0.0; (2 + n) * m.pow(n as u32)])?;
    drop(probe);
    let total = m.pow(n as u32);
    let eval = move |flat: &[f64]| -> f64 {
        match gl_state_from_flat(n, m, kappa, flat) {
            Ok(s) => gl_energy(&s),
            Err(_) => f64::NAN,
        }
    };
    let grad = move |flat: &[f64]| -> Vec<f64> {
        let s = match gl_state_from_flat(n, m, kappa, flat) {
            Ok(s) => s,
            Err(_) => return vec![f64::NAN; (2 + n) * total],
        };
        let (gp, ga) = gl_gradient_parts(&s);
        let w2 = 2.0 * cell_weight(n, m);
        let mut out = Vec::with_capacity((2 + n) * total);
        out.extend(gp.iter().map(|z| w2 * z.re));
        out.extend(gp.iter().map(|z| w2 * z.im));
        for axis in ga {
            out.extend(axis.into_iter().map(|v| w2 * v));
        }
        out
    };
    Ok(Functional::new((2 + n) * total, eval)?.with_gradient(grad))
}

/// One gradient-descent run on a [`Functional`].
#[derive(Debug, Clone)]
pub struct DescentRun {
    pub state: Vec<f64>,
    /// Energies of the start and of every accepted step; nonincreasing.
    pub energy_path: Vec<f64>,
    /// Gradient max-norms at the same states as `energy_path`.
    pub grad_path: Vec<f64>,
    pub grad_max_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed-step gradient descent: a step that raises the energy is retried
/// at half the step size, so the energy path is nonincreasing by
/// construction. Stops once the gradient max-norm drops to `tol`. Uses the
/// analytic gradient when present, coordinate-wise central differences
/// otherwise.
pub fn minimize_functional(
    e: &Functional,
    start: &[f64],
    step_size: f64,
    max_iters: usize,
    tol: f64,
) -> Result<DescentRun> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {step_size}")));
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(invalid(format!("tolerance must be nonnegative, got {tol}")));
    }
    let gradient = |x: &[f64]| -> Result<Vec<f64>> {
        let g = match e.gradient(x) {
            Some(g) => g,
            None => {
                let h = 1e-6 * (1.0 + x.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
                (0..e.dim())
                    .map(|i| {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[i] += h;
                        xm[i] -= h;
                        Ok((e.eval(&xp)? - e.eval(&xm)?) / (2.0 * h))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        if g.len() != e.dim() || g.iter().any(|v| !v.is_finite()) {
            return Err(invalid("gradient must be finite and match the dimension"));
        }
        Ok(g)
    };

    let mut x = start.to_vec();
    let mut energy = e.eval(&x)?;
    let mut path = vec![energy];
    let mut grad_path = Vec::new();
    let mut step = step_size;
    let mut halvings = 0usize;
    for iter in 0..max_iters {
        let g = gradient(&x)?;
        let grad_max = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        grad_path.push(grad_max);
        if grad_max <= tol {
            return Ok(DescentRun {
                state: x,
                energy_path: path,
                grad_path,
                grad_max_norm: grad_max,
                iterations: iter,
                converged: true,
            });
        }
        loop {
            let candidate = add_scaled(&x, &g, -step);
            let value = e.eval(&candidate)?;
            if value <= energy {
                x = candidate;
                energy = value;
                path.push(energy);
                break;
            }
            step *= 0.5;
            halvings += 1;
            if halvings > 600 {
                return Ok(DescentRun {
                    state: x,
                    energy_path: path,
                    grad_path,
                    grad_max_norm: grad_max,
                    iterations: iter,
                    converged: false,
                });
            }
        }
    }
    let g = gradient(&x)?;
    let grad_max = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    grad_path.push(grad_max);
    Ok(DescentRun {
        state: x,
        energy_path: path,
        grad_path,
        grad_max_norm: grad_max,
        iterations: max_iters,
        converged: grad_max <= tol,
    })
}

/// Reported when the descent exhausts its iteration budget.
#[derive(Debug, Clone)]
pub struct NonConvergenceReport {
    pub state: GLState,
    pub energy_path: Vec<f64>,
    pub grad_max_norm: f64,
}

/// Gradient descent on the discrete energy from `s0`. `tol` bounds the
/// max-norm of the flattened coordinate gradient (twice the cell-weighted
/// L2 gradient pair), so a converged state satisfies the stationarity
/// equations to that tolerance. Exhausting `max_iters` reports the last
/// state instead of discarding it.
pub fn gl_minimize(
    s0: &GLState,
    step_size: f64,
    max_iters: usize,
    tol: f64,
) -> Result<(GLState, Vec<f64>)> {
    let (n, m) = s0.shape();
    let e = gl_energy_functional(n, m, s0.kappa)?;
    let run = minimize_functional(&e, &flatten_gl_state(s0), step_size, max_iters, tol)?;
    let state = gl_state_from_flat(n, m, s0.kappa, &run.state)?;
    if !run.converged {
        return Err(VariationalError::NonConvergence(Box::new(
            NonConvergenceReport {
                state,
                energy_path: run.energy_path,
                grad_max_norm: run.grad_max_norm,
            },
        )));
    }
    Ok((state, run.energy_path))
}

/// Checks the secant inequality at s in {1/4, 1/2, 3/4} and the
/// monotone-gradient inequality (dE(x) - dE(y))(x - y) >= 0 over the given
/// pairs; the report passes iff the worst violation is within 1e-8.
pub fn convexity_check(e: &Functional, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<BoundReport> {
    let mut worst = 0.0f64;
    for (x, y) in pairs {
        if x.len() != e.dim() || y.len() != e.dim() {
            return Err(invalid("pair dimension mismatch"));
        }
        let ex = e.eval(x)?;
        let ey = e.eval(y)?;
        for s in [0.25, 0.5, 0.75] {
            let mid: Vec<f64> = x
                .iter()
                .zip(y.iter())
                .map(|(a, b)| s * a + (1.0 - s) * b)
                .collect();
            worst = worst.max(e.eval(&mid)? - (s * ex + (1.0 - s) * ey));
        }
        let dir: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let dir_scale = dir.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if dir_scale == 0.0 {
            continue;
        }
        let h = 1e-5 / (1.0 + dir_scale);
        let dx = gateaux_derivative(e, x, &dir, h)?;
        let dy = gateaux_derivative(e, y, &dir, h)?;
        worst = worst.max(dy - dx);
    }
    Ok(BoundReport::check("convexity", worst, 0.0, 1e-8))
}

/// One singular branch point of a parameter-dependent map.
#[derive(Debug, Clone)]
pub struct BifurcationCandidate {
    pub mu: f64,
    pub smallest_singular: f64,
    /// <v, d_mu d_x F(mu, 0) v> for the near-kernel direction v.
    pub transversality: f64,
}

/// Scan of the linearization d_x F(mu, 0) over a parameter grid.
#[derive(Debug, Clone)]
pub struct BifurcationScan {
    pub mu_grid: Vec<f64>,
    pub smallest_singular: Vec<f64>,
    pub candidates: Vec<BifurcationCandidate>,
}

const BIFURCATION_FD: f64 = 1e-6;

/// Scans [mu_lo, mu_hi] for parameters where the linearization of F around
/// the trivial branch x = 0 loses invertibility. Local minima of the
/// smallest singular value that come with a determinant sign change are
/// refined by bisection; refined points below 1e-6 times the largest
/// singular value seen become candidates, each with its transversality
/// datum.
pub fn bifurcation_scan<F>(
    f: F,
    mu_range: (f64, f64),
    n_points: usize,
    state_dim: usize,
) -> Result<BifurcationScan>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let (lo, hi) = mu_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(invalid(format!("need a finite range with lo < hi, got ({lo}, {hi})")));
    }
    if n_points < 3 {
        return Err(invalid("need at least three scan points"));
    }
    if state_dim == 0 {
        return Err(invalid("state dimension must be positive"));
    }
    let apply = |mu: f64, x: &[f64]| -> Result<Vec<f64>> {
        let out = f(mu, x);
        if out.len() != state_dim {
            return Err(invalid(format!(
                "map returned {} components, expected {state_dim}",
                out.len()
            )));
        }
        Ok(out)
    };
    let jacobian = |mu: f64| -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(state_dim, state_dim);
        for col in 0..state_dim {
            let mut xp = vec![0.0; state_dim];
            let mut xm = vec![0.0; state_dim];
            xp[col] = BIFURCATION_FD;
            xm[col] = -BIFURCATION_FD;
            let fp = apply(mu, &xp)?;
            let fm = apply(mu, &xm)?;
            for row in 0..state_dim {
                j[(row, col)] = (fp[row] - fm[row]) / (2.0 * BIFURCATION_FD);
            }
        }
        Ok(j)
    };

    let zero = vec![0.0; state_dim];
    let mu_grid: Vec<f64> = (0..n_points)
        .map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
        .collect();
    let mut smallest = Vec::with_capacity(n_points);
    let mut largest_seen = 0.0f64;
    let mut dets = Vec::with_capacity(n_points);
    for &mu in &mu_grid {
        let trivial = apply(mu, &zero)?;
        let defect = trivial.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if defect > 1e-10 {
            return Err(invalid(format!(
                "no trivial branch: |F(mu, 0)| = {defect:.3e} at mu = {mu}"
            )));
        }
        let j = jacobian(mu)?;
        dets.push(j.determinant());
        let sv = j.svd(false, false).singular_values;
        smallest.push(sv.min());
        largest_seen = largest_seen.max(sv.max());
    }
    let scale = if largest_seen > 0.0 { largest_seen } else { 1.0 };

    let mut candidates: Vec<BifurcationCandidate> = Vec::new();
    for i in 1..n_points - 1 {
        if !(smallest[i] <= smallest[i - 1] && smallest[i] <= smallest[i + 1]) {
            continue;
        }
        // Sign protection: only an odd crossing of the determinant marks a
        // genuine loss of invertibility next to this minimum.
        let bracket = if dets[i - 1] * dets[i] <= 0.0 {
            Some((mu_grid[i - 1], mu_grid[i], dets[i - 1]))
        } else if dets[i] * dets[i + 1] <= 0.0 {
            Some((mu_grid[i], mu_grid[i + 1], dets[i]))
        } else {
            None
        };
        let Some((mut a, mut b, det_a)) = bracket else {
            continue;
        };
        let mut sign_a = det_a.signum();
        if sign_a == 0.0 {
            sign_a = 1.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            let det_mid = jacobian(mid)?.determinant();
            if det_mid == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if det_mid.signum() == sign_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        let mu_star = 0.5 * (a + b);
        if candidates
            .iter()
            .any(|c| (c.mu - mu_star).abs() <= 1e-9 * (hi - lo))
        {
            continue;
        }
        let j = jacobian(mu_star)?;
        let svd = j.clone().svd(false, true);
        let (idx, s_star) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, s)| (i, *s))
            .expect("nonempty singular spectrum");
        if s_star >= 1e-6 * scale {
            continue;
        }
        let v = svd
            .v_t
            .as_ref()
            .expect("right singular vectors requested")
            .row(idx)
            .transpose();
        let dmu = 1e-5 * (1.0 + mu_star.abs());
        let dj = (jacobian(mu_star + dmu)? - jacobian(mu_star - dmu)?) / (2.0 * dmu);
        let transversality = v.dot(&(&dj * &v));
        candidates.push(BifurcationCandidate {
            mu: mu_star,
            smallest_singular: s_star,
            transversality,
        });
    }
    Ok(BifurcationScan {
        mu_grid,
        smallest_singular: smallest,
        candidates,
    })
}
