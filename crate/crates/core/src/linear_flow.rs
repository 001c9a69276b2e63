//! Linear ODE solutions (matrix exponentials, inhomogeneous closed form),
//! the Picard iteration for nonlinear ODEs, a reference RK4 integrator, and
//! Grönwall-type bound monitors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::report::BoundReport;

/// Scaling-and-squaring kicks in once the scaled 1-norm exceeds this.
const SCALING_THRESHOLD: f64 = 1.0;
/// The exponential series is truncated once a term's 1-norm drops below this.
const EXP_SERIES_CUTOFF: f64 = 1e-18;
/// Hard cap on series terms; at argument norm <= 1 the cutoff is reached long
/// before this.
const EXP_SERIES_MAX_TERMS: usize = 120;
/// Points per axis when estimating a field's sup over a ball.
const LATTICE_POINTS_PER_AXIS: usize = 33;
/// Lattice estimation is refused beyond this many sample points.
const LATTICE_MAX_POINTS: usize = 10_000_000;
/// Relative slack allowed when checking the Grönwall bound.
const GRONWALL_REL_SLACK: f64 = 1e-10;
/// Absolute slack allowed when checking the flow-divergence bound.
const FLOW_GAP_SLACK: f64 = 1e-8;
/// Internal integrator step used by the flow-divergence check.
const FLOW_GAP_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum LinearFlowError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("iterate left the ball of radius {radius} at time {time}")]
    DomainEscape { time: f64, radius: f64 },
    #[error("state became non-finite; last valid time {last_valid_time}")]
    BlowUp { last_valid_time: f64 },
}

pub type Result<T> = std::result::Result<T, LinearFlowError>;

/// A vector field x -> F(x) with optional Lipschitz constant and the radius
/// of the ball (around the initial point) on which those data are declared.
pub struct VectorField {
    pub dim: usize,
    eval: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub lipschitz: Option<f64>,
    pub ball_radius: Option<f64>,
}

impl VectorField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        VectorField {
            dim,
            eval: Box::new(eval),
            lipschitz: None,
            ball_radius: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_ball_radius(mut self, rho: f64) -> Self {
        self.ball_radius = Some(rho);
        self
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.eval)(x)
    }

    /// Estimate sup |F| over the ball of radius `rho` around `center` by
    /// scanning a 33-points-per-axis lattice. An estimate, not a certified
    /// bound: features narrower than the lattice spacing are missed.
    pub fn sup_on_ball(&self, center: &DVector<f64>, rho: f64) -> Result<f64> {
        let n = self.dim;
        let total = (LATTICE_POINTS_PER_AXIS as f64).powi(n as i32);
        if total > LATTICE_MAX_POINTS as f64 {
            return Err(LinearFlowError::InvalidInput(format!(
                "lattice estimate infeasible in dimension {n}"
            )));
        }
        let m = LATTICE_POINTS_PER_AXIS;
        let mut idx = vec![0usize; n];
        let mut sup = 0.0f64;
        loop {
            let mut x = center.clone();
            for (a, &i) in idx.iter().enumerate() {
                x[a] += rho * (2.0 * i as f64 / (m - 1) as f64 - 1.0);
            }
            if (&x - center).norm() <= rho {
                sup = sup.max(self.eval(&x).norm());
            }
            // Advance the mixed-radix counter over the lattice.
            let mut a = 0;
            loop {
                if a == n {
                    return Ok(sup);
                }
                idx[a] += 1;
                if idx[a] < m {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
        }
    }
}

/// How a trajectory was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Picard,
    Rk4,
    ClosedForm,
}

/// Ordered (time, state) samples of a flow. Times are strictly increasing
/// and uniformly spaced; states match times one to one.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub method: IntegrationMethod,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DVector<f64>>, method: IntegrationMethod) -> Self {
        assert_eq!(times.len(), states.len());
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        Trajectory {
            times,
            states,
            method,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State stored at the sample closest to `t` (within half a grid step).
    pub fn state_at(&self, t: f64) -> Option<&DVector<f64>> {
        if self.times.is_empty() {
            return None;
        }
        let step = if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            f64::INFINITY
        };
        let (i, ti) = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?;
        if (ti - t).abs() <= 0.5 * step {
            Some(&self.states[i])
        } else {
            None
        }
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is nonempty")
    }
}

fn check_finite_matrix(h: &DMatrix<Complex64>) -> Result<()> {
    if h.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinearFlowError::InvalidInput(
            "matrix has non-finite entries".into(),
        ))
    }
}

/// Maximum column sum of entrywise moduli.
fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Truncated exponential series for arguments with 1-norm <= 1.
fn exp_series(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=EXP_SERIES_MAX_TERMS {
        term = (&term * m) / Complex64::new(k as f64, 0.0);
        sum += &term;
        if one_norm(&term) < EXP_SERIES_CUTOFF {
            break;
        }
    }
    sum
}

/// exp(tH) by the power series, with scaling and squaring once ||tH||_1
/// exceeds 1 so the series stays well conditioned.
pub fn matrix_exponential(h: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
    check_finite_matrix(h)?;
    if !t.is_finite() {
        return Err(LinearFlowError::InvalidInput("t is not finite".into()));
    }
    if h.nrows() != h.ncols() {
        return Err(LinearFlowError::InvalidInput("matrix is not square".into()));
    }
    let m = h.map(|z| z * Complex64::new(t, 0.0));
    let norm = one_norm(&m);
    if norm <= SCALING_THRESHOLD {
        return Ok(exp_series(&m));
    }
    let s = (norm.log2().ceil() as u32).max(1);
    let scaled = m.map(|z| z / Complex64::new(2f64.powi(s as i32), 0.0));
    let mut e = exp_series(&scaled);
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

/// exp(t J_r(lambda)) in closed form: e^{t lambda} times the upper-triangular
/// Toeplitz matrix with t^m/m! on the m-th superdiagonal.
pub fn jordan_block_exponential(
    lambda: Complex64,
    r: usize,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    if r == 0 {
        return Err(LinearFlowError::InvalidInput(
            "Jordan block size must be at least 1".into(),
        ));
    }
    let scale = (lambda * Complex64::new(t, 0.0)).exp();
    let mut out = DMatrix::<Complex64>::zeros(r, r);
    // Entries along the m-th superdiagonal share the value t^m/m!.
    let mut coeff = 1.0;
    for m in 0..r {
        if m > 0 {
            coeff *= t / m as f64;
        }
        for i in 0..r - m {
            out[(i, i + m)] = scale * Complex64::new(coeff, 0.0);
        }
    }
    Ok(out)
}

/// Solution of x' = Ax + f(t), x(0) = x0, evaluated at time t:
/// e^{tA} x0 + \int_0^t e^{(t-s)A} f(s) ds, the integral by composite
/// Simpson quadrature on `quad_steps` panels.
pub fn solve_linear_ivp<F>(
    a: &DMatrix<Complex64>,
    f: F,
    x0: &DVector<Complex64>,
    t: f64,
    quad_steps: usize,
) -> Result<DVector<Complex64>>
where
    F: Fn(f64) -> DVector<Complex64>,
{
    check_finite_matrix(a)?;
    if a.nrows() != x0.len() {
        return Err(LinearFlowError::InvalidInput(format!(
            "matrix dimension {} does not match state dimension {}",
            a.nrows(),
            x0.len()
        )));
    }
    if quad_steps == 0 {
        return Err(LinearFlowError::InvalidInput(
            "quad_steps must be positive".into(),
        ));
    }
    let probe = f(0.0);
    if probe.len() != x0.len() {
        return Err(LinearFlowError::InvalidInput(format!(
            "forcing dimension {} does not match state dimension {}",
            probe.len(),
            x0.len()
        )));
    }
    let mut x = matrix_exponential(a, t)? * x0;
    let h = t / quad_steps as f64;
    let weight = Complex64::new(h / 6.0, 0.0);
    for i in 0..quad_steps {
        let s0 = i as f64 * h;
        let s1 = s0 + 0.5 * h;
        let s2 = s0 + h;
        let g0 = matrix_exponential(a, t - s0)? * f(s0);
        let g1 = matrix_exponential(a, t - s1)? * f(s1);
        let g2 = matrix_exponential(a, t - s2)? * f(s2);
        x += (g0 + g1 * Complex64::new(4.0, 0.0) + g2) * weight;
    }
    Ok(x)
}

/// Result of a Picard run: the final iterate's trajectory on [-T, T] plus
/// the sup distances between successive iterates (for contraction checks).
pub struct PicardRun {
    pub trajectory: Trajectory,
    /// iterate_gaps[n] = sup_t |x_{n+1}(t) - x_n(t)|.
    pub iterate_gaps: Vec<f64>,
    /// Certified half-width T = min(rho / v_max, 1 / (2 L)).
    pub horizon: f64,
}

/// Picard iteration on the certified interval [-T, T] with
/// T = min(rho / v_max, 1/(2L)). The n-th iterate is the Picard map applied
/// n times to the constant path x0; time integrals use the trapezoid rule
/// on a uniform grid with `time_samples` subintervals per half-axis.
pub fn picard_solve(
    field: &VectorField,
    x0: &DVector<f64>,
    n_iter: usize,
    time_samples: usize,
) -> Result<PicardRun> {
    let l = field.lipschitz.ok_or_else(|| {
        LinearFlowError::InvalidInput("Picard requires a declared Lipschitz constant".into())
    })?;
    let rho = field.ball_radius.ok_or_else(|| {
        LinearFlowError::InvalidInput("Picard requires a declared ball radius".into())
    })?;
    if l <= 0.0 || rho <= 0.0 {
        return Err(LinearFlowError::InvalidInput(
            "Lipschitz constant and ball radius must be positive".into(),
        ));
    }
    if time_samples == 0 {
        return Err(LinearFlowError::InvalidInput(
            "time_samples must be positive".into(),
        ));
    }
    let v_max = field.sup_on_ball(x0, rho)?;
    let horizon = if v_max > 0.0 {
        (rho / v_max).min(0.5 / l)
    } else {
        0.5 / l
    };

    // Grid: 2 * time_samples + 1 nodes from -T to +T; node time_samples is 0.
    let n_nodes = 2 * time_samples + 1;
    let dt = horizon / time_samples as f64;
    let times: Vec<f64> = (0..n_nodes)
        .map(|i| (i as i64 - time_samples as i64) as f64 * dt)
        .collect();
    let zero_idx = time_samples;

    let mut current: Vec<DVector<f64>> = vec![x0.clone(); n_nodes];
    let mut iterate_gaps = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let velocities: Vec<DVector<f64>> = current.iter().map(|x| field.eval(x)).collect();
        let mut next: Vec<DVector<f64>> = vec![x0.clone(); n_nodes];
        // Cumulative trapezoid outward from t = 0 in both directions.
        for i in zero_idx + 1..n_nodes {
            next[i] = &next[i - 1] + (&velocities[i - 1] + &velocities[i]) * (0.5 * dt);
        }
        for i in (0..zero_idx).rev() {
            next[i] = &next[i + 1] - (&velocities[i] + &velocities[i + 1]) * (0.5 * dt);
        }
        for (i, x) in next.iter().enumerate() {
            if (x - x0).norm() > rho {
                return Err(LinearFlowError::DomainEscape {
                    time: times[i],
                    radius: rho,
                });
            }
        }
        let gap = current
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        iterate_gaps.push(gap);
        current = next;
    }

    Ok(PicardRun {
        trajectory: Trajectory::new(times, current, IntegrationMethod::Picard),
        iterate_gaps,
        horizon,
    })
}

/// Classical fixed-step RK4 driven by a plain closure. Shared by
/// `rk4_integrate` and the internal flow comparisons.
pub(crate) fn rk4_raw<F>(f: F, x0: &DVector<f64>, t_end: f64, step: f64) -> Result<Trajectory>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if !(step > 0.0) || !t_end.is_finite() {
        return Err(LinearFlowError::InvalidInput(
            "step must be positive and t_end finite".into(),
        ));
    }
    if t_end == 0.0 {
        return Ok(Trajectory::new(
            vec![0.0],
            vec![x0.clone()],
            IntegrationMethod::Rk4,
        ));
    }
    let n_steps_f = t_end.abs() / step;
    let n_steps = n_steps_f.round() as usize;
    if n_steps == 0 || (n_steps_f - n_steps as f64).abs() > 1e-9 * n_steps_f.max(1.0) {
        return Err(LinearFlowError::InvalidInput(format!(
            "step {step} does not divide t_end {t_end}"
        )));
    }
    let dt = t_end / n_steps as f64;
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut x = x0.clone();
    states.push(x.clone());
    times.push(0.0);
    for i in 0..n_steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * dt)));
        let k3 = f(&(&x + &k2 * (0.5 * dt)));
        let k4 = f(&(&x + &k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(LinearFlowError::BlowUp {
                last_valid_time: i as f64 * dt,
            });
        }
        times.push((i + 1) as f64 * dt);
        states.push(x.clone());
    }
    if t_end < 0.0 {
        times.reverse();
        states.reverse();
    }
    Ok(Trajectory::new(times, states, IntegrationMethod::Rk4))
}

/// Classical fixed-step RK4. `t_end` may be negative; the returned times are
/// stored in increasing order either way (use `state_at(t_end)` for the flow
/// endpoint). Fails with the last valid time if the state stops being finite.
pub fn rk4_integrate(
    field: &VectorField,
    x0: &DVector<f64>,
    t_end: f64,
    step: f64,
) -> Result<Trajectory> {
    rk4_raw(|x| field.eval(x), x0, t_end, step)
}

/// Check u(t) <= u(a) exp(int_a^t beta) at every sample, the integral by
/// the trapezoid rule. Passes iff every sample obeys the bound within
/// relative slack 1e-10; `left` reports the worst ratio u(t)/bound(t).
pub fn groenwall_check<B>(times: &[f64], u: &[f64], beta: B) -> Result<BoundReport>
where
    B: Fn(f64) -> f64,
{
    if times.is_empty() || u.is_empty() {
        return Err(LinearFlowError::InvalidInput("empty trajectory".into()));
    }
    if times.len() != u.len() {
        return Err(LinearFlowError::InvalidInput(
            "times and samples have different lengths".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LinearFlowError::InvalidInput(
            "times must be strictly increasing".into(),
        ));
    }
    if u.iter().any(|&v| !(v >= 0.0)) {
        return Err(LinearFlowError::InvalidInput(
            "samples must be nonnegative".into(),
        ));
    }
    let mut integral = 0.0;
    let mut prev_beta = beta(times[0]);
    let mut worst_ratio: f64 = 1.0;
    for i in 0..times.len() {
        if i > 0 {
            let b = beta(times[i]);
            integral += 0.5 * (prev_beta + b) * (times[i] - times[i - 1]);
            prev_beta = b;
        }
        let bound = u[0] * integral.exp();
        let ratio = if bound > 0.0 {
            u[i] / bound
        } else if u[i] == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        worst_ratio = worst_ratio.max(ratio);
    }
    Ok(BoundReport::check(
        "groenwall",
        worst_ratio,
        1.0,
        GRONWALL_REL_SLACK,
    ))
}

/// Compare the flow of F0 with the flow of the perturbed field F0 + eps*F1
/// against the bound eps*(C/L)*(e^{L|t|} - 1), where L is F0's declared
/// Lipschitz constant and C estimates sup |F1| over F1's declared ball
/// around x0. Both flows are integrated with RK4.
pub fn flow_divergence_gap(
    f0: &VectorField,
    f1: &VectorField,
    eps: f64,
    x0: &DVector<f64>,
    t: f64,
) -> Result<BoundReport> {
    let l = match f0.lipschitz {
        Some(l) if l > 0.0 => l,
        _ => {
            return Err(LinearFlowError::InvalidInput(
                "F0 must declare a positive Lipschitz constant".into(),
            ))
        }
    };
    if !(0.0..1.0).contains(&eps) {
        return Err(LinearFlowError::InvalidInput(
            "eps must lie in [0, 1)".into(),
        ));
    }
    let rho = f1.ball_radius.ok_or_else(|| {
        LinearFlowError::InvalidInput("F1 must declare the ball radius for sup estimation".into())
    })?;
    let c = f1.sup_on_ball(x0, rho)?;

    let n = ((t.abs() / FLOW_GAP_STEP).ceil() as usize).max(1);
    let step = t.abs() / n as f64;
    let direction = if t < 0.0 { -1.0 } else { 1.0 };
    let base = rk4_raw(|x| f0.eval(x), x0, direction * t.abs(), step)?;
    let perturbed = rk4_raw(
        |x| f0.eval(x) + f1.eval(x) * eps,
        x0,
        direction * t.abs(),
        step,
    )?;
    let observed = base
        .states
        .iter()
        .zip(perturbed.states.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let bound = eps * (c / l) * ((l * t.abs()).exp() - 1.0);
    Ok(BoundReport::check(
        "flow-divergence",
        observed,
        bound,
        FLOW_GAP_SLACK,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn max_entry_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn exp_of_nilpotent_shear() {
        let h = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        for &t in &[0.3, -2.0, 7.5] {
            let e = matrix_exponential(&h, t).unwrap();
            let expect = DMatrix::from_row_slice(2, 2, &[c(1.0), c(t), c(0.0), c(1.0)]);
            assert!(max_entry_diff(&e, &expect) < 1e-14, "t={t}");
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let h = DMatrix::<Complex64>::zeros(3, 3);
        let e = matrix_exponential(&h, 4.2).unwrap();
        assert!(max_entry_diff(&e, &DMatrix::identity(3, 3)) == 0.0);
    }

    #[test]
    fn exp_of_diagonal() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.5, 1.0), c(0.0), c(0.0), c(-2.0)],
        );
        let e = matrix_exponential(&h, 1.0).unwrap();
        assert!((e[(0, 0)] - Complex64::new(0.5, 1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - c((-2.0f64).exp())).norm() < 1e-14);
        assert!(e[(0, 1)].norm() == 0.0 && e[(1, 0)].norm() == 0.0);
    }

    #[test]
    fn exp_rejects_non_finite_entries() {
        let h = DMatrix::from_row_slice(1, 1, &[Complex64::new(f64::NAN, 0.0)]);
        assert!(matches!(
            matrix_exponential(&h, 1.0),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn jordan_block_rejects_empty() {
        assert!(matches!(
            jordan_block_exponential(c(1.0), 0, 1.0),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn jordan_block_scalar_and_nilpotent() {
        let s = jordan_block_exponential(Complex64::new(0.0, 2.0), 1, 3.0).unwrap();
        assert!((s[(0, 0)] - Complex64::new(0.0, 6.0).exp()).norm() < 1e-15);

        let n = jordan_block_exponential(c(0.0), 2, 5.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[c(1.0), c(5.0), c(0.0), c(1.0)]);
        assert!(max_entry_diff(&n, &expect) < 1e-15);
    }

    #[test]
    fn jordan_block_matches_series_path() {
        let lambda = c(1.0);
        let (r, t) = (3usize, 2.0);
        let mut j = DMatrix::<Complex64>::zeros(r, r);
        for i in 0..r {
            j[(i, i)] = lambda;
            if i + 1 < r {
                j[(i, i + 1)] = c(1.0);
            }
        }
        let closed = jordan_block_exponential(lambda, r, t).unwrap();
        let series = matrix_exponential(&j, t).unwrap();
        let scale = one_norm(&series);
        assert!(max_entry_diff(&closed, &series) <= 1e-12 * scale);
    }

    #[test]
    fn ivp_homogeneous_matches_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[c(0.1), c(1.0), c(-1.0), c(0.2)]);
        let x0 = DVector::from_vec(vec![c(1.0), c(-2.0)]);
        let sol = solve_linear_ivp(&a, |_| DVector::zeros(2), &x0, 0.7, 8).unwrap();
        let expect = matrix_exponential(&a, 0.7).unwrap() * &x0;
        assert!((sol - expect).norm() < 1e-12);
    }

    #[test]
    fn ivp_zero_matrix_is_pure_quadrature() {
        let a = DMatrix::<Complex64>::zeros(1, 1);
        let x0 = DVector::from_vec(vec![c(2.0)]);
        // f(s) = s^2 integrates to t^3/3; Simpson is exact for cubics.
        let sol =
            solve_linear_ivp(&a, |s| DVector::from_vec(vec![c(s * s)]), &x0, 3.0, 4).unwrap();
        assert!((sol[0] - c(2.0 + 9.0)).norm() < 1e-12);
    }

    #[test]
    fn ivp_scalar_forced_growth() {
        let a = DMatrix::from_row_slice(1, 1, &[c(1.0)]);
        let x0 = DVector::from_vec(vec![c(0.0)]);
        let sol =
            solve_linear_ivp(&a, |_| DVector::from_vec(vec![c(1.0)]), &x0, 1.0, 64).unwrap();
        assert!((sol[0] - c(1.0f64.exp() - 1.0)).norm() < 1e-8);
    }

    #[test]
    fn ivp_rejects_dimension_mismatch() {
        let a = DMatrix::<Complex64>::zeros(2, 2);
        let x0 = DVector::from_vec(vec![c(0.0)]);
        assert!(matches!(
            solve_linear_ivp(&a, |_| DVector::zeros(2), &x0, 1.0, 4),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn picard_zero_field_stays_constant() {
        let f = VectorField::new(1, |_| DVector::zeros(1))
            .with_lipschitz(1.0)
            .with_ball_radius(1.0);
        let x0 = DVector::from_vec(vec![3.0]);
        let run = picard_solve(&f, &x0, 4, 16).unwrap();
        assert!(run
            .trajectory
            .states
            .iter()
            .all(|x| (x - &x0).norm() == 0.0));
        assert!(run.iterate_gaps.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn picard_iterates_truncate_exponential_series() {
        // F(x) = x from x0 = 1: the n-th Picard iterate is the degree-n
        // Taylor polynomial of e^t, up to trapezoid quadrature error.
        let f = VectorField::new(1, |x: &DVector<f64>| x.clone())
            .with_lipschitz(1.0)
            .with_ball_radius(1.0);
        let x0 = DVector::from_vec(vec![1.0]);
        let n_iter = 5;
        let samples = 400;
        let run = picard_solve(&f, &x0, n_iter, samples).unwrap();
        assert!((run.horizon - 0.5).abs() < 1e-12); // min(1/2, 1/(2*1))
        let quad_slack = 10.0 * run.horizon / (samples as f64 * samples as f64);
        for (i, &t) in run.trajectory.times.iter().enumerate() {
            let mut partial = 0.0;
            let mut term = 1.0;
            for k in 0..=n_iter {
                if k > 0 {
                    term *= t / k as f64;
                }
                partial += term;
            }
            let got = run.trajectory.states[i][0];
            assert!(
                (got - partial).abs() <= quad_slack,
                "t={t}: {got} vs {partial}"
            );
        }
    }

    #[test]
    fn picard_gap_to_closed_form_halves_per_iterate() {
        // F(x) = lambda x: the gap to the closed-form flow contracts at
        // least geometrically with ratio 1/2 plus quadrature slack.
        let lambda = -0.8;
        let f = VectorField::new(1, move |x: &DVector<f64>| x * lambda)
            .with_lipschitz(0.8)
            .with_ball_radius(2.0);
        let x0 = DVector::from_vec(vec![1.0]);
        let samples = 512;
        let quad_slack = 10.0 / (samples as f64 * samples as f64);
        let mut gaps = Vec::new();
        for n_iter in 0..6 {
            let run = picard_solve(&f, &x0, n_iter, samples).unwrap();
            let gap = run
                .trajectory
                .times
                .iter()
                .zip(run.trajectory.states.iter())
                .map(|(&t, x)| (x[0] - (lambda * t).exp()).abs())
                .fold(0.0, f64::max);
            gaps.push(gap);
        }
        for n in 1..gaps.len() {
            assert!(
                gaps[n] <= 0.5f64.powi(n as i32) * gaps[0] + quad_slack,
                "n={n}: {gaps:?}"
            );
        }
    }

    #[test]
    fn picard_requires_declared_metadata() {
        let f = VectorField::new(1, |x: &DVector<f64>| x.clone());
        let x0 = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            picard_solve(&f, &x0, 3, 16),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn picard_reports_domain_escape() {
        // A spike hidden between lattice nodes makes v_max a gross
        // underestimate, so an iterate can leave the declared ball.
        let f = VectorField::new(1, |x: &DVector<f64>| {
            let spike_center = 1.0 / 32.0;
            let spike = 1000.0 * (1.0 - 64.0 * (x[0] - spike_center).abs()).max(0.0);
            DVector::from_vec(vec![1.0 + spike])
        })
        .with_lipschitz(1.0)
        .with_ball_radius(1.0);
        let x0 = DVector::from_vec(vec![0.0]);
        // v_max is estimated as 1 on the lattice, so T = 1/2; the second
        // iterate integrates through the spike and escapes.
        let result = picard_solve(&f, &x0, 3, 64);
        assert!(matches!(
            result,
            Err(LinearFlowError::DomainEscape { .. })
        ));
    }

    #[test]
    fn rk4_zero_field_stays_constant() {
        let f = VectorField::new(2, |_| DVector::zeros(2));
        let x0 = DVector::from_vec(vec![1.0, 2.0]);
        let traj = rk4_integrate(&f, &x0, 1.0, 0.125).unwrap();
        assert!(traj.states.iter().all(|x| (x - &x0).norm() == 0.0));
    }

    #[test]
    fn rk4_exponential_growth_accuracy() {
        let f = VectorField::new(1, |x: &DVector<f64>| x.clone());
        let x0 = DVector::from_vec(vec![1.0]);
        let traj = rk4_integrate(&f, &x0, 1.0, 1e-3).unwrap();
        assert!((traj.last_state()[0] - 1.0f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn rk4_rotation_returns_home() {
        let f = VectorField::new(2, |x: &DVector<f64>| DVector::from_vec(vec![-x[1], x[0]]));
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let t_end = 2.0 * std::f64::consts::PI;
        let traj = rk4_integrate(&f, &x0, t_end, t_end / 8192.0).unwrap();
        assert!((traj.last_state() - &x0).norm() < 1e-8);
    }

    #[test]
    fn rk4_reports_blow_up_time() {
        // x' = x^2 from 1 blows up at t = 1.
        let f = VectorField::new(1, |x: &DVector<f64>| x.component_mul(x));
        let x0 = DVector::from_vec(vec![1.0]);
        match rk4_integrate(&f, &x0, 1.25, 1e-3) {
            Err(LinearFlowError::BlowUp { last_valid_time }) => {
                assert!(last_valid_time > 0.5 && last_valid_time <= 1.25);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn rk4_rejects_non_dividing_step() {
        let f = VectorField::new(1, |_| DVector::zeros(1));
        let x0 = DVector::from_vec(vec![0.0]);
        assert!(matches!(
            rk4_integrate(&f, &x0, 1.0, 0.3),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn rk4_negative_time_orders_samples() {
        let f = VectorField::new(1, |x: &DVector<f64>| x.clone());
        let x0 = DVector::from_vec(vec![1.0]);
        let traj = rk4_integrate(&f, &x0, -1.0, 1e-2).unwrap();
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        let endpoint = traj.state_at(-1.0).unwrap();
        assert!((endpoint[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn groenwall_saturating_case_passes() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let u: Vec<f64> = times.iter().map(|t| t.exp()).collect();
        let report = groenwall_check(&times, &u, |_| 1.0).unwrap();
        assert!(report.pass, "{report:?}");
        // Saturation: the worst ratio sits at 1 up to rounding.
        assert!((report.left - 1.0).abs() < 1e-12);
    }

    #[test]
    fn groenwall_detects_violation() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let u: Vec<f64> = times.iter().map(|t| (2.0 * t).exp()).collect();
        let report = groenwall_check(&times, &u, |_| 1.0).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn groenwall_rejects_empty_input() {
        assert!(matches!(
            groenwall_check(&[], &[], |_| 1.0),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn flow_divergence_identical_fields() {
        let f0 = VectorField::new(1, |x: &DVector<f64>| -x.clone()).with_lipschitz(1.0);
        let f1 = VectorField::new(1, |_| DVector::from_vec(vec![1.0])).with_ball_radius(1.0);
        let x0 = DVector::from_vec(vec![0.0]);
        let report = flow_divergence_gap(&f0, &f1, 0.0, &x0, 1.0).unwrap();
        assert!(report.pass && report.left == 0.0);
    }

    #[test]
    fn flow_divergence_analytic_case() {
        // x' = -x vs x' = -x + eps: gap eps(1 - e^{-t}) <= eps(e^t - 1).
        let f0 = VectorField::new(1, |x: &DVector<f64>| -x.clone()).with_lipschitz(1.0);
        let f1 = VectorField::new(1, |_| DVector::from_vec(vec![1.0])).with_ball_radius(1.0);
        let x0 = DVector::from_vec(vec![0.0]);
        let eps = 1e-2;
        let report = flow_divergence_gap(&f0, &f1, eps, &x0, 1.0).unwrap();
        assert!(report.pass, "{report:?}");
        let expected_gap = eps * (1.0 - (-1.0f64).exp());
        assert!((report.left - expected_gap).abs() < 1e-6);
        assert!((report.right - eps * (1.0f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn flow_divergence_pendulum_with_forcing() {
        let f0 = VectorField::new(2, |x: &DVector<f64>| {
            DVector::from_vec(vec![x[1], -x[0].sin()])
        })
        .with_lipschitz(1.0);
        let f1 =
            VectorField::new(2, |_| DVector::from_vec(vec![0.0, 1.0])).with_ball_radius(2.0);
        let x0 = DVector::from_vec(vec![0.5, 0.0]);
        let report = flow_divergence_gap(&f0, &f1, 1e-3, &x0, 1.0).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn flow_divergence_requires_lipschitz() {
        let f0 = VectorField::new(1, |x: &DVector<f64>| -x.clone());
        let f1 = VectorField::new(1, |_| DVector::from_vec(vec![1.0])).with_ball_radius(1.0);
        let x0 = DVector::from_vec(vec![0.0]);
        assert!(matches!(
            flow_divergence_gap(&f0, &f1, 0.1, &x0, 1.0),
            Err(LinearFlowError::InvalidInput(_))
        ));
    }

    #[test]
    fn groenwall_controls_simulated_flow_divergence() {
        // The perturbed-flow proof applies Grönwall to w = |gap| + eps*C/L,
        // which obeys w' <= L w with w(0) = eps*C/L.
        let f0 = VectorField::new(1, |x: &DVector<f64>| -x.clone()).with_lipschitz(1.0);
        let (l, c, eps) = (1.0, 1.0, 1e-2);
        let x0 = DVector::from_vec(vec![0.0]);
        let base = rk4_raw(|x| f0.eval(x), &x0, 1.0, 1e-3).unwrap();
        let pert = rk4_raw(|x| f0.eval(x) + DVector::from_vec(vec![eps]), &x0, 1.0, 1e-3).unwrap();
        let w: Vec<f64> = base
            .states
            .iter()
            .zip(pert.states.iter())
            .map(|(a, b)| (a - b).norm() + eps * c / l)
            .collect();
        let report = groenwall_check(&base.times, &w, |_| l).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
