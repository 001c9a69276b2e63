//! Internal central-difference helpers shared by the dynamics modules.

use nalgebra::{DMatrix, DVector};

/// Central-difference gradient of a scalar map.
pub(crate) fn central_gradient<F>(f: &F, x: &DVector<f64>, step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64 + ?Sized,
{
    let n = x.len();
    let mut grad = DVector::<f64>::zeros(n);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for a in 0..n {
        xp[a] += step;
        xm[a] -= step;
        grad[a] = (f(&xp) - f(&xm)) / (2.0 * step);
        xp[a] = x[a];
        xm[a] = x[a];
    }
    grad
}

/// Central-difference Jacobian of a vector map (columns indexed by input).
pub(crate) fn central_jacobian<F>(f: &F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + ?Sized,
{
    let n = x.len();
    let f0_len = f(x).len();
    let mut jac = DMatrix::<f64>::zeros(f0_len, n);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for j in 0..n {
        xp[j] += step;
        xm[j] -= step;
        let column = (f(&xp) - f(&xm)) / (2.0 * step);
        jac.set_column(j, &column);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    jac
}

/// Central second differences; mixed entries use the symmetric four-point
/// formula, so the result is exactly symmetric.
pub(crate) fn central_hessian<F>(f: &F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64 + ?Sized,
{
    let n = x.len();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let f0 = f(x);
    for a in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[a] += step;
        xm[a] -= step;
        hess[(a, a)] = (f(&xp) - 2.0 * f0 + f(&xm)) / (step * step);
        for b in a + 1..n {
            let mut xpp = x.clone();
            let mut xpm = x.clone();
            let mut xmp = x.clone();
            let mut xmm = x.clone();
            xpp[a] += step;
            xpp[b] += step;
            xpm[a] += step;
            xpm[b] -= step;
            xmp[a] -= step;
            xmp[b] += step;
            xmm[a] -= step;
            xmm[b] -= step;
            let v = (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * step * step);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    hess
}
