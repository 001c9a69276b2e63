//! Green's functions for the unit interval, free space in two and three
//! dimensions, and the unit square with Dirichlet data, plus the quadrature
//! solvers built on them.
//!
//! The rectangle solver computes the same solution twice: a direct 5-point
//! finite-difference solve (path A) and the representation
//! u(x) = integral of G f minus the boundary integral of (dG/dn) h (path B),
//! where G = Phi + b splits into the free-space kernel and a harmonic
//! correction solved per target point on the same grid. Uniqueness of the
//! discrete correction rests on the maximum principle of the 5-point
//! stencil.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::quad::composite_simpson;

#[derive(Debug, Error)]
pub enum GreensError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("kernel singularity: {0}")]
    Singularity(String),
    #[error("linear solve failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, GreensError>;

/// Dirichlet kernel of -d^2/dx^2 on [0,1]:
/// G(x,y) = (1-y) x for x <= y and y (1-x) for x > y.
pub fn green_interval(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(GreensError::InvalidInput(format!(
            "arguments must lie in [0,1], got ({x}, {y})"
        )));
    }
    Ok(if x <= y { (1.0 - y) * x } else { y * (1.0 - x) })
}

/// u(x) = integral of G(x,y) f(y) dy on [0,1] by composite Simpson with
/// `n_quad` panels on each side of the kink at y = x. The kernel is linear
/// in y on both sides, so the only quadrature error comes from f.
pub fn solve_poisson_interval<F>(f: F, n_quad: usize) -> impl Fn(f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let panels = n_quad.max(1);
    move |x: f64| {
        let below = composite_simpson(|y| y * f(y), 0.0, x, panels);
        let above = composite_simpson(|y| (1.0 - y) * f(y), x, 1.0, panels);
        (1.0 - x) * below + x * above
    }
}

/// Free-space kernel of -Laplace in dimension d:
/// -(1/2 pi) ln|x-y| for d = 2 and 1/(4 pi |x-y|) for d = 3.
pub fn green_free_space(d: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if d != 2 && d != 3 {
        return Err(GreensError::InvalidInput(format!(
            "dimension must be 2 or 3, got {d}"
        )));
    }
    if x.len() != d || y.len() != d {
        return Err(GreensError::InvalidInput(
            "points must have one coordinate per dimension".into(),
        ));
    }
    let r = x
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if r == 0.0 {
        return Err(GreensError::Singularity(
            "kernel evaluated on the diagonal x = y".into(),
        ));
    }
    Ok(match d {
        2 => -r.ln() / (2.0 * std::f64::consts::PI),
        _ => 1.0 / (4.0 * std::f64::consts::PI * r),
    })
}

/// A symmetric kernel together with its evaluation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreensKernel {
    IntervalDirichlet,
    FreeSpace { dim: usize },
}

impl GreensKernel {
    pub fn free_space(dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(GreensError::InvalidInput(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        Ok(GreensKernel::FreeSpace { dim })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            GreensKernel::IntervalDirichlet => {
                if x.len() != 1 || y.len() != 1 {
                    return Err(GreensError::InvalidInput(
                        "interval kernel takes one coordinate per point".into(),
                    ));
                }
                green_interval(x[0], y[0])
            }
            GreensKernel::FreeSpace { dim } => green_free_space(*dim, x, y),
        }
    }
}

/// Dirichlet data for -Laplace u = f on the unit square, sampled on the
/// uniform (nx+1) x (ny+1) node grid (row-major, index i*(ny+1)+j for the
/// node (i/nx, j/ny)). The source is read on interior nodes and the
/// boundary data on boundary nodes.
#[derive(Debug, Clone)]
pub struct RectangleProblem {
    pub nx: usize,
    pub ny: usize,
    f: Vec<f64>,
    h_bdry: Vec<f64>,
}

impl RectangleProblem {
    pub fn from_fns<F, H>(nx: usize, ny: usize, f: F, h: H) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
        H: Fn(f64, f64) -> f64,
    {
        if nx < 8 || ny < 8 {
            return Err(GreensError::InvalidInput(
                "resolutions must be at least 8".into(),
            ));
        }
        let mut source = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for i in 0..=nx {
            for j in 0..=ny {
                let (x, y) = (i as f64 / nx as f64, j as f64 / ny as f64);
                source.push(f(x, y));
                boundary.push(h(x, y));
            }
        }
        if !source.iter().chain(boundary.iter()).all(|v| v.is_finite()) {
            return Err(GreensError::InvalidInput(
                "samples must be finite".into(),
            ));
        }
        Ok(RectangleProblem {
            nx,
            ny,
            f: source,
            h_bdry: boundary,
        })
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        1.0 / self.ny as f64
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 / self.nx as f64, j as f64 / self.ny as f64)
    }

    pub fn source(&self) -> &[f64] {
        &self.f
    }

    pub fn boundary(&self) -> &[f64] {
        &self.h_bdry
    }
}

/// Both solution paths on the rectangle: the returned grid holds the
/// representation-formula values on interior nodes and the prescribed data
/// on boundary nodes.
#[derive(Debug, Clone)]
pub struct RectangleSolution {
    pub nx: usize,
    pub ny: usize,
    /// Full node grid, same layout as RectangleProblem.
    pub u: Vec<f64>,
    /// Max over interior nodes of |path B - path A|.
    pub residual: f64,
    /// Max over boundary edge nodes of the gap between the prescribed data
    /// and the quadratic extrapolation of the path-B interior values to the
    /// wall (corners carry no normal direction and are skipped).
    pub boundary_gap: f64,
}

/// Fast Dirichlet Poisson solver on the interior nodes, diagonal in the
/// discrete sine basis of the 5-point Laplacian.
struct SineSolver {
    nx: usize,
    ny: usize,
    sx: DMatrix<f64>,
    sy: DMatrix<f64>,
    lambda_x: Vec<f64>,
    lambda_y: Vec<f64>,
}

impl SineSolver {
    fn new(nx: usize, ny: usize) -> Result<Self> {
        let pi = std::f64::consts::PI;
        let sx = DMatrix::from_fn(nx - 1, nx - 1, |p, q| {
            ((p + 1) as f64 * (q + 1) as f64 * pi / nx as f64).sin()
        });
        let sy = DMatrix::from_fn(ny - 1, ny - 1, |p, q| {
            ((p + 1) as f64 * (q + 1) as f64 * pi / ny as f64).sin()
        });
        let hx_sq = 1.0 / (nx as f64 * nx as f64);
        let hy_sq = 1.0 / (ny as f64 * ny as f64);
        let lambda_x: Vec<f64> = (1..nx)
            .map(|p| 2.0 * (1.0 - (p as f64 * pi / nx as f64).cos()) / hx_sq)
            .collect();
        let lambda_y: Vec<f64> = (1..ny)
            .map(|p| 2.0 * (1.0 - (p as f64 * pi / ny as f64).cos()) / hy_sq)
            .collect();
        if lambda_x.iter().chain(lambda_y.iter()).any(|l| !(*l > 0.0)) {
            return Err(GreensError::Solver(
                "sine eigenvalues of the 5-point stencil must be positive".into(),
            ));
        }
        Ok(SineSolver {
            nx,
            ny,
            sx,
            sy,
            lambda_x,
            lambda_y,
        })
    }

    /// Interior solution of -Laplace_h v = rhs with v = 0 on the boundary.
    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut hat = &self.sx * rhs * &self.sy;
        for p in 0..self.nx - 1 {
            for q in 0..self.ny - 1 {
                hat[(p, q)] /= self.lambda_x[p] + self.lambda_y[q];
            }
        }
        let scale = 4.0 / (self.nx as f64 * self.ny as f64);
        (&self.sx * hat * &self.sy) * scale
    }
}

/// Direct 5-point finite-difference solve (path A), returned on the full
/// node grid with the boundary data in place.
pub fn solve_rectangle_fd(p: &RectangleProblem) -> Result<Vec<f64>> {
    let solver = SineSolver::new(p.nx, p.ny)?;
    let interior = fd_solve_with(&solver, p, |i, j| p.f[p.idx(i, j)], |b| p.h_bdry[b]);
    Ok(assemble_full_grid(p, &interior, |b| p.h_bdry[b]))
}

/// Interior FD solve with explicit source and boundary accessors: the
/// boundary values are lifted into the right-hand side of the homogeneous
/// problem.
fn fd_solve_with<F, B>(solver: &SineSolver, p: &RectangleProblem, f: F, bdry: B) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64,
    B: Fn(usize) -> f64,
{
    let (nx, ny) = (p.nx, p.ny);
    let inv_hx_sq = (nx as f64) * (nx as f64);
    let inv_hy_sq = (ny as f64) * (ny as f64);
    let mut rhs = DMatrix::from_fn(nx - 1, ny - 1, |r, c| f(r + 1, c + 1));
    for r in 0..nx - 1 {
        rhs[(r, 0)] += bdry(p.idx(r + 1, 0)) * inv_hy_sq;
        rhs[(r, ny - 2)] += bdry(p.idx(r + 1, ny)) * inv_hy_sq;
    }
    for c in 0..ny - 1 {
        rhs[(0, c)] += bdry(p.idx(0, c + 1)) * inv_hx_sq;
        rhs[(nx - 2, c)] += bdry(p.idx(nx, c + 1)) * inv_hx_sq;
    }
    solver.solve(&rhs)
}

fn assemble_full_grid<B>(p: &RectangleProblem, interior: &DMatrix<f64>, bdry: B) -> Vec<f64>
where
    B: Fn(usize) -> f64,
{
    let mut u = vec![0.0; (p.nx + 1) * (p.ny + 1)];
    for i in 0..=p.nx {
        for j in 0..=p.ny {
            let k = p.idx(i, j);
            u[k] = if i == 0 || i == p.nx || j == 0 || j == p.ny {
                bdry(k)
            } else {
                interior[(i - 1, j - 1)]
            };
        }
    }
    u
}

/// Integral of the free-space kernel over one grid cell centered on its
/// singularity, by midpoint subdivision (the sub-cell midpoints avoid the
/// center). The singular self-cell is the dominant quadrature term; leaving
/// it out costs O(h^2 ln(1/h)), which measurably breaks the second-order
/// convergence of the representation formula.
fn log_kernel_self_cell(hx: f64, hy: f64) -> f64 {
    let sub = 512;
    let mut acc = 0.0;
    let (du, dv) = (hx / sub as f64, hy / sub as f64);
    for a in 0..sub {
        let u = -hx / 2.0 + (a as f64 + 0.5) * du;
        for b in 0..sub {
            let v = -hy / 2.0 + (b as f64 + 0.5) * dv;
            acc += -(u * u + v * v).sqrt().ln();
        }
    }
    acc * du * dv / (2.0 * std::f64::consts::PI)
}

/// Solves -Laplace u = f on the unit square with u = h on the boundary by
/// the representation formula (path B), checked against the direct
/// finite-difference solve (path A). The domain kernel is assembled as
/// free-space kernel + mirror images + discrete smooth remainder.
/// Independent target points run concurrently; each target's correction is
/// solved once and reused by both integrals.
pub fn solve_rectangle_dirichlet(p: &RectangleProblem) -> Result<RectangleSolution> {
    let solver = SineSolver::new(p.nx, p.ny)?;
    let (nx, ny) = (p.nx, p.ny);
    let (hx, hy) = (p.hx(), p.hy());
    let path_a = fd_solve_with(&solver, p, |i, j| p.f[p.idx(i, j)], |b| p.h_bdry[b]);
    let self_cell = log_kernel_self_cell(hx, hy);
    let phi = |ax: f64, ay: f64, bx: f64, by: f64| -> f64 {
        -((ax - bx).hypot(ay - by)).ln() / (2.0 * std::f64::consts::PI)
    };

    // The four walls: anchor point, outward normal, tangent direction in
    // grid steps, number of segments, arc spacing, and the inward stencil
    // step for differentiating the smooth remainder.
    struct Wall {
        start: (usize, usize),
        normal: (f64, f64),
        tangent_step: (usize, usize),
        segments: usize,
        arc: f64,
        inward: (i64, i64),
        fd_h: f64,
    }
    let walls = [
        Wall {
            start: (0, 0),
            normal: (-1.0, 0.0),
            tangent_step: (0, 1),
            segments: ny,
            arc: hy,
            inward: (1, 0),
            fd_h: hx,
        },
        Wall {
            start: (nx, 0),
            normal: (1.0, 0.0),
            tangent_step: (0, 1),
            segments: ny,
            arc: hy,
            inward: (-1, 0),
            fd_h: hx,
        },
        Wall {
            start: (0, 0),
            normal: (0.0, -1.0),
            tangent_step: (1, 0),
            segments: nx,
            arc: hx,
            inward: (0, 1),
            fd_h: hy,
        },
        Wall {
            start: (0, ny),
            normal: (0.0, 1.0),
            tangent_step: (1, 0),
            segments: nx,
            arc: hx,
            inward: (0, -1),
            fd_h: hy,
        },
    ];

    let targets: Vec<(usize, usize)> = (1..nx)
        .flat_map(|i| (1..ny).map(move |j| (i, j)))
        .collect();
    let path_b_values: Vec<f64> = targets
        .par_iter()
        .map(|&(ti, tj)| {
            let (tx, ty) = p.node(ti, tj);
            // The target's mirror images across the four walls (negative)
            // and the four corners (positive). They cancel the singular
            // boundary behavior of the kernel analytically, leaving the
            // discrete harmonic correction smooth enough for one-sided
            // differentiation even when the target sits one cell from a
            // wall, where the image singularity of a bare correction would
            // break the stencil.
            let images: [(f64, f64, f64); 8] = [
                (-tx, ty, -1.0),
                (2.0 - tx, ty, -1.0),
                (tx, -ty, -1.0),
                (tx, 2.0 - ty, -1.0),
                (-tx, -ty, 1.0),
                (-tx, 2.0 - ty, 1.0),
                (2.0 - tx, -ty, 1.0),
                (2.0 - tx, 2.0 - ty, 1.0),
            ];
            let image_sum = |x: f64, y: f64| -> f64 {
                images
                    .iter()
                    .map(|&(sx, sy, w)| w * phi(sx, sy, x, y))
                    .sum()
            };
            // Smooth remainder of the correction, with boundary data
            // -(Phi + images) on the walls.
            let correction = fd_solve_with(&solver, p, |_, _| 0.0, |flat| {
                let i = flat / (ny + 1);
                let j = flat % (ny + 1);
                let (x, y) = p.node(i, j);
                -(phi(tx, ty, x, y) + image_sum(x, y))
            });
            // Area term: trapezoid over nodes; the kernel vanishes on the
            // boundary, and the singular self-cell is integrated exactly.
            let mut area = 0.0;
            for i in 1..nx {
                for j in 1..ny {
                    let (x, y) = p.node(i, j);
                    let free = if i == ti && j == tj {
                        0.0
                    } else {
                        phi(tx, ty, x, y)
                    };
                    let g = free + image_sum(x, y) + correction[(i - 1, j - 1)];
                    area += g * p.f[p.idx(i, j)];
                }
            }
            area *= hx * hy;
            area += self_cell * p.f[p.idx(ti, tj)];
            // Boundary term. The principal and image kernels have a sharply
            // peaked normal derivative whenever the target sits near a
            // wall, which no node-based rule resolves; they are integrated
            // in closed form against the piecewise-linear interpolant of h.
            // The smooth remainder uses the trapezoid rule with a one-sided
            // second-order stencil.
            let b_rest_at = |i: usize, j: usize| -> f64 {
                if i == 0 || i == nx || j == 0 || j == ny {
                    let (x, y) = p.node(i, j);
                    -(phi(tx, ty, x, y) + image_sum(x, y))
                } else {
                    correction[(i - 1, j - 1)]
                }
            };
            let mut boundary = 0.0;
            for wall in &walls {
                let anchor = p.node(wall.start.0, wall.start.1);
                let horizontal = wall.tangent_step.0 == 1;
                // Every source has a constant signed normal offset q and a
                // tangential coordinate m along an axis-aligned wall, so
                // integral of (a + b s) q / ((s-m)^2 + q^2) ds has an
                // arctan/log antiderivative per linear segment of h.
                for seg in 0..wall.segments {
                    let s1 = seg as f64 * wall.arc;
                    let s2 = s1 + wall.arc;
                    let (i1, j1) = (
                        wall.start.0 + seg * wall.tangent_step.0,
                        wall.start.1 + seg * wall.tangent_step.1,
                    );
                    let h1 = p.h_bdry[p.idx(i1, j1)];
                    let h2 = p.h_bdry[p.idx(i1 + wall.tangent_step.0, j1 + wall.tangent_step.1)];
                    let slope = (h2 - h1) / wall.arc;
                    let offset = h1 - slope * s1;
                    let mut seg_total = 0.0;
                    for &(sx, sy, w) in std::iter::once(&(tx, ty, 1.0)).chain(images.iter()) {
                        let q = (anchor.0 - sx) * wall.normal.0
                            + (anchor.1 - sy) * wall.normal.1;
                        let m = if horizontal { sx - anchor.0 } else { sy - anchor.1 };
                        let sweep = ((s2 - m) / q).atan() - ((s1 - m) / q).atan();
                        let ln_ratio = (((s2 - m) * (s2 - m) + q * q)
                            / ((s1 - m) * (s1 - m) + q * q))
                            .ln();
                        seg_total +=
                            w * ((offset + slope * m) * sweep + 0.5 * slope * q * ln_ratio);
                    }
                    boundary -= seg_total / (2.0 * std::f64::consts::PI);
                }
                for k in 0..=wall.segments {
                    let bi = wall.start.0 + k * wall.tangent_step.0;
                    let bj = wall.start.1 + k * wall.tangent_step.1;
                    let w_arc =
                        if k == 0 || k == wall.segments { 0.5 } else { 1.0 } * wall.arc;
                    let b0 = b_rest_at(bi, bj);
                    let b1 = b_rest_at(
                        (bi as i64 + wall.inward.0) as usize,
                        (bj as i64 + wall.inward.1) as usize,
                    );
                    let b2 = b_rest_at(
                        (bi as i64 + 2 * wall.inward.0) as usize,
                        (bj as i64 + 2 * wall.inward.1) as usize,
                    );
                    let dn_b = (3.0 * b0 - 4.0 * b1 + b2) / (2.0 * wall.fd_h);
                    boundary += dn_b * p.h_bdry[p.idx(bi, bj)] * w_arc;
                }
            }
            area - boundary
        })
        .collect();

    let mut interior_b = DMatrix::zeros(nx - 1, ny - 1);
    for (k, &(i, j)) in targets.iter().enumerate() {
        interior_b[(i - 1, j - 1)] = path_b_values[k];
    }
    let residual = (0..nx - 1)
        .flat_map(|r| (0..ny - 1).map(move |c| (r, c)))
        .map(|(r, c)| (interior_b[(r, c)] - path_a[(r, c)]).abs())
        .fold(0.0, f64::max);

    // Quadratic extrapolation of path B to each wall node from the three
    // interior nodes along the inward normal.
    let mut boundary_gap = 0.0f64;
    let mut check_wall = |i: usize, j: usize, step: (i64, i64)| {
        let at = |k: i64| {
            let (a, b) = (i as i64 + k * step.0, j as i64 + k * step.1);
            interior_b[(a as usize - 1, b as usize - 1)]
        };
        let extrapolated = 3.0 * at(1) - 3.0 * at(2) + at(3);
        boundary_gap = boundary_gap.max((extrapolated - p.h_bdry[p.idx(i, j)]).abs());
    };
    for j in 1..ny {
        check_wall(0, j, (1, 0));
        check_wall(nx, j, (-1, 0));
    }
    for i in 1..nx {
        check_wall(i, 0, (0, 1));
        check_wall(i, ny, (0, -1));
    }

    Ok(RectangleSolution {
        nx,
        ny,
        u: assemble_full_grid(p, &interior_b, |b| p.h_bdry[b]),
        residual,
        boundary_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn interval_kernel_boundary_values_and_symmetry() {
        for k in 0..=10 {
            let y = k as f64 / 10.0;
            assert_eq!(green_interval(0.0, y).unwrap(), 0.0);
            assert_eq!(green_interval(1.0, y).unwrap(), 0.0);
        }
        assert!((green_interval(0.25, 0.5).unwrap() - 0.125).abs() <= 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(211);
        for _ in 0..100 {
            let x = rng.random_range(0.0..1.0);
            let y = rng.random_range(0.0..1.0);
            let a = green_interval(x, y).unwrap();
            let b = green_interval(y, x).unwrap();
            assert!((a - b).abs() <= 1e-15);
        }
        assert!(green_interval(-0.1, 0.5).is_err());
        assert!(green_interval(0.5, 1.1).is_err());
    }

    /// Smooth bump with analytic second derivative, supported on
    /// (c - w, c + w).
    struct Bump {
        c: f64,
        w: f64,
    }

    impl Bump {
        fn eval(&self, x: f64) -> f64 {
            let t = (x - self.c) / self.w;
            if t.abs() >= 1.0 {
                0.0
            } else {
                (-1.0 / (1.0 - t * t)).exp()
            }
        }

        fn second_derivative(&self, x: f64) -> f64 {
            let t = (x - self.c) / self.w;
            if t.abs() >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t * t;
            let phi = (-1.0 / s).exp();
            let first = -2.0 * t / (s * s);
            let second_factor = -2.0 / (s * s) - 8.0 * t * t / (s * s * s);
            (phi * (first * first + second_factor)) / (self.w * self.w)
        }
    }

    #[test]
    fn interval_kernel_is_a_distributional_inverse() {
        let bump = Bump { c: 0.45, w: 0.35 };
        for y in [0.3, 0.45, 0.6] {
            let integrand = |x: f64| green_interval(x, y).unwrap() * -bump.second_derivative(x);
            let below = composite_simpson(integrand, bump.c - bump.w, y, 4096);
            let above = composite_simpson(integrand, y, bump.c + bump.w, 4096);
            let value = below + above;
            assert!(
                (value - bump.eval(y)).abs() <= 1e-6,
                "y = {y}: {value} vs {}",
                bump.eval(y)
            );
        }
    }

    #[test]
    fn poisson_interval_matches_analytic_solutions() {
        let u_const = solve_poisson_interval(|_| 1.0, 512);
        let u_sine = solve_poisson_interval(|y: f64| (PI * y).sin(), 512);
        let u_zero = solve_poisson_interval(|_| 0.0, 64);
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert!((u_const(x) - x * (1.0 - x) / 2.0).abs() <= 1e-8);
            assert!((u_sine(x) - (PI * x).sin() / (PI * PI)).abs() <= 1e-8);
            assert_eq!(u_zero(x), 0.0);
        }
        assert!(u_const(0.0).abs() <= 1e-10);
        assert!(u_const(1.0).abs() <= 1e-10);
    }

    #[test]
    fn poisson_interval_is_linear_in_the_source() {
        let f = |y: f64| (3.0 * y).cos();
        let g = |y: f64| y * y - 0.3;
        let (alpha, beta) = (1.7, -0.6);
        let combined = solve_poisson_interval(move |y| alpha * f(y) + beta * g(y), 128);
        let u_f = solve_poisson_interval(f, 128);
        let u_g = solve_poisson_interval(g, 128);
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            let gap = combined(x) - alpha * u_f(x) - beta * u_g(x);
            assert!(gap.abs() <= 1e-12);
        }
    }

    #[test]
    fn free_space_values_and_errors() {
        assert!(green_free_space(2, &[0.0, 0.0], &[1.0, 0.0]).unwrap().abs() <= 1e-15);
        let v = green_free_space(3, &[0.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((v - 1.0 / (4.0 * PI)).abs() <= 1e-15);
        assert!(matches!(
            green_free_space(3, &[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]),
            Err(GreensError::Singularity(_))
        ));
        assert!(matches!(
            green_free_space(4, &[0.0; 4], &[1.0; 4]),
            Err(GreensError::InvalidInput(_))
        ));
        assert!(GreensKernel::free_space(5).is_err());
        let kernel = GreensKernel::free_space(2).unwrap();
        let a = kernel.eval(&[0.1, 0.7], &[-0.4, 0.2]).unwrap();
        let b = kernel.eval(&[-0.4, 0.2], &[0.1, 0.7]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_space_d3_gradient_identity() {
        // integral of grad G(., y) . grad phi = phi(y) for a Gaussian bump,
        // on a spherical product mesh around y, excluding a ball of radius
        // 1e-3. The omitted mass is about r^2 / (2 sigma^2) ~ 2e-5.
        let center = [0.1, -0.05, 0.15];
        let sigma = 0.15f64;
        let bump_grad = |x: &[f64; 3]| -> [f64; 3] {
            let r_sq: f64 = x
                .iter()
                .zip(center.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let value = (-r_sq / (2.0 * sigma * sigma)).exp();
            [
                -(x[0] - center[0]) * value / (sigma * sigma),
                -(x[1] - center[1]) * value / (sigma * sigma),
                -(x[2] - center[2]) * value / (sigma * sigma),
            ]
        };
        let kernel_grad = |x: &[f64; 3]| -> [f64; 3] {
            let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let scale = -1.0 / (4.0 * PI * r * r * r);
            [d[0] * scale, d[1] * scale, d[2] * scale]
        };
        let (r_lo, r_hi) = (1e-3, 1.2);
        let (n_r, n_mu, n_az) = (512, 16, 16);
        let dr = (r_hi - r_lo) / n_r as f64;
        let mut total = 0.0;
        for a in 0..n_r {
            let r = r_lo + (a as f64 + 0.5) * dr;
            for b in 0..n_mu {
                let mu = -1.0 + (b as f64 + 0.5) * 2.0 / n_mu as f64;
                let sin_theta = (1.0 - mu * mu).sqrt();
                for c in 0..n_az {
                    let az = (c as f64 + 0.5) * std::f64::consts::TAU / n_az as f64;
                    let x = [
                        center[0] + r * sin_theta * az.cos(),
                        center[1] + r * sin_theta * az.sin(),
                        center[2] + r * mu,
                    ];
                    let g = kernel_grad(&x);
                    let p = bump_grad(&x);
                    let dot = g[0] * p[0] + g[1] * p[1] + g[2] * p[2];
                    total += dot * r * r * dr * (2.0 / n_mu as f64)
                        * (std::f64::consts::TAU / n_az as f64);
                }
            }
        }
        assert!((total - 1.0).abs() <= 1e-3, "integral = {total}");
    }

    #[test]
    fn rectangle_problem_validation() {
        assert!(RectangleProblem::from_fns(4, 16, |_, _| 0.0, |_, _| 0.0).is_err());
        assert!(RectangleProblem::from_fns(16, 16, |_, _| f64::NAN, |_, _| 0.0).is_err());
    }

    #[test]
    fn rectangle_zero_data_gives_zero() {
        let p = RectangleProblem::from_fns(12, 12, |_, _| 0.0, |_, _| 0.0).unwrap();
        let sol = solve_rectangle_dirichlet(&p).unwrap();
        assert!(sol.u.iter().all(|v| v.abs() <= 1e-12));
        assert!(sol.residual <= 1e-12);
    }

    fn manufactured_error(n: usize) -> (f64, f64) {
        let truth = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let p = RectangleProblem::from_fns(
            n,
            n,
            |x, y| 2.0 * PI * PI * truth(x, y),
            |_, _| 0.0,
        )
        .unwrap();
        let sol = solve_rectangle_dirichlet(&p).unwrap();
        let mut err = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let (x, y) = p.node(i, j);
                err = err.max((sol.u[p.idx(i, j)] - truth(x, y)).abs());
            }
        }
        (err, sol.residual)
    }

    #[test]
    fn rectangle_manufactured_solution_is_second_order() {
        for n in [16usize, 32] {
            let h_sq = 1.0 / (n * n) as f64;
            let (err, residual) = manufactured_error(n);
            assert!(err <= 5.0 * h_sq, "n = {n}: error {err} vs {}", 5.0 * h_sq);
            assert!(
                residual <= 10.0 * h_sq,
                "n = {n}: path gap {residual} vs {}",
                10.0 * h_sq
            );
        }
    }

    #[test]
    fn rectangle_reproduces_a_harmonic_function() {
        let truth = |x: f64, y: f64| x * x - y * y;
        let n = 24usize;
        let p = RectangleProblem::from_fns(n, n, |_, _| 0.0, truth).unwrap();
        let sol = solve_rectangle_dirichlet(&p).unwrap();
        let h_sq = 1.0 / (n * n) as f64;
        let mut err = 0.0f64;
        for i in 1..n {
            for j in 1..n {
                let (x, y) = p.node(i, j);
                err = err.max((sol.u[p.idx(i, j)] - truth(x, y)).abs());
            }
        }
        assert!(err <= 5.0 * h_sq, "error {err} vs {}", 5.0 * h_sq);
        assert!(sol.residual <= 10.0 * h_sq);
        assert!(sol.boundary_gap <= 20.0 * h_sq, "gap {}", sol.boundary_gap);
    }

    #[test]
    fn rectangle_handles_unequal_resolutions() {
        let truth = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let p = RectangleProblem::from_fns(
            16,
            24,
            |x, y| 2.0 * PI * PI * truth(x, y),
            |_, _| 0.0,
        )
        .unwrap();
        let sol = solve_rectangle_dirichlet(&p).unwrap();
        let h_sq = 1.0 / (16.0 * 16.0);
        let mut err = 0.0f64;
        for i in 0..=16 {
            for j in 0..=24 {
                let (x, y) = p.node(i, j);
                err = err.max((sol.u[p.idx(i, j)] - truth(x, y)).abs());
            }
        }
        assert!(err <= 5.0 * h_sq);
        assert!(sol.residual <= 10.0 * h_sq);
    }

    #[test]
    fn fd_path_alone_is_second_order() {
        let truth = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let n = 32;
        let p = RectangleProblem::from_fns(
            n,
            n,
            |x, y| 2.0 * PI * PI * truth(x, y),
            |_, _| 0.0,
        )
        .unwrap();
        let u = solve_rectangle_fd(&p).unwrap();
        let mut err = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let (x, y) = p.node(i, j);
                err = err.max((u[p.idx(i, j)] - truth(x, y)).abs());
            }
        }
        let h_sq = 1.0 / (n * n) as f64;
        assert!(err <= 1.5 * h_sq, "error {err}");
    }
}
