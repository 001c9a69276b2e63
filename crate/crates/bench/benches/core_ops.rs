//! Benchmarks for the hot paths: spectral evolution, symplectic volume
//! tracking, band-structure sweeps, spectral bounds, and the variational
//! gradient with its built-in cross-check.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mphys_core::fourier::TorusGrid;
use mphys_core::hamiltonian::{liouville_determinant, HamiltonianSystem, PhasePoint};
use mphys_core::lattice::honeycomb_bloch;
use mphys_core::quantum_spectra::{galerkin_minmax, HermitianOperator};
use mphys_core::spectral_pde::{heat_torus, schroedinger_torus, HeatProblem};
use mphys_core::variational::{gl_energy, gl_gradient, GLState};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn wavy_grid(m: usize) -> TorusGrid {
    TorusGrid::from_fn(1, m, |x| {
        Complex64::new(x[0].sin() + 0.3 * (3.0 * x[0]).cos(), 0.5 * (2.0 * x[0]).sin())
    })
    .expect("valid grid")
}

fn bench_heat(c: &mut Criterion) {
    let grid = wavy_grid(256);
    c.bench_function("heat_torus_256", |b| {
        b.iter(|| {
            let problem = HeatProblem::torus(grid.clone(), 1.0).expect("valid problem");
            black_box(heat_torus(&problem, black_box(0.5)).expect("evolves"))
        })
    });
}

fn bench_schroedinger(c: &mut Criterion) {
    let psi0 = wavy_grid(256);
    c.bench_function("schroedinger_torus_256", |b| {
        b.iter(|| black_box(schroedinger_torus(&psi0, black_box(1.0)).expect("evolves")))
    });
}

fn bench_liouville(c: &mut Criterion) {
    let sys = HamiltonianSystem::new(1, |z: &DVector<f64>| 0.5 * (z[0] * z[0] + z[1] * z[1]));
    let x0 = PhasePoint::new(DVector::from_vec(vec![0.7]), DVector::from_vec(vec![0.3]));
    c.bench_function("liouville_determinant_50_steps", |b| {
        b.iter(|| black_box(liouville_determinant(&sys, &x0, black_box(0.5), 0.01).expect("runs")))
    });
}

fn bench_bands(c: &mut Criterion) {
    let q = Complex64::new(1.0, 0.0);
    c.bench_function("honeycomb_bloch_32x32", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..32 {
                for j in 0..32 {
                    let k = [i as f64 * 0.19, j as f64 * 0.19];
                    acc += honeycomb_bloch(q, q, black_box(k)).e_plus;
                }
            }
            black_box(acc)
        })
    });
}

fn bench_galerkin(c: &mut Criterion) {
    let dim = 16;
    let entries = DMatrix::<Complex64>::from_fn(dim, dim, |j, k| {
        let (j, k) = (j as f64, k as f64);
        Complex64::new(1.0 / (1.0 + (j - k).abs()), 0.1 * (j - k))
    });
    let h = HermitianOperator::new(entries).expect("hermitian");
    let raw = DMatrix::<Complex64>::from_fn(dim, 4, |i, t| {
        let spike = if i == t { 1.0 } else { 0.0 };
        Complex64::new(spike + 0.1 * ((t + 2) as f64 * (i + 1) as f64).sin(), 0.0)
    });
    let q = raw.qr().q();
    let phis: Vec<DVector<Complex64>> = (0..4).map(|t| q.column(t).into_owned()).collect();
    c.bench_function("galerkin_minmax_16x16_4_trials", |b| {
        b.iter(|| black_box(galerkin_minmax(&h, black_box(&phis)).expect("bounds")))
    });
}

fn bench_gl(c: &mut Criterion) {
    let m = 64;
    let psi = wavy_grid(m);
    let zero = TorusGrid::from_fn(1, m, |_| Complex64::new(0.0, 0.0)).expect("valid grid");
    let state = GLState::new(psi, vec![zero], 2.0).expect("valid state");
    c.bench_function("gl_energy_64", |b| {
        b.iter(|| black_box(gl_energy(black_box(&state))))
    });
    c.bench_function("gl_gradient_64", |b| {
        b.iter(|| black_box(gl_gradient(black_box(&state), 1e-4).expect("consistent")))
    });
}

criterion_group!(
    benches,
    bench_heat,
    bench_schroedinger,
    bench_liouville,
    bench_bands,
    bench_galerkin,
    bench_gl
);
criterion_main!(benches);
