//! Seeded random matrices, states, and unitaries.

use nalgebra::DVector;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::{c, re, CMatrix, C64};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn complex_gaussian(rng: &mut Rng) -> C64 {
    c(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Entries uniform in the closed unit disk.
pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let r: f64 = rng.random::<f64>().sqrt();
        let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        C64::from_polar(r, t)
    })
}

pub fn ginibre(rng: &mut Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn random_hermitian(rng: &mut Rng, n: usize) -> CMatrix {
    let a = random_matrix(rng, n, n);
    (&a + a.adjoint()) * re(0.5)
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary(rng: &mut Rng, n: usize) -> CMatrix {
    let qr = ginibre(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DVector::from_iterator(
        n,
        (0..n).map(|k| {
            let d = r[(k, k)];
            if d.norm() == 0.0 {
                re(1.0)
            } else {
                d / re(d.norm())
            }
        }),
    );
    q * CMatrix::from_diagonal(&phases)
}

/// Random full-rank density matrix (Hilbert-Schmidt measure).
pub fn random_density(rng: &mut Rng, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    let rho = &g * g.adjoint();
    let t = rho.trace();
    rho / t
}

/// Random pure state `|psi><psi|`.
pub fn random_pure(rng: &mut Rng, n: usize) -> CMatrix {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
    let v = &v / re(v.norm());
    &v * v.adjoint()
}

/// Uniformly distributed unit vector in `R^dim`.
pub fn unit_vector(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
