//! Seeded random instances: simplex points, density operators, unitaries and
//! ensembles.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::ensemble::{build_ensemble, CorrelatedEnsemble, EnsembleEntry};
use crate::error::Result;
use crate::gpt::{State, Theory, TheoryVariant};
use crate::info::{self, DensityOperator};

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point of the probability simplex with `n` vertices.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = x.iter().sum();
    x.into_iter().map(|v| v / s).collect()
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `U diag(λ) U†` with `λ` uniform on the simplex and `U` Haar-random.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<Complex64> {
    let lam = random_simplex(rng, d);
    let u = random_unitary(rng, d);
    let diag = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(lam[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let m = &u * diag * u.adjoint();
    // exact Hermitian symmetry
    DMatrix::from_fn(d, d, |i, j| (m[(i, j)] + m[(j, i)].conj()) / 2.0)
}

pub fn random_density_operator<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<DensityOperator> {
    DensityOperator::new(random_density_matrix(rng, d))
}

/// Random valid state of `theory`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, theory: &Theory) -> Result<State> {
    let coords = match theory.variant() {
        TheoryVariant::Polytope { .. } | TheoryVariant::RestrictedClassical { .. } => {
            let verts = theory.extreme_states();
            let w = random_simplex(rng, verts.len());
            let mut c = vec![0.0; theory.ambient_dim()];
            for (wi, v) in w.iter().zip(&verts) {
                for (ci, vi) in c.iter_mut().zip(v.coords()) {
                    *ci += wi * vi;
                }
            }
            c
        }
        TheoryVariant::NormConstraint { p, k } => {
            let dir: Vec<f64> = (0..*k).map(|_| rng.sample(StandardNormal)).collect();
            let n = p.norm(&dir);
            let r: f64 = rng.random();
            let mut c: Vec<f64> = dir.iter().map(|x| r * x / n).collect();
            c.push(1.0);
            c
        }
        TheoryVariant::Quantum { hilbert_dim } => info::hermitian_coords(&random_density_matrix(rng, *hilbert_dim)),
    };
    theory.state(coords)
}

/// Pure qubit state with a uniformly random Bloch direction.
pub fn random_pure_qubit<R: Rng + ?Sized>(rng: &mut R, theory: &Theory) -> Result<State> {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    theory.bloch_state([s * phi.cos(), s * phi.sin(), z])
}

/// One entry per register cell with simplex-uniform weights and random states.
pub fn random_ensemble<R: Rng + ?Sized>(
    rng: &mut R,
    theory: &Arc<Theory>,
    alphabets: &[usize],
) -> Result<CorrelatedEnsemble> {
    let cells: usize = alphabets.iter().product();
    let w = random_simplex(rng, cells);
    let mut entries = Vec::with_capacity(cells);
    for (c, p) in w.into_iter().enumerate() {
        let mut regs = vec![0; alphabets.len()];
        let mut rest = c;
        for (slot, &a) in regs.iter_mut().zip(alphabets).rev() {
            *slot = rest % a;
            rest /= a;
        }
        entries.push(EnsembleEntry {
            p,
            state: random_state(rng, theory)?,
            registers: regs,
        });
    }
    let total: f64 = entries.iter().map(|e| e.p).sum();
    entries.iter_mut().for_each(|e| e.p /= total);
    build_ensemble(theory, entries, Some(alphabets.to_vec()))
}
