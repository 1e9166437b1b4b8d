//! Randomized checks of the five entropy axioms behind the ICP proof.
//!
//! | id | statement |
//! |----|-----------|
//! | i | `I(S:F) = H(S) − H(S|F)` |
//! | ii | `H(S) ≤ log₂ d` |
//! | iii | `H(S|C) ≥ 0` for classical `C` |
//! | iv | `H(SA) + H(SB) ≥ H(SAB) + H(S)` |
//! | v | `I(S:A) ≥ I(X:A)` for a measurement outcome `X` of `S` |
//!
//! Axiom iv is checked in the direction used by the proof chain; the opposite
//! inequality is counted separately in the report note.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IcpError, Result};
use crate::info::{entropy_bits, partial_trace, JointTable};
use crate::random::{random_density_matrix, random_simplex, random_unitary, trial_rng};

/// Tolerance on the worst violation for an axiom to pass.
pub const AXIOM_TOL: f64 = 1e-9;

pub const AXIOM_IDS: [&str; 5] = ["i", "ii", "iii", "iv", "v"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    Shannon,
    VonNeumann,
}

impl std::str::FromStr for EntropyKind {
    type Err = IcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shannon" => Ok(Self::Shannon),
            "von_neumann" | "von-neumann" | "vn" => Ok(Self::VonNeumann),
            _ => Err(IcpError::InvalidArgument(format!("unknown entropy kind `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: String,
    pub trials: usize,
    pub max_violation: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Per-trial violations of axioms i..v, plus whether the reverse direction of
/// axiom iv failed strictly.
#[derive(Clone, Copy, Debug, Default)]
struct Trial {
    violations: [f64; 5],
    reverse_iv_fails: bool,
}

fn names(n: &[&str]) -> Vec<String> {
    n.iter().map(|s| s.to_string()).collect()
}

fn shannon_trial(seed: u64, index: u64) -> Result<Trial> {
    let mut rng = trial_rng(seed, index);
    let ds = rng.random_range(2..=4usize);
    let da = rng.random_range(2..=3usize);
    let db = rng.random_range(2..=3usize);
    let probs = random_simplex(&mut rng, ds * da * db);
    let t = JointTable::new(names(&["S", "A", "B"]), vec![ds, da, db], probs)?;
    let h = |n: &[&str]| t.entropy_of(n);
    let (hs, ha) = (h(&["S"])?, h(&["A"])?);
    let (hsa, hsb, hsab) = (h(&["S", "A"])?, h(&["S", "B"])?, h(&["S", "A", "B"])?);

    // i: relative-entropy form against H(S) − H(S|A)
    let sa = t.marginal(&["S", "A"])?;
    let (ps, pa) = (t.marginal(&["S"])?, t.marginal(&["A"])?);
    let mut kl = 0.0;
    for s in 0..ds {
        for a in 0..da {
            let p = sa.probs()[s * da + a];
            if p > 0.0 {
                kl += p * (p / (ps.probs()[s] * pa.probs()[a])).log2();
            }
        }
    }
    let v_i = (kl - (hs - (hsa - ha))).abs();
    let v_ii = (hs - (ds as f64).log2()).max(0.0);
    let hab = h(&["A", "B"])?;
    let v_iii = (-(hsa - ha)).max(0.0).max(-(hsab - hab));
    let v_iv = (hsab + hs - hsa - hsb).max(0.0);

    // v: X is the output of a random channel applied to S
    let dx = rng.random_range(2..=4usize);
    let channel: Vec<Vec<f64>> = (0..ds).map(|_| random_simplex(&mut rng, dx)).collect();
    let mut xa = vec![0.0; dx * da];
    for s in 0..ds {
        for a in 0..da {
            let p = sa.probs()[s * da + a];
            for x in 0..dx {
                xa[x * da + a] += p * channel[s][x];
            }
        }
    }
    let xa = JointTable::new(names(&["X", "A"]), vec![dx, da], xa)?;
    let i_xa = xa.group_mutual_information(&["X"], &["A"])?;
    let i_sa = hs + ha - hsa;
    let v_v = (i_xa - i_sa).max(0.0);
    Ok(Trial {
        violations: [v_i, v_ii, v_iii, v_iv, v_v],
        reverse_iv_fails: hsa + hsb > hsab + hs + AXIOM_TOL,
    })
}

fn vn_entropy(m: &DMatrix<Complex64>) -> f64 {
    let eig: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .map(|x| x.max(0.0))
        .collect();
    entropy_bits(&eig)
}

fn kron_diag_projector(d: usize, k: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| {
        if i == j && i == k {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Random classical-quantum state `Σ p_ab ρ_ab ⊗ |a⟩⟨a| ⊗ |b⟩⟨b|` on a
/// qubit `S` with two classical bits, as an 8 × 8 matrix, together with the
/// blocks `p_ab ρ_ab`.
fn random_cq(rng: &mut impl Rng, ds: usize, da: usize, db: usize) -> (DMatrix<Complex64>, Vec<DMatrix<Complex64>>) {
    let p = random_simplex(rng, da * db);
    let n = ds * da * db;
    let mut full = DMatrix::<Complex64>::zeros(n, n);
    let mut blocks = Vec::with_capacity(da * db);
    for a in 0..da {
        for b in 0..db {
            let rho = random_density_matrix(rng, ds) * Complex64::new(p[a * db + b], 0.0);
            let term = rho.kronecker(&kron_diag_projector(da, a)).kronecker(&kron_diag_projector(db, b));
            full += term;
            blocks.push(rho);
        }
    }
    (full, blocks)
}

fn von_neumann_trial(seed: u64, index: u64) -> Result<Trial> {
    let mut rng = trial_rng(seed, index);
    let (ds, da, db) = (2usize, 2usize, 2usize);
    let (rho, blocks) = random_cq(&mut rng, ds, da, db);
    let dims = [ds, da, db];
    let h = |keep: &[usize]| -> Result<f64> { Ok(vn_entropy(&partial_trace(&rho, &dims, keep)?)) };
    let (hs, ha) = (h(&[0])?, h(&[1])?);
    let (hsa, hsb, hab, hsab) = (h(&[0, 1])?, h(&[0, 2])?, h(&[1, 2])?, vn_entropy(&rho));

    // i: S(S) + S(A) − S(SA) against H(S) − Σ_a p(a) S(ρ_a)
    let mut cond = 0.0;
    for a in 0..da {
        let mut m = DMatrix::<Complex64>::zeros(ds, ds);
        for b in 0..db {
            m += &blocks[a * db + b];
        }
        let w = m.trace().re;
        if w > 0.0 {
            cond += w * vn_entropy(&(m / Complex64::new(w, 0.0)));
        }
    }
    let v_i = ((hs + ha - hsa) - (hs - cond)).abs();
    let v_ii = (hs - (ds as f64).log2()).max(0.0);
    let v_iii = (-(hsa - ha)).max(0.0).max(-(hsab - hab));
    let v_iv = (hsab + hs - hsa - hsb).max(0.0);

    // v: projective measurement of S in a random basis
    let u = random_unitary(&mut rng, ds);
    let mut xa = vec![0.0; ds * da];
    for a in 0..da {
        let mut m = DMatrix::<Complex64>::zeros(ds, ds);
        for b in 0..db {
            m += &blocks[a * db + b];
        }
        for x in 0..ds {
            let v = u.column(x);
            xa[x * da + a] = (v.adjoint() * &m * v)[(0, 0)].re.max(0.0);
        }
    }
    let s: f64 = xa.iter().sum();
    xa.iter_mut().for_each(|v| *v /= s);
    let xa = JointTable::new(names(&["X", "A"]), vec![ds, da], xa)?;
    let i_xa = xa.group_mutual_information(&["X"], &["A"])?;
    let v_v = (i_xa - (hs + ha - hsa)).max(0.0);
    Ok(Trial {
        violations: [v_i, v_ii, v_iii, v_iv, v_v],
        reverse_iv_fails: hsa + hsb > hsab + hs + AXIOM_TOL,
    })
}

/// Evaluates every axiom on `trials` seeded random instances.
///
/// Shannon instances are random joint tables over `(S, A, B)`. Von Neumann
/// instances are classical-quantum states of a qubit with two classical
/// bits (total dimension 8), with random projective measurements for v.
pub fn axiom_suite(kind: EntropyKind, trials: usize, seed: u64) -> Result<Vec<AxiomReport>> {
    if trials == 0 {
        return Err(IcpError::InvalidArgument("trials must be at least 1".into()));
    }
    let results = (0..trials as u64)
        .into_par_iter()
        .map(|t| match kind {
            EntropyKind::Shannon => shannon_trial(seed, t),
            EntropyKind::VonNeumann => von_neumann_trial(seed, t),
        })
        .collect::<Result<Vec<Trial>>>()?;
    let reverse_failures = results.iter().filter(|t| t.reverse_iv_fails).count();
    Ok(AXIOM_IDS
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let max_violation = results.iter().map(|t| t.violations[k]).fold(0.0, f64::max);
            let note = (k == 3).then(|| {
                format!(
                    "checked as H(SA)+H(SB) >= H(SAB)+H(S); the reverse inequality H(SA)+H(SB) <= H(SAB)+H(S) fails strictly in {reverse_failures} of {trials} trials"
                )
            });
            AxiomReport {
                axiom: id.to_string(),
                trials,
                max_violation,
                passed: max_violation <= AXIOM_TOL,
                note,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shannon_small_run() {
        let r = axiom_suite(EntropyKind::Shannon, 200, 7).unwrap();
        assert_eq!(r.len(), 5);
        assert!(r.iter().all(|a| a.passed), "{r:?}");
        assert!(r[3].note.is_some());
    }

    #[test]
    fn von_neumann_small_run() {
        let r = axiom_suite(EntropyKind::VonNeumann, 50, 7).unwrap();
        assert!(r.iter().all(|a| a.passed), "{r:?}");
    }

    #[test]
    fn uniform_saturates_ii() {
        let t = JointTable::new(names(&["S"]), vec![4], vec![0.25; 4]).unwrap();
        let h = t.entropy_of(&["S"]).unwrap();
        assert_eq!(h - 4f64.log2(), 0.0);
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(axiom_suite(EntropyKind::Shannon, 0, 1).is_err());
    }
}
