//! Step-by-step audit of the ICP bound on a concrete ensemble.
//!
//! The system `S` is modelled jointly with the assigned registers: as a hidden
//! classical variable for simplex theories, and as a classical-quantum state
//! for quantum theories. Every intermediate inequality of the bound is then
//! evaluated numerically, so a violating ensemble shows which step breaks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::{evaluate_icp, register_name, CorrelatedEnsemble, ObservableAssignment, VIOLATION_TOL};
use crate::error::{IcpError, Result};
use crate::gpt::TheoryVariant;
use crate::info::{entropy_bits, JointTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// `lhs ≤ rhs`; margin is `rhs − lhs`.
    Inequality,
    /// `lhs = rhs`; margin is `−|lhs − rhs|`.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofStep {
    pub label: String,
    pub kind: StepKind,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

impl ProofStep {
    fn le(label: String, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            label,
            kind: StepKind::Inequality,
            lhs,
            rhs,
            margin,
            holds: margin >= -VIOLATION_TOL,
        }
    }

    fn eq(label: String, lhs: f64, rhs: f64) -> Self {
        let margin = -(lhs - rhs).abs();
        Self {
            label,
            kind: StepKind::Identity,
            lhs,
            rhs,
            margin,
            holds: margin >= -VIOLATION_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofLedger {
    pub theory_id: String,
    pub model: String,
    pub registers: Vec<String>,
    pub steps: Vec<ProofStep>,
    pub all_hold: bool,
    /// Label of the first step that fails, if any.
    pub first_failure: Option<String>,
}

/// Joint entropies `H(S R)` and `H(R)` for subsets `R` of the ensemble's registers.
enum Model {
    Classical(JointTable),
    Quantum { blocks: Vec<(Vec<usize>, DMatrix<Complex64>)> },
}

impl Model {
    fn build(ens: &CorrelatedEnsemble) -> Result<Self> {
        let theory = ens.theory();
        match theory.variant() {
            TheoryVariant::Quantum { .. } => {
                let blocks = ens
                    .entries()
                    .iter()
                    .map(|e| {
                        let rho = theory.density_operator(&e.state)?;
                        Ok((e.registers.clone(), rho.matrix() * Complex64::new(e.p, 0.0)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Quantum { blocks })
            }
            _ if theory.is_simplex() => {
                let ds = theory.extreme_states().len();
                let alph = ens.register_alphabets();
                let mut dims = vec![ds];
                dims.extend_from_slice(alph);
                let mut names = vec!["S".to_string()];
                names.extend(ens.register_names());
                let stride: usize = alph.iter().product();
                let mut probs = vec![0.0; ds * stride];
                for e in ens.entries() {
                    let w = theory.barycentric(&e.state)?;
                    let r = crate::ensemble::flat_index(e.registers.iter().copied(), alph);
                    for (s, ws) in w.iter().enumerate() {
                        probs[s * stride + r] += e.p * ws;
                    }
                }
                Ok(Self::Classical(JointTable::from_weights(names, dims, probs)?))
            }
            _ => Err(IcpError::NotApplicable(format!(
                "`{}` has no joint model of system and registers",
                theory.id()
            ))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Classical(_) => "classical",
            Self::Quantum { .. } => "classical-quantum",
        }
    }

    /// `H(S R)` when `with_s`, else `H(R)`; `regs` are register indices.
    fn entropy(&self, with_s: bool, regs: &[usize]) -> Result<f64> {
        match self {
            Self::Classical(t) => {
                let mut names: Vec<String> = Vec::new();
                if with_s {
                    names.push("S".into());
                }
                names.extend(regs.iter().map(|&r| register_name(r)));
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                if refs.is_empty() {
                    return Ok(0.0);
                }
                t.entropy_of(&refs)
            }
            Self::Quantum { blocks } => {
                let mut groups: Vec<(Vec<usize>, DMatrix<Complex64>)> = Vec::new();
                for (r, m) in blocks {
                    let key: Vec<usize> = regs.iter().map(|&i| r[i]).collect();
                    match groups.iter_mut().find(|(k, _)| *k == key) {
                        Some((_, acc)) => *acc += m,
                        None => groups.push((key, m.clone())),
                    }
                }
                if with_s {
                    Ok(groups
                        .iter()
                        .map(|(_, m)| {
                            let eig: Vec<f64> = m.clone().symmetric_eigenvalues().iter().map(|x| x.max(0.0)).collect();
                            entropy_bits(&eig)
                        })
                        .sum())
                } else {
                    let w: Vec<f64> = groups.iter().map(|(_, m)| m.trace().re).collect();
                    Ok(entropy_bits(&w))
                }
            }
        }
    }

    /// `I(S:R) = H(S) + H(R) − H(S R)`.
    fn mi_s(&self, regs: &[usize]) -> Result<f64> {
        Ok(self.entropy(true, &[])? + self.entropy(false, regs)? - self.entropy(true, regs)?)
    }

    /// `I(X S? : Y)` for register groups, optionally including `S` on the left.
    fn mi(&self, left: &[usize], with_s: bool, right: &[usize]) -> Result<f64> {
        let both: Vec<usize> = left.iter().chain(right).copied().collect();
        Ok(self.entropy(with_s, left)? + self.entropy(false, right)? - self.entropy(with_s, &both)?)
    }
}

/// Evaluates each step of the ICP bound for `ensemble` under `assignment`.
///
/// Applies to simplex (classical) and quantum theories; other theories return
/// [`IcpError::NotApplicable`].
pub fn proof_chain_check(ensemble: &CorrelatedEnsemble, assignment: &ObservableAssignment) -> Result<ProofLedger> {
    let model = Model::build(ensemble)?;
    let report = evaluate_icp(ensemble, assignment)?;
    let regs = assignment
        .pairs()
        .iter()
        .map(|(_, a)| ensemble.register_index(a))
        .collect::<Result<Vec<_>>>()?;
    let n = regs.len();
    let names: Vec<String> = regs.iter().map(|&r| register_name(r)).collect();
    let all = names.join("");
    let mut steps = Vec::new();

    let hs = model.entropy(true, &[])?;
    let i_all = model.mi_s(&regs)?;
    steps.push(ProofStep::le(format!("I(S:{all}) <= H(S)"), i_all, hs));
    steps.push(ProofStep::le("H(S) <= log2 d".into(), hs, report.bound));

    let mut cond = Vec::with_capacity(n);
    for k in 0..n {
        let prev = &regs[..k];
        let with: Vec<usize> = regs[..=k].to_vec();
        cond.push(model.mi_s(&with)? - model.mi_s(prev)?);
    }
    steps.push(ProofStep::eq(
        format!("I(S:{all}) = sum_k I(S:A_k|A_<k)"),
        i_all,
        cond.iter().sum(),
    ));

    let mut singles = Vec::with_capacity(n);
    for k in 0..n {
        singles.push(model.mi_s(&regs[k..=k])?);
    }
    let mut pair_terms = Vec::with_capacity(n);
    for k in 1..n {
        let prev = &regs[..k];
        let cur = &regs[k..=k];
        let joint = model.mi(prev, true, cur)?;
        let past = model.mi(prev, false, cur)?;
        pair_terms.push(past);
        let lbl = names[..k].join("");
        steps.push(ProofStep::eq(
            format!("I(S:{}|{lbl}) = I({lbl}S:{}) - I({lbl}:{})", names[k], names[k], names[k]),
            cond[k],
            joint - past,
        ));
        steps.push(ProofStep::le(format!("I(S:{}) <= I({lbl}S:{})", names[k], names[k]), singles[k], joint));
    }
    let lower = singles.iter().sum::<f64>() - pair_terms.iter().sum::<f64>();
    steps.push(ProofStep::le(
        format!("sum_k I(S:A_k) - sum_k I(A_<k:A_k) <= I(S:{all})"),
        lower,
        i_all,
    ));
    let raw_redundancy = if n < 2 {
        0.0
    } else {
        let t = ensemble.register_table(&regs)?;
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        crate::info::multivariate_mutual_information(&t, &refs)?
    };
    steps.push(ProofStep::eq(
        format!("sum_k I(A_<k:A_k) = I({})", names.join(":")),
        pair_terms.iter().sum(),
        raw_redundancy,
    ));
    for k in 0..n {
        steps.push(ProofStep::le(
            format!("I({}:{}) <= I(S:{})", report.measurements[k], names[k], names[k]),
            report.gains[k],
            singles[k],
        ));
    }
    steps.push(ProofStep::le(
        format!("sum gains - I({}) <= I(S:{all})", names.join(":")),
        report.extractable,
        i_all,
    ));
    steps.push(ProofStep::le("sum gains - redundancy <= log2 d".into(), report.extractable, report.bound));

    let first_failure = steps.iter().find(|s| !s.holds).map(|s| s.label.clone());
    Ok(ProofLedger {
        theory_id: ensemble.theory().id().to_string(),
        model: model.name().to_string(),
        registers: names,
        all_hold: first_failure.is_none(),
        first_failure,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::constructions;
    use crate::random::{random_ensemble, trial_rng};

    #[test]
    fn classical_random_ensembles_satisfy_every_step() {
        let e = catalog::lookup("classical-trit").unwrap();
        let asg = ObservableAssignment::from_names(&e.theory, &["X", "Z"]).unwrap();
        for t in 0..20 {
            let ens = random_ensemble(&mut trial_rng(5, t), &e.theory, &[3, 2]).unwrap();
            let led = proof_chain_check(&ens, &asg).unwrap();
            assert!(led.all_hold, "{led:#?}");
        }
    }

    #[test]
    fn qubit_random_ensembles_satisfy_every_step() {
        let e = catalog::lookup("qubit").unwrap();
        let asg = ObservableAssignment::from_names(&e.theory, &["X", "Z"]).unwrap();
        for t in 0..20 {
            let ens = random_ensemble(&mut trial_rng(6, t), &e.theory, &[2, 2]).unwrap();
            let led = proof_chain_check(&ens, &asg).unwrap();
            assert_eq!(led.model, "classical-quantum");
            assert!(led.all_hold, "{led:#?}");
        }
    }

    #[test]
    fn hbit_breaks_at_system_entropy() {
        let cert = constructions::hbit_violation().unwrap();
        let led = proof_chain_check(&cert.ensemble, &cert.assignment).unwrap();
        assert_eq!(led.first_failure.as_deref(), Some("H(S) <= log2 d"));
        assert!(!led.steps.last().unwrap().holds);
    }

    #[test]
    fn sbit_not_applicable() {
        let cert = constructions::sbit_violation().unwrap();
        assert!(matches!(
            proof_chain_check(&cert.ensemble, &cert.assignment),
            Err(IcpError::NotApplicable(_))
        ));
    }
}
