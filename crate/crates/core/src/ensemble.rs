//! Classically correlated ensembles and the ICP evaluator.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{IcpError, Result};
use crate::gpt::{apply_effect, validate_state, Measurement, State, Theory, NORMALIZATION_TOL};
use crate::info::{entropy_bits, JointTable};

/// Tolerance on the violation margin.
pub const VIOLATION_TOL: f64 = 1e-9;

/// Name of the register at position `i`: `A`, `B`, `C`, ...
pub fn register_name(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("R{i}")
    }
}

/// One term `p · ω ⊗ σ_{i₁} ⊗ … ⊗ σ_{iₙ}` of an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleEntry {
    pub p: f64,
    pub state: State,
    pub registers: Vec<usize>,
}

/// Finite mixture of theory states tagged with classical register values.
#[derive(Clone, Debug)]
pub struct CorrelatedEnsemble {
    theory: Arc<Theory>,
    entries: Vec<EnsembleEntry>,
    register_alphabets: Vec<usize>,
}

impl CorrelatedEnsemble {
    pub fn theory(&self) -> &Arc<Theory> {
        &self.theory
    }

    pub fn entries(&self) -> &[EnsembleEntry] {
        &self.entries
    }

    pub fn register_alphabets(&self) -> &[usize] {
        &self.register_alphabets
    }

    pub fn register_count(&self) -> usize {
        self.register_alphabets.len()
    }

    pub fn register_names(&self) -> Vec<String> {
        (0..self.register_count()).map(register_name).collect()
    }

    pub fn register_index(&self, name: &str) -> Result<usize> {
        (0..self.register_count())
            .find(|&i| register_name(i) == name)
            .ok_or_else(|| IcpError::UnknownRegister(name.to_string()))
    }

    /// Joint distribution of the given registers.
    pub fn register_table(&self, registers: &[usize]) -> Result<JointTable> {
        let dims: Vec<usize> = registers.iter().map(|&r| self.register_alphabets[r]).collect();
        let mut probs = vec![0.0; dims.iter().product()];
        for e in &self.entries {
            probs[flat_index(registers.iter().map(|&r| e.registers[r]), &dims)] += e.p;
        }
        JointTable::new(registers.iter().map(|&r| register_name(r)).collect(), dims, probs)
    }
}

impl PartialEq for CorrelatedEnsemble {
    fn eq(&self, other: &Self) -> bool {
        self.theory.id() == other.theory.id()
            && self.entries == other.entries
            && self.register_alphabets == other.register_alphabets
    }
}

pub(crate) fn flat_index(values: impl Iterator<Item = usize>, dims: &[usize]) -> usize {
    values.zip(dims).fold(0, |acc, (v, d)| acc * d + v)
}

/// Validates and assembles an ensemble.
///
/// Register alphabets default to one more than the largest value seen.
pub fn build_ensemble(
    theory: &Arc<Theory>,
    entries: Vec<EnsembleEntry>,
    register_alphabets: Option<Vec<usize>>,
) -> Result<CorrelatedEnsemble> {
    if entries.is_empty() {
        return Err(IcpError::InvalidEnsemble("no entries".into()));
    }
    let n_reg = entries[0].registers.len();
    let mut total = 0.0;
    for (k, e) in entries.iter().enumerate() {
        let label = k + 1;
        if !e.p.is_finite() || e.p < 0.0 {
            return Err(IcpError::InvalidEnsemble(format!(
                "entry {label}: probability {} is not a nonnegative number",
                e.p
            )));
        }
        total += e.p;
        if e.registers.len() != n_reg {
            return Err(IcpError::InvalidEnsemble(format!(
                "entry {label}: {} register values, expected {n_reg}",
                e.registers.len()
            )));
        }
        if e.state.theory_id() != theory.id() {
            return Err(IcpError::InvalidEnsemble(format!(
                "entry {label}: state belongs to `{}`, not `{}`",
                e.state.theory_id(),
                theory.id()
            )));
        }
        let v = validate_state(theory, &e.state)?;
        if !v.accepted {
            return Err(IcpError::InvalidState {
                theory: theory.id().to_string(),
                reason: format!("entry {label}: {}", v.diagnostic.unwrap_or_default()),
            });
        }
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(IcpError::InvalidEnsemble(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    let alphabets = match register_alphabets {
        Some(a) => {
            if a.len() != n_reg {
                return Err(IcpError::InvalidEnsemble(format!(
                    "{} register alphabets given for {n_reg} registers",
                    a.len()
                )));
            }
            a
        }
        None => (0..n_reg)
            .map(|r| entries.iter().map(|e| e.registers[r] + 1).max().unwrap_or(1))
            .collect(),
    };
    for (k, e) in entries.iter().enumerate() {
        for (r, (&v, &size)) in e.registers.iter().zip(&alphabets).enumerate() {
            if size == 0 || v >= size {
                return Err(IcpError::InvalidEnsemble(format!(
                    "entry {}: register {} value {v} outside alphabet of size {size}",
                    k + 1,
                    register_name(r)
                )));
            }
        }
    }
    Ok(CorrelatedEnsemble {
        theory: theory.clone(),
        entries,
        register_alphabets: alphabets,
    })
}

/// Measurement-to-register pairing `(X_i, A_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableAssignment {
    pairs: Vec<(Measurement, String)>,
}

impl ObservableAssignment {
    pub fn new(pairs: Vec<(Measurement, String)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(IcpError::InvalidArgument("empty observable assignment".into()));
        }
        for (i, (_, a)) in pairs.iter().enumerate() {
            if pairs[..i].iter().any(|(_, b)| a == b) {
                return Err(IcpError::InvalidArgument(format!("register `{a}` assigned twice")));
            }
        }
        let id = pairs[0].0.theory_id();
        if let Some((m, _)) = pairs.iter().find(|(m, _)| m.theory_id() != id) {
            return Err(IcpError::InvalidArgument(format!(
                "measurement `{}` belongs to another theory",
                m.label()
            )));
        }
        Ok(Self { pairs })
    }

    /// Looks measurements up by name and pairs them with registers `A`, `B`, ... in order.
    pub fn from_names(theory: &Theory, names: &[&str]) -> Result<Self> {
        let pairs = names
            .iter()
            .enumerate()
            .map(|(i, n)| Ok((theory.measurement(n)?, register_name(i))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[(Measurement, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn measurements(&self) -> Vec<&Measurement> {
        self.pairs.iter().map(|(m, _)| m).collect()
    }
}

fn check_measurement(theory: &Theory, m: &Measurement) -> Result<()> {
    if m.theory_id() != theory.id() {
        return Err(IcpError::UnknownMeasurement {
            theory: theory.id().to_string(),
            name: m.label().to_string(),
        });
    }
    Ok(())
}

/// Table of `(outcome of m, value of register)` with
/// `p(x, a) = Σ_{entries with register = a} p · e_x(ω)`.
pub fn joint_outcome_table(
    ensemble: &CorrelatedEnsemble,
    measurement: &Measurement,
    register: &str,
) -> Result<JointTable> {
    check_measurement(&ensemble.theory, measurement)?;
    let r = ensemble.register_index(register)?;
    let k = measurement.outcomes();
    let size = ensemble.register_alphabets[r];
    let mut probs = vec![0.0; k * size];
    for e in &ensemble.entries {
        for (x, eff) in measurement.effects().iter().enumerate() {
            probs[x * size + e.registers[r]] += e.p * apply_effect(eff, &e.state)?;
        }
    }
    let mut out_name = measurement.label().to_string();
    if out_name == register {
        out_name.push('\'');
    }
    JointTable::from_weights(vec![out_name, register.to_string()], vec![k, size], probs)
}

/// Per-observable gains, redundancy and the ICP margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ICPReport {
    pub measurements: Vec<String>,
    pub registers: Vec<String>,
    /// `I(X_i:A_i)` in bits, clamped at 0.
    pub gains: Vec<f64>,
    /// `I(A₁:…:Aₙ)` in bits, clamped at 0.
    pub redundancy: f64,
    /// `I_E = Σ gains − redundancy`.
    pub extractable: f64,
    pub observed_dim: usize,
    /// `log₂ d`.
    pub bound: f64,
    /// `bound − extractable`.
    pub margin: f64,
    pub violated: bool,
    /// Marginal distribution of each assigned register.
    pub register_marginal: Vec<Vec<f64>>,
}

impl ICPReport {
    pub fn total_gain(&self) -> f64 {
        self.gains.iter().sum()
    }

    pub(crate) fn from_parts(
        measurements: Vec<String>,
        registers: Vec<String>,
        raw: &RawEvaluation,
        observed_dim: usize,
    ) -> Self {
        let gains: Vec<f64> = raw.gains.iter().map(|g| g.max(0.0)).collect();
        let redundancy = raw.redundancy.max(0.0);
        let extractable = gains.iter().sum::<f64>() - redundancy;
        let bound = (observed_dim as f64).log2();
        let margin = bound - extractable;
        Self {
            measurements,
            registers,
            gains,
            redundancy,
            extractable,
            observed_dim,
            bound,
            margin,
            violated: margin < -VIOLATION_TOL,
            register_marginal: raw.marginals.clone(),
        }
    }
}

/// Unclamped information quantities.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RawEvaluation {
    pub gains: Vec<f64>,
    pub redundancy: f64,
    pub marginals: Vec<Vec<f64>>,
}

/// Evaluation over flat arrays.
///
/// `weights[k]` is the weight of entry `k`, `regs[k]` its values on the
/// assigned registers (sizes `alphabets`), and `outcomes[i][k]` the outcome
/// distribution of measurement `i` on entry `k`.
pub(crate) fn evaluate_raw(
    weights: &[f64],
    regs: &[Vec<usize>],
    alphabets: &[usize],
    outcomes: &[Vec<Vec<f64>>],
) -> RawEvaluation {
    let n = alphabets.len();
    let mut marginals: Vec<Vec<f64>> = alphabets.iter().map(|&a| vec![0.0; a]).collect();
    for (w, r) in weights.iter().zip(regs) {
        for i in 0..n {
            marginals[i][r[i]] += w;
        }
    }
    let mut gains = Vec::with_capacity(n);
    for i in 0..n {
        let a = alphabets[i];
        let k = outcomes[i].first().map_or(0, |o| o.len());
        let mut table = vec![0.0; k * a];
        let mut px = vec![0.0; k];
        for ((w, r), probs) in weights.iter().zip(regs).zip(&outcomes[i]) {
            for (x, q) in probs.iter().enumerate() {
                table[x * a + r[i]] += w * q;
                px[x] += w * q;
            }
        }
        gains.push(entropy_bits(&px) + entropy_bits(&marginals[i]) - entropy_bits(&table));
    }
    let redundancy = if n < 2 {
        0.0
    } else {
        let size: usize = alphabets.iter().product();
        let mut joint = vec![0.0; size];
        for (w, r) in weights.iter().zip(regs) {
            joint[flat_index(r.iter().copied(), alphabets)] += w;
        }
        marginals.iter().map(|m| entropy_bits(m)).sum::<f64>() - entropy_bits(&joint)
    };
    RawEvaluation {
        gains,
        redundancy,
        marginals,
    }
}

/// Evaluates `Σ I(X_i:A_i) − I(A₁:…:Aₙ)` against `log₂ d`.
pub fn evaluate_icp(ensemble: &CorrelatedEnsemble, assignment: &ObservableAssignment) -> Result<ICPReport> {
    let theory = &ensemble.theory;
    let reg_idx = assignment
        .pairs
        .iter()
        .map(|(m, a)| {
            check_measurement(theory, m)?;
            ensemble.register_index(a)
        })
        .collect::<Result<Vec<_>>>()?;
    let alphabets: Vec<usize> = reg_idx.iter().map(|&r| ensemble.register_alphabets[r]).collect();
    let weights: Vec<f64> = ensemble.entries.iter().map(|e| e.p).collect();
    let regs: Vec<Vec<usize>> = ensemble
        .entries
        .iter()
        .map(|e| reg_idx.iter().map(|&r| e.registers[r]).collect())
        .collect();
    let outcomes = assignment
        .pairs
        .iter()
        .map(|(m, _)| {
            ensemble
                .entries
                .iter()
                .map(|e| {
                    m.effects()
                        .iter()
                        .map(|eff| apply_effect(eff, &e.state))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let raw = evaluate_raw(&weights, &regs, &alphabets, &outcomes);
    let d = theory.observed_dimension()?.d;
    Ok(ICPReport::from_parts(
        assignment.pairs.iter().map(|(m, _)| m.label().to_string()).collect(),
        assignment.pairs.iter().map(|(_, a)| a.clone()).collect(),
        &raw,
        d,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::info::mutual_information;
    use approx::assert_abs_diff_eq;

    fn corners(theory: &Arc<Theory>) -> Vec<EnsembleEntry> {
        let mut out = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let s = [1.0 - 2.0 * i as f64, 1.0 - 2.0 * j as f64];
                out.push(EnsembleEntry {
                    p: 0.25,
                    state: theory.state(vec![s[0], s[1], 1.0]).unwrap(),
                    registers: vec![i, j],
                });
            }
        }
        out
    }

    #[test]
    fn sbit_corners() {
        let t = catalog::sbit().theory;
        let ens = build_ensemble(&t, corners(&t), None).unwrap();
        let x = t.measurement("X").unwrap();
        let table = joint_outcome_table(&ens, &x, "A").unwrap();
        assert_abs_diff_eq!(table.probs()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(table.probs()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mutual_information(&table, "X", "A").unwrap(), 1.0, epsilon = 1e-12);
        let asg = ObservableAssignment::from_names(&t, &["X", "Z"]).unwrap();
        let r = evaluate_icp(&ens, &asg).unwrap();
        assert_eq!(r.extractable, 2.0);
        assert_eq!(r.redundancy, 0.0);
        assert_eq!(r.bound, 1.0);
        assert!(r.violated);
    }

    #[test]
    fn single_deterministic_entry() {
        let t = catalog::classical_bit().theory;
        let s = t.state(vec![1.0, 0.0]).unwrap();
        let ens = build_ensemble(
            &t,
            vec![EnsembleEntry {
                p: 1.0,
                state: s,
                registers: vec![0, 0],
            }],
            None,
        )
        .unwrap();
        let asg = ObservableAssignment::from_names(&t, &["X", "Z"]).unwrap();
        let r = evaluate_icp(&ens, &asg).unwrap();
        assert_eq!(r.gains, vec![0.0, 0.0]);
        assert_eq!(r.redundancy, 0.0);
        assert!(!r.violated);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let t = catalog::classical_bit().theory;
        let s = t.state(vec![1.0, 0.0]).unwrap();
        let entries = vec![
            EnsembleEntry {
                p: 0.6,
                state: s.clone(),
                registers: vec![0],
            },
            EnsembleEntry {
                p: 0.6,
                state: s,
                registers: vec![1],
            },
        ];
        assert!(matches!(
            build_ensemble(&t, entries, None),
            Err(IcpError::InvalidEnsemble(_))
        ));
    }

    #[test]
    fn rejects_foreign_state_and_bad_register() {
        let t = catalog::classical_bit().theory;
        let q = catalog::qubit().theory;
        let s = q.bloch_state([0.0, 0.0, 1.0]).unwrap();
        let e = EnsembleEntry {
            p: 1.0,
            state: s,
            registers: vec![0],
        };
        assert!(build_ensemble(&t, vec![e], None).is_err());
        let s = t.state(vec![1.0, 0.0]).unwrap();
        let e = EnsembleEntry {
            p: 1.0,
            state: s,
            registers: vec![3],
        };
        assert!(build_ensemble(&t, vec![e], Some(vec![2])).is_err());
    }

    #[test]
    fn classical_correlated_encoding() {
        let t = catalog::classical_bit().theory;
        let entries = (0..2)
            .map(|b| EnsembleEntry {
                p: 0.5,
                state: t.state(if b == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).unwrap(),
                registers: vec![b, b],
            })
            .collect();
        let ens = build_ensemble(&t, entries, None).unwrap();
        let asg = ObservableAssignment::from_names(&t, &["X", "Z"]).unwrap();
        let r = evaluate_icp(&ens, &asg).unwrap();
        assert_eq!(r.gains, vec![1.0, 1.0]);
        assert_eq!(r.redundancy, 1.0);
        assert_eq!(r.extractable, 1.0);
        assert!(!r.violated);
        assert_eq!(r.register_marginal, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn assignment_rejects_repeated_register() {
        let t = catalog::qubit().theory;
        let x = t.measurement("X").unwrap();
        let z = t.measurement("Z").unwrap();
        assert!(ObservableAssignment::new(vec![(x, "A".into()), (z, "A".into())]).is_err());
    }

    #[test]
    fn unknown_register() {
        let t = catalog::sbit().theory;
        let ens = build_ensemble(&t, corners(&t), None).unwrap();
        let x = t.measurement("X").unwrap();
        assert!(matches!(
            joint_outcome_table(&ens, &x, "Q"),
            Err(IcpError::UnknownRegister(_))
        ));
    }
}
