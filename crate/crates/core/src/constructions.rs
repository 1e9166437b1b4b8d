//! Explicit encodings that violate (or respect) the ICP bound, each with
//! closed-form crosschecks.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use serde::Serialize;

use crate::catalog::{self, polygon_vertex, polygon_x_index, polygon_z_index};
use crate::ensemble::{
    build_ensemble, evaluate_icp, joint_outcome_table, CorrelatedEnsemble, EnsembleEntry, ICPReport,
    ObservableAssignment,
};
use crate::error::{IcpError, Result};
use crate::gpt::{composite_dimension_bound, NormExponent, Theory};
use crate::info::binary_entropy;
use crate::optimize::{maximize_extractable, Objective, OptimizerConfig};

/// An ensemble, its report, and analytic values it must reproduce.
#[derive(Clone, Debug)]
pub struct ViolationCertificate {
    pub theory_id: String,
    pub ensemble: CorrelatedEnsemble,
    pub assignment: ObservableAssignment,
    pub report: ICPReport,
    /// Analytic values keyed by quantity name.
    pub closed_form: BTreeMap<String, f64>,
    /// The same quantities computed from the ensemble.
    pub computed: BTreeMap<String, f64>,
    /// Largest `|closed_form − computed|` over shared keys (0 when none).
    pub crosscheck_max_abs_diff: f64,
}

impl ViolationCertificate {
    fn assemble(
        ensemble: CorrelatedEnsemble,
        assignment: ObservableAssignment,
        closed_form: BTreeMap<String, f64>,
        mut computed: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let report = evaluate_icp(&ensemble, &assignment)?;
        for (i, g) in report.gains.iter().enumerate() {
            let (m, a) = (&report.measurements[i], &report.registers[i]);
            computed.entry(format!("I({m}:{a})")).or_insert(*g);
        }
        computed.entry("redundancy".into()).or_insert(report.redundancy);
        computed.entry("extractable".into()).or_insert(report.extractable);
        let crosscheck_max_abs_diff = closed_form
            .iter()
            .filter_map(|(k, v)| computed.get(k).map(|c| (c - v).abs()))
            .fold(0.0, f64::max);
        Ok(Self {
            theory_id: ensemble.theory().id().to_string(),
            ensemble,
            assignment,
            report,
            closed_form,
            computed,
            crosscheck_max_abs_diff,
        })
    }
}

fn uniform_entries(states: Vec<(crate::gpt::State, Vec<usize>)>) -> Vec<EnsembleEntry> {
    let p = 1.0 / states.len() as f64;
    states
        .into_iter()
        .map(|(state, registers)| EnsembleEntry { p, state, registers })
        .collect()
}

fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn sign(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `p(M = outcome | register = value)` from the joint outcome table.
pub fn conditional_probability(
    ensemble: &CorrelatedEnsemble,
    measurement: &crate::gpt::Measurement,
    register: &str,
    outcome: usize,
    value: usize,
) -> Result<f64> {
    let t = joint_outcome_table(ensemble, measurement, register)?;
    let a = t.dims()[1];
    let joint = t.probs()[outcome * a + value];
    let marginal: f64 = (0..t.dims()[0]).map(|x| t.probs()[x * a + value]).sum();
    if marginal <= 0.0 {
        return Err(IcpError::InvalidArgument(format!(
            "register {register} never takes value {value}"
        )));
    }
    Ok(joint / marginal)
}

fn two_bit_certificate(theory: &Arc<Theory>, states: Vec<(crate::gpt::State, Vec<usize>)>) -> Result<ViolationCertificate> {
    let ens = build_ensemble(theory, uniform_entries(states), Some(vec![2, 2]))?;
    let asg = ObservableAssignment::from_names(theory, &["X", "Z"])?;
    let closed = map(&[("I(X:A)", 1.0), ("I(Z:B)", 1.0), ("redundancy", 0.0), ("extractable", 2.0)]);
    ViolationCertificate::assemble(ens, asg, closed, BTreeMap::new())
}

/// The four corners of the square, `(s_X, s_Z) = ((−1)^i, (−1)^j)`, with
/// registers `(i, j)` and weight 1/4 each.
pub fn sbit_violation() -> Result<ViolationCertificate> {
    let theory = catalog::sbit().theory;
    let mut states = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            states.push((theory.state(vec![sign(i), sign(j), 1.0])?, vec![i, j]));
        }
    }
    two_bit_certificate(&theory, states)
}

/// The four internal states `(a, b)` with registers `(a, b)` and weight 1/4 each.
pub fn hbit_violation() -> Result<ViolationCertificate> {
    let theory = catalog::hbit().theory;
    let mut states = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            let mut v = vec![0.0; 4];
            v[2 * a + b] = 1.0;
            states.push((theory.state(v)?, vec![a, b]));
        }
    }
    two_bit_certificate(&theory, states)
}

/// Equal-gain search over classical-bit encodings.
pub fn classical_bit_analysis(config: &OptimizerConfig) -> Result<ICPReport> {
    Ok(classical_bit_certificate(config)?.report)
}

/// The optimizer's classical-bit ensemble, checked against the closed-form
/// optimum: both gains 1, redundancy 1, extractable 1.
pub fn classical_bit_certificate(config: &OptimizerConfig) -> Result<ViolationCertificate> {
    let theory = catalog::classical_bit().theory;
    let asg = ObservableAssignment::from_names(&theory, &["X", "Z"])?;
    let cfg = OptimizerConfig {
        objective: Objective::ExtractablePreferGain,
        equal_gain_constraint: true,
        ..config.clone()
    };
    let best = maximize_extractable(&theory, &asg, &cfg)?;
    let closed = map(&[("I(X:A)", 1.0), ("I(Z:B)", 1.0), ("redundancy", 1.0), ("extractable", 1.0)]);
    ViolationCertificate::assemble(best.ensemble, asg, closed, BTreeMap::new())
}

/// Per-cell success probability of the qubit 2 → 1 random access code.
pub fn qubit_rac_success() -> f64 {
    (2.0 + 2f64.sqrt()) / 4.0
}

/// Qubit states with Bloch vectors `((−1)^i, 0, (−1)^j) / √2`, registers
/// `(i, j)`, weight 1/4 each.
pub fn qubit_rac_construction() -> Result<ViolationCertificate> {
    let theory = catalog::qubit().theory;
    let mut states = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let r = [sign(i) * FRAC_1_SQRT_2, 0.0, sign(j) * FRAC_1_SQRT_2];
            states.push((theory.bloch_state(r)?, vec![i, j]));
        }
    }
    let ens = build_ensemble(&theory, uniform_entries(states), Some(vec![2, 2]))?;
    let asg = ObservableAssignment::from_names(&theory, &["X", "Z"])?;
    let p = qubit_rac_success();
    let gain = 1.0 - binary_entropy(p)?;
    let closed = map(&[
        ("p(X=0|A=0)", p),
        ("p(Z=1|B=1)", p),
        ("I(X:A)", gain),
        ("I(Z:B)", gain),
        ("redundancy", 0.0),
        ("extractable", 2.0 * gain),
    ]);
    let (x, z) = (theory.measurement("X")?, theory.measurement("Z")?);
    let computed = map(&[
        ("p(X=0|A=0)", conditional_probability(&ens, &x, "A", 0, 0)?),
        ("p(Z=1|B=1)", conditional_probability(&ens, &z, "B", 1, 1)?),
    ]);
    ViolationCertificate::assemble(ens, asg, closed, computed)
}

/// Encodes only `A`, in `X` eigenstates; `B` is uniform and ignored.
pub fn qubit_single_species() -> Result<ViolationCertificate> {
    let theory = catalog::qubit().theory;
    let mut states = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            states.push((theory.bloch_state([sign(i), 0.0, 0.0])?, vec![i, j]));
        }
    }
    let ens = build_ensemble(&theory, uniform_entries(states), Some(vec![2, 2]))?;
    let asg = ObservableAssignment::from_names(&theory, &["X", "Z"])?;
    let closed = map(&[("I(X:A)", 1.0), ("I(Z:B)", 0.0), ("extractable", 1.0)]);
    ViolationCertificate::assemble(ens, asg, closed, BTreeMap::new())
}

/// Grid for the boundary search `s_X ∈ [0, 1]`, `s_Z = (1 − s_X^p)^{1/p}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgnstSearchConfig {
    /// Number of grid points; `1 − s_X` is log-spaced over `[min_gap, 1]`.
    pub points: usize,
    /// Smallest `1 − s_X` on the grid besides the endpoint `s_X = 1`.
    pub min_gap: f64,
    /// Exponent margin of the analytic bound check.
    pub epsilon: f64,
    /// Width of the window `1 − δ_x < s_X < 1` of the analytic bound check.
    pub delta_x: f64,
}

impl Default for PgnstSearchConfig {
    fn default() -> Self {
        Self {
            points: 100_000,
            min_gap: 1e-12,
            epsilon: 0.1,
            delta_x: 1e-2,
        }
    }
}

impl PgnstSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(IcpError::InvalidArgument("grid needs at least 2 points".into()));
        }
        if !(self.min_gap > 0.0 && self.min_gap < 1.0) {
            return Err(IcpError::InvalidArgument("min_gap must lie in (0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(IcpError::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.delta_x > 0.0 && self.delta_x < 1.0) {
            return Err(IcpError::InvalidArgument("delta_x must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Minimizer of `H(X) + H(Z)` on the saturating boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PgnstMinimum {
    pub s_x: f64,
    pub s_z: f64,
    /// `H̃ = min H((1+s_X)/2) + H((1+s_Z)/2)`.
    pub h_tilde: f64,
}

/// `1 − s^p` without cancellation near `s = 1`.
fn one_minus_pow(s: f64, p: f64) -> f64 {
    -(p * (-(1.0 - s)).ln_1p()).exp_m1()
}

/// `s_Z = (1 − s_X^p)^{1/p}`, and 1 for `p = ∞`.
pub fn pgnst_boundary(p: NormExponent, s_x: f64) -> f64 {
    match p {
        NormExponent::Infinite => 1.0,
        NormExponent::Finite(p) => one_minus_pow(s_x, p).max(0.0).powf(1.0 / p),
    }
}

fn entropy_sum(p: NormExponent, s_x: f64) -> f64 {
    let s_z = pgnst_boundary(p, s_x);
    let h = |s: f64| binary_entropy(((1.0 + s) / 2.0).clamp(0.0, 1.0)).unwrap_or(0.0);
    h(s_x) + h(s_z)
}

/// Minimizes `H(X) + H(Z)` over the boundary in the quadrant `s_X, s_Z ≥ 0`:
/// a log-spaced grid accumulating at `s_X = 1`, then golden-section
/// refinement around the best grid point.
pub fn pgnst_min_entropy_sum(p: NormExponent, config: &PgnstSearchConfig) -> Result<PgnstMinimum> {
    config.validate()?;
    let mut grid: Vec<f64> = vec![0.0, 1.0];
    let (lo, n) = (config.min_gap.ln(), config.points);
    for k in 0..n {
        let gap = (lo * k as f64 / (n - 1) as f64).exp();
        grid.push(1.0 - gap);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&s| entropy_sum(p, s)).collect();
    let mut k = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[k] {
            k = i;
        }
    }
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let (mut best_s, mut best_v) = (grid[k], values[k]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if b - a <= 1e-15 {
            break;
        }
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        let (fc, fd) = (entropy_sum(p, c), entropy_sum(p, d));
        for (s, v) in [(c, fc), (d, fd)] {
            if v < best_v {
                best_s = s;
                best_v = v;
            }
        }
        if fc < fd {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(PgnstMinimum {
        s_x: best_s,
        s_z: pgnst_boundary(p, best_s),
        h_tilde: best_v,
    })
}

/// Uniform ensemble of `ψ_{±±}` with mean values `(±s_X*, ±s_Z*)` and
/// registers `(i, j)` reading the signs.
pub fn pgnst_violation(p: NormExponent, config: &PgnstSearchConfig) -> Result<ViolationCertificate> {
    let min = pgnst_min_entropy_sum(p, config)?;
    let theory = catalog::pgnst(p, 2)?.theory;
    let mut states = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let s = theory.state_from_means(&[sign(i) * min.s_x, sign(j) * min.s_z])?;
            states.push((s, vec![i, j]));
        }
    }
    let ens = build_ensemble(&theory, uniform_entries(states), Some(vec![2, 2]))?;
    let asg = ObservableAssignment::from_names(&theory, &["X", "Z"])?;
    let closed = map(&[
        ("extractable", 2.0 - min.h_tilde),
        ("redundancy", 0.0),
        ("p(X=0)", 0.5),
        ("p(Z=0)", 0.5),
    ]);
    let mean = ens.entries().iter().fold(vec![0.0; 3], |mut acc, e| {
        for (a, c) in acc.iter_mut().zip(e.state.coords()) {
            *a += e.p * c;
        }
        acc
    });
    let reduced = theory.state(mean)?;
    let px = crate::gpt::measure(&theory, &theory.measurement("X")?, &reduced)?;
    let pz = crate::gpt::measure(&theory, &theory.measurement("Z")?, &reduced)?;
    let mut computed = map(&[("p(X=0)", px.probs()[0]), ("p(Z=0)", pz.probs()[0])]);
    computed.insert("H_tilde".into(), min.h_tilde);
    computed.insert("s_x".into(), min.s_x);
    computed.insert("s_z".into(), min.s_z);
    ViolationCertificate::assemble(ens, asg, closed, computed)
}

/// One grid point of the analytic bound check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub s_x: f64,
    /// `((1 − s_X)/2)^{1+ε}`.
    pub lhs: f64,
    /// `(1 − s_X^p)^{2/p} / 4`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundLedger {
    pub p: f64,
    pub epsilon: f64,
    /// Rows in grid order.
    pub rows: Vec<BoundRow>,
    /// LHS < RHS at every grid point with `s_X < 1`.
    pub all_hold: bool,
    /// `RHS/LHS` increases strictly as `s_X → 1`.
    pub ratio_increasing: bool,
}

/// `s_X` values with `1 − s_X` log-spaced over `[lo, hi]`, ascending in `s_X`.
pub fn log_spaced_window(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..n)
        .map(|k| {
            let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            1.0 - (a + (b - a) * t).exp()
        })
        .collect()
}

/// Evaluates `((1 − s_X)/2)^{1+ε} < (1 − s_X^p)^{2/p} / 4` on the grid.
pub fn pgnst_bound_check(p: f64, epsilon: f64, s_x_grid: &[f64]) -> Result<BoundLedger> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(IcpError::InvalidArgument(format!("p must be finite and ≥ 2, got {p}")));
    }
    if !(epsilon > 0.0) || (1.0 + epsilon) * p <= 2.0 {
        return Err(IcpError::InvalidArgument(format!(
            "need ε > 0 and (1 + ε)p > 2, got ε = {epsilon}"
        )));
    }
    if let Some(s) = s_x_grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(IcpError::InvalidArgument(format!("s_x = {s} outside [0, 1]")));
    }
    let rows: Vec<BoundRow> = s_x_grid
        .iter()
        .map(|&s| {
            let lhs = ((1.0 - s) / 2.0).powf(1.0 + epsilon);
            let rhs = one_minus_pow(s, p).max(0.0).powf(2.0 / p) / 4.0;
            BoundRow {
                s_x: s,
                lhs,
                rhs,
                holds: lhs < rhs,
            }
        })
        .collect();
    let inner: Vec<&BoundRow> = rows.iter().filter(|r| r.s_x < 1.0).collect();
    let all_hold = inner.iter().all(|r| r.holds);
    let mut sorted = inner.clone();
    sorted.sort_by(|a, b| a.s_x.total_cmp(&b.s_x));
    let ratio_increasing = sorted.windows(2).all(|w| w[1].rhs / w[1].lhs > w[0].rhs / w[0].lhs);
    Ok(BoundLedger {
        p,
        epsilon,
        rows,
        all_hold,
        ratio_increasing,
    })
}

/// Recovery probability `(1/2)^{1/p}` for the norm-constrained RAC.
pub fn rac_recovery_formula(p: NormExponent) -> f64 {
    match p {
        NormExponent::Infinite => 1.0,
        NormExponent::Finite(p) => 0.5f64.powf(1.0 / p),
    }
}

/// Largest `(1 + s)/2` over symmetric states with `2 s^p ≤ 1`:
/// `(1 + (1/2)^{1/p}) / 2`.
pub fn rac_recovery_optimal(p: NormExponent) -> f64 {
    (1.0 + rac_recovery_formula(p)) / 2.0
}

/// `p(Z=0|B=0)` and `p(Z=1|B=1)` of the polygon ensemble in closed form.
pub fn polygon_conditionals_closed_form(n: usize) -> (f64, f64) {
    let nf = n as f64;
    let q = (n / 4) as f64;
    if n.is_multiple_of(2) {
        let v = 0.5 * (1.0 + (2.0 * PI * q / nf).sin() * (PI / nf).tan());
        (v, v)
    } else {
        let m = (n / 2) as f64;
        let sec2 = 1.0 / (PI / (2.0 * nf)).cos().powi(2);
        let c = |k: f64| (2.0 * PI * k / nf).cos();
        let z0 = 0.25 * (2.0 * (PI / nf).cos() + c(q) + c(q - m)) * sec2;
        let z1 = 0.25 * (2.0 - c(q) - c(q - m - 1.0)) * sec2;
        (z0, z1)
    }
}

/// The polygon ensemble (register values `(a, b)`, weight 1/4 each).
///
/// Even n: `ω_2 → (0,0)`, `ω_1 → (0,1)`, `ω_{n/2+1} → (1,0)`, `ω_{n/2+2} → (1,1)`.
/// Odd n: `ω_1 → (0,0)`, `ω_1 → (0,1)`, `ω_{m+1} → (1,0)`, `ω_{m+2} → (1,1)` with `m = ⌊n/2⌋`.
pub fn polygon_violation(n: usize) -> Result<ViolationCertificate> {
    let entry = catalog::polygon(n)?;
    let theory = entry.theory;
    let idx: [i64; 4] = if n.is_multiple_of(2) {
        let h = (n / 2) as i64;
        [2, 1, h + 1, h + 2]
    } else {
        let m = (n / 2) as i64;
        [1, 1, m + 1, m + 2]
    };
    let regs = [[0, 0], [0, 1], [1, 0], [1, 1]];
    let states = idx
        .iter()
        .zip(regs)
        .map(|(&i, r)| Ok((theory.state(polygon_vertex(n, i).to_vec())?, r.to_vec())))
        .collect::<Result<Vec<_>>>()?;
    let ens = build_ensemble(&theory, uniform_entries(states), Some(vec![2, 2]))?;
    let asg = ObservableAssignment::from_names(&theory, &["X", "Z"])?;
    let (z0, z1) = polygon_conditionals_closed_form(n);
    let z_gain = binary_entropy((z0 + 1.0 - z1) / 2.0)? - (binary_entropy(z0)? + binary_entropy(z1)?) / 2.0;
    let closed = map(&[
        ("p(Z=0|B=0)", z0),
        ("p(Z=1|B=1)", z1),
        ("I(X:A)", 1.0),
        ("I(Z:B)", z_gain),
        ("redundancy", 0.0),
        ("extractable", 1.0 + z_gain),
    ]);
    let z = theory.measurement("Z")?;
    let computed = map(&[
        ("p(Z=0|B=0)", conditional_probability(&ens, &z, "B", 0, 0)?),
        ("p(Z=1|B=1)", conditional_probability(&ens, &z, "B", 1, 1)?),
        ("x_index", polygon_x_index(n) as f64),
        ("z_index", polygon_z_index(n) as f64),
    ]);
    ViolationCertificate::assemble(ens, asg, closed, computed)
}

/// Measurement versus information dimension of a polygon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MismatchRecord {
    pub n: usize,
    pub measurement_dimension: usize,
    pub information_dimension: usize,
    pub mismatch: bool,
}

/// Information dimension is the largest set of vertices that are pairwise
/// perfectly distinguishable by some two-outcome `{e, u − e}` built from the
/// extreme effects and their complements.
pub fn polygon_mismatch(n: usize) -> Result<MismatchRecord> {
    if !(3..=20).contains(&n) {
        return Err(IcpError::InvalidArgument(format!("n must lie in 3..=20, got {n}")));
    }
    let theory = catalog::polygon(n)?.theory;
    let measurement_dimension = theory.observed_dimension()?.d;
    let verts = theory.extreme_states();
    let effects = theory.candidate_effects();
    let tol = crate::gpt::MEMBERSHIP_TOL;
    let values: Vec<Vec<f64>> = effects
        .iter()
        .map(|e| verts.iter().map(|v| crate::gpt::dot(e.coords(), v.coords())).collect())
        .collect();
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let ok = values
                .iter()
                .any(|v| (v[i] - 1.0).abs() <= tol && v[j].abs() <= tol || v[i].abs() <= tol && (v[j] - 1.0).abs() <= tol);
            if ok {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    let information_dimension = max_clique(&adj, 0, (1u32 << n) - 1, 0) as usize;
    Ok(MismatchRecord {
        n,
        measurement_dimension,
        information_dimension,
        mismatch: information_dimension > measurement_dimension,
    })
}

/// Bron–Kerbosch with pivoting over bitmask sets.
fn max_clique(adj: &[u32], r: u32, mut p: u32, mut x: u32) -> u32 {
    if p == 0 && x == 0 {
        return r.count_ones();
    }
    let pivot = (p | x).trailing_zeros() as usize;
    let mut best = r.count_ones();
    let mut cand = p & !adj[pivot];
    while cand != 0 {
        let v = cand.trailing_zeros() as usize;
        let bit = 1u32 << v;
        best = best.max(max_clique(adj, r | bit, p & adj[v], x & adj[v]));
        p &= !bit;
        x |= bit;
        cand &= !bit;
    }
    best
}

/// Super-strong RAC over `n` gbits evaluated with the closed formula.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompositeGbitRecord {
    pub n: usize,
    /// `½ + 1/(2√(2n+1))`.
    pub p_rec: f64,
    /// `3ⁿ`.
    pub encoded_bits: f64,
    /// `3ⁿ (1 − H(p_rec))`.
    pub extractable: f64,
    /// `log₂ 4ⁿ = 2n`.
    pub bound: f64,
    pub violated: bool,
}

pub fn composite_gbit_extractable(n: usize) -> Result<CompositeGbitRecord> {
    if n == 0 {
        return Err(IcpError::InvalidArgument("need at least one gbit".into()));
    }
    let p_rec = 0.5 + 1.0 / (2.0 * ((2 * n + 1) as f64).sqrt());
    let encoded_bits = 3f64.powi(n as i32);
    let extractable = encoded_bits * (1.0 - binary_entropy(p_rec)?);
    let bound = if n <= 63 {
        (composite_dimension_bound(&vec![3; n])? as f64).log2()
    } else {
        2.0 * n as f64
    };
    Ok(CompositeGbitRecord {
        n,
        p_rec,
        encoded_bits,
        extractable,
        bound,
        violated: extractable > bound,
    })
}

/// Smallest gbit count whose record is violated.
pub fn minimal_violating_gbits() -> Result<usize> {
    for n in 1..=63 {
        if composite_gbit_extractable(n)?.violated {
            return Ok(n);
        }
    }
    Err(IcpError::NotApplicable("no violation up to 63 gbits".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpt::apply_effect;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sbit_and_hbit() {
        for c in [sbit_violation().unwrap(), hbit_violation().unwrap()] {
            assert_eq!(c.report.extractable, 2.0);
            assert_eq!(c.report.redundancy, 0.0);
            assert_eq!(c.report.bound, 1.0);
            assert!(c.report.violated);
            assert_eq!(c.crosscheck_max_abs_diff, 0.0);
        }
    }

    #[test]
    fn qubit_rac_values() {
        let c = qubit_rac_construction().unwrap();
        assert!(c.crosscheck_max_abs_diff <= 1e-12);
        assert_abs_diff_eq!(c.report.extractable, 0.798_247_926_614_287_7, epsilon = 1e-12);
        assert_abs_diff_eq!(qubit_rac_success(), 0.853_553_390_593_273_7, epsilon = 1e-15);
        let s = qubit_single_species().unwrap();
        assert_eq!(s.report.gains, vec![1.0, 0.0]);
    }

    #[test]
    fn pgnst_endpoints() {
        let cfg = PgnstSearchConfig {
            points: 2000,
            ..PgnstSearchConfig::default()
        };
        let two = pgnst_min_entropy_sum(NormExponent::Finite(2.0), &cfg).unwrap();
        assert_abs_diff_eq!(two.h_tilde, 1.0, epsilon = 1e-6);
        let inf = pgnst_min_entropy_sum(NormExponent::Infinite, &cfg).unwrap();
        assert_eq!(inf.h_tilde, 0.0);
        let three = pgnst_min_entropy_sum(NormExponent::Finite(3.0), &cfg).unwrap();
        // scipy bounded minimization of the same function
        assert_abs_diff_eq!(three.h_tilde, 0.957_802_477_7, epsilon = 1e-9);
        let v = pgnst_violation(NormExponent::Finite(2.0), &cfg).unwrap();
        assert!(!v.report.violated);
        assert_abs_diff_eq!(v.report.extractable, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn bound_check_point() {
        let l = pgnst_bound_check(3.0, 0.1, &[0.999, 1.0]).unwrap();
        assert!(l.rows[0].holds);
        assert_eq!(l.rows[1].lhs, 0.0);
        assert_eq!(l.rows[1].rhs, 0.0);
        assert!(pgnst_bound_check(2.0, 0.0, &[0.5]).is_err());
    }

    #[test]
    fn rac_recovery() {
        assert_abs_diff_eq!(rac_recovery_formula(NormExponent::Finite(2.0)), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(rac_recovery_optimal(NormExponent::Finite(2.0)), qubit_rac_success(), epsilon = 1e-15);
        assert_eq!(rac_recovery_formula(NormExponent::Infinite), 1.0);
    }

    #[test]
    fn polygon_indices_by_hand() {
        // (n, X vertices with e = 1, X vertices with e = 0)
        for n in [4usize, 5, 6, 7, 8, 9] {
            let c = polygon_violation(n).unwrap();
            let x = c.ensemble.theory().measurement("X").unwrap();
            let e = &x.effects()[0];
            for entry in c.ensemble.entries() {
                let v = apply_effect(e, &entry.state).unwrap();
                let want = if entry.registers[0] == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, want, epsilon = 1e-12);
            }
            assert!(c.crosscheck_max_abs_diff <= 1e-12, "n = {n}");
        }
        assert_eq!((polygon_x_index(8), polygon_z_index(8)), (2, 4));
        assert_eq!((polygon_x_index(9), polygon_z_index(9)), (1, 3));
        assert_eq!((polygon_x_index(6), polygon_z_index(6)), (2, 3));
        assert_eq!((polygon_x_index(5), polygon_z_index(5)), (1, 2));
    }

    #[test]
    fn polygon_six_and_four() {
        let c = polygon_violation(6).unwrap();
        assert_abs_diff_eq!(c.closed_form["p(Z=0|B=0)"], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(c.report.extractable, 1.188_721_875_540_867, epsilon = 1e-12);
        let c = polygon_violation(4).unwrap();
        assert_abs_diff_eq!(c.report.extractable, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn polygon_three_is_classical() {
        let c = polygon_violation(3).unwrap();
        assert!(!c.report.violated);
        assert_eq!(c.report.observed_dim, 3);
    }

    #[test]
    fn mismatch_small() {
        let r = polygon_mismatch(4).unwrap();
        assert_eq!((r.measurement_dimension, r.information_dimension), (2, 4));
        assert!(!polygon_mismatch(5).unwrap().mismatch);
        assert_eq!(polygon_mismatch(6).unwrap().information_dimension, 3);
        assert_eq!(polygon_mismatch(3).unwrap().information_dimension, 3);
    }

    #[test]
    fn composite_values() {
        let r = composite_gbit_extractable(5).unwrap();
        assert_abs_diff_eq!(r.extractable, 16.185_898_375_659_86, epsilon = 1e-9);
        assert_eq!(r.bound, 10.0);
        assert!(r.violated);
        let r = composite_gbit_extractable(1).unwrap();
        assert_abs_diff_eq!(r.extractable, 0.767_977_346_252_995_7, epsilon = 1e-12);
        assert_eq!(minimal_violating_gbits().unwrap(), 5);
    }
}
