use std::f64::consts::PI;
use std::sync::Arc;

use icp_core::catalog;
use icp_core::constructions::{polygon_violation, pgnst_violation, PgnstSearchConfig};
use icp_core::ensemble::{build_ensemble, evaluate_icp, EnsembleEntry, ObservableAssignment};
use icp_core::gpt::{apply_effect, measure, NormExponent};
use icp_core::info::{
    binary_entropy, shannon_entropy, von_neumann_entropy, DensityOperator, Distribution, JointTable,
};
use icp_core::optimize::{maximize_extractable, OptimizerConfig, Strategy};
use icp_core::proof_chain::proof_chain_check;
use icp_core::random::{random_ensemble, random_simplex, random_state, trial_rng};
use icp_core::schema::{load_ensemble, EnsembleDoc};
use proptest::prelude::*;

fn theories() -> Vec<catalog::CatalogEntry> {
    catalog::list().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measurement_outcomes_form_a_distribution(seed in any::<u64>(), pick in 0usize..64) {
        let all = theories();
        let e = &all[pick % all.len()];
        let s = random_state(&mut trial_rng(seed, 0), &e.theory).unwrap();
        for m in e.theory.measurements() {
            let d = measure(&e.theory, m, &s).unwrap();
            prop_assert!(d.probs().iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn effects_act_linearly_on_mixtures(seed in any::<u64>(), pick in 0usize..64, t in 0.0f64..=1.0) {
        let all = theories();
        let e = &all[pick % all.len()];
        let mut rng = trial_rng(seed, 1);
        let a = random_state(&mut rng, &e.theory).unwrap();
        let b = random_state(&mut rng, &e.theory).unwrap();
        let mix: Vec<f64> = a.coords().iter().zip(b.coords()).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let m = e.theory.state(mix).unwrap();
        for meas in e.theory.measurements() {
            for eff in meas.effects() {
                let lhs = apply_effect(eff, &m).unwrap();
                let rhs = t * apply_effect(eff, &a).unwrap() + (1.0 - t) * apply_effect(eff, &b).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn entropy_is_permutation_invariant(seed in any::<u64>(), n in 1usize..8, shift in 0usize..8) {
        let p = random_simplex(&mut trial_rng(seed, 2), n);
        let mut q = p.clone();
        q.rotate_left(shift % n);
        q.reverse();
        let (hp, hq) = (
            shannon_entropy(&Distribution::new(p).unwrap()),
            shannon_entropy(&Distribution::new(q).unwrap()),
        );
        prop_assert!((hp - hq).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_concave(seed in any::<u64>(), n in 2usize..6, t in 0.0f64..=1.0) {
        let mut rng = trial_rng(seed, 3);
        let p = random_simplex(&mut rng, n);
        let q = random_simplex(&mut rng, n);
        let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let h = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            shannon_entropy(&Distribution::new(v.iter().map(|x| x / s).collect()).unwrap())
        };
        prop_assert!(h(m) + 1e-12 >= t * h(p) + (1.0 - t) * h(q));
    }

    #[test]
    fn von_neumann_of_diagonal_is_shannon(seed in any::<u64>(), n in 1usize..8) {
        let p = random_simplex(&mut trial_rng(seed, 4), n);
        let rho = DensityOperator::from_diagonal(&p).unwrap();
        let h = shannon_entropy(&Distribution::new(p).unwrap());
        prop_assert!((von_neumann_entropy(&rho) - h).abs() < 1e-12);
    }

    #[test]
    fn chain_rule_and_classical_identity(seed in any::<u64>(), da in 2usize..4, db in 2usize..4, dc in 2usize..4) {
        let probs = random_simplex(&mut trial_rng(seed, 5), da * db * dc);
        let names = vec!["A".to_string(), "B".to_string(), "C".to_string()];
        let t = JointTable::new(names, vec![da, db, dc], probs).unwrap();
        let i_a_bc = t.group_mutual_information(&["A"], &["B", "C"]).unwrap();
        let i_a_b = t.group_mutual_information(&["A"], &["B"]).unwrap();
        let i_a_c_b = t.conditional_mutual_information(&["A"], &["C"], &["B"]).unwrap();
        prop_assert!((i_a_bc - (i_a_b + i_a_c_b)).abs() < 1e-12);
        let total = icp_core::info::multivariate_mutual_information(&t, &["A", "B", "C"]).unwrap();
        let i_ab_c = t.group_mutual_information(&["A", "B"], &["C"]).unwrap();
        prop_assert!((total - (i_a_b + i_ab_c)).abs() < 1e-12);
    }

    #[test]
    fn redundancy_ignores_states(seed in any::<u64>()) {
        let e = catalog::classical_trit();
        let mut rng = trial_rng(seed, 6);
        let ens = random_ensemble(&mut rng, &e.theory, &[3, 2]).unwrap();
        let asg = ObservableAssignment::from_names(&e.theory, &["X", "Z"]).unwrap();
        let fixed = random_state(&mut rng, &e.theory).unwrap();
        let entries: Vec<EnsembleEntry> = ens
            .entries()
            .iter()
            .map(|x| EnsembleEntry { p: x.p, state: fixed.clone(), registers: x.registers.clone() })
            .collect();
        let frozen = build_ensemble(&e.theory, entries, Some(vec![3, 2])).unwrap();
        let a = evaluate_icp(&ens, &asg).unwrap();
        let b = evaluate_icp(&frozen, &asg).unwrap();
        prop_assert!((a.redundancy - b.redundancy).abs() < 1e-12);
        prop_assert!(b.gains.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn register_relabeling_preserves_report(seed in any::<u64>(), swap_a in any::<bool>()) {
        let e = catalog::qubit();
        let mut rng = trial_rng(seed, 7);
        let ens = random_ensemble(&mut rng, &e.theory, &[2, 2]).unwrap();
        let asg = ObservableAssignment::from_names(&e.theory, &["X", "Z"]).unwrap();
        let r = if swap_a { 0 } else { 1 };
        let entries: Vec<EnsembleEntry> = ens
            .entries()
            .iter()
            .map(|x| {
                let mut regs = x.registers.clone();
                regs[r] = 1 - regs[r];
                EnsembleEntry { p: x.p, state: x.state.clone(), registers: regs }
            })
            .collect();
        let relabeled = build_ensemble(&e.theory, entries, Some(vec![2, 2])).unwrap();
        let a = evaluate_icp(&ens, &asg).unwrap();
        let b = evaluate_icp(&relabeled, &asg).unwrap();
        prop_assert!((a.extractable - b.extractable).abs() < 1e-12);
        prop_assert!((a.redundancy - b.redundancy).abs() < 1e-12);
    }

    #[test]
    fn certificates_reload_to_the_same_report(seed in any::<u64>(), pick in 0usize..3) {
        let id = ["classical-bit", "qubit", "sbit"][pick];
        let e = catalog::lookup(id).unwrap();
        let ens = random_ensemble(&mut trial_rng(seed, 8), &e.theory, &[2, 2]).unwrap();
        let asg = ObservableAssignment::from_names(&e.theory, &["X", "Z"]).unwrap();
        let report = evaluate_icp(&ens, &asg).unwrap();
        let doc = EnsembleDoc::from_ensemble(&ens, Some(&asg));
        let text = serde_json::to_string(&doc).unwrap();
        let loaded = load_ensemble(&text).unwrap();
        let again = evaluate_icp(&loaded.ensemble, &loaded.assignment.unwrap()).unwrap();
        prop_assert_eq!(again, report);
    }

    #[test]
    fn pgnst_membership_grows_with_p(seed in any::<u64>(), p in 2.0f64..6.0, dp in 0.0f64..4.0) {
        let small = catalog::pgnst(NormExponent::new(p).unwrap(), 2).unwrap();
        let big = catalog::pgnst(NormExponent::new(p + dp).unwrap(), 2).unwrap();
        let s = random_state(&mut trial_rng(seed, 9), &small.theory).unwrap();
        prop_assert!(big.theory.state(s.coords().to_vec()).is_ok());
    }

    #[test]
    fn pgnst_two_matches_qubit_great_circle(t in 0.0f64..(2.0 * PI), r in 0.0f64..=1.0) {
        let g = catalog::pgnst(NormExponent::new(2.0).unwrap(), 2).unwrap().theory;
        let q = catalog::qubit().theory;
        let (sx, sz) = (r * t.cos(), r * t.sin());
        let gs = g.state(vec![sx, sz, 1.0]).unwrap();
        let qs = q.bloch_state([sx, 0.0, sz]).unwrap();
        for name in ["X", "Z"] {
            let a = measure(&g, &g.measurement(name).unwrap(), &gs).unwrap();
            let b = measure(&q, &q.measurement(name).unwrap(), &qs).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polygon_reports_are_rotation_invariant(seed in any::<u64>(), n in 3usize..10, i in 0usize..10, j in 0usize..10) {
        let e = catalog::polygon(n).unwrap();
        let theory = &e.theory;
        let verts = theory.extreme_states();
        let w = random_simplex(&mut trial_rng(seed, 10), n * 4);
        let (i, j) = (i % n, j % n);
        let build = |shift: usize| {
            let entries = (0..4)
                .map(|c| {
                    let mut coords = vec![0.0; 3];
                    for (v, vert) in verts.iter().enumerate() {
                        let wt = w[c * n + (v + n - shift) % n];
                        for (k, x) in vert.coords().iter().enumerate() {
                            coords[k] += wt * x;
                        }
                    }
                    let total: f64 = (0..n).map(|v| w[c * n + v]).sum();
                    coords.iter_mut().for_each(|x| *x /= total);
                    EnsembleEntry { p: 0.25, state: theory.state(coords).unwrap(), registers: vec![c / 2, c % 2] }
                })
                .collect();
            build_ensemble(theory, entries, Some(vec![2, 2])).unwrap()
        };
        let name = |k: usize| format!("E{}", k % n + 1);
        let a = ObservableAssignment::from_names(theory, &[&name(i), &name(j)]).unwrap();
        let b = ObservableAssignment::from_names(theory, &[&name(i + 1), &name(j + 1)]).unwrap();
        let ra = evaluate_icp(&build(0), &a).unwrap();
        let rb = evaluate_icp(&build(1), &b).unwrap();
        prop_assert!((ra.extractable - rb.extractable).abs() < 1e-9);
    }

    #[test]
    fn classical_and_quantum_proof_chains_hold(seed in any::<u64>(), pick in 0usize..3) {
        let id = ["classical-bit", "classical-trit", "qubit"][pick];
        let e = catalog::lookup(id).unwrap();
        let ens = random_ensemble(&mut trial_rng(seed, 11), &e.theory, &[2, 3]).unwrap();
        let asg = ObservableAssignment::from_names(&e.theory, &["X", "Z"]).unwrap();
        let led = proof_chain_check(&ens, &asg).unwrap();
        prop_assert!(led.all_hold, "{:?}", led.first_failure);
    }

    #[test]
    fn binary_entropy_is_symmetric(x in 0.0f64..=1.0) {
        prop_assert!((binary_entropy(x).unwrap() - binary_entropy(1.0 - x).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn optimizer_report_matches_reevaluation(seed in 0u64..1000, pick in 0usize..3) {
        let id = ["classical-bit", "qubit", "sbit"][pick];
        let theory: Arc<_> = catalog::lookup(id).unwrap().theory;
        let asg = ObservableAssignment::from_names(&theory, &["X", "Z"]).unwrap();
        let cfg = OptimizerConfig {
            strategy: Strategy::CoordinateDescent,
            max_evals: 20_000,
            restarts: 2,
            seed,
            ..OptimizerConfig::default()
        };
        let res = maximize_extractable(&theory, &asg, &cfg).unwrap();
        prop_assert_eq!(evaluate_icp(&res.ensemble, &asg).unwrap(), res.report.clone());
        prop_assert!(res.report.margin >= -1e-9 || id == "sbit");
    }

    #[test]
    fn pgnst_extractable_grows_with_p(p in 2.0f64..8.0, dp in 0.1f64..4.0) {
        let cfg = PgnstSearchConfig { points: 4000, ..PgnstSearchConfig::default() };
        let a = pgnst_violation(NormExponent::new(p).unwrap(), &cfg).unwrap();
        let b = pgnst_violation(NormExponent::new(p + dp).unwrap(), &cfg).unwrap();
        prop_assert!(b.report.extractable + 1e-9 >= a.report.extractable);
    }
}

#[test]
fn observed_dimension_is_three_only_for_the_triangle() {
    for n in 3..=20 {
        let d = catalog::polygon(n).unwrap().theory.observed_dimension().unwrap().d;
        assert_eq!(d == 3, n == 3, "n = {n}: d = {d}");
    }
}

#[test]
fn polygon_parity_subsequences_are_monotone() {
    let ext: Vec<(usize, f64)> = (4..=20)
        .map(|n| (n, polygon_violation(n).unwrap().report.extractable))
        .collect();
    for parity in [0, 1] {
        let seq: Vec<f64> = ext.iter().filter(|(n, _)| n % 2 == parity).map(|(_, e)| *e).collect();
        assert!(seq.windows(2).all(|w| w[1] <= w[0] + 1e-12), "parity {parity}: {seq:?}");
    }
}
