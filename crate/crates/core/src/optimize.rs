//! Search over encodings for the largest extractable information.
//!
//! An encoding assigns a weight and a state to every cell of the product of
//! the assigned measurements' outcome alphabets. All parameters live in the
//! unit box `[0, 1]^D`; moves are clamped to it so boundary values such as a
//! weight of exactly 0 are reachable.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::ensemble::{
    build_ensemble, evaluate_icp, evaluate_raw, register_name, CorrelatedEnsemble, EnsembleEntry, ICPReport,
    ObservableAssignment, RawEvaluation,
};
use crate::error::{IcpError, Result};
use crate::gpt::{dot, NormExponent, Theory, TheoryVariant};
use crate::info;

/// Weight of the tie-breaking term in [`Objective::ExtractablePreferGain`]
/// and [`Objective::TotalGain`].
const TIE_BREAK: f64 = 1e-6;
/// Weight of the `max gain − min gain` penalty under the equal-gain constraint.
const EQUAL_GAIN_PENALTY: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Cyclic exhaustive line scans over a lattice of spacing `resolution`.
    Grid,
    /// Compass search with step halving down to `resolution`.
    CoordinateDescent,
    /// Uniform random sampling of the parameter box.
    RandomRestart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `Σ gains − redundancy`.
    Extractable,
    /// `Σ gains − redundancy`, ties broken towards larger `Σ gains`.
    ExtractablePreferGain,
    /// `Σ gains`, ties broken towards lower redundancy.
    TotalGain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegisterMode {
    /// Register distribution is optimized along with the states.
    Free,
    /// Registers are independent and uniform.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub strategy: Strategy,
    pub resolution: f64,
    /// Total objective evaluations, split evenly across restarts.
    pub max_evals: usize,
    pub equal_gain_constraint: bool,
    pub seed: u64,
    pub restarts: usize,
    pub objective: Objective,
    pub register_mode: RegisterMode,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::CoordinateDescent,
            resolution: 1e-4,
            max_evals: 4_000_000,
            equal_gain_constraint: false,
            seed: 42,
            restarts: 20,
            objective: Objective::Extractable,
            register_mode: RegisterMode::Free,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution < 1.0) {
            return Err(IcpError::InvalidArgument(format!(
                "resolution must lie in (0, 1), got {}",
                self.resolution
            )));
        }
        if self.max_evals == 0 {
            return Err(IcpError::InvalidArgument("max_evals must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(IcpError::InvalidArgument("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Best encoding found by [`maximize_extractable`].
#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub ensemble: CorrelatedEnsemble,
    pub report: ICPReport,
    /// Objective value including any penalty.
    pub objective: f64,
    pub evaluations: usize,
    /// True when some restart stopped on the evaluation budget.
    pub budget_exhausted: bool,
    /// Restart that produced the result.
    pub restart: usize,
}

enum StateMap {
    /// Convex weights over extreme states.
    Vertices(Vec<Vec<f64>>),
    /// Direction angles and radius in a norm ball.
    Norm { p: NormExponent, k: usize },
    /// Bloch angles and radius.
    Qubit,
    /// Pure state amplitudes.
    Pure(usize),
}

impl StateMap {
    fn new(theory: &Theory) -> Self {
        match theory.variant() {
            TheoryVariant::Polytope { .. } | TheoryVariant::RestrictedClassical { .. } => {
                StateMap::Vertices(theory.extreme_states().iter().map(|s| s.coords().to_vec()).collect())
            }
            TheoryVariant::NormConstraint { p, k } => StateMap::Norm { p: *p, k: *k },
            TheoryVariant::Quantum { hilbert_dim: 2 } => StateMap::Qubit,
            TheoryVariant::Quantum { hilbert_dim } => StateMap::Pure(*hilbert_dim),
        }
    }

    fn params(&self) -> usize {
        match self {
            StateMap::Vertices(v) => v.len(),
            StateMap::Norm { k, .. } => *k,
            StateMap::Qubit => 3,
            StateMap::Pure(d) => 2 * d,
        }
    }

    fn decode(&self, x: &[f64]) -> Vec<f64> {
        match self {
            StateMap::Vertices(verts) => {
                let total: f64 = x.iter().sum();
                let n = verts.len();
                let mut out = vec![0.0; verts[0].len()];
                for (w, v) in x.iter().zip(verts) {
                    let lam = if total > 0.0 { w / total } else { 1.0 / n as f64 };
                    if lam == 0.0 {
                        continue;
                    }
                    for (o, c) in out.iter_mut().zip(v) {
                        *o += lam * c;
                    }
                }
                out
            }
            StateMap::Norm { p, k } => {
                let dir = direction(*k, x);
                let n = p.norm(&dir);
                let r = x[*k - 1];
                let mut out: Vec<f64> = dir.iter().map(|c| r * c / n).collect();
                out.push(1.0);
                out
            }
            StateMap::Qubit => {
                let b = direction(3, x);
                let r = x[2];
                let (bx, by, bz) = (r * b[0], r * b[1], r * b[2]);
                vec![
                    (1.0 + bz) / 2.0,
                    (1.0 - bz) / 2.0,
                    bx * FRAC_1_SQRT_2,
                    -by * FRAC_1_SQRT_2,
                ]
            }
            StateMap::Pure(d) => {
                let mut psi: Vec<num_complex::Complex64> = (0..*d)
                    .map(|i| num_complex::Complex64::new(2.0 * x[2 * i] - 1.0, 2.0 * x[2 * i + 1] - 1.0))
                    .collect();
                let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n > 0.0 {
                    psi.iter_mut().for_each(|z| *z /= n);
                } else {
                    psi[0] = 1.0.into();
                }
                let m = nalgebra::DMatrix::from_fn(*d, *d, |i, j| psi[i] * psi[j].conj());
                info::hermitian_coords(&m)
            }
        }
    }
}

/// Unit direction from box parameters: an angle `2πx₀` for k = 2, spherical
/// angles `(2πx₀, πx₁)` for k = 3. The last parameter (the radius) is ignored.
fn direction(k: usize, x: &[f64]) -> Vec<f64> {
    let phi = 2.0 * PI * x[0];
    if k == 2 {
        vec![phi.cos(), phi.sin()]
    } else {
        let theta = PI * x[1];
        vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }
}

/// Maps box parameters to an encoding and scores it.
struct Encoder {
    map: StateMap,
    effects: Vec<Vec<Vec<f64>>>,
    alphabets: Vec<usize>,
    cells: Vec<Vec<usize>>,
    free_weights: bool,
    objective: Objective,
    equal_gain: bool,
}

impl Encoder {
    fn new(theory: &Theory, assignment: &ObservableAssignment, config: &OptimizerConfig) -> Result<Self> {
        let effects: Vec<Vec<Vec<f64>>> = assignment
            .pairs()
            .iter()
            .map(|(m, _)| m.effects().iter().map(|e| e.coords().to_vec()).collect())
            .collect();
        let alphabets: Vec<usize> = effects.iter().map(|e| e.len()).collect();
        let total: usize = alphabets.iter().product();
        if total > 4096 {
            return Err(IcpError::InvalidArgument(format!(
                "{total} register cells is too many to optimize"
            )));
        }
        let mut cells = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut c = vec![0; alphabets.len()];
            for (slot, &a) in c.iter_mut().zip(&alphabets).rev() {
                *slot = idx % a;
                idx /= a;
            }
            cells.push(c);
        }
        Ok(Self {
            map: StateMap::new(theory),
            effects,
            alphabets,
            cells,
            free_weights: config.register_mode == RegisterMode::Free,
            objective: config.objective,
            equal_gain: config.equal_gain_constraint,
        })
    }

    fn dims(&self) -> usize {
        self.cells.len() * (self.map.params() + usize::from(self.free_weights))
    }

    fn decode(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let q = self.map.params();
        let c = self.cells.len();
        let (weights, rest) = if self.free_weights {
            let w = &x[..c];
            let s: f64 = w.iter().sum();
            let weights = if s > 0.0 {
                w.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / c as f64; c]
            };
            (weights, &x[c..])
        } else {
            (vec![1.0 / c as f64; c], x)
        };
        let states = rest.chunks(q).map(|chunk| self.map.decode(chunk)).collect();
        (weights, states)
    }

    fn raw(&self, weights: &[f64], states: &[Vec<f64>]) -> RawEvaluation {
        let outcomes: Vec<Vec<Vec<f64>>> = self
            .effects
            .iter()
            .map(|m| {
                states
                    .iter()
                    .map(|s| m.iter().map(|e| dot(e, s).clamp(0.0, 1.0)).collect())
                    .collect()
            })
            .collect();
        evaluate_raw(weights, &self.cells, &self.alphabets, &outcomes)
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.score_with(x, Penalty::Linear(EQUAL_GAIN_PENALTY))
    }

    fn score_with(&self, x: &[f64], penalty: Penalty) -> f64 {
        let (w, s) = self.decode(x);
        let raw = self.raw(&w, &s);
        let total: f64 = raw.gains.iter().sum();
        let mut f = match self.objective {
            Objective::Extractable => total - raw.redundancy,
            Objective::ExtractablePreferGain => total - raw.redundancy + TIE_BREAK * total,
            Objective::TotalGain => total - TIE_BREAK * raw.redundancy,
        };
        if self.equal_gain && raw.gains.len() > 1 {
            let hi = raw.gains.iter().copied().fold(f64::MIN, f64::max);
            let lo = raw.gains.iter().copied().fold(f64::MAX, f64::min);
            f -= match penalty {
                Penalty::Linear(w) => w * (hi - lo),
                Penalty::Quadratic(w) => w * (hi - lo) * (hi - lo),
            };
        }
        f
    }
}

/// Form of the equal-gain penalty on the spread `max gain − min gain`.
#[derive(Clone, Copy)]
enum Penalty {
    Linear(f64),
    Quadratic(f64),
}

/// Smooth penalties first, then the linear one, each stage restarting the
/// compass from where the previous one stopped.
const EQUAL_GAIN_STAGES: [(Penalty, f64); 3] = [
    (Penalty::Quadratic(10.0), 0.5),
    (Penalty::Quadratic(1000.0), 0.05),
    (Penalty::Linear(EQUAL_GAIN_PENALTY), 0.01),
];

struct SearchOutcome {
    x: Vec<f64>,
    value: f64,
    evaluations: usize,
    exhausted: bool,
}

fn compass(
    f: &dyn Fn(&[f64]) -> f64,
    mut x: Vec<f64>,
    resolution: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
    initial_step: f64,
) -> SearchOutcome {
    let n = x.len();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut h = initial_step;
    let mut exhausted = false;
    let mut y = x.clone();
    'outer: while h >= resolution {
        let mut improved = false;
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let v = (x[i] + sign * h).clamp(0.0, 1.0);
                if v == x[i] {
                    continue;
                }
                if evals >= budget {
                    exhausted = true;
                    break 'outer;
                }
                let old = x[i];
                x[i] = v;
                let fy = f(&x);
                evals += 1;
                if fy > fx + 1e-14 {
                    fx = fy;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        // Random directions get past ridges that no single coordinate can follow.
        if !improved {
            for _ in 0..2 * n {
                if evals >= budget {
                    exhausted = true;
                    break 'outer;
                }
                let d: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                for ((yi, xi), di) in y.iter_mut().zip(&x).zip(&d) {
                    *yi = (xi + h * di / norm).clamp(0.0, 1.0);
                }
                let fy = f(&y);
                evals += 1;
                if fy > fx + 1e-14 {
                    fx = fy;
                    x.copy_from_slice(&y);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    SearchOutcome {
        x,
        value: fx,
        evaluations: evals,
        exhausted,
    }
}

fn grid(f: &dyn Fn(&[f64]) -> f64, mut x: Vec<f64>, resolution: f64, budget: usize) -> SearchOutcome {
    let steps = (1.0 / resolution).round() as usize;
    let lattice = |j: usize| (j as f64 / steps as f64).min(1.0);
    for v in x.iter_mut() {
        *v = lattice((*v * steps as f64).round() as usize);
    }
    let mut fx = f(&x);
    let mut evals = 1;
    let mut exhausted = false;
    'outer: loop {
        let mut improved = false;
        for i in 0..x.len() {
            let mut best = (x[i], fx);
            for j in 0..=steps {
                if evals >= budget {
                    exhausted = true;
                    x[i] = best.0;
                    fx = best.1;
                    break 'outer;
                }
                x[i] = lattice(j);
                let fy = f(&x);
                evals += 1;
                if fy > best.1 + 1e-14 {
                    best = (x[i], fy);
                    improved = true;
                }
            }
            x[i] = best.0;
            fx = best.1;
        }
        if !improved {
            break;
        }
    }
    SearchOutcome {
        x,
        value: fx,
        evaluations: evals,
        exhausted,
    }
}

fn random_search(f: &dyn Fn(&[f64]) -> f64, x0: Vec<f64>, rng: &mut ChaCha8Rng, budget: usize) -> SearchOutcome {
    let mut best = (f(&x0), x0);
    for _ in 1..budget {
        let y: Vec<f64> = (0..best.1.len()).map(|_| rng.random::<f64>()).collect();
        let fy = f(&y);
        if fy > best.0 {
            best = (fy, y);
        }
    }
    SearchOutcome {
        x: best.1,
        value: best.0,
        evaluations: budget.max(1),
        exhausted: true,
    }
}

/// Searches encodings of `assignment` for the best objective value.
///
/// Restart 0 starts at the center of the box, the others at seeded random
/// points. Restarts run in parallel and the best value wins, ties going to
/// the lowest restart index.
pub fn maximize_extractable(
    theory: &Arc<Theory>,
    assignment: &ObservableAssignment,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    if let Some((m, _)) = assignment.pairs().iter().find(|(m, _)| m.theory_id() != theory.id()) {
        return Err(IcpError::UnknownMeasurement {
            theory: theory.id().to_string(),
            name: m.label().to_string(),
        });
    }
    let enc = Encoder::new(theory, assignment, config)?;
    let dims = enc.dims();
    let budget = (config.max_evals / config.restarts).max(1);
    let f = |x: &[f64]| enc.score(x);
    let runs: Vec<SearchOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            let x0 = if r == 0 {
                vec![0.5; dims]
            } else {
                (0..dims).map(|_| rng.random::<f64>()).collect()
            };
            match config.strategy {
                Strategy::CoordinateDescent if config.equal_gain_constraint => {
                    let mut x = x0;
                    let mut evaluations = 0;
                    let mut out = None;
                    for (penalty, step) in EQUAL_GAIN_STAGES {
                        let g = |y: &[f64]| enc.score_with(y, penalty);
                        let left = budget.saturating_sub(evaluations).max(1);
                        let o = compass(&g, x, config.resolution, left, &mut rng, step);
                        evaluations += o.evaluations;
                        x = o.x.clone();
                        out = Some(o);
                    }
                    let o = out.expect("at least one stage");
                    SearchOutcome { evaluations, ..o }
                }
                Strategy::CoordinateDescent => compass(&f, x0, config.resolution, budget, &mut rng, 0.5),
                Strategy::Grid => grid(&f, x0, config.resolution, budget),
                Strategy::RandomRestart => random_search(&f, x0, &mut rng, budget),
            }
        })
        .collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value > runs[best].value {
            best = i;
        }
    }
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let budget_exhausted = runs.iter().any(|r| r.exhausted);
    let (weights, states) = enc.decode(&runs[best].x);
    let mut entries = Vec::new();
    for ((w, s), cell) in weights.iter().zip(states).zip(&enc.cells) {
        if *w > 0.0 {
            entries.push(EnsembleEntry {
                p: *w,
                state: theory.state(s)?,
                registers: cell.clone(),
            });
        }
    }
    let ensemble = build_ensemble(theory, entries, Some(enc.alphabets.clone()))?;
    let report = evaluate_icp(&ensemble, assignment)?;
    Ok(OptimizationResult {
        ensemble,
        report,
        objective: runs[best].value,
        evaluations,
        budget_exhausted,
        restart: best,
    })
}

/// One point of the qubit observable-rotation sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    /// Angle between `X` and the second observable.
    pub theta: f64,
    pub gains: Vec<f64>,
    pub total_gain: f64,
    pub redundancy: f64,
    pub extractable: f64,
}

/// For each `θ` pairs `X` with `Z(π/2 − θ)` (the observable at angle `θ` from
/// `X` in the X–Z plane) and records the equal-gain encoding of largest
/// extractable information, preferring larger total gain among ties.
pub fn qubit_rotation_sweep(theta_grid: &[f64], config: &OptimizerConfig) -> Result<Vec<SweepRecord>> {
    if let Some(t) = theta_grid.iter().find(|t| !(0.0..=PI / 2.0).contains(*t)) {
        return Err(IcpError::InvalidArgument(format!("θ = {t} outside [0, π/2]")));
    }
    let theory = catalog::qubit().theory;
    let cfg = OptimizerConfig {
        objective: Objective::ExtractablePreferGain,
        equal_gain_constraint: true,
        ..config.clone()
    };
    theta_grid
        .iter()
        .map(|&theta| {
            let x = theory.measurement("X")?;
            let z = theory.qubit_rotated_z(PI / 2.0 - theta)?;
            let asg = ObservableAssignment::new(vec![(x, register_name(0)), (z, register_name(1))])?;
            let best = maximize_extractable(&theory, &asg, &cfg)?;
            let r = best.report;
            Ok(SweepRecord {
                theta,
                total_gain: r.total_gain(),
                gains: r.gains,
                redundancy: r.redundancy,
                extractable: r.extractable,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn qubit_state_map_matches_bloch_matrix() {
        let m = StateMap::Qubit;
        let x = [0.3, 0.7, 0.9];
        let b = direction(3, &x);
        let r = [0.9 * b[0], 0.9 * b[1], 0.9 * b[2]];
        let want = info::hermitian_coords(&info::bloch_matrix(r));
        for (a, w) in m.decode(&x).iter().zip(want) {
            assert_abs_diff_eq!(*a, w, epsilon = 1e-15);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = OptimizerConfig::default();
        assert!(c.validate().is_ok());
        c.resolution = 0.0;
        assert!(c.validate().is_err());
        c.resolution = 1e-3;
        c.max_evals = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sbit_reaches_two() {
        let t = catalog::sbit().theory;
        let asg = ObservableAssignment::from_names(&t, &["X", "Z"]).unwrap();
        let r = maximize_extractable(&t, &asg, &OptimizerConfig::default()).unwrap();
        assert_abs_diff_eq!(r.report.extractable, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn grid_strategy_on_sbit() {
        let t = catalog::sbit().theory;
        let asg = ObservableAssignment::from_names(&t, &["X", "Z"]).unwrap();
        let cfg = OptimizerConfig {
            strategy: Strategy::Grid,
            resolution: 0.25,
            restarts: 2,
            ..OptimizerConfig::default()
        };
        let r = maximize_extractable(&t, &asg, &cfg).unwrap();
        assert_abs_diff_eq!(r.report.extractable, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let t = catalog::qubit().theory;
        let asg = ObservableAssignment::from_names(&t, &["X", "Z"]).unwrap();
        let cfg = OptimizerConfig {
            restarts: 4,
            resolution: 1e-3,
            ..OptimizerConfig::default()
        };
        let a = maximize_extractable(&t, &asg, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| maximize_extractable(&t, &asg, &cfg).unwrap());
        assert_eq!(a.report, b.report);
        assert_eq!(a.restart, b.restart);
    }
}
