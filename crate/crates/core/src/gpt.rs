//! States, effects and measurements of generalized probabilistic theories.
//!
//! Every theory is embedded in a real ambient space so that outcome
//! probabilities are plain Euclidean inner products `e · ω`:
//!
//! * polytopes carry their vertex coordinates directly (polygons live in
//!   `R^3` with the normalization in the last slot);
//! * norm-constraint theories use homogeneous coordinates `(s_1, .., s_k, 1)`
//!   where `s_i` are the mean values of the fiducial observables;
//! * restricted classical theories use the probability vector over the
//!   internal simplex;
//! * quantum theories use the orthonormal Hermitian coordinates produced by
//!   [`crate::info::hermitian_coords`], so `Tr(E ρ)` is again a dot product.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IcpError, Result};
use crate::info::{self, DensityOperator, Distribution};

/// Tolerance for state membership and effect ranges.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Tolerance for probability normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

const MAX_POLYTOPE_VERTICES: usize = 128;
const DIMENSION_SEARCH_BUDGET: usize = 20_000_000;

/// A finite coordinate vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(IcpError::NonFinite(i));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &RealVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(IcpError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(dot(&self.0, &other.0))
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = IcpError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A point of a theory's state space.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    vector: RealVector,
    theory_id: Arc<str>,
}

impl State {
    pub fn vector(&self) -> &RealVector {
        &self.vector
    }

    pub fn coords(&self) -> &[f64] {
        self.vector.coords()
    }

    pub fn theory_id(&self) -> &str {
        &self.theory_id
    }
}

/// A linear functional mapping states to outcome probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Effect {
    vector: RealVector,
    theory_id: Arc<str>,
}

impl Effect {
    pub fn vector(&self) -> &RealVector {
        &self.vector
    }

    pub fn coords(&self) -> &[f64] {
        self.vector.coords()
    }

    pub fn theory_id(&self) -> &str {
        &self.theory_id
    }

    fn complement(&self, unit: &Effect) -> Effect {
        let coords = unit
            .coords()
            .iter()
            .zip(self.coords())
            .map(|(u, e)| u - e)
            .collect();
        Effect {
            vector: RealVector(coords),
            theory_id: self.theory_id.clone(),
        }
    }
}

/// An ordered set of effects summing to the unit effect.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    label: String,
    effects: Vec<Effect>,
}

impl Measurement {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn theory_id(&self) -> &str {
        self.effects[0].theory_id()
    }
}

/// Exponent of the norm constraint `Σ |s_i|^p ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormExponent {
    Finite(f64),
    Infinite,
}

impl NormExponent {
    /// Accepts `p ≥ 2`; `f64::INFINITY` maps to [`NormExponent::Infinite`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 2.0 {
            return Err(IcpError::InvalidArgument(format!(
                "norm exponent must satisfy p >= 2, got {p}"
            )));
        }
        if p.is_infinite() {
            Ok(Self::Infinite)
        } else {
            Ok(Self::Finite(p))
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Self::Finite(p) => *p,
            Self::Infinite => f64::INFINITY,
        }
    }

    /// `‖s‖_p`, with the max-norm for `p = ∞`.
    pub fn norm(&self, s: &[f64]) -> f64 {
        match self {
            Self::Finite(p) => s.iter().map(|x| x.abs().powf(*p)).sum::<f64>().powf(1.0 / p),
            Self::Infinite => s.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// Largest `t ≥ 0` with `|t|^p + |other|^p ≤ 1`, i.e. the saturating partner coordinate.
    pub fn partner(&self, other: f64) -> f64 {
        let o = other.abs().min(1.0);
        match self {
            Self::Finite(p) => (1.0 - o.powf(*p)).max(0.0).powf(1.0 / p),
            Self::Infinite => 1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t, "inf" | "infinity" | "∞") {
            return Ok(Self::Infinite);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| IcpError::InvalidArgument(format!("bad norm exponent `{s}`")))?;
        Self::new(p)
    }
}

impl fmt::Display for NormExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(p) => write!(f, "{p}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for NormExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(p) => s.serialize_f64(*p),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => NormExponent::new(p),
            Raw::Text(t) => NormExponent::parse(&t),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// The four shapes of state space the library knows about.
#[derive(Clone, Debug, PartialEq)]
pub enum TheoryVariant {
    Polytope {
        vertices: Vec<State>,
        extreme_effects: Vec<Effect>,
        unit: Effect,
    },
    NormConstraint {
        p: NormExponent,
        k: usize,
    },
    RestrictedClassical {
        internal_states: usize,
        allowed_measurements: Vec<Measurement>,
    },
    Quantum {
        hilbert_dim: usize,
    },
}

/// A state space together with its catalog of named measurements.
#[derive(Clone, Debug)]
pub struct Theory {
    id: Arc<str>,
    variant: TheoryVariant,
    ambient_dim: usize,
    unit: Effect,
    measurements: Vec<Measurement>,
    dimension: OnceLock<DimensionResult>,
}

impl PartialEq for Theory {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.variant == other.variant && self.measurements == other.measurements
    }
}

/// Named list of effect vectors, used to declare measurements.
pub type MeasurementSpec = (String, Vec<Vec<f64>>);

impl Theory {
    /// Polytope theory from vertex and effect coordinates.
    ///
    /// Vertices must be pairwise distinct, and every extreme effect and every
    /// declared measurement effect must evaluate within `[0, 1]` on all
    /// vertices.
    pub fn polytope(
        id: &str,
        vertices: Vec<Vec<f64>>,
        extreme_effects: Vec<Vec<f64>>,
        unit: Vec<f64>,
        measurements: Vec<MeasurementSpec>,
    ) -> Result<Self> {
        let id: Arc<str> = Arc::from(id);
        let dim = unit.len();
        if vertices.len() < 2 {
            return Err(IcpError::InvalidTheory("polytope needs at least two vertices".into()));
        }
        if vertices.len() > MAX_POLYTOPE_VERTICES {
            return Err(IcpError::InvalidTheory(format!(
                "polytope has {} vertices, at most {MAX_POLYTOPE_VERTICES} are supported",
                vertices.len()
            )));
        }
        let unit = make_effect(&id, unit, dim)?;
        let vertices = vertices
            .into_iter()
            .map(|v| make_state(&id, v, dim))
            .collect::<Result<Vec<_>>>()?;
        for (i, a) in vertices.iter().enumerate() {
            for b in &vertices[..i] {
                if max_abs_diff(a.coords(), b.coords()) <= MEMBERSHIP_TOL {
                    return Err(IcpError::InvalidTheory(format!(
                        "duplicate vertex at position {}",
                        i + 1
                    )));
                }
            }
            let norm = dot(unit.coords(), a.coords());
            if (norm - 1.0).abs() > MEMBERSHIP_TOL {
                return Err(IcpError::InvalidTheory(format!(
                    "vertex {} is not normalized (u(ω) = {norm})",
                    i + 1
                )));
            }
        }
        let extreme_effects = extreme_effects
            .into_iter()
            .map(|e| make_effect(&id, e, dim))
            .collect::<Result<Vec<_>>>()?;
        for (k, e) in extreme_effects.iter().enumerate() {
            check_effect_on(&vertices, e, &format!("extreme effect {}", k + 1))?;
        }
        let mut theory = Self {
            id: id.clone(),
            variant: TheoryVariant::Polytope {
                vertices,
                extreme_effects,
                unit: unit.clone(),
            },
            ambient_dim: dim,
            unit,
            measurements: Vec::new(),
            dimension: OnceLock::new(),
        };
        theory.measurements = theory.build_measurements(measurements)?;
        if let TheoryVariant::Polytope { vertices, .. } = &theory.variant {
            for m in &theory.measurements {
                for e in m.effects() {
                    check_effect_on(vertices, e, m.label())?;
                }
            }
        }
        Ok(theory)
    }

    /// Norm-constraint theory with `k ∈ {2, 3}` fiducial observables named
    /// `X`, `Z` and (for `k = 3`) `Y`.
    pub fn norm_constraint(id: &str, p: NormExponent, k: usize) -> Result<Self> {
        if !(2..=3).contains(&k) {
            return Err(IcpError::InvalidTheory(format!(
                "norm-constraint theories support 2 or 3 observables, got {k}"
            )));
        }
        let id: Arc<str> = Arc::from(id);
        let dim = k + 1;
        let mut unit = vec![0.0; dim];
        unit[k] = 1.0;
        let unit = make_effect(&id, unit, dim)?;
        let names = ["X", "Z", "Y"];
        let specs = (0..k)
            .map(|i| {
                let mut plus = vec![0.0; dim];
                plus[i] = 0.5;
                plus[k] = 0.5;
                let mut minus = vec![0.0; dim];
                minus[i] = -0.5;
                minus[k] = 0.5;
                (names[i].to_string(), vec![plus, minus])
            })
            .collect();
        let mut theory = Self {
            id,
            variant: TheoryVariant::NormConstraint { p, k },
            ambient_dim: dim,
            unit,
            measurements: Vec::new(),
            dimension: OnceLock::new(),
        };
        theory.measurements = theory.build_measurements(specs)?;
        Ok(theory)
    }

    /// Classical simplex over `internal_states` deterministic states where only
    /// the listed coarse-grained measurements are available.
    pub fn restricted_classical(
        id: &str,
        internal_states: usize,
        measurements: Vec<MeasurementSpec>,
    ) -> Result<Self> {
        if internal_states < 2 {
            return Err(IcpError::InvalidTheory("need at least two internal states".into()));
        }
        let id: Arc<str> = Arc::from(id);
        let unit = make_effect(&id, vec![1.0; internal_states], internal_states)?;
        let mut theory = Self {
            id,
            variant: TheoryVariant::RestrictedClassical {
                internal_states,
                allowed_measurements: Vec::new(),
            },
            ambient_dim: internal_states,
            unit,
            measurements: Vec::new(),
            dimension: OnceLock::new(),
        };
        let built = theory.build_measurements(measurements)?;
        for m in &built {
            for e in m.effects() {
                if e.coords().iter().any(|&x| x != 0.0 && x != 1.0) {
                    return Err(IcpError::InvalidMeasurement {
                        label: m.label().to_string(),
                        reason: "restricted classical effects must be 0/1 coarse-grainings".into(),
                    });
                }
            }
        }
        theory.variant = TheoryVariant::RestrictedClassical {
            internal_states,
            allowed_measurements: built.clone(),
        };
        theory.measurements = built;
        Ok(theory)
    }

    /// Quantum theory on `C^d`, `2 ≤ d ≤ 8`, with projective measurements.
    ///
    /// The catalog holds the computational-basis measurement `Z`; qubits also
    /// get `X` and `Y`.
    pub fn quantum(id: &str, hilbert_dim: usize) -> Result<Self> {
        if !(2..=8).contains(&hilbert_dim) {
            return Err(IcpError::InvalidTheory(format!(
                "quantum theories support Hilbert dimension 2..=8, got {hilbert_dim}"
            )));
        }
        let id: Arc<str> = Arc::from(id);
        let d = hilbert_dim;
        let identity = DMatrix::<Complex64>::identity(d, d);
        let unit = make_effect(&id, info::hermitian_coords(&identity), d * d)?;
        let mut theory = Self {
            id,
            variant: TheoryVariant::Quantum { hilbert_dim },
            ambient_dim: d * d,
            unit,
            measurements: Vec::new(),
            dimension: OnceLock::new(),
        };
        let basis: Vec<Vec<f64>> = (0..d)
            .map(|k| {
                let mut p = DMatrix::<Complex64>::zeros(d, d);
                p[(k, k)] = Complex64::new(1.0, 0.0);
                info::hermitian_coords(&p)
            })
            .collect();
        let mut specs = vec![("Z".to_string(), basis)];
        if d == 2 {
            specs.push(("X".to_string(), qubit_axis_effects([1.0, 0.0, 0.0])));
            specs.push(("Y".to_string(), qubit_axis_effects([0.0, 1.0, 0.0])));
        }
        theory.measurements = theory.build_measurements(specs)?;
        Ok(theory)
    }

    fn build_measurements(&self, specs: Vec<MeasurementSpec>) -> Result<Vec<Measurement>> {
        specs
            .into_iter()
            .map(|(label, vecs)| self.measurement_from_vectors(&label, vecs))
            .collect()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn variant(&self) -> &TheoryVariant {
        &self.variant
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn unit(&self) -> &Effect {
        &self.unit
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn measurement_names(&self) -> Vec<&str> {
        self.measurements.iter().map(|m| m.label()).collect()
    }

    /// Looks up a cataloged measurement by name.
    ///
    /// Qubits additionally accept `Z(φ)`: the projective measurement along
    /// the Bloch direction `(sin φ, 0, cos φ)`, so `Z(0)` is `Z` and
    /// `Z(π/2)` is `X`.
    pub fn measurement(&self, name: &str) -> Result<Measurement> {
        if let Some(m) = self.measurements.iter().find(|m| m.label() == name) {
            return Ok(m.clone());
        }
        if let TheoryVariant::Quantum { hilbert_dim: 2 } = self.variant {
            if let Some(angle) = name
                .strip_prefix("Z(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.trim().parse::<f64>().ok())
            {
                return self.qubit_rotated_z(angle);
            }
        }
        Err(IcpError::UnknownMeasurement {
            theory: self.id.to_string(),
            name: name.to_string(),
        })
    }

    /// `Z` rotated by `phi` towards `X` in the X–Z plane (qubit only).
    pub fn qubit_rotated_z(&self, phi: f64) -> Result<Measurement> {
        self.qubit_axis_measurement(&format!("Z({phi})"), [phi.sin(), 0.0, phi.cos()])
    }

    /// Projective qubit measurement along a Bloch direction; outcome 0 is the
    /// `+1` eigenprojector.
    pub fn qubit_axis_measurement(&self, label: &str, axis: [f64; 3]) -> Result<Measurement> {
        if !matches!(self.variant, TheoryVariant::Quantum { hilbert_dim: 2 }) {
            return Err(IcpError::NotApplicable(format!(
                "`{}` is not a qubit theory",
                self.id
            )));
        }
        let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(IcpError::InvalidArgument("axis must be a nonzero vector".into()));
        }
        let axis = [axis[0] / n, axis[1] / n, axis[2] / n];
        self.measurement_from_vectors(label, qubit_axis_effects(axis))
    }

    /// Builds a measurement, checking it has at least two outcomes and that
    /// the effects sum to the unit effect.
    pub fn measurement_from_vectors(&self, label: &str, vecs: Vec<Vec<f64>>) -> Result<Measurement> {
        if vecs.len() < 2 {
            return Err(IcpError::InvalidMeasurement {
                label: label.to_string(),
                reason: "a measurement needs at least two outcomes".into(),
            });
        }
        let effects = vecs
            .into_iter()
            .map(|v| make_effect(&self.id, v, self.ambient_dim))
            .collect::<Result<Vec<_>>>()?;
        let mut sum = vec![0.0; self.ambient_dim];
        for e in &effects {
            for (s, x) in sum.iter_mut().zip(e.coords()) {
                *s += x;
            }
        }
        let diff = max_abs_diff(&sum, self.unit.coords());
        if diff > NORMALIZATION_TOL {
            return Err(IcpError::InvalidMeasurement {
                label: label.to_string(),
                reason: format!("effects do not sum to the unit effect (max deviation {diff:e})"),
            });
        }
        Ok(Measurement {
            label: label.to_string(),
            effects,
        })
    }

    /// Builds an effect of this theory without range checks.
    pub fn effect(&self, coords: Vec<f64>) -> Result<Effect> {
        make_effect(&self.id, coords, self.ambient_dim)
    }

    /// Builds and validates a state.
    pub fn state(&self, coords: Vec<f64>) -> Result<State> {
        let state = make_state(&self.id, coords, self.ambient_dim)?;
        let check = validate_state(self, &state)?;
        if !check.accepted {
            return Err(IcpError::InvalidState {
                theory: self.id.to_string(),
                reason: check.diagnostic.unwrap_or_default(),
            });
        }
        Ok(state)
    }

    /// State with the given fiducial mean values.
    ///
    /// Norm-constraint theories take `(s_1, .., s_k)`. Polytopes whose first
    /// two cataloged measurements are two-outcome take `(s_X, s_Z)` and solve
    /// the affine map through the unit effect.
    pub fn state_from_means(&self, means: &[f64]) -> Result<State> {
        match &self.variant {
            TheoryVariant::NormConstraint { k, .. } => {
                if means.len() != *k {
                    return Err(IcpError::DimensionMismatch {
                        expected: *k,
                        got: means.len(),
                    });
                }
                let mut coords = means.to_vec();
                coords.push(1.0);
                self.state(coords)
            }
            TheoryVariant::Polytope { .. } => {
                let fid: Vec<&Measurement> = self
                    .measurements
                    .iter()
                    .filter(|m| m.outcomes() == 2)
                    .take(means.len())
                    .collect();
                if fid.len() != means.len() {
                    return Err(IcpError::NotApplicable(format!(
                        "`{}` has fewer than {} two-outcome measurements",
                        self.id,
                        means.len()
                    )));
                }
                let n = self.ambient_dim;
                let rows = fid.len() + 1;
                let mut a = DMatrix::<f64>::zeros(rows, n);
                let mut b = nalgebra::DVector::<f64>::zeros(rows);
                for (r, (m, s)) in fid.iter().zip(means).enumerate() {
                    for c in 0..n {
                        a[(r, c)] = m.effects()[0].coords()[c];
                    }
                    b[r] = (1.0 + s) / 2.0;
                }
                for c in 0..n {
                    a[(rows - 1, c)] = self.unit.coords()[c];
                }
                b[rows - 1] = 1.0;
                let svd = a.svd(true, true);
                let x = svd
                    .solve(&b, 1e-12)
                    .map_err(|e| IcpError::NotApplicable(e.to_string()))?;
                self.state(x.iter().copied().collect())
            }
            _ => Err(IcpError::NotApplicable(format!(
                "`{}` has no mean-value parametrization",
                self.id
            ))),
        }
    }

    /// Qubit state with Bloch vector `r`, `|r| ≤ 1`.
    pub fn bloch_state(&self, r: [f64; 3]) -> Result<State> {
        if !matches!(self.variant, TheoryVariant::Quantum { hilbert_dim: 2 }) {
            return Err(IcpError::NotApplicable(format!("`{}` is not a qubit theory", self.id)));
        }
        let m = info::bloch_matrix(r);
        self.state(info::hermitian_coords(&m))
    }

    /// Density operator of a quantum state.
    pub fn density_operator(&self, state: &State) -> Result<DensityOperator> {
        match self.variant {
            TheoryVariant::Quantum { hilbert_dim } => {
                DensityOperator::new(info::from_hermitian_coords(hilbert_dim, state.coords())?)
            }
            _ => Err(IcpError::NotApplicable(format!("`{}` is not quantum", self.id))),
        }
    }

    /// Polytope vertices (or the internal deterministic states of a restricted
    /// classical theory).
    pub fn extreme_states(&self) -> Vec<State> {
        match &self.variant {
            TheoryVariant::Polytope { vertices, .. } => vertices.clone(),
            TheoryVariant::RestrictedClassical { internal_states, .. } => (0..*internal_states)
                .map(|k| {
                    let mut v = vec![0.0; *internal_states];
                    v[k] = 1.0;
                    State {
                        vector: RealVector(v),
                        theory_id: self.id.clone(),
                    }
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Extreme effects together with their complements `u − e`, deduplicated.
    pub fn candidate_effects(&self) -> Vec<Effect> {
        let mut out: Vec<Effect> = Vec::new();
        if let TheoryVariant::Polytope {
            extreme_effects, unit, ..
        } = &self.variant
        {
            for e in extreme_effects {
                for cand in [e.clone(), e.complement(unit)] {
                    if !out
                        .iter()
                        .any(|o| max_abs_diff(o.coords(), cand.coords()) <= MEMBERSHIP_TOL)
                    {
                        out.push(cand);
                    }
                }
            }
        }
        out
    }

    /// True when the state space is a simplex, i.e. the theory is classical.
    pub fn is_simplex(&self) -> bool {
        match &self.variant {
            TheoryVariant::Polytope { vertices, .. } => affine_dimension(vertices) + 1 == vertices.len(),
            TheoryVariant::RestrictedClassical { .. } => true,
            _ => false,
        }
    }

    /// Barycentric weights of a state of a simplex theory over its extreme states.
    pub fn barycentric(&self, state: &State) -> Result<Vec<f64>> {
        if !self.is_simplex() {
            return Err(IcpError::NotApplicable(format!(
                "`{}` is not a simplex; its decompositions are not unique",
                self.id
            )));
        }
        let verts = self.extreme_states();
        let n = self.ambient_dim;
        let m = verts.len();
        let a = DMatrix::<f64>::from_fn(n, m, |r, c| verts[c].coords()[r]);
        let b = nalgebra::DVector::from_column_slice(state.coords());
        let w = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| IcpError::NotApplicable(e.to_string()))?;
        Ok(w.iter().map(|x| x.max(0.0)).collect())
    }

    /// Effect of a simplex theory taking the given values on its extreme states.
    pub fn effect_from_vertex_values(&self, values: &[f64]) -> Result<Effect> {
        if !self.is_simplex() {
            return Err(IcpError::NotApplicable(format!("`{}` is not a simplex", self.id)));
        }
        let verts = self.extreme_states();
        if values.len() != verts.len() {
            return Err(IcpError::DimensionMismatch {
                expected: verts.len(),
                got: values.len(),
            });
        }
        let n = self.ambient_dim;
        let a = DMatrix::<f64>::from_fn(verts.len(), n, |r, c| verts[r].coords()[c]);
        let b = nalgebra::DVector::from_column_slice(values);
        let e = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| IcpError::NotApplicable(e.to_string()))?;
        self.effect(e.iter().copied().collect())
    }

    /// Observed dimension, computed once and cached.
    pub fn observed_dimension(&self) -> Result<DimensionResult> {
        if let Some(d) = self.dimension.get() {
            return Ok(d.clone());
        }
        let d = compute_observed_dimension(self)?;
        Ok(self.dimension.get_or_init(|| d).clone())
    }
}

fn make_state(id: &Arc<str>, coords: Vec<f64>, dim: usize) -> Result<State> {
    if coords.len() != dim {
        return Err(IcpError::DimensionMismatch {
            expected: dim,
            got: coords.len(),
        });
    }
    Ok(State {
        vector: RealVector::new(coords)?,
        theory_id: id.clone(),
    })
}

fn make_effect(id: &Arc<str>, coords: Vec<f64>, dim: usize) -> Result<Effect> {
    if coords.len() != dim {
        return Err(IcpError::DimensionMismatch {
            expected: dim,
            got: coords.len(),
        });
    }
    Ok(Effect {
        vector: RealVector::new(coords)?,
        theory_id: id.clone(),
    })
}

fn check_effect_on(vertices: &[State], e: &Effect, what: &str) -> Result<()> {
    for (i, v) in vertices.iter().enumerate() {
        let x = dot(e.coords(), v.coords());
        if !(-MEMBERSHIP_TOL..=1.0 + MEMBERSHIP_TOL).contains(&x) {
            return Err(IcpError::InvalidTheory(format!(
                "{what} evaluates to {x} on vertex {}",
                i + 1
            )));
        }
    }
    Ok(())
}

fn qubit_axis_effects(n: [f64; 3]) -> Vec<Vec<f64>> {
    let plus = info::bloch_matrix(n);
    let minus = info::bloch_matrix([-n[0], -n[1], -n[2]]);
    vec![info::hermitian_coords(&plus), info::hermitian_coords(&minus)]
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn affine_dimension(vertices: &[State]) -> usize {
    if vertices.len() < 2 {
        return 0;
    }
    let base = vertices[0].coords();
    let n = base.len();
    let m = DMatrix::<f64>::from_fn(vertices.len() - 1, n, |r, c| {
        vertices[r + 1].coords()[c] - base[c]
    });
    m.rank(1e-9)
}

/// Outcome of a membership check.
#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub accepted: bool,
    /// Largest constraint violation found (0 when accepted with slack).
    pub violation: f64,
    pub diagnostic: Option<String>,
}

impl Validation {
    fn from_violation(violation: f64, what: impl FnOnce() -> String) -> Self {
        let accepted = violation <= MEMBERSHIP_TOL;
        Self {
            accepted,
            violation: violation.max(0.0),
            diagnostic: (!accepted).then(what),
        }
    }
}

/// Membership test for a state of `theory`.
pub fn validate_state(theory: &Theory, state: &State) -> Result<Validation> {
    if state.vector.len() != theory.ambient_dim {
        return Err(IcpError::DimensionMismatch {
            expected: theory.ambient_dim,
            got: state.vector.len(),
        });
    }
    if let Some(i) = state.coords().iter().position(|x| !x.is_finite()) {
        return Err(IcpError::NonFinite(i));
    }
    let coords = state.coords();
    let norm_violation = (dot(theory.unit.coords(), coords) - 1.0).abs();
    let v = match &theory.variant {
        TheoryVariant::Polytope {
            extreme_effects, ..
        } => {
            let mut worst = norm_violation;
            let mut which = String::from("unit effect");
            for (k, e) in extreme_effects.iter().enumerate() {
                let x = dot(e.coords(), coords);
                let viol = (-x).max(x - 1.0);
                if viol > worst {
                    worst = viol;
                    which = format!("extreme effect {} = {x}", k + 1);
                }
            }
            Validation::from_violation(worst, || format!("outside the polytope ({which})"))
        }
        TheoryVariant::NormConstraint { p, k } => {
            let s = &coords[..*k];
            let excess = match p {
                NormExponent::Finite(p) => s.iter().map(|x| x.abs().powf(*p)).sum::<f64>() - 1.0,
                NormExponent::Infinite => p_inf_excess(s),
            };
            Validation::from_violation(excess.max(norm_violation), || {
                format!("mean values {s:?} violate the norm constraint with p = {p}")
            })
        }
        TheoryVariant::RestrictedClassical { .. } => {
            let neg = coords.iter().fold(0.0f64, |m, x| m.max(-x));
            Validation::from_violation(neg.max(norm_violation), || {
                "not a probability vector over internal states".to_string()
            })
        }
        TheoryVariant::Quantum { hilbert_dim } => {
            let m = info::from_hermitian_coords(*hilbert_dim, coords)?;
            let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
            let neg = eig.iter().fold(0.0f64, |acc, x| acc.max(-x));
            Validation::from_violation(neg.max(norm_violation), || {
                format!("not a unit-trace positive operator (min eigenvalue {})", -neg)
            })
        }
    };
    Ok(v)
}

fn p_inf_excess(s: &[f64]) -> f64 {
    s.iter().fold(0.0f64, |m, x| m.max(x.abs())) - 1.0
}

/// Outcome probability `e · ω`, clamped to `[0, 1]` within tolerance.
pub fn apply_effect(effect: &Effect, state: &State) -> Result<f64> {
    let x = effect.vector.dot(&state.vector)?;
    clamp_probability(x)
}

pub(crate) fn clamp_probability(x: f64) -> Result<f64> {
    if !(-MEMBERSHIP_TOL..=1.0 + MEMBERSHIP_TOL).contains(&x) {
        return Err(IcpError::ProbabilityOutOfRange {
            value: x,
            context: "effect applied to state".into(),
        });
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Outcome distribution of `measurement` on `state`.
pub fn measure(theory: &Theory, measurement: &Measurement, state: &State) -> Result<Distribution> {
    if measurement.theory_id() != theory.id() {
        return Err(IcpError::UnknownMeasurement {
            theory: theory.id().to_string(),
            name: measurement.label().to_string(),
        });
    }
    let probs = measurement
        .effects()
        .iter()
        .map(|e| apply_effect(e, state))
        .collect::<Result<Vec<_>>>()?;
    Distribution::new(probs)
}

/// A set of states together with a measurement that should tell them apart.
#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishabilityCertificate {
    pub states: Vec<State>,
    pub measurement: Measurement,
    pub verified: bool,
    /// Largest deviation from `e_j(ω_i) = δ_ij`.
    pub max_deviation: f64,
}

/// Checks `e_j(ω_i) = δ_ij` for every state `i` and every outcome `j`.
pub fn verify_distinguishable(
    theory: &Theory,
    states: &[State],
    measurement: &Measurement,
) -> Result<DistinguishabilityCertificate> {
    if measurement.outcomes() < states.len() {
        return Err(IcpError::InvalidArgument(format!(
            "{} states cannot be distinguished by {} outcomes",
            states.len(),
            measurement.outcomes()
        )));
    }
    let mut dev = 0.0f64;
    for (i, s) in states.iter().enumerate() {
        if s.vector.len() != theory.ambient_dim {
            return Err(IcpError::DimensionMismatch {
                expected: theory.ambient_dim,
                got: s.vector.len(),
            });
        }
        for (j, e) in measurement.effects().iter().enumerate() {
            let x = e.vector.dot(&s.vector)?;
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((x - target).abs());
        }
    }
    Ok(DistinguishabilityCertificate {
        states: states.to_vec(),
        measurement: measurement.clone(),
        verified: dev <= MEMBERSHIP_TOL,
        max_deviation: dev,
    })
}

/// Observed dimension `d` with its witness.
#[derive(Clone, Debug, PartialEq)]
pub struct DimensionResult {
    pub d: usize,
    pub certificate: DistinguishabilityCertificate,
    /// False when the search budget ran out and `d` is only a lower bound.
    pub exhaustive: bool,
    /// How `d` was obtained, including any modeling assumption.
    pub method: String,
}

fn compute_observed_dimension(theory: &Theory) -> Result<DimensionResult> {
    match &theory.variant {
        TheoryVariant::Polytope {
            vertices, unit, ..
        } => polytope_dimension(theory, vertices, unit),
        TheoryVariant::RestrictedClassical {
            allowed_measurements,
            ..
        } => {
            let internal = theory.extreme_states();
            let mut best: Option<(usize, DistinguishabilityCertificate)> = None;
            for m in allowed_measurements {
                let states: Vec<State> = m
                    .effects()
                    .iter()
                    .filter_map(|e| {
                        internal
                            .iter()
                            .find(|s| (dot(e.coords(), s.coords()) - 1.0).abs() <= MEMBERSHIP_TOL)
                            .cloned()
                    })
                    .collect();
                if states.len() != m.outcomes() {
                    continue;
                }
                let cert = verify_distinguishable(theory, &states, m)?;
                if cert.verified && best.as_ref().is_none_or(|(d, _)| states.len() > *d) {
                    best = Some((states.len(), cert));
                }
            }
            let (d, certificate) = best.ok_or_else(|| {
                IcpError::InvalidTheory("no allowed measurement distinguishes any states".into())
            })?;
            Ok(DimensionResult {
                d,
                certificate,
                exhaustive: true,
                method: "exhaustive over allowed measurements and internal deterministic states".into(),
            })
        }
        TheoryVariant::Quantum { hilbert_dim } => {
            let d = *hilbert_dim;
            let states = (0..d)
                .map(|k| {
                    let mut m = DMatrix::<Complex64>::zeros(d, d);
                    m[(k, k)] = Complex64::new(1.0, 0.0);
                    theory.state(info::hermitian_coords(&m))
                })
                .collect::<Result<Vec<_>>>()?;
            let cert = verify_distinguishable(theory, &states, &theory.measurement("Z")?)?;
            Ok(DimensionResult {
                d,
                certificate: cert,
                exhaustive: true,
                method: "Hilbert dimension; computational basis witness".into(),
            })
        }
        TheoryVariant::NormConstraint { k, .. } => {
            let mut plus = vec![0.0; *k];
            plus[0] = 1.0;
            let mut minus = vec![0.0; *k];
            minus[0] = -1.0;
            let states = vec![theory.state_from_means(&plus)?, theory.state_from_means(&minus)?];
            let cert = verify_distinguishable(theory, &states, &theory.measurement("X")?)?;
            Ok(DimensionResult {
                d: 2,
                certificate: cert,
                exhaustive: true,
                method: "only two-outcome fiducial measurements exist; X separates s_X = ±1".into(),
            })
        }
    }
}

/// Searches vertex subsets and candidate effects for the largest perfectly
/// distinguishable set. Candidate states are vertices and candidate effects
/// are the extreme effects and their complements; any leftover `u − Σ e_j`
/// becomes an extra outcome and must itself be a valid effect.
fn polytope_dimension(theory: &Theory, vertices: &[State], unit: &Effect) -> Result<DimensionResult> {
    let effects = theory.candidate_effects();
    let nv = vertices.len();
    let mut ones = vec![0u128; effects.len()];
    let mut zeros = vec![0u128; effects.len()];
    for (k, e) in effects.iter().enumerate() {
        for (v, s) in vertices.iter().enumerate() {
            let x = dot(e.coords(), s.coords());
            if (x - 1.0).abs() <= MEMBERSHIP_TOL {
                ones[k] |= 1 << v;
            } else if x.abs() <= MEMBERSHIP_TOL {
                zeros[k] |= 1 << v;
            }
        }
    }
    let bound = (affine_dimension(vertices) + 1).min(nv);
    let all: u128 = if nv == 128 { u128::MAX } else { (1u128 << nv) - 1 };

    struct Search<'a> {
        vertices: &'a [State],
        effects: &'a [Effect],
        unit: &'a Effect,
        ones: &'a [u128],
        zeros: &'a [u128],
        nodes: usize,
    }

    impl Search<'_> {
        fn go(
            &mut self,
            target: usize,
            allowed: u128,
            chosen: &mut Vec<(usize, usize)>,
        ) -> Option<Vec<(usize, usize)>> {
            if chosen.len() == target {
                return self.remainder_ok(chosen).then(|| chosen.clone());
            }
            let last = chosen.last().map(|c| c.0 as i64).unwrap_or(-1);
            let chosen_mask = chosen.iter().fold(0u128, |m, c| m | (1 << c.0));
            for v in ((last + 1) as usize)..self.vertices.len() {
                if allowed & (1 << v) == 0 {
                    continue;
                }
                for k in 0..self.effects.len() {
                    self.nodes += 1;
                    if self.nodes > DIMENSION_SEARCH_BUDGET {
                        return None;
                    }
                    if self.ones[k] & (1 << v) == 0 || self.zeros[k] & chosen_mask != chosen_mask {
                        continue;
                    }
                    chosen.push((v, k));
                    if let Some(found) = self.go(target, allowed & self.zeros[k], chosen) {
                        return Some(found);
                    }
                    chosen.pop();
                }
            }
            None
        }

        fn remainder_ok(&self, chosen: &[(usize, usize)]) -> bool {
            let rem = remainder(self.unit, self.effects, chosen);
            self.vertices.iter().all(|s| dot(&rem, s.coords()) >= -MEMBERSHIP_TOL)
        }
    }

    let mut search = Search {
        vertices,
        effects: &effects,
        unit,
        ones: &ones,
        zeros: &zeros,
        nodes: 0,
    };
    for m in (2..=bound).rev() {
        let mut chosen = Vec::new();
        if let Some(found) = search.go(m, all, &mut chosen) {
            let states: Vec<State> = found.iter().map(|&(v, _)| vertices[v].clone()).collect();
            let mut vecs: Vec<Vec<f64>> = found.iter().map(|&(_, k)| effects[k].coords().to_vec()).collect();
            let rem = remainder(unit, &effects, &found);
            if rem.iter().any(|x| x.abs() > NORMALIZATION_TOL) {
                vecs.push(rem);
            }
            if vecs.len() < 2 {
                vecs.push(vec![0.0; theory.ambient_dim]);
            }
            let labels: Vec<String> = found.iter().map(|&(v, _)| (v + 1).to_string()).collect();
            let measurement =
                theory.measurement_from_vectors(&format!("distinguish[{}]", labels.join(",")), vecs)?;
            let certificate = verify_distinguishable(theory, &states, &measurement)?;
            return Ok(DimensionResult {
                d: m,
                certificate,
                exhaustive: search.nodes <= DIMENSION_SEARCH_BUDGET,
                method: "vertex subsets vs extreme effects and complements (perfect distinguishers assumed extremal)".into(),
            });
        }
        if search.nodes > DIMENSION_SEARCH_BUDGET {
            break;
        }
    }
    // Only reachable for degenerate polytopes or an exhausted budget.
    let states = vec![vertices[0].clone()];
    let measurement =
        theory.measurement_from_vectors("trivial", vec![unit.coords().to_vec(), vec![0.0; theory.ambient_dim]])?;
    let certificate = verify_distinguishable(theory, &states, &measurement)?;
    Ok(DimensionResult {
        d: 1,
        certificate,
        exhaustive: search.nodes <= DIMENSION_SEARCH_BUDGET,
        method: "no pair of vertices is perfectly distinguishable".into(),
    })
}

fn remainder(unit: &Effect, effects: &[Effect], chosen: &[(usize, usize)]) -> Vec<f64> {
    let mut rem = unit.coords().to_vec();
    for &(_, k) in chosen {
        for (r, x) in rem.iter_mut().zip(effects[k].coords()) {
            *r -= x;
        }
    }
    rem
}

/// Bound `Π (dim_i + 1)` on the observed dimension of a composite system.
pub fn composite_dimension_bound(component_state_space_dims: &[usize]) -> Result<u128> {
    if component_state_space_dims.is_empty() {
        return Err(IcpError::InvalidArgument("no components given".into()));
    }
    component_state_space_dims.iter().try_fold(1u128, |acc, &d| {
        if d == 0 {
            return Err(IcpError::InvalidArgument("state space dimensions must be >= 1".into()));
        }
        acc.checked_mul(d as u128 + 1)
            .ok_or_else(|| IcpError::InvalidArgument("dimension bound overflows u128".into()))
    })
}
