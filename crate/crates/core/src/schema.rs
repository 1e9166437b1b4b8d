//! JSON documents for theories, states, ensembles and certificates.
//!
//! ```json
//! {"theory": {"variant": "norm_constraint", "params": {"id": "pgnst:3:2", "p": 3.0, "k": 2}},
//!  "state": {"coords": [0.5, -0.25, 1.0]}}
//! ```
//!
//! An ensemble document names a catalog theory and lists its entries:
//!
//! ```json
//! {"theory": "sbit",
//!  "entries": [{"p": 0.25, "state": [1.0, -1.0, 1.0], "registers": [0, 0]}],
//!  "register_alphabets": [2, 2],
//!  "measurements": [{"label": "X", "register": "A", "effects": [[0.5, 0.0, 0.5], [-0.5, 0.0, 0.5]]}]}
//! ```
//!
//! `register_alphabets` and `measurements` are optional. A certificate is an
//! ensemble document with `report`, `closed_form`, `computed` and
//! `crosscheck_max_abs_diff` added, so every certificate also loads as an
//! ensemble.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog;
use crate::constructions::ViolationCertificate;
use crate::ensemble::{build_ensemble, CorrelatedEnsemble, EnsembleEntry, ICPReport, ObservableAssignment};
use crate::error::{IcpError, Result};
use crate::gpt::{max_abs_diff, Measurement, MeasurementSpec, NormExponent, State, Theory, TheoryVariant};

/// Largest coordinate difference accepted when a stored measurement is
/// matched against the catalog's measurement of the same name.
pub const MEASUREMENT_MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryDescriptor {
    pub variant: String,
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryStateDoc {
    pub theory: TheoryDescriptor,
    pub state: StateDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MeasurementParams {
    label: String,
    effects: Vec<Vec<f64>>,
}

fn measurement_params(ms: &[Measurement]) -> Vec<MeasurementParams> {
    ms.iter()
        .map(|m| MeasurementParams {
            label: m.label().to_string(),
            effects: m.effects().iter().map(|e| e.coords().to_vec()).collect(),
        })
        .collect()
}

fn specs(ms: Vec<MeasurementParams>) -> Vec<MeasurementSpec> {
    ms.into_iter().map(|m| (m.label, m.effects)).collect()
}

fn field<T: for<'de> Deserialize<'de>>(params: &Value, key: &str) -> Result<T> {
    let v = params
        .get(key)
        .ok_or_else(|| IcpError::InvalidTheory(format!("descriptor params lack `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| IcpError::InvalidTheory(format!("params.{key}: {e}")))
}

impl TheoryDescriptor {
    pub fn from_theory(theory: &Theory) -> Self {
        let id = theory.id();
        let (variant, params) = match theory.variant() {
            TheoryVariant::Polytope {
                vertices,
                extreme_effects,
                unit,
            } => (
                "polytope",
                serde_json::json!({
                    "id": id,
                    "vertices": vertices.iter().map(|v| v.coords().to_vec()).collect::<Vec<_>>(),
                    "extreme_effects": extreme_effects.iter().map(|e| e.coords().to_vec()).collect::<Vec<_>>(),
                    "unit": unit.coords(),
                    "measurements": measurement_params(theory.measurements()),
                }),
            ),
            TheoryVariant::NormConstraint { p, k } => {
                ("norm_constraint", serde_json::json!({"id": id, "p": p, "k": k}))
            }
            TheoryVariant::RestrictedClassical { internal_states, .. } => (
                "restricted_classical",
                serde_json::json!({
                    "id": id,
                    "internal_states": internal_states,
                    "measurements": measurement_params(theory.measurements()),
                }),
            ),
            TheoryVariant::Quantum { hilbert_dim } => {
                ("quantum", serde_json::json!({"id": id, "hilbert_dim": hilbert_dim}))
            }
        };
        Self {
            variant: variant.to_string(),
            params,
        }
    }

    pub fn to_theory(&self) -> Result<Theory> {
        let p = &self.params;
        let id: String = field(p, "id")?;
        match self.variant.as_str() {
            "polytope" => Theory::polytope(
                &id,
                field(p, "vertices")?,
                field(p, "extreme_effects")?,
                field(p, "unit")?,
                specs(field(p, "measurements")?),
            ),
            "norm_constraint" => Theory::norm_constraint(&id, field::<NormExponent>(p, "p")?, field(p, "k")?),
            "restricted_classical" => {
                Theory::restricted_classical(&id, field(p, "internal_states")?, specs(field(p, "measurements")?))
            }
            "quantum" => Theory::quantum(&id, field(p, "hilbert_dim")?),
            other => Err(IcpError::InvalidTheory(format!("unknown variant `{other}`"))),
        }
    }
}

impl TheoryStateDoc {
    pub fn new(theory: &Theory, state: &State) -> Self {
        Self {
            theory: TheoryDescriptor::from_theory(theory),
            state: StateDoc {
                coords: state.coords().to_vec(),
            },
        }
    }

    /// Rebuilds and validates the theory and the state.
    pub fn resolve(&self) -> Result<(Theory, State)> {
        let theory = self.theory.to_theory()?;
        let state = theory.state(self.state.coords.clone())?;
        Ok((theory, state))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDoc {
    pub p: f64,
    pub state: Vec<f64>,
    pub registers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDoc {
    pub label: String,
    pub register: String,
    pub effects: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDoc {
    pub theory: String,
    pub entries: Vec<EntryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub register_alphabets: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurements: Option<Vec<MeasurementDoc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    #[serde(flatten)]
    pub ensemble: EnsembleDoc,
    pub report: ICPReport,
    pub closed_form: BTreeMap<String, f64>,
    pub computed: BTreeMap<String, f64>,
    pub crosscheck_max_abs_diff: f64,
}

impl EnsembleDoc {
    pub fn from_ensemble(ensemble: &CorrelatedEnsemble, assignment: Option<&ObservableAssignment>) -> Self {
        Self {
            theory: ensemble.theory().id().to_string(),
            entries: ensemble
                .entries()
                .iter()
                .map(|e| EntryDoc {
                    p: e.p,
                    state: e.state.coords().to_vec(),
                    registers: e.registers.clone(),
                })
                .collect(),
            register_alphabets: Some(ensemble.register_alphabets().to_vec()),
            measurements: assignment.map(|a| {
                a.pairs()
                    .iter()
                    .map(|(m, r)| MeasurementDoc {
                        label: m.label().to_string(),
                        register: r.clone(),
                        effects: m.effects().iter().map(|e| e.coords().to_vec()).collect(),
                    })
                    .collect()
            }),
        }
    }

    /// Validates the document against the named catalog theory.
    pub fn to_ensemble(&self) -> Result<CorrelatedEnsemble> {
        let theory = catalog::lookup(&self.theory)?.theory;
        self.to_ensemble_in(&theory)
    }

    pub fn to_ensemble_in(&self, theory: &Arc<Theory>) -> Result<CorrelatedEnsemble> {
        if theory.id() != self.theory {
            return Err(IcpError::InvalidEnsemble(format!(
                "document names theory `{}` but `{}` was supplied",
                self.theory,
                theory.id()
            )));
        }
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let state = theory.state(e.state.clone()).map_err(|err| {
                    IcpError::InvalidEnsemble(format!("entry {}: {err}", k + 1))
                })?;
                Ok(EnsembleEntry {
                    p: e.p,
                    state,
                    registers: e.registers.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        build_ensemble(theory, entries, self.register_alphabets.clone())
    }

    /// The stored measurement assignment, resolved against `theory`.
    ///
    /// Named catalog measurements must match their stored effect vectors;
    /// unknown names are rebuilt from the vectors and validated.
    pub fn assignment(&self, theory: &Theory) -> Result<Option<ObservableAssignment>> {
        let Some(ms) = &self.measurements else {
            return Ok(None);
        };
        let pairs = ms
            .iter()
            .map(|d| {
                let m = match theory.measurement(&d.label) {
                    Ok(m) => {
                        let stored: Vec<f64> = d.effects.concat();
                        let known: Vec<f64> = m.effects().iter().flat_map(|e| e.coords().to_vec()).collect();
                        if stored.len() != known.len() || max_abs_diff(&stored, &known) > MEASUREMENT_MATCH_TOL {
                            return Err(IcpError::InvalidMeasurement {
                                label: d.label.clone(),
                                reason: "stored effects differ from the theory's measurement of that name".into(),
                            });
                        }
                        m
                    }
                    Err(IcpError::UnknownMeasurement { .. }) => {
                        theory.measurement_from_vectors(&d.label, d.effects.clone())?
                    }
                    Err(e) => return Err(e),
                };
                Ok((m, d.register.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        ObservableAssignment::new(pairs).map(Some)
    }
}

impl CertificateDoc {
    pub fn from_certificate(cert: &ViolationCertificate) -> Self {
        Self {
            ensemble: EnsembleDoc::from_ensemble(&cert.ensemble, Some(&cert.assignment)),
            report: cert.report.clone(),
            closed_form: cert.closed_form.clone(),
            computed: cert.computed.clone(),
            crosscheck_max_abs_diff: cert.crosscheck_max_abs_diff,
        }
    }
}

/// Ensemble and optional assignment parsed from an ensemble or certificate document.
#[derive(Clone, Debug)]
pub struct LoadedEnsemble {
    pub ensemble: CorrelatedEnsemble,
    pub assignment: Option<ObservableAssignment>,
    /// Report stored alongside the ensemble, when the document is a certificate.
    pub stored_report: Option<ICPReport>,
}

/// Schema failure with the 1-based line it points at.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

/// Parses and validates an ensemble or certificate document.
///
/// The document may also sit under the `payload` key of an output wrapper
/// `{"manifest": ..., "kind": ..., "payload": {...}}`. Validation failures that
/// concern one entry point at the line where that entry starts.
pub fn load_ensemble(text: &str) -> std::result::Result<LoadedEnsemble, SchemaError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| SchemaError {
        line: e.line(),
        message: e.to_string(),
    })?;
    let depth = match value.get_mut("payload").map(Value::take) {
        Some(inner) => {
            value = inner;
            2
        }
        None => 1,
    };
    let stored_report = match value.get("report") {
        Some(r) => Some(serde_json::from_value::<ICPReport>(r.clone()).map_err(|e| SchemaError {
            line: key_line(text, "report", depth),
            message: format!("report: {e}"),
        })?),
        None => None,
    };
    let doc: EnsembleDoc = serde_json::from_value(value).map_err(|e| SchemaError {
        line: 1,
        message: e.to_string(),
    })?;
    let fail = |e: IcpError| {
        let msg = e.to_string();
        SchemaError {
            line: entry_index(&msg)
                .and_then(|k| entry_line(text, k, depth))
                .unwrap_or_else(|| key_line(text, "entries", depth)),
            message: msg,
        }
    };
    let ensemble = doc.to_ensemble().map_err(fail)?;
    let assignment = doc.assignment(ensemble.theory()).map_err(|e| SchemaError {
        line: key_line(text, "measurements", depth),
        message: e.to_string(),
    })?;
    Ok(LoadedEnsemble {
        ensemble,
        assignment,
        stored_report,
    })
}

/// 1-based entry number mentioned as `entry k` in a diagnostic.
fn entry_index(msg: &str) -> Option<usize> {
    let rest = &msg[msg.find("entry ")? + 6..];
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the first occurrence of `"key"` at nesting `depth`, or 1.
fn key_line(text: &str, key: &str, depth: usize) -> usize {
    key_at_depth(text, key, depth).map_or(1, |o| line_at(text, o))
}

/// Byte offset of the first `"key"` at nesting `depth` (1 is the outermost object).
fn key_at_depth(text: &str, key: &str, want: usize) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let bytes = text.as_bytes();
    let (mut depth, mut in_str, mut esc) = (0usize, false, false);
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            match (esc, b) {
                (true, _) => esc = false,
                (false, b'\\') => esc = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth = depth.saturating_sub(1),
            b'"' => {
                if depth == want && text[i..].starts_with(&needle) {
                    return Some(i);
                }
                in_str = true;
            }
            _ => {}
        }
    }
    None
}

/// Line where the `k`-th (1-based) object of the `entries` array starts.
fn entry_line(text: &str, k: usize, depth: usize) -> Option<usize> {
    let start = key_at_depth(text, "entries", depth)?;
    let bytes = text.as_bytes();
    let open = start + text[start..].find('[')?;
    let (mut depth, mut in_str, mut esc, mut seen) = (0usize, false, false, 0usize);
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_str {
            match (esc, b) {
                (true, _) => esc = false,
                (false, b'\\') => esc = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' | b'[' => {
                if b == b'{' && depth == 1 {
                    seen += 1;
                    if seen == k {
                        return Some(line_at(text, i));
                    }
                }
                depth += 1;
            }
            b'}' | b']' => {
                depth -= 1;
                if depth == 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    None
}
