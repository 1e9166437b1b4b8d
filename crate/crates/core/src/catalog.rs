//! Constructors for every theory the library ships with.
//!
//! Catalog ids:
//!
//! | id | theory |
//! |----|--------|
//! | `classical-bit` | 1-simplex, `X` and `Z` read the same bit |
//! | `classical-trit` | triangle (polygon with n = 3) |
//! | `hbit` | two hidden classical bits, only one readable per shot |
//! | `sbit` | square (polygon with n = 4) in the `(s_X, s_Z)` picture |
//! | `qubit` | quantum, Hilbert dimension 2 |
//! | `polygon:<n>` | regular n-gon, n ≥ 3 |
//! | `pgnst:<p>[:<k>]` | norm-constrained box, p ≥ 2 or `inf`, k ∈ {2, 3} |
//!
//! Polygon vertex and effect labels are 1-based and wrap modulo n.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{IcpError, Result};
use crate::gpt::{MeasurementSpec, NormExponent, State, Theory, TheoryVariant};

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: String,
    pub theory: Arc<Theory>,
    pub default_measurements: Vec<String>,
    pub notes: String,
    pub pure_states: Vec<State>,
}

/// One line of the catalog listing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogSummary {
    pub id: String,
    pub ambient_dim: usize,
    pub measurements: Vec<String>,
    pub observed_dimension: usize,
    pub notes: String,
}

impl CatalogEntry {
    pub fn summary(&self) -> Result<CatalogSummary> {
        Ok(CatalogSummary {
            id: self.id.clone(),
            ambient_dim: self.theory.ambient_dim(),
            measurements: self.theory.measurement_names().iter().map(|s| s.to_string()).collect(),
            observed_dimension: self.theory.observed_dimension()?.d,
            notes: self.notes.clone(),
        })
    }
}

fn entry(theory: Theory, default_measurements: &[&str], notes: &str) -> CatalogEntry {
    let pure_states = theory.extreme_states();
    CatalogEntry {
        id: theory.id().to_string(),
        theory: Arc::new(theory),
        default_measurements: default_measurements.iter().map(|s| s.to_string()).collect(),
        notes: notes.to_string(),
        pure_states,
    }
}

/// `r_n = 1/√cos(π/n)`.
pub fn polygon_radius(n: usize) -> f64 {
    1.0 / (PI / n as f64).cos().sqrt()
}

fn wrap(n: usize, i: i64) -> i64 {
    (i - 1).rem_euclid(n as i64) + 1
}

/// Vertex `ω_i = (r_n cos(2iπ/n), r_n sin(2iπ/n), 1)`, 1-based, wrapping.
pub fn polygon_vertex(n: usize, i: i64) -> [f64; 3] {
    let i = wrap(n, i) as f64;
    let r = polygon_radius(n);
    let a = 2.0 * i * PI / n as f64;
    [r * a.cos(), r * a.sin(), 1.0]
}

/// Extreme effect `e_i`, 1-based, wrapping.
///
/// Even n: `½ (r cos((2i−1)π/n), r sin((2i−1)π/n), 1)`.
/// Odd n: `(r cos(2iπ/n), r sin(2iπ/n), 1) / (1 + r²)`.
pub fn polygon_effect(n: usize, i: i64) -> [f64; 3] {
    let i = wrap(n, i) as f64;
    let nf = n as f64;
    let r = polygon_radius(n);
    if n.is_multiple_of(2) {
        let a = (2.0 * i - 1.0) * PI / nf;
        [0.5 * r * a.cos(), 0.5 * r * a.sin(), 0.5]
    } else {
        let a = 2.0 * i * PI / nf;
        let c = 1.0 / (1.0 + r * r);
        [c * r * a.cos(), c * r * a.sin(), c]
    }
}

fn two_outcome(e: [f64; 3]) -> Vec<Vec<f64>> {
    vec![e.to_vec(), vec![-e[0], -e[1], 1.0 - e[2]]]
}

/// Index of the effect defining `X` in the violating polygon ensemble.
pub fn polygon_x_index(n: usize) -> i64 {
    if n.is_multiple_of(2) {
        2
    } else {
        1
    }
}

/// Index of the effect defining `Z`: `⌊n/4⌋ + 2` (even) or `⌊n/4⌋ + 1` (odd).
pub fn polygon_z_index(n: usize) -> i64 {
    (n / 4) as i64 + if n.is_multiple_of(2) { 2 } else { 1 }
}

fn polygon_theory(id: &str, n: usize, x_index: i64, z_index: i64) -> Result<Theory> {
    if n < 3 {
        return Err(IcpError::InvalidArgument(format!("polygon needs n >= 3, got {n}")));
    }
    let vertices = (1..=n as i64).map(|i| polygon_vertex(n, i).to_vec()).collect();
    let effects = (1..=n as i64).map(|i| polygon_effect(n, i).to_vec()).collect();
    let mut specs: Vec<MeasurementSpec> = vec![
        ("X".into(), two_outcome(polygon_effect(n, x_index))),
        ("Z".into(), two_outcome(polygon_effect(n, z_index))),
    ];
    if n == 3 {
        specs.push((
            "T".into(),
            (1..=3).map(|i| polygon_effect(3, i).to_vec()).collect(),
        ));
    }
    for i in 1..=n as i64 {
        specs.push((format!("E{i}"), two_outcome(polygon_effect(n, i))));
    }
    Theory::polytope(id, vertices, effects, vec![0.0, 0.0, 1.0], specs)
}

/// Regular n-gon theory with measurements `X`, `Z` (the pair used by the
/// violating ensemble), `E1..En` = `{e_i, u − e_i}`, and `T` for n = 3.
pub fn polygon(n: usize) -> Result<CatalogEntry> {
    let t = polygon_theory(&format!("polygon:{n}"), n, polygon_x_index(n), polygon_z_index(n))?;
    let notes = match n {
        3 => "classical trit".to_string(),
        4 => "square bit".to_string(),
        _ => format!("regular {n}-gon, r_n = {:.6}", polygon_radius(n)),
    };
    Ok(entry(t, &["X", "Z"], &notes))
}

/// One classical bit; `X` and `Z` both read it.
pub fn classical_bit() -> CatalogEntry {
    let bit = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let t = Theory::polytope(
        "classical-bit",
        bit.clone(),
        bit.clone(),
        vec![1.0, 1.0],
        vec![("X".into(), bit.clone()), ("Z".into(), bit)],
    )
    .expect("classical bit is well formed");
    entry(t, &["X", "Z"], "1-simplex; X and Z are perfectly correlated")
}

/// The triangle; identical geometry to `polygon:3`.
pub fn classical_trit() -> CatalogEntry {
    let t = polygon_theory("classical-trit", 3, 1, 1).expect("triangle is well formed");
    entry(t, &["T", "X", "Z"], "2-simplex; polygon with n = 3")
}

/// Two classical bits `(a, b)` of which one can be read per shot.
///
/// Internal state `(a, b)` sits at index `2a + b`. `X` reads `a`, `Z` reads `b`.
pub fn hbit() -> CatalogEntry {
    let t = Theory::restricted_classical(
        "hbit",
        4,
        vec![
            ("X".into(), vec![vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 1.0]]),
            ("Z".into(), vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]),
        ],
    )
    .expect("hbit is well formed");
    entry(t, &["X", "Z"], "4 internal states, only X or Z readable")
}

/// The square bit in `(s_X, s_Z, 1)` coordinates.
///
/// Same geometry and labels as the polygon with n = 4 read through
/// `X = {e_2, u − e_2}` and `Z = {e_3, u − e_3}`: `ω_1 = (1, −1)`,
/// `ω_2 = (1, 1)`, `ω_3 = (−1, 1)`, `ω_4 = (−1, −1)`, and `e_1..e_4` read
/// `Z = 1`, `X = 0`, `Z = 0`, `X = 1` respectively.
pub fn sbit() -> CatalogEntry {
    let vertices = vec![
        vec![1.0, -1.0, 1.0],
        vec![1.0, 1.0, 1.0],
        vec![-1.0, 1.0, 1.0],
        vec![-1.0, -1.0, 1.0],
    ];
    let effects = vec![
        vec![0.0, -0.5, 0.5],
        vec![0.5, 0.0, 0.5],
        vec![0.0, 0.5, 0.5],
        vec![-0.5, 0.0, 0.5],
    ];
    let complement = |e: &Vec<f64>| vec![e.clone(), vec![-e[0], -e[1], 1.0 - e[2]]];
    let mut specs: Vec<MeasurementSpec> = vec![
        ("X".into(), complement(&effects[1])),
        ("Z".into(), complement(&effects[2])),
    ];
    for (i, e) in effects.iter().enumerate() {
        specs.push((format!("E{}", i + 1), complement(e)));
    }
    let t = Theory::polytope("sbit", vertices, effects, vec![0.0, 0.0, 1.0], specs)
        .expect("square is well formed");
    entry(t, &["X", "Z"], "square state space; corners fix both X and Z")
}

/// Qubit with `X`, `Z`, `Y`; rotated observables are available as `Z(φ)`.
pub fn qubit() -> CatalogEntry {
    let t = Theory::quantum("qubit", 2).expect("qubit is well formed");
    let mut e = entry(t, &["X", "Z", "Y"], "quantum bit; Z(φ) rotates Z towards X");
    e.pure_states = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
    .into_iter()
    .map(|r| e.theory.bloch_state(r).expect("pure Bloch state"))
    .collect();
    e
}

/// Box with `k` fiducial observables and state space `Σ |s_i|^p ≤ 1`.
pub fn pgnst(p: NormExponent, k: usize) -> Result<CatalogEntry> {
    let id = format!("pgnst:{p}:{k}");
    let t = Theory::norm_constraint(&id, p, k)?;
    let mut pure = Vec::new();
    for i in 0..k {
        for sign in [1.0, -1.0] {
            let mut s = vec![0.0; k];
            s[i] = sign;
            pure.push(t.state_from_means(&s)?);
        }
    }
    if p == NormExponent::Infinite {
        for mask in 0..(1u32 << k) {
            let s: Vec<f64> = (0..k).map(|i| if mask >> i & 1 == 0 { 1.0 } else { -1.0 }).collect();
            pure.push(t.state_from_means(&s)?);
        }
    }
    let names: Vec<&str> = ["X", "Z", "Y"][..k].to_vec();
    let mut e = entry(t, &names, &format!("Σ|s_i|^p ≤ 1 with p = {p}"));
    e.pure_states = pure;
    Ok(e)
}

/// Resolves a catalog id.
pub fn lookup(id: &str) -> Result<CatalogEntry> {
    match id {
        "classical-bit" | "bit" => return Ok(classical_bit()),
        "classical-trit" | "trit" => return Ok(classical_trit()),
        "hbit" => return Ok(hbit()),
        "sbit" => return Ok(sbit()),
        "qubit" => return Ok(qubit()),
        _ => {}
    }
    if let Some(n) = id.strip_prefix("polygon:") {
        let n: usize = n
            .parse()
            .map_err(|_| IcpError::UnknownTheory(id.to_string()))?;
        return polygon(n);
    }
    if let Some(rest) = id.strip_prefix("pgnst:") {
        let mut parts = rest.split(':');
        let p = NormExponent::parse(parts.next().unwrap_or_default())?;
        let k = match parts.next() {
            Some(k) => k.parse().map_err(|_| IcpError::UnknownTheory(id.to_string()))?,
            None => 2,
        };
        if parts.next().is_some() {
            return Err(IcpError::UnknownTheory(id.to_string()));
        }
        return pgnst(p, k);
    }
    Err(IcpError::UnknownTheory(id.to_string()))
}

/// The fixed listing shown by `catalog list`.
pub fn list() -> Result<Vec<CatalogEntry>> {
    let mut out = vec![classical_bit(), classical_trit(), hbit(), sbit(), qubit()];
    for n in 3..=8 {
        out.push(polygon(n)?);
    }
    for (p, k) in [
        (NormExponent::Finite(2.0), 2),
        (NormExponent::Finite(3.0), 2),
        (NormExponent::Infinite, 2),
        (NormExponent::Finite(2.0), 3),
    ] {
        out.push(pgnst(p, k)?);
    }
    Ok(out)
}

/// True when a theory is backed by a polytope with the given vertex count.
pub fn polytope_vertex_count(theory: &Theory) -> Option<usize> {
    match theory.variant() {
        TheoryVariant::Polytope { vertices, .. } => Some(vertices.len()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpt::{apply_effect, measure, validate_state};
    use approx::assert_abs_diff_eq;

    #[test]
    fn classical_bit_entry() {
        let e = classical_bit();
        assert_eq!(e.theory.observed_dimension().unwrap().d, 2);
        let x = e.theory.measurement("X").unwrap();
        let d = measure(&e.theory, &x, &e.pure_states[0]).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn trit_entry() {
        let e = classical_trit();
        assert_eq!(e.pure_states.len(), 3);
        assert_eq!(e.theory.observed_dimension().unwrap().d, 3);
        for s in &e.pure_states {
            assert_abs_diff_eq!(apply_effect(e.theory.unit(), s).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hbit_entry() {
        let e = hbit();
        let s = e.theory.state(vec![0.0, 0.0, 1.0, 0.0]).unwrap(); // (a, b) = (1, 0)
        let x = e.theory.measurement("X").unwrap();
        assert_eq!(measure(&e.theory, &x, &s).unwrap().probs(), &[0.0, 1.0]);
        assert_eq!(e.theory.observed_dimension().unwrap().d, 2);
        assert_eq!(e.theory.measurements().len(), 2);
        assert!(e.theory.measurements().iter().all(|m| m.outcomes() == 2));
    }

    #[test]
    fn sbit_corners_fix_both_observables() {
        let e = sbit();
        let t = &e.theory;
        let x = t.measurement("X").unwrap();
        let z = t.measurement("Z").unwrap();
        for (sx, sz) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let s = t.state_from_means(&[sx, sz]).unwrap();
            let px = measure(t, &x, &s).unwrap();
            let pz = measure(t, &z, &s).unwrap();
            let i = if sx > 0.0 { 0 } else { 1 };
            let j = if sz > 0.0 { 0 } else { 1 };
            assert_abs_diff_eq!(px.probs()[i], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(pz.probs()[j], 1.0, epsilon = 1e-12);
        }
        // same incidence between labelled vertices and effects as polygon(4)
        let p4 = polygon(4).unwrap();
        let sq = t.extreme_states();
        let sq_e = match t.variant() {
            TheoryVariant::Polytope { extreme_effects, .. } => extreme_effects.clone(),
            _ => unreachable!(),
        };
        for i in 1..=4i64 {
            for j in 1..=4i64 {
                let v = p4.theory.state(polygon_vertex(4, i).to_vec()).unwrap();
                let e = p4.theory.effect(polygon_effect(4, j).to_vec()).unwrap();
                let want = apply_effect(&e, &v).unwrap();
                let got = apply_effect(&sq_e[j as usize - 1], &sq[i as usize - 1]).unwrap();
                assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            }
        }
        assert_eq!(t.observed_dimension().unwrap().d, 2);
        // r₄ = cos(π/4)^(−1/2)
        assert_abs_diff_eq!(polygon_radius(4), 1.189_207_115_002_721, epsilon = 1e-12);
    }

    #[test]
    fn qubit_entry() {
        let e = qubit();
        let t = &e.theory;
        let up = t.bloch_state([0.0, 0.0, 1.0]).unwrap();
        let z = t.measurement("Z").unwrap();
        let x = t.measurement("X").unwrap();
        assert_abs_diff_eq!(measure(t, &z, &up).unwrap().probs()[0], 1.0, epsilon = 1e-12);
        let px = measure(t, &x, &up).unwrap();
        assert_abs_diff_eq!(px.probs()[0], 0.5, epsilon = 1e-12);
        let z0 = t.measurement("Z(0)").unwrap();
        for (a, b) in z0.effects().iter().zip(z.effects()) {
            for (p, q) in a.coords().iter().zip(b.coords()) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn pgnst_entries() {
        let inf = pgnst(NormExponent::Infinite, 2).unwrap();
        assert!(inf.theory.state_from_means(&[1.0, 1.0]).is_ok());
        let two = pgnst(NormExponent::Finite(2.0), 2).unwrap();
        let s = two.theory.state_from_means(&[0.9, 0.9]);
        assert!(s.is_err());
        for p in [2.0, 2.5, 3.0, 10.0, f64::INFINITY] {
            let e = pgnst(NormExponent::new(p).unwrap(), 2).unwrap();
            assert!(e.theory.state_from_means(&[1.0, 0.0]).is_ok());
        }
        assert!(NormExponent::new(1.5).is_err());
        for e in [inf, two] {
            for s in &e.pure_states {
                assert!(validate_state(&e.theory, s).unwrap().accepted);
            }
        }
    }

    #[test]
    fn polygon_effects_examples() {
        // even n = 8: e_2(ω_2) = 1, e_2(ω_5) = 0
        let e = polygon(8).unwrap();
        let e2 = e.theory.effect(polygon_effect(8, 2).to_vec()).unwrap();
        let w2 = e.theory.state(polygon_vertex(8, 2).to_vec()).unwrap();
        let w5 = e.theory.state(polygon_vertex(8, 5).to_vec()).unwrap();
        assert_abs_diff_eq!(apply_effect(&e2, &w2).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(apply_effect(&e2, &w5).unwrap(), 0.0, epsilon = 1e-12);
        // e_i + e_{i+n/2} = u for even n
        for i in 1..=8 {
            let a = polygon_effect(8, i);
            let b = polygon_effect(8, i + 4);
            assert_abs_diff_eq!(a[0] + b[0], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(a[1] + b[1], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(a[2] + b[2], 1.0, epsilon = 1e-15);
        }
        // odd n: e_i(ω_i) = 1
        for n in [3usize, 5, 7, 9] {
            for i in 1..=n as i64 {
                let v: f64 = polygon_effect(n, i)
                    .iter()
                    .zip(polygon_vertex(n, i))
                    .map(|(a, b)| a * b)
                    .sum();
                assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn polygon_six_measurement() {
        // {e_3, u − e_3} on ω_1: ½(1 + sin(2π·1/6)·tan(π/6)) = 0.75
        let e = polygon(6).unwrap();
        let m = e.theory.measurement("E3").unwrap();
        let w1 = e.theory.state(polygon_vertex(6, 1).to_vec()).unwrap();
        let d = measure(&e.theory, &m, &w1).unwrap();
        let closed = 0.5 * (1.0 + (2.0 * PI / 6.0).sin() * (PI / 6.0).tan());
        assert_abs_diff_eq!(closed, 0.75, epsilon = 1e-15);
        // measure() clamps and returns e·ω; e_3·ω_1 = ½(r² cos(π/2) + 1) = ½
        assert_abs_diff_eq!(d.probs()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn lookup_ids() {
        assert_eq!(lookup("polygon:5").unwrap().id, "polygon:5");
        assert_eq!(lookup("pgnst:inf").unwrap().id, "pgnst:inf:2");
        assert_eq!(lookup("pgnst:2.5:3").unwrap().id, "pgnst:2.5:3");
        assert!(lookup("polygon:2").is_err());
        assert!(lookup("pgnst:1").is_err());
        assert!(matches!(lookup("nope"), Err(IcpError::UnknownTheory(_))));
    }
}
