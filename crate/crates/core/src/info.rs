//! Shannon and von Neumann entropy calculus over finite systems.
//!
//! All logarithms are base 2 and `0 · log 0 = 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IcpError, Result};

const SUM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-9;

/// A probability vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Entries must be nonnegative and sum to one within `1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probabilities(&probs)?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(IcpError::InvalidDistribution("empty support".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn check_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(IcpError::InvalidDistribution("empty support".into()));
    }
    if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
        return Err(IcpError::InvalidDistribution(format!("entry {i} is {p}")));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(IcpError::InvalidDistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

/// `−Σ p log₂ p` over raw weights, skipping zeros.
pub(crate) fn entropy_bits(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

pub fn shannon_entropy(d: &Distribution) -> f64 {
    entropy_bits(&d.probs)
}

/// Binary entropy `H(x) = −x log₂ x − (1−x) log₂(1−x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(IcpError::ProbabilityOutOfRange {
            value: x,
            context: "binary entropy".into(),
        });
    }
    Ok(entropy_bits(&[x, 1.0 - x]))
}

/// Joint distribution over named registers stored densely in row-major order
/// (last register varies fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    names: Vec<String>,
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(names: Vec<String>, dims: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if names.len() != dims.len() {
            return Err(IcpError::InvalidArgument(
                "one alphabet size per register is required".into(),
            ));
        }
        if dims.contains(&0) {
            return Err(IcpError::InvalidArgument("empty register alphabet".into()));
        }
        let size: usize = dims.iter().product();
        if probs.len() != size {
            return Err(IcpError::DimensionMismatch {
                expected: size,
                got: probs.len(),
            });
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(IcpError::InvalidArgument(format!("duplicate register `{n}`")));
            }
        }
        check_probabilities(&probs)?;
        Ok(Self { names, dims, probs })
    }

    /// Table built from raw accumulated weights, renormalized.
    pub(crate) fn from_weights(names: Vec<String>, dims: Vec<usize>, mut probs: Vec<f64>) -> Result<Self> {
        let s: f64 = probs.iter().sum();
        if !(s > 0.0) {
            return Err(IcpError::InvalidDistribution("zero total weight".into()));
        }
        for p in probs.iter_mut() {
            *p = (*p / s).max(0.0);
        }
        Self::new(names, dims, probs)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| IcpError::UnknownRegister(name.to_string()))
    }

    /// Marginal over the given axes, in the order given.
    pub fn marginal_axes(&self, axes: &[usize]) -> JointTable {
        let out_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; out_dims.iter().product::<usize>().max(1)];
        let mut idx = vec![0usize; self.dims.len()];
        for &p in &self.probs {
            let mut flat = 0;
            for &a in axes {
                flat = flat * self.dims[a] + idx[a];
            }
            out[flat] += p;
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < self.dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        JointTable {
            names: axes.iter().map(|&a| self.names[a].clone()).collect(),
            dims: out_dims,
            probs: out,
        }
    }

    pub fn marginal(&self, names: &[&str]) -> Result<JointTable> {
        let axes = self.axes(names)?;
        Ok(self.marginal_axes(&axes))
    }

    fn axes(&self, names: &[&str]) -> Result<Vec<usize>> {
        let axes = names.iter().map(|n| self.index_of(n)).collect::<Result<Vec<_>>>()?;
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(IcpError::InvalidArgument(format!(
                    "register `{}` listed twice",
                    self.names[*a]
                )));
            }
        }
        Ok(axes)
    }

    /// Joint entropy of the whole table.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// Joint entropy of a subset of registers; the empty set has entropy 0.
    pub fn entropy_of(&self, names: &[&str]) -> Result<f64> {
        if names.is_empty() {
            return Ok(0.0);
        }
        Ok(self.marginal(names)?.entropy())
    }

    /// `I(A:B)` between two groups of registers.
    pub fn group_mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        let ab: Vec<&str> = a.iter().chain(b).copied().collect();
        self.axes(&ab)?;
        Ok(self.entropy_of(a)? + self.entropy_of(b)? - self.entropy_of(&ab)?)
    }

    /// `I(A:B|C)` between groups of registers.
    pub fn conditional_mutual_information(&self, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        let bc: Vec<&str> = b.iter().chain(c).copied().collect();
        let abc: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
        self.axes(&abc)?;
        Ok(self.entropy_of(&ac)? + self.entropy_of(&bc)? - self.entropy_of(&abc)? - self.entropy_of(c)?)
    }
}

/// `I(A:B) = H(A) + H(B) − H(AB)`.
pub fn mutual_information(j: &JointTable, a: &str, b: &str) -> Result<f64> {
    j.group_mutual_information(&[a], &[b])
}

/// `I(A₁:…:Aₙ) = Σ H(Aᵢ) − H(A₁…Aₙ)`.
pub fn multivariate_mutual_information(j: &JointTable, registers: &[&str]) -> Result<f64> {
    if registers.len() < 2 {
        return Err(IcpError::InvalidArgument(
            "multivariate mutual information needs at least two registers".into(),
        ));
    }
    let singles = registers
        .iter()
        .map(|r| j.entropy_of(&[r]))
        .sum::<Result<f64>>()?;
    Ok(singles - j.entropy_of(registers)?)
}

/// A unit-trace positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(IcpError::InvalidDensityOperator("matrix must be square".into()));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..n {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(IcpError::InvalidDensityOperator(format!(
                        "not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > SUM_TOL || tr.im.abs() > SUM_TOL {
            return Err(IcpError::InvalidDensityOperator(format!("trace is {tr}")));
        }
        let rho = Self { matrix };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -EIGEN_TOL {
            return Err(IcpError::InvalidDensityOperator(format!(
                "negative eigenvalue {min}"
            )));
        }
        Ok(rho)
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    /// Trace over all subsystems not listed in `keep`; `dims` gives the
    /// tensor factor sizes in order.
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityOperator> {
        Ok(Self {
            matrix: partial_trace(&self.matrix, dims, keep)?,
        })
    }
}

/// `−Tr ρ log₂ ρ` from the spectrum.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    let eig: Vec<f64> = rho.eigenvalues().into_iter().map(|x| x.max(0.0)).collect();
    entropy_bits(&eig)
}

pub(crate) fn partial_trace(
    m: &DMatrix<Complex64>,
    dims: &[usize],
    keep: &[usize],
) -> Result<DMatrix<Complex64>> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(IcpError::DimensionMismatch {
            expected: total,
            got: m.nrows(),
        });
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(IcpError::InvalidArgument("subsystem index out of range".into()));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kd: usize = keep.iter().map(|&k| dims[k]).product();
    let td: usize = traced.iter().map(|&k| dims[k]).product();

    // Compose a full index from kept and traced multi-indices.
    let compose = |kept_flat: usize, traced_flat: usize| -> usize {
        let mut digits = vec![0usize; dims.len()];
        let mut r = kept_flat;
        for &k in keep.iter().rev() {
            digits[k] = r % dims[k];
            r /= dims[k];
        }
        let mut r = traced_flat;
        for &k in traced.iter().rev() {
            digits[k] = r % dims[k];
            r /= dims[k];
        }
        digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
    };

    let mut out = DMatrix::<Complex64>::zeros(kd, kd);
    for i in 0..kd {
        for j in 0..kd {
            let mut s = Complex64::new(0.0, 0.0);
            for t in 0..td {
                s += m[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = s;
        }
    }
    Ok(out)
}

/// Real coordinates of a Hermitian matrix in an orthonormal basis for the
/// Hilbert–Schmidt inner product: the diagonal first, then `√2 Re`, `√2 Im`
/// of each upper off-diagonal entry. `Tr(AB)` becomes a dot product.
pub fn hermitian_coords(m: &DMatrix<Complex64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(std::f64::consts::SQRT_2 * m[(i, j)].re);
            out.push(std::f64::consts::SQRT_2 * m[(i, j)].im);
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn from_hermitian_coords(d: usize, coords: &[f64]) -> Result<DMatrix<Complex64>> {
    if coords.len() != d * d {
        return Err(IcpError::DimensionMismatch {
            expected: d * d,
            got: coords.len(),
        });
    }
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(coords[i], 0.0);
    }
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = Complex64::new(coords[k], coords[k + 1]) / std::f64::consts::SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    Ok(m)
}

/// `(I + r·σ) / 2`.
pub fn bloch_matrix(r: [f64; 3]) -> DMatrix<Complex64> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c((1.0 + r[2]) / 2.0, 0.0),
            c(r[0] / 2.0, -r[1] / 2.0),
            c(r[0] / 2.0, r[1] / 2.0),
            c((1.0 - r[2]) / 2.0, 0.0),
        ],
    )
}
