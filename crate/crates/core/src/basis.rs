//! Orthonormal Hermitian operator bases and coefficient representations.
//!
//! Every state and effect is stored as its coefficient vector in an
//! orthonormal basis `v_0 = I/sqrt(n), v_1, ..., v_{n^2-1}` with
//! `Tr(v_i v_j) = delta_ij`. A density matrix then has `theta_0 = 1/sqrt(n)`
//! and the outcome probability of an effect is the plain dot product of the
//! two coefficient vectors. The familiar qubit Bloch vector (`rho = (I +
//! theta . sigma) / 2`) is a conversion layer on top of this.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    ensure_hermitian, frobenius_norm, hermitian_deviation, hermitian_eigen, hs_inner, identity,
    kron, real, trace, CMatrix,
};
use crate::{Error, Result};

/// Tolerance on eigenvalues for positivity and projection checks.
pub const EIGEN_TOL: f64 = 1e-9;

/// Tolerance for the structural invariants of a basis.
pub const BASIS_TOL: f64 = 1e-12;

/// Memory budget for materialised tensor-Pauli bases (256 MiB).
pub const BASIS_MEMORY_BUDGET: u128 = 256 * 1024 * 1024;

/// A basis of `n^2` Hermitian `n x n` matrices, orthonormal in the trace
/// inner product, whose first element is `I/sqrt(n)`.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<CMatrix>,
}

impl OperatorBasis {
    /// Wraps a list of matrices after checking the basis invariants.
    pub fn from_elements(dim: usize, elements: Vec<CMatrix>) -> Result<Self> {
        if elements.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: elements.len(),
            });
        }
        for e in &elements {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.nrows().max(e.ncols()),
                });
            }
            ensure_hermitian(e, BASIS_TOL)?;
        }
        let basis = Self { dim, elements };
        let v0 = identity(dim) * real(1.0 / (dim as f64).sqrt());
        if frobenius_norm(&(&basis.elements[0] - v0)) > BASIS_TOL {
            return Err(Error::Structure("first basis element must be I/sqrt(n)".into()));
        }
        let defect = basis.orthonormality_defect();
        if defect > BASIS_TOL {
            return Err(Error::Structure(format!(
                "basis is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of elements, `n^2`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    /// `max_ij |Tr(v_i v_j) - delta_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((hs_inner(a, b) - real(target)).norm());
            }
        }
        worst
    }

    /// Largest deviation from Hermiticity over all elements.
    pub fn hermiticity_defect(&self) -> f64 {
        self.elements
            .iter()
            .map(hermitian_deviation)
            .fold(0.0, f64::max)
    }
}

/// The 2x2 Pauli matrix `sigma_j` for `j = 0..=3` (`sigma_0 = I`).
pub fn pauli(j: usize) -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let entries = match j {
        0 => [l, o, o, l],
        1 => [o, l, l, o],
        2 => [o, -i, i, o],
        3 => [l, o, o, -l],
        _ => panic!("Pauli index {j} out of range"),
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

/// `{I, sigma_1, sigma_2, sigma_3} / sqrt(2)`.
pub fn build_pauli_basis() -> OperatorBasis {
    let scale = real(std::f64::consts::FRAC_1_SQRT_2);
    OperatorBasis {
        dim: 2,
        elements: (0..4).map(|j| pauli(j) * scale).collect(),
    }
}

/// Basis index of `sigma_{j_1} (x) ... (x) sigma_{j_k}`; the first factor is
/// the most significant base-4 digit.
pub fn tensor_index(factors: &[usize]) -> usize {
    factors.iter().fold(0, |acc, &j| {
        assert!(j < 4, "Pauli index {j} out of range");
        acc * 4 + j
    })
}

/// Inverse of [`tensor_index`] for `k` factors.
pub fn tensor_factors(mut index: usize, k: u32) -> Vec<usize> {
    let mut out = vec![0; k as usize];
    for slot in out.iter_mut().rev() {
        *slot = index % 4;
        index /= 4;
    }
    out
}

/// Normalised `k`-fold tensor products of Pauli matrices, `n = 2^k`.
pub fn build_tensor_pauli_basis(k: u32) -> Result<OperatorBasis> {
    build_tensor_pauli_basis_with_budget(k, BASIS_MEMORY_BUDGET)
}

pub fn build_tensor_pauli_basis_with_budget(k: u32, budget_bytes: u128) -> Result<OperatorBasis> {
    if k == 0 {
        return Err(Error::InvalidParameter("tensor factor count must be at least 1".into()));
    }
    // n^2 elements of n x n complex entries, n = 2^k
    let requested_bytes = 1u128
        .checked_shl(4 * k)
        .map(|e| e * std::mem::size_of::<Complex64>() as u128)
        .unwrap_or(u128::MAX);
    if k > 30 || requested_bytes > budget_bytes {
        return Err(Error::ResourceLimit {
            requested_bytes,
            budget_bytes,
        });
    }
    let n = 1usize << k;
    let scale = real(1.0 / (n as f64).sqrt());
    let paulis: Vec<CMatrix> = (0..4).map(pauli).collect();
    let elements = (0..n * n)
        .map(|idx| {
            let factors = tensor_factors(idx, k);
            let mut m = paulis[factors[0]].clone();
            for &f in &factors[1..] {
                m = kron(&m, &paulis[f]);
            }
            m * scale
        })
        .collect();
    Ok(OperatorBasis { dim: n, elements })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientKind {
    State,
    Effect,
}

/// Real coefficients of a state (`theta`) or an effect (`m`) in an
/// orthonormal Hermitian basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    kind: CoefficientKind,
    coeffs: Vec<f64>,
    dim: usize,
}

fn dim_from_len(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n == 0 || n * n != len {
        return Err(Error::InvalidParameter(format!(
            "coefficient length {len} is not a positive square"
        )));
    }
    Ok(n)
}

impl CoefficientVector {
    /// A state coefficient vector. `coeffs[0]` must equal `1/sqrt(n)` (unit
    /// trace) to within `1e-9` and is then pinned to that value exactly.
    /// Positivity is not checked here; see [`validate_state`].
    pub fn state(mut coeffs: Vec<f64>) -> Result<Self> {
        let dim = dim_from_len(coeffs.len())?;
        let theta0 = 1.0 / (dim as f64).sqrt();
        if (coeffs[0] - theta0).abs() > EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "theta_0 = {} but unit trace requires {theta0}",
                coeffs[0]
            )));
        }
        coeffs[0] = theta0;
        Ok(Self {
            kind: CoefficientKind::State,
            coeffs,
            dim,
        })
    }

    /// An effect coefficient vector. The eigenvalue range is not checked
    /// here; see [`validate_effect`].
    pub fn effect(coeffs: Vec<f64>) -> Result<Self> {
        let dim = dim_from_len(coeffs.len())?;
        Ok(Self {
            kind: CoefficientKind::Effect,
            coeffs,
            dim,
        })
    }

    pub fn new(kind: CoefficientKind, coeffs: Vec<f64>) -> Result<Self> {
        match kind {
            CoefficientKind::State => Self::state(coeffs),
            CoefficientKind::Effect => Self::effect(coeffs),
        }
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `sum_i c_i^2`; for a state this equals the purity `Tr rho^2`.
    pub fn squared_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// The rescaled effect coefficients `m_i / (m_0 sqrt(n))` for `i >= 1`,
    /// which put `M = m_0 sqrt(n) (I/n + sum m*_i v_i)` in state-like form.
    /// `None` for states or when `m_0 = 0`.
    pub fn rescaled_effect(&self) -> Option<Vec<f64>> {
        if self.kind != CoefficientKind::Effect || self.coeffs[0] == 0.0 {
            return None;
        }
        let s = self.coeffs[0] * (self.dim as f64).sqrt();
        Some(self.coeffs[1..].iter().map(|m| m / s).collect())
    }

    /// The other element `I - M` of the two-outcome POVM.
    pub fn complement(&self) -> Result<Self> {
        if self.kind != CoefficientKind::Effect {
            return Err(Error::InvalidEffect("complement is defined for effects only".into()));
        }
        let mut coeffs: Vec<f64> = self.coeffs.iter().map(|m| -m).collect();
        coeffs[0] += (self.dim as f64).sqrt();
        Self::effect(coeffs)
    }

    /// Qubit Bloch vector `theta` with `rho = (I + theta . sigma)/2`, for
    /// two-dimensional states and von Neumann-normalised effects.
    pub fn qubit_bloch(&self) -> Option<[f64; 3]> {
        if self.dim != 2 {
            return None;
        }
        let s = std::f64::consts::SQRT_2;
        Some([self.coeffs[1] * s, self.coeffs[2] * s, self.coeffs[3] * s])
    }
}

fn bloch_norm_sq(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Qubit state from its Bloch vector: coefficients
/// `(1/sqrt2, theta_1/sqrt2, theta_2/sqrt2, theta_3/sqrt2)`.
pub fn bloch_qubit_state(theta: [f64; 3]) -> Result<CoefficientVector> {
    let norm_sq = bloch_norm_sq(theta);
    if norm_sq > 1.0 + BASIS_TOL {
        return Err(Error::InvalidState(format!(
            "Bloch vector norm^2 {norm_sq} exceeds 1"
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CoefficientVector::state(vec![s, theta[0] * s, theta[1] * s, theta[2] * s])
}

/// Qubit effect `M = (I + m . sigma)/2`; a projection when `|m| = 1`.
pub fn bloch_qubit_effect(m: [f64; 3]) -> Result<CoefficientVector> {
    let norm_sq = bloch_norm_sq(m);
    if norm_sq > 1.0 + BASIS_TOL {
        return Err(Error::InvalidEffect(format!(
            "effect Bloch vector norm^2 {norm_sq} exceeds 1"
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CoefficientVector::effect(vec![s, m[0] * s, m[1] * s, m[2] * s])
}

/// `sum_i c_i v_i`.
pub fn reconstruct_matrix(c: &CoefficientVector, b: &OperatorBasis) -> Result<CMatrix> {
    if c.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: c.len(),
        });
    }
    let n = b.dim();
    let mut out = CMatrix::zeros(n, n);
    for (ci, vi) in c.coeffs().iter().zip(b.elements()) {
        if *ci != 0.0 {
            out += vi * real(*ci);
        }
    }
    Ok(out)
}

/// Coefficients `c_i = Tr(M v_i)` of a Hermitian matrix.
pub fn project_raw(m: &CMatrix, b: &OperatorBasis) -> Result<Vec<f64>> {
    if m.nrows() != b.dim() || m.ncols() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: m.nrows(),
        });
    }
    ensure_hermitian(m, 1e-10)?;
    Ok(b.elements().iter().map(|v| hs_inner(v, m).re).collect())
}

/// Inverse of [`reconstruct_matrix`].
pub fn project_coefficients(
    m: &CMatrix,
    b: &OperatorBasis,
    kind: CoefficientKind,
) -> Result<CoefficientVector> {
    CoefficientVector::new(kind, project_raw(m, b)?)
}

fn expect_kind(c: &CoefficientVector, kind: CoefficientKind) -> Result<()> {
    if c.kind() == kind {
        return Ok(());
    }
    Err(match kind {
        CoefficientKind::State => Error::InvalidState("expected a state coefficient vector".into()),
        CoefficientKind::Effect => {
            Error::InvalidEffect("expected an effect coefficient vector".into())
        }
    })
}

/// Outcome probability `p = sum_i m_i theta_i = m_0/sqrt(n) + d`.
pub fn measurement_probability(
    state: &CoefficientVector,
    effect: &CoefficientVector,
) -> Result<f64> {
    expect_kind(state, CoefficientKind::State)?;
    expect_kind(effect, CoefficientKind::Effect)?;
    if state.len() != effect.len() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            found: effect.len(),
        });
    }
    Ok(state
        .coeffs()
        .iter()
        .zip(effect.coeffs())
        .map(|(t, m)| t * m)
        .sum())
}

/// The overlap `d = sum_{i>=1} m_i theta_i`.
pub fn overlap_d(state: &CoefficientVector, effect: &CoefficientVector) -> f64 {
    state.coeffs()[1..]
        .iter()
        .zip(&effect.coeffs()[1..])
        .map(|(t, m)| t * m)
        .sum()
}

/// Outcome of [`validate_state`] / [`validate_effect`].
#[derive(Clone, Debug, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub kind: CoefficientKind,
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub trace: f64,
    /// All eigenvalues within `1e-9` of 0 or 1.
    pub von_neumann: bool,
    /// Number of eigenvalues above `1e-9`.
    pub rank: usize,
    pub issues: Vec<String>,
}

fn spectrum_report(
    c: &CoefficientVector,
    b: &OperatorBasis,
    kind: CoefficientKind,
) -> Result<ValidityReport> {
    let m = reconstruct_matrix(c, b)?;
    let eigenvalues = hermitian_eigen(&m).values;
    let min_eigenvalue = eigenvalues[0];
    let max_eigenvalue = *eigenvalues.last().unwrap();
    let von_neumann = eigenvalues
        .iter()
        .all(|&e| e.abs() <= EIGEN_TOL || (e - 1.0).abs() <= EIGEN_TOL);
    let rank = eigenvalues.iter().filter(|&&e| e > EIGEN_TOL).count();
    let mut issues = Vec::new();
    if c.kind() != kind {
        issues.push(format!("coefficient vector is tagged {:?}", c.kind()));
    }
    if min_eigenvalue < -EIGEN_TOL {
        issues.push(format!("negative eigenvalue {min_eigenvalue}"));
    }
    if kind == CoefficientKind::Effect && max_eigenvalue > 1.0 + EIGEN_TOL {
        issues.push(format!("eigenvalue {max_eigenvalue} above 1"));
    }
    let tr = trace(&m).re;
    if kind == CoefficientKind::State && (tr - 1.0).abs() > EIGEN_TOL {
        issues.push(format!("trace {tr} differs from 1"));
    }
    Ok(ValidityReport {
        valid: issues.is_empty(),
        kind,
        eigenvalues,
        min_eigenvalue,
        max_eigenvalue,
        trace: tr,
        von_neumann,
        rank,
        issues,
    })
}

/// Positivity and unit-trace check of a state.
pub fn validate_state(c: &CoefficientVector, b: &OperatorBasis) -> Result<ValidityReport> {
    spectrum_report(c, b, CoefficientKind::State)
}

/// Eigenvalue-range check of an effect; flags projections.
pub fn validate_effect(c: &CoefficientVector, b: &OperatorBasis) -> Result<ValidityReport> {
    spectrum_report(c, b, CoefficientKind::Effect)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSummary {
    /// `sum_k mu_k^2`.
    pub purity: f64,
    /// The multiplicity `K` (see [`spectral_summary`]).
    pub min_multiplicity: usize,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Whether all nonzero eigenvalues coincide.
    pub flat: bool,
}

/// Spectrum, purity and multiplicity of a state.
///
/// For a spectrum that is flat on its support, `K` is the rank. Otherwise `K`
/// is the multiplicity of the largest eigenvalue, which still satisfies
/// `purity <= 1/K`.
pub fn spectral_summary(state: &CoefficientVector, b: &OperatorBasis) -> Result<SpectralSummary> {
    let report = validate_state(state, b)?;
    if !report.valid {
        return Err(Error::InvalidState(report.issues.join("; ")));
    }
    let mut mu = report.eigenvalues;
    mu.reverse();
    let purity: f64 = mu.iter().map(|m| m * m).sum();
    let support: Vec<f64> = mu.iter().copied().filter(|&m| m > EIGEN_TOL).collect();
    let top = support[0];
    let flat = support.iter().all(|&m| (m - top).abs() <= EIGEN_TOL);
    let k = if flat {
        support.len()
    } else {
        support.iter().filter(|&&m| (m - top).abs() <= EIGEN_TOL).count()
    };
    if purity > 1.0 / k as f64 + 1e-12 {
        return Err(Error::InvalidState(format!(
            "purity {purity} violates the multiplicity bound 1/{k}"
        )));
    }
    Ok(SpectralSummary {
        purity,
        min_multiplicity: k,
        eigenvalues: mu,
        flat,
    })
}

/// Algebraic type of a subalgebra block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Commutative, isomorphic to `C^k`.
    PowerOfC(usize),
    /// Isomorphic to the full matrix algebra `M_m`.
    FullMatrix(usize),
}

impl BlockKind {
    /// Number of traceless basis elements a block of this kind holds.
    pub fn traceless_dim(self) -> usize {
        match self {
            BlockKind::PowerOfC(k) => k.saturating_sub(1),
            BlockKind::FullMatrix(m) => (m * m).saturating_sub(1),
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        let tag = tag.trim();
        let (head, rest) = tag.split_at(tag.chars().next().map_or(0, char::len_utf8));
        let size: usize = rest
            .trim_start_matches('^')
            .parse()
            .map_err(|_| Error::Spec(format!("bad block kind tag {tag:?}")))?;
        match head {
            "C" | "c" => Ok(BlockKind::PowerOfC(size)),
            "M" | "m" => Ok(BlockKind::FullMatrix(size)),
            _ => Err(Error::Spec(format!("bad block kind tag {tag:?}"))),
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockKind::PowerOfC(k) => write!(f, "C{k}"),
            BlockKind::FullMatrix(m) => write!(f, "M{m}"),
        }
    }
}

/// A partition of the traceless basis indices `1..n^2` into blocks, each of
/// which (together with the identity) spans a subalgebra of `M_n`. Block
/// indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubalgebraDecomposition {
    dim: usize,
    blocks: Vec<Vec<usize>>,
    kinds: Vec<Option<BlockKind>>,
    #[serde(skip)]
    pi: Vec<Option<usize>>,
}

pub const PRESET_NAMES: [&str; 3] = ["M2-pauli", "M4-C2", "M4-mixed"];

impl SubalgebraDecomposition {
    /// Builds a decomposition; only index ranges are checked here. Use
    /// [`validate_decomposition`] for the algebraic invariants.
    pub fn new(dim: usize, blocks: Vec<Vec<usize>>, kinds: Vec<Option<BlockKind>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter("dimension must be at least 2".into()));
        }
        if kinds.len() != blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: blocks.len(),
                found: kinds.len(),
            });
        }
        let total = dim * dim;
        let mut pi = vec![None; total];
        for (j, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidParameter(format!("block {j} is empty")));
            }
            for &i in block {
                if i == 0 || i >= total {
                    return Err(Error::InvalidParameter(format!(
                        "block {j} index {i} outside 1..{}",
                        total - 1
                    )));
                }
                pi[i].get_or_insert(j);
            }
        }
        Ok(Self {
            dim,
            blocks,
            kinds,
            pi,
        })
    }

    /// Shipped decompositions: `M2-pauli` (the three qubit Pauli
    /// directions), `M4-C2` (fifteen commutative blocks `span{v_0, v_i}`) and
    /// `M4-mixed` (two `M_2` and three `C^4` blocks of two-qubit Paulis).
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "M2-pauli" => Self::new(
                2,
                vec![vec![1], vec![2], vec![3]],
                vec![Some(BlockKind::PowerOfC(2)); 3],
            ),
            "M4-C2" => Self::new(
                4,
                (1..16).map(|i| vec![i]).collect(),
                vec![Some(BlockKind::PowerOfC(2)); 15],
            ),
            "M4-mixed" => {
                let t = |pairs: [[usize; 2]; 3]| -> Vec<usize> {
                    pairs.iter().map(|p| tensor_index(p)).collect()
                };
                Self::new(
                    4,
                    vec![
                        t([[0, 1], [0, 2], [0, 3]]),
                        t([[1, 0], [2, 0], [3, 0]]),
                        t([[1, 1], [2, 2], [3, 3]]),
                        t([[1, 2], [2, 3], [3, 1]]),
                        t([[1, 3], [3, 2], [2, 1]]),
                    ],
                    vec![
                        Some(BlockKind::FullMatrix(2)),
                        Some(BlockKind::FullMatrix(2)),
                        Some(BlockKind::PowerOfC(4)),
                        Some(BlockKind::PowerOfC(4)),
                        Some(BlockKind::PowerOfC(4)),
                    ],
                )
            }
            _ => Err(Error::Spec(format!(
                "unknown decomposition preset {name:?} (known: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, j: usize) -> Result<&[usize]> {
        self.blocks
            .get(j)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidParameter(format!("block index {j} out of range")))
    }

    pub fn kind(&self, j: usize) -> Option<BlockKind> {
        self.kinds.get(j).copied().flatten()
    }

    pub fn kinds(&self) -> &[Option<BlockKind>] {
        &self.kinds
    }

    /// The block `pi_i` containing basis index `i` (first block on overlap).
    pub fn block_of(&self, i: usize) -> Option<usize> {
        if self.pi.len() != self.dim * self.dim {
            // deserialised without the lookup table
            return self.blocks.iter().position(|b| b.contains(&i));
        }
        self.pi.get(i).copied().flatten()
    }

    /// Block sums `c_j = sum_{l in block j} theta_l m_l`.
    pub fn block_overlaps(&self, state: &CoefficientVector, effect: &CoefficientVector) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&l| state.coeffs()[l] * effect.coeffs()[l]).sum())
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub valid: bool,
    pub disjoint: bool,
    pub covers: bool,
    pub orthogonal: bool,
    pub closed: bool,
    pub max_cross_overlap: f64,
    pub max_closure_residual: f64,
    pub block_count: usize,
    /// Common subalgebra dimension `s` (identity included), when uniform.
    pub uniform_dimension: Option<usize>,
    /// `(s - 1) N_s = n^2 - 1`, when `s` is uniform.
    pub dimension_count_holds: Option<bool>,
    pub issues: Vec<String>,
}

fn span_residual(target: &CMatrix, span: &[&CMatrix]) -> f64 {
    let mut rest = target.clone();
    for v in span {
        let coeff = hs_inner(v, target);
        rest -= *v * coeff;
    }
    frobenius_norm(&rest)
}

/// Checks disjointness, coverage, orthogonality of traceless parts across
/// blocks, closure of each block under products, and the dimension count.
pub fn validate_decomposition(
    d: &SubalgebraDecomposition,
    b: &OperatorBasis,
) -> Result<DecompositionReport> {
    if d.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: d.dim(),
        });
    }
    let mut issues = Vec::new();
    let total = b.len();

    let mut seen = BTreeSet::new();
    let mut disjoint = true;
    for (j, block) in d.blocks().iter().enumerate() {
        for &i in block {
            if !seen.insert(i) {
                disjoint = false;
                issues.push(format!("index {i} appears again in block {j}"));
            }
        }
    }
    let missing: Vec<usize> = (1..total).filter(|i| !seen.contains(i)).collect();
    let covers = missing.is_empty();
    if !covers {
        issues.push(format!("indices not covered: {missing:?}"));
    }

    let n = b.dim() as f64;
    let traceless = |i: usize| -> CMatrix {
        let v = b.element(i);
        v - identity(b.dim()) * (trace(v) / n)
    };
    let mut max_cross_overlap = 0.0_f64;
    for (j, bj) in d.blocks().iter().enumerate() {
        for bk in d.blocks().iter().skip(j + 1) {
            for &x in bj {
                for &y in bk {
                    if x == y {
                        continue;
                    }
                    let o = hs_inner(&traceless(x), &traceless(y)).norm();
                    max_cross_overlap = max_cross_overlap.max(o);
                }
            }
        }
    }
    let orthogonal = max_cross_overlap < EIGEN_TOL;
    if !orthogonal {
        issues.push(format!("traceless parts overlap across blocks ({max_cross_overlap:e})"));
    }

    let mut max_closure_residual = 0.0_f64;
    for (j, block) in d.blocks().iter().enumerate() {
        let span: Vec<&CMatrix> = std::iter::once(0)
            .chain(block.iter().copied())
            .map(|i| b.element(i))
            .collect();
        let mut block_residual = 0.0_f64;
        for x in &span {
            for y in &span {
                let prod = *x * *y;
                block_residual = block_residual.max(span_residual(&prod, &span));
            }
        }
        if block_residual >= EIGEN_TOL {
            issues.push(format!("block {j} is not closed under products ({block_residual:e})"));
        }
        if let Some(kind) = d.kind(j) {
            if kind.traceless_dim() != block.len() {
                issues.push(format!(
                    "block {j} tagged {kind} but holds {} traceless elements",
                    block.len()
                ));
            }
            if let BlockKind::PowerOfC(_) = kind {
                let noncommuting = span.iter().any(|x| {
                    span.iter()
                        .any(|y| frobenius_norm(&(*x * *y - *y * *x)) >= EIGEN_TOL)
                });
                if noncommuting {
                    issues.push(format!("block {j} tagged {kind} is not commutative"));
                }
            }
        }
        max_closure_residual = max_closure_residual.max(block_residual);
    }
    let closed = max_closure_residual < EIGEN_TOL;

    let first = d.blocks().first().map_or(0, Vec::len);
    let uniform_dimension = d
        .blocks()
        .iter()
        .all(|bl| bl.len() == first)
        .then_some(first + 1);
    let dimension_count_holds = uniform_dimension.map(|s| (s - 1) * d.num_blocks() == total - 1);
    if dimension_count_holds == Some(false) {
        issues.push("dimension count (s-1) N_s = n^2 - 1 fails".into());
    }

    Ok(DecompositionReport {
        valid: issues.is_empty(),
        disjoint,
        covers,
        orthogonal,
        closed,
        max_cross_overlap,
        max_closure_residual,
        block_count: d.num_blocks(),
        uniform_dimension,
        dimension_count_holds,
        issues,
    })
}

/// The tensor-Pauli basis matching a decomposition's dimension.
pub fn basis_for_dim(dim: usize) -> Result<OperatorBasis> {
    if dim == 2 {
        return Ok(build_pauli_basis());
    }
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension {dim} is not a power of two; supply an explicit basis"
        )));
    }
    build_tensor_pauli_basis(dim.trailing_zeros())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const S2: f64 = std::f64::consts::SQRT_2;

    fn diag(entries: &[f64]) -> CMatrix {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = real(*e);
        }
        m
    }

    #[test]
    fn pauli_basis_is_orthonormal() {
        let b = build_pauli_basis();
        assert_abs_diff_eq!(hs_inner(b.element(1), b.element(2)).norm(), 0.0);
        assert_abs_diff_eq!(hs_inner(b.element(1), b.element(1)).re, 1.0, epsilon = 1e-15);
        let v0 = identity(2) * real(1.0 / S2);
        assert!(frobenius_norm(&(b.element(0) - v0)) < 1e-15);
        assert!(b.orthonormality_defect() < BASIS_TOL);
    }

    #[test]
    fn projector_onto_up_state() {
        let b = build_pauli_basis();
        let c = CoefficientVector::state(vec![1.0 / S2, 0.0, 0.0, 1.0 / S2]).unwrap();
        let m = reconstruct_matrix(&c, &b).unwrap();
        assert!(frobenius_norm(&(m - diag(&[1.0, 0.0]))) < 1e-15);
    }

    #[test]
    fn tensor_basis_k1_matches_pauli_basis() {
        let a = build_pauli_basis();
        let t = build_tensor_pauli_basis(1).unwrap();
        for (x, y) in a.elements().iter().zip(t.elements()) {
            assert!(frobenius_norm(&(x - y)) < 1e-15);
        }
    }

    #[test]
    fn tensor_basis_k2_orthonormal_with_half_spectra() {
        let b = build_tensor_pauli_basis(2).unwrap();
        assert_eq!(b.len(), 16);
        // exhaustive pairwise trace check
        for i in 0..16 {
            for j in 0..16 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(
                    hs_inner(b.element(i), b.element(j)).re,
                    expected,
                    epsilon = 1e-14
                );
            }
        }
        for i in 0..16 {
            for e in hermitian_eigen(b.element(i)).values {
                assert_abs_diff_eq!(e.abs(), 0.5, epsilon = 1e-12);
            }
        }
        assert!(OperatorBasis::from_elements(4, b.elements().to_vec()).is_ok());
    }

    #[test]
    fn tensor_basis_respects_memory_budget() {
        let err = build_tensor_pauli_basis_with_budget(3, 1000).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit { .. }));
        assert!(matches!(
            build_tensor_pauli_basis(12).unwrap_err(),
            Error::ResourceLimit { .. }
        ));
        assert!(build_tensor_pauli_basis(0).is_err());
    }

    #[test]
    fn tensor_index_round_trip() {
        assert_eq!(tensor_index(&[1, 2]), 6);
        assert_eq!(tensor_factors(6, 2), vec![1, 2]);
        assert_eq!(tensor_factors(tensor_index(&[3, 0, 2]), 3), vec![3, 0, 2]);
    }

    #[test]
    fn reconstruction_examples() {
        let b = build_pauli_basis();
        let mixed = CoefficientVector::state(vec![1.0 / S2, 0.0, 0.0, 0.0]).unwrap();
        let m = reconstruct_matrix(&mixed, &b).unwrap();
        assert!(frobenius_norm(&(m - identity(2) * real(0.5))) < 1e-15);

        let plus_x = bloch_qubit_state([1.0, 0.0, 0.0]).unwrap();
        let m = reconstruct_matrix(&plus_x, &b).unwrap();
        let expected = (identity(2) + pauli(1)) * real(0.5);
        assert!(frobenius_norm(&(m - expected)) < 1e-15);

        let full = CoefficientVector::effect(vec![S2, 0.0, 0.0, 0.0]).unwrap();
        let m = reconstruct_matrix(&full, &b).unwrap();
        assert!(frobenius_norm(&(m - identity(2))) < 1e-15);

        let wrong = CoefficientVector::state(vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            reconstruct_matrix(&wrong, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let b = build_pauli_basis();
        let c = project_coefficients(&identity(2), &b, CoefficientKind::Effect).unwrap();
        assert_abs_diff_eq!(c.coeffs()[0], S2, epsilon = 1e-15);
        assert!(c.coeffs()[1..].iter().all(|x| x.abs() < 1e-15));

        let up = diag(&[1.0, 0.0]);
        let c = project_coefficients(&up, &b, CoefficientKind::State).unwrap();
        for (x, y) in c.coeffs().iter().zip([1.0 / S2, 0.0, 0.0, 1.0 / S2]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }

        let b4 = build_tensor_pauli_basis(2).unwrap();
        let j = 7;
        let p = identity(4) * real(0.5) + b4.element(j);
        let c = project_coefficients(&p, &b4, CoefficientKind::Effect).unwrap();
        for (i, x) in c.coeffs().iter().enumerate() {
            let expected = if i == 0 || i == j { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*x, expected, epsilon = 1e-14);
        }

        let mut skew = CMatrix::zeros(2, 2);
        skew[(0, 1)] = real(1.0);
        assert!(matches!(
            project_coefficients(&skew, &b, CoefficientKind::Effect),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn bloch_state_bounds() {
        let mixed = bloch_qubit_state([0.0; 3]).unwrap();
        assert_abs_diff_eq!(mixed.squared_norm(), 0.5, epsilon = 1e-15);
        let pure = bloch_qubit_state([1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(pure.squared_norm(), 1.0, epsilon = 1e-15);
        assert!(matches!(
            bloch_qubit_state([0.8, 0.7, 0.0]),
            Err(Error::InvalidState(_))
        ));
        assert_abs_diff_eq!(pure.qubit_bloch().unwrap()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn probability_examples() {
        let identity_effect = CoefficientVector::effect(vec![S2, 0.0, 0.0, 0.0]).unwrap();
        let proj_x = bloch_qubit_effect([1.0, 0.0, 0.0]).unwrap();
        let plus_x = bloch_qubit_state([1.0, 0.0, 0.0]).unwrap();
        let mixed = bloch_qubit_state([0.0; 3]).unwrap();
        let any = bloch_qubit_state([0.3, -0.4, 0.5]).unwrap();
        assert_abs_diff_eq!(measurement_probability(&any, &identity_effect).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(measurement_probability(&plus_x, &proj_x).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(measurement_probability(&mixed, &proj_x).unwrap(), 0.5, epsilon = 1e-15);
        assert!(measurement_probability(&proj_x, &plus_x).is_err());
    }

    #[test]
    fn validity_reports() {
        let b = build_pauli_basis();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let too_long = CoefficientVector::state(vec![s, 1.2 * s, 0.0, 0.0]).unwrap();
        let r = validate_state(&too_long, &b).unwrap();
        assert!(!r.valid);
        assert_abs_diff_eq!(r.min_eigenvalue, -0.1, epsilon = 1e-12);

        let proj = bloch_qubit_effect([1.0, 0.0, 0.0]).unwrap();
        let r = validate_effect(&proj, &b).unwrap();
        assert!(r.valid && r.von_neumann);
        assert_eq!(r.rank, 1);

        let b4 = build_tensor_pauli_basis(2).unwrap();
        let p = identity(4) * real(0.5) + b4.element(5);
        let e = project_coefficients(&p, &b4, CoefficientKind::Effect).unwrap();
        let r = validate_effect(&e, &b4).unwrap();
        assert!(r.valid && r.von_neumann);
        assert_eq!(r.rank, 2);

        let soft = bloch_qubit_effect([0.5, 0.0, 0.0]).unwrap();
        let r = validate_effect(&soft, &b).unwrap();
        assert!(r.valid && !r.von_neumann);
    }

    #[test]
    fn spectral_summary_examples() {
        let b = build_pauli_basis();
        let pure = bloch_qubit_state([0.0, 0.6, 0.8]).unwrap();
        let s = spectral_summary(&pure, &b).unwrap();
        assert_abs_diff_eq!(s.purity, 1.0, epsilon = 1e-12);
        assert_eq!(s.min_multiplicity, 1);

        let b4 = build_tensor_pauli_basis(2).unwrap();
        let mut c = vec![0.0; 16];
        c[0] = 0.5;
        let mixed = CoefficientVector::state(c).unwrap();
        let s = spectral_summary(&mixed, &b4).unwrap();
        assert_abs_diff_eq!(s.purity, 0.25, epsilon = 1e-12);
        assert_eq!(s.min_multiplicity, 4);

        // rho = P/2 with P = I/2 + v_j of rank two
        let p = identity(4) * real(0.5) + b4.element(9);
        let rho = project_coefficients(&(p * real(0.5)), &b4, CoefficientKind::State).unwrap();
        let s = spectral_summary(&rho, &b4).unwrap();
        assert_abs_diff_eq!(s.purity, 0.5, epsilon = 1e-12);
        assert_eq!(s.min_multiplicity, 2);
        assert!(s.flat);

        let bad = CoefficientVector::state(vec![0.5_f64.sqrt(), 0.9, 0.0, 0.0]).unwrap();
        assert!(spectral_summary(&bad, &b).is_err());
    }

    #[test]
    fn spectral_summary_non_flat_uses_top_multiplicity() {
        let b = build_pauli_basis();
        let s = spectral_summary(&bloch_qubit_state([0.0, 0.0, 0.5]).unwrap(), &b).unwrap();
        assert!(!s.flat);
        assert_eq!(s.min_multiplicity, 1);
        assert!(s.purity <= 1.0);
    }

    #[test]
    fn preset_decompositions_are_valid() {
        let b4 = build_tensor_pauli_basis(2).unwrap();
        let ex1 = SubalgebraDecomposition::preset("M4-C2").unwrap();
        let r = validate_decomposition(&ex1, &b4).unwrap();
        assert!(r.valid, "{:?}", r.issues);
        assert_eq!(r.uniform_dimension, Some(2));
        assert_eq!(r.block_count, 15);
        assert_eq!(r.dimension_count_holds, Some(true));

        let ex2 = SubalgebraDecomposition::preset("M4-mixed").unwrap();
        let r = validate_decomposition(&ex2, &b4).unwrap();
        assert!(r.valid, "{:?}", r.issues);
        assert_eq!(r.uniform_dimension, Some(4));
        assert_eq!(r.block_count, 5);
        assert_eq!(r.dimension_count_holds, Some(true));

        let q = SubalgebraDecomposition::preset("M2-pauli").unwrap();
        assert!(validate_decomposition(&q, &build_pauli_basis()).unwrap().valid);
        assert!(SubalgebraDecomposition::preset("nope").is_err());
    }

    #[test]
    fn overlapping_blocks_are_rejected() {
        let b4 = build_tensor_pauli_basis(2).unwrap();
        let mut blocks: Vec<Vec<usize>> = (1..16).map(|i| vec![i]).collect();
        blocks[0].push(7);
        let d = SubalgebraDecomposition::new(4, blocks, vec![None; 15]).unwrap();
        let r = validate_decomposition(&d, &b4).unwrap();
        assert!(!r.valid);
        assert!(!r.disjoint);
    }

    #[test]
    fn non_closed_block_is_detected() {
        // sigma_1 (x) sigma_0 and sigma_0 (x) sigma_1 multiply to sigma_1 (x) sigma_1
        let b4 = build_tensor_pauli_basis(2).unwrap();
        let mut blocks = vec![vec![tensor_index(&[1, 0]), tensor_index(&[0, 1])]];
        for i in 1..16 {
            if !blocks[0].contains(&i) {
                blocks.push(vec![i]);
            }
        }
        let n = blocks.len();
        let d = SubalgebraDecomposition::new(4, blocks, vec![None; n]).unwrap();
        let r = validate_decomposition(&d, &b4).unwrap();
        assert!(!r.closed);
        assert!(!r.valid);
    }

    #[test]
    fn block_kind_tags() {
        assert_eq!(BlockKind::parse("C4").unwrap(), BlockKind::PowerOfC(4));
        assert_eq!(BlockKind::parse("M2").unwrap(), BlockKind::FullMatrix(2));
        assert_eq!(BlockKind::parse("C^2").unwrap(), BlockKind::PowerOfC(2));
        assert!(BlockKind::parse("X3").is_err());
        assert_eq!(BlockKind::FullMatrix(2).to_string(), "M2");
    }

    #[test]
    fn complement_and_rescaled_view() {
        let m = bloch_qubit_effect([0.0, 0.6, 0.0]).unwrap();
        let c = m.complement().unwrap();
        assert_abs_diff_eq!(c.coeffs()[0], S2 - m.coeffs()[0], epsilon = 1e-15);
        let star = m.rescaled_effect().unwrap();
        // M = (I + 0.6 sigma_2)/2 = I/2 + 0.6 v_2 / sqrt2 and m0 sqrt2 = 1
        assert_abs_diff_eq!(star[1], 0.6 / S2, epsilon = 1e-15);
        assert!(bloch_qubit_state([0.0; 3]).unwrap().complement().is_err());
    }
}
