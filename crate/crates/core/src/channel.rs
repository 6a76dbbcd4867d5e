//! Qubit Pauli channels along rotated axes and generalized Pauli channels
//! over complementary subalgebra decompositions.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::basis::{
    basis_for_dim, reconstruct_matrix, validate_decomposition, validate_effect, validate_state,
    CoefficientKind, CoefficientVector, OperatorBasis, SubalgebraDecomposition,
};
use crate::linalg::{hs_inner, identity, real, trace, CMatrix};
use crate::{Error, Result};

/// Exactness slack for the CPTP inequalities.
pub const CPTP_TOL: f64 = 1e-12;

/// Qubit Pauli channel contracting the Bloch ball by `lambdas` along the axes
/// of the rotation `R_z(phi_1) R_y(phi_2) R_x(phi_3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitPauliChannel {
    pub lambdas: [f64; 3],
    pub angles: [f64; 3],
}

impl QubitPauliChannel {
    pub fn new(lambdas: [f64; 3], angles: [f64; 3]) -> Self {
        Self { lambdas, angles }
    }

    /// Contractions along the Pauli axes (all angles zero).
    pub fn aligned(lambdas: [f64; 3]) -> Self {
        Self::new(lambdas, [0.0; 3])
    }

    pub fn identity() -> Self {
        Self::aligned([1.0; 3])
    }

    pub fn cptp(&self) -> CptpReport {
        validate_cptp(&self.lambdas, 2)
    }
}

pub fn rot_z(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about `y` with the sign convention `[[c, 0, -s], [0, 1, 0], [s, 0, c]]`.
pub fn rot_y(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

pub fn rot_x(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// `R = R_z(phi_1) R_y(phi_2) R_x(phi_3)`.
pub fn axes_rotation(angles: [f64; 3]) -> Matrix3<f64> {
    rot_z(angles[0]) * rot_y(angles[1]) * rot_x(angles[2])
}

/// The real 3x3 matrix `A` with `theta -> A theta` on Bloch vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineChannelMatrix(pub Matrix3<f64>);

impl AffineChannelMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.0.singular_values().max()
    }
}

/// `A = R Lambda R^-1` for the channel's axes and contractions.
pub fn qubit_affine_matrix(ch: &QubitPauliChannel) -> AffineChannelMatrix {
    let r = axes_rotation(ch.angles);
    let lambda = Matrix3::from_diagonal(&Vector3::from(ch.lambdas));
    // R is orthogonal, so R^-1 = R^T
    AffineChannelMatrix(r * lambda * r.transpose())
}

/// Output Bloch vector `A theta`.
pub fn apply_qubit(ch: &QubitPauliChannel, theta: &Vector3<f64>) -> Result<Vector3<f64>> {
    if theta.norm_squared() > 1.0 + CPTP_TOL {
        return Err(Error::InvalidState(format!(
            "Bloch vector norm {} exceeds 1",
            theta.norm()
        )));
    }
    Ok(qubit_affine_matrix(ch).0 * theta)
}

/// Probability `(1 + m . A theta)/2` of the `M = (I + m . sigma)/2` outcome.
pub fn qubit_outcome_probability(
    ch: &QubitPauliChannel,
    theta: &Vector3<f64>,
    m: &Vector3<f64>,
) -> Result<f64> {
    if m.norm_squared() > 1.0 + CPTP_TOL {
        return Err(Error::InvalidEffect(format!(
            "effect Bloch vector norm {} exceeds 1",
            m.norm()
        )));
    }
    let out = apply_qubit(ch, theta)?;
    Ok(0.5 * (1.0 + m.dot(&out)))
}

#[derive(Clone, Debug, Serialize)]
pub struct CptpReport {
    pub valid: bool,
    pub dim: usize,
    pub sum: f64,
    /// Violated inequalities, human readable.
    pub violations: Vec<String>,
    /// Inequalities that hold with equality (within `1e-12`).
    pub active: Vec<String>,
    pub caveat: Option<String>,
}

/// Checks `1 + n lambda_i >= sum_j lambda_j >= -1/(n-1)` and `|lambda_i| <= 1`.
pub fn validate_cptp(lambdas: &[f64], n: usize) -> CptpReport {
    let sum: f64 = lambdas.iter().sum();
    let mut violations = Vec::new();
    let mut active = Vec::new();
    let nf = n as f64;
    for (i, &l) in lambdas.iter().enumerate() {
        let lhs = 1.0 + nf * l;
        if lhs < sum - CPTP_TOL {
            violations.push(format!("1 + {n}*lambda_{i} = {lhs} < sum lambda = {sum}"));
        } else if (lhs - sum).abs() <= CPTP_TOL {
            active.push(format!("1 + {n}*lambda_{i} = sum lambda = {sum}"));
        }
        if l.abs() > 1.0 + CPTP_TOL {
            violations.push(format!("|lambda_{i}| = {} > 1", l.abs()));
        } else if (l.abs() - 1.0).abs() <= CPTP_TOL {
            active.push(format!("|lambda_{i}| = 1"));
        }
    }
    let floor = if n > 1 { -1.0 / (nf - 1.0) } else { f64::NEG_INFINITY };
    if sum < floor - CPTP_TOL {
        violations.push(format!("sum lambda = {sum} < -1/(n-1) = {floor}"));
    } else if (sum - floor).abs() <= CPTP_TOL {
        active.push(format!("sum lambda = -1/(n-1) = {floor}"));
    }
    CptpReport {
        valid: violations.is_empty(),
        dim: n,
        sum,
        violations,
        active,
        caveat: None,
    }
}

/// [`validate_cptp`] for a decomposition's dimension, noting when block
/// types differ (the inequalities are stated for blocks of equal type).
pub fn validate_cptp_for(d: &SubalgebraDecomposition, lambdas: &[f64]) -> CptpReport {
    let mut report = validate_cptp(lambdas, d.dim());
    if lambdas.len() != d.num_blocks() {
        report.valid = false;
        report.violations.push(format!(
            "{} lambdas for {} blocks",
            lambdas.len(),
            d.num_blocks()
        ));
    }
    let first_len = d.blocks().first().map_or(0, Vec::len);
    let mixed_sizes = d.blocks().iter().any(|b| b.len() != first_len);
    let first_kind = d.kind(0);
    let mixed_kinds = (0..d.num_blocks()).any(|j| d.kind(j) != first_kind);
    if mixed_sizes || mixed_kinds {
        report.caveat = Some(
            "blocks are not all of the same algebraic type; the inequalities are applied as written"
                .into(),
        );
    }
    report
}

/// Channel `E(A) = (1 - sum lambda_i) Tr(A)/n I + sum lambda_i E_i(A)`.
#[derive(Clone, Debug)]
pub struct GeneralizedPauliChannel {
    decomposition: SubalgebraDecomposition,
    basis: OperatorBasis,
    lambdas: Vec<f64>,
}

impl GeneralizedPauliChannel {
    /// Uses the tensor-Pauli basis of the decomposition's dimension.
    pub fn new(decomposition: SubalgebraDecomposition, lambdas: Vec<f64>) -> Result<Self> {
        let basis = basis_for_dim(decomposition.dim())?;
        Self::with_basis(decomposition, basis, lambdas)
    }

    pub fn with_basis(
        decomposition: SubalgebraDecomposition,
        basis: OperatorBasis,
        lambdas: Vec<f64>,
    ) -> Result<Self> {
        if lambdas.len() != decomposition.num_blocks() {
            return Err(Error::DimensionMismatch {
                expected: decomposition.num_blocks(),
                found: lambdas.len(),
            });
        }
        let report = validate_decomposition(&decomposition, &basis)?;
        if !report.valid {
            return Err(Error::Structure(report.issues.join("; ")));
        }
        Ok(Self {
            decomposition,
            basis,
            lambdas,
        })
    }

    /// The qubit channel with contractions along the Pauli axes.
    pub fn qubit(lambdas: [f64; 3]) -> Result<Self> {
        Self::new(SubalgebraDecomposition::preset("M2-pauli")?, lambdas.to_vec())
    }

    pub fn decomposition(&self) -> &SubalgebraDecomposition {
        &self.decomposition
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Same decomposition, different contractions.
    pub fn with_lambdas(&self, lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() != self.lambdas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lambdas.len(),
                found: lambdas.len(),
            });
        }
        Ok(Self {
            lambdas,
            ..self.clone()
        })
    }

    pub fn cptp(&self) -> CptpReport {
        validate_cptp_for(&self.decomposition, &self.lambdas)
    }

    fn check_operand(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: m.nrows(),
            });
        }
        Ok(())
    }

    fn check_coeffs(&self, c: &CoefficientVector) -> Result<()> {
        if c.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                found: c.len(),
            });
        }
        Ok(())
    }
}

/// Trace-preserving projection onto block `i` of the decomposition:
/// `E_i(M) = Tr(M)/n I + sum_{l in block i} Tr(M v_l) v_l`.
pub fn conditional_expectation(
    d: &SubalgebraDecomposition,
    b: &OperatorBasis,
    i: usize,
    m: &CMatrix,
) -> Result<CMatrix> {
    let block = d.block(i)?;
    if m.nrows() != b.dim() || d.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: m.nrows(),
        });
    }
    let n = b.dim();
    let mut out = identity(n) * (trace(m) / real(n as f64));
    for &l in block {
        let v = b.element(l);
        out += v * hs_inner(v, m);
    }
    Ok(out)
}

/// Matrix-level action through explicit conditional expectations.
pub fn apply_generalized(ch: &GeneralizedPauliChannel, m: &CMatrix) -> Result<CMatrix> {
    ch.check_operand(m)?;
    let n = ch.dim();
    let total: f64 = ch.lambdas.iter().sum();
    let mut out = identity(n) * (trace(m) * real((1.0 - total) / n as f64));
    for (i, &l) in ch.lambdas.iter().enumerate() {
        if l != 0.0 {
            out += conditional_expectation(&ch.decomposition, &ch.basis, i, m)? * real(l);
        }
    }
    Ok(out)
}

/// Coefficient-level action `theta_i -> lambda_{pi_i} theta_i` for `i >= 1`.
pub fn apply_generalized_coeffs(
    ch: &GeneralizedPauliChannel,
    state: &CoefficientVector,
) -> Result<CoefficientVector> {
    ch.check_coeffs(state)?;
    let report = validate_state(state, &ch.basis)?;
    if !report.valid {
        return Err(Error::InvalidState(report.issues.join("; ")));
    }
    CoefficientVector::state(scale_coeffs(ch, state.coeffs()))
}

fn scale_coeffs(ch: &GeneralizedPauliChannel, coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == 0 {
                t
            } else {
                let block = ch.decomposition.block_of(i).expect("validated partition");
                ch.lambdas[block] * t
            }
        })
        .collect()
}

/// `p = m_0/sqrt(n) + sum_i lambda_{pi_i} m_i theta_i`.
pub fn output_probability(
    ch: &GeneralizedPauliChannel,
    state: &CoefficientVector,
    effect: &CoefficientVector,
) -> Result<f64> {
    ch.check_coeffs(state)?;
    ch.check_coeffs(effect)?;
    if state.kind() != CoefficientKind::State {
        return Err(Error::InvalidState("expected a state coefficient vector".into()));
    }
    if effect.kind() != CoefficientKind::Effect {
        return Err(Error::InvalidEffect("expected an effect coefficient vector".into()));
    }
    let s = validate_state(state, &ch.basis)?;
    if !s.valid {
        return Err(Error::InvalidState(s.issues.join("; ")));
    }
    let e = validate_effect(effect, &ch.basis)?;
    if !e.valid {
        return Err(Error::InvalidEffect(e.issues.join("; ")));
    }
    Ok(output_probability_unchecked(ch, state.coeffs(), effect.coeffs()))
}

/// Closed form of the output probability without validity checks.
pub fn output_probability_unchecked(ch: &GeneralizedPauliChannel, theta: &[f64], m: &[f64]) -> f64 {
    let scaled = scale_coeffs(ch, theta);
    scaled.iter().zip(m).map(|(t, m)| t * m).sum()
}

/// Output probability through the matrix route `Tr(E(rho) M)`.
pub fn output_probability_matrix(
    ch: &GeneralizedPauliChannel,
    state: &CoefficientVector,
    effect: &CoefficientVector,
) -> Result<f64> {
    let rho = reconstruct_matrix(state, &ch.basis)?;
    let m = reconstruct_matrix(effect, &ch.basis)?;
    Ok(trace(&(apply_generalized(ch, &rho)? * m)).re)
}
