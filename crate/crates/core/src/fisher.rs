//! Fisher information of two-outcome measurement configurations.
//!
//! For a configuration whose outcome probability is affine in the channel
//! parameters, `p = offset + sum_i lambda_i c_i`, the Fisher matrix is the
//! rank-one `c c^T / (p (1 - p))`. The qubit closed forms below use the Bloch
//! convention `c_i = m_i theta_i`, for which `p = (1 + lambda . c)/2`.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{
    overlap_d, project_raw, CoefficientKind, CoefficientVector, OperatorBasis,
    SubalgebraDecomposition, EIGEN_TOL,
};
use crate::channel::GeneralizedPauliChannel;
use crate::linalg::{frobenius_norm, hermitian_eigen, hs_inner, CMatrix};
use crate::{Error, Result};

/// Denominators below this raise [`Error::SingularInformation`].
pub const SINGULAR_TOL: f64 = 1e-12;

/// Default central-difference width for [`fisher_from_model`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Symmetric positive-semidefinite Fisher information matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherMatrix {
    entries: DMatrix<f64>,
}

impl FisherMatrix {
    /// Symmetrises the input so the stored matrix is exactly symmetric.
    pub fn new(entries: DMatrix<f64>) -> Self {
        let sym = (&entries + entries.transpose()) * 0.5;
        Self { entries: sym }
    }

    /// `c c^T / denom`.
    pub fn rank_one(c: &[f64], denom: f64) -> Self {
        let n = c.len();
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| c[i] * c[j] / denom),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .min()
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-10
    }

    pub fn add(&self, other: &FisherMatrix) -> Result<FisherMatrix> {
        if self.size() != other.size() {
            return Err(Error::DimensionMismatch {
                expected: self.size(),
                found: other.size(),
            });
        }
        Ok(FisherMatrix {
            entries: &self.entries + &other.entries,
        })
    }
}

/// Fisher matrix of the distribution `{p(lambda), 1 - p(lambda)}` by central
/// finite differences of width `step`.
pub fn fisher_from_model<F>(prob_fn: F, lambdas: &[f64], step: f64) -> Result<FisherMatrix>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if step <= 0.0 {
        return Err(Error::InvalidParameter("finite-difference step must be positive".into()));
    }
    let p = prob_fn(lambdas)?;
    if p <= SINGULAR_TOL || p >= 1.0 - SINGULAR_TOL {
        return Err(Error::SingularInformation(format!(
            "outcome probability {p} is at the boundary"
        )));
    }
    let k = lambdas.len();
    let mut grad = vec![0.0; k];
    let mut shifted = lambdas.to_vec();
    for i in 0..k {
        shifted[i] = lambdas[i] + step;
        let up = prob_fn(&shifted)?;
        shifted[i] = lambdas[i] - step;
        let down = prob_fn(&shifted)?;
        shifted[i] = lambdas[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    // outcome M has derivative grad, outcome I - M has -grad
    let outcomes = [(p, 1.0), (1.0 - p, -1.0)];
    let entries = DMatrix::from_fn(k, k, |i, j| {
        outcomes
            .iter()
            .map(|&(pa, sign)| (sign * grad[i]) * (sign * grad[j]) / pa)
            .sum()
    });
    Ok(FisherMatrix::new(entries))
}

/// Qubit input state / projective measurement pair in Bloch form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitConfiguration {
    pub theta: Vector3<f64>,
    pub m: Vector3<f64>,
}

impl QubitConfiguration {
    pub fn new(theta: Vector3<f64>, m: Vector3<f64>) -> Result<Self> {
        if theta.norm_squared() > 1.0 + SINGULAR_TOL {
            return Err(Error::InvalidState(format!("|theta| = {} > 1", theta.norm())));
        }
        if m.norm_squared() > 1.0 + SINGULAR_TOL {
            return Err(Error::InvalidEffect(format!("|m| = {} > 1", m.norm())));
        }
        Ok(Self { theta, m })
    }

    /// `theta = m = sign * e_j`.
    pub fn axis(j: usize, sign: f64) -> Self {
        let mut v = Vector3::zeros();
        v[j] = sign.signum();
        Self { theta: v, m: v }
    }

    /// `c_i = m_i theta_i`.
    pub fn c(&self) -> Vector3<f64> {
        self.m.component_mul(&self.theta)
    }

    pub fn is_von_neumann(&self) -> bool {
        (self.m.norm() - 1.0).abs() <= EIGEN_TOL
    }

    fn require_von_neumann(&self) -> Result<()> {
        if self.is_von_neumann() {
            Ok(())
        } else {
            Err(Error::InvalidEffect(format!(
                "closed form needs a projective measurement, |m| = {}",
                self.m.norm()
            )))
        }
    }
}

/// Three qubit configurations; `C[(i, j)] = c_i^{(j)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConfigurationSet {
    pub configs: [QubitConfiguration; 3],
}

impl ConfigurationSet {
    pub fn new(configs: [QubitConfiguration; 3]) -> Self {
        Self { configs }
    }

    pub fn c_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[
            self.configs[0].c(),
            self.configs[1].c(),
            self.configs[2].c(),
        ])
    }
}

fn qubit_denominator(lambdas: &[f64; 3], c: &Vector3<f64>) -> Result<f64> {
    let x = Vector3::from(*lambdas).dot(c);
    let denom = 1.0 - x * x;
    if denom < SINGULAR_TOL {
        return Err(Error::SingularInformation(format!(
            "|lambda . c| = {} reaches 1",
            x.abs()
        )));
    }
    Ok(denom)
}

/// `F_ij = c_i c_j / (1 - (lambda . c)^2)`.
pub fn qubit_fisher_matrix(lambdas: [f64; 3], cfg: &QubitConfiguration) -> Result<FisherMatrix> {
    cfg.require_von_neumann()?;
    let c = cfg.c();
    let denom = qubit_denominator(&lambdas, &c)?;
    Ok(FisherMatrix::rank_one(c.as_slice(), denom))
}

/// Summed Fisher matrix of a configuration set.
pub fn total_fisher_matrix(lambdas: [f64; 3], set: &ConfigurationSet) -> Result<FisherMatrix> {
    let mut total = FisherMatrix::new(DMatrix::zeros(3, 3));
    for cfg in &set.configs {
        total = total.add(&qubit_fisher_matrix(lambdas, cfg)?)?;
    }
    Ok(total)
}

/// `det F = det(C)^2 / prod_j (1 - (lambda . c^{(j)})^2)`.
pub fn total_fisher_det(lambdas: [f64; 3], set: &ConfigurationSet) -> Result<f64> {
    let mut denom = 1.0;
    for cfg in &set.configs {
        cfg.require_von_neumann()?;
        denom *= qubit_denominator(&lambdas, &cfg.c())?;
    }
    let det_c = set.c_matrix().determinant();
    Ok(det_c * det_c / denom)
}

/// `Tr F = sum_i m_i^2 theta_i^2 / (1 - (sum_i lambda_i m_i theta_i)^2)`.
pub fn total_fisher_trace(lambdas: [f64; 3], cfg: &QubitConfiguration) -> Result<f64> {
    cfg.require_von_neumann()?;
    let c = cfg.c();
    let denom = qubit_denominator(&lambdas, &c)?;
    Ok(c.norm_squared() / denom)
}

/// `theta^{(j)} = m^{(j)} = e_j`.
pub fn optimal_qubit_configuration() -> ConfigurationSet {
    optimal_qubit_configuration_with_signs([1.0; 3])
}

/// `theta^{(j)} = m^{(j)} = s_j e_j`; every sign pattern is optimal.
pub fn optimal_qubit_configuration_with_signs(signs: [f64; 3]) -> ConfigurationSet {
    ConfigurationSet::new([
        QubitConfiguration::axis(0, signs[0]),
        QubitConfiguration::axis(1, signs[1]),
        QubitConfiguration::axis(2, signs[2]),
    ])
}

/// A state/effect pair for a generalized Pauli channel with its block sums
/// `c_i = sum_{l in block i} theta_l m_l`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementConfiguration {
    pub state: CoefficientVector,
    pub effect: CoefficientVector,
    pub c: Vec<f64>,
}

impl MeasurementConfiguration {
    pub fn new(
        state: CoefficientVector,
        effect: CoefficientVector,
        decomposition: &SubalgebraDecomposition,
    ) -> Result<Self> {
        if state.kind() != CoefficientKind::State {
            return Err(Error::InvalidState("expected a state coefficient vector".into()));
        }
        if effect.kind() != CoefficientKind::Effect {
            return Err(Error::InvalidEffect("expected an effect coefficient vector".into()));
        }
        let total = decomposition.dim() * decomposition.dim();
        for v in [&state, &effect] {
            if v.len() != total {
                return Err(Error::DimensionMismatch {
                    expected: total,
                    found: v.len(),
                });
            }
        }
        let c = decomposition.block_overlaps(&state, &effect);
        Ok(Self { state, effect, c })
    }

    /// `d = sum_{i >= 1} m_i theta_i`.
    pub fn d(&self) -> f64 {
        overlap_d(&self.state, &self.effect)
    }

    /// `m_0 / sqrt(n)`.
    pub fn offset(&self) -> f64 {
        self.effect.coeffs()[0] / (self.effect.dim() as f64).sqrt()
    }
}

/// Full Fisher matrix `c c^T / (p (1 - p))` over all block parameters.
pub fn generalized_fisher_matrix(
    ch: &GeneralizedPauliChannel,
    cfg: &MeasurementConfiguration,
) -> Result<FisherMatrix> {
    let p = cfg.offset()
        + ch.lambdas()
            .iter()
            .zip(&cfg.c)
            .map(|(l, c)| l * c)
            .sum::<f64>();
    let denom = p * (1.0 - p);
    if denom < SINGULAR_TOL {
        return Err(Error::SingularInformation(format!(
            "outcome probability {p} is at the boundary"
        )));
    }
    Ok(FisherMatrix::rank_one(&cfg.c, denom))
}

/// `F_jj = d^2 / ((m_0/sqrt n + lambda_j d)(1 - m_0/sqrt n - lambda_j d))` for a
/// configuration supported in block `j`.
pub fn block_fisher_diag(
    ch: &GeneralizedPauliChannel,
    cfg: &MeasurementConfiguration,
    j: usize,
) -> Result<f64> {
    let lambda_j = *ch
        .lambdas()
        .get(j)
        .ok_or_else(|| Error::InvalidParameter(format!("block index {j} out of range")))?;
    if cfg.c.len() != ch.lambdas().len() {
        return Err(Error::DimensionMismatch {
            expected: ch.lambdas().len(),
            found: cfg.c.len(),
        });
    }
    if let Some((i, ci)) = cfg
        .c
        .iter()
        .enumerate()
        .find(|&(i, ci)| i != j && ci.abs() > SINGULAR_TOL)
    {
        return Err(Error::InvalidParameter(format!(
            "configuration is not supported in block {j}: c_{i} = {ci}"
        )));
    }
    let d = cfg.c[j];
    let q = cfg.offset() + lambda_j * d;
    let denom = q * (1.0 - q);
    if denom <= SINGULAR_TOL {
        return Err(Error::SingularInformation(format!(
            "outcome probability {q} is at the boundary"
        )));
    }
    Ok(d * d / denom)
}

/// `I_max = 1 / ((1 - lambda_j)(K/(n - K) + lambda_j))`.
pub fn max_fisher_info(n: usize, k: usize, lambda_j: f64) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "multiplicity K = {k} must satisfy 1 <= K < n = {n}"
        )));
    }
    let floor = -1.0 / (n as f64 - 1.0);
    if lambda_j > 1.0 || lambda_j < floor - SINGULAR_TOL {
        return Err(Error::InvalidParameter(format!(
            "lambda_j = {lambda_j} outside [{floor}, 1]"
        )));
    }
    let ratio = k as f64 / (n - k) as f64;
    let denom = (1.0 - lambda_j) * (ratio + lambda_j);
    if denom.abs() < SINGULAR_TOL {
        return Err(Error::SingularInformation(format!(
            "I_max has a pole at lambda_j = {lambda_j} (n = {n}, K = {k})"
        )));
    }
    Ok(1.0 / denom)
}

/// Optimal configuration for block `j`: a minimal-rank projection `P` in the
/// block as effect and `P / Tr P` as input state.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalBlockConfig {
    pub block: usize,
    pub config: MeasurementConfiguration,
    /// Rank `K` of the projection.
    pub rank: usize,
    /// Achieved overlap `d = (n - K)/n`.
    pub d: f64,
    #[serde(skip)]
    pub projection: CMatrix,
}

const PROJECTION_ATTEMPTS: u64 = 8;
const CLUSTER_TOL: f64 = 1e-8;

fn block_span<'a>(b: &'a OperatorBasis, block: &[usize]) -> Vec<&'a CMatrix> {
    std::iter::once(0)
        .chain(block.iter().copied())
        .map(|i| b.element(i))
        .collect()
}

fn residual_outside(m: &CMatrix, span: &[&CMatrix]) -> f64 {
    let mut rest = m.clone();
    for v in span {
        rest -= *v * hs_inner(v, m);
    }
    frobenius_norm(&rest)
}

/// Smallest spectral projection of a generic element of the block; ties go
/// to the largest eigenvalue.
fn minimal_projection(b: &OperatorBasis, block: &[usize], seed: u64) -> Option<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = b.dim();
    let mut generic = CMatrix::zeros(n, n);
    for &l in block {
        generic += b.element(l) * crate::linalg::real(rng.random_range(0.5..1.5));
    }
    let eig = hermitian_eigen(&generic);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in eig.values.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (v - eig.values[*c.last().unwrap()]).abs() <= CLUSTER_TOL => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let smallest = clusters.iter().map(Vec::len).min()?;
    let chosen = clusters.iter().rev().find(|c| c.len() == smallest)?;
    let mut p = CMatrix::zeros(n, n);
    for &i in chosen {
        let u = &eig.vectors[i];
        p += u * u.adjoint();
    }
    let idempotent = frobenius_norm(&(&p * &p - &p)) < EIGEN_TOL;
    let inside = residual_outside(&p, &block_span(b, block)) < EIGEN_TOL;
    (idempotent && inside && smallest < n).then_some(p)
}

/// Builds the optimal measurement configuration for block `j`.
pub fn optimal_block_config(
    d: &SubalgebraDecomposition,
    b: &OperatorBasis,
    j: usize,
) -> Result<OptimalBlockConfig> {
    if d.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: d.dim(),
        });
    }
    let block = d.block(j)?;
    let projection = (0..PROJECTION_ATTEMPTS)
        .find_map(|attempt| minimal_projection(b, block, 0x0b10c_u64 + 31 * j as u64 + attempt))
        .ok_or_else(|| Error::Structure(format!("no projection found inside block {j}")))?;
    let rank = crate::linalg::trace(&projection).re.round() as usize;
    let m = project_raw(&projection, b)?;
    let theta: Vec<f64> = m.iter().map(|x| x / rank as f64).collect();
    let effect = CoefficientVector::effect(m)?;
    let state = CoefficientVector::state(theta)?;
    let config = MeasurementConfiguration::new(state, effect, d)?;
    let overlap = config.d();
    Ok(OptimalBlockConfig {
        block: j,
        config,
        rank,
        d: overlap,
        projection,
    })
}

/// Cramer-Rao lower bound `F^-1` on the covariance of unbiased estimators.
/// A singular `F` yields [`Error::UnboundedVariance`] with its null space.
pub fn cramer_rao_bound(f: &FisherMatrix) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(f.entries().clone());
    let scale = eig.eigenvalues.abs().max().max(1.0);
    let null_directions: Vec<Vec<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &e)| e <= SINGULAR_TOL * scale)
        .map(|(i, _)| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    if !null_directions.is_empty() {
        return Err(Error::UnboundedVariance { null_directions });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{bloch_qubit_effect, bloch_qubit_state, build_tensor_pauli_basis};
    use crate::channel::output_probability_matrix;
    use crate::linalg::identity;
    use approx::assert_abs_diff_eq;

    fn qubit_model(
        cfg: &QubitConfiguration,
    ) -> impl Fn(&[f64]) -> Result<f64> {
        let ch = GeneralizedPauliChannel::qubit([0.0; 3]).unwrap();
        let state = bloch_qubit_state(cfg.theta.into()).unwrap();
        let effect = bloch_qubit_effect(cfg.m.into()).unwrap();
        move |l: &[f64]| output_probability_matrix(&ch.with_lambdas(l.to_vec())?, &state, &effect)
    }

    #[test]
    fn single_parameter_model() {
        // p = (1 + lambda c)/2 has F = c^2 / (1 - lambda^2 c^2)
        for (c, l) in [(0.8, 0.3), (-0.5, 0.9), (1.0, -0.6)] {
            let f = fisher_from_model(|x: &[f64]| Ok(0.5 * (1.0 + x[0] * c)), &[l], DEFAULT_FD_STEP).unwrap();
            assert_abs_diff_eq!(f.get(0, 0), c * c / (1.0 - l * l * c * c), epsilon = 1e-8);
        }
        let f = fisher_from_model(|_: &[f64]| Ok(0.3), &[0.5], DEFAULT_FD_STEP).unwrap();
        assert_eq!(f.get(0, 0), 0.0);
        let err = fisher_from_model(|_: &[f64]| Ok(1.0), &[0.5], DEFAULT_FD_STEP).unwrap_err();
        assert!(matches!(err, Error::SingularInformation(_)));
    }

    #[test]
    fn qubit_closed_form_examples() {
        let cfg = QubitConfiguration::axis(0, 1.0);
        let f = qubit_fisher_matrix([0.75, 0.5, 0.25], &cfg).unwrap();
        assert_abs_diff_eq!(f.get(0, 0), 16.0 / 7.0, epsilon = 1e-14);
        for (i, j) in [(0, 1), (1, 1), (2, 2), (1, 2)] {
            assert_eq!(f.get(i, j), 0.0);
        }
        let oracle = fisher_from_model(qubit_model(&cfg), &[0.75, 0.5, 0.25], DEFAULT_FD_STEP).unwrap();
        assert_abs_diff_eq!(oracle.get(0, 0), 16.0 / 7.0, epsilon = 1e-6);

        let blind = QubitConfiguration::new(Vector3::zeros(), Vector3::new(0.0, 1.0, 0.0)).unwrap();
        let f = qubit_fisher_matrix([0.75, 0.5, 0.25], &blind).unwrap();
        assert!(f.entries().iter().all(|&x| x == 0.0));

        let singular = qubit_fisher_matrix([1.0, 0.5, 0.25], &cfg).unwrap_err();
        assert!(matches!(singular, Error::SingularInformation(_)));

        let soft = QubitConfiguration::new(Vector3::x(), Vector3::new(0.5, 0.0, 0.0)).unwrap();
        assert!(matches!(
            qubit_fisher_matrix([0.5; 3], &soft),
            Err(Error::InvalidEffect(_))
        ));
    }

    #[test]
    fn determinant_examples() {
        let set = optimal_qubit_configuration();
        assert_eq!(set.c_matrix(), Matrix3::identity());
        let det = total_fisher_det([0.75, 0.5, 0.25], &set).unwrap();
        assert_abs_diff_eq!(det, 1024.0 / 315.0, epsilon = 1e-12);
        let direct = total_fisher_matrix([0.75, 0.5, 0.25], &set).unwrap().determinant();
        assert_abs_diff_eq!(det, direct, epsilon = 1e-10);

        let dependent = ConfigurationSet::new([
            QubitConfiguration::axis(0, 1.0),
            QubitConfiguration::axis(0, -1.0),
            QubitConfiguration::axis(2, 1.0),
        ]);
        assert_eq!(total_fisher_det([0.75, 0.5, 0.25], &dependent).unwrap(), 0.0);
    }

    #[test]
    fn trace_examples() {
        for sign in [1.0, -1.0] {
            let t = total_fisher_trace([0.75, 0.5, 0.25], &QubitConfiguration::axis(0, sign)).unwrap();
            assert_abs_diff_eq!(t, 16.0 / 7.0, epsilon = 1e-14);
        }
        let mixed_input = QubitConfiguration::new(Vector3::zeros(), Vector3::z()).unwrap();
        assert_eq!(total_fisher_trace([0.75, 0.5, 0.25], &mixed_input).unwrap(), 0.0);
    }

    #[test]
    fn cramer_rao_examples() {
        let f = FisherMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            16.0 / 7.0,
            4.0 / 3.0,
            16.0 / 15.0,
        ])));
        let bound = cramer_rao_bound(&f).unwrap();
        for (i, v) in [7.0 / 16.0, 0.75, 15.0 / 16.0].iter().enumerate() {
            assert_abs_diff_eq!(bound[(i, i)], *v, epsilon = 1e-14);
        }

        let rank_one = qubit_fisher_matrix([0.75, 0.5, 0.25], &QubitConfiguration::axis(1, 1.0)).unwrap();
        match cramer_rao_bound(&rank_one) {
            Err(Error::UnboundedVariance { null_directions }) => assert_eq!(null_directions.len(), 2),
            other => panic!("expected unbounded variance, got {other:?}"),
        }

        let total = total_fisher_matrix([0.75, 0.5, 0.25], &optimal_qubit_configuration()).unwrap();
        let inv = cramer_rao_bound(&total).unwrap();
        assert_abs_diff_eq!(inv.determinant(), 315.0 / 1024.0, epsilon = 1e-12);
    }

    #[test]
    fn block_fisher_examples() {
        let d = SubalgebraDecomposition::preset("M4-C2").unwrap();
        let mut lambdas = vec![0.0; 15];
        lambdas[4] = 0.5;
        let ch = GeneralizedPauliChannel::new(d.clone(), lambdas).unwrap();
        // block 4 holds basis index 5; m_0 = 1, d = 1/2
        let mut m = vec![0.0; 16];
        m[0] = 1.0;
        m[5] = 1.0;
        let theta: Vec<f64> = m.iter().map(|x| x / 2.0).collect();
        let cfg = MeasurementConfiguration::new(
            CoefficientVector::state(theta).unwrap(),
            CoefficientVector::effect(m).unwrap(),
            &d,
        )
        .unwrap();
        assert_abs_diff_eq!(cfg.d(), 0.5);
        assert_abs_diff_eq!(block_fisher_diag(&ch, &cfg, 4).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        assert!(block_fisher_diag(&ch, &cfg, 3).is_err());

        let mut mixed = vec![0.0; 16];
        mixed[0] = 0.5;
        let blind = MeasurementConfiguration::new(
            CoefficientVector::state(mixed).unwrap(),
            cfg.effect.clone(),
            &d,
        )
        .unwrap();
        assert_eq!(block_fisher_diag(&ch, &blind, 4).unwrap(), 0.0);
    }

    #[test]
    fn max_fisher_info_examples() {
        for l in [-0.2, 0.3, 0.9] {
            assert_abs_diff_eq!(
                max_fisher_info(4, 2, l).unwrap(),
                1.0 / ((1.0 - l) * (1.0 + l)),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                max_fisher_info(2, 1, l).unwrap(),
                1.0 / (1.0 - l * l),
                epsilon = 1e-12
            );
        }
        assert_abs_diff_eq!(max_fisher_info(4, 1, 0.5).unwrap(), 2.4, epsilon = 1e-12);
        assert!(matches!(max_fisher_info(4, 1, 1.0), Err(Error::SingularInformation(_))));
        assert!(matches!(max_fisher_info(4, 1, -1.0 / 3.0), Err(Error::SingularInformation(_))));
        assert!(matches!(max_fisher_info(4, 4, 0.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(max_fisher_info(4, 2, -0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn optimal_block_configs() {
        let b4 = build_tensor_pauli_basis(2).unwrap();
        let c2 = SubalgebraDecomposition::preset("M4-C2").unwrap();
        let opt = optimal_block_config(&c2, &b4, 6).unwrap();
        assert_eq!(opt.rank, 2);
        assert_abs_diff_eq!(opt.d, 0.5, epsilon = 1e-12);
        let expected = identity(4) * crate::linalg::real(0.5) + b4.element(7);
        assert!(frobenius_norm(&(&opt.projection - expected)) < 1e-10);
        assert_abs_diff_eq!(opt.config.effect.coeffs()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(opt.config.effect.coeffs()[7], 1.0, epsilon = 1e-12);

        let mixed = SubalgebraDecomposition::preset("M4-mixed").unwrap();
        let opt = optimal_block_config(&mixed, &b4, 2).unwrap();
        assert_eq!(opt.rank, 1);
        assert_abs_diff_eq!(opt.d, 0.75, epsilon = 1e-12);
        let opt = optimal_block_config(&mixed, &b4, 0).unwrap();
        assert_eq!(opt.rank, 2);
        assert_abs_diff_eq!(opt.d, 0.5, epsilon = 1e-12);

        let q = SubalgebraDecomposition::preset("M2-pauli").unwrap();
        let b2 = crate::basis::build_pauli_basis();
        for j in 0..3 {
            let opt = optimal_block_config(&q, &b2, j).unwrap();
            assert_eq!(opt.rank, 1);
            let bloch_m = opt.config.effect.qubit_bloch().unwrap();
            let bloch_t = opt.config.state.qubit_bloch().unwrap();
            for i in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(bloch_m[i], e, epsilon = 1e-12);
                assert_abs_diff_eq!(bloch_t[i], e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn optimal_block_config_reaches_max() {
        let b4 = build_tensor_pauli_basis(2).unwrap();
        for name in ["M4-C2", "M4-mixed"] {
            let d = SubalgebraDecomposition::preset(name).unwrap();
            for j in 0..d.num_blocks() {
                let opt = optimal_block_config(&d, &b4, j).unwrap();
                for l in [-0.2, 0.3, 0.9] {
                    let mut lambdas = vec![0.0; d.num_blocks()];
                    lambdas[j] = l;
                    let ch = GeneralizedPauliChannel::new(d.clone(), lambdas).unwrap();
                    let f = block_fisher_diag(&ch, &opt.config, j).unwrap();
                    assert_abs_diff_eq!(f, max_fisher_info(4, opt.rank, l).unwrap(), epsilon = 1e-9);
                }
            }
        }
    }
}
