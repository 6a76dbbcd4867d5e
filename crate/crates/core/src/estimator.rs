//! Estimators for channel parameters from relative frequencies.
//!
//! Two paths are provided: a linear solver for the contractions when the
//! channel directions are known, and the full qubit pipeline that first
//! estimates the affine matrix `A` from two triples of Bloch vectors and then
//! splits its symmetric part into contractions and rotation angles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::Serialize;

use crate::channel::{axes_rotation, qubit_affine_matrix, QubitPauliChannel};
use crate::fisher::{MeasurementConfiguration, QubitConfiguration, SINGULAR_TOL};
use crate::{Error, Result};

/// Triples whose determinant falls below this are treated as singular.
pub const TRIPLE_DET_TOL: f64 = 1e-9;

/// Eigenvalue gaps below this make the recovered angles unreliable.
pub const DEGENERACY_TOL: f64 = 1e-6;

pub const GIMBAL_TOL: f64 = 1e-9;

pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// One measured outcome probability as an affine function of the
/// contractions: `p = offset + sum_i coefficients[i] * lambda_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearObservation {
    pub offset: f64,
    pub coefficients: Vec<f64>,
}

impl LinearObservation {
    pub fn from_configuration(cfg: &MeasurementConfiguration) -> Self {
        Self {
            offset: cfg.offset(),
            coefficients: cfg.c.clone(),
        }
    }

    /// `p = 1/2 + (lambda . (m (*) theta)) / 2` for an aligned qubit channel.
    pub fn from_qubit(cfg: &QubitConfiguration) -> Self {
        Self {
            offset: 0.5,
            coefficients: cfg.c().iter().map(|c| 0.5 * c).collect(),
        }
    }

    pub fn predict(&self, lambdas: &[f64]) -> f64 {
        self.offset
            + self
                .coefficients
                .iter()
                .zip(lambdas)
                .map(|(c, l)| c * l)
                .sum::<f64>()
    }
}

/// Solves `nu_k = offset_k + sum_i c_{k,i} lambda_i` with one observation
/// per unknown contraction.
pub fn estimate_lambda_known_directions(
    observations: &[LinearObservation],
    frequencies: &[f64],
) -> Result<Vec<f64>> {
    let k = observations.len();
    if frequencies.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: frequencies.len(),
        });
    }
    let params = observations.first().map_or(0, |o| o.coefficients.len());
    if params != k {
        return Err(Error::DimensionMismatch {
            expected: params,
            found: k,
        });
    }
    if let Some(o) = observations.iter().find(|o| o.coefficients.len() != params) {
        return Err(Error::DimensionMismatch {
            expected: params,
            found: o.coefficients.len(),
        });
    }
    let a = DMatrix::from_fn(k, k, |r, c| observations[r].coefficients[c]);
    for i in 0..k {
        if a.column(i).iter().all(|v| v.abs() <= SINGULAR_TOL) {
            return Err(Error::Unidentifiable(format!(
                "no configuration is sensitive to lambda_{i}"
            )));
        }
    }
    let rhs = DVector::from_fn(k, |r, _| frequencies[r] - observations[r].offset);
    let lu = a.lu();
    lu.solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Unidentifiable("observation system is singular".into()))
}

/// Relative frequencies `nu[(i, j)]` for measurement `i` on input `j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyMatrix {
    nu: Matrix3<f64>,
    /// Shot counts per cell; `None` for exact (infinite-shot) probabilities.
    counts: Option<[[u64; 3]; 3]>,
}

impl FrequencyMatrix {
    pub fn new(nu: Matrix3<f64>, counts: [[u64; 3]; 3]) -> Result<Self> {
        Self::check_range(&nu)?;
        for i in 0..3 {
            for j in 0..3 {
                let n = counts[i][j];
                if n == 0 {
                    return Err(Error::InvalidParameter(format!("zero shots in cell ({i}, {j})")));
                }
                let hits = nu[(i, j)] * n as f64;
                if (hits - hits.round()).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "nu[({i}, {j})] * N = {hits} is not an integer"
                    )));
                }
            }
        }
        Ok(Self {
            nu,
            counts: Some(counts),
        })
    }

    /// Frequencies from success counts with `shots` trials per cell.
    pub fn from_successes(successes: [[u64; 3]; 3], shots: u64) -> Result<Self> {
        let nu = Matrix3::from_fn(|i, j| successes[i][j] as f64 / shots as f64);
        Self::new(nu, [[shots; 3]; 3])
    }

    pub fn exact(nu: Matrix3<f64>) -> Result<Self> {
        Self::check_range(&nu)?;
        Ok(Self { nu, counts: None })
    }

    fn check_range(nu: &Matrix3<f64>) -> Result<()> {
        if let Some(v) = nu.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("frequency {v} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn nu(&self) -> &Matrix3<f64> {
        &self.nu
    }

    pub fn counts(&self) -> Option<[[u64; 3]; 3]> {
        self.counts
    }
}

/// Three Bloch vectors stored as the columns of a 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlochTriple(Matrix3<f64>);

pub type InputTriple = BlochTriple;
pub type MeasurementTriple = BlochTriple;

impl BlochTriple {
    pub fn new(columns: Matrix3<f64>) -> Result<Self> {
        for (j, col) in columns.column_iter().enumerate() {
            if col.norm_squared() > 1.0 + 1e-12 {
                return Err(Error::InvalidState(format!(
                    "Bloch vector {j} has norm {} > 1",
                    col.norm()
                )));
            }
        }
        let det = columns.determinant();
        if det.abs() <= TRIPLE_DET_TOL {
            return Err(Error::SingularMatrix(format!(
                "triple is linearly dependent (det = {det:e})"
            )));
        }
        Ok(Self(columns))
    }

    pub fn from_vectors(v: [Vector3<f64>; 3]) -> Result<Self> {
        Self::new(Matrix3::from_columns(&v))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn column(&self, j: usize) -> Vector3<f64> {
        self.0.column(j).into_owned()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

fn invert(m: &Matrix3<f64>, what: &str) -> Result<Matrix3<f64>> {
    m.try_inverse()
        .ok_or_else(|| Error::SingularMatrix(format!("{what} is not invertible")))
}

/// `theta* = (M^T)^-1 (2 nu - 1)`: column `j` estimates the output Bloch
/// vector of input `j`.
pub fn estimate_output_states(
    measurements: &MeasurementTriple,
    freq: &FrequencyMatrix,
) -> Result<Matrix3<f64>> {
    let inv = invert(&measurements.0.transpose(), "measurement triple")?;
    Ok(inv * freq.nu.map(|v| 2.0 * v - 1.0))
}

/// `A = theta* theta^-1`.
pub fn estimate_channel_matrix(
    output_states: &Matrix3<f64>,
    inputs: &InputTriple,
) -> Result<Matrix3<f64>> {
    Ok(output_states * invert(&inputs.0, "input triple")?)
}

pub fn symmetrize(a: &Matrix3<f64>) -> Matrix3<f64> {
    (a + a.transpose()) * 0.5
}

/// Euler angles with `R = R_z(phi_1) R_y(phi_2) R_x(phi_3)`, `R_y` in the
/// `[[c, 0, -s], [0, 1, 0], [s, 0, c]]` convention. Returns the angles and
/// whether the gimbal-lock branch (`phi_3 := 0`) was taken.
pub fn euler_angles(r: &Matrix3<f64>) -> ([f64; 3], bool) {
    let phi2 = r[(2, 0)].clamp(-1.0, 1.0).asin();
    if phi2.cos().abs() < GIMBAL_TOL {
        let phi1 = (-r[(0, 1)]).atan2(r[(1, 1)]);
        return ([wrap_angle(phi1), wrap_angle(phi2), 0.0], true);
    }
    let phi3 = r[(2, 1)].atan2(r[(2, 2)]);
    let phi1 = r[(1, 0)].atan2(r[(0, 0)]);
    ([wrap_angle(phi1), wrap_angle(phi2), wrap_angle(phi3)], false)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub lambdas: [f64; 3],
    pub angles: [f64; 3],
    pub rotation: Matrix3<f64>,
    /// Some eigenvalue gap is below [`DEGENERACY_TOL`].
    pub low_confidence: bool,
    pub gimbal_lock: bool,
    pub residual: f64,
}

/// Splits a symmetric `A` into descending contractions and rotation angles.
///
/// Eigenvectors are signed so that their largest-magnitude component is
/// positive; if that leaves `det R = -1` the third column is negated.
pub fn decompose_channel_matrix(a_sym: &Matrix3<f64>) -> Result<Decomposition> {
    let asym = (a_sym - a_sym.transpose()).abs().max();
    if asym > 1e-9 * a_sym.abs().max().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let eig = SymmetricEigen::new(symmetrize(a_sym));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambdas = order.map(|k| eig.eigenvalues[k]);
    let gaps = [lambdas[0] - lambdas[1], lambdas[1] - lambdas[2]];
    let low_confidence = gaps.iter().any(|g| *g < DEGENERACY_TOL);
    let isotropic = gaps.iter().all(|g| *g < DEGENERACY_TOL);

    let (angles, gimbal_lock, rotation) = if isotropic {
        ([0.0; 3], false, Matrix3::identity())
    } else {
        let mut cols = order.map(|k| eig.eigenvectors.column(k).into_owned());
        for col in cols.iter_mut() {
            let lead = col
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(0.0);
            if lead < 0.0 {
                *col = -*col;
            }
        }
        let mut r = Matrix3::from_columns(&cols);
        if r.determinant() < 0.0 {
            r.set_column(2, &(-cols[2]));
        }
        let (angles, gimbal) = euler_angles(&r);
        (angles, gimbal, r)
    };
    let rebuilt = qubit_affine_matrix(&QubitPauliChannel::new(lambdas, angles)).0;
    let residual = (rebuilt - a_sym).abs().max();
    let scale = a_sym.abs().max().max(1.0);
    if !isotropic && residual > RECONSTRUCTION_TOL * scale {
        return Err(Error::InvalidModel(format!(
            "reconstruction residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(Decomposition {
        lambdas,
        angles,
        rotation: if isotropic { rotation } else { axes_rotation(angles) },
        low_confidence,
        gimbal_lock,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelEstimate {
    pub lambdas: [f64; 3],
    pub angles: [f64; 3],
    pub raw_a: Matrix3<f64>,
    pub symmetrized_a: Matrix3<f64>,
    pub low_confidence: bool,
    pub gimbal_lock: bool,
    pub residual: f64,
}

/// Frequencies to contractions and angles via `theta*`, `A`, and the
/// symmetric eigendecomposition.
pub fn full_direction_estimate(
    inputs: &InputTriple,
    measurements: &MeasurementTriple,
    freq: &FrequencyMatrix,
) -> Result<ChannelEstimate> {
    let outputs = estimate_output_states(measurements, freq)?;
    let raw_a = estimate_channel_matrix(&outputs, inputs)?;
    let symmetrized_a = symmetrize(&raw_a);
    let d = decompose_channel_matrix(&symmetrized_a)?;
    Ok(ChannelEstimate {
        lambdas: d.lambdas,
        angles: d.angles,
        raw_a,
        symmetrized_a,
        low_confidence: d.low_confidence,
        gimbal_lock: d.gimbal_lock,
        residual: d.residual,
    })
}

/// Outcome probabilities `P[(i, j)] = (1 + m_i . A theta_j) / 2`.
pub fn outcome_probabilities(
    ch: &QubitPauliChannel,
    inputs: &InputTriple,
    measurements: &MeasurementTriple,
) -> Matrix3<f64> {
    let a = qubit_affine_matrix(ch).0;
    (measurements.0.transpose() * a * inputs.0).map(|v| 0.5 * (1.0 + v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::GeneralizedPauliChannel;
    use crate::fisher::optimal_qubit_configuration;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn truth() -> QubitPauliChannel {
        QubitPauliChannel::new([0.75, 0.5, 0.25], [0.3, -0.2, 0.1])
    }

    fn haar_like() -> BlochTriple {
        BlochTriple::new(axes_rotation([0.7, -0.4, 1.9])).unwrap()
    }

    #[test]
    fn known_direction_qubit_examples() {
        let obs = LinearObservation::from_qubit(&QubitConfiguration::axis(0, 1.0));
        let single = LinearObservation {
            offset: obs.offset,
            coefficients: vec![obs.coefficients[0]],
        };
        let l = estimate_lambda_known_directions(&[single], &[0.875]).unwrap();
        assert_abs_diff_eq!(l[0], 0.75, epsilon = 1e-15);

        let set = optimal_qubit_configuration();
        let obs: Vec<_> = set.configs.iter().map(LinearObservation::from_qubit).collect();
        let lambdas = [0.75, 0.5, 0.25];
        let nu: Vec<f64> = obs.iter().map(|o| o.predict(&lambdas)).collect();
        let est = estimate_lambda_known_directions(&obs, &nu).unwrap();
        for (e, t) in est.iter().zip(lambdas) {
            assert_abs_diff_eq!(*e, t, epsilon = 1e-12);
        }
    }

    #[test]
    fn blind_configuration_is_unidentifiable() {
        let obs = vec![
            LinearObservation { offset: 0.5, coefficients: vec![0.0, 0.5] },
            LinearObservation { offset: 0.5, coefficients: vec![0.0, -0.5] },
        ];
        let err = estimate_lambda_known_directions(&obs, &[0.5, 0.5]).unwrap_err();
        assert_eq!(err.kind(), "unidentifiable");
    }

    #[test]
    fn known_direction_generalized_channel() {
        let ch = GeneralizedPauliChannel::qubit([0.5, -0.1, 0.3]).unwrap();
        let set = optimal_qubit_configuration();
        let d = ch.decomposition().clone();
        let cfgs: Vec<MeasurementConfiguration> = set
            .configs
            .iter()
            .map(|c| {
                let state = crate::basis::bloch_qubit_state(c.theta.into()).unwrap();
                let effect = crate::basis::bloch_qubit_effect(c.m.into()).unwrap();
                MeasurementConfiguration::new(state, effect, &d).unwrap()
            })
            .collect();
        let nu: Vec<f64> = cfgs
            .iter()
            .map(|c| crate::channel::output_probability(&ch, &c.state, &c.effect).unwrap())
            .collect();
        let obs: Vec<_> = cfgs.iter().map(LinearObservation::from_configuration).collect();
        let est = estimate_lambda_known_directions(&obs, &nu).unwrap();
        for (e, t) in est.iter().zip(ch.lambdas()) {
            assert_abs_diff_eq!(*e, *t, epsilon = 1e-12);
        }
    }

    #[test]
    fn output_state_examples() {
        let theta_star = Matrix3::new(0.1, 0.2, -0.3, 0.0, 0.5, 0.1, -0.2, 0.0, 0.4);
        let nu = theta_star.map(|v| 0.5 * (1.0 + v));
        let est = estimate_output_states(&BlochTriple::identity(), &FrequencyMatrix::exact(nu).unwrap()).unwrap();
        assert_abs_diff_eq!(est, theta_star, epsilon = 1e-15);

        let half = FrequencyMatrix::exact(Matrix3::repeat(0.5)).unwrap();
        assert_eq!(estimate_output_states(&haar_like(), &half).unwrap(), Matrix3::zeros());

        let m = haar_like();
        let nu = (m.matrix().transpose() * theta_star).map(|v| 0.5 * (1.0 + v));
        let est = estimate_output_states(&m, &FrequencyMatrix::exact(nu).unwrap()).unwrap();
        assert_abs_diff_eq!(est, theta_star, epsilon = 1e-12);
    }

    #[test]
    fn channel_matrix_examples() {
        let a = qubit_affine_matrix(&truth()).0;
        let inputs = BlochTriple::new(Matrix3::new(0.9, 0.1, 0.0, 0.0, 0.8, 0.2, 0.1, 0.0, 0.7)).unwrap();
        let out = a * inputs.matrix();
        assert_abs_diff_eq!(estimate_channel_matrix(&out, &inputs).unwrap(), a, epsilon = 1e-14);
        assert_eq!(estimate_channel_matrix(&out, &BlochTriple::identity()).unwrap(), out);
    }

    #[test]
    fn channel_matrix_error_bounded_by_conditioning() {
        let a = qubit_affine_matrix(&truth()).0;
        let inputs = BlochTriple::new(Matrix3::new(0.9, 0.5, 0.0, 0.0, 0.6, 0.2, 0.1, 0.0, 0.3)).unwrap();
        let sv = inputs.matrix().singular_values();
        let cond = sv.max() / sv.min();
        let out = a * inputs.matrix();
        for k in 0..9 {
            let mut pert = Matrix3::zeros();
            pert[k] = 1e-3 * if k % 2 == 0 { 1.0 } else { -1.0 };
            let est = estimate_channel_matrix(&(out + pert), &inputs).unwrap();
            let rel_a = (est - a).norm() / a.norm();
            let rel_t = pert.norm() / out.norm();
            assert!(rel_a <= cond * rel_t * (1.0 + 1e-9));
        }
    }

    #[test]
    fn singular_triples_rejected() {
        let flat = Matrix3::new(1.0, 0.0, 0.5, 0.0, 1.0, 0.5, 0.0, 0.0, 0.0);
        assert_eq!(BlochTriple::new(flat).unwrap_err().kind(), "singular_matrix");
        assert!(BlochTriple::new(Matrix3::identity() * 1.1).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let d = decompose_channel_matrix(&Matrix3::from_diagonal(&Vector3::new(0.75, 0.5, 0.25))).unwrap();
        assert_eq!(d.lambdas, [0.75, 0.5, 0.25]);
        assert_eq!(d.angles.map(|a| a.abs()), [0.0; 3]);
        assert!(!d.low_confidence);

        let a = qubit_affine_matrix(&truth()).0;
        let d = decompose_channel_matrix(&a).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(d.lambdas[k], truth().lambdas[k], epsilon = 1e-9);
            assert_abs_diff_eq!(d.angles[k], truth().angles[k], epsilon = 1e-9);
        }
        assert!(d.residual <= 1e-9);

        let d = decompose_channel_matrix(&(Matrix3::identity() * 0.4)).unwrap();
        assert_eq!(d.lambdas, [0.4; 3]);
        assert_eq!(d.angles, [0.0; 3]);
        assert!(d.low_confidence);
    }

    #[test]
    fn decomposition_sorts_ascending_input() {
        let d = decompose_channel_matrix(&Matrix3::from_diagonal(&Vector3::new(0.1, 0.9, -0.3))).unwrap();
        assert_eq!(d.lambdas, [0.9, 0.1, -0.3]);
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn gimbal_lock_branch() {
        let ch = QubitPauliChannel::new([0.8, 0.5, 0.1], [0.4, PI / 2.0, 0.0]);
        let a = qubit_affine_matrix(&ch).0;
        let r = axes_rotation(ch.angles);
        let (angles, gimbal) = euler_angles(&r);
        assert!(gimbal);
        assert_abs_diff_eq!(axes_rotation(angles), r, epsilon = 1e-12);
        let d = decompose_channel_matrix(&a).unwrap();
        assert!(d.residual <= 1e-9);
    }

    #[test]
    fn full_pipeline_examples() {
        let aligned = QubitPauliChannel::aligned([0.75, 0.5, 0.25]);
        let id = BlochTriple::identity();
        let nu = outcome_probabilities(&aligned, &id, &id);
        let est = full_direction_estimate(&id, &id, &FrequencyMatrix::exact(nu).unwrap()).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(est.lambdas[k], aligned.lambdas[k], epsilon = 1e-15);
            assert_abs_diff_eq!(est.angles[k], 0.0, epsilon = 1e-15);
        }

        let inputs = haar_like();
        let meas = BlochTriple::new(axes_rotation([-1.1, 0.3, 2.5])).unwrap();
        let nu = outcome_probabilities(&truth(), &inputs, &meas);
        let est = full_direction_estimate(&inputs, &meas, &FrequencyMatrix::exact(nu).unwrap()).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(est.lambdas[k], truth().lambdas[k], epsilon = 1e-9);
            assert_abs_diff_eq!(est.angles[k], truth().angles[k], epsilon = 1e-9);
        }
        assert_eq!(est.symmetrized_a, symmetrize(&est.raw_a));

        // continuity under a small frequency perturbation
        let mut bumped = nu;
        bumped[(1, 2)] += 0.01;
        let moved = full_direction_estimate(&inputs, &meas, &FrequencyMatrix::exact(bumped).unwrap()).unwrap();
        let shift: f64 = (0..3)
            .map(|k| (moved.lambdas[k] - est.lambdas[k]).abs() + (moved.angles[k] - est.angles[k]).abs())
            .sum();
        assert!(shift > 0.0 && shift < 0.2);
    }

    #[test]
    fn frequency_matrix_validation() {
        assert!(FrequencyMatrix::from_successes([[3, 4, 5]; 3], 10).is_ok());
        let bad = Matrix3::repeat(0.333);
        assert!(FrequencyMatrix::new(bad, [[10; 3]; 3]).is_err());
        assert!(FrequencyMatrix::exact(Matrix3::repeat(1.2)).is_err());
        let edge = FrequencyMatrix::from_successes([[0, 10, 10]; 3], 10).unwrap();
        assert!(estimate_output_states(&BlochTriple::identity(), &edge).is_ok());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_small_angles(
            l in prop::array::uniform3(-1.0f64..1.0),
            phi in prop::array::uniform3(-0.4f64..0.4),
        ) {
            let mut l = l;
            l.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(l[0] - l[1] > 1e-3 && l[1] - l[2] > 1e-3);
            let a = qubit_affine_matrix(&QubitPauliChannel::new(l, phi)).0;
            let d = decompose_channel_matrix(&a).unwrap();
            prop_assert!(d.residual <= 1e-9);
            for k in 0..3 {
                prop_assert!((d.lambdas[k] - l[k]).abs() < 1e-9);
                prop_assert!((d.angles[k] - phi[k]).abs() < 1e-8);
            }
        }

        #[test]
        fn eigenvalue_multiset_matches(
            l in prop::array::uniform3(-1.0f64..1.0),
            phi in prop::array::uniform3(-PI..PI),
        ) {
            let a = qubit_affine_matrix(&QubitPauliChannel::new(l, phi)).0;
            let d = decompose_channel_matrix(&a).unwrap();
            let mut sorted = l;
            sorted.sort_by(|a, b| b.total_cmp(a));
            for k in 0..3 {
                prop_assert!((d.lambdas[k] - sorted[k]).abs() < 1e-12);
            }
            prop_assert!(d.residual <= 1e-9 || d.low_confidence);
        }

        #[test]
        fn symmetrization_idempotent(v in prop::array::uniform9(-1.0f64..1.0)) {
            let m = Matrix3::from_column_slice(&v);
            let s = symmetrize(&m);
            prop_assert_eq!(symmetrize(&s), s);
        }

        #[test]
        fn output_states_affine_in_frequencies(
            a in prop::array::uniform9(0.0f64..1.0),
            b in prop::array::uniform9(0.0f64..1.0),
            t in 0.0f64..1.0,
        ) {
            let m = haar_like();
            let na = Matrix3::from_column_slice(&a);
            let nb = Matrix3::from_column_slice(&b);
            let mix = na * t + nb * (1.0 - t);
            let ea = estimate_output_states(&m, &FrequencyMatrix::exact(na).unwrap()).unwrap();
            let eb = estimate_output_states(&m, &FrequencyMatrix::exact(nb).unwrap()).unwrap();
            let em = estimate_output_states(&m, &FrequencyMatrix::exact(mix).unwrap()).unwrap();
            prop_assert!((em - (ea * t + eb * (1.0 - t))).abs().max() < 1e-12);
        }
    }
}
