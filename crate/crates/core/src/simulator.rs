//! Seeded Monte Carlo harness for the full-direction estimator.
//!
//! Every trial draws from its own ChaCha8 stream: the key is derived from the
//! master seed and the sweep point, the stream number is the trial index.
//! Trials can therefore run in any order on any number of threads and still
//! sample the same numbers; results are summed in trial order afterwards.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::QubitPauliChannel;
use crate::channel::qubit_affine_matrix;
use crate::estimator::{
    decompose_channel_matrix, full_direction_estimate, outcome_probabilities, wrap_angle,
    BlochTriple, FrequencyMatrix, InputTriple, MeasurementTriple,
};
use crate::{Error, Result};

pub const PROBABILITY_TOL: f64 = 1e-12;

/// Triples with `|det| < ORTHOGONALITY_SKIP_DET` are left out of sweeps.
pub const ORTHOGONALITY_SKIP_DET: f64 = 1e-6;

/// Fraction of failed trials above which a run is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

const STREAM_DOMAIN: &[u8] = b"pauli-est/trial";
const MEASUREMENT_DRAW_POINT: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub truth: QubitPauliChannel,
    pub inputs: InputTriple,
    pub measurements: MeasurementTriple,
    /// Shots per cell `N`.
    pub shots: u64,
    /// Number of trials `K`.
    pub repetitions: usize,
    /// Weight `c` of the angle errors in the objective.
    pub weight: f64,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidParameter("shots per cell must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::InvalidParameter(format!(
                "weight c = {} outside [0, 1]",
                self.weight
            )));
        }
        Ok(())
    }
}

/// The generator for `trial` at sweep point `point`.
pub fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(STREAM_DOMAIN);
    h.update(seed.to_le_bytes());
    h.update(point.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Validated outcome probabilities `P = (1 + M^T A theta) / 2`.
pub fn cell_probabilities(
    truth: &QubitPauliChannel,
    inputs: &InputTriple,
    measurements: &MeasurementTriple,
) -> Result<Matrix3<f64>> {
    let p = outcome_probabilities(truth, inputs, measurements);
    if let Some(v) = p
        .iter()
        .find(|v| !(-PROBABILITY_TOL..=1.0 + PROBABILITY_TOL).contains(*v))
    {
        return Err(Error::InvalidModel(format!("outcome probability {v} outside [0, 1]")));
    }
    Ok(p.map(|v| v.clamp(0.0, 1.0)))
}

fn sample_cells(p: &Matrix3<f64>, shots: u64, rng: &mut ChaCha8Rng) -> Result<FrequencyMatrix> {
    let mut successes = [[0u64; 3]; 3];
    // column-major draw order: input j outer, measurement i inner
    for j in 0..3 {
        for (i, row) in successes.iter_mut().enumerate() {
            let dist = Binomial::new(shots, p[(i, j)])
                .map_err(|e| Error::InvalidModel(format!("binomial({shots}, {}): {e}", p[(i, j)])))?;
            row[j] = dist.sample(rng);
        }
    }
    FrequencyMatrix::from_successes(successes, shots)
}

/// One frequency matrix with `N` shots per cell.
pub fn sample_frequencies(
    truth: &QubitPauliChannel,
    inputs: &InputTriple,
    measurements: &MeasurementTriple,
    shots: u64,
    rng: &mut ChaCha8Rng,
) -> Result<FrequencyMatrix> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots per cell must be at least 1".into()));
    }
    let p = cell_probabilities(truth, inputs, measurements)?;
    sample_cells(&p, shots, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub mse_lambda: [f64; 3],
    pub mse_phi: [f64; 3],
    pub weight: f64,
    pub objective_v: f64,
    pub n_times_v: f64,
    pub shots: u64,
    pub trials: usize,
    pub failures: usize,
}

impl MseReport {
    /// The same squared errors weighted with another `c`.
    pub fn reweighted(&self, weight: f64) -> Self {
        let objective_v = (1.0 - weight) * self.mse_lambda.iter().sum::<f64>()
            + weight * self.mse_phi.iter().sum::<f64>();
        Self {
            weight,
            objective_v,
            n_times_v: self.shots as f64 * objective_v,
            ..*self
        }
    }
}

/// Reference parameters the estimates are compared against: the truth in
/// the estimator's own labelling (descending contractions, canonical signs).
pub fn canonical_truth(truth: &QubitPauliChannel) -> Result<([f64; 3], [f64; 3])> {
    let d = decompose_channel_matrix(&qubit_affine_matrix(truth).0)?;
    Ok((d.lambdas, d.angles))
}

type TrialErrors = Option<[f64; 6]>;

fn run_trials(spec: &ExperimentSpec, point: u64) -> Result<Vec<TrialErrors>> {
    let p = cell_probabilities(&spec.truth, &spec.inputs, &spec.measurements)?;
    let (ref_l, ref_phi) = canonical_truth(&spec.truth)?;
    (0..spec.repetitions as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(spec.seed, point, t);
            let freq = sample_cells(&p, spec.shots, &mut rng)?;
            Ok(full_direction_estimate(&spec.inputs, &spec.measurements, &freq)
                .ok()
                .map(|est| {
                    let mut e = [0.0; 6];
                    for k in 0..3 {
                        e[k] = (est.lambdas[k] - ref_l[k]).powi(2);
                        e[3 + k] = wrap_angle(est.angles[k] - ref_phi[k]).powi(2);
                    }
                    e
                }))
        })
        .collect()
}

fn aggregate(spec: &ExperimentSpec, errors: &[TrialErrors]) -> Result<MseReport> {
    let failures = errors.iter().filter(|e| e.is_none()).count();
    let trials = errors.len();
    if failures as f64 > MAX_FAILURE_FRACTION * trials as f64 {
        return Err(Error::TooManyFailures { failed: failures, total: trials });
    }
    let mut sums = [0.0; 6];
    for e in errors.iter().flatten() {
        for k in 0..6 {
            sums[k] += e[k];
        }
    }
    let ok = (trials - failures) as f64;
    let mse = sums.map(|s| s / ok);
    let base = MseReport {
        mse_lambda: [mse[0], mse[1], mse[2]],
        mse_phi: [mse[3], mse[4], mse[5]],
        weight: spec.weight,
        objective_v: 0.0,
        n_times_v: 0.0,
        shots: spec.shots,
        trials,
        failures,
    };
    Ok(base.reweighted(spec.weight))
}

fn run_point(spec: &ExperimentSpec, point: u64) -> Result<MseReport> {
    spec.validate()?;
    let errors = run_trials(spec, point)?;
    aggregate(spec, &errors)
}

/// `K` independent trials of sampling and full-direction estimation.
pub fn run_monte_carlo(spec: &ExperimentSpec) -> Result<MseReport> {
    run_point(spec, 0)
}

/// Three unit vectors at pairwise angle `alpha` on a cone around
/// `(1, 1, 1)/sqrt 3`; `alpha = pi/2` gives an orthonormal triple.
pub fn cone_triple(alpha: f64) -> Matrix3<f64> {
    let u = Vector3::new(1.0, 1.0, 1.0).normalize();
    let e1 = Vector3::new(1.0, -1.0, 0.0).normalize();
    let e2 = u.cross(&e1);
    let sin2 = (1.0 - alpha.cos()) / 1.5;
    let (sb, cb) = (sin2.sqrt(), (1.0 - sin2).max(0.0).sqrt());
    let cols: Vec<Vector3<f64>> = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            u * cb + (e1 * a.cos() + e2 * a.sin()) * sb
        })
        .collect();
    Matrix3::from_columns(&cols)
}

/// Haar-random rotation from a normalised Gaussian quaternion.
pub fn haar_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner()
}

/// The fixed random measurement triple drawn from `seed`.
pub fn seeded_measurement_triple(seed: u64) -> BlochTriple {
    let mut rng = trial_rng(seed, MEASUREMENT_DRAW_POINT, 0);
    BlochTriple::new(haar_rotation(&mut rng)).expect("rotations are invertible")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrthogonalityRow {
    pub alpha_deg: f64,
    pub det: f64,
    pub report: MseReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthogonalitySweep {
    pub rows: Vec<OrthogonalityRow>,
    /// Grid angles (degrees) left out because the triple was near-singular.
    pub skipped: Vec<f64>,
}

/// Runs the spec with the cone triple at each `alpha` (degrees) as inputs.
/// The spec's own input triple is ignored.
pub fn sweep_orthogonality(spec: &ExperimentSpec, alphas_deg: &[f64]) -> Result<OrthogonalitySweep> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (idx, &alpha) in alphas_deg.iter().enumerate() {
        let m = cone_triple(alpha.to_radians());
        let det = m.determinant();
        if det.abs() < ORTHOGONALITY_SKIP_DET {
            skipped.push(alpha);
            continue;
        }
        let point = ExperimentSpec {
            inputs: BlochTriple::new(m)?,
            ..*spec
        };
        rows.push(OrthogonalityRow {
            alpha_deg: alpha,
            det,
            report: run_point(&point, idx as u64)?,
        });
    }
    Ok(OrthogonalitySweep { rows, skipped })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub weight: f64,
    pub shots: u64,
    pub v: f64,
    pub n_times_v: f64,
    pub report: MseReport,
}

/// One run per `N`; every `c` reweights the same trials, so rows at equal
/// `N` share their samples.
pub fn sweep_scaling(spec: &ExperimentSpec, shots: &[u64], weights: &[f64]) -> Result<Vec<ScalingRow>> {
    if shots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("N list must be strictly ascending".into()));
    }
    if let Some(c) = weights.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidParameter(format!("weight c = {c} outside [0, 1]")));
    }
    let mut per_n = Vec::with_capacity(shots.len());
    for (idx, &n) in shots.iter().enumerate() {
        let point = ExperimentSpec { shots: n, ..*spec };
        per_n.push(run_point(&point, idx as u64)?);
    }
    let mut rows = Vec::new();
    for &c in weights {
        for report in &per_n {
            let r = report.reweighted(c);
            rows.push(ScalingRow {
                weight: c,
                shots: r.shots,
                v: r.objective_v,
                n_times_v: r.n_times_v,
                report: r,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            truth: QubitPauliChannel::aligned([0.75, 0.5, 0.25]),
            inputs: BlochTriple::identity(),
            measurements: BlochTriple::identity(),
            shots: 10_000,
            repetitions: 200,
            weight: 0.5,
            seed: 7,
        }
    }

    #[test]
    fn same_stream_same_frequencies() {
        let s = spec();
        let a = sample_frequencies(&s.truth, &s.inputs, &s.measurements, 100, &mut trial_rng(1, 0, 3)).unwrap();
        let b = sample_frequencies(&s.truth, &s.inputs, &s.measurements, 100, &mut trial_rng(1, 0, 3)).unwrap();
        assert_eq!(a, b);
        let c = sample_frequencies(&s.truth, &s.inputs, &s.measurements, 100, &mut trial_rng(1, 0, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn large_n_concentrates() {
        let s = spec();
        let p = cell_probabilities(&s.truth, &s.inputs, &s.measurements).unwrap();
        let n = 1_000_000;
        let f = sample_frequencies(&s.truth, &s.inputs, &s.measurements, n, &mut trial_rng(2, 0, 0)).unwrap();
        for k in 0..9 {
            let sigma = (p[k] * (1.0 - p[k]) / n as f64).sqrt().max(1e-12);
            assert!((f.nu()[k] - p[k]).abs() <= 5.0 * sigma + 1e-12);
        }
    }

    #[test]
    fn binomial_spread_matches_variance() {
        let s = spec();
        let p = cell_probabilities(&s.truth, &s.inputs, &s.measurements).unwrap();
        assert_abs_diff_eq!(p[(0, 0)], 0.875, epsilon = 1e-15);
        let draws: Vec<f64> = (0..4000)
            .map(|t| {
                sample_frequencies(&s.truth, &s.inputs, &s.measurements, 10_000, &mut trial_rng(3, 0, t))
                    .unwrap()
                    .nu()[(0, 0)]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let expected = (0.875f64 * 0.125 / 1e4).sqrt();
        assert_abs_diff_eq!(expected, 3.307e-3, epsilon = 1e-6);
        // sample std within ~5 standard errors of its own estimate
        assert!((var.sqrt() / expected - 1.0).abs() < 0.06);
    }

    #[test]
    fn out_of_range_probabilities_rejected() {
        // non-physical contraction pushes P above 1
        let bad = QubitPauliChannel::aligned([1.5, 0.0, 0.0]);
        let id = BlochTriple::identity();
        let err = sample_frequencies(&bad, &id, &id, 10, &mut trial_rng(0, 0, 0)).unwrap_err();
        assert_eq!(err.kind(), "invalid_model");
    }

    #[test]
    fn lambda_mse_matches_delta_method() {
        let s = ExperimentSpec { repetitions: 1000, ..spec() };
        let r = run_monte_carlo(&s).unwrap();
        assert_eq!(r.failures, 0);
        // identity triples: lambda_i = 2 nu_ii - 1, so MSE = 4 P (1 - P) / N
        for k in 0..3 {
            let p = 0.5 * (1.0 + s.truth.lambdas[k]);
            let expected = 4.0 * p * (1.0 - p) / s.shots as f64;
            // relative std of a 1000-sample MSE is about sqrt(2/1000)
            assert!((r.mse_lambda[k] / expected - 1.0).abs() < 0.2, "{k}: {} vs {expected}", r.mse_lambda[k]);
        }
        assert!(r.mse_phi.iter().all(|m| m.is_finite() && *m > 0.0));
        let v = 0.5 * r.mse_lambda.iter().sum::<f64>() + 0.5 * r.mse_phi.iter().sum::<f64>();
        assert_abs_diff_eq!(r.objective_v, v, epsilon = 1e-18);
        assert_abs_diff_eq!(r.n_times_v, v * 1e4, epsilon = 1e-12);
    }

    #[test]
    fn lambda_estimates_unbiased() {
        let s = ExperimentSpec { repetitions: 2000, ..spec() };
        let errors: Vec<f64> = (0..s.repetitions as u64)
            .map(|t| {
                let f = sample_frequencies(&s.truth, &s.inputs, &s.measurements, s.shots, &mut trial_rng(s.seed, 0, t)).unwrap();
                2.0 * f.nu()[(0, 0)] - 1.0 - s.truth.lambdas[0]
            })
            .collect();
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        let sd = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / errors.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * sd / (errors.len() as f64).sqrt());
    }

    #[test]
    fn single_trial_reproducible() {
        let s = ExperimentSpec { repetitions: 1, ..spec() };
        let a = run_monte_carlo(&s).unwrap();
        let b = run_monte_carlo(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = spec();
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| run_monte_carlo(&s)).unwrap();
        let b = wide.install(|| run_monte_carlo(&s)).unwrap();
        assert_eq!(a.objective_v.to_bits(), b.objective_v.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(run_monte_carlo(&ExperimentSpec { shots: 0, ..spec() }).is_err());
        assert!(run_monte_carlo(&ExperimentSpec { repetitions: 0, ..spec() }).is_err());
        assert!(run_monte_carlo(&ExperimentSpec { weight: 1.5, ..spec() }).is_err());
    }

    #[test]
    fn cone_triple_geometry() {
        for deg in [5.0f64, 30.0, 60.0, 90.0] {
            let m = cone_triple(deg.to_radians());
            for j in 0..3 {
                assert_abs_diff_eq!(m.column(j).norm(), 1.0, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(m.column(0).dot(&m.column(1)), deg.to_radians().cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(m.column(1).dot(&m.column(2)), deg.to_radians().cos(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(cone_triple(std::f64::consts::FRAC_PI_2).determinant().abs(), 1.0, epsilon = 1e-12);
        assert!(cone_triple(0.0).determinant().abs() < 1e-12);
    }

    #[test]
    fn haar_draw_is_rotation() {
        let m = seeded_measurement_triple(11);
        let r = m.matrix();
        assert_abs_diff_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        assert_eq!(seeded_measurement_triple(11), m);
    }

    #[test]
    fn orthogonality_sweep_skips_and_orders() {
        let s = ExperimentSpec {
            measurements: seeded_measurement_triple(5),
            shots: 1000,
            repetitions: 300,
            ..spec()
        };
        let sweep = sweep_orthogonality(&s, &[0.0, 20.0, 90.0]).unwrap();
        assert_eq!(sweep.skipped, vec![0.0]);
        assert_eq!(sweep.rows.len(), 2);
        assert!(sweep.rows[1].report.objective_v < sweep.rows[0].report.objective_v);
    }

    #[test]
    fn scaling_rows_superpose() {
        let s = ExperimentSpec { repetitions: 200, ..spec() };
        let rows = sweep_scaling(&s, &[1000, 10_000], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(rows.len(), 6);
        for i in 0..2 {
            let (c0, c5, c1) = (rows[i].v, rows[2 + i].v, rows[4 + i].v);
            assert_abs_diff_eq!(c5, 0.5 * (c0 + c1), epsilon = 1e-15);
        }
        assert!(sweep_scaling(&s, &[10_000, 1000], &[0.0]).is_err());
    }
}
