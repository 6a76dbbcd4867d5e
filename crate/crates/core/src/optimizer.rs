//! Multi-start projected gradient ascent over configuration vectors.
//!
//! The qubit Fisher objectives depend on a configuration only through
//! `c = m (*) theta`, and every `c` in the unit l1 ball is realised by some
//! pure-measurement pair (see [`realize_c`]). The searches here therefore
//! run in c-space with each c-vector projected back onto the l1 ball after
//! every step.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::validate_cptp;
use crate::fisher::{ConfigurationSet, QubitConfiguration, SINGULAR_TOL};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OptimizerSettings {
    pub grid_points_per_axis: usize,
    pub max_iterations: usize,
    /// Initial step of the backtracking line search.
    pub step_size: f64,
    /// Stationarity threshold on the projected-gradient step.
    pub tolerance: f64,
    /// Two endpoint values closer than this count as the same optimum.
    pub agreement_tolerance: f64,
    /// Extra uniformly drawn starts on top of the grid.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            grid_points_per_axis: 5,
            max_iterations: 10_000,
            step_size: 0.1,
            tolerance: 1e-8,
            agreement_tolerance: 1e-6,
            random_starts: 0,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if self.grid_points_per_axis < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidParameter("step size must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Euclidean projection onto `{x : |x|_1 <= radius}` (sort-based simplex
/// projection of `|v|` with the signs restored).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (k + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - tau).max(0.0))
        .collect()
}

fn project_blocks(x: &mut [f64], block_len: usize) {
    for chunk in x.chunks_mut(block_len) {
        let p = project_l1_ball(chunk, 1.0);
        chunk.copy_from_slice(&p);
    }
}

/// Lattice points of `[-1, 1]^dim` with `points_per_axis` values per axis
/// that lie in the unit l1 ball.
pub fn feasible_grid(points_per_axis: usize, dim: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..points_per_axis)
        .map(|i| -1.0 + 2.0 * i as f64 / (points_per_axis - 1) as f64)
        .collect();
    let mut out = Vec::new();
    let total = points_per_axis.pow(dim as u32);
    for mut idx in 0..total {
        let mut p = vec![0.0; dim];
        for slot in p.iter_mut().rev() {
            *slot = axis[idx % points_per_axis];
            idx /= points_per_axis;
        }
        if p.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 + 1e-12 {
            out.push(p);
        }
    }
    out
}

fn random_l1_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let l1: f64 = raw.iter().map(|x| x.abs()).sum();
    let r: f64 = rng.random_range(0.0..1.0);
    raw.iter().map(|x| x / l1.max(1e-300) * r).collect()
}

/// One ascent trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct AscentRun {
    pub point: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after each accepted step (first entry is the start).
    pub history: Vec<f64>,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn step_to(x: &[f64], g: &[f64], t: f64, block_len: usize) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi + t * gi).collect();
    project_blocks(&mut y, block_len);
    y
}

/// Projected gradient ascent with step halving on decrease. `objective`
/// returns `None` outside its domain, which the line search treats as a
/// decrease.
pub fn ascend<F>(
    objective: F,
    start: &[f64],
    block_len: usize,
    settings: &OptimizerSettings,
    record_history: bool,
) -> Option<AscentRun>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut x = start.to_vec();
    project_blocks(&mut x, block_len);
    let (mut f, mut g) = objective(&x)?;
    let mut history = if record_history { vec![f] } else { Vec::new() };
    let mut t = settings.step_size;
    let t_max = 1e3 * settings.step_size;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iterations {
        let probe = step_to(&x, &g, 1.0, block_len);
        if distance(&probe, &x) <= settings.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while t > 1e-18 {
            let cand = step_to(&x, &g, t, block_len);
            match objective(&cand) {
                Some((fc, gc)) if fc >= f && fc.is_finite() => {
                    x = cand;
                    f = fc;
                    g = gc;
                    t = (2.0 * t).min(t_max);
                    accepted = true;
                    break;
                }
                _ => t *= 0.5,
            }
        }
        if !accepted {
            break;
        }
        if record_history {
            history.push(f);
        }
    }
    if !converged {
        let probe = step_to(&x, &g, 1.0, block_len);
        converged = distance(&probe, &x) <= settings.tolerance;
    }
    Some(AscentRun {
        point: x,
        value: f,
        converged,
        iterations,
        history,
    })
}

fn det3(c: &[f64]) -> f64 {
    // column-major: column j is c[3j..3j+3]
    let m = |i: usize, j: usize| c[3 * j + i];
    m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
}

/// `log det F = 2 log|det C| - sum_j log(1 - (lambda . c_j)^2)` and its
/// gradient with respect to the column-major entries of `C`.
fn log_det_objective(lambdas: &[f64; 3], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let det = det3(c);
    if det.abs() < 1e-150 {
        return None;
    }
    let m = |i: usize, j: usize| c[3 * j + i];
    // cofactor matrix gives d det / d C_ij
    let cof = [
        [
            m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1),
            -(m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)),
            m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0),
        ],
        [
            -(m(0, 1) * m(2, 2) - m(0, 2) * m(2, 1)),
            m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0),
            -(m(0, 0) * m(2, 1) - m(0, 1) * m(2, 0)),
        ],
        [
            m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1),
            -(m(0, 0) * m(1, 2) - m(0, 2) * m(1, 0)),
            m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
        ],
    ];
    let mut value = 2.0 * det.abs().ln();
    let mut grad = vec![0.0; 9];
    for j in 0..3 {
        let x: f64 = (0..3).map(|i| lambdas[i] * m(i, j)).sum();
        let denom = 1.0 - x * x;
        if denom < SINGULAR_TOL {
            return None;
        }
        value -= denom.ln();
        for i in 0..3 {
            grad[3 * j + i] = 2.0 * cof[i][j] / det + 2.0 * x * lambdas[i] / denom;
        }
    }
    Some((value, grad))
}

/// `det F` at a column-major c-matrix, or `None` where undefined.
fn det_fisher_value(lambdas: &[f64; 3], c: &[f64]) -> f64 {
    let det = det3(c);
    let denom: f64 = (0..3)
        .map(|j| {
            let x: f64 = (0..3).map(|i| lambdas[i] * c[3 * j + i]).sum();
            1.0 - x * x
        })
        .product();
    det * det / denom
}

fn to_matrix(c: &[f64]) -> Matrix3<f64> {
    Matrix3::from_column_slice(c)
}

/// A pure-measurement configuration with `m (*) theta = c` for `|c|_1 <= 1`:
/// `m_i = sqrt(|c_i|/s)`, `theta_i = sign(c_i) sqrt(|c_i| s)` with
/// `s = |c|_1`. Axis-aligned `c = s e_k` gives `m = e_k`, `theta = s e_k`.
pub fn realize_c(c: &Vector3<f64>) -> Result<QubitConfiguration> {
    let s: f64 = c.iter().map(|x| x.abs()).sum();
    if s > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("|c|_1 = {s} exceeds 1")));
    }
    if s == 0.0 {
        return QubitConfiguration::new(Vector3::zeros(), Vector3::x());
    }
    let m = c.map(|x| (x.abs() / s).sqrt());
    let theta = c.map(|x| x.signum() * (x.abs() * s).sqrt());
    QubitConfiguration::new(theta, m)
}

#[derive(Clone, Debug, Serialize)]
pub struct StartOutcome {
    pub start: Matrix3<f64>,
    pub end: Matrix3<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizationResult {
    pub best_set: ConfigurationSet,
    pub best_c: Matrix3<f64>,
    pub best_value: f64,
    pub converged: bool,
    /// Starts whose endpoint value is within the agreement tolerance of the best.
    pub starts_agreeing: usize,
    pub starts_converged: usize,
    pub total_starts: usize,
    /// Grid triples with linearly dependent columns (`det F = 0` there), skipped.
    pub degenerate_starts: usize,
    pub endpoints: Vec<StartOutcome>,
    pub warnings: Vec<String>,
    pub settings: OptimizerSettings,
}

fn lex_cmp(a: &Matrix3<f64>, b: &Matrix3<f64>) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn ordering_warnings(lambdas: &[f64]) -> Vec<String> {
    let mut warnings = Vec::new();
    let strict = lambdas
        .windows(2)
        .all(|w| w[0].abs() > w[1].abs());
    if !strict {
        warnings.push(format!(
            "|lambda| is not strictly decreasing ({lambdas:?}); the optimum is degenerate"
        ));
    }
    let cptp = validate_cptp(lambdas, 2);
    if !cptp.valid {
        warnings.push(format!(
            "lambda is not CPTP-valid: {}",
            cptp.violations.join("; ")
        ));
    }
    warnings
}

fn check_contractions(lambdas: &[f64]) -> Result<()> {
    if let Some(l) = lambdas.iter().find(|l| !(l.abs() < 1.0)) {
        return Err(Error::SingularInformation(format!(
            "|lambda| = {} reaches 1; Fisher information diverges",
            l.abs()
        )));
    }
    Ok(())
}

/// Single ascent of `det F` from a start c-matrix (used by
/// [`maximize_det_fisher`]; exposed with history for inspection).
pub fn ascend_det_fisher(
    lambdas: [f64; 3],
    start: &Matrix3<f64>,
    settings: &OptimizerSettings,
    record_history: bool,
) -> Option<AscentRun> {
    let run = ascend(
        |c| log_det_objective(&lambdas, c),
        start.as_slice(),
        3,
        settings,
        record_history,
    )?;
    Some(AscentRun {
        value: det_fisher_value(&lambdas, &run.point),
        history: run.history.iter().map(|v| v.exp()).collect(),
        ..run
    })
}

/// Maximises `det F` over three c-vectors, each in the unit l1 ball, from
/// every non-degenerate triple of feasible grid points.
pub fn maximize_det_fisher(
    lambdas: [f64; 3],
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    settings.validate()?;
    check_contractions(&lambdas)?;
    let warnings = ordering_warnings(&lambdas);

    let grid = feasible_grid(settings.grid_points_per_axis, 3);
    let mut starts: Vec<Matrix3<f64>> = Vec::new();
    let mut degenerate_starts = 0;
    for a in &grid {
        for b in &grid {
            for c in &grid {
                let m = Matrix3::from_columns(&[
                    Vector3::from_column_slice(a),
                    Vector3::from_column_slice(b),
                    Vector3::from_column_slice(c),
                ]);
                if m.determinant().abs() < 1e-9 {
                    degenerate_starts += 1;
                } else {
                    starts.push(m);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut added = 0;
    while added < settings.random_starts {
        let cols: Vec<Vector3<f64>> = (0..3)
            .map(|_| Vector3::from_vec(random_l1_point(&mut rng, 3)))
            .collect();
        let m = Matrix3::from_columns(&cols);
        if m.determinant().abs() >= 1e-9 {
            starts.push(m);
            added += 1;
        }
    }

    let endpoints: Vec<StartOutcome> = starts
        .par_iter()
        .map(|start| {
            let run = ascend_det_fisher(lambdas, start, settings, false)
                .expect("non-degenerate start lies in the objective's domain");
            StartOutcome {
                start: *start,
                end: to_matrix(&run.point),
                value: run.value,
                converged: run.converged,
                iterations: run.iterations,
            }
        })
        .collect();

    let best = endpoints
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lex_cmp(&b.end, &a.end)))
        .ok_or_else(|| Error::InvalidParameter("no non-degenerate starting points".into()))?;
    let best_value = best.value;
    let best_c = best.end;
    let starts_agreeing = endpoints
        .iter()
        .filter(|e| (e.value - best_value).abs() <= settings.agreement_tolerance)
        .count();
    let starts_converged = endpoints.iter().filter(|e| e.converged).count();
    let best_set = ConfigurationSet::new([
        realize_c(&best_c.column(0).into_owned())?,
        realize_c(&best_c.column(1).into_owned())?,
        realize_c(&best_c.column(2).into_owned())?,
    ]);
    Ok(OptimizationResult {
        best_set,
        best_c,
        best_value,
        converged: best.converged,
        starts_agreeing,
        starts_converged,
        total_starts: endpoints.len(),
        degenerate_starts,
        endpoints,
        warnings,
        settings: *settings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockMaximum {
    pub c: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

fn starts_for(dim: usize, settings: &OptimizerSettings, keep: impl Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = if settings.grid_points_per_axis.pow(dim as u32) <= 100_000 {
        feasible_grid(settings.grid_points_per_axis, dim)
    } else {
        Vec::new()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let extra = if starts.is_empty() {
        settings.random_starts.max(256)
    } else {
        settings.random_starts
    };
    for _ in 0..extra {
        starts.push(random_l1_point(&mut rng, dim));
    }
    starts.retain(|s| keep(s));
    starts
}

fn best_of(runs: Vec<AscentRun>) -> Option<AscentRun> {
    runs.into_iter().reduce(|best, r| {
        let better = r.value > best.value
            || (r.value == best.value
                && r.point
                    .iter()
                    .zip(&best.point)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    == Some(std::cmp::Ordering::Less));
        if better {
            r
        } else {
            best
        }
    })
}

/// Maximises the single diagonal entry `F_jj = c_j^2 / (1 - (lambda . c)^2)`
/// over the unit l1 ball in `lambdas.len()` dimensions. The optimum is
/// `c = +-e_j` with value `1/(1 - lambda_j^2)` whatever the length.
pub fn maximize_block_fisher(
    lambdas: &[f64],
    j: usize,
    settings: &OptimizerSettings,
) -> Result<BlockMaximum> {
    settings.validate()?;
    let lambda_j = *lambdas
        .get(j)
        .ok_or_else(|| Error::InvalidParameter(format!("index {j} out of range")))?;
    if !(lambda_j.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("|lambda_j| = {} >= 1", lambda_j.abs())));
    }
    let dim = lambdas.len();
    let objective = |c: &[f64]| -> Option<(f64, Vec<f64>)> {
        let x: f64 = lambdas.iter().zip(c).map(|(l, ci)| l * ci).sum();
        let denom = 1.0 - x * x;
        if denom < SINGULAR_TOL {
            return None;
        }
        let cj = c[j];
        let value = cj * cj / denom;
        let grad = (0..dim)
            .map(|i| {
                let own = if i == j { 2.0 * cj / denom } else { 0.0 };
                own + cj * cj * 2.0 * x * lambdas[i] / (denom * denom)
            })
            .collect();
        Some((value, grad))
    };
    let starts = starts_for(dim, settings, |s| s[j].abs() > 1e-12);
    let runs: Vec<AscentRun> = starts
        .par_iter()
        .filter_map(|s| ascend(objective, s, dim, settings, false))
        .collect();
    let best = best_of(runs).ok_or_else(|| Error::InvalidParameter("no usable starts".into()))?;
    Ok(BlockMaximum {
        c: best.point,
        value: best.value,
        converged: best.converged,
    })
}

/// Maximises `Tr F = |c|^2 / (1 - (lambda . c)^2)` over c supported on the
/// coordinates in `available`.
fn maximize_trace_on(
    lambdas: &[f64; 3],
    available: &[usize],
    settings: &OptimizerSettings,
) -> Result<AscentRun> {
    let sub: Vec<f64> = available.iter().map(|&i| lambdas[i]).collect();
    let dim = sub.len();
    let objective = |c: &[f64]| -> Option<(f64, Vec<f64>)> {
        let x: f64 = sub.iter().zip(c).map(|(l, ci)| l * ci).sum();
        let denom = 1.0 - x * x;
        if denom < SINGULAR_TOL {
            return None;
        }
        let s: f64 = c.iter().map(|v| v * v).sum();
        let grad = (0..dim)
            .map(|i| 2.0 * c[i] / denom + s * 2.0 * x * sub[i] / (denom * denom))
            .collect();
        Some((s / denom, grad))
    };
    let starts = starts_for(dim, settings, |s| s.iter().any(|v| v.abs() > 1e-12));
    let runs: Vec<AscentRun> = starts
        .par_iter()
        .filter_map(|s| ascend(objective, s, dim, settings, false))
        .collect();
    let best = best_of(runs).ok_or_else(|| Error::InvalidParameter("no usable starts".into()))?;
    let mut full = vec![0.0; 3];
    for (k, &i) in available.iter().enumerate() {
        full[i] = best.point[k];
    }
    Ok(AscentRun { point: full, ..best })
}

#[derive(Clone, Debug, Serialize)]
pub struct GreedyResult {
    pub set: ConfigurationSet,
    /// Axis chosen at each step.
    pub order: [usize; 3],
    /// Trace Fisher information gained at each step.
    pub values: [f64; 3],
}

/// Picks configurations one at a time, each maximising the trace Fisher
/// information among directions orthogonal to those already measured.
pub fn greedy_sequential_configuration(
    lambdas: [f64; 3],
    settings: &OptimizerSettings,
) -> Result<GreedyResult> {
    settings.validate()?;
    check_contractions(&lambdas)?;
    let mut available = vec![0, 1, 2];
    let mut order = [0; 3];
    let mut values = [0.0; 3];
    let mut configs = Vec::with_capacity(3);
    for step in 0..3 {
        let run = maximize_trace_on(&lambdas, &available, settings)?;
        let axis = available
            .iter()
            .copied()
            .max_by(|&a, &b| run.point[a].abs().total_cmp(&run.point[b].abs()).then(b.cmp(&a)))
            .expect("non-empty");
        order[step] = axis;
        values[step] = run.value;
        configs.push(QubitConfiguration::axis(axis, 1.0));
        available.retain(|&i| i != axis);
    }
    Ok(GreedyResult {
        set: ConfigurationSet::new([configs[0], configs[1], configs[2]]),
        order,
        values,
    })
}
