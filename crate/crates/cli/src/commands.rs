//! The six commands, each turning a spec into result tables.

use nalgebra::{DMatrix, Matrix3, Vector3};
use pauli_channel_est::basis::{
    basis_for_dim, bloch_qubit_effect, bloch_qubit_state, CoefficientVector, SubalgebraDecomposition,
};
use pauli_channel_est::channel::GeneralizedPauliChannel;
use pauli_channel_est::estimator::{
    estimate_lambda_known_directions, full_direction_estimate, BlochTriple, FrequencyMatrix,
    LinearObservation,
};
use pauli_channel_est::fisher::{
    block_fisher_diag, cramer_rao_bound, generalized_fisher_matrix, max_fisher_info,
    optimal_block_config, optimal_qubit_configuration, qubit_fisher_matrix, total_fisher_matrix,
    FisherMatrix, MeasurementConfiguration, QubitConfiguration,
};
use pauli_channel_est::optimizer::{
    greedy_sequential_configuration, maximize_block_fisher, maximize_det_fisher,
};
use pauli_channel_est::simulator::{canonical_truth, run_monte_carlo, sweep_orthogonality, sweep_scaling, MseReport};
use pauli_channel_est::{Error, Result};
use serde_json::{json, Value};

use crate::output::{Cell, CommandOutput, RunInfo, Table};
use crate::spec::{frequency_matrix, ConfigurationEntry, SpecFile, SweepSection, TripleSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Fisher,
    OptimalConfig,
    Optimize,
    Estimate,
    Simulate,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fisher => "fisher",
            Command::OptimalConfig => "optimal-config",
            Command::Optimize => "optimize",
            Command::Estimate => "estimate",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }
}

pub fn execute(cmd: Command, spec: &SpecFile) -> Result<CommandOutput> {
    let mut out = match cmd {
        Command::Fisher => fisher(spec),
        Command::OptimalConfig => optimal_config(spec),
        Command::Optimize => optimize(spec),
        Command::Estimate => estimate(spec),
        Command::Simulate => simulate(spec),
        Command::Sweep => sweep(spec),
    }?;
    out.command = cmd.name().to_string();
    Ok(out)
}

pub fn run_info(spec: &SpecFile) -> RunInfo {
    RunInfo {
        spec_hash: spec.hash(),
        seed: spec.seed,
        spec: serde_json::to_value(spec).expect("spec serializes"),
    }
}

fn output(tables: Vec<Table>, details: Value) -> CommandOutput {
    CommandOutput {
        command: String::new(),
        tables,
        details,
        failures: 0,
        warnings: Vec::new(),
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn push_entries(t: &mut Table, label: &str, f: &FisherMatrix) {
    for i in 0..f.size() {
        for j in 0..f.size() {
            t.push(vec![label.into(), i.into(), j.into(), f.get(i, j).into()]);
        }
    }
}

struct FisherTables {
    summary: Table,
    entries: Table,
}

impl FisherTables {
    fn new() -> Self {
        Self {
            summary: Table::new("summary", &["config", "p", "trace", "det"]),
            entries: Table::new("entries", &["config", "i", "j", "value"]),
        }
    }

    fn add(&mut self, label: &str, p: Option<f64>, f: &FisherMatrix) {
        self.summary.push(vec![
            label.into(),
            p.map_or(Cell::Text(String::new()), Cell::Num),
            f.trace().into(),
            f.determinant().into(),
        ]);
        push_entries(&mut self.entries, label, f);
    }
}

fn cramer_rao_table(total: &FisherMatrix, warnings: &mut Vec<String>) -> Result<(Table, Value)> {
    let mut t = Table::new("cramer_rao", &["i", "j", "value"]);
    match cramer_rao_bound(total) {
        Ok(bound) => {
            for i in 0..bound.nrows() {
                for j in 0..bound.ncols() {
                    t.push(vec![i.into(), j.into(), bound[(i, j)].into()]);
                }
            }
            Ok((t, json!({ "bounded": true })))
        }
        Err(Error::UnboundedVariance { null_directions }) => {
            warnings.push(format!(
                "total Fisher matrix is singular; {} parameter direction(s) have unbounded variance",
                null_directions.len()
            ));
            Ok((t, json!({ "bounded": false, "null_directions": null_directions })))
        }
        Err(e) => Err(e),
    }
}

fn generalized_channel(spec: &SpecFile, decomposition: SubalgebraDecomposition) -> Result<GeneralizedPauliChannel> {
    let ch = spec.channel()?;
    if ch.angles.iter().any(|a| *a != 0.0) {
        return Err(Error::Spec("angles apply only to qubit channels".into()));
    }
    GeneralizedPauliChannel::new(decomposition, ch.lambdas.clone())
}

fn block_kind_label(d: &SubalgebraDecomposition, j: usize) -> String {
    d.kind(j).map_or_else(String::new, |k| k.to_string())
}

fn fisher(spec: &SpecFile) -> Result<CommandOutput> {
    if spec.configurations.is_empty() {
        return Err(Error::Spec("no [[configurations]] given".into()));
    }
    let decomposition = spec.decomposition()?;
    let qubit_only = decomposition.is_none()
        && spec
            .configurations
            .iter()
            .all(|c| matches!(c, ConfigurationEntry::Qubit { .. }));
    let mut tables = FisherTables::new();
    let mut warnings = Vec::new();
    let mut blocks = Table::new("block_optimal", &["block", "kind", "rank", "d", "f_jj", "i_max"]);
    let mut total: Option<FisherMatrix> = None;
    let mut accumulate = |f: &FisherMatrix| -> Result<()> {
        total = Some(match total.take() {
            None => f.clone(),
            Some(t) => t.add(f)?,
        });
        Ok(())
    };

    if qubit_only {
        let lambdas = spec.aligned_lambdas()?;
        for (k, entry) in spec.configurations.iter().enumerate() {
            let ConfigurationEntry::Qubit { theta, m } = entry else { unreachable!() };
            let cfg = QubitConfiguration::new(Vector3::from(*theta), Vector3::from(*m))?;
            let f = qubit_fisher_matrix(lambdas, &cfg)?;
            let c = cfg.c();
            let p = 0.5 * (1.0 + Vector3::from(lambdas).dot(&c));
            tables.add(&k.to_string(), Some(p), &f);
            accumulate(&f)?;
        }
    } else {
        let d = match decomposition {
            Some(d) => d,
            None => SubalgebraDecomposition::preset("M2-pauli")?,
        };
        let ch = generalized_channel(spec, d.clone())?;
        let basis = basis_for_dim(d.dim())?;
        for (k, entry) in spec.configurations.iter().enumerate() {
            let cfg = match entry {
                ConfigurationEntry::Qubit { theta, m } => {
                    if d.dim() != 2 {
                        return Err(Error::Spec(format!(
                            "configuration {k} uses Bloch vectors but the dimension is {}",
                            d.dim()
                        )));
                    }
                    MeasurementConfiguration::new(bloch_qubit_state(*theta)?, bloch_qubit_effect(*m)?, &d)?
                }
                ConfigurationEntry::Coefficients { state, effect } => MeasurementConfiguration::new(
                    CoefficientVector::state(state.clone())?,
                    CoefficientVector::effect(effect.clone())?,
                    &d,
                )?,
                ConfigurationEntry::OptimalBlock { optimal_block } => {
                    let j = *optimal_block;
                    let opt = optimal_block_config(&d, &basis, j)?;
                    let lambda_j = ch.lambdas()[j];
                    blocks.push(vec![
                        j.into(),
                        block_kind_label(&d, j).into(),
                        opt.rank.into(),
                        opt.d.into(),
                        block_fisher_diag(&ch, &opt.config, j)?.into(),
                        max_fisher_info(d.dim(), opt.rank, lambda_j)?.into(),
                    ]);
                    opt.config
                }
            };
            let f = generalized_fisher_matrix(&ch, &cfg)?;
            let p = cfg.offset() + ch.lambdas().iter().zip(&cfg.c).map(|(l, c)| l * c).sum::<f64>();
            tables.add(&k.to_string(), Some(p), &f);
            accumulate(&f)?;
        }
    }
    let total = total.expect("at least one configuration");
    tables.add("total", None, &total);
    let (crb, crb_details) = cramer_rao_table(&total, &mut warnings)?;
    let mut out_tables = vec![tables.summary, tables.entries, crb];
    if !blocks.rows.is_empty() {
        out_tables.push(blocks);
    }
    let mut out = output(
        out_tables,
        json!({ "total_fisher": matrix_rows(total.entries()), "cramer_rao": crb_details }),
    );
    out.warnings = warnings;
    Ok(out)
}

fn configuration_table(configs: &[QubitConfiguration]) -> Table {
    let mut t = Table::new(
        "configurations",
        &["config", "theta_x", "theta_y", "theta_z", "m_x", "m_y", "m_z"],
    );
    for (k, c) in configs.iter().enumerate() {
        let mut row: Vec<Cell> = vec![k.into()];
        row.extend(c.theta.iter().map(|v| Cell::Num(*v)));
        row.extend(c.m.iter().map(|v| Cell::Num(*v)));
        t.push(row);
    }
    t
}

fn c_matrix_table(c: &Matrix3<f64>) -> Table {
    let mut t = Table::new("c_matrix", &["row", "c0", "c1", "c2"]);
    for i in 0..3 {
        t.push(vec![i.into(), c[(i, 0)].into(), c[(i, 1)].into(), c[(i, 2)].into()]);
    }
    t
}

fn optimal_config(spec: &SpecFile) -> Result<CommandOutput> {
    match spec.decomposition()? {
        None => {
            let lambdas = spec.aligned_lambdas()?;
            let set = optimal_qubit_configuration();
            let f = total_fisher_matrix(lambdas, &set)?;
            let mut info = Table::new("information", &["parameter", "lambda", "f_jj", "i_max"]);
            for j in 0..3 {
                info.push(vec![
                    j.into(),
                    lambdas[j].into(),
                    f.get(j, j).into(),
                    (1.0 / (1.0 - lambdas[j] * lambdas[j])).into(),
                ]);
            }
            let mut summary = Table::new("summary", &["det", "trace"]);
            summary.push(vec![f.determinant().into(), f.trace().into()]);
            Ok(output(
                vec![
                    configuration_table(&set.configs),
                    c_matrix_table(&set.c_matrix()),
                    info,
                    summary,
                ],
                Value::Null,
            ))
        }
        Some(d) => {
            let ch = generalized_channel(spec, d.clone())?;
            let basis = basis_for_dim(d.dim())?;
            let mut t = Table::new(
                "blocks",
                &["block", "kind", "size", "lambda", "rank", "d", "offset", "f_jj", "i_max"],
            );
            let mut details = Vec::new();
            for j in 0..d.num_blocks() {
                let opt = optimal_block_config(&d, &basis, j)?;
                let lambda_j = ch.lambdas()[j];
                t.push(vec![
                    j.into(),
                    block_kind_label(&d, j).into(),
                    d.blocks()[j].len().into(),
                    lambda_j.into(),
                    opt.rank.into(),
                    opt.d.into(),
                    opt.config.offset().into(),
                    block_fisher_diag(&ch, &opt.config, j)?.into(),
                    max_fisher_info(d.dim(), opt.rank, lambda_j)?.into(),
                ]);
                details.push(json!({
                    "block": j,
                    "state": opt.config.state.coeffs(),
                    "effect": opt.config.effect.coeffs(),
                }));
            }
            Ok(output(vec![t], json!({ "configurations": details })))
        }
    }
}

fn optimize(spec: &SpecFile) -> Result<CommandOutput> {
    let lambdas = spec.aligned_lambdas()?;
    let settings = spec.optimizer_settings()?;
    let r = maximize_det_fisher(lambdas, &settings)?;
    let mut summary = Table::new(
        "summary",
        &[
            "best_det",
            "converged",
            "starts_agreeing",
            "starts_converged",
            "total_starts",
            "degenerate_starts",
        ],
    );
    summary.push(vec![
        r.best_value.into(),
        r.converged.into(),
        r.starts_agreeing.into(),
        r.starts_converged.into(),
        r.total_starts.into(),
        r.degenerate_starts.into(),
    ]);
    let greedy = greedy_sequential_configuration(lambdas, &settings)?;
    let mut g = Table::new("greedy", &["step", "axis", "trace_information"]);
    for k in 0..3 {
        g.push(vec![k.into(), greedy.order[k].into(), greedy.values[k].into()]);
    }
    let mut blocks = Table::new("block_maxima", &["parameter", "value", "c0", "c1", "c2", "converged"]);
    for j in 0..3 {
        let b = maximize_block_fisher(&lambdas, j, &settings)?;
        blocks.push(vec![
            j.into(),
            b.value.into(),
            b.c[0].into(),
            b.c[1].into(),
            b.c[2].into(),
            b.converged.into(),
        ]);
    }
    let mut tables = vec![
        summary,
        c_matrix_table(&r.best_c),
        configuration_table(&r.best_set.configs),
        g,
        blocks,
    ];
    if spec.optimizer.as_ref().is_some_and(|o| o.report_starts) {
        let mut cols = vec!["start", "value", "converged", "iterations"];
        let names: Vec<String> = (0..9).map(|k| format!("c{}{}", k % 3, k / 3)).collect();
        cols.extend(names.iter().map(String::as_str));
        let mut t = Table::new("starts", &cols);
        for (k, e) in r.endpoints.iter().enumerate() {
            let mut row: Vec<Cell> = vec![k.into(), e.value.into(), e.converged.into(), e.iterations.into()];
            row.extend(e.end.iter().map(|v| Cell::Num(*v)));
            t.push(row);
        }
        tables.push(t);
    }
    let mut out = output(tables, json!({ "settings": r.settings }));
    out.warnings = r.warnings.clone();
    Ok(out)
}

fn resolve_triple(t: &Option<TripleSpec>, seed: u64) -> Result<BlochTriple> {
    match t {
        Some(t) => t.resolve(seed),
        None => Ok(BlochTriple::identity()),
    }
}

fn estimate(spec: &SpecFile) -> Result<CommandOutput> {
    let sec = spec.estimate()?;
    if sec.frequencies.is_none() && sec.known_frequencies.is_none() {
        return Err(Error::Spec("[estimate] needs `frequencies` or `known_frequencies`".into()));
    }
    let mut tables = Vec::new();
    let mut details = json!({});
    if let Some(rows) = &sec.frequencies {
        let inputs = resolve_triple(&sec.inputs, spec.seed)?;
        let measurements = resolve_triple(&sec.measurements, spec.seed)?;
        let nu = frequency_matrix(rows);
        let freq = match sec.shots {
            Some(n) => FrequencyMatrix::new(nu, [[n; 3]; 3])?,
            None => FrequencyMatrix::exact(nu)?,
        };
        let est = full_direction_estimate(&inputs, &measurements, &freq)?;
        let mut t = Table::new(
            "estimate",
            &[
                "lambda_1", "lambda_2", "lambda_3", "phi_1", "phi_2", "phi_3", "low_confidence",
                "gimbal_lock", "residual",
            ],
        );
        let mut row: Vec<Cell> = est.lambdas.iter().map(|v| Cell::Num(*v)).collect();
        row.extend(est.angles.iter().map(|v| Cell::Num(*v)));
        row.extend([est.low_confidence.into(), est.gimbal_lock.into(), est.residual.into()]);
        t.push(row);
        let mut a = Table::new("channel_matrix", &["row", "raw0", "raw1", "raw2", "sym0", "sym1", "sym2"]);
        for i in 0..3 {
            let mut row: Vec<Cell> = vec![i.into()];
            row.extend((0..3).map(|j| Cell::Num(est.raw_a[(i, j)])));
            row.extend((0..3).map(|j| Cell::Num(est.symmetrized_a[(i, j)])));
            a.push(row);
        }
        tables.push(t);
        tables.push(a);
        details["inputs"] = json!(inputs.matrix());
        details["measurements"] = json!(measurements.matrix());
    }
    if let Some(freqs) = &sec.known_frequencies {
        let obs = known_observations(spec)?;
        let lambdas = estimate_lambda_known_directions(&obs, freqs)?;
        let mut t = Table::new("known_directions", &["parameter", "lambda"]);
        for (j, l) in lambdas.iter().enumerate() {
            t.push(vec![j.into(), (*l).into()]);
        }
        tables.push(t);
    }
    Ok(output(tables, details))
}

fn known_observations(spec: &SpecFile) -> Result<Vec<LinearObservation>> {
    let decomposition = spec.decomposition()?;
    let basis = decomposition.as_ref().map(|d| basis_for_dim(d.dim())).transpose()?;
    spec.configurations
        .iter()
        .map(|entry| match (entry, &decomposition, &basis) {
            (ConfigurationEntry::Qubit { theta, m }, None, _) => Ok(LinearObservation::from_qubit(
                &QubitConfiguration::new(Vector3::from(*theta), Vector3::from(*m))?,
            )),
            (ConfigurationEntry::Coefficients { state, effect }, Some(d), _) => {
                let cfg = MeasurementConfiguration::new(
                    CoefficientVector::state(state.clone())?,
                    CoefficientVector::effect(effect.clone())?,
                    d,
                )?;
                Ok(LinearObservation::from_configuration(&cfg))
            }
            (ConfigurationEntry::OptimalBlock { optimal_block }, Some(d), Some(b)) => Ok(
                LinearObservation::from_configuration(&optimal_block_config(d, b, *optimal_block)?.config),
            ),
            _ => Err(Error::Spec(
                "qubit configurations need no [decomposition]; coefficient and block configurations need one"
                    .into(),
            )),
        })
        .collect()
}

const MSE_COLUMNS: [&str; 6] = [
    "mse_lambda_1",
    "mse_lambda_2",
    "mse_lambda_3",
    "mse_phi_1",
    "mse_phi_2",
    "mse_phi_3",
];

fn mse_cells(r: &MseReport) -> Vec<Cell> {
    r.mse_lambda
        .iter()
        .chain(r.mse_phi.iter())
        .map(|v| Cell::Num(*v))
        .collect()
}

fn experiment_details(spec: &SpecFile) -> Result<Value> {
    let e = spec.experiment()?;
    let (lambdas, angles) = canonical_truth(&e.truth)?;
    Ok(json!({
        "inputs": e.inputs.matrix(),
        "measurements": e.measurements.matrix(),
        "reference_lambdas": lambdas,
        "reference_angles": angles,
    }))
}

fn simulate(spec: &SpecFile) -> Result<CommandOutput> {
    let e = spec.experiment()?;
    let r = run_monte_carlo(&e)?;
    let mut cols = vec!["shots", "repetitions", "weight"];
    cols.extend(MSE_COLUMNS);
    cols.extend(["v", "n_times_v", "failures"]);
    let mut t = Table::new("mse", &cols);
    let mut row: Vec<Cell> = vec![r.shots.into(), r.trials.into(), r.weight.into()];
    row.extend(mse_cells(&r));
    row.extend([r.objective_v.into(), r.n_times_v.into(), r.failures.into()]);
    t.push(row);
    let mut out = output(vec![t], experiment_details(spec)?);
    out.failures = r.failures;
    Ok(out)
}

fn sweep(spec: &SpecFile) -> Result<CommandOutput> {
    let e = spec.experiment()?;
    let section = spec.sweep()?;
    let out = match section {
        SweepSection::Orthogonality { angles_deg } => {
            let s = sweep_orthogonality(&e, angles_deg)?;
            let mut cols = vec!["alpha_deg", "det", "abs_det"];
            cols.extend(MSE_COLUMNS);
            cols.extend(["v", "n_times_v", "failures"]);
            let mut t = Table::new("orthogonality", &cols);
            let mut failures = 0;
            for row in &s.rows {
                let mut cells: Vec<Cell> = vec![row.alpha_deg.into(), row.det.into(), row.det.abs().into()];
                cells.extend(mse_cells(&row.report));
                cells.extend([
                    row.report.objective_v.into(),
                    row.report.n_times_v.into(),
                    row.report.failures.into(),
                ]);
                failures += row.report.failures;
                t.push(cells);
            }
            let mut out = output(vec![t], experiment_details(spec)?);
            out.details["skipped_angles_deg"] = json!(s.skipped);
            out.warnings = s
                .skipped
                .iter()
                .map(|a| format!("alpha = {a} deg skipped: input triple is near-singular"))
                .collect();
            out.failures = failures;
            out
        }
        SweepSection::Scaling { shots, weights } => {
            let rows = sweep_scaling(&e, shots, weights)?;
            let mut cols = vec!["c", "n", "v", "n_times_v"];
            cols.extend(MSE_COLUMNS);
            cols.push("failures");
            let mut t = Table::new("scaling", &cols);
            for r in &rows {
                let mut cells: Vec<Cell> = vec![r.weight.into(), r.shots.into(), r.v.into(), r.n_times_v.into()];
                cells.extend(mse_cells(&r.report));
                cells.push(r.report.failures.into());
                t.push(cells);
            }
            let failures = rows
                .iter()
                .filter(|r| r.weight == rows[0].weight)
                .map(|r| r.report.failures)
                .sum();
            let mut out = output(vec![t], experiment_details(spec)?);
            out.failures = failures;
            out
        }
    };
    Ok(out)
}
