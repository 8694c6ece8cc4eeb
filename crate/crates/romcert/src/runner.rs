//! Subcommand implementations behind the thin command-line binary.
//!
//! Each runner receives an already validated [`ExperimentConfig`], computes
//! its results in memory, and only then writes artifacts under the
//! configured output directory, so a failing run leaves no partial files.
//! Every CSV starts with a comment carrying the hash of the effective
//! configuration; rerunning a subcommand with the same file and seed
//! reproduces the numeric payload byte for byte. Timings go to the JSON
//! result files only, keeping the CSVs deterministic.

use crate::closure::{build_defect_tensor, train_closure, two_stage_svd, ClosureModel};
use crate::config::{parameter_grid, ExperimentConfig, SourceKind};
use crate::error::{Error, Result};
use crate::estimator::{
    column_norms, output_error_estimate, residual_corrected, scheme_residual, solve_dual,
    stability_constants, EstimatorVariant,
};
use crate::io;
use crate::linalg::PowerIterOpts;
use crate::models::{assemble, build, ModelId, OdeSystem, TimeGrid};
use crate::reduction::{
    pod_greedy_ode, pod_greedy_standard, seeded_split, strided_defect_indices, GreedyIteration,
    OdeGreedyOpts, ReducedBasis, Rom, StandardGreedyOpts, TrajectorySource,
};
use crate::timestepping::{solve_blackbox, ImexOps};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Stable machine-readable tag for each error class, used in the error JSON
/// that the binary prints on failure.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::DomainViolation { .. } => "domain-violation",
        Error::DimensionMismatch { .. } => "dimension-mismatch",
        Error::IntegrationFailure { .. } => "integration-failure",
        Error::SingularMatrix(_) => "singular-matrix",
        Error::IllConditioned { .. } => "ill-conditioned",
        Error::GridMismatch(_) => "grid-mismatch",
        Error::InvalidArgument(_) => "invalid-argument",
        Error::TrainingDiverged(_) => "training-diverged",
        Error::DegenerateRatio { .. } => "degenerate-ratio",
        Error::MissingInput(_) => "missing-input",
        Error::Config(_) => "config",
        Error::UnknownModel(_) => "unknown-model",
        Error::Io(_) => "io",
        Error::Format(_) => "format",
    }
}

/// One-line JSON error report: `{"error":{"kind":...,"message":...}}`.
pub fn error_json(e: &Error) -> String {
    json!({ "error": { "kind": error_kind(e), "message": e.to_string() } }).to_string()
}

/// Greedy run record persisted as `result.json`; the `estimate` subcommand
/// reads it back to rebuild the sweep setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyRecord {
    pub model: ModelId,
    pub alg: u8,
    /// Trajectory route of the closure-free driver ("blackbox" or "march");
    /// the closure-aware driver always integrates snapshots adaptively.
    pub source: String,
    pub converged: bool,
    pub n: usize,
    pub final_epsilon: f64,
    pub rho_bar: Option<f64>,
    pub history: Vec<GreedyIteration>,
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(&cfg.output.dir)
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

/// Column names "p1".."pd" followed by the extra columns.
fn columns(dim: usize, extra: &[&str]) -> Vec<String> {
    let mut cols: Vec<String> = (1..=dim).map(|i| format!("p{i}")).collect();
    cols.extend(extra.iter().map(|s| s.to_string()));
    cols
}

fn header_refs(cols: &[String]) -> Vec<&str> {
    cols.iter().map(String::as_str).collect()
}

fn fmt_params(p: &[f64]) -> Vec<String> {
    p.iter().map(|&v| io::format_float(v)).collect()
}

fn grid_time(grid: &TimeGrid, k: usize) -> f64 {
    grid.t0 + k as f64 * grid.dt
}

/// Training/test split of the tensor-product parameter sample, in the
/// seeded shuffle order that also fixes the initial greedy parameter.
fn split_sets(
    cfg: &ExperimentConfig,
    sys: &dyn OdeSystem,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let xi = parameter_grid(sys.param_domain(), &cfg.params.grid)?;
    Ok(seeded_split(&xi, cfg.params.train_fraction, cfg.seed))
}

/// Integrate the full model with the adaptive solver at the configured
/// parameter and dump states, outputs and run metadata.
pub fn simulate_fom(cfg: &ExperimentConfig) -> Result<()> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| {
        Error::MissingInput("a [simulate] section with the parameter p".into())
    })?;
    let sys = assemble(cfg.model.id, &sim.p, cfg.model.n_cells)?;
    let grid = cfg.time.to_grid()?;
    let traj = solve_blackbox(sys.as_ref(), &sim.p, grid, &cfg.solver.to_solver_config())?;
    let y = sys.output_matrix() * &traj.states;
    let hash = cfg.sha256()?;
    let dir = out_dir(cfg);

    let states_path = dir.join("trajectory.bin");
    io::write_matrix(&states_path, &traj.states)?;
    wrote(&states_path);

    let meta_path = dir.join("trajectory_meta.json");
    io::write_json(
        &meta_path,
        &json!({
            "model": cfg.model.id,
            "parameter": sim.p,
            "t0": grid.t0,
            "dt": grid.dt,
            "steps": grid.steps,
            "state_dim": sys.dim(),
            "provenance": "blackbox",
            "config_sha256": hash,
        }),
    )?;
    wrote(&meta_path);

    let y_cols: Vec<String> = (1..=y.nrows()).map(|i| format!("y{i}")).collect();
    let mut cols = vec!["k".to_string(), "t".to_string()];
    cols.extend(y_cols);
    let mut rows = Vec::with_capacity(y.ncols());
    for k in 0..y.ncols() {
        let mut row = vec![k.to_string(), io::format_float(grid_time(&grid, k))];
        row.extend(y.column(k).iter().map(|&v| io::format_float(v)));
        rows.push(row);
    }
    let csv_path = dir.join("outputs.csv");
    io::write_csv(&csv_path, &hash, &header_refs(&cols), &rows)?;
    wrote(&csv_path);
    Ok(())
}

/// Sample exact defects over the closure subset of the training set, fit
/// the surrogate, and persist both the tensor and the trained model.
pub fn closure_train(cfg: &ExperimentConfig) -> Result<()> {
    let sys = build(cfg.model.id, cfg.model.n_cells)?;
    let grid = cfg.time.to_grid()?;
    let (train, _) = split_sets(cfg, sys.as_ref())?;
    let indices = strided_defect_indices(&train, cfg.closure.d_s.min(train.len()))?;
    let defect_params: Vec<Vec<f64>> = indices.iter().map(|&i| train[i].clone()).collect();

    let (tensor, _trajs) = build_defect_tensor(
        sys.as_ref(),
        &defect_params,
        &grid,
        cfg.scheme.kind,
        &cfg.solver.to_solver_config(),
    )?;
    let (model, stages) = train_closure(
        &tensor,
        sys.param_domain(),
        cfg.closure.tol_svd_t,
        cfg.closure.tol_svd_p,
        &cfg.surrogate_kind()?,
    )?;

    let hash = cfg.sha256()?;
    let dir = out_dir(cfg);
    let tensor_dir = dir.join("defects");
    io::write_defect_tensor(&tensor_dir, &tensor)?;
    wrote(&tensor_dir.join("manifest.json"));

    let model_path = dir.join("closure").join("model.json");
    io::write_json(&model_path, &model)?;
    wrote(&model_path);

    let summary_path = dir.join("closure").join("summary.json");
    io::write_json(
        &summary_path,
        &json!({
            "model": cfg.model.id,
            "surrogate": cfg.surrogate_kind()?.label(),
            "n_samples": tensor.n_samples(),
            "state_dim": tensor.state_dim(),
            "defect_modes": stages.n_modes(),
            "slice_ranks": stages.slice_ranks,
            "config_sha256": hash,
        }),
    )?;
    wrote(&summary_path);
    println!(
        "closure: {} samples compressed to {} defect modes",
        tensor.n_samples(),
        stages.n_modes()
    );
    Ok(())
}

/// Greedy reduced-basis construction; driver 1 is the closure-free variant,
/// driver 2 trains and carries the defect closure.
pub fn greedy(cfg: &ExperimentConfig) -> Result<()> {
    let sys = build(cfg.model.id, cfg.model.n_cells)?;
    let grid = cfg.time.to_grid()?;
    let (train, _) = split_sets(cfg, sys.as_ref())?;
    let solver = cfg.solver.to_solver_config();

    let result = match cfg.greedy.alg {
        1 => {
            let source = match cfg.greedy.source {
                SourceKind::Blackbox => TrajectorySource::Blackbox(solver),
                SourceKind::March => TrajectorySource::SchemeMarch,
            };
            let mut opts =
                StandardGreedyOpts::new(cfg.greedy.tol, cfg.greedy.r_c, cfg.scheme.kind, grid, source);
            opts.max_iters = cfg.greedy.max_iters;
            pod_greedy_standard(sys.as_ref(), &train, &opts)?
        }
        2 => {
            let mut opts =
                OdeGreedyOpts::new(cfg.greedy.tol, cfg.greedy.r_c, cfg.scheme.kind, grid);
            opts.solver = solver;
            opts.tol_svd_t = cfg.closure.tol_svd_t;
            opts.tol_svd_p = cfg.closure.tol_svd_p;
            opts.surrogate = cfg.surrogate_kind()?;
            opts.update_defect = cfg.closure.update_defect;
            opts.max_iters = cfg.greedy.max_iters;
            let indices = strided_defect_indices(&train, cfg.closure.d_s.min(train.len()))?;
            pod_greedy_ode(sys.as_ref(), &train, &indices, &opts)?
        }
        other => return Err(Error::Config(format!("greedy.alg must be 1 or 2, got {other}"))),
    };

    let hash = cfg.sha256()?;
    let dir = out_dir(cfg);

    let basis_path = dir.join("basis.bin");
    io::write_matrix(&basis_path, &result.basis)?;
    wrote(&basis_path);

    let record = GreedyRecord {
        model: cfg.model.id,
        alg: cfg.greedy.alg,
        source: match cfg.greedy.source {
            SourceKind::Blackbox => "blackbox".into(),
            SourceKind::March => "march".into(),
        },
        converged: result.converged,
        n: result.n(),
        final_epsilon: result.final_epsilon(),
        rho_bar: result.rho_bar,
        history: result.history.clone(),
    };
    let result_path = dir.join("result.json");
    io::write_json(&result_path, &record)?;
    wrote(&result_path);

    if let Some(closure) = &result.closure {
        let model_path = dir.join("closure").join("model.json");
        io::write_json(&model_path, closure)?;
        wrote(&model_path);
    }

    let dim = sys.param_domain().dim();
    let cols = columns(dim, &["epsilon", "basis_size"]);
    let mut cols_full = vec!["iter".to_string()];
    cols_full.extend(cols);
    let rows: Vec<Vec<String>> = result
        .history
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let mut row = vec![i.to_string()];
            row.extend(fmt_params(&it.param));
            row.push(io::format_float(it.epsilon));
            row.push(it.basis_size.to_string());
            row
        })
        .collect();
    let conv_path = dir.join("convergence.csv");
    io::write_csv(&conv_path, &hash, &header_refs(&cols_full), &rows)?;
    wrote(&conv_path);

    println!(
        "greedy driver {}: converged={} n={} epsilon={:.3e}",
        cfg.greedy.alg,
        result.converged,
        result.n(),
        result.final_epsilon()
    );
    Ok(())
}

/// Error-estimate sweep over the held-out test set, using the basis and
/// (for the closure-aware driver) the closure trained by `greedy` in the
/// same output directory.
pub fn estimate(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg);
    let record: GreedyRecord = io::read_json(&dir.join("result.json"))?;
    if record.model != cfg.model.id {
        return Err(Error::Config(format!(
            "result.json was produced for model {:?}, the configuration names {:?}",
            record.model, cfg.model.id
        )));
    }
    let basis = io::read_matrix(&dir.join("basis.bin"))?;
    let sys = build(cfg.model.id, cfg.model.n_cells)?;
    if basis.nrows() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "stored basis rows against the model dimension".into(),
            expected: sys.dim(),
            got: basis.nrows(),
        });
    }
    let closure: Option<ClosureModel> = if record.alg == 2 {
        Some(io::read_json(&dir.join("closure").join("model.json"))?)
    } else {
        None
    };

    let grid = cfg.time.to_grid()?;
    let scheme = cfg.scheme.kind;
    let solver = cfg.solver.to_solver_config();
    let (_, test) = split_sets(cfg, sys.as_ref())?;
    if test.is_empty() {
        return Err(Error::InvalidArgument(
            "the parameter sample leaves no test set; enlarge params.grid".into(),
        ));
    }
    let variant = cfg.estimate_variant()?;
    let rho = record.rho_bar.unwrap_or(1.0);
    let rom = Rom::new(sys.as_ref(), basis)?;

    let dim = sys.param_domain().dim();
    let step_cols = columns(dim, &["k", "t", "delta_bar", "variant"]);
    let mean_cols = columns(dim, &["mean_delta", "variant"]);
    let mut step_rows: Vec<Vec<String>> = Vec::new();
    let mut mean_rows: Vec<Vec<String>> = Vec::new();

    for p in &test {
        let ops = ImexOps::new(sys.as_ref(), p, grid, scheme)?;
        let constants = stability_constants(&ops, 0.0, PowerIterOpts::default())?;
        let dual = solve_dual(&ops, None)?;
        let r = match &closure {
            Some(model) => {
                let (defect, _) = model.decode_param(p)?;
                let reduced = rom.solve_crom(p, grid, scheme, Some(&defect))?;
                let lifted = rom.lift(&reduced.states);
                residual_corrected(&ops, &lifted, &defect)?
            }
            None => {
                let reduced = if record.source == "march" {
                    rom.solve_crom(p, grid, scheme, None)?
                } else {
                    rom.solve_adaptive(p, grid, &solver)?
                };
                let lifted = rom.lift(&reduced.states);
                scheme_residual(&ops, &lifted, &lifted, None)?
            }
        };
        let r_norms = column_norms(&r);
        let gap = match variant {
            EstimatorVariant::A => Some(column_norms(&dual.x_du.tr_mul(&r))),
            EstimatorVariant::B => None,
        };
        let est = output_error_estimate(
            variant,
            &r_norms,
            dual.r_du_norm(),
            constants.zeta,
            dual.x_du_norm(),
            rho,
            gap.as_deref(),
        )?;

        let p_cells = fmt_params(p);
        for (k, &delta) in est.per_step.iter().enumerate() {
            let mut row = p_cells.clone();
            row.push(k.to_string());
            row.push(io::format_float(grid_time(&grid, k)));
            row.push(io::format_float(delta));
            row.push(variant.label().to_string());
            step_rows.push(row);
        }
        let mut row = p_cells;
        row.push(io::format_float(est.mean));
        row.push(variant.label().to_string());
        mean_rows.push(row);
    }

    let hash = cfg.sha256()?;
    let est_path = dir.join("estimates.csv");
    io::write_csv(&est_path, &hash, &header_refs(&step_cols), &step_rows)?;
    wrote(&est_path);
    let mean_path = dir.join("estimate_summary.csv");
    io::write_csv(&mean_path, &hash, &header_refs(&mean_cols), &mean_rows)?;
    wrote(&mean_path);
    println!(
        "estimate: {} test parameters swept with variant {}",
        test.len(),
        variant.label()
    );
    Ok(())
}

/// Failure study on the heat benchmark: both the full model and its
/// projection-based reduced model are integrated adaptively, the residual
/// is then imposed with the configured scheme and no closure, and the
/// resulting per-step output estimate is tabulated against the true error.
pub fn demo_heat(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.model.id != ModelId::Heat {
        return Err(Error::Config(format!(
            "demo-heat runs the heat benchmark, the configuration names {:?}",
            cfg.model.id
        )));
    }
    let demo = cfg
        .demo
        .clone()
        .unwrap_or_default();
    let p = [demo.mu];
    let sys = assemble(cfg.model.id, &p, cfg.model.n_cells)?;
    let grid = cfg.time.to_grid()?;
    let solver = cfg.solver.to_solver_config();

    let truth = solve_blackbox(sys.as_ref(), &p, grid, &solver)?;
    let mut basis = ReducedBasis::empty(sys.dim());
    let update = basis.pod_update(&truth.states, demo.n_modes)?;
    let rom = Rom::new(sys.as_ref(), basis.basis().clone())?;
    let reduced = rom.solve_adaptive(&p, grid, &solver)?;
    let lifted = rom.lift(&reduced.states);

    let ops = ImexOps::new(sys.as_ref(), &p, grid, cfg.scheme.kind)?;
    let r = scheme_residual(&ops, &lifted, &lifted, None)?;
    let r_norms = column_norms(&r);
    let dual = solve_dual(&ops, None)?;
    let constants = stability_constants(&ops, 0.0, PowerIterOpts::default())?;
    let gap = column_norms(&dual.x_du.tr_mul(&r));
    let est = output_error_estimate(
        EstimatorVariant::A,
        &r_norms,
        dual.r_du_norm(),
        constants.zeta,
        dual.x_du_norm(),
        1.0,
        Some(&gap),
    )?;

    let c = sys.output_matrix();
    let y = &c * &truth.states;
    let y_hat = &c * &lifted;

    let mut rows = Vec::with_capacity(grid.n_points());
    let mut overestimated = 0usize;
    for k in 0..grid.n_points() {
        let true_err = (y.column(k) - y_hat.column(k)).norm();
        let ratio = if true_err > 0.0 {
            est.per_step[k] / true_err
        } else if est.per_step[k] == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if k > 0 && ratio >= 100.0 {
            overestimated += 1;
        }
        rows.push(vec![
            k.to_string(),
            io::format_float(grid_time(&grid, k)),
            io::format_float(true_err),
            io::format_float(est.per_step[k]),
            io::format_float(ratio),
        ]);
    }
    let steps = grid.steps;

    let hash = cfg.sha256()?;
    let dir = out_dir(cfg);
    let csv_path = dir.join("demo_heat.csv");
    io::write_csv(
        &csv_path,
        &hash,
        &["k", "t", "true_error", "estimate", "ratio"],
        &rows,
    )?;
    wrote(&csv_path);

    let summary_path = dir.join("demo_heat_summary.json");
    io::write_json(
        &summary_path,
        &json!({
            "mu": demo.mu,
            "basis_size": update.appended,
            "steps": steps,
            "overestimated_steps": overestimated,
            "overestimated_fraction": overestimated as f64 / steps as f64,
            "config_sha256": hash,
        }),
    )?;
    wrote(&summary_path);
    println!(
        "demo-heat: estimate >= 100x the true error at {overestimated}/{steps} steps"
    );
    Ok(())
}

/// Singular-value decay report: stage-1 spectra per closure sample, the
/// stacked stage-2 spectrum, and the spectrum of the state snapshots that
/// produced the defects.
pub fn svd_report(cfg: &ExperimentConfig) -> Result<()> {
    let sys = build(cfg.model.id, cfg.model.n_cells)?;
    let grid = cfg.time.to_grid()?;
    let (train, _) = split_sets(cfg, sys.as_ref())?;
    let indices = strided_defect_indices(&train, cfg.closure.d_s.min(train.len()))?;
    let defect_params: Vec<Vec<f64>> = indices.iter().map(|&i| train[i].clone()).collect();

    let (tensor, trajs) = build_defect_tensor(
        sys.as_ref(),
        &defect_params,
        &grid,
        cfg.scheme.kind,
        &cfg.solver.to_solver_config(),
    )?;
    let stages = two_stage_svd(&tensor, cfg.closure.tol_svd_t, cfg.closure.tol_svd_p)?;

    let n_points = grid.n_points();
    let mut snapshots = DMatrix::<f64>::zeros(sys.dim(), trajs.len() * n_points);
    for (i, traj) in trajs.iter().enumerate() {
        snapshots
            .columns_mut(i * n_points, n_points)
            .copy_from(&traj.states);
    }
    let snapshot_sigma = snapshots.svd(false, false).singular_values;

    let hash = cfg.sha256()?;
    let dir = out_dir(cfg);
    let dim = sys.param_domain().dim();

    let mut cols1 = vec!["sample".to_string()];
    cols1.extend(columns(dim, &["index", "sigma"]));
    let mut rows1 = Vec::new();
    for (i, spectrum) in stages.slice_singular_values.iter().enumerate() {
        let p_cells = fmt_params(&defect_params[i]);
        for (j, &sigma) in spectrum.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p_cells.clone());
            row.push(j.to_string());
            row.push(io::format_float(sigma));
            rows1.push(row);
        }
    }
    let stage1_path = dir.join("svd_stage1.csv");
    io::write_csv(&stage1_path, &hash, &header_refs(&cols1), &rows1)?;
    wrote(&stage1_path);

    let spectrum_rows = |values: &[f64]| -> Vec<Vec<String>> {
        values
            .iter()
            .enumerate()
            .map(|(j, &sigma)| vec![j.to_string(), io::format_float(sigma)])
            .collect()
    };
    let stage2_path = dir.join("svd_stage2.csv");
    io::write_csv(
        &stage2_path,
        &hash,
        &["index", "sigma"],
        &spectrum_rows(&stages.stacked_singular_values),
    )?;
    wrote(&stage2_path);

    let snap_path = dir.join("snapshot_svd.csv");
    io::write_csv(
        &snap_path,
        &hash,
        &["index", "sigma"],
        &spectrum_rows(snapshot_sigma.as_slice()),
    )?;
    wrote(&snap_path);

    let summary_path = dir.join("svd_summary.json");
    io::write_json(
        &summary_path,
        &json!({
            "model": cfg.model.id,
            "n_samples": tensor.n_samples(),
            "tol_svd_t": cfg.closure.tol_svd_t,
            "tol_svd_p": cfg.closure.tol_svd_p,
            "defect_modes": stages.n_modes(),
            "slice_ranks": stages.slice_ranks,
            "config_sha256": hash,
        }),
    )?;
    wrote(&summary_path);
    println!("svd-report: {} defect modes kept", stages.n_modes());
    Ok(())
}
