use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{Experiment, ExperimentConfig};
use super::output::{Cell, Table};
use super::validate;
use crate::dynamics::{SimConfig, Trajectory};
use crate::flow::{cross_check_full, integrate_flow, FlowOptions, FlowState};
use crate::measurement::{
    basin_map, born_rule, noiseless_step, p_plus, p_plus_monte_carlo, theta_grid, DipolarSetup, OutcomeLabel,
    SphereGrid, WrappedCauchy,
};
use crate::spin::SpinQuantumNumber;
use crate::state::BipartiteShape;
use crate::{Error, Result};

/// How a run ended once its output was written.
#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Success,
    NumericalFailure(String),
    ValidationFailure(String),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: Value,
    pub files: Vec<PathBuf>,
    pub status: RunStatus,
}

impl RunOutcome {
    fn ok(summary: Value, files: Vec<PathBuf>) -> Self {
        Self { summary, files, status: RunStatus::Success }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    match cfg.experiment {
        Experiment::Trajectory => run_trajectory(cfg, dir),
        Experiment::Basins => run_basins(cfg, dir),
        Experiment::NoiseCurve => run_noise_curve(cfg, dir),
        Experiment::SchmidtFlow => run_schmidt_flow(cfg, dir),
        Experiment::Validate => run_validate(cfg, dir),
    }
}

pub fn dipolar_setup(cfg: &ExperimentConfig) -> Result<DipolarSetup> {
    DipolarSetup::new(
        SpinQuantumNumber::from_twice(cfg.spins.two_s2)?,
        cfg.rates.omega_d,
        cfg.rates.gamma_mode,
        cfg.rates.gamma,
        cfg.geometry.u_d.unit(),
        cfg.geometry.n2.unit(),
    )
}

fn trajectory_table(traj: &Trajectory) -> Table {
    let mut table = Table::new(["t", "kx", "ky", "kz", "purity", "q_expectation", "norm_error"]);
    for s in &traj.samples {
        table.push(
            [s.t, s.k[0], s.k[1], s.k[2], s.purity, s.q_expectation, s.norm_error]
                .into_iter()
                .map(Cell::Real)
                .collect(),
        );
    }
    table
}

pub fn run_trajectory(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let setup = dipolar_setup(cfg)?;
    let sim = SimConfig::from(cfg.sim);
    let n1 = cfg.geometry.n1.unit();
    let (traj, status) = match setup.run(&n1, &sim) {
        Ok(t) => (t, RunStatus::Success),
        Err(Error::Stiffness { t, step, partial: Some(p) }) => {
            (*p, RunStatus::NumericalFailure(format!("step size underflow at t = {t} (h = {step:e})")))
        }
        Err(e) => return Err(e),
    };
    let path = trajectory_table(&traj).write(dir, "trajectory", cfg.output.format)?;
    let last = traj.last();
    let u = setup.u_d;
    let summary = json!({
        "samples": traj.samples.len(),
        "accepted_steps": traj.stats.accepted,
        "rejected_steps": traj.stats.rejected,
        "rhs_evaluations": traj.stats.evaluations,
        "final_t": last.t,
        "final_purity": last.purity,
        "final_k": last.k,
        "final_k_dot_u_d": last.k[0] * u.x + last.k[1] * u.y + last.k[2] * u.z,
        "max_norm_error": traj.samples.iter().map(|s| s.norm_error).fold(0.0, f64::max),
    });
    Ok(RunOutcome { summary, files: vec![path], status })
}

pub fn run_basins(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let setup = dipolar_setup(cfg)?;
    let grid = SphereGrid::new(cfg.basins.n_theta, cfg.basins.n_phi)?;
    let map = basin_map(&grid, &setup, &SimConfig::from(cfg.sim), cfg.basins.eps)?;
    let mut table = Table::new(["theta1", "phi1", "label"]);
    let mut mismatches = 0usize;
    for (p, label) in grid.points.iter().zip(&map.labels) {
        table.push(vec![Cell::Real(p.theta), Cell::Real(p.phi), Cell::Int(label.as_i8() as i64)]);
        let proj = p.n.dot(&setup.u_d);
        if *label != OutcomeLabel::Unresolved && proj.abs() > 0.05 && *label != OutcomeLabel::expected_for(proj) {
            mismatches += 1;
        }
    }
    let path = table.write(dir, "basins", cfg.output.format)?;
    let summary = json!({
        "points": grid.len(),
        "plus": map.count(OutcomeLabel::Plus),
        "minus": map.count(OutcomeLabel::Minus),
        "unresolved": map.count(OutcomeLabel::Unresolved),
        "integration_failures": map.failures,
        "sign_mismatches_off_boundary": mismatches,
    });
    let status = if map.failures > 0 {
        RunStatus::NumericalFailure(format!("{} grid points failed to integrate", map.failures))
    } else {
        RunStatus::Success
    };
    Ok(RunOutcome { summary, files: vec![path], status })
}

pub fn run_noise_curve(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let n = &cfg.noise;
    let dist = WrappedCauchy::new(n.phi0)?;
    let thetas = theta_grid(n.theta_grid_size);
    let p: Vec<f64> = thetas.par_iter().map(|&t| p_plus(t, &dist).unwrap_or(f64::NAN)).collect();
    let mut table = Table::new(["theta1", "p_plus", "born", "step"]);
    for (&t, &pp) in thetas.iter().zip(&p) {
        table.push(vec![Cell::Real(t), Cell::Real(pp), Cell::Real(born_rule(t)), Cell::Real(noiseless_step(t))]);
    }
    let path = table.write(dir, "noise", cfg.output.format)?;

    let failed = p.iter().filter(|x| x.is_nan()).count();
    let m = p.len();
    let complementarity = (0..m).map(|i| (p[i] + p[m - 1 - i] - 1.0).abs()).fold(0.0, f64::max);
    let monotonicity = p.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut summary = json!({
        "points": m,
        "failed_points": failed,
        "max_complementarity_residual": complementarity,
        "max_increase": monotonicity,
    });
    if n.mc_samples > 0 {
        let worst = thetas
            .iter()
            .zip(&p)
            .map(|(&t, &pp)| {
                let mc = p_plus_monte_carlo(t, &dist, n.mc_samples, n.seed)?;
                Ok(if mc.std_error > 0.0 { (pp - mc.p).abs() / mc.std_error } else { (pp - mc.p).abs() })
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        summary["monte_carlo_max_deviation_in_std_errors"] = json!(worst);
    }
    let status = if failed > 0 {
        RunStatus::NumericalFailure(format!("quadrature failed at {failed} angles"))
    } else {
        RunStatus::Success
    };
    Ok(RunOutcome { summary, files: vec![path], status })
}

pub fn run_schmidt_flow(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let f = &cfg.schmidt_flow;
    let state0 = FlowState::perturbed_uniform(f.m, f.perturbed_index, f.perturbation, cfg.rates.gamma)?;
    let opts = FlowOptions { rel_tol: f.rel_tol, abs_tol: f.abs_tol, ..FlowOptions::default() };
    let traj = integrate_flow(&state0, f.t_max, &opts)?;
    let mut columns = vec!["t".to_string()];
    columns.extend((1..=f.m).map(|l| format!("q_{l}")));
    columns.extend(["L4".to_string(), "entropy".to_string()]);
    let mut table = Table::new(columns);
    for s in &traj.samples {
        let mut row = vec![Cell::Real(s.t)];
        row.extend(s.q.iter().map(|&x| Cell::Real(x)));
        row.extend([Cell::Real(s.l4), Cell::Real(s.entropy)]);
        table.push(row);
    }
    let path = table.write(dir, "flow", cfg.output.format)?;
    let last = traj.last();
    let mut summary = json!({
        "m": f.m,
        "samples": traj.samples.len(),
        "final_t": last.t,
        "final_l4": last.l4,
        "final_entropy": last.entropy,
        "attractor": traj.attractor,
    });
    if f.checkpoints > 0 && f.t_max > 0.0 {
        let shape = BipartiteShape::with_cap(f.m, f.m, cfg.spins.dimension_cap)?;
        let grid: Vec<f64> = (1..=f.checkpoints).map(|i| f.t_max * i as f64 / f.checkpoints as f64).collect();
        let sim = SimConfig { rel_tol: f.rel_tol, abs_tol: f.abs_tol, ..SimConfig::from(cfg.sim) };
        let dev = cross_check_full(&state0, shape, &grid, &opts, &sim)?;
        summary["cross_check_checkpoints"] = json!(f.checkpoints);
        summary["cross_check_max_deviation"] = json!(dev);
    }
    Ok(RunOutcome::ok(summary, vec![path]))
}

pub fn run_validate(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    let report = validate::run_suite(cfg)?;
    let path = dir.join("report.json");
    super::output::write_json(&path, &report.to_value())?;
    let failed = report.failed();
    let summary = json!({
        "properties": report.results.len(),
        "failed": failed.iter().map(|r| r.name).collect::<Vec<_>>(),
    });
    let status = if failed.is_empty() {
        RunStatus::Success
    } else {
        RunStatus::ValidationFailure(format!("{} of {} properties failed", failed.len(), report.results.len()))
    };
    Ok(RunOutcome { summary, files: vec![path], status })
}
