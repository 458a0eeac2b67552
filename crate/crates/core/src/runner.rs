//! Executes scenario commands and writes their CSV/JSON outputs.
//!
//! Outputs are byte-deterministic: iteration orders are fixed, floats are
//! printed with 17 significant digits, and JSON objects serialize with
//! sorted keys. Rerunning a command on the same scenario reproduces every
//! file exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    check_gronwall_bound, decompose, equilibrium_limit, fit_decay_rate, mass_series,
    positivity_monitor,
};
use crate::coeff::{classify_regime, Horizon, RegimeClass};
use crate::error::{Error, Result};
use crate::fem::{integrate, l2_norm, AssembledSystem};
use crate::graph::EdgeId;
use crate::integrator::{simulate, Source, Trajectory};
use crate::oracle::{refinement_study, OracleFamily};
use crate::scenario::Scenario;
use crate::spectral::track_spectrum;

/// Commands the scenario runner understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Spectrum,
    Simulate,
    Analyze,
    Convergence,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectrum => "spectrum",
            Command::Simulate => "simulate",
            Command::Analyze => "analyze",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Per-edge sample count for downsampled trajectory output.
    pub downsample: Option<usize>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            downsample: None,
        }
    }
}

/// Machine-readable run summary; also written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub outputs: Vec<String>,
    pub summary: Value,
}

/// Formats with 17 significant digits (round-trip exact for f64).
fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let mut line = String::new();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}", fmt_g17(*v));
        }
        text.push_str(&line);
        text.push('\n');
    }
    write_text(dir, name, &text)
}

pub fn run(scenario: &Scenario, command: Command, options: &RunOptions) -> Result<RunReport> {
    std::fs::create_dir_all(&options.out_dir)?;
    let mut report = match command {
        Command::Validate => validate(scenario)?,
        Command::Spectrum => spectrum(scenario, options)?,
        Command::Simulate => simulate_cmd(scenario, options)?,
        Command::Analyze => analyze(scenario, options)?,
        Command::Convergence => convergence(scenario, options)?,
    };
    report.command = command.name().into();
    report.scenario = scenario.name.clone();
    let json = serde_json::to_string_pretty(&report)? + "\n";
    write_text(&options.out_dir, "report.json", &json)?;
    report.outputs.push("report.json".into());
    Ok(report)
}

fn blank_report(summary: Value, outputs: Vec<String>) -> RunReport {
    RunReport {
        command: String::new(),
        scenario: String::new(),
        outputs,
        summary,
    }
}

fn validate(scenario: &Scenario) -> Result<RunReport> {
    let system = scenario.build_system()?;
    let u0 = scenario.initial_vector(&system)?;
    // structural classification only; lambda2 is not computed here, so a
    // growth constant is reported without the c < lambda2 comparison
    let regime = classify_regime(&scenario.coeffs, f64::INFINITY, scenario.cert.horizon);
    let summary = json!({
        "valid": true,
        "vertices": scenario.graph.vertex_count(),
        "edges": scenario.graph.edge_count(),
        "total_dofs": system.mesh().total_dofs(),
        "initial_dofs": u0.len(),
        "epsilon": scenario.cert.epsilon,
        "beta": scenario.cert.beta,
        "max_lipschitz_mu": scenario.cert.max_lipschitz_mu(),
        "horizon": match scenario.cert.horizon {
            Horizon::Finite(t) => json!(t),
            Horizon::Infinite => json!("infinite"),
        },
        "regime_structural": regime.name(),
        "growth_constant": regime.growth_constant(),
    });
    Ok(blank_report(summary, vec![]))
}

fn spectrum(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    let system = scenario.build_system()?;
    let k = scenario.analysis.eigenvalue_count;
    let track = track_spectrum(&system, &scenario.analysis.grid, k)?;
    let mut header = vec!["t".to_string()];
    for i in 1..=k {
        header.push(format!("lambda_{i}"));
    }
    let rows = track
        .times
        .iter()
        .zip(&track.eigenvalues)
        .map(|(t, row)| {
            let mut r = Vec::with_capacity(k + 1);
            r.push(*t);
            r.extend_from_slice(row);
            r
        })
        .chain(track.limit_eigenvalues.iter().map(|row| {
            let mut r = Vec::with_capacity(k + 1);
            r.push(f64::INFINITY);
            r.extend_from_slice(row);
            r
        }));
    write_csv(&options.out_dir, "spectrum.csv", &header, rows)?;
    let summary = json!({
        "lambda2_lower": track.lambda2_lower,
        "lambda2_lower_certified": false,
        "continuity_modulus": track.continuity_modulus,
        "grid_samples": track.times.len(),
        "limit_appended": track.limit_eigenvalues.is_some(),
    });
    Ok(blank_report(summary, vec!["spectrum.csv".into()]))
}

fn trajectory_csv(
    scenario: &Scenario,
    system: &AssembledSystem,
    traj: &Trajectory,
    options: &RunOptions,
) -> Result<String> {
    let mesh = system.mesh();
    match options.downsample {
        None => {
            let d = mesh.total_dofs();
            let mut header = vec!["t".to_string()];
            for i in 0..d {
                header.push(format!("dof_{i}"));
            }
            let rows = traj.times.iter().zip(&traj.states).map(|(t, u)| {
                let mut r = Vec::with_capacity(d + 1);
                r.push(*t);
                r.extend(u.iter().copied());
                r
            });
            write_csv(&options.out_dir, "trajectory.csv", &header, rows)?;
        }
        Some(q) => {
            let q = q.max(2);
            let m = scenario.graph.edge_count();
            let mut header = vec!["t".to_string()];
            let positions: Vec<f64> = (0..q).map(|i| i as f64 / (q - 1) as f64).collect();
            for j in 1..=m {
                for x in &positions {
                    header.push(format!("e{j}_x{x:.4}"));
                }
            }
            let h = mesh.element_size();
            let n_local = mesh.nodes_per_edge() + 1;
            let rows = traj.times.iter().zip(&traj.states).map(|(t, u)| {
                let mut r = Vec::with_capacity(1 + m * q);
                r.push(*t);
                for j in 1..=m {
                    for &x in &positions {
                        // P1 interpolation along the edge
                        let p = ((x / h).floor() as usize).min(n_local - 1);
                        let s = (x - p as f64 * h) / h;
                        let a = u[mesh.dof(j as EdgeId, p)];
                        let b = u[mesh.dof(j as EdgeId, p + 1)];
                        r.push(a + (b - a) * s);
                    }
                }
                r
            });
            write_csv(&options.out_dir, "trajectory.csv", &header, rows)?;
        }
    }
    Ok("trajectory.csv".into())
}

fn simulate_cmd(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    let system = scenario.build_system()?;
    let u0 = scenario.initial_vector(&system)?;
    let traj = simulate(&u0, &scenario.forcing, &scenario.solver, &system)?;
    let out = trajectory_csv(scenario, &system, &traj, options)?;
    let masses = mass_series(&traj, system.mass());
    let positivity = positivity_monitor(&traj, scenario.analysis.positivity_tol);
    let summary = json!({
        "steps": traj.times.len() - 1,
        "final_time": traj.times[traj.times.len() - 1],
        "initial_mass": masses.values[0],
        "final_mass": masses.values[masses.values.len() - 1],
        "min_value": positivity.min_value,
    });
    Ok(blank_report(summary, vec![out]))
}

/// Per-sample `||F(t)||_H`, with the mean-free part used in the identity
/// regime (the conserved component never enters that bound).
fn forcing_norms(
    scenario: &Scenario,
    system: &AssembledSystem,
    times: &[f64],
    mean_free: bool,
) -> Vec<f64> {
    let mesh = system.mesh();
    let sqrt_m = (scenario.graph.edge_count() as f64).sqrt();
    times
        .iter()
        .map(|&t| {
            if scenario.forcing.is_zero() {
                return 0.0;
            }
            let full = l2_norm(mesh, |j, x| scenario.forcing.value(j, t, x));
            if mean_free {
                let mean = integrate(mesh, |j, x| scenario.forcing.value(j, t, x)) / sqrt_m;
                (full * full - mean * mean).max(0.0).sqrt()
            } else {
                full
            }
        })
        .collect()
}

fn analyze(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    let system = scenario.build_system()?;
    let u0 = scenario.initial_vector(&system)?;
    let track = track_spectrum(
        &system,
        &scenario.analysis.grid,
        scenario.analysis.eigenvalue_count,
    )?;
    let regime = classify_regime(
        &scenario.coeffs,
        track.lambda2_lower,
        scenario.cert.horizon,
    );
    let traj = simulate(&u0, &scenario.forcing, &scenario.solver, &system)?;
    let dec = decompose(&traj, system.mass());
    let masses = mass_series(&traj, system.mass());
    let positivity = positivity_monitor(&traj, scenario.analysis.positivity_tol);

    let decay = fit_decay_rate(
        &dec,
        scenario.analysis.window,
        regime,
        &scenario.cert,
        track.lambda2_lower,
    )
    .ok();

    // the non-identity envelopes assume mean-free forcing; the identity
    // regime absorbs the mean into the conserved component itself
    let mesh = system.mesh();
    let sqrt_m = (scenario.graph.edge_count() as f64).sqrt();
    let forcing_mean_free = scenario.forcing.is_zero()
        || traj.times.iter().all(|&t| {
            integrate(mesh, |j, x| scenario.forcing.value(j, t, x)).abs() / sqrt_m <= 1e-12
        });
    let bounds_apply =
        regime == RegimeClass::BIdentity || (regime != RegimeClass::General && forcing_mean_free);

    let gronwall = if bounds_apply {
        let mean_free = regime == RegimeClass::BIdentity;
        let f_norms = forcing_norms(scenario, &system, &traj.times, mean_free);
        Some(check_gronwall_bound(
            &dec,
            regime,
            &scenario.cert,
            &track,
            &f_norms,
        )?)
    } else {
        None
    };

    let equilibrium = if regime == RegimeClass::BIdentity {
        let f_mass: Vec<f64> = traj
            .times
            .iter()
            .map(|&t| integrate(mesh, |j, x| scenario.forcing.value(j, t, x)) / sqrt_m)
            .collect();
        equilibrium_limit(&dec, regime, &f_mass, 1e-6).ok()
    } else {
        None
    };

    let summary = json!({
        "regime": regime.name(),
        "growth_constant": regime.growth_constant(),
        "lambda2_lower": track.lambda2_lower,
        "lambda2_lower_certified": false,
        "epsilon_bound": gronwall.map(|g| g.epsilon),
        "beta": scenario.cert.beta,
        "forcing_mean_free": forcing_mean_free,
        "fitted_rate": decay.map(|d| d.fitted_rate),
        "predicted_rate": decay.and_then(|d| d.predicted_rate),
        "bound_satisfied": gronwall.map(|g| g.satisfied),
        "rate_bound_satisfied": if bounds_apply {
            decay.and_then(|d| d.bound_satisfied)
        } else {
            None
        },
        "gronwall_worst_margin": gronwall.map(|g| g.worst_margin),
        "sharp_rate": gronwall.map(|g| g.sharp_rate),
        "sharp_bound_satisfied": gronwall.map(|g| g.sharp_satisfied),
        "sharp_worst_margin": gronwall.map(|g| g.sharp_worst_margin),
        "mass_drift": masses.relative_drift(),
        "min_value": positivity.min_value,
        "equilibrium_residual": equilibrium.map(|e| e.residual),
        "f_infinity": equilibrium.map(|e| e.f_infinity),
    });
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    write_text(&options.out_dir, "analysis.json", &json)?;
    Ok(blank_report(summary, vec!["analysis.json".into()]))
}

fn convergence(scenario: &Scenario, options: &RunOptions) -> Result<RunReport> {
    let family = OracleFamily::detect(&scenario.graph).ok_or_else(|| {
        Error::Oracle(
            "closed-form reference needs an interval (path) or cycle graph".into(),
        )
    })?;
    let study = refinement_study(family, &scenario.analysis.refinement)?;
    let header: Vec<String> = ["N", "h", "lambda_err", "order"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = study.levels.iter().enumerate().map(|(i, level)| {
        let order = if i == 0 {
            f64::NAN
        } else {
            study.orders[i - 1]
        };
        vec![level.nodes_per_edge as f64, level.h, level.error, order]
    });
    write_csv(&options.out_dir, "convergence.csv", &header, rows)?;
    let summary = json!({
        "family": match family {
            OracleFamily::Interval { edges } => format!("interval({edges})"),
            OracleFamily::Cycle { edges } => format!("cycle({edges})"),
        },
        "orders": study.orders,
        "levels": study.levels.len(),
    });
    Ok(blank_report(summary, vec!["convergence.csv".into()]))
}
