//! Theta-method time stepping for `M_B(t) u' + K(t) u = f(t)`.
//!
//! One step solves
//!
//! ```text
//! [M_B(t+) + theta dt K(t+)] u_{n+1}
//!     = [M_B(t+) - (1-theta) dt K(t_n)] u_n + dt f_theta
//! ```
//!
//! with `t+ = t_{n+1}` and `f_theta = theta f(t+) + (1-theta) f(t_n)`. The
//! weighted mass is taken fully implicitly so the system matrix stays
//! symmetric positive definite and the constant state is reproduced exactly
//! for every coefficient regime.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientProfile, Horizon};
use crate::error::{Error, Result};
use crate::exec;
use crate::fem::{assemble_load, AssembledSystem, Mesh};
use crate::graph::EdgeId;
use crate::linalg::{weighted_norm, SolveStats, SpdSolver, SymMatrix};

/// Fixed-step solver configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    /// Implicitness weight; 1 is backward Euler, 0.5 the trapezoidal rule.
    pub theta: f64,
    pub t_end: f64,
    /// Relative tolerance for the SPD solves.
    pub linear_tol: f64,
    /// Mirrors the assembly mode of the system this config drives.
    pub lumped: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 0.01,
            theta: 1.0,
            t_end: 1.0,
            linear_tol: 1e-12,
            lumped: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Integrator(format!("dt {} must be positive", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(Error::Integrator(format!(
                "t_end {} shorter than one step {}",
                self.t_end, self.dt
            )));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::Integrator(format!(
                "theta {} outside [0.5, 1]",
                self.theta
            )));
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::Integrator("linear_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Time-stamped DOF vectors plus per-step linear-solve diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub diagnostics: Vec<SolveStats>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("nonempty trajectory")
    }
}

/// Right-hand sides the integrator can consume.
pub trait Source {
    fn is_zero(&self) -> bool {
        false
    }
    /// Value of `F_j(t, x)` on edge `j`.
    fn value(&self, edge: EdgeId, t: f64, x: f64) -> f64;
}

/// The zero source.
pub struct ZeroSource;

impl Source for ZeroSource {
    fn is_zero(&self) -> bool {
        true
    }
    fn value(&self, _: EdgeId, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Adapter for closure-defined sources (manufactured solutions, tests).
pub struct FnSource<F: Fn(EdgeId, f64, f64) -> f64>(pub F);

impl<F: Fn(EdgeId, f64, f64) -> f64> Source for FnSource<F> {
    fn value(&self, edge: EdgeId, t: f64, x: f64) -> f64 {
        (self.0)(edge, t, x)
    }
}

/// One separable forcing contribution `poly(x) * psi(t)` on a single edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTerm {
    pub edge: EdgeId,
    /// Polynomial coefficients in `x`, ascending powers.
    pub poly: Vec<f64>,
    pub psi: CoefficientProfile,
}

/// Edgewise space-time separable forcing.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    #[default]
    None,
    Separable {
        terms: Vec<ForcingTerm>,
    },
}

impl Forcing {
    pub fn validate(&self, edges: usize) -> Result<()> {
        if let Forcing::Separable { terms } = self {
            for (i, term) in terms.iter().enumerate() {
                if term.edge == 0 || term.edge > edges {
                    return Err(Error::Scenario(format!(
                        "forcing.terms[{i}].edge {} outside 1..={edges}",
                        term.edge
                    )));
                }
                term.psi.validate()?;
            }
        }
        Ok(())
    }
}

impl Source for Forcing {
    fn is_zero(&self) -> bool {
        match self {
            Forcing::None => true,
            Forcing::Separable { terms } => terms.is_empty(),
        }
    }

    fn value(&self, edge: EdgeId, t: f64, x: f64) -> f64 {
        match self {
            Forcing::None => 0.0,
            Forcing::Separable { terms } => terms
                .iter()
                .filter(|term| term.edge == edge)
                .map(|term| {
                    let poly: f64 = term
                        .poly
                        .iter()
                        .rev()
                        .fold(0.0, |acc, &coeff| acc * x + coeff);
                    poly * term.psi.eval_raw(t)
                })
                .sum(),
        }
    }
}

fn load_of<S: Source + ?Sized>(src: &S, mesh: &Mesh, t: f64) -> DVector<f64> {
    if src.is_zero() {
        DVector::zeros(mesh.total_dofs())
    } else {
        assemble_load(mesh, |j, x| src.value(j, t, x))
    }
}

struct StepOperator {
    solver: SpdSolver,
    weighted_mass: SymMatrix,
    stiffness: SymMatrix,
}

fn build_operator(
    system: &AssembledSystem,
    t_plus: f64,
    dt: f64,
    config: &SolverConfig,
) -> Result<StepOperator> {
    let stiffness = system.stiffness(t_plus)?;
    let weighted_mass = system.weighted_mass(t_plus)?;
    let mut s = stiffness.scaled(config.theta * dt);
    s.axpy(1.0, &weighted_mass);
    let solver = SpdSolver::new(&s, config.linear_tol)?;
    Ok(StepOperator {
        solver,
        weighted_mass,
        stiffness,
    })
}

#[allow(clippy::too_many_arguments)]
fn advance<S: Source + ?Sized>(
    op: &StepOperator,
    stiffness_old: Option<&SymMatrix>,
    u: &DVector<f64>,
    t_n: f64,
    t_plus: f64,
    dt: f64,
    config: &SolverConfig,
    system: &AssembledSystem,
    src: &S,
) -> Result<(DVector<f64>, SolveStats)> {
    let mut rhs = op.weighted_mass.matvec(u);
    if config.theta < 1.0 {
        let k_old = stiffness_old.expect("explicit part needs K(t_n)");
        rhs -= k_old.matvec(u) * ((1.0 - config.theta) * dt);
    }
    if !src.is_zero() {
        let mesh = system.mesh();
        let mut f = load_of(src, mesh, t_plus) * config.theta;
        if config.theta < 1.0 {
            f += load_of(src, mesh, t_n) * (1.0 - config.theta);
        }
        rhs += f * dt;
    }
    let (next, stats) = op.solver.solve(&rhs)?;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrator(format!(
            "state became non-finite at t = {t_plus}"
        )));
    }
    Ok((next, stats))
}

/// A single theta step from `(u_n, t_n)` to `t_n + dt`.
pub fn step<S: Source + ?Sized>(
    u_n: &DVector<f64>,
    t_n: f64,
    src: &S,
    config: &SolverConfig,
    system: &AssembledSystem,
) -> Result<(DVector<f64>, SolveStats)> {
    config.validate()?;
    check_dims(u_n, system)?;
    check_horizon(t_n + config.dt, system)?;
    let t_plus = t_n + config.dt;
    let op = build_operator(system, t_plus, config.dt, config)?;
    let k_old = if config.theta < 1.0 {
        Some(system.stiffness(t_n)?)
    } else {
        None
    };
    advance(
        &op,
        k_old.as_ref(),
        u_n,
        t_n,
        t_plus,
        config.dt,
        config,
        system,
        src,
    )
}

fn check_dims(u: &DVector<f64>, system: &AssembledSystem) -> Result<()> {
    if u.len() != system.mesh().total_dofs() {
        return Err(Error::Integrator(format!(
            "state has {} DOFs, mesh has {}",
            u.len(),
            system.mesh().total_dofs()
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrator("initial state is not finite".into()));
    }
    Ok(())
}

fn check_horizon(t: f64, system: &AssembledSystem) -> Result<()> {
    if let Horizon::Finite(tau) = system.cert().horizon {
        if t > tau * (1.0 + 1e-12) {
            return Err(Error::Integrator(format!(
                "step to t = {t} leaves the certified horizon {tau}"
            )));
        }
    }
    Ok(())
}

/// Integrates from `u0` up to `config.t_end`; all states are retained.
///
/// Steps are uniform except for a final short step when `t_end` is not a
/// multiple of `dt`. For autonomous coefficients the implicit operator is
/// factorized once and reused.
pub fn simulate<S: Source + ?Sized>(
    u0: &DVector<f64>,
    src: &S,
    config: &SolverConfig,
    system: &AssembledSystem,
) -> Result<Trajectory> {
    config.validate()?;
    check_dims(u0, system)?;
    check_horizon(config.t_end, system)?;

    let dt = config.dt;
    let n_full = (config.t_end / dt + 1e-9).floor() as usize;
    let remainder = config.t_end - n_full as f64 * dt;
    let has_remainder = remainder > dt * 1e-9;

    let autonomous = system.coeffs().is_autonomous();
    let mut cached_full: Option<StepOperator> = None;

    let steps = n_full + usize::from(has_remainder);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps);
    times.push(0.0);
    states.push(u0.clone());

    let mut k_old = if config.theta < 1.0 {
        Some(system.stiffness(0.0)?)
    } else {
        None
    };

    for i in 0..steps {
        let t_n = times[i];
        let short = i == n_full;
        let step_dt = if short { remainder } else { dt };
        let t_plus = if i + 1 == steps {
            config.t_end
        } else {
            (i + 1) as f64 * dt
        };

        let op_owned;
        let op = if autonomous && !short {
            if cached_full.is_none() {
                cached_full = Some(build_operator(system, t_plus, dt, config)?);
            }
            cached_full.as_ref().expect("cached operator")
        } else {
            op_owned = build_operator(system, t_plus, step_dt, config)?;
            &op_owned
        };

        let (next, stats) = advance(
            op,
            k_old.as_ref(),
            &states[i],
            t_n,
            t_plus,
            step_dt,
            config,
            system,
            src,
        )?;
        if config.theta < 1.0 {
            k_old = Some(op.stiffness.clone());
        }
        times.push(t_plus);
        states.push(next);
        diagnostics.push(stats);
    }

    Ok(Trajectory {
        times,
        states,
        diagnostics,
    })
}

/// One refinement level of a temporal self-convergence study.
#[derive(Debug, Clone, Copy)]
pub struct StudyLevel {
    pub dt: f64,
    /// M-norm distance to the reference solution at `t_end`.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub levels: Vec<StudyLevel>,
    /// Per-pair orders `log2(e_i / e_{i+1})`.
    pub orders: Vec<f64>,
    /// Least-squares slope of `log2 error` against `log2 dt`.
    pub observed_order: f64,
}

/// Runs the integrator at each step size against a reference computed with
/// `min(dts)/16`; spatial error cancels because the mesh is shared.
pub fn convergence_study<S: Source + Sync + ?Sized>(
    u0: &DVector<f64>,
    src: &S,
    base: &SolverConfig,
    system: &AssembledSystem,
    dts: &[f64],
) -> Result<ConvergenceStudy> {
    if dts.len() < 3 {
        return Err(Error::Integrator(
            "a convergence study needs at least three step sizes".into(),
        ));
    }
    for w in dts.windows(2) {
        let ratio = w[0] / w[1];
        if (ratio - 2.0).abs() > 1e-9 {
            return Err(Error::Integrator(format!(
                "step sizes must halve; got ratio {ratio}"
            )));
        }
    }
    let mut all = dts.to_vec();
    all.push(dts[dts.len() - 1] / 16.0);
    let finals = exec::try_map(&all, |&dt| -> Result<DVector<f64>> {
        let config = SolverConfig { dt, ..*base };
        Ok(simulate(u0, src, &config, system)?.final_state().clone())
    })?;
    let reference = &finals[finals.len() - 1];
    let mass = system.mass();
    let levels: Vec<StudyLevel> = dts
        .iter()
        .zip(&finals)
        .map(|(&dt, u)| StudyLevel {
            dt,
            error: weighted_norm(mass, &(u - reference)),
        })
        .collect();
    let orders: Vec<f64> = levels
        .windows(2)
        .map(|w| (w[0].error / w[1].error).log2())
        .collect();
    // least squares through (log2 dt, log2 error)
    let n = levels.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for level in &levels {
        let x = level.dt.log2();
        let y = level.error.log2();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let observed_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(ConvergenceStudy {
        levels,
        orders,
        observed_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{certify_bounds, CoefficientProfile, CoefficientSet, Horizon};
    use crate::fem::Mesh;
    use crate::graph::MetricGraph;
    use crate::linalg::{weighted_inner, SymPattern};
    use crate::spectral::generalized_eigs;
    use approx::assert_relative_eq;

    fn single_edge_system(n: usize) -> AssembledSystem {
        let g = MetricGraph::from_edges(&[(1, 2)], false).unwrap();
        let mesh = Mesh::new(&g, n).unwrap();
        let coeffs = CoefficientSet::uniform_constant(1, 1.0, 1.0);
        let cert = certify_bounds(&coeffs, 0.25, Horizon::Infinite).unwrap();
        AssembledSystem::new(mesh, coeffs, cert, false).unwrap()
    }

    fn triangle_system() -> AssembledSystem {
        let g = MetricGraph::from_edges(&[(1, 2), (2, 3), (3, 1)], false).unwrap();
        let mesh = Mesh::new(&g, 15).unwrap();
        let coeffs = CoefficientSet::uniform_constant(3, 1.0, 1.0);
        let cert = certify_bounds(&coeffs, 0.25, Horizon::Infinite).unwrap();
        AssembledSystem::new(mesh, coeffs, cert, false).unwrap()
    }

    #[test]
    fn zero_stiffness_step_is_identity() {
        // the raw theta update with K = 0 and f = 0 leaves the state alone
        let pattern = SymPattern::new(3, [(0, 1), (1, 2)]);
        let mut mass = SymMatrix::zeros(std::sync::Arc::clone(&pattern));
        for i in 0..3 {
            mass.add(i, i, 1.0);
        }
        let k = SymMatrix::zeros(pattern);
        let config = SolverConfig::default();
        let mut s = k.scaled(config.theta * config.dt);
        s.axpy(1.0, &mass);
        let op = StepOperator {
            solver: SpdSolver::new(&s, config.linear_tol).unwrap(),
            weighted_mass: mass,
            stiffness: k,
        };
        let u = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let sys = single_edge_system(1);
        let (next, _) =
            advance(&op, None, &u, 0.0, config.dt, config.dt, &config, &sys, &ZeroSource)
                .unwrap();
        assert_relative_eq!(next, u, epsilon = 1e-13);
    }

    #[test]
    fn constant_state_is_fixed_point() {
        let sys = triangle_system();
        let alpha = 2.5;
        let u = DVector::from_element(sys.mesh().total_dofs(), alpha);
        for theta in [0.5, 1.0] {
            let config = SolverConfig {
                theta,
                dt: 0.02,
                ..SolverConfig::default()
            };
            let (next, _) = step(&u, 0.0, &ZeroSource, &config, &sys).unwrap();
            for v in next.iter() {
                assert_relative_eq!(*v, alpha, epsilon = 1e-12 * alpha);
            }
        }
    }

    #[test]
    fn backward_euler_decays_eigenmode() {
        let sys = single_edge_system(15);
        let k = sys.stiffness(0.0).unwrap();
        let dec = generalized_eigs(&k, sys.mass(), 2).unwrap();
        let lambda2 = dec.eigenvalues[1];
        let x2 = dec.eigenvectors[1].clone();
        let config = SolverConfig {
            dt: 0.01,
            theta: 1.0,
            ..SolverConfig::default()
        };
        let (u1, _) = step(&x2, 0.0, &ZeroSource, &config, &sys).unwrap();
        let expected = &x2 / (1.0 + config.dt * lambda2);
        assert_relative_eq!(u1, expected, epsilon = 1e-10);
    }

    #[test]
    fn all_ones_is_global_equilibrium() {
        let sys = triangle_system();
        let u0 = DVector::from_element(sys.mesh().total_dofs(), 1.0);
        let config = SolverConfig {
            dt: 0.05,
            t_end: 1.0,
            ..SolverConfig::default()
        };
        let traj = simulate(&u0, &ZeroSource, &config, &sys).unwrap();
        for state in &traj.states {
            for v in state.iter() {
                assert_relative_eq!(*v, 1.0, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn mass_is_conserved_without_forcing() {
        let sys = triangle_system();
        let d = sys.mesh().total_dofs();
        let u0 = DVector::from_fn(d, |i, _| 1.0 + ((i * 7 % 5) as f64) * 0.1);
        let config = SolverConfig {
            dt: 0.01,
            t_end: 2.0,
            ..SolverConfig::default()
        };
        let traj = simulate(&u0, &ZeroSource, &config, &sys).unwrap();
        let ones = DVector::from_element(d, 1.0);
        let m0 = weighted_inner(sys.mass(), &ones, &u0);
        for state in &traj.states {
            let m = weighted_inner(sys.mass(), &ones, state);
            assert!((m - m0).abs() <= 1e-11 * m0.abs());
        }
    }

    #[test]
    fn backward_euler_mean_free_part_decays_under_envelope() {
        // every mode above the kernel contracts by at least 1/(1 + dt lambda2)
        // per step, so the mean-free part stays under that envelope
        let sys = triangle_system();
        let k = sys.stiffness(0.0).unwrap();
        let dec = generalized_eigs(&k, sys.mass(), 2).unwrap();
        let lambda2 = dec.eigenvalues[1];
        let d = sys.mesh().total_dofs();
        let e1 = DVector::from_element(d, 1.0 / 3.0_f64.sqrt());
        let u0 = &e1 * 0.7 + &dec.eigenvectors[1] * 0.5;
        let config = SolverConfig {
            dt: 0.02,
            theta: 1.0,
            t_end: 1.0,
            ..SolverConfig::default()
        };
        let traj = simulate(&u0, &ZeroSource, &config, &sys).unwrap();
        let mass = sys.mass();
        let m_e1 = mass.matvec(&e1);
        let tilde0 = {
            let t = &u0 - &e1 * m_e1.dot(&u0);
            crate::linalg::weighted_norm(mass, &t)
        };
        for (n, state) in traj.states.iter().enumerate() {
            let tilde = state - &e1 * m_e1.dot(state);
            let norm = crate::linalg::weighted_norm(mass, &tilde);
            let envelope = tilde0 / (1.0 + config.dt * lambda2).powi(n as i32);
            assert!(
                norm <= envelope * (1.0 + 1e-10),
                "step {n}: {norm} above envelope {envelope}"
            );
        }
    }

    #[test]
    fn backward_euler_dissipates_energy() {
        let sys = triangle_system();
        let d = sys.mesh().total_dofs();
        let u0 = DVector::from_fn(d, |i, _| (i as f64 * 0.37).sin());
        let config = SolverConfig {
            dt: 0.02,
            t_end: 1.0,
            theta: 1.0,
            ..SolverConfig::default()
        };
        let traj = simulate(&u0, &ZeroSource, &config, &sys).unwrap();
        let k = sys.stiffness(0.0).unwrap();
        let mut prev = f64::INFINITY;
        for state in &traj.states {
            let energy = k.quad_form(state);
            assert!(energy <= prev * (1.0 + 1e-12) + 1e-14);
            prev = energy;
        }
    }

    #[test]
    fn short_final_step_hits_t_end() {
        let sys = single_edge_system(3);
        let u0 = DVector::from_element(sys.mesh().total_dofs(), 1.0);
        let config = SolverConfig {
            dt: 0.03,
            t_end: 0.1,
            ..SolverConfig::default()
        };
        let traj = simulate(&u0, &ZeroSource, &config, &sys).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert_relative_eq!(*traj.times.last().unwrap(), 0.1);
    }

    #[test]
    fn horizon_violations_are_rejected() {
        let g = MetricGraph::from_edges(&[(1, 2)], false).unwrap();
        let mesh = Mesh::new(&g, 3).unwrap();
        let coeffs = CoefficientSet::uniform_constant(1, 1.0, 1.0);
        let cert = certify_bounds(&coeffs, 0.25, Horizon::Finite(0.5)).unwrap();
        let sys = AssembledSystem::new(mesh, coeffs, cert, false).unwrap();
        let u0 = DVector::from_element(sys.mesh().total_dofs(), 1.0);
        let config = SolverConfig {
            t_end: 1.0,
            ..SolverConfig::default()
        };
        assert!(simulate(&u0, &ZeroSource, &config, &sys).is_err());
    }

    #[test]
    fn temporal_orders_match_theta() {
        let sys = single_edge_system(15);
        let k = sys.stiffness(0.0).unwrap();
        let dec = generalized_eigs(&k, sys.mass(), 2).unwrap();
        let u0 = dec.eigenvectors[1].clone();
        let dts = [0.04, 0.02, 0.01];

        let be = SolverConfig {
            theta: 1.0,
            t_end: 0.4,
            ..SolverConfig::default()
        };
        let study = convergence_study(&u0, &ZeroSource, &be, &sys, &dts).unwrap();
        assert!(
            (0.8..=1.2).contains(&study.observed_order),
            "backward Euler order {}",
            study.observed_order
        );

        let cn = SolverConfig {
            theta: 0.5,
            t_end: 0.4,
            ..SolverConfig::default()
        };
        let study = convergence_study(&u0, &ZeroSource, &cn, &sys, &dts).unwrap();
        assert!(
            (1.8..=2.2).contains(&study.observed_order),
            "trapezoidal order {}",
            study.observed_order
        );
    }

    #[test]
    fn manufactured_solution_first_order_in_time() {
        // u(t, x) = e^{-t} cos(pi x) with mu = 1 + 0.5 e^{-t} and c = 1,
        // so M_B is genuinely time dependent
        use std::f64::consts::PI;
        let g = MetricGraph::from_edges(&[(1, 2)], false).unwrap();
        let mesh = Mesh::new(&g, 127).unwrap();
        let coeffs = CoefficientSet::new(
            vec![CoefficientProfile::ExpApproach {
                limit: 1.0,
                amplitude: 0.5,
                rate: 1.0,
            }],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        let cert = certify_bounds(&coeffs, 0.25, Horizon::Infinite).unwrap();
        let sys = AssembledSystem::new(mesh.clone(), coeffs, cert, false).unwrap();

        let exact = |t: f64, x: f64| (-t).exp() * (PI * x).cos();
        let src = FnSource(|_, t: f64, x: f64| {
            let b = 1.0 + 0.5 * (-t).exp();
            b * (PI * PI - 1.0) * (-t).exp() * (PI * x).cos()
        });
        let u0 = DVector::from_fn(mesh.total_dofs(), |i, _| {
            // single edge: dof(1, p) enumerates all nodes
            let p = (0..=mesh.nodes_per_edge() + 1)
                .find(|&p| mesh.dof(1, p) == i)
                .unwrap();
            exact(0.0, mesh.node_position(p))
        });

        let mut errors = Vec::new();
        for &dt in &[0.2, 0.1, 0.05] {
            let config = SolverConfig {
                dt,
                theta: 1.0,
                t_end: 1.0,
                ..SolverConfig::default()
            };
            let traj = simulate(&u0, &src, &config, &sys).unwrap();
            let u_end = traj.final_state();
            let mut err: f64 = 0.0;
            for p in 0..=mesh.nodes_per_edge() + 1 {
                let i = mesh.dof(1, p);
                err = err.max((u_end[i] - exact(1.0, mesh.node_position(p))).abs());
            }
            errors.push(err);
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(
                (0.8..=1.2).contains(&order),
                "manufactured-solution order {order} (errors {errors:?})"
            );
        }
    }
}
