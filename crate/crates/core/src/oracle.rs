//! Independent references for validating the main pipeline: closed-form
//! spectra for intervals and cycles, a dense spectral-expansion evolution
//! for autonomous systems, and spatial refinement studies.

use nalgebra::DVector;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec;
use crate::fem::{assemble_mass, assemble_stiffness_with, AssembledSystem, Mesh};
use crate::graph::MetricGraph;
use crate::spectral::generalized_eigs;

/// Graph families with known spectra. Edges all have unit length, so an
/// interval of length `L` is a chain of `L` edges and a cycle of length `L`
/// a ring of `L` edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleFamily {
    /// Interval of length `edges` with natural (Neumann) ends.
    Interval { edges: usize },
    /// Cycle of total length `edges`.
    Cycle { edges: usize },
}

impl OracleFamily {
    pub fn graph(&self) -> Result<MetricGraph> {
        match *self {
            OracleFamily::Interval { edges } => {
                if edges == 0 {
                    return Err(Error::Oracle("interval needs at least one edge".into()));
                }
                let list: Vec<(usize, usize)> = (1..=edges).map(|j| (j, j + 1)).collect();
                MetricGraph::from_edges(&list, false)
            }
            OracleFamily::Cycle { edges } => {
                if edges < 3 {
                    return Err(Error::Oracle("cycle needs at least three edges".into()));
                }
                let mut list: Vec<(usize, usize)> = (1..edges).map(|j| (j, j + 1)).collect();
                list.push((edges, 1));
                MetricGraph::from_edges(&list, true)
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            OracleFamily::Interval { edges } | OracleFamily::Cycle { edges } => edges as f64,
        }
    }

    /// Detects the family of a path or cycle graph.
    pub fn detect(graph: &MetricGraph) -> Option<OracleFamily> {
        let degrees = graph.degrees();
        if degrees.iter().all(|&d| d == 2) {
            return Some(OracleFamily::Cycle {
                edges: graph.edge_count(),
            });
        }
        let leaves = degrees.iter().filter(|&&d| d == 1).count();
        if leaves == 2 && degrees.iter().all(|&d| d <= 2) {
            return Some(OracleFamily::Interval {
                edges: graph.edge_count(),
            });
        }
        None
    }
}

/// The `count` smallest eigenvalues of the unit-coefficient family member,
/// with multiplicities.
pub fn closed_form_eigs(family: OracleFamily, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Oracle("requested zero eigenvalues".into()));
    }
    let length = family.length();
    let mut eigs = Vec::with_capacity(count + 1);
    match family {
        OracleFamily::Interval { .. } => {
            for k in 0..count {
                eigs.push((k as f64 * PI / length).powi(2));
            }
        }
        OracleFamily::Cycle { .. } => {
            eigs.push(0.0);
            let mut j = 1.0;
            while eigs.len() < count {
                let lambda = (2.0 * PI * j / length).powi(2);
                eigs.push(lambda);
                eigs.push(lambda);
                j += 1.0;
            }
            eigs.truncate(count);
        }
    }
    Ok(eigs)
}

/// Evolves `M_B u' + K u = 0` to `t_end` by full spectral expansion of the
/// `(K, M_B)` pencil; valid only for autonomous coefficients, where the
/// evolution diagonalizes in the B-weighted inner product. No time stepping
/// is involved, so this is an independent oracle for the integrator.
pub fn dense_reference_evolution(
    system: &AssembledSystem,
    t0: f64,
    u0: &DVector<f64>,
    t_end: f64,
) -> Result<DVector<f64>> {
    if !system.coeffs().is_autonomous() {
        return Err(Error::Oracle(
            "spectral-expansion oracle is disabled for time-dependent coefficients".into(),
        ));
    }
    let dim = system.mesh().total_dofs();
    if dim > 2000 {
        return Err(Error::Oracle(format!(
            "dimension {dim} too large for a dense expansion"
        )));
    }
    if u0.len() != dim {
        return Err(Error::Oracle("initial state dimension mismatch".into()));
    }
    let k = system.stiffness(t0)?;
    let mb = system.weighted_mass(t0)?;
    let dec = generalized_eigs(&k, &mb, dim)?;
    let mb_u0 = mb.matvec(u0);
    let mut u = DVector::zeros(dim);
    for (lambda, x) in dec.eigenvalues.iter().zip(&dec.eigenvectors) {
        let coeff = x.dot(&mb_u0) * (-lambda.max(0.0) * t_end).exp();
        u += x * coeff;
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy)]
pub struct RefinementLevel {
    pub nodes_per_edge: usize,
    pub h: f64,
    /// Discrete second eigenvalue (cluster mean on degenerate families).
    pub lambda2: f64,
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub family: OracleFamily,
    pub levels: Vec<RefinementLevel>,
    /// Per-pair observed orders `log2(e_i / e_{i+1})`.
    pub orders: Vec<f64>,
}

/// Compares the discrete second eigenvalue against the closed form under
/// mesh doubling (`N -> 2N + 1` halves `h`).
pub fn refinement_study(family: OracleFamily, ns: &[usize]) -> Result<RefinementStudy> {
    if ns.len() < 3 {
        return Err(Error::Oracle(
            "a refinement study needs at least three levels".into(),
        ));
    }
    for w in ns.windows(2) {
        if w[1] != 2 * w[0] + 1 {
            return Err(Error::Oracle(format!(
                "levels must double the mesh: expected {} after {}, got {}",
                2 * w[0] + 1,
                w[0],
                w[1]
            )));
        }
    }
    let graph = family.graph()?;
    let exact = closed_form_eigs(family, 3)?;
    let degenerate = matches!(family, OracleFamily::Cycle { .. });
    let levels = exec::try_map(ns, |&n| -> Result<RefinementLevel> {
        let mesh = Mesh::new(&graph, n)?;
        let mass = assemble_mass(&mesh);
        let mu = vec![1.0; graph.edge_count()];
        let stiff = assemble_stiffness_with(&mesh, &mu);
        let dec = generalized_eigs(&stiff, &mass, 3)?;
        let lambda2 = if degenerate {
            0.5 * (dec.eigenvalues[1] + dec.eigenvalues[2])
        } else {
            dec.eigenvalues[1]
        };
        Ok(RefinementLevel {
            nodes_per_edge: n,
            h: mesh.element_size(),
            lambda2,
            error: (lambda2 - exact[1]).abs(),
        })
    })?;
    let orders = levels
        .windows(2)
        .map(|w| (w[0].error / w[1].error).log2())
        .collect();
    Ok(RefinementStudy {
        family,
        levels,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{certify_bounds, CoefficientProfile, CoefficientSet, Horizon};
    use crate::integrator::{simulate, SolverConfig, ZeroSource};
    use crate::linalg::weighted_norm;
    use approx::assert_relative_eq;

    fn autonomous_system(graph: MetricGraph, n: usize, mu: f64, c: f64) -> AssembledSystem {
        let m = graph.edge_count();
        let mesh = Mesh::new(&graph, n).unwrap();
        let coeffs = CoefficientSet::uniform_constant(m, mu, c);
        let cert = certify_bounds(&coeffs, 0.2, Horizon::Infinite).unwrap();
        AssembledSystem::new(mesh, coeffs, cert, false).unwrap()
    }

    #[test]
    fn closed_forms_match_hand_values() {
        let i1 = closed_form_eigs(OracleFamily::Interval { edges: 1 }, 3).unwrap();
        assert_relative_eq!(i1[0], 0.0);
        assert_relative_eq!(i1[1], PI * PI);
        assert_relative_eq!(i1[2], 4.0 * PI * PI);

        let c3 = closed_form_eigs(OracleFamily::Cycle { edges: 3 }, 3).unwrap();
        assert_relative_eq!(c3[0], 0.0);
        assert_relative_eq!(c3[1], (2.0 * PI / 3.0).powi(2));
        assert_relative_eq!(c3[2], (2.0 * PI / 3.0).powi(2));

        let i2 = closed_form_eigs(OracleFamily::Interval { edges: 2 }, 2).unwrap();
        assert_relative_eq!(i2[1], (PI / 2.0).powi(2));
    }

    #[test]
    fn family_detection() {
        let path = MetricGraph::from_edges(&[(1, 2), (2, 3)], false).unwrap();
        assert_eq!(
            OracleFamily::detect(&path),
            Some(OracleFamily::Interval { edges: 2 })
        );
        let cycle = MetricGraph::from_edges(&[(1, 2), (2, 3), (3, 1)], false).unwrap();
        assert_eq!(
            OracleFamily::detect(&cycle),
            Some(OracleFamily::Cycle { edges: 3 })
        );
        let star = MetricGraph::from_edges(&[(1, 2), (1, 3), (1, 4)], false).unwrap();
        assert_eq!(OracleFamily::detect(&star), None);
    }

    #[test]
    fn expansion_keeps_kernel_mode_and_decays_x2() {
        let g = OracleFamily::Interval { edges: 1 }.graph().unwrap();
        let sys = autonomous_system(g, 15, 1.0, 1.0);
        let k = sys.stiffness(0.0).unwrap();
        let dec = generalized_eigs(&k, sys.mass(), 2).unwrap();

        let x1 = dec.eigenvectors[0].clone();
        let out = dense_reference_evolution(&sys, 0.0, &x1, 5.0).unwrap();
        assert_relative_eq!(out, x1, epsilon = 1e-9);

        let lambda2 = dec.eigenvalues[1];
        let x2 = dec.eigenvectors[1].clone();
        let out = dense_reference_evolution(&sys, 0.0, &x2, 1.0 / lambda2).unwrap();
        assert_relative_eq!(out, x2 * (-1.0_f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn expansion_cross_validates_the_integrator() {
        let g = MetricGraph::from_edges(&[(1, 2), (2, 3), (3, 1)], false).unwrap();
        let sys = autonomous_system(g, 15, 1.3, 0.9);
        let d = sys.mesh().total_dofs();
        let u0 = DVector::from_fn(d, |i, _| 1.0 + (i as f64 * 0.61).sin() * 0.4);
        let config = SolverConfig {
            dt: 1e-3,
            theta: 0.5,
            t_end: 1.0,
            ..SolverConfig::default()
        };
        let traj = simulate(&u0, &ZeroSource, &config, &sys).unwrap();
        let reference = dense_reference_evolution(&sys, 0.0, &u0, 1.0).unwrap();
        let err = weighted_norm(sys.mass(), &(traj.final_state() - &reference));
        let scale = weighted_norm(sys.mass(), &reference);
        assert!(err / scale <= 1e-5, "relative deviation {}", err / scale);
    }

    #[test]
    fn expansion_rejects_time_dependent_coefficients() {
        let g = MetricGraph::from_edges(&[(1, 2)], false).unwrap();
        let mesh = Mesh::new(&g, 3).unwrap();
        let coeffs = CoefficientSet::new(
            vec![CoefficientProfile::ExpApproach {
                limit: 1.0,
                amplitude: 0.5,
                rate: 1.0,
            }],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        let cert = certify_bounds(&coeffs, 0.2, Horizon::Infinite).unwrap();
        let sys = AssembledSystem::new(mesh, coeffs, cert, false).unwrap();
        let u0 = DVector::zeros(sys.mesh().total_dofs());
        assert!(dense_reference_evolution(&sys, 0.0, &u0, 1.0).is_err());
    }

    #[test]
    fn refinement_orders_near_two() {
        for family in [
            OracleFamily::Interval { edges: 1 },
            OracleFamily::Cycle { edges: 3 },
        ] {
            let study = refinement_study(family, &[15, 31, 63]).unwrap();
            for (i, order) in study.orders.iter().enumerate() {
                assert!(
                    (1.8..=2.2).contains(order),
                    "{family:?} level {i} order {order}"
                );
            }
            for w in study.levels.windows(2) {
                assert!(w[1].error < w[0].error, "errors must decrease");
            }
        }
    }

    #[test]
    fn kernel_eigenvalue_is_exact_at_all_levels() {
        let graph = OracleFamily::Cycle { edges: 3 }.graph().unwrap();
        for n in [15, 31, 63] {
            let mesh = Mesh::new(&graph, n).unwrap();
            let mass = assemble_mass(&mesh);
            let stiff = assemble_stiffness_with(&mesh, &[1.0, 1.0, 1.0]);
            let dec = generalized_eigs(&stiff, &mass, 1).unwrap();
            assert!(dec.eigenvalues[0].abs() <= 1e-10);
        }
    }

    #[test]
    fn refinement_rejects_bad_level_lists() {
        let family = OracleFamily::Interval { edges: 1 };
        assert!(refinement_study(family, &[15, 31]).is_err());
        assert!(refinement_study(family, &[15, 30, 60]).is_err());
    }
}
