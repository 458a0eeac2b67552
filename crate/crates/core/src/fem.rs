//! P1 finite elements on the shared-vertex graph mesh.
//!
//! Every edge carries the same uniform mesh of `N` interior nodes; each
//! vertex owns a single global DOF shared by all incident edges, which is
//! exactly the continuity constraint defining the trial space. Element
//! integrands are polynomial, so mass and stiffness use exact formulas;
//! loads use two-point Gauss quadrature.

use std::sync::Arc;

use nalgebra::DVector;

use crate::coeff::{BoundsCertificate, CoefficientSet};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, MetricGraph};
use crate::linalg::{SymMatrix, SymPattern};

/// Uniform P1 mesh over a metric graph.
#[derive(Debug, Clone)]
pub struct Mesh {
    graph: MetricGraph,
    nodes_per_edge: usize,
    h: f64,
    total_dofs: usize,
    pattern: Arc<SymPattern>,
}

impl Mesh {
    pub fn new(graph: &MetricGraph, nodes_per_edge: usize) -> Result<Self> {
        if nodes_per_edge < 1 {
            return Err(Error::Mesh(
                "at least one interior node per edge is required".into(),
            ));
        }
        let n = graph.vertex_count();
        let m = graph.edge_count();
        let total_dofs = n + m * nodes_per_edge;
        let mut mesh = Mesh {
            graph: graph.clone(),
            nodes_per_edge,
            h: 1.0 / (nodes_per_edge as f64 + 1.0),
            total_dofs,
            pattern: SymPattern::new(0, []),
        };
        let mut entries = Vec::with_capacity(m * (nodes_per_edge + 1));
        for j in 1..=m {
            for p in 0..=nodes_per_edge {
                entries.push((mesh.dof(j, p), mesh.dof(j, p + 1)));
            }
        }
        mesh.pattern = SymPattern::new(total_dofs, entries);
        Ok(mesh)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn nodes_per_edge(&self) -> usize {
        self.nodes_per_edge
    }

    /// Element size `h = 1/(N+1)`.
    pub fn element_size(&self) -> f64 {
        self.h
    }

    pub fn total_dofs(&self) -> usize {
        self.total_dofs
    }

    pub fn pattern(&self) -> Arc<SymPattern> {
        Arc::clone(&self.pattern)
    }

    /// Global DOF of local node `p in 0..=N+1` on edge `j`; node 0 is the
    /// tail vertex, node N+1 the head vertex.
    pub fn dof(&self, j: EdgeId, p: usize) -> usize {
        debug_assert!(p <= self.nodes_per_edge + 1);
        if p == 0 {
            self.graph.tail(j) - 1
        } else if p == self.nodes_per_edge + 1 {
            self.graph.head(j) - 1
        } else {
            self.graph.vertex_count() + (j - 1) * self.nodes_per_edge + (p - 1)
        }
    }

    pub fn vertex_dof(&self, v: usize) -> usize {
        v - 1
    }

    /// Coordinate of local node `p` along edge `j` (edges have unit length).
    pub fn node_position(&self, p: usize) -> f64 {
        p as f64 * self.h
    }
}

/// Unweighted mass matrix; `1^T M 1` equals the total graph length.
pub fn assemble_mass(mesh: &Mesh) -> SymMatrix {
    let mut m = SymMatrix::zeros(mesh.pattern());
    let h = mesh.element_size();
    for j in 1..=mesh.graph().edge_count() {
        for p in 0..=mesh.nodes_per_edge() {
            let (a, b) = (mesh.dof(j, p), mesh.dof(j, p + 1));
            m.add(a, a, h / 3.0);
            m.add(b, b, h / 3.0);
            m.add(a, b, h / 6.0);
        }
    }
    m
}

/// Stiffness matrix of the form `sum_j mu_j(t) int f' g'`; the vertex
/// conditions are natural, so constants span the kernel.
pub fn assemble_stiffness(mesh: &Mesh, coeffs: &CoefficientSet, t: f64) -> Result<SymMatrix> {
    let mu: Vec<f64> = (1..=mesh.graph().edge_count())
        .map(|j| coeffs.eval_mu(j, t))
        .collect::<Result<_>>()?;
    Ok(assemble_stiffness_with(mesh, &mu))
}

/// Stiffness matrix for explicit per-edge diffusion values.
pub fn assemble_stiffness_with(mesh: &Mesh, mu: &[f64]) -> SymMatrix {
    assert_eq!(mu.len(), mesh.graph().edge_count());
    let mut k = SymMatrix::zeros(mesh.pattern());
    let h = mesh.element_size();
    for j in 1..=mesh.graph().edge_count() {
        let w = mu[j - 1] / h;
        for p in 0..=mesh.nodes_per_edge() {
            let (a, b) = (mesh.dof(j, p), mesh.dof(j, p + 1));
            k.add(a, a, w);
            k.add(b, b, w);
            k.add(a, b, -w);
        }
    }
    k
}

/// Mass matrix weighted edgewise by `b_j(t) = mu_j(t)/c_j(t)`.
///
/// With `lumped` the consistent element matrix is replaced by its row-sum
/// diagonal, which combined with a fully implicit step yields an M-matrix
/// system and a discrete positivity principle.
pub fn assemble_weighted_mass(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    t: f64,
    lumped: bool,
) -> Result<SymMatrix> {
    let mut m = SymMatrix::zeros(mesh.pattern());
    let h = mesh.element_size();
    for j in 1..=mesh.graph().edge_count() {
        let b = coeffs.eval_b(j, t)?;
        for p in 0..=mesh.nodes_per_edge() {
            let (a, bb) = (mesh.dof(j, p), mesh.dof(j, p + 1));
            if lumped {
                m.add(a, a, b * h / 2.0);
                m.add(bb, bb, b * h / 2.0);
            } else {
                m.add(a, a, b * h / 3.0);
                m.add(bb, bb, b * h / 3.0);
                m.add(a, bb, b * h / 6.0);
            }
        }
    }
    Ok(m)
}

/// Load vector `int F(t, .) phi_k` by two-point Gauss quadrature.
pub fn assemble_load(mesh: &Mesh, f: impl Fn(EdgeId, f64) -> f64) -> DVector<f64> {
    let mut load = DVector::zeros(mesh.total_dofs());
    let h = mesh.element_size();
    // Gauss points on the unit element, weight 1/2 each
    let s0 = 0.5 - 0.5 / 3.0_f64.sqrt();
    let s1 = 0.5 + 0.5 / 3.0_f64.sqrt();
    for j in 1..=mesh.graph().edge_count() {
        for p in 0..=mesh.nodes_per_edge() {
            let (a, b) = (mesh.dof(j, p), mesh.dof(j, p + 1));
            let x0 = mesh.node_position(p);
            for s in [s0, s1] {
                let v = f(j, x0 + s * h) * h / 2.0;
                load[a] += v * (1.0 - s);
                load[b] += v * s;
            }
        }
    }
    load
}

/// `sum_j int f_j` by the same quadrature as the loads.
pub fn integrate(mesh: &Mesh, f: impl Fn(EdgeId, f64) -> f64) -> f64 {
    let h = mesh.element_size();
    let s0 = 0.5 - 0.5 / 3.0_f64.sqrt();
    let s1 = 0.5 + 0.5 / 3.0_f64.sqrt();
    let mut acc = 0.0;
    for j in 1..=mesh.graph().edge_count() {
        for p in 0..=mesh.nodes_per_edge() {
            let x0 = mesh.node_position(p);
            acc += (f(j, x0 + s0 * h) + f(j, x0 + s1 * h)) * h / 2.0;
        }
    }
    acc
}

/// Edgewise L2 norm `(sum_j int f_j^2)^{1/2}` by quadrature.
pub fn l2_norm(mesh: &Mesh, f: impl Fn(EdgeId, f64) -> f64) -> f64 {
    integrate(mesh, |j, x| f(j, x) * f(j, x)).max(0.0).sqrt()
}

/// A mesh bundled with its coefficients, certificate and fixed mass matrix;
/// the time-dependent matrices are assembled on demand.
///
/// Assembly is a pure function of `(mesh, coeffs, t)`, so one system can be
/// shared across threads for parameter sweeps and spectral tracking.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    mesh: Mesh,
    coeffs: CoefficientSet,
    cert: BoundsCertificate,
    mass: SymMatrix,
    lumped: bool,
}

impl AssembledSystem {
    pub fn new(
        mesh: Mesh,
        coeffs: CoefficientSet,
        cert: BoundsCertificate,
        lumped: bool,
    ) -> Result<Self> {
        if coeffs.edge_count() != mesh.graph().edge_count() {
            return Err(Error::Mesh(format!(
                "coefficient set covers {} edges, graph has {}",
                coeffs.edge_count(),
                mesh.graph().edge_count()
            )));
        }
        let mass = assemble_mass(&mesh);
        Ok(AssembledSystem {
            mesh,
            coeffs,
            cert,
            mass,
            lumped,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn cert(&self) -> &BoundsCertificate {
        &self.cert
    }

    pub fn mass(&self) -> &SymMatrix {
        &self.mass
    }

    pub fn lumped(&self) -> bool {
        self.lumped
    }

    pub fn stiffness(&self, t: f64) -> Result<SymMatrix> {
        assemble_stiffness(&self.mesh, &self.coeffs, t)
    }

    pub fn weighted_mass(&self, t: f64) -> Result<SymMatrix> {
        assemble_weighted_mass(&self.mesh, &self.coeffs, t, self.lumped)
    }
}
