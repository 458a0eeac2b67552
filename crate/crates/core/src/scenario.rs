//! Scenario files: a JSON description of graph, coefficients, initial data,
//! forcing, solver and analysis settings. Unknown fields are rejected so
//! typos fail loudly, and all cross-references are validated up front.

use std::path::Path;

use nalgebra::DVector;
use serde::Deserialize;

use crate::coeff::{
    certify_bounds, BoundsCertificate, CoefficientProfile, CoefficientSet, Horizon,
};
use crate::error::{Error, Result};
use crate::fem::{AssembledSystem, Mesh};
use crate::graph::{EdgeId, MetricGraph};
use crate::integrator::{Forcing, SolverConfig};
use crate::spectral::generalized_eigs;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    graph: GraphSection,
    coefficients: CoeffSection,
    #[serde(default)]
    initial: Option<InitialSection>,
    #[serde(default)]
    forcing: Option<Forcing>,
    #[serde(default)]
    solver: Option<SolverSection>,
    #[serde(default)]
    analysis: Option<AnalysisSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSection {
    vertices: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    strict: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffSection {
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default)]
    horizon: Option<HorizonField>,
    entries: Vec<CoeffEntry>,
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HorizonField {
    Time(f64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffEntry {
    mu: CoefficientProfile,
    c: CoefficientProfile,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum InitialSection {
    Constant {
        value: f64,
    },
    Eigenmode {
        k: usize,
    },
    Bump {
        edge: EdgeId,
        center: f64,
        width: f64,
    },
    EdgePolynomials {
        polys: Vec<Vec<f64>>,
    },
    NodeSamples {
        per_edge: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    #[serde(default = "default_nodes")]
    nodes_per_edge: usize,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_theta")]
    theta: f64,
    #[serde(default = "default_t_end")]
    t_end: f64,
    #[serde(default)]
    lumped: bool,
    #[serde(default = "default_linear_tol")]
    linear_tol: f64,
}

fn default_nodes() -> usize {
    31
}
fn default_dt() -> f64 {
    0.01
}
fn default_theta() -> f64 {
    1.0
}
fn default_t_end() -> f64 {
    1.0
}
fn default_linear_tol() -> f64 {
    1e-12
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            nodes_per_edge: default_nodes(),
            dt: default_dt(),
            theta: default_theta(),
            t_end: default_t_end(),
            lumped: false,
            linear_tol: default_linear_tol(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    #[serde(default)]
    spectral_grid: Option<GridSection>,
    #[serde(default)]
    eigenvalue_count: Option<usize>,
    #[serde(default)]
    window: Option<[f64; 2]>,
    #[serde(default)]
    refinement: Option<Vec<usize>>,
    #[serde(default)]
    positivity_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default)]
    start: f64,
    #[serde(default)]
    end: Option<f64>,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_samples() -> usize {
    33
}

/// Initial data in validated form.
#[derive(Debug, Clone)]
pub enum InitialData {
    Constant(f64),
    /// 1-based eigenmode of the `(K(0), M)` pencil.
    Eigenmode(usize),
    /// Smooth nonnegative bump supported inside one edge.
    Bump {
        edge: EdgeId,
        center: f64,
        width: f64,
    },
    /// Per-edge polynomials in `x` (ascending coefficients).
    EdgePolynomials(Vec<Vec<f64>>),
    /// Per-edge nodal samples, `N + 2` values including both endpoints.
    NodeSamples(Vec<Vec<f64>>),
}

/// Analysis settings with all defaults resolved.
#[derive(Debug, Clone)]
pub struct AnalysisParams {
    /// Spectral sampling grid.
    pub grid: Vec<f64>,
    pub eigenvalue_count: usize,
    /// Explicit decay-fit window, if any.
    pub window: Option<(f64, f64)>,
    /// Mesh sizes for the refinement study.
    pub refinement: Vec<usize>,
    pub positivity_tol: f64,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: MetricGraph,
    pub coeffs: CoefficientSet,
    pub cert: BoundsCertificate,
    pub initial: InitialData,
    pub forcing: Forcing,
    pub solver: SolverConfig,
    pub nodes_per_edge: usize,
    pub analysis: AnalysisParams,
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut scenario = parse_scenario_str(&text)?;
    if scenario.name.is_empty() {
        scenario.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
    }
    Ok(scenario)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    build(file)
}

fn build(file: ScenarioFile) -> Result<Scenario> {
    let edges: Vec<(usize, usize)> = file.graph.edges.iter().map(|e| (e[0], e[1])).collect();
    let graph = MetricGraph::new(file.graph.vertices, &edges, file.graph.strict)?;
    let m = graph.edge_count();

    if file.coefficients.entries.len() != m {
        return Err(Error::Scenario(format!(
            "coefficients.length: expected {m} entries (one per edge), got {}",
            file.coefficients.entries.len()
        )));
    }
    let (mu, c): (Vec<_>, Vec<_>) = file
        .coefficients
        .entries
        .into_iter()
        .map(|e| (e.mu, e.c))
        .unzip();
    let coeffs = CoefficientSet::new(mu, c)?;

    let solver_section = file.solver.unwrap_or_default();
    if solver_section.nodes_per_edge < 1 {
        return Err(Error::Scenario("solver.nodes_per_edge must be >= 1".into()));
    }
    let solver = SolverConfig {
        dt: solver_section.dt,
        theta: solver_section.theta,
        t_end: solver_section.t_end,
        linear_tol: solver_section.linear_tol,
        lumped: solver_section.lumped,
    };
    solver.validate()?;

    let analysis_section = file.analysis.unwrap_or_default();
    let grid_section = analysis_section.spectral_grid.unwrap_or(GridSection {
        start: 0.0,
        end: None,
        samples: default_samples(),
    });
    let grid_end = grid_section.end.unwrap_or(solver.t_end);
    if grid_section.samples < 2 || !(grid_end > grid_section.start) || grid_section.start < 0.0 {
        return Err(Error::Scenario(format!(
            "analysis.spectral_grid: need samples >= 2 and 0 <= start < end, got start {} end {} samples {}",
            grid_section.start, grid_end, grid_section.samples
        )));
    }
    let grid: Vec<f64> = (0..grid_section.samples)
        .map(|i| {
            grid_section.start
                + (grid_end - grid_section.start) * i as f64
                    / (grid_section.samples - 1) as f64
        })
        .collect();

    let eigenvalue_count = analysis_section.eigenvalue_count.unwrap_or(6).max(2);
    let window = analysis_section.window.map(|[a, b]| (a, b));
    if let Some((a, b)) = window {
        if !(a < b) {
            return Err(Error::Scenario(format!(
                "analysis.window: [{a}, {b}] is empty"
            )));
        }
    }
    let refinement = analysis_section
        .refinement
        .unwrap_or_else(|| vec![15, 31, 63]);
    let positivity_tol = analysis_section.positivity_tol.unwrap_or(1e-12);

    let needed = solver.t_end.max(grid_end);
    let horizon = match file.coefficients.horizon {
        None => Horizon::Finite(needed),
        Some(HorizonField::Time(t)) => {
            if t < needed {
                return Err(Error::Scenario(format!(
                    "coefficients.horizon {t} shorter than the run horizon {needed}"
                )));
            }
            Horizon::Finite(t)
        }
        Some(HorizonField::Word(w)) if w == "infinite" => Horizon::Infinite,
        Some(HorizonField::Word(w)) => {
            return Err(Error::Scenario(format!(
                "coefficients.horizon: expected a time or \"infinite\", got \"{w}\""
            )))
        }
    };
    let cert = certify_bounds(&coeffs, file.coefficients.epsilon, horizon)?;

    let forcing = file.forcing.unwrap_or_default();
    forcing.validate(m)?;

    let initial = match file.initial.unwrap_or(InitialSection::Constant { value: 1.0 }) {
        InitialSection::Constant { value } => InitialData::Constant(value),
        InitialSection::Eigenmode { k } => {
            if k == 0 {
                return Err(Error::Scenario("initial.k: eigenmodes are 1-based".into()));
            }
            InitialData::Eigenmode(k)
        }
        InitialSection::Bump {
            edge,
            center,
            width,
        } => {
            if edge == 0 || edge > m {
                return Err(Error::Scenario(format!(
                    "initial.edge {edge} outside 1..={m}"
                )));
            }
            if !(width > 0.0) || center - width < -1e-12 || center + width > 1.0 + 1e-12 {
                return Err(Error::Scenario(format!(
                    "initial bump [{} , {}] must sit inside the unit edge",
                    center - width,
                    center + width
                )));
            }
            InitialData::Bump {
                edge,
                center,
                width,
            }
        }
        InitialSection::EdgePolynomials { polys } => {
            if polys.len() != m {
                return Err(Error::Scenario(format!(
                    "initial.polys: expected {m} polynomials, got {}",
                    polys.len()
                )));
            }
            InitialData::EdgePolynomials(polys)
        }
        InitialSection::NodeSamples { per_edge } => {
            if per_edge.len() != m {
                return Err(Error::Scenario(format!(
                    "initial.per_edge: expected {m} rows, got {}",
                    per_edge.len()
                )));
            }
            let want = solver_section.nodes_per_edge + 2;
            for (j, row) in per_edge.iter().enumerate() {
                if row.len() != want {
                    return Err(Error::Scenario(format!(
                        "initial.per_edge[{j}]: expected {want} samples (N + 2), got {}",
                        row.len()
                    )));
                }
            }
            InitialData::NodeSamples(per_edge)
        }
    };

    Ok(Scenario {
        name: file.name.unwrap_or_default(),
        graph,
        coeffs,
        cert,
        initial,
        forcing,
        solver,
        nodes_per_edge: solver_section.nodes_per_edge,
        analysis: AnalysisParams {
            grid,
            eigenvalue_count,
            window,
            refinement,
            positivity_tol,
        },
    })
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl Scenario {
    pub fn build_system(&self) -> Result<AssembledSystem> {
        let mesh = Mesh::new(&self.graph, self.nodes_per_edge)?;
        AssembledSystem::new(
            mesh,
            self.coeffs.clone(),
            self.cert.clone(),
            self.solver.lumped,
        )
    }

    /// Materializes the initial DOF vector, enforcing membership in the
    /// trial space (edgewise data must agree at shared vertices).
    pub fn initial_vector(&self, system: &AssembledSystem) -> Result<DVector<f64>> {
        let mesh = system.mesh();
        let d = mesh.total_dofs();
        match &self.initial {
            InitialData::Constant(v) => Ok(DVector::from_element(d, *v)),
            InitialData::Eigenmode(k) => {
                if *k > d {
                    return Err(Error::Scenario(format!(
                        "initial.k {k} exceeds the {d} available modes"
                    )));
                }
                let stiff = system.stiffness(0.0)?;
                let dec = generalized_eigs(&stiff, system.mass(), *k)?;
                Ok(dec.eigenvectors[k - 1].clone())
            }
            InitialData::Bump {
                edge,
                center,
                width,
            } => {
                let mut u = DVector::zeros(d);
                for p in 0..=mesh.nodes_per_edge() + 1 {
                    let x = mesh.node_position(p);
                    let r = (x - center) / width;
                    if r.abs() < 1.0 {
                        let v = (std::f64::consts::FRAC_PI_2 * r).cos().powi(2);
                        u[mesh.dof(*edge, p)] = v;
                    }
                }
                Ok(u)
            }
            InitialData::EdgePolynomials(polys) => {
                let values = |j: usize, p: usize| eval_poly(&polys[j - 1], mesh.node_position(p));
                self.edgewise_vector(system, values)
            }
            InitialData::NodeSamples(rows) => {
                let values = |j: usize, p: usize| rows[j - 1][p];
                self.edgewise_vector(system, values)
            }
        }
    }

    fn edgewise_vector(
        &self,
        system: &AssembledSystem,
        values: impl Fn(usize, usize) -> f64,
    ) -> Result<DVector<f64>> {
        let mesh = system.mesh();
        let last = mesh.nodes_per_edge() + 1;
        let ends: Vec<(f64, f64)> = (1..=self.graph.edge_count())
            .map(|j| (values(j, 0), values(j, last)))
            .collect();
        let trace = self.graph.continuity_trace(&ends).ok_or_else(|| {
            Error::Scenario(
                "initial not in V: edge data disagrees at a shared vertex".into(),
            )
        })?;
        let mut u = DVector::zeros(mesh.total_dofs());
        for v in 1..=self.graph.vertex_count() {
            u[mesh.vertex_dof(v)] = trace[v - 1];
        }
        for j in 1..=self.graph.edge_count() {
            for p in 1..=mesh.nodes_per_edge() {
                u[mesh.dof(j, p)] = values(j, p);
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal_triangle() -> String {
        r#"{
            "graph": {"vertices": 3, "edges": [[1,2],[2,3],[3,1]]},
            "coefficients": {"entries": [
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}},
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}},
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}}
            ]}
        }"#
        .into()
    }

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = parse_scenario_str(&minimal_triangle()).unwrap();
        assert_eq!(s.nodes_per_edge, 31);
        assert_relative_eq!(s.solver.dt, 0.01);
        assert_relative_eq!(s.solver.theta, 1.0);
        assert!(!s.solver.lumped);
        assert_eq!(s.analysis.grid.len(), 33);
        assert!(matches!(s.initial, InitialData::Constant(v) if v == 1.0));
        use crate::integrator::Source;
        assert!(s.forcing.is_zero());
    }

    #[test]
    fn coefficient_count_mismatch_names_the_field() {
        let text = r#"{
            "graph": {"vertices": 3, "edges": [[1,2],[2,3],[3,1]]},
            "coefficients": {"entries": [
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}},
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}}
            ]}
        }"#;
        let err = parse_scenario_str(text).unwrap_err();
        assert!(err.to_string().contains("coefficients.length"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = minimal_triangle().replace("\"graph\"", "\"grap_typo\": 1, \"graph\"");
        assert!(parse_scenario_str(&text).is_err());
    }

    #[test]
    fn node_samples_must_lie_in_v() {
        let text = r#"{
            "graph": {"vertices": 2, "edges": [[1,2]]},
            "coefficients": {"entries": [
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}}
            ]},
            "solver": {"nodes_per_edge": 1},
            "initial": {"kind": "node_samples", "per_edge": [[0.0, 1.0, 0.0]]}
        }"#;
        let s = parse_scenario_str(text).unwrap();
        let sys = s.build_system().unwrap();
        let u = s.initial_vector(&sys).unwrap();
        assert_eq!(u.len(), 3);

        // two edges sharing vertex 2 with mismatched samples there
        let text = r#"{
            "graph": {"vertices": 3, "edges": [[1,2],[2,3]]},
            "coefficients": {"entries": [
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}},
                {"mu": {"kind":"constant","value":1.0}, "c": {"kind":"constant","value":1.0}}
            ]},
            "solver": {"nodes_per_edge": 1},
            "initial": {"kind": "node_samples", "per_edge": [[0.0, 0.5, 1.0], [2.0, 0.5, 0.0]]}
        }"#;
        let s = parse_scenario_str(text).unwrap();
        let sys = s.build_system().unwrap();
        let err = s.initial_vector(&sys).unwrap_err();
        assert!(err.to_string().contains("initial not in V"));
    }

    #[test]
    fn eigenmode_initial_is_built_on_the_fly() {
        let text = minimal_triangle().replace(
            "\"coefficients\"",
            "\"initial\": {\"kind\": \"eigenmode\", \"k\": 2}, \"coefficients\"",
        );
        let s = parse_scenario_str(&text).unwrap();
        let sys = s.build_system().unwrap();
        let u = s.initial_vector(&sys).unwrap();
        // M-normalized by construction
        let norm = crate::linalg::weighted_norm(sys.mass(), &u);
        assert_relative_eq!(norm, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn bump_initial_is_nonnegative_and_interior() {
        let text = minimal_triangle().replace(
            "\"coefficients\"",
            "\"initial\": {\"kind\": \"bump\", \"edge\": 1, \"center\": 0.5, \"width\": 0.3}, \"coefficients\"",
        );
        let s = parse_scenario_str(&text).unwrap();
        let sys = s.build_system().unwrap();
        let u = s.initial_vector(&sys).unwrap();
        assert!(u.iter().all(|v| *v >= 0.0));
        assert!(u.iter().any(|v| *v > 0.5));
        for v in 1..=3 {
            assert_eq!(u[sys.mesh().vertex_dof(v)], 0.0);
        }
    }

    #[test]
    fn horizon_shorter_than_run_is_rejected() {
        let text = minimal_triangle().replace(
            "\"entries\"",
            "\"horizon\": 0.5, \"entries\"",
        );
        let err = parse_scenario_str(&text).unwrap_err();
        assert!(err.to_string().contains("horizon"));
    }
}
