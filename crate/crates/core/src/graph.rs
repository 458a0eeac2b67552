//! Finite, simple, connected graphs with unit-length oriented edges.
//!
//! Vertices and edges are numbered from 1 in every public interface; edge
//! `j` runs from `tail(j)` (parameter 0) to `head(j)` (parameter 1).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// 1-based vertex index.
pub type VertexId = usize;
/// 1-based edge index.
pub type EdgeId = usize;

/// A validated metric graph.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    n: usize,
    tails: Vec<usize>, // 0-based internally
    heads: Vec<usize>,
}

/// The 0/1 head/tail incidence matrices and their difference.
#[derive(Debug, Clone)]
pub struct IncidenceMatrices {
    /// `phi_plus[(i, j)] = 1` iff vertex i+1 is the head of edge j+1.
    pub phi_plus: DMatrix<f64>,
    /// `phi_minus[(i, j)] = 1` iff vertex i+1 is the tail of edge j+1.
    pub phi_minus: DMatrix<f64>,
    /// `phi = phi_plus - phi_minus`; every column sums to zero.
    pub phi: DMatrix<f64>,
}

impl MetricGraph {
    /// Builds and validates a graph on vertices `1..=n`.
    ///
    /// In strict mode every vertex must have degree at least 2; otherwise
    /// degree-1 vertices are allowed and the vertex condition degenerates
    /// to a Neumann condition there.
    pub fn new(n: usize, edges: &[(VertexId, VertexId)], strict: bool) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Graph("edge list is empty".into()));
        }
        if n == 0 {
            return Err(Error::Graph("vertex count is zero".into()));
        }
        let mut tails = Vec::with_capacity(edges.len());
        let mut heads = Vec::with_capacity(edges.len());
        let mut seen = std::collections::BTreeSet::new();
        for (j, &(t, h)) in edges.iter().enumerate() {
            if t == 0 || h == 0 || t > n || h > n {
                return Err(Error::Graph(format!(
                    "edge {} endpoints ({t}, {h}) outside 1..={n}",
                    j + 1
                )));
            }
            if t == h {
                return Err(Error::Graph(format!("edge {} is a loop at vertex {t}", j + 1)));
            }
            let key = (t.min(h), t.max(h));
            if !seen.insert(key) {
                return Err(Error::Graph(format!(
                    "duplicate edge {} between vertices {} and {}",
                    j + 1,
                    key.0,
                    key.1
                )));
            }
            tails.push(t - 1);
            heads.push(h - 1);
        }
        let graph = MetricGraph { n, tails, heads };
        let degrees = graph.degrees();
        if let Some(i) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::Graph(format!("vertex {} has degree 0", i + 1)));
        }
        if strict {
            if let Some(i) = degrees.iter().position(|&d| d < 2) {
                return Err(Error::Graph(format!(
                    "vertex {} has degree 1 (strict mode requires degree >= 2)",
                    i + 1
                )));
            }
        }
        if !graph.is_connected() {
            return Err(Error::Graph("graph is not connected".into()));
        }
        Ok(graph)
    }

    /// Builds a graph inferring the vertex count from the largest index used.
    pub fn from_edges(edges: &[(VertexId, VertexId)], strict: bool) -> Result<Self> {
        let n = edges.iter().map(|&(t, h)| t.max(h)).max().unwrap_or(0);
        Self::new(n, edges, strict)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.tails.len()
    }

    pub fn tail(&self, j: EdgeId) -> VertexId {
        self.tails[j - 1] + 1
    }

    pub fn head(&self, j: EdgeId) -> VertexId {
        self.heads[j - 1] + 1
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for j in 0..self.edge_count() {
            d[self.tails[j]] += 1;
            d[self.heads[j]] += 1;
        }
        d
    }

    /// Edges incident to vertex `i`, ascending.
    pub fn gamma(&self, i: VertexId) -> Result<Vec<EdgeId>> {
        if i == 0 || i > self.n {
            return Err(Error::Graph(format!("vertex {i} outside 1..={}", self.n)));
        }
        Ok((1..=self.edge_count())
            .filter(|&j| self.tail(j) == i || self.head(j) == i)
            .collect())
    }

    pub fn incidence(&self) -> IncidenceMatrices {
        let (n, m) = (self.n, self.edge_count());
        let mut phi_plus = DMatrix::zeros(n, m);
        let mut phi_minus = DMatrix::zeros(n, m);
        for j in 0..m {
            phi_plus[(self.heads[j], j)] = 1.0;
            phi_minus[(self.tails[j], j)] = 1.0;
        }
        let phi = &phi_plus - &phi_minus;
        IncidenceMatrices {
            phi_plus,
            phi_minus,
            phi,
        }
    }

    /// Default matching tolerance for [`Self::continuity_trace`].
    pub fn trace_tolerance(end_values: &[(f64, f64)]) -> f64 {
        let scale = end_values
            .iter()
            .flat_map(|&(a, b)| [a.abs(), b.abs()])
            .fold(1.0_f64, f64::max);
        1e-12 * scale
    }

    /// Recovers the vertex-value vector of an edgewise function given its
    /// endpoint values `(f_j(0), f_j(1))`, or `None` when the values do not
    /// agree at some vertex (the function is not continuous on the graph).
    pub fn continuity_trace(&self, end_values: &[(f64, f64)]) -> Option<DVector<f64>> {
        self.continuity_trace_with_tol(end_values, Self::trace_tolerance(end_values))
    }

    pub fn continuity_trace_with_tol(
        &self,
        end_values: &[(f64, f64)],
        tol: f64,
    ) -> Option<DVector<f64>> {
        assert_eq!(end_values.len(), self.edge_count());
        let mut d = DVector::zeros(self.n);
        let mut assigned = vec![false; self.n];
        for (j, &(at_tail, at_head)) in end_values.iter().enumerate() {
            for (v, value) in [(self.tails[j], at_tail), (self.heads[j], at_head)] {
                if !assigned[v] {
                    d[v] = value;
                    assigned[v] = true;
                } else if (value - d[v]).abs() > tol {
                    return None;
                }
            }
        }
        Some(d)
    }

    /// Endpoint values `((Φ⁻)ᵀd, (Φ⁺)ᵀd)` of the vertex-value vector `d`.
    pub fn endpoint_values(&self, d: &DVector<f64>) -> Vec<(f64, f64)> {
        (0..self.edge_count())
            .map(|j| (d[self.tails[j]], d[self.heads[j]]))
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for j in 0..self.edge_count() {
                let (a, b) = (self.tails[j], self.heads[j]);
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Convenience constructor matching the scenario-file edge-list form.
pub fn build_graph(edges: &[(VertexId, VertexId)], strict: bool) -> Result<MetricGraph> {
    MetricGraph::from_edges(edges, strict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn triangle() -> MetricGraph {
        MetricGraph::from_edges(&[(1, 2), (2, 3), (3, 1)], false).unwrap()
    }

    #[test]
    fn triangle_is_valid() {
        let g = triangle();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn single_edge_default_and_strict() {
        assert!(MetricGraph::from_edges(&[(1, 2)], false).is_ok());
        let err = MetricGraph::from_edges(&[(1, 2)], true).unwrap_err();
        assert!(err.to_string().contains("degree 1"));
    }

    #[test]
    fn rejects_loops_duplicates_and_disconnection() {
        assert!(MetricGraph::from_edges(&[(1, 1)], false).is_err());
        assert!(MetricGraph::from_edges(&[(1, 2), (2, 1)], false).is_err());
        // 1-2 and 3-4 are disjoint
        assert!(MetricGraph::from_edges(&[(1, 2), (3, 4)], false).is_err());
        // vertex 2 untouched
        assert!(MetricGraph::new(3, &[(1, 3)], false).is_err());
    }

    #[test]
    fn incidence_of_triangle() {
        let inc = triangle().incidence();
        for (i, j) in [(0, 0), (1, 1), (2, 2)] {
            assert_eq!(inc.phi_minus[(i, j)], 1.0);
        }
        for (i, j) in [(1, 0), (2, 1), (0, 2)] {
            assert_eq!(inc.phi_plus[(i, j)], 1.0);
        }
        for j in 0..3 {
            assert_eq!(inc.phi.column(j).sum(), 0.0);
        }
    }

    #[test]
    fn incidence_of_single_edge() {
        let g = MetricGraph::from_edges(&[(1, 2)], false).unwrap();
        let inc = g.incidence();
        assert_eq!(inc.phi.column(0).as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(triangle().gamma(1).unwrap(), vec![1, 3]);
        let single = MetricGraph::from_edges(&[(1, 2)], false).unwrap();
        assert_eq!(single.gamma(2).unwrap(), vec![1]);
        let star = MetricGraph::from_edges(&[(1, 2), (1, 3), (1, 4)], false).unwrap();
        assert_eq!(star.gamma(1).unwrap(), vec![1, 2, 3]);
        assert!(star.gamma(9).is_err());
    }

    #[test]
    fn continuity_trace_examples() {
        let g = triangle();
        let d = g
            .continuity_trace(&[(5.0, 5.0), (5.0, 5.0), (5.0, 5.0)])
            .unwrap();
        assert_relative_eq!(d, DVector::from_element(3, 5.0));

        // edge 1 ends at v2 with value 2, edge 2 starts at v2 with value 3
        assert!(g
            .continuity_trace(&[(5.0, 2.0), (3.0, 5.0), (5.0, 5.0)])
            .is_none());

        let path = MetricGraph::from_edges(&[(1, 2), (2, 3)], false).unwrap();
        let d = path.continuity_trace(&[(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_relative_eq!(d, DVector::from_vec(vec![0.0, 1.0, 0.0]));
    }

    #[test]
    fn constants_are_continuous() {
        for g in [
            triangle(),
            MetricGraph::from_edges(&[(1, 2), (2, 3), (3, 4), (4, 2)], false).unwrap(),
        ] {
            let inc = g.incidence();
            let ones_n = DVector::from_element(g.vertex_count(), 1.0);
            let ones_m = DVector::from_element(g.edge_count(), 1.0);
            assert_relative_eq!(inc.phi_minus.transpose() * &ones_n, ones_m);
            assert_relative_eq!(inc.phi_plus.transpose() * &ones_n, ones_m);
        }
    }
}
