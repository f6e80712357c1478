//! Undirected static networks and their r-stage neighbourhood structure.
//!
//! Node indices are 0-based in the API and 1-based in edge-list files.
//! Binary matrices (stage adjacencies, masks) are stored as `DMatrix<f64>`
//! holding 0.0/1.0 so they compose directly with Hadamard products.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected graph without self-loops, optionally carrying edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
}

impl Network {
    /// Builds an unweighted network. Edges are normalised to `(min, max)`
    /// and deduplicated.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::build(node_count, edges, None)
    }

    /// Builds a network with one nonnegative weight per edge.
    pub fn with_weights(node_count: usize, edges: &[(usize, usize)], weights: &[f64]) -> Result<Self> {
        if weights.len() != edges.len() {
            return Err(Error::Dimension(format!(
                "{} edges but {} weights",
                edges.len(),
                weights.len()
            )));
        }
        Self::build(node_count, edges, Some(weights))
    }

    fn build(node_count: usize, edges: &[(usize, usize)], weights: Option<&[f64]>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidInput("network needs at least one node".into()));
        }
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (k, &(i, j)) in edges.iter().enumerate() {
            if i >= node_count || j >= node_count {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) references a node outside 1..={node_count}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at node {}", i + 1)));
            }
            let w = weights.map_or(1.0, |w| w[k]);
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) has invalid weight {w}",
                    i + 1,
                    j + 1
                )));
            }
            unique.insert((i.min(j), i.max(j)), w);
        }
        let (edges, w): (Vec<_>, Vec<_>) = unique.into_iter().unzip();
        Ok(Self {
            node_count,
            edges,
            weights: weights.map(|_| w),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Symmetric 0/1 adjacency matrix.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let d = self.node_count;
        let mut a = DMatrix::zeros(d, d);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    fn neighbour_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let stages = compute_stages(self);
        (0..self.node_count).all(|j| stages.distance(0, j).is_some())
    }

    /// Parses the whitespace-separated edge-list format: one `i j [weight]`
    /// line per edge (1-based), `#` comments, optional `d=<n>` header.
    /// Without a header the node count is the largest index seen.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        let mut weighted = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("d=") {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: bad node count: {e}", lineno + 1)))?;
                declared = Some(n);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::Parse(format!(
                    "line {}: expected `i j [weight]`, got `{line}`",
                    lineno + 1
                )));
            }
            let parse_node = |s: &str| -> Result<usize> {
                let v = s
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: bad node index `{s}`: {e}", lineno + 1)))?;
                if v == 0 {
                    return Err(Error::Parse(format!("line {}: node indices are 1-based", lineno + 1)));
                }
                Ok(v - 1)
            };
            let i = parse_node(fields[0])?;
            let j = parse_node(fields[1])?;
            let has_weight = fields.len() == 3;
            match weighted {
                None => weighted = Some(has_weight),
                Some(w) if w != has_weight => {
                    return Err(Error::Parse(format!(
                        "line {}: either every edge carries a weight or none does",
                        lineno + 1
                    )))
                }
                _ => {}
            }
            if has_weight {
                let w = fields[2]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: bad weight: {e}", lineno + 1)))?;
                weights.push(w);
            }
            edges.push((i, j));
        }
        let inferred = edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        let d = match declared {
            Some(d) if d < inferred => {
                return Err(Error::Parse(format!(
                    "header declares d={d} but an edge references node {inferred}"
                )))
            }
            Some(d) => d,
            None => inferred,
        };
        if weighted == Some(true) {
            Self::with_weights(d, &edges, &weights)
        } else {
            Self::new(d, &edges)
        }
    }

    /// Writes the network in the edge-list format accepted by
    /// [`Network::parse_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("d={}\n", self.node_count);
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            match &self.weights {
                Some(w) => writeln!(out, "{} {} {}", i + 1, j + 1, w[k]),
                None => writeln!(out, "{} {}", i + 1, j + 1),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Shortest-path distances and the derived r-stage adjacency matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StageStructure {
    node_count: usize,
    distances: Vec<Option<usize>>,
    stage_adjacency: Vec<DMatrix<f64>>,
    r_max: usize,
}

impl StageStructure {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// δ(i, j), or `None` when the nodes are disconnected.
    pub fn distance(&self, i: usize, j: usize) -> Option<usize> {
        self.distances[i * self.node_count + j]
    }

    /// Network diameter over connected pairs.
    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// A_r for `1 <= r <= r_max`.
    pub fn stage(&self, r: usize) -> &DMatrix<f64> {
        assert!(r >= 1 && r <= self.r_max, "stage {r} outside 1..={}", self.r_max);
        &self.stage_adjacency[r - 1]
    }

    pub fn stages(&self) -> &[DMatrix<f64>] {
        &self.stage_adjacency
    }

    /// |N_r(i)|.
    pub fn stage_size(&self, i: usize, r: usize) -> usize {
        (0..self.node_count).filter(|&j| self.distance(i, j) == Some(r)).count()
    }

    /// Pairs `(i, j)`, `i < j`, with δ(i, j) in `lo..=hi`.
    pub fn pairs_within(&self, lo: usize, hi: usize) -> Vec<(usize, usize)> {
        let d = self.node_count;
        let mut out = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                if let Some(dist) = self.distance(i, j) {
                    if dist >= lo && dist <= hi {
                        out.push((i, j));
                    }
                }
            }
        }
        out
    }
}

/// Breadth-first distances from every node with unit edge lengths.
pub fn compute_stages(net: &Network) -> StageStructure {
    let d = net.node_count();
    let adj = net.neighbour_lists();
    let mut distances = vec![None; d * d];
    let mut queue = VecDeque::new();
    for src in 0..d {
        distances[src * d + src] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = distances[src * d + u].expect("queued nodes are labelled");
            for &v in &adj[u] {
                if distances[src * d + v].is_none() {
                    distances[src * d + v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    let r_max = distances.iter().flatten().copied().max().unwrap_or(0);
    let mut stage_adjacency = vec![DMatrix::zeros(d, d); r_max];
    for i in 0..d {
        for j in 0..d {
            if let Some(r) = distances[i * d + j] {
                if r >= 1 {
                    stage_adjacency[r - 1][(i, j)] = 1.0;
                }
            }
        }
    }
    StageStructure {
        node_count: d,
        distances,
        stage_adjacency,
        r_max,
    }
}

/// Nonnegative weights W normalised so that every nonempty stage
/// neighbourhood of every node sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// W ∘ A_r.
    pub fn stage_operator(&self, stages: &StageStructure, r: usize) -> DMatrix<f64> {
        self.0.component_mul(stages.stage(r))
    }
}

/// `W_ij = 1 / |N_r(i)|` with r = δ(i, j).
pub fn equal_stage_weights(stages: &StageStructure) -> WeightMatrix {
    let d = stages.node_count();
    let mut w = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut counts = vec![0usize; stages.r_max() + 1];
        for j in 0..d {
            if let Some(r) = stages.distance(i, j) {
                counts[r] += 1;
            }
        }
        for j in 0..d {
            if let Some(r) = stages.distance(i, j) {
                if r >= 1 {
                    w[(i, j)] = 1.0 / counts[r] as f64;
                }
            }
        }
    }
    WeightMatrix(w)
}

/// Uses the network's own edge weights on stage 1 (row-normalised per
/// node) and equal splits on higher stages. Falls back to equal weights on
/// stage 1 for a node whose incident edge weights are all zero.
pub fn edge_stage_weights(net: &Network, stages: &StageStructure) -> WeightMatrix {
    let mut w = equal_stage_weights(stages).0;
    let Some(weights) = net.weights() else {
        return WeightMatrix(w);
    };
    let d = net.node_count();
    let mut raw = DMatrix::zeros(d, d);
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        raw[(i, j)] = weights[k];
        raw[(j, i)] = weights[k];
    }
    for i in 0..d {
        let total: f64 = raw.row(i).sum();
        if total > 0.0 {
            for j in 0..d {
                if stages.distance(i, j) == Some(1) {
                    w[(i, j)] = raw[(i, j)] / total;
                }
            }
        }
    }
    WeightMatrix(w)
}

/// GNAR-induced adjacency `Σ_{r=1}^{min(2r*, r_max)} A_r`.
pub fn induced_adjacency(stages: &StageStructure, r_star: usize) -> DMatrix<f64> {
    assert!(r_star >= 1, "r_star must be positive");
    let d = stages.node_count();
    let upper = (2 * r_star).min(stages.r_max());
    (1..=upper).fold(DMatrix::zeros(d, d), |acc, r| acc + stages.stage(r))
}

/// 2×2 block tiling `[[A, A], [A, A]]`.
pub fn augment_mask(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for bi in 0..2 {
        for bj in 0..2 {
            out.view_mut((bi * d, bj * d), (d, d)).copy_from(a);
        }
    }
    out
}

/// A network together with its stage structure, weights, and the
/// precomputed stage operators `W ∘ A_r`.
#[derive(Debug, Clone)]
pub struct NetworkContext {
    network: Network,
    stages: StageStructure,
    weights: WeightMatrix,
    operators: Vec<DMatrix<f64>>,
}

impl NetworkContext {
    /// Context with equal stage weights.
    pub fn new(network: Network) -> Self {
        let stages = compute_stages(&network);
        let weights = equal_stage_weights(&stages);
        Self::assemble(network, stages, weights)
    }

    /// Context using the network's edge weights on stage 1.
    pub fn with_edge_weights(network: Network) -> Self {
        let stages = compute_stages(&network);
        let weights = edge_stage_weights(&network, &stages);
        Self::assemble(network, stages, weights)
    }

    fn assemble(network: Network, stages: StageStructure, weights: WeightMatrix) -> Self {
        let operators = (1..=stages.r_max())
            .map(|r| weights.stage_operator(&stages, r))
            .collect();
        Self {
            network,
            stages,
            weights,
            operators,
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn stages(&self) -> &StageStructure {
        &self.stages
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.network.node_count()
    }

    pub fn r_max(&self) -> usize {
        self.stages.r_max()
    }

    /// W ∘ A_r, `1 <= r <= r_max`.
    pub fn operator(&self, r: usize) -> &DMatrix<f64> {
        &self.operators[r - 1]
    }
}
