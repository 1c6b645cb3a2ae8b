//! Tensor-network structures as labeled hypergraphs.
//!
//! A [`TensorNetworkStructure`] is a list of vertices and a list of edges,
//! each edge carrying a dimension. An edge with one endpoint is a dangling
//! leg and contributes an output mode; an edge with two endpoints is an
//! ordinary bond; an edge with three or more endpoints is a hyperedge whose
//! single summation index is shared by every incident core (this is how the
//! CP format is drawn as one structure).
//!
//! Edge order is significant: the singleton edges, in declaration order,
//! define the output shape, and each vertex's core tensor has one axis per
//! incident edge, also in declaration order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("edge {edge} references undeclared vertex {vertex:?}")]
    DanglingReference { edge: usize, vertex: String },
    #[error("vertex {0:?} has no incident edge")]
    IsolatedVertex(String),
    #[error("edge {edge} has non-positive dimension {dim}")]
    NonPositiveDim { edge: usize, dim: usize },
    #[error("edge {0} has no endpoints")]
    EmptyEdge(usize),
    #[error("vertex {0:?} is declared more than once")]
    DuplicateVertex(String),
    #[error("edge {edge} lists vertex {vertex:?} more than once")]
    RepeatedEndpoint { edge: usize, vertex: String },
    #[error("rank descriptor does not fit family {family}: {reason}")]
    UnsupportedRankShape { family: Family, reason: String },
}

/// One (hyper)edge of a structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub endpoints: Vec<String>,
    pub dim: usize,
}

impl Edge {
    pub fn new<S: Into<String>>(endpoints: impl IntoIterator<Item = S>, dim: usize) -> Self {
        Self {
            endpoints: endpoints.into_iter().map(Into::into).collect(),
            dim,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.endpoints.len() == 1
    }

    pub fn is_hyperedge(&self) -> bool {
        self.endpoints.len() >= 3
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawStructure {
    vertices: Vec<String>,
    edges: Vec<Edge>,
}

/// A validated tensor-network structure `G = (V, E, dim)`.
///
/// Instances are immutable once built; every constructor runs [`validate`].
///
/// [`validate`]: TensorNetworkStructure::validate
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawStructure")]
pub struct TensorNetworkStructure {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    #[serde(skip)]
    incidence: Vec<Vec<usize>>,
}

impl TryFrom<RawStructure> for TensorNetworkStructure {
    type Error = StructureError;

    fn try_from(raw: RawStructure) -> Result<Self, Self::Error> {
        Self::new(raw.vertices, raw.edges)
    }
}

impl TensorNetworkStructure {
    pub fn new<S: Into<String>>(
        vertices: impl IntoIterator<Item = S>,
        edges: Vec<Edge>,
    ) -> Result<Self, StructureError> {
        let vertices: Vec<String> = vertices.into_iter().map(Into::into).collect();
        Self::validate_parts(&vertices, &edges)?;
        let position: HashMap<&str, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            for v in &edge.endpoints {
                incidence[position[v.as_str()]].push(e);
            }
        }
        Ok(Self {
            vertices,
            edges,
            incidence,
        })
    }

    /// Re-checks every structural invariant.
    pub fn validate(&self) -> Result<(), StructureError> {
        Self::validate_parts(&self.vertices, &self.edges)
    }

    fn validate_parts(vertices: &[String], edges: &[Edge]) -> Result<(), StructureError> {
        let mut declared = HashSet::new();
        for v in vertices {
            if !declared.insert(v.as_str()) {
                return Err(StructureError::DuplicateVertex(v.clone()));
            }
        }
        let mut touched = HashSet::new();
        for (i, edge) in edges.iter().enumerate() {
            if edge.endpoints.is_empty() {
                return Err(StructureError::EmptyEdge(i));
            }
            let mut seen = HashSet::new();
            for v in &edge.endpoints {
                if !declared.contains(v.as_str()) {
                    return Err(StructureError::DanglingReference {
                        edge: i,
                        vertex: v.clone(),
                    });
                }
                if !seen.insert(v.as_str()) {
                    return Err(StructureError::RepeatedEndpoint {
                        edge: i,
                        vertex: v.clone(),
                    });
                }
                touched.insert(v.as_str());
            }
            if edge.dim == 0 {
                return Err(StructureError::NonPositiveDim { edge: i, dim: 0 });
            }
        }
        if let Some(v) = vertices.iter().find(|v| !touched.contains(v.as_str())) {
            return Err(StructureError::IsolatedVertex(v.clone()));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, vertex: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == vertex)
    }

    /// Indices of the edges incident to vertex `v` (by position), in
    /// declaration order. This is the axis order of the vertex's core.
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    /// Shape of the core tensor carried by vertex `v`.
    pub fn core_shape(&self, v: usize) -> Vec<usize> {
        self.incidence[v].iter().map(|&e| self.edges[e].dim).collect()
    }

    /// Indices of the singleton edges (the dangling legs), in declaration order.
    pub fn singleton_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].is_singleton())
            .collect()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.singleton_edges()
            .into_iter()
            .map(|e| self.edges[e].dim)
            .collect()
    }

    /// The singleton edge attached to `vertex`, if any (the first one when
    /// several are declared).
    pub fn singleton_of(&self, vertex: &str) -> Option<usize> {
        self.edges
            .iter()
            .position(|e| e.is_singleton() && e.endpoints[0] == vertex)
    }

    /// The first edge whose endpoint set is exactly `{a, b}`.
    pub fn edge_between(&self, a: &str, b: &str) -> Option<usize> {
        self.edges.iter().position(|e| {
            e.endpoints.len() == 2
                && ((e.endpoints[0] == a && e.endpoints[1] == b)
                    || (e.endpoints[0] == b && e.endpoints[1] == a))
        })
    }

    /// Number of parameters: the sum over vertices of the product of the
    /// incident edge dimensions. Hyperedges contribute to every incident core.
    pub fn param_count(&self) -> usize {
        (0..self.vertices.len())
            .map(|v| self.core_shape(v).iter().product::<usize>())
            .sum()
    }

    pub fn summary(&self) -> StructureSummary {
        let output_shape = self.output_shape();
        StructureSummary {
            vertex_count: self.vertices.len(),
            param_count: self.param_count(),
            dangling_count: output_shape.len(),
            output_shape,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("structure serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureSummary {
    pub vertex_count: usize,
    pub param_count: usize,
    pub output_shape: Vec<usize>,
    pub dangling_count: usize,
}

/// The standard structure families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Matrix,
    RankOne,
    Cp,
    Tucker,
    Tt,
    Tr,
    HierarchicalTucker,
    PepsGrid,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Matrix,
        Family::RankOne,
        Family::Cp,
        Family::Tucker,
        Family::Tt,
        Family::Tr,
        Family::HierarchicalTucker,
        Family::PepsGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Matrix => "matrix",
            Family::RankOne => "rank_one",
            Family::Cp => "cp",
            Family::Tucker => "tucker",
            Family::Tt => "tt",
            Family::Tr => "tr",
            Family::HierarchicalTucker => "hierarchical_tucker",
            Family::PepsGrid => "peps_grid",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family {s:?}"))
    }
}

/// How bond dimensions are given to a family builder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSpec {
    /// Same dimension on every internal edge.
    Uniform(usize),
    /// One dimension per internal edge, in the family's edge order
    /// (TT: `p - 1` bonds; TR: `p` bonds, the closing bond last; Tucker: one
    /// per mode).
    PerEdge(Vec<usize>),
    /// PEPS grid with `height` rows and uniform `bond`; the width is
    /// `dims.len() / height`.
    Grid { height: usize, bond: usize },
}

fn vertex_name(i: usize) -> String {
    format!("v{}", i + 1)
}

fn uniform_or_list(
    family: Family,
    rank: &RankSpec,
    count: usize,
) -> Result<Vec<usize>, StructureError> {
    match rank {
        RankSpec::Uniform(r) => Ok(vec![*r; count]),
        RankSpec::PerEdge(rs) if rs.len() == count => Ok(rs.clone()),
        RankSpec::PerEdge(rs) => Err(StructureError::UnsupportedRankShape {
            family,
            reason: format!("expected {count} ranks, got {}", rs.len()),
        }),
        RankSpec::Grid { .. } => Err(StructureError::UnsupportedRankShape {
            family,
            reason: "grid ranks only apply to peps_grid".into(),
        }),
    }
}

/// Builds one of the standard structures.
///
/// `dims` are the output mode dimensions in mode order. Every builder
/// declares the singleton edges in that order, so the output shape equals
/// `dims`.
pub fn build_family(
    family: Family,
    dims: &[usize],
    rank: &RankSpec,
) -> Result<TensorNetworkStructure, StructureError> {
    if dims.is_empty() {
        return Err(StructureError::UnsupportedRankShape {
            family,
            reason: "no mode dimensions given".into(),
        });
    }
    let p = dims.len();
    match family {
        Family::Matrix => {
            if p != 2 {
                return Err(StructureError::UnsupportedRankShape {
                    family,
                    reason: format!("a matrix has 2 modes, got {p}"),
                });
            }
            let r = uniform_or_list(family, rank, 1)?[0];
            build_matrix(dims[0], dims[1], r)
        }
        Family::RankOne => match rank {
            RankSpec::Uniform(_) => build_rank_one(dims),
            RankSpec::PerEdge(rs) if rs.is_empty() => build_rank_one(dims),
            _ => Err(StructureError::UnsupportedRankShape {
                family,
                reason: "rank_one has no internal edges".into(),
            }),
        },
        Family::Cp => {
            let r = uniform_or_list(family, rank, 1)?[0];
            build_cp(dims, r)
        }
        Family::Tucker => build_tucker(dims, &uniform_or_list(family, rank, p)?),
        Family::Tt => build_tt(dims, &uniform_or_list(family, rank, p.saturating_sub(1))?),
        Family::Tr => build_tr(dims, &uniform_or_list(family, rank, p)?),
        Family::HierarchicalTucker => {
            let r = uniform_or_list(family, rank, 1)?[0];
            build_hierarchical_tucker(dims, r)
        }
        Family::PepsGrid => match rank {
            RankSpec::Grid { height, bond } if *height > 0 && p.is_multiple_of(*height) => {
                build_peps_grid(*height, p / height, dims, *bond)
            }
            RankSpec::Grid { height, .. } => Err(StructureError::UnsupportedRankShape {
                family,
                reason: format!("{p} modes do not fill a grid with {height} rows"),
            }),
            _ => Err(StructureError::UnsupportedRankShape {
                family,
                reason: "peps_grid needs a grid rank descriptor".into(),
            }),
        },
    }
}

/// Two vertices joined by a bond of dimension `r`: the rank-`r` matrices.
/// Cores are `d1 x r` and `r x d2`.
pub fn build_matrix(
    d1: usize,
    d2: usize,
    r: usize,
) -> Result<TensorNetworkStructure, StructureError> {
    TensorNetworkStructure::new(
        ["a", "b"],
        vec![
            Edge::new(["a"], d1),
            Edge::new(["a", "b"], r),
            Edge::new(["b"], d2),
        ],
    )
}

pub fn build_rank_one(dims: &[usize]) -> Result<TensorNetworkStructure, StructureError> {
    let names: Vec<String> = (0..dims.len()).map(vertex_name).collect();
    let edges = names
        .iter()
        .zip(dims)
        .map(|(v, &d)| Edge::new([v.clone()], d))
        .collect();
    TensorNetworkStructure::new(names, edges)
}

/// CP: `p` vertices sharing one hyperedge of dimension `r`. Each core is `d_k x r`.
pub fn build_cp(dims: &[usize], r: usize) -> Result<TensorNetworkStructure, StructureError> {
    let names: Vec<String> = (0..dims.len()).map(vertex_name).collect();
    let mut edges: Vec<Edge> = names
        .iter()
        .zip(dims)
        .map(|(v, &d)| Edge::new([v.clone()], d))
        .collect();
    edges.push(Edge::new(names.clone(), r));
    TensorNetworkStructure::new(names, edges)
}

/// Tucker: factor vertices `v1..vp` (each `d_k x r_k`) around a core vertex
/// `g` of shape `r_1 x ... x r_p`.
pub fn build_tucker(
    dims: &[usize],
    ranks: &[usize],
) -> Result<TensorNetworkStructure, StructureError> {
    let mut names: Vec<String> = (0..dims.len()).map(vertex_name).collect();
    let mut edges: Vec<Edge> = names
        .iter()
        .zip(dims)
        .map(|(v, &d)| Edge::new([v.clone()], d))
        .collect();
    for (v, &r) in names.iter().zip(ranks) {
        edges.push(Edge::new([v.clone(), "g".to_string()], r));
    }
    names.push("g".into());
    TensorNetworkStructure::new(names, edges)
}

/// Tensor train with bond dimensions `ranks` (length `p - 1`). Edges are
/// declared as `s1, b12, s2, b23, ..., sp`, so the cores are `d1 x r1`,
/// `r_{k-1} x d_k x r_k`, and `r_{p-1} x d_p`.
pub fn build_tt(dims: &[usize], ranks: &[usize]) -> Result<TensorNetworkStructure, StructureError> {
    let p = dims.len();
    if ranks.len() + 1 != p {
        return Err(StructureError::UnsupportedRankShape {
            family: Family::Tt,
            reason: format!("expected {} ranks, got {}", p.saturating_sub(1), ranks.len()),
        });
    }
    let names: Vec<String> = (0..p).map(vertex_name).collect();
    let mut edges = Vec::with_capacity(2 * p);
    for k in 0..p {
        edges.push(Edge::new([names[k].clone()], dims[k]));
        if k + 1 < p {
            edges.push(Edge::new([names[k].clone(), names[k + 1].clone()], ranks[k]));
        }
    }
    TensorNetworkStructure::new(names, edges)
}

/// Tensor ring: the train closed by a bond between the last and first
/// vertex. `ranks[k]` joins `v{k+1}` and `v{k+2}` and `ranks[p-1]` closes the
/// ring; the closing bond is declared last, so the first core is
/// `d1 x r1 x r_p` and the others are `r_{k-1} x d_k x r_k`.
pub fn build_tr(dims: &[usize], ranks: &[usize]) -> Result<TensorNetworkStructure, StructureError> {
    let p = dims.len();
    if p < 2 || ranks.len() != p {
        return Err(StructureError::UnsupportedRankShape {
            family: Family::Tr,
            reason: format!("a ring over {p} modes needs p >= 2 and {p} ranks"),
        });
    }
    let names: Vec<String> = (0..p).map(vertex_name).collect();
    let mut edges = Vec::with_capacity(2 * p);
    for k in 0..p {
        edges.push(Edge::new([names[k].clone()], dims[k]));
        if k + 1 < p {
            edges.push(Edge::new([names[k].clone(), names[k + 1].clone()], ranks[k]));
        }
    }
    edges.push(Edge::new([names[p - 1].clone(), names[0].clone()], ranks[p - 1]));
    TensorNetworkStructure::new(names, edges)
}

/// Balanced binary hierarchical Tucker tree over the modes. Leaves are
/// `v1..vp`; internal nodes are named `h{lo}_{hi}` after the 1-based mode
/// range they cover. Every tree edge has dimension `r`.
pub fn build_hierarchical_tucker(
    dims: &[usize],
    r: usize,
) -> Result<TensorNetworkStructure, StructureError> {
    let p = dims.len();
    if p < 2 {
        return Err(StructureError::UnsupportedRankShape {
            family: Family::HierarchicalTucker,
            reason: "hierarchical Tucker needs at least 2 modes".into(),
        });
    }
    let mut names: Vec<String> = (0..p).map(vertex_name).collect();
    let mut edges: Vec<Edge> = names
        .iter()
        .zip(dims)
        .map(|(v, &d)| Edge::new([v.clone()], d))
        .collect();

    fn node(lo: usize, hi: usize, names: &mut Vec<String>, edges: &mut Vec<Edge>, r: usize) -> String {
        if hi - lo == 1 {
            return vertex_name(lo);
        }
        let mid = lo + (hi - lo).div_ceil(2);
        let left = node(lo, mid, names, edges, r);
        let right = node(mid, hi, names, edges, r);
        let me = format!("h{}_{}", lo + 1, hi);
        edges.push(Edge::new([me.clone(), left], r));
        edges.push(Edge::new([me.clone(), right], r));
        names.push(me.clone());
        me
    }
    node(0, p, &mut names, &mut edges, r);
    TensorNetworkStructure::new(names, edges)
}

/// PEPS on a `height x width` grid; vertex `v{i}_{j}` (1-based) carries mode
/// `i * width + j` in row-major order. Horizontal bonds are declared before
/// vertical ones.
pub fn build_peps_grid(
    height: usize,
    width: usize,
    dims: &[usize],
    bond: usize,
) -> Result<TensorNetworkStructure, StructureError> {
    if height * width != dims.len() || height == 0 || width == 0 {
        return Err(StructureError::UnsupportedRankShape {
            family: Family::PepsGrid,
            reason: format!("{} modes do not fill a {height}x{width} grid", dims.len()),
        });
    }
    let name = |i: usize, j: usize| format!("v{}_{}", i + 1, j + 1);
    let mut names = Vec::with_capacity(dims.len());
    let mut edges = Vec::new();
    for i in 0..height {
        for j in 0..width {
            names.push(name(i, j));
            edges.push(Edge::new([name(i, j)], dims[i * width + j]));
        }
    }
    for i in 0..height {
        for j in 0..width.saturating_sub(1) {
            edges.push(Edge::new([name(i, j), name(i, j + 1)], bond));
        }
    }
    for i in 0..height.saturating_sub(1) {
        for j in 0..width {
            edges.push(Edge::new([name(i, j), name(i + 1, j)], bond));
        }
    }
    TensorNetworkStructure::new(names, edges)
}

/// Uniform TT over `p` modes of size `d` with bond `r`.
pub fn tt_uniform(p: usize, d: usize, r: usize) -> Result<TensorNetworkStructure, StructureError> {
    build_tt(&vec![d; p], &vec![r; p.saturating_sub(1)])
}

/// Uniform TR over `p` modes of size `d` with bond `r`.
pub fn tr_uniform(p: usize, d: usize, r: usize) -> Result<TensorNetworkStructure, StructureError> {
    build_tr(&vec![d; p], &vec![r; p])
}
