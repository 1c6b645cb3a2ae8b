//! Evaluation of a tensor network: core assignments and contraction.
//!
//! Every edge of the structure is a summation label. Cores are merged
//! pairwise; a label is summed away as soon as no other remaining operand
//! carries it, so hyperedges stay live (as a shared diagonal index) until
//! their last two incident operands meet. Singleton labels are never summed
//! and end up as the output axes, in singleton declaration order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structure::TensorNetworkStructure;
use crate::tensor::{next_index, DenseTensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("no core assigned to vertex {0:?}")]
    MissingCore(String),
    #[error("core assigned to undeclared vertex {0:?}")]
    UnknownVertex(String),
    #[error("core of vertex {vertex:?} mode {mode}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        vertex: String,
        mode: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("input shape {found:?} does not match output shape {expected:?}")]
    InputShape {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("structure is not a tensor train: {0}")]
    NotATrain(String),
}

/// One core tensor per vertex.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoreAssignment(BTreeMap<String, DenseTensor>);

impl CoreAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, vertex: impl Into<String>, core: DenseTensor) -> Option<DenseTensor> {
        self.0.insert(vertex.into(), core)
    }

    pub fn get(&self, vertex: &str) -> Option<&DenseTensor> {
        self.0.get(vertex)
    }

    pub fn get_mut(&mut self, vertex: &str) -> Option<&mut DenseTensor> {
        self.0.get_mut(vertex)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &DenseTensor)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Builds an assignment by calling `f(vertex_index, core_shape)` for
    /// every vertex of `structure`.
    pub fn from_fn(
        structure: &TensorNetworkStructure,
        mut f: impl FnMut(usize, &[usize]) -> DenseTensor,
    ) -> Self {
        let mut cores = Self::new();
        for (v, name) in structure.vertices().iter().enumerate() {
            cores.insert(name.clone(), f(v, &structure.core_shape(v)));
        }
        cores
    }

    /// Checks that the keys are exactly the vertex set and every core has
    /// the shape its incident edges prescribe.
    pub fn check_against(&self, structure: &TensorNetworkStructure) -> Result<(), ContractError> {
        for name in self.0.keys() {
            if structure.vertex_index(name).is_none() {
                return Err(ContractError::UnknownVertex(name.clone()));
            }
        }
        for (v, name) in structure.vertices().iter().enumerate() {
            let core = self
                .0
                .get(name)
                .ok_or_else(|| ContractError::MissingCore(name.clone()))?;
            let expected = structure.core_shape(v);
            let found = core.shape();
            if expected.as_slice() != found {
                let mode = expected
                    .iter()
                    .zip(found)
                    .position(|(a, b)| a != b)
                    .unwrap_or(expected.len().min(found.len()));
                return Err(ContractError::ShapeMismatch {
                    vertex: name.clone(),
                    mode,
                    expected,
                    found: found.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Cores in the structure's vertex order.
    pub fn ordered<'a>(&'a self, structure: &TensorNetworkStructure) -> Vec<&'a DenseTensor> {
        structure
            .vertices()
            .iter()
            .map(|v| &self.0[v.as_str()])
            .collect()
    }
}

/// How the pairwise elimination order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContractionOrder {
    /// Repeatedly merge the pair of operands whose result is smallest.
    #[default]
    Greedy,
    /// Fold the cores in vertex declaration order.
    Sequential,
}

#[derive(Debug, Clone)]
struct Step {
    lhs: usize,
    rhs: usize,
    out_shape: Vec<usize>,
    // Loop space: kept labels first, then summed labels.
    dims: Vec<usize>,
    lhs_strides: Vec<usize>,
    rhs_strides: Vec<usize>,
    out_strides: Vec<usize>,
}

impl Step {
    fn run(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let out_len: usize = self.out_shape.iter().product();
        let mut out = vec![0.0; out_len];
        let n = self.dims.len();
        if n == 0 {
            out[0] = a[0] * b[0];
            return out;
        }
        let mut index = vec![0usize; n];
        let (mut ia, mut ib, mut io) = (0usize, 0usize, 0usize);
        'outer: loop {
            out[io] += a[ia] * b[ib];
            let mut k = n;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                index[k] += 1;
                ia += self.lhs_strides[k];
                ib += self.rhs_strides[k];
                io += self.out_strides[k];
                if index[k] < self.dims[k] {
                    break;
                }
                let back = self.dims[k];
                ia -= back * self.lhs_strides[k];
                ib -= back * self.rhs_strides[k];
                io -= back * self.out_strides[k];
                index[k] = 0;
            }
        }
        out
    }
}

/// A precomputed pairwise elimination schedule. The schedule depends only on
/// the structure, so one plan can evaluate many core assignments.
#[derive(Debug, Clone)]
pub struct ContractionPlan {
    steps: Vec<Step>,
    leaf_count: usize,
    final_slot: usize,
    // Axis permutation applied to the last operand to reach output order.
    final_perm: Vec<usize>,
    output_shape: Vec<usize>,
    core_shapes: Vec<Vec<usize>>,
}

fn strides_for(labels: &[usize], dims_of: &[usize], space: &[usize]) -> Vec<usize> {
    let mut own = vec![0; labels.len()];
    let mut acc = 1;
    for k in (0..labels.len()).rev() {
        own[k] = acc;
        acc *= dims_of[labels[k]];
    }
    space
        .iter()
        .map(|l| labels.iter().position(|x| x == l).map_or(0, |k| own[k]))
        .collect()
}

impl ContractionPlan {
    pub fn new(structure: &TensorNetworkStructure, order: ContractionOrder) -> Self {
        let edge_dims: Vec<usize> = structure.edges().iter().map(|e| e.dim).collect();
        let is_output: Vec<bool> = structure.edges().iter().map(|e| e.is_singleton()).collect();
        let n = structure.vertex_count();
        let mut slots: Vec<Option<Vec<usize>>> = (0..n)
            .map(|v| Some(structure.incident_edges(v).to_vec()))
            .collect();
        let core_shapes = (0..n).map(|v| structure.core_shape(v)).collect();
        let mut steps = Vec::new();

        let live = |slots: &Vec<Option<Vec<usize>>>| -> Vec<usize> {
            (0..slots.len()).filter(|&i| slots[i].is_some()).collect()
        };

        loop {
            let alive = live(&slots);
            if alive.len() < 2 {
                break;
            }
            let result_labels = |i: usize, j: usize| -> Vec<usize> {
                let (la, lb) = (slots[i].as_ref().unwrap(), slots[j].as_ref().unwrap());
                let elsewhere = |l: usize| {
                    alive
                        .iter()
                        .any(|&k| k != i && k != j && slots[k].as_ref().unwrap().contains(&l))
                };
                let mut out: Vec<usize> = Vec::new();
                for &l in la.iter().chain(lb.iter()) {
                    if !out.contains(&l) && (is_output[l] || elsewhere(l)) {
                        out.push(l);
                    }
                }
                out
            };
            let (i, j) = match order {
                ContractionOrder::Sequential => (alive[0], alive[1]),
                ContractionOrder::Greedy => {
                    let shares = |i: usize, j: usize| {
                        let lb = slots[j].as_ref().unwrap();
                        slots[i].as_ref().unwrap().iter().any(|l| lb.contains(l))
                    };
                    let mut best: Option<(usize, usize, usize)> = None;
                    let any_shared = alive.iter().enumerate().any(|(a, &i)| {
                        alive[a + 1..].iter().any(|&j| shares(i, j))
                    });
                    for (a, &i) in alive.iter().enumerate() {
                        for &j in &alive[a + 1..] {
                            if any_shared && !shares(i, j) {
                                continue;
                            }
                            let size: usize =
                                result_labels(i, j).iter().map(|&l| edge_dims[l]).product();
                            if best.is_none_or(|(s, _, _)| size < s) {
                                best = Some((size, i, j));
                            }
                        }
                    }
                    let (_, i, j) = best.expect("at least one pair");
                    (i, j)
                }
            };
            let kept = result_labels(i, j);
            let la = slots[i].take().unwrap();
            let lb = slots[j].take().unwrap();
            let mut space = kept.clone();
            for &l in la.iter().chain(lb.iter()) {
                if !space.contains(&l) {
                    space.push(l);
                }
            }
            steps.push(Step {
                lhs: i,
                rhs: j,
                out_shape: kept.iter().map(|&l| edge_dims[l]).collect(),
                dims: space.iter().map(|&l| edge_dims[l]).collect(),
                lhs_strides: strides_for(&la, &edge_dims, &space),
                rhs_strides: strides_for(&lb, &edge_dims, &space),
                out_strides: strides_for(&kept, &edge_dims, &space),
            });
            slots.push(Some(kept));
        }

        let final_slot = live(&slots)[0];
        let final_labels = slots[final_slot].as_ref().unwrap();
        let singles = structure.singleton_edges();
        let final_perm = singles
            .iter()
            .map(|s| final_labels.iter().position(|l| l == s).expect("output label survives"))
            .collect();
        Self {
            steps,
            leaf_count: n,
            final_slot,
            final_perm,
            output_shape: structure.output_shape(),
            core_shapes,
        }
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    /// Largest intermediate produced by the schedule, in entries.
    pub fn max_intermediate(&self) -> usize {
        self.steps
            .iter()
            .map(|s| s.out_shape.iter().product::<usize>())
            .max()
            .unwrap_or(0)
    }

    /// Runs the schedule on cores given in vertex order. Shapes are trusted
    /// (checked only in debug builds); use [`contract`] for checked input.
    pub fn execute(&self, cores: &[&DenseTensor]) -> DenseTensor {
        debug_assert_eq!(cores.len(), self.leaf_count);
        debug_assert!(cores
            .iter()
            .zip(&self.core_shapes)
            .all(|(c, s)| c.shape() == s.as_slice()));
        let mut buffers: Vec<Option<Vec<f64>>> = vec![None; self.leaf_count + self.steps.len()];
        for (k, step) in self.steps.iter().enumerate() {
            let a: &[f64] = if step.lhs < self.leaf_count {
                cores[step.lhs].data()
            } else {
                buffers[step.lhs].as_deref().expect("operand computed")
            };
            let b: &[f64] = if step.rhs < self.leaf_count {
                cores[step.rhs].data()
            } else {
                buffers[step.rhs].as_deref().expect("operand computed")
            };
            let out = step.run(a, b);
            if step.lhs >= self.leaf_count {
                buffers[step.lhs] = None;
            }
            if step.rhs >= self.leaf_count {
                buffers[step.rhs] = None;
            }
            buffers[self.leaf_count + k] = Some(out);
        }
        let (data, shape) = if self.final_slot < self.leaf_count {
            let core = cores[self.final_slot];
            (core.data().to_vec(), core.shape().to_vec())
        } else {
            let last = self.steps.last().expect("non-leaf final slot");
            (
                buffers[self.final_slot].take().expect("final operand"),
                last.out_shape.clone(),
            )
        };
        let raw = DenseTensor::new(shape, data).expect("finite contraction");
        if self.final_perm.iter().enumerate().all(|(k, &p)| k == p) {
            raw
        } else {
            raw.permute(&self.final_perm)
        }
    }
}

/// `TN(G, {T^v})` with the greedy elimination order.
pub fn contract(
    structure: &TensorNetworkStructure,
    cores: &CoreAssignment,
) -> Result<DenseTensor, ContractError> {
    contract_with(structure, cores, ContractionOrder::Greedy)
}

pub fn contract_with(
    structure: &TensorNetworkStructure,
    cores: &CoreAssignment,
    order: ContractionOrder,
) -> Result<DenseTensor, ContractError> {
    cores.check_against(structure)?;
    let plan = ContractionPlan::new(structure, order);
    Ok(plan.execute(&cores.ordered(structure)))
}

/// Direct evaluation: sums, over every assignment of every edge label, the
/// product of the addressed core entries. Cost is the product of all edge
/// dimensions, so this is only meant for small networks (it is the oracle
/// the pairwise schedule is tested against).
pub fn contract_brute_force(
    structure: &TensorNetworkStructure,
    cores: &CoreAssignment,
) -> Result<DenseTensor, ContractError> {
    cores.check_against(structure)?;
    let ordered = cores.ordered(structure);
    let all_dims: Vec<usize> = structure.edges().iter().map(|e| e.dim).collect();
    let singles = structure.singleton_edges();
    let mut out = DenseTensor::zeros(&structure.output_shape());
    let mut labels = vec![0usize; all_dims.len()];
    let mut core_index: Vec<Vec<usize>> = ordered.iter().map(|c| vec![0; c.order()]).collect();
    let mut out_index = vec![0usize; singles.len()];
    loop {
        let mut term = 1.0;
        for (v, core) in ordered.iter().enumerate() {
            for (axis, &e) in structure.incident_edges(v).iter().enumerate() {
                core_index[v][axis] = labels[e];
            }
            term *= core.get(&core_index[v]);
        }
        for (k, &e) in singles.iter().enumerate() {
            out_index[k] = labels[e];
        }
        let off = out.offset(&out_index);
        out.data_mut()[off] += term;
        if !next_index(&mut labels, &all_dims) {
            break;
        }
    }
    Ok(out)
}
