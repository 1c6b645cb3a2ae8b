//! Tensor trains as an ordered list of 3-way cores, with inner products
//! against dense inputs that never materialize the full weight tensor.

use rand::Rng;

use crate::contract::{ContractError, CoreAssignment};
use crate::structure::{build_tt, TensorNetworkStructure};
use crate::tensor::DenseTensor;

/// Cores `G_k` of shape `(r_{k-1}, d_k, r_k)` with `r_0 = r_p = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<DenseTensor>,
}

impl TensorTrain {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self, ContractError> {
        if cores.is_empty() {
            return Err(ContractError::NotATrain("no cores".into()));
        }
        let mut left = 1;
        for (k, c) in cores.iter().enumerate() {
            let s = c.shape();
            if s.len() != 3 || s[0] != left {
                return Err(ContractError::NotATrain(format!(
                    "core {k} has shape {s:?}, expected left bond {left}"
                )));
            }
            left = s[2];
        }
        if left != 1 {
            return Err(ContractError::NotATrain("last core must close with bond 1".into()));
        }
        Ok(Self { cores })
    }

    /// Random train with entries i.i.d. uniform in `[-scale, scale)`.
    pub fn random_uniform(dims: &[usize], ranks: &[usize], scale: f64, rng: &mut impl Rng) -> Self {
        assert_eq!(ranks.len() + 1, dims.len(), "one rank per bond");
        let cores = (0..dims.len())
            .map(|k| {
                let l = if k == 0 { 1 } else { ranks[k - 1] };
                let r = if k + 1 == dims.len() { 1 } else { ranks[k] };
                DenseTensor::from_fn(&[l, dims[k], r], |_| rng.gen_range(-scale..scale))
            })
            .collect();
        Self { cores }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            cores: self.cores.iter().map(|c| DenseTensor::zeros(c.shape())).collect(),
        }
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn cores_mut(&mut self) -> &mut [DenseTensor] {
        &mut self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Internal bond dimensions `r_1 .. r_{p-1}`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.shape()[2])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }

    pub fn structure(&self) -> TensorNetworkStructure {
        build_tt(&self.dims(), &self.ranks()).expect("train dims and ranks are positive")
    }

    /// The cores keyed by the vertex names of [`structure`](Self::structure);
    /// boundary cores drop their unit bond.
    pub fn to_assignment(&self) -> CoreAssignment {
        let structure = self.structure();
        CoreAssignment::from_fn(&structure, |v, shape| {
            self.cores[v]
                .clone()
                .reshape(shape.to_vec())
                .expect("same number of entries")
        })
    }

    /// Reads a train from a chain structure: vertices in declaration order
    /// form the chain, each vertex carries exactly one singleton (in mode
    /// order) and consecutive vertices share one bond.
    pub fn from_network(
        structure: &TensorNetworkStructure,
        cores: &CoreAssignment,
    ) -> Result<Self, ContractError> {
        cores.check_against(structure)?;
        let names = structure.vertices();
        let p = names.len();
        let singles = structure.singleton_edges();
        if singles.len() != p {
            return Err(ContractError::NotATrain(format!(
                "{} dangling legs for {p} vertices",
                singles.len()
            )));
        }
        if structure.edges().len() != 2 * p - 1 {
            return Err(ContractError::NotATrain("unexpected extra edges".into()));
        }
        let mut out = Vec::with_capacity(p);
        for (k, name) in names.iter().enumerate() {
            let phys = singles[k];
            if structure.edges()[phys].endpoints[0] != *name {
                return Err(ContractError::NotATrain(format!(
                    "mode {k} is not attached to vertex {name:?}"
                )));
            }
            let left = if k > 0 {
                Some(structure.edge_between(&names[k - 1], name).ok_or_else(|| {
                    ContractError::NotATrain(format!("no bond into vertex {name:?}"))
                })?)
            } else {
                None
            };
            let right = if k + 1 < p {
                Some(structure.edge_between(name, &names[k + 1]).ok_or_else(|| {
                    ContractError::NotATrain(format!("no bond out of vertex {name:?}"))
                })?)
            } else {
                None
            };
            let incident = structure.incident_edges(k);
            let axis = |e: usize| incident.iter().position(|&x| x == e).unwrap();
            let mut perm = Vec::with_capacity(3);
            perm.extend(left.map(axis));
            perm.push(axis(phys));
            perm.extend(right.map(axis));
            if perm.len() != incident.len() {
                return Err(ContractError::NotATrain(format!(
                    "vertex {name:?} has extra incident edges"
                )));
            }
            let core = cores.get(name).unwrap().permute(&perm);
            let dim = |e: Option<usize>| e.map_or(1, |e| structure.edges()[e].dim);
            let shape = vec![dim(left), structure.edges()[phys].dim, dim(right)];
            out.push(core.reshape(shape).expect("same number of entries"));
        }
        Self::new(out)
    }

    pub fn to_dense(&self) -> DenseTensor {
        // Left-to-right product keeping the open right bond last.
        let mut acc = vec![1.0];
        let mut open = 1usize;
        let mut shape = Vec::new();
        for core in &self.cores {
            let (l, d, r) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            debug_assert_eq!(l, open);
            let rows = acc.len() / l;
            let mut next = vec![0.0; rows * d * r];
            for row in 0..rows {
                for a in 0..l {
                    let w = acc[row * l + a];
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..d {
                        let src = &core.data()[(a * d + i) * r..(a * d + i + 1) * r];
                        let dst = &mut next[(row * d + i) * r..(row * d + i + 1) * r];
                        dst.iter_mut().zip(src).for_each(|(x, y)| *x += w * y);
                    }
                }
            }
            acc = next;
            open = r;
            shape.push(d);
        }
        DenseTensor::new(shape, acc).expect("finite entries")
    }

    /// `<W, X>` for a dense `X` in the train's output shape.
    pub fn inner_product(&self, x: &DenseTensor) -> Result<f64, ContractError> {
        let dims = self.dims();
        if x.shape() != dims.as_slice() {
            return Err(ContractError::InputShape {
                expected: dims,
                found: x.shape().to_vec(),
            });
        }
        Ok(self.margin(x.data()))
    }

    /// `<W, X>` on raw row-major data; the caller guarantees the length.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let mut state = x.to_vec();
        let mut rest = x.len();
        for core in &self.cores {
            state = absorb(core, &state, rest);
            rest /= core.shape()[1];
        }
        state[0]
    }

    /// Returns `<W, X>` and adds `weight * d<W, X>/dG_k` into `grad` for
    /// every core.
    pub fn margin_and_gradient(&self, x: &[f64], weight: f64, grad: &mut TensorTrain) -> f64 {
        self.margin_and_weighted_gradient(x, |_| weight, grad)
    }

    /// Like [`margin_and_gradient`](Self::margin_and_gradient), with the
    /// weight computed from the margin (the loss derivative).
    pub fn margin_and_weighted_gradient(
        &self,
        x: &[f64],
        weight_of: impl FnOnce(f64) -> f64,
        grad: &mut TensorTrain,
    ) -> f64 {
        let p = self.cores.len();
        // Forward states: states[k] is X with cores 0..k absorbed,
        // laid out as (r_k, d_{k+1} ... d_p).
        let mut states = Vec::with_capacity(p + 1);
        states.push(x.to_vec());
        let mut rest = x.len();
        for core in &self.cores {
            let next = absorb(core, states.last().unwrap(), rest);
            rest /= core.shape()[1];
            states.push(next);
        }
        let margin = states[p][0];
        let weight = weight_of(margin);
        if weight == 0.0 {
            return margin;
        }
        // Right environments: env is (d_{k+1} ... d_p, r_k), built from the right.
        let mut env = vec![1.0];
        let mut env_rows = 1usize;
        for k in (0..p).rev() {
            let core = &self.cores[k];
            let (l, d, r) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let left_state = &states[k];
            let g = grad.cores[k].data_mut();
            for a in 0..l {
                for i in 0..d {
                    let row = &left_state[(a * d + i) * env_rows..(a * d + i + 1) * env_rows];
                    for b in 0..r {
                        let mut s = 0.0;
                        for (j, &v) in row.iter().enumerate() {
                            s += v * env[j * r + b];
                        }
                        g[(a * d + i) * r + b] += weight * s;
                    }
                }
            }
            if k > 0 {
                let mut next = vec![0.0; d * env_rows * l];
                for i in 0..d {
                    for j in 0..env_rows {
                        let e = &env[j * r..(j + 1) * r];
                        let dst = &mut next[(i * env_rows + j) * l..(i * env_rows + j + 1) * l];
                        for (a, out) in dst.iter_mut().enumerate() {
                            let c = &core.data()[(a * d + i) * r..(a * d + i + 1) * r];
                            *out = c.iter().zip(e).map(|(x, y)| x * y).sum();
                        }
                    }
                }
                env = next;
                env_rows *= d;
            }
        }
        margin
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &TensorTrain) {
        for (c, o) in self.cores.iter_mut().zip(&other.cores) {
            c.data_mut()
                .iter_mut()
                .zip(o.data())
                .for_each(|(x, y)| *x += alpha * y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.cores.iter().all(|c| c.data().iter().all(|x| x.is_finite()))
    }
}

// state is (l, d * rest') ; returns (r, rest').
fn absorb(core: &DenseTensor, state: &[f64], rest: usize) -> Vec<f64> {
    let (l, d, r) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let inner = rest / d;
    let mut next = vec![0.0; r * inner];
    for a in 0..l {
        for i in 0..d {
            let src = &state[(a * d + i) * inner..(a * d + i + 1) * inner];
            for b in 0..r {
                let c = core.data()[(a * d + i) * r + b];
                if c == 0.0 {
                    continue;
                }
                let dst = &mut next[b * inner..(b + 1) * inner];
                dst.iter_mut().zip(src).for_each(|(x, y)| *x += c * y);
            }
        }
    }
    next
}

/// `<TN(G, cores), X>` for a tensor-train structure, evaluated by sweeping
/// the cores over `X` instead of forming the weight tensor.
pub fn tt_inner_product(
    structure: &TensorNetworkStructure,
    cores: &CoreAssignment,
    x: &DenseTensor,
) -> Result<f64, ContractError> {
    TensorTrain::from_network(structure, cores)?.inner_product(x)
}
