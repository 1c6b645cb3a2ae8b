//! Explicit shattering certificates for the lower-bound constructions and a
//! brute-force sign-pattern counter for tiny structures.
//!
//! A certificate fixes some cores to 0/1 tensors and maps every point of an
//! index set `S` to one entry ("slot") of a free core, such that the
//! contracted tensor at `s` is exactly the value written into its slot.
//! Any sign vector on `S` is then realized by writing it into the slots,
//! which shows that `S` is shattered.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{ContractError, ContractionOrder, ContractionPlan, CoreAssignment};
use crate::structure::{
    build_cp, build_rank_one, build_tucker, tr_uniform, tt_uniform, StructureError,
    TensorNetworkStructure,
};
use crate::tensor::DenseTensor;

/// Largest index set enumerated exhaustively (`2^24` sign vectors).
pub const EXHAUSTIVE_CAP: usize = 24;
/// Largest index set accepted by [`estimate_shattered_count`].
pub const ESTIMATE_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShatterError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("condition violated: {0}")]
    ConditionViolated(String),
    #[error("verification failed at index {index:?}{}: expected {expected}, found {found}", pattern_note(.pattern))]
    VerificationFailed {
        index: Vec<usize>,
        /// The sign vector being realized, or `None` for a passthrough trial.
        pattern: Option<Vec<i8>>,
        expected: f64,
        found: f64,
    },
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Contract(#[from] ContractError),
}

fn pattern_note(p: &Option<Vec<i8>>) -> String {
    match p {
        Some(p) => format!(" for sign vector {p:?}"),
        None => String::new(),
    }
}

/// The lower-bound constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    RankOne,
    Tt,
    TtBlock,
    Tr,
    TrBlock,
    Tucker,
    Cp,
}

impl Construction {
    pub const ALL: [Construction; 7] = [
        Construction::RankOne,
        Construction::Tt,
        Construction::TtBlock,
        Construction::Tr,
        Construction::TrBlock,
        Construction::Tucker,
        Construction::Cp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Construction::RankOne => "rank_one",
            Construction::Tt => "tt",
            Construction::TtBlock => "tt_block",
            Construction::Tr => "tr",
            Construction::TrBlock => "tr_block",
            Construction::Tucker => "tucker",
            Construction::Cp => "cp",
        }
    }

    /// Builds the certificate. `r` is ignored by the constructions that fix
    /// it (`rank_one`, and the block variants where `r = d`).
    pub fn build(self, d: usize, p: usize, r: usize) -> Result<ShatteringCertificate, ShatterError> {
        match self {
            Construction::RankOne => rank_one_construction(d, p),
            Construction::Tt => tt_construction(d, p, r),
            Construction::TtBlock => tt_block_construction(d, p),
            Construction::Tr => tr_construction(d, p, r),
            Construction::TrBlock => tr_block_construction(d, p),
            Construction::Tucker => tucker_construction(d, p, r),
            Construction::Cp => cp_construction(d, p, r),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Construction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Construction::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown construction {s:?}"))
    }
}

/// A position inside a free core.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub vertex: String,
    pub position: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatteringCertificate {
    pub construction: Construction,
    pub structure: TensorNetworkStructure,
    pub index_set: Vec<Vec<usize>>,
    pub free_vertices: Vec<String>,
    /// Cores of the vertices that are not free.
    pub fixed_cores: CoreAssignment,
    /// Starting cores for the free vertices. Entries addressed by a slot are
    /// overwritten; the others (if any) stay fixed.
    pub free_base: CoreAssignment,
    /// `passthrough[i]` is the slot that `index_set[i]` reads.
    pub passthrough: Vec<Slot>,
}

impl ShatteringCertificate {
    pub fn size(&self) -> usize {
        self.index_set.len()
    }

    pub fn validate(&self) -> Result<(), ShatterError> {
        let bad = |m: String| Err(ShatterError::Malformed(m));
        if self.index_set.len() != self.passthrough.len() {
            return bad(format!(
                "{} indices but {} passthrough slots",
                self.index_set.len(),
                self.passthrough.len()
            ));
        }
        let out = self.structure.output_shape();
        for s in &self.index_set {
            if s.len() != out.len() || s.iter().zip(&out).any(|(i, d)| i >= d) {
                return bad(format!("index {s:?} outside output shape {out:?}"));
            }
        }
        if self.index_set.iter().collect::<HashSet<_>>().len() != self.index_set.len() {
            return bad("repeated index in the index set".into());
        }
        for v in self.structure.vertices() {
            let free = self.free_vertices.contains(v);
            let core = if free { self.free_base.get(v) } else { self.fixed_cores.get(v) };
            if core.is_none() {
                return bad(format!("no core for vertex {v:?}"));
            }
        }
        let mut all = self.fixed_cores.clone();
        for (v, c) in self.free_base.iter() {
            all.insert(v.clone(), c.clone());
        }
        all.check_against(&self.structure)?;
        for slot in &self.passthrough {
            let Some(core) = self.free_base.get(&slot.vertex) else {
                return bad(format!("slot on non-free vertex {:?}", slot.vertex));
            };
            if slot.position.len() != core.order()
                || slot.position.iter().zip(core.shape()).any(|(i, d)| i >= d)
            {
                return bad(format!("slot {:?} outside core {:?}", slot.position, slot.vertex));
            }
        }
        if self.passthrough.iter().collect::<HashSet<_>>().len() != self.passthrough.len() {
            return bad("two indices share a slot".into());
        }
        Ok(())
    }

    /// The full core assignment with `values[i]` written into the slot of
    /// `index_set[i]`.
    pub fn assemble(&self, values: &[f64]) -> CoreAssignment {
        let mut cores = self.fixed_cores.clone();
        let mut free = self.free_base.clone();
        for (slot, &x) in self.passthrough.iter().zip(values) {
            if let Some(c) = free.get_mut(&slot.vertex) {
                c.set(&slot.position, x);
            }
        }
        for (v, c) in free.iter() {
            cores.insert(v.clone(), c.clone());
        }
        cores
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn check_d(d: usize) -> Result<(), ShatterError> {
    if d < 2 {
        return Err(ShatterError::OutOfRange(format!("mode dimension must be at least 2, got {d}")));
    }
    Ok(())
}

fn check_positive(name: &str, x: usize) -> Result<(), ShatterError> {
    if x == 0 {
        return Err(ShatterError::OutOfRange(format!("{name} must be positive")));
    }
    Ok(())
}

/// `base^exp`, saturating.
fn pow(base: usize, exp: usize) -> usize {
    (0..exp).fold(1usize, |acc, _| acc.saturating_mul(base))
}

fn name(k: usize) -> String {
    format!("v{}", k + 1)
}

/// Rank one: the last entry of every vector is fixed to 1, the others are
/// free. `S` holds the indices that are `d - 1` everywhere except one mode.
pub fn rank_one_construction(d: usize, p: usize) -> Result<ShatteringCertificate, ShatterError> {
    check_d(d)?;
    check_positive("order", p)?;
    let structure = build_rank_one(&vec![d; p])?;
    let mut free_base = CoreAssignment::new();
    let mut index_set = Vec::new();
    let mut passthrough = Vec::new();
    for k in 0..p {
        let mut v = DenseTensor::zeros(&[d]);
        v.set(&[d - 1], 1.0);
        free_base.insert(name(k), v);
        for j in 0..d - 1 {
            let mut s = vec![d - 1; p];
            s[k] = j;
            index_set.push(s);
            passthrough.push(Slot { vertex: name(k), position: vec![j] });
        }
    }
    Ok(ShatteringCertificate {
        construction: Construction::RankOne,
        structure,
        index_set,
        free_vertices: (0..p).map(name).collect(),
        fixed_cores: CoreAssignment::new(),
        free_base,
        passthrough,
    })
}

/// Train layout shared by the TT and TR constructions: core `k` is a logical
/// `(left, mode, right)` tensor; TT boundary cores have a bond of 1 on the
/// outside and TR closes the ring through bond `(v_p, v_1)`.
#[derive(Clone, Copy, PartialEq)]
enum Train {
    Tt,
    Tr,
}

impl Train {
    fn structure(self, p: usize, d: usize, r: usize) -> Result<TensorNetworkStructure, StructureError> {
        match self {
            Train::Tt => tt_uniform(p, d, r),
            Train::Tr => tr_uniform(p, d, r),
        }
    }

    fn logical_shape(self, k: usize, p: usize, d: usize, r: usize) -> [usize; 3] {
        match self {
            Train::Tt => [if k == 0 { 1 } else { r }, d, if k + 1 == p { 1 } else { r }],
            Train::Tr => [r, d, r],
        }
    }

    /// Storage position of logical entry `(a, j, b)` of core `k`.
    fn storage(self, k: usize, p: usize, a: usize, j: usize, b: usize) -> Vec<usize> {
        match self {
            Train::Tt if k == 0 => vec![j, b],
            Train::Tt if k + 1 == p => vec![a, j],
            // the closing bond is the last axis of the first ring core
            Train::Tr if k == 0 => vec![j, b, a],
            _ => vec![a, j, b],
        }
    }

    fn core(
        self,
        k: usize,
        p: usize,
        d: usize,
        r: usize,
        entry: impl Fn(usize, usize, usize) -> f64,
    ) -> DenseTensor {
        let [l, _, rr] = self.logical_shape(k, p, d, r);
        let shape: Vec<usize> = match (self, k) {
            (Train::Tt, 0) => vec![d, rr],
            (Train::Tt, _) if k + 1 == p => vec![l, d],
            (Train::Tr, 0) => vec![d, rr, l],
            _ => vec![l, d, rr],
        };
        let mut t = DenseTensor::zeros(&shape);
        for a in 0..l {
            for j in 0..d {
                for b in 0..rr {
                    let x = entry(a, j, b);
                    if x != 0.0 {
                        t.set(&self.storage(k, p, a, j, b), x);
                    }
                }
            }
        }
        t
    }
}

fn train_construction(
    train: Train,
    d: usize,
    p: usize,
    r: usize,
) -> Result<ShatteringCertificate, ShatterError> {
    check_d(d)?;
    check_positive("rank", r)?;
    let half = p.saturating_sub(1) / 2;
    let mut failed = Vec::new();
    if p < 3 {
        failed.push(format!("p >= 3 fails (p = {p})"));
    }
    if r > pow(d, half) {
        failed.push(format!("r <= d^floor((p-1)/2) fails ({r} > {d}^{half})"));
    }
    if !failed.is_empty() {
        return Err(ShatterError::ConditionViolated(failed.join("; ")));
    }
    let structure = train.structure(p, d, r)?;
    // 0-based position of the free core, ceil(p/2) in 1-based terms
    let m = p.div_ceil(2) - 1;
    let mut fixed_cores = CoreAssignment::new();
    for k in (0..p).filter(|&k| k != m) {
        let core = if k < m {
            // left funnel: accumulates i_1 + i_2 d + ... into the right bond
            let span = pow(d, k);
            train.core(k, p, d, r, |a, j, b| {
                let ok = a < span && (k > 0 || a == 0) && b == a + j * span;
                f64::from(u8::from(ok))
            })
        } else {
            // right funnel: i_p + i_{p-1} d + ... read from the left bond
            let span = pow(d, p - 1 - k);
            train.core(k, p, d, r, |a, j, b| {
                let ok = b < span && (k + 1 < p || b == 0) && a == j * span + b;
                f64::from(u8::from(ok))
            })
        };
        fixed_cores.insert(name(k), core);
    }
    let free_base = {
        let mut c = CoreAssignment::new();
        c.insert(name(m), train.core(m, p, d, r, |_, _, _| 0.0));
        c
    };
    let mut index_set = Vec::new();
    let mut passthrough = Vec::new();
    let mut s = vec![0usize; p];
    loop {
        let left: usize = (0..m).map(|t| s[t] * pow(d, t)).sum();
        let right: usize = (m + 1..p).map(|t| s[t] * pow(d, p - 1 - t)).sum();
        if left < r && right < r {
            index_set.push(s.clone());
            passthrough.push(Slot {
                vertex: name(m),
                position: train.storage(m, p, left, s[m], right),
            });
        }
        if !crate::tensor::next_index(&mut s, &vec![d; p]) {
            break;
        }
    }
    Ok(ShatteringCertificate {
        construction: match train {
            Train::Tt => Construction::Tt,
            Train::Tr => Construction::Tr,
        },
        structure,
        index_set,
        free_vertices: vec![name(m)],
        fixed_cores,
        free_base,
        passthrough,
    })
}

/// Tensor train: the middle core is free and the outer cores funnel the left
/// and right multi-indices into its bonds. `|S| = r^2 d`.
pub fn tt_construction(d: usize, p: usize, r: usize) -> Result<ShatteringCertificate, ShatterError> {
    train_construction(Train::Tt, d, p, r)
}

/// Tensor ring version of [`tt_construction`]; the boundary cores route
/// through the first ring index so the trace reduces to a single term.
pub fn tr_construction(d: usize, p: usize, r: usize) -> Result<ShatteringCertificate, ShatterError> {
    train_construction(Train::Tr, d, p, r)
}

fn block_construction(train: Train, d: usize, p: usize) -> Result<ShatteringCertificate, ShatterError> {
    check_d(d)?;
    if p == 0 || !p.is_multiple_of(3) {
        return Err(ShatterError::ConditionViolated(format!(
            "p must be a positive multiple of 3, got {p}"
        )));
    }
    let r = d;
    let k_blocks = p / 3;
    let structure = train.structure(p, d, r)?;
    let mut fixed_cores = CoreAssignment::new();
    let mut free_base = CoreAssignment::new();
    for k in 0..p {
        match k % 3 {
            // opens a block: the bond carries this core's mode index
            0 => {
                let c = train.core(k, p, d, r, |a, j, b| f64::from(u8::from(a == 0 && b == j)));
                fixed_cores.insert(name(k), c);
            }
            // free third-order block, last entry pinned to 1
            1 => {
                let mut c = train.core(k, p, d, r, |_, _, _| 0.0);
                c.set(&train.storage(k, p, d - 1, d - 1, d - 1), 1.0);
                free_base.insert(name(k), c);
            }
            // closes a block: reads the bond and resets it to the first index
            _ => {
                let c = train.core(k, p, d, r, |a, j, b| f64::from(u8::from(a == j && b == 0)));
                fixed_cores.insert(name(k), c);
            }
        }
    }
    let mut index_set = Vec::new();
    let mut passthrough = Vec::new();
    let top = [d - 1; 3];
    for blk in 0..k_blocks {
        let mut t = [0usize; 3];
        loop {
            if t != top {
                let mut s = vec![d - 1; p];
                s[3 * blk..3 * blk + 3].copy_from_slice(&t);
                index_set.push(s);
                passthrough.push(Slot {
                    vertex: name(3 * blk + 1),
                    position: train.storage(3 * blk + 1, p, t[0], t[1], t[2]),
                });
            }
            if !crate::tensor::next_index(&mut t, &[d; 3]) {
                break;
            }
        }
    }
    Ok(ShatteringCertificate {
        construction: match train {
            Train::Tt => Construction::TtBlock,
            Train::Tr => Construction::TrBlock,
        },
        structure,
        index_set,
        free_vertices: (0..k_blocks).map(|b| name(3 * b + 1)).collect(),
        fixed_cores,
        free_base,
        passthrough,
    })
}

/// Tensor train with `r = d` and `p = 3k`: the fixed cores make the tensor
/// an outer product of `k` free third-order cores, which is then shattered
/// like a rank-one tensor with modes of size `d^3`. `|S| = k (d^3 - 1)`.
pub fn tt_block_construction(d: usize, p: usize) -> Result<ShatteringCertificate, ShatterError> {
    block_construction(Train::Tt, d, p)
}

pub fn tr_block_construction(d: usize, p: usize) -> Result<ShatteringCertificate, ShatterError> {
    block_construction(Train::Tr, d, p)
}

/// Tucker: every factor is `[I_r; 0]`, so the tensor is the free core padded
/// with zeros. `S = [r]^p`.
pub fn tucker_construction(d: usize, p: usize, r: usize) -> Result<ShatteringCertificate, ShatterError> {
    check_positive("mode dimension", d)?;
    check_positive("order", p)?;
    check_positive("rank", r)?;
    if r > d {
        return Err(ShatterError::ConditionViolated(format!("r <= d fails ({r} > {d})")));
    }
    let structure = build_tucker(&vec![d; p], &vec![r; p])?;
    let mut fixed_cores = CoreAssignment::new();
    for k in 0..p {
        fixed_cores.insert(
            name(k),
            DenseTensor::from_fn(&[d, r], |ix| f64::from(u8::from(ix[0] == ix[1]))),
        );
    }
    let mut free_base = CoreAssignment::new();
    free_base.insert("g", DenseTensor::zeros(&vec![r; p]));
    let mut index_set = Vec::new();
    let mut s = vec![0usize; p];
    loop {
        index_set.push(s.clone());
        if !crate::tensor::next_index(&mut s, &vec![r; p]) {
            break;
        }
    }
    let passthrough = index_set
        .iter()
        .map(|s| Slot { vertex: "g".into(), position: s.clone() })
        .collect();
    Ok(ShatteringCertificate {
        construction: Construction::Tucker,
        structure,
        index_set,
        free_vertices: vec!["g".into()],
        fixed_cores,
        free_base,
        passthrough,
    })
}

/// CP: the first factor `A` is free; factor `k >= 2` selects base-`d` digit
/// `k - 2` of the rank index, so `T[i_1, ...] = A[i_1, c]` with
/// `c = i_2 + i_3 d + ...` when `c < r`. `|S| = r d`.
pub fn cp_construction(d: usize, p: usize, r: usize) -> Result<ShatteringCertificate, ShatterError> {
    check_d(d)?;
    check_positive("rank", r)?;
    if p < 2 {
        return Err(ShatterError::OutOfRange(format!("order must be at least 2, got {p}")));
    }
    if r > pow(d, p - 1) {
        return Err(ShatterError::ConditionViolated(format!(
            "r <= d^(p-1) fails ({r} > {d}^{})",
            p - 1
        )));
    }
    let structure = build_cp(&vec![d; p], r)?;
    let mut fixed_cores = CoreAssignment::new();
    for k in 1..p {
        let span = pow(d, k - 1);
        fixed_cores.insert(
            name(k),
            DenseTensor::from_fn(&[d, r], |ix| f64::from(u8::from(ix[0] == (ix[1] / span) % d))),
        );
    }
    let mut free_base = CoreAssignment::new();
    free_base.insert(name(0), DenseTensor::zeros(&[d, r]));
    let mut index_set = Vec::new();
    let mut passthrough = Vec::new();
    for i in 0..d {
        for c in 0..r {
            let mut s = vec![i];
            s.extend((1..p).map(|k| (c / pow(d, k - 1)) % d));
            index_set.push(s);
            passthrough.push(Slot { vertex: name(0), position: vec![i, c] });
        }
    }
    Ok(ShatteringCertificate {
        construction: Construction::Cp,
        structure,
        index_set,
        free_vertices: vec![name(0)],
        fixed_cores,
        free_base,
        passthrough,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Passthrough,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Random free assignments for the passthrough check.
    pub trials: usize,
    /// Random sign vectors drawn when `|S|` exceeds [`EXHAUSTIVE_CAP`].
    pub spot_checks: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { trials: 32, spot_checks: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub construction: Construction,
    pub mode: VerifyMode,
    pub set_size: usize,
    pub passthrough_trials: usize,
    /// Sign vectors tried; `2^|S|` when enumeration was exhaustive.
    pub patterns_checked: u64,
    pub patterns_realized: u64,
    /// `false` when `|S|` was above the cap and sign vectors were sampled.
    pub enumerated: bool,
}

/// Contracts the certificate with `values` in the slots and compares the
/// tensor at every point of `S`: exact values without a sign vector, signs
/// with one.
fn probe(
    cert: &ShatteringCertificate,
    plan: &ContractionPlan,
    values: &[f64],
    pattern: Option<&[i8]>,
) -> Result<(), ShatterError> {
    let cores = cert.assemble(values);
    let t = plan.execute(&cores.ordered(&cert.structure));
    for (i, s) in cert.index_set.iter().enumerate() {
        let found = t.get(s);
        let ok = match pattern {
            None => found == values[i],
            Some(_) => (found >= 0.0) == (values[i] >= 0.0),
        };
        if !ok {
            return Err(ShatterError::VerificationFailed {
                index: s.clone(),
                pattern: pattern.map(<[i8]>::to_vec),
                expected: values[i],
                found,
            });
        }
    }
    Ok(())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn verify_certificate(
    cert: &ShatteringCertificate,
    mode: VerifyMode,
) -> Result<VerificationRecord, ShatterError> {
    verify_certificate_with(cert, mode, &VerifyOptions::default())
}

/// Checks the passthrough invariant on random free cores and, in exhaustive
/// mode, realizes every sign vector on `S`. Results do not depend on the
/// thread schedule: the failure reported is always the first in
/// enumeration order.
pub fn verify_certificate_with(
    cert: &ShatteringCertificate,
    mode: VerifyMode,
    opts: &VerifyOptions,
) -> Result<VerificationRecord, ShatterError> {
    cert.validate()?;
    let n = cert.size();
    let plan = ContractionPlan::new(&cert.structure, ContractionOrder::Greedy);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.trials {
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        probe(cert, &plan, &values, None)?;
    }
    let mut record = VerificationRecord {
        construction: cert.construction,
        mode,
        set_size: n,
        passthrough_trials: opts.trials,
        patterns_checked: 0,
        patterns_realized: 0,
        enumerated: false,
    };
    if mode == VerifyMode::Passthrough {
        return Ok(record);
    }

    let realize = |signs: Vec<i8>| -> Option<ShatterError> {
        let values: Vec<f64> = signs.iter().map(|&x| f64::from(x)).collect();
        probe(cert, &plan, &values, Some(&signs)).err()
    };
    let failure = if n <= EXHAUSTIVE_CAP {
        record.enumerated = true;
        record.patterns_checked = 1u64 << n;
        (0..1u64 << n)
            .into_par_iter()
            .find_map_first(|bits| realize((0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect()))
    } else {
        record.patterns_checked = opts.spot_checks as u64;
        (0..opts.spot_checks as u64).into_par_iter().find_map_first(|i| {
            let mut r = stream_rng(opts.seed, i + 1);
            realize((0..n).map(|_| if r.gen::<bool>() { -1 } else { 1 }).collect())
        })
    };
    if let Some(e) = failure {
        return Err(e);
    }
    record.patterns_realized = record.patterns_checked;
    Ok(record)
}

/// Number of distinct sign patterns on `index_set` seen over `samples`
/// random core assignments (entries uniform on `(-1, 1)`). Sample `i` uses
/// its own random stream, so the count is non-decreasing in `samples` for a
/// fixed seed and independent of the thread schedule. A zero entry counts
/// as positive.
pub fn estimate_shattered_count(
    structure: &TensorNetworkStructure,
    index_set: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<usize, ShatterError> {
    if index_set.len() > ESTIMATE_CAP {
        return Err(ShatterError::OutOfRange(format!(
            "index set of size {} exceeds {ESTIMATE_CAP}",
            index_set.len()
        )));
    }
    let out = structure.output_shape();
    for s in index_set {
        if s.len() != out.len() || s.iter().zip(&out).any(|(i, d)| i >= d) {
            return Err(ShatterError::OutOfRange(format!(
                "index {s:?} outside output shape {out:?}"
            )));
        }
    }
    if index_set.is_empty() {
        return Ok(1);
    }
    let plan = ContractionPlan::new(structure, ContractionOrder::Greedy);
    let shapes: Vec<Vec<usize>> = (0..structure.vertex_count()).map(|v| structure.core_shape(v)).collect();
    let seen = (0..samples as u64)
        .into_par_iter()
        .fold(HashSet::new, |mut set, i| {
            let mut rng = stream_rng(seed, i);
            let cores: Vec<DenseTensor> = shapes
                .iter()
                .map(|sh| DenseTensor::from_fn(sh, |_| rng.gen_range(-1.0..1.0)))
                .collect();
            let t = plan.execute(&cores.iter().collect::<Vec<_>>());
            let bits = index_set
                .iter()
                .enumerate()
                .fold(0u32, |acc, (k, s)| acc | u32::from(t.get(s) >= 0.0) << k);
            set.insert(bits);
            set
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    Ok(seen.len())
}
