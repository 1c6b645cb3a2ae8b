//! Closed-form capacity bounds for tensor-network hypothesis classes.
//!
//! Log bases: the pseudo-dimension upper bound uses `log2`, the
//! generalization bound uses the natural log. Both are echoed in every
//! [`BoundReport`].

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structure::{Family, StructureSummary, TensorNetworkStructure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("no lower bound is known for family {0}")]
    UnknownFamily(Family),
    #[error("lower bound {formula} = {lower} exceeds upper bound {upper}")]
    Inconsistent {
        formula: String,
        lower: f64,
        upper: f64,
    },
}

/// Inputs to Warren's sign-pattern bound: `n` polynomials of degree at most
/// `degree` in `variables` unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarrenInput {
    pub n: f64,
    pub degree: f64,
    pub variables: f64,
}

fn warren_check(input: &WarrenInput) -> Result<(), BoundError> {
    if !(input.n > input.variables && input.variables > 2.0) {
        return Err(BoundError::OutOfRange(format!(
            "Warren's bound needs n > N > 2, got n = {}, N = {}",
            input.n, input.variables
        )));
    }
    if input.degree <= 0.0 {
        return Err(BoundError::OutOfRange(format!(
            "degree must be positive, got {}",
            input.degree
        )));
    }
    Ok(())
}

/// `log2 (4 e v n / N)^N`.
pub fn warren_bound_log2(input: &WarrenInput) -> Result<f64, BoundError> {
    warren_check(input)?;
    Ok(input.variables * (4.0 * E * input.degree * input.n / input.variables).log2())
}

/// `(4 e v n / N)^N`; may be `inf` for large `N`, see [`warren_bound_log2`].
pub fn warren_bound(input: &WarrenInput) -> Result<f64, BoundError> {
    Ok(warren_bound_log2(input)?.exp2())
}

/// `2 N_G log2(12 |V|)`.
pub fn upper_bound_pdim_counts(param_count: usize, vertex_count: usize) -> f64 {
    2.0 * param_count as f64 * (12.0 * vertex_count as f64).log2()
}

/// Upper bound on the VC / pseudo-dimension of every hypothesis class built
/// on `structure`.
pub fn upper_bound_pdim(structure: &TensorNetworkStructure) -> f64 {
    upper_bound_pdim_counts(structure.param_count(), structure.vertex_count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub n: usize,
    pub log2: f64,
    /// `None` when the value overflows `f64`.
    pub value: Option<f64>,
}

pub fn growth_function_bound_counts(
    param_count: usize,
    vertex_count: usize,
    n: usize,
) -> Result<GrowthBound, BoundError> {
    if n == 0 {
        return Err(BoundError::OutOfRange("sample size must be at least 1".into()));
    }
    let big_n = param_count as f64;
    let log2 = big_n * (4.0 * E * n as f64 * vertex_count as f64 / big_n).log2();
    let value = log2.exp2();
    Ok(GrowthBound {
        n,
        log2,
        value: value.is_finite().then_some(value),
    })
}

/// `(4 e n |V| / N_G)^{N_G}`, evaluated in log space.
pub fn growth_function_bound(
    structure: &TensorNetworkStructure,
    n: usize,
) -> Result<GrowthBound, BoundError> {
    growth_function_bound_counts(structure.param_count(), structure.vertex_count(), n)
}

pub fn generalization_bound_counts(
    param_count: usize,
    vertex_count: usize,
    n: usize,
    delta: f64,
) -> Result<f64, BoundError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundError::OutOfRange(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if n == 0 {
        return Err(BoundError::OutOfRange("sample size must be at least 1".into()));
    }
    let (big_n, n_f) = (param_count as f64, n as f64);
    let complexity = big_n * (8.0 * E * n_f * vertex_count as f64 / big_n).ln() + (4.0 / delta).ln();
    if complexity <= 0.0 {
        return Err(BoundError::OutOfRange(format!(
            "bound is undefined at n = {n}: log term is {complexity}"
        )));
    }
    Ok(2.0 * (2.0 / n_f * complexity).sqrt())
}

/// Width `eps` such that, with probability at least `1 - delta` over a
/// sample of size `n`, every classifier on `structure` has
/// `R(h) < R_S(h) + eps`:
/// `eps = 2 sqrt((2/n) (N_G ln(8 e n |V| / N_G) + ln(4/delta)))`.
pub fn generalization_bound(
    structure: &TensorNetworkStructure,
    n: usize,
    delta: f64,
) -> Result<f64, BoundError> {
    generalization_bound_counts(structure.param_count(), structure.vertex_count(), n, delta)
}

/// One row of the lower-bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub family: Family,
    pub formula_name: String,
    #[serde(with = "value_or_na")]
    pub value: Option<f64>,
    pub condition_met: bool,
    pub condition_text: String,
}

mod value_or_na {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => x.serialize(s),
            None => "n/a".serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(Some(x)),
            Repr::Text(t) if t == "n/a" => Ok(None),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"n/a\", got {t:?}"))),
        }
    }
}

fn row(family: Family, name: &str, value: f64, met: bool, condition: String) -> LowerBound {
    LowerBound {
        family,
        formula_name: name.to_string(),
        value: met.then_some(value),
        condition_met: met,
        condition_text: condition,
    }
}

fn pow_at_least(base: usize, exp: usize, bound: usize) -> bool {
    // base^exp >= bound without overflow.
    let mut acc: usize = 1;
    for _ in 0..exp {
        if acc >= bound {
            return true;
        }
        acc = acc.saturating_mul(base);
    }
    acc >= bound
}

/// Known lower bounds on the VC / pseudo-dimension for `family` at order
/// `p`, mode size `d` and rank `r`. A matrix is treated as the CP row at
/// `p = 2`. Rows whose condition fails carry `value: None`.
pub fn lower_bounds(family: Family, p: usize, d: usize, r: usize) -> Result<Vec<LowerBound>, BoundError> {
    if p == 0 || d == 0 || r == 0 {
        return Err(BoundError::OutOfRange(format!(
            "p, d, r must be positive, got p = {p}, d = {d}, r = {r}"
        )));
    }
    let (pf, df, rf) = (p as f64, d as f64, r as f64);
    let rows = match family {
        Family::RankOne => vec![row(family, "(d-1)p", (df - 1.0) * pf, true, "none".into())],
        Family::Cp | Family::Matrix => {
            let p = if family == Family::Matrix { 2 } else { p };
            vec![row(
                family,
                "rd",
                rf * df,
                pow_at_least(d, p - 1, r),
                format!("r <= d^(p-1): {r} <= {d}^{}", p - 1),
            )]
        }
        Family::Tucker => vec![row(
            family,
            "r^p",
            rf.powi(p as i32),
            r <= d,
            format!("r <= d: {r} <= {d}"),
        )],
        Family::Tt | Family::Tr => {
            let half = (p.saturating_sub(1)) / 2;
            vec![
                row(
                    family,
                    "r^2 d",
                    rf * rf * df,
                    p >= 3 && pow_at_least(d, half, r),
                    format!("p >= 3 and r <= d^floor((p-1)/2): p = {p}, {r} <= {d}^{half}"),
                ),
                row(
                    family,
                    "p(r^2 d - 1)/3",
                    pf * (rf * rf * df - 1.0) / 3.0,
                    r == d && p.is_multiple_of(3),
                    format!("r = d and p divisible by 3: r = {r}, d = {d}, p = {p}"),
                ),
            ]
        }
        Family::HierarchicalTucker | Family::PepsGrid => {
            return Err(BoundError::UnknownFamily(family))
        }
    };
    Ok(rows)
}

/// The parameters a family was built with, for looking up lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub family: Family,
    pub p: usize,
    pub d: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationPoint {
    pub n: usize,
    pub delta: f64,
    /// `None` where the closed form is undefined (non-positive log term).
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub param_count: usize,
    pub vertex_count: usize,
    pub n_grid: Vec<usize>,
    pub delta: f64,
    pub upper_bound_log_base: String,
    pub generalization_log_base: String,
    pub growth_log_base: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub structure_summary: StructureSummary,
    pub family: Option<FamilyParams>,
    pub upper_bound_pdim: f64,
    pub growth_bound: Vec<GrowthBound>,
    pub gen_bound: Vec<GeneralizationPoint>,
    pub lower_bounds: Vec<LowerBound>,
    pub metadata: ReportMetadata,
}

/// Evaluates every bound for `structure` on the sample sizes in `n_grid`.
/// When `family` is given, its lower-bound rows are attached and each row
/// whose condition holds is checked against the upper bound.
pub fn bound_report(
    structure: &TensorNetworkStructure,
    family: Option<FamilyParams>,
    n_grid: &[usize],
    delta: f64,
) -> Result<BoundReport, BoundError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundError::OutOfRange(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let summary = structure.summary();
    let upper = upper_bound_pdim(structure);
    let growth_bound = n_grid
        .iter()
        .map(|&n| growth_function_bound(structure, n))
        .collect::<Result<Vec<_>, _>>()?;
    let gen_bound = n_grid
        .iter()
        .map(|&n| {
            let epsilon = match generalization_bound(structure, n, delta) {
                Ok(e) => Some(e),
                Err(BoundError::OutOfRange(_)) if n > 0 => None,
                Err(e) => return Err(e),
            };
            Ok(GeneralizationPoint { n, delta, epsilon })
        })
        .collect::<Result<Vec<_>, BoundError>>()?;
    let lower = match family {
        Some(fp) => match lower_bounds(fp.family, fp.p, fp.d, fp.r) {
            Ok(rows) => rows,
            Err(BoundError::UnknownFamily(_)) => Vec::new(),
            Err(e) => return Err(e),
        },
        None => Vec::new(),
    };
    for lb in &lower {
        if let Some(v) = lb.value {
            if v > upper {
                return Err(BoundError::Inconsistent {
                    formula: lb.formula_name.clone(),
                    lower: v,
                    upper,
                });
            }
        }
    }
    Ok(BoundReport {
        metadata: ReportMetadata {
            param_count: summary.param_count,
            vertex_count: summary.vertex_count,
            n_grid: n_grid.to_vec(),
            delta,
            upper_bound_log_base: "2".into(),
            generalization_log_base: "e".into(),
            growth_log_base: "2".into(),
        },
        structure_summary: summary,
        family,
        upper_bound_pdim: upper,
        growth_bound,
        gen_bound,
        lower_bounds: lower,
    })
}
