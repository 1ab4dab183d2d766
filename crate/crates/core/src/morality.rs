//! Norms, force-ordered morality chains, recursive lexicographic weights and
//! the morality metric.
//!
//! A chain `(N_1, ..., N_k)` is ordered by strictly decreasing force. Each
//! norm is scored by a morality function in `[0, 1]` and the chain combines
//! the scores with weights `w_k = 1`, `w_{i-1} = (sum_{j>=i} w_j + 1) / beta`,
//! which makes a `beta`-sized improvement on a higher-ranked norm outweigh any
//! change on all norms below it.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Resolution used when callers do not pick one.
pub const DEFAULT_BETA: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoralityError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("chain `{chain}`: norms `{first}` and `{second}` share force {force}")]
    DuplicateForce {
        chain: String,
        first: String,
        second: String,
        force: u32,
    },
    #[error("chain `{0}` has no norms")]
    EmptyChain(String),
    #[error("norm `{id}`: {reason}")]
    InvalidNorm { id: String, reason: String },
    #[error("norm `{0}` is not part of the chain")]
    UnknownNorm(String),
}

/// Whether a norm demands (`Prescribed`) or forbids (`Prohibited`) its pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeonticModality {
    Prescribed,
    Prohibited,
}

impl DeonticModality {
    /// Boolean encoding: prescribed is `true`.
    pub fn as_bool(self) -> bool {
        matches!(self, DeonticModality::Prescribed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormCategory {
    Action,
    Outcome,
    Causal,
    Utility,
}

impl NormCategory {
    pub fn is_event(self) -> bool {
        !matches!(self, NormCategory::Utility)
    }

    pub fn default_signature(self) -> Signature {
        match self {
            NormCategory::Action => Signature::Push,
            NormCategory::Outcome => Signature::Harmed,
            NormCategory::Causal => Signature::PersonalHarm,
            NormCategory::Utility => Signature::HarmCount,
        }
    }
}

/// The interaction pattern a norm watches for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    /// The agent pushed a character.
    Push,
    /// A subject of the given kind was harmed.
    Harmed,
    /// Harm whose lineage runs through the agent pushing the victim.
    PersonalHarm,
    /// Harm on a route the agent re-switched with a lever.
    CausedHarm,
    /// Running count of harmed subjects.
    HarmCount,
}

impl Signature {
    pub fn category(self) -> NormCategory {
        match self {
            Signature::Push => NormCategory::Action,
            Signature::Harmed => NormCategory::Outcome,
            Signature::PersonalHarm | Signature::CausedHarm => NormCategory::Causal,
            Signature::HarmCount => NormCategory::Utility,
        }
    }
}

/// Entity kind a norm is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Human,
    Animal,
    Robot,
    Agent,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Subject::Human => "human",
            Subject::Animal => "animal",
            Subject::Robot => "robot",
            Subject::Agent => "agent",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct UtilityRange {
    pub min: f64,
    pub max: f64,
}

impl UtilityRange {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// Position of `value` inside the range, `0` at `min` and `1` at `max`.
    pub fn normalize(&self, value: f64) -> f64 {
        (value - self.min) / (self.max - self.min)
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }
}

impl From<[f64; 2]> for UtilityRange {
    fn from(v: [f64; 2]) -> Self {
        Self { min: v[0], max: v[1] }
    }
}

impl From<UtilityRange> for [f64; 2] {
    fn from(r: UtilityRange) -> Self {
        [r.min, r.max]
    }
}

/// One moral criterion. Serializes to the chain document norm schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub id: String,
    pub category: NormCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    #[serde(default, rename = "kind", skip_serializing_if = "Option::is_none")]
    pub subject: Option<Subject>,
    pub force: u32,
    pub modality: DeonticModality,
    #[serde(default, rename = "range", skip_serializing_if = "Option::is_none")]
    pub utility_range: Option<UtilityRange>,
}

impl NormSpec {
    pub fn new(
        id: impl Into<String>,
        category: NormCategory,
        subject: Option<Subject>,
        force: u32,
        modality: DeonticModality,
    ) -> Self {
        Self {
            id: id.into(),
            category,
            signature: None,
            subject,
            force,
            modality,
            utility_range: None,
        }
    }

    pub fn with_signature(mut self, signature: Signature) -> Self {
        self.signature = Some(signature);
        self
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.utility_range = Some(UtilityRange::new(min, max));
        self
    }

    pub fn signature(&self) -> Signature {
        self.signature
            .unwrap_or_else(|| self.category.default_signature())
    }

    pub fn is_event(&self) -> bool {
        self.category.is_event()
    }

    fn validate(&self) -> Result<(), MoralityError> {
        let invalid = |reason: &str| MoralityError::InvalidNorm {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.force == 0 {
            return Err(invalid("force must be a positive integer"));
        }
        if self.signature().category() != self.category {
            return Err(invalid("signature does not belong to the declared category"));
        }
        match (self.category, self.utility_range) {
            (NormCategory::Utility, None) => Err(invalid("utility norms require a range")),
            (NormCategory::Utility, Some(r)) if r.min.partial_cmp(&r.max) != Some(std::cmp::Ordering::Less) || !r.min.is_finite() || !r.max.is_finite() => {
                Err(invalid("utility range needs min < max"))
            }
            (NormCategory::Utility, Some(_)) => Ok(()),
            (_, Some(_)) => Err(invalid("only utility norms carry a range")),
            (_, None) => Ok(()),
        }
    }
}

/// Norms sorted by strictly decreasing force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoralityChain {
    pub name: String,
    pub norms: Vec<NormSpec>,
}

impl MoralityChain {
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.norms.iter().position(|n| n.id == id)
    }

    pub fn norm(&self, id: &str) -> Option<&NormSpec> {
        self.norms.iter().find(|n| n.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.norms.iter().map(|n| n.id.as_str())
    }
}

/// Orders `norms` by descending force. Input order does not matter.
pub fn build_chain(
    name: impl Into<String>,
    norms: Vec<NormSpec>,
) -> Result<MoralityChain, MoralityError> {
    let name = name.into();
    if norms.is_empty() {
        return Err(MoralityError::EmptyChain(name));
    }
    for norm in &norms {
        norm.validate()?;
    }
    let mut norms = norms;
    norms.sort_by(|a, b| b.force.cmp(&a.force).then_with(|| a.id.cmp(&b.id)));
    for pair in norms.windows(2) {
        if pair[0].force == pair[1].force {
            return Err(MoralityError::DuplicateForce {
                chain: name,
                first: pair[0].id.clone(),
                second: pair[1].id.clone(),
                force: pair[0].force,
            });
        }
    }
    let mut seen = BTreeSet::new();
    for norm in &norms {
        if !seen.insert(norm.id.as_str()) {
            return Err(MoralityError::InvalidNorm {
                id: norm.id.clone(),
                reason: "duplicate id in chain".into(),
            });
        }
    }
    Ok(MoralityChain { name, norms })
}

/// `beta` held both as the float the caller gave and as an exact decimal
/// rational (the shortest decimal that round-trips to the float).
#[derive(Debug, Clone, PartialEq)]
pub struct Beta {
    value: f64,
    exact: BigRational,
}

impl Beta {
    pub fn new(value: f64) -> Result<Self, MoralityError> {
        if !value.is_finite() || value <= 0.0 || value > 1.0 {
            return Err(MoralityError::Domain(format!(
                "beta must lie in (0, 1], got {value}"
            )));
        }
        Ok(Self {
            value,
            exact: decimal_to_rational(value),
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta::new(DEFAULT_BETA).expect("default beta is in range")
    }
}

fn decimal_to_rational(value: f64) -> BigRational {
    // f64 Display never uses exponent notation and round-trips.
    let text = format!("{value}");
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text.as_str(), ""),
    };
    let digits: String = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().expect("decimal digits");
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    BigRational::new(numer, denom)
}

/// Lexicographic weights for a chain, highest-ranked first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainWeights {
    pub beta: f64,
    exact: Vec<BigRational>,
    values: Vec<f64>,
}

impl ChainWeights {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Every weight multiplied by `factor`; the metric is unchanged by this.
    pub fn scaled(&self, factor: f64) -> ChainWeights {
        let exact_factor = decimal_to_rational(factor);
        ChainWeights {
            beta: self.beta,
            exact: self.exact.iter().map(|w| w * &exact_factor).collect(),
            values: self.values.iter().map(|w| w * factor).collect(),
        }
    }

    /// Exact weights rendered as `p` or `p/q`.
    pub fn exact_strings(&self) -> Vec<String> {
        self.exact.iter().map(|w| w.to_string()).collect()
    }
}

impl Serialize for ChainWeights {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("ChainWeights", 3)?;
        s.serialize_field("beta", &self.beta)?;
        s.serialize_field("weights", &self.values)?;
        s.serialize_field("exact", &self.exact_strings())?;
        s.end()
    }
}

/// Weights for a chain of `chain.len()` norms at resolution `beta`.
pub fn compute_weights(chain: &MoralityChain, beta: f64) -> Result<ChainWeights, MoralityError> {
    let beta = Beta::new(beta)?;
    Ok(weights_for_len(chain.len(), &beta))
}

/// Recursion core, usable without a chain.
pub fn weights_for_len(k: usize, beta: &Beta) -> ChainWeights {
    let mut rev: Vec<BigRational> = Vec::with_capacity(k);
    if k > 0 {
        rev.push(BigRational::one());
    }
    let mut tail_sum = BigRational::zero();
    for _ in 1..k {
        tail_sum += rev.last().expect("non-empty").clone();
        let next = (&tail_sum + BigRational::one()) / beta.exact();
        rev.push(next);
    }
    rev.reverse();
    let values = rev
        .iter()
        .map(|w| w.to_f64().unwrap_or(f64::INFINITY))
        .collect();
    ChainWeights {
        beta: beta.value(),
        exact: rev,
        values,
    }
}

/// A policy's measured tendency to exhibit a norm's pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdherenceEstimate {
    pub rho: f64,
    pub sample_count: usize,
    pub exact: bool,
}

impl AdherenceEstimate {
    pub fn exact(rho: f64) -> Self {
        Self {
            rho,
            sample_count: 1,
            exact: true,
        }
    }

    pub fn sampled(rho: f64, sample_count: usize) -> Self {
        Self {
            rho,
            sample_count,
            exact: false,
        }
    }
}

/// `rho` for prescribed norms, `1 - rho` for prohibited ones.
pub fn morality_function(
    norm: &NormSpec,
    adherence: &AdherenceEstimate,
) -> Result<f64, MoralityError> {
    modality_score(norm.modality, adherence.rho)
}

pub fn modality_score(modality: DeonticModality, rho: f64) -> Result<f64, MoralityError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(MoralityError::Domain(format!(
            "adherence must lie in [0, 1], got {rho}"
        )));
    }
    Ok(match modality {
        DeonticModality::Prescribed => rho,
        DeonticModality::Prohibited => 1.0 - rho,
    })
}

/// Weighted mean of per-norm scores. With `subset`, only the listed norms
/// take part and the weights are renormalized over them.
pub fn morality_metric(
    chain: &MoralityChain,
    weights: &ChainWeights,
    per_norm_m: &[f64],
    subset: Option<&BTreeSet<String>>,
) -> Result<f64, MoralityError> {
    if per_norm_m.len() != chain.len() || weights.len() != chain.len() {
        return Err(MoralityError::Domain(format!(
            "expected {} morality values and weights, got {} and {}",
            chain.len(),
            per_norm_m.len(),
            weights.len()
        )));
    }
    if let Some(bad) = per_norm_m.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(MoralityError::Domain(format!(
            "morality values must lie in [0, 1], got {bad}"
        )));
    }
    if let Some(subset) = subset {
        if let Some(missing) = subset.iter().find(|id| chain.index_of(id).is_none()) {
            return Err(MoralityError::UnknownNorm(missing.clone()));
        }
        if subset.is_empty() {
            return Err(MoralityError::Domain("empty norm subset".into()));
        }
    }
    let mut numer = 0.0;
    let mut denom = 0.0;
    for ((norm, &w), &m) in chain.norms.iter().zip(weights.values()).zip(per_norm_m) {
        if subset.is_some_and(|s| !s.contains(&norm.id)) {
            continue;
        }
        numer += w * m;
        denom += w;
    }
    Ok((numer / denom).clamp(0.0, 1.0))
}
