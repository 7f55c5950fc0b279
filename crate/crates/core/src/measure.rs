//! Atomic sigma-finite measure spaces, finitely supported functions on them,
//! distribution functions and non-increasing rearrangements.
//!
//! Atoms are indexed by `i64`. Every measure of a finite atom set is a
//! correctly rounded sum ([`exact_sum`]), so the same set always has the same
//! measure no matter which code path summed it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{exact_sum, ExactSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    /// Atoms `0..size`.
    Finite,
    /// Atoms `0, 1, 2, ...`.
    Naturals,
    Integers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexDomain {
    Finite(usize),
    Naturals,
    Integers,
}

impl IndexDomain {
    pub fn contains(&self, i: i64) -> bool {
        match *self {
            IndexDomain::Finite(n) => i >= 0 && (i as u64) < n as u64,
            IndexDomain::Naturals => i >= 0,
            IndexDomain::Integers => true,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, IndexDomain::Finite(_))
    }
}

/// Closed-form atom weight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomWeights {
    /// One weight per atom of a finite domain.
    Explicit { values: Vec<f64> },
    /// `ratio^i` (meant for the naturals).
    Geometric { ratio: f64 },
    /// `ratio^|i|` (meant for the integers).
    SymGeometric { ratio: f64 },
    Constant { value: f64 },
    /// `ratio^|i|` on even atoms, `odd` on odd atoms.
    Alternating { ratio: f64, odd: f64 },
    /// Listed weights, everything else from `tail`.
    Table {
        #[serde(with = "int_keys")]
        entries: BTreeMap<i64, f64>,
        tail: Box<AtomWeights>,
    },
}

impl AtomWeights {
    fn validate(&self, domain: IndexDomain, path: &str) -> Result<()> {
        let positive = |v: f64, field: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::schema(format!("{path}.{field}"), format!("weight {v} must be positive and finite")))
            }
        };
        let ratio_ok = |r: f64| -> Result<()> {
            if r > 0.0 && r < 1.0 {
                Ok(())
            } else {
                Err(Error::schema(format!("{path}.ratio"), format!("ratio {r} must lie in (0, 1)")))
            }
        };
        match self {
            AtomWeights::Explicit { values } => {
                let IndexDomain::Finite(n) = domain else {
                    return Err(Error::schema(path, "explicit weights need a finite domain"));
                };
                if values.len() != n {
                    return Err(Error::schema(
                        format!("{path}.values"),
                        format!("expected {n} weights, got {}", values.len()),
                    ));
                }
                for (i, &v) in values.iter().enumerate() {
                    positive(v, &format!("values[{i}]"))?;
                }
            }
            AtomWeights::Geometric { ratio } | AtomWeights::SymGeometric { ratio } => ratio_ok(*ratio)?,
            AtomWeights::Constant { value } => positive(*value, "value")?,
            AtomWeights::Alternating { ratio, odd } => {
                ratio_ok(*ratio)?;
                positive(*odd, "odd")?;
            }
            AtomWeights::Table { entries, tail } => {
                for (&i, &v) in entries {
                    if !domain.contains(i) {
                        return Err(Error::schema(format!("{path}.entries.{i}"), "atom outside the domain"));
                    }
                    positive(v, &format!("entries.{i}"))?;
                }
                if matches!(**tail, AtomWeights::Explicit { .. }) {
                    return Err(Error::schema(format!("{path}.tail"), "tail must be a formula"));
                }
                tail.validate(domain, &format!("{path}.tail"))?;
            }
        }
        Ok(())
    }

    fn weight(&self, i: i64) -> f64 {
        match self {
            AtomWeights::Explicit { values } => values[i as usize],
            AtomWeights::Geometric { ratio } => {
                if i >= 0 {
                    pow_abs(*ratio, i)
                } else {
                    pow_abs(ratio.recip(), i)
                }
            }
            AtomWeights::SymGeometric { ratio } => pow_abs(*ratio, i),
            AtomWeights::Constant { value } => *value,
            AtomWeights::Alternating { ratio, odd } => {
                if i % 2 == 0 {
                    pow_abs(*ratio, i)
                } else {
                    *odd
                }
            }
            AtomWeights::Table { entries, tail } => entries.get(&i).copied().unwrap_or_else(|| tail.weight(i)),
        }
    }

    fn total(&self, domain: IndexDomain) -> f64 {
        match (self, domain) {
            (_, IndexDomain::Finite(n)) => exact_sum((0..n as i64).map(|i| self.weight(i))),
            (AtomWeights::Constant { .. } | AtomWeights::Alternating { .. }, _) => f64::INFINITY,
            (AtomWeights::Geometric { ratio } | AtomWeights::SymGeometric { ratio }, d) => {
                let one_side = 1.0 / (1.0 - ratio);
                match (self, d) {
                    (AtomWeights::Geometric { .. }, IndexDomain::Naturals) => one_side,
                    (AtomWeights::Geometric { .. }, _) => f64::INFINITY,
                    (_, IndexDomain::Naturals) => one_side,
                    _ => 2.0 * one_side - 1.0,
                }
            }
            (AtomWeights::Table { entries, tail }, d) => {
                let tail_total = tail.total(d);
                if tail_total.is_infinite() {
                    return f64::INFINITY;
                }
                let mut acc = ExactSum::new();
                acc.add(tail_total);
                for (&i, &v) in entries {
                    acc.add(v);
                    acc.add(-tail.weight(i));
                }
                acc.value()
            }
            (AtomWeights::Explicit { .. }, _) => unreachable!("explicit weights are finite-only"),
        }
    }
}

/// Maps keyed by atom index, written as JSON objects with string keys.
///
/// Needed inside internally tagged enums, where serde buffers the input and
/// no longer parses string keys as integers on its own.
pub(crate) mod int_keys {
    use std::collections::BTreeMap;

    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, V: Serialize>(map: &BTreeMap<i64, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D, V>(d: D) -> Result<BTreeMap<i64, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        BTreeMap::<String, V>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<i64>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("atom key `{k}` is not an integer")))
            })
            .collect()
    }
}

/// `ratio^|i|` by repeated squaring; exact for dyadic ratios until underflow.
fn pow_abs(ratio: f64, i: i64) -> f64 {
    let e = i.unsigned_abs();
    if e <= i32::MAX as u64 {
        ratio.powi(e as i32)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceSpec {
    domain: DomainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    weights: AtomWeights,
}

/// An atomic measure space with strictly positive atom weights.
///
/// Weights come from closed-form families; for far atoms of the geometric
/// families the `f64` value underflows to zero even though the atom's true
/// weight is positive. Emptiness of a set, not its rounded measure, is what
/// decides whether it is null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpec", into = "SpaceSpec")]
pub struct AtomicMeasureSpace {
    domain: IndexDomain,
    weights: AtomWeights,
}

impl TryFrom<SpaceSpec> for AtomicMeasureSpace {
    type Error = Error;

    fn try_from(spec: SpaceSpec) -> Result<Self> {
        let domain = match spec.domain {
            DomainKind::Finite => {
                let n = match (spec.size, &spec.weights) {
                    (Some(n), _) => n,
                    (None, AtomWeights::Explicit { values }) => values.len(),
                    (None, _) => return Err(Error::schema("space.size", "finite domain needs a size")),
                };
                if n == 0 {
                    return Err(Error::schema("space.size", "finite domain must have at least one atom"));
                }
                IndexDomain::Finite(n)
            }
            DomainKind::Naturals => IndexDomain::Naturals,
            DomainKind::Integers => IndexDomain::Integers,
        };
        AtomicMeasureSpace::new(domain, spec.weights)
    }
}

impl From<AtomicMeasureSpace> for SpaceSpec {
    fn from(s: AtomicMeasureSpace) -> Self {
        let (domain, size) = match s.domain {
            IndexDomain::Finite(n) => (DomainKind::Finite, Some(n)),
            IndexDomain::Naturals => (DomainKind::Naturals, None),
            IndexDomain::Integers => (DomainKind::Integers, None),
        };
        SpaceSpec {
            domain,
            size,
            weights: s.weights,
        }
    }
}

impl AtomicMeasureSpace {
    pub fn new(domain: IndexDomain, weights: AtomWeights) -> Result<Self> {
        weights.validate(domain, "space.weights")?;
        Ok(Self { domain, weights })
    }

    /// Finite space with the given atom weights.
    pub fn finite(weights: Vec<f64>) -> Result<Self> {
        Self::new(IndexDomain::Finite(weights.len()), AtomWeights::Explicit { values: weights })
    }

    /// The integers with `mu_i = ratio^|i|`.
    pub fn sym_geometric(ratio: f64) -> Result<Self> {
        Self::new(IndexDomain::Integers, AtomWeights::SymGeometric { ratio })
    }

    /// Counting measure on the naturals.
    pub fn counting_naturals() -> Self {
        Self {
            domain: IndexDomain::Naturals,
            weights: AtomWeights::Constant { value: 1.0 },
        }
    }

    pub fn domain(&self) -> IndexDomain {
        self.domain
    }

    pub fn weights(&self) -> &AtomWeights {
        &self.weights
    }

    /// `mu({i})`; the atom must belong to the domain.
    pub fn weight(&self, i: i64) -> f64 {
        debug_assert!(self.domain.contains(i));
        self.weights.weight(i)
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.total(self.domain)
    }

    pub fn has_finite_total_measure(&self) -> bool {
        self.total_measure().is_finite()
    }

    pub fn set<I: IntoIterator<Item = i64>>(&self, atoms: I) -> Result<MeasurableSet> {
        let atoms: BTreeSet<i64> = atoms.into_iter().collect();
        if let Some(bad) = atoms.iter().find(|&&i| !self.domain.contains(i)) {
            return Err(Error::Domain(format!("atom {bad} is outside the index domain")));
        }
        Ok(MeasurableSet(atoms))
    }

    pub fn check_function(&self, g: &SimpleFunction) -> Result<()> {
        match g.support().find(|&i| !self.domain.contains(i)) {
            Some(bad) => Err(Error::Domain(format!("atom {bad} is outside the index domain"))),
            None => Ok(()),
        }
    }

    pub fn measure(&self, set: &MeasurableSet) -> f64 {
        exact_sum(set.iter().map(|i| self.weight(i)))
    }

    /// `mu{x : |g(x)| > lam}`.
    pub fn distribution(&self, g: &SimpleFunction, lam: f64) -> Result<f64> {
        if !(lam >= 0.0) {
            return Err(Error::Domain(format!("distribution function at lambda={lam} < 0")));
        }
        Ok(exact_sum(
            g.iter().filter(|(_, v)| v.abs() > lam).map(|(i, _)| self.weight(i)),
        ))
    }

    /// The non-increasing rearrangement of `|g|` as an exact step profile.
    pub fn rearrangement(&self, g: &SimpleFunction) -> RearrangementProfile {
        let mut atoms: Vec<(f64, f64)> = g.iter().map(|(i, v)| (v.abs(), self.weight(i))).collect();
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut steps: Vec<Step> = Vec::new();
        let mut acc = ExactSum::new();
        let mut k = 0;
        while k < atoms.len() {
            let value = atoms[k].0;
            while k < atoms.len() && atoms[k].0 == value {
                acc.add(atoms[k].1);
                k += 1;
            }
            let end = acc.value();
            let prev = steps.last().map_or(0.0, |s| s.end);
            // a step whose weights vanish in f64 has no length
            if end > prev {
                steps.push(Step { value, end });
            }
        }
        RearrangementProfile { steps }
    }
}

/// A finite set of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurableSet(BTreeSet<i64>);

impl MeasurableSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a set without a domain check.
    pub fn from_atoms<I: IntoIterator<Item = i64>>(atoms: I) -> Self {
        Self(atoms.into_iter().collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, i: i64) -> bool {
        self.0.contains(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().copied()
    }

    pub fn atoms(&self) -> &BTreeSet<i64> {
        &self.0
    }
}

impl FromIterator<i64> for MeasurableSet {
    fn from_iter<T: IntoIterator<Item = i64>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A finitely supported real function on the atoms. Zero values are never
/// stored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimpleFunction(BTreeMap<i64, f64>);

impl SimpleFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Non-finite values are rejected; zeros are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (i64, f64)>>(pairs: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, v) in pairs {
            if !v.is_finite() {
                return Err(Error::Domain(format!("value {v} at atom {i} is not finite")));
            }
            if v != 0.0 {
                map.insert(i, v);
            }
        }
        Ok(Self(map))
    }

    pub fn indicator(set: &MeasurableSet) -> Self {
        Self(set.iter().map(|i| (i, 1.0)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: i64) -> f64 {
        self.0.get(&i).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.0.iter().map(|(&i, &v)| (i, v))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.keys().copied()
    }

    pub fn support_set(&self) -> MeasurableSet {
        MeasurableSet(self.0.keys().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `max |g|`, 0 for the zero function.
    pub fn sup_norm(&self) -> f64 {
        self.0.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|(&i, &v)| (i, c * v)).filter(|&(_, v)| v != 0.0).collect())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &SimpleFunction) -> Self {
        let mut out = self.0.clone();
        for (&i, &v) in &other.0 {
            *out.entry(i).or_insert(0.0) += c * v;
        }
        out.retain(|_, v| *v != 0.0);
        Self(out)
    }

    pub fn sub(&self, other: &SimpleFunction) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub(crate) fn from_map(map: BTreeMap<i64, f64>) -> Self {
        debug_assert!(map.values().all(|v| *v != 0.0));
        Self(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step {
    pub value: f64,
    /// Right endpoint `M_j`; the step covers `[M_{j-1}, M_j)`.
    pub end: f64,
}

/// `g*` as a step function: values strictly decrease, endpoints strictly
/// increase, and `g* = 0` past the last endpoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RearrangementProfile {
    pub steps: Vec<Step>,
}

impl RearrangementProfile {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Measure of the support.
    pub fn total_length(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.end)
    }

    /// `g*(t)` for `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        let j = self.steps.partition_point(|s| s.end <= t);
        self.steps.get(j).map_or(0.0, |s| s.value)
    }

    /// Lebesgue measure of `{t : g*(t) > lam}`.
    pub fn measure_above(&self, lam: f64) -> f64 {
        let count = self.steps.partition_point(|s| s.value > lam);
        if count == 0 {
            0.0
        } else {
            self.steps[count - 1].end
        }
    }
}
