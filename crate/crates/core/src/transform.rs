//! Self-maps of the atom index set with exact n-fold preimages and forward
//! images.
//!
//! Every atom weight is positive, so the only null set is the empty set and
//! every total map is non-singular.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure::{AtomicMeasureSpace, IndexDomain, MeasurableSet, SimpleFunction};

/// Serialized form. Finite-map tables accept atom indices as JSON numbers or
/// strings: `{"kind":"finite_map","table":{"0":"1","1":"0"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    FiniteMap {
        #[serde(with = "crate::measure::int_keys")]
        table: BTreeMap<i64, AtomRef>,
    },
    ShiftZ { offset: i64 },
    ShiftN,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomRef {
    Index(i64),
    Text(#[serde(with = "atom_text")] i64),
}

mod atom_text {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &i64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        let s = String::deserialize(d)?;
        s.trim().parse().map_err(D::Error::custom)
    }
}

impl AtomRef {
    pub fn index(self) -> i64 {
        match self {
            AtomRef::Index(i) | AtomRef::Text(i) => i,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `mu(tau^{-n}(A))`
    Preimage,
    /// `mu(tau^{n}(A))`
    Forward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    FiniteMap { table: Vec<i64>, inverse: Vec<Vec<i64>> },
    ShiftZ { offset: i64 },
    ShiftN,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformation {
    kind: Kind,
    domain: IndexDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityProbe {
    pub injective: bool,
    /// Two distinct atoms with the same image.
    pub counterexample: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSequence {
    pub direction: Direction,
    pub base_set: MeasurableSet,
    /// `values[n]` is the measure of the image at step `n`.
    pub values: Vec<f64>,
    /// Number of atoms in the image at step `n`; zero marks a null set.
    pub cardinalities: Vec<usize>,
}

impl MeasureSequence {
    pub fn is_null(&self, n: usize) -> bool {
        self.cardinalities[n] == 0
    }
}

impl Transformation {
    pub fn from_spec(spec: &TransformSpec, space: &AtomicMeasureSpace) -> Result<Self> {
        match spec {
            TransformSpec::FiniteMap { table } => {
                let IndexDomain::Finite(n) = space.domain() else {
                    return Err(Error::schema("tau", "finite_map needs a finite domain"));
                };
                let mut dense = vec![None; n];
                for (&from, to) in table {
                    if !space.domain().contains(from) {
                        return Err(Error::schema(format!("tau.table.{from}"), "atom outside the domain"));
                    }
                    dense[from as usize] = Some(to.index());
                }
                let dense = dense
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| v.ok_or_else(|| Error::schema("tau.table", format!("atom {i} has no image"))))
                    .collect::<Result<Vec<_>>>()?;
                Self::finite_map(dense, space)
            }
            TransformSpec::ShiftZ { offset } => Self::shift_z(*offset, space),
            TransformSpec::ShiftN => Self::shift_n(space),
            TransformSpec::Identity => Ok(Self::identity(space)),
        }
    }

    /// `i -> table[i]` on a finite domain; the table must be total.
    pub fn finite_map(table: Vec<i64>, space: &AtomicMeasureSpace) -> Result<Self> {
        let IndexDomain::Finite(n) = space.domain() else {
            return Err(Error::schema("tau", "finite_map needs a finite domain"));
        };
        if table.len() != n {
            return Err(Error::schema("tau.table", format!("expected {n} entries, got {}", table.len())));
        }
        let mut inverse = vec![Vec::new(); n];
        for (i, &j) in table.iter().enumerate() {
            if !space.domain().contains(j) {
                return Err(Error::schema(format!("tau.table.{i}"), format!("image {j} outside the domain")));
            }
            inverse[j as usize].push(i as i64);
        }
        Ok(Self {
            kind: Kind::FiniteMap { table, inverse },
            domain: space.domain(),
        })
    }

    /// `i -> i + offset` on the integers.
    pub fn shift_z(offset: i64, space: &AtomicMeasureSpace) -> Result<Self> {
        if space.domain() != IndexDomain::Integers {
            return Err(Error::schema("tau", "shift_z needs the integers domain"));
        }
        Ok(Self {
            kind: Kind::ShiftZ { offset },
            domain: IndexDomain::Integers,
        })
    }

    /// `n -> n + 1` on the naturals.
    pub fn shift_n(space: &AtomicMeasureSpace) -> Result<Self> {
        if space.domain() != IndexDomain::Naturals {
            return Err(Error::schema("tau", "shift_n needs the naturals domain"));
        }
        Ok(Self {
            kind: Kind::ShiftN,
            domain: IndexDomain::Naturals,
        })
    }

    pub fn identity(space: &AtomicMeasureSpace) -> Self {
        Self {
            kind: Kind::Identity,
            domain: space.domain(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, Kind::Identity)
    }

    /// Offset of a shift, if this is one (`shift_n` counts as offset 1).
    pub fn shift_offset(&self) -> Option<i64> {
        match self.kind {
            Kind::ShiftZ { offset } => Some(offset),
            Kind::ShiftN => Some(1),
            _ => None,
        }
    }

    pub fn domain(&self) -> IndexDomain {
        self.domain
    }

    pub fn injectivity_probe(&self) -> InjectivityProbe {
        if let Kind::FiniteMap { inverse, .. } = &self.kind {
            if let Some(fiber) = inverse.iter().find(|f| f.len() > 1) {
                return InjectivityProbe {
                    injective: false,
                    counterexample: Some((fiber[0], fiber[1])),
                };
            }
        }
        InjectivityProbe {
            injective: true,
            counterexample: None,
        }
    }

    pub fn is_injective(&self) -> bool {
        self.injectivity_probe().injective
    }

    pub fn require_injective(&self) -> Result<()> {
        let probe = self.injectivity_probe();
        match probe.counterexample {
            Some((a, b)) if !probe.injective => Err(Error::Precondition(format!(
                "forward images need an injective map; atoms {a} and {b} share an image"
            ))),
            _ => Ok(()),
        }
    }

    /// Always true here: weights are positive, so the only null set is the
    /// empty set, whose preimage under a total map is empty.
    pub fn nonsingularity_probe(&self) -> bool {
        true
    }

    fn translate(a: i64, by: i64) -> i64 {
        a.checked_add(by).expect("atom index overflow")
    }

    fn scaled_offset(offset: i64, n: u64) -> i64 {
        i64::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(offset))
            .expect("shift offset overflow")
    }

    /// `{i : tau(i) in A}`.
    fn preimage_once(&self, set: &MeasurableSet) -> MeasurableSet {
        self.preimage_set(set, 1)
    }

    fn image_once(&self, set: &MeasurableSet) -> MeasurableSet {
        match &self.kind {
            Kind::FiniteMap { table, .. } => set.iter().map(|i| table[i as usize]).collect(),
            _ => self.translated(set, self.shift_offset().unwrap_or(0)),
        }
    }

    fn translated(&self, set: &MeasurableSet, by: i64) -> MeasurableSet {
        set.iter()
            .map(|a| Self::translate(a, by))
            .filter(|&x| self.domain.contains(x))
            .collect()
    }

    /// `tau^{-n}(A) = {i : tau^n(i) in A}`.
    pub fn preimage_set(&self, set: &MeasurableSet, n: u64) -> MeasurableSet {
        if n == 0 {
            return set.clone();
        }
        match &self.kind {
            Kind::Identity => set.clone(),
            Kind::ShiftZ { offset } => self.translated(set, -Self::scaled_offset(*offset, n)),
            Kind::ShiftN => self.translated(set, -Self::scaled_offset(1, n)),
            Kind::FiniteMap { inverse, .. } => {
                let mut current = set.clone();
                for _ in 0..n {
                    if current.is_empty() {
                        break;
                    }
                    current = current.iter().flat_map(|j| inverse[j as usize].iter().copied()).collect();
                }
                current
            }
        }
    }

    /// `tau^n(A)`; negative `n` means the preimage `tau^{-|n|}(A)`. Positive
    /// `n` needs an injective map.
    pub fn forward_image_set(&self, set: &MeasurableSet, n: i64) -> Result<MeasurableSet> {
        if n < 0 {
            return Ok(self.preimage_set(set, n.unsigned_abs()));
        }
        if n == 0 {
            return Ok(set.clone());
        }
        self.require_injective()?;
        Ok(match &self.kind {
            Kind::FiniteMap { .. } => {
                let mut current = set.clone();
                for _ in 0..n {
                    current = self.image_once(&current);
                }
                current
            }
            Kind::Identity => set.clone(),
            _ => self.translated(set, Self::scaled_offset(self.shift_offset().unwrap_or(0), n as u64)),
        })
    }

    pub fn measure_sequence(
        &self,
        space: &AtomicMeasureSpace,
        set: &MeasurableSet,
        direction: Direction,
        horizon: usize,
    ) -> Result<MeasureSequence> {
        self.measure_sequence_with(Execution::default(), space, set, direction, horizon)
    }

    /// `mu(tau^{-n}(A))` or `mu(tau^n(A))` for `n = 0..=horizon`.
    pub fn measure_sequence_with(
        &self,
        exec: Execution,
        space: &AtomicMeasureSpace,
        set: &MeasurableSet,
        direction: Direction,
        horizon: usize,
    ) -> Result<MeasureSequence> {
        if set.is_empty() {
            return Err(Error::Precondition("measure sequence needs a non-null base set".into()));
        }
        if direction == Direction::Forward {
            self.require_injective()?;
        }
        let sets: Vec<MeasurableSet> = match self.kind {
            // iterated one step at a time; closed forms below go straight to step n
            Kind::FiniteMap { .. } => {
                let mut out = Vec::with_capacity(horizon + 1);
                let mut current = set.clone();
                for _ in 0..=horizon {
                    let next = match direction {
                        Direction::Preimage => self.preimage_once(&current),
                        Direction::Forward => self.image_once(&current),
                    };
                    out.push(std::mem::replace(&mut current, next));
                }
                out
            }
            _ => exec.map_indices(horizon + 1, |n| match direction {
                Direction::Preimage => self.preimage_set(set, n as u64),
                Direction::Forward => self
                    .forward_image_set(set, n as i64)
                    .expect("injectivity checked above"),
            }),
        };
        Ok(MeasureSequence {
            direction,
            base_set: set.clone(),
            values: sets.iter().map(|s| space.measure(s)).collect(),
            cardinalities: sets.iter().map(MeasurableSet::len).collect(),
        })
    }

    /// `g o tau^n`: value `g(a)` on `tau^{-n}({a})` for each support atom `a`.
    pub fn compose_power(&self, g: &SimpleFunction, n: u64) -> SimpleFunction {
        if n == 0 {
            return g.clone();
        }
        let mut out = BTreeMap::new();
        match &self.kind {
            Kind::FiniteMap { table, .. } => {
                for x in 0..table.len() as i64 {
                    let mut y = x;
                    for _ in 0..n {
                        y = table[y as usize];
                    }
                    let v = g.get(y);
                    if v != 0.0 {
                        out.insert(x, v);
                    }
                }
            }
            _ => {
                for (a, v) in g.iter() {
                    for x in self.preimage_set(&MeasurableSet::from_atoms([a]), n).iter() {
                        out.insert(x, v);
                    }
                }
            }
        }
        SimpleFunction::from_map(out)
    }

    /// `g o tau`, one step.
    pub fn compose(&self, g: &SimpleFunction) -> SimpleFunction {
        self.compose_power(g, 1)
    }
}
