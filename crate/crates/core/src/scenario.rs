//! Scenario files: a measure space, a Young function, a weight, a
//! transformation, and named sets, vectors and set families, in JSON.
//!
//! ```json
//! {
//!   "name": "s3",
//!   "space": {"domain": "integers", "weights": {"kind": "sym_geometric", "ratio": 0.5}},
//!   "phi": {"kind": "power", "p": 1.0},
//!   "weight": {"kind": "constant", "c": 1.0},
//!   "tau": {"kind": "shift_z", "offset": 1},
//!   "sets": {"A0": [0]},
//!   "vectors": {"blocks1": {"kind": "blocks", "peaks": [[4, 1.0], [16, 1.0]]}},
//!   "defaults": {"horizon": 300, "threshold": 1e6}
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criteria::{SetFamily, Subsequence, DEFAULT_DELTA, DEFAULT_THRESHOLD};
use crate::dynamics::{construct_block_vector, Candidate, DEFAULT_EPS_LOW, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::measure::{int_keys, AtomicMeasureSpace, MeasurableSet, SimpleFunction};
use crate::norm::NormContext;
use crate::orlicz::OrliczFunction;
use crate::transform::{TransformSpec, Transformation};
use crate::weight::WeightFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorSpec {
    /// `sum_j c_j chi_{k_j}` from `[k_j, c_j]` pairs.
    Blocks { peaks: Vec<(i64, f64)> },
    /// Atom-keyed values.
    Values {
        #[serde(with = "int_keys")]
        values: BTreeMap<i64, f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetRef {
    Name(String),
    Atoms(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub sets: Vec<SetRef>,
    pub gamma: Subsequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub horizon: usize,
    pub threshold: f64,
    pub eps_low: f64,
    pub delta: f64,
    /// Set used when `--set` is absent.
    pub set: Option<String>,
    /// Family used when `--family` is absent.
    pub family: Option<String>,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            threshold: DEFAULT_THRESHOLD,
            eps_low: DEFAULT_EPS_LOW,
            delta: DEFAULT_DELTA,
            set: None,
            family: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub space: AtomicMeasureSpace,
    pub phi: OrliczFunction,
    pub weight: WeightFunction,
    pub tau: TransformSpec,
    #[serde(default)]
    pub sets: BTreeMap<String, Vec<i64>>,
    #[serde(default)]
    pub vectors: BTreeMap<String, VectorSpec>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilySpec>,
    #[serde(default)]
    pub defaults: Defaults,
}

/// A validated scenario with every named object resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: ScenarioSpec,
    pub ctx: NormContext,
    pub tau: Transformation,
    pub sets: BTreeMap<String, MeasurableSet>,
    pub vectors: BTreeMap<String, SimpleFunction>,
    pub families: BTreeMap<String, SetFamily>,
    /// SHA-256 of the source bytes, hex.
    pub digest: String,
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    Error::schema(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    parse_scenario_bytes(&bytes, fallback)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    parse_scenario_bytes(text.as_bytes(), None)
}

fn parse_scenario_bytes(bytes: &[u8], fallback_name: Option<String>) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(schema_error)?;
    let digest = hex::encode(Sha256::digest(bytes));
    let name = spec.name.clone().or(fallback_name).unwrap_or_else(|| "scenario".into());
    Scenario::from_spec(spec, name, digest)
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec, name: String, digest: String) -> Result<Self> {
        let space = spec.space.clone();
        let tau = Transformation::from_spec(&spec.tau, &space).map_err(|e| relocate(e, "tau"))?;
        let ctx = NormContext::new(spec.phi, spec.weight.clone(), space);

        let mut sets = BTreeMap::new();
        for (k, atoms) in &spec.sets {
            let set = ctx.space.set(atoms.iter().copied()).map_err(|e| relocate(e, &format!("sets.{k}")))?;
            if set.is_empty() {
                return Err(Error::schema(format!("sets.{k}"), "set must be non-empty"));
            }
            sets.insert(k.clone(), set);
        }

        let mut vectors = BTreeMap::new();
        for (k, v) in &spec.vectors {
            let at = format!("vectors.{k}");
            let g = match v {
                VectorSpec::Blocks { peaks } => construct_block_vector(&ctx.space, peaks),
                VectorSpec::Values { values } => SimpleFunction::from_pairs(values.iter().map(|(&i, &c)| (i, c)))
                    .and_then(|g| ctx.space.check_function(&g).map(|_| g)),
            }
            .map_err(|e| relocate(e, &at))?;
            vectors.insert(k.clone(), g);
        }

        let mut families = BTreeMap::new();
        for (k, f) in &spec.families {
            let at = format!("families.{k}");
            let mut members = Vec::with_capacity(f.sets.len());
            for (i, r) in f.sets.iter().enumerate() {
                let set = match r {
                    SetRef::Name(n) => sets
                        .get(n)
                        .cloned()
                        .ok_or_else(|| Error::schema(format!("{at}.sets[{i}]"), format!("unknown set `{n}`")))?,
                    SetRef::Atoms(atoms) => ctx
                        .space
                        .set(atoms.iter().copied())
                        .map_err(|e| relocate(e, &format!("{at}.sets[{i}]")))?,
                };
                members.push(set);
            }
            let fam = SetFamily::new(&ctx, members, f.gamma.clone()).map_err(|e| relocate(e, &at))?;
            families.insert(k.clone(), fam);
        }

        for (field, name, known) in [
            ("defaults.set", &spec.defaults.set, sets.contains_key(spec.defaults.set.as_deref().unwrap_or(""))),
            (
                "defaults.family",
                &spec.defaults.family,
                families.contains_key(spec.defaults.family.as_deref().unwrap_or("")),
            ),
        ] {
            if let Some(n) = name {
                if !known {
                    return Err(Error::schema(field, format!("unknown name `{n}`")));
                }
            }
        }
        let d = &spec.defaults;
        if !(d.threshold > 0.0 && d.eps_low > 0.0 && d.delta >= 0.0) {
            return Err(Error::schema("defaults", "threshold and eps_low must be positive, delta non-negative"));
        }

        Ok(Self {
            name,
            spec,
            ctx,
            tau,
            sets,
            vectors,
            families,
            digest,
        })
    }

    pub fn set(&self, name: &str) -> Result<&MeasurableSet> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::invalid("set name", format!("scenario has no set `{name}`")))
    }

    pub fn vector(&self, name: &str) -> Result<&SimpleFunction> {
        self.vectors
            .get(name)
            .ok_or_else(|| Error::invalid("vector name", format!("scenario has no vector `{name}`")))
    }

    pub fn family(&self, name: &str) -> Result<&SetFamily> {
        self.families
            .get(name)
            .ok_or_else(|| Error::invalid("family name", format!("scenario has no family `{name}`")))
    }

    /// The requested set, else the default set, else the first set by name.
    pub fn resolve_set(&self, name: Option<&str>) -> Result<(String, &MeasurableSet)> {
        let name = name
            .map(str::to_string)
            .or_else(|| self.spec.defaults.set.clone())
            .or_else(|| self.sets.keys().next().cloned())
            .ok_or_else(|| Error::invalid("set name", "scenario defines no sets"))?;
        let set = self.set(&name)?;
        Ok((name, set))
    }

    pub fn resolve_family(&self, name: Option<&str>) -> Option<(String, &SetFamily)> {
        let name = name
            .map(str::to_string)
            .or_else(|| self.spec.defaults.family.clone())
            .or_else(|| self.families.keys().next().cloned())?;
        self.families.get(&name).map(|f| (name, f))
    }

    /// Named vectors, then indicators of named sets, as search candidates.
    pub fn candidates(&self) -> Vec<Candidate> {
        let vectors = self.vectors.iter().map(|(k, g)| Candidate {
            label: format!("vector:{k}"),
            vector: g.clone(),
        });
        let sets = self.sets.iter().map(|(k, s)| Candidate {
            label: format!("set:{k}"),
            vector: SimpleFunction::indicator(s),
        });
        vectors.chain(sets).collect()
    }
}

/// Prefixes the path of a schema error raised while resolving `at`.
fn relocate(e: Error, at: &str) -> Error {
    match e {
        Error::Schema { path, message } => Error::schema(format!("{at}.{path}"), message),
        Error::InvalidParameter { what, reason } => Error::schema(at, format!("invalid {what}: {reason}")),
        Error::Domain(m) | Error::Precondition(m) => Error::schema(at, m),
        other => other,
    }
}
