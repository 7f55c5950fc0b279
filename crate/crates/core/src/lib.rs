//! Orlicz-Lorentz norms over atomic measure spaces, composition-operator
//! orbits, and finite-horizon checks of Li-Yorke chaos criteria for
//! composition operators.

// NaN inputs are rejected with `!(x >= 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod measure;
pub mod norm;
pub mod numeric;
pub mod orlicz;
pub mod report;
pub mod scenario;
pub mod transform;
pub mod weight;

pub use criteria::{CriterionId, CriterionVerdict, SetFamily, Status, Subsequence, Witness};
pub use dynamics::{Classification, OrbitReport, Thresholds};
pub use error::{Error, Result};
pub use exec::Execution;
pub use measure::{AtomWeights, AtomicMeasureSpace, IndexDomain, MeasurableSet, RearrangementProfile, SimpleFunction};
pub use norm::{sup_norm, NormContext, NormResult};
pub use orlicz::{Delta2Report, OrliczFunction, OrliczKind};
pub use transform::{Direction, MeasureSequence, Transformation, TransformSpec};
pub use weight::{WeightFunction, WeightKind};
