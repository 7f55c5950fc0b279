//! Non-increasing weight functions `h` and their exact cumulative integrals
//! `H(u) = int_0^u h(t) dt`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ExactSum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightKind {
    Constant { c: f64 },
    /// `t^alpha` with `-1 < alpha <= 0`.
    Power { alpha: f64 },
    /// `e^{-beta t}`.
    Exponential { beta: f64 },
    /// `values[j]` on `[breakpoints[j-1], breakpoints[j])` with an implicit
    /// leading breakpoint at 0; the last value extends to infinity.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightKind", into = "WeightKind")]
pub struct WeightFunction {
    kind: WeightKind,
}

impl TryFrom<WeightKind> for WeightFunction {
    type Error = Error;

    fn try_from(kind: WeightKind) -> Result<Self> {
        let bad = |reason: String| Err(Error::invalid("weight function", reason));
        match &kind {
            WeightKind::Constant { c } if !(c.is_finite() && *c > 0.0) => {
                return bad(format!("constant c={c} must be > 0"));
            }
            WeightKind::Power { alpha } if !(*alpha > -1.0 && *alpha <= 0.0) => {
                return bad(format!("power alpha={alpha} must lie in (-1, 0]"));
            }
            WeightKind::Exponential { beta } if !(beta.is_finite() && *beta > 0.0) => {
                return bad(format!("exponential beta={beta} must be > 0"));
            }
            WeightKind::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return bad(format!(
                        "piecewise_constant needs {} values for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        values.len()
                    ));
                }
                let mut prev = 0.0;
                for &b in breakpoints {
                    if !(b.is_finite() && b > prev) {
                        return bad("breakpoints must be positive and strictly increasing".into());
                    }
                    prev = b;
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return bad("piecewise values must be positive".into());
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return bad("piecewise values must be non-increasing".into());
                }
            }
            _ => {}
        }
        Ok(Self { kind })
    }
}

impl From<WeightFunction> for WeightKind {
    fn from(w: WeightFunction) -> Self {
        w.kind
    }
}

impl WeightFunction {
    pub fn constant(c: f64) -> Result<Self> {
        WeightKind::Constant { c }.try_into()
    }

    pub fn power(alpha: f64) -> Result<Self> {
        WeightKind::Power { alpha }.try_into()
    }

    pub fn exponential(beta: f64) -> Result<Self> {
        WeightKind::Exponential { beta }.try_into()
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        WeightKind::PiecewiseConstant { breakpoints, values }.try_into()
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, WeightKind::Constant { .. })
    }

    /// Pointwise value `h(t)` for `t > 0`.
    pub fn density(&self, t: f64) -> f64 {
        match &self.kind {
            WeightKind::Constant { c } => *c,
            WeightKind::Power { alpha } => t.powf(*alpha),
            WeightKind::Exponential { beta } => (-beta * t).exp(),
            WeightKind::PiecewiseConstant { breakpoints, values } => {
                let j = breakpoints.partition_point(|&b| b <= t);
                values[j]
            }
        }
    }

    /// `H(u)` in closed form. `H(0) = 0`; `H(+inf)` is `1/beta` for the
    /// exponential weight and `+inf` otherwise.
    pub fn cumulative(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("cumulative weight at u={u} < 0")));
        }
        Ok(self.cumulative_unchecked(u))
    }

    #[inline]
    pub(crate) fn cumulative_unchecked(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        match &self.kind {
            WeightKind::Constant { c } => c * u,
            WeightKind::Power { alpha } => {
                let e = alpha + 1.0;
                u.powf(e) / e
            }
            WeightKind::Exponential { beta } => -(-beta * u).exp_m1() / beta,
            WeightKind::PiecewiseConstant { breakpoints, values } => {
                let mut acc = ExactSum::new();
                let mut start = 0.0;
                for (j, &v) in values.iter().enumerate() {
                    let end = breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
                    if u <= start {
                        break;
                    }
                    acc.add(v * (u.min(end) - start));
                    start = end;
                }
                acc.value()
            }
        }
    }
}
