//! Catalog of Orlicz functions (convex gauges).
//!
//! Values are extended reals represented as `f64` with `f64::INFINITY` as the
//! sentinel for `+inf`; `1/0` is `+inf` by IEEE arithmetic, which is the
//! convention the norm formulas need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

const INVERSE_REL_TOL: f64 = 1e-12;
const INVERSE_MAX_ITER: usize = 200;

/// Tagged catalog description, the serialized form of [`OrliczFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OrliczKind {
    /// `s^p`, `p >= 1`.
    Power { p: f64 },
    /// `s ln(1 + s)`.
    PowerLog,
    /// `e^s - 1`.
    ExpMinusOne,
    /// `-ln(1 - s)` on `[0, 1)`, `+inf` from 1 on.
    NegLog,
    /// `max(0, s - c)^2`, `c > 0`.
    FlatStart { c: f64 },
}

/// A validated Orlicz function from the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrliczKind", into = "OrliczKind")]
pub struct OrliczFunction {
    kind: OrliczKind,
}

impl TryFrom<OrliczKind> for OrliczFunction {
    type Error = Error;

    fn try_from(kind: OrliczKind) -> Result<Self> {
        match kind {
            OrliczKind::Power { p } if !(p.is_finite() && p >= 1.0) => {
                Err(Error::invalid("orlicz function", format!("power exponent p={p} must be >= 1")))
            }
            OrliczKind::FlatStart { c } if !(c.is_finite() && c > 0.0) => {
                Err(Error::invalid("orlicz function", format!("flat_start offset c={c} must be > 0")))
            }
            _ => Ok(Self { kind }),
        }
    }
}

impl From<OrliczFunction> for OrliczKind {
    fn from(f: OrliczFunction) -> Self {
        f.kind
    }
}

/// Diagnostics for the doubling condition `phi(2s) <= M phi(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta2Report {
    /// Analytic catalog flag: the condition holds for every `s > 0`.
    pub satisfies_all_s: bool,
    /// Analytic catalog flag: the condition holds for large `s`.
    pub satisfies_large_s: bool,
    /// `max phi(2s)/phi(s)` over a logarithmic grid in `(0, grid_max]`.
    pub numeric_sup_ratio: f64,
    pub grid_max: f64,
}

impl OrliczFunction {
    pub fn power(p: f64) -> Result<Self> {
        OrliczKind::Power { p }.try_into()
    }

    pub fn power_log() -> Self {
        Self { kind: OrliczKind::PowerLog }
    }

    pub fn exp_minus_one() -> Self {
        Self { kind: OrliczKind::ExpMinusOne }
    }

    pub fn neg_log() -> Self {
        Self { kind: OrliczKind::NegLog }
    }

    pub fn flat_start(c: f64) -> Result<Self> {
        OrliczKind::FlatStart { c }.try_into()
    }

    pub fn kind(&self) -> OrliczKind {
        self.kind
    }

    /// `phi(s)` without the domain check; `s` must be `>= 0`.
    #[inline]
    pub(crate) fn value(&self, s: f64) -> f64 {
        match self.kind {
            OrliczKind::Power { p } => {
                if p == 1.0 {
                    s
                } else if p == 2.0 {
                    s * s
                } else {
                    s.powf(p)
                }
            }
            OrliczKind::PowerLog => s * s.ln_1p(),
            OrliczKind::ExpMinusOne => s.exp_m1(),
            OrliczKind::NegLog => {
                if s >= 1.0 {
                    f64::INFINITY
                } else {
                    -(-s).ln_1p()
                }
            }
            OrliczKind::FlatStart { c } => {
                let d = (s - c).max(0.0);
                d * d
            }
        }
    }

    /// Evaluates `phi(s)` for `s >= 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("orlicz function evaluated at s={s} < 0")));
        }
        Ok(self.value(s))
    }

    /// `(a_phi, b_phi)`: the end of the zero set and the finiteness threshold.
    pub fn a_b_bounds(&self) -> (f64, f64) {
        match self.kind {
            OrliczKind::FlatStart { c } => (c, f64::INFINITY),
            OrliczKind::NegLog => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Generalized inverse `inf{s >= 0 : phi(s) >= y}`.
    ///
    /// At `y = 0` this returns `a_phi` (the right limit), and at `y = +inf`
    /// it returns `b_phi`, which is itself `+inf` unless the gauge jumps.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("orlicz inverse evaluated at y={y} < 0")));
        }
        let (a, b) = self.a_b_bounds();
        if y == 0.0 {
            return Ok(a);
        }
        if y == f64::INFINITY {
            return Ok(b);
        }
        Ok(match self.kind {
            OrliczKind::Power { p } => {
                if p == 1.0 {
                    y
                } else if p == 2.0 {
                    y.sqrt()
                } else {
                    y.powf(p.recip())
                }
            }
            OrliczKind::ExpMinusOne => y.ln_1p(),
            OrliczKind::NegLog => -(-y).exp_m1(),
            OrliczKind::FlatStart { c } => c + y.sqrt(),
            OrliczKind::PowerLog => self.inverse_by_bisection(y),
        })
    }

    fn inverse_by_bisection(&self, y: f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.value(hi) < y {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        bisect(|s| self.value(s) >= y, lo, hi, INVERSE_REL_TOL, INVERSE_MAX_ITER).hi
    }

    /// Doubling constant `M` when the catalog knows one valid for all `s > 0`.
    pub fn delta2_constant(&self) -> Option<f64> {
        match self.kind {
            OrliczKind::Power { p } => Some(2f64.powf(p)),
            // 2 ln(1+2s)/ln(1+s) decreases from 4 (s -> 0) to 2 (s -> inf)
            OrliczKind::PowerLog => Some(4.0),
            _ => None,
        }
    }

    pub fn delta2_report(&self, grid_max: f64) -> Result<Delta2Report> {
        if !(grid_max > 0.0 && grid_max.is_finite()) {
            return Err(Error::Domain(format!("grid_max={grid_max} must be positive and finite")));
        }
        const POINTS: usize = 4001;
        const DECADES: f64 = 9.0;
        let lo = grid_max * 10f64.powf(-DECADES);
        let step = (grid_max / lo).ln() / (POINTS - 1) as f64;
        let mut sup = 0.0f64;
        for i in 0..POINTS {
            let s = if i == POINTS - 1 {
                grid_max
            } else {
                lo * (step * i as f64).exp()
            };
            let base = self.value(s);
            if base == 0.0 {
                continue;
            }
            sup = sup.max(self.value(2.0 * s) / base);
        }
        let satisfies_all_s = self.delta2_constant().is_some();
        let satisfies_large_s = satisfies_all_s || matches!(self.kind, OrliczKind::FlatStart { .. });
        Ok(Delta2Report {
            satisfies_all_s,
            satisfies_large_s,
            numeric_sup_ratio: sup,
            grid_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog() -> Vec<OrliczFunction> {
        vec![
            OrliczFunction::power(1.0).unwrap(),
            OrliczFunction::power(1.5).unwrap(),
            OrliczFunction::power(2.0).unwrap(),
            OrliczFunction::power(3.0).unwrap(),
            OrliczFunction::power_log(),
            OrliczFunction::exp_minus_one(),
            OrliczFunction::neg_log(),
            OrliczFunction::flat_start(1.0).unwrap(),
            OrliczFunction::flat_start(0.25).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        let sq = OrliczFunction::power(2.0).unwrap();
        assert_eq!(sq.eval(0.0).unwrap(), 0.0);
        assert_eq!(sq.eval(3.0).unwrap(), 9.0);
        assert_eq!(OrliczFunction::neg_log().eval(1.0).unwrap(), f64::INFINITY);
        let e = OrliczFunction::exp_minus_one().eval(1.0).unwrap();
        assert!((e - 1.718281828459045).abs() < 1e-15);
        assert!(matches!(sq.eval(-1.0), Err(Error::Domain(_))));
        for f in catalog() {
            assert_eq!(f.eval(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn infinite_exactly_from_b_phi() {
        for f in catalog() {
            let (_, b) = f.a_b_bounds();
            for s in [0.0, 0.5, 0.999, 1.0, 2.0, 100.0] {
                assert_eq!(f.value(s).is_infinite(), s >= b, "{f:?} at {s}");
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let sq = OrliczFunction::power(2.0).unwrap();
        assert_eq!(sq.inverse(4.0).unwrap(), 2.0);
        let e = OrliczFunction::exp_minus_one();
        assert!((e.inverse(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(OrliczFunction::neg_log().inverse(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(sq.inverse(f64::INFINITY).unwrap(), f64::INFINITY);
        assert_eq!(sq.inverse(0.0).unwrap(), 0.0);
        assert_eq!(OrliczFunction::flat_start(1.0).unwrap().inverse(0.0).unwrap(), 1.0);
        assert!(sq.inverse(-0.5).is_err());
    }

    #[test]
    fn power_log_inverse_against_independent_bisection() {
        // oracle: plain interval halving on s ln(1+s) - y, written out here
        let y = 2.0 * 3f64.ln();
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * (1.0 + mid).ln() < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((hi - 2.0).abs() < 1e-14);
        let got = OrliczFunction::power_log().inverse(y).unwrap();
        assert!((got - hi).abs() <= 1e-12 * hi, "{got} vs {hi}");
    }

    #[test]
    fn a_b_bounds_catalog() {
        assert_eq!(OrliczFunction::power(2.0).unwrap().a_b_bounds(), (0.0, f64::INFINITY));
        assert_eq!(OrliczFunction::flat_start(1.0).unwrap().a_b_bounds(), (1.0, f64::INFINITY));
        assert_eq!(OrliczFunction::neg_log().a_b_bounds(), (0.0, 1.0));
    }

    #[test]
    fn delta2_examples() {
        let r = OrliczFunction::power(2.0).unwrap().delta2_report(1e3).unwrap();
        assert!(r.satisfies_all_s);
        assert!((r.numeric_sup_ratio - 4.0).abs() < 1e-9);

        let r = OrliczFunction::power(1.0).unwrap().delta2_report(10.0).unwrap();
        assert!((r.numeric_sup_ratio - 2.0).abs() < 1e-9);

        let r = OrliczFunction::exp_minus_one().delta2_report(50.0).unwrap();
        assert!(!r.satisfies_all_s);
        // (e^{2s}-1)/(e^s-1) = e^s + 1 at the grid end
        assert!(r.numeric_sup_ratio >= 50f64.exp());

        let small = OrliczFunction::exp_minus_one().delta2_report(5.0).unwrap();
        assert!(small.numeric_sup_ratio < r.numeric_sup_ratio);

        let fs = OrliczFunction::flat_start(1.0).unwrap().delta2_report(10.0).unwrap();
        assert!(!fs.satisfies_all_s && fs.satisfies_large_s);
        assert!(OrliczFunction::power(2.0).unwrap().delta2_report(0.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(OrliczFunction::power(0.5).is_err());
        assert!(OrliczFunction::power(f64::NAN).is_err());
        assert!(OrliczFunction::flat_start(0.0).is_err());
        let parsed: std::result::Result<OrliczFunction, _> =
            serde_json::from_str(r#"{"kind":"power","p":0.3}"#);
        assert!(parsed.is_err());
        let ok: OrliczFunction = serde_json::from_str(r#"{"kind":"power","p":2}"#).unwrap();
        assert_eq!(ok, OrliczFunction::power(2.0).unwrap());
        assert_eq!(serde_json::to_string(&OrliczFunction::neg_log()).unwrap(), r#"{"kind":"neg_log"}"#);
    }

    fn any_phi() -> impl Strategy<Value = OrliczFunction> {
        prop_oneof![
            (1.0f64..4.0).prop_map(|p| OrliczFunction::power(p).unwrap()),
            Just(OrliczFunction::power_log()),
            Just(OrliczFunction::exp_minus_one()),
            Just(OrliczFunction::neg_log()),
            (0.01f64..3.0).prop_map(|c| OrliczFunction::flat_start(c).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn monotone_and_midpoint_convex(f in any_phi(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let (_, b) = f.a_b_bounds();
            let top = if b.is_finite() { b } else { 20.0 };
            let (s1, s2) = if u <= v { (u * top, v * top) } else { (v * top, u * top) };
            prop_assume!(s2 < b);
            let (p1, p2) = (f.value(s1), f.value(s2));
            prop_assert!(p1 <= p2);
            let mid = f.value(0.5 * (s1 + s2));
            prop_assert!(mid <= 0.5 * (p1 + p2) + 1e-12 * (1.0 + p2));
        }

        #[test]
        fn inverse_round_trip(f in any_phi(), y in 1e-6f64..1e6) {
            // 1 - s = e^{-y} loses relative precision near s = 1
            let y = if f.kind() == OrliczKind::NegLog { y.min(10.0) } else { y };
            let s = f.inverse(y).unwrap();
            let back = f.value(s);
            prop_assert!((back - y).abs() <= 1e-9 * y.max(1.0), "phi(inv({})) = {}", y, back);
        }

        #[test]
        fn inverse_is_monotone(f in any_phi(), a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.inverse(lo).unwrap() <= f.inverse(hi).unwrap());
        }

        #[test]
        fn power_delta2_ratio_is_two_to_the_p(p in 1.0f64..4.0, s in 1e-6f64..1e3) {
            let f = OrliczFunction::power(p).unwrap();
            let ratio = f.value(2.0 * s) / f.value(s);
            prop_assert!((ratio - 2f64.powf(p)).abs() <= 1e-9);
        }
    }
}
