//! Orbits of the composition operator `C g = g o tau` and finite-horizon
//! witnesses for semi-irregular and irregular vectors and Li-Yorke pairs.
//!
//! A definition that quantifies over the whole orbit (`liminf = 0`,
//! `limsup > 0`) is replaced by a witness on `0..=horizon`: the orbit must
//! first dip below `eps_low` and afterwards climb back above the high
//! threshold. An orbit that starts high and only decays is not a witness.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure::{AtomicMeasureSpace, IndexDomain, SimpleFunction};
use crate::norm::NormContext;
use crate::transform::Transformation;

pub const DEFAULT_EPS_LOW: f64 = 1e-6;
pub const DEFAULT_SEMI_FACTOR: f64 = 0.1;
pub const DEFAULT_M_HIGH_IRR: f64 = 1e6;
pub const DEFAULT_HORIZON: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub eps_low: f64,
    /// `None` means `0.1 * norms[0]`.
    pub m_high_semi: Option<f64>,
    pub m_high_irr: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eps_low: DEFAULT_EPS_LOW,
            m_high_semi: None,
            m_high_irr: DEFAULT_M_HIGH_IRR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    NoWitness,
    SemiIrregularWitness,
    IrregularWitness,
}

impl Classification {
    pub fn is_witness(self) -> bool {
        self != Classification::NoWitness
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitReport {
    pub norms: Vec<f64>,
    pub min_value: f64,
    pub min_index: usize,
    pub max_value: f64,
    pub max_index: usize,
    pub classification: Classification,
    pub eps_low: f64,
    pub m_high_semi: f64,
    pub m_high_irr: f64,
    /// First index below `eps_low`.
    pub dip_index: Option<usize>,
    /// Index of the largest value after the dip, when it clears `m_high_semi`.
    pub rise_index: Option<usize>,
}

/// First dip below `eps`, and the largest later value above `high`.
fn dip_then_rise(values: &[f64], eps: f64, high: f64) -> (Option<usize>, Option<(usize, f64)>) {
    let Some(dip) = values.iter().position(|&v| v < eps) else {
        return (None, None);
    };
    let later_max = values[dip + 1..]
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (k, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((dip + 1 + k, v)),
        });
    (Some(dip), later_max.filter(|&(_, v)| v > high))
}

impl OrbitReport {
    pub fn classify(norms: Vec<f64>, thresholds: &Thresholds) -> Self {
        assert!(!norms.is_empty(), "orbit has at least the starting point");
        let m_high_semi = thresholds.m_high_semi.unwrap_or(DEFAULT_SEMI_FACTOR * norms[0]);
        let (mut min_index, mut max_index) = (0, 0);
        for (n, &v) in norms.iter().enumerate() {
            if v < norms[min_index] {
                min_index = n;
            }
            if v > norms[max_index] {
                max_index = n;
            }
        }
        let (dip_index, rise) = dip_then_rise(&norms, thresholds.eps_low, m_high_semi);
        let classification = match rise {
            Some((_, v)) if v > thresholds.m_high_irr => Classification::IrregularWitness,
            Some(_) => Classification::SemiIrregularWitness,
            None => Classification::NoWitness,
        };
        Self {
            min_value: norms[min_index],
            min_index,
            max_value: norms[max_index],
            max_index,
            classification,
            eps_low: thresholds.eps_low,
            m_high_semi,
            m_high_irr: thresholds.m_high_irr,
            dip_index,
            rise_index: rise.map(|(i, _)| i),
            norms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiYorkePairReport {
    pub pair: (SimpleFunction, SimpleFunction),
    pub gaps: Vec<f64>,
    pub inf_gap: f64,
    pub sup_gap: f64,
    pub eps_low: f64,
    pub m_pair: f64,
    pub dip_index: Option<usize>,
    pub rise_index: Option<usize>,
    pub verdict: bool,
}

/// `g o tau^n`.
pub fn apply_power(t: &Transformation, g: &SimpleFunction, n: u64) -> SimpleFunction {
    t.compose_power(g, n)
}

/// `g, Cg, ..., C^horizon g`.
pub fn orbit(exec: Execution, t: &Transformation, g: &SimpleFunction, horizon: usize) -> Vec<SimpleFunction> {
    if t.shift_offset().is_some() || t.is_identity() {
        exec.map_indices(horizon + 1, |n| t.compose_power(g, n as u64))
    } else {
        let mut out = Vec::with_capacity(horizon + 1);
        let mut current = g.clone();
        for _ in 0..horizon {
            let next = t.compose(&current);
            out.push(std::mem::replace(&mut current, next));
        }
        out.push(current);
        out
    }
}

pub fn orbit_norms(
    ctx: &NormContext,
    t: &Transformation,
    g: &SimpleFunction,
    horizon: usize,
    thresholds: &Thresholds,
) -> Result<OrbitReport> {
    orbit_norms_with(Execution::default(), ctx, t, g, horizon, thresholds)
}

/// `||C^n g||` for `n = 0..=horizon`, classified.
pub fn orbit_norms_with(
    exec: Execution,
    ctx: &NormContext,
    t: &Transformation,
    g: &SimpleFunction,
    horizon: usize,
    thresholds: &Thresholds,
) -> Result<OrbitReport> {
    if g.is_zero() {
        return Err(Error::Precondition("orbit of the zero vector".into()));
    }
    let points = orbit(exec, t, g, horizon);
    let norms = exec.map_indices(points.len(), |n| ctx.luxemburg_norm(&points[n]));
    Ok(OrbitReport::classify(norms, thresholds))
}

/// Gap orbit `||C^n (g1 - g2)||`; a pair is reported when the gap dips below
/// `eps_low` and later exceeds `m_pair` (default `0.1 * ||g1 - g2||`).
pub fn li_yorke_pair_probe(
    ctx: &NormContext,
    t: &Transformation,
    g1: &SimpleFunction,
    g2: &SimpleFunction,
    horizon: usize,
    eps_low: f64,
    m_pair: Option<f64>,
) -> Result<LiYorkePairReport> {
    let diff = g1.sub(g2);
    if diff.is_zero() {
        return Err(Error::Precondition("a Li-Yorke pair needs two distinct vectors".into()));
    }
    let exec = Execution::default();
    let points = orbit(exec, t, &diff, horizon);
    let gaps = exec.map_indices(points.len(), |n| ctx.luxemburg_norm(&points[n]));
    let m_pair = m_pair.unwrap_or(DEFAULT_SEMI_FACTOR * gaps[0]);
    let (dip_index, rise) = dip_then_rise(&gaps, eps_low, m_pair);
    Ok(LiYorkePairReport {
        pair: (g1.clone(), g2.clone()),
        inf_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        sup_gap: gaps.iter().copied().fold(0.0, f64::max),
        eps_low,
        m_pair,
        dip_index,
        rise_index: rise.map(|(i, _)| i),
        verdict: rise.is_some(),
        gaps,
    })
}

/// `sum_j c_j chi_{k_j}`.
pub fn construct_block_vector(space: &AtomicMeasureSpace, peaks: &[(i64, f64)]) -> Result<SimpleFunction> {
    let mut seen = std::collections::BTreeSet::new();
    for &(k, _) in peaks {
        if !seen.insert(k) {
            return Err(Error::Precondition(format!("duplicate block position {k}")));
        }
        if !space.domain().contains(k) {
            return Err(Error::Domain(format!("block position {k} is outside the index domain")));
        }
    }
    SimpleFunction::from_pairs(peaks.iter().copied())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub label: String,
    pub vector: SimpleFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub label: String,
    pub vector: SimpleFunction,
    pub report: OrbitReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub horizon: usize,
    pub thresholds: Thresholds,
    /// Maximum number of candidates evaluated.
    pub budget: usize,
    /// Tried before the generated candidates, in order.
    pub extra: Vec<Candidate>,
    pub exec: Execution,
}

impl SearchConfig {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            thresholds: Thresholds::default(),
            budget: 256,
            extra: Vec::new(),
            exec: Execution::default(),
        }
    }
}

const BLOCK_SPACING: i64 = 4;

/// Candidate vectors in search order: the caller's extras, indicators of
/// atoms near the origin, then block vectors with peaks at `+-4^j`
/// (coefficients all 1, then `2^j`) with increasing numbers of blocks.
pub fn search_candidates(t: &Transformation, horizon: usize, extra: &[Candidate]) -> Vec<Candidate> {
    let domain = t.domain();
    let mut out: Vec<Candidate> = extra.to_vec();
    for a in [0i64, 1, -1] {
        if domain.contains(a) {
            out.push(Candidate {
                label: format!("indicator{{{a}}}"),
                vector: SimpleFunction::from_pairs([(a, 1.0)]).expect("finite"),
            });
        }
    }
    let reach: i64 = match domain {
        IndexDomain::Finite(n) => n as i64 - 1,
        _ => {
            let step = t.shift_offset().unwrap_or(1).unsigned_abs().max(1);
            (horizon as u64).saturating_mul(step).min(i64::MAX as u64) as i64
        }
    };
    let mut max_blocks = 0u32;
    while max_blocks < 30 && BLOCK_SPACING.pow(max_blocks + 1) <= reach {
        max_blocks += 1;
    }
    let signs: &[i64] = if domain == IndexDomain::Integers { &[1, -1] } else { &[1] };
    for blocks in 1..=max_blocks {
        for &sign in signs {
            for grow in [false, true] {
                let peaks: Vec<(i64, f64)> = (1..=blocks)
                    .map(|j| {
                        let c = if grow { 2f64.powi(j as i32) } else { 1.0 };
                        (sign * BLOCK_SPACING.pow(j), c)
                    })
                    .collect();
                let label = format!(
                    "blocks(n={blocks}, sign={}, coeff={})",
                    if sign > 0 { "+" } else { "-" },
                    if grow { "2^j" } else { "1" }
                );
                out.push(Candidate {
                    label,
                    vector: SimpleFunction::from_pairs(peaks).expect("finite"),
                });
            }
        }
    }
    out
}

fn evaluate(ctx: &NormContext, t: &Transformation, cfg: &SearchConfig, c: &Candidate) -> Option<SearchHit> {
    if c.vector.is_zero() {
        return None;
    }
    let report = orbit_norms_with(cfg.exec, ctx, t, &c.vector, cfg.horizon, &cfg.thresholds).ok()?;
    report.classification.is_witness().then(|| SearchHit {
        label: c.label.clone(),
        vector: c.vector.clone(),
        report,
    })
}

/// First candidate (in search order) whose orbit is a semi-irregular (or
/// irregular) witness at the horizon.
pub fn search_semi_irregular(ctx: &NormContext, t: &Transformation, cfg: &SearchConfig) -> Option<SearchHit> {
    let mut candidates = search_candidates(t, cfg.horizon, &cfg.extra);
    candidates.truncate(cfg.budget);
    cfg.exec.find_map_first(&candidates, |c| evaluate(ctx, t, cfg, c))
}

/// Every witness within the budget, in search order.
pub fn search_semi_irregular_all(ctx: &NormContext, t: &Transformation, cfg: &SearchConfig) -> Vec<SearchHit> {
    let mut candidates = search_candidates(t, cfg.horizon, &cfg.extra);
    candidates.truncate(cfg.budget);
    cfg.exec
        .map_indices(candidates.len(), |i| evaluate(ctx, t, cfg, &candidates[i]))
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionOrbitReport {
    pub phi_norms: Vec<f64>,
    pub sup_norms: Vec<f64>,
    /// Classification of `max(phi_norm, sup_norm)` along the orbit.
    pub report: OrbitReport,
}

/// Orbit in the `L^phi cap L^inf` norm. Needs a constant weight.
pub fn intersection_orbit_probe(
    ctx: &NormContext,
    t: &Transformation,
    g: &SimpleFunction,
    horizon: usize,
    thresholds: &Thresholds,
) -> Result<IntersectionOrbitReport> {
    if !ctx.weight.is_constant() {
        return Err(Error::Precondition(
            "the intersection-norm probe needs a constant weight (Orlicz case)".into(),
        ));
    }
    if g.is_zero() {
        return Err(Error::Precondition("orbit of the zero vector".into()));
    }
    let exec = Execution::default();
    let points = orbit(exec, t, g, horizon);
    let phi_norms = exec.map_indices(points.len(), |n| ctx.luxemburg_norm(&points[n]));
    let sup_norms: Vec<f64> = points.iter().map(SimpleFunction::sup_norm).collect();
    let combined = phi_norms.iter().zip(&sup_norms).map(|(a, b)| a.max(*b)).collect();
    Ok(IntersectionOrbitReport {
        report: OrbitReport::classify(combined, thresholds),
        phi_norms,
        sup_norms,
    })
}
