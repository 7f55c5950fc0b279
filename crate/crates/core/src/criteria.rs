//! Finite-horizon checkers for the set-measure criteria of Li-Yorke chaos
//! for composition operators, and a matrix cross-checking them against
//! orbit dynamics.
//!
//! Every checker scans `s_n = phi^{-1}(1 / H(mu(tau^{-+n} A)))` for
//! `n <= horizon` against a threshold `T`:
//!
//! * `WitnessedDivergence`: some `s_n >= T` with the image non-null;
//! * `DegenerateNullPreimage`: no such `n`, but some image is null (its
//!   `s_n` is `b_phi`, usually `+inf`);
//! * `BoundedAtHorizon`: neither.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::dynamics::{self, Candidate, SearchConfig, Thresholds};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure::{IndexDomain, MeasurableSet, SimpleFunction};
use crate::norm::NormContext;
use crate::transform::{Direction, MeasureSequence, Transformation};

pub const DEFAULT_THRESHOLD: f64 = 1e6;
pub const DEFAULT_DELTA: f64 = 1e-9;
pub const MAX_RATIO_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionId {
    L1a,
    L1b,
    T21a,
    T21b,
    T22i,
    T22ii,
    T23c,
    T23d,
    T23e,
    T23f,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    WitnessedDivergence,
    BoundedAtHorizon,
    DegenerateNullPreimage,
    PositiveLiminfWitnessed,
    LiminfNotSeparated,
}

/// `+inf` is written as the string `"inf"` so JSON stays valid.
fn extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("nan")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub n: u64,
    #[serde(serialize_with = "extended")]
    pub value: f64,
    /// Index of the set within a family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set_index: Option<usize>,
    /// `(p, q)` for the pair ratio scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair: Option<(i64, i64)>,
}

impl Witness {
    fn at(n: u64, value: f64) -> Self {
        Self { n, value, set_index: None, pair: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiminfDetail {
    pub status: Status,
    #[serde(serialize_with = "extended")]
    pub min_value: f64,
    pub min_index: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub criterion: CriterionId,
    pub status: Status,
    pub witness: Option<Witness>,
    pub horizon: u64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub liminf: Option<LiminfDetail>,
}

impl CriterionVerdict {
    fn new(criterion: CriterionId, (status, witness): (Status, Option<Witness>), horizon: usize, threshold: f64) -> Self {
        Self {
            criterion,
            status,
            witness,
            horizon: horizon as u64,
            threshold,
            liminf: None,
        }
    }

    pub fn is_witnessed(&self) -> bool {
        self.status == Status::WitnessedDivergence
    }
}

/// `s_n` along a measure sequence.
pub fn target_sequence(ctx: &NormContext, seq: &MeasureSequence) -> Vec<f64> {
    seq.values.iter().map(|&m| ctx.inverse_level(m)).collect()
}

/// Divergence contract over the indices `ns` (ascending) of `seq`.
fn divergence(ctx: &NormContext, seq: &MeasureSequence, ns: impl Iterator<Item = usize>, threshold: f64) -> (Status, Option<Witness>) {
    let mut first_null = None;
    for n in ns {
        let null = seq.is_null(n);
        if null {
            first_null.get_or_insert(n);
            continue;
        }
        let s = ctx.inverse_level(seq.values[n]);
        if s >= threshold {
            return (Status::WitnessedDivergence, Some(Witness::at(n as u64, s)));
        }
    }
    match first_null {
        Some(n) => (
            Status::DegenerateNullPreimage,
            Some(Witness::at(n as u64, ctx.inverse_level(seq.values[n]))),
        ),
        None => (Status::BoundedAtHorizon, None),
    }
}

fn check_base_set(ctx: &NormContext, a: &MeasurableSet) -> Result<()> {
    let m = ctx.space.measure(a);
    if a.is_empty() || !m.is_finite() {
        return Err(Error::Precondition(format!("criteria need 0 < mu(A) < inf, got mu(A) = {m}")));
    }
    Ok(())
}

fn sequence(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, dir: Direction, horizon: usize) -> Result<MeasureSequence> {
    check_base_set(ctx, a)?;
    t.measure_sequence(&ctx.space, a, dir, horizon)
}

/// Preimage direction: `limsup phi^{-1}(1/H(mu(tau^{-n} A))) = inf`.
pub fn thm23_c(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, horizon: usize, threshold: f64) -> Result<CriterionVerdict> {
    let seq = sequence(ctx, t, a, Direction::Preimage, horizon)?;
    Ok(CriterionVerdict::new(
        CriterionId::T23c,
        divergence(ctx, &seq, 0..=horizon, threshold),
        horizon,
        threshold,
    ))
}

/// Forward direction; needs an injective map.
pub fn thm23_d(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, horizon: usize, threshold: f64) -> Result<CriterionVerdict> {
    t.require_injective()?;
    let seq = sequence(ctx, t, a, Direction::Forward, horizon)?;
    Ok(CriterionVerdict::new(
        CriterionId::T23d,
        divergence(ctx, &seq, 0..=horizon, threshold),
        horizon,
        threshold,
    ))
}

/// Both directions. A degenerate side makes the whole verdict degenerate.
pub fn thm23_e(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, horizon: usize, threshold: f64) -> Result<CriterionVerdict> {
    let c = thm23_c(ctx, t, a, horizon, threshold)?;
    let d = thm23_d(ctx, t, a, horizon, threshold)?;
    let (status, witness) = if let Some(v) = [&c, &d].into_iter().find(|v| v.status == Status::DegenerateNullPreimage) {
        (Status::DegenerateNullPreimage, v.witness)
    } else if c.is_witnessed() && d.is_witnessed() {
        // the later of the two witnesses certifies both directions
        let (wc, wd) = (c.witness.unwrap(), d.witness.unwrap());
        (Status::WitnessedDivergence, Some(if wd.n > wc.n { wd } else { wc }))
    } else {
        (Status::BoundedAtHorizon, None)
    };
    Ok(CriterionVerdict::new(CriterionId::T23e, (status, witness), horizon, threshold))
}

/// Divergence of the preimage sequence together with `min s_n >= delta`.
///
/// The status is `WitnessedDivergence` only when both parts hold; when the
/// sequence diverges but its minimum falls below `delta` the status is
/// `LiminfNotSeparated`. The `liminf` detail always reports the minimum.
pub fn thm23_f(
    ctx: &NormContext,
    t: &Transformation,
    a: &MeasurableSet,
    horizon: usize,
    threshold: f64,
    delta: f64,
) -> Result<CriterionVerdict> {
    let seq = sequence(ctx, t, a, Direction::Preimage, horizon)?;
    let s = target_sequence(ctx, &seq);
    let (min_index, min_value) = s
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (n, v)| if v < best.1 { (n, v) } else { best });
    let separated = min_value >= delta;
    let (status, witness) = divergence(ctx, &seq, 0..=horizon, threshold);
    let status = match status {
        Status::WitnessedDivergence if !separated => Status::LiminfNotSeparated,
        other => other,
    };
    let mut v = CriterionVerdict::new(CriterionId::T23f, (status, witness), horizon, threshold);
    v.liminf = Some(LiminfDetail {
        status: if separated { Status::PositiveLiminfWitnessed } else { Status::LiminfNotSeparated },
        min_value,
        min_index: min_index as u64,
        delta,
    });
    Ok(v)
}

/// Increasing positive integers `gamma_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Subsequence {
    Explicit { terms: Vec<u64> },
    Arithmetic { start: u64, step: u64 },
    Geometric { start: u64, ratio: u64 },
}

impl Subsequence {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Subsequence::Explicit { terms } => {
                !terms.is_empty() && terms[0] > 0 && terms.windows(2).all(|w| w[0] < w[1])
            }
            Subsequence::Arithmetic { start, step } => *start > 0 && *step > 0,
            Subsequence::Geometric { start, ratio } => *start > 0 && *ratio > 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("subsequence", "gamma must be a non-empty strictly increasing sequence of positive integers"))
        }
    }

    /// Terms `<= horizon`.
    pub fn terms_up_to(&self, horizon: usize) -> Vec<usize> {
        let h = horizon as u64;
        let mut out = Vec::new();
        match self {
            Subsequence::Explicit { terms } => out.extend(terms.iter().copied().filter(|&k| k <= h)),
            Subsequence::Arithmetic { start, step } => {
                let mut k = *start;
                while k <= h {
                    out.push(k);
                    k = match k.checked_add(*step) {
                        Some(next) => next,
                        None => break,
                    };
                }
            }
            Subsequence::Geometric { start, ratio } => {
                let mut k = *start;
                while k <= h {
                    out.push(k);
                    k = match k.checked_mul(*ratio) {
                        Some(next) => next,
                        None => break,
                    };
                }
            }
        }
        out.into_iter().map(|k| k as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetFamily {
    sets: Vec<MeasurableSet>,
    gamma: Subsequence,
}

impl SetFamily {
    pub fn new(ctx: &NormContext, sets: Vec<MeasurableSet>, gamma: Subsequence) -> Result<Self> {
        gamma.validate()?;
        if sets.is_empty() {
            return Err(Error::invalid("set family", "needs at least one set"));
        }
        for a in &sets {
            check_base_set(ctx, a)?;
        }
        Ok(Self { sets, gamma })
    }

    pub fn sets(&self) -> &[MeasurableSet] {
        &self.sets
    }

    pub fn gamma(&self) -> &Subsequence {
        &self.gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm21Report {
    /// Divergence along `gamma` for each set, in family order.
    pub per_set: Vec<CriterionVerdict>,
    /// Witnessed when every set is; the witness is that of the first set.
    pub a: CriterionVerdict,
    /// Ratio `s_0(A_i) / s_n(A_i)` scanned over `n` ascending, then `i`.
    pub b: CriterionVerdict,
}

impl Thm21Report {
    pub fn is_witnessed(&self) -> bool {
        self.a.is_witnessed() && self.b.is_witnessed()
    }
}

/// All ratios `s(A_i) / s(tau^{-n} A_i)` for `1 <= n <= horizon`, ordered by
/// `n` then `i`, capped at `MAX_RATIO_PAIRS` entries.
pub fn thm21_ratio_set(ctx: &NormContext, t: &Transformation, family: &SetFamily, horizon: usize) -> Result<Vec<((usize, u64), f64)>> {
    let seqs = family_sequences(ctx, t, family, horizon)?;
    let mut out = Vec::new();
    'scan: for n in 1..=horizon {
        for (i, seq) in seqs.iter().enumerate() {
            if out.len() == MAX_RATIO_PAIRS {
                break 'scan;
            }
            out.push(((i, n as u64), ratio(ctx, seq.values[0], seq.values[n])));
        }
    }
    Ok(out)
}

fn ratio(ctx: &NormContext, m_num: f64, m_den: f64) -> f64 {
    ctx.inverse_level(m_num) / ctx.inverse_level(m_den)
}

fn family_sequences(ctx: &NormContext, t: &Transformation, family: &SetFamily, horizon: usize) -> Result<Vec<MeasureSequence>> {
    family
        .sets
        .iter()
        .map(|a| t.measure_sequence(&ctx.space, a, Direction::Preimage, horizon))
        .collect()
}

pub fn thm21_check(ctx: &NormContext, t: &Transformation, family: &SetFamily, horizon: usize, threshold: f64) -> Result<Thm21Report> {
    let seqs = family_sequences(ctx, t, family, horizon)?;
    let gamma = family.gamma.terms_up_to(horizon);
    let per_set: Vec<CriterionVerdict> = seqs
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            let (status, witness) = divergence(ctx, seq, gamma.iter().copied(), threshold);
            let witness = witness.map(|w| Witness { set_index: Some(i), ..w });
            CriterionVerdict::new(CriterionId::T21a, (status, witness), horizon, threshold)
        })
        .collect();

    let a_status = if per_set.iter().all(CriterionVerdict::is_witnessed) {
        (Status::WitnessedDivergence, per_set[0].witness)
    } else if per_set.iter().all(|v| v.is_witnessed() || v.status == Status::DegenerateNullPreimage) {
        let first = per_set.iter().find(|v| v.status == Status::DegenerateNullPreimage).unwrap();
        (Status::DegenerateNullPreimage, first.witness)
    } else {
        (Status::BoundedAtHorizon, None)
    };
    let a = CriterionVerdict::new(CriterionId::T21a, a_status, horizon, threshold);

    let mut b_status = (Status::BoundedAtHorizon, None);
    let mut scanned = 0usize;
    'scan: for n in 1..=horizon {
        for (i, seq) in seqs.iter().enumerate() {
            if scanned == MAX_RATIO_PAIRS {
                break 'scan;
            }
            scanned += 1;
            let r = ratio(ctx, seq.values[0], seq.values[n]);
            if r >= threshold {
                b_status = (
                    Status::WitnessedDivergence,
                    Some(Witness { set_index: Some(i), ..Witness::at(n as u64, r) }),
                );
                break 'scan;
            }
        }
    }
    let b = CriterionVerdict::new(CriterionId::T21b, b_status, horizon, threshold);
    Ok(Thm21Report { per_set, a, b })
}

/// `(q, mu(tau^q A))` for `q` in `[-range, range]` with a non-null image.
fn index_set(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, range: usize) -> Result<Vec<(i64, f64)>> {
    t.require_injective()?;
    let back = sequence(ctx, t, a, Direction::Preimage, range)?;
    let fwd = sequence(ctx, t, a, Direction::Forward, range)?;
    let mut out = Vec::with_capacity(2 * range + 1);
    for k in (1..=range).rev() {
        if !back.is_null(k) {
            out.push((-(k as i64), back.values[k]));
        }
    }
    for k in 0..=range {
        if !fwd.is_null(k) {
            out.push((k as i64, fwd.values[k]));
        }
    }
    Ok(out)
}

/// All ratios `s(tau^q A) / s(tau^p A)` for `p < q` in the index set, ordered
/// by gap `q - p`, then `q`, capped at `MAX_RATIO_PAIRS` entries.
pub fn thm22_ratio_set(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, range: usize) -> Result<Vec<((i64, i64), f64)>> {
    let idx = index_set(ctx, t, a, range)?;
    let mut out = Vec::new();
    scan_pairs(ctx, &idx, |p, q, r| {
        out.push(((p, q), r));
        out.len() < MAX_RATIO_PAIRS
    });
    Ok(out)
}

/// Visits pairs by gap, then `q`; stops when `visit` returns false.
fn scan_pairs(ctx: &NormContext, idx: &[(i64, f64)], mut visit: impl FnMut(i64, i64, f64) -> bool) {
    let s: std::collections::BTreeMap<i64, f64> = idx.iter().map(|&(q, m)| (q, ctx.inverse_level(m))).collect();
    let (Some((&lo, _)), Some((&hi, _))) = (s.first_key_value(), s.last_key_value()) else {
        return;
    };
    for gap in 1..=(hi - lo) {
        for (&q, &sq) in s.range(lo + gap..) {
            if let Some(&sp) = s.get(&(q - gap)) {
                if !visit(q - gap, q, sq / sp) {
                    return;
                }
            }
        }
    }
}

/// Pair ratio scan over `I = {q in [-range, range] : tau^q(A) non-null}`.
pub fn thm22_check(ctx: &NormContext, t: &Transformation, a: &MeasurableSet, range: usize, threshold: f64) -> Result<CriterionVerdict> {
    let idx = index_set(ctx, t, a, range)?;
    let mut found = None;
    let mut scanned = 0usize;
    scan_pairs(ctx, &idx, |p, q, r| {
        scanned += 1;
        if r >= threshold {
            found = Some(Witness {
                pair: Some((p, q)),
                ..Witness::at((q - p) as u64, r)
            });
            return false;
        }
        scanned < MAX_RATIO_PAIRS
    });
    let status = match found {
        Some(_) => Status::WitnessedDivergence,
        None => Status::BoundedAtHorizon,
    };
    Ok(CriterionVerdict::new(CriterionId::T22ii, (status, found), range, threshold))
}

/// `A_i = {x : 3^{i-1} <= |g(x)| < 3^i}` for the non-empty levels, by `i`.
pub fn level_set_family(g: &SimpleFunction) -> Vec<(i32, MeasurableSet)> {
    let mut levels: std::collections::BTreeMap<i32, BTreeSet<i64>> = Default::default();
    for (x, v) in g.iter() {
        let v = v.abs();
        let mut i = (v.ln() / 3f64.ln()).floor() as i32 + 1;
        while 3f64.powi(i - 1) > v {
            i -= 1;
        }
        while v >= 3f64.powi(i) {
            i += 1;
        }
        levels.entry(i).or_default().insert(x);
    }
    levels
        .into_iter()
        .map(|(i, atoms)| (i, MeasurableSet::from_atoms(atoms)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Trial {
    pub set: MeasurableSet,
    pub n: u64,
    pub measure: f64,
    pub preimage_measure: f64,
    /// Smallest `k` with `H(mu(tau^{-n} A)) <= k H(mu(A))`.
    pub k_b: f64,
    /// Smallest `k` with `1/s_n <= k / s_0`.
    pub k_a: f64,
    /// Bound on `k_a` transported from `k_b`.
    pub transported: f64,
    /// Bound on `k_b` transported back from `k_a`.
    pub converse: f64,
    pub forward_holds: bool,
    pub converse_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Lemma1Direction {
    pub criterion: CriterionId,
    /// The implication held on every trial.
    pub holds: bool,
    pub first_failure: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub delta2_constant: f64,
    pub seed: u64,
    pub trials: Vec<Lemma1Trial>,
    /// `(b) => (a)` with the transported constant.
    pub forward: Lemma1Direction,
    /// `(a) => (b)`.
    pub converse: Lemma1Direction,
    /// For `phi = power(p)`: `max |k_a - k_b^{1/p}| / k_b^{1/p}`.
    pub power_max_rel_error: Option<f64>,
}

const TRANSPORT_SLACK: f64 = 1e-12;

/// `k -> k'` such that `H_n <= k H_0` implies `1/s_n <= k' / s_0`. Convexity
/// alone gives `phi^{-1}(y/k) >= phi^{-1}(y)/k` for `k >= 1`.
fn transport(ctx: &NormContext, k: f64) -> f64 {
    if let crate::orlicz::OrliczKind::Power { p } = ctx.phi.kind() {
        return k.powf(1.0 / p);
    }
    k.max(1.0)
}

/// `k' -> k` for the converse direction, through `phi(2s) <= m phi(s)`.
fn transport_back(ctx: &NormContext, m: f64, k: f64) -> f64 {
    if let crate::orlicz::OrliczKind::Power { p } = ctx.phi.kind() {
        return k.powf(p);
    }
    if k <= 1.0 {
        1.0
    } else {
        m.powf(k.log2().ceil())
    }
}

/// Random sets near the origin and random `n`; on each trial the sharp
/// constants of both conditions are measured and each is checked against
/// the bound transported from the other.
pub fn lemma1_equivalence_check(ctx: &NormContext, t: &Transformation, trials: usize, seed: u64) -> Result<Lemma1Report> {
    let Some(m) = ctx.phi.delta2_constant() else {
        return Err(Error::Precondition(
            "the transport of constants needs phi to satisfy the doubling condition for all s > 0".into(),
        ));
    };
    let window: Vec<i64> = match ctx.space.domain() {
        IndexDomain::Finite(n) => (0..n as i64).collect(),
        IndexDomain::Naturals => (0..=16).collect(),
        IndexDomain::Integers => (-8..=8).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    let mut worst_power: Option<f64> = None;
    for _ in 0..trials {
        let size = rng.gen_range(1..=window.len().min(4));
        let set = MeasurableSet::from_atoms(window.choose_multiple(&mut rng, size).copied());
        let n = rng.gen_range(0..=12u64);
        let measure = ctx.space.measure(&set);
        let pre = t.preimage_set(&set, n);
        let preimage_measure = ctx.space.measure(&pre);
        let h0 = ctx.weight.cumulative_unchecked(measure);
        let hn = ctx.weight.cumulative_unchecked(preimage_measure);
        let k_b = hn / h0;
        let k_a = ctx.inverse_level(measure) / ctx.inverse_level(preimage_measure);
        let transported = transport(ctx, k_b);
        let converse = transport_back(ctx, m, k_a);
        if let crate::orlicz::OrliczKind::Power { .. } = ctx.phi.kind() {
            if k_b > 0.0 {
                let err = (k_a - transported).abs() / transported;
                worst_power = Some(worst_power.map_or(err, |w: f64| w.max(err)));
            }
        }
        out.push(Lemma1Trial {
            forward_holds: k_a <= transported * (1.0 + TRANSPORT_SLACK),
            converse_holds: k_b <= converse * (1.0 + TRANSPORT_SLACK),
            set,
            n,
            measure,
            preimage_measure,
            k_b,
            k_a,
            transported,
            converse,
        });
    }
    let verdict = |criterion, holds: &dyn Fn(&Lemma1Trial) -> bool| {
        let first_failure = out.iter().position(|tr| !holds(tr));
        Lemma1Direction {
            criterion,
            holds: first_failure.is_none(),
            first_failure,
        }
    };
    let forward = verdict(CriterionId::L1a, &|tr| tr.forward_holds);
    let converse = verdict(CriterionId::L1b, &|tr| tr.converse_holds);
    Ok(Lemma1Report {
        delta2_constant: m,
        seed,
        trials: out,
        forward,
        converse,
        power_max_rel_error: worst_power,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub check: String,
    pub status: String,
    /// The row's condition holds as literally stated at this horizon.
    pub predicts_witness: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixFlags {
    pub finite_total_measure: bool,
    pub injective: bool,
    pub delta2: bool,
    pub any_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyMatrix {
    /// Whether the semi-irregular search found a witness; rows are compared
    /// against this.
    pub dynamics_witness: bool,
    pub search_label: Option<String>,
    pub indicator_label: Option<String>,
    pub rows: Vec<MatrixRow>,
    pub flags: MatrixFlags,
    pub disagreement: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConfig {
    pub horizon: usize,
    pub threshold: f64,
    pub delta: f64,
    /// Horizon of the orbit searches.
    pub orbit_horizon: usize,
    pub thresholds: Thresholds,
    /// Scenario vectors and set indicators tried first by the searches.
    pub candidates: Vec<Candidate>,
}

enum Cell {
    Verdict(Result<CriterionVerdict>),
    Search(Option<dynamics::SearchHit>),
}

fn status_name(s: Status) -> String {
    format!("{s:?}")
}

/// Criteria (c)-(f) on `a`, the vector search for (b), and an
/// indicator-only search for (g), compared row by row.
pub fn consistency_matrix(
    ctx: &NormContext,
    t: &Transformation,
    a: &MeasurableSet,
    cfg: &MatrixConfig,
    exec: Execution,
) -> Result<ConsistencyMatrix> {
    check_base_set(ctx, a)?;
    let search_cfg = SearchConfig {
        horizon: cfg.orbit_horizon,
        thresholds: cfg.thresholds,
        budget: 256,
        extra: cfg.candidates.clone(),
        exec,
    };
    let (n, th) = (cfg.horizon, cfg.threshold);
    let cells = exec.map_indices(6, |i| match i {
        0 => Cell::Verdict(thm23_c(ctx, t, a, n, th)),
        1 => Cell::Verdict(thm23_d(ctx, t, a, n, th)),
        2 => Cell::Verdict(thm23_e(ctx, t, a, n, th)),
        3 => Cell::Verdict(thm23_f(ctx, t, a, n, th, cfg.delta)),
        4 => Cell::Search(dynamics::search_semi_irregular(ctx, t, &search_cfg)),
        _ => {
            let mut indicators = SearchConfig {
                extra: Vec::new(),
                ..search_cfg.clone()
            };
            indicators.extra = dynamics::search_candidates(t, cfg.orbit_horizon, &cfg.candidates)
                .into_iter()
                .filter(|c| !c.vector.is_zero() && c.vector.iter().all(|(_, v)| v == 1.0))
                .collect();
            indicators.budget = indicators.extra.len();
            Cell::Search(dynamics::search_semi_irregular(ctx, t, &indicators))
        }
    });
    let mut cells = cells.into_iter();
    let mut verdicts = Vec::new();
    for (label, cell) in ["T23c", "T23d", "T23e", "T23f"].iter().zip(cells.by_ref().take(4)) {
        let Cell::Verdict(v) = cell else { unreachable!() };
        let v = match v {
            Ok(v) => Some(v),
            // a non-injective map makes the forward criteria inapplicable
            Err(Error::Precondition(_)) if *label != "T23c" && *label != "T23f" => None,
            Err(e) => return Err(e),
        };
        verdicts.push((label.to_string(), v));
    }
    let Some(Cell::Search(search)) = cells.next() else { unreachable!() };
    let Some(Cell::Search(indicator)) = cells.next() else { unreachable!() };

    let dynamics_witness = search.is_some();
    let mut rows = Vec::new();
    let mut any_degenerate = false;
    for (label, v) in &verdicts {
        let (status, predicts) = match v {
            Some(v) => {
                any_degenerate |= v.status == Status::DegenerateNullPreimage;
                let predicts = matches!(v.status, Status::WitnessedDivergence | Status::DegenerateNullPreimage);
                (status_name(v.status), predicts)
            }
            None => ("NotApplicable".to_string(), dynamics_witness),
        };
        rows.push(MatrixRow {
            check: label.clone(),
            status,
            predicts_witness: predicts,
            agrees: predicts == dynamics_witness,
        });
    }
    let found = |hit: &Option<dynamics::SearchHit>| match hit {
        Some(h) => format!("{:?}", h.report.classification),
        None => "NoWitness".to_string(),
    };
    rows.push(MatrixRow {
        check: "T23b_search".into(),
        status: found(&search),
        predicts_witness: dynamics_witness,
        agrees: true,
    });
    rows.push(MatrixRow {
        check: "T23g_indicator".into(),
        status: found(&indicator),
        predicts_witness: indicator.is_some(),
        agrees: indicator.is_some() == dynamics_witness,
    });
    let disagreement = rows.iter().any(|r| !r.agrees);
    Ok(ConsistencyMatrix {
        dynamics_witness,
        search_label: search.map(|h| h.label),
        indicator_label: indicator.map(|h| h.label),
        rows,
        flags: MatrixFlags {
            finite_total_measure: ctx.space.has_finite_total_measure(),
            injective: t.is_injective(),
            delta2: ctx.phi.delta2_constant().is_some(),
            any_degenerate,
        },
        disagreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{AtomWeights, AtomicMeasureSpace};
    use crate::orlicz::OrliczFunction;
    use crate::weight::WeightFunction;
    use proptest::prelude::*;

    fn s3_with(phi: OrliczFunction) -> (NormContext, Transformation) {
        let space = AtomicMeasureSpace::sym_geometric(0.5).unwrap();
        let t = Transformation::shift_z(1, &space).unwrap();
        (NormContext::new(phi, WeightFunction::constant(1.0).unwrap(), space), t)
    }

    fn s3() -> (NormContext, Transformation) {
        s3_with(OrliczFunction::power(1.0).unwrap())
    }

    fn counting() -> (NormContext, Transformation) {
        let space = AtomicMeasureSpace::counting_naturals();
        let t = Transformation::shift_n(&space).unwrap();
        let ctx = NormContext::new(OrliczFunction::power(2.0).unwrap(), WeightFunction::constant(1.0).unwrap(), space);
        (ctx, t)
    }

    fn single(a: i64) -> MeasurableSet {
        MeasurableSet::from_atoms([a])
    }

    #[test]
    fn preimage_criterion_on_s3() {
        let (ctx, t) = s3();
        let v = thm23_c(&ctx, &t, &single(0), 40, 1e6).unwrap();
        assert_eq!(v.status, Status::WitnessedDivergence);
        assert_eq!(v.witness.unwrap().n, 20);
        assert_eq!(v.witness.unwrap().value, 1_048_576.0);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.starts_with(r#"{"criterion":"T23c","status":"WitnessedDivergence","witness":{"n":20,"value":1048576.0}"#));

        let id = Transformation::identity(&ctx.space);
        assert_eq!(thm23_c(&ctx, &id, &single(0), 40, 1e6).unwrap().status, Status::BoundedAtHorizon);
        assert!(thm23_c(&ctx, &t, &MeasurableSet::empty(), 40, 1e6).is_err());
    }

    #[test]
    fn degenerate_null_preimage_on_counting_measure() {
        let (ctx, t) = counting();
        let v = thm23_c(&ctx, &t, &single(5), 40, 1e6).unwrap();
        assert_eq!(v.status, Status::DegenerateNullPreimage);
        assert_eq!(v.witness.unwrap().n, 6);
        assert!(serde_json::to_string(&v).unwrap().contains(r#""value":"inf""#));
        assert_eq!(thm23_e(&ctx, &t, &single(5), 40, 1e6).unwrap().status, Status::DegenerateNullPreimage);
        assert_eq!(thm23_d(&ctx, &t, &single(5), 40, 1e6).unwrap().status, Status::BoundedAtHorizon);
    }

    #[test]
    fn forward_and_combined_criteria() {
        let (ctx, t) = s3();
        let d = thm23_d(&ctx, &t, &single(0), 40, 1e6).unwrap();
        assert_eq!((d.status, d.witness.unwrap().n), (Status::WitnessedDivergence, 20));
        let e = thm23_e(&ctx, &t, &single(0), 40, 1e6).unwrap();
        assert_eq!((e.status, e.witness.unwrap().n), (Status::WitnessedDivergence, 20));

        let id = Transformation::identity(&ctx.space);
        assert_eq!(thm23_d(&ctx, &id, &single(0), 40, 1e6).unwrap().status, Status::BoundedAtHorizon);
        assert_eq!(thm23_e(&ctx, &id, &single(0), 40, 1e6).unwrap().status, Status::BoundedAtHorizon);

        let finite = AtomicMeasureSpace::finite(vec![1.0, 1.0, 1.0]).unwrap();
        let collapse = Transformation::finite_map(vec![0, 0, 1], &finite).unwrap();
        let fctx = NormContext::new(OrliczFunction::power(1.0).unwrap(), WeightFunction::constant(1.0).unwrap(), finite);
        assert!(matches!(thm23_d(&fctx, &collapse, &single(0), 5, 1e6), Err(Error::Precondition(_))));
        assert!(matches!(thm22_check(&fctx, &collapse, &single(0), 5, 1e6), Err(Error::Precondition(_))));
    }

    #[test]
    fn liminf_criterion() {
        let (ctx, t) = s3();
        let f = thm23_f(&ctx, &t, &single(0), 40, 1e6, DEFAULT_DELTA).unwrap();
        assert_eq!(f.status, Status::WitnessedDivergence);
        assert_eq!(f.witness.unwrap().n, 20);
        assert_eq!(f.liminf.unwrap().status, Status::PositiveLiminfWitnessed);
        assert_eq!(f.liminf.unwrap().min_value, 1.0);

        let id = Transformation::identity(&ctx.space);
        let f = thm23_f(&ctx, &id, &single(0), 40, 1e6, DEFAULT_DELTA).unwrap();
        assert_eq!(f.status, Status::BoundedAtHorizon);
        assert_eq!(f.liminf.unwrap().status, Status::PositiveLiminfWitnessed);
    }

    #[test]
    fn liminf_not_separated_on_swap() {
        let space = AtomicMeasureSpace::finite(vec![1e-7, 1e12]).unwrap();
        let swap = Transformation::finite_map(vec![1, 0], &space).unwrap();
        let ctx = NormContext::new(OrliczFunction::power(1.0).unwrap(), WeightFunction::constant(1.0).unwrap(), space);
        let f = thm23_f(&ctx, &swap, &single(0), 10, 1e6, DEFAULT_DELTA).unwrap();
        assert_eq!(f.status, Status::LiminfNotSeparated);
        assert_eq!(f.witness.unwrap().n, 0);
        assert_eq!(f.liminf.unwrap().min_index, 1);
    }

    #[test]
    fn oscillating_measures_keep_liminf_positive() {
        let space = AtomicMeasureSpace::new(IndexDomain::Integers, AtomWeights::Alternating { ratio: 0.5, odd: 0.25 }).unwrap();
        let t = Transformation::shift_z(1, &space).unwrap();
        let ctx = NormContext::new(OrliczFunction::power(1.0).unwrap(), WeightFunction::constant(1.0).unwrap(), space);
        let seq = t.measure_sequence(&ctx.space, &single(0), Direction::Preimage, 40).unwrap();
        // direct oracle: mu({-n}) is 2^{-n} for even n and 1/4 for odd n
        for n in 0..=40usize {
            let want = if n % 2 == 0 { 2f64.powi(-(n as i32)) } else { 0.25 };
            assert_eq!(seq.values[n], want);
        }
        let f = thm23_f(&ctx, &t, &single(0), 40, 1e6, DEFAULT_DELTA).unwrap();
        assert_eq!(f.status, Status::WitnessedDivergence);
        assert_eq!(f.witness.unwrap().n, 20);
        assert_eq!(f.liminf.unwrap().min_value, 1.0);
    }

    fn singleton_family(ctx: &NormContext, upto: i64) -> SetFamily {
        SetFamily::new(ctx, (0..=upto).map(single).collect(), Subsequence::Arithmetic { start: 1, step: 1 }).unwrap()
    }

    #[test]
    fn family_criterion_on_s3() {
        let (ctx, t) = s3();
        let r = thm21_check(&ctx, &t, &singleton_family(&ctx, 20), 40, 1e6).unwrap();
        assert!(r.is_witnessed());
        assert_eq!(r.a.witness.unwrap().n, 20);
        assert_eq!(r.per_set[0].witness.unwrap().n, 20);
        assert_eq!(r.per_set[20].witness.unwrap().n, 40);
        let b = r.b.witness.unwrap();
        assert_eq!((b.n, b.set_index, b.value), (20, Some(20), 1_048_576.0));

        // four singletons only reach ratio 2^3
        let r = thm21_check(&ctx, &t, &singleton_family(&ctx, 3), 40, 1e6).unwrap();
        assert!(r.a.is_witnessed());
        assert_eq!(r.b.status, Status::BoundedAtHorizon);
        let r = thm21_check(&ctx, &t, &singleton_family(&ctx, 3), 40, 8.0).unwrap();
        assert!(r.b.is_witnessed());

        let id = Transformation::identity(&ctx.space);
        let r = thm21_check(&ctx, &id, &singleton_family(&ctx, 3), 40, 1e6).unwrap();
        assert_eq!((r.a.status, r.b.status), (Status::BoundedAtHorizon, Status::BoundedAtHorizon));

        assert!(Subsequence::Explicit { terms: vec![] }.validate().is_err());
        assert!(SetFamily::new(&ctx, vec![single(0)], Subsequence::Explicit { terms: vec![3, 2] }).is_err());
    }

    #[test]
    fn gamma_generators() {
        assert_eq!(Subsequence::Arithmetic { start: 2, step: 3 }.terms_up_to(11), vec![2, 5, 8, 11]);
        assert_eq!(Subsequence::Geometric { start: 1, ratio: 4 }.terms_up_to(64), vec![1, 4, 16, 64]);
        assert_eq!(Subsequence::Explicit { terms: vec![3, 7, 9] }.terms_up_to(8), vec![3, 7]);
    }

    #[test]
    fn pair_criterion_on_s3() {
        let (ctx, t) = s3();
        let v = thm22_check(&ctx, &t, &single(0), 25, 1e6).unwrap();
        assert_eq!(v.criterion, CriterionId::T22ii);
        assert_eq!(v.status, Status::WitnessedDivergence);
        let w = v.witness.unwrap();
        assert_eq!((w.n, w.pair, w.value), (20, Some((0, 20)), 1_048_576.0));

        let id = Transformation::identity(&ctx.space);
        assert_eq!(thm22_check(&ctx, &id, &single(0), 25, 1e6).unwrap().status, Status::BoundedAtHorizon);
        let v = thm22_check(&ctx, &t, &single(0), 0, 1e6).unwrap();
        assert_eq!((v.status, v.witness), (Status::BoundedAtHorizon, None));
    }

    #[test]
    fn pair_ratios_are_family_ratios() {
        let (ctx, t) = s3();
        let range = 12usize;
        let a = ctx.space.set([0, 3]).unwrap();
        let pairs = thm22_ratio_set(&ctx, &t, &a, range).unwrap();
        // A_q = tau^q(A); the pair (p, q) is the family entry (A_q, n = q - p)
        let qs: Vec<i64> = (-(range as i64)..=range as i64).collect();
        let sets: Vec<MeasurableSet> = qs
            .iter()
            .map(|&q| if q < 0 { t.preimage_set(&a, (-q) as u64) } else { t.forward_image_set(&a, q).unwrap() })
            .collect();
        let family = SetFamily::new(&ctx, sets, Subsequence::Arithmetic { start: 1, step: 1 }).unwrap();
        let family_ratios: std::collections::HashMap<(usize, u64), f64> =
            thm21_ratio_set(&ctx, &t, &family, 2 * range).unwrap().into_iter().collect();
        assert_eq!(pairs.len(), (2 * range + 1) * (2 * range) / 2);
        for ((p, q), r) in pairs {
            let i = qs.iter().position(|&x| x == q).unwrap();
            assert_eq!(family_ratios[&(i, (q - p) as u64)], r, "pair ({p}, {q})");
        }
    }

    #[test]
    fn level_sets() {
        let g = SimpleFunction::from_pairs([(0, 1.0), (1, 2.9), (2, 3.0), (3, -8.0), (4, 0.5), (5, 27.0)]).unwrap();
        let fam = level_set_family(&g);
        let want = vec![
            (0, MeasurableSet::from_atoms([4])),
            (1, MeasurableSet::from_atoms([0, 1])),
            (2, MeasurableSet::from_atoms([2, 3])),
            (4, MeasurableSet::from_atoms([5])),
        ];
        assert_eq!(fam, want);
    }

    #[test]
    fn lemma_transport_power() {
        let (ctx, t) = s3_with(OrliczFunction::power(2.0).unwrap());
        let r = lemma1_equivalence_check(&ctx, &t, 300, 7).unwrap();
        assert!(r.forward.holds && r.converse.holds);
        assert!(r.power_max_rel_error.unwrap() <= 1e-12);

        // mu(A) = 1, mu(tau^{-1} A) = 4 gives k = 4 and k' = 2
        let space = AtomicMeasureSpace::finite(vec![1.0, 4.0]).unwrap();
        let swap = Transformation::finite_map(vec![1, 0], &space).unwrap();
        let ctx2 = NormContext::new(OrliczFunction::power(2.0).unwrap(), WeightFunction::constant(1.0).unwrap(), space);
        let a = single(0);
        let pre = swap.preimage_set(&a, 1);
        let k = ctx2.space.measure(&pre) / ctx2.space.measure(&a);
        let k_a = ctx2.inverse_level(1.0) / ctx2.inverse_level(4.0);
        assert_eq!((k, k_a, transport(&ctx2, k)), (4.0, 2.0, 2.0));
        assert_eq!(transport(&ctx2, 1.0), 1.0);
    }

    #[test]
    fn lemma_transport_doubling_bound() {
        let (ctx, t) = s3_with(OrliczFunction::power_log());
        let r = lemma1_equivalence_check(&ctx, &t, 300, 11).unwrap();
        assert_eq!(r.delta2_constant, 4.0);
        assert!(r.forward.holds, "{:?} {:?}", r.forward, r.trials[r.forward.first_failure.unwrap_or(0)]);
        assert!(r.converse.holds, "{:?}", r.converse);
        assert!(r.power_max_rel_error.is_none());
    }

    #[test]
    fn lemma_rejects_non_doubling() {
        for phi in [OrliczFunction::exp_minus_one(), OrliczFunction::neg_log(), OrliczFunction::flat_start(1.0).unwrap()] {
            let (ctx, t) = s3_with(phi);
            assert!(matches!(lemma1_equivalence_check(&ctx, &t, 10, 1), Err(Error::Precondition(_))));
        }
    }

    fn matrix_cfg() -> MatrixConfig {
        MatrixConfig {
            horizon: 40,
            threshold: 1e6,
            delta: DEFAULT_DELTA,
            orbit_horizon: 300,
            thresholds: Thresholds::default(),
            candidates: Vec::new(),
        }
    }

    #[test]
    fn matrix_on_s3_agrees() {
        let (ctx, t) = s3();
        let m = consistency_matrix(&ctx, &t, &single(0), &matrix_cfg(), Execution::default()).unwrap();
        assert!(m.dynamics_witness);
        assert!(!m.disagreement, "{m:?}");
        assert!(m.rows.iter().all(|r| r.predicts_witness));
        assert!(m.flags.finite_total_measure && m.flags.injective && m.flags.delta2 && !m.flags.any_degenerate);
    }

    #[test]
    fn matrix_flags_counting_shift() {
        let (ctx, t) = counting();
        let mut cfg = matrix_cfg();
        cfg.orbit_horizon = 500;
        let m = consistency_matrix(&ctx, &t, &single(5), &cfg, Execution::default()).unwrap();
        assert!(!m.dynamics_witness);
        assert!(m.disagreement);
        assert!(m.flags.any_degenerate && !m.flags.finite_total_measure);
        let c = m.rows.iter().find(|r| r.check == "T23c").unwrap();
        assert_eq!(c.status, "DegenerateNullPreimage");
        assert!(!c.agrees);
    }

    #[test]
    fn matrix_on_identity_is_quiet() {
        let (ctx, _) = s3();
        let id = Transformation::identity(&ctx.space);
        let m = consistency_matrix(&ctx, &id, &single(0), &matrix_cfg(), Execution::default()).unwrap();
        assert!(!m.dynamics_witness && !m.disagreement);
        assert!(m.rows.iter().all(|r| !r.predicts_witness));
    }

    proptest! {
        #[test]
        fn witness_links_to_indicator_norm(atoms in proptest::collection::btree_set(-10i64..10, 1..4), th in 1.0f64..1e4, p in 1.0f64..3.0) {
            let (ctx, t) = s3_with(OrliczFunction::power(p).unwrap());
            let a = MeasurableSet::from_atoms(atoms);
            let v = thm23_c(&ctx, &t, &a, 60, th).unwrap();
            if let (Status::WitnessedDivergence, Some(w)) = (v.status, v.witness) {
                let pre = t.preimage_set(&a, w.n);
                prop_assert!(!pre.is_empty());
                prop_assert!(ctx.indicator_norm(&pre) <= 1.0 / th);
            }
        }

        #[test]
        fn witnesses_persist_with_horizon(
            atoms in proptest::collection::btree_set(-10i64..10, 1..4),
            th in 1.0f64..1e5,
            n in 0usize..40,
            extra in 0usize..40,
        ) {
            let (ctx, t) = s3();
            let a = MeasurableSet::from_atoms(atoms);
            let short = thm23_c(&ctx, &t, &a, n, th).unwrap();
            let long = thm23_c(&ctx, &t, &a, n + extra, th).unwrap();
            if short.is_witnessed() {
                prop_assert!(long.is_witnessed());
                prop_assert_eq!(short.witness, long.witness);
            }
            let short = thm22_check(&ctx, &t, &a, n, th).unwrap();
            let long = thm22_check(&ctx, &t, &a, n + extra, th).unwrap();
            if short.is_witnessed() {
                prop_assert!(long.is_witnessed());
            }
        }

        #[test]
        fn power_transport_is_exact(seed in 0u64..1000, p in 1.0f64..4.0) {
            let (ctx, t) = s3_with(OrliczFunction::power(p).unwrap());
            let r = lemma1_equivalence_check(&ctx, &t, 20, seed).unwrap();
            prop_assert!(r.power_max_rel_error.unwrap() <= 1e-12);
            prop_assert!(r.forward.holds && r.converse.holds);
        }
    }
}
