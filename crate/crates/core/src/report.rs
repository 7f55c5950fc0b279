//! Subcommand dispatch and report rendering for the `olx` tool.
//!
//! JSON reports carry the tool version, the scenario digest and every
//! effective parameter, and nothing time-dependent, so the same scenario and
//! flags give byte-identical output. CSV floats are written with 17
//! significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::criteria::{self, CriterionVerdict, MatrixConfig};
use crate::dynamics::{self, Thresholds};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure::SimpleFunction;
use crate::scenario::Scenario;

pub const TOOL: &str = "olx";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SEED_ENV: &str = "OLX_SEED";
pub const DEFAULT_SEED: u64 = 0x5eed;
pub const DEFAULT_TRIALS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Norm,
    Orbit,
    Criteria,
    Crosscheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format `{s}` (expected json or csv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Check {
    T23c,
    T23d,
    T23e,
    T23f,
    T21,
    T22,
    L1,
    #[serde(rename = "all")]
    All,
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "t23c" => Check::T23c,
            "t23d" => Check::T23d,
            "t23e" => Check::T23e,
            "t23f" => Check::T23f,
            "t21" => Check::T21,
            "t22" => Check::T22,
            "l1" => Check::L1,
            "all" => Check::All,
            _ => return Err(format!("unknown check `{s}` (expected T23c, T23d, T23e, T23f, T21, T22, L1 or all)")),
        })
    }
}

/// Command-line overrides; `None` falls back to the scenario defaults.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub set: Option<String>,
    pub vector: Option<String>,
    pub family: Option<String>,
    pub horizon: Option<usize>,
    pub threshold: Option<f64>,
    pub eps_low: Option<f64>,
    pub delta: Option<f64>,
    pub check: Option<Check>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameters {
    pub horizon: usize,
    pub threshold: f64,
    pub eps_low: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub scenario: String,
    pub digest: String,
    pub parameters: Parameters,
    pub output: Value,
    #[serde(skip)]
    pub csv: Option<String>,
    /// Human-readable lines for the terminal.
    #[serde(skip)]
    pub summary: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(self.to_json()),
            Format::Csv => self
                .csv
                .clone()
                .ok_or_else(|| Error::invalid("format", "CSV output is only available for `orbit`")),
        }
    }
}

/// `OLX_SEED` as an integer, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid("seed", format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run_command(cmd: Command, scenario: &Scenario, flags: &Flags) -> Result<RunReport> {
    let d = &scenario.spec.defaults;
    let parameters = Parameters {
        horizon: flags.horizon.unwrap_or(d.horizon),
        threshold: flags.threshold.unwrap_or(d.threshold),
        eps_low: flags.eps_low.unwrap_or(d.eps_low),
        delta: flags.delta.unwrap_or(d.delta),
    };
    if !(parameters.threshold > 0.0 && parameters.eps_low > 0.0 && parameters.delta >= 0.0) {
        return Err(Error::invalid("flags", "threshold and eps-low must be positive, delta non-negative"));
    }
    let mut report = RunReport {
        tool: TOOL,
        version: VERSION,
        command: cmd,
        scenario: scenario.name.clone(),
        digest: scenario.digest.clone(),
        parameters,
        output: Value::Null,
        csv: None,
        summary: Vec::new(),
    };
    match cmd {
        Command::Norm => norm(scenario, flags, &mut report)?,
        Command::Orbit => orbit(scenario, flags, &mut report)?,
        Command::Criteria => {
            let check = flags.check.unwrap_or(Check::All);
            report.output = run_criteria(scenario, flags, &report.parameters, check, &mut report.summary)?;
        }
        Command::Crosscheck => crosscheck(scenario, flags, &mut report)?,
    }
    Ok(report)
}

/// `--vector` wins over `--set`; with neither, the default set.
fn target(scenario: &Scenario, flags: &Flags) -> Result<(String, SimpleFunction, bool)> {
    if let Some(v) = &flags.vector {
        return Ok((format!("vector:{v}"), scenario.vector(v)?.clone(), false));
    }
    let (name, set) = scenario.resolve_set(flags.set.as_deref())?;
    Ok((format!("set:{name}"), SimpleFunction::indicator(set), true))
}

fn norm(scenario: &Scenario, flags: &Flags, report: &mut RunReport) -> Result<()> {
    let ctx = &scenario.ctx;
    let (label, g, is_set) = target(scenario, flags)?;
    let bisection = ctx.luxemburg(&g);
    let closed_form = is_set.then(|| ctx.indicator_norm(&g.support_set()));
    let norm = closed_form.unwrap_or(bisection.norm);
    let intersection = ctx.weight.is_constant().then(|| norm.max(g.sup_norm()));
    report.output = json!({
        "target": label,
        "norm": norm,
        "closed_form": closed_form,
        "bisection": to_value(&bisection),
        "modular": ctx.modular(&g),
        "sup_norm": g.sup_norm(),
        "intersection_norm": intersection,
    });
    report.summary.push(format!("{label}: norm = {norm}"));
    Ok(())
}

fn orbit(scenario: &Scenario, flags: &Flags, report: &mut RunReport) -> Result<()> {
    let (ctx, t, p) = (&scenario.ctx, &scenario.tau, &report.parameters);
    let (label, g, _) = target(scenario, flags)?;
    let th = Thresholds {
        eps_low: p.eps_low,
        ..Thresholds::default()
    };
    let horizon = p.horizon;
    let (orbit_report, intersection) = if ctx.weight.is_constant() {
        let probe = dynamics::intersection_orbit_probe(ctx, t, &g, horizon, &th)?;
        (dynamics::OrbitReport::classify(probe.phi_norms.clone(), &th), Some(probe))
    } else {
        (dynamics::orbit_norms_with(flags.exec, ctx, t, &g, horizon, &th)?, None)
    };
    let sup_norms: Vec<f64> = match &intersection {
        Some(probe) => probe.sup_norms.clone(),
        None => dynamics::orbit(flags.exec, t, &g, horizon).iter().map(SimpleFunction::sup_norm).collect(),
    };

    let mut csv = String::from("n,norm,sup_norm");
    if intersection.is_some() {
        csv.push_str(",intersection_norm");
    }
    csv.push('\n');
    for (n, norm) in orbit_report.norms.iter().enumerate() {
        write!(csv, "{n},{},{}", fmt_f(*norm), fmt_f(sup_norms[n])).unwrap();
        if let Some(probe) = &intersection {
            write!(csv, ",{}", fmt_f(probe.report.norms[n])).unwrap();
        }
        csv.push('\n');
    }

    report.summary.push(format!(
        "{label}: {:?} over n <= {horizon} (min {:e} at {}, max {:e} at {})",
        orbit_report.classification,
        orbit_report.min_value,
        orbit_report.min_index,
        orbit_report.max_value,
        orbit_report.max_index
    ));
    if let Some(probe) = &intersection {
        report
            .summary
            .push(format!("intersection norm: {:?}", probe.report.classification));
    }
    report.output = json!({
        "target": label,
        "orbit": to_value(&orbit_report),
        "sup_norms": sup_norms,
        "intersection": intersection.map(|p| to_value(&p.report)),
    });
    report.csv = Some(csv);
    Ok(())
}

fn verdict_line(v: &CriterionVerdict) -> String {
    match v.witness {
        Some(w) => format!("{:?}: {:?} (n = {}, value = {:e})", v.criterion, v.status, w.n, w.value),
        None => format!("{:?}: {:?}", v.criterion, v.status),
    }
}

fn run_criteria(scenario: &Scenario, flags: &Flags, p: &Parameters, check: Check, summary: &mut Vec<String>) -> Result<Value> {
    let (ctx, t) = (&scenario.ctx, &scenario.tau);
    let (set_name, a) = scenario.resolve_set(flags.set.as_deref())?;
    let (n, th) = (p.horizon, p.threshold);

    let one = |check: Check, summary: &mut Vec<String>| -> Result<Value> {
        Ok(match check {
            Check::T23c | Check::T23d | Check::T23e | Check::T23f => {
                let v = match check {
                    Check::T23c => criteria::thm23_c(ctx, t, a, n, th)?,
                    Check::T23d => criteria::thm23_d(ctx, t, a, n, th)?,
                    Check::T23e => criteria::thm23_e(ctx, t, a, n, th)?,
                    _ => criteria::thm23_f(ctx, t, a, n, th, p.delta)?,
                };
                summary.push(verdict_line(&v));
                to_value(&v)
            }
            Check::T22 => {
                let v = criteria::thm22_check(ctx, t, a, n, th)?;
                summary.push(verdict_line(&v));
                to_value(&v)
            }
            Check::T21 => {
                let (name, family) = scenario
                    .resolve_family(flags.family.as_deref())
                    .ok_or_else(|| Error::Precondition("scenario defines no set family".into()))?;
                let r = criteria::thm21_check(ctx, t, family, n, th)?;
                summary.push(format!("family {name}"));
                summary.push(verdict_line(&r.a));
                summary.push(verdict_line(&r.b));
                let mut v = to_value(&r);
                v["family"] = Value::String(name);
                v
            }
            Check::L1 => {
                let seed = flags.seed.unwrap_or(DEFAULT_SEED);
                let trials = flags.trials.unwrap_or(DEFAULT_TRIALS);
                let r = criteria::lemma1_equivalence_check(ctx, t, trials, seed)?;
                summary.push(format!(
                    "L1: forward {} converse {} over {trials} trials",
                    if r.forward.holds { "holds" } else { "fails" },
                    if r.converse.holds { "holds" } else { "fails" }
                ));
                to_value(&r)
            }
            Check::All => unreachable!(),
        })
    };

    if check != Check::All {
        let mut v = one(check, summary)?;
        if let Value::Object(m) = &mut v {
            m.insert("set".into(), Value::String(set_name));
        }
        return Ok(v);
    }
    let mut results = serde_json::Map::new();
    let mut skipped = serde_json::Map::new();
    for c in [Check::T23c, Check::T23d, Check::T23e, Check::T23f, Check::T21, Check::T22, Check::L1] {
        let key = to_value(&c).as_str().unwrap().to_string();
        match one(c, summary) {
            Ok(v) => {
                results.insert(key, v);
            }
            Err(Error::Precondition(reason)) => {
                summary.push(format!("{key}: skipped ({reason})"));
                skipped.insert(key, Value::String(reason));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(json!({ "set": set_name, "results": results, "skipped": skipped }))
}

fn crosscheck(scenario: &Scenario, flags: &Flags, report: &mut RunReport) -> Result<()> {
    let p = report.parameters.clone();
    let (set_name, a) = scenario.resolve_set(flags.set.as_deref())?;
    let cfg = MatrixConfig {
        horizon: p.horizon,
        threshold: p.threshold,
        delta: p.delta,
        orbit_horizon: p.horizon,
        thresholds: Thresholds {
            eps_low: p.eps_low,
            ..Thresholds::default()
        },
        candidates: scenario.candidates(),
    };
    let matrix = criteria::consistency_matrix(&scenario.ctx, &scenario.tau, a, &cfg, flags.exec)?;
    let verdicts = run_criteria(scenario, flags, &p, Check::All, &mut report.summary)?;
    for row in &matrix.rows {
        report.summary.push(format!(
            "{:<15} {:<24} predicts {:<5} {}",
            row.check,
            row.status,
            row.predicts_witness,
            if row.agrees { "agrees" } else { "DISAGREES" }
        ));
    }
    report.output = json!({
        "set": set_name,
        "matrix": to_value(&matrix),
        "criteria": verdicts,
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    fn s3() -> Scenario {
        parse_scenario_str(
            r#"{
            "name": "s3",
            "space": {"domain": "integers", "weights": {"kind": "sym_geometric", "ratio": 0.5}},
            "phi": {"kind": "power", "p": 1.0},
            "weight": {"kind": "constant", "c": 1.0},
            "tau": {"kind": "shift_z", "offset": 1},
            "sets": {"A0": [0]},
            "vectors": {"blocks1": {"kind": "blocks", "peaks": [[4, 1.0], [16, 1.0], [64, 1.0], [256, 1.0]]}},
            "defaults": {"horizon": 300, "set": "A0"}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn norm_of_default_set() {
        let r = run_command(Command::Norm, &s3(), &Flags::default()).unwrap();
        assert_eq!(r.output["norm"], 1.0);
        assert_eq!(r.output["target"], "set:A0");
        assert!(r.render(Format::Csv).is_err());
    }

    #[test]
    fn orbit_csv_has_a_row_per_step() {
        let flags = Flags {
            vector: Some("blocks1".into()),
            ..Flags::default()
        };
        let r = run_command(Command::Orbit, &s3(), &flags).unwrap();
        let csv = r.render(Format::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,norm,sup_norm,intersection_norm");
        assert_eq!(lines.len(), 302);
        assert!(lines[1].starts_with("0,"));
        assert_eq!(r.output["orbit"]["classification"], "SemiIrregularWitness");
    }

    #[test]
    fn criteria_single_check() {
        let flags = Flags {
            check: Some(Check::T23c),
            ..Flags::default()
        };
        let r = run_command(Command::Criteria, &s3(), &flags).unwrap();
        assert_eq!(r.output["witness"]["n"], 20);
        assert_eq!(r.output["status"], "WitnessedDivergence");
    }

    #[test]
    fn criteria_all_skips_missing_family() {
        let r = run_command(Command::Criteria, &s3(), &Flags::default()).unwrap();
        assert!(r.output["skipped"]["T21"].is_string());
        assert_eq!(r.output["results"]["T22"]["witness"]["pair"], json!([0, 20]));
        let single = Flags {
            check: Some(Check::T21),
            ..Flags::default()
        };
        assert!(matches!(run_command(Command::Criteria, &s3(), &single), Err(Error::Precondition(_))));
    }

    #[test]
    fn json_is_deterministic() {
        let s = s3();
        let a = run_command(Command::Crosscheck, &s, &Flags::default()).unwrap().to_json();
        let b = run_command(Command::Crosscheck, &s, &Flags::default()).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn parses_checks_and_formats() {
        assert_eq!("T23c".parse::<Check>().unwrap(), Check::T23c);
        assert_eq!("all".parse::<Check>().unwrap(), Check::All);
        assert!("T99".parse::<Check>().is_err());
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
    }
}
