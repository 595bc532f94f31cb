//! Line-oriented scenario files.
//!
//! A scenario is a flat list of `section.key = value` lines with `#`
//! comments. Times are decimal literals; lists are space-separated; tuples
//! and matrices are parenthesized, comma-separated, with `;` between matrix
//! rows. Every key is validated at parse time and diagnostics carry the
//! offending key and line number. [`print_scenario`] renders a config back
//! to text such that parsing the result reproduces the config exactly.
//!
//! ```text
//! name = example1_estimator
//! sequence.kind = eventually_periodic
//! sequence.prologue = (4, 0.5) (9, 0.5)
//! sequence.start = 12
//! sequence.period = 2
//! sequence.pattern = (0, 1.3333333333333333)
//! estimator.epsilon0 = 0.01
//! estimator.theta = 0.67
//! estimator.ell = 2
//! controller.kind = none
//! run.horizon = 60
//! run.seed = 1
//! outputs = estimates plotdata summary
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dossim_core::dos_model::{DosInterval, DosSequence};
use dossim_core::estimator::EstimatorConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: &'static str },
    #[error("line {line}: invalid value for `{key}`: {msg}")]
    InvalidValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("`{key}`: {msg}")]
    Invariant { key: String, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SequenceSpec {
    Finite {
        intervals: Vec<(f64, f64)>,
    },
    EventuallyPeriodic {
        prologue: Vec<(f64, f64)>,
        start: f64,
        period: f64,
        pattern: Vec<(f64, f64)>,
    },
}

impl SequenceSpec {
    pub fn build(&self) -> Result<DosSequence, ScenarioError> {
        let lift = |pairs: &[(f64, f64)]| -> Result<Vec<DosInterval>, ScenarioError> {
            pairs
                .iter()
                .map(|&(h, len)| {
                    DosInterval::new(h, len).map_err(|e| ScenarioError::Invariant {
                        key: "sequence".into(),
                        msg: e.to_string(),
                    })
                })
                .collect()
        };
        let seq = match self {
            SequenceSpec::Finite { intervals } => DosSequence::finite(lift(intervals)?),
            SequenceSpec::EventuallyPeriodic {
                prologue,
                start,
                period,
                pattern,
            } => DosSequence::eventually_periodic(lift(prologue)?, *start, *period, lift(pattern)?),
        };
        seq.map_err(|e| ScenarioError::Invariant {
            key: "sequence".into(),
            msg: e.to_string(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorSpec {
    pub epsilon0: f64,
    pub theta: f64,
    pub ell: u64,
    pub allow_theta_one: bool,
}

impl EstimatorSpec {
    pub fn build(&self) -> Result<EstimatorConfig, ScenarioError> {
        let result = if self.theta == 1.0 && self.allow_theta_one {
            EstimatorConfig::with_theta_one(self.epsilon0, self.ell)
        } else {
            EstimatorConfig::new(self.epsilon0, self.theta, self.ell)
        };
        result.map_err(|e| ScenarioError::Invariant {
            key: "estimator".into(),
            msg: format!("{e} (theta must be < 1 unless estimator.allow_theta_one is set)"),
        })
    }

    pub fn label(&self) -> String {
        format!("theta{}_ell{}_eps{}", self.theta, self.ell, self.epsilon0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology {
    Ring,
    Path,
    Complete,
}

#[derive(Clone, Debug, PartialEq)]
pub enum X0Spec {
    Explicit(Vec<f64>),
    Random { low: f64, high: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusSpec {
    pub topology: Topology,
    pub agents: usize,
    pub x0: X0Spec,
    pub delta0: f64,
    pub gamma1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpulsiveSpec {
    pub a: Vec<Vec<f64>>,
    pub jump_scale: f64,
    pub gamma3: f64,
    pub x0: Vec<f64>,
    pub integrator_step: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControllerSpec {
    None,
    Consensus(ConsensusSpec),
    Impulsive(ImpulsiveSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputKind {
    Estimates,
    Trace,
    Summary,
    Plotdata,
}

impl OutputKind {
    fn name(self) -> &'static str {
        match self {
            OutputKind::Estimates => "estimates",
            OutputKind::Trace => "trace",
            OutputKind::Summary => "summary",
            OutputKind::Plotdata => "plotdata",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub sequence: SequenceSpec,
    pub estimator: EstimatorSpec,
    pub controller: ControllerSpec,
    pub horizon: f64,
    pub seed: Option<u64>,
    pub settle_threshold: f64,
    pub outputs: Vec<OutputKind>,
    /// Estimator variants to run instead of the base estimator; empty means
    /// a single run with `estimator`.
    pub sweep: Vec<EstimatorSpec>,
}

struct KeyBag {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyBag {
    fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ScenarioError::Syntax {
                    line,
                    text: content.to_string(),
                });
            }
            if entries
                .insert(key.clone(), (value.trim().to_string(), line))
                .is_some()
            {
                return Err(ScenarioError::DuplicateKey { line, key });
            }
        }
        Ok(KeyBag { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &'static str) -> Result<(String, usize), ScenarioError> {
        self.take(key).ok_or(ScenarioError::MissingKey { key })
    }

    fn finish(self) -> Result<(), ScenarioError> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return Err(ScenarioError::UnknownKey { line, key });
        }
        Ok(())
    }
}

fn bad(key: &str, line: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidValue {
        line,
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64, ScenarioError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| bad(key, line, format!("`{value}` is not a number")))
}

fn parse_u64(key: &str, value: &str, line: usize) -> Result<u64, ScenarioError> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| bad(key, line, format!("`{value}` is not an integer")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, ScenarioError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(
            key,
            line,
            format!("`{other}` is not `true` or `false`"),
        )),
    }
}

fn parse_f64_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>, ScenarioError> {
    value
        .split_whitespace()
        .map(|tok| parse_f64(key, tok, line))
        .collect()
}

/// Parenthesized groups: `(a, b) (c, d)` with `;` splitting rows inside a
/// group.
fn parse_groups(key: &str, value: &str, line: usize) -> Result<Vec<Vec<Vec<f64>>>, ScenarioError> {
    let mut groups = Vec::new();
    let mut rest = value.trim();
    while !rest.is_empty() {
        if !rest.starts_with('(') {
            return Err(bad(key, line, format!("expected `(`, found `{rest}`")));
        }
        let close = rest
            .find(')')
            .ok_or_else(|| bad(key, line, "unclosed parenthesis".to_string()))?;
        let inner = &rest[1..close];
        let rows: Result<Vec<Vec<f64>>, _> = inner
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|tok| parse_f64(key, tok, line))
                    .collect()
            })
            .collect();
        groups.push(rows?);
        rest = rest[close + 1..].trim_start();
    }
    Ok(groups)
}

fn parse_pairs(key: &str, value: &str, line: usize) -> Result<Vec<(f64, f64)>, ScenarioError> {
    parse_groups(key, value, line)?
        .into_iter()
        .map(|group| {
            if group.len() != 1 || group[0].len() != 2 {
                return Err(bad(key, line, "each entry must be a (start, length) pair"));
            }
            Ok((group[0][0], group[0][1]))
        })
        .collect()
}

fn parse_triples(
    key: &str,
    value: &str,
    line: usize,
) -> Result<Vec<(f64, f64, f64)>, ScenarioError> {
    parse_groups(key, value, line)?
        .into_iter()
        .map(|group| {
            if group.len() != 1 || group[0].len() != 3 {
                return Err(bad(
                    key,
                    line,
                    "each entry must be a (theta, ell, epsilon0) triple",
                ));
            }
            Ok((group[0][0], group[0][1], group[0][2]))
        })
        .collect()
}

fn parse_matrix(key: &str, value: &str, line: usize) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let groups = parse_groups(key, value, line)?;
    if groups.len() != 1 {
        return Err(bad(key, line, "expected a single parenthesized matrix"));
    }
    let rows = groups.into_iter().next().expect("length checked");
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(bad(
            key,
            line,
            "matrix rows must be non-empty and of equal length",
        ));
    }
    Ok(rows)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut bag = KeyBag::parse(text)?;

    let (name, name_line) = bag.require("name")?;
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(bad("name", name_line, "must be non-empty [A-Za-z0-9_-]"));
    }

    let (kind, kind_line) = bag.require("sequence.kind")?;
    let sequence = match kind.as_str() {
        "finite" => {
            let intervals = match bag.take("sequence.intervals") {
                Some((v, l)) => parse_pairs("sequence.intervals", &v, l)?,
                None => Vec::new(),
            };
            SequenceSpec::Finite { intervals }
        }
        "eventually_periodic" => {
            let prologue = match bag.take("sequence.prologue") {
                Some((v, l)) => parse_pairs("sequence.prologue", &v, l)?,
                None => Vec::new(),
            };
            let (start, sl) = bag.require("sequence.start")?;
            let (period, pl) = bag.require("sequence.period")?;
            let (pattern, tl) = bag.require("sequence.pattern")?;
            SequenceSpec::EventuallyPeriodic {
                prologue,
                start: parse_f64("sequence.start", &start, sl)?,
                period: parse_f64("sequence.period", &period, pl)?,
                pattern: parse_pairs("sequence.pattern", &pattern, tl)?,
            }
        }
        other => {
            return Err(bad(
                "sequence.kind",
                kind_line,
                format!("`{other}` is not `finite` or `eventually_periodic`"),
            ))
        }
    };
    sequence.build()?; // validate separation and ranges at parse time

    let (eps, el) = bag.require("estimator.epsilon0")?;
    let (theta, tl) = bag.require("estimator.theta")?;
    let (ell, ll) = bag.require("estimator.ell")?;
    let allow_theta_one = match bag.take("estimator.allow_theta_one") {
        Some((v, l)) => parse_bool("estimator.allow_theta_one", &v, l)?,
        None => false,
    };
    let estimator = EstimatorSpec {
        epsilon0: parse_f64("estimator.epsilon0", &eps, el)?,
        theta: parse_f64("estimator.theta", &theta, tl)?,
        ell: parse_u64("estimator.ell", &ell, ll)?,
        allow_theta_one,
    };
    estimator.build()?;

    let (ckind, ckl) = bag.require("controller.kind")?;
    let controller = match ckind.as_str() {
        "none" => ControllerSpec::None,
        "consensus" => {
            let (topo, topo_line) = bag.require("controller.topology")?;
            let topology = match topo.as_str() {
                "ring" => Topology::Ring,
                "path" => Topology::Path,
                "complete" => Topology::Complete,
                other => {
                    return Err(bad(
                        "controller.topology",
                        topo_line,
                        format!("`{other}` is not `ring`, `path` or `complete`"),
                    ))
                }
            };
            let (agents, al) = bag.require("controller.agents")?;
            let agents = parse_u64("controller.agents", &agents, al)? as usize;
            let (x0_raw, xl) = bag.require("controller.x0")?;
            let x0 = if x0_raw.trim() == "random" {
                let (low, high) = match bag.take("controller.x0_range") {
                    Some((v, l)) => {
                        let pairs = parse_pairs("controller.x0_range", &v, l)?;
                        if pairs.len() != 1 {
                            return Err(bad(
                                "controller.x0_range",
                                l,
                                "expected one (low, high) pair",
                            ));
                        }
                        pairs[0]
                    }
                    None => (-10.0, 10.0),
                };
                if low >= high {
                    return Err(bad("controller.x0_range", xl, "low must be below high"));
                }
                X0Spec::Random { low, high }
            } else {
                let states = parse_f64_list("controller.x0", &x0_raw, xl)?;
                if states.len() != agents {
                    return Err(ScenarioError::Invariant {
                        key: "controller.x0".into(),
                        msg: format!("{} states for {} agents", states.len(), agents),
                    });
                }
                X0Spec::Explicit(states)
            };
            let (delta0, dl) = bag.require("controller.delta0")?;
            let (gamma1, gl) = bag.require("controller.gamma1")?;
            ControllerSpec::Consensus(ConsensusSpec {
                topology,
                agents,
                x0,
                delta0: parse_f64("controller.delta0", &delta0, dl)?,
                gamma1: parse_f64("controller.gamma1", &gamma1, gl)?,
            })
        }
        "impulsive" => {
            let (a, al) = bag.require("controller.a")?;
            let a = parse_matrix("controller.a", &a, al)?;
            let (scale, sl) = bag.require("controller.jump_scale")?;
            let (gamma3, gl) = bag.require("controller.gamma3")?;
            let (x0, xl) = bag.require("controller.x0")?;
            let x0 = parse_f64_list("controller.x0", &x0, xl)?;
            if x0.len() != a.len() {
                return Err(ScenarioError::Invariant {
                    key: "controller.x0".into(),
                    msg: format!("{} states for a {}-dimensional plant", x0.len(), a.len()),
                });
            }
            let integrator_step = match bag.take("controller.integrator_step") {
                Some((v, l)) => parse_f64("controller.integrator_step", &v, l)?,
                None => 1e-3,
            };
            ControllerSpec::Impulsive(ImpulsiveSpec {
                a,
                jump_scale: parse_f64("controller.jump_scale", &scale, sl)?,
                gamma3: parse_f64("controller.gamma3", &gamma3, gl)?,
                x0,
                integrator_step,
            })
        }
        other => {
            return Err(bad(
                "controller.kind",
                ckl,
                format!("`{other}` is not `none`, `consensus` or `impulsive`"),
            ))
        }
    };

    let (horizon, hl) = bag.require("run.horizon")?;
    let horizon = parse_f64("run.horizon", &horizon, hl)?;
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(bad("run.horizon", hl, "must be positive and finite"));
    }
    let seed = match bag.take("run.seed") {
        Some((v, l)) => Some(parse_u64("run.seed", &v, l)?),
        None => None,
    };
    let settle_threshold = match bag.take("run.settle_threshold") {
        Some((v, l)) => {
            let s = parse_f64("run.settle_threshold", &v, l)?;
            if !s.is_finite() || s <= 0.0 {
                return Err(bad("run.settle_threshold", l, "must be positive"));
            }
            s
        }
        None => 1e-3,
    };

    let outputs = match bag.take("outputs") {
        Some((v, l)) => {
            let mut kinds = Vec::new();
            for tok in v.split_whitespace() {
                kinds.push(match tok {
                    "estimates" => OutputKind::Estimates,
                    "trace" => OutputKind::Trace,
                    "summary" => OutputKind::Summary,
                    "plotdata" => OutputKind::Plotdata,
                    other => {
                        return Err(bad("outputs", l, format!("unknown output kind `{other}`")))
                    }
                });
            }
            kinds
        }
        None => vec![OutputKind::Summary],
    };

    if outputs.contains(&OutputKind::Trace) && matches!(controller, ControllerSpec::None) {
        return Err(ScenarioError::Invariant {
            key: "outputs".into(),
            msg: "`trace` output requires a controller".into(),
        });
    }

    let sweep = match bag.take("sweep.estimator") {
        Some((v, l)) => {
            let triples = parse_triples("sweep.estimator", &v, l)?;
            let mut variants = Vec::new();
            for (theta, ell, epsilon0) in triples {
                if ell.fract() != 0.0 || ell < 0.0 {
                    return Err(bad(
                        "sweep.estimator",
                        l,
                        format!("ell = {ell} is not an integer"),
                    ));
                }
                let spec = EstimatorSpec {
                    epsilon0,
                    theta,
                    ell: ell as u64,
                    allow_theta_one: false,
                };
                spec.build()?;
                variants.push(spec);
            }
            variants
        }
        None => Vec::new(),
    };

    if matches!(
        (&controller, &seed),
        (
            ControllerSpec::Consensus(ConsensusSpec {
                x0: X0Spec::Random { .. },
                ..
            }),
            None
        )
    ) {
        return Err(ScenarioError::MissingKey { key: "run.seed" });
    }

    bag.finish()?;
    Ok(ScenarioConfig {
        name,
        sequence,
        estimator,
        controller,
        horizon,
        seed,
        settle_threshold,
        outputs,
        sweep,
    })
}

fn write_pairs(out: &mut String, pairs: &[(f64, f64)]) {
    let rendered: Vec<String> = pairs.iter().map(|(a, b)| format!("({a}, {b})")).collect();
    out.push_str(&rendered.join(" "));
}

/// Render a config as scenario text; parsing the result reproduces the
/// config exactly (floats print in shortest round-trip form).
pub fn print_scenario(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name = {}", cfg.name);
    match &cfg.sequence {
        SequenceSpec::Finite { intervals } => {
            let _ = writeln!(out, "sequence.kind = finite");
            let mut line = String::from("sequence.intervals = ");
            write_pairs(&mut line, intervals);
            let _ = writeln!(out, "{}", line.trim_end());
        }
        SequenceSpec::EventuallyPeriodic {
            prologue,
            start,
            period,
            pattern,
        } => {
            let _ = writeln!(out, "sequence.kind = eventually_periodic");
            if !prologue.is_empty() {
                let mut line = String::from("sequence.prologue = ");
                write_pairs(&mut line, prologue);
                let _ = writeln!(out, "{line}");
            }
            let _ = writeln!(out, "sequence.start = {start}");
            let _ = writeln!(out, "sequence.period = {period}");
            let mut line = String::from("sequence.pattern = ");
            write_pairs(&mut line, pattern);
            let _ = writeln!(out, "{line}");
        }
    }
    let _ = writeln!(out, "estimator.epsilon0 = {}", cfg.estimator.epsilon0);
    let _ = writeln!(out, "estimator.theta = {}", cfg.estimator.theta);
    let _ = writeln!(out, "estimator.ell = {}", cfg.estimator.ell);
    if cfg.estimator.allow_theta_one {
        let _ = writeln!(out, "estimator.allow_theta_one = true");
    }
    match &cfg.controller {
        ControllerSpec::None => {
            let _ = writeln!(out, "controller.kind = none");
        }
        ControllerSpec::Consensus(c) => {
            let _ = writeln!(out, "controller.kind = consensus");
            let topo = match c.topology {
                Topology::Ring => "ring",
                Topology::Path => "path",
                Topology::Complete => "complete",
            };
            let _ = writeln!(out, "controller.topology = {topo}");
            let _ = writeln!(out, "controller.agents = {}", c.agents);
            match &c.x0 {
                X0Spec::Explicit(states) => {
                    let rendered: Vec<String> = states.iter().map(|v| format!("{v}")).collect();
                    let _ = writeln!(out, "controller.x0 = {}", rendered.join(" "));
                }
                X0Spec::Random { low, high } => {
                    let _ = writeln!(out, "controller.x0 = random");
                    let _ = writeln!(out, "controller.x0_range = ({low}, {high})");
                }
            }
            let _ = writeln!(out, "controller.delta0 = {}", c.delta0);
            let _ = writeln!(out, "controller.gamma1 = {}", c.gamma1);
        }
        ControllerSpec::Impulsive(i) => {
            let _ = writeln!(out, "controller.kind = impulsive");
            let rows: Vec<String> =
                i.a.iter()
                    .map(|row| {
                        row.iter()
                            .map(|v| format!("{v}"))
                            .collect::<Vec<_>>()
                            .join(", ")
                    })
                    .collect();
            let _ = writeln!(out, "controller.a = ({})", rows.join("; "));
            let _ = writeln!(out, "controller.jump_scale = {}", i.jump_scale);
            let _ = writeln!(out, "controller.gamma3 = {}", i.gamma3);
            let rendered: Vec<String> = i.x0.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "controller.x0 = {}", rendered.join(" "));
            let _ = writeln!(out, "controller.integrator_step = {}", i.integrator_step);
        }
    }
    let _ = writeln!(out, "run.horizon = {}", cfg.horizon);
    if let Some(seed) = cfg.seed {
        let _ = writeln!(out, "run.seed = {seed}");
    }
    let _ = writeln!(out, "run.settle_threshold = {}", cfg.settle_threshold);
    let rendered: Vec<&str> = cfg.outputs.iter().map(|o| o.name()).collect();
    let _ = writeln!(out, "outputs = {}", rendered.join(" "));
    if !cfg.sweep.is_empty() {
        let rendered: Vec<String> = cfg
            .sweep
            .iter()
            .map(|s| format!("({}, {}, {})", s.theta, s.ell, s.epsilon0))
            .collect();
        let _ = writeln!(out, "sweep.estimator = {}", rendered.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
name = demo
sequence.kind = finite
sequence.intervals = (1, 0.5) (3, 0)
estimator.epsilon0 = 0.01
estimator.theta = 0.67
estimator.ell = 2
controller.kind = none
run.horizon = 10
";

    #[test]
    fn minimal_scenario_parses() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        assert_eq!(cfg.name, "demo");
        assert_eq!(
            cfg.sequence,
            SequenceSpec::Finite {
                intervals: vec![(1.0, 0.5), (3.0, 0.0)]
            }
        );
        assert_eq!(cfg.outputs, vec![OutputKind::Summary]);
        assert_eq!(cfg.settle_threshold, 1e-3);
        assert!(cfg.sweep.is_empty());
    }

    #[test]
    fn empty_input_reports_the_missing_sequence() {
        // `name` is the first required key, then the sequence block.
        let err = parse_scenario("name = x\n").unwrap_err();
        assert_eq!(
            err,
            ScenarioError::MissingKey {
                key: "sequence.kind"
            }
        );
    }

    #[test]
    fn unknown_keys_carry_their_line() {
        let text = format!("{MINIMAL}bogus.key = 1\n");
        match parse_scenario(&text).unwrap_err() {
            ScenarioError::UnknownKey { line, key } => {
                assert_eq!(line, 9);
                assert_eq!(key, "bogus.key");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn theta_one_requires_the_explicit_bypass() {
        let text = MINIMAL.replace("estimator.theta = 0.67", "estimator.theta = 1");
        let err = parse_scenario(&text).unwrap_err();
        match err {
            ScenarioError::Invariant { key, msg } => {
                assert_eq!(key, "estimator");
                assert!(
                    msg.contains("theta"),
                    "message should cite the theta requirement: {msg}"
                );
            }
            other => panic!("unexpected error {other:?}"),
        }
        let text = format!(
            "{}estimator.allow_theta_one = true\n",
            MINIMAL.replace("estimator.theta = 0.67", "estimator.theta = 1")
        );
        assert_eq!(parse_scenario(&text).unwrap().estimator.theta, 1.0);
    }

    #[test]
    fn separation_violations_are_caught_at_parse_time() {
        let text = MINIMAL.replace("(1, 0.5) (3, 0)", "(1, 2) (2, 1)");
        assert!(matches!(
            parse_scenario(&text),
            Err(ScenarioError::Invariant { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_the_config() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&print_scenario(&cfg)).unwrap(), cfg);
    }
}
