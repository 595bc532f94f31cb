//! Scenario execution: estimator replay with per-event bound audits,
//! controller dispatch, and summary extraction.

use dossim_core::consensus::{self, Graph, MasScenario, MasTrace};
use dossim_core::dos_model::DosSequence;
use dossim_core::estimator::EstimatorState;
use dossim_core::impulsive::{self, ImpulsiveScenario, ImpulsiveTrace, Plant};
use dossim_core::linalg::{norm2, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::{ControllerSpec, ScenarioConfig, Topology, X0Spec};

#[derive(Debug, Error)]
#[error("scenario `{scenario}`: {message}")]
pub struct RunError {
    pub scenario: String,
    pub message: String,
}

/// One row of the estimator timeline; `kind` is one of `init`, `launch`,
/// `completion`, `horizon`.
#[derive(Clone, Copy, Debug)]
pub struct EstimateRow {
    pub t: f64,
    pub bd: f64,
    pub bf: f64,
    pub kind: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub variant: String,
    pub seed: Option<u64>,
    /// First instant from which both estimates verify as genuine bounds for
    /// the rest of the run; `None` means never within the horizon.
    pub reliability_time: Option<f64>,
    pub final_bd_hat: f64,
    pub final_bf_hat: f64,
    pub settling_time: Option<f64>,
    pub peak_state_norm: Option<f64>,
}

#[derive(Debug)]
pub struct VariantOutcome {
    pub label: String,
    pub estimator_rows: Vec<EstimateRow>,
    pub estimator: EstimatorState,
    pub consensus: Option<MasTrace>,
    pub impulsive: Option<ImpulsiveTrace>,
    pub summary: RunSummary,
}

fn fail(scenario: &str, err: impl std::fmt::Display) -> RunError {
    RunError {
        scenario: scenario.to_string(),
        message: err.to_string(),
    }
}

/// Replay the estimator over the sequence, recording one row per event and
/// auditing both estimates against the bound oracles at every step.
fn replay_with_audit(
    seq: &DosSequence,
    config: dossim_core::estimator::EstimatorConfig,
    horizon: f64,
) -> Result<(Vec<EstimateRow>, Option<f64>, EstimatorState), Box<dyn std::error::Error>> {
    let mut state = EstimatorState::new(config);
    let mut rows = Vec::new();
    let mut checks: Vec<(f64, bool)> = Vec::new();
    let audit = |bd: f64, bf: f64| -> Result<bool, Box<dyn std::error::Error>> {
        Ok(seq.verify_duration_bound(bd, horizon)?.holds
            && seq.verify_frequency_bound(bf, horizon)?.holds)
    };
    rows.push(EstimateRow {
        t: 0.0,
        bd: state.bd_hat(),
        bf: state.bf_hat(),
        kind: "init",
    });
    checks.push((0.0, audit(state.bd_hat(), state.bf_hat())?));
    for iv in seq.intervals() {
        let iv = iv?;
        if iv.start() > horizon {
            break;
        }
        state.on_attack_start(iv.start())?;
        rows.push(EstimateRow {
            t: iv.start(),
            bd: state.bd_hat(),
            bf: state.bf_hat(),
            kind: "launch",
        });
        checks.push((iv.start(), audit(state.bd_hat(), state.bf_hat())?));
        if iv.end() > horizon {
            break;
        }
        let measure = seq.attack_measure(0.0, iv.end())?;
        state.on_attack_end(iv.start(), iv.length(), measure)?;
        rows.push(EstimateRow {
            t: iv.end(),
            bd: state.bd_hat(),
            bf: state.bf_hat(),
            kind: "completion",
        });
        checks.push((iv.end(), audit(state.bd_hat(), state.bf_hat())?));
    }
    state.advance_to(horizon.max(state.now()))?;
    rows.push(EstimateRow {
        t: horizon,
        bd: state.bd_hat(),
        bf: state.bf_hat(),
        kind: "horizon",
    });

    // Reliability is the earliest audited instant whose suffix is all-true.
    let mut reliability = None;
    for &(t, ok) in checks.iter().rev() {
        if ok {
            reliability = Some(t);
        } else {
            break;
        }
    }
    Ok((rows, reliability, state))
}

/// First instant from which the magnitude stays below the threshold for the
/// rest of the trace.
fn settling_time(points: &[(f64, f64)], threshold: f64) -> Option<f64> {
    let mut settle = None;
    for &(t, value) in points.iter().rev() {
        if value < threshold {
            settle = Some(t);
        } else {
            break;
        }
    }
    settle
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<VariantOutcome>, RunError> {
    let seq = cfg.sequence.build().map_err(|e| fail(&cfg.name, e))?;
    let variants = if cfg.sweep.is_empty() {
        vec![cfg.estimator]
    } else {
        cfg.sweep.clone()
    };
    let labelled = !cfg.sweep.is_empty();

    variants
        .into_iter()
        .map(|spec| {
            let label = if labelled {
                spec.label()
            } else {
                String::new()
            };
            let config = spec.build().map_err(|e| fail(&cfg.name, e))?;
            let (estimator_rows, reliability_time, estimator) =
                replay_with_audit(&seq, config, cfg.horizon).map_err(|e| fail(&cfg.name, e))?;

            let mut consensus_trace = None;
            let mut impulsive_trace = None;
            let mut settling = None;
            let mut peak = None;
            match &cfg.controller {
                ControllerSpec::None => {}
                ControllerSpec::Consensus(spec_c) => {
                    let graph = match spec_c.topology {
                        Topology::Ring => Graph::ring(spec_c.agents),
                        Topology::Path => Graph::path(spec_c.agents),
                        Topology::Complete => Graph::complete(spec_c.agents),
                    }
                    .map_err(|e| fail(&cfg.name, e))?;
                    let x0 = match &spec_c.x0 {
                        X0Spec::Explicit(states) => states.clone(),
                        X0Spec::Random { low, high } => {
                            let seed = cfg.seed.expect("validated at parse time");
                            let mut rng = ChaCha8Rng::seed_from_u64(seed);
                            consensus::uniform_initial_states(&mut rng, spec_c.agents, *low, *high)
                        }
                    };
                    let scenario = MasScenario {
                        graph,
                        x0,
                        delta0: spec_c.delta0,
                        gamma1: spec_c.gamma1,
                        estimator: config,
                        seq: seq.clone(),
                        horizon: cfg.horizon,
                    };
                    let trace = consensus::run(&scenario).map_err(|e| fail(&cfg.name, e))?;
                    let points: Vec<(f64, f64)> =
                        trace.samples.iter().map(|s| (s.t, s.e_norm)).collect();
                    settling = settling_time(&points, cfg.settle_threshold);
                    peak = Some(points.iter().map(|p| p.1).fold(0.0, f64::max));
                    consensus_trace = Some(trace);
                }
                ControllerSpec::Impulsive(spec_i) => {
                    let a = Matrix::from_rows(spec_i.a.clone()).map_err(|e| fail(&cfg.name, e))?;
                    let plant =
                        Plant::linear(a, spec_i.jump_scale).map_err(|e| fail(&cfg.name, e))?;
                    let scenario = ImpulsiveScenario {
                        plant,
                        x0: spec_i.x0.clone(),
                        gamma3: spec_i.gamma3,
                        estimator: config,
                        seq: seq.clone(),
                        horizon: cfg.horizon,
                        integrator_step: spec_i.integrator_step,
                    };
                    let trace = impulsive::run(&scenario).map_err(|e| fail(&cfg.name, e))?;
                    let points: Vec<(f64, f64)> = trace
                        .events
                        .iter()
                        .map(|e| (e.t, norm2(&e.x_minus).max(e.v)))
                        .collect();
                    settling = settling_time(&points, cfg.settle_threshold);
                    peak = Some(points.iter().map(|p| p.1).fold(trace.x0_norm, f64::max));
                    impulsive_trace = Some(trace);
                }
            }

            let summary = RunSummary {
                scenario: cfg.name.clone(),
                variant: label.clone(),
                seed: cfg.seed,
                reliability_time,
                final_bd_hat: estimator.bd_hat(),
                final_bf_hat: estimator.bf_hat(),
                settling_time: settling,
                peak_state_norm: peak,
            };
            Ok(VariantOutcome {
                label,
                estimator_rows,
                estimator,
                consensus: consensus_trace,
                impulsive: impulsive_trace,
                summary,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    #[test]
    fn estimator_only_run_on_an_empty_sequence_is_reliable_immediately() {
        let cfg = parse_scenario(
            "name = empty\nsequence.kind = finite\nestimator.epsilon0 = 0.01\n\
             estimator.theta = 0.67\nestimator.ell = 2\ncontroller.kind = none\nrun.horizon = 5\n",
        )
        .unwrap();
        let outcomes = run_scenario(&cfg).unwrap();
        assert_eq!(outcomes.len(), 1);
        assert_eq!(outcomes[0].summary.reliability_time, Some(0.0));
        assert_eq!(outcomes[0].summary.final_bd_hat, 0.01);
    }

    #[test]
    fn settling_time_finds_the_last_crossing() {
        let points = vec![(0.0, 5.0), (1.0, 0.5), (2.0, 3.0), (3.0, 0.2), (4.0, 0.1)];
        assert_eq!(settling_time(&points, 1.0), Some(3.0));
        assert_eq!(settling_time(&points, 0.05), None);
        assert_eq!(settling_time(&[(0.0, 0.0)], 1.0), Some(0.0));
    }
}
