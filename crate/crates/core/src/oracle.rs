//! From-scratch recomputation of estimator trajectories.
//!
//! [`recompute_estimates`] rebuilds the estimate pair at every attack event
//! directly from the defining max-rules: each duty sample is recomputed with
//! a fresh interval-set measure over `[0, h_i + len_i]`, and each event's
//! estimate is the maximum over its full sample prefix, with no incremental
//! bookkeeping shared with [`crate::estimator::EstimatorState`]. Agreement
//! between the two routes is exact (the same floating-point operations in
//! the same order), so cross-checks assert bitwise equality.
//!
//! The recomputation is quadratic in the event count by construction; with
//! the `parallel` feature the per-event work fans out over rayon.

use crate::dos_model::{DosModelError, DosSequence};
use crate::estimator::{EstimatorConfig, EstimatorState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleEventKind {
    Launch,
    Completion,
}

/// Estimates in force immediately after one event, recomputed from scratch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleStep {
    pub time: f64,
    pub kind: OracleEventKind,
    /// 1-based index among events of the same kind.
    pub index: u64,
    pub bd_hat: f64,
    pub bf_hat: f64,
}

struct EventPlan {
    time: f64,
    kind: OracleEventKind,
    index: u64,
    launches_seen: u64,
    completions_seen: u64,
}

struct EventPlanSet {
    plan: Vec<EventPlan>,
    launch_times: Vec<f64>,
    completion_ends: Vec<f64>,
}

fn plan_events(seq: &DosSequence, horizon: f64) -> Result<EventPlanSet, DosModelError> {
    let mut plan = Vec::new();
    let mut launch_times = Vec::new();
    let mut completion_ends = Vec::new();
    for (i, iv) in seq.intervals().enumerate() {
        let iv = iv?;
        if iv.start() > horizon {
            break;
        }
        // Only the last interval can be left open (by the horizon cut), so
        // at the n-th launch exactly n - 1 completions have been seen.
        let n = i as u64 + 1;
        launch_times.push(iv.start());
        plan.push(EventPlan {
            time: iv.start(),
            kind: OracleEventKind::Launch,
            index: n,
            launches_seen: n,
            completions_seen: n - 1,
        });
        if iv.end() > horizon {
            break;
        }
        completion_ends.push(iv.end());
        plan.push(EventPlan {
            time: iv.end(),
            kind: OracleEventKind::Completion,
            index: n,
            launches_seen: n,
            completions_seen: n,
        });
    }
    Ok(EventPlanSet {
        plan,
        launch_times,
        completion_ends,
    })
}

fn duty_samples(seq: &DosSequence, ends: &[f64]) -> Result<Vec<f64>, DosModelError> {
    let measure = |end: &f64| -> Result<f64, DosModelError> {
        let m = seq.attack_measure(0.0, *end)?;
        Ok(if *end > 0.0 { m / *end } else { 0.0 })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ends.par_iter().map(measure).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ends.iter().map(measure).collect()
    }
}

/// The max-rules recomputed over the full sample prefix of one event.
fn eval_step(e: &EventPlan, duty: &[f64], rate: &[f64], config: EstimatorConfig) -> OracleStep {
    let eps = config.epsilon0();
    let theta = config.theta();
    let ell = config.ell();
    let mut bd = eps;
    if e.completions_seen >= ell {
        for i in ell..=e.completions_seen {
            bd = bd.max(theta * duty[(i - 1) as usize] + (1.0 - theta));
        }
    }
    let mut bf = eps;
    if e.launches_seen >= ell {
        for i in ell..=e.launches_seen {
            bf = bf.max(rate[(i - 1) as usize] / theta);
        }
    }
    OracleStep {
        time: e.time,
        kind: e.kind,
        index: e.index,
        bd_hat: bd,
        bf_hat: bf,
    }
}

fn evaluate_plan(
    plan: &[EventPlan],
    duty: &[f64],
    rate: &[f64],
    config: EstimatorConfig,
) -> Vec<OracleStep> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        plan.par_iter().map(|e| eval_step(e, duty, rate, config)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        plan.iter().map(|e| eval_step(e, duty, rate, config)).collect()
    }
}

fn evaluate_plan_serial(
    plan: &[EventPlan],
    duty: &[f64],
    rate: &[f64],
    config: EstimatorConfig,
) -> Vec<OracleStep> {
    plan.iter().map(|e| eval_step(e, duty, rate, config)).collect()
}

/// Recompute the estimate trajectory from scratch at every event up to the
/// horizon. Parallel over events when the `parallel` feature is enabled.
pub fn recompute_estimates(
    seq: &DosSequence,
    config: EstimatorConfig,
    horizon: f64,
) -> Result<Vec<OracleStep>, DosModelError> {
    let set = plan_events(seq, horizon)?;
    let duty = duty_samples(seq, &set.completion_ends)?;
    let rate = rate_samples(&set.launch_times);
    Ok(evaluate_plan(&set.plan, &duty, &rate, config))
}

/// Sequential twin of [`recompute_estimates`], kept unconditionally for
/// comparison.
pub fn recompute_estimates_serial(
    seq: &DosSequence,
    config: EstimatorConfig,
    horizon: f64,
) -> Result<Vec<OracleStep>, DosModelError> {
    let set = plan_events(seq, horizon)?;
    let duty: Vec<f64> = set
        .completion_ends
        .iter()
        .map(|end| {
            let m = seq.attack_measure(0.0, *end)?;
            Ok(if *end > 0.0 { m / *end } else { 0.0 })
        })
        .collect::<Result<_, DosModelError>>()?;
    let rate = rate_samples(&set.launch_times);
    Ok(evaluate_plan_serial(&set.plan, &duty, &rate, config))
}

fn rate_samples(launch_times: &[f64]) -> Vec<f64> {
    launch_times
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if *h > 0.0 {
                (i as f64 + 1.0) / h
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// First disagreement between a from-scratch trajectory and an event-driven
/// replay, or `None` when they agree exactly. Both the update instants and
/// the values must match bitwise.
pub fn divergence(steps: &[OracleStep], state: &EstimatorState) -> Option<String> {
    let launches: Vec<&OracleStep> = steps
        .iter()
        .filter(|s| s.kind == OracleEventKind::Launch)
        .collect();
    let completions: Vec<&OracleStep> = steps
        .iter()
        .filter(|s| s.kind == OracleEventKind::Completion)
        .collect();
    if launches.len() != state.bf_steps().len() {
        return Some(format!(
            "launch count mismatch: oracle {} vs replay {}",
            launches.len(),
            state.bf_steps().len()
        ));
    }
    if completions.len() != state.bd_steps().len() {
        return Some(format!(
            "completion count mismatch: oracle {} vs replay {}",
            completions.len(),
            state.bd_steps().len()
        ));
    }
    for (o, (t, bf)) in launches.iter().zip(state.bf_steps()) {
        if o.time != *t || o.bf_hat != *bf {
            return Some(format!(
                "launch {}: oracle ({}, {}) vs replay ({t}, {bf})",
                o.index, o.time, o.bf_hat
            ));
        }
    }
    for (o, (t, bd)) in completions.iter().zip(state.bd_steps()) {
        if o.time != *t || o.bd_hat != *bd {
            return Some(format!(
                "completion {}: oracle ({}, {}) vs replay ({t}, {bd})",
                o.index, o.time, o.bd_hat
            ));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dos_model::DosInterval;
    use crate::estimator::replay;

    fn odd_unit_intervals() -> DosSequence {
        DosSequence::eventually_periodic(
            vec![],
            3.0,
            2.0,
            vec![DosInterval::new(0.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn oracle_agrees_with_the_event_driven_replay() {
        let seq = odd_unit_intervals();
        let config = EstimatorConfig::new(0.01, 0.67, 2).unwrap();
        let horizon = 500.0;
        let steps = recompute_estimates(&seq, config, horizon).unwrap();
        let state = replay(&seq, config, horizon).unwrap();
        assert_eq!(divergence(&steps, &state), None);
    }

    #[test]
    fn parallel_and_serial_recomputations_are_identical() {
        let seq = odd_unit_intervals();
        let config = EstimatorConfig::new(0.05, 0.8, 3).unwrap();
        let par = recompute_estimates(&seq, config, 300.0).unwrap();
        let ser = recompute_estimates_serial(&seq, config, 300.0).unwrap();
        assert_eq!(par, ser);
    }

    #[test]
    fn divergence_reports_a_mismatch() {
        let seq = odd_unit_intervals();
        let config = EstimatorConfig::new(0.01, 0.67, 2).unwrap();
        let mut steps = recompute_estimates(&seq, config, 100.0).unwrap();
        let state = replay(&seq, config, 100.0).unwrap();
        assert_eq!(steps[2].kind, OracleEventKind::Launch);
        steps[2].bf_hat += 1e-9;
        assert!(divergence(&steps, &state).is_some());
    }
}
