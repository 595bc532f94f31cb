//! Event-driven estimation of DoS duration and frequency bounds.
//!
//! The estimator watches completed attack intervals and maintains two
//! running estimates that change value only at attack events:
//!
//! - at the n-th completion (time `h + len`), the duration estimate becomes
//!   `max(epsilon0, max over observed samples of theta * B_d(i) + (1 - theta))`
//!   where `B_d(i)` is the fraction of `[0, h_i + len_i]` under attack;
//! - at the n-th launch (time `h`), the frequency estimate becomes
//!   `max(epsilon0, max over observed samples of B_f(i) / theta)` where
//!   `B_f(i) = i / h_i`.
//!
//! Samples older than the `ell`-th event are ignored, and before the
//! `ell`-th event both estimates sit at the floor `epsilon0`. Skepticism is
//! governed by `theta < 1`: the estimates always assume an attacker slightly
//! stronger than the one observed, which is what makes them land inside the
//! true bound sets in finite time for every non-edge-case attacker. With
//! `theta = 1` the estimator trusts the data verbatim and provably fails on
//! attackers whose observed duty approaches its limit from below; that
//! configuration is rejected by [`EstimatorConfig::new`] and only reachable
//! through the explicitly unsound constructor used to reproduce the failure.
//!
//! [`reliability_deadline`] quantifies when the estimates become genuine
//! bounds, given caller-supplied lower envelopes on the attacker's activity
//! (validated here by defect scans before use).

use crate::dos_model::{DosModelError, DosSequence};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("epsilon0 must lie strictly inside (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("theta must lie strictly inside (0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("ell must be at least 2, got {0}")]
    InvalidEll(u64),
    #[error("attack start at {start} is out of order (previous attack ended at {prev_end}, clock at {now})")]
    OutOfOrderStart { start: f64, prev_end: f64, now: f64 },
    #[error("attack start reported while another attack (started {0}) is still open")]
    AttackInProgress(f64),
    #[error("completion for start {got} does not match the open attack (started {expected})")]
    MismatchedCompletion { expected: f64, got: f64 },
    #[error("no attack is open; completion at {0} rejected")]
    NoOpenAttack(f64),
    #[error("attack length must be finite and >= 0, got {0}")]
    InvalidAttackLength(f64),
    #[error("attacked measure {measure} is impossible for an attack ending at {end}")]
    InvalidMeasure { measure: f64, end: f64 },
    #[error("clock may only move forward: requested {requested}, currently at {now}")]
    ClockBackwards { requested: f64, now: f64 },
    #[error("query at {t} is beyond the observed history (clock at {now})")]
    QueryBeyondHistory { t: f64, now: f64 },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("{0} is only available for finite and eventually-periodic sequences")]
    RequiresStructuredSequence(&'static str),
    #[error("deadline input invalid: {0}")]
    InvalidDeadlineInput(String),
    #[error("theta = {theta} violates the deadline condition theta < {limit}")]
    ThetaCondition { theta: f64, limit: f64 },
    #[error("declared lower envelope does not hold: {0}")]
    EnvelopeRejected(String),
    #[error(transparent)]
    Model(#[from] DosModelError),
}

/// Tunables of the estimator. `theta` trades estimation speed against bound
/// tightness, `epsilon0` is the default floor, and `ell` delays estimation
/// until enough events have been seen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    epsilon0: f64,
    theta: f64,
    ell: u64,
}

impl EstimatorConfig {
    pub fn new(epsilon0: f64, theta: f64, ell: u64) -> Result<Self, EstimatorError> {
        if !epsilon0.is_finite() || epsilon0 <= 0.0 || epsilon0 >= 1.0 {
            return Err(EstimatorError::InvalidEpsilon(epsilon0));
        }
        if !theta.is_finite() || theta <= 0.0 || theta >= 1.0 {
            return Err(EstimatorError::InvalidTheta(theta));
        }
        if ell < 2 {
            return Err(EstimatorError::InvalidEll(ell));
        }
        Ok(EstimatorConfig {
            epsilon0,
            theta,
            ell,
        })
    }

    /// Deliberately unsound configuration with `theta = 1`: the estimator
    /// trusts observed samples verbatim and can stay below the true bounds
    /// forever. Exists so the failure mode can be reproduced; never use it
    /// to drive a controller.
    pub fn with_theta_one(epsilon0: f64, ell: u64) -> Result<Self, EstimatorError> {
        if !epsilon0.is_finite() || epsilon0 <= 0.0 || epsilon0 >= 1.0 {
            return Err(EstimatorError::InvalidEpsilon(epsilon0));
        }
        if ell < 2 {
            return Err(EstimatorError::InvalidEll(ell));
        }
        Ok(EstimatorConfig {
            epsilon0,
            theta: 1.0,
            ell,
        })
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }
}

/// A completed attack interval as observed by the estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackRecord {
    pub start: f64,
    pub length: f64,
}

/// Event-driven estimator state. Plain value; transitions are state-in,
/// state-out with no interior mutability, so independent estimators can run
/// concurrently.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    config: EstimatorConfig,
    now: f64,
    pending: Option<f64>,
    launches: u64,
    completions: u64,
    last_end: f64,
    bd_hat: f64,
    bf_hat: f64,
    events: Vec<AttackRecord>,
    bd_samples: Vec<f64>,
    bf_samples: Vec<f64>,
    bd_steps: Vec<(f64, f64)>,
    bf_steps: Vec<(f64, f64)>,
}

impl EstimatorState {
    pub fn new(config: EstimatorConfig) -> Self {
        EstimatorState {
            config,
            now: 0.0,
            pending: None,
            launches: 0,
            completions: 0,
            last_end: f64::NEG_INFINITY,
            bd_hat: config.epsilon0,
            bf_hat: config.epsilon0,
            events: Vec::new(),
            bd_samples: Vec::new(),
            bf_samples: Vec::new(),
            bd_steps: Vec::new(),
            bf_steps: Vec::new(),
        }
    }

    /// Record the n-th launch at time `start`. Updates the frequency
    /// estimate once at least `ell` launches have been seen.
    pub fn on_attack_start(&mut self, start: f64) -> Result<(), EstimatorError> {
        if let Some(open) = self.pending {
            return Err(EstimatorError::AttackInProgress(open));
        }
        if !start.is_finite() || start < 0.0 || start <= self.last_end || start < self.now {
            return Err(EstimatorError::OutOfOrderStart {
                start,
                prev_end: self.last_end,
                now: self.now,
            });
        }
        self.launches += 1;
        let n = self.launches;
        let sample = if start > 0.0 {
            n as f64 / start
        } else {
            f64::INFINITY
        };
        self.bf_samples.push(sample);
        if n >= self.config.ell {
            self.bf_hat = self.bf_hat.max(sample / self.config.theta);
        }
        self.bf_steps.push((start, self.bf_hat));
        self.pending = Some(start);
        self.now = start;
        Ok(())
    }

    /// Record the completion of the attack opened at `start`, with
    /// `attacked_measure` the total attacked time on `[0, start + length]`
    /// (supplied externally so the measure computation stays on an
    /// independent path from this state machine). Updates the duration
    /// estimate once at least `ell` completions have been seen.
    pub fn on_attack_end(
        &mut self,
        start: f64,
        length: f64,
        attacked_measure: f64,
    ) -> Result<(), EstimatorError> {
        let open = self.pending.ok_or(EstimatorError::NoOpenAttack(start))?;
        if open != start {
            return Err(EstimatorError::MismatchedCompletion {
                expected: open,
                got: start,
            });
        }
        if !length.is_finite() || length < 0.0 {
            return Err(EstimatorError::InvalidAttackLength(length));
        }
        let end = start + length;
        if !attacked_measure.is_finite() || attacked_measure < 0.0 || attacked_measure > end {
            return Err(EstimatorError::InvalidMeasure {
                measure: attacked_measure,
                end,
            });
        }
        self.completions += 1;
        let n = self.completions;
        // A zero-length attack at t = 0 has no elapsed time to divide by;
        // the sample is unusable either way since ell >= 2.
        let sample = if end > 0.0 {
            attacked_measure / end
        } else {
            0.0
        };
        self.bd_samples.push(sample);
        if n >= self.config.ell {
            self.bd_hat = self
                .bd_hat
                .max(self.config.theta * sample + (1.0 - self.config.theta));
        }
        self.bd_steps.push((end, self.bd_hat));
        self.events.push(AttackRecord { start, length });
        self.pending = None;
        self.last_end = end;
        self.now = end;
        Ok(())
    }

    /// Advance the observation clock through attack-free time.
    pub fn advance_to(&mut self, t: f64) -> Result<(), EstimatorError> {
        if !t.is_finite() || t < self.now {
            return Err(EstimatorError::ClockBackwards {
                requested: t,
                now: self.now,
            });
        }
        self.now = t;
        Ok(())
    }

    /// The estimate pair held at time `t`: both estimates are
    /// right-continuous step functions, constant between their update
    /// instants. Queries beyond the observed history are rejected.
    pub fn query(&self, t: f64) -> Result<(f64, f64), EstimatorError> {
        if !t.is_finite() || t < 0.0 || t > self.now {
            return Err(EstimatorError::QueryBeyondHistory { t, now: self.now });
        }
        Ok((
            step_value_at(&self.bd_steps, t, self.config.epsilon0),
            step_value_at(&self.bf_steps, t, self.config.epsilon0),
        ))
    }

    pub fn config(&self) -> EstimatorConfig {
        self.config
    }

    pub fn bd_hat(&self) -> f64 {
        self.bd_hat
    }

    pub fn bf_hat(&self) -> f64 {
        self.bf_hat
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn launches(&self) -> u64 {
        self.launches
    }

    pub fn completions(&self) -> u64 {
        self.completions
    }

    pub fn events(&self) -> &[AttackRecord] {
        &self.events
    }

    /// Observed duty samples `B_d(i)`, one per completion.
    pub fn duration_samples(&self) -> &[f64] {
        &self.bd_samples
    }

    /// Observed rate samples `B_f(i)`, one per launch.
    pub fn frequency_samples(&self) -> &[f64] {
        &self.bf_samples
    }

    /// `(time, value)` pairs of the duration estimate after each completion.
    pub fn bd_steps(&self) -> &[(f64, f64)] {
        &self.bd_steps
    }

    /// `(time, value)` pairs of the frequency estimate after each launch.
    pub fn bf_steps(&self) -> &[(f64, f64)] {
        &self.bf_steps
    }
}

fn step_value_at(steps: &[(f64, f64)], t: f64, initial: f64) -> f64 {
    let idx = steps.partition_point(|&(time, _)| time <= t);
    if idx == 0 {
        initial
    } else {
        steps[idx - 1].1
    }
}

/// Replay the estimator over every event of `seq` up to `horizon`. Attacks
/// still open at the horizon contribute their launch but no completion.
pub fn replay(
    seq: &DosSequence,
    config: EstimatorConfig,
    horizon: f64,
) -> Result<EstimatorState, EstimatorError> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(EstimatorError::InvalidHorizon(horizon));
    }
    let mut state = EstimatorState::new(config);
    for iv in seq.intervals() {
        let iv = iv?;
        if iv.start() > horizon {
            break;
        }
        state.on_attack_start(iv.start())?;
        if iv.end() > horizon {
            break;
        }
        let measure = seq.attack_measure(0.0, iv.end())?;
        state.on_attack_end(iv.start(), iv.length(), measure)?;
    }
    let target = horizon.max(state.now());
    state.advance_to(target)?;
    Ok(state)
}

/// Replay one estimator per sequence. Runs on the rayon pool when the
/// `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn replay_many(
    seqs: &[DosSequence],
    config: EstimatorConfig,
    horizon: f64,
) -> Vec<Result<EstimatorState, EstimatorError>> {
    use rayon::prelude::*;
    seqs.par_iter()
        .map(|seq| replay(seq, config, horizon))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn replay_many(
    seqs: &[DosSequence],
    config: EstimatorConfig,
    horizon: f64,
) -> Vec<Result<EstimatorState, EstimatorError>> {
    replay_many_serial(seqs, config, horizon)
}

/// Sequential twin of [`replay_many`], kept unconditionally for comparison.
pub fn replay_many_serial(
    seqs: &[DosSequence],
    config: EstimatorConfig,
    horizon: f64,
) -> Vec<Result<EstimatorState, EstimatorError>> {
    seqs.iter()
        .map(|seq| replay(seq, config, horizon))
        .collect()
}

/// Exact asymptotic values `(bd_limit, bf_limit)` of the two estimates on a
/// finite or eventually-periodic sequence.
///
/// Along the periodic tail each pattern slot's samples are ratios of affine
/// functions of the period count, hence monotone, so the supremum over a
/// slot is the larger of its first usable sample and the sharp rate. The
/// estimator's limit is the max-rule applied to that supremum.
pub fn limit_estimates(
    seq: &DosSequence,
    config: EstimatorConfig,
) -> Result<(f64, f64), EstimatorError> {
    let (sup_bd, sup_bf) = match seq {
        DosSequence::Finite(_) => {
            let mut measure = 0.0;
            let mut sup_bd: Option<f64> = None;
            let mut sup_bf: Option<f64> = None;
            for (i, iv) in seq.intervals().enumerate() {
                let iv = iv?;
                let index = i as u64 + 1;
                measure += iv.length();
                if index >= config.ell {
                    sup_bd = Some(sup_bd.unwrap_or(0.0).max(measure / iv.end()));
                    sup_bf = Some(sup_bf.unwrap_or(0.0).max(index as f64 / iv.start()));
                }
            }
            (sup_bd, sup_bf)
        }
        DosSequence::EventuallyPeriodic(p) => {
            let plen = p.prologue.len() as u64;
            let slots = p.launches_per_period();
            let per_measure = p.measure_per_period();
            let mut sup_bd = p.duty();
            let mut sup_bf = p.launch_rate();
            let mut measure = 0.0;
            for (i, iv) in p.prologue.iter().enumerate() {
                let index = i as u64 + 1;
                measure += iv.length();
                if index >= config.ell {
                    sup_bd = sup_bd.max(measure / iv.end());
                    sup_bf = sup_bf.max(index as f64 / iv.start());
                }
            }
            let prologue_measure = measure;
            let mut partial = 0.0;
            for (j, slot) in p.pattern.iter().enumerate() {
                partial += slot.length();
                // First period count at which this slot's global index
                // reaches ell.
                let base_index = plen + j as u64 + 1;
                let k = if base_index >= config.ell {
                    0
                } else {
                    (config.ell - base_index).div_ceil(slots)
                };
                let kf = k as f64;
                let index = base_index + k * slots;
                let end = p.start + kf * p.period + slot.end();
                let launch = p.start + kf * p.period + slot.start();
                sup_bd = sup_bd.max((prologue_measure + kf * per_measure + partial) / end);
                sup_bf = sup_bf.max(index as f64 / launch);
            }
            (Some(sup_bd), Some(sup_bf))
        }
        DosSequence::Generator(_) => {
            return Err(EstimatorError::RequiresStructuredSequence(
                "limit_estimates",
            ))
        }
    };
    let eps = config.epsilon0;
    let bd = match sup_bd {
        Some(s) => eps.max(config.theta * s + (1.0 - config.theta)),
        None => eps,
    };
    let bf = match sup_bf {
        Some(s) => eps.max(s / config.theta),
        None => eps,
    };
    Ok((bd, bf))
}

/// Caller-declared knowledge for the reliability deadline: lower envelopes
/// `attack_measure(0,t) >= -kappa + b_d t` and
/// `launch_count(0,t) >= -lambda + b_f t`, plus the sharp rates of the
/// sequence. All of it is validated against the sequence before use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeadlineInput {
    pub theta: f64,
    pub b_d: f64,
    pub kappa: f64,
    pub b_f: f64,
    pub lambda: f64,
    pub inf_duration: f64,
    pub inf_frequency: f64,
}

/// When the estimates are guaranteed to be genuine bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReliabilityDeadline {
    /// Reliable from t = 0 (the sequence launches at most finitely often).
    Immediate,
    /// Reliable no later than the completion of attack `index`.
    AtEvent { index: u64, deadline: f64 },
}

/// Compute the event index and time by which the estimates are guaranteed
/// inside the true bound sets.
///
/// Requires a finite or eventually-periodic sequence so the envelope
/// validation is conclusive. With a finite launch budget (`inf_frequency ==
/// 0`) the answer is immediate; otherwise `theta` must undercut both
/// `(1 - inf_duration) / (1 - b_d)` and `b_f / inf_frequency`, and the
/// deadline is the first event clearing both defect thresholds.
pub fn reliability_deadline(
    input: &DeadlineInput,
    seq: &DosSequence,
) -> Result<ReliabilityDeadline, EstimatorError> {
    let bad = |msg: String| Err(EstimatorError::InvalidDeadlineInput(msg));
    if !input.theta.is_finite() || input.theta <= 0.0 || input.theta >= 1.0 {
        return Err(EstimatorError::InvalidTheta(input.theta));
    }
    if !(0.0..=1.0).contains(&input.inf_duration) {
        return bad(format!(
            "sharp duration rate {} outside [0, 1]",
            input.inf_duration
        ));
    }
    if !input.inf_frequency.is_finite() || input.inf_frequency < 0.0 {
        return bad(format!(
            "sharp frequency rate {} invalid",
            input.inf_frequency
        ));
    }
    if !(0.0..=input.inf_duration).contains(&input.b_d) {
        return bad(format!(
            "lower duration rate {} must lie in [0, sharp rate {}]",
            input.b_d, input.inf_duration
        ));
    }
    if !(0.0..=input.inf_frequency).contains(&input.b_f) {
        return bad(format!(
            "lower frequency rate {} must lie in [0, sharp rate {}]",
            input.b_f, input.inf_frequency
        ));
    }
    if !input.kappa.is_finite()
        || input.kappa < 0.0
        || !input.lambda.is_finite()
        || input.lambda < 0.0
    {
        return bad("offsets must be finite and >= 0".into());
    }

    // Cross-check the declared sharp rates and validate the envelopes by
    // defect scan; both are conclusive only for structured sequences.
    let (scan_horizon, sharp_d, sharp_f) = match seq {
        DosSequence::Finite(v) => {
            let end = v.last().map_or(1.0, |iv| iv.end() + 1.0);
            (end.max(1.0), 0.0, 0.0)
        }
        DosSequence::EventuallyPeriodic(p) => (p.start + 2.0 * p.period, p.duty(), p.launch_rate()),
        DosSequence::Generator(_) => {
            return Err(EstimatorError::RequiresStructuredSequence(
                "reliability_deadline",
            ))
        }
    };
    if (input.inf_duration - sharp_d).abs() > 1e-9 || (input.inf_frequency - sharp_f).abs() > 1e-9 {
        return bad(format!(
            "declared sharp rates ({}, {}) disagree with the sequence ({sharp_d}, {sharp_f})",
            input.inf_duration, input.inf_frequency
        ));
    }
    let dur = seq.verify_duration_lower_bound(input.b_d, input.kappa, scan_horizon)?;
    if !dur.holds {
        return Err(EstimatorError::EnvelopeRejected(format!(
            "duration envelope needs offset {} (got {}), defect peaks at t = {}",
            dur.witnessed_offset, input.kappa, dur.worst_time
        )));
    }
    let freq = seq.verify_frequency_lower_bound(input.b_f, input.lambda, scan_horizon)?;
    if !freq.holds {
        return Err(EstimatorError::EnvelopeRejected(format!(
            "frequency envelope needs offset {} (got {}), defect peaks at t = {}",
            freq.witnessed_offset, input.lambda, freq.worst_time
        )));
    }

    if input.inf_frequency == 0.0 {
        return Ok(ReliabilityDeadline::Immediate);
    }

    let duration_margin = (1.0 - input.inf_duration) / (1.0 - input.b_d);
    let frequency_margin = input.b_f / input.inf_frequency;
    let limit = duration_margin.min(frequency_margin);
    if input.theta.partial_cmp(&limit) != Some(std::cmp::Ordering::Less) {
        return Err(EstimatorError::ThetaCondition {
            theta: input.theta,
            limit,
        });
    }

    let end_denom = input.theta * input.b_d + 1.0 - input.theta - input.inf_duration;
    let start_denom = input.b_f - input.theta * input.inf_frequency;
    debug_assert!(end_denom > 0.0 && start_denom > 0.0);
    let end_threshold = input.kappa * input.theta / end_denom;
    let start_threshold = input.lambda / start_denom;

    for (i, iv) in seq.intervals().enumerate() {
        let iv = iv?;
        if iv.end() > end_threshold && iv.start() > start_threshold {
            return Ok(ReliabilityDeadline::AtEvent {
                index: i as u64 + 1,
                deadline: iv.end(),
            });
        }
    }
    bad("sequence ran out of events before clearing the deadline thresholds".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dos_model::DosInterval;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn odd_unit_intervals() -> DosSequence {
        DosSequence::eventually_periodic(
            vec![],
            3.0,
            2.0,
            vec![DosInterval::new(0.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    fn cfg(epsilon0: f64, theta: f64, ell: u64) -> EstimatorConfig {
        EstimatorConfig::new(epsilon0, theta, ell).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(0.01, 0.67, 2).is_ok());
        assert!(matches!(
            EstimatorConfig::new(0.0, 0.67, 2),
            Err(EstimatorError::InvalidEpsilon(_))
        ));
        assert!(matches!(
            EstimatorConfig::new(0.01, 1.0, 2),
            Err(EstimatorError::InvalidTheta(_))
        ));
        assert!(matches!(
            EstimatorConfig::new(0.01, 0.67, 1),
            Err(EstimatorError::InvalidEll(_))
        ));
        assert_eq!(
            EstimatorConfig::with_theta_one(0.01, 2).unwrap().theta(),
            1.0
        );
    }

    #[test]
    fn estimates_stay_at_floor_before_the_ell_th_event() {
        let seq = odd_unit_intervals();
        let state = replay(&seq, cfg(0.01, 0.67, 2), 4.5).unwrap();
        assert_eq!(state.completions(), 1);
        assert_eq!(state.bd_hat(), 0.01);
        assert_eq!(state.bf_hat(), 0.01);
    }

    #[test]
    fn second_event_updates_match_hand_arithmetic() {
        let seq = odd_unit_intervals();
        let state = replay(&seq, cfg(0.01, 0.67, 2), 6.0).unwrap();
        // Launch 2 at t = 5: B_f(2) = 2/5, estimate (2/5)/0.67.
        assert_close(state.bf_hat(), (2.0 / 5.0) / 0.67, 1e-12);
        assert_close(state.bf_hat(), 0.5970, 1e-4);
        // Completion 2 at t = 6: B_d(2) = 2/6, estimate 0.67/3 + 0.33.
        assert_close(state.bd_hat(), 0.67 * (1.0 / 3.0) + 0.33, 1e-12);
        assert_close(state.bd_hat(), 0.5533, 1e-4);
    }

    #[test]
    fn query_is_a_right_continuous_step_function() {
        let seq = odd_unit_intervals();
        let state = replay(&seq, cfg(0.01, 0.67, 2), 20.0).unwrap();
        assert_eq!(state.query(1.0).unwrap(), (0.01, 0.01));
        let (bd, _) = state.query(6.5).unwrap();
        assert_close(bd, 0.5533, 1e-4);
        // Exactly at an update instant the post-update value is visible.
        let (bd_at_6, bf_at_5) = (state.query(6.0).unwrap().0, state.query(5.0).unwrap().1);
        assert_close(bd_at_6, 0.5533, 1e-4);
        assert_close(bf_at_5, 0.5970, 1e-4);
        assert!(state.query(21.0).is_err());
    }

    #[test]
    fn estimates_are_monotone_along_the_event_log() {
        let seq = odd_unit_intervals();
        let state = replay(&seq, cfg(0.01, 0.67, 2), 200.0).unwrap();
        for w in state.bd_steps().windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        for w in state.bf_steps().windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn event_ordering_is_enforced() {
        let mut state = EstimatorState::new(cfg(0.01, 0.67, 2));
        state.on_attack_start(3.0).unwrap();
        assert!(matches!(
            state.on_attack_start(5.0),
            Err(EstimatorError::AttackInProgress(_))
        ));
        assert!(matches!(
            state.on_attack_end(4.0, 1.0, 1.0),
            Err(EstimatorError::MismatchedCompletion { .. })
        ));
        state.on_attack_end(3.0, 1.0, 1.0).unwrap();
        // Abutting or earlier starts violate strict separation.
        assert!(matches!(
            state.on_attack_start(4.0),
            Err(EstimatorError::OutOfOrderStart { .. })
        ));
        assert!(matches!(
            state.on_attack_end(9.0, 1.0, 1.0),
            Err(EstimatorError::NoOpenAttack(_))
        ));
        assert!(matches!(
            state.advance_to(2.0),
            Err(EstimatorError::ClockBackwards { .. })
        ));
    }

    #[test]
    fn theta_one_never_reaches_the_true_duty() {
        let seq = odd_unit_intervals();
        let state = replay(
            &seq,
            EstimatorConfig::with_theta_one(0.01, 2).unwrap(),
            2_000.0,
        )
        .unwrap();
        for &(_, bd) in state.bd_steps() {
            assert!(bd < 0.5, "duty estimate {bd} crossed 0.5 with theta = 1");
        }
        for &(_, bf) in state.bf_steps() {
            assert!(bf < 0.5);
        }
    }

    #[test]
    fn limit_estimates_match_the_update_rules() {
        let seq = odd_unit_intervals();
        let config = cfg(0.01, 0.67, 2);
        let (bd, bf) = limit_estimates(&seq, config).unwrap();
        assert_close(bd, 0.67 * 0.5 + 0.33, 1e-15);
        assert_close(bd, 0.665, 1e-9);
        assert_close(bf, 0.5 / 0.67, 1e-15);

        // A long replay approaches the limit from below.
        let state = replay(&seq, config, 4_000.0).unwrap();
        assert!(state.bd_hat() <= bd);
        assert!(state.bf_hat() <= bf);
        assert_close(state.bd_hat(), bd, 1e-3);
        assert_close(state.bf_hat(), bf, 1e-3);
    }

    #[test]
    fn limit_estimates_on_a_front_loaded_attacker() {
        // Strong prologue, weak tail: the supremum comes from the prologue
        // sample, not the asymptotic rate.
        let seq = DosSequence::eventually_periodic(
            vec![
                DosInterval::new(0.5, 2.0).unwrap(),
                DosInterval::new(3.0, 2.0).unwrap(),
            ],
            10.0,
            10.0,
            vec![DosInterval::new(0.0, 1.0).unwrap()],
        )
        .unwrap();
        let config = cfg(0.01, 0.5, 2);
        let (bd, bf) = limit_estimates(&seq, config).unwrap();
        // B_d(2) = 4/5, B_f(2) = 2/3 dominate the tail rates (0.1 and 0.1).
        assert_close(bd, 0.5 * 0.8 + 0.5, 1e-12);
        assert_close(bf, (2.0 / 3.0) / 0.5, 1e-12);
        let state = replay(&seq, config, 500.0).unwrap();
        assert_close(state.bd_hat(), bd, 1e-12);
        assert_close(state.bf_hat(), bf, 1e-12);
    }

    #[test]
    fn limit_estimates_fall_back_to_the_floor_without_events() {
        let (bd, bf) = limit_estimates(&DosSequence::empty(), cfg(0.2, 0.67, 2)).unwrap();
        assert_eq!((bd, bf), (0.2, 0.2));
    }

    #[test]
    fn deadline_matches_hand_computed_thresholds() {
        let seq = odd_unit_intervals();
        let input = DeadlineInput {
            theta: 0.67,
            b_d: 0.5,
            kappa: 1.5,
            b_f: 0.5,
            lambda: 1.5,
            inf_duration: 0.5,
            inf_frequency: 0.5,
        };
        // Thresholds: end > 1.005/0.165 ~ 6.09 and start > 1.5/0.165 ~ 9.09;
        // the fifth interval [11, 12) is the first to clear both.
        match reliability_deadline(&input, &seq).unwrap() {
            ReliabilityDeadline::AtEvent { index, deadline } => {
                assert_eq!(index, 5);
                assert_close(deadline, 12.0, 1e-12);
            }
            other => panic!("expected an event deadline, got {other:?}"),
        }
    }

    #[test]
    fn deadline_is_immediate_for_finite_sequences() {
        let seq = DosSequence::finite(vec![DosInterval::new(1.0, 0.5).unwrap()]).unwrap();
        let input = DeadlineInput {
            theta: 0.5,
            b_d: 0.0,
            kappa: 1.0,
            b_f: 0.0,
            lambda: 1.0,
            inf_duration: 0.0,
            inf_frequency: 0.0,
        };
        assert_eq!(
            reliability_deadline(&input, &seq).unwrap(),
            ReliabilityDeadline::Immediate
        );
    }

    #[test]
    fn deadline_rejects_bad_inputs() {
        let seq = odd_unit_intervals();
        let base = DeadlineInput {
            theta: 0.67,
            b_d: 0.5,
            kappa: 1.5,
            b_f: 0.5,
            lambda: 1.5,
            inf_duration: 0.5,
            inf_frequency: 0.5,
        };
        // Envelope offset too small for the defect scan.
        let tight = DeadlineInput { kappa: 1.4, ..base };
        assert!(matches!(
            reliability_deadline(&tight, &seq),
            Err(EstimatorError::EnvelopeRejected(_))
        ));
        // Theta at or above the admissible limit (here min{1, 1} = 1 is
        // already excluded by construction, so force a smaller margin).
        let skewed = DeadlineInput {
            b_f: 0.4,
            lambda: 3.5,
            ..base
        };
        assert!(matches!(
            reliability_deadline(
                &DeadlineInput {
                    theta: 0.9,
                    ..skewed
                },
                &seq
            ),
            Err(EstimatorError::ThetaCondition { .. })
        ));
        // Declared sharp rates must match the sequence.
        let wrong = DeadlineInput {
            inf_duration: 0.4,
            b_d: 0.4,
            ..base
        };
        assert!(matches!(
            reliability_deadline(&wrong, &seq),
            Err(EstimatorError::InvalidDeadlineInput(_))
        ));
    }

    #[test]
    fn replay_stops_cleanly_at_a_mid_attack_horizon() {
        let seq = odd_unit_intervals();
        // Horizon 3.5 lands inside [3, 4): one launch, no completion.
        let state = replay(&seq, cfg(0.01, 0.67, 2), 3.5).unwrap();
        assert_eq!(state.launches(), 1);
        assert_eq!(state.completions(), 0);
        assert_eq!(state.now(), 3.5);
    }
}
