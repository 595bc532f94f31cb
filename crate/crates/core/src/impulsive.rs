//! Impulsive stabilization of an unstable plant under DoS, with the control
//! interval adapted to the running bound estimates.
//!
//! The plant flows freely between control instants and receives an
//! instantaneous state jump `X + U(X)` at each instant the attack set does
//! not cover; covered instants leave the state untouched. Stability rests on
//! two plant constants: `beta`, an exponential growth bound on the flow of
//! the audit function `V = |X|`, and `mu` in (0, 1), the per-jump
//! contraction of `V`. Their log-trade is `chi = ln(mu) < 0`.
//!
//! Control starts at `delta0 = -chi / (gamma3 * beta)` and is re-derived at
//! every attack completion as
//! `chi * (1 - bd_hat) / (gamma3 * (bf_hat * chi - beta))`, which is always
//! positive (numerator and denominator are both negative) and never exceeds
//! `delta0`. Once the estimates are genuine bounds the realized interval
//! satisfies `delta * (beta - bf * chi) < -chi * (1 - bd)`, the margin that
//! makes the audited decay rate strictly negative.
//!
//! Linear plants flow through the matrix exponential; general plants through
//! fixed-step fourth-order Runge-Kutta. Traces carry the audit trail
//! (per-event `V` and cumulative applied-jump counts) consumed by
//! [`audit_lyapunov`] and [`audit_impulse_count`].

use std::sync::Arc;

use crate::dos_model::{AttackEvent, BoundVerdict, DosModelError, DosSequence};
use crate::estimator::{EstimatorConfig, EstimatorError, EstimatorState};
use crate::linalg::{expm, jacobi_eigenvalues, norm2, LinalgError, Matrix};
use thiserror::Error;

/// Guard against runaway control loops.
const MAX_EVENTS: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum ImpulsiveError {
    #[error("{name} must satisfy {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("state has {got} entries for a {expected}-dimensional plant")]
    StateDimension { got: usize, expected: usize },
    #[error("flow produced a non-finite state at t = {0}")]
    Diverged(f64),
    #[error("control loop exceeded {0} instants")]
    TooManyEvents(usize),
    #[error("audit rejected: {0}")]
    InvalidAudit(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Model(#[from] DosModelError),
}

/// Plant right-hand side.
#[derive(Clone)]
pub enum Dynamics {
    Linear(Matrix),
    General(Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dynamics::Linear(a) => f.debug_tuple("Linear").field(a).finish(),
            Dynamics::General(_) => f.write_str("General(..)"),
        }
    }
}

/// Impulsive input `U(X)` applied as `X + U(X)` at successful instants.
#[derive(Clone)]
pub enum JumpGain {
    /// `U(X) = gain * X`, so the post-jump state is `(1 + gain) * X`.
    Linear(f64),
    General(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
}

impl std::fmt::Debug for JumpGain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JumpGain::Linear(g) => f.debug_tuple("Linear").field(g).finish(),
            JumpGain::General(_) => f.write_str("General(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Plant {
    dim: usize,
    dynamics: Dynamics,
    jump: JumpGain,
    beta: f64,
    mu: f64,
}

impl Plant {
    /// Linear plant `dX/dt = A X` whose jump multiplies the state by
    /// `multiplier` (so `U(X) = (multiplier - 1) X`). Under `V = |X|` the
    /// constants follow exactly: `beta` is the spectral norm of `A` and
    /// `mu = |multiplier|`, which must lie in (0, 1) for the jumps to
    /// contract.
    pub fn linear(a: Matrix, multiplier: f64) -> Result<Self, ImpulsiveError> {
        let beta = beta_from_linear(&a)?;
        let mu = multiplier.abs();
        if !mu.is_finite() || mu <= 0.0 || mu >= 1.0 {
            return Err(ImpulsiveError::InvalidParameter {
                name: "jump multiplier",
                requirement: "0 < |multiplier| < 1",
                value: multiplier,
            });
        }
        if beta <= 0.0 {
            return Err(ImpulsiveError::InvalidParameter {
                name: "beta",
                requirement: "beta > 0 (A must be nonzero)",
                value: beta,
            });
        }
        Ok(Plant {
            dim: a.rows(),
            dynamics: Dynamics::Linear(a),
            jump: JumpGain::Linear(multiplier - 1.0),
            beta,
            mu,
        })
    }

    /// General plant with caller-supplied growth bound and jump contraction.
    /// [`Plant::spot_check_bounds`] probes both numerically on samples.
    pub fn general<F, U>(dim: usize, f: F, u: U, beta: f64, mu: f64) -> Result<Self, ImpulsiveError>
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
        U: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(ImpulsiveError::InvalidParameter {
                name: "beta",
                requirement: "beta > 0",
                value: beta,
            });
        }
        if !mu.is_finite() || mu <= 0.0 || mu >= 1.0 {
            return Err(ImpulsiveError::InvalidParameter {
                name: "mu",
                requirement: "0 < mu < 1",
                value: mu,
            });
        }
        Ok(Plant {
            dim,
            dynamics: Dynamics::General(Arc::new(f)),
            jump: JumpGain::General(Arc::new(u)),
            beta,
            mu,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `ln(mu)`, negative by construction.
    pub fn chi(&self) -> f64 {
        self.mu.ln()
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    /// Probe `|f(t, X)| <= beta |X|` and `|X + U(X)| <= mu |X|` on random
    /// states. Catches mis-declared constants on general plants; exact for
    /// linear ones.
    pub fn spot_check_bounds<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        samples: usize,
    ) -> Result<(), ImpulsiveError> {
        let tol = 1.0 + 1e-9;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let nx = norm2(&x);
            let dx = match &self.dynamics {
                Dynamics::Linear(a) => a.matvec(&x)?,
                Dynamics::General(f) => f(0.0, &x),
            };
            if norm2(&dx) > self.beta * nx * tol {
                return Err(ImpulsiveError::InvalidParameter {
                    name: "beta",
                    requirement: "|f(t, X)| <= beta |X| on sampled states",
                    value: self.beta,
                });
            }
            let jumped = apply_jump(&self.jump, &x);
            if norm2(&jumped) > self.mu * nx * tol {
                return Err(ImpulsiveError::InvalidParameter {
                    name: "mu",
                    requirement: "|X + U(X)| <= mu |X| on sampled states",
                    value: self.mu,
                });
            }
        }
        Ok(())
    }
}

/// Spectral norm of `A`: the square root of the largest eigenvalue of
/// `A^T A`.
pub fn beta_from_linear(a: &Matrix) -> Result<f64, ImpulsiveError> {
    if !a.is_square() {
        return Err(ImpulsiveError::Linalg(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        }));
    }
    let gram = a.transpose().matmul(a)?;
    let eigs = jacobi_eigenvalues(&gram)?;
    let top = eigs.last().copied().unwrap_or(0.0).max(0.0);
    Ok(top.sqrt())
}

/// Initial control interval `-chi / (gamma3 * beta)`.
pub fn delta0(chi: f64, gamma3: f64, beta: f64) -> Result<f64, ImpulsiveError> {
    if !chi.is_finite() || chi >= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "chi",
            requirement: "chi < 0",
            value: chi,
        });
    }
    if !gamma3.is_finite() || gamma3 <= 1.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "gamma3",
            requirement: "gamma3 > 1",
            value: gamma3,
        });
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "beta",
            requirement: "beta > 0",
            value: beta,
        });
    }
    Ok(-chi / (gamma3 * beta))
}

/// Control interval from the current estimates:
/// `chi * (1 - bd_hat) / (gamma3 * (bf_hat * chi - beta))`. Positive for
/// every valid input and strictly below [`delta0`].
pub fn delta_update(
    bd_hat: f64,
    bf_hat: f64,
    chi: f64,
    gamma3: f64,
    beta: f64,
) -> Result<f64, ImpulsiveError> {
    if !bd_hat.is_finite() || bd_hat <= 0.0 || bd_hat >= 1.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "bd_hat",
            requirement: "0 < bd_hat < 1",
            value: bd_hat,
        });
    }
    if !bf_hat.is_finite() || bf_hat <= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "bf_hat",
            requirement: "bf_hat > 0",
            value: bf_hat,
        });
    }
    delta0(chi, gamma3, beta)?; // same sign requirements
    Ok(chi * (1.0 - bd_hat) / (gamma3 * (bf_hat * chi - beta)))
}

/// Flow the plant state over `[t, t + delta]`. Linear plants use the matrix
/// exponential; general plants use fixed-step RK4 with sub-steps no longer
/// than `integrator_step`.
pub fn flow(
    plant: &Plant,
    x: &[f64],
    t: f64,
    delta: f64,
    integrator_step: f64,
) -> Result<Vec<f64>, ImpulsiveError> {
    if x.len() != plant.dim {
        return Err(ImpulsiveError::StateDimension {
            got: x.len(),
            expected: plant.dim,
        });
    }
    if !delta.is_finite() || delta <= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "delta",
            requirement: "delta > 0",
            value: delta,
        });
    }
    let out = match &plant.dynamics {
        Dynamics::Linear(a) => expm(&scale_matrix(a, delta))?.matvec(x)?,
        Dynamics::General(f) => rk4_flow(f.as_ref(), x, t, delta, integrator_step)?,
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(ImpulsiveError::Diverged(t + delta));
    }
    Ok(out)
}

fn rk4_flow(
    f: &(dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync),
    x: &[f64],
    t: f64,
    delta: f64,
    integrator_step: f64,
) -> Result<Vec<f64>, ImpulsiveError> {
    if !integrator_step.is_finite() || integrator_step <= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "integrator_step",
            requirement: "integrator_step > 0",
            value: integrator_step,
        });
    }
    let steps = (delta / integrator_step).ceil().max(1.0) as usize;
    let h = delta / steps as f64;
    let mut state = x.to_vec();
    let mut time = t;
    for _ in 0..steps {
        state = rk4_step(f, time, &state, h);
        time += h;
    }
    Ok(state)
}

fn scale_matrix(a: &Matrix, c: f64) -> Matrix {
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = a[(i, j)] * c;
        }
    }
    out
}

fn rk4_step(
    f: &(dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync),
    t: f64,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let k1 = f(t, x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(t + 0.5 * h, &x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(t + 0.5 * h, &x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(t + h, &x4);
    x.iter()
        .enumerate()
        .map(|(i, a)| a + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn apply_jump(jump: &JumpGain, x: &[f64]) -> Vec<f64> {
    match jump {
        JumpGain::Linear(g) => x.iter().map(|v| v + g * v).collect(),
        JumpGain::General(u) => {
            let du = u(x);
            x.iter().zip(&du).map(|(a, b)| a + b).collect()
        }
    }
}

/// Apply the impulsive input, unless the instant is denied.
pub fn jump(plant: &Plant, x: &[f64], denied: bool) -> Vec<f64> {
    if denied {
        x.to_vec()
    } else {
        apply_jump(&plant.jump, x)
    }
}

/// Simulation setup for one impulsive run.
#[derive(Clone, Debug)]
pub struct ImpulsiveScenario {
    pub plant: Plant,
    pub x0: Vec<f64>,
    pub gamma3: f64,
    pub estimator: EstimatorConfig,
    pub seq: DosSequence,
    pub horizon: f64,
    pub integrator_step: f64,
}

/// One control instant: pre- and post-jump states, the audit value
/// `V = |X(t+)|`, and the cumulative count of applied jumps.
#[derive(Clone, Debug)]
pub struct ImpulseEvent {
    pub t: f64,
    pub delta: f64,
    pub applied: bool,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub v: f64,
    pub alpha_cum: u64,
}

/// Exponential envelope `|X(t)| <= c0 * |X0| * exp(-zeta * t)` fitted by
/// log-linear least squares over the tail of a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub c0: f64,
    pub zeta: f64,
}

#[derive(Clone, Debug)]
pub struct ImpulsiveTrace {
    pub events: Vec<ImpulseEvent>,
    pub horizon: f64,
    pub x0_norm: f64,
    pub decay_fit: Option<DecayFit>,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Estimator state at the horizon.
    pub estimator: EstimatorState,
}

/// Run the impulsive control loop from `t = 0` to the horizon.
pub fn run(scenario: &ImpulsiveScenario) -> Result<ImpulsiveTrace, ImpulsiveError> {
    let plant = &scenario.plant;
    if scenario.x0.len() != plant.dim {
        return Err(ImpulsiveError::StateDimension {
            got: scenario.x0.len(),
            expected: plant.dim,
        });
    }
    if !scenario.horizon.is_finite() || scenario.horizon <= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "horizon",
            requirement: "horizon > 0",
            value: scenario.horizon,
        });
    }
    scenario.seq.require_not_edge_case()?;
    let chi = plant.chi();
    let initial_delta = delta0(chi, scenario.gamma3, plant.beta)?;

    let mut estimator = EstimatorState::new(scenario.estimator);
    let mut events_feed = scenario.seq.event_feed();
    let mut x = scenario.x0.clone();
    let mut delta = initial_delta;
    let mut t = 0.0f64;
    let mut alpha = 0u64;
    let mut events: Vec<ImpulseEvent> = Vec::new();
    // Linear flows reuse the propagator until the interval changes.
    let mut cached_propagator: Option<(f64, Matrix)> = None;

    while t <= scenario.horizon {
        while let Some(event) = events_feed.pop_through(t)? {
            match event {
                AttackEvent::Launch(start) => estimator.on_attack_start(start)?,
                AttackEvent::Completion(iv) => {
                    let measure = scenario.seq.attack_measure(0.0, iv.end())?;
                    estimator.on_attack_end(iv.start(), iv.length(), measure)?;
                    delta = delta_update(
                        estimator.bd_hat(),
                        estimator.bf_hat(),
                        chi,
                        scenario.gamma3,
                        plant.beta,
                    )?;
                }
            }
        }
        let denied = scenario.seq.contains(t);
        let x_minus = x.clone();
        let x_plus = jump(plant, &x, denied);
        if !denied {
            alpha += 1;
        }
        events.push(ImpulseEvent {
            t,
            delta,
            applied: !denied,
            v: norm2(&x_plus),
            x_minus,
            x_plus: x_plus.clone(),
            alpha_cum: alpha,
        });
        if events.len() > MAX_EVENTS {
            return Err(ImpulsiveError::TooManyEvents(MAX_EVENTS));
        }
        x = match &plant.dynamics {
            Dynamics::Linear(a) => {
                let stale = !matches!(&cached_propagator, Some((d, _)) if *d == delta);
                if stale {
                    cached_propagator = Some((delta, expm(&scale_matrix(a, delta))?));
                }
                let (_, propagator) = cached_propagator.as_ref().expect("cached above");
                let next = propagator.matvec(&x_plus)?;
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(ImpulsiveError::Diverged(t + delta));
                }
                next
            }
            Dynamics::General(_) => flow(plant, &x_plus, t, delta, scenario.integrator_step)?,
        };
        t += delta;
    }
    estimator.advance_to(scenario.horizon.max(estimator.now()))?;

    let delta_min = events.iter().map(|e| e.delta).fold(f64::INFINITY, f64::min);
    let delta_max = events.iter().map(|e| e.delta).fold(0.0, f64::max);
    let x0_norm = norm2(&scenario.x0);
    let decay_fit = fit_decay(&events, x0_norm);
    Ok(ImpulsiveTrace {
        events,
        horizon: scenario.horizon,
        x0_norm,
        decay_fit,
        delta_min,
        delta_max,
        estimator,
    })
}

/// Least squares on `(t, ln V)` over the final half of the events, zeros
/// excluded.
fn fit_decay(events: &[ImpulseEvent], x0_norm: f64) -> Option<DecayFit> {
    let tail = &events[events.len() / 2..];
    let points: Vec<(f64, f64)> = tail
        .iter()
        .filter(|e| e.v > 0.0)
        .map(|e| (e.t, e.v.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    if var == 0.0 {
        return None;
    }
    let cov: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let slope = cov / var;
    let intercept = mean_y - slope * mean_t;
    let c0 = if x0_norm > 0.0 {
        intercept.exp() / x0_norm
    } else {
        intercept.exp()
    };
    Some(DecayFit { c0, zeta: -slope })
}

/// Verify `V(t) <= V(0) * mu^alpha(0,t) * exp(beta t)` at every event, both
/// sides of the jump, with a relative slack of 1e-9 in log space.
pub fn audit_lyapunov(trace: &ImpulsiveTrace, mu: f64, beta: f64) -> bool {
    if trace.x0_norm == 0.0 {
        return trace
            .events
            .iter()
            .all(|e| norm2(&e.x_minus) == 0.0 && e.v == 0.0);
    }
    let ln_v0 = trace.x0_norm.ln();
    let chi = mu.ln();
    let within = |value: f64, alpha: u64, t: f64| {
        if value == 0.0 {
            return true;
        }
        let bound = ln_v0 + alpha as f64 * chi + beta * t;
        value.ln() <= bound + 1e-9 * bound.abs().max(1.0)
    };
    trace.events.iter().all(|e| {
        let alpha_before = e.alpha_cum - u64::from(e.applied);
        within(norm2(&e.x_minus), alpha_before, e.t) && within(e.v, e.alpha_cum, e.t)
    })
}

/// Verify the successful-impulse count bound
/// `alpha(0,t) >= (t / delta_bar) * (1 - b_d - delta_bar * b_f) - C1` from
/// the first control instant at or after `t_check_from`, where
/// `C1 = (t_first + kappa) / delta_bar + 1 + lambda` and the offsets come
/// from conclusive bound verdicts for `b_d` and `b_f` on the scenario's
/// sequence. Rejects unverified bounds and traces that violate the
/// `delta <= delta_bar` premise.
pub fn audit_impulse_count(
    trace: &ImpulsiveTrace,
    b_d: f64,
    duration_verdict: &BoundVerdict,
    b_f: f64,
    frequency_verdict: &BoundVerdict,
    delta_bar: f64,
    t_check_from: f64,
) -> Result<bool, ImpulsiveError> {
    if !duration_verdict.holds || !duration_verdict.conclusive {
        return Err(ImpulsiveError::InvalidAudit(
            "duration bound is not a conclusive verified bound".into(),
        ));
    }
    if !frequency_verdict.holds || !frequency_verdict.conclusive {
        return Err(ImpulsiveError::InvalidAudit(
            "frequency bound is not a conclusive verified bound".into(),
        ));
    }
    if !delta_bar.is_finite() || delta_bar <= 0.0 {
        return Err(ImpulsiveError::InvalidParameter {
            name: "delta_bar",
            requirement: "delta_bar > 0",
            value: delta_bar,
        });
    }
    let first = trace
        .events
        .iter()
        .position(|e| e.t >= t_check_from)
        .ok_or_else(|| {
            ImpulsiveError::InvalidAudit("no control instant after t_check_from".into())
        })?;
    for e in &trace.events[first..] {
        if e.delta > delta_bar * (1.0 + 1e-12) {
            return Err(ImpulsiveError::InvalidAudit(format!(
                "delta {} at t = {} exceeds delta_bar {delta_bar}",
                e.delta, e.t
            )));
        }
    }
    let kappa = duration_verdict.witnessed_offset;
    let lambda = frequency_verdict.witnessed_offset;
    let t_first = trace.events[first].t;
    let c1 = (t_first + kappa) / delta_bar + 1.0 + lambda;
    let rate = (1.0 - b_d - delta_bar * b_f) / delta_bar;

    let ok_at = |alpha: u64, t: f64| {
        let rhs = rate * t - c1;
        alpha as f64 >= rhs - 1e-9 * rhs.abs().max(1.0)
    };
    // Between instants the count is flat while the bound grows, so the
    // binding checks are just before each instant and at the horizon.
    for pair in trace.events[first..].windows(2) {
        if !ok_at(pair[0].alpha_cum, pair[1].t) {
            return Ok(false);
        }
    }
    if let Some(last) = trace.events.last() {
        if !ok_at(last.alpha_cum, trace.horizon) {
            return Ok(false);
        }
    }
    Ok(true)
}
