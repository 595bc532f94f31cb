//! Sampled-data average consensus of single integrators under DoS, with the
//! sampling interval adapted to the running bound estimates.
//!
//! Each agent integrates a piecewise-constant input computed from the states
//! sampled at `t_k`; a transmission at `t_k` is denied exactly when the
//! attack set contains `t_k`, in which case the input is held at zero and
//! the state (hence the consensus error) freezes over that interval. On a
//! successful sample the error vector contracts through `I - delta * L`,
//! whose action on the mean-orthogonal subspace is bounded by the extreme
//! nonzero Laplacian eigenvalues.
//!
//! Sampling starts at `delta0` (admissible when `|1 - delta0 * lambda_N| <
//! 1`) and is re-derived at every attack completion as
//! `min(delta0, (1 - bd_hat) / (gamma1 * bf_hat))`, taking effect at the
//! first sampling instant at or after the completion. Because the estimates
//! are non-decreasing and the update is antitone in both, the realized
//! interval sequence is non-increasing after its first update and stays
//! strictly positive.
//!
//! Inter-sample dynamics are integrated exactly (single integrators with a
//! constant input), so traces carry no integration error.

use crate::dos_model::{AttackEvent, DosModelError, DosSequence};
use crate::estimator::{EstimatorConfig, EstimatorError, EstimatorState};
use crate::linalg::{jacobi_eigenvalues, norm2, LinalgError, Matrix};
use rand::Rng;
use thiserror::Error;

/// Guard against runaway sampling loops.
const MAX_SAMPLES: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("graph must have at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("graph is disconnected; the Laplacian must be irreducible")]
    Disconnected,
    #[error("{name} must satisfy {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("initial state has {got} entries for {expected} agents")]
    StateDimension { got: usize, expected: usize },
    #[error("delta0 = {delta0} is inadmissible: |1 - delta0 * {lambda_n}| must be < 1")]
    InadmissibleDelta0 { delta0: f64, lambda_n: f64 },
    #[error("sampling loop exceeded {0} instants")]
    TooManySamples(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Model(#[from] DosModelError),
}

/// Undirected simple graph over `n` agents, stored as a dense adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, ConsensusError> {
        if n < 2 {
            return Err(ConsensusError::TooFewAgents(n));
        }
        let mut adj = vec![false; n * n];
        for &(i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(ConsensusError::InvalidEdge(i, j));
            }
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
        Ok(Graph { n, adj })
    }

    pub fn ring(n: usize) -> Result<Self, ConsensusError> {
        if n < 3 {
            return Err(ConsensusError::TooFewAgents(n));
        }
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self, ConsensusError> {
        let edges: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, ConsensusError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Graph::from_edges(n, &edges)
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            let unseen: Vec<usize> =
                (0..self.n).filter(|&j| self.has_edge(i, j) && !seen[j]).collect();
            for j in unseen {
                seen[j] = true;
                stack.push(j);
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Graph Laplacian: row degree on the diagonal, -1 per edge, zero row
    /// sums. Disconnected graphs are rejected.
    pub fn laplacian(&self) -> Result<Matrix, ConsensusError> {
        if !self.is_connected() {
            return Err(ConsensusError::Disconnected);
        }
        let mut l = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let mut degree = 0.0;
            for j in 0..self.n {
                if self.has_edge(i, j) {
                    l[(i, j)] = -1.0;
                    degree += 1.0;
                }
            }
            l[(i, i)] = degree;
        }
        Ok(l)
    }
}

/// Second-smallest and largest Laplacian eigenvalues.
pub fn lambda_extremes(laplacian: &Matrix) -> Result<(f64, f64), ConsensusError> {
    let eigs = jacobi_eigenvalues(laplacian)?;
    if eigs.len() < 2 {
        return Err(ConsensusError::TooFewAgents(eigs.len()));
    }
    Ok((eigs[1], eigs[eigs.len() - 1]))
}

/// Next sampling interval from the current estimates:
/// `min(delta0, (1 - bd_hat) / (gamma1 * bf_hat))`.
pub fn delta_update(
    bd_hat: f64,
    bf_hat: f64,
    delta0: f64,
    gamma1: f64,
) -> Result<f64, ConsensusError> {
    if !bd_hat.is_finite() || bd_hat <= 0.0 || bd_hat >= 1.0 {
        return Err(ConsensusError::InvalidParameter {
            name: "bd_hat",
            requirement: "0 < bd_hat < 1",
            value: bd_hat,
        });
    }
    if !bf_hat.is_finite() || bf_hat <= 0.0 {
        return Err(ConsensusError::InvalidParameter {
            name: "bf_hat",
            requirement: "bf_hat > 0",
            value: bf_hat,
        });
    }
    if !delta0.is_finite() || delta0 <= 0.0 {
        return Err(ConsensusError::InvalidParameter {
            name: "delta0",
            requirement: "delta0 > 0",
            value: delta0,
        });
    }
    if !gamma1.is_finite() || gamma1 <= 1.0 {
        return Err(ConsensusError::InvalidParameter {
            name: "gamma1",
            requirement: "gamma1 > 1",
            value: gamma1,
        });
    }
    Ok(delta0.min((1.0 - bd_hat) / (gamma1 * bf_hat)))
}

/// One sampled-data step. A denied sample holds the state (zero input over
/// the interval); a successful one applies the exact integral of the
/// piecewise-constant input, `x - delta * L x`.
pub fn step(x: &[f64], laplacian: &Matrix, delta: f64, denied: bool) -> Vec<f64> {
    assert_eq!(
        x.len(),
        laplacian.rows(),
        "state dimension must match the Laplacian"
    );
    if denied {
        return x.to_vec();
    }
    let lx = laplacian.matvec(x).expect("dimensions checked above");
    x.iter().zip(&lx).map(|(xi, li)| xi - delta * li).collect()
}

/// Simulation setup for one consensus run.
#[derive(Clone, Debug)]
pub struct MasScenario {
    pub graph: Graph,
    pub x0: Vec<f64>,
    pub delta0: f64,
    pub gamma1: f64,
    pub estimator: EstimatorConfig,
    pub seq: DosSequence,
    pub horizon: f64,
}

/// State of one sampling instant: the interval and denial flag applied over
/// `[t, t + delta)`, the pre-step states, and the consensus error norm.
#[derive(Clone, Debug)]
pub struct MasSample {
    pub t: f64,
    pub delta: f64,
    pub denied: bool,
    pub x: Vec<f64>,
    pub e_norm: f64,
}

#[derive(Clone, Debug)]
pub struct MasTrace {
    pub samples: Vec<MasSample>,
    /// Average of the initial states; invariant along the run.
    pub mean: f64,
    /// Realized contraction factor
    /// `max(|1 - delta_min * lambda_2|, |1 - delta_max * lambda_N|)`.
    pub gamma2: f64,
    pub lambda2: f64,
    pub lambda_n: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    /// Estimator state at the horizon.
    pub estimator: EstimatorState,
}

/// Run the sampled-data consensus loop from `t = 0` to the horizon.
pub fn run(scenario: &MasScenario) -> Result<MasTrace, ConsensusError> {
    let n = scenario.graph.agents();
    if scenario.x0.len() != n {
        return Err(ConsensusError::StateDimension {
            got: scenario.x0.len(),
            expected: n,
        });
    }
    if scenario.x0.iter().any(|v| !v.is_finite()) {
        return Err(ConsensusError::InvalidParameter {
            name: "x0",
            requirement: "all entries finite",
            value: f64::NAN,
        });
    }
    if !scenario.horizon.is_finite() || scenario.horizon <= 0.0 {
        return Err(ConsensusError::InvalidParameter {
            name: "horizon",
            requirement: "horizon > 0",
            value: scenario.horizon,
        });
    }
    scenario.seq.require_not_edge_case()?;
    let laplacian = scenario.graph.laplacian()?;
    let (lambda2, lambda_n) = lambda_extremes(&laplacian)?;
    if (1.0 - scenario.delta0 * lambda_n).abs() >= 1.0 || scenario.delta0 <= 0.0 {
        return Err(ConsensusError::InadmissibleDelta0 {
            delta0: scenario.delta0,
            lambda_n,
        });
    }
    if !scenario.gamma1.is_finite() || scenario.gamma1 <= 1.0 {
        return Err(ConsensusError::InvalidParameter {
            name: "gamma1",
            requirement: "gamma1 > 1",
            value: scenario.gamma1,
        });
    }

    let mean = scenario.x0.iter().sum::<f64>() / n as f64;
    let mut estimator = EstimatorState::new(scenario.estimator);
    let mut events = scenario.seq.event_feed();
    let mut x = scenario.x0.clone();
    let mut delta = scenario.delta0;
    let mut t = 0.0f64;
    let mut samples = Vec::new();

    while t <= scenario.horizon {
        // Completions that occurred at or before this instant re-derive the
        // interval; the new value takes effect from this sample on.
        while let Some(event) = events.pop_through(t)? {
            match event {
                AttackEvent::Launch(start) => estimator.on_attack_start(start)?,
                AttackEvent::Completion(iv) => {
                    let measure = scenario.seq.attack_measure(0.0, iv.end())?;
                    estimator.on_attack_end(iv.start(), iv.length(), measure)?;
                    delta = delta_update(
                        estimator.bd_hat(),
                        estimator.bf_hat(),
                        scenario.delta0,
                        scenario.gamma1,
                    )?;
                }
            }
        }
        let denied = scenario.seq.contains(t);
        let e_norm = error_norm(&x, mean);
        samples.push(MasSample {
            t,
            delta,
            denied,
            x: x.clone(),
            e_norm,
        });
        if samples.len() > MAX_SAMPLES {
            return Err(ConsensusError::TooManySamples(MAX_SAMPLES));
        }
        x = step(&x, &laplacian, delta, denied);
        t += delta;
    }
    estimator.advance_to(scenario.horizon.max(estimator.now()))?;

    let delta_min = samples
        .iter()
        .map(|s| s.delta)
        .fold(f64::INFINITY, f64::min);
    let delta_max = samples.iter().map(|s| s.delta).fold(0.0, f64::max);
    let gamma2 = (1.0 - delta_min * lambda2)
        .abs()
        .max((1.0 - delta_max * lambda_n).abs());
    Ok(MasTrace {
        samples,
        mean,
        gamma2,
        lambda2,
        lambda_n,
        delta_min,
        delta_max,
        estimator,
    })
}

/// Consensus error norm `|x - mean * 1|`.
pub fn error_norm(x: &[f64], mean: f64) -> f64 {
    norm2(&x.iter().map(|v| v - mean).collect::<Vec<f64>>())
}

/// Initial states drawn uniformly from `[low, high]`.
pub fn uniform_initial_states<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    low: f64,
    high: f64,
) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(low..=high)).collect()
}
