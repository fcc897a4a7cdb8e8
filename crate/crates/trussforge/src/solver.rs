//! Recover node positions from member lengths and anchor positions.
//!
//! The length map `L = f(P)` is inverted over the free-node coordinates
//! with a damped Gauss–Newton iteration (Levenberg–Marquardt damping,
//! adapted ×10 on a rejected step and ÷10 on an accepted one). The
//! length Jacobian restricted to free columns doubles as the residual
//! Jacobian. Steps are clamped, which together with warm starting keeps
//! the iteration on the solution branch of the start point — the mirror
//! solution across a base plane is never jumped to.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::truss::{
    forward_lengths, inverse_jacobian, MemberLengths, NodeId, NodePositions, TrussTopology,
    TrussError,
};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("no convergence after {iterations} iterations (length residual {residual:.3e} m)")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("free-node coordinates are under-constrained (rank {rank} of {dofs})")]
    UnderConstrained { rank: usize, dofs: usize },
    #[error(transparent)]
    Truss(#[from] TrussError),
}

/// Iteration limits and tolerances of the position solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Convergence bound on the length residual, infinity norm, m.
    pub tolerance_m: f64,
    /// Initial Levenberg damping.
    pub damping: f64,
    /// Per-iteration cap on any node displacement, m.
    pub step_limit_m: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance_m: 1e-6,
            damping: 1e-6,
            step_limit_m: 0.05,
        }
    }
}

/// Outcome of a successful position solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub positions: NodePositions,
    pub iterations: usize,
    /// Infinity norm of `f(P) − L` at the returned positions.
    pub residual: f64,
}

/// Solve `f(P) = lengths` for the free nodes, holding anchors at their
/// positions in `guess`. The guess supplies both the anchors and the
/// starting point for the free nodes.
pub fn solve_positions(
    topology: &TrussTopology,
    lengths: &MemberLengths,
    guess: &NodePositions,
    config: &SolverConfig,
) -> Result<Solution, SolverError> {
    let free = topology.free_nodes();
    let free_dofs = 3 * free.len();
    let mut positions = guess.clone();
    if free_dofs == 0 {
        let residual = residual_inf(topology, &positions, lengths)?;
        return Ok(Solution {
            positions,
            iterations: 0,
            residual,
        });
    }

    let mut damping = config.damping;
    let mut residual = residual_vec(topology, &positions, lengths)?;
    let mut cost = residual.norm_squared();
    let mut iterations = 0;

    for _ in 0..config.max_iterations {
        if residual.amax() <= config.tolerance_m {
            break;
        }
        iterations += 1;
        let jac_free = free_jacobian(topology, &positions, &free)?;
        let jt = jac_free.transpose();
        let gram = &jt * &jac_free;
        let gradient = &jt * &residual;

        // Try LM steps, inflating damping until one reduces the cost.
        let mut accepted = false;
        for _ in 0..12 {
            let mut system = gram.clone();
            for d in 0..free_dofs {
                system[(d, d)] += damping;
            }
            let Some(delta) = system.lu().solve(&(-&gradient)) else {
                damping *= 10.0;
                continue;
            };
            let delta = clamp_step(delta, config.step_limit_m);
            let candidate = apply_step(&positions, &free, &delta);
            let cand_residual = residual_vec(topology, &candidate, lengths)?;
            let cand_cost = cand_residual.norm_squared();
            if cand_cost < cost {
                positions = candidate;
                residual = cand_residual;
                cost = cand_cost;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }

    let inf = residual.amax();
    if inf > config.tolerance_m {
        return Err(SolverError::NoConvergence {
            iterations,
            residual: inf,
        });
    }

    // A converged mechanism is still under-constrained: positions are not
    // locally unique if the free Jacobian loses rank at the solution.
    let jac_free = free_jacobian(topology, &positions, &free)?;
    let svd = jac_free.svd(false, false);
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > sigma_max * 1e-8)
        .count();
    if rank < free_dofs {
        return Err(SolverError::UnderConstrained {
            rank,
            dofs: free_dofs,
        });
    }

    Ok(Solution {
        positions,
        iterations,
        residual: inf,
    })
}

fn residual_vec(
    topology: &TrussTopology,
    positions: &NodePositions,
    lengths: &MemberLengths,
) -> Result<DVector<f64>, TrussError> {
    Ok(forward_lengths(topology, positions)? - lengths)
}

fn residual_inf(
    topology: &TrussTopology,
    positions: &NodePositions,
    lengths: &MemberLengths,
) -> Result<f64, TrussError> {
    Ok(residual_vec(topology, positions, lengths)?.amax())
}

fn free_jacobian(
    topology: &TrussTopology,
    positions: &NodePositions,
    free: &[NodeId],
) -> Result<DMatrix<f64>, TrussError> {
    let full = inverse_jacobian(topology, positions)?;
    let mut jac = DMatrix::zeros(topology.member_count(), 3 * free.len());
    for (col, &k) in free.iter().enumerate() {
        for m in 0..topology.member_count() {
            for axis in 0..3 {
                jac[(m, 3 * col + axis)] = full[(m, 3 * k + axis)];
            }
        }
    }
    Ok(jac)
}

/// Scale the step down so no single node moves further than `limit`.
fn clamp_step(delta: DVector<f64>, limit: f64) -> DVector<f64> {
    let mut worst: f64 = 0.0;
    for chunk in delta.as_slice().chunks_exact(3) {
        let step = (chunk[0] * chunk[0] + chunk[1] * chunk[1] + chunk[2] * chunk[2]).sqrt();
        worst = worst.max(step);
    }
    if worst > limit {
        delta * (limit / worst)
    } else {
        delta
    }
}

fn apply_step(positions: &NodePositions, free: &[NodeId], delta: &DVector<f64>) -> NodePositions {
    let mut next = positions.clone();
    for (idx, &k) in free.iter().enumerate() {
        for axis in 0..3 {
            next[3 * k + axis] += delta[3 * idx + axis];
        }
    }
    next
}
