//! Static force model: member forces ↔ nodal forces, and pseudoinverse
//! allocation of member forces to realise a desired force at one node.
//!
//! # Sign convention
//!
//! Member force `λ` is **positive in tension**: a member with `λ > 0`
//! pulls its two endpoints toward each other. With the length Jacobian
//! `J` of [`crate::truss`] (each row block at a node is the unit vector
//! pointing *toward* that node), the force the members exert on the
//! nodes stacks to `−Jᵀλ`, so the net quasi-static force available at
//! the nodes — gravity plus member action, equal to the force a node in
//! equilibrium presses on whatever it touches — is
//!
//! ```text
//! F = W − Jᵀ λ
//! ```
//!
//! and the member forces realising a desired nodal force `F_des` at a
//! free node `k` solve `J_kᵀ λ_k = W_k − F_des` in the least-squares,
//! minimum-norm sense:
//!
//! ```text
//! λ_k = (J_kᵀ)† (W_k − F_des)
//! ```
//!
//! Sanity anchor for the signs: a node resting on a single vertical
//! member below it, loaded only by its own weight (`W_k = −m g ẑ`,
//! `F_des = 0`), yields `λ = −m g` — compression supports the weight.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::truss::{
    node_submatrix, InverseJacobian, MemberId, NodeId, TrussTopology, TrussError,
};

pub const GRAVITY: f64 = 9.81;

/// Singular values below `σ_max · PINV_RELATIVE_CUTOFF` are truncated in
/// every pseudoinverse in this module.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Member axial forces in member-list order, newtons, tension positive.
pub type MemberForces = DVector<f64>;
/// Stacked per-node external loads (gravity and the like), newtons.
pub type ExternalLoads = DVector<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum StaticsError {
    #[error(transparent)]
    Truss(#[from] TrussError),
    #[error("member {member} force {force:.2} N exceeds the force limit")]
    ForceLimitExceeded { member: MemberId, force: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How many independent directions the incident members of a node span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constrainedness {
    /// Exactly three members spanning rank 3: unique solution.
    Fully,
    /// More members than needed at rank 3: a null space exists and the
    /// returned forces are the minimum-norm exact realiser.
    Over,
    /// Rank below 3: the desired force is not fully realisable and the
    /// residual reports the left-over component.
    Under,
}

/// Outcome of a per-node force allocation.
#[derive(Debug, Clone)]
pub struct AllocationResult {
    /// Force per incident member, ascending member id.
    pub member_forces: DVector<f64>,
    /// Incident member ids matching `member_forces` entries.
    pub members: Vec<MemberId>,
    /// Realised-minus-desired nodal force, `(W_k − J_kᵀ λ_k) − F_des`.
    pub residual: Vector3<f64>,
    pub rank: usize,
    pub constrainedness: Constrainedness,
}

/// Net nodal force `W − Jᵀλ`: external loads plus member action.
pub fn nodal_forces(
    jacobian: &InverseJacobian,
    member_forces: &MemberForces,
    loads: &ExternalLoads,
) -> Result<DVector<f64>, StaticsError> {
    if member_forces.len() != jacobian.nrows() {
        return Err(StaticsError::DimensionMismatch {
            expected: jacobian.nrows(),
            got: member_forces.len(),
        });
    }
    if loads.len() != jacobian.ncols() {
        return Err(StaticsError::DimensionMismatch {
            expected: jacobian.ncols(),
            got: loads.len(),
        });
    }
    Ok(loads - jacobian.transpose() * member_forces)
}

/// Allocate forces for the members incident to free node `k` so the node
/// delivers `desired_force`, carrying its external load `load_k`.
///
/// `force_limit`, when given, rejects any solution whose entries exceed
/// the actuator force limit in magnitude.
pub fn allocate_member_forces(
    topology: &TrussTopology,
    jacobian: &InverseJacobian,
    k: NodeId,
    desired_force: Vector3<f64>,
    load_k: Vector3<f64>,
    force_limit: Option<f64>,
) -> Result<AllocationResult, StaticsError> {
    let sub = node_submatrix(jacobian, topology, k)?;
    let members = topology.incident_members(k).to_vec();
    // Solve J_kᵀ λ = W_k − F_des, minimum-norm least squares.
    let basis = sub.transpose(); // 3 × |E_k|
    let rhs = load_k - desired_force;
    let (solution, rank) = pinv_solve(&basis, &rhs);
    let realized = load_k - &basis * &solution;
    let residual = realized - desired_force;
    let constrainedness = if rank < 3 {
        Constrainedness::Under
    } else if members.len() > 3 {
        Constrainedness::Over
    } else {
        Constrainedness::Fully
    };
    if let Some(limit) = force_limit {
        for (idx, &f) in solution.iter().enumerate() {
            if f.abs() > limit {
                return Err(StaticsError::ForceLimitExceeded {
                    member: members[idx],
                    force: f,
                });
            }
        }
    }
    Ok(AllocationResult {
        member_forces: solution,
        members,
        residual,
        rank,
        constrainedness,
    })
}

/// Minimum-norm least-squares solve of `A x = b` via SVD with the
/// module-wide relative singular-value cutoff. Returns `(x, rank)`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &Vector3<f64>) -> (DVector<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * PINV_RELATIVE_CUTOFF;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd
        .solve(&DVector::from_column_slice(b.as_slice()), eps)
        .expect("svd computed with both factors");
    (x, rank)
}

/// Gravity loads: each node carries its own mass plus half the mass of
/// every incident member, pulling in −z.
pub fn gravity_loads(
    topology: &TrussTopology,
    node_masses: &[f64],
    member_masses: &[f64],
) -> ExternalLoads {
    assert_eq!(node_masses.len(), topology.node_count());
    assert_eq!(member_masses.len(), topology.member_count());
    let mut loads = DVector::zeros(3 * topology.node_count());
    for k in 0..topology.node_count() {
        let mut mass = node_masses[k];
        for &m in topology.incident_members(k) {
            mass += 0.5 * member_masses[m];
        }
        loads[3 * k + 2] = -mass * GRAVITY;
    }
    loads
}

/// Solve member forces from static equilibrium of every free node:
/// `(Jᵀλ)_free = (W + C)_free`, minimum-norm when indeterminate.
///
/// This is the measurement side of the force model — the forces a
/// loadcell on each member would read when the structure carries its
/// gravity loads `loads` plus contact forces `contact` — and is kept
/// separate from the per-node command allocation above.
pub fn equilibrium_member_forces(
    topology: &TrussTopology,
    jacobian: &InverseJacobian,
    loads: &ExternalLoads,
    contact: &DVector<f64>,
) -> MemberForces {
    let free = topology.free_nodes();
    let mut basis = DMatrix::zeros(3 * free.len(), topology.member_count());
    let mut rhs = DVector::zeros(3 * free.len());
    for (row, &k) in free.iter().enumerate() {
        for m in 0..topology.member_count() {
            for axis in 0..3 {
                basis[(3 * row + axis, m)] = jacobian[(m, 3 * k + axis)];
            }
        }
        for axis in 0..3 {
            rhs[3 * row + axis] = loads[3 * k + axis] + contact[3 * k + axis];
        }
    }
    let svd = basis.svd(true, true);
    let eps = svd.singular_values.max() * PINV_RELATIVE_CUTOFF;
    svd.solve(&rhs, eps).expect("svd computed with both factors")
}

/// Position-resolved convenience wrapper: net nodal force at node `k`.
pub fn nodal_force_at(
    topology: &TrussTopology,
    jacobian: &InverseJacobian,
    member_forces: &MemberForces,
    loads: &ExternalLoads,
    k: NodeId,
) -> Vector3<f64> {
    let mut f = Vector3::new(loads[3 * k], loads[3 * k + 1], loads[3 * k + 2]);
    for &m in topology.incident_members(k) {
        for axis in 0..3 {
            f[axis] -= jacobian[(m, 3 * k + axis)] * member_forces[m];
        }
    }
    f
}

/// Total structural mass seen by node `k` under the half-member rule.
pub fn node_carried_mass(topology: &TrussTopology, node_masses: &[f64], member_masses: &[f64], k: NodeId) -> f64 {
    let mut mass = node_masses[k];
    for &m in topology.incident_members(k) {
        mass += 0.5 * member_masses[m];
    }
    mass
}

/// Gravity load vector of a single node as a 3-vector.
pub fn load_at(loads: &ExternalLoads, k: NodeId) -> Vector3<f64> {
    Vector3::new(loads[3 * k], loads[3 * k + 1], loads[3 * k + 2])
}
