//! High-level hybrid position/force control.
//!
//! One nodal force command serves both goals at once: the desired
//! contact force plus a stiffness term on the position error,
//!
//! ```text
//! F_cmd = F_des + k_pos (P_des − P_curr)
//! ```
//!
//! with no orthogonal decomposition between the force and position
//! channels — force and position along the *same* direction simply add.
//! Each target node's command is then mapped to member force commands
//! through the static allocation of [`crate::statics`]; members not
//! claimed by a target hold the structure against gravity.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::statics::{allocate_member_forces, ExternalLoads, StaticsError, PINV_RELATIVE_CUTOFF};
use crate::truss::{node_position, InverseJacobian, MemberId, NodeId, NodePositions, TrussTopology};

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("member {member} is claimed by target nodes {first} and {second}")]
    SharedMemberConflict {
        member: MemberId,
        first: NodeId,
        second: NodeId,
    },
    #[error("target node {0} is anchored")]
    AnchoredTarget(NodeId),
    #[error(transparent)]
    Statics(#[from] StaticsError),
}

/// One controlled node: where it should be and what it should press with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTarget {
    pub node: NodeId,
    pub desired_position: Vector3<f64>,
    pub desired_force: Vector3<f64>,
}

/// A full high-level command: the targets plus the stiffness gain that
/// converts position error into force.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridCommand {
    pub targets: Vec<NodeTarget>,
    /// Position-error stiffness, N/m.
    pub position_gain_n_per_m: f64,
}

/// Member force commands for one control tick, tension positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberCommandSet {
    /// Command per member id; every member of the truss carries one.
    pub forces: BTreeMap<MemberId, f64>,
    /// Time the command was issued, s.
    pub issued_at: f64,
}

impl MemberCommandSet {
    pub fn force(&self, m: MemberId) -> f64 {
        self.forces.get(&m).copied().unwrap_or(0.0)
    }
}

/// The hybrid law itself: `F_des + k_pos (P_des − P_curr)`.
pub fn hybrid_nodal_command(
    desired_position: Vector3<f64>,
    current_position: Vector3<f64>,
    desired_force: Vector3<f64>,
    position_gain: f64,
) -> Vector3<f64> {
    desired_force + position_gain * (desired_position - current_position)
}

/// Check that scaling both the desired force and the stiffness gain by
/// `s` scales the commanded force by exactly `s`, leaving its direction
/// unchanged. Returns false only if linearity were somehow broken.
pub fn command_scaling_preserves_direction(
    desired_position: Vector3<f64>,
    current_position: Vector3<f64>,
    desired_force: Vector3<f64>,
    position_gain: f64,
    scale: f64,
) -> bool {
    assert!(scale > 0.0);
    let base = hybrid_nodal_command(
        desired_position,
        current_position,
        desired_force,
        position_gain,
    );
    let scaled = hybrid_nodal_command(
        desired_position,
        current_position,
        desired_force * scale,
        position_gain * scale,
    );
    (scaled - base * scale).norm() <= 1e-12 * base.norm().max(1.0) * scale.max(1.0)
}

/// Compute force commands for every member.
///
/// Target nodes get their hybrid command realised by the per-node
/// pseudoinverse allocation. The remaining members are set to hold the
/// rest of the structure: a minimum-norm equilibrium solve over all
/// free non-target nodes, taking the already-commanded member forces as
/// known loads, so the whole structure lives in one force paradigm.
pub fn compute_member_commands(
    topology: &TrussTopology,
    jacobian: &InverseJacobian,
    positions: &NodePositions,
    command: &HybridCommand,
    loads: &ExternalLoads,
    time: f64,
) -> Result<MemberCommandSet, ControllerError> {
    let mut forces: BTreeMap<MemberId, f64> = BTreeMap::new();
    let mut claimed_by: BTreeMap<MemberId, NodeId> = BTreeMap::new();

    for target in &command.targets {
        let k = target.node;
        if topology.is_anchor(k) {
            return Err(ControllerError::AnchoredTarget(k));
        }
        for &m in topology.incident_members(k) {
            if let Some(&other) = claimed_by.get(&m) {
                return Err(ControllerError::SharedMemberConflict {
                    member: m,
                    first: other,
                    second: k,
                });
            }
            claimed_by.insert(m, k);
        }
    }

    for target in &command.targets {
        let k = target.node;
        let f_cmd = hybrid_nodal_command(
            target.desired_position,
            node_position(positions, k),
            target.desired_force,
            command.position_gain_n_per_m,
        );
        let w_k = Vector3::new(loads[3 * k], loads[3 * k + 1], loads[3 * k + 2]);
        let allocation = allocate_member_forces(topology, jacobian, k, f_cmd, w_k, None)?;
        for (idx, &m) in allocation.members.iter().enumerate() {
            forces.insert(m, allocation.member_forces[idx]);
        }
    }

    // Gravity hold for everything else: equilibrium of the non-target free
    // nodes over the unclaimed members, with claimed members as known loads.
    let target_nodes: Vec<NodeId> = command.targets.iter().map(|t| t.node).collect();
    let hold_nodes: Vec<NodeId> = topology
        .free_nodes()
        .into_iter()
        .filter(|k| !target_nodes.contains(k))
        .collect();
    let hold_members: Vec<MemberId> = (0..topology.member_count())
        .filter(|m| !claimed_by.contains_key(m))
        .collect();

    if !hold_nodes.is_empty() && !hold_members.is_empty() {
        let mut basis = DMatrix::zeros(3 * hold_nodes.len(), hold_members.len());
        let mut rhs = DVector::zeros(3 * hold_nodes.len());
        for (row, &k) in hold_nodes.iter().enumerate() {
            for (col, &m) in hold_members.iter().enumerate() {
                for axis in 0..3 {
                    basis[(3 * row + axis, col)] = jacobian[(m, 3 * k + axis)];
                }
            }
            for axis in 0..3 {
                let mut load = loads[3 * k + axis];
                for (&m, _) in &claimed_by {
                    load -= jacobian[(m, 3 * k + axis)] * forces[&m];
                }
                rhs[3 * row + axis] = load;
            }
        }
        let svd = basis.svd(true, true);
        let eps = svd.singular_values.max() * PINV_RELATIVE_CUTOFF;
        let hold = svd.solve(&rhs, eps).expect("svd computed with both factors");
        for (col, &m) in hold_members.iter().enumerate() {
            forces.insert(m, hold[col]);
        }
    } else {
        for &m in &hold_members {
            forces.insert(m, 0.0);
        }
    }

    Ok(MemberCommandSet {
        forces,
        issued_at: time,
    })
}
