//! Truss graph representation and kinematic quantities.
//!
//! A truss is a set of nodes (passive spherical joints) connected by
//! prismatic members. Node positions are stacked into a `3N` vector `P`
//! (world frame, z up, metres) and member lengths into an `M` vector `L`,
//! related by the length map `L = f(P)`. Differentiating the map gives
//! the matrix `J` with `L̇ = J Ṗ`: each row holds the two opposing unit
//! direction vectors of one member. Following the source convention for
//! this kind of system we call `J` the *inverse Jacobian* (it maps node
//! velocities to member length velocities); its orientation is `M × 3N`.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

/// Nodes below this separation have no defined member direction.
pub const EPS_LENGTH: f64 = 1e-9;

/// Dense 0-based node index, stable for the lifetime of a topology.
pub type NodeId = usize;
/// Dense 0-based member index, in member-list order.
pub type MemberId = usize;

/// Stacked node positions, `3N` entries in metres.
pub type NodePositions = DVector<f64>;
/// Member lengths in member-list order, metres.
pub type MemberLengths = DVector<f64>;
/// `M × 3N` matrix mapping node velocities to member length rates.
pub type InverseJacobian = DMatrix<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum TrussError {
    #[error("member {member:?} is degenerate: endpoint separation {length:.3e} m below {eps:.0e} m")]
    DegenerateMember {
        member: Option<MemberId>,
        length: f64,
        eps: f64,
    },
    #[error("node {0} is anchored and has no free columns")]
    AnchorNode(NodeId),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Immutable truss connectivity: nodes, members and the anchored subset.
///
/// Member order is authoritative: it fixes the row order of the length
/// vector and of the inverse Jacobian everywhere in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrussTopology {
    node_count: usize,
    members: Vec<(NodeId, NodeId)>,
    anchors: Vec<NodeId>,
    /// Incident member ids per node, ascending.
    incidence: Vec<Vec<MemberId>>,
}

impl TrussTopology {
    /// Build a topology, validating the member list.
    ///
    /// Rejects self-loops, duplicate members (regardless of endpoint
    /// order), out-of-range indices and anchors outside the node set.
    pub fn new(
        node_count: usize,
        members: Vec<(NodeId, NodeId)>,
        anchors: Vec<NodeId>,
    ) -> Result<Self, TrussError> {
        let mut seen = std::collections::HashSet::new();
        for (idx, &(i, j)) in members.iter().enumerate() {
            if i == j {
                return Err(TrussError::InvalidTopology(format!(
                    "member {idx} is a self-loop on node {i}"
                )));
            }
            if i >= node_count || j >= node_count {
                return Err(TrussError::InvalidTopology(format!(
                    "member {idx} references node out of range ({i}, {j})"
                )));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(TrussError::InvalidTopology(format!(
                    "duplicate member between nodes {i} and {j}"
                )));
            }
        }
        let mut anchors = anchors;
        anchors.sort_unstable();
        anchors.dedup();
        if let Some(&a) = anchors.iter().find(|&&a| a >= node_count) {
            return Err(TrussError::InvalidTopology(format!(
                "anchor {a} out of range"
            )));
        }
        let mut incidence = vec![Vec::new(); node_count];
        for (m, &(i, j)) in members.iter().enumerate() {
            incidence[i].push(m);
            incidence[j].push(m);
        }
        Ok(Self {
            node_count,
            members,
            anchors,
            incidence,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[(NodeId, NodeId)] {
        &self.members
    }

    pub fn member(&self, m: MemberId) -> (NodeId, NodeId) {
        self.members[m]
    }

    pub fn anchors(&self) -> &[NodeId] {
        &self.anchors
    }

    pub fn is_anchor(&self, k: NodeId) -> bool {
        self.anchors.binary_search(&k).is_ok()
    }

    /// Incident member ids of node `k`, ascending.
    pub fn incident_members(&self, k: NodeId) -> &[MemberId] {
        &self.incidence[k]
    }

    /// Free (non-anchored) node ids, ascending.
    pub fn free_nodes(&self) -> Vec<NodeId> {
        (0..self.node_count).filter(|&k| !self.is_anchor(k)).collect()
    }

    /// The other endpoint of member `m` as seen from node `k`.
    pub fn opposite_node(&self, m: MemberId, k: NodeId) -> NodeId {
        let (i, j) = self.members[m];
        if i == k {
            j
        } else {
            i
        }
    }
}

/// Read node `k`'s position out of a stacked vector.
pub fn node_position(positions: &NodePositions, k: NodeId) -> Vector3<f64> {
    Vector3::new(positions[3 * k], positions[3 * k + 1], positions[3 * k + 2])
}

/// Write node `k`'s position into a stacked vector.
pub fn set_node_position(positions: &mut NodePositions, k: NodeId, p: Vector3<f64>) {
    positions[3 * k] = p.x;
    positions[3 * k + 1] = p.y;
    positions[3 * k + 2] = p.z;
}

/// Stack a slice of node positions into a `3N` vector.
pub fn stack_positions(points: &[Vector3<f64>]) -> NodePositions {
    let mut v = DVector::zeros(3 * points.len());
    for (k, p) in points.iter().enumerate() {
        set_node_position(&mut v, k, *p);
    }
    v
}

/// Euclidean distance between two node positions.
///
/// Errors with `DegenerateMember` below [`EPS_LENGTH`], where the member
/// direction (and hence the corresponding Jacobian row) is undefined.
pub fn member_length(p_i: Vector3<f64>, p_j: Vector3<f64>) -> Result<f64, TrussError> {
    let l = (p_i - p_j).norm();
    if l < EPS_LENGTH {
        return Err(TrussError::DegenerateMember {
            member: None,
            length: l,
            eps: EPS_LENGTH,
        });
    }
    Ok(l)
}

/// Evaluate the length map `L = f(P)` in member-list order.
pub fn forward_lengths(
    topology: &TrussTopology,
    positions: &NodePositions,
) -> Result<MemberLengths, TrussError> {
    check_dimension(topology, positions)?;
    let mut lengths = DVector::zeros(topology.member_count());
    for (m, &(i, j)) in topology.members().iter().enumerate() {
        lengths[m] = member_length(node_position(positions, i), node_position(positions, j))
            .map_err(|e| tag_member(e, m))?;
    }
    Ok(lengths)
}

/// The `M × 3N` derivative of the length map at `positions`.
///
/// Row `m` for member `(i, j)`: the three columns of node `i` hold
/// `(p_i − p_j)ᵀ / l_m` and the columns of node `j` its negation; all
/// other entries are zero. Anchored nodes keep their columns (full `3N`
/// width) — callers restrict to free columns where needed.
pub fn inverse_jacobian(
    topology: &TrussTopology,
    positions: &NodePositions,
) -> Result<InverseJacobian, TrussError> {
    check_dimension(topology, positions)?;
    let mut jac = DMatrix::zeros(topology.member_count(), positions.len());
    for (m, &(i, j)) in topology.members().iter().enumerate() {
        let p_i = node_position(positions, i);
        let p_j = node_position(positions, j);
        let l = member_length(p_i, p_j).map_err(|e| tag_member(e, m))?;
        let dir = (p_i - p_j) / l;
        for axis in 0..3 {
            jac[(m, 3 * i + axis)] = dir[axis];
            jac[(m, 3 * j + axis)] = -dir[axis];
        }
    }
    Ok(jac)
}

/// The `|E_k| × 3` block of `jacobian` for free node `k`: the incident
/// member rows (ascending member id) restricted to node `k`'s columns.
pub fn node_submatrix(
    jacobian: &InverseJacobian,
    topology: &TrussTopology,
    k: NodeId,
) -> Result<DMatrix<f64>, TrussError> {
    if topology.is_anchor(k) {
        return Err(TrussError::AnchorNode(k));
    }
    let incident = topology.incident_members(k);
    let mut sub = DMatrix::zeros(incident.len(), 3);
    for (row, &m) in incident.iter().enumerate() {
        for axis in 0..3 {
            sub[(row, axis)] = jacobian[(m, 3 * k + axis)];
        }
    }
    Ok(sub)
}

fn check_dimension(topology: &TrussTopology, positions: &NodePositions) -> Result<(), TrussError> {
    if positions.len() != 3 * topology.node_count() {
        return Err(TrussError::DimensionMismatch {
            expected: 3 * topology.node_count(),
            got: positions.len(),
        });
    }
    Ok(())
}

fn tag_member(e: TrussError, m: MemberId) -> TrussError {
    match e {
        TrussError::DegenerateMember { length, eps, .. } => TrussError::DegenerateMember {
            member: Some(m),
            length,
            eps,
        },
        other => other,
    }
}

/// Vertex positions of a regular tetrahedron: unit base edge in the
/// `z = 0` plane, apex over the base centroid at height `√(2/3)`.
pub fn regular_tetrahedron_points(edge: f64) -> [Vector3<f64>; 4] {
    let h = edge * (2.0f64 / 3.0).sqrt();
    [
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(edge, 0.0, 0.0),
        Vector3::new(0.5 * edge, 3.0f64.sqrt() / 2.0 * edge, 0.0),
        Vector3::new(0.5 * edge, 3.0f64.sqrt() / 6.0 * edge, h),
    ]
}

/// Topology of a single tetrahedron: base nodes 0–2 anchored, apex 3 free.
pub fn tetrahedron_topology() -> TrussTopology {
    TrussTopology::new(
        4,
        vec![(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)],
        vec![0, 1, 2],
    )
    .expect("static tetrahedron topology is valid")
}
