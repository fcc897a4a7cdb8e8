//! Quasi-static simulation and control of truss robots built from
//! linear-actuator members joined at passive spherical nodes.
//!
//! The crate is organised around the pipeline a run goes through:
//!
//! * [`truss`] — topology, node positions, member lengths and the length
//!   Jacobian mapping node velocities to member length rates.
//! * [`statics`] — member-force ↔ nodal-force maps and pseudoinverse
//!   force allocation at a target node.
//! * [`actuator`] — the member module abstraction: a speed-limited length
//!   drive with a PWM dead zone, closed by a PI force loop.
//! * [`controller`] — the hybrid position/force law producing member
//!   force commands each control tick.
//! * [`solver`] — damped Gauss–Newton recovery of node positions from
//!   member lengths and anchors.
//! * [`sim`] — the closed-loop world: contacts, grasped objects and the
//!   per-tick update.
//! * [`scenario`] — configuration builders, trajectory programs and the
//!   JSON scenario format.
//! * [`harness`] — run scenarios, compute metrics, write traces, reports
//!   and plots.

pub mod actuator;
pub mod controller;
pub mod harness;
pub mod scenario;
pub mod sim;
pub mod solver;
pub mod statics;
pub mod truss;

pub use truss::{InverseJacobian, MemberId, MemberLengths, NodeId, NodePositions, TrussTopology};
