//! Deterministic simulator for roadside-assisted cooperative planning at a
//! blind intersection.
//!
//! Vehicles broadcast time-parametrized future paths. A roadside unit keeps a
//! reservation table of those paths, detects space-time conflicts and hands out
//! speed overrides (coordinated paths) so vehicles can cross without stopping.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coordinator;
pub mod netsim;
pub mod path_model;
pub mod reservation;
pub mod sim_engine;
pub mod vehicle_agent;

pub use coordinator::{CoordinationMode, Coordinator};
pub use path_model::{FuturePath, Point2D, Trajectory, TrajectoryPoint, VehicleShape};
pub use reservation::{CoordinationParams, IntersectionGeometry, ReservationTable};
