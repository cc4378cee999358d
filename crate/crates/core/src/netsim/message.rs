use crate::coordinator::CoordinationMode;
use crate::path_model::{FuturePath, Trajectory};

/// Everything exchanged between vehicles and the roadside unit.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Broadcast by every vehicle at 10 Hz.
    FuturePath(FuturePath),
    /// Unconstrained plan, unicast to the RSU while coordinated.
    AutonomousPath {
        vehicle_id: u32,
        trajectory: Trajectory,
        t0: f64,
    },
    /// RSU speed override for one vehicle.
    CoordinatedPath {
        vehicle_id: u32,
        trajectory: Trajectory,
    },
    Initiation {
        vehicle_id: u32,
        target_mode: CoordinationMode,
    },
    Termination {
        vehicle_id: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    FuturePath,
    AutonomousPath,
    CoordinatedPath,
    Initiation,
    Termination,
}

impl Message {
    pub fn vehicle_id(&self) -> u32 {
        match self {
            Message::FuturePath(fp) => fp.vehicle_id,
            Message::AutonomousPath { vehicle_id, .. }
            | Message::CoordinatedPath { vehicle_id, .. }
            | Message::Initiation { vehicle_id, .. }
            | Message::Termination { vehicle_id } => *vehicle_id,
        }
    }

    pub fn kind(&self) -> MessageKind {
        match self {
            Message::FuturePath(_) => MessageKind::FuturePath,
            Message::AutonomousPath { .. } => MessageKind::AutonomousPath,
            Message::CoordinatedPath { .. } => MessageKind::CoordinatedPath,
            Message::Initiation { .. } => MessageKind::Initiation,
            Message::Termination { .. } => MessageKind::Termination,
        }
    }

    pub fn point_count(&self) -> usize {
        match self {
            Message::FuturePath(fp) => fp.points.len(),
            Message::AutonomousPath { trajectory, .. } | Message::CoordinatedPath { trajectory, .. } => {
                trajectory.len()
            }
            _ => 0,
        }
    }
}
