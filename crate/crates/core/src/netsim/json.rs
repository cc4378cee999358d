//! Self-describing JSON encoding.
//!
//! The document layout is described by `schema/message.schema.json`. Numbers
//! are written with full double precision so decoding is exact. Documents are
//! indented with four spaces, which is what receivers log and diff.

use serde::{Deserialize, Serialize};

use crate::coordinator::CoordinationMode;
use crate::path_model::{FuturePath, FuturePathPoint, Point2D, Trajectory, TrajectoryPoint, VehicleShape};

use super::{DecodeError, Message};

pub const SCHEMA_ID: &str = "coopsim.message.v1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Position {
    x_meters: f64,
    y_meters: f64,
}

impl From<Point2D> for Position {
    fn from(p: Point2D) -> Self {
        Self {
            x_meters: p.x,
            y_meters: p.y,
        }
    }
}

impl From<Position> for Point2D {
    fn from(p: Position) -> Self {
        Point2D::new(p.x_meters, p.y_meters)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Shape {
    length_meters: f64,
    width_meters: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimedPoint {
    position: Position,
    passing_time_seconds: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeedPoint {
    position: Position,
    speed_meters_per_second: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "message_type", rename_all = "snake_case", deny_unknown_fields)]
enum Body {
    FuturePath {
        vehicle_id: u32,
        current_position: Position,
        current_speed_meters_per_second: f64,
        vehicle_shape: Shape,
        points: Vec<TimedPoint>,
    },
    AutonomousPath {
        vehicle_id: u32,
        generation_time_seconds: f64,
        points: Vec<SpeedPoint>,
    },
    CoordinatedPath {
        vehicle_id: u32,
        points: Vec<SpeedPoint>,
    },
    Initiation {
        vehicle_id: u32,
        target_mode: CoordinationMode,
    },
    Termination {
        vehicle_id: u32,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema: String,
    message: Body,
}

fn speed_points(t: &Trajectory) -> Vec<SpeedPoint> {
    t.points
        .iter()
        .map(|p| SpeedPoint {
            position: p.pos.into(),
            speed_meters_per_second: p.speed,
        })
        .collect()
}

fn trajectory(points: Vec<SpeedPoint>) -> Trajectory {
    Trajectory::new(
        points
            .into_iter()
            .map(|p| TrajectoryPoint::new(p.position.into(), p.speed_meters_per_second))
            .collect(),
    )
}

fn to_body(msg: &Message) -> Body {
    match msg {
        Message::FuturePath(fp) => Body::FuturePath {
            vehicle_id: fp.vehicle_id,
            current_position: fp.current_pos.into(),
            current_speed_meters_per_second: fp.current_speed,
            vehicle_shape: Shape {
                length_meters: fp.shape.length,
                width_meters: fp.shape.width,
            },
            points: fp
                .points
                .iter()
                .map(|p| TimedPoint {
                    position: p.pos.into(),
                    passing_time_seconds: p.t,
                })
                .collect(),
        },
        Message::AutonomousPath {
            vehicle_id,
            trajectory,
            t0,
        } => Body::AutonomousPath {
            vehicle_id: *vehicle_id,
            generation_time_seconds: *t0,
            points: speed_points(trajectory),
        },
        Message::CoordinatedPath { vehicle_id, trajectory } => Body::CoordinatedPath {
            vehicle_id: *vehicle_id,
            points: speed_points(trajectory),
        },
        Message::Initiation {
            vehicle_id,
            target_mode,
        } => Body::Initiation {
            vehicle_id: *vehicle_id,
            target_mode: *target_mode,
        },
        Message::Termination { vehicle_id } => Body::Termination {
            vehicle_id: *vehicle_id,
        },
    }
}

fn from_body(body: Body) -> Message {
    match body {
        Body::FuturePath {
            vehicle_id,
            current_position,
            current_speed_meters_per_second,
            vehicle_shape,
            points,
        } => Message::FuturePath(FuturePath {
            vehicle_id,
            current_pos: current_position.into(),
            current_speed: current_speed_meters_per_second,
            shape: VehicleShape {
                length: vehicle_shape.length_meters,
                width: vehicle_shape.width_meters,
            },
            points: points
                .into_iter()
                .map(|p| FuturePathPoint {
                    pos: p.position.into(),
                    t: p.passing_time_seconds,
                })
                .collect(),
        }),
        Body::AutonomousPath {
            vehicle_id,
            generation_time_seconds,
            points,
        } => Message::AutonomousPath {
            vehicle_id,
            trajectory: trajectory(points),
            t0: generation_time_seconds,
        },
        Body::CoordinatedPath { vehicle_id, points } => Message::CoordinatedPath {
            vehicle_id,
            trajectory: trajectory(points),
        },
        Body::Initiation {
            vehicle_id,
            target_mode,
        } => Message::Initiation {
            vehicle_id,
            target_mode,
        },
        Body::Termination { vehicle_id } => Message::Termination { vehicle_id },
    }
}

pub fn encode_json(msg: &Message) -> Vec<u8> {
    let doc = Document {
        schema: SCHEMA_ID.to_string(),
        message: to_body(msg),
    };
    let mut out = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(b"    ");
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    // plain data with string keys, serialization into a Vec cannot fail
    doc.serialize(&mut ser).expect("message serializes");
    out
}

pub fn decode_json(bytes: &[u8]) -> Result<Message, DecodeError> {
    let doc: Document = serde_json::from_slice(bytes).map_err(|e| DecodeError::Json {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    })?;
    Ok(from_body(doc.message))
}
