//! Compact little-endian wire format.
//!
//! ```text
//! header (15 bytes)
//!   u8   message type   1 future path, 2 autonomous path, 3 coordinated path,
//!                       4 initiation (slow), 5 initiation (fast), 6 termination
//!   u32  vehicle id
//!   u16  point count
//!   u64  t0, microseconds since the simulation epoch
//! per point
//!   i32  x, 0.01 m
//!   i32  y, 0.01 m
//!   u32  passing time offset from t0, ms (saturates at u32::MAX when stopped)
//!   u16  speed, 0.01 m/s              (trajectory messages only)
//! ```
//!
//! A 120-point future path takes 15 + 120 * 12 = 1455 bytes. Trajectory
//! points carry the passing-time offset computed from the quantized positions
//! and speeds so a decoded message re-encodes to the same bytes.
//!
//! Future paths lose their sender metadata on the wire: the decoded current
//! position is the first point, the current speed is the speed implied by the
//! first segment and the shape is the default shape.

use crate::coordinator::CoordinationMode;
use crate::path_model::{
    FuturePath, FuturePathPoint, Point2D, Trajectory, TrajectoryPoint, VehicleShape, MAX_PATH_POINTS, V_EPS,
};

use super::{DecodeError, EncodeError, Message};

pub const HEADER_LEN: usize = 15;
pub const FUTURE_POINT_LEN: usize = 12;
pub const TRAJECTORY_POINT_LEN: usize = 14;

const TYPE_FUTURE: u8 = 1;
const TYPE_AUTONOMOUS: u8 = 2;
const TYPE_COORDINATED: u8 = 3;
const TYPE_INIT_SLOW: u8 = 4;
const TYPE_INIT_FAST: u8 = 5;
const TYPE_TERMINATION: u8 = 6;

/// Size in bytes of the binary encoding of `msg`.
pub fn encoded_len(msg: &Message) -> usize {
    match msg {
        Message::FuturePath(fp) => HEADER_LEN + FUTURE_POINT_LEN * fp.points.len(),
        Message::AutonomousPath { trajectory, .. } | Message::CoordinatedPath { trajectory, .. } => {
            HEADER_LEN + TRAJECTORY_POINT_LEN * trajectory.len()
        }
        Message::Initiation { .. } | Message::Termination { .. } => HEADER_LEN,
    }
}

fn centimeters(field: &'static str, v: f64) -> Result<i32, EncodeError> {
    let q = (v * 100.0).round();
    if !q.is_finite() || q < i32::MIN as f64 || q > i32::MAX as f64 {
        return Err(EncodeError::OutOfRange { field, value: v });
    }
    Ok(q as i32)
}

fn centi_speed(v: f64) -> Result<u16, EncodeError> {
    let q = (v * 100.0).round();
    if !q.is_finite() || q < 0.0 || q > u16::MAX as f64 {
        return Err(EncodeError::OutOfRange {
            field: "speed",
            value: v,
        });
    }
    Ok(q as u16)
}

fn micros(t0: f64) -> Result<u64, EncodeError> {
    let q = (t0 * 1e6).round();
    if !q.is_finite() || q < 0.0 || q >= u64::MAX as f64 {
        return Err(EncodeError::OutOfRange { field: "t0", value: t0 });
    }
    Ok(q as u64)
}

fn millis_offset(t: f64, t0: f64) -> Result<u32, EncodeError> {
    let q = ((t - t0) * 1000.0).round();
    if !q.is_finite() || q < 0.0 || q > u32::MAX as f64 {
        return Err(EncodeError::OutOfRange { field: "t", value: t });
    }
    Ok(q as u32)
}

fn check_count(n: usize) -> Result<u16, EncodeError> {
    if n > MAX_PATH_POINTS {
        return Err(EncodeError::TooManyPoints(n));
    }
    Ok(n as u16)
}

fn header(out: &mut Vec<u8>, kind: u8, id: u32, count: u16, t0_us: u64) {
    out.push(kind);
    out.extend_from_slice(&id.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&t0_us.to_le_bytes());
}

fn encode_trajectory(out: &mut Vec<u8>, kind: u8, id: u32, traj: &Trajectory, t0: f64) -> Result<(), EncodeError> {
    let count = check_count(traj.len())?;
    let t0_us = micros(t0)?;
    header(out, kind, id, count, t0_us);
    let mut prev: Option<(i32, i32)> = None;
    let mut elapsed_ms = 0.0f64;
    for p in &traj.points {
        let x = centimeters("x", p.pos.x)?;
        let y = centimeters("y", p.pos.y)?;
        let v = centi_speed(p.speed)?;
        if let Some((px, py)) = prev {
            // quantized segment length over quantized speed
            let d = (((x - px) as f64).powi(2) + ((y - py) as f64).powi(2)).sqrt() / 100.0;
            let speed = v as f64 / 100.0;
            elapsed_ms = if speed <= V_EPS {
                f64::INFINITY
            } else {
                elapsed_ms + d / speed * 1000.0
            };
        }
        let t_ms = if elapsed_ms.round() >= u32::MAX as f64 {
            u32::MAX
        } else {
            elapsed_ms.round() as u32
        };
        out.extend_from_slice(&x.to_le_bytes());
        out.extend_from_slice(&y.to_le_bytes());
        out.extend_from_slice(&t_ms.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
        prev = Some((x, y));
    }
    Ok(())
}

pub fn encode_binary(msg: &Message) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::with_capacity(encoded_len(msg));
    match msg {
        Message::FuturePath(fp) => {
            let count = check_count(fp.points.len())?;
            let t0 = fp.t0().unwrap_or(0.0);
            let t0_us = micros(t0)?;
            let t0_q = t0_us as f64 / 1e6;
            header(&mut out, TYPE_FUTURE, fp.vehicle_id, count, t0_us);
            for p in &fp.points {
                out.extend_from_slice(&centimeters("x", p.pos.x)?.to_le_bytes());
                out.extend_from_slice(&centimeters("y", p.pos.y)?.to_le_bytes());
                out.extend_from_slice(&millis_offset(p.t, t0_q)?.to_le_bytes());
            }
        }
        Message::AutonomousPath {
            vehicle_id,
            trajectory,
            t0,
        } => encode_trajectory(&mut out, TYPE_AUTONOMOUS, *vehicle_id, trajectory, *t0)?,
        Message::CoordinatedPath { vehicle_id, trajectory } => {
            encode_trajectory(&mut out, TYPE_COORDINATED, *vehicle_id, trajectory, 0.0)?
        }
        Message::Initiation {
            vehicle_id,
            target_mode,
        } => {
            let kind = match target_mode {
                CoordinationMode::CSlow => TYPE_INIT_SLOW,
                CoordinationMode::CFast => TYPE_INIT_FAST,
                CoordinationMode::Auto => return Err(EncodeError::InitiationToAuto),
            };
            header(&mut out, kind, *vehicle_id, 0, 0);
        }
        Message::Termination { vehicle_id } => header(&mut out, TYPE_TERMINATION, *vehicle_id, 0, 0),
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(DecodeError::Truncated {
                needed: end,
                have: self.buf.len(),
            });
        }
        let mut a = [0u8; N];
        a.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(a)
    }

    fn need(&self, n: usize) -> Result<(), DecodeError> {
        if self.pos + n > self.buf.len() {
            return Err(DecodeError::Truncated {
                needed: self.pos + n,
                have: self.buf.len(),
            });
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn i32(&mut self) -> Result<i32, DecodeError> {
        Ok(i32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}

fn read_trajectory(r: &mut Reader<'_>, count: usize) -> Result<Trajectory, DecodeError> {
    r.need(count * TRAJECTORY_POINT_LEN)?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let x = r.i32()? as f64 / 100.0;
        let y = r.i32()? as f64 / 100.0;
        let _t_ms = r.u32()?;
        let v = r.u16()? as f64 / 100.0;
        points.push(TrajectoryPoint::new(Point2D::new(x, y), v));
    }
    Ok(Trajectory::new(points))
}

pub fn decode_binary(buf: &[u8]) -> Result<Message, DecodeError> {
    let mut r = Reader { buf, pos: 0 };
    let kind = r.u8()?;
    let vehicle_id = r.u32()?;
    let count = r.u16()? as usize;
    let t0_us = r.u64()?;
    let t0 = t0_us as f64 / 1e6;
    let msg = match kind {
        TYPE_FUTURE => {
            r.need(count * FUTURE_POINT_LEN)?;
            let mut points = Vec::with_capacity(count);
            for _ in 0..count {
                let x = r.i32()? as f64 / 100.0;
                let y = r.i32()? as f64 / 100.0;
                let t = t0 + r.u32()? as f64 / 1000.0;
                points.push(FuturePathPoint {
                    pos: Point2D::new(x, y),
                    t,
                });
            }
            let current_pos = points.first().map(|p| p.pos).unwrap_or_default();
            let current_speed = match points.as_slice() {
                [a, b, ..] if b.t > a.t => a.pos.distance(&b.pos) / (b.t - a.t),
                _ => 0.0,
            };
            Message::FuturePath(FuturePath {
                vehicle_id,
                current_pos,
                current_speed,
                shape: VehicleShape::default(),
                points,
            })
        }
        TYPE_AUTONOMOUS => Message::AutonomousPath {
            vehicle_id,
            trajectory: read_trajectory(&mut r, count)?,
            t0,
        },
        TYPE_COORDINATED => Message::CoordinatedPath {
            vehicle_id,
            trajectory: read_trajectory(&mut r, count)?,
        },
        TYPE_INIT_SLOW => Message::Initiation {
            vehicle_id,
            target_mode: CoordinationMode::CSlow,
        },
        TYPE_INIT_FAST => Message::Initiation {
            vehicle_id,
            target_mode: CoordinationMode::CFast,
        },
        TYPE_TERMINATION => Message::Termination { vehicle_id },
        other => return Err(DecodeError::UnknownType(other)),
    };
    if r.pos != buf.len() {
        return Err(DecodeError::TrailingBytes(buf.len() - r.pos));
    }
    Ok(msg)
}
