//! Geometric and temporal path representations.
//!
//! A [`Trajectory`] pairs positions with speeds (planner output). A
//! [`FuturePath`] pairs positions with absolute passing times and is what gets
//! shared between vehicles and stored in the reservation table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Segments whose speed is at or below this value terminate a future path.
pub const V_EPS: f64 = 0.01;

/// Smallest spacing allowed between consecutive points sent over the air.
pub const MIN_POINT_SPACING: f64 = 0.1;

/// Largest number of points carried by one path message.
pub const MAX_PATH_POINTS: usize = 120;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("trajectory has no points")]
    EmptyTrajectory,
    #[error("start index {index} out of range for trajectory of {len} points")]
    StartIndexOutOfRange { index: usize, len: usize },
    #[error("spacing {0} m is below the {MIN_POINT_SPACING} m minimum")]
    SpacingTooSmall(f64),
    #[error("route needs at least two points, got {0}")]
    RouteTooShort(usize),
    #[error("route contains a non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Point at fraction `f` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point2D, f: f64) -> Point2D {
        Point2D::new(self.x + (other.x - self.x) * f, self.y + (other.y - self.y) * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub pos: Point2D,
    /// m/s, never negative.
    pub speed: f64,
}

impl TrajectoryPoint {
    pub fn new(pos: Point2D, speed: f64) -> Self {
        Self { pos, speed }
    }
}

/// Ordered (position, speed) samples. Serves as the planner output, the
/// autonomous path and the coordinated path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(points: Vec<TrajectoryPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cumulative chord length from the first point to each point.
    pub fn arc_offsets(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 {
                acc += self.points[i - 1].pos.distance(&p.pos);
            }
            out.push(acc);
        }
        out
    }

    /// Index of the first point not behind `pos` along the trajectory.
    ///
    /// Starts from the nearest point and steps forward once if `pos` already
    /// lies past it on the following segment.
    pub fn index_ahead_of(&self, pos: &Point2D) -> Result<usize, PathError> {
        let i = nearest_point_index(self, pos)?;
        if i + 1 < self.points.len() {
            let a = self.points[i].pos;
            let b = self.points[i + 1].pos;
            let along = (pos.x - a.x) * (b.x - a.x) + (pos.y - a.y) * (b.y - a.y);
            if along > 1e-12 {
                return Ok(i + 1);
            }
        }
        Ok(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleShape {
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleShape {
    fn default() -> Self {
        Self {
            length: 4.5,
            width: 1.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuturePathPoint {
    pub pos: Point2D,
    /// Absolute simulation time in seconds.
    pub t: f64,
}

/// Where a vehicle intends to be and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuturePath {
    pub vehicle_id: u32,
    pub current_pos: Point2D,
    pub current_speed: f64,
    pub shape: VehicleShape,
    pub points: Vec<FuturePathPoint>,
}

impl FuturePath {
    /// Generation time, i.e. the time of the first point.
    pub fn t0(&self) -> Option<f64> {
        self.points.first().map(|p| p.t)
    }
}

/// Sender metadata attached to a future path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMeta {
    pub vehicle_id: u32,
    pub current_pos: Point2D,
    pub current_speed: f64,
    pub shape: VehicleShape,
}

/// Index of the trajectory point closest to `pos`; ties go to the lowest index.
pub fn nearest_point_index(traj: &Trajectory, pos: &Point2D) -> Result<usize, PathError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in traj.points.iter().enumerate() {
        let d = p.pos.distance(pos);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i).ok_or(PathError::EmptyTrajectory)
}

/// Converts a trajectory into a future path assuming constant speed on each
/// segment: the segment ending at point `k` is covered at `v_k`.
///
/// Point `start_index` is anchored at `t0`. The output stops just before the
/// first segment whose speed is at or below [`V_EPS`].
pub fn to_future_path(traj: &Trajectory, start_index: usize, t0: f64, meta: PathMeta) -> Result<FuturePath, PathError> {
    if start_index >= traj.points.len() {
        return Err(PathError::StartIndexOutOfRange {
            index: start_index,
            len: traj.points.len(),
        });
    }
    let pts = &traj.points[start_index..];
    let mut out = Vec::with_capacity(pts.len());
    out.push(FuturePathPoint { pos: pts[0].pos, t: t0 });
    let mut t = t0;
    for w in pts.windows(2) {
        let v = w[1].speed;
        if v <= V_EPS {
            break;
        }
        t += w[0].pos.distance(&w[1].pos) / v;
        out.push(FuturePathPoint { pos: w[1].pos, t });
    }
    Ok(FuturePath {
        vehicle_id: meta.vehicle_id,
        current_pos: meta.current_pos,
        current_speed: meta.current_speed,
        shape: meta.shape,
        points: out,
    })
}

/// Keeps the points with `t <= now + horizon`.
pub fn truncate_horizon(fp: &FuturePath, now: f64, horizon: f64) -> FuturePath {
    let limit = now + horizon;
    FuturePath {
        points: fp.points.iter().copied().filter(|p| p.t <= limit).collect(),
        ..fp.clone()
    }
}

/// Caps speeds to what a vehicle starting at `v0` can reach with
/// acceleration `a_max`. Point 0 is capped at `v0`.
pub fn limit_acceleration(traj: &Trajectory, v0: f64, a_max: f64) -> Trajectory {
    let mut out = traj.clone();
    let mut prev = v0.max(0.0);
    for k in 0..out.points.len() {
        let reach = if k == 0 {
            prev
        } else {
            let d = out.points[k - 1].pos.distance(&out.points[k].pos);
            (prev * prev + 2.0 * a_max * d).sqrt()
        };
        let p = &mut out.points[k];
        p.speed = p.speed.min(reach);
        prev = p.speed;
    }
    out
}

/// Evenly resamples a polyline by arc length.
///
/// Consecutive gaps land in `[spacing, 2 * spacing)` and both endpoints are
/// kept. If the route is shorter than `spacing` only the endpoints remain.
pub fn resample_polyline(route: &[Point2D], spacing: f64) -> Result<Vec<Point2D>, PathError> {
    if !(spacing >= MIN_POINT_SPACING) {
        return Err(PathError::SpacingTooSmall(spacing));
    }
    let line = Route::new(route.to_vec())?;
    let total = line.length();
    if total <= 0.0 {
        return Ok(vec![route[0]]);
    }
    let n = ((total / spacing) + 1e-9).floor() as usize;
    if n <= 1 {
        return Ok(vec![route[0], route[route.len() - 1]]);
    }
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        out.push(line.point_at(step * k as f64));
    }
    out.push(route[route.len() - 1]);
    Ok(out)
}

/// A polyline with precomputed arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    points: Vec<Point2D>,
    cum: Vec<f64>,
}

impl Route {
    pub fn new(points: Vec<Point2D>) -> Result<Self, PathError> {
        if points.len() < 2 {
            return Err(PathError::RouteTooShort(points.len()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(PathError::NonFinite);
        }
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in points.windows(2) {
            acc += w[0].distance(&w[1]);
            cum.push(acc);
        }
        Ok(Self { points, cum })
    }

    pub fn points(&self) -> &[Point2D] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    /// Position at arc length `s`, clamped to the route.
    pub fn point_at(&self, s: f64) -> Point2D {
        let s = s.clamp(0.0, self.length());
        // first segment whose end is at or beyond s
        let seg = match self.cum.iter().position(|&c| c >= s) {
            Some(0) => return self.points[0],
            Some(i) => i - 1,
            None => return *self.points.last().unwrap(),
        };
        let len = self.cum[seg + 1] - self.cum[seg];
        if len <= 0.0 {
            return self.points[seg];
        }
        self.points[seg].lerp(&self.points[seg + 1], (s - self.cum[seg]) / len)
    }

    /// Arc length of the route point closest to `p`.
    pub fn project(&self, p: &Point2D) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let len2 = (b.x - a.x).powi(2) + (b.y - a.y).powi(2);
            let f = if len2 > 0.0 {
                (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = a.lerp(&b, f);
            let d = q.distance(p);
            if d < best.0 {
                best = (d, self.cum[i] + f * len2.sqrt());
            }
        }
        best.1
    }

    /// The polyline from arc length `s` to the end of the route.
    pub fn remainder(&self, s: f64) -> Vec<Point2D> {
        let s = s.clamp(0.0, self.length());
        let mut out = vec![self.point_at(s)];
        for (p, &c) in self.points.iter().zip(&self.cum) {
            if c > s + 1e-9 {
                out.push(*p);
            }
        }
        out
    }
}
