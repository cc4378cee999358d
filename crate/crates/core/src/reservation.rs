//! The roadside unit's reservation table and the space-time conflict tests run
//! against it.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path_model::{truncate_horizon, FuturePath, FuturePathPoint, Point2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{0} must be positive and finite")]
    NotPositive(&'static str),
    #[error("t_free ({t_free}) must not be shorter than t_collision ({t_collision})")]
    FreeShorterThanCollision { t_free: f64, t_collision: f64 },
    #[error("approach_radius must exceed zone_radius")]
    ApproachInsideZone,
}

/// Coordination tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordinationParams {
    /// Conflict look-ahead, seconds.
    pub t_collision: f64,
    /// Look-ahead used when searching for acceleration room, seconds.
    pub t_free: f64,
    /// Spatial safety margin, meters.
    pub d_margin: f64,
    /// Road speed limit handed out in coordinated speed-ups, m/s.
    pub v_max: f64,
    /// Two points closer than `d_margin` only conflict if their passing times
    /// are within this many seconds.
    pub tau_time: f64,
}

impl Default for CoordinationParams {
    fn default() -> Self {
        Self {
            t_collision: 5.0,
            t_free: 10.0,
            d_margin: 2.8,
            v_max: 50.0 / 3.6,
            tau_time: 1.5,
        }
    }
}

impl CoordinationParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, v) in [
            ("t_collision", self.t_collision),
            ("t_free", self.t_free),
            ("d_margin", self.d_margin),
            ("v_max", self.v_max),
            ("tau_time", self.tau_time),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamsError::NotPositive(name));
            }
        }
        if self.t_free < self.t_collision {
            return Err(ParamsError::FreeShorterThanCollision {
                t_free: self.t_free,
                t_collision: self.t_collision,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectionGeometry {
    pub center: Point2D,
    /// Radius of the conflict zone around the center.
    pub zone_radius: f64,
    /// Vehicles closer than this (and outside the zone) count as approaching.
    pub approach_radius: f64,
    /// A vehicle has left the intersection once it is this far beyond the zone.
    pub exit_margin: f64,
}

impl Default for IntersectionGeometry {
    fn default() -> Self {
        Self {
            center: Point2D::new(0.0, 0.0),
            zone_radius: 7.0,
            approach_radius: 50.0,
            exit_margin: 2.0,
        }
    }
}

impl IntersectionGeometry {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if !(self.zone_radius > 0.0 && self.zone_radius.is_finite()) {
            return Err(ParamsError::NotPositive("zone_radius"));
        }
        if !(self.exit_margin >= 0.0) {
            return Err(ParamsError::NotPositive("exit_margin"));
        }
        if !(self.approach_radius > self.zone_radius) {
            return Err(ParamsError::ApproachInsideZone);
        }
        Ok(())
    }

    pub fn center_distance(&self, p: &Point2D) -> f64 {
        self.center.distance(p)
    }

    pub fn in_zone(&self, p: &Point2D) -> bool {
        self.center_distance(p) <= self.zone_radius
    }

    pub fn exit_radius(&self) -> f64 {
        self.zone_radius + self.exit_margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictInfo {
    pub other_id: u32,
    pub own_point_index: usize,
    pub other_point_index: usize,
    pub distance: f64,
    pub time_gap: f64,
}

/// Thresholds for one conflict query.
#[derive(Debug, Clone, Copy)]
pub struct ConflictWindow {
    pub d_margin: f64,
    pub tau_time: f64,
    /// Only pairs whose earlier time is at or before this instant count.
    pub until: f64,
}

impl ConflictWindow {
    pub fn new(params: &CoordinationParams, now: f64, horizon: f64) -> Self {
        Self {
            d_margin: params.d_margin,
            tau_time: params.tau_time,
            until: now + horizon,
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    min_t: f64,
    distance: f64,
    i: usize,
    j: usize,
    gap: f64,
}

impl Candidate {
    fn cmp_key(&self, other: &Candidate) -> Ordering {
        self.min_t
            .total_cmp(&other.min_t)
            .then(self.distance.total_cmp(&other.distance))
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }
}

fn is_sorted_by_time(p: &[FuturePathPoint]) -> bool {
    p.windows(2).all(|w| w[0].t <= w[1].t)
}

/// Earliest conflicting point pair between two point sequences.
///
/// Pairs are ranked by the earlier of their two times, then distance, then
/// indices, which makes the reported distance independent of argument order.
pub fn first_conflict(
    a: &[FuturePathPoint],
    b: &[FuturePathPoint],
    w: &ConflictWindow,
) -> Option<(usize, usize, f64, f64)> {
    let mut best: Option<Candidate> = None;
    let mut consider = |i: usize, j: usize, pa: &FuturePathPoint, pb: &FuturePathPoint| {
        let gap = (pa.t - pb.t).abs();
        if gap > w.tau_time {
            return;
        }
        let min_t = pa.t.min(pb.t);
        if min_t > w.until {
            return;
        }
        let distance = pa.pos.distance(&pb.pos);
        if distance > w.d_margin {
            return;
        }
        let c = Candidate {
            min_t,
            distance,
            i,
            j,
            gap,
        };
        if best.is_none_or(|b| c.cmp_key(&b) == Ordering::Less) {
            best = Some(c);
        }
    };

    if is_sorted_by_time(a) && is_sorted_by_time(b) {
        // sweep: only pairs within tau_time of each other can conflict
        let mut lo = 0;
        for (i, pa) in a.iter().enumerate() {
            if pa.t - w.tau_time > w.until {
                break;
            }
            while lo < b.len() && b[lo].t < pa.t - w.tau_time {
                lo += 1;
            }
            for (j, pb) in b.iter().enumerate().skip(lo) {
                if pb.t > pa.t + w.tau_time {
                    break;
                }
                consider(i, j, pa, pb);
            }
        }
    } else {
        for (i, pa) in a.iter().enumerate() {
            for (j, pb) in b.iter().enumerate() {
                consider(i, j, pa, pb);
            }
        }
    }
    best.map(|c| (c.i, c.j, c.distance, c.gap))
}

fn conflict_within(a: &FuturePath, b: &FuturePath, w: &ConflictWindow) -> Option<ConflictInfo> {
    first_conflict(&a.points, &b.points, w).map(|(i, j, distance, time_gap)| ConflictInfo {
        other_id: b.vehicle_id,
        own_point_index: i,
        other_point_index: j,
        distance,
        time_gap,
    })
}

/// Conflict between `a` and `b` within the `t_collision` look-ahead.
pub fn detect_conflict(a: &FuturePath, b: &FuturePath, params: &CoordinationParams, now: f64) -> Option<ConflictInfo> {
    conflict_within(a, b, &ConflictWindow::new(params, now, params.t_collision))
}

/// Vehicle id to latest future path.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservationTable {
    entries: BTreeMap<u32, FuturePath>,
    last_update: BTreeMap<u32, f64>,
    stale_timeout: f64,
}

impl Default for ReservationTable {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl ReservationTable {
    pub fn new(stale_timeout: f64) -> Self {
        Self {
            entries: BTreeMap::new(),
            last_update: BTreeMap::new(),
            stale_timeout,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&FuturePath> {
        self.entries.get(&id)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.entries.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    pub fn last_update(&self, id: u32) -> Option<f64> {
        self.last_update.get(&id).copied()
    }

    /// Drops entries that have not been refreshed for `stale_timeout`.
    pub fn evict_stale(&mut self, now: f64) {
        let timeout = self.stale_timeout;
        let stale: Vec<u32> = self
            .last_update
            .iter()
            .filter(|(_, &t)| now - t >= timeout)
            .map(|(&id, _)| id)
            .collect();
        for id in stale {
            self.discard_path(id);
        }
    }

    pub fn upsert_path(&mut self, fp: FuturePath, now: f64) {
        self.evict_stale(now);
        self.last_update.insert(fp.vehicle_id, now);
        self.entries.insert(fp.vehicle_id, fp);
    }

    pub fn discard_path(&mut self, id: u32) {
        self.entries.remove(&id);
        self.last_update.remove(&id);
    }

    /// Conflicts of `fp` against every other entry, ordered by vehicle id.
    pub fn check(&self, fp: &FuturePath, params: &CoordinationParams, now: f64) -> Vec<ConflictInfo> {
        self.check_within(fp, params, now, params.t_collision)
    }

    pub fn check_within(
        &self,
        fp: &FuturePath,
        params: &CoordinationParams,
        now: f64,
        horizon: f64,
    ) -> Vec<ConflictInfo> {
        let w = ConflictWindow::new(params, now, horizon);
        self.entries
            .values()
            .filter(|e| e.vehicle_id != fp.vehicle_id)
            .filter_map(|e| conflict_within(fp, e, &w))
            .collect()
    }

    /// No conflict over the `t_free` look-ahead and the vehicle is heading into
    /// the intersection from within the approach radius.
    pub fn has_acceleration_room(
        &self,
        fp: &FuturePath,
        geometry: &IntersectionGeometry,
        params: &CoordinationParams,
        now: f64,
    ) -> bool {
        if !self.check_within(fp, params, now, params.t_free).is_empty() {
            return false;
        }
        is_approaching(fp, geometry, params, now)
    }
}

/// Within the approach radius, outside the zone, and the last point inside the
/// `t_free` look-ahead is closer to the center than the first one.
pub fn is_approaching(fp: &FuturePath, geometry: &IntersectionGeometry, params: &CoordinationParams, now: f64) -> bool {
    let d = geometry.center_distance(&fp.current_pos);
    if d > geometry.approach_radius || d <= geometry.zone_radius {
        return false;
    }
    let window = truncate_horizon(fp, now, params.t_free);
    match (window.points.first(), window.points.last()) {
        (Some(first), Some(last)) if window.points.len() >= 2 => {
            geometry.center_distance(&last.pos) < geometry.center_distance(&first.pos)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_model::VehicleShape;

    fn path(id: u32, pts: &[(f64, f64, f64)]) -> FuturePath {
        let points: Vec<FuturePathPoint> = pts
            .iter()
            .map(|&(x, y, t)| FuturePathPoint {
                pos: Point2D::new(x, y),
                t,
            })
            .collect();
        FuturePath {
            vehicle_id: id,
            current_pos: points.first().map(|p| p.pos).unwrap_or_default(),
            current_speed: 5.0,
            shape: VehicleShape::default(),
            points,
        }
    }

    /// Straight path through `from` along (dx, dy) at `speed`, 1 m spacing.
    fn straight(id: u32, from: (f64, f64), dir: (f64, f64), speed: f64, n: usize, t0: f64) -> FuturePath {
        let pts: Vec<(f64, f64, f64)> = (0..n)
            .map(|k| {
                let s = k as f64;
                (from.0 + dir.0 * s, from.1 + dir.1 * s, t0 + s / speed)
            })
            .collect();
        path(id, &pts)
    }

    #[test]
    fn identical_paths_conflict_at_start() {
        let a = straight(1, (0.0, 0.0), (1.0, 0.0), 5.0, 20, 0.0);
        let mut b = a.clone();
        b.vehicle_id = 2;
        let c = detect_conflict(&a, &b, &CoordinationParams::default(), 0.0).unwrap();
        assert_eq!((c.own_point_index, c.other_point_index), (0, 0));
        assert_eq!(c.distance, 0.0);
        assert_eq!(c.other_id, 2);
    }

    #[test]
    fn crossing_paths_four_seconds_apart_do_not_conflict() {
        // both reach the origin, 4 s apart
        let a = straight(1, (-20.0, 0.0), (1.0, 0.0), 5.0, 41, 0.0);
        let b = straight(2, (0.0, -20.0), (0.0, 1.0), 5.0, 41, 4.0);
        let p = CoordinationParams {
            t_collision: 20.0,
            ..Default::default()
        };
        assert!(detect_conflict(&a, &b, &p, 0.0).is_none());
        // same geometry, 1 s apart, does conflict
        let b = straight(2, (0.0, -20.0), (0.0, 1.0), 5.0, 41, 1.0);
        assert!(detect_conflict(&a, &b, &p, 0.0).is_some());
    }

    #[test]
    fn margin_and_gap_bounds_are_inclusive() {
        let p = CoordinationParams::default();
        let a = path(1, &[(0.0, 0.0, 1.0)]);
        let b = path(2, &[(2.8, 0.0, 1.0)]);
        let c = detect_conflict(&a, &b, &p, 0.0).unwrap();
        assert_eq!(c.distance, 2.8);
        let b = path(2, &[(0.0, 0.0, 2.5)]);
        assert_eq!(detect_conflict(&a, &b, &p, 0.0).unwrap().time_gap, 1.5);
        let b = path(2, &[(2.81, 0.0, 1.0)]);
        assert!(detect_conflict(&a, &b, &p, 0.0).is_none());
    }

    #[test]
    fn horizon_limits_conflicts() {
        let p = CoordinationParams::default();
        let a = path(1, &[(0.0, 0.0, 6.0)]);
        let b = path(2, &[(0.0, 0.0, 6.0)]);
        assert!(detect_conflict(&a, &b, &p, 0.0).is_none());
        assert!(detect_conflict(&a, &b, &p, 1.0).is_some());
    }

    #[test]
    fn empty_paths_never_conflict() {
        let p = CoordinationParams::default();
        let a = path(1, &[]);
        let b = path(2, &[(0.0, 0.0, 0.0)]);
        assert!(detect_conflict(&a, &b, &p, 0.0).is_none());
        assert!(detect_conflict(&b, &a, &p, 0.0).is_none());
    }

    #[test]
    fn table_check_excludes_self_and_orders_by_id() {
        let p = CoordinationParams::default();
        let mut t = ReservationTable::default();
        let fp = straight(5, (0.0, 0.0), (1.0, 0.0), 5.0, 10, 0.0);
        assert!(t.check(&fp, &p, 0.0).is_empty());
        t.upsert_path(fp.clone(), 0.0);
        assert!(t.check(&fp, &p, 0.0).is_empty());
        let mut o9 = fp.clone();
        o9.vehicle_id = 9;
        let mut o3 = fp.clone();
        o3.vehicle_id = 3;
        t.upsert_path(o9, 0.0);
        t.upsert_path(o3, 0.0);
        let ids: Vec<u32> = t.check(&fp, &p, 0.0).iter().map(|c| c.other_id).collect();
        assert_eq!(ids, vec![3, 9]);
    }

    #[test]
    fn upsert_replaces_and_evicts_stale() {
        let mut t = ReservationTable::new(1.0);
        let a = path(1, &[(0.0, 0.0, 0.0)]);
        t.upsert_path(a.clone(), 0.0);
        assert_eq!(t.len(), 1);
        let a2 = path(1, &[(1.0, 0.0, 0.5)]);
        t.upsert_path(a2.clone(), 0.5);
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(1), Some(&a2));
        t.upsert_path(path(2, &[(5.0, 0.0, 1.0)]), 1.0);
        assert_eq!(t.len(), 2);
        t.upsert_path(path(2, &[(5.0, 0.0, 1.5)]), 1.5);
        assert!(!t.contains(1));
        assert_eq!(t.last_update(2), Some(1.5));
    }

    #[test]
    fn discard_is_idempotent() {
        let p = CoordinationParams::default();
        let mut t = ReservationTable::default();
        let a = path(1, &[(0.0, 0.0, 0.0)]);
        let b = path(2, &[(0.0, 0.0, 0.0)]);
        t.upsert_path(a.clone(), 0.0);
        assert_eq!(t.check(&b, &p, 0.0).len(), 1);
        t.discard_path(1);
        assert!(t.is_empty());
        t.discard_path(1);
        assert!(t.is_empty());
        assert!(t.check(&b, &p, 0.0).is_empty());
    }

    #[test]
    fn acceleration_room_cases() {
        let p = CoordinationParams::default();
        let g = IntersectionGeometry::default();
        let mut t = ReservationTable::default();
        // 40 m out heading in at 5 m/s
        let me = straight(1, (-40.0, 0.0), (1.0, 0.0), 5.0, 80, 0.0);
        assert!(t.has_acceleration_room(&me, &g, &p, 0.0));
        // the crossing vehicle shares the origin at t = 8 s
        let other = straight(2, (0.0, -40.0), (0.0, 1.0), 5.0, 80, 0.0);
        t.upsert_path(other, 0.0);
        assert!(!t.check_within(&me, &p, 0.0, p.t_free).is_empty());
        assert!(t.check(&me, &p, 0.0).is_empty());
        assert!(!t.has_acceleration_room(&me, &g, &p, 0.0));
        // past the zone and moving away
        let leaving = straight(3, (10.0, 0.0), (1.0, 0.0), 5.0, 40, 0.0);
        assert!(!ReservationTable::default().has_acceleration_room(&leaving, &g, &p, 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(CoordinationParams::default().validate().is_ok());
        let bad = CoordinationParams {
            t_free: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = CoordinationParams {
            d_margin: 0.0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(ParamsError::NotPositive("d_margin")));
        assert!(IntersectionGeometry::default().validate().is_ok());
        let g = IntersectionGeometry {
            approach_radius: 5.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }
}
