//! Roadside unit logic: the per-vehicle Auto / C_slow / C_fast state machine
//! and coordinated path generation.
//!
//! Transitions:
//!
//! ```text
//! Auto  --conflict within t_collision-------------------> CSlow  (Initiation)
//! Auto  --no conflict, room within t_free---------------> CFast  (Initiation)
//! CSlow --autonomous path clear, room-------------------> CFast  (Initiation)
//! CSlow --autonomous path clear, no room----------------> Auto   (Termination)
//! CFast --left the intersection-------------------------> Auto   (Termination)
//! CFast --conflicts with an earlier C_fast grant--------> Auto   (Termination)
//! CSlow/CFast --no autonomous path for silence_timeout--> Auto   (Termination)
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::Message;
use crate::path_model::{
    limit_acceleration, to_future_path, FuturePath, PathMeta, Trajectory, TrajectoryPoint, VehicleShape,
};
use crate::reservation::{CoordinationParams, IntersectionGeometry, ReservationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinationMode {
    #[default]
    Auto,
    CSlow,
    CFast,
}

impl CoordinationMode {
    pub fn is_coordinated(self) -> bool {
        self != CoordinationMode::Auto
    }

    pub fn label(self) -> &'static str {
        match self {
            CoordinationMode::Auto => "auto",
            CoordinationMode::CSlow => "c_slow",
            CoordinationMode::CFast => "c_fast",
        }
    }
}

impl std::fmt::Display for CoordinationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinatorError {
    #[error("no coordinated path exists in Auto mode")]
    AutoMode,
    #[error("autonomous path is empty")]
    EmptyPath,
}

/// Builds the speed override for a vehicle in a coordinated mode.
///
/// C_slow zeroes every speed. C_fast raises speeds to `v_max` up to the zone
/// exit and keeps the original speeds after it. Positions are never touched.
pub fn make_coordinated_path(
    ap: &Trajectory,
    mode: CoordinationMode,
    geometry: &IntersectionGeometry,
    params: &CoordinationParams,
) -> Result<Trajectory, CoordinatorError> {
    if ap.is_empty() {
        return Err(CoordinatorError::EmptyPath);
    }
    match mode {
        CoordinationMode::Auto => Err(CoordinatorError::AutoMode),
        CoordinationMode::CSlow => Ok(Trajectory::new(
            ap.points.iter().map(|p| TrajectoryPoint::new(p.pos, 0.0)).collect(),
        )),
        CoordinationMode::CFast => {
            let exit = geometry.exit_radius();
            let last_inside = ap.points.iter().rposition(|p| geometry.center_distance(&p.pos) <= exit);
            let boost_until = match last_inside {
                Some(i) => Some(i),
                None => {
                    let first = geometry.center_distance(&ap.points[0].pos);
                    let last = geometry.center_distance(&ap.points[ap.len() - 1].pos);
                    // never reaches the exit radius: boost only if still heading in
                    (last < first).then(|| ap.len() - 1)
                }
            };
            let mut out = ap.clone();
            if let Some(end) = boost_until {
                for p in &mut out.points[..=end] {
                    p.speed = params.v_max;
                }
            }
            Ok(out)
        }
    }
}

/// Recovers a trajectory from a future path using the speed implied by each
/// segment.
fn implied_trajectory(fp: &FuturePath) -> Trajectory {
    let mut pts = Vec::with_capacity(fp.points.len());
    for (k, p) in fp.points.iter().enumerate() {
        let speed = if k == 0 {
            fp.current_speed
        } else {
            let prev = &fp.points[k - 1];
            let dt = p.t - prev.t;
            if dt > 0.0 {
                prev.pos.distance(&p.pos) / dt
            } else {
                0.0
            }
        };
        pts.push(TrajectoryPoint::new(p.pos, speed));
    }
    Trajectory::new(pts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSession {
    pub vehicle_id: u32,
    pub mode: CoordinationMode,
    pub last_autonomous_path: Option<Trajectory>,
    pub last_seen: f64,
    pub passed_intersection: bool,
    /// The vehicle was seen within the exit radius at least once.
    pub entered_zone: bool,
    pub mode_since: f64,
    pub last_autonomous_at: Option<f64>,
    /// Speed reported in the latest future path.
    pub last_speed: f64,
    /// A C_fast vehicle this one lost its grant to; no new grant until that
    /// vehicle leaves C_fast.
    pub blocked_by: Option<u32>,
}

impl VehicleSession {
    fn new(vehicle_id: u32, now: f64) -> Self {
        Self {
            vehicle_id,
            mode: CoordinationMode::Auto,
            last_autonomous_path: None,
            last_seen: now,
            passed_intersection: false,
            entered_zone: false,
            mode_since: now,
            last_autonomous_at: None,
            last_speed: 0.0,
            blocked_by: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeEvent {
    pub t: f64,
    pub vehicle_id: u32,
    pub from: CoordinationMode,
    pub to: CoordinationMode,
}

/// Input to [`Coordinator::step_mode`].
#[derive(Debug, Clone, PartialEq)]
pub enum Incoming {
    FuturePath(FuturePath),
    Autonomous {
        vehicle_id: u32,
        trajectory: Trajectory,
        t0: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Coordinator {
    pub table: ReservationTable,
    pub sessions: BTreeMap<u32, VehicleSession>,
    pub params: CoordinationParams,
    pub geometry: IntersectionGeometry,
    /// Coordinated sessions without an autonomous path for this long fall
    /// back to Auto.
    pub silence_timeout: f64,
    /// Acceleration assumed when predicting a sped-up vehicle.
    pub assumed_accel: f64,
    mode_log: Vec<ModeEvent>,
    ignored: usize,
}

impl Coordinator {
    pub fn new(params: CoordinationParams, geometry: IntersectionGeometry) -> Self {
        Self {
            table: ReservationTable::new(1.0),
            sessions: BTreeMap::new(),
            params,
            geometry,
            silence_timeout: 1.0,
            assumed_accel: 2.0,
            mode_log: Vec::new(),
            ignored: 0,
        }
    }

    pub fn with_assumed_accel(mut self, a: f64) -> Self {
        self.assumed_accel = a;
        self
    }

    pub fn mode_of(&self, id: u32) -> CoordinationMode {
        self.sessions.get(&id).map_or(CoordinationMode::Auto, |s| s.mode)
    }

    pub fn mode_log(&self) -> &[ModeEvent] {
        &self.mode_log
    }

    /// Messages dropped because they did not fit the session state.
    pub fn ignored_messages(&self) -> usize {
        self.ignored
    }

    fn set_mode(&mut self, id: u32, to: CoordinationMode, now: f64) {
        let s = self.sessions.get_mut(&id).expect("session exists");
        if s.mode != to {
            self.mode_log.push(ModeEvent {
                t: now,
                vehicle_id: id,
                from: s.mode,
                to,
            });
            s.mode = to;
            s.mode_since = now;
            s.last_autonomous_at = None;
            if to == CoordinationMode::Auto {
                s.last_autonomous_path = None;
            }
        }
    }

    fn observe_position(&mut self, id: u32, fp: &FuturePath, now: f64) {
        let exit = self.geometry.exit_radius();
        let d = self.geometry.center_distance(&fp.current_pos);
        let s = self.sessions.entry(id).or_insert_with(|| VehicleSession::new(id, now));
        s.last_seen = now;
        s.last_speed = fp.current_speed;
        if d <= exit {
            s.entered_zone = true;
        } else if s.entered_zone {
            s.passed_intersection = true;
        }
    }

    /// The sped-up path a grant would produce, if it leaves room: no
    /// conflict over the `t_free` look-ahead while approaching.
    fn grant_room(&self, fp: &FuturePath, now: f64) -> Option<FuturePath> {
        let blocker = self.sessions.get(&fp.vehicle_id).and_then(|s| s.blocked_by);
        if blocker.is_some_and(|b| self.mode_of(b) == CoordinationMode::CFast) {
            return None;
        }
        let boosted = self.boosted(fp)?;
        self.table
            .has_acceleration_room(&boosted, &self.geometry, &self.params, now)
            .then_some(boosted)
    }

    fn boosted(&self, fp: &FuturePath) -> Option<FuturePath> {
        let traj = implied_trajectory(fp);
        let fast = make_coordinated_path(&traj, CoordinationMode::CFast, &self.geometry, &self.params).ok()?;
        let fast = limit_acceleration(&fast, fp.current_speed, self.assumed_accel);
        let meta = PathMeta {
            vehicle_id: fp.vehicle_id,
            current_pos: fp.current_pos,
            current_speed: fp.current_speed,
            shape: fp.shape,
        };
        to_future_path(&fast, 0, fp.t0()?, meta).ok()
    }

    /// Ids of C_fast sessions granted before `id`'s own grant.
    fn earlier_fast_grants(&self, id: u32) -> Vec<u32> {
        let mine = self.sessions.get(&id).map_or(f64::INFINITY, |s| s.mode_since);
        self.sessions
            .values()
            .filter(|s| s.vehicle_id != id && s.mode == CoordinationMode::CFast)
            .filter(|s| (s.mode_since, s.vehicle_id) < (mine, id))
            .map(|s| s.vehicle_id)
            .collect()
    }

    /// One pass of the mode-switching flow for a received path.
    pub fn step_mode(&mut self, incoming: Incoming, now: f64) -> Vec<Message> {
        match incoming {
            Incoming::FuturePath(fp) => self.on_future_path(fp, now),
            Incoming::Autonomous {
                vehicle_id,
                trajectory,
                t0,
            } => self.on_autonomous_path(vehicle_id, trajectory, t0, now),
        }
    }

    fn on_future_path(&mut self, fp: FuturePath, now: f64) -> Vec<Message> {
        if fp.points.is_empty() {
            self.ignored += 1;
            return Vec::new();
        }
        let id = fp.vehicle_id;
        self.observe_position(id, &fp, now);
        match self.mode_of(id) {
            CoordinationMode::Auto => {
                if !self.table.check(&fp, &self.params, now).is_empty() {
                    self.table.discard_path(id);
                    self.set_mode(id, CoordinationMode::CSlow, now);
                    vec![Message::Initiation {
                        vehicle_id: id,
                        target_mode: CoordinationMode::CSlow,
                    }]
                } else if let Some(boosted) = self.grant_room(&fp, now) {
                    self.table.upsert_path(boosted, now);
                    self.set_mode(id, CoordinationMode::CFast, now);
                    vec![Message::Initiation {
                        vehicle_id: id,
                        target_mode: CoordinationMode::CFast,
                    }]
                } else {
                    self.table.upsert_path(fp, now);
                    Vec::new()
                }
            }
            // the slowed vehicle's reservation stays discarded
            CoordinationMode::CSlow => Vec::new(),
            CoordinationMode::CFast => {
                if self.sessions[&id].passed_intersection {
                    self.table.upsert_path(fp, now);
                    self.set_mode(id, CoordinationMode::Auto, now);
                    return vec![Message::Termination { vehicle_id: id }];
                }
                let earlier = self.earlier_fast_grants(id);
                let clash = self
                    .table
                    .check(&fp, &self.params, now)
                    .into_iter()
                    .find(|c| earlier.contains(&c.other_id));
                self.table.upsert_path(fp, now);
                if let Some(c) = clash {
                    self.sessions.get_mut(&id).expect("session exists").blocked_by = Some(c.other_id);
                    self.set_mode(id, CoordinationMode::Auto, now);
                    vec![Message::Termination { vehicle_id: id }]
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn on_autonomous_path(&mut self, id: u32, ap: Trajectory, t0: f64, now: f64) -> Vec<Message> {
        let mode = self.mode_of(id);
        if ap.is_empty() || !mode.is_coordinated() {
            self.ignored += 1;
            return Vec::new();
        }
        let speed = self.sessions.get(&id).map_or(ap.points[0].speed, |s| s.last_speed);
        let meta = PathMeta {
            vehicle_id: id,
            current_pos: ap.points[0].pos,
            current_speed: speed,
            shape: VehicleShape::default(),
        };
        let reachable = limit_acceleration(&ap, speed, self.assumed_accel);
        let fp = to_future_path(&reachable, 0, t0, meta).expect("non-empty path");
        self.observe_position(id, &fp, now);
        if let Some(s) = self.sessions.get_mut(&id) {
            s.last_autonomous_path = Some(ap.clone());
            s.last_autonomous_at = Some(now);
        }
        let coordinated = |mode| {
            make_coordinated_path(&ap, mode, &self.geometry, &self.params).map(|trajectory| Message::CoordinatedPath {
                vehicle_id: id,
                trajectory,
            })
        };
        match mode {
            CoordinationMode::CSlow => {
                if !self.table.check(&fp, &self.params, now).is_empty() {
                    return coordinated(CoordinationMode::CSlow).into_iter().collect();
                }
                if let Some(boosted) = self.grant_room(&fp, now) {
                    let out = coordinated(CoordinationMode::CFast);
                    self.table.upsert_path(boosted, now);
                    self.set_mode(id, CoordinationMode::CFast, now);
                    std::iter::once(Message::Initiation {
                        vehicle_id: id,
                        target_mode: CoordinationMode::CFast,
                    })
                    .chain(out)
                    .collect()
                } else {
                    self.table.upsert_path(fp, now);
                    self.set_mode(id, CoordinationMode::Auto, now);
                    vec![Message::Termination { vehicle_id: id }]
                }
            }
            CoordinationMode::CFast => {
                if self.sessions[&id].passed_intersection {
                    self.table.upsert_path(fp, now);
                    self.set_mode(id, CoordinationMode::Auto, now);
                    vec![Message::Termination { vehicle_id: id }]
                } else {
                    coordinated(CoordinationMode::CFast).into_iter().collect()
                }
            }
            CoordinationMode::Auto => unreachable!("filtered above"),
        }
    }

    /// Routes a received message. Only path messages concern the RSU.
    pub fn handle_message(&mut self, msg: &Message, now: f64) -> Vec<Message> {
        match msg {
            Message::FuturePath(fp) => self.step_mode(Incoming::FuturePath(fp.clone()), now),
            Message::AutonomousPath {
                vehicle_id,
                trajectory,
                t0,
            } => self.step_mode(
                Incoming::Autonomous {
                    vehicle_id: *vehicle_id,
                    trajectory: trajectory.clone(),
                    t0: *t0,
                },
                now,
            ),
            _ => {
                self.ignored += 1;
                Vec::new()
            }
        }
    }

    /// Housekeeping once per simulation step: stale reservations go away and
    /// silent coordinated sessions are terminated.
    pub fn tick(&mut self, now: f64) -> Vec<Message> {
        self.table.evict_stale(now);
        let silent: Vec<u32> = self
            .sessions
            .values()
            .filter(|s| s.mode.is_coordinated())
            .filter(|s| now - s.last_autonomous_at.unwrap_or(s.mode_since) > self.silence_timeout)
            .map(|s| s.vehicle_id)
            .collect();
        silent
            .into_iter()
            .map(|id| {
                self.set_mode(id, CoordinationMode::Auto, now);
                Message::Termination { vehicle_id: id }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_model::{FuturePathPoint, Point2D};

    fn traj_x(from: f64, to: f64, step: f64, speed: f64) -> Trajectory {
        let n = ((to - from) / step).round() as usize;
        Trajectory::new(
            (0..=n)
                .map(|k| TrajectoryPoint::new(Point2D::new(from + step * k as f64, 0.0), speed))
                .collect(),
        )
    }

    fn traj_y(from: f64, to: f64, step: f64, speed: f64) -> Trajectory {
        let n = ((to - from) / step).round() as usize;
        Trajectory::new(
            (0..=n)
                .map(|k| TrajectoryPoint::new(Point2D::new(0.0, from + step * k as f64), speed))
                .collect(),
        )
    }

    fn fp_of(id: u32, t: &Trajectory, t0: f64) -> FuturePath {
        let meta = PathMeta {
            vehicle_id: id,
            current_pos: t.points[0].pos,
            current_speed: t.points[0].speed,
            shape: VehicleShape::default(),
        };
        to_future_path(t, 0, t0, meta).unwrap()
    }

    fn rsu() -> Coordinator {
        Coordinator::new(CoordinationParams::default(), IntersectionGeometry::default())
    }

    #[test]
    fn cslow_zeroes_speeds_and_keeps_positions() {
        let ap = traj_x(-30.0, 30.0, 1.0, 5.0);
        let out = make_coordinated_path(
            &ap,
            CoordinationMode::CSlow,
            &IntersectionGeometry::default(),
            &CoordinationParams::default(),
        )
        .unwrap();
        assert!(out.points.iter().all(|p| p.speed == 0.0));
        assert!(out.points.iter().zip(&ap.points).all(|(a, b)| a.pos == b.pos));
    }

    #[test]
    fn cfast_boosts_until_zone_exit() {
        let p = CoordinationParams::default();
        let g = IntersectionGeometry::default();
        let ap = traj_x(-30.0, 30.0, 1.0, 5.0);
        let out = make_coordinated_path(&ap, CoordinationMode::CFast, &g, &p).unwrap();
        for q in &out.points {
            let expect = if q.pos.x <= 9.0 { 50.0 / 3.6 } else { 5.0 };
            assert_eq!(q.speed, expect, "at x={}", q.pos.x);
        }
        assert!((p.v_max - 13.889).abs() < 1e-3);
    }

    #[test]
    fn cfast_past_the_zone_is_identity() {
        let p = CoordinationParams::default();
        let g = IntersectionGeometry::default();
        let ap = traj_x(12.0, 40.0, 1.0, 5.0);
        assert_eq!(make_coordinated_path(&ap, CoordinationMode::CFast, &g, &p).unwrap(), ap);
        assert_eq!(
            make_coordinated_path(&ap, CoordinationMode::Auto, &g, &p),
            Err(CoordinatorError::AutoMode)
        );
    }

    #[test]
    fn first_vehicle_far_out_is_just_stored() {
        let mut c = rsu();
        let fp = fp_of(1, &traj_x(-80.0, 80.0, 1.5, 5.5), 0.0);
        let out = c.handle_message(&Message::FuturePath(fp), 0.0);
        assert!(out.is_empty());
        assert!(c.table.contains(1));
        assert_eq!(c.mode_of(1), CoordinationMode::Auto);
    }

    #[test]
    fn conflicting_path_switches_to_cslow_and_is_discarded() {
        let mut c = rsu();
        // both reach the origin at t = 4 s
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(-20.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        let out = c.step_mode(Incoming::FuturePath(fp_of(2, &traj_y(-20.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        assert_eq!(
            out,
            vec![Message::Initiation {
                vehicle_id: 2,
                target_mode: CoordinationMode::CSlow
            }]
        );
        assert_eq!(c.mode_of(2), CoordinationMode::CSlow);
        assert!(!c.table.contains(2));
        // further future paths from the slowed vehicle are not stored
        c.step_mode(Incoming::FuturePath(fp_of(2, &traj_y(-19.0, 60.0, 1.0, 5.0), 0.1)), 0.1);
        assert!(!c.table.contains(2));
    }

    #[test]
    fn clear_approach_gets_cfast() {
        let mut c = rsu();
        let out = c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(-40.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        assert_eq!(
            out,
            vec![Message::Initiation {
                vehicle_id: 1,
                target_mode: CoordinationMode::CFast
            }]
        );
        assert_eq!(c.mode_of(1), CoordinationMode::CFast);
        assert!(c.table.contains(1));
    }

    #[test]
    fn cfast_terminates_after_leaving_the_zone() {
        let mut c = rsu();
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(-40.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        let ap = traj_x(-3.0, 60.0, 1.0, 5.0);
        let out = c.step_mode(
            Incoming::Autonomous {
                vehicle_id: 1,
                trajectory: ap,
                t0: 5.0,
            },
            5.0,
        );
        assert!(matches!(out.as_slice(), [Message::CoordinatedPath { .. }]));
        let ap = traj_x(10.0, 60.0, 1.0, 5.0);
        let out = c.step_mode(
            Incoming::Autonomous {
                vehicle_id: 1,
                trajectory: ap,
                t0: 7.0,
            },
            7.0,
        );
        assert_eq!(out, vec![Message::Termination { vehicle_id: 1 }]);
        assert_eq!(c.mode_of(1), CoordinationMode::Auto);
        assert!(c.sessions[&1].passed_intersection);
    }

    #[test]
    fn cslow_keeps_zero_speed_while_conflicting_then_releases() {
        let mut c = rsu();
        // vehicle 1 holds the crossing at t = 4 s
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(-20.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        c.step_mode(Incoming::FuturePath(fp_of(2, &traj_y(-20.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        let ap = traj_y(-19.0, 60.0, 1.0, 5.0);
        let out = c.step_mode(
            Incoming::Autonomous {
                vehicle_id: 2,
                trajectory: ap,
                t0: 0.2,
            },
            0.2,
        );
        match out.as_slice() {
            [Message::CoordinatedPath {
                vehicle_id: 2,
                trajectory,
            }] => {
                assert!(trajectory.points.iter().all(|p| p.speed == 0.0))
            }
            other => panic!("unexpected {other:?}"),
        }
        // vehicle 1 is now well past the crossing; 2 is 40 m out with room ahead
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(20.0, 60.0, 1.0, 5.0), 8.0)), 8.0);
        let ap = traj_y(-40.0, 60.0, 1.0, 5.0);
        let out = c.step_mode(
            Incoming::Autonomous {
                vehicle_id: 2,
                trajectory: ap,
                t0: 8.05,
            },
            8.05,
        );
        assert!(matches!(
            out.as_slice(),
            [
                Message::Initiation {
                    vehicle_id: 2,
                    target_mode: CoordinationMode::CFast
                },
                Message::CoordinatedPath { vehicle_id: 2, .. }
            ]
        ));
        let modes: Vec<(CoordinationMode, CoordinationMode)> = c.mode_log().iter().map(|e| (e.from, e.to)).collect();
        assert_eq!(
            modes,
            vec![
                (CoordinationMode::Auto, CoordinationMode::CSlow),
                (CoordinationMode::CSlow, CoordinationMode::CFast)
            ]
        );
    }

    #[test]
    fn cslow_release_without_room_goes_back_to_auto() {
        let mut c = rsu();
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(-20.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        c.step_mode(Incoming::FuturePath(fp_of(2, &traj_y(-20.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(20.0, 60.0, 1.0, 5.0), 8.0)), 8.0);
        // 15 m out: ten seconds of travel carry it well past the center
        let ap = traj_y(-15.0, 60.0, 1.0, 5.0);
        let out = c.step_mode(
            Incoming::Autonomous {
                vehicle_id: 2,
                trajectory: ap,
                t0: 8.0,
            },
            8.0,
        );
        assert_eq!(out, vec![Message::Termination { vehicle_id: 2 }]);
        assert!(c.table.contains(2));
    }

    #[test]
    fn autonomous_path_in_auto_is_ignored() {
        let mut c = rsu();
        let out = c.handle_message(
            &Message::AutonomousPath {
                vehicle_id: 5,
                trajectory: traj_x(-40.0, 0.0, 1.0, 5.0),
                t0: 0.0,
            },
            0.0,
        );
        assert!(out.is_empty());
        assert_eq!(c.ignored_messages(), 1);
        assert!(c
            .handle_message(&Message::Termination { vehicle_id: 5 }, 0.0)
            .is_empty());
    }

    #[test]
    fn empty_future_path_leaves_state_alone() {
        let mut c = rsu();
        let fp = FuturePath {
            vehicle_id: 3,
            current_pos: Point2D::default(),
            current_speed: 0.0,
            shape: VehicleShape::default(),
            points: Vec::<FuturePathPoint>::new(),
        };
        assert!(c.step_mode(Incoming::FuturePath(fp), 0.0).is_empty());
        assert!(c.sessions.is_empty());
        assert!(c.table.is_empty());
    }

    #[test]
    fn silent_coordinated_session_times_out() {
        let mut c = rsu();
        c.step_mode(Incoming::FuturePath(fp_of(1, &traj_x(-40.0, 60.0, 1.0, 5.0), 0.0)), 0.0);
        assert_eq!(c.mode_of(1), CoordinationMode::CFast);
        assert!(c.tick(0.9).is_empty());
        assert_eq!(c.tick(1.05), vec![Message::Termination { vehicle_id: 1 }]);
        assert_eq!(c.mode_of(1), CoordinationMode::Auto);
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let run = || {
            let mut c = rsu();
            let mut out = Vec::new();
            for k in 0..40 {
                let t = k as f64 * 0.1;
                let a = traj_x(-40.0 + 0.5 * k as f64, 60.0, 1.0, 5.0);
                let b = traj_y(-45.0 + 0.5 * k as f64, 60.0, 1.0, 5.0);
                out.extend(c.step_mode(Incoming::FuturePath(fp_of(1, &a, t)), t));
                out.extend(c.step_mode(Incoming::FuturePath(fp_of(2, &b, t)), t));
                out.extend(c.step_mode(
                    Incoming::Autonomous {
                        vehicle_id: 2,
                        trajectory: b,
                        t0: t,
                    },
                    t,
                ));
            }
            (out, c.mode_log().to_vec())
        };
        assert_eq!(run(), run());
    }
}
