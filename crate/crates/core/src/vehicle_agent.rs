//! Vehicle-side stack: route following, the stand-alone right-of-way rule,
//! future paths as dynamic obstacles, coordinated path override, a
//! longitudinal controller and occluded perception.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coordinator::CoordinationMode;
use crate::netsim::{Destination, Message, NodeId};
use crate::path_model::{
    limit_acceleration, resample_polyline, to_future_path, FuturePath, PathMeta, Point2D, Route, Trajectory,
    TrajectoryPoint, VehicleShape, MAX_PATH_POINTS, MIN_POINT_SPACING, V_EPS,
};
use crate::reservation::{detect_conflict, CoordinationParams, IntersectionGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlLimits {
    pub a_max: f64,
    /// Braking, positive.
    pub b_max: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self { a_max: 2.0, b_max: 3.0 }
    }
}

impl ControlLimits {
    pub fn is_valid(&self) -> bool {
        self.a_max > 0.0 && self.b_max > 0.0 && self.a_max.is_finite() && self.b_max.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Two vehicles see each other when both are this close to the center.
    pub r_vis: f64,
    /// Vehicles this close to each other always see each other.
    pub d_detect: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            r_vis: 30.0,
            d_detect: 15.0,
        }
    }
}

impl PerceptionConfig {
    pub fn is_valid(&self) -> bool {
        self.r_vis > 0.0 && self.d_detect > 0.0
    }
}

/// Planner and messaging parameters shared by all vehicles of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Desired speed of the autonomous planner.
    pub cruise_speed: f64,
    /// Stop line distance before the conflict zone boundary.
    pub d_stop: f64,
    /// Gap kept before a conflicting future-path point.
    pub d_safe: f64,
    /// Deceleration used to plan a stop at the stop line.
    pub stop_decel: f64,
    /// Deceleration used to plan a stop for a future-path obstacle.
    pub obstacle_decel: f64,
    pub message_period: f64,
    /// A coordinated path older than this is not followed.
    pub coordinated_fresh_for: f64,
    /// Without coordinated paths for this long the vehicle drops back to Auto.
    pub coordinated_timeout: f64,
    pub foreign_path_timeout: f64,
    /// Mutual standstill longer than this lets the lower id go.
    pub deadlock_wait: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            cruise_speed: 20.0 / 3.6,
            d_stop: 5.0,
            d_safe: 5.0,
            stop_decel: 2.4,
            obstacle_decel: 1.0,
            message_period: 0.1,
            coordinated_fresh_for: 0.5,
            coordinated_timeout: 1.0,
            foreign_path_timeout: 1.0,
            deadlock_wait: 3.0,
        }
    }
}

impl AgentConfig {
    pub fn is_valid(&self) -> bool {
        [
            self.cruise_speed,
            self.stop_decel,
            self.obstacle_decel,
            self.message_period,
            self.coordinated_fresh_for,
            self.coordinated_timeout,
            self.foreign_path_timeout,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0)
            && self.d_stop >= 0.0
            && self.d_safe >= 0.0
            && self.deadlock_wait >= 0.0
    }
}

/// Which planning layers run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanningLayers {
    pub intersection_rule: bool,
    pub share_paths: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveCoordinatedPath {
    pub trajectory: Trajectory,
    pub received_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub vehicle_id: u32,
    pub route: Arc<Route>,
    /// Arc length along the route.
    pub s: f64,
    pub v: f64,
    pub mode: CoordinationMode,
    pub active_coordinated_path: Option<ActiveCoordinatedPath>,
    pub shape: VehicleShape,
}

impl VehicleState {
    pub fn new(vehicle_id: u32, route: Arc<Route>, s: f64) -> Self {
        Self {
            vehicle_id,
            route,
            s,
            v: 0.0,
            mode: CoordinationMode::Auto,
            active_coordinated_path: None,
            shape: VehicleShape::default(),
        }
    }

    pub fn position(&self) -> Point2D {
        self.route.point_at(self.s)
    }

    /// Arc distance past the point of the route closest to the center.
    /// Negative while approaching.
    pub fn center_offset(&self, geometry: &IntersectionGeometry) -> f64 {
        self.s - self.route.project(&geometry.center)
    }

    pub fn center_distance(&self, geometry: &IntersectionGeometry) -> f64 {
        geometry.center_distance(&self.position())
    }

    fn meta(&self) -> PathMeta {
        PathMeta {
            vehicle_id: self.vehicle_id,
            current_pos: self.position(),
            current_speed: self.v,
            shape: self.shape,
        }
    }
}

/// Route-following trajectory from the current position to the end of the
/// route: `v_max` with a braking ramp down to zero at the end.
pub fn plan_route_trajectory(state: &VehicleState, v_max: f64, limits: &ControlLimits) -> Trajectory {
    let remaining = state.route.length() - state.s;
    let here = state.position();
    if remaining <= 1e-9 {
        return Trajectory::new(vec![TrajectoryPoint::new(here, 0.0)]);
    }
    let spacing = (remaining / (MAX_PATH_POINTS - 1) as f64).max(MIN_POINT_SPACING);
    let pts = resample_polyline(&state.route.remainder(state.s), spacing)
        .unwrap_or_else(|_| vec![here, state.route.point_at(state.route.length())]);
    let mut traj = Trajectory::new(pts.into_iter().map(|p| TrajectoryPoint::new(p, v_max)).collect());
    let offsets = traj.arc_offsets();
    let total = offsets.last().copied().unwrap_or(0.0);
    for (p, o) in traj.points.iter_mut().zip(&offsets) {
        p.speed = p.speed.min((2.0 * limits.b_max * (total - o).max(0.0)).sqrt());
    }
    traj
}

/// Caps speeds so the trajectory comes to rest `stop_offset` meters along it
/// with deceleration `decel`. Points at or past the stop get zero speed.
pub fn limit_to_stop(traj: &Trajectory, stop_offset: f64, decel: f64) -> Trajectory {
    let offsets = traj.arc_offsets();
    let mut out = traj.clone();
    for (p, o) in out.points.iter_mut().zip(&offsets) {
        p.speed = if *o >= stop_offset {
            0.0
        } else {
            p.speed.min((2.0 * decel * (stop_offset - o)).sqrt())
        };
    }
    out
}

fn naive_eta(state: &VehicleState, geometry: &IntersectionGeometry) -> f64 {
    state.center_distance(geometry) / state.v.max(1.0)
}

/// Whether a perceived vehicle has right of way over `me` at an unsignalized
/// crossing: it is inside the zone, or it reaches the zone first.
fn must_yield(me: &VehicleState, other: &VehicleState, geometry: &IntersectionGeometry) -> bool {
    if geometry.in_zone(&other.position()) {
        return true;
    }
    if other.center_offset(geometry) >= 0.0 {
        return false;
    }
    let (mine, theirs) = (naive_eta(me, geometry), naive_eta(other, geometry));
    theirs < mine || (theirs == mine && other.vehicle_id < me.vehicle_id)
}

fn stop_line_offset(geometry: &IntersectionGeometry, cfg: &AgentConfig) -> f64 {
    -(geometry.zone_radius + cfg.d_stop)
}

/// More than a meter past the stop line the vehicle is committed.
fn past_stop_line(me: &VehicleState, geometry: &IntersectionGeometry, cfg: &AgentConfig) -> bool {
    me.center_offset(geometry) > stop_line_offset(geometry, cfg) + 1.0
}

/// Whether the stand-alone rule asks `me` to hold at the stop line.
pub fn must_hold_at_stop_line(
    me: &VehicleState,
    perceived: &[VehicleState],
    geometry: &IntersectionGeometry,
    cfg: &AgentConfig,
) -> bool {
    !past_stop_line(me, geometry, cfg)
        && perceived
            .iter()
            .any(|o| o.vehicle_id != me.vehicle_id && must_yield(me, o, geometry))
}

/// Caps the plan so the vehicle comes to rest at the stop line.
pub fn stop_at_line(
    traj: &Trajectory,
    me: &VehicleState,
    geometry: &IntersectionGeometry,
    cfg: &AgentConfig,
) -> Trajectory {
    let gap = stop_line_offset(geometry, cfg) - me.center_offset(geometry);
    limit_to_stop(traj, gap, cfg.stop_decel)
}

/// Stand-alone right-of-way: stop at the stop line while another vehicle is
/// in the zone or would reach it first.
pub fn apply_intersection_rule(
    traj: &Trajectory,
    me: &VehicleState,
    perceived: &[VehicleState],
    geometry: &IntersectionGeometry,
    cfg: &AgentConfig,
) -> Trajectory {
    if must_hold_at_stop_line(me, perceived, geometry, cfg) {
        stop_at_line(traj, me, geometry, cfg)
    } else {
        traj.clone()
    }
}

/// Earliest point of `own` conflicting with any foreign path over the
/// `t_collision` look-ahead, with the id of the foreign vehicle.
pub fn first_obstacle_conflict(
    own: &FuturePath,
    foreign: &[FuturePath],
    params: &CoordinationParams,
    now: f64,
) -> Option<(usize, u32)> {
    foreign
        .iter()
        .filter(|f| f.vehicle_id != own.vehicle_id)
        .filter_map(|f| detect_conflict(own, f, params, now).map(|c| (c.own_point_index, c.other_id)))
        .min()
}

/// Index of the first point of `own` within `margin` of any point of `other`.
fn first_touch(own: &FuturePath, other: &FuturePath, margin: f64) -> Option<usize> {
    own.points
        .iter()
        .position(|p| other.points.iter().any(|q| p.pos.distance(&q.pos) <= margin))
}

/// Treats foreign future paths as obstacles: ramps down to a stop `d_safe`
/// meters before the earliest conflicting point of `own_fp`.
pub fn apply_future_obstacles(
    traj: &Trajectory,
    own_fp: &FuturePath,
    foreign: &[FuturePath],
    params: &CoordinationParams,
    now: f64,
    d_safe: f64,
    decel: f64,
) -> Trajectory {
    match first_obstacle_conflict(own_fp, foreign, params, now) {
        Some((idx, _)) => {
            let offsets = traj.arc_offsets();
            let at = offsets.get(idx).copied().unwrap_or(0.0);
            limit_to_stop(traj, at - d_safe, decel)
        }
        None => traj.clone(),
    }
}

fn coordinated_is_fresh(state: &VehicleState, now: f64, fresh_for: f64) -> bool {
    state.mode.is_coordinated()
        && state
            .active_coordinated_path
            .as_ref()
            .is_some_and(|c| now - c.received_at < fresh_for)
}

/// The coordinated path while it is fresh in a coordinated mode, otherwise
/// the vehicle's own plan.
pub fn select_active_plan(state: &VehicleState, planned: &Trajectory, now: f64, fresh_for: f64) -> Trajectory {
    if coordinated_is_fresh(state, now, fresh_for) {
        state
            .active_coordinated_path
            .as_ref()
            .map(|c| c.trajectory.clone())
            .unwrap_or_else(|| planned.clone())
    } else {
        planned.clone()
    }
}

/// Speed of the plan at the first point not behind the vehicle.
pub fn target_speed(state: &VehicleState, active: &Trajectory) -> f64 {
    match active.index_ahead_of(&state.position()) {
        Ok(i) => active.points[i].speed,
        Err(_) => 0.0,
    }
}

/// One longitudinal controller step with acceleration and braking limits.
pub fn control_step(state: &VehicleState, active: &Trajectory, limits: &ControlLimits, dt: f64) -> VehicleState {
    let target = target_speed(state, active);
    let v = target
        .clamp(state.v - limits.b_max * dt, state.v + limits.a_max * dt)
        .max(0.0);
    let s = (state.s + v * dt).min(state.route.length());
    VehicleState { s, v, ..state.clone() }
}

/// Vehicles `me` can see: both inside the visibility radius, or close to each
/// other.
pub fn perceive(
    me: &VehicleState,
    others: &[VehicleState],
    geometry: &IntersectionGeometry,
    pcfg: &PerceptionConfig,
) -> Vec<VehicleState> {
    let here = me.position();
    let me_visible = geometry.center_distance(&here) <= pcfg.r_vis;
    others
        .iter()
        .filter(|o| o.vehicle_id != me.vehicle_id)
        .filter(|o| {
            let there = o.position();
            (me_visible && geometry.center_distance(&there) <= pcfg.r_vis) || here.distance(&there) <= pcfg.d_detect
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct ObstacleHold {
    /// Route arc length of the planned stop.
    stop_s: f64,
    last_conflict: f64,
    other: u32,
}

/// A vehicle with its planner state and message cadence.
#[derive(Debug, Clone)]
pub struct VehicleAgent {
    pub state: VehicleState,
    pub destination_s: f64,
    cfg: AgentConfig,
    limits: ControlLimits,
    params: CoordinationParams,
    geometry: IntersectionGeometry,
    layers: PlanningLayers,
    foreign: BTreeMap<u32, (FuturePath, f64)>,
    hold: Option<ObstacleHold>,
    stopped_since: Option<f64>,
    waived: Option<u32>,
    /// Yielding at the stop line lasts until the vehicle has come to rest.
    yielding: bool,
    next_emit: Option<f64>,
    mode_entered: f64,
}

impl VehicleAgent {
    pub fn new(
        state: VehicleState,
        destination_s: f64,
        cfg: AgentConfig,
        limits: ControlLimits,
        params: CoordinationParams,
        geometry: IntersectionGeometry,
        layers: PlanningLayers,
    ) -> Self {
        Self {
            state,
            destination_s,
            cfg,
            limits,
            params,
            geometry,
            layers,
            foreign: BTreeMap::new(),
            hold: None,
            stopped_since: None,
            waived: None,
            yielding: false,
            next_emit: None,
            mode_entered: 0.0,
        }
    }

    pub fn id(&self) -> u32 {
        self.state.vehicle_id
    }

    pub fn arrived(&self) -> bool {
        self.state.s >= self.destination_s
    }

    /// Time the obstacle hold lingers after the last conflict. Differs per
    /// id so two mutually yielding vehicles do not release together.
    fn release_delay(&self) -> f64 {
        0.3 + 0.15 * (self.id() % 5) as f64
    }

    fn set_mode(&mut self, mode: CoordinationMode, now: f64) {
        if self.state.mode != mode {
            self.state.mode = mode;
            self.mode_entered = now;
        }
        self.state.active_coordinated_path = None;
    }

    fn receive(&mut self, inbox: &[Message], now: f64) {
        let me = self.id();
        for msg in inbox {
            match msg {
                Message::Initiation {
                    vehicle_id,
                    target_mode,
                } if *vehicle_id == me => {
                    self.set_mode(*target_mode, now);
                }
                Message::Termination { vehicle_id } if *vehicle_id == me => {
                    self.set_mode(CoordinationMode::Auto, now);
                }
                Message::CoordinatedPath { vehicle_id, trajectory }
                    if *vehicle_id == me && self.state.mode.is_coordinated() =>
                {
                    self.state.active_coordinated_path = Some(ActiveCoordinatedPath {
                        trajectory: trajectory.clone(),
                        received_at: now,
                    });
                }
                Message::FuturePath(fp) if fp.vehicle_id != me => {
                    self.foreign.insert(fp.vehicle_id, (fp.clone(), now));
                }
                _ => {}
            }
        }
        let timeout = self.cfg.foreign_path_timeout;
        self.foreign.retain(|_, (_, at)| now - *at <= timeout);
    }

    /// Drops a coordinated mode locally when the RSU has gone quiet.
    fn coordination_watchdog(&mut self, now: f64) {
        if !self.state.mode.is_coordinated() {
            return;
        }
        let last = self
            .state
            .active_coordinated_path
            .as_ref()
            .map_or(self.mode_entered, |c| c.received_at.max(self.mode_entered));
        if now - last > self.cfg.coordinated_timeout {
            self.set_mode(CoordinationMode::Auto, now);
        }
    }

    fn committed(&self) -> bool {
        self.state.center_offset(&self.geometry) >= 0.0 || self.geometry.in_zone(&self.state.position())
    }

    fn with_obstacles(&mut self, planned: &Trajectory, now: f64) -> Trajectory {
        if self.committed() {
            self.hold = None;
            return planned.clone();
        }
        let reachable = limit_acceleration(planned, self.state.v, self.limits.a_max);
        let own = match to_future_path(&reachable, 0, now, self.state.meta()) {
            Ok(fp) => fp,
            Err(_) => return planned.clone(),
        };
        let waived = self.waived;
        let foreign: Vec<FuturePath> = self
            .foreign
            .values()
            .map(|(fp, _)| fp)
            .filter(|fp| Some(fp.vehicle_id) != waived)
            .cloned()
            .collect();
        let offsets = planned.arc_offsets();
        if let Some((idx, other)) = first_obstacle_conflict(&own, &foreign, &self.params, now) {
            let touch = foreign
                .iter()
                .find(|f| f.vehicle_id == other)
                .and_then(|f| first_touch(&own, f, self.params.d_margin))
                .unwrap_or(idx)
                .min(idx);
            let at = offsets.get(touch).copied().unwrap_or(0.0);
            let braking = self.state.v * self.state.v / (2.0 * self.limits.b_max);
            // a stop that cannot be made before the conflict point is not attempted
            if self.hold.is_some() || at >= braking {
                let mut stop_s = self.state.s + at - self.cfg.d_safe;
                if let Some(h) = &self.hold {
                    stop_s = stop_s.min(h.stop_s);
                }
                self.hold = Some(ObstacleHold {
                    stop_s,
                    last_conflict: now,
                    other,
                });
            }
        } else if self
            .hold
            .as_ref()
            .is_some_and(|h| now - h.last_conflict > self.release_delay())
        {
            self.hold = None;
        }

        self.break_deadlock(now);
        match &self.hold {
            Some(h) => limit_to_stop(planned, h.stop_s - self.state.s, self.cfg.obstacle_decel),
            None => planned.clone(),
        }
    }

    fn break_deadlock(&mut self, now: f64) {
        let Some(h) = &self.hold else {
            self.stopped_since = None;
            return;
        };
        if self.state.v > V_EPS {
            self.stopped_since = None;
            return;
        }
        let since = *self.stopped_since.get_or_insert(now);
        let other_stopped = self
            .foreign
            .get(&h.other)
            .is_some_and(|(fp, _)| fp.current_speed <= V_EPS);
        if now - since > self.cfg.deadlock_wait && other_stopped && self.id() < h.other {
            self.waived = Some(h.other);
            self.hold = None;
            self.stopped_since = None;
        }
    }

    /// Processes the inbox, plans, emits messages on cadence and advances one
    /// controller step.
    pub fn tick(
        &mut self,
        inbox: &[Message],
        now: f64,
        dt: f64,
        perceived: &[VehicleState],
    ) -> Vec<(Destination, Message)> {
        self.receive(inbox, now);
        self.coordination_watchdog(now);

        let route_plan = plan_route_trajectory(&self.state, self.cfg.cruise_speed, &self.limits);
        let mut planned = route_plan.clone();
        if self.layers.intersection_rule {
            let hold = must_hold_at_stop_line(&self.state, perceived, &self.geometry, &self.cfg);
            if past_stop_line(&self.state, &self.geometry, &self.cfg) || (!hold && self.state.v <= V_EPS) {
                self.yielding = false;
            }
            self.yielding |= hold;
            if self.yielding {
                planned = stop_at_line(&planned, &self.state, &self.geometry, &self.cfg);
            }
        }
        let fresh = coordinated_is_fresh(&self.state, now, self.cfg.coordinated_fresh_for);
        if self.layers.share_paths && !fresh {
            planned = self.with_obstacles(&planned, now);
        } else {
            self.hold = None;
        }
        let active = select_active_plan(&self.state, &planned, now, self.cfg.coordinated_fresh_for);

        let mut out = Vec::new();
        let due = self.next_emit.is_none_or(|t| now + 1e-9 >= t);
        if due && self.layers.share_paths {
            self.next_emit = Some(self.next_emit.map_or(now, |t| t) + self.cfg.message_period);
            let reachable = limit_acceleration(&active, self.state.v, self.limits.a_max);
            if let Ok(fp) = to_future_path(&reachable, 0, now, self.state.meta()) {
                out.push((Destination::Broadcast, Message::FuturePath(fp)));
            }
            if self.state.mode.is_coordinated() {
                out.push((
                    Destination::Unicast(NodeId::Rsu),
                    Message::AutonomousPath {
                        vehicle_id: self.id(),
                        trajectory: route_plan,
                        t0: now,
                    },
                ));
            }
        }

        self.state = control_step(&self.state, &active, &self.limits, dt);
        if self.waived.is_some() && self.state.center_offset(&self.geometry) > self.geometry.exit_radius() {
            self.waived = None;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64) -> Arc<Route> {
        Arc::new(Route::new(vec![Point2D::new(-len / 2.0, 0.0), Point2D::new(len / 2.0, 0.0)]).unwrap())
    }

    fn state_on(route: Arc<Route>, s: f64, v: f64) -> VehicleState {
        VehicleState {
            v,
            ..VehicleState::new(1, route, s)
        }
    }

    #[test]
    fn route_plan_cruises_then_ramps() {
        let limits = ControlLimits::default();
        let st = state_on(straight(160.0), 0.0, 0.0);
        let vmax = 50.0 / 3.6;
        let t = plan_route_trajectory(&st, vmax, &limits);
        assert!(t.len() <= MAX_PATH_POINTS);
        let off = t.arc_offsets();
        assert!(off.windows(2).all(|w| w[1] - w[0] >= MIN_POINT_SPACING - 1e-9));
        let ramp = vmax * vmax / (2.0 * limits.b_max);
        assert!((ramp - 32.15).abs() < 0.01);
        for (p, o) in t.points.iter().zip(&off) {
            if 160.0 - o > ramp + 1e-6 {
                assert_eq!(p.speed, vmax);
            } else {
                assert!((p.speed - (2.0 * limits.b_max * (160.0 - o)).sqrt()).abs() < 1e-9);
            }
        }
        assert_eq!(t.points.last().unwrap().speed, 0.0);
    }

    #[test]
    fn route_plan_at_end_is_single_stop_point() {
        let st = state_on(straight(40.0), 40.0, 3.0);
        let t = plan_route_trajectory(&st, 10.0, &ControlLimits::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t.points[0].speed, 0.0);
    }

    #[test]
    fn short_route_stays_under_braking_bound() {
        let limits = ControlLimits::default();
        let st = state_on(straight(1.0), 0.0, 0.0);
        let t = plan_route_trajectory(&st, 13.889, &limits);
        for (p, o) in t.points.iter().zip(t.arc_offsets()) {
            assert!(p.speed <= (2.0 * limits.b_max * (1.0 - o)).sqrt() + 1e-12);
        }
    }

    #[test]
    fn controller_examples() {
        let limits = ControlLimits::default();
        let route = straight(200.0);
        let fast = Trajectory::new(vec![
            TrajectoryPoint::new(Point2D::new(-100.0, 0.0), 13.889),
            TrajectoryPoint::new(Point2D::new(100.0, 0.0), 13.889),
        ]);
        let next = control_step(&state_on(route.clone(), 0.0, 0.0), &fast, &limits, 0.1);
        assert!((next.v - 0.2).abs() < 1e-12);

        let stop = Trajectory::new(vec![
            TrajectoryPoint::new(Point2D::new(-100.0, 0.0), 0.0),
            TrajectoryPoint::new(Point2D::new(100.0, 0.0), 0.0),
        ]);
        let next = control_step(&state_on(route.clone(), 0.0, 10.0), &stop, &limits, 0.1);
        assert!((next.v - 9.7).abs() < 1e-12);

        let steady = Trajectory::new(vec![
            TrajectoryPoint::new(Point2D::new(-100.0, 0.0), 5.0),
            TrajectoryPoint::new(Point2D::new(100.0, 0.0), 5.0),
        ]);
        let next = control_step(&state_on(route, 10.0, 5.0), &steady, &limits, 0.1);
        assert_eq!(next.v, 5.0);
        assert!((next.s - 10.5).abs() < 1e-12);
    }

    #[test]
    fn perception_examples() {
        let g = IntersectionGeometry::default();
        let p = PerceptionConfig::default();
        let ra = Arc::new(Route::new(vec![Point2D::new(-100.0, 0.0), Point2D::new(100.0, 0.0)]).unwrap());
        let rb = Arc::new(Route::new(vec![Point2D::new(0.0, -100.0), Point2D::new(0.0, 100.0)]).unwrap());
        let at = |r: &Arc<Route>, id: u32, d: f64| VehicleState::new(id, r.clone(), 100.0 - d);

        let seen = perceive(&at(&ra, 1, 25.0), &[at(&rb, 2, 25.0)], &g, &p);
        assert_eq!(seen.len(), 1);
        assert!(perceive(&at(&ra, 1, 10.0), &[at(&rb, 2, 40.0)], &g, &p).is_empty());
        // 5 m apart on the same road far from the center
        let seen = perceive(&at(&ra, 1, 80.0), &[at(&ra, 2, 75.0)], &g, &p);
        assert_eq!(seen.len(), 1);
    }

    fn cross_roads() -> (Arc<Route>, Arc<Route>) {
        (
            Arc::new(Route::new(vec![Point2D::new(-100.0, 0.0), Point2D::new(100.0, 0.0)]).unwrap()),
            Arc::new(Route::new(vec![Point2D::new(0.0, -100.0), Point2D::new(0.0, 100.0)]).unwrap()),
        )
    }

    #[test]
    fn yields_to_vehicle_in_zone() {
        let g = IntersectionGeometry::default();
        let cfg = AgentConfig::default();
        let (ra, rb) = cross_roads();
        let me = VehicleState {
            v: 5.0,
            ..VehicleState::new(2, rb, 75.0)
        };
        let other = VehicleState {
            v: 5.0,
            ..VehicleState::new(1, ra, 98.0)
        };
        let planned = plan_route_trajectory(&me, 5.0, &ControlLimits::default());
        let ruled = apply_intersection_rule(&planned, &me, &[other], &g, &cfg);
        let off = ruled.arc_offsets();
        let stop_at = 100.0 - 12.0 - 75.0;
        for (p, o) in ruled.points.iter().zip(&off) {
            if *o >= stop_at {
                assert_eq!(p.speed, 0.0);
            }
        }
        assert!(ruled.points[0].speed > 0.0);
        assert_eq!(apply_intersection_rule(&planned, &me, &[], &g, &cfg), planned);
    }

    #[test]
    fn equal_eta_lower_id_goes() {
        let g = IntersectionGeometry::default();
        let cfg = AgentConfig::default();
        let (ra, rb) = cross_roads();
        let a = VehicleState::new(1, ra, 88.0);
        let b = VehicleState::new(2, rb, 88.0);
        let pa = plan_route_trajectory(&a, 5.0, &ControlLimits::default());
        let pb = plan_route_trajectory(&b, 5.0, &ControlLimits::default());
        assert_eq!(apply_intersection_rule(&pa, &a, std::slice::from_ref(&b), &g, &cfg), pa);
        assert_ne!(apply_intersection_rule(&pb, &b, &[a], &g, &cfg), pb);
    }

    #[test]
    fn committed_vehicle_ignores_rule() {
        let g = IntersectionGeometry::default();
        let cfg = AgentConfig::default();
        let (ra, rb) = cross_roads();
        let me = VehicleState {
            v: 5.0,
            ..VehicleState::new(2, rb, 95.0)
        };
        let other = VehicleState::new(1, ra, 100.0);
        let planned = plan_route_trajectory(&me, 5.0, &ControlLimits::default());
        assert_eq!(apply_intersection_rule(&planned, &me, &[other], &g, &cfg), planned);
    }

    fn fp_of(st: &VehicleState, t: &Trajectory, now: f64) -> FuturePath {
        to_future_path(t, 0, now, st.meta()).unwrap()
    }

    #[test]
    fn crossing_obstacle_inserts_stop_before_conflict() {
        let p = CoordinationParams::default();
        let limits = ControlLimits::default();
        let (ra, rb) = cross_roads();
        let a = VehicleState {
            v: 5.0,
            ..VehicleState::new(1, ra, 80.0)
        };
        let b = VehicleState {
            v: 5.0,
            ..VehicleState::new(2, rb, 80.0)
        };
        let ta = plan_route_trajectory(&a, 5.0, &limits);
        let tb = plan_route_trajectory(&b, 5.0, &limits);
        let (fa, fb) = (fp_of(&a, &ta, 0.0), fp_of(&b, &tb, 0.0));
        let out = apply_future_obstacles(&ta, &fa, std::slice::from_ref(&fb), &p, 0.0, 5.0, 1.0);

        // brute force: earliest own point within both thresholds
        let idx = (0..fa.points.len())
            .filter(|&i| {
                fb.points.iter().any(|q| {
                    q.pos.distance(&fa.points[i].pos) <= p.d_margin
                        && (q.t - fa.points[i].t).abs() <= p.tau_time
                        && q.t.min(fa.points[i].t) <= p.t_collision
                })
            })
            .min_by(|&x, &y| fa.points[x].t.total_cmp(&fa.points[y].t))
            .unwrap();
        let off = ta.arc_offsets();
        for (k, q) in out.points.iter().enumerate() {
            if off[k] >= off[idx] - 5.0 {
                assert_eq!(q.speed, 0.0);
            }
        }
        assert!(out.points[0].speed > 0.0);
    }

    #[test]
    fn late_obstacle_is_ignored() {
        let p = CoordinationParams::default();
        let limits = ControlLimits::default();
        let (ra, rb) = cross_roads();
        let a = VehicleState {
            v: 5.0,
            ..VehicleState::new(1, ra, 80.0)
        };
        let b = VehicleState {
            v: 5.0,
            ..VehicleState::new(2, rb, 80.0)
        };
        let ta = plan_route_trajectory(&a, 5.0, &limits);
        let tb = plan_route_trajectory(&b, 5.0, &limits);
        let fa = fp_of(&a, &ta, 0.0);
        let fb = fp_of(&b, &tb, 10.0);
        assert_eq!(apply_future_obstacles(&ta, &fa, &[fb], &p, 0.0, 5.0, 1.0), ta);
        assert_eq!(apply_future_obstacles(&ta, &fa, &[], &p, 0.0, 5.0, 1.0), ta);
    }

    #[test]
    fn active_plan_selection() {
        let route = straight(100.0);
        let planned = Trajectory::new(vec![
            TrajectoryPoint::new(Point2D::new(-50.0, 0.0), 5.0),
            TrajectoryPoint::new(Point2D::new(50.0, 0.0), 5.0),
        ]);
        let coord = Trajectory::new(vec![
            TrajectoryPoint::new(Point2D::new(-50.0, 0.0), 13.0),
            TrajectoryPoint::new(Point2D::new(50.0, 0.0), 13.0),
        ]);
        let mut st = state_on(route, 0.0, 5.0);
        st.mode = CoordinationMode::CFast;
        st.active_coordinated_path = Some(ActiveCoordinatedPath {
            trajectory: coord.clone(),
            received_at: 1.0,
        });
        assert_eq!(select_active_plan(&st, &planned, 1.2, 0.5), coord);
        st.mode = CoordinationMode::CSlow;
        assert_eq!(select_active_plan(&st, &planned, 1.6, 0.5), planned);
        st.mode = CoordinationMode::Auto;
        assert_eq!(select_active_plan(&st, &planned, 1.2, 0.5), planned);
    }

    fn agent(layers: PlanningLayers) -> VehicleAgent {
        let (ra, _) = cross_roads();
        VehicleAgent::new(
            VehicleState::new(1, ra, 20.0),
            180.0,
            AgentConfig::default(),
            ControlLimits::default(),
            CoordinationParams::default(),
            IntersectionGeometry::default(),
            layers,
        )
    }

    const SHARING: PlanningLayers = PlanningLayers {
        intersection_rule: false,
        share_paths: true,
    };

    #[test]
    fn initiation_switches_mode_and_starts_unicast() {
        let mut ag = agent(SHARING);
        let out = ag.tick(&[], 0.0, 0.02, &[]);
        assert!(matches!(
            out.as_slice(),
            [(Destination::Broadcast, Message::FuturePath(_))]
        ));
        let init = Message::Initiation {
            vehicle_id: 1,
            target_mode: CoordinationMode::CSlow,
        };
        let out = ag.tick(&[init], 0.02, 0.02, &[]);
        assert_eq!(ag.state.mode, CoordinationMode::CSlow);
        assert!(out.is_empty());
        let mut sent = Vec::new();
        for k in 2..=5 {
            sent.extend(ag.tick(&[], k as f64 * 0.02, 0.02, &[]));
        }
        assert!(sent
            .iter()
            .any(|(d, m)| *d == Destination::Unicast(NodeId::Rsu) && matches!(m, Message::AutonomousPath { .. })));
    }

    #[test]
    fn termination_clears_coordination() {
        let mut ag = agent(SHARING);
        ag.tick(
            &[Message::Initiation {
                vehicle_id: 1,
                target_mode: CoordinationMode::CFast,
            }],
            0.0,
            0.02,
            &[],
        );
        let coord = plan_route_trajectory(&ag.state, 13.0, &ControlLimits::default());
        ag.tick(
            &[Message::CoordinatedPath {
                vehicle_id: 1,
                trajectory: coord,
            }],
            0.02,
            0.02,
            &[],
        );
        assert!(ag.state.active_coordinated_path.is_some());
        ag.tick(&[Message::Termination { vehicle_id: 1 }], 0.04, 0.02, &[]);
        assert_eq!(ag.state.mode, CoordinationMode::Auto);
        assert!(ag.state.active_coordinated_path.is_none());
    }

    #[test]
    fn stand_alone_is_silent() {
        let mut ag = agent(PlanningLayers {
            intersection_rule: true,
            share_paths: false,
        });
        let s0 = ag.state.s;
        for k in 0..20 {
            assert!(ag.tick(&[], k as f64 * 0.02, 0.02, &[]).is_empty());
        }
        assert!(ag.state.s > s0);
    }

    #[test]
    fn broadcast_every_period() {
        let mut ag = agent(SHARING);
        let mut times = Vec::new();
        for k in 0..100 {
            let now = k as f64 * 0.02;
            if !ag.tick(&[], now, 0.02, &[]).is_empty() {
                times.push(now);
            }
        }
        assert_eq!(times.len(), 20);
        assert!(times.windows(2).all(|w| (w[1] - w[0] - 0.1).abs() < 0.021));
    }

    #[test]
    fn silent_rsu_drops_coordinated_mode() {
        let mut ag = agent(SHARING);
        ag.tick(
            &[Message::Initiation {
                vehicle_id: 1,
                target_mode: CoordinationMode::CSlow,
            }],
            0.0,
            0.02,
            &[],
        );
        for k in 1..=60 {
            ag.tick(&[], k as f64 * 0.02, 0.02, &[]);
        }
        assert_eq!(ag.state.mode, CoordinationMode::Auto);
    }

    #[test]
    fn messages_for_others_are_ignored() {
        let mut ag = agent(SHARING);
        ag.tick(
            &[Message::Initiation {
                vehicle_id: 9,
                target_mode: CoordinationMode::CSlow,
            }],
            0.0,
            0.02,
            &[],
        );
        assert_eq!(ag.state.mode, CoordinationMode::Auto);
    }
}
