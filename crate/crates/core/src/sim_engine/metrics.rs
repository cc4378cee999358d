use serde::Serialize;

use crate::coordinator::{CoordinationMode, ModeEvent};
use crate::netsim::ChannelStats;

/// First time the arc position reaches `destination_s`, interpolated
/// linearly between samples. `trace` holds `(time, s)` pairs in time order.
pub fn passing_time(trace: &[(f64, f64)], destination_s: f64) -> Option<f64> {
    let first = trace.first()?;
    if first.1 >= destination_s {
        return Some(first.0);
    }
    trace.windows(2).find_map(|w| {
        let ((t0, s0), (t1, s1)) = (w[0], w[1]);
        (s1 >= destination_s && s1 > s0).then(|| t0 + (t1 - t0) * (destination_s - s0) / (s1 - s0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    /// Simulation time, seconds.
    pub t: f64,
    /// Arc distance past the center along the route; negative on approach.
    pub signed_dist: f64,
    pub speed: f64,
    pub mode: CoordinationMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleMetrics {
    pub vehicle_id: u32,
    pub name: String,
    pub launch_time: f64,
    /// From launch to reaching the destination.
    pub passing_time: Option<f64>,
    /// Simulation time at which the vehicle passed the center.
    pub center_cross_time: Option<f64>,
    /// Lowest speed while within 30 m of the center.
    pub min_speed_near_zone: Option<f64>,
    /// Distance before the zone boundary where the vehicle first came to rest
    /// on its approach.
    pub stop_gap_to_zone: Option<f64>,
    /// Distance to the center at which the vehicle first slowed down on its
    /// approach.
    pub first_speed_drop: Option<f64>,
    pub trace: Vec<TraceSample>,
}

impl VehicleMetrics {
    pub fn finished(&self) -> bool {
        self.passing_time.is_some()
    }

    pub fn stopped_near_zone(&self) -> bool {
        self.min_speed_near_zone.is_some_and(|v| v <= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlEvent {
    pub t: f64,
    pub vehicle_id: u32,
    /// `None` for a Termination.
    pub target: Option<CoordinationMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub sent: usize,
    pub dropped: usize,
    pub delivered: usize,
}

impl From<&ChannelStats> for ChannelSummary {
    fn from(s: &ChannelStats) -> Self {
        Self {
            sent: s.sent,
            dropped: s.dropped,
            delivered: s.delivered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub trial_seed: u64,
    pub vehicles: Vec<VehicleMetrics>,
    /// Vehicle that crossed the center first.
    pub first_pass: Option<u32>,
    pub mode_log: Vec<ModeEvent>,
    /// Initiation and Termination messages sent by the RSU.
    pub control_messages: Vec<ControlEvent>,
    /// Steps during which two vehicles inside the zone were closer than the
    /// safety margin.
    pub safety_violations: usize,
    pub min_zone_separation: Option<f64>,
    pub channel: ChannelSummary,
    pub all_finished: bool,
    pub end_time: f64,
}

impl TrialMetrics {
    pub fn vehicle(&self, id: u32) -> Option<&VehicleMetrics> {
        self.vehicles.iter().find(|v| v.vehicle_id == id)
    }

    pub fn mean_passing_time(&self) -> Option<f64> {
        let times: Vec<f64> = self.vehicles.iter().filter_map(|v| v.passing_time).collect();
        (!times.is_empty() && times.len() == self.vehicles.len())
            .then(|| times.iter().sum::<f64>() / times.len() as f64)
    }
}
