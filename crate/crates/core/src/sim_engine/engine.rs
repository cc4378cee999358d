use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coordinator::Coordinator;
use crate::netsim::{Channel, ChannelConfig, Destination, Message, NodeId};
use crate::path_model::Route;
use crate::vehicle_agent::{perceive, VehicleAgent, VehicleState};

use super::metrics::{passing_time, ControlEvent, TraceSample, TrialMetrics, VehicleMetrics};
use super::scenario::ScenarioConfig;
use super::seeds::mix_seed;

/// Speeds within this distance of the center count as "near the zone".
pub const NEAR_ZONE_RADIUS: f64 = 30.0;

/// Per-vehicle bookkeeping while the trial runs.
struct Tracker {
    metrics: VehicleMetrics,
    launch_step: u64,
    arc: Vec<(f64, f64)>,
    destination_s: f64,
    peak_speed: f64,
    done: bool,
}

impl Tracker {
    fn record(&mut self, agent: &VehicleAgent, cfg: &ScenarioConfig, t: f64) {
        let st = &agent.state;
        let signed = st.center_offset(&cfg.geometry);
        let center_dist = st.center_distance(&cfg.geometry);
        let m = &mut self.metrics;

        if let Some(prev) = m.trace.last() {
            if prev.signed_dist < 0.0 && signed >= 0.0 && m.center_cross_time.is_none() {
                let f = -prev.signed_dist / (signed - prev.signed_dist);
                m.center_cross_time = Some(prev.t + f * (t - prev.t));
            }
        }
        if center_dist <= NEAR_ZONE_RADIUS {
            m.min_speed_near_zone = Some(m.min_speed_near_zone.map_or(st.v, |v| v.min(st.v)));
        }
        if signed < 0.0 {
            if m.first_speed_drop.is_none() && st.v < self.peak_speed - 0.1 {
                m.first_speed_drop = Some(-signed);
            }
            if m.stop_gap_to_zone.is_none() && self.peak_speed > 0.0 && st.v <= 0.0 && center_dist <= NEAR_ZONE_RADIUS {
                m.stop_gap_to_zone = Some(center_dist - cfg.geometry.zone_radius);
            }
        }
        self.peak_speed = self.peak_speed.max(st.v);
        m.trace.push(TraceSample {
            t,
            signed_dist: signed,
            speed: st.v,
            mode: st.mode,
        });
        self.arc.push((t - m.launch_time, st.s));
        if st.s >= self.destination_s && !self.done {
            self.done = true;
            m.passing_time = passing_time(&self.arc, self.destination_s);
        }
    }
}

/// Runs one trial to completion or to the horizon.
///
/// # Panics
/// If `cfg` does not pass [`ScenarioConfig::validate`].
pub fn run_trial(cfg: &ScenarioConfig, trial_seed: u64) -> TrialMetrics {
    cfg.validate().expect("run_trial needs a valid scenario");
    let dt = cfg.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let layers = cfg.mode.layers();

    let mut agents: BTreeMap<u32, VehicleAgent> = BTreeMap::new();
    let mut trackers: BTreeMap<u32, Tracker> = BTreeMap::new();
    for spec in &cfg.vehicles {
        let jitter = if cfg.launch_jitter_max > 0.0 {
            rng.gen_range(0.0..=cfg.launch_jitter_max)
        } else {
            0.0
        };
        let launch_step = (jitter / dt - 1e-9).ceil().max(0.0) as u64;
        let route = Arc::new(Route::new(spec.route.clone()).expect("validated route"));
        let state = VehicleState::new(spec.id, route, spec.start_s);
        agents.insert(
            spec.id,
            VehicleAgent::new(
                state,
                spec.destination_s,
                cfg.agent,
                cfg.limits,
                cfg.params,
                cfg.geometry,
                layers,
            ),
        );
        trackers.insert(
            spec.id,
            Tracker {
                metrics: VehicleMetrics {
                    vehicle_id: spec.id,
                    name: spec.name.clone(),
                    launch_time: launch_step as f64 * dt,
                    passing_time: None,
                    center_cross_time: None,
                    min_speed_near_zone: None,
                    stop_gap_to_zone: None,
                    first_speed_drop: None,
                    trace: Vec::new(),
                },
                launch_step,
                arc: Vec::new(),
                destination_s: spec.destination_s,
                peak_speed: 0.0,
                done: false,
            },
        );
    }

    let mut channel = Channel::new(ChannelConfig {
        seed: mix_seed(cfg.channel.seed, trial_seed),
        ..cfg.channel
    });
    let mut rsu = cfg.mode.has_rsu().then(|| {
        channel.register(NodeId::Rsu);
        Coordinator::new(cfg.params, cfg.geometry).with_assumed_accel(cfg.limits.a_max)
    });

    let mut control_messages = Vec::new();
    let mut safety_violations = 0;
    let mut min_zone_separation: Option<f64> = None;
    let mut active: Vec<u32> = Vec::new();
    let steps = (cfg.horizon / dt).round() as u64;
    let mut end_time = 0.0;

    for k in 0..steps {
        let now = k as f64 * dt;

        let mut rsu_inbox = Vec::new();
        let mut inboxes: BTreeMap<u32, Vec<Message>> = BTreeMap::new();
        for env in channel.poll(now) {
            match env.dst {
                NodeId::Rsu => rsu_inbox.push(env.payload),
                NodeId::Vehicle(id) => inboxes.entry(id).or_default().push(env.payload),
            }
        }

        if let Some(rsu) = rsu.as_mut() {
            let mut replies = Vec::new();
            for msg in &rsu_inbox {
                replies.extend(rsu.handle_message(msg, now));
            }
            replies.extend(rsu.tick(now));
            for reply in replies {
                let target = match &reply {
                    Message::Initiation { target_mode, .. } => Some(Some(*target_mode)),
                    Message::Termination { .. } => Some(None),
                    _ => None,
                };
                if let Some(target) = target {
                    control_messages.push(ControlEvent {
                        t: now,
                        vehicle_id: reply.vehicle_id(),
                        target,
                    });
                }
                let dst = Destination::Unicast(NodeId::Vehicle(reply.vehicle_id()));
                channel.send(NodeId::Rsu, dst, reply, now);
            }
        }

        for (id, tr) in trackers.iter_mut() {
            if tr.launch_step == k {
                active.push(*id);
                channel.register(NodeId::Vehicle(*id));
                tr.record(&agents[id], cfg, now);
            }
        }
        active.sort_unstable();

        let snapshot: Vec<VehicleState> = active.iter().map(|id| agents[id].state.clone()).collect();
        for id in &active {
            let agent = agents.get_mut(id).expect("active agent");
            let perceived = if layers.intersection_rule {
                perceive(&agent.state, &snapshot, &cfg.geometry, &cfg.perception)
            } else {
                Vec::new()
            };
            let inbox = inboxes.remove(id).unwrap_or_default();
            for (dst, msg) in agent.tick(&inbox, now, dt, &perceived) {
                channel.send(NodeId::Vehicle(*id), dst, msg, now);
            }
        }

        let t_next = now + dt;
        for id in &active {
            trackers.get_mut(id).expect("tracker").record(&agents[id], cfg, t_next);
        }

        for (i, a) in active.iter().enumerate() {
            for b in &active[i + 1..] {
                let (pa, pb) = (agents[a].state.position(), agents[b].state.position());
                if cfg.geometry.in_zone(&pa) && cfg.geometry.in_zone(&pb) {
                    let d = pa.distance(&pb);
                    min_zone_separation = Some(min_zone_separation.map_or(d, |m| m.min(d)));
                    if d < cfg.params.d_margin {
                        safety_violations += 1;
                    }
                }
            }
        }

        active.retain(|id| !trackers[id].done);
        end_time = t_next;
        if trackers.values().all(|t| t.done) {
            break;
        }
    }

    let vehicles: Vec<VehicleMetrics> = trackers.into_values().map(|t| t.metrics).collect();
    let first_pass = vehicles
        .iter()
        .filter_map(|v| v.center_cross_time.map(|t| (t, v.vehicle_id)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id);
    TrialMetrics {
        trial_seed,
        all_finished: vehicles.iter().all(|v| v.finished()),
        first_pass,
        mode_log: rsu.as_ref().map(|r| r.mode_log().to_vec()).unwrap_or_default(),
        control_messages,
        safety_violations,
        min_zone_separation,
        channel: channel.stats().into(),
        end_time,
        vehicles,
    }
}
