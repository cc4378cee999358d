use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{binary::encoded_len, Message};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Seconds.
    pub latency_mean: f64,
    /// Half-width of the uniform latency jitter, seconds.
    pub latency_jitter: f64,
    pub loss_probability: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            latency_mean: 0.005,
            latency_jitter: 0.002,
            loss_probability: 0.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.loss_probability)
            && self.latency_mean >= 0.0
            && self.latency_jitter >= 0.0
            && self.latency_mean.is_finite()
            && self.latency_jitter.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    Rsu,
    Vehicle(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    Broadcast,
    Unicast(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub src: NodeId,
    pub dst: NodeId,
    pub send_time: f64,
    pub deliver_time: f64,
    pub payload: Message,
    pub wire_bytes: usize,
    seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelStats {
    pub sent: usize,
    pub dropped: usize,
    pub delivered: usize,
    /// Wire bytes handed to the channel per sender (broadcasts counted once).
    pub bytes_by_sender: BTreeMap<NodeId, usize>,
}

/// In-memory broadcast/unicast medium with seeded loss and latency.
#[derive(Debug, Clone)]
pub struct Channel {
    cfg: ChannelConfig,
    rng: ChaCha8Rng,
    nodes: BTreeSet<NodeId>,
    pending: Vec<Envelope>,
    next_seq: u64,
    stats: ChannelStats,
}

impl Channel {
    pub fn new(cfg: ChannelConfig) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            nodes: BTreeSet::new(),
            pending: Vec::new(),
            next_seq: 0,
            stats: ChannelStats::default(),
        }
    }

    pub fn register(&mut self, node: NodeId) {
        self.nodes.insert(node);
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    pub fn send(&mut self, src: NodeId, dst: Destination, payload: Message, now: f64) {
        let wire_bytes = encoded_len(&payload);
        *self.stats.bytes_by_sender.entry(src).or_default() += wire_bytes;
        let receivers: Vec<NodeId> = match dst {
            Destination::Broadcast => self.nodes.iter().copied().filter(|&n| n != src).collect(),
            Destination::Unicast(n) => vec![n],
        };
        for dst in receivers {
            self.stats.sent += 1;
            // two draws per envelope regardless of outcome keep the stream aligned
            let loss_draw: f64 = self.rng.gen();
            let jitter_draw: f64 = self.rng.gen_range(-1.0..=1.0);
            if loss_draw < self.cfg.loss_probability {
                self.stats.dropped += 1;
                continue;
            }
            let latency = (self.cfg.latency_mean + jitter_draw * self.cfg.latency_jitter).max(0.0);
            self.pending.push(Envelope {
                src,
                dst,
                send_time: now,
                deliver_time: now + latency,
                payload: payload.clone(),
                wire_bytes,
                seq: self.next_seq,
            });
            self.next_seq += 1;
        }
    }

    /// Envelopes due at `now`, ordered by delivery time then send order.
    pub fn poll(&mut self, now: f64) -> Vec<Envelope> {
        let (mut due, rest): (Vec<Envelope>, Vec<Envelope>) = std::mem::take(&mut self.pending)
            .into_iter()
            .partition(|e| e.deliver_time <= now);
        self.pending = rest;
        due.sort_by(|a, b| a.deliver_time.total_cmp(&b.deliver_time).then(a.seq.cmp(&b.seq)));
        self.stats.delivered += due.len();
        due
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(id: u32) -> Message {
        Message::Termination { vehicle_id: id }
    }

    fn three_nodes(cfg: ChannelConfig) -> Channel {
        let mut c = Channel::new(cfg);
        c.register(NodeId::Rsu);
        c.register(NodeId::Vehicle(1));
        c.register(NodeId::Vehicle(2));
        c
    }

    #[test]
    fn lossless_zero_latency_delivers_on_next_poll() {
        let cfg = ChannelConfig {
            latency_mean: 0.0,
            latency_jitter: 0.0,
            ..Default::default()
        };
        let mut c = three_nodes(cfg);
        c.send(NodeId::Vehicle(1), Destination::Unicast(NodeId::Rsu), msg(1), 0.0);
        let got = c.poll(0.0);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].dst, NodeId::Rsu);
        assert_eq!(got[0].wire_bytes, 15);
        assert!(c.poll(1.0).is_empty());
    }

    #[test]
    fn total_loss_delivers_nothing() {
        let cfg = ChannelConfig {
            loss_probability: 1.0,
            ..Default::default()
        };
        let mut c = three_nodes(cfg);
        for k in 0..50 {
            c.send(NodeId::Vehicle(1), Destination::Broadcast, msg(1), k as f64);
        }
        assert!(c.poll(1e9).is_empty());
        assert_eq!(c.stats().dropped, 100);
    }

    #[test]
    fn broadcast_fans_out_to_everyone_but_the_sender() {
        let mut c = three_nodes(ChannelConfig::default());
        c.send(NodeId::Vehicle(2), Destination::Broadcast, msg(2), 0.0);
        let got = c.poll(1.0);
        let dsts: Vec<NodeId> = got.iter().map(|e| e.dst).collect();
        assert_eq!(dsts.len(), 2);
        assert!(dsts.contains(&NodeId::Rsu) && dsts.contains(&NodeId::Vehicle(1)));
        assert!(got.iter().all(|e| e.deliver_time >= e.send_time));
    }

    #[test]
    fn seeded_schedule_is_reproducible() {
        let cfg = ChannelConfig {
            loss_probability: 0.3,
            latency_jitter: 0.01,
            seed: 99,
            ..Default::default()
        };
        let run = || {
            let mut c = three_nodes(cfg);
            let mut out = Vec::new();
            for k in 0..100 {
                let t = k as f64 * 0.02;
                c.send(NodeId::Vehicle(1), Destination::Broadcast, msg(k), t);
                out.extend(
                    c.poll(t)
                        .into_iter()
                        .map(|e| (e.dst, e.deliver_time, e.payload.vehicle_id())),
                );
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn no_reordering_without_jitter() {
        let cfg = ChannelConfig {
            latency_mean: 0.03,
            latency_jitter: 0.0,
            ..Default::default()
        };
        let mut c = three_nodes(cfg);
        for k in 0..20 {
            c.send(
                NodeId::Vehicle(1),
                Destination::Unicast(NodeId::Rsu),
                msg(k),
                k as f64 * 0.01,
            );
        }
        let ids: Vec<u32> = c.poll(10.0).iter().map(|e| e.payload.vehicle_id()).collect();
        assert_eq!(ids, (0..20).collect::<Vec<_>>());
    }
}
