use serde::Serialize;

use super::binary::{FUTURE_POINT_LEN, HEADER_LEN};

/// Largest UDP payload assumed for a single path message.
pub const MAX_UDP_PAYLOAD: usize = 1460;

/// Binary size of a future path with `points` points.
pub fn future_path_packet_bytes(points: usize) -> usize {
    HEADER_LEN + FUTURE_POINT_LEN * points
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub packet_bytes: usize,
    pub rate_hz: f64,
    pub streams_per_car: u32,
    pub per_stream_bps: f64,
    pub per_car_bps: f64,
    pub media_rate_bps: f64,
    pub capacity_cars: u64,
}

impl BandwidthReport {
    /// Rates in kbit/s (1 kbit = 1000 bit), truncated.
    pub fn per_stream_kbps(&self) -> u64 {
        (self.per_stream_bps / 1000.0).floor() as u64
    }

    pub fn per_car_kbps(&self) -> u64 {
        (self.per_car_bps / 1000.0).floor() as u64
    }
}

/// Network load of periodic path streams and how many cars fit on a medium.
pub fn bandwidth_report(
    packet_bytes: usize,
    rate_hz: f64,
    streams_per_car: u32,
    media_rate_bps: f64,
) -> BandwidthReport {
    let per_stream_bps = packet_bytes as f64 * 8.0 * rate_hz;
    let per_car_bps = per_stream_bps * streams_per_car as f64;
    let capacity_cars = if per_car_bps > 0.0 {
        (media_rate_bps / per_car_bps).floor() as u64
    } else {
        0
    };
    BandwidthReport {
        packet_bytes,
        rate_hz,
        streams_per_car,
        per_stream_bps,
        per_car_bps,
        media_rate_bps,
        capacity_cars,
    }
}
