//! Bandwidth-capped link in virtual time.
//!
//! Messages on one direction of a link are serialized: a message starts
//! transmitting once the previous one has left, takes `size * 8 / bandwidth`
//! seconds on the wire and arrives `latency` seconds after its last bit.
//! There is no loss and no jitter.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkModel {
    /// Bits per second.
    pub bandwidth: f64,
    /// One-way latency, seconds.
    pub latency: f64,
    /// When false, the downlink uses `downlink_bandwidth` instead of `bandwidth`.
    pub symmetric: bool,
    pub downlink_bandwidth: Option<f64>,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self { bandwidth: 5_000_000.0, latency: 0.05, symmetric: true, downlink_bandwidth: None }
    }
}

impl LinkModel {
    pub fn new(bandwidth: f64, latency: f64) -> Self {
        Self { bandwidth, latency, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err("link bandwidth must be positive");
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err("link latency must be non-negative");
        }
        if let Some(d) = self.downlink_bandwidth {
            if !(d > 0.0 && d.is_finite()) {
                return Err("downlink bandwidth must be positive");
            }
        }
        Ok(())
    }

    pub fn downlink(&self) -> f64 {
        match (self.symmetric, self.downlink_bandwidth) {
            (false, Some(bw)) => bw,
            _ => self.bandwidth,
        }
    }
}

/// One direction of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    bandwidth: f64,
    latency: f64,
    busy_until: f64,
}

impl Channel {
    pub fn new(bandwidth: f64, latency: f64) -> Self {
        Self { bandwidth, latency, busy_until: f64::NEG_INFINITY }
    }

    /// Queues `size` bytes handed over at `send_time`; returns the arrival time.
    pub fn transmit(&mut self, size: usize, send_time: f64) -> f64 {
        let start = send_time.max(self.busy_until);
        self.busy_until = start + size as f64 * 8.0 / self.bandwidth;
        self.busy_until + self.latency
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub up: Channel,
    pub down: Channel,
}

impl Link {
    pub fn new(model: &LinkModel) -> Self {
        Self { up: Channel::new(model.bandwidth, model.latency), down: Channel::new(model.downlink(), model.latency) }
    }
}

/// Arrival time of a single message on an idle link.
pub fn transmit(link: &LinkModel, size: usize, send_time: f64) -> f64 {
    Channel::new(link.bandwidth, link.latency).transmit(size, send_time)
}
