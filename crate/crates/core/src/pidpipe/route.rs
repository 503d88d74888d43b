use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RouteStats {
    pub offered: u64,
    pub emitted: u64,
    /// Values superseded by a later one before they could be sent.
    pub dropped: u64,
}

/// Enforces a minimum spacing between device writes. A value arriving too
/// soon is parked; a later arrival replaces it (last value wins).
#[derive(Debug, Clone, PartialEq)]
pub struct RouteLimiter {
    min_interval_s: f64,
    last_emit_s: Option<f64>,
    pending: Option<f64>,
    stats: RouteStats,
}

impl RouteLimiter {
    pub fn new(rate_cap_hz: f64) -> Self {
        Self {
            min_interval_s: 1.0 / rate_cap_hz,
            last_emit_s: None,
            pending: None,
            stats: RouteStats::default(),
        }
    }

    pub fn stats(&self) -> RouteStats {
        self.stats
    }

    fn ready(&self, t_s: f64) -> bool {
        match self.last_emit_s {
            None => true,
            // Tolerance absorbs rounding in frame timestamps.
            Some(last) => t_s - last >= self.min_interval_s * (1.0 - 1e-9),
        }
    }

    /// Offers a value at `t_s`; returns it if it may be written now.
    pub fn offer(&mut self, t_s: f64, value: f64) -> Option<(f64, f64)> {
        self.stats.offered += 1;
        if self.pending.take().is_some() {
            self.stats.dropped += 1;
        }
        if self.ready(t_s) {
            self.last_emit_s = Some(t_s);
            self.stats.emitted += 1;
            Some((t_s, value))
        } else {
            self.pending = Some(value);
            None
        }
    }

    /// Writes any parked value at the earliest time the cap allows.
    pub fn finish(&mut self) -> Option<(f64, f64)> {
        let value = self.pending.take()?;
        let t = self.last_emit_s.map_or(0.0, |l| l + self.min_interval_s);
        self.last_emit_s = Some(t);
        self.stats.emitted += 1;
        Some((t, value))
    }
}
