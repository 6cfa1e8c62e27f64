//! The per-run output record shared by the classical and near-memory models.

/// Relative energy cost per byte on each traffic channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWeights {
    pub host: f64,
    pub fabric: f64,
    pub intra_node: f64,
}

impl Default for ChannelWeights {
    fn default() -> Self {
        Self { host: 1.0, fabric: 0.1, intra_node: 0.01 }
    }
}

/// Byte counts per channel plus response time and result size.
///
/// `fabric_payload_bytes` counts every message once end to end, while
/// `fabric_link_bytes` counts it once per link crossed, so the latter is
/// never smaller. The energy proxy weights link bytes, since energy follows
/// the distance data travels.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrafficReport {
    pub host_ram_bytes: u64,
    pub fabric_payload_bytes: u64,
    pub fabric_link_bytes: u64,
    pub intra_node_bytes: u64,
    pub response_ms: f64,
    pub match_count: u64,
    pub energy_proxy: f64,
}

impl TrafficReport {
    pub fn energy(host: u64, fabric_link: u64, intra: u64, w: &ChannelWeights) -> f64 {
        host as f64 * w.host + fabric_link as f64 * w.fabric + intra as f64 * w.intra_node
    }

    /// Recomputes `energy_proxy` from the byte counters.
    pub fn with_energy(mut self, w: &ChannelWeights) -> Self {
        self.energy_proxy =
            Self::energy(self.host_ram_bytes, self.fabric_link_bytes, self.intra_node_bytes, w);
        self
    }

    /// Near-memory bytes that never cross to a host: fabric payload plus
    /// intra-node reads.
    pub fn near_memory_bytes(&self) -> u64 {
        self.fabric_payload_bytes + self.intra_node_bytes
    }
}
