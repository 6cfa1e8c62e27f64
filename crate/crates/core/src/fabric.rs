//! Fixed-fanout generalized fat tree between memory nodes, the partitioned
//! global address space laid over those nodes, and per-message accounting.
//!
//! Leaves are numbered so that leaf `v` hangs below the level-`L` switch
//! `v / fanout^L`. Two leaves meet at the lowest level where those switch
//! indices agree, and a message climbs to that level and back down.

use crate::error::{Error, Result};
use crate::traffic::ChannelWeights;

pub type NodeId = u32;

/// Whether scans and shuffles run as one event per batch or one event per
/// row/digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Batched,
    PerRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnmsConfig {
    pub node_count: u32,
    pub ffgt_fanout: u32,
    pub ffgt_levels: u32,
    /// Threadlets a node executes simultaneously.
    pub threads_per_node: u32,
    /// Time for one local row compare, hash-table access, or index-node
    /// visit.
    pub per_row_scan_ns: f64,
    pub per_hop_ns: f64,
    pub node_mem_bytes: u64,
    pub row_ref_bytes: u64,
    pub channel_energy_weights: ChannelWeights,
    /// Seed of the key hash that assigns keys to owner nodes.
    pub hash_seed: u64,
    pub exec_mode: ExecMode,
    /// Maximum events one engine run may process.
    pub step_budget: u64,
}

impl Default for MnmsConfig {
    fn default() -> Self {
        Self {
            node_count: 8_000,
            ffgt_fanout: 20,
            ffgt_levels: 3,
            threads_per_node: 1,
            // 0.04 ms over 3907 rows on the busiest node
            per_row_scan_ns: 10.24,
            per_hop_ns: 50.0,
            // one terabyte across the nodes
            node_mem_bytes: 125_000_000,
            row_ref_bytes: 8,
            channel_energy_weights: ChannelWeights::default(),
            hash_seed: 0x4D4E_4D53,
            exec_mode: ExecMode::Batched,
            step_budget: 1_000_000_000,
        }
    }
}

impl MnmsConfig {
    /// A small machine for desk-scale runs.
    pub fn desk(node_count: u32, fanout: u32, levels: u32) -> Self {
        Self { node_count, ffgt_fanout: fanout, ffgt_levels: levels, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::Config("mnms.node_count must be positive".into()));
        }
        if self.threads_per_node == 0 {
            return Err(Error::Config("mnms.threads_per_node must be at least 1".into()));
        }
        if !(self.per_row_scan_ns > 0.0) || !(self.per_hop_ns >= 0.0) {
            return Err(Error::Config("mnms.per_row_scan_ns must be positive and mnms.per_hop_ns non-negative".into()));
        }
        if self.node_mem_bytes == 0 || self.row_ref_bytes == 0 {
            return Err(Error::Config("mnms.node_mem_bytes and mnms.row_ref_bytes must be positive".into()));
        }
        build_ffgt(self.ffgt_fanout, self.ffgt_levels, self.node_count).map(|_| ())
    }

    pub fn topology(&self) -> Result<FabricTopology> {
        build_ffgt(self.ffgt_fanout, self.ffgt_levels, self.node_count)
    }

    pub fn address_limit(&self) -> u64 {
        self.node_count as u64 * self.node_mem_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FabricTopology {
    fanout: u32,
    levels: u32,
    leaf_count: u32,
}

pub fn build_ffgt(fanout: u32, levels: u32, leaf_count: u32) -> Result<FabricTopology> {
    if fanout < 2 {
        return Err(Error::InvalidTopology(format!("fanout must be at least 2, got {fanout}")));
    }
    if levels == 0 {
        return Err(Error::InvalidTopology("a fat tree needs at least one switch level".into()));
    }
    if leaf_count == 0 {
        return Err(Error::InvalidTopology("a fat tree needs at least one leaf".into()));
    }
    let capacity = (fanout as u128).checked_pow(levels).unwrap_or(u128::MAX);
    if leaf_count as u128 > capacity {
        return Err(Error::Capacity { fanout, levels, leaf_count });
    }
    Ok(FabricTopology { fanout, levels, leaf_count })
}

impl FabricTopology {
    pub fn fanout(&self) -> u32 {
        self.fanout
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn leaf_count(&self) -> u32 {
        self.leaf_count
    }

    fn check(&self, node: NodeId) -> Result<()> {
        if node >= self.leaf_count {
            return Err(Error::NodeIndex { node, node_count: self.leaf_count });
        }
        Ok(())
    }

    fn block(&self, level: u32) -> u64 {
        (self.fanout as u64).saturating_pow(level)
    }

    /// Level of the lowest common switch of two distinct leaves.
    fn meet_level(&self, a: NodeId, b: NodeId) -> u32 {
        (1..=self.levels)
            .find(|&l| a as u64 / self.block(l) == b as u64 / self.block(l))
            .unwrap_or(self.levels)
    }

    pub fn hops(&self, a: NodeId, b: NodeId) -> Result<u32> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.hops_unchecked(a, b))
    }

    pub(crate) fn hops_unchecked(&self, a: NodeId, b: NodeId) -> u32 {
        if a == b {
            0
        } else {
            2 * self.meet_level(a, b)
        }
    }

    pub fn max_hops(&self) -> u32 {
        2 * self.levels
    }

    /// Number of leaves in the linear range `[lo, hi)` that share the
    /// level-`level` subtree of `src`.
    fn count_in_subtree(&self, src: NodeId, level: u32, lo: u64, hi: u64) -> u64 {
        let size = self.block(level);
        let start = src as u64 / size * size;
        let end = (start + size).min(self.leaf_count as u64);
        let (a, b) = (lo.max(start), hi.min(end));
        b.saturating_sub(a)
    }

    /// Destinations of the cyclic range starting at `start` of length `len`
    /// (which may wrap around the leaves several times), grouped by hop
    /// distance from `src`: element `l` counts leaves met at level `l`, with
    /// element 0 counting `src` itself.
    pub fn hop_histogram(&self, src: NodeId, start: NodeId, len: u64) -> Vec<u64> {
        let n = self.leaf_count as u64;
        let full = len / n;
        let rem = len % n;
        let s = start as u64 % n;
        let ranges: [(u64, u64); 2] = if s + rem <= n {
            [(s, s + rem), (0, 0)]
        } else {
            [(s, n), (0, s + rem - n)]
        };
        let within = |level: u32| -> u64 {
            let part: u64 = ranges.iter().map(|&(lo, hi)| self.count_in_subtree(src, level, lo, hi)).sum();
            let whole = self.count_in_subtree(src, level, 0, n);
            full * whole + part
        };
        let self_hits = {
            let part: u64 = ranges.iter().map(|&(lo, hi)| u64::from(lo <= src as u64 && (src as u64) < hi)).sum();
            full + part
        };
        let mut hist = vec![0u64; self.levels as usize + 1];
        hist[0] = self_hits;
        let mut below = self_hits;
        for level in 1..=self.levels {
            let upto = within(level);
            hist[level as usize] = upto - below;
            below = upto;
        }
        hist
    }
}

/// A byte address in the partitioned global address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalAddress(pub u64);

pub fn map_address(cfg: &MnmsConfig, addr: GlobalAddress) -> Result<(NodeId, u64)> {
    let limit = cfg.address_limit();
    if addr.0 >= limit {
        return Err(Error::Address { addr: addr.0, limit });
    }
    Ok(((addr.0 / cfg.node_mem_bytes) as NodeId, addr.0 % cfg.node_mem_bytes))
}

pub fn unmap_address(cfg: &MnmsConfig, node: NodeId, offset: u64) -> Result<GlobalAddress> {
    if node >= cfg.node_count {
        return Err(Error::NodeIndex { node, node_count: cfg.node_count });
    }
    if offset >= cfg.node_mem_bytes {
        return Err(Error::Address { addr: offset, limit: cfg.node_mem_bytes });
    }
    Ok(GlobalAddress(node as u64 * cfg.node_mem_bytes + offset))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MessageCost {
    pub payload_bytes: u64,
    pub link_bytes: u64,
    pub latency_ns: f64,
}

pub fn account_message(
    topo: &FabricTopology,
    cfg: &MnmsConfig,
    src: NodeId,
    dst: NodeId,
    payload_bytes: u64,
) -> Result<MessageCost> {
    let hops = topo.hops(src, dst)? as u64;
    Ok(MessageCost {
        payload_bytes,
        link_bytes: payload_bytes * hops,
        latency_ns: hops as f64 * cfg.per_hop_ns,
    })
}
