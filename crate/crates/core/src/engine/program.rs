//! Threadlet instruction set and the values threadlets carry around.

use std::collections::HashSet;
use std::sync::Arc;

use crate::fabric::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProgramId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionId(pub(crate) u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub(crate) u32);

pub type ThreadletId = u64;

/// Exact set of join keys known to have a partner on the other side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeySummary {
    keys: HashSet<Box<[u8]>>,
}

impl KeySummary {
    pub fn new(keys: impl IntoIterator<Item = Box<[u8]>>) -> Self {
        Self { keys: keys.into_iter().collect() }
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone)]
pub enum Predicate {
    /// Attribute equals this value.
    Equals(Vec<u8>),
    /// Every row; yields one digest per row.
    Any,
    /// Rows whose key is in the summary; yields digests.
    Member(Arc<KeySummary>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnTarget {
    Node(NodeId),
    /// One child on every node.
    Broadcast,
    /// Partitions the parent's digests by key owner and starts one carrier
    /// per owner holding that owner's digests. Carriers of the same group
    /// are released together once every scatter of the group has happened.
    KeyOwners { group: GroupId, digest_bytes: u64 },
}

#[derive(Debug, Clone)]
pub enum Instruction {
    ScanCompare { rel: RelId, attr: usize, predicate: Predicate },
    Migrate { dst: NodeId },
    Spawn { program: ProgramId, target: SpawnTarget },
    /// Sends the accumulated items to `dst`, `bytes_per_item` each.
    Emit { dst: NodeId, bytes_per_item: u64 },
    HashPut { partition: PartitionId, digest_bytes: u64 },
    HashProbe { partition: PartitionId, digest_bytes: u64 },
    BtreePut { partition: PartitionId, key_bytes: u64 },
    BtreeFind { partition: PartitionId, key_bytes: u64 },
    Halt,
}

impl Instruction {
    pub fn opcode(&self) -> &'static str {
        match self {
            Instruction::ScanCompare { .. } => "SCAN_COMPARE",
            Instruction::Migrate { .. } => "MIGRATE",
            Instruction::Spawn { .. } => "SPAWN",
            Instruction::Emit { .. } => "EMIT",
            Instruction::HashPut { .. } => "HASH_PUT",
            Instruction::HashProbe { .. } => "HASH_PROBE",
            Instruction::BtreePut { .. } => "BTREE_PUT",
            Instruction::BtreeFind { .. } => "BTREE_FIND",
            Instruction::Halt => "HALT",
        }
    }
}

/// A join key travelling with the reference of the row it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digest {
    pub row: u64,
    pub key: Box<[u8]>,
}

/// What a threadlet has accumulated. Relations held as counts only produce
/// `Counts`, where `matched` is how many of the items select or find a
/// join partner.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Items {
    #[default]
    Empty,
    Rows(Vec<u64>),
    Digests(Vec<Digest>),
    Pairs(Vec<(u64, u64)>),
    Counts { total: u64, matched: u64 },
}

impl Items {
    pub fn len(&self) -> u64 {
        match self {
            Items::Empty => 0,
            Items::Rows(v) => v.len() as u64,
            Items::Digests(v) => v.len() as u64,
            Items::Pairs(v) => v.len() as u64,
            Items::Counts { total, .. } => *total,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bytes a threadlet carries when it moves: its registers (program counter,
/// accumulator handle, emission target) plus any select value operand.
pub const REGISTER_BYTES: u64 = 16;

pub(crate) fn program_state_bytes(program: &[Instruction]) -> u64 {
    REGISTER_BYTES
        + program
            .iter()
            .map(|i| match i {
                Instruction::ScanCompare { predicate: Predicate::Equals(v), .. } => v.len() as u64,
                _ => 0,
            })
            .sum::<u64>()
}
