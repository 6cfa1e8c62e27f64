//! Discrete-event engine for threadlets running on memory nodes.
//!
//! Each node runs up to `threads_per_node` threadlets at once. A threadlet
//! stands for `multiplicity` logical threadlets that travel and execute
//! together; it occupies `min(threads_per_node, multiplicity)` slots from
//! the moment it starts executing on a node until it migrates or halts, and
//! its per-item work is spread over those slots. Waiting threadlets are
//! served in arrival order.
//!
//! Events are ordered by (time, node, threadlet, sequence), so a run is a
//! pure function of its inputs.

mod program;

#[cfg(test)]
mod tests;

pub use program::{
    Digest, GroupId, Instruction, Items, KeySummary, PartitionId, Predicate, ProgramId, RelId,
    SpawnTarget, ThreadletId, REGISTER_BYTES,
};

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fabric::{account_message, ExecMode, FabricTopology, MnmsConfig, NodeId};
use crate::relgen::{apportion, mix64, Placement, Relation};
use crate::traffic::TrafficReport;

/// Hash of a join key, used to pick the key's owner node.
pub fn key_hash(key: &[u8], seed: u64) -> u64 {
    let mut h = mix64(seed ^ key.len() as u64);
    for chunk in key.chunks(8) {
        let mut w = [0u8; 8];
        w[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(w));
    }
    h
}

pub fn key_owner(key: &[u8], seed: u64, node_count: u32) -> NodeId {
    (key_hash(key, seed) % node_count as u64) as NodeId
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ready,
    Waiting,
    Done,
}

#[derive(Debug, Clone)]
struct Threadlet {
    program: ProgramId,
    pc: usize,
    node: NodeId,
    state_bytes: u64,
    multiplicity: u64,
    status: Status,
    items: Items,
    slots: u32,
    since: f64,
    cursor: u64,
}

enum Segment {
    Rows(Vec<u64>),
    /// Rows are not stored; only how many are resident and how many of
    /// those are planted.
    Counts { rows: u64, planted: u64 },
}

impl Segment {
    fn len(&self) -> u64 {
        match self {
            Segment::Rows(r) => r.len() as u64,
            Segment::Counts { rows, .. } => *rows,
        }
    }
}

#[derive(Default)]
struct Partition {
    hash: HashMap<Box<[u8]>, Vec<u64>>,
    ordered: BTreeMap<Box<[u8]>, Vec<u64>>,
    keys: u64,
    bytes: u64,
}

#[derive(Default)]
struct NodeState {
    busy: u32,
    max_busy: u32,
    busy_ns: f64,
    waiting: VecDeque<ThreadletId>,
    segments: Vec<Option<Segment>>,
    partitions: HashMap<PartitionId, Partition>,
}

/// Counts over a cyclic range of owners, kept as a difference array.
struct CyclicCounter {
    base: u64,
    diff: Vec<i64>,
}

impl CyclicCounter {
    fn new(n: u32) -> Self {
        Self { base: 0, diff: vec![0; n as usize + 1] }
    }

    fn add(&mut self, start: NodeId, len: u64) {
        let n = self.diff.len() as u64 - 1;
        self.base += len / n;
        let rem = len % n;
        if rem == 0 {
            return;
        }
        let s = start as u64 % n;
        let e = s + rem;
        if e <= n {
            self.diff[s as usize] += 1;
            self.diff[e as usize] -= 1;
        } else {
            self.diff[s as usize] += 1;
            self.diff[n as usize] -= 1;
            self.diff[0] += 1;
            self.diff[(e - n) as usize] -= 1;
        }
    }

    fn values(&self) -> Vec<u64> {
        let mut acc = 0i64;
        self.diff[..self.diff.len() - 1]
            .iter()
            .map(|d| {
                acc += d;
                self.base + acc as u64
            })
            .collect()
    }
}

struct Group {
    expected: u64,
    program: Option<ProgramId>,
    release_at: f64,
    digests: BTreeMap<NodeId, Vec<Digest>>,
    total: CyclicCounter,
    matched: CyclicCounter,
    released: bool,
}

#[derive(Debug, Clone)]
enum EventKind {
    Ready,
    Deliver(Items),
    Release(GroupId),
}

#[derive(Debug, Clone)]
struct Event {
    time: f64,
    node: NodeId,
    threadlet: ThreadletId,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (u32, u64, u64) {
        (self.node, self.threadlet, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then_with(|| self.key().cmp(&other.key()))
    }
}

/// One executed step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub time_ns: f64,
    pub node: NodeId,
    pub threadlet: ThreadletId,
    pub opcode: &'static str,
    pub bytes_intra: u64,
    pub bytes_fabric_payload: u64,
    pub bytes_fabric_link: u64,
}

pub const EVENT_LOG_HEADER: &str =
    "time_ns,node,threadlet,opcode,bytes_intra,bytes_fabric_payload,bytes_fabric_link";

impl LogRecord {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.time_ns,
            self.node,
            self.threadlet,
            self.opcode,
            self.bytes_intra,
            self.bytes_fabric_payload,
            self.bytes_fabric_link
        )
    }
}

/// Results delivered by EMIT.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Collected {
    pub rows: Vec<u64>,
    pub pairs: Vec<(u64, u64)>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineReport {
    pub traffic: TrafficReport,
    /// Busy slot-time over available slot-time, per node.
    pub node_utilization: Vec<f64>,
    pub max_node_concurrency: u32,
    pub spawned: u64,
    pub retired: u64,
    pub live: u64,
    pub events: u64,
}

#[derive(Default, Clone, Copy)]
struct Counters {
    intra: u64,
    payload: u64,
    link: u64,
}

pub struct Engine {
    cfg: MnmsConfig,
    topo: FabricTopology,
    programs: Vec<Arc<[Instruction]>>,
    state_bytes: Vec<u64>,
    relations: Vec<Arc<Relation>>,
    nodes: Vec<NodeState>,
    threadlets: Vec<Threadlet>,
    groups: Vec<Group>,
    partitions: u32,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    epoch: f64,
    horizon: f64,
    counters: Counters,
    spawned: u64,
    retired: u64,
    events: u64,
    log: Option<Vec<LogRecord>>,
    collected: Collected,
    last_opcode: &'static str,
}

impl Engine {
    pub fn new(cfg: MnmsConfig) -> Result<Self> {
        cfg.validate()?;
        let topo = cfg.topology()?;
        let nodes = (0..cfg.node_count).map(|_| NodeState::default()).collect();
        Ok(Self {
            cfg,
            topo,
            programs: Vec::new(),
            state_bytes: Vec::new(),
            relations: Vec::new(),
            nodes,
            threadlets: Vec::new(),
            groups: Vec::new(),
            partitions: 0,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            epoch: 0.0,
            horizon: 0.0,
            counters: Counters::default(),
            spawned: 0,
            retired: 0,
            events: 0,
            log: None,
            collected: Collected::default(),
            last_opcode: "NONE",
        })
    }

    pub fn config(&self) -> &MnmsConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &FabricTopology {
        &self.topo
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn set_logging(&mut self, on: bool) {
        self.log = if on { Some(Vec::new()) } else { None };
    }

    pub fn event_log(&self) -> &[LogRecord] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn write_event_log(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{EVENT_LOG_HEADER}")?;
        for r in self.event_log() {
            writeln!(out, "{}", r.to_csv())?;
        }
        Ok(())
    }

    pub fn collected(&self) -> &Collected {
        &self.collected
    }

    /// Registers a program; programs may refer to themselves through the
    /// returned id, which is fixed before the body is supplied.
    pub fn reserve_program(&mut self) -> ProgramId {
        self.programs.push(Arc::from(vec![Instruction::Halt]));
        self.state_bytes.push(REGISTER_BYTES);
        ProgramId(self.programs.len() as u32 - 1)
    }

    pub fn define_program(&mut self, id: ProgramId, body: Vec<Instruction>) {
        self.state_bytes[id.0 as usize] = program::program_state_bytes(&body);
        self.programs[id.0 as usize] = Arc::from(body);
    }

    pub fn add_program(&mut self, body: Vec<Instruction>) -> ProgramId {
        let id = self.reserve_program();
        self.define_program(id, body);
        id
    }

    /// Makes `rel` resident according to `placement`.
    pub fn load_relation(&mut self, rel: Arc<Relation>, placement: &Placement) -> Result<RelId> {
        if placement.node_count() != self.cfg.node_count {
            return Err(Error::Placement(format!(
                "placement spans {} nodes but the machine has {}",
                placement.node_count(),
                self.cfg.node_count
            )));
        }
        if placement.rows() != rel.rows() {
            return Err(Error::Placement(format!(
                "placement covers {} rows but relation {} has {}",
                placement.rows(),
                rel.name(),
                rel.rows()
            )));
        }
        let id = RelId(self.relations.len() as u32);
        let n = self.cfg.node_count;
        for v in 0..n {
            let seg = if rel.is_materialized() {
                Segment::Rows(placement.rows_on(v).collect())
            } else {
                let rows = placement.count_on(v);
                Segment::Counts { rows, planted: apportion(rel.planted_count(), n, v).min(rows) }
            };
            let segs = &mut self.nodes[v as usize].segments;
            segs.resize_with(id.0 as usize + 1, || None);
            segs[id.0 as usize] = Some(seg);
        }
        self.relations.push(rel);
        Ok(id)
    }

    pub fn new_partition(&mut self) -> PartitionId {
        self.partitions += 1;
        PartitionId(self.partitions - 1)
    }

    /// A scatter group whose carriers are released once `expected`
    /// KeyOwners spawns have been executed.
    pub fn open_group(&mut self, expected: u64) -> GroupId {
        let n = self.cfg.node_count;
        self.groups.push(Group {
            expected,
            program: None,
            release_at: self.now,
            digests: BTreeMap::new(),
            total: CyclicCounter::new(n),
            matched: CyclicCounter::new(n),
            released: false,
        });
        GroupId(self.groups.len() as u32 - 1)
    }

    /// Number of keys held in `partition` across all nodes.
    pub fn partition_keys(&self, partition: PartitionId) -> u64 {
        self.nodes.iter().filter_map(|n| n.partitions.get(&partition)).map(|p| p.keys).sum()
    }

    pub fn spawn(&mut self, program: ProgramId, node: NodeId, at: f64) -> Result<ThreadletId> {
        self.spawn_with(program, node, at, Items::Empty)
    }

    /// Injects a threadlet carrying `items`, as if from the host.
    pub fn spawn_with(&mut self, program: ProgramId, node: NodeId, at: f64, items: Items) -> Result<ThreadletId> {
        self.check_node(node)?;
        if (program.0 as usize) >= self.programs.len() {
            return Err(Error::Precondition(format!("unknown program {}", program.0)));
        }
        if at < self.now {
            return Err(Error::Precondition(format!("spawn at {at} ns is before the current time {} ns", self.now)));
        }
        let mult = items.len().max(1);
        let tid = self.create(program, node, mult, items);
        self.spawned += mult;
        self.schedule(at, node, tid, EventKind::Ready);
        Ok(tid)
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node >= self.cfg.node_count {
            return Err(Error::NodeIndex { node, node_count: self.cfg.node_count });
        }
        Ok(())
    }

    fn create(&mut self, program: ProgramId, node: NodeId, multiplicity: u64, items: Items) -> ThreadletId {
        self.threadlets.push(Threadlet {
            program,
            pc: 0,
            node,
            state_bytes: self.state_bytes[program.0 as usize],
            multiplicity,
            status: Status::Ready,
            items,
            slots: 0,
            since: 0.0,
            cursor: 0,
        });
        self.threadlets.len() as ThreadletId - 1
    }

    fn schedule(&mut self, time: f64, node: NodeId, threadlet: ThreadletId, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(Event { time, node, threadlet, seq: self.seq, kind }));
    }

    /// Zeroes traffic, counters, results and the log, and starts timing the
    /// next run from the current clock.
    pub fn reset_accounting(&mut self) {
        self.counters = Counters::default();
        self.spawned -= self.retired;
        self.retired = 0;
        self.events = 0;
        self.collected = Collected::default();
        if let Some(log) = &mut self.log {
            log.clear();
        }
        self.epoch = self.now;
        self.horizon = self.now;
        for n in &mut self.nodes {
            n.busy_ns = 0.0;
            n.max_busy = n.busy;
        }
    }

    /// Processes events until none remain.
    pub fn run_to_completion(&mut self) -> Result<()> {
        let mut processed = 0u64;
        while let Some(Reverse(ev)) = self.queue.pop() {
            processed += 1;
            if processed > self.cfg.step_budget {
                return Err(Error::StepBudgetExceeded {
                    budget: self.cfg.step_budget,
                    live: self.spawned - self.retired,
                    last_opcode: self.last_opcode,
                });
            }
            debug_assert!(ev.time >= self.now);
            self.now = ev.time;
            self.horizon = self.horizon.max(ev.time);
            self.events += 1;
            match ev.kind {
                EventKind::Ready => self.on_ready(ev.threadlet)?,
                EventKind::Deliver(items) => {
                    self.record(ev.node, ev.threadlet, "DELIVER", Counters::default());
                    self.collect(items)
                }
                EventKind::Release(g) => self.release(g)?,
            }
        }
        Ok(())
    }

    pub fn report(&self) -> EngineReport {
        let span = self.horizon - self.epoch;
        let t = self.cfg.threads_per_node as f64;
        let traffic = TrafficReport {
            host_ram_bytes: 0,
            fabric_payload_bytes: self.counters.payload,
            fabric_link_bytes: self.counters.link,
            intra_node_bytes: self.counters.intra,
            response_ms: span / 1e6,
            match_count: self.collected.count,
            energy_proxy: 0.0,
        }
        .with_energy(&self.cfg.channel_energy_weights);
        EngineReport {
            traffic,
            node_utilization: self
                .nodes
                .iter()
                .map(|n| if span > 0.0 { n.busy_ns / (t * span) } else { 0.0 })
                .collect(),
            max_node_concurrency: self.nodes.iter().map(|n| n.max_busy).max().unwrap_or(0),
            spawned: self.spawned,
            retired: self.retired,
            live: self.spawned - self.retired,
            events: self.events,
        }
    }

    fn collect(&mut self, items: Items) {
        self.collected.count += match &items {
            Items::Counts { matched, .. } => *matched,
            other => other.len(),
        };
        match items {
            Items::Rows(r) => self.collected.rows.extend(r),
            Items::Pairs(p) => self.collected.pairs.extend(p),
            Items::Digests(d) => self.collected.rows.extend(d.into_iter().map(|d| d.row)),
            Items::Counts { .. } | Items::Empty => {}
        }
    }

    fn slots_for(&self, multiplicity: u64) -> u32 {
        multiplicity.clamp(1, self.cfg.threads_per_node as u64) as u32
    }

    fn on_ready(&mut self, tid: ThreadletId) -> Result<()> {
        let th = &self.threadlets[tid as usize];
        if th.status == Status::Done {
            return Ok(());
        }
        if th.slots == 0 {
            let node = th.node as usize;
            let need = self.slots_for(th.multiplicity);
            let ns = &self.nodes[node];
            if !ns.waiting.is_empty() || ns.busy + need > self.cfg.threads_per_node {
                self.nodes[node].waiting.push_back(tid);
                self.threadlets[tid as usize].status = Status::Waiting;
                return Ok(());
            }
            self.acquire(tid, need);
        }
        self.execute(tid)
    }

    fn acquire(&mut self, tid: ThreadletId, need: u32) {
        let th = &mut self.threadlets[tid as usize];
        th.slots = need;
        th.since = self.now;
        th.status = Status::Ready;
        let ns = &mut self.nodes[th.node as usize];
        ns.busy += need;
        ns.max_busy = ns.max_busy.max(ns.busy);
    }

    fn release_slots(&mut self, tid: ThreadletId) {
        let th = &mut self.threadlets[tid as usize];
        let (node, slots, since) = (th.node as usize, th.slots, th.since);
        th.slots = 0;
        let ns = &mut self.nodes[node];
        ns.busy -= slots;
        ns.busy_ns += slots as f64 * (self.now - since);
        while let Some(&w) = self.nodes[node].waiting.front() {
            let need = self.slots_for(self.threadlets[w as usize].multiplicity);
            if self.nodes[node].busy + need > self.cfg.threads_per_node {
                break;
            }
            self.nodes[node].waiting.pop_front();
            self.acquire(w, need);
            self.schedule(self.now, node as NodeId, w, EventKind::Ready);
        }
    }

    fn record(&mut self, node: NodeId, tid: ThreadletId, opcode: &'static str, c: Counters) {
        self.counters.intra += c.intra;
        self.counters.payload += c.payload;
        self.counters.link += c.link;
        self.last_opcode = opcode;
        if let Some(log) = &mut self.log {
            log.push(LogRecord {
                time_ns: self.now,
                node,
                threadlet: tid,
                opcode,
                bytes_intra: c.intra,
                bytes_fabric_payload: c.payload,
                bytes_fabric_link: c.link,
            });
        }
    }

    /// Cost of moving `bytes` from `src` to `dst`. A transfer that stays on
    /// one node is a local memory write, not fabric traffic.
    fn transfer(&self, src: NodeId, dst: NodeId, bytes: u64, c: &mut Counters) -> Result<f64> {
        if src == dst {
            c.intra += bytes;
            return Ok(0.0);
        }
        let m = account_message(&self.topo, &self.cfg, src, dst, bytes)?;
        c.payload += m.payload_bytes;
        c.link += m.link_bytes;
        Ok(m.latency_ns)
    }

    fn execute(&mut self, tid: ThreadletId) -> Result<()> {
        let th = &self.threadlets[tid as usize];
        let program = Arc::clone(&self.programs[th.program.0 as usize]);
        let node = th.node;
        let Some(ins) = program.get(th.pc) else {
            return self.halt(tid);
        };
        let rate = self.cfg.per_row_scan_ns;
        let width = th.slots.max(1) as f64;
        let mut c = Counters::default();
        let opcode = ins.opcode();
        match ins {
            Instruction::Halt => return self.halt(tid),
            Instruction::ScanCompare { rel, attr, predicate } => {
                let k = self.scan(tid, *rel, *attr, predicate)?;
                let attr_w = self.relations[rel.0 as usize].spec().attributes[*attr].size_bytes as u64;
                c.intra += k * attr_w;
                self.record(node, tid, opcode, c);
                let d = k as f64 * rate / width;
                self.schedule(self.now + d, node, tid, EventKind::Ready);
            }
            Instruction::Migrate { dst } => {
                self.check_node(*dst)?;
                self.threadlets[tid as usize].pc += 1;
                if *dst == node {
                    self.record(node, tid, opcode, c);
                    self.schedule(self.now, node, tid, EventKind::Ready);
                } else {
                    let state = self.threadlets[tid as usize].state_bytes;
                    let lat = self.transfer(node, *dst, state, &mut c)?;
                    self.record(node, tid, opcode, c);
                    self.release_slots(tid);
                    self.threadlets[tid as usize].node = *dst;
                    self.schedule(self.now + lat, *dst, tid, EventKind::Ready);
                }
            }
            Instruction::Emit { dst, bytes_per_item } => {
                self.check_node(*dst)?;
                let items = std::mem::take(&mut self.threadlets[tid as usize].items);
                let count = items.len();
                if count > 0 {
                    let lat = self.transfer(node, *dst, count * bytes_per_item, &mut c)?;
                    self.schedule(self.now + lat, *dst, tid, EventKind::Deliver(items));
                }
                self.record(node, tid, opcode, c);
                self.threadlets[tid as usize].pc += 1;
                self.schedule(self.now, node, tid, EventKind::Ready);
            }
            Instruction::Spawn { program: child, target } => {
                let d = rate;
                match target {
                    SpawnTarget::Node(dst) => {
                        self.check_node(*dst)?;
                        self.spawn_child(*child, node, *dst, d, &mut c)?;
                    }
                    SpawnTarget::Broadcast => {
                        for dst in 0..self.cfg.node_count {
                            self.spawn_child(*child, node, dst, d, &mut c)?;
                        }
                    }
                    SpawnTarget::KeyOwners { group, digest_bytes } => {
                        self.scatter(tid, *child, *group, *digest_bytes, d, &mut c)?;
                    }
                }
                self.record(node, tid, opcode, c);
                self.threadlets[tid as usize].pc += 1;
                self.schedule(self.now + d, node, tid, EventKind::Ready);
            }
            Instruction::HashPut { partition, digest_bytes }
            | Instruction::BtreePut { partition, key_bytes: digest_bytes } => {
                let ordered = matches!(ins, Instruction::BtreePut { .. });
                let items = std::mem::take(&mut self.threadlets[tid as usize].items);
                let k = items.len();
                self.check_locality(tid, node, &items)?;
                let part = self.nodes[node as usize].partitions.entry(*partition).or_default();
                match items {
                    Items::Digests(ds) => {
                        for d in ds {
                            let slot = if ordered { part.ordered.entry(d.key).or_default() } else { part.hash.entry(d.key).or_default() };
                            slot.push(d.row);
                        }
                    }
                    Items::Counts { .. } | Items::Empty => {}
                    other => return Err(Error::Precondition(format!("cannot insert {other:?} into an index"))),
                }
                part.keys += k;
                part.bytes += k * digest_bytes;
                if part.bytes > self.cfg.node_mem_bytes {
                    return Err(Error::PartitionCapacity {
                        node,
                        needed: part.bytes,
                        available: self.cfg.node_mem_bytes,
                    });
                }
                let visits = if ordered { tree_visits(part.keys) } else { 1 };
                c.intra += k * visits * digest_bytes;
                self.record(node, tid, opcode, c);
                self.threadlets[tid as usize].pc += 1;
                let d = (k * visits) as f64 * rate / width;
                self.schedule(self.now + d, node, tid, EventKind::Ready);
            }
            Instruction::HashProbe { partition, digest_bytes }
            | Instruction::BtreeFind { partition, key_bytes: digest_bytes } => {
                let ordered = matches!(ins, Instruction::BtreeFind { .. });
                let items = std::mem::take(&mut self.threadlets[tid as usize].items);
                let k = items.len();
                self.check_locality(tid, node, &items)?;
                let part = self.nodes[node as usize].partitions.get(partition);
                let out = match items {
                    Items::Digests(ds) => {
                        let mut pairs = Vec::new();
                        if let Some(p) = part {
                            for d in ds {
                                let hit = if ordered { p.ordered.get(&d.key) } else { p.hash.get(&d.key) };
                                if let Some(rows) = hit {
                                    pairs.extend(rows.iter().map(|&r| (r, d.row)));
                                }
                            }
                        }
                        Items::Pairs(pairs)
                    }
                    Items::Counts { matched, .. } => Items::Counts { total: matched, matched },
                    Items::Empty => Items::Empty,
                    other => return Err(Error::Precondition(format!("cannot probe with {other:?}"))),
                };
                let visits = if ordered { tree_visits(part.map_or(0, |p| p.keys)) } else { 1 };
                c.intra += k * visits * digest_bytes;
                self.threadlets[tid as usize].items = out;
                self.record(node, tid, opcode, c);
                self.threadlets[tid as usize].pc += 1;
                let d = (k * visits) as f64 * rate / width;
                self.schedule(self.now + d, node, tid, EventKind::Ready);
            }
        }
        Ok(())
    }

    fn halt(&mut self, tid: ThreadletId) -> Result<()> {
        let node = self.threadlets[tid as usize].node;
        self.record(node, tid, "HALT", Counters::default());
        self.release_slots(tid);
        let th = &mut self.threadlets[tid as usize];
        th.status = Status::Done;
        th.items = Items::Empty;
        self.retired += th.multiplicity;
        Ok(())
    }

    fn check_locality(&self, tid: ThreadletId, node: NodeId, items: &Items) -> Result<()> {
        if let Items::Digests(ds) = items {
            for d in ds {
                let owner = key_owner(&d.key, self.cfg.hash_seed, self.cfg.node_count);
                if owner != node {
                    return Err(Error::Locality { threadlet: tid, node, owner });
                }
            }
        }
        Ok(())
    }

    /// Scans the next chunk of the local segment: all of it when batched,
    /// one row per step otherwise. Returns rows examined.
    fn scan(&mut self, tid: ThreadletId, rel: RelId, attr: usize, predicate: &Predicate) -> Result<u64> {
        let th = &self.threadlets[tid as usize];
        let node = th.node as usize;
        let relation = self
            .relations
            .get(rel.0 as usize)
            .ok_or_else(|| Error::Precondition(format!("unknown relation {}", rel.0)))?;
        let seg = self.nodes[node]
            .segments
            .get(rel.0 as usize)
            .and_then(|s| s.as_ref())
            .ok_or_else(|| Error::Precondition(format!("relation {} not resident", relation.name())))?;
        let len = seg.len();
        let start = th.cursor.min(len);
        let k = match self.cfg.exec_mode {
            ExecMode::Batched => len - start,
            ExecMode::PerRow => (len - start).min(1),
        };
        let mut items = std::mem::take(&mut self.threadlets[tid as usize].items);
        match seg {
            Segment::Rows(rows) => {
                for &r in &rows[start as usize..(start + k) as usize] {
                    let key = relation.attribute_bytes(r, attr);
                    let hit = match predicate {
                        Predicate::Equals(v) => key.as_ref() == v.as_slice(),
                        Predicate::Any => true,
                        Predicate::Member(s) => s.contains(&key),
                    };
                    if !hit {
                        continue;
                    }
                    match (predicate, &mut items) {
                        (Predicate::Equals(_), Items::Rows(v)) => v.push(r),
                        (Predicate::Equals(_), i @ Items::Empty) => *i = Items::Rows(vec![r]),
                        (_, Items::Digests(v)) => v.push(Digest { row: r, key: key.into_owned().into() }),
                        (_, i @ Items::Empty) => *i = Items::Digests(vec![Digest { row: r, key: key.into_owned().into() }]),
                        (_, other) => return Err(Error::Precondition(format!("scan cannot extend {other:?}"))),
                    }
                }
                // keep an empty digest list so the scatter knows the shape
                if matches!(items, Items::Empty) && k > 0 && !matches!(predicate, Predicate::Equals(_)) {
                    items = Items::Digests(Vec::new());
                }
            }
            Segment::Counts { planted, .. } => {
                let m = planted.min(&(start + k)).saturating_sub(start);
                let (dt, dm) = match predicate {
                    Predicate::Equals(v) => {
                        if relation.select_value(attr).as_deref() == Some(v.as_slice()) {
                            (m, m)
                        } else {
                            (0, 0)
                        }
                    }
                    Predicate::Any => (k, m),
                    Predicate::Member(_) => (m, m),
                };
                items = match items {
                    Items::Empty => Items::Counts { total: dt, matched: dm },
                    Items::Counts { total, matched } => Items::Counts { total: total + dt, matched: matched + dm },
                    other => return Err(Error::Precondition(format!("scan cannot extend {other:?}"))),
                };
            }
        }
        let th = &mut self.threadlets[tid as usize];
        th.items = items;
        th.cursor = start + k;
        if th.cursor >= len {
            th.cursor = 0;
            th.pc += 1;
        }
        Ok(k)
    }

    fn spawn_child(&mut self, program: ProgramId, src: NodeId, dst: NodeId, d: f64, c: &mut Counters) -> Result<()> {
        let state = self.state_bytes[program.0 as usize];
        let lat = self.transfer(src, dst, state, c)?;
        let child = self.create(program, dst, 1, Items::Empty);
        self.spawned += 1;
        self.schedule(self.now + d + lat, dst, child, EventKind::Ready);
        Ok(())
    }

    fn scatter(
        &mut self,
        tid: ThreadletId,
        program: ProgramId,
        group: GroupId,
        digest_bytes: u64,
        d: f64,
        c: &mut Counters,
    ) -> Result<()> {
        let g = group.0 as usize;
        if g >= self.groups.len() {
            return Err(Error::Precondition(format!("unknown group {g}")));
        }
        let src = self.threadlets[tid as usize].node;
        let items = std::mem::take(&mut self.threadlets[tid as usize].items);
        let n = self.cfg.node_count;
        let per_row = self.cfg.exec_mode == ExecMode::PerRow;
        let mut latest = self.now + d;
        match items {
            Items::Empty => {}
            Items::Digests(ds) => {
                self.spawned += ds.len() as u64;
                let mut by_owner: BTreeMap<NodeId, Vec<Digest>> = BTreeMap::new();
                for dg in ds {
                    by_owner.entry(key_owner(&dg.key, self.cfg.hash_seed, n)).or_default().push(dg);
                }
                for (owner, ds) in by_owner {
                    let lat = self.transfer(src, owner, ds.len() as u64 * digest_bytes, c)?;
                    let at = self.now + d + lat;
                    latest = latest.max(at);
                    if per_row {
                        for dg in ds {
                            let child = self.create(program, owner, 1, Items::Digests(vec![dg]));
                            self.schedule(at, owner, child, EventKind::Ready);
                        }
                    } else {
                        self.groups[g].digests.entry(owner).or_default().extend(ds);
                    }
                }
            }
            Items::Counts { total, matched } => {
                self.spawned += total;
                // owners are the `total` nodes following the source in
                // round-robin order; matched digests go first
                let hist = self.topo.hop_histogram(src, src, total);
                c.intra += hist[0] * digest_bytes;
                for (level, &count) in hist.iter().enumerate().skip(1) {
                    let hops = 2 * level as u64;
                    c.payload += count * digest_bytes;
                    c.link += count * digest_bytes * hops;
                    if count > 0 {
                        latest = latest.max(self.now + d + hops as f64 * self.cfg.per_hop_ns);
                    }
                }
                if per_row {
                    for j in 0..total {
                        let owner = ((src as u64 + j) % n as u64) as NodeId;
                        let hops = self.topo.hops_unchecked(src, owner);
                        let at = self.now + d + hops as f64 * self.cfg.per_hop_ns;
                        let carried = Items::Counts { total: 1, matched: u64::from(j < matched) };
                        let child = self.create(program, owner, 1, carried);
                        self.schedule(at, owner, child, EventKind::Ready);
                    }
                } else {
                    self.groups[g].total.add(src, total);
                    self.groups[g].matched.add(src, matched);
                }
            }
            other => return Err(Error::Precondition(format!("cannot scatter {other:?}"))),
        }
        let grp = &mut self.groups[g];
        grp.program = Some(program);
        grp.release_at = grp.release_at.max(latest);
        grp.expected = grp.expected.saturating_sub(1);
        if grp.expected == 0 && !grp.released && !per_row {
            grp.released = true;
            let at = grp.release_at;
            self.schedule(at, u32::MAX, u64::MAX, EventKind::Release(group));
        }
        Ok(())
    }

    fn release(&mut self, group: GroupId) -> Result<()> {
        let g = &mut self.groups[group.0 as usize];
        let Some(program) = g.program else { return Ok(()) };
        let digests = std::mem::take(&mut g.digests);
        let totals = g.total.values();
        let matched = g.matched.values();
        for (owner, ds) in digests {
            let mult = ds.len() as u64;
            let child = self.create(program, owner, mult, Items::Digests(ds));
            self.schedule(self.now, owner, child, EventKind::Ready);
        }
        for (owner, (&t, &m)) in totals.iter().zip(&matched).enumerate() {
            if t == 0 {
                continue;
            }
            let owner = owner as NodeId;
            let child = self.create(program, owner, t, Items::Counts { total: t, matched: m });
            self.schedule(self.now, owner, child, EventKind::Ready);
        }
        Ok(())
    }
}

/// Index nodes visited by one lookup in an ordered index of `size` keys.
pub fn tree_visits(size: u64) -> u64 {
    if size <= 2 {
        1
    } else {
        64 - (size - 1).leading_zeros() as u64
    }
}
