//! SELECT and JOIN compiled to threadlet programs, plus the brute-force
//! reference executor used as the functional oracle.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::engine::{
    Engine, EngineReport, Instruction, KeySummary, LogRecord, PartitionId, Predicate, ProgramId, RelId,
    SpawnTarget,
};
use crate::error::{Error, Result};
use crate::fabric::MnmsConfig;
use crate::relgen::{Placement, Relation};

/// What a SELECT sends back per match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultPayload {
    FullRow,
    RowRef,
}

impl ResultPayload {
    pub fn name(self) -> &'static str {
        match self {
            ResultPayload::FullRow => "full_row",
            ResultPayload::RowRef => "row_ref",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_row" => Some(ResultPayload::FullRow),
            "row_ref" => Some(ResultPayload::RowRef),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnmsJoinStrategy {
    /// Every R and S digest migrates to its key owner.
    MigrateAll,
    /// Digests migrate only when their key is in the membership summary
    /// exchanged ahead of the query.
    IndexAssisted,
    /// S digests probe an ordered index of R built ahead of the query.
    Btree,
}

impl MnmsJoinStrategy {
    pub const ALL: [MnmsJoinStrategy; 3] =
        [MnmsJoinStrategy::MigrateAll, MnmsJoinStrategy::IndexAssisted, MnmsJoinStrategy::Btree];

    pub fn name(self) -> &'static str {
        match self {
            MnmsJoinStrategy::MigrateAll => "migrate_all",
            MnmsJoinStrategy::IndexAssisted => "index_assisted",
            MnmsJoinStrategy::Btree => "btree",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinOutput {
    PairRefs,
    ConcatenatedRows,
}

impl JoinOutput {
    pub fn name(self) -> &'static str {
        match self {
            JoinOutput::PairRefs => "pair_refs",
            JoinOutput::ConcatenatedRows => "concatenated_rows",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pair_refs" => Some(JoinOutput::PairRefs),
            "concatenated_rows" => Some(JoinOutput::ConcatenatedRows),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectQuery {
    pub relation: Arc<Relation>,
    pub attribute: String,
    pub value: Vec<u8>,
    pub payload: ResultPayload,
}

impl SelectQuery {
    /// Equality select on the value planted by the generator.
    pub fn planted(relation: Arc<Relation>, attribute: &str, payload: ResultPayload) -> Result<Self> {
        let idx = relation.spec().attribute_index(attribute)?;
        let value = relation
            .select_value(idx)
            .ok_or_else(|| Error::Schema(format!("{}.{attribute} has no planted select value", relation.name())))?;
        Ok(Self { relation, attribute: attribute.to_string(), value, payload })
    }

    fn check(&self) -> Result<usize> {
        let idx = self.relation.spec().attribute_index(&self.attribute)?;
        let width = self.relation.spec().attributes[idx].size_bytes as usize;
        if self.value.len() != width {
            return Err(Error::Schema(format!(
                "select value has {} bytes but {}.{} is {width} bytes wide",
                self.value.len(),
                self.relation.name(),
                self.attribute
            )));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone)]
pub struct JoinQuery {
    pub r: Arc<Relation>,
    pub s: Arc<Relation>,
    pub attribute: String,
    pub strategy: MnmsJoinStrategy,
    pub output: JoinOutput,
}

impl JoinQuery {
    fn check(&self) -> Result<(usize, usize, u64)> {
        let ri = self.r.spec().attribute_index(&self.attribute)?;
        let si = self.s.spec().attribute_index(&self.attribute)?;
        let rw = self.r.spec().attributes[ri].size_bytes;
        let sw = self.s.spec().attributes[si].size_bytes;
        if rw != sw {
            return Err(Error::Schema(format!(
                "join attribute {} is {rw} bytes in {} but {sw} bytes in {}",
                self.attribute,
                self.r.name(),
                self.s.name()
            )));
        }
        if self.r.is_materialized() != self.s.is_materialized() {
            return Err(Error::Precondition("join inputs must both be materialized or both not".into()));
        }
        Ok((ri, si, rw as u64))
    }

    fn output_bytes(&self, cfg: &MnmsConfig) -> u64 {
        match self.output {
            JoinOutput::PairRefs => 2 * cfg.row_ref_bytes,
            JoinOutput::ConcatenatedRows => self.r.spec().row_bytes + self.s.spec().row_bytes,
        }
    }
}

/// Result of one simulated query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub report: EngineReport,
    /// One-time preparation (summaries or index build), reported apart
    /// from the query itself.
    pub prep: Option<EngineReport>,
    /// Matching row ids, when the relation is materialized.
    pub rows: Option<BTreeSet<u64>>,
    /// Matching (R row, S row) pairs, when the relations are materialized.
    pub pairs: Option<BTreeSet<(u64, u64)>>,
    pub event_log: Vec<LogRecord>,
}

/// Knobs that do not change results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub log_events: bool,
}

fn host_broadcast(eng: &mut Engine, program: ProgramId) -> Result<()> {
    let host = eng.add_program(vec![Instruction::Spawn { program, target: SpawnTarget::Broadcast }, Instruction::Halt]);
    let now = eng.now();
    eng.spawn(host, 0, now)?;
    eng.run_to_completion()
}

pub fn mnms_select(q: &SelectQuery, placement: &Placement, cfg: &MnmsConfig) -> Result<QueryOutcome> {
    mnms_select_with(q, placement, cfg, RunOptions::default())
}

pub fn mnms_select_with(
    q: &SelectQuery,
    placement: &Placement,
    cfg: &MnmsConfig,
    opts: RunOptions,
) -> Result<QueryOutcome> {
    let attr = q.check()?;
    let mut eng = Engine::new(cfg.clone())?;
    eng.set_logging(opts.log_events);
    let rel = eng.load_relation(Arc::clone(&q.relation), placement)?;
    let per_item = match q.payload {
        ResultPayload::FullRow => q.relation.spec().row_bytes,
        ResultPayload::RowRef => cfg.row_ref_bytes,
    };
    let scan = eng.add_program(vec![
        Instruction::ScanCompare { rel, attr, predicate: Predicate::Equals(q.value.clone()) },
        Instruction::Emit { dst: 0, bytes_per_item: per_item },
        Instruction::Halt,
    ]);
    host_broadcast(&mut eng, scan)?;
    let rows = q.relation.is_materialized().then(|| eng.collected().rows.iter().copied().collect());
    Ok(QueryOutcome {
        report: eng.report(),
        prep: None,
        rows,
        pairs: None,
        event_log: eng.event_log().to_vec(),
    })
}

/// Scatters every digest of `rel` that passes `predicate` to its key owner,
/// where `sink` runs on the owner's share.
fn scatter_phase(
    eng: &mut Engine,
    rel: RelId,
    attr: usize,
    predicate: Predicate,
    digest_bytes: u64,
    sink: Vec<Instruction>,
) -> Result<()> {
    let sink = eng.add_program(sink);
    let group = eng.open_group(eng.config().node_count as u64);
    let scan = eng.add_program(vec![
        Instruction::ScanCompare { rel, attr, predicate },
        Instruction::Spawn { program: sink, target: SpawnTarget::KeyOwners { group, digest_bytes } },
        Instruction::Halt,
    ]);
    host_broadcast(eng, scan)
}

struct JoinSetup {
    eng: Engine,
    r: RelId,
    s: RelId,
    ri: usize,
    si: usize,
    digest_bytes: u64,
    out_bytes: u64,
}

fn setup_join(q: &JoinQuery, placements: (&Placement, &Placement), cfg: &MnmsConfig, opts: RunOptions) -> Result<JoinSetup> {
    let (ri, si, width) = q.check()?;
    let mut eng = Engine::new(cfg.clone())?;
    eng.set_logging(opts.log_events);
    let r = eng.load_relation(Arc::clone(&q.r), placements.0)?;
    let s = eng.load_relation(Arc::clone(&q.s), placements.1)?;
    Ok(JoinSetup { eng, r, s, ri, si, digest_bytes: width + cfg.row_ref_bytes, out_bytes: q.output_bytes(cfg) })
}

fn finish(eng: &Engine, q: &JoinQuery, prep: Option<EngineReport>) -> QueryOutcome {
    let pairs = q.r.is_materialized().then(|| eng.collected().pairs.iter().copied().collect());
    QueryOutcome { report: eng.report(), prep, rows: None, pairs, event_log: eng.event_log().to_vec() }
}

/// Keys present on both sides. The owners learn this set during the
/// preparation exchange; here it is read back from the relations.
fn shared_keys(q: &JoinQuery, ri: usize, si: usize) -> KeySummary {
    if !q.r.is_materialized() {
        return KeySummary::default();
    }
    let left: HashSet<Box<[u8]>> = (0..q.r.rows()).map(|row| q.r.attribute_bytes(row, ri).into_owned().into()).collect();
    KeySummary::new(
        (0..q.s.rows())
            .map(|row| -> Box<[u8]> { q.s.attribute_bytes(row, si).into_owned().into() })
            .filter(|k| left.contains(k)),
    )
}

/// Hash join with strategy `migrate_all` or `index_assisted`.
pub fn mnms_hash_join(q: &JoinQuery, placements: (&Placement, &Placement), cfg: &MnmsConfig) -> Result<QueryOutcome> {
    mnms_hash_join_with(q, placements, cfg, RunOptions::default())
}

pub fn mnms_hash_join_with(
    q: &JoinQuery,
    placements: (&Placement, &Placement),
    cfg: &MnmsConfig,
    opts: RunOptions,
) -> Result<QueryOutcome> {
    let JoinSetup { mut eng, r, s, ri, si, digest_bytes: db, out_bytes } = setup_join(q, placements, cfg, opts)?;
    let (predicate, prep) = match q.strategy {
        MnmsJoinStrategy::MigrateAll => (Predicate::Any, None),
        MnmsJoinStrategy::IndexAssisted => {
            // every key of both sides visits its owner once so the owner can
            // mark the keys seen on both sides
            let pr = eng.new_partition();
            let ps = eng.new_partition();
            scatter_phase(&mut eng, r, ri, Predicate::Any, db, vec![Instruction::HashPut { partition: pr, digest_bytes: db }, Instruction::Halt])?;
            scatter_phase(&mut eng, s, si, Predicate::Any, db, vec![Instruction::HashPut { partition: ps, digest_bytes: db }, Instruction::Halt])?;
            let prep = eng.report();
            eng.reset_accounting();
            (Predicate::Member(Arc::new(shared_keys(q, ri, si))), Some(prep))
        }
        MnmsJoinStrategy::Btree => {
            return Err(Error::Precondition("btree joins go through mnms_btree_join".into()));
        }
    };
    let part = eng.new_partition();
    scatter_phase(&mut eng, r, ri, predicate.clone(), db, vec![Instruction::HashPut { partition: part, digest_bytes: db }, Instruction::Halt])?;
    scatter_phase(
        &mut eng,
        s,
        si,
        predicate,
        db,
        vec![
            Instruction::HashProbe { partition: part, digest_bytes: db },
            Instruction::Emit { dst: 0, bytes_per_item: out_bytes },
            Instruction::Halt,
        ],
    )?;
    Ok(finish(&eng, q, prep))
}

/// An ordered index of R's join attribute, partitioned by key owner.
pub struct BtreeIndex {
    eng: Engine,
    partition: PartitionId,
    relation: String,
    attribute: String,
    /// Cost of building the index.
    pub prep: EngineReport,
}

impl BtreeIndex {
    pub fn covers(&self, relation: &str, attribute: &str) -> bool {
        self.relation == relation && self.attribute == attribute
    }
}

/// Builds the index on `q.r` that [`mnms_btree_join`] probes.
pub fn prepare_btree_index(q: &JoinQuery, placements: (&Placement, &Placement), cfg: &MnmsConfig) -> Result<BtreeIndex> {
    prepare_btree_index_with(q, placements, cfg, RunOptions::default())
}

pub fn prepare_btree_index_with(
    q: &JoinQuery,
    placements: (&Placement, &Placement),
    cfg: &MnmsConfig,
    opts: RunOptions,
) -> Result<BtreeIndex> {
    let JoinSetup { mut eng, r, ri, digest_bytes: db, .. } = setup_join(q, placements, cfg, opts)?;
    let partition = eng.new_partition();
    scatter_phase(&mut eng, r, ri, Predicate::Any, db, vec![Instruction::BtreePut { partition, key_bytes: db }, Instruction::Halt])?;
    let prep = eng.report();
    eng.reset_accounting();
    Ok(BtreeIndex { eng, partition, relation: q.r.name().to_string(), attribute: q.attribute.clone(), prep })
}

/// Probes the prepared index with every S row.
pub fn mnms_btree_join(q: &JoinQuery, index: BtreeIndex) -> Result<QueryOutcome> {
    let (_, si, width) = q.check()?;
    if !index.covers(q.r.name(), &q.attribute) {
        return Err(Error::Precondition(format!("no ordered index on {}.{}", q.r.name(), q.attribute)));
    }
    let BtreeIndex { mut eng, partition, prep, .. } = index;
    let cfg = eng.config().clone();
    let db = width + cfg.row_ref_bytes;
    // S was loaded second by the preparation step
    let s = RelId(1);
    scatter_phase(
        &mut eng,
        s,
        si,
        Predicate::Any,
        db,
        vec![
            Instruction::BtreeFind { partition, key_bytes: db },
            Instruction::Emit { dst: 0, bytes_per_item: q.output_bytes(&cfg) },
            Instruction::Halt,
        ],
    )?;
    Ok(finish(&eng, q, Some(prep)))
}

/// Runs `q` with whichever strategy it names, preparing an index first when
/// needed.
pub fn mnms_join(q: &JoinQuery, placements: (&Placement, &Placement), cfg: &MnmsConfig, opts: RunOptions) -> Result<QueryOutcome> {
    match q.strategy {
        MnmsJoinStrategy::Btree => mnms_btree_join(q, prepare_btree_index_with(q, placements, cfg, opts)?),
        _ => mnms_hash_join_with(q, placements, cfg, opts),
    }
}

/// Default cap on comparisons the nested-loop oracle may perform.
pub const ORACLE_BUDGET: u128 = 10_000_000_000;

fn attribute_slice(rel: &Relation, attribute: &str) -> Result<(usize, usize)> {
    if !rel.is_materialized() {
        return Err(Error::OracleUnavailable(format!("relation {} is not materialized", rel.name())));
    }
    let idx = rel.spec().attribute_index(attribute)?;
    let off = rel.spec().attribute_offset(idx) as usize;
    Ok((off, off + rel.spec().attributes[idx].size_bytes as usize))
}

/// Rows of `rel` whose `attribute` equals `value`, by scanning every row.
pub fn reference_select(rel: &Relation, attribute: &str, value: &[u8]) -> Result<BTreeSet<u64>> {
    let (lo, hi) = attribute_slice(rel, attribute)?;
    Ok((0..rel.rows()).filter(|&row| &rel.row_bytes(row)[lo..hi] == value).collect())
}

pub fn reference_equijoin(r: &Relation, s: &Relation, attribute: &str) -> Result<BTreeSet<(u64, u64)>> {
    reference_equijoin_with_budget(r, s, attribute, ORACLE_BUDGET)
}

/// Nested-loop equijoin over every (R, S) row pair.
pub fn reference_equijoin_with_budget(
    r: &Relation,
    s: &Relation,
    attribute: &str,
    budget: u128,
) -> Result<BTreeSet<(u64, u64)>> {
    let (rlo, rhi) = attribute_slice(r, attribute)?;
    let (slo, shi) = attribute_slice(s, attribute)?;
    let needed = r.rows() as u128 * s.rows() as u128;
    if needed > budget {
        return Err(Error::OracleBudget { needed, budget });
    }
    if rhi - rlo != shi - slo {
        return Err(Error::Schema(format!("join attribute {attribute} differs in width")));
    }
    let prefix = |b: &[u8]| {
        let mut w = [0u8; 8];
        let n = b.len().min(8);
        w[..n].copy_from_slice(&b[..n]);
        u64::from_le_bytes(w)
    };
    let s_keys: Vec<Vec<u8>> = (0..s.rows()).map(|row| s.row_bytes(row)[slo..shi].to_vec()).collect();
    let s_prefix: Vec<u64> = s_keys.iter().map(|k| prefix(k)).collect();
    let mut out = BTreeSet::new();
    for i in 0..r.rows() {
        let row = r.row_bytes(i);
        let key = &row[rlo..rhi];
        let p = prefix(key);
        for (j, &sp) in s_prefix.iter().enumerate() {
            if sp == p && s_keys[j] == key {
                out.insert((i, j as u64));
            }
        }
    }
    Ok(out)
}

/// Golden-file form of a select result: sorted ids, one per line.
pub fn format_rows(rows: &BTreeSet<u64>) -> String {
    rows.iter().map(|r| format!("{r}\n")).collect()
}

/// Golden-file form of a join result: sorted `r,s` pairs, one per line.
pub fn format_pairs(pairs: &BTreeSet<(u64, u64)>) -> String {
    pairs.iter().map(|(r, s)| format!("{r},{s}\n")).collect()
}
