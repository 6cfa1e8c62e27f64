use super::*;
use crate::relgen::{make_relation, AttributeSpec, RelationSpec, SelectivitySpec};
use proptest::prelude::*;

fn one_node() -> MnmsConfig {
    MnmsConfig::desk(1, 2, 1)
}

fn select_rel(rows: u64, planted: u64, width: u32, materialized: bool) -> Arc<Relation> {
    let spec = RelationSpec::single("t", rows, 64, AttributeSpec::new("a", width), 5).materialized(materialized);
    Arc::new(make_relation(spec, "a", SelectivitySpec::exact(planted, rows)).unwrap())
}

fn scan_program(eng: &mut Engine, rel: RelId, value: Vec<u8>, dst: NodeId) -> ProgramId {
    eng.add_program(vec![
        Instruction::ScanCompare { rel, attr: 0, predicate: Predicate::Equals(value) },
        Instruction::Emit { dst, bytes_per_item: 8 },
        Instruction::Halt,
    ])
}

#[test]
fn empty_engine_reports_nothing() {
    let mut eng = Engine::new(MnmsConfig::default()).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.traffic.fabric_payload_bytes, 0);
    assert_eq!(r.traffic.intra_node_bytes, 0);
    assert_eq!(r.traffic.response_ms, 0.0);
    assert_eq!((r.spawned, r.retired, r.live, r.events), (0, 0, 0, 0));
}

#[test]
fn thousand_row_scan_takes_ten_microseconds() {
    let mut eng = Engine::new(one_node()).unwrap();
    let rel = select_rel(1000, 10, 8, false);
    let rid = eng.load_relation(rel.clone(), &Placement::new(1000, 1, 1).unwrap()).unwrap();
    let p = scan_program(&mut eng, rid, rel.select_value(0).unwrap(), 0);
    eng.spawn(p, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert!((r.traffic.response_ms * 1e6 - 10_240.0).abs() < 1e-6);
    assert_eq!(r.traffic.intra_node_bytes, 8_000 + 10 * 8);
    assert_eq!(r.traffic.match_count, 10);
    assert_eq!(r.traffic.fabric_payload_bytes, 0);
}

#[test]
fn busiest_node_scan() {
    // 31.25M rows over 8000 nodes puts 3907 rows on the first 2000 nodes
    let mut eng = Engine::new(one_node()).unwrap();
    let rel = select_rel(3907, 0, 8, false);
    let rid = eng.load_relation(rel, &Placement::new(3907, 1, 1).unwrap()).unwrap();
    let p = eng.add_program(vec![
        Instruction::ScanCompare { rel: rid, attr: 0, predicate: Predicate::Equals(vec![0; 8]) },
        Instruction::Halt,
    ]);
    eng.spawn(p, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.traffic.intra_node_bytes, 31_256);
    assert!((r.traffic.response_ms * 1e6 - 40_007.68).abs() < 1e-6);
}

#[test]
fn emit_across_six_hops() {
    let mut eng = Engine::new(MnmsConfig::default()).unwrap();
    assert_eq!(eng.topology().hops(7999, 0).unwrap(), 6);
    let p = eng.add_program(vec![Instruction::Emit { dst: 0, bytes_per_item: 16 }, Instruction::Halt]);
    eng.spawn_with(p, 7999, 0.0, Items::Rows(vec![42])).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.traffic.fabric_payload_bytes, 16);
    assert_eq!(r.traffic.fabric_link_bytes, 96);
    assert!((r.traffic.response_ms * 1e6 - 300.0).abs() < 1e-9);
    assert_eq!(eng.collected().rows, vec![42]);
}

#[test]
fn emit_of_nothing_sends_nothing() {
    let mut eng = Engine::new(MnmsConfig::default()).unwrap();
    let p = eng.add_program(vec![Instruction::Emit { dst: 0, bytes_per_item: 16 }, Instruction::Halt]);
    eng.spawn(p, 7999, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.traffic.fabric_payload_bytes, 0);
    assert_eq!(r.traffic.response_ms, 0.0);
}

#[test]
fn broadcast_spawns_one_child_per_node() {
    let mut eng = Engine::new(MnmsConfig::default()).unwrap();
    let child = eng.add_program(vec![Instruction::Halt]);
    let parent = eng.add_program(vec![Instruction::Spawn { program: child, target: SpawnTarget::Broadcast }]);
    eng.spawn(parent, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.spawned, 8001);
    assert_eq!(r.retired, 8001);
    assert_eq!(r.live, 0);
    // 7999 remote children of 16 register bytes each, one local
    assert_eq!(r.traffic.fabric_payload_bytes, 7999 * 16);
    assert_eq!(r.traffic.intra_node_bytes, 16);
    let link: u64 = (1..8000).map(|v| 16 * eng.topology().hops(0, v).unwrap() as u64).sum();
    assert_eq!(r.traffic.fabric_link_bytes, link);
    // spawn step plus the longest path
    assert!((r.traffic.response_ms * 1e6 - (10.24 + 300.0)).abs() < 1e-6);
}

#[test]
fn spawn_on_missing_node_fails() {
    let mut eng = Engine::new(MnmsConfig::desk(16, 4, 2)).unwrap();
    let p = eng.add_program(vec![Instruction::Halt]);
    assert_eq!(eng.spawn(p, 16, 0.0), Err(Error::NodeIndex { node: 16, node_count: 16 }));
}

#[test]
fn spawn_in_the_past_fails() {
    let mut eng = Engine::new(one_node()).unwrap();
    let rel = select_rel(100, 0, 8, false);
    let rid = eng.load_relation(rel, &Placement::new(100, 1, 1).unwrap()).unwrap();
    let p = scan_program(&mut eng, rid, vec![0; 8], 0);
    eng.spawn(p, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    assert!(matches!(eng.spawn(p, 0, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn migrate_to_self_is_free() {
    let mut eng = Engine::new(MnmsConfig::desk(16, 4, 2)).unwrap();
    let p = eng.add_program(vec![Instruction::Migrate { dst: 3 }, Instruction::Halt]);
    eng.spawn(p, 3, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.traffic.near_memory_bytes(), 0);
    assert_eq!(r.traffic.response_ms, 0.0);
}

#[test]
fn migrate_moves_state() {
    let mut eng = Engine::new(MnmsConfig::desk(16, 4, 2)).unwrap();
    let p = eng.add_program(vec![Instruction::Migrate { dst: 15 }, Instruction::Halt]);
    eng.spawn(p, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.traffic.fabric_payload_bytes, REGISTER_BYTES);
    assert_eq!(r.traffic.fabric_link_bytes, 4 * REGISTER_BYTES);
    assert!((r.traffic.response_ms * 1e6 - 200.0).abs() < 1e-9);
}

#[test]
fn runaway_spawning_hits_the_budget() {
    let mut cfg = one_node();
    cfg.step_budget = 1000;
    let mut eng = Engine::new(cfg).unwrap();
    let p = eng.reserve_program();
    eng.define_program(p, vec![Instruction::Spawn { program: p, target: SpawnTarget::Node(0) }, Instruction::Halt]);
    eng.spawn(p, 0, 0.0).unwrap();
    match eng.run_to_completion() {
        Err(Error::StepBudgetExceeded { budget, live, last_opcode }) => {
            assert_eq!(budget, 1000);
            assert!(live > 0);
            assert!(!last_opcode.is_empty());
        }
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn slots_cap_concurrency() {
    let mut cfg = one_node();
    cfg.threads_per_node = 2;
    let mut eng = Engine::new(cfg).unwrap();
    let rel = select_rel(100, 0, 8, false);
    let rid = eng.load_relation(rel, &Placement::new(100, 1, 1).unwrap()).unwrap();
    let p = scan_program(&mut eng, rid, vec![0; 8], 0);
    for _ in 0..5 {
        eng.spawn(p, 0, 0.0).unwrap();
    }
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert_eq!(r.max_node_concurrency, 2);
    // three waves of 1024 ns
    assert!((r.traffic.response_ms * 1e6 - 3.0 * 1024.0).abs() < 1e-6);
    let expected_util = 5.0 * 1024.0 / (2.0 * 3.0 * 1024.0);
    assert!((r.node_utilization[0] - expected_util).abs() < 1e-9);
}

#[test]
fn wide_threadlet_splits_work_over_slots() {
    let mut cfg = MnmsConfig::desk(4, 2, 2);
    cfg.threads_per_node = 4;
    let mut eng = Engine::new(cfg).unwrap();
    let part = eng.new_partition();
    let p = eng.add_program(vec![Instruction::HashPut { partition: part, digest_bytes: 16 }, Instruction::Halt]);
    eng.spawn_with(p, 2, 0.0, Items::Counts { total: 100, matched: 0 }).unwrap();
    eng.run_to_completion().unwrap();
    let r = eng.report();
    assert!((r.traffic.response_ms * 1e6 - 100.0 * 10.24 / 4.0).abs() < 1e-6);
    assert_eq!(r.max_node_concurrency, 4);
    assert_eq!(eng.partition_keys(part), 100);
}

#[test]
fn locality_is_enforced() {
    let mut eng = Engine::new(MnmsConfig::desk(16, 4, 2)).unwrap();
    let part = eng.new_partition();
    let key: Box<[u8]> = 7u64.to_le_bytes().into();
    let owner = key_owner(&key, eng.config().hash_seed, 16);
    let wrong = (owner + 1) % 16;
    let p = eng.add_program(vec![Instruction::HashPut { partition: part, digest_bytes: 16 }, Instruction::Halt]);
    eng.spawn_with(p, wrong, 0.0, Items::Digests(vec![Digest { row: 0, key }])).unwrap();
    match eng.run_to_completion() {
        Err(Error::Locality { node, owner: o, .. }) => {
            assert_eq!(node, wrong);
            assert_eq!(o, owner);
        }
        other => panic!("expected locality error, got {other:?}"),
    }
}

#[test]
fn oversized_partition_is_rejected() {
    let mut cfg = one_node();
    cfg.node_mem_bytes = 1_000;
    let mut eng = Engine::new(cfg).unwrap();
    let part = eng.new_partition();
    let p = eng.add_program(vec![Instruction::HashPut { partition: part, digest_bytes: 16 }, Instruction::Halt]);
    eng.spawn_with(p, 0, 0.0, Items::Counts { total: 100, matched: 0 }).unwrap();
    assert_eq!(
        eng.run_to_completion(),
        Err(Error::PartitionCapacity { node: 0, needed: 1_600, available: 1_000 })
    );
}

#[test]
fn wrong_placement_is_rejected() {
    let mut eng = Engine::new(MnmsConfig::desk(16, 4, 2)).unwrap();
    let rel = select_rel(100, 0, 8, false);
    assert!(matches!(eng.load_relation(rel.clone(), &Placement::new(100, 8, 1).unwrap()), Err(Error::Placement(_))));
    assert!(matches!(eng.load_relation(rel, &Placement::new(99, 16, 1).unwrap()), Err(Error::Placement(_))));
}

#[test]
fn tree_visit_counts() {
    assert_eq!(tree_visits(0), 1);
    assert_eq!(tree_visits(1), 1);
    assert_eq!(tree_visits(2), 1);
    assert_eq!(tree_visits(3), 2);
    assert_eq!(tree_visits(1024), 10);
    assert_eq!(tree_visits(1025), 11);
    assert_eq!(tree_visits(3906), 12);
}

#[test]
fn cyclic_counter_matches_direct_count() {
    for n in [1u32, 3, 7, 16] {
        for start in 0..n {
            for len in 0..(3 * n as u64 + 2) {
                let mut c = CyclicCounter::new(n);
                c.add(start, len);
                let mut direct = vec![0u64; n as usize];
                for j in 0..len {
                    direct[((start as u64 + j) % n as u64) as usize] += 1;
                }
                assert_eq!(c.values(), direct, "n={n} start={start} len={len}");
            }
        }
    }
}

/// Runs a broadcast select over a 16-node desk machine with logging on.
fn desk_select(materialized: bool, mode: ExecMode, t: u32) -> (EngineReport, Vec<LogRecord>, Collected) {
    let mut cfg = MnmsConfig::desk(16, 4, 2);
    cfg.exec_mode = mode;
    cfg.threads_per_node = t;
    let mut eng = Engine::new(cfg).unwrap();
    eng.set_logging(true);
    let rel = select_rel(2_000, 60, 8, materialized);
    let rid = eng.load_relation(rel.clone(), &Placement::new(2_000, 16, 3).unwrap()).unwrap();
    let scan = scan_program(&mut eng, rid, rel.select_value(0).unwrap(), 0);
    let host = eng.add_program(vec![Instruction::Spawn { program: scan, target: SpawnTarget::Broadcast }]);
    eng.spawn(host, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    (eng.report(), eng.event_log().to_vec(), eng.collected().clone())
}

#[test]
fn runs_are_deterministic() {
    let a = desk_select(true, ExecMode::Batched, 1);
    let b = desk_select(true, ExecMode::Batched, 1);
    assert_eq!(a, b);
}

#[test]
fn log_resums_to_report() {
    for mode in [ExecMode::Batched, ExecMode::PerRow] {
        let (r, log, _) = desk_select(false, mode, 1);
        let intra: u64 = log.iter().map(|l| l.bytes_intra).sum();
        let payload: u64 = log.iter().map(|l| l.bytes_fabric_payload).sum();
        let link: u64 = log.iter().map(|l| l.bytes_fabric_link).sum();
        assert_eq!((intra, payload, link), (r.traffic.intra_node_bytes, r.traffic.fabric_payload_bytes, r.traffic.fabric_link_bytes));
    }
}

#[test]
fn log_is_causal() {
    let (_, log, _) = desk_select(true, ExecMode::PerRow, 2);
    assert!(log.windows(2).all(|w| w[0].time_ns <= w[1].time_ns));
}

#[test]
fn modes_agree_on_bytes_and_matches() {
    let (a, _, ca) = desk_select(true, ExecMode::Batched, 1);
    let (b, _, cb) = desk_select(true, ExecMode::PerRow, 1);
    let (m, _, _) = desk_select(false, ExecMode::Batched, 1);
    assert_eq!(a.traffic.match_count, 60);
    assert_eq!(b.traffic.match_count, 60);
    assert_eq!(m.traffic.match_count, 60);
    assert_eq!(a.traffic.intra_node_bytes, b.traffic.intra_node_bytes);
    assert_eq!(a.traffic.fabric_payload_bytes, b.traffic.fabric_payload_bytes);
    assert_eq!(a.traffic.near_memory_bytes(), m.traffic.near_memory_bytes());
    let (mut ra, mut rb) = (ca.rows, cb.rows);
    ra.sort_unstable();
    rb.sort_unstable();
    assert_eq!(ra, rb);
}

#[test]
fn event_log_csv_has_header() {
    let mut eng = Engine::new(MnmsConfig::desk(16, 4, 2)).unwrap();
    eng.set_logging(true);
    let p = eng.add_program(vec![Instruction::Migrate { dst: 5 }, Instruction::Halt]);
    eng.spawn(p, 0, 0.0).unwrap();
    eng.run_to_completion().unwrap();
    let mut out = Vec::new();
    eng.write_event_log(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(EVENT_LOG_HEADER));
    assert_eq!(lines.next(), Some("0,0,0,MIGRATE,0,16,64"));
    assert_eq!(lines.next(), Some("200,5,0,HALT,0,0,0"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn invariants_hold_for_random_selects(
        rows in 0u64..600,
        frac in 0.0f64..1.0,
        t in 1u32..4,
        per_row in any::<bool>(),
        materialized in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut cfg = MnmsConfig::desk(16, 4, 2);
        cfg.threads_per_node = t;
        cfg.exec_mode = if per_row { ExecMode::PerRow } else { ExecMode::Batched };
        let mut eng = Engine::new(cfg).unwrap();
        eng.set_logging(true);
        let planted = (frac * rows as f64) as u64;
        let spec = RelationSpec::single("t", rows, 32, AttributeSpec::new("a", 8), seed).materialized(materialized);
        let rel = Arc::new(make_relation(spec, "a", SelectivitySpec::exact(planted, rows)).unwrap());
        let rid = eng.load_relation(rel.clone(), &Placement::new(rows, 16, seed).unwrap()).unwrap();
        let scan = scan_program(&mut eng, rid, rel.select_value(0).unwrap(), 0);
        let host = eng.add_program(vec![Instruction::Spawn { program: scan, target: SpawnTarget::Broadcast }]);
        eng.spawn(host, 0, 0.0).unwrap();
        eng.run_to_completion().unwrap();
        let r = eng.report();
        prop_assert_eq!(r.live, 0);
        prop_assert_eq!(r.spawned, r.retired);
        prop_assert_eq!(r.traffic.match_count, planted);
        prop_assert!(r.traffic.fabric_link_bytes >= r.traffic.fabric_payload_bytes);
        prop_assert!(r.max_node_concurrency <= t);
        prop_assert_eq!(r.traffic.intra_node_bytes >= rows * 8, true);
        let log = eng.event_log();
        prop_assert!(log.windows(2).all(|w| w[0].time_ns <= w[1].time_ns));
        let last = log.iter().map(|l| l.time_ns).fold(0.0, f64::max);
        prop_assert!(r.traffic.response_ms * 1e6 >= last);
    }
}
