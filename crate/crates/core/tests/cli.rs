use std::path::Path;
use std::process::{Command, Output};

fn mnms(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mnms")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn catalog_lists_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = mnms(&["catalog"], dir.path());
    assert!(out.status.success());
    for id in mnms::harness::catalog_ids() {
        assert!(stdout(&out).contains(id), "{id}");
    }
}

#[test]
fn run_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mnms(&["run", "select-desk"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), mnms::harness::CSV_HEADER);
    // classical and mnms for 3 widths x 3 selectivities
    assert_eq!(text.lines().count(), 1 + 18);
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = mnms(&["sweep", "select-desk", "join-desk", "--out", "s.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mnms(&["report", "s.csv", "--out", "plots"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("ratio_fabric"));
    assert!(std::fs::read_dir(dir.path().join("plots")).unwrap().count() > 0);
}

#[test]
fn config_file_overrides_catalog() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.conf"), "scenario.base = select-desk\nscenario.id = tiny\nsweep.attr_bytes = 8\nsweep.selectivity = 0.5\n").unwrap();
    let out = mnms(&["run", "--config", "c.conf"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.starts_with("tiny,")));
}

#[test]
fn bad_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.conf"), "mnms.nodes = 3\n").unwrap();
    let out = mnms(&["run", "--config", "c.conf"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mnms.node_count"));
    let out = mnms(&["run", "no-such-scenario"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn verify_small_instances() {
    let dir = tempfile::tempdir().unwrap();
    let out = mnms(&["verify", "--n", "500", "--seeds", "3"], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).ends_with("12/12 cases passed\n"));
}
