//! Scenarios, sweeps, CSV output, oracle verification and reporting.

mod catalog;
mod config;
mod report;
mod verify;

pub use catalog::{catalog, catalog_ids, catalog_scenario, CatalogEntry};
pub use config::{accepted_keys, apply_config, parse_config, scenario_from_config};
pub use report::{parse_csv, report, write_report, Report};
pub use verify::{verify, verify_join_case, verify_select_case, CaseVerdict, VerifyReport};

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::baseline::{classical_join, classical_select, ClassicalConfig, JoinStrategy, SelectMode};
use crate::error::{Error, Result};
use crate::fabric::MnmsConfig;
use crate::queries::{mnms_join, mnms_select, JoinOutput, JoinQuery, MnmsJoinStrategy, ResultPayload, RunOptions, SelectQuery};
use crate::relgen::{make_join_pair, make_relation, place_rows, AttributeSpec, RelationSpec, SelectivitySpec};
use crate::traffic::TrafficReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Select,
    Join,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Select => "select",
            QueryKind::Join => "join",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "select" => Some(QueryKind::Select),
            "join" => Some(QueryKind::Join),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Classical,
    Mnms,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Classical => "classical",
            Architecture::Mnms => "mnms",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classical" => Some(Architecture::Classical),
            "mnms" => Some(Architecture::Mnms),
            _ => None,
        }
    }
}

/// Which MNMS bytes the classical host traffic is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    FabricPayload,
    IntraPlusFabric,
}

impl Comparison {
    pub fn name(self) -> &'static str {
        match self {
            Comparison::FabricPayload => "fabric_payload",
            Comparison::IntraPlusFabric => "intra_plus_fabric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fabric_payload" => Some(Comparison::FabricPayload),
            "intra_plus_fabric" => Some(Comparison::IntraPlusFabric),
            _ => None,
        }
    }

    pub fn bytes(self, t: &TrafficReport) -> u64 {
        match self {
            Comparison::FabricPayload => t.fabric_payload_bytes,
            Comparison::IntraPlusFabric => t.near_memory_bytes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub query: QueryKind,
    /// Rows of the select relation, or of each join input.
    pub rows: u64,
    pub row_bytes: u64,
    pub attr_bytes: Vec<u32>,
    pub selectivity: Vec<f64>,
    pub select_mode: SelectMode,
    pub join_strategy: JoinStrategy,
    pub mnms_strategies: Vec<MnmsJoinStrategy>,
    pub result_payload: ResultPayload,
    pub join_output: JoinOutput,
    pub comparison: Comparison,
    pub materialized: bool,
    pub classical: ClassicalConfig,
    pub mnms: MnmsConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(',') {
            return Err(Error::Config(format!("scenario.id `{}` must be non-empty and contain no commas", self.id)));
        }
        if self.attr_bytes.is_empty() || self.selectivity.is_empty() {
            return Err(Error::Config("sweep.attr_bytes and sweep.selectivity must be non-empty".into()));
        }
        if let Some(&w) = self.attr_bytes.iter().find(|&&w| w == 0 || w as u64 > self.row_bytes) {
            return Err(Error::Config(format!("sweep.attr_bytes value {w} must be in 1..={}", self.row_bytes)));
        }
        if let Some(&f) = self.selectivity.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::InvalidSelectivity(format!("sweep.selectivity value {f} is outside [0, 1]")));
        }
        if self.query == QueryKind::Join && self.mnms_strategies.is_empty() {
            return Err(Error::Config("query.strategies must name at least one strategy".into()));
        }
        self.classical.validate()?;
        self.mnms.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub architecture: Architecture,
    pub query: QueryKind,
    pub n_rows: u64,
    pub row_bytes: u64,
    pub attr_bytes: u32,
    pub selectivity: f64,
    pub strategy: String,
    pub host_ram_bytes: u64,
    pub intra_node_bytes: u64,
    pub fabric_payload_bytes: u64,
    pub fabric_link_bytes: u64,
    pub response_ms: f64,
    pub match_count: u64,
    pub energy_proxy: f64,
    pub ratio_vs_classical: Option<f64>,
}

pub const CSV_HEADER: &str = "scenario_id,architecture,query,n_rows,row_bytes,attr_bytes,selectivity,strategy,\
host_ram_bytes,intra_node_bytes,fabric_payload_bytes,fabric_link_bytes,response_ms,match_count,energy_proxy,\
ratio_vs_classical";

impl ResultRow {
    fn new(sc: &Scenario, arch: Architecture, attr: u32, sel: f64, strategy: &str, t: &TrafficReport) -> Self {
        Self {
            scenario_id: sc.id.clone(),
            architecture: arch,
            query: sc.query,
            n_rows: sc.rows,
            row_bytes: sc.row_bytes,
            attr_bytes: attr,
            selectivity: sel,
            strategy: strategy.to_string(),
            host_ram_bytes: t.host_ram_bytes,
            intra_node_bytes: t.intra_node_bytes,
            fabric_payload_bytes: t.fabric_payload_bytes,
            fabric_link_bytes: t.fabric_link_bytes,
            response_ms: t.response_ms,
            match_count: t.match_count,
            energy_proxy: t.energy_proxy,
            ratio_vs_classical: None,
        }
    }

    pub fn traffic(&self) -> TrafficReport {
        TrafficReport {
            host_ram_bytes: self.host_ram_bytes,
            fabric_payload_bytes: self.fabric_payload_bytes,
            fabric_link_bytes: self.fabric_link_bytes,
            intra_node_bytes: self.intra_node_bytes,
            response_ms: self.response_ms,
            match_count: self.match_count,
            energy_proxy: self.energy_proxy,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario_id,
            self.architecture.name(),
            self.query.name(),
            self.n_rows,
            self.row_bytes,
            self.attr_bytes,
            self.selectivity,
            self.strategy,
            self.host_ram_bytes,
            self.intra_node_bytes,
            self.fabric_payload_bytes,
            self.fabric_link_bytes,
            self.response_ms,
            self.match_count,
            self.energy_proxy,
            self.ratio_vs_classical.map(|r| r.to_string()).unwrap_or_default()
        )
    }
}

/// Classical host traffic over MNMS comparison traffic.
pub fn traffic_ratio(classical_host: u64, mnms_bytes: u64) -> f64 {
    classical_host as f64 / mnms_bytes as f64
}

/// Every (attr, selectivity) cell on both architectures, in the canonical
/// order: attr ascending, then selectivity ascending, classical first.
pub fn run_scenario(sc: &Scenario) -> Result<Vec<ResultRow>> {
    sc.validate()?;
    let mut attrs = sc.attr_bytes.clone();
    attrs.sort_unstable();
    attrs.dedup();
    let mut sels = sc.selectivity.clone();
    sels.sort_by(f64::total_cmp);
    sels.dedup();
    let mut out = Vec::new();
    for &w in &attrs {
        for &f in &sels {
            let cells = match sc.query {
                QueryKind::Select => select_cell(sc, w, f)?,
                QueryKind::Join => join_cell(sc, w, f)?,
            };
            out.extend(cells);
        }
    }
    Ok(out)
}

fn select_cell(sc: &Scenario, w: u32, f: f64) -> Result<Vec<ResultRow>> {
    let attr = AttributeSpec::new("a", w);
    let spec = RelationSpec::single("t", sc.rows, sc.row_bytes, attr.clone(), sc.seed).materialized(sc.materialized);
    let sel = SelectivitySpec::new(f, sc.rows)?;
    let classical = classical_select(&spec, &attr, &sel, sc.select_mode, &sc.classical)?;
    let rel = Arc::new(make_relation(spec, "a", sel)?);
    let placement = place_rows(&rel, sc.mnms.node_count, sc.seed)?;
    let q = SelectQuery::planted(rel, "a", sc.result_payload)?;
    let m = mnms_select(&q, &placement, &sc.mnms)?;
    let c_row = ResultRow::new(sc, Architecture::Classical, w, f, sc.select_mode.name(), &classical);
    let mut m_row = ResultRow::new(sc, Architecture::Mnms, w, f, sc.result_payload.name(), &m.report.traffic);
    m_row.ratio_vs_classical = Some(traffic_ratio(classical.host_ram_bytes, sc.comparison.bytes(&m.report.traffic)));
    Ok(vec![c_row, m_row])
}

fn join_cell(sc: &Scenario, w: u32, f: f64) -> Result<Vec<ResultRow>> {
    let attr = AttributeSpec::new("k", w);
    let rs = RelationSpec::single("r", sc.rows, sc.row_bytes, attr.clone(), sc.seed).materialized(sc.materialized);
    let ss = RelationSpec::single("s", sc.rows, sc.row_bytes, attr.clone(), sc.seed ^ 0x5EED).materialized(sc.materialized);
    let classical = classical_join((&rs, &ss), &attr, f, sc.join_strategy, (false, false), &sc.classical)?;
    let (r, s) = make_join_pair(rs, ss, "k", f)?;
    let (r, s) = (Arc::new(r), Arc::new(s));
    let pr = place_rows(&r, sc.mnms.node_count, sc.seed)?;
    let ps = place_rows(&s, sc.mnms.node_count, sc.seed ^ 0x5EED)?;
    let mut out = vec![ResultRow::new(sc, Architecture::Classical, w, f, sc.join_strategy.name(), &classical)];
    for &strategy in &sc.mnms_strategies {
        let q = JoinQuery { r: r.clone(), s: s.clone(), attribute: "k".into(), strategy, output: sc.join_output };
        let m = mnms_join(&q, (&pr, &ps), &sc.mnms, RunOptions::default())?;
        let mut row = ResultRow::new(sc, Architecture::Mnms, w, f, strategy.name(), &m.report.traffic);
        row.ratio_vs_classical = Some(traffic_ratio(classical.host_ram_bytes, sc.comparison.bytes(&m.report.traffic)));
        out.push(row);
    }
    Ok(out)
}

pub fn write_csv(rows: &[ResultRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

/// Runs each scenario in order and writes all rows to one CSV file.
pub fn sweep(scenarios: &[Scenario], path: &Path) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for sc in scenarios {
        rows.extend(run_scenario(sc)?);
    }
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(rows)
}
