//! Comparison tables and plot-data series from a sweep CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{traffic_ratio, Architecture, QueryKind, ResultRow, CSV_HEADER};
use crate::error::{Error, Result};

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        Some((_, h)) => return Err(Error::Parse { line: 1, message: format!("unexpected header `{h}`") }),
        None => return Err(Error::Parse { line: 1, message: "missing header".into() }),
    }
    let columns: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.trim_end().split(',').collect();
        if f.len() != columns.len() {
            return Err(Error::Parse { line, message: format!("expected {} fields, got {}", columns.len(), f.len()) });
        }
        fn field<T: FromStr>(f: &[&str], columns: &[&str], idx: usize, line: usize) -> Result<T> {
            f[idx].parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: cannot parse `{}`", columns[idx], f[idx]),
            })
        }
        let bad = |idx: usize| Error::Parse { line, message: format!("column {}: unknown value `{}`", columns[idx], f[idx]) };
        rows.push(ResultRow {
            scenario_id: f[0].to_string(),
            architecture: Architecture::parse(f[1]).ok_or_else(|| bad(1))?,
            query: QueryKind::parse(f[2]).ok_or_else(|| bad(2))?,
            n_rows: field(&f, &columns, 3, line)?,
            row_bytes: field(&f, &columns, 4, line)?,
            attr_bytes: field(&f, &columns, 5, line)?,
            selectivity: field(&f, &columns, 6, line)?,
            strategy: f[7].to_string(),
            host_ram_bytes: field(&f, &columns, 8, line)?,
            intra_node_bytes: field(&f, &columns, 9, line)?,
            fabric_payload_bytes: field(&f, &columns, 10, line)?,
            fabric_link_bytes: field(&f, &columns, 11, line)?,
            response_ms: field(&f, &columns, 12, line)?,
            match_count: field(&f, &columns, 13, line)?,
            energy_proxy: field(&f, &columns, 14, line)?,
            ratio_vs_classical: if f[15].is_empty() { None } else { Some(field(&f, &columns, 15, line)?) },
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub table: String,
    /// File name and contents of each plot-data series.
    pub plots: Vec<(String, String)>,
}

fn mb(bytes: u64) -> f64 {
    bytes as f64 / 1e6
}

fn series_traffic(r: &ResultRow) -> u64 {
    match r.architecture {
        Architecture::Classical => r.host_ram_bytes,
        Architecture::Mnms => r.fabric_payload_bytes + r.intra_node_bytes,
    }
}

pub fn report(rows: &[ResultRow]) -> Report {
    if rows.is_empty() {
        return Report::default();
    }
    let key = |r: &ResultRow| (r.scenario_id.clone(), r.attr_bytes, r.selectivity.to_bits());
    let classical: BTreeMap<_, &ResultRow> =
        rows.iter().filter(|r| r.architecture == Architecture::Classical).map(|r| (key(r), r)).collect();

    let mut t = String::new();
    writeln!(t, "traffic in MB (10^6 bytes); classical traffic = host_ram_bytes;").unwrap();
    writeln!(t, "ratio_fabric = classical / mnms fabric_payload_bytes; ratio_near = classical / (mnms intra_node_bytes + fabric_payload_bytes)").unwrap();
    writeln!(
        t,
        "{:<14} {:>6} {:>8} {:<15} {:>14} {:>14} {:>14} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "scenario", "attr_B", "sel", "strategy", "classical_MB", "fabric_MB", "near_MB", "ratio_fabric", "ratio_near",
        "classical_ms", "mnms_ms", "speedup"
    )
    .unwrap();
    for m in rows.iter().filter(|r| r.architecture == Architecture::Mnms) {
        let Some(c) = classical.get(&key(m)) else { continue };
        let near = m.fabric_payload_bytes + m.intra_node_bytes;
        writeln!(
            t,
            "{:<14} {:>6} {:>8} {:<15} {:>14.3} {:>14.3} {:>14.3} {:>12.1} {:>12.1} {:>12.3} {:>12.4} {:>12.0}",
            m.scenario_id,
            m.attr_bytes,
            m.selectivity,
            m.strategy,
            mb(c.host_ram_bytes),
            mb(m.fabric_payload_bytes),
            mb(near),
            traffic_ratio(c.host_ram_bytes, m.fabric_payload_bytes),
            traffic_ratio(c.host_ram_bytes, near),
            c.response_ms,
            m.response_ms,
            c.response_ms / m.response_ms
        )
        .unwrap();
    }

    // one series per (scenario, architecture, strategy) and fixed other axis
    let mut by_attr: BTreeMap<String, Vec<(u32, u64)>> = BTreeMap::new();
    let mut by_sel: BTreeMap<String, Vec<(f64, u64)>> = BTreeMap::new();
    for r in rows {
        let stem = format!("{}.{}-{}", r.scenario_id, r.architecture.name(), r.strategy);
        by_attr.entry(format!("{stem}.attr.sel{}.dat", r.selectivity)).or_default().push((r.attr_bytes, series_traffic(r)));
        by_sel.entry(format!("{stem}.selectivity.attr{}.dat", r.attr_bytes)).or_default().push((r.selectivity, series_traffic(r)));
    }
    let mut plots = Vec::new();
    for (name, pts) in by_attr {
        let body: String = pts.iter().map(|(x, y)| format!("{x} {y}\n")).collect();
        plots.push((name, format!("# attr_bytes traffic_bytes\n{body}")));
    }
    for (name, pts) in by_sel {
        let body: String = pts.iter().map(|(x, y)| format!("{x} {y}\n")).collect();
        plots.push((name, format!("# selectivity traffic_bytes\n{body}")));
    }
    Report { table: t, plots }
}

/// Reads `csv`, writes the plot-data files into `out_dir`, and returns the
/// report.
pub fn write_report(csv: &Path, out_dir: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::Io(format!("{}: {e}", csv.display())))?;
    let rep = report(&parse_csv(&text)?);
    if !rep.plots.is_empty() {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
        for (name, body) in &rep.plots {
            let p = out_dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        }
    }
    Ok(rep)
}
