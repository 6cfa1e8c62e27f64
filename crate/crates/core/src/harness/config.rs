//! Flat `section.key = value` scenario files.
//!
//! Lines are `key = value`; `#` starts a comment. `scenario.base` names the
//! catalog scenario the remaining keys modify (default `select-desk`).

use std::str::FromStr;

use super::{catalog_scenario, Comparison, QueryKind, Scenario};
use crate::baseline::{JoinStrategy, SelectMode};
use crate::error::{Error, Result};
use crate::fabric::ExecMode;
use crate::queries::{JoinOutput, MnmsJoinStrategy, ResultPayload};

const KEYS: &[&str] = &[
    "scenario.base",
    "scenario.id",
    "scenario.query",
    "scenario.seed",
    "scenario.materialized",
    "relation.rows",
    "relation.row_bytes",
    "sweep.attr_bytes",
    "sweep.selectivity",
    "query.result_payload",
    "query.join_output",
    "query.strategies",
    "report.comparison",
    "classical.select_mode",
    "classical.join_strategy",
    "classical.cache_line_bytes",
    "classical.round_trip_factor",
    "classical.per_row_visit_ns",
    "classical.row_ref_bytes",
    "classical.host_bandwidth_bytes_per_s",
    "classical.external_sort_passes",
    "classical.host_energy_weight",
    "mnms.node_count",
    "mnms.ffgt_fanout",
    "mnms.ffgt_levels",
    "mnms.threads_per_node",
    "mnms.per_row_scan_ns",
    "mnms.per_hop_ns",
    "mnms.node_mem_bytes",
    "mnms.row_ref_bytes",
    "mnms.hash_seed",
    "mnms.exec_mode",
    "mnms.step_budget",
    "mnms.energy_weight_host",
    "mnms.energy_weight_fabric",
    "mnms.energy_weight_intra_node",
];

pub fn accepted_keys() -> &'static [&'static str] {
    KEYS
}

/// Key/value pairs in file order, with their line numbers.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn scenario_from_config(text: &str) -> Result<Scenario> {
    let pairs = parse_config(text)?;
    let base = pairs.iter().rev().find(|(_, k, _)| k == "scenario.base").map_or("select-desk", |(_, _, v)| v.as_str());
    let mut sc = catalog_scenario(base)?;
    for (_, k, v) in &pairs {
        if k != "scenario.base" {
            apply_config(&mut sc, k, v)?;
        }
    }
    sc.validate()?;
    Ok(sc)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.replace('_', "")
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn choice<T>(key: &str, v: &str, parse: impl Fn(&str) -> Option<T>, accepted: &[&str]) -> Result<T> {
    parse(v).ok_or_else(|| Error::Config(format!("{key}: `{v}` is not one of {}", accepted.join(", "))))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    choice(key, v, |s| s.parse().ok(), &["true", "false"])
}

/// Sets one key on `sc`.
pub fn apply_config(sc: &mut Scenario, key: &str, v: &str) -> Result<()> {
    let m = &mut sc.mnms;
    let c = &mut sc.classical;
    match key {
        "scenario.base" => *sc = catalog_scenario(v)?,
        "scenario.id" => sc.id = v.to_string(),
        "scenario.query" => sc.query = choice(key, v, QueryKind::parse, &["select", "join"])?,
        "scenario.seed" => sc.seed = num(key, v)?,
        "scenario.materialized" => sc.materialized = boolean(key, v)?,
        "relation.rows" => sc.rows = num(key, v)?,
        "relation.row_bytes" => sc.row_bytes = num(key, v)?,
        "sweep.attr_bytes" => sc.attr_bytes = list(key, v)?,
        "sweep.selectivity" => sc.selectivity = list(key, v)?,
        "query.result_payload" => {
            sc.result_payload = choice(key, v, ResultPayload::parse, &["full_row", "row_ref"])?
        }
        "query.join_output" => {
            sc.join_output = choice(key, v, JoinOutput::parse, &["pair_refs", "concatenated_rows"])?
        }
        "query.strategies" => {
            let names: Vec<&str> = MnmsJoinStrategy::ALL.iter().map(|s| s.name()).collect();
            sc.mnms_strategies =
                v.split(',').map(|s| choice(key, s.trim(), MnmsJoinStrategy::parse, &names)).collect::<Result<_>>()?;
        }
        "report.comparison" => {
            sc.comparison = choice(key, v, Comparison::parse, &["fabric_payload", "intra_plus_fabric"])?
        }
        "classical.select_mode" => {
            let names: Vec<&str> = SelectMode::ALL.iter().map(|s| s.name()).collect();
            sc.select_mode = choice(key, v, SelectMode::parse, &names)?;
        }
        "classical.join_strategy" => {
            let names: Vec<&str> = JoinStrategy::ALL.iter().map(|s| s.name()).collect();
            sc.join_strategy = choice(key, v, JoinStrategy::parse, &names)?;
        }
        "classical.cache_line_bytes" => c.cache_line_bytes = num(key, v)?,
        "classical.round_trip_factor" => c.round_trip_factor = num(key, v)?,
        "classical.per_row_visit_ns" => c.per_row_visit_ns = num(key, v)?,
        "classical.row_ref_bytes" => c.row_ref_bytes = num(key, v)?,
        "classical.host_bandwidth_bytes_per_s" => {
            c.host_bandwidth_bytes_per_s = if v == "none" { None } else { Some(num(key, v)?) }
        }
        "classical.external_sort_passes" => c.external_sort_passes = num(key, v)?,
        "classical.host_energy_weight" => c.host_energy_weight = num(key, v)?,
        "mnms.node_count" => m.node_count = num(key, v)?,
        "mnms.ffgt_fanout" => m.ffgt_fanout = num(key, v)?,
        "mnms.ffgt_levels" => m.ffgt_levels = num(key, v)?,
        "mnms.threads_per_node" => m.threads_per_node = num(key, v)?,
        "mnms.per_row_scan_ns" => m.per_row_scan_ns = num(key, v)?,
        "mnms.per_hop_ns" => m.per_hop_ns = num(key, v)?,
        "mnms.node_mem_bytes" => m.node_mem_bytes = num(key, v)?,
        "mnms.row_ref_bytes" => m.row_ref_bytes = num(key, v)?,
        "mnms.hash_seed" => m.hash_seed = num(key, v)?,
        "mnms.exec_mode" => {
            m.exec_mode = choice(
                key,
                v,
                |s| match s {
                    "batched" => Some(ExecMode::Batched),
                    "per_row" => Some(ExecMode::PerRow),
                    _ => None,
                },
                &["batched", "per_row"],
            )?
        }
        "mnms.step_budget" => m.step_budget = num(key, v)?,
        "mnms.energy_weight_host" => m.channel_energy_weights.host = num(key, v)?,
        "mnms.energy_weight_fabric" => m.channel_energy_weights.fabric = num(key, v)?,
        "mnms.energy_weight_intra_node" => m.channel_energy_weights.intra_node = num(key, v)?,
        other => {
            return Err(Error::Config(format!("unknown key `{other}`; accepted keys: {}", KEYS.join(", "))));
        }
    }
    Ok(())
}
