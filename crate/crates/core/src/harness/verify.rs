//! Simulator results checked against the brute-force oracle on small
//! materialized instances.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::QueryKind;
use crate::error::{Error, Result};
use crate::fabric::MnmsConfig;
use crate::queries::{
    mnms_join, mnms_select, reference_equijoin, reference_select, JoinOutput, JoinQuery, MnmsJoinStrategy,
    ResultPayload, RunOptions, SelectQuery, ORACLE_BUDGET,
};
use crate::relgen::{make_join_pair, make_relation, place_rows, AttributeSpec, RelationSpec, SelectivitySpec};

const ROW_BYTES: u64 = 64;
const ATTR_BYTES: u32 = 8;
const SELECT_FRACTION: f64 = 0.03;
const JOIN_FRACTION: f64 = 0.01;

fn machine() -> MnmsConfig {
    MnmsConfig::desk(16, 4, 2)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseVerdict {
    pub seed: u64,
    pub query: QueryKind,
    pub strategy: String,
    pub expected: usize,
    pub actual: usize,
    /// Smallest element present in only one of the two result sets.
    pub first_mismatch: Option<String>,
}

impl CaseVerdict {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

impl fmt::Display for CaseVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seed {} {} {}: ", self.seed, self.query.name(), self.strategy)?;
        match &self.first_mismatch {
            None => write!(f, "pass ({} results)", self.expected),
            Some(m) => write!(f, "FAIL (oracle {}, simulator {}; first mismatch {m})", self.expected, self.actual),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub cases: Vec<CaseVerdict>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.cases.iter().filter(|c| c.passed()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.cases.len()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.cases {
            writeln!(f, "{c}")?;
        }
        write!(f, "{}/{} cases passed", self.passed(), self.cases.len())
    }
}

fn compare<T: Ord + Clone + fmt::Debug>(expected: &BTreeSet<T>, actual: &BTreeSet<T>) -> Option<String> {
    let missing = expected.difference(actual).next();
    let extra = actual.difference(expected).next();
    match (missing, extra) {
        (None, None) => None,
        (Some(m), None) => Some(format!("{m:?} missing from simulator")),
        (None, Some(e)) => Some(format!("{e:?} not in oracle")),
        (Some(m), Some(e)) if m <= e => Some(format!("{m:?} missing from simulator")),
        (_, Some(e)) => Some(format!("{e:?} not in oracle")),
    }
}

/// One select instance; `lost_row` drops a row from the placement to
/// exercise the failure path.
pub fn verify_select_case(n: u64, seed: u64, lost_row: Option<u64>) -> Result<CaseVerdict> {
    let spec = RelationSpec::single("t", n, ROW_BYTES, AttributeSpec::new("a", ATTR_BYTES), seed).materialized(true);
    let rel = Arc::new(make_relation(spec, "a", SelectivitySpec::new(SELECT_FRACTION, n)?)?);
    let cfg = machine();
    let mut placement = place_rows(&rel, cfg.node_count, seed)?;
    if let Some(r) = lost_row {
        placement = placement.with_lost_row(r);
    }
    let q = SelectQuery::planted(rel.clone(), "a", ResultPayload::RowRef)?;
    let expected = reference_select(&rel, "a", &q.value)?;
    let actual = mnms_select(&q, &placement, &cfg)?.rows.unwrap_or_default();
    Ok(CaseVerdict {
        seed,
        query: QueryKind::Select,
        strategy: "broadcast_scan".into(),
        expected: expected.len(),
        actual: actual.len(),
        first_mismatch: compare(&expected, &actual),
    })
}

/// One join instance checked under every MNMS strategy.
pub fn verify_join_case(n: u64, seed: u64) -> Result<Vec<CaseVerdict>> {
    let needed = n as u128 * n as u128;
    if needed > ORACLE_BUDGET {
        return Err(Error::OracleBudget { needed, budget: ORACLE_BUDGET });
    }
    let attr = AttributeSpec::new("k", ATTR_BYTES);
    let rs = RelationSpec::single("r", n, ROW_BYTES, attr.clone(), seed).materialized(true);
    let ss = RelationSpec::single("s", n, ROW_BYTES, attr, seed ^ 0x5EED).materialized(true);
    let (r, s) = make_join_pair(rs, ss, "k", JOIN_FRACTION)?;
    let (r, s) = (Arc::new(r), Arc::new(s));
    let expected = reference_equijoin(&r, &s, "k")?;
    let cfg = machine();
    let pr = place_rows(&r, cfg.node_count, seed)?;
    let ps = place_rows(&s, cfg.node_count, seed ^ 0x5EED)?;
    MnmsJoinStrategy::ALL
        .iter()
        .map(|&strategy| {
            let q = JoinQuery { r: r.clone(), s: s.clone(), attribute: "k".into(), strategy, output: JoinOutput::PairRefs };
            let actual = mnms_join(&q, (&pr, &ps), &cfg, RunOptions::default())?.pairs.unwrap_or_default();
            Ok(CaseVerdict {
                seed,
                query: QueryKind::Join,
                strategy: strategy.name().into(),
                expected: expected.len(),
                actual: actual.len(),
                first_mismatch: compare(&expected, &actual),
            })
        })
        .collect()
}

/// Checks every seed for the given query kind, or both kinds when `None`.
pub fn verify(n: u64, seeds: &[u64], kind: Option<QueryKind>) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    for &seed in seeds {
        if kind != Some(QueryKind::Join) {
            report.cases.push(verify_select_case(n, seed, None)?);
        }
        if kind != Some(QueryKind::Select) {
            report.cases.extend(verify_join_case(n, seed)?);
        }
    }
    Ok(report)
}
