//! Built-in scenarios.

use super::{Comparison, QueryKind, Scenario};
use crate::baseline::{ClassicalConfig, JoinStrategy, SelectMode};
use crate::error::{Error, Result};
use crate::fabric::MnmsConfig;
use crate::queries::{JoinOutput, MnmsJoinStrategy, ResultPayload};

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
}

const ENTRIES: [CatalogEntry; 5] = [
    CatalogEntry {
        id: "select-paper",
        description: "SELECT over a 1 TB relation of 31.25M rows x 32,000 B on 8,000 nodes; attr 8-1000 B, selectivity 0.1-5%",
    },
    CatalogEntry {
        id: "join-paper",
        description: "JOIN of two 31.25M x 1,000 B relations on 8,000 nodes; attr 8-1000 B, output fraction 1% and 100%",
    },
    CatalogEntry {
        id: "join-btree",
        description: "B-tree JOIN at full scale, 12 threads per node, attr 8 B, output fraction 100%",
    },
    CatalogEntry {
        id: "select-desk",
        description: "materialized SELECT, 10,000 rows x 64 B on 16 nodes",
    },
    CatalogEntry {
        id: "join-desk",
        description: "materialized JOIN, 10,000 rows x 64 B per side on 16 nodes, all MNMS strategies",
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    &ENTRIES
}

pub fn catalog_ids() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.id).collect()
}

const FULL_ROWS: u64 = 31_250_000;
const ATTR_SWEEP: [u32; 4] = [8, 64, 250, 1000];

fn base(id: &str, query: QueryKind) -> Scenario {
    Scenario {
        id: id.to_string(),
        query,
        rows: FULL_ROWS,
        row_bytes: 32_000,
        attr_bytes: ATTR_SWEEP.to_vec(),
        selectivity: vec![0.001, 0.01, 0.05],
        select_mode: SelectMode::FullScan,
        join_strategy: JoinStrategy::Hash,
        mnms_strategies: vec![MnmsJoinStrategy::MigrateAll, MnmsJoinStrategy::IndexAssisted],
        result_payload: ResultPayload::FullRow,
        join_output: JoinOutput::PairRefs,
        comparison: Comparison::FabricPayload,
        materialized: false,
        classical: ClassicalConfig::default(),
        mnms: MnmsConfig::default(),
        seed: 1,
    }
}

pub fn catalog_scenario(id: &str) -> Result<Scenario> {
    let sc = match id {
        "select-paper" => base(id, QueryKind::Select),
        "join-paper" => Scenario { row_bytes: 1_000, selectivity: vec![0.01, 1.0], ..base(id, QueryKind::Join) },
        "join-btree" => {
            let mut mnms = MnmsConfig::default();
            // about ceil(log2 3906) probes share each visit slot
            mnms.threads_per_node = 12;
            Scenario {
                row_bytes: 1_000,
                attr_bytes: vec![8],
                selectivity: vec![1.0],
                mnms_strategies: vec![MnmsJoinStrategy::Btree],
                mnms,
                ..base(id, QueryKind::Join)
            }
        }
        "select-desk" => Scenario {
            rows: 10_000,
            row_bytes: 64,
            attr_bytes: vec![8, 16, 32],
            selectivity: vec![0.001, 0.01, 0.03],
            materialized: true,
            mnms: MnmsConfig::desk(16, 4, 2),
            ..base(id, QueryKind::Select)
        },
        "join-desk" => Scenario {
            rows: 10_000,
            row_bytes: 64,
            attr_bytes: vec![8, 16],
            selectivity: vec![0.01, 1.0],
            mnms_strategies: MnmsJoinStrategy::ALL.to_vec(),
            materialized: true,
            mnms: MnmsConfig::desk(16, 4, 2),
            ..base(id, QueryKind::Join)
        },
        other => {
            return Err(Error::Config(format!(
                "unknown scenario `{other}`; known scenarios: {}",
                catalog_ids().join(", ")
            )))
        }
    };
    Ok(sc)
}
