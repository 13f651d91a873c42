//! File formats: JSON network documents and CSV balance-sheet imports.
//!
//! The network document is strict: unknown fields are rejected and every
//! shape is validated against the declared `n` and `m`. Quantities are
//! decimal `f64`.

use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BalanceSheetAggregates, MultiLayerNetwork};

pub const NETWORK_SCHEMA_VERSION: u32 = 1;

/// On-disk network document. `liabilities[i][j][k]` is what firm `i`
/// (1-based in the docs, row `i` here) owes node `j` in asset `k`; node
/// column 0 is the societal node.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    pub liabilities: Vec<Vec<Vec<f64>>>,
    pub endowments: Vec<Vec<f64>>,
}

impl NetworkFile {
    pub fn from_network(net: &MultiLayerNetwork<f64>) -> Self {
        let n = net.n_firms();
        let m = net.n_assets();
        let liabilities = (0..n)
            .map(|i| {
                (0..=n)
                    .map(|j| (0..m).map(|k| net.liability(i, j, k)).collect())
                    .collect()
            })
            .collect();
        let endowments = (0..n)
            .map(|i| (0..m).map(|k| net.endowment(i, k)).collect())
            .collect();
        Self {
            schema_version: NETWORK_SCHEMA_VERSION,
            n,
            m,
            liabilities,
            endowments,
        }
    }

    pub fn into_network(self) -> Result<MultiLayerNetwork<f64>> {
        if self.schema_version != NETWORK_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported network schema_version {}, expected {}",
                self.schema_version, NETWORK_SCHEMA_VERSION
            )));
        }
        let (n, m) = (self.n, self.m);
        if self.liabilities.len() != n {
            return Err(Error::Parse(format!(
                "liabilities has {} firm rows, expected n = {n}",
                self.liabilities.len()
            )));
        }
        if self.endowments.len() != n {
            return Err(Error::Parse(format!(
                "endowments has {} rows, expected n = {n}",
                self.endowments.len()
            )));
        }
        let mut liabilities = Array3::zeros((n, n + 1, m));
        for (i, row) in self.liabilities.iter().enumerate() {
            if row.len() != n + 1 {
                return Err(Error::Parse(format!(
                    "liabilities[{i}] has {} node entries, expected n + 1 = {}",
                    row.len(),
                    n + 1
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                if cell.len() != m {
                    return Err(Error::Parse(format!(
                        "liabilities[{i}][{j}] has {} asset entries, expected m = {m}",
                        cell.len()
                    )));
                }
                for (k, &v) in cell.iter().enumerate() {
                    liabilities[[i, j, k]] = v;
                }
            }
        }
        let mut endowments = Array2::zeros((n, m));
        for (i, row) in self.endowments.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Parse(format!(
                    "endowments[{i}] has {} asset entries, expected m = {m}",
                    row.len()
                )));
            }
            for (k, &v) in row.iter().enumerate() {
                endowments[[i, k]] = v;
            }
        }
        MultiLayerNetwork::new(liabilities, endowments)
    }
}

pub fn load_network(path: &Path) -> Result<MultiLayerNetwork<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: NetworkFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    file.into_network()
}

pub fn save_network(net: &MultiLayerNetwork<f64>, path: &Path) -> Result<()> {
    let file = NetworkFile::from_network(net);
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Aggregates CSV: header `firm,total_assets,capital,interbank_liabilities`,
/// one row per firm, row order defines the firm indices.
pub fn load_aggregates_csv(path: &Path) -> Result<(Vec<String>, BalanceSheetAggregates<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let expected = ["firm", "total_assets", "capital", "interbank_liabilities"];
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(Error::Parse(format!(
            "aggregates CSV header {actual:?} does not match {expected:?}"
        )));
    }
    let mut names = Vec::new();
    let mut aggregates = BalanceSheetAggregates {
        total_assets: Vec::new(),
        capital: Vec::new(),
        interbank_liabilities: Vec::new(),
    };
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let parse = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {idx}", line + 2)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
        };
        names.push(record.get(0).unwrap_or_default().to_string());
        aggregates.total_assets.push(parse(1)?);
        aggregates.capital.push(parse(2)?);
        aggregates.interbank_liabilities.push(parse(3)?);
    }
    Ok((names, aggregates))
}

/// Headerless square CSV of interbank liabilities, `n` rows by `n` columns.
pub fn load_square_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|cell| cell.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("liabilities CSV is empty".into()));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!(
            "liabilities CSV is not square: expected {n} columns in every row"
        )));
    }
    let mut matrix = Array2::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            matrix[[i, j]] = v;
        }
    }
    Ok(matrix)
}
