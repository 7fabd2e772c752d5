//! File formats: model JSON, dataset CSV, NAP JSON and query JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::nap::{Nap, NapFile};
use crate::network::{Layer, Network};
use crate::verifier::RobustnessQuery;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl From<&Network> for ModelFile {
    fn from(net: &Network) -> Self {
        Self {
            input_dim: net.input_dim(),
            layers: net.layers().to_vec(),
        }
    }
}

pub fn parse_model(text: &str) -> Result<Network> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("model: {e}")))?;
    Network::new(file.input_dim, file.layers)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    parse_model(&fs::read_to_string(path)?)
}

pub fn model_to_json(net: &Network) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from(net))?)
}

/// Reads CSV with header `x0,...,x{d-1},label`.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let d = header
        .len()
        .checked_sub(1)
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::Parse("dataset header needs at least one input column and a label".into()))?;
    for (i, name) in header.iter().enumerate() {
        let expected = if i == d { "label".to_string() } else { format!("x{i}") };
        if name != expected {
            return Err(Error::Parse(format!(
                "dataset column {i} is {name:?}, expected {expected:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::Parse(format!("dataset row {}: {what}", line + 1));
        let x = (0..d)
            .map(|i| {
                let v: f64 = record[i].parse().map_err(|_| bad(&format!("x{i} is not a number")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad(&format!("x{i} is not finite")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = record[d].parse().map_err(|_| bad("label is not a class id"))?;
        rows.push(Sample { x, label });
    }
    Dataset::new(rows)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let d = data.input_dim().unwrap_or(0);
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for row in data.rows() {
        let mut rec: Vec<String> = row.x.iter().map(|v| v.to_string()).collect();
        rec.push(row.label.to_string());
        writer.write_record(&rec)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn load_nap(path: impl AsRef<Path>) -> Result<Nap> {
    fs::read_to_string(path)?.parse::<NapFile>()?.try_into()
}

/// Compact single-line JSON with a trailing newline.
pub fn nap_to_json(nap: &Nap) -> Result<String> {
    Ok(serde_json::to_string(&NapFile::from(nap))? + "\n")
}

pub fn parse_query(text: &str) -> Result<RobustnessQuery> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("query: {e}")))
}

pub fn load_query(path: impl AsRef<Path>) -> Result<RobustnessQuery> {
    parse_query(&fs::read_to_string(path)?)
}
