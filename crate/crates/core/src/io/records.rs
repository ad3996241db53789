//! Benchmark result records, written as JSON lines or CSV with the same
//! columns.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::Algorithm;
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleStatus {
    /// Error measured against an exact value.
    Ok,
    /// Exact value could not be computed within the caps.
    Infeasible,
    /// Oracle disabled by configuration.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub model_id: String,
    pub algorithm: Algorithm,
    pub ibound: Option<usize>,
    pub seed: Option<u64>,
    /// Absent when the run failed or the model has zero mass.
    pub log10_z: Option<f64>,
    pub wall_time_seconds: f64,
    /// `|log10 Z − log10 Ẑ|` against the oracle.
    pub error: Option<f64>,
    pub oracle: OracleStatus,
    /// Fingerprint of the elimination order shared by every algorithm run on
    /// this instance.
    pub order_hash: String,
    pub failure: Option<String>,
}

impl ResultRecord {
    /// Same record with the timing zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> ResultRecord {
        ResultRecord {
            wall_time_seconds: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    JsonLines,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" | "jsonl" => Ok(OutputFormat::JsonLines),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

pub fn write_records<W: Write>(
    out: W,
    records: &[ResultRecord],
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::JsonLines => {
            let mut out = out;
            for r in records {
                let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
                writeln!(out, "{line}")?;
            }
            out.flush()?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultRecord {
        ResultRecord {
            model_id: "grid3x3-d1-s7".into(),
            algorithm: Algorithm::Mbr,
            ibound: Some(2),
            seed: Some(7),
            log10_z: Some(4.25),
            wall_time_seconds: 0.01,
            error: None,
            oracle: OracleStatus::Infeasible,
            order_hash: "00ff".into(),
            failure: None,
        }
    }

    #[test]
    fn json_lines_round_trip() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample(), sample()], OutputFormat::JsonLines).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back: ResultRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, sample());
        assert!(text.contains("\"algorithm\":\"mbr\""));
        assert!(text.contains("\"oracle\":\"infeasible\""));
    }

    #[test]
    fn csv_has_matching_columns() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample()], OutputFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "model_id,algorithm,ibound,seed,log10_z,wall_time_seconds,error,oracle,order_hash,failure"
        );
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let back: ResultRecord = rd.deserialize().next().unwrap().unwrap();
        assert_eq!(back, sample());
    }
}
