//! JSON-lines trace files: a header, one line per record, and a footer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{check_schema, to_json};
use crate::steppers::{RecordEntry, StopReason};

pub const TRACE_SCHEMA: &str = "trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub objective: String,
    pub rule: String,
    pub params: serde_json::Value,
    pub seed: u64,
    /// Damping mode of the continuous rule, `null` for the discrete rules.
    pub mode: Option<String>,
    /// Complete effective configuration.
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub stop_reason: StopReason,
    pub terminal_class: Option<String>,
    #[serde(default)]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub records: Vec<RecordEntry>,
    pub footer: TraceFooter,
}

impl TraceFile {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = to_json(&self.header)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&to_json(r)?);
            out.push('\n');
        }
        out.push_str(&to_json(&self.footer)?);
        out.push('\n');
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() < 2 {
            return Err(Error::Json("trace needs a header and a footer line".into()));
        }
        let head: serde_json::Value = serde_json::from_str(lines[0])?;
        check_schema(&head, TRACE_SCHEMA)?;
        let header: TraceHeader = serde_json::from_value(head)?;
        let records = lines[1..lines.len() - 1]
            .iter()
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect::<Result<_>>()?;
        let footer = serde_json::from_str(lines[lines.len() - 1])?;
        Ok(Self {
            header,
            records,
            footer,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceFile {
        TraceFile {
            header: TraceHeader {
                schema: TRACE_SCHEMA.into(),
                objective: "double_well".into(),
                rule: "backtracking".into(),
                params: serde_json::json!({"delta0": 1.0}),
                seed: 9,
                mode: None,
                config: [("rule.name".to_string(), "backtracking".to_string())].into_iter().collect(),
            },
            records: vec![
                RecordEntry {
                    n: 0,
                    x: vec![0.1, -0.3],
                    f: 0.04,
                    grad_norm: 0.5,
                    step: Some(1.0),
                    backtracks: 0,
                },
                RecordEntry {
                    n: 1,
                    x: vec![1.0, 0.0],
                    f: -0.25,
                    grad_norm: 0.0,
                    step: None,
                    backtracks: 0,
                },
            ],
            footer: TraceFooter {
                stop_reason: StopReason::GradientTolerance,
                terminal_class: Some("LocalMinimumLike".into()),
                detail: None,
            },
        }
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let text = t.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().last().unwrap().contains("\"stop_reason\":\"GradientTolerance\""));
        assert_eq!(TraceFile::parse(&text).unwrap(), t);
    }

    #[test]
    fn unknown_schema_rejected() {
        let text = sample().to_jsonl().unwrap().replacen("trace/1", "trace/7", 1);
        assert!(matches!(TraceFile::parse(&text), Err(Error::Schema { .. })));
        assert!(TraceFile::parse("").is_err());
    }
}
