//! Replay fixtures: one JSON record per line, `{"job_id": ..., "raw_text": ...}`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub job_id: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayFixture {
    responses: HashMap<String, String>,
}

impl ReplayFixture {
    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        ReplayFixture {
            responses: records.into_iter().map(|r| (r.job_id, r.raw_text)).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line).map_err(|e| {
                GatewayError::Fixture(format!("line {}: {e}", n + 1))
            })?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, job_id: &str) -> Option<&str> {
        self.responses.get(job_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

pub fn write_fixture<W: Write>(out: &mut W, records: &[FixtureRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trip() {
        let records = vec![
            FixtureRecord { job_id: "a".into(), raw_text: "7".into() },
            FixtureRecord { job_id: "b".into(), raw_text: "line\nbreak \"quoted\"".into() },
        ];
        let mut buf = Vec::new();
        write_fixture(&mut buf, &records).unwrap();
        let fixture = ReplayFixture::parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(fixture.len(), 2);
        assert_eq!(fixture.get("b"), Some("line\nbreak \"quoted\""));
        assert!(ReplayFixture::parse("{not json}").is_err());
    }
}
