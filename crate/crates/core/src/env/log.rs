use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One realized binary decision. Slots are 1-based; SFC and VNF indices 0-based.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "var", rename_all = "lowercase", deny_unknown_fields)]
pub enum Record {
    /// VNF `m` of SFC `k` starts processing on `node` in slot `t`.
    X { k: usize, m: usize, node: usize, t: usize, value: u8 },
    /// SFC `k` is present at `node` in slot `t` (processing or stored).
    Y { k: usize, node: usize, t: usize, value: u8 },
    /// SFC `k` uses communication link `link` in slot `t`.
    Z { k: usize, link: [usize; 2], t: usize, value: u8 },
    /// SFC `k` is held on `node` across the storage link out of slot `t`.
    Rho { k: usize, node: usize, t: usize, value: u8 },
}

impl Record {
    pub fn x(k: usize, m: usize, node: usize, t: usize) -> Self {
        Record::X { k, m, node, t, value: 1 }
    }

    pub fn y(k: usize, node: usize, t: usize) -> Self {
        Record::Y { k, node, t, value: 1 }
    }

    pub fn z(k: usize, from: usize, to: usize, t: usize) -> Self {
        Record::Z { k, link: [from, to], t, value: 1 }
    }

    pub fn rho(k: usize, node: usize, t: usize) -> Self {
        Record::Rho { k, node, t, value: 1 }
    }

    pub fn sfc(&self) -> usize {
        match self {
            Record::X { k, .. } | Record::Y { k, .. } | Record::Z { k, .. } | Record::Rho { k, .. } => *k,
        }
    }

    pub fn slot(&self) -> usize {
        match self {
            Record::X { t, .. } | Record::Y { t, .. } | Record::Z { t, .. } | Record::Rho { t, .. } => *t,
        }
    }

    pub fn value(&self) -> u8 {
        match self {
            Record::X { value, .. } | Record::Y { value, .. } | Record::Z { value, .. } | Record::Rho { value, .. } => *value,
        }
    }
}

/// Realized decisions of one episode in emission order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleLog {
    pub records: Vec<Record>,
}

impl ScheduleLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Removes the first record equal to `r`; returns whether one was found.
    pub fn remove(&mut self, r: &Record) -> bool {
        match self.records.iter().position(|x| x == r) {
            Some(i) => {
                self.records.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn for_sfc(&self, k: usize) -> impl Iterator<Item = &Record> + '_ {
        self.records.iter().filter(move |r| r.sfc() == k)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| Error::MalformedLog(format!("line {}: {e}", i + 1)))?;
            if rec.value() > 1 {
                return Err(Error::MalformedLog(format!("line {}: value must be 0 or 1", i + 1)));
            }
            records.push(rec);
        }
        Ok(ScheduleLog { records })
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        Self::read_jsonl(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_is_exact() {
        let mut log = ScheduleLog::new();
        log.push(Record::x(0, 1, 3, 2));
        log.push(Record::y(0, 3, 2));
        log.push(Record::z(1, 0, 2, 1));
        log.push(Record::rho(2, 4, 5));
        let text = log.to_jsonl();
        assert!(text.lines().next().unwrap().starts_with(r#"{"var":"x","k":0,"m":1,"node":3,"t":2,"value":1}"#));
        assert!(text.contains(r#"{"var":"z","k":1,"link":[0,2],"t":1,"value":1}"#));
        assert!(text.contains(r#""var":"rho""#));
        let back = ScheduleLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ScheduleLog::from_jsonl(r#"{"var":"q","k":0}"#).is_err());
        assert!(ScheduleLog::from_jsonl(r#"{"var":"y","k":0,"node":1,"t":1,"value":2}"#).is_err());
        assert!(ScheduleLog::from_jsonl("").unwrap().is_empty());
    }
}
