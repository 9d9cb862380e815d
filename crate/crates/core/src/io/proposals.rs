//! Proposal JSON-lines: one object per box with fields frame_index, x, y,
//! w, h, score. Records are grouped by frame, and within a frame ordered by
//! descending score then x, y, w, h.

use crate::error::{Error, Result};
use crate::proposal::BoxProposal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalRecord {
    pub frame_index: usize,
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub score: f64,
}

impl ProposalRecord {
    pub fn new(frame_index: usize, b: &BoxProposal) -> Self {
        ProposalRecord { frame_index, x: b.x, y: b.y, w: b.w, h: b.h, score: b.score }
    }

    pub fn to_box(self) -> BoxProposal {
        BoxProposal { x: self.x, y: self.y, w: self.w, h: self.h, score: self.score }
    }

    fn validate(&self) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidValue(format!(
                "proposal record with empty box {}x{}",
                self.w, self.h
            )));
        }
        if !self.score.is_finite() {
            return Err(Error::InvalidValue("proposal score must be finite".into()));
        }
        Ok(())
    }
}

pub fn write_proposals<W: Write>(records: &[ProposalRecord], mut sink: W) -> Result<()> {
    let mut sorted = records.to_vec();
    for r in &sorted {
        r.validate()?;
    }
    sorted.sort_by(|a, b| {
        a.frame_index
            .cmp(&b.frame_index)
            .then(b.score.partial_cmp(&a.score).unwrap())
            .then(a.x.cmp(&b.x))
            .then(a.y.cmp(&b.y))
            .then(a.w.cmp(&b.w))
            .then(a.h.cmp(&b.h))
    });
    for r in &sorted {
        serde_json::to_writer(&mut sink, r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_proposals<R: BufRead>(source: R) -> Result<Vec<ProposalRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ProposalRecord = serde_json::from_str(&line).map_err(|e| {
            Error::UnsupportedFormat(format!("proposal line {}: {e}", lineno + 1))
        })?;
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list_writes_nothing() {
        let mut buf = Vec::new();
        write_proposals(&[], &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn records_emit_in_score_order() {
        let records = vec![
            ProposalRecord { frame_index: 0, x: 5, y: 5, w: 4, h: 4, score: 0.3 },
            ProposalRecord { frame_index: 0, x: 1, y: 1, w: 4, h: 4, score: 0.9 },
        ];
        let mut buf = Vec::new();
        write_proposals(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("0.9"));
        assert!(lines[1].contains("0.3"));
    }

    #[test]
    fn line_round_trips_exact_values() {
        let record = ProposalRecord { frame_index: 7, x: 1, y: 2, w: 3, h: 4, score: 0.5 };
        let mut buf = Vec::new();
        write_proposals(&[record], &mut buf).unwrap();
        let back = read_proposals(buf.as_slice()).unwrap();
        assert_eq!(back, vec![record]);
    }

    #[test]
    fn invalid_box_is_rejected_on_write() {
        let record = ProposalRecord { frame_index: 0, x: 1, y: 2, w: 0, h: 4, score: 0.5 };
        let mut buf = Vec::new();
        assert!(write_proposals(&[record], &mut buf).is_err());
    }
}
