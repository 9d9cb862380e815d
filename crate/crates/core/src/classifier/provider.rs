//! Action probability providers: the built-in descriptor + linear model, or
//! stored per-sequence distributions. Provider failures surface as typed
//! errors, never as a fabricated distribution.

use super::{classify, describe_crop, ActionDistribution, LabelTable, LinearActionModel};
use crate::error::{Error, Result};
use crate::flow::{estimate_flow, FlowField, FlowParams};
use crate::frame::FrameSequence;
use crate::proposal::{crop_and_resize, stack_flow_crops, BoxProposal};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Produces P(A) for a sequence given one action-region box per frame.
/// `key` identifies the sequence for file-backed providers.
pub trait ActionProvider {
    fn action_probabilities(
        &self,
        key: &str,
        sequence: &FrameSequence,
        boxes: &[BoxProposal],
    ) -> Result<ActionDistribution>;

    fn labels(&self) -> &LabelTable;
}

/// Built-in provider: per-frame descriptors classified by the linear model,
/// averaged into a per-sequence distribution.
pub struct BuiltinActionProvider {
    model: LinearActionModel,
    flow_params: FlowParams,
    crop_side: usize,
    stack_depth: usize,
}

impl BuiltinActionProvider {
    pub fn new(
        model: LinearActionModel,
        flow_params: FlowParams,
        crop_side: usize,
        stack_depth: usize,
    ) -> Self {
        BuiltinActionProvider { model, flow_params, crop_side, stack_depth }
    }

    pub fn model(&self) -> &LinearActionModel {
        &self.model
    }

    /// Same computation with caller-provided forward flows (one per
    /// consecutive frame pair), so pipelines can reuse cached flow fields.
    pub fn probabilities_with_flows(
        &self,
        sequence: &FrameSequence,
        flows: &[FlowField],
        boxes: &[BoxProposal],
    ) -> Result<ActionDistribution> {
        sequence.require_pairs()?;
        if boxes.len() != sequence.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} boxes for {} frames",
                boxes.len(),
                sequence.len()
            )));
        }
        if flows.len() != sequence.len() - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} flows for {} frames",
                flows.len(),
                sequence.len()
            )));
        }
        let frames = sequence.frames();
        let depth = self.stack_depth.min(flows.len()).max(1);
        let mut per_frame = Vec::new();
        for t in 0..=flows.len() - depth {
            let crop = crop_and_resize(&frames[t], &boxes[t], self.crop_side)?;
            let stack = stack_flow_crops(&flows[t..], &boxes[t], depth, self.crop_side)?;
            let descriptor = describe_crop(&crop, &stack)?;
            per_frame.push(classify(&descriptor, &self.model)?);
        }
        ActionDistribution::mean(&per_frame)
    }
}

impl ActionProvider for BuiltinActionProvider {
    fn action_probabilities(
        &self,
        _key: &str,
        sequence: &FrameSequence,
        boxes: &[BoxProposal],
    ) -> Result<ActionDistribution> {
        sequence.require_pairs()?;
        let frames = sequence.frames();
        let flows: Vec<FlowField> = frames
            .windows(2)
            .map(|pair| estimate_flow(&pair[0], &pair[1], &self.flow_params))
            .collect::<Result<_>>()?;
        self.probabilities_with_flows(sequence, &flows, boxes)
    }

    fn labels(&self) -> &LabelTable {
        &self.model.labels
    }
}

/// On-disk distribution: `{"labels": [...], "probabilities": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredDistribution {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl StoredDistribution {
    pub fn validate_against(&self, table: &LabelTable) -> Result<ActionDistribution> {
        if self.labels != table.names() {
            return Err(Error::Provider(format!(
                "stored labels {:?} do not match configured vocabulary {:?}",
                self.labels,
                table.names()
            )));
        }
        if self.probabilities.len() != self.labels.len() {
            return Err(Error::Provider("stored distribution length mismatch".into()));
        }
        ActionDistribution::new(self.probabilities.clone())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = std::fs::File::open(path)?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::Provider(format!("{}: {e}", path.display())))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }
}

/// File-backed provider: looks up `<dir>/<key>.action.json`.
pub struct FileActionProvider {
    dir: PathBuf,
    labels: LabelTable,
}

impl FileActionProvider {
    pub fn new(dir: PathBuf, labels: LabelTable) -> Self {
        FileActionProvider { dir, labels }
    }
}

impl ActionProvider for FileActionProvider {
    fn action_probabilities(
        &self,
        key: &str,
        _sequence: &FrameSequence,
        _boxes: &[BoxProposal],
    ) -> Result<ActionDistribution> {
        let stored = StoredDistribution::read_file(&self.dir.join(format!("{key}.action.json")))?;
        stored.validate_against(&self.labels)
    }

    fn labels(&self) -> &LabelTable {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use tempfile::tempdir;

    fn table() -> LabelTable {
        LabelTable::new(vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn file_provider_passes_stored_vector_through() {
        let dir = tempdir().unwrap();
        let stored = StoredDistribution {
            labels: vec!["a".into(), "b".into(), "c".into()],
            probabilities: vec![0.7, 0.2, 0.1],
        };
        stored.write_file(&dir.path().join("seq1.action.json")).unwrap();
        let provider = FileActionProvider::new(dir.path().to_path_buf(), table());
        let seq = FrameSequence::new(vec![Frame::constant(8, 8, 3, 0.1).unwrap(); 2], None).unwrap();
        let boxes = vec![BoxProposal::full_frame(8, 8); 2];
        let dist = provider.action_probabilities("seq1", &seq, &boxes).unwrap();
        assert_eq!(dist.probabilities(), &[0.7, 0.2, 0.1]);
    }

    #[test]
    fn stored_vector_with_bad_sum_is_rejected() {
        let dir = tempdir().unwrap();
        let stored = StoredDistribution {
            labels: vec!["a".into(), "b".into(), "c".into()],
            probabilities: vec![0.7, 0.1, 0.1],
        };
        stored.write_file(&dir.path().join("seq1.action.json")).unwrap();
        let provider = FileActionProvider::new(dir.path().to_path_buf(), table());
        let seq = FrameSequence::new(vec![Frame::constant(8, 8, 3, 0.1).unwrap(); 2], None).unwrap();
        let boxes = vec![BoxProposal::full_frame(8, 8); 2];
        assert!(provider.action_probabilities("seq1", &seq, &boxes).is_err());
    }

    #[test]
    fn missing_file_is_a_typed_error() {
        let dir = tempdir().unwrap();
        let provider = FileActionProvider::new(dir.path().to_path_buf(), table());
        let seq = FrameSequence::new(vec![Frame::constant(8, 8, 3, 0.1).unwrap(); 2], None).unwrap();
        let boxes = vec![BoxProposal::full_frame(8, 8); 2];
        assert!(matches!(
            provider.action_probabilities("nope", &seq, &boxes),
            Err(Error::MissingFile(_))
        ));
    }
}
