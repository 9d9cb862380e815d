//! Scene probability providers: stored per-sequence distributions, or the
//! built-in color-histogram nearest-centroid classifier for desk-scale
//! experiments.

use super::SceneDistribution;
use crate::classifier::{LabelTable, StoredDistribution};
use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSequence};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// How P(S), the scalar fed into the posterior, is read off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SceneProbabilityMode {
    /// The maximum entry of the frame's scene distribution.
    #[default]
    MaxEntry,
    /// The learned corpus-wide marginal frequency of the detected scene.
    Marginal,
}

/// Produces a scene distribution for a sequence (frame distributions are
/// averaged). `key` identifies the sequence for file-backed providers.
pub trait SceneProvider {
    fn scene_probabilities(
        &self,
        key: &str,
        sequence: &FrameSequence,
    ) -> Result<SceneDistribution>;

    fn labels(&self) -> &LabelTable;
}

/// 4x4x4 RGB histogram, L1-normalized.
pub fn rgb_histogram(frame: &Frame) -> Vec<f32> {
    let rgb = frame.to_rgb();
    let mut hist = vec![0.0f32; 64];
    for y in 0..rgb.height() {
        for x in 0..rgb.width() {
            let bin = |c: usize| ((rgb.get(x, y, c) * 4.0) as usize).min(3);
            hist[bin(0) * 16 + bin(1) * 4 + bin(2)] += 1.0;
        }
    }
    let total = (rgb.width() * rgb.height()) as f32;
    for h in &mut hist {
        *h /= total;
    }
    hist
}

/// Nearest-centroid scene classifier over RGB histograms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneCentroids {
    labels: Vec<String>,
    centroids: Vec<Vec<f32>>,
    #[serde(skip)]
    table: std::sync::OnceLock<LabelTable>,
}

/// Distance-to-probability temperature; any monotone map works since the
/// argmax drives both the prior tally and the detected scene.
const SIGMA: f64 = 0.05;

impl SceneCentroids {
    /// Mean histogram per scene over labeled frames. Every scene in the
    /// vocabulary needs at least one sample.
    pub fn fit(labels: &LabelTable, samples: &[(usize, &Frame)]) -> Result<Self> {
        let m = labels.len();
        let mut sums = vec![vec![0.0f32; 64]; m];
        let mut counts = vec![0usize; m];
        for (scene_id, frame) in samples {
            if *scene_id >= m {
                return Err(Error::InvalidValue(format!("scene id {scene_id} outside vocabulary")));
            }
            let h = rgb_histogram(frame);
            for (s, v) in sums[*scene_id].iter_mut().zip(&h) {
                *s += v;
            }
            counts[*scene_id] += 1;
        }
        for (i, count) in counts.iter().enumerate() {
            if *count == 0 {
                return Err(Error::DegenerateInput(format!(
                    "scene {} has no training frames",
                    labels.name(i)
                )));
            }
            for v in &mut sums[i] {
                *v /= *count as f32;
            }
        }
        Ok(SceneCentroids {
            labels: labels.names().to_vec(),
            centroids: sums,
            table: std::sync::OnceLock::new(),
        })
    }

    pub fn classify_frame(&self, frame: &Frame) -> Result<SceneDistribution> {
        let h = rgb_histogram(frame);
        let weights: Vec<f64> = self
            .centroids
            .iter()
            .map(|c| {
                let d2: f64 = c
                    .iter()
                    .zip(&h)
                    .map(|(a, b)| ((a - b) as f64).powi(2))
                    .sum();
                (-d2 / (2.0 * SIGMA * SIGMA)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Numerical("scene classifier produced no mass".into()));
        }
        SceneDistribution::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = std::fs::File::open(path)?;
        let centroids: SceneCentroids = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
        if centroids.labels.is_empty() || centroids.centroids.len() != centroids.labels.len() {
            return Err(Error::InvalidValue("centroid file shape mismatch".into()));
        }
        Ok(centroids)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }
}

impl SceneProvider for SceneCentroids {
    fn scene_probabilities(&self, _key: &str, sequence: &FrameSequence) -> Result<SceneDistribution> {
        let per_frame = sequence
            .frames()
            .iter()
            .map(|f| self.classify_frame(f))
            .collect::<Result<Vec<_>>>()?;
        SceneDistribution::mean(&per_frame)
    }

    fn labels(&self) -> &LabelTable {
        self.table
            .get_or_init(|| LabelTable::new(self.labels.clone()).expect("validated at load"))
    }
}

/// File-backed provider: looks up `<dir>/<key>.scene.json`.
pub struct FileSceneProvider {
    dir: PathBuf,
    labels: LabelTable,
}

impl FileSceneProvider {
    pub fn new(dir: PathBuf, labels: LabelTable) -> Self {
        FileSceneProvider { dir, labels }
    }
}

impl SceneProvider for FileSceneProvider {
    fn scene_probabilities(&self, key: &str, _sequence: &FrameSequence) -> Result<SceneDistribution> {
        let stored = StoredDistribution::read_file(&self.dir.join(format!("{key}.scene.json")))?;
        if stored.labels != self.labels.names() {
            return Err(Error::Provider(format!(
                "stored scene labels {:?} do not match vocabulary {:?}",
                stored.labels,
                self.labels.names()
            )));
        }
        SceneDistribution::new(stored.probabilities)
    }

    fn labels(&self) -> &LabelTable {
        &self.labels
    }
}
