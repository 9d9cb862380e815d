//! Sequence manifests: a JSON file naming the ordered frame images plus
//! optional ground-truth boxes and labels. Frames may be PNG or binary
//! PGM/PPM; grayscale images are broadcast to three channels on load.

use super::pnm;
use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSequence};
use crate::synth::RectF;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    /// Directory the frame names resolve against; relative paths are
    /// resolved against the manifest file's own directory.
    #[serde(default)]
    pub root: Option<PathBuf>,
    pub frames: Vec<String>,
    #[serde(default)]
    pub frame_rate_hint: Option<f64>,
    /// Optional per-frame ground-truth boxes, aligned with `frames`.
    #[serde(default)]
    pub boxes: Option<Vec<RectF>>,
    #[serde(default)]
    pub action_label: Option<String>,
    #[serde(default)]
    pub scene_label: Option<String>,
    /// Ground truth for abnormality evaluation suites.
    #[serde(default)]
    pub abnormal_truth: Option<bool>,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    source: Option<PathBuf>,
}

impl SequenceManifest {
    pub fn new(root: PathBuf, frames: Vec<String>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidValue("manifest frame list is empty".into()));
        }
        Ok(SequenceManifest {
            root: Some(root),
            frames,
            frame_rate_hint: None,
            boxes: None,
            action_label: None,
            scene_label: None,
            abnormal_truth: None,
            base_dir: PathBuf::new(),
            source: None,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = File::open(path)?;
        let mut manifest: SequenceManifest = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::UnsupportedFormat(format!("manifest {}: {e}", path.display())))?;
        if manifest.frames.is_empty() {
            return Err(Error::InvalidValue(format!(
                "manifest {} has an empty frame list",
                path.display()
            )));
        }
        if let Some(boxes) = &manifest.boxes {
            if boxes.len() != manifest.frames.len() {
                return Err(Error::DimensionMismatch(format!(
                    "manifest has {} boxes for {} frames",
                    boxes.len(),
                    manifest.frames.len()
                )));
            }
        }
        manifest.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        manifest.source = Some(path.to_path_buf());
        Ok(manifest)
    }

    pub fn to_file(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }

    /// The file this manifest was loaded from, when applicable.
    pub fn source_path(&self) -> Option<PathBuf> {
        self.source.clone()
    }

    pub fn frame_paths(&self) -> Vec<PathBuf> {
        let root = match &self.root {
            Some(r) if r.is_absolute() => r.clone(),
            Some(r) => self.base_dir.join(r),
            None => self.base_dir.clone(),
        };
        self.frames.iter().map(|f| root.join(f)).collect()
    }
}

/// Decodes one image file by extension: `.png` via the image crate,
/// `.pgm`/`.ppm` via the built-in binary PNM reader.
pub fn load_frame(path: &Path) -> Result<Frame> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "pgm" | "ppm" => pnm::read_pnm(BufReader::new(File::open(path)?)),
        "png" => {
            let img = image::open(path).map_err(|e| {
                Error::UnsupportedFormat(format!("png {}: {e}", path.display()))
            })?;
            let rgb = img.to_rgb32f();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            let data: Vec<f32> = rgb.into_raw().iter().map(|v| v.clamp(0.0, 1.0)).collect();
            Frame::new(w, h, 3, data)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "frame extension .{other} (supported: png, pgm, ppm)"
        ))),
    }
}

/// Loads every manifest frame in order; grayscale frames are broadcast to
/// RGB so the color cues are always defined. Frames must share dimensions.
pub fn load_sequence(manifest: &SequenceManifest) -> Result<FrameSequence> {
    let paths = manifest.frame_paths();
    let mut frames = Vec::with_capacity(paths.len());
    for path in &paths {
        frames.push(load_frame(path)?.to_rgb());
    }
    FrameSequence::new(frames, manifest.frame_rate_hint)
}

/// Writes a sequence as 16-bit PNM frames plus a manifest; returns the
/// manifest path.
pub fn save_sequence(
    dir: &Path,
    stem: &str,
    sequence: &FrameSequence,
    boxes: Option<&[RectF]>,
    action_label: Option<&str>,
    scene_label: Option<&str>,
    abnormal_truth: Option<bool>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(sequence.len());
    for (i, frame) in sequence.frames().iter().enumerate() {
        let ext = if frame.channels() == 1 { "pgm" } else { "ppm" };
        let name = format!("{stem}_{i:04}.{ext}");
        let file = File::create(dir.join(&name))?;
        pnm::write_frame_pnm(frame, BufWriter::new(file))?;
        names.push(name);
    }
    let mut manifest = SequenceManifest::new(PathBuf::from("."), names)?;
    manifest.boxes = boxes.map(|b| b.to_vec());
    manifest.action_label = action_label.map(str::to_string);
    manifest.scene_label = scene_label.map(str::to_string);
    manifest.abnormal_truth = abnormal_truth;
    let path = dir.join(format!("{stem}.manifest.json"));
    manifest.to_file(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_pgm(path: &Path, w: usize, h: usize, value: u8) {
        let mut buf = format!("P5\n{w} {h}\n255\n").into_bytes();
        buf.extend(std::iter::repeat_n(value, w * h));
        std::fs::write(path, buf).unwrap();
    }

    #[test]
    fn identical_pgms_round_trip() {
        let dir = tempdir().unwrap();
        write_pgm(&dir.path().join("a.pgm"), 8, 8, 128);
        write_pgm(&dir.path().join("b.pgm"), 8, 8, 128);
        let manifest = SequenceManifest {
            root: None,
            frames: vec!["a.pgm".into(), "b.pgm".into()],
            frame_rate_hint: Some(30.0),
            boxes: None,
            action_label: None,
            scene_label: None,
            abnormal_truth: None,
            base_dir: dir.path().to_path_buf(),
            source: None,
        };
        let seq = load_sequence(&manifest).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.frames()[0].channels(), 3); // broadcast to RGB
        assert_eq!(seq.frames()[0].data(), seq.frames()[1].data());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        write_pgm(&dir.path().join("a.pgm"), 8, 8, 10);
        write_pgm(&dir.path().join("b.pgm"), 16, 16, 10);
        let manifest = SequenceManifest {
            root: None,
            frames: vec!["a.pgm".into(), "b.pgm".into()],
            frame_rate_hint: None,
            boxes: None,
            action_label: None,
            scene_label: None,
            abnormal_truth: None,
            base_dir: dir.path().to_path_buf(),
            source: None,
        };
        assert!(matches!(load_sequence(&manifest), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempdir().unwrap();
        let manifest = SequenceManifest {
            root: None,
            frames: vec!["nope.pgm".into()],
            frame_rate_hint: None,
            boxes: None,
            action_label: None,
            scene_label: None,
            abnormal_truth: None,
            base_dir: dir.path().to_path_buf(),
            source: None,
        };
        assert!(matches!(load_sequence(&manifest), Err(Error::MissingFile(_))));
    }

    #[test]
    fn save_and_reload_synthetic_sequence() {
        use crate::synth::{square_sequence, SquareSceneSpec};
        let spec = SquareSceneSpec {
            width: 24,
            height: 24,
            frames: 3,
            square_size: 8,
            square_start: (4.0, 4.0),
            square_speed: (2.0, 0.0),
            camera_speed: (0.0, 0.0),
            texture_contrast: 0.7,
            seed: 5,
        };
        let synthetic = square_sequence(&spec).unwrap();
        let dir = tempdir().unwrap();
        let manifest_path = save_sequence(
            dir.path(),
            "seq",
            &synthetic.sequence,
            Some(&synthetic.boxes),
            Some("slide"),
            None,
            None,
        )
        .unwrap();
        let manifest = SequenceManifest::from_file(&manifest_path).unwrap();
        assert_eq!(manifest.action_label.as_deref(), Some("slide"));
        let seq = load_sequence(&manifest).unwrap();
        assert_eq!(seq.len(), 3);
        // generator's analytic raster survives the 16-bit quantization
        for (a, b) in synthetic.sequence.frames().iter().zip(seq.frames()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1.0 / 65535.0);
            }
        }
    }

    #[test]
    fn unsupported_extension_is_rejected() {
        let dir = tempdir().unwrap();
        std::fs::write(dir.path().join("a.bmp"), b"xx").unwrap();
        assert!(matches!(
            load_frame(&dir.path().join("a.bmp")),
            Err(Error::UnsupportedFormat(_))
        ));
    }
}
