//! Training and evaluation drivers behind the CLI subcommands.

use super::{manifest_key, run_pipeline, PipelineConfig, ProviderKind};
use crate::abnormal::{
    evaluate_abnormality, learn_scene_prior, DecisionRecord, PriorObservation, SceneCentroids,
    ScenePriorTable,
};
use crate::classifier::{describe_crop, train_classifier, write_action_model, CropDescriptor};
use crate::error::{Error, Result};
use crate::features::assemble_feature_stack;
use crate::flow::{estimate_flow, estimate_flow_pair, FlowField};
use crate::forest::{
    extract_patch_samples, train_forest, write_forest, BoundaryForest, PatchSample,
};
use crate::frame::FrameSequence;
use crate::io::{self, SequenceManifest};
use crate::plane::Plane;
use crate::proposal::{crop_and_resize, stack_flow_crops, BoxProposal};
use crate::synth::{RectF, SquareSequence};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Writes a moving-square dataset: one subdirectory per sequence holding
/// 16-bit PPM frames, 16-bit PGM truth masks, and a manifest with boxes.
pub fn save_square_dataset(dir: &Path, sequences: &[SquareSequence]) -> Result<()> {
    for (i, seq) in sequences.iter().enumerate() {
        let sub = dir.join(format!("seq_{i:03}"));
        io::save_sequence(&sub, "frame", &seq.sequence, Some(&seq.boxes), None, None, None)?;
        for (t, mask) in seq.masks.iter().enumerate() {
            let map = crate::forest::BoundaryMap::new(mask.clone())?;
            io::write_boundary_map_file(&map, &sub.join(format!("mask_{t:04}.pgm")))?;
        }
    }
    Ok(())
}

/// Loads a dataset written by `save_square_dataset`.
pub fn load_square_dataset(dir: &Path) -> Result<Vec<(FrameSequence, Vec<Plane>, Vec<RectF>)>> {
    if !dir.exists() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut subs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subs.sort();
    let mut out = Vec::new();
    for sub in subs {
        let manifest = SequenceManifest::from_file(&sub.join("frame.manifest.json"))?;
        let sequence = io::load_sequence(&manifest)?;
        let mut masks = Vec::with_capacity(sequence.len());
        for t in 0..sequence.len() {
            let map = io::read_boundary_map_file(&sub.join(format!("mask_{t:04}.pgm")))?;
            masks.push(map.plane().clone());
        }
        let boxes = manifest
            .boxes
            .clone()
            .ok_or_else(|| Error::InvalidValue(format!("{} has no truth boxes", sub.display())))?;
        out.push((sequence, masks, boxes));
    }
    if out.is_empty() {
        return Err(Error::DegenerateInput(format!("no sequences under {}", dir.display())));
    }
    Ok(out)
}

/// Sequence key qualified by the manifest's directory relative to the
/// suite root, since per-sequence subdirectories reuse the same stem.
fn unique_key(path: &Path, suite_dir: &Path) -> String {
    let dir_part = path
        .parent()
        .and_then(|p| p.strip_prefix(suite_dir).ok())
        .map(|p| p.to_string_lossy().replace(std::path::MAIN_SEPARATOR, "_"))
        .filter(|s| !s.is_empty());
    match dir_part {
        Some(d) => format!("{d}_{}", manifest_key(path)),
        None => manifest_key(path),
    }
}

/// All `*.manifest.json` files under a directory, sorted for determinism.
pub fn find_manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".manifest.json"))
            {
                found.push(path);
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::DegenerateInput(format!("no manifests under {}", dir.display())));
    }
    Ok(found)
}

/// Extracts patch samples from every frame pair of every sequence and
/// trains the boundary forest. `sample_stride` is the extraction grid
/// stride; the stored forest keeps `config.forest.stride` for inference.
pub fn train_boundary(
    config: &PipelineConfig,
    dataset: &[(FrameSequence, Vec<Plane>, Vec<RectF>)],
    sample_stride: usize,
    out_path: &Path,
) -> Result<BoundaryForest> {
    let mut extraction_params = config.forest.clone();
    extraction_params.stride = sample_stride;

    let jobs: Vec<(usize, usize)> = dataset
        .iter()
        .enumerate()
        .flat_map(|(i, (seq, _, _))| (0..seq.len() - 1).map(move |t| (i, t)))
        .collect();

    let per_pair: Vec<Vec<PatchSample>> = jobs
        .par_iter()
        .map(|(i, t)| {
            let (seq, masks, _) = &dataset[*i];
            let frames = seq.frames();
            let (fwd, bwd) = estimate_flow_pair(&frames[*t], &frames[*t + 1], &config.flow)?;
            let stack = assemble_feature_stack(&frames[*t], &frames[*t + 1], &fwd, &bwd)?;
            extract_patch_samples(&stack, &masks[*t], &extraction_params)
        })
        .collect::<Result<_>>()?;

    let samples: Vec<PatchSample> = per_pair.into_iter().flatten().collect();
    let forest = train_forest(&samples, &config.forest)?;
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_forest(&forest, std::io::BufWriter::new(std::fs::File::create(out_path)?))?;
    Ok(forest)
}

/// Where the classifier's training boxes come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxSource {
    /// Boundary-map proposals from the pipeline (needs a trained forest).
    Proposals,
    /// Ground-truth boxes stored in the manifests.
    Truth,
    /// The full frame (the background-sensitive baseline).
    FullFrame,
}

pub fn truth_box(rect: &RectF, width: usize, height: usize) -> BoxProposal {
    let x = rect.x.round().clamp(0.0, (width - 1) as f32) as usize;
    let y = rect.y.round().clamp(0.0, (height - 1) as f32) as usize;
    let w = (rect.w.round() as usize).clamp(1, width - x);
    let h = (rect.h.round() as usize).clamp(1, height - y);
    BoxProposal { x, y, w, h, score: 1.0 }
}

/// Per-frame descriptors for one labeled sequence.
pub fn sequence_descriptors(
    config: &PipelineConfig,
    sequence: &FrameSequence,
    boxes: &[BoxProposal],
) -> Result<Vec<CropDescriptor>> {
    sequence.require_pairs()?;
    let frames = sequence.frames();
    let flows: Vec<FlowField> = frames
        .windows(2)
        .map(|pair| estimate_flow(&pair[0], &pair[1], &config.flow))
        .collect::<Result<_>>()?;
    let depth = config.io.flow_stack_depth.min(flows.len()).max(1);
    let mut out = Vec::new();
    for t in 0..=flows.len() - depth {
        let crop = crop_and_resize(&frames[t], &boxes[t], config.io.crop_side)?;
        let stack = stack_flow_crops(&flows[t..], &boxes[t], depth, config.io.crop_side)?;
        out.push(describe_crop(&crop, &stack)?);
    }
    Ok(out)
}

/// Boxes for one sequence according to the box source.
pub fn boxes_for_training(
    config: &PipelineConfig,
    manifest: &SequenceManifest,
    sequence: &FrameSequence,
    source: BoxSource,
    scratch_dir: &Path,
    key: &str,
) -> Result<Vec<BoxProposal>> {
    let (w, h) = (sequence.width(), sequence.height());
    match source {
        BoxSource::FullFrame => Ok(vec![BoxProposal::full_frame(w, h); sequence.len()]),
        BoxSource::Truth => {
            let rects = manifest.boxes.as_ref().ok_or_else(|| {
                Error::InvalidValue(format!("sequence {key} has no ground-truth boxes"))
            })?;
            Ok(rects.iter().map(|r| truth_box(r, w, h)).collect())
        }
        BoxSource::Proposals => {
            let run_dir = scratch_dir.join(key);
            let artifacts = run_pipeline(config, &manifest_path_of(manifest, key)?, &run_dir)?;
            Ok(super::provider_boxes(&artifacts.selected_boxes, sequence.len()))
        }
    }
}

// run_pipeline re-reads the manifest from disk; keep the original path
fn manifest_path_of(manifest: &SequenceManifest, key: &str) -> Result<PathBuf> {
    manifest
        .source_path()
        .ok_or_else(|| Error::InvalidValue(format!("manifest for {key} has no source path")))
}

/// Trains the action classifier over a directory of labeled sequences.
pub fn train_action(
    config: &PipelineConfig,
    suite_dir: &Path,
    source: BoxSource,
    scratch_dir: &Path,
    out_path: &Path,
) -> Result<()> {
    let manifests = find_manifests(suite_dir)?;
    let actions = config.vocabulary.action_table()?;

    let mut descriptors: Vec<CropDescriptor> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (i, path) in manifests.iter().enumerate() {
        let manifest = SequenceManifest::from_file(path)?;
        let key = format!("{i:03}_{}", unique_key(path, suite_dir));
        let name = manifest.action_label.as_ref().ok_or_else(|| {
            Error::InvalidValue(format!("{} has no action label", path.display()))
        })?;
        let id = actions
            .id_of(name)
            .ok_or_else(|| Error::InvalidValue(format!("unknown action label {name}")))?;
        let sequence = io::load_sequence(&manifest)?;
        let boxes = boxes_for_training(config, &manifest, &sequence, source, scratch_dir, &key)?;
        for d in sequence_descriptors(config, &sequence, &boxes)? {
            descriptors.push(d);
            labels.push(id);
        }
    }

    let model = train_classifier(&descriptors, &labels, &actions, &config.classifier)?;
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_action_model(&model, std::io::BufWriter::new(std::fs::File::create(out_path)?))?;
    Ok(())
}

/// Learns the scene prior (and, for the builtin provider, the scene
/// centroids) from a directory of action- and scene-labeled sequences.
/// Writes `scene_prior.json` and possibly `scene_centroids.json` into
/// `out_dir` and returns the table.
pub fn learn_prior(
    config: &PipelineConfig,
    suite_dir: &Path,
    out_dir: &Path,
) -> Result<ScenePriorTable> {
    std::fs::create_dir_all(out_dir)?;
    let manifests = find_manifests(suite_dir)?;
    let actions = config.vocabulary.action_table()?;
    let scenes = config.vocabulary.scene_table()?;

    let loaded: Vec<(PathBuf, SequenceManifest, FrameSequence)> = manifests
        .iter()
        .map(|path| {
            let manifest = SequenceManifest::from_file(path)?;
            let sequence = io::load_sequence(&manifest)?;
            Ok((path.clone(), manifest, sequence))
        })
        .collect::<Result<_>>()?;

    // builtin scene provider is fit here from the scene labels
    let provider: Box<dyn crate::abnormal::SceneProvider> = match &config.providers.scene {
        ProviderKind::Builtin => {
            let mut samples = Vec::new();
            for (path, manifest, sequence) in &loaded {
                let name = manifest.scene_label.as_ref().ok_or_else(|| {
                    Error::InvalidValue(format!("{} has no scene label", path.display()))
                })?;
                let id = scenes
                    .id_of(name)
                    .ok_or_else(|| Error::InvalidValue(format!("unknown scene label {name}")))?;
                for frame in sequence.frames() {
                    samples.push((id, frame));
                }
            }
            let centroids = SceneCentroids::fit(&scenes, &samples)?;
            centroids.write_file(&out_dir.join("scene_centroids.json"))?;
            Box::new(centroids)
        }
        ProviderKind::File { dir } => {
            Box::new(crate::abnormal::FileSceneProvider::new(dir.clone(), scenes.clone()))
        }
    };

    let mut observations = Vec::new();
    for (path, manifest, sequence) in &loaded {
        let name = manifest.action_label.as_ref().ok_or_else(|| {
            Error::InvalidValue(format!("{} has no action label", path.display()))
        })?;
        let action_id = actions
            .id_of(name)
            .ok_or_else(|| Error::InvalidValue(format!("unknown action label {name}")))?;
        let key = manifest_key(path);
        let dist = provider.scene_probabilities(&key, sequence)?;
        observations.push(PriorObservation { action_id, scene_distribution: dist });
    }

    let table =
        learn_scene_prior(&observations, &actions, &scenes, config.abnormality.prior_mode)?;
    table.write_file(&out_dir.join("scene_prior.json"))?;
    Ok(table)
}

/// Runs the full pipeline over every manifest in the suite and scores the
/// abnormality decisions against the manifests' truth flags. Emits
/// per-sequence records (`records.jsonl`) and a summary (`summary.json`).
pub fn evaluate_abnormal(
    config: &PipelineConfig,
    suite_dir: &Path,
    out_dir: &Path,
) -> Result<(f64, Vec<DecisionRecord>)> {
    std::fs::create_dir_all(out_dir)?;
    let manifests = find_manifests(suite_dir)?;
    let mut records = Vec::new();
    for (i, path) in manifests.iter().enumerate() {
        let manifest = SequenceManifest::from_file(path)?;
        let truth = manifest.abnormal_truth.ok_or_else(|| {
            Error::InvalidValue(format!("{} has no abnormal_truth flag", path.display()))
        })?;
        // manifest stems repeat across dataset subdirectories, so run
        // directories and record keys get a unique index prefix
        let key = format!("{i:03}_{}", unique_key(path, suite_dir));
        let artifacts = run_pipeline(config, path, &out_dir.join("runs").join(&key))?;
        let decision = artifacts.decision.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "pipeline produced no decision for {key}; check providers and prior"
            ))
        })?;
        records.push(DecisionRecord::new(key, decision, truth));
    }

    let rate = evaluate_abnormality(&records)?;

    let mut sink = std::io::BufWriter::new(std::fs::File::create(out_dir.join("records.jsonl"))?);
    for r in &records {
        use std::io::Write;
        serde_json::to_writer(&mut sink, r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        sink.write_all(b"\n")?;
    }
    let summary = serde_json::json!({
        "sequences": records.len(),
        "correct": records.iter().filter(|r| r.correct).count(),
        "success_rate": rate,
    });
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(std::io::Error::other(e)))?,
    )?;
    Ok((rate, records))
}
