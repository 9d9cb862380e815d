//! End-to-end pipeline: flow, features, boundary prediction, proposals,
//! crops, classification, and the abnormality decision, with every stage's
//! output cached on disk. Reruns with identical config and inputs are
//! byte-identical; existing stage outputs are reused unless forced.

mod drivers;

pub use drivers::{
    boxes_for_training, evaluate_abnormal, find_manifests, learn_prior, load_square_dataset,
    save_square_dataset, sequence_descriptors, train_action, train_boundary, truth_box, BoxSource,
};

use crate::abnormal::{
    decide, AbnormalityDecision, FileSceneProvider, SceneCentroids, SceneDistribution,
    SceneProbabilityMode, ScenePriorMode, ScenePriorTable, SceneProvider,
};
use crate::classifier::{
    ActionDistribution, ActionProvider, BuiltinActionProvider, ClassifierHyper,
    FileActionProvider, LabelTable, StoredDistribution,
};
use crate::error::{Error, Result};
use crate::features::assemble_feature_stack;
use crate::flow::{estimate_flow_pair, FlowField, FlowParams};
use crate::forest::{predict_boundary, read_forest, BoundaryMap, ForestParams};
use crate::frame::FrameSequence;
use crate::io;
use crate::proposal::{
    crop_and_resize, nms, score_boxes, select_action_region, sort_boxes, BoxProposal,
    ProposalParams,
};
use crate::synth;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub flow: FlowParams,
    pub forest: ForestParams,
    pub proposal: ProposalParams,
    pub classifier: ClassifierHyper,
    pub abnormality: AbnormalityParams,
    pub providers: ProviderConfig,
    pub models: ModelPaths,
    pub vocabulary: Vocabulary,
    pub io: IoOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbnormalityParams {
    pub threshold: f64,
    pub prior_mode: ScenePriorMode,
    pub scene_probability_mode: SceneProbabilityMode,
}

impl Default for AbnormalityParams {
    fn default() -> Self {
        AbnormalityParams {
            threshold: 0.5,
            prior_mode: ScenePriorMode::default(),
            scene_probability_mode: SceneProbabilityMode::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Builtin,
    File {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub action: ProviderKind,
    pub scene: ProviderKind,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelPaths {
    pub boundary_forest: Option<PathBuf>,
    pub action_model: Option<PathBuf>,
    pub scene_prior: Option<PathBuf>,
    pub scene_centroids: Option<PathBuf>,
}

/// Action and scene vocabularies for file-based providers and prior
/// learning; defaults to the synthetic suite's catalogs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Vocabulary {
    pub actions: Vec<String>,
    pub scenes: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            actions: synth::action_catalog().iter().map(|a| a.name.to_string()).collect(),
            scenes: synth::scene_catalog().iter().map(|s| s.name.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    pub fn action_table(&self) -> Result<LabelTable> {
        LabelTable::new(self.actions.clone())
    }

    pub fn scene_table(&self) -> Result<LabelTable> {
        LabelTable::new(self.scenes.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoOptions {
    /// Recompute stages even when cached outputs exist.
    pub force: bool,
    /// Spatial crop side for the classifier input.
    pub crop_side: usize,
    /// Number of consecutive flows stacked for the temporal input (L).
    pub flow_stack_depth: usize,
    /// 5-frame median smoothing of the selected box track.
    pub smooth_boxes: bool,
    /// Feature-stack channels to dump as 16-bit PGMs (min-max normalized).
    pub dump_channels: Vec<String>,
}

impl Default for IoOptions {
    fn default() -> Self {
        IoOptions {
            force: false,
            crop_side: crate::proposal::DEFAULT_CROP_SIDE,
            flow_stack_depth: 10,
            smooth_boxes: false,
            dump_channels: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = std::fs::File::open(path)?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }

    pub fn build_action_provider(&self) -> Result<Box<dyn ActionProvider>> {
        match &self.providers.action {
            ProviderKind::Builtin => {
                let path = self.models.action_model.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("builtin action provider needs models.action_model".into())
                })?;
                if !path.exists() {
                    return Err(Error::MissingFile(path.clone()));
                }
                let model = crate::classifier::read_action_model(std::io::BufReader::new(
                    std::fs::File::open(path)?,
                ))?;
                Ok(Box::new(BuiltinActionProvider::new(
                    model,
                    self.flow.clone(),
                    self.io.crop_side,
                    self.io.flow_stack_depth,
                )))
            }
            ProviderKind::File { dir } => Ok(Box::new(FileActionProvider::new(
                dir.clone(),
                self.vocabulary.action_table()?,
            ))),
        }
    }

    pub fn build_scene_provider(&self) -> Result<Box<dyn SceneProvider>> {
        match &self.providers.scene {
            ProviderKind::Builtin => {
                let path = self.models.scene_centroids.as_ref().ok_or_else(|| {
                    Error::InvalidConfig(
                        "builtin scene provider needs models.scene_centroids".into(),
                    )
                })?;
                Ok(Box::new(SceneCentroids::read_file(path)?))
            }
            ProviderKind::File { dir } => Ok(Box::new(FileSceneProvider::new(
                dir.clone(),
                self.vocabulary.scene_table()?,
            ))),
        }
    }
}

/// Outputs of one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub out_dir: PathBuf,
    /// Post-fallback selected box per frame (one per frame pair).
    pub selected_boxes: Vec<BoxProposal>,
    pub action_distribution: Option<ActionDistribution>,
    pub scene_distribution: Option<SceneDistribution>,
    pub decision: Option<AbnormalityDecision>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs every stage the configuration supports for one sequence manifest.
/// Classification needs an action provider; the abnormality decision
/// additionally needs a scene provider, a prior table, and both labels.
pub fn run_pipeline(
    config: &PipelineConfig,
    manifest_path: &Path,
    out_dir: &Path,
) -> Result<PipelineArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    stage("config", config.write_file(&out_dir.join("config.json")))?;

    let manifest = stage("load", io::SequenceManifest::from_file(manifest_path))?;
    let sequence = stage("load", io::load_sequence(&manifest))?;
    stage("load", sequence.require_pairs())?;
    let key = manifest_key(manifest_path);

    let flows = stage("flow", flow_stage(config, &sequence, out_dir))?;
    let boundaries = stage("boundary", boundary_stage(config, &sequence, &flows, out_dir))?;
    let selected = stage("propose", proposal_stage(config, &sequence, &boundaries, out_dir))?;
    stage("crops", crop_stage(config, &sequence, &selected, out_dir))?;

    let mut artifacts = PipelineArtifacts {
        out_dir: out_dir.to_path_buf(),
        selected_boxes: selected.clone(),
        action_distribution: None,
        scene_distribution: None,
        decision: None,
    };

    let can_classify = match &self_provider_ready(config) {
        Ok(ready) => *ready,
        Err(_) => false,
    };
    if can_classify {
        let dist = stage(
            "classify",
            classify_stage(config, &key, &sequence, &flows, &selected, out_dir),
        )?;
        artifacts.action_distribution = Some(dist);
    }

    let scene_ready = scene_provider_ready(config);
    if scene_ready {
        let dist = stage("scene", scene_stage(config, &key, &sequence, out_dir))?;
        artifacts.scene_distribution = Some(dist);
    }

    if let (Some(action), Some(scene), Some(prior_path)) = (
        &artifacts.action_distribution,
        &artifacts.scene_distribution,
        &config.models.scene_prior,
    ) {
        let prior = stage("decide", ScenePriorTable::read_file(prior_path))?;
        let decision = stage(
            "decide",
            decide_stage(config, action, scene, &prior, out_dir),
        )?;
        artifacts.decision = Some(decision);
    }

    Ok(artifacts)
}

/// Stable sequence key for provider lookups and record names.
pub fn manifest_key(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence");
    stem.trim_end_matches(".manifest").to_string()
}

fn self_provider_ready(config: &PipelineConfig) -> Result<bool> {
    Ok(match &config.providers.action {
        ProviderKind::Builtin => {
            config.models.action_model.as_ref().map(|p| p.exists()).unwrap_or(false)
        }
        ProviderKind::File { dir } => dir.exists(),
    })
}

fn scene_provider_ready(config: &PipelineConfig) -> bool {
    match &config.providers.scene {
        ProviderKind::Builtin => {
            config.models.scene_centroids.as_ref().map(|p| p.exists()).unwrap_or(false)
        }
        ProviderKind::File { dir } => dir.exists(),
    }
}

fn flow_stage(
    config: &PipelineConfig,
    sequence: &FrameSequence,
    out_dir: &Path,
) -> Result<Vec<(FlowField, FlowField)>> {
    let dir = out_dir.join("flows");
    std::fs::create_dir_all(&dir)?;
    let pairs = sequence.len() - 1;
    let cached = (0..pairs).all(|t| {
        dir.join(format!("{t:04}_fwd.flo")).exists() && dir.join(format!("{t:04}_bwd.flo")).exists()
    });
    if cached && !config.io.force {
        let mut flows = Vec::with_capacity(pairs);
        for t in 0..pairs {
            flows.push((
                io::read_flow_file(&dir.join(format!("{t:04}_fwd.flo")))?,
                io::read_flow_file(&dir.join(format!("{t:04}_bwd.flo")))?,
            ));
        }
        return Ok(flows);
    }

    let frames = sequence.frames();
    let flows: Vec<(FlowField, FlowField)> = (0..pairs)
        .into_par_iter()
        .map(|t| estimate_flow_pair(&frames[t], &frames[t + 1], &config.flow))
        .collect::<Result<_>>()?;
    for (t, (fwd, bwd)) in flows.iter().enumerate() {
        io::write_flow_file(fwd, &dir.join(format!("{t:04}_fwd.flo")))?;
        io::write_flow_file(bwd, &dir.join(format!("{t:04}_bwd.flo")))?;
    }
    Ok(flows)
}

fn boundary_stage(
    config: &PipelineConfig,
    sequence: &FrameSequence,
    flows: &[(FlowField, FlowField)],
    out_dir: &Path,
) -> Result<Vec<BoundaryMap>> {
    let dir = out_dir.join("boundary");
    std::fs::create_dir_all(&dir)?;
    let cached = (0..flows.len()).all(|t| dir.join(format!("{t:04}.pgm")).exists());
    if cached && !config.io.force {
        let mut maps = Vec::with_capacity(flows.len());
        for t in 0..flows.len() {
            maps.push(io::read_boundary_map_file(&dir.join(format!("{t:04}.pgm")))?);
        }
        return Ok(maps);
    }

    let forest_path = config.models.boundary_forest.as_ref().ok_or_else(|| {
        Error::InvalidConfig("boundary stage needs models.boundary_forest".into())
    })?;
    if !forest_path.exists() {
        return Err(Error::MissingFile(forest_path.clone()));
    }
    let forest = read_forest(std::io::BufReader::new(std::fs::File::open(forest_path)?))?;

    let frames = sequence.frames();
    let maps: Vec<BoundaryMap> = (0..flows.len())
        .into_par_iter()
        .map(|t| {
            let stack =
                assemble_feature_stack(&frames[t], &frames[t + 1], &flows[t].0, &flows[t].1)?;
            if !config.io.dump_channels.is_empty() {
                dump_channels(config, &stack, t, out_dir)?;
            }
            predict_boundary(&stack, &forest)
        })
        .collect::<Result<_>>()?;
    for (t, map) in maps.iter().enumerate() {
        io::write_boundary_map_file(map, &dir.join(format!("{t:04}.pgm")))?;
    }
    Ok(maps)
}

fn dump_channels(
    config: &PipelineConfig,
    stack: &crate::features::FeatureStack,
    t: usize,
    out_dir: &Path,
) -> Result<()> {
    let dir = out_dir.join("dumps");
    std::fs::create_dir_all(&dir)?;
    for name in &config.io.dump_channels {
        let plane = stack.combined.by_name(name).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown channel {name}; available: {}",
                stack.combined.names().join(", ")
            ))
        })?;
        // min-max normalize into [0,1] for the 16-bit PGM writer
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for v in plane.data() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        let range = if hi > lo { hi - lo } else { 1.0 };
        let mut normalized = plane.clone();
        for v in normalized.data_mut() {
            *v = (*v - lo) / range;
        }
        let map = BoundaryMap::new(normalized)?;
        io::write_boundary_map_file(&map, &dir.join(format!("{t:04}_{name}.pgm")))?;
    }
    Ok(())
}

/// Scores, suppresses, and selects one box per frame pair, with the
/// no-motion fallback (previous frame's box, else the full frame).
fn proposal_stage(
    config: &PipelineConfig,
    sequence: &FrameSequence,
    boundaries: &[BoundaryMap],
    out_dir: &Path,
) -> Result<Vec<BoxProposal>> {
    let dir = out_dir.join("proposals");
    std::fs::create_dir_all(&dir)?;
    let topk_path = dir.join("topk.jsonl");
    let selected_path = dir.join("selected.jsonl");

    if topk_path.exists() && selected_path.exists() && !config.io.force {
        let records = io::read_proposals(std::io::BufReader::new(std::fs::File::open(
            &selected_path,
        )?))?;
        if records.len() == boundaries.len() {
            return Ok(records.into_iter().map(|r| r.to_box()).collect());
        }
    }

    let (w, h) = (sequence.width(), sequence.height());
    let mut topk_records = Vec::new();
    let mut selected = Vec::with_capacity(boundaries.len());

    for (t, map) in boundaries.iter().enumerate() {
        let mut all = Vec::new();
        for combo in fitting_combinations(&config.proposal, w, h) {
            all.extend(score_boxes(map, &combo)?);
        }
        sort_boxes(&mut all);
        let kept = nms(&all, config.proposal.nms_iou);
        let confident: Vec<BoxProposal> =
            kept.into_iter().filter(|b| b.score >= config.proposal.min_score).collect();
        let region = select_action_region(&confident, config.proposal.top_k);
        for b in &region.boxes {
            topk_records.push(io::ProposalRecord::new(t, b));
        }
        let chosen = if region.no_motion {
            selected.last().copied().unwrap_or_else(|| BoxProposal::full_frame(w, h))
        } else {
            region.boxes[0]
        };
        selected.push(chosen);
    }

    if config.io.smooth_boxes {
        selected = median_smooth_boxes(&selected, 5, w, h);
    }

    io::write_proposals(&topk_records, std::io::BufWriter::new(std::fs::File::create(&topk_path)?))?;
    let selected_records: Vec<io::ProposalRecord> =
        selected.iter().enumerate().map(|(t, b)| io::ProposalRecord::new(t, b)).collect();
    io::write_proposals(
        &selected_records,
        std::io::BufWriter::new(std::fs::File::create(&selected_path)?),
    )?;
    Ok(selected)
}

/// (scale, ratio) combinations whose boxes fit the map; each becomes a
/// singleton-parameter scoring pass so oversized defaults do not abort
/// small inputs.
fn fitting_combinations(params: &ProposalParams, w: usize, h: usize) -> Vec<ProposalParams> {
    let mut combos = Vec::new();
    for &scale in &params.scales {
        for &ratio in &params.aspect_ratios {
            let (bw, bh) = params.box_dims(scale, ratio);
            if bw <= w && bh <= h {
                let mut p = params.clone();
                p.scales = vec![scale];
                p.aspect_ratios = vec![ratio];
                combos.push(p);
            }
        }
    }
    combos
}

/// Per-coordinate running median over a window clipped at the track ends.
fn median_smooth_boxes(
    boxes: &[BoxProposal],
    window: usize,
    width: usize,
    height: usize,
) -> Vec<BoxProposal> {
    let half = window / 2;
    let med = |values: &mut Vec<usize>| -> usize {
        values.sort_unstable();
        values[values.len() / 2]
    };
    (0..boxes.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(boxes.len());
            let mut xs: Vec<usize> = boxes[lo..hi].iter().map(|b| b.x).collect();
            let mut ys: Vec<usize> = boxes[lo..hi].iter().map(|b| b.y).collect();
            let mut ws: Vec<usize> = boxes[lo..hi].iter().map(|b| b.w).collect();
            let mut hs: Vec<usize> = boxes[lo..hi].iter().map(|b| b.h).collect();
            let w = med(&mut ws).min(width);
            let h = med(&mut hs).min(height);
            BoxProposal {
                x: med(&mut xs).min(width - w),
                y: med(&mut ys).min(height - h),
                w,
                h,
                score: boxes[i].score,
            }
        })
        .collect()
}

fn crop_stage(
    config: &PipelineConfig,
    sequence: &FrameSequence,
    selected: &[BoxProposal],
    out_dir: &Path,
) -> Result<()> {
    let dir = out_dir.join("crops");
    std::fs::create_dir_all(&dir)?;
    let cached = (0..selected.len()).all(|t| dir.join(format!("{t:04}.ppm")).exists());
    if cached && !config.io.force {
        return Ok(());
    }
    for (t, region) in selected.iter().enumerate() {
        let crop = crop_and_resize(&sequence.frames()[t], region, config.io.crop_side)?;
        let file = std::fs::File::create(dir.join(format!("{t:04}.ppm")))?;
        io::write_frame_pnm(&crop, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

/// Provider boxes cover every frame: the last frame reuses the final
/// selected box.
pub(crate) fn provider_boxes(selected: &[BoxProposal], frame_count: usize) -> Vec<BoxProposal> {
    let mut boxes = selected.to_vec();
    while boxes.len() < frame_count {
        boxes.push(*selected.last().expect("at least one selected box"));
    }
    boxes
}

fn classify_stage(
    config: &PipelineConfig,
    key: &str,
    sequence: &FrameSequence,
    flows: &[(FlowField, FlowField)],
    selected: &[BoxProposal],
    out_dir: &Path,
) -> Result<ActionDistribution> {
    let dir = out_dir.join("distributions");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("action.json");
    let labels = config.vocabulary.action_table()?;
    if path.exists() && !config.io.force {
        let stored = StoredDistribution::read_file(&path)?;
        return stored.validate_against(&labels);
    }

    let boxes = provider_boxes(selected, sequence.len());
    let dist = match &config.providers.action {
        ProviderKind::Builtin => {
            // reuse the cached forward flows instead of re-estimating
            let model_path = config.models.action_model.as_ref().ok_or_else(|| {
                Error::InvalidConfig("builtin action provider needs models.action_model".into())
            })?;
            if !model_path.exists() {
                return Err(Error::MissingFile(model_path.clone()));
            }
            let model = crate::classifier::read_action_model(std::io::BufReader::new(
                std::fs::File::open(model_path)?,
            ))?;
            let builtin = BuiltinActionProvider::new(
                model,
                config.flow.clone(),
                config.io.crop_side,
                config.io.flow_stack_depth,
            );
            let forward: Vec<FlowField> = flows.iter().map(|(f, _)| f.clone()).collect();
            builtin.probabilities_with_flows(sequence, &forward, &boxes)?
        }
        ProviderKind::File { .. } => {
            let provider = config.build_action_provider()?;
            provider.action_probabilities(key, sequence, &boxes)?
        }
    };

    let stored = StoredDistribution {
        labels: labels.names().to_vec(),
        probabilities: dist.probabilities().to_vec(),
    };
    stored.write_file(&path)?;
    Ok(dist)
}

fn scene_stage(
    config: &PipelineConfig,
    key: &str,
    sequence: &FrameSequence,
    out_dir: &Path,
) -> Result<SceneDistribution> {
    let dir = out_dir.join("distributions");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("scene.json");
    if path.exists() && !config.io.force {
        let stored = StoredDistribution::read_file(&path)?;
        return SceneDistribution::new(stored.probabilities);
    }
    let provider = config.build_scene_provider()?;
    let dist = provider.scene_probabilities(key, sequence)?;
    let stored = StoredDistribution {
        labels: provider.labels().names().to_vec(),
        probabilities: dist.probabilities().to_vec(),
    };
    stored.write_file(&path)?;
    Ok(dist)
}

fn decide_stage(
    config: &PipelineConfig,
    action: &ActionDistribution,
    scene: &SceneDistribution,
    prior: &ScenePriorTable,
    out_dir: &Path,
) -> Result<AbnormalityDecision> {
    let action_id = action.argmax();
    let scene_id = scene.argmax();
    let p_action = action.get(action_id);
    let p_scene = match config.abnormality.scene_probability_mode {
        SceneProbabilityMode::MaxEntry => scene.max_probability(),
        SceneProbabilityMode::Marginal => prior.scene_marginal[scene_id],
    };
    let p_sga = prior.p_scene_given_action(action_id, scene_id);
    let decision =
        decide(action_id, scene_id, p_action, p_scene, p_sga, config.abnormality.threshold)?;
    let file = std::fs::File::create(out_dir.join("decision.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &decision)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(decision)
}
