//! Flag groups that override configuration-file values.

use actionprop::error::Error;
use actionprop::flow::FlowParams;
use actionprop::pipeline::PipelineConfig;
use actionprop::proposal::ProposalParams;
use clap::Args;
use std::path::PathBuf;

/// Mirrors the flow estimator parameters.
#[derive(Args, Debug, Clone)]
pub struct FlowFlags {
    #[arg(long = "flow.pyramid-levels")]
    pub pyramid_levels: Option<usize>,
    #[arg(long = "flow.scale-factor")]
    pub scale_factor: Option<f32>,
    #[arg(long = "flow.regularization-weight")]
    pub regularization_weight: Option<f32>,
    #[arg(long = "flow.warp-iterations")]
    pub warp_iterations: Option<usize>,
    #[arg(long = "flow.fixed-point-iterations")]
    pub fixed_point_iterations: Option<usize>,
    #[arg(long = "flow.median-filter-radius")]
    pub median_filter_radius: Option<usize>,
}

impl FlowFlags {
    pub fn apply(&self, params: &mut FlowParams) -> Result<(), Error> {
        if let Some(v) = self.pyramid_levels {
            params.pyramid_levels = v;
        }
        if let Some(v) = self.scale_factor {
            params.scale_factor = v;
        }
        if let Some(v) = self.regularization_weight {
            params.regularization_weight = v;
        }
        if let Some(v) = self.warp_iterations {
            params.warp_iterations = v;
        }
        if let Some(v) = self.fixed_point_iterations {
            params.fixed_point_iterations = v;
        }
        if let Some(v) = self.median_filter_radius {
            params.median_filter_radius = v;
        }
        params.validate()
    }
}

/// Mirrors the proposal scoring parameters.
#[derive(Args, Debug, Clone)]
pub struct ProposalFlags {
    /// Comma-separated box scales, e.g. "16,24,32".
    #[arg(long = "proposal.scales")]
    pub scales: Option<String>,
    /// Comma-separated w:h ratios, e.g. "1:2,1:1,2:1".
    #[arg(long = "proposal.aspect-ratios")]
    pub aspect_ratios: Option<String>,
    #[arg(long = "proposal.step-fraction")]
    pub step_fraction: Option<f32>,
    #[arg(long = "proposal.border-strip")]
    pub border_strip: Option<usize>,
    #[arg(long = "proposal.interior-weight")]
    pub interior_weight: Option<f64>,
    #[arg(long = "proposal.border-penalty")]
    pub border_penalty: Option<f64>,
    #[arg(long = "proposal.nms-iou")]
    pub nms_iou: Option<f64>,
    #[arg(long = "proposal.top-k")]
    pub top_k: Option<usize>,
    #[arg(long = "proposal.min-score")]
    pub min_score: Option<f64>,
}

impl ProposalFlags {
    pub fn apply(&self, params: &mut ProposalParams) -> Result<(), Error> {
        if let Some(spec) = &self.scales {
            params.scales = spec
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::InvalidConfig(format!("scales: {e}")))
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(spec) = &self.aspect_ratios {
            params.aspect_ratios = spec
                .split(',')
                .map(|pair| {
                    let (a, b) = pair
                        .trim()
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidConfig(format!("ratio {pair} is not w:h")))?;
                    let a = a
                        .parse::<u32>()
                        .map_err(|e| Error::InvalidConfig(format!("ratio: {e}")))?;
                    let b = b
                        .parse::<u32>()
                        .map_err(|e| Error::InvalidConfig(format!("ratio: {e}")))?;
                    Ok::<(u32, u32), Error>((a, b))
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = self.step_fraction {
            params.step_fraction = v;
        }
        if let Some(v) = self.border_strip {
            params.border_strip = v;
        }
        if let Some(v) = self.interior_weight {
            params.interior_weight = v;
        }
        if let Some(v) = self.border_penalty {
            params.border_penalty = v;
        }
        if let Some(v) = self.nms_iou {
            params.nms_iou = v;
        }
        if let Some(v) = self.top_k {
            params.top_k = v;
        }
        if let Some(v) = self.min_score {
            params.min_score = v;
        }
        params.validate()
    }
}

/// Model paths, providers, and I/O switches shared by pipeline commands.
#[derive(Args, Debug, Clone)]
pub struct RunFlags {
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[arg(long = "action-model")]
    pub action_model: Option<PathBuf>,
    #[arg(long = "scene-centroids")]
    pub scene_centroids: Option<PathBuf>,
    #[arg(long = "scene-prior")]
    pub scene_prior: Option<PathBuf>,
    /// Directory of stored per-sequence action distributions.
    #[arg(long = "action-dist-dir")]
    pub action_dist_dir: Option<PathBuf>,
    /// Directory of stored per-sequence scene distributions.
    #[arg(long = "scene-dist-dir")]
    pub scene_dist_dir: Option<PathBuf>,
    /// Recompute stages even when cached outputs exist.
    #[arg(long)]
    pub force: bool,
    #[arg(long = "crop-side")]
    pub crop_side: Option<usize>,
    /// Flow stacking depth L (2L temporal channels).
    #[arg(long = "stack-depth")]
    pub stack_depth: Option<usize>,
    /// Median smoothing of the selected box track.
    #[arg(long = "smooth-boxes")]
    pub smooth_boxes: bool,
}

impl RunFlags {
    pub fn apply(&self, config: &mut PipelineConfig) -> Result<(), Error> {
        use actionprop::pipeline::ProviderKind;
        if let Some(p) = &self.forest {
            config.models.boundary_forest = Some(p.clone());
        }
        if let Some(p) = &self.action_model {
            config.models.action_model = Some(p.clone());
        }
        if let Some(p) = &self.scene_centroids {
            config.models.scene_centroids = Some(p.clone());
        }
        if let Some(p) = &self.scene_prior {
            config.models.scene_prior = Some(p.clone());
        }
        if let Some(dir) = &self.action_dist_dir {
            config.providers.action = ProviderKind::File { dir: dir.clone() };
        }
        if let Some(dir) = &self.scene_dist_dir {
            config.providers.scene = ProviderKind::File { dir: dir.clone() };
        }
        if self.force {
            config.io.force = true;
        }
        if let Some(v) = self.crop_side {
            config.io.crop_side = v;
        }
        if let Some(v) = self.stack_depth {
            config.io.flow_stack_depth = v;
        }
        if self.smooth_boxes {
            config.io.smooth_boxes = true;
        }
        Ok(())
    }
}
