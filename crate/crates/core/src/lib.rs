//! Motion-salient action region proposals and scene-prior abnormality
//! detection for image sequences.
//!
//! The pipeline: dense forward/backward optical flow, per-pixel spatial and
//! temporal cues (gradients, pixel-wise HOG warping error, motion boundary
//! histograms), a structured random forest producing a soft motion-boundary
//! map, border-contrast box scoring on that map, classifier input
//! preparation from the selected region, and a Bayes-prior decision on
//! whether the recognized action is abnormal for the recognized scene.

pub mod abnormal;
pub mod classifier;
pub mod error;
pub mod features;
pub mod flow;
pub mod forest;
pub mod frame;
pub mod io;
pub mod pipeline;
pub mod plane;
pub mod proposal;
pub mod synth;

pub use error::{Error, Result};
pub use flow::{estimate_flow, estimate_flow_pair, warp_image, FlowField, FlowParams};
pub use forest::{predict_boundary, train_forest, BoundaryForest, BoundaryMap, ForestParams};
pub use frame::{Frame, FrameSequence};
pub use proposal::{nms, score_boxes, select_action_region, BoxProposal, ProposalParams};
