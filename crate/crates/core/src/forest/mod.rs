//! Structured random forest mapping local feature-stack patches to binary
//! boundary masks, averaged over trees and overlapping patches into a soft
//! boundary map.
//!
//! Patch geometry: a 32x32 feature window downsampled 2x (16x16 per channel)
//! plus pairwise differences of 4x4 cell means, predicting the 16x16
//! boundary mask centred on the window.

mod patch;
mod serial;
mod train;

pub use patch::{extract_patch_samples, PatchFeatureExtractor, FEATURES_PER_CHANNEL};
pub use serial::{read_forest, write_forest};
pub use train::train_forest;

use crate::error::{Error, Result};
use crate::features::FeatureStack;
use crate::plane::Plane;
use serde::{Deserialize, Serialize};

pub const PATCH_SIZE: usize = 32;
pub const MASK_SIZE: usize = 16;
pub const MASK_PIXELS: usize = MASK_SIZE * MASK_SIZE;

/// One training sample: the flattened patch features and the binary
/// boundary mask centred on the patch.
#[derive(Debug, Clone)]
pub struct PatchSample {
    pub features: Vec<f32>,
    /// 16x16 row-major, values 0 or 1.
    pub label_mask: Vec<u8>,
}

impl PatchSample {
    pub fn has_boundary(&self) -> bool {
        self.label_mask.iter().any(|v| *v != 0)
    }
}

/// Forest hyperparameters. Defaults follow the structured-edge lineage;
/// `features_per_split = 0` means "square root of the feature length".
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
    /// Random pixel pairs used to discretize the structured labels at a node.
    pub pixel_pairs_for_projection: usize,
    /// Prediction grid stride in pixels.
    pub stride: usize,
    pub rng_seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree_count: 8,
            max_depth: 16,
            min_samples_leaf: 8,
            features_per_split: 0,
            pixel_pairs_for_projection: 256,
            stride: 2,
            rng_seed: 1,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count < 1
            || self.max_depth < 1
            || self.min_samples_leaf < 1
            || self.pixel_pairs_for_projection < 1
            || self.stride < 1
        {
            return Err(Error::InvalidConfig("forest counts and stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn effective_features_per_split(&self, feature_len: usize) -> usize {
        if self.features_per_split > 0 {
            self.features_per_split.min(feature_len)
        } else {
            ((feature_len as f64).sqrt().round() as usize).clamp(1, feature_len)
        }
    }
}

/// Binary decision tree over patch features with structured leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { feature: u32, threshold: f32, left: u32, right: u32 },
    /// Elementwise mean of the training masks that reached the leaf, plus
    /// the 0.5-thresholded binary record.
    Leaf { soft_mask: Vec<f32>, binary_mask: Vec<u8> },
}

impl Tree {
    /// Walks the tree on lazily evaluated features.
    pub fn leaf_for<F: FnMut(usize) -> f32>(&self, mut feature: F) -> &Node {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Split { feature: f, threshold, left, right } => {
                    idx = if feature(*f as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                leaf => return leaf,
            }
        }
    }
}

/// A trained boundary forest.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryForest {
    pub params: ForestParams,
    pub feature_len: usize,
    pub channel_count: usize,
    pub trees: Vec<Tree>,
}

/// Soft boundary response, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    plane: Plane,
}

impl BoundaryMap {
    pub fn new(plane: Plane) -> Result<Self> {
        if !plane.is_finite() {
            return Err(Error::InvalidValue("boundary map contains non-finite values".into()));
        }
        if plane.data().iter().any(|v| *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidValue("boundary map values must lie in [0,1]".into()));
        }
        Ok(BoundaryMap { plane })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BoundaryMap { plane: Plane::zeros(width, height) }
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.plane.get(x, y)
    }
}

/// Grid of patch centres: `ceil(extent/stride)` positions at
/// `stride/2 + k*stride`. With stride equal to the mask size the mask
/// footprints tile the raster exactly.
pub fn patch_grid(extent: usize, stride: usize) -> Vec<usize> {
    let count = extent.div_ceil(stride);
    (0..count).map(|k| stride / 2 + k * stride).collect()
}

/// Averages every tree's leaf mask over every overlapping grid patch.
pub fn predict_boundary(stack: &FeatureStack, forest: &BoundaryForest) -> Result<BoundaryMap> {
    if stack.combined.channel_count() != forest.channel_count {
        return Err(Error::DimensionMismatch(format!(
            "stack has {} channels, forest trained on {}",
            stack.combined.channel_count(),
            forest.channel_count
        )));
    }
    let extractor = PatchFeatureExtractor::new(stack);
    if extractor.feature_len() != forest.feature_len {
        return Err(Error::DimensionMismatch(format!(
            "stack yields {} features, forest trained on {}",
            extractor.feature_len(),
            forest.feature_len
        )));
    }

    let w = stack.combined.width();
    let h = stack.combined.height();
    let mut sum = vec![0.0f64; w * h];
    let mut count = vec![0u32; w * h];
    let half = MASK_SIZE as isize / 2;

    for cy in patch_grid(h, forest.params.stride) {
        for cx in patch_grid(w, forest.params.stride) {
            let mut cache: Vec<(u32, f32)> = Vec::with_capacity(forest.params.max_depth);
            for tree in &forest.trees {
                let leaf = tree.leaf_for(|f| {
                    // tiny per-patch cache: tree paths revisit few features
                    if let Some((_, v)) = cache.iter().find(|(cf, _)| *cf == f as u32) {
                        return *v;
                    }
                    let v = extractor.feature(cx, cy, f);
                    cache.push((f as u32, v));
                    v
                });
                if let Node::Leaf { soft_mask, .. } = leaf {
                    for my in 0..MASK_SIZE {
                        let y = cy as isize - half + my as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for mx in 0..MASK_SIZE {
                            let x = cx as isize - half + mx as isize;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            let i = y as usize * w + x as usize;
                            sum[i] += soft_mask[my * MASK_SIZE + mx] as f64;
                            count[i] += 1;
                        }
                    }
                }
            }
        }
    }

    let mut out = Plane::zeros(w, h);
    for i in 0..w * h {
        if count[i] > 0 {
            out.data_mut()[i] = (sum[i] / count[i] as f64).clamp(0.0, 1.0) as f32;
        }
    }
    BoundaryMap::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::assemble_feature_stack;
    use crate::flow::FlowField;
    use crate::frame::Frame;

    fn toy_stack(w: usize, h: usize) -> FeatureStack {
        let f = Frame::constant(w, h, 3, 0.5).unwrap();
        let flow = FlowField::zeros(w, h);
        assemble_feature_stack(&f, &f, &flow, &flow).unwrap()
    }

    #[test]
    fn grid_matches_ceil_counts() {
        assert_eq!(patch_grid(64, 8).len(), 8);
        assert_eq!(patch_grid(64, 8)[0], 4);
        assert_eq!(patch_grid(64, 16), vec![8, 24, 40, 56]);
        assert_eq!(patch_grid(10, 3).len(), 4);
    }

    #[test]
    fn single_leaf_forest_tiles_its_mask() {
        let stack = toy_stack(64, 64);
        let mut soft = vec![0.0f32; MASK_PIXELS];
        for my in 0..MASK_SIZE {
            for mx in 0..MASK_SIZE {
                soft[my * MASK_SIZE + mx] = (mx as f32 + my as f32) / 30.0;
            }
        }
        let binary: Vec<u8> = soft.iter().map(|v| u8::from(*v > 0.5)).collect();
        let extractor = PatchFeatureExtractor::new(&stack);
        let forest = BoundaryForest {
            params: ForestParams { stride: MASK_SIZE, ..ForestParams::default() },
            feature_len: extractor.feature_len(),
            channel_count: stack.combined.channel_count(),
            trees: vec![Tree { nodes: vec![Node::Leaf { soft_mask: soft.clone(), binary_mask: binary }] }],
        };
        let map = predict_boundary(&stack, &forest).unwrap();
        // centres at 8,24,40,56: footprints tile the raster exactly
        for y in 0..64 {
            for x in 0..64 {
                let expected = soft[(y % MASK_SIZE) * MASK_SIZE + (x % MASK_SIZE)];
                assert!((map.get(x, y) - expected).abs() < 1e-6, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn all_zero_leaves_give_zero_map() {
        let stack = toy_stack(48, 48);
        let extractor = PatchFeatureExtractor::new(&stack);
        let forest = BoundaryForest {
            params: ForestParams::default(),
            feature_len: extractor.feature_len(),
            channel_count: stack.combined.channel_count(),
            trees: vec![Tree {
                nodes: vec![Node::Leaf {
                    soft_mask: vec![0.0; MASK_PIXELS],
                    binary_mask: vec![0; MASK_PIXELS],
                }],
            }],
        };
        let map = predict_boundary(&stack, &forest).unwrap();
        assert_eq!(map.plane().max_abs(), 0.0);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let stack = toy_stack(48, 48);
        let forest = BoundaryForest {
            params: ForestParams::default(),
            feature_len: 10,
            channel_count: 7,
            trees: vec![],
        };
        assert!(predict_boundary(&stack, &forest).is_err());
    }
}
