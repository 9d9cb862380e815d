//! Shared fixtures for the integration and acceptance suites.

use actionprop::features::assemble_feature_stack;
use actionprop::flow::{estimate_flow_pair, FlowField, FlowParams};
use actionprop::forest::{
    extract_patch_samples, predict_boundary, train_forest, BoundaryForest, BoundaryMap,
    ForestParams,
};
use actionprop::plane::Plane;
use actionprop::proposal::{nms, score_boxes, sort_boxes, BoxProposal, ProposalParams};
use actionprop::synth::{generate_training_set, SquareSequence, TrainingSetConfig};
use std::sync::OnceLock;

/// Flow settings for the 64x64 synthetic suites (the 5-level default needs
/// at least 128 px).
pub fn suite_flow_params() -> FlowParams {
    FlowParams { pyramid_levels: 4, ..FlowParams::default() }
}

/// Proposal settings for the 64x64 synthetic suites: a fine scale ladder
/// around the generated square sizes and no border strip, since the soft
/// boundary band is several pixels wide at this resolution.
pub fn suite_proposal_params() -> ProposalParams {
    ProposalParams {
        scales: (16..=36).step_by(2).collect(),
        aspect_ratios: vec![(2, 3), (1, 1), (3, 2)],
        step_fraction: 0.125,
        border_strip: 0,
        min_box_size: 8,
        ..ProposalParams::default()
    }
}

pub fn train_config(sequences: usize) -> TrainingSetConfig {
    TrainingSetConfig { sequences, frames_per_sequence: 4, ..TrainingSetConfig::default() }
}

/// One forest shared by the forest/proposal/classifier criteria: 20
/// sequences, half with camera translation.
pub fn shared_forest() -> &'static BoundaryForest {
    static FOREST: OnceLock<BoundaryForest> = OnceLock::new();
    FOREST.get_or_init(|| {
        let mut train = generate_training_set(&train_config(10), 11).unwrap();
        train.extend(
            generate_training_set(
                &TrainingSetConfig { camera_speed: (0.5, 1.5), ..train_config(10) },
                12,
            )
            .unwrap(),
        );
        let params = ForestParams::default();
        let mut extraction = params.clone();
        extraction.stride = 8;
        let fp = suite_flow_params();
        let mut samples = Vec::new();
        for seq in &train {
            let frames = seq.sequence.frames();
            for t in 0..frames.len() - 1 {
                let (fwd, bwd) = estimate_flow_pair(&frames[t], &frames[t + 1], &fp).unwrap();
                let stack =
                    assemble_feature_stack(&frames[t], &frames[t + 1], &fwd, &bwd).unwrap();
                samples.extend(extract_patch_samples(&stack, &seq.masks[t], &extraction).unwrap());
            }
        }
        train_forest(&samples, &params).unwrap()
    })
}

/// Boundary map plus forward flow for every frame pair of a sequence.
pub fn predict_sequence(seq: &SquareSequence, forest: &BoundaryForest) -> Vec<(BoundaryMap, FlowField)> {
    let fp = suite_flow_params();
    let frames = seq.sequence.frames();
    (0..frames.len() - 1)
        .map(|t| {
            let (fwd, bwd) = estimate_flow_pair(&frames[t], &frames[t + 1], &fp).unwrap();
            let stack = assemble_feature_stack(&frames[t], &frames[t + 1], &fwd, &bwd).unwrap();
            (predict_boundary(&stack, forest).unwrap(), fwd)
        })
        .collect()
}

/// Top-1 proposal for a boundary map under the suite parameters.
pub fn top_proposal(map: &BoundaryMap) -> Option<BoxProposal> {
    let mut all = score_boxes(map, &suite_proposal_params()).unwrap();
    sort_boxes(&mut all);
    nms(&all, 0.5).first().copied()
}

/// Best F-measure over a threshold sweep, with boundary matching at the
/// given pixel tolerance (predictions count as hits within `tolerance` of a
/// truth pixel and vice versa).
pub fn boundary_f_measure(pred: &BoundaryMap, truth: &Plane, tolerance: usize) -> f64 {
    let (w, h) = (truth.width(), truth.height());
    let dilate = |src: &Plane| {
        let mut out = Plane::zeros(w, h);
        let r = tolerance as isize;
        for y in 0..h as isize {
            for x in 0..w as isize {
                'search: for dy in -r..=r {
                    for dx in -r..=r {
                        if src.get_clamped(x + dx, y + dy) > 0.5 {
                            out.set(x as usize, y as usize, 1.0);
                            break 'search;
                        }
                    }
                }
            }
        }
        out
    };
    let truth_dilated = dilate(truth);
    let mut best = 0.0f64;
    for step in 1..19 {
        let thr = step as f32 * 0.05;
        let mut bin = Plane::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                if pred.get(x, y) > thr {
                    bin.set(x, y, 1.0);
                }
            }
        }
        let bin_dilated = dilate(&bin);
        let (mut tp_p, mut np, mut tp_r, mut nt) = (0f64, 0f64, 0f64, 0f64);
        for y in 0..h {
            for x in 0..w {
                if bin.get(x, y) > 0.5 {
                    np += 1.0;
                    if truth_dilated.get(x, y) > 0.5 {
                        tp_p += 1.0;
                    }
                }
                if truth.get(x, y) > 0.5 {
                    nt += 1.0;
                    if bin_dilated.get(x, y) > 0.5 {
                        tp_r += 1.0;
                    }
                }
            }
        }
        if np == 0.0 || nt == 0.0 {
            continue;
        }
        let precision = tp_p / np;
        let recall = tp_r / nt;
        if precision + recall > 0.0 {
            best = best.max(2.0 * precision * recall / (precision + recall));
        }
    }
    best
}
