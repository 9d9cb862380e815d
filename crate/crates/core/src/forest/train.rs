//! Forest training: bootstrap per tree, structured-label discretization at
//! each node (random pixel pairs, principal-direction projection, median
//! split into two pseudo-classes), Gini-scored axis-aligned splits.

use super::{
    BoundaryForest, ForestParams, Node, PatchSample, Tree, FEATURES_PER_CHANNEL, MASK_PIXELS,
};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Trains a forest; deterministic given `params.rng_seed` (trees are built
/// from independent seeded streams, so tree-level parallelism cannot change
/// the result). All samples sharing one label yields a single-leaf forest.
pub fn train_forest(samples: &[PatchSample], params: &ForestParams) -> Result<BoundaryForest> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::DegenerateInput("no training samples".into()));
    }
    let feature_len = samples[0].features.len();
    if feature_len == 0 || feature_len % FEATURES_PER_CHANNEL != 0 {
        return Err(Error::DimensionMismatch(format!(
            "feature length {feature_len} is not a multiple of {FEATURES_PER_CHANNEL}"
        )));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.features.len() != feature_len {
            return Err(Error::DimensionMismatch(format!(
                "sample {i} has {} features, expected {feature_len}",
                s.features.len()
            )));
        }
        if s.label_mask.len() != MASK_PIXELS {
            return Err(Error::DimensionMismatch(format!(
                "sample {i} label mask has {} pixels, expected {MASK_PIXELS}",
                s.label_mask.len()
            )));
        }
    }

    let trees: Vec<Tree> = (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(params.rng_seed.wrapping_add(t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let n = samples.len();
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                samples,
                params,
                feature_len,
                rng,
                nodes: Vec::new(),
            };
            builder.build(bootstrap, 0);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(BoundaryForest {
        params: params.clone(),
        feature_len,
        channel_count: feature_len / FEATURES_PER_CHANNEL,
        trees,
    })
}

struct TreeBuilder<'a> {
    samples: &'a [PatchSample],
    params: &'a ForestParams,
    feature_len: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Builds the subtree for `indices`, returns its node id.
    fn build(&mut self, indices: Vec<usize>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if depth >= self.params.max_depth
            || indices.len() < 2 * self.params.min_samples_leaf
            || self.masks_identical(&indices)
        {
            self.nodes.push(self.make_leaf(&indices));
            return id;
        }

        let classes = match self.discretize(&indices) {
            Some(c) => c,
            None => {
                self.nodes.push(self.make_leaf(&indices));
                return id;
            }
        };

        let split = self.best_split(&indices, &classes);
        let (feature, threshold) = match split {
            Some(s) => s,
            None => {
                self.nodes.push(self.make_leaf(&indices));
                return id;
            }
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|i| self.samples[**i].features[feature] <= threshold);

        // placeholder; children ids are patched in afterwards
        self.nodes.push(Node::Split { feature: feature as u32, threshold, left: 0, right: 0 });
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id as usize] {
            *l = left;
            *r = right;
        }
        id
    }

    fn masks_identical(&self, indices: &[usize]) -> bool {
        let first = &self.samples[indices[0]].label_mask;
        indices.iter().all(|i| &self.samples[*i].label_mask == first)
    }

    fn make_leaf(&self, indices: &[usize]) -> Node {
        let mut soft = vec![0.0f32; MASK_PIXELS];
        for i in indices {
            for (acc, v) in soft.iter_mut().zip(&self.samples[*i].label_mask) {
                *acc += *v as f32;
            }
        }
        let n = indices.len().max(1) as f32;
        for v in &mut soft {
            *v /= n;
        }
        let binary = soft.iter().map(|v| u8::from(*v > 0.5)).collect();
        Node::Leaf { soft_mask: soft, binary_mask: binary }
    }

    /// Maps each sample's mask to a pseudo-class: random pixel pairs give a
    /// binary difference vector per sample; samples are projected onto the
    /// top principal direction and split at the median. Returns None when
    /// the projections cannot separate anything.
    fn discretize(&mut self, indices: &[usize]) -> Option<Vec<u8>> {
        let m = self.params.pixel_pairs_for_projection;
        let pairs: Vec<(usize, usize)> = (0..m)
            .map(|_| (self.rng.gen_range(0..MASK_PIXELS), self.rng.gen_range(0..MASK_PIXELS)))
            .collect();

        let n = indices.len();
        let mut z = vec![0.0f32; n * m];
        for (row, idx) in indices.iter().enumerate() {
            let mask = &self.samples[*idx].label_mask;
            for (col, (a, b)) in pairs.iter().enumerate() {
                if mask[*a] != mask[*b] {
                    z[row * m + col] = 1.0;
                }
            }
        }

        let mut mean = vec![0.0f32; m];
        for row in 0..n {
            for col in 0..m {
                mean[col] += z[row * m + col];
            }
        }
        for v in &mut mean {
            *v /= n as f32;
        }

        // power iteration for the top principal direction
        let mut direction: Vec<f32> = (0..m).map(|_| self.rng.gen_range(-1.0..1.0f32)).collect();
        normalize(&mut direction)?;
        for _ in 0..15 {
            let mut next = vec![0.0f32; m];
            for row in 0..n {
                let mut dot = 0.0f32;
                for col in 0..m {
                    dot += (z[row * m + col] - mean[col]) * direction[col];
                }
                for col in 0..m {
                    next[col] += dot * (z[row * m + col] - mean[col]);
                }
            }
            if normalize(&mut next).is_none() {
                break;
            }
            direction = next;
        }

        let projections: Vec<f32> = (0..n)
            .map(|row| {
                let mut dot = 0.0f32;
                for col in 0..m {
                    dot += (z[row * m + col] - mean[col]) * direction[col];
                }
                dot
            })
            .collect();

        let mut sorted = projections.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[(n - 1) / 2];
        let split_by = |threshold: f32| -> Vec<u8> {
            projections.iter().map(|p| u8::from(*p > threshold)).collect()
        };
        let balanced = |classes: &[u8]| {
            let ones = classes.iter().filter(|c| **c == 1).count();
            ones != 0 && ones != n
        };
        let classes = split_by(median);
        if balanced(&classes) {
            return Some(classes);
        }
        // median can coincide with the majority value; projections are
        // mean-centred, so the sign split separates any two distinct values
        let classes = split_by(0.0);
        if balanced(&classes) {
            return Some(classes);
        }
        None
    }

    /// Best (feature, threshold) among `features_per_split` random candidate
    /// features by Gini gain over the pseudo-classes. Thresholds are the
    /// midpoints between consecutive distinct sorted values. Ties break on
    /// the lowest feature index, then the lowest threshold.
    fn best_split(&mut self, indices: &[usize], classes: &[u8]) -> Option<(usize, f32)> {
        let k = self.params.effective_features_per_split(self.feature_len);
        // distinct candidates via partial Fisher-Yates
        let mut pool: Vec<usize> = (0..self.feature_len).collect();
        for i in 0..k {
            let j = self.rng.gen_range(i..self.feature_len);
            pool.swap(i, j);
        }
        let candidates: Vec<usize> = pool[..k].to_vec();

        let n = indices.len();
        let total_ones = classes.iter().filter(|c| **c == 1).count();
        let parent_gini = gini(n - total_ones, total_ones);
        let min_leaf = self.params.min_samples_leaf;

        let mut best: Option<(f64, usize, f32)> = None;
        let mut pairs: Vec<(f32, u8)> = Vec::with_capacity(n);
        for f in candidates {
            pairs.clear();
            for (pos, idx) in indices.iter().enumerate() {
                pairs.push((self.samples[*idx].features[f], classes[pos]));
            }
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

            let mut left_n = 0usize;
            let mut left_ones = 0usize;
            for i in 0..n - 1 {
                left_n += 1;
                left_ones += pairs[i].1 as usize;
                if pairs[i].0 == pairs[i + 1].0 {
                    continue;
                }
                let right_n = n - left_n;
                if left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let right_ones = total_ones - left_ones;
                let weighted = (left_n as f64 * gini(left_n - left_ones, left_ones)
                    + right_n as f64 * gini(right_n - right_ones, right_ones))
                    / n as f64;
                let gain = parent_gini - weighted;
                if gain <= 1e-12 {
                    continue;
                }
                let threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                let better = match &best {
                    None => true,
                    Some((bg, bf, bt)) => {
                        gain > bg + 1e-12
                            || ((gain - bg).abs() <= 1e-12
                                && (f < *bf || (f == *bf && threshold < *bt)))
                    }
                };
                if better {
                    best = Some((gain, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn gini(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = n0 as f64 / n;
    let p1 = n1 as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn normalize(v: &mut [f32]) -> Option<()> {
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm < 1e-12 {
        return None;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Some(())
}

impl BoundaryForest {
    /// Mean soft mask over all trees for one feature vector.
    pub fn predict_sample_mask(&self, features: &[f32]) -> Vec<f32> {
        let mut acc = vec![0.0f32; MASK_PIXELS];
        for tree in &self.trees {
            if let Node::Leaf { soft_mask, .. } = tree.leaf_for(|f| features[f]) {
                for (a, v) in acc.iter_mut().zip(soft_mask) {
                    *a += v;
                }
            }
        }
        let n = self.trees.len().max(1) as f32;
        for a in &mut acc {
            *a /= n;
        }
        acc
    }
}

#[cfg(test)]
mod tests {


    use super::*;

    fn sample(feature_a: f32, mask: Vec<u8>, noise: f32) -> PatchSample {
        let mut features = vec![0.0f32; FEATURES_PER_CHANNEL];
        features[0] = feature_a;
        features[1] = noise;
        PatchSample { features, label_mask: mask }
    }

    /// Left-half-boundary mask: distinguishable from the empty mask by
    /// pixel-pair differences (a uniform all-ones mask would not be).
    fn half_mask() -> Vec<u8> {
        let mut mask = vec![0u8; MASK_PIXELS];
        for (i, v) in mask.iter_mut().enumerate() {
            if i % 16 < 8 {
                *v = 1;
            }
        }
        mask
    }

    fn two_cluster_set() -> Vec<PatchSample> {
        let mut set = Vec::new();
        for i in 0..8 {
            set.push(sample(0.0, vec![0; MASK_PIXELS], i as f32 * 0.1));
            set.push(sample(1.0, half_mask(), i as f32 * 0.07));
        }
        set
    }

    #[test]
    fn all_zero_masks_give_single_leaf_zero_forest() {
        let samples: Vec<PatchSample> =
            (0..10).map(|i| sample(i as f32, vec![0; MASK_PIXELS], 0.0)).collect();
        let forest = train_forest(&samples, &ForestParams::default()).unwrap();
        for tree in &forest.trees {
            assert_eq!(tree.nodes.len(), 1);
            match &tree.nodes[0] {
                Node::Leaf { soft_mask, .. } => assert!(soft_mask.iter().all(|v| *v == 0.0)),
                _ => panic!("expected leaf"),
            }
        }
    }

    #[test]
    fn separable_clusters_split_on_the_informative_feature() {
        let samples = two_cluster_set();
        let params = ForestParams {
            tree_count: 4,
            min_samples_leaf: 2,
            features_per_split: FEATURES_PER_CHANNEL,
            rng_seed: 7,
            ..ForestParams::default()
        };
        let forest = train_forest(&samples, &params).unwrap();
        for tree in &forest.trees {
            match &tree.nodes[0] {
                Node::Split { feature, .. } => assert_eq!(*feature, 0),
                _ => panic!("expected root split"),
            }
        }
        // training-set prediction is exact
        for s in &samples {
            let predicted = forest.predict_sample_mask(&s.features);
            for (p, t) in predicted.iter().zip(&s.label_mask) {
                assert_eq!(*p, *t as f32);
            }
        }
    }

    #[test]
    fn training_is_deterministic_for_fixed_seed() {
        let samples = two_cluster_set();
        let params = ForestParams { rng_seed: 42, min_samples_leaf: 2, ..ForestParams::default() };
        let a = train_forest(&samples, &params).unwrap();
        let b = train_forest(&samples, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(train_forest(&[], &ForestParams::default()).is_err());
    }

    #[test]
    fn inconsistent_feature_length_is_rejected() {
        let mut samples = two_cluster_set();
        samples[0].features.push(0.0);
        assert!(train_forest(&samples, &ForestParams::default()).is_err());
    }
}
