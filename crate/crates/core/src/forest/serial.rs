//! Versioned binary forest files.
//!
//! Layout (all little-endian):
//!   magic "ABF1", version u32,
//!   params: tree_count, max_depth, min_samples_leaf, features_per_split,
//!           pixel_pairs_for_projection, stride (u32 each), rng_seed u64,
//!   feature_len u32, channel_count u32, tree count u32,
//!   per tree: node count u32, then per node a tag byte:
//!     0 = split: feature u32, threshold f32, left u32, right u32
//!     1 = leaf:  256 soft-mask f32 (the binary record is the soft mask
//!         thresholded at 0.5 and is rebuilt on read)

use super::{BoundaryForest, ForestParams, Node, Tree, MASK_PIXELS};
use crate::error::{Error, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"ABF1";
const VERSION: u32 = 1;

pub fn write_forest<W: Write>(forest: &BoundaryForest, mut sink: W) -> Result<()> {
    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    let p = &forest.params;
    for v in [
        p.tree_count,
        p.max_depth,
        p.min_samples_leaf,
        p.features_per_split,
        p.pixel_pairs_for_projection,
        p.stride,
    ] {
        sink.write_all(&(v as u32).to_le_bytes())?;
    }
    sink.write_all(&p.rng_seed.to_le_bytes())?;
    sink.write_all(&(forest.feature_len as u32).to_le_bytes())?;
    sink.write_all(&(forest.channel_count as u32).to_le_bytes())?;
    sink.write_all(&(forest.trees.len() as u32).to_le_bytes())?;
    for tree in &forest.trees {
        sink.write_all(&(tree.nodes.len() as u32).to_le_bytes())?;
        for node in &tree.nodes {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    sink.write_all(&[0u8])?;
                    sink.write_all(&feature.to_le_bytes())?;
                    sink.write_all(&threshold.to_le_bytes())?;
                    sink.write_all(&left.to_le_bytes())?;
                    sink.write_all(&right.to_le_bytes())?;
                }
                Node::Leaf { soft_mask, .. } => {
                    sink.write_all(&[1u8])?;
                    for v in soft_mask {
                        sink.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn read_forest<R: Read>(mut source: R) -> Result<BoundaryForest> {
    let mut magic = [0u8; 4];
    read_exact(&mut source, &mut magic, "forest magic")?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: format!("{magic:?}"),
        });
    }
    let version = read_u32(&mut source)?;
    if version != VERSION {
        return Err(Error::UnsupportedFormat(format!("forest file version {version}")));
    }
    let params = ForestParams {
        tree_count: read_u32(&mut source)? as usize,
        max_depth: read_u32(&mut source)? as usize,
        min_samples_leaf: read_u32(&mut source)? as usize,
        features_per_split: read_u32(&mut source)? as usize,
        pixel_pairs_for_projection: read_u32(&mut source)? as usize,
        stride: read_u32(&mut source)? as usize,
        rng_seed: read_u64(&mut source)?,
    };
    let feature_len = read_u32(&mut source)? as usize;
    let channel_count = read_u32(&mut source)? as usize;
    let tree_count = read_u32(&mut source)? as usize;
    if tree_count > 1_000_000 {
        return Err(Error::InvalidValue(format!("implausible tree count {tree_count}")));
    }

    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        let node_count = read_u32(&mut source)? as usize;
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let mut tag = [0u8; 1];
            read_exact(&mut source, &mut tag, "node tag")?;
            match tag[0] {
                0 => {
                    let feature = read_u32(&mut source)?;
                    let threshold = read_f32(&mut source)?;
                    if !threshold.is_finite() {
                        return Err(Error::InvalidValue("non-finite split threshold".into()));
                    }
                    let left = read_u32(&mut source)?;
                    let right = read_u32(&mut source)?;
                    nodes.push(Node::Split { feature, threshold, left, right });
                }
                1 => {
                    let mut soft = Vec::with_capacity(MASK_PIXELS);
                    for _ in 0..MASK_PIXELS {
                        let v = read_f32(&mut source)?;
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::InvalidValue(format!(
                                "leaf mask value {v} outside [0,1]"
                            )));
                        }
                        soft.push(v);
                    }
                    let binary = soft.iter().map(|v| u8::from(*v > 0.5)).collect();
                    nodes.push(Node::Leaf { soft_mask: soft, binary_mask: binary });
                }
                t => return Err(Error::UnsupportedFormat(format!("unknown node tag {t}"))),
            }
        }
        for node in &nodes {
            if let Node::Split { feature, left, right, .. } = node {
                if *feature as usize >= feature_len
                    || *left as usize >= nodes.len()
                    || *right as usize >= nodes.len()
                {
                    return Err(Error::InvalidValue("split indices out of range".into()));
                }
            }
        }
        trees.push(Tree { nodes });
    }

    Ok(BoundaryForest { params, feature_len, channel_count, trees })
}

fn read_exact<R: Read>(source: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    source
        .read_exact(buf)
        .map_err(|_| Error::Truncated(format!("forest file ended inside {what}")))
}

fn read_u32<R: Read>(source: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(source, &mut b, "u32")?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(source: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(source, &mut b, "u64")?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32<R: Read>(source: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    read_exact(source, &mut b, "f32")?;
    Ok(f32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{train_forest, PatchSample, FEATURES_PER_CHANNEL};

    fn toy_forest() -> BoundaryForest {
        let mut samples = Vec::new();
        for i in 0..12 {
            let mut features = vec![0.0f32; FEATURES_PER_CHANNEL];
            features[0] = (i % 2) as f32;
            samples.push(PatchSample { features, label_mask: vec![(i % 2) as u8; MASK_PIXELS] });
        }
        train_forest(
            &samples,
            &ForestParams {
                tree_count: 3,
                min_samples_leaf: 2,
                features_per_split: FEATURES_PER_CHANNEL,
                ..ForestParams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let forest = toy_forest();
        let mut buf = Vec::new();
        write_forest(&forest, &mut buf).unwrap();
        let back = read_forest(buf.as_slice()).unwrap();
        assert_eq!(forest, back);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let forest = toy_forest();
        let mut buf = Vec::new();
        write_forest(&forest, &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_forest(buf.as_slice()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let forest = toy_forest();
        let mut buf = Vec::new();
        write_forest(&forest, &mut buf).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(matches!(read_forest(buf.as_slice()), Err(Error::Truncated(_))));
    }
}
