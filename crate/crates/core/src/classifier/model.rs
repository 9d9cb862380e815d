//! Multinomial logistic regression over crop descriptors, fit by full-batch
//! gradient descent with a halving line search (loss never increases).

use super::{ActionDistribution, CropDescriptor, LabelTable};
use crate::error::{Error, Result};
use std::io::{Read, Write};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ClassifierHyper {
    fn default() -> Self {
        ClassifierHyper { learning_rate: 0.1, epochs: 200, l2: 1e-4, seed: 1 }
    }
}

/// Linear model: K x D weights plus K biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearActionModel {
    pub labels: LabelTable,
    pub descriptor_len: usize,
    /// Row-major K x D.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// The training objective, exposed so tests can difference it numerically:
/// mean cross-entropy plus (l2/2)*||W||^2 with unregularized biases.
pub struct LogisticProblem {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
    pub classes: usize,
    pub l2: f64,
}

impl LogisticProblem {
    pub fn dims(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn loss(&self, weights: &[f64], bias: &[f64]) -> f64 {
        let n = self.inputs.len() as f64;
        let mut total = 0.0;
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let p = softmax(&logits(weights, bias, x, self.classes));
            total -= p[*y].max(1e-300).ln();
        }
        total / n + 0.5 * self.l2 * weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn gradient(&self, weights: &[f64], bias: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dims();
        let n = self.inputs.len() as f64;
        let mut gw = vec![0.0; weights.len()];
        let mut gb = vec![0.0; bias.len()];
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let p = softmax(&logits(weights, bias, x, self.classes));
            for k in 0..self.classes {
                let err = p[k] - if k == *y { 1.0 } else { 0.0 };
                gb[k] += err;
                let row = &mut gw[k * d..(k + 1) * d];
                for (g, xv) in row.iter_mut().zip(x) {
                    *g += err * xv;
                }
            }
        }
        for g in &mut gw {
            *g /= n;
        }
        for g in &mut gb {
            *g /= n;
        }
        for (g, w) in gw.iter_mut().zip(weights) {
            *g += self.l2 * w;
        }
        (gw, gb)
    }
}

fn logits(weights: &[f64], bias: &[f64], x: &[f64], classes: usize) -> Vec<f64> {
    let d = x.len();
    (0..classes)
        .map(|k| {
            bias[k]
                + weights[k * d..(k + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
        })
        .collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Fits the model. Deterministic (zero initialization, fixed step
/// schedule); each epoch's accepted step never increases the loss.
pub fn train_classifier(
    descriptors: &[CropDescriptor],
    labels: &[usize],
    table: &LabelTable,
    hyper: &ClassifierHyper,
) -> Result<LinearActionModel> {
    if descriptors.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} descriptors vs {} labels",
            descriptors.len(),
            labels.len()
        )));
    }
    if descriptors.is_empty() {
        return Err(Error::DegenerateInput("no training descriptors".into()));
    }
    let k = table.len();
    let distinct = {
        let mut seen = vec![false; k];
        for y in labels {
            if *y >= k {
                return Err(Error::InvalidValue(format!("label id {y} outside vocabulary")));
            }
            seen[*y] = true;
        }
        seen.iter().filter(|s| **s).count()
    };
    if distinct < 2 {
        return Err(Error::DegenerateInput("training needs at least 2 classes present".into()));
    }
    let d = descriptors[0].len();
    for desc in descriptors {
        if desc.len() != d {
            return Err(Error::DimensionMismatch("descriptor lengths differ".into()));
        }
    }
    if hyper.learning_rate <= 0.0 || hyper.epochs == 0 {
        return Err(Error::InvalidConfig("learning rate and epochs must be positive".into()));
    }

    let problem = LogisticProblem {
        inputs: descriptors
            .iter()
            .map(|desc| desc.values().iter().map(|v| *v as f64).collect())
            .collect(),
        targets: labels.to_vec(),
        classes: k,
        l2: hyper.l2,
    };

    let mut weights = vec![0.0f64; k * d];
    let mut bias = vec![0.0f64; k];
    let mut loss = problem.loss(&weights, &bias);
    let mut lr = hyper.learning_rate;

    for _ in 0..hyper.epochs {
        let (gw, gb) = problem.gradient(&weights, &bias);
        loop {
            let cand_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - lr * g).collect();
            let cand_b: Vec<f64> = bias.iter().zip(&gb).map(|(b, g)| b - lr * g).collect();
            let cand_loss = problem.loss(&cand_w, &cand_b);
            if cand_loss <= loss + 1e-12 {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                lr = (lr * 1.1).min(hyper.learning_rate * 10.0);
                break;
            }
            lr *= 0.5;
            if lr < 1e-14 {
                break; // converged to a plateau; keep current parameters
            }
        }
    }

    if !loss.is_finite() {
        return Err(Error::Numerical("classifier training produced non-finite loss".into()));
    }

    Ok(LinearActionModel { labels: table.clone(), descriptor_len: d, weights, bias })
}

/// Softmax of the linear scores.
pub fn classify(descriptor: &CropDescriptor, model: &LinearActionModel) -> Result<ActionDistribution> {
    if descriptor.len() != model.descriptor_len {
        return Err(Error::DimensionMismatch(format!(
            "descriptor length {} vs model {}",
            descriptor.len(),
            model.descriptor_len
        )));
    }
    let x: Vec<f64> = descriptor.values().iter().map(|v| *v as f64).collect();
    let p = softmax(&logits(&model.weights, &model.bias, &x, model.labels.len()));
    ActionDistribution::new(p)
}

const MODEL_MAGIC: &[u8; 4] = b"ALM1";
const MODEL_VERSION: u32 = 1;

/// Versioned binary model file: magic, version, K, D, K label strings
/// (u32 length + UTF-8), then K*D weights and K biases as float32.
pub fn write_action_model<W: Write>(model: &LinearActionModel, mut sink: W) -> Result<()> {
    sink.write_all(MODEL_MAGIC)?;
    sink.write_all(&MODEL_VERSION.to_le_bytes())?;
    sink.write_all(&(model.labels.len() as u32).to_le_bytes())?;
    sink.write_all(&(model.descriptor_len as u32).to_le_bytes())?;
    for name in model.labels.names() {
        let bytes = name.as_bytes();
        sink.write_all(&(bytes.len() as u32).to_le_bytes())?;
        sink.write_all(bytes)?;
    }
    for w in &model.weights {
        sink.write_all(&(*w as f32).to_le_bytes())?;
    }
    for b in &model.bias {
        sink.write_all(&(*b as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_action_model<R: Read>(mut source: R) -> Result<LinearActionModel> {
    let mut magic = [0u8; 4];
    source.read_exact(&mut magic).map_err(|_| Error::Truncated("model magic".into()))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
            found: format!("{magic:?}"),
        });
    }
    let version = read_u32(&mut source)?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedFormat(format!("model version {version}")));
    }
    let k = read_u32(&mut source)? as usize;
    let d = read_u32(&mut source)? as usize;
    if k == 0 || d == 0 || k > 1 << 20 || d > 1 << 24 {
        return Err(Error::InvalidValue(format!("implausible model dims {k}x{d}")));
    }
    let mut names = Vec::with_capacity(k);
    for _ in 0..k {
        let len = read_u32(&mut source)? as usize;
        if len > 1 << 16 {
            return Err(Error::InvalidValue("implausible label length".into()));
        }
        let mut buf = vec![0u8; len];
        source.read_exact(&mut buf).map_err(|_| Error::Truncated("label name".into()))?;
        names.push(
            String::from_utf8(buf)
                .map_err(|_| Error::InvalidValue("label name is not UTF-8".into()))?,
        );
    }
    let mut weights = Vec::with_capacity(k * d);
    for _ in 0..k * d {
        weights.push(read_f32(&mut source)? as f64);
    }
    let mut bias = Vec::with_capacity(k);
    for _ in 0..k {
        bias.push(read_f32(&mut source)? as f64);
    }
    if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("model parameters must be finite".into()));
    }
    Ok(LinearActionModel {
        labels: LabelTable::new(names)?,
        descriptor_len: d,
        weights,
        bias,
    })
}

fn read_u32<R: Read>(source: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    source.read_exact(&mut b).map_err(|_| Error::Truncated("model u32".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32<R: Read>(source: &mut R) -> Result<f32> {
    let mut b = [0u8; 4];
    source.read_exact(&mut b).map_err(|_| Error::Truncated("model f32".into()))?;
    Ok(f32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn descriptor_from(values: Vec<f32>) -> CropDescriptor {
        CropDescriptor::from_raw(values)
    }

    fn separable_set() -> (Vec<CropDescriptor>, Vec<usize>, LabelTable) {
        let mut descriptors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let shift = i as f32 * 0.01;
            descriptors.push(descriptor_from(vec![1.0 + shift, 0.0, shift]));
            labels.push(0);
            descriptors.push(descriptor_from(vec![0.0, 1.0 + shift, shift]));
            labels.push(1);
        }
        let table = LabelTable::new(vec!["a".into(), "b".into()]).unwrap();
        (descriptors, labels, table)
    }

    #[test]
    fn separable_set_reaches_full_training_accuracy() {
        let (descriptors, labels, table) = separable_set();
        let model =
            train_classifier(&descriptors, &labels, &table, &ClassifierHyper::default()).unwrap();
        for (desc, y) in descriptors.iter().zip(&labels) {
            let dist = classify(desc, &model).unwrap();
            assert_eq!(dist.argmax(), *y);
        }
    }

    #[test]
    fn loss_is_monotone_across_epochs() {
        let (descriptors, labels, table) = separable_set();
        let mut losses = Vec::new();
        for epochs in 1..=12 {
            let hyper = ClassifierHyper { epochs, ..ClassifierHyper::default() };
            let model = train_classifier(&descriptors, &labels, &table, &hyper).unwrap();
            let problem = LogisticProblem {
                inputs: descriptors
                    .iter()
                    .map(|d| d.values().iter().map(|v| *v as f64).collect())
                    .collect(),
                targets: labels.clone(),
                classes: 2,
                l2: hyper.l2,
            };
            losses.push(problem.loss(&model.weights, &model.bias));
        }
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "loss increased: {pair:?}");
        }
    }

    #[test]
    fn single_class_input_is_rejected() {
        let descriptors = vec![descriptor_from(vec![1.0, 0.0]); 4];
        let labels = vec![0usize; 4];
        let table = LabelTable::new(vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(
            train_classifier(&descriptors, &labels, &table, &ClassifierHyper::default()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn zero_model_classifies_uniformly() {
        let table =
            LabelTable::new(vec!["a".into(), "b".into(), "c".into(), "d".into()]).unwrap();
        let model = LinearActionModel {
            labels: table,
            descriptor_len: 3,
            weights: vec![0.0; 12],
            bias: vec![0.0; 4],
        };
        let dist = classify(&descriptor_from(vec![0.3, 0.1, 0.5]), &model).unwrap();
        for p in dist.probabilities() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[1.0, 2.0, 3.0]);
        let b = softmax(&[101.0, 102.0, 103.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let n = 6;
            let d = 4;
            let k = 3;
            let problem = LogisticProblem {
                inputs: (0..n)
                    .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect(),
                targets: (0..n).map(|_| rng.gen_range(0..k)).collect(),
                classes: k,
                l2: 1e-3,
            };
            let weights: Vec<f64> = (0..k * d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let bias: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let (gw, gb) = problem.gradient(&weights, &bias);
            let h = 1e-5;
            for i in 0..weights.len() {
                let mut wp = weights.clone();
                let mut wm = weights.clone();
                wp[i] += h;
                wm[i] -= h;
                let numeric = (problem.loss(&wp, &bias) - problem.loss(&wm, &bias)) / (2.0 * h);
                let denom = numeric.abs().max(gw[i].abs()).max(1e-8);
                assert!(
                    (numeric - gw[i]).abs() / denom < 1e-4,
                    "weight {i}: analytic {} vs numeric {numeric}",
                    gw[i]
                );
            }
            for i in 0..bias.len() {
                let mut bp = bias.clone();
                let mut bm = bias.clone();
                bp[i] += h;
                bm[i] -= h;
                let numeric =
                    (problem.loss(&weights, &bp) - problem.loss(&weights, &bm)) / (2.0 * h);
                let denom = numeric.abs().max(gb[i].abs()).max(1e-8);
                assert!((numeric - gb[i]).abs() / denom < 1e-4);
            }
        }
    }

    #[test]
    fn model_file_round_trips() {
        let (descriptors, labels, table) = separable_set();
        let hyper = ClassifierHyper { epochs: 20, ..ClassifierHyper::default() };
        let model = train_classifier(&descriptors, &labels, &table, &hyper).unwrap();
        let mut buf = Vec::new();
        write_action_model(&model, &mut buf).unwrap();
        let back = read_action_model(buf.as_slice()).unwrap();
        assert_eq!(back.labels, model.labels);
        assert_eq!(back.descriptor_len, model.descriptor_len);
        // parameters stored as f32
        for (a, b) in model.weights.iter().zip(&back.weights) {
            assert!((a - b).abs() < 1e-6);
        }
        buf[0] = b'Z';
        assert!(matches!(read_action_model(buf.as_slice()), Err(Error::BadMagic { .. })));
    }
}
