//! Action probabilities from an action-region crop: a pluggable provider
//! interface with a built-in descriptor + multinomial-logistic classifier
//! standing in for heavyweight networks, plus a file-based provider for
//! externally computed distributions.

mod descriptor;
mod model;
mod provider;

pub use descriptor::{describe_crop, descriptor_len, CropDescriptor};
pub use model::{
    classify, read_action_model, train_classifier, write_action_model, ClassifierHyper,
    LinearActionModel, LogisticProblem,
};
pub use provider::{ActionProvider, BuiltinActionProvider, FileActionProvider, StoredDistribution};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense label vocabulary: index is the label id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    names: Vec<String>,
}

impl LabelTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidValue("label table is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::InvalidValue(format!("duplicate label {n}")));
            }
        }
        Ok(LabelTable { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Checks a probability vector: entries in [0,1], sum within 1e-6 of one.
pub(crate) fn check_distribution(probabilities: &[f64]) -> Result<()> {
    if probabilities.is_empty() {
        return Err(Error::InvalidValue("empty probability vector".into()));
    }
    for p in probabilities {
        if !p.is_finite() || *p < 0.0 || *p > 1.0 + 1e-9 {
            return Err(Error::InvalidValue(format!("probability {p} outside [0,1]")));
        }
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidValue(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Probability distribution over the action vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probabilities: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        check_distribution(&probabilities)?;
        Ok(ActionDistribution { probabilities })
    }

    pub fn uniform(k: usize) -> Self {
        ActionDistribution { probabilities: vec![1.0 / k as f64; k] }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, id: usize) -> f64 {
        self.probabilities[id]
    }

    /// Highest-probability id; ties resolve to the lowest id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }

    /// Elementwise mean of several distributions, renormalized.
    pub fn mean(distributions: &[ActionDistribution]) -> Result<ActionDistribution> {
        if distributions.is_empty() {
            return Err(Error::InvalidValue("cannot average zero distributions".into()));
        }
        let k = distributions[0].len();
        let mut acc = vec![0.0f64; k];
        for d in distributions {
            if d.len() != k {
                return Err(Error::DimensionMismatch("distribution lengths differ".into()));
            }
            for (a, p) in acc.iter_mut().zip(&d.probabilities) {
                *a += p;
            }
        }
        let total: f64 = acc.iter().sum();
        for a in &mut acc {
            *a /= total;
        }
        ActionDistribution::new(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sums_and_negative_entries() {
        assert!(ActionDistribution::new(vec![0.7, 0.2]).is_err());
        assert!(ActionDistribution::new(vec![1.2, -0.2]).is_err());
        assert!(ActionDistribution::new(vec![0.7, 0.3]).is_ok());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let d = ActionDistribution::new(vec![0.4, 0.4, 0.2]).unwrap();
        assert_eq!(d.argmax(), 0);
    }

    #[test]
    fn label_table_rejects_duplicates() {
        assert!(LabelTable::new(vec!["a".into(), "a".into()]).is_err());
        let t = LabelTable::new(vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(t.id_of("b"), Some(1));
    }
}
