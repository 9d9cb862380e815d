//! Scene-prior abnormality detection: scene probabilities, scene-action
//! prior learning, the Bayes posterior, and the thresholded decision.
//!
//! A recognized action is abnormal when the detection index
//! `P(A) - P(A|S)` strictly exceeds the threshold (default 0.5), where
//! `P(A|S) = P(S|A) * P(A) / P(S)` is clamped into [0,1] (the three inputs
//! come from independently calibrated sources, so the raw product can
//! exceed 1; the raw value is kept for audit).

mod prior;
mod scene;

pub use prior::{learn_scene_prior, PriorObservation, ScenePriorMode, ScenePriorTable};
pub use scene::{
    rgb_histogram, FileSceneProvider, SceneCentroids, SceneProbabilityMode, SceneProvider,
};

use crate::classifier::check_distribution;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Probability distribution over the scene vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDistribution {
    probabilities: Vec<f64>,
}

impl SceneDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        check_distribution(&probabilities)?;
        Ok(SceneDistribution { probabilities })
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

    /// Highest-probability scene id; ties resolve to the lowest id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }

    /// The probability of the detected scene: the maximum entry.
    pub fn max_probability(&self) -> f64 {
        self.probabilities[self.argmax()]
    }

    pub fn mean(distributions: &[SceneDistribution]) -> Result<SceneDistribution> {
        if distributions.is_empty() {
            return Err(Error::InvalidValue("cannot average zero distributions".into()));
        }
        let k = distributions[0].len();
        let mut acc = vec![0.0f64; k];
        for d in distributions {
            if d.len() != k {
                return Err(Error::DimensionMismatch("scene distribution lengths differ".into()));
            }
            for (a, p) in acc.iter_mut().zip(&d.probabilities) {
                *a += p;
            }
        }
        let total: f64 = acc.iter().sum();
        for a in &mut acc {
            *a /= total;
        }
        SceneDistribution::new(acc)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidValue(format!("{name} = {p} outside [0,1]")));
    }
    Ok(())
}

/// Bayes posterior of the action given the scene; returns the raw value
/// and its clamp into [0,1]. A zero scene probability makes the posterior
/// undefined.
pub fn posterior_action_given_scene(
    p_action: f64,
    p_scene: f64,
    p_scene_given_action: f64,
) -> Result<(f64, f64)> {
    check_probability("p_action", p_action)?;
    check_probability("p_scene", p_scene)?;
    check_probability("p_scene_given_action", p_scene_given_action)?;
    if p_scene == 0.0 {
        return Err(Error::Numerical("undefined posterior: P(S) = 0".into()));
    }
    let raw = p_scene_given_action * p_action / p_scene;
    Ok((raw, raw.clamp(0.0, 1.0)))
}

/// The detection index and the strict-threshold comparison.
pub fn abd_decision(p_action: f64, p_action_given_scene: f64, threshold: f64) -> Result<(f64, bool)> {
    check_probability("p_action", p_action)?;
    check_probability("p_action_given_scene", p_action_given_scene)?;
    check_probability("threshold", threshold)?;
    let index = p_action - p_action_given_scene;
    Ok((index, index > threshold))
}

/// Full audit record of one abnormality decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbnormalityDecision {
    pub action_id: usize,
    pub scene_id: usize,
    pub p_action: f64,
    pub p_scene: f64,
    pub p_scene_given_action: f64,
    pub p_action_given_scene_raw: f64,
    pub p_action_given_scene: f64,
    pub abd_index: f64,
    pub threshold: f64,
    pub abnormal: bool,
}

/// Composes the posterior and the decision into one record.
pub fn decide(
    action_id: usize,
    scene_id: usize,
    p_action: f64,
    p_scene: f64,
    p_scene_given_action: f64,
    threshold: f64,
) -> Result<AbnormalityDecision> {
    let (raw, clamped) = posterior_action_given_scene(p_action, p_scene, p_scene_given_action)?;
    let (abd_index, abnormal) = abd_decision(p_action, clamped, threshold)?;
    Ok(AbnormalityDecision {
        action_id,
        scene_id,
        p_action,
        p_scene,
        p_scene_given_action,
        p_action_given_scene_raw: raw,
        p_action_given_scene: clamped,
        abd_index,
        threshold,
        abnormal,
    })
}

/// One evaluated sequence: the decision plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub key: String,
    pub decision: AbnormalityDecision,
    pub truth_abnormal: bool,
    pub correct: bool,
}

impl DecisionRecord {
    pub fn new(key: String, decision: AbnormalityDecision, truth_abnormal: bool) -> Self {
        let correct = decision.abnormal == truth_abnormal;
        DecisionRecord { key, decision, truth_abnormal, correct }
    }
}

/// Fraction of records whose decision matches the truth flag.
pub fn evaluate_abnormality(records: &[DecisionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::DegenerateInput("empty evaluation suite".into()));
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / records.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayes_identity_case() {
        let (raw, clamped) = posterior_action_given_scene(0.6, 1.0, 1.0).unwrap();
        assert!((raw - 0.6).abs() < 1e-12);
        assert_eq!(raw, clamped);
    }

    #[test]
    fn zero_likelihood_gives_zero_posterior() {
        let (raw, clamped) = posterior_action_given_scene(0.8, 0.5, 0.0).unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(clamped, 0.0);
    }

    #[test]
    fn posterior_above_one_is_clamped_with_raw_kept() {
        let (raw, clamped) = posterior_action_given_scene(0.9, 0.3, 0.9).unwrap();
        assert!((raw - 2.7).abs() < 1e-12);
        assert_eq!(clamped, 1.0);
    }

    #[test]
    fn zero_scene_probability_is_undefined() {
        assert!(matches!(
            posterior_action_given_scene(0.5, 0.0, 0.5),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn decision_arithmetic_matches_worked_examples() {
        let (idx, abnormal) = abd_decision(0.9, 0.2, 0.5).unwrap();
        assert!((idx - 0.7).abs() < 1e-12);
        assert!(abnormal);

        let (idx, abnormal) = abd_decision(0.6, 0.6, 0.5).unwrap();
        assert_eq!(idx, 0.0);
        assert!(!abnormal);
    }

    #[test]
    fn boundary_index_is_normal_under_strict_inequality() {
        let (idx, abnormal) = abd_decision(1.0, 0.5, 0.5).unwrap();
        assert!((idx - 0.5).abs() < 1e-12);
        assert!(!abnormal);
    }

    #[test]
    fn index_stays_in_unit_interval() {
        let (idx, _) = abd_decision(0.0, 1.0, 0.5).unwrap();
        assert_eq!(idx, -1.0);
        let (idx, _) = abd_decision(1.0, 0.0, 0.5).unwrap();
        assert_eq!(idx, 1.0);
    }

    #[test]
    fn monotone_in_the_posterior() {
        // raising the clamped posterior can never flip normal -> abnormal
        let threshold = 0.5;
        let p_action = 0.9;
        let mut last_abnormal = true;
        for i in 0..=100 {
            let posterior = i as f64 / 100.0;
            let (_, abnormal) = abd_decision(p_action, posterior, threshold).unwrap();
            if !last_abnormal {
                assert!(!abnormal, "flipped back to abnormal at posterior {posterior}");
            }
            last_abnormal = abnormal;
        }
    }

    #[test]
    fn evaluation_counts_matches() {
        let decision = decide(0, 1, 0.9, 0.8, 0.0, 0.5).unwrap();
        assert!(decision.abnormal);
        let records = vec![
            DecisionRecord::new("a".into(), decision.clone(), true),
            DecisionRecord::new("b".into(), decision.clone(), false),
        ];
        assert!((evaluate_abnormality(&records).unwrap() - 0.5).abs() < 1e-12);
        assert!(evaluate_abnormality(&[]).is_err());
    }

    #[test]
    fn sixteen_sequences_fourteen_correct_is_0875() {
        let good = decide(0, 0, 0.9, 0.9, 1.0, 0.5).unwrap();
        let mut records = Vec::new();
        for i in 0..16 {
            // 14 correct, 2 wrong
            records.push(DecisionRecord::new(format!("s{i}"), good.clone(), i >= 14));
        }
        assert!((evaluate_abnormality(&records).unwrap() - 0.875).abs() < 1e-12);
    }
}
