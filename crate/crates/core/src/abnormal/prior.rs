//! Scene-action prior learning: tally the argmax scene of every labeled
//! action sample into P(S|A) rows. The default keeps the empirical argmax
//! frequencies; the literal mode collapses each row onto its most frequent
//! scene.

use super::SceneDistribution;
use crate::classifier::LabelTable;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenePriorMode {
    /// Empirical argmax-frequency distribution per action.
    #[default]
    Frequency,
    /// All mass on the single most frequent scene (ties to the lowest id).
    ArgmaxOnly,
}

/// One labeled sample: the action id and the scene distribution the
/// provider produced for it.
#[derive(Debug, Clone)]
pub struct PriorObservation {
    pub action_id: usize,
    pub scene_distribution: SceneDistribution,
}

/// P(S_j | A_i) with provenance counts and the corpus scene marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePriorTable {
    pub actions: Vec<String>,
    pub scenes: Vec<String>,
    /// Row-major actions x scenes.
    pub probabilities: Vec<f64>,
    /// Argmax tallies behind each cell.
    pub counts: Vec<u64>,
    /// Empirical argmax frequency of each scene over all samples.
    pub scene_marginal: Vec<f64>,
}

impl ScenePriorTable {
    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn scene_count(&self) -> usize {
        self.scenes.len()
    }

    pub fn p_scene_given_action(&self, action_id: usize, scene_id: usize) -> f64 {
        self.probabilities[action_id * self.scenes.len() + scene_id]
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m) = (self.actions.len(), self.scenes.len());
        if self.probabilities.len() != k * m || self.counts.len() != k * m {
            return Err(Error::DimensionMismatch("prior table shape mismatch".into()));
        }
        if self.scene_marginal.len() != m {
            return Err(Error::DimensionMismatch("scene marginal length mismatch".into()));
        }
        for a in 0..k {
            let row = &self.probabilities[a * m..(a + 1) * m];
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidValue("prior entries must be nonnegative".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidValue(format!(
                    "prior row for {} sums to {sum}",
                    self.actions[a]
                )));
            }
        }
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = std::fs::File::open(path)?;
        let table: ScenePriorTable = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::UnsupportedFormat(format!("{}: {e}", path.display())))?;
        table.validate()?;
        Ok(table)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        Ok(())
    }
}

/// Tallies argmax scenes per action. Every action in the vocabulary needs
/// at least one observation.
pub fn learn_scene_prior(
    observations: &[PriorObservation],
    actions: &LabelTable,
    scenes: &LabelTable,
    mode: ScenePriorMode,
) -> Result<ScenePriorTable> {
    let k = actions.len();
    let m = scenes.len();
    let mut counts = vec![0u64; k * m];
    let mut marginal_counts = vec![0u64; m];

    for obs in observations {
        if obs.action_id >= k {
            return Err(Error::InvalidValue(format!(
                "action id {} outside vocabulary of {k}",
                obs.action_id
            )));
        }
        if obs.scene_distribution.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "scene distribution of length {} for a vocabulary of {m}",
                obs.scene_distribution.len()
            )));
        }
        let s = obs.scene_distribution.argmax();
        counts[obs.action_id * m + s] += 1;
        marginal_counts[s] += 1;
    }

    let mut probabilities = vec![0.0f64; k * m];
    for a in 0..k {
        let row_counts = &counts[a * m..(a + 1) * m];
        let total: u64 = row_counts.iter().sum();
        if total == 0 {
            return Err(Error::DegenerateInput(format!(
                "action {} has no observations",
                actions.name(a)
            )));
        }
        match mode {
            ScenePriorMode::Frequency => {
                for s in 0..m {
                    probabilities[a * m + s] = row_counts[s] as f64 / total as f64;
                }
            }
            ScenePriorMode::ArgmaxOnly => {
                let mut best = 0;
                for s in 0..m {
                    if row_counts[s] > row_counts[best] {
                        best = s;
                    }
                }
                probabilities[a * m + best] = 1.0;
            }
        }
    }

    let total_obs: u64 = marginal_counts.iter().sum();
    let scene_marginal =
        marginal_counts.iter().map(|c| *c as f64 / total_obs as f64).collect();

    let table = ScenePriorTable {
        actions: actions.names().to_vec(),
        scenes: scenes.names().to_vec(),
        probabilities,
        counts,
        scene_marginal,
    };
    table.validate()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenes() -> LabelTable {
        LabelTable::new(vec!["office".into(), "corridor".into(), "kitchen".into()]).unwrap()
    }

    fn actions() -> LabelTable {
        LabelTable::new(vec!["eat".into(), "type".into()]).unwrap()
    }

    fn obs(action: usize, scene: usize, m: usize) -> PriorObservation {
        let mut p = vec![0.05; m];
        p[scene] = 1.0 - 0.05 * (m - 1) as f64;
        PriorObservation { action_id: action, scene_distribution: SceneDistribution::new(p).unwrap() }
    }

    #[test]
    fn unanimous_samples_give_unit_mass() {
        let observations: Vec<_> =
            (0..10).map(|_| obs(0, 2, 3)).chain((0..5).map(|_| obs(1, 0, 3))).collect();
        let table =
            learn_scene_prior(&observations, &actions(), &scenes(), ScenePriorMode::Frequency)
                .unwrap();
        assert_eq!(table.p_scene_given_action(0, 2), 1.0);
        assert_eq!(table.p_scene_given_action(0, 0), 0.0);
        assert_eq!(table.counts[2], 10);
    }

    #[test]
    fn split_samples_give_frequencies() {
        let observations: Vec<_> = (0..3)
            .map(|_| obs(0, 0, 3))
            .chain(std::iter::once(obs(0, 1, 3)))
            .chain((0..2).map(|_| obs(1, 2, 3)))
            .collect();
        let table =
            learn_scene_prior(&observations, &actions(), &scenes(), ScenePriorMode::Frequency)
                .unwrap();
        assert!((table.p_scene_given_action(0, 0) - 0.75).abs() < 1e-12);
        assert!((table.p_scene_given_action(0, 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn argmax_only_mode_collapses_rows() {
        let observations: Vec<_> = (0..3)
            .map(|_| obs(0, 0, 3))
            .chain(std::iter::once(obs(0, 1, 3)))
            .chain((0..2).map(|_| obs(1, 2, 3)))
            .collect();
        let table =
            learn_scene_prior(&observations, &actions(), &scenes(), ScenePriorMode::ArgmaxOnly)
                .unwrap();
        assert_eq!(table.p_scene_given_action(0, 0), 1.0);
        assert_eq!(table.p_scene_given_action(0, 1), 0.0);
    }

    #[test]
    fn action_without_samples_is_an_error() {
        let observations = vec![obs(0, 0, 3)];
        assert!(matches!(
            learn_scene_prior(&observations, &actions(), &scenes(), ScenePriorMode::Frequency),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn table_round_trips_through_json() {
        use tempfile::tempdir;
        let observations: Vec<_> =
            (0..4).map(|i| obs(0, i % 3, 3)).chain((0..2).map(|_| obs(1, 1, 3))).collect();
        let table =
            learn_scene_prior(&observations, &actions(), &scenes(), ScenePriorMode::Frequency)
                .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("prior.json");
        table.write_file(&path).unwrap();
        let back = ScenePriorTable::read_file(&path).unwrap();
        assert_eq!(back, table);
    }
}
