//! Random survival forests (bootstrap + exhaustive cutpoints) and extra
//! survival forests (full sample + random cutpoints).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{CurveKind, SurvivalCurve};
use crate::seed;
use crate::split::{CutpointMode, SplitRule};
use crate::tree::{grow, StoppingRule, SurvivalTree, TreeConfig};

pub const FOREST_SCHEMA: &str = "adasurv.forest/v1";

const MAX_BOOTSTRAP_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestVariant {
    Rsf,
    Esf,
}

/// How per-tree mode times become one predicted time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    MeanOfMode,
    /// The mean snapped to the nearest training event time.
    MappedMeanOfMode,
}

impl Aggregation {
    pub const ALL: [Aggregation; 2] = [Aggregation::MeanOfMode, Aggregation::MappedMeanOfMode];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::MeanOfMode => "mean-of-mode",
            Aggregation::MappedMeanOfMode => "mapped-mean-of-mode",
        }
    }

    /// Accepts the full names plus `mean` and `mapped`.
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "mean-of-mode" | "mean" => Ok(Aggregation::MeanOfMode),
            "mapped-mean-of-mode" | "mapped" => Ok(Aggregation::MappedMeanOfMode),
            other => Err(Error::config(format!(
                "unknown aggregation '{other}', valid aggregations are mean-of-mode, mapped-mean-of-mode"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub ntree: usize,
    pub rule: SplitRule,
    pub mtry: Option<usize>,
    pub stopping: StoppingRule,
    /// Random cutpoints per sampled feature in ESF trees.
    pub esf_cutpoints: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            ntree: 10,
            rule: SplitRule::LogRank,
            mtry: None,
            stopping: StoppingRule::default(),
            esf_cutpoints: 1,
        }
    }
}

impl ForestConfig {
    pub fn tree_config(&self, variant: ForestVariant) -> TreeConfig {
        TreeConfig {
            mode: match variant {
                ForestVariant::Rsf => CutpointMode::Exhaustive,
                ForestVariant::Esf => CutpointMode::Random {
                    k: self.esf_cutpoints,
                },
            },
            rule: self.rule,
            mtry: self.mtry,
            stopping: self.stopping,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ntree == 0 {
            return Err(Error::config("ntree must be at least 1"));
        }
        if self.esf_cutpoints == 0 {
            return Err(Error::config("ESF cutpoint count must be at least 1"));
        }
        if self.mtry == Some(0) {
            return Err(Error::config("mtry must be at least 1"));
        }
        self.stopping.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub schema: String,
    pub variant: ForestVariant,
    pub ntree: usize,
    pub master_seed: u64,
    /// Sorted distinct event times of the training data.
    pub vocabulary: Vec<f64>,
    pub n_features: usize,
    pub trees: Vec<SurvivalTree>,
}

/// Draws `n` indices uniformly with replacement from `base`.
pub fn bootstrap_sample<R: Rng>(base: &[usize], rng: &mut R) -> Vec<usize> {
    (0..base.len())
        .map(|_| base[rng.random_range(0..base.len())])
        .collect()
}

/// Fraction of `0..n` absent from `sample`.
pub fn out_of_bag_fraction(n: usize, sample: &[usize]) -> f64 {
    let mut seen = vec![false; n];
    for &i in sample {
        seen[i] = true;
    }
    seen.iter().filter(|s| !**s).count() as f64 / n as f64
}

/// Fits a forest on the whole dataset.
pub fn fit_forest(data: &Dataset, variant: ForestVariant, config: &ForestConfig, seed: u64) -> Result<Forest> {
    let all: Vec<usize> = (0..data.len()).collect();
    fit_forest_on(data, &all, variant, config, seed)
}

/// Tree `b`'s growth sample: a bootstrap of `base` (RSF) or `base` itself
/// (ESF). Bootstrap draws without any event are redrawn from the same
/// stream.
pub fn tree_sample(
    data: &Dataset,
    base: &[usize],
    variant: ForestVariant,
    seed: u64,
    b: usize,
) -> Result<Vec<usize>> {
    match variant {
        ForestVariant::Esf => Ok(base.to_vec()),
        ForestVariant::Rsf => {
            let mut rng = seed::stream(seed, "bootstrap", b as u64);
            for _ in 0..MAX_BOOTSTRAP_DRAWS {
                let sample = bootstrap_sample(base, &mut rng);
                if sample.iter().any(|&i| data.record(i).is_event()) {
                    return Ok(sample);
                }
            }
            Err(Error::domain("bootstrap draws keep missing every event"))
        }
    }
}

/// Fits a forest whose trees see only `base` (row indices into `data`,
/// repeats allowed). Leaves keep indices into `data`.
pub fn fit_forest_on(
    data: &Dataset,
    base: &[usize],
    variant: ForestVariant,
    config: &ForestConfig,
    seed: u64,
) -> Result<Forest> {
    config.validate()?;
    if !base.iter().any(|&i| data.record(i).is_event()) {
        return Err(Error::domain("cannot fit a forest without events"));
    }
    let tree_config = config.tree_config(variant);
    let trees = (0..config.ntree)
        .into_par_iter()
        .map(|b| {
            let sample = tree_sample(data, base, variant, seed, b)?;
            grow(data, &sample, &tree_config, seed::derive(seed, "tree", b as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        schema: FOREST_SCHEMA.to_string(),
        variant,
        ntree: config.ntree,
        master_seed: seed,
        vocabulary: data.event_times(),
        n_features: data.n_features(),
        trees,
    })
}

/// Nearest vocabulary entry; the smaller one on ties.
pub fn snap_to_vocabulary(vocabulary: &[f64], value: f64) -> f64 {
    if vocabulary.is_empty() {
        return value;
    }
    let k = vocabulary.partition_point(|&v| v < value);
    if k == 0 {
        return vocabulary[0];
    }
    if k == vocabulary.len() {
        return vocabulary[k - 1];
    }
    let (below, above) = (vocabulary[k - 1], vocabulary[k]);
    if above - value < value - below {
        above
    } else {
        below
    }
}

/// Pointwise mean of step curves over the union of their jump times.
pub fn average_curves(curves: &[&SurvivalCurve], weights: Option<&[f64]>, kind: CurveKind) -> SurvivalCurve {
    let mut times: Vec<f64> = curves.iter().flat_map(|c| c.times.iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => curves.len() as f64,
    };
    let values = times
        .iter()
        .map(|&t| {
            let sum: f64 = match weights {
                Some(w) => curves.iter().zip(w).map(|(c, wi)| wi * c.eval(t)).sum(),
                None => curves.iter().map(|c| c.eval(t)).sum(),
            };
            sum / total
        })
        .collect();
    SurvivalCurve { kind, times, values }
}

impl Forest {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::domain(format!(
                "covariate vector has {} entries, forest expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Ensemble cumulative hazard: mean of the per-tree leaf hazards.
    pub fn ensemble_chf(&self, x: &[f64]) -> Result<SurvivalCurve> {
        self.check_dim(x)?;
        let leaves = self
            .trees
            .iter()
            .map(|t| t.drop_down(x).map(|l| &l.chf))
            .collect::<Result<Vec<_>>>()?;
        Ok(average_curves(&leaves, None, CurveKind::CumulativeHazard))
    }

    /// `exp(-H)` of the ensemble hazard.
    pub fn ensemble_survival(&self, x: &[f64]) -> Result<SurvivalCurve> {
        Ok(self
            .ensemble_chf(x)?
            .map(CurveKind::Survival, |h| (-h).exp()))
    }

    /// Leaf mode time reached by `x` in each tree.
    pub fn tree_modes(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.trees
            .iter()
            .map(|t| t.drop_down(x).map(|l| l.mode_time))
            .collect()
    }

    /// Predicted event time under `aggregation`.
    pub fn predict_time(&self, x: &[f64], aggregation: Aggregation) -> Result<f64> {
        let modes = self.tree_modes(x)?;
        let mean = modes.iter().sum::<f64>() / modes.len() as f64;
        Ok(match aggregation {
            Aggregation::MeanOfMode => mean,
            Aggregation::MappedMeanOfMode => snap_to_vocabulary(&self.vocabulary, mean),
        })
    }

    /// Predictions for many rows, in row order.
    pub fn predict_times(&self, rows: &[&[f64]], aggregation: Aggregation) -> Result<Vec<f64>> {
        rows.par_iter()
            .map(|x| self.predict_time(x, aggregation))
            .collect()
    }

    /// Sorted in-bag multiset of tree `b`, recovered from its leaves.
    pub fn in_bag(&self, b: usize) -> Vec<usize> {
        let mut ix: Vec<usize> = self.trees[b]
            .leaves()
            .flat_map(|l| l.members.iter().copied())
            .collect();
        ix.sort_unstable();
        ix
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let forest: Forest = serde_json::from_str(text)?;
        if forest.schema != FOREST_SCHEMA {
            return Err(Error::validation(format!(
                "unsupported forest schema '{}', expected '{FOREST_SCHEMA}'",
                forest.schema
            )));
        }
        Ok(forest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping() {
        let v = [1.0, 5.0, 10.0];
        assert_eq!(snap_to_vocabulary(&v, 3.0), 1.0);
        assert_eq!(snap_to_vocabulary(&v, 3.1), 5.0);
        assert_eq!(snap_to_vocabulary(&v, 0.2), 1.0);
        assert_eq!(snap_to_vocabulary(&v, 12.0), 10.0);
        assert_eq!(snap_to_vocabulary(&v, 5.0), 5.0);
    }

    #[test]
    fn aggregation_names() {
        for a in Aggregation::ALL {
            assert_eq!(Aggregation::parse(a.name()).unwrap(), a);
        }
        assert_eq!(Aggregation::parse("mapped").unwrap(), Aggregation::MappedMeanOfMode);
        assert!(Aggregation::parse("median").is_err());
    }

    #[test]
    fn weighted_average() {
        let a = SurvivalCurve {
            kind: CurveKind::CumulativeHazard,
            times: vec![1.0, 3.0],
            values: vec![0.5, 1.0],
        };
        let b = SurvivalCurve {
            kind: CurveKind::CumulativeHazard,
            times: vec![2.0],
            values: vec![2.0],
        };
        let avg = average_curves(&[&a, &b], None, CurveKind::CumulativeHazard);
        assert_eq!(avg.times, vec![1.0, 2.0, 3.0]);
        assert_eq!(avg.values, vec![0.25, 1.25, 1.5]);
        let w = average_curves(&[&a, &b], Some(&[3.0, 1.0]), CurveKind::CumulativeHazard);
        assert_eq!(w.values, vec![0.375, 0.875, 1.25]);
    }

    #[test]
    fn oob_fraction_counts_absent_rows() {
        assert_eq!(out_of_bag_fraction(4, &[0, 0, 1, 1]), 0.5);
        assert_eq!(out_of_bag_fraction(2, &[0, 1]), 0.0);
    }
}
