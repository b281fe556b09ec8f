//! AdaBoost over survival forests.
//!
//! Each iteration draws a weighted bootstrap of the training rows, fits a
//! forest on it, scores every training row as correct or incorrect, and
//! reweights. The final regressor is the alpha-weighted mean of the stage
//! predictions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::estimators::{CurveKind, SurvivalCurve};
use crate::forest::{average_curves, fit_forest_on, snap_to_vocabulary, Aggregation, Forest, ForestConfig, ForestVariant};
use crate::seed;

pub const BOOSTED_SCHEMA: &str = "adasurv.boosted/v1";

const MAX_SAMPLE_DRAWS: usize = 1000;

/// Weak learner family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostVariation {
    AdaRsf,
    AdaEsf,
    /// RSF on odd iterations, ESF on even ones, starting from 1.
    AdaMix,
}

impl BoostVariation {
    /// Learner family of 1-based iteration `m`.
    pub fn learner(self, m: usize) -> ForestVariant {
        match self {
            BoostVariation::AdaRsf => ForestVariant::Rsf,
            BoostVariation::AdaEsf => ForestVariant::Esf,
            BoostVariation::AdaMix if m % 2 == 1 => ForestVariant::Rsf,
            BoostVariation::AdaMix => ForestVariant::Esf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub iterations: usize,
    pub forest: ForestConfig,
    /// Correctness tolerance in training event-time standard deviations.
    pub tau: f64,
    pub variation: BoostVariation,
    pub aggregation: Aggregation,
    pub seed: u64,
    pub epsilon_floor: f64,
    pub epsilon_ceiling: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            iterations: 10,
            forest: ForestConfig::default(),
            tau: 0.5,
            variation: BoostVariation::AdaEsf,
            aggregation: Aggregation::MeanOfMode,
            seed: 0,
            epsilon_floor: 1e-6,
            epsilon_ceiling: 0.5 - 1e-6,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor < self.epsilon_ceiling && self.epsilon_ceiling < 1.0) {
            return Err(Error::config("epsilon guards must satisfy 0 < floor < ceiling < 1"));
        }
        self.forest.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub alpha: f64,
    /// Raw weighted error on the training rows, before the guards.
    pub epsilon: f64,
    pub forest: Forest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub schema: String,
    pub variation: BoostVariation,
    pub aggregation: Aggregation,
    pub tau: f64,
    /// `tau` times the training event-time standard deviation.
    pub tolerance: f64,
    pub vocabulary: Vec<f64>,
    pub n_features: usize,
    pub stages: Vec<Stage>,
    /// Row weights before each iteration and after the last one.
    #[serde(skip)]
    pub weight_history: Vec<Vec<f64>>,
}

/// Sample standard deviation of the event times (0 with fewer than two).
pub fn event_time_sd(data: &Dataset) -> f64 {
    let t: Vec<f64> = data.records().iter().filter(|r| r.is_event()).map(|r| r.time).collect();
    if t.len() < 2 {
        return 0.0;
    }
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let ss: f64 = t.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (t.len() - 1) as f64).sqrt()
}

/// Whether a predicted time counts as correct for `truth`.
///
/// Events need `|prediction - t| <= tolerance`; a censored record only
/// needs the prediction to reach its censoring time.
pub fn is_correct(prediction: f64, truth: &SurvivalRecord, tolerance: f64) -> bool {
    if truth.is_event() {
        (prediction - truth.time).abs() <= tolerance
    } else {
        prediction >= truth.time
    }
}

/// `sum w I(incorrect) / sum w`.
pub fn weighted_error(weights: &[f64], incorrect: &[bool]) -> f64 {
    let total: f64 = weights.iter().sum();
    let wrong: f64 = weights
        .iter()
        .zip(incorrect)
        .filter(|(_, &bad)| bad)
        .map(|(w, _)| w)
        .sum();
    wrong / total
}

/// `ln((1 - e) / e)` after clamping `e` into `[floor, ceiling]`.
pub fn alpha_from_epsilon(epsilon: f64, floor: f64, ceiling: f64) -> f64 {
    let e = epsilon.clamp(floor, ceiling);
    ((1.0 - e) / e).ln()
}

/// Multiplies incorrect rows by `exp(alpha)` and renormalizes to sum 1.
pub fn reweight(weights: &mut [f64], incorrect: &[bool], alpha: f64) {
    let factor = alpha.exp();
    for (w, &bad) in weights.iter_mut().zip(incorrect) {
        if bad {
            *w *= factor;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

fn weighted_sample(data: &Dataset, weights: &[f64], seed: u64, m: usize) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::domain(format!("invalid boosting weights: {e}")))?;
    let mut rng = seed::stream(seed, "boost-sample", m as u64);
    for _ in 0..MAX_SAMPLE_DRAWS {
        let sample: Vec<usize> = (0..weights.len()).map(|_| dist.sample(&mut rng)).collect();
        if sample.iter().any(|&i| data.record(i).is_event()) {
            return Ok(sample);
        }
    }
    Err(Error::domain("weighted draws keep missing every event"))
}

fn all_rows(data: &Dataset) -> Vec<&[f64]> {
    data.records().iter().map(|r| r.covariates.as_slice()).collect()
}

/// Fits the boosted ensemble.
pub fn fit_boosted(data: &Dataset, cfg: &BoostConfig) -> Result<BoostedEnsemble> {
    cfg.validate()?;
    data.require_events(2)?;
    let n = data.len();
    let tolerance = cfg.tau * event_time_sd(data);
    let rows = all_rows(data);
    let mut weights = vec![1.0 / n as f64; n];
    let mut history = vec![weights.clone()];
    let mut stages = Vec::with_capacity(cfg.iterations);
    for m in 0..cfg.iterations {
        let sample = weighted_sample(data, &weights, cfg.seed, m)?;
        let variant = cfg.variation.learner(m + 1);
        let forest = fit_forest_on(
            data,
            &sample,
            variant,
            &cfg.forest,
            seed::derive(cfg.seed, "boost-learner", m as u64),
        )?;
        let predictions = forest.predict_times(&rows, cfg.aggregation)?;
        let incorrect: Vec<bool> = predictions
            .iter()
            .zip(data.records())
            .map(|(&p, r)| !is_correct(p, r, tolerance))
            .collect();
        let epsilon = weighted_error(&weights, &incorrect);
        let alpha = alpha_from_epsilon(epsilon, cfg.epsilon_floor, cfg.epsilon_ceiling);
        reweight(&mut weights, &incorrect, alpha);
        history.push(weights.clone());
        stages.push(Stage {
            alpha,
            epsilon,
            forest,
        });
    }
    Ok(BoostedEnsemble {
        schema: BOOSTED_SCHEMA.to_string(),
        variation: cfg.variation,
        aggregation: cfg.aggregation,
        tau: cfg.tau,
        tolerance,
        vocabulary: data.event_times(),
        n_features: data.n_features(),
        stages,
        weight_history: history,
    })
}

impl BoostedEnsemble {
    fn alpha_sum(&self) -> Result<f64> {
        let s: f64 = self.stages.iter().map(|s| s.alpha).sum();
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::DegenerateModel(format!("stage weights sum to {s}")))
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::domain(format!(
                "covariate vector has {} entries, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Per-stage predictions `y_m(x)`.
    pub fn stage_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.stages
            .iter()
            .map(|s| s.forest.predict_time(x, self.aggregation))
            .collect()
    }

    /// Alpha-normalized weighted mean of the stage predictions, snapped to
    /// the vocabulary for the mapped aggregation.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let total = self.alpha_sum()?;
        let ys = self.stage_predictions(x)?;
        let combined = self
            .stages
            .iter()
            .zip(&ys)
            .map(|(s, y)| s.alpha / total * y)
            .sum::<f64>();
        Ok(match self.aggregation {
            Aggregation::MeanOfMode => combined,
            Aggregation::MappedMeanOfMode => snap_to_vocabulary(&self.vocabulary, combined),
        })
    }

    pub fn predict_many(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        rows.par_iter().map(|x| self.predict(x)).collect()
    }

    /// Alpha-weighted mean of the stage ensemble hazards.
    pub fn ensemble_chf(&self, x: &[f64]) -> Result<SurvivalCurve> {
        self.alpha_sum()?;
        let curves = self
            .stages
            .iter()
            .map(|s| s.forest.ensemble_chf(x))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&SurvivalCurve> = curves.iter().collect();
        let alphas: Vec<f64> = self.stages.iter().map(|s| s.alpha).collect();
        Ok(average_curves(&refs, Some(&alphas), CurveKind::CumulativeHazard))
    }

    pub fn ensemble_survival(&self, x: &[f64]) -> Result<SurvivalCurve> {
        Ok(self.ensemble_chf(x)?.map(CurveKind::Survival, |h| (-h).exp()))
    }

    /// Correct (+1) / incorrect (-1) margins of each stage on `data`.
    fn margins(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        let rows = all_rows(data);
        self.stages
            .iter()
            .map(|s| {
                let preds = s.forest.predict_times(&rows, self.aggregation)?;
                Ok(preds
                    .iter()
                    .zip(data.records())
                    .map(|(&p, r)| if is_correct(p, r, self.tolerance) { 1.0 } else { -1.0 })
                    .collect())
            })
            .collect()
    }

    /// Exponential error of the first `m` stages:
    /// `sum_n exp(-1/2 sum_{l<=m} alpha_l c_l(x_n))` with `c = +1` for a
    /// correct stage prediction and `-1` otherwise.
    ///
    /// With weights updated multiplicatively, each stage scales this sum by
    /// `2 sqrt(eps (1 - eps))`, so it never grows while `eps < 0.5`.
    pub fn exponential_error(&self, data: &Dataset, m: usize) -> Result<f64> {
        let margins = self.margins(data)?;
        Ok(prefix_exponential_errors(&self.alphas(), &margins)
            .get(m)
            .copied()
            .unwrap_or(0.0))
    }

    /// Exponential error of every prefix `0..=K`.
    pub fn exponential_error_path(&self, data: &Dataset) -> Result<Vec<f64>> {
        let margins = self.margins(data)?;
        Ok(prefix_exponential_errors(&self.alphas(), &margins))
    }

    /// Exponential error of the thresholded classifier
    /// `sign(1/2 sum_{l<=m} alpha_l c_l(x_n))`.
    pub fn classifier_exponential_error(&self, data: &Dataset, m: usize) -> Result<f64> {
        let margins = self.margins(data)?;
        let alphas = self.alphas();
        let m = m.min(alphas.len());
        Ok((0..data.len())
            .map(|n| {
                let margin: f64 = (0..m).map(|l| 0.5 * alphas[l] * margins[l][n]).sum();
                let sign: f64 = if margin > 0.0 {
                    1.0
                } else if margin < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (-sign).exp()
            })
            .sum())
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.alpha).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ens: BoostedEnsemble = serde_json::from_str(text)?;
        if ens.schema != BOOSTED_SCHEMA {
            return Err(Error::validation(format!(
                "unsupported boosted schema '{}', expected '{BOOSTED_SCHEMA}'",
                ens.schema
            )));
        }
        Ok(ens)
    }
}

/// `E_m = sum_n exp(-1/2 sum_{l<m'} alpha_l margin_l[n])` for m' = 0..=K.
pub fn prefix_exponential_errors(alphas: &[f64], margins: &[Vec<f64>]) -> Vec<f64> {
    let n = margins.first().map_or(0, Vec::len);
    let mut exponent = vec![0.0; n];
    let mut out = Vec::with_capacity(alphas.len() + 1);
    out.push(n as f64);
    for (alpha, margin) in alphas.iter().zip(margins) {
        for (e, c) in exponent.iter_mut().zip(margin) {
            *e += 0.5 * alpha * c;
        }
        out.push(exponent.iter().map(|e| (-e).exp()).sum());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Status;

    #[test]
    fn correctness_rule() {
        let ev = SurvivalRecord::new(vec![], 10.0, Status::Event);
        assert!(is_correct(10.0, &ev, 0.0));
        assert!(!is_correct(13.0, &ev, 0.5 * 4.0));
        assert!(is_correct(11.5, &ev, 2.0));
        let c = SurvivalRecord::new(vec![], 5.0, Status::Censored);
        assert!(is_correct(7.0, &c, 0.1));
        assert!(!is_correct(3.0, &c, 0.1));
    }

    #[test]
    fn alpha_formula() {
        assert!((alpha_from_epsilon(0.25, 1e-6, 0.5 - 1e-6) - 3f64.ln()).abs() < 1e-15);
        assert!((alpha_from_epsilon(0.25, 1e-6, 0.5 - 1e-6) - 1.0986).abs() < 1e-4);
        assert_eq!(alpha_from_epsilon(0.5, 1e-6, 0.5), 0.0);
        assert!(alpha_from_epsilon(0.7, 1e-6, 0.5 - 1e-6) > 0.0);
        assert!(alpha_from_epsilon(0.0, 1e-6, 0.5 - 1e-6).is_finite());
    }

    #[test]
    fn reweight_four_points() {
        let mut w = vec![0.25; 4];
        let incorrect = [true, false, false, true];
        let alpha = 3f64.ln();
        reweight(&mut w, &incorrect, alpha);
        // before renormalizing: 0.75, 0.25, 0.25, 0.75 -> total 2
        assert!((w[0] - 0.375).abs() < 1e-15);
        assert!((w[1] - 0.125).abs() < 1e-15);
        assert!((w[0] / w[1] - 3.0).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mix_alternates_from_rsf() {
        let v = BoostVariation::AdaMix;
        assert_eq!(v.learner(1), ForestVariant::Rsf);
        assert_eq!(v.learner(2), ForestVariant::Esf);
        assert_eq!(v.learner(3), ForestVariant::Rsf);
        assert_eq!(BoostVariation::AdaEsf.learner(1), ForestVariant::Esf);
    }

    #[test]
    fn prefix_errors() {
        let margins = vec![vec![1.0, 1.0, 1.0]];
        let e = prefix_exponential_errors(&[2.0], &margins);
        assert_eq!(e[0], 3.0);
        assert!((e[1] - 3.0 * (-1.0f64).exp()).abs() < 1e-15);
        let with_zero = prefix_exponential_errors(&[2.0, 0.0], &[vec![1.0, -1.0], vec![-1.0, -1.0]]);
        assert_eq!(with_zero[1], with_zero[2]);
        assert!(prefix_exponential_errors(&[], &[]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation() {
        let cfg = BoostConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = BoostConfig {
            tau: 0.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
