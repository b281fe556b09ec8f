//! A fitted model of any engine behind one prediction surface.

use serde::{Deserialize, Serialize};

use crate::boost::{fit_boosted, BoostConfig, BoostVariation, BoostedEnsemble};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::SurvivalCurve;
use crate::forest::{fit_forest, Aggregation, Forest, ForestVariant};

/// What gets fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Rsf,
    Esf,
    AdaRsf,
    AdaEsf,
    AdaMix,
}

impl Engine {
    pub const ALL: [Engine; 5] = [Engine::AdaRsf, Engine::AdaEsf, Engine::AdaMix, Engine::Rsf, Engine::Esf];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Rsf => "rsf",
            Engine::Esf => "esf",
            Engine::AdaRsf => "ada-rsf",
            Engine::AdaEsf => "ada-esf",
            Engine::AdaMix => "ada-mix",
        }
    }

    pub fn parse(name: &str) -> Result<Engine> {
        let key = name.trim().to_ascii_lowercase().replace('_', "-");
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown method '{name}', valid methods are {}",
                    Engine::ALL.map(Engine::name).join(", ")
                ))
            })
    }

    pub fn boost_variation(self) -> Option<BoostVariation> {
        match self {
            Engine::AdaRsf => Some(BoostVariation::AdaRsf),
            Engine::AdaEsf => Some(BoostVariation::AdaEsf),
            Engine::AdaMix => Some(BoostVariation::AdaMix),
            Engine::Rsf | Engine::Esf => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedModel {
    Forest { forest: Forest, aggregation: Aggregation },
    Boosted { ensemble: BoostedEnsemble },
}

/// Fits `engine` on `data`. Plain forests use `cfg.forest`, `cfg.seed`
/// and `cfg.aggregation`; boosted engines use the whole config.
pub fn fit(data: &Dataset, engine: Engine, cfg: &BoostConfig) -> Result<FittedModel> {
    match engine.boost_variation() {
        Some(variation) => {
            let cfg = BoostConfig { variation, ..*cfg };
            Ok(FittedModel::Boosted {
                ensemble: fit_boosted(data, &cfg)?,
            })
        }
        None => {
            let variant = if engine == Engine::Rsf {
                ForestVariant::Rsf
            } else {
                ForestVariant::Esf
            };
            Ok(FittedModel::Forest {
                forest: fit_forest(data, variant, &cfg.forest, cfg.seed)?,
                aggregation: cfg.aggregation,
            })
        }
    }
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            FittedModel::Forest { forest, aggregation } => forest.predict_time(x, *aggregation),
            FittedModel::Boosted { ensemble } => ensemble.predict(x),
        }
    }

    pub fn predict_many(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Forest { forest, aggregation } => forest.predict_times(rows, *aggregation),
            FittedModel::Boosted { ensemble } => ensemble.predict_many(rows),
        }
    }

    pub fn ensemble_chf(&self, x: &[f64]) -> Result<SurvivalCurve> {
        match self {
            FittedModel::Forest { forest, .. } => forest.ensemble_chf(x),
            FittedModel::Boosted { ensemble } => ensemble.ensemble_chf(x),
        }
    }

    pub fn ensemble_survival(&self, x: &[f64]) -> Result<SurvivalCurve> {
        match self {
            FittedModel::Forest { forest, .. } => forest.ensemble_survival(x),
            FittedModel::Boosted { ensemble } => ensemble.ensemble_survival(x),
        }
    }

    /// Every forest in the model, stage order for boosted models.
    pub fn forests(&self) -> Vec<&Forest> {
        match self {
            FittedModel::Forest { forest, .. } => vec![forest],
            FittedModel::Boosted { ensemble } => ensemble.stages.iter().map(|s| &s.forest).collect(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Forest { forest, .. } => forest.n_features,
            FittedModel::Boosted { ensemble } => ensemble.n_features,
        }
    }
}
