//! The persisted model file: fitted models plus the feature layout they
//! were trained on.

use std::fs;
use std::path::Path;

use adasurv::competing::CauseHandling;
use adasurv::dataset::{CovariateTable, FeatureEncoding};
use adasurv::model::{Engine, FittedModel};
use adasurv::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA: &str = "adasurv.model/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    /// Target cause; `None` for all-cause models.
    pub cause: Option<u32>,
    pub recoding: Option<String>,
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope {
    pub schema: String,
    pub engine: Engine,
    pub feature_names: Vec<String>,
    pub encodings: Vec<FeatureEncoding>,
    pub time_units: Option<String>,
    pub training_means: Vec<f64>,
    pub cause_handling: Option<CauseHandling>,
    pub entries: Vec<ModelEntry>,
}

impl ModelEnvelope {
    pub fn load(path: &Path) -> Result<ModelEnvelope> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let env: ModelEnvelope = serde_json::from_str(&text)?;
        if env.schema != MODEL_SCHEMA {
            return Err(Error::Validation(format!(
                "unsupported model schema '{}', expected '{MODEL_SCHEMA}'",
                env.schema
            )));
        }
        if env.entries.is_empty() {
            return Err(Error::Validation("model file holds no models".into()));
        }
        let p = env.feature_names.len();
        if env.encodings.len() != p || env.training_means.len() != p {
            return Err(Error::Validation("model feature layout is inconsistent".into()));
        }
        if let Some(e) = env.entries.iter().find(|e| e.model.n_features() != p) {
            return Err(Error::Validation(format!(
                "model for cause {:?} expects {} features, layout has {p}",
                e.cause,
                e.model.n_features()
            )));
        }
        Ok(env)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Column name of each entry's predictions.
    pub fn prediction_columns(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| match e.cause {
                Some(c) => format!("predicted_time_cause{c}"),
                None => "predicted_time".to_string(),
            })
            .collect()
    }

    /// `row,<prediction columns>`; `row` counts data lines from 1 and rows
    /// with a missing or unknown covariate get `NA`.
    pub fn prediction_csv(&self, table: &CovariateTable) -> Result<String> {
        let present: Vec<&[f64]> = table.rows.iter().flatten().map(Vec::as_slice).collect();
        let per_entry = self
            .entries
            .iter()
            .map(|e| e.model.predict_many(&present))
            .collect::<Result<Vec<_>>>()?;
        let mut out = format!("row,{}\n", self.prediction_columns().join(","));
        let mut k = 0;
        for (i, row) in table.rows.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            for preds in &per_entry {
                out.push(',');
                match row {
                    Some(_) => out.push_str(&preds[k].to_string()),
                    None => out.push_str("NA"),
                }
            }
            if row.is_some() {
                k += 1;
            }
            out.push('\n');
        }
        Ok(out)
    }
}
