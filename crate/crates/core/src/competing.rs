//! Cause-specific fitting and curves for competing-risk data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::boost::BoostConfig;
use crate::dataset::{Dataset, Status, SurvivalRecord};
use crate::error::{Error, Result};
use crate::estimators::{aalen_johansen, cause_specific_chf, kaplan_meier, nelson_aalen, RiskTable, SurvivalCurve};
use crate::model::{fit, Engine, FittedModel};

/// How records of other causes enter a cause-specific fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauseHandling {
    /// Other-cause events become censored at their observed time.
    #[default]
    Recode,
    /// Other-cause events are dropped; censored records are kept.
    Subset,
}

impl CauseHandling {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "recode" => Ok(CauseHandling::Recode),
            "subset" => Ok(CauseHandling::Subset),
            other => Err(Error::config(format!(
                "unknown cause handling '{other}', expected recode or subset"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CauseHandling::Recode => "recode",
            CauseHandling::Subset => "subset",
        }
    }
}

fn check_cause(data: &Dataset, cause: u32) -> Result<()> {
    if !data.is_competing_risk() {
        return Err(Error::domain("dataset carries no cause labels"));
    }
    if !data.causes().contains(&cause) {
        return Err(Error::domain(format!(
            "unknown cause {cause}; observed causes are {:?}",
            data.causes()
        )));
    }
    Ok(())
}

/// Single-cause view of `data` for `cause` under `handling`.
pub fn prepare_for_cause(data: &Dataset, cause: u32, handling: CauseHandling) -> Result<Dataset> {
    match handling {
        CauseHandling::Recode => recode_for_cause(data, cause),
        CauseHandling::Subset => subset_for_cause(data, cause),
    }
}

/// Keeps every record; events of other causes become censored at their
/// observed time.
pub fn recode_for_cause(data: &Dataset, cause: u32) -> Result<Dataset> {
    check_cause(data, cause)?;
    let records = data
        .records()
        .iter()
        .map(|r| SurvivalRecord {
            covariates: r.covariates.clone(),
            time: r.time,
            status: if r.cause == Some(cause) {
                Status::Event
            } else {
                Status::Censored
            },
            cause: None,
        })
        .collect();
    Ok(data.with_records(records, false))
}

/// Every event counts, whatever its cause. Non-competing data is returned
/// unchanged.
pub fn pool_causes(data: &Dataset) -> Dataset {
    if !data.is_competing_risk() {
        return data.clone();
    }
    let records = data
        .records()
        .iter()
        .map(|r| SurvivalRecord {
            cause: None,
            ..r.clone()
        })
        .collect();
    data.with_records(records, false)
}

/// Keeps events of `cause` and censored records; drops other causes.
pub fn subset_for_cause(data: &Dataset, cause: u32) -> Result<Dataset> {
    check_cause(data, cause)?;
    let records = data
        .records()
        .iter()
        .filter(|r| !r.is_event() || r.cause == Some(cause))
        .map(|r| SurvivalRecord {
            cause: None,
            ..r.clone()
        })
        .collect();
    Ok(data.with_records(records, false))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseSpecificModel {
    pub cause: u32,
    pub engine: Engine,
    /// Human-readable recoding, e.g. `cause 2 = event, others censored`.
    pub recoding: String,
    pub model: FittedModel,
}

/// Fits `engine` on the data recoded for `cause`, splitting on the
/// log-rank statistic of the recoded indicator.
pub fn fit_cause_specific(data: &Dataset, cause: u32, engine: Engine, cfg: &BoostConfig) -> Result<CauseSpecificModel> {
    fit_cause_specific_with(data, cause, engine, cfg, CauseHandling::Recode)
}

pub fn fit_cause_specific_with(
    data: &Dataset,
    cause: u32,
    engine: Engine,
    cfg: &BoostConfig,
    handling: CauseHandling,
) -> Result<CauseSpecificModel> {
    let recoded = prepare_for_cause(data, cause, handling)?;
    recoded.require_events(1)?;
    let recoding = match handling {
        CauseHandling::Recode => format!("cause {cause} = event, other causes censored"),
        CauseHandling::Subset => format!("cause {cause} = event, other causes dropped"),
    };
    Ok(CauseSpecificModel {
        cause,
        engine,
        recoding,
        model: fit(&recoded, engine, cfg)?,
    })
}

/// Full-sample nonparametric curves of a competing-risk dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseCurves {
    /// All-cause Kaplan-Meier event-free survival.
    pub event_free: SurvivalCurve,
    /// All-cause Nelson-Aalen hazard.
    pub hazard: SurvivalCurve,
    /// Per cause: Aalen-Johansen incidence and cause-specific hazard.
    pub causes: BTreeMap<u32, (SurvivalCurve, SurvivalCurve)>,
}

pub fn cause_curves(data: &Dataset) -> Result<CauseCurves> {
    if !data.is_competing_risk() || data.causes().is_empty() {
        return Err(Error::domain("cause curves need a competing-risk dataset with causes"));
    }
    let table = RiskTable::from_observations(
        data.records().iter().map(|r| (r.time, r.status, r.cause)),
        data.causes(),
    )?;
    let mut causes = BTreeMap::new();
    for &c in data.causes() {
        causes.insert(c, (aalen_johansen(&table, c)?, cause_specific_chf(&table, c)?));
    }
    Ok(CauseCurves {
        event_free: kaplan_meier(&table),
        hazard: nelson_aalen(&table),
        causes,
    })
}
