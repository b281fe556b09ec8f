//! Train/test RMSE and running-time comparisons across engines.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boost::BoostConfig;
use crate::competing::{pool_causes, prepare_for_cause, CauseHandling};
use crate::dataset::{split_indices, Dataset, SplitPlan, Status, SurvivalRecord};
use crate::error::{Error, Result};
use crate::estimators::{kaplan_meier, risk_table, SurvivalCurve};
use crate::forest::Aggregation;
use crate::model::{fit, Engine};
use crate::seed;
use crate::tree::default_mtry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseScope {
    #[default]
    EventsOnly,
    All,
}

impl RmseScope {
    pub fn name(self) -> &'static str {
        match self {
            RmseScope::EventsOnly => "events-only",
            RmseScope::All => "all",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "events-only" | "events" => Ok(RmseScope::EventsOnly),
            "all" => Ok(RmseScope::All),
            other => Err(Error::config(format!(
                "unknown RMSE scope '{other}', valid scopes are events-only, all"
            ))),
        }
    }
}

/// Root mean squared error against observed times of the in-scope records.
pub fn rmse(predictions: &[f64], truth: &[SurvivalRecord], scope: RmseScope) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} records",
            predictions.len(),
            truth.len()
        )));
    }
    let (sum, count) = predictions
        .iter()
        .zip(truth)
        .filter(|(_, r)| scope == RmseScope::All || r.is_event())
        .fold((0.0, 0usize), |(s, c), (p, r)| (s + (p - r.time).powi(2), c + 1));
    if count == 0 {
        return Err(Error::domain("no records in RMSE scope"));
    }
    Ok((sum / count as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dataset_id: String,
    pub methods: Vec<Engine>,
    pub aggregations: Vec<Aggregation>,
    pub fit: BoostConfig,
    pub test_fraction: f64,
    pub stratified: bool,
    /// Target cause for competing-risk data; all causes pooled when unset.
    pub cause: Option<u32>,
    pub cause_handling: CauseHandling,
    pub scope: RmseScope,
    /// Covariate profile for the survival curves; test-set means when unset.
    pub profile: Option<Vec<f64>>,
}

impl BenchConfig {
    pub fn new(dataset_id: impl Into<String>, fit: BoostConfig) -> Self {
        BenchConfig {
            dataset_id: dataset_id.into(),
            methods: vec![Engine::AdaRsf, Engine::AdaEsf, Engine::AdaMix],
            aggregations: vec![Aggregation::MeanOfMode],
            fit,
            test_fraction: 0.3,
            stratified: true,
            cause: None,
            cause_handling: CauseHandling::Recode,
            scope: RmseScope::EventsOnly,
            profile: None,
        }
    }

    pub fn split_plan(&self) -> SplitPlan {
        SplitPlan {
            seed: seed::derive(self.fit.seed, "bench-split", 0),
            test_fraction: self.test_fraction,
            stratified: self.stratified,
        }
    }
}

/// Everything needed to re-run a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMeta {
    pub dataset_id: String,
    pub n_records: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub stratified: bool,
    pub iterations: usize,
    pub trees_per_learner: usize,
    pub tau: f64,
    pub mtry: usize,
    pub d0: usize,
    pub min_child_events: usize,
    pub esf_cutpoints: usize,
    pub split_rule: String,
    pub epsilon_floor: f64,
    pub epsilon_ceiling: f64,
    pub aggregations: Vec<Aggregation>,
    pub methods: Vec<Engine>,
    pub cause: Option<u32>,
    pub cause_handling: CauseHandling,
    pub rmse_scope: RmseScope,
    pub time_units: String,
    pub threads: usize,
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Engine,
    pub aggregation: Aggregation,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub running_time_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub name: String,
    pub curve: SurvivalCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub meta: BenchMeta,
    pub rows: Vec<BenchRow>,
    #[serde(skip)]
    pub curves: Vec<NamedCurve>,
}

/// Kaplan-Meier of predicted times, every prediction counted as an event.
fn predicted_km(predictions: &[f64]) -> Result<SurvivalCurve> {
    let records: Vec<SurvivalRecord> = predictions
        .iter()
        .filter(|p| p.is_finite() && **p > 0.0)
        .map(|&p| SurvivalRecord::new(Vec::new(), p, Status::Event))
        .collect();
    Ok(kaplan_meier(&risk_table(&records)?))
}

fn prepare(data: &Dataset, cause: Option<u32>, handling: CauseHandling) -> Result<Dataset> {
    match cause {
        Some(c) => prepare_for_cause(data, c, handling),
        None => Ok(pool_causes(data)),
    }
}

/// Fits every (method, aggregation) pair on the same split and seed.
pub fn run_benchmark(data: &Dataset, cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.methods.is_empty() {
        return Err(Error::config("benchmark needs at least one method"));
    }
    if cfg.aggregations.is_empty() {
        return Err(Error::config("benchmark needs at least one aggregation"));
    }
    cfg.fit.validate()?;
    let prepared = prepare(data, cfg.cause, cfg.cause_handling)?;
    let (train_ix, test_ix) = split_indices(&prepared, &cfg.split_plan())?;
    let train = prepared.subset(&train_ix);
    let test = prepared.subset(&test_ix);
    train.require_events(2)?;

    let profile = match &cfg.profile {
        Some(p) if p.len() != data.n_features() => {
            return Err(Error::config(format!(
                "profile has {} values for {} features",
                p.len(),
                data.n_features()
            )))
        }
        Some(p) => p.clone(),
        None => test.covariate_means(),
    };
    let train_rows: Vec<&[f64]> = train.records().iter().map(|r| r.covariates.as_slice()).collect();
    let test_rows: Vec<&[f64]> = test.records().iter().map(|r| r.covariates.as_slice()).collect();

    let mut curves = vec![
        NamedCurve {
            name: "km_train".into(),
            curve: kaplan_meier(&risk_table(train.records())?),
        },
        NamedCurve {
            name: "km_test".into(),
            curve: kaplan_meier(&risk_table(test.records())?),
        },
    ];
    let mut rows = Vec::new();
    for &aggregation in &cfg.aggregations {
        for &method in &cfg.methods {
            let fit_cfg = BoostConfig {
                aggregation,
                ..cfg.fit
            };
            let start = Instant::now();
            let model = fit(&train, method, &fit_cfg)?;
            let test_pred = model.predict_many(&test_rows)?;
            let seconds = start.elapsed().as_secs_f64();
            let train_pred = model.predict_many(&train_rows)?;
            rows.push(BenchRow {
                method,
                aggregation,
                train_rmse: rmse(&train_pred, train.records(), cfg.scope)?,
                test_rmse: rmse(&test_pred, test.records(), cfg.scope)?,
                running_time_sec: (seconds * 100.0).round() / 100.0,
            });
            let tag = format!("{}_{}", method.name(), aggregation.name());
            curves.push(NamedCurve {
                name: format!("{tag}_survival"),
                curve: model.ensemble_survival(&profile)?,
            });
            curves.push(NamedCurve {
                name: format!("{tag}_predicted_km"),
                curve: predicted_km(&test_pred)?,
            });
        }
    }

    let forest = &cfg.fit.forest;
    let meta = BenchMeta {
        dataset_id: cfg.dataset_id.clone(),
        n_records: data.len(),
        n_train: train.len(),
        n_test: test.len(),
        n_features: data.n_features(),
        seed: cfg.fit.seed,
        test_fraction: cfg.test_fraction,
        stratified: cfg.stratified,
        iterations: cfg.fit.iterations,
        trees_per_learner: forest.ntree,
        tau: cfg.fit.tau,
        mtry: forest.mtry.unwrap_or_else(|| default_mtry(data.n_features())),
        d0: forest.stopping.d0,
        min_child_events: forest.stopping.child_event_floor(),
        esf_cutpoints: forest.esf_cutpoints,
        split_rule: forest.rule.name().to_string(),
        epsilon_floor: cfg.fit.epsilon_floor,
        epsilon_ceiling: cfg.fit.epsilon_ceiling,
        aggregations: cfg.aggregations.clone(),
        methods: cfg.methods.clone(),
        cause: cfg.cause,
        cause_handling: cfg.cause_handling,
        rmse_scope: cfg.scope,
        time_units: data.time_units().unwrap_or("unspecified").to_string(),
        threads: rayon::current_num_threads(),
        profile,
    };
    Ok(BenchReport { meta, rows, curves })
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl BenchReport {
    /// `method,aggregation,train_rmse,test_rmse,running_time_sec` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,aggregation,train_rmse,test_rmse,running_time_sec\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{:.2}\n",
                r.method.name(),
                r.aggregation.name(),
                r.train_rmse,
                r.test_rmse,
                r.running_time_sec
            ));
        }
        s
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{} | seed {} | {} iterations x {} trees | tau {} | RMSE in {} ({})\n",
            self.meta.dataset_id,
            self.meta.seed,
            self.meta.iterations,
            self.meta.trees_per_learner,
            self.meta.tau,
            self.meta.time_units,
            self.meta.rmse_scope.name()
        );
        s.push_str(&format!(
            "{:<8} {:<20} {:>10} {:>10} {:>9}\n",
            "method", "aggregation", "train", "test", "time(s)"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<8} {:<20} {:>10.3} {:>10.3} {:>9.2}\n",
                r.method.name(),
                r.aggregation.name(),
                r.train_rmse,
                r.test_rmse,
                r.running_time_sec
            ));
        }
        s
    }

    /// Writes `report.csv`, `report.json` and `curves/*.csv` under
    /// `<root>/<dataset_id>-seed<seed>/`, returning that directory.
    pub fn write_to(&self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(format!("{}-seed{}", self.meta.dataset_id, self.meta.seed));
        let curve_dir = dir.join("curves");
        fs::create_dir_all(&curve_dir).map_err(io_error(&curve_dir))?;
        let csv_path = dir.join("report.csv");
        fs::write(&csv_path, self.to_csv()).map_err(io_error(&csv_path))?;
        let json_path = dir.join("report.json");
        fs::write(&json_path, serde_json::to_string_pretty(self)?).map_err(io_error(&json_path))?;
        for c in &self.curves {
            let path = curve_dir.join(format!("{}.csv", c.name));
            let mut buf = Vec::new();
            c.curve.write_csv(&mut buf).map_err(io_error(&path))?;
            fs::write(&path, buf).map_err(io_error(&path))?;
        }
        Ok(dir)
    }
}
