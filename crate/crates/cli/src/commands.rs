//! Resolution of settings into typed configs, and the four subcommands.

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use adasurv::bench::{run_benchmark, BenchConfig, NamedCurve, RmseScope};
use adasurv::boost::BoostConfig;
use adasurv::competing::{cause_curves, fit_cause_specific_with, pool_causes, CauseHandling};
use adasurv::dataset::{derive_cause_labels, load_csv, read_covariates, CauseRule, ColumnSchema, CovariateTable, Dataset};
use adasurv::estimators::{kaplan_meier, nelson_aalen, risk_table, SurvivalCurve};
use adasurv::forest::{Aggregation, ForestConfig};
use adasurv::model::{fit, Engine};
use adasurv::split::SplitRule;
use adasurv::tree::StoppingRule;
use adasurv::{Error, Result};
use serde::Serialize;

use crate::envelope::{ModelEntry, ModelEnvelope, MODEL_SCHEMA};
use crate::settings::{Manifest, Settings};

pub const MODEL_FILE: &str = "model.json";
pub const MANIFEST_FILE: &str = "manifest.cfg";
pub const TRAIN_PREDICTIONS_FILE: &str = "train_predictions.csv";
pub const CURVES_JSON: &str = "curves.json";

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(io_error(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_error(path))
}

fn read_table(path: &Path, env: &ModelEnvelope) -> Result<CovariateTable> {
    let file = File::open(path).map_err(io_error(path))?;
    read_covariates(file, &env.feature_names, &env.encodings)
}

/// Dataset location and column roles.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub path: PathBuf,
    pub schema: ColumnSchema,
    pub derive_cause: Option<CauseRule>,
}

impl DataSpec {
    /// `None` when no `data` setting is present.
    pub fn resolve(s: &Settings) -> Result<Option<DataSpec>> {
        let Some(path) = s.path("data") else {
            return Ok(None);
        };
        let mut schema = ColumnSchema::new(s.get("time_col").unwrap_or("time"), s.get("status_col").unwrap_or("status"));
        schema.cause = s.get("cause_col").map(String::from);
        schema.covariates = s.list("covariates");
        schema.ignore = s.list("ignore");
        schema.time_units = s.get("time_units").map(String::from);
        let derive_cause = s.get("derive_cause").map(CauseRule::parse).transpose()?;
        if derive_cause.is_some() && schema.cause.is_some() {
            return Err(Error::Config("set either cause-col or derive-cause, not both".into()));
        }
        Ok(Some(DataSpec {
            path,
            schema,
            derive_cause,
        }))
    }

    pub fn require(s: &Settings) -> Result<DataSpec> {
        DataSpec::resolve(s)?.ok_or_else(|| Error::Config("missing required setting 'data'".into()))
    }

    pub fn load(&self) -> Result<Dataset> {
        let raw = load_csv(&self.path, &self.schema)?;
        match &self.derive_cause {
            Some(rule) => derive_cause_labels(&raw, rule),
            None => Ok(raw),
        }
    }

    pub fn record(&self, m: &mut Manifest) {
        m.push_path("data", &self.path);
        m.push("time_col", &self.schema.time);
        m.push("status_col", &self.schema.status);
        m.push_opt("cause_col", self.schema.cause.as_ref());
        if !self.schema.covariates.is_empty() {
            m.push("covariates", self.schema.covariates.join(","));
        }
        if !self.schema.ignore.is_empty() {
            m.push("ignore", self.schema.ignore.join(","));
        }
        m.push_opt("derive_cause", self.derive_cause.as_ref().map(CauseRule::to_spec));
        m.push_opt("time_units", self.schema.time_units.as_ref());
    }
}

/// Learner settings shared by `fit` and `bench`.
pub fn boost_config(s: &Settings) -> Result<BoostConfig> {
    let d = BoostConfig::default();
    let f = ForestConfig::default();
    let cfg = BoostConfig {
        iterations: s.parsed_or("iterations", d.iterations)?,
        forest: ForestConfig {
            ntree: s.parsed_or("ntree", f.ntree)?,
            rule: s.get("split_rule").map(SplitRule::parse).transpose()?.unwrap_or(f.rule),
            mtry: s.parsed("mtry")?,
            stopping: StoppingRule {
                d0: s.parsed_or("d0", f.stopping.d0)?,
                min_child_events: s.parsed("min_child_events")?,
                max_depth: s.parsed("max_depth")?,
            },
            esf_cutpoints: s.parsed_or("esf_cutpoints", f.esf_cutpoints)?,
        },
        tau: s.parsed_or("tau", d.tau)?,
        variation: d.variation,
        aggregation: s
            .get("aggregation")
            .map(Aggregation::parse)
            .transpose()?
            .unwrap_or(d.aggregation),
        seed: s.parsed_or("seed", d.seed)?,
        epsilon_floor: s.parsed_or("epsilon_floor", d.epsilon_floor)?,
        epsilon_ceiling: s.parsed_or("epsilon_ceiling", d.epsilon_ceiling)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn record_boost(m: &mut Manifest, cfg: &BoostConfig, with_aggregation: bool) {
    if with_aggregation {
        m.push("aggregation", cfg.aggregation.name());
    }
    m.push("iterations", cfg.iterations);
    m.push("ntree", cfg.forest.ntree);
    m.push_opt("mtry", cfg.forest.mtry);
    m.push("d0", cfg.forest.stopping.d0);
    m.push_opt("min_child_events", cfg.forest.stopping.min_child_events);
    m.push_opt("max_depth", cfg.forest.stopping.max_depth);
    m.push("tau", cfg.tau);
    m.push("esf_cutpoints", cfg.forest.esf_cutpoints);
    m.push("split_rule", cfg.forest.rule.name());
    m.push("epsilon_floor", cfg.epsilon_floor);
    m.push("epsilon_ceiling", cfg.epsilon_ceiling);
    m.push("seed", cfg.seed);
}

/// Which cause(s) a competing-risk fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauseSelection {
    /// Every event counts regardless of cause.
    Pooled,
    One(u32),
    /// One cause-specific model per observed cause.
    All,
}

impl CauseSelection {
    pub fn resolve(s: &Settings) -> Result<CauseSelection> {
        match s.get("cause").map(str::to_ascii_lowercase).as_deref() {
            None | Some("pooled") => Ok(CauseSelection::Pooled),
            Some("all") => Ok(CauseSelection::All),
            Some(raw) => raw
                .parse::<u32>()
                .ok()
                .filter(|c| *c > 0)
                .map(CauseSelection::One)
                .ok_or_else(|| Error::Config(format!("cause must be a positive integer, 'all' or 'pooled', got '{raw}'"))),
        }
    }
}

impl fmt::Display for CauseSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CauseSelection::Pooled => write!(f, "pooled"),
            CauseSelection::One(c) => write!(f, "{c}"),
            CauseSelection::All => write!(f, "all"),
        }
    }
}

fn cause_handling(s: &Settings) -> Result<CauseHandling> {
    Ok(s.get("cause_handling")
        .map(CauseHandling::parse)
        .transpose()?
        .unwrap_or_default())
}

#[derive(Debug, Clone)]
pub struct FitPlan {
    pub data: DataSpec,
    pub engine: Engine,
    pub cfg: BoostConfig,
    pub cause: CauseSelection,
    pub handling: CauseHandling,
    pub out: PathBuf,
}

impl FitPlan {
    pub fn resolve(s: &Settings) -> Result<FitPlan> {
        Ok(FitPlan {
            data: DataSpec::require(s)?,
            engine: Engine::parse(s.get("method").unwrap_or("ada-esf"))?,
            cfg: boost_config(s)?,
            cause: CauseSelection::resolve(s)?,
            handling: cause_handling(s)?,
            out: PathBuf::from(s.require("out")?),
        })
    }

    pub fn manifest(&self, threads: Option<usize>) -> Manifest {
        let mut m = Manifest::default();
        self.data.record(&mut m);
        m.push("method", self.engine.name());
        record_boost(&mut m, &self.cfg, true);
        m.push("cause", self.cause);
        m.push("cause_handling", self.handling.name());
        m.push_path("out", &self.out);
        m.push_opt("threads", threads);
        m
    }
}

/// Fits the model(s) described by `plan` on `data`.
pub fn fit_envelope(data: &Dataset, plan: &FitPlan) -> Result<ModelEnvelope> {
    let entries = match plan.cause {
        CauseSelection::Pooled => {
            let pooled = pool_causes(data);
            pooled.require_events(1)?;
            vec![ModelEntry {
                cause: None,
                recoding: data.is_competing_risk().then(|| "all causes pooled".to_string()),
                model: fit(&pooled, plan.engine, &plan.cfg)?,
            }]
        }
        CauseSelection::One(c) => vec![cause_entry(data, c, plan)?],
        CauseSelection::All => {
            if !data.is_competing_risk() || data.causes().is_empty() {
                return Err(Error::Domain("cause = all needs a competing-risk dataset".into()));
            }
            data.causes()
                .iter()
                .map(|&c| cause_entry(data, c, plan))
                .collect::<Result<_>>()?
        }
    };
    Ok(ModelEnvelope {
        schema: MODEL_SCHEMA.to_string(),
        engine: plan.engine,
        feature_names: data.feature_names().to_vec(),
        encodings: data.encodings().to_vec(),
        time_units: data.time_units().map(String::from),
        training_means: data.covariate_means(),
        cause_handling: (plan.cause != CauseSelection::Pooled).then_some(plan.handling),
        entries,
    })
}

fn cause_entry(data: &Dataset, cause: u32, plan: &FitPlan) -> Result<ModelEntry> {
    let m = fit_cause_specific_with(data, cause, plan.engine, &plan.cfg, plan.handling)?;
    Ok(ModelEntry {
        cause: Some(m.cause),
        recoding: Some(m.recoding),
        model: m.model,
    })
}

pub fn cmd_fit(s: &Settings, threads: Option<usize>) -> Result<()> {
    let plan = FitPlan::resolve(s)?;
    let data = plan.data.load()?;
    let env = fit_envelope(&data, &plan)?;
    create_dir(&plan.out)?;
    write_file(&plan.out.join(MODEL_FILE), env.to_json()?)?;
    write_file(&plan.out.join(MANIFEST_FILE), plan.manifest(threads).render("fit"))?;
    let table = read_table(&plan.data.path, &env)?;
    write_file(&plan.out.join(TRAIN_PREDICTIONS_FILE), env.prediction_csv(&table)?)?;
    println!(
        "fitted {} on {} records ({} dropped), {} model(s) -> {}",
        plan.engine.name(),
        data.len(),
        data.dropped_rows(),
        env.entries.len(),
        plan.out.display()
    );
    Ok(())
}

pub fn cmd_predict(s: &Settings) -> Result<()> {
    let model = PathBuf::from(s.require("model")?);
    let input = PathBuf::from(s.require("input")?);
    let env = ModelEnvelope::load(&model)?;
    let table = read_table(&input, &env)?;
    let csv = env.prediction_csv(&table)?;
    match s.path("output") {
        Some(path) => write_file(&path, csv)?,
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })?,
    }
    Ok(())
}

/// Covariate profile for model curves.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    KmOnly,
    Mean,
    Values(Vec<f64>),
}

impl Profile {
    pub fn parse(raw: &str) -> Result<Profile> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "km-only" | "km_only" | "km" => Ok(Profile::KmOnly),
            "mean" => Ok(Profile::Mean),
            _ => raw
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Config(format!("profile value '{}' is not a number", v.trim())))
                })
                .collect::<Result<Vec<_>>>()
                .map(Profile::Values),
        }
    }
}

#[derive(Debug, Serialize)]
struct CurveBundle<'a> {
    profile: Option<&'a [f64]>,
    time_units: Option<&'a str>,
    curves: &'a [NamedCurve],
}

fn named(name: impl Into<String>, curve: SurvivalCurve) -> NamedCurve {
    NamedCurve {
        name: name.into(),
        curve,
    }
}

/// Model curves at a profile plus nonparametric curves of a dataset.
pub fn collect_curves(
    env: Option<&ModelEnvelope>,
    profile: &Profile,
    data: Option<&Dataset>,
) -> Result<(Option<Vec<f64>>, Vec<NamedCurve>)> {
    let mut curves = Vec::new();
    let x = match (env, profile) {
        (_, Profile::KmOnly) => None,
        (None, _) => return Err(Error::Config("a covariate profile needs --model".into())),
        (Some(env), Profile::Mean) => Some(env.training_means.clone()),
        (Some(env), Profile::Values(v)) => {
            if v.len() != env.feature_names.len() {
                return Err(Error::Config(format!(
                    "profile has {} values, model has {} features ({})",
                    v.len(),
                    env.feature_names.len(),
                    env.feature_names.join(", ")
                )));
            }
            Some(v.clone())
        }
    };
    if let (Some(env), Some(x)) = (env, &x) {
        for e in &env.entries {
            let tag = match e.cause {
                Some(c) => format!("model_cause{c}"),
                None => "model".to_string(),
            };
            curves.push(named(format!("{tag}_survival"), e.model.ensemble_survival(x)?));
            curves.push(named(format!("{tag}_chf"), e.model.ensemble_chf(x)?));
        }
    }
    if let Some(data) = data {
        if data.is_competing_risk() {
            let cc = cause_curves(data)?;
            curves.push(named("km", cc.event_free));
            curves.push(named("na", cc.hazard));
            for (c, (aj, chf)) in cc.causes {
                curves.push(named(format!("aj_cause{c}"), aj));
                curves.push(named(format!("cs_chf_cause{c}"), chf));
            }
        } else {
            let table = risk_table(data.records())?;
            curves.push(named("km", kaplan_meier(&table)));
            curves.push(named("na", nelson_aalen(&table)));
        }
    }
    Ok((x, curves))
}

pub fn cmd_curves(s: &Settings) -> Result<()> {
    let env = s.path("model").map(|p| ModelEnvelope::load(&p)).transpose()?;
    let data_spec = DataSpec::resolve(s)?;
    if env.is_none() && data_spec.is_none() {
        return Err(Error::Config("curves needs --model, --data, or both".into()));
    }
    let profile = match s.get("profile") {
        Some(raw) => Profile::parse(raw)?,
        None if env.is_some() => Profile::Mean,
        None => Profile::KmOnly,
    };
    let data = data_spec.as_ref().map(DataSpec::load).transpose()?;
    let out = PathBuf::from(s.require("out")?);
    let (x, curves) = collect_curves(env.as_ref(), &profile, data.as_ref())?;

    create_dir(&out)?;
    for c in &curves {
        let path = out.join(format!("{}.csv", c.name));
        let mut buf = Vec::new();
        c.curve.write_csv(&mut buf).map_err(io_error(&path))?;
        write_file(&path, buf)?;
    }
    let units = env
        .as_ref()
        .and_then(|e| e.time_units.as_deref())
        .or_else(|| data.as_ref().and_then(|d| d.time_units()));
    let bundle = CurveBundle {
        profile: x.as_deref(),
        time_units: units,
        curves: &curves,
    };
    write_file(&out.join(CURVES_JSON), serde_json::to_string_pretty(&bundle)?)?;
    println!("wrote {} curves -> {}", curves.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub data: DataSpec,
    pub bench: BenchConfig,
    pub out: PathBuf,
}

impl BenchPlan {
    pub fn resolve(s: &Settings) -> Result<BenchPlan> {
        let data = DataSpec::require(s)?;
        let id = match s.get("dataset_id") {
            Some(id) => id.to_string(),
            None => data
                .path
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
        };
        let mut bench = BenchConfig::new(id, boost_config(s)?);
        let methods = s.list("methods");
        if !methods.is_empty() {
            bench.methods = methods.iter().map(|m| Engine::parse(m)).collect::<Result<_>>()?;
        }
        let aggregations = s.list("aggregations");
        if !aggregations.is_empty() {
            bench.aggregations = aggregations.iter().map(|a| Aggregation::parse(a)).collect::<Result<_>>()?;
        }
        bench.test_fraction = s.parsed_or("test_fraction", bench.test_fraction)?;
        bench.stratified = s.flag("stratified", bench.stratified)?;
        bench.scope = s.get("rmse_scope").map(RmseScope::parse).transpose()?.unwrap_or_default();
        bench.cause = match CauseSelection::resolve(s)? {
            CauseSelection::Pooled => None,
            CauseSelection::One(c) => Some(c),
            CauseSelection::All => {
                return Err(Error::Config("bench takes a single cause or none".into()));
            }
        };
        bench.cause_handling = cause_handling(s)?;
        bench.profile = match s.get("profile").map(Profile::parse).transpose()? {
            None | Some(Profile::Mean) => None,
            Some(Profile::Values(v)) => Some(v),
            Some(Profile::KmOnly) => return Err(Error::Config("bench profile must be 'mean' or values".into())),
        };
        Ok(BenchPlan {
            data,
            bench,
            out: s.path("out").unwrap_or_else(|| PathBuf::from("bench")),
        })
    }

    pub fn manifest(&self, threads: Option<usize>) -> Manifest {
        let b = &self.bench;
        let mut m = Manifest::default();
        self.data.record(&mut m);
        m.push("dataset_id", &b.dataset_id);
        m.push("methods", b.methods.iter().map(|e| e.name()).collect::<Vec<_>>().join(","));
        m.push("aggregations", b.aggregations.iter().map(|a| a.name()).collect::<Vec<_>>().join(","));
        record_boost(&mut m, &b.fit, false);
        m.push("test_fraction", b.test_fraction);
        m.push("stratified", b.stratified);
        m.push("rmse_scope", b.scope.name());
        m.push("cause", b.cause.map_or(CauseSelection::Pooled, CauseSelection::One));
        m.push("cause_handling", b.cause_handling.name());
        m.push_opt(
            "profile",
            b.profile
                .as_ref()
                .map(|p| p.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        );
        m.push_path("out", &self.out);
        m.push_opt("threads", threads);
        m
    }
}

pub fn cmd_bench(s: &Settings, threads: Option<usize>) -> Result<()> {
    let plan = BenchPlan::resolve(s)?;
    let data = plan.data.load()?;
    let report = run_benchmark(&data, &plan.bench)?;
    let dir = report.write_to(&plan.out)?;
    write_file(&dir.join(MANIFEST_FILE), plan.manifest(threads).render("bench"))?;
    print!("{}", report.to_table());
    println!("report -> {}", dir.display());
    Ok(())
}
