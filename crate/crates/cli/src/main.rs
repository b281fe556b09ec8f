//! `adasurv`: fit, predict, curves and bench for boosted survival forests.

mod commands;
mod envelope;
mod settings;

use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::process::ExitCode;

use adasurv::Error;
use clap::parser::ValueSource;
use clap::{Arg, ArgMatches, Command};
use serde_json::json;

use crate::settings::Settings;

const DATA_FLAGS: &[(&str, &str)] = &[
    ("data", "Dataset CSV path"),
    ("time-col", "Time column [default: time]"),
    ("status-col", "Status column, 1/0 or event/censored [default: status]"),
    ("cause-col", "Integer cause column for competing risks"),
    ("covariates", "Comma-separated covariate columns [default: all remaining]"),
    ("ignore", "Comma-separated columns to skip"),
    ("derive-cause", "Cause labels from indicator columns, e.g. relapse:1,death:2"),
    ("time-units", "Time unit label recorded with outputs"),
];

const LEARNER_FLAGS: &[(&str, &str)] = &[
    ("iterations", "Boosting iterations K [default: 10]"),
    ("ntree", "Trees per forest [default: 10]"),
    ("mtry", "Features tried per node [default: ceil(sqrt(p))]"),
    ("d0", "Leaf size parameter [default: 15]"),
    ("min-child-events", "Distinct event times each child must keep"),
    ("max-depth", "Optional depth cap"),
    ("tau", "Correctness tolerance in event-time SDs [default: 0.5]"),
    ("esf-cutpoints", "Random cutpoints per feature in ESF [default: 1]"),
    ("split-rule", "logrank or logrank-score [default: logrank]"),
    ("epsilon-floor", "Lower guard on the weighted error [default: 1e-6]"),
    ("epsilon-ceiling", "Upper guard on the weighted error [default: 0.5-1e-6]"),
    ("seed", "Master seed [default: 0]"),
    ("cause", "Target cause: an integer, 'all' (fit only) or 'pooled' [default: pooled]"),
    ("cause-handling", "Other-cause events: recode (censor) or subset (drop) [default: recode]"),
];

fn flags(list: &[(&'static str, &'static str)]) -> Vec<Arg> {
    list.iter()
        .map(|(name, help)| Arg::new(*name).long(*name).value_name("VALUE").help(*help))
        .collect()
}

fn common() -> Vec<Arg> {
    flags(&[
        ("config", "Flat key = value config file; explicit flags win"),
        ("threads", "Worker threads [default: available cores]"),
    ])
}

fn cli() -> Command {
    Command::new("adasurv")
        .about("Boosted random and extra survival forests for censored and competing-risk data")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("fit")
                .about("Fit a model and write model.json, manifest.cfg and train_predictions.csv")
                .args(common())
                .args(flags(DATA_FLAGS))
                .args(flags(LEARNER_FLAGS))
                .args(flags(&[
                    ("method", "rsf, esf, ada-rsf, ada-esf or ada-mix [default: ada-esf]"),
                    ("aggregation", "mean-of-mode or mapped-mean-of-mode [default: mean-of-mode]"),
                    ("out", "Output directory"),
                ])),
        )
        .subcommand(
            Command::new("predict")
                .about("Predict event times for every row of a CSV")
                .args(common())
                .args(flags(&[
                    ("model", "model.json written by fit"),
                    ("input", "CSV with the model's feature columns"),
                    ("output", "Output CSV [default: stdout]"),
                ])),
        )
        .subcommand(
            Command::new("curves")
                .about("Model survival and hazard at a profile, and KM/NA/AJ curves of a dataset")
                .args(common())
                .args(flags(DATA_FLAGS))
                .args(flags(&[
                    ("model", "model.json written by fit"),
                    ("profile", "km-only, mean, or comma-separated covariate values [default: mean]"),
                    ("out", "Output directory"),
                ])),
        )
        .subcommand(
            Command::new("bench")
                .about("Train/test RMSE and running time across methods")
                .args(common())
                .args(flags(DATA_FLAGS))
                .args(flags(LEARNER_FLAGS))
                .args(flags(&[
                    ("methods", "Comma-separated methods [default: ada-rsf,ada-esf,ada-mix]"),
                    ("aggregations", "Comma-separated aggregations [default: mean-of-mode]"),
                    ("test-fraction", "Held-out fraction [default: 0.3]"),
                    ("stratified", "Keep the event share equal across sides [default: true]"),
                    ("rmse-scope", "events-only or all [default: events-only]"),
                    ("dataset-id", "Report label [default: data file stem]"),
                    ("profile", "mean or comma-separated covariate values [default: mean]"),
                    ("out", "Report root directory [default: bench]"),
                ])),
        )
}

/// Config file values overlaid with flags given on the command line.
fn merged_settings(m: &ArgMatches) -> adasurv::Result<Settings> {
    let mut s = match m.get_one::<String>("config") {
        Some(path) => Settings::load(Path::new(path))?,
        None => Settings::default(),
    };
    for id in m.ids() {
        let key = id.as_str();
        if key == "config" || m.value_source(key) != Some(ValueSource::CommandLine) {
            continue;
        }
        if let Some(v) = m.get_one::<String>(key) {
            s.set(key, v.clone());
        }
    }
    Ok(s)
}

fn init_threads(s: &Settings) -> adasurv::Result<Option<usize>> {
    let threads: Option<usize> = s.parsed("threads")?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))?;
    }
    Ok(threads)
}

fn run(name: &str, m: &ArgMatches) -> adasurv::Result<()> {
    let s = merged_settings(m)?;
    let threads = init_threads(&s)?;
    match name {
        "fit" => commands::cmd_fit(&s, threads),
        "predict" => commands::cmd_predict(&s),
        "curves" => commands::cmd_curves(&s),
        "bench" => commands::cmd_bench(&s, threads),
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Config(_) => 2,
        Error::Parse { .. } | Error::Validation(_) | Error::Domain(_) | Error::FeatureMismatch { .. } | Error::Serde(_) => 3,
        Error::DegenerateModel(_) => 4,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Io { .. } => "io",
        Error::Parse { .. } => "parse",
        Error::Validation(_) => "validation",
        Error::Config(_) => "config",
        Error::Domain(_) => "domain",
        Error::FeatureMismatch { .. } => "feature_mismatch",
        Error::DegenerateModel(_) => "degenerate_model",
        Error::Serde(_) => "serde",
    }
}

/// One JSON object on one line.
fn report(e: &Error) -> String {
    let mut v = json!({
        "error": kind(e),
        "exit": exit_code(e),
        "message": e.to_string(),
    });
    match e {
        Error::Io { path, .. } => v["path"] = json!(path.display().to_string()),
        Error::FeatureMismatch { missing, extra } => {
            v["missing"] = json!(missing);
            v["extra"] = json!(extra);
        }
        _ => {}
    }
    v.to_string()
}

fn main() -> ExitCode {
    std::panic::set_hook(Box::new(|info| {
        let msg = json!({ "error": "internal", "exit": 4, "message": info.to_string().replace('\n', " ") });
        eprintln!("{msg}");
    }));
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match std::panic::catch_unwind(AssertUnwindSafe(|| run(name, sub))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{}", report(&e));
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(4),
    }
}
