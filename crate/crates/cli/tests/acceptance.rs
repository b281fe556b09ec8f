//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fail.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use adasurv::bench::{run_benchmark, BenchConfig, BenchReport};
use adasurv::boost::{fit_boosted, BoostConfig, BoostVariation};
use adasurv::competing::fit_cause_specific;
use adasurv::dataset::{derive_cause_labels, load_csv, CauseRule, ColumnSchema, Dataset, Status, SurvivalRecord};
use adasurv::estimators::{aalen_johansen, cause_specific_chf, kaplan_meier, nelson_aalen, RiskTable};
use adasurv::forest::{bootstrap_sample, out_of_bag_fraction, ForestConfig};
use adasurv::model::{fit, Engine};
use adasurv::seed;
use adasurv::split::{best_split, logrank_statistic, midpoint, CutpointMode, SplitContext, SplitRule};
use adasurv::tree::StoppingRule;
use rand::Rng;
use serde_json::Value;

const FORMULA_TOL: f64 = 1e-12;
const IDENTITY_TOL: f64 = 1e-10;
const LOGRANK_TOL: f64 = 1e-10;
const WEIGHT_TOL: f64 = 1e-12;
const OOB_TARGET: f64 = 0.368;
const OOB_TOL: f64 = 0.02;
const REPRO_FACTOR: f64 = 3.0;
const FOLLIC_DEATH_TEST: f64 = 1.536;
const PBC_DEATH_TRAIN: f64 = 5.99;
const PBC_DEATH_TEST: f64 = 5.58;

struct Tally {
    failed: Vec<&'static str>,
}

impl Tally {
    fn record(&mut self, id: &'static str, title: &str, pass: bool, detail: String) {
        println!("{} {id} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adasurv"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

// Criterion 1

type Obs = (f64, Status, Option<u32>);

fn random_observations(rng: &mut impl Rng) -> Vec<Obs> {
    let n = rng.random_range(1..=20);
    let causes = rng.random_range(1..=3u32);
    let censor_rate = rng.random_range(0.0..0.6);
    (0..n)
        .map(|_| {
            let t = rng.random_range(1..=10) as f64 * 0.5;
            if rng.random_bool(censor_rate) {
                (t, Status::Censored, None)
            } else {
                (t, Status::Event, Some(rng.random_range(1..=causes)))
            }
        })
        .collect()
}

fn risk(obs: &[Obs], s: f64) -> f64 {
    obs.iter().filter(|o| o.0 >= s).count() as f64
}

fn died(obs: &[Obs], s: f64, cause: Option<u32>) -> f64 {
    obs.iter()
        .filter(|o| o.0 == s && o.1 == Status::Event && (cause.is_none() || o.2 == cause))
        .count() as f64
}

fn jump_times(obs: &[Obs]) -> Vec<f64> {
    let mut t: Vec<f64> = obs.iter().filter(|o| o.1 == Status::Event).map(|o| o.0).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn brute_km(obs: &[Obs], t: f64, strict: bool) -> f64 {
    jump_times(obs)
        .into_iter()
        .filter(|&s| if strict { s < t } else { s <= t })
        .map(|s| 1.0 - died(obs, s, None) / risk(obs, s))
        .product()
}

fn brute_hazard(obs: &[Obs], t: f64, cause: Option<u32>) -> f64 {
    jump_times(obs)
        .into_iter()
        .filter(|&s| s <= t)
        .map(|s| died(obs, s, cause) / risk(obs, s))
        .sum()
}

fn brute_cif(obs: &[Obs], t: f64, cause: u32) -> f64 {
    jump_times(obs)
        .into_iter()
        .filter(|&s| s <= t)
        .map(|s| brute_km(obs, s, true) * died(obs, s, Some(cause)) / risk(obs, s))
        .sum()
}

fn criterion_1(t: &mut Tally) {
    let start = Instant::now();
    let mut rng = seed::stream(1, "acceptance-estimators", 0);
    let (mut formula_err, mut identity_err) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let obs = random_observations(&mut rng);
        let declared: BTreeSet<u32> = obs.iter().filter_map(|o| o.2).collect();
        let table = RiskTable::from_observations(obs.iter().copied(), &declared).unwrap();
        let km = kaplan_meier(&table);
        let na = nelson_aalen(&table);
        let grid: Vec<f64> = (0..=24).map(|k| k as f64 * 0.25).collect();
        for &x in &grid {
            formula_err = formula_err.max((km.eval(x) - brute_km(&obs, x, false)).abs());
            formula_err = formula_err.max((na.eval(x) - brute_hazard(&obs, x, None)).abs());
            let (mut f_sum, mut h_sum) = (0.0, 0.0);
            for &c in &declared {
                let f = aalen_johansen(&table, c).unwrap().eval(x);
                let h = cause_specific_chf(&table, c).unwrap().eval(x);
                formula_err = formula_err.max((f - brute_cif(&obs, x, c)).abs());
                formula_err = formula_err.max((h - brute_hazard(&obs, x, Some(c))).abs());
                f_sum += f;
                h_sum += h;
            }
            if !declared.is_empty() {
                identity_err = identity_err.max((km.eval(x) + f_sum - 1.0).abs());
                identity_err = identity_err.max((na.eval(x) - h_sum).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    t.record(
        "C1",
        "estimator oracle suite (500 instances)",
        formula_err <= FORMULA_TOL && identity_err <= IDENTITY_TOL && secs < 5.0,
        format!("max formula error {formula_err:.2e} (tol {FORMULA_TOL:e}), max identity error {identity_err:.2e} (tol {IDENTITY_TOL:e}), {secs:.2}s (< 5s)"),
    );
}

// Criterion 2

fn brute_logrank(parent: &[SurvivalRecord], left: &[bool]) -> f64 {
    let mut times: Vec<f64> = parent.iter().filter(|r| r.is_event()).map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut num, mut var) = (0.0f64, 0.0f64);
    for s in times {
        let mut d = 0.0;
        let mut r = 0.0;
        let mut d1 = 0.0;
        let mut r1 = 0.0;
        for (i, rec) in parent.iter().enumerate() {
            if rec.time >= s {
                r += 1.0;
                if left[i] {
                    r1 += 1.0;
                }
            }
            if rec.time == s && rec.is_event() {
                d += 1.0;
                if left[i] {
                    d1 += 1.0;
                }
            }
        }
        num += d1 - r1 * d / r;
        if r > 1.0 {
            var += d * (r - d) / (r - 1.0) * (r1 / r) * (1.0 - r1 / r);
        }
    }
    if var == 0.0 {
        0.0
    } else {
        num / var.sqrt()
    }
}

fn random_node(rng: &mut impl Rng, p: usize) -> Vec<SurvivalRecord> {
    let n = rng.random_range(2..=12);
    let mut rs: Vec<SurvivalRecord> = (0..n)
        .map(|_| {
            let x = (0..p).map(|_| rng.random_range(0..6) as f64).collect();
            let status = if rng.random_bool(0.7) { Status::Event } else { Status::Censored };
            SurvivalRecord::new(x, rng.random_range(1..8) as f64, status)
        })
        .collect();
    rs[0].status = Status::Event;
    rs
}

fn distinct_events<'a>(rs: impl Iterator<Item = &'a SurvivalRecord>) -> usize {
    let mut t: Vec<f64> = rs.filter(|r| r.is_event()).map(|r| r.time).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.len()
}

/// Best |LR| over every feature and midpoint leaving each child an event.
fn brute_best_score(parent: &[SurvivalRecord]) -> Option<(usize, f64, f64)> {
    let p = parent[0].covariates.len();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..p {
        let mut xs: Vec<f64> = parent.iter().map(|r| r.covariates[f]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for w in xs.windows(2) {
            let c = midpoint(w[0], w[1]);
            let mask: Vec<bool> = parent.iter().map(|r| r.covariates[f] <= c).collect();
            let left = distinct_events(parent.iter().zip(&mask).filter(|(_, m)| **m).map(|(r, _)| r));
            let right = distinct_events(parent.iter().zip(&mask).filter(|(_, m)| !**m).map(|(r, _)| r));
            if left == 0 || right == 0 {
                continue;
            }
            let score = brute_logrank(parent, &mask).abs();
            if score > 0.0 && best.is_none_or(|b| score > b.2 + LOGRANK_TOL) {
                best = Some((f, c, score));
            }
        }
    }
    best
}

fn criterion_2(t: &mut Tally) {
    let mut rng = seed::stream(2, "acceptance-split", 0);
    let mut max_err = 0.0f64;
    let mut max_dup = 0.0f64;
    let mut argmax_ok = 0;
    for _ in 0..200 {
        let node = random_node(&mut rng, 3);
        let mut mask: Vec<bool> = (0..node.len()).map(|_| rng.random_bool(0.5)).collect();
        mask[0] = true;
        let last = mask.len() - 1;
        mask[last] = false;
        max_err = max_err.max((logrank_statistic(&node, &mask).unwrap() - brute_logrank(&node, &mask)).abs());

        let mut doubled = node.clone();
        doubled.extend(node.iter().cloned());
        let half: Vec<bool> = (0..doubled.len()).map(|i| i < node.len()).collect();
        max_dup = max_dup.max(logrank_statistic(&doubled, &half).unwrap().abs());

        let data = Dataset::new(node.clone(), vec!["a".into(), "b".into(), "c".into()], false).unwrap();
        let members: Vec<usize> = (0..node.len()).collect();
        let ctx = SplitContext {
            members: &members,
            mode: CutpointMode::Exhaustive,
            rule: SplitRule::LogRank,
            mtry: 3,
            rng_seed: 0,
            min_child_events: 1,
        };
        let got = best_split(&ctx, &data).unwrap();
        let want = brute_best_score(&node);
        let ok = match (got, want) {
            (None, None) => true,
            (Some(g), Some((_, _, score))) => {
                let m: Vec<bool> = node.iter().map(|r| r.covariates[g.feature_index] <= g.cutpoint).collect();
                (g.score - score).abs() <= LOGRANK_TOL && (brute_logrank(&node, &m).abs() - score).abs() <= LOGRANK_TOL
            }
            _ => false,
        };
        if ok {
            argmax_ok += 1;
        }
    }
    t.record(
        "C2",
        "split oracle suite (200 nodes)",
        max_err <= LOGRANK_TOL && max_dup <= LOGRANK_TOL && argmax_ok == 200,
        format!("max |LR - hand| {max_err:.2e} (tol {LOGRANK_TOL:e}), duplicated-children max |LR| {max_dup:.2e}, best_split = brute argmax on {argmax_ok}/200"),
    );
}

// Criterion 3

fn boost_dataset(index: u64) -> Dataset {
    let mut rng = seed::stream(3, "acceptance-boost", index);
    let n = rng.random_range(12..=60);
    let records = (0..n)
        .map(|i| {
            let x = vec![rng.random_range(0.0..10.0), rng.random_range(0..4) as f64];
            let t = rng.random_range(1..30) as f64 + 2.0 * x[1];
            let status = if i < 3 || rng.random_bool(0.75) { Status::Event } else { Status::Censored };
            SurvivalRecord::new(x, t, status)
        })
        .collect();
    Dataset::new(records, vec!["a".into(), "b".into()], false).unwrap()
}

fn small_forest() -> ForestConfig {
    ForestConfig {
        ntree: 3,
        stopping: StoppingRule {
            d0: 6,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn criterion_3(t: &mut Tally) {
    let variations = [BoostVariation::AdaRsf, BoostVariation::AdaEsf, BoostVariation::AdaMix];
    let mut weight_err = 0.0f64;
    let mut min_weight = f64::INFINITY;
    let mut alpha_err = 0.0f64;
    let mut monotone_checked = 0;
    let mut monotone_ok = 0;
    let mut k1_ok = true;
    for k in 0..20u64 {
        let data = boost_dataset(k);
        let cfg = BoostConfig {
            iterations: 5,
            variation: variations[k as usize % 3],
            seed: k,
            forest: small_forest(),
            ..Default::default()
        };
        let ens = fit_boosted(&data, &cfg).unwrap();
        for w in &ens.weight_history {
            weight_err = weight_err.max((w.iter().sum::<f64>() - 1.0).abs());
            min_weight = min_weight.min(w.iter().copied().fold(f64::INFINITY, f64::min));
        }
        for s in &ens.stages {
            let e = s.epsilon.clamp(cfg.epsilon_floor, cfg.epsilon_ceiling);
            alpha_err = alpha_err.max((s.alpha - ((1.0 - e) / e).ln()).abs());
        }
        if ens.stages.iter().all(|s| s.epsilon < 0.5) {
            monotone_checked += 1;
            let path = ens.exponential_error_path(&data).unwrap();
            if path.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) {
                monotone_ok += 1;
            }
        }
        let one = fit_boosted(&data, &BoostConfig { iterations: 1, ..cfg }).unwrap();
        for r in data.records() {
            let weak = one.stages[0].forest.predict_time(&r.covariates, cfg.aggregation).unwrap();
            k1_ok &= one.predict(&r.covariates).unwrap() == weak;
        }
    }
    t.record(
        "C3",
        "boosting property suite (20 datasets)",
        weight_err <= WEIGHT_TOL && min_weight > 0.0 && alpha_err == 0.0 && monotone_ok == monotone_checked && k1_ok,
        format!(
            "max |sum w - 1| {weight_err:.2e} (tol {WEIGHT_TOL:e}), min w {min_weight:.2e}, alpha recompute error {alpha_err:e}, \
             prefix error non-increasing on {monotone_ok}/{monotone_checked} all-eps<0.5 fits, K=1 reduction {}",
            if k1_ok { "exact" } else { "broken" }
        ),
    );
}

// Criterion 4

fn criterion_4(t: &mut Tally) {
    let base: Vec<usize> = (0..200).collect();
    let mut rng = seed::stream(4, "acceptance-oob", 0);
    let draws = 2000;
    let mean = (0..draws)
        .map(|_| out_of_bag_fraction(200, &bootstrap_sample(&base, &mut rng)))
        .sum::<f64>()
        / draws as f64;
    t.record(
        "C4",
        "bootstrap out-of-bag fraction",
        (mean - OOB_TARGET).abs() <= OOB_TOL,
        format!("mean OOB fraction {mean:.4} over {draws} draws of n=200 (target {OOB_TARGET} +/- {OOB_TOL})"),
    );
}

// Criterion 5

fn follicular() -> Dataset {
    let schema = ColumnSchema {
        time_units: Some("years".into()),
        ..ColumnSchema::new("dftime", "dfcens")
    };
    let raw = load_csv(data_dir().join("follicular.csv"), &schema).unwrap();
    derive_cause_labels(&raw, &CauseRule::parse("relapse:1,death:2").unwrap()).unwrap()
}

fn pbc() -> Dataset {
    let schema = ColumnSchema {
        cause: Some("cause".into()),
        time_units: Some("years".into()),
        ..ColumnSchema::new("years", "status")
    };
    load_csv(data_dir().join("pbc.csv"), &schema).unwrap()
}

fn in_band(value: f64, anchor: f64) -> bool {
    value >= anchor / REPRO_FACTOR && value <= anchor * REPRO_FACTOR
}

fn ada_esf_death(id: &str, data: &Dataset) -> (BenchReport, f64) {
    let mut cfg = BenchConfig::new(id, BoostConfig::default());
    cfg.methods = vec![Engine::AdaEsf];
    cfg.cause = Some(2);
    let start = Instant::now();
    let report = run_benchmark(data, &cfg).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn criterion_5(t: &mut Tally) {
    let (f, f_secs) = ada_esf_death("follicular", &follicular());
    let row = &f.rows[0];
    t.record(
        "C5a",
        "follicular death, ADA-ESF mean-of-mode 10x10, test RMSE within x3 of 1.536",
        in_band(row.test_rmse, FOLLIC_DEATH_TEST) && row.running_time_sec < 60.0,
        format!(
            "test RMSE {:.3} {} (band [{:.3}, {:.3}]), train {:.3}, fit+predict {:.2}s (< 60s), bench wall {f_secs:.2}s, seed {}",
            row.test_rmse,
            f.meta.time_units,
            FOLLIC_DEATH_TEST / REPRO_FACTOR,
            FOLLIC_DEATH_TEST * REPRO_FACTOR,
            row.train_rmse,
            row.running_time_sec,
            f.meta.seed
        ),
    );
    let (p, p_secs) = ada_esf_death("pbc", &pbc());
    let row = &p.rows[0];
    t.record(
        "C5b",
        "PBC death, ADA-ESF mean-of-mode 10x10, train/test RMSE within x3 of 5.99/5.58",
        in_band(row.train_rmse, PBC_DEATH_TRAIN) && in_band(row.test_rmse, PBC_DEATH_TEST) && row.running_time_sec < 60.0,
        format!(
            "train {:.3} (band [{:.3}, {:.3}]), test {:.3} (band [{:.3}, {:.3}]) {}, fit+predict {:.2}s, bench wall {p_secs:.2}s, seed {}",
            row.train_rmse,
            PBC_DEATH_TRAIN / REPRO_FACTOR,
            PBC_DEATH_TRAIN * REPRO_FACTOR,
            row.test_rmse,
            PBC_DEATH_TEST / REPRO_FACTOR,
            PBC_DEATH_TEST * REPRO_FACTOR,
            p.meta.time_units,
            row.running_time_sec,
            p.meta.seed
        ),
    );
}

// Criterion 6

fn without_timing_csv(text: &str) -> String {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn without_timing_json(text: &str) -> Value {
    let mut v: Value = serde_json::from_str(text).unwrap();
    for row in v["rows"].as_array_mut().unwrap() {
        row.as_object_mut().unwrap().remove("running_time_sec");
    }
    v
}

fn files_equal(a: &Path, b: &Path) -> bool {
    fs::read(a).unwrap() == fs::read(b).unwrap()
}

fn criterion_6(t: &mut Tally) {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = data_dir().join("follicular.cfg");
    let fit = |out: &Path| {
        run_ok(bin().args(["fit", "--config"]).arg(&cfg).args(["--cause", "all", "--seed", "5", "--out"]).arg(out));
    };
    fit(&root.join("a"));
    fit(&root.join("b"));
    let mut checks = vec![
        ("fit model.json", files_equal(&root.join("a/model.json"), &root.join("b/model.json"))),
        (
            "fit train_predictions.csv",
            files_equal(&root.join("a/train_predictions.csv"), &root.join("b/train_predictions.csv")),
        ),
    ];
    run_ok(bin().args(["fit", "--config"]).arg(root.join("a/manifest.cfg")).arg("--out").arg(root.join("c")));
    checks.push(("manifest re-run model.json", files_equal(&root.join("a/model.json"), &root.join("c/model.json"))));

    let predict = |out: &Path| {
        run_ok(
            bin()
                .args(["predict", "--model"])
                .arg(root.join("a/model.json"))
                .arg("--input")
                .arg(data_dir().join("follicular.csv"))
                .arg("--output")
                .arg(out),
        );
    };
    predict(&root.join("p1.csv"));
    predict(&root.join("p2.csv"));
    checks.push(("predict output", files_equal(&root.join("p1.csv"), &root.join("p2.csv"))));
    checks.push((
        "predict on training file = fit-time predictions",
        files_equal(&root.join("p1.csv"), &root.join("a/train_predictions.csv")),
    ));

    let bench = |out: &Path| {
        run_ok(
            bin()
                .args(["bench", "--config"])
                .arg(data_dir().join("pbc.cfg"))
                .args(["--cause", "2", "--iterations", "3", "--aggregations", "mean,mapped", "--seed", "9", "--out"])
                .arg(out),
        );
    };
    bench(&root.join("b1"));
    bench(&root.join("b2"));
    let d1 = root.join("b1/pbc-seed9");
    let d2 = root.join("b2/pbc-seed9");
    let read = |p: PathBuf| fs::read_to_string(p).unwrap();
    checks.push((
        "bench report.csv (timing excluded)",
        without_timing_csv(&read(d1.join("report.csv"))) == without_timing_csv(&read(d2.join("report.csv"))),
    ));
    let j1 = without_timing_json(&read(d1.join("report.json")));
    let j2 = without_timing_json(&read(d2.join("report.json")));
    checks.push(("bench report.json (timing excluded)", j1 == j2));
    let curves_same = fs::read_dir(d1.join("curves"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .all(|p| files_equal(&p, &d2.join("curves").join(p.file_name().unwrap())));
    checks.push(("bench curves", curves_same));

    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    t.record(
        "C6",
        "determinism of fit/predict/bench under an identical manifest",
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} byte comparisons identical (this platform only)", checks.len())
        } else {
            format!("differs: {}", failed.join("; "))
        },
    );
}

// Criterion 7

fn criterion_7(t: &mut Tally) {
    let mut rng = seed::stream(7, "acceptance-single-cause", 0);
    let rows: Vec<(Vec<f64>, f64, bool)> = (0..80)
        .map(|_| {
            let x = vec![rng.random_range(0.0..5.0), rng.random_range(0..3) as f64];
            (x, rng.random_range(1..50) as f64, rng.random_bool(0.7))
        })
        .collect();
    let make = |competing: bool| {
        let records = rows
            .iter()
            .map(|(x, tm, e)| match (e, competing) {
                (false, _) => SurvivalRecord::new(x.clone(), *tm, Status::Censored),
                (true, true) => SurvivalRecord::with_cause(x.clone(), *tm, 1),
                (true, false) => SurvivalRecord::new(x.clone(), *tm, Status::Event),
            })
            .collect();
        Dataset::new(records, vec!["a".into(), "b".into()], competing).unwrap()
    };
    let (competing, plain) = (make(true), make(false));
    let cfg = BoostConfig {
        iterations: 3,
        seed: 77,
        forest: small_forest(),
        ..Default::default()
    };
    let mut library_ok = 0;
    for engine in Engine::ALL {
        let cs = fit_cause_specific(&competing, 1, engine, &cfg).unwrap();
        let direct = fit(&plain, engine, &cfg).unwrap();
        if serde_json::to_string(&cs.model).unwrap() == serde_json::to_string(&direct).unwrap() {
            library_ok += 1;
        }
    }

    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("one_cause.csv");
    let mut text = String::from("a,b,time,status,cause\n");
    for (x, tm, e) in &rows {
        text.push_str(&format!("{},{},{},{},{}\n", x[0], x[1], tm, u8::from(*e), if *e { "1" } else { "" }));
    }
    fs::write(&csv, text).unwrap();
    let fit_cli = |out: &str, extra: &[&str]| {
        run_ok(
            bin()
                .arg("fit")
                .arg("--data")
                .arg(&csv)
                .args(extra)
                .args(["--method", "ada-mix", "--seed", "13", "--iterations", "3", "--ignore", "cause", "--out"])
                .arg(tmp.path().join(out)),
        );
        let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join(out).join("model.json")).unwrap()).unwrap();
        v["entries"][0]["model"].to_string()
    };
    let cli_plain = fit_cli("plain", &[]);
    let cli_cause = fit_cli("cause", &["--cause-col", "cause", "--cause", "1"]);
    let cli_ok = cli_plain == cli_cause;
    t.record(
        "C7",
        "single-cause reduction",
        library_ok == Engine::ALL.len() && cli_ok,
        format!(
            "serialized models equal for {library_ok}/{} engines (library), CLI ada-mix fit {}",
            Engine::ALL.len(),
            if cli_ok { "equal" } else { "differs" }
        ),
    );
}

// Criterion 8

fn criterion_8(t: &mut Tally) {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curves");
    run_ok(
        bin()
            .args(["curves", "--config"])
            .arg(data_dir().join("follicular.cfg"))
            .args(["--profile", "km-only", "--out"])
            .arg(&out),
    );
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("curves.json")).unwrap()).unwrap();
    let last = |name: &str| -> f64 {
        let c = v["curves"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["name"] == name)
            .unwrap_or_else(|| panic!("curve {name} missing"));
        c["curve"]["values"].as_array().unwrap().last().unwrap().as_f64().unwrap()
    };
    let (s, f1, f2) = (last("km"), last("aj_cause1"), last("aj_cause2"));
    let closure = (s + f1 + f2 - 1.0).abs();
    let data = follicular();
    let counts = (
        data.records().iter().filter(|r| r.cause == Some(1)).count(),
        data.records().iter().filter(|r| r.cause == Some(2)).count(),
        data.records().iter().filter(|r| !r.is_event()).count(),
    );
    t.record(
        "C8",
        "follicular curve emission",
        closure <= IDENTITY_TOL && f1 > f2 && counts == (272, 76, 193),
        format!(
            "S(t_max) {s:.6} + F_relapse {f1:.6} + F_death {f2:.6} - 1 = {closure:.2e} (tol {IDENTITY_TOL:e}), counts {}/{}/{}",
            counts.0, counts.1, counts.2
        ),
    );
}

fn main() {
    let mut t = Tally { failed: Vec::new() };
    criterion_1(&mut t);
    criterion_2(&mut t);
    criterion_3(&mut t);
    criterion_4(&mut t);
    criterion_5(&mut t);
    criterion_6(&mut t);
    criterion_7(&mut t);
    criterion_8(&mut t);
    if t.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: {} failing: {}", t.failed.len(), t.failed.join(", "));
        std::process::exit(1);
    }
}
