//! Node splitting: the log-rank statistic, the log-rank score statistic,
//! and the candidate search used by both forest flavours.
//!
//! The search sorts the node once per sampled feature and moves records
//! from the right child to the left child in feature order. Per-time
//! at-risk and event counts of the left child are updated in place, so a
//! candidate costs one pass over the node's distinct event times.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::seed;

/// Split statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    #[default]
    LogRank,
    LogRankScore,
}

impl SplitRule {
    pub fn name(self) -> &'static str {
        match self {
            SplitRule::LogRank => "logrank",
            SplitRule::LogRankScore => "logrank-score",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "logrank" | "lr" => Ok(SplitRule::LogRank),
            "logrank-score" | "lrs" => Ok(SplitRule::LogRankScore),
            other => Err(Error::config(format!(
                "unknown split rule '{other}', valid rules are logrank, logrank-score"
            ))),
        }
    }
}

/// Which cutpoints are tried per sampled feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutpointMode {
    /// Every midpoint between consecutive distinct values.
    Exhaustive,
    /// `k` uniform draws between the node-local minimum and maximum.
    Random { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub cutpoint: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct SplitContext<'a> {
    /// Row indices of the node; repeats are allowed.
    pub members: &'a [usize],
    pub mode: CutpointMode,
    pub rule: SplitRule,
    pub mtry: usize,
    pub rng_seed: u64,
    /// Each child needs at least this many distinct event times.
    pub min_child_events: usize,
}

/// Per-node event-time summary shared by every candidate.
struct NodeSummary {
    /// d_k / R_k per distinct event time.
    hazard: Vec<f64>,
    /// d_k (R_k - d_k) / (R_k - 1), zero when R_k = 1.
    var_factor: Vec<f64>,
    at_risk: Vec<f64>,
    events: Vec<u32>,
    /// Number of event times <= the member's time.
    pos: Vec<usize>,
    /// Event-time slot of an event member.
    slot: Vec<Option<usize>>,
    /// Log-rank scores, filled only for the score rule.
    scores: Vec<f64>,
    score_mean: f64,
    score_var: f64,
}

impl NodeSummary {
    fn new<'a>(records: impl Iterator<Item = &'a SurvivalRecord> + Clone, rule: SplitRule) -> Self {
        let mut times: Vec<f64> = records.clone().filter(|r| r.is_event()).map(|r| r.time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let e = times.len();
        let mut events = vec![0u32; e];
        let mut at_risk = vec![0.0f64; e];
        let mut pos = Vec::new();
        let mut slot = Vec::new();
        for r in records {
            let p = times.partition_point(|&t| t <= r.time);
            pos.push(p);
            let s = if r.is_event() { Some(p - 1) } else { None };
            if let Some(k) = s {
                events[k] += 1;
            }
            slot.push(s);
            // at risk at every event time <= own time
            if p > 0 {
                at_risk[p - 1] += 1.0;
            }
        }
        for k in (0..e.saturating_sub(1)).rev() {
            at_risk[k] += at_risk[k + 1];
        }
        let hazard: Vec<f64> = (0..e).map(|k| events[k] as f64 / at_risk[k]).collect();
        let var_factor = (0..e)
            .map(|k| {
                let (d, r) = (events[k] as f64, at_risk[k]);
                if r > 1.0 {
                    d * (r - d) / (r - 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let mut summary = NodeSummary {
            hazard,
            var_factor,
            at_risk,
            events,
            pos,
            slot,
            scores: Vec::new(),
            score_mean: 0.0,
            score_var: 0.0,
        };
        if rule == SplitRule::LogRankScore {
            let mut cumulative = Vec::with_capacity(e + 1);
            cumulative.push(0.0);
            for k in 0..e {
                cumulative.push(cumulative[k] + summary.hazard[k]);
            }
            summary.scores = summary
                .pos
                .iter()
                .zip(&summary.slot)
                .map(|(&p, s)| if s.is_some() { 1.0 } else { 0.0 } - cumulative[p])
                .collect();
            let (mean, var) = mean_and_sample_variance(&summary.scores);
            summary.score_mean = mean;
            summary.score_var = var;
        }
        summary
    }

    fn n_event_times(&self) -> usize {
        self.events.len()
    }
}

fn mean_and_sample_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (xs.first().copied().unwrap_or(0.0), 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

/// Left-child state while sweeping one feature.
struct Sweep<'s> {
    node: &'s NodeSummary,
    left_at_risk: Vec<u32>,
    left_events: Vec<u32>,
    n_left: usize,
    left_unique: usize,
    right_unique: usize,
    score_sum: f64,
}

impl<'s> Sweep<'s> {
    fn new(node: &'s NodeSummary) -> Self {
        let e = node.n_event_times();
        Sweep {
            node,
            left_at_risk: vec![0; e],
            left_events: vec![0; e],
            n_left: 0,
            left_unique: 0,
            right_unique: e,
            score_sum: 0.0,
        }
    }

    fn move_left(&mut self, member: usize) {
        let p = self.node.pos[member];
        for r in &mut self.left_at_risk[..p] {
            *r += 1;
        }
        if let Some(k) = self.node.slot[member] {
            if self.left_events[k] == 0 {
                self.left_unique += 1;
            }
            self.left_events[k] += 1;
            if self.left_events[k] == self.node.events[k] {
                self.right_unique -= 1;
            }
        }
        if !self.node.scores.is_empty() {
            self.score_sum += self.node.scores[member];
        }
        self.n_left += 1;
    }

    fn logrank(&self) -> f64 {
        let node = self.node;
        let mut num = 0.0;
        let mut var = 0.0;
        for k in 0..node.n_event_times() {
            let r1 = self.left_at_risk[k] as f64;
            let share = r1 / node.at_risk[k];
            num += self.left_events[k] as f64 - r1 * node.hazard[k];
            var += node.var_factor[k] * share * (1.0 - share);
        }
        if var > 0.0 {
            num / var.sqrt()
        } else {
            0.0
        }
    }

    fn logrank_score(&self) -> f64 {
        let n = self.node.pos.len() as f64;
        let n1 = self.n_left as f64;
        let denom = n1 * (1.0 - n1 / n) * self.node.score_var;
        if self.n_left == 0 || denom <= 0.0 {
            return 0.0;
        }
        (self.score_sum - n1 * self.node.score_mean) / denom.sqrt()
    }
}

fn check_mask(n: usize, left_mask: &[bool]) -> Result<()> {
    if left_mask.len() != n {
        return Err(Error::domain(format!(
            "mask has {} entries for {n} records",
            left_mask.len()
        )));
    }
    let n_left = left_mask.iter().filter(|&&b| b).count();
    if n_left == 0 || n_left == n {
        return Err(Error::domain("both children must be nonempty"));
    }
    Ok(())
}

/// Signed log-rank statistic of the left child against the parent.
///
/// Returns 0 when the variance sum vanishes.
pub fn logrank_statistic(parent: &[SurvivalRecord], left_mask: &[bool]) -> Result<f64> {
    check_mask(parent.len(), left_mask)?;
    if !parent.iter().any(|r| r.is_event()) {
        return Err(Error::domain("parent node has no events"));
    }
    let node = NodeSummary::new(parent.iter(), SplitRule::LogRank);
    let mut sweep = Sweep::new(&node);
    for (i, _) in left_mask.iter().enumerate().filter(|(_, &b)| b) {
        sweep.move_left(i);
    }
    Ok(sweep.logrank())
}

/// Log-rank scores `delta_i - H(T_i)` with `H` the node's Nelson-Aalen
/// estimate.
pub fn logrank_scores(parent: &[SurvivalRecord]) -> Vec<f64> {
    NodeSummary::new(parent.iter(), SplitRule::LogRankScore).scores
}

/// Standardized log-rank score statistic for the split `x_feature <= cutpoint`.
pub fn logrank_score_statistic(parent: &[SurvivalRecord], feature: usize, cutpoint: f64) -> Result<f64> {
    if parent.is_empty() {
        return Err(Error::domain("empty node"));
    }
    if parent.iter().any(|r| r.covariates.len() <= feature) {
        return Err(Error::domain(format!("feature {feature} out of range")));
    }
    let node = NodeSummary::new(parent.iter(), SplitRule::LogRankScore);
    let mut sweep = Sweep::new(&node);
    for (i, r) in parent.iter().enumerate() {
        if r.covariates[feature] <= cutpoint {
            sweep.move_left(i);
        }
    }
    Ok(sweep.logrank_score())
}

/// Midpoint of `a < b`, kept strictly below `b`.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m >= b {
        a
    } else {
        m
    }
}

/// Best admissible split of a node, or `None` when it should be a leaf.
///
/// Candidates are scanned feature by feature (ascending index) and
/// cutpoint by cutpoint (ascending), and only a strictly larger score
/// replaces the current best, which gives the (feature, cutpoint) tie
/// order.
pub fn best_split(ctx: &SplitContext<'_>, data: &Dataset) -> Result<Option<SplitCandidate>> {
    let p = data.n_features();
    if ctx.mtry == 0 {
        return Err(Error::config("mtry must be at least 1"));
    }
    if let CutpointMode::Random { k: 0 } = ctx.mode {
        return Err(Error::config("random cutpoint count must be at least 1"));
    }
    let members = ctx.members;
    if members.len() < 2 || p == 0 {
        return Ok(None);
    }
    let records = members.iter().map(|&i| data.record(i));
    if !records.clone().any(|r| r.is_event()) {
        return Ok(None);
    }
    let node = NodeSummary::new(records, ctx.rule);
    let mut rng = seed::rng(ctx.rng_seed);
    let mut features = index::sample(&mut rng, p, ctx.mtry.min(p)).into_vec();
    features.sort_unstable();

    let min_child = ctx.min_child_events.max(1);
    let mut best: Option<SplitCandidate> = None;
    let mut order: Vec<usize> = (0..members.len()).collect();
    let mut cutpoints: Vec<f64> = Vec::new();
    for &f in &features {
        let x = |m: usize| data.record(members[m]).covariates[f];
        order.sort_by(|&a, &b| x(a).total_cmp(&x(b)));
        let lo = x(order[0]);
        let hi = x(order[order.len() - 1]);
        if lo >= hi {
            continue;
        }
        cutpoints.clear();
        match ctx.mode {
            CutpointMode::Exhaustive => {
                for w in order.windows(2) {
                    let (a, b) = (x(w[0]), x(w[1]));
                    if a < b {
                        cutpoints.push(midpoint(a, b));
                    }
                }
            }
            CutpointMode::Random { k } => {
                cutpoints.extend((0..k).map(|_| rng.random_range(lo..hi)));
                cutpoints.sort_by(f64::total_cmp);
            }
        }

        let mut sweep = Sweep::new(&node);
        let mut next = 0;
        for &c in &cutpoints {
            while next < order.len() && x(order[next]) <= c {
                sweep.move_left(order[next]);
                next += 1;
            }
            if sweep.n_left == 0 || sweep.n_left == order.len() {
                continue;
            }
            if sweep.left_unique < min_child || sweep.right_unique < min_child {
                continue;
            }
            let stat = match ctx.rule {
                SplitRule::LogRank => sweep.logrank(),
                SplitRule::LogRankScore => sweep.logrank_score(),
            };
            let score = stat.abs();
            if !(score > 0.0 && score.is_finite()) {
                continue;
            }
            if best.is_none_or(|b| score > b.score) {
                best = Some(SplitCandidate {
                    feature_index: f,
                    cutpoint: c,
                    score,
                });
            }
        }
    }
    Ok(best)
}

/// Splits `members` by `x_feature <= cutpoint`.
pub fn partition(data: &Dataset, members: &[usize], feature: usize, cutpoint: f64) -> (Vec<usize>, Vec<usize>) {
    members
        .iter()
        .partition(|&&i| data.record(i).covariates[feature] <= cutpoint)
}
