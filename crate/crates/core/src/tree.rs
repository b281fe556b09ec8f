//! Single survival trees.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{nelson_aalen, risk_table, SurvivalCurve};
use crate::seed;
use crate::split::{best_split, partition, CutpointMode, SplitContext, SplitRule};

pub const TREE_SCHEMA: &str = "adasurv.tree/v1";

/// Fraction applied to the reference event count `d0`.
pub const EVENT_FRACTION: f64 = 0.632;

/// When growth stops.
///
/// A node with at most `ceil(0.632 * d0)` events is a leaf, and a split is
/// admissible only if each child keeps at least
/// `max(1, floor(0.632 * d0 / 2))` distinct event times (or
/// `min_child_events` when set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub d0: usize,
    pub min_child_events: Option<usize>,
    pub max_depth: Option<usize>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            d0: 15,
            min_child_events: None,
            max_depth: None,
        }
    }
}

impl StoppingRule {
    pub fn node_event_threshold(&self) -> usize {
        (EVENT_FRACTION * self.d0 as f64).ceil() as usize
    }

    pub fn child_event_floor(&self) -> usize {
        self.min_child_events
            .unwrap_or_else(|| ((EVENT_FRACTION * self.d0 as f64 / 2.0).floor() as usize).max(1))
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d0 == 0 {
            return Err(Error::config("d0 must be at least 1"));
        }
        if self.min_child_events == Some(0) {
            return Err(Error::config("min child events must be at least 1"));
        }
        Ok(())
    }
}

/// Everything that shapes the growth of one tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub mode: CutpointMode,
    pub rule: SplitRule,
    /// Features tried per node; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    pub stopping: StoppingRule,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            mode: CutpointMode::Exhaustive,
            rule: SplitRule::LogRank,
            mtry: None,
            stopping: StoppingRule::default(),
        }
    }
}

/// `ceil(sqrt(p))`, at least 1.
pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().ceil() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// Training row indices, with bootstrap repeats.
    pub members: Vec<usize>,
    /// Sorted event times of the members, with repeats.
    pub event_times: Vec<f64>,
    pub chf: SurvivalCurve,
    pub mode_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Internal {
        feature: usize,
        cutpoint: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthMeta {
    pub mode: CutpointMode,
    pub rule: SplitRule,
    pub mtry: usize,
    pub stopping: StoppingRule,
    pub seed: u64,
    pub n_features: usize,
}

/// A binary survival tree stored as a node array with the root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTree {
    pub schema: String,
    pub meta: GrowthMeta,
    pub nodes: Vec<Node>,
}

/// The most frequent event time, smallest on ties. `times` must be sorted.
pub fn mode_of_sorted(times: &[f64]) -> Option<f64> {
    let mut best: Option<(f64, usize)> = None;
    let mut i = 0;
    while i < times.len() {
        let mut j = i;
        while j < times.len() && times[j] == times[i] {
            j += 1;
        }
        if best.is_none_or(|(_, c)| j - i > c) {
            best = Some((times[i], j - i));
        }
        i = j;
    }
    best.map(|(t, _)| t)
}

/// Mode time of a leaf.
pub fn leaf_mode_time(leaf: &Leaf) -> f64 {
    leaf.mode_time
}

struct Grower<'a> {
    data: &'a Dataset,
    config: TreeConfig,
    mtry: usize,
    seed: u64,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn make_leaf(&self, members: Vec<usize>) -> Result<Node> {
        let table = risk_table(members.iter().map(|&i| self.data.record(i)))?;
        let mut event_times: Vec<f64> = members
            .iter()
            .map(|&i| self.data.record(i))
            .filter(|r| r.is_event())
            .map(|r| r.time)
            .collect();
        event_times.sort_by(f64::total_cmp);
        let mode_time = mode_of_sorted(&event_times)
            .ok_or_else(|| Error::domain("leaf without events"))?;
        Ok(Node::Leaf(Leaf {
            members,
            event_times,
            chf: nelson_aalen(&table),
            mode_time,
        }))
    }

    fn grow(&mut self, members: Vec<usize>, depth: usize) -> Result<usize> {
        let id = self.nodes.len();
        // placeholder until the children are known
        self.nodes.push(Node::Internal {
            feature: 0,
            cutpoint: 0.0,
            left: 0,
            right: 0,
        });
        let stopping = self.config.stopping;
        let events = members.iter().filter(|&&i| self.data.record(i).is_event()).count();
        let depth_reached = stopping.max_depth.is_some_and(|d| depth >= d);
        let candidate = if events <= stopping.node_event_threshold() || depth_reached {
            None
        } else {
            let ctx = SplitContext {
                members: &members,
                mode: self.config.mode,
                rule: self.config.rule,
                mtry: self.mtry,
                rng_seed: seed::derive(self.seed, "node", id as u64),
                min_child_events: stopping.child_event_floor(),
            };
            best_split(&ctx, self.data)?
        };
        match candidate {
            None => {
                self.nodes[id] = self.make_leaf(members)?;
            }
            Some(c) => {
                let (l, r) = partition(self.data, &members, c.feature_index, c.cutpoint);
                drop(members);
                let left = self.grow(l, depth + 1)?;
                let right = self.grow(r, depth + 1)?;
                self.nodes[id] = Node::Internal {
                    feature: c.feature_index,
                    cutpoint: c.cutpoint,
                    left,
                    right,
                };
            }
        }
        Ok(id)
    }
}

/// Grows a tree on `members` (row indices into `data`, repeats allowed).
pub fn grow(data: &Dataset, members: &[usize], config: &TreeConfig, seed: u64) -> Result<SurvivalTree> {
    config.stopping.validate()?;
    if members.is_empty() {
        return Err(Error::domain("cannot grow a tree on an empty sample"));
    }
    if !members.iter().any(|&i| data.record(i).is_event()) {
        return Err(Error::domain("cannot grow a tree on an all-censored sample"));
    }
    let p = data.n_features();
    let mtry = match config.mtry {
        Some(0) => return Err(Error::config("mtry must be at least 1")),
        Some(m) => m.min(p.max(1)),
        None => default_mtry(p),
    };
    let mut grower = Grower {
        data,
        config: *config,
        mtry,
        seed,
        nodes: Vec::new(),
    };
    grower.grow(members.to_vec(), 0)?;
    Ok(SurvivalTree {
        schema: TREE_SCHEMA.to_string(),
        meta: GrowthMeta {
            mode: config.mode,
            rule: config.rule,
            mtry,
            stopping: config.stopping,
            seed,
            n_features: p,
        },
        nodes: grower.nodes,
    })
}

impl SurvivalTree {
    /// Index of the leaf reached by `x` (`x_j <= c` goes left).
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.meta.n_features {
            return Err(Error::domain(format!(
                "covariate vector has {} entries, tree expects {}",
                x.len(),
                self.meta.n_features
            )));
        }
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(_) => return Ok(id),
                Node::Internal {
                    feature,
                    cutpoint,
                    left,
                    right,
                } => id = if x[*feature] <= *cutpoint { *left } else { *right },
            }
        }
    }

    pub fn drop_down(&self, x: &[f64]) -> Result<&Leaf> {
        let id = self.leaf_index(x)?;
        match &self.nodes[id] {
            Node::Leaf(leaf) => Ok(leaf),
            Node::Internal { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(l) => Some(l),
            Node::Internal { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf(_) => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tree: SurvivalTree = serde_json::from_str(text)?;
        if tree.schema != TREE_SCHEMA {
            return Err(Error::validation(format!(
                "unsupported tree schema '{}', expected '{TREE_SCHEMA}'",
                tree.schema
            )));
        }
        Ok(tree)
    }
}
