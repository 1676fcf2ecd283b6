//! Simulation harnesses.
//!
//! [`event`] runs the protocols in continuous time with message latency.
//! [`cycle`] runs them in lockstep rounds and parallelizes the read-only part
//! of each round, which is what makes million-node runs feasible.

pub mod cycle;
pub mod event;

use rand::seq::index;
use rand::Rng;

use crate::discovery::{ImportantParams, ImportantTable};
use crate::error::SimError;
use crate::geo::{Address, Directory, NodeId};
use crate::metrics::{self, Coverage, GroundTruth};
use crate::peer_sampling::{NewsItem, NewsTable, DEFAULT_TABLE_SIZE};
use crate::rng::SimRng;
use crate::time::SimTime;

/// Parameters shared by both engines.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// One-way message latency.
    pub latency_ms: u32,
    /// Period of the news exchange.
    pub news_period_ms: u32,
    /// Mean period of the important-nodes exchange; individual periods are
    /// uniform in `[mean/2, 3*mean/2]`.
    pub important_period_ms: u32,
    /// News table size (`N`).
    pub news_table_size: usize,
    pub important: ImportantParams,
    /// Start every node with random foreign news items instead of a single
    /// bootstrap node.
    pub warm_start: bool,
    /// Items each node starts with under a warm start.
    pub warm_start_items: usize,
    /// Well-known node for cold starts; a random node when unset.
    pub bootstrap: Option<NodeId>,
    pub seed: u64,
    /// Stop as soon as every node knows all its candidates.
    pub stop_when_stable: bool,
    /// Event engine cut-off.
    pub max_time_ms: u32,
    /// Cycle engine cut-off.
    pub max_iterations: u32,
    /// Interval between metric samples in the event engine.
    pub sample_interval_ms: u32,
    /// Check table invariants and coverage bookkeeping while running.
    pub verify: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            latency_ms: 50,
            news_period_ms: 15_000,
            important_period_ms: 15_000,
            news_table_size: DEFAULT_TABLE_SIZE,
            important: ImportantParams::default(),
            warm_start: true,
            warm_start_items: DEFAULT_TABLE_SIZE,
            bootstrap: None,
            seed: 0,
            stop_when_stable: true,
            max_time_ms: 3_600_000,
            max_iterations: 200,
            sample_interval_ms: 10_000,
            verify: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if self.news_table_size == 0 {
            return bad("news table size must be at least 1");
        }
        if self.important.exchange_k == 0 {
            return bad("K must be at least 1");
        }
        if self.important.max_m < self.important.exchange_k
            || self.important.max_m < self.important.base_m
        {
            return bad("maximum table size must be at least K and the base size");
        }
        if self.news_period_ms == 0 || self.important_period_ms == 0 || self.sample_interval_ms == 0
        {
            return bad("periods must be positive");
        }
        Ok(())
    }
}

/// Protocol state of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub news: NewsTable,
    pub important: ImportantTable,
}

impl NodeState {
    pub fn new(cfg: &SimConfig) -> Self {
        Self {
            news: NewsTable::new(cfg.news_table_size),
            important: ImportantTable::new(&cfg.important),
        }
    }

    /// Merges received news and scores the senders for the important table.
    pub(crate) fn absorb_news(
        &mut self,
        me: Address,
        items: &[NewsItem],
        now: SimTime,
        dir: &Directory,
        cfg: &SimConfig,
    ) {
        self.news.merge(me, items, dir);
        let found: Vec<Address> = items.iter().map(|i| i.node).collect();
        self.important
            .insert_candidates(me, &found, now, dir, &cfg.important);
    }
}

/// Incremental count of nodes that still miss candidates.
///
/// With static positions every candidate entry in a table is a true
/// candidate, so a node is complete exactly when its candidate count reaches
/// its true degree.
#[derive(Debug, Clone)]
pub(crate) struct CoverageTracker {
    complete: Vec<bool>,
    missing: usize,
}

impl CoverageTracker {
    pub fn new(states: &[NodeState], truth: &GroundTruth) -> Self {
        let complete: Vec<bool> = states
            .iter()
            .enumerate()
            .map(|(i, s)| s.important.candidate_count() >= truth.degree(Address(i as u32)))
            .collect();
        let missing = complete.iter().filter(|c| !**c).count();
        Self { complete, missing }
    }

    pub fn update(&mut self, node: Address, state: &NodeState, truth: &GroundTruth) {
        let now = state.important.candidate_count() >= truth.degree(node);
        let slot = &mut self.complete[node.index()];
        if now != *slot {
            if now {
                self.missing -= 1;
            } else {
                self.missing += 1;
            }
            *slot = now;
        }
    }

    pub fn missing(&self) -> usize {
        self.missing
    }

    pub fn coverage(&self) -> Coverage {
        let n = self.complete.len();
        Coverage {
            fraction_complete: if n == 0 {
                1.0
            } else {
                (n - self.missing) as f64 / n as f64
            },
            nodes_missing: self.missing,
        }
    }
}

/// Coverage recomputed from the tables by set comparison.
pub fn exact_coverage(states: &[NodeState], truth: &GroundTruth) -> Coverage {
    metrics::coverage(states.iter().map(|s| s.important.entries()), truth)
}

/// Initial tables: a random sample of foreign nodes for every node (warm), or
/// only the bootstrap node (cold).
pub(crate) fn initial_states(
    dir: &Directory,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> Result<Vec<NodeState>, SimError> {
    let n = dir.len();
    let mut states = vec![NodeState::new(cfg); n];
    if n < 2 {
        return Ok(states);
    }
    if cfg.warm_start {
        let want = cfg.warm_start_items.min(n - 1);
        for (i, state) in states.iter_mut().enumerate() {
            let me = Address(i as u32);
            let items: Vec<NewsItem> = index::sample(rng, n, (want + 1).min(n))
                .into_iter()
                .filter(|&j| j != i)
                .take(want)
                .map(|j| NewsItem::new(Address(j as u32), SimTime::ZERO))
                .collect();
            state.absorb_news(me, &items, SimTime::ZERO, dir, cfg);
        }
    } else {
        let boot = match cfg.bootstrap {
            Some(id) => dir.find(id).ok_or(SimError::UnknownAttachNode(id))?,
            None => Address(rng.random_range(0..n as u32)),
        };
        let item = [NewsItem::new(boot, SimTime::ZERO)];
        for (i, state) in states.iter_mut().enumerate() {
            if i != boot.index() {
                state.absorb_news(Address(i as u32), &item, SimTime::ZERO, dir, cfg);
            }
        }
    }
    Ok(states)
}

/// Checks every node's tables; returns the first violation.
pub fn check_states(states: &[NodeState], dir: &Directory, cfg: &SimConfig) -> Result<(), String> {
    for (i, s) in states.iter().enumerate() {
        let me = Address(i as u32);
        s.news
            .check_invariants(me, dir)
            .map_err(|e| format!("node {i} news: {e}"))?;
        s.important
            .check_invariants(me, dir, &cfg.important)
            .map_err(|e| format!("node {i} important: {e}"))?;
    }
    Ok(())
}
