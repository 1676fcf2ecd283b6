//! Discrete-event engine.
//!
//! Events run in `(fire_time, sequence)` order off a binary heap. Every
//! exchange is two messages, each delivered `latency` after it was sent, and
//! a node only ever touches its own tables while handling an event.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{check_states, exact_coverage, initial_states, CoverageTracker, NodeState, SimConfig};
use crate::discovery::exchange_bytes;
use crate::error::SimError;
use crate::geo::{Address, Directory, NodeId};
use crate::metrics::{compute_ground_truth, metric, GroundTruth, Outcome, TraceLog};
use crate::peer_sampling::NewsItem;
use crate::rng::{streams, Seed, SimRng};
use crate::time::SimTime;
use crate::topology::{LinkSpec, Topology};

#[derive(Debug)]
enum EventKind {
    NewsTick(Address),
    ImportantTick(Address),
    NewsRequest {
        from: Address,
        to: Address,
        items: Vec<NewsItem>,
    },
    NewsReply {
        to: Address,
        items: Vec<NewsItem>,
    },
    ImportantRequest {
        from: Address,
        to: Address,
        items: Vec<Address>,
    },
    ImportantReply {
        to: Address,
        items: Vec<Address>,
    },
    Sample,
    Join(usize),
}

#[derive(Debug)]
struct Scheduled {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug)]
struct PendingJoin {
    specs: Vec<LinkSpec>,
    attach_to: Address,
}

/// Event-driven simulation of one topology.
pub struct EventSim {
    cfg: SimConfig,
    topology: Topology,
    dir: Directory,
    truth: GroundTruth,
    states: Vec<NodeState>,
    tracker: CoverageTracker,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    now: SimTime,
    timing_rng: SimRng,
    gossip_rng: SimRng,
    bytes_sent: u64,
    messages: u64,
    trace: TraceLog,
    epoch_start: SimTime,
    stable_at: Option<SimTime>,
    joins: Vec<Option<PendingJoin>>,
    pending_joins: usize,
    violations: Vec<String>,
}

impl EventSim {
    pub fn new(topology: Topology, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        if topology.is_empty() {
            return Err(SimError::EmptyTopology);
        }
        let seed = Seed(cfg.seed);
        let dir = topology.directory();
        let truth = compute_ground_truth(&topology);
        let states = initial_states(&dir, &cfg, &mut seed.stream(streams::WARM_START))?;
        let tracker = CoverageTracker::new(&states, &truth);
        let stable_at = (tracker.missing() == 0).then_some(SimTime::ZERO);
        let mut sim = Self {
            timing_rng: seed.stream(streams::EXCHANGE_TIMING),
            gossip_rng: seed.stream(streams::GOSSIP),
            cfg,
            topology,
            dir,
            truth,
            states,
            tracker,
            queue: BinaryHeap::new(),
            seq: 0,
            now: SimTime::ZERO,
            bytes_sent: 0,
            messages: 0,
            trace: TraceLog::default(),
            epoch_start: SimTime::ZERO,
            stable_at,
            joins: Vec::new(),
            pending_joins: 0,
            violations: Vec::new(),
        };
        for i in 0..sim.states.len() {
            sim.schedule_first_ticks(Address(i as u32));
        }
        sim.schedule(SimTime::ZERO, EventKind::Sample);
        Ok(sim)
    }

    fn schedule(&mut self, time: SimTime, kind: EventKind) {
        debug_assert!(time >= self.now);
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn schedule_first_ticks(&mut self, node: Address) {
        let news = self.timing_rng.random_range(0..self.cfg.news_period_ms);
        let important = self
            .timing_rng
            .random_range(0..self.cfg.important_period_ms);
        self.schedule(self.now + news, EventKind::NewsTick(node));
        self.schedule(self.now + important, EventKind::ImportantTick(node));
    }

    fn important_period(&mut self) -> u32 {
        let mean = self.cfg.important_period_ms;
        self.timing_rng.random_range(mean / 2..=mean + mean / 2)
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn directory(&self) -> &Directory {
        &self.dir
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn into_trace(self) -> TraceLog {
        self.trace
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }

    pub fn messages_sent(&self) -> u64 {
        self.messages
    }

    pub fn nodes_missing(&self) -> usize {
        self.tracker.missing()
    }

    /// Invariant violations seen so far (only collected with `verify`).
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    /// Seconds from the start of the run, or from the latest join, until every
    /// node knew all its candidates.
    pub fn stable_time_s(&self) -> Option<f64> {
        self.stable_at
            .map(|t| (t - self.epoch_start) as f64 / 1000.0)
    }

    /// Runs until stable (when configured and no join is pending) or until
    /// `max_time_ms`, and records the outcome in the trace.
    pub fn run(&mut self) -> Option<f64> {
        let limit = SimTime(self.cfg.max_time_ms);
        while !(self.cfg.stop_when_stable && self.stable_at.is_some() && self.pending_joins == 0) {
            match self.queue.peek() {
                Some(ev) if ev.time <= limit => self.step(),
                _ => break,
            }
        }
        self.trace.outcome = Some(match self.stable_time_s() {
            Some(t) => Outcome::StableAt(t),
            None => Outcome::NotConverged(limit.as_secs_f64()),
        });
        self.stable_time_s()
    }

    /// Processes every event scheduled at or before `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while self.queue.peek().is_some_and(|ev| ev.time <= t) {
            self.step();
        }
        self.now = self.now.max(t);
    }

    /// Adds `specs` as new links at time `at`. Their nodes start with copies of
    /// `attach_to`'s tables.
    pub fn inject_links(
        &mut self,
        specs: &[LinkSpec],
        attach_to: NodeId,
        at: SimTime,
    ) -> Result<(), SimError> {
        let attach = self
            .dir
            .find(attach_to)
            .ok_or(SimError::UnknownAttachNode(attach_to))?;
        let at = at.max(self.now);
        self.joins.push(Some(PendingJoin {
            specs: specs.to_vec(),
            attach_to: attach,
        }));
        self.pending_joins += 1;
        self.schedule(at, EventKind::Join(self.joins.len() - 1));
        Ok(())
    }

    fn send(&mut self, delay_from_now: u32, items: usize, kind: EventKind) {
        self.bytes_sent += exchange_bytes(items) as u64;
        self.messages += 1;
        self.schedule(self.now + delay_from_now, kind);
    }

    fn touched(&mut self, node: Address) {
        self.tracker
            .update(node, &self.states[node.index()], &self.truth);
        if self.tracker.missing() == 0 && self.stable_at.is_none() {
            self.stable_at = Some(self.now);
        }
    }

    fn step(&mut self) {
        let Some(ev) = self.queue.pop() else { return };
        debug_assert!(ev.time >= self.now, "event scheduled in the past");
        self.now = ev.time;
        let now = self.now;
        let latency = self.cfg.latency_ms;
        match ev.kind {
            EventKind::NewsTick(a) => {
                if let Some(target) = self.states[a.index()]
                    .news
                    .select_gossip_target(&mut self.gossip_rng)
                {
                    let items = self.states[a.index()].news.build_exchange_message(a, now);
                    let n = items.len();
                    self.send(
                        latency,
                        n,
                        EventKind::NewsRequest {
                            from: a,
                            to: target,
                            items,
                        },
                    );
                }
                let period = self.cfg.news_period_ms;
                self.schedule(now + period, EventKind::NewsTick(a));
            }
            EventKind::NewsRequest { from, to, items } => {
                let reply = self.states[to.index()].news.build_exchange_message(to, now);
                self.states[to.index()].absorb_news(to, &items, now, &self.dir, &self.cfg);
                self.touched(to);
                let n = reply.len();
                self.send(
                    latency,
                    n,
                    EventKind::NewsReply {
                        to: from,
                        items: reply,
                    },
                );
            }
            EventKind::NewsReply { to, items } => {
                self.states[to.index()].absorb_news(to, &items, now, &self.dir, &self.cfg);
                self.touched(to);
            }
            EventKind::ImportantTick(a) => {
                let state = &self.states[a.index()];
                if let Some(partner) = state
                    .important
                    .select_exchange_partner(&mut self.gossip_rng)
                {
                    let offer = state.important.select_k_for_peer(
                        a,
                        partner,
                        self.cfg.important.exchange_k,
                        &self.dir,
                    );
                    let n = offer.len();
                    self.send(
                        latency,
                        n,
                        EventKind::ImportantRequest {
                            from: a,
                            to: partner,
                            items: offer,
                        },
                    );
                }
                let period = self.important_period();
                self.schedule(now + period, EventKind::ImportantTick(a));
            }
            EventKind::ImportantRequest { from, to, items } => {
                let k = self.cfg.important.exchange_k;
                let state = &mut self.states[to.index()];
                state
                    .important
                    .insert_candidates(to, &items, now, &self.dir, &self.cfg.important);
                let reply = state.important.select_k_for_peer(to, from, k, &self.dir);
                self.touched(to);
                let n = reply.len();
                self.send(
                    latency,
                    n,
                    EventKind::ImportantReply {
                        to: from,
                        items: reply,
                    },
                );
            }
            EventKind::ImportantReply { to, items } => {
                self.states[to.index()].important.insert_candidates(
                    to,
                    &items,
                    now,
                    &self.dir,
                    &self.cfg.important,
                );
                self.touched(to);
            }
            EventKind::Sample => {
                self.sample();
                let interval = self.cfg.sample_interval_ms;
                self.schedule(now + interval, EventKind::Sample);
            }
            EventKind::Join(i) => {
                if let Some(join) = self.joins[i].take() {
                    self.apply_join(join);
                }
                self.pending_joins -= 1;
            }
        }
    }

    fn sample(&mut self) {
        let t = self.now.as_secs_f64();
        let cov = self.tracker.coverage();
        self.trace
            .push(t, metric::COVERAGE_FRACTION, cov.fraction_complete);
        self.trace
            .push(t, metric::NODES_MISSING, cov.nodes_missing as f64);
        self.trace
            .push(t, metric::BYTES_SENT_TOTAL, self.bytes_sent as f64);
        self.trace.push(
            t,
            metric::STABLE_FLAG,
            if cov.nodes_missing == 0 { 1.0 } else { 0.0 },
        );
        if self.cfg.verify {
            let exact = exact_coverage(&self.states, &self.truth);
            if exact != cov {
                self.violations.push(format!(
                    "t={t}: tracked coverage {cov:?} but exact {exact:?}"
                ));
            }
            if let Err(e) = check_states(&self.states, &self.dir, &self.cfg) {
                self.violations.push(format!("t={t}: {e}"));
            }
        }
    }

    fn apply_join(&mut self, join: PendingJoin) {
        let now = self.now;
        let first = self.topology.len();
        self.topology.extend(&join.specs);
        for l in &self.topology.links[first..] {
            self.dir.push(l.transmitter);
            self.dir.push(l.receiver);
        }
        self.truth = compute_ground_truth(&self.topology);
        let attach = join.attach_to;
        let mut news = self.states[attach.index()]
            .news
            .build_exchange_message(attach, now);
        // The copy is taken as of `now`; the attach node's own item is fresh.
        news.truncate(self.cfg.news_table_size + 1);
        let important: Vec<Address> = self.states[attach.index()]
            .important
            .entries()
            .iter()
            .map(|e| e.node)
            .collect();
        for i in 2 * first..self.dir.len() {
            let me = Address(i as u32);
            let mut state = NodeState::new(&self.cfg);
            state.absorb_news(me, &news, now, &self.dir, &self.cfg);
            state
                .important
                .insert_candidates(me, &important, now, &self.dir, &self.cfg.important);
            self.states.push(state);
            self.schedule_first_ticks(me);
        }
        self.tracker = CoverageTracker::new(&self.states, &self.truth);
        self.epoch_start = now;
        self.stable_at = (self.tracker.missing() == 0).then_some(now);
    }
}

/// Builds and runs an event simulation, returning its trace.
pub fn run_event_sim(topology: Topology, cfg: SimConfig) -> Result<TraceLog, SimError> {
    let mut sim = EventSim::new(topology, cfg)?;
    sim.run();
    Ok(sim.into_trace())
}
