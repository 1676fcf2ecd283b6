//! Lockstep cycle engine.
//!
//! Each iteration every node runs one news exchange and then one
//! important-nodes exchange. An exchange round has two phases:
//!
//! * **A** (parallel): every node reads its own tables and builds its request.
//! * **B** (sequential): requests are grouped by target and applied in
//!   ascending initiator id order. Each reply is computed against the target's
//!   state at that point; replies are then applied to the initiators in the
//!   same order.
//!
//! Random choices are keyed by `(iteration, node)` so phase A gives the same
//! result however rayon schedules it.

use rayon::prelude::*;

use super::{check_states, exact_coverage, initial_states, CoverageTracker, NodeState, SimConfig};
use crate::discovery::exchange_bytes;
use crate::error::SimError;
use crate::geo::{Address, Directory};
use crate::metrics::{compute_ground_truth, metric, GroundTruth, Outcome, TraceLog};
use crate::peer_sampling::NewsItem;
use crate::rng::{streams, KeyedDraw, Seed};
use crate::time::SimTime;
use crate::topology::Topology;

pub struct CycleSim {
    cfg: SimConfig,
    dir: Directory,
    truth: GroundTruth,
    states: Vec<NodeState>,
    tracker: CoverageTracker,
    gossip: KeyedDraw,
    partner: KeyedDraw,
    iteration: u32,
    bytes_sent: u64,
    trace: TraceLog,
    violations: Vec<String>,
}

impl CycleSim {
    pub fn new(topology: &Topology, cfg: SimConfig) -> Result<Self, SimError> {
        let truth = compute_ground_truth(topology);
        Self::with_truth(topology, truth, cfg)
    }

    /// Like [`new`](Self::new) with a ground truth computed elsewhere.
    pub fn with_truth(
        topology: &Topology,
        truth: GroundTruth,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        if topology.is_empty() {
            return Err(SimError::EmptyTopology);
        }
        let seed = Seed(cfg.seed);
        let dir = topology.directory();
        let states = initial_states(&dir, &cfg, &mut seed.stream(streams::WARM_START))?;
        let tracker = CoverageTracker::new(&states, &truth);
        Ok(Self {
            gossip: KeyedDraw::new(seed, streams::GOSSIP),
            partner: KeyedDraw::new(seed, streams::PARTNER),
            cfg,
            dir,
            truth,
            states,
            tracker,
            iteration: 0,
            bytes_sent: 0,
            trace: TraceLog::default(),
            violations: Vec::new(),
        })
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn directory(&self) -> &Directory {
        &self.dir
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn nodes_missing(&self) -> usize {
        self.tracker.missing()
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn into_trace(self) -> TraceLog {
        self.trace
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    /// Runs until every node knows all its candidates or `max_iterations` is
    /// reached. Returns the first iteration at which the state was stable.
    pub fn run(&mut self) -> Option<u32> {
        if self.iteration == 0 {
            self.record();
        }
        let mut stable = (self.tracker.missing() == 0).then_some(self.iteration);
        while stable.is_none() && self.iteration < self.cfg.max_iterations {
            self.step();
            if self.tracker.missing() == 0 {
                stable = Some(self.iteration);
            }
        }
        self.trace.outcome = Some(match stable {
            Some(i) => Outcome::StableAfter(i),
            None => Outcome::NotConverged(f64::from(self.iteration)),
        });
        stable
    }

    /// One full iteration: a news round, then an important round.
    pub fn step(&mut self) {
        self.iteration += 1;
        let now = SimTime(self.iteration.saturating_mul(self.cfg.news_period_ms));
        self.news_round(now);
        self.important_round(now);
        self.record();
    }

    fn record(&mut self) {
        let t = f64::from(self.iteration);
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
                    "iteration {}: tracked coverage {cov:?} but exact {exact:?}",
                    self.iteration
                ));
            }
            if let Err(e) = check_states(&self.states, &self.dir, &self.cfg) {
                self.violations
                    .push(format!("iteration {}: {e}", self.iteration));
            }
        }
    }

    /// Sorts requests by target, then by initiator id.
    fn order<T>(&self, requests: &mut [(Address, Address, T)]) {
        let dir = &self.dir;
        requests.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| dir.id(a.1).cmp(&dir.id(b.1))));
    }

    fn news_round(&mut self, now: SimTime) {
        let it = u64::from(self.iteration);
        let gossip = self.gossip;
        let mut requests: Vec<(Address, Address, Vec<NewsItem>)> = self
            .states
            .par_iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let items = s.news.items();
                if items.is_empty() {
                    return None;
                }
                let target = items[gossip.index(it, i as u64, items.len())].node;
                let me = Address(i as u32);
                Some((target, me, s.news.build_exchange_message(me, now)))
            })
            .collect();
        self.order(&mut requests);

        let mut replies = Vec::with_capacity(requests.len());
        for (to, from, items) in requests {
            let target = &mut self.states[to.index()];
            let reply = target.news.build_exchange_message(to, now);
            target.absorb_news(to, &items, now, &self.dir, &self.cfg);
            self.tracker
                .update(to, &self.states[to.index()], &self.truth);
            self.bytes_sent += exchange_bytes(items.len() + reply.len()) as u64;
            replies.push((from, reply));
        }
        for (to, items) in replies {
            self.states[to.index()].absorb_news(to, &items, now, &self.dir, &self.cfg);
            self.tracker
                .update(to, &self.states[to.index()], &self.truth);
        }
    }

    fn important_round(&mut self, now: SimTime) {
        let it = u64::from(self.iteration);
        let partner = self.partner;
        let k = self.cfg.important.exchange_k;
        let dir = &self.dir;
        let mut requests: Vec<(Address, Address, Vec<Address>)> = self
            .states
            .par_iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let pool = s.important.partner_pool();
                if pool.is_empty() {
                    return None;
                }
                let target = pool[partner.index(it, i as u64, pool.len())].node;
                let me = Address(i as u32);
                Some((
                    target,
                    me,
                    s.important.select_k_for_peer(me, target, k, dir),
                ))
            })
            .collect();
        self.order(&mut requests);

        let mut replies = Vec::with_capacity(requests.len());
        for (to, from, items) in requests {
            let target = &mut self.states[to.index()];
            target
                .important
                .insert_candidates(to, &items, now, &self.dir, &self.cfg.important);
            let reply = target.important.select_k_for_peer(to, from, k, &self.dir);
            self.tracker
                .update(to, &self.states[to.index()], &self.truth);
            self.bytes_sent += exchange_bytes(items.len() + reply.len()) as u64;
            replies.push((from, reply));
        }
        for (to, items) in replies {
            self.states[to.index()].important.insert_candidates(
                to,
                &items,
                now,
                &self.dir,
                &self.cfg.important,
            );
            self.tracker
                .update(to, &self.states[to.index()], &self.truth);
        }
    }
}

/// Iterations a cold-started topology needs until every node knows all its
/// candidates, or `None` if `max_iterations` is reached first.
pub fn run_cycle_sim(topology: &Topology, cfg: SimConfig) -> Result<Option<u32>, SimError> {
    let mut sim = CycleSim::new(topology, cfg)?;
    Ok(sim.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Position;
    use crate::topology::{gen_random_pairs, LinkSpec, ReceiverPlacement, Rect};

    fn cold() -> SimConfig {
        SimConfig {
            warm_start: false,
            verify: true,
            ..SimConfig::default()
        }
    }

    #[test]
    fn pair_converges_within_two_iterations() {
        let t = Topology::from_specs(
            &[LinkSpec::new(
                0,
                Position::new(0.0, 0.0),
                Position::new(5.0, 0.0),
                2.0,
            )],
            Rect::square(10.0),
            0,
            "pair",
        );
        let it = run_cycle_sim(&t, cold()).unwrap().unwrap();
        assert!(it <= 2, "{it}");
    }

    #[test]
    fn cold_start_converges_and_matches_truth() {
        let t = gen_random_pairs(
            1000,
            Rect::square(1500.0),
            50.0,
            ReceiverPlacement::Square,
            3,
        )
        .unwrap();
        let mut sim = CycleSim::new(&t, SimConfig { seed: 4, ..cold() }).unwrap();
        let it = sim.run().expect("converges");
        assert!(it <= 100, "{it}");
        assert_eq!(exact_coverage(sim.states(), sim.truth()).nodes_missing, 0);
        assert!(sim.violations().is_empty(), "{:?}", sim.violations());
    }

    #[test]
    fn deterministic() {
        let t =
            gen_random_pairs(300, Rect::square(800.0), 50.0, ReceiverPlacement::Square, 6).unwrap();
        let mut a = CycleSim::new(&t, SimConfig { seed: 1, ..cold() }).unwrap();
        let mut b = CycleSim::new(&t, SimConfig { seed: 1, ..cold() }).unwrap();
        assert_eq!(a.run(), b.run());
        assert_eq!(a.states(), b.states());
        assert_eq!(a.trace(), b.trace());
    }
}
