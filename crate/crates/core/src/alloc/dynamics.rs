//! Best-response dynamics with incrementally maintained interference.
//!
//! Only the links in the focus set are updated; every other link keeps its
//! initial assignment but still interferes and, when known, still counts in
//! the utility of focus links. Interference at each focus receiver is kept
//! per channel and patched on every update, so one best response costs
//! `O(|C| + |R_i|)` plus `O(F)` to apply, where `F` is the focus size.

use rand::seq::SliceRandom;
use rand::Rng;

use super::game;
use super::{
    channel_gain, necessary_power, Allocation, Assignment, Channel, KnowledgeSet, RadioParams,
    POWER_EPSILON_W, SATISFIED_TOLERANCE,
};
use crate::error::AllocError;
use crate::rng::{streams, Seed};
use crate::topology::Topology;

/// Result of one run of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DynamicsOutcome {
    /// Last iteration in which some link changed, at least 1; equals the
    /// iteration limit when the run did not converge.
    pub iterations: u32,
    pub converged: bool,
    /// Best responses computed.
    pub updates: u64,
}

/// Relative tolerance used when checking the incremental state against a
/// recomputation.
const CHECK_TOLERANCE: f64 = 1e-9;

pub struct Game<'a> {
    topology: &'a Topology,
    params: RadioParams,
    knowledge: &'a KnowledgeSet,
    focus: Vec<usize>,
    allocation: Allocation,
    /// Interference per focus slot and channel, `slot * C + k`.
    interference: Vec<f64>,
    /// Transmitters contributing to each interference entry.
    contributors: Vec<u32>,
    /// Largest value each interference entry has held since the last
    /// rebuild; bounds the rounding left by removed contributions.
    peak: Vec<f64>,
    own_gain: Vec<f64>,
    /// `cross_gain[a * F + b]` is the gain from focus transmitter `a` to
    /// focus receiver `b`.
    cross_gain: Vec<f64>,
    /// Gains from each focus transmitter to its known receivers, parallel to
    /// the knowledge lists.
    known_gain: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    work: u64,
    verify: bool,
    violations: Vec<String>,
}

impl<'a> Game<'a> {
    /// Sets up a game over `focus` starting from `initial`, which must cover
    /// every link of the topology.
    pub fn new(
        topology: &'a Topology,
        params: RadioParams,
        knowledge: &'a KnowledgeSet,
        focus: Vec<usize>,
        initial: Allocation,
    ) -> Result<Self, AllocError> {
        params.validate()?;
        let n = topology.len();
        if initial.len() != n {
            return Err(AllocError::SizeMismatch {
                expected: n,
                found: initial.len(),
            });
        }
        if let Some(&bad) = focus.iter().find(|&&i| i >= n) {
            return Err(AllocError::UnknownLink(bad));
        }
        let f = focus.len();
        let tx = |i: usize| &topology.links[i].transmitter.position;
        let rx = |i: usize| &topology.links[i].receiver.position;
        let own_gain = focus
            .iter()
            .map(|&i| channel_gain(tx(i), rx(i), &params))
            .collect();
        let mut cross_gain = vec![0.0; f * f];
        for (a, &i) in focus.iter().enumerate() {
            for (b, &j) in focus.iter().enumerate() {
                if a != b {
                    cross_gain[a * f + b] = channel_gain(tx(i), rx(j), &params);
                }
            }
        }
        let known_gain = focus
            .iter()
            .map(|&i| {
                knowledge
                    .known(i)
                    .iter()
                    .map(|&j| channel_gain(tx(i), rx(j as usize), &params))
                    .collect()
            })
            .collect();
        let c = usize::from(params.channels);
        let mut game = Self {
            topology,
            params,
            knowledge,
            focus,
            allocation: initial,
            interference: vec![0.0; f * c],
            contributors: vec![0; f * c],
            peak: vec![0.0; f * c],
            own_gain,
            cross_gain,
            known_gain,
            scratch: vec![0.0; c],
            work: 0,
            verify: false,
            violations: Vec::new(),
        };
        game.recompute_interference();
        Ok(game)
    }

    /// Checks every best response and, once per iteration, the tracked
    /// interference, recording violations.
    pub fn with_verify(mut self, verify: bool) -> Self {
        self.verify = verify;
        self
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn into_allocation(self) -> Allocation {
        self.allocation
    }

    pub fn focus(&self) -> &[usize] {
        &self.focus
    }

    pub fn params(&self) -> &RadioParams {
        &self.params
    }

    /// Utility terms evaluated so far, one per channel and one per known
    /// receiver for each best response.
    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    fn channels(&self) -> usize {
        usize::from(self.params.channels)
    }

    /// Rebuilds every interference entry from the allocation.
    pub fn recompute_interference(&mut self) {
        let c = self.channels();
        self.interference.fill(0.0);
        self.contributors.fill(0);
        for (slot, &i) in self.focus.iter().enumerate() {
            let rx = &self.topology.links[i].receiver.position;
            for (j, l) in self.topology.links.iter().enumerate() {
                if j == i {
                    continue;
                }
                let a = self.allocation.get(j);
                if let (Some(k), true) = (a.channel, a.power_w > 0.0) {
                    let e = slot * c + k.index();
                    self.interference[e] +=
                        channel_gain(&l.transmitter.position, rx, &self.params) * a.power_w;
                    self.contributors[e] += 1;
                }
            }
        }
        self.peak.copy_from_slice(&self.interference);
    }

    /// Interference measured at focus slot `slot` on channel `k`.
    pub fn interference(&self, slot: usize, k: Channel) -> f64 {
        self.interference[slot * self.channels() + k.index()]
    }

    /// Utility of every channel for focus slot `slot`, written to `out`.
    fn utilities(&mut self, slot: usize, out: &mut [f64]) {
        let c = self.channels();
        let i = self.focus[slot];
        out.fill(0.0);
        let known = self.knowledge.known(i);
        for (&j, &g) in known.iter().zip(&self.known_gain[slot]) {
            let a = self.allocation.get(j as usize);
            if let (Some(k), true) = (a.channel, a.power_w > 0.0) {
                out[k.index()] += g;
            }
        }
        let beta = self.topology.links[i].beta;
        for (k, u) in out.iter_mut().enumerate() {
            let interference = self.interference[slot * c + k];
            let p_nec = necessary_power(beta, interference, self.own_gain[slot], &self.params);
            *u = -interference - p_nec * *u;
        }
        self.work += (known.len() + c) as u64;
    }

    /// Best channel and capped power for focus slot `slot`.
    pub fn best_response(&mut self, slot: usize) -> (Channel, f64) {
        let mut u = std::mem::take(&mut self.scratch);
        self.utilities(slot, &mut u);
        let mut best = 0;
        for k in 1..u.len() {
            if u[k] > u[best] {
                best = k;
            }
        }
        self.scratch = u;
        let k = Channel(best as u16);
        let i = self.focus[slot];
        let p = necessary_power(
            self.topology.links[i].beta,
            self.interference(slot, k),
            self.own_gain[slot],
            &self.params,
        );
        (k, p.min(self.params.max_power_w))
    }

    /// Moves focus slot `slot` to `next`, patching the interference seen by
    /// every other focus receiver.
    pub fn apply(&mut self, slot: usize, next: Assignment) {
        let c = self.channels();
        let f = self.focus.len();
        let i = self.focus[slot];
        let prev = *self.allocation.get(i);
        if prev == next {
            return;
        }
        let row = &self.cross_gain[slot * f..(slot + 1) * f];
        for (b, &g) in row.iter().enumerate() {
            if b == slot {
                continue;
            }
            if let (Some(k), true) = (prev.channel, prev.power_w > 0.0) {
                let e = b * c + k.index();
                self.contributors[e] -= 1;
                self.interference[e] = if self.contributors[e] == 0 {
                    0.0
                } else {
                    (self.interference[e] - g * prev.power_w).max(0.0)
                };
            }
            if let (Some(k), true) = (next.channel, next.power_w > 0.0) {
                let e = b * c + k.index();
                self.contributors[e] += 1;
                self.interference[e] += g * next.power_w;
                self.peak[e] = self.peak[e].max(self.interference[e]);
            }
        }
        self.allocation.set(i, next);
    }

    /// Best-response dynamics: each iteration visits the focus links in a
    /// fresh random order and applies their best responses one at a time.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> DynamicsOutcome {
        let mut order: Vec<usize> = (0..self.focus.len()).collect();
        let mut last_change = 0;
        let mut updates = 0;
        for iteration in 1..=self.params.max_iterations {
            order.shuffle(rng);
            let mut changed = false;
            for &slot in &order {
                let (k, p) = self.best_response(slot);
                updates += 1;
                let prev = *self.allocation.get(self.focus[slot]);
                if prev.channel != Some(k) || (prev.power_w - p).abs() >= POWER_EPSILON_W {
                    changed = true;
                }
                self.apply(slot, Assignment::on(k, p));
                if self.verify {
                    self.check_response(slot);
                }
            }
            if self.verify {
                self.check_interference();
            }
            if !changed {
                return DynamicsOutcome {
                    iterations: last_change.max(1),
                    converged: true,
                    updates,
                };
            }
            last_change = iteration;
        }
        DynamicsOutcome {
            iterations: self.params.max_iterations,
            converged: false,
            updates,
        }
    }

    /// One pass in random order putting every focus link on a uniformly random
    /// channel at its capped necessary power.
    pub fn random_pass<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut order: Vec<usize> = (0..self.focus.len()).collect();
        order.shuffle(rng);
        for slot in order {
            let k = Channel(rng.random_range(0..self.params.channels));
            self.apply(slot, Assignment::on(k, self.capped_power(slot, k)));
        }
    }

    /// One pass in random order putting every focus link on its least
    /// interfered channel (lowest index on ties) at its capped necessary power.
    pub fn selfish_pass<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut order: Vec<usize> = (0..self.focus.len()).collect();
        order.shuffle(rng);
        for slot in order {
            let mut best = Channel(0);
            for k in self.params.channel_indices().skip(1) {
                if self.interference(slot, k) < self.interference(slot, best) {
                    best = k;
                }
            }
            self.apply(slot, Assignment::on(best, self.capped_power(slot, best)));
        }
    }

    fn capped_power(&self, slot: usize, k: Channel) -> f64 {
        let beta = self.topology.links[self.focus[slot]].beta;
        necessary_power(
            beta,
            self.interference(slot, k),
            self.own_gain[slot],
            &self.params,
        )
        .min(self.params.max_power_w)
    }

    /// SINR of focus slot `slot` on its assigned channel.
    pub fn sinr(&self, slot: usize) -> f64 {
        let a = self.allocation.get(self.focus[slot]);
        match a.channel {
            Some(k) if a.power_w > 0.0 => {
                self.own_gain[slot] * a.power_w / (self.params.noise_w + self.interference(slot, k))
            }
            _ => 0.0,
        }
    }

    pub fn is_satisfied(&self, slot: usize) -> bool {
        self.sinr(slot) >= self.topology.links[self.focus[slot]].beta * (1.0 - SATISFIED_TOLERANCE)
    }

    /// Focus links meeting their SINR requirement.
    pub fn satisfied(&self) -> usize {
        (0..self.focus.len())
            .filter(|&s| self.is_satisfied(s))
            .count()
    }

    /// Checks the assignment `slot` just received against the reference
    /// formulas.
    fn check_response(&mut self, slot: usize) {
        let i = self.focus[slot];
        let a = *self.allocation.get(i);
        if !(a.channel.is_some()
            && a.power_w > 0.0
            && a.power_w <= self.params.max_power_w * (1.0 + 1e-12))
        {
            self.violations.push(format!(
                "link {i}: not on exactly one channel within the power cap: {a:?}"
            ));
        }
        let (topology, knowledge, params) = (self.topology, self.knowledge, self.params);
        let utility =
            |k| game::allocation_utility(topology, &self.allocation, knowledge, i, k, &params);
        if let Some(chosen) = a.channel {
            let u_star = utility(chosen);
            for k in params.channel_indices() {
                let u = utility(k);
                if u > u_star + CHECK_TOLERANCE * u.abs().max(u_star.abs()) {
                    self.violations.push(format!(
                        "link {i}: channel {k} utility {u} beats chosen {chosen} at {u_star}"
                    ));
                }
            }
        }
    }

    /// Checks every tracked interference entry against a fresh sum.
    fn check_interference(&mut self) {
        let (topology, params) = (self.topology, self.params);
        for (b, &j) in self.focus.iter().enumerate() {
            for k in params.channel_indices() {
                let fresh = game::measured_interference(topology, &self.allocation, j, k, &params);
                let kept = self.interference(b, k);
                let scale = fresh
                    .max(kept)
                    .max(self.peak[b * self.channels() + k.index()]);
                if (fresh - kept).abs() > CHECK_TOLERANCE * scale + 1e-30 {
                    self.violations.push(format!(
                        "link {j} channel {k}: tracked interference {kept} but actual {fresh}"
                    ));
                }
            }
        }
    }
}

/// Runs the proposed dynamics over `focus` from `initial` and returns the
/// final allocation. The visiting order is drawn from the
/// `allocation-order` stream of `seed`.
pub fn run_best_response_dynamics(
    topology: &Topology,
    initial: Allocation,
    knowledge: &KnowledgeSet,
    focus: Vec<usize>,
    params: &RadioParams,
    seed: u64,
) -> Result<(Allocation, DynamicsOutcome), AllocError> {
    let mut game = Game::new(topology, *params, knowledge, focus, initial)?;
    let outcome = game.run(&mut Seed(seed).stream(streams::ALLOCATION_ORDER));
    Ok((game.into_allocation(), outcome))
}

/// Random channel for every focus link.
pub fn random_baseline(
    topology: &Topology,
    initial: Allocation,
    focus: Vec<usize>,
    params: &RadioParams,
    seed: u64,
) -> Result<Allocation, AllocError> {
    let none = KnowledgeSet::empty(0);
    let mut game = Game::new(topology, *params, &none, focus, initial)?;
    game.random_pass(&mut Seed(seed).stream(streams::ALLOCATION_ORDER));
    Ok(game.into_allocation())
}

/// Least interfered channel for every focus link.
pub fn selfish_baseline(
    topology: &Topology,
    initial: Allocation,
    focus: Vec<usize>,
    params: &RadioParams,
    seed: u64,
) -> Result<Allocation, AllocError> {
    let none = KnowledgeSet::empty(0);
    let mut game = Game::new(topology, *params, &none, focus, initial)?;
    game.selfish_pass(&mut Seed(seed).stream(streams::ALLOCATION_ORDER));
    Ok(game.into_allocation())
}
