//! Important-nodes table and exchange.
//!
//! Every node scores the nodes it hears about with [`utility`](crate::geo::utility)
//! and keeps the most useful ones. Entries above the candidate threshold are
//! all treated as equally important and kept in order of freshness; the rest
//! are ranked by utility and are the first to go when the table is full. When
//! even the candidates no longer fit, the table grows by `K` entries at a time
//! up to a hard maximum.
//!
//! Periodically a node picks a high-utility partner and the two swap the `K`
//! entries each one thinks are most useful to the other.

use std::cell::RefCell;
use std::cmp::Ordering;

use rand::Rng;

use crate::geo::{Address, Directory};
use crate::peer_sampling::ITEM_BYTES;
use crate::time::SimTime;

/// Partners are drawn from this many top entries unless more candidates are
/// known.
pub const PARTNER_POOL: usize = 10;

thread_local! {
    static SCRATCH: RefCell<Vec<ImportantEntry>> = const { RefCell::new(Vec::new()) };
}

/// Capacity policy and exchange size for important-node tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImportantParams {
    /// Entries sent per exchange (`K`).
    pub exchange_k: usize,
    /// Initial table capacity (`M`).
    pub base_m: usize,
    /// Largest capacity growth may reach.
    pub max_m: usize,
    /// Grow by `K` when candidates overflow; otherwise evict the oldest.
    pub dynamic: bool,
}

impl ImportantParams {
    /// Growing tables starting at `M = K`.
    pub fn dynamic(k: usize, max_m: usize) -> Self {
        Self {
            exchange_k: k,
            base_m: k,
            max_m,
            dynamic: true,
        }
    }

    /// Tables fixed at `m` entries.
    pub fn fixed(k: usize, m: usize) -> Self {
        Self {
            exchange_k: k,
            base_m: m,
            max_m: m,
            dynamic: false,
        }
    }
}

impl Default for ImportantParams {
    fn default() -> Self {
        Self::dynamic(100, 600)
    }
}

/// A scored table entry. `utility` is relative to the table's owner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportantEntry {
    pub node: Address,
    pub last_seen: SimTime,
    pub utility: f64,
}

impl ImportantEntry {
    #[inline]
    pub fn is_candidate(&self) -> bool {
        self.utility > 1.0
    }
}

/// Utility-sorted table of important nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportantTable {
    entries: Vec<ImportantEntry>,
    capacity: u32,
    candidates: u32,
}

impl ImportantTable {
    pub fn new(params: &ImportantParams) -> Self {
        Self {
            entries: Vec::new(),
            capacity: params.base_m as u32,
            candidates: 0,
        }
    }

    pub fn entries(&self) -> &[ImportantEntry] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity as usize
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries with utility above 1. They form the table's prefix.
    pub fn candidate_count(&self) -> usize {
        self.candidates as usize
    }

    /// The entries with utility above 1.
    pub fn candidates(&self) -> &[ImportantEntry] {
        &self.entries[..self.candidates as usize]
    }

    pub fn contains(&self, node: Address) -> bool {
        self.entries.iter().any(|e| e.node == node)
    }

    /// Scores `found` against `owner`, merges it into the table and shrinks
    /// back to capacity.
    ///
    /// Known nodes get `last_seen = now` and are rescored from the directory.
    pub fn insert_candidates(
        &mut self,
        owner: Address,
        found: &[Address],
        now: SimTime,
        dir: &Directory,
        params: &ImportantParams,
    ) {
        if found.is_empty() {
            return;
        }
        SCRATCH.with(|scratch| {
            let mut buf = scratch.borrow_mut();
            buf.clear();
            buf.extend_from_slice(&self.entries);
            let owner_desc = dir.get(owner);
            for &node in found {
                if node != owner {
                    buf.push(ImportantEntry {
                        node,
                        last_seen: now,
                        utility: crate::geo::utility(owner_desc, dir.get(node)),
                    });
                }
            }
            if buf.len() == self.entries.len() {
                return;
            }
            // Fresh sightings carry `now`, which is never older than a stored
            // entry, so keeping the newest per node keeps the refreshed copy.
            buf.sort_unstable_by(|a, b| {
                a.node
                    .cmp(&b.node)
                    .then(b.last_seen.cmp(&a.last_seen))
                    .then_with(|| cmp_f64(b.utility, a.utility))
            });
            buf.dedup_by_key(|e| e.node);
            buf.sort_unstable_by(|a, b| table_order(a, b, dir));
            let candidates = buf.iter().take_while(|e| e.is_candidate()).count();
            let (keep, capacity) = self.shrunk_size(buf.len(), candidates, params);
            self.capacity = capacity as u32;
            self.candidates = candidates.min(keep) as u32;
            self.entries.clear();
            if self.entries.capacity() < keep {
                self.entries.reserve_exact(capacity);
            }
            self.entries.extend_from_slice(&buf[..keep]);
        });
    }

    /// Entries to keep and the resulting capacity for a merged, sorted list of
    /// `len` entries whose first `candidates` are above the threshold.
    ///
    /// Non-candidates go first, lowest utility first. If the candidates alone
    /// overflow, the table grows by `K` while allowed; past that the oldest
    /// candidates (the tail of the candidate prefix) are dropped.
    fn shrunk_size(
        &self,
        len: usize,
        candidates: usize,
        params: &ImportantParams,
    ) -> (usize, usize) {
        let mut cap = self.capacity as usize;
        if len <= cap {
            return (len, cap);
        }
        if candidates <= cap {
            return (cap, cap);
        }
        if params.dynamic {
            while cap < candidates && cap + params.exchange_k <= params.max_m {
                cap += params.exchange_k;
            }
        }
        (candidates.min(cap), cap)
    }

    /// Picks an exchange partner: uniformly among the candidates when there
    /// are more than [`PARTNER_POOL`] of them, otherwise among the top
    /// [`PARTNER_POOL`] entries.
    pub fn select_exchange_partner<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Address> {
        let pool = self.partner_pool();
        if pool.is_empty() {
            None
        } else {
            Some(pool[rng.random_range(0..pool.len())].node)
        }
    }

    /// The entries [`select_exchange_partner`](Self::select_exchange_partner)
    /// draws from.
    pub fn partner_pool(&self) -> &[ImportantEntry] {
        let n = if self.candidates as usize > PARTNER_POOL {
            self.candidates as usize
        } else {
            self.entries.len().min(PARTNER_POOL)
        };
        &self.entries[..n]
    }

    /// The `k` nodes most useful to `peer`, drawn from the table plus `owner`
    /// itself and excluding `peer`, best first.
    pub fn select_k_for_peer(
        &self,
        owner: Address,
        peer: Address,
        k: usize,
        dir: &Directory,
    ) -> Vec<Address> {
        let peer_desc = dir.get(peer);
        let mut scored: Vec<(f64, Address)> = self
            .entries
            .iter()
            .map(|e| e.node)
            .chain(std::iter::once(owner))
            .filter(|&a| a != peer)
            .map(|a| (crate::geo::utility(peer_desc, dir.get(a)), a))
            .collect();
        let by_score = |a: &(f64, Address), b: &(f64, Address)| {
            cmp_f64(b.0, a.0).then_with(|| dir.id(a.1).cmp(&dir.id(b.1)))
        };
        if scored.len() > k && k > 0 {
            scored.select_nth_unstable_by(k - 1, by_score);
        }
        scored.truncate(k);
        scored.sort_unstable_by(by_score);
        scored.into_iter().map(|(_, a)| a).collect()
    }

    /// Replaces this table with a copy of `other` rescored for `owner`,
    /// keeping this table's capacity rules.
    pub fn seed_from(
        &mut self,
        owner: Address,
        other: &ImportantTable,
        now: SimTime,
        dir: &Directory,
        params: &ImportantParams,
    ) {
        let nodes: Vec<Address> = other.entries.iter().map(|e| e.node).collect();
        self.insert_candidates(owner, &nodes, now, dir, params);
    }

    /// Releases spare allocation.
    pub fn compact(&mut self) {
        self.entries.shrink_to_fit();
    }

    /// Checks ordering, capacity law, cached utilities and owner exclusion.
    pub fn check_invariants(
        &self,
        owner: Address,
        dir: &Directory,
        params: &ImportantParams,
    ) -> Result<(), String> {
        let cap = self.capacity as usize;
        if self.entries.len() > cap {
            return Err(format!(
                "{} entries exceed capacity {cap}",
                self.entries.len()
            ));
        }
        if cap < params.base_m
            || !(cap - params.base_m).is_multiple_of(params.exchange_k.max(1))
            || cap > params.max_m.max(params.base_m)
        {
            return Err(format!("capacity {cap} breaks the growth law"));
        }
        for w in self.entries.windows(2) {
            if table_order(&w[0], &w[1], dir) != Ordering::Less {
                return Err(format!(
                    "entries out of order: {:?} before {:?}",
                    w[0], w[1]
                ));
            }
        }
        let owner_desc = dir.get(owner);
        for e in &self.entries {
            if e.node == owner {
                return Err("table holds its owner".into());
            }
            let u = crate::geo::utility(owner_desc, dir.get(e.node));
            if u != e.utility {
                return Err(format!(
                    "stale utility for {:?}: cached {} actual {u}",
                    e.node, e.utility
                ));
            }
        }
        let expect = self.entries.iter().filter(|e| e.is_candidate()).count();
        if expect != self.candidates as usize {
            return Err(format!(
                "candidate count {} but {expect} entries above 1",
                self.candidates
            ));
        }
        Ok(())
    }
}

/// Candidates first, newest first among them; then the rest by descending
/// utility. Remaining ties go to the older entry, then the lower node id.
pub fn table_order(a: &ImportantEntry, b: &ImportantEntry, dir: &Directory) -> Ordering {
    match (a.is_candidate(), b.is_candidate()) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (true, true) => b
            .last_seen
            .cmp(&a.last_seen)
            .then_with(|| dir.id(a.node).cmp(&dir.id(b.node))),
        (false, false) => cmp_f64(b.utility, a.utility)
            .then(a.last_seen.cmp(&b.last_seen))
            .then_with(|| dir.id(a.node).cmp(&dir.id(b.node))),
    }
}

#[inline]
fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Bytes on the wire for an exchange carrying `items` entries in total.
pub fn exchange_bytes(items: usize) -> usize {
    items * ITEM_BYTES
}

/// Bytes a node sends per update interval: a full news table plus `K`
/// important entries.
pub fn per_interval_bytes(news_table: usize, exchange_k: usize) -> usize {
    (news_table + exchange_k) * ITEM_BYTES
}

/// Worst-case table memory: two news tables during a merge, a full important
/// table and one incoming `K` list.
pub fn table_memory_bytes(news_table: usize, max_m: usize, exchange_k: usize) -> usize {
    (2 * news_table + max_m + exchange_k) * ITEM_BYTES
}

/// A node's view during an exchange.
pub struct Peer<'a> {
    pub address: Address,
    pub table: &'a mut ImportantTable,
}

/// Runs one complete exchange synchronously and returns the bytes moved.
///
/// The responder merges the initiator's list before computing its reply.
pub fn important_exchange(
    initiator: Peer<'_>,
    responder: Peer<'_>,
    now: SimTime,
    dir: &Directory,
    params: &ImportantParams,
) -> usize {
    let offer = initiator.table.select_k_for_peer(
        initiator.address,
        responder.address,
        params.exchange_k,
        dir,
    );
    responder
        .table
        .insert_candidates(responder.address, &offer, now, dir, params);
    let reply = responder.table.select_k_for_peer(
        responder.address,
        initiator.address,
        params.exchange_k,
        dir,
    );
    initiator
        .table
        .insert_candidates(initiator.address, &reply, now, dir, params);
    exchange_bytes(offer.len() + reply.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{NodeDescriptor, NodeId, Position};
    use rand::SeedableRng;

    /// Owner at the origin with range 1, others on the x axis with range 1,
    /// so utility is `4 / x^2`.
    fn line(xs: &[f64]) -> Directory {
        let mut nodes = vec![NodeDescriptor {
            id: NodeId(1000),
            position: Position::new(0.0, 0.0),
            coordination_range: 1.0,
            address: Address(0),
        }];
        for (i, &x) in xs.iter().enumerate() {
            nodes.push(NodeDescriptor {
                id: NodeId(i as u64 + 1),
                position: Position::new(x, 0.0),
                coordination_range: 1.0,
                address: Address(i as u32 + 1),
            });
        }
        Directory::from_descriptors(nodes)
    }

    /// Distance giving utility `u` against the owner.
    fn at(u: f64) -> f64 {
        (4.0 / u).sqrt()
    }

    fn utilities(t: &ImportantTable) -> Vec<f64> {
        t.entries()
            .iter()
            .map(|e| (e.utility * 1e9).round() / 1e9)
            .collect()
    }

    #[test]
    fn insert_below_capacity_keeps_all() {
        let d = line(&[at(2.0), at(0.5), at(0.1)]);
        let p = ImportantParams::fixed(2, 4);
        let mut t = ImportantTable::new(&p);
        t.insert_candidates(
            Address(0),
            &[Address(1), Address(2), Address(3)],
            SimTime(0),
            &d,
            &p,
        );
        assert_eq!(utilities(&t), vec![2.0, 0.5, 0.1]);
        t.check_invariants(Address(0), &d, &p).unwrap();
    }

    #[test]
    fn lowest_non_candidate_evicted() {
        let d = line(&[at(0.4), at(0.3), at(3.0)]);
        let p = ImportantParams::fixed(2, 2);
        let mut t = ImportantTable::new(&p);
        t.insert_candidates(Address(0), &[Address(1), Address(2)], SimTime(0), &d, &p);
        t.insert_candidates(Address(0), &[Address(3)], SimTime(1), &d, &p);
        assert_eq!(utilities(&t), vec![3.0, 0.4]);
    }

    #[test]
    fn capacity_grows_by_k() {
        let d = line(&[at(2.0), at(1.5), at(1.2)]);
        let p = ImportantParams::dynamic(2, 600);
        let mut t = ImportantTable::new(&p);
        t.insert_candidates(Address(0), &[Address(1), Address(2)], SimTime(0), &d, &p);
        assert_eq!(t.capacity(), 2);
        t.insert_candidates(Address(0), &[Address(3)], SimTime(1), &d, &p);
        assert_eq!(t.capacity(), 4);
        assert_eq!(t.len(), 3);
        assert_eq!(t.candidate_count(), 3);
        t.check_invariants(Address(0), &d, &p).unwrap();
    }

    #[test]
    fn fixed_capacity_evicts_oldest_candidate() {
        let d = line(&[at(2.0), at(1.5), at(1.2)]);
        let p = ImportantParams::fixed(2, 2);
        let mut t = ImportantTable::new(&p);
        t.insert_candidates(Address(0), &[Address(1)], SimTime(0), &d, &p);
        t.insert_candidates(Address(0), &[Address(2)], SimTime(5), &d, &p);
        t.insert_candidates(Address(0), &[Address(3)], SimTime(9), &d, &p);
        let nodes: Vec<_> = t.entries().iter().map(|e| e.node).collect();
        assert_eq!(nodes, vec![Address(3), Address(2)]);
    }

    #[test]
    fn growth_stops_at_max_then_evicts_oldest() {
        let d = line(&[at(9.0), at(8.0), at(7.0), at(6.0), at(5.0)]);
        let p = ImportantParams {
            exchange_k: 2,
            base_m: 2,
            max_m: 4,
            dynamic: true,
        };
        let mut t = ImportantTable::new(&p);
        for (i, a) in (1..=5).enumerate() {
            t.insert_candidates(Address(0), &[Address(a)], SimTime(i as u32), &d, &p);
        }
        assert_eq!(t.capacity(), 4);
        let nodes: Vec<_> = t.entries().iter().map(|e| e.node).collect();
        assert_eq!(nodes, vec![Address(5), Address(4), Address(3), Address(2)]);
        t.check_invariants(Address(0), &d, &p).unwrap();
    }

    #[test]
    fn resighting_refreshes_last_seen() {
        let d = line(&[at(2.0), at(3.0)]);
        let p = ImportantParams::default();
        let mut t = ImportantTable::new(&p);
        t.insert_candidates(Address(0), &[Address(1), Address(2)], SimTime(0), &d, &p);
        t.insert_candidates(Address(0), &[Address(1)], SimTime(7), &d, &p);
        assert_eq!(t.len(), 2);
        assert_eq!(t.entries()[0].node, Address(1));
        assert_eq!(t.entries()[0].last_seen, SimTime(7));
        // The owner is never stored.
        t.insert_candidates(Address(0), &[Address(0)], SimTime(8), &d, &p);
        assert!(!t.contains(Address(0)));
    }

    #[test]
    fn partner_from_top_ten_or_all_candidates() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = ImportantParams::default();

        let d = line(&[at(0.5), at(0.4), at(0.3)]);
        let mut t = ImportantTable::new(&p);
        assert_eq!(t.select_exchange_partner(&mut rng), None);
        t.insert_candidates(
            Address(0),
            &[Address(1), Address(2), Address(3)],
            SimTime(0),
            &d,
            &p,
        );
        let mut seen = [false; 4];
        for _ in 0..200 {
            seen[t.select_exchange_partner(&mut rng).unwrap().index()] = true;
        }
        assert_eq!(seen, [false, true, true, true]);

        let mut xs: Vec<f64> = (0..25).map(|i| 0.5 + 0.01 * f64::from(i)).collect();
        xs.extend((0..10).map(|i| 10.0 + f64::from(i)));
        let d = line(&xs);
        let mut t = ImportantTable::new(&p);
        let all: Vec<Address> = (1..=35).map(Address).collect();
        t.insert_candidates(Address(0), &all, SimTime(0), &d, &p);
        assert_eq!(t.candidate_count(), 25);
        for _ in 0..2000 {
            let a = t.select_exchange_partner(&mut rng).unwrap();
            assert!(a.0 <= 25);
        }
    }

    #[test]
    fn select_k_prefers_peer_relative_utility() {
        // peer (1) at x=10; X (2) at x=11, Y (3) at x=40; owner far at 0.
        let d = line(&[10.0, 11.0, 40.0]);
        let p = ImportantParams::default();
        let mut t = ImportantTable::new(&p);
        t.insert_candidates(Address(0), &[Address(2), Address(3)], SimTime(0), &d, &p);
        assert_eq!(
            t.select_k_for_peer(Address(0), Address(1), 1, &d),
            vec![Address(2)]
        );
        assert_eq!(
            t.select_k_for_peer(Address(0), Address(1), 10, &d),
            vec![Address(2), Address(0), Address(3)]
        );
        let empty = ImportantTable::new(&p);
        assert_eq!(
            empty.select_k_for_peer(Address(0), Address(1), 100, &d),
            vec![Address(0)]
        );
    }

    #[test]
    fn isolated_pair_exchange() {
        let d = line(&[1.5]);
        let p = ImportantParams::default();
        let mut a = ImportantTable::new(&p);
        let mut b = ImportantTable::new(&p);
        let bytes = important_exchange(
            Peer {
                address: Address(0),
                table: &mut a,
            },
            Peer {
                address: Address(1),
                table: &mut b,
            },
            SimTime(0),
            &d,
            &p,
        );
        assert_eq!(bytes, 2 * ITEM_BYTES);
        assert_eq!(a.entries()[0].node, Address(1));
        assert_eq!(b.entries()[0].node, Address(0));
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn byte_accounting() {
        assert_eq!(exchange_bytes(200), 11_200);
        assert_eq!(per_interval_bytes(40, 100), 7840);
        assert_eq!(table_memory_bytes(40, 600, 100), 43_680);
    }
}
