//! Newscast-style peer sampling.
//!
//! Each node keeps the `N` freshest news items it has heard of. Periodically it
//! picks a random entry, sends its table together with a freshly stamped item
//! about itself, and both sides merge what they received.

use std::cell::RefCell;
use std::cmp::Ordering;

use rand::Rng;

use crate::geo::{Address, Directory};
use crate::time::SimTime;

/// Bytes accounted for one serialized news or important-node item.
pub const ITEM_BYTES: usize = 56;

/// Default table size.
pub const DEFAULT_TABLE_SIZE: usize = 40;

thread_local! {
    static SCRATCH: RefCell<Vec<NewsItem>> = const { RefCell::new(Vec::new()) };
}

/// One gossiped sighting of a node.
///
/// The descriptor itself lives in the run's [`Directory`]; the item only
/// carries the address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NewsItem {
    pub node: Address,
    pub timestamp: SimTime,
}

impl NewsItem {
    pub fn new(node: Address, timestamp: SimTime) -> Self {
        Self { node, timestamp }
    }
}

/// The freshest `capacity` items a node knows, newest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsTable {
    items: Vec<NewsItem>,
    capacity: usize,
}

impl NewsTable {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "news table capacity must be positive");
        Self {
            items: Vec::new(),
            capacity,
        }
    }

    pub fn items(&self) -> &[NewsItem] {
        &self.items
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, node: Address) -> bool {
        self.items.iter().any(|i| i.node == node)
    }

    /// Table contents plus a fresh item for `owner` stamped `now`, owner first.
    pub fn build_exchange_message(&self, owner: Address, now: SimTime) -> Vec<NewsItem> {
        let mut msg = Vec::with_capacity(self.items.len() + 1);
        msg.push(NewsItem::new(owner, now));
        msg.extend_from_slice(&self.items);
        msg
    }

    /// Uniformly random entry, `None` when the table is empty.
    pub fn select_gossip_target<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Address> {
        if self.items.is_empty() {
            None
        } else {
            Some(self.items[rng.random_range(0..self.items.len())].node)
        }
    }

    /// Merges `incoming` into the table.
    ///
    /// Keeps the freshest item per node, drops items about `owner`, orders
    /// newest first (ties by ascending node id) and truncates to capacity.
    pub fn merge(&mut self, owner: Address, incoming: &[NewsItem], dir: &Directory) {
        if incoming.is_empty() {
            return;
        }
        SCRATCH.with(|scratch| {
            let mut buf = scratch.borrow_mut();
            buf.clear();
            buf.extend_from_slice(&self.items);
            buf.extend(incoming.iter().filter(|i| i.node != owner));
            buf.sort_unstable_by(|a, b| a.node.cmp(&b.node).then(b.timestamp.cmp(&a.timestamp)));
            buf.dedup_by_key(|i| i.node);
            buf.sort_unstable_by(|a, b| freshness_order(a, b, dir));
            buf.truncate(self.capacity);
            self.items.clear();
            if self.items.capacity() < buf.len() {
                self.items.reserve_exact(self.capacity);
            }
            self.items.extend_from_slice(&buf);
        });
    }

    /// Replaces the contents, applying the usual merge rules.
    pub fn reset_to(&mut self, owner: Address, items: &[NewsItem], dir: &Directory) {
        self.items.clear();
        self.merge(owner, items, dir);
    }

    /// Checks the table invariants, returning a description of the first
    /// violation.
    pub fn check_invariants(&self, owner: Address, dir: &Directory) -> Result<(), String> {
        if self.items.len() > self.capacity {
            return Err(format!(
                "{} items exceed capacity {}",
                self.items.len(),
                self.capacity
            ));
        }
        for w in self.items.windows(2) {
            if freshness_order(&w[0], &w[1], dir) != Ordering::Less {
                return Err(format!("items out of order: {:?} before {:?}", w[0], w[1]));
            }
        }
        if self.contains(owner) {
            return Err("table holds its owner".into());
        }
        Ok(())
    }
}

fn freshness_order(a: &NewsItem, b: &NewsItem, dir: &Directory) -> Ordering {
    b.timestamp
        .cmp(&a.timestamp)
        .then_with(|| dir.id(a.node).cmp(&dir.id(b.node)))
}

/// Free-function form of [`NewsTable::merge`] returning a new table.
pub fn merge_news(
    table: &NewsTable,
    owner: Address,
    incoming: &[NewsItem],
    dir: &Directory,
) -> NewsTable {
    let mut t = table.clone();
    t.merge(owner, incoming, dir);
    t
}
