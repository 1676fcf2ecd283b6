//! Ground-truth radio topologies.
//!
//! A topology is a set of transmitter/receiver pairs. Both ends of a link get
//! the same coordination range, twice the link length, so every node's
//! coordination area covers its partner with room to spare.

mod generate;
mod io;

use std::collections::HashSet;

use crate::error::TopologyError;
use crate::geo::{Address, Directory, IdAllocator, NodeDescriptor, NodeId, Position};
use crate::rng::{streams, Seed};

pub use generate::{
    gen_from_population_grid, gen_link_specs, gen_random_pairs, households, ReceiverPlacement,
};
pub use io::{
    load_population_grid, load_topology, parse_population_grid, parse_topology,
    save_population_grid, save_topology, write_topology,
};

/// Smallest coordination range given to a link, in meters.
pub const MIN_COORDINATION_RANGE: f64 = 1.0;

/// Range of the per-link SINR requirement.
pub const BETA_RANGE: (f64, f64) = (1.0, 10.0);

/// Axis-aligned rectangle in meters, edges inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Square `[0, side] x [0, side]`.
    pub fn square(side: f64) -> Self {
        Self::new(0.0, 0.0, side, side)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn is_valid(&self) -> bool {
        [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite())
            && self.max_x >= self.min_x
            && self.max_y >= self.min_y
    }
}

/// Geometry and requirement of one link, before identities are assigned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub link_id: u32,
    pub transmitter: Position,
    pub receiver: Position,
    pub coordination_range: f64,
    pub beta: f64,
}

impl LinkSpec {
    /// A link whose coordination range follows from its length.
    pub fn new(link_id: u32, transmitter: Position, receiver: Position, beta: f64) -> Self {
        Self {
            link_id,
            transmitter,
            receiver,
            coordination_range: coordination_range_for(transmitter.distance(&receiver)),
            beta,
        }
    }
}

/// Coordination range for a link of length `distance`.
pub fn coordination_range_for(distance: f64) -> f64 {
    (2.0 * distance).max(MIN_COORDINATION_RANGE)
}

/// A transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub link_id: u32,
    pub transmitter: NodeDescriptor,
    pub receiver: NodeDescriptor,
    /// Linear SINR requirement.
    pub beta: f64,
}

impl Link {
    pub fn length(&self) -> f64 {
        self.transmitter.position.distance(&self.receiver.position)
    }

    pub fn spec(&self) -> LinkSpec {
        LinkSpec {
            link_id: self.link_id,
            transmitter: self.transmitter.position,
            receiver: self.receiver.position,
            coordination_range: self.transmitter.coordination_range,
            beta: self.beta,
        }
    }
}

/// Role of a node within its link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Transmitter,
    Receiver,
}

/// Address of the transmitter of the `index`-th link.
#[inline]
pub fn transmitter_address(index: usize) -> Address {
    Address((2 * index) as u32)
}

/// Address of the receiver of the `index`-th link.
#[inline]
pub fn receiver_address(index: usize) -> Address {
    Address((2 * index + 1) as u32)
}

/// Link index and role of the node at `address`.
#[inline]
pub fn link_of(address: Address) -> (usize, Role) {
    let i = address.index();
    (
        i / 2,
        if i.is_multiple_of(2) {
            Role::Transmitter
        } else {
            Role::Receiver
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub links: Vec<Link>,
    pub bounds: Rect,
    pub seed: u64,
    pub provenance: String,
}

impl Topology {
    /// Builds a topology, assigning node ids and addresses in link order.
    ///
    /// Ids are drawn from the `node-ids` stream of `seed`, so the same specs
    /// and seed always give the same ids.
    pub fn from_specs(
        specs: &[LinkSpec],
        bounds: Rect,
        seed: u64,
        provenance: impl Into<String>,
    ) -> Self {
        let mut topo = Self {
            links: Vec::with_capacity(specs.len()),
            bounds,
            seed,
            provenance: provenance.into(),
        };
        topo.extend(specs);
        topo
    }

    /// Appends links, giving their nodes fresh ids that do not collide with
    /// existing ones.
    pub fn extend(&mut self, specs: &[LinkSpec]) {
        let mut ids = IdAllocator::new();
        for l in &self.links {
            ids.reserve(l.transmitter.id);
            ids.reserve(l.receiver.id);
        }
        let seed = Seed(self.seed);
        for spec in specs {
            let index = self.links.len();
            let tx = transmitter_address(index);
            let rx = receiver_address(index);
            let tx_id = ids.allocate(&mut seed.indexed(streams::NODE_IDS, u64::from(tx.0)));
            let rx_id = ids.allocate(&mut seed.indexed(streams::NODE_IDS, u64::from(rx.0)));
            self.links.push(Link {
                link_id: spec.link_id,
                transmitter: NodeDescriptor {
                    id: tx_id,
                    position: spec.transmitter,
                    coordination_range: spec.coordination_range,
                    address: tx,
                },
                receiver: NodeDescriptor {
                    id: rx_id,
                    position: spec.receiver,
                    coordination_range: spec.coordination_range,
                    address: rx,
                },
                beta: spec.beta,
            });
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn node_count(&self) -> usize {
        2 * self.links.len()
    }

    /// All nodes, transmitter then receiver for each link.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeDescriptor> + '_ {
        self.links
            .iter()
            .flat_map(|l| [&l.transmitter, &l.receiver])
    }

    pub fn directory(&self) -> Directory {
        Directory::from_descriptors(self.nodes().copied().collect())
    }

    pub fn node(&self, address: Address) -> &NodeDescriptor {
        let (i, role) = link_of(address);
        match role {
            Role::Transmitter => &self.links[i].transmitter,
            Role::Receiver => &self.links[i].receiver,
        }
    }

    pub fn find_node(&self, id: NodeId) -> Option<Address> {
        self.nodes().find(|d| d.id == id).map(|d| d.address)
    }

    pub fn max_coordination_range(&self) -> f64 {
        self.links
            .iter()
            .map(|l| {
                l.transmitter
                    .coordination_range
                    .max(l.receiver.coordination_range)
            })
            .fold(0.0, f64::max)
    }

    /// Indices of the links whose transmitter lies in `area`.
    pub fn links_in(&self, area: &Rect) -> Vec<usize> {
        (0..self.links.len())
            .filter(|&i| area.contains(&self.links[i].transmitter.position))
            .collect()
    }

    /// Checks every link invariant, reporting the first offending link.
    pub fn validate(&self) -> Result<(), TopologyError> {
        if self.links.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut link_ids = HashSet::with_capacity(self.links.len());
        let mut node_ids = HashSet::with_capacity(self.node_count());
        for (i, l) in self.links.iter().enumerate() {
            let bad = |reason: String| TopologyError::Invariant {
                link_id: u64::from(l.link_id),
                reason,
            };
            if !link_ids.insert(l.link_id) {
                return Err(bad("duplicate link_id".into()));
            }
            for (node, addr) in [
                (&l.transmitter, transmitter_address(i)),
                (&l.receiver, receiver_address(i)),
            ] {
                if !node.position.is_finite() {
                    return Err(bad("non-finite position".into()));
                }
                if !self.bounds.contains(&node.position) {
                    return Err(bad(format!(
                        "node at ({}, {}) outside bounds",
                        node.position.x, node.position.y
                    )));
                }
                if node.coordination_range.is_nan() || node.coordination_range <= 0.0 {
                    return Err(bad("coordination range must be positive".into()));
                }
                if !node_ids.insert(node.id) {
                    return Err(bad(format!("duplicate node id {}", node.id)));
                }
                if node.address != addr {
                    return Err(bad("node address does not match link position".into()));
                }
            }
            let d = l.length();
            let cr = l.transmitter.coordination_range;
            if l.receiver.coordination_range != cr {
                return Err(bad("endpoints have different coordination ranges".into()));
            }
            if d > cr / 2.0 * (1.0 + 1e-9) {
                return Err(bad(format!(
                    "receiver {d} m from transmitter, beyond half the coordination range {cr} m"
                )));
            }
            let expected = coordination_range_for(d);
            if (cr - expected).abs() > 1e-6 * expected {
                return Err(bad(format!(
                    "coordination range {cr} m, expected {expected} m for a {d} m link"
                )));
            }
            if !(l.beta >= BETA_RANGE.0 && l.beta <= BETA_RANGE.1) {
                return Err(bad(format!("beta {} outside [1, 10]", l.beta)));
            }
        }
        Ok(())
    }
}

/// Population counts on a square cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    /// Cell edge in meters.
    pub cell_size: f64,
    pub cells: Vec<PopulationCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationCell {
    pub cell_x: i64,
    pub cell_y: i64,
    pub population: u32,
}

impl PopulationGrid {
    pub const DEFAULT_CELL_SIZE: f64 = 100.0;

    pub fn total_population(&self) -> u64 {
        self.cells.iter().map(|c| u64::from(c.population)).sum()
    }

    /// Rectangle covering every listed cell.
    pub fn bounds(&self) -> Option<Rect> {
        let min_x = self.cells.iter().map(|c| c.cell_x).min()?;
        let min_y = self.cells.iter().map(|c| c.cell_y).min()?;
        let max_x = self.cells.iter().map(|c| c.cell_x).max()?;
        let max_y = self.cells.iter().map(|c| c.cell_y).max()?;
        let s = self.cell_size;
        Some(Rect::new(
            min_x as f64 * s,
            min_y as f64 * s,
            (max_x + 1) as f64 * s,
            (max_y + 1) as f64 * s,
        ))
    }

    /// Rectangle of the cell at `(cell_x, cell_y)`.
    pub fn cell_rect(&self, cell_x: i64, cell_y: i64) -> Rect {
        let s = self.cell_size;
        Rect::new(
            cell_x as f64 * s,
            cell_y as f64 * s,
            (cell_x + 1) as f64 * s,
            (cell_y + 1) as f64 * s,
        )
    }
}
