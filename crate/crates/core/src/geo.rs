//! Node identity, positions and the coordination-overlap utility.
//!
//! Two nodes are *candidates* for each other when their circular coordination
//! areas overlap. The utility `(cr_a + cr_b)^2 / d^2` exceeds 1 exactly in that
//! case and grows as the nodes get closer, which is what the discovery tables
//! sort on.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;

/// Squared distances below this are clamped, so coincident nodes still have a
/// finite utility.
pub const MIN_DISTANCE_SQ: f64 = 1.0;

/// 64-bit opaque overlay identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Simulated endpoint handle.
///
/// In a simulation run this is also the node's slot in the [`Directory`], so
/// tables and messages carry addresses rather than full descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub u32);

impl Address {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    /// A point on the ground plane (`z = 0`).
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub const fn new_3d(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// What a node advertises about itself in the overlay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDescriptor {
    pub id: NodeId,
    pub position: Position,
    /// Radius of the coordination area in meters, always positive.
    pub coordination_range: f64,
    pub address: Address,
}

/// Coordination-overlap utility of two nodes.
///
/// Symmetric in its arguments and strictly greater than 1 when the
/// coordination areas overlap.
#[inline]
pub fn utility(a: &NodeDescriptor, b: &NodeDescriptor) -> f64 {
    utility_raw(
        &a.position,
        a.coordination_range,
        &b.position,
        b.coordination_range,
    )
}

#[inline]
pub(crate) fn utility_raw(pa: &Position, cra: f64, pb: &Position, crb: f64) -> f64 {
    let d2 = pa.distance_sq(pb).max(MIN_DISTANCE_SQ);
    let sum = cra + crb;
    sum * sum / d2
}

/// `true` iff the coordination areas of `a` and `b` overlap (utility > 1).
#[inline]
pub fn is_candidate(a: &NodeDescriptor, b: &NodeDescriptor) -> bool {
    utility(a, b) > 1.0
}

/// Every descriptor known to one simulation run, indexed by [`Address`].
#[derive(Debug, Clone, Default)]
pub struct Directory {
    nodes: Vec<NodeDescriptor>,
    // Ids again, densely packed: sort tie-breaks hit this far more often than
    // any other descriptor field.
    ids: Vec<NodeId>,
}

impl Directory {
    /// Builds a directory from descriptors whose addresses are `0..n` in order.
    ///
    /// # Panics
    /// If an address does not match its slot.
    pub fn from_descriptors(nodes: Vec<NodeDescriptor>) -> Self {
        for (slot, d) in nodes.iter().enumerate() {
            assert_eq!(d.address.index(), slot, "descriptor address out of order");
        }
        let ids = nodes.iter().map(|d| d.id).collect();
        Self { nodes, ids }
    }

    /// Appends a descriptor; its address must be the next free slot.
    pub fn push(&mut self, descriptor: NodeDescriptor) {
        assert_eq!(descriptor.address.index(), self.nodes.len());
        self.ids.push(descriptor.id);
        self.nodes.push(descriptor);
    }

    /// Replaces the descriptor stored at `descriptor.address` (re-registration).
    pub fn update(&mut self, descriptor: NodeDescriptor) {
        self.ids[descriptor.address.index()] = descriptor.id;
        self.nodes[descriptor.address.index()] = descriptor;
    }

    #[inline]
    pub fn get(&self, address: Address) -> &NodeDescriptor {
        &self.nodes[address.index()]
    }

    #[inline]
    pub fn id(&self, address: Address) -> NodeId {
        self.ids[address.index()]
    }

    #[inline]
    pub fn utility(&self, a: Address, b: Address) -> f64 {
        utility(self.get(a), self.get(b))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn descriptors(&self) -> &[NodeDescriptor] {
        &self.nodes
    }

    /// Looks an address up by overlay id. Linear scan.
    pub fn find(&self, id: NodeId) -> Option<Address> {
        self.ids
            .iter()
            .position(|&x| x == id)
            .map(|i| Address(i as u32))
    }
}

/// Draws uniformly random node ids, redrawing on collision.
#[derive(Debug, Default, Clone)]
pub struct IdAllocator {
    used: HashSet<u64>,
}

impl IdAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an id that is already taken.
    pub fn reserve(&mut self, id: NodeId) -> bool {
        self.used.insert(id.0)
    }

    pub fn allocate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> NodeId {
        loop {
            let id = rng.random::<u64>();
            if self.used.insert(id) {
                return NodeId(id);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u64, x: f64, y: f64, cr: f64) -> NodeDescriptor {
        NodeDescriptor {
            id: NodeId(id),
            position: Position::new(x, y),
            coordination_range: cr,
            address: Address(id as u32),
        }
    }

    #[test]
    fn utility_values() {
        let a = node(1, 0.0, 0.0, 50.0);
        assert_eq!(utility(&a, &node(2, 100.0, 0.0, 50.0)), 1.0);
        assert_eq!(utility(&a, &node(2, 200.0, 0.0, 50.0)), 0.25);
        assert_eq!(utility(&a, &node(2, 50.0, 0.0, 50.0)), 4.0);
    }

    #[test]
    fn coincident_nodes_are_clamped() {
        let a = node(1, 3.0, 4.0, 30.0);
        let b = node(2, 3.0, 4.0, 70.0);
        assert_eq!(utility(&a, &b), 10_000.0);
        // Still clamped just below one meter.
        let c = node(3, 3.5, 4.0, 70.0);
        assert_eq!(utility(&a, &c), 10_000.0);
    }

    #[test]
    fn candidate_boundary_is_exclusive() {
        let a = node(1, 0.0, 0.0, 50.0);
        assert!(!is_candidate(&a, &node(2, 100.0, 0.0, 50.0)));
        assert!(is_candidate(&a, &node(2, 99.0, 0.0, 50.0)));
        assert!(!is_candidate(&a, &node(2, 101.0, 0.0, 50.0)));
    }

    #[test]
    fn utility_uses_z() {
        let a = NodeDescriptor {
            position: Position::new_3d(0.0, 0.0, 10.0),
            ..node(1, 0.0, 0.0, 5.0)
        };
        let b = node(2, 0.0, 0.0, 5.0);
        assert_eq!(utility(&a, &b), 1.0);
    }

    #[test]
    fn id_allocator_never_repeats() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut ids = IdAllocator::new();
        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            assert!(seen.insert(ids.allocate(&mut rng)));
        }
    }

    #[test]
    fn directory_lookup() {
        let dir = Directory::from_descriptors(vec![node(0, 0.0, 0.0, 1.0), node(1, 0.5, 0.0, 1.0)]);
        assert_eq!(dir.find(NodeId(1)), Some(Address(1)));
        assert_eq!(dir.find(NodeId(9)), None);
        assert_eq!(dir.utility(Address(0), Address(1)), 4.0);
    }
}
