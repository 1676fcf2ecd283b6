//! SINR-driven channel and power allocation.
//!
//! Every link picks one channel and transmits on it with the power its SINR
//! requirement needs, capped at `max_power_w`. The proposed rule trades the
//! interference measured at the link's own receiver against the interference
//! it would cause at receivers it knows about. [`game`] holds direct
//! reference formulas; [`dynamics`] runs the best-response process with
//! incrementally maintained interference.

pub mod dynamics;
pub mod game;

use std::fmt;
use std::io::Write;

use crate::error::AllocError;
use crate::geo::{Address, Position};
use crate::rng::KeyedDraw;
use crate::topology::{link_of, Role, Topology};

pub use dynamics::{
    random_baseline, run_best_response_dynamics, selfish_baseline, DynamicsOutcome, Game,
};
pub use game::{
    allocation_utility, best_response, is_satisfied, measured_interference, necessary_power,
    satisfied_links, sinr,
};

/// Relative slack on the SINR requirement when counting satisfied links, so
/// a link transmitting exactly its necessary power is not lost to rounding.
pub const SATISFIED_TOLERANCE: f64 = 1e-6;

/// Power change below which a link counts as unchanged between iterations.
pub const POWER_EPSILON_W: f64 = 1e-9;

/// Radio model and game parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub channels: u16,
    pub max_power_w: f64,
    pub noise_w: f64,
    pub path_loss_exponent: f64,
    /// Distances below this are treated as this distance in the gain model.
    pub min_gain_distance: f64,
    pub max_iterations: u32,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            channels: 10,
            max_power_w: 0.1,
            noise_w: 1e-8,
            path_loss_exponent: 3.0,
            min_gain_distance: 1.0,
            max_iterations: 20,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), AllocError> {
        let bad = |m: &str| Err(AllocError::Params(m.into()));
        if self.channels == 0 {
            return bad("at least one channel is required");
        }
        if !(self.max_power_w > 0.0 && self.max_power_w.is_finite()) {
            return bad("maximum power must be positive");
        }
        if !(self.noise_w > 0.0 && self.noise_w.is_finite()) {
            return bad("noise power must be positive");
        }
        if self.path_loss_exponent.is_nan()
            || self.path_loss_exponent <= 0.0
            || self.min_gain_distance.is_nan()
            || self.min_gain_distance <= 0.0
        {
            return bad("path loss exponent and minimum distance must be positive");
        }
        if self.max_iterations == 0 {
            return bad("at least one iteration is required");
        }
        Ok(())
    }

    pub fn channel_indices(&self) -> impl Iterator<Item = Channel> {
        (0..self.channels).map(Channel)
    }
}

/// Distance-based channel gain, the same on every channel.
pub fn channel_gain(a: &Position, b: &Position, params: &RadioParams) -> f64 {
    a.distance(b)
        .max(params.min_gain_distance)
        .powf(-params.path_loss_exponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel(pub u16);

impl Channel {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// What one link transmits: a single channel at positive power, or nothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub channel: Option<Channel>,
    pub power_w: f64,
}

impl Assignment {
    pub const IDLE: Self = Self {
        channel: None,
        power_w: 0.0,
    };

    pub fn on(channel: Channel, power_w: f64) -> Self {
        Self {
            channel: Some(channel),
            power_w,
        }
    }

    /// Power on channel `k`: zero unless `k` is the assigned channel.
    pub fn power_on(&self, k: Channel) -> f64 {
        if self.channel == Some(k) {
            self.power_w
        } else {
            0.0
        }
    }

    pub fn is_active(&self) -> bool {
        self.channel.is_some() && self.power_w > 0.0
    }
}

/// Per-link assignments, indexed like `Topology::links`.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    links: Vec<Assignment>,
}

impl Allocation {
    pub fn idle(n_links: usize) -> Self {
        Self {
            links: vec![Assignment::IDLE; n_links],
        }
    }

    /// Every link on a random channel at full power. Link `i`'s channel depends
    /// only on `draw` and `i`, so appending links leaves earlier ones alone.
    pub fn random_full_power(n_links: usize, params: &RadioParams, draw: &KeyedDraw) -> Self {
        Self {
            links: (0..n_links)
                .map(|i| {
                    let k = draw.index(i as u64, 0, usize::from(params.channels));
                    Assignment::on(Channel(k as u16), params.max_power_w)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn get(&self, link: usize) -> &Assignment {
        &self.links[link]
    }

    pub fn set(&mut self, link: usize, assignment: Assignment) {
        self.links[link] = assignment;
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.links
    }

    /// Extends with assignments for newly added links.
    pub fn extend_from(&mut self, other: &Allocation) {
        if other.len() > self.len() {
            let start = self.len();
            self.links.extend_from_slice(&other.links[start..]);
        }
    }

    /// Channel numbers, for change counting.
    pub fn channel_numbers(&self) -> Vec<Option<u16>> {
        self.links.iter().map(|a| a.channel.map(|c| c.0)).collect()
    }
}

/// Receivers each transmitter knows about, as link indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeSet {
    known: Vec<Vec<u32>>,
}

impl KnowledgeSet {
    pub fn empty(n_links: usize) -> Self {
        Self {
            known: vec![Vec::new(); n_links],
        }
    }

    /// Builds the set from the nodes each transmitter knows. Transmitters in
    /// the list and the link's own receiver are skipped.
    pub fn from_known_nodes<F, I>(n_links: usize, mut known_by: F) -> Self
    where
        F: FnMut(Address) -> I,
        I: IntoIterator<Item = Address>,
    {
        let known = (0..n_links)
            .map(|i| {
                let mut rx: Vec<u32> = known_by(crate::topology::transmitter_address(i))
                    .into_iter()
                    .filter_map(|a| match link_of(a) {
                        (j, Role::Receiver) if j != i && j < n_links => Some(j as u32),
                        _ => None,
                    })
                    .collect();
                rx.sort_unstable();
                rx.dedup();
                rx
            })
            .collect();
        Self { known }
    }

    /// Every receiver that is a true candidate of each transmitter.
    pub fn full(topology: &Topology, truth: &crate::metrics::GroundTruth) -> Self {
        Self::from_known_nodes(topology.len(), |a| truth.candidates(a).iter().copied())
    }

    /// Every other receiver in the topology.
    pub fn everyone(n_links: usize) -> Self {
        Self {
            known: (0..n_links)
                .map(|i| (0..n_links as u32).filter(|&j| j as usize != i).collect())
                .collect(),
        }
    }

    pub fn from_lists(known: Vec<Vec<u32>>) -> Self {
        Self { known }
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    /// Link indices of the receivers known by link `i`'s transmitter.
    pub fn known(&self, link: usize) -> &[u32] {
        self.known.get(link).map_or(&[], Vec::as_slice)
    }

    pub fn total(&self) -> usize {
        self.known.iter().map(Vec::len).sum()
    }
}

/// Writes `link_id,channel,power_w,sinr,satisfied` for the given links.
pub fn write_snapshot<W: Write>(
    topology: &Topology,
    allocation: &Allocation,
    links: &[usize],
    params: &RadioParams,
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["link_id", "channel", "power_w", "sinr", "satisfied"])?;
    for &i in links {
        let a = allocation.get(i);
        let (channel, s) = match a.channel {
            Some(k) => (k.to_string(), sinr(topology, allocation, i, k, params)),
            None => (String::new(), 0.0),
        };
        w.write_record([
            topology.links[i].link_id.to_string(),
            channel,
            a.power_w.to_string(),
            s.to_string(),
            u8::from(is_satisfied(topology, allocation, i, params)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    #[test]
    fn gain_examples() {
        let p = RadioParams::default();
        let o = Position::new(0.0, 0.0);
        assert!((channel_gain(&o, &Position::new(100.0, 0.0), &p) - 1e-6).abs() < 1e-18);
        assert!((channel_gain(&o, &Position::new(10.0, 0.0), &p) - 1e-3).abs() < 1e-15);
        assert_eq!(channel_gain(&o, &Position::new(0.2, 0.0), &p), 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(RadioParams::default().validate().is_ok());
        let p = RadioParams {
            channels: 0,
            ..RadioParams::default()
        };
        assert!(p.validate().is_err());
        let p = RadioParams {
            noise_w: 0.0,
            ..RadioParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn random_allocation_is_stable_under_growth() {
        let p = RadioParams::default();
        let d = KeyedDraw::new(Seed(3), "init");
        let a = Allocation::random_full_power(10, &p, &d);
        let b = Allocation::random_full_power(15, &p, &d);
        assert_eq!(a.assignments(), &b.assignments()[..10]);
        assert!(b
            .assignments()
            .iter()
            .all(|x| x.power_w == 0.1 && x.channel.unwrap().0 < 10));
    }

    #[test]
    fn knowledge_keeps_foreign_receivers_only() {
        let k = KnowledgeSet::from_known_nodes(3, |a| match a.0 {
            0 => vec![Address(1), Address(2), Address(3), Address(5), Address(5)],
            _ => vec![],
        });
        assert_eq!(k.known(0), &[1, 2]);
        assert!(k.known(1).is_empty());
        assert_eq!(KnowledgeSet::everyone(3).known(1), &[0, 2]);
    }
}
