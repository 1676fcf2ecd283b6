//! Independent reference computations shared by the integration tests.
//!
//! Everything here is written from the formulas directly, without calling the
//! library routines it is used to check.

#![allow(dead_code)]

use radiodisco::alloc::{Allocation, Channel, RadioParams};
use radiodisco::geo::{Address, NodeDescriptor, NodeId, Position};
use radiodisco::topology::{LinkSpec, Rect, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Overlap utility computed as the squared ratio of range sum to clamped
/// distance.
pub fn utility_oracle(a: &NodeDescriptor, b: &NodeDescriptor) -> f64 {
    let dx = a.position.x - b.position.x;
    let dy = a.position.y - b.position.y;
    let dz = a.position.z - b.position.z;
    let d = (dx * dx + dy * dy + dz * dz).sqrt().max(1.0);
    let r = (a.coordination_range + b.coordination_range) / d;
    r * r
}

/// Pairwise candidate lists by exhaustive comparison, each sorted by address.
pub fn brute_force_truth(nodes: &[NodeDescriptor]) -> Vec<Vec<Address>> {
    let mut out = vec![Vec::new(); nodes.len()];
    for (i, a) in nodes.iter().enumerate() {
        for (j, b) in nodes.iter().enumerate() {
            if i != j && utility_oracle(a, b) > 1.0 {
                out[i].push(b.address);
            }
        }
    }
    out
}

/// Top-`k` of `pool` plus `owner`, scored against `peer`, by full sort.
pub fn top_k_oracle(
    nodes: &[NodeDescriptor],
    pool: &[Address],
    owner: Address,
    peer: Address,
    k: usize,
) -> Vec<Address> {
    let mut all: Vec<Address> = pool.to_vec();
    all.push(owner);
    all.retain(|&a| a != peer);
    all.sort();
    all.dedup();
    let p = &nodes[peer.index()];
    let mut scored: Vec<(f64, NodeId, Address)> = all
        .into_iter()
        .map(|a| (utility_oracle(p, &nodes[a.index()]), nodes[a.index()].id, a))
        .collect();
    scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    scored.into_iter().take(k).map(|(_, _, a)| a).collect()
}

/// `max(d, 1)^-3` by explicit multiplication.
pub fn gain_oracle(a: &Position, b: &Position) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let d = (dx * dx + dy * dy).sqrt().max(1.0);
    1.0 / (d * d * d)
}

/// Interference at link `i`'s receiver on channel `k` from every other
/// transmitter.
pub fn interference_oracle(
    t: &Topology,
    channels: &[Option<u16>],
    powers: &[f64],
    i: usize,
    k: u16,
) -> f64 {
    let rx = t.links[i].receiver.position;
    let mut sum = 0.0;
    for (j, l) in t.links.iter().enumerate() {
        if j != i && channels[j] == Some(k) {
            sum += gain_oracle(&l.transmitter.position, &rx) * powers[j];
        }
    }
    sum
}

pub fn sinr_oracle(
    t: &Topology,
    channels: &[Option<u16>],
    powers: &[f64],
    i: usize,
    noise: f64,
) -> f64 {
    let Some(k) = channels[i] else { return 0.0 };
    let l = &t.links[i];
    let g = gain_oracle(&l.transmitter.position, &l.receiver.position);
    g * powers[i] / (noise + interference_oracle(t, channels, powers, i, k))
}

/// Utility of link `i` choosing channel `k` with every other link held at
/// `channels`/`powers` and knowledge of the receivers in `known`.
pub fn utility_of_choice(
    t: &Topology,
    channels: &[Option<u16>],
    powers: &[f64],
    known: &[usize],
    i: usize,
    k: u16,
    params: &RadioParams,
) -> f64 {
    let l = &t.links[i];
    let interference = interference_oracle(t, channels, powers, i, k);
    let own = gain_oracle(&l.transmitter.position, &l.receiver.position);
    let p_nec = l.beta * (params.noise_w + interference) / own;
    let caused: f64 = known
        .iter()
        .filter(|&&j| j != i && channels[j] == Some(k))
        .map(|&j| gain_oracle(&l.transmitter.position, &t.links[j].receiver.position))
        .sum();
    -interference - p_nec * caused
}

/// Powers induced by a channel assignment: the fixed point of
/// `p_i = min(beta_i (N0 + I_i) / g_ii, p_max)` reached from zero power.
pub fn induced_powers(t: &Topology, channels: &[Option<u16>], params: &RadioParams) -> Vec<f64> {
    let n = t.len();
    let mut p = vec![0.0; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let Some(k) = channels[i] else { continue };
            let l = &t.links[i];
            let own = gain_oracle(&l.transmitter.position, &l.receiver.position);
            let need = l.beta * (params.noise_w + interference_oracle(t, channels, &p, i, k)) / own;
            next[i] = need.min(params.max_power_w);
            delta = delta.max((next[i] - p[i]).abs());
        }
        p = next;
        if delta < 1e-16 {
            break;
        }
    }
    p
}

/// All channel assignments of `n` links over `c` channels in which no link
/// gains by switching alone, with powers induced by each assignment.
/// Utilities are compared with a relative slack of `1e-9`.
pub fn nash_assignments(t: &Topology, known: &[Vec<usize>], params: &RadioParams) -> Vec<Vec<u16>> {
    let n = t.len();
    let c = params.channels;
    let total = (c as usize).pow(n as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut x = code;
        let assign: Vec<u16> = (0..n)
            .map(|_| {
                let v = (x % c as usize) as u16;
                x /= c as usize;
                v
            })
            .collect();
        let channels: Vec<Option<u16>> = assign.iter().map(|&k| Some(k)).collect();
        let powers = induced_powers(t, &channels, params);
        let stable = (0..n).all(|i| {
            let here = utility_of_choice(t, &channels, &powers, &known[i], i, assign[i], params);
            (0..c).all(|k| {
                let there = utility_of_choice(t, &channels, &powers, &known[i], i, k, params);
                there <= here + 1e-9 * here.abs().max(1e-30)
            })
        });
        if stable {
            out.push(assign);
        }
    }
    out
}

pub fn channels_of(a: &Allocation) -> Vec<Option<u16>> {
    a.channel_numbers()
}

pub fn powers_of(a: &Allocation) -> Vec<f64> {
    a.assignments().iter().map(|x| x.power_w).collect()
}

pub fn channel(k: u16) -> Channel {
    Channel(k)
}

/// `n` links with transmitters uniform in a `side` square and receivers
/// within `max_len` of them.
pub fn random_links(n: usize, side: f64, max_len: f64, seed: u64) -> Topology {
    let mut r = rng(seed);
    let specs: Vec<LinkSpec> = (0..n)
        .map(|i| {
            let tx = Position::new(r.random_range(0.0..side), r.random_range(0.0..side));
            let a = r.random_range(0.0..std::f64::consts::TAU);
            let d = r.random_range(1.0..max_len);
            let rx = Position::new(tx.x + d * a.cos(), tx.y + d * a.sin());
            LinkSpec::new(i as u32, tx, rx, r.random_range(1.0..=10.0))
        })
        .collect();
    let bounds = Rect::new(-max_len, -max_len, side + max_len, side + max_len);
    Topology::from_specs(&specs, bounds, seed, "test")
}

/// Random descriptors with ranges in `[1, max_range]` in a `side` square.
pub fn random_nodes(n: usize, side: f64, max_range: f64, seed: u64) -> Vec<NodeDescriptor> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| NodeDescriptor {
            id: NodeId(r.random()),
            position: Position::new(r.random_range(0.0..side), r.random_range(0.0..side)),
            coordination_range: r.random_range(1.0..=max_range),
            address: Address(i as u32),
        })
        .collect()
}
