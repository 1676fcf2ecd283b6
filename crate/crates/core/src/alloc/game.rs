//! Direct evaluation of the allocation game against the whole topology.
//!
//! These functions recompute every sum from scratch. They are the reference
//! the incremental [`Game`](super::Game) is checked against.

use super::{channel_gain, Allocation, Channel, KnowledgeSet, RadioParams, SATISFIED_TOLERANCE};
use crate::topology::Topology;

/// Interference at link `link`'s receiver on channel `k` from every other
/// transmitter, excluding noise.
pub fn measured_interference(
    topology: &Topology,
    allocation: &Allocation,
    link: usize,
    k: Channel,
    params: &RadioParams,
) -> f64 {
    let rx = &topology.links[link].receiver.position;
    topology
        .links
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != link)
        .map(|(j, l)| {
            let p = allocation.get(j).power_on(k);
            if p > 0.0 {
                channel_gain(&l.transmitter.position, rx, params) * p
            } else {
                0.0
            }
        })
        .sum()
}

/// SINR of `link` on channel `k` given the current allocation.
pub fn sinr(
    topology: &Topology,
    allocation: &Allocation,
    link: usize,
    k: Channel,
    params: &RadioParams,
) -> f64 {
    let l = &topology.links[link];
    let p = allocation.get(link).power_on(k);
    if p == 0.0 {
        return 0.0;
    }
    let g = channel_gain(&l.transmitter.position, &l.receiver.position, params);
    g * p / (params.noise_w + measured_interference(topology, allocation, link, k, params))
}

/// Power needed to reach `beta` over `interference_w` plus noise. Not capped.
pub fn necessary_power(beta: f64, interference_w: f64, own_gain: f64, params: &RadioParams) -> f64 {
    beta * (params.noise_w + interference_w) / own_gain
}

/// Utility of `link` moving to channel `k`: minus the interference it
/// measures there, minus the interference its necessary power would cause at
/// the known receivers currently on `k`.
pub fn allocation_utility(
    topology: &Topology,
    allocation: &Allocation,
    knowledge: &KnowledgeSet,
    link: usize,
    k: Channel,
    params: &RadioParams,
) -> f64 {
    let l = &topology.links[link];
    let interference = measured_interference(topology, allocation, link, k, params);
    let own_gain = channel_gain(&l.transmitter.position, &l.receiver.position, params);
    let p_nec = necessary_power(l.beta, interference, own_gain, params);
    let caused: f64 = knowledge
        .known(link)
        .iter()
        .map(|&j| j as usize)
        .filter(|&j| {
            let a = allocation.get(j);
            a.channel == Some(k) && a.power_w > 0.0
        })
        .map(|j| {
            channel_gain(
                &l.transmitter.position,
                &topology.links[j].receiver.position,
                params,
            )
        })
        .sum();
    -interference - p_nec * caused
}

/// Channel maximizing [`allocation_utility`] (lowest index on ties) and the
/// capped necessary power on it.
pub fn best_response(
    topology: &Topology,
    allocation: &Allocation,
    knowledge: &KnowledgeSet,
    link: usize,
    params: &RadioParams,
) -> (Channel, f64) {
    let mut best = (Channel(0), f64::NEG_INFINITY);
    for k in params.channel_indices() {
        let u = allocation_utility(topology, allocation, knowledge, link, k, params);
        if u > best.1 {
            best = (k, u);
        }
    }
    let l = &topology.links[link];
    let own_gain = channel_gain(&l.transmitter.position, &l.receiver.position, params);
    let interference = measured_interference(topology, allocation, link, best.0, params);
    let p = necessary_power(l.beta, interference, own_gain, params).min(params.max_power_w);
    (best.0, p)
}

/// Whether `link` meets its SINR requirement on its assigned channel.
pub fn is_satisfied(
    topology: &Topology,
    allocation: &Allocation,
    link: usize,
    params: &RadioParams,
) -> bool {
    match allocation.get(link).channel {
        Some(k) => {
            sinr(topology, allocation, link, k, params)
                >= topology.links[link].beta * (1.0 - SATISFIED_TOLERANCE)
        }
        None => false,
    }
}

/// Number of `links` meeting their SINR requirement.
pub fn satisfied_links(
    topology: &Topology,
    allocation: &Allocation,
    links: &[usize],
    params: &RadioParams,
) -> usize {
    links
        .iter()
        .filter(|&&i| is_satisfied(topology, allocation, i, params))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::Assignment;
    use crate::geo::Position;
    use crate::topology::{LinkSpec, Rect};

    type Xy = (f64, f64);

    fn topo(links: &[(Xy, Xy, f64)]) -> Topology {
        let specs: Vec<LinkSpec> = links
            .iter()
            .enumerate()
            .map(|(i, &(t, r, beta))| {
                LinkSpec::new(
                    i as u32,
                    Position::new(t.0, t.1),
                    Position::new(r.0, r.1),
                    beta,
                )
            })
            .collect();
        Topology::from_specs(&specs, Rect::new(-1e4, -1e4, 1e4, 1e4), 1, "test")
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-30)
    }

    #[test]
    fn interference_from_one_interferer() {
        // Interferer transmitter 100 m from receiver 0.
        let t = topo(&[
            ((0.0, 0.0), (10.0, 0.0), 2.0),
            ((110.0, 0.0), (115.0, 0.0), 2.0),
        ]);
        let p = RadioParams::default();
        let mut a = Allocation::idle(2);
        a.set(0, Assignment::on(Channel(1), 0.01));
        assert_eq!(measured_interference(&t, &a, 0, Channel(1), &p), 0.0);
        a.set(1, Assignment::on(Channel(1), 0.1));
        assert!(close(
            measured_interference(&t, &a, 0, Channel(1), &p),
            1e-7
        ));
        assert_eq!(measured_interference(&t, &a, 0, Channel(2), &p), 0.0);
    }

    #[test]
    fn sinr_and_necessary_power_examples() {
        let p = RadioParams::default();
        // g_ii = 1e-6 at 100 m.
        let t = topo(&[((0.0, 0.0), (100.0, 0.0), 5.0)]);
        let mut a = Allocation::idle(1);
        a.set(0, Assignment::on(Channel(0), 0.05));
        assert!(close(sinr(&t, &a, 0, Channel(0), &p), 5.0));
        assert_eq!(sinr(&t, &a, 0, Channel(1), &p), 0.0);
        assert!(close(necessary_power(5.0, 0.0, 1e-6, &p), 0.05));
        assert!(close(necessary_power(5.0, 1e-7, 1e-6, &p), 0.55));
        assert!(close(necessary_power(1.0, 0.0, 1.0, &p), 1e-8));
    }

    #[test]
    fn utility_with_one_known_receiver() {
        let p = RadioParams::default();
        // Link 0 has g_ii = 1e-6 and beta 5, so p_nec = 0.05 W with no
        // interference. Link 1's receiver is 100 m from transmitter 0 and its
        // transmitter is far enough away to be negligible.
        let t = topo(&[
            ((0.0, 0.0), (0.0, 100.0), 5.0),
            ((5000.0, 0.0), (100.0, 0.0), 1.0),
        ]);
        let mut a = Allocation::idle(2);
        a.set(1, Assignment::on(Channel(3), 0.1));
        let k = KnowledgeSet::from_lists(vec![vec![1], vec![]]);
        let i3 = measured_interference(&t, &a, 0, Channel(3), &p);
        let p_nec = necessary_power(5.0, i3, 1e-6, &p);
        let u = allocation_utility(&t, &a, &k, 0, Channel(3), &p);
        assert!(close(u, -i3 - p_nec * 1e-6), "{u}");
        assert_eq!(allocation_utility(&t, &a, &k, 0, Channel(4), &p), 0.0);
        let empty = KnowledgeSet::empty(2);
        assert!(close(
            allocation_utility(&t, &a, &empty, 0, Channel(3), &p),
            -i3
        ));
    }

    #[test]
    fn best_response_in_empty_network() {
        let p = RadioParams::default();
        let t = topo(&[((0.0, 0.0), (100.0, 0.0), 5.0)]);
        let a = Allocation::idle(1);
        let (k, pw) = best_response(&t, &a, &KnowledgeSet::empty(1), 0, &p);
        assert_eq!(k, Channel(0));
        assert!(close(pw, 5.0 * 1e-8 / 1e-6));
    }

    #[test]
    fn best_response_avoids_jammed_channels() {
        let p = RadioParams {
            channels: 3,
            ..RadioParams::default()
        };
        let t = topo(&[
            ((0.0, 0.0), (10.0, 0.0), 2.0),
            ((30.0, 0.0), (40.0, 0.0), 2.0),
            ((-30.0, 0.0), (-40.0, 0.0), 2.0),
        ]);
        let mut a = Allocation::idle(3);
        a.set(1, Assignment::on(Channel(0), 0.1));
        a.set(2, Assignment::on(Channel(1), 0.1));
        let (k, _) = best_response(&t, &a, &KnowledgeSet::empty(3), 0, &p);
        assert_eq!(k, Channel(2));
    }

    #[test]
    fn capped_link_is_unsatisfied() {
        let p = RadioParams::default();
        let t = topo(&[
            ((0.0, 0.0), (100.0, 0.0), 10.0),
            ((105.0, 0.0), (110.0, 0.0), 1.0),
        ]);
        let mut a = Allocation::idle(2);
        a.set(1, Assignment::on(Channel(0), 0.1));
        let (k, pw) = best_response(&t, &a, &KnowledgeSet::empty(2), 0, &p);
        assert_eq!(k, Channel(1));
        a.set(0, Assignment::on(Channel(0), p.max_power_w));
        assert!(!is_satisfied(&t, &a, 0, &p));
        a.set(0, Assignment::on(k, pw));
        assert!(is_satisfied(&t, &a, 0, &p));
        assert_eq!(satisfied_links(&t, &a, &[0, 1], &p), 2);
    }
}
