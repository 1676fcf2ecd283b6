//! Library results checked against independent recomputations.

mod common;

use common::*;
use radiodisco::alloc::{
    allocation_utility, best_response, measured_interference, random_baseline,
    run_best_response_dynamics, sinr, Allocation, Assignment, Channel, Game, KnowledgeSet,
    RadioParams,
};
use radiodisco::discovery::{ImportantParams, ImportantTable};
use radiodisco::geo::{Address, Directory, NodeDescriptor, NodeId, Position};
use radiodisco::metrics::{compute_ground_truth, ground_truth_of};
use radiodisco::rng::{streams, KeyedDraw, Seed};
use radiodisco::time::SimTime;
use radiodisco::topology::{LinkSpec, Rect, Topology};

fn three_links() -> Topology {
    let specs = [
        LinkSpec::new(0, Position::new(0.0, 0.0), Position::new(10.0, 0.0), 5.0),
        LinkSpec::new(1, Position::new(40.0, 5.0), Position::new(30.0, 12.0), 2.0),
        LinkSpec::new(2, Position::new(15.0, 60.0), Position::new(20.0, 45.0), 8.0),
    ];
    Topology::from_specs(
        &specs,
        Rect::new(-100.0, -100.0, 100.0, 100.0),
        1,
        "fixture",
    )
}

#[test]
fn interference_sinr_and_utility_match_hand_sums() {
    let t = three_links();
    let p = RadioParams::default();
    let mut a = Allocation::idle(3);
    a.set(0, Assignment::on(Channel(1), 0.02));
    a.set(1, Assignment::on(Channel(1), 0.07));
    a.set(2, Assignment::on(Channel(1), 0.1));
    let ch = channels_of(&a);
    let pw = powers_of(&a);
    let know = KnowledgeSet::everyone(3);
    for i in 0..3 {
        for k in 0..3u16 {
            let lib = measured_interference(&t, &a, i, Channel(k), &p);
            let ora = interference_oracle(&t, &ch, &pw, i, k);
            assert!(
                (lib - ora).abs() <= 1e-12 * ora.abs().max(1e-30),
                "I link {i} ch {k}: {lib} vs {ora}"
            );
            let known: Vec<usize> = (0..3).filter(|&j| j != i).collect();
            let lib = allocation_utility(&t, &a, &know, i, Channel(k), &p);
            let ora = utility_of_choice(&t, &ch, &pw, &known, i, k, &p);
            assert!(
                (lib - ora).abs() <= 1e-12 * ora.abs().max(1e-30),
                "U link {i} ch {k}: {lib} vs {ora}"
            );
        }
        let lib = sinr(&t, &a, i, Channel(1), &p);
        let ora = sinr_oracle(&t, &ch, &pw, i, p.noise_w);
        assert!(
            (lib - ora).abs() <= 1e-12 * ora,
            "sinr link {i}: {lib} vs {ora}"
        );
    }
}

#[test]
fn best_response_is_a_full_scan_argmax() {
    let p = RadioParams::default();
    for seed in 0..30 {
        let t = random_links(12, 200.0, 30.0, seed);
        let a = Allocation::random_full_power(
            12,
            &p,
            &KeyedDraw::new(Seed(seed), streams::ALLOCATION_INIT),
        );
        let know = KnowledgeSet::everyone(12);
        let ch = channels_of(&a);
        let pw = powers_of(&a);
        for i in 0..12 {
            let known: Vec<usize> = (0..12).filter(|&j| j != i).collect();
            let (k, power) = best_response(&t, &a, &know, i, &p);
            let best = (0..p.channels)
                .map(|c| utility_of_choice(&t, &ch, &pw, &known, i, c, &p))
                .fold(f64::NEG_INFINITY, f64::max);
            let chosen = utility_of_choice(&t, &ch, &pw, &known, i, k.0, &p);
            assert!(chosen >= best - 1e-9 * best.abs());
            assert!(power > 0.0 && power <= p.max_power_w);
        }
    }
}

#[test]
fn tracked_interference_matches_recomputation_after_dynamics() {
    let p = RadioParams::default();
    for seed in 0..10 {
        let t = random_links(40, 300.0, 40.0, seed);
        let truth = compute_ground_truth(&t);
        let know = KnowledgeSet::full(&t, &truth);
        let init = Allocation::random_full_power(
            40,
            &p,
            &KeyedDraw::new(Seed(seed), streams::ALLOCATION_INIT),
        );
        let focus: Vec<usize> = (0..30).collect();
        let mut g = Game::new(&t, p, &know, focus.clone(), init)
            .unwrap()
            .with_verify(true);
        g.run(&mut Seed(seed).stream(streams::ALLOCATION_ORDER));
        assert!(g.violations().is_empty(), "{:?}", g.violations());
        let a = g.allocation().clone();
        let ch = channels_of(&a);
        let pw = powers_of(&a);
        for (slot, &i) in focus.iter().enumerate() {
            // rounding left by a removed contribution scales with the largest
            // single term that can reach this receiver
            let rx = &t.links[i].receiver.position;
            let largest = (0..40)
                .filter(|&j| j != i)
                .map(|j| gain_oracle(&t.links[j].transmitter.position, rx) * p.max_power_w)
                .fold(0.0, f64::max);
            for k in 0..p.channels {
                let tracked = g.interference(slot, Channel(k));
                let ora = interference_oracle(&t, &ch, &pw, i, k);
                assert!(
                    (tracked - ora).abs() <= 1e-9 * ora.max(largest),
                    "slot {slot} ch {k}"
                );
            }
        }
        // links outside the focus keep their initial state
        let init = Allocation::random_full_power(
            40,
            &p,
            &KeyedDraw::new(Seed(seed), streams::ALLOCATION_INIT),
        );
        for i in 30..40 {
            assert_eq!(a.get(i), init.get(i));
        }
    }
}

#[test]
fn ground_truth_matches_brute_force_on_mixed_ranges() {
    for seed in 0..20 {
        let nodes = random_nodes(300, 1000.0, 80.0, seed);
        let truth = ground_truth_of(&nodes);
        let oracle = brute_force_truth(&nodes);
        for (i, expect) in oracle.iter().enumerate() {
            let mut got = truth.candidates(Address(i as u32)).to_vec();
            got.sort();
            assert_eq!(&got, expect, "seed {seed} node {i}");
        }
    }
}

#[test]
fn select_k_matches_exhaustive_ranking() {
    // six nodes spread over 60 m with ranges up to 20 m
    let pos = [
        (0.0, 0.0),
        (12.0, 3.0),
        (25.0, -4.0),
        (31.0, 18.0),
        (47.0, 2.0),
        (60.0, 9.0),
    ];
    let ranges = [10.0, 15.0, 6.0, 20.0, 12.0, 8.0];
    let nodes: Vec<NodeDescriptor> = pos
        .iter()
        .zip(ranges)
        .enumerate()
        .map(|(i, (&(x, y), r))| NodeDescriptor {
            id: NodeId(100 - i as u64),
            position: Position::new(x, y),
            coordination_range: r,
            address: Address(i as u32),
        })
        .collect();
    let dir = Directory::from_descriptors(nodes.clone());
    let params = ImportantParams::dynamic(100, 600);
    let all: Vec<Address> = (0..6).map(Address).collect();
    for owner in 0..6u32 {
        let mut table = ImportantTable::new(&params);
        table.insert_candidates(Address(owner), &all, SimTime::ZERO, &dir, &params);
        let held: Vec<Address> = table.entries().iter().map(|e| e.node).collect();
        for peer in 0..6u32 {
            if peer == owner {
                continue;
            }
            for k in 1..=6 {
                let got = table.select_k_for_peer(Address(owner), Address(peer), k, &dir);
                let expect = top_k_oracle(&nodes, &held, Address(owner), Address(peer), k);
                assert_eq!(got, expect, "owner {owner} peer {peer} k {k}");
            }
        }
    }
}

#[test]
fn random_baseline_channels_are_uniform() {
    let p = RadioParams::default();
    let t = random_links(1000, 5000.0, 30.0, 3);
    let focus: Vec<usize> = (0..1000).collect();
    let mut counts = [0u64; 10];
    for seed in 0..100 {
        let init = Allocation::random_full_power(
            1000,
            &p,
            &KeyedDraw::new(Seed(seed), streams::ALLOCATION_INIT),
        );
        let a = random_baseline(&t, init, focus.clone(), &p, seed).unwrap();
        for c in a.channel_numbers() {
            counts[c.unwrap() as usize] += 1;
        }
    }
    let n = 100_000.0;
    let mean = n / 10.0;
    let sd = (n * 0.1 * 0.9_f64).sqrt();
    for (k, &c) in counts.iter().enumerate() {
        assert!((c as f64 - mean).abs() <= 5.0 * sd, "channel {k}: {c}");
    }
}

#[test]
fn single_link_converges_in_one_iteration() {
    let p = RadioParams::default();
    let t = Topology::from_specs(
        &[LinkSpec::new(
            0,
            Position::new(0.0, 0.0),
            Position::new(100.0, 0.0),
            5.0,
        )],
        Rect::new(-10.0, -10.0, 200.0, 200.0),
        0,
        "one",
    );
    let (a, out) = run_best_response_dynamics(
        &t,
        Allocation::idle(1),
        &KnowledgeSet::empty(1),
        vec![0],
        &p,
        0,
    )
    .unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
    assert_eq!(a.get(0).channel, Some(Channel(0)));
    // beta * N0 / g = 5 * 1e-8 / 1e-6
    assert!((a.get(0).power_w - 0.05).abs() < 1e-15);
}
