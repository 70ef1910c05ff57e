use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagin_sfc::channel::{g2u_snr, shannon_rate, slot_capacity, u2u_snr, RadioConstants};
use sagin_sfc::config::RunConfig;
use sagin_sfc::env::{check_schedule, reward, Env, Instance, RewardParams, ScheduleLog, ValidatorOptions};
use sagin_sfc::learn::{epsilon_greedy, ReplayMemory};
use sagin_sfc::oracle::random_tiny_instance;
use sagin_sfc::topology::LinkKind;
use sagin_sfc::workload::{generate_workload, vnf_process_slots, WorkloadParams};

const KINDS: [LinkKind; 6] = [LinkKind::G2U, LinkKind::U2G, LinkKind::U2U, LinkKind::U2S, LinkKind::S2S, LinkKind::S2G];

fn small_instance(seed: u64) -> Instance {
    let mut cfg = RunConfig::default();
    cfg.scenario.uav_count = 3;
    cfg.scenario.slots = 15;
    cfg.workload.count = 6;
    cfg.build_instance(seed).unwrap()
}

/// Plays uniformly random legal joint actions and checks the per-step invariants.
fn random_play(inst: Arc<Instance>, seed: u64) -> Env {
    play(inst, seed, false)
}

/// Like [`random_play`], but processes in place and delivers whenever the mask allows it.
fn eager_play(inst: Arc<Instance>, seed: u64) -> Env {
    play(inst, seed, true)
}

fn play(inst: Arc<Instance>, seed: u64, eager: bool) -> Env {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Env::new(Arc::clone(&inst));
    while !env.is_done() {
        let hold = env.hold_action();
        let mut actions = vec![hold; inst.sfc_count()];
        for k in env.active() {
            let mask = env.action_mask(k);
            assert!(!mask.is_empty());
            assert!(mask.iter().all(|&a| a <= hold));
            let dest = inst.sfcs[k].destination;
            actions[k] = if eager && mask.contains(&hold) {
                env.sfc(k).node
            } else if eager && mask.contains(&dest) {
                dest
            } else {
                mask[rng.gen_range(0..mask.len())]
            };
        }
        env.step(&actions).unwrap();
        for t in 1..=inst.slot_count {
            for (i, o) in env.occupancy_at(t).iter().enumerate() {
                assert!(*o <= inst.nodes[i].compute_capacity * (1.0 + 1e-9), "node {i} slot {t} over capacity");
            }
        }
        for i in 0..inst.node_count() {
            if let Some(b) = inst.energy_budget(i) {
                assert!(env.ledger().total(i) <= b * (1.0 + 1e-9));
            }
        }
    }
    env
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capacity_non_increasing_in_distance(k in 0usize..6, d1 in 10.0f64..2e6, extra in 0.0f64..2e6) {
        let radio = RadioConstants::default();
        let near = slot_capacity(KINDS[k], d1, 1, &radio, 5.0).unwrap();
        let far = slot_capacity(KINDS[k], d1 + extra, 1, &radio, 5.0).unwrap();
        prop_assert!(far <= near * (1.0 + 1e-12));
        prop_assert!(far.is_finite() && far >= 0.0);
    }

    #[test]
    fn snr_linear_and_db_domains_agree(p in 0.01f64..50.0, d in 1.0f64..5e4, f in 1e9f64..6e9) {
        let lin = g2u_snr(p, 1e8, d).unwrap();
        let db = 10.0 * p.log10() + 80.0 - 20.0 * d.log10();
        prop_assert!((lin - 10f64.powf(db / 10.0)).abs() <= 1e-9 * lin);
        let lin = u2u_snr(p, f, d, 4e-13).unwrap();
        let pl = 20.0 * d.log10() + 20.0 * f.log10() - 147.55;
        let db = 10.0 * p.log10() - pl - 10.0 * 4e-13f64.log10();
        prop_assert!((lin - 10f64.powf(db / 10.0)).abs() <= 1e-9 * lin);
    }

    #[test]
    fn shannon_at_unit_snr_is_bandwidth(b in 1e3f64..1e9) {
        prop_assert_eq!(shannon_rate(b, 0.0), 0.0);
        prop_assert!((shannon_rate(b, 1.0) - b).abs() <= 1e-9 * b);
    }

    #[test]
    fn reward_is_linear(tc in 0usize..50, tw in 0usize..50, a in 0usize..10, b in 0usize..10) {
        let p = RewardParams::default();
        let base = reward(tc, tw, &p).value;
        let moved = reward(tc + a, tw + b, &p).value;
        let expected = base - p.c1 * a as f64 - p.c2 * b as f64;
        prop_assert!((moved - expected).abs() < 1e-9);
    }

    #[test]
    fn processing_slots_monotone(s1 in 1.0f64..1e10, ds in 0.0f64..1e10, phi in 1e6f64..1e10, dphi in 0.0f64..1e10) {
        let base = vnf_process_slots(s1, phi, 5.0).unwrap();
        prop_assert!(vnf_process_slots(s1 + ds, phi, 5.0).unwrap() >= base);
        prop_assert!(vnf_process_slots(s1, phi + dphi, 5.0).unwrap() <= base);
    }

    #[test]
    fn replay_is_a_bounded_ring(cap in 1usize..50, pushes in 0usize..200) {
        let mut mem = ReplayMemory::new(cap);
        for i in 0..pushes {
            mem.push(i);
            prop_assert!(mem.len() <= cap);
        }
        if pushes > cap {
            prop_assert!(mem.iter().all(|&i| i >= pushes - cap));
        }
    }

    #[test]
    fn singleton_mask_forces_the_action(a in 0usize..8, eps in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = vec![0.5f64; 8];
        prop_assert_eq!(epsilon_greedy(&q, eps, &[a], &mut rng).unwrap(), a);
    }

    #[test]
    fn generated_workload_in_range(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = WorkloadParams::default();
        for s in generate_workload(&p, &[0, 1, 2], &mut rng).unwrap() {
            prop_assert!((5e8..=4e9).contains(&s.data_bits));
            prop_assert!((2..=3).contains(&s.len()));
            prop_assert!((p.deadline_min..=p.deadline_max).contains(&s.deadline));
            prop_assert!(s.origin != s.destination);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_play_on_tiny_instances_is_feasible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = Arc::new(random_tiny_instance(&mut rng, 6));
        let env = random_play(Arc::clone(&inst), seed);
        let v = check_schedule(env.log(), &inst, &ValidatorOptions::default()).unwrap();
        prop_assert!(v.is_empty(), "{:?}", v);
        prop_assert_eq!(sagin_sfc::env::objective_value(env.log(), &inst).unwrap(), env.completed());
        prop_assert_eq!(ScheduleLog::from_jsonl(&env.log().to_jsonl()).unwrap(), env.log().clone());
    }

    #[test]
    fn random_play_on_generated_scenarios_is_feasible(seed in 0u64..1000) {
        let inst = Arc::new(small_instance(seed));
        let env = random_play(Arc::clone(&inst), seed);
        let v = check_schedule(env.log(), &inst, &ValidatorOptions::default()).unwrap();
        prop_assert!(v.is_empty(), "{:?}", v);
        prop_assert_eq!(sagin_sfc::env::objective_value(env.log(), &inst).unwrap(), env.completed());
        prop_assert!((0.0..=1.0).contains(&env.utilization()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_play_under_tight_deadlines_never_delivers_late(seed in 0u64..10_000, lo in 2usize..10, span in 0usize..10) {
        let mut cfg = RunConfig::default();
        cfg.scenario.uav_count = 3;
        cfg.scenario.slots = 15;
        cfg.workload.count = 8;
        cfg.workload.deadline_min = lo;
        cfg.workload.deadline_max = lo + span;
        let inst = Arc::new(cfg.build_instance(seed).unwrap());
        let env = eager_play(Arc::clone(&inst), seed);
        let v = check_schedule(env.log(), &inst, &ValidatorOptions::default()).unwrap();
        prop_assert!(v.is_empty(), "{:?}", v);
    }
}
