mod common;

use std::sync::Arc;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sagin_sfc::env::{contention_demo_instance, run_script, Env};
use sagin_sfc::oracle::{random_tiny_instance, solve_exact, solve_exact_with, SolveOptions};
use sagin_sfc::Error;

#[test]
fn witnesses_are_feasible_and_bound_every_agent() {
    for case in oracle_sweep(12, 3) {
        assert!(case.ok(), "case {}: oracle {} witness ({} violations, objective {}), agents {:?}",
            case.index, case.oracle, case.witness_violations, case.witness_objective, case.agents);
    }
}

#[test]
fn witness_replays_to_the_same_objective() {
    let inst = Arc::new(contention_demo_instance());
    let sol = solve_exact(Arc::clone(&inst)).unwrap();
    let env = run_script(inst, &sol.actions).unwrap();
    assert_eq!(env.completed(), sol.objective);
    assert_eq!(env.log(), &sol.log);
}

#[test]
fn pruning_does_not_change_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..8 {
        let inst = Arc::new(random_tiny_instance(&mut rng, 5));
        let pruned = solve_exact(Arc::clone(&inst)).unwrap();
        let full = solve_exact_with(inst, SolveOptions { deadline_pruning: false }).unwrap();
        assert_eq!(pruned.objective, full.objective);
    }
}

#[test]
fn tiny_instances_respect_the_node_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let inst = random_tiny_instance(&mut rng, TINY_MAX_NODES);
        assert!(inst.node_count() <= TINY_MAX_NODES && inst.node_count() >= 3);
        assert!(inst.sfc_count() <= 3 && inst.slot_count <= 10);
    }
}

#[test]
fn oversized_instances_are_refused() {
    let cfg = desk_config(sagin_sfc::learn::AgentKind::Ddqn, 1, 20);
    let inst = Arc::new(cfg.build_instance(1).unwrap());
    assert!(matches!(solve_exact(inst), Err(Error::InstanceTooLarge(_))));
}

#[test]
fn greedy_play_never_beats_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let inst = Arc::new(random_tiny_instance(&mut rng, TINY_MAX_NODES));
        let best = solve_exact(Arc::clone(&inst)).unwrap().objective;
        let mut env = Env::new(Arc::clone(&inst));
        while !env.is_done() {
            let actions: Vec<usize> = (0..inst.sfc_count())
                .map(|k| if env.sfc(k).status == sagin_sfc::env::Status::Active { *env.action_mask(k).last().unwrap() } else { env.hold_action() })
                .collect();
            env.step(&actions).unwrap();
        }
        assert!(env.completed() <= best);
    }
}
