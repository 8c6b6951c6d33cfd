//! Shared-block runtime checked against the per-process-copy oracle and a
//! flat-fetch traffic baseline.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ndft_sim::runtime::{blocked_layout, run_pseudopotential, NdpRuntime, PseudoInfo, PseudoMode, PseudoSetup};
use ndft_sim::{MachineConfig, SimError, UnitRef};

use common::{small_machine, spec};

#[test]
fn shared_blocks_match_private_copies_on_200_instances() {
    let (cases, worst) = common::oracle_equivalence(200);
    assert_eq!(cases, 200);
    assert!(worst <= 1e-12, "worst relative difference {worst}");
}

#[test]
fn shared_blocks_use_less_memory_with_blocked_layout() {
    let cfg = MachineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let s = spec(rng.gen_range(1..=64), rng.gen_range(2..=128), 64);
        let setup = PseudoSetup {
            cfg: &cfg,
            projectors: rng.gen_range(1..=32),
            layout: blocked_layout(&cfg, s.n_processes),
            execute: false,
        };
        let shared = run_pseudopotential(&s, PseudoMode::SharedBlock, 1, &setup).unwrap();
        let copies = run_pseudopotential(&s, PseudoMode::PerProcessCopy, 1, &setup).unwrap();
        assert!(shared.mem.footprint_bytes < copies.mem.footprint_bytes, "case {case}: {s:?}");
        assert!(shared.comm.inter_stack_bytes <= copies.comm.inter_stack_bytes, "case {case}");
    }
}

#[test]
fn seed_42_four_atoms_eight_processes_two_stacks() {
    let cfg = small_machine(2, 1, 4);
    let s = spec(4, 8, 128);
    let setup = PseudoSetup {
        cfg: &cfg,
        projectors: 6,
        layout: blocked_layout(&cfg, 8),
        execute: true,
    };
    let a = run_pseudopotential(&s, PseudoMode::SharedBlock, 42, &setup).unwrap();
    let b = run_pseudopotential(&s, PseudoMode::PerProcessCopy, 42, &setup).unwrap();
    assert_eq!(a.wavefunctions, b.wavefunctions);
    // Two stacks, every atom needed by both: one fetch per (atom, non-owner stack).
    assert_eq!(a.comm.inter_stack_messages, 4);
}

#[test]
fn bad_projector_index_is_a_data_error() {
    let cfg = small_machine(1, 1, 1);
    let mut rt = NdpRuntime::new(&cfg);
    let info = PseudoInfo {
        atom_id: 0,
        index_table: vec![0, 99],
        matrix: vec![0.0; 4],
    };
    let b = rt.alloc_shared(&info, UnitRef::Ndp { stack: 0, unit: 0 }).unwrap();
    let bytes = rt.read_local(UnitRef::Ndp { stack: 0, unit: 0 }, b.block_id, 0, b.length).unwrap();
    let mut w = vec![0.0; 16];
    let err = ndft_sim::runtime::pseudo::apply_block(&mut w, &PseudoInfo::unpack(&bytes).unwrap()).unwrap_err();
    assert!(matches!(err, SimError::Data(_)));
}

#[test]
fn arbiter_filter_bound_on_100_traces() {
    let v = common::filter_bound(100);
    assert_eq!(v.traces, 100);
    assert_eq!(v.repeated_fetches, 0);
    assert_eq!(v.over_baseline, 0);
}

#[test]
fn second_request_from_same_stack_is_cached() {
    let cfg = small_machine(4, 1, 2);
    let mut rt = NdpRuntime::new(&cfg);
    let info = PseudoInfo {
        atom_id: 0,
        index_table: vec![1, 2, 3],
        matrix: vec![1.0; 9],
    };
    let b = rt.alloc_shared(&info, UnitRef::Ndp { stack: 0, unit: 0 }).unwrap();
    rt.read_remote(b.block_id, 3, 0).unwrap();
    let first = rt.stats();
    assert_eq!((first.inter_stack_messages, first.inter_stack_bytes), (1, b.length));
    rt.read_remote(b.block_id, 3, 0).unwrap();
    let second = rt.stats();
    assert_eq!(second.inter_stack_bytes, first.inter_stack_bytes);
    assert_eq!(second.inter_stack_messages, first.inter_stack_messages);
    assert_eq!(second.requests_served_from_cache, 1);
}
