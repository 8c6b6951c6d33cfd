//! Hybrid never loses to either single-class policy on the shipped scenarios.

use ndft_sim::experiment::{run_experiment, ExperimentConfig, RunOptions};
use ndft_sim::runtime::PseudoMode;
use ndft_sim::scheduler::Policy;

#[test]
fn hybrid_beats_single_class_policies_where_ndp_only_fits() {
    let mut cfg = ExperimentConfig::shipped();
    cfg.scenarios.retain(|s| s.n_atoms <= 32);
    let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
    for n in [16, 32] {
        let get = |p: Policy, m: PseudoMode| {
            r.summary
                .iter()
                .find(|row| row.n_atoms == n && row.policy == p && row.pseudo_mode == m)
                .unwrap()
                .makespan_s
        };
        let hybrid = get(Policy::Hybrid, PseudoMode::SharedBlock);
        let cpu = get(Policy::CpuOnly, PseudoMode::PerProcessCopy);
        let ndp = get(Policy::NdpOnly, PseudoMode::SharedBlock);
        assert!(hybrid <= cpu.min(ndp), "Si_{n}: hybrid {hybrid} cpu {cpu} ndp {ndp}");
    }
}
