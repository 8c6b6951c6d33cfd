//! Oracles and generated corpora shared by the oracle tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ndft_sim::machine::Location;
use ndft_sim::runtime::{blocked_layout, run_pseudopotential, NdpRuntime, PseudoInfo, PseudoMode, PseudoSetup};
use ndft_sim::scheduler::{plan, Placement, Policy, Schedule};
use ndft_sim::sim::{simulate, SimOptions};
use ndft_sim::workload::{CalibrationFixture, ExecMode, KernelCost, KernelFamily, SystemSpec, TaskGraph};
use ndft_sim::{MachineConfig, UnitRef};

pub fn small_machine(sx: u32, sy: u32, units: u32) -> MachineConfig {
    let mut cfg = MachineConfig::default();
    cfg.ndp.stacks_x = sx;
    cfg.ndp.stacks_y = sy;
    cfg.ndp.units_per_stack = units;
    cfg.hbm.total_capacity_bytes = cfg.ndp.capacity_per_unit_bytes * (sx * sy * units) as u64;
    cfg
}

pub fn spec(n_atoms: u64, n_processes: u32, n_grid: u64) -> SystemSpec {
    SystemSpec {
        n_atoms,
        n_valence: 2 * n_atoms,
        n_conduction: 2 * n_atoms,
        n_grid,
        n_processes,
    }
}

pub fn one_stack_two_units() -> MachineConfig {
    let mut cfg = MachineConfig::default();
    cfg.ndp.stacks_x = 1;
    cfg.ndp.stacks_y = 1;
    cfg.ndp.units_per_stack = 2;
    cfg.hbm.total_capacity_bytes = 2 * cfg.ndp.capacity_per_unit_bytes;
    cfg
}

pub fn makespan(g: &TaskGraph, cfg: &MachineConfig, s: &Schedule) -> f64 {
    simulate(s, g, cfg, &CalibrationFixture::default(), &SimOptions::default())
        .unwrap()
        .makespan
}

pub fn greedy(g: &TaskGraph, cfg: &MachineConfig) -> f64 {
    makespan(g, cfg, &plan(g, cfg, Policy::Hybrid).unwrap())
}

/// Minimum makespan over every placement of every task. NDP units are
/// interchangeable, so a task may only use a unit index at most one past
/// the largest already used.
pub fn brute_force(g: &TaskGraph, cfg: &MachineConfig) -> f64 {
    fn rec(
        g: &TaskGraph,
        cfg: &MachineConfig,
        i: usize,
        max_unit: i64,
        cur: &mut Vec<Placement>,
        best: &mut f64,
    ) {
        if i == g.tasks.len() {
            let s = Schedule::from_placements(g, cfg, Policy::Hybrid, cur.clone(), vec![0.0; cur.len()]).unwrap();
            *best = best.min(makespan(g, cfg, &s));
            return;
        }
        let mut options = vec![(Placement::CPU, max_unit)];
        for u in 0..cfg.ndp.units_per_stack as i64 {
            if u <= max_unit + 1 {
                options.push((Placement::Single(UnitRef::Ndp { stack: 0, unit: u as u32 }), max_unit.max(u)));
            }
        }
        if g.tasks[i].exec == ExecMode::Splittable {
            options.push((Placement::AllNdp, max_unit));
        }
        for (p, m) in options {
            cur.push(p);
            rec(g, cfg, i + 1, m, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(g, cfg, 0, -1, &mut Vec::new(), &mut best);
    best
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random DAG of `n` tasks: each reads one or two earlier outputs or a host
/// input and writes one object. Costs span memory- and compute-bound kernels.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> TaskGraph {
    let mut g = TaskGraph::new();
    let mut available = vec![g.add_data("host.0", log_uniform(rng, 1e3, 1e8), Some(Location::Host))];
    let mut produced = Vec::new();
    for t in 0..n {
        let k = rng.gen_range(1..=2.min(available.len()));
        let mut inputs = Vec::new();
        while inputs.len() < k {
            let d = available[rng.gen_range(0..available.len())];
            if !inputs.contains(&d) {
                inputs.push(d);
            }
        }
        let out = g.add_data(format!("d{t}"), log_uniform(rng, 1e3, 1e8), None);
        let cost = KernelCost {
            flops: log_uniform(rng, 1e5, 1e11),
            bytes_read: log_uniform(rng, 1e5, 1e10),
            bytes_written: log_uniform(rng, 1e3, 1e8),
        };
        let exec = if rng.gen_bool(0.3) {
            ExecMode::Splittable
        } else {
            ExecMode::Single
        };
        g.add_task(format!("t{t}"), KernelFamily::Other, cost, 1.0, exec, inputs, vec![out])
            .unwrap();
        available.push(out);
        produced.push(out);
    }
    for d in produced {
        if g.consumers(d).is_empty() {
            g.mark_terminal(d);
        }
    }
    g
}

/// Ratio of greedy to optimal makespan over a corpus of graphs with at most
/// ten tasks; returns the worst ratio and the graph count.
pub fn worst_greedy_ratio() -> (f64, usize) {
    let cfg = one_stack_two_units();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 1..=10 {
        for _ in 0..4 {
            let g = random_graph(&mut rng, n);
            let ratio = greedy(&g, &cfg) / brute_force(&g, &cfg);
            worst = worst.max(ratio);
            count += 1;
        }
    }
    (worst, count)
}

/// Runs `n` random (seed, system) instances in both pseudopotential modes;
/// returns the instance count and the worst per-element relative difference.
pub fn oracle_equivalence(n: usize) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let cfg = small_machine(rng.gen_range(1..=4), rng.gen_range(1..=2), rng.gen_range(1..=4));
        let s = spec(rng.gen_range(1..=16), rng.gen_range(1..=16), rng.gen_range(8..=256));
        let seed = rng.gen();
        let setup = PseudoSetup {
            cfg: &cfg,
            projectors: rng.gen_range(1..=8),
            layout: blocked_layout(&cfg, s.n_processes),
            execute: true,
        };
        let shared = run_pseudopotential(&s, PseudoMode::SharedBlock, seed, &setup).unwrap();
        let oracle = run_pseudopotential(&s, PseudoMode::PerProcessCopy, seed, &setup).unwrap();
        assert_eq!(shared.wavefunctions.len(), oracle.wavefunctions.len());
        for (a, b) in shared.wavefunctions.iter().zip(&oracle.wavefunctions) {
            assert_eq!(a.len(), s.n_grid as usize);
            for (x, y) in a.iter().zip(b) {
                if x != y {
                    worst = worst.max((x - y).abs() / y.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    (n, worst)
}

#[derive(Debug, Default)]
pub struct FilterBound {
    pub traces: usize,
    /// (block, stack) pairs fetched more than once, summed over traces.
    pub repeated_fetches: usize,
    /// Traces whose inter-stack bytes exceed the flat-fetch baseline.
    pub over_baseline: usize,
}

/// Replays `n` random access traces of (unit, atom) through the runtime.
/// The flat-fetch baseline pulls one copy per (unit, remote block).
pub fn filter_bound(n: usize) -> FilterBound {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = FilterBound::default();
    for _ in 0..n {
        let cfg = small_machine(rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=8));
        let units: Vec<UnitRef> = cfg.ndp_units().collect();
        let mut rt = NdpRuntime::new(&cfg);
        let n_atoms = rng.gen_range(1..=24u64);
        let mut blocks = BTreeMap::new();
        for atom in 0..n_atoms {
            let m = rng.gen_range(1..=6);
            let info = PseudoInfo {
                atom_id: atom,
                index_table: (0..rng.gen_range(1..=8)).collect(),
                matrix: vec![0.5; m * m],
            };
            let owner = units[rng.gen_range(0..units.len())];
            let b = rt.alloc_shared(&info, owner).unwrap();
            blocks.insert(atom, (b.length, b.owner_stack));
        }
        let trace: Vec<(UnitRef, u64)> = (0..rng.gen_range(1..=300))
            .map(|_| (units[rng.gen_range(0..units.len())], rng.gen_range(0..n_atoms)))
            .collect();

        let flat: u64 = trace
            .iter()
            .filter(|(u, a)| u.stack() != Some(blocks[a].1))
            .collect::<BTreeSet<_>>()
            .iter()
            .map(|(_, a)| blocks[a].0)
            .sum();

        for &(unit, atom) in &trace {
            let e = rt.directory().lookup(atom).unwrap();
            let stack = unit.stack().unwrap();
            if stack != e.owner_stack {
                rt.read_remote(e.block_id, stack, e.owner_stack).unwrap();
            }
            rt.read_local(unit, e.block_id, 0, e.length).unwrap();
        }
        let mut per = BTreeMap::new();
        for m in rt.messages() {
            *per.entry((m.block, m.to_stack)).or_insert(0) += 1;
        }
        out.traces += 1;
        out.repeated_fetches += per.values().filter(|&&c| c > 1).count();
        out.over_baseline += usize::from(rt.stats().inter_stack_bytes > flat);
    }
    out
}
