//! Miniature nonlocal pseudopotential kernel: each wavefunction `w` is
//! updated per atom `a` as `w += S_a^T V_a (S_a w)`, where `S_a` gathers the
//! entries named by the atom's index table and `V_a` is its `m x m` matrix.
//!
//! The same driver produces the communication trace used by the simulator;
//! with `execute` unset no data is generated and only the accounting runs.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CommStats, NdpRuntime, PseudoInfo, PseudoMode};
use crate::error::{Result, SimError};
use crate::machine::{MachineConfig, UnitRef};
use crate::workload::cost::block_length;
use crate::workload::SystemSpec;

/// Wavefunction streams are offset from atom streams so the two never collide.
const WAVEFUNCTION_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone)]
pub struct PseudoSetup<'a> {
    pub cfg: &'a MachineConfig,
    pub projectors: u32,
    /// NDP unit hosting each process rank.
    pub layout: Vec<UnitRef>,
    /// Generate data and run the numerics; otherwise only account traffic.
    pub execute: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemStats {
    pub footprint_bytes: u64,
    /// Primary copies (one per atom when shared, one per atom per process otherwise).
    pub block_bytes: u64,
    pub cache_bytes: u64,
    pub directory_bytes: u64,
    pub spilled_blocks: u64,
}

/// An inter-stack block fetch issued on behalf of `process`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchMessage {
    pub process: u32,
    pub owner_process: u32,
    pub from_stack: u32,
    pub to_stack: u32,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutcome {
    /// Updated wavefunctions in global order; empty unless executed.
    pub wavefunctions: Vec<Vec<f64>>,
    pub mem: MemStats,
    pub comm: CommStats,
    pub messages: Vec<FetchMessage>,
}

/// Fills NDP units in stack-major order, one process per unit, wrapping
/// around when there are more processes than units.
pub fn blocked_layout(cfg: &MachineConfig, n_processes: u32) -> Vec<UnitRef> {
    let units: Vec<UnitRef> = cfg.ndp_units().collect();
    (0..n_processes as usize).map(|r| units[r % units.len()]).collect()
}

pub fn atom_info(seed: u64, atom: u64, m: u32, n_grid: u64) -> PseudoInfo {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(atom);
    let index_table = (0..m).map(|_| rng.gen_range(0..n_grid) as u32).collect();
    let scale = 1.0 / m as f64;
    let matrix = (0..(m as usize * m as usize))
        .map(|_| rng.gen_range(-1.0..1.0) * scale)
        .collect();
    PseudoInfo {
        atom_id: atom,
        index_table,
        matrix,
    }
}

pub fn wavefunction(seed: u64, index: u64, n_grid: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WAVEFUNCTION_STREAM | index);
    (0..n_grid).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `w += S^T V (S w)` for one atom.
pub fn apply_block(w: &mut [f64], info: &PseudoInfo) -> Result<()> {
    let m = info.order()? as usize;
    if info.index_table.len() != m {
        return Err(SimError::Data(format!(
            "atom {}: {} indices for a {m}x{m} matrix",
            info.atom_id,
            info.index_table.len()
        )));
    }
    if let Some(&bad) = info.index_table.iter().find(|&&i| i as usize >= w.len()) {
        return Err(SimError::Data(format!(
            "atom {}: projector index {bad} outside grid of {}",
            info.atom_id,
            w.len()
        )));
    }
    let gathered: Vec<f64> = info.index_table.iter().map(|&i| w[i as usize]).collect();
    for (row, &i) in info.index_table.iter().enumerate() {
        let coefs = &info.matrix[row * m..(row + 1) * m];
        let z: f64 = coefs.iter().zip(&gathered).map(|(v, g)| v * g).sum();
        w[i as usize] += z;
    }
    Ok(())
}

/// Executes (or traces) pseudopotential application for `spec` on the
/// processes in `setup.layout`.
///
/// Atoms are owned round-robin by process rank and wavefunctions are
/// distributed the same way. Under [`PseudoMode::SharedBlock`] owners pack
/// their atoms into shared blocks and every other process resolves them
/// through the directory, fetching remote blocks through its stack's arbiter.
/// Under [`PseudoMode::PerProcessCopy`] every process fetches and keeps a
/// private copy of every block. Both apply atoms in global order, so results
/// are bit-identical.
pub fn run_pseudopotential(spec: &SystemSpec, mode: PseudoMode, seed: u64, setup: &PseudoSetup) -> Result<PseudoOutcome> {
    spec.validate()?;
    let p = spec.n_processes;
    if setup.layout.len() != p as usize {
        return Err(SimError::domain(format!(
            "layout names {} units for {p} processes",
            setup.layout.len()
        )));
    }
    let mut stacks = Vec::with_capacity(p as usize);
    for u in &setup.layout {
        match u.stack() {
            Some(s) if setup.cfg.contains(*u) => stacks.push(s),
            _ => return Err(SimError::domain(format!("process unit {u} is not an NDP unit"))),
        }
    }
    if setup.projectors == 0 {
        return Err(SimError::domain("projector count must be >= 1"));
    }
    if setup.execute && spec.n_grid > u32::MAX as u64 {
        return Err(SimError::domain("grid too large for 32-bit projector indices"));
    }
    let m = setup.projectors;
    let n_wfn = spec.orbitals();
    let owner_of = |atom: u64| (atom % p as u64) as u32;

    let mut local: Vec<Vec<(u64, Vec<f64>)>> = vec![Vec::new(); p as usize];
    if setup.execute {
        for w in 0..n_wfn {
            local[(w % p as u64) as usize].push((w, wavefunction(seed, w, spec.n_grid)));
        }
    }
    let has_work = |r: u32| (r as u64) < n_wfn;

    let mut messages = Vec::new();
    let mut mem = MemStats::default();
    let comm;

    match mode {
        PseudoMode::SharedBlock => {
            let mut rt = NdpRuntime::new(setup.cfg);
            let mut blocks = Vec::with_capacity(spec.n_atoms as usize);
            for atom in 0..spec.n_atoms {
                let owner = setup.layout[owner_of(atom) as usize];
                let b = if setup.execute {
                    rt.alloc_shared(&atom_info(seed, atom, m, spec.n_grid), owner)?
                } else {
                    rt.reserve_shared(atom, m as u64, m as u64, owner)?
                };
                blocks.push(b.block_id);
            }
            for r in 0..p {
                if !has_work(r) {
                    continue;
                }
                let me = setup.layout[r as usize];
                let my_stack = stacks[r as usize];
                for atom in 0..spec.n_atoms {
                    let entry = rt
                        .directory()
                        .lookup(atom)
                        .ok_or(SimError::UnknownBlock(blocks[atom as usize]))?;
                    if owner_of(atom) != r && entry.owner_stack != my_stack {
                        let before = rt.messages().len();
                        rt.read_remote(entry.block_id, my_stack, entry.owner_stack)?;
                        if rt.messages().len() > before {
                            messages.push(FetchMessage {
                                process: r,
                                owner_process: owner_of(atom),
                                from_stack: entry.owner_stack,
                                to_stack: my_stack,
                                bytes: entry.length,
                            });
                        }
                    }
                    if setup.execute {
                        let bytes = rt.read_local(me, entry.block_id, 0, entry.length)?;
                        let info = PseudoInfo::unpack(&bytes)?;
                        for (_, w) in &mut local[r as usize] {
                            apply_block(w, &info)?;
                        }
                    } else {
                        rt.touch_local(me, entry.block_id)?;
                    }
                }
            }
            let used: BTreeSet<u32> = stacks.iter().copied().collect();
            mem.block_bytes = rt.blocks().iter().map(|b| b.length).sum();
            mem.spilled_blocks = rt.blocks().iter().filter(|b| b.spilled).count() as u64;
            mem.cache_bytes = (0..rt.total_stacks()).map(|s| rt.stack_state(s).cache_bytes).sum();
            mem.directory_bytes = rt.directory().replica_bytes() * used.len() as u64;
            comm = rt.stats();
        }
        PseudoMode::PerProcessCopy => {
            let len = block_length(m as u64, m as u64);
            let mut stats = CommStats::default();
            for r in 0..p {
                let my_stack = stacks[r as usize];
                for atom in 0..spec.n_atoms {
                    let owner = owner_of(atom);
                    let owner_stack = stacks[owner as usize];
                    if owner == r || owner_stack == my_stack {
                        stats.intra_stack_bytes += len;
                    } else {
                        stats.inter_stack_bytes += len;
                        stats.inter_stack_messages += 1;
                        messages.push(FetchMessage {
                            process: r,
                            owner_process: owner,
                            from_stack: owner_stack,
                            to_stack: my_stack,
                            bytes: len,
                        });
                    }
                    if setup.execute && has_work(r) {
                        let info = atom_info(seed, atom, m, spec.n_grid);
                        for (_, w) in &mut local[r as usize] {
                            apply_block(w, &info)?;
                        }
                    }
                }
            }
            mem.block_bytes = p as u64 * spec.n_atoms * len;
            comm = stats;
        }
    }
    mem.footprint_bytes = mem.block_bytes + mem.cache_bytes + mem.directory_bytes;

    let mut wavefunctions = vec![Vec::new(); if setup.execute { n_wfn as usize } else { 0 }];
    for per_process in local {
        for (w, data) in per_process {
            wavefunctions[w as usize] = data;
        }
    }
    Ok(PseudoOutcome {
        wavefunctions,
        mem,
        comm,
        messages,
    })
}
