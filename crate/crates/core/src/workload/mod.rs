//! LR-TDDFT workload: system sizing, kernel cost formulas and the task graph
//! of the excited-state pipeline (pseudopotential, FFT, face-splitting
//! product, FFT, GEMM, all-to-all, SYEVD).

pub mod cost;
pub mod fixture;
pub mod graph;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub use cost::{kernel_cost, KernelCost, KernelShape};
pub use fixture::{CalibrationFixture, FamilyCoefs, Targets, WorkloadParams};
pub use graph::{build_taskgraph, DataId, DataObject, Edge, ExecMode, KernelDescriptor, TaskGraph, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelFamily {
    Fft,
    FaceSplit,
    Gemm,
    Alltoall,
    Syevd,
    Pseudo,
    Other,
}

impl KernelFamily {
    /// Families with cost formulas and fixture entries.
    pub const MODELED: [KernelFamily; 6] = [
        KernelFamily::Fft,
        KernelFamily::FaceSplit,
        KernelFamily::Gemm,
        KernelFamily::Alltoall,
        KernelFamily::Syevd,
        KernelFamily::Pseudo,
    ];

    /// Fixture key.
    pub fn key(self) -> &'static str {
        match self {
            KernelFamily::Fft => "fft",
            KernelFamily::FaceSplit => "face_split",
            KernelFamily::Gemm => "gemm",
            KernelFamily::Alltoall => "alltoall",
            KernelFamily::Syevd => "syevd",
            KernelFamily::Pseudo => "pseudo",
            KernelFamily::Other => "other",
        }
    }

    /// Display name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Fft => "FFT",
            KernelFamily::FaceSplit => "FACE_SPLIT",
            KernelFamily::Gemm => "GEMM",
            KernelFamily::Alltoall => "ALLTOALL",
            KernelFamily::Syevd => "SYEVD",
            KernelFamily::Pseudo => "PSEUDO",
            KernelFamily::Other => "OTHER",
        }
    }

    pub fn from_key(key: &str) -> Option<KernelFamily> {
        KernelFamily::MODELED
            .into_iter()
            .chain([KernelFamily::Other])
            .find(|f| f.key() == key)
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Size of a silicon system as seen by the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemSpec {
    pub n_atoms: u64,
    pub n_valence: u64,
    pub n_conduction: u64,
    /// Real-space grid points.
    pub n_grid: u64,
    pub n_processes: u32,
}

impl SystemSpec {
    /// Dimension of the pair (response) space, `Nv * Nc`.
    pub fn pair_dim(&self) -> u64 {
        self.n_valence * self.n_conduction
    }

    pub fn orbitals(&self) -> u64 {
        self.n_valence + self.n_conduction
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(SimError::domain("system has no atoms"));
        }
        if self.n_valence == 0 || self.n_conduction == 0 || self.n_grid == 0 {
            return Err(SimError::domain("orbital and grid counts must be positive"));
        }
        if self.n_processes == 0 {
            return Err(SimError::domain("at least one process is required"));
        }
        Ok(())
    }

    /// Atoms owned by `process` under round-robin distribution.
    pub fn owned_atoms(&self, process: u32) -> u64 {
        let p = self.n_processes as u64;
        self.n_atoms / p + u64::from((process as u64) < self.n_atoms % p)
    }
}

/// Sizes a Si_N system from the fixture template.
pub fn derive_system(n_atoms: u64, fixture: &CalibrationFixture, n_processes: u32) -> Result<SystemSpec> {
    if n_atoms == 0 {
        return Err(SimError::domain("n_atoms must be >= 1"));
    }
    let w = &fixture.workload;
    let spec = SystemSpec {
        n_atoms,
        n_valence: w.nv_per_atom * n_atoms,
        n_conduction: w.nc_per_atom * n_atoms,
        n_grid: w.nr_per_atom * n_atoms,
        n_processes,
    };
    spec.validate()?;
    Ok(spec)
}
