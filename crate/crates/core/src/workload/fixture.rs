//! Calibration fixture: every free constant of the cost model in one document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::KernelFamily;
use crate::error::{Diagnostic, Result, SimError};
use crate::runtime::footprint::FootprintParams;

/// Multipliers applied to a family's closed-form flop and byte counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyCoefs {
    pub flop_coef: f64,
    pub byte_coef: f64,
}

impl FamilyCoefs {
    pub const UNIT: FamilyCoefs = FamilyCoefs {
        flop_coef: 1.0,
        byte_coef: 1.0,
    };

    pub fn new(flop_coef: f64, byte_coef: f64) -> Self {
        Self {
            flop_coef,
            byte_coef,
        }
    }
}

/// System-size template and per-family cost coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub nv_per_atom: u64,
    pub nc_per_atom: u64,
    pub nr_per_atom: u64,
    /// Projector count `m` of each atom's pseudopotential block.
    pub projectors_per_atom: u32,
    /// Keyed by family name (`fft`, `face_split`, `gemm`, `alltoall`, `syevd`, `pseudo`).
    #[serde(flatten)]
    pub families: BTreeMap<String, FamilyCoefs>,
}

/// Reference outcomes the shipped scenarios are regressed against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    pub speedup_small: f64,
    pub speedup_large: f64,
    pub speedup_largest: f64,
    pub speedup_rel_tol: f64,
    pub max_overhead_frac: f64,
    pub shared_footprint_reduction: f64,
    pub shared_vs_cpu_large: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFixture {
    pub workload: WorkloadParams,
    pub footprint: FootprintParams,
    pub targets: Targets,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        let families = [
            (KernelFamily::Fft, FamilyCoefs::new(1.0, 2.0)),
            (KernelFamily::FaceSplit, FamilyCoefs::UNIT),
            (KernelFamily::Gemm, FamilyCoefs::UNIT),
            (KernelFamily::Alltoall, FamilyCoefs::UNIT),
            (KernelFamily::Syevd, FamilyCoefs::new(9.0, 4096.0)),
            (KernelFamily::Pseudo, FamilyCoefs::UNIT),
        ]
        .into_iter()
        .map(|(f, c)| (f.key().to_string(), c))
        .collect();
        Self {
            nv_per_atom: 2,
            nc_per_atom: 2,
            nr_per_atom: 4096,
            projectors_per_atom: 32,
            families,
        }
    }
}

impl Default for Targets {
    fn default() -> Self {
        Self {
            speedup_small: 1.9,
            speedup_large: 5.2,
            speedup_largest: 5.33,
            speedup_rel_tol: 0.25,
            max_overhead_frac: 0.06,
            shared_footprint_reduction: 0.578,
            shared_vs_cpu_large: 1.08,
        }
    }
}

impl Default for CalibrationFixture {
    fn default() -> Self {
        Self {
            workload: WorkloadParams::default(),
            footprint: FootprintParams::default(),
            targets: Targets::default(),
        }
    }
}

impl CalibrationFixture {
    pub fn coefs(&self, family: KernelFamily) -> Result<FamilyCoefs> {
        self.workload
            .families
            .get(family.key())
            .copied()
            .ok_or_else(|| {
                SimError::config(
                    format!("workload.{}", family.key()),
                    format!("missing coefficients for kernel family {}", family.name()),
                )
            })
    }

    /// Invariant violations, keyed by the paths the experiment file uses.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let w = &self.workload;
        for (key, v) in [
            ("nv_per_atom", w.nv_per_atom),
            ("nc_per_atom", w.nc_per_atom),
            ("nr_per_atom", w.nr_per_atom),
            ("projectors_per_atom", w.projectors_per_atom as u64),
        ] {
            if v == 0 {
                out.push(Diagnostic::new(format!("workload.{key}"), "must be >= 1"));
            }
        }
        for family in KernelFamily::MODELED {
            match w.families.get(family.key()) {
                None => out.push(Diagnostic::new(
                    format!("workload.{}", family.key()),
                    "missing family coefficients",
                )),
                Some(c) => {
                    for (k, v) in [("flop_coef", c.flop_coef), ("byte_coef", c.byte_coef)] {
                        if !(v > 0.0 && v.is_finite()) {
                            out.push(Diagnostic::new(
                                format!("workload.{}.{k}", family.key()),
                                "must be > 0",
                            ));
                        }
                    }
                }
            }
        }
        for key in w.families.keys() {
            if KernelFamily::from_key(key).is_none() {
                out.push(Diagnostic::new(
                    format!("workload.{key}"),
                    "unknown kernel family",
                ));
            }
        }
        out.extend(self.footprint.diagnostics("footprint"));
        out
    }
}
