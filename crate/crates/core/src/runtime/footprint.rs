//! Calibrated memory-footprint model of pseudopotential storage.
//!
//! A footprint is `base + copies * per_process`, where `copies` is the
//! process count for private copies and a fixed overhead factor for the
//! shared-block layout. `base` and `per_process` are calibrated at two
//! reference system sizes and interpolated as power laws in between.

use serde::{Deserialize, Serialize};

use super::PseudoMode;
use crate::error::{Diagnostic, Result, SimError};
use crate::machine::UnitClass;

pub const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootprintParams {
    pub small_atoms: u64,
    pub large_atoms: u64,
    /// Process count of the host baseline.
    pub cpu_processes: u32,
    /// Process count on the NDP system (one per unit).
    pub ndp_processes: u32,
    pub small_base_bytes: f64,
    pub small_per_process_bytes: f64,
    pub large_base_bytes: f64,
    pub large_per_process_bytes: f64,
    /// Copies-equivalent of the shared layout: one distributed copy plus
    /// directory, index tables and arbiter caches.
    pub shared_mode_overhead_factor: f64,
}

/// Two measured per-copy footprints at one system size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintCells {
    pub cpu_bytes: f64,
    pub ndp_bytes: f64,
}

impl FootprintParams {
    /// Solves `base + n * per` through the CPU and NDP cells at both sizes and
    /// fits the shared factor so the large NDP footprint shrinks by `reduction`.
    pub fn fit(
        small_atoms: u64,
        large_atoms: u64,
        cpu_processes: u32,
        ndp_processes: u32,
        small: FootprintCells,
        large: FootprintCells,
        reduction: f64,
    ) -> Result<Self> {
        if ndp_processes <= cpu_processes {
            return Err(SimError::domain(
                "footprint fit needs more NDP processes than CPU processes",
            ));
        }
        let solve = |c: FootprintCells| {
            let per = (c.ndp_bytes - c.cpu_bytes) / (ndp_processes - cpu_processes) as f64;
            (c.cpu_bytes - cpu_processes as f64 * per, per)
        };
        let (small_base, small_per) = solve(small);
        let (large_base, large_per) = solve(large);
        let shared = large.ndp_bytes * (1.0 - reduction);
        let params = Self {
            small_atoms,
            large_atoms,
            cpu_processes,
            ndp_processes,
            small_base_bytes: small_base,
            small_per_process_bytes: small_per,
            large_base_bytes: large_base,
            large_per_process_bytes: large_per,
            shared_mode_overhead_factor: (shared - large_base) / large_per,
        };
        match params.diagnostics("footprint").first() {
            Some(d) => Err(SimError::config(d.path.clone(), d.message.clone())),
            None => Ok(params),
        }
    }

    pub fn processes(&self, arch: UnitClass) -> u32 {
        match arch {
            UnitClass::Cpu => self.cpu_processes,
            UnitClass::Ndp => self.ndp_processes,
        }
    }

    /// `(base, per_process)` at `n_atoms`.
    pub fn terms(&self, n_atoms: u64) -> Result<(f64, f64)> {
        if let Some(d) = self.diagnostics("footprint").first() {
            return Err(SimError::config(d.path.clone(), d.message.clone()));
        }
        if n_atoms == 0 {
            return Err(SimError::domain("n_atoms must be >= 1"));
        }
        let t = (n_atoms as f64 / self.small_atoms as f64).ln()
            / (self.large_atoms as f64 / self.small_atoms as f64).ln();
        let interp = |s: f64, l: f64| s * (l / s).powf(t);
        Ok((
            interp(self.small_base_bytes, self.large_base_bytes),
            interp(self.small_per_process_bytes, self.large_per_process_bytes),
        ))
    }

    pub fn diagnostics(&self, prefix: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut check = |key: &str, ok: bool, msg: &str| {
            if !ok {
                out.push(Diagnostic::new(format!("{prefix}.{key}"), msg));
            }
        };
        check("small_atoms", self.small_atoms >= 1, "must be >= 1");
        check(
            "large_atoms",
            self.large_atoms > self.small_atoms,
            "must exceed small_atoms",
        );
        check("cpu_processes", self.cpu_processes >= 1, "must be >= 1");
        check("ndp_processes", self.ndp_processes >= 1, "must be >= 1");
        for (key, v) in [
            ("small_base_bytes", self.small_base_bytes),
            ("small_per_process_bytes", self.small_per_process_bytes),
            ("large_base_bytes", self.large_base_bytes),
            ("large_per_process_bytes", self.large_per_process_bytes),
        ] {
            check(key, v > 0.0 && v.is_finite(), "must be > 0");
        }
        check(
            "shared_mode_overhead_factor",
            self.shared_mode_overhead_factor >= 1.0 && self.shared_mode_overhead_factor.is_finite(),
            "must be >= 1",
        );
        out
    }
}

impl Default for FootprintParams {
    /// Calibrated against measured footprints of Si_64 and Si_1024 on 24 host
    /// and 128 NDP processes, with the shared layout saving 57.8% at Si_1024.
    fn default() -> Self {
        Self::fit(
            64,
            1024,
            24,
            128,
            FootprintCells {
                cpu_bytes: 1.84 * GIB,
                ndp_bytes: 4.43 * GIB,
            },
            FootprintCells {
                cpu_bytes: 13.8 * GIB,
                ndp_bytes: 35.3 * GIB,
            },
            0.578,
        )
        .expect("reference footprint cells are consistent")
    }
}

/// Pseudopotential footprint in bytes of a Si_`n_atoms` system.
pub fn footprint_model(
    n_atoms: u64,
    arch: UnitClass,
    mode: PseudoMode,
    params: &FootprintParams,
) -> Result<f64> {
    let (base, per) = params.terms(n_atoms)?;
    let copies = match mode {
        PseudoMode::PerProcessCopy => params.processes(arch) as f64,
        PseudoMode::SharedBlock => params.shared_mode_overhead_factor,
    };
    Ok(base + copies * per)
}

/// Footprint as a percentage of a memory of `capacity` bytes.
pub fn footprint_pct(bytes: f64, capacity: f64) -> f64 {
    100.0 * bytes / capacity
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_terms_reproduce_reference_cells() {
        let p = FootprintParams::default();
        let gb = |n, a, m| footprint_model(n, a, m, &p).unwrap() / GIB;
        assert!((gb(64, UnitClass::Cpu, PseudoMode::PerProcessCopy) - 1.84).abs() < 1e-9);
        assert!((gb(1024, UnitClass::Ndp, PseudoMode::PerProcessCopy) - 35.3).abs() < 1e-9);
        assert!((p.large_per_process_bytes / GIB - 0.2067).abs() < 1e-4);
        assert!((p.large_base_bytes / GIB - 8.84).abs() < 1e-2);
    }

    #[test]
    fn interpolation_is_monotone_between_sizes() {
        let p = FootprintParams::default();
        let mut prev = 0.0;
        for n in [16, 32, 64, 128, 256, 1024, 2048] {
            let b = footprint_model(n, UnitClass::Ndp, PseudoMode::PerProcessCopy, &p).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn uncalibrated_params_are_a_config_error() {
        let mut p = FootprintParams::default();
        p.large_per_process_bytes = 0.0;
        let err = footprint_model(64, UnitClass::Cpu, PseudoMode::SharedBlock, &p).unwrap_err();
        assert!(matches!(err, SimError::Config { ref path, .. } if path == "footprint.large_per_process_bytes"));
    }
}
