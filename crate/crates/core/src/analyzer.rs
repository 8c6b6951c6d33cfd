//! Roofline analysis of kernel descriptors: arithmetic intensity, bound
//! classification and execution-time estimates per unit.

use std::io::Write;

use crate::error::{Result, SimError};
use crate::machine::{MachineConfig, UnitClass, UnitRef};
use crate::workload::{KernelCost, KernelFamily, TaskGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    ComputeBound,
    MemoryBound,
}

impl Bound {
    pub fn as_str(self) -> &'static str {
        match self {
            Bound::ComputeBound => "ComputeBound",
            Bound::MemoryBound => "MemoryBound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub ai: f64,
    pub bound: Bound,
    pub ridge_used: f64,
    pub unit_class: UnitClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitingTerm {
    Compute,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEstimate {
    pub seconds: f64,
    pub limiting_term: LimitingTerm,
    pub unit: UnitRef,
}

pub fn arithmetic_intensity(cost: &KernelCost) -> Result<f64> {
    let bytes = cost.bytes();
    if !(bytes > 0.0) {
        return Err(SimError::domain("kernel has no memory traffic"));
    }
    Ok(cost.flops / bytes)
}

/// Ties at the ridge point classify as compute-bound.
pub fn classify(cost: &KernelCost, unit_class: UnitClass, cfg: &MachineConfig) -> Result<Classification> {
    let ai = arithmetic_intensity(cost)?;
    let ridge = cfg.ridge_point(unit_class)?;
    Ok(Classification {
        ai,
        bound: if ai >= ridge {
            Bound::ComputeBound
        } else {
            Bound::MemoryBound
        },
        ridge_used: ridge,
        unit_class,
    })
}

/// Roofline time of `cost` on one unit plus its launch latency. Work split
/// over several units must be divided by the caller first.
pub fn estimate_time(cost: &KernelCost, unit: UnitRef, cfg: &MachineConfig) -> TimeEstimate {
    let class = unit.class();
    let compute = cost.flops / cfg.peak_flops(class);
    let memory = cost.bytes() / cfg.unit_bandwidth(class);
    let (t, limiting_term) = if compute >= memory {
        (compute, LimitingTerm::Compute)
    } else {
        (memory, LimitingTerm::Memory)
    };
    TimeEstimate {
        seconds: t + cfg.launch_latency(class),
        limiting_term,
        unit,
    }
}

/// Total cost of every task of `family` in `g`, i.e. the family as one stage.
pub fn family_cost(g: &TaskGraph, family: KernelFamily) -> Option<KernelCost> {
    let mut total = KernelCost {
        flops: 0.0,
        bytes_read: 0.0,
        bytes_written: 0.0,
    };
    let mut any = false;
    for t in g.tasks.iter().filter(|t| t.family == family) {
        any = true;
        total.flops += t.flops;
        total.bytes_read += t.bytes_read;
        total.bytes_written += t.bytes_written;
    }
    any.then_some(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationRow {
    pub family: KernelFamily,
    pub system: String,
    pub classification: Classification,
}

/// Classifies each kernel family present in `g` on each unit class.
pub fn classification_table(g: &TaskGraph, system: &str, cfg: &MachineConfig) -> Result<Vec<ClassificationRow>> {
    let mut rows = Vec::new();
    for family in KernelFamily::MODELED {
        let Some(cost) = family_cost(g, family) else {
            continue;
        };
        for class in [UnitClass::Cpu, UnitClass::Ndp] {
            rows.push(ClassificationRow {
                family,
                system: system.to_string(),
                classification: classify(&cost, class, cfg)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_classification_csv<W: Write>(rows: &[ClassificationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SimError::Io(e.to_string());
    w.write_record(["kernel_family", "system", "unit_class", "ai", "ridge", "bound"])
        .map_err(io)?;
    for r in rows {
        let c = &r.classification;
        w.write_record([
            r.family.name().to_string(),
            r.system.clone(),
            c.unit_class.as_str().to_string(),
            c.ai.to_string(),
            c.ridge_used.to_string(),
            c.bound.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{kernel_cost, FamilyCoefs, KernelShape};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1e-12)
    }

    #[test]
    fn intensities() {
        let g = kernel_cost(KernelShape::Gemm { m: 256.0, n: 256.0, k: 256.0 }, FamilyCoefs::UNIT).unwrap();
        assert!(close(arithmetic_intensity(&g).unwrap(), 33_554_432.0 / 1_572_864.0));
        let f = kernel_cost(KernelShape::Fft { n: 4096 }, FamilyCoefs::UNIT).unwrap();
        assert_eq!(arithmetic_intensity(&f).unwrap(), 1.875);
        let zero = KernelCost { flops: 0.0, bytes_read: 0.0, bytes_written: 0.0 };
        assert!(arithmetic_intensity(&zero).is_err());
    }

    #[test]
    fn ridge_tie_is_compute_bound() {
        let cfg = MachineConfig::default();
        let c = KernelCost { flops: 300.0, bytes_read: 100.0, bytes_written: 0.0 };
        assert_eq!(classify(&c, UnitClass::Cpu, &cfg).unwrap().bound, Bound::ComputeBound);
    }

    #[test]
    fn fft_estimates() {
        let cfg = MachineConfig::default();
        let f = kernel_cost(KernelShape::Fft { n: 4096 }, FamilyCoefs::UNIT).unwrap();
        let ndp = estimate_time(&f, UnitRef::Ndp { stack: 0, unit: 0 }, &cfg);
        assert!(close(ndp.seconds, 245_760.0 / 4e9 + 1e-6));
        assert_eq!(ndp.limiting_term, LimitingTerm::Compute);
        let cpu = estimate_time(&f, UnitRef::Cpu, &cfg);
        assert!(close(cpu.seconds, 131_072.0 / 64e9 + 2e-6));
        assert_eq!(cpu.limiting_term, LimitingTerm::Memory);
    }

    #[test]
    fn classification_csv_header() {
        let mut buf = Vec::new();
        write_classification_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "kernel_family,system,unit_class,ai,ridge,bound\n");
    }
}
