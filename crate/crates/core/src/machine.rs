//! Hardware description of the CPU + NDP system and the roofline quantities
//! derived from it.
//!
//! The defaults describe the simulated machine: an 8-core 4-way superscalar
//! host at 3 GHz next to a 4 x 4 mesh of HBM2 stacks, each stack carrying 8
//! in-order NDP units (2 cores each, 2 GHz) in its logic layer.

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Result, SimError};

/// 2^30 bytes. Memory capacities and footprints are expressed in these units.
pub const GIB: f64 = 1_073_741_824.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpuConfig {
    pub cores: u32,
    pub freq_hz: f64,
    /// Instructions issued per cycle.
    pub issue_width: u32,
    /// Flops per issued instruction slot (2 models a fused multiply-add).
    pub fma_factor: u32,
    /// Host link bandwidth in bytes/s. Also the CPU's memory roof.
    pub link_bandwidth: f64,
    pub launch_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NdpConfig {
    pub stacks_x: u32,
    pub stacks_y: u32,
    pub units_per_stack: u32,
    pub cores_per_unit: u32,
    pub freq_hz: f64,
    pub capacity_per_unit_bytes: u64,
    pub spm_per_core_bytes: u64,
    pub spm_per_stack_bytes: u64,
    pub launch_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbmConfig {
    pub channels_per_stack: u32,
    pub bus_width_bits: u32,
    pub rate_hz: f64,
    /// Transfers per bus cycle (2 for double data rate).
    pub ddr_factor: u32,
    pub total_capacity_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectConfig {
    /// Bandwidth of one mesh link between neighbouring stacks, bytes/s.
    pub mesh_link_bandwidth: f64,
    pub hop_latency_s: f64,
}

/// Complete machine description. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub cpu: CpuConfig,
    pub ndp: NdpConfig,
    pub hbm: HbmConfig,
    pub interconnect: InterconnectConfig,
    /// Constant context-switch cost paid per CPU/NDP handoff, seconds.
    pub cxt_s: f64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            cpu: CpuConfig {
                cores: 8,
                freq_hz: 3.0e9,
                issue_width: 4,
                fma_factor: 2,
                link_bandwidth: 64.0e9,
                launch_latency_s: 2.0e-6,
            },
            ndp: NdpConfig {
                stacks_x: 4,
                stacks_y: 4,
                units_per_stack: 8,
                cores_per_unit: 2,
                freq_hz: 2.0e9,
                capacity_per_unit_bytes: 512 << 20,
                spm_per_core_bytes: 16 << 10,
                spm_per_stack_bytes: 256 << 10,
                launch_latency_s: 1.0e-6,
            },
            hbm: HbmConfig {
                channels_per_stack: 8,
                bus_width_bits: 128,
                rate_hz: 1.0e9,
                ddr_factor: 2,
                total_capacity_bytes: 64 << 30,
            },
            interconnect: InterconnectConfig {
                mesh_link_bandwidth: 32.0e9,
                hop_latency_s: 100.0e-9,
            },
            cxt_s: 5.0e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitClass {
    Cpu,
    Ndp,
}

impl UnitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitClass::Cpu => "CPU",
            UnitClass::Ndp => "NDP_UNIT",
        }
    }
}

/// A compute unit: the host CPU (all cores) or one NDP unit of one stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitRef {
    Cpu,
    Ndp { stack: u32, unit: u32 },
}

impl UnitRef {
    pub fn class(self) -> UnitClass {
        match self {
            UnitRef::Cpu => UnitClass::Cpu,
            UnitRef::Ndp { .. } => UnitClass::Ndp,
        }
    }

    pub fn stack(self) -> Option<u32> {
        match self {
            UnitRef::Cpu => None,
            UnitRef::Ndp { stack, .. } => Some(stack),
        }
    }

    pub fn unit(self) -> Option<u32> {
        match self {
            UnitRef::Cpu => None,
            UnitRef::Ndp { unit, .. } => Some(unit),
        }
    }
}

impl std::fmt::Display for UnitRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnitRef::Cpu => write!(f, "cpu"),
            UnitRef::Ndp { stack, unit } => write!(f, "ndp{stack}.{unit}"),
        }
    }
}

/// Where a data object lives. Host memory sits on the CPU side of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Host,
    Unit(UnitRef),
}

impl Location {
    /// Host memory and the CPU share one side of the CPU link.
    pub fn is_host_side(self) -> bool {
        matches!(self, Location::Host | Location::Unit(UnitRef::Cpu))
    }

    pub fn stack(self) -> Option<u32> {
        match self {
            Location::Unit(u) => u.stack(),
            Location::Host => None,
        }
    }
}

impl From<UnitRef> for Location {
    fn from(u: UnitRef) -> Self {
        Location::Unit(u)
    }
}

/// The memory paths whose bandwidth the model distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    StackLocal,
    CpuLink,
    MeshHop,
}

impl MachineConfig {
    pub fn total_stacks(&self) -> u32 {
        self.ndp.stacks_x * self.ndp.stacks_y
    }

    pub fn total_ndp_units(&self) -> u32 {
        self.total_stacks() * self.ndp.units_per_stack
    }

    pub fn total_ndp_cores(&self) -> u32 {
        self.total_ndp_units() * self.ndp.cores_per_unit
    }

    pub fn total_ndp_capacity(&self) -> u64 {
        self.total_ndp_units() as u64 * self.ndp.capacity_per_unit_bytes
    }

    /// Capacity of one stack's memory, which also bounds its shared spill region.
    pub fn stack_capacity(&self) -> u64 {
        self.ndp.units_per_stack as u64 * self.ndp.capacity_per_unit_bytes
    }

    /// Per-unit peak flop rate. NDP cores are scalar in-order (issue 1, no FMA).
    pub fn peak_flops(&self, class: UnitClass) -> f64 {
        match class {
            UnitClass::Cpu => {
                self.cpu.cores as f64
                    * self.cpu.freq_hz
                    * self.cpu.issue_width as f64
                    * self.cpu.fma_factor as f64
            }
            UnitClass::Ndp => self.ndp.cores_per_unit as f64 * self.ndp.freq_hz,
        }
    }

    pub fn bandwidth(&self, link: LinkKind) -> f64 {
        match link {
            LinkKind::StackLocal => {
                self.hbm.channels_per_stack as f64
                    * (self.hbm.bus_width_bits as f64 / 8.0)
                    * self.hbm.rate_hz
                    * self.hbm.ddr_factor as f64
            }
            LinkKind::CpuLink => self.cpu.link_bandwidth,
            LinkKind::MeshHop => self.interconnect.mesh_link_bandwidth,
        }
    }

    /// Bandwidth of a unit's nearest memory: the CPU link for the host, a
    /// uniform share of the stack bandwidth for an NDP unit.
    pub fn unit_bandwidth(&self, class: UnitClass) -> f64 {
        match class {
            UnitClass::Cpu => self.bandwidth(LinkKind::CpuLink),
            UnitClass::Ndp => {
                self.bandwidth(LinkKind::StackLocal) / self.ndp.units_per_stack as f64
            }
        }
    }

    pub fn launch_latency(&self, class: UnitClass) -> f64 {
        match class {
            UnitClass::Cpu => self.cpu.launch_latency_s,
            UnitClass::Ndp => self.ndp.launch_latency_s,
        }
    }

    pub fn ridge_point(&self, class: UnitClass) -> Result<f64> {
        let bw = self.unit_bandwidth(class);
        if bw <= 0.0 {
            return Err(SimError::domain(format!(
                "{} memory bandwidth is zero",
                class.as_str()
            )));
        }
        Ok(self.peak_flops(class) / bw)
    }

    pub fn attainable_perf(&self, class: UnitClass, ai: f64) -> Result<f64> {
        if ai.is_nan() || ai < 0.0 {
            return Err(SimError::domain(format!(
                "arithmetic intensity must be >= 0, got {ai}"
            )));
        }
        Ok(self
            .peak_flops(class)
            .min(ai * self.unit_bandwidth(class)))
    }

    /// Mesh coordinates of a stack, row-major over `stacks_x`.
    pub fn stack_coords(&self, stack: u32) -> (u32, u32) {
        (stack % self.ndp.stacks_x, stack / self.ndp.stacks_x)
    }

    pub fn stack_hops(&self, a: u32, b: u32) -> u32 {
        let (ax, ay) = self.stack_coords(a);
        let (bx, by) = self.stack_coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    /// All NDP units in stack-major order.
    pub fn ndp_units(&self) -> impl Iterator<Item = UnitRef> + '_ {
        let per = self.ndp.units_per_stack;
        (0..self.total_ndp_units()).map(move |i| UnitRef::Ndp {
            stack: i / per,
            unit: i % per,
        })
    }

    /// Dense index over all units: 0 is the CPU, NDP units follow stack-major.
    pub fn unit_index(&self, u: UnitRef) -> usize {
        match u {
            UnitRef::Cpu => 0,
            UnitRef::Ndp { stack, unit } => {
                1 + (stack * self.ndp.units_per_stack + unit) as usize
            }
        }
    }

    pub fn unit_at(&self, index: usize) -> UnitRef {
        if index == 0 {
            UnitRef::Cpu
        } else {
            let i = (index - 1) as u32;
            UnitRef::Ndp {
                stack: i / self.ndp.units_per_stack,
                unit: i % self.ndp.units_per_stack,
            }
        }
    }

    pub fn unit_count(&self) -> usize {
        1 + self.total_ndp_units() as usize
    }

    pub fn contains(&self, u: UnitRef) -> bool {
        match u {
            UnitRef::Cpu => true,
            UnitRef::Ndp { stack, unit } => {
                stack < self.total_stacks() && unit < self.ndp.units_per_stack
            }
        }
    }

    /// Lists every invariant violation, keyed by its path under `prefix`.
    pub fn diagnostics(&self, prefix: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut count = |key: &str, v: u64| {
            if v < 1 {
                out.push(Diagnostic::new(format!("{prefix}.{key}"), "must be >= 1"));
            }
        };
        count("cpu.cores", self.cpu.cores as u64);
        count("cpu.issue_width", self.cpu.issue_width as u64);
        count("cpu.fma_factor", self.cpu.fma_factor as u64);
        count("ndp.stacks_x", self.ndp.stacks_x as u64);
        count("ndp.stacks_y", self.ndp.stacks_y as u64);
        count("ndp.units_per_stack", self.ndp.units_per_stack as u64);
        count("ndp.cores_per_unit", self.ndp.cores_per_unit as u64);
        count("ndp.capacity_per_unit_bytes", self.ndp.capacity_per_unit_bytes);
        count("ndp.spm_per_core_bytes", self.ndp.spm_per_core_bytes);
        count("ndp.spm_per_stack_bytes", self.ndp.spm_per_stack_bytes);
        count("hbm.channels_per_stack", self.hbm.channels_per_stack as u64);
        count("hbm.bus_width_bits", self.hbm.bus_width_bits as u64);
        count("hbm.ddr_factor", self.hbm.ddr_factor as u64);
        count("hbm.total_capacity_bytes", self.hbm.total_capacity_bytes);

        let mut positive = |key: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Diagnostic::new(format!("{prefix}.{key}"), "must be > 0"));
            }
        };
        positive("cpu.freq_hz", self.cpu.freq_hz);
        positive("cpu.link_bandwidth", self.cpu.link_bandwidth);
        positive("ndp.freq_hz", self.ndp.freq_hz);
        positive("hbm.rate_hz", self.hbm.rate_hz);
        positive("interconnect.mesh_link_bandwidth", self.interconnect.mesh_link_bandwidth);

        let mut non_negative = |key: &str, v: f64| {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(Diagnostic::new(format!("{prefix}.{key}"), "must be >= 0"));
            }
        };
        non_negative("cpu.launch_latency_s", self.cpu.launch_latency_s);
        non_negative("ndp.launch_latency_s", self.ndp.launch_latency_s);
        non_negative("interconnect.hop_latency_s", self.interconnect.hop_latency_s);
        non_negative("cxt_s", self.cxt_s);

        if out.is_empty() && self.total_ndp_capacity() != self.hbm.total_capacity_bytes {
            out.push(Diagnostic::new(
                format!("{prefix}.hbm.total_capacity_bytes"),
                format!(
                    "must equal stacks x units_per_stack x capacity_per_unit_bytes = {}",
                    self.total_ndp_capacity()
                ),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.diagnostics("machine").into_iter().next() {
            None => Ok(()),
            Some(d) => Err(SimError::config(d.path, d.message)),
        }
    }
}
