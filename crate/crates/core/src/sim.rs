//! Deterministic execution of a schedule on the analytic machine model.
//!
//! Tasks run in topological order; each occupies its units for its roofline
//! duration once its inputs have arrived. Transfers, all-to-all exchanges and
//! pseudopotential block fetches reserve the links on their path (the CPU
//! link, or the directed mesh links of the XY route), so traffic sharing a
//! link queues first-come first-served.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::error::{Result, SimError};
use crate::machine::{MachineConfig, UnitClass, UnitRef};
use crate::runtime::{
    footprint_model, run_pseudopotential, CommStats, MemStats, PseudoMode, PseudoSetup,
};
use crate::scheduler::{
    task_duration, transfer_pieces, Endpoint, LinkBook, OverheadBreakdown, Placement, Schedule, Site,
};
use crate::workload::{CalibrationFixture, DataId, ExecMode, KernelFamily, SystemSpec, TaskGraph, TaskId};

pub const SCHEDULING_ROW: &str = "Scheduling";
pub const GLOBAL_COMM_ROW: &str = "GlobalComm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Transfer,
    Cxt,
    Exchange,
    BlockFetch,
    Task,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Transfer => "transfer",
            EventKind::Cxt => "cxt",
            EventKind::Exchange => "exchange",
            EventKind::BlockFetch => "block_fetch",
            EventKind::Task => "task",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub kind: EventKind,
    /// Executing unit for tasks, receiving side for data movement.
    pub unit: String,
    pub name: String,
    pub bytes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub makespan: f64,
    /// Busy time per kernel family (max over units), then the scheduling
    /// overhead and the busiest mesh link.
    pub per_family_time: Vec<(String, f64)>,
    pub overhead: OverheadBreakdown,
    /// Pseudopotential traffic plus stack-level legs of transfers and exchanges.
    pub comm: CommStats,
    pub footprints: BTreeMap<PseudoMode, f64>,
    pub pseudo_mem: Option<MemStats>,
    /// Sum of all executed wavefunction entries, when the kernel was executed.
    pub pseudo_checksum: Option<f64>,
    /// Busy time per unit, indexed like [`MachineConfig::unit_index`].
    pub unit_busy: Vec<f64>,
    /// First event start and last event end per unit (zeros when idle).
    pub unit_span: Vec<(f64, f64)>,
    pub timeline: Vec<TimelineEvent>,
}

impl SimulationReport {
    pub fn family_time(&self, row: &str) -> f64 {
        self.per_family_time
            .iter()
            .find(|(n, _)| n == row)
            .map(|(_, t)| *t)
            .unwrap_or(0.0)
    }

    /// Scheduling overhead as a share of the makespan.
    pub fn overhead_fraction(&self) -> Result<f64> {
        if self.makespan <= 0.0 {
            return Err(SimError::domain("overhead fraction of a zero-length run"));
        }
        Ok(self.overhead.total() / self.makespan)
    }

    pub fn bytes_of(&self, kind: EventKind) -> f64 {
        self.timeline.iter().filter(|e| e.kind == kind).map(|e| e.bytes).sum()
    }

    pub fn write_timeline_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SimError::Io(e.to_string());
        w.write_record(["t_start", "t_end", "kind", "unit", "task_or_object", "bytes"])
            .map_err(io)?;
        for e in &self.timeline {
            w.write_record([
                e.t_start.to_string(),
                e.t_end.to_string(),
                e.kind.as_str().to_string(),
                e.unit.clone(),
                e.name.clone(),
                e.bytes.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inputs of the pseudopotential trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// System the graph was built from; without it PSEUDO tasks are costed
    /// by the roofline alone and no footprints are reported.
    pub spec: Option<SystemSpec>,
    pub pseudo_mode: PseudoMode,
    pub seed: u64,
    pub execute_pseudo: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            spec: None,
            pseudo_mode: PseudoMode::SharedBlock,
            seed: 0,
            execute_pseudo: false,
        }
    }
}

fn endpoint_label(e: Endpoint) -> String {
    match e {
        Endpoint::HostSide => "cpu".to_string(),
        Endpoint::Stack(s) => format!("stack{s}"),
    }
}

fn count_leg(comm: &mut CommStats, from: Endpoint, to: Endpoint, bytes: f64) {
    if let (Endpoint::Stack(a), Endpoint::Stack(b)) = (from, to) {
        if a == b {
            comm.intra_stack_bytes += bytes.round() as u64;
        } else {
            comm.inter_stack_bytes += bytes.round() as u64;
            comm.inter_stack_messages += 1;
        }
    }
}

struct PendingPseudo {
    task: TaskId,
    unit: UnitRef,
    ready: f64,
    duration: f64,
}

struct Sim<'a> {
    g: &'a TaskGraph,
    s: &'a Schedule,
    cfg: &'a MachineConfig,
    fixture: &'a CalibrationFixture,
    opts: &'a SimOptions,
    links: LinkBook<'a>,
    unit_free: Vec<f64>,
    busy: BTreeMap<(KernelFamily, usize), f64>,
    unit_span: Vec<(f64, f64)>,
    finish: Vec<f64>,
    arrivals: HashMap<(DataId, Placement), f64>,
    transfers: HashMap<(DataId, Placement), usize>,
    timeline: Vec<(TimelineEvent, usize, usize)>,
    comm: CommStats,
    pending: Vec<PendingPseudo>,
    pseudo_mem: Option<MemStats>,
    pseudo_checksum: Option<f64>,
    pseudo_on_ndp: bool,
}

impl<'a> Sim<'a> {
    fn event(&mut self, t_start: f64, t_end: f64, kind: EventKind, unit: usize, label: String, name: &str, bytes: f64) {
        let seq = self.timeline.len();
        self.timeline.push((
            TimelineEvent {
                t_start,
                t_end,
                kind,
                unit: label,
                name: name.to_string(),
                bytes,
            },
            unit,
            seq,
        ));
    }

    fn touch_span(&mut self, idx: usize, start: f64, end: f64) {
        let span = &mut self.unit_span[idx];
        if span.0 == 0.0 && span.1 == 0.0 {
            *span = (start, end);
        } else {
            span.0 = span.0.min(start);
            span.1 = span.1.max(end);
        }
    }

    fn source(&self, d: DataId) -> Result<(Site, f64)> {
        match self.g.producer(d) {
            Some(p) => Ok((Site::At(self.s.placements[p.0]), self.finish[p.0])),
            None => self
                .g
                .data(d)
                .initial
                .map(|l| (Site::from_location(l), 0.0))
                .ok_or_else(|| SimError::Schedule(format!("data {} has no source", self.g.data(d).name))),
        }
    }

    fn dst_index(&self, p: Placement, to: Endpoint) -> usize {
        match (p, to) {
            (Placement::Single(u), _) => self.cfg.unit_index(u),
            (Placement::AllNdp, Endpoint::Stack(s)) => self.cfg.unit_index(UnitRef::Ndp { stack: s, unit: 0 }),
            (Placement::AllNdp, Endpoint::HostSide) => 0,
        }
    }

    /// Runs transfer `i` (once) and returns when its data is usable at the destination.
    fn run_transfer(&mut self, i: usize, avail: f64) -> f64 {
        let tr = &self.s.transfers[i];
        let key = (tr.data, tr.dst);
        if let Some(&t) = self.arrivals.get(&key) {
            return t;
        }
        let (data, bytes, src, dst, crossing) = (tr.data, tr.bytes, tr.src, tr.dst, tr.crossing);
        let name = self.g.data(data).name.clone();
        let mut arrival = avail;
        for p in transfer_pieces(bytes, src, dst, self.cfg) {
            let (start, end) = self.links.reserve(p.from, p.to, p.bytes, avail);
            count_leg(&mut self.comm, p.from, p.to, p.bytes);
            let idx = self.dst_index(dst, p.to);
            self.event(start, end, EventKind::Transfer, idx, endpoint_label(p.to), &name, p.bytes);
            arrival = arrival.max(end);
        }
        if crossing {
            let idx = self.dst_index(dst, Endpoint::HostSide);
            let label = dst.to_string();
            self.event(arrival, arrival + self.cfg.cxt_s, EventKind::Cxt, idx, label, &name, 0.0);
            arrival += self.cfg.cxt_s;
        }
        self.arrivals.insert(key, arrival);
        arrival
    }

    /// Partition exchange of a collective on all NDP units: every input
    /// partition is split evenly over the destination units, aggregated per
    /// (source stack, destination stack).
    fn run_exchange(&mut self, t: TaskId, inputs: &[(DataId, Site)], start: f64) -> f64 {
        let units = self.cfg.total_ndp_units() as usize;
        let stacks = self.cfg.total_stacks();
        let per_stack = self.cfg.ndp.units_per_stack as f64;
        let mut legs: BTreeMap<(Endpoint, Endpoint), f64> = BTreeMap::new();
        for &(d, site) in inputs {
            let bytes = self.g.data(d).bytes;
            let Site::At(p) = site else { continue };
            for (from, share) in p.endpoints(self.cfg) {
                for s in 0..stacks {
                    *legs.entry((from, Endpoint::Stack(s))).or_default() +=
                        bytes * share * per_stack / units as f64;
                }
            }
        }
        let name = self.g.task(t).name.clone();
        let mut end = start;
        for ((from, to), bytes) in legs {
            let (s0, e0) = self.links.reserve(from, to, bytes, start);
            count_leg(&mut self.comm, from, to, bytes);
            let idx = self.dst_index(Placement::AllNdp, to);
            self.event(s0, e0, EventKind::Exchange, idx, endpoint_label(to), &name, bytes);
            end = end.max(e0);
        }
        end
    }

    fn record_task(&mut self, t: TaskId, p: Placement, start: f64, end: f64) {
        let task = self.g.task(t);
        let (family, name) = (task.family, task.name.clone());
        for u in p.units(self.cfg) {
            let idx = self.cfg.unit_index(u);
            self.unit_free[idx] = end;
            *self.busy.entry((family, idx)).or_default() += end - start;
            self.touch_span(idx, start, end);
            self.event(start, end, EventKind::Task, idx, u.to_string(), &name, 0.0);
        }
        self.finish[t.0] = end;
    }

    fn free_at(&self, p: Placement) -> f64 {
        p.units(self.cfg)
            .into_iter()
            .map(|u| self.unit_free[self.cfg.unit_index(u)])
            .fold(0.0, f64::max)
    }

    fn step(&mut self, t: TaskId) -> Result<()> {
        let task = self.g.task(t);
        let p = self.s.placements[t.0];
        let mut ready: f64 = 0.0;
        let mut exchanged = Vec::new();
        for &d in &task.inputs {
            let (src, avail) = self.source(d)?;
            if src.serves(p) {
                ready = ready.max(avail);
            } else if task.exec == ExecMode::Collective && p == Placement::AllNdp && src.class() == UnitClass::Ndp {
                exchanged.push((d, src));
                ready = ready.max(avail);
            } else {
                let i = *self.transfers.get(&(d, p)).ok_or_else(|| {
                    SimError::Schedule(format!(
                        "no transfer brings {} to {} for {}",
                        self.g.data(d).name,
                        p,
                        task.name
                    ))
                })?;
                ready = ready.max(self.run_transfer(i, avail));
            }
        }
        let duration = task_duration(task, p, self.cfg);
        if task.family == KernelFamily::Pseudo && self.pseudo_on_ndp {
            if let Placement::Single(unit) = p {
                self.pending.push(PendingPseudo {
                    task: t,
                    unit,
                    ready,
                    duration,
                });
                return Ok(());
            }
        }
        let mut start = ready.max(self.free_at(p));
        if !exchanged.is_empty() {
            start = start.max(self.run_exchange(t, &exchanged, start));
        }
        self.record_task(t, p, start, start + duration);
        Ok(())
    }

    /// Resolves deferred pseudopotential tasks: block fetches can only start
    /// once both the requester and the owning process have started.
    fn flush_pseudo(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let pending = std::mem::take(&mut self.pending);
        let spec = self.opts.spec.expect("trace only enabled with a system spec");
        let mut by_process = vec![None; spec.n_processes as usize];
        for (i, pp) in pending.iter().enumerate() {
            if let Some(r) = self.g.task(pp.task).process {
                by_process[r as usize] = Some(i);
            }
        }
        let layout: Vec<UnitRef> = by_process
            .iter()
            .map(|i| pending[i.expect("checked before deferring")].unit)
            .collect();

        // Tentative starts ignoring fetch delays.
        let mut cursor = self.unit_free.clone();
        let mut tentative = Vec::with_capacity(pending.len());
        for pp in &pending {
            let idx = self.cfg.unit_index(pp.unit);
            let st = pp.ready.max(cursor[idx]);
            cursor[idx] = st + pp.duration;
            tentative.push(st);
        }

        let setup = PseudoSetup {
            cfg: self.cfg,
            projectors: self.fixture.workload.projectors_per_atom,
            layout,
            execute: self.opts.execute_pseudo,
        };
        let out = run_pseudopotential(&spec, self.opts.pseudo_mode, self.opts.seed, &setup)?;
        let mut fetched = vec![0.0f64; pending.len()];
        for m in &out.messages {
            let req = by_process[m.process as usize].expect("layout covers all processes");
            let own = by_process[m.owner_process as usize].expect("layout covers all processes");
            let ready = tentative[req].max(tentative[own]);
            let (from, to) = (Endpoint::Stack(m.from_stack), Endpoint::Stack(m.to_stack));
            let (s0, e0) = self.links.reserve(from, to, m.bytes as f64, ready);
            let idx = self.cfg.unit_index(pending[req].unit);
            let label = pending[req].unit.to_string();
            let name = format!("pp_block.{}", m.owner_process);
            self.event(s0, e0, EventKind::BlockFetch, idx, label, &name, m.bytes as f64);
            fetched[req] = fetched[req].max(e0);
        }
        for (i, pp) in pending.iter().enumerate() {
            let idx = self.cfg.unit_index(pp.unit);
            let start = pp.ready.max(self.unit_free[idx]).max(fetched[i]);
            self.record_task(pp.task, Placement::Single(pp.unit), start, start + pp.duration);
        }
        self.comm.merge(&out.comm);
        self.pseudo_mem = Some(out.mem);
        if !out.wavefunctions.is_empty() {
            self.pseudo_checksum = Some(out.wavefunctions.iter().flatten().sum());
        }
        Ok(())
    }
}

fn validate(s: &Schedule, g: &TaskGraph, cfg: &MachineConfig) -> Result<()> {
    if s.placements.len() != g.tasks.len() {
        return Err(SimError::Schedule(format!(
            "schedule places {} of {} tasks",
            s.placements.len(),
            g.tasks.len()
        )));
    }
    for (i, p) in s.placements.iter().enumerate() {
        if let Placement::Single(u) = p {
            if !cfg.contains(*u) {
                return Err(SimError::Schedule(format!("{} placed on unknown unit {u}", g.tasks[i].name)));
            }
        }
    }
    for tr in &s.transfers {
        if tr.data.0 >= g.data_objects.len() || tr.cause.0 >= g.tasks.len() {
            return Err(SimError::Schedule("transfer references a missing entity".into()));
        }
    }
    Ok(())
}

/// Whether the PSEUDO tasks form one NDP-resident process group that the
/// runtime trace can lay out (one single-unit task per process rank).
fn pseudo_trace_applies(s: &Schedule, g: &TaskGraph, spec: Option<&SystemSpec>) -> bool {
    let Some(spec) = spec else { return false };
    let pseudo: Vec<usize> = (0..g.tasks.len()).filter(|&i| g.tasks[i].family == KernelFamily::Pseudo).collect();
    if pseudo.len() != spec.n_processes as usize {
        return false;
    }
    let mut seen = vec![false; spec.n_processes as usize];
    for &i in &pseudo {
        let ok_unit = matches!(s.placements[i], Placement::Single(UnitRef::Ndp { .. }));
        let ok_input = g.tasks[i].inputs.iter().all(|&d| g.producer(d).is_none());
        match g.tasks[i].process {
            Some(r) if ok_unit && ok_input && (r as usize) < seen.len() && !seen[r as usize] => seen[r as usize] = true,
            _ => return false,
        }
    }
    true
}

pub fn simulate(
    s: &Schedule,
    g: &TaskGraph,
    cfg: &MachineConfig,
    fixture: &CalibrationFixture,
    opts: &SimOptions,
) -> Result<SimulationReport> {
    validate(s, g, cfg)?;
    let order = g.topo_order()?;
    let mut sim = Sim {
        g,
        s,
        cfg,
        fixture,
        opts,
        links: LinkBook::new(cfg),
        unit_free: vec![0.0; cfg.unit_count()],
        busy: BTreeMap::new(),
        unit_span: vec![(0.0, 0.0); cfg.unit_count()],
        finish: vec![0.0; g.tasks.len()],
        arrivals: HashMap::new(),
        transfers: s
            .transfers
            .iter()
            .enumerate()
            .map(|(i, t)| ((t.data, t.dst), i))
            .collect(),
        timeline: Vec::new(),
        comm: CommStats::default(),
        pending: Vec::new(),
        pseudo_mem: None,
        pseudo_checksum: None,
        pseudo_on_ndp: pseudo_trace_applies(s, g, opts.spec.as_ref()),
    };
    for t in order {
        if g.task(t).family != KernelFamily::Pseudo {
            sim.flush_pseudo()?;
        }
        sim.step(t)?;
    }
    sim.flush_pseudo()?;

    // Data movement ends count toward each receiving unit's span.
    for (e, idx, _) in &sim.timeline {
        if e.kind != EventKind::Task {
            let span = &mut sim.unit_span[*idx];
            if span.0 == 0.0 && span.1 == 0.0 {
                *span = (e.t_start, e.t_end);
            } else {
                span.0 = span.0.min(e.t_start);
                span.1 = span.1.max(e.t_end);
            }
        }
    }
    let mut timeline = std::mem::take(&mut sim.timeline);
    timeline.sort_by(|a, b| {
        a.0.t_start
            .total_cmp(&b.0.t_start)
            .then(a.0.kind.cmp(&b.0.kind))
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let makespan = timeline.iter().map(|(e, _, _)| e.t_end).fold(0.0, f64::max);

    let mut unit_busy = vec![0.0; cfg.unit_count()];
    let mut per_family_time = Vec::new();
    for family in KernelFamily::MODELED.into_iter().chain([KernelFamily::Other]) {
        let mut max: f64 = 0.0;
        for (&(f, idx), &b) in &sim.busy {
            if f == family {
                max = max.max(b);
                unit_busy[idx] += b;
            }
        }
        if family != KernelFamily::Other || max > 0.0 {
            per_family_time.push((family.name().to_string(), max));
        }
    }
    per_family_time.push((SCHEDULING_ROW.to_string(), s.overhead.total()));
    per_family_time.push((GLOBAL_COMM_ROW.to_string(), sim.links.max_mesh_busy()));

    let mut footprints = BTreeMap::new();
    if let Some(spec) = &opts.spec {
        let pseudo_class = g
            .tasks
            .iter()
            .position(|t| t.family == KernelFamily::Pseudo)
            .map(|i| s.placements[i].class())
            .unwrap_or(UnitClass::Cpu);
        for mode in PseudoMode::ALL {
            footprints.insert(mode, footprint_model(spec.n_atoms, pseudo_class, mode, &fixture.footprint)?);
        }
    }

    Ok(SimulationReport {
        makespan,
        per_family_time,
        overhead: s.overhead,
        comm: sim.comm,
        footprints,
        pseudo_mem: sim.pseudo_mem,
        pseudo_checksum: sim.pseudo_checksum,
        unit_busy,
        unit_span: sim.unit_span,
        timeline: timeline.into_iter().map(|(e, _, _)| e).collect(),
    })
}

/// One labelled report relative to the first (baseline) report.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub makespan: f64,
    /// `makespan(baseline) / makespan(this)`.
    pub speedup: f64,
    pub overhead_frac: f64,
    /// Baseline time over this report's time per breakdown row; `None` when
    /// either side is zero.
    pub family_ratios: Vec<(String, Option<f64>)>,
}

pub fn speedup(a: &SimulationReport, b: &SimulationReport) -> Result<f64> {
    if a.makespan <= 0.0 {
        return Err(SimError::domain("speedup over a zero makespan"));
    }
    Ok(b.makespan / a.makespan)
}

/// Compares every report against the first one.
pub fn compare(reports: &[(String, &SimulationReport)]) -> Result<Vec<ComparisonRow>> {
    if reports.len() < 2 {
        return Err(SimError::domain("comparison needs at least two reports"));
    }
    let base = reports[0].1;
    reports
        .iter()
        .map(|(label, r)| {
            let family_ratios = base
                .per_family_time
                .iter()
                .map(|(name, tb)| {
                    let ta = r.family_time(name);
                    (name.clone(), (ta > 0.0 && *tb > 0.0).then(|| tb / ta))
                })
                .collect();
            Ok(ComparisonRow {
                label: label.clone(),
                makespan: r.makespan,
                speedup: speedup(r, base)?,
                overhead_frac: r.overhead_fraction()?,
                family_ratios,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Location;
    use crate::scheduler::Policy;
    use crate::workload::KernelCost;

    fn one_task_graph(initial: Location) -> TaskGraph {
        let mut g = TaskGraph::new();
        let a = g.add_data("in", 1e6, Some(initial));
        let b = g.add_data("out", 8.0, None);
        g.mark_terminal(b);
        let cost = KernelCost { flops: 1e9, bytes_read: 1e6, bytes_written: 8.0 };
        g.add_task("k", KernelFamily::Other, cost, 1.0, ExecMode::Single, vec![a], vec![b]).unwrap();
        g
    }

    #[test]
    fn empty_schedule_has_zero_makespan() {
        let cfg = MachineConfig::default();
        let r = simulate(&Schedule::empty(Policy::Hybrid), &TaskGraph::new(), &cfg, &CalibrationFixture::default(), &SimOptions::default()).unwrap();
        assert_eq!(r.makespan, 0.0);
        assert!(r.timeline.is_empty());
    }

    #[test]
    fn single_task_makespan_is_transfer_plus_estimate() {
        let cfg = MachineConfig::default();
        let g = one_task_graph(Location::Host);
        let unit = UnitRef::Ndp { stack: 2, unit: 1 };
        let s = Schedule::from_placements(&g, &cfg, Policy::NdpOnly, vec![Placement::Single(unit)], vec![0.0]).unwrap();
        let r = simulate(&s, &g, &cfg, &CalibrationFixture::default(), &SimOptions::default()).unwrap();
        let expected = crate::scheduler::transfer_cost(1e6, Location::Host, Location::Unit(unit), &cfg).unwrap()
            + crate::analyzer::estimate_time(&g.tasks[0].cost(), unit, &cfg).seconds;
        assert!((r.makespan - expected).abs() < 1e-15);
    }

    #[test]
    fn independent_tasks_overlap() {
        let cfg = MachineConfig::default();
        let mut g = TaskGraph::new();
        let cost = KernelCost { flops: 1e9, bytes_read: 1e3, bytes_written: 0.0 };
        for i in 0..2 {
            let a = g.add_data(format!("in{i}"), 8.0, Some(Location::Unit(UnitRef::Ndp { stack: i, unit: 0 })));
            let b = g.add_data(format!("out{i}"), 8.0, None);
            g.mark_terminal(b);
            g.add_task(format!("k{i}"), KernelFamily::Other, cost, 1.0, ExecMode::Single, vec![a], vec![b]).unwrap();
        }
        let p = vec![
            Placement::Single(UnitRef::Ndp { stack: 0, unit: 0 }),
            Placement::Single(UnitRef::Ndp { stack: 1, unit: 0 }),
        ];
        let s = Schedule::from_placements(&g, &cfg, Policy::NdpOnly, p, vec![0.0; 2]).unwrap();
        let r = simulate(&s, &g, &cfg, &CalibrationFixture::default(), &SimOptions::default()).unwrap();
        let single = crate::analyzer::estimate_time(&cost, UnitRef::Ndp { stack: 0, unit: 0 }, &cfg).seconds;
        assert!((r.makespan - single).abs() < 1e-15);
    }

    #[test]
    fn compare_identical_reports() {
        let cfg = MachineConfig::default();
        let g = one_task_graph(Location::Host);
        let s = Schedule::from_placements(&g, &cfg, Policy::CpuOnly, vec![Placement::CPU], vec![0.0]).unwrap();
        let r = simulate(&s, &g, &cfg, &CalibrationFixture::default(), &SimOptions::default()).unwrap();
        let rows = compare(&[("a".into(), &r), ("b".into(), &r)]).unwrap();
        assert_eq!(rows[1].speedup, 1.0);
        assert!(rows[1].family_ratios.iter().all(|(_, v)| v.is_none_or(|x| x == 1.0)));
        assert!(compare(&[("a".into(), &r)]).is_err());
    }
}
