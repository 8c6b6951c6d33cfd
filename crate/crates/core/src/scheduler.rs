//! Cost-aware function-level offloading: greedy list scheduling of a task
//! graph onto the CPU and NDP units, with the boundary-crossing overhead
//! (data transfer plus context switch per crossing) charged to each choice.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analyzer::estimate_time;
use crate::error::{Result, SimError};
use crate::machine::{LinkKind, Location, MachineConfig, UnitClass, UnitRef};
use crate::workload::{DataId, ExecMode, KernelDescriptor, TaskGraph, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Hybrid,
    CpuOnly,
    NdpOnly,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Hybrid, Policy::CpuOnly, Policy::NdpOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Hybrid => "hybrid",
            Policy::CpuOnly => "cpu_only",
            Policy::NdpOnly => "ndp_only",
        }
    }

    fn classes(self) -> &'static [UnitClass] {
        match self {
            Policy::Hybrid => &[UnitClass::Cpu, UnitClass::Ndp],
            Policy::CpuOnly => &[UnitClass::Cpu],
            Policy::NdpOnly => &[UnitClass::Ndp],
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Units a task runs on: one unit, or every NDP unit with the work divided evenly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placement {
    Single(UnitRef),
    AllNdp,
}

impl Placement {
    pub const CPU: Placement = Placement::Single(UnitRef::Cpu);

    pub fn class(self) -> UnitClass {
        match self {
            Placement::Single(u) => u.class(),
            Placement::AllNdp => UnitClass::Ndp,
        }
    }

    pub fn units(self, cfg: &MachineConfig) -> Vec<UnitRef> {
        match self {
            Placement::Single(u) => vec![u],
            Placement::AllNdp => cfg.ndp_units().collect(),
        }
    }

    pub fn width(self, cfg: &MachineConfig) -> u32 {
        match self {
            Placement::Single(_) => 1,
            Placement::AllNdp => cfg.total_ndp_units(),
        }
    }

    /// Share of an object held at each endpoint when it lives on this placement.
    pub fn endpoints(self, cfg: &MachineConfig) -> Vec<(Endpoint, f64)> {
        match self {
            Placement::Single(UnitRef::Cpu) => vec![(Endpoint::HostSide, 1.0)],
            Placement::Single(UnitRef::Ndp { stack, .. }) => vec![(Endpoint::Stack(stack), 1.0)],
            Placement::AllNdp => {
                let s = cfg.total_stacks();
                (0..s).map(|i| (Endpoint::Stack(i), 1.0 / s as f64)).collect()
            }
        }
    }
}

impl std::fmt::Display for Placement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Placement::Single(u) => write!(f, "{u}"),
            Placement::AllNdp => f.write_str("ndp*"),
        }
    }
}

/// Where a data object currently resides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    Host,
    At(Placement),
}

impl Site {
    pub fn from_location(loc: Location) -> Site {
        match loc {
            Location::Host => Site::Host,
            Location::Unit(u) => Site::At(Placement::Single(u)),
        }
    }

    pub fn class(self) -> UnitClass {
        match self {
            Site::Host => UnitClass::Cpu,
            Site::At(p) => p.class(),
        }
    }

    fn endpoints(self, cfg: &MachineConfig) -> Vec<(Endpoint, f64)> {
        match self {
            Site::Host => vec![(Endpoint::HostSide, 1.0)],
            Site::At(p) => p.endpoints(cfg),
        }
    }

    /// No movement needed to use the object at `dst`.
    pub fn serves(self, dst: Placement) -> bool {
        match self {
            Site::Host => dst == Placement::CPU,
            Site::At(p) => p == dst,
        }
    }
}

/// Granularity at which transfers are costed: host memory/CPU, or one stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    HostSide,
    Stack(u32),
}

/// One stack-level leg of a (possibly multi-unit) transfer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub from: Endpoint,
    pub to: Endpoint,
    pub bytes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub data: DataId,
    pub bytes: f64,
    pub src: Site,
    pub dst: Placement,
    /// First task at `dst` that needs the object.
    pub cause: TaskId,
    /// Produced on one side of the CPU/NDP boundary and consumed on the other.
    pub crossing: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OverheadBreakdown {
    pub dt_total: f64,
    pub cxt_total: f64,
    pub cxt_count: u64,
}

impl OverheadBreakdown {
    pub fn total(&self) -> f64 {
        self.dt_total + self.cxt_total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub policy: Policy,
    pub placements: Vec<Placement>,
    pub start_estimates: Vec<f64>,
    pub transfers: Vec<Transfer>,
    pub overhead: OverheadBreakdown,
}

fn check_unit(u: UnitRef, cfg: &MachineConfig) -> Result<()> {
    if cfg.contains(u) {
        Ok(())
    } else {
        Err(SimError::domain(format!("unknown location {u}")))
    }
}

/// Time to move `bytes` from `src` to `dst`: zero when co-located, otherwise
/// bandwidth time plus per-hop latency. The host and the CPU share one side
/// of the CPU link, whose far end enters the mesh at stack 0.
pub fn transfer_cost(bytes: f64, src: Location, dst: Location, cfg: &MachineConfig) -> Result<f64> {
    if bytes.is_nan() || bytes < 0.0 {
        return Err(SimError::domain(format!("transfer size must be >= 0, got {bytes}")));
    }
    let endpoint = |l: Location| -> Result<Endpoint> {
        match l {
            Location::Host | Location::Unit(UnitRef::Cpu) => Ok(Endpoint::HostSide),
            Location::Unit(u @ UnitRef::Ndp { stack, .. }) => {
                check_unit(u, cfg)?;
                Ok(Endpoint::Stack(stack))
            }
        }
    };
    let (a, b) = (endpoint(src)?, endpoint(dst)?);
    if src == dst || (a == Endpoint::HostSide && b == Endpoint::HostSide) {
        return Ok(0.0);
    }
    Ok(piece_cost(bytes, a, b, cfg))
}

pub fn piece_cost(bytes: f64, from: Endpoint, to: Endpoint, cfg: &MachineConfig) -> f64 {
    let lat = cfg.interconnect.hop_latency_s;
    match (from, to) {
        (Endpoint::HostSide, Endpoint::HostSide) => 0.0,
        (Endpoint::HostSide, Endpoint::Stack(s)) | (Endpoint::Stack(s), Endpoint::HostSide) => {
            bytes / cfg.bandwidth(LinkKind::CpuLink) + (1 + cfg.stack_hops(0, s)) as f64 * lat
        }
        (Endpoint::Stack(a), Endpoint::Stack(b)) if a == b => bytes / cfg.bandwidth(LinkKind::StackLocal),
        (Endpoint::Stack(a), Endpoint::Stack(b)) => {
            bytes / cfg.bandwidth(LinkKind::MeshHop) + cfg.stack_hops(a, b) as f64 * lat
        }
    }
}

/// Stack-level legs of moving an object from `src` to `dst`. Each destination
/// endpoint receives its share from every source endpoint in proportion.
pub fn transfer_pieces(bytes: f64, src: Site, dst: Placement, cfg: &MachineConfig) -> Vec<Piece> {
    if src.serves(dst) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (from, fs) in src.endpoints(cfg) {
        for (to, ts) in dst.endpoints(cfg) {
            out.push(Piece {
                from,
                to,
                bytes: bytes * fs * ts,
            });
        }
    }
    out
}

/// Estimated duration of a set transfer: legs over the CPU link serialize,
/// mesh and stack-local legs proceed in parallel.
pub fn site_transfer_time(bytes: f64, src: Site, dst: Placement, cfg: &MachineConfig) -> f64 {
    let mut link_bytes = 0.0;
    let mut link_latency: f64 = 0.0;
    let mut other: f64 = 0.0;
    for p in transfer_pieces(bytes, src, dst, cfg) {
        match (p.from, p.to) {
            (Endpoint::HostSide, Endpoint::HostSide) => {}
            (Endpoint::HostSide, Endpoint::Stack(s)) | (Endpoint::Stack(s), Endpoint::HostSide) => {
                link_bytes += p.bytes;
                link_latency = link_latency.max((1 + cfg.stack_hops(0, s)) as f64 * cfg.interconnect.hop_latency_s);
            }
            _ => other = other.max(piece_cost(p.bytes, p.from, p.to, cfg)),
        }
    }
    let link = if link_bytes > 0.0 || link_latency > 0.0 {
        link_bytes / cfg.bandwidth(LinkKind::CpuLink) + link_latency
    } else {
        0.0
    };
    link.max(other)
}

/// Estimated duration of an all-to-all of `bytes` over the whole mesh.
pub fn alltoall_estimate(bytes: f64, cfg: &MachineConfig) -> f64 {
    let s = cfg.total_stacks() as f64;
    if s <= 1.0 {
        return 0.0;
    }
    let diameter = (cfg.ndp.stacks_x - 1 + cfg.ndp.stacks_y - 1) as f64;
    bytes * (s - 1.0) / s / (s * cfg.bandwidth(LinkKind::MeshHop)) + diameter * cfg.interconnect.hop_latency_s
}

/// Scheduling overhead: transfer time plus one context switch for every transfer
/// that carries a task's output across the CPU/NDP boundary. Initial data
/// placement is not a task-to-task handoff and is not counted.
pub fn scheduling_overhead(s: &Schedule, cfg: &MachineConfig) -> OverheadBreakdown {
    let mut o = OverheadBreakdown::default();
    for t in s.transfers.iter().filter(|t| t.crossing) {
        o.dt_total += site_transfer_time(t.bytes, t.src, t.dst, cfg);
        o.cxt_count += 1;
    }
    o.cxt_total = o.cxt_count as f64 * cfg.cxt_s;
    o
}

const DIRS: usize = 4;

/// Link reservations shared by the planner and the simulator: index 0 is
/// the CPU link, then four outgoing mesh links per stack.
#[derive(Debug, Clone)]
pub(crate) struct LinkBook<'a> {
    cfg: &'a MachineConfig,
    free: Vec<f64>,
    busy: Vec<f64>,
}

impl<'a> LinkBook<'a> {
    pub(crate) fn new(cfg: &'a MachineConfig) -> Self {
        let n = 1 + DIRS * cfg.total_stacks() as usize;
        Self {
            cfg,
            free: vec![0.0; n],
            busy: vec![0.0; n],
        }
    }

    /// Directed mesh links of the X-then-Y route from `a` to `b`.
    fn route(&self, a: u32, b: u32) -> Vec<usize> {
        let sx = self.cfg.ndp.stacks_x;
        let (mut x, mut y) = self.cfg.stack_coords(a);
        let (tx, ty) = self.cfg.stack_coords(b);
        let mut out = Vec::new();
        let link = |x: u32, y: u32, dir: usize| 1 + DIRS * (y * sx + x) as usize + dir;
        while x != tx {
            if tx > x {
                out.push(link(x, y, 0));
                x += 1;
            } else {
                out.push(link(x, y, 1));
                x -= 1;
            }
        }
        while y != ty {
            if ty > y {
                out.push(link(x, y, 2));
                y += 1;
            } else {
                out.push(link(x, y, 3));
                y -= 1;
            }
        }
        out
    }

    fn resources(&self, from: Endpoint, to: Endpoint) -> Vec<usize> {
        match (from, to) {
            (Endpoint::HostSide, Endpoint::HostSide) => Vec::new(),
            (Endpoint::HostSide, _) | (_, Endpoint::HostSide) => vec![0],
            (Endpoint::Stack(a), Endpoint::Stack(b)) => self.route(a, b),
        }
    }

    /// Books a leg no earlier than `ready`; returns its (start, end).
    pub(crate) fn reserve(&mut self, from: Endpoint, to: Endpoint, bytes: f64, ready: f64) -> (f64, f64) {
        let res = self.resources(from, to);
        let dur = piece_cost(bytes, from, to, self.cfg);
        let start = res.iter().map(|&r| self.free[r]).fold(ready, f64::max);
        let end = start + dur;
        for r in res {
            self.free[r] = end;
            self.busy[r] += dur;
        }
        (start, end)
    }

    pub(crate) fn max_mesh_busy(&self) -> f64 {
        self.busy[1..].iter().copied().fold(0.0, f64::max)
    }
}

/// Whether a collective task on `dst` moves this input itself.
fn exchanged_by_collective(task: &KernelDescriptor, src: Site, dst: Placement) -> bool {
    task.exec == ExecMode::Collective && dst == Placement::AllNdp && src.class() == UnitClass::Ndp
}

fn input_site(g: &TaskGraph, d: DataId, placements: &[Placement]) -> Result<Site> {
    match g.producer(d) {
        Some(p) => Ok(Site::At(placements[p.0])),
        None => g
            .data(d)
            .initial
            .map(Site::from_location)
            .ok_or_else(|| SimError::Schedule(format!("data {} has no source", g.data(d).name))),
    }
}

impl Schedule {
    /// Builds the transfer list and overhead implied by a placement of every task.
    pub fn from_placements(
        g: &TaskGraph,
        cfg: &MachineConfig,
        policy: Policy,
        placements: Vec<Placement>,
        start_estimates: Vec<f64>,
    ) -> Result<Schedule> {
        if placements.len() != g.tasks.len() {
            return Err(SimError::Schedule(format!(
                "{} placements for {} tasks",
                placements.len(),
                g.tasks.len()
            )));
        }
        for p in &placements {
            if let Placement::Single(u) = p {
                if !cfg.contains(*u) {
                    return Err(SimError::Schedule(format!("placement on unknown unit {u}")));
                }
            }
        }
        let mut transfers = Vec::new();
        let mut seen = HashSet::new();
        for t in g.topo_order()? {
            let task = g.task(t);
            let dst = placements[t.0];
            for &d in &task.inputs {
                let src = input_site(g, d, &placements)?;
                if src.serves(dst) || exchanged_by_collective(task, src, dst) || !seen.insert((d, dst)) {
                    continue;
                }
                transfers.push(Transfer {
                    data: d,
                    bytes: g.data(d).bytes,
                    src,
                    dst,
                    cause: t,
                    crossing: g.producer(d).is_some() && src.class() != dst.class(),
                });
            }
        }
        let mut s = Schedule {
            policy,
            placements,
            start_estimates,
            transfers,
            overhead: OverheadBreakdown::default(),
        };
        s.overhead = scheduling_overhead(&s, cfg);
        Ok(s)
    }

    pub fn empty(policy: Policy) -> Schedule {
        Schedule {
            policy,
            placements: Vec::new(),
            start_estimates: Vec::new(),
            transfers: Vec::new(),
            overhead: OverheadBreakdown::default(),
        }
    }

    /// One row per (task, unit): `task_id, family, unit_class, stack_id, unit_id, start_estimate_s`.
    pub fn write_csv<W: Write>(&self, g: &TaskGraph, cfg: &MachineConfig, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SimError::Io(e.to_string());
        w.write_record(["task_id", "family", "unit_class", "stack_id", "unit_id", "start_estimate_s"])
            .map_err(io)?;
        for (i, p) in self.placements.iter().enumerate() {
            let t = &g.tasks[i];
            for u in p.units(cfg) {
                let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([
                    t.name.clone(),
                    t.family.name().to_string(),
                    u.class().as_str().to_string(),
                    opt(u.stack()),
                    opt(u.unit()),
                    self.start_estimates[i].to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Roofline duration of `task` on `placement`, work divided across its units.
pub fn task_duration(task: &KernelDescriptor, placement: Placement, cfg: &MachineConfig) -> f64 {
    let width = placement.width(cfg) as f64;
    let unit = match placement {
        Placement::Single(u) => u,
        Placement::AllNdp => UnitRef::Ndp { stack: 0, unit: 0 },
    };
    estimate_time(&task.cost().scaled(1.0 / width), unit, cfg).seconds
}

fn candidates(task: &KernelDescriptor, class: UnitClass, cfg: &MachineConfig) -> Vec<Placement> {
    match (class, task.exec) {
        (UnitClass::Cpu, _) => vec![Placement::CPU],
        (UnitClass::Ndp, ExecMode::Collective) => vec![Placement::AllNdp],
        (UnitClass::Ndp, ExecMode::Single) => cfg.ndp_units().map(Placement::Single).collect(),
        (UnitClass::Ndp, ExecMode::Splittable) => cfg
            .ndp_units()
            .map(Placement::Single)
            .chain([Placement::AllNdp])
            .collect(),
    }
}

/// Class on which `task` runs fastest in isolation; ties prefer the CPU.
fn preferred_class(task: &KernelDescriptor, policy: Policy, cfg: &MachineConfig) -> UnitClass {
    let classes = policy.classes();
    if classes.len() == 1 {
        return classes[0];
    }
    let cpu = task_duration(task, Placement::CPU, cfg);
    let ndp_single = task_duration(task, Placement::Single(UnitRef::Ndp { stack: 0, unit: 0 }), cfg);
    let ndp = match task.exec {
        ExecMode::Single => ndp_single,
        ExecMode::Splittable => ndp_single.min(task_duration(task, Placement::AllNdp, cfg)),
        ExecMode::Collective => task_duration(task, Placement::AllNdp, cfg) + alltoall_estimate(task.bytes_read, cfg),
    };
    if ndp < cpu {
        UnitClass::Ndp
    } else {
        UnitClass::Cpu
    }
}

#[derive(Debug, Clone, Copy)]
struct Evaluation {
    placement: Placement,
    start: f64,
    finish: f64,
    score: f64,
}

#[derive(Clone)]
struct Planner<'a> {
    g: &'a TaskGraph,
    cfg: &'a MachineConfig,
    policy: Policy,
    preferred: Vec<UnitClass>,
    unit_free: Vec<f64>,
    placements: Vec<Option<Placement>>,
    starts: Vec<f64>,
    finish: Vec<f64>,
    copies: HashMap<(DataId, Placement), f64>,
    links: LinkBook<'a>,
}

impl<'a> Planner<'a> {
    fn source(&self, d: DataId) -> (Site, f64, bool) {
        match self.g.producer(d) {
            Some(p) => (
                Site::At(self.placements[p.0].expect("producer placed before consumer")),
                self.finish[p.0],
                true,
            ),
            None => (
                Site::from_location(self.g.data(d).initial.unwrap_or(Location::Host)),
                0.0,
                false,
            ),
        }
    }

    fn free_at(&self, p: Placement) -> f64 {
        match p {
            Placement::Single(u) => self.unit_free[self.cfg.unit_index(u)],
            Placement::AllNdp => self.unit_free[1..].iter().copied().fold(0.0, f64::max),
        }
    }

    /// Arrival of input `d` at `p` when the transfer is booked after the
    /// links already reserved in `links`.
    fn arrival(&self, links: &mut LinkBook<'a>, d: DataId, src: Site, avail: f64, produced: bool, p: Placement) -> f64 {
        let mut at = avail;
        for piece in transfer_pieces(self.g.data(d).bytes, src, p, self.cfg) {
            at = at.max(links.reserve(piece.from, piece.to, piece.bytes, avail).1);
        }
        if produced && src.class() != p.class() {
            at += self.cfg.cxt_s;
        }
        at
    }

    /// When every input of `t` is usable at `p`, and the crossing overhead
    /// (uncontended transfer plus context switch) this placement creates.
    fn inputs_ready(&self, t: TaskId, p: Placement) -> (f64, f64) {
        let task = self.g.task(t);
        let cfg = self.cfg;
        let mut ready: f64 = 0.0;
        let mut overhead = 0.0;
        let mut exchange_bytes = 0.0;
        let mut links: Option<LinkBook<'a>> = None;
        for &d in &task.inputs {
            let (src, avail, produced) = self.source(d);
            let bytes = self.g.data(d).bytes;
            if src.serves(p) {
                ready = ready.max(avail);
            } else if exchanged_by_collective(task, src, p) {
                exchange_bytes += bytes;
                ready = ready.max(avail);
            } else if let Some(&at) = self.copies.get(&(d, p)) {
                ready = ready.max(at);
            } else {
                if produced && src.class() != p.class() {
                    overhead += site_transfer_time(bytes, src, p, cfg) + cfg.cxt_s;
                }
                let book = links.get_or_insert_with(|| self.links.clone());
                ready = ready.max(self.arrival(book, d, src, avail, produced, p));
            }
        }
        if exchange_bytes > 0.0 {
            ready += alltoall_estimate(exchange_bytes, cfg);
        }
        (ready, overhead)
    }

    fn evaluate(&self, t: TaskId, p: Placement, inputs: (f64, f64)) -> Evaluation {
        let task = self.g.task(t);
        let cfg = self.cfg;
        let (ready, overhead) = inputs;
        let start = ready.max(self.free_at(p));
        let finish = start + task_duration(task, p, cfg);

        // Outputs whose consumers prefer the other class will pay a crossing later.
        let mut lookahead = 0.0;
        for &d in &task.outputs {
            let bytes = self.g.data(d).bytes;
            let mut charged = HashSet::new();
            for &c in self.g.consumers(d) {
                let want = self.preferred[c.0];
                if want != p.class() && charged.insert(want) {
                    let rep = match want {
                        UnitClass::Cpu => Placement::CPU,
                        UnitClass::Ndp => Placement::AllNdp,
                    };
                    lookahead += site_transfer_time(bytes, Site::At(p), rep, cfg) + cfg.cxt_s;
                }
            }
        }
        Evaluation {
            placement: p,
            start,
            finish,
            score: finish + overhead + lookahead,
        }
    }

    fn commit(&mut self, t: TaskId, e: Evaluation) {
        let task = self.g.task(t);
        for &d in &task.inputs {
            let (src, avail, produced) = self.source(d);
            if src.serves(e.placement) || exchanged_by_collective(task, src, e.placement) {
                continue;
            }
            if !self.copies.contains_key(&(d, e.placement)) {
                let mut links = self.links.clone();
                let at = self.arrival(&mut links, d, src, avail, produced, e.placement);
                self.links = links;
                self.copies.insert((d, e.placement), at);
            }
        }
        match e.placement {
            Placement::Single(u) => self.unit_free[self.cfg.unit_index(u)] = e.finish,
            Placement::AllNdp => self.unit_free[1..].iter_mut().for_each(|f| *f = e.finish),
        }
        self.placements[t.0] = Some(e.placement);
        self.starts[t.0] = e.start;
        self.finish[t.0] = e.finish;
    }

    /// Class of the task's largest input by bytes, if it has inputs.
    fn largest_input_class(&self, t: TaskId) -> Option<UnitClass> {
        let task = self.g.task(t);
        let mut best: Option<(f64, UnitClass)> = None;
        for &d in &task.inputs {
            let bytes = self.g.data(d).bytes;
            if best.is_none_or(|(b, _)| bytes > b) {
                best = Some((bytes, self.source(d).0.class()));
            }
        }
        best.map(|(_, c)| c)
    }

    fn best(&self, t: TaskId, classes: &[UnitClass]) -> Option<Evaluation> {
        let task = self.g.task(t);
        let holder = self.largest_input_class(t);
        let rank = |c: UnitClass| (Some(c) != holder, c != UnitClass::Cpu);
        // Input arrival only depends on the destination stack unless a unit
        // already holds a copy of some input.
        let mut per_stack: HashMap<u32, (f64, f64)> = HashMap::new();
        let mut best: Option<Evaluation> = None;
        for &class in classes {
            for p in candidates(task, class, self.cfg) {
                let inputs = match p {
                    Placement::Single(UnitRef::Ndp { stack, .. })
                        if !task.inputs.iter().any(|&d| self.copies.contains_key(&(d, p))) =>
                    {
                        *per_stack.entry(stack).or_insert_with(|| self.inputs_ready(t, p))
                    }
                    _ => self.inputs_ready(t, p),
                };
                let e = self.evaluate(t, p, inputs);
                best = Some(match best {
                    None => e,
                    Some(b) => {
                        let tol = 1e-12 * b.score.abs().max(e.score.abs());
                        if e.score < b.score - tol
                            || ((e.score - b.score).abs() <= tol && rank(p.class()) < rank(b.placement.class()))
                        {
                            e
                        } else {
                            b
                        }
                    }
                });
            }
        }
        best
    }

    fn check_capacity(&self, t: TaskId) -> Result<()> {
        if self.policy != Policy::NdpOnly {
            return Ok(());
        }
        let task = self.g.task(t);
        let working: f64 = task
            .inputs
            .iter()
            .chain(&task.outputs)
            .map(|&d| self.g.data(d).bytes)
            .sum();
        let cap = self.cfg.total_ndp_capacity() as f64;
        if working > cap {
            return Err(SimError::Capacity(format!(
                "task {} needs {working} bytes, NDP memory holds {cap}",
                task.name
            )));
        }
        Ok(())
    }

    /// Places all ready tasks of a group on the single class that finishes
    /// them soonest (including crossing overhead).
    fn place_group(&mut self, group: u32, order: &[TaskId]) -> Result<()> {
        let members: Vec<TaskId> = order
            .iter()
            .copied()
            .filter(|&t| self.g.task(t).group == Some(group) && self.placements[t.0].is_none())
            .filter(|&t| {
                self.g.task(t).inputs.iter().all(|&d| {
                    self.g
                        .producer(d)
                        .is_none_or(|p| self.placements[p.0].is_some())
                })
            })
            .collect();
        let mut chosen: Option<(f64, UnitClass, Planner<'a>)> = None;
        let holder = members.first().and_then(|&t| self.largest_input_class(t));
        for &class in self.policy.classes() {
            let mut trial = self.clone();
            let mut end: f64 = 0.0;
            let mut extra = 0.0;
            for &t in &members {
                let e = trial.best(t, &[class]).expect("every class has a candidate");
                end = end.max(e.finish);
                extra += e.score - e.finish;
                trial.commit(t, e);
            }
            let score = end + extra;
            let better = match &chosen {
                None => true,
                Some((s, c, _)) => {
                    let tol = 1e-12 * s.abs().max(score.abs());
                    score < s - tol
                        || ((score - s).abs() <= tol
                            && (Some(class) == holder, class == UnitClass::Cpu)
                                > (Some(*c) == holder, *c == UnitClass::Cpu))
                }
            };
            if better {
                chosen = Some((score, class, trial));
            }
        }
        if let Some((_, _, trial)) = chosen {
            *self = trial;
        }
        Ok(())
    }
}

/// Greedy list scheduling in topological order. Each task takes the
/// candidate placement with the smallest earliest-finish time plus the
/// crossing overhead it creates and the crossings its outputs are expected
/// to cause downstream. Grouped tasks (one function) share a unit class.
pub fn plan(g: &TaskGraph, cfg: &MachineConfig, policy: Policy) -> Result<Schedule> {
    if g.is_empty() {
        return Ok(Schedule::empty(policy));
    }
    let order = g.topo_order()?;
    let mut planner = Planner {
        g,
        cfg,
        policy,
        preferred: g.tasks.iter().map(|t| preferred_class(t, policy, cfg)).collect(),
        unit_free: vec![0.0; cfg.unit_count()],
        placements: vec![None; g.tasks.len()],
        starts: vec![0.0; g.tasks.len()],
        finish: vec![0.0; g.tasks.len()],
        copies: HashMap::new(),
        links: LinkBook::new(cfg),
    };
    let mut group_done = BTreeMap::new();
    for &t in &order {
        planner.check_capacity(t)?;
        if planner.placements[t.0].is_some() {
            continue;
        }
        if let Some(group) = g.task(t).group {
            if group_done.insert(group, ()).is_none() {
                planner.place_group(group, &order)?;
                if planner.placements[t.0].is_some() {
                    continue;
                }
            }
        }
        let e = planner
            .best(t, policy.classes())
            .ok_or_else(|| SimError::Schedule(format!("no candidate for {}", g.task(t).name)))?;
        planner.commit(t, e);
    }
    let placements = planner.placements.into_iter().map(|p| p.expect("all placed")).collect();
    Schedule::from_placements(g, cfg, policy, placements, planner.starts)
}
