//! Task graph of kernel descriptors connected through named data objects.

use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt::Write as _;

use super::cost::{block_length, kernel_cost, KernelCost, KernelShape};
use super::{CalibrationFixture, KernelFamily, SystemSpec};
use crate::error::{Result, SimError};
use crate::machine::Location;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DataId(pub usize);

/// How a task may be mapped onto units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Runs on exactly one unit.
    Single,
    /// Data-parallel: may run on one unit or be split evenly over all NDP units.
    Splittable,
    /// Collective over every unit of its class (all-to-all exchange).
    Collective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelDescriptor {
    pub id: TaskId,
    pub name: String,
    pub family: KernelFamily,
    pub flops: f64,
    pub bytes_read: f64,
    pub bytes_written: f64,
    pub inputs: Vec<DataId>,
    pub outputs: Vec<DataId>,
    /// Kernel instances this descriptor batches (transforms, products, ...).
    pub instances: f64,
    pub exec: ExecMode,
    /// Tasks sharing a group form one function and are placed on one unit class.
    pub group: Option<u32>,
    /// Owning process rank, when the task is one rank's share of a stage.
    pub process: Option<u32>,
}

impl KernelDescriptor {
    pub fn bytes(&self) -> f64 {
        self.bytes_read + self.bytes_written
    }

    pub fn cost(&self) -> KernelCost {
        KernelCost {
            flops: self.flops,
            bytes_read: self.bytes_read,
            bytes_written: self.bytes_written,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataObject {
    pub id: DataId,
    pub name: String,
    pub bytes: f64,
    /// Set for graph inputs; produced objects start nowhere.
    pub initial: Option<Location>,
    /// Final outputs that no task consumes.
    pub terminal: bool,
}

/// Precedence induced by a data object flowing from producer to consumer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: TaskId,
    pub to: TaskId,
    pub data: DataId,
    pub bytes: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskGraph {
    pub tasks: Vec<KernelDescriptor>,
    pub data_objects: Vec<DataObject>,
    pub edges: Vec<Edge>,
    producers: Vec<Option<TaskId>>,
    consumers: Vec<Vec<TaskId>>,
}

impl TaskGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_data(&mut self, name: impl Into<String>, bytes: f64, initial: Option<Location>) -> DataId {
        let id = DataId(self.data_objects.len());
        self.data_objects.push(DataObject {
            id,
            name: name.into(),
            bytes,
            initial,
            terminal: false,
        });
        self.producers.push(None);
        self.consumers.push(Vec::new());
        id
    }

    pub fn mark_terminal(&mut self, data: DataId) {
        self.data_objects[data.0].terminal = true;
    }

    /// Appends a task. Its inputs and outputs must already exist; each data
    /// object has at most one producer.
    #[allow(clippy::too_many_arguments)]
    pub fn add_task(
        &mut self,
        name: impl Into<String>,
        family: KernelFamily,
        cost: KernelCost,
        instances: f64,
        exec: ExecMode,
        inputs: Vec<DataId>,
        outputs: Vec<DataId>,
    ) -> Result<TaskId> {
        let name = name.into();
        if !(cost.flops >= 0.0) || !(cost.bytes() > 0.0) {
            return Err(SimError::domain(format!(
                "task {name}: flops must be >= 0 and memory traffic > 0"
            )));
        }
        for d in inputs.iter().chain(&outputs) {
            if d.0 >= self.data_objects.len() {
                return Err(SimError::domain(format!("task {name}: unknown data object {}", d.0)));
            }
        }
        if let Some(d) = inputs.iter().find(|d| outputs.contains(d)) {
            return Err(SimError::domain(format!(
                "task {name} both reads and writes {}",
                self.data_objects[d.0].name
            )));
        }
        let id = TaskId(self.tasks.len());
        for d in &outputs {
            if let Some(other) = self.producers[d.0] {
                return Err(SimError::domain(format!(
                    "data {} produced by both {} and {name}",
                    self.data_objects[d.0].name, self.tasks[other.0].name
                )));
            }
            if self.data_objects[d.0].initial.is_some() {
                return Err(SimError::domain(format!(
                    "task {name} writes graph input {}",
                    self.data_objects[d.0].name
                )));
            }
            self.producers[d.0] = Some(id);
            for &to in &self.consumers[d.0] {
                self.edges.push(Edge {
                    from: id,
                    to,
                    data: *d,
                    bytes: self.data_objects[d.0].bytes,
                });
            }
        }
        for d in &inputs {
            self.consumers[d.0].push(id);
            if let Some(from) = self.producers[d.0] {
                self.edges.push(Edge {
                    from,
                    to: id,
                    data: *d,
                    bytes: self.data_objects[d.0].bytes,
                });
            }
        }
        self.tasks.push(KernelDescriptor {
            id,
            name,
            family,
            flops: cost.flops,
            bytes_read: cost.bytes_read,
            bytes_written: cost.bytes_written,
            inputs,
            outputs,
            instances,
            exec,
            group: None,
            process: None,
        });
        Ok(id)
    }

    pub fn task(&self, id: TaskId) -> &KernelDescriptor {
        &self.tasks[id.0]
    }

    pub fn data(&self, id: DataId) -> &DataObject {
        &self.data_objects[id.0]
    }

    pub fn producer(&self, data: DataId) -> Option<TaskId> {
        self.producers[data.0]
    }

    pub fn consumers(&self, data: DataId) -> &[TaskId] {
        &self.consumers[data.0]
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Deterministic topological order (Kahn, smallest id first). Errors on a cycle
    /// or on an input that is neither produced nor initially placed.
    pub fn topo_order(&self) -> Result<Vec<TaskId>> {
        for d in &self.data_objects {
            if self.producers[d.id.0].is_none() && d.initial.is_none() && !self.consumers[d.id.0].is_empty() {
                return Err(SimError::domain(format!(
                    "data {} is consumed but never produced or placed",
                    d.name
                )));
            }
        }
        let n = self.tasks.len();
        let mut indegree = vec![0usize; n];
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for e in &self.edges {
            if succ[e.from.0].insert(e.to.0) {
                indegree[e.to.0] += 1;
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(TaskId(i));
            for &j in &succ[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
        if order.len() != n {
            return Err(SimError::domain("task graph contains a cycle"));
        }
        Ok(order)
    }

    /// Kernel instances of `family` represented in the graph.
    pub fn instance_count(&self, family: KernelFamily) -> f64 {
        self.tasks
            .iter()
            .filter(|t| t.family == family)
            .map(|t| t.instances)
            .sum()
    }

    pub fn total_flops(&self) -> f64 {
        self.tasks.iter().map(|t| t.flops).sum()
    }

    pub fn total_bytes(&self) -> f64 {
        self.tasks.iter().map(|t| t.bytes()).sum()
    }

    /// Line-oriented dump, one task per line:
    /// `id  name  family  flops  bytes_read  bytes_written  inputs  outputs`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for t in &self.tasks {
            let names = |ids: &[DataId]| {
                ids.iter()
                    .map(|d| self.data_objects[d.0].name.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id.0,
                t.name,
                t.family,
                t.flops,
                t.bytes_read,
                t.bytes_written,
                names(&t.inputs),
                names(&t.outputs)
            );
        }
        out
    }
}

/// Builds the per-process LR-TDDFT pipeline for `spec`.
///
/// Each rank `r` of `n_processes` owns a `1/p` share of every stage:
/// `pseudo.r -> fft_orb.r -> face_split.r -> fft_pair.r -> gemm.r`, after
/// which one all-to-all gathers the `p` response-matrix row blocks and one
/// SYEVD diagonalizes the `D x D` matrix, `D = Nv * Nc`. GEMM row block `r`
/// is `(D/p x Nr) * (Nr x D)` and therefore consumes every rank's transformed
/// pair functions.
pub fn build_taskgraph(spec: &SystemSpec, fixture: &CalibrationFixture) -> Result<TaskGraph> {
    spec.validate()?;
    let fft = fixture.coefs(KernelFamily::Fft)?;
    let face = fixture.coefs(KernelFamily::FaceSplit)?;
    let gemm = fixture.coefs(KernelFamily::Gemm)?;
    let a2a = fixture.coefs(KernelFamily::Alltoall)?;
    let syevd = fixture.coefs(KernelFamily::Syevd)?;
    let pseudo = fixture.coefs(KernelFamily::Pseudo)?;

    let p = spec.n_processes;
    let pf = p as f64;
    let nr = spec.n_grid;
    let nr_f = nr as f64;
    let orbitals = spec.orbitals() as f64;
    let dim = spec.pair_dim();
    let dim_f = dim as f64;
    let m = fixture.workload.projectors_per_atom;
    let block_len = block_length(m as u64, m as u64) as f64;

    let orb_bytes = orbitals * nr_f * 16.0 / pf;
    let pair_bytes = dim_f * nr_f * 16.0 / pf;
    let fft_one = kernel_cost(KernelShape::Fft { n: nr }, fft)?;
    let face_one = kernel_cost(KernelShape::FaceSplit { n: nr_f }, face)?;

    let mut g = TaskGraph::new();
    let mut pairg = Vec::with_capacity(p as usize);
    let mut stage_out = Vec::with_capacity(p as usize);

    for r in 0..p {
        let orb = g.add_data(format!("orb.{r}"), orb_bytes, Some(Location::Host));
        let owned = spec.owned_atoms(r);
        let mut inputs = vec![orb];
        if owned > 0 {
            inputs.push(g.add_data(format!("pp.{r}"), owned as f64 * block_len, Some(Location::Host)));
        }
        let orbp = g.add_data(format!("orbp.{r}"), orb_bytes, None);
        let cost = kernel_cost(
            KernelShape::Pseudo {
                wavefunctions: orbitals / pf,
                atoms: spec.n_atoms,
                owned_atoms: owned,
                projectors: m,
            },
            pseudo,
        )?;
        let t = g.add_task(format!("pseudo.{r}"), KernelFamily::Pseudo, cost, 1.0, ExecMode::Single, inputs, vec![orbp])?;
        g.tasks[t.0].group = Some(0);
        g.tasks[t.0].process = Some(r);
        stage_out.push(orbp);
    }

    let stages: [(&str, KernelFamily, KernelCost, f64, f64); 3] = [
        ("fft_orb", KernelFamily::Fft, fft_one, orbitals / pf, orb_bytes),
        ("face_split", KernelFamily::FaceSplit, face_one, dim_f / pf, pair_bytes),
        ("fft_pair", KernelFamily::Fft, fft_one, dim_f / pf, pair_bytes),
    ];
    for (stage, family, one, instances, out_bytes) in stages {
        for r in 0..p {
            let out_name = match stage {
                "fft_orb" => format!("orbg.{r}"),
                "face_split" => format!("pair.{r}"),
                _ => format!("pairg.{r}"),
            };
            let out = g.add_data(out_name, out_bytes, None);
            let t = g.add_task(
                format!("{stage}.{r}"),
                family,
                one.scaled(instances),
                instances,
                ExecMode::Splittable,
                vec![stage_out[r as usize]],
                vec![out],
            )?;
            g.tasks[t.0].process = Some(r);
            stage_out[r as usize] = out;
        }
    }
    pairg.extend(stage_out.iter().copied());

    let tile_rows = dim_f / pf;
    let tile_cost = kernel_cost(KernelShape::Gemm { m: tile_rows, n: dim_f, k: nr_f }, gemm)?;
    let mut partitions = Vec::with_capacity(p as usize);
    for r in 0..p {
        let out = g.add_data(format!("kpart.{r}"), tile_rows * dim_f * 8.0, None);
        let t = g.add_task(format!("gemm.{r}"), KernelFamily::Gemm, tile_cost, 1.0, ExecMode::Single, pairg.clone(), vec![out])?;
        g.tasks[t.0].process = Some(r);
        partitions.push(out);
    }

    let matrix_bytes = dim_f * dim_f * 8.0;
    let kmat = g.add_data("kmat", matrix_bytes, None);
    let cost = kernel_cost(KernelShape::Alltoall { bytes: matrix_bytes }, a2a)?;
    g.add_task("alltoall", KernelFamily::Alltoall, cost, 1.0, ExecMode::Collective, partitions, vec![kmat])?;

    let eig = g.add_data("eig", dim_f * 8.0, None);
    g.mark_terminal(eig);
    let cost = kernel_cost(KernelShape::Syevd { n: dim }, syevd)?;
    g.add_task("syevd", KernelFamily::Syevd, cost, 1.0, ExecMode::Single, vec![kmat], vec![eig])?;
    Ok(g)
}
