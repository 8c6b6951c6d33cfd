//! Experiment configuration, scenario execution and report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyzer::{classification_table, write_classification_csv};
use crate::error::{Diagnostic, Result, SimError};
use crate::machine::MachineConfig;
use crate::runtime::{footprint_pct, FootprintParams, PseudoMode};
use crate::scheduler::{plan, Policy, Schedule};
use crate::sim::{simulate, SimOptions, SimulationReport};
use crate::workload::{build_taskgraph, derive_system, CalibrationFixture, SystemSpec, Targets, TaskGraph, WorkloadParams};

/// Environment variable that replaces every scenario seed.
pub const SEED_ENV: &str = "NDFT_SIM_SEED";

/// Largest system (wavefunction entries) on which the kernel is executed numerically.
pub const EXEC_PSEUDO_MAX_ENTRIES: u64 = 1 << 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n_atoms: u64,
    pub policy: Policy,
    pub pseudo_mode: PseudoMode,
    pub seed: u64,
    #[serde(default)]
    pub exec_pseudo: bool,
}

impl ScenarioConfig {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!("si{}_{}_{}", self.n_atoms, self.policy, self.pseudo_mode.as_str().to_lowercase())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub machine: MachineConfig,
    pub workload: WorkloadParams,
    pub footprint: FootprintParams,
    pub targets: Targets,
    pub scenarios: Vec<ScenarioConfig>,
}

impl ExperimentConfig {
    pub fn fixture(&self) -> CalibrationFixture {
        CalibrationFixture {
            workload: self.workload.clone(),
            footprint: self.footprint.clone(),
            targets: self.targets.clone(),
        }
    }

    /// The reference scenario matrix: every system size under the hybrid
    /// policy with shared blocks, plus the host-only baselines.
    pub fn shipped() -> Self {
        let fixture = CalibrationFixture::default();
        let mut scenarios = Vec::new();
        for n in [16, 32, 64, 128, 256, 1024, 2048] {
            for (policy, mode) in [
                (Policy::Hybrid, PseudoMode::SharedBlock),
                (Policy::Hybrid, PseudoMode::PerProcessCopy),
                (Policy::CpuOnly, PseudoMode::PerProcessCopy),
            ] {
                scenarios.push(ScenarioConfig {
                    name: None,
                    n_atoms: n,
                    policy,
                    pseudo_mode: mode,
                    seed: 42,
                    exec_pseudo: false,
                });
            }
        }
        for n in [16, 32] {
            scenarios.push(ScenarioConfig {
                name: None,
                n_atoms: n,
                policy: Policy::NdpOnly,
                pseudo_mode: PseudoMode::SharedBlock,
                seed: 42,
                exec_pseudo: false,
            });
        }
        Self {
            output_dir: PathBuf::from("out"),
            machine: MachineConfig::default(),
            workload: fixture.workload,
            footprint: fixture.footprint,
            targets: fixture.targets,
            scenarios,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = self.machine.diagnostics("machine");
        out.extend(self.fixture().diagnostics());
        if self.scenarios.is_empty() {
            out.push(Diagnostic::new("scenarios", "at least one scenario is required"));
        }
        let mut labels = BTreeMap::new();
        for (i, sc) in self.scenarios.iter().enumerate() {
            if sc.n_atoms == 0 {
                out.push(Diagnostic::new(format!("scenarios[{i}].n_atoms"), "must be >= 1"));
            } else if sc.exec_pseudo && !desk_scale(sc.n_atoms, &self.workload) {
                out.push(Diagnostic::new(
                    format!("scenarios[{i}].exec_pseudo"),
                    "system too large for numeric execution",
                ));
            }
            if let Some(j) = labels.insert(sc.label(), i) {
                out.push(Diagnostic::new(
                    format!("scenarios[{i}].name"),
                    format!("duplicates the name of scenarios[{j}]"),
                ));
            }
        }
        out
    }
}

fn desk_scale(n_atoms: u64, w: &WorkloadParams) -> bool {
    let entries = (w.nv_per_atom + w.nc_per_atom)
        .saturating_mul(w.nr_per_atom)
        .saturating_mul(n_atoms)
        .saturating_mul(n_atoms);
    entries <= EXEC_PSEUDO_MAX_ENTRIES
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Compares a document against a reference shape: reports missing and
/// unknown keys and mismatched types, and widens integers where floats are
/// expected.
fn check_shape(doc: &mut toml::Table, reference: &toml::Table, prefix: &str, out: &mut Vec<Diagnostic>) {
    for (key, want) in reference {
        let path = join(prefix, key);
        match doc.get_mut(key) {
            None => out.push(Diagnostic::new(path, "missing key")),
            Some(have) => check_value(have, want, &path, out),
        }
    }
    for key in doc.keys() {
        if !reference.contains_key(key) {
            out.push(Diagnostic::new(join(prefix, key), "unknown key"));
        }
    }
}

fn check_value(have: &mut toml::Value, want: &toml::Value, path: &str, out: &mut Vec<Diagnostic>) {
    use toml::Value;
    match (have, want) {
        (Value::Table(h), Value::Table(w)) => check_shape(h, w, path, out),
        (h @ Value::Integer(_), Value::Float(_)) => {
            if let Value::Integer(i) = *h {
                *h = Value::Float(i as f64);
            }
        }
        (h, w) if h.type_str() != w.type_str() => out.push(Diagnostic::new(
            path,
            format!("expected {}, found {}", w.type_str(), h.type_str()),
        )),
        _ => {}
    }
}

fn scenario_reference() -> toml::Table {
    let sc = ScenarioConfig {
        name: Some(String::new()),
        n_atoms: 1,
        policy: Policy::Hybrid,
        pseudo_mode: PseudoMode::SharedBlock,
        seed: 0,
        exec_pseudo: false,
    };
    toml::Table::try_from(sc).expect("scenario serializes")
}

/// Parses `text` and lists every problem found, keyed by path.
pub fn diagnose_str(text: &str) -> (Option<ExperimentConfig>, Vec<Diagnostic>) {
    let mut doc: toml::Table = match text.parse() {
        Ok(t) => t,
        Err(e) => return (None, vec![Diagnostic::new("", format!("parse error: {e}"))]),
    };
    let mut reference = toml::Table::try_from(ExperimentConfig::shipped()).expect("config serializes");
    reference.remove("scenarios");
    let mut out = Vec::new();
    let scenarios = doc.remove("scenarios");
    check_shape(&mut doc, &reference, "", &mut out);
    match scenarios {
        None => out.push(Diagnostic::new("scenarios", "missing key")),
        Some(toml::Value::Array(mut items)) => {
            let sref = scenario_reference();
            for (i, item) in items.iter_mut().enumerate() {
                let path = format!("scenarios[{i}]");
                match item {
                    toml::Value::Table(t) => {
                        for (k, v) in &sref {
                            let p = format!("{path}.{k}");
                            match t.get_mut(k) {
                                None if k == "name" || k == "exec_pseudo" => {}
                                None => out.push(Diagnostic::new(p, "missing key")),
                                Some(have) => check_value(have, v, &p, &mut out),
                            }
                        }
                        for k in t.keys() {
                            if !sref.contains_key(k) {
                                out.push(Diagnostic::new(format!("{path}.{k}"), "unknown key"));
                            }
                        }
                    }
                    _ => out.push(Diagnostic::new(path, "expected table")),
                }
            }
            doc.insert("scenarios".into(), toml::Value::Array(items));
        }
        Some(_) => out.push(Diagnostic::new("scenarios", "expected array of tables")),
    }
    if !out.is_empty() {
        return (None, out);
    }
    let cfg: ExperimentConfig = match toml::Value::Table(doc).try_into() {
        Ok(c) => c,
        Err(e) => return (None, vec![Diagnostic::new("", format!("{e}"))]),
    };
    let diags = cfg.diagnostics();
    (Some(cfg), diags)
}

/// Lists every invariant violation in the configuration file at `path`.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>> {
    let text = fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    Ok(diagnose_str(&text).1)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
    match diagnose_str(&text) {
        (Some(cfg), d) if d.is_empty() => Ok(cfg),
        (_, d) => {
            let first = d.into_iter().next().expect("invalid config has a diagnostic");
            Err(SimError::config(first.path, first.message))
        }
    }
}

/// Reads the seed override from the environment, if set.
pub fn seed_override_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| SimError::config(SEED_ENV, format!("not an unsigned integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Only run the scenario with this label.
    pub scenario: Option<String>,
    /// Execute the pseudopotential kernel numerically wherever the system is small enough.
    pub exec_pseudo: bool,
    pub seed_override: Option<u64>,
}

/// Processes a scenario runs with: one per CPU core on the host alone,
/// one per NDP unit otherwise.
pub fn process_count(policy: Policy, cfg: &MachineConfig) -> u32 {
    match policy {
        Policy::CpuOnly => cfg.cpu.cores,
        Policy::Hybrid | Policy::NdpOnly => cfg.total_ndp_units(),
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: ScenarioConfig,
    pub spec: SystemSpec,
    pub graph: TaskGraph,
    pub schedule: Schedule,
    pub report: SimulationReport,
}

/// Builds, plans and simulates one scenario.
pub fn run_scenario(cfg: &MachineConfig, fixture: &CalibrationFixture, sc: &ScenarioConfig) -> Result<ScenarioRun> {
    let spec = derive_system(sc.n_atoms, fixture, process_count(sc.policy, cfg))?;
    if sc.exec_pseudo && !desk_scale(sc.n_atoms, &fixture.workload) {
        return Err(SimError::domain(format!(
            "scenario {}: Si_{} is too large to execute the kernel numerically",
            sc.label(),
            sc.n_atoms
        )));
    }
    let graph = build_taskgraph(&spec, fixture)?;
    let schedule = plan(&graph, cfg, sc.policy)?;
    let opts = SimOptions {
        spec: Some(spec),
        pseudo_mode: sc.pseudo_mode,
        seed: sc.seed,
        execute_pseudo: sc.exec_pseudo,
    };
    let report = simulate(&schedule, &graph, cfg, fixture, &opts)?;
    Ok(ScenarioRun {
        scenario: sc.clone(),
        spec,
        graph,
        schedule,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub n_atoms: u64,
    pub policy: Policy,
    pub pseudo_mode: PseudoMode,
    pub makespan_s: f64,
    pub speedup_vs_cpu_only: f64,
    pub overhead_frac: f64,
    pub footprint_bytes: f64,
    pub inter_stack_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<ScenarioRun>,
    pub summary: Vec<SummaryRow>,
}

fn tag_capacity(label: &str, e: SimError) -> SimError {
    match e {
        SimError::Capacity(m) => SimError::Capacity(format!("scenario {label}: {m}")),
        other => other,
    }
}

/// Runs the selected scenarios (in parallel) and their host-only baselines.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResult> {
    if let Some(d) = config.diagnostics().into_iter().next() {
        return Err(SimError::config(d.path, d.message));
    }
    let fixture = config.fixture();
    let mut selected: Vec<ScenarioConfig> = config
        .scenarios
        .iter()
        .filter(|s| opts.scenario.as_ref().is_none_or(|n| *n == s.label()))
        .cloned()
        .collect();
    if selected.is_empty() {
        return Err(SimError::config(
            "scenarios",
            match &opts.scenario {
                Some(n) => format!("no scenario named {n:?}"),
                None => "at least one scenario is required".to_string(),
            },
        ));
    }
    for sc in &mut selected {
        if let Some(seed) = opts.seed_override {
            sc.seed = seed;
        }
        if opts.exec_pseudo {
            if desk_scale(sc.n_atoms, &fixture.workload) {
                sc.exec_pseudo = true;
            } else {
                log::warn!("{}: too large for numeric execution, tracing only", sc.label());
            }
        }
    }

    let mut sizes: Vec<u64> = selected.iter().map(|s| s.n_atoms).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let baselines: BTreeMap<u64, f64> = sizes
        .par_iter()
        .map(|&n| {
            let sc = ScenarioConfig {
                name: None,
                n_atoms: n,
                policy: Policy::CpuOnly,
                pseudo_mode: PseudoMode::PerProcessCopy,
                seed: 0,
                exec_pseudo: false,
            };
            run_scenario(&config.machine, &fixture, &sc)
                .map(|r| (n, r.report.makespan))
                .map_err(|e| tag_capacity(&sc.label(), e))
        })
        .collect::<Result<_>>()?;

    let runs: Vec<ScenarioRun> = selected
        .par_iter()
        .map(|sc| run_scenario(&config.machine, &fixture, sc).map_err(|e| tag_capacity(&sc.label(), e)))
        .collect::<Result<_>>()?;

    let mut summary = Vec::with_capacity(runs.len());
    for r in &runs {
        let sc = &r.scenario;
        let report = &r.report;
        if report.makespan <= 0.0 {
            return Err(SimError::domain(format!("scenario {} has zero makespan", sc.label())));
        }
        summary.push(SummaryRow {
            label: sc.label(),
            n_atoms: sc.n_atoms,
            policy: sc.policy,
            pseudo_mode: sc.pseudo_mode,
            makespan_s: report.makespan,
            speedup_vs_cpu_only: baselines[&sc.n_atoms] / report.makespan,
            overhead_frac: report.overhead_fraction()?,
            footprint_bytes: report.footprints.get(&sc.pseudo_mode).copied().unwrap_or(0.0),
            inter_stack_bytes: report.comm.inter_stack_bytes,
        });
    }
    Ok(ExperimentResult { runs, summary })
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        f(&mut w).map_err(|e| SimError::Io(e.to_string()))?;
        w.flush()?;
    }
    Ok(buf)
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record([
            "n_atoms",
            "policy",
            "pseudo_mode",
            "makespan_s",
            "speedup_vs_cpu_only",
            "overhead_frac",
            "footprint_bytes",
            "inter_stack_bytes",
        ])?;
        for r in rows {
            w.write_record([
                r.n_atoms.to_string(),
                r.policy.to_string(),
                r.pseudo_mode.to_string(),
                r.makespan_s.to_string(),
                r.speedup_vs_cpu_only.to_string(),
                r.overhead_frac.to_string(),
                r.footprint_bytes.to_string(),
                r.inter_stack_bytes.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// One-row scenario report with the time breakdown and traffic statistics.
pub fn report_csv(row: &SummaryRow, report: &SimulationReport, cfg: &MachineConfig) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        let mut header: Vec<String> = [
            "n_atoms",
            "policy",
            "pseudo_mode",
            "makespan_s",
            "speedup_vs_cpu_only",
            "overhead_frac",
            "dt_total_s",
            "cxt_total_s",
            "cxt_count",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(report.per_family_time.iter().map(|(n, _)| format!("time_{n}_s")));
        header.extend(
            [
                "intra_stack_bytes",
                "inter_stack_bytes",
                "inter_stack_messages",
                "cache_hits",
                "footprint_bytes",
                "footprint_pct",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        let mut rec = vec![
            row.n_atoms.to_string(),
            row.policy.to_string(),
            row.pseudo_mode.to_string(),
            row.makespan_s.to_string(),
            row.speedup_vs_cpu_only.to_string(),
            row.overhead_frac.to_string(),
            report.overhead.dt_total.to_string(),
            report.overhead.cxt_total.to_string(),
            report.overhead.cxt_count.to_string(),
        ];
        rec.extend(report.per_family_time.iter().map(|(_, t)| t.to_string()));
        rec.extend([
            report.comm.intra_stack_bytes.to_string(),
            report.comm.inter_stack_bytes.to_string(),
            report.comm.inter_stack_messages.to_string(),
            report.comm.requests_served_from_cache.to_string(),
            row.footprint_bytes.to_string(),
            footprint_pct(row.footprint_bytes, cfg.hbm.total_capacity_bytes as f64).to_string(),
        ]);
        w.write_record(&rec)?;
        Ok(())
    })
}

/// Writes every report file into `dir` (per-scenario event timelines only
/// when `timelines` is set); returns the paths written.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, result: &ExperimentResult, timelines: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let cfg = &config.machine;
    let mut written = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };

    let mut classification = Vec::new();
    let mut classified = std::collections::BTreeSet::new();
    let mut breakdown = Vec::new();
    for (run, row) in result.runs.iter().zip(&result.summary) {
        let label = &row.label;
        emit(format!("report_{label}.csv"), report_csv(row, &run.report, cfg)?)?;
        let mut buf = Vec::new();
        run.schedule.write_csv(&run.graph, cfg, &mut buf)?;
        emit(format!("schedule_{label}.csv"), buf)?;
        if timelines {
            let mut buf = Vec::new();
            run.report.write_timeline_csv(&mut buf)?;
            emit(format!("timeline_{label}.csv"), buf)?;
        }
        for (name, t) in &run.report.per_family_time {
            breakdown.push((label.clone(), name.clone(), *t));
        }
        if run.scenario.policy != Policy::CpuOnly && classified.insert(run.scenario.n_atoms) {
            classification.extend(classification_table(&run.graph, &format!("Si_{}", run.scenario.n_atoms), cfg)?);
        }
    }
    emit("breakdown.csv".into(), csv_bytes(|w| {
        w.write_record(["scenario", "row", "seconds"])?;
        for (s, r, t) in &breakdown {
            w.write_record([s.clone(), r.clone(), t.to_string()])?;
        }
        Ok(())
    })?)?;
    let mut buf = Vec::new();
    write_classification_csv(&classification, &mut buf)?;
    emit("classification.csv".into(), buf)?;
    emit("summary.csv".into(), summary_csv(&result.summary)?)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_round_trips_and_validates() {
        let cfg = ExperimentConfig::shipped();
        let text = toml::to_string(&cfg).unwrap();
        let (parsed, diags) = diagnose_str(&text);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(parsed.unwrap(), cfg);
    }

    #[test]
    fn zero_bus_width_is_reported_by_path() {
        let mut cfg = ExperimentConfig::shipped();
        cfg.machine.hbm.bus_width_bits = 0;
        let (_, diags) = diagnose_str(&toml::to_string(&cfg).unwrap());
        assert!(diags.iter().any(|d| d.path == "machine.hbm.bus_width_bits"), "{diags:?}");
    }

    #[test]
    fn missing_coefficient_is_reported_by_path() {
        let text = toml::to_string(&ExperimentConfig::shipped()).unwrap();
        let mut doc: toml::Table = text.parse().unwrap();
        doc["workload"]["syevd"].as_table_mut().unwrap().remove("byte_coef");
        let (_, diags) = diagnose_str(&toml::to_string(&doc).unwrap());
        assert_eq!(diags[0].path, "workload.syevd.byte_coef");
    }

    #[test]
    fn empty_scenarios_rejected() {
        let mut cfg = ExperimentConfig::shipped();
        cfg.scenarios.clear();
        let (_, diags) = diagnose_str(&toml::to_string(&cfg).unwrap());
        assert_eq!(diags[0].path, "scenarios");
    }

    #[test]
    fn integers_accepted_for_float_keys() {
        let text = toml::to_string(&ExperimentConfig::shipped())
            .unwrap()
            .replace("cxt_s = 0.000005", "cxt_s = 0");
        let (cfg, diags) = diagnose_str(&text);
        assert!(diags.is_empty(), "{diags:?}");
        assert_eq!(cfg.unwrap().machine.cxt_s, 0.0);
    }
}
