//! Train on instance 0, freeze the topology, reuse it on the rest of the
//! family, and tabulate the results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{qubits_for, AnsatzSpec, Block, ParamVector, BLOCKS};
use crate::energy::{CostTable, Evaluator};
use crate::error::{Error, Result};
use crate::search::{anneal_structure_with, refine, SaConfig, SaStep, SaTrace};
use crate::seed;
use crate::tsp::{classical_sa_baseline, generate_instance, solve_exact, TspInstance};

pub const MODEL_VERSION: u32 = 1;
pub const THRESHOLDS: [f64; 5] = [0.20, 0.40, 0.60, 0.80, 0.90];
pub const REFERENCE_SIZES: [usize; 4] = [4, 5, 6, 7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub instance_seed: u64,
    pub instance_index: u32,
    pub config: SaConfig,
    pub fitness: f64,
    pub artifact_version: String,
}

/// A trained topology with its parameters, fixed for reuse.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenModel {
    spec: AnsatzSpec,
    params: ParamVector,
    n: usize,
    training: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    n: usize,
    qubits: usize,
    blocks: Vec<String>,
    params: Vec<f64>,
    training: Provenance,
}

impl FrozenModel {
    pub fn new(spec: AnsatzSpec, params: ParamVector, n: usize, training: Provenance) -> Result<Self> {
        if spec.qubits != qubits_for(n) {
            return Err(Error::InvariantViolation(format!(
                "{n} cities need {} qubits, ansatz has {}",
                qubits_for(n),
                spec.qubits
            )));
        }
        if params.len() != spec.param_count() {
            return Err(Error::InvariantViolation(format!(
                "{} parameters for a {}-qubit ansatz (expected {})",
                params.len(),
                spec.qubits,
                spec.param_count()
            )));
        }
        Ok(Self {
            spec,
            params,
            n,
            training,
        })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn training(&self) -> &Provenance {
        &self.training
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION,
            n: self.n,
            qubits: self.spec.qubits,
            blocks: self.spec.blocks().iter().map(|b| b.name().to_string()).collect(),
            params: self.params.as_slice().to_vec(),
            training: self.training.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::malformed(path, e))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::malformed(path, "missing or non-integer `version`"))?;
        if version != MODEL_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version.min(u32::MAX as u64) as u32,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::malformed(path, e))?;
        if file.blocks.len() != BLOCKS {
            return Err(Error::malformed(
                path,
                format!("expected {BLOCKS} blocks, found {}", file.blocks.len()),
            ));
        }
        let mut blocks = [Block::Rotation(crate::ansatz::RotationKind::Rx); BLOCKS];
        for (slot, name) in blocks.iter_mut().zip(&file.blocks) {
            *slot = name.parse().map_err(|e| Error::malformed(path, e))?;
        }
        let spec = AnsatzSpec::new(blocks, file.qubits)?;
        let params = ParamVector::from_canonical(file.params)?;
        FrozenModel::new(spec, params, file.n, file.training)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

pub fn save_model(model: &FrozenModel, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FrozenModel> {
    FrozenModel::load(path)
}

/// One evaluation of a frozen model on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub instance: u32,
    pub repeat: u32,
    pub p_opt: f64,
    pub mean_cost: f64,
    pub best_sampled_cost: u64,
    pub exact_cost: u64,
    /// Seconds; not written to record files so they stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: FrozenModel,
    pub trace: SaTrace,
    pub instance: TspInstance,
}

/// Generate instance 0 of the `(n, family_seed)` family and train on it.
pub fn train(n: usize, family_seed: u64, cfg: &SaConfig) -> Result<Trained> {
    let inst = generate_instance(n, family_seed, 0)?;
    train_on(&inst, cfg, |_| {})
}

/// Anneal a topology on `inst` and freeze the winner.
pub fn train_on(inst: &TspInstance, cfg: &SaConfig, on_step: impl FnMut(&SaStep)) -> Result<Trained> {
    let table = CostTable::solved(inst)?;
    let outcome = anneal_structure_with(&table, cfg, on_step)?;
    let training = Provenance {
        instance_seed: inst.seed(),
        instance_index: inst.index(),
        config: *cfg,
        fitness: outcome.fitness,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(Trained {
        model: FrozenModel::new(outcome.spec, outcome.params, inst.n(), training)?,
        trace: outcome.trace,
        instance: inst.clone(),
    })
}

/// Warm-start Powell from the frozen parameters on each instance and record
/// the optimal-tour frequency of the refined circuit.
pub fn reuse(model: &FrozenModel, instances: &[TspInstance], cfg: &SaConfig) -> Result<Vec<RunRecord>> {
    reuse_repeated(model, instances, cfg, 1)
}

/// As [`reuse`], with `repeats` independently seeded evaluations per instance.
/// Records are ordered by instance, then repeat.
pub fn reuse_repeated(
    model: &FrozenModel,
    instances: &[TspInstance],
    cfg: &SaConfig,
    repeats: u32,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    if let Some(bad) = instances.iter().find(|i| i.n() != model.n) {
        return Err(Error::CityMismatch {
            model: model.n,
            instance: bad.n(),
        });
    }
    let tables = instances
        .par_iter()
        .map(CostTable::solved)
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u32)> = (0..instances.len())
        .flat_map(|i| (0..repeats).map(move |r| (i, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(i, repeat)| {
            let started = Instant::now();
            let inst = &instances[i];
            let eval = Evaluator::new(model.spec, &tables[i])?;
            let run_seed = seed::derive(
                cfg.seed,
                &[seed::label("reuse"), model.n as u64, inst.index() as u64, repeat as u64],
            );
            let refined = refine(
                &eval,
                model.params.as_slice(),
                cfg,
                seed::derive(run_seed, &[seed::label("powell")]),
            )?;
            let est = eval.estimate(
                refined.params.as_slice(),
                cfg.shots,
                seed::derive(run_seed, &[seed::label("final")]),
            )?;
            Ok(RunRecord {
                n: model.n,
                instance: inst.index(),
                repeat,
                p_opt: est.p_opt,
                mean_cost: est.mean_cost,
                best_sampled_cost: est.best_tour.cost,
                exact_cost: tables[i].opt_cost(),
                wall_time: started.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory csv");
    }
    if records.is_empty() {
        return "n,instance,repeat,p_opt,mean_cost,best_sampled_cost,exact_cost\n".into();
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

pub fn records_from_csv(text: &str, path: &Path) -> Result<Vec<RunRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()
        .map_err(|e| Error::malformed(path, e))
}

/// Mean `p_opt` per `(n, instance)` across repeats.
pub fn instance_accuracy(records: &[RunRecord]) -> BTreeMap<usize, BTreeMap<u32, f64>> {
    let mut sums: BTreeMap<usize, BTreeMap<u32, (f64, u32)>> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.n).or_default().entry(r.instance).or_insert((0.0, 0));
        e.0 += r.p_opt;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(n, per)| (n, per.into_iter().map(|(i, (s, c))| (i, s / c as f64)).collect()))
        .collect()
}

/// For each threshold, how many instances of each size reach `p_opt >= τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    pub taus: Vec<f64>,
    /// `(city count, instances, counts per τ)`
    pub columns: Vec<(usize, usize, Vec<usize>)>,
}

impl ThresholdTable {
    pub fn count(&self, n: usize, tau_index: usize) -> Option<usize> {
        self.columns.iter().find(|c| c.0 == n).map(|c| c.2[tau_index])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau");
        for (n, _, _) in &self.columns {
            write!(out, ",c{n}").unwrap();
        }
        out.push('\n');
        for (t, tau) in self.taus.iter().enumerate() {
            write!(out, "{tau:.2}").unwrap();
            for (_, _, counts) in &self.columns {
                write!(out, ",{}", counts[t]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Tabulate per-size accuracies (one value per test instance) against the
/// standard thresholds.
pub fn build_threshold_table(accuracy: &BTreeMap<usize, Vec<f64>>) -> ThresholdTable {
    ThresholdTable {
        taus: THRESHOLDS.to_vec(),
        columns: accuracy
            .iter()
            .map(|(&n, values)| {
                let counts = THRESHOLDS
                    .iter()
                    .map(|&tau| values.iter().filter(|&&p| p >= tau).count())
                    .collect();
                (n, values.len(), counts)
            })
            .collect(),
    }
}

/// Threshold table straight from run records (repeats averaged per instance).
pub fn threshold_table_from_records(records: &[RunRecord]) -> ThresholdTable {
    let acc = instance_accuracy(records)
        .into_iter()
        .map(|(n, per)| (n, per.into_values().collect()))
        .collect();
    build_threshold_table(&acc)
}

/// `instance,acc<n>...` with one row per test instance index.
pub fn accuracy_csv(records: &[RunRecord]) -> String {
    let acc = instance_accuracy(records);
    let mut out = String::from("instance");
    for n in acc.keys() {
        write!(out, ",acc{n}").unwrap();
    }
    out.push('\n');
    let mut indices: Vec<u32> = acc.values().flat_map(|m| m.keys().copied()).collect();
    indices.sort_unstable();
    indices.dedup();
    for i in indices {
        write!(out, "{i}").unwrap();
        for per in acc.values() {
            match per.get(&i) {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn instance_path(root: &Path, n: usize, index: u32) -> PathBuf {
    root.join(n.to_string()).join(format!("{index}.json"))
}

/// Load every `<index>.json` under `<root>/<n>/`, sorted by index.
pub fn load_instances(root: &Path, n: usize) -> Result<Vec<TspInstance>> {
    let dir = root.join(n.to_string());
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(TspInstance::load(&path)?);
        }
    }
    out.sort_by_key(TspInstance::index);
    Ok(out)
}

/// Write `count` instances (indices `0..count`) under `<root>/<n>/`.
pub fn write_instances(root: &Path, n: usize, count: u32, family_seed: u64) -> Result<Vec<TspInstance>> {
    let dir = root.join(n.to_string());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    (0..count)
        .map(|index| {
            let inst = generate_instance(n, family_seed, index)?;
            inst.save(instance_path(root, n, index))?;
            Ok(inst)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatMode {
    /// Train once, evaluate each test instance `repeats` times.
    #[default]
    Evaluations,
    /// Train `repeats` times, evaluating each test instance once per model.
    Trainings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub sizes: Vec<usize>,
    pub family_seed: u64,
    /// Instances per size; index 0 trains, the rest test.
    pub instances_per_size: u32,
    pub repeats: u32,
    pub repeat_mode: RepeatMode,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            sizes: REFERENCE_SIZES.to_vec(),
            family_seed: 0,
            instances_per_size: 11,
            repeats: 5,
            repeat_mode: RepeatMode::Evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeReport {
    pub n: usize,
    pub models: Vec<FrozenModel>,
    pub traces: Vec<SaTrace>,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub n: usize,
    pub index: u32,
    pub cost: u64,
    pub exact_cost: u64,
}

impl BaselineRow {
    pub fn gap(&self) -> f64 {
        (self.cost as f64 - self.exact_cost as f64) / self.exact_cost as f64
    }
}

pub fn baseline_rows(instances: &[TspInstance], seed: u64) -> Result<Vec<BaselineRow>> {
    instances
        .par_iter()
        .map(|inst| {
            let run_seed = seed::derive(seed, &[inst.n() as u64, inst.index() as u64]);
            Ok(BaselineRow {
                n: inst.n(),
                index: inst.index(),
                cost: classical_sa_baseline(inst, run_seed).cost,
                exact_cost: solve_exact(inst)?.cost,
            })
        })
        .collect()
}

pub fn baseline_csv(rows: &[BaselineRow]) -> String {
    let mut out = String::from("n,index,cost,exact_cost,gap\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.n, r.index, r.cost, r.exact_cost, r.gap()).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub sizes: Vec<SizeReport>,
    pub thresholds: ThresholdTable,
    pub baseline: Vec<BaselineRow>,
}

impl ExperimentReport {
    pub fn records(&self) -> Vec<RunRecord> {
        self.sizes.iter().flat_map(|s| s.records.iter().cloned()).collect()
    }
}

/// Full train/freeze/reuse sweep. Writes the bundle into `out_dir`:
/// `instances/<n>/<index>.json`, `model_<n>.json`, `trace_<n>.csv`,
/// `records_<n>.csv`, `accuracy.csv`, `thresholds.csv` and `baseline.csv`.
pub fn run_experiment(
    opts: &ExperimentOptions,
    cfg: &SaConfig,
    out_dir: &Path,
    mut on_step: impl FnMut(usize, &SaStep),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if opts.instances_per_size < 2 || opts.repeats == 0 {
        return Err(Error::InvalidConfig(
            "need at least 2 instances per size and 1 repeat".into(),
        ));
    }
    let inst_root = out_dir.join("instances");
    let mut sizes = Vec::new();
    let mut all_instances = Vec::new();
    for &n in &opts.sizes {
        let instances = write_instances(&inst_root, n, opts.instances_per_size, opts.family_seed)?;
        let (train_inst, tests) = instances.split_first().expect("at least one instance");
        let mut report = SizeReport {
            n,
            models: Vec::new(),
            traces: Vec::new(),
            records: Vec::new(),
        };
        match opts.repeat_mode {
            RepeatMode::Evaluations => {
                let trained = train_on(train_inst, cfg, |s| on_step(n, s))?;
                report.records = reuse_repeated(&trained.model, tests, cfg, opts.repeats)?;
                report.models.push(trained.model);
                report.traces.push(trained.trace);
            }
            RepeatMode::Trainings => {
                for r in 0..opts.repeats {
                    let run_cfg = SaConfig {
                        seed: seed::derive(cfg.seed, &[seed::label("training"), r as u64]),
                        ..*cfg
                    };
                    let trained = train_on(train_inst, &run_cfg, |s| on_step(n, s))?;
                    let mut records = reuse(&trained.model, tests, &run_cfg)?;
                    records.iter_mut().for_each(|rec| rec.repeat = r);
                    report.records.extend(records);
                    report.models.push(trained.model);
                    report.traces.push(trained.trace);
                }
                report.records.sort_by_key(|r| (r.instance, r.repeat));
            }
        }
        for (k, (model, trace)) in report.models.iter().zip(&report.traces).enumerate() {
            let suffix = if k == 0 { String::new() } else { format!("_r{k}") };
            model.save(out_dir.join(format!("model_{n}{suffix}.json")))?;
            write_text(&out_dir.join(format!("trace_{n}{suffix}.csv")), &trace.to_csv())?;
        }
        write_text(&out_dir.join(format!("records_{n}.csv")), &records_to_csv(&report.records))?;
        all_instances.extend(instances);
        sizes.push(report);
    }
    let records: Vec<RunRecord> = sizes.iter().flat_map(|s| s.records.iter().cloned()).collect();
    let thresholds = threshold_table_from_records(&records);
    write_text(&out_dir.join("thresholds.csv"), &thresholds.to_csv())?;
    write_text(&out_dir.join("accuracy.csv"), &accuracy_csv(&records))?;
    let baseline = baseline_rows(&all_instances, cfg.seed)?;
    write_text(&out_dir.join("baseline.csv"), &baseline_csv(&baseline))?;
    Ok(ExperimentReport {
        sizes,
        thresholds,
        baseline,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read every run-record CSV in `dir` (files whose header matches).
pub fn read_records_dir(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if text.starts_with("n,instance,repeat,p_opt") {
            out.extend(records_from_csv(&text, &path)?);
        }
    }
    Ok(out)
}
