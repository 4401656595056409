//! Campaign orchestration: one JSON config drives dataset generation,
//! multi-seed training, the stress suite, and report emission. Artifacts
//! live under a single output directory, keyed by (task, seed), and every
//! step skips work whose artifacts already exist, so an interrupted
//! campaign resumes where it stopped.
//!
//! Layout under out_dir:
//!   {pde}/seed_{s}/dataset/manifest.json + fields/*.bin
//!   {pde}/seed_{s}/checkpoint.header.json + checkpoint.params.bin
//!   {pde}/seed_{s}/train_report.json + eval.json
//!   {pde}/seed_{s}/stress/{scenario}.csv + {scenario}.json
//!   summary.json, summary.csv, records.csv, figures/*.svg + *.csv

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldio::{read_field_from_path, write_field_to_path};
use crate::fno::checkpoint::{
    checkpoint_digest, load_checkpoint, save_checkpoint, CheckpointHeader, HEADER_FILE,
    PARAMS_FILE,
};
use crate::grid::Field;
use crate::problems::{
    assemble_input, encoding_for, ns_forcing, sample_instance, solve_targets, train_grid,
    PdeFamily, Regimes, SampleVariant,
};
use crate::report as figures;
use crate::seeds::{self, stream};
use crate::stats::{self, DegradationSummary};
use crate::stress::{
    run_scenario, scenario_csv, ScenarioKind, ScenarioResult, StressContext, ALL_SCENARIOS,
};
use crate::trainer::{evaluate, train, Dataset, TrainConfig, TrainReport};

/// Environment variable added to the configured base seed, for quick
/// variance probes without editing the config.
pub const SEED_ENV: &str = "STRESSLAB_SEED";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub out_dir: PathBuf,
    pub base_seed: u64,
    pub datasets: DatasetsConfig,
    pub training: TrainingConfig,
    pub scenarios: ScenariosConfig,
    pub report: ReportConfig,
    /// Physical and architectural regimes; defaults are the desk scale.
    pub regimes: Regimes,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("campaign_out"),
            base_seed: 0,
            datasets: DatasetsConfig::default(),
            training: TrainingConfig::default(),
            scenarios: ScenariosConfig::default(),
            report: ReportConfig::default(),
            regimes: Regimes::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetsConfig {
    pub families: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for DatasetsConfig {
    fn default() -> Self {
        Self {
            families: crate::problems::ALL_FAMILIES
                .iter()
                .map(|f| f.tag().to_string())
                .collect(),
            n_train: 400,
            n_test: 24,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Number of independently seeded models per task.
    pub seeds: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            max_epochs: 150,
            patience: 20,
            learning_rate: 1e-3,
            batch_size: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenariosConfig {
    pub instances_per_setting: usize,
}

impl Default for ScenariosConfig {
    fn default() -> Self {
        Self {
            instances_per_setting: 20,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// "log" (default) or "linear" heatmap color scale.
    pub heatmap_scale: String,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            heatmap_scale: "log".into(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
}

impl Config {
    pub fn families(&self) -> Result<Vec<PdeFamily>> {
        self.datasets
            .families
            .iter()
            .map(|t| PdeFamily::from_tag(t))
            .collect()
    }

    /// Base seed plus the environment offset; the offset must parse if set.
    pub fn effective_base_seed(&self) -> Result<u64> {
        let offset = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not a u64")))?,
            Err(_) => 0,
        };
        Ok(self.base_seed.wrapping_add(offset))
    }

    pub fn seed_values(&self) -> Result<Vec<u64>> {
        let base = self.effective_base_seed()?;
        Ok((0..self.training.seeds as u64).map(|i| base + i).collect())
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.training.max_epochs,
            patience: self.training.patience,
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            ..TrainConfig::default()
        }
    }
}

/// Filters and execution knobs from the command line.
#[derive(Clone, Debug)]
pub struct Scope {
    pub pde: Option<PdeFamily>,
    pub scenario: Option<ScenarioKind>,
    pub jobs: usize,
    /// Serial execution; outputs are deterministic either way because
    /// every task derives its randomness from its own seed chain and
    /// writes only its own files, but this removes scheduling variance
    /// entirely for byte-for-byte comparisons.
    pub deterministic: bool,
}

impl Default for Scope {
    fn default() -> Self {
        Self {
            pde: None,
            scenario: None,
            jobs: std::thread::available_parallelism().map_or(4, |n| n.get()),
            deterministic: false,
        }
    }
}

impl Scope {
    fn effective_jobs(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.jobs.max(1)
        }
    }

    fn keeps_family(&self, fam: PdeFamily) -> bool {
        self.pde.map_or(true, |p| p == fam)
    }

    fn keeps_scenario(&self, kind: ScenarioKind) -> bool {
        self.scenario.map_or(true, |s| s == kind)
    }
}

/// What a command did: work units completed, skipped because their
/// artifacts already existed, and failures (task label plus error).
#[derive(Debug, Default)]
pub struct CmdOutcome {
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

impl CmdOutcome {
    fn absorb(&mut self, label: String, res: Result<bool>) {
        match res {
            Ok(true) => self.skipped += 1,
            Ok(false) => self.completed += 1,
            Err(e) => self.failures.push(format!("{label}: {e}")),
        }
    }
}

pub struct Paths {
    root: PathBuf,
}

impl Paths {
    pub fn new(cfg: &Config) -> Self {
        Self {
            root: cfg.out_dir.clone(),
        }
    }

    pub fn seed_dir(&self, fam: PdeFamily, seed: u64) -> PathBuf {
        self.root.join(fam.tag()).join(format!("seed_{seed}"))
    }

    pub fn dataset_dir(&self, fam: PdeFamily, seed: u64) -> PathBuf {
        self.seed_dir(fam, seed).join("dataset")
    }

    pub fn manifest(&self, fam: PdeFamily, seed: u64) -> PathBuf {
        self.dataset_dir(fam, seed).join("manifest.json")
    }

    pub fn train_report(&self, fam: PdeFamily, seed: u64) -> PathBuf {
        self.seed_dir(fam, seed).join("train_report.json")
    }

    pub fn eval(&self, fam: PdeFamily, seed: u64) -> PathBuf {
        self.seed_dir(fam, seed).join("eval.json")
    }

    pub fn stress_dir(&self, fam: PdeFamily, seed: u64) -> PathBuf {
        self.seed_dir(fam, seed).join("stress")
    }

    pub fn scenario_csv_path(&self, fam: PdeFamily, seed: u64, kind: ScenarioKind) -> PathBuf {
        self.stress_dir(fam, seed).join(format!("{}.csv", kind.tag()))
    }

    pub fn scenario_json_path(&self, fam: PdeFamily, seed: u64, kind: ScenarioKind) -> PathBuf {
        self.stress_dir(fam, seed).join(format!("{}.json", kind.tag()))
    }

    pub fn summary_json(&self) -> PathBuf {
        self.root.join("summary.json")
    }

    pub fn summary_csv_path(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn records_csv(&self) -> PathBuf {
        self.root.join("records.csv")
    }

    pub fn figures_dir(&self) -> PathBuf {
        self.root.join("figures")
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    index: usize,
    role: String,
    input: String,
    target: String,
}

#[derive(Serialize, Deserialize)]
struct DatasetManifest {
    pde: String,
    seed: u64,
    n_train: usize,
    n_test: usize,
    forcing: Option<String>,
    entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct EvalRecord {
    e_base: f64,
    n_test: usize,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Run closures across a bounded worker pool, returning results in task
/// order. Tasks only touch their own files; shared outputs are written by
/// the caller after the join.
fn run_tasks<'env, T: Send>(
    jobs: usize,
    tasks: Vec<Box<dyn FnOnce() -> T + Send + 'env>>,
) -> Vec<T> {
    let n = tasks.len();
    let queue = Mutex::new(tasks.into_iter().enumerate().collect::<Vec<_>>());
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(n.max(1)) {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                match item {
                    Some((i, task)) => {
                        let out = task();
                        results.lock().unwrap()[i] = Some(out);
                    }
                    None => break,
                }
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("worker completed every task"))
        .collect()
}

fn field_rel_path(i: usize, suffix: &str) -> String {
    format!("fields/{i:04}_{suffix}.bin")
}

/// Generate one (task, seed) dataset: train + held-out test instances and,
/// for the forced task, the forcing field itself. Returns true if skipped.
fn generate_one(cfg: &Config, paths: &Paths, fam: PdeFamily, seed: u64) -> Result<bool> {
    let manifest_path = paths.manifest(fam, seed);
    if manifest_path.exists() {
        return Ok(true);
    }
    let dir = paths.dataset_dir(fam, seed);
    fs::create_dir_all(dir.join("fields"))?;

    let regimes = &cfg.regimes;
    let enc = encoding_for(fam, regimes);
    let grid = train_grid(fam, regimes)?;
    let mut rng = seeds::rng_from(&[seed, stream::DATASET, fam.index()]);

    let forcing = if fam == PdeFamily::NavierStokes {
        let f = ns_forcing(regimes, &mut rng)?;
        write_field_to_path(&dir.join("forcing.bin"), &f)?;
        Some(f)
    } else {
        None
    };

    let total = cfg.datasets.n_train + cfg.datasets.n_test;
    let mut entries = Vec::with_capacity(total);
    for i in 0..total {
        let inst = sample_instance(fam, regimes, &SampleVariant::InDist, forcing.as_ref(), &mut rng)?;
        let input = assemble_input(&inst, &enc, &grid)?;
        let target = solve_targets(fam, regimes, &inst, &[1])?.remove(0);
        let input_rel = field_rel_path(i, "in");
        let target_rel = field_rel_path(i, "tgt");
        write_field_to_path(&dir.join(&input_rel), &input)?;
        write_field_to_path(&dir.join(&target_rel), &target)?;
        entries.push(ManifestEntry {
            index: i,
            role: if i < cfg.datasets.n_train { "train" } else { "test" }.into(),
            input: input_rel,
            target: target_rel,
        });
    }
    write_json(
        &manifest_path,
        &DatasetManifest {
            pde: fam.tag().into(),
            seed,
            n_train: cfg.datasets.n_train,
            n_test: cfg.datasets.n_test,
            forcing: forcing.map(|_| "forcing.bin".into()),
            entries,
        },
    )?;
    Ok(false)
}

fn load_dataset_part(
    cfg: &Config,
    paths: &Paths,
    fam: PdeFamily,
    seed: u64,
    role: &str,
) -> Result<Dataset> {
    let dir = paths.dataset_dir(fam, seed);
    let manifest: DatasetManifest = read_json(&paths.manifest(fam, seed))?;
    let grid = train_grid(fam, &cfg.regimes)?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for e in manifest.entries.iter().filter(|e| e.role == role) {
        inputs.push(read_field_from_path(
            &dir.join(&e.input),
            grid.lengths(),
            grid.boundary(),
        )?);
        targets.push(read_field_from_path(
            &dir.join(&e.target),
            grid.lengths(),
            grid.boundary(),
        )?);
    }
    Dataset::new(inputs, targets)
}

fn load_forcing(cfg: &Config, paths: &Paths, fam: PdeFamily, seed: u64) -> Result<Option<Field>> {
    if fam != PdeFamily::NavierStokes {
        return Ok(None);
    }
    let manifest: DatasetManifest = read_json(&paths.manifest(fam, seed))?;
    let rel = manifest
        .forcing
        .ok_or_else(|| Error::Campaign("forced task dataset lacks a forcing field".into()))?;
    let grid = train_grid(fam, &cfg.regimes)?;
    Ok(Some(read_field_from_path(
        &paths.dataset_dir(fam, seed).join(rel),
        grid.lengths(),
        grid.boundary(),
    )?))
}

/// Train one (task, seed) model, evaluate it on the held-out split, and
/// persist checkpoint + report + baseline error. Returns true if skipped.
fn train_one(cfg: &Config, paths: &Paths, fam: PdeFamily, seed: u64) -> Result<bool> {
    let seed_dir = paths.seed_dir(fam, seed);
    if paths.eval(fam, seed).exists()
        && seed_dir.join(HEADER_FILE).exists()
        && seed_dir.join(PARAMS_FILE).exists()
    {
        return Ok(true);
    }
    let regimes = &cfg.regimes;
    let data = load_dataset_part(cfg, paths, fam, seed, "train")?;
    let test = load_dataset_part(cfg, paths, fam, seed, "test")?;

    let fno = regimes.fno_config(fam).clone();
    let tc = cfg.train_config();
    let init_seed = seeds::derive(&[seed, fam.index()]);
    let (params, report) = train(
        &fno,
        &tc,
        &data,
        init_seed,
        &[seed, stream::TRAIN_SHUFFLE, fam.index()],
    )?;
    let e_base = evaluate(&params, &test)?;

    let horizon = match fam {
        PdeFamily::Nls => Some(regimes.nls.horizon),
        PdeFamily::NavierStokes => Some(regimes.ns.horizon),
        PdeFamily::KuramotoSivashinsky => Some(regimes.ks.horizon),
        PdeFamily::Poisson | PdeFamily::BlackScholes => None,
    };
    let header = CheckpointHeader {
        pde: fam.tag().into(),
        seed,
        fno,
        encoding: encoding_for(fam, regimes),
        train_grid: train_grid(fam, regimes)?,
        horizon,
    };
    save_checkpoint(&seed_dir, &header, &params)?;
    write_json::<TrainReport>(&paths.train_report(fam, seed), &report)?;
    write_json(
        &paths.eval(fam, seed),
        &EvalRecord {
            e_base,
            n_test: cfg.datasets.n_test,
        },
    )?;
    Ok(false)
}

/// Run one stress scenario against a frozen checkpoint, verifying the
/// checkpoint bytes are identical before and after. Returns true if skipped.
fn stress_one(
    cfg: &Config,
    paths: &Paths,
    fam: PdeFamily,
    seed: u64,
    kind: ScenarioKind,
) -> Result<bool> {
    let csv_path = paths.scenario_csv_path(fam, seed, kind);
    if csv_path.exists() && paths.scenario_json_path(fam, seed, kind).exists() {
        return Ok(true);
    }
    let seed_dir = paths.seed_dir(fam, seed);
    let digest_before = checkpoint_digest(&seed_dir)?;
    let (header, params) = load_checkpoint(&seed_dir)?;
    if header.pde != fam.tag() || header.seed != seed {
        return Err(Error::Checkpoint(format!(
            "checkpoint at {} is for {}/seed {}",
            seed_dir.display(),
            header.pde,
            header.seed
        )));
    }
    let eval: EvalRecord = read_json(&paths.eval(fam, seed))?;
    let forcing = load_forcing(cfg, paths, fam, seed)?;

    let ctx = StressContext {
        family: fam,
        regimes: &cfg.regimes,
        params: &params,
        encoding: &header.encoding,
        forcing,
        seed,
        e_base: eval.e_base,
        n_instances: cfg.scenarios.instances_per_setting,
    };
    let result = run_scenario(&ctx, kind)?;

    let digest_after = checkpoint_digest(&seed_dir)?;
    if digest_after != digest_before {
        return Err(Error::Checkpoint(format!(
            "checkpoint bytes changed during {} on {}/seed {}",
            kind.tag(),
            fam.tag(),
            seed
        )));
    }
    fs::create_dir_all(paths.stress_dir(fam, seed))?;
    fs::write(&csv_path, scenario_csv(&result))?;
    write_json(&paths.scenario_json_path(fam, seed, kind), &result)?;
    Ok(false)
}

pub fn cmd_generate(cfg: &Config, scope: &Scope) -> Result<CmdOutcome> {
    let mut tasks: Vec<Box<dyn FnOnce() -> (String, Result<bool>) + Send + '_>> = Vec::new();
    for fam in cfg.families()? {
        if !scope.keeps_family(fam) {
            continue;
        }
        for seed in cfg.seed_values()? {
            let label = format!("generate {}/seed {}", fam.tag(), seed);
            let paths = Paths::new(cfg);
            tasks.push(Box::new(move || {
                (label, generate_one(cfg, &paths, fam, seed))
            }));
        }
    }
    let mut outcome = CmdOutcome::default();
    for (label, res) in run_tasks(scope.effective_jobs(), tasks) {
        outcome.absorb(label, res);
    }
    Ok(outcome)
}

pub fn cmd_train(cfg: &Config, scope: &Scope) -> Result<CmdOutcome> {
    let paths = Paths::new(cfg);
    let mut tasks: Vec<Box<dyn FnOnce() -> (String, Result<bool>) + Send + '_>> = Vec::new();
    for fam in cfg.families()? {
        if !scope.keeps_family(fam) {
            continue;
        }
        for seed in cfg.seed_values()? {
            if !paths.manifest(fam, seed).exists() {
                return Err(Error::Campaign(format!(
                    "no dataset manifest for {}/seed {}; run generate first",
                    fam.tag(),
                    seed
                )));
            }
            let label = format!("train {}/seed {}", fam.tag(), seed);
            let paths = Paths::new(cfg);
            tasks.push(Box::new(move || (label, train_one(cfg, &paths, fam, seed))));
        }
    }
    let mut outcome = CmdOutcome::default();
    for (label, res) in run_tasks(scope.effective_jobs(), tasks) {
        outcome.absorb(label, res);
    }
    Ok(outcome)
}

pub fn cmd_stress(cfg: &Config, scope: &Scope) -> Result<CmdOutcome> {
    let paths = Paths::new(cfg);
    let mut outcome = CmdOutcome::default();
    let mut tasks: Vec<Box<dyn FnOnce() -> (String, Result<bool>) + Send + '_>> = Vec::new();
    for fam in cfg.families()? {
        if !scope.keeps_family(fam) {
            continue;
        }
        for seed in cfg.seed_values()? {
            let have_checkpoint = paths.seed_dir(fam, seed).join(HEADER_FILE).exists();
            if !have_checkpoint {
                outcome
                    .failures
                    .push(format!("missing checkpoint for {}/seed {seed}", fam.tag()));
                continue;
            }
            for kind in ALL_SCENARIOS {
                if !kind.applies_to(fam) || !scope.keeps_scenario(kind) {
                    continue;
                }
                let label = format!("stress {}/seed {}/{}", fam.tag(), seed, kind.tag());
                let paths = Paths::new(cfg);
                tasks.push(Box::new(move || {
                    (label, stress_one(cfg, &paths, fam, seed, kind))
                }));
            }
        }
    }
    for (label, res) in run_tasks(scope.effective_jobs(), tasks) {
        outcome.absorb(label, res);
    }
    Ok(outcome)
}

/// Load every persisted scenario result within scope.
pub fn load_scenario_results(cfg: &Config, scope: &Scope) -> Result<Vec<ScenarioResult>> {
    let paths = Paths::new(cfg);
    let mut out = Vec::new();
    for fam in cfg.families()? {
        if !scope.keeps_family(fam) {
            continue;
        }
        for seed in cfg.seed_values()? {
            for kind in ALL_SCENARIOS {
                if !kind.applies_to(fam) || !scope.keeps_scenario(kind) {
                    continue;
                }
                let path = paths.scenario_json_path(fam, seed, kind);
                if path.exists() {
                    out.push(read_json(&path)?);
                }
            }
        }
    }
    Ok(out)
}

/// Mean spectral profile across seeds for one family's resolution results:
/// equal-weight average of the normalized per-seed profiles, plus the mean
/// above-Nyquist fraction.
fn mean_spectral(results: &[ScenarioResult], fam: PdeFamily) -> Option<crate::stress::SpectralSummary> {
    let profiles: Vec<&crate::stress::SpectralSummary> = results
        .iter()
        .filter(|r| r.pde == fam.tag() && r.scenario == ScenarioKind::ResolutionShift)
        .filter_map(|r| r.spectral.as_ref())
        .collect();
    if profiles.is_empty() {
        return None;
    }
    let edges = profiles[0].profile.bin_edges.clone();
    let nbins = profiles[0].profile.energies.len();
    if profiles
        .iter()
        .any(|p| p.profile.bin_edges != edges || p.profile.energies.len() != nbins)
    {
        return None;
    }
    let inv = 1.0 / profiles.len() as f64;
    let mut energies = vec![0.0; nbins];
    let mut frac = 0.0;
    for p in profiles {
        for (acc, e) in energies.iter_mut().zip(&p.profile.energies) {
            *acc += e * inv;
        }
        frac += p.frac_above_train_nyquist * inv;
    }
    Some(crate::stress::SpectralSummary {
        frac_above_train_nyquist: frac,
        profile: crate::spectrum::SpectralProfile {
            bin_edges: edges,
            energies,
            degenerate: false,
        },
    })
}

/// Training-grid Nyquist index for the spectral figures (integer
/// wavenumber count, matching the profile's axis).
fn train_nyquist_index(cfg: &Config, fam: PdeFamily) -> Result<f64> {
    let grid = train_grid(fam, &cfg.regimes)?;
    Ok(grid.sizes()[0] as f64 / 2.0)
}

pub fn cmd_report(cfg: &Config, scope: &Scope) -> Result<CmdOutcome> {
    let paths = Paths::new(cfg);
    let results = load_scenario_results(cfg, scope)?;
    if results.is_empty() {
        return Err(Error::Campaign(
            "nothing to report: no scenario results on disk".into(),
        ));
    }
    let mut outcome = CmdOutcome::default();

    let summaries = stats::summarize_degradations(&results)?;
    write_json(&paths.summary_json(), &summaries)?;
    fs::write(paths.summary_csv_path(), figures::summary_csv(&summaries))?;

    // Merged per-instance record stream, ordered by (task, scenario, seed).
    let mut records = String::from("pde,scenario,seed,setting_id,setting_value,error,e_base,d_worst\n");
    let mut ordered: Vec<&ScenarioResult> = results.iter().collect();
    ordered.sort_by_key(|r| {
        (
            PdeFamily::from_tag(&r.pde).map(|f| f.index()).unwrap_or(u64::MAX),
            r.scenario.index(),
            r.seed,
        )
    });
    for r in &ordered {
        let body = scenario_csv(r);
        records.push_str(body.split_once('\n').map(|(_, b)| b).unwrap_or(""));
    }
    fs::write(paths.records_csv(), records)?;

    // Completeness only binds for unscoped reports.
    if scope.pde.is_none() && scope.scenario.is_none() {
        let fams = cfg.families()?;
        let missing: Vec<String> = figures::missing_cells(&summaries)
            .into_iter()
            .filter(|(f, _)| fams.contains(f))
            .map(|(f, k)| format!("{}/{}", f.tag(), k.tag()))
            .collect();
        if !missing.is_empty() {
            outcome
                .failures
                .push(format!("missing summary cells: {}", missing.join(", ")));
        }
    }

    let fig_dir = paths.figures_dir();
    fs::create_dir_all(&fig_dir)?;
    let scale = match cfg.report.heatmap_scale.as_str() {
        "linear" => figures::HeatmapScale::Linear,
        "log" => figures::HeatmapScale::Log,
        other => {
            return Err(Error::Config(format!(
                "heatmap_scale must be log or linear, got {other}"
            )))
        }
    };

    let mut figs = vec![figures::heatmap_figure(&summaries, scale)?];
    for fam in cfg.families()? {
        if !scope.keeps_family(fam) {
            continue;
        }
        if summaries.iter().any(|s| s.pde == fam.tag()) {
            figs.push(figures::bar_chart_figure(fam, &summaries)?);
        }
        if let Some(spectral) = mean_spectral(&results, fam) {
            figs.push(figures::spectral_figure(
                fam,
                &spectral,
                train_nyquist_index(cfg, fam)?,
            )?);
        }
    }
    for (tag, band) in stats::rollout_bands(&results)? {
        let fam = PdeFamily::from_tag(&tag)?;
        figs.push(figures::growth_figure(fam, &band)?);
    }
    for fig in figs {
        fs::write(fig_dir.join(format!("{}.svg", fig.name)), &fig.svg)?;
        fs::write(fig_dir.join(format!("{}.csv", fig.name)), &fig.csv)?;
        outcome.completed += 1;
    }
    Ok(outcome)
}

/// Cross-seed summaries straight from persisted scenario results; the
/// entry point integration tests use to assert campaign-level properties.
pub fn summarize_campaign(cfg: &Config, scope: &Scope) -> Result<Vec<DegradationSummary>> {
    let results = load_scenario_results(cfg, scope)?;
    stats::summarize_degradations(&results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_and_covers_all_families() {
        let cfg = Config::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: Config = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg.datasets.families, back.datasets.families);
        assert_eq!(cfg.families().unwrap().len(), 5);
        assert_eq!(cfg.training.seeds, 10);
        assert_eq!(cfg.datasets.n_train, 400);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<Config>("{\"trainig\": {}}");
        assert!(err.is_err());
    }

    #[test]
    fn seed_values_offset_by_environment() {
        // Serialized there-and-back to avoid mutating the process env in
        // parallel tests: effective_base_seed reads the env each call.
        let cfg = Config {
            base_seed: 5,
            ..Config::default()
        };
        let vals = cfg.seed_values().unwrap();
        assert_eq!(vals.len(), 10);
        assert_eq!(vals[0], 5 + std::env::var(SEED_ENV).map_or(0, |v| v.parse().unwrap_or(0)));
    }

    #[test]
    fn worker_pool_preserves_task_order() {
        let tasks: Vec<Box<dyn FnOnce() -> usize + Send>> = (0..37usize)
            .map(|i| Box::new(move || i * 2) as Box<dyn FnOnce() -> usize + Send>)
            .collect();
        let out = run_tasks(4, tasks);
        assert_eq!(out, (0..37).map(|i| i * 2).collect::<Vec<_>>());
    }
}
