//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 configuration or checkpoint
//! incompatibility, 3 data error, 4 numeric failure (including a failed
//! homology verdict).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::featurize::{featurize_complex, matrix_dump, AtomFeatureTable, FeatureError};
use crate::homlab::{self, Construction, SimplicialComplex, VertexPartition};
use crate::periodic::neighbor_list;
use crate::qcomplex::build_complex;
use crate::sformer::{read_sidecar_extra, CheckpointError, ModelConfig, SformerModel};
use crate::structio::{load_dataset, parse_structure, CrystalStructure, DatasetRecord, SplitTag, StructureFormat};
use crate::trainer::{self, history_jsonl, MetricsReport, Sample, Schedule, TrainConfig, TrainError};

/// Seed used for the built-in placeholder atom table.
pub const PLACEHOLDER_TABLE_SEED: u64 = 0;
pub const SEED_ENV: &str = "QCNET_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Input = 1,
    Config = 2,
    Data = 3,
    Numeric = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn input(msg: impl Into<String>) -> CliError {
    CliError::new(ExitKind::Input, msg)
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::new(ExitKind::Config, msg)
}

fn data(msg: impl Into<String>) -> CliError {
    CliError::new(ExitKind::Data, msg)
}

#[derive(Debug, Parser)]
#[command(name = "qcnet", version, about = "Quotient-complex crystal property models")]
pub struct Cli {
    /// Maximum number of worker threads (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the quotient complex of a structure and report its size
    Build(BuildArgs),
    /// Write raw and embedded simplex features as binary matrices
    Featurize(FeaturizeArgs),
    /// Train a model from a TOML config
    Train(TrainArgs),
    /// Continue training a checkpoint under a new config
    Finetune(FinetuneArgs),
    /// Evaluate a checkpoint on a labelled dataset
    Eval(EvalArgs),
    /// Predict the target for one structure
    Predict(PredictArgs),
    /// Compare the homology of a complex with its vertex-glued version
    Homology(HomologyArgs),
}

#[derive(Debug, Args)]
pub struct StructureInput {
    /// Structure file (POSCAR, or JSON when the name ends in .json)
    #[arg(value_name = "STRUCTURE")]
    pub structure: PathBuf,

    /// Override the format guessed from the file name [json, poscar]
    #[arg(long, value_name = "FORMAT")]
    pub format: Option<StructureFormat>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub input: StructureInput,

    /// Neighbors per atom
    #[arg(short, long, default_value_t = 12)]
    pub k: usize,

    /// Write the complex as JSON to this file
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub input: StructureInput,

    /// Neighbors per atom
    #[arg(short, long, default_value_t = 12)]
    pub k: usize,

    /// Directory for the feature matrices
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,

    /// Atom feature table (JSON); the built-in placeholder table if omitted
    #[arg(long, value_name = "FILE")]
    pub atom_table: Option<PathBuf>,

    /// Take the embedding weights from this checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,

    /// Seed for freshly initialized embeddings when no checkpoint is given
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (TOML)
    #[arg(value_name = "CONFIG")]
    pub config: PathBuf,

    /// Override the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Run configuration (TOML)
    #[arg(value_name = "CONFIG")]
    pub config: PathBuf,

    /// Pretrained checkpoint to start from
    #[arg(long, value_name = "FILE")]
    pub from: PathBuf,

    /// Override the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Labelled dataset (JSON Lines)
    #[arg(value_name = "DATA")]
    pub data: PathBuf,

    /// Atom feature table; defaults to the one recorded with the checkpoint
    #[arg(long, value_name = "FILE")]
    pub atom_table: Option<PathBuf>,

    /// Neighbors per atom; defaults to the value recorded with the checkpoint
    #[arg(short, long)]
    pub k: Option<usize>,

    /// Also write the metrics JSON to this file
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model checkpoint
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    #[command(flatten)]
    pub input: StructureInput,

    /// Atom feature table; defaults to the one recorded with the checkpoint
    #[arg(long, value_name = "FILE")]
    pub atom_table: Option<PathBuf>,

    /// Neighbors per atom; defaults to the value recorded with the checkpoint
    #[arg(short, long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct HomologyArgs {
    /// Complex as a JSON list of maximal simplices
    #[arg(value_name = "COMPLEX", required_unless_present = "fuzz")]
    pub complex: Option<PathBuf>,

    /// Vertex classes as a JSON list of lists (default: singletons)
    #[arg(long, value_name = "FILE")]
    pub partition: Option<PathBuf>,

    /// Write the report to this file instead of stdout
    #[arg(short, long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Glue with one apex per vertex pair instead of one per class
    #[arg(long)]
    pub pairwise: bool,

    /// Also fail when the glued complex disagrees with the star construction
    #[arg(long)]
    pub strict: bool,

    /// Check N random flag complexes instead of reading one
    #[arg(long, value_name = "N", conflicts_with = "complex")]
    pub fuzz: Option<usize>,

    /// Seed for --fuzz
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Seed precedence: flag, then the environment, then the fallback.
pub fn resolve_seed(flag: Option<u64>, fallback: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    schedule: Schedule,
    #[serde(default)]
    model: ModelConfig,
    paths: PathsSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    train: PathBuf,
    val: Option<PathBuf>,
    test: Option<PathBuf>,
    atom_table: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

/// Paths of a run, resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub atom_table: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub paths: RunPaths,
}

impl RunConfig {
    /// Parse a TOML run configuration; every input path must exist.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
        let raw: ConfigFile = toml::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let paths = RunPaths {
            train: resolve(raw.paths.train),
            val: raw.paths.val.map(resolve),
            test: raw.paths.test.map(resolve),
            atom_table: raw.paths.atom_table.map(resolve),
            out_dir: resolve(raw.paths.out_dir),
        };
        let inputs = [Some(&paths.train), paths.val.as_ref(), paths.test.as_ref(), paths.atom_table.as_ref()];
        for p in inputs.into_iter().flatten() {
            if !p.is_file() {
                return Err(config(format!("{}: referenced file does not exist", p.display())));
            }
        }
        let mut train = raw.train;
        train.schedule = raw.schedule;
        train.model = raw.model;
        Ok(Self { train, paths })
    }
}

fn read_structure(src: &StructureInput) -> CliResult<CrystalStructure> {
    let path = &src.structure;
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let format = src.format.unwrap_or_else(|| StructureFormat::from_path(path));
    let mut s = parse_structure(&text, format).map_err(|e| input(format!("{}: {e}", path.display())))?;
    if s.id().is_none() {
        s.set_id(path.file_stem().map(|x| x.to_string_lossy().into_owned()));
    }
    Ok(s)
}

fn input_err(path: &Path, e: impl fmt::Display) -> CliError {
    input(format!("{}: {e}", path.display()))
}

fn load_table(path: Option<&Path>) -> CliResult<AtomFeatureTable> {
    match path {
        None => Ok(AtomFeatureTable::placeholder(PLACEHOLDER_TABLE_SEED)),
        Some(p) if !p.is_file() => Err(config(format!("{}: atom table does not exist", p.display()))),
        Some(p) => AtomFeatureTable::load(p).map_err(|e| data(e.to_string())),
    }
}

fn feature_error(id: &str, e: FeatureError) -> CliError {
    match e {
        FeatureError::MissingSpecies(z) => data(format!(
            "{id}: atom table has no entry for atomic number {z} ({})",
            crate::elements::symbol(z).unwrap_or("?")
        )),
        other => data(format!("{id}: {other}")),
    }
}

fn load_records(path: &Path) -> CliResult<Vec<DatasetRecord>> {
    let ds = load_dataset(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    if let Some(d) = ds.diagnostics.first() {
        let more = ds.diagnostics.len() - 1;
        let tail = if more > 0 { format!(" (and {more} more bad lines)") } else { String::new() };
        return Err(data(format!("{}: {d}{tail}", path.display())));
    }
    if ds.records.is_empty() {
        return Err(data(format!("{}: no records", path.display())));
    }
    Ok(ds.records)
}

fn prepare(records: &[DatasetRecord], k: usize, table: &AtomFeatureTable) -> CliResult<Vec<Sample>> {
    for (i, r) in records.iter().enumerate() {
        if let Err(e) = table.check_covers(&r.structure) {
            return Err(feature_error(r.id().unwrap_or(&format!("#{i}")), e));
        }
    }
    trainer::prepare_samples(records, k, table).map_err(train_error)
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::InvalidConfig(m) => config(m),
        TrainError::Checkpoint(c) => checkpoint_error(c),
        TrainError::NonFiniteLoss { .. } => CliError::new(ExitKind::Numeric, e.to_string()),
        TrainError::Io(m) => input(m),
        other => data(other.to_string()),
    }
}

fn checkpoint_error(e: CheckpointError) -> CliError {
    match e {
        CheckpointError::Io(m) => input(m),
        other => config(other.to_string()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| input_err(path, e))
}

fn emit(out: &mut dyn Write, text: impl fmt::Display) -> CliResult {
    writeln!(out, "{text}").map_err(|e| input(format!("stdout: {e}")))
}

fn cmd_build(a: &BuildArgs, out: &mut dyn Write) -> CliResult {
    let s = read_structure(&a.input)?;
    let graph = neighbor_list(&s, a.k).map_err(|e| input_err(&a.input.structure, e))?;
    let c = build_complex(graph);
    if let Some(path) = &a.out {
        write_file(path, c.to_json() + "\n")?;
    }
    emit(out, format!("vertices {}", c.num_vertices()))?;
    emit(out, format!("edges {}", c.num_edges()))?;
    emit(out, format!("triangles {}", c.num_triangles()))
}

fn cmd_featurize(a: &FeaturizeArgs, out: &mut dyn Write) -> CliResult {
    let s = read_structure(&a.input)?;
    let table = load_table(a.atom_table.as_deref())?;
    let model = match &a.checkpoint {
        Some(p) => SformerModel::load(p, None).map_err(checkpoint_error)?,
        None => SformerModel::new(ModelConfig::default(), resolve_seed(a.seed, 0)?),
    };
    let graph = neighbor_list(&s, a.k).map_err(|e| input_err(&a.input.structure, e))?;
    let c = build_complex(graph);
    let fs_ = featurize_complex(&c, &s, &table, &model.embeddings())
        .map_err(|e| feature_error(&a.input.structure.display().to_string(), e))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| input_err(&a.out_dir, e))?;
    let tiers = [
        ("vertex_raw", &fs_.raw.h0),
        ("edge_raw", &fs_.raw.h1),
        ("triangle_raw", &fs_.raw.h2),
        ("vertex_hidden", &fs_.h0),
        ("edge_hidden", &fs_.h1),
        ("triangle_hidden", &fs_.h2),
    ];
    for (name, m) in tiers {
        let (header, bytes) = matrix_dump(m);
        write_file(&a.out_dir.join(format!("{name}.bin")), bytes)?;
        let json = serde_json::to_string(&header).expect("header serializes") + "\n";
        write_file(&a.out_dir.join(format!("{name}.json")), json)?;
        emit(out, format!("{name} {}x{}", m.nrows(), m.ncols()))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MetricsFile {
    best_epoch: usize,
    train: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    val: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<MetricsReport>,
}

struct RunData {
    train: Vec<Sample>,
    val: Vec<Sample>,
    test: Vec<Sample>,
}

fn load_run_data(rc: &RunConfig, table: &AtomFeatureTable) -> CliResult<RunData> {
    let mut buckets: [Vec<DatasetRecord>; 3] = Default::default();
    for r in load_records(&rc.paths.train)? {
        let slot = match r.split {
            None | Some(SplitTag::Train) => 0,
            Some(SplitTag::Val) => 1,
            Some(SplitTag::Test) => 2,
        };
        buckets[slot].push(r);
    }
    if let Some(p) = &rc.paths.val {
        buckets[1].extend(load_records(p)?);
    }
    if let Some(p) = &rc.paths.test {
        buckets[2].extend(load_records(p)?);
    }
    if buckets[0].is_empty() {
        return Err(data(format!("{}: no training records", rc.paths.train.display())));
    }
    let k = rc.train.k_neighbors;
    Ok(RunData {
        train: prepare(&buckets[0], k, table)?,
        val: prepare(&buckets[1], k, table)?,
        test: prepare(&buckets[2], k, table)?,
    })
}

fn run_training(rc: RunConfig, seed: Option<u64>, from: Option<&Path>, out: &mut dyn Write) -> CliResult {
    let mut cfg = rc.train.clone();
    cfg.seed = resolve_seed(seed, cfg.seed)?;
    if from.is_none() || cfg.epochs > 0 {
        cfg.validate().map_err(train_error)?;
    }
    let table = load_table(rc.paths.atom_table.as_deref())?;
    let run = load_run_data(&rc, &table)?;
    fs::create_dir_all(&rc.paths.out_dir).map_err(|e| input_err(&rc.paths.out_dir, e))?;
    let ckpt = rc.paths.out_dir.join("model.ckpt");
    cfg.checkpoint_path = Some(ckpt.clone());
    let table_ref = match &rc.paths.atom_table {
        Some(p) => serde_json::Value::String(fs::canonicalize(p).unwrap_or_else(|_| p.clone()).display().to_string()),
        None => serde_json::Value::Null,
    };
    cfg.metadata.insert("atom_table".into(), table_ref);

    let outcome = match from {
        Some(pre) => trainer::finetune(pre, &cfg, &run.train, &run.val),
        None => trainer::train(&cfg, &run.train, &run.val),
    }
    .map_err(train_error)?;
    if outcome.history.is_empty() {
        let extra = serde_json::Value::Object(cfg.metadata.clone());
        outcome.best.save(&ckpt, extra).map_err(|e| input_err(&ckpt, e))?;
    }
    write_file(&rc.paths.out_dir.join("history.jsonl"), history_jsonl(&outcome.history))?;

    let report = |set: &[Sample]| -> CliResult<Option<MetricsReport>> {
        if set.is_empty() {
            return Ok(None);
        }
        trainer::evaluate(&outcome.best, set).map(|(m, _)| Some(m)).map_err(train_error)
    };
    let metrics = MetricsFile {
        best_epoch: outcome.best_epoch,
        train: report(&run.train)?.expect("training set is nonempty"),
        val: report(&run.val)?,
        test: report(&run.test)?,
    };
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    write_file(&rc.paths.out_dir.join("metrics.json"), json)?;

    emit(out, format!("best epoch {}", metrics.best_epoch))?;
    for (name, m) in [("train", Some(&metrics.train)), ("val", metrics.val.as_ref()), ("test", metrics.test.as_ref())] {
        if let Some(m) = m {
            emit(out, format!("{name} MAE {:.6}", m.mae))?;
        }
    }
    emit(out, format!("checkpoint {}", ckpt.display()))
}

fn checkpoint_k_and_table(ckpt: &Path, k: Option<usize>, table: Option<&Path>) -> CliResult<(usize, AtomFeatureTable)> {
    let extra = read_sidecar_extra(ckpt).unwrap_or_default();
    let k = k.or_else(|| extra["k_neighbors"].as_u64().map(|v| v as usize)).unwrap_or(12);
    let recorded = extra["atom_table"].as_str().map(PathBuf::from);
    let table = load_table(table.or(recorded.as_deref()))?;
    Ok((k, table))
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult {
    let model = SformerModel::load(&a.checkpoint, None).map_err(checkpoint_error)?;
    let (k, table) = checkpoint_k_and_table(&a.checkpoint, a.k, a.atom_table.as_deref())?;
    if !a.data.is_file() {
        return Err(input(format!("{}: no such file", a.data.display())));
    }
    let samples = prepare(&load_records(&a.data)?, k, &table)?;
    let (m, _) = trainer::evaluate(&model, &samples).map_err(train_error)?;
    let json = serde_json::to_string_pretty(&m).expect("metrics serialize");
    if let Some(p) = &a.out {
        write_file(p, json.clone() + "\n")?;
    }
    emit(out, json)
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> CliResult {
    let s = read_structure(&a.input)?;
    let model = SformerModel::load(&a.checkpoint, None).map_err(checkpoint_error)?;
    let (k, table) = checkpoint_k_and_table(&a.checkpoint, a.k, a.atom_table.as_deref())?;
    let id = s.id().unwrap_or_default().to_string();
    table.check_covers(&s).map_err(|e| feature_error(&id, e))?;
    let (c, raw) = trainer::prepare_structure(&s, k, &table).map_err(|e| input_err(&a.input.structure, e))?;
    let y = model.forward(&c, &raw).map_err(|e| input_err(&a.input.structure, e))?;
    if !y.is_finite() {
        return Err(CliError::new(ExitKind::Numeric, format!("prediction is not finite ({y})")));
    }
    emit(out, format!("{y:.6}"))?;
    emit(out, serde_json::json!({ "id": id, "prediction": y }))
}

fn cmd_homology(a: &HomologyArgs, out: &mut dyn Write) -> CliResult {
    if let Some(n) = a.fuzz {
        let seed = resolve_seed(a.seed, 0)?;
        let cases = homlab::fuzz(n, seed);
        let passed = cases.iter().filter(|c| c.report.verdicts.all()).count();
        if let Some(p) = &a.out {
            let lines: String =
                cases.iter().map(|c| serde_json::to_string(c).expect("case serializes") + "\n").collect();
            write_file(p, lines)?;
        }
        emit(out, format!("{passed}/{n} cases passed"))?;
        return if passed == n {
            Ok(())
        } else {
            let bad: Vec<String> =
                cases.iter().filter(|c| !c.report.verdicts.all()).map(|c| c.seed.to_string()).collect();
            Err(CliError::new(ExitKind::Numeric, format!("verdict failed for seeds {}", bad.join(", "))))
        };
    }
    let path = a.complex.as_ref().expect("clap requires COMPLEX without --fuzz");
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    let k = SimplicialComplex::from_json(&text).map_err(|e| input_err(path, e))?;
    let p = match &a.partition {
        Some(pp) => {
            let t = fs::read_to_string(pp).map_err(|e| input_err(pp, e))?;
            VertexPartition::from_json(&t, &k).map_err(|e| input_err(pp, e))?
        }
        None => VertexPartition::singletons(&k),
    };
    let construction = if a.pairwise { Construction::Pairwise } else { Construction::Star };
    let report = homlab::verify_with(&k, &p, construction);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &a.out {
        Some(o) => write_file(o, json + "\n")?,
        None => emit(out, json)?,
    }
    if !report.verdicts.all() {
        return Err(CliError::new(ExitKind::Numeric, format!("verdicts failed: {:?}", report.verdicts)));
    }
    if a.strict && !report.strict_pass() {
        return Err(CliError::new(
            ExitKind::Numeric,
            format!(
                "glued Betti numbers {:?} differ from the star construction",
                report.betti_ktilde
            ),
        ));
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(input("--threads must be at least 1"));
        }
        // Only the first configuration in a process takes effect.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Build(a) => cmd_build(a, out),
        Command::Featurize(a) => cmd_featurize(a, out),
        Command::Train(a) => run_training(RunConfig::load(&a.config)?, a.seed, None, out),
        Command::Finetune(a) => {
            if !a.from.is_file() {
                return Err(input(format!("{}: no such checkpoint", a.from.display())));
            }
            run_training(RunConfig::load(&a.config)?, a.seed, Some(&a.from), out)
        }
        Command::Eval(a) => cmd_eval(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Homology(a) => cmd_homology(a, out),
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitKind::Input as i32 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.kind as i32
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
