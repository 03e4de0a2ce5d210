//! Command-level drivers: configuration, artifact layout and run metadata.
//!
//! Each driver reads the dataset named by [`RunConfig::dataset`], writes its
//! artifacts under [`RunConfig::out`] and records a `run_meta.tsv` there.
//!
//! Artifacts:
//!
//! | file | written by |
//! |------|------------|
//! | `paths.tsv` | enumerate, precompute |
//! | `search_report.tsv`, `search_report.seed<s>.tsv` | search |
//! | `derived_paths.txt`, `trace.seed<s>.csv` | search |
//! | `checkpoint.hinp`, `train_trace.csv`, `eval.tsv` | train |
//! | `ablation_report.tsv` | ablate |
//! | `bench.csv` | bench |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::NdFloat;
use sha2::{Digest, Sha256};

use crate::aggregate::{precompute_all, PathFeatureSet, PrecomputeStats};
use crate::bench::{bench_csv, bench_epoch_time_vs_hop, BenchConfig, BenchRow};
use crate::binfmt::write_atomic;
use crate::datagen::{generate_planted_hin, SynthConfig, SynthDataset};
use crate::error::{Error, Result};
use crate::hin::{load_dataset, load_schema, save_dataset, sparsify_by_in_degree_cap, synth_features_for_featureless, Hin};
use crate::metapath::{enumerate_metapaths, parse_path_list, paths_to_tsv, MetaPath};
use crate::metrics::EvalResult;
use crate::neural::{Activation, AdamConfig};
use crate::search::{derive_top_m, multi_seed_search, MultiSeedOutcome, SearchConfig};
use crate::target::{ablate_run, train_target, AblationMode, AblationRow, TargetConfig, ABLATION_HEADER};

pub const DERIVED_PATHS: &str = "derived_paths.txt";
pub const SEARCH_REPORT: &str = "search_report.tsv";
pub const CHECKPOINT: &str = "checkpoint.hinp";
pub const ABLATION_REPORT: &str = "ablation_report.tsv";
pub const RUN_META: &str = "run_meta.tsv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" | "32" => Some(Precision::F32),
            "f64" | "64" => Some(Precision::F64),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

/// Settings shared by every command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Feature cache root; `<out>/cache` when unset.
    pub cache: Option<PathBuf>,
    pub max_hop: usize,
    pub exclude: Vec<String>,
    pub m: usize,
    /// Use every candidate instead of the top `m`.
    pub all_paths: bool,
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub alpha_lr: f64,
    pub alpha_weight_decay: f64,
    pub search_epochs: usize,
    pub n_seeds: usize,
    pub seed: u64,
    /// Explicit search seeds; overrides `seed` and `n_seeds` when nonempty.
    pub seeds: Vec<u64>,
    pub patience: usize,
    pub max_epochs: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub threads: usize,
    pub precision: Precision,
    /// Width of the features synthesized for featureless node types.
    pub synth_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            out: None,
            cache: None,
            max_hop: 3,
            exclude: Vec::new(),
            m: 20,
            all_paths: false,
            hidden: 512,
            lr: 1e-3,
            weight_decay: 0.0,
            alpha_lr: 1e-3,
            alpha_weight_decay: 0.0,
            search_epochs: 50,
            n_seeds: 3,
            seed: 0,
            seeds: Vec::new(),
            patience: 30,
            max_epochs: 500,
            dropout: 0.5,
            activation: Activation::Relu,
            threads: 1,
            precision: Precision::F32,
            synth_dim: 64,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "dataset",
    "out",
    "cache",
    "max_hop",
    "exclude",
    "m",
    "all_paths",
    "hidden",
    "lr",
    "weight_decay",
    "alpha_lr",
    "alpha_weight_decay",
    "search_epochs",
    "n_seeds",
    "seed",
    "seeds",
    "patience",
    "max_epochs",
    "dropout",
    "activation",
    "threads",
    "precision",
    "synth_dim",
];

fn bad(key: &str, value: &str) -> Error {
    Error::InvalidArgument(format!("bad value {value:?} for {key}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one key. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "dataset" => self.dataset = path_opt(v),
            "out" => self.out = path_opt(v),
            "cache" => self.cache = path_opt(v),
            "max_hop" => self.max_hop = num(&key, v)?,
            "exclude" => self.exclude = list(v).map(String::from).collect(),
            "m" => self.m = num(&key, v)?,
            "all_paths" => self.all_paths = num(&key, v)?,
            "hidden" => self.hidden = num(&key, v)?,
            "lr" => self.lr = num(&key, v)?,
            "weight_decay" => self.weight_decay = num(&key, v)?,
            "alpha_lr" => self.alpha_lr = num(&key, v)?,
            "alpha_weight_decay" => self.alpha_weight_decay = num(&key, v)?,
            "search_epochs" => self.search_epochs = num(&key, v)?,
            "n_seeds" => self.n_seeds = num(&key, v)?,
            "seed" => self.seed = num(&key, v)?,
            "seeds" => self.seeds = list(v).map(|s| num(&key, s)).collect::<Result<_>>()?,
            "patience" => self.patience = num(&key, v)?,
            "max_epochs" => self.max_epochs = num(&key, v)?,
            "dropout" => self.dropout = num(&key, v)?,
            "activation" => self.activation = Activation::parse(v).ok_or_else(|| bad(&key, v))?,
            "threads" => self.threads = num(&key, v)?,
            "precision" => self.precision = Precision::parse(v).ok_or_else(|| bad(&key, v))?,
            "synth_dim" => self.synth_dim = num(&key, v)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let join = |xs: &[String]| xs.join(",");
        Some(match key {
            "dataset" => show_path(&self.dataset),
            "out" => show_path(&self.out),
            "cache" => show_path(&self.cache),
            "max_hop" => self.max_hop.to_string(),
            "exclude" => join(&self.exclude),
            "m" => self.m.to_string(),
            "all_paths" => self.all_paths.to_string(),
            "hidden" => self.hidden.to_string(),
            "lr" => self.lr.to_string(),
            "weight_decay" => self.weight_decay.to_string(),
            "alpha_lr" => self.alpha_lr.to_string(),
            "alpha_weight_decay" => self.alpha_weight_decay.to_string(),
            "search_epochs" => self.search_epochs.to_string(),
            "n_seeds" => self.n_seeds.to_string(),
            "seed" => self.seed.to_string(),
            "seeds" => self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            "patience" => self.patience.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "dropout" => self.dropout.to_string(),
            "activation" => self.activation.as_str().to_string(),
            "threads" => self.threads.to_string(),
            "precision" => self.precision.as_str().to_string(),
            "synth_dim" => self.synth_dim.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. `#` starts a comment; blank lines are
    /// ignored.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::InvalidArgument(format!("{}:{}: {msg}", origin.display(), i + 1));
            let (k, v) = line.split_once('=').ok_or_else(|| at("expected `key = value`".into()))?;
            self.set(k.trim(), v).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Every key in canonical order, as config-file text.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS.iter().map(|k| format!("{k} = {}\n", self.get(k).unwrap())).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Search seeds: the explicit list, or `n_seeds` consecutive seeds
    /// starting at `seed`.
    pub fn search_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.n_seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::InvalidArgument("--out is required".into()))
    }

    pub fn dataset_dir(&self) -> Result<&Path> {
        self.dataset.as_deref().ok_or_else(|| Error::InvalidArgument("--dataset is required".into()))
    }

    pub fn cache_root(&self) -> Result<PathBuf> {
        match &self.cache {
            Some(c) => Ok(c.clone()),
            None => Ok(self.out_dir()?.join("cache")),
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            m: self.m,
            hidden: self.hidden,
            epochs: self.search_epochs,
            omega: AdamConfig::default().with_lr(self.lr).with_weight_decay(self.weight_decay),
            alpha: AdamConfig::default().with_lr(self.alpha_lr).with_weight_decay(self.alpha_weight_decay),
            dropout: self.dropout,
            activation: self.activation,
        }
    }

    pub fn target_config(&self) -> TargetConfig {
        TargetConfig {
            hidden: self.hidden,
            adam: AdamConfig::default().with_lr(self.lr).with_weight_decay(self.weight_decay),
            dropout: self.dropout,
            activation: self.activation,
            patience: self.patience,
            max_epochs: self.max_epochs,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.hidden == 0 || self.threads == 0 {
            return Err(Error::InvalidArgument("m, hidden and threads must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Writes `run_meta.tsv`: command, version, config hash, seeds, threads,
/// every config key and every command argument.
pub fn write_run_meta(cfg: &RunConfig, command: &str, args: &[(String, String)]) -> Result<()> {
    let dir = cfg.out_dir()?;
    let mut s = String::from("# key\tvalue\n");
    writeln!(s, "command\t{command}").unwrap();
    writeln!(s, "version\t{}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "config_hash\t{}", cfg.hash()).unwrap();
    let seeds: Vec<String> = cfg.search_seeds().iter().map(u64::to_string).collect();
    writeln!(s, "seeds\t{}", seeds.join(",")).unwrap();
    writeln!(s, "threads\t{}", cfg.threads).unwrap();
    for k in CONFIG_KEYS {
        writeln!(s, "config.{k}\t{}", cfg.get(k).unwrap()).unwrap();
    }
    for (k, v) in args {
        writeln!(s, "arg.{k}\t{v}").unwrap();
    }
    write_file(&dir.join(RUN_META), s.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(path, bytes)
}

/// Loads the dataset and gives every featureless type synthesized features.
pub fn load_with_features(cfg: &RunConfig) -> Result<Hin> {
    let mut h = load_dataset(cfg.dataset_dir()?)?;
    let missing: Vec<String> = h.featureless_types().into_iter().map(String::from).collect();
    for t in missing {
        let f = synth_features_for_featureless(&h, &t, cfg.synth_dim, cfg.seed)?;
        h = h.with_features(&t, f)?;
    }
    Ok(h)
}

fn candidates(h: &Hin, cfg: &RunConfig) -> Result<Vec<MetaPath>> {
    let exclude: Vec<&str> = cfg.exclude.iter().map(String::as_str).collect();
    enumerate_metapaths(h.schema(), cfg.max_hop, &exclude)
}

/// Lists the candidate paths. Writes `paths.tsv` when an output directory
/// is configured.
pub fn run_enumerate(cfg: &RunConfig) -> Result<Vec<MetaPath>> {
    let schema = load_schema(cfg.dataset_dir()?)?;
    let exclude: Vec<&str> = cfg.exclude.iter().map(String::as_str).collect();
    let paths = enumerate_metapaths(&schema, cfg.max_hop, &exclude)?;
    if cfg.out.is_some() {
        write_file(&cfg.out_dir()?.join("paths.tsv"), paths_to_tsv(&paths).as_bytes())?;
        write_run_meta(cfg, "enumerate", &[])?;
    }
    Ok(paths)
}

/// Aggregates every candidate into the feature cache.
pub fn run_precompute(cfg: &RunConfig) -> Result<(PathFeatureSet, PrecomputeStats)> {
    let h = load_with_features(cfg)?;
    let paths = candidates(&h, cfg)?;
    let out = precompute_all(&h, &paths, Some(&cfg.cache_root()?))?;
    write_file(&cfg.out_dir()?.join("paths.tsv"), paths_to_tsv(&paths).as_bytes())?;
    write_run_meta(cfg, "precompute", &[])?;
    Ok(out)
}

pub struct SearchOutcome {
    pub outcome: MultiSeedOutcome,
    pub derived: Vec<String>,
    pub candidates: usize,
}

fn dispatch_search<F: NdFloat>(cfg: &RunConfig, feats: &PathFeatureSet, h: &Hin) -> Result<MultiSeedOutcome> {
    let mut scfg = cfg.search_config();
    scfg.m = scfg.m.min(feats.len());
    multi_seed_search::<F>(feats, h.labels(), h.splits(), &scfg, &cfg.search_seeds(), cfg.threads)
}

/// Multi-seed search over all candidates; writes every seed's report and
/// trace, the chosen report and the derived path list.
pub fn run_search(cfg: &RunConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let h = load_with_features(cfg)?;
    let paths = candidates(&h, cfg)?;
    let (feats, _) = precompute_all(&h, &paths, Some(&cfg.cache_root()?))?;
    let outcome = match cfg.precision {
        Precision::F32 => dispatch_search::<f32>(cfg, &feats, &h)?,
        Precision::F64 => dispatch_search::<f64>(cfg, &feats, &h)?,
    };
    let out = cfg.out_dir()?;
    for r in &outcome.reports {
        write_file(&out.join(format!("search_report.seed{}.tsv", r.seed)), r.to_tsv().as_bytes())?;
        write_file(&out.join(format!("trace.seed{}.csv", r.seed)), r.trace_csv().as_bytes())?;
    }
    let chosen = outcome.chosen();
    let m = if cfg.all_paths { feats.len() } else { cfg.m.min(feats.len()) };
    let derived = derive_top_m(chosen, m);
    write_file(&out.join(SEARCH_REPORT), chosen.to_tsv().as_bytes())?;
    let list: String = derived.iter().map(|p| format!("{p}\n")).collect();
    write_file(&out.join(DERIVED_PATHS), list.as_bytes())?;
    write_run_meta(cfg, "search", &[])?;
    Ok(SearchOutcome { outcome, derived, candidates: feats.len() })
}

pub struct TrainSummary {
    pub paths: Vec<String>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub val: EvalResult,
    pub test: EvalResult,
}

fn eval_tsv(s: &TrainSummary) -> String {
    let mut t = String::from("# split\taccuracy\tmicro_f1\tmacro_f1\n");
    for (name, r) in [("val", &s.val), ("test", &s.test)] {
        writeln!(t, "{name}\t{}\t{}\t{}", r.accuracy, r.micro_f1, r.macro_f1).unwrap();
    }
    t
}

fn train_as<F: NdFloat>(cfg: &RunConfig, feats: &PathFeatureSet, h: &Hin) -> Result<TrainSummary> {
    let o = train_target::<F>(feats, h.labels(), h.splits(), &cfg.target_config(), cfg.seed)?;
    let out = cfg.out_dir()?;
    write_file(&out.join(CHECKPOINT), &o.net.checkpoint_bytes())?;
    write_file(&out.join("train_trace.csv"), o.trace_csv().as_bytes())?;
    Ok(TrainSummary {
        paths: feats.paths().iter().map(|p| p.label().to_string()).collect(),
        best_epoch: o.best_epoch,
        epochs_run: o.epochs_run,
        val: o.val,
        test: o.test,
    })
}

/// Trains the target net on `paths_file`, or on `<out>/derived_paths.txt`
/// when no file is given.
pub fn run_train(cfg: &RunConfig, paths_file: Option<&Path>) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = cfg.out_dir()?;
    let list_path = match paths_file {
        Some(p) => p.to_path_buf(),
        None => {
            let p = out.join(DERIVED_PATHS);
            if !p.exists() {
                return Err(Error::MissingArtifact(format!("{} not found; run search first or pass --paths", p.display())));
            }
            p
        }
    };
    let text = fs::read_to_string(&list_path).map_err(|e| Error::io(&list_path, e))?;
    let h = load_with_features(cfg)?;
    let paths = parse_path_list(&text, h.schema())?;
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("{} lists no paths", list_path.display())));
    }
    let (feats, _) = precompute_all(&h, &paths, Some(&cfg.cache_root()?))?;
    let summary = match cfg.precision {
        Precision::F32 => train_as::<f32>(cfg, &feats, &h)?,
        Precision::F64 => train_as::<f64>(cfg, &feats, &h)?,
    };
    write_file(&out.join("eval.tsv"), eval_tsv(&summary).as_bytes())?;
    write_run_meta(cfg, "train", &[("paths".into(), list_path.display().to_string())])?;
    Ok(summary)
}

/// Full-set row followed by the row for `mode`, as written to
/// `ablation_report.tsv`.
pub fn run_ablate(cfg: &RunConfig, mode: AblationMode, repeats: usize) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let h = load_with_features(cfg)?;
    let paths = candidates(&h, cfg)?;
    let (feats, _) = precompute_all(&h, &paths, Some(&cfg.cache_root()?))?;
    let tcfg = cfg.target_config();
    let run = |m: AblationMode| match cfg.precision {
        Precision::F32 => ablate_run::<f32>(&feats, h.labels(), h.splits(), m, repeats, &tcfg, cfg.seed, cfg.threads),
        Precision::F64 => ablate_run::<f64>(&feats, h.labels(), h.splits(), m, repeats, &tcfg, cfg.seed, cfg.threads),
    };
    // Reject unknown names before spending time on the full-set row.
    mode.select(&feats)?;
    let rows = vec![run(AblationMode::Drop(Vec::new()))?, run(mode.clone())?];
    let mut s = format!("{ABLATION_HEADER}\n");
    for r in &rows {
        s.push_str(&r.tsv_row());
        s.push('\n');
    }
    let out = cfg.out_dir()?;
    write_file(&out.join(ABLATION_REPORT), s.as_bytes())?;
    let args = [
        ("mode".to_string(), mode.name().to_string()),
        ("paths".to_string(), mode.named().join(",")),
        ("repeats".to_string(), repeats.to_string()),
    ];
    write_run_meta(cfg, "ablate", &args)?;
    Ok(rows)
}

/// Times search and training per epoch across `hops`; writes `bench.csv`.
pub fn run_bench(cfg: &RunConfig, hops: &[usize], repeats: usize, epochs: usize) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let h = load_with_features(cfg)?;
    let bcfg = BenchConfig {
        hops: hops.to_vec(),
        m: (!cfg.all_paths).then_some(cfg.m),
        repeats,
        search_epochs: epochs,
        train_epochs: epochs,
        hidden: cfg.hidden,
        adam: AdamConfig::default().with_lr(cfg.lr).with_weight_decay(cfg.weight_decay),
        dropout: cfg.dropout,
        activation: cfg.activation,
        seed: cfg.seed,
    };
    let rows = match cfg.precision {
        Precision::F32 => bench_epoch_time_vs_hop::<f32>(&h, &bcfg)?,
        Precision::F64 => bench_epoch_time_vs_hop::<f64>(&h, &bcfg)?,
    };
    write_file(&cfg.out_dir()?.join("bench.csv"), bench_csv(&rows).as_bytes())?;
    let hop_list: Vec<String> = hops.iter().map(usize::to_string).collect();
    let args = [
        ("hops".to_string(), hop_list.join(",")),
        ("repeats".to_string(), repeats.to_string()),
        ("epochs".to_string(), epochs.to_string()),
    ];
    write_run_meta(cfg, "bench", &args)?;
    Ok(rows)
}

/// Writes a planted synthetic dataset into `<out>`.
pub fn run_gen_synth(cfg: &RunConfig, synth: &SynthConfig) -> Result<SynthDataset> {
    let d = generate_planted_hin(synth)?;
    d.write(cfg.out_dir()?)?;
    write_run_meta(cfg, "gen-synth", &[("synth_config".into(), synth.to_text().replace('\n', ";"))])?;
    Ok(d)
}

/// Writes the degree-capped copy of the dataset into `<out>`.
pub fn run_sparsify(cfg: &RunConfig, cap: usize) -> Result<Hin> {
    let h = load_dataset(cfg.dataset_dir()?)?;
    let s = sparsify_by_in_degree_cap(&h, cap, cfg.seed)?;
    save_dataset(&s, cfg.out_dir()?)?;
    write_run_meta(cfg, "sparsify", &[("cap".into(), cap.to_string())])?;
    Ok(s)
}
