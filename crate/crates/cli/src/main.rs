use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use hinsearch::datagen::SynthConfig;
use hinsearch::pipeline::{self, RunConfig};
use hinsearch::target::AblationMode;
use hinsearch::{Error, ErrorClass};

/// Meta-path search and MLP training over heterogeneous graphs.
#[derive(Parser)]
#[command(name = "hinsearch", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by all commands. Each overrides the same key from
/// `--config`.
#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// Feature cache root (default `<out>/cache`).
    #[arg(long, global = true)]
    cache: Option<String>,
    #[arg(long, global = true)]
    max_hop: Option<String>,
    /// Comma-separated node types to keep out of candidate paths.
    #[arg(long, global = true)]
    exclude: Option<String>,
    /// Paths sampled per search epoch and kept after search.
    #[arg(long, global = true, conflicts_with = "all_paths")]
    m: Option<String>,
    /// Keep every candidate path.
    #[arg(long, global = true)]
    all_paths: bool,
    #[arg(long, global = true)]
    hidden: Option<String>,
    #[arg(long, global = true)]
    lr: Option<String>,
    #[arg(long, global = true)]
    weight_decay: Option<String>,
    #[arg(long, global = true)]
    alpha_lr: Option<String>,
    #[arg(long, global = true)]
    alpha_weight_decay: Option<String>,
    #[arg(long, global = true)]
    search_epochs: Option<String>,
    #[arg(long, global = true)]
    n_seeds: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Comma-separated search seeds.
    #[arg(long, global = true)]
    seeds: Option<String>,
    #[arg(long, global = true)]
    patience: Option<String>,
    #[arg(long, global = true)]
    max_epochs: Option<String>,
    #[arg(long, global = true)]
    dropout: Option<String>,
    /// relu, tanh or identity.
    #[arg(long, global = true)]
    activation: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    /// f32 or f64.
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Feature width for node types without features.
    #[arg(long, global = true)]
    synth_dim: Option<String>,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, String)> {
        let opts = [
            ("dataset", &self.dataset),
            ("out", &self.out),
            ("cache", &self.cache),
            ("max_hop", &self.max_hop),
            ("exclude", &self.exclude),
            ("m", &self.m),
            ("hidden", &self.hidden),
            ("lr", &self.lr),
            ("weight_decay", &self.weight_decay),
            ("alpha_lr", &self.alpha_lr),
            ("alpha_weight_decay", &self.alpha_weight_decay),
            ("search_epochs", &self.search_epochs),
            ("n_seeds", &self.n_seeds),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("patience", &self.patience),
            ("max_epochs", &self.max_epochs),
            ("dropout", &self.dropout),
            ("activation", &self.activation),
            ("threads", &self.threads),
            ("precision", &self.precision),
            ("synth_dim", &self.synth_dim),
        ];
        let mut out: Vec<_> = opts.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect();
        if self.all_paths {
            out.push(("all_paths", "true".into()));
        }
        out
    }

    fn run_config(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::default();
        if let Some(f) = &self.config {
            cfg.apply_file(f)?;
        }
        for (k, v) in self.flags() {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print candidate meta-paths as `path<TAB>hop<TAB>edges`.
    Enumerate,
    /// Aggregate every candidate into the feature cache.
    Precompute,
    /// Multi-seed super-net search; writes the report and derived paths.
    Search,
    /// Train the target net on derived (or given) paths.
    Train {
        /// Path list to train on instead of `<out>/derived_paths.txt`.
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Compare the full candidate set against a reduced one.
    Ablate {
        /// Comma-separated paths to remove.
        #[arg(long, conflicts_with = "keep", required_unless_present = "keep")]
        drop: Option<String>,
        /// Comma-separated paths to keep.
        #[arg(long)]
        keep: Option<String>,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// Per-epoch wall time and memory across maximum hops.
    Bench {
        /// Comma-separated maximum hops.
        #[arg(long, value_delimiter = ',', required = true)]
        hops: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Fixed epochs for both search and training.
        #[arg(long, default_value_t = 10)]
        epochs: usize,
    },
    /// Write a synthetic dataset with a planted predictive path.
    GenSynth {
        /// Generator config (see `synth.cfg` in a generated dataset).
        #[arg(long)]
        synth_config: Option<PathBuf>,
        /// Number of target nodes.
        #[arg(long)]
        targets: Option<usize>,
        #[arg(long)]
        strength: Option<f64>,
    },
    /// Write a copy of the dataset with per-edge-type in-degree capped.
    Sparsify {
        #[arg(long)]
        cap: usize,
    },
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = cli.common.run_config()?;
    match cli.command {
        Command::Enumerate => {
            for p in pipeline::run_enumerate(&cfg)? {
                println!("{}", p.tsv_row());
            }
        }
        Command::Precompute => {
            let (feats, stats) = pipeline::run_precompute(&cfg)?;
            println!(
                "paths\t{}\tproducts\t{}\tcache_hits\t{}\tcache_writes\t{}",
                feats.len(),
                stats.spmm_products,
                stats.cache_hits,
                stats.cache_writes
            );
        }
        Command::Search => {
            let s = pipeline::run_search(&cfg)?;
            let chosen = s.outcome.chosen();
            println!("candidates\t{}\tchosen_seed\t{}\tval_metric\t{:.4}", s.candidates, chosen.seed, chosen.val_metric);
            for p in &s.derived {
                println!("{p}");
            }
        }
        Command::Train { paths } => {
            let s = pipeline::run_train(&cfg, paths.as_deref())?;
            println!("paths\t{}\tbest_epoch\t{}\tepochs\t{}", s.paths.join(","), s.best_epoch, s.epochs_run);
            println!(
                "test\taccuracy\t{:.4}\tmicro_f1\t{:.4}\tmacro_f1\t{:.4}",
                s.test.accuracy, s.test.micro_f1, s.test.macro_f1
            );
        }
        Command::Ablate { drop, keep, repeats } => {
            let mode = match (drop, keep) {
                (Some(d), None) => AblationMode::Drop(split_list(&d)),
                (None, Some(k)) => AblationMode::Keep(split_list(&k)),
                _ => return Err(Error::InvalidArgument("give exactly one of --drop and --keep".into())),
            };
            println!("{}", hinsearch::target::ABLATION_HEADER);
            for r in pipeline::run_ablate(&cfg, mode, repeats)? {
                println!("{}", r.tsv_row());
            }
        }
        Command::Bench { hops, repeats, epochs } => {
            let rows = pipeline::run_bench(&cfg, &hops, repeats, epochs)?;
            print!("{}", hinsearch::bench::bench_csv(&rows));
        }
        Command::GenSynth { synth_config, targets, strength } => {
            let mut synth = match &synth_config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    SynthConfig::parse(&text, p)?
                }
                None => SynthConfig::default(),
            };
            if let Some(n) = targets {
                synth = synth.with_targets(n);
            }
            if let Some(s) = strength {
                synth.signal_strength = s;
            }
            if cli.common.seed.is_some() {
                synth.seed = cfg.seed;
            }
            let d = pipeline::run_gen_synth(&cfg, &synth)?;
            println!("planted\t{}\ttargets\t{}", d.planted.label(), d.hin.num_targets());
        }
        Command::Sparsify { cap } => {
            let h = pipeline::run_sparsify(&cfg, cap)?;
            println!("edges\t{}", h.num_edges());
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error\tusage\t{}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error\t{}\t{}", e.kind(), one_line(&e.to_string()));
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Data => 3,
                ErrorClass::Numeric => 4,
            })
        }
    }
}
