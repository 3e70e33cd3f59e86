//! Command-line front end.
//!
//! Every command returns through [`run`], which maps errors to exit codes
//! (1 config, 2 data, 3 runtime) and prints a single
//! `error kind=<Kind> class=<class>: <message>` line to stderr.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, ErrorClass, Result};
use crate::mesh::{extract_edge_features, load_obj, read_eseg, read_eseg_for, write_eseg};
use crate::metrics::{confusion, MetricsReport};
use crate::net::{load_checkpoint, save_checkpoint, MeshUNet, NetworkConfig};
use crate::ops::NormMode;
use crate::pool::{mesh_pool, pool_memory_report};
use crate::rescale::rescale_labels;
use crate::synth::{generate, icosphere, SynthSpec};
use crate::train::{
    evaluate, load_split, median_frequency_weights, train_loop, write_split, LabeledSample,
    Prepared, Split, TrainConfig, TrainOptions,
};

/// Network, training and path settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub dataroot: Option<PathBuf>,
    /// Derive `weighted_loss` from the training split instead of using the listed values.
    pub auto_weights: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::table1(),
            train: TrainConfig::default(),
            dataroot: None,
            auto_weights: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true or false, got {v:?}"
        ))),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: [&'static str; 21] = [
        "arch",
        "ncf",
        "pool_res",
        "ninput_edges",
        "res_blocks",
        "init_type",
        "init_gain",
        "num_classes",
        "batch_size",
        "lr",
        "lr_policy",
        "beta1",
        "num_aug",
        "flip_edges",
        "scale_verts",
        "slide_verts",
        "weighted_loss",
        "epochs",
        "decay_epochs",
        "seed",
        "dataroot",
    ];

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let (n, t) = (&mut self.network, &mut self.train);
        match key {
            "arch" => n.arch = v.trim().to_string(),
            "ncf" => n.ncf = parse_list(key, v)?,
            "pool_res" => n.pool_res = parse_list(key, v)?,
            "ninput_edges" => n.ninput_edges = parse(key, v)?,
            "res_blocks" => n.res_blocks = parse(key, v)?,
            "init_type" => n.init_type = v.trim().to_string(),
            "init_gain" => n.init_gain = parse(key, v)?,
            "num_classes" => n.num_classes = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "lr_policy" => t.lr_policy = v.trim().to_string(),
            "beta1" => t.beta1 = parse(key, v)?,
            "num_aug" => t.num_aug = parse(key, v)?,
            "flip_edges" => t.flip_edges = parse(key, v)?,
            "scale_verts" => t.scale_verts = parse_bool(key, v)?,
            "slide_verts" => t.slide_verts = parse(key, v)?,
            "weighted_loss" if v.trim() == "auto" => self.auto_weights = true,
            "weighted_loss" => {
                t.weighted_loss = parse_list(key, v)?;
                self.auto_weights = false;
            }
            "epochs" => t.epochs = parse(key, v)?,
            "decay_epochs" => t.decay_epochs = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "dataroot" => self.dataroot = Some(PathBuf::from(v.trim())),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key=value` text; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key=value", i + 1))
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let (n, t) = (&self.network, &self.train);
        Some(match key {
            "arch" => n.arch.clone(),
            "ncf" => join(&n.ncf),
            "pool_res" => join(&n.pool_res),
            "ninput_edges" => n.ninput_edges.to_string(),
            "res_blocks" => n.res_blocks.to_string(),
            "init_type" => n.init_type.clone(),
            "init_gain" => n.init_gain.to_string(),
            "num_classes" => n.num_classes.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "lr" => t.lr.to_string(),
            "lr_policy" => t.lr_policy.clone(),
            "beta1" => t.beta1.to_string(),
            "num_aug" => t.num_aug.to_string(),
            "flip_edges" => t.flip_edges.to_string(),
            "scale_verts" => t.scale_verts.to_string(),
            "slide_verts" => t.slide_verts.to_string(),
            "weighted_loss" if self.auto_weights => "auto".into(),
            "weighted_loss" => join(&t.weighted_loss),
            "epochs" => t.epochs.to_string(),
            "decay_epochs" => t.decay_epochs.to_string(),
            "seed" => t.seed.to_string(),
            "dataroot" => self.dataroot.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    /// Every set key as `key=value` lines; [`RunConfig::from_text`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .filter_map(|k| self.get(k).map(|v| format!("{k}={v}\n")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.auto_weights {
            let mut t = self.train.clone();
            t.weighted_loss = vec![1.0; self.network.num_classes];
            t.validate(self.network.num_classes)
        } else {
            self.train.validate(self.network.num_classes)
        }
    }
}

macro_rules! config_flags {
    ($($field:ident),+ $(,)?) => {
        /// Settings shared by commands that build or load a network.
        #[derive(Debug, Default, Args)]
        pub struct ConfigFlags {
            /// Flat key=value file; explicit flags override its values.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $(
                #[arg(long = stringify!($field), value_name = "VALUE")]
                pub $field: Option<String>,
            )+
        }

        impl ConfigFlags {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push((stringify!($field), x.as_str()));
                    }
                )+
                v
            }
        }
    };
}

config_flags!(
    arch,
    ncf,
    pool_res,
    ninput_edges,
    res_blocks,
    init_type,
    init_gain,
    num_classes,
    batch_size,
    lr,
    lr_policy,
    beta1,
    num_aug,
    flip_edges,
    scale_verts,
    slide_verts,
    weighted_loss,
    epochs,
    decay_epochs,
    seed,
    dataroot,
);

impl ConfigFlags {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for (k, v) in self.pairs() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Running,
    Sample,
}

impl From<ModeArg> for NormMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Running => NormMode::Running,
            ModeArg::Sample => NormMode::Sample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpenEnds {
    Alternate,
    Open,
    Closed,
}

#[derive(Debug, Parser)]
#[command(
    name = "medmesh",
    version,
    about = "Edge-based triangle mesh segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a MeshUNet on `<dataroot>/{train,val}`.
    Train {
        #[command(flatten)]
        flags: Box<ConfigFlags>,
        /// Output directory for checkpoints, log and effective config.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a split, or a prediction file against ground truth.
    Eval {
        #[arg(long, required_unless_present = "pred")]
        checkpoint: Option<PathBuf>,
        #[arg(long, requires = "checkpoint")]
        dataroot: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_enum, default_value = "running")]
        mode: ModeArg,
        #[arg(long, requires = "gt", conflicts_with = "checkpoint")]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long = "num_classes", default_value_t = 4)]
        num_classes: usize,
    },
    /// Predict per-edge labels for one mesh.
    Segment {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "running")]
        mode: ModeArg,
    },
    /// Transfer edge labels from a low-resolution mesh to a high-resolution one.
    Rescale {
        #[arg(long)]
        low: PathBuf,
        #[arg(long = "low_labels")]
        low_labels: PathBuf,
        #[arg(long)]
        high: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic labeled dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        train: usize,
        #[arg(long, default_value_t = 12)]
        val: usize,
        #[arg(long, default_value_t = 12)]
        test: usize,
        #[arg(long = "target_edges", default_value_t = 2300)]
        target_edges: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "open_ends", value_enum, default_value = "alternate")]
        open_ends: OpenEnds,
    },
    /// Dense vs sparse storage of one pooling step on subdivided icospheres.
    BenchPoolMemory {
        /// Edge counts; each must be 30·4^k.
        #[arg(required = true)]
        edges: Vec<usize>,
        #[arg(long, default_value_t = 0.75)]
        fraction: f64,
    },
}

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 1,
        ErrorClass::Data => 2,
        ErrorClass::Runtime => 3,
    }
}

/// One-line, machine-parsable description of `e`.
pub fn error_line(e: &Error) -> String {
    let class = match e.class() {
        ErrorClass::Config => "config",
        ErrorClass::Data => "data",
        ErrorClass::Runtime => "runtime",
    };
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error kind={} class={class}: {msg}", e.kind())
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error kind=Usage class=config: {first}");
            return 1;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(e.class())
        }
    }
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Train { flags, out: dir } => cmd_train(&flags.resolve()?, &dir, out),
        Command::Eval {
            checkpoint,
            dataroot,
            split,
            mode,
            pred,
            gt,
            num_classes,
        } => {
            let report = match (pred, gt, checkpoint) {
                (Some(p), Some(g), _) => cmd_eval_files(&p, &g, num_classes)?,
                (_, _, Some(ck)) => {
                    let root =
                        dataroot.ok_or_else(|| Error::Config("--dataroot is required".into()))?;
                    cmd_eval(&ck, &root, Split::parse(&split)?, mode.into())?
                }
                _ => {
                    return Err(Error::Config(
                        "give --checkpoint or --pred with --gt".into(),
                    ))
                }
            };
            emit(out, report)
        }
        Command::Segment {
            checkpoint,
            mesh,
            out: dst,
            mode,
        } => {
            let labels = cmd_segment(&checkpoint, &mesh, &dst, mode.into())?;
            emit(out, format!("edges={}", labels.len()))
        }
        Command::Rescale {
            low,
            low_labels,
            high,
            out: dst,
        } => {
            let labels = cmd_rescale(&low, &low_labels, &high, &dst)?;
            emit(out, format!("edges={}", labels.len()))
        }
        Command::Synth {
            out: dst,
            train,
            val,
            test,
            target_edges,
            seed,
            open_ends,
        } => {
            let counts = [
                (Split::Train, train),
                (Split::Val, val),
                (Split::Test, test),
            ];
            cmd_synth(&dst, &counts, target_edges, seed, open_ends)?;
            emit(out, format!("train={train} val={val} test={test}"))
        }
        Command::BenchPoolMemory { edges, fraction } => {
            emit(out, "edge_count\tdense\tsparse\tratio")?;
            for row in cmd_bench_pool_memory(&edges, fraction)? {
                emit(out, row)?;
            }
            Ok(())
        }
    }
}

pub fn cmd_train(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let root = cfg
        .dataroot
        .as_deref()
        .ok_or_else(|| Error::Config("dataroot is required for training".into()))?;
    let k = cfg.network.num_classes;
    let train = load_split(root, Split::Train, k)?;
    let val = load_split(root, Split::Val, k)?;
    let mut cfg = cfg.clone();
    if cfg.auto_weights {
        cfg.train.weighted_loss = median_frequency_weights(&train, k)?;
        cfg.auto_weights = false;
    }
    cfg.validate()?;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::io(&cfg_path, e))?;
    let log_path = dir.join("train.log");
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
    let best_path = dir.join("best.json");
    let mut on_best = |m: &MeshUNet| save_checkpoint(m, &best_path);

    let net = MeshUNet::new(&cfg.network, cfg.train.seed)?;
    let outcome = train_loop(
        &train,
        &val,
        net,
        &cfg.train,
        TrainOptions {
            log: Some(&mut log),
            on_best: Some(&mut on_best),
            ..Default::default()
        },
    )?;
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    save_checkpoint(&outcome.last, dir.join("last.json"))?;
    let best = &outcome.history[outcome.best_epoch - 1];
    emit(
        out,
        format!(
            "best_epoch={} best_val_miou={}",
            outcome.best_epoch, best.val.iou.mean
        ),
    )
}

pub fn cmd_eval(
    checkpoint: &Path,
    root: &Path,
    split: Split,
    mode: NormMode,
) -> Result<MetricsReport> {
    let net = load_checkpoint(checkpoint, None)?;
    let samples = load_split(root, split, net.config().num_classes)?;
    let prepared: Vec<Prepared> = samples.iter().map(Prepared::new).collect::<Result<_>>()?;
    MetricsReport::from_confusion(&evaluate(&net, &prepared, mode)?)
}

/// Scores two label files of equal length; every edge counts.
pub fn cmd_eval_files(pred: &Path, gt: &Path, num_classes: usize) -> Result<MetricsReport> {
    let p = read_eseg(pred)?;
    let g = read_eseg(gt)?;
    let mask = vec![true; g.len()];
    MetricsReport::from_confusion(&confusion(&p, &g, &mask, num_classes)?)
}

pub fn cmd_segment(
    checkpoint: &Path,
    mesh: &Path,
    dst: &Path,
    mode: NormMode,
) -> Result<Vec<usize>> {
    let net = load_checkpoint(checkpoint, None)?;
    let mesh = load_obj(mesh)?;
    let labels = net.predict(&mesh, &extract_edge_features(&mesh)?, mode)?;
    write_eseg(&labels, dst)?;
    Ok(labels)
}

pub fn cmd_rescale(low: &Path, low_labels: &Path, high: &Path, dst: &Path) -> Result<Vec<usize>> {
    let low = load_obj(low)?;
    let labels = read_eseg_for(&low, low_labels)?;
    let high = load_obj(high)?;
    let out = rescale_labels(&low, &labels, &high)?;
    write_eseg(&out, dst)?;
    Ok(out)
}

/// Split `s` uses seeds `seed + 1000·s + i`.
pub fn cmd_synth(
    root: &Path,
    counts: &[(Split, usize)],
    target_edges: usize,
    seed: u64,
    open_ends: OpenEnds,
) -> Result<()> {
    for (s, &(split, n)) in counts.iter().enumerate() {
        let samples: Vec<LabeledSample> = (0..n)
            .map(|i| {
                let open = match open_ends {
                    OpenEnds::Alternate => i % 2 == 0,
                    OpenEnds::Open => true,
                    OpenEnds::Closed => false,
                };
                generate(&SynthSpec::sample(
                    seed + 1000 * s as u64 + i as u64,
                    target_edges,
                    open,
                ))
            })
            .collect::<Result<_>>()?;
        write_split(root, split, "synth_", &samples)?;
    }
    Ok(())
}

pub fn cmd_bench_pool_memory(
    edges: &[usize],
    fraction: f64,
) -> Result<Vec<crate::pool::MemoryReport>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("fraction {fraction} outside (0, 1)")));
    }
    edges
        .iter()
        .map(|&e| {
            let level = (0..8u32)
                .find(|&l| 30 * 4usize.pow(l) == e)
                .ok_or_else(|| {
                    Error::Config(format!("{e} is not an icosphere edge count (30·4^k)"))
                })?;
            let mesh = icosphere(level);
            let x = extract_edge_features(&mesh)?;
            let target = (fraction * e as f64).round() as usize;
            let pooled = mesh_pool(&mesh, &x, target)?;
            Ok(pool_memory_report(e, &pooled.history))
        })
        .collect()
}
