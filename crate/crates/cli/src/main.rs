use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use trajstc::evaluation::{ari, nmi, NmiNormalization};
use trajstc::io::{self, ingest_csv, read_labels, write_trajectories_csv};
use trajstc::pipeline::{run_pipeline, Mode, PipelineConfig, DEFAULT_STEP};
use trajstc::stability::{CandidateMode, MuMinScope};
use trajstc::synthetic::{generate_case, generate_corridor, CaseSpec, CorridorSpec};
use trajstc::trajectory::preprocess;
use trajstc::{Error, Result};

#[derive(Parser)]
#[command(name = "trajstc", version, about = "Split/merge trajectory clustering with stability post-processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deduplicate and resample tracks to a common length.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "resample-T", value_name = "T")]
        resample_len: Option<usize>,
    },
    /// Whole-trajectory clustering without STC.
    Cluster(RunArgs),
    /// Sliding-window sub-trajectory clustering.
    Subcluster(RunArgs),
    /// Whole-trajectory clustering followed by STC.
    Stabilize(RunArgs),
    /// NMI and ARI of an assignment file against ground truth.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = NmiArg::Arithmetic)]
        nmi_normalization: NmiArg,
    },
    /// Write a synthetic fixture as CSV.
    #[command(subcommand)]
    Generate(Generate),
    /// Full pipeline.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum Generate {
    /// Parallel lanes whose middle group detours for a while.
    Corridor {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        top: usize,
        #[arg(long, default_value_t = 2)]
        deviators: usize,
        #[arg(long, default_value_t = 2)]
        bottom: usize,
        #[arg(long = "len", default_value_t = 50)]
        len: usize,
        #[arg(long, default_value_t = 20)]
        deviation_start: usize,
        #[arg(long, default_value_t = 30)]
        deviation_end: usize,
        #[arg(long, default_value_t = 4.0)]
        deviation_offset: f64,
        #[arg(long, default_value_t = 1.0)]
        lane_gap: f64,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write `traj_id,cluster_id` labels (one per lane group).
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// A tight cluster plus one probe trajectory (cases 1 to 4).
    Case {
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "case", value_parser = clap::value_parser!(u8).range(1..=4))]
        case_id: u8,
        #[arg(long, default_value_t = 1.5)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum NmiArg {
    Arithmetic,
    Max,
}

impl From<NmiArg> for NmiNormalization {
    fn from(a: NmiArg) -> Self {
        match a {
            NmiArg::Arithmetic => NmiNormalization::Arithmetic,
            NmiArg::Max => NmiNormalization::Max,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    PerCluster,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Whole,
    Sub,
    Both,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    min_lns: usize,
    #[arg(long = "resample-T", value_name = "T")]
    resample_len: Option<usize>,
    /// Window length in intervals (default: min(15, m)).
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: usize,
    /// Only used by `run`.
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[arg(long)]
    no_stc: bool,
    #[arg(long, value_enum, default_value_t = ScopeArg::PerCluster)]
    mu_min_scope: ScopeArg,
    /// Let STC re-join whole clusters that split off, not just outliers.
    #[arg(long)]
    stc_split_clusters: bool,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NmiArg::Arithmetic)]
    nmi_normalization: NmiArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Record per-stage wall-clock times in report.json.
    #[arg(long)]
    timings: bool,
    /// Always evaluate the full distance integral in neighbour tests.
    #[arg(long)]
    no_fast_path: bool,
}

impl RunArgs {
    fn config(&self) -> PipelineConfig {
        let mut c = PipelineConfig::new(&self.input, &self.out, self.eps, self.min_lns);
        c.resample_len = self.resample_len;
        c.window = self.window;
        c.step = self.step;
        c.mode = match self.mode {
            ModeArg::Whole => Mode::Whole,
            ModeArg::Sub => Mode::Sub,
            ModeArg::Both => Mode::Both,
        };
        c.stc_enabled = !self.no_stc;
        c.stability.mu_min_scope = match self.mu_min_scope {
            ScopeArg::PerCluster => MuMinScope::PerCluster,
            ScopeArg::Global => MuMinScope::Global,
        };
        if self.stc_split_clusters {
            c.stability.candidates = CandidateMode::OutliersAndSplitClusters;
        }
        c.truth = self.truth.clone();
        c.nmi_normalization = self.nmi_normalization.into();
        c.seed = self.seed;
        c.threads = self.threads;
        c.fast_path = !self.no_fast_path;
        c.record_timings = self.timings;
        c
    }
}

fn write_group_truth(path: &Path, sizes: &[usize]) -> Result<()> {
    let mut text = String::from("traj_id,cluster_id\n");
    let mut id = 0;
    for (label, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            text.push_str(&format!("{id},{label}\n"));
            id += 1;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        context: format!("writing {}", path.display()),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { input, out, resample_len } => {
            let ingested = ingest_csv(&input)?;
            let (trajs, dropped) = preprocess(&ingested.tracks, resample_len)?;
            info!("{} trajectories kept, {} dropped", trajs.len(), ingested.dropped.len() + dropped.len());
            write_trajectories_csv(&out.join("trajectories.csv"), &trajs)
        }
        Command::Cluster(args) => {
            let mut c = args.config();
            c.mode = Mode::Whole;
            c.stc_enabled = false;
            run_pipeline(&c).map(drop)
        }
        Command::Subcluster(args) => {
            let mut c = args.config();
            c.mode = Mode::Sub;
            run_pipeline(&c).map(drop)
        }
        Command::Stabilize(args) => {
            let mut c = args.config();
            c.mode = Mode::Whole;
            c.stc_enabled = true;
            run_pipeline(&c).map(drop)
        }
        Command::Run(args) => run_pipeline(&args.config()).map(drop),
        Command::Metrics { pred, truth, nmi_normalization } => {
            let pred = read_labels(&pred)?;
            let truth = read_labels(&truth)?;
            let out = BTreeMap::from([
                ("ari", ari(&pred, &truth)?),
                ("nmi", nmi(&pred, &truth, nmi_normalization.into())?),
            ]);
            println!("{}", io::to_json_pretty(&out)?);
            Ok(())
        }
        Command::Generate(Generate::Corridor {
            out,
            top,
            deviators,
            bottom,
            len,
            deviation_start,
            deviation_end,
            deviation_offset,
            lane_gap,
            jitter,
            seed,
            truth_out,
        }) => {
            let spec = CorridorSpec {
                n_straight_top: top,
                n_deviators: deviators,
                n_straight_bottom: bottom,
                len,
                deviation_start,
                deviation_end,
                deviation_offset,
                lane_gap,
                seed,
                jitter,
            };
            let trajs = generate_corridor(&spec).map_err(|e| Error::Config(e.to_string()))?;
            write_trajectories_csv(&out, &trajs)?;
            match truth_out {
                Some(p) => write_group_truth(&p, &[top, deviators, bottom]),
                None => Ok(()),
            }
        }
        Command::Generate(Generate::Case { out, case_id, eps, seed }) => {
            let spec = CaseSpec::canonical(case_id, seed)?;
            let (mut trajs, probe) = generate_case(&spec, eps).map_err(|e| Error::Config(e.to_string()))?;
            trajs.push(probe);
            write_trajectories_csv(&out, &trajs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRAJ_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
