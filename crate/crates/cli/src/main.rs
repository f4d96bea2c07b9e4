//! `radnet`: fit, evaluate and simulate latent-radius spatial network models.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "radnet", version, about = "Latent-radius models for spatial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Base seed; overrides `sampler.seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Key-value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Config override as KEY=VALUE; repeatable, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Clone, Debug)]
pub struct GraphArgs {
    /// Node CSV with columns id,x,y.
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edge CSV with columns src,dst.
    #[arg(long)]
    pub edges: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Spatial statistics: dispersion, exponential distance fit, KS test.
    Analyze {
        #[command(flatten)]
        graph: GraphArgs,
        /// Bins in the linked-distance histogram.
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fit Radius or Radius+Comms by MCMC.
    Fit {
        #[command(flatten)]
        graph: GraphArgs,
        /// `radius` or `radius-comms`.
        #[arg(long, default_value = "radius")]
        model: String,
        #[command(flatten)]
        common: Common,
    },
    /// Score node pairs with a fitted trace.
    Predict {
        #[command(flatten)]
        graph: GraphArgs,
        /// Trace JSONL written by `fit` on this graph.
        #[arg(long)]
        trace: PathBuf,
        /// Held-out edges (src,dst); when given, AUC is reported.
        #[arg(long)]
        test_edges: Option<PathBuf>,
        /// Score with the MAP sample instead of the posterior mean.
        #[arg(long)]
        map: bool,
        #[command(flatten)]
        common: Common,
    },
    /// k-fold cross-validated link prediction.
    Crossval {
        #[command(flatten)]
        graph: GraphArgs,
        /// radius, radius-comms, pa, expdist or empdist.
        #[arg(long, default_value = "radius")]
        method: String,
        /// Also write the scored pairs of every fold.
        #[arg(long)]
        dump_scores: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Community detection and NMI comparison.
    Communities {
        #[command(flatten)]
        graph: GraphArgs,
        /// Comma-separated: pa, expdist, empdist, radius-fit, radius-comms.
        #[arg(long, value_delimiter = ',', default_value = "pa,expdist,empdist,radius-fit,radius-comms")]
        methods: Vec<String>,
        /// Radius trace for the radius-fit null; fitted when absent.
        #[arg(long)]
        radius_trace: Option<PathBuf>,
        /// Radius+Comms trace; fitted when absent.
        #[arg(long)]
        comms_trace: Option<PathBuf>,
        /// Rescale every null matrix to sum to 2m.
        #[arg(long)]
        renormalize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic networks from a JSON spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        /// Number of networks; seeds are derived from the spec seed.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Prior-sensitivity experiment on synthetic networks.
    PriorSens {
        #[arg(long)]
        spec: PathBuf,
        /// JSON array of prior settings.
        #[arg(long)]
        settings: PathBuf,
        #[arg(long, default_value_t = 10)]
        networks: usize,
        /// Bins in the posterior histograms.
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<run::InputError>() {
            return 2;
        }
        if let Some(ce) = cause.downcast_ref::<radnet_core::Error>() {
            return if ce.is_input_error() { 2 } else { 3 };
        }
    }
    3
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Analyze { graph, bins, common } => commands::analyze(&graph, bins, &common),
        Command::Fit { graph, model, common } => commands::fit(&graph, &model, &common),
        Command::Predict {
            graph,
            trace,
            test_edges,
            map,
            common,
        } => commands::predict(&graph, &trace, test_edges.as_deref(), map, &common),
        Command::Crossval {
            graph,
            method,
            dump_scores,
            common,
        } => commands::crossval(&graph, &method, dump_scores, &common),
        Command::Communities {
            graph,
            methods,
            radius_trace,
            comms_trace,
            renormalize,
            common,
        } => commands::communities(
            &graph,
            &methods,
            radius_trace.as_deref(),
            comms_trace.as_deref(),
            renormalize,
            &common,
        ),
        Command::Generate { spec, count, common } => commands::generate(&spec, count, &common),
        Command::PriorSens {
            spec,
            settings,
            networks,
            bins,
            common,
        } => commands::prior_sens(&spec, &settings, networks, bins, &common),
    }
}

fn jobs(command: &Command) -> Option<usize> {
    match command {
        Command::Analyze { common, .. }
        | Command::Fit { common, .. }
        | Command::Predict { common, .. }
        | Command::Crossval { common, .. }
        | Command::Communities { common, .. }
        | Command::Generate { common, .. }
        | Command::PriorSens { common, .. } => common.jobs,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(&cli.command).unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
