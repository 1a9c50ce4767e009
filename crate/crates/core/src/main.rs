use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use topomlp::cli::{
    accuracy_table, cmd_bench, cmd_build_complex, cmd_eval, cmd_make_synthetic, cmd_noise_sweep, cmd_train,
    timing_table, RunDir,
};
use topomlp::config::{key_help, RunConfig};
use topomlp::data::{Split, SyntheticSpec};
use topomlp::noise::threads_from_env;
use topomlp::Result;

/// Simplicial MLP node classifier with a contrastive structure loss.
#[derive(Parser)]
#[command(name = "topomlp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the clique complex of a bundle and export its structure matrices.
    BuildComplex {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train a model once per seed and report test accuracy.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// topo, base or mlp.
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate the checkpoint of a finished training run.
    Eval {
        #[arg(long)]
        run_dir: PathBuf,
        /// train, val or test.
        #[arg(long, default_value = "test")]
        split: String,
        /// Evaluate on this bundle instead of the training one.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Seed subdirectory of a multi-seed run.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time node inference of Topo-MLP against the message-passing baseline.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Training run whose Topo-MLP checkpoint is timed.
        #[arg(long)]
        topo_run: Option<PathBuf>,
        /// Training run whose baseline checkpoint is timed.
        #[arg(long)]
        base_run: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train and test every model under edge corruption at several ratios.
    NoiseSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated corruption ratios.
        #[arg(long)]
        deltas: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a planted-partition graph bundle.
    MakeSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        communities: usize,
        #[arg(long, default_value_t = 15)]
        nodes_per: usize,
        #[arg(long, default_value_t = 0.8)]
        p_in: f64,
        #[arg(long, default_value_t = 0.05)]
        p_out: f64,
        #[arg(long, default_value_t = 0.5)]
        feature_noise: f64,
        /// Pure-noise feature columns after the community indicators.
        #[arg(long, default_value_t = 0)]
        extra_dims: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Graph bundle directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct OutArgs {
    /// Write into this directory instead of a timestamped one.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Parent of timestamped run directories.
    #[arg(long, default_value = "runs")]
    out_root: PathBuf,
}

impl OutArgs {
    fn run_dir(&self) -> RunDir {
        match &self.run_dir {
            Some(p) => RunDir::Exact(p.clone()),
            None => RunDir::Under(self.out_root.clone()),
        }
    }
}

/// Defaults, then the file, then convenience flags, then `--set` overrides.
fn resolve(args: &ConfigArgs, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut cfg = RunConfig {
        threads: threads_from_env()?,
        ..RunConfig::default()
    };
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(d) = &args.data {
        cfg.set("data", &d.display().to_string())?;
    }
    if let Some(s) = &args.seeds {
        cfg.set("seeds", s)?;
    }
    if let Some(e) = args.epochs {
        cfg.set("epochs", &e.to_string())?;
    }
    for (k, v) in extra {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    for s in &args.set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildComplex { data, out } => {
            let (dir, summary) = cmd_build_complex(&data, &out.run_dir())?;
            println!("{summary}");
            println!("run_dir={}", dir.display());
        }
        Command::Train { cfg, model, out } => {
            let cfg = resolve(&cfg, &[("model", model)])?;
            let (dir, m) = cmd_train(&cfg, &out.run_dir())?;
            let accs: Vec<f64> = m.per_seed.iter().map(|s| s.test_accuracy).collect();
            print!("{}", accuracy_table(&[(&m.model, &m.dataset, &accs)]));
            println!("test_accuracy={}", m.test_accuracy);
            println!("run_dir={}", dir.display());
        }
        Command::Eval {
            run_dir,
            split,
            data,
            seed,
        } => {
            let split: Split = split.parse()?;
            let m = cmd_eval(&run_dir, split, data.as_deref(), seed)?;
            println!("split={} accuracy={}", m.split, m.accuracy);
        }
        Command::Bench {
            cfg,
            topo_run,
            base_run,
            runs,
            warmup,
            out,
        } => {
            let cfg = resolve(
                &cfg,
                &[
                    ("runs", runs.map(|r| r.to_string())),
                    ("warmup", warmup.map(|w| w.to_string())),
                ],
            )?;
            let (dir, m) = cmd_bench(&cfg, topo_run.as_deref(), base_run.as_deref(), &out.run_dir())?;
            print!("{}", timing_table(&m));
            println!("run_dir={}", dir.display());
        }
        Command::NoiseSweep { cfg, deltas, out } => {
            let cfg = resolve(&cfg, &[("deltas", deltas)])?;
            let (dir, table) = cmd_noise_sweep(&cfg, &out.run_dir())?;
            print!("{table}");
            println!("run_dir={}", dir.display());
        }
        Command::MakeSynthetic {
            out,
            communities,
            nodes_per,
            p_in,
            p_out,
            feature_noise,
            extra_dims,
            seed,
        } => {
            let spec = SyntheticSpec {
                communities,
                nodes_per,
                p_in,
                p_out,
                feature_noise,
                extra_dims,
                seed,
            };
            let summary = cmd_make_synthetic(&spec, &out)?;
            println!("{summary}");
            println!("bundle={}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let keys = key_help();
    let mut cmd = Cli::command();
    for name in ["train", "bench", "noise-sweep"] {
        let keys = keys.clone();
        cmd = cmd.mut_subcommand(name, |c| c.after_help(keys));
    }
    let matches = cmd.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
