use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use coop_cache::harness::{
    record_trace, run_beta_sweep, run_cache_ratio_sweep, run_drift_experiment, run_point,
    write_file, write_training_log, ExperimentConfig, Scale,
};
use coop_cache::sim::{Mode, PolicyKind, RequestSource, Simulation};
use coop_cache::topology::generate_topology;
use coop_cache::workload::RequestTrace;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "coop-cache",
    version,
    about = "Cooperative edge caching simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file overriding fields of the chosen preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::All)]
    policy: PolicyArg,
}

#[derive(Subcommand)]
enum Command {
    /// Delay reduction against the Zipf exponent.
    SweepBeta,
    /// Delay reduction against the cache ratio.
    SweepCache,
    /// Running-mean delay reduction under popularity drift.
    Drift {
        /// Write every n-th cycle.
        #[arg(long, default_value_t = 1)]
        stride: u64,
    },
    /// One training-then-evaluation run per policy, with logs and checkpoints.
    Train {
        /// Also save the request stream of this seed as CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run policies on a recorded request trace.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PolicyArg {
    Marl,
    Lru,
    Lfu,
    Fifo,
    All,
}

impl PolicyArg {
    fn policies(self) -> Vec<PolicyKind> {
        match self {
            PolicyArg::Marl => vec![PolicyKind::Marl],
            PolicyArg::Lru => vec![PolicyKind::Lru],
            PolicyArg::Lfu => vec![PolicyKind::Lfu],
            PolicyArg::Fifo => vec![PolicyKind::Fifo],
            PolicyArg::All => PolicyKind::ALL.to_vec(),
        }
    }
}

#[derive(Serialize)]
struct ReplayRow {
    cycle: u64,
    policy: PolicyKind,
    eta: f64,
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let scale = match cli.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml_over(scale, &text)?
        }
        None => ExperimentConfig::preset(scale),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let policies = cli.policy.policies();
    let out = &cli.out;
    std::fs::create_dir_all(out)?;
    write_file(&out.join("config.toml"), cfg.to_toml()?.as_bytes())?;

    match &cli.command {
        Command::SweepBeta => {
            let r = run_beta_sweep(&cfg, cli.seed, &policies)?;
            r.write_csv(create(&out.join("sweep_beta.csv"))?)?;
            write_file(
                &out.join("sweep_beta.svg"),
                r.to_svg("delay reduction vs Zipf exponent").as_bytes(),
            )?;
            for s in r.summary() {
                println!(
                    "beta={:<4} {:<5} eta={:.2} +/- {:.2}",
                    s.axis, s.policy, s.mean, s.half_width
                );
            }
        }
        Command::SweepCache => {
            let r = run_cache_ratio_sweep(&cfg, cli.seed, &policies)?;
            r.write_csv(create(&out.join("sweep_cache.csv"))?)?;
            write_file(
                &out.join("sweep_cache.svg"),
                r.to_svg("delay reduction vs cache ratio").as_bytes(),
            )?;
            for s in r.summary() {
                println!(
                    "sigma={:<5} {:<5} eta={:.2} +/- {:.2}",
                    s.axis, s.policy, s.mean, s.half_width
                );
            }
        }
        Command::Drift { stride } => {
            let r = run_drift_experiment(&cfg, cli.seed, &policies)?;
            r.write_csv(create(&out.join("drift.csv"))?, *stride)?;
            let stride_svg = (cfg.drift.period / 50).max(1);
            write_file(
                &out.join("drift.svg"),
                r.to_svg("running mean delay reduction", stride_svg)
                    .as_bytes(),
            )?;
            let mut w = csv::Writer::from_writer(create(&out.join("drift_epochs.csv"))?);
            w.write_record(["seed", "epoch", "start_cycle", "beta"])?;
            for (seed, epochs) in &r.epochs {
                for e in epochs {
                    w.write_record([
                        seed.to_string(),
                        e.index.to_string(),
                        e.start_cycle.to_string(),
                        e.beta.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            for (policy, s) in &r.series {
                println!(
                    "{policy:<5} final eta_bar={:.2}",
                    s.last().copied().unwrap_or(f64::NAN)
                );
            }
        }
        Command::Train { trace_out } => {
            for &policy in &policies {
                let run = run_point(&cfg, cli.seed, policy)?;
                write_training_log(&run.log, create(&out.join(format!("train_{policy}.csv")))?)?;
                if policy == PolicyKind::Marl {
                    let dir = out
                        .join("checkpoints")
                        .join(format!("marl_seed{}", cli.seed));
                    run.simulation.save_checkpoint(&dir)?;
                }
                println!("{policy:<5} eval eta={:.2}", run.eta);
            }
            if let Some(path) = trace_out {
                record_trace(&cfg, cli.seed, cfg.n_cycles)?.write_csv(create(path)?)?;
            }
        }
        Command::Replay { trace } => {
            let trace = RequestTrace::load(trace)?;
            let n = trace.cycles.len() as u64;
            if n == 0 {
                bail!("trace is empty");
            }
            let eval = (n as f64 * cfg.eval_fraction).round() as u64;
            let mut w = csv::Writer::from_writer(create(&out.join("replay.csv"))?);
            for &policy in &policies {
                let topo = generate_topology(cli.seed, &cfg.topology)?;
                let source = RequestSource::Trace {
                    trace: trace.clone(),
                    catalog_size: cfg.workload.catalog_size,
                };
                let mut sim = Simulation::new(cli.seed, topo, source, policy, &cfg.sim)?;
                let mut log = sim.run(n - eval, Mode::Train)?;
                let tail = sim.run(eval, Mode::Eval)?;
                let mean = tail.iter().map(|r| r.eta).sum::<f64>() / tail.len().max(1) as f64;
                log.extend(tail);
                for r in &log {
                    w.serialize(ReplayRow {
                        cycle: r.cycle,
                        policy,
                        eta: r.eta,
                    })?;
                }
                println!("{policy:<5} eval eta={mean:.2}");
            }
            w.flush()?;
        }
    }
    Ok(())
}
