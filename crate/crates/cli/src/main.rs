use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use swarmfuse::agent::{load_checkpoint_into, AgentParams, FreezeScope};
use swarmfuse::eval::{detection_metrics, render_svg, run_eval, run_eval_seed, series_from_csvs, EvalMode, EvalRun};
use swarmfuse::training::{train, Ablation, EpisodeLog, TrainConfig, TransferSpec, WorldSource};
use swarmfuse::world::{generate_world, WorldKind, WorldParams};

/// Particle-filter lidar SLAM with a learned degeneracy factor.
#[derive(Parser, Debug)]
#[command(name = "swarmfuse", version, about)]
struct Cli {
    /// JSON file with training/run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a world file.
    GenWorld {
        #[arg(long, default_value = "room")]
        kind: WorldKind,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "world.json")]
        name: String,
        #[arg(long)]
        corridor_length: Option<f64>,
        #[arg(long)]
        corridor_features: Option<usize>,
    },
    /// Drive one SLAM session and export map, trajectories and metrics.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "vanilla")]
        mode: EvalMode,
    },
    /// Train an agent online.
    Train {
        #[command(flatten)]
        train: TrainArgs,
        /// Apply an ablation preset (E1..E6).
        #[arg(long)]
        ablation: Option<Ablation>,
        /// Pretrained checkpoint for transfer presets.
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Fine-tune a pretrained agent with part of the network frozen.
    Transfer {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, default_value = "backbone")]
        freeze: FreezeScope,
    },
    /// Evaluate a mode over several seeds.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "doa")]
        mode: EvalMode,
        /// Comma-separated seeds or a range such as `0..10`.
        #[arg(long, default_value = "0..5")]
        seeds: String,
    },
    /// Score a factor source against ground-truth degeneracy labels.
    Detect {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "doa")]
        mode: EvalMode,
        /// Defaults to the mode's own threshold.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Render one column of one or more CSV logs as an SVG chart.
    Plot {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "cum_reward")]
        column: String,
        #[arg(long, default_value = "plot.svg")]
        name: String,
        #[arg(long, default_value = "")]
        title: String,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// `room`, `corridor:3`, `mixed` or a world file.
    #[arg(long)]
    world: Option<WorldSource>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    timesteps: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    #[arg(long)]
    world: Option<WorldSource>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    timesteps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    no_critic: bool,
    #[arg(long)]
    separate_critic: bool,
    #[arg(long)]
    tag: Option<String>,
    /// Print one line per episode.
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(swarmfuse::Error),
}

impl From<swarmfuse::Error> for CliError {
    fn from(e: swarmfuse::Error) -> Self {
        Self::Runtime(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: Option<u64>,
    config: C,
}

fn write_manifest<C: Serialize>(dir: &Path, command: &str, seed: Option<u64>, config: C) -> CliResult<()> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| swarmfuse::Error::Parse(e.to_string()))?;
    write_file(&dir.join("manifest.json"), text)
}

fn write_file(path: &Path, text: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| swarmfuse::Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| {
        CliError::Runtime(swarmfuse::Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

fn base_config(cli: &Cli) -> CliResult<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(p) => TrainConfig::from_json_file(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_train_args(cfg: &mut TrainConfig, a: &TrainArgs) {
    if let Some(w) = &a.world {
        cfg.world = w.clone();
    }
    if let Some(n) = a.episodes {
        cfg.episodes = n;
    }
    if let Some(n) = a.timesteps {
        cfg.timesteps = n;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    if a.no_critic {
        cfg.critic_enabled = false;
    }
    if a.separate_critic {
        cfg.separate_critic = true;
    }
    if let Some(t) = &a.tag {
        cfg.ablation_tag = t.clone();
    }
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Usage(format!("cannot parse seeds `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn load_params(run: &RunArgs, mode: EvalMode, cfg: &TrainConfig) -> CliResult<Option<AgentParams>> {
    match (&run.checkpoint, mode) {
        (Some(p), _) => Ok(Some(load_checkpoint_into(p, &cfg.agent())?.0)),
        (None, EvalMode::Doa) => Err(CliError::Usage("doa mode needs --checkpoint".into())),
        (None, _) => Ok(None),
    }
}

fn run_config(cli: &Cli, run: &RunArgs) -> CliResult<TrainConfig> {
    let mut cfg = base_config(cli)?;
    if let Some(w) = &run.world {
        cfg.world = w.clone();
    }
    if let Some(t) = run.timesteps {
        cfg.timesteps = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_run(run: &EvalRun) {
    let m = &run.metrics;
    println!(
        "seed {}: ate {:.3} m, max dx {:.3}, max dy {:.3}, resamples {}, mean n_eff {:.2}{}",
        m.seed,
        m.ate,
        m.max_dx,
        m.max_dy,
        m.resample_count,
        m.mean_neff,
        m.detection_success
            .map(|d| format!(", detection {d:.1}%"))
            .unwrap_or_default()
    );
}

fn progress(verbose: bool) -> impl FnMut(&EpisodeLog) {
    move |log: &EpisodeLog| {
        if verbose {
            println!(
                "episode {}: reward {:.3}, mean a {:.3}, resamples {}",
                log.episode,
                log.cum_reward,
                log.mean_a(),
                log.resamples()
            );
        }
    }
}

fn report_training(outcome: &swarmfuse::training::TrainOutcome, dir: &Path) {
    println!(
        "trained {} episodes; best mean reward {:.4} at episode {}; outputs in {}",
        outcome.logs.len(),
        outcome.best_meta.mean_reward,
        outcome.best_meta.episode,
        dir.display()
    );
}

fn execute(cli: &Cli) -> CliResult<()> {
    let out = &cli.out_dir;
    match &cli.command {
        Command::GenWorld {
            kind,
            name,
            corridor_length,
            corridor_features,
        } => {
            let mut params = WorldParams::for_kind(*kind);
            if let Some(l) = corridor_length {
                params.corridor_length = *l;
            }
            if let Some(f) = corridor_features {
                params.corridor_features = *f;
            }
            let seed = cli.seed.unwrap_or(0);
            let world = generate_world(*kind, &params, seed)?;
            write_file(&out.join(name), world.to_json())?;
            write_manifest(out, "gen-world", Some(seed), (kind, params))?;
            println!("wrote {}", out.join(name).display());
        }
        Command::Simulate { run, mode } => {
            let cfg = run_config(cli, run)?;
            let params = load_params(run, *mode, &cfg)?;
            let world = cfg.world.load()?;
            let result = run_eval(&world, *mode, params.as_ref(), &cfg.session(), &[cfg.seed], Some(out))?;
            write_manifest(out, "simulate", Some(cfg.seed), (&cfg, mode.to_string()))?;
            result.iter().for_each(print_run);
        }
        Command::Train {
            train: args,
            ablation,
            source,
        } => {
            let mut cfg = base_config(cli)?;
            apply_train_args(&mut cfg, args);
            match ablation {
                Some(a) => a.apply(&mut cfg, source.clone())?,
                None => {
                    if let Some(src) = source {
                        cfg.transfer = Some(TransferSpec {
                            source_checkpoint: src.clone(),
                            freeze_scope: FreezeScope::Backbone,
                        });
                    }
                }
            }
            write_manifest(out, "train", Some(cfg.seed), &cfg)?;
            let outcome = train(&cfg, Some(out), progress(args.verbose))?;
            report_training(&outcome, out);
        }
        Command::Transfer {
            train: args,
            source,
            freeze,
        } => {
            let mut cfg = base_config(cli)?;
            apply_train_args(&mut cfg, args);
            cfg.transfer = Some(TransferSpec {
                source_checkpoint: source.clone(),
                freeze_scope: *freeze,
            });
            write_manifest(out, "transfer", Some(cfg.seed), &cfg)?;
            let outcome = train(&cfg, Some(out), progress(args.verbose))?;
            report_training(&outcome, out);
        }
        Command::Eval { run, mode, seeds } => {
            let cfg = run_config(cli, run)?;
            let seeds = parse_seeds(seeds)?;
            let params = load_params(run, *mode, &cfg)?;
            let world = cfg.world.load()?;
            let runs = run_eval(&world, *mode, params.as_ref(), &cfg.session(), &seeds, Some(out))?;
            write_manifest(out, "eval", None, (&cfg, mode.to_string(), &seeds))?;
            runs.iter().for_each(print_run);
        }
        Command::Detect { run, mode, threshold } => {
            if *mode == EvalMode::Vanilla {
                return Err(CliError::Usage("vanilla mode has no degeneracy factor".into()));
            }
            let cfg = run_config(cli, run)?;
            let params = load_params(run, *mode, &cfg)?;
            let world = cfg.world.load()?;
            let r = run_eval_seed(&world, *mode, params.as_ref(), &cfg.session(), cfg.seed)?;
            let th = threshold
                .or(mode.threshold())
                .unwrap_or(swarmfuse::eval::DETECTION_THRESHOLD);
            let m = detection_metrics(&r.factors, th)?;
            let text = serde_json::to_string_pretty(&m).map_err(|e| swarmfuse::Error::Parse(e.to_string()))?;
            write_file(&out.join("detection.json"), text)?;
            swarmfuse::eval::write_eval_outputs(std::slice::from_ref(&r), *mode, out)?;
            write_manifest(out, "detect", Some(cfg.seed), (&cfg, mode.to_string(), th))?;
            println!(
                "success {:.1}% over {} frames ({} false positives, {} false negatives)",
                m.success_ratio, m.frames, m.false_positives, m.false_negatives
            );
        }
        Command::Plot {
            inputs,
            column,
            name,
            title,
        } => {
            let series = series_from_csvs(inputs, column)?;
            let title = if title.is_empty() {
                column.as_str()
            } else {
                title.as_str()
            };
            let svg = render_svg(title, &[series])?;
            write_file(&out.join(name), svg)?;
            println!("wrote {}", out.join(name).display());
        }
    }
    Ok(())
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
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn metrics_header_is_stable() {
        assert!(swarmfuse::eval::metrics_csv(&[]).starts_with("seed,ate,"));
    }
}
