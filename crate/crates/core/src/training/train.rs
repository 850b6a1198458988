use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};

use crate::agent::{
    compute_advantages, load_checkpoint_into, monte_carlo_advantages, ppo_update, save_checkpoint, Adam, AgentParams,
    FreezeScope, PpoBatch, PpoStats, TrainingMeta,
};
use crate::error::{Error, Result};
use crate::Rng;

use super::episode::{run_episode, EpisodeLog, LOG_HEADER};
use super::{TrainConfig, TransferSpec};

pub const LOG_FILE: &str = "train_log.csv";
pub const NORMALIZED_FILE: &str = "normalized_reward.csv";
pub const BEST_CHECKPOINT: &str = "best.json";
pub const FINAL_CHECKPOINT: &str = "final.json";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub logs: Vec<EpisodeLog>,
    /// Per-run min-max normalized cumulative rewards.
    pub normalized: Vec<f64>,
    pub updates: Vec<PpoStats>,
    pub best: AgentParams,
    pub best_meta: TrainingMeta,
    pub final_params: AgentParams,
    pub final_meta: TrainingMeta,
}

/// Maps values onto `[0, 1]` by the run's min and max. A flat run maps to zeros.
pub fn min_max_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    v.iter()
        .map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 })
        .collect()
}

pub fn log_csv(logs: &[EpisodeLog]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for l in logs {
        out.push_str(&l.csv_row());
        out.push('\n');
    }
    out
}

fn normalized_csv(series: &[f64]) -> String {
    let mut out = String::from("episode,normalized_reward\n");
    for (i, v) in series.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

/// Starting parameters: fresh, or loaded from the transfer source and frozen.
pub fn initial_params(cfg: &TrainConfig, rng: &mut Rng) -> Result<AgentParams> {
    match &cfg.transfer {
        None => AgentParams::new(cfg.agent(), rng),
        Some(TransferSpec {
            source_checkpoint,
            freeze_scope,
        }) => {
            let (mut p, _) = load_checkpoint_into(source_checkpoint, &cfg.agent())?;
            p.freeze(*freeze_scope);
            Ok(p)
        }
    }
}

/// Online training: one SLAM episode then one PPO update, `cfg.episodes` times.
/// With `out_dir`, writes the episode log, the normalized series and the
/// best and final checkpoints there.
pub fn train(cfg: &TrainConfig, out_dir: Option<&Path>, progress: impl FnMut(&EpisodeLog)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut master = Rng::seed_from_u64(cfg.seed);
    let params = initial_params(cfg, &mut master)?;
    train_from(cfg, params, &mut master, out_dir, progress)
}

fn train_from(
    cfg: &TrainConfig,
    mut params: AgentParams,
    master: &mut Rng,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&EpisodeLog),
) -> Result<TrainOutcome> {
    let world = cfg.world.load()?;
    let ppo = cfg.ppo();
    let mut adam = Adam::default();
    let mut logs = Vec::with_capacity(cfg.episodes);
    let mut updates = Vec::with_capacity(cfg.episodes);
    let mut best: Option<(AgentParams, TrainingMeta)> = None;

    for episode in 0..cfg.episodes {
        let sim_seed = master.next_u64();
        let mut action_rng = Rng::seed_from_u64(master.next_u64());
        let (buffer, log) = run_episode(cfg, &world, &params, episode, sim_seed, &mut action_rng)?;
        let mean_reward = log.mean_reward();
        if buffer.len() >= 2 {
            let adv = if cfg.critic_enabled {
                compute_advantages(&buffer, cfg.gamma, cfg.gae_lambda)?
            } else {
                monte_carlo_advantages(&buffer, cfg.gamma)?
            };
            let batch = PpoBatch::new(&buffer, &adv)?;
            let stats = ppo_update(&mut params, &mut adam, &batch, &ppo)
                .map_err(|e| Error::NonFinite(format!("training loss at episode {episode}: {e}")))?;
            updates.push(stats);
        }
        // Post-update parameters of the peak episode.
        if best.as_ref().is_none_or(|(_, m)| mean_reward > m.mean_reward) {
            best = Some((params.clone(), TrainingMeta { episode, mean_reward }));
        }
        progress(&log);
        logs.push(log);
    }

    let (best, best_meta) = best.expect("at least one episode");
    let final_meta = TrainingMeta {
        episode: cfg.episodes - 1,
        mean_reward: logs.last().map(EpisodeLog::mean_reward).unwrap_or(0.0),
    };
    let normalized = min_max_normalize(&logs.iter().map(|l| l.cum_reward).collect::<Vec<_>>());
    let outcome = TrainOutcome {
        logs,
        normalized,
        updates,
        best,
        best_meta,
        final_params: params,
        final_meta,
    };
    if let Some(dir) = out_dir {
        write_outputs(&outcome, dir)?;
    }
    Ok(outcome)
}

pub fn write_outputs(outcome: &TrainOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write(LOG_FILE, log_csv(&outcome.logs))?;
    write(NORMALIZED_FILE, normalized_csv(&outcome.normalized))?;
    save_checkpoint(&outcome.best, outcome.best_meta, dir.join(BEST_CHECKPOINT))?;
    save_checkpoint(&outcome.final_params, outcome.final_meta, dir.join(FINAL_CHECKPOINT))
}

/// Fine-tunes a pretrained agent in `cfg.world` with `scope` frozen.
pub fn transfer_train(
    source: impl Into<PathBuf>,
    scope: FreezeScope,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    progress: impl FnMut(&EpisodeLog),
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        transfer: Some(TransferSpec {
            source_checkpoint: source.into(),
            freeze_scope: scope,
        }),
        ..cfg.clone()
    };
    train(&cfg, out_dir, progress)
}
