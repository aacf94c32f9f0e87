//! `rearrange` — scene generation, batch experiments, metrics, and single
//! episode demos for the tabletop rearrangement pipeline.
//!
//! Subcommands:
//! - `gen`  — emit scene-pair JSON files.
//! - `run`  — run an experiment; writes results.csv, summary.json, per-scene
//!   action logs, and the effective config.
//! - `eval` — recompute metrics from a results directory.
//! - `demo` — run one episode verbosely.
//!
//! An experiment config JSON (see `ExperimentConfig`) supplies every knob;
//! command-line flags override individual fields.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rearrange_core::pipeline::{
    compute_metrics, read_results_csv, run_episode, run_experiment, write_action_log,
    write_results_csv, write_summary_json, EpisodeResult, ExperimentConfig,
};
use rearrange_core::registry;
use rearrange_core::scene::json::ScenePairJson;
use rearrange_core::scene::{generate_scene_pair, ScenePair};
use rearrange_core::seeds;

#[derive(Parser)]
#[command(
    name = "rearrange",
    about = "Tabletop rearrangement from flow-derived correspondences: simulator, planner, and evaluation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags that override fields of the experiment config.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// Experiment config JSON; defaults apply for missing fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of scenes.
    #[arg(long, value_name = "N")]
    scenes: Option<usize>,
    /// Flow outlier fraction in [0, 1].
    #[arg(long, value_name = "F")]
    outlier_frac: Option<f64>,
    /// Gaussian flow noise std-dev, pixels.
    #[arg(long, value_name = "F")]
    sigma_px: Option<f64>,
    /// Execution mode (see `--list-strategies`).
    #[arg(long, value_name = "M")]
    mode: Option<String>,
    /// Rotation model (see `--list-strategies`).
    #[arg(long, value_name = "M")]
    rotation: Option<String>,
}

impl Overrides {
    fn build_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(scenes) = self.scenes {
            cfg.scenes = scenes;
        }
        if let Some(f) = self.outlier_frac {
            cfg.corruption.outlier_frac = f;
        }
        if let Some(f) = self.sigma_px {
            cfg.corruption.sigma_px = f;
        }
        if let Some(mode) = &self.mode {
            cfg.mode = mode.clone();
        }
        if let Some(rotation) = &self.rotation {
            cfg.rotation = rotation.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate scene-pair JSON files.
    Gen {
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run an experiment and write results.csv + summary.json.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Skip writing per-scene action logs.
        #[arg(long)]
        no_action_logs: bool,
    },
    /// Recompute metrics from a results directory.
    Eval {
        /// Directory containing results.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run one episode with a verbose action log.
    Demo {
        #[command(flatten)]
        overrides: Overrides,
        /// Optional directory for the action log.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Dump the first round's corrupted flow to this file (binary).
        #[arg(long, value_name = "PATH")]
        dump_flow: Option<PathBuf>,
    },
    /// List the registered execution modes and rotation models.
    ListStrategies,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { overrides, out } => gen(&overrides.build_config()?, &out),
        Command::Run {
            overrides,
            out,
            no_action_logs,
        } => run(&overrides.build_config()?, &out, !no_action_logs),
        Command::Eval { out } => eval(&out),
        Command::Demo {
            overrides,
            out,
            dump_flow,
        } => demo(&overrides.build_config()?, out.as_deref(), dump_flow.as_deref()),
        Command::ListStrategies => {
            list_strategies();
            Ok(())
        }
    }
}

fn scene_pair_for(cfg: &ExperimentConfig, scene_id: u64) -> Result<ScenePair> {
    let mut last = None;
    for retry in 0..10 {
        match generate_scene_pair(&cfg.generation, seeds::derive(cfg.seed, &[scene_id, retry])) {
            Ok(pair) => return Ok(pair),
            Err(e) => last = Some(e),
        }
    }
    bail!("scene {scene_id}: {}", last.expect("at least one attempt"));
}

fn gen(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    for scene_id in 0..cfg.scenes as u64 {
        let pair = scene_pair_for(cfg, scene_id)?;
        let path = out.join(format!("scene_{scene_id:05}.json"));
        let file = fs::File::create(&path)?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &ScenePairJson::from_pair(&pair))?;
        w.write_all(b"\n")?;
    }
    println!("wrote {} scene pairs to {}", cfg.scenes, out.display());
    Ok(())
}

fn run(cfg: &ExperimentConfig, out: &Path, action_logs: bool) -> Result<()> {
    validate_strategies(cfg)?;
    fs::create_dir_all(out)?;
    let output = run_experiment(cfg)?;

    let mut csv = BufWriter::new(fs::File::create(out.join("results.csv"))?);
    write_results_csv(&mut csv, &output.episodes)?;
    csv.flush()?;

    let mut summary = BufWriter::new(fs::File::create(out.join("summary.json"))?);
    write_summary_json(&mut summary, &output.summary)?;
    summary.flush()?;

    let mut config_echo = BufWriter::new(fs::File::create(out.join("config.json"))?);
    serde_json::to_writer_pretty(&mut config_echo, cfg)?;
    config_echo.write_all(b"\n")?;
    config_echo.flush()?;

    if action_logs {
        let dir = out.join("actions");
        fs::create_dir_all(&dir)?;
        for ep in &output.episodes {
            let path = dir.join(format!("scene_{:05}.jsonl", ep.scene_id));
            let mut w = BufWriter::new(fs::File::create(path)?);
            write_action_log(&mut w, ep)?;
            w.flush()?;
        }
    }

    print_summary(&output.summary);
    Ok(())
}

fn eval(out: &Path) -> Result<()> {
    let path = out.join("results.csv");
    let file = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let episodes = read_results_csv(&mut BufReader::new(file))?;
    let summary = compute_metrics(&episodes)?;
    let mut stdout = std::io::stdout().lock();
    write_summary_json(&mut stdout, &summary)?;
    Ok(())
}

fn demo(cfg: &ExperimentConfig, out: Option<&Path>, dump_flow: Option<&Path>) -> Result<()> {
    validate_strategies(cfg)?;
    let pair = scene_pair_for(cfg, 0)?;
    println!(
        "scene 0: {} objects, mode {}, rotation {}",
        pair.current.objects.len(),
        cfg.mode,
        cfg.rotation
    );

    if let Some(path) = dump_flow {
        use rearrange_core::flow::{corrupt, ground_truth_flow, io::write_flow};
        use rearrange_core::scene::render;
        let cur_obs = render(&pair.current, &cfg.intrinsics);
        let goal_obs = render(&pair.goal, &cfg.intrinsics);
        let exact = ground_truth_flow(&pair, &cur_obs, &goal_obs)?;
        let seed = seeds::derive(cfg.corruption.seed, &[0, 0]);
        let flow = corrupt(&exact, &cfg.corruption.with_seed(seed));
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_flow(&mut w, &flow)?;
        w.flush()?;
        println!("dumped round-0 flow to {}", path.display());
    }

    let episode = run_episode(&pair, cfg, 0)?;
    print_episode(&episode);

    if let Some(out) = out {
        fs::create_dir_all(out)?;
        let path = out.join("scene_00000.jsonl");
        let mut w = BufWriter::new(fs::File::create(&path)?);
        write_action_log(&mut w, &episode)?;
        w.flush()?;
        println!("action log written to {}", path.display());
    }
    Ok(())
}

fn list_strategies() {
    println!("execution modes (--mode):");
    for entry in registry::policies() {
        println!("  {:<18} {}", entry.name, entry.summary);
    }
    println!("rotation models (--rotation):");
    for entry in registry::solvers() {
        println!("  {:<18} {}", entry.name, entry.summary);
    }
}

fn validate_strategies(cfg: &ExperimentConfig) -> Result<()> {
    registry::build_policy(&cfg.mode)?;
    if !registry::solvers().iter().any(|s| s.name == cfg.rotation) {
        bail!(
            "unknown rotation mode '{}'; available: {}",
            cfg.rotation,
            registry::solvers()
                .iter()
                .map(|s| s.name)
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(())
}

fn print_episode(ep: &EpisodeResult) {
    for a in &ep.actions {
        let kind = match a.kind {
            rearrange_core::pipeline::ActionKind::GoalMove => "goal_move",
            rearrange_core::pipeline::ActionKind::FreespaceMove => "freespace_move",
            rearrange_core::pipeline::ActionKind::Teleport => "teleport",
            rearrange_core::pipeline::ActionKind::Done => "done",
            rearrange_core::pipeline::ActionKind::FailedMove => "failed_move",
        };
        let object = a.object_id.map_or("-".to_string(), |id| id.to_string());
        let score = a.score.map_or("-".to_string(), |s| format!("{s:.3}"));
        let inliers = a.inliers.map_or("-".to_string(), |n| n.to_string());
        let residual = a
            .residual
            .map_or("-".to_string(), |r| format!("{:.2} mm", r * 1000.0));
        println!(
            "  step {:>2}  {kind:<15} object {object:<3} score {score:<8} inliers {inliers:<6} residual {residual}",
            a.step
        );
    }
    println!(
        "terminated: {} after {} actions",
        ep.terminated, ep.steps_taken
    );
    for o in &ep.objects {
        println!(
            "  object {}: rot err {:.3}°, trans err {:.3} cm{}",
            o.object_id,
            o.rot_err_deg,
            o.trans_err_cm,
            if o.degraded { " (degraded)" } else { "" }
        );
    }
}

fn print_summary(s: &rearrange_core::pipeline::MetricsSummary) {
    println!(
        "{} episodes, {} objects: median rot {:.3}°, median trans {:.3} cm; easy {:.1}%, medium {:.1}%, hard {:.1}%",
        s.episodes, s.objects, s.median_rot_deg, s.median_trans_cm, s.pct_easy, s.pct_medium, s.pct_hard
    );
}
