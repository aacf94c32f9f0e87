//! Batch experiments and metric aggregation.
//!
//! Episodes are independent and run in parallel; per-episode streams derive
//! from (seed, scene id), so the output is a pure function of the config
//! regardless of thread count.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ExperimentConfig;
use super::{run_episode, EpisodeResult, ObjectResult, PipelineError, TermReason};
use crate::scene::{generate_scene_pair, SceneError, ScenePair};
use crate::seeds;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no results to aggregate")]
    EmptyInput,
}

/// Difficulty tiers: nested (translation cm, rotation deg) thresholds.
const TIER_EASY: (f64, f64) = (2.0, 5.0);
const TIER_MEDIUM: (f64, f64) = (5.0, 10.0);
const TIER_HARD: (f64, f64) = (10.0, 15.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub objects: usize,
    pub median_rot_deg: f64,
    pub median_trans_cm: f64,
    pub pct_easy: f64,
    pub pct_medium: f64,
    pub pct_hard: f64,
}

/// Lower median: for even counts, the smaller of the two middle values.
fn lower_median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[(values.len() - 1) / 2]
}

/// Aggregate per-object errors over all episodes: lower medians and the
/// percentage of objects within each difficulty tier.
pub fn compute_metrics(results: &[EpisodeResult]) -> Result<MetricsSummary, MetricsError> {
    let objects: Vec<&ObjectResult> = results.iter().flat_map(|e| e.objects.iter()).collect();
    if objects.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total = objects.len();
    let within = |t: (f64, f64)| -> f64 {
        let n = objects
            .iter()
            .filter(|o| o.trans_err_cm < t.0 && o.rot_err_deg < t.1)
            .count();
        100.0 * n as f64 / total as f64
    };
    Ok(MetricsSummary {
        episodes: results.len(),
        objects: total,
        median_rot_deg: lower_median(objects.iter().map(|o| o.rot_err_deg).collect()),
        median_trans_cm: lower_median(objects.iter().map(|o| o.trans_err_cm).collect()),
        pct_easy: within(TIER_EASY),
        pct_medium: within(TIER_MEDIUM),
        pct_hard: within(TIER_HARD),
    })
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub summary: MetricsSummary,
    pub episodes: Vec<EpisodeResult>,
}

fn generate_with_retries(cfg: &ExperimentConfig, scene_id: u64) -> Result<ScenePair, SceneError> {
    let mut last = None;
    for retry in 0..10 {
        match generate_scene_pair(&cfg.generation, seeds::derive(cfg.seed, &[scene_id, retry])) {
            Ok(pair) => return Ok(pair),
            Err(e @ SceneError::PlacementFailure { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Generate `cfg.scenes` pairs and run one episode per pair. Episodes run
/// concurrently; results come back ordered by scene id.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, PipelineError> {
    if cfg.scenes < 1 {
        return Err(PipelineError::InvalidConfig(
            "scene count must be at least 1".into(),
        ));
    }
    let pairs: Vec<(u64, ScenePair)> = (0..cfg.scenes as u64)
        .map(|id| Ok((id, generate_with_retries(cfg, id)?)))
        .collect::<Result<_, SceneError>>()?;
    let episodes: Vec<EpisodeResult> = pairs
        .par_iter()
        .map(|(id, pair)| run_episode(pair, cfg, *id))
        .collect::<Result<_, PipelineError>>()?;
    let summary = compute_metrics(&episodes)?;
    Ok(ExperimentOutput { summary, episodes })
}

/// One row per object per episode:
/// `scene_id,object_id,steps,rot_err_deg,trans_err_cm,terminated`.
pub fn write_results_csv(w: &mut impl Write, episodes: &[EpisodeResult]) -> io::Result<()> {
    writeln!(w, "scene_id,object_id,steps,rot_err_deg,trans_err_cm,terminated")?;
    for ep in episodes {
        for obj in &ep.objects {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                ep.scene_id,
                obj.object_id,
                ep.steps_taken,
                obj.rot_err_deg,
                obj.trans_err_cm,
                ep.terminated
            )?;
        }
    }
    Ok(())
}

/// Parse a results CSV back into minimal episode results (no action logs).
pub fn read_results_csv(r: &mut impl BufRead) -> io::Result<Vec<EpisodeResult>> {
    let mut by_scene: BTreeMap<u64, EpisodeResult> = BTreeMap::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if idx == 0 || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let fail = |what: &str| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: bad {what}: {line}", idx + 1),
            )
        };
        if parts.len() != 6 {
            return Err(fail("column count"));
        }
        let scene_id: u64 = parts[0].parse().map_err(|_| fail("scene_id"))?;
        let object = ObjectResult {
            object_id: parts[1].parse().map_err(|_| fail("object_id"))?,
            rot_err_deg: parts[3].parse().map_err(|_| fail("rot_err_deg"))?,
            trans_err_cm: parts[4].parse().map_err(|_| fail("trans_err_cm"))?,
            degraded: false,
        };
        let steps: usize = parts[2].parse().map_err(|_| fail("steps"))?;
        let terminated: TermReason = parts[5].parse().map_err(|_| fail("terminated"))?;
        by_scene
            .entry(scene_id)
            .or_insert_with(|| EpisodeResult {
                scene_id,
                steps_taken: steps,
                terminated,
                objects: Vec::new(),
                actions: Vec::new(),
                estimate_errors: Vec::new(),
            })
            .objects
            .push(object);
    }
    Ok(by_scene.into_values().collect())
}

pub fn write_summary_json(w: &mut impl Write, summary: &MetricsSummary) -> io::Result<()> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    writeln!(w, "{text}")
}

/// JSON-lines action log, one record per action.
pub fn write_action_log(w: &mut impl Write, episode: &EpisodeResult) -> io::Result<()> {
    for action in &episode.actions {
        let line = serde_json::to_string(action).expect("action serializes");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn object(rot: f64, trans: f64) -> ObjectResult {
        ObjectResult {
            object_id: 0,
            rot_err_deg: rot,
            trans_err_cm: trans,
            degraded: false,
        }
    }

    fn episode(objs: Vec<ObjectResult>) -> EpisodeResult {
        EpisodeResult {
            scene_id: 0,
            steps_taken: 0,
            terminated: TermReason::Done,
            objects: objs,
            actions: Vec::new(),
            estimate_errors: Vec::new(),
        }
    }

    #[test]
    fn single_perfect_object_is_all_tiers() {
        let summary = compute_metrics(&[episode(vec![object(0.0, 0.0)])]).unwrap();
        assert_eq!(summary.median_rot_deg, 0.0);
        assert_eq!(summary.median_trans_cm, 0.0);
        assert_eq!(summary.pct_easy, 100.0);
        assert_eq!(summary.pct_medium, 100.0);
        assert_eq!(summary.pct_hard, 100.0);
    }

    #[test]
    fn hand_computed_three_object_summary() {
        // (1 cm, 1°), (3 cm, 3°), (100 cm, 90°):
        // medians 3 cm / 3°, easy 1/3, medium 2/3, hard 2/3.
        let summary = compute_metrics(&[episode(vec![
            object(1.0, 1.0),
            object(3.0, 3.0),
            object(90.0, 100.0),
        ])])
        .unwrap();
        assert_eq!(summary.median_rot_deg, 3.0);
        assert_eq!(summary.median_trans_cm, 3.0);
        assert!((summary.pct_easy - 100.0 / 3.0).abs() < 1e-12);
        assert!((summary.pct_medium - 200.0 / 3.0).abs() < 1e-12);
        assert!((summary.pct_hard - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn duplicating_entries_preserves_the_summary() {
        let objs = vec![object(1.0, 1.0), object(3.0, 3.0), object(90.0, 100.0)];
        let once = compute_metrics(&[episode(objs.clone())]).unwrap();
        let mut doubled = objs.clone();
        doubled.extend(objs);
        let twice = compute_metrics(&[episode(doubled)]).unwrap();
        assert_eq!(once.median_rot_deg, twice.median_rot_deg);
        assert_eq!(once.median_trans_cm, twice.median_trans_cm);
        assert_eq!(once.pct_easy, twice.pct_easy);
        assert_eq!(once.pct_medium, twice.pct_medium);
        assert_eq!(once.pct_hard, twice.pct_hard);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(compute_metrics(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn lower_median_convention() {
        assert_eq!(lower_median(vec![4.0, 1.0]), 1.0);
        assert_eq!(lower_median(vec![1.0, 2.0, 3.0, 4.0]), 2.0);
        assert_eq!(lower_median(vec![3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn csv_roundtrip_preserves_errors_exactly() {
        let episodes = vec![
            EpisodeResult {
                scene_id: 0,
                steps_taken: 3,
                terminated: TermReason::Done,
                objects: vec![object(0.12345678901234567, 1.9999999999999998)],
                actions: Vec::new(),
                estimate_errors: Vec::new(),
            },
            EpisodeResult {
                scene_id: 1,
                steps_taken: 11,
                terminated: TermReason::Cap,
                objects: vec![object(45.0, 12.5), object(0.0, 0.0)],
                actions: Vec::new(),
                estimate_errors: Vec::new(),
            },
        ];
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &episodes).unwrap();
        let parsed = read_results_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].objects[0].rot_err_deg, 0.12345678901234567);
        assert_eq!(parsed[0].objects[0].trans_err_cm, 1.9999999999999998);
        assert_eq!(parsed[1].terminated, TermReason::Cap);
        assert_eq!(parsed[1].steps_taken, 11);
        // Metrics over the parsed rows match metrics over the originals.
        assert_eq!(
            compute_metrics(&parsed).unwrap(),
            compute_metrics(&episodes).unwrap()
        );
    }
}
