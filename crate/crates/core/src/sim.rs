//! Monte Carlo roll-outs of leader policies against partially adapting
//! followers, random instances, and the horizon sweep comparing the partial
//! and complete planners.
//!
//! Every run draws from its own ChaCha stream derived from the configured
//! seed, so reports are bit-exact across thread counts.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::solve_belief;
use crate::complete::solve_complete;
use crate::error::{Error, Result};
use crate::follower::{play_round, FollowerKnowledge, RoundOutcome};
use crate::game::{Game, GameSpec, Model, Observability};
use crate::planner::PlannerKind;
use crate::policy::{LeaderPolicy, Observation};

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for run `run` of a simulation seeded with `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub runs: usize,
    pub seed: u64,
    /// Keep every run's rounds in the report.
    pub keep_trajectories: bool,
}

impl SimConfig {
    pub fn new(runs: usize, seed: u64) -> Self {
        SimConfig {
            runs,
            seed,
            keep_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub planner: String,
    pub model: Model,
    pub alpha: f64,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub per_round_mean: Vec<f64>,
    pub total_mean: f64,
    pub total_stderr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<Vec<RoundOutcome>>>,
}

/// Plays one full game of `policy` against a fresh partial follower.
pub fn run_once<P: LeaderPolicy, R: Rng + ?Sized>(
    game: &Game,
    policy: &P,
    rng: &mut R,
) -> Vec<RoundOutcome> {
    let mut knowledge = FollowerKnowledge::fresh(game.rows());
    let mut memory = policy.initial();
    let mut rounds = Vec::with_capacity(game.horizon());
    for round in 1..=game.horizon() {
        let row = policy.act(&memory, round);
        let (outcome, next) = play_round(game, &knowledge, row, rng);
        memory = policy.observe(&memory, &Observation::from_outcome(game, &outcome, &next));
        knowledge = next;
        rounds.push(outcome);
    }
    rounds
}

fn check_policy<P: LeaderPolicy>(game: &Game, policy: &P) -> Result<()> {
    if policy.observability() == Observability::Full
        && game.model().observability() == Observability::Partial
    {
        return Err(Error::Config(format!(
            "planner needs to observe learning, but model {} does not reveal it",
            game.model()
        )));
    }
    Ok(())
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `config.runs` independent games and aggregates the rewards.
pub fn simulate<P>(game: &Game, policy: &P, label: &str, config: SimConfig) -> Result<SimReport>
where
    P: LeaderPolicy + Sync,
{
    if config.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    check_policy(game, policy)?;
    let runs: Vec<Vec<RoundOutcome>> = (0..config.runs as u64)
        .into_par_iter()
        .map(|run| run_once(game, policy, &mut run_rng(config.seed, run)))
        .collect();

    let horizon = game.horizon();
    let mut per_round = vec![0.0; horizon];
    let mut totals = Vec::with_capacity(runs.len());
    for rounds in &runs {
        let mut total = 0.0;
        for (t, r) in rounds.iter().enumerate() {
            per_round[t] += r.reward;
            total += r.reward;
        }
        totals.push(total);
    }
    let n = config.runs as f64;
    per_round.iter_mut().for_each(|s| *s /= n);
    let (total_mean, total_stderr) = mean_stderr(&totals);

    Ok(SimReport {
        planner: label.to_string(),
        model: game.model(),
        alpha: game.alpha(),
        horizon,
        runs: config.runs,
        seed: config.seed,
        per_round_mean: per_round,
        total_mean,
        total_stderr,
        trajectories: config.keep_trajectories.then_some(runs),
    })
}

/// Random game: payoffs i.i.d. uniform on `[0, 1]`, a uniformly chosen
/// believed response per row, every row revealing, alpha uniform on
/// `[0.1, 0.9]`. Horizon 1 and model M3; callers override as needed.
pub fn generate_instance<R: Rng + ?Sized>(rows: usize, columns: usize, rng: &mut R) -> GameSpec {
    let rewards = (0..rows)
        .map(|_| (0..columns).map(|_| rng.random::<f64>()).collect())
        .collect();
    let beliefs = (0..rows).map(|_| rng.random_range(0..columns)).collect();
    let alpha = rng.random_range(0.1..=0.9);
    GameSpec::from_matrix(rewards, beliefs, alpha, 1, Model::M3)
}

/// Horizon sweep over random instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub instances: usize,
    pub runs_per_instance: usize,
    pub seed: u64,
    pub horizons: Vec<usize>,
    pub rows: usize,
    pub columns: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            instances: 1000,
            runs_per_instance: 100,
            seed: 0,
            horizons: vec![1, 2, 4, 8, 16, 32, 64, 128],
            rows: 3,
            columns: 3,
        }
    }
}

/// One line of the study CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub planner: PlannerKind,
    pub mean_reward_per_round: f64,
    pub stderr: f64,
    pub instances: usize,
    pub runs_per_instance: usize,
    pub seed: u64,
}

/// Per-instance mean reward per round at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub horizon: usize,
    pub partial: Vec<f64>,
    pub complete: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
    pub points: Vec<StudyPoint>,
}

pub const STUDY_NOTE: &str = "payoffs ~ U[0,1]; believed responses uniform per row; \
all rows revealing; alpha ~ U[0.1,0.9]; followers adapt per row, model M3";

fn mean_per_round<P: LeaderPolicy>(game: &Game, policy: &P, seed: u64, runs: usize) -> f64 {
    let total: f64 = (0..runs as u64)
        .map(|run| {
            run_once(game, policy, &mut run_rng(seed, run))
                .iter()
                .map(|r| r.reward)
                .sum::<f64>()
        })
        .sum();
    total / (runs * game.horizon()) as f64
}

/// Simulates both planners against partial followers for each horizon.
///
/// The same instances and the same per-run random streams are used for both
/// planners and for every horizon.
pub fn study(config: &StudyConfig) -> Result<StudyResult> {
    if config.instances == 0 || config.runs_per_instance == 0 {
        return Err(Error::Config(
            "instances and runs per instance must be at least 1".into(),
        ));
    }
    if config.horizons.is_empty() || config.horizons.contains(&0) {
        return Err(Error::Config(
            "horizon sweep must be non-empty and positive".into(),
        ));
    }
    if config.rows == 0 || config.columns == 0 {
        return Err(Error::Config(
            "instances need at least one row and column".into(),
        ));
    }
    let instances: Vec<GameSpec> = (0..config.instances as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 1, i));
            generate_instance(config.rows, config.columns, &mut rng)
        })
        .collect();

    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &horizon in &config.horizons {
        let per_instance: Vec<(f64, f64)> = instances
            .par_iter()
            .enumerate()
            .map(|(i, spec)| -> Result<(f64, f64)> {
                let game = Game::new(spec.clone().with_horizon(horizon))?;
                let run_seed = mix_seed(config.seed, 2, i as u64);
                let partial = solve_belief(&game)?;
                let complete = solve_complete(&game, Observability::Partial);
                Ok((
                    mean_per_round(&game, &partial, run_seed, config.runs_per_instance),
                    mean_per_round(&game, &complete, run_seed, config.runs_per_instance),
                ))
            })
            .collect::<Result<_>>()?;
        let (partial, complete): (Vec<f64>, Vec<f64>) = per_instance.into_iter().unzip();
        for (planner, values) in [
            (PlannerKind::Partial, &partial),
            (PlannerKind::Complete, &complete),
        ] {
            let (mean, stderr) = mean_stderr(values);
            rows.push(StudyRow {
                horizon,
                planner,
                mean_reward_per_round: mean,
                stderr,
                instances: config.instances,
                runs_per_instance: config.runs_per_instance,
                seed: config.seed,
            });
        }
        points.push(StudyPoint {
            horizon,
            partial,
            complete,
        });
    }
    Ok(StudyResult {
        config: config.clone(),
        rows,
        points,
    })
}

impl StudyResult {
    pub fn row(&self, horizon: usize, planner: PlannerKind) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.horizon == horizon && r.planner == planner)
    }

    /// `(partial - complete) / complete` of the aggregate means.
    pub fn relative_gap(&self, horizon: usize) -> Option<f64> {
        let p = self
            .row(horizon, PlannerKind::Partial)?
            .mean_reward_per_round;
        let c = self
            .row(horizon, PlannerKind::Complete)?
            .mean_reward_per_round;
        Some((p - c) / c)
    }
}

/// Writes study rows as CSV, preceded by a `#` comment describing the
/// instance distribution.
pub fn write_study_csv<W: io::Write>(rows: &[StudyRow], mut out: W) -> Result<(), csv::Error> {
    writeln!(out, "# {STUDY_NOTE}")?;
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_study_csv<R: io::Read>(input: R) -> Result<Vec<StudyRow>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}

/// One CSV line of a [`SimReport`]: the per-round mean plus the echoed
/// configuration and totals.
#[derive(Debug, Serialize, Deserialize)]
struct ReportLine {
    planner: String,
    model: Model,
    alpha: f64,
    horizon: usize,
    runs: usize,
    seed: u64,
    round: usize,
    mean_reward: f64,
    total_mean: f64,
    total_stderr: f64,
}

/// Writes a report as CSV, one line per round. Trajectories are not written.
pub fn write_report_csv<W: io::Write>(report: &SimReport, out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    for (t, &mean_reward) in report.per_round_mean.iter().enumerate() {
        writer.serialize(ReportLine {
            planner: report.planner.clone(),
            model: report.model,
            alpha: report.alpha,
            horizon: report.horizon,
            runs: report.runs,
            seed: report.seed,
            round: t + 1,
            mean_reward,
            total_mean: report.total_mean,
            total_stderr: report.total_stderr,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_report_csv<R: io::Read>(input: R) -> Result<SimReport> {
    let lines: Vec<ReportLine> = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad report csv: {e}")))?;
    let first = lines
        .first()
        .ok_or_else(|| Error::Config("report csv has no rows".into()))?;
    if lines.iter().enumerate().any(|(t, l)| l.round != t + 1) || lines.len() != first.horizon {
        return Err(Error::Config(
            "report csv rounds are not 1..=horizon".into(),
        ));
    }
    Ok(SimReport {
        planner: first.planner.clone(),
        model: first.model,
        alpha: first.alpha,
        horizon: first.horizon,
        runs: first.runs,
        seed: first.seed,
        per_round_mean: lines.iter().map(|l| l.mean_reward).collect(),
        total_mean: first.total_mean,
        total_stderr: first.total_stderr,
        trajectories: None,
    })
}
