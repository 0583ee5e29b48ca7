//! Randomized self-checks: planners against the brute-force oracle, and the
//! commit-to-best-revealed-row structure of full-observability policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::solve_belief;
use crate::error::Result;
use crate::game::{Game, GameSpec, Model, Observability};
use crate::oracle::{oracle_policy_check, oracle_value};
use crate::policy::{LeaderPolicy, Observation};
use crate::sim::mix_seed;
use crate::solver_full::FullRule;

pub const ALPHAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

pub type FullPolicy = Box<dyn LeaderPolicy<Memory = Vec<bool>> + Send + Sync>;

/// What a full-observability solver under test hands back.
pub struct FullSolution {
    pub value: f64,
    pub policy: FullPolicy,
}

/// The production full-observability solver.
pub fn default_full_solver(game: &Game) -> Result<FullSolution> {
    let rule = FullRule::new(game)?;
    Ok(FullSolution {
        value: rule.value(),
        policy: Box::new(rule),
    })
}

/// Follows the production rule until a reveal, then commits to the row with
/// the lowest best payoff. Only useful for checking that the suites fail.
struct WorstCommit {
    inner: FullRule,
    worst: usize,
}

impl LeaderPolicy for WorstCommit {
    type Memory = Vec<bool>;

    fn observability(&self) -> Observability {
        Observability::Full
    }

    fn initial(&self) -> Vec<bool> {
        self.inner.initial()
    }

    fn act(&self, revealed: &Vec<bool>, round: usize) -> usize {
        if revealed.iter().any(|&r| r) {
            self.worst
        } else {
            self.inner.act(revealed, round)
        }
    }

    fn observe(&self, revealed: &Vec<bool>, obs: &Observation) -> Vec<bool> {
        self.inner.observe(revealed, obs)
    }
}

/// A deliberately broken full-observability solver with a mutated exploit
/// branch.
pub fn faulty_exploit_solver(game: &Game) -> Result<FullSolution> {
    let inner = FullRule::new(game)?;
    let worst = (0..game.rows())
        .min_by(|&a, &b| game.best_value(a).total_cmp(&game.best_value(b)))
        .expect("non-empty game");
    Ok(FullSolution {
        value: inner.value(),
        policy: Box::new(WorstCommit { inner, worst }),
    })
}

/// Random game from a seed. Even seeds draw integer payoffs in `0..=4` so
/// that ties are common; odd seeds draw uniform payoffs.
pub fn random_spec(seed: u64, max_rows: usize, max_columns: usize, max_horizon: usize) -> GameSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=max_rows);
    let n = rng.random_range(1..=max_columns);
    let horizon = rng.random_range(1..=max_horizon);
    let alpha = ALPHAS[rng.random_range(0..ALPHAS.len())];
    let integer = seed.is_multiple_of(2);
    let rewards = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if integer {
                        rng.random_range(0..=4) as f64
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    let beliefs = (0..m).map(|_| rng.random_range(0..n)).collect();
    GameSpec::from_matrix(rewards, beliefs, alpha, horizon, Model::M3)
}

/// Instance sizes the oracle comparison draws from.
pub fn random_small_spec(seed: u64) -> GameSpec {
    random_spec(seed, 3, 3, 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            instances: 200,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

impl VerifyConfig {
    pub fn instance_seed(&self, i: usize) -> u64 {
        mix_seed(self.seed, 3, i as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub model: Option<Model>,
    pub what: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instances: usize,
    /// Largest `|planner - oracle|` over every model and check.
    pub max_deviation: f64,
    pub failures: Vec<Failure>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Planner or policy values that disagree with the oracle.
    pub fn equivalence_failures(&self) -> impl Iterator<Item = &Failure> {
        self.failures.iter().filter(|f| f.model.is_some())
    }

    /// Instances where M2 was worth less than M3.
    pub fn monotonicity_failures(&self) -> impl Iterator<Item = &Failure> {
        self.failures.iter().filter(|f| f.model.is_none())
    }
}

fn check_instance(
    seed: u64,
    tolerance: f64,
    full_solver: &(dyn Fn(&Game) -> Result<FullSolution> + Sync),
) -> (f64, Vec<Failure>) {
    let spec = random_small_spec(seed);
    let mut max_dev: f64 = 0.0;
    let mut failures = Vec::new();
    let mut planner_values = [0.0; 3];
    let mut fail =
        |model: Option<Model>, what: String| failures.push(Failure { seed, model, what });

    for (slot, model) in [Model::M1, Model::M2, Model::M3].into_iter().enumerate() {
        let game = match Game::new(spec.clone().with_model(model)) {
            Ok(g) => g,
            Err(e) => {
                fail(Some(model), format!("invalid instance: {e}"));
                continue;
            }
        };
        let outcome = (|| -> Result<(f64, f64, f64)> {
            let exact = oracle_value(&game)?;
            let (value, achieved) = if model == Model::M3 {
                let plan = solve_belief(&game)?;
                (plan.value(), oracle_policy_check(&game, &plan)?)
            } else {
                let solution = full_solver(&game)?;
                let achieved = oracle_policy_check(&game, solution.policy.as_ref())?;
                (solution.value, achieved)
            };
            Ok((exact, value, achieved))
        })();
        match outcome {
            Ok((exact, value, achieved)) => {
                planner_values[slot] = value;
                let dev = (value - exact).abs().max((achieved - exact).abs());
                max_dev = max_dev.max(dev);
                if dev.is_nan() || dev > tolerance {
                    fail(
                        Some(model),
                        format!("planner {value}, policy {achieved}, oracle {exact}"),
                    );
                }
            }
            Err(e) => fail(Some(model), e.to_string()),
        }
    }
    if planner_values[1] < planner_values[2] - tolerance {
        fail(
            None,
            format!(
                "M2 value {} below M3 value {}",
                planner_values[1], planner_values[2]
            ),
        );
    }
    (max_dev, failures)
}

/// Compares every planner with the oracle on random small instances, and
/// checks that M2 is never worth less than M3.
pub fn oracle_equivalence(config: &VerifyConfig) -> OracleReport {
    oracle_equivalence_with(config, &default_full_solver)
}

pub fn oracle_equivalence_with(
    config: &VerifyConfig,
    full_solver: &(dyn Fn(&Game) -> Result<FullSolution> + Sync),
) -> OracleReport {
    let results: Vec<(f64, Vec<Failure>)> = (0..config.instances)
        .into_par_iter()
        .map(|i| check_instance(config.instance_seed(i), config.tolerance, full_solver))
        .collect();
    let mut report = OracleReport {
        instances: config.instances,
        ..OracleReport::default()
    };
    for (dev, failures) in results {
        report.max_deviation = report.max_deviation.max(dev);
        report.failures.extend(failures);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub instances: usize,
    pub seed: u64,
    pub max_rows: usize,
    pub max_columns: usize,
    pub max_horizon: usize,
    pub tolerance: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            instances: 500,
            seed: 0,
            max_rows: 6,
            max_columns: 4,
            max_horizon: 8,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub instances: usize,
    pub states_checked: usize,
    pub violations: Vec<Failure>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact full-observability values over every revealed subset, with no
/// structural shortcut: `values[t - 1][mask]`.
pub fn full_obs_values(game: &Game) -> Vec<Vec<f64>> {
    let m = game.rows();
    let horizon = game.horizon();
    let alpha = game.alpha();
    let before = game.model().learns_before_response();
    let mut values = vec![vec![0.0; 1 << m]; horizon + 1];
    for t in (0..horizon).rev() {
        for mask in 0..(1usize << m) {
            let next = &values[t + 1];
            let best = (0..m)
                .map(|k| {
                    let (r, c) = (game.best_value(k), game.naive_value(k));
                    let bit = 1 << k;
                    if mask & bit != 0 {
                        r + next[mask]
                    } else if !game.is_revealing(k) {
                        c + next[mask]
                    } else if before {
                        alpha * (r + next[mask | bit]) + (1.0 - alpha) * (c + next[mask])
                    } else {
                        c + alpha * next[mask | bit] + (1.0 - alpha) * next[mask]
                    }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            values[t][mask] = best;
        }
    }
    values
}

fn best_revealed(game: &Game, mask: usize) -> usize {
    let mut best: Option<usize> = None;
    for k in (0..game.rows()).filter(|k| mask & (1 << k) != 0) {
        if best.is_none_or(|b| game.best_value(k) > game.best_value(b)) {
            best = Some(k);
        }
    }
    best.expect("non-empty mask")
}

fn check_lemma_instance(
    seed: u64,
    config: &LemmaConfig,
    full_solver: &(dyn Fn(&Game) -> Result<FullSolution> + Sync),
) -> (usize, Vec<Failure>) {
    let model = if seed.is_multiple_of(2) {
        Model::M1
    } else {
        Model::M2
    };
    let spec = random_spec(
        seed,
        config.max_rows,
        config.max_columns,
        config.max_horizon,
    )
    .with_model(model);
    let mut failures = Vec::new();
    let mut fail = |what: String| {
        failures.push(Failure {
            seed,
            model: Some(model),
            what,
        })
    };
    let game = match Game::new(spec) {
        Ok(g) => g,
        Err(e) => {
            fail(e.to_string());
            return (0, failures);
        }
    };
    let solution = match full_solver(&game) {
        Ok(s) => s,
        Err(e) => {
            fail(e.to_string());
            return (0, failures);
        }
    };
    let policy = solution.policy.as_ref();
    let m = game.rows();
    let horizon = game.horizon();
    let mut checked = 0;

    // Every non-empty revealed set, queried in every round, plays the best
    // revealed row.
    for mask in 1..(1usize << m) {
        let revealed: Vec<bool> = (0..m).map(|k| mask & (1 << k) != 0).collect();
        let expected = best_revealed(&game, mask);
        for round in 1..=horizon {
            checked += 1;
            let got = policy.act(&revealed, round);
            if got != expected {
                fail(format!(
                    "revealed {revealed:?} round {round}: plays {got}, best revealed is {expected}"
                ));
            }
        }
    }

    // Along the planned path, a reveal leads to a commitment that is optimal
    // in the exhaustive full-observability program.
    let exact = full_obs_values(&game);
    if (exact[0][0] - solution.value).abs() > config.tolerance {
        fail(format!(
            "value {} differs from exhaustive {}",
            solution.value, exact[0][0]
        ));
    }
    let mut memory = policy.initial();
    for round in 1..=horizon {
        let row = policy.act(&memory, round);
        let column = game.belief_column(row);
        let reward = game.reward(row, column);
        if game.is_revealing(row) && round < horizon {
            let mut revealed = policy.observe(
                &memory,
                &Observation {
                    row,
                    column,
                    reward,
                    learned: Some(true),
                },
            );
            let committed = policy.act(&revealed, round + 1);
            for later in round + 1..=horizon {
                checked += 1;
                let now = policy.act(&revealed, later);
                if now != committed {
                    fail(format!(
                        "after revealing {row} in round {round}: round {later} plays {now}, \
                         round {} played {committed}",
                        round + 1
                    ));
                }
                let commit_value = game.best_value(committed) * (horizon - later + 1) as f64;
                let optimum = exact[later - 1][1 << row];
                if (commit_value - optimum).abs() > config.tolerance {
                    fail(format!(
                        "commitment to {committed} from round {later} is worth {commit_value}, \
                         optimum is {optimum}"
                    ));
                }
                revealed = policy.observe(
                    &revealed,
                    &Observation {
                        row: now,
                        column: game.best_column(now),
                        reward: game.best_value(now),
                        learned: Some(true),
                    },
                );
            }
        }
        memory = policy.observe(
            &memory,
            &Observation {
                row,
                column,
                reward,
                learned: Some(false),
            },
        );
    }
    (checked, failures)
}

/// Checks commit-to-best-revealed-row on random M1/M2 instances.
pub fn lemma_structure(config: &LemmaConfig) -> LemmaReport {
    lemma_structure_with(config, &default_full_solver)
}

pub fn lemma_structure_with(
    config: &LemmaConfig,
    full_solver: &(dyn Fn(&Game) -> Result<FullSolution> + Sync),
) -> LemmaReport {
    let results: Vec<(usize, Vec<Failure>)> = (0..config.instances)
        .into_par_iter()
        .map(|i| check_lemma_instance(mix_seed(config.seed, 4, i as u64), config, full_solver))
        .collect();
    let mut report = LemmaReport {
        instances: config.instances,
        ..LemmaReport::default()
    };
    for (checked, failures) in results {
        report.states_checked += checked;
        report.violations.extend(failures);
    }
    report
}
