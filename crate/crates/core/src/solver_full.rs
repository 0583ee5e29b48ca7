//! Optimal planning when the leader observes what the follower has learned
//! (models M1 and M2).
//!
//! Once any row is revealed the optimal policy commits to the best known row
//! for the rest of the game, so only the all-unrevealed state needs a
//! recursion. That state is solved backwards over rounds, giving `O(mT)`.
//!
//! `U_t` covers rounds `t..=T`, so a committed row is worth its payoff times
//! `T - t + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{argmax_first, Game, Model, Observability};
use crate::policy::{LeaderPolicy, Observation};

/// Leader knowledge under full observability.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FullObsState {
    pub revealed: Vec<bool>,
    /// 1-based round in `1..=T`.
    pub round: usize,
}

impl FullObsState {
    pub fn fresh(rows: usize) -> Self {
        FullObsState {
            revealed: vec![false; rows],
            round: 1,
        }
    }
}

/// Answer for one queried state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub first_action: usize,
    /// Expected total payoff from the queried round to the end.
    pub value: f64,
    pub rule: FullRule,
}

/// How an unrevealed row is valued in the explore branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Timing {
    /// Learning coin before the follower responds.
    BeforeResponse,
    /// Learning coin after the follower responds.
    AfterResponse,
}

impl From<Model> for Timing {
    fn from(model: Model) -> Self {
        if model.learns_before_response() {
            Timing::BeforeResponse
        } else {
            Timing::AfterResponse
        }
    }
}

/// Backward recursion over the unrevealed state. `committed(k, rounds)` is
/// the value of the state reached when row `k` gets revealed, with `rounds`
/// rounds left. Returns per-round actions and `U_t(0)` for `t = 1..=T+1`.
pub(crate) fn explore_chain(
    game: &Game,
    timing: Timing,
    committed: impl Fn(usize, usize) -> f64,
) -> (Vec<usize>, Vec<f64>) {
    let horizon = game.horizon();
    let alpha = game.alpha();
    let mut actions = vec![0; horizon];
    let mut values = vec![0.0; horizon + 1];
    for t in (1..=horizon).rev() {
        let rest = horizon - t;
        let stay = values[t];
        let q = (0..game.rows()).map(|k| {
            let c = game.naive_value(k);
            if !game.is_revealing(k) {
                return c + stay;
            }
            let reveal = committed(k, rest);
            match timing {
                Timing::BeforeResponse => {
                    alpha * (game.best_value(k) + reveal) + (1.0 - alpha) * (c + stay)
                }
                Timing::AfterResponse => c + alpha * reveal + (1.0 - alpha) * stay,
            }
        });
        let (k, v) = argmax_first(q).expect("games have at least one row");
        actions[t - 1] = k;
        values[t - 1] = v;
    }
    (actions, values)
}

/// The extracted policy: explore table for the all-unrevealed state plus
/// the commit rule for everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRule {
    model: Model,
    alpha: f64,
    horizon: usize,
    best_value: Vec<f64>,
    naive_value: Vec<f64>,
    revealing: Vec<bool>,
    explore_action: Vec<usize>,
    /// `U_t(0)` indexed by `t - 1`, with a trailing zero for `T + 1`.
    explore_value: Vec<f64>,
    /// Best row that can never be revealed, valued at its believed payoff.
    fallback: Option<(usize, f64)>,
}

impl FullRule {
    pub fn new(game: &Game) -> Result<Self> {
        let model = game.model();
        if model == Model::M3 {
            return Err(Error::WrongModel {
                solver: "full-observability",
                found: model,
            });
        }
        let fallback = best_fallback(game);
        let commit_value = |k: usize| match fallback {
            Some((_, c)) if c > game.best_value(k) => c,
            _ => game.best_value(k),
        };
        let (explore_action, explore_value) =
            explore_chain(game, model.into(), |k, rest| commit_value(k) * rest as f64);
        Ok(FullRule {
            model,
            alpha: game.alpha(),
            horizon: game.horizon(),
            best_value: game.stats().best_value.clone(),
            naive_value: game.stats().naive_value.clone(),
            revealing: game.spec().revealing.clone(),
            explore_action,
            explore_value,
            fallback,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn model(&self) -> Model {
        self.model
    }

    fn check(&self, state: &FullObsState) -> Result<()> {
        if state.revealed.len() != self.best_value.len() {
            return Err(Error::InvalidState(format!(
                "revealed vector has length {}, game has {} rows",
                state.revealed.len(),
                self.best_value.len()
            )));
        }
        if state.round == 0 || state.round > self.horizon {
            return Err(Error::InvalidState(format!(
                "round {} outside 1..={}",
                state.round, self.horizon
            )));
        }
        if let Some(k) =
            (0..self.revealing.len()).find(|&k| state.revealed[k] && !self.revealing[k])
        {
            return Err(Error::InvalidState(format!(
                "row {k} is not revealing and cannot be learned"
            )));
        }
        Ok(())
    }

    /// Row to commit to given a non-empty revealed set, with its per-round value.
    fn commit(&self, revealed: &[bool]) -> Option<(usize, f64)> {
        let (k, v) = revealed
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(k, _)| (k, self.best_value[k]))
            .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
                Some((_, b)) if v <= b => best,
                _ => Some((k, v)),
            })?;
        match self.fallback {
            Some((j, c)) if c > v || (c == v && j < k) => Some((j, c)),
            _ => Some((k, v)),
        }
    }

    /// Optimal row at `revealed` in `round`. Panics on an invalid state;
    /// use [`FullRule::solve`] for checked queries.
    pub fn action(&self, revealed: &[bool], round: usize) -> usize {
        match self.commit(revealed) {
            Some((k, _)) => k,
            None => self.explore_action[round - 1],
        }
    }

    pub fn solve(&self, state: &FullObsState) -> Result<(usize, f64)> {
        self.check(state)?;
        let remaining = (self.horizon - state.round + 1) as f64;
        Ok(match self.commit(&state.revealed) {
            Some((k, v)) => (k, v * remaining),
            None => (
                self.explore_action[state.round - 1],
                self.explore_value[state.round - 1],
            ),
        })
    }

    /// Optimal value from the fresh state in round 1.
    pub fn value(&self) -> f64 {
        self.explore_value[0]
    }

    /// Expected immediate reward in each round under the planner's own model,
    /// starting from the fresh state.
    pub fn predicted_rewards(&self) -> Vec<f64> {
        let alpha = self.alpha;
        let mut fresh = 1.0;
        // Mass already committed, as (row, per-round value, probability).
        let mut committed: Vec<(usize, f64, f64)> = Vec::new();
        let mut out = Vec::with_capacity(self.horizon);
        for t in 1..=self.horizon {
            let mut reward: f64 = committed.iter().map(|&(_, v, p)| v * p).sum();
            let k = self.explore_action[t - 1];
            let (r, c) = (self.best_value[k], self.naive_value[k]);
            if self.revealing[k] {
                reward += fresh
                    * match self.model {
                        Model::M1 => alpha * r + (1.0 - alpha) * c,
                        _ => c,
                    };
                let mut revealed = vec![false; self.best_value.len()];
                revealed[k] = true;
                let (row, v) = self.commit(&revealed).expect("non-empty revealed set");
                match committed.iter_mut().find(|e| e.0 == row) {
                    Some(e) => e.2 += fresh * alpha,
                    None => committed.push((row, v, fresh * alpha)),
                }
                fresh *= 1.0 - alpha;
            } else {
                reward += fresh * c;
            }
            out.push(reward);
        }
        out
    }
}

fn best_fallback(game: &Game) -> Option<(usize, f64)> {
    (0..game.rows())
        .filter(|&k| !game.is_revealing(k))
        .map(|k| (k, game.naive_value(k)))
        .fold(None, |best, (k, v)| match best {
            Some((_, b)) if v <= b => best,
            _ => Some((k, v)),
        })
}

/// Optimal first action and value from `state` for an M1 or M2 game.
pub fn solve_full(game: &Game, state: &FullObsState) -> Result<PlanResult> {
    let rule = FullRule::new(game)?;
    let (first_action, value) = rule.solve(state)?;
    Ok(PlanResult {
        first_action,
        value,
        rule,
    })
}

impl LeaderPolicy for FullRule {
    type Memory = Vec<bool>;

    fn observability(&self) -> Observability {
        Observability::Full
    }

    fn initial(&self) -> Vec<bool> {
        vec![false; self.best_value.len()]
    }

    fn act(&self, revealed: &Vec<bool>, round: usize) -> usize {
        self.action(revealed, round)
    }

    fn observe(&self, revealed: &Vec<bool>, obs: &Observation) -> Vec<bool> {
        let mut next = revealed.clone();
        if obs.learned == Some(true) && self.revealing[obs.row] {
            next[obs.row] = true;
        }
        next
    }
}
