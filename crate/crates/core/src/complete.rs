//! Baseline planner that assumes complete adaptation: one successful reveal
//! of any row teaches the follower the whole matrix.
//!
//! The follower's knowledge collapses to a single global cell. Learning is
//! assumed to happen after the follower responds, as in M2 and M3.

use crate::belief::BeliefCell;
use crate::game::{argmax_first, Game, Observability};
use crate::policy::{LeaderPolicy, Observation};
use crate::solver_full::{explore_chain, Timing};

/// Solves the complete-adaptation model under the given observability.
pub fn solve_complete(game: &Game, observability: Observability) -> CompletePlan {
    match observability {
        Observability::Full => CompletePlan::full(game),
        Observability::Partial => CompletePlan::partial(game),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletePlan {
    observability: Observability,
    horizon: usize,
    alpha: f64,
    best_value: Vec<f64>,
    naive_value: Vec<f64>,
    revealing: Vec<bool>,
    /// Row with the highest best value; played forever once learned.
    exploit: usize,
    /// `values[t - 1][cell]`, trailing zeros for `T + 1`.
    values: Vec<[f64; 3]>,
    actions: Vec<[usize; 3]>,
}

fn cell_slot(cell: BeliefCell) -> usize {
    match cell {
        BeliefCell::Unplayed => 0,
        BeliefCell::Uncertain => 1,
        BeliefCell::Learned => 2,
    }
}

impl CompletePlan {
    fn base(game: &Game, observability: Observability) -> Self {
        let (exploit, _) =
            argmax_first(game.stats().best_value.iter().copied()).expect("non-empty game");
        CompletePlan {
            observability,
            horizon: game.horizon(),
            alpha: game.alpha(),
            best_value: game.stats().best_value.clone(),
            naive_value: game.stats().naive_value.clone(),
            revealing: game.spec().revealing.clone(),
            exploit,
            values: vec![[0.0; 3]; game.horizon() + 1],
            actions: vec![[exploit; 3]; game.horizon()],
        }
    }

    fn full(game: &Game) -> Self {
        let mut plan = Self::base(game, Observability::Full);
        let top = plan.best_value[plan.exploit];
        let (actions, values) =
            explore_chain(game, Timing::AfterResponse, |_, rest| top * rest as f64);
        for t in 0..plan.horizon {
            let remaining = (plan.horizon - t) as f64;
            plan.actions[t][0] = actions[t];
            plan.values[t][0] = values[t];
            plan.values[t][2] = top * remaining;
        }
        plan
    }

    /// `(next_cell, probability, reward)` branches of the global cell.
    fn branches(&self, cell: BeliefCell, row: usize) -> Vec<(BeliefCell, f64, f64)> {
        use BeliefCell::*;
        let (r, c, a) = (self.best_value[row], self.naive_value[row], self.alpha);
        let split = |hit: BeliefCell, miss: BeliefCell| {
            [(hit, a, r), (miss, 1.0 - a, c)]
                .into_iter()
                .filter(|b| b.1 > 0.0)
                .collect()
        };
        match (cell, self.revealing[row]) {
            (Learned, _) => vec![(Learned, 1.0, r)],
            (Unplayed, true) => vec![(Uncertain, 1.0, c)],
            (Unplayed, false) => vec![(Unplayed, 1.0, c)],
            (Uncertain, true) => split(Learned, Uncertain),
            // Nothing new is taught, but the response can still tell whether
            // an earlier reveal succeeded.
            (Uncertain, false) if r == c => vec![(Uncertain, 1.0, c)],
            (Uncertain, false) => split(Learned, Unplayed),
        }
    }

    fn partial(game: &Game) -> Self {
        use BeliefCell::*;
        let mut plan = Self::base(game, Observability::Partial);
        for t in (0..plan.horizon).rev() {
            let next = plan.values[t + 1];
            for cell in [Unplayed, Uncertain, Learned] {
                let q = (0..game.rows()).map(|k| {
                    plan.branches(cell, k)
                        .iter()
                        .map(|&(c2, p, r)| p * (r + next[cell_slot(c2)]))
                        .sum::<f64>()
                });
                let (k, v) = argmax_first(q).expect("non-empty game");
                plan.actions[t][cell_slot(cell)] = k;
                plan.values[t][cell_slot(cell)] = v;
            }
        }
        plan
    }

    pub fn observability(&self) -> Observability {
        self.observability
    }

    /// The planner's own estimate of the game value.
    pub fn value(&self) -> f64 {
        self.values[0][0]
    }

    pub fn action_at(&self, round: usize, cell: BeliefCell) -> usize {
        self.actions[round - 1][cell_slot(cell)]
    }

    pub fn value_at(&self, round: usize, cell: BeliefCell) -> f64 {
        self.values[round - 1][cell_slot(cell)]
    }

    /// Expected immediate reward per round as the baseline itself predicts it.
    pub fn predicted_rewards(&self) -> Vec<f64> {
        use BeliefCell::*;
        let mut dist = [1.0, 0.0, 0.0];
        let mut out = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let mut next = [0.0; 3];
            let mut reward = 0.0;
            for cell in [Unplayed, Uncertain, Learned] {
                let p = dist[cell_slot(cell)];
                if p == 0.0 {
                    continue;
                }
                let k = self.actions[t][cell_slot(cell)];
                let branches = match (self.observability, cell) {
                    (Observability::Full, Unplayed) if self.revealing[k] => vec![
                        (Learned, self.alpha, self.naive_value[k]),
                        (Unplayed, 1.0 - self.alpha, self.naive_value[k]),
                    ],
                    (Observability::Full, Unplayed) => vec![(Unplayed, 1.0, self.naive_value[k])],
                    _ => self.branches(cell, k),
                };
                for (c2, q, r) in branches {
                    reward += p * q * r;
                    next[cell_slot(c2)] += p * q;
                }
            }
            out.push(reward);
            dist = next;
        }
        out
    }
}

impl LeaderPolicy for CompletePlan {
    type Memory = BeliefCell;

    fn observability(&self) -> Observability {
        self.observability
    }

    fn initial(&self) -> BeliefCell {
        BeliefCell::Unplayed
    }

    fn act(&self, cell: &BeliefCell, round: usize) -> usize {
        self.action_at(round, *cell)
    }

    fn observe(&self, cell: &BeliefCell, obs: &Observation) -> BeliefCell {
        use BeliefCell::*;
        let row = obs.row;
        if self.observability == Observability::Full {
            return if *cell == Learned || obs.learned == Some(true) {
                Learned
            } else {
                Unplayed
            };
        }
        let best = obs.reward == self.best_value[row];
        match (*cell, self.revealing[row]) {
            (Learned, _) => Learned,
            (Unplayed, true) => Uncertain,
            (Unplayed, false) => Unplayed,
            (Uncertain, true) => {
                if best {
                    Learned
                } else {
                    Uncertain
                }
            }
            (Uncertain, false) if self.best_value[row] == self.naive_value[row] => Uncertain,
            (Uncertain, false) => {
                if best {
                    Learned
                } else {
                    Unplayed
                }
            }
        }
    }
}
