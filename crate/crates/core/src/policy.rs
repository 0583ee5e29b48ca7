//! Leader policies as observation-driven controllers.

use serde::{Deserialize, Serialize};

use crate::follower::{FollowerKnowledge, RoundOutcome};
use crate::game::{Game, Observability};

/// What the leader sees at the end of a round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub row: usize,
    pub column: usize,
    pub reward: f64,
    /// Whether the follower knows `row` after the round. Only available
    /// under full observability.
    pub learned: Option<bool>,
}

impl Observation {
    /// The leader's view of a simulated round under the game's model.
    pub fn from_outcome(game: &Game, outcome: &RoundOutcome, after: &FollowerKnowledge) -> Self {
        let learned = match game.model().observability() {
            Observability::Full => Some(after.is_learned(outcome.leader_action)),
            Observability::Partial => None,
        };
        Observation {
            row: outcome.leader_action,
            column: outcome.follower_action,
            reward: outcome.reward,
            learned,
        }
    }
}

/// A deterministic leader strategy that may condition on everything it has
/// observed so far. `Memory` summarizes the observation history.
pub trait LeaderPolicy {
    type Memory: Clone;

    /// The observations this policy needs to run.
    fn observability(&self) -> Observability;

    fn initial(&self) -> Self::Memory;

    /// Row to play in `round` (1-based).
    fn act(&self, memory: &Self::Memory, round: usize) -> usize;

    fn observe(&self, memory: &Self::Memory, obs: &Observation) -> Self::Memory;
}

impl<P: LeaderPolicy + ?Sized> LeaderPolicy for &P {
    type Memory = P::Memory;

    fn observability(&self) -> Observability {
        (**self).observability()
    }

    fn initial(&self) -> Self::Memory {
        (**self).initial()
    }

    fn act(&self, memory: &Self::Memory, round: usize) -> usize {
        (**self).act(memory, round)
    }

    fn observe(&self, memory: &Self::Memory, obs: &Observation) -> Self::Memory {
        (**self).observe(memory, obs)
    }
}

/// An open-loop sequence of rows, one per round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPlan(pub Vec<usize>);

impl LeaderPolicy for FixedPlan {
    type Memory = ();

    fn observability(&self) -> Observability {
        Observability::Partial
    }

    fn initial(&self) {}

    fn act(&self, _: &(), round: usize) -> usize {
        self.0[(round - 1).min(self.0.len() - 1)]
    }

    fn observe(&self, _: &(), _: &Observation) {}
}

/// Rows the policy plays when the follower never learns anything.
pub fn no_learning_path<P: LeaderPolicy>(policy: &P, game: &Game) -> Vec<usize> {
    let learned = match game.model().observability() {
        Observability::Full => Some(false),
        Observability::Partial => None,
    };
    let mut memory = policy.initial();
    let mut path = Vec::with_capacity(game.horizon());
    for round in 1..=game.horizon() {
        let row = policy.act(&memory, round);
        let column = game.belief_column(row);
        let obs = Observation {
            row,
            column,
            reward: game.reward(row, column),
            learned,
        };
        memory = policy.observe(&memory, &obs);
        path.push(row);
    }
    path
}
