//! The follower: best response on learned rows, believed response otherwise,
//! and a learning coin with probability `alpha` on each play of an unlearned
//! revealing row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::game::Game;

/// Which rows the follower knows the true payoffs of.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FollowerKnowledge {
    learned: Vec<bool>,
    /// Complete-adaptation follower: one success teaches every row.
    everything_mode: bool,
}

impl FollowerKnowledge {
    pub fn fresh(rows: usize) -> Self {
        FollowerKnowledge {
            learned: vec![false; rows],
            everything_mode: false,
        }
    }

    pub fn fresh_complete(rows: usize) -> Self {
        FollowerKnowledge {
            learned: vec![false; rows],
            everything_mode: true,
        }
    }

    pub fn is_learned(&self, row: usize) -> bool {
        self.learned[row]
    }

    pub fn learned(&self) -> &[bool] {
        &self.learned
    }

    pub fn everything_mode(&self) -> bool {
        self.everything_mode
    }

    pub fn learned_count(&self) -> usize {
        self.learned.iter().filter(|&&l| l).count()
    }

    fn learn(&mut self, row: usize) {
        if self.everything_mode {
            self.learned.iter_mut().for_each(|l| *l = true);
        } else {
            self.learned[row] = true;
        }
    }
}

/// One round as it actually happened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub leader_action: usize,
    pub follower_action: usize,
    pub reward: f64,
    pub learned_this_round: bool,
}

/// Column the follower plays against `row` given what it currently knows.
pub fn respond(game: &Game, knowledge: &FollowerKnowledge, row: usize) -> usize {
    if knowledge.is_learned(row) {
        game.best_column(row)
    } else {
        game.belief_column(row)
    }
}

/// Flips the learning coin for `row` if it can still teach anything.
///
/// Exactly one uniform draw is consumed per eligible play, so runs that
/// share a seed stay coupled across different values of alpha.
fn learning_coin<R: Rng + ?Sized>(
    game: &Game,
    knowledge: &FollowerKnowledge,
    row: usize,
    rng: &mut R,
) -> bool {
    if !game.is_revealing(row) || knowledge.is_learned(row) {
        return false;
    }
    rng.random::<f64>() < game.alpha()
}

/// Plays one round of `row` against the follower and returns the outcome
/// together with the follower's updated knowledge.
pub fn play_round<R: Rng + ?Sized>(
    game: &Game,
    knowledge: &FollowerKnowledge,
    row: usize,
    rng: &mut R,
) -> (RoundOutcome, FollowerKnowledge) {
    let mut next = knowledge.clone();
    let (column, learned_this_round) = if game.model().learns_before_response() {
        let learned = learning_coin(game, &next, row, rng);
        if learned {
            next.learn(row);
        }
        (respond(game, &next, row), learned)
    } else {
        let column = respond(game, &next, row);
        let learned = learning_coin(game, &next, row, rng);
        if learned {
            next.learn(row);
        }
        (column, learned)
    };
    let outcome = RoundOutcome {
        leader_action: row,
        follower_action: column,
        reward: game.reward(row, column),
        learned_this_round,
    };
    (outcome, next)
}
