//! Brute-force expectimax over the leader's observation histories.
//!
//! Each node carries the exact distribution over follower knowledge given
//! what the leader has seen. Nothing here relies on the structure of optimal
//! policies, and the follower dynamics are written out again rather than
//! borrowed from the planners, so the two can check each other.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::game::{Game, Model, Observability};
use crate::policy::{LeaderPolicy, Observation};

pub const MAX_ROWS: usize = 4;
pub const MAX_COLUMNS: usize = 6;
pub const MAX_HORIZON: usize = 4;

/// Posterior over which rows the follower knows.
pub type Support = Vec<(Vec<bool>, f64)>;

/// A point in the history tree: round about to be played and the posterior
/// over which rows the follower knows.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryNode {
    pub round: usize,
    pub support: Support,
    /// What the leader saw on the way here, e.g. `r2:c0:?`.
    pub label: String,
}

impl HistoryNode {
    fn root(game: &Game) -> Self {
        HistoryNode {
            round: 1,
            support: vec![(vec![false; game.rows()], 1.0)],
            label: String::new(),
        }
    }
}

fn check_caps(game: &Game) -> Result<()> {
    let (m, n, t) = (game.rows(), game.columns(), game.horizon());
    if m > MAX_ROWS || n > MAX_COLUMNS || t > MAX_HORIZON {
        return Err(Error::Capacity(format!(
            "oracle handles at most {MAX_ROWS} rows, {MAX_COLUMNS} columns and \
             {MAX_HORIZON} rounds; got {m}x{n} with T={t}"
        )));
    }
    Ok(())
}

/// Grouped consequences of playing `row` at `node`: one entry per distinct
/// leader observation.
struct Branch {
    probability: f64,
    column: usize,
    reward: f64,
    learned: Option<bool>,
    child: HistoryNode,
}

fn column_for(game: &Game, knows: bool, row: usize) -> usize {
    if knows {
        let rewards = &game.spec().rewards[row];
        let mut best = 0;
        for (j, &r) in rewards.iter().enumerate() {
            if r > rewards[best] {
                best = j;
            }
        }
        best
    } else {
        game.spec().belief_best_response[row]
    }
}

fn expand(game: &Game, node: &HistoryNode, row: usize) -> (f64, Vec<Branch>) {
    let alpha = game.alpha();
    let spec = game.spec();
    let full = game.model().observability() == Observability::Full;
    let before = game.model() == Model::M1;

    // (observation key) -> (probability, column, learned flag, successor support)
    let mut groups: BTreeMap<(usize, Option<bool>), (f64, Support)> = BTreeMap::new();
    let mut expected_reward = 0.0;

    for (knowledge, p) in &node.support {
        let can_learn = spec.revealing[row] && !knowledge[row];
        let coins: Vec<(bool, f64)> = if can_learn {
            vec![(true, alpha), (false, 1.0 - alpha)]
        } else {
            vec![(false, 1.0)]
        };
        for (success, q) in coins {
            let prob = p * q;
            if prob == 0.0 {
                continue;
            }
            let mut after = knowledge.clone();
            if success {
                after[row] = true;
            }
            let knows_when_acting = if before { after[row] } else { knowledge[row] };
            let column = column_for(game, knows_when_acting, row);
            expected_reward += prob * spec.rewards[row][column];
            let key = (column, full.then_some(after[row]));
            let entry = groups.entry(key).or_insert_with(|| (0.0, Vec::new()));
            entry.0 += prob;
            match entry.1.iter_mut().find(|(k, _)| *k == after) {
                Some(slot) => slot.1 += prob,
                None => entry.1.push((after, prob)),
            }
        }
    }

    let branches = groups
        .into_iter()
        .map(|((column, learned), (probability, support))| {
            let support = support
                .into_iter()
                .map(|(k, p)| (k, p / probability))
                .collect();
            let flag = match learned {
                Some(true) => "L",
                Some(false) => "N",
                None => "?",
            };
            Branch {
                probability,
                column,
                reward: spec.rewards[row][column],
                learned,
                child: HistoryNode {
                    round: node.round + 1,
                    support,
                    label: format!("{}r{row}:c{column}:{flag} ", node.label),
                },
            }
        })
        .collect();
    (expected_reward, branches)
}

fn best_value(game: &Game, node: &HistoryNode) -> f64 {
    if node.round > game.horizon() {
        return 0.0;
    }
    (0..game.rows())
        .map(|row| {
            let (reward, branches) = expand(game, node, row);
            reward
                + branches
                    .iter()
                    .map(|b| b.probability * best_value(game, &b.child))
                    .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Optimal expected total payoff over all history-dependent leader policies.
pub fn oracle_value(game: &Game) -> Result<f64> {
    check_caps(game)?;
    Ok(best_value(game, &HistoryNode::root(game)))
}

fn policy_value<P: LeaderPolicy + ?Sized>(
    game: &Game,
    policy: &P,
    node: &HistoryNode,
    memory: &P::Memory,
) -> f64 {
    if node.round > game.horizon() {
        return 0.0;
    }
    let row = policy.act(memory, node.round);
    let (reward, branches) = expand(game, node, row);
    reward
        + branches
            .iter()
            .map(|b| {
                let obs = Observation {
                    row,
                    column: b.column,
                    reward: b.reward,
                    learned: b.learned,
                };
                let next = policy.observe(memory, &obs);
                b.probability * policy_value(game, policy, &b.child, &next)
            })
            .sum::<f64>()
}

/// Exact expected total payoff of `policy` under the game's own model.
pub fn oracle_policy_check<P: LeaderPolicy + ?Sized>(game: &Game, policy: &P) -> Result<f64> {
    check_caps(game)?;
    if policy.observability() == Observability::Full
        && game.model().observability() == Observability::Partial
    {
        return Err(Error::Config(format!(
            "policy needs full observability but model {} only shows responses",
            game.model()
        )));
    }
    Ok(policy_value(
        game,
        policy,
        &HistoryNode::root(game),
        &policy.initial(),
    ))
}
