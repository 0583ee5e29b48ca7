//! Exact dynamic program for model M3, where the leader only sees the
//! follower's responses.
//!
//! Each row's learned status is summarized by one of three cells. A row
//! that was never played is unlearned. After a play the follower has learned
//! it with probability `alpha`, and a best response settles the question.
//! The belief space is therefore `{Unplayed, Uncertain, Learned}^m`, encoded
//! in base 3 with row 0 as the least significant digit.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Model, Observability};
use crate::policy::{LeaderPolicy, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefCell {
    Unplayed,
    Uncertain,
    Learned,
}

impl BeliefCell {
    fn digit(self) -> usize {
        match self {
            BeliefCell::Unplayed => 0,
            BeliefCell::Uncertain => 1,
            BeliefCell::Learned => 2,
        }
    }

    fn from_digit(d: usize) -> Self {
        match d {
            0 => BeliefCell::Unplayed,
            1 => BeliefCell::Uncertain,
            _ => BeliefCell::Learned,
        }
    }

    fn symbol(self) -> char {
        match self {
            BeliefCell::Unplayed => '0',
            BeliefCell::Uncertain => 'p',
            BeliefCell::Learned => '1',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BeliefVector(pub Vec<BeliefCell>);

impl BeliefVector {
    pub fn initial(rows: usize) -> Self {
        BeliefVector(vec![BeliefCell::Unplayed; rows])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cell(&self, row: usize) -> BeliefCell {
        self.0[row]
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .rev()
            .fold(0, |acc, cell| acc * 3 + cell.digit())
    }

    pub fn from_index(mut index: usize, rows: usize) -> Self {
        let mut cells = Vec::with_capacity(rows);
        for _ in 0..rows {
            cells.push(BeliefCell::from_digit(index % 3));
            index /= 3;
        }
        BeliefVector(cells)
    }
}

/// Compact signature such as `00p1`: `0` unplayed, `p` uncertain, `1` learned.
impl fmt::Display for BeliefVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|c| write!(f, "{}", c.symbol()))
    }
}

/// Successor of `index` after playing `row`: up to two
/// `(next_index, probability, reward)` branches.
fn successors(
    game: &Game,
    pow3: &[usize],
    index: usize,
    row: usize,
) -> ([(usize, f64, f64); 2], usize) {
    let alpha = game.alpha();
    let (r, c) = (game.best_value(row), game.naive_value(row));
    let cell = BeliefCell::from_digit(index / pow3[row] % 3);
    let empty = (0, 0.0, 0.0);
    match cell {
        BeliefCell::Learned => ([(index, 1.0, r), empty], 1),
        _ if !game.is_revealing(row) => ([(index, 1.0, c), empty], 1),
        BeliefCell::Unplayed => ([(index + pow3[row], 1.0, c), empty], 1),
        BeliefCell::Uncertain => {
            if alpha >= 1.0 {
                ([(index + pow3[row], 1.0, r), empty], 1)
            } else if alpha <= 0.0 {
                ([(index, 1.0, c), empty], 1)
            } else {
                ([(index + pow3[row], alpha, r), (index, 1.0 - alpha, c)], 2)
            }
        }
    }
}

fn powers_of_three(rows: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |p| p.checked_mul(3))
        .take(rows + 1)
        .collect()
}

/// One-step belief dynamics: `(successor, probability, expected reward)`.
/// Zero-probability branches are omitted.
pub fn belief_transition(
    game: &Game,
    belief: &BeliefVector,
    row: usize,
) -> Result<Vec<(BeliefVector, f64, f64)>> {
    if belief.len() != game.rows() {
        return Err(Error::InvalidState(format!(
            "belief has {} cells, game has {} rows",
            belief.len(),
            game.rows()
        )));
    }
    if row >= game.rows() {
        return Err(Error::InvalidState(format!("row {row} out of range")));
    }
    let pow3 = powers_of_three(game.rows());
    let (branches, n) = successors(game, &pow3, belief.index(), row);
    Ok(branches[..n]
        .iter()
        .map(|&(s, p, r)| (BeliefVector::from_index(s, game.rows()), p, r))
        .collect())
}

/// Limits on the tabular solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeliefConfig {
    /// Largest number of rows accepted; the table has `3^rows` states per round.
    pub max_rows: usize,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        BeliefConfig { max_rows: 12 }
    }
}

const PARALLEL_STATES: usize = 1 << 12;

/// Value and action tables for every `(round, belief)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefPlan {
    rows: usize,
    horizon: usize,
    /// `values[t - 1][s]`; `values[T]` is all zeros.
    values: Vec<Vec<f64>>,
    actions: Vec<Vec<u32>>,
    pow3: Vec<usize>,
    best_value: Vec<f64>,
    revealing: Vec<bool>,
    transitions: Game,
}

/// Solves an M3 game by backward induction over the belief space.
pub fn solve_belief(game: &Game) -> Result<BeliefPlan> {
    solve_belief_with(game, BeliefConfig::default())
}

pub fn solve_belief_with(game: &Game, config: BeliefConfig) -> Result<BeliefPlan> {
    if game.model() != Model::M3 {
        return Err(Error::WrongModel {
            solver: "belief-state",
            found: game.model(),
        });
    }
    let m = game.rows();
    if m > config.max_rows {
        return Err(Error::Capacity(format!(
            "belief table needs 3^{m} states per round; limit is 3^{} ({} rows)",
            config.max_rows, config.max_rows
        )));
    }
    let pow3 = powers_of_three(m);
    if pow3.len() <= m {
        return Err(Error::Capacity(format!("3^{m} overflows usize")));
    }
    let states = pow3[m];
    let horizon = game.horizon();
    let mut values = vec![vec![0.0; states]; horizon + 1];
    let mut actions = vec![vec![0u32; states]; horizon];

    let backup = |next: &[f64], s: usize| -> (u32, f64) {
        let mut best = (0u32, f64::NEG_INFINITY);
        for k in 0..m {
            let (branches, n) = successors(game, &pow3, s, k);
            let q: f64 = branches[..n]
                .iter()
                .map(|&(s2, p, r)| p * (r + next[s2]))
                .sum();
            if q > best.1 {
                best = (k as u32, q);
            }
        }
        best
    };

    for t in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        let row: Vec<(u32, f64)> = if states >= PARALLEL_STATES {
            (0..states)
                .into_par_iter()
                .map(|s| backup(next, s))
                .collect()
        } else {
            (0..states).map(|s| backup(next, s)).collect()
        };
        for (s, (a, v)) in row.into_iter().enumerate() {
            actions[t][s] = a;
            head[t][s] = v;
        }
    }

    Ok(BeliefPlan {
        rows: m,
        horizon,
        values,
        actions,
        pow3,
        best_value: game.stats().best_value.clone(),
        revealing: game.spec().revealing.clone(),
        transitions: game.clone(),
    })
}

impl BeliefPlan {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.pow3[self.rows]
    }

    /// Optimal game value from the all-unplayed belief in round 1.
    pub fn value(&self) -> f64 {
        self.values[0][0]
    }

    pub fn value_at(&self, round: usize, belief: &BeliefVector) -> f64 {
        self.values[round - 1][belief.index()]
    }

    pub fn action_at(&self, round: usize, belief: &BeliefVector) -> usize {
        self.actions[round - 1][belief.index()] as usize
    }

    /// Expected value of playing `row` at `(round, belief)` and acting
    /// optimally afterwards.
    pub fn q_value(&self, round: usize, belief: &BeliefVector, row: usize) -> f64 {
        let (branches, n) = successors(&self.transitions, &self.pow3, belief.index(), row);
        let next = &self.values[round];
        branches[..n]
            .iter()
            .map(|&(s, p, r)| p * (r + next[s]))
            .sum()
    }

    /// Expected immediate reward per round under the planner's own model.
    pub fn predicted_rewards(&self) -> Vec<f64> {
        let mut dist = vec![0.0; self.states()];
        dist[0] = 1.0;
        let mut out = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let mut next = vec![0.0; self.states()];
            let mut reward = 0.0;
            for (s, &p) in dist.iter().enumerate().filter(|(_, &p)| p > 0.0) {
                let k = self.actions[t][s] as usize;
                let (branches, n) = successors(&self.transitions, &self.pow3, s, k);
                for &(s2, q, r) in &branches[..n] {
                    reward += p * q * r;
                    next[s2] += p * q;
                }
            }
            out.push(reward);
            dist = next;
        }
        out
    }

    /// Writes `round,belief,action,value` rows for every table entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "round,belief,action,value")?;
        for t in 0..self.horizon {
            for s in 0..self.states() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    t + 1,
                    BeliefVector::from_index(s, self.rows),
                    self.actions[t][s],
                    self.values[t][s]
                )?;
            }
        }
        Ok(())
    }

    /// Belief index after observing one round.
    pub fn update_index(&self, index: usize, obs: &Observation) -> usize {
        let row = obs.row;
        if !self.revealing[row] {
            return index;
        }
        let unit = self.pow3[row];
        match BeliefCell::from_digit(index / unit % 3) {
            BeliefCell::Unplayed => index + unit,
            BeliefCell::Uncertain if obs.reward == self.best_value[row] => index + unit,
            _ => index,
        }
    }
}

impl LeaderPolicy for BeliefPlan {
    /// Base-3 belief index; see [`BeliefVector::from_index`].
    type Memory = usize;

    fn observability(&self) -> Observability {
        Observability::Partial
    }

    fn initial(&self) -> usize {
        0
    }

    fn act(&self, index: &usize, round: usize) -> usize {
        self.actions[round - 1][*index] as usize
    }

    fn observe(&self, index: &usize, obs: &Observation) -> usize {
        self.update_index(*index, obs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{preset, GameSpec};
    use crate::policy::no_learning_path;
    use BeliefCell::*;

    const PICK_BOTH: usize = 2;

    fn table() -> Game {
        Game::new(preset("table-clearing").unwrap()).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let b = BeliefVector(vec![Uncertain, Unplayed, Learned]);
        assert_eq!(b.index(), 1 + 2 * 9);
        assert_eq!(BeliefVector::from_index(b.index(), 3), b);
        assert_eq!(b.to_string(), "p01");
    }

    #[test]
    fn first_play_becomes_uncertain() {
        let game = table();
        let t = belief_transition(&game, &BeliefVector::initial(3), PICK_BOTH).unwrap();
        assert_eq!(
            t,
            vec![(BeliefVector(vec![Unplayed, Unplayed, Uncertain]), 1.0, 0.0)]
        );
    }

    #[test]
    fn uncertain_splits_on_alpha() {
        let game = table();
        let b = BeliefVector(vec![Unplayed, Unplayed, Uncertain]);
        let t = belief_transition(&game, &b, PICK_BOTH).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].0, BeliefVector(vec![Unplayed, Unplayed, Learned]));
        assert_eq!((t[0].1, t[0].2), (0.9, 4.0));
        assert_eq!(t[1].0, b);
        assert!((t[1].1 - 0.1).abs() < 1e-15);
        assert_eq!(t[1].2, 0.0);
    }

    #[test]
    fn learned_is_absorbing() {
        let game = table();
        for row in 0..3 {
            let b = BeliefVector(vec![Learned; 3]);
            let t = belief_transition(&game, &b, row).unwrap();
            assert_eq!(t, vec![(b.clone(), 1.0, game.best_value(row))]);
        }
    }

    #[test]
    fn non_revealing_row_is_inert() {
        let game = table();
        let b = BeliefVector(vec![Unplayed, Uncertain, Unplayed]);
        let t = belief_transition(&game, &b, 0).unwrap();
        assert_eq!(t, vec![(b, 1.0, 2.0)]);
    }

    #[test]
    fn transition_rejects_bad_input() {
        let game = table();
        assert!(belief_transition(&game, &BeliefVector::initial(2), 0).is_err());
        assert!(belief_transition(&game, &BeliefVector::initial(3), 3).is_err());
    }

    #[test]
    fn table_clearing_plan() {
        let game = table();
        let plan = solve_belief(&game).unwrap();
        assert!((plan.value() - 7.56).abs() < 1e-12);
        assert_eq!(no_learning_path(&plan, &game), vec![PICK_BOTH; 3]);
        let predicted = plan.predicted_rewards();
        for (p, e) in predicted.iter().zip([0.0, 3.6, 3.96]) {
            assert!((p - e).abs() < 1e-12, "{predicted:?}");
        }
    }

    #[test]
    fn small_game_exploits_constant_row() {
        let game = Game::new(GameSpec::from_matrix(
            vec![vec![0.0, 5.0], vec![2.0, 2.0]],
            vec![0, 0],
            0.5,
            2,
            Model::M3,
        ))
        .unwrap();
        let plan = solve_belief(&game).unwrap();
        assert!((plan.value() - 4.0).abs() < 1e-12);
        assert_eq!(no_learning_path(&plan, &game), vec![1, 1]);
    }

    #[test]
    fn zero_alpha_constant_policy() {
        let game = Game::new(GameSpec::from_matrix(
            vec![vec![1.0, 9.0], vec![3.0, 4.0], vec![3.0, 0.0]],
            vec![0, 0, 0],
            0.0,
            4,
            Model::M3,
        ))
        .unwrap();
        let plan = solve_belief(&game).unwrap();
        assert_eq!(plan.value(), 12.0);
        assert_eq!(no_learning_path(&plan, &game), vec![1; 4]);
    }

    #[test]
    fn actions_match_one_step_lookahead() {
        let game = table().with_spec(|s| s.with_horizon(4)).unwrap();
        let plan = solve_belief(&game).unwrap();
        for round in 1..=4 {
            for s in 0..plan.states() {
                let b = BeliefVector::from_index(s, 3);
                let qs: Vec<f64> = (0..3).map(|k| plan.q_value(round, &b, k)).collect();
                let best = crate::game::argmax_first(qs.iter().copied()).unwrap();
                assert_eq!(plan.action_at(round, &b), best.0);
                assert_eq!(plan.value_at(round, &b), best.1);
            }
        }
    }

    #[test]
    fn capacity_and_model_errors() {
        let spec = GameSpec::from_matrix(vec![vec![1.0]; 13], vec![0; 13], 0.5, 1, Model::M3);
        let game = Game::new(spec).unwrap();
        let err = solve_belief(&game).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        assert!(err.to_string().contains("3^13"));
        let game = table().with_spec(|s| s.with_model(Model::M2)).unwrap();
        assert!(matches!(solve_belief(&game), Err(Error::WrongModel { .. })));
    }

    #[test]
    fn csv_dump_has_every_entry() {
        let plan = solve_belief(&table()).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 27);
        assert!(text.lines().nth(1).unwrap().starts_with("1,000,2,7.56"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transitions_conserve_probability(
                alpha in 0.0f64..=1.0,
                index in 0usize..27,
                row in 0usize..3,
            ) {
                let game = table().with_spec(|s| s.with_alpha(alpha)).unwrap();
                let b = BeliefVector::from_index(index, 3);
                let t = belief_transition(&game, &b, row).unwrap();
                let total: f64 = t.iter().map(|e| e.1).sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                for (next, _, _) in &t {
                    for k in 0..3 {
                        if k != row {
                            prop_assert_eq!(next.cell(k), b.cell(k));
                        }
                        if b.cell(k) == Learned {
                            prop_assert_eq!(next.cell(k), Learned);
                        }
                    }
                }
            }
        }
    }
}
