//! A single entry point over the three planners, with a serializable memory
//! so live sessions can be stored and resumed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::{solve_belief, BeliefCell, BeliefPlan, BeliefVector};
use crate::complete::{solve_complete, CompletePlan};
use crate::error::Result;
use crate::game::{Game, Model, Observability};
use crate::policy::{LeaderPolicy, Observation};
use crate::solver_full::FullRule;

/// Which follower model the leader plans against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Per-row learning, the follower's actual behavior.
    #[default]
    Partial,
    /// One reveal teaches the whole matrix.
    Complete,
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Partial => "partial",
            PlannerKind::Complete => "complete",
        })
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "partial" => Ok(PlannerKind::Partial),
            "complete" => Ok(PlannerKind::Complete),
            other => Err(format!(
                "unknown planner {other:?}, expected partial or complete"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Planner {
    Full(FullRule),
    Belief(BeliefPlan),
    Complete(CompletePlan),
}

/// Leader memory for any [`Planner`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaderState {
    /// Rows the follower is known to have learned.
    Revealed(Vec<bool>),
    Belief(BeliefVector),
    Global(BeliefCell),
}

impl Planner {
    /// Builds the planner for `kind`. The partial planner follows the game's
    /// model; the complete baseline uses the model's observability.
    pub fn build(game: &Game, kind: PlannerKind) -> Result<Self> {
        Self::build_with(game, kind, game.model().observability())
    }

    pub fn build_with(
        game: &Game,
        kind: PlannerKind,
        observability: Observability,
    ) -> Result<Self> {
        Ok(match kind {
            PlannerKind::Partial if game.model() == Model::M3 => {
                Planner::Belief(solve_belief(game)?)
            }
            PlannerKind::Partial => Planner::Full(FullRule::new(game)?),
            PlannerKind::Complete => Planner::Complete(solve_complete(game, observability)),
        })
    }

    pub fn kind(&self) -> PlannerKind {
        match self {
            Planner::Complete(_) => PlannerKind::Complete,
            _ => PlannerKind::Partial,
        }
    }

    /// The planner's own estimate of the game value.
    pub fn value(&self) -> f64 {
        match self {
            Planner::Full(p) => p.value(),
            Planner::Belief(p) => p.value(),
            Planner::Complete(p) => p.value(),
        }
    }

    pub fn predicted_rewards(&self) -> Vec<f64> {
        match self {
            Planner::Full(p) => p.predicted_rewards(),
            Planner::Belief(p) => p.predicted_rewards(),
            Planner::Complete(p) => p.predicted_rewards(),
        }
    }
}

impl LeaderPolicy for Planner {
    type Memory = LeaderState;

    fn observability(&self) -> Observability {
        match self {
            Planner::Full(p) => p.observability(),
            Planner::Belief(p) => p.observability(),
            Planner::Complete(p) => p.observability(),
        }
    }

    fn initial(&self) -> LeaderState {
        match self {
            Planner::Full(p) => LeaderState::Revealed(p.initial()),
            Planner::Belief(p) => LeaderState::Belief(BeliefVector::initial(p.rows())),
            Planner::Complete(p) => LeaderState::Global(p.initial()),
        }
    }

    fn act(&self, memory: &LeaderState, round: usize) -> usize {
        match (self, memory) {
            (Planner::Full(p), LeaderState::Revealed(r)) => p.act(r, round),
            (Planner::Belief(p), LeaderState::Belief(b)) => p.act(&b.index(), round),
            (Planner::Complete(p), LeaderState::Global(c)) => p.act(c, round),
            _ => panic!("leader state does not belong to this planner"),
        }
    }

    fn observe(&self, memory: &LeaderState, obs: &Observation) -> LeaderState {
        match (self, memory) {
            (Planner::Full(p), LeaderState::Revealed(r)) => {
                LeaderState::Revealed(p.observe(r, obs))
            }
            (Planner::Belief(p), LeaderState::Belief(b)) => LeaderState::Belief(
                BeliefVector::from_index(p.observe(&b.index(), obs), p.rows()),
            ),
            (Planner::Complete(p), LeaderState::Global(c)) => {
                LeaderState::Global(p.observe(c, obs))
            }
            _ => panic!("leader state does not belong to this planner"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::preset;
    use crate::policy::no_learning_path;

    #[test]
    fn table_clearing_first_actions() {
        let game = Game::new(preset("table-clearing").unwrap()).unwrap();
        let partial = Planner::build(&game, PlannerKind::Partial).unwrap();
        let complete = Planner::build(&game, PlannerKind::Complete).unwrap();
        assert_eq!(no_learning_path(&partial, &game), vec![2, 2, 2]);
        assert_eq!(no_learning_path(&complete, &game), vec![1, 2, 2]);
        assert_eq!(partial.kind(), PlannerKind::Partial);
        assert!(matches!(partial, Planner::Belief(_)));

        let m2 = game.with_spec(|s| s.with_model(Model::M2)).unwrap();
        assert!(matches!(
            Planner::build(&m2, PlannerKind::Partial).unwrap(),
            Planner::Full(_)
        ));
    }

    #[test]
    fn leader_state_serializes() {
        let state = LeaderState::Belief(BeliefVector(vec![BeliefCell::Uncertain]));
        let json = serde_json::to_string(&state).unwrap();
        assert_eq!(json, r#"{"belief":["uncertain"]}"#);
        assert_eq!(serde_json::from_str::<LeaderState>(&json).unwrap(), state);
    }
}
