//! Planning for repeated identical-payoff leader-follower games in which the
//! follower best-responds to a privately held reward model that improves
//! stochastically as rows are played.
//!
//! * [`game`]: game specs, validation and row statistics.
//! * [`follower`]: the partially adapting follower.
//! * [`solver_full`]: `O(mT)` optimal planner when learning is observed (M1, M2).
//! * [`belief`]: exact belief-space planner when it is not (M3).
//! * [`complete`]: the complete-adaptation baseline.
//! * [`oracle`]: brute-force expectimax over observation histories.
//! * [`sim`]: Monte Carlo evaluation and the horizon study.
//! * [`verify`]: randomized cross-checks between the above.

pub mod belief;
pub mod complete;
pub mod error;
pub mod follower;
pub mod game;
pub mod oracle;
pub mod planner;
pub mod policy;
pub mod sim;
pub mod solver_full;
pub mod verify;

pub use belief::{belief_transition, solve_belief, BeliefCell, BeliefPlan, BeliefVector};
pub use complete::{solve_complete, CompletePlan};
pub use error::{Error, Result, SpecError};
pub use follower::{play_round, respond, FollowerKnowledge, RoundOutcome};
pub use game::{
    load_spec, preset, row_stats, save_spec, validate, Game, GameSpec, Model, Observability,
    RowStats,
};
pub use oracle::{oracle_policy_check, oracle_value};
pub use planner::{LeaderState, Planner, PlannerKind};
pub use policy::{no_learning_path, FixedPlan, LeaderPolicy, Observation};
pub use sim::{generate_instance, simulate, study, SimConfig, SimReport, StudyConfig, StudyResult};
pub use solver_full::{solve_full, FullObsState, FullRule, PlanResult};
