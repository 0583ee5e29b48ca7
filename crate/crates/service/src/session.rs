//! The per-session state machine, independent of HTTP.

use revealplan_core::{
    Game, GameSpec, LeaderPolicy, LeaderState, Model, Observability, Observation, Planner,
    PlannerKind,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingHuman,
    /// The follower must say whether the row just played taught them its
    /// payoffs. Only full-observability models ask.
    AwaitingLearnedDeclaration,
    Finished,
}

/// What the human is shown about the leader's rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevealMode {
    /// Only the realized rewards.
    #[default]
    OutcomeOnly,
    /// The true payoffs of every row once it has been played.
    RowOnPlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: usize,
    pub leader_action: usize,
    pub follower_action: usize,
    pub reward: f64,
    /// The follower's declaration, when the model asks for one.
    pub learned: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("{0}")]
    WrongPhase(String),
    #[error("column {column} out of range, the game has {columns} columns")]
    InvalidColumn { column: usize, columns: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    /// Preset the spec came from, if any.
    pub preset: Option<String>,
    pub spec: GameSpec,
    pub planner: PlannerKind,
    pub reveal_mode: RevealMode,
    pub leader: LeaderState,
    pub phase: Phase,
    pub transcript: Vec<TranscriptEntry>,
}

fn asks_for_declaration(model: Model) -> bool {
    model.observability() == Observability::Full
}

impl Session {
    pub fn new(
        id: String,
        preset: Option<String>,
        game: &Game,
        planner: &Planner,
        reveal_mode: RevealMode,
    ) -> Self {
        Session {
            id,
            preset,
            spec: game.spec().clone(),
            planner: planner.kind(),
            reveal_mode,
            leader: planner.initial(),
            phase: Phase::AwaitingHuman,
            transcript: Vec::new(),
        }
    }

    pub fn completed_rounds(&self) -> usize {
        self.transcript.len()
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.transcript.iter().map(|e| e.reward).sum()
    }

    /// Row the leader plays next, while a human response is awaited.
    pub fn leader_action(&self, planner: &Planner) -> Option<usize> {
        (self.phase == Phase::AwaitingHuman)
            .then(|| planner.act(&self.leader, self.completed_rounds() + 1))
    }

    fn wrong_phase(&self, what: &str) -> SessionError {
        let why = match self.phase {
            Phase::AwaitingHuman => "the session is waiting for the follower's action",
            Phase::AwaitingLearnedDeclaration => {
                "the session is waiting for the learned declaration"
            }
            Phase::Finished => "the session is finished",
        };
        SessionError::WrongPhase(format!("cannot {what}: {why}"))
    }

    fn advance(&mut self, planner: &Planner, obs: &Observation) {
        self.leader = planner.observe(&self.leader, obs);
        self.phase = if self.completed_rounds() >= self.spec.horizon {
            Phase::Finished
        } else {
            Phase::AwaitingHuman
        };
    }

    /// Records the follower's response to the current leader action.
    pub fn submit_action(
        &mut self,
        game: &Game,
        planner: &Planner,
        column: usize,
    ) -> Result<&TranscriptEntry, SessionError> {
        let Some(row) = self.leader_action(planner) else {
            return Err(self.wrong_phase("submit an action"));
        };
        if column >= game.columns() {
            return Err(SessionError::InvalidColumn {
                column,
                columns: game.columns(),
            });
        }
        let reward = game.reward(row, column);
        self.transcript.push(TranscriptEntry {
            round: self.completed_rounds() + 1,
            leader_action: row,
            follower_action: column,
            reward,
            learned: None,
        });
        let mut obs = Observation {
            row,
            column,
            reward,
            learned: None,
        };
        if asks_for_declaration(game.model()) {
            if game.is_revealing(row) {
                self.phase = Phase::AwaitingLearnedDeclaration;
                return Ok(self.transcript.last().expect("just pushed"));
            }
            obs.learned = Some(false);
        }
        self.advance(planner, &obs);
        Ok(self.transcript.last().expect("just pushed"))
    }

    /// Records whether the row just played taught the follower its payoffs.
    pub fn declare_learned(
        &mut self,
        game: &Game,
        planner: &Planner,
        learned: bool,
    ) -> Result<(), SessionError> {
        if !asks_for_declaration(game.model()) {
            return Err(SessionError::WrongPhase(format!(
                "model {} never asks for a learned declaration",
                game.model()
            )));
        }
        if self.phase != Phase::AwaitingLearnedDeclaration {
            return Err(self.wrong_phase("declare learning"));
        }
        let entry = self.transcript.last_mut().expect("a round was played");
        entry.learned = Some(learned);
        let obs = Observation {
            row: entry.leader_action,
            column: entry.follower_action,
            reward: entry.reward,
            learned: Some(learned),
        };
        self.advance(planner, &obs);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowView {
    pub row: usize,
    pub label: String,
    /// True payoffs of the row, shown only in `row_on_play` mode.
    pub payoffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: usize,
    pub leader_action: usize,
    pub leader_label: String,
    pub follower_action: usize,
    pub follower_label: String,
    pub reward: f64,
    pub learned: Option<bool>,
    pub cumulative_reward: f64,
    pub note: Option<String>,
}

/// Snapshot of a session as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub preset: Option<String>,
    pub phase: Phase,
    pub model: Model,
    pub planner: PlannerKind,
    pub reveal_mode: RevealMode,
    pub horizon: usize,
    pub completed_rounds: usize,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub leader_action: Option<RowView>,
    /// Rows whose payoffs the human has been shown.
    pub revealed_rows: Vec<RowView>,
    pub history: Vec<HistoryEntry>,
    pub cumulative_reward: f64,
    pub leader_state: LeaderState,
}

impl Session {
    pub fn view(
        &self,
        game: &Game,
        planner: &Planner,
        notes: &[crate::OutcomeNote],
    ) -> SessionView {
        let show = self.reveal_mode == RevealMode::RowOnPlay;
        let row_view = |row: usize| RowView {
            row,
            label: game.row_label(row).to_string(),
            payoffs: show.then(|| game.spec().rewards[row].clone()),
        };
        let mut played: Vec<usize> = self.transcript.iter().map(|e| e.leader_action).collect();
        let leader_action = self.leader_action(planner);
        played.extend(leader_action);
        played.sort_unstable();
        played.dedup();
        let mut total = 0.0;
        let history = self
            .transcript
            .iter()
            .map(|e| {
                total += e.reward;
                HistoryEntry {
                    round: e.round,
                    leader_action: e.leader_action,
                    leader_label: game.row_label(e.leader_action).to_string(),
                    follower_action: e.follower_action,
                    follower_label: game.column_label(e.follower_action).to_string(),
                    reward: e.reward,
                    learned: e.learned,
                    cumulative_reward: total,
                    note: notes
                        .iter()
                        .find(|n| n.row == e.leader_action && n.column == e.follower_action)
                        .map(|n| n.note.clone()),
                }
            })
            .collect();
        SessionView {
            id: self.id.clone(),
            preset: self.preset.clone(),
            phase: self.phase,
            model: game.model(),
            planner: self.planner,
            reveal_mode: self.reveal_mode,
            horizon: game.horizon(),
            completed_rounds: self.completed_rounds(),
            row_labels: game.spec().row_labels.clone(),
            column_labels: game.spec().column_labels.clone(),
            leader_action: leader_action.map(row_view),
            revealed_rows: if show {
                played.into_iter().map(row_view).collect()
            } else {
                Vec::new()
            },
            history,
            cumulative_reward: total,
            leader_state: self.leader.clone(),
        }
    }

    /// The transcript as CSV.
    pub fn transcript_csv(&self, game: &Game) -> Result<String, csv::Error> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record([
            "round",
            "leader_action",
            "leader_label",
            "follower_action",
            "follower_label",
            "reward",
            "learned",
            "cumulative_reward",
        ])?;
        let mut total = 0.0;
        for e in &self.transcript {
            total += e.reward;
            out.write_record([
                e.round.to_string(),
                e.leader_action.to_string(),
                game.row_label(e.leader_action).to_string(),
                e.follower_action.to_string(),
                game.column_label(e.follower_action).to_string(),
                e.reward.to_string(),
                e.learned.map(|l| l.to_string()).unwrap_or_default(),
                total.to_string(),
            ])?;
        }
        let bytes = out.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use revealplan_core::preset;

    fn setup(model: Model, kind: PlannerKind) -> (Game, Planner, Session) {
        let game = Game::new(preset("table-clearing").unwrap().with_model(model)).unwrap();
        let planner = Planner::build(&game, kind).unwrap();
        let session = Session::new("s".into(), None, &game, &planner, RevealMode::OutcomeOnly);
        (game, planner, session)
    }

    #[test]
    fn m3_rounds_never_ask_for_declarations() {
        let (game, planner, mut s) = setup(Model::M3, PlannerKind::Partial);
        assert_eq!(s.leader_action(&planner), Some(2));
        assert_eq!(s.submit_action(&game, &planner, 0).unwrap().reward, 0.0);
        assert_eq!(s.phase, Phase::AwaitingHuman);
        assert!(s.declare_learned(&game, &planner, true).is_err());
        assert_eq!(s.submit_action(&game, &planner, 2).unwrap().reward, 4.0);
        assert_eq!(
            s.leader,
            LeaderState::Belief(revealplan_core::BeliefVector(vec![
                revealplan_core::BeliefCell::Unplayed,
                revealplan_core::BeliefCell::Unplayed,
                revealplan_core::BeliefCell::Learned,
            ]))
        );
        s.submit_action(&game, &planner, 2).unwrap();
        assert_eq!(s.phase, Phase::Finished);
        assert_eq!(s.cumulative_reward(), 8.0);
        assert!(matches!(
            s.submit_action(&game, &planner, 0),
            Err(SessionError::WrongPhase(_))
        ));
    }

    #[test]
    fn m2_declarations_drive_commitment() {
        let (game, planner, mut s) = setup(Model::M2, PlannerKind::Partial);
        let first = s.leader_action(&planner).unwrap();
        s.submit_action(&game, &planner, 0).unwrap();
        assert_eq!(s.phase, Phase::AwaitingLearnedDeclaration);
        assert_eq!(s.leader_action(&planner), None);
        assert!(s.submit_action(&game, &planner, 0).is_err());
        s.declare_learned(&game, &planner, true).unwrap();
        assert_eq!(s.leader_action(&planner), Some(first));
        assert_eq!(s.transcript[0].learned, Some(true));
    }

    #[test]
    fn bad_column_is_rejected_without_side_effects() {
        let (game, planner, mut s) = setup(Model::M3, PlannerKind::Complete);
        let before = s.clone();
        assert_eq!(
            s.submit_action(&game, &planner, 3),
            Err(SessionError::InvalidColumn {
                column: 3,
                columns: 3
            })
        );
        assert_eq!(s, before);
    }
}
