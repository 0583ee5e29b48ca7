//! Game specification, validation and per-row statistics.
//!
//! A game is an identical-payoff matrix played for a fixed number of rounds.
//! The leader picks a row, the follower answers with a column, and both
//! receive the same payoff. The follower starts out with a believed best
//! response for every row and learns the true payoffs of a row with
//! probability `alpha` each time that row is played.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SpecError};

/// When the follower learns, and whether the leader sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// Learning happens after the leader moves and before the follower
    /// responds. The leader observes the outcome.
    M1,
    /// Learning happens after the follower responds. The leader is told
    /// whether the row was learned before the next round.
    M2,
    /// Learning happens after the follower responds and the leader only
    /// sees the follower's subsequent responses.
    M3,
}

impl Model {
    pub fn learns_before_response(self) -> bool {
        matches!(self, Model::M1)
    }

    pub fn observability(self) -> Observability {
        match self {
            Model::M1 | Model::M2 => Observability::Full,
            Model::M3 => Observability::Partial,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::M1 => "M1",
            Model::M2 => "M2",
            Model::M3 => "M3",
        };
        f.write_str(s)
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(Model::M1),
            "M2" => Ok(Model::M2),
            "M3" => Ok(Model::M3),
            other => Err(format!("unknown model {other:?}, expected M1, M2 or M3")),
        }
    }
}

/// Whether the leader directly observes the follower's learned status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observability {
    Full,
    Partial,
}

/// Serialized form of a game. See [`Game`] for the validated wrapper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    /// Row-major `m x n` payoffs.
    pub rewards: Vec<Vec<f64>>,
    /// Column the follower initially believes is best, per row.
    pub belief_best_response: Vec<usize>,
    /// Rows whose play can teach the follower anything.
    pub revealing: Vec<bool>,
    pub alpha: f64,
    pub horizon: usize,
    pub model: Model,
}

impl GameSpec {
    pub fn rows(&self) -> usize {
        self.rewards.len()
    }

    pub fn columns(&self) -> usize {
        self.column_labels.len()
    }

    /// Builds a spec with generated labels, all rows revealing.
    pub fn from_matrix(
        rewards: Vec<Vec<f64>>,
        belief_best_response: Vec<usize>,
        alpha: f64,
        horizon: usize,
        model: Model,
    ) -> Self {
        let m = rewards.len();
        let n = rewards.first().map_or(0, Vec::len);
        GameSpec {
            row_labels: (0..m).map(|i| format!("r{i}")).collect(),
            column_labels: (0..n).map(|j| format!("c{j}")).collect(),
            rewards,
            belief_best_response,
            revealing: vec![true; m],
            alpha,
            horizon,
            model,
        }
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Checks every structural invariant of `spec` and hands it back unchanged.
pub fn validate(spec: GameSpec) -> Result<GameSpec, SpecError> {
    let m = spec.rewards.len();
    if m == 0 {
        return Err(SpecError::Empty { field: "rewards" });
    }
    let n = spec.column_labels.len();
    if n == 0 {
        return Err(SpecError::Empty {
            field: "column_labels",
        });
    }
    if spec.row_labels.len() != m {
        return Err(SpecError::DimensionMismatch {
            field: "row_labels",
            index: spec.row_labels.len().min(m),
            expected: m,
            found: spec.row_labels.len(),
        });
    }
    for (i, row) in spec.rewards.iter().enumerate() {
        if row.len() != n {
            return Err(SpecError::DimensionMismatch {
                field: "rewards",
                index: i,
                expected: n,
                found: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|r| !r.is_finite()) {
            return Err(SpecError::NonFinitePayoff { row: i, column: j });
        }
    }
    for (field, len) in [
        ("belief_best_response", spec.belief_best_response.len()),
        ("revealing", spec.revealing.len()),
    ] {
        if len != m {
            return Err(SpecError::DimensionMismatch {
                field,
                index: len.min(m),
                expected: m,
                found: len,
            });
        }
    }
    if let Some((row, &column)) = spec
        .belief_best_response
        .iter()
        .enumerate()
        .find(|(_, &c)| c >= n)
    {
        return Err(SpecError::InvalidBeliefColumn { row, column });
    }
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(SpecError::AlphaOutOfRange(spec.alpha));
    }
    if spec.horizon == 0 {
        return Err(SpecError::ZeroHorizon);
    }
    check_unique("row_labels", &spec.row_labels)?;
    check_unique("column_labels", &spec.column_labels)?;
    Ok(spec)
}

fn check_unique(field: &'static str, labels: &[String]) -> Result<(), SpecError> {
    let mut seen = HashSet::new();
    for (index, label) in labels.iter().enumerate() {
        if !seen.insert(label.as_str()) {
            return Err(SpecError::DuplicateLabel {
                field,
                index,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

/// Index of the first maximum. Ties go to the lowest index.
pub fn argmax_first<I>(values: I) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Per-row payoff summaries used by every planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    /// Best achievable payoff in each row (the follower knows the row).
    pub best_value: Vec<f64>,
    /// Lowest-index column attaining `best_value`.
    pub best_column: Vec<usize>,
    /// Payoff when the follower plays its believed response.
    pub naive_value: Vec<f64>,
}

pub fn row_stats(spec: &GameSpec) -> RowStats {
    let mut best_value = Vec::with_capacity(spec.rows());
    let mut best_column = Vec::with_capacity(spec.rows());
    let mut naive_value = Vec::with_capacity(spec.rows());
    for (row, &belief) in spec.rewards.iter().zip(&spec.belief_best_response) {
        let (j, v) = argmax_first(row.iter().copied()).expect("validated rows are non-empty");
        best_value.push(v);
        best_column.push(j);
        naive_value.push(row[belief]);
    }
    RowStats {
        best_value,
        best_column,
        naive_value,
    }
}

/// A validated game together with its row statistics. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    spec: GameSpec,
    stats: RowStats,
}

impl Game {
    pub fn new(spec: GameSpec) -> Result<Self, SpecError> {
        let spec = validate(spec)?;
        let stats = row_stats(&spec);
        Ok(Game { spec, stats })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn into_spec(self) -> GameSpec {
        self.spec
    }

    pub fn stats(&self) -> &RowStats {
        &self.stats
    }

    pub fn rows(&self) -> usize {
        self.spec.rows()
    }

    pub fn columns(&self) -> usize {
        self.spec.columns()
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn model(&self) -> Model {
        self.spec.model
    }

    pub fn reward(&self, row: usize, column: usize) -> f64 {
        self.spec.rewards[row][column]
    }

    pub fn is_revealing(&self, row: usize) -> bool {
        self.spec.revealing[row]
    }

    /// `R_k`: the row's payoff once the follower knows it.
    pub fn best_value(&self, row: usize) -> f64 {
        self.stats.best_value[row]
    }

    /// `C_k`: the row's payoff under the follower's believed response.
    pub fn naive_value(&self, row: usize) -> f64 {
        self.stats.naive_value[row]
    }

    pub fn belief_column(&self, row: usize) -> usize {
        self.spec.belief_best_response[row]
    }

    pub fn best_column(&self, row: usize) -> usize {
        self.stats.best_column[row]
    }

    pub fn row_label(&self, row: usize) -> &str {
        &self.spec.row_labels[row]
    }

    pub fn column_label(&self, column: usize) -> &str {
        &self.spec.column_labels[column]
    }

    /// Whether a realized reward shows the follower best-responding.
    pub fn is_best_response(&self, row: usize, reward: f64) -> bool {
        reward == self.best_value(row)
    }

    /// Same game under a different model, alpha or horizon.
    pub fn with_spec(&self, f: impl FnOnce(GameSpec) -> GameSpec) -> Result<Game, SpecError> {
        Game::new(f(self.spec.clone()))
    }
}

impl TryFrom<GameSpec> for Game {
    type Error = SpecError;

    fn try_from(spec: GameSpec) -> Result<Self, SpecError> {
        Game::new(spec)
    }
}

/// Parses and validates a game-spec JSON document.
pub fn load_spec(document: &str) -> Result<GameSpec> {
    let spec: GameSpec = serde_json::from_str(document)?;
    Ok(validate(spec)?)
}

pub fn save_spec(spec: &GameSpec) -> String {
    serde_json::to_string_pretty(spec).expect("game specs always serialize")
}

const TABLE_CLEARING: &str = include_str!("../presets/table-clearing.json");

/// Names of the compiled-in presets.
pub const PRESETS: &[&str] = &["table-clearing"];

pub fn preset(name: &str) -> Result<GameSpec> {
    match name {
        "table-clearing" => load_spec(TABLE_CLEARING),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}
