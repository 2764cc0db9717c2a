//! JSON game files: players with their actions and type distributions, plus
//! one nested payoff array per player.
//!
//! ```json
//! {
//!   "players": [
//!     {"name": "1", "actions": ["H", "T"], "distribution": {"kind": "uniform_box", "lo": -2, "hi": 2}},
//!     {"name": "2", "actions": ["H", "T"], "distribution": {"kind": "uniform_box", "lo": -2, "hi": 2}}
//!   ],
//!   "payoffs": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]]
//! }
//! ```
//!
//! `payoffs[i]` is nested once per player, indexed by player 1's action
//! first. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::Error;
use crate::game::StaticGame;
use crate::model::PopulationGame;
use crate::perturbation::TypeDistribution;

#[derive(Debug, thiserror::Error)]
pub enum GameFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(#[from] Error),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    players: Vec<RawPlayer>,
    payoffs: Vec<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlayer {
    name: String,
    actions: Vec<String>,
    distribution: RawDistribution,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawDistribution {
    ExtremeValue { lambda: f64 },
    UniformBox { lo: f64, hi: f64 },
    Empirical { samples: Vec<Vec<f64>> },
}

impl RawDistribution {
    fn build(self) -> Result<TypeDistribution, Error> {
        match self {
            RawDistribution::ExtremeValue { lambda } => TypeDistribution::extreme_value(lambda),
            RawDistribution::UniformBox { lo, hi } => TypeDistribution::uniform_box(lo, hi),
            RawDistribution::Empirical { samples } => TypeDistribution::empirical(samples),
        }
    }
}

/// Flattens a nested array whose shape must be exactly `dims`, row-major.
fn flatten(
    v: &Value,
    dims: &[usize],
    path: &mut Vec<usize>,
    out: &mut Vec<f64>,
) -> Result<(), String> {
    let here = || path.iter().map(|k| format!("[{k}]")).collect::<String>();
    match dims.split_first() {
        None => match v.as_f64() {
            Some(x) if x.is_finite() => {
                out.push(x);
                Ok(())
            }
            _ => Err(format!("payoff{} is not a finite number", here())),
        },
        Some((&n, rest)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| format!("payoff{} must be an array", here()))?;
            if arr.len() != n {
                return Err(format!(
                    "payoff{} has {} entries, expected {n}",
                    here(),
                    arr.len()
                ));
            }
            for (k, x) in arr.iter().enumerate() {
                path.push(k);
                flatten(x, rest, path, out)?;
                path.pop();
            }
            Ok(())
        }
    }
}

/// Parses a game file from a string.
pub fn from_str(text: &str) -> Result<PopulationGame, GameFileError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        // serde_json appends the position, which is reported separately.
        let message = match full.rfind(" at line ") {
            Some(k) => full[..k].to_string(),
            None => full,
        };
        GameFileError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    })?;
    let n = raw.players.len();
    if raw.payoffs.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} payoff arrays for {n} players",
            raw.payoffs.len()
        ))
        .into());
    }
    let dims: Vec<usize> = raw.players.iter().map(|p| p.actions.len()).collect();
    let mut payoffs = Vec::with_capacity(n);
    for (i, v) in raw.payoffs.iter().enumerate() {
        let mut flat = Vec::new();
        flatten(v, &dims, &mut vec![i], &mut flat).map_err(Error::InvalidArgument)?;
        payoffs.push(flat);
    }
    let mut names = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    for p in raw.players {
        names.push(p.name);
        actions.push(p.actions);
        dists.push(p.distribution.build()?);
    }
    let game = StaticGame::new(names, actions, payoffs)?;
    Ok(PopulationGame::new(game, dists)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<PopulationGame, GameFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GameFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_str(&text)
}
