use thiserror::Error;

use crate::game::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown player index {0}")]
    UnknownPlayer(usize),
    #[error("player {player} has no action with index {action}")]
    UnknownAction { player: usize, action: usize },
    #[error("actions must be distinct (got {0} twice)")]
    IdenticalActions(usize),
    #[error("invalid game: {}", join_violations(.0))]
    InvalidGame(Vec<Violation>),
    #[error("invalid mixed profile: {0}")]
    InvalidProfile(String),
    #[error("invalid type distribution: {0}")]
    InvalidDistribution(String),
    #[error("distribution has {found} coordinates but the player has {expected} actions")]
    ArityMismatch { expected: usize, found: usize },
    #[error("bounds for player {player} sum to {sum}, which exceeds 1")]
    InvalidBounds { player: usize, sum: f64 },
    #[error("bound for player {player}, action {action} fell by {decrease} at step {step}")]
    NotMonotone {
        step: usize,
        player: usize,
        action: usize,
        decrease: f64,
    },
    #[error("Monte Carlo integration needs a positive sample count")]
    ZeroSamples,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
