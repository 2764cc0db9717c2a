//! Finite normal-form games between populations.
//!
//! Payoffs are stored per player as a flat row-major tensor over full
//! action profiles (player 0 varies slowest). Every player also gets a
//! precomputed table of *opponent profile* offsets, so that "all profiles
//! of the other players" can be walked with a single index `o` in
//! `0..num_opponent_profiles(i)`; opponents are enumerated in player order
//! with the first opponent varying slowest.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// One way a game definition fails to describe a valid game.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewPlayers(usize),
    TooFewActions {
        player: usize,
    },
    DuplicateAction {
        player: usize,
        action: String,
    },
    ActionListCount {
        expected: usize,
        found: usize,
    },
    PayoffPlayerCount {
        expected: usize,
        found: usize,
    },
    PayoffNotTotal {
        player: usize,
        expected: usize,
        found: usize,
    },
    NonFinitePayoff {
        player: usize,
        index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewPlayers(n) => write!(f, "game needs ≥ 2 players (has {n})"),
            Violation::TooFewActions { player } => {
                write!(f, "player needs ≥ 2 actions (player {player})")
            }
            Violation::DuplicateAction { player, action } => {
                write!(f, "player {player} declares action {action:?} twice")
            }
            Violation::ActionListCount { expected, found } => {
                write!(f, "expected {expected} action lists, found {found}")
            }
            Violation::PayoffPlayerCount { expected, found } => {
                write!(f, "expected {expected} payoff tensors, found {found}")
            }
            Violation::PayoffNotTotal {
                player,
                expected,
                found,
            } => write!(
                f,
                "payoff tensor not total (player {player}: {found} of {expected} entries)"
            ),
            Violation::NonFinitePayoff { player, index } => {
                write!(f, "payoff entry {index} of player {player} is not finite")
            }
        }
    }
}

/// Unvalidated game data, as read from a file or assembled by hand.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GameDef {
    pub players: Vec<String>,
    pub actions: Vec<Vec<String>>,
    /// Flat row-major payoff tensor per player.
    pub payoffs: Vec<Vec<f64>>,
}

impl GameDef {
    pub fn build(self) -> Result<StaticGame> {
        let violations = validate_game(&self);
        if !violations.is_empty() {
            return Err(Error::InvalidGame(violations));
        }
        Ok(StaticGame::from_valid(self))
    }
}

/// Checks every structural invariant of a game definition and lists the
/// violations found. An empty list means the definition is a valid game.
pub fn validate_game(def: &GameDef) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = def.players.len();
    if n < 2 {
        out.push(Violation::TooFewPlayers(n));
    }
    if def.actions.len() != n {
        out.push(Violation::ActionListCount {
            expected: n,
            found: def.actions.len(),
        });
    }
    for (player, acts) in def.actions.iter().enumerate() {
        if acts.len() < 2 {
            out.push(Violation::TooFewActions { player });
        }
        for (k, a) in acts.iter().enumerate() {
            if acts[..k].contains(a) {
                out.push(Violation::DuplicateAction {
                    player,
                    action: a.clone(),
                });
            }
        }
    }
    if def.payoffs.len() != n {
        out.push(Violation::PayoffPlayerCount {
            expected: n,
            found: def.payoffs.len(),
        });
    }
    let total: usize = def.actions.iter().map(Vec::len).product();
    for (player, tensor) in def.payoffs.iter().enumerate() {
        if tensor.len() != total {
            out.push(Violation::PayoffNotTotal {
                player,
                expected: total,
                found: tensor.len(),
            });
        }
        if let Some(index) = tensor.iter().position(|x| !x.is_finite()) {
            out.push(Violation::NonFinitePayoff { player, index });
        }
    }
    out
}

/// A validated static game `⟨I, (A_i, u_i)⟩`.
///
/// Action order is the declaration order and doubles as the tie-breaking
/// order used whenever several actions are equally good.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticGame {
    players: Vec<String>,
    actions: Vec<Vec<String>>,
    payoffs: Vec<Vec<f64>>,
    strides: Vec<usize>,
    opp_offsets: Vec<Vec<usize>>,
}

impl StaticGame {
    pub fn new(
        players: Vec<String>,
        actions: Vec<Vec<String>>,
        payoffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        GameDef {
            players,
            actions,
            payoffs,
        }
        .build()
    }

    /// Two-player game from row-player and column-player payoff matrices
    /// (rows are player 1 actions, columns player 2 actions).
    pub fn bimatrix<S: AsRef<str>>(
        row_actions: &[S],
        col_actions: &[S],
        row_payoffs: &[Vec<f64>],
        col_payoffs: &[Vec<f64>],
    ) -> Result<Self> {
        let total = row_actions.len() * col_actions.len();
        let mut payoffs = Vec::with_capacity(2);
        for (player, m) in [row_payoffs, col_payoffs].into_iter().enumerate() {
            if m.len() != row_actions.len() || m.iter().any(|r| r.len() != col_actions.len()) {
                return Err(Error::InvalidGame(vec![Violation::PayoffNotTotal {
                    player,
                    expected: total,
                    found: m.iter().map(Vec::len).sum(),
                }]));
            }
            payoffs.push(m.iter().flat_map(|r| r.iter().copied()).collect());
        }
        let def = GameDef {
            players: vec!["1".into(), "2".into()],
            actions: vec![
                row_actions.iter().map(|s| s.as_ref().to_string()).collect(),
                col_actions.iter().map(|s| s.as_ref().to_string()).collect(),
            ],
            payoffs,
        };
        def.build()
    }

    fn from_valid(def: GameDef) -> Self {
        let counts: Vec<usize> = def.actions.iter().map(Vec::len).collect();
        let n = counts.len();
        let mut strides = vec![1; n];
        for j in (0..n.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * counts[j + 1];
        }
        let opp_offsets = (0..n)
            .map(|i| {
                let mut offsets = vec![0usize];
                for j in (0..n).filter(|&j| j != i) {
                    let stride = strides[j];
                    offsets = offsets
                        .iter()
                        .flat_map(|&base| (0..counts[j]).map(move |a| base + a * stride))
                        .collect();
                }
                offsets
            })
            .collect();
        StaticGame {
            players: def.players,
            actions: def.actions,
            payoffs: def.payoffs,
            strides,
            opp_offsets,
        }
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn player_name(&self, i: usize) -> &str {
        &self.players[i]
    }

    pub fn actions(&self, i: usize) -> &[String] {
        &self.actions[i]
    }

    pub fn num_actions(&self, i: usize) -> usize {
        self.actions[i].len()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        self.actions.iter().map(Vec::len).collect()
    }

    pub fn is_two_by_two(&self) -> bool {
        self.num_players() == 2 && self.num_actions(0) == 2 && self.num_actions(1) == 2
    }

    pub fn player_index(&self, name: &str) -> Option<usize> {
        self.players.iter().position(|p| p == name)
    }

    pub fn action_index(&self, i: usize, name: &str) -> Option<usize> {
        self.actions.get(i)?.iter().position(|a| a == name)
    }

    pub(crate) fn check_player(&self, i: usize) -> Result<()> {
        if i < self.num_players() {
            Ok(())
        } else {
            Err(Error::UnknownPlayer(i))
        }
    }

    pub(crate) fn check_action(&self, i: usize, a: usize) -> Result<()> {
        self.check_player(i)?;
        if a < self.num_actions(i) {
            Ok(())
        } else {
            Err(Error::UnknownAction {
                player: i,
                action: a,
            })
        }
    }

    /// Payoff of player `i` at a full action profile.
    pub fn payoff(&self, i: usize, profile: &[usize]) -> f64 {
        let flat: usize = profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum();
        self.payoffs[i][flat]
    }

    /// Raw flat payoff tensor of player `i`.
    pub fn payoff_tensor(&self, i: usize) -> &[f64] {
        &self.payoffs[i]
    }

    pub fn num_opponent_profiles(&self, i: usize) -> usize {
        self.opp_offsets[i].len()
    }

    /// Payoff of player `i` playing `a` against opponent profile `o`.
    #[inline]
    pub fn own_payoff(&self, i: usize, a: usize, o: usize) -> f64 {
        self.payoffs[i][a * self.strides[i] + self.opp_offsets[i][o]]
    }

    /// Decodes opponent profile `o` of player `i` into `(player, action)` pairs.
    pub fn opponent_profile(&self, i: usize, o: usize) -> Vec<(usize, usize)> {
        let mut rest = o;
        let mut out = Vec::with_capacity(self.num_players() - 1);
        for j in (0..self.num_players()).rev().filter(|&j| j != i) {
            let k = self.num_actions(j);
            out.push((j, rest % k));
            rest /= k;
        }
        out.reverse();
        out
    }

    /// Probability of each opponent profile of `i` under independent
    /// opponent mixtures taken from `opponents` (entry `i` is ignored).
    pub fn opponent_weights(&self, i: usize, opponents: &[Vec<f64>]) -> Vec<f64> {
        let mut weights = vec![1.0];
        for j in (0..self.num_players()).filter(|&j| j != i) {
            let dist = &opponents[j];
            weights = weights
                .iter()
                .flat_map(|&w| dist.iter().map(move |&p| w * p))
                .collect();
        }
        weights
    }
}

/// One probability distribution over actions per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile {
    dist: Vec<Vec<f64>>,
}

impl MixedProfile {
    pub fn new(dist: Vec<Vec<f64>>) -> Result<Self> {
        for (i, d) in dist.iter().enumerate() {
            if d.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "player {i} has a negative or non-finite probability"
                )));
            }
            let sum: f64 = d.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidProfile(format!(
                    "player {i} probabilities sum to {sum}"
                )));
            }
        }
        Ok(MixedProfile { dist })
    }

    /// Builds a profile after checking it matches the game's shape.
    pub fn for_game(game: &StaticGame, dist: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self::new(dist)?;
        p.check_shape(game)?;
        Ok(p)
    }

    pub fn uniform(game: &StaticGame) -> Self {
        let dist = game
            .action_counts()
            .into_iter()
            .map(|k| vec![1.0 / k as f64; k])
            .collect();
        MixedProfile { dist }
    }

    /// Degenerate profile putting all mass on `actions[i]` for each player.
    pub fn pure(game: &StaticGame, actions: &[usize]) -> Result<Self> {
        let mut dist = Vec::with_capacity(game.num_players());
        for (i, &a) in actions.iter().enumerate() {
            game.check_action(i, a)?;
            let mut d = vec![0.0; game.num_actions(i)];
            d[a] = 1.0;
            dist.push(d);
        }
        let p = MixedProfile { dist };
        p.check_shape(game)?;
        Ok(p)
    }

    pub(crate) fn from_raw(dist: Vec<Vec<f64>>) -> Self {
        MixedProfile { dist }
    }

    pub fn check_shape(&self, game: &StaticGame) -> Result<()> {
        if self.dist.len() != game.num_players() {
            return Err(Error::InvalidProfile(format!(
                "profile covers {} players, game has {}",
                self.dist.len(),
                game.num_players()
            )));
        }
        for (i, d) in self.dist.iter().enumerate() {
            if d.len() != game.num_actions(i) {
                return Err(Error::InvalidProfile(format!(
                    "player {i} distribution has {} entries, expected {}",
                    d.len(),
                    game.num_actions(i)
                )));
            }
        }
        Ok(())
    }

    pub fn player(&self, i: usize) -> &[f64] {
        &self.dist[i]
    }

    pub fn as_slices(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.dist
    }

    /// Largest coordinatewise absolute difference.
    pub fn sup_distance(&self, other: &MixedProfile) -> f64 {
        self.dist
            .iter()
            .zip(&other.dist)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// `t·self + (1−t)·other`.
    pub fn mix(&self, other: &MixedProfile, t: f64) -> MixedProfile {
        let dist = self
            .dist
            .iter()
            .zip(&other.dist)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| t * x + (1.0 - t) * y)
                    .collect()
            })
            .collect();
        MixedProfile { dist }
    }
}

/// Extremes of `u_i(a', a_{-i}) − u_i(a, a_{-i})` over opponent profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffGap {
    pub upper: f64,
    pub lower: f64,
}

impl PayoffGap {
    pub fn spread(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Expected payoff of `a` for player `i` when opponents play independently
/// according to `profile` (player `i`'s own entry is ignored).
pub fn expected_payoff(
    game: &StaticGame,
    i: usize,
    a: usize,
    profile: &MixedProfile,
) -> Result<f64> {
    game.check_action(i, a)?;
    profile.check_shape(game)?;
    let w = game.opponent_weights(i, profile.as_slices());
    Ok(w.iter()
        .enumerate()
        .map(|(o, p)| p * game.own_payoff(i, a, o))
        .sum())
}

/// Expected payoffs of every action of player `i`.
pub fn expected_payoffs(game: &StaticGame, i: usize, profile: &MixedProfile) -> Result<Vec<f64>> {
    game.check_player(i)?;
    profile.check_shape(game)?;
    Ok(expected_payoffs_unchecked(game, i, profile.as_slices()))
}

pub(crate) fn expected_payoffs_unchecked(
    game: &StaticGame,
    i: usize,
    dist: &[Vec<f64>],
) -> Vec<f64> {
    let w = game.opponent_weights(i, dist);
    (0..game.num_actions(i))
        .map(|a| {
            w.iter()
                .enumerate()
                .map(|(o, p)| p * game.own_payoff(i, a, o))
                .sum()
        })
        .collect()
}

/// `u_i(a', o) − u_i(a, o)` for every opponent profile `o`.
pub fn payoff_differences(game: &StaticGame, i: usize, a: usize, a2: usize) -> Result<Vec<f64>> {
    game.check_action(i, a)?;
    game.check_action(i, a2)?;
    Ok((0..game.num_opponent_profiles(i))
        .map(|o| game.own_payoff(i, a2, o) - game.own_payoff(i, a, o))
        .collect())
}

pub fn payoff_gap(game: &StaticGame, i: usize, a: usize, a2: usize) -> Result<PayoffGap> {
    if a == a2 {
        return Err(Error::IdenticalActions(a));
    }
    let diffs = payoff_differences(game, i, a, a2)?;
    let upper = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lower = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PayoffGap { upper, lower })
}
