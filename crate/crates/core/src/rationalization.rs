//! Iterated elimination of type–action pairs under beliefs consistent with
//! the type distributions, tracked through per-action probability floors.
//!
//! At step `n` every population `j` is known to play `a_j` with probability
//! at least `q[j][a_j]`. A type `θ_i` is forced onto `a_i` at step `n + 1`
//! when `a_i` beats every rival `a'_i` under *every* feasible belief, i.e.
//! `θ_{i,a_i} − θ_{i,a'_i}` is at least the largest expected payoff gain of
//! `a'_i` over `a_i` that any opponent mixture respecting the floors can
//! produce. The mass of that forced region is the new floor.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{payoff_differences, MixedProfile, StaticGame, SIMPLEX_TOL};
use crate::model::PopulationGame;
use crate::numfmt::fmt_sig;
use crate::perturbation::{ForcedRegionSpec, Integration};

/// Slack allowed when testing an observed distribution against floors.
pub const CHECK_TOL: f64 = 1e-9;
/// Allowed decrease of a floor between consecutive steps.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Per-(player, action) lower bounds on action probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsVector {
    q: Vec<Vec<f64>>,
}

impl BoundsVector {
    pub fn zeros(game: &StaticGame) -> Self {
        BoundsVector {
            q: game
                .action_counts()
                .into_iter()
                .map(|k| vec![0.0; k])
                .collect(),
        }
    }

    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        for (player, row) in q.iter().enumerate() {
            if row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidArgument(format!(
                    "bounds of player {player} must lie in [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if sum > 1.0 + SIMPLEX_TOL {
                return Err(Error::InvalidBounds { player, sum });
            }
        }
        Ok(BoundsVector { q })
    }

    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.q[i][a]
    }

    pub fn player(&self, i: usize) -> &[f64] {
        &self.q[i]
    }

    pub fn as_slices(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn player_sum(&self, i: usize) -> f64 {
        self.q[i].iter().sum()
    }

    /// Largest probability of `a` compatible with the floors of the other actions.
    pub fn upper(&self, i: usize, a: usize) -> f64 {
        let others: f64 = self.q[i]
            .iter()
            .enumerate()
            .filter(|(b, _)| *b != a)
            .map(|(_, x)| x)
            .sum();
        (1.0 - others).max(0.0)
    }

    pub fn sup_distance(&self, other: &BoundsVector) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    fn check_shape(&self, game: &StaticGame) -> Result<()> {
        let ok = self.q.len() == game.num_players()
            && self
                .q
                .iter()
                .enumerate()
                .all(|(i, r)| r.len() == game.num_actions(i));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "bounds do not match the game's shape".into(),
            ))
        }
    }

    fn check_sums(&self) -> Result<()> {
        for (player, row) in self.q.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum > 1.0 + SIMPLEX_TOL {
                return Err(Error::InvalidBounds { player, sum });
            }
        }
        Ok(())
    }
}

/// Sequence of floors produced by the procedure; `steps[0]` is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureTrace {
    pub steps: Vec<BoundsVector>,
    pub converged: bool,
    /// Sup-norm change of the last step taken.
    pub sup_step: f64,
    /// Most negative coordinate change seen over the whole run (0 if none).
    pub worst_decrease: f64,
}

impl ProcedureTrace {
    pub fn limit(&self) -> &BoundsVector {
        self.steps.last().expect("trace always holds step 0")
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_monotone(&self) -> bool {
        self.worst_decrease >= -MONOTONE_TOL
    }

    /// Smallest `π_i(a) − qⁿ_{i,a}` over all steps and actions. A QRE must
    /// keep this non-negative.
    pub fn dominance_margin(&self, profile: &MixedProfile) -> f64 {
        self.steps
            .iter()
            .flat_map(|b| {
                b.q.iter()
                    .zip(profile.as_slices())
                    .flat_map(|(q, p)| q.iter().zip(p).map(|(q, p)| p - q))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Writes `step,player,action,bound` rows.
    pub fn write_csv<W: Write>(&self, game: &StaticGame, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["step", "player", "action", "bound"])?;
        for (n, b) in self.steps.iter().enumerate() {
            for i in 0..game.num_players() {
                for (a, name) in game.actions(i).iter().enumerate() {
                    w.write_record([
                        n.to_string(),
                        game.player_name(i).to_string(),
                        name.clone(),
                        fmt_sig(b.get(i, a)),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub integration: Integration,
}

impl Default for ProcedureOptions {
    fn default() -> Self {
        ProcedureOptions {
            tol: 1e-9,
            max_iter: 5_000,
            integration: Integration::Exact,
        }
    }
}

/// Largest expected gain of `rival` over `base` for player `i` across all
/// independent opponent mixtures that respect `bounds`.
pub fn worst_case_threshold(
    game: &StaticGame,
    i: usize,
    base: usize,
    rival: usize,
    bounds: &BoundsVector,
) -> Result<f64> {
    if base == rival {
        return Err(Error::IdenticalActions(base));
    }
    bounds.check_shape(game)?;
    bounds.check_sums()?;
    let coeffs = payoff_differences(game, i, base, rival)?;
    if game.num_players() == 2 {
        Ok(greedy_max(&coeffs, bounds.player(1 - i)))
    } else {
        Ok(vertex_max(game, i, &coeffs, bounds))
    }
}

/// Linear objective over `{x ≥ floor, Σx = 1}`: pay every floor, then put
/// the leftover mass on the largest coefficient.
fn greedy_max(coeffs: &[f64], floor: &[f64]) -> f64 {
    let leftover = (1.0 - floor.iter().sum::<f64>()).max(0.0);
    let paid: f64 = coeffs.iter().zip(floor).map(|(c, q)| c * q).sum();
    let best = coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    paid + leftover * best
}

/// Multilinear objective over a product of truncated simplices; the maximum
/// sits at a product of vertices, where each opponent's vertex is its floor
/// vector plus all leftover mass on one action.
fn vertex_max(game: &StaticGame, i: usize, coeffs: &[f64], bounds: &BoundsVector) -> f64 {
    let opponents: Vec<usize> = (0..game.num_players()).filter(|&j| j != i).collect();
    let vertices = |j: usize| -> Vec<Vec<f64>> {
        let floor = bounds.player(j);
        let leftover = (1.0 - floor.iter().sum::<f64>()).max(0.0);
        (0..floor.len())
            .map(|k| {
                let mut v = floor.to_vec();
                v[k] += leftover;
                v
            })
            .collect()
    };
    let per_opponent: Vec<Vec<Vec<f64>>> = opponents.iter().map(|&j| vertices(j)).collect();
    let mut choice = vec![0usize; opponents.len()];
    let mut dist: Vec<Vec<f64>> = bounds.as_slices().to_vec();
    let mut best = f64::NEG_INFINITY;
    loop {
        for (slot, &j) in opponents.iter().enumerate() {
            dist[j].clone_from(&per_opponent[slot][choice[slot]]);
        }
        let w = game.opponent_weights(i, &dist);
        let value: f64 = w.iter().zip(coeffs).map(|(w, c)| w * c).sum();
        best = best.max(value);
        // Odometer over vertex choices.
        let mut slot = 0;
        loop {
            if slot == choice.len() {
                return best;
            }
            choice[slot] += 1;
            if choice[slot] < per_opponent[slot].len() {
                break;
            }
            choice[slot] = 0;
            slot += 1;
        }
    }
}

/// One round of the procedure: new floors from the current ones.
pub fn step_bounds(
    pg: &PopulationGame,
    bounds: &BoundsVector,
    integration: Integration,
) -> Result<BoundsVector> {
    let game = pg.game();
    bounds.check_shape(game)?;
    bounds.check_sums()?;
    let pairs: Vec<(usize, usize)> = (0..game.num_players())
        .flat_map(|i| (0..game.num_actions(i)).map(move |a| (i, a)))
        .collect();
    let values = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(i, a))| {
            let thresholds = (0..game.num_actions(i))
                .map(|b| {
                    if b == a {
                        Ok(f64::NEG_INFINITY)
                    } else {
                        worst_case_threshold(game, i, a, b, bounds)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let spec = ForcedRegionSpec::new(a, thresholds)?;
            Ok(pg
                .dist(i)
                .forced_region_probability(&spec, integration.salted(k as u64))?
                .value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut q = BoundsVector::zeros(game).q;
    for (&(i, a), v) in pairs.iter().zip(values) {
        q[i][a] = v;
    }
    Ok(BoundsVector { q })
}

/// Iterates [`step_bounds`] from all-zero floors until the sup-norm change
/// drops below `tol` or `max_iter` steps have run. With exact integration a
/// floor that decreases by more than [`MONOTONE_TOL`] is an error.
pub fn run_procedure(pg: &PopulationGame, opts: &ProcedureOptions) -> Result<ProcedureTrace> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let game = pg.game();
    let mut steps = vec![BoundsVector::zeros(game)];
    let mut worst_decrease: f64 = 0.0;
    let mut sup_step = f64::INFINITY;
    let mut converged = false;
    while steps.len() <= opts.max_iter {
        let n = steps.len();
        let prev = &steps[n - 1];
        let next = step_bounds(pg, prev, opts.integration.salted(n as u64))?;
        for (i, (old, new)) in prev.q.iter().zip(&next.q).enumerate() {
            for (a, (x, y)) in old.iter().zip(new).enumerate() {
                let change = y - x;
                if change < worst_decrease {
                    worst_decrease = change;
                }
                if change < -MONOTONE_TOL && opts.integration == Integration::Exact {
                    return Err(Error::NotMonotone {
                        step: n,
                        player: i,
                        action: a,
                        decrease: -change,
                    });
                }
            }
        }
        sup_step = prev.sup_distance(&next);
        steps.push(next);
        if sup_step < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(ProcedureTrace {
        steps,
        converged,
        sup_step,
        worst_decrease,
    })
}

/// For a two-action player, the exact set of marginals compatible with the
/// floors: `[q_a, 1 − q_{a'}]` for each action `a`.
pub fn rationalizable_interval(bounds: &BoundsVector, i: usize) -> Result<Vec<(f64, f64)>> {
    let row = bounds.q.get(i).ok_or(Error::UnknownPlayer(i))?;
    if row.len() != 2 {
        return Err(Error::Unsupported(format!(
            "interval form needs two actions, player {i} has {}",
            row.len()
        )));
    }
    Ok((0..2).map(|a| (row[a], 1.0 - row[1 - a])).collect())
}

/// Whether a per-player verdict is a full membership test or only a
/// necessary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Exact,
    NecessaryOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerVerdict {
    pub player: usize,
    pub pass: bool,
    pub membership: Membership,
    /// Action with the smallest margin `observed − bound`.
    pub binding_action: usize,
    pub bound: f64,
    pub observed: f64,
}

/// Tests `observed` against the floors with slack [`CHECK_TOL`].
pub fn check_distribution(
    observed: &MixedProfile,
    bounds: &BoundsVector,
) -> Result<Vec<PlayerVerdict>> {
    check_distribution_with_slack(observed, bounds, |_, _| CHECK_TOL)
}

/// Like [`check_distribution`] with a caller-chosen slack per (player, action).
pub fn check_distribution_with_slack<F>(
    observed: &MixedProfile,
    bounds: &BoundsVector,
    slack: F,
) -> Result<Vec<PlayerVerdict>>
where
    F: Fn(usize, usize) -> f64,
{
    let shape_ok = observed.as_slices().len() == bounds.q.len()
        && observed
            .as_slices()
            .iter()
            .zip(&bounds.q)
            .all(|(p, q)| p.len() == q.len());
    if !shape_ok {
        return Err(Error::InvalidArgument(
            "observed distribution does not match the bounds' shape".into(),
        ));
    }
    Ok(bounds
        .q
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let p = observed.player(i);
            let mut pass = true;
            let mut binding = 0;
            let mut margin = f64::INFINITY;
            for a in 0..q.len() {
                let m = p[a] - q[a];
                if m < -slack(i, a) {
                    pass = false;
                }
                if m < margin {
                    margin = m;
                    binding = a;
                }
            }
            PlayerVerdict {
                player: i,
                pass,
                membership: if q.len() == 2 {
                    Membership::Exact
                } else {
                    Membership::NecessaryOnly
                },
                binding_action: binding,
                bound: q[binding],
                observed: p[binding],
            }
        })
        .collect())
}
