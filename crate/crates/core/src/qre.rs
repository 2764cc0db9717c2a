//! Structural quantal response equilibria.
//!
//! A QRE is a fixed point of the map sending a profile to every player's
//! quantal response against it. General games are handled by damped
//! iteration (optionally from many starts, without any completeness
//! guarantee). Two-by-two games are enumerated completely by reducing the
//! fixed point to the scalar equation `r = g₁(g₂(r))` in player 1's
//! first-action probability and bracketing every sign change.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::MixedProfile;
use crate::model::PopulationGame;
use crate::perturbation::{quantal_response, Integration};

/// Residual below which an enumerated root is reported as converged.
pub const ENUMERATION_TOL: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 4096;
const MAX_GRID: usize = 1 << 20;
const BISECTION_WIDTH: f64 = 1e-12;
const ROOT_DEDUP: f64 = 1e-9;
const MULTISTART_DEDUP: f64 = 1e-6;
pub const DEFAULT_STARTS: usize = 32;
const MIN_DAMPING: f64 = 1.0 / 1024.0;
const STALL_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct QreResult {
    pub profile: MixedProfile,
    /// Sup-norm of `π − qre_map(π)`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A finite list of equilibria and whether it is known to be the full set.
#[derive(Debug, Clone, PartialEq)]
pub struct QreSet {
    pub equilibria: Vec<QreResult>,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub integration: Integration,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            integration: Integration::Exact,
        }
    }
}

/// Per-action minimum of equilibrium probabilities over a set of QREs.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerEnvelope {
    pub value: Vec<Vec<f64>>,
}

/// Applies every player's quantal response to `profile`.
pub fn qre_map(
    pg: &PopulationGame,
    profile: &MixedProfile,
    integration: Integration,
) -> Result<MixedProfile> {
    let game = pg.game();
    profile.check_shape(game)?;
    let dist = (0..game.num_players())
        .map(|i| quantal_response(pg.dist(i), game, i, profile, integration))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixedProfile::from_raw(dist))
}

pub fn residual(
    pg: &PopulationGame,
    profile: &MixedProfile,
    integration: Integration,
) -> Result<f64> {
    Ok(profile.sup_distance(&qre_map(pg, profile, integration)?))
}

/// Damped fixed-point iteration `π ← (1−d)·π + d·qre_map(π)`, stopping once
/// the residual is at most `tol`. The damping starts at `opts.damping` and is
/// halved (down to a floor) whenever the residual stops improving. Hitting
/// `max_iter` is reported through `converged = false`, not as an error.
pub fn solve_fixed_point(
    pg: &PopulationGame,
    start: &MixedProfile,
    opts: &SolverOptions,
) -> Result<QreResult> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let mut pi = start.clone();
    pi.check_shape(pg.game())?;
    let mut iterations = 0;
    let mut damping = opts.damping;
    let mut best = f64::INFINITY;
    let mut stall = 0;
    loop {
        let image = qre_map(pg, &pi, opts.integration)?;
        let res = pi.sup_distance(&image);
        if res <= opts.tol || iterations >= opts.max_iter {
            return Ok(QreResult {
                profile: pi,
                residual: res,
                iterations,
                converged: res <= opts.tol,
            });
        }
        // No progress for a while means the step overshoots; shrink it.
        if res < best {
            best = res;
            stall = 0;
        } else {
            stall += 1;
            if stall >= STALL_WINDOW {
                damping = (0.5 * damping).max(MIN_DAMPING);
                stall = 0;
            }
        }
        pi = image.mix(&pi, damping);
        iterations += 1;
    }
}

/// Damped iteration from `starts` deterministic, well-spread starting points.
/// The returned set is never marked complete.
pub fn solve_multistart(
    pg: &PopulationGame,
    starts: usize,
    opts: &SolverOptions,
) -> Result<QreSet> {
    let game = pg.game();
    let counts = game.action_counts();
    let points: Vec<MixedProfile> = (0..starts.max(1))
        .map(|k| {
            if k == 0 {
                MixedProfile::uniform(game)
            } else {
                halton_profile(&counts, k)
            }
        })
        .collect();
    let solved = points
        .par_iter()
        .map(|s| solve_fixed_point(pg, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut equilibria: Vec<QreResult> = Vec::new();
    for r in solved.into_iter().filter(|r| r.converged) {
        if !equilibria
            .iter()
            .any(|e| e.profile.sup_distance(&r.profile) < MULTISTART_DEDUP)
        {
            equilibria.push(r);
        }
    }
    Ok(QreSet {
        equilibria,
        complete: false,
    })
}

/// Every QRE of a 2×2 game, found by scanning `r − g₁(g₂(r))` on a uniform
/// grid of `grid` cells and bisecting each sign change. The grid is doubled
/// while two roots sit within two cells of each other. Quantal responses are
/// always evaluated exactly here.
pub fn enumerate_qre_2x2(pg: &PopulationGame, grid: usize) -> Result<Vec<QreResult>> {
    let game = pg.game();
    if !game.is_two_by_two() {
        return Err(Error::Unsupported(
            "complete enumeration needs a two-player game with two actions each".into(),
        ));
    }
    if grid < 100 {
        return Err(Error::InvalidArgument(format!(
            "grid must be at least 100, got {grid}"
        )));
    }
    let respond = |i: usize, opp_first: f64| -> Result<Vec<f64>> {
        let mut dist = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        dist[1 - i] = vec![opp_first, 1.0 - opp_first];
        let profile = MixedProfile::from_raw(dist);
        quantal_response(pg.dist(i), game, i, &profile, Integration::Exact)
    };
    let scalar = |r: f64| -> Result<f64> {
        let s = respond(1, r)?[0];
        Ok(r - respond(0, s)?[0])
    };

    let mut cells = grid;
    let roots = loop {
        let mut roots = Vec::new();
        let mut prev_x = 0.0;
        let mut prev_f = scalar(0.0)?;
        if prev_f == 0.0 {
            roots.push(0.0);
        }
        for k in 1..=cells {
            let x = k as f64 / cells as f64;
            let fx = scalar(x)?;
            if fx == 0.0 {
                roots.push(x);
            } else if prev_f != 0.0 && (prev_f < 0.0) != (fx < 0.0) {
                roots.push(bisect(&scalar, prev_x, x, prev_f)?);
            }
            prev_x = x;
            prev_f = fx;
        }
        roots.dedup_by(|b, a| (*b - *a).abs() < ROOT_DEDUP);
        let crowded = roots.windows(2).any(|w| w[1] - w[0] < 2.0 / cells as f64);
        if !crowded || cells >= MAX_GRID {
            break roots;
        }
        cells *= 2;
    };

    roots
        .into_iter()
        .map(|r| {
            let p2 = respond(1, r)?;
            let profile = MixedProfile::from_raw(vec![vec![r, 1.0 - r], p2]);
            let res = residual(pg, &profile, Integration::Exact)?;
            Ok(QreResult {
                profile,
                residual: res,
                iterations: 0,
                converged: res <= ENUMERATION_TOL,
            })
        })
        .collect()
}

fn bisect<F>(f: &F, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Complete enumeration for 2×2 games, multistart iteration otherwise.
pub fn find_equilibria(pg: &PopulationGame, grid: usize, opts: &SolverOptions) -> Result<QreSet> {
    if pg.game().is_two_by_two() {
        Ok(QreSet {
            equilibria: enumerate_qre_2x2(pg, grid)?,
            complete: true,
        })
    } else {
        solve_multistart(pg, DEFAULT_STARTS, opts)
    }
}

pub fn lower_envelope(qres: &[QreResult]) -> Result<LowerEnvelope> {
    let (first, rest) = qres
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("lower envelope of an empty QRE set".into()))?;
    let mut value: Vec<Vec<f64>> = first.profile.as_slices().to_vec();
    for q in rest {
        for (row, other) in value.iter_mut().zip(q.profile.as_slices()) {
            for (v, p) in row.iter_mut().zip(other) {
                *v = v.min(*p);
            }
        }
    }
    Ok(LowerEnvelope { value })
}

/// `k`-th point of a Halton sequence, turned into one simplex point per
/// player by normalizing exponential spacings.
fn halton_profile(counts: &[usize], k: usize) -> MixedProfile {
    const PRIMES: [u64; 24] = [
        2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    ];
    let mut dim = 0;
    let dist = counts
        .iter()
        .map(|&n| {
            let raw: Vec<f64> = (0..n)
                .map(|_| {
                    let base = PRIMES[dim % PRIMES.len()];
                    dim += 1;
                    let u = radical_inverse(k as u64, base).max(1e-12);
                    -u.ln()
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect();
    MixedProfile::from_raw(dist)
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}
