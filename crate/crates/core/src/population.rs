//! Agent-level simulation: draw types, best-respond to a belief, tally.
//!
//! Within a round, agents are split into fixed-size chunks and each chunk
//! draws from its own ChaCha stream keyed by (round, player, chunk), so the
//! counts do not depend on how many threads run them.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{expected_payoffs, MixedProfile, StaticGame};
use crate::model::PopulationGame;
use crate::numfmt::fmt_sig;
use crate::perturbation::{argmax_perturbed, quantal_response, Integration};
use crate::rationalization::{
    check_distribution_with_slack, PlayerVerdict, ProcedureTrace, CHECK_TOL,
};

const CHUNK: usize = 8192;
const MAX_ROUNDS: usize = 1 << 24;
const MAX_PLAYERS: usize = 1 << 8;

/// Default number of standard errors allowed when comparing sampled
/// frequencies with bounds.
pub const DEFAULT_Z: f64 = 4.0;

/// Action maximizing `u_i(a, belief_{−i}) + θ_a`; ties go to the earliest action.
pub fn best_response(
    game: &StaticGame,
    i: usize,
    theta: &[f64],
    belief: &MixedProfile,
) -> Result<usize> {
    let u = expected_payoffs(game, i, belief)?;
    if theta.len() != u.len() {
        return Err(Error::ArityMismatch {
            expected: u.len(),
            found: theta.len(),
        });
    }
    Ok(argmax_perturbed(&u, theta))
}

#[derive(Debug, Clone, PartialEq)]
pub enum BeliefMode {
    /// Every round best-responds to the same profile.
    Fixed(MixedProfile),
    /// Round `r` best-responds to round `r − 1`'s frequencies.
    EmpiricalLag { initial: MixedProfile },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub agents_per_round: usize,
    pub rounds: usize,
    pub seed: u64,
    pub belief_mode: BeliefMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub belief: MixedProfile,
    pub counts: Vec<Vec<u64>>,
    pub frequencies: MixedProfile,
    /// Frequencies pooled over this and all earlier rounds.
    pub cumulative: MixedProfile,
    /// Exact quantal response to `belief`.
    pub analytic: MixedProfile,
}

impl RoundRecord {
    /// Largest `|frequency − analytic|` for player `i`.
    pub fn deviation(&self, i: usize) -> f64 {
        self.frequencies
            .player(i)
            .iter()
            .zip(self.analytic.player(i))
            .map(|(f, a)| (f - a).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub agents_per_round: usize,
    pub rounds: Vec<RoundRecord>,
}

impl SimulationTrace {
    pub fn last(&self) -> &RoundRecord {
        self.rounds.last().expect("a trace has at least one round")
    }

    /// Round average of the empirical frequencies over rounds `..=r`.
    pub fn cumulative(&self, r: usize) -> &MixedProfile {
        &self.rounds[r].cumulative
    }

    /// Writes `round,player,action,frequency,analytic_frequency,deviation`
    /// rows, rounds numbered from 1.
    pub fn write_csv<W: Write>(&self, game: &StaticGame, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record([
            "round",
            "player",
            "action",
            "frequency",
            "analytic_frequency",
            "deviation",
        ])?;
        for (r, rec) in self.rounds.iter().enumerate() {
            for i in 0..game.num_players() {
                for (a, name) in game.actions(i).iter().enumerate() {
                    let f = rec.frequencies.player(i)[a];
                    let p = rec.analytic.player(i)[a];
                    w.write_record([
                        (r + 1).to_string(),
                        game.player_name(i).to_string(),
                        name.clone(),
                        fmt_sig(f),
                        fmt_sig(p),
                        fmt_sig(f - p),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn stream_id(round: usize, player: usize, chunk: usize) -> u64 {
    ((round as u64) << 40) | ((player as u64) << 32) | chunk as u64
}

fn tally(
    pg: &PopulationGame,
    i: usize,
    utilities: &[f64],
    n: usize,
    seed: u64,
    round: usize,
) -> Vec<u64> {
    let k = utilities.len();
    let dist = pg.dist(i);
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_id(round, i, c));
            let size = CHUNK.min(n - c * CHUNK);
            let mut counts = vec![0u64; k];
            for _ in 0..size {
                let theta = dist.sample(k, &mut rng);
                counts[argmax_perturbed(utilities, &theta)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn frequencies(counts: &[Vec<u64>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|c| {
            let total: u64 = c.iter().sum();
            c.iter().map(|&x| x as f64 / total as f64).collect()
        })
        .collect()
}

/// Runs `rounds` rounds of `agents_per_round` fresh agents per population.
/// The result depends only on the inputs, not on the thread count.
pub fn simulate(pg: &PopulationGame, config: &SimulationConfig) -> Result<SimulationTrace> {
    let game = pg.game();
    if config.agents_per_round == 0 || config.rounds == 0 {
        return Err(Error::InvalidArgument(
            "agents per round and rounds must be at least 1".into(),
        ));
    }
    if config.rounds > MAX_ROUNDS
        || game.num_players() > MAX_PLAYERS
        || config.agents_per_round / CHUNK >= 1 << 32
    {
        return Err(Error::Unsupported(
            "simulation size exceeds the stream layout".into(),
        ));
    }
    let mut belief = match &config.belief_mode {
        BeliefMode::Fixed(p) | BeliefMode::EmpiricalLag { initial: p } => p.clone(),
    };
    belief.check_shape(game)?;
    let n = config.agents_per_round;
    let mut pooled: Vec<Vec<u64>> = game
        .action_counts()
        .into_iter()
        .map(|k| vec![0; k])
        .collect();
    let mut rounds = Vec::with_capacity(config.rounds);
    for r in 0..config.rounds {
        let mut counts = Vec::with_capacity(game.num_players());
        let mut analytic = Vec::with_capacity(game.num_players());
        for i in 0..game.num_players() {
            let u = expected_payoffs(game, i, &belief)?;
            counts.push(tally(pg, i, &u, n, config.seed, r));
            analytic.push(quantal_response(
                pg.dist(i),
                game,
                i,
                &belief,
                Integration::Exact,
            )?);
        }
        for (p, c) in pooled.iter_mut().zip(&counts) {
            p.iter_mut().zip(c).for_each(|(x, y)| *x += y);
        }
        let freq = MixedProfile::new(frequencies(&counts))?;
        let next = match config.belief_mode {
            BeliefMode::Fixed(_) => belief.clone(),
            BeliefMode::EmpiricalLag { .. } => freq.clone(),
        };
        rounds.push(RoundRecord {
            belief,
            cumulative: MixedProfile::new(frequencies(&pooled))?,
            frequencies: freq,
            counts,
            analytic: MixedProfile::new(analytic)?,
        });
        belief = next;
    }
    Ok(SimulationTrace {
        agents_per_round: n,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundCheck {
    /// 1-based round number.
    pub round: usize,
    pub pass: bool,
    pub verdicts: Vec<PlayerVerdict>,
}

/// Checks each round's cumulative frequencies against the limit bounds of
/// `proc`, allowing `z` binomial standard errors of slack per action.
pub fn test_observed(
    trace: &SimulationTrace,
    proc: &ProcedureTrace,
    z: f64,
) -> Result<Vec<RoundCheck>> {
    let bounds = proc.limit();
    trace
        .rounds
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            let pooled = ((r + 1) * trace.agents_per_round) as f64;
            let verdicts = check_distribution_with_slack(&rec.cumulative, bounds, |i, a| {
                let q = bounds.get(i, a);
                z * (q * (1.0 - q) / pooled).sqrt() + CHECK_TOL
            })?;
            Ok(RoundCheck {
                round: r + 1,
                pass: verdicts.iter().all(|v| v.pass),
                verdicts,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::perturbation::TypeDistribution;
    use crate::rationalization::{run_procedure, ProcedureOptions};

    fn mp_uniform() -> PopulationGame {
        PopulationGame::with_common(
            fixtures::matching_pennies(),
            TypeDistribution::uniform_box(-2.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    fn vaccination() -> PopulationGame {
        PopulationGame::with_common(
            fixtures::vaccination(),
            TypeDistribution::extreme_value(0.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn best_response_examples() {
        let mp = fixtures::matching_pennies();
        let half = MixedProfile::uniform(&mp);
        assert_eq!(best_response(&mp, 0, &[2.0, -2.0], &half).unwrap(), 0);
        assert_eq!(best_response(&mp, 0, &[0.0, 0.0], &half).unwrap(), 0);
        assert_eq!(best_response(&mp, 0, &[0.0, 0.1], &half).unwrap(), 1);
        let vac = fixtures::vaccination();
        assert_eq!(
            best_response(&vac, 0, &[0.0, 0.0], &MixedProfile::uniform(&vac)).unwrap(),
            0
        );
        assert!(best_response(&vac, 0, &[0.0], &MixedProfile::uniform(&vac)).is_err());
    }

    #[test]
    fn fixed_belief_matches_the_closed_form() {
        let pg = mp_uniform();
        let cfg = SimulationConfig {
            agents_per_round: 1_000_000,
            rounds: 1,
            seed: 11,
            belief_mode: BeliefMode::Fixed(MixedProfile::uniform(pg.game())),
        };
        let t = simulate(&pg, &cfg).unwrap();
        for i in 0..2 {
            assert!(t.last().deviation(i) < 0.002);
        }
        let pg = vaccination();
        let cfg = SimulationConfig {
            agents_per_round: 100_000,
            ..cfg
        };
        let t = simulate(
            &pg,
            &SimulationConfig {
                belief_mode: BeliefMode::Fixed(MixedProfile::uniform(pg.game())),
                ..cfg
            },
        )
        .unwrap();
        for i in 0..2 {
            assert!(t.last().deviation(i) < 0.005);
        }
    }

    #[test]
    fn single_agent_is_a_point_mass() {
        let pg = vaccination();
        let cfg = SimulationConfig {
            agents_per_round: 1,
            rounds: 1,
            seed: 3,
            belief_mode: BeliefMode::Fixed(MixedProfile::uniform(pg.game())),
        };
        let t = simulate(&pg, &cfg).unwrap();
        for i in 0..2 {
            let f = t.last().frequencies.player(i);
            assert!(f.iter().all(|&x| x == 0.0 || x == 1.0));
            assert_eq!(f.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn deterministic_and_csv_shape() {
        let pg = vaccination();
        let cfg = SimulationConfig {
            agents_per_round: 20_000,
            rounds: 3,
            seed: 99,
            belief_mode: BeliefMode::EmpiricalLag {
                initial: MixedProfile::uniform(pg.game()),
            },
        };
        let a = simulate(&pg, &cfg).unwrap();
        let b = simulate(&pg, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(
            &pg,
            &SimulationConfig {
                seed: 100,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(a.rounds[0].counts, c.rounds[0].counts);
        assert_eq!(a.rounds[1].belief, a.rounds[0].frequencies);
        let mut buf = Vec::new();
        a.write_csv(pg.game(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("round,player,action,frequency,analytic_frequency,deviation\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 4);
    }

    #[test]
    fn rejects_bad_configs() {
        let pg = vaccination();
        let cfg = SimulationConfig {
            agents_per_round: 0,
            rounds: 1,
            seed: 0,
            belief_mode: BeliefMode::Fixed(MixedProfile::uniform(pg.game())),
        };
        assert!(simulate(&pg, &cfg).is_err());
        let wrong = MixedProfile::new(vec![vec![1.0]]).unwrap();
        let cfg = SimulationConfig {
            agents_per_round: 1,
            belief_mode: BeliefMode::Fixed(wrong),
            ..cfg
        };
        assert!(simulate(&pg, &cfg).is_err());
    }

    #[test]
    fn observed_checks() {
        let pg = vaccination();
        let proc = run_procedure(&pg, &ProcedureOptions::default()).unwrap();
        let qre = MixedProfile::new(vec![
            vec![0.396_242_033_073_858_3, 0.603_757_966_926_141_7],
            vec![0.968_459_272_573_812_8, 0.031_540_727_426_187_2],
        ])
        .unwrap();
        let cfg = SimulationConfig {
            agents_per_round: 100_000,
            rounds: 1,
            seed: 5,
            belief_mode: BeliefMode::Fixed(qre),
        };
        let trace = simulate(&pg, &cfg).unwrap();
        assert!(test_observed(&trace, &proc, DEFAULT_Z)
            .unwrap()
            .iter()
            .all(|r| r.pass));

        let mut bad = trace.clone();
        let point = MixedProfile::new(vec![
            vec![0.0, 1.0],
            bad.rounds[0].cumulative.player(1).to_vec(),
        ])
        .unwrap();
        bad.rounds[0].cumulative = point;
        let checks = test_observed(&bad, &proc, DEFAULT_Z).unwrap();
        assert!(!checks[0].pass && !checks[0].verdicts[0].pass);
        assert_eq!(checks[0].verdicts[0].binding_action, 0);

        let mut vacuous = proc.clone();
        vacuous.steps.truncate(1);
        assert!(test_observed(&bad, &vacuous, DEFAULT_Z).unwrap()[0].pass);
    }
}
