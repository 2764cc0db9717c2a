//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the terminal.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qrat::gamefile;
use qrat::perturbation::quantal_response;
use qrat::qre::{enumerate_qre_2x2, lower_envelope, DEFAULT_GRID};
use qrat::rationalization::{run_procedure, step_bounds, BoundsVector, ProcedureOptions};
use qrat::structure::{
    classify, phi, prop3_check, theorem2_report, Prop3Outcome, TightnessReason, Verdict,
};
use qrat::{Integration, MixedProfile, PopulationGame, StaticGame, TypeDistribution};

use common::{random_bimatrix, random_logit_2x2};

fn fixture(name: &str) -> PopulationGame {
    gamefile::load(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR")))
        .expect("bundled fixture parses")
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let pg = fixture("matching_pennies_uniform.json");
    let opts = ProcedureOptions {
        tol: 1e-300,
        max_iter: 500,
        ..Default::default()
    };
    let trace = run_procedure(&pg, &opts).map_err(|e| e.to_string())?;
    let first = trace.steps[1]
        .as_slices()
        .iter()
        .flatten()
        .map(|q| (q - 9.0 / 32.0).abs())
        .fold(0.0, f64::max);
    let mut recurrence: f64 = 0.0;
    for n in 0..50.min(trace.num_steps()) {
        for (now, next) in trace.steps[n]
            .as_slices()
            .iter()
            .flatten()
            .zip(trace.steps[n + 1].as_slices().iter().flatten())
        {
            recurrence = recurrence.max((next - (3.0 + 2.0 * now).powi(2) / 32.0).abs());
        }
    }
    let limit = trace
        .limit()
        .as_slices()
        .iter()
        .flatten()
        .map(|q| (q - 0.5).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    check(
        first <= 1e-12 && recurrence <= 1e-12 && limit <= 1e-6 && trace.num_steps() <= 500 && elapsed < 1.0,
        format!(
            "|q1 - 9/32| = {first:.1e}, recurrence error {recurrence:.1e} over {} steps, |q* - 1/2| = {limit:.1e}, {:.3} s",
            50.min(trace.num_steps()),
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let pg = fixture("vaccination.json");
    let qres = enumerate_qre_2x2(&pg, DEFAULT_GRID).map_err(|e| e.to_string())?;
    if qres.len() != 1 {
        return Err(format!("expected one QRE, found {}", qres.len()));
    }
    let trace = run_procedure(&pg, &ProcedureOptions::default()).map_err(|e| e.to_string())?;
    let gap = trace
        .limit()
        .as_slices()
        .iter()
        .flatten()
        .zip(qres[0].profile.as_slices().iter().flatten())
        .map(|(q, p)| (q - p).abs())
        .fold(0.0, f64::max);
    let report = theorem2_report(&pg, DEFAULT_GRID).map_err(|e| e.to_string())?;
    let tight = report
        .verdicts
        .iter()
        .all(|(_, v)| *v == Verdict::GuaranteedTight(TightnessReason::C2));
    let elapsed = start.elapsed().as_secs_f64();
    check(
        gap <= 1e-4 && tight && elapsed < 5.0,
        format!("one QRE, max |q* - pi*| = {gap:.1e}, all four actions tight via C2: {tight}, {elapsed:.3} s"),
    )
}

fn criterion_3() -> Outcome {
    let pg = fixture("asym_mp_gumbel5.json");
    let one = step_bounds(&pg, &BoundsVector::zeros(pg.game()), Integration::Exact)
        .map_err(|e| e.to_string())?;
    let err = (one.get(0, 0) - 1.0 / (1.0 + 5f64.exp())).abs();
    let trace = run_procedure(&pg, &ProcedureOptions::default()).map_err(|e| e.to_string())?;
    let limit = trace.limit();
    let sums: Vec<f64> = (0..2).map(|i| limit.player_sum(i)).collect();
    let largest = limit
        .as_slices()
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    check(
        err <= 1e-9 && sums.iter().all(|&s| s <= 0.99) && largest < 0.05,
        format!(
            "|q1_(1,H) - 1/(1+e^5)| = {err:.1e}, bound sums {:.4} and {:.4}, largest q* {largest:.4}",
            sums[0], sums[1]
        ),
    )
}

fn random_logit_games() -> Vec<PopulationGame> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..20)
        .map(|_| random_logit_2x2(&mut rng, 0.1, 2.0))
        .collect()
}

fn criterion_4() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for pg in random_logit_games() {
        let trace = run_procedure(&pg, &ProcedureOptions::default()).map_err(|e| e.to_string())?;
        for q in enumerate_qre_2x2(&pg, DEFAULT_GRID).map_err(|e| e.to_string())? {
            worst = worst.min(trace.dominance_margin(&q.profile));
            count += 1;
        }
    }
    check(
        worst >= -1e-9,
        format!("{count} QREs over 20 games, smallest pi - q^n = {worst:.3e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut games = random_logit_games();
    games.extend(
        [
            "matching_pennies_uniform.json",
            "vaccination.json",
            "asym_mp_gumbel5.json",
        ]
        .map(fixture),
    );
    let mut worst: f64 = 0.0;
    for pg in &games {
        let trace = run_procedure(pg, &ProcedureOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.min(trace.worst_decrease);
    }
    check(
        worst >= -1e-12,
        format!(
            "{} traces, largest decrease {:.1e}",
            games.len(),
            (-worst).max(0.0)
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pairs = 0;
    let mut empty = 0;
    for k in 0..500 {
        let (r, c) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let g = random_bimatrix(&mut rng, r, c, k % 2 == 0);
        for i in 0..2 {
            let n = g.num_actions(i);
            let m = g.num_opponent_profiles(i);
            for a in 0..n {
                for b in a + 1..n {
                    let f = phi(&g, i, a, b).unwrap();
                    let h = phi(&g, i, b, a).unwrap();
                    pairs += 1;
                    if f.is_empty() && h.is_empty() {
                        empty += 1;
                        continue;
                    }
                    let mut union: Vec<usize> = f.into_iter().chain(h).collect();
                    union.sort_unstable();
                    union.dedup();
                    if union.len() != m {
                        return Err(format!(
                            "game {k}, player {i}, actions ({a}, {b}): union covers {} of {m}",
                            union.len()
                        ));
                    }
                }
            }
        }
    }
    Ok(format!(
        "500 games, {pairs} action pairs ({empty} with both sets empty)"
    ))
}

fn random_serial_game(rng: &mut ChaCha8Rng) -> StaticGame {
    loop {
        let (r, c) = (rng.gen_range(3..=5), rng.gen_range(2..=5));
        let g = random_bimatrix(rng, r, c, false);
        if classify(&g).unwrap().serial {
            return g;
        }
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..200 {
        let g = random_serial_game(&mut rng);
        match prop3_check(&g).map_err(|e| e.to_string())? {
            Prop3Outcome::Holds => {}
            other => return Err(format!("game {k}: {other:?}")),
        }
    }
    Ok("200 serial games, no action satisfies C2".into())
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut c2_count = 0;
    for k in 0..500 {
        let g = random_bimatrix(&mut rng, 2, 2, k % 2 == 0);
        let class = classify(&g).unwrap();
        for c in &class.nodes {
            let reach_based = !c.c1 && c.c2_prime;
            if c.c2 != reach_based {
                return Err(format!(
                    "game {k}, node {:?}: C2 {} but reachability criterion {}",
                    c.node, c.c2, reach_based
                ));
            }
            c2_count += usize::from(c.c2);
        }
    }
    Ok(format!("500 games, 2000 actions, {c2_count} satisfy C2"))
}

fn random_profile(rng: &mut ChaCha8Rng, game: &StaticGame) -> MixedProfile {
    let dist = game
        .action_counts()
        .into_iter()
        .map(|k| {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
        .collect();
    MixedProfile::new(dist).unwrap()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cases: Vec<(StaticGame, TypeDistribution, MixedProfile, u64)> = (0..20)
        .map(|_| {
            let (r, c) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
            let g = random_bimatrix(&mut rng, r, c, false);
            let d = TypeDistribution::extreme_value(rng.gen_range(0.1..2.0)).unwrap();
            let p = random_profile(&mut rng, &g);
            (g, d, p, rng.gen())
        })
        .collect();
    let results: Vec<(f64, bool)> = cases
        .par_iter()
        .map(|(g, d, p, seed)| {
            let deviation = |seed: u64| -> f64 {
                (0..2)
                    .map(|i| {
                        let exact = quantal_response(d, g, i, p, Integration::Exact).unwrap();
                        let mc = Integration::MonteCarlo {
                            samples: 1_000_000,
                            seed: seed ^ i as u64,
                        };
                        let tally = quantal_response(d, g, i, p, mc).unwrap();
                        exact
                            .iter()
                            .zip(&tally)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            };
            let first = deviation(*seed);
            if first <= 0.005 {
                (first, false)
            } else {
                (deviation(seed.wrapping_add(0x5EED)), true)
            }
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let retries = results.iter().filter(|r| r.1).count();
    check(
        worst <= 0.005,
        format!("20 games, max deviation {worst:.2e}, {retries} reseeded retries"),
    )
}

/// Coordination variants plus random 2×2 games.
fn criterion_10_games() -> Vec<PopulationGame> {
    let base = fixture("coordination_2x2.json");
    let mut games = vec![base.clone()];
    for lambda in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 20.0] {
        games.push(
            PopulationGame::with_common(
                base.game().clone(),
                TypeDistribution::extreme_value(lambda).unwrap(),
            )
            .unwrap(),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        // Unequal coordination payoffs with a mild miscoordination payoff.
        let m = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            vec![
                vec![rng.gen_range(0.5..2.0), rng.gen_range(-0.3..0.3)],
                vec![rng.gen_range(-0.3..0.3), rng.gen_range(0.5..2.0)],
            ]
        };
        let (u1, u2) = (m(&mut rng), m(&mut rng));
        let g = StaticGame::bimatrix(&["A", "B"], &["A", "B"], &u1, &u2).unwrap();
        let d = TypeDistribution::extreme_value(rng.gen_range(2.0..20.0)).unwrap();
        games.push(PopulationGame::with_common(g, d).unwrap());
    }
    for k in 0..1000 {
        let g = random_bimatrix(&mut rng, 2, 2, k % 2 == 0);
        let d = TypeDistribution::extreme_value(rng.gen_range(0.1..10.0)).unwrap();
        games.push(PopulationGame::with_common(g, d).unwrap());
    }
    games
}

fn criterion_10() -> Outcome {
    let games = criterion_10_games();
    let results: Vec<(bool, bool, usize)> = games
        .par_iter()
        .map(|pg| {
            let qres = enumerate_qre_2x2(pg, DEFAULT_GRID).unwrap();
            let class = classify(pg.game()).unwrap();
            let uncovered = class.nodes.iter().any(|c| !c.c1 && !c.c2);
            if qres.len() < 2 || !uncovered {
                return (qres.len() >= 2, false, 0);
            }
            let env = lower_envelope(&qres).unwrap();
            let trace = run_procedure(pg, &ProcedureOptions::default()).unwrap();
            let violations = trace
                .limit()
                .as_slices()
                .iter()
                .flatten()
                .zip(env.value.iter().flatten())
                .filter(|(q, e)| **q > **e - 1e-6)
                .count();
            (true, true, violations)
        })
        .collect();
    let multi = results.iter().filter(|r| r.0).count();
    let triggered = results.iter().filter(|r| r.1).count();
    let violations: usize = results.iter().map(|r| r.2).sum();
    check(
        triggered >= 1 && violations == 0,
        format!(
            "{} games, {multi} with at least two QREs, {triggered} where some action meets neither C1 nor C2, {violations} violations",
            games.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("matching pennies bound trace", criterion_1),
        ("vaccination tightness", criterion_2),
        ("asymmetric matching pennies looseness", criterion_3),
        ("QREs dominate every bound step", criterion_4),
        ("bound traces are non-decreasing", criterion_5),
        ("phi partition", criterion_6),
        (
            "no C2 action in serial games with a 3+ action player",
            criterion_7,
        ),
        ("C2 matches the reachability criterion", criterion_8),
        ("closed-form vs Monte Carlo quantal response", criterion_9),
        ("multiple QREs force strictly loose bounds", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", k + 1)
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
