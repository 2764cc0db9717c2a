//! Random game generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qrat::{PopulationGame, StaticGame, TypeDistribution};

pub fn names(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|a| format!("{prefix}{a}")).collect()
}

/// Two-player game with the given action counts. Payoffs are uniform on
/// [-5, 5], or small integers when `integer` is set so that ties and
/// constant payoff differences show up.
pub fn random_bimatrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    integer: bool,
) -> StaticGame {
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if integer {
            rng.gen_range(-2i32..=2) as f64
        } else {
            rng.gen_range(-5.0..5.0)
        }
    };
    let payoffs = (0..2)
        .map(|_| (0..rows * cols).map(|_| draw(rng)).collect())
        .collect();
    StaticGame::new(
        names("p", 2),
        vec![names("a", rows), names("b", cols)],
        payoffs,
    )
    .unwrap()
}

pub fn random_logit_2x2(rng: &mut ChaCha8Rng, lambda_lo: f64, lambda_hi: f64) -> PopulationGame {
    let game = random_bimatrix(rng, 2, 2, false);
    let dists = (0..2)
        .map(|_| TypeDistribution::extreme_value(rng.gen_range(lambda_lo..lambda_hi)).unwrap())
        .collect();
    PopulationGame::new(game, dists).unwrap()
}
