//! Small named games used throughout the tests and the bundled JSON files.

use crate::game::StaticGame;

fn bimatrix(actions: [&str; 2], u1: [[f64; 2]; 2], u2: [[f64; 2]; 2]) -> StaticGame {
    let rows = |m: [[f64; 2]; 2]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    StaticGame::bimatrix(&actions, &actions, &rows(u1), &rows(u2)).expect("fixture is valid")
}

/// Vaccination game: actions NV (not vaccinated) and V for both players.
pub fn vaccination() -> StaticGame {
    bimatrix(
        ["NV", "V"],
        [[0.0, 7.0], [1.0, 3.0]],
        [[1.0, 2.0], [16.0, 4.0]],
    )
}

/// Matching pennies with payoffs 1/0.
pub fn matching_pennies() -> StaticGame {
    bimatrix(
        ["H", "T"],
        [[1.0, 0.0], [0.0, 1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
    )
}

/// Matching pennies with the row player's (H, H) payoff raised to 9.
pub fn asymmetric_matching_pennies() -> StaticGame {
    bimatrix(
        ["H", "T"],
        [[9.0, 0.0], [0.0, 1.0]],
        [[0.0, 1.0], [1.0, 0.0]],
    )
}

/// Pure coordination: 1 on the diagonal, 0 off it, for both players.
pub fn coordination() -> StaticGame {
    bimatrix(
        ["A", "B"],
        [[1.0, 0.0], [0.0, 1.0]],
        [[1.0, 0.0], [0.0, 1.0]],
    )
}
