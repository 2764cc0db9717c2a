use crate::error::{Error, Result};
use crate::game::StaticGame;
use crate::perturbation::TypeDistribution;

/// A game together with one type distribution per population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGame {
    game: StaticGame,
    dists: Vec<TypeDistribution>,
}

impl PopulationGame {
    pub fn new(game: StaticGame, dists: Vec<TypeDistribution>) -> Result<Self> {
        if dists.len() != game.num_players() {
            return Err(Error::InvalidArgument(format!(
                "{} distributions for {} players",
                dists.len(),
                game.num_players()
            )));
        }
        for (i, d) in dists.iter().enumerate() {
            d.check_arity(game.num_actions(i))?;
        }
        Ok(PopulationGame { game, dists })
    }

    /// Every population gets the same distribution.
    pub fn with_common(game: StaticGame, dist: TypeDistribution) -> Result<Self> {
        let dists = vec![dist; game.num_players()];
        Self::new(game, dists)
    }

    pub fn game(&self) -> &StaticGame {
        &self.game
    }

    pub fn dists(&self) -> &[TypeDistribution] {
        &self.dists
    }

    pub fn dist(&self, i: usize) -> &TypeDistribution {
        &self.dists[i]
    }
}
