//! Built-in models.

pub mod growth;
pub mod invest_game;
pub mod pakes_mcguire;
