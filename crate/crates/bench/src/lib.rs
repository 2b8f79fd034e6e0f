//! Fixed inputs shared by the benchmarks.

use sdtdg_core::{GameConfig, GameState, ReducedState, Vec2};

pub fn config() -> GameConfig {
    GameConfig::new(0.5, 1.0).expect("valid configuration")
}

pub fn defender() -> Vec2 {
    Vec2::new(4.0, 0.0)
}

/// A blocking state off the barrier, so the entry solve does real work.
pub fn blocking_state() -> GameState {
    GameState::new(defender(), Vec2::new(5.5, 1.5))
}

/// A manifold state away from the turning region.
pub fn manifold_state() -> ReducedState {
    ReducedState::new(2.5, 1.2)
}
