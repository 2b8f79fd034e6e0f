//! Solver for the slow-defender target-defence game: dominance regions,
//! constrained-phase trajectories, the barrier and security strategies.

pub mod barrier;
pub mod dominance;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod phase1;
pub mod phase2;
pub mod simulator;
pub mod strategies;

pub use barrier::{BarrierCurve, Classification, Region, RegionReason};
pub use dominance::{CartesianOval, OvalBranch};
pub use error::{GameError, Result};
pub use geometry::{Chirality, GameConfig, GameState, ReducedState, Vec2};
pub use phase1::{EmbeddedPhase2, Phase1Solution};
pub use phase2::{Direction, Phase2Controls, Phase2Trajectory, TerminalKind};
pub use simulator::{Outcome, Trace};
pub use strategies::{PhaseLabel, Strategy, StrategyDecision};
