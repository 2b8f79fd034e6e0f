//! Feedback strategies for both players behind a common interface.

use serde::{Deserialize, Serialize};

use crate::dominance::{target_in_attacker_dominance, target_in_defender_dominance};
use crate::error::{GameError, Result};
use crate::geometry::{state_frame, Chirality, GameConfig, GameState, ReducedState, StateFrame, Vec2};
use crate::phase1::phase1_entry;
use crate::phase2::{attacker_response, optimal_defender_heading, theta_dagger};

/// Stage of play a decision belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    /// Free motion towards the constraint manifold.
    I,
    /// Moving along the manifold.
    II,
    /// Straight dash for the target.
    III,
}

impl PhaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::I => "I",
            PhaseLabel::II => "II",
            PhaseLabel::III => "III",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Player {
    Defender,
    Attacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyDecision {
    /// Unit heading; zero only for a hold at the target.
    pub heading: Vec2,
    pub phase: PhaseLabel,
    pub value: Option<f64>,
    pub gamma: Option<f64>,
    pub chirality: Option<Chirality>,
}

impl StrategyDecision {
    fn toward(heading: Vec2, phase: PhaseLabel) -> Self {
        StrategyDecision {
            heading,
            phase,
            value: None,
            gamma: None,
            chirality: None,
        }
    }
}

/// A feedback strategy for one player.
pub trait Strategy: Send {
    fn name(&self) -> &str;
    fn player(&self) -> Player;
    fn decide(&mut self, t: f64, s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision>;
}

/// Width of the separation band treated as being on the manifold.
pub fn manifold_band(cfg: &GameConfig) -> f64 {
    cfg.tol_pos.max(2.0 * cfg.dt)
}

/// Phase implied by the geometry alone.
pub fn geometric_phase(s: &GameState, cfg: &GameConfig) -> PhaseLabel {
    if (s.separation() - cfg.manifold_radius()).abs() <= manifold_band(cfg) {
        PhaseLabel::II
    } else {
        PhaseLabel::I
    }
}

fn on_manifold(s: &GameState, cfg: &GameConfig) -> bool {
    s.separation() - cfg.manifold_radius() <= manifold_band(cfg)
}

fn to_target(p: Vec2) -> Vec2 {
    (-p).normalized().unwrap_or(Vec2::ZERO)
}

/// Branch taken on the co-linear surface; counter-clockwise within the band.
pub fn singular_tiebreak(s: &GameState, cfg: &GameConfig) -> Chirality {
    state_frame(s, cfg).map_or(Chirality::CounterClockwise, |f| f.chirality)
}

fn manifold_frame(s: &GameState, cfg: &GameConfig) -> Result<(StateFrame, f64)> {
    let frame = state_frame(s, cfg)?;
    let phi_d = optimal_defender_heading(frame.reduced(), cfg)?;
    Ok((frame, phi_d))
}

pub fn defender_security(s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision> {
    security(Player::Defender, s, cfg, None).map(|d| d.0)
}

pub fn attacker_security(s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision> {
    security(Player::Attacker, s, cfg, None).map(|d| d.0)
}

/// Security decision plus the entry state found in free motion, which seeds
/// the next solve.
fn security(
    player: Player,
    s: &GameState,
    cfg: &GameConfig,
    seed: Option<ReducedState>,
) -> Result<(StrategyDecision, Option<ReducedState>)> {
    let own = match player {
        Player::Defender => s.defender,
        Player::Attacker => s.attacker,
    };
    let home = match player {
        Player::Defender => s.rho_a() >= s.rho_d() / cfg.nu || target_in_defender_dominance(s, cfg),
        Player::Attacker => target_in_attacker_dominance(s, cfg),
    };
    if home {
        return Ok((StrategyDecision::toward(to_target(own), PhaseLabel::III), None));
    }
    if on_manifold(s, cfg) {
        let (frame, phi_d) = manifold_frame(s, cfg)?;
        let relative = match player {
            Player::Defender => phi_d,
            Player::Attacker => {
                // past the breaking bearing the attacker can leave the disk for good
                if let Ok(limit) = theta_dagger(frame.rho_d, cfg) {
                    if frame.theta >= limit {
                        return Ok((StrategyDecision::toward(to_target(own), PhaseLabel::III), None));
                    }
                }
                attacker_response(phi_d, cfg)
            }
        };
        let decision = StrategyDecision {
            chirality: Some(frame.chirality),
            ..StrategyDecision::toward(frame.world_heading(relative), PhaseLabel::II)
        };
        return Ok((decision, None));
    }
    let settled = match player {
        Player::Defender => target_in_attacker_dominance(s, cfg),
        Player::Attacker => target_in_defender_dominance(s, cfg),
    };
    if settled {
        // the other side already wins; no entry point is worth solving for
        return Ok((StrategyDecision::toward(to_target(own), PhaseLabel::III), None));
    }
    match phase1_entry(s, cfg, seed) {
        Ok(entry) => {
            let heading = match player {
                Player::Defender => entry.defender_heading,
                Player::Attacker => entry.attacker_heading,
            };
            let decision = StrategyDecision {
                chirality: Some(entry.chirality),
                ..StrategyDecision::toward(heading, PhaseLabel::I)
            };
            Ok((decision, Some(entry.entry_state)))
        }
        Err(err) => {
            log::warn!("no entry point for {s:?} ({err}); {player:?} runs for the target");
            Ok((StrategyDecision::toward(to_target(own), PhaseLabel::I), None))
        }
    }
}

/// Open-loop run for the target, ignoring the attacker.
pub fn baseline_straight_line_defender(s: &GameState) -> StrategyDecision {
    StrategyDecision::toward(to_target(s.defender), PhaseLabel::I)
}

/// Head straight at the attacker.
pub fn baseline_pure_pursuit_defender(s: &GameState) -> Result<StrategyDecision> {
    let heading = (s.attacker - s.defender)
        .normalized()
        .ok_or(GameError::DegenerateGeometry("players coincide"))?;
    Ok(StrategyDecision::toward(heading, PhaseLabel::I))
}

/// Security strategy of either player. The previous entry state is kept only
/// as a starting guess for the next entry solve.
#[derive(Debug, Clone, Copy)]
pub struct SecurityStrategy {
    pub player: Player,
    seed: Option<ReducedState>,
}

impl SecurityStrategy {
    pub fn new(player: Player) -> Self {
        SecurityStrategy { player, seed: None }
    }
}

impl Strategy for SecurityStrategy {
    fn name(&self) -> &str {
        "proposed"
    }

    fn player(&self) -> Player {
        self.player
    }

    fn decide(&mut self, _t: f64, s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision> {
        let (decision, entry) = security(self.player, s, cfg, self.seed)?;
        self.seed = entry;
        Ok(decision)
    }
}

/// Straight run for the target by either player.
#[derive(Debug, Clone, Copy)]
pub struct StraightLine {
    pub player: Player,
}

impl Strategy for StraightLine {
    fn name(&self) -> &str {
        "straight-line"
    }

    fn player(&self) -> Player {
        self.player
    }

    fn decide(&mut self, _t: f64, s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision> {
        let own = match self.player {
            Player::Defender => s.defender,
            Player::Attacker => s.attacker,
        };
        let phase = geometric_phase(s, cfg);
        Ok(StrategyDecision::toward(to_target(own), phase))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PurePursuit;

impl Strategy for PurePursuit {
    fn name(&self) -> &str {
        "pure-pursuit"
    }

    fn player(&self) -> Player {
        Player::Defender
    }

    fn decide(&mut self, _t: f64, s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision> {
        let mut d = baseline_pure_pursuit_defender(s)?;
        d.phase = geometric_phase(s, cfg);
        Ok(d)
    }
}

/// Attacker holding a fixed world heading.
#[derive(Debug, Clone, Copy)]
pub struct FixedHeading {
    pub player: Player,
    pub heading: Vec2,
}

impl Strategy for FixedHeading {
    fn name(&self) -> &str {
        "fixed"
    }

    fn player(&self) -> Player {
        self.player
    }

    fn decide(&mut self, _t: f64, s: &GameState, cfg: &GameConfig) -> Result<StrategyDecision> {
        Ok(StrategyDecision::toward(self.heading, geometric_phase(s, cfg)))
    }
}

/// Built-in strategy by its command-line name.
pub fn builtin(name: &str, player: Player) -> Result<Box<dyn Strategy>> {
    match (name, player) {
        ("proposed", _) => Ok(Box::new(SecurityStrategy::new(player))),
        ("straight-line", _) => Ok(Box::new(StraightLine { player })),
        ("pure-pursuit", Player::Defender) => Ok(Box::new(PurePursuit)),
        _ => Err(GameError::InvalidConfig(format!(
            "unknown {player:?} strategy '{name}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::from_reduced;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cfg(nu: f64) -> GameConfig {
        GameConfig::new(nu, 1.0).unwrap()
    }

    #[test]
    fn defender_runs_home_when_attacker_far() {
        let s = GameState::new(Vec2::new(2.0, 0.0), Vec2::new(20.0, 0.0));
        let d = defender_security(&s, &cfg(0.5)).unwrap();
        assert_abs_diff_eq!(d.heading.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.heading.y, 0.0, epsilon = 1e-12);
        assert_eq!(d.phase, PhaseLabel::III);
    }

    #[test]
    fn colinear_manifold_state_follows_equilibrium() {
        let c = cfg(0.5);
        let s = from_reduced(ReducedState::new(2.0, PI), 0.0, &c);
        let d = defender_security(&s, &c).unwrap();
        assert_eq!(d.phase, PhaseLabel::II);
        let phi = optimal_defender_heading(ReducedState::new(2.0, PI), &c).unwrap();
        let radial = d.heading.dot(s.defender / s.rho_d());
        assert_abs_diff_eq!(radial, (PI + phi).cos(), epsilon = 1e-9);
        assert!(radial < 0.0);
    }

    #[test]
    fn attacker_with_clear_path_runs_home() {
        let c = cfg(0.5);
        let s = GameState::new(Vec2::new(6.0, 0.0), Vec2::new(2.0, 2.0));
        let d = attacker_security(&s, &c).unwrap();
        let expect = -s.attacker / s.rho_a();
        assert_abs_diff_eq!(d.heading.x, expect.x, epsilon = 1e-12);
        assert_abs_diff_eq!(d.heading.y, expect.y, epsilon = 1e-12);
    }

    #[test]
    fn attacker_past_breaking_bearing_leaves() {
        let c = cfg(0.5);
        let limit = theta_dagger(2.0, &c).unwrap();
        let s = from_reduced(ReducedState::new(2.0, limit + 0.05), 0.3, &c);
        let d = attacker_security(&s, &c).unwrap();
        assert_eq!(d.phase, PhaseLabel::III);
        let expect = -s.attacker / s.rho_a();
        assert_abs_diff_eq!(d.heading.dot(expect), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn baselines() {
        let a = GameState::new(Vec2::new(6.0, 0.0), Vec2::new(1.0, 5.0));
        let b = GameState::new(Vec2::new(6.0, 0.0), Vec2::new(-3.0, 2.0));
        assert_eq!(baseline_straight_line_defender(&a).heading, Vec2::new(-1.0, 0.0));
        assert_eq!(
            baseline_straight_line_defender(&a).heading,
            baseline_straight_line_defender(&b).heading
        );
        let home = GameState::new(Vec2::ZERO, Vec2::new(3.0, 0.0));
        assert_eq!(baseline_straight_line_defender(&home).heading, Vec2::ZERO);
        let p = GameState::new(Vec2::ZERO, Vec2::new(1.0, 1.0));
        let h = baseline_pure_pursuit_defender(&p).unwrap().heading;
        assert_abs_diff_eq!(h.x, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(h.y, 0.5f64.sqrt(), epsilon = 1e-15);
        let q = GameState::new(Vec2::ZERO, Vec2::new(-1.0, -1.0));
        assert_eq!(baseline_pure_pursuit_defender(&q).unwrap().heading, -h);
        assert!(baseline_pure_pursuit_defender(&GameState::new(p.attacker, p.attacker)).is_err());
    }

    #[test]
    fn tiebreak_convention() {
        let c = cfg(0.5);
        let at = |theta: f64| {
            let d = Vec2::new(3.0, 0.0);
            GameState::new(d, d + Vec2::unit(theta))
        };
        assert_eq!(singular_tiebreak(&at(0.0), &c), Chirality::CounterClockwise);
        assert_eq!(singular_tiebreak(&at(1e-12), &c), Chirality::CounterClockwise);
        assert_eq!(singular_tiebreak(&at(-0.1), &c), Chirality::Clockwise);
    }

    #[test]
    fn builtin_names() {
        assert!(builtin("proposed", Player::Defender).is_ok());
        assert!(builtin("straight-line", Player::Attacker).is_ok());
        assert!(builtin("pure-pursuit", Player::Attacker).is_err());
        assert!(builtin("nope", Player::Defender).is_err());
    }

    fn state_strategy() -> impl proptest::strategy::Strategy<Value = GameState> {
        use proptest::strategy::Strategy as _;
        (1.5f64..6.0, -PI..PI, 1.2f64..5.0, -PI..PI).prop_map(|(rd, bd, sep, bs)| {
            let d = Vec2::from_polar(rd, bd);
            GameState::new(d, d + Vec2::from_polar(sep, bs))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn security_headings_are_unit(s in state_strategy()) {
            let c = cfg(0.5);
            for d in [defender_security(&s, &c).unwrap(), attacker_security(&s, &c).unwrap()] {
                prop_assert!((d.heading.norm() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn security_mirrors_under_reflection(s in state_strategy()) {
            let c = cfg(0.5);
            let frame = state_frame(&s, &c).unwrap();
            prop_assume!(frame.theta > 1e-3 && frame.theta < PI - 1e-3);
            let m = s.reflect_x();
            for (a, b) in [
                (defender_security(&s, &c).unwrap(), defender_security(&m, &c).unwrap()),
                (attacker_security(&s, &c).unwrap(), attacker_security(&m, &c).unwrap()),
            ] {
                prop_assert!(a.heading.reflect_x().distance(b.heading) <= 1e-6);
            }
        }

        #[test]
        fn defender_closes_on_manifold(rho in 1.2f64..6.0, theta in 0.0f64..PI) {
            let c = cfg(0.5);
            let s = from_reduced(ReducedState::new(rho, theta), 0.7, &c);
            let d = defender_security(&s, &c).unwrap();
            prop_assert!(d.heading.dot(s.defender) <= 1e-12);
        }
    }
}
