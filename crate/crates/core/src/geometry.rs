//! Planar types, angle conventions and the reduced-state transform.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// A point or direction in the target-centred plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(radius * c, radius * s)
    }

    pub fn unit(angle: f64) -> Self {
        Self::from_polar(1.0, angle)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Polar angle in (-pi, pi].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > f64::MIN_POSITIVE && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Reflection across the x axis.
    pub fn reflect_x(self) -> Self {
        Self::new(self.x, -self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Self {
        self + (other - self) * t
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into [-pi, pi).
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = (angle + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly two_pi
    if a >= PI {
        a -= two_pi;
    }
    a
}

/// Game parameters and numerical tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    /// Defender speed divided by attacker speed.
    pub nu: f64,
    /// Capture radius.
    pub r: f64,
    /// Extra buffer added to the capture radius on the constraint manifold.
    pub eps_safe: f64,
    pub tol_angle: f64,
    pub tol_pos: f64,
    pub tol_value: f64,
    /// Simulation time step.
    pub dt: f64,
    /// Fixed step of the reduced-state integrator.
    pub h_ode: f64,
    /// Largest defender range reached by retrograde trajectories.
    pub rho_max: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            nu: 0.5,
            r: 1.0,
            eps_safe: 0.0,
            tol_angle: 1e-6,
            tol_pos: 1e-6,
            tol_value: 1e-4,
            dt: 1e-3,
            h_ode: 1e-3,
            rho_max: 20.0,
        }
    }
}

impl GameConfig {
    /// Config with default tolerances; fails if `nu` or `r` is out of range.
    pub fn new(nu: f64, r: f64) -> Result<Self> {
        let cfg = Self {
            nu,
            r,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_h_ode(mut self, h: f64) -> Self {
        self.h_ode = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GameError::InvalidConfig(msg));
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad(format!("speed ratio must lie in (0, 1), got {}", self.nu));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("capture radius must be positive, got {}", self.r));
        }
        if !(self.eps_safe >= 0.0 && self.eps_safe.is_finite()) {
            return bad(format!("safety buffer must be non-negative, got {}", self.eps_safe));
        }
        for (name, v) in [
            ("tol_angle", self.tol_angle),
            ("tol_pos", self.tol_pos),
            ("tol_value", self.tol_value),
            ("dt", self.dt),
            ("h_ode", self.h_ode),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.rho_max.is_nan() || self.rho_max <= self.manifold_radius() {
            return bad(format!("rho_max must exceed the capture radius, got {}", self.rho_max));
        }
        Ok(())
    }

    /// Separation held on the constraint manifold.
    pub fn manifold_radius(&self) -> f64 {
        self.r + self.eps_safe
    }

    /// Key used to memoise trajectories per configuration.
    pub(crate) fn cache_key(&self) -> [u64; 5] {
        [
            self.nu.to_bits(),
            self.manifold_radius().to_bits(),
            self.h_ode.to_bits(),
            self.tol_pos.to_bits(),
            self.tol_value.to_bits(),
        ]
    }
}

/// Full planar state: defender and attacker positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub defender: Vec2,
    pub attacker: Vec2,
}

impl GameState {
    pub const fn new(defender: Vec2, attacker: Vec2) -> Self {
        Self { defender, attacker }
    }

    /// Player separation R.
    pub fn separation(&self) -> f64 {
        self.defender.distance(self.attacker)
    }

    pub fn rho_d(&self) -> f64 {
        self.defender.norm()
    }

    pub fn rho_a(&self) -> f64 {
        self.attacker.norm()
    }

    pub fn reflect_x(&self) -> Self {
        Self::new(self.defender.reflect_x(), self.attacker.reflect_x())
    }

    pub fn rotate(&self, angle: f64) -> Self {
        Self::new(self.defender.rotate(angle), self.attacker.rotate(angle))
    }

    pub fn is_finite(&self) -> bool {
        self.defender.is_finite() && self.attacker.is_finite()
    }
}

/// Side of the target-defender axis on which the attacker sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chirality {
    CounterClockwise,
    Clockwise,
}

impl Chirality {
    pub fn sign(self) -> f64 {
        match self {
            Chirality::CounterClockwise => 1.0,
            Chirality::Clockwise => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Chirality::CounterClockwise => Chirality::Clockwise,
            Chirality::Clockwise => Chirality::CounterClockwise,
        }
    }
}

/// Two-dimensional state on the constraint manifold, in the counter-clockwise frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub rho_d: f64,
    /// pi minus the target-defender-attacker angle.
    pub theta: f64,
}

impl ReducedState {
    pub const fn new(rho_d: f64, theta: f64) -> Self {
        Self { rho_d, theta }
    }

    /// Attacker range from the target when the separation is `r`.
    pub fn attacker_range(&self, r: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        ((self.rho_d + r * c).powi(2) + (r * s).powi(2)).sqrt()
    }
}

/// Reduced coordinates of an arbitrary state: radial range, signed bearing of the
/// attacker seen from the defender relative to the outward radial, and separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateFrame {
    pub rho_d: f64,
    /// Unsigned bearing in [0, pi].
    pub theta: f64,
    pub chirality: Chirality,
    pub separation: f64,
    /// Direction of the defender-to-attacker line of sight.
    pub sight_angle: f64,
}

impl StateFrame {
    /// World heading for a relative angle measured from the line of sight in the
    /// counter-clockwise frame.
    pub fn world_heading(&self, relative: f64) -> Vec2 {
        Vec2::unit(self.sight_angle + self.chirality.sign() * relative)
    }

    pub fn reduced(&self) -> ReducedState {
        ReducedState::new(self.rho_d, self.theta)
    }
}

/// Line-of-sight angle: direction from the attacker to the defender, in [-pi, pi).
pub fn los_angle(s: &GameState) -> Result<f64> {
    let d = s.defender - s.attacker;
    if d.norm() <= f64::MIN_POSITIVE {
        return Err(GameError::DegenerateGeometry("players coincide"));
    }
    Ok(wrap_angle(d.angle()))
}

/// Reduced frame of any state with a non-degenerate defender and separation.
/// Bearings within `tol_angle` of zero are treated as counter-clockwise.
pub fn state_frame(s: &GameState, cfg: &GameConfig) -> Result<StateFrame> {
    let rho_d = s.rho_d();
    if rho_d <= f64::MIN_POSITIVE {
        return Err(GameError::DegenerateGeometry("defender at the target"));
    }
    let sight = s.attacker - s.defender;
    let separation = sight.norm();
    if separation <= f64::MIN_POSITIVE {
        return Err(GameError::DegenerateGeometry("players coincide"));
    }
    let sight_angle = sight.angle();
    let signed = wrap_angle(sight_angle - s.defender.angle());
    let (theta, chirality) = if signed.abs() <= cfg.tol_angle || signed >= 0.0 {
        (signed.abs(), Chirality::CounterClockwise)
    } else {
        (-signed, Chirality::Clockwise)
    };
    // wrap_angle maps the exact antipode to -pi
    let theta = theta.min(PI);
    Ok(StateFrame {
        rho_d,
        theta,
        chirality,
        separation,
        sight_angle,
    })
}

/// Reduced state and chirality of a state on the constraint manifold.
pub fn to_reduced(s: &GameState, cfg: &GameConfig) -> Result<(ReducedState, Chirality)> {
    let residual = (s.separation() - cfg.manifold_radius()).abs();
    if residual > cfg.tol_pos {
        return Err(GameError::ConstraintViolation { residual });
    }
    let frame = state_frame(s, cfg)?;
    Ok((frame.reduced(), frame.chirality))
}

/// Embeds a reduced state with the defender at polar angle `gamma`, attacker on
/// the counter-clockwise side.
pub fn from_reduced(rs: ReducedState, gamma: f64, cfg: &GameConfig) -> GameState {
    let defender = Vec2::from_polar(rs.rho_d, gamma);
    let attacker = defender + Vec2::from_polar(cfg.manifold_radius(), gamma + rs.theta);
    GameState::new(defender, attacker)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg() -> GameConfig {
        GameConfig::new(0.5, 1.0).unwrap()
    }

    #[test]
    fn los_angle_examples() {
        let s = GameState::new(Vec2::new(1.0, 0.0), Vec2::ZERO);
        assert_abs_diff_eq!(los_angle(&s).unwrap(), 0.0);
        let s = GameState::new(Vec2::new(0.0, 1.0), Vec2::ZERO);
        assert_abs_diff_eq!(los_angle(&s).unwrap(), PI / 2.0);
        let s = GameState::new(Vec2::new(3.5, 0.0), Vec2::new(4.3021, 1.5550));
        assert_abs_diff_eq!(los_angle(&s).unwrap(), -2.047_019_638_446_601_5, epsilon = 1e-12);
    }

    #[test]
    fn los_angle_rejects_coincident_players() {
        let s = GameState::new(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0));
        assert!(matches!(los_angle(&s), Err(GameError::DegenerateGeometry(_))));
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(PI), -PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI), -PI);
        assert_abs_diff_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn to_reduced_examples() {
        let c = cfg();
        let (rs, _) = to_reduced(&GameState::new(Vec2::new(2.0, 0.0), Vec2::new(3.0, 0.0)), &c).unwrap();
        assert_abs_diff_eq!(rs.rho_d, 2.0);
        assert_abs_diff_eq!(rs.theta, 0.0);
        let (rs, _) = to_reduced(&GameState::new(Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0)), &c).unwrap();
        assert_abs_diff_eq!(rs.theta, PI);
        let (rs, ch) = to_reduced(&GameState::new(Vec2::new(2.0, 0.0), Vec2::new(2.0, 1.0)), &c).unwrap();
        assert_abs_diff_eq!(rs.theta, PI / 2.0);
        assert_eq!(ch, Chirality::CounterClockwise);
    }

    #[test]
    fn to_reduced_rejects_off_manifold() {
        let s = GameState::new(Vec2::new(2.0, 0.0), Vec2::new(4.0, 0.0));
        assert!(matches!(
            to_reduced(&s, &cfg()),
            Err(GameError::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn from_reduced_examples() {
        let c = cfg();
        let s = from_reduced(ReducedState::new(2.0, PI), 0.0, &c);
        assert_abs_diff_eq!(s.defender.x, 2.0);
        assert_abs_diff_eq!(s.attacker.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.attacker.y, 0.0, epsilon = 1e-15);
        let s = from_reduced(ReducedState::new(1.0, PI), 0.7, &c);
        assert!(s.rho_a() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(GameConfig::new(1.0, 1.0).is_err());
        assert!(GameConfig::new(0.0, 1.0).is_err());
        assert!(GameConfig::new(0.5, -1.0).is_err());
        let mut c = cfg();
        c.tol_pos = 0.0;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rho in 1.0f64..10.0, theta in 0.0f64..PI, gamma in -PI..PI) {
            let c = cfg();
            let rs = ReducedState::new(rho, theta);
            let s = from_reduced(rs, gamma, &c);
            let (back, ch) = to_reduced(&s, &c).unwrap();
            prop_assert!((back.rho_d - rho).abs() <= c.tol_pos);
            prop_assert!((back.theta - theta).abs() <= 1e-9);
            if theta > c.tol_angle {
                prop_assert_eq!(ch, Chirality::CounterClockwise);
            }
        }

        #[test]
        fn mirror_flips_chirality(rho in 1.0f64..10.0, theta in 0.01f64..3.13, gamma in -PI..PI) {
            let c = cfg();
            let s = from_reduced(ReducedState::new(rho, theta), gamma, &c);
            let (a, ca) = to_reduced(&s, &c).unwrap();
            let (b, cb) = to_reduced(&s.reflect_x(), &c).unwrap();
            prop_assert!((a.rho_d - b.rho_d).abs() < 1e-12);
            prop_assert!((a.theta - b.theta).abs() < 1e-9);
            prop_assert_eq!(ca, cb.flip());
        }

        #[test]
        fn attacker_range_matches_embedding(rho in 1.0f64..10.0, theta in 0.0f64..PI, gamma in -PI..PI) {
            let c = cfg();
            let rs = ReducedState::new(rho, theta);
            let s = from_reduced(rs, gamma, &c);
            prop_assert!((rs.attacker_range(c.r) - s.rho_a()).abs() <= c.tol_pos);
        }

        #[test]
        fn wrapped_angles_in_range(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!((-PI..PI).contains(&w));
        }
    }
}
