//! Constrained play on the manifold where the separation equals the capture
//! radius: reduced dynamics, terminal surfaces, the defender's slope-optimal
//! heading and fixed-step trajectory integration.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::geometry::{Chirality, GameConfig, ReducedState};
use crate::numerics::{bisect, golden_section_min};

/// Grid resolution used to bracket the heading minimiser.
pub const HEADING_GRID: usize = 64;
/// Step budget for forward integration.
pub const FORWARD_STEP_BUDGET: usize = 10_000_000;
/// Step budget for retrograde integration.
pub const RETROGRADE_STEP_BUDGET: usize = 2_000_000;

/// Relative headings of both players, measured counter-clockwise from the
/// defender-to-attacker line of sight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase2Controls {
    pub defender: f64,
    pub attacker: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Retrograde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalKind {
    DefenderWin,
    AttackerWin,
    BarrierCorner,
}

/// Why a retrograde integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrogradeStop {
    RangeLimit,
    SingularSurface,
    StepBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase2Sample {
    /// Time; retrograde samples carry non-positive times ending at zero.
    pub t: f64,
    pub rho_d: f64,
    pub theta: f64,
    /// Defender polar angle relative to the first sample.
    pub beta: f64,
    pub controls: Phase2Controls,
    /// Orientation of the local frame relative to the first sample.
    pub chirality: Chirality,
}

impl Phase2Sample {
    pub fn state(&self) -> ReducedState {
        ReducedState::new(self.rho_d, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Trajectory {
    pub direction: Direction,
    pub samples: Vec<Phase2Sample>,
    /// Value label: the angle margin left to the defender at a defender win, or
    /// minus the final range at an attacker win.
    pub value: f64,
    pub terminal_kind: TerminalKind,
    /// The terminal state: last sample of a forward run, first of a retrograde one.
    pub terminal: ReducedState,
    pub retrograde_stop: Option<RetrogradeStop>,
}

/// Rates of range and bearing for the given controls.
pub fn reduced_dynamics(rs: ReducedState, u: Phase2Controls, cfg: &GameConfig) -> (f64, f64) {
    let nu = cfg.nu;
    let r = cfg.manifold_radius();
    let (s, c) = (rs.theta + u.defender).sin_cos();
    let rho_dot = nu * c;
    let theta_dot = -(nu / rs.rho_d) * s + (u.attacker.sin() - nu * u.defender.sin()) / r;
    (rho_dot, theta_dot)
}

/// Attacker heading that keeps the separation fixed, on the bearing-increasing
/// branch.
pub fn attacker_response(phi_d: f64, cfg: &GameConfig) -> f64 {
    (cfg.nu * phi_d.cos()).clamp(-1.0, 1.0).acos()
}

/// Separation-preserving attacker heading with the sign of the defender's.
pub fn attacker_constrained_heading(phi_d: f64, cfg: &GameConfig) -> f64 {
    let magnitude = attacker_response(phi_d, cfg);
    if phi_d < 0.0 {
        -magnitude
    } else {
        magnitude
    }
}

/// Range, bearing rate and attacker heading for a defender heading, with the
/// attacker on the bearing-increasing branch.
#[inline]
fn rates(rho: f64, theta: f64, phi: f64, nu: f64, r: f64) -> (f64, f64) {
    let (sp, cp) = phi.sin_cos();
    let (s, c) = (theta + phi).sin_cos();
    let sin_a = (1.0 - nu * nu * cp * cp).max(0.0).sqrt();
    (nu * c, -(nu / rho) * s + (sin_a - nu * sp) / r)
}

/// Numerator of the derivative of `theta_dot / -rho_dot` with respect to the
/// defender heading; zero at interior extrema.
fn slope_stationarity(rho: f64, theta: f64, phi: f64, nu: f64, r: f64) -> f64 {
    let (sp, cp) = phi.sin_cos();
    let (s, c) = (theta + phi).sin_cos();
    let sin_a = (1.0 - nu * nu * cp * cp).max(f64::MIN_POSITIVE).sqrt();
    let rd = nu * c;
    let td = -(nu / rho) * s + (sin_a - nu * sp) / r;
    let rd_prime = -nu * s;
    let td_prime = -(nu / rho) * c + (nu * nu * cp * sp / sin_a - nu * cp) / r;
    td * rd_prime - td_prime * rd
}

/// Largest defender range from which the defender out-turns the attacker
/// around the target at bearing `theta`.
pub fn rhod_dagger(theta: f64, cfg: &GameConfig) -> f64 {
    let nu = cfg.nu;
    let r = cfg.manifold_radius();
    let s = theta.sin();
    nu * r * (nu * theta.cos() + (1.0 - nu * nu * s * s).sqrt()) / (1.0 - nu * nu)
}

/// Bearing beyond which the attacker breaks away from the capture circle.
pub fn theta_dagger(rho_d: f64, cfg: &GameConfig) -> Result<f64> {
    let r = cfg.manifold_radius();
    if rho_d < r {
        return Err(GameError::CaptureGeometry {
            separation: rho_d,
            radius: r,
        });
    }
    Ok(theta_dagger_unchecked(rho_d, cfg))
}

fn theta_dagger_unchecked(rho_d: f64, cfg: &GameConfig) -> f64 {
    let nu = cfg.nu;
    let r = cfg.manifold_radius();
    let arg = (r * (1.0 - nu * nu).sqrt() / rho_d.max(r)).min(1.0);
    PI - nu.acos() + arg.asin()
}

/// True inside the region where the defender out-turns the attacker.
pub fn in_turning_region(rs: ReducedState, cfg: &GameConfig) -> bool {
    rs.rho_d < rhod_dagger(rs.theta, cfg)
}

/// Defender heading minimising bearing growth per unit of range closed, with
/// the range strictly decreasing. Inside the turning region the defender
/// instead closes as fast as it can while not letting the bearing grow.
pub fn optimal_defender_heading(rs: ReducedState, cfg: &GameConfig) -> Result<f64> {
    let nu = cfg.nu;
    let r = cfg.manifold_radius();
    let (rho, theta) = (rs.rho_d, rs.theta);
    if !(rho.is_finite() && theta.is_finite() && rho > 0.0) {
        return Err(GameError::Numerical(format!("invalid reduced state {rs:?}")));
    }
    if in_turning_region(rs, cfg) {
        return Ok(turning_heading(rho, theta, nu, r));
    }
    let lo = FRAC_PI_2 - theta;
    let hi = 3.0 * FRAC_PI_2 - theta;
    let objective = |phi: f64| {
        let (rd, td) = rates(rho, theta, phi, nu, r);
        td / -rd
    };
    let width = (hi - lo) / (HEADING_GRID + 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..HEADING_GRID {
        let v = objective(lo + (i + 1) as f64 * width);
        if v < best.1 {
            best = (i, v);
        }
    }
    if !best.1.is_finite() {
        return Err(GameError::Numerical(format!("heading objective not finite at {rs:?}")));
    }
    let at_edge = best.0 == 0 || best.0 == HEADING_GRID - 1;
    if at_edge {
        // an edge minimum with a shrinking bearing means the objective is unbounded
        let (_, td_lo) = rates(rho, theta, lo, nu, r);
        let (_, td_hi) = rates(rho, theta, hi, nu, r);
        if td_lo < 0.0 || td_hi < 0.0 {
            return Ok(turning_heading(rho, theta, nu, r));
        }
    }
    let a = lo + best.0 as f64 * width;
    let b = lo + (best.0 + 2) as f64 * width;
    let (phi, v) = golden_section_min(objective, a, b, 1e-10);
    if !v.is_finite() {
        return Err(GameError::Numerical(format!("heading objective not finite at {rs:?}")));
    }
    // golden section only resolves a smooth minimum to about sqrt(eps); polish
    // on the stationarity condition when it brackets a root
    let g = |p: f64| slope_stationarity(rho, theta, p, nu, r);
    let (lo_p, hi_p) = ((phi - 1e-6).max(a), (phi + 1e-6).min(b));
    if g(lo_p).signum() != g(hi_p).signum() {
        if let Ok(root) = bisect(g, lo_p, hi_p, 1e-15) {
            return Ok(root);
        }
    }
    Ok(phi)
}

/// Fastest-approach heading that keeps the bearing from growing.
fn turning_heading(rho: f64, theta: f64, nu: f64, r: f64) -> f64 {
    let straight = PI - theta;
    let td = |phi: f64| rates(rho, theta, phi, nu, r).1;
    if td(straight) <= 0.0 {
        return straight;
    }
    let lo = FRAC_PI_2 - theta;
    let hi = 3.0 * FRAC_PI_2 - theta;
    let mut best: Option<f64> = None;
    for edge in [lo, hi] {
        if td(edge) < 0.0 {
            if let Ok(root) = bisect(td, edge, straight, 1e-13) {
                // the root closest to straight-in approaches fastest
                if best.is_none_or(|b| (root - straight).abs() < (b - straight).abs()) {
                    best = Some(root);
                }
            }
        }
    }
    best.unwrap_or_else(|| {
        let (phi, _) = golden_section_min(td, lo, hi, 1e-10);
        phi
    })
}

/// Equilibrium pair at a reduced state.
pub fn equilibrium_controls(rs: ReducedState, cfg: &GameConfig) -> Result<Phase2Controls> {
    let defender = optimal_defender_heading(rs, cfg)?;
    Ok(Phase2Controls {
        defender,
        attacker: attacker_response(defender, cfg),
    })
}

/// Reduced state where the trajectory labelled `value` terminates.
pub fn terminal_for_value(value: f64, cfg: &GameConfig) -> Result<ReducedState> {
    let r = cfg.manifold_radius();
    if !value.is_finite() {
        return Err(GameError::NoTrajectory { value });
    }
    if value == 0.0 {
        return Ok(ReducedState::new(r, PI));
    }
    if value > 0.0 && value <= PI {
        let theta = PI - value;
        return Ok(ReducedState::new(rhod_dagger(theta, cfg).max(r), theta));
    }
    if value <= -r {
        let rho = -value;
        return Ok(ReducedState::new(rho, theta_dagger_unchecked(rho, cfg)));
    }
    Err(GameError::NoTrajectory { value })
}

/// Defender-win and attacker-win event functions; each is non-positive once
/// the corresponding terminal surface is reached.
fn events(rho: f64, theta: f64, cfg: &GameConfig) -> (f64, f64) {
    let r = cfg.manifold_radius();
    let g_def = rho - rhod_dagger(theta, cfg).max(r);
    let g_att = theta_dagger_unchecked(rho, cfg) - theta;
    (g_def, g_att)
}

#[derive(Clone, Copy)]
struct Point {
    rho: f64,
    theta: f64,
    beta: f64,
}

struct Integrator<'a> {
    cfg: &'a GameConfig,
    /// +1 forward, -1 retrograde.
    time_sign: f64,
}

impl<'a> Integrator<'a> {
    fn derivative(&self, p: Point, orient: f64) -> Result<(f64, f64, f64, Phase2Controls)> {
        let rs = ReducedState::new(p.rho, p.theta);
        let u = equilibrium_controls(rs, self.cfg)?;
        let (rd, td) = reduced_dynamics(rs, u, self.cfg);
        let bd = self.cfg.nu * (p.theta + u.defender).sin() / p.rho;
        let k = self.time_sign;
        Ok((k * rd, k * td, k * orient * bd, u))
    }

    fn step(&self, p: Point, orient: f64, h: f64) -> Result<Point> {
        let add = |p: Point, d: (f64, f64, f64, Phase2Controls), s: f64| Point {
            rho: p.rho + s * d.0,
            theta: p.theta + s * d.1,
            beta: p.beta + s * d.2,
        };
        let k1 = self.derivative(p, orient)?;
        let k2 = self.derivative(add(p, k1, 0.5 * h), orient)?;
        let k3 = self.derivative(add(p, k2, 0.5 * h), orient)?;
        let k4 = self.derivative(add(p, k3, h), orient)?;
        Ok(Point {
            rho: p.rho + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            theta: p.theta + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            beta: p.beta + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
        })
    }
}

fn sample(t: f64, p: Point, chirality: Chirality, cfg: &GameConfig) -> Result<Phase2Sample> {
    let controls = equilibrium_controls(ReducedState::new(p.rho, p.theta), cfg)?;
    Ok(Phase2Sample {
        t,
        rho_d: p.rho,
        theta: p.theta,
        beta: p.beta,
        controls,
        chirality,
    })
}

fn in_corner_band(rho: f64, theta: f64, cfg: &GameConfig) -> bool {
    (rho - cfg.manifold_radius()).abs() <= cfg.tol_value && (PI - theta).abs() <= cfg.tol_value
}

fn label(rho: f64, theta: f64, kind: TerminalKind, cfg: &GameConfig) -> (TerminalKind, f64) {
    if in_corner_band(rho, theta, cfg) {
        return (TerminalKind::BarrierCorner, 0.0);
    }
    match kind {
        TerminalKind::DefenderWin => (kind, PI - theta),
        TerminalKind::AttackerWin => (kind, -rho),
        TerminalKind::BarrierCorner => (kind, 0.0),
    }
}

/// Integrates under the equilibrium pair until a terminal surface (forward)
/// or the range limit `cfg.rho_max` / singular surface (retrograde).
pub fn integrate_phase2(start: ReducedState, direction: Direction, cfg: &GameConfig) -> Result<Phase2Trajectory> {
    match direction {
        Direction::Forward => integrate_forward(start, cfg, FORWARD_STEP_BUDGET),
        Direction::Retrograde => integrate_retrograde(start, cfg, cfg.rho_max),
    }
}

/// Forward run with an explicit step budget.
pub fn integrate_forward(start: ReducedState, cfg: &GameConfig, budget: usize) -> Result<Phase2Trajectory> {
    validate_start(start, cfg)?;
    let h = cfg.h_ode;
    let integ = Integrator { cfg, time_sign: 1.0 };
    let mut p = Point {
        rho: start.rho_d,
        theta: start.theta,
        beta: 0.0,
    };
    let mut chirality = Chirality::CounterClockwise;
    let mut t = 0.0;
    let mut samples = Vec::new();

    let finish = |samples: Vec<Phase2Sample>, p: Point, kind: TerminalKind| {
        let (terminal_kind, value) = label(p.rho, p.theta, kind, cfg);
        Phase2Trajectory {
            direction: Direction::Forward,
            samples,
            value,
            terminal_kind,
            terminal: ReducedState::new(p.rho, p.theta),
            retrograde_stop: None,
        }
    };

    let (g_def, g_att) = events(p.rho, p.theta, cfg);
    if in_corner_band(p.rho, p.theta, cfg) || g_def <= cfg.tol_pos || g_att <= cfg.tol_pos {
        samples.push(sample(0.0, p, chirality, cfg)?);
        let kind = if g_def <= g_att {
            TerminalKind::DefenderWin
        } else {
            TerminalKind::AttackerWin
        };
        return Ok(finish(samples, p, kind));
    }

    for _ in 0..budget {
        samples.push(sample(t, p, chirality, cfg)?);
        let orient = chirality.sign();
        let mut next = integ.step(p, orient, h)?;
        let (g_def, g_att) = events(next.rho, next.theta, cfg);
        if g_def <= 0.0 || g_att <= 0.0 {
            let mut hit: Option<(f64, TerminalKind)> = None;
            for (kind, fired) in [
                (TerminalKind::DefenderWin, g_def <= 0.0),
                (TerminalKind::AttackerWin, g_att <= 0.0),
            ] {
                if !fired {
                    continue;
                }
                let ev = |s: f64| -> f64 {
                    match integ.step(p, orient, s) {
                        Ok(q) => {
                            let (a, b) = events(q.rho, q.theta, cfg);
                            if kind == TerminalKind::DefenderWin {
                                a
                            } else {
                                b
                            }
                        }
                        Err(_) => f64::NAN,
                    }
                };
                let s = bisect(ev, 0.0, h, 1e-13).unwrap_or(h);
                if hit.is_none_or(|(best, _)| s < best) {
                    hit = Some((s, kind));
                }
            }
            let (s, kind) = hit.expect("at least one event fired");
            next = integ.step(p, orient, s)?;
            t += s;
            samples.push(sample(t, next, chirality, cfg)?);
            return Ok(finish(samples, next, kind));
        }
        if next.theta < 0.0 {
            // crossed the co-linear configuration: continue in the mirrored frame
            next.theta = -next.theta;
            chirality = chirality.flip();
        }
        p = next;
        t += h;
    }
    Err(GameError::NonTermination { steps: budget })
}

/// Backward run from `start` until the range exceeds `rho_limit`, the bearing
/// reaches zero, or the step budget runs out.
pub fn integrate_retrograde(start: ReducedState, cfg: &GameConfig, rho_limit: f64) -> Result<Phase2Trajectory> {
    validate_start(start, cfg)?;
    let h = cfg.h_ode;
    let integ = Integrator { cfg, time_sign: -1.0 };
    let orient = 1.0;
    let ccw = Chirality::CounterClockwise;
    let mut p = Point {
        rho: start.rho_d,
        theta: start.theta,
        beta: 0.0,
    };
    let mut t = 0.0;
    let mut samples = vec![sample(0.0, p, ccw, cfg)?];
    let mut stop = RetrogradeStop::StepBudget;
    for _ in 0..RETROGRADE_STEP_BUDGET {
        if p.rho >= rho_limit {
            stop = RetrogradeStop::RangeLimit;
            break;
        }
        let next = integ.step(p, orient, h)?;
        if next.theta <= 0.0 {
            // land exactly on the singular surface
            let ev = |s: f64| integ.step(p, orient, s).map(|q| q.theta).unwrap_or(f64::NAN);
            let s = bisect(ev, 0.0, h, 1e-13).unwrap_or(h);
            let mut q = integ.step(p, orient, s)?;
            q.theta = q.theta.max(0.0);
            t -= s;
            samples.push(sample(t, q, ccw, cfg)?);
            stop = RetrogradeStop::SingularSurface;
            break;
        }
        p = next;
        t -= h;
        samples.push(sample(t, p, ccw, cfg)?);
    }
    let (g_def, g_att) = events(start.rho_d, start.theta, cfg);
    let kind = if in_corner_band(start.rho_d, start.theta, cfg) {
        TerminalKind::BarrierCorner
    } else if g_def <= g_att {
        TerminalKind::DefenderWin
    } else {
        TerminalKind::AttackerWin
    };
    let (terminal_kind, value) = label(start.rho_d, start.theta, kind, cfg);
    Ok(Phase2Trajectory {
        direction: Direction::Retrograde,
        samples,
        value,
        terminal_kind,
        terminal: start,
        retrograde_stop: Some(stop),
    })
}

/// Retrograde trajectory whose forward value is `value`.
pub fn value_trajectory(value: f64, cfg: &GameConfig, rho_limit: f64) -> Result<Phase2Trajectory> {
    let terminal = terminal_for_value(value, cfg)?;
    let mut traj = integrate_retrograde(terminal, cfg, rho_limit)?;
    traj.value = value;
    Ok(traj)
}

fn validate_start(rs: ReducedState, cfg: &GameConfig) -> Result<()> {
    if !(rs.rho_d.is_finite() && rs.theta.is_finite()) {
        return Err(GameError::Numerical(format!("non-finite start {rs:?}")));
    }
    if rs.rho_d < cfg.manifold_radius() - cfg.tol_pos || !(-cfg.tol_angle..=PI + cfg.tol_angle).contains(&rs.theta) {
        return Err(GameError::Numerical(format!("start {rs:?} outside the reduced domain")));
    }
    Ok(())
}

/// Value of the forward trajectory from `rs`.
pub fn phase2_value(rs: ReducedState, cfg: &GameConfig) -> Result<f64> {
    Ok(integrate_phase2(rs, Direction::Forward, cfg)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg(nu: f64) -> GameConfig {
        GameConfig::new(nu, 1.0).unwrap()
    }

    /// Brute-force minimiser of the slope objective on a 1024-point grid.
    fn grid_objective_min(rs: ReducedState, c: &GameConfig) -> f64 {
        let lo = FRAC_PI_2 - rs.theta;
        let hi = 3.0 * FRAC_PI_2 - rs.theta;
        (1..=1024)
            .map(|i| {
                let phi = lo + (hi - lo) * i as f64 / 1025.0;
                let (rd, td) = rates(rs.rho_d, rs.theta, phi, c.nu, c.r);
                td / -rd
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn objective(rs: ReducedState, phi: f64, c: &GameConfig) -> f64 {
        let (rd, td) = rates(rs.rho_d, rs.theta, phi, c.nu, c.r);
        td / -rd
    }

    #[test]
    fn dynamics_example() {
        let c = cfg(0.5);
        let u = Phase2Controls {
            defender: 0.0,
            attacker: 0.5f64.acos(),
        };
        let (rd, td) = reduced_dynamics(ReducedState::new(2.0, 0.0), u, &c);
        assert_abs_diff_eq!(rd, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(td, 0.866_025_403_784_438_6, epsilon = 1e-12);
        let u = Phase2Controls {
            defender: -0.7,
            attacker: attacker_response(-0.7, &c),
        };
        let (rd, _) = reduced_dynamics(ReducedState::new(2.0, 0.7), u, &c);
        assert_abs_diff_eq!(rd, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn attacker_heading_examples() {
        assert_abs_diff_eq!(attacker_constrained_heading(0.0, &cfg(0.5)), PI / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            attacker_constrained_heading(FRAC_PI_2, &cfg(0.5)),
            FRAC_PI_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            attacker_constrained_heading(-PI / 4.0, &cfg(0.75)),
            -1.011_806_460_769_911,
            epsilon = 1e-12
        );
    }

    #[test]
    fn terminal_surface_examples() {
        let c = cfg(0.5);
        assert_abs_diff_eq!(rhod_dagger(0.0, &c), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhod_dagger(FRAC_PI_2, &c), 0.577_350_269_189_625_8, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_dagger(1.0, &c).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(theta_dagger(2.0, &c).unwrap(), 2.542_227_499_322_128, epsilon = 1e-9);
        assert!(theta_dagger(0.5, &c).is_err());
        for nu in [0.3, 0.5, 0.75] {
            let c = cfg(nu);
            assert_abs_diff_eq!(rhod_dagger(0.0, &c), nu / (1.0 - nu), epsilon = 1e-9);
            assert_abs_diff_eq!(theta_dagger(1.0, &c).unwrap(), PI, epsilon = 1e-9);
        }
    }

    #[test]
    fn theta_dagger_decreasing() {
        let c = cfg(0.75);
        let vals: Vec<f64> = (0..100)
            .map(|i| theta_dagger(1.0 + 0.1 * i as f64, &c).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn turning_radius_fixed_point() {
        for nu in [0.3, 0.5, 0.75, 0.9] {
            let c = cfg(nu);
            for i in 0..100 {
                let theta = PI * i as f64 / 99.0;
                let rho = rhod_dagger(theta, &c);
                let rho_a = ReducedState::new(rho, theta).attacker_range(c.r);
                assert_abs_diff_eq!(nu * rho_a, rho, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn escape_guarantee_grid() {
        for nu in [0.3f64, 0.5, 0.75, 0.9] {
            let limit = nu.acos();
            for i in 0..=72 {
                let phi_d = -PI + i as f64 * PI / 36.0;
                for j in 1..40 {
                    let phi_a = -limit + 2.0 * limit * j as f64 / 40.0;
                    assert!(phi_a.cos() - nu * phi_d.cos() > 0.0);
                }
            }
        }
    }

    #[test]
    fn heading_examples() {
        let c = cfg(0.75);
        let phi = optimal_defender_heading(ReducedState::new(1.0, PI), &c).unwrap();
        let (rd, _) = rates(1.0, PI, phi, c.nu, c.r);
        assert_abs_diff_eq!(rd, -c.nu, epsilon = 1e-9);
        // oracle values from a 20001-point grid search of the slope objective
        for (rho, theta, expected) in [
            (2.0, PI, 0.2614),
            (2.0, 2.0, 0.674),
            (2.0, 3.0, 0.326),
            (1.5, PI, 0.169),
            (4.0, PI, 0.423),
        ] {
            let phi = optimal_defender_heading(ReducedState::new(rho, theta), &c).unwrap();
            assert_abs_diff_eq!(phi, expected, epsilon = 2e-3);
        }
    }

    #[test]
    fn turning_region_policy_blocks_bearing() {
        let c = cfg(0.5);
        let theta = FRAC_PI_2;
        let rs = ReducedState::new(rhod_dagger(theta, &c) * 0.9, theta);
        let phi = optimal_defender_heading(rs, &c).unwrap();
        let (rd, td) = rates(rs.rho_d, rs.theta, phi, c.nu, c.r);
        assert!(rd < 0.0);
        assert!(td <= 1e-9);
    }

    #[test]
    fn corner_is_barrier() {
        let c = cfg(0.5);
        let traj = integrate_phase2(ReducedState::new(1.0, PI), Direction::Forward, &c).unwrap();
        assert_eq!(traj.terminal_kind, TerminalKind::BarrierCorner);
        assert_eq!(traj.value, 0.0);
    }

    #[test]
    fn immediate_terminals() {
        let c = cfg(0.5);
        let theta = FRAC_PI_2;
        let rs = ReducedState::new((rhod_dagger(theta, &c) * 0.9).max(1.0), theta);
        let v = phase2_value(rs, &c).unwrap();
        assert_abs_diff_eq!(v, PI - theta, epsilon = 1e-12);
        let rs = ReducedState::new(2.0, theta_dagger(2.0, &c).unwrap() + 0.01);
        assert_abs_diff_eq!(phase2_value(rs, &c).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn value_terminals_round_trip() {
        let c = cfg(0.75);
        for v in [0.0, 0.3, 1.0, 2.5, -1.01, -1.5, -3.0] {
            let rs = terminal_for_value(v, &c).unwrap();
            let got = phase2_value(rs, &c).unwrap();
            assert_abs_diff_eq!(got, v, epsilon = 1e-9);
        }
        assert!(terminal_for_value(-0.5, &c).is_err());
        assert!(terminal_for_value(3.5, &c).is_err());
    }

    #[test]
    fn separatrix_shape() {
        let c = cfg(0.75);
        let traj = integrate_retrograde(ReducedState::new(1.0, PI), &c, 6.0).unwrap();
        let s = &traj.samples;
        assert!(s.windows(2).all(|w| w[1].rho_d > w[0].rho_d && w[1].theta < w[0].theta));
        assert_eq!(traj.retrograde_stop, Some(RetrogradeStop::RangeLimit));
        let at = |rho: f64| {
            let i = s.iter().position(|x| x.rho_d >= rho).unwrap();
            s[i].theta
        };
        // reference points of the separatrix, from an independent integration
        assert_abs_diff_eq!(at(2.0), 2.52, epsilon = 0.01);
        assert_abs_diff_eq!(at(4.0), 1.79, epsilon = 0.01);
    }

    #[test]
    fn forward_range_monotone() {
        let c = cfg(0.75);
        let traj = integrate_phase2(ReducedState::new(4.0, 1.5), Direction::Forward, &c).unwrap();
        assert!(traj.samples.windows(2).all(|w| w[1].rho_d <= w[0].rho_d));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn heading_beats_dense_grid(rho in 1.0f64..8.0, theta in 0.0f64..PI, nu in 0.2f64..0.9) {
            let c = cfg(nu);
            let rs = ReducedState::new(rho, theta);
            prop_assume!(!in_turning_region(rs, &c));
            let phi = optimal_defender_heading(rs, &c).unwrap();
            let (rd, _) = rates(rho, theta, phi, nu, c.r);
            prop_assert!(rd < 0.0);
            prop_assert!(objective(rs, phi, &c) <= grid_objective_min(rs, &c) + c.tol_value);
        }

        #[test]
        fn controls_preserve_separation(rho in 1.0f64..8.0, theta in 0.0f64..PI, nu in 0.2f64..0.9) {
            let c = cfg(nu);
            let u = equilibrium_controls(ReducedState::new(rho, theta), &c).unwrap();
            prop_assert!((nu * u.defender.cos() - u.attacker.cos()).abs() <= c.tol_angle);
        }
    }
}
