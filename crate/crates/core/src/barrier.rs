//! The closed barrier separating the attacker's winning region from the
//! defender's, its level sets, and state classification.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dominance::{target_in_attacker_dominance, target_in_defender_dominance};
use crate::error::{GameError, Result};
use crate::geometry::{GameConfig, GameState, Vec2};
use crate::numerics::{bisect, segments_cross, winding_number};
use crate::phase1::{locus_entry, solve_phase1};
use crate::strategies::PhaseLabel;

/// Number of rotation samples per envelope arc.
pub const ENVELOPE_SAMPLES: usize = 256;
const NATURAL_SAMPLES: usize = 256;
const CAPTURE_SAMPLES: usize = 64;
const COARSE_STEP: f64 = 0.005;

/// Circle of attacker positions that tie with a defender running for the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalArc {
    /// Radius beyond which the defender wins by running straight home.
    pub radius: f64,
    /// Tight radius once the capture radius is accounted for.
    pub critical_radius: f64,
    /// Polar angle of the defender.
    pub defender_angle: f64,
    /// Half-angle of the wedge around the defender's bearing that the arc excludes.
    pub excluded_half_angle: f64,
}

impl NaturalArc {
    /// Points of the arc at `radius`, counter-clockwise from the edge of the
    /// excluded wedge.
    pub fn points(&self, radius: f64, n: usize) -> Vec<Vec2> {
        let n = n.max(2);
        let start = self.defender_angle + self.excluded_half_angle;
        let sweep = 2.0 * (PI - self.excluded_half_angle);
        (0..n)
            .map(|i| Vec2::from_polar(radius, start + sweep * i as f64 / (n - 1) as f64))
            .collect()
    }

    /// True if the polar angle of `p` lies on the arc.
    pub fn covers(&self, p: Vec2) -> bool {
        let off = crate::geometry::wrap_angle(p.angle() - self.defender_angle).abs();
        off >= self.excluded_half_angle
    }
}

/// Natural part of the barrier for a defender at `xd`.
pub fn natural_barrier(xd: Vec2, cfg: &GameConfig) -> Result<NaturalArc> {
    let d = xd.norm();
    if d <= cfg.r {
        return Err(GameError::DegenerateGeometry("defender already guards the target"));
    }
    Ok(NaturalArc {
        radius: d / cfg.nu,
        critical_radius: (d - cfg.r) / cfg.nu,
        defender_angle: xd.angle(),
        excluded_half_angle: cfg.nu.acos(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeTermination {
    /// The locus reached the defender's capture circle.
    CaptureDisk,
    /// The locus reached the target-defender axis.
    SymmetryAxis,
    /// No tangent exists beyond this rotation.
    TangentFailure,
    /// The sweep ran through half a turn without terminating.
    RotationLimit,
}

/// One counter-clockwise sweep of the attacker locus for a fixed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusSweep {
    pub value: f64,
    pub gammas: Vec<f64>,
    /// Counter-clockwise arc, in sweep order.
    pub points: Vec<Vec2>,
    pub gamma_max: f64,
    pub termination: EnvelopeTermination,
}

impl LocusSweep {
    /// Mirror image across the target-defender axis.
    pub fn mirrored(&self, xd: Vec2) -> Vec<Vec2> {
        let a = xd.angle();
        self.points.iter().map(|p| p.rotate(-a).reflect_x().rotate(a)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentLabel {
    Natural,
    EnvelopeCw,
    Capture,
    EnvelopeCcw,
}

impl SegmentLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentLabel::Natural => "natural",
            SegmentLabel::EnvelopeCw => "envelope-cw",
            SegmentLabel::Capture => "capture",
            SegmentLabel::EnvelopeCcw => "envelope-ccw",
        }
    }
}

/// Closed barrier for a fixed defender position; the attacker wins from inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCurve {
    pub defender: Vec2,
    pub natural: NaturalArc,
    pub envelope: LocusSweep,
    /// Closed polyline with a label per vertex.
    pub points: Vec<(Vec2, SegmentLabel)>,
}

impl BarrierCurve {
    pub fn polygon(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn gamma_max(&self) -> f64 {
        self.envelope.gamma_max
    }

    pub fn termination(&self) -> EnvelopeTermination {
        self.envelope.termination
    }

    pub fn contains(&self, p: Vec2) -> bool {
        winding_number(p, &self.polygon()) != 0
    }

    /// Largest gap between consecutive pieces, including the closing edge.
    pub fn closure_gap(&self) -> f64 {
        let pts = &self.points;
        let mut gap: f64 = 0.0;
        for i in 0..pts.len() {
            let (a, la) = pts[i];
            let (b, lb) = pts[(i + 1) % pts.len()];
            if la != lb {
                gap = gap.max(a.distance(b));
            }
        }
        gap
    }

    /// True when no two non-adjacent edges cross.
    pub fn is_simple(&self) -> bool {
        let poly = self.polygon();
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (poly[j], poly[(j + 1) % n]);
                if segments_cross(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

/// Canonical frame: defender on the positive x axis.
fn canonical(xd: Vec2) -> Vec2 {
    Vec2::new(xd.norm(), 0.0)
}

#[derive(Clone, Copy)]
enum Probe {
    Point(Vec2),
    Failed,
}

fn probe(value: f64, gamma: f64, xd_c: Vec2, cfg: &GameConfig) -> Probe {
    match locus_entry(value, gamma, xd_c, cfg) {
        Ok(e) => Probe::Point(e.attacker_start()),
        Err(_) => Probe::Failed,
    }
}

/// Termination test values; each turns non-positive once its condition holds.
fn stop_margins(p: Vec2, xd_c: Vec2, cfg: &GameConfig) -> (f64, f64) {
    (p.distance(xd_c) - cfg.r, p.y)
}

/// Sweeps the rotation from zero until the counter-clockwise locus of `value`
/// reaches the capture circle or the symmetry axis.
pub fn locus_sweep(value: f64, xd: Vec2, cfg: &GameConfig) -> Result<LocusSweep> {
    if xd.norm() <= cfg.r {
        return Err(GameError::DegenerateGeometry("defender already guards the target"));
    }
    let xd_c = canonical(xd);
    if let Probe::Failed = probe(value, 0.0, xd_c, cfg) {
        return Err(GameError::NoSolution(format!(
            "no locus at zero rotation for value {value}"
        )));
    }
    let mut termination = EnvelopeTermination::RotationLimit;
    let mut gamma_max = PI;
    let mut prev_gamma = 0.0;
    let mut gamma = COARSE_STEP;
    while gamma <= PI {
        match probe(value, gamma, xd_c, cfg) {
            Probe::Point(p) => {
                let (cap, axis) = stop_margins(p, xd_c, cfg);
                if cap <= 0.0 || axis <= 0.0 {
                    // bisect each fired condition and keep the earlier one
                    let mut best: Option<(f64, EnvelopeTermination)> = None;
                    for (fired, kind) in [
                        (cap <= 0.0, EnvelopeTermination::CaptureDisk),
                        (axis <= 0.0, EnvelopeTermination::SymmetryAxis),
                    ] {
                        if !fired {
                            continue;
                        }
                        let margin = |g: f64| match probe(value, g, xd_c, cfg) {
                            Probe::Point(q) => {
                                let m = stop_margins(q, xd_c, cfg);
                                if kind == EnvelopeTermination::CaptureDisk {
                                    m.0
                                } else {
                                    m.1
                                }
                            }
                            Probe::Failed => f64::NAN,
                        };
                        let g = bisect(margin, prev_gamma, gamma, 1e-12).unwrap_or(gamma);
                        if best.is_none_or(|(b, _)| g < b) {
                            best = Some((g, kind));
                        }
                    }
                    let (g, kind) = best.expect("a condition fired");
                    gamma_max = g;
                    termination = kind;
                    break;
                }
                prev_gamma = gamma;
            }
            Probe::Failed => {
                // locate where tangency is lost
                let mut lo = prev_gamma;
                let mut hi = gamma;
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    match probe(value, mid, xd_c, cfg) {
                        Probe::Point(_) => lo = mid,
                        Probe::Failed => hi = mid,
                    }
                }
                gamma_max = lo;
                // tangency is lost exactly where the locus runs into the capture circle
                termination = match probe(value, lo, xd_c, cfg) {
                    Probe::Point(p) if stop_margins(p, xd_c, cfg).0 <= 10.0 * cfg.tol_pos => {
                        EnvelopeTermination::CaptureDisk
                    }
                    _ => EnvelopeTermination::TangentFailure,
                };
                break;
            }
        }
        gamma += COARSE_STEP;
    }
    let gammas: Vec<f64> = (0..ENVELOPE_SAMPLES)
        .map(|i| gamma_max * i as f64 / (ENVELOPE_SAMPLES - 1) as f64)
        .collect();
    let canon: Vec<Probe> = gammas.par_iter().map(|&g| probe(value, g, xd_c, cfg)).collect();
    let a = xd.angle();
    let mut points = Vec::with_capacity(canon.len());
    let mut kept = Vec::with_capacity(canon.len());
    for (g, p) in gammas.iter().zip(canon) {
        if let Probe::Point(mut p) = p {
            if termination == EnvelopeTermination::SymmetryAxis && *g == gamma_max {
                p.y = p.y.max(0.0);
            }
            points.push(p.rotate(a));
            kept.push(*g);
        }
    }
    if termination == EnvelopeTermination::TangentFailure {
        log::warn!("locus sweep for value {value} lost tangency at rotation {gamma_max}");
    }
    Ok(LocusSweep {
        value,
        gammas: kept,
        points,
        gamma_max,
        termination,
    })
}

/// Counter-clockwise envelope: the sweep at zero value.
pub fn envelope_barrier(xd: Vec2, cfg: &GameConfig) -> Result<LocusSweep> {
    locus_sweep(0.0, xd, cfg)
}

/// Both arcs of a level set: counter-clockwise sweep and its mirror.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub sweep: LocusSweep,
    pub mirrored: Vec<Vec2>,
}

impl LevelSet {
    /// Single polyline running from the clockwise end through the zero-rotation
    /// points to the counter-clockwise end.
    pub fn polyline(&self) -> Vec<Vec2> {
        let mut out: Vec<Vec2> = self.mirrored.iter().rev().copied().collect();
        out.extend(self.sweep.points.iter().copied());
        out
    }
}

pub fn level_set(value: f64, xd: Vec2, cfg: &GameConfig) -> Result<LevelSet> {
    let sweep = locus_sweep(value, xd, cfg)?;
    let mirrored = sweep.mirrored(xd);
    Ok(LevelSet { sweep, mirrored })
}

/// Assembles the closed barrier: natural arc, clockwise envelope, an arc of
/// the capture circle when the envelope ends there, and the counter-clockwise
/// envelope back to the start.
pub fn build_barrier(xd: Vec2, cfg: &GameConfig) -> Result<BarrierCurve> {
    let natural = natural_barrier(xd, cfg)?;
    let envelope = envelope_barrier(xd, cfg)?;
    if envelope.points.is_empty() {
        return Err(GameError::NoSolution("empty envelope".into()));
    }
    let mut points: Vec<(Vec2, SegmentLabel)> = natural
        .points(natural.critical_radius, NATURAL_SAMPLES)
        .into_iter()
        .map(|p| (p, SegmentLabel::Natural))
        .collect();
    let cw = envelope.mirrored(xd);
    points.extend(cw.iter().map(|&p| (p, SegmentLabel::EnvelopeCw)));
    if envelope.termination == EnvelopeTermination::CaptureDisk {
        let a = xd.angle();
        let end = envelope.points.last().expect("non-empty").rotate(-a);
        let xd_c = canonical(xd);
        let alpha = (end - xd_c).angle().abs();
        // from the clockwise end round the target-facing side to the other end
        let start = -alpha;
        let sweep = -(2.0 * PI - 2.0 * alpha);
        for i in 0..=CAPTURE_SAMPLES {
            let ang = start + sweep * i as f64 / CAPTURE_SAMPLES as f64;
            let p = xd_c + Vec2::from_polar(cfg.r, ang);
            points.push((p.rotate(a), SegmentLabel::Capture));
        }
    }
    points.extend(envelope.points.iter().rev().map(|&p| (p, SegmentLabel::EnvelopeCcw)));
    Ok(BarrierCurve {
        defender: xd,
        natural,
        envelope,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    AttackerWin,
    DefenderWin,
    OnBarrier,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::AttackerWin => "attacker-win",
            Region::DefenderWin => "defender-win",
            Region::OnBarrier => "on-barrier",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionReason {
    /// The state is already terminal.
    Terminal,
    NaturalBarrier,
    Dominance,
    /// Sign of the value of the matching trajectory.
    Value,
    /// Fallback: position relative to the assembled barrier.
    BarrierCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub region: Region,
    pub reason: RegionReason,
    pub value: Option<f64>,
    pub gamma: Option<f64>,
    pub phase: PhaseLabel,
}

/// Decides which player wins from `s` under optimal play.
pub fn classify(s: &GameState, cfg: &GameConfig) -> Result<Classification> {
    let separation = s.separation();
    let phase = if separation - cfg.manifold_radius() <= cfg.tol_pos {
        PhaseLabel::II
    } else {
        PhaseLabel::I
    };
    let done = |region, reason| Classification {
        region,
        reason,
        value: None,
        gamma: None,
        phase,
    };
    if separation < cfg.r - cfg.tol_pos || s.rho_d() <= cfg.r {
        return Ok(Classification {
            phase: PhaseLabel::III,
            ..done(Region::DefenderWin, RegionReason::Terminal)
        });
    }
    if s.rho_a() <= cfg.tol_pos {
        return Ok(Classification {
            phase: PhaseLabel::III,
            ..done(Region::AttackerWin, RegionReason::Terminal)
        });
    }
    if s.rho_a() >= s.rho_d() / cfg.nu {
        return Ok(done(Region::DefenderWin, RegionReason::NaturalBarrier));
    }
    if target_in_defender_dominance(s, cfg) {
        return Ok(done(Region::DefenderWin, RegionReason::Dominance));
    }
    if target_in_attacker_dominance(s, cfg) {
        return Ok(done(Region::AttackerWin, RegionReason::Dominance));
    }
    match solve_phase1(s, cfg) {
        Ok(sol) => {
            let region = if sol.value.abs() <= cfg.tol_value {
                Region::OnBarrier
            } else if sol.value > 0.0 {
                Region::DefenderWin
            } else {
                Region::AttackerWin
            };
            Ok(Classification {
                region,
                reason: RegionReason::Value,
                value: Some(sol.value),
                gamma: Some(sol.gamma),
                phase,
            })
        }
        Err(err) => {
            log::debug!("inverse solve failed ({err}); classifying against the barrier curve");
            let barrier = build_barrier(s.defender, cfg)?;
            let region = if barrier.contains(s.attacker) {
                Region::AttackerWin
            } else {
                Region::DefenderWin
            };
            Ok(done(region, RegionReason::BarrierCurve))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(nu: f64) -> GameConfig {
        GameConfig::new(nu, 1.0).unwrap()
    }

    #[test]
    fn natural_arc_examples() {
        let arc = natural_barrier(Vec2::new(4.0, 0.0), &cfg(0.5)).unwrap();
        assert_abs_diff_eq!(arc.radius, 8.0);
        assert_abs_diff_eq!(arc.excluded_half_angle, PI / 3.0, epsilon = 1e-12);
        let half = natural_barrier(Vec2::new(4.0, 0.0), &cfg(0.25)).unwrap();
        assert_abs_diff_eq!(half.radius, 2.0 * arc.radius);
        let fast = natural_barrier(Vec2::new(4.0, 0.0), &cfg(0.999)).unwrap();
        assert!(fast.excluded_half_angle < 0.05);
        assert!(natural_barrier(Vec2::new(0.5, 0.0), &cfg(0.5)).is_err());
        assert!(arc.covers(Vec2::new(-1.0, 0.0)));
        assert!(!arc.covers(Vec2::new(1.0, 0.1)));
    }

    #[test]
    fn envelope_starts_on_critical_circle() {
        let c = cfg(0.5);
        let xd = Vec2::new(4.0, 0.0);
        let env = envelope_barrier(xd, &c).unwrap();
        let p = env.points[0];
        assert_abs_diff_eq!(p.norm(), 3.0 / 0.5, epsilon = 10.0 * c.tol_pos);
    }

    #[test]
    fn termination_kinds_differ() {
        let c = cfg(0.5);
        let far = envelope_barrier(Vec2::new(4.0, 0.0), &c).unwrap();
        let near = envelope_barrier(Vec2::new(3.0, 0.0), &c).unwrap();
        assert_eq!(far.termination, EnvelopeTermination::SymmetryAxis);
        assert_eq!(near.termination, EnvelopeTermination::CaptureDisk);
    }

    #[test]
    fn assembled_barrier_is_closed_and_simple() {
        for (nu, d) in [(0.5, 4.0), (0.5, 3.0), (0.75, 3.5)] {
            let c = cfg(nu);
            let b = build_barrier(Vec2::new(d, 0.0), &c).unwrap();
            assert!(b.closure_gap() <= 10.0 * c.tol_pos, "gap {}", b.closure_gap());
            assert!(b.is_simple());
            assert!(b.contains(Vec2::ZERO));
            assert!(!b.contains(Vec2::new(3.0 * d / nu, 0.0)));
        }
    }

    #[test]
    fn level_set_zero_matches_envelope() {
        let c = cfg(0.5);
        let xd = Vec2::new(4.0, 0.0);
        let env = envelope_barrier(xd, &c).unwrap();
        let ls = level_set(0.0, xd, &c).unwrap();
        for (a, b) in env.points.iter().zip(&ls.sweep.points) {
            assert!(a.distance(*b) <= c.tol_pos);
        }
    }

    #[test]
    fn classify_natural_side() {
        let c = cfg(0.5);
        let xd = Vec2::new(4.0, 0.0);
        let outside = GameState::new(xd, Vec2::new(-1.01 * 8.0, 0.0));
        let cl = classify(&outside, &c).unwrap();
        assert_eq!(cl.region, Region::DefenderWin);
        assert_eq!(cl.reason, RegionReason::NaturalBarrier);
        // inside the sufficient radius but outside the tight one: still the defender's
        let between = GameState::new(xd, Vec2::new(-0.99 * 8.0, 0.0));
        assert_eq!(classify(&between, &c).unwrap().region, Region::DefenderWin);
        let inside = GameState::new(xd, Vec2::new(-0.99 * 6.0, 0.0));
        let cl = classify(&inside, &c).unwrap();
        assert_eq!(cl.region, Region::AttackerWin);
        assert_eq!(cl.reason, RegionReason::Dominance);
    }

    #[test]
    fn classify_terminal_states() {
        let c = cfg(0.5);
        let captured = GameState::new(Vec2::new(3.0, 0.0), Vec2::new(3.5, 0.0));
        assert_eq!(classify(&captured, &c).unwrap().reason, RegionReason::Terminal);
        let arrived = GameState::new(Vec2::new(3.0, 0.0), Vec2::ZERO);
        assert_eq!(classify(&arrived, &c).unwrap().region, Region::AttackerWin);
    }

    #[test]
    fn classify_agrees_with_barrier() {
        let c = cfg(0.5);
        let xd = Vec2::new(4.0, 0.0);
        let b = build_barrier(xd, &c).unwrap();
        for i in (0..b.envelope.points.len()).step_by(32).skip(1) {
            let p = b.envelope.points[i];
            for (k, expect) in [(0.98, Region::AttackerWin), (1.02, Region::DefenderWin)] {
                let s = GameState::new(xd, p * k);
                assert_eq!(b.contains(p * k), expect == Region::AttackerWin);
                let cl = classify(&s, &c).unwrap();
                assert_eq!(cl.region, expect, "point {p} scale {k}: {cl:?}");
            }
        }
    }
}
