//! Dominance regions: the Cartesian oval bounding the defender's region and the
//! straight-line reachability test for the attacker.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::geometry::{los_angle, GameConfig, GameState, Vec2};
use crate::numerics::{bisect, golden_section_min};

const SEGMENT_SAMPLES: usize = 256;
const ACOS_GUARD: f64 = 1e-9;

/// Which root of the oval's distance equation to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OvalBranch {
    Near,
    Far,
}

/// One sample of the oval boundary, parameterised by the angle off the
/// attacker-to-defender line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvalSample {
    pub phi_bar: f64,
    pub near_distance: f64,
    pub far_distance: f64,
    pub near_point: Vec2,
    pub far_point: Vec2,
}

/// Sampled boundary of the defender's dominance region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianOval {
    pub state: GameState,
    pub nu: f64,
    pub r: f64,
    pub phi_bar_max: f64,
    pub samples: Vec<OvalSample>,
}

impl CartesianOval {
    /// Samples both branches at `n` uniformly spaced angles over the support.
    pub fn new(s: &GameState, cfg: &GameConfig, n: usize) -> Result<Self> {
        let n = n.max(2);
        let support = phi_bar_max(s, cfg)?;
        check_outside_capture(s, cfg)?;
        let lam = los_angle(s)?;
        let samples = (0..n)
            .map(|i| {
                let phi_bar = -support + 2.0 * support * i as f64 / (n - 1) as f64;
                let (near, far) = oval_distances(s, cfg, phi_bar);
                let dir = Vec2::unit(phi_bar + lam);
                OvalSample {
                    phi_bar,
                    near_distance: near,
                    far_distance: far,
                    near_point: s.attacker + dir * near,
                    far_point: s.attacker + dir * far,
                }
            })
            .collect();
        Ok(Self {
            state: *s,
            nu: cfg.nu,
            r: cfg.r,
            phi_bar_max: support,
            samples,
        })
    }

    /// Closed boundary: near branch forward, far branch back.
    pub fn boundary(&self) -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = self.samples.iter().map(|s| s.near_point).collect();
        pts.extend(self.samples.iter().rev().map(|s| s.far_point));
        pts
    }
}

/// Signed margin of the defender's reach condition: non-positive inside the
/// defender's dominance region.
pub fn defender_margin(p: Vec2, s: &GameState, cfg: &GameConfig) -> f64 {
    p.distance(s.defender) - cfg.r - cfg.nu * p.distance(s.attacker)
}

pub fn in_defender_dominance(p: Vec2, s: &GameState, cfg: &GameConfig) -> bool {
    defender_margin(p, s, cfg) <= 0.0
}

/// True if the attacker can run straight to `p` without the segment ever
/// entering the defender's dominance region.
pub fn in_attacker_dominance(p: Vec2, s: &GameState, cfg: &GameConfig) -> bool {
    min_segment_margin(p, s, cfg) > 0.0
}

/// Smallest defender margin along the segment from the attacker to `p`.
pub fn min_segment_margin(p: Vec2, s: &GameState, cfg: &GameConfig) -> f64 {
    let at = |mu: f64| defender_margin(s.attacker.lerp(p, mu), s, cfg);
    let step = 1.0 / SEGMENT_SAMPLES as f64;
    let values: Vec<f64> = (0..=SEGMENT_SAMPLES).map(|i| at(i as f64 * step)).collect();
    let mut best = values.iter().copied().fold(f64::INFINITY, f64::min);
    if best <= 0.0 {
        // locate the first entry for diagnostics; the answer is already known
        if let Some(i) = values.windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0) {
            if let Ok(mu) = bisect(at, i as f64 * step, (i + 1) as f64 * step, cfg.tol_pos) {
                log::trace!("segment enters defender region at mu = {mu}");
            }
        }
        return best;
    }
    // refine every interior local minimum between samples
    for i in 1..SEGMENT_SAMPLES {
        if values[i] <= values[i - 1] && values[i] <= values[i + 1] {
            let lo = (i - 1) as f64 * step;
            let hi = (i + 1) as f64 * step;
            let (_, v) = golden_section_min(at, lo, hi, 1e-12);
            best = best.min(v);
        }
    }
    best
}

pub fn target_in_defender_dominance(s: &GameState, cfg: &GameConfig) -> bool {
    in_defender_dominance(Vec2::ZERO, s, cfg)
}

pub fn target_in_attacker_dominance(s: &GameState, cfg: &GameConfig) -> bool {
    in_attacker_dominance(Vec2::ZERO, s, cfg)
}

fn check_outside_capture(s: &GameState, cfg: &GameConfig) -> Result<()> {
    let separation = s.separation();
    if separation <= cfg.r {
        return Err(GameError::CaptureGeometry {
            separation,
            radius: cfg.r,
        });
    }
    Ok(())
}

/// Half-width of the angular support of the oval as seen from the attacker.
pub fn phi_bar_max(s: &GameState, cfg: &GameConfig) -> Result<f64> {
    let big_r = s.separation();
    let r = cfg.r;
    if big_r < r {
        return Err(GameError::CaptureGeometry {
            separation: big_r,
            radius: r,
        });
    }
    let nu = cfg.nu;
    let arg = (((1.0 - nu * nu) * (big_r * big_r - r * r)).sqrt() - nu * r) / big_r;
    if arg.abs() > 1.0 + ACOS_GUARD {
        log::warn!("oval support argument {arg} outside [-1, 1]; clamping");
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

fn oval_distances(s: &GameState, cfg: &GameConfig, phi_bar: f64) -> (f64, f64) {
    let big_r = s.separation();
    let (nu, r) = (cfg.nu, cfg.r);
    let eta = nu * r + big_r * phi_bar.cos();
    let k = 1.0 - nu * nu;
    let disc = (eta * eta - k * (big_r * big_r - r * r)).max(0.0).sqrt();
    ((eta - disc) / k, (eta + disc) / k)
}

/// Distance from the attacker to the oval along the ray at angle `phi_bar` off
/// the attacker-to-defender line.
pub fn oval_distance(s: &GameState, cfg: &GameConfig, phi_bar: f64, branch: OvalBranch) -> Result<f64> {
    check_outside_capture(s, cfg)?;
    let support = phi_bar_max(s, cfg)?;
    if phi_bar.abs() > support + ACOS_GUARD {
        return Err(GameError::OutOfSupport { phi_bar, support });
    }
    let (near, far) = oval_distances(s, cfg, phi_bar);
    Ok(match branch {
        OvalBranch::Near => near,
        OvalBranch::Far => far,
    })
}

pub fn oval_point(s: &GameState, cfg: &GameConfig, phi_bar: f64, branch: OvalBranch) -> Result<Vec2> {
    let l = oval_distance(s, cfg, phi_bar, branch)?;
    Ok(s.attacker + Vec2::unit(phi_bar + los_angle(s)?) * l)
}

/// True when neither player can simply run for the target.
pub fn is_blocking(s: &GameState, cfg: &GameConfig) -> Result<bool> {
    check_outside_capture(s, cfg)?;
    Ok(!target_in_defender_dominance(s, cfg) && !target_in_attacker_dominance(s, cfg))
}
