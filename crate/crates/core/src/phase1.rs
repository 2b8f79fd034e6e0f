//! Free-motion phase: planar embedding of constrained trajectories, tangent
//! entry points, the attacker locus and the inverse map from a planar state to
//! its entry point on the constraint manifold.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::geometry::{state_frame, wrap_angle, Chirality, GameConfig, GameState, ReducedState, Vec2};
use crate::numerics::bisect;
use crate::phase2::{self, integrate_forward, Phase2Trajectory, TerminalKind, FORWARD_STEP_BUDGET};

const CACHE_LIMIT: usize = 128;
const MEMO_LIMIT: usize = 8;
const CONTINUATION_LEVELS: usize = 8;
const NEWTON_ITERATIONS: usize = 50;
const SEED_GRID: usize = 16;

/// One sample of a constrained trajectory placed in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSample {
    /// Time relative to the terminal instant (non-positive).
    pub t: f64,
    pub defender: Vec2,
    pub attacker: Vec2,
    /// Defender velocity (speed `nu`).
    pub defender_velocity: Vec2,
    /// Attacker velocity (unit speed).
    pub attacker_velocity: Vec2,
}

/// A constrained trajectory of fixed value rotated about the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPhase2 {
    pub value: f64,
    /// Polar angle of the defender's terminal position.
    pub gamma: f64,
    /// Samples in forward time order, terminal last.
    pub samples: Vec<EmbeddedSample>,
    /// Time spanned by the samples.
    pub duration: f64,
}

/// Where a straight free-motion leg joins a constrained trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentEntry {
    pub defender_entry: Vec2,
    pub attacker_entry: Vec2,
    /// Unit headings at the entry.
    pub defender_velocity: Vec2,
    pub attacker_velocity: Vec2,
    /// Remaining constrained time after the entry.
    pub tau_ii: f64,
    /// Free-motion time to reach the entry.
    pub tau_i: f64,
    /// Heading mismatch between the free leg and the path tangent.
    pub residual_angle: f64,
}

impl TangentEntry {
    /// Attacker start that arrives at its entry together with the defender.
    pub fn attacker_start(&self) -> Vec2 {
        self.attacker_entry - self.attacker_velocity * self.tau_i
    }
}

/// Free-motion entry point for a planar state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase1Entry {
    /// Reduced state at the moment the separation reaches the capture radius.
    pub entry_state: ReducedState,
    pub chirality: Chirality,
    pub defender_entry: Vec2,
    pub attacker_entry: Vec2,
    /// Unit headings of both players during the free leg.
    pub defender_heading: Vec2,
    pub attacker_heading: Vec2,
    pub tau_i: f64,
    /// Distance between the reconstructed and the actual attacker position.
    pub residual: f64,
}

/// Full inverse solution: entry point plus value and rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Solution {
    pub value: f64,
    /// Terminal defender bearing relative to the current defender bearing.
    pub gamma: f64,
    pub terminal_kind: TerminalKind,
    pub entry: Phase1Entry,
    pub tau_i: f64,
    pub tau_ii: f64,
    pub defender_heading: Vec2,
    pub attacker_heading: Vec2,
}

type CacheKey = ([u64; 5], u64, u64);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<Phase2Trajectory>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<Phase2Trajectory>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Retrograde trajectory of the given value out to `rho_limit`, memoised.
pub fn cached_value_trajectory(value: f64, cfg: &GameConfig, rho_limit: f64) -> Result<Arc<Phase2Trajectory>> {
    let key = (cfg.cache_key(), value.to_bits(), rho_limit.to_bits());
    if let Some(t) = cache().read().expect("trajectory cache poisoned").get(&key) {
        return Ok(Arc::clone(t));
    }
    let traj = Arc::new(phase2::value_trajectory(value, cfg, rho_limit)?);
    let mut guard = cache().write().expect("trajectory cache poisoned");
    if guard.len() >= CACHE_LIMIT {
        guard.clear();
    }
    guard.insert(key, Arc::clone(&traj));
    Ok(traj)
}

/// Range limit for trajectories used against a defender at range `rho_d`.
/// Entry points are never farther out than the defender itself.
pub fn range_limit_for(rho_d: f64, cfg: &GameConfig) -> f64 {
    (rho_d + cfg.manifold_radius()).ceil()
}

fn embed(traj: &Phase2Trajectory, value: f64, rotation: f64, cfg: &GameConfig) -> EmbeddedPhase2 {
    let r = cfg.manifold_radius();
    let nu = cfg.nu;
    let samples: Vec<EmbeddedSample> = traj
        .samples
        .iter()
        .rev()
        .map(|s| {
            let b = s.beta + rotation;
            let defender = Vec2::from_polar(s.rho_d, b);
            let sight = b + s.theta;
            EmbeddedSample {
                t: s.t,
                defender,
                attacker: defender + Vec2::from_polar(r, sight),
                defender_velocity: Vec2::from_polar(nu, sight + s.controls.defender),
                attacker_velocity: Vec2::unit(sight + s.controls.attacker),
            }
        })
        .collect();
    let duration = samples.first().map_or(0.0, |s| -s.t);
    EmbeddedPhase2 {
        value,
        gamma: rotation,
        samples,
        duration,
    }
}

/// Constrained trajectory of value `value` with its terminal defender position
/// at polar angle `gamma`.
pub fn embed_phase2(value: f64, gamma: f64, cfg: &GameConfig) -> Result<EmbeddedPhase2> {
    let traj = cached_value_trajectory(value, cfg, cfg.rho_max)?;
    Ok(embed(&traj, value, gamma, cfg))
}

fn hermite(p0: Vec2, m0: Vec2, p1: Vec2, m1: Vec2, dt: f64, s: f64) -> (Vec2, Vec2) {
    let s2 = s * s;
    let s3 = s2 * s;
    let pos = p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + m0 * (dt * (s3 - 2.0 * s2 + s))
        + p1 * (-2.0 * s3 + 3.0 * s2)
        + m1 * (dt * (s3 - s2));
    let vel = p0 * ((6.0 * s2 - 6.0 * s) / dt)
        + m0 * (3.0 * s2 - 4.0 * s + 1.0)
        + p1 * ((-6.0 * s2 + 6.0 * s) / dt)
        + m1 * (3.0 * s2 - 2.0 * s);
    (pos, vel)
}

struct Interpolated {
    t: f64,
    defender: Vec2,
    attacker: Vec2,
    defender_dir: Vec2,
    attacker_dir: Vec2,
}

fn interpolate(a: &EmbeddedSample, b: &EmbeddedSample, s: f64) -> Interpolated {
    let dt = b.t - a.t;
    let (defender, dv) = hermite(a.defender, a.defender_velocity, b.defender, b.defender_velocity, dt, s);
    let (attacker, av) = hermite(a.attacker, a.attacker_velocity, b.attacker, b.attacker_velocity, dt, s);
    Interpolated {
        t: a.t + dt * s,
        defender,
        attacker,
        defender_dir: dv
            .normalized()
            .unwrap_or_else(|| a.defender_velocity / a.defender_velocity.norm()),
        attacker_dir: av.normalized().unwrap_or(a.attacker_velocity),
    }
}

fn entry_from(p: Interpolated, xd: Vec2, cfg: &GameConfig) -> TangentEntry {
    let leg = p.defender - xd;
    let residual_angle = match leg.normalized() {
        Some(u) => u.cross(p.defender_dir).abs().asin(),
        None => 0.0,
    };
    TangentEntry {
        defender_entry: p.defender,
        attacker_entry: p.attacker,
        defender_velocity: p.defender_dir,
        attacker_velocity: p.attacker_dir,
        tau_ii: -p.t,
        tau_i: leg.norm() / cfg.nu,
        residual_angle,
    }
}

/// Point of the defender path whose tangent passes through `xd`, scanning from
/// the start of the constrained trajectory toward its terminal end.
pub fn tangent_entry(xd: Vec2, traj: &EmbeddedPhase2, cfg: &GameConfig) -> Result<TangentEntry> {
    let samples = &traj.samples;
    if samples.is_empty() {
        return Err(GameError::NoSolution("empty trajectory".into()));
    }
    let at_sample = |s: &EmbeddedSample| Interpolated {
        t: s.t,
        defender: s.defender,
        attacker: s.attacker,
        defender_dir: s.defender_velocity / cfg.nu,
        attacker_dir: s.attacker_velocity,
    };
    if let Some(s) = samples.iter().find(|s| s.defender.distance(xd) <= cfg.tol_pos) {
        return Ok(entry_from(at_sample(s), xd, cfg));
    }
    let cross = |dir: Vec2, d: Vec2| dir.cross(d - xd);
    let along = |dir: Vec2, d: Vec2| dir.dot(d - xd);
    let mut prev = cross(samples[0].defender_velocity, samples[0].defender);
    if prev == 0.0 && along(samples[0].defender_velocity, samples[0].defender) > 0.0 {
        return Ok(entry_from(at_sample(&samples[0]), xd, cfg));
    }
    let last = samples.last().expect("non-empty");
    let terminal_tangent = {
        let dir = last.defender_velocity / cfg.nu;
        (last.defender - xd)
            .normalized()
            .is_some_and(|u| u.cross(dir).abs() <= cfg.tol_angle && u.dot(dir) > 0.0)
    };
    for j in 1..samples.len() {
        let (a, b) = (&samples[j - 1], &samples[j]);
        let cur = cross(b.defender_velocity, b.defender);
        let flips = (prev < 0.0 && cur >= 0.0) || (prev > 0.0 && cur <= 0.0);
        prev = cur;
        if !flips {
            continue;
        }
        if j == samples.len() - 1 && terminal_tangent {
            // a flip this close to the terminal is the terminal tangency seen through rounding
            return Ok(entry_from(at_sample(last), xd, cfg));
        }
        let f = |s: f64| {
            let p = interpolate(a, b, s);
            cross(p.defender_dir, p.defender)
        };
        let s = bisect(f, 0.0, 1.0, 1e-14).unwrap_or(1.0);
        let p = interpolate(a, b, s);
        if along(p.defender_dir, p.defender) <= 0.0 {
            continue;
        }
        let entry = entry_from(p, xd, cfg);
        if entry.residual_angle > cfg.tol_angle {
            log::debug!("tangent residual {} exceeds tolerance", entry.residual_angle);
        }
        return Ok(entry);
    }
    // tangency exactly at the terminal sample is lost to rounding in the sign test
    if terminal_tangent {
        return Ok(entry_from(at_sample(last), xd, cfg));
    }
    Err(GameError::NoSolution(
        "no tangent from the defender to the trajectory".into(),
    ))
}

/// Tangent entry for value `value` with the terminal rotated by `gamma` from
/// the defender's bearing.
pub fn locus_entry(value: f64, gamma: f64, xd: Vec2, cfg: &GameConfig) -> Result<TangentEntry> {
    let traj = cached_value_trajectory(value, cfg, range_limit_for(xd.norm(), cfg))?;
    let embedded = embed(&traj, value, xd.angle() + gamma, cfg);
    tangent_entry(xd, &embedded, cfg)
}

/// Attacker start that joins the trajectory `(value, gamma)` in step with the
/// defender starting at `xd`.
pub fn attacker_locus(value: f64, gamma: f64, xd: Vec2, cfg: &GameConfig) -> Result<Vec2> {
    Ok(locus_entry(value, gamma, xd, cfg)?.attacker_start())
}

/// Free-leg geometry in the line-of-sight frame of an entry state: defender at
/// the origin, attacker at `(r, 0)`.
#[derive(Debug, Clone, Copy)]
struct EntryImage {
    target: Vec2,
    defender_start: Vec2,
    attacker_start: Vec2,
    defender_dir: Vec2,
    attacker_dir: Vec2,
    tau: f64,
}

impl EntryImage {
    fn range(&self) -> f64 {
        self.defender_start.distance(self.target)
    }

    fn bearing(&self) -> f64 {
        wrap_angle((self.attacker_start - self.defender_start).angle() - (self.defender_start - self.target).angle())
    }
}

fn entry_image(entry: ReducedState, separation: f64, cfg: &GameConfig) -> Option<EntryImage> {
    let r = cfg.manifold_radius();
    let nu = cfg.nu;
    let phi_d = phase2::optimal_defender_heading(entry, cfg).ok()?;
    let phi_a = phase2::attacker_response(phi_d, cfg);
    let defender_dir = Vec2::unit(phi_d);
    let attacker_dir = Vec2::unit(phi_a);
    let lateral = phi_a.sin() - nu * phi_d.sin();
    let gap = (separation * separation - r * r).max(0.0).sqrt();
    let tau = if gap == 0.0 {
        0.0
    } else if lateral.abs() < 1e-300 {
        return None;
    } else {
        gap / lateral.abs()
    };
    let (s, c) = entry.theta.sin_cos();
    Some(EntryImage {
        target: Vec2::new(-entry.rho_d * c, entry.rho_d * s),
        defender_start: defender_dir * (-nu * tau),
        attacker_start: Vec2::new(r, 0.0) - attacker_dir * tau,
        defender_dir,
        attacker_dir,
        tau,
    })
}

struct InverseProblem<'a> {
    cfg: &'a GameConfig,
    rho_d: f64,
    theta: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

impl InverseProblem<'_> {
    fn residual(&self, x: [f64; 2], separation: f64) -> Option<[f64; 2]> {
        let img = entry_image(ReducedState::new(x[0], x[1]), separation, self.cfg)?;
        let res = [img.range() - self.rho_d, wrap_angle(img.bearing() - self.theta)];
        (res[0].is_finite() && res[1].is_finite()).then_some(res)
    }

    fn clamp(&self, x: [f64; 2]) -> [f64; 2] {
        [x[0].clamp(self.lo[0], self.hi[0]), x[1].clamp(self.lo[1], self.hi[1])]
    }

    fn norm(res: [f64; 2], scale: f64) -> f64 {
        res[0].hypot(res[1] * scale)
    }

    /// Damped Newton with a forward-difference Jacobian.
    fn newton(&self, x0: [f64; 2], separation: f64) -> Option<([f64; 2], f64)> {
        let scale = separation.max(self.cfg.manifold_radius());
        let mut x = self.clamp(x0);
        let mut f = self.residual(x, separation)?;
        let mut fnorm = Self::norm(f, scale);
        for _ in 0..NEWTON_ITERATIONS {
            if fnorm < 1e-12 {
                break;
            }
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut h = 1e-7 * (1.0 + x[k].abs());
                if x[k] + h > self.hi[k] {
                    h = -h;
                }
                let mut xp = x;
                xp[k] += h;
                let fp = self.residual(xp, separation)?;
                jac[0][k] = (fp[0] - f[0]) / h;
                jac[1][k] = (fp[1] - f[1]) / h;
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                return None;
            }
            let dx = [
                -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
                -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
            ];
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let xn = self.clamp([x[0] + lambda * dx[0], x[1] + lambda * dx[1]]);
                if let Some(fn_) = self.residual(xn, separation) {
                    let n = Self::norm(fn_, scale);
                    if n < fnorm {
                        x = xn;
                        f = fn_;
                        fnorm = n;
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Some((x, fnorm))
    }
}

thread_local! {
    static MEMO: RefCell<Vec<([u64; 9], Phase1Entry)>> = const { RefCell::new(Vec::new()) };
}

fn memo_key(s: &GameState, cfg: &GameConfig, seed: Option<ReducedState>) -> [u64; 9] {
    let k = cfg.cache_key();
    let (a, b) = seed.map_or((u64::MAX, u64::MAX), |x| (x.rho_d.to_bits(), x.theta.to_bits()));
    [
        s.defender.x.to_bits() ^ k[0].rotate_left(7) ^ k[2].rotate_left(19),
        s.defender.y.to_bits() ^ k[1].rotate_left(13),
        s.attacker.x.to_bits(),
        s.attacker.y.to_bits(),
        a,
        b,
        k[3],
        k[4],
        cfg.tol_angle.to_bits(),
    ]
}

/// Entry point on the constraint manifold reached by straight free legs from
/// `s`. An optional seed (a previous entry state) is tried first.
pub fn phase1_entry(s: &GameState, cfg: &GameConfig, seed: Option<ReducedState>) -> Result<Phase1Entry> {
    let key = memo_key(s, cfg, seed);
    if let Some(hit) = MEMO.with(|m| m.borrow().iter().find(|(k, _)| *k == key).map(|(_, e)| *e)) {
        return Ok(hit);
    }
    let entry = compute_entry(s, cfg, seed)?;
    MEMO.with(|m| {
        let mut m = m.borrow_mut();
        if m.len() >= MEMO_LIMIT {
            m.remove(0);
        }
        m.push((key, entry));
    });
    Ok(entry)
}

fn compute_entry(s: &GameState, cfg: &GameConfig, seed: Option<ReducedState>) -> Result<Phase1Entry> {
    let r = cfg.manifold_radius();
    let frame = state_frame(s, cfg)?;
    let separation = frame.separation;
    if separation < r - cfg.tol_pos {
        return Err(GameError::CaptureGeometry { separation, radius: r });
    }
    if frame.rho_d < r {
        return Err(GameError::NoSolution(
            "defender already within reach of the target".into(),
        ));
    }
    let problem = InverseProblem {
        cfg,
        rho_d: frame.rho_d,
        theta: frame.theta,
        lo: [r, 0.0],
        hi: [frame.rho_d.max(r), PI],
    };
    let accept = 1e-9_f64.max(cfg.tol_pos * 1e-3);

    let mut candidates: Vec<([f64; 2], f64)> = Vec::new();
    if separation - r <= cfg.tol_pos {
        candidates.push(([frame.rho_d, frame.theta], 0.0));
    }
    if candidates.is_empty() {
        if let Some(seed) = seed {
            if let Some(sol) = problem.newton([seed.rho_d, seed.theta], separation) {
                if sol.1 <= accept {
                    candidates.push(sol);
                }
            }
        }
    }
    if candidates.is_empty() {
        if let Some(sol) = continuation(&problem, separation, r) {
            if sol.1 <= accept {
                candidates.push(sol);
            }
        }
    }
    if candidates.is_empty() {
        // coarse seeding over the whole entry domain
        let mut seeds: Vec<([f64; 2], f64)> = Vec::new();
        let scale = separation.max(r);
        for i in 0..SEED_GRID {
            for j in 0..SEED_GRID {
                let x = [
                    problem.lo[0] + (problem.hi[0] - problem.lo[0]) * (i as f64 + 0.5) / SEED_GRID as f64,
                    PI * (j as f64 + 0.5) / SEED_GRID as f64,
                ];
                if let Some(f) = problem.residual(x, separation) {
                    seeds.push((x, InverseProblem::norm(f, scale)));
                }
            }
        }
        seeds.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (x, _) in seeds.into_iter().take(6) {
            if let Some(sol) = problem.newton(x, separation) {
                if sol.1 <= accept {
                    candidates.push(sol);
                }
            }
        }
        if candidates.len() > 1 {
            log::debug!(
                "{} candidate entries for {s:?}; keeping the smallest residual",
                candidates.len()
            );
        }
    }
    let (x, _) = candidates
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| GameError::NoSolution(format!("no entry point found for {s:?}")))?;
    build_entry(s, cfg, &frame, ReducedState::new(x[0], x[1]), separation)
}

fn continuation(problem: &InverseProblem, separation: f64, r: f64) -> Option<([f64; 2], f64)> {
    let mut x = [problem.rho_d, problem.theta];
    let mut level = 0.0;
    let mut step = 1.0 / CONTINUATION_LEVELS as f64;
    let mut last = None;
    while level < 1.0 {
        let next = (level + step).min(1.0);
        let sep = r + (separation - r) * next;
        match problem.newton(x, sep) {
            Some((xn, n)) if n <= 1e-9 => {
                x = xn;
                level = next;
                last = Some((xn, n));
                step = (step * 2.0).min(0.25);
            }
            _ => {
                step *= 0.5;
                if step < 1e-4 {
                    return None;
                }
            }
        }
    }
    last
}

fn build_entry(
    s: &GameState,
    cfg: &GameConfig,
    frame: &crate::geometry::StateFrame,
    entry_state: ReducedState,
    separation: f64,
) -> Result<Phase1Entry> {
    let img = entry_image(entry_state, separation, cfg)
        .ok_or_else(|| GameError::Numerical("entry image undefined".into()))?;
    let chi = frame.chirality.sign();
    let base = s.defender.angle();
    // entry frame -> canonical frame (defender on +x, attacker counter-clockwise)
    let spin = -(img.defender_start - img.target).angle();
    let to_canon = |p: Vec2| (p - img.target).rotate(spin);
    let dir_canon = |v: Vec2| v.rotate(spin);
    // canonical -> world
    let to_world_dir = |v: Vec2| Vec2::new(v.x, chi * v.y).rotate(base);
    let to_world = |p: Vec2| to_world_dir(p);

    let defender_entry = to_world(to_canon(Vec2::ZERO));
    let attacker_entry = to_world(to_canon(Vec2::new(cfg.manifold_radius(), 0.0)));
    let defender_heading = to_world_dir(dir_canon(img.defender_dir));
    let attacker_heading = to_world_dir(dir_canon(img.attacker_dir));
    let attacker_start = attacker_entry - attacker_heading * img.tau;
    Ok(Phase1Entry {
        entry_state,
        chirality: frame.chirality,
        defender_entry,
        attacker_entry,
        defender_heading,
        attacker_heading,
        tau_i: img.tau,
        residual: attacker_start.distance(s.attacker),
    })
}

/// Solves for the entry point, then integrates the constrained phase to obtain
/// the value and the terminal rotation.
pub fn solve_phase1(s: &GameState, cfg: &GameConfig) -> Result<Phase1Solution> {
    solve_phase1_seeded(s, cfg, None)
}

pub fn solve_phase1_seeded(s: &GameState, cfg: &GameConfig, seed: Option<ReducedState>) -> Result<Phase1Solution> {
    let entry = phase1_entry(s, cfg, seed)?;
    let traj = integrate_forward(entry.entry_state, cfg, FORWARD_STEP_BUDGET)?;
    let last = traj.samples.last().expect("forward trajectory has samples");
    let chi = entry.chirality.sign();
    let entry_bearing = wrap_angle(entry.defender_entry.angle() - s.defender.angle());
    let gamma = wrap_angle(entry_bearing + chi * last.beta);
    Ok(Phase1Solution {
        value: traj.value,
        gamma,
        terminal_kind: traj.terminal_kind,
        tau_i: entry.tau_i,
        tau_ii: last.t,
        defender_heading: entry.defender_heading,
        attacker_heading: entry.attacker_heading,
        entry,
    })
}
