//! Discrete-time rollouts, terminal detection, traces and parameter sweeps.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{classify, Classification, Region};
use crate::error::{GameError, Result};
use crate::geometry::{GameConfig, GameState, Vec2};
use crate::numerics::first_circle_crossing;
use crate::strategies::{attacker_security, defender_security, PhaseLabel, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    DefenderWin,
    AttackerWin,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::DefenderWin => "defender-win",
            Outcome::AttackerWin => "attacker-win",
            Outcome::Timeout => "timeout",
        }
    }
}

/// What ended the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Capture,
    DefenderAtTarget,
    AttackerAtTarget,
    Timeout,
}

impl Termination {
    pub fn outcome(self) -> Outcome {
        match self {
            Termination::Capture | Termination::DefenderAtTarget => Outcome::DefenderWin,
            Termination::AttackerAtTarget => Outcome::AttackerWin,
            Termination::Timeout => Outcome::Timeout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub defender: Vec2,
    pub attacker: Vec2,
    pub phase: PhaseLabel,
    pub separation: f64,
    pub rho_d: f64,
    pub rho_a: f64,
}

impl TraceRow {
    fn new(t: f64, s: &GameState, phase: PhaseLabel) -> Self {
        TraceRow {
            t,
            defender: s.defender,
            attacker: s.attacker,
            phase,
            separation: s.separation(),
            rho_d: s.rho_d(),
            rho_a: s.rho_a(),
        }
    }

    pub fn state(&self) -> GameState {
        GameState::new(self.defender, self.attacker)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    /// One row per step; the last row is the terminal one.
    pub rows: Vec<TraceRow>,
    pub outcome: Outcome,
    pub termination: Termination,
    pub t_f: f64,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,xD_x,xD_y,xA_x,xA_y,phase,R,rhoD,rhoA")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.defender.x,
                r.defender.y,
                r.attacker.x,
                r.attacker.y,
                r.phase.as_str(),
                r.separation,
                r.rho_d,
                r.rho_a
            )?;
        }
        writeln!(w, "outcome,{},{}", self.outcome.as_str(), self.t_f)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn final_state(&self) -> GameState {
        self.rows.last().expect("trace has rows").state()
    }
}

/// A rollout stopped by a strategy error; carries the rows recorded so far.
#[derive(Debug, thiserror::Error)]
#[error("rollout aborted at t = {t}: {source}")]
pub struct RunAborted {
    pub t: f64,
    pub partial: Vec<TraceRow>,
    #[source]
    pub source: GameError,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub t_max: Option<f64>,
    pub tol_reach: Option<f64>,
}

pub fn default_t_max(s0: &GameState, cfg: &GameConfig) -> f64 {
    10.0 * (s0.rho_a() + PI * s0.rho_d()) / cfg.nu.min(1.0 - cfg.nu)
}

pub fn default_tol_reach(s0: &GameState) -> f64 {
    1e-3 * s0.rho_a().max(1.0)
}

/// One forward-Euler step of the simple-motion kinematics.
pub fn step(s: &GameState, headings: (Vec2, Vec2), cfg: &GameConfig) -> GameState {
    GameState::new(
        s.defender + headings.0 * (cfg.nu * cfg.dt),
        s.attacker + headings.1 * cfg.dt,
    )
}

/// Earliest terminal event on the straight segment from `a` to `b`, as the
/// fraction of the step at which it happens.
fn terminal_on_segment(a: &GameState, b: &GameState, cfg: &GameConfig, tol_reach: f64) -> Option<(f64, Termination)> {
    let capture = first_circle_crossing(a.attacker - a.defender, b.attacker - b.defender, cfg.r - cfg.tol_pos)
        .map(|s| (s, Termination::Capture));
    let home = first_circle_crossing(a.defender, b.defender, cfg.r).map(|s| (s, Termination::DefenderAtTarget));
    let reach = first_circle_crossing(a.attacker, b.attacker, tol_reach).map(|s| (s, Termination::AttackerAtTarget));
    // ties go to the defender: capture and home are listed first
    [capture, home, reach]
        .into_iter()
        .flatten()
        .fold(None, |best: Option<(f64, Termination)>, e| match best {
            Some(b) if b.0 <= e.0 => Some(b),
            _ => Some(e),
        })
}

fn initial_termination(s: &GameState, cfg: &GameConfig, tol_reach: f64) -> Option<Termination> {
    if s.separation() < cfg.r - cfg.tol_pos {
        Some(Termination::Capture)
    } else if s.rho_d() <= cfg.r {
        Some(Termination::DefenderAtTarget)
    } else if s.rho_a() <= tol_reach {
        Some(Termination::AttackerAtTarget)
    } else {
        None
    }
}

fn check_heading(h: Vec2, who: &str) -> std::result::Result<(), GameError> {
    let n = h.norm();
    if !h.is_finite() || (n != 0.0 && (n - 1.0).abs() > 1e-9) {
        return Err(GameError::Strategy(format!("{who} heading {h} is not a unit vector")));
    }
    Ok(())
}

/// Plays the game from `s0` until a terminal event or the time limit.
pub fn run(
    s0: GameState,
    defender: &mut dyn Strategy,
    attacker: &mut dyn Strategy,
    cfg: &GameConfig,
    opts: RunOptions,
) -> std::result::Result<Trace, RunAborted> {
    let t_max = opts.t_max.unwrap_or_else(|| default_t_max(&s0, cfg));
    let tol_reach = opts.tol_reach.unwrap_or_else(|| default_tol_reach(&s0));
    let mut rows = Vec::new();
    if let Some(kind) = initial_termination(&s0, cfg, tol_reach) {
        rows.push(TraceRow::new(0.0, &s0, PhaseLabel::III));
        return Ok(Trace {
            rows,
            outcome: kind.outcome(),
            termination: kind,
            t_f: 0.0,
        });
    }
    let mut s = s0;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * cfg.dt;
        let decided = defender
            .decide(t, &s, cfg)
            .and_then(|d| check_heading(d.heading, "defender").map(|_| d))
            .and_then(|d| {
                attacker
                    .decide(t, &s, cfg)
                    .and_then(|a| check_heading(a.heading, "attacker").map(|_| (d, a)))
            });
        let (dd, da) = match decided {
            Ok(pair) => pair,
            Err(source) => {
                rows.push(TraceRow::new(t, &s, crate::strategies::geometric_phase(&s, cfg)));
                return Err(RunAborted {
                    t,
                    partial: rows,
                    source,
                });
            }
        };
        let phase = if dd.phase == PhaseLabel::III || da.phase == PhaseLabel::III {
            PhaseLabel::III
        } else {
            dd.phase
        };
        rows.push(TraceRow::new(t, &s, phase));
        let next = step(&s, (dd.heading, da.heading), cfg);
        if let Some((frac, kind)) = terminal_on_segment(&s, &next, cfg, tol_reach) {
            let end = GameState::new(
                s.defender.lerp(next.defender, frac),
                s.attacker.lerp(next.attacker, frac),
            );
            let t_f = t + frac * cfg.dt;
            if frac > 0.0 {
                rows.push(TraceRow::new(t_f, &end, phase));
            }
            return Ok(Trace {
                rows,
                outcome: kind.outcome(),
                termination: kind,
                t_f,
            });
        }
        k += 1;
        s = next;
        let t_next = k as f64 * cfg.dt;
        if t_next > t_max {
            rows.push(TraceRow::new(t_next, &s, phase));
            return Ok(Trace {
                rows,
                outcome: Outcome::Timeout,
                termination: Termination::Timeout,
                t_f: t_next,
            });
        }
    }
}

/// One attacker heading tried against the defender's security heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Attacker heading angle; `None` for the attacker's own security heading.
    pub heading_angle: Option<f64>,
    pub state: GameState,
    pub classification: std::result::Result<Classification, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonPenetrationReport {
    pub probes: Vec<ProbeResult>,
    pub security_probe: ProbeResult,
    pub attacker_wins: usize,
    pub failures: usize,
    /// Smallest |V| among the probes that reported a value.
    pub min_abs_value: Option<f64>,
    pub min_abs_value_angle: Option<f64>,
}

/// Moves the defender along its security heading for `dt_probe` while the
/// attacker holds each of `n_headings` fixed headings, and classifies the
/// resulting states.
pub fn barrier_nonpenetration_sweep(
    s0: &GameState,
    dt_probe: f64,
    n_headings: usize,
    cfg: &GameConfig,
) -> Result<NonPenetrationReport> {
    let d = defender_security(s0, cfg)?;
    let defender = s0.defender + d.heading * (cfg.nu * dt_probe);
    let probe = |angle: Option<f64>, heading: Vec2| {
        let state = GameState::new(defender, s0.attacker + heading * dt_probe);
        ProbeResult {
            heading_angle: angle,
            state,
            classification: classify(&state, cfg).map_err(|e| e.to_string()),
        }
    };
    let probes: Vec<ProbeResult> = (0..n_headings)
        .into_par_iter()
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / n_headings as f64;
            probe(Some(angle), Vec2::unit(angle))
        })
        .collect();
    let a = attacker_security(s0, cfg)?;
    let security_probe = probe(None, a.heading);
    let mut attacker_wins = 0;
    let mut failures = 0;
    let mut min: Option<(f64, f64)> = None;
    for p in &probes {
        match &p.classification {
            Ok(c) => {
                if c.region == Region::AttackerWin {
                    attacker_wins += 1;
                }
                if let (Some(v), Some(angle)) = (c.value, p.heading_angle) {
                    if min.is_none_or(|m| v.abs() < m.0) {
                        min = Some((v.abs(), angle));
                    }
                }
            }
            Err(_) => failures += 1,
        }
    }
    Ok(NonPenetrationReport {
        probes,
        security_probe,
        attacker_wins,
        failures,
        min_abs_value: min.map(|m| m.0),
        min_abs_value_angle: min.map(|m| m.1),
    })
}

/// Rectangular lattice of attacker starting positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<Vec2> {
        let coord = |lo: f64, hi: f64, n: usize, i: usize| {
            if n <= 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(Vec2::new(
                    coord(self.x_min, self.x_max, self.nx, i),
                    coord(self.y_min, self.y_max, self.ny, j),
                ));
            }
        }
        out
    }

    pub fn cell_size(&self) -> f64 {
        let dx = (self.x_max - self.x_min) / (self.nx.max(2) - 1) as f64;
        let dy = (self.y_max - self.y_min) / (self.ny.max(2) - 1) as f64;
        dx.max(dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub attacker: Vec2,
    pub outcome: Option<Outcome>,
    pub t_f: Option<f64>,
    pub error: Option<String>,
}

/// Runs a rollout from every lattice point; cells are independent and are
/// returned in lattice order.
pub fn outcome_grid<F>(xd: Vec2, grid: &GridSpec, make_pair: F, cfg: &GameConfig, opts: RunOptions) -> Vec<GridCell>
where
    F: Fn() -> (Box<dyn Strategy>, Box<dyn Strategy>) + Sync,
{
    grid.points()
        .into_par_iter()
        .map(|xa| {
            let (mut d, mut a) = make_pair();
            match run(GameState::new(xd, xa), d.as_mut(), a.as_mut(), cfg, opts) {
                Ok(trace) => GridCell {
                    attacker: xa,
                    outcome: Some(trace.outcome),
                    t_f: Some(trace.t_f),
                    error: None,
                },
                Err(err) => GridCell {
                    attacker: xa,
                    outcome: None,
                    t_f: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect()
}

pub fn write_grid_csv<W: Write>(cells: &[GridCell], mut w: W) -> std::io::Result<()> {
    writeln!(w, "xA_x,xA_y,outcome,t_f")?;
    for c in cells {
        let outcome = c.outcome.map_or("error", Outcome::as_str);
        let t_f = c.t_f.map_or(String::from("NaN"), |t| t.to_string());
        writeln!(w, "{},{},{},{}", c.attacker.x, c.attacker.y, outcome, t_f)?;
    }
    Ok(())
}
