//! Strategies provided by an external process over stdin/stdout.
//!
//! Each decision writes one line `t xD_x xD_y xA_x xA_y` and reads back one
//! line `hx hy` holding a unit heading.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use sdtdg_core::strategies::{geometric_phase, Player, StrategyDecision};
use sdtdg_core::{GameConfig, GameError, GameState, Strategy, Vec2};

/// Headings further than this from unit length are rejected.
const UNIT_TOLERANCE: f64 = 1e-6;

pub struct ExternalStrategy {
    name: String,
    player: Player,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalStrategy {
    pub fn spawn(path: PathBuf, player: Player) -> Result<Self, GameError> {
        let mut child = Command::new(&path)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| GameError::Strategy(format!("cannot start plugin {}: {e}", path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalStrategy {
            name: format!("external:{}", path.display()),
            player,
            child,
            stdin,
            stdout,
        })
    }

    fn exchange(&mut self, t: f64, s: &GameState) -> Result<Vec2, GameError> {
        let fail = |what: String| GameError::Strategy(format!("plugin {}: {what}", self.name));
        writeln!(
            self.stdin,
            "{} {} {} {} {}",
            t, s.defender.x, s.defender.y, s.attacker.x, s.attacker.y
        )
        .and_then(|_| self.stdin.flush())
        .map_err(|e| fail(format!("write failed: {e}")))?;
        let mut line = String::new();
        let n = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| fail(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(fail("closed its output".into()));
        }
        let parts: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| fail(format!("unparsable heading '{}'", line.trim())))?;
        let &[x, y] = parts.as_slice() else {
            return Err(fail(format!("expected two numbers, got '{}'", line.trim())));
        };
        let h = Vec2::new(x, y);
        if !h.is_finite() || (h.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(fail(format!("heading {h} is not a unit vector")));
        }
        Ok(h / h.norm())
    }
}

impl Strategy for ExternalStrategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn player(&self) -> Player {
        self.player
    }

    fn decide(&mut self, t: f64, s: &GameState, cfg: &GameConfig) -> sdtdg_core::Result<StrategyDecision> {
        let heading = self.exchange(t, s)?;
        Ok(StrategyDecision {
            heading,
            phase: geometric_phase(s, cfg),
            value: None,
            gamma: None,
            chirality: None,
        })
    }
}

impl Drop for ExternalStrategy {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
