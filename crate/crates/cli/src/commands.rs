//! The subcommands: compute, then write CSV, SVG and JSON artifacts.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use sdtdg_core::barrier::{build_barrier, classify as classify_state, EnvelopeTermination};
use sdtdg_core::dominance::{target_in_attacker_dominance, target_in_defender_dominance};
use sdtdg_core::phase2::{phase2_value, value_trajectory};
use sdtdg_core::simulator::{run, RunOptions};
use sdtdg_core::strategies::{builtin, Player};
use sdtdg_core::{CartesianOval, GameConfig, GameState, ReducedState, Strategy, Vec2};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::plugin::ExternalStrategy;
use crate::scenario::{Format, Scenario};
use crate::svg::Canvas;
use crate::CliError;

const OVAL_SAMPLES: usize = 513;
const CAPTURE_MARKS: usize = 12;

fn out_file(sc: &Scenario, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&sc.out)?;
    Ok(sc.out.join(name))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)?;
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn csv_of(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

pub fn oval(sc: &Scenario) -> Result<(), CliError> {
    let cfg = sc.config()?;
    let state = GameState::new(sc.defender(), sc.attacker()?);
    let oval = CartesianOval::new(&state, &cfg, OVAL_SAMPLES)?;
    let boundary = oval.boundary();
    if sc.wants(Format::Csv) {
        let csv = csv_of("x,y", boundary.iter().map(|p| format!("{},{}", p.x, p.y)));
        write_text(&out_file(sc, "oval.csv")?, &csv)?;
    }
    if sc.wants(Format::Svg) {
        let mut extent: Vec<Vec2> = boundary.clone();
        extent.extend([Vec2::ZERO, state.defender, state.attacker]);
        let mut canvas = Canvas::fitting(&extent, 1.0 + cfg.r);
        // the attacker reaches first everywhere outside the oval
        canvas.background("#f6d5d5");
        canvas.path(&boundary, true, "#1f4e9c", Some("#cfdcf3"), "defender-dominance");
        canvas.circle(state.defender, cfg.r, "#1f4e9c", None);
        canvas.marker(Vec2::ZERO, "black");
        canvas.marker(state.defender, "#1f4e9c");
        canvas.marker(state.attacker, "#b22222");
        write_text(&out_file(sc, "oval.svg")?, &canvas.finish())?;
    }
    if sc.wants(Format::Json) {
        let summary = json!({
            "phi_bar_max": oval.phi_bar_max,
            "target_in_defender_dominance": target_in_defender_dominance(&state, &cfg),
            "target_in_attacker_dominance": target_in_attacker_dominance(&state, &cfg),
            "samples": boundary.len(),
            "scenario": sc,
        });
        write_text(&out_file(sc, "oval.json")?, &summary.to_string())?;
    }
    Ok(())
}

pub fn barrier(sc: &Scenario) -> Result<(), CliError> {
    let cfg = sc.config()?;
    let xd = sc.defender();
    if xd.norm() <= cfg.r {
        print_json(&json!({
            "region": "defender-win",
            "reason": "defender already within capture reach of the target",
            "curve": null,
        }));
        return Ok(());
    }
    let curve = build_barrier(xd, &cfg)?;
    let polygon = curve.polygon();
    let gap = curve.closure_gap();
    let closed = gap <= 10.0 * cfg.tol_pos;
    let partial = curve.termination() == EnvelopeTermination::TangentFailure;
    if sc.wants(Format::Csv) {
        let csv = csv_of(
            "x,y,segment",
            curve
                .points
                .iter()
                .map(|(p, label)| format!("{},{},{}", p.x, p.y, label.as_str())),
        );
        write_text(&out_file(sc, "barrier.csv")?, &csv)?;
    }
    if sc.wants(Format::Svg) {
        let mut extent = polygon.clone();
        extent.push(xd);
        let mut canvas = Canvas::fitting(&extent, 1.0);
        canvas.background("#dbe6f7");
        canvas.path(&polygon, true, "black", Some("#f3c9c9"), "barrier");
        canvas.circle(xd, cfg.r, "#1f4e9c", None);
        canvas.marker(Vec2::ZERO, "black");
        canvas.marker(xd, "#1f4e9c");
        write_text(&out_file(sc, "barrier.svg")?, &canvas.finish())?;
    }
    let sidecar = json!({
        "closed": closed,
        "closure_gap": gap,
        "gamma_max": curve.gamma_max(),
        "termination": curve.termination(),
        "partial": partial,
        "natural_radius": curve.natural.radius,
        "critical_radius": curve.natural.critical_radius,
        "points": polygon.len(),
        "scenario": sc,
    });
    if sc.wants(Format::Json) {
        write_text(
            &out_file(sc, "barrier.json")?,
            &serde_json::to_string_pretty(&sidecar).expect("json"),
        )?;
    }
    if partial || !closed {
        return Err(CliError::Numeric(format!(
            "barrier sweep incomplete (termination {:?}, gap {gap:e}); outputs are partial",
            curve.termination()
        )));
    }
    Ok(())
}

fn strategy(name: &str, player: Player) -> Result<Box<dyn Strategy>, CliError> {
    if let Some(path) = name.strip_prefix("external:") {
        return Ok(Box::new(ExternalStrategy::spawn(PathBuf::from(path), player)?));
    }
    builtin(name, player).map_err(CliError::from)
}

pub fn trace_hash(csv: &str) -> String {
    hex::encode(Sha256::digest(csv.as_bytes()))
}

pub fn simulate(sc: &Scenario, with_barrier: bool) -> Result<(), CliError> {
    let cfg = sc.config()?;
    let s0 = GameState::new(sc.defender(), sc.attacker()?);
    let mut defender = strategy(&sc.defender_strategy, Player::Defender)?;
    let mut attacker = strategy(&sc.attacker_strategy, Player::Attacker)?;
    let opts = RunOptions {
        t_max: sc.t_max,
        tol_reach: None,
    };
    fs::create_dir_all(&sc.out)?;
    write_text(
        &out_file(sc, "scenario.json")?,
        &serde_json::to_string_pretty(sc).expect("json"),
    )?;
    let trace = match run(s0, defender.as_mut(), attacker.as_mut(), &cfg, opts) {
        Ok(t) => t,
        Err(aborted) => {
            let mut f = fs::File::create(out_file(sc, "trace.partial.csv")?)?;
            writeln!(f, "t,xD_x,xD_y,xA_x,xA_y,phase,R,rhoD,rhoA")?;
            for r in &aborted.partial {
                writeln!(
                    f,
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
            return Err(CliError::from(aborted.source));
        }
    };
    let csv = trace.to_csv_string();
    let hash = trace_hash(&csv);
    if sc.wants(Format::Csv) {
        write_text(&out_file(sc, "trace.csv")?, &csv)?;
    }
    if sc.wants(Format::Svg) {
        let dpath: Vec<Vec2> = trace.rows.iter().map(|r| r.defender).collect();
        let apath: Vec<Vec2> = trace.rows.iter().map(|r| r.attacker).collect();
        let overlay = if with_barrier {
            Some(build_barrier(s0.defender, &cfg)?)
        } else {
            None
        };
        let mut extent: Vec<Vec2> = dpath.iter().chain(&apath).copied().collect();
        extent.push(Vec2::ZERO);
        if let Some(b) = &overlay {
            extent.extend(b.polygon());
        }
        let mut canvas = Canvas::fitting(&extent, cfg.r + 0.5);
        if let Some(b) = &overlay {
            canvas.path(&b.polygon(), true, "#777777", Some("#f7e3e3"), "barrier");
        }
        let n = trace.rows.len();
        for k in 0..=CAPTURE_MARKS {
            let row = &trace.rows[(k * (n - 1)) / CAPTURE_MARKS];
            canvas.circle(row.defender, cfg.r, "#9db5e0", None);
        }
        canvas.path(&dpath, false, "#1f4e9c", None, "defender");
        canvas.path(&apath, false, "#b22222", None, "attacker");
        canvas.marker(Vec2::ZERO, "black");
        write_text(&out_file(sc, "trace.svg")?, &canvas.finish())?;
    }
    let result = json!({
        "outcome": trace.outcome,
        "termination": trace.termination,
        "t_f": trace.t_f,
        "steps": trace.rows.len(),
        "trace_sha256": hash,
        "scenario": sc,
    });
    if sc.wants(Format::Json) {
        write_text(
            &out_file(sc, "result.json")?,
            &serde_json::to_string_pretty(&result).expect("json"),
        )?;
    }
    print_json(&result);
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    /// Largest defender range in the lattice; defaults to six capture radii.
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long, default_value_t = 40)]
    pub n_rho: usize,
    #[arg(long, default_value_t = 40)]
    pub n_theta: usize,
}

pub fn phase2_field(sc: &Scenario, field: &FieldArgs) -> Result<(), CliError> {
    let cfg = sc.config()?;
    let rho_max = field.rho_max.unwrap_or(6.0 * cfg.r);
    if rho_max.is_nan() || rho_max <= cfg.r || field.n_rho == 0 || field.n_theta == 0 {
        return Err(CliError::Config("need rho_max > r and a non-empty lattice".into()));
    }
    let cells: Vec<(f64, f64)> = (0..field.n_rho)
        .flat_map(|i| {
            let rho = cfg.r + (rho_max - cfg.r) * (i as f64 + 0.5) / field.n_rho as f64;
            (0..field.n_theta).map(move |j| (rho, PI * (j as f64 + 0.5) / field.n_theta as f64))
        })
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(rho, theta)| phase2_value(ReducedState::new(rho, theta), &cfg).unwrap_or(f64::NAN))
        .collect();
    let failed = values.iter().filter(|v| v.is_nan()).count();
    let separatrix = value_trajectory(0.0, &cfg, rho_max)?;
    let sep: Vec<Vec2> = separatrix.samples.iter().map(|s| Vec2::new(s.rho_d, s.theta)).collect();
    if sc.wants(Format::Csv) {
        let csv = csv_of(
            "rho_d,theta,value",
            cells
                .iter()
                .zip(&values)
                .map(|((rho, theta), v)| format!("{rho},{theta},{v}")),
        );
        write_text(&out_file(sc, "phase2_field.csv")?, &csv)?;
        let csv = csv_of("rho_d,theta", sep.iter().map(|p| format!("{},{}", p.x, p.y)));
        write_text(&out_file(sc, "separatrix.csv")?, &csv)?;
    }
    if sc.wants(Format::Svg) {
        let extent = [Vec2::new(cfg.r, 0.0), Vec2::new(rho_max, PI)];
        let mut canvas = Canvas::fitting(&extent, 0.1);
        for (&(rho, theta), &v) in cells.iter().zip(&values) {
            let colour = if v.is_nan() {
                "#999999"
            } else if v > 0.0 {
                "#9db5e0"
            } else {
                "#e8a3a3"
            };
            canvas.marker(Vec2::new(rho, theta), colour);
        }
        canvas.path(&sep, false, "black", None, "separatrix");
        write_text(&out_file(sc, "phase2_field.svg")?, &canvas.finish())?;
    }
    if sc.wants(Format::Json) {
        let summary = json!({
            "cells": values.len(),
            "failed": failed,
            "separatrix_points": sep.len(),
            "scenario": sc,
        });
        write_text(&out_file(sc, "phase2_field.json")?, &summary.to_string())?;
    }
    if failed * 100 > values.len() {
        return Err(CliError::Numeric(format!(
            "{failed} of {} cells failed to integrate",
            values.len()
        )));
    }
    Ok(())
}

pub fn classify(sc: &Scenario) -> Result<(), CliError> {
    let cfg: GameConfig = sc.config()?;
    let state = GameState::new(sc.defender(), sc.attacker()?);
    let c = classify_state(&state, &cfg)?;
    print_json(&json!({
        "region": c.region,
        "reason": c.reason,
        "V": c.value,
        "gamma": c.gamma,
        "phase": c.phase,
    }));
    Ok(())
}
