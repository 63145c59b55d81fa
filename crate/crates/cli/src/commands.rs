use std::fs;
use std::path::Path;

use darcylab_core::cell::{agree_to_digits, grid_refinement_study, permeability};
use darcylab_core::darcy::{darcy_residual, solve_darcy, DarcyProblem};
use darcylab_core::harness::io::{write_scalar, write_vector};
use darcylab_core::harness::{run_sweep, run_verify, write_report, Check, SweepConfig};
use darcylab_core::micro::{run_micro, sample_forcing, ScalingNorms};
use darcylab_core::{Error, Result};
use serde_json::json;

use crate::{Command, Common};

fn load(common: &Common) -> Result<SweepConfig> {
    match &common.config {
        Some(p) => SweepConfig::load(p),
        None => Ok(SweepConfig::default()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        match &c.note {
            Some(n) => println!("{status} {} = {:.6e} ({}; {n})", c.name, c.value, c.threshold),
            None => println!("{status} {} = {:.6e} ({})", c.name, c.value, c.threshold),
        }
    }
}

pub fn run(command: &Command) -> Result<u8> {
    match command {
        Command::Cell { common, levels } => cell(common, levels),
        Command::Micro { common, eps } => micro(common, *eps),
        Command::Darcy { common } => darcy(common),
        Command::Sweep { common, no_fields } => sweep(common, !no_fields),
        Command::Verify { common } => verify(common),
    }
}

fn cell(common: &Common, levels: &[usize]) -> Result<u8> {
    let cfg = load(common)?;
    let hole = cfg.hole.shape()?;
    let mut csv = String::from("n,A11,A12,A21,A22,residual,iterations\n");
    let mut lines = Vec::new();
    if levels.is_empty() {
        let n = cfg.domain.cells_per_eps;
        let (a, [sx, sy]) = permeability(&hole, n, cfg.solver.cell_tol)?;
        let e = a.entries;
        let res = sx.report.relative_residual.max(sy.report.relative_residual);
        csv += &format!(
            "{n},{:e},{:e},{:e},{:e},{res:e},{}\n",
            e[0][0],
            e[0][1],
            e[1][0],
            e[1][1],
            sx.report.iterations + sy.report.iterations
        );
        lines.push(format!("n = {n}: A = {e:?}, eigenvalues {:?}", a.eigenvalues()));
    } else {
        let study = grid_refinement_study(&hole, levels, cfg.solver.cell_tol)?;
        for r in &study.rows {
            let e = r.permeability.entries;
            csv += &format!(
                "{},{:e},{:e},{:e},{:e},{:e},{}\n",
                r.n,
                e[0][0],
                e[0][1],
                e[1][0],
                e[1][1],
                r.relative_residual[0].max(r.relative_residual[1]),
                r.outer_iterations[0] + r.outer_iterations[1]
            );
            lines.push(format!("n = {}: A = {e:?}", r.n));
        }
        for est in &study.estimates {
            lines.push(format!("extrapolated to n = {}: {:?}", est.n, est.extrapolated.entries));
        }
        if let [.., a, b] = study.estimates.as_slice() {
            let (x, y) = (a.extrapolated.entries, b.extrapolated.entries);
            let stable = (0..2).all(|d| agree_to_digits(x[d][d], y[d][d], 3));
            lines.push(format!("extrapolates agree to 3 significant digits: {stable}"));
        }
        if let Some(out) = &common.out {
            write(&out.join("refinement.json"), &serde_json::to_string_pretty(&study).unwrap())?;
        }
    }
    if let Some(out) = &common.out {
        write(&out.join("permeability.csv"), &csv)?;
    }
    if !common.quiet {
        print!("{csv}");
        for l in lines {
            println!("{l}");
        }
    }
    Ok(0)
}

fn micro(common: &Common, eps: Option<f64>) -> Result<u8> {
    let cfg = load(common)?;
    let eps = eps.unwrap_or(*cfg.sweep.epsilons.last().expect("validated"));
    let mc = cfg.micro(eps)?;
    mc.validate()?;
    let run = run_micro(&mc)?;
    let record = json!({
        "epsilon": eps,
        "config_hash": cfg.hash(),
        "summary": run.summary,
        "norms": run.norms,
        "relative_worst_slack": run.ledger.relative_worst_slack(),
    });
    if let Some(out) = &common.out {
        write(&out.join("ledger.csv"), &run.ledger.to_csv())?;
        write(&out.join("norms.json"), &(serde_json::to_string_pretty(&record).unwrap() + "\n"))?;
        write_vector(&out.join("fields"), "velocity", "velocity", "eps^2 U", &run.state.u)?;
        write_scalar(&out.join("fields"), "pressure", "pressure", "P", &run.state.p)?;
    }
    if !common.quiet {
        let s = &run.summary;
        println!(
            "eps = {eps}: {} steps ({} solved), steady at {:?}, max divergence {:.3e}",
            s.steps, s.solved_steps, s.steady_time, s.max_divergence
        );
        for (name, v) in ScalingNorms::NAMES.iter().zip(run.norms.values()) {
            println!("{name} = {v:.6e}");
        }
        for w in &s.warnings {
            println!("warning: {w}");
        }
    }
    Ok(0)
}

fn darcy(common: &Common) -> Result<u8> {
    let cfg = load(common)?;
    let (a, _) = permeability(&cfg.hole.shape()?, cfg.domain.cells_per_eps, cfg.solver.cell_tol)?;
    let eps = *cfg.sweep.epsilons.last().expect("validated");
    let grid = cfg.domain(eps)?.grid()?;
    let eta0 = cfg.carreau.model()?.eta0();
    let mut problem = DarcyProblem::new(a.symmetric(), eta0, sample_forcing(&cfg.forcing.force(), &grid));
    problem.tol = cfg.solver.darcy_tol;
    let sol = solve_darcy(&problem)?;
    let residual = darcy_residual(&problem, &sol)?;
    let record = json!({
        "permeability": a.symmetric().entries,
        "cells": [grid.nx, grid.ny],
        "solve": sol.report,
        "residual": residual,
    });
    if let Some(out) = &common.out {
        write(&out.join("residual.json"), &(serde_json::to_string_pretty(&record).unwrap() + "\n"))?;
        write_vector(&out.join("fields"), "darcy_velocity", "velocity", "U", &sol.u)?;
        write_scalar(&out.join("fields"), "darcy_pressure", "pressure", "P", &sol.p)?;
    }
    if !common.quiet {
        println!("{}x{} cells, {}", grid.nx, grid.ny, sol.report);
        println!(
            "residuals: momentum {:.3e}, mass {:.3e}, flux {:.3e}",
            residual.momentum, residual.mass, residual.flux
        );
    }
    Ok(0)
}

fn sweep(common: &Common, fields: bool) -> Result<u8> {
    let cfg = load(common)?;
    let report = run_sweep(&cfg)?;
    let out = common.out.clone().or_else(|| cfg.sweep.output.clone());
    if let Some(out) = &out {
        write_report(&report, out, fields)?;
    }
    if !common.quiet {
        for r in &report.runs {
            println!(
                "eps = {}: {} steps, darcy error {}",
                r.epsilon,
                r.summary.steps,
                r.darcy_error.map_or("n/a".into(), |e| format!("{e:.4}"))
            );
        }
        for r in &report.rates {
            match r.fit {
                Some(f) => println!("rate {} = {:.4} (residual {:.2e})", r.name, f.slope, f.residual),
                None => println!("rate {}: none ({})", r.name, r.note.as_deref().unwrap_or("")),
            }
        }
        print_checks(&report.checks);
    }
    if !report.complete {
        eprintln!("darcylab: sweep incomplete: {}", report.failure.as_deref().unwrap_or("unknown failure"));
        return Ok(report.failure_code.unwrap_or(2) as u8);
    }
    Ok(0)
}

fn verify(common: &Common) -> Result<u8> {
    if let Some(p) = &common.config {
        SweepConfig::load(p)?;
    }
    let start = std::time::Instant::now();
    let report = run_verify();
    if let Some(out) = &common.out {
        write(&out.join("verify.json"), &(serde_json::to_string_pretty(&report).unwrap() + "\n"))?;
    }
    if !common.quiet {
        print_checks(&report.checks);
        println!("{} checks in {:.2} s", report.checks.len(), start.elapsed().as_secs_f64());
    }
    Ok(if report.all_passed() { 0 } else { 2 })
}
