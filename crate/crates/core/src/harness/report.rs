//! Report artifacts of a sweep.
//!
//! | file | columns |
//! |---|---|
//! | `report.json` | the [`SweepReport`] body |
//! | `norms.csv` | `epsilon,norm_name,value` |
//! | `rates.csv` | `norm_name,slope,residual` (empty fields when no fit exists) |
//! | `darcy_compare.csv` | `epsilon,rel_error` |
//! | `permeability.csv` | `n,A11,A12,A21,A22,residual,iterations` |
//! | `ledger_eps<eps>.csv` | `step,t,kinetic,dissipation_cum,work_cum,slack` |
//!
//! Fields go to `fields/` as snapshots: `velocity_eps<eps>`,
//! `pressure_eps<eps>`, `darcy_velocity` and `darcy_pressure`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::io::{write_scalar, write_vector};
use super::sweep::SweepReport;
use crate::error::{Error, Result};
use crate::micro::ScalingNorms;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn norms_csv(report: &SweepReport) -> String {
    let mut out = String::from("epsilon,norm_name,value\n");
    for run in &report.runs {
        for (name, v) in ScalingNorms::NAMES.iter().zip(run.norms.values()) {
            writeln!(out, "{},{name},{v:e}", run.epsilon).unwrap();
        }
    }
    out
}

pub fn rates_csv(report: &SweepReport) -> String {
    let mut out = String::from("norm_name,slope,residual\n");
    for r in &report.rates {
        match r.fit {
            Some(f) => writeln!(out, "{},{:.12},{:e}", r.name, f.slope, f.residual).unwrap(),
            None => writeln!(out, "{},,", r.name).unwrap(),
        }
    }
    out
}

pub fn darcy_csv(report: &SweepReport) -> String {
    let mut out = String::from("epsilon,rel_error\n");
    for run in &report.runs {
        if let Some(e) = run.darcy_error {
            writeln!(out, "{},{e:e}", run.epsilon).unwrap();
        }
    }
    out
}

pub fn permeability_csv(report: &SweepReport) -> String {
    let mut out = String::from("n,A11,A12,A21,A22,residual,iterations\n");
    if let Some(p) = &report.permeability {
        let a = p.entries;
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            p.cell_cells,
            a[0][0],
            a[0][1],
            a[1][0],
            a[1][1],
            p.relative_residual[0].max(p.relative_residual[1]),
            p.outer_iterations[0] + p.outer_iterations[1]
        )
        .unwrap();
    }
    out
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn write_report(report: &SweepReport, dir: &Path, fields: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write(&dir.join("norms.csv"), &norms_csv(report))?;
    write(&dir.join("rates.csv"), &rates_csv(report))?;
    write(&dir.join("darcy_compare.csv"), &darcy_csv(report))?;
    write(&dir.join("permeability.csv"), &permeability_csv(report))?;
    let a = &report.artifacts;
    for (eps, ledger) in &a.ledgers {
        write(&dir.join(format!("ledger_eps{eps}.csv")), &ledger.to_csv())?;
    }
    if fields {
        let fdir = dir.join("fields");
        for (eps, u) in &a.velocities {
            write_vector(&fdir, &format!("velocity_eps{eps}"), "velocity", "eps^2 U", u)?;
        }
        for (eps, p) in &a.pressures {
            write_scalar(&fdir, &format!("pressure_eps{eps}"), "pressure", "P", p)?;
        }
        if let Some(d) = &a.darcy {
            write_vector(&fdir, "darcy_velocity", "velocity", "U", &d.u)?;
            write_scalar(&fdir, "darcy_pressure", "pressure", "P", &d.p)?;
        }
    }
    Ok(())
}
