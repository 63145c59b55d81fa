//! Evolutionary Carreau-Yasuda flow on the perforated domain.

mod convection;
mod forcing;
mod kkt;
mod record;
mod solver;
mod viscosity;

pub use convection::convect;
pub use forcing::{sample_forcing, ForcingKind, ForcingSpec, InitialKind};
pub use record::{
    dual_exponent, energy_check, h_exponent, EnergyLedger, LedgerEntry, ScalingNorms,
    TimeIntegrals,
};
pub use solver::{micro_step, run_micro, MicroConfig, MicroRun, MicroSolver, MicroState, RunSummary, StepReport};
pub use viscosity::{carreau_viscosity, CarreauParams, ViscosityModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm_from_sq, Operators};

pub fn scaling_norms(run: &MicroRun) -> ScalingNorms {
    run.norms
}

/// Size of the stress remainder `R` with the decay exponent bound for `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderRecord {
    pub r: f64,
    /// Space-time exponent of the norm, `r'`.
    pub q: f64,
    pub norm: f64,
    /// Exponent `a` of the bound `C eps^a`; `None` for `r = 2`.
    pub theoretical_rate: Option<f64>,
}

pub fn remainder_rate(r: f64) -> Option<f64> {
    if r == 2.0 {
        None
    } else if r < 2.0 {
        Some(2.0 - r)
    } else if r <= 4.0 {
        Some((r - 2.0) / r)
    } else {
        Some(1.0)
    }
}

pub fn stress_remainder_norms(run: &MicroRun) -> Result<RemainderRecord> {
    let r = run.exponent;
    if !(r > 1.0) {
        return Err(Error::domain(format!("exponent must exceed 1, got {r}")));
    }
    Ok(RemainderRecord {
        r,
        q: dual_exponent(r),
        norm: run.norms.r_lq,
        theoretical_rate: remainder_rate(r),
    })
}

/// `|u|_2 / (eps |grad u|_2)`.
pub fn poincare_probe(state: &MicroState, eps: f64) -> Result<f64> {
    let g = state.u.grid;
    let ops = Operators::new(g);
    let flat = state.u.to_flat();
    let vol = g.cell_volume();
    let u = norm_from_sq(&crate::grid::FieldMagnitude::magnitude_sq(&state.u), vol, 2.0)?;
    let du = norm_from_sq(&ops.grad_sq(&flat), vol, 2.0)?;
    if u == 0.0 || du == 0.0 || !(eps > 0.0) {
        return Err(Error::Degenerate(
            "Poincare ratio is undefined for a zero field".into(),
        ));
    }
    Ok(u / (eps * du))
}
