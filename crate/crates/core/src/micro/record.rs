use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    field_norm, FieldMagnitude, Operators, ScalarField, SpaceTimeNorm, StaggeredVectorField,
    TensorField,
};

/// Quantities of one state entering the ledger and the accumulators.
#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub u: StaggeredVectorField,
    pub p: ScalarField,
    pub strain: TensorField,
    pub grad_sq: Vec<f64>,
    /// `(1 + lambda |Du|^2)^(r/2 - 1)` per cell.
    pub factor: Vec<f64>,
    pub convection: StaggeredVectorField,
    pub dissipation: f64,
    pub work: f64,
    pub kinetic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub dissipation_cum: f64,
    pub work_cum: f64,
    pub slack: f64,
}

/// Terms of the discrete energy inequality, one entry per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    /// `(eps^2 / 2) |u0|^2`.
    pub initial_kinetic: f64,
    pub entries: Vec<LedgerEntry>,
}

impl EnergyLedger {
    /// Largest magnitude of any ledger term.
    pub fn term_scale(&self) -> f64 {
        self.entries.iter().fold(self.initial_kinetic.abs(), |m, e| {
            m.max(e.kinetic.abs())
                .max(e.dissipation_cum.abs())
                .max(e.work_cum.abs())
        })
    }

    /// Slack relative to [`term_scale`](Self::term_scale); 0 for a zero run.
    pub fn relative_worst_slack(&self) -> f64 {
        let scale = self.term_scale();
        if scale == 0.0 {
            0.0
        } else {
            energy_check(self) / scale
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t,kinetic,dissipation_cum,work_cum,slack\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e}\n",
                e.step, e.t, e.kinetic, e.dissipation_cum, e.work_cum, e.slack
            ));
        }
        out
    }
}

/// Worst slack `(eps^2/2)|u0|^2 + W(t) - (eps^2/2)|u(t)|^2 - D(t)` over all
/// steps; 0 for an empty ledger.
pub fn energy_check(ledger: &EnergyLedger) -> f64 {
    ledger
        .entries
        .iter()
        .map(|e| e.slack)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))))
        .unwrap_or(0.0)
}

/// Time integrals from `0` to the current time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeIntegrals {
    /// `int u`.
    pub u: StaggeredVectorField,
    /// `int (u . grad) u`.
    pub g: StaggeredVectorField,
    /// `int (1 + lambda |Du|^2)^(r/2 - 1) Du`.
    pub h: TensorField,
    /// `int f`.
    pub f: StaggeredVectorField,
    /// `int ((1 + lambda |Du|^2)^(r/2 - 1) - 1) Du`.
    pub r: TensorField,
    /// `int p`.
    pub p: ScalarField,
}

impl TimeIntegrals {
    /// Largest entry of `H - R - D(U)`.
    pub fn decomposition_defect(&self, ops: &Operators) -> f64 {
        let du = ops.strain_tensor(&self.u.to_flat());
        let mut d = self.h.clone();
        d.axpy(-1.0, &self.r);
        d.axpy(-1.0, &du);
        d.max_abs()
    }
}

/// Discrete norms of a run over `(0, T) x Omega_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingNorms {
    pub u_l2l2: f64,
    pub grad_u_l2l2: f64,
    pub u_linf_l2: f64,
    pub u_lrlr: f64,
    pub grad_u_lrlr: f64,
    /// `U` in `W^{1,2}(0,T; W^{1,2}_0)`, gradient seminorm in space.
    pub u_int_w12_h1: f64,
    /// `U` in `W^{1,2}(0,T; L^2)`.
    pub u_int_w12_l2: f64,
    /// `G` in `W^{1,1}(0,T; L^{3/2})`.
    pub g_w11_l32: f64,
    /// `H` in `W^{1,q}(0,T; L^q)`, `q = 2` for `r <= 2`, `r'` otherwise.
    pub h_w1q: f64,
    /// `R` in `L^{r'}(0,T; L^{r'})`.
    pub r_lq: f64,
}

impl ScalingNorms {
    pub const NAMES: [&'static str; 10] = [
        "u_l2l2",
        "grad_u_l2l2",
        "u_linf_l2",
        "u_lrlr",
        "grad_u_lrlr",
        "u_int_w12_h1",
        "u_int_w12_l2",
        "g_w11_l32",
        "h_w1q",
        "r_lq",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.u_l2l2,
            self.grad_u_l2l2,
            self.u_linf_l2,
            self.u_lrlr,
            self.grad_u_lrlr,
            self.u_int_w12_h1,
            self.u_int_w12_l2,
            self.g_w11_l32,
            self.h_w1q,
            self.r_lq,
        ]
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        Self::NAMES.iter().copied().zip(self.values()).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }
}

/// Exponent `r' = r / (r - 1)`.
pub fn dual_exponent(r: f64) -> f64 {
    r / (r - 1.0)
}

/// Time exponent of the `H` norm.
pub fn h_exponent(r: f64) -> f64 {
    if r <= 2.0 {
        2.0
    } else {
        dual_exponent(r)
    }
}

pub(crate) struct Recorder {
    vol: f64,
    ledger: EnergyLedger,
    dissipation_cum: f64,
    work_cum: f64,
    integrals: TimeIntegrals,
    forcing: StaggeredVectorField,
    u_l2l2: SpaceTimeNorm,
    grad_l2l2: SpaceTimeNorm,
    u_linf: f64,
    u_lrlr: SpaceTimeNorm,
    grad_lrlr: SpaceTimeNorm,
    big_u_h1: SpaceTimeNorm,
    big_u_l2: SpaceTimeNorm,
    g_sum: f64,
    h_norm: SpaceTimeNorm,
    r_norm: SpaceTimeNorm,
}

impl Recorder {
    pub fn new(ops: &Operators, r: f64, initial: &Sample) -> Result<Self> {
        let g = ops.grid;
        let zero_v = StaggeredVectorField::zeros(g);
        Ok(Self {
            vol: g.cell_volume(),
            ledger: EnergyLedger {
                initial_kinetic: initial.kinetic,
                entries: Vec::new(),
            },
            dissipation_cum: 0.0,
            work_cum: 0.0,
            integrals: TimeIntegrals {
                u: zero_v.clone(),
                g: zero_v.clone(),
                h: TensorField::zeros(g),
                f: zero_v.clone(),
                r: TensorField::zeros(g),
                p: ScalarField::zeros(g),
            },
            forcing: StaggeredVectorField::zeros(g),
            u_l2l2: SpaceTimeNorm::new(2.0)?,
            grad_l2l2: SpaceTimeNorm::new(2.0)?,
            u_linf: field_norm(&initial.u, 2.0)?,
            u_lrlr: SpaceTimeNorm::new(r)?,
            grad_lrlr: SpaceTimeNorm::new(r)?,
            big_u_h1: SpaceTimeNorm::new(2.0)?,
            big_u_l2: SpaceTimeNorm::new(2.0)?,
            g_sum: 0.0,
            h_norm: SpaceTimeNorm::new(h_exponent(r))?,
            r_norm: SpaceTimeNorm::new(dual_exponent(r))?,
        })
    }

    pub fn with_forcing(mut self, f: &StaggeredVectorField) -> Self {
        self.forcing = f.clone();
        self
    }

    /// Adds the step `(t - dt, t]` with the state at `t`.
    pub fn advance(&mut self, ops: &Operators, step: usize, t: f64, dt: f64, s: &Sample) -> Result<()> {
        if !(s.dissipation >= 0.0) || !s.work.is_finite() || !s.kinetic.is_finite() {
            return Err(Error::numerical(format!(
                "invalid energy terms at step {step}: dissipation {}, work {}, kinetic {}",
                s.dissipation, s.work, s.kinetic
            )));
        }
        self.dissipation_cum += dt * s.dissipation;
        self.work_cum += dt * s.work;
        let slack =
            self.ledger.initial_kinetic + self.work_cum - s.kinetic - self.dissipation_cum;
        self.ledger.entries.push(LedgerEntry {
            step,
            t,
            kinetic: s.kinetic,
            dissipation_cum: self.dissipation_cum,
            work_cum: self.work_cum,
            slack,
        });

        let fd = scaled(&s.strain, &s.factor, 0.0);
        let rd = scaled(&s.strain, &s.factor, -1.0);
        let it = &mut self.integrals;
        it.u.axpy(dt, &s.u);
        it.g.axpy(dt, &s.convection);
        it.h.axpy(dt, &fd);
        it.r.axpy(dt, &rd);
        it.f.axpy(dt, &self.forcing);
        for (a, b) in it.p.values.iter_mut().zip(&s.p.values) {
            *a += dt * b;
        }

        let vol = self.vol;
        let u_sq = s.u.magnitude_sq();
        self.u_l2l2.add(dt, &u_sq, vol);
        self.grad_l2l2.add(dt, &s.grad_sq, vol);
        self.u_lrlr.add(dt, &u_sq, vol);
        self.grad_lrlr.add(dt, &s.grad_sq, vol);
        self.u_linf = self.u_linf.max(field_norm(&s.u, 2.0)?);
        let big_u = self.integrals.u.to_flat();
        self.big_u_h1.add(dt, &ops.grad_sq(&big_u), vol);
        self.big_u_h1.add(dt, &s.grad_sq, vol);
        self.big_u_l2.add(dt, &self.integrals.u.magnitude_sq(), vol);
        self.big_u_l2.add(dt, &u_sq, vol);
        self.g_sum +=
            dt * (field_norm(&self.integrals.g, 1.5)? + field_norm(&s.convection, 1.5)?);
        self.h_norm.add(dt, &self.integrals.h.magnitude_sq(), vol);
        self.h_norm.add(dt, &fd.magnitude_sq(), vol);
        self.r_norm.add(dt, &rd.magnitude_sq(), vol);
        Ok(())
    }

    pub fn finish(self) -> (EnergyLedger, TimeIntegrals, ScalingNorms) {
        let norms = ScalingNorms {
            u_l2l2: self.u_l2l2.value(),
            grad_u_l2l2: self.grad_l2l2.value(),
            u_linf_l2: self.u_linf,
            u_lrlr: self.u_lrlr.value(),
            grad_u_lrlr: self.grad_lrlr.value(),
            u_int_w12_h1: self.big_u_h1.value(),
            u_int_w12_l2: self.big_u_l2.value(),
            g_w11_l32: self.g_sum,
            h_w1q: self.h_norm.value(),
            r_lq: self.r_norm.value(),
        };
        (self.ledger, self.integrals, norms)
    }
}

/// `(factor + shift) * D` per cell.
fn scaled(d: &TensorField, factor: &[f64], shift: f64) -> TensorField {
    let m = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(factor).map(|(x, f)| (f + shift) * x).collect()
    };
    TensorField {
        grid: d.grid,
        xx: m(&d.xx),
        xy: m(&d.xy),
        yy: m(&d.yy),
    }
}
