use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::convection::convect;
use super::forcing::{ForcingKind, ForcingSpec, InitialKind};
use super::kkt::{Kkt, Layout};
use super::record::{EnergyLedger, Recorder, Sample, ScalingNorms, TimeIntegrals};
use super::viscosity::ViscosityModel;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, FaceGeometry};
use crate::grid::{divergence, field_norm, norm, LinearSolveReport, Operators, ScalarField, SparseMatrix, StaggeredVectorField};

/// Micro problem on `Omega_eps` over `(0, t_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroConfig {
    pub domain: DomainSpec,
    pub viscosity: ViscosityModel,
    pub forcing: ForcingKind,
    #[serde(default = "rest")]
    pub initial: InitialKind,
    /// Explicit time step; by default `dt_relax * eps^4 / eta0`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "defaults::dt_relax")]
    pub dt_relax: f64,
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    #[serde(default = "defaults::picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "defaults::picard_max")]
    pub picard_max: usize,
    /// Steady when `|du| / |u| <= steady_tol * dt / tau`, `tau = eps^4 / eta0`.
    #[serde(default = "defaults::steady_tol")]
    pub steady_tol: f64,
    /// Number of ledger steps spanning the steady stretch up to `t_end`.
    #[serde(default = "defaults::fast_forward_steps")]
    pub fast_forward_steps: usize,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
}

fn rest() -> InitialKind {
    InitialKind::Rest
}

pub(crate) mod defaults {
    pub fn dt_relax() -> f64 {
        0.5
    }
    pub fn t_end() -> f64 {
        1.0
    }
    pub fn picard_tol() -> f64 {
        1e-12
    }
    pub fn picard_max() -> usize {
        50
    }
    pub fn steady_tol() -> f64 {
        1e-8
    }
    pub fn fast_forward_steps() -> usize {
        500
    }
    pub fn max_steps() -> usize {
        200_000
    }
}

impl MicroConfig {
    pub fn new(domain: DomainSpec, viscosity: ViscosityModel, forcing: ForcingKind) -> Self {
        Self {
            domain,
            viscosity,
            forcing,
            initial: InitialKind::Rest,
            dt: None,
            dt_relax: defaults::dt_relax(),
            t_end: defaults::t_end(),
            picard_tol: defaults::picard_tol(),
            picard_max: defaults::picard_max(),
            steady_tol: defaults::steady_tol(),
            fast_forward_steps: defaults::fast_forward_steps(),
            max_steps: defaults::max_steps(),
        }
    }

    /// Micro relaxation time `eps^4 / eta0`.
    pub fn relaxation_time(&self) -> f64 {
        self.domain.epsilon.powi(4) / self.viscosity.eta0()
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or(self.dt_relax * self.relaxation_time())
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.viscosity.validate()?;
        let dt = self.time_step();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        if !(self.t_end >= dt) {
            return Err(Error::config(format!(
                "t_end = {} must be at least dt = {dt}",
                self.t_end
            )));
        }
        if !(self.picard_tol > 0.0 && self.picard_tol < 1.0) || self.picard_max == 0 {
            return Err(Error::config("picard_tol must be in (0, 1) and picard_max >= 1"));
        }
        if !(self.steady_tol >= 0.0) || self.fast_forward_steps == 0 || self.max_steps == 0 {
            return Err(Error::config(
                "steady_tol must be >= 0, fast_forward_steps and max_steps >= 1",
            ));
        }
        Ok(())
    }
}

/// `u_eps`, `p_eps` at time `t`. The pressure has zero mean over the
/// pressure cells and is zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub t: f64,
    pub u: StaggeredVectorField,
    pub p: ScalarField,
}

/// Nonlinear iteration of one implicit step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub picard_iterations: usize,
    /// Last relative velocity correction.
    pub picard_change: f64,
    pub refactorized: bool,
    pub cfl: f64,
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epsilon: f64,
    pub dt: f64,
    pub steps: usize,
    /// Implicit steps actually solved (the rest is the steady stretch).
    pub solved_steps: usize,
    pub steady_step: Option<usize>,
    pub steady_time: Option<f64>,
    pub picard_iterations: usize,
    pub max_picard_iterations: usize,
    pub factorizations: usize,
    pub max_cfl: f64,
    pub max_divergence: f64,
    pub fluid_faces: usize,
    pub warnings: Vec<String>,
}

/// Everything a micro run produces.
#[derive(Debug, Clone)]
pub struct MicroRun {
    pub summary: RunSummary,
    pub ledger: EnergyLedger,
    pub integrals: TimeIntegrals,
    pub norms: ScalingNorms,
    pub state: MicroState,
    pub exponent: f64,
    pub faces: FaceGeometry,
}

/// Implicit Euler stepper for
/// `eps^2 du/dt - div(eta(Du) Du) + (u . grad) u + grad p = f`, `div u = 0`.
///
/// Every step solves the coupled velocity-pressure system with the viscosity
/// and the convecting velocity at the current iterate. Corrections come from
/// a stored factorization with reference viscosity (a chord iteration); the
/// converged iterate is the fully implicit step.
pub struct MicroSolver {
    pub config: MicroConfig,
    pub ops: Operators,
    pub faces: FaceGeometry,
    pub forcing: ForcingSpec,
    strain_t: SparseMatrix,
    blocked: Vec<bool>,
    layout: Layout,
    /// Adjacent cells of every face.
    face_cells: Vec<[usize; 2]>,
    kkt: Option<Kkt>,
    factorizations: usize,
}

impl MicroSolver {
    pub fn new(config: MicroConfig) -> Result<Self> {
        config.validate()?;
        let faces = FaceGeometry::perforated(&config.domain)?;
        let grid = faces.grid;
        let forcing = ForcingSpec::build(&config.forcing, &config.initial, &faces)?;
        let ops = Operators::new(grid);
        let layout = Layout::new(&ops, &faces)?;
        let mut face_cells = Vec::with_capacity(grid.n_faces());
        for j in 0..grid.ny {
            for i in 0..grid.u_cols() {
                let lo = i.saturating_sub(1);
                let hi = i.min(grid.nx - 1);
                face_cells.push([grid.cell(lo, j), grid.cell(hi, j)]);
            }
        }
        for j in 0..grid.v_rows() {
            for i in 0..grid.nx {
                let lo = j.saturating_sub(1);
                let hi = j.min(grid.ny - 1);
                face_cells.push([grid.cell(i, lo), grid.cell(i, hi)]);
            }
        }
        Ok(Self {
            strain_t: ops.strain.transpose(),
            blocked: faces.blocked_faces(),
            config,
            ops,
            faces,
            forcing,
            layout,
            face_cells,
            kkt: None,
            factorizations: 0,
        })
    }

    pub fn initial_state(&self) -> MicroState {
        MicroState {
            t: 0.0,
            u: self.forcing.u0.clone(),
            p: ScalarField::zeros(self.faces.grid),
        }
    }

    fn eps2(&self) -> f64 {
        self.config.domain.epsilon.powi(2)
    }

    pub(crate) fn cell_viscosity(&self, s: &[f64]) -> Vec<f64> {
        s.iter().map(|&x| self.config.viscosity.eta(x)).collect()
    }

    /// `(1/2) eta_face cut` per face.
    pub(crate) fn cut_coefficients(&self, eta: &[f64]) -> Vec<f64> {
        self.face_cells
            .iter()
            .zip(&self.faces.cut)
            .map(|(&[a, b], &c)| 0.25 * (eta[a] + eta[b]) * c)
            .collect()
    }

    fn factor(&mut self, eta: &[f64], mass: f64) -> Result<()> {
        let viscous = self.ops.viscous_matrix(eta);
        let cut = self.cut_coefficients(eta);
        let cut_free = self.layout.gather(&cut);
        self.kkt = Some(Kkt::factor(&self.layout, &viscous, &cut_free, mass)?);
        self.factorizations += 1;
        Ok(())
    }

    /// `(K(eta) u)` on all faces.
    fn viscous_apply(&self, eta: &[f64], u: &[f64]) -> Vec<f64> {
        let w = self.ops.strain_weights(eta);
        let d: Vec<f64> = self.ops.strain.mul_vec(u).iter().zip(&w).map(|(a, b)| a * b).collect();
        let mut out = self.strain_t.mul_vec(&d);
        for ((o, c), x) in out.iter_mut().zip(self.cut_coefficients(eta)).zip(u) {
            *o += c * x;
        }
        out
    }

    /// Solves `mass (u - u_prev) + K(eta(u)) u + C(u) u - B^T p = f`,
    /// `B u = 0` on the fluid. `mass = 0` gives the stationary problem.
    fn implicit_solve(
        &mut self,
        u_prev: &[f64],
        p_prev: &[f64],
        mass: f64,
    ) -> Result<(Vec<f64>, Vec<f64>, StepReport)> {
        let mut refactorized = false;
        if self.kkt.as_ref().is_none_or(|k| k.mass != mass) {
            let eta0 = vec![self.config.viscosity.eta0(); self.faces.grid.n_cells()];
            self.factor(&eta0, mass)?;
            refactorized = true;
        }
        let f = self.forcing.f.to_flat();
        let nf = self.faces.grid.n_faces();
        let mut u = u_prev.to_vec();
        let mut p: Vec<f64> = self.layout.pressure.iter().map(|&c| p_prev[c]).collect();
        let rhs: Vec<f64> = self
            .layout
            .free
            .iter()
            .map(|&k| f[k] + mass * u_prev[k])
            .collect();
        let mut conv = vec![0.0; nf];
        let mut history = Vec::new();
        let mut last_change = f64::INFINITY;
        let mut refactored_here = false;
        for it in 1..=self.config.picard_max {
            let s = self.ops.strain_sq(&u);
            let eta = self.cell_viscosity(&s);
            let ku = self.viscous_apply(&eta, &u);
            convect(&self.faces.grid, &u, &u, &self.blocked, &mut conv);
            let bt_p = self.layout.div_t.mul_vec(&p);
            let u_free = self.layout.gather(&u);
            let ru: Vec<f64> = self
                .layout
                .free
                .iter()
                .enumerate()
                .map(|(k, &face)| rhs[k] - mass * u[face] - ku[face] - conv[face] + bt_p[k])
                .collect();
            let rp = self.layout.div.mul_vec(&u_free);
            let (du, dp) = self.kkt.as_ref().expect("factorized").solve(&ru, &rp)?;
            let mut new_free = u_free;
            for (x, d) in new_free.iter_mut().zip(&du) {
                *x += d;
            }
            for (x, d) in p.iter_mut().zip(&dp) {
                *x += d;
            }
            self.layout.scatter(&new_free, &mut u);
            let size = norm(&new_free);
            let change = norm(&du) / if size > 0.0 { size } else { 1.0 };
            history.push(change);
            if !change.is_finite() {
                return Err(Error::numerical("non-finite velocity in the nonlinear iteration"));
            }
            if change <= self.config.picard_tol {
                let report = StepReport {
                    picard_iterations: it,
                    picard_change: change,
                    refactorized: refactorized || refactored_here,
                    cfl: 0.0,
                    divergence: 0.0,
                };
                let mut p_full = vec![0.0; self.faces.grid.n_cells()];
                let mean = p.iter().sum::<f64>() / p.len() as f64;
                for (&c, &x) in self.layout.pressure.iter().zip(&p) {
                    p_full[c] = x - mean;
                }
                return Ok((u, p_full, report));
            }
            if it >= 2 && change > 0.5 * last_change && !refactored_here {
                debug!("refactorizing after contraction {:.3}", change / last_change);
                let s = self.ops.strain_sq(&u);
                let eta = self.cell_viscosity(&s);
                self.factor(&eta, mass)?;
                refactored_here = true;
            }
            last_change = change;
        }
        Err(Error::NotConverged {
            what: "nonlinear (Picard) iteration".into(),
            report: LinearSolveReport {
                iterations: self.config.picard_max,
                relative_residual: last_change,
                converged: false,
                history,
            },
        })
    }

    /// One implicit Euler step of size `dt`.
    pub fn step(&mut self, state: &MicroState, dt: f64) -> Result<(MicroState, StepReport)> {
        self.faces.grid.ensure_same(&state.u.grid, "micro state")?;
        if !(dt > 0.0) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        let mass = self.eps2() / dt;
        let (u, p, mut report) = self.implicit_solve(&state.u.to_flat(), &state.p.values, mass)?;
        let u = StaggeredVectorField::from_flat(self.faces.grid, &u)?;
        let h = self.faces.grid.hx().min(self.faces.grid.hy());
        report.cfl = u.max_abs() * dt / h;
        report.divergence = field_norm(&divergence(&u), 2.0)?;
        let state = MicroState {
            t: state.t + dt,
            u,
            p: ScalarField::from_values(self.faces.grid, p)?,
        };
        Ok((state, report))
    }

    /// Stationary solution reached from `state`.
    pub fn steady_state(&mut self, state: &MicroState) -> Result<(MicroState, StepReport)> {
        let (u, p, report) = self.implicit_solve(&state.u.to_flat(), &state.p.values, 0.0)?;
        Ok((
            MicroState {
                t: state.t,
                u: StaggeredVectorField::from_flat(self.faces.grid, &u)?,
                p: ScalarField::from_values(self.faces.grid, p)?,
            },
            report,
        ))
    }

    pub(crate) fn sample(&self, state: &MicroState) -> Sample {
        let flat = state.u.to_flat();
        let s = self.ops.strain_sq(&flat);
        let eta = self.cell_viscosity(&s);
        let factor: Vec<f64> = s.iter().map(|&x| self.config.viscosity.factor(x)).collect();
        let mut conv = vec![0.0; flat.len()];
        convect(&self.faces.grid, &flat, &flat, &self.blocked, &mut conv);
        let vol = self.faces.grid.cell_volume();
        let cut = self.cut_coefficients(&eta);
        let dissipation = vol
            * (s.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>()
                + cut.iter().zip(&flat).map(|(c, x)| c * x * x).sum::<f64>());
        let f = self.forcing.f.to_flat();
        let work = vol * f.iter().zip(&flat).map(|(a, b)| a * b).sum::<f64>();
        let kinetic = 0.5 * self.eps2() * vol * flat.iter().map(|x| x * x).sum::<f64>();
        Sample {
            strain: self.ops.strain_tensor(&flat),
            grad_sq: self.ops.grad_sq(&flat),
            factor,
            convection: StaggeredVectorField::from_flat(self.faces.grid, &conv).expect("grid"),
            u: state.u.clone(),
            p: state.p.clone(),
            dissipation,
            work,
            kinetic,
        }
    }

    /// Steps to `t_end`. Once the flow is steady the stationary solution is
    /// held and the ledger, integrals and norms are advanced to `t_end` in
    /// `fast_forward_steps` steps without solves.
    pub fn run(mut self) -> Result<MicroRun> {
        let cfg = self.config.clone();
        let dt = cfg.time_step();
        let tau = cfg.relaxation_time();
        let mut state = self.initial_state();
        let mut recorder = Recorder::new(&self.ops, cfg.viscosity.exponent(), &self.sample(&state))?
            .with_forcing(&self.forcing.f);
        let mut summary = RunSummary {
            epsilon: cfg.domain.epsilon,
            dt,
            steps: 0,
            solved_steps: 0,
            steady_step: None,
            steady_time: None,
            picard_iterations: 0,
            max_picard_iterations: 0,
            factorizations: 0,
            max_cfl: 0.0,
            max_divergence: 0.0,
            fluid_faces: self.layout.n_free(),
            warnings: Vec::new(),
        };
        let mut peak = norm(&state.u.to_flat());
        let t_end = cfg.t_end;
        while state.t < t_end * (1.0 - 1e-12) {
            if summary.steps >= cfg.max_steps {
                return Err(Error::NotConverged {
                    what: format!("time stepping within {} steps", cfg.max_steps),
                    report: LinearSolveReport {
                        iterations: summary.steps,
                        relative_residual: f64::NAN,
                        converged: false,
                        history: Vec::new(),
                    },
                });
            }
            let h = dt.min(t_end - state.t);
            let (next, report) = self.step(&state, h)?;
            summary.steps += 1;
            summary.solved_steps += 1;
            summary.picard_iterations += report.picard_iterations;
            summary.max_picard_iterations = summary.max_picard_iterations.max(report.picard_iterations);
            summary.max_divergence = summary.max_divergence.max(report.divergence);
            if report.cfl > 1.0 && summary.max_cfl <= 1.0 {
                let msg = format!("CFL number {:.3} exceeds 1 at step {}", report.cfl, summary.steps);
                warn!("{msg}");
                summary.warnings.push(msg);
            }
            summary.max_cfl = summary.max_cfl.max(report.cfl);
            let sample = self.sample(&next);
            recorder.advance(&self.ops, summary.steps, next.t, h, &sample)?;
            let a = next.u.to_flat();
            let b = state.u.to_flat();
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let size = norm(&a);
            peak = peak.max(size);
            let steady = norm(&diff) <= cfg.steady_tol * (h / tau) * size.max(1e-12 * peak);
            state = next;
            if steady && state.t < t_end * (1.0 - 1e-12) {
                summary.steady_step = Some(summary.steps);
                summary.steady_time = Some(state.t);
                let (fixed, report) = self.steady_state(&state)?;
                summary.picard_iterations += report.picard_iterations;
                debug!(
                    "steady at step {} (t = {:.3e}), fast-forwarding",
                    summary.steps, state.t
                );
                let sample = self.sample(&fixed);
                let t0 = state.t;
                let n_ff = cfg.fast_forward_steps;
                let mut t_prev = t0;
                for k in 1..=n_ff {
                    let t = if k == n_ff { t_end } else { t0 + (t_end - t0) * k as f64 / n_ff as f64 };
                    summary.steps += 1;
                    recorder.advance(&self.ops, summary.steps, t, t - t_prev, &sample)?;
                    t_prev = t;
                }
                state = MicroState { t: t_end, ..fixed };
                break;
            }
        }
        summary.factorizations = self.factorizations;
        let (ledger, integrals, norms) = recorder.finish();
        Ok(MicroRun {
            summary,
            ledger,
            integrals,
            norms,
            state,
            exponent: cfg.viscosity.exponent(),
            faces: self.faces,
        })
    }
}

/// One implicit step built from scratch; see [`MicroSolver::step`].
pub fn micro_step(state: &MicroState, config: &MicroConfig) -> Result<(MicroState, StepReport)> {
    let mut solver = MicroSolver::new(config.clone())?;
    solver.step(state, config.time_step())
}

pub fn run_micro(config: &MicroConfig) -> Result<MicroRun> {
    MicroSolver::new(config.clone())?.run()
}
