use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, HoleKind, HoleShape};
use crate::micro::{CarreauParams, ForcingKind, InitialKind, MicroConfig, ViscosityModel};

/// Sweep configuration, read from TOML with sections `[domain]`, `[hole]`,
/// `[carreau]`, `[forcing]`, `[solver]` and `[sweep]`. Unknown keys are
/// rejected; every key has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub domain: DomainSection,
    pub hole: HoleSection,
    pub carreau: CarreauSection,
    pub forcing: ForcingSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub lx: f64,
    pub ly: f64,
    /// Grid cells per period; used by the micro solver and the cell problem.
    pub cells_per_eps: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            lx: 1.0,
            ly: 1.0,
            cells_per_eps: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleName {
    Disk,
    Ellipse,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoleSection {
    pub kind: HoleName,
    pub radius: Option<f64>,
    pub semi_x: Option<f64>,
    pub semi_y: Option<f64>,
    pub half_width: Option<f64>,
    /// Center in reference cell coordinates `(0, 1)^2`.
    pub center: [f64; 2],
}

impl Default for HoleSection {
    fn default() -> Self {
        Self {
            kind: HoleName::Disk,
            radius: Some(0.25),
            semi_x: None,
            semi_y: None,
            half_width: None,
            center: [0.5, 0.5],
        }
    }
}

impl HoleSection {
    pub fn shape(&self) -> Result<HoleShape> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::config(format!("[hole] kind {:?} needs `{key}`", self.kind)))
        };
        let kind = match self.kind {
            HoleName::Disk => HoleKind::Disk {
                radius: need(self.radius, "radius")?,
            },
            HoleName::Ellipse => HoleKind::Ellipse {
                semi_x: need(self.semi_x, "semi_x")?,
                semi_y: need(self.semi_y, "semi_y")?,
            },
            HoleName::Square => HoleKind::Square {
                half_width: need(self.half_width, "half_width")?,
            },
        };
        let shape = HoleShape {
            kind,
            center: [self.center[0] - 0.5, self.center[1] - 0.5],
        };
        shape.validate()?;
        Ok(shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Carreau,
    /// Constant viscosity `eta0`, bypassing the Carreau-Yasuda law.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarreauSection {
    pub model: ModelName,
    pub eta0: f64,
    pub eta_inf: f64,
    pub lambda: f64,
    pub r: f64,
}

impl Default for CarreauSection {
    fn default() -> Self {
        Self {
            model: ModelName::Carreau,
            eta0: 1.0,
            eta_inf: 0.5,
            lambda: 1.0,
            r: 2.0,
        }
    }
}

impl CarreauSection {
    pub fn model(&self) -> Result<ViscosityModel> {
        let m = match self.model {
            ModelName::Carreau => ViscosityModel::Carreau(CarreauParams {
                eta0: self.eta0,
                eta_inf: self.eta_inf,
                lambda: self.lambda,
                r: self.r,
            }),
            ModelName::Constant => ViscosityModel::Constant { eta: self.eta0 },
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingName {
    Vortex,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialName {
    Rest,
    Vortex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingSection {
    pub kind: ForcingName,
    /// Vortex amplitude.
    pub amplitude: f64,
    /// Constant force components.
    pub fx: f64,
    pub fy: f64,
    pub initial: InitialName,
    pub initial_amplitude: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            kind: ForcingName::Vortex,
            amplitude: 1.0,
            fx: 1.0,
            fy: 0.0,
            initial: InitialName::Rest,
            initial_amplitude: 1.0,
        }
    }
}

impl ForcingSection {
    pub fn force(&self) -> ForcingKind {
        match self.kind {
            ForcingName::Vortex => ForcingKind::Vortex {
                amplitude: self.amplitude,
            },
            ForcingName::Constant => ForcingKind::Constant {
                fx: self.fx,
                fy: self.fy,
            },
        }
    }

    pub fn initial(&self) -> InitialKind {
        match self.initial {
            InitialName::Rest => InitialKind::Rest,
            InitialName::Vortex => InitialKind::Vortex {
                amplitude: self.initial_amplitude,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub cell_tol: f64,
    pub darcy_tol: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Time step in units of `eps^4 / eta0`.
    pub dt_relax: f64,
    pub t_end: f64,
    pub steady_tol: f64,
    pub fast_forward_steps: usize,
    pub max_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        use crate::micro::MicroConfig as M;
        let d = M::new(
            DomainSpec {
                lx: 1.0,
                ly: 1.0,
                epsilon: 1.0,
                hole: HoleShape::disk(0.25),
                cells_per_eps: 16,
            },
            ViscosityModel::Constant { eta: 1.0 },
            ForcingKind::Vortex { amplitude: 1.0 },
        );
        Self {
            cell_tol: 1e-9,
            darcy_tol: 1e-10,
            picard_tol: d.picard_tol,
            picard_max: d.picard_max,
            dt_relax: d.dt_relax,
            t_end: d.t_end,
            steady_tol: d.steady_tol,
            fast_forward_steps: d.fast_forward_steps,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Descending.
    pub epsilons: Vec<f64>,
    /// Concurrent micro runs.
    pub workers: usize,
    /// Report directory; not part of the config hash.
    pub output: Option<PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.25, 0.125, 0.0625],
            workers: 1,
            output: None,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::config(format!("config file {} does not exist", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let eps = &self.sweep.epsilons;
        if eps.len() < 3 {
            return Err(Error::config(format!("a sweep needs >= 3 epsilon values, got {}", eps.len())));
        }
        if eps.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::config("sweep epsilons must be strictly descending"));
        }
        if self.sweep.workers == 0 {
            return Err(Error::config("workers must be >= 1"));
        }
        if !(self.solver.cell_tol > 0.0 && self.solver.cell_tol <= 1e-4) {
            return Err(Error::config("cell_tol must be in (0, 1e-4]"));
        }
        if !(self.solver.darcy_tol > 0.0 && self.solver.darcy_tol < 1.0) {
            return Err(Error::config("darcy_tol must be in (0, 1)"));
        }
        self.carreau.model()?;
        self.hole.shape()?;
        for &e in eps {
            self.micro(e)?.validate()?;
        }
        Ok(())
    }

    pub fn domain(&self, epsilon: f64) -> Result<DomainSpec> {
        Ok(DomainSpec {
            lx: self.domain.lx,
            ly: self.domain.ly,
            epsilon,
            hole: self.hole.shape()?,
            cells_per_eps: self.domain.cells_per_eps,
        })
    }

    pub fn micro(&self, epsilon: f64) -> Result<MicroConfig> {
        let s = &self.solver;
        let mut m = MicroConfig::new(self.domain(epsilon)?, self.carreau.model()?, self.forcing.force());
        m.initial = self.forcing.initial();
        m.picard_tol = s.picard_tol;
        m.picard_max = s.picard_max;
        m.dt_relax = s.dt_relax;
        m.t_end = s.t_end;
        m.steady_tol = s.steady_tol;
        m.fast_forward_steps = s.fast_forward_steps;
        m.max_steps = s.max_steps;
        Ok(m)
    }

    /// SHA-256 (hex) of the canonical JSON form, without the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.sweep.output = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
