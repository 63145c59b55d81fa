use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Carreau-Yasuda law `eta_r(s) = (eta0 - eta_inf) (1 + lambda s)^(r/2 - 1) + eta_inf`
/// in terms of `s = |D|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarreauParams {
    pub eta0: f64,
    pub eta_inf: f64,
    pub lambda: f64,
    pub r: f64,
}

impl CarreauParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.eta0, self.eta_inf, self.lambda, self.r]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.r <= 1.0 || self.lambda < 0.0 {
            return Err(Error::config(format!(
                "Carreau parameters need r > 1 and lambda >= 0: {self:?}"
            )));
        }
        if !(self.eta0 > 0.0 && self.eta0 >= self.eta_inf && self.eta_inf >= 0.0) {
            return Err(Error::config(format!(
                "Carreau parameters need eta0 >= eta_inf >= 0 and eta0 > 0: {self:?}"
            )));
        }
        if self.r < 2.0 && self.eta_inf <= 0.0 {
            return Err(Error::config(
                "shear-thinning (r < 2) needs eta_inf > 0 for coercivity",
            ));
        }
        Ok(())
    }

    /// `(1 + lambda s)^(r/2 - 1)`.
    pub fn factor(&self, s: f64) -> f64 {
        (1.0 + self.lambda * s).powf(0.5 * self.r - 1.0)
    }

    pub fn eta(&self, s: f64) -> f64 {
        (self.eta0 - self.eta_inf) * self.factor(s) + self.eta_inf
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ViscosityModel {
    Carreau(CarreauParams),
    Constant { eta: f64 },
}

impl ViscosityModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ViscosityModel::Carreau(p) => p.validate(),
            ViscosityModel::Constant { eta } if *eta > 0.0 && eta.is_finite() => Ok(()),
            ViscosityModel::Constant { eta } => {
                Err(Error::config(format!("viscosity must be positive, got {eta}")))
            }
        }
    }

    /// Zero-shear viscosity, the one entering the Darcy law.
    pub fn eta0(&self) -> f64 {
        match self {
            ViscosityModel::Carreau(p) => p.eta0,
            ViscosityModel::Constant { eta } => *eta,
        }
    }

    /// Growth exponent `r`; 2 for a Newtonian fluid.
    pub fn exponent(&self) -> f64 {
        match self {
            ViscosityModel::Carreau(p) => p.r,
            ViscosityModel::Constant { .. } => 2.0,
        }
    }

    pub fn eta(&self, s: f64) -> f64 {
        match self {
            ViscosityModel::Carreau(p) => p.eta(s),
            ViscosityModel::Constant { eta } => *eta,
        }
    }

    /// Nonlinear strain factor `(1 + lambda s)^(r/2 - 1)`.
    pub fn factor(&self, s: f64) -> f64 {
        match self {
            ViscosityModel::Carreau(p) => p.factor(s),
            ViscosityModel::Constant { .. } => 1.0,
        }
    }
}

/// Pointwise Carreau-Yasuda viscosity of a field of `|D|^2` values.
pub fn carreau_viscosity(d_sq: &ScalarField, params: &CarreauParams) -> Result<ScalarField> {
    params.validate()?;
    if let Some(bad) = d_sq.values.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::domain(format!("|D|^2 must be non-negative, got {bad}")));
    }
    Ok(ScalarField {
        grid: d_sq.grid,
        values: d_sq.values.iter().map(|&s| params.eta(s)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn params(r: f64) -> CarreauParams {
        CarreauParams {
            eta0: 1.0,
            eta_inf: 0.5,
            lambda: 1.0,
            r,
        }
    }

    #[test]
    fn limits() {
        let p = params(1.5);
        assert!((p.eta(0.0) - 1.0).abs() < 1e-15);
        assert!((p.eta(1e20) - 0.5).abs() < 1e-5);
        assert!((params(2.0).eta(123.0) - 1.0).abs() < 1e-15);
        // r = 3: eta = 0.5 sqrt(1 + s) + 0.5
        assert!((params(3.0).eta(3.0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let g = GridSpec::periodic(4, 1.0).unwrap();
        let mut s = ScalarField::zeros(g);
        s.values[3] = -1.0;
        assert!(matches!(carreau_viscosity(&s, &params(1.5)), Err(Error::Domain(_))));
        let mut p = params(1.5);
        p.eta_inf = 0.0;
        assert!(p.validate().is_err());
        p.r = 3.0;
        assert!(p.validate().is_ok());
        p.eta_inf = 2.0;
        assert!(p.validate().is_err());
    }
}
