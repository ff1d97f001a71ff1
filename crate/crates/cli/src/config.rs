//! Run configuration: every field optional, merged with precedence
//! flags > config file > defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tubecalc_core::convergence::Family;
use tubecalc_core::fields::ScalarField;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Reach,
    Functional,
    SolveLb,
    SolvePoisson,
    Converge,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Reach => "reach",
            Command::Functional => "functional",
            Command::SolveLb => "solve-lb",
            Command::SolvePoisson => "solve-poisson",
            Command::Converge => "converge",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Shape JSON file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<PathBuf>,
    /// Tube half-width; also the radius tested by `reach`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcells: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrand: Option<String>,
    /// Surface load `f` of the Laplace–Beltrami problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<ScalarField>,
    /// Poisson source.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<ScalarField>,
    /// Dirichlet data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<ScalarField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_normal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poincare: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lb_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lb_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_domain_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_surface_samples: Option<usize>,
    /// Relative bisection tolerance of the reach estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reach_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_lsc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_gap_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jac_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cn_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

macro_rules! merge_fields {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        RunConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: RunConfig) -> RunConfig {
        merge_fields!(
            self, lower, command, shape, h, spacing, subcells, integrand, field, source, boundary, eps_normal,
            poisson_spacing, poincare, family, n_max, dim, lb_h, lb_spacing, n_samples, n_domain_samples,
            n_surface_samples, reach_tol, tol_lsc, rel_gap_threshold, jac_threshold, cn_threshold, output, csv,
            threads, seed
        )
    }

    /// Positivity of every numeric parameter that is set.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("h", self.h),
            ("spacing", self.spacing),
            ("eps_normal", self.eps_normal),
            ("poisson_spacing", self.poisson_spacing),
            ("lb_h", self.lb_h),
            ("lb_spacing", self.lb_spacing),
            ("reach_tol", self.reach_tol),
            ("tol_lsc", self.tol_lsc),
            ("rel_gap_threshold", self.rel_gap_threshold),
            ("jac_threshold", self.jac_threshold),
            ("cn_threshold", self.cn_threshold),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        let counts = [
            ("n_max", self.n_max),
            ("n_samples", self.n_samples),
            ("n_domain_samples", self.n_domain_samples),
            ("n_surface_samples", self.n_surface_samples),
            ("threads", self.threads),
        ];
        for (name, v) in counts {
            if v == Some(0) {
                return Err(CliError::Invalid(format!("{name} must be at least 1")));
            }
        }
        if let Some(d) = self.dim {
            if d != 2 && d != 3 {
                return Err(CliError::Invalid(format!("dim must be 2 or 3, got {d}")));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn require_shape(&self) -> Result<&Path, CliError> {
        self.shape
            .as_deref()
            .ok_or_else(|| CliError::Invalid("this command needs --shape".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_layer_wins() {
        let flags = RunConfig { h: Some(0.1), ..Default::default() };
        let file = RunConfig { h: Some(0.3), spacing: Some(0.02), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.h, Some(0.1));
        assert_eq!(merged.spacing, Some(0.02));
    }

    #[test]
    fn file_layout() {
        let c: RunConfig = serde_json::from_str(r#"{"command": "solve-lb", "field": "z", "family": "ellipsoid_to_sphere"}"#).unwrap();
        assert_eq!(c.command, Some(Command::SolveLb));
        assert_eq!(c.field, Some(ScalarField::Coordinate(2)));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn negative_values_rejected() {
        assert!(RunConfig { spacing: Some(-1.0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { threads: Some(0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { h: Some(0.2), ..Default::default() }.validate().is_ok());
    }
}
