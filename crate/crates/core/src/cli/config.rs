use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cmft::{CmftConfig, Thresholds};
use crate::eigensolver::LanczosConfig;
use crate::hamiltonian::{Boundary, ClusterShape, ModelParams};
use crate::observables::{Method, SolveOptions};

use super::{CliError, Command};

/// A list of values, or `points` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }

    fn check(&self, field: &str) -> Result<(), CliError> {
        let v = self.values();
        if v.is_empty() {
            return Err(CliError::config(format!("`{field}`: grid is empty")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::config(format!("`{field}`: grid values must be finite")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[default]
    Chain,
    Cluster,
}

/// Eigensolver settings for canonical chain sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub method: Method,
    /// Residual tolerance relative to `‖H‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub krylov_dim: usize,
    /// Refuse Hamiltonians with more estimated stored entries.
    pub max_nonzeros: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let lanczos = LanczosConfig::default();
        let opts = SolveOptions::default();
        Self {
            method: opts.method,
            tol: lanczos.tol,
            max_iter: lanczos.max_iter,
            krylov_dim: lanczos.krylov_dim,
            max_nonzeros: opts.max_nonzeros,
        }
    }
}

/// One run. Command-dependent fields left out of the file are filled in by
/// [`RunConfig::resolve`], and the resolved form is what outputs echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub geometry: Geometry,
    /// Chain length.
    pub sites: usize,
    pub boundary: Boundary,
    pub cluster: ClusterShape,
    /// Photon cap for chains; the sector charge when absent. Clusters use
    /// `cmft.n_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Inclusive charge range of a chain `ρ(μ)` run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charges: Option<[usize; 2]>,
    /// Sector of correlation and fidelity runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charge: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta12: Option<Grid>,
    /// Largest polariton number of the single-cavity table.
    pub polaritons: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<usize>,
    /// Fidelity step `δκ`.
    pub dk: f64,
    pub solver: SolverSettings,
    pub cmft: CmftConfig,
    pub thresholds: Thresholds,
    pub seed: u64,
    /// Thread count; never echoed since it cannot change results.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            geometry: Geometry::default(),
            sites: 6,
            boundary: Boundary::default(),
            cluster: ClusterShape::default(),
            n_max: None,
            charges: None,
            charge: None,
            kappa: None,
            mu: None,
            beta12: None,
            polaritons: 5,
            reference: None,
            max_distance: None,
            dk: 1e-3,
            solver: SolverSettings::default(),
            cmft: CmftConfig::default(),
            thresholds: Thresholds::default(),
            seed: LanczosConfig::default().seed,
            workers: None,
        }
    }
}

fn range(start: f64, stop: f64, points: usize) -> Option<Grid> {
    Some(Grid::Range { start, stop, points })
}

impl RunConfig {
    /// Reads a config file. A previous run's JSON output is accepted too; its
    /// embedded `config` is used and must belong to the same command.
    pub fn load(path: &Path, command: Command) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let doc: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let located = |e: serde_json::Error| CliError::config(format!("{}: {e}", path.display()));
        match doc.get("config") {
            Some(inner) if doc.get("results").is_some() => {
                if let Some(recorded) = doc.get("command").and_then(|c| c.as_str()) {
                    if recorded != command.name() {
                        return Err(CliError::config(format!(
                            "{} was produced by `{recorded}`, not `{}`",
                            path.display(),
                            command.name()
                        )));
                    }
                }
                serde_json::from_value(inner.clone()).map_err(located)
            }
            _ => serde_json::from_str(&text).map_err(located),
        }
    }

    /// Fills every command-dependent default so the echo is self-contained.
    pub fn resolve(mut self, command: Command) -> Self {
        let single_kappa = Some(Grid::List(vec![self.model.kappa]));
        match command {
            Command::SingleCavity => {
                self.beta12 = self.beta12.or(Some(Grid::List(vec![self.model.beta12])));
                self.mu = self.mu.or(Some(Grid::List(vec![0.0])));
            }
            Command::RhoMu => {
                if self.geometry == Geometry::Chain {
                    self.charges = self.charges.or(Some([0, 2 * self.sites]));
                } else {
                    self.kappa = self.kappa.or(single_kappa);
                }
                self.mu = self.mu.or(range(-1.2, -0.4, 801));
            }
            Command::Correlations => {
                self.charge = self.charge.or(Some(self.sites));
                self.kappa = self.kappa.or(single_kappa);
                let (i0, d) = crate::observables::default_window(self.sites);
                self.reference = self.reference.or(Some(i0));
                self.max_distance = self.max_distance.or(Some(d));
            }
            Command::Fidelity => {
                self.charge = self.charge.or(Some(self.sites));
                self.kappa = self.kappa.or(range(0.01, 0.08, 15));
            }
            Command::CmftScan => {
                self.geometry = Geometry::Cluster;
                self.kappa = self.kappa.or(single_kappa);
                self.mu = self.mu.or(range(-1.2, -0.6, 13));
            }
            Command::PhaseDiagram => {
                self.geometry = Geometry::Cluster;
                self.kappa = self.kappa.or(range(0.0, 0.1, 6));
                self.mu = self.mu.or(range(-1.2, -0.6, 13));
            }
        }
        self
    }

    pub fn validate(&self, command: Command) -> Result<(), CliError> {
        self.model
            .validate()
            .map_err(|e| CliError::config(format!("`model`: {e}")))?;
        if self.model.beta01 != 1.0 {
            return Err(CliError::config("`model.beta01`: energies are in units of beta01, which must be 1"));
        }
        if self.sites == 0 {
            return Err(CliError::config("`sites` must be at least 1"));
        }
        for (name, grid) in [("kappa", &self.kappa), ("mu", &self.mu), ("beta12", &self.beta12)] {
            if let Some(g) = grid {
                g.check(name)?;
            }
        }
        if let Some(k) = &self.kappa {
            if k.values().iter().any(|x| *x < 0.0) {
                return Err(CliError::config("`kappa`: hopping must be non-negative"));
            }
        }
        if let Some(b) = &self.beta12 {
            if b.values().iter().any(|x| *x < 0.0) {
                return Err(CliError::config("`beta12`: couplings must be non-negative"));
            }
        }
        if let Some([lo, hi]) = self.charges {
            if lo > hi {
                return Err(CliError::config("`charges`: lower bound exceeds upper bound"));
            }
        }
        if self.polaritons == 0 {
            return Err(CliError::config("`polaritons` must be at least 1"));
        }
        if !(self.dk > 0.0 && self.dk.is_finite()) {
            return Err(CliError::config("`dk` must be positive"));
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || s.max_iter == 0 || s.krylov_dim < 2 {
            return Err(CliError::config(
                "`solver`: tol must be positive, max_iter ≥ 1 and krylov_dim ≥ 2",
            ));
        }
        self.cmft
            .validate()
            .map_err(|e| CliError::config(format!("`cmft`: {e}")))?;
        let t = &self.thresholds;
        if !(t.psi_tol > 0.0 && t.rho_tol > 0.0 && t.delta_mu > 0.0) {
            return Err(CliError::config("`thresholds`: all tolerances must be positive"));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("`workers` must be at least 1"));
        }
        match command {
            Command::Correlations | Command::Fidelity if self.geometry != Geometry::Chain => {
                Err(CliError::config(format!("`geometry`: `{}` needs a chain", command.name())))
            }
            Command::Correlations => {
                let (i0, d) = (self.reference.unwrap_or(0), self.max_distance.unwrap_or(0));
                if i0 + d >= self.sites {
                    return Err(CliError::config("`reference` + `max_distance` must stay inside the chain"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            method: self.solver.method,
            lanczos: LanczosConfig {
                tol: self.solver.tol,
                max_iter: self.solver.max_iter,
                krylov_dim: self.solver.krylov_dim,
                seed: self.seed,
            },
            n_max: self.n_max,
            max_nonzeros: self.solver.max_nonzeros,
        }
    }

    pub fn cmft_config(&self) -> CmftConfig {
        CmftConfig {
            seed: self.seed,
            ..self.cmft
        }
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.kappa.as_ref().map(Grid::values).unwrap_or_else(|| vec![self.model.kappa])
    }

    pub fn mus(&self) -> Vec<f64> {
        self.mu.as_ref().map(Grid::values).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g: Grid = serde_json::from_str(r#"{"start": 0.0, "stop": 1.0, "points": 5}"#).unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g: Grid = serde_json::from_str("[0.1, 0.3]").unwrap();
        assert_eq!(g.values(), vec![0.1, 0.3]);
        assert!(Grid::List(vec![]).check("mu").is_err());
        assert!(Grid::List(vec![f64::NAN]).check("mu").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = serde_json::from_str::<RunConfig>("{\n  \"sites\": 4,\n  \"sitez\": 3\n}").unwrap_err();
        assert_eq!(err.line(), 3);
        assert!(err.to_string().contains("sitez"));
    }

    #[test]
    fn resolved_config_roundtrips() {
        let cfg = RunConfig {
            workers: Some(3),
            ..RunConfig::default()
        }
        .resolve(Command::Fidelity);
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(!text.contains("workers"));
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, RunConfig { workers: None, ..cfg });
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = RunConfig::default();
        cfg.model.beta01 = 2.0;
        let msg = cfg.validate(Command::RhoMu).unwrap_err().to_string();
        assert!(msg.contains("beta01"));
        let cfg = RunConfig {
            geometry: Geometry::Cluster,
            ..RunConfig::default()
        };
        assert!(cfg.resolve(Command::Fidelity).validate(Command::Fidelity).is_err());
        let cfg = RunConfig {
            mu: Some(Grid::Range {
                start: 0.0,
                stop: 1.0,
                points: 0,
            }),
            ..RunConfig::default()
        };
        assert!(cfg.validate(Command::RhoMu).unwrap_err().to_string().contains("`mu`"));
    }
}
