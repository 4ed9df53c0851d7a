//! Measured quantities: chemical potentials and `ρ(μ)` staircases,
//! correlation functions, fidelity susceptibility and single-cavity spectra.

mod correlation;
mod energy;
mod fidelity;
mod spectrum;

pub use correlation::{
    correlation, correlation_series, default_window, density, expectation, site_occupations,
    CorrelationKind, CorrelationSeries,
};
pub use energy::{
    chemical_potentials, extrapolate_gap, jumps, staircase, EnergyTable, GapExtrapolation, Jump,
    Staircase, Step,
};
pub use fidelity::{
    fidelity_scan, fidelity_susceptibility, interior_maxima, refined_peak, FidelityPoint,
    MIN_OVERLAP,
};
pub use spectrum::{pair_binding_energy, single_cavity_spectrum, CavitySpectrum};

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_sector, sector_dimension, SectorBasis};
use crate::eigensolver::{davidson, ground_state_with, GroundState, LanczosConfig};
use crate::error::{JchError, Result};
use crate::hamiltonian::{
    build_on, chain_bonds, estimate_nonzeros, Boundary, DressedPreconditioner, ModelParams,
};

/// Iterative eigensolver used for sector ground states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lanczos,
    /// Davidson preconditioned in the single-cavity eigenbasis.
    #[default]
    Davidson,
}

/// Settings shared by canonical chain solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub lanczos: LanczosConfig,
    /// Photon cap per cavity; the sector charge `N` when `None`.
    pub n_max: Option<usize>,
    /// Refuse Hamiltonians estimated above this many stored entries.
    pub max_nonzeros: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::default(),
            lanczos: LanczosConfig::default(),
            n_max: None,
            max_nonzeros: 200_000_000,
        }
    }
}

impl SolveOptions {
    pub fn n_max_for(&self, charge: usize) -> usize {
        self.n_max.map_or(charge, |cap| cap.min(charge))
    }
}

const DAVIDSON_SUBSPACE: usize = 40;

/// Ground state of an `L`-site chain in the sector of charge `N`.
pub fn solve_chain(
    sites: usize,
    charge: usize,
    params: &ModelParams,
    boundary: Boundary,
    opts: &SolveOptions,
) -> Result<(SectorBasis, GroundState)> {
    params.validate()?;
    let n_max = opts.n_max_for(charge);
    let bonds = chain_bonds(sites, boundary);
    let estimate = estimate_nonzeros(sector_dimension(sites, charge, n_max), sites, bonds.len());
    if estimate > opts.max_nonzeros {
        return Err(JchError::ResourceGuard {
            what: "estimated Hamiltonian nonzeros",
            size: estimate,
            limit: opts.max_nonzeros,
        });
    }
    let basis = enumerate_sector(sites, charge, n_max)?;
    let h = build_on(&basis, params, &bonds);
    let gs = match opts.method {
        Method::Lanczos => ground_state_with(&h, &opts.lanczos, None),
        Method::Davidson => {
            let pre = DressedPreconditioner::new(&basis, params, 0.0);
            let cfg = LanczosConfig {
                krylov_dim: opts.lanczos.krylov_dim.min(DAVIDSON_SUBSPACE),
                ..opts.lanczos
            };
            let start = pre.start_vector(cfg.seed);
            davidson(&h, &pre, &cfg, Some(&start))
        }
    };
    Ok((basis, gs))
}
