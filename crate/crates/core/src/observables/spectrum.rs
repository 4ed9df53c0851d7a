use crate::eigensolver::dense_spectrum;
use crate::error::{JchError, Result};
use crate::hamiltonian::{build_chain, Boundary, ModelParams};

/// Spectrum of a single cavity at fixed polariton charge.
#[derive(Debug, Clone, PartialEq)]
pub struct CavitySpectrum {
    pub n: usize,
    /// Ascending eigenvalues of the charge-`n` block.
    pub energies: Vec<f64>,
    /// `E − μ n` for each eigenvalue.
    pub shifted: Vec<f64>,
}

impl CavitySpectrum {
    /// `E_n`, the lowest level of the block.
    pub fn lowest(&self) -> f64 {
        self.energies[0]
    }

    pub fn lowest_shifted(&self) -> f64 {
        self.shifted[0]
    }
}

pub fn single_cavity_spectrum(n: usize, params: &ModelParams, mu: f64) -> Result<CavitySpectrum> {
    if n == 0 {
        return Err(JchError::InvalidParameter("polariton number must be ≥ 1".into()));
    }
    let (_, h) = build_chain(1, n, &params.with_kappa(0.0), n, Boundary::Open)?;
    let energies = dense_spectrum(&h)?;
    let shifted = energies.iter().map(|e| e - mu * n as f64).collect();
    Ok(CavitySpectrum {
        n,
        energies,
        shifted,
    })
}

/// `E_2 − 2 E_1`; negative when two polaritons bind on one cavity.
pub fn pair_binding_energy(params: &ModelParams) -> Result<f64> {
    let e1 = single_cavity_spectrum(1, params, 0.0)?.lowest();
    let e2 = single_cavity_spectrum(2, params, 0.0)?.lowest();
    Ok(e2 - 2.0 * e1)
}
