use rayon::prelude::*;

use crate::eigensolver::{dot, GroundState};
use crate::error::{JchError, Result};
use crate::hamiltonian::{Boundary, ModelParams};

use super::{solve_chain, SolveOptions};

/// Overlaps below this are treated as orthogonal.
pub const MIN_OVERLAP: f64 = 1e-12;

/// `χ_FS = −2 ln |⟨Ψ(κ)|Ψ(κ+δκ)⟩| / δκ²`.
pub fn fidelity_susceptibility(a: &GroundState, b: &GroundState, dk: f64) -> Result<f64> {
    if a.vector.len() != b.vector.len() {
        return Err(JchError::DimensionMismatch(a.vector.len(), b.vector.len()));
    }
    if !(dk > 0.0) {
        return Err(JchError::InvalidParameter("δκ must be positive".into()));
    }
    let overlap = dot(&a.vector, &b.vector).abs().min(1.0);
    if overlap < MIN_OVERLAP {
        return Err(JchError::OrthogonalStates { overlap });
    }
    Ok(-2.0 * overlap.ln() / (dk * dk))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityPoint {
    pub kappa: f64,
    /// With the configured step `δκ`.
    pub chi: f64,
    /// With `δκ / 2`.
    pub chi_half: f64,
}

impl FidelityPoint {
    /// Relative change between the two step sizes.
    pub fn step_sensitivity(&self) -> f64 {
        ((self.chi - self.chi_half) / self.chi_half).abs()
    }
}

/// `χ_FS(κ)` of one chain sector along a κ grid, at `δκ` and `δκ/2`.
pub fn fidelity_scan(
    sites: usize,
    charge: usize,
    params: &ModelParams,
    boundary: Boundary,
    kappas: &[f64],
    dk: f64,
    opts: &SolveOptions,
) -> Result<Vec<FidelityPoint>> {
    kappas
        .par_iter()
        .map(|&kappa| {
            let solve = |k: f64| -> Result<GroundState> {
                let (_, gs) = solve_chain(sites, charge, &params.with_kappa(k), boundary, opts)?;
                gs.into_result()
            };
            let base = solve(kappa)?;
            let full = solve(kappa + dk)?;
            let half = solve(kappa + 0.5 * dk)?;
            Ok(FidelityPoint {
                kappa,
                chi: fidelity_susceptibility(&base, &full, dk)?,
                chi_half: fidelity_susceptibility(&base, &half, 0.5 * dk)?,
            })
        })
        .collect()
}

/// Indices of strict interior local maxima of `values`.
pub fn interior_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&k| values[k] > values[k - 1] && values[k] > values[k + 1])
        .collect()
}

/// Location of the maximum refined by a parabola through its neighbours.
pub fn refined_peak(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let k = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?
        .0;
    if k == 0 || k + 1 >= ys.len() {
        return Some(xs[k]);
    }
    let (x0, x1, x2) = (xs[k - 1], xs[k], xs[k + 1]);
    let (y0, y1, y2) = (ys[k - 1], ys[k], ys[k + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a >= 0.0 {
        return Some(x1);
    }
    Some((-b / (2.0 * a)).clamp(x0, x2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::ground_state;
    use crate::hamiltonian::SparseOperator;
    use approx::assert_abs_diff_eq;

    fn state(v: Vec<f64>) -> GroundState {
        GroundState {
            energy: 0.0,
            vector: v,
            residual: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn identical_states_give_zero() {
        let s = state(vec![0.6, 0.8]);
        assert_eq!(fidelity_susceptibility(&s, &s, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn sign_of_vector_is_irrelevant() {
        let a = state(vec![0.6, 0.8]);
        let b = state(vec![-0.6, -0.8]);
        assert_eq!(fidelity_susceptibility(&a, &b, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_states_flagged() {
        let a = state(vec![1.0, 0.0]);
        let b = state(vec![0.0, 1.0]);
        assert!(matches!(
            fidelity_susceptibility(&a, &b, 0.1),
            Err(JchError::OrthogonalStates { .. })
        ));
    }

    /// `H(κ) = -cos 2κ σz − sin 2κ σx` has ground vector `(cos κ, sin κ)`,
    /// rotating at unit rate; `χ = −2 ln cos δκ / δκ² → 1`.
    #[test]
    fn rotating_two_level_state() {
        let h = |k: f64| {
            let (c, s) = ((2.0 * k).cos(), (2.0 * k).sin());
            SparseOperator::from_triplets(2, &[(0, 0, -c), (1, 1, c), (0, 1, -s), (1, 0, -s)])
        };
        let k0 = 0.3;
        for dk in [1e-2, 1e-3] {
            let a = ground_state(&h(k0), 1e-14, 50, 1);
            let b = ground_state(&h(k0 + dk), 1e-14, 50, 1);
            let chi = fidelity_susceptibility(&a, &b, dk).unwrap();
            let analytic = -2.0 * dk.cos().ln() / (dk * dk);
            assert_abs_diff_eq!(chi, analytic, epsilon = 1e-5);
            assert_abs_diff_eq!(chi, 1.0, epsilon = dk);
        }
    }

    #[test]
    fn peak_helpers() {
        assert_eq!(interior_maxima(&[0.0, 1.0, 3.0, 2.0, 2.5, 1.0]), vec![2, 4]);
        assert!(interior_maxima(&[1.0, 2.0, 3.0]).is_empty());
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| -(x - 1.3f64).powi(2)).collect();
        assert_abs_diff_eq!(refined_peak(&xs, &ys).unwrap(), 1.3, epsilon = 1e-12);
    }
}
