use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{JchError, Result};
use crate::hamiltonian::{Boundary, ModelParams};

use super::{solve_chain, SolveOptions};

/// Canonical ground energies `E_N` of one chain at fixed couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    pub sites: usize,
    energies: BTreeMap<usize, f64>,
}

impl EnergyTable {
    /// Builds a table from known energies; the charge range must be contiguous.
    pub fn new(sites: usize, energies: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let energies: BTreeMap<usize, f64> = energies.into_iter().collect();
        if let (Some((&lo, _)), Some((&hi, _))) = (energies.first_key_value(), energies.last_key_value()) {
            if hi - lo + 1 != energies.len() {
                return Err(JchError::InvalidParameter(
                    "energy table must cover a contiguous range of N".into(),
                ));
            }
        }
        if sites == 0 {
            return Err(JchError::InvalidParameter("energy table needs L ≥ 1".into()));
        }
        Ok(Self { sites, energies })
    }

    /// Solves every sector `N ∈ charges` of an `L`-site chain. Sectors are
    /// independent and solved in parallel.
    pub fn compute(
        sites: usize,
        charges: std::ops::RangeInclusive<usize>,
        params: &ModelParams,
        boundary: Boundary,
        opts: &SolveOptions,
    ) -> Result<Self> {
        let ns: Vec<usize> = charges.collect();
        let solved: Vec<Result<(usize, f64)>> = ns
            .par_iter()
            .map(|&n| {
                let (_, gs) = solve_chain(sites, n, params, boundary, opts)?;
                if !gs.converged {
                    return Err(JchError::NotConverged(format!(
                        "sector N={n}: residual {:e} after {} products",
                        gs.residual, gs.iterations
                    )));
                }
                Ok((n, gs.energy))
            })
            .collect();
        let energies = solved.into_iter().collect::<Result<Vec<_>>>()?;
        Self::new(sites, energies)
    }

    pub fn energy(&self, n: usize) -> Result<f64> {
        self.energies.get(&n).copied().ok_or(JchError::MissingEnergy(n))
    }

    pub fn charges(&self) -> impl Iterator<Item = usize> + '_ {
        self.energies.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.energies.iter().map(|(n, e)| (*n, *e))
    }

    pub fn min_charge(&self) -> Option<usize> {
        self.energies.keys().next().copied()
    }

    pub fn max_charge(&self) -> Option<usize> {
        self.energies.keys().next_back().copied()
    }

    /// Charge minimising `E_N − μ N`; ties go to the larger `N`.
    pub fn argmin(&self, mu: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (n, e) in self.iter() {
            let g = e - mu * n as f64;
            match best {
                Some((_, b)) if g > b => {}
                _ => best = Some((n, g)),
            }
        }
        best.map(|b| b.0)
    }
}

/// `(μ⁻, μ⁺) = (E_N − E_{N−1}, E_{N+1} − E_N)`.
pub fn chemical_potentials(table: &EnergyTable, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(JchError::MissingEnergy(0));
    }
    let below = table.energy(n - 1)?;
    let here = table.energy(n)?;
    let above = table.energy(n + 1)?;
    Ok((here - below, above - here))
}

/// Linear least-squares fit `μ(L) = μ∞ + c / L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapExtrapolation {
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square fit residual.
    pub rms_residual: f64,
    /// Standard error of the intercept; `None` with only two points.
    pub intercept_stderr: Option<f64>,
}

pub fn extrapolate_gap(values: &[(usize, f64)]) -> Result<GapExtrapolation> {
    if values.len() < 2 {
        return Err(JchError::InvalidParameter(
            "finite-size extrapolation needs at least two system sizes".into(),
        ));
    }
    if values.iter().any(|(l, _)| *l == 0) {
        return Err(JchError::InvalidParameter("system size must be positive".into()));
    }
    let n = values.len() as f64;
    let xs: Vec<f64> = values.iter().map(|(l, _)| 1.0 / *l as f64).collect();
    let ys: Vec<f64> = values.iter().map(|(_, m)| *m).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(JchError::InvalidParameter(
            "extrapolation needs at least two distinct sizes".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let intercept_stderr = (values.len() > 2).then(|| {
        let s2 = ssr / (n - 2.0);
        (s2 * (1.0 / n + xm * xm / sxx)).sqrt()
    });
    Ok(GapExtrapolation {
        intercept,
        slope,
        rms_residual: (ssr / n).sqrt(),
        intercept_stderr,
    })
}

/// A density jump of the grand-canonical ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub mu: f64,
    pub from: usize,
    pub to: usize,
}

impl Jump {
    pub fn delta_n(&self) -> usize {
        self.to - self.from
    }
}

/// Slopes closer than this (relative) count as collinear hull points.
const SLOPE_TIE: f64 = 1e-10;

/// Exact jump points of `argmin_N (E_N − μN)`: the lower convex hull of `E_N`.
/// Collinear points are skipped, so the jump goes to the largest `N`.
pub fn jumps(table: &EnergyTable) -> Vec<Jump> {
    let pts: Vec<(usize, f64)> = table.iter().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k + 1 < pts.len() {
        let (n0, e0) = pts[k];
        let mut best: Option<(usize, f64)> = None;
        for (m, &(n1, e1)) in pts.iter().enumerate().skip(k + 1) {
            let slope = (e1 - e0) / (n1 - n0) as f64;
            match best {
                Some((_, s)) if slope > s + SLOPE_TIE * (1.0 + s.abs()) => {}
                _ => best = Some((m, slope)),
            }
        }
        let (m, mu) = best.unwrap();
        out.push(Jump {
            mu,
            from: n0,
            to: pts[m].0,
        });
        k = m;
    }
    out
}

/// One plateau of `ρ(μ)` on the scanned grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub mu_from: f64,
    pub mu_to: f64,
    pub n: usize,
    pub rho: f64,
    /// Change of `N` when entering this plateau (0 for the first).
    pub delta_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    pub sites: usize,
    /// `(μ, N)` for every grid point.
    pub samples: Vec<(f64, usize)>,
    pub steps: Vec<Step>,
}

/// `ρ(μ) = argmin_N (E_N − μ N) / L` on an ascending μ grid.
pub fn staircase(table: &EnergyTable, mu_grid: &[f64]) -> Result<Staircase> {
    if table.min_charge().is_none() {
        return Err(JchError::InvalidParameter("empty energy table".into()));
    }
    if mu_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(JchError::InvalidParameter("μ grid must be ascending".into()));
    }
    let samples: Vec<(f64, usize)> = mu_grid
        .iter()
        .map(|&mu| (mu, table.argmin(mu).unwrap()))
        .collect();
    let mut steps: Vec<Step> = Vec::new();
    for &(mu, n) in &samples {
        match steps.last_mut() {
            Some(s) if s.n == n => s.mu_to = mu,
            last => {
                let delta_n = last.map_or(0, |s| n - s.n);
                steps.push(Step {
                    mu_from: mu,
                    mu_to: mu,
                    n,
                    rho: n as f64 / table.sites as f64,
                    delta_n,
                });
            }
        }
    }
    Ok(Staircase {
        sites: table.sites,
        samples,
        steps,
    })
}
