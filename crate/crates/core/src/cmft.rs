//! Cluster mean-field theory for the square lattice.
//!
//! Bonds leaving the cluster are decoupled as
//! `a_i† a_j → a_i† ψ_j + ψ_i a_j − ψ_i ψ_j` and `ψ` is iterated to a fixed
//! point. Two branches are solved at every `μ`: the field-free one (exact,
//! from the cluster's charge sectors) and one seeded with a small uniform
//! `ψ`; the lower grand energy wins.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_sector, Basis, FullBasis, SectorBasis};
use crate::eigensolver::{davidson, dot, GroundState, LanczosConfig, SymmetricOperator};
use crate::error::{JchError, Result};
use crate::hamiltonian::{
    build_on, mean_field_terms, photon_field_operator, ClusterGeometry, ClusterShape,
    DressedPreconditioner, ModelParams, SparseOperator,
};
use crate::observables::{correlation, density, jumps, CorrelationKind, EnergyTable, Jump};

/// Loop numerics of the self-consistency cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmftConfig {
    /// Photon cap per cavity.
    pub n_max: usize,
    /// Stop when `max |ψ_out − ψ_in| < tol_psi`.
    pub tol_psi: f64,
    pub max_sweeps: usize,
    /// `ψ ← (1 − m) ψ + m ψ_out`.
    pub mixing: f64,
    /// Uniform start of the seeded branch.
    pub seed_psi: f64,
    /// Residual tolerance of every cluster eigensolve, relative to `‖H‖`.
    pub solver_tol: f64,
    /// Start-vector seed; set by the caller rather than read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for CmftConfig {
    fn default() -> Self {
        Self {
            n_max: 6,
            tol_psi: 1e-9,
            max_sweeps: 500,
            mixing: 0.5,
            seed_psi: 0.1,
            solver_tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

impl CmftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_psi > 0.0) {
            return Err(JchError::InvalidParameter("tol_psi must be positive".into()));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(JchError::InvalidParameter("mixing must lie in (0, 1]".into()));
        }
        if self.n_max < 2 {
            return Err(JchError::InvalidParameter("cluster n_max must be at least 2".into()));
        }
        if self.max_sweeps == 0 {
            return Err(JchError::InvalidParameter("max_sweeps must be at least 1".into()));
        }
        if !(self.solver_tol > 0.0) || !self.seed_psi.is_finite() {
            return Err(JchError::InvalidParameter("solver_tol and seed_psi must be finite and positive".into()));
        }
        Ok(())
    }

    fn solver(&self) -> LanczosConfig {
        LanczosConfig {
            tol: self.solver_tol,
            max_iter: 5000,
            krylov_dim: 40,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `ψ = 0`: a charge eigenstate of the cluster.
    Zero,
    Seeded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmftResult {
    /// Order parameter per cluster site (the input of the final sweep).
    pub psi: Vec<f64>,
    /// Mean weighted charge per site.
    pub rho: f64,
    /// Grand energy of the cluster, mean-field constant included.
    pub energy: f64,
    /// Sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// `max |ψ_out − ψ_in|` of the final sweep.
    pub residual: f64,
    pub branch: Branch,
    /// Nearest-neighbour correlators averaged over internal bonds; empty
    /// for a single-site cluster.
    pub cluster_correlations: Vec<(CorrelationKind, f64)>,
}

impl CmftResult {
    /// `ψ̄ = mean |ψ_i|`.
    pub fn mean_psi(&self) -> f64 {
        self.psi.iter().map(|p| p.abs()).sum::<f64>() / self.psi.len() as f64
    }

    /// `(|Γ_pp| + |Γ_aa|) / (|Γ_p| + |Γ_a|)` over the cluster bonds.
    pub fn pair_ratio(&self) -> Option<f64> {
        let get = |k: CorrelationKind| {
            self.cluster_correlations
                .iter()
                .find(|(kind, _)| *kind == k)
                .map(|(_, v)| v.abs())
        };
        let pairs = get(CorrelationKind::PhotonPair)? + get(CorrelationKind::AtomPair)?;
        let singles = get(CorrelationKind::Photon)? + get(CorrelationKind::Atom)?;
        match (pairs > 0.0, singles > 0.0) {
            (_, true) => Some(pairs / singles),
            (true, false) => Some(f64::INFINITY),
            (false, false) => None,
        }
    }
}

/// `H_int − μ N̂ + Σ_i f_i (a_i + a_i†) + c` without assembling the sum.
struct ClusterOperator<'a> {
    hop: &'a SparseOperator,
    charge: &'a [f64],
    fields: &'a [SparseOperator],
    mu: f64,
    coeff: Vec<f64>,
    constant: f64,
    bound: f64,
}

impl SymmetricOperator for ClusterOperator<'_> {
    fn dim(&self) -> usize {
        self.hop.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.hop.apply(x, y);
        y.par_iter_mut()
            .zip(x.par_iter().zip(self.charge))
            .for_each(|(o, (v, q))| *o += (self.constant - self.mu * q) * v);
        let mut tmp = vec![0.0; x.len()];
        for (f, op) in self.coeff.iter().zip(self.fields) {
            if *f == 0.0 {
                continue;
            }
            op.apply(x, &mut tmp);
            y.par_iter_mut().zip(&tmp).for_each(|(o, t)| *o += f * t);
        }
    }

    fn norm_bound(&self) -> f64 {
        self.bound
    }
}

struct SectorState {
    basis: SectorBasis,
    state: GroundState,
}

/// Everything about one cluster at fixed couplings that does not depend on
/// `μ` or `ψ`: the full truncated space, the internal Hamiltonian, the field
/// operators and the ground state of every charge sector.
pub struct ClusterProblem {
    geom: ClusterGeometry,
    params: ModelParams,
    cfg: CmftConfig,
    basis: FullBasis,
    hop: SparseOperator,
    charge: Vec<f64>,
    max_charge: f64,
    fields: Vec<SparseOperator>,
    sectors: Vec<SectorState>,
    table: EnergyTable,
}

impl ClusterProblem {
    pub fn new(geom: ClusterGeometry, params: &ModelParams, cfg: &CmftConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let sites = geom.sites();
        let basis = FullBasis::new(sites, cfg.n_max)?;
        let hop = build_on(&basis, params, &geom.internal_bonds);
        let charge: Vec<f64> = basis.charges().into_iter().map(|q| q as f64).collect();
        let max_charge = charge.iter().copied().fold(0.0, f64::max);
        let fields = (0..sites).map(|i| photon_field_operator(&basis, i)).collect();
        let solver = cfg.solver();
        let sectors = (0..=sites * (cfg.n_max + 2))
            .into_par_iter()
            .map(|n| {
                let sb = enumerate_sector(sites, n, cfg.n_max)?;
                let h = build_on(&sb, params, &geom.internal_bonds);
                let pre = DressedPreconditioner::new(&sb, params, 0.0);
                let start = pre.start_vector(solver.seed);
                let state = davidson(&h, &pre, &solver, Some(&start));
                if !state.converged {
                    return Err(JchError::NotConverged(format!(
                        "cluster sector N={n}: residual {:e}",
                        state.residual
                    )));
                }
                Ok(SectorState { basis: sb, state })
            })
            .collect::<Result<Vec<_>>>()?;
        let table = EnergyTable::new(sites, sectors.iter().enumerate().map(|(n, s)| (n, s.state.energy)))?;
        Ok(Self {
            geom,
            params: *params,
            cfg: *cfg,
            basis,
            hop,
            charge,
            max_charge,
            fields,
            sectors,
            table,
        })
    }

    pub fn for_shape(shape: ClusterShape, params: &ModelParams, cfg: &CmftConfig) -> Result<Self> {
        Self::new(ClusterGeometry::new(shape), params, cfg)
    }

    pub fn geometry(&self) -> &ClusterGeometry {
        &self.geom
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &CmftConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Ground energies of the field-free cluster per charge.
    pub fn sector_energies(&self) -> &EnergyTable {
        &self.table
    }

    /// Chemical potentials where the `ψ = 0` cluster charge jumps.
    pub fn zero_branch_jumps(&self) -> Vec<Jump> {
        jumps(&self.table)
    }

    fn operator(&self, mu: f64, psi: &[f64]) -> ClusterOperator<'_> {
        let (coeff, constant) = mean_field_terms(&self.geom, self.params.kappa, psi);
        let field_bound: f64 = coeff.iter().map(|f| f.abs()).sum::<f64>() * 2.0 * ((self.cfg.n_max + 1) as f64).sqrt();
        let bound = self.hop.norm_inf() + mu.abs() * self.max_charge + field_bound + constant.abs();
        ClusterOperator {
            hop: &self.hop,
            charge: &self.charge,
            fields: &self.fields,
            mu,
            coeff,
            constant,
            bound,
        }
    }

    fn measure(&self, vector: &[f64]) -> Vec<f64> {
        let mut tmp = vec![0.0; vector.len()];
        self.fields
            .iter()
            .map(|x| {
                x.apply(vector, &mut tmp);
                0.5 * dot(vector, &tmp)
            })
            .collect()
    }

    /// The `ψ = 0` fixed point: the lowest `E_N − μN` over cluster sectors,
    /// ties going to the larger `N`.
    pub fn zero_branch(&self, mu: f64) -> Result<CmftResult> {
        let n = self.table.argmin(mu).expect("cluster table is never empty");
        let s = &self.sectors[n];
        Ok(CmftResult {
            psi: vec![0.0; self.geom.sites()],
            rho: n as f64 / self.geom.sites() as f64,
            energy: s.state.energy - mu * n as f64,
            iterations: 1,
            converged: true,
            residual: 0.0,
            branch: Branch::Zero,
            cluster_correlations: cluster_correlations(&s.state.vector, &s.basis, &self.geom)?,
        })
    }

    /// Fixed-point iteration started from a uniform `ψ = psi0`.
    pub fn seeded_branch(&self, mu: f64, psi0: f64) -> Result<CmftResult> {
        let sites = self.geom.sites();
        let solver = self.cfg.solver();
        let pre = DressedPreconditioner::new(&self.basis, &self.params, mu);
        let mut psi = vec![psi0; sites];
        let mut vector = pre.start_vector(solver.seed);
        let mut energy = f64::NAN;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < self.cfg.max_sweeps {
            sweeps += 1;
            let op = self.operator(mu, &psi);
            let gs = davidson(&op, &pre, &solver, Some(&vector));
            vector = gs.vector;
            energy = gs.energy;
            if !gs.converged {
                break;
            }
            let out = self.measure(&vector);
            residual = out
                .iter()
                .zip(&psi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if residual < self.cfg.tol_psi {
                converged = true;
                break;
            }
            let m = self.cfg.mixing;
            for (p, o) in psi.iter_mut().zip(&out) {
                *p = (1.0 - m) * *p + m * o;
            }
        }
        Ok(CmftResult {
            psi,
            rho: density(&vector, &self.basis),
            energy,
            iterations: sweeps,
            converged,
            residual,
            branch: Branch::Seeded,
            cluster_correlations: cluster_correlations(&vector, &self.basis, &self.geom)?,
        })
    }

    /// Runs both branches and keeps the lower grand energy; the field-free
    /// branch wins ties.
    pub fn solve(&self, mu: f64) -> Result<CmftResult> {
        let zero = self.zero_branch(mu)?;
        let seeded = self.seeded_branch(mu, self.cfg.seed_psi)?;
        let margin = 1e-12 * (1.0 + zero.energy.abs());
        if seeded.energy < zero.energy - margin {
            Ok(seeded)
        } else {
            Ok(zero)
        }
    }

    /// Ground energy and measured `ψ` of the cluster Hamiltonian at fixed
    /// `psi`, solved from a fresh start.
    pub fn remeasure(&self, mu: f64, psi: &[f64]) -> Result<(f64, Vec<f64>)> {
        if psi.len() != self.geom.sites() {
            return Err(JchError::DimensionMismatch(psi.len(), self.geom.sites()));
        }
        let solver = self.cfg.solver();
        let pre = DressedPreconditioner::new(&self.basis, &self.params, mu);
        let start = pre.start_vector(solver.seed);
        let gs = davidson(&self.operator(mu, psi), &pre, &solver, Some(&start)).into_result()?;
        Ok((gs.energy, self.measure(&gs.vector)))
    }

    /// `max |ψ_out − ψ|` after rebuilding the Hamiltonian from `result.psi`.
    pub fn fixed_point_error(&self, mu: f64, result: &CmftResult) -> Result<f64> {
        let (_, out) = self.remeasure(mu, &result.psi)?;
        Ok(out
            .iter()
            .zip(&result.psi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Solves at `μ` and, unless the point is already decided, at `μ ± δμ`.
    pub fn classify(&self, mu: f64, th: &Thresholds) -> Result<PhasePoint> {
        Ok(self.classify_solved(mu, th)?.0)
    }

    /// [`classify`](Self::classify), also returning the fixed point at `μ`.
    pub fn classify_solved(&self, mu: f64, th: &Thresholds) -> Result<(PhasePoint, CmftResult)> {
        let center = self.solve(mu)?;
        let decided = !center.converged || center.mean_psi() > th.psi_tol || center.rho < th.rho_tol;
        if decided {
            return Ok((classify_phase(self.params.kappa, mu, &center, None, th), center));
        }
        let below = self.solve(mu - th.delta_mu)?;
        let above = self.solve(mu + th.delta_mu)?;
        let point = classify_phase(self.params.kappa, mu, &center, Some((&below, &above)), th);
        Ok((point, center))
    }
}

/// Single-cluster convenience: both branches at one `μ`.
pub fn self_consistent(
    geom: ClusterGeometry,
    params: &ModelParams,
    mu: f64,
    cfg: &CmftConfig,
) -> Result<CmftResult> {
    ClusterProblem::new(geom, params, cfg)?.solve(mu)
}

/// `Γ(i, j)` for all five kinds, averaged over internal bonds in both orders.
pub fn cluster_correlations<B: Basis>(
    vector: &[f64],
    basis: &B,
    geom: &ClusterGeometry,
) -> Result<Vec<(CorrelationKind, f64)>> {
    if geom.internal_bonds.is_empty() {
        return Ok(Vec::new());
    }
    CorrelationKind::ALL
        .iter()
        .map(|&kind| {
            let mut sum = 0.0;
            for &(i, j) in &geom.internal_bonds {
                sum += correlation(vector, basis, kind, i, j)? + correlation(vector, basis, kind, j, i)?;
            }
            Ok((kind, sum / (2 * geom.internal_bonds.len()) as f64))
        })
        .collect()
}

/// Shift of the field-free ground grand energy when the photon cap grows
/// from `n_max` to `n_max + 2`.
pub fn truncation_shift(
    geom: &ClusterGeometry,
    params: &ModelParams,
    mu: f64,
    cfg: &CmftConfig,
) -> Result<f64> {
    let energy = |n_max: usize| -> Result<f64> {
        let c = CmftConfig { n_max, ..*cfg };
        ClusterProblem::new(geom.clone(), params, &c)?.zero_branch(mu).map(|r| r.energy)
    };
    Ok((energy(cfg.n_max + 2)? - energy(cfg.n_max)?).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Vacuum,
    #[serde(rename = "MI(2)")]
    MottInsulator,
    #[serde(rename = "SF")]
    Superfluid,
    #[serde(rename = "PSF")]
    PairSuperfluid,
    /// Insulating but matching none of the rules above.
    #[serde(rename = "unresolved")]
    Unresolved,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Vacuum => "Vacuum",
            Phase::MottInsulator => "MI(2)",
            Phase::Superfluid => "SF",
            Phase::PairSuperfluid => "PSF",
            Phase::Unresolved => "unresolved",
        })
    }
}

/// Classification tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub psi_tol: f64,
    pub rho_tol: f64,
    pub delta_mu: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            psi_tol: 1e-4,
            rho_tol: 1e-3,
            delta_mu: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub kappa: f64,
    pub mu: f64,
    /// `None` when the fixed point did not converge.
    pub label: Option<Phase>,
    pub mean_psi: f64,
    pub rho: f64,
    pub energy: f64,
    pub converged: bool,
    pub branch: Branch,
    /// Cluster charge change between `μ − δμ` and `μ + δμ`.
    pub step: Option<i64>,
    pub pair_ratio: Option<f64>,
}

/// Labels a fixed point from its own diagnostics and, for the insulating
/// branches, the fixed points at `μ ∓ δμ`.
pub fn classify_phase(
    kappa: f64,
    mu: f64,
    center: &CmftResult,
    neighbours: Option<(&CmftResult, &CmftResult)>,
    th: &Thresholds,
) -> PhasePoint {
    let sites = center.psi.len() as f64;
    let step = neighbours
        .filter(|(b, a)| b.converged && a.converged)
        .map(|(b, a)| ((a.rho - b.rho) * sites).round() as i64);
    let pair_ratio = center.pair_ratio();
    let mean_psi = center.mean_psi();
    let label = if !center.converged {
        None
    } else if mean_psi > th.psi_tol {
        Some(Phase::Superfluid)
    } else if center.rho < th.rho_tol {
        Some(Phase::Vacuum)
    } else {
        let flat = neighbours.is_some_and(|(b, a)| {
            (b.rho - center.rho).abs() < th.rho_tol && (a.rho - center.rho).abs() < th.rho_tol
        });
        let even_step = step.is_some_and(|s| s != 0 && s % 2 == 0);
        let pairs_dominate = pair_ratio.is_some_and(|r| r > 1.0);
        Some(if (center.rho - 2.0).abs() < th.rho_tol && flat {
            Phase::MottInsulator
        } else if even_step && pairs_dominate {
            Phase::PairSuperfluid
        } else {
            Phase::Unresolved
        })
    };
    PhasePoint {
        kappa,
        mu,
        label,
        mean_psi,
        rho: center.rho,
        energy: center.energy,
        converged: center.converged,
        branch: center.branch,
        step,
        pair_ratio,
    }
}

/// Classifies every `(κ, μ)` point, ordered by `κ` then `μ`. Points within a
/// `κ` column share one [`ClusterProblem`] and run in parallel.
pub fn phase_scan(
    geom: &ClusterGeometry,
    params: &ModelParams,
    kappas: &[f64],
    mus: &[f64],
    cfg: &CmftConfig,
    th: &Thresholds,
) -> Result<Vec<PhasePoint>> {
    if kappas.iter().chain(mus).any(|x| !x.is_finite()) {
        return Err(JchError::InvalidParameter("scan grids must be finite".into()));
    }
    let mut out = Vec::with_capacity(kappas.len() * mus.len());
    for &kappa in kappas {
        let problem = ClusterProblem::new(geom.clone(), &params.with_kappa(kappa), cfg)?;
        let column = mus
            .par_iter()
            .map(|&mu| problem.classify(mu, th))
            .collect::<Result<Vec<_>>>()?;
        out.extend(column);
    }
    Ok(out)
}

/// Bisects for the `μ` where the selected fixed point's density crosses
/// `rho_mid`, assuming `ρ(lo) < rho_mid ≤ ρ(hi)`.
pub fn locate_transition(problem: &ClusterProblem, lo: f64, hi: f64, rho_mid: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if !(problem.solve(lo)?.rho < rho_mid && problem.solve(hi)?.rho >= rho_mid) {
        return Err(JchError::InvalidParameter(format!(
            "density does not cross {rho_mid} between μ={lo} and μ={hi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if problem.solve(mid)?.rho < rho_mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
