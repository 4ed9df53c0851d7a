//! Sparse Hamiltonians of the three-level Jaynes–Cummings–Hubbard array.
//!
//! In the frame rotating at the cavity frequency (with the cavity resonant on
//! the lower transition) a cavity contributes
//!
//! ```text
//! h = -Δ P_e2 + β01 (σ01† a + a† σ01) + β12 (σ12† a + a† σ12)
//! ```
//!
//! and neighbouring cavities exchange photons with amplitude `-κ`.

mod dressed;
mod geometry;
mod sparse;

pub use dressed::{photon_field_operator, DressedPreconditioner};
pub use geometry::{chain_bonds, Boundary, ClusterGeometry, ClusterShape};
pub use sparse::{SparseOperator, Storage};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_sector, Basis, Codec, FullBasis, Level, LocalOp, SectorBasis};
use crate::error::{JchError, Result};

/// Couplings of the model. `beta01` sets the energy unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub beta01: f64,
    pub beta12: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            beta01: 1.0,
            beta12: std::f64::consts::SQRT_2,
            delta: 0.4,
            kappa: 0.0,
        }
    }
}

impl ModelParams {
    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.beta01, self.beta12, self.delta, self.kappa]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(JchError::InvalidParameter("couplings must be finite".into()));
        }
        if self.beta01 <= 0.0 {
            return Err(JchError::InvalidParameter("beta01 must be positive".into()));
        }
        if self.beta12 < 0.0 {
            return Err(JchError::InvalidParameter("beta12 must be non-negative".into()));
        }
        if self.kappa < 0.0 {
            return Err(JchError::InvalidParameter("kappa must be non-negative".into()));
        }
        Ok(())
    }
}

/// Applies `ops` right to left on the sites given; `None` if the string annihilates the state.
pub fn apply_string(codec: &Codec, code: u64, ops: &[(usize, LocalOp)]) -> Option<(u64, f64)> {
    let mut code = code;
    let mut amp = 1.0;
    for &(site, op) in ops.iter().rev() {
        let old = codec.site(code, site);
        let (new, a) = op.apply(old, codec.n_max())?;
        code = codec.replace(code, site, old, new);
        amp *= a;
    }
    Some((code, amp))
}

/// Everything the assembler needs besides the basis.
#[derive(Debug, Clone, Default)]
pub struct Terms {
    pub params: Option<ModelParams>,
    pub bonds: Vec<(usize, usize)>,
    /// Chemical potential multiplying the weighted charge (`-μ N̂`).
    pub mu: f64,
    /// Per-site coefficient `f_i` of `f_i (a_i + a_i†)`.
    pub field: Vec<f64>,
    pub constant: f64,
}

pub(crate) const ATOMIC: [[(LocalOp, LocalOp); 2]; 2] = [
    [(LocalOp::Sigma01Dag, LocalOp::A), (LocalOp::ADag, LocalOp::Sigma01)],
    [(LocalOp::Sigma12Dag, LocalOp::A), (LocalOp::ADag, LocalOp::Sigma12)],
];

/// Assembles the Hamiltonian over any basis closed under the terms present.
/// Matrix elements that leave the basis (photon truncation) are dropped.
pub fn assemble<B: Basis>(basis: &B, terms: &Terms) -> SparseOperator {
    let p = terms.params.unwrap_or_default();
    let codec = basis.codec();
    let sites = codec.sites();
    let couplings = [p.beta01, p.beta12];
    let rows: Vec<Vec<(usize, f64)>> = (0..basis.dim())
        .into_par_iter()
        .with_min_len(256)
        .map(|k| {
            let code = basis.code(k);
            let mut row = Vec::with_capacity(1 + 4 * sites + 2 * terms.bonds.len());
            let mut diag = terms.constant;
            let push = |target: Option<(u64, f64)>, scale: f64, row: &mut Vec<(usize, f64)>| {
                if let Some((c, amp)) = target {
                    if let Some(col) = basis.index_of(c) {
                        row.push((col, scale * amp));
                    }
                }
            };
            for site in 0..sites {
                let s = codec.site(code, site);
                if s.level == Level::E2 {
                    diag -= p.delta;
                }
                diag -= terms.mu * s.charge() as f64;
                for (pair, &g) in ATOMIC.iter().zip(&couplings) {
                    if g == 0.0 {
                        continue;
                    }
                    for &(outer, inner) in pair {
                        push(
                            apply_string(codec, code, &[(site, outer), (site, inner)]),
                            g,
                            &mut row,
                        );
                    }
                }
                if let Some(&f) = terms.field.get(site) {
                    if f != 0.0 {
                        push(apply_string(codec, code, &[(site, LocalOp::A)]), f, &mut row);
                        push(apply_string(codec, code, &[(site, LocalOp::ADag)]), f, &mut row);
                    }
                }
            }
            if p.kappa != 0.0 {
                for &(i, j) in &terms.bonds {
                    for (to, from) in [(i, j), (j, i)] {
                        push(
                            apply_string(codec, code, &[(to, LocalOp::ADag), (from, LocalOp::A)]),
                            -p.kappa,
                            &mut row,
                        );
                    }
                }
            }
            row.push((k, diag));
            row
        })
        .collect();
    SparseOperator::from_rows(basis.dim(), rows)
}

/// Upper bound on stored entries for a lattice Hamiltonian.
pub fn estimate_nonzeros(dim: usize, sites: usize, bonds: usize) -> usize {
    dim.saturating_mul(1 + 6 * sites + 2 * bonds)
}

/// Canonical chain Hamiltonian in the sector of charge `charge`.
pub fn build_chain(
    sites: usize,
    charge: usize,
    params: &ModelParams,
    n_max: usize,
    boundary: Boundary,
) -> Result<(SectorBasis, SparseOperator)> {
    params.validate()?;
    let basis = enumerate_sector(sites, charge, n_max)?;
    let op = build_on(&basis, params, &chain_bonds(sites, boundary));
    Ok((basis, op))
}

/// Canonical Hamiltonian on an arbitrary bond list over a given basis.
pub fn build_on<B: Basis>(basis: &B, params: &ModelParams, bonds: &[(usize, usize)]) -> SparseOperator {
    assemble(
        basis,
        &Terms {
            params: Some(*params),
            bonds: bonds.to_vec(),
            ..Terms::default()
        },
    )
}

/// Chain Hamiltonian over the full truncated space (all sectors at once).
pub fn build_chain_full(
    sites: usize,
    params: &ModelParams,
    n_max: usize,
    boundary: Boundary,
) -> Result<(FullBasis, SparseOperator)> {
    params.validate()?;
    let basis = FullBasis::new(sites, n_max)?;
    let op = build_on(&basis, params, &chain_bonds(sites, boundary));
    Ok((basis, op))
}

/// Grand-canonical cluster Hamiltonian with mean-field terms on the cut bonds:
///
/// `H_C - μ N̂ - κ Σ_cut [ (a_i† + a_i) ψ_img - ψ_i ψ_img ]`.
pub fn build_cluster_gc(
    geom: &ClusterGeometry,
    params: &ModelParams,
    mu: f64,
    psi: &[f64],
    n_max: usize,
) -> Result<(FullBasis, SparseOperator)> {
    let basis = FullBasis::new(geom.sites(), n_max)?;
    let op = build_cluster_gc_on(&basis, geom, params, mu, psi)?;
    Ok((basis, op))
}

pub fn build_cluster_gc_on(
    basis: &FullBasis,
    geom: &ClusterGeometry,
    params: &ModelParams,
    mu: f64,
    psi: &[f64],
) -> Result<SparseOperator> {
    params.validate()?;
    if psi.len() != geom.sites() {
        return Err(JchError::DimensionMismatch(psi.len(), geom.sites()));
    }
    if basis.sites() != geom.sites() {
        return Err(JchError::DimensionMismatch(basis.sites(), geom.sites()));
    }
    let (field, constant) = mean_field_terms(geom, params.kappa, psi);
    Ok(assemble(
        basis,
        &Terms {
            params: Some(*params),
            bonds: geom.internal_bonds.clone(),
            mu,
            field,
            constant,
        },
    ))
}

/// Field coefficients `f_i` of `(a_i + a_i†)` and the constant produced by
/// decoupling every cut bond at order parameters `psi`.
pub fn mean_field_terms(geom: &ClusterGeometry, kappa: f64, psi: &[f64]) -> (Vec<f64>, f64) {
    let mut field = vec![0.0; geom.sites()];
    let mut constant = 0.0;
    for &(site, image) in &geom.boundary_bonds {
        field[site] -= kappa * psi[image];
        constant += kappa * psi[site] * psi[image];
    }
    (field, constant)
}

/// Per-level weights of a candidate conserved charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeWeights(pub [f64; 3]);

impl ChargeWeights {
    /// `n_p + P_e1 + 2 P_e2`, conserved by the model.
    pub const POLARITON: ChargeWeights = ChargeWeights([0.0, 1.0, 2.0]);
    /// `n_p + P_e1 + P_e2`, which the `β12` term does not conserve.
    pub const UNWEIGHTED: ChargeWeights = ChargeWeights([0.0, 1.0, 1.0]);
}

/// Max-norm of `[H, N̂] v` over a few seeded random unit vectors.
pub fn charge_commutator_norm<B: Basis>(
    op: &SparseOperator,
    basis: &B,
    weights: ChargeWeights,
    seed: u64,
) -> f64 {
    let codec = basis.codec();
    let charge: Vec<f64> = (0..basis.dim())
        .map(|k| {
            let code = basis.code(k);
            (0..codec.sites())
                .map(|s| {
                    let st = codec.site(code, s);
                    st.photons as f64 + weights.0[st.level as usize]
                })
                .sum()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let mut v: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let nv: Vec<f64> = v.iter().zip(&charge).map(|(x, q)| x * q).collect();
        let hnv = op.mul(&nv);
        let hv = op.mul(&v);
        for ((a, b), q) in hnv.iter().zip(&hv).zip(&charge) {
            worst = worst.max((a - q * b).abs());
        }
    }
    worst
}
