use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::basis::{local_states, Basis, Level, LocalOp, LocalState};
use crate::eigensolver::{guard_denominator, random_unit, Preconditioner};

use super::{ModelParams, ATOMIC};

/// Eigenbasis of the single-cavity Hamiltonian within one local charge block.
#[derive(Debug, Clone)]
struct LocalBlock {
    /// Members in ascending ordinal order.
    states: Vec<LocalState>,
    energies: Vec<f64>,
    /// Column `r` is dressed state `r` in the bare members.
    vectors: DMatrix<f64>,
}

fn local_blocks(params: &ModelParams, mu: f64, n_max: usize) -> Vec<LocalBlock> {
    let locals = local_states(n_max);
    let couplings = [params.beta01, params.beta12];
    (0..=n_max + 2)
        .map(|q| {
            let states: Vec<LocalState> = locals.iter().copied().filter(|s| s.charge() == q).collect();
            let m = states.len();
            let mut h = DMatrix::zeros(m, m);
            for (a, s) in states.iter().enumerate() {
                h[(a, a)] = -mu * q as f64 - if s.level == Level::E2 { params.delta } else { 0.0 };
                for (pair, g) in ATOMIC.iter().zip(couplings) {
                    for &(outer, inner) in pair {
                        let hit = inner
                            .apply(*s, n_max)
                            .and_then(|(mid, x)| outer.apply(mid, n_max).map(|(t, y)| (t, x * y)));
                        if let Some((target, amp)) = hit {
                            let b = states.iter().position(|x| *x == target).unwrap();
                            h[(b, a)] += g * amp;
                        }
                    }
                }
            }
            let eig = SymmetricEigen::new(h);
            LocalBlock {
                states,
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
            }
        })
        .collect()
}

/// `U (D − θ)⁻¹ Uᵀ`, where `U` is the product of single-cavity eigenbases and
/// `D` the sum of single-cavity energies. Exact for κ = 0 and a good
/// approximation while hopping is small against the on-site couplings.
pub struct DressedPreconditioner {
    blocks: Vec<LocalBlock>,
    /// Per site: `(block, member indices)` groups that differ only on that site.
    groups: Vec<Vec<(u8, [u32; 3])>>,
    diag: Vec<f64>,
}

impl DressedPreconditioner {
    /// `mu` enters the on-site energies as `−μ q` (zero for canonical sectors).
    pub fn new<B: Basis>(basis: &B, params: &ModelParams, mu: f64) -> Self {
        let n_max = basis.n_max();
        let blocks = local_blocks(params, mu, n_max);
        let codec = basis.codec();
        let position = |s: LocalState| {
            let b = &blocks[s.charge()];
            b.states.iter().position(|x| *x == s).unwrap()
        };
        let groups: Vec<Vec<(u8, [u32; 3])>> = (0..basis.sites())
            .map(|site| {
                (0..basis.dim())
                    .into_par_iter()
                    .with_min_len(4096)
                    .filter_map(|k| {
                        let code = basis.code(k);
                        let s = codec.site(code, site);
                        let q = s.charge();
                        let block = &blocks[q];
                        if block.states[0] != s {
                            return None;
                        }
                        let mut idx = [u32::MAX; 3];
                        for (slot, t) in block.states.iter().enumerate() {
                            let other = codec.replace(code, site, s, *t);
                            idx[slot] = basis
                                .index_of(other)
                                .expect("basis closed under on-site mixing") as u32;
                        }
                        Some((q as u8, idx))
                    })
                    .collect()
            })
            .collect();
        let diag: Vec<f64> = (0..basis.dim())
            .into_par_iter()
            .with_min_len(4096)
            .map(|k| {
                let code = basis.code(k);
                (0..basis.sites())
                    .map(|site| {
                        let s = codec.site(code, site);
                        blocks[s.charge()].energies[position(s)]
                    })
                    .sum()
            })
            .collect();
        Self {
            blocks,
            groups,
            diag,
        }
    }

    fn rotate(&self, y: &mut [f64], transpose: bool) {
        for site_groups in &self.groups {
            for (q, idx) in site_groups {
                let block = &self.blocks[*q as usize];
                let m = block.states.len();
                if m == 1 {
                    continue;
                }
                let mut src = [0.0; 3];
                for a in 0..m {
                    src[a] = y[idx[a] as usize];
                }
                for a in 0..m {
                    let mut acc = 0.0;
                    for b in 0..m {
                        let v = if transpose {
                            block.vectors[(b, a)]
                        } else {
                            block.vectors[(a, b)]
                        };
                        acc += v * src[b];
                    }
                    y[idx[a] as usize] = acc;
                }
            }
        }
    }

    /// Seeded random combination of the lowest dressed product states,
    /// rotated back to the bare basis. Its Rayleigh quotient starts at the
    /// bottom of the spectrum, so Davidson cannot settle on an excited level.
    pub fn start_vector(&self, seed: u64) -> Vec<f64> {
        let lowest = self.diag.iter().copied().fold(f64::INFINITY, f64::min);
        let window = 1e-9 * (1.0 + lowest.abs());
        let noise = random_unit(self.diag.len(), seed);
        let mut v: Vec<f64> = self
            .diag
            .iter()
            .zip(&noise)
            .map(|(d, r)| if d - lowest <= window { *r } else { 0.0 })
            .collect();
        if v.iter().all(|x| *x == 0.0) {
            v = noise;
        }
        self.rotate(&mut v, false);
        v
    }

    /// Energies of the dressed product states.
    pub fn dressed_diagonal(&self) -> &[f64] {
        &self.diag
    }
}

impl Preconditioner for DressedPreconditioner {
    fn precondition(&self, r: &[f64], theta: f64, out: &mut [f64]) {
        out.copy_from_slice(r);
        self.rotate(out, true);
        for (o, d) in out.iter_mut().zip(&self.diag) {
            *o /= guard_denominator(d - theta);
        }
        self.rotate(out, false);
    }
}

/// Single-site photon-shift operator `a_i + a_i†` over a basis.
pub fn photon_field_operator<B: Basis>(basis: &B, site: usize) -> super::SparseOperator {
    let codec = basis.codec();
    let rows = (0..basis.dim())
        .into_par_iter()
        .with_min_len(1024)
        .map(|k| {
            let code = basis.code(k);
            [LocalOp::A, LocalOp::ADag]
                .iter()
                .filter_map(|op| {
                    let (c, amp) = super::apply_string(codec, code, &[(site, *op)])?;
                    basis.index_of(c).map(|col| (col, amp))
                })
                .collect()
        })
        .collect();
    super::SparseOperator::from_rows(basis.dim(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_sector;
    use crate::hamiltonian::{build_on, chain_bonds, Boundary};

    #[test]
    fn exact_at_zero_hopping() {
        let p = ModelParams::default();
        let b = enumerate_sector(3, 4, 4).unwrap();
        let h = build_on(&b, &p, &chain_bonds(3, Boundary::Open));
        let pre = DressedPreconditioner::new(&b, &p, 0.0);
        let mut dressed: Vec<f64> = pre.dressed_diagonal().to_vec();
        dressed.sort_by(f64::total_cmp);
        let exact = crate::eigensolver::dense_spectrum(&h).unwrap();
        for (a, e) in dressed.iter().zip(&exact) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let p = ModelParams::default();
        let b = enumerate_sector(3, 5, 3).unwrap();
        let pre = DressedPreconditioner::new(&b, &p, 0.0);
        let v: Vec<f64> = (0..b.dim()).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut w = v.clone();
        pre.rotate(&mut w, true);
        pre.rotate(&mut w, false);
        for (a, c) in v.iter().zip(&w) {
            assert!((a - c).abs() < 1e-13);
        }
    }

    #[test]
    fn davidson_from_dressed_start_finds_ground_state() {
        use crate::eigensolver::{davidson, dense_spectrum, LanczosConfig};
        for (sites, charge, kappa) in [(3, 5, 0.01), (3, 6, 0.06), (4, 4, 0.02), (4, 5, 0.2)] {
            let p = ModelParams::default().with_kappa(kappa);
            let b = enumerate_sector(sites, charge, charge).unwrap();
            let h = build_on(&b, &p, &chain_bonds(sites, Boundary::Open));
            let pre = DressedPreconditioner::new(&b, &p, 0.0);
            let cfg = LanczosConfig {
                tol: 1e-11,
                krylov_dim: 40,
                ..LanczosConfig::default()
            };
            let start = pre.start_vector(cfg.seed);
            let gs = davidson(&h, &pre, &cfg, Some(&start));
            assert!(gs.converged);
            let exact = dense_spectrum(&h).unwrap()[0];
            assert!((gs.energy - exact).abs() < 1e-9, "L={sites} N={charge}: {} vs {exact}", gs.energy);
        }
    }
}
