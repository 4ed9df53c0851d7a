//! Lowest eigenpair of real symmetric operators.
//!
//! Lanczos with full (twice-iterated Gram–Schmidt) reorthogonalization and
//! explicit restarts from the current Ritz vector when the Krylov basis
//! reaches its size cap. Dense diagonalization is provided as an oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{JchError, Result};
use crate::hamiltonian::SparseOperator;

/// Matrix-free access to a real symmetric operator.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Any upper bound on the spectral radius; sets the residual scale.
    fn norm_bound(&self) -> f64;
}

impl SymmetricOperator for SparseOperator {
    fn dim(&self) -> usize {
        SparseOperator::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        SparseOperator::apply(self, x, y)
    }

    fn norm_bound(&self) -> f64 {
        self.norm_inf()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosConfig {
    /// Residual tolerance relative to [`SymmetricOperator::norm_bound`].
    pub tol: f64,
    /// Budget of matrix–vector products.
    pub max_iter: usize,
    /// Krylov basis size before an explicit restart.
    pub krylov_dim: usize,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 5000,
            krylov_dim: 80,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    /// Unit-norm ground vector.
    pub vector: Vec<f64>,
    /// `‖H v - E v‖`, recomputed from the returned vector.
    pub residual: f64,
    /// Matrix–vector products used.
    pub iterations: usize,
    pub converged: bool,
}

impl GroundState {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(JchError::NotConverged(format!(
                "Lanczos stopped after {} products with residual {:e}",
                self.iterations, self.residual
            )))
        }
    }
}

const CHUNK: usize = 4096;

/// Chunked dot product; the summation order is fixed, so results are
/// independent of the thread count.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(p, q)| *p += alpha * q));
}

fn scale(alpha: f64, y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .for_each(|c| c.iter_mut().for_each(|p| *p *= alpha));
}

/// Seeded pseudo-random unit vector.
pub fn random_unit(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm(&v);
    scale(1.0 / n, &mut v);
    v
}

/// `‖H v - e v‖`.
pub fn residual_norm<O: SymmetricOperator + ?Sized>(op: &O, v: &[f64], e: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    op.apply(v, &mut hv);
    axpy(-e, v, &mut hv);
    norm(&hv)
}

/// Lowest eigenpair with the default Krylov size, from a seeded random start.
pub fn ground_state<O: SymmetricOperator + ?Sized>(
    op: &O,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> GroundState {
    let cfg = LanczosConfig {
        tol,
        max_iter,
        seed,
        ..LanczosConfig::default()
    };
    ground_state_with(op, &cfg, None)
}

/// Lowest eigenpair; `start` overrides the seeded random start vector.
pub fn ground_state_with<O: SymmetricOperator + ?Sized>(
    op: &O,
    cfg: &LanczosConfig,
    start: Option<&[f64]>,
) -> GroundState {
    let dim = op.dim();
    assert!(dim >= 1, "empty operator");
    assert!(cfg.tol > 0.0);
    let threshold = cfg.tol * op.norm_bound().max(f64::MIN_POSITIVE);

    let mut v0 = match start {
        Some(s) if s.len() == dim && norm(s) > 0.0 => {
            let mut v = s.to_vec();
            let n = norm(&v);
            scale(1.0 / n, &mut v);
            v
        }
        _ => random_unit(dim, cfg.seed),
    };

    if dim == 1 {
        let mut y = [0.0];
        op.apply(&[1.0], &mut y);
        return GroundState {
            energy: y[0],
            vector: vec![1.0],
            residual: 0.0,
            iterations: 1,
            converged: true,
        };
    }

    let krylov_cap = cfg.krylov_dim.clamp(2, dim);
    let mut products = 0usize;
    let mut best: Option<GroundState> = None;

    while products < cfg.max_iter {
        let mut basis: Vec<Vec<f64>> = vec![v0];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        let mut ritz: (f64, Vec<f64>);

        loop {
            let j = basis.len() - 1;
            op.apply(&basis[j], &mut w);
            products += 1;
            let alpha = dot(&basis[j], &w);
            alphas.push(alpha);
            axpy(-alpha, &basis[j], &mut w);
            if j > 0 {
                axpy(-betas[j - 1], &basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let beta = norm(&w);

            ritz = lowest_ritz(&alphas, &betas);
            let estimate = beta * ritz.1.last().unwrap().abs();
            let exhausted = products >= cfg.max_iter;
            let breakdown = beta <= 1e-14 * op.norm_bound().max(f64::MIN_POSITIVE);
            if estimate <= 0.1 * threshold || breakdown || basis.len() == krylov_cap || exhausted {
                break;
            }
            betas.push(beta);
            scale(1.0 / beta, &mut w);
            basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
        }

        let mut x = vec![0.0; dim];
        for (coef, q) in ritz.1.iter().zip(&basis) {
            axpy(*coef, q, &mut x);
        }
        let n = norm(&x);
        scale(1.0 / n, &mut x);
        drop(basis);

        let mut hx = vec![0.0; dim];
        op.apply(&x, &mut hx);
        products += 1;
        let energy = dot(&x, &hx);
        axpy(-energy, &x, &mut hx);
        let residual = norm(&hx);
        let converged = residual <= threshold;
        let candidate = GroundState {
            energy,
            vector: x,
            residual,
            iterations: products,
            converged,
        };
        if converged {
            return candidate;
        }
        v0 = candidate.vector.clone();
        let improves = best.as_ref().map_or(true, |b| candidate.residual < b.residual);
        if improves {
            best = Some(candidate);
        }
    }
    let mut out = best.expect("at least one Lanczos pass runs");
    out.iterations = products;
    out
}

/// Approximate inverse of `H − θ` used to expand a Davidson subspace.
pub trait Preconditioner: Sync {
    fn precondition(&self, r: &[f64], theta: f64, out: &mut [f64]);
}

/// `(diag(H) − θ)⁻¹`.
pub struct Jacobi(pub Vec<f64>);

impl Preconditioner for Jacobi {
    fn precondition(&self, r: &[f64], theta: f64, out: &mut [f64]) {
        for ((o, x), d) in out.iter_mut().zip(r).zip(&self.0) {
            *o = x / guard_denominator(d - theta);
        }
    }
}

/// Keeps `1 / den` finite when a diagonal entry meets the Ritz value.
pub fn guard_denominator(den: f64) -> f64 {
    const FLOOR: f64 = 1e-10;
    if den.abs() < FLOOR {
        FLOOR.copysign(den)
    } else {
        den
    }
}

/// Ritz vectors kept across a Davidson restart.
const DAVIDSON_KEEP: usize = 3;

/// Lowest eigenpair by Davidson iteration with Olsen-corrected preconditioned
/// residuals. `cfg.krylov_dim` caps the search space before a thick restart.
pub fn davidson<O, P>(op: &O, precond: &P, cfg: &LanczosConfig, start: Option<&[f64]>) -> GroundState
where
    O: SymmetricOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let dim = op.dim();
    assert!(dim >= 1, "empty operator");
    assert!(cfg.tol > 0.0);
    let scale_h = op.norm_bound().max(f64::MIN_POSITIVE);
    let threshold = cfg.tol * scale_h;
    if dim <= DAVIDSON_KEEP + 1 {
        return ground_state_with(op, cfg, start);
    }
    let cap = cfg.krylov_dim.clamp(DAVIDSON_KEEP + 2, dim);

    let mut v0 = match start {
        Some(s) if s.len() == dim && norm(s) > 0.0 => s.to_vec(),
        _ => random_unit(dim, cfg.seed),
    };
    let n0 = norm(&v0);
    scale(1.0 / n0, &mut v0);

    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut hvs: Vec<Vec<f64>> = Vec::with_capacity(cap);
    let mut products = 0usize;
    let mut hv0 = vec![0.0; dim];
    op.apply(&v0, &mut hv0);
    products += 1;
    vs.push(v0);
    hvs.push(hv0);
    let mut t_mat = DMatrix::from_element(1, 1, dot(&vs[0], &hvs[0]));

    let mut x = vec![0.0; dim];
    let mut hx = vec![0.0; dim];
    let mut r = vec![0.0; dim];
    let mut t = vec![0.0; dim];
    let mut u = vec![0.0; dim];

    loop {
        let eig = SymmetricEigen::new(t_mat.clone());
        let mut order: Vec<usize> = (0..t_mat.nrows()).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let theta = eig.eigenvalues[order[0]];
        let combine = |col: usize, src: &[Vec<f64>], out: &mut [f64]| {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (k, q) in src.iter().enumerate() {
                axpy(eig.eigenvectors[(k, col)], q, out);
            }
        };
        combine(order[0], &vs, &mut x);
        combine(order[0], &hvs, &mut hx);
        r.copy_from_slice(&hx);
        axpy(-theta, &x, &mut r);
        let estimate = norm(&r);
        let exhausted = products >= cfg.max_iter;

        if estimate <= 0.5 * threshold || exhausted {
            let nx = norm(&x);
            scale(1.0 / nx, &mut x);
            op.apply(&x, &mut hx);
            products += 1;
            let energy = dot(&x, &hx);
            axpy(-energy, &x, &mut hx);
            let residual = norm(&hx);
            let converged = residual <= threshold;
            if converged || exhausted {
                return GroundState {
                    energy,
                    vector: x,
                    residual,
                    iterations: products,
                    converged,
                };
            }
        }

        if vs.len() >= cap {
            let keep = DAVIDSON_KEEP.min(vs.len());
            let mut nv = Vec::with_capacity(cap);
            let mut nhv = Vec::with_capacity(cap);
            for &col in order.iter().take(keep) {
                let mut a = vec![0.0; dim];
                let mut b = vec![0.0; dim];
                combine(col, &vs, &mut a);
                combine(col, &hvs, &mut b);
                nv.push(a);
                nhv.push(b);
            }
            vs = nv;
            hvs = nhv;
            // the kept Ritz vectors are orthonormal up to rounding; re-orthonormalize
            for k in 0..vs.len() {
                for m in 0..k {
                    let c = dot(&vs[m], &vs[k]);
                    let (head, tail) = vs.split_at_mut(k);
                    axpy(-c, &head[m], &mut tail[0]);
                    let (hh, ht) = hvs.split_at_mut(k);
                    axpy(-c, &hh[m], &mut ht[0]);
                }
                let n = norm(&vs[k]);
                scale(1.0 / n, &mut vs[k]);
                scale(1.0 / n, &mut hvs[k]);
            }
            let m = vs.len();
            t_mat = DMatrix::from_fn(m, m, |a, b| dot(&vs[a], &hvs[b]));
            t_mat = (&t_mat + t_mat.transpose()) * 0.5;
            continue;
        }

        // Olsen correction: t = P r − ε P x with ε = (x·P r)/(x·P x)
        precond.precondition(&r, theta, &mut t);
        precond.precondition(&x, theta, &mut u);
        let xu = dot(&x, &u);
        if xu.abs() > f64::MIN_POSITIVE {
            let eps = dot(&x, &t) / xu;
            axpy(-eps, &u, &mut t);
        }
        let mut fresh = orthonormalize_against(&vs, &mut t);
        if !fresh {
            t.copy_from_slice(&r);
            fresh = orthonormalize_against(&vs, &mut t);
        }
        if !fresh {
            // search space cannot grow; report what we have
            let nx = norm(&x);
            scale(1.0 / nx, &mut x);
            op.apply(&x, &mut hx);
            products += 1;
            let energy = dot(&x, &hx);
            axpy(-energy, &x, &mut hx);
            let residual = norm(&hx);
            return GroundState {
                energy,
                vector: x,
                residual,
                iterations: products,
                converged: residual <= threshold,
            };
        }
        let mut ht = vec![0.0; dim];
        op.apply(&t, &mut ht);
        products += 1;
        let m = vs.len();
        let mut grown = DMatrix::zeros(m + 1, m + 1);
        grown.view_mut((0, 0), (m, m)).copy_from(&t_mat);
        for k in 0..m {
            let c = dot(&vs[k], &ht);
            grown[(k, m)] = c;
            grown[(m, k)] = c;
        }
        grown[(m, m)] = dot(&t, &ht);
        t_mat = grown;
        vs.push(t.clone());
        hvs.push(ht);
    }
}

/// Gram–Schmidt (twice) against `basis`, then normalize. Returns false when
/// nothing independent is left.
fn orthonormalize_against(basis: &[Vec<f64>], t: &mut [f64]) -> bool {
    let before = norm(t);
    if before == 0.0 || !before.is_finite() {
        return false;
    }
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, t);
            axpy(-c, q, t);
        }
    }
    let after = norm(t);
    if after <= 1e-12 * before {
        return false;
    }
    scale(1.0 / after, t);
    true
}

/// Lowest eigenpair of the tridiagonal matrix with diagonal `alphas` and
/// off-diagonal `betas`.
fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alphas[r]
        } else if r + 1 == c {
            betas[r]
        } else if c + 1 == r {
            betas[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (k, &e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    (e, eig.eigenvectors.column(k).iter().copied().collect())
}

pub const DENSE_LIMIT: usize = 4000;

/// Full spectrum in ascending order by dense diagonalization.
pub fn dense_spectrum(op: &SparseOperator) -> Result<Vec<f64>> {
    Ok(dense_eigen(op)?.0)
}

/// Ascending eigenvalues and the matching eigenvectors as columns.
pub fn dense_eigen(op: &SparseOperator) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if op.dim() > DENSE_LIMIT {
        return Err(JchError::ResourceGuard {
            what: "dense diagonalization dimension",
            size: op.dim(),
            limit: DENSE_LIMIT,
        });
    }
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(op.dim(), op.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}
