use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Level, LocalOp};
use crate::error::{JchError, Result};
use crate::hamiltonian::apply_string;

/// The five correlators `⟨O_i† O_j⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    /// `O = a`
    Photon,
    /// `O = a²`
    PhotonPair,
    /// `O = σ01`
    Atom,
    /// `O = σ02`
    AtomPair,
    /// `O = a σ01`
    AtomPhoton,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 5] = [
        CorrelationKind::Photon,
        CorrelationKind::PhotonPair,
        CorrelationKind::Atom,
        CorrelationKind::AtomPair,
        CorrelationKind::AtomPhoton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrelationKind::Photon => "photon",
            CorrelationKind::PhotonPair => "photon_pair",
            CorrelationKind::Atom => "atom",
            CorrelationKind::AtomPair => "atom_pair",
            CorrelationKind::AtomPhoton => "atom_photon",
        }
    }

    /// Single-site factors of `O`.
    pub fn operator(self) -> &'static [LocalOp] {
        match self {
            CorrelationKind::Photon => &[LocalOp::A],
            CorrelationKind::PhotonPair => &[LocalOp::A, LocalOp::A],
            CorrelationKind::Atom => &[LocalOp::Sigma01],
            CorrelationKind::AtomPair => &[LocalOp::Sigma02],
            CorrelationKind::AtomPhoton => &[LocalOp::A, LocalOp::Sigma01],
        }
    }

    pub fn is_pair(self) -> bool {
        matches!(self, CorrelationKind::PhotonPair | CorrelationKind::AtomPair)
    }
}

/// `⟨v| ops |v⟩` for a string of single-site operators (applied right to left).
pub fn expectation<B: Basis>(vector: &[f64], basis: &B, ops: &[(usize, LocalOp)]) -> Result<f64> {
    if vector.len() != basis.dim() {
        return Err(JchError::DimensionMismatch(vector.len(), basis.dim()));
    }
    let sites = basis.sites();
    if let Some(&(s, _)) = ops.iter().find(|(s, _)| *s >= sites) {
        return Err(JchError::SiteOutOfRange { site: s, sites });
    }
    let codec = basis.codec();
    let partial: Vec<f64> = (0..basis.dim())
        .into_par_iter()
        .with_min_len(4096)
        .fold_chunks(4096, || 0.0, |acc, k| {
            if vector[k] == 0.0 {
                return acc;
            }
            match apply_string(codec, basis.code(k), ops).and_then(|(c, amp)| {
                basis.index_of(c).map(|col| amp * vector[col])
            }) {
                Some(x) => acc + vector[k] * x,
                None => acc,
            }
        })
        .collect();
    Ok(partial.iter().sum())
}

/// `Γ(i, j) = ⟨O_i† O_j⟩` in the state `vector`.
pub fn correlation<B: Basis>(
    vector: &[f64],
    basis: &B,
    kind: CorrelationKind,
    i: usize,
    j: usize,
) -> Result<f64> {
    let op = kind.operator();
    let mut ops: Vec<(usize, LocalOp)> = op.iter().rev().map(|o| (i, o.adjoint())).collect();
    ops.extend(op.iter().map(|o| (j, *o)));
    expectation(vector, basis, &ops)
}

/// `Γ(i₀, i₀ + d)` for `d = 0 ..= max_distance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub kind: CorrelationKind,
    pub reference: usize,
    pub values: Vec<(usize, f64)>,
}

pub fn correlation_series<B: Basis>(
    vector: &[f64],
    basis: &B,
    kind: CorrelationKind,
    reference: usize,
    max_distance: usize,
) -> Result<CorrelationSeries> {
    let sites = basis.sites();
    if reference + max_distance >= sites {
        return Err(JchError::SiteOutOfRange {
            site: reference + max_distance,
            sites,
        });
    }
    let values = (0..=max_distance)
        .map(|d| Ok((d, correlation(vector, basis, kind, reference, reference + d)?)))
        .collect::<Result<_>>()?;
    Ok(CorrelationSeries {
        kind,
        reference,
        values,
    })
}

/// Reference site `L/4` and the largest distance reaching `3L/4`.
pub fn default_window(sites: usize) -> (usize, usize) {
    let i0 = sites / 4;
    let j = (3 * sites / 4).min(sites - 1).max(i0);
    (i0, j - i0)
}

/// On-site photon number and level populations `(⟨n_p⟩, P_e1, P_e2)`.
pub fn site_occupations<B: Basis>(vector: &[f64], basis: &B, site: usize) -> Result<(f64, f64, f64)> {
    if site >= basis.sites() {
        return Err(JchError::SiteOutOfRange {
            site,
            sites: basis.sites(),
        });
    }
    let codec = basis.codec();
    let mut out = (0.0, 0.0, 0.0);
    for (k, v) in vector.iter().enumerate() {
        let w = v * v;
        let s = codec.site(basis.code(k), site);
        out.0 += w * s.photons as f64;
        match s.level {
            Level::E1 => out.1 += w,
            Level::E2 => out.2 += w,
            Level::G => {}
        }
    }
    Ok(out)
}

/// Mean weighted charge per site.
pub fn density<B: Basis>(vector: &[f64], basis: &B) -> f64 {
    let codec = basis.codec();
    let total: f64 = vector
        .iter()
        .enumerate()
        .map(|(k, v)| v * v * codec.charge(basis.code(k)) as f64)
        .sum();
    total / basis.sites() as f64
}
