//! Local and many-body Hilbert spaces of the three-level cavity array.
//!
//! Every cavity holds `n_p` photons (truncated at `n_max`) and one ladder atom
//! in level `g`, `e1` or `e2`. The conserved polariton charge of a cavity is
//! `n_p + w(level)` with weights 0, 1, 2. Many-body configurations are encoded
//! as mixed-radix integers with site 0 as the most significant digit, so the
//! numeric order of codes is the lexicographic order of configurations.

use crate::error::{JchError, Result};

/// Atomic level of the ladder atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    G,
    E1,
    E2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::E1, Level::E2];

    /// Contribution of the level to the conserved charge.
    pub fn weight(self) -> usize {
        match self {
            Level::G => 0,
            Level::E1 => 1,
            Level::E2 => 2,
        }
    }

    fn offset(self) -> usize {
        self as usize
    }
}

/// Configuration of one cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalState {
    pub photons: usize,
    pub level: Level,
}

impl LocalState {
    pub fn new(photons: usize, level: Level) -> Self {
        Self { photons, level }
    }

    pub fn charge(&self) -> usize {
        self.photons + self.level.weight()
    }

    /// Position in the ordered local basis.
    pub fn ordinal(&self) -> usize {
        3 * self.photons + self.level.offset()
    }

    pub fn from_ordinal(k: usize) -> Self {
        Self {
            photons: k / 3,
            level: Level::ALL[k % 3],
        }
    }
}

impl std::fmt::Display for LocalState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lv = match self.level {
            Level::G => "g",
            Level::E1 => "e1",
            Level::E2 => "e2",
        };
        write!(f, "|{},{}⟩", self.photons, lv)
    }
}

/// Local basis ordered by `(n_p, level)` with `g < e1 < e2`.
pub fn local_states(n_max: usize) -> Vec<LocalState> {
    (0..3 * (n_max + 1)).map(LocalState::from_ordinal).collect()
}

/// Single-site operators that appear in the Hamiltonian and the correlators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalOp {
    /// Photon annihilation `a`.
    A,
    /// Photon creation `a†`.
    ADag,
    /// `σ01 = |g⟩⟨e1|`.
    Sigma01,
    Sigma01Dag,
    /// `σ02 = |g⟩⟨e2|`.
    Sigma02,
    Sigma02Dag,
    /// `σ12 = |e1⟩⟨e2|`.
    Sigma12,
    Sigma12Dag,
}

impl LocalOp {
    pub fn adjoint(self) -> Self {
        use LocalOp::*;
        match self {
            A => ADag,
            ADag => A,
            Sigma01 => Sigma01Dag,
            Sigma01Dag => Sigma01,
            Sigma02 => Sigma02Dag,
            Sigma02Dag => Sigma02,
            Sigma12 => Sigma12Dag,
            Sigma12Dag => Sigma12,
        }
    }

    /// Acts on a basis state; `None` when the result vanishes or leaves the truncated space.
    pub fn apply(self, s: LocalState, n_max: usize) -> Option<(LocalState, f64)> {
        use LocalOp::*;
        let lv = |from: Level, to: Level| {
            (s.level == from).then_some((LocalState::new(s.photons, to), 1.0))
        };
        match self {
            A => (s.photons > 0).then(|| {
                (
                    LocalState::new(s.photons - 1, s.level),
                    (s.photons as f64).sqrt(),
                )
            }),
            ADag => (s.photons < n_max).then(|| {
                (
                    LocalState::new(s.photons + 1, s.level),
                    ((s.photons + 1) as f64).sqrt(),
                )
            }),
            Sigma01 => lv(Level::E1, Level::G),
            Sigma01Dag => lv(Level::G, Level::E1),
            Sigma02 => lv(Level::E2, Level::G),
            Sigma02Dag => lv(Level::G, Level::E2),
            Sigma12 => lv(Level::E2, Level::E1),
            Sigma12Dag => lv(Level::E1, Level::E2),
        }
    }
}

/// Mixed-radix encoding of many-body configurations.
#[derive(Debug, Clone)]
pub struct Codec {
    sites: usize,
    n_max: usize,
    local_dim: u64,
    place: Vec<u64>,
}

impl Codec {
    pub fn new(sites: usize, n_max: usize) -> Result<Self> {
        let local_dim = 3 * (n_max as u64 + 1);
        let mut place = vec![1u64; sites];
        for s in (0..sites.saturating_sub(1)).rev() {
            place[s] = place[s + 1]
                .checked_mul(local_dim)
                .ok_or(JchError::BasisOverflow {
                    local_dim: local_dim as usize,
                    sites,
                })?;
        }
        if sites > 0 {
            place[0].checked_mul(local_dim).ok_or(JchError::BasisOverflow {
                local_dim: local_dim as usize,
                sites,
            })?;
        }
        Ok(Self {
            sites,
            n_max,
            local_dim,
            place,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim as usize
    }

    #[inline]
    pub fn site(&self, code: u64, site: usize) -> LocalState {
        LocalState::from_ordinal(((code / self.place[site]) % self.local_dim) as usize)
    }

    #[inline]
    pub fn replace(&self, code: u64, site: usize, old: LocalState, new: LocalState) -> u64 {
        code - old.ordinal() as u64 * self.place[site] + new.ordinal() as u64 * self.place[site]
    }

    pub fn encode(&self, config: &[LocalState]) -> u64 {
        config
            .iter()
            .zip(&self.place)
            .map(|(s, p)| s.ordinal() as u64 * p)
            .sum()
    }

    pub fn decode(&self, code: u64) -> Vec<LocalState> {
        (0..self.sites).map(|s| self.site(code, s)).collect()
    }

    pub fn charge(&self, code: u64) -> usize {
        (0..self.sites).map(|s| self.site(code, s).charge()).sum()
    }
}

/// A many-body basis addressed by ordinals and mixed-radix codes.
pub trait Basis: Sync {
    fn codec(&self) -> &Codec;
    fn dim(&self) -> usize;
    fn code(&self, k: usize) -> u64;
    fn index_of(&self, code: u64) -> Option<usize>;

    fn sites(&self) -> usize {
        self.codec().sites()
    }

    fn n_max(&self) -> usize {
        self.codec().n_max()
    }

    fn unrank(&self, k: usize) -> Vec<LocalState> {
        self.codec().decode(self.code(k))
    }

    fn rank(&self, config: &[LocalState]) -> Option<usize> {
        if config.len() != self.sites() || config.iter().any(|s| s.photons > self.n_max()) {
            return None;
        }
        self.index_of(self.codec().encode(config))
    }
}

/// All configurations of fixed total charge, in increasing lexicographic order.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    codec: Codec,
    charge: usize,
    codes: Vec<u64>,
}

impl SectorBasis {
    pub fn charge(&self) -> usize {
        self.charge
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }
}

impl Basis for SectorBasis {
    fn codec(&self) -> &Codec {
        &self.codec
    }

    fn dim(&self) -> usize {
        self.codes.len()
    }

    fn code(&self, k: usize) -> u64 {
        self.codes[k]
    }

    fn index_of(&self, code: u64) -> Option<usize> {
        self.codes.binary_search(&code).ok()
    }
}

/// Enumerates the sector of total charge `charge` on `sites` cavities.
pub fn enumerate_sector(sites: usize, charge: usize, n_max: usize) -> Result<SectorBasis> {
    if sites == 0 {
        return Err(JchError::InvalidParameter("a lattice needs at least one site".into()));
    }
    let codec = Codec::new(sites, n_max)?;
    let cap = n_max + 2;
    if charge > sites * cap {
        return Err(JchError::EmptySector {
            sites,
            charge,
            n_max,
        });
    }
    let locals = local_states(n_max);
    let mut codes = Vec::with_capacity(sector_dimension(sites, charge, n_max));

    fn fill(
        site: usize,
        remaining: usize,
        code: u64,
        codec: &Codec,
        locals: &[LocalState],
        cap: usize,
        out: &mut Vec<u64>,
    ) {
        let sites = codec.sites;
        if site == sites {
            if remaining == 0 {
                out.push(code);
            }
            return;
        }
        let rest = (sites - site - 1) * cap;
        for s in locals {
            let q = s.charge();
            if q > remaining || remaining - q > rest {
                continue;
            }
            let next = code + s.ordinal() as u64 * codec.place[site];
            fill(site + 1, remaining - q, next, codec, locals, cap, out);
        }
    }
    fill(0, charge, 0, &codec, &locals, cap, &mut codes);

    if codes.is_empty() {
        return Err(JchError::EmptySector {
            sites,
            charge,
            n_max,
        });
    }
    Ok(SectorBasis {
        codec,
        charge,
        codes,
    })
}

/// Number of states with charge `q` in one truncated cavity.
pub fn local_multiplicity(q: usize, n_max: usize) -> usize {
    Level::ALL
        .iter()
        .filter(|l| q >= l.weight() && q - l.weight() <= n_max)
        .count()
}

/// Sector dimension by convolution of per-site charge multiplicities.
pub fn sector_dimension(sites: usize, charge: usize, n_max: usize) -> usize {
    let mut counts = vec![0usize; charge + 1];
    counts[0] = 1;
    for _ in 0..sites {
        let mut next = vec![0usize; charge + 1];
        for (done, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for q in 0..=(charge - done) {
                next[done + q] += c * local_multiplicity(q, n_max);
            }
        }
        counts = next;
    }
    counts[charge]
}

/// Every configuration of the truncated lattice, all charges mixed.
#[derive(Debug, Clone)]
pub struct FullBasis {
    codec: Codec,
    dim: usize,
}

impl FullBasis {
    pub fn new(sites: usize, n_max: usize) -> Result<Self> {
        if sites == 0 {
            return Err(JchError::InvalidParameter("a lattice needs at least one site".into()));
        }
        let codec = Codec::new(sites, n_max)?;
        let dim = codec.place[0] * codec.local_dim;
        let dim = usize::try_from(dim).map_err(|_| JchError::BasisOverflow {
            local_dim: codec.local_dim(),
            sites,
        })?;
        Ok(Self { codec, dim })
    }

    /// Total charge of every basis state, in ordinal order.
    pub fn charges(&self) -> Vec<usize> {
        (0..self.dim).map(|k| self.codec.charge(k as u64)).collect()
    }
}

impl Basis for FullBasis {
    fn codec(&self) -> &Codec {
        &self.codec
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn code(&self, k: usize) -> u64 {
        k as u64
    }

    fn index_of(&self, code: u64) -> Option<usize> {
        ((code as usize) < self.dim).then_some(code as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn st(n: usize, l: Level) -> LocalState {
        LocalState::new(n, l)
    }

    #[test]
    fn local_space_sizes_and_order() {
        let s0 = local_states(0);
        assert_eq!(s0, vec![st(0, Level::G), st(0, Level::E1), st(0, Level::E2)]);
        assert_eq!(local_states(4).len(), 15);
        assert!(local_states(4).windows(2).all(|w| w[0] < w[1]));
        assert_eq!(st(1, Level::E2).charge(), 3);
    }

    #[test]
    fn single_site_charge_two() {
        let b = enumerate_sector(1, 2, 2).unwrap();
        let got: BTreeSet<_> = (0..b.dim()).map(|k| b.unrank(k)[0]).collect();
        let want: BTreeSet<_> = [st(2, Level::G), st(1, Level::E1), st(0, Level::E2)].into();
        assert_eq!(got, want);
    }

    #[test]
    fn two_sites_charge_one() {
        let b = enumerate_sector(2, 1, 1).unwrap();
        let got: BTreeSet<_> = (0..b.dim()).map(|k| b.unrank(k)).collect();
        let want: BTreeSet<_> = [
            vec![st(1, Level::G), st(0, Level::G)],
            vec![st(0, Level::E1), st(0, Level::G)],
            vec![st(0, Level::G), st(1, Level::G)],
            vec![st(0, Level::G), st(0, Level::E1)],
        ]
        .into();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_sector_is_an_error() {
        assert!(matches!(
            enumerate_sector(2, 9, 2),
            Err(JchError::EmptySector { .. })
        ));
        // the largest charge is still allowed
        assert_eq!(enumerate_sector(2, 8, 2).unwrap().dim(), 1);
        assert_eq!(sector_dimension(2, 9, 2), 0);
    }

    #[test]
    fn small_dimensions() {
        assert_eq!(sector_dimension(1, 0, 3), 1);
        assert_eq!(sector_dimension(1, 1, 1), 2);
        // (0,2)+(1,1)+(2,0) = 3 + 4 + 3, by brute force below
        assert_eq!(sector_dimension(2, 2, 2), 10);
        let brute = local_states(2)
            .iter()
            .flat_map(|a| local_states(2).into_iter().map(move |b| (*a, b)))
            .filter(|(a, b)| a.charge() + b.charge() == 2)
            .count();
        assert_eq!(brute, 10);
    }

    #[test]
    fn exhaustive_dimension_agreement() {
        for l in 1..=4 {
            for n_max in 0..=4 {
                for n in 0..=8 {
                    let d = sector_dimension(l, n, n_max);
                    match enumerate_sector(l, n, n_max) {
                        Ok(b) => assert_eq!(b.dim(), d, "L={l} N={n} n_max={n_max}"),
                        Err(_) => assert_eq!(d, 0),
                    }
                }
            }
        }
    }

    #[test]
    fn sectors_partition_the_full_space() {
        for l in 1..=3 {
            for n_max in 0..=3 {
                let total: usize = (0..=l * (n_max + 2))
                    .map(|n| sector_dimension(l, n, n_max))
                    .sum();
                assert_eq!(total, (3 * (n_max + 1)).pow(l as u32));
                assert_eq!(FullBasis::new(l, n_max).unwrap().dim(), total);
            }
        }
    }

    #[test]
    fn sector_is_sorted_and_charge_exact() {
        let b = enumerate_sector(4, 5, 3).unwrap();
        assert!(b.codes().windows(2).all(|w| w[0] < w[1]));
        for k in 0..b.dim() {
            let c = b.unrank(k);
            assert_eq!(c.iter().map(|s| s.charge()).sum::<usize>(), 5);
            assert_eq!(b.rank(&c), Some(k));
        }
        let configs: Vec<_> = (0..b.dim()).map(|k| b.unrank(k)).collect();
        assert!(configs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn local_operator_matrix_elements() {
        assert_eq!(
            LocalOp::A.apply(st(3, Level::E1), 4),
            Some((st(2, Level::E1), 3f64.sqrt()))
        );
        assert_eq!(LocalOp::ADag.apply(st(4, Level::G), 4), None);
        assert_eq!(
            LocalOp::Sigma02.apply(st(1, Level::E2), 4),
            Some((st(1, Level::G), 1.0))
        );
        assert_eq!(LocalOp::Sigma01.apply(st(1, Level::E2), 4), None);
        assert_eq!(LocalOp::Sigma12Dag.adjoint(), LocalOp::Sigma12);
    }

    fn random_config(sites: usize, n_max: usize) -> impl Strategy<Value = Vec<LocalState>> {
        proptest::collection::vec(0..3 * (n_max + 1), sites)
            .prop_map(|v| v.into_iter().map(LocalState::from_ordinal).collect())
    }

    proptest! {
        #[test]
        fn rank_unrank_roundtrip(config in random_config(4, 3)) {
            let n: usize = config.iter().map(|s| s.charge()).sum();
            let b = enumerate_sector(4, n, 3).unwrap();
            let k = b.rank(&config).expect("configuration of charge N must be indexed");
            prop_assert_eq!(b.unrank(k), config);
        }
    }
}
