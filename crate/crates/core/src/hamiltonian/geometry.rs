use serde::{Deserialize, Serialize};

/// Boundary condition of a 1D chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Nearest-neighbour bonds of a chain of `sites` cavities.
pub fn chain_bonds(sites: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut bonds: Vec<_> = (0..sites.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && sites > 2 {
        bonds.push((sites - 1, 0));
    }
    bonds
}

/// Supported cluster shapes on the square lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ClusterShape {
    #[serde(rename = "1x1")]
    OneByOne,
    #[serde(rename = "2x1")]
    TwoByOne,
    #[default]
    #[serde(rename = "2x2")]
    TwoByTwo,
}

impl ClusterShape {
    pub fn extent(self) -> (usize, usize) {
        match self {
            ClusterShape::OneByOne => (1, 1),
            ClusterShape::TwoByOne => (2, 1),
            ClusterShape::TwoByTwo => (2, 2),
        }
    }
}

impl std::fmt::Display for ClusterShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (w, h) = self.extent();
        write!(f, "{w}x{h}")
    }
}

/// A cluster tile of the square lattice (coordination 4).
///
/// Bonds leaving the tile are cut; each cut bond of site `i` points at the
/// periodic image of the tile, i.e. the site of this cluster that the
/// neighbouring cluster places at the far end of the bond.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterGeometry {
    pub shape: ClusterShape,
    pub internal_bonds: Vec<(usize, usize)>,
    /// `(site, image site)` for every cut bond.
    pub boundary_bonds: Vec<(usize, usize)>,
}

impl ClusterGeometry {
    pub const COORDINATION: usize = 4;

    pub fn new(shape: ClusterShape) -> Self {
        let (w, h) = shape.extent();
        let idx = |x: usize, y: usize| y * w + x;
        let mut internal_bonds = Vec::new();
        let mut boundary_bonds = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let here = idx(x, y);
                let steps = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)];
                for (dx, dy) in steps {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    let inside = (0..w as i64).contains(&nx) && (0..h as i64).contains(&ny);
                    let image = idx(
                        nx.rem_euclid(w as i64) as usize,
                        ny.rem_euclid(h as i64) as usize,
                    );
                    if inside {
                        if here < image {
                            internal_bonds.push((here, image));
                        }
                    } else {
                        boundary_bonds.push((here, image));
                    }
                }
            }
        }
        Self {
            shape,
            internal_bonds,
            boundary_bonds,
        }
    }

    pub fn sites(&self) -> usize {
        let (w, h) = self.shape.extent();
        w * h
    }

    pub fn internal_degree(&self, site: usize) -> usize {
        self.internal_bonds
            .iter()
            .filter(|(a, b)| *a == site || *b == site)
            .count()
    }

    pub fn cut_bonds(&self, site: usize) -> usize {
        self.boundary_bonds.iter().filter(|(s, _)| *s == site).count()
    }
}
