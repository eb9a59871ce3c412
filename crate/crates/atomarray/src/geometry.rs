//! Site lattice, mask geometry, and stochastic occupancy.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Array mask: which lattice points become tweezer sites.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mask {
    /// Keep sites whose center lies within `radius` (µm) of the array center.
    Circular { radius: f64 },
    /// n_rows × n_cols block centered on the array center.
    Rectangular { n_rows: usize, n_cols: usize },
}

/// One tweezer site. Lattice indices are signed and symmetric about the
/// center: position = (index + 1/2) × spacing, so no site sits on the axes
/// and the four quadrants are congruent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Site {
    pub row: i32,
    pub col: i32,
    /// µm
    pub x: f64,
    /// µm
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArrayGeometry {
    /// Lattice spacing, µm.
    pub spacing: f64,
    pub mask: Mask,
    sites: Vec<Site>,
}

impl ArrayGeometry {
    /// Paper-scale default: 7.2 µm spacing, circular mask sized to hold
    /// ~12,000 sites (62 occupied rows per quadrant).
    pub fn paper_default() -> Self {
        Self::new(7.2, Mask::Circular { radius: 444.5 }).unwrap()
    }

    pub fn new(spacing: f64, mask: Mask) -> Result<Self> {
        if spacing <= 0.0 {
            return Err(Error::domain("spacing must be positive"));
        }
        let mut sites = Vec::new();
        match mask {
            Mask::Circular { radius } => {
                if radius <= 0.0 {
                    return Err(Error::domain("mask radius must be positive"));
                }
                let n = (radius / spacing).ceil() as i32 + 1;
                for row in -n..n {
                    for col in -n..n {
                        let x = (col as f64 + 0.5) * spacing;
                        let y = (row as f64 + 0.5) * spacing;
                        if x * x + y * y <= radius * radius {
                            sites.push(Site { row, col, x, y });
                        }
                    }
                }
            }
            Mask::Rectangular { n_rows, n_cols } => {
                if n_rows == 0 || n_cols == 0 {
                    return Err(Error::domain("rectangular mask must be non-empty"));
                }
                let (r0, c0) = (n_rows as i32 / 2, n_cols as i32 / 2);
                for r in 0..n_rows as i32 {
                    for c in 0..n_cols as i32 {
                        let (row, col) = (r - r0, c - c0);
                        sites.push(Site {
                            row,
                            col,
                            x: (col as f64 + 0.5) * spacing,
                            y: (row as f64 + 0.5) * spacing,
                        });
                    }
                }
            }
        }
        Ok(ArrayGeometry { spacing, mask, sites })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Half-width of the occupied extent along x, µm.
    pub fn extent_x(&self) -> f64 {
        self.sites.iter().map(|s| s.x.abs()).fold(0.0, f64::max)
    }
}

/// Per-site boolean occupation over a geometry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Occupancy {
    pub filled: Vec<bool>,
}

impl Occupancy {
    pub fn empty(geometry: &ArrayGeometry) -> Self {
        Occupancy { filled: vec![false; geometry.n_sites()] }
    }

    pub fn count(&self) -> usize {
        self.filled.iter().filter(|&&b| b).count()
    }
}

/// Independent Bernoulli(fill) per site.
pub fn sample_occupancy(geometry: &ArrayGeometry, fill: f64, rng: &mut SeededRng) -> Result<Occupancy> {
    if !(0.0..=1.0).contains(&fill) {
        return Err(Error::domain("fill must lie in [0, 1]"));
    }
    let filled = (0..geometry.n_sites()).map(|_| rng.gen::<f64>() < fill).collect();
    Ok(Occupancy { filled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn paper_default_site_count() {
        let g = ArrayGeometry::paper_default();
        assert!(
            (11_900..=12_100).contains(&g.n_sites()),
            "got {} sites",
            g.n_sites()
        );
        // exact 4-fold symmetry: same number of sites in each quadrant
        let q = g.sites().iter().filter(|s| s.x > 0.0 && s.y > 0.0).count();
        assert_eq!(q * 4, g.n_sites());
        // 62 occupied rows per quadrant (SI Table 1 arithmetic anchor)
        let rows: std::collections::BTreeSet<i32> =
            g.sites().iter().filter(|s| s.x > 0.0 && s.y > 0.0).map(|s| s.row).collect();
        assert_eq!(rows.len(), 62);
    }

    #[test]
    fn positions_unique_and_masked() {
        let g = ArrayGeometry::paper_default();
        let mut seen = std::collections::HashSet::new();
        let Mask::Circular { radius } = g.mask else { panic!() };
        for s in g.sites() {
            assert!(seen.insert((s.row, s.col)));
            assert!(s.x.hypot(s.y) <= radius);
        }
    }

    #[test]
    fn fill_extremes() {
        let g = ArrayGeometry::new(7.2, Mask::Rectangular { n_rows: 10, n_cols: 10 }).unwrap();
        let mut r = rng::seeded(3);
        assert_eq!(sample_occupancy(&g, 0.0, &mut r).unwrap().count(), 0);
        assert_eq!(sample_occupancy(&g, 1.0, &mut r).unwrap().count(), 100);
    }

    #[test]
    fn fill_mean_matches_binomial() {
        // mean count over many draws within 3 sigma of n*p
        let g = ArrayGeometry::paper_default();
        let n = g.n_sites() as f64;
        let p = 0.512;
        let draws = 1000;
        let mut total = 0usize;
        let mut r = rng::seeded(7);
        for _ in 0..draws {
            total += sample_occupancy(&g, p, &mut r).unwrap().count();
        }
        let mean = total as f64 / draws as f64;
        let sigma_mean = (n * p * (1.0 - p) / draws as f64).sqrt();
        assert!((mean - n * p).abs() < 3.0 * sigma_mean, "mean {mean} vs {}", n * p);
    }

    #[test]
    fn occupancy_deterministic_by_seed() {
        let g = ArrayGeometry::paper_default();
        let a = sample_occupancy(&g, 0.512, &mut rng::seeded(42)).unwrap();
        let b = sample_occupancy(&g, 0.512, &mut rng::seeded(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometry_roundtrips_through_json() {
        let g = ArrayGeometry::paper_default();
        let s = serde_json::to_string(&g).unwrap();
        let back: ArrayGeometry = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back); // bit-exact f64 round-trip
    }
}
