//! Discrete torus geometry, interaction neighborhoods and occupancy configurations.
//!
//! Sites are indexed row-major: the coordinate `(c_0, ..., c_{d-1})` maps to
//! `sum_a c_a * N^(d-1-a)`, so the last axis varies fastest. All shifts wrap
//! cyclically and never expose negative indices.
//!
//! Local statistics (`r_i`, `rho_i`) are integer counts over `K`; the real
//! values are only produced at the API boundary so threshold tests stay exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used to snap `K * T` onto an integer before threshold tests.
///
/// Decimal thresholds such as `0.3` are not representable in binary; without the
/// snap `10 * 0.3` could land on either side of `3` and flip a sharp inequality.
const THRESHOLD_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("torus dimension and side length must be positive (got d={dim}, N={side})")]
    EmptyTorus { dim: usize, side: usize },
    #[error("threshold must lie in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
    #[error("neighborhood radius {radius} too large for side {side}: need 2r+1 < N")]
    RadiusTooLarge { radius: usize, side: usize },
    #[error("neighborhood radius must be positive")]
    ZeroRadius,
    #[error("offset {0:?} has the wrong dimension")]
    OffsetDimension(Vec<i64>),
    #[error("offset {0:?} is the origin on this torus")]
    OffsetIsOrigin(Vec<i64>),
    #[error("offsets {0:?} and {1:?} coincide on this torus")]
    DuplicateOffset(Vec<i64>, Vec<i64>),
    #[error("neighborhood must contain at least one offset")]
    EmptyNeighborhood,
    #[error("neighborhood has dimension {nbhd} but torus has dimension {torus}")]
    DimensionMismatch { nbhd: usize, torus: usize },
    #[error("site {site} out of range for a torus with {count} sites")]
    SiteOutOfRange { site: usize, count: usize },
    #[error("sites {0} and {1} are not nearest neighbors")]
    NotAdjacent(usize, usize),
    #[error("occupancy length {got} does not match site count {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("malformed lattice text: {0}")]
    Parse(String),
}

/// The discrete torus `(Z/NZ)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGeometry {
    dim: usize,
    side: usize,
}

impl TorusGeometry {
    pub fn new(dim: usize, side: usize) -> Result<Self, LatticeError> {
        if dim == 0 || side == 0 {
            return Err(LatticeError::EmptyTorus { dim, side });
        }
        Ok(Self { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `N^d`.
    pub fn site_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        let mut rest = site;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.side;
            rest /= self.side;
        }
        out
    }

    /// Index of the site with the given coordinates, reduced modulo `N`.
    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.side + c % self.side)
    }

    /// Coordinate of `site` along `axis`.
    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.stride(axis)) % self.side
    }

    /// `site + offset` with cyclic wrap on every axis.
    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        let n = self.side as i64;
        let mut out = site;
        for (axis, &off) in offset.iter().enumerate() {
            let stride = self.stride(axis);
            let c = ((site / stride) % self.side) as i64;
            let moved = (c + off).rem_euclid(n);
            out = out + (moved as usize) * stride - (c as usize) * stride;
        }
        out
    }

    /// Nearest neighbor of `site` one unit along `axis`.
    pub fn step(&self, site: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.side;
        let moved = if forward {
            (c + 1) % self.side
        } else {
            (c + self.side - 1) % self.side
        };
        site + moved * stride - c * stride
    }

    /// Whether `i` and `j` differ by one unit along exactly one axis.
    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        (0..self.dim).any(|axis| self.step(i, axis, true) == j || self.step(i, axis, false) == j)
            && i != j
    }

    /// Macroscopic position `i / N` in `[0, 1)^d`.
    pub fn position(&self, site: usize) -> Vec<f64> {
        self.coords(site)
            .into_iter()
            .map(|c| c as f64 / self.side as f64)
            .collect()
    }

    pub fn check_site(&self, site: usize) -> Result<(), LatticeError> {
        if site >= self.site_count() {
            return Err(LatticeError::SiteOutOfRange {
                site,
                count: self.site_count(),
            });
        }
        Ok(())
    }
}

fn uniform_distance(a: &[i64], b: &[i64]) -> usize {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
}

/// The interaction set `V`: distinct nonzero offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhood {
    dim: usize,
    offsets: Vec<Vec<i64>>,
    diameter: usize,
}

impl Neighborhood {
    /// Build from an explicit offset list.
    pub fn from_offsets(dim: usize, offsets: Vec<Vec<i64>>) -> Result<Self, LatticeError> {
        if offsets.is_empty() {
            return Err(LatticeError::EmptyNeighborhood);
        }
        for (n, off) in offsets.iter().enumerate() {
            if off.len() != dim {
                return Err(LatticeError::OffsetDimension(off.clone()));
            }
            if off.iter().all(|&c| c == 0) {
                return Err(LatticeError::OffsetIsOrigin(off.clone()));
            }
            if let Some(prev) = offsets[..n].iter().find(|p| *p == off) {
                return Err(LatticeError::DuplicateOffset(prev.clone(), off.clone()));
            }
        }
        let mut diameter = 0;
        for a in &offsets {
            for b in &offsets {
                diameter = diameter.max(uniform_distance(a, b));
            }
        }
        Ok(Self {
            dim,
            offsets,
            diameter,
        })
    }

    /// Uniform-norm ball of the given radius minus the origin. With `one_sided`
    /// in `d = 1` only the negative offsets `-1, ..., -radius` are kept.
    pub fn build_box(
        geometry: &TorusGeometry,
        radius: usize,
        one_sided: bool,
    ) -> Result<Self, LatticeError> {
        if radius == 0 {
            return Err(LatticeError::ZeroRadius);
        }
        if 2 * radius + 1 >= geometry.side() {
            return Err(LatticeError::RadiusTooLarge {
                radius,
                side: geometry.side(),
            });
        }
        let dim = geometry.dim();
        let r = radius as i64;
        let offsets = if one_sided && dim == 1 {
            (1..=r).map(|k| vec![-k]).collect()
        } else {
            let width = (2 * radius + 1) as i64;
            let total = width.pow(dim as u32);
            (0..total)
                .map(|mut code| {
                    let mut v = vec![0; dim];
                    for c in v.iter_mut().rev() {
                        *c = code % width - r;
                        code /= width;
                    }
                    v
                })
                .filter(|v| v.iter().any(|&c| c != 0))
                .collect()
        };
        Self::from_offsets(dim, offsets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    /// Cardinality `K`.
    pub fn size(&self) -> usize {
        self.offsets.len()
    }

    /// Maximal pairwise uniform-norm distance between offsets.
    pub fn diameter(&self) -> usize {
        self.diameter
    }
}

/// Precomputed neighbor indices of every site, plus the reverse map
/// (sites whose neighborhood contains a given site).
#[derive(Debug, Clone)]
pub struct NeighborTable {
    geometry: TorusGeometry,
    k: usize,
    forward: Vec<u32>,
    reverse: Vec<u32>,
}

impl NeighborTable {
    pub fn new(geometry: &TorusGeometry, nbhd: &Neighborhood) -> Result<Self, LatticeError> {
        if nbhd.dim() != geometry.dim() {
            return Err(LatticeError::DimensionMismatch {
                nbhd: nbhd.dim(),
                torus: geometry.dim(),
            });
        }
        // Offsets must stay distinct and nonzero after reduction mod N.
        let images: Vec<usize> = nbhd.offsets().iter().map(|v| geometry.shift(0, v)).collect();
        for (n, &img) in images.iter().enumerate() {
            if img == 0 {
                return Err(LatticeError::OffsetIsOrigin(nbhd.offsets()[n].clone()));
            }
            if let Some(m) = images[..n].iter().position(|&o| o == img) {
                return Err(LatticeError::DuplicateOffset(
                    nbhd.offsets()[m].clone(),
                    nbhd.offsets()[n].clone(),
                ));
            }
        }
        let count = geometry.site_count();
        let k = nbhd.size();
        let mut forward = Vec::with_capacity(count * k);
        let mut reverse = Vec::with_capacity(count * k);
        let negated: Vec<Vec<i64>> = nbhd
            .offsets()
            .iter()
            .map(|v| v.iter().map(|c| -c).collect())
            .collect();
        for site in 0..count {
            for off in nbhd.offsets() {
                forward.push(geometry.shift(site, off) as u32);
            }
            for off in &negated {
                reverse.push(geometry.shift(site, off) as u32);
            }
        }
        Ok(Self {
            geometry: *geometry,
            k,
            forward,
            reverse,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The sites `i + v`, `v` in `V`.
    pub fn neighbors(&self, site: usize) -> &[u32] {
        &self.forward[site * self.k..(site + 1) * self.k]
    }

    /// The sites `i - v`, `v` in `V`: exactly those whose local statistics read `site`.
    pub fn dependents(&self, site: usize) -> &[u32] {
        &self.reverse[site * self.k..(site + 1) * self.k]
    }
}

/// The tolerance threshold `T` of the agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self, LatticeError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(LatticeError::ThresholdOutOfRange(value));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// `K * T`, snapped to an integer when it is within rounding of one.
    pub fn scaled(&self, k: usize) -> f64 {
        let x = self.0 * k as f64;
        let r = x.round();
        if (x - r).abs() <= THRESHOLD_SNAP {
            r
        } else {
            x
        }
    }

    /// `count / k < T`.
    pub fn below(&self, count: usize, k: usize) -> bool {
        (count as f64) < self.scaled(k)
    }

    /// `count / k <= 1 - T`.
    pub fn at_most_complement(&self, count: usize, k: usize) -> bool {
        (count as f64) <= k as f64 - self.scaled(k)
    }

    /// `min(ceil(KT) - 1, floor(K(1 - T)))`: the largest count `s` with
    /// `s/K < T` and `s/K <= 1 - T`. Negative when no count qualifies.
    pub fn kappa(&self, k: usize) -> i64 {
        let kt = self.scaled(k);
        let a = kt.ceil() as i64 - 1;
        let b = (k as f64 - kt).floor() as i64;
        a.min(b)
    }

    /// `min(floor(KT) - 1, floor(K(1 - T)))`, the alternative convention.
    pub fn kappa_floor_variant(&self, k: usize) -> i64 {
        let kt = self.scaled(k);
        let a = kt.floor() as i64 - 1;
        let b = (k as f64 - kt).floor() as i64;
        a.min(b)
    }
}

/// Local stability class of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteClass {
    /// `r_i >= T`.
    Stable,
    /// Unstable, and flipping would not help: `1 - T < r_i < T`.
    UnstableBlocked,
    /// Unstable, and stable after a flip: `r_i < T` and `r_i <= 1 - T`.
    PotentiallyStable,
}

/// An occupancy field `eta` in `{0,1}` over the torus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    geometry: TorusGeometry,
    occupancy: Vec<u8>,
    ones: usize,
}

impl Configuration {
    pub fn filled(geometry: TorusGeometry, value: bool) -> Self {
        let count = geometry.site_count();
        Self {
            geometry,
            occupancy: vec![value as u8; count],
            ones: if value { count } else { 0 },
        }
    }

    pub fn from_bits(geometry: TorusGeometry, bits: Vec<bool>) -> Result<Self, LatticeError> {
        if bits.len() != geometry.site_count() {
            return Err(LatticeError::LengthMismatch {
                got: bits.len(),
                expected: geometry.site_count(),
            });
        }
        let ones = bits.iter().filter(|&&b| b).count();
        Ok(Self {
            geometry,
            occupancy: bits.into_iter().map(u8::from).collect(),
            ones,
        })
    }

    /// Configuration whose site `i` holds bit `i` of `code`. Handy for enumerating small tori.
    pub fn from_code(geometry: TorusGeometry, code: u64) -> Self {
        let bits = (0..geometry.site_count())
            .map(|i| (code >> i) & 1 == 1)
            .collect();
        Self::from_bits(geometry, bits).expect("length matches by construction")
    }

    /// Inverse of [`Configuration::from_code`]; only meaningful for at most 64 sites.
    pub fn code(&self) -> u64 {
        self.occupancy
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn get(&self, site: usize) -> bool {
        self.occupancy[site] == 1
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    pub fn ones_count(&self) -> usize {
        self.ones
    }

    pub fn flip_in_place(&mut self, site: usize) {
        let v = &mut self.occupancy[site];
        if *v == 1 {
            *v = 0;
            self.ones -= 1;
        } else {
            *v = 1;
            self.ones += 1;
        }
    }

    /// `eta^i`.
    pub fn flip(&self, site: usize) -> Result<Self, LatticeError> {
        self.geometry.check_site(site)?;
        let mut out = self.clone();
        out.flip_in_place(site);
        Ok(out)
    }

    /// Swap the values at two sites without any adjacency check.
    pub fn swap_in_place(&mut self, i: usize, j: usize) {
        self.occupancy.swap(i, j);
    }

    /// `eta^{ij}` for nearest neighbors `i`, `j`.
    pub fn exchange(&self, i: usize, j: usize) -> Result<Self, LatticeError> {
        self.geometry.check_site(i)?;
        self.geometry.check_site(j)?;
        if !self.geometry.are_adjacent(i, j) {
            return Err(LatticeError::NotAdjacent(i, j));
        }
        let mut out = self.clone();
        out.swap_in_place(i, j);
        Ok(out)
    }

    /// Number of neighbors of `site` holding the same value as `site`.
    pub fn same_count(&self, table: &NeighborTable, site: usize) -> usize {
        let own = self.occupancy[site];
        table
            .neighbors(site)
            .iter()
            .filter(|&&j| self.occupancy[j as usize] == own)
            .count()
    }

    /// Number of occupied neighbors of `site`.
    pub fn occupied_count(&self, table: &NeighborTable, site: usize) -> usize {
        table
            .neighbors(site)
            .iter()
            .filter(|&&j| self.occupancy[j as usize] == 1)
            .count()
    }

    /// `r_i(eta)`: fraction of neighbors sharing the value at `site`.
    pub fn local_fraction(&self, table: &NeighborTable, site: usize) -> f64 {
        self.same_count(table, site) as f64 / table.k() as f64
    }

    /// `rho_i(eta)`: fraction of occupied neighbors.
    pub fn mean_field(&self, table: &NeighborTable, site: usize) -> f64 {
        self.occupied_count(table, site) as f64 / table.k() as f64
    }

    pub fn classify_site(
        &self,
        table: &NeighborTable,
        site: usize,
        threshold: Threshold,
    ) -> SiteClass {
        classify_count(self.same_count(table, site), table.k(), threshold)
    }

    /// Lattice text format: a `d N` header line, then `N^d` characters `0`/`1`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.geometry.dim(), self.geometry.side());
        s.extend(self.occupancy.iter().map(|&b| if b == 1 { '1' } else { '0' }));
        s.push('\n');
        s
    }
}

/// Classify a site from its count of like-valued neighbors.
pub fn classify_count(same: usize, k: usize, threshold: Threshold) -> SiteClass {
    if !threshold.below(same, k) {
        SiteClass::Stable
    } else if threshold.at_most_complement(same, k) {
        SiteClass::PotentiallyStable
    } else {
        SiteClass::UnstableBlocked
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Configuration {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines();
        let header = lines
            .next()
            .ok_or_else(|| LatticeError::Parse("missing header".into()))?;
        let mut fields = header.split_whitespace();
        let mut next_num = |name: &str| -> Result<usize, LatticeError> {
            fields
                .next()
                .ok_or_else(|| LatticeError::Parse(format!("missing {name} in header")))?
                .parse()
                .map_err(|_| LatticeError::Parse(format!("bad {name} in header")))
        };
        let dim = next_num("d")?;
        let side = next_num("N")?;
        let geometry = TorusGeometry::new(dim, side)?;
        let body: String = lines.collect::<Vec<_>>().concat();
        let bits = body
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(LatticeError::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Configuration::from_bits(geometry, bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> (TorusGeometry, NeighborTable) {
        let g = TorusGeometry::new(1, n).unwrap();
        let nb = Neighborhood::from_offsets(1, vec![vec![-1], vec![1]]).unwrap();
        let t = NeighborTable::new(&g, &nb).unwrap();
        (g, t)
    }

    fn alternating() -> (Configuration, NeighborTable) {
        let (g, t) = ring(4);
        let c = Configuration::from_bits(g, vec![false, true, false, true]).unwrap();
        (c, t)
    }

    #[test]
    fn geometry_wraps() {
        let g = TorusGeometry::new(2, 5).unwrap();
        assert_eq!(g.site_count(), 25);
        for site in 0..25 {
            let mut s = site;
            for _ in 0..5 {
                s = g.shift(s, &[0, 1]);
            }
            assert_eq!(s, site);
            assert_eq!(g.site(&g.coords(site)), site);
            assert_eq!(g.step(g.step(site, 0, true), 0, false), site);
        }
        assert_eq!(g.shift(0, &[-1, -1]), 24);
        assert!(TorusGeometry::new(0, 3).is_err());
    }

    #[test]
    fn local_statistics_on_alternating_ring() {
        let (c, t) = alternating();
        assert_eq!(c.local_fraction(&t, 0), 0.0);
        assert_eq!(c.mean_field(&t, 0), 1.0);
        let ones = Configuration::filled(*c.geometry(), true);
        assert_eq!(ones.local_fraction(&t, 2), 1.0);
        let zeros = Configuration::filled(*c.geometry(), false);
        assert_eq!(zeros.mean_field(&t, 2), 0.0);
    }

    #[test]
    fn classification_examples() {
        let (c, t) = alternating();
        let half = Threshold::new(0.5).unwrap();
        assert_eq!(c.classify_site(&t, 0, half), SiteClass::PotentiallyStable);
        // r = 1/2 under K = 2
        assert_eq!(classify_count(1, 2, Threshold::new(0.4).unwrap()), SiteClass::Stable);
        assert_eq!(
            classify_count(1, 2, Threshold::new(0.8).unwrap()),
            SiteClass::UnstableBlocked
        );
    }

    #[test]
    fn kappa_snaps_decimal_thresholds() {
        let t = Threshold::new(0.3).unwrap();
        assert_eq!(t.kappa(10), 2);
        assert_eq!(t.kappa_floor_variant(10), 2);
        assert_eq!(t.kappa(7), 2); // 2.1 -> ceil 3 - 1
        assert_eq!(t.kappa_floor_variant(7), 1);
        assert_eq!(Threshold::new(0.0).unwrap().kappa(5), -1);
        for k in 1..40 {
            for s in 0..=k {
                let ps = classify_count(s, k, t) == SiteClass::PotentiallyStable;
                assert_eq!(ps, (s as i64) <= t.kappa(k), "k={k} s={s}");
            }
        }
    }

    #[test]
    fn box_neighborhoods() {
        let g1 = TorusGeometry::new(1, 10).unwrap();
        let nb = Neighborhood::build_box(&g1, 1, false).unwrap();
        assert_eq!(nb.offsets(), &[vec![-1], vec![1]]);
        assert_eq!(nb.size(), 2);
        assert_eq!(nb.diameter(), 2);
        let one = Neighborhood::build_box(&g1, 2, true).unwrap();
        assert_eq!(one.offsets(), &[vec![-1], vec![-2]]);
        assert_eq!(one.diameter(), 1);
        let g2 = TorusGeometry::new(2, 10).unwrap();
        assert_eq!(Neighborhood::build_box(&g2, 1, false).unwrap().size(), 8);
        assert!(matches!(
            Neighborhood::build_box(&TorusGeometry::new(1, 5).unwrap(), 2, false),
            Err(LatticeError::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn explicit_offsets_are_validated() {
        assert!(matches!(
            Neighborhood::from_offsets(1, vec![vec![0]]),
            Err(LatticeError::OffsetIsOrigin(_))
        ));
        assert!(matches!(
            Neighborhood::from_offsets(1, vec![vec![1], vec![1]]),
            Err(LatticeError::DuplicateOffset(..))
        ));
        let wraps = Neighborhood::from_offsets(1, vec![vec![1], vec![5]]).unwrap();
        let g = TorusGeometry::new(1, 4).unwrap();
        assert!(NeighborTable::new(&g, &wraps).is_err());
    }

    #[test]
    fn flip_and_exchange() {
        let (c, _) = alternating();
        assert_eq!(c.flip(2).unwrap().flip(2).unwrap(), c);
        assert_eq!(c.flip(0).unwrap().ones_count(), 3);
        let swapped = c.exchange(0, 1).unwrap();
        assert_eq!(swapped.ones_count(), c.ones_count());
        assert!(swapped.get(0) && !swapped.get(1));
        assert_eq!(c.exchange(0, 2), Err(LatticeError::NotAdjacent(0, 2)));
        let ones = Configuration::filled(*c.geometry(), true);
        assert_eq!(ones.exchange(3, 0).unwrap(), ones);
    }

    #[test]
    fn text_format() {
        let (c, _) = alternating();
        assert_eq!(c.to_text(), "1 4\n0101\n");
        assert_eq!(c.to_text().parse::<Configuration>().unwrap(), c);
        assert!("1 4\n01x1\n".parse::<Configuration>().is_err());
        assert!("1 4\n011\n".parse::<Configuration>().is_err());
    }
}
