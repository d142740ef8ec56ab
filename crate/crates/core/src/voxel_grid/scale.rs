use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::pc_io::{Coord, PointCloud};

/// One-bit coordinate reduction `round((2^{n−1} − 1) · c / (2^n − 1))`,
/// rounding half away from zero, evaluated exactly in integers.
#[inline]
pub fn downscale_coord(c: u32, bit_depth: u8) -> u32 {
    debug_assert!(bit_depth >= 2);
    let num = (1u64 << (bit_depth - 1)) - 1;
    let den = (1u64 << bit_depth) - 1;
    ((2 * num * c as u64 + den) / (2 * den)) as u32
}

fn downscale_vec(c: Coord, bit_depth: u8) -> Coord {
    c.map(|v| downscale_coord(v, bit_depth))
}

/// Child ↔ parent correspondence between two resolutions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleMap {
    source_bit_depth: u8,
    levels: u8,
    parent_of: BTreeMap<Coord, Coord>,
    children_of: BTreeMap<Coord, Vec<Coord>>,
}

impl ScaleMap {
    fn from_pairs(source_bit_depth: u8, levels: u8, pairs: impl IntoIterator<Item = (Coord, Coord)>) -> Self {
        let mut parent_of = BTreeMap::new();
        let mut children_of: BTreeMap<Coord, Vec<Coord>> = BTreeMap::new();
        for (child, parent) in pairs {
            if parent_of.insert(child, parent).is_none() {
                children_of.entry(parent).or_default().push(child);
            }
        }
        for kids in children_of.values_mut() {
            kids.sort_unstable();
        }
        Self { source_bit_depth, levels, parent_of, children_of }
    }

    pub fn source_bit_depth(&self) -> u8 {
        self.source_bit_depth
    }

    pub fn target_bit_depth(&self) -> u8 {
        self.source_bit_depth - self.levels
    }

    pub fn levels(&self) -> u8 {
        self.levels
    }

    pub fn parent_of(&self, child: Coord) -> Option<Coord> {
        self.parent_of.get(&child).copied()
    }

    pub fn children_of(&self, parent: Coord) -> &[Coord] {
        self.children_of.get(&parent).map_or(&[], Vec::as_slice)
    }

    /// `(child, parent)` pairs in lexicographic child order.
    pub fn pairs(&self) -> impl Iterator<Item = (Coord, Coord)> + '_ {
        self.parent_of.iter().map(|(c, p)| (*c, *p))
    }

    /// Parents in lexicographic order.
    pub fn parents(&self) -> impl Iterator<Item = Coord> + '_ {
        self.children_of.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.parent_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent_of.is_empty()
    }

    /// The parent a coordinate would have under the Eq. 5 chain, whether or
    /// not it is in the map.
    pub fn map_coord(&self, child: Coord) -> Coord {
        (0..self.levels).fold(child, |c, l| downscale_vec(c, self.source_bit_depth - l))
    }

    /// Chains `self` (n → m) with `next` (m → k) into n → k.
    pub fn compose(&self, next: &ScaleMap) -> Result<ScaleMap> {
        if next.source_bit_depth != self.target_bit_depth() {
            return Err(Error::Config(format!(
                "cannot chain a map ending at {} bits with one starting at {}",
                self.target_bit_depth(),
                next.source_bit_depth
            )));
        }
        let mut pairs = Vec::with_capacity(self.parent_of.len());
        for (&child, &mid) in &self.parent_of {
            let parent = next
                .parent_of(mid)
                .ok_or_else(|| Error::Config(format!("intermediate voxel {mid:?} missing from the second map")))?;
            pairs.push((child, parent));
        }
        Ok(ScaleMap::from_pairs(self.source_bit_depth, self.levels + next.levels, pairs))
    }

    /// Sidecar text: one `cx cy cz -> px py pz` line per child.
    pub fn to_sidecar(&self) -> String {
        let mut s = format!("# scale map {} -> {} bits\n", self.source_bit_depth, self.target_bit_depth());
        for (c, p) in self.pairs() {
            s.push_str(&format!("{} {} {} -> {} {} {}\n", c[0], c[1], c[2], p[0], p[1], p[2]));
        }
        s
    }

    pub fn from_sidecar(text: &str) -> Result<ScaleMap> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty scale-map sidecar".into()))?;
        let depths: Vec<u8> = header
            .trim_start_matches("# scale map")
            .split("->")
            .map(|t| t.trim().trim_end_matches("bits").trim().parse::<u8>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad sidecar header `{header}`")))?;
        let (src, dst) = match depths.as_slice() {
            [s, d] if s > d && *d >= 1 => (*s, *d),
            _ => return Err(Error::Config(format!("bad sidecar header `{header}`"))),
        };
        let parse3 = |t: &str| -> Option<Coord> {
            let v: Vec<u32> = t.split_whitespace().map(|x| x.parse().ok()).collect::<Option<_>>()?;
            v.try_into().ok()
        };
        let mut pairs = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (c, p) = line
                .split_once("->")
                .and_then(|(c, p)| Some((parse3(c)?, parse3(p)?)))
                .ok_or_else(|| Error::Config(format!("bad sidecar line {}: `{line}`", n + 2)))?;
            pairs.push((c, p));
        }
        Ok(ScaleMap::from_pairs(src, src - dst, pairs))
    }
}

/// Maps an `n`-bit cloud to `n − 1` bits.
///
/// Colliding children merge into one parent. The output is geometry only
/// (parents get spectral latents later, not averaged colors), with parents in
/// lexicographic order.
pub fn downscale_coords(pc: &PointCloud) -> Result<(PointCloud, ScaleMap)> {
    let n = pc.bit_depth();
    if n < 2 {
        return Err(Error::Config(format!("cannot downscale a {n}-bit cloud; need at least 2 bits")));
    }
    let map = ScaleMap::from_pairs(n, 1, pc.coords().iter().map(|&c| (c, downscale_vec(c, n))));
    let parents = PointCloud::geometry(map.parents().collect(), n - 1)?;
    Ok((parents, map))
}

/// Applies [`downscale_coords`] `levels` times, returning the coarsest cloud
/// and the composed map.
pub fn downscale_levels(pc: &PointCloud, levels: u8) -> Result<(PointCloud, ScaleMap)> {
    if levels == 0 {
        return Err(Error::Config("downscale needs at least one level".into()));
    }
    let (mut cloud, mut map) = downscale_coords(pc)?;
    for _ in 1..levels {
        let (next_cloud, next_map) = downscale_coords(&cloud)?;
        map = map.compose(&next_map)?;
        cloud = next_cloud;
    }
    Ok((cloud, map))
}

/// Copies each parent's feature row to every child, in `children` order.
pub fn unpool<T: Clone>(
    children: &PointCloud,
    parent_coords: &[Coord],
    parent_features: &[T],
    map: &ScaleMap,
) -> Result<Vec<T>> {
    if parent_coords.len() != parent_features.len() {
        return Err(Error::Shape(format!(
            "{} parents but {} feature rows",
            parent_coords.len(),
            parent_features.len()
        )));
    }
    let row_of: HashMap<Coord, usize> = parent_coords.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    children
        .coords()
        .iter()
        .map(|&child| {
            let parent = map.parent_of(child).unwrap_or_else(|| map.map_coord(child));
            row_of.get(&parent).map(|&r| parent_features[r].clone()).ok_or(Error::OrphanChild { child, parent })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_bit_reference_values() {
        assert_eq!(downscale_coord(1023, 10), 511);
        assert_eq!(downscale_coord(0, 10), 0);
        // 511 · 512 / 1023 = 255.75
        assert_eq!(downscale_coord(512, 10), 256);
    }

    #[test]
    fn matches_float_evaluation_of_the_formula() {
        for n in 2..=16u8 {
            let top = (1u32 << n) - 1;
            let step = (top / 997).max(1);
            for c in (0..=top).step_by(step as usize).chain([top]) {
                let exact = ((1u64 << (n - 1)) - 1) as f64 * c as f64 / top as f64;
                assert_eq!(downscale_coord(c, n), exact.round() as u32, "n={n} c={c}");
            }
        }
    }

    #[test]
    fn full_cell_has_eight_children() {
        let mut coords = Vec::new();
        for i in 0..8u32 {
            coords.push([100 + (i & 1), 100 + ((i >> 1) & 1), 100 + (i >> 2)]);
        }
        let pc = PointCloud::new(coords, vec![], 10).unwrap();
        let (parents, map) = downscale_coords(&pc).unwrap();
        assert_eq!(parents.coords(), &[[50, 50, 50]]);
        assert_eq!(parents.bit_depth(), 9);
        assert_eq!(map.children_of([50, 50, 50]).len(), 8);
        let rows = unpool(&pc, parents.coords(), &[vec![1.0, 2.0, 3.0]], &map).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0]; 8]);
    }

    #[test]
    fn unpool_reports_orphans() {
        let pc = PointCloud::new(vec![[4, 4, 4], [9, 9, 9]], vec![], 10).unwrap();
        let (_, map) = downscale_coords(&pc).unwrap();
        let err = unpool(&pc, &[[2, 2, 2]], &[0u8], &map).unwrap_err();
        assert!(matches!(err, Error::OrphanChild { child: [9, 9, 9], parent: [4, 4, 4] }));
    }

    #[test]
    fn one_bit_cloud_cannot_downscale() {
        let pc = PointCloud::new(vec![[1, 0, 0]], vec![], 1).unwrap();
        assert!(matches!(downscale_coords(&pc), Err(Error::Config(_))));
    }

    #[test]
    fn sidecar_round_trip() {
        let pc = PointCloud::new(vec![[4, 4, 4], [9, 1, 0], [1000, 3, 2]], vec![], 10).unwrap();
        let (_, map) = downscale_levels(&pc, 2).unwrap();
        let back = ScaleMap::from_sidecar(&map.to_sidecar()).unwrap();
        assert_eq!(back, map);
        assert!(ScaleMap::from_sidecar("# scale map 3 -> 5 bits\n").is_err());
    }

    proptest! {
        #[test]
        fn monotone(a in 0u32..1024, b in 0u32..1024) {
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(downscale_coord(lo, 10) <= downscale_coord(hi, 10));
        }

        #[test]
        fn map_round_trip_and_composition(
            pts in proptest::collection::btree_set((0u32..1024, 0u32..1024, 0u32..1024), 1..200),
        ) {
            let pc = PointCloud::new(pts.into_iter().map(|(x, y, z)| [x, y, z]).collect(), vec![], 10).unwrap();
            let (nine, m1) = downscale_coords(&pc).unwrap();
            let (eight, m2) = downscale_coords(&nine).unwrap();
            let (eight_direct, m12) = downscale_levels(&pc, 2).unwrap();
            prop_assert_eq!(&eight, &eight_direct);
            prop_assert_eq!(eight.bit_depth(), 8);
            for &c in pc.coords() {
                let p = m1.parent_of(c).unwrap();
                prop_assert!(m1.children_of(p).contains(&c));
                prop_assert!((1..=8).contains(&m1.children_of(p).len()));
                prop_assert_eq!(m12.parent_of(c).unwrap(), m2.parent_of(p).unwrap());
                prop_assert_eq!(m12.map_coord(c), m12.parent_of(c).unwrap());
            }
        }
    }
}
